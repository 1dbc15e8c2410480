"""Determinant and K-class bookkeeping along a modification chain."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List

from .echelon_core import EchelonDatum
from .errors import ClosedFormMismatch
from .lattice import det_monomial_ratio
from .modification import ModificationChain


@dataclass(frozen=True)
class DivisorClassLedger:
    """ord of det(E_i)/det(E_0) per variable (zero entries omitted)."""

    coefficients: Dict[str, int] = field(default_factory=dict)

    def __sub__(self, other: "DivisorClassLedger") -> "DivisorClassLedger":
        keys = set(self.coefficients) | set(other.coefficients)
        diff = {k: self.coefficients.get(k, 0) - other.coefficients.get(k, 0) for k in keys}
        return DivisorClassLedger({k: v for k, v in sorted(diff.items()) if v})

    def as_dict(self) -> Dict[str, int]:
        return dict(sorted(self.coefficients.items()))


def expected_ledger(d: EchelonDatum, ranks) -> Dict[str, int]:
    """Closed-form prediction: each y_k contributes -(r_0 + ... + r_{m-k})."""
    ring, m = d.ring, d.m
    acc = [0] * ring.nvars
    for k in range(1, m + 1):
        w = sum(ranks[: m - k + 1])
        for v, e in enumerate(d.chain.y(k)):
            acc[v] -= w * e
    return {ring.vars[v]: e for v, e in enumerate(acc) if e}


def det_ledger(c: ModificationChain, d: EchelonDatum) -> List[DivisorClassLedger]:
    ring = d.ring
    out = []
    for j, L in enumerate(c.stages):
        ex, in_model = det_monomial_ratio(L, c.stages[0])
        if not in_model:
            raise ClosedFormMismatch(f"det(E_{j}) has a non-unit cofactor")
        out.append(DivisorClassLedger({ring.vars[v]: e for v, e in enumerate(ex) if e}))
    want = expected_ledger(d, c.decomposition.ranks)
    if out[-1].as_dict() != want:
        raise ClosedFormMismatch(f"det ledger {out[-1].as_dict()} differs from {want}")
    return out


@dataclass(frozen=True)
class KClass:
    """[E_{j+1}] - [E_j]: a free rank-q module over R/(y_{j+1}) twisted by 1/(y_1...y_{j+1})."""

    step: int
    support: str
    rank: int
    twist: str

    def as_dict(self):
        return {"step": self.step, "support": self.support, "rank": self.rank, "twist": self.twist}


def k_class_report(c: ModificationChain) -> List[KClass]:
    d = c.datum
    ring = d.ring
    out = []
    for q in c.quotients:
        if q.free_rank == 0:
            continue
        out.append(KClass(q.ambient_step, ring.format_monomial(q.annihilator), q.free_rank,
                          "1/" + ring.format_monomial(q.twist) if any(q.twist) else "1"))
    return out


def consistency_check(c: ModificationChain, ledgers: List[DivisorClassLedger]) -> bool:
    """Telescoping: ledger steps equal -rank * y_{j+1} for each quotient class."""
    d = c.datum
    ring = d.ring
    for j, q in enumerate(c.quotients):
        step = (ledgers[j + 1] - ledgers[j]).as_dict()
        want = {ring.vars[v]: -q.free_rank * e for v, e in enumerate(d.chain.y(j + 1)) if e and q.free_rank}
        if step != want:
            return False
    return True
