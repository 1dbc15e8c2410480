"""Collections of transverse echelon data and iterated modification."""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from .echelon_core import (
    DivisorChain,
    EchelonDatum,
    EchelonDecomposition,
    decompose,
    level_exponent,
    random_chain,
    random_unimodular,
    reassemble,
    validate_datum,
)
from .errors import BadParameters, DimensionMismatch, InvalidDatum, NotTransverse, VarTableMismatch
from .lattice import (
    FracEntry,
    LatticeBasis,
    combine,
    det_monomial_ratio,
    lattice_equal,
    membership,
    monic_column,
)
from .modification import ModificationChain, modify
from .poly_ring import Field, PolyRing, QQ, mono_vars


@dataclass(frozen=True)
class PolyEchelonDatum:
    data: Tuple[EchelonDatum, ...]
    label: str = ""

    def __post_init__(self):
        if not self.data:
            raise BadParameters("a poly-echelon datum needs at least one echelon datum")
        ring, r = self.data[0].ring, self.data[0].rank
        for d in self.data[1:]:
            if d.ring != ring:
                raise VarTableMismatch("all data must share one variable table")
            if d.rank != r:
                raise DimensionMismatch("all data must have the same rank")

    @property
    def ring(self) -> PolyRing:
        return self.data[0].ring

    @property
    def k(self) -> int:
        return len(self.data)

    @property
    def lengths(self) -> Tuple[int, ...]:
        return tuple(d.m for d in self.data)


# --- intersections -------------------------------------------------------------


def _column_op(u, cu, s, cs):
    """u*cu - s*cs on lattice columns."""
    return combine([cu, cs], [u, -s])


def _regular_pivot(S, live_cols, live_rows, t) -> Optional[Tuple[int, int]]:
    """(col, row) of an entry mu*u dividing everything in its row and column.

    mu is a monomial prime to t and u a local unit, so the entry is a
    nonzerodivisor mod t; once isolated, "entry * q ≡ 0 mod t" forces q ∈ (t).
    """
    best = None
    for c in live_cols:
        for a in live_rows:
            e = S[c][a]
            if e.is_zero():
                continue
            mu = e.content_monomial()
            if any(x and y for x, y in zip(mu, t)) or not e.div_monomial(mu).is_local_unit():
                continue
            if best is not None and sum(mu) >= best[0]:
                continue
            if all(S[k][a].divides_by_monomial(mu) for k in live_cols) and \
                    all(S[c][b].divides_by_monomial(mu) for b in live_rows):
                best = (sum(mu), c, a)
    return None if best is None else best[1:]


def intersect_filtration(d: EchelonDatum, dec: EchelonDecomposition, M: LatticeBasis) -> List[LatticeBasis]:
    """[E^i ∩ M for i = 0..m] for M ⊆ E^0.

    Level by level: with F a basis of E^{i-1} ∩ M, the rows of F's adapted
    coordinates that get divided at level i must vanish mod t_i.  Elimination
    mod t_i (column operations tracked on F, row operations on the quotient
    only) with nonzerodivisor pivots exposes the kernel as F·Q·diag(t_i on
    pivots).  A nonzero residual means the image is not free, which we report
    as a transversality failure.
    """
    chain, m = d.chain, d.m
    if not d.E(0).contains_lattice(M):
        raise NotTransverse(f"{M.label or 'lattice'} is not contained in E^0")
    out = [M.relabel(f"E^0∩{M.label}")]
    F = list(M.columns)
    for i in range(1, m + 1):
        t = chain.t(i)
        prev = dec.basis.scale_columns([level_exponent(chain, b, i - 1) for b in dec.blocks])
        rows = [k for k, b in enumerate(dec.blocks) if b >= m - i + 1]
        if not any(t) or not rows:
            out.append(LatticeBasis(d.ring, tuple(F), f"E^{i}∩{M.label}"))
            continue
        S = []  # S[c] = reduced coordinates (restricted rows) of F[c]
        for c, col in enumerate(F):
            co = membership(col, prev)
            if co is None:
                raise NotTransverse(f"level {i}: intersection basis left E^{i - 1}")
            S.append([co.num[k].reduce_mod_monomial(t) for k in rows])
        live = list(range(len(F)))
        live_rows = list(range(len(rows)))
        pivots = []
        while True:
            found = _regular_pivot(S, live, live_rows, t)
            if found is None:
                break
            p, a = found
            mu = S[p][a].content_monomial()
            u = S[p][a].div_monomial(mu)
            # column operations clear row a (and are applied to the basis F)
            for c in live:
                if c == p or S[c][a].is_zero():
                    continue
                s = S[c][a].div_monomial(mu)
                F[c] = _column_op(u, F[c], s, F[p])
                S[c] = [(u * x - s * y).reduce_mod_monomial(t) for x, y in zip(S[c], S[p])]
            # row operations clear column p (a change of basis of the quotient only)
            for b in live_rows:
                if b == a or S[p][b].is_zero():
                    continue
                s = S[p][b].div_monomial(mu)
                for c in live:
                    S[c][b] = (u * S[c][b] - s * S[c][a]).reduce_mod_monomial(t)
            pivots.append(p)
            live.remove(p)
            live_rows.remove(a)
        for c in live:
            if any(not x.is_zero() for x in S[c]):
                raise NotTransverse(f"level {i}: image mod {d.ring.format_monomial(t)} is not free")
        for p in pivots:
            F[p] = tuple(e.mul_laurent(t) for e in F[p])
        F = [monic_column(c) for c in F]
        out.append(LatticeBasis(d.ring, tuple(F), f"E^{i}∩{M.label}"))
    return out


def intersected_datum(d: EchelonDatum, dec: EchelonDecomposition, M: LatticeBasis, label="") -> EchelonDatum:
    return EchelonDatum(d.ring, d.chain, tuple(intersect_filtration(d, dec, M)), label)


# --- transversality ------------------------------------------------------------


@dataclass
class TransversalityReport:
    failures: List[dict] = field(default_factory=list)
    checked_pairs: int = 0

    @property
    def ok(self) -> bool:
        return not self.failures

    def raise_first(self):
        if self.failures:
            raise NotTransverse(self.failures[0]["detail"])

    def as_dict(self):
        return {"transverse": self.ok, "checked_pairs": self.checked_pairs, "failures": self.failures}


def check_transverse(p: PolyEchelonDatum) -> TransversalityReport:
    rep = TransversalityReport()
    ring = p.ring
    vars_of = [d.chain.variables() for d in p.data]
    for a, b in itertools.combinations(range(p.k), 2):
        shared = vars_of[a] & vars_of[b]
        if shared:
            rep.failures.append({"clause": "disjoint", "data": [a, b],
                                 "detail": f"data {a} and {b} share divisor variables {sorted(shared)}"})
    if rep.failures:
        return rep
    for a in range(1, p.k):
        if not lattice_equal(p.data[a].E(0), p.data[0].E(0)):
            rep.failures.append({"clause": "ambient", "data": [0, a],
                                 "detail": f"datum {a} has a different E^0"})
    decs = []
    for a, d in enumerate(p.data):
        v = validate_datum(d)
        if not v.valid:
            rep.failures.append({"clause": "datum", "data": [a], "detail": f"datum {a}: {v.first()}"})
        decs.append(decompose(d, validated=True) if v.valid else None)
    if rep.failures:
        return rep
    for a, b in itertools.permutations(range(p.k), 2):
        rep.checked_pairs += 1
        for k in range(1, p.data[b].m + 1):
            try:
                sub = intersected_datum(p.data[a], decs[a], p.data[b].E(k))
                v = validate_datum(sub)
                if not v.valid:
                    raise NotTransverse(str(v.first()))
            except (NotTransverse, InvalidDatum) as ex:
                rep.failures.append({"clause": "intersection", "data": [a, b], "level": k,
                                     "detail": f"(E_{a}^i ∩ E_{b}^{k}) is not an echelon datum: {ex}"})
    return rep


# --- induced data and iteration --------------------------------------------------


def induced_datum(chi: EchelonDatum, chi2: EchelonDatum, mc: Optional[ModificationChain] = None,
                  label: str = "") -> EchelonDatum:
    """χ′ carried onto Mod(χ, E): level k is Mod(χ, F′^k)."""
    mc = mc or modify(chi)
    dec = mc.decomposition
    levels = [mc.result]
    for k in range(1, chi2.m + 1):
        sub = intersected_datum(chi, dec, chi2.E(k))
        levels.append(modify(sub).result.relabel(f"Mod(E^{k})"))
    out = EchelonDatum(chi.ring, chi2.chain, tuple(levels), label or chi2.label)
    validate_datum(out).raise_first()
    return out


@dataclass(eq=False)
class PolyModificationState:
    order: Tuple[int, ...]
    stage_bundles: List[LatticeBasis]
    carried_data: List[List[EchelonDatum]]
    certificates: Dict[str, object] = field(default_factory=dict)

    @property
    def result(self) -> LatticeBasis:
        return self.stage_bundles[-1]


def poly_modify(p: PolyEchelonDatum, order: Optional[Sequence[int]] = None) -> PolyModificationState:
    order = tuple(range(p.k)) if order is None else tuple(order)
    if sorted(order) != list(range(p.k)):
        raise BadParameters(f"{order} is not a permutation of 0..{p.k - 1}")
    remaining = [p.data[a] for a in order]
    stages = [p.data[0].E(0).relabel("M_0")]
    carried = [list(remaining)]
    certs: Dict[str, object] = {}
    while remaining:
        head, rest = remaining[0], remaining[1:]
        mc = modify(head)
        nxt = mc.result.relabel(f"M_{len(stages)}")
        if not nxt.contains_lattice(stages[-1]):
            raise NotTransverse(f"M_{len(stages) - 1} is not contained in M_{len(stages)}")
        ex, in_model = det_monomial_ratio(nxt, stages[-1])
        certs[f"M_{len(stages)}/M_{len(stages) - 1}"] = {
            p.ring.vars[i]: e for i, e in enumerate(ex) if e} if in_model else "outside monomial model"
        stages.append(nxt)
        remaining = [induced_datum(head, other, mc) for other in rest]
        carried.append(list(remaining))
    return PolyModificationState(order, stages, carried, certs)


@dataclass
class OrderReport:
    ok: bool
    orders: List[Tuple[int, ...]]
    witness: Optional[Tuple[Tuple[int, ...], Tuple[int, ...]]] = None

    def as_dict(self):
        return {"order_independent": self.ok, "orders": [list(o) for o in self.orders],
                "witness": [list(w) for w in self.witness] if self.witness else None}


def order_independence_check(p: PolyEchelonDatum, seed: int = 0, samples: int = 6) -> OrderReport:
    perms = list(itertools.permutations(range(p.k)))
    if p.k > 3:
        rng = random.Random(seed)
        perms = [perms[0]] + rng.sample(perms[1:], min(samples - 1, len(perms) - 1))
    base = poly_modify(p, perms[0]).result
    for o in perms[1:]:
        if not lattice_equal(base, poly_modify(p, o).result):
            return OrderReport(False, perms, (perms[0], o))
    return OrderReport(True, perms)


# --- generator ---------------------------------------------------------------


def pair_ring(k: int, field: Field = QQ) -> PolyRing:
    return PolyRing(tuple((f"x{a + 1}", f"y{a + 1}") for a in range(k)), (), field)


def random_poly_datum(seed: int, k: int, r: int, m_max: int = 2, degree_bound: int = 1,
                      scramble_count: int = 2, ring: Optional[PolyRing] = None) -> PolyEchelonDatum:
    """k data on distinct divisor pairs, all diagonal in one common basis g.

    Each datum gets its own chain on its own pair and its own assignment of
    coordinates to blocks, so the data are transverse by construction.
    """
    if k < 1 or r < 1 or m_max < 1:
        raise BadParameters("need k, r, m_max >= 1")
    ring = ring or pair_ring(k)
    if len(ring.pairs) < k:
        raise BadParameters(f"ring has {len(ring.pairs)} divisor pairs, need {k}")
    rng = random.Random(seed)
    g = random_unimodular(rng, ring, r, scramble_count, degree_bound)
    basis = LatticeBasis.standard(ring, r).left_multiply(g)
    data = []
    for a in range(k):
        m = rng.randint(1, m_max)
        chain = random_chain(rng, ring, m, pair=a)
        blocks = tuple(rng.randint(0, m) for _ in range(r))
        ranks = tuple(blocks.count(j) for j in range(m + 1))
        dec = EchelonDecomposition(ranks, basis, blocks)
        d = reassemble(dec, chain, f"chi{a + 1}")
        # present E^0 in the standard basis so every datum shares it literally
        filt = (LatticeBasis.standard(ring, r, "E^0"),) + tuple(d.filtration[1:])
        data.append(EchelonDatum(ring, chain, filt, f"chi{a + 1}"))
    return PolyEchelonDatum(tuple(data), f"seed{seed}")
