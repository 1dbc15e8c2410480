"""Echelon data: validation, echelon decomposition, reassembly, generators."""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from .errors import (
    BadParameters,
    CommonComponentViolation,
    ContainmentViolation,
    DecompositionFailure,
    EffectivityViolation,
    InvalidDatum,
    NotContained,
    NotFullRank,
    PersistenceViolation,
    RankMismatch,
    SingularMatrix,
    VarTableMismatch,
)
from .lattice import (
    FracEntry,
    LatticeBasis,
    combine,
    coordinate_matrix,
    lattice_equal,
    monic_column,
    twist,
    unit_pivot_reduce,
)
from .poly_ring import (
    Mono,
    Poly,
    PolyRing,
    mono_div,
    mono_divides,
    mono_mul,
    mono_prod,
    mono_vars,
)


@dataclass(frozen=True)
class DivisorChain:
    """Step equations (t_i, y_i) for i = 1..m; x_i = t_i / y_i."""

    ring: PolyRing
    steps: Tuple[Tuple[Mono, Mono], ...]

    @classmethod
    def parse(cls, ring: PolyRing, steps: Sequence[Tuple[str, str]]) -> "DivisorChain":
        return cls(ring, tuple((ring.parse_monomial(t), ring.parse_monomial(y)) for t, y in steps))

    @classmethod
    def scalar(cls, ring: PolyRing, m: int, t="x*y", y="y") -> "DivisorChain":
        return cls.parse(ring, [(t, y)] * m)

    @property
    def length(self) -> int:
        return len(self.steps)

    def t(self, i: int) -> Mono:
        return self.steps[i - 1][0]

    def y(self, i: int) -> Mono:
        return self.steps[i - 1][1]

    def x(self, i: int) -> Mono:
        return mono_div(self.t(i), self.y(i))

    def delta(self, i: int) -> Mono:
        """Equation of delta_i = t_1 ... t_i."""
        return mono_prod((self.t(k) for k in range(1, i + 1)), self.ring.nvars)

    def D(self, i: int) -> Mono:
        """Equation of D_i = y_1 ... y_i."""
        return mono_prod((self.y(k) for k in range(1, i + 1)), self.ring.nvars)

    def t_range(self, lo: int, hi: int) -> Mono:
        """t_lo * ... * t_hi (empty product when lo > hi)."""
        return mono_prod((self.t(k) for k in range(lo, hi + 1)), self.ring.nvars)

    def y_range(self, lo: int, hi: int) -> Mono:
        return mono_prod((self.y(k) for k in range(lo, hi + 1)), self.ring.nvars)

    def variables(self) -> set:
        out = set()
        for t, y in self.steps:
            out |= mono_vars(self.ring, t) | mono_vars(self.ring, y)
        return out

    def y_variables(self) -> set:
        out = set()
        for _, y in self.steps:
            out |= mono_vars(self.ring, y)
        return out

    def with_y(self, ys: Sequence[Mono]) -> "DivisorChain":
        return DivisorChain(self.ring, tuple((t, y) for (t, _), y in zip(self.steps, ys)))

    def delta_variant(self) -> "DivisorChain":
        """Same t's with D = delta."""
        return self.with_y([t for t, _ in self.steps])

    def trivial_variant(self) -> "DivisorChain":
        """Same t's with every y_i = 1."""
        return self.with_y([self.ring.unit_mono] * self.length)

    def chain_violations(self) -> List[InvalidDatum]:
        out: List[InvalidDatum] = []
        ring = self.ring
        ys, xs = set(), set()
        for i in range(1, self.length + 1):
            t, y = self.t(i), self.y(i)
            if not mono_divides(y, t):
                out.append(EffectivityViolation(
                    i, f"y_{i}={ring.format_monomial(y)} does not divide t_{i}={ring.format_monomial(t)}"))
                return out
            ys |= mono_vars(ring, y)
            xs |= mono_vars(ring, self.x(i))
            common = ys & xs
            if common:
                out.append(CommonComponentViolation(i, f"D_{i} and its complement share {sorted(common)}"))
                return out
        return out


@dataclass(frozen=True, eq=False)
class EchelonDatum:
    """Descending filtration E^0 ⊇ ... ⊇ E^m plus a divisor chain."""

    ring: PolyRing
    chain: DivisorChain
    filtration: Tuple[LatticeBasis, ...]
    label: str = ""

    def __post_init__(self):
        if len(self.filtration) != self.chain.length + 1:
            raise RankMismatch(
                f"filtration has {len(self.filtration)} lattices, chain length {self.chain.length} needs "
                f"{self.chain.length + 1}")
        if self.chain.length < 1:
            raise BadParameters("chain length m must be at least 1")
        r = self.filtration[0].rank
        for L in self.filtration:
            if L.rank != r:
                raise RankMismatch("filtration lattices have different ranks")
            if L.ring != self.ring:
                raise VarTableMismatch("filtration lattice over a different ring")

    @property
    def m(self) -> int:
        return self.chain.length

    @property
    def rank(self) -> int:
        return self.filtration[0].rank

    @property
    def ambient(self) -> LatticeBasis:
        return self.filtration[0]

    def E(self, i: int) -> LatticeBasis:
        return self.filtration[i]

    def with_chain(self, chain: DivisorChain) -> "EchelonDatum":
        return EchelonDatum(self.ring, chain, self.filtration, self.label)


# --- validation ----------------------------------------------------------------


@dataclass
class ValidationReport:
    failures: List[InvalidDatum] = field(default_factory=list)
    steps: Dict[int, dict] = field(default_factory=dict)
    split_ranks: Dict[int, int] = field(default_factory=dict)

    @property
    def valid(self) -> bool:
        return not self.failures

    def first(self) -> Optional[InvalidDatum]:
        return self.failures[0] if self.failures else None

    def raise_first(self):
        if self.failures:
            raise self.failures[0]

    def as_dict(self) -> dict:
        return {
            "valid": self.valid,
            "failures": [f.as_dict() for f in self.failures],
            "steps": {str(i): v for i, v in sorted(self.steps.items())},
            "split_ranks": {str(i): q for i, q in sorted(self.split_ranks.items())},
        }


def validate_datum(d: EchelonDatum) -> ValidationReport:
    """Containments, divisor-chain invariants and persistence for all j < i."""
    rep = ValidationReport()
    ring = d.ring
    fails: List[InvalidDatum] = list(d.chain.chain_violations())
    for i, L in enumerate(d.filtration):
        try:
            L._det_adj
        except SingularMatrix:
            fails.append(NotFullRank(i, f"E^{i} has zero determinant"))
    if any(isinstance(f, NotFullRank) for f in fails):
        rep.failures = sorted(fails, key=lambda f: f.key())
        return rep

    ok_upto = 0  # E^0..E^ok_upto form a verified descending chain
    broken = False
    for i in range(1, d.m + 1):
        step = {"contained": None, "t_contained": None, "persistence": {}}
        rep.steps[i] = step
        Ei, Eprev = d.E(i), d.E(i - 1)
        t = d.chain.t(i)
        step["contained"] = Eprev.contains_lattice(Ei)
        if not step["contained"]:
            fails.append(ContainmentViolation(i, f"E^{i} is not contained in E^{i - 1}"))
            broken = True
            continue
        tprev = twist(Eprev, t, "down")
        step["t_contained"] = Ei.contains_lattice(tprev)
        if not step["t_contained"]:
            fails.append(ContainmentViolation(i, f"t_{i} E^{i - 1} is not contained in E^{i}"))
            broken = True
            continue
        if broken:
            continue
        ok_upto = i
        if not any(t):
            rep.split_ranks[i] = d.rank
            continue
        ranks = {}
        for j in range(i - 1, -1, -1):
            T = coordinate_matrix(Ei.columns, d.E(j), f"E^{i}")
            pivots, residual = unit_pivot_reduce(T, t)
            ranks[j] = len(pivots)
            good = not residual and len(pivots) == ranks[i - 1]
            step["persistence"][str(j)] = good
            if not good:
                why = "image is not free and split" if residual else (
                    f"image has rank {len(pivots)} in E^{j}, expected {ranks[i - 1]}")
                fails.append(PersistenceViolation(i, j, why))
        rep.split_ranks[i] = ranks[i - 1]
    rep.failures = sorted(fails, key=lambda f: f.key())
    return rep


# --- decomposition -------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class EchelonDecomposition:
    """Basis of E^0 whose columns are grouped into blocks A_0, ..., A_m."""

    ranks: Tuple[int, ...]
    basis: LatticeBasis
    blocks: Tuple[int, ...]

    @property
    def m(self) -> int:
        return len(self.ranks) - 1

    @property
    def rank(self) -> int:
        return self.basis.rank


def level_exponent(chain: DivisorChain, block: int, level: int) -> Mono:
    """Coefficient of A_block inside E^level: t_{m-block+1} ... t_level."""
    return chain.t_range(chain.length - block + 1, level)


def reassemble(dec: EchelonDecomposition, chain: DivisorChain, label="") -> EchelonDatum:
    if sum(dec.ranks) != dec.rank:
        raise RankMismatch(f"block ranks {dec.ranks} do not sum to {dec.rank}")
    if dec.m != chain.length:
        raise RankMismatch(f"decomposition has {dec.m + 1} blocks, chain length {chain.length}")
    U = dec.basis
    filt = [U.relabel("E^0")]
    for i in range(1, chain.length + 1):
        filt.append(U.scale_columns([level_exponent(chain, b, i) for b in dec.blocks], f"E^{i}"))
    return EchelonDatum(U.ring, chain, tuple(filt), label)


def decompose(d: EchelonDatum, validated: bool = False) -> EchelonDecomposition:
    """Adapted basis by descending through the filtration.

    Maintains a basis of E^0 in which every E^l, l < i, is diagonal.  At level
    i the coordinates of E^i in the current basis of E^{i-1} are column-reduced
    with local-unit pivots taken in rows still undivided; a pivot column
    replaces its pivot basis vector (a local-unit change of basis that keeps
    the earlier levels diagonal).  Rows left without a pivot get divided by t_i.
    """
    if not validated:
        validate_datum(d).raise_first()
    ring = d.ring
    r, m = d.rank, d.m
    B = [tuple(c) for c in d.ambient.columns]
    depth: List[Optional[int]] = [None] * r  # None: still undivided

    def coef(k: int, level: int) -> Mono:
        if depth[k] is None:
            return ring.unit_mono
        return d.chain.t_range(depth[k] + 1, level)

    for i in range(1, m + 1):
        t = d.chain.t(i)
        if not any(t):
            continue
        F = [tuple(e.mul_laurent(coef(k, i - 1)) for e in B[k]) for k in range(r)]
        Fbasis = LatticeBasis(ring, tuple(F), f"E^{i - 1}")
        T = coordinate_matrix(d.E(i).columns, Fbasis, f"E^{i}")
        # W[c] is the vector whose coordinates are T[:, c] up to the common unit
        # denominator; installing W[p] instead of F*T[:, p] keeps that unit out of B
        W = [tuple(c) for c in d.E(i).columns]
        kept: List[int] = []
        used: set = set()
        while True:
            pivot = None
            for a in range(r):
                if depth[a] is not None or a in kept:
                    continue
                for p in range(r):
                    if p not in used and T[a][p].is_local_unit():
                        pivot = (a, p)
                        break
                if pivot:
                    break
            if pivot is None:
                break
            a, p = pivot
            v = combine(F, [T[row][p] for row in range(r)])
            B[a] = W[p]
            F[a] = v
            u = T[a][p]
            for c in range(r):
                if c == p:
                    continue
                s = T[a][c]
                if s.is_zero():
                    continue
                for row in range(r):
                    if row != a:
                        T[row][c] = u * T[row][c] - T[row][p] * s
                T[a][c] = ring.zero
                W[c] = combine([W[c], W[p]], [u, -s])
            for row in range(r):
                T[row][p] = ring.one if row == a else ring.zero
            kept.append(a)
            used.add(p)
        for row in range(r):
            if row in kept:
                continue
            for c in range(r):
                if c not in used and not T[row][c].divides_by_monomial(t):
                    raise DecompositionFailure(
                        f"level {i}: no unit pivot completes the split (entry {T[row][c]} at ({row},{c}))")
        for a in range(r):
            if depth[a] is None and a not in kept:
                depth[a] = i - 1

    blocks_raw = [m - (m if dp is None else dp) for dp in depth]
    order = sorted(range(r), key=lambda k: (blocks_raw[k], k))
    U = LatticeBasis(ring, tuple(monic_column(B[k]) for k in order), "U")
    blocks = tuple(blocks_raw[k] for k in order)
    ranks = tuple(blocks.count(j) for j in range(m + 1))
    dec = EchelonDecomposition(ranks, U, blocks)
    back = reassemble(dec, d.chain)
    for i in range(m + 1):
        if not lattice_equal(back.E(i), d.E(i)):
            raise DecompositionFailure(f"reassembled E^{i} differs from the input")
    return dec


# --- generators ----------------------------------------------------------------


def random_poly(rng: random.Random, ring: PolyRing, degree: int, variables=None, terms=(1, 3)) -> Poly:
    names = list(variables) if variables is not None else list(ring.vars)
    acc = ring.zero
    for _ in range(rng.randint(*terms)):
        e = {}
        budget = rng.randint(0, degree) if names else 0
        for _ in range(budget):
            v = rng.choice(names)
            e[v] = e.get(v, 0) + 1
        c = rng.choice([-3, -2, -1, 1, 2, 3])
        acc = acc + ring.monomial_poly(ring.mono(e), c)
    return acc


def random_unimodular(rng: random.Random, ring: PolyRing, r: int, steps: int, degree: int,
                      variables=None) -> List[List[Poly]]:
    """Product of elementary matrices E_kl(p) and unit diagonal scalings."""
    g = [[ring.one if i == j else ring.zero for j in range(r)] for i in range(r)]
    for _ in range(steps):
        if r > 1 and rng.random() < 0.8:
            k, l = rng.sample(range(r), 2)
            p = random_poly(rng, ring, degree, variables)
            # row k += p * row l
            g[k] = [a + p * b for a, b in zip(g[k], g[l])]
        else:
            k = rng.randrange(r)
            c = rng.choice([-3, -2, -1, 2, 3])
            if ring.field(c) == 0:
                c = 1
            g[k] = [a.scale(c) for a in g[k]]
    return g


def random_chain(rng: random.Random, ring: PolyRing, m: int, pair: int = 0, kind: str = "mixed") -> DivisorChain:
    """Chain on one divisor pair: t_i = x^a y^b with y-part y^b (or per ``kind``)."""
    xname, yname = ring.pairs[pair]
    steps = []
    for _ in range(m):
        a, b = 0, 0
        while a + b == 0:
            a, b = rng.randint(0, 2), rng.randint(0, 2)
        t = ring.mono({xname: a, yname: b})
        if kind == "delta":
            y = t
        elif kind == "trivial":
            y = ring.unit_mono
        else:
            y = ring.mono({yname: b})
        steps.append((t, y))
    return DivisorChain(ring, tuple(steps))


def normal_form(ring: PolyRing, chain: DivisorChain, ranks: Sequence[int], label="") -> EchelonDatum:
    r = sum(ranks)
    blocks = tuple(j for j, n in enumerate(ranks) for _ in range(n))
    dec = EchelonDecomposition(tuple(ranks), LatticeBasis.standard(ring, r), blocks)
    return reassemble(dec, chain, label)


def transform_datum(d: EchelonDatum, g: Sequence[Sequence[Poly]], label="") -> EchelonDatum:
    """g * E^i for every level (g a polynomial matrix, row-major)."""
    filt = tuple(L.left_multiply(g, L.label) for L in d.filtration)
    return EchelonDatum(d.ring, d.chain, filt, label or d.label)


def random_datum(seed: int, r: int, m: int, ranks: Optional[Sequence[int]] = None, degree_bound: int = 1,
                 scramble_count: int = 0, ring: Optional[PolyRing] = None,
                 chain: Optional[DivisorChain] = None, label: str = "") -> EchelonDatum:
    """Scrambled normal-form datum; deterministic in ``seed``.

    The normal form for ``ranks`` is multiplied on the left by a random
    unimodular g, and each level's basis is re-presented by an independent
    unimodular change of basis.  E^0 is kept as the identity basis.
    """
    if r < 1 or m < 1:
        raise BadParameters("need r >= 1 and m >= 1")
    rng = random.Random(seed)
    ring = ring or PolyRing()
    if ranks is None:
        ranks = [0] * (m + 1)
        for _ in range(r):
            ranks[rng.randrange(m + 1)] += 1
    ranks = tuple(int(n) for n in ranks)
    if len(ranks) != m + 1 or sum(ranks) != r or min(ranks) < 0:
        raise BadParameters(f"ranks {ranks} must have m+1={m + 1} non-negative entries summing to r={r}")
    if degree_bound < 0 or scramble_count < 0:
        raise BadParameters("degree_bound and scramble_count must be non-negative")
    chain = chain or DivisorChain.scalar(ring, m, *_default_pair(ring))
    if chain.length != m:
        raise BadParameters("chain length differs from m")
    nf = normal_form(ring, chain, ranks)
    if scramble_count == 0:
        return EchelonDatum(ring, chain, nf.filtration, label)
    g = random_unimodular(rng, ring, r, scramble_count, degree_bound)
    filt = [LatticeBasis.standard(ring, r, "E^0")]
    for i in range(1, m + 1):
        h = random_unimodular(rng, ring, r, scramble_count, degree_bound)
        L = nf.E(i).left_multiply(g)
        # right multiplication: new columns are combinations of old ones
        cols = tuple(combine(L.columns, [h[k][j] for k in range(r)]) for j in range(r))
        filt.append(LatticeBasis(ring, cols, f"E^{i}"))
    return EchelonDatum(ring, chain, tuple(filt), label)


def _default_pair(ring: PolyRing):
    x, y = ring.pairs[0]
    return f"{x}*{y}", y


def scalar_datum(ring: PolyRing, ranks: Sequence[int], t="x*y", y="y", label="") -> EchelonDatum:
    """Normal-form scalar datum: every step uses the same (t, y)."""
    chain = DivisorChain.scalar(ring, len(ranks) - 1, t, y)
    return normal_form(ring, chain, ranks, label)
