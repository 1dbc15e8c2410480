"""Full-rank lattices in the generic fiber K^r over the local ring at the origin.

A lattice is presented by r basis columns whose entries are polynomials over
monomial denominators.  Coefficients of R-linear combinations may be any
element of the local ring; in practice they are polynomials divided by a
local unit, which is what :class:`Coordinates` carries.

Membership is decided with the adjugate: if B = N/mu with N polynomial and
det N = m*u (m a monomial, u a local unit), then v = w/nu lies in the lattice
iff nu*m divides mu*adj(N)*w entrywise.  Monomial ideals are contracted from
the localization, so divisibility can be tested in the polynomial ring.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, reduce
from typing import Dict, List, Optional, Sequence, Tuple

from .errors import (
    DimensionMismatch,
    NotContained,
    NotFreeSplit,
    SingularMatrix,
    VarTableMismatch,
)
from .poly_ring import (
    Mono,
    Poly,
    PolyRing,
    mono_div,
    mono_gcd,
    mono_lcm,
    mono_mul,
)


# --- entries -----------------------------------------------------------------


@dataclass(frozen=True)
class FracEntry:
    """numerator / denominator with a monomial denominator."""

    num: Poly
    den: Mono

    @classmethod
    def of(cls, p: Poly) -> "FracEntry":
        return cls(p, p.ring.unit_mono)

    @classmethod
    def laurent(cls, ring: PolyRing, exps: Sequence[int], c=1) -> "FracEntry":
        """Entry for a Laurent monomial c * prod x^e (e may be negative)."""
        pos = tuple(max(e, 0) for e in exps)
        neg = tuple(max(-e, 0) for e in exps)
        return cls(ring.monomial_poly(pos, c), neg)

    @property
    def ring(self) -> PolyRing:
        return self.num.ring

    def normalized(self) -> "FracEntry":
        if not any(self.den):
            return self
        if self.num.is_zero():
            return FracEntry(self.num, self.ring.unit_mono)
        g = mono_gcd(self.num.content_monomial(), self.den)
        if not any(g):
            return self
        return FracEntry(self.num.div_monomial(g), mono_div(self.den, g))

    def is_zero(self) -> bool:
        return self.num.is_zero()

    def is_polynomial(self) -> bool:
        return self.num.divides_by_monomial(self.den)

    def to_poly(self) -> Poly:
        return self.num.div_monomial(self.den)

    def __add__(self, other: "FracEntry") -> "FracEntry":
        l = mono_lcm(self.den, other.den)
        a = self.num.mul_monomial(mono_div(l, self.den))
        b = other.num.mul_monomial(mono_div(l, other.den))
        return FracEntry(a + b, l).normalized()

    def __neg__(self):
        return FracEntry(-self.num, self.den)

    def __sub__(self, other):
        return self + (-other)

    def mul_poly(self, p: Poly) -> "FracEntry":
        return FracEntry(self.num * p, self.den).normalized()

    def mul_laurent(self, exps: Sequence[int]) -> "FracEntry":
        pos = tuple(max(e, 0) for e in exps)
        neg = tuple(max(-e, 0) for e in exps)
        return FracEntry(self.num.mul_monomial(pos), mono_mul(self.den, neg)).normalized()

    def __mul__(self, other: "FracEntry") -> "FracEntry":
        return FracEntry(self.num * other.num, mono_mul(self.den, other.den)).normalized()

    def semantic_eq(self, other: "FracEntry") -> bool:
        return (self.num.mul_monomial(other.den) == other.num.mul_monomial(self.den))

    def __str__(self):
        return format_frac(self)


def format_frac(e: FracEntry) -> str:
    e = e.normalized()
    if not any(e.den):
        return str(e.num)
    den = e.ring.format_monomial(e.den)
    if e.num.is_monomial() and isinstance(next(iter(e.num.terms.values())), int):
        return f"{e.num}/{den}"
    return f"({e.num})/{den}"


def parse_frac(ring: PolyRing, text: str) -> FracEntry:
    """``<poly>`` or ``<poly>/<monomial>``; numerator and denominator may be parenthesized."""
    s = text.strip()
    cut = s.rfind("/")
    while cut > 0:
        right = s[cut + 1:].strip()
        if right.startswith("(") and right.endswith(")"):
            right = right[1:-1].strip()
        if right and right[0].isalpha():
            return FracEntry(ring(s[:cut]), ring.parse_monomial(right))
        cut = s.rfind("/", 0, cut)
    return FracEntry.of(ring(s))


Column = Tuple[FracEntry, ...]


def column_of(ring: PolyRing, entries) -> Column:
    out = []
    for e in entries:
        if isinstance(e, FracEntry):
            out.append(e)
        elif isinstance(e, Poly):
            out.append(FracEntry.of(e))
        elif isinstance(e, str):
            out.append(parse_frac(ring, e))
        else:
            out.append(FracEntry.of(ring.const(e)))
    return tuple(out)


def column_denominator(col: Sequence[FracEntry]) -> Mono:
    acc = col[0].ring.unit_mono
    for e in col:
        acc = mono_lcm(acc, e.den)
    return acc


def column_numerators(col: Sequence[FracEntry], den: Mono) -> List[Poly]:
    return [e.num.mul_monomial(mono_div(den, e.den)) for e in col]


# --- polynomial matrix kernels ----------------------------------------------


def det_adj(mat: Sequence[Sequence[Poly]], ring: PolyRing):
    """Determinant and adjugate by memoized Laplace expansion (r is small)."""
    n = len(mat)
    memo: Dict[Tuple[Tuple[int, ...], Tuple[int, ...]], Poly] = {}

    def minor(rows: Tuple[int, ...], cols: Tuple[int, ...]) -> Poly:
        if not rows:
            return ring.one
        key = (rows, cols)
        hit = memo.get(key)
        if hit is not None:
            return hit
        r0, rest = rows[0], rows[1:]
        acc = ring.zero
        for k, c in enumerate(cols):
            a = mat[r0][c]
            if a.is_zero():
                continue
            sub = minor(rest, cols[:k] + cols[k + 1:])
            if sub.is_zero():
                continue
            term = a * sub
            acc = acc - term if k % 2 else acc + term
        memo[key] = acc
        return acc

    full = tuple(range(n))
    det = minor(full, full)
    adj = [[ring.zero] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            m = minor(full[:j] + full[j + 1:], full[:i] + full[i + 1:])
            adj[i][j] = -m if (i + j) % 2 else m
    return det, adj


def poly_det(mat: Sequence[Sequence[Poly]], ring: PolyRing) -> Poly:
    n = len(mat)
    memo = {}

    def minor(rows, cols):
        if not rows:
            return ring.one
        key = (rows, cols)
        if key in memo:
            return memo[key]
        acc = ring.zero
        for k, c in enumerate(cols):
            a = mat[rows[0]][c]
            if a.is_zero():
                continue
            term = a * minor(rows[1:], cols[:k] + cols[k + 1:])
            acc = acc - term if k % 2 else acc + term
        memo[key] = acc
        return acc

    return minor(tuple(range(n)), tuple(range(n)))


def split_unit(p: Poly) -> Tuple[Mono, Poly]:
    """p = m * u with m the monomial content; u is a local unit iff p is in the monomial model."""
    m = p.content_monomial()
    return m, p.div_monomial(m)


# --- lattices ----------------------------------------------------------------


@dataclass(frozen=True)
class Coordinates:
    """w = num / den with den a local unit; B*num = den*v."""

    num: Tuple[Poly, ...]
    den: Poly

    def is_polynomial(self) -> bool:
        return self.den.is_constant()


@dataclass(frozen=True)
class QuotientDescriptor:
    annihilator: Mono
    free_rank: int
    ambient_step: int = 0
    twist: Optional[Mono] = None


@dataclass(frozen=True, eq=False)
class LatticeBasis:
    ring: PolyRing
    columns: Tuple[Column, ...]
    label: str = ""

    def __post_init__(self):
        r = len(self.columns)
        if r == 0:
            raise DimensionMismatch("lattice of rank 0")
        for c in self.columns:
            if len(c) != r:
                raise DimensionMismatch("basis matrix must be square")
            for e in c:
                if e.ring != self.ring:
                    raise VarTableMismatch("entry ring differs from lattice ring")

    @classmethod
    def from_columns(cls, ring: PolyRing, cols, label="") -> "LatticeBasis":
        return cls(ring, tuple(column_of(ring, c) for c in cols), label)

    @classmethod
    def from_rows(cls, ring: PolyRing, rows, label="") -> "LatticeBasis":
        rows = [list(r) for r in rows]
        return cls.from_columns(ring, [[row[j] for row in rows] for j in range(len(rows))], label)

    @classmethod
    def standard(cls, ring: PolyRing, r: int, label="R^r") -> "LatticeBasis":
        one, zero = FracEntry.of(ring.one), FracEntry.of(ring.zero)
        return cls(ring, tuple(tuple(one if i == j else zero for i in range(r)) for j in range(r)), label)

    @classmethod
    def from_poly_matrix(cls, ring, mat, label="") -> "LatticeBasis":
        """Columns of a polynomial matrix given row-major."""
        r = len(mat)
        return cls(ring, tuple(tuple(FracEntry.of(mat[i][j]) for i in range(r)) for j in range(r)), label)

    @property
    def rank(self) -> int:
        return len(self.columns)

    def rows(self) -> List[List[FracEntry]]:
        r = self.rank
        return [[self.columns[j][i] for j in range(r)] for i in range(r)]

    def relabel(self, label: str) -> "LatticeBasis":
        return LatticeBasis(self.ring, self.columns, label)

    @cached_property
    def denominator(self) -> Mono:
        acc = self.ring.unit_mono
        for c in self.columns:
            acc = mono_lcm(acc, column_denominator(c))
        return acc

    @cached_property
    def numerator_matrix(self) -> List[List[Poly]]:
        mu = self.denominator
        cols = [column_numerators(c, mu) for c in self.columns]
        r = self.rank
        return [[cols[j][i] for j in range(r)] for i in range(r)]

    @cached_property
    def _det_adj(self):
        det, adj = det_adj(self.numerator_matrix, self.ring)
        if det.is_zero():
            raise SingularMatrix(f"singular basis for lattice {self.label!r}")
        return det, adj

    @cached_property
    def _det_split(self):
        det, _ = self._det_adj
        return split_unit(det)

    def coordinates(self, v: Sequence[FracEntry]) -> Optional[Coordinates]:
        return membership(v, self)

    def contains(self, v: Sequence[FracEntry]) -> bool:
        return membership(v, self) is not None

    def contains_lattice(self, other: "LatticeBasis") -> bool:
        return all(self.contains(c) for c in other.columns)

    def map_columns(self, fn, label=None) -> "LatticeBasis":
        return LatticeBasis(self.ring, tuple(tuple(fn(c)) for c in self.columns),
                            self.label if label is None else label)

    def scale_columns(self, exps_per_column, label="") -> "LatticeBasis":
        """Column j multiplied by the Laurent monomial exps_per_column[j]."""
        cols = tuple(tuple(e.mul_laurent(ex) for e in c)
                     for c, ex in zip(self.columns, exps_per_column))
        return LatticeBasis(self.ring, cols, label)

    def left_multiply(self, g: Sequence[Sequence[Poly]], label="") -> "LatticeBasis":
        """g * B for a polynomial matrix g (row-major)."""
        return LatticeBasis(self.ring, tuple(matvec(g, c) for c in self.columns), label or self.label)

    def __str__(self):
        return format_matrix(self)


def matvec(g: Sequence[Sequence[Poly]], col: Sequence[FracEntry]) -> Column:
    den = column_denominator(col)
    nums = column_numerators(col, den)
    ring = col[0].ring
    out = []
    for row in g:
        acc = ring.zero
        for a, b in zip(row, nums):
            if not a.is_zero() and not b.is_zero():
                acc = acc + a * b
        out.append(FracEntry(acc, den).normalized())
    return tuple(out)


def combine(columns: Sequence[Sequence[FracEntry]], coeffs: Sequence[Poly]) -> Column:
    """sum_k coeffs[k] * columns[k]."""
    ring = coeffs[0].ring
    den = ring.unit_mono
    for c, a in zip(columns, coeffs):
        if not a.is_zero():
            den = mono_lcm(den, column_denominator(c))
    r = len(columns[0])
    acc = [ring.zero] * r
    for c, a in zip(columns, coeffs):
        if a.is_zero():
            continue
        nums = column_numerators(c, den)
        for i in range(r):
            if not nums[i].is_zero():
                acc[i] = acc[i] + a * nums[i]
    return tuple(FracEntry(p, den).normalized() for p in acc)


def monic_column(col: Sequence[FracEntry]) -> Column:
    """Rescale by a field constant: primitive integer numerators over Q, monic over F_p."""
    lead = next((e.num for e in col if not e.is_zero()), None)
    if lead is None:
        return tuple(col)
    field = lead.ring.field
    if field.p:
        c = field.div(1, lead.leading()[1])
    else:
        coeffs = [Fraction(a) for e in col for a in e.num.terms.values()]
        num = reduce(math.gcd, (a.numerator for a in coeffs))
        den = reduce(lambda x, y: x * y // math.gcd(x, y), (a.denominator for a in coeffs))
        c = field.reduce(Fraction(den, num) if lead.leading()[1] > 0 else Fraction(-den, num))
    if c == 1:
        return tuple(col)
    return tuple(FracEntry(e.num.scale(c), e.den) for e in col)


def format_matrix(L: LatticeBasis) -> str:
    rows = L.rows()
    cells = [[format_frac(e) for e in row] for row in rows]
    width = max(len(c) for row in cells for c in row)
    return "\n".join("[ " + "  ".join(c.rjust(width) for c in row) + " ]" for row in cells)


def matrix_rows(L: LatticeBasis) -> List[List[str]]:
    return [[format_frac(e) for e in row] for row in L.rows()]


# --- operations --------------------------------------------------------------


def membership(v: Sequence[FracEntry], L: LatticeBasis) -> Optional[Coordinates]:
    """Coordinates of v in the basis of L, or None when v is not in L."""
    if len(v) != L.rank:
        raise DimensionMismatch(f"vector of length {len(v)} vs rank {L.rank}")
    ring = L.ring
    nu = column_denominator(v)
    w = column_numerators(v, nu)
    det, adj = L._det_adj
    mu = L.denominator
    r = L.rank
    a = []
    for i in range(r):
        acc = ring.zero
        for k in range(r):
            if not adj[i][k].is_zero() and not w[k].is_zero():
                acc = acc + adj[i][k] * w[k]
        a.append(acc)
    # c = mu * a / (nu * det)
    dmono, unit = L._det_split
    if unit.is_local_unit():
        num_shift = mu
        den_mono = mono_mul(nu, dmono)
        g = mono_gcd(num_shift, den_mono)
        num_shift, den_mono = mono_div(num_shift, g), mono_div(den_mono, g)
        out = []
        for p in a:
            if not p.divides_by_monomial(den_mono):
                return None
            out.append(p.div_monomial(den_mono).mul_monomial(num_shift))
        return Coordinates(tuple(out), unit)
    # outside the monomial model: polynomial-ring membership (sound, not complete)
    den = det.mul_monomial(nu)
    out = []
    for p in a:
        try:
            out.append(p.mul_monomial(mu).divide_exact(den))
        except Exception:
            return None
    return Coordinates(tuple(out), ring.one)


def twist(L: LatticeBasis, mono: Mono, direction: str = "up", label="") -> LatticeBasis:
    """L(D) (``up``: multiply by 1/mono) or L(-D) (``down``: multiply by mono)."""
    if direction == "up":
        ex = tuple(-e for e in mono)
    elif direction == "down":
        ex = tuple(mono)
    else:
        raise ValueError(f"direction must be 'up' or 'down', not {direction!r}")
    return L.scale_columns([ex] * L.rank, label or L.label)


def lattice_equal(L1: LatticeBasis, L2: LatticeBasis) -> bool:
    if L1.rank != L2.rank:
        raise DimensionMismatch(f"ranks {L1.rank} and {L2.rank}")
    if L1.ring != L2.ring:
        raise VarTableMismatch("lattices over different rings")
    # necessary condition: determinants agree up to a local unit
    ex, in_model = det_monomial_ratio(L1, L2)
    if in_model and any(ex):
        return False
    return L2.contains_lattice(L1) and L1.contains_lattice(L2)


def lattice_contains(big: LatticeBasis, small: LatticeBasis) -> bool:
    return big.contains_lattice(small)


def det_lattice(L: LatticeBasis) -> FracEntry:
    det, _ = L._det_adj
    mu = L.denominator
    den = tuple(e * L.rank for e in mu)
    field = L.ring.field
    if det.is_local_unit():
        det = det.scale(field.div(1, det.constant_term()))
    else:
        det = det.scale(field.div(1, det.leading()[1]))
    return FracEntry(det, den).normalized()


def det_monomial_ratio(L1: LatticeBasis, L2: LatticeBasis) -> Tuple[Tuple[int, ...], bool]:
    """Laurent exponent of det(L1)/det(L2) and whether the cofactor is a local unit."""
    d1 = det_lattice(L1)
    d2 = det_lattice(L2)
    m1, u1 = split_unit(d1.num)
    m2, u2 = split_unit(d2.num)
    ex = tuple(a - b - c + d for a, b, c, d in zip(m1, d1.den, m2, d2.den))
    return ex, (u1.is_local_unit() and u2.is_local_unit())


# --- local-unit elimination --------------------------------------------------


def unit_pivot_reduce(T: List[List[Poly]], mono: Mono):
    """Column-reduce T (rows x cols) modulo the monomial ideal (mono).

    Pivots are taken row by row in declared order: the first entry whose
    residue is a local unit.  Returns (pivots, residual) where pivots is the
    list of (row, col) pairs and residual the reduced entries outside pivot
    rows/columns.  The image of T mod mono is free and split of rank
    len(pivots) exactly when every residual entry vanishes.
    """
    if not T:
        return [], []
    trivial = not any(mono)
    nrows, ncols = len(T), len(T[0])
    M = [[T[i][j].reduce_mod_monomial(mono) if not trivial else T[i][j].ring.zero
          for j in range(ncols)] for i in range(nrows)]
    live_rows = list(range(nrows))
    live_cols = list(range(ncols))
    pivots = []
    progress = True
    while progress:
        progress = False
        for a in live_rows:
            p = next((c for c in live_cols if M[a][c].is_local_unit()), None)
            if p is None:
                continue
            u = M[a][p]
            for c in live_cols:
                if c == p or M[a][c].is_zero():
                    continue
                s = M[a][c]
                for i in live_rows:
                    M[i][c] = (u * M[i][c] - s * M[i][p]).reduce_mod_monomial(mono)
            pivots.append((a, p))
            live_rows.remove(a)
            live_cols.remove(p)
            progress = True
            break
    residual = [(i, j, M[i][j]) for i in live_rows for j in live_cols if not M[i][j].is_zero()]
    return pivots, residual


def coordinate_matrix(small: Sequence[Sequence[FracEntry]], big: LatticeBasis, what="") -> List[List[Poly]]:
    """Coordinates of the given columns in big's basis, unit-scaled to polynomials."""
    cols = []
    for k, v in enumerate(small):
        c = membership(v, big)
        if c is None:
            raise NotContained(f"column {k} of {what or 'lattice'} not in {big.label or 'lattice'}")
        cols.append(c.num)
    r = big.rank
    return [[cols[j][i] for j in range(len(cols))] for i in range(r)]


def quotient_structure(small: LatticeBasis, big: LatticeBasis, mono: Mono, step: int = 0) -> QuotientDescriptor:
    """Certify big/small free over R/(mono); raise NotFreeSplit otherwise."""
    if small.rank != big.rank:
        raise DimensionMismatch("ranks differ")
    T = coordinate_matrix(small.columns, big, small.label)
    for k, col in enumerate(big.columns):
        scaled = tuple(e.mul_laurent(mono) for e in col)
        if not small.contains(scaled):
            raise NotFreeSplit(f"{big.ring.format_monomial(mono)} does not annihilate the quotient (column {k})")
    if not any(mono):
        return QuotientDescriptor(mono, 0, step)
    pivots, residual = unit_pivot_reduce(T, mono)
    if residual:
        i, j, p = residual[0]
        raise NotFreeSplit(f"residual entry {p} at ({i},{j}) is nonzero mod {big.ring.format_monomial(mono)}")
    return QuotientDescriptor(mono, big.rank - len(pivots), step)
