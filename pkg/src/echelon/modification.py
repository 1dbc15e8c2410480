"""Echelon modification: the ascending chain E_0 ⊆ ... ⊆ E_m and its ladder.

Every lattice in the recursion is diagonal in the basis of an echelon
decomposition, with Laurent-monomial entries.  Sums are entrywise monomial
gcds and intersections entrywise lcms, so the recursion is exact without any
module Groebner machinery.  Results are mapped back to the original
coordinates and re-checked there by membership.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from .echelon_core import (
    DivisorChain,
    EchelonDatum,
    EchelonDecomposition,
    decompose,
    level_exponent,
    random_poly,
    random_unimodular,
    transform_datum,
    validate_datum,
)
from .errors import (
    AuditFailure,
    ClosedFormMismatch,
    ExtensionFail,
    HypothesisFail,
    MapUnsupported,
    NotFreeSplit,
    NotUnimodular,
)
from .lattice import (
    FracEntry,
    LatticeBasis,
    combine,
    det_monomial_ratio,
    lattice_equal,
    matrix_rows,
    membership,
    poly_det,
    quotient_structure,
    QuotientDescriptor,
    twist,
)
from .poly_ring import Field, Mono, Poly, PolyRing, mono_vars

Laurent = Tuple[int, ...]
Diag = Tuple[Laurent, ...]


def _neg(m: Sequence[int]) -> Laurent:
    return tuple(-e for e in m)


def _shift(diag: Diag, ex: Sequence[int]) -> Diag:
    return tuple(tuple(a + b for a, b in zip(d, ex)) for d in diag)


def _gcd(a: Diag, b: Diag) -> Diag:
    return tuple(tuple(min(x, y) for x, y in zip(p, q)) for p, q in zip(a, b))


def _lcm(a: Diag, b: Diag) -> Diag:
    return tuple(tuple(max(x, y) for x, y in zip(p, q)) for p, q in zip(a, b))


def adapted_lattice(dec: EchelonDecomposition, diag: Diag, label="") -> LatticeBasis:
    return dec.basis.scale_columns(diag, label)


def closed_form_stage(chain: DivisorChain, blocks: Sequence[int], i: int) -> Diag:
    """E_i: block j twisted by 1/(y_1 ... y_min(i, m-j))."""
    m = chain.length
    return tuple(_neg(chain.y_range(1, min(i, m - b))) for b in blocks)


def displayed_ladder_form(chain: DivisorChain, blocks: Sequence[int], i: int) -> Diag:
    """The adapted expression printed for E_1^i (which can differ from the definition)."""
    m = chain.length
    y1 = _neg(chain.y(1))
    out = []
    for b in blocks:
        if b <= m - i - 1:
            out.append(y1)
        elif b <= m - 1:
            t = chain.t_range(m - b + 1, i + 1)
            out.append(tuple(a + c for a, c in zip(y1, t)))
        else:
            out.append(chain.t_range(2, i + 1))
    return tuple(out)


@dataclass(eq=False)
class ModificationChain:
    datum: EchelonDatum
    decomposition: EchelonDecomposition
    stages: List[LatticeBasis]
    stage_diags: List[Diag]
    ladder: Dict[Tuple[int, int], LatticeBasis]
    ladder_diags: Dict[Tuple[int, int], Diag]
    certificates: Dict[str, object] = field(default_factory=dict)
    quotients: List[QuotientDescriptor] = field(default_factory=list)

    @property
    def m(self) -> int:
        return self.datum.m

    @property
    def result(self) -> LatticeBasis:
        return self.stages[-1]


def run_recursion(chain: DivisorChain, blocks: Sequence[int], nvars: int):
    """Definitional recursion in adapted coordinates.

    E_0^i = E^i,  E_{j+1} = E_j^1(dD_{j+1}) + E_j,  E_j^i = E_{j-1}^{i+1}(d delta_j) ∩ E_j.
    """
    m = chain.length
    unit = (0,) * nvars
    upper = {i: tuple(level_exponent(chain, b, i) for b in blocks) for i in range(m + 1)}
    ladder: Dict[Tuple[int, int], Diag] = {(0, i): upper[i] for i in range(1, m + 1)}
    stages: List[Diag] = [tuple(unit for _ in blocks)]
    for j in range(m):
        nxt = _gcd(_shift(ladder[(j, 1)], _neg(chain.y(j + 1))), stages[j])
        stages.append(nxt)
        for i in range(1, m - j):
            ladder[(j + 1, i)] = _lcm(_shift(ladder[(j, i + 1)], _neg(chain.t(j + 1))), nxt)
    return stages, ladder, upper


def modify(d: EchelonDatum, dec: Optional[EchelonDecomposition] = None, check: bool = True) -> ModificationChain:
    if dec is None:
        validate_datum(d).raise_first()
        dec = decompose(d, validated=True)
    chain, blocks = d.chain, dec.blocks
    stage_diags, ladder_diags, _ = run_recursion(chain, blocks, d.ring.nvars)
    stages = [adapted_lattice(dec, s, f"E_{j}") for j, s in enumerate(stage_diags)]
    stages[0] = d.ambient.relabel("E_0")
    ladder = {k: adapted_lattice(dec, v, f"E_{k[0]}^{k[1]}")
              for k, v in ladder_diags.items() if k[0] >= 1}
    mc = ModificationChain(d, dec, stages, stage_diags,
                           ladder, {k: v for k, v in ladder_diags.items() if k[0] >= 1})
    if check:
        verify_chain(mc)
        mc.quotients = quotient_report(d, mc)
    return mc


def verify_chain(mc: ModificationChain):
    """Closed forms, ascending inclusions, E^i(D_i) ⊆ E_i, generic equality."""
    d, dec = mc.datum, mc.decomposition
    chain, m = d.chain, d.m
    certs: Dict[str, object] = {}
    for i in range(m + 1):
        cf = closed_form_stage(chain, dec.blocks, i)
        if cf != mc.stage_diags[i]:
            raise ClosedFormMismatch(f"E_{i}: recursion {mc.stage_diags[i]} vs closed form {cf}")
        if not lattice_equal(adapted_lattice(dec, cf), mc.stages[i]):
            raise ClosedFormMismatch(f"E_{i} differs from its closed form in original coordinates")
    certs["closed_form"] = True
    for j in range(m):
        coords = []
        for k, col in enumerate(mc.stages[j].columns):
            c = membership(col, mc.stages[j + 1])
            if c is None:
                raise ClosedFormMismatch(f"E_{j} is not contained in E_{j + 1} (column {k})")
            coords.append([str(p) for p in c.num])
        certs[f"E_{j} in E_{j + 1}"] = coords
    for i in range(1, m + 1):
        src = twist(d.E(i), chain.D(i), "up")
        coords = []
        for k, col in enumerate(src.columns):
            c = membership(col, mc.stages[i])
            if c is None:
                raise ClosedFormMismatch(f"E^{i}(D_{i}) is not contained in E_{i} (column {k})")
            coords.append({"num": [str(p) for p in c.num], "den": str(c.den)})
        certs[f"E^{i}(D_{i}) in E_{i}"] = coords
    ex, in_model = det_monomial_ratio(mc.stages[-1], mc.stages[0])
    yvars = chain.y_variables()
    ring = d.ring
    if not in_model or any(e and ring.vars[k] not in yvars for k, e in enumerate(ex)):
        raise ClosedFormMismatch("det(E_m)/det(E_0) is not a monomial in the y-variables")
    certs["det_ratio"] = {ring.vars[k]: e for k, e in enumerate(ex) if e}
    mc.certificates = certs
    return certs


def quotient_report(d: EchelonDatum, mc: ModificationChain) -> List[QuotientDescriptor]:
    """E_{j+1}/E_j is free over R/(y_{j+1}) of rank r_0 + ... + r_{m-j-1}."""
    out = []
    ranks = mc.decomposition.ranks
    for j in range(d.m):
        y = d.chain.y(j + 1)
        q = quotient_structure(mc.stages[j], mc.stages[j + 1], y, step=j)
        expected = sum(ranks[: d.m - j]) if any(y) else 0
        if q.free_rank != expected:
            raise NotFreeSplit(f"step {j}: free rank {q.free_rank}, expected {expected}")
        out.append(QuotientDescriptor(q.annihilator, q.free_rank, j, d.chain.D(j + 1)))
    return out


# --- ladder ------------------------------------------------------------------


@dataclass
class LadderEntry:
    j: int
    i: int
    lattice: LatticeBasis
    certificate: Dict[str, object]
    displayed: Optional[LatticeBasis] = None
    matches_displayed: Optional[bool] = None


def ladder(d: EchelonDatum, mc: Optional[ModificationChain] = None, seed: int = 0,
           audit_trials: int = 6) -> List[LadderEntry]:
    """All E_j^i (j >= 1) with membership certificates and a maximality audit."""
    mc = mc or modify(d)
    dec = mc.decomposition
    chain = d.chain
    out = []
    for (j, i), lat in sorted(mc.ladder.items()):
        prev_diag = mc.ladder_diags.get((j - 1, i + 1)) if j > 1 else tuple(
            level_exponent(chain, b, i + 1) for b in dec.blocks)
        left_diag = _shift(prev_diag, _neg(chain.t(j)))
        left = adapted_lattice(dec, left_diag, f"E_{j - 1}^{i + 1}(dδ_{j})")
        if j == 1:
            # against the input filtration directly, not through the decomposition
            left = twist(d.E(i + 1), chain.t(1), "up", f"E^{i + 1}(δ_1)")
        right = mc.stages[j]
        cert: Dict[str, object] = {"in_left": [], "in_right": []}
        for name, big in (("in_left", left), ("in_right", right)):
            for k, col in enumerate(lat.columns):
                c = membership(col, big)
                if c is None:
                    raise AuditFailure(f"E_{j}^{i} column {k} not in {big.label}", witness=k)
                cert[name].append([str(p) for p in c.num])
        cert["audit"] = _maximality_audit(dec, left, right, lat, left_diag, mc.stage_diags[j],
                                          random.Random(seed * 1_000_003 + 97 * j + i), audit_trials)
        entry = LadderEntry(j, i, lat, cert)
        if j == 1:
            shown = adapted_lattice(dec, displayed_ladder_form(chain, dec.blocks, i), f"displayed E_1^{i}")
            entry.displayed = shown
            entry.matches_displayed = lattice_equal(shown, lat)
        out.append(entry)
    return out


def _maximality_audit(dec, left, right, inter, left_diag, right_diag, rng, trials):
    """Sample common elements of left and right; each must lie in the intersection."""
    ring = dec.basis.ring
    checked = 0
    for side, (A, A_diag, B_diag, B) in enumerate(((left, left_diag, right_diag, right),
                                                   (right, right_diag, left_diag, left))):
        for _ in range(trials):
            coeffs = []
            for k in range(A.rank):
                p = random_poly(rng, ring, 1)
                # scale toward the other lattice so that common elements are likely
                gap = tuple(max(b - a, 0) for a, b in zip(A_diag[k], B_diag[k]))
                if rng.random() < 0.7:
                    p = p.mul_monomial(gap)
                coeffs.append(p)
            basis_cols = [tuple(e.mul_laurent(A_diag[k]) for e in dec.basis.columns[k])
                          for k in range(A.rank)]
            w = combine(basis_cols, coeffs)
            if membership(w, B) is None:
                continue
            checked += 1
            if membership(w, inter) is None:
                raise AuditFailure("common element outside the computed intersection",
                                   witness=[str(e) for e in w])
    return {"common_samples": checked, "failures": 0}


# --- maps to a line bundle -----------------------------------------------------


@dataclass(frozen=True)
class MapToLine:
    """phi: E -> L in a trivialization of L, as a row of polynomials.

    ``twist_target[i-1]`` is the equation of D_i once attached to a chain.
    """

    row: Tuple[Poly, ...]
    twist_target: Tuple[Mono, ...] = ()

    @classmethod
    def parse(cls, ring: PolyRing, entries, chain: Optional[DivisorChain] = None) -> "MapToLine":
        targets = tuple(chain.D(i) for i in range(1, chain.length + 1)) if chain else ()
        return cls(tuple(ring(e) for e in entries), targets)

    @classmethod
    def zero(cls, ring: PolyRing, r: int) -> "MapToLine":
        return cls(tuple(ring.zero for _ in range(r)))

    def apply(self, col: Sequence[FracEntry]) -> FracEntry:
        ring = self.row[0].ring
        acc = FracEntry.of(ring.zero)
        for a, e in zip(self.row, col):
            if not a.is_zero() and not e.is_zero():
                acc = acc + e.mul_poly(a)
        return acc

    def hypothesis_flags(self, d: EchelonDatum) -> List[Optional[int]]:
        """Per level i: None if phi(E^i) ⊆ (D_i), else the first offending column."""
        flags = []
        for i in range(1, d.m + 1):
            Di = d.chain.D(i)
            bad = None
            for k, col in enumerate(d.E(i).columns):
                v = self.apply(col)
                if not v.num.divides_by_monomial(tuple(a + b for a, b in zip(v.den, Di))):
                    bad = k
                    break
            flags.append(bad)
        return flags


def extend_map(d: EchelonDatum, mc: ModificationChain, phi: MapToLine) -> List[Poly]:
    """Values of the extension of phi on the basis of E_m."""
    for i, bad in enumerate(phi.hypothesis_flags(d), start=1):
        if bad is not None:
            raise HypothesisFail(i, bad)
    out = []
    for k, col in enumerate(mc.result.columns):
        v = phi.apply(col)
        if not v.is_polynomial():
            raise ExtensionFail(f"phi is not regular on column {k} of Mod(χ, E): {v}")
        out.append(v.to_poly())
    return out


@dataclass
class ProbeReport:
    trials: int
    tested: int = 0
    rejected: int = 0
    skipped: int = 0
    counterexamples: List[dict] = field(default_factory=list)

    @property
    def consistent(self) -> bool:
        return not self.counterexamples

    def as_dict(self):
        return {"trials": self.trials, "tested": self.tested, "rejected": self.rejected,
                "skipped": self.skipped, "consistent": self.consistent,
                "counterexamples": self.counterexamples}


def probe_candidate(mc: ModificationChain, phi: MapToLine, v: Sequence[Poly], mu: Mono):
    """Classify E' = E_m + R*(1/mu)v: 'inside', 'rejected' or 'counterexample'."""
    col = tuple(FracEntry(p, mu).normalized() for p in v)
    if membership(col, mc.result) is not None:
        return "inside"
    if phi.apply(col).is_polynomial():
        return "counterexample"
    return "rejected"


def maximality_probe(d: EchelonDatum, mc: ModificationChain, phi: MapToLine, seed: int,
                     trials: int) -> ProbeReport:
    """Try to falsify maximality of Mod(χ, E) among enlargements to which phi extends."""
    ring = d.ring
    rep = ProbeReport(trials)
    yv = sorted(d.chain.y_variables(), key=ring.index.get)
    for trial in range(trials):
        rng = random.Random(seed * 1_000_003 + trial)
        if not yv:
            rep.skipped += 1
            continue
        mu = ring.mono({v: rng.randint(0, 2) for v in yv})
        if not any(mu):
            mu = ring.mono({yv[0]: 1})
        v = [random_poly(rng, ring, 2) for _ in range(d.rank)]
        verdict = probe_candidate(mc, phi, v, mu)
        if verdict == "inside":
            rep.skipped += 1
            continue
        rep.tested += 1
        if verdict == "rejected":
            rep.rejected += 1
        else:
            rep.counterexamples.append({"trial": trial, "mu": ring.format_monomial(mu),
                                        "v": [str(p) for p in v]})
    return rep


# --- ring maps (pullback) --------------------------------------------------------


@dataclass(frozen=True)
class RingMap:
    """x_k -> c_k * (target variable); fresh target variables may be adjoined."""

    source: PolyRing
    target: PolyRing
    images: Tuple[Tuple[object, int], ...]

    def __post_init__(self):
        role = {}
        for k, (a, b) in enumerate(self.target.pairs):
            role[self.target.index[a]] = ("x", k)
            role[self.target.index[b]] = ("y", k)
        hit_pairs = {}
        seen = set()
        for k, (c, idx) in enumerate(self.images):
            if self.target.field(c) == 0:
                raise MapUnsupported("variable sent to zero")
            if idx in seen:
                raise MapUnsupported("map is not injective on variables")
            seen.add(idx)
        for k, (a, b) in enumerate(self.source.pairs):
            ia, ib = self.images[self.source.index[a]][1], self.images[self.source.index[b]][1]
            ra, rb = role.get(ia), role.get(ib)
            if ra is None or rb is None or ra[0] != "x" or rb[0] != "y" or ra[1] != rb[1]:
                raise MapUnsupported(f"pair ({a}, {b}) is not sent to a divisor pair")

    @classmethod
    def identity(cls, ring: PolyRing) -> "RingMap":
        return cls(ring, ring, tuple((1, k) for k in range(ring.nvars)))

    @classmethod
    def rescale(cls, ring: PolyRing, scalars: Dict[str, object]) -> "RingMap":
        return cls(ring, ring, tuple((scalars.get(v, 1), k) for k, v in enumerate(ring.vars)))

    @classmethod
    def permute_pairs(cls, ring: PolyRing, perm: Sequence[int], free_perm: Optional[Sequence[int]] = None) -> "RingMap":
        images = [None] * ring.nvars
        for k, (a, b) in enumerate(ring.pairs):
            ta, tb = ring.pairs[perm[k]]
            images[ring.index[a]] = (1, ring.index[ta])
            images[ring.index[b]] = (1, ring.index[tb])
        free_perm = free_perm or list(range(len(ring.free)))
        for k, v in enumerate(ring.free):
            images[ring.index[v]] = (1, ring.index[ring.free[free_perm[k]]])
        return cls(ring, ring, tuple(images))

    @classmethod
    def adjoin(cls, ring: PolyRing, names: Sequence[str]) -> "RingMap":
        target = PolyRing(ring.pairs, ring.free + tuple(names), ring.field)
        return cls(ring, target, tuple((1, target.index[v]) for v in ring.vars))

    def then(self, other: "RingMap") -> "RingMap":
        """other ∘ self."""
        images = []
        for c, idx in self.images:
            c2, idx2 = other.images[idx]
            images.append((self.target.field(c) * other.target.field(c2), idx2))
        return RingMap(self.source, other.target, tuple(images))

    def poly(self, p: Poly) -> Poly:
        return p.substitute(self.target, self.images)

    def mono(self, m: Mono) -> Mono:
        e = [0] * self.target.nvars
        for k, a in enumerate(m):
            if a:
                e[self.images[k][1]] += a
        return tuple(e)

    def entry(self, e: FracEntry) -> FracEntry:
        # 1/(c*m) = c^{-1} / m: the scalar moves to the numerator
        field = self.target.field
        scale = 1
        for k, a in enumerate(e.den):
            if a:
                scale = field.reduce(scale * field(self.images[k][0]) ** a)
        num = self.poly(e.num).scale(field.div(1, scale))
        return FracEntry(num, self.mono(e.den)).normalized()

    def lattice(self, L: LatticeBasis) -> LatticeBasis:
        return LatticeBasis(self.target, tuple(tuple(self.entry(e) for e in c) for c in L.columns), L.label)

    def chain(self, ch: DivisorChain) -> DivisorChain:
        return DivisorChain(self.target, tuple((self.mono(t), self.mono(y)) for t, y in ch.steps))

    def datum(self, d: EchelonDatum) -> EchelonDatum:
        return EchelonDatum(self.target, self.chain(d.chain), tuple(self.lattice(L) for L in d.filtration), d.label)

    def describe(self) -> str:
        parts = []
        for k, (c, idx) in enumerate(self.images):
            parts.append(f"{self.source.vars[k]}->{c}*{self.target.vars[idx]}")
        extra = [v for v in self.target.vars if v not in self.source.vars]
        return ", ".join(parts) + (f" (+{','.join(extra)})" if extra else "")


def random_ring_map(ring: PolyRing, seed: int) -> RingMap:
    """Composite of a unit rescaling, a pair permutation and (sometimes) a fresh variable."""
    rng = random.Random(seed)
    f = RingMap.identity(ring)
    kinds = rng.sample(["rescale", "permute", "adjoin"], rng.randint(1, 3))
    for kind in kinds:
        cur = f.target
        if kind == "rescale":
            scal = {}
            for v in cur.vars:
                c = rng.choice([1, 2, 3, -1, -2, 5])
                if cur.field(c) == 0:
                    c = 1
                scal[v] = c
            g = RingMap.rescale(cur, scal)
        elif kind == "permute":
            perm = list(range(len(cur.pairs)))
            rng.shuffle(perm)
            fp = list(range(len(cur.free)))
            rng.shuffle(fp)
            g = RingMap.permute_pairs(cur, perm, fp)
        else:
            name = "z"
            k = 0
            while name in cur.vars:
                k += 1
                name = f"w{k}"
            g = RingMap.adjoin(cur, [name])
        f = f.then(g)
    return f


@dataclass
class CommutationReport:
    stages_equal: List[bool]
    samples_checked: int = 0

    @property
    def ok(self) -> bool:
        return all(self.stages_equal)


def pullback_commute(d: EchelonDatum, f: RingMap, seed: int = 0) -> CommutationReport:
    if f.source != d.ring:
        raise MapUnsupported("ring map source differs from the datum's ring")
    left = modify(d)
    right = modify(f.datum(d))
    eq = [lattice_equal(f.lattice(a), b) for a, b in zip(left.stages, right.stages)]
    rep = CommutationReport(eq)
    # spot-check with random elements of f(Mod(d)) inside Mod(f(d))
    rng = random.Random(seed)
    img = f.lattice(left.result)
    for _ in range(3):
        coeffs = [random_poly(rng, f.target, 1) for _ in range(img.rank)]
        w = combine(img.columns, coeffs)
        rep.samples_checked += 1
        if membership(w, right.result) is None:
            rep.stages_equal[-1] = False
    return rep


# --- functoriality -------------------------------------------------------------


def matmul(a: Sequence[Sequence[Poly]], b: Sequence[Sequence[Poly]]) -> List[List[Poly]]:
    n, k, m = len(a), len(b), len(b[0])
    ring = a[0][0].ring
    out = []
    for i in range(n):
        row = []
        for j in range(m):
            acc = ring.zero
            for l in range(k):
                if not a[i][l].is_zero() and not b[l][j].is_zero():
                    acc = acc + a[i][l] * b[l][j]
            row.append(acc)
        out.append(row)
    return out


@dataclass
class TransportReport:
    stages_equal: List[bool]
    composition_equal: List[bool]

    @property
    def ok(self) -> bool:
        return all(self.stages_equal) and all(self.composition_equal)


def functoriality_transport(d: EchelonDatum, g: Sequence[Sequence[Poly]], seed: int = 0) -> TransportReport:
    """g·Mod(d) = Mod(g·d) stage by stage, and transport respects composition."""
    ring = d.ring
    if not poly_det(g, ring).is_local_unit():
        raise NotUnimodular("det(g) is not a local unit")
    base = modify(d)
    gd = transform_datum(d, g)
    moved = modify(gd)
    eq = [lattice_equal(a.left_multiply(g), b) for a, b in zip(base.stages, moved.stages)]
    rng = random.Random(seed)
    g2 = random_unimodular(rng, ring, d.rank, 2, 1)
    two_step = modify(transform_datum(gd, g2))
    g21 = matmul(g2, g)
    comp = [lattice_equal(a.left_multiply(g21), b) for a, b in zip(base.stages, two_step.stages)]
    return TransportReport(eq, comp)
