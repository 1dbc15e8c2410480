"""Acceptance gate.  Each criterion emits exactly one PASS/FAIL line."""

import random
import time
from functools import lru_cache

from echelon.cli_io import DatumFile, build_parser, execute, fixture_text, load_fixture, serialize_datum_file
from echelon.echelon_core import (
    EchelonDatum,
    decompose,
    normal_form,
    random_chain,
    random_datum,
    random_poly,
    random_unimodular,
    reassemble,
    transform_datum,
    validate_datum,
)
from echelon.errors import EchelonError, HypothesisFail, PersistenceViolation
from echelon.invariants import det_ledger
from echelon.lattice import LatticeBasis, combine, det_adj, lattice_equal, quotient_structure, twist
from echelon.modification import (
    MapToLine,
    extend_map,
    ladder,
    modify,
    pullback_commute,
    random_ring_map,
)
from echelon.poly_ring import Field, PolyRing
from echelon.polyechelon import check_transverse, order_independence_check, random_poly_datum

KINDS = ("scalar", "mixed", "delta", "trivial")


def diag(ring, *entries):
    n = len(entries)
    return LatticeBasis.from_rows(ring, [[entries[i] if i == j else "0" for j in range(n)] for i in range(n)])


def closed_form_result(dec, chain, m):
    """E_m = sum over blocks j of (1/(y_1...y_{m-j})) A_j, built straight from the adapted basis."""
    exps = []
    for b in dec.blocks:
        e = [0] * dec.basis.ring.nvars
        for k in range(1, m - b + 1):
            for v, a in enumerate(chain.y(k)):
                e[v] -= a
        exps.append(tuple(e))
    return dec.basis.scale_columns(exps)


@lru_cache(maxsize=None)
def suite_200():
    """100 data over Q and 100 over F_101; r <= 4, m <= 3, scramble factors of degree <= 2."""
    out = []
    for n in range(200):
        ring = PolyRing(field=Field(None if n < 100 else 101))
        rng = random.Random(n)
        r, m = rng.randint(1, 4), rng.randint(1, 3)
        kind = KINDS[n % 4]
        chain = None if kind == "scalar" else random_chain(rng, ring, m, kind=kind)
        d = random_datum(10_000 + n, r, m, degree_bound=1 + n % 2, scramble_count=rng.randint(1, 3),
                         ring=ring, chain=chain, label=f"ac{n}")
        out.append((kind, d))
    return tuple(out)


# --- AC1 -----------------------------------------------------------------------------


def test_ac1_closed_form_fidelity(ac_line):
    t0 = time.perf_counter()
    r1 = load_fixture("r1").datum
    r2 = load_fixture("r2").datum
    R = r1.ring
    checks = [
        lattice_equal(modify(r1).stages[1], diag(R, "1/y", "1")),
        lattice_equal(modify(r2).stages[1], diag(R, "1/y", "1/y", "1")),
        lattice_equal(modify(r2).stages[2], diag(R, "1/y^2", "1/y", "1")),
    ]
    elapsed = time.perf_counter() - t0
    ok = all(checks) and elapsed < 1.0
    ac_line("AC1", ok, f"R1/R2 stages match closed form={all(checks)}, {elapsed:.3f}s (< 1s)")
    assert ok


# --- AC2 -----------------------------------------------------------------------------


def test_ac2_round_trip_suite(ac_line):
    t0 = time.perf_counter()
    failures = []
    for kind, d in suite_200():
        try:
            if not validate_datum(d).valid:
                failures.append((d.label, "invalid"))
                continue
            dec = decompose(d, validated=True)
            back = reassemble(dec, d.chain)
            if not all(lattice_equal(back.E(i), d.E(i)) for i in range(d.m + 1)):
                failures.append((d.label, "reassemble"))
                continue
            if not lattice_equal(modify(d, dec).result, closed_form_result(dec, d.chain, d.m)):
                failures.append((d.label, "closed form"))
        except EchelonError as ex:
            failures.append((d.label, repr(ex)))
    elapsed = time.perf_counter() - t0
    ok = not failures and elapsed < 60
    ac_line("AC2", ok, f"{200 - len(failures)}/200 round trips, {elapsed:.1f}s (< 60s)"
            + (f", first failure {failures[0]}" if failures else ""))
    assert ok


# --- AC3 -----------------------------------------------------------------------------


def _ac3_check(kind, d):
    mc = modify(d)
    m, ring, chain = d.m, d.ring, d.chain
    ranks = mc.decomposition.ranks
    for j in range(m):
        if not mc.stages[j + 1].contains_lattice(mc.stages[j]):
            return f"E_{j} not in E_{j + 1}"
    for i in range(1, m + 1):
        if not mc.stages[i].contains_lattice(twist(d.E(i), chain.D(i), "up")):
            return f"E^{i}(D_{i}) not in E_{i}"
    want = {}
    for k in range(1, m + 1):
        w = sum(ranks[: m - k + 1])
        for v, e in enumerate(chain.y(k)):
            if e:
                want[ring.vars[v]] = want.get(ring.vars[v], 0) - w * e
    got = det_ledger(mc, d)[-1].as_dict()
    if got != {k: v for k, v in want.items() if v}:
        return f"ledger {got} != {want}"
    for j in range(m):
        y = chain.y(j + 1)
        q = quotient_structure(mc.stages[j], mc.stages[j + 1], y, step=j)
        expected = sum(ranks[: m - j]) if any(y) else 0
        if q.free_rank != expected:
            return f"quotient {j}: free rank {q.free_rank} != {expected}"
    if kind == "delta":
        for i in range(1, m + 1):
            if not lattice_equal(mc.stages[i], twist(d.E(i), chain.D(i), "up")):
                return f"D = delta but E_{i} != E^{i}(D_{i})"
    if kind == "trivial":
        for i in range(1, m + 1):
            if not lattice_equal(mc.stages[i], d.E(0)):
                return f"y = 1 but E_{i} != E"
    return None


def test_ac3_chain_invariants(ac_line):
    failures = []
    for kind, d in suite_200():
        try:
            why = _ac3_check(kind, d)
        except EchelonError as ex:
            why = repr(ex)
        if why:
            failures.append((d.label, why))
    ok = not failures
    ac_line("AC3", ok, f"{200 - len(failures)}/200 data satisfy all chain invariants"
            + (f", first failure {failures[0]}" if failures else ""))
    assert ok


# --- AC4 -----------------------------------------------------------------------------


def _y_prefix(ring, chain, n):
    p = ring.one
    for k in range(1, n + 1):
        p = p * ring.monomial_poly(chain.y(k))
    return p


def _phi_case(seed, violate):
    """Return (datum, phi, expected level or None); None when the seed is unusable."""
    rng = random.Random(seed)
    ring = PolyRing(field=Field(None if seed % 2 else 101))
    r, m = rng.randint(1, 3), rng.randint(1, 3)
    chain = random_chain(rng, ring, m, kind="mixed")
    ranks = [0] * (m + 1)
    for _ in range(r):
        ranks[rng.randrange(m + 1)] += 1
    nf = normal_form(ring, chain, ranks)
    blocks = [j for j, n in enumerate(ranks) for _ in range(n)]
    # psi on the normal-form basis; psi_k = y_1...y_{m-b_k} * p satisfies the hypothesis
    psi = []
    for b in blocks:
        p = random_poly(rng, ring, 1)
        psi.append(_y_prefix(ring, chain, m - b) * (p if not p.is_zero() else ring.one))
    level = None
    if violate:
        options = [(i, k) for i in range(1, m + 1) if any(chain.y(i))
                   for k, b in enumerate(blocks) if b <= m - i]
        if not options:
            return None
        level, k = rng.choice(options)
        unit = ring.one + random_poly(rng, ring, 1, terms=(1, 1)).mul_monomial(ring.mono({"x": 1}))
        psi[k] = _y_prefix(ring, chain, level - 1) * unit
    g = random_unimodular(rng, ring, r, 3, 1)
    det, adj = det_adj(g, ring)
    inv = ring.field.div(1, det.terms[ring.unit_mono])
    # phi = psi * g^{-1}, so phi(g v) = psi(v)
    phi = []
    for j in range(r):
        acc = ring.zero
        for k in range(r):
            acc = acc + psi[k] * adj[k][j]
        phi.append(acc.scale(inv))
    moved = transform_datum(nf, g)
    filt = [moved.E(0)]
    for i in range(1, m + 1):
        h = random_unimodular(rng, ring, r, 2, 1)
        L = moved.E(i)
        filt.append(LatticeBasis(ring, tuple(combine(L.columns, [h[a][c] for a in range(r)]) for c in range(r))))
    d = EchelonDatum(ring, chain, tuple(filt), f"phi{seed}")
    return d, MapToLine(tuple(phi)), level


def _collect(violate, count):
    cases, seed = [], 0
    while len(cases) < count:
        c = _phi_case(seed * 2 + (1 if violate else 0) + 1000, violate)
        seed += 1
        if c is not None:
            cases.append(c)
    return cases


def test_ac4_extension_hypothesis(ac_line):
    good_ok, bad_ok, notes = 0, 0, []
    for d, phi, _ in _collect(False, 50):
        try:
            # extend_map raises ExtensionFail unless every value is a polynomial
            vals = extend_map(d, modify(d), phi)
            if len(vals) == d.rank:
                good_ok += 1
        except EchelonError as ex:
            notes.append((d.label, repr(ex)))
    for d, phi, level in _collect(True, 50):
        try:
            extend_map(d, modify(d), phi)
            notes.append((d.label, "no HypothesisFail"))
        except HypothesisFail as ex:
            if ex.i == level:
                bad_ok += 1
            else:
                notes.append((d.label, f"level {ex.i} != {level}"))
        except EchelonError as ex:
            notes.append((d.label, repr(ex)))
    ok = good_ok == 50 and bad_ok == 50
    ac_line("AC4", ok, f"extensions {good_ok}/50, HypothesisFail at the planted level {bad_ok}/50"
            + (f", first issue {notes[0]}" if notes else ""))
    assert ok


# --- AC5 -----------------------------------------------------------------------------


def _mutated(seed):
    """Random valid datum with one level's column multiplied by a non-divisor monomial."""
    rng = random.Random(seed)
    ring = PolyRing()
    r, m = rng.randint(2, 3), rng.randint(1, 3)
    d = random_datum(seed, r, m, scramble_count=rng.randint(0, 2), ring=ring,
                     chain=random_chain(rng, ring, m, kind="mixed"))
    i = rng.randint(1, m)
    c = rng.randrange(r)
    factor = ring.mono({rng.choice(["x", "y"]): 1})
    cols = list(d.E(i).columns)
    cols[c] = tuple(e.mul_laurent(factor) for e in cols[c])
    filt = list(d.filtration)
    filt[i] = LatticeBasis(ring, tuple(cols), f"E^{i}")
    return DatumFile(ring, datum=EchelonDatum(ring, d.chain, tuple(filt), f"mut{seed}"))


def test_ac5_persistence_detection(ac_line, tmp_path):
    bad = load_fixture("persistence").datum
    first = validate_datum(bad).first()
    fixture_ok = isinstance(first, PersistenceViolation) and (first.i, first.j) == (1, 0)
    args = build_parser().parse_args(["validate", "--in", str(tmp_path / "p.json")])
    (tmp_path / "p.json").write_text(fixture_text("persistence"))
    code, rep = execute("validate", args)
    fixture_ok = fixture_ok and code == 1 and (rep["failures"][0]["i"], rep["failures"][0]["j"]) == (1, 0)
    crashes, detected = [], 0
    for seed in range(50):
        path = tmp_path / f"mut{seed}.json"
        path.write_text(serialize_datum_file(_mutated(seed)))
        try:
            args = build_parser().parse_args(["validate", "--in", str(path)])
            code, rep = execute("validate", args)
            wellformed = code in (0, 1) and rep["valid"] == (code == 0) and rep["valid"] == (not rep["failures"])
            if not wellformed:
                crashes.append((seed, code))
            detected += code == 1
        except Exception as ex:  # any escape is a crash
            crashes.append((seed, repr(ex)))
    ok = fixture_ok and not crashes
    ac_line("AC5", ok, f"fixture -> PersistenceViolation(1,0), exit 1: {fixture_ok}; "
            f"mutations without crash {50 - len(crashes)}/50 ({detected} flagged invalid)")
    assert ok


# --- AC6 -----------------------------------------------------------------------------


def test_ac6_poly_order_independence(ac_line):
    t0 = time.perf_counter()
    bad = []
    for seed in range(50):
        p = random_poly_datum(seed, 2, 1 + seed % 3, m_max=2)
        if not (check_transverse(p).ok and order_independence_check(p, seed).ok):
            bad.append(("pair", seed))
    for seed in range(5):
        p = random_poly_datum(500 + seed, 3, 1 + seed % 3, m_max=2)
        rep = order_independence_check(p, seed)
        if not (check_transverse(p).ok and rep.ok and len(rep.orders) == 6):
            bad.append(("triple", seed))
    elapsed = time.perf_counter() - t0
    ok = not bad and elapsed < 120
    ac_line("AC6", ok, f"pairs and triples agreeing {55 - len(bad)}/55, {elapsed:.1f}s (< 120s)")
    assert ok


# --- AC7 -----------------------------------------------------------------------------


def test_ac7_pullback_commutes(ac_line):
    ring = PolyRing((("x", "y"), ("u", "v")), ("w",))
    bad = []
    kinds = set()
    for seed in range(20):
        rng = random.Random(seed)
        m = rng.randint(1, 2)
        chain = random_chain(rng, ring, m, pair=seed % 2, kind="mixed")
        d = random_datum(seed, rng.randint(1, 3), m, scramble_count=2, ring=ring, chain=chain)
        f = random_ring_map(ring, seed)
        kinds.add(f.describe())
        if not pullback_commute(d, f, seed).ok:
            bad.append(seed)
    ok = not bad
    ac_line("AC7", ok, f"{20 - len(bad)}/20 ring maps commute with modify stage by stage")
    assert ok


# --- AC8 -----------------------------------------------------------------------------


def test_ac8_ladder_discrepancy(ac_line, tmp_path):
    r2 = load_fixture("r2").datum
    R = r2.ring
    entries = {(e.j, e.i): e for e in ladder(r2, seed=2)}
    e11 = entries[(1, 1)]
    definitional = lattice_equal(e11.lattice, diag(R, "1/y", "1", "x*y"))
    flagged = e11.matches_displayed is False
    (tmp_path / "r2.json").write_text(fixture_text("r2"))
    code, rep = execute("ladder", build_parser().parse_args(["ladder", "--in", str(tmp_path / "r2.json")]))
    reported = code == 0 and rep["flagged_mismatches"] == ["E_1^1"]
    final = lattice_equal(modify(r2).stages[2], diag(R, "1/y^2", "1/y", "1"))
    ok = definitional and flagged and reported and final
    ac_line("AC8", ok, f"E_1^1=<(1/y)e1, e2, xy e3>: {definitional}; mismatch flagged: {flagged and reported}; "
            f"E_2 exact: {final}")
    assert ok
