import pytest
from hypothesis import given, settings, strategies as st

from echelon.echelon_core import (
    DivisorChain,
    EchelonDatum,
    decompose,
    normal_form,
    random_datum,
    scalar_datum,
    transform_datum,
)
from echelon.errors import HypothesisFail, MapUnsupported, NotUnimodular
from echelon.lattice import LatticeBasis, lattice_equal, twist
from echelon.modification import (
    MapToLine,
    RingMap,
    closed_form_stage,
    extend_map,
    functoriality_transport,
    ladder,
    maximality_probe,
    modify,
    pullback_commute,
    quotient_report,
    random_ring_map,
    run_recursion,
)
from echelon.poly_ring import Field, PolyRing

RING = PolyRing()


def diag(*entries):
    """Diagonal lattice in the standard basis of RING."""
    r = len(entries)
    return LatticeBasis.from_rows(RING, [[entries[i] if i == j else "0" for j in range(r)] for i in range(r)])


def test_r1_stages(r1):
    mc = modify(r1)
    assert len(mc.stages) == 2
    assert lattice_equal(mc.stages[0], diag("1", "1"))
    assert lattice_equal(mc.stages[1], diag("1/y", "1"))


def test_r2_stages(r2):
    mc = modify(r2)
    expected = [diag("1", "1", "1"), diag("1/y", "1/y", "1"), diag("1/y^2", "1/y", "1")]
    for got, want in zip(mc.stages, expected):
        assert lattice_equal(got, want)


def test_r2_stage_diags_match_closed_form(r2):
    mc = modify(r2)
    for i in range(r2.m + 1):
        assert mc.stage_diags[i] == closed_form_stage(r2.chain, mc.decomposition.blocks, i)


def test_delta_chain_gives_twist():
    # D = delta: every stage is E^i(D_i)
    R = PolyRing()
    chain = DivisorChain.parse(R, [("x*y", "x*y"), ("x*y", "x*y")])
    d = normal_form(R, chain, (1, 1, 1))
    mc = modify(d)
    for i in range(1, 3):
        assert lattice_equal(mc.stages[i], twist(d.E(i), chain.D(i), "up"))


def test_r1_delta_fixture():
    from echelon.cli_io import load_fixture

    d = load_fixture("r1_delta").datum
    mc = modify(d)
    assert lattice_equal(mc.result, diag("1/(x*y)", "1"))


def test_trivial_y_leaves_e_unchanged():
    R = PolyRing()
    chain = DivisorChain.parse(R, [("x", "1"), ("x^2", "1")])
    d = normal_form(R, chain, (1, 1, 1))
    mc = modify(d)
    for s in mc.stages:
        assert lattice_equal(s, d.E(0))


def test_all_rank_in_last_block_is_identity():
    R = PolyRing()
    d = scalar_datum(R, (0, 0, 2))
    assert lattice_equal(modify(d).result, d.E(0))


def test_all_rank_in_first_block_is_full_twist():
    R = PolyRing()
    d = scalar_datum(R, (2, 0, 0))
    mc = modify(d)
    assert lattice_equal(mc.result, twist(d.E(0), d.chain.D(2), "up"))


def test_recursion_ladder_r2():
    chain = DivisorChain.parse(RING, [("x*y", "y"), ("x*y", "y")])
    stages, lad, _ = run_recursion(chain, (0, 1, 2), 2)
    assert stages[2] == ((0, -2), (0, -1), (0, 0))
    assert lad[(1, 1)] == ((0, -1), (0, 0), (1, 1))


def test_ladder_r2_flags_displayed_mismatch(r2):
    entries = {(e.j, e.i): e for e in ladder(r2, seed=2)}
    e11 = entries[(1, 1)]
    assert lattice_equal(e11.lattice, diag("1/y", "1", "x*y"))
    assert e11.matches_displayed is False
    assert lattice_equal(e11.displayed, diag("1/y", "x", "x*y"))
    assert e11.certificate["audit"]["failures"] == 0


def test_ladder_r1_is_empty(r1):
    assert ladder(r1) == []


def test_quotients_r2(r2):
    mc = modify(r2)
    q = quotient_report(r2, mc)
    assert [x.free_rank for x in q] == [2, 1]


def test_quotients_trivial_chain_have_no_free_part():
    R = PolyRing()
    chain = DivisorChain.parse(R, [("x", "1")])
    d = normal_form(R, chain, (1, 1))
    assert [x.free_rank for x in quotient_report(d, modify(d))] == [0]


def test_extend_r1():
    phi = MapToLine.parse(RING, ["y", "1"])
    from echelon.cli_io import load_fixture

    d = load_fixture("r1").datum
    assert [str(p) for p in extend_map(d, modify(d), phi)] == ["1", "1"]


def test_extend_hypothesis_failure(r1):
    phi = MapToLine.parse(RING, ["1", "1"])
    with pytest.raises(HypothesisFail) as err:
        extend_map(r1, modify(r1), phi)
    assert err.value.i == 1


def test_hypothesis_flags(r1):
    assert MapToLine.parse(RING, ["y", "1"]).hypothesis_flags(r1) == [None]
    assert MapToLine.parse(RING, ["1", "0"]).hypothesis_flags(r1) == [0]


def test_probe_zero_map_finds_counterexamples(r1):
    rep = maximality_probe(r1, modify(r1), MapToLine.zero(RING, 2), seed=1, trials=10)
    assert rep.tested > 0
    assert not rep.consistent


def test_probe_consistent_for_r1_phi(r1):
    rep = maximality_probe(r1, modify(r1), MapToLine.parse(RING, ["y", "1"]), seed=1, trials=20)
    assert rep.consistent
    assert rep.tested + rep.skipped == 20


def test_probe_zero_trials(r1):
    rep = maximality_probe(r1, modify(r1), MapToLine.parse(RING, ["y", "1"]), seed=1, trials=0)
    assert rep.as_dict()["tested"] == 0 and rep.counterexamples == []


def test_pullback_identity(r2):
    assert pullback_commute(r2, RingMap.identity(r2.ring)).ok


def test_pullback_rescale(r2):
    f = RingMap.rescale(r2.ring, {"x": 2, "y": 3})
    rep = pullback_commute(r2, f)
    assert rep.ok and rep.samples_checked == 3


def test_pullback_adjoin(r2):
    f = RingMap.adjoin(r2.ring, ["z"])
    assert f.target.vars == ("x", "y", "z")
    assert pullback_commute(r2, f).ok


def test_ring_map_rejects_pair_breaking():
    R = PolyRing((("x", "y"),), ("z",))
    with pytest.raises(MapUnsupported):
        RingMap(R, R, ((1, 2), (1, 1), (1, 0)))
    with pytest.raises(MapUnsupported):
        RingMap.rescale(R, {"x": 0})


def test_rescaled_entry_moves_scalar_to_numerator():
    f = RingMap.rescale(RING, {"y": 2})
    e = LatticeBasis.from_rows(RING, [["1/y"]]).columns[0][0]
    assert str(f.entry(e).num) == "1/2"


def test_functoriality_identity_and_elementary(r2):
    R = r2.ring
    one, zero = R.one, R.zero
    ident = [[one if i == j else zero for j in range(3)] for i in range(3)]
    assert functoriality_transport(r2, ident).ok
    elem = [row[:] for row in ident]
    elem[0][2] = R("x+y^2")
    assert functoriality_transport(r2, elem, seed=4).ok
    perm = [[zero, one, zero], [one, zero, zero], [zero, zero, one]]
    assert functoriality_transport(r2, perm, seed=5).ok


def test_functoriality_rejects_non_unimodular(r1):
    R = r1.ring
    g = [[R("x"), R.zero], [R.zero, R.one]]
    with pytest.raises(NotUnimodular):
        functoriality_transport(r1, g)


def test_modify_over_finite_field():
    R = PolyRing(field=Field(101))
    d = random_datum(5, 3, 2, ring=R, scramble_count=2)
    mc = modify(d)
    assert mc.stage_diags[-1] == closed_form_stage(d.chain, mc.decomposition.blocks, d.m)


@settings(max_examples=25)
@given(st.integers(0, 10**6), st.integers(1, 3), st.integers(1, 3))
def test_random_stages_ascend_and_contain_twists(seed, r, m):
    d = random_datum(seed, r, m, scramble_count=2)
    mc = modify(d)  # verify_chain raises on any failed certificate
    for j in range(m):
        assert mc.stages[j].rank == r
        assert mc.stages[j + 1].contains_lattice(mc.stages[j])
    for i in range(1, m + 1):
        assert mc.stages[i].contains_lattice(twist(d.E(i), d.chain.D(i), "up"))


@settings(max_examples=15)
@given(st.integers(0, 10**6))
def test_random_ring_maps_commute(seed):
    d = random_datum(seed, 2, 2, scramble_count=1)
    assert pullback_commute(d, random_ring_map(d.ring, seed), seed).ok


@settings(max_examples=10)
@given(st.integers(0, 10**6))
def test_transport_along_random_unimodular(seed):
    import random

    from echelon.echelon_core import random_unimodular

    d = random_datum(seed, 2, 2, scramble_count=1)
    g = random_unimodular(random.Random(seed), d.ring, 2, 2, 1)
    assert functoriality_transport(d, g, seed).ok
