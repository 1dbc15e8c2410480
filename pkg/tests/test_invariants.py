import pytest
from hypothesis import given, settings, strategies as st

from echelon.echelon_core import DivisorChain, normal_form, random_datum
from echelon.invariants import (
    DivisorClassLedger,
    consistency_check,
    det_ledger,
    expected_ledger,
    k_class_report,
)
from echelon.modification import modify
from echelon.poly_ring import PolyRing


def test_r1_ledger(r1):
    led = det_ledger(modify(r1), r1)
    assert [x.as_dict() for x in led] == [{}, {"y": -1}]


def test_r2_ledger(r2):
    led = det_ledger(modify(r2), r2)
    assert [x.as_dict() for x in led] == [{}, {"y": -2}, {"y": -3}]


def test_expected_ledger_mixed_y():
    R = PolyRing((("x", "y"), ("u", "v")))
    chain = DivisorChain.parse(R, [("x*y", "y"), ("x*y*u*v", "y*v")])
    d = normal_form(R, chain, (1, 2, 1))
    # y_1 = y weighs r_0 + r_1, y_2 = y*v weighs r_0
    assert expected_ledger(d, (1, 2, 1)) == {"y": -4, "v": -1}
    assert det_ledger(modify(d), d)[-1].as_dict() == {"v": -1, "y": -4}


def test_ledger_difference():
    a = DivisorClassLedger({"y": -3, "v": -1})
    b = DivisorClassLedger({"y": -2, "v": -1})
    assert (a - b).as_dict() == {"y": -1}


def test_k_classes_r2(r2):
    ks = [k.as_dict() for k in k_class_report(modify(r2))]
    assert ks == [
        {"step": 0, "support": "y", "rank": 2, "twist": "1/y"},
        {"step": 1, "support": "y", "rank": 1, "twist": "1/y^2"},
    ]


def test_k_classes_trivial_chain_empty():
    R = PolyRing()
    d = normal_form(R, DivisorChain.parse(R, [("x", "1")]), (1, 1))
    assert k_class_report(modify(d)) == []


def test_consistency_r2(r2):
    mc = modify(r2)
    assert consistency_check(mc, det_ledger(mc, r2))


def test_consistency_detects_tampering(r2):
    mc = modify(r2)
    led = det_ledger(mc, r2)
    led[1] = DivisorClassLedger({"y": -1})
    assert not consistency_check(mc, led)


@settings(max_examples=25)
@given(st.integers(0, 10**6), st.integers(1, 4), st.integers(1, 3))
def test_random_ledgers_telescope(seed, r, m):
    d = random_datum(seed, r, m, scramble_count=2)
    mc = modify(d)
    led = det_ledger(mc, d)
    assert consistency_check(mc, led)
    ranks = mc.decomposition.ranks
    want = {}
    for k in range(1, m + 1):
        for v, e in enumerate(d.chain.y(k)):
            name = d.ring.vars[v]
            want[name] = want.get(name, 0) - e * sum(ranks[: m - k + 1])
    assert led[-1].as_dict() == {k: v for k, v in sorted(want.items()) if v}
