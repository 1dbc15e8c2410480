"""Datum file format, report emission and the ``echelon`` command line."""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field
from importlib import resources
from typing import Any, Dict, List, Optional, Sequence

from .echelon_core import (
    DivisorChain,
    EchelonDatum,
    decompose,
    random_chain,
    random_datum,
    reassemble,
    validate_datum,
)
from .errors import (
    BadParameters,
    EchelonError,
    InvalidDatum,
    MathFailure,
    ParseError,
    UsageError,
)
from .invariants import consistency_check, det_ledger, k_class_report
from .lattice import LatticeBasis, lattice_equal, matrix_rows, parse_frac
from .modification import (
    MapToLine,
    extend_map,
    ladder,
    maximality_probe,
    modify,
)
from .poly_ring import Field, PolyRing
from .polyechelon import (
    PolyEchelonDatum,
    check_transverse,
    order_independence_check,
    pair_ring,
    poly_modify,
    random_poly_datum,
)

COMMANDS = ("validate", "decompose", "modify", "ladder", "poly", "extend", "probe",
            "invariants", "gen", "selftest")


@dataclass(eq=False)
class DatumFile:
    ring: PolyRing
    datum: Optional[EchelonDatum] = None
    poly: Optional[PolyEchelonDatum] = None
    phi: Optional[MapToLine] = None
    seed: Optional[int] = None
    trials: Optional[int] = None
    label: str = ""

    @property
    def field(self) -> Field:
        return self.ring.field


# --- parsing -----------------------------------------------------------------


def _wrap(path: str, fn, *args):
    try:
        return fn(*args)
    except ParseError as ex:
        raise ParseError(f"{path} ({ex.location})", ex.message) from None
    except UsageError as ex:
        raise ParseError(path, str(ex)) from None


def _expect(obj, kind, path):
    if not isinstance(obj, kind):
        name = {list: "a list", dict: "an object", str: "a string", int: "an integer"}.get(kind, str(kind))
        raise ParseError(path, f"expected {name}")
    return obj


def _parse_ring(obj: dict, field_override: Optional[Field]) -> PolyRing:
    fld = field_override
    if fld is None:
        fld = _wrap("field", Field.parse, str(obj.get("field", "Q")))
    vs = _expect(obj.get("variables", {"pairs": [["x", "y"]], "free": []}), dict, "variables")
    pairs = _expect(vs.get("pairs", []), list, "variables.pairs")
    for k, pr in enumerate(pairs):
        if not (isinstance(pr, list) and len(pr) == 2 and all(isinstance(v, str) for v in pr)):
            raise ParseError(f"variables.pairs[{k}]", "expected [x, y] names")
    free = _expect(vs.get("free", []), list, "variables.free")
    return _wrap("variables", PolyRing, [tuple(p) for p in pairs], [str(v) for v in free], fld)


def _parse_chain(ring: PolyRing, obj, path: str) -> DivisorChain:
    steps = _expect(obj, list, path)
    if not steps:
        raise ParseError(path, "chain must have m >= 1 steps")
    out = []
    for i, st in enumerate(steps):
        p = f"{path}[{i}]"
        _expect(st, dict, p)
        if "t" not in st or "y" not in st:
            raise ParseError(p, "each step needs 't' and 'y'")
        t = _wrap(f"{p}.t", ring.parse_monomial, str(st["t"]))
        y = _wrap(f"{p}.y", ring.parse_monomial, str(st["y"]))
        out.append((t, y))
    return DivisorChain(ring, tuple(out))


def _parse_matrix(ring: PolyRing, obj, path: str, r: Optional[int]) -> LatticeBasis:
    rows = _expect(obj, list, path)
    n = len(rows)
    if n == 0 or (r is not None and n != r):
        raise ParseError(path, f"expected {r if r is not None else 'a non-empty'} rows, got {n}")
    parsed = []
    for i, row in enumerate(rows):
        _expect(row, list, f"{path}[{i}]")
        if len(row) != n:
            raise ParseError(f"{path}[{i}]", f"expected {n} entries, got {len(row)}")
        parsed.append([_wrap(f"{path}[{i}][{j}]", parse_frac, ring, str(e)) for j, e in enumerate(row)])
    cols = tuple(tuple(parsed[i][j] for i in range(n)) for j in range(n))
    return LatticeBasis(ring, cols)


def _parse_datum(ring: PolyRing, obj: dict, path: str, label: str = "") -> EchelonDatum:
    pre = f"{path}." if path else ""
    chain = _parse_chain(ring, obj.get("chain"), f"{pre}chain")
    mats = _expect(obj.get("filtration"), list, f"{pre}filtration")
    m = chain.length
    if len(mats) not in (m, m + 1):
        raise ParseError(f"{pre}filtration", f"chain has m={m}: expected {m} or {m + 1} matrices, got {len(mats)}")
    lats = []
    r = None
    for i, mat in enumerate(mats):
        L = _parse_matrix(ring, mat, f"{pre}filtration[{i}]", r)
        r = L.rank
        lats.append(L)
    if len(mats) == m:
        lats.insert(0, LatticeBasis.standard(ring, r))
    lats = [L.relabel(f"E^{i}") for i, L in enumerate(lats)]
    return EchelonDatum(ring, chain, tuple(lats), str(obj.get("label", label)))


def parse_datum_file(text: str, field_override: Optional[Field] = None) -> DatumFile:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as ex:
        raise ParseError(f"line {ex.lineno} col {ex.colno}", ex.msg) from None
    _expect(obj, dict, "top level")
    ring = _parse_ring(obj, field_override)
    out = DatumFile(ring, label=str(obj.get("label", "")))
    if "chain" in obj or "filtration" in obj:
        out.datum = _parse_datum(ring, obj, "", out.label)
    if "data" in obj:
        items = _expect(obj["data"], list, "data")
        if not items:
            raise ParseError("data", "empty poly-datum list")
        data = tuple(_parse_datum(ring, _expect(d, dict, f"data[{k}]"), f"data[{k}]", f"chi{k + 1}")
                     for k, d in enumerate(items))
        if len({d.rank for d in data}) != 1:
            raise ParseError("data", "all data must have the same rank")
        out.poly = PolyEchelonDatum(data, out.label)
    if out.datum is None and out.poly is None:
        raise ParseError("top level", "need 'chain' and 'filtration', or 'data'")
    if "phi" in obj:
        row = _expect(obj["phi"], list, "phi")
        r = (out.datum or out.poly.data[0]).rank
        if len(row) != r:
            raise ParseError("phi", f"expected {r} entries, got {len(row)}")
        polys = tuple(_wrap(f"phi[{k}]", ring, str(e)) for k, e in enumerate(row))
        chain = out.datum.chain if out.datum else None
        targets = tuple(chain.D(i) for i in range(1, chain.length + 1)) if chain else ()
        out.phi = MapToLine(polys, targets)
    for key in ("seed", "trials"):
        if key in obj:
            v = obj[key]
            if not isinstance(v, int) or isinstance(v, bool) or v < 0:
                raise ParseError(key, "expected a non-negative integer")
            setattr(out, key, v)
    return out


# --- serialization --------------------------------------------------------------


def chain_json(chain: DivisorChain) -> List[Dict[str, str]]:
    fm = chain.ring.format_monomial
    return [{"t": fm(t), "y": fm(y)} for t, y in chain.steps]


def datum_json(d: EchelonDatum) -> Dict[str, Any]:
    out = {"chain": chain_json(d.chain), "filtration": [matrix_rows(L) for L in d.filtration]}
    if d.label:
        out["label"] = d.label
    return out


def serialize_datum_file(f: DatumFile) -> str:
    ring = f.ring
    obj: Dict[str, Any] = {
        "field": str(ring.field),
        "variables": {"pairs": [list(p) for p in ring.pairs], "free": list(ring.free)},
    }
    if f.label:
        obj["label"] = f.label
    if f.datum is not None:
        d = datum_json(f.datum)
        d.pop("label", None)
        obj.update(d)
    if f.poly is not None:
        obj["data"] = [datum_json(d) for d in f.poly.data]
    if f.phi is not None:
        obj["phi"] = [str(p) for p in f.phi.row]
    if f.seed is not None:
        obj["seed"] = f.seed
    if f.trials is not None:
        obj["trials"] = f.trials
    return dumps(obj)


def dumps(obj) -> str:
    """Stable JSON: sorted keys, two-space indent, lists of scalars kept on one line."""
    return _dump(obj, 0) + "\n"


def _dump(obj, level: int) -> str:
    pad, inner = "  " * level, "  " * (level + 1)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{inner}{json.dumps(str(k), ensure_ascii=False)}: {_dump(obj[k], level + 1)}"
                 for k in sorted(obj, key=str)]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if all(not isinstance(x, (dict, list, tuple)) for x in obj):
            return json.dumps(list(obj), ensure_ascii=False)
        return "[\n" + ",\n".join(inner + _dump(x, level + 1) for x in obj) + "\n" + pad + "]"
    return json.dumps(obj, ensure_ascii=False)


def datum_equal(a: EchelonDatum, b: EchelonDatum) -> bool:
    return (a.ring == b.ring and a.chain == b.chain and a.m == b.m
            and all(lattice_equal(x, y) for x, y in zip(a.filtration, b.filtration)))


# --- reports -----------------------------------------------------------------


def _lat(L: LatticeBasis) -> List[List[str]]:
    return matrix_rows(L)


def validate_report(d: EchelonDatum) -> Dict[str, Any]:
    return validate_datum(d).as_dict()


def decompose_report(d: EchelonDatum) -> Dict[str, Any]:
    validate_datum(d).raise_first()
    dec = decompose(d, validated=True)
    back = reassemble(dec, d.chain)
    return {"ranks": list(dec.ranks), "blocks": list(dec.blocks), "basis": _lat(dec.basis),
            "reassembly_equal": [lattice_equal(back.E(i), d.E(i)) for i in range(d.m + 1)]}


def modify_report(d: EchelonDatum) -> Dict[str, Any]:
    mc = modify(d)
    ring = d.ring
    ledgers = det_ledger(mc, d)
    return {
        "ranks": list(mc.decomposition.ranks),
        "stages": {f"E_{j}": _lat(L) for j, L in enumerate(mc.stages)},
        "certificates": mc.certificates,
        "quotients": [{"step": q.ambient_step, "annihilator": ring.format_monomial(q.annihilator),
                       "free_rank": q.free_rank} for q in mc.quotients],
        "det_ledger": {f"E_{j}": l.as_dict() for j, l in enumerate(ledgers)},
    }


def ladder_report(d: EchelonDatum, seed: int) -> Dict[str, Any]:
    mc = modify(d)
    entries = []
    for e in ladder(d, mc, seed=seed):
        item = {"j": e.j, "i": e.i, "lattice": _lat(e.lattice), "certificate": e.certificate}
        if e.displayed is not None:
            item["displayed_form"] = _lat(e.displayed)
            item["matches_displayed_form"] = e.matches_displayed
        entries.append(item)
    return {"ladder": entries, "final_stage": _lat(mc.result),
            "flagged_mismatches": [f"E_{x['j']}^{x['i']}" for x in entries
                                   if x.get("matches_displayed_form") is False]}


def extend_report(d: EchelonDatum, phi: MapToLine) -> Dict[str, Any]:
    mc = modify(d)
    flags = phi.hypothesis_flags(d)
    vals = extend_map(d, mc, phi)
    return {"phi": [str(p) for p in phi.row], "hypothesis": {str(i + 1): f is None for i, f in enumerate(flags)},
            "extension_on_Mod_basis": [str(v) for v in vals]}


def probe_report(d: EchelonDatum, phi: MapToLine, seed: int, trials: int) -> Dict[str, Any]:
    mc = modify(d)
    extend_map(d, mc, phi)
    return maximality_probe(d, mc, phi, seed, trials).as_dict()


def invariants_report(d: EchelonDatum) -> Dict[str, Any]:
    mc = modify(d)
    ledgers = det_ledger(mc, d)
    return {"det_ledger": {f"E_{j}": l.as_dict() for j, l in enumerate(ledgers)},
            "k_classes": [k.as_dict() for k in k_class_report(mc)],
            "consistent": consistency_check(mc, ledgers)}


def poly_report(p: PolyEchelonDatum, seed: int) -> Dict[str, Any]:
    tr = check_transverse(p)
    if not tr.ok:
        return {"transversality": tr.as_dict()}
    st = poly_modify(p)
    oi = order_independence_check(p, seed)
    return {"transversality": tr.as_dict(),
            "stages": {f"M_{j}": _lat(L) for j, L in enumerate(st.stage_bundles)},
            "certificates": st.certificates, "order_independence": oi.as_dict()}


def _is_matrix(v) -> bool:
    return isinstance(v, list) and bool(v) and all(isinstance(r, list) and all(isinstance(c, str) for c in r)
                                                   for r in v)


def _matrix_lines(name: str, mat) -> List[str]:
    width = max(len(c) for row in mat for c in row)
    return [f"{name}:"] + ["  [ " + "  ".join(c.rjust(width) for c in row) + " ]" for row in mat]


def human_text(cmd: str, rep: Dict[str, Any]) -> str:
    """Short human-readable rendering of a report."""
    lines = [f"== echelon {cmd} =="]
    if "error" in rep:
        lines.append(f"{rep['error']}: {rep['message']}")
        return "\n".join(lines) + "\n"
    if cmd == "validate":
        if rep["valid"]:
            lines.append("valid")
        for f in rep["failures"]:
            where = f"i={f['i']}" + (f", j={f['j']}" if "j" in f else "")
            lines.append(f"{f['kind']}({where}) {f.get('detail', '')}".rstrip())
        return "\n".join(lines) + "\n"
    for key in sorted(rep):
        val = rep[key]
        if _is_matrix(val):
            lines.extend(_matrix_lines(key, val))
        elif isinstance(val, dict) and val and all(_is_matrix(v) for v in val.values()):
            for name in sorted(val):
                lines.extend(_matrix_lines(name, val[name]))
        elif key == "ladder":
            for e in val:
                lines.extend(_matrix_lines(f"E_{e['j']}^{e['i']} (definitional)", e["lattice"]))
                if "displayed_form" in e:
                    lines.extend(_matrix_lines(f"E_{e['j']}^{e['i']} (displayed adapted form)", e["displayed_form"]))
                    lines.append("  agrees" if e["matches_displayed_form"] else "  MISMATCH: displayed form differs")
                audit = e["certificate"]["audit"]
                lines.append(f"  certified in both intersectands; audit common samples: {audit['common_samples']}")
        elif key == "certificates":
            lines.append(f"certificates: {', '.join(sorted(val))}")
        else:
            lines.append(f"{key}: {json.dumps(val, sort_keys=True, ensure_ascii=False)}")
    return "\n".join(lines) + "\n"


# --- fixtures ------------------------------------------------------------------


def fixture_text(name: str) -> str:
    return resources.files("echelon.fixtures").joinpath(f"{name}.json").read_text(encoding="utf-8")


def load_fixture(name: str, field_override: Optional[Field] = None) -> DatumFile:
    return parse_datum_file(fixture_text(name), field_override)


def selftest_report() -> Dict[str, Any]:
    checks = {}
    r1 = load_fixture("r1").datum
    checks["r1_valid"] = validate_datum(r1).valid
    mc = modify(r1)
    want = LatticeBasis.from_rows(r1.ring, [["1/y", "0"], ["0", "1"]])
    checks["r1_mod"] = lattice_equal(mc.result, want)
    r2 = load_fixture("r2").datum
    mc2 = modify(r2)
    want2 = LatticeBasis.from_rows(r2.ring, [["1/y^2", "0", "0"], ["0", "1/y", "0"], ["0", "0", "1"]])
    checks["r2_mod"] = lattice_equal(mc2.result, want2)
    bad = load_fixture("persistence").datum
    first = validate_datum(bad).first()
    checks["persistence_detected"] = first is not None and first.kind == "PersistenceViolation" \
        and (first.i, first.j) == (1, 0)
    pair = load_fixture("poly_pair").poly
    checks["poly_order_independent"] = order_independence_check(pair).ok
    return {"checks": checks, "passed": all(checks.values())}


# --- dispatch ------------------------------------------------------------------


def _need_datum(f: DatumFile) -> EchelonDatum:
    if f.datum is None:
        raise BadParameters("this command needs a single datum ('chain' and 'filtration')")
    return f.datum


def _need_phi(f: DatumFile) -> MapToLine:
    if f.phi is None:
        raise BadParameters("this command needs a 'phi' row in the input file")
    return f.phi


def generate(args) -> DatumFile:
    fld = args.field or Field()
    if args.poly:
        ring = pair_ring(args.poly, fld)
        p = random_poly_datum(args.seed, args.poly, args.rank, args.length, args.degree, args.scramble, ring)
        return DatumFile(ring, poly=p, seed=args.seed, label=f"gen-seed{args.seed}")
    ring = PolyRing((("x", "y"),), (), fld)
    chain = None
    if args.chain != "scalar":
        import random
        chain = random_chain(random.Random(args.seed), ring, args.length, kind=args.chain)
    d = random_datum(args.seed, args.rank, args.length, degree_bound=args.degree,
                     scramble_count=args.scramble, ring=ring, chain=chain)
    return DatumFile(ring, datum=d, seed=args.seed, label=f"gen-seed{args.seed}")


def run_command(cmd: str, args) -> Dict[str, Any]:
    if cmd == "selftest":
        return selftest_report()
    if cmd == "gen":
        f = generate(args)
        return {"datum_file": json.loads(serialize_datum_file(f))}
    if not args.input:
        raise BadParameters(f"'{cmd}' needs --in <file>")
    try:
        with open(args.input, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as ex:
        raise BadParameters(f"cannot read {args.input}: {ex.strerror}") from None
    f = parse_datum_file(text, args.field)
    seed = args.seed if args.seed is not None else (f.seed or 0)
    trials = args.trials if args.trials is not None else (f.trials if f.trials is not None else 20)
    if cmd == "validate":
        return validate_report(_need_datum(f))
    if cmd == "decompose":
        return decompose_report(_need_datum(f))
    if cmd == "modify":
        return modify_report(_need_datum(f))
    if cmd == "ladder":
        return ladder_report(_need_datum(f), seed)
    if cmd == "extend":
        return extend_report(_need_datum(f), _need_phi(f))
    if cmd == "probe":
        return probe_report(_need_datum(f), _need_phi(f), seed, trials)
    if cmd == "invariants":
        return invariants_report(_need_datum(f))
    if cmd == "poly":
        if f.poly is None:
            raise BadParameters("'poly' needs a 'data' list in the input file")
        return poly_report(f.poly, seed)
    raise BadParameters(f"unknown command {cmd!r}")


def exit_code_for(cmd: str, rep: Dict[str, Any]) -> int:
    if "error" in rep:
        return rep["exit_code"]
    if cmd == "validate" and not rep["valid"]:
        return 1
    if cmd == "selftest" and not rep["passed"]:
        return 3
    if cmd == "poly" and not rep["transversality"]["transverse"]:
        return 1
    if cmd == "poly" and not rep["order_independence"]["order_independent"]:
        return 3
    return 0


def execute(cmd: str, args) -> tuple:
    """Run one command; returns (exit code, report dict).  Never raises."""
    try:
        rep = run_command(cmd, args)
    except EchelonError as ex:
        rep = {"error": type(ex).__name__, "message": str(ex), "exit_code": ex.exit_code}
        if isinstance(ex, InvalidDatum):
            rep["failure"] = ex.as_dict()
        if isinstance(ex, ParseError):
            rep["location"] = ex.location
        if getattr(ex, "witness", None) is not None:
            rep["witness"] = ex.witness
        if hasattr(ex, "column") and hasattr(ex, "i"):
            rep["failure"] = {"i": ex.i, "column": ex.column}
    except RecursionError as ex:
        rep = {"error": "InternalBreach", "message": str(ex), "exit_code": 3}
    return exit_code_for(cmd, rep), rep


def _field_arg(text: str) -> Field:
    try:
        return Field.parse(text)
    except (ValueError, UsageError) as ex:
        raise argparse.ArgumentTypeError(str(ex))


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="echelon", description="Echelon data and their modifications.")
    ap.add_argument("cmd", choices=COMMANDS)
    ap.add_argument("--in", dest="input", help="datum file (JSON)")
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--trials", type=int, default=None)
    ap.add_argument("--out", help="directory for report.json and report.txt")
    ap.add_argument("--field", type=_field_arg, default=None, help="Q or Fp:<p>")
    ap.add_argument("--json", action="store_true", help="print the machine report instead of text")
    g = ap.add_argument_group("gen")
    g.add_argument("--rank", type=int, default=2)
    g.add_argument("--length", type=int, default=2, help="chain length m")
    g.add_argument("--degree", type=int, default=1)
    g.add_argument("--scramble", type=int, default=2)
    g.add_argument("--chain", choices=("scalar", "mixed", "delta", "trivial"), default="scalar")
    g.add_argument("--poly", type=int, default=0, help="generate a transverse collection of this size")
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.cmd == "gen" and args.seed is None:
        ap.error("gen requires --seed")
    if (args.seed is not None and args.seed < 0) or (args.trials is not None and args.trials < 0):
        ap.error("--seed and --trials must be non-negative")
    code, rep = execute(args.cmd, args)
    if args.cmd == "gen" and code == 0:
        machine = dumps(rep["datum_file"])
        text = machine
    else:
        machine = dumps(rep)
        text = human_text(args.cmd, rep)
    if args.out:
        try:
            os.makedirs(args.out, exist_ok=True)
            name = "datum.json" if args.cmd == "gen" and code == 0 else "report.json"
            with open(os.path.join(args.out, name), "w", encoding="utf-8") as fh:
                fh.write(machine)
            with open(os.path.join(args.out, "report.txt"), "w", encoding="utf-8") as fh:
                fh.write(text)
        except OSError as ex:
            print(f"IOFailure: {ex}", file=sys.stderr)
            return 2
    sys.stdout.write(machine if args.json else text)
    return code


if __name__ == "__main__":
    sys.exit(main())
