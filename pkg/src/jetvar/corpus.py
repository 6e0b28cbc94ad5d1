"""Bundled example corpus: ``*.case`` files run through the CLI checks.

A case file is an INI file::

    [case]
    name = kdv_first_order
    check = first-order
    tags = fot, kdv

    [declare]
    decls = param c
    dep = u

    [equation]
    K = u_xxx + u*u_x

    [expect]
    verdict = no_operator_not_closed
    ok = true
    cert.kappa_closed = false
    witness.kappa = -2*u_x*dt

Inputs may be spread over the [equation], [operator], [witness] and
[inputs] sections; they are merged into one dict.

Witness expectations are compared exactly (expressions by the zero test,
operators and forms by their own equality).
"""
from __future__ import annotations

import configparser
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import sympy as sp

from .report import Certificate, Report, combine

CORPUS_DIR = Path(__file__).with_name("corpus")


@dataclass
class Case:
    name: str
    check: str
    path: str
    tags: list = field(default_factory=list)
    decls: str = ""
    dep: str = "u"
    base_point: Optional[str] = None
    order_bound: Optional[int] = None
    inputs: dict = field(default_factory=dict)
    expect: dict = field(default_factory=dict)


def load_case(path) -> Case:
    cp = configparser.ConfigParser(interpolation=None, delimiters=("=",))
    cp.optionxform = str  # keep K, E, S as written
    with open(path, encoding="utf-8") as fh:
        cp.read_file(fh)
    c = cp["case"]
    decl = cp["declare"] if cp.has_section("declare") else {}
    return Case(
        name=c.get("name", Path(path).stem),
        check=c["check"],
        path=str(path),
        tags=[t.strip() for t in c.get("tags", "").split(",") if t.strip()],
        decls=decl.get("decls", "") if decl else "",
        dep=decl.get("dep", "u") if decl else "u",
        base_point=decl.get("base_point") if decl else None,
        order_bound=int(decl["order_bound"]) if decl and "order_bound" in decl else None,
        inputs=_inputs(cp),
        expect=dict(cp["expect"]) if cp.has_section("expect") else {},
    )


INPUT_SECTIONS = ("equation", "operator", "inputs", "witness")


def _inputs(cp) -> dict:
    out = {}
    for sec in INPUT_SECTIONS:
        if cp.has_section(sec):
            for k, v in cp[sec].items():
                if k in out:
                    raise ValueError(f"input {k!r} given twice")
                out[k] = v
    return out


def list_cases(filt: Optional[str] = None, dirs=()) -> list:
    paths = sorted(CORPUS_DIR.glob("*.case"))
    for d in dirs:
        paths.extend(sorted(Path(d).glob("*.case")))
    cases = [load_case(p) for p in paths]
    if filt:
        cases = [c for c in cases if filt in c.name or filt in c.tags or filt == c.check]
    return sorted(cases, key=lambda c: c.name)


def _matches(got, text: str, inp) -> Optional[bool]:
    from .forms import Form, parse_form
    from .jet import DiffOperator, Space
    if isinstance(got, Form):
        return got.equals(parse_form(text, inp.decls, got.space, inp.dep))
    if isinstance(got, DiffOperator):
        return got.equals(inp.op_text(text, got.space))
    if isinstance(got, (str, int, bool)):
        return str(got) == text.strip()
    from .expr import is_zero, parse_expr
    return is_zero(sp.sympify(got) - parse_expr(text, inp.decls, inp.dep))


def _truth(text: str):
    t = text.strip().lower()
    return {"true": True, "false": False, "none": None, "inconclusive": None}[t]


def check_expectations(rep: Report, case: Case, inp) -> list:
    out = []
    for key, want in case.expect.items():
        if key == "verdict":
            out.append(Certificate.flag("expect.verdict", rep.verdict == want.strip(),
                                        f"got {rep.verdict!r}"))
        elif key == "ok":
            out.append(Certificate.flag("expect.ok", rep.ok == _truth(want), f"got {rep.ok}"))
        elif key.startswith("cert."):
            name = key[5:]
            got = [c for c in rep.certificates if c.name == name]
            if not got:
                out.append(Certificate.flag(f"expect.{key}", False, "certificate missing"))
            else:
                out.append(Certificate.flag(f"expect.{key}", got[0].ok == _truth(want),
                                            f"got {got[0].ok}"))
        elif key.startswith("witness."):
            name = key[8:]
            if name not in rep.witnesses:
                out.append(Certificate.flag(f"expect.{key}", False, "witness missing"))
            else:
                ok = _matches(rep.witnesses[name], want, inp)
                out.append(Certificate.flag(f"expect.{key}", ok, None if ok else want))
        else:
            out.append(Certificate.flag(f"expect.{key}", False, "unknown expectation key"))
    return out


@dataclass
class CaseResult:
    name: str
    check: str
    report: Optional[dict]
    expectations: list
    passed: bool
    error: Optional[str] = None
    timing: float = 0.0


def run_case(case: Case) -> CaseResult:
    from .cli import Inputs, run_check
    t0 = time.perf_counter()
    try:
        inp = Inputs(dict(case.inputs), case.decls, case.dep, case.base_point, case.order_bound)
        rep = run_check(case.check, inp)
        exps = check_expectations(rep, case, inp)
        passed = combine(c.ok for c in exps) is True
        return CaseResult(case.name, case.check, rep.to_json(timing=False),
                          [c.to_json() for c in exps], passed,
                          timing=time.perf_counter() - t0)
    except Exception as exc:  # isolate failures per case
        tb = traceback.format_exception_only(type(exc), exc)[-1].strip()
        return CaseResult(case.name, case.check, None, [], False, tb,
                          timing=time.perf_counter() - t0)


class CorpusReport:
    def __init__(self, results: list):
        self.results = results

    @property
    def ok(self):
        return all(r.passed for r in self.results)

    def exit_code(self):
        return 0 if self.ok else 1

    def to_json(self, timing=True) -> dict:
        rows = []
        for r in self.results:
            row = {"name": r.name, "check": r.check, "passed": r.passed,
                   "expectations": r.expectations, "report": r.report, "error": r.error}
            if timing:
                row["timing"] = round(r.timing, 3)
            rows.append(row)
        return {"cases": rows, "passed": sum(r.passed for r in self.results),
                "total": len(self.results)}

    def dumps(self, timing=True) -> str:
        import json
        return json.dumps(self.to_json(timing), indent=2, sort_keys=True)

    def text(self) -> str:
        lines = []
        for r in self.results:
            lines.append(f"{'PASS' if r.passed else 'FAIL'} {r.name} ({r.check})")
            if r.error:
                lines.append(f"    error: {r.error}")
            for e in r.expectations:
                if e["ok"] is not True:
                    lines.append(f"    {e['name']}: {e['residual']}")
        lines.append(f"{sum(r.passed for r in self.results)}/{len(self.results)} cases passed")
        return "\n".join(lines)


def corpus_run(filt: Optional[str] = None, parallel: bool = False, dirs=()) -> CorpusReport:
    cases = list_cases(filt, dirs)
    if parallel and len(cases) > 1:
        with ProcessPoolExecutor() as pool:
            results = list(pool.map(run_case, cases))
    else:
        results = [run_case(c) for c in cases]
    return CorpusReport(results)
