"""Command-line front end: ``jetvar <check> ...``.

Every check takes a dict of text inputs and returns a Report, so the corpus
runner and the command line share one code path.
"""
from __future__ import annotations

import argparse
import sys
import time
from typing import Callable, Optional

import sympy as sp

from .cohomology import (canonical_representative, conservation_characteristic,
                         helmholtz_and_lagrangian, lambda_difference, lambda_invariant,
                         omega_from_operator)
from .expr import Decls, ParseError, _coord_from_name, is_zero, parse_decls, parse_expr
from .forms import Form, IntegrationError, d_horizontal, d_vertical, parse_form
from .hamiltonian import (biht_pipeline, compatibility_H2, dorfman_operator,
                          hsckdv_experiment, potentialize)
from .jet import DiffOperator, EqContext, Space, SpaceError, parse_operator
from .operators import (ansatz_conditions, first_order_ansatz, fot_test, hamiltonian_of,
                        is_symplectic, symplectic_route, variational_residual,
                        variational_route, verify_variational)
from .report import Certificate, Report

EX_USAGE = 64


class UsageError(Exception):
    pass


class Inputs:
    """Text inputs plus the declarations they are parsed with."""

    def __init__(self, values: dict, decls: str = "", dep: str = "u",
                 base_point: Optional[str] = None, order_bound: Optional[int] = None):
        self.values = {k: v for k, v in values.items() if v is not None}
        d = Decls(dep=dep)
        if decls:
            d, rest = parse_decls(decls.rstrip().rstrip(";") + ";", d)
            if rest:
                raise UsageError(f"unexpected text in declarations: {rest!r}")
        self.decls = d
        self.dep = dep
        self.base = parse_base_point(base_point, dep)
        self.order_bound = order_bound

    def has(self, key):
        return key in self.values

    def need(self, key):
        if key not in self.values:
            raise UsageError(f"missing input --{key}")
        return self.values[key]

    def expr(self, key, dep=None):
        return parse_expr(self.need(key), self.decls, dep or self.dep)

    def op(self, key, space=Space.SB, ctx=None, dep=None):
        return parse_operator(self.need(key), self.decls, space, ctx, dep or self.dep)

    def op_text(self, text, space=Space.SB):
        ctx = self.ctx() if space is Space.EQN else None
        return parse_operator(text, self.decls, space, ctx, self.dep)

    def form(self, key, space=None):
        return parse_form(self.need(key), self.decls, space, self.dep)

    def ctx(self):
        return EqContext(self.expr("K"), self.decls)

    def echo(self):
        return dict(self.values)


def parse_base_point(text: Optional[str], dep: str = "u") -> dict:
    """``"u_x=1, u=0"`` -> {U(0,1): 1, U(0,0): 0}."""
    out = {}
    if not text:
        return out
    for part in text.split(","):
        if not part.strip():
            continue
        if "=" not in part:
            raise UsageError(f"bad base point entry {part!r}")
        name, val = (s.strip() for s in part.split("=", 1))
        c = _coord_from_name(name, dep)
        if c is None:
            raise UsageError(f"{name!r} is not a jet coordinate")
        out[c] = sp.Rational(val)
    return out


def _verdict(ok, yes, no, maybe="inconclusive"):
    return yes if ok is True else (no if ok is False else maybe)


# --------------------------------------------------------------------------
# checks


def check_variational(inp: Inputs) -> Report:
    ctx = inp.ctx()
    E = inp.op("E", Space.EQN, ctx)
    rep = Report("check-variational", inp.echo(), dep=inp.dep)
    if inp.has("lagrangian"):
        rep.add(Certificate.of("skew", E + E.adjoint()))
        rep.add(variational_residual(E, ctx, inp.expr("lagrangian")))
    elif inp.has("Q"):
        Q = inp.expr("Q")
        L = inp.expr("L") if inp.has("L") else None
        if L is None:
            raise UsageError("--Q needs --L (or give neither)")
        wit = verify_variational(E, ctx, Q, L)
        for c in wit.certificates:
            rep.add(c)
        rep.witnesses.update(Q=Q, L=L)
    else:
        ok, wit, note = variational_route(E, ctx, inp.base, inp.order_bound)
        if wit is None:
            rep.add(Certificate.flag("variational_route", ok, note))
        else:
            for c in wit.certificates:
                rep.add(c)
            rep.witnesses.update(Q=wit.Q, L=wit.L)
        if note:
            rep.notes.append(note)
    rep.verdict = _verdict(rep.ok, "variational", "not variational")
    return rep


def check_first_order(inp: Inputs) -> Report:
    ctx = inp.ctx()
    r = fot_test(ctx)
    rep = Report("first-order", inp.echo(), dep=inp.dep)
    rep.witnesses.update(khat2=r.khat2, kappa=r.kappa)
    if r.verdict == "no_operator_not_closed":
        rep.add(Certificate.of("kappa_closed", d_horizontal(r.kappa, ctx)))
    else:
        for c in r.certificates:
            rep.add(c)
    if r.R is not None:
        rep.witnesses.update(R=r.R, E=r.E)
    if r.conservation is not None and r.conservation.Q is not None:
        rep.witnesses["characteristic"] = r.conservation.Q
    rep.verdict = r.verdict
    return rep


def check_symplectic(inp: Inputs) -> Report:
    S = inp.op("S")
    r = is_symplectic(S, inp.base)
    rep = Report("symplectic", inp.echo(), list(r.certificates), dep=inp.dep)
    if r.P is not None:
        rep.witnesses["P"] = r.P
    rep.verdict = r.reason
    return rep


def check_hamiltonian(inp: Inputs) -> Report:
    ctx = inp.ctx()
    S = inp.op("S")
    rep = Report("hamiltonian", inp.echo(), dep=inp.dep)
    if inp.has("P"):
        P = inp.expr("P")
    else:
        sym = is_symplectic(S, inp.base)
        for c in sym.certificates:
            rep.add(c)
        if sym.P is None:
            rep.verdict = sym.reason
            return rep
        P = sym.P
    h = hamiltonian_of(S, ctx, P, inp.base)
    for c in h.certificates:
        rep.add(c)
    rep.witnesses.update(P=P, G=h.G)
    if h.H is not None:
        rep.witnesses["H"] = h.H
    rep.verdict = "Hamiltonian" if h.verdict is True else (h.note or "not Hamiltonian for S")
    if h.verdict is not True and h.note:
        rep.notes.append(h.note)
    return rep


def check_conservation(inp: Inputs) -> Report:
    ctx = inp.ctx()
    A = inp.expr("A")
    B = inp.expr("B") if inp.has("B") else sp.Integer(0)
    kappa = Form.make(Space.EQN, {(("x",), ()): A, (("t",), ()): B}, (1, 0))
    r = conservation_characteristic(kappa, ctx)
    rep = Report("conservation", inp.echo(), list(r.certificates), dep=inp.dep)
    if r.Q is not None:
        rep.witnesses["Q"] = r.Q
    if r.witness is not None:
        rep.witnesses["f"] = r.witness.f
        if r.witness.R is not None:
            rep.witnesses["R"] = r.witness.R
    rep.verdict = r.verdict
    return rep


def check_helmholtz(inp: Inputs) -> Report:
    Q = inp.expr("Q")
    r = helmholtz_and_lagrangian(Q, Space.SB, inp.base)
    rep = Report("helmholtz", inp.echo(), list(r.certificates), dep=inp.dep)
    if r.A is not None:
        rep.witnesses["A"] = r.A
    if r.note:
        rep.notes.append(r.note)
    rep.verdict = _verdict(r.is_euler_image, "Euler-Lagrange expression", "not an Euler image")
    return rep


def _omega(inp: Inputs, ctx):
    if inp.has("omega"):
        return inp.form("omega", Space.EQN), None
    E = inp.op("E", Space.EQN, ctx)
    return None, E


def check_canonical_rep(inp: Inputs) -> Report:
    ctx = inp.ctx()
    rep = Report("canonical-rep", inp.echo(), dep=inp.dep)
    omega, E = _omega(inp, ctx)
    if E is not None:
        cls = omega_from_operator(E, ctx)
    else:
        cls, xi = canonical_representative(omega, ctx)
        rep.witnesses["xi"] = xi
    for c in cls.certificates:
        rep.add(c)
    rep.witnesses.update(epsilon=cls.epsilon, omega=cls.omega)
    if inp.has("reference"):
        rep.add(Certificate.of("matches_reference", cls.omega - inp.form("reference", Space.EQN)))
    rep.verdict = _verdict(rep.ok, "canonical representative", "failed")
    return rep


def check_lambda(inp: Inputs) -> Report:
    ctx = inp.ctx()
    rep = Report("lambda", inp.echo(), dep=inp.dep)
    omega, E = _omega(inp, ctx)
    if omega is None:
        omega = omega_from_operator(E, ctx).omega
    res = lambda_invariant(omega, ctx, inp.base or None)
    for c in res.certificates:
        rep.add(c)
    rep.witnesses.update(eta=res.eta, lam=res.lam)
    if res.nu.terms:
        rep.witnesses["nu"] = res.nu
    if inp.has("eta_ref") and inp.has("lam_ref"):
        eta_ref, lam_ref = inp.form("eta_ref", Space.EQN), inp.form("lam_ref", Space.EQN)
        rep.add(Certificate.of("ref_dV_eta", d_vertical(eta_ref) - res.omega))
        rep.add(Certificate.of("ref_dV_lambda", d_vertical(lam_ref) - d_horizontal(eta_ref, ctx)))
        delta, mu, cert = lambda_difference(res, eta_ref, lam_ref, ctx, inp.base or None)
        rep.add(cert)
        rep.witnesses.update(lambda_difference=delta, mu=mu)
    rep.verdict = _verdict(rep.ok, "lambda constructed", "failed")
    return rep


def check_potentialize(inp: Inputs) -> Report:
    depth = int(inp.values.get("depth", 1))
    H1 = inp.expr("H1", dep=inp.values.get("hdep", "v"))
    p = potentialize(H1, depth)
    rep = Report("potentialize", inp.echo(), list(p.certificates), dep=inp.dep)
    rep.witnesses["K"] = p.ctx.K
    if p.witness is not None:
        rep.witnesses.update(Q=p.witness.Q, L=p.witness.L)
    if p.note:
        rep.notes.append(p.note)
    rep.verdict = _verdict(rep.ok, "potential form certified", "failed")
    return rep


def check_compat(inp: Inputs) -> Report:
    hdep = inp.values.get("hdep", "v")
    D0 = inp.op("D0", dep=hdep)
    H1 = inp.expr("H1", dep=hdep)
    rep = Report("compat", inp.echo(), dep=inp.dep)
    if str(inp.values.get("biht", "false")).lower() in ("1", "true", "yes"):
        b = biht_pipeline(D0, H1, inp.base or None)
        for c in b.certificates:
            rep.add(c)
        if b.compat.H2 is not None:
            rep.witnesses["H2"] = b.compat.H2
            rep.notes.append("H2 is printed in u; read it in v before v = u_x")
        if b.witness is not None:
            rep.witnesses.update(E=b.E, Q=b.witness.Q, L=b.witness.L, K=b.potential.ctx.K)
        else:
            rep.add(Certificate.flag("biht", False, b.note))
        rep.verdict = _verdict(rep.ok, "variational operator for the potential form", "failed")
        return rep
    # G and H2 live in the unpotentialized variable
    rep.dep = hdep
    c = compatibility_H2(D0, H1, inp.base or None)
    for cert in c.certificates:
        rep.add(cert)
    rep.witnesses["G"] = c.G
    if c.H2 is not None:
        rep.witnesses["H2"] = c.H2
    else:
        rep.add(Certificate.flag("compatible", False, c.verdict))
    rep.verdict = c.verdict
    return rep


def check_dorfman(inp: Inputs) -> Report:
    hdep = inp.values.get("hdep", "v")
    rep = Report("dorfman", inp.echo(), dep=inp.dep)

    def val(key, default):
        return inp.expr(key, dep=hdep) if inp.has(key) else default

    k1, k2 = val("k1", sp.Symbol("k1", positive=True)), val("k2", sp.Symbol("k2", positive=True))
    c1, c2 = val("c1", sp.Symbol("c1", positive=True)), val("c2", sp.Integer(1))
    from .expr import U
    h = inp.expr("h", dep=hdep) if inp.has("h") else 1 / (k1 * U(0, 0) + k2)
    try:
        D = dorfman_operator(h, c1, c2)
    except IntegrationError as exc:
        rep.add(Certificate.flag("antiderivative", False, str(exc)))
        rep.verdict = "antiderivative outside the fragment"
        return rep
    E = D.shift(1).normalized()
    rep.witnesses.update(D=D, E=E)
    rep.add(Certificate.of("skew", E + E.adjoint()))
    if inp.has("reference"):
        rep.add(Certificate.of("matches_reference", E - inp.op("reference")))
    if str(inp.values.get("symplectic", "true")).lower() in ("1", "true", "yes"):
        sym = is_symplectic(E, inp.base or None, want_potential=False)
        rep.certificates.extend(c for c in sym.certificates if c.name != "skew")
    rep.verdict = _verdict(rep.ok, "symplectic", "not symplectic")
    return rep


# checks used by the corpus only

def check_tfae(inp: Inputs) -> Report:
    ctx = inp.ctx()
    S = inp.op("S")
    rep = Report("tfae", inp.echo(), dep=inp.dep)
    v1, wit, n1 = variational_route(S, ctx, inp.base or None, inp.order_bound)
    v2, H, n2 = symplectic_route(S, ctx, inp.base or None)
    rep.witnesses.update(variational=str(v1), symplectic=str(v2))
    if wit is not None:
        rep.witnesses.update(Q=wit.Q, L=wit.L)
    if H is not None:
        rep.witnesses["H"] = H
    rep.notes.extend(n for n in (n1, n2) if n)
    agree = v1 is not None and v1 == v2
    rep.add(Certificate.flag("routes_agree", True if agree else (None if None in (v1, v2) else False),
                             f"variational={v1} symplectic={v2}"))
    rep.verdict = "both" if v1 is True and agree else ("neither" if agree else "disagree")
    return rep


def check_ansatz(inp: Inputs) -> Report:
    ctx = inp.ctx()
    R = inp.expr("R")
    eps = first_order_ansatz(R, ctx)
    rep = Report("ansatz", inp.echo(), dep=inp.dep)
    conds = ansatz_conditions(ctx, eps)
    for idx, c in conds:
        rep.witnesses[f"c{idx[0]}{idx[1]}"] = c
    for key, text in inp.values.items():
        if key.startswith("expect_c"):
            i = tuple(int(ch) for ch in key[len("expect_c"):])
            got = dict(conds).get(i, sp.Integer(0))
            rep.add(Certificate.of(f"coefficient_{i[0]}_{i[1]}", got - inp.expr(key)))
    rep.verdict = f"{len(conds)} conditions"
    return rep


def check_hsckdv(inp: Inputs) -> Report:
    sign = int(inp.values.get("sign", -1))
    out = hsckdv_experiment(sign)
    rep = Report("hsckdv", inp.echo(), dep="w")
    for k in ("D1_E_H1", "D0_E_H0", "same_flow", "D0_skew"):
        rep.add(out[k])
    comp = out["compat"]
    rep.witnesses.update(sign=sign, G=comp.G)
    if comp.H2 is not None:
        rep.witnesses["H2"] = comp.H2
    rep.notes.append(comp.verdict)
    rep.verdict = "raw certificates only"
    return rep


CHECKS: dict[str, Callable[[Inputs], Report]] = {
    "check-variational": check_variational,
    "first-order": check_first_order,
    "symplectic": check_symplectic,
    "hamiltonian": check_hamiltonian,
    "conservation": check_conservation,
    "helmholtz": check_helmholtz,
    "canonical-rep": check_canonical_rep,
    "lambda": check_lambda,
    "potentialize": check_potentialize,
    "compat": check_compat,
    "dorfman": check_dorfman,
    "tfae": check_tfae,
    "ansatz": check_ansatz,
    "hsckdv": check_hsckdv,
}

# subcommand -> input flags
FLAGS = {
    "check-variational": ["K", "E", "Q", "L", "lagrangian"],
    "first-order": ["K"],
    "symplectic": ["S"],
    "hamiltonian": ["K", "S", "P"],
    "conservation": ["K", "A", "B"],
    "helmholtz": ["Q"],
    "canonical-rep": ["K", "E", "omega", "reference"],
    "lambda": ["K", "E", "omega", "eta_ref", "lam_ref"],
    "potentialize": ["H1", "depth"],
    "compat": ["D0", "H1", "biht"],
    "dorfman": ["h", "k1", "k2", "c1", "c2", "reference", "symplectic"],
}


def run_check(name: str, inp: Inputs) -> Report:
    t0 = time.perf_counter()
    rep = CHECKS[name](inp)
    rep.timing = time.perf_counter() - t0
    return rep


# --------------------------------------------------------------------------
# argument parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EX_USAGE)


def _common(p):
    p.add_argument("--json", action="store_true", help="print the report as JSON")
    p.add_argument("--decls", default="", help='declarations, e.g. "param c1, c2; func R(t,x,u)"')
    p.add_argument("--dep", default="u", help="dependent variable letter (default u)")
    p.add_argument("--base-point", default=None, help='homotopy base point, e.g. "u_x=1"')
    p.add_argument("--order-bound", type=int, default=None, help="ansatz order bound")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="jetvar", description="Variational bicomplex checks for u_t = K.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    for name, flags in FLAGS.items():
        p = sub.add_parser(name)
        _common(p)
        for f in flags:
            names = [f"--{f}"] + ([f"--{f.replace('_', '-')}"] if "_" in f else [])
            p.add_argument(*names, dest=f, default=None)
        if name in ("potentialize", "compat", "dorfman"):
            p.add_argument("--hdep", default="v", help="letter of the Hamiltonian variable")
    pc = sub.add_parser("corpus")
    pc.add_argument("action", choices=["run", "list"])
    pc.add_argument("filter", nargs="?", default=None)
    pc.add_argument("--parallel", action="store_true")
    pc.add_argument("--dir", action="append", default=[], help="extra directory of .case files")
    pc.add_argument("--json", action="store_true")
    pc.add_argument("--no-timing", action="store_true")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EX_USAGE
    if args.command == "corpus":
        from .corpus import corpus_run, list_cases
        if args.action == "list":
            for case in list_cases(args.filter, args.dir):
                print(case.name)
            return 0
        rep = corpus_run(args.filter, args.parallel, args.dir)
        print(rep.dumps(timing=not args.no_timing) if args.json else rep.text())
        return rep.exit_code()
    values = {f: getattr(args, f) for f in FLAGS[args.command]}
    if getattr(args, "hdep", None):
        values["hdep"] = args.hdep
    try:
        inp = Inputs(values, args.decls, args.dep, args.base_point, args.order_bound)
        rep = run_check(args.command, inp)
    except (UsageError, ParseError) as exc:
        print(f"jetvar {args.command}: {exc}", file=sys.stderr)
        return EX_USAGE
    except (SpaceError, ValueError, IntegrationError) as exc:
        print(f"jetvar {args.command}: {exc}", file=sys.stderr)
        return 1
    print(rep.dumps() if args.json else rep.text())
    return rep.exit_code()


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
