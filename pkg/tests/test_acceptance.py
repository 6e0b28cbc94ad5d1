"""Acceptance criteria 1-11.

Each test records one ``PASS``/``FAIL criterion N: ...`` line.  The lines are
printed by the test itself and again in the pytest terminal summary (see
conftest.py).  Every check is an exact zero test after normalization.

Run standalone with ``python3 tests/test_acceptance.py``.
"""
import sys

import pytest
import sympy as sp

from jetvar.cohomology import (helmholtz_and_lagrangian, lambda_difference, lambda_invariant,
                               omega_from_operator)
from jetvar.expr import T, U, X, is_zero, normalize, parse_decls, parse_expr
from jetvar.forms import d_horizontal, d_vertical, euler_lagrange, parse_form
from jetvar.hamiltonian import biht_pipeline, compatibility_H2, potentialize
from jetvar.jet import (EqContext, Space, frechet, linearization, parse_operator,
                        total_derivative)
from jetvar.operators import (ansatz_conditions, first_order_ansatz, fot_test, is_symplectic,
                              symplectic_route, variational_residual, variational_route,
                              verify_variational)

EQN = Space.EQN
u, ux, uxx, uxxx = U(0, 0), U(0, 1), U(0, 2), U(0, 3)

LINES: dict = {}


def record(n: int, desc: str, checks: dict):
    """Record the criterion line and fail with the names of failed checks."""
    bad = [k for k, v in checks.items() if v is not True]
    line = f"{'PASS' if not bad else 'FAIL'} criterion {n}: {desc}"
    if bad:
        line += "  [failed: " + ", ".join(bad) + "]"
    LINES[n] = line
    print(line)
    assert not bad, line


def ctx_of(src, decls=None):
    return EqContext(parse_expr(src, decls), decls)


def op(src, ctx=None, space=EQN, decls=None):
    return parse_operator(src, decls, space=space, ctx=ctx)


PCKDV = "u_xxx + (1/2)*u_x^2 - u/(2*t)"
SKDV = "u_xxx - (3/2)*u_xx^2/u_x"


def test_criterion_01_first_order_identity():
    ctx = ctx_of(PCKDV)
    L = parse_expr("-(1/2)*t*u_x*u_t + (1/2)*t*u_x*u_xxx + (1/6)*t*u_x^3")
    cert = variational_residual(op("t*Dx", ctx), ctx, L)
    # second path: the chain-rule total derivative instead of the operator
    direct = normalize(T * total_derivative(ctx.delta, "x", None, Space.FREE)
                       - euler_lagrange(L, Space.FREE))
    record(1, "t D_x(Delta) - E(L) = 0 for the full first-order Lagrangian",
           {"residual": cert.ok, "direct_expansion": direct == 0})


def test_criterion_02_first_order_test():
    kdv = ctx_of("u_xxx + u*u_x")
    r1 = fot_test(kdv)
    kdv_dh = d_horizontal(r1.kappa, kdv).is_zero_form()
    pc = ctx_of(PCKDV)
    r2 = fot_test(pc)
    # second path: the canonical form of 2t D_x is d_H-closed
    cls = omega_from_operator(op("2*t*Dx", pc), pc)
    record(2, "KdV has no first-order operator; pcKdV gives R = t and a closed form for 2t D_x",
           {"kdv_verdict": r1.verdict == "no_operator_not_closed",
            "kdv_dH_kappa_nonzero": kdv_dh is False,
            "pckdv_verdict": r2.verdict == "operator_found",
            "pckdv_closed": r2.conservation.closed,
            "pckdv_trivial": r2.conservation.trivial,
            "pckdv_R": is_zero(r2.R - T),
            "pckdv_certs": r2.ok,
            "omega_2tDx_closed": cls.is_closed,
            "paths_agree": (r2.verdict == "operator_found") == (cls.is_closed is True)})


def test_criterion_03_opaque_ansatz_coefficients():
    d, _ = parse_decls("func K(t, x, u, u_x, u_xx, u_xxx); func R(t, x, u, u_x, u_xx, u_xxx); 0")
    K, R = d.funcs["K"], d.funcs["R"]
    ctx = EqContext(K, d)
    conds = dict(ansatz_conditions(ctx, first_order_ansatz(R, ctx)))
    K2, K3 = ctx.K_i(2), ctx.K_i(3)
    want = 2 * ctx.X(K3) * R - 2 * K2 * R + 3 * K3 * ctx.X(R)
    record(3, "opaque K, R: [th4^th0] = 0 and [th3^th0] = 2X(K3)R - 2K2 R + 3K3 X(R)",
           {"c40": is_zero(conds.get((4, 0), 0)),
            "c30": is_zero(conds.get((3, 0), 0) - want)})


def test_criterion_04_third_order_witness():
    ctx = ctx_of(PCKDV)
    E0 = op("t^2*Dx^3 + (1/3)*(2*t^2*u_x + t*x)*Dx + (1/6)*(2*t^2*u_xx + t)", ctx)
    Q0 = parse_expr("-(1/6)*(t^2*u_x^2 + t*x*u_x + 3*u_xxx*t^2)")
    L0 = parse_expr("-(1/72)*(t^2*u_x^4 + 2*t*x*u_x^3)")
    w = verify_variational(E0, ctx, Q0, L0)
    record(4, "third-order operator with its Q0, L0: both identities vanish",
           {c.name: c.ok for c in w.certificates} | {"residual_literal": w.residual == 0})


OMEGA1 = """-1/(2*u_x^2)*dx^th0^th1
    + dt^th0^((4*u_xxx*u_x - 3*u_xx^2)/(4*u_x^4)*th1 + u_xx/(2*u_x^3)*th2 - 1/(2*u_x^2)*th3)
    + 1/u_x^2*dt^th1^th2"""
ETA1 = """1/(2*u_x)*dx^th0
    + dt^((u_xx^2 - 2*u_xxx*u_x)/(4*u_x^3)*th0 + u_xx/(2*u_x^2)*th1 + 1/(2*u_x)*th2)"""
LAM1 = "-3*u_xx^2/(4*u_x^2)*dt^dx"
E0_SKDV = "(1/u_x^2)*Dx^3 - 3*(u_xx/u_x^3)*Dx^2 + (3*u_xx^2/u_x^4 - u_xxx/u_x^3)*Dx"


def test_criterion_05_schwarzian_kdv():
    ctx = ctx_of(SKDV)
    E1 = op("(1/u_x) @ Dx @ (1/u_x)", ctx)
    s1 = is_symplectic(op("(1/u_x) @ Dx @ (1/u_x)", space=Space.SB))
    s0 = is_symplectic(op(E0_SKDV, space=Space.SB))
    omega1, eta1, lam1 = (parse_form(s, space=EQN) for s in (OMEGA1, ETA1, LAM1))
    cls = omega_from_operator(E1, ctx)
    res = lambda_invariant(cls.omega, ctx)
    _, _, diff = lambda_difference(res, eta1, lam1, ctx)
    record(5, "E1 and E0 symplectic; omega1, eta1, lambda1 reproduced; lambda unique mod d_V-closed",
           {"E1_symplectic": s1.verdict, "E0_symplectic": s0.verdict,
            "omega1_match": (cls.omega - omega1).is_zero_form(),
            "dV_omega1": d_vertical(omega1).is_zero_form(),
            "dV_eta1": (d_vertical(eta1) - omega1).is_zero_form(),
            "dV_lambda1": (d_vertical(lam1) - d_horizontal(eta1, ctx)).is_zero_form(),
            "own_lambda_certs": res.ok,
            "lambda_difference_dV_closed": diff.ok})


def test_criterion_06_harry_dym_chain():
    H1 = parse_expr("-(1/2)*v_x^2/v^3", dep="v")
    D0 = parse_operator("(1/v) @ Dx^3 @ (1/v)", dep="v")
    p = potentialize(H1)
    phd = parse_expr("u_xxx/u_x^3 - (3/2)*u_xx^2/u_x^4")
    c = compatibility_H2(D0, H1)
    H2 = parse_expr("(1/2)*v_xx^2/v^5 - (15/8)*v_x^4/v^7", dep="v")
    b = biht_pipeline(D0, H1)
    record(6, "Harry-Dym: potential form, H2 = v_xx^2/(2v^5) - 15v_x^4/(8v^7), pipeline residual 0",
           {"potential_form": is_zero(p.ctx.K - phd), "potential_certs": p.ok,
            "H2_compatible": c.verdict == "compatible",
            "H2_value": c.H2 is not None and is_zero(euler_lagrange(c.H2 - H2)),
            "H2_literal": c.H2 is not None and is_zero(c.H2 - H2),
            "biht_ok": b.ok,
            "biht_operator": b.E is not None and b.E.equals(op("(1/u_x) @ Dx^3 @ (1/u_x)",
                                                                space=Space.SB)),
            "biht_residual": b.witness is not None and b.witness.residual == 0})


def test_criterion_07_second_harry_dym_example():
    ctx = ctx_of("u_xxx^(-1/2)")
    Q = parse_expr("-(2/3)*u_x*u_xxx - (1/3)*u*u_xxxx")
    _, lstar = linearization(ctx)
    via_eqn = lstar(Q)
    # second path: adjoint linearization on the free jet space, then restrict
    via_free = ctx.restrict(frechet(ctx.delta, Space.FREE).adjoint()(Q))
    hl = helmholtz_and_lagrangian(Q)
    full_L = parse_expr("(1/2)*u_xx^2*u_t")
    resid = variational_residual(op("2*u_xxx*Dx + u_xxxx", ctx), ctx, full_L)
    record(7, "L*(Q) = 0, Q not an Euler image, full-Lagrangian residual 0, both operators symplectic",
           {"Lstar_Q_eqn": is_zero(via_eqn), "Lstar_Q_free": is_zero(via_free),
            "helmholtz_false": hl.is_euler_image is False,
            "lagrangian_residual": resid.ok,
            "Dx3_symplectic": is_symplectic(op("Dx^3", space=Space.SB)).verdict,
            "second_symplectic": is_symplectic(op("2*u_xxx*Dx + u_xxxx", space=Space.SB)).verdict})


def test_criterion_08_parameter_family():
    d, _ = parse_decls("param c1, c2; 0")
    ctx = ctx_of("u_xxx + (c1*t + c2)^(-1/2)*u_x^2", d)
    r = fot_test(ctx)
    record(8, "u_t = u_xxx + (c1 t + c2)^(-1/2) u_x^2 admits a first-order operator",
           {"verdict": r.verdict == "operator_found", "certs": r.ok,
            "symbolic": bool(r.kappa.free_symbols & set(d.params.values()))
            if hasattr(r.kappa, "free_symbols") else True})


def _poly_coeffs(e, gens):
    num = sp.numer(sp.together(sp.expand(e)))
    return sp.Poly(num, *gens).coeffs() if num != 0 else []


def test_criterion_09_even_order():
    ctx = ctx_of("u_xx")
    d, _ = parse_decls("func R(t, x, u, u_x, u_xx, u_xxx); 0")
    R = d.funcs["R"]
    conds = dict(ansatz_conditions(ctx, first_order_ansatz(R, ctx)))
    forced = is_zero(conds.get((3, 0), 0) + 2 * R)
    # hand-built polynomial ansatz, solved as a linear system
    gens = [T, X, u, ux]
    monos = sorted(sp.itermonomials(gens, 2), key=sp.default_sort_key)
    cs = sp.symbols(f"a0:{len(monos)}")
    Rp = sum(c * m for c, m in zip(cs, monos))
    pconds = ansatz_conditions(ctx, first_order_ansatz(Rp, ctx))
    eqs = []
    jets = [T, X] + [U(0, i) for i in range(6)]
    for _, c in pconds:
        eqs.extend(_poly_coeffs(c, jets))
    sol = sp.linsolve(eqs, cs)
    only_zero = sol == sp.FiniteSet(tuple(0 for _ in cs))
    eps0 = first_order_ansatz(sp.Integer(0), ctx).is_zero_form()
    record(9, "u_t = u_xx: the first-order ansatz conditions force R = 0, so eps = 0",
           {"c30_is_minus_2R": forced, "polynomial_ansatz_only_zero": only_zero,
            "eps_zero": eps0})


# property-suite outcomes are collected by conftest.py when both files run
PROPERTY_TESTS = (
    "test_dH_squared", "test_dV_squared", "test_dH_dV_anticommute", "test_X_T_commute",
    "test_adjoint_involution", "test_adjoint_anti_homomorphism",
    "test_euler_kills_total_x_derivatives", "test_ibp_idempotent", "test_ibp_kills_dH",
    "test_projection_commutes_with_dH", "test_projection_commutes_with_dV",
    "test_helmholtz_round_trip", "test_helmholtz_decides_euler_images",
)


def test_criterion_10_property_suites(request):
    outcomes = getattr(request.config, "_jetvar_property_outcomes", None)
    if outcomes:
        seen = {nodeid.split("::")[1].split("[")[0] for nodeid in outcomes}
        checks = {name: (name in seen and all(ok for nid, ok in outcomes.items()
                                               if nid.split("::")[1].split("[")[0] == name))
                  for name in PROPERTY_TESTS}
    else:
        import test_properties as tp
        checks = {}
        for name in PROPERTY_TESTS:
            fn = getattr(tp, name)
            marks = [m for m in getattr(fn, "pytestmark", []) if m.name == "parametrize"]
            try:
                if marks:
                    argname, values = marks[0].args[0], marks[0].args[1]
                    for v in values:
                        fn(**{argname: v})
                else:
                    fn()
                checks[name] = True
            except Exception:  # noqa: BLE001 - the failure is reported by name
                checks[name] = False
    record(10, "randomized bicomplex and operator identities, 200 examples each", checks)


def test_criterion_11_routes_agree():
    cases = [
        ("u_xxx/u_x^3 - (3/2)*u_xx^2/u_x^4", "(1/u_x) @ Dx^3 @ (1/u_x)"),
        ("u_xxx/u_x^3 - (3/2)*u_xx^2/u_x^4", "Dx"),
        (SKDV, "(1/u_x) @ Dx @ (1/u_x)"),
        (SKDV, E0_SKDV),
        ("u_xxx^(-1/2)", "Dx^3"),
        ("u_xxx^(-1/2)", "2*u_xxx*Dx + u_xxxx"),
        ("u_xxx + u*u_x", "Dx"),
        ("u_xxx + u*u_x", "(1/u_x) @ Dx @ (1/u_x)"),
        ("u_xx", "Dx"),
    ]
    checks = {}
    for K, S in cases:
        ctx = ctx_of(K)
        E = op(S, space=Space.SB)
        v1, _, _ = variational_route(E, ctx)
        v2, _, _ = symplectic_route(E, ctx)
        checks[f"{K} | {S}"] = v1 is not None and v1 == v2
    record(11, "variational and symplectic-Hamiltonian routes agree on time-independent cases",
           checks)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
