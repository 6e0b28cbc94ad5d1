import pytest

from jetvar.cohomology import (beta_form, canonical_representative, conservation_characteristic,
                               contact_coeffs, contact_form, dv_closed_representative,
                               helmholtz_and_lagrangian, lambda_invariant, omega_from_operator,
                               reduce_lagrangian, rho_adjoint)
from jetvar.expr import T, U, is_zero, parse_expr
from jetvar.forms import Form, d_horizontal, d_vertical, euler_lagrange, parse_form
from jetvar.jet import EqContext, Space, parse_operator

u, ux, uxx, uxxx = U(0, 0), U(0, 1), U(0, 2), U(0, 3)
SKDV = "u_xxx - (3/2)*u_xx^2/u_x"


def ctx_of(src):
    return EqContext(parse_expr(src))


def test_contact_round_trip():
    rho = contact_form([u, 0, ux])
    assert contact_coeffs(rho) == [u, 0, ux]


def test_rho_adjoint_of_skew_form():
    # theta^1 (D_x) is skew, u theta^0 (multiplication) is not
    rho = contact_form([0, 1])
    assert (rho + rho_adjoint(rho)).is_zero_form() is True
    rho = contact_form([u])
    assert (rho + rho_adjoint(rho)).is_zero_form() is False
    rho = contact_form([uxx / 2, ux])
    assert (rho + rho_adjoint(rho)).is_zero_form() is True


def test_omega_from_dx_on_kdv_is_not_closed():
    cls = omega_from_operator(parse_operator("Dx", space=Space.EQN), ctx_of("u_xxx + u*u_x"))
    assert cls.is_skew is True
    assert cls.is_closed is False


def test_omega_from_dx_on_linear_is_closed():
    cls = omega_from_operator(parse_operator("Dx", space=Space.EQN), ctx_of("u_xxx"))
    assert cls.ok is True


def test_omega_requires_skew():
    with pytest.raises(ValueError):
        omega_from_operator(parse_operator("u*Dx", space=Space.EQN), ctx_of("u_xxx"))


def test_even_order_warns():
    with pytest.warns(UserWarning):
        omega_from_operator(parse_operator("Dx", space=Space.EQN), ctx_of("u_xx"))


def test_canonical_representative_recovers_class():
    ctx = ctx_of(SKDV)
    cls = omega_from_operator(parse_operator("(1/u_x) @ Dx @ (1/u_x)", space=Space.EQN), ctx)
    xi = parse_form("u_xx/u_x^2*th0^th1 + u*th2^th0")
    shifted = cls.omega + d_horizontal(xi, ctx)
    again, xi2 = canonical_representative(shifted, ctx)
    assert again.epsilon.equals(cls.epsilon)
    assert again.cert("same_class").ok is True


def test_beta_form_shape():
    ctx = ctx_of("u_xxx + u*u_x")
    b = beta_form(contact_form([0, 1]), ctx)
    assert b.grade == (0, 2)


def test_dv_closed_representative():
    ctx = ctx_of(SKDV)
    E0 = parse_operator("(1/u_x^2)*Dx^3 - 3*(u_xx/u_x^3)*Dx^2 + (3*u_xx^2/u_x^4 - u_xxx/u_x^3)*Dx",
                        space=Space.EQN)
    w = omega_from_operator(E0, ctx).omega
    assert d_vertical(w).is_zero_form() is False
    wc, nu = dv_closed_representative(w, ctx)
    assert d_vertical(wc).is_zero_form() is True
    assert (w - wc - d_horizontal(nu, ctx)).is_zero_form() is True


def test_lambda_invariant_certificates():
    ctx = ctx_of(SKDV)
    w = omega_from_operator(parse_operator("(1/u_x) @ Dx @ (1/u_x)", space=Space.EQN), ctx).omega
    res = lambda_invariant(w, ctx)
    assert res.ok is True
    assert res.lam.grade == (2, 0)


def kappa(A, B):
    return Form.make(Space.EQN, {(("x",), ()): A, (("t",), ()): B}, (1, 0))


def test_conservation_nontrivial():
    ctx = ctx_of("u_xxx + u*u_x")
    r = conservation_characteristic(kappa(u ** 2 / 2, u * uxx - ux ** 2 / 2 + u ** 3 / 3), ctx)
    assert r.closed is True and r.trivial is False
    assert is_zero(r.Q - u)


def test_conservation_trivial_with_log():
    ctx = ctx_of("u_xxx + (1/2)*u_x^2 - u/(2*t)")
    r = conservation_characteristic(kappa(0, 1 / T), ctx)
    assert r.verdict == "trivial"
    assert r.witness.R == T


def test_conservation_not_closed():
    ctx = ctx_of("u_xxx + u*u_x")
    r = conservation_characteristic(kappa(0, -2 * ux), ctx)
    assert r.closed is False and r.verdict == "not a conservation law"


def test_conservation_rejects_grade():
    with pytest.raises(ValueError):
        conservation_characteristic(parse_form("dx^th0"), ctx_of("u_xxx"))


def test_helmholtz_finds_lagrangian():
    r = helmholtz_and_lagrangian(U(0, 4) + ux ** 2 + 2 * u * uxx)
    assert r.is_euler_image is True
    assert is_zero(euler_lagrange(r.A) - (U(0, 4) + ux ** 2 + 2 * u * uxx))


def test_helmholtz_rejects():
    r = helmholtz_and_lagrangian(ux)
    assert r.is_euler_image is False and r.A is None


def test_reduce_lagrangian_lowers_order():
    A = reduce_lagrangian(u * U(0, 4) / 2)
    assert is_zero(euler_lagrange(A) - euler_lagrange(u * U(0, 4) / 2))
    assert is_zero(A - uxx ** 2 / 2)
