import pytest
import sympy as sp

from jetvar.expr import T, U, X, is_zero, parse_expr
from jetvar.jet import (DiffOperator, Dt, Dx, EqContext, Space, SpaceError, frechet, identity,
                        linearization, parse_operator, total_derivative)

u, ux, uxx, uxxx = U(0, 0), U(0, 1), U(0, 2), U(0, 3)


def kdv():
    return EqContext(parse_expr("u_xxx + u*u_x"))


def test_total_x_derivative():
    assert total_derivative(u * ux, "x", None, Space.SB) == ux ** 2 + u * uxx
    assert total_derivative(X * u, "x", None, Space.SB) == u + X * ux


def test_free_t_derivative():
    assert total_derivative(u * T, "t", None, Space.FREE) == u + T * U(1, 0)


def test_T_on_equation():
    ctx = kdv()
    assert is_zero(ctx.T(u) - (uxxx + u * ux))
    assert is_zero(ctx.T(ux) - ctx.X(ctx.K))


def test_sb_has_no_T():
    with pytest.raises(SpaceError):
        total_derivative(u, "t", None, Space.SB)


def test_eqn_T_needs_context():
    with pytest.raises(SpaceError):
        total_derivative(u, "t", None, Space.EQN)


def test_eqn_rejects_t_jets():
    with pytest.raises(SpaceError):
        EqContext(U(1, 0) + uxx)


def test_restrict():
    ctx = kdv()
    assert is_zero(ctx.restrict(U(1, 1)) - ctx.X(ctx.K))


def test_compose_right_normal_form():
    A = DiffOperator.mult(u, Space.SB)
    op = Dx() @ A
    assert op.coeff(1) == u and op.coeff(0) == ux


def test_apply():
    op = parse_operator("(1/u_x) @ Dx @ (1/u_x)")
    assert is_zero(op(ux) - 0)
    assert is_zero(op(u) - (-uxx * u / ux ** 3 + 1 / ux))


def test_adjoint_examples():
    assert Dx().adjoint().equals(-Dx())
    op = parse_operator("u*Dx")
    assert op.adjoint().equals(parse_operator("-u*Dx - u_x"))
    assert parse_operator("2*u_xxx*Dx + u_xxxx").is_skew() is True
    assert parse_operator("u*Dx").is_skew() is False


def test_power_and_identity():
    assert (Dx() ** 0).equals(identity(Space.SB))
    assert (Dx() ** 3).coeff(3) == 1


def test_frechet():
    F = frechet(u * ux, Space.SB)
    assert F.equals(parse_operator("u*Dx + u_x"))


def test_linearization_adjoint():
    ctx = kdv()
    L, Ls = linearization(ctx)
    assert L.coeff(1, 0) == 1
    assert Ls.equals(L.adjoint())


def test_free_operator_with_dt():
    op = Dt(Space.FREE) @ DiffOperator.mult(T, Space.FREE)
    assert op.coeff(0, 0) == 1 and op.coeff(1, 0) == T


def test_lift_and_shift():
    op = parse_operator("v*Dx + v_x", dep="v")
    assert op.shift(1).equals(parse_operator("u_x*Dx + u_xx"))
    assert op.lift().space is Space.FREE


def test_parse_operator_errors():
    from jetvar.expr import ParseError
    with pytest.raises(ParseError):
        parse_operator("Dx^")
    with pytest.raises((ParseError, SpaceError)):
        parse_operator("Dt")


def test_operator_format_round_trip():
    op = parse_operator("t^2*Dx^3 + (1/3)*(2*t^2*u_x + t*x)*Dx + (1/6)*(2*t^2*u_xx + t)")
    again = parse_operator(op.format())
    assert op.equals(again)
