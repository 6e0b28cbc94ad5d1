"""Canonical representatives, the snake map and conservation laws."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Mapping, Optional

import sympy as sp

from .expr import U, free_jets, is_zero, jet_order, normalize
from .forms import (Form, IntegrationError, Primitive, antiderivative, d_horizontal, d_vertical, delta_primitive,
                    dt, dx, euler_lagrange, horizontal_homotopy, horizontal_integrate,
                    lift_semibasic, theta, vertical_homotopy, wedge, _interior,
                    _contact_indices)
from .jet import (DiffOperator, EqContext, Space, SpaceError, frechet, linearization,
                  total_derivative)
from .report import Certificate, combine

__all__ = [
    "CanonicalClass", "rho_adjoint", "beta_form", "omega_of", "omega_from_operator",
    "canonical_representative", "dv_closed_representative", "LambdaResult",
    "lambda_invariant", "lambda_difference", "ConservationResult",
    "conservation_characteristic", "HelmholtzResult", "helmholtz_and_lagrangian",
    "contact_form", "contact_coeffs", "reduce_lagrangian",
]


def contact_form(coeffs, space: Space = Space.EQN) -> Form:
    """sum_i coeffs[i] theta^i."""
    return Form.make(space, {((), (i,)): c for i, c in enumerate(coeffs)}, (0, 1))


def contact_coeffs(rho: Form) -> list:
    if rho.grade != (0, 1):
        raise ValueError("expected a contact 1-form")
    d = {c[0]: v for (_, c), v in rho.terms}
    m = max(d, default=-1)
    return [d.get(i, sp.Integer(0)) for i in range(m + 1)]


def _as_form(rho, space=Space.EQN) -> Form:
    return rho if isinstance(rho, Form) else Form.function(rho, space)


def rho_adjoint(rho: Form) -> Form:
    """rho* = sum (-X)^i (r_i theta^0) for rho = sum r_i theta^i."""
    out = Form.zero(rho.space, (0, 1))
    for i, r in enumerate(contact_coeffs(rho)):
        term = Form.make(rho.space, {((), (0,)): r}, (0, 1))
        for _ in range(i):
            term = -term.total("x")
        out = out + term
    return out


def beta_form(rho, ctx: EqContext) -> Form:
    """sum_{i=1}^n sum_{a=1}^i (-X)^{a-1}(K_i rho) ^ theta^{i-a}."""
    rho = _as_form(rho)
    out = Form.zero(Space.EQN, (0, rho.s + 1))
    for i in range(1, ctx.n + 1):
        g = rho.scale(ctx.K_i(i))
        for a in range(1, i + 1):
            out = out + wedge(g, theta(i - a))
            g = -g.total("x")
    return out


def omega_of(eps, ctx: EqContext) -> Form:
    """dx ^ theta^0 ^ eps - dt ^ beta(eps)."""
    eps = _as_form(eps)
    return wedge(wedge(dx(), theta(0)), eps) - wedge(dt(), beta_form(eps, ctx))


def theta0_lstar(eps, ctx: EqContext) -> Form:
    """theta^0 ^ L*(eps), the closure condition of the canonical form."""
    _, lstar = linearization(ctx)
    return wedge(theta(0), lstar(_as_form(eps)))


@dataclass
class CanonicalClass:
    ctx: EqContext
    epsilon: Form
    omega: Form
    certificates: list = field(default_factory=list)

    def cert(self, name) -> Optional[Certificate]:
        for c in self.certificates:
            if c.name == name:
                return c
        return None

    @property
    def is_closed(self) -> Optional[bool]:
        c = self.cert("closed")
        return None if c is None else c.ok

    @property
    def is_skew(self) -> Optional[bool]:
        c = self.cert("skew")
        return None if c is None else c.ok

    @property
    def ok(self) -> Optional[bool]:
        return combine(c.ok for c in self.certificates)


def _certify_class(eps: Form, ctx: EqContext, omega: Optional[Form] = None) -> CanonicalClass:
    omega = omega_of(eps, ctx) if omega is None else omega
    certs = [
        Certificate.of("skew", eps + rho_adjoint(eps)),
        Certificate.of("closed", d_horizontal(omega, ctx)),
        Certificate.of("theta0_lstar", theta0_lstar(eps, ctx)),
    ]
    return CanonicalClass(ctx, eps, omega, certs)


def omega_from_operator(E: DiffOperator, ctx: EqContext, require_skew: bool = True) -> CanonicalClass:
    """Canonical (1,2) form of an x-only operator: eps = -1/2 sum r_i theta^i."""
    if ctx.n % 2 == 0:
        warnings.warn("even-order equation: the canonical construction is order-agnostic "
                      "but no nonzero closed representative is expected", stacklevel=2)
    skew = E.is_skew()
    if require_skew and skew is False:
        raise ValueError("operator is not skew-adjoint")
    eps = contact_form([-c / 2 for c in E.x_coeffs()])
    return _certify_class(eps, ctx)


def _jvert(alpha: Form) -> Form:
    """Vertical interior Euler operator sum (-X)^i (d/du_i interior alpha)."""
    out = Form.zero(alpha.space, (0, alpha.s - 1))
    for i in sorted(_contact_indices(alpha)):
        g = _interior(alpha, i)
        for _ in range(i):
            g = -g.total("x")
        out = out + g
    return out


def _dx_part(omega: Form) -> Form:
    """alpha with omega = dx ^ alpha + dt ^ (...)."""
    return Form.make(omega.space, {((), c): v for (h, c), v in omega.terms if h == ("x",)},
                     (0, omega.s))


def canonical_representative(omega: Form, ctx: EqContext) -> tuple:
    """Unique skew representative of the class of a closed (1,2) form.

    Returns ``(CanonicalClass, xi)`` where ``omega - d_H(xi)`` is the
    canonical form; the certificate ``same_class`` checks that equality.
    """
    if omega.space is not Space.EQN or omega.grade != (1, 2):
        raise ValueError("expected a (1,2) form on the equation manifold")
    closed = Certificate.of("input_closed", d_horizontal(omega, ctx))
    if closed.ok is False:
        raise ValueError("input form is not d_H-closed")
    alpha = _dx_part(omega)
    eps = _jvert(alpha).scale(sp.Rational(1, 2))
    dxa = Form.make(Space.SB, {(("x",), c): v for (_, c), v in alpha.terms}, (1, 2))
    xi = lift_semibasic(horizontal_homotopy(dxa))
    cls = _certify_class(eps, ctx)
    cls.certificates.insert(0, closed)
    cls.certificates.append(
        Certificate.of("same_class", omega - d_horizontal(xi, ctx) - cls.omega))
    return cls, xi


def dv_closed_representative(omega: Form, ctx: EqContext, base=None) -> tuple:
    """omega' = omega - d_H(nu) in the same class with d_V omega' = 0.

    Returns ``(omega', nu)``; nu is zero when omega is already d_V-closed.
    """
    g = d_vertical(omega)
    if g.is_zero_form():
        return omega, Form.zero(Space.EQN, (0, omega.s))
    gx = Form.make(Space.SB, {(("x",), c): v for (h, c), v in g.terms if h == ("x",)},
                   (1, g.s))
    mu = lift_semibasic(horizontal_homotopy(gx))
    if not (g - d_horizontal(mu, ctx)).is_zero_form():
        raise ValueError("d_V(omega) is not d_H-exact through the one-variable homotopy")
    nu = vertical_homotopy(mu, base).scale(-1)
    return omega - d_horizontal(nu, ctx), nu


@dataclass
class LambdaResult:
    omega: Form
    eta: Form
    lam: Form
    nu: Form
    certificates: list = field(default_factory=list)

    @property
    def ok(self):
        return combine(c.ok for c in self.certificates)


def lambda_invariant(omega: Form, ctx: EqContext, base: Optional[Mapping] = None) -> LambdaResult:
    """eta with d_V eta = omega and lambda (2,0) with d_V lambda = d_H eta."""
    omega_c, nu = dv_closed_representative(omega, ctx, base)
    eta = vertical_homotopy(omega_c, base)
    lam = vertical_homotopy(d_horizontal(eta, ctx), base)
    certs = [
        Certificate.of("dV_omega", d_vertical(omega_c)),
        Certificate.of("dV_eta", d_vertical(eta) - omega_c),
        Certificate.of("dV_lambda", d_vertical(lam) - d_horizontal(eta, ctx)),
    ]
    return LambdaResult(omega_c, eta, lam, nu, certs)


def lambda_difference(res: LambdaResult, eta_ref: Form, lam_ref: Form, ctx: EqContext,
                      base=None) -> tuple:
    """Compare lambda with a reference pair (eta_ref, lam_ref) for the same omega.

    Returns ``(delta, mu, cert)`` where eta - eta_ref = d_V(mu) and
    delta = lambda - lam_ref + d_H(mu) is d_V-closed.
    """
    deta = res.eta - eta_ref
    mu = vertical_homotopy(deta, base) if deta.terms else Form.zero(Space.EQN, (1, 0))
    delta = res.lam - lam_ref + d_horizontal(mu, ctx)
    cert = Certificate.of("lambda_difference_dV_closed", d_vertical(delta))
    return delta, mu, cert


@dataclass
class ConservationResult:
    closed: Optional[bool]
    Q: Optional[sp.Expr]
    trivial: Optional[bool]
    witness: Optional[Primitive]
    verdict: str
    certificates: list = field(default_factory=list)


def conservation_characteristic(kappa: Form, ctx: EqContext) -> ConservationResult:
    """Characteristic Q = E(A) of a (1,0) form kappa = A dx + B dt."""
    if kappa.grade != (1, 0):
        raise ValueError("expected a (1,0) form")
    A = kappa.coeff(("x",))
    B = kappa.coeff(("t",))
    c = Certificate.of("closed", d_horizontal(kappa, ctx))
    if c.ok is not True:
        verdict = "not a conservation law" if c.ok is False else "inconclusive"
        return ConservationResult(c.ok, None, None, None, verdict, [c])
    Q = normalize(euler_lagrange(A, Space.SB))
    qz = is_zero(Q)
    if qz is False:
        return ConservationResult(True, Q, False, None, "nontrivial", [c])
    try:
        w = horizontal_integrate(A, B, ctx)
    except IntegrationError as exc:
        return ConservationResult(True, Q, None, None, f"inconclusive: {exc}", [c])
    return ConservationResult(True, Q, True, w, "trivial", [c])


def reduce_lagrangian(A, max_steps: int = 32):
    """Lower the order of A modulo total x-derivatives.

    While A is polynomial in its top derivative u_n with a nonzero linear
    coefficient a, subtract X(F) with F = int a du_{n-1}; the
    Euler-Lagrange expression is unchanged.
    """
    A = normalize(A)
    for _ in range(max_steps):
        n = jet_order(A)
        if n < 1:
            break
        un = U(0, n)
        try:
            a = sp.Poly(sp.expand(A), un).coeff_monomial(un)
        except sp.PolynomialError:
            break
        if a == 0:
            break
        try:
            F = antiderivative(a, U(0, n - 1))
        except IntegrationError:
            break
        A = normalize(A - total_derivative(F, "x", None, Space.SB))
    return A


@dataclass
class HelmholtzResult:
    is_euler_image: Optional[bool]
    A: Optional[sp.Expr]
    certificates: list = field(default_factory=list)
    note: str = ""


def helmholtz_and_lagrangian(Q, space: Space = Space.SB, base: Optional[Mapping] = None) -> HelmholtzResult:
    """Is Q an Euler-Lagrange expression?  If so, find a Lagrangian A."""
    Q = sp.sympify(Q)
    F = frechet(Q, space)
    sa = Certificate.of("frechet_self_adjoint", F - F.adjoint())
    if sa.ok is not True:
        return HelmholtzResult(sa.ok, None, [sa])
    if space is not Space.SB:
        return HelmholtzResult(True, None, [sa], "Lagrangian reconstruction is done on SB")
    A = None
    note = ""
    lam = sp.Dummy("lam", positive=True)
    base = dict(base or {})
    if not base:
        try:
            from .forms import _lambda_integral
            scaled = Q.xreplace({s: lam * s for s in free_jets(Q)})
            A = _lambda_integral(U(0, 0) * scaled, lam)
        except IntegrationError:
            A = None
    if A is None or is_zero(euler_lagrange(A) - Q) is not True:
        try:
            # delta_V(L dx) = -dx ^ theta^0 E(L)
            src = Form.make(Space.SB, {(("x",), (0,)): -Q}, (1, 1))
            L = delta_primitive(src, base or None)
            A = normalize(L.coeff(("x",)))
            note = "Lagrangian from the functional-form primitive"
        except (IntegrationError, ValueError) as exc:
            return HelmholtzResult(True, None, [sa], f"homotopy failed: {exc}")
    A = reduce_lagrangian(A)
    rt = Certificate.of("euler_of_lagrangian", euler_lagrange(A) - Q)
    return HelmholtzResult(True, A, [sa, rt], note)
