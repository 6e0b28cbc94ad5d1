"""Variational and symplectic operators: witnesses, potentials, the first-order test."""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations_with_replacement
from typing import Mapping, Optional

import sympy as sp

from .cohomology import (CanonicalClass, ConservationResult, conservation_characteristic,
                         helmholtz_and_lagrangian, omega_from_operator)
from .expr import T, U, X, free_jets, is_t_jet, normalize
from .forms import (Form, IntegrationError, d_horizontal, delta_primitive, delta_vertical,
                    dx, euler_lagrange, theta, wedge)
from .jet import (DiffOperator, EqContext, Space, SpaceError, frechet, linearization,
                  total_derivative)
from .report import Certificate, combine

__all__ = [
    "VariationalWitness", "verify_variational", "variational_residual", "construct_Q",
    "SymplecticResult", "is_symplectic", "potential_of", "HamiltonianResult", "hamiltonian_of",
    "FotResult", "fot_test", "kappa_form", "ansatz_conditions", "first_order_ansatz",
    "variational_route", "symplectic_route",
]


def _x_op(E: DiffOperator, space: Space, ctx=None) -> DiffOperator:
    return E if E.space is space and space is not Space.EQN else E.on(space, ctx)


# --------------------------------------------------------------------------
# variational witnesses


@dataclass
class VariationalWitness:
    E: DiffOperator
    Q: sp.Expr
    L: sp.Expr
    residual: sp.Expr
    certificates: list = field(default_factory=list)

    @property
    def ok(self) -> Optional[bool]:
        return combine(c.ok for c in self.certificates)


def skew_part(Q, space: Space = Space.FREE) -> DiffOperator:
    """F_Q* - F_Q."""
    F = frechet(Q, space)
    return F.adjoint() - F


def verify_variational(E: DiffOperator, ctx: EqContext, Q, L) -> VariationalWitness:
    """Certify E = F_Q* - F_Q and E(Delta) = E(Q Delta + L) on the free jet space."""
    Q, L = sp.sympify(Q), sp.sympify(L)
    Ef = _x_op(E, Space.FREE)
    delta = ctx.delta
    c1 = Certificate.of("operator_identity", Ef - skew_part(Q))
    residual = normalize(Ef(delta) - euler_lagrange(Q * delta + L, Space.FREE))
    c2 = Certificate.of("euler_identity", residual)
    return VariationalWitness(E, Q, L, residual, [c1, c2])


def variational_residual(E: DiffOperator, ctx: EqContext, lagrangian) -> Certificate:
    """E(u_t - K) - E(lagrangian) on the free jet space, for a full Lagrangian."""
    Ef = _x_op(E, Space.FREE)
    return Certificate.of("euler_identity",
                          normalize(Ef(ctx.delta) - euler_lagrange(lagrangian, Space.FREE)))


# --------------------------------------------------------------------------
# symplectic potentials


def _sigma(S: DiffOperator) -> Form:
    """dx ^ theta^0 ^ S(theta^0) on SB."""
    th0 = theta(0, Space.SB)
    return wedge(wedge(dx(Space.SB), th0), _x_op(S, Space.SB)(th0))


def potential_of(S: DiffOperator, base: Optional[Mapping] = None):
    """P with 1/2 (L_P - L_P*) = S through the Euler-complex primitive.

    Returns ``(P, certificate)``; raises IntegrationError when the
    homotopy leaves the supported fragment.
    """
    S = _x_op(S, Space.SB)
    psi = delta_primitive(_sigma(S), base)
    P = normalize(psi.coeff(("x",), (0,)))
    F = frechet(P, Space.SB)
    cert = Certificate.of("potential", (F - F.adjoint()) * sp.Rational(1, 2) - S)
    return P, cert


def _monomials(order: int, degree: int, gens):
    jets = [U(0, i) for i in range(order + 1)]
    out = []
    for d in range(degree + 1):
        for combo in combinations_with_replacement(jets, d):
            m = sp.Mul(*combo)
            out.extend(g * m for g in gens)
    return out


def _ansatz_Q(E: DiffOperator, order_bound: int, degree: int, gens) -> Optional[sp.Expr]:
    basis = _monomials(order_bound, degree, gens)
    cs = sp.symbols(f"a0:{len(basis)}")
    Q = sum(c * m for c, m in zip(cs, basis))
    diff = skew_part(Q, Space.SB) - _x_op(E, Space.SB)
    polyvars = [X] + [U(0, i) for i in range(2 * order_bound + 2)]
    eqs = []
    for _, c in diff.terms:
        num = sp.numer(sp.together(c))
        extra = [s for s in free_jets(num) | {X} if s not in polyvars]
        try:
            eqs.extend(sp.Poly(sp.expand(num), *(polyvars + extra)).coeffs())
        except sp.PolynomialError:
            return None
    if not eqs:
        return sp.Integer(0)
    sol = sp.linsolve(eqs, cs)
    if not sol:
        return None
    vals = next(iter(sol))
    free = set().union(*(v.free_symbols for v in vals)) & set(cs)
    vals = [v.subs({f: 0 for f in free}) for v in vals]
    return normalize(sum(v * m for v, m in zip(vals, basis)))


def construct_Q(E: DiffOperator, order_bound: Optional[int] = None, base=None,
                degree: int = 3, gens=(1, X)):
    """Q with F_Q* - F_Q = E.

    The symplectic potential of -E/2 is tried first; a polynomial
    undetermined-coefficient ansatz (jets up to ``order_bound``, total degree
    up to ``degree``, times ``gens``) is the fallback.  Returns
    ``(Q, certificate)``.
    """
    E = _x_op(E, Space.SB)
    skew = E.is_skew()
    if skew is False:
        raise ValueError("operator is not skew-adjoint")
    if E.is_zero():
        return sp.Integer(0), Certificate.of("Q_reproduces_E", E)
    Q = None
    try:
        Q, cert = potential_of(E * sp.Rational(-1, 2), base)
        if cert.ok is not True:
            Q = None
    except (IntegrationError, ValueError, SpaceError):
        Q = None
    if Q is None:
        bound = E.order() if order_bound is None else order_bound
        Q = _ansatz_Q(E, bound, degree, gens)
        if Q is None:
            raise IntegrationError("no Q within the ansatz bound: increase order_bound or supply Q")
    return Q, Certificate.of("Q_reproduces_E", skew_part(Q, Space.SB) - E)


@dataclass
class SymplecticResult:
    verdict: Optional[bool]
    reason: str
    P: Optional[sp.Expr] = None
    certificates: list = field(default_factory=list)

    def __bool__(self):
        return self.verdict is True


def is_symplectic(S: DiffOperator, base: Optional[Mapping] = None,
                  want_potential: bool = True) -> SymplecticResult:
    """Skew and delta_V-closed; optionally also a potential P."""
    S = _x_op(S, Space.SB)
    skew = Certificate.of("skew", S + S.adjoint())
    if skew.ok is not True:
        reason = "not skew-adjoint" if skew.ok is False else "skewness inconclusive"
        return SymplecticResult(skew.ok, reason, None, [skew])
    closed = Certificate.of("delta_V_closed", delta_vertical(_sigma(S)))
    certs = [skew, closed]
    if closed.ok is not True:
        reason = "not closed" if closed.ok is False else "closure inconclusive"
        return SymplecticResult(closed.ok, reason, None, certs)
    P = None
    reason = "symplectic"
    if want_potential:
        try:
            P, pc = potential_of(S, base)
            certs.append(pc)
        except (IntegrationError, ValueError) as exc:
            reason = f"symplectic; potential not found ({exc})"
    return SymplecticResult(True, reason, P, certs)


@dataclass
class HamiltonianResult:
    verdict: Optional[bool]
    H: Optional[sp.Expr]
    G: sp.Expr
    certificates: list = field(default_factory=list)
    note: str = ""


def hamiltonian_of(S: DiffOperator, ctx: EqContext, P, base=None) -> HamiltonianResult:
    """H with 1/2 P_t + S(K) = E(H), after re-verifying the potential P."""
    S = _x_op(S, Space.SB)
    P = sp.sympify(P)
    F = frechet(P, Space.SB)
    pc = Certificate.of("potential", (F - F.adjoint()) * sp.Rational(1, 2) - S)
    G = normalize(sp.diff(P, T) / 2 + S(ctx.K))
    if pc.ok is not True:
        return HamiltonianResult(pc.ok, None, G, [pc], "P is not a potential for S")
    hl = helmholtz_and_lagrangian(G, Space.SB, base)
    certs = [pc] + hl.certificates
    if hl.is_euler_image is not True:
        return HamiltonianResult(hl.is_euler_image, None, G, certs, "not Hamiltonian for S")
    return HamiltonianResult(combine(c.ok for c in certs), hl.A, G, certs, hl.note)


# --------------------------------------------------------------------------
# the first-order test


@dataclass
class FotResult:
    khat2: sp.Expr
    kappa: Form
    verdict: str
    R: Optional[sp.Expr] = None
    E: Optional[DiffOperator] = None
    conservation: Optional[ConservationResult] = None
    canonical: Optional[CanonicalClass] = None
    certificates: list = field(default_factory=list)

    @property
    def ok(self):
        return combine(c.ok for c in self.certificates)


def kappa_form(ctx: EqContext):
    """(K2hat, kappa) of the first-order test for a third order equation."""
    if ctx.n != 3:
        raise ValueError("the first-order test needs a third order equation")
    K0, K1, K2, K3 = (ctx.K_i(i) for i in range(4))
    Xf = ctx.X
    k2 = normalize(sp.Rational(2, 3) / K3 * (K2 - Xf(K3)))
    b = -2 * K0 + K1 * k2 - sp.Rational(1, 2) * (Xf(K3) * k2 ** 2 + K3 * k2 ** 3) + Xf(K3 * Xf(k2))
    kappa = Form.make(Space.EQN, {(("x",), ()): k2, (("t",), ()): normalize(b)}, (1, 0))
    return k2, kappa


def fot_test(ctx: EqContext) -> FotResult:
    """Does u_t = K (third order) admit a first-order operator 2R D_x + X(R)?"""
    k2, kappa = kappa_form(ctx)
    cons = conservation_characteristic(kappa, ctx)
    if cons.closed is False:
        return FotResult(k2, kappa, "no_operator_not_closed", conservation=cons,
                         certificates=list(cons.certificates))
    if cons.closed is None or cons.trivial is None:
        return FotResult(k2, kappa, "inconclusive", conservation=cons,
                         certificates=list(cons.certificates))
    if cons.trivial is False:
        return FotResult(k2, kappa, "no_operator_nontrivial", conservation=cons,
                         certificates=list(cons.certificates))
    w = cons.witness
    R = w.R if w.R is not None else sp.exp(w.f)
    R = normalize(R)
    E = DiffOperator.make(Space.EQN, {(0, 1): 2 * R, (0, 0): ctx.X(R)})
    certs = list(cons.certificates)
    # R solves X(R) = K2hat R and T(R) = kappa_t R
    certs.append(Certificate.of("XR", ctx.X(R) - k2 * R))
    certs.append(Certificate.of("TR", ctx.T(R) - kappa.coeff(("t",)) * R))
    cls = omega_from_operator(E, ctx)
    certs.append(Certificate.flag("omega_closed", cls.is_closed))
    certs.append(Certificate.flag("omega_theta0_lstar", cls.cert("theta0_lstar").ok))
    return FotResult(k2, kappa, "operator_found", R, E, cons, cls, certs)


# --------------------------------------------------------------------------
# ansatz conditions


def ansatz_conditions(ctx: EqContext, eps: Form) -> list:
    """Coefficients of theta^0 ^ L*(eps), keyed by the index pair (i, 0)."""
    _, lstar = linearization(ctx)
    w = wedge(theta(0), lstar(eps))
    out = []
    for (_, c), v in sorted(w.terms, key=lambda kv: kv[0][1], reverse=True):
        out.append((c, normalize(v)))
    return out


def first_order_ansatz(R, ctx: Optional[EqContext] = None) -> Form:
    """The skew first-order contact form -R theta^1 - 1/2 X(R) theta^0."""
    R = sp.sympify(R)
    xr = ctx.X(R) if ctx is not None else total_derivative(R, "x", None, Space.SB)
    return Form.make(Space.EQN, {((), (1,)): -R, ((), (0,)): -xr / 2}, (0, 1))


# --------------------------------------------------------------------------
# the two routes of the equivalence for time-independent equations


def variational_route(E: DiffOperator, ctx: EqContext, base=None,
                      order_bound: Optional[int] = None):
    """Q from E, then L from the Helmholtz inverse of E(Delta) - E(Q Delta).

    Returns ``(verdict, witness or None, note)``.
    """
    try:
        Q, qc = construct_Q(E, order_bound, base=base)
    except (IntegrationError, ValueError) as exc:
        return None, None, f"no Q: {exc}"
    if qc.ok is not True:
        return qc.ok, None, "Q does not reproduce E"
    Ef = _x_op(E, Space.FREE)
    rest = normalize(Ef(ctx.delta) - euler_lagrange(Q * ctx.delta, Space.FREE))
    if any(is_t_jet(s) for s in free_jets(rest)):
        return False, None, "remainder depends on t-derivatives"
    hl = helmholtz_and_lagrangian(rest, Space.SB, base)
    if hl.is_euler_image is not True:
        return hl.is_euler_image, None, "remainder is not an Euler-Lagrange expression"
    wit = verify_variational(E, ctx, Q, hl.A)
    return wit.ok, wit, ""


def symplectic_route(S: DiffOperator, ctx: EqContext, base=None):
    """is_symplectic then hamiltonian_of.  Returns ``(verdict, H or None, note)``."""
    sym = is_symplectic(S, base)
    if sym.verdict is not True:
        return sym.verdict, None, sym.reason
    if sym.P is None:
        return None, None, sym.reason
    ham = hamiltonian_of(S, ctx, sym.P, base)
    return ham.verdict, ham.H, ham.note
