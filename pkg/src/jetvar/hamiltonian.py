"""Potential forms, bi-Hamiltonian compatibility and the Dorfman family.

Hamiltonian data lives in the jets of a second dependent variable v.  It is
stored with the same jet symbols as u (parse with ``dep="v"``); the
potential substitution v_j -> u_{j+d} is ``shift_jets``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import sympy as sp

from .cohomology import helmholtz_and_lagrangian
from .expr import T, U, is_zero, normalize, shift_jets
from .forms import IntegrationError, antiderivative, euler_lagrange, horizontal_integrate
from .jet import DiffOperator, EqContext, Space, Dx
from .operators import VariationalWitness, construct_Q, is_symplectic, verify_variational
from .report import Certificate, combine

__all__ = [
    "HamiltonianPair", "Potential", "potentialize", "euler_change_of_variables",
    "Compatibility", "compatibility_H2", "dorfman_operator", "pulled_back",
    "BihtResult", "biht_pipeline", "hsckdv_experiment",
]


@dataclass
class HamiltonianPair:
    """v_t = D(E(H)); K is always recomputed."""
    D: DiffOperator
    H: sp.Expr

    @property
    def K(self):
        return normalize(self.D(euler_lagrange(self.H, Space.SB)))


@dataclass
class Potential:
    ctx: EqContext
    depth: int
    witness: Optional[VariationalWitness]
    certificates: list = field(default_factory=list)
    note: str = ""

    @property
    def ok(self):
        return combine(c.ok for c in self.certificates)


def euler_change_of_variables(H, depth: int = 1) -> Certificate:
    """E_u(H|v=u_d) = (-D_x)^d (E_v(H)|v=u_d)."""
    if depth < 1:
        raise ValueError("depth must be at least 1")
    lhs = euler_lagrange(shift_jets(H, depth), Space.SB)
    rhs = shift_jets(euler_lagrange(H, Space.SB), depth)
    for _ in range(depth):
        rhs = -Dx()(rhs)
    return Certificate.of(f"change_of_variables_depth_{depth}", lhs - rhs)


def potentialize(H1, depth: int = 1) -> Potential:
    """u_t = E(H1)|v=u_d together with the D_x^d witness (odd d).

    The witness is D_x^d(u_t - K) = E(-1/2 u_d u_t + H1|v=u_d), checked as
    Q = -u_d/2, L = H1|v=u_d + Q K.
    """
    H1 = sp.sympify(H1)
    K = normalize(shift_jets(euler_lagrange(H1, Space.SB), depth))
    ctx = EqContext(K)
    certs = [euler_change_of_variables(H1, depth)]
    # the differentiated equation u_{t x..x} = (D_x^d E(H1))|v=u_d
    dK = K
    rhs = euler_lagrange(H1, Space.SB)
    for _ in range(depth):
        dK = Dx()(dK)
        rhs = Dx()(rhs)
    certs.append(Certificate.of("differentiated_equation", dK - shift_jets(rhs, depth)))
    if depth % 2 == 0:
        return Potential(ctx, depth, None, certs, "even depth: D_x^d is not skew, no witness")
    Q = -U(0, depth) / 2
    L = normalize(shift_jets(H1, depth) + Q * K)
    wit = verify_variational(Dx() ** depth, ctx, Q, L)
    certs.extend(wit.certificates)
    return Potential(ctx, depth, wit, certs)


@dataclass
class Compatibility:
    G: sp.Expr
    F: Optional[sp.Expr]
    H2: Optional[sp.Expr]
    verdict: str
    certificates: list = field(default_factory=list)

    @property
    def ok(self):
        return combine(c.ok for c in self.certificates) if self.H2 is not None else False


def compatibility_H2(D0: DiffOperator, H1, base=None) -> Compatibility:
    """H2 with D0(E(H1)) = D_x E(H2)."""
    D0 = D0 if D0.space is Space.SB else D0.on(Space.SB)
    G = normalize(D0(euler_lagrange(H1, Space.SB)))
    try:
        F = horizontal_integrate(G).f
    except IntegrationError as exc:
        return Compatibility(G, None, None, f"not compatible: D0(E(H1)) is not a total derivative ({exc})")
    F = normalize(F)
    if is_zero(F):
        H2 = sp.Integer(0)
        certs = []
    else:
        hl = helmholtz_and_lagrangian(F, Space.SB, base)
        certs = list(hl.certificates)
        if hl.is_euler_image is not True or hl.A is None:
            return Compatibility(G, F, None, "not compatible: F is not an Euler-Lagrange expression",
                                 certs)
        H2 = hl.A
    certs.append(Certificate.of("compatibility", G - Dx()(euler_lagrange(H2, Space.SB))))
    return Compatibility(G, F, H2, "compatible", certs)


def _int0(f, y):
    """int_0^y f."""
    F = antiderivative(f, y)
    return normalize(F - F.subs(y, 0))


def dorfman_operator(h, c1, c2) -> DiffOperator:
    """h (g D_x o g + D_x^3) o h with g = sqrt(c1 + c2 int_0^v 1/h)."""
    h = sp.sympify(h)
    v = U(0, 0)
    g = sp.sqrt(c1 + c2 * _int0(1 / h, v))
    mh = DiffOperator.mult(h, Space.SB)
    mg = DiffOperator.mult(g, Space.SB)
    inner = mg @ Dx() @ mg + Dx() ** 3
    return (mh @ inner @ mh).normalized()


def pulled_back(k1, k2, c1) -> DiffOperator:
    """The Dorfman operator for h = 1/(k1 v + k2), c2 = 1, at v = u_x."""
    v = U(0, 0)
    return dorfman_operator(1 / (k1 * v + k2), c1, 1).shift(1).normalized()


@dataclass
class BihtResult:
    compat: Compatibility
    potential: Optional[Potential]
    E: Optional[DiffOperator]
    witness: Optional[VariationalWitness]
    certificates: list = field(default_factory=list)
    note: str = ""

    @property
    def ok(self):
        if self.witness is None:
            return False
        return combine(c.ok for c in self.certificates)


def biht_pipeline(D0: DiffOperator, H1, base=None) -> BihtResult:
    """E(u_t - K) = E(Q u_t + H2|v=u_x) for E = D0|v=u_x on u_t = E(H1)|v=u_x."""
    comp = compatibility_H2(D0, H1, base)
    certs = list(comp.certificates)
    if comp.H2 is None:
        return BihtResult(comp, None, None, None, certs, comp.verdict)
    pot = potentialize(H1, 1)
    ctx = pot.ctx
    E = (D0 if D0.space is Space.SB else D0.on(Space.SB)).shift(1)
    sym = is_symplectic(E, base, want_potential=False)
    certs.extend(sym.certificates)
    if sym.verdict is not True:
        return BihtResult(comp, pot, E, None, certs, f"pulled-back operator: {sym.reason}")
    # E(K) = -E(H2|v=u_x)
    certs.append(Certificate.of("EK", E(ctx.K) + euler_lagrange(shift_jets(comp.H2, 1), Space.SB)))
    Q, qc = construct_Q(E, base=base)
    certs.append(qc)
    L = normalize(shift_jets(comp.H2, 1) + Q * ctx.K)
    wit = verify_variational(E, ctx, Q, L)
    certs.extend(wit.certificates)
    return BihtResult(comp, pot, E, wit, certs)


def hsckdv_experiment(sign: int = -1) -> dict:
    """Raw certificates for the cylindrical KdV operator pair.

    D1(E(H1)) is compared with sign * w_xxx + w w_x / sqrt(t) and D0(E(H0))
    with w_xxx + w w_x / sqrt(t); ``sign`` is recorded so no convention is
    silently chosen.
    """
    w, w1, w3 = U(0, 0), U(0, 1), U(0, 3)
    rt = sp.sqrt(T)
    H1 = w1 ** 2 / 2 + w ** 3 / (6 * rt)
    H0 = w ** 2 / 2
    D1 = Dx()
    D0 = Dx() ** 3 + DiffOperator.make(Space.SB, {(0, 1): 2 * w / (3 * rt), (0, 0): w1 / (3 * rt)})
    k1 = D1(euler_lagrange(H1))
    k0 = D0(euler_lagrange(H0))
    out = {
        "sign": sign,
        "D1_E_H1": Certificate.of("D1_E_H1", k1 - (sign * w3 + w * w1 / rt)),
        "D0_E_H0": Certificate.of("D0_E_H0", k0 - (w3 + w * w1 / rt)),
        "same_flow": Certificate.of("same_flow", k1 - k0),
        "D0_skew": Certificate.of("D0_skew", D0 + D0.adjoint()),
    }
    comp = compatibility_H2(D0, H1)
    out["compat"] = comp
    return out
