"""Horizontal/vertical graded forms on the three jet spaces.

A basis monomial is ``(h, c)`` where ``h`` is a sub-tuple of ``('t', 'x')``
standing for ``dt``, ``dx`` or ``dt^dx`` and ``c`` is a strictly decreasing
tuple of contact indices.  Contact indices are integers on EQN and SB
(theta^i) and pairs ``(a, i)`` on FREE (theta^{a,i}, with a = 0 the x-series
and a >= 1 the zeta forms).  Every monomial is written horizontal part first.
"""
from __future__ import annotations

import ast
import re
from dataclasses import dataclass
from typing import Mapping, Optional

import sympy as sp

from .expr import (T, X, U, Decls, expand_lazy, ParseError, _caret_to_pow, _Evaluator, format_expr,
                   free_jets, is_t_jet, is_zero, jet_index, jet_order, normalize,
                   parse_decls)
from .jet import EqContext, Space, SpaceError, _check_x_jets, total_derivative

__all__ = [
    "Form", "theta", "dx", "dt", "wedge", "d_horizontal", "d_vertical",
    "euler_lagrange", "interior_euler", "ibp", "interior_euler_and_ibp",
    "delta_vertical", "horizontal_homotopy", "vertical_homotopy",
    "HomotopyError", "IntegrationError", "Primitive", "horizontal_integrate",
    "project_semibasic", "parse_form", "antiderivative", "delta_primitive",
    "lift_semibasic",
]

_HDIM = {Space.FREE: 2, Space.EQN: 2, Space.SB: 1}


def _perm_sign_sorted_desc(idx):
    """Sort ``idx`` descending; return (sign, tuple) or (0, None) on repeats."""
    idx = list(idx)
    if len(set(idx)) != len(idx):
        return 0, None
    sign = 1
    # bubble sort keeps track of transpositions; lists are short
    for i in range(len(idx)):
        for j in range(len(idx) - 1 - i):
            if idx[j] < idx[j + 1]:
                idx[j], idx[j + 1] = idx[j + 1], idx[j]
                sign = -sign
    return sign, tuple(idx)


def _merge_h(h1, h2):
    h = h1 + h2
    if len(set(h)) != len(h):
        return 0, None
    if h == ("x", "t"):
        return -1, ("t", "x")
    return 1, h


@dataclass(frozen=True)
class Form:
    space: Space
    grade: tuple
    terms: tuple = ()

    # -- construction -----------------------------------------------------
    @staticmethod
    def make(space: Space, terms: Mapping, grade: Optional[tuple] = None) -> "Form":
        clean = {}
        for (h, c), v in terms.items():
            v = expand_lazy(v)
            if v == 0:
                continue
            g = (len(h), len(c))
            if grade is None:
                grade = g
            elif g != grade:
                raise ValueError(f"mixed grades {grade} and {g}")
            if len(h) > _HDIM[space]:
                raise SpaceError("horizontal degree too large for the space")
            if space is Space.SB and "t" in h:
                raise SpaceError("no dt on the semibasic space")
            if space is not Space.FREE:
                _check_x_jets(v, "form coefficient")
            clean[(tuple(h), tuple(c))] = v
        if grade is None:
            grade = (0, 0)
        return Form(space, tuple(grade), tuple(sorted(clean.items(), key=_mono_key)))

    @staticmethod
    def zero(space: Space, grade=(0, 0)) -> "Form":
        return Form(space, tuple(grade), ())

    @staticmethod
    def function(f, space: Space) -> "Form":
        return Form.make(space, {((), ()): f}, (0, 0))

    def as_dict(self) -> dict:
        return dict(self.terms)

    def coeff(self, h=(), c=()):
        return self.as_dict().get((tuple(h), tuple(c)), sp.Integer(0))

    @property
    def r(self):
        return self.grade[0]

    @property
    def s(self):
        return self.grade[1]

    # -- linear structure -------------------------------------------------
    def _check(self, other: "Form"):
        if other.space is not self.space:
            raise SpaceError(f"cannot combine {self.space.value} and {other.space.value} forms")

    def __add__(self, other):
        if isinstance(other, (int, sp.Basic)) and other == 0:
            return self
        self._check(other)
        if self.terms and other.terms and self.grade != other.grade:
            raise ValueError(f"cannot add grades {self.grade} and {other.grade}")
        d = self.as_dict()
        for k, v in other.terms:
            d[k] = d.get(k, 0) + v
        g = self.grade if self.terms else other.grade
        return Form.make(self.space, d, g)

    __radd__ = __add__

    def __neg__(self):
        return self.scale(-1)

    def __sub__(self, other):
        return self + (-other)

    def scale(self, c) -> "Form":
        return Form.make(self.space, {k: c * v for k, v in self.terms}, self.grade)

    def __mul__(self, other):
        if isinstance(other, Form):
            return wedge(self, other)
        return self.scale(other)

    def __rmul__(self, other):
        return self.scale(other)

    def __xor__(self, other):
        return wedge(self, other)

    def map_coeffs(self, fn) -> "Form":
        return Form.make(self.space, {k: fn(v) for k, v in self.terms}, self.grade)

    def normalized(self) -> "Form":
        return self.map_coeffs(normalize)

    def is_zero_form(self) -> Optional[bool]:
        verdict = True
        for _, v in self.terms:
            z = is_zero(v)
            if z is False:
                return False
            if z is None:
                verdict = None
        return verdict

    def equals(self, other: "Form") -> Optional[bool]:
        return (self - other).is_zero_form()

    def split_h(self) -> dict:
        """Group terms by horizontal part: {h: Form of grade (0, s)}."""
        out: dict = {}
        for (h, c), v in self.terms:
            out.setdefault(h, {})[((), c)] = v
        return {h: Form.make(self.space, d, (0, self.s)) for h, d in out.items()}

    def drop(self, h) -> "Form":
        """Terms whose horizontal part is ``h``, still carrying it."""
        return Form.make(self.space, {k: v for k, v in self.terms if k[0] == tuple(h)},
                         self.grade)

    # -- total derivatives -------------------------------------------------
    def _contact_total(self, idx, direction, ctx):
        """Total derivative of one contact form as a grade (0,1) form."""
        if self.space is Space.FREE:
            a, i = idx
            nxt = (a, i + 1) if direction == "x" else (a + 1, i)
            return Form.make(Space.FREE, {((), (nxt,)): 1}, (0, 1))
        if direction == "x":
            return Form.make(self.space, {((), (idx + 1,)): 1}, (0, 1))
        if self.space is Space.SB:
            raise SpaceError("no t total derivative on the semibasic space")
        if ctx is None:
            raise SpaceError("T on contact forms needs the equation context")
        return d_vertical(Form.function(ctx.XK(idx), Space.EQN))

    def total(self, direction: str, ctx: Optional[EqContext] = None) -> "Form":
        """Lie derivative along the total vector field, fixing dt and dx."""
        if self.space is Space.FREE and ctx is not None:
            ctx = None
        # accumulate raw coefficients, normalize once in Form.make
        out: dict = {}
        for (h, c), v in self.terms:
            out[(h, c)] = out.get((h, c), 0) + total_derivative(v, direction, ctx, self.space)
            for k, idx in enumerate(c):
                for (_, (j,)), cj in self._contact_total(idx, direction, ctx).terms:
                    sgn, cc = _perm_sign_sorted_desc(c[:k] + (j,) + c[k + 1:])
                    if sgn:
                        out[(h, cc)] = out.get((h, cc), 0) + sgn * v * cj
        return Form.make(self.space, out, self.grade)

    # -- output -------------------------------------------------------------
    def format(self, dep: str = "u") -> str:
        if not self.terms:
            return "0"
        suffix = "_E" if self.space is Space.SB else ""
        parts = []
        for (h, c), v in self.terms:
            names = ["d" + z for z in h]
            for idx in c:
                if self.space is Space.FREE:
                    a, i = idx
                    names.append(f"vth{i}" if a == 0 else f"z{a}_{i}")
                else:
                    names.append(f"th{idx}{suffix}")
            mono = "^".join(names)
            cs = format_expr(normalize(v), dep)
            parts.append(f"{mono} * ({cs})" if mono else f"({cs})")
        return " + ".join(parts)

    def __str__(self):
        return self.format()

    def to_json(self) -> dict:
        return {
            "space": self.space.value,
            "grade": list(self.grade),
            "terms": [{"dt": "t" in h, "dx": "x" in h,
                       "contact": [list(i) if isinstance(i, tuple) else i for i in c],
                       "coeff": format_expr(normalize(v))}
                      for (h, c), v in self.terms],
        }


def _mono_key(item):
    (h, c), _ = item
    return (h, tuple(c))


def theta(i, space: Space = Space.EQN) -> Form:
    """Contact form theta^i (or theta^{a,i} on FREE when ``i`` is a pair)."""
    if space is Space.FREE and not isinstance(i, tuple):
        i = (0, i)
    return Form.make(space, {((), (i,)): 1}, (0, 1))


def dx(space: Space = Space.EQN) -> Form:
    return Form.make(space, {(("x",), ()): 1}, (1, 0))


def dt(space: Space = Space.EQN) -> Form:
    return Form.make(space, {(("t",), ()): 1}, (1, 0))


def wedge(a: Form, b: Form) -> Form:
    a._check(b)
    r, s = a.r + b.r, a.s + b.s
    if r > _HDIM[a.space]:
        raise SpaceError("wedge exceeds the horizontal dimension")
    out = {}
    for (h1, c1), v1 in a.terms:
        for (h2, c2), v2 in b.terms:
            sh, h = _merge_h(h1, h2)
            if not sh:
                continue
            sc, c = _perm_sign_sorted_desc(c1 + c2)
            if not sc:
                continue
            sign = sh * sc * (-1) ** (len(c1) * len(h2))
            out[(h, c)] = out.get((h, c), 0) + sign * v1 * v2
    return Form.make(a.space, out, (r, s))


# --------------------------------------------------------------------------
# differentials


def _vertical_index(sym, space):
    a, i = jet_index(sym)
    if space is Space.FREE:
        return (a, i)
    if a:
        raise SpaceError("t-jet in an EQN/SB coefficient")
    return i


def d_vertical(w: Form) -> Form:
    """Vertical differential; d_V(theta) = 0 and d_V(dt) = d_V(dx) = 0."""
    out = {}
    for (h, c), v in w.terms:
        sign = (-1) ** len(h)
        for s in free_jets(v):
            j = _vertical_index(s, w.space)
            sc, cc = _perm_sign_sorted_desc((j,) + c)
            if not sc:
                continue
            key = (h, cc)
            out[key] = out.get(key, 0) + sign * sc * sp.diff(v, s)
    return Form.make(w.space, out, (w.r, w.s + 1))


def d_horizontal(w: Form, ctx: Optional[EqContext] = None) -> Form:
    """dx ^ X(w) + dt ^ T(w) (FREE: D_x and D_t; SB: dx ^ X(w) only)."""
    if w.r >= _HDIM[w.space] and w.terms:
        raise SpaceError("form already has top horizontal degree")
    if w.space is Space.EQN and ctx is None:
        raise SpaceError("d_H on the equation manifold needs the equation context")
    out = wedge(dx(w.space), w.total("x", ctx))
    if w.space is not Space.SB:
        out = out + wedge(dt(w.space), w.total("t", ctx))
    return Form.make(w.space, out.as_dict(), (w.r + 1, w.s))


def euler_lagrange(L, space: Space = Space.SB):
    """Euler-Lagrange expression sum (-D_t)^a (-D_x)^i dL/du_{a,i}."""
    L = sp.sympify(L)
    if space is not Space.FREE:
        _check_x_jets(L)
    out = sp.Integer(0)
    for s in free_jets(L):
        a, i = jet_index(s)
        term = sp.diff(L, s)
        for _ in range(i):
            term = -total_derivative(term, "x", None, Space.FREE)
        for _ in range(a):
            term = -total_derivative(term, "t", None, Space.FREE)
        out += term
    return sp.expand(out)


# --------------------------------------------------------------------------
# interior Euler operator and integration by parts


def _interior(alpha: Form, idx) -> Form:
    """Interior product of the vertical vector d/du_idx with a (0,s) form."""
    out = {}
    for (h, c), v in alpha.terms:
        if idx in c:
            k = c.index(idx)
            key = (h, c[:k] + c[k + 1:])
            out[key] = out.get(key, 0) + (-1) ** k * v
    return Form.make(alpha.space, out, (alpha.r, alpha.s - 1))


def _contact_indices(alpha: Form) -> set:
    return {i for (_, c), _ in alpha.terms for i in c}


def _neg_total_pow(f: Form, a: int, i: int, ctx=None) -> Form:
    for _ in range(i):
        f = -f.total("x", ctx)
    for _ in range(a):
        f = -f.total("t", ctx)
    return f


def _theta0(space):
    return theta((0, 0) if space is Space.FREE else 0, space)


def _vertical_part(w: Form):
    top = ("t", "x") if w.space is not Space.SB else ("x",)
    if w.r != len(top):
        raise ValueError(f"expected a top horizontal degree form, got grade {w.grade}")
    if w.s < 1:
        raise ValueError("expected vertical degree at least one")
    return top, Form.make(w.space, {((), c): v for (h, c), v in w.terms}, (0, w.s))


def interior_euler(w: Form) -> Form:
    """J(w) = sum (-D)^J (d/du_J interior w) for a top-degree form."""
    top, alpha = _vertical_part(w)
    j = Form.zero(w.space, (0, w.s - 1))
    for idx in sorted(_contact_indices(alpha)):
        a, i = idx if isinstance(idx, tuple) else (0, idx)
        j = j + _neg_total_pow(_interior(alpha, idx), a, i)
    h = Form.make(w.space, {(top, ()): (-1) ** len(top)}, (len(top), 0))
    return wedge(h, j)


def ibp(w: Form) -> Form:
    """Integration by parts projection I(w) = (1/s) theta^0 ^ J(w)."""
    return wedge(_theta0(w.space), interior_euler(w)).scale(sp.Rational(1, w.s))


def interior_euler_and_ibp(w: Form):
    j = interior_euler(w)
    return j, wedge(_theta0(w.space), j).scale(sp.Rational(1, w.s))


def horizontal_homotopy(w: Form) -> Form:
    """xi with w = I(w) + d_H(xi) for a top form of vertical degree s >= 1.

    Works on SB and on the dx-part of EQN forms (X acts the same way on
    theta^i in both).  Built from theta^i ^ g = X(theta^{i-1} ^ g) - theta^{i-1} ^ X(g).
    """
    if w.space is Space.FREE:
        raise SpaceError("horizontal homotopy is only provided in one independent variable")
    if w.space is Space.EQN and any(h != ("x",) for (h, _), _ in w.terms):
        raise ValueError("expected a dx-only form")
    _, alpha = _vertical_part(Form.make(Space.SB, w.as_dict(), w.grade)
                              if w.space is Space.EQN else w)
    xi = Form.zero(Space.SB, (0, w.s - 1))
    for i in sorted(_contact_indices(alpha)):
        if i == 0:
            continue
        g = _interior(alpha, i)
        for j in range(i):
            xi = xi + wedge(theta(i - 1 - j, Space.SB), g)
            g = -g.total("x")
    xi = xi.scale(sp.Rational(1, w.s))
    return Form.make(w.space, xi.as_dict(), xi.grade)


def delta_vertical(w: Form) -> Form:
    """delta_V = I o d_V on functional forms of the semibasic space."""
    if w.space is not Space.SB:
        raise SpaceError("delta_V is defined on the semibasic space")
    if w.s >= 1 and not ibp(w).equals(w):
        raise ValueError("delta_V expects a functional form (I(w) = w)")
    return ibp(d_vertical(w))


def project_semibasic(w: Form) -> Form:
    """Drop dt terms and relabel theta^i as theta^i_E."""
    if w.space is not Space.EQN:
        raise SpaceError("projection starts on the equation manifold")
    return Form.make(Space.SB, {k: v for k, v in w.terms if "t" not in k[0]}, w.grade)


def lift_semibasic(w: Form) -> Form:
    """View an SB form as an EQN form (t becomes a coordinate again)."""
    if w.space is not Space.SB:
        raise SpaceError("lift starts on the semibasic space")
    return Form.make(Space.EQN, w.as_dict(), w.grade)


# --------------------------------------------------------------------------
# integration helpers


class IntegrationError(ArithmeticError):
    pass


class HomotopyError(IntegrationError):
    pass


_BAD = (sp.log, sp.Integral, sp.Piecewise, sp.atan, sp.asin, sp.acos, sp.atanh,
        sp.RootSum, sp.exp, sp.erf, sp.hyper)


def _in_fragment(e) -> bool:
    e = sp.sympify(e)
    return not (e.atoms(*_BAD) or e.has(sp.oo, -sp.oo, sp.zoo, sp.nan))


def _power_terms(f, y):
    """Split expanded ``f`` into (coeff, exponent) pairs in ``y`` if possible."""
    out = []
    for term in sp.Add.make_args(sp.expand(f)):
        c, k = sp.Integer(1), sp.Integer(0)
        for fac in sp.Mul.make_args(term):
            if fac == y:
                k += 1
            elif fac.is_Pow and fac.base == y and fac.exp.is_Rational:
                k += fac.exp
            elif fac.has(y):
                return None
            else:
                c *= fac
        out.append((c, k))
    return out


def _rational_antiderivative(f, y):
    """Hermite reduction for f rational in y**(1/d); None if f is not of that kind.

    Fractional powers of y are removed by y = s**d first.  Raises
    IntegrationError when a log/atan part is left over, which is decided
    without running the full Risch machinery.
    """
    from sympy.integrals.rationaltools import ratint_ratpart
    d = 1
    for pw in sp.sympify(f).atoms(sp.Pow):
        if pw.base == y and pw.exp.is_Rational:
            d = sp.ilcm(d, pw.exp.q)
    s = sp.Dummy("s", positive=True)
    g = sp.powsimp(sp.expand(f.xreplace({y: s ** d}) * d * s ** (d - 1)), force=True) if d > 1 else f
    v = s if d > 1 else y
    num, den = sp.fraction(sp.together(g))
    try:
        p, q = sp.Poly(num, v), sp.Poly(den, v)
    except sp.PolynomialError:
        return None
    if any(c.has(v) for c in p.coeffs() + q.coeffs()):
        return None
    quo, rem = p.div(q)
    G, h = ratint_ratpart(rem, q, v) if not rem.is_zero else (sp.Integer(0), sp.Integer(0))
    if not is_zero(h):
        raise IntegrationError(f"integral of {f} in {y} needs a logarithm or arctangent")
    res = quo.integrate().as_expr() + G
    if d > 1:
        res = res.xreplace({s: y ** sp.Rational(1, d)})
    return normalize(res)


def antiderivative(f, y, allow_log: bool = False):
    """Antiderivative of ``f`` in ``y`` with no constant.

    Sums of power terms are done by hand; anything else goes to sympy and
    must come back inside the rational-power fragment.
    """
    f = sp.expand(sp.sympify(f))
    if f == 0:
        return sp.Integer(0)
    pt = _power_terms(f, y)
    if pt is not None:
        out = sp.Integer(0)
        for c, k in pt:
            if k == -1:
                if not allow_log:
                    raise IntegrationError(f"integral of {f} in {y} needs a logarithm")
                out += c * sp.log(y)
            else:
                out += c * y ** (k + 1) / (k + 1)
        return sp.expand(out)
    rat = _rational_antiderivative(f, y)
    if rat is not None:
        return rat
    res = sp.integrate(f, y)
    ok = _in_fragment(res) or (allow_log and _in_fragment(res.replace(sp.log, lambda z: sp.Integer(0))))
    if not ok:
        raise IntegrationError(f"integral of {f} in {y} leaves the supported fragment")
    return sp.expand(res)


def _lambda_integral(f, lam):
    """Definite integral of ``f`` over lambda in [0, 1]."""
    f = sp.expand(f)
    pt = _power_terms(f, lam)
    if pt is not None:
        out = sp.Integer(0)
        for c, k in pt:
            if k <= -1:
                raise HomotopyError("pole at lambda = 0; try another base point")
            out += c / (k + 1)
        return out
    F = antiderivative(sp.together(f), lam)
    hi, lo = F.subs(lam, 1), F.subs(lam, 0)
    if not (_in_fragment(hi) and _in_fragment(lo)):
        raise HomotopyError("lambda integral is singular on [0, 1]")
    return sp.expand(hi - lo)


def _radial_homotopy(w: Form, base: Mapping) -> Form:
    lam = sp.Dummy("lam", positive=True)
    out = Form.zero(w.space, (w.r, w.s - 1))
    for (h, c), v in w.terms:
        jets = free_jets(v) | {_jet_of(i, w.space) for i in c}
        scale = {s: base.get(s, 0) + lam * (s - base.get(s, 0)) for s in jets}
        vs = v.xreplace(scale)
        acc = {}
        for k, idx in enumerate(c):
            s = _jet_of(idx, w.space)
            integrand = lam ** (w.s - 1) * (s - base.get(s, 0)) * vs
            val = _lambda_integral(integrand, lam) * (-1) ** k * (-1) ** len(h)
            key = (h, c[:k] + c[k + 1:])
            acc[key] = acc.get(key, 0) + val
        out = out + Form.make(w.space, acc, (w.r, w.s - 1))
    return out


def _jet_of(idx, space):
    return U(*idx) if space is Space.FREE else U(0, idx)


def _coordinatewise_homotopy(w: Form) -> Form:
    """Primitive of a d_V-closed form by integrating one fiber coordinate at a time."""
    groups = w.split_h()
    total = Form.zero(w.space, (w.r, w.s - 1))
    for h, alpha in groups.items():
        cur = alpha
        prim = Form.zero(w.space, (0, w.s - 1))
        guard = 0
        while cur.terms:
            guard += 1
            if guard > 200:
                raise HomotopyError("coordinate homotopy did not terminate (form not closed?)")
            y_idx = max(_contact_indices(cur))
            y = _jet_of(y_idx, w.space)
            part = _interior(cur, y_idx)          # cur = theta^y ^ part + rest
            A = part.map_coeffs(lambda v: antiderivative(v, y))
            prim = prim + A
            # coefficients can vanish without being literally 0
            cur = (cur - d_vertical(A)).map_coeffs(lambda v: 0 if is_zero(v) is True else v)
            if y_idx in _contact_indices(cur):
                raise HomotopyError("form is not d_V-closed")
        hform = Form.make(w.space, {(h, ()): (-1) ** len(h)}, (len(h), 0))
        total = total + wedge(hform, prim)
    return total


def vertical_homotopy(w: Form, base: Optional[Mapping] = None, method: str = "auto") -> Form:
    """Vertical primitive: d_V(result) = w for d_V-closed ``w`` of degree s >= 1.

    ``method='radial'`` is the de Rham formula along u_J -> u0_J + lam (u_J - u0_J)
    (``base`` maps jet symbols to base values, default the zero fiber).
    ``method='coordinate'`` integrates fiber coordinates one at a time and
    needs ``w`` closed.  ``'auto'`` tries radial first.
    """
    if w.s < 1:
        raise ValueError("vertical homotopy needs vertical degree >= 1")
    base = {} if base is None else dict(base)
    if method in ("auto", "radial"):
        try:
            return _radial_homotopy(w, base)
        except IntegrationError:
            if method == "radial":
                raise
    if method in ("auto", "coordinate"):
        return _coordinatewise_homotopy(w)
    raise ValueError(f"unknown method {method!r}")


def delta_primitive(w: Form, base: Optional[Mapping] = None) -> Form:
    """Inverse of delta_V on the semibasic Euler complex.

    For a functional form ``w`` of vertical degree s >= 1 with
    delta_V(w) = 0, returns psi with delta_V(psi) = w: a functional form of
    degree s - 1, or ``L dx`` when s = 1 (then E(L) is the coefficient of w).
    The d_H-correction that makes ``w`` d_V-closed is built from the
    one-variable horizontal homotopy.
    """
    if w.space is not Space.SB or w.r != 1:
        raise SpaceError("expected a top-degree form on the semibasic space")
    g = d_vertical(w)
    mu = horizontal_homotopy(g)
    if not (g - d_horizontal(mu)).is_zero_form():
        raise ValueError("form is not delta_V-closed")
    nu = vertical_homotopy(mu, base) if mu.terms else Form.zero(Space.SB, (0, w.s))
    w_closed = w + d_horizontal(nu)
    eta = vertical_homotopy(w_closed, base)
    psi = ibp(eta) if w.s >= 2 else eta
    return psi


@dataclass(frozen=True)
class Primitive:
    """Solution f of X(f) = A (and T(f) = B).

    When f needs a logarithm the multiplicative witness R = exp(f) is also
    given; ``in_fragment`` tells whether f itself is a rational-power
    expression.
    """
    f: sp.Expr
    R: Optional[sp.Expr]
    in_fragment: bool


def horizontal_integrate(A, B=None, ctx: Optional[EqContext] = None) -> Primitive:
    """Solve X(f) = A (and T(f) = B when ``B`` is given)."""
    A = sp.expand(sp.sympify(A))
    _check_x_jets(A)
    if not is_zero(euler_lagrange(A, Space.SB)):
        raise IntegrationError("A is not a total x-derivative (E(A) != 0)")
    f = sp.Integer(0)
    rem = A
    for _ in range(64):
        n = jet_order(rem)
        if n < 1:
            break
        un = U(0, n)
        a = sp.diff(rem, un)
        if sp.diff(a, un) != 0 and not is_zero(sp.diff(a, un)):
            raise IntegrationError("A is not linear in its top derivative")
        F = antiderivative(a, U(0, n - 1), allow_log=True)
        f += F
        rem = sp.expand(rem - total_derivative(F, "x", None, Space.SB))
        rem = normalize(rem)
    if U(0, 0) in free_jets(rem):
        raise IntegrationError("remainder depends on u")
    f += _integrate_tx(rem, X)
    if B is not None:
        if ctx is None:
            raise SpaceError("matching T(f) = B needs the equation context")
        g = normalize(sp.sympify(B) - ctx.T(f))
        if free_jets(g) or not is_zero(sp.diff(g, X)):
            raise IntegrationError("T-match impossible: d_H(A dx + B dt) != 0")
        f += _integrate_tx(g, T)
        if not is_zero(ctx.T(f) - B):
            raise IntegrationError("T-match failed")
    f = sp.expand(f)
    if not is_zero(total_derivative(f, "x", None, Space.SB) - A):
        raise IntegrationError("X-match failed")
    if _in_fragment(f):
        return Primitive(f, None, True)
    R = sp.simplify(sp.exp(f))
    return Primitive(f, R if _in_fragment(R) else None, False)


def _integrate_tx(g, var):
    g = normalize(g)
    if g == 0:
        return sp.Integer(0)
    try:
        return antiderivative(g, var, allow_log=True)
    except IntegrationError:
        raise
    except Exception as exc:  # sympy internals
        raise IntegrationError(str(exc)) from None


# --------------------------------------------------------------------------
# form literals

_FORM_NAME = re.compile(r"\b(dx|dt|th(\d+)(_E)?|vth(\d+)|z(\d+)_(\d+))\b")


class _FormEvaluator(_Evaluator):
    def binop(self, op, a, b, node):
        fa, fb = isinstance(a, Form), isinstance(b, Form)
        if not (fa or fb):
            return super().binop(op, a, b, node)
        if isinstance(op, (ast.Pow, ast.Mult, ast.BitXor)):
            if fa and fb:
                return wedge(a, b)
            if isinstance(op, ast.Pow):
                self.fail("cannot raise a form to a power", node)
            return a.scale(b) if fa else b.scale(a)
        if isinstance(op, ast.Div) and fa and not fb:
            return a.scale(1 / b)
        if isinstance(op, (ast.Add, ast.Sub)) and fa and fb:
            return a + b if isinstance(op, ast.Add) else a - b
        self.fail("unsupported form arithmetic", node)

    def visit_UnaryOp(self, node):
        v = self.visit(node.operand)
        if isinstance(v, Form):
            if isinstance(node.op, ast.USub):
                return -v
            return v
        return super().visit_UnaryOp(node)


def parse_form(src: str, decls: Optional[Decls] = None, space: Optional[Space] = None,
               dep: Optional[str] = None) -> Form:
    """Parse a form literal such as ``dx^th0^th1 * (1/(2*u_x^2))``.

    ``th<i>`` is theta^i on EQN, ``th<i>_E`` on SB, ``vth<i>`` and
    ``z<a>_<i>`` are the contact forms of the free jet space.
    """
    decls = decls.copy(dep) if decls is not None else Decls(dep=dep or "u")
    decls, text = parse_decls(src, decls)
    kinds = set()
    for m in _FORM_NAME.finditer(text):
        if m.group(2) is not None:
            kinds.add(Space.SB if m.group(3) else Space.EQN)
        elif m.group(4) is not None or m.group(5) is not None:
            kinds.add(Space.FREE)
    if len(kinds) > 1:
        raise ParseError("form literal mixes contact forms of different spaces")
    if kinds:
        sp_ = kinds.pop()
        if space is not None and space is not sp_:
            raise ParseError(f"form literal is on {sp_.value}, expected {space.value}")
        space = sp_
    space = space or Space.EQN
    names = {"dx": dx(space)}
    if space is not Space.SB:
        names["dt"] = dt(space)
    for m in _FORM_NAME.finditer(text):
        tok = m.group(1)
        if m.group(2) is not None:
            names[tok] = theta(int(m.group(2)), space)
        elif m.group(4) is not None:
            names[tok] = theta((0, int(m.group(4))), space)
        elif m.group(5) is not None:
            names[tok] = theta((int(m.group(5)), int(m.group(6))), space)
    pysrc, cols = _caret_to_pow(text)
    try:
        tree = ast.parse(pysrc, mode="eval")
    except SyntaxError as exc:
        off = (exc.offset or 1) - 1
        raise ParseError(f"syntax error: {exc.msg}", cols[off] if off < len(cols) else off) from None
    val = _FormEvaluator(decls, cols, names).visit(tree)
    if not isinstance(val, Form):
        val = Form.function(val, space)
    return val
