"""Total derivatives, equation manifolds and total differential operators."""
from __future__ import annotations

import threading
from dataclasses import dataclass, field
from enum import Enum
from math import comb
from typing import Mapping, Optional

import sympy as sp

from .expr import (T, X, U, Decls, expand_lazy, ParseError, _caret_to_pow, _Evaluator,
                   free_jets, is_t_jet, is_zero, jet_index, normalize,
                   parse_decls, shift_jets, format_expr)

__all__ = [
    "Space", "EqContext", "SpaceError", "total_derivative", "DiffOperator",
    "frechet", "linearization", "parse_operator", "Dx", "Dt", "identity",
]


class Space(Enum):
    FREE = "FREE"   # free jet space, coordinates u_{a,i}
    EQN = "EQN"     # equation manifold, coordinates t, x, u_i
    SB = "SB"       # t-semibasic space, t is a parameter


class SpaceError(ValueError):
    pass


def _check_x_jets(e, what="expression"):
    bad = [s for s in free_jets(e) if is_t_jet(s)]
    if bad:
        raise SpaceError(f"{what} contains t-derivatives {sorted(map(str, bad))}")


def _dx_free(e):
    e = sp.sympify(e)
    out = sp.diff(e, X)
    for s in free_jets(e):
        a, i = jet_index(s)
        out += U(a, i + 1) * sp.diff(e, s)
    return expand_lazy(out)


def _dt_free(e):
    e = sp.sympify(e)
    out = sp.diff(e, T)
    for s in free_jets(e):
        a, i = jet_index(s)
        out += U(a + 1, i) * sp.diff(e, s)
    return expand_lazy(out)


class EqContext:
    """The evolution equation u_t = K(t, x, u, u_x, ..., u_n).

    X and T are the total derivatives restricted to the equation manifold.
    Iterated X-derivatives of K are cached; the cache is guarded by a lock so
    a context may be shared across threads.
    """

    def __init__(self, K, decls: Optional[Decls] = None):
        K = normalize(K)
        _check_x_jets(K, "K")
        self.K = K
        self.decls = decls
        self.n = max(-1, max((jet_index(s)[1] for s in free_jets(K)), default=-1))
        self.Ks = tuple(sp.expand(sp.diff(K, U(0, i))) for i in range(self.n + 1))
        if self.n < 0 or is_zero(self.Ks[self.n]):
            raise SpaceError("K must depend on some u_i")
        self._xk = [K]
        self._lock = threading.Lock()

    def __repr__(self):
        return f"EqContext(K={self.K})"

    def K_i(self, i: int):
        return self.Ks[i] if 0 <= i <= self.n else sp.Integer(0)

    def XK(self, i: int):
        """X^i(K)."""
        with self._lock:
            while len(self._xk) <= i:
                self._xk.append(_dx_free(self._xk[-1]))
            return self._xk[i]

    def X(self, e):
        _check_x_jets(e)
        return _dx_free(e)

    def T(self, e):
        e = sp.sympify(e)
        _check_x_jets(e)
        out = sp.diff(e, T)
        for s in free_jets(e):
            out += self.XK(jet_index(s)[1]) * sp.diff(e, s)
        return expand_lazy(out)

    def restrict(self, e):
        """Pull a free-jet expression back to the equation: u_{a,i} -> X^i T^{a-1} K."""
        e = sp.sympify(e)
        binds = {}
        for s in free_jets(e):
            a, i = jet_index(s)
            if a:
                v = self.K
                for _ in range(a - 1):
                    v = self.T(v)
                for _ in range(i):
                    v = self.X(v)
                binds[s] = v
        return sp.expand(e.xreplace(binds)) if binds else e

    @property
    def delta(self):
        """u_t - K as a free-jet expression."""
        return U(1, 0) - self.K


def total_derivative(e, direction: str, ctx: Optional[EqContext] = None,
                     space: Space = Space.EQN):
    """D_x / D_t on FREE, X / T on EQN, X on SB."""
    if direction not in ("x", "t"):
        raise ValueError("direction must be 'x' or 't'")
    if space is Space.FREE:
        if ctx is not None:
            raise SpaceError("the free jet space takes no equation context")
        return _dx_free(e) if direction == "x" else _dt_free(e)
    _check_x_jets(e)
    if direction == "x":
        return _dx_free(e)
    if space is Space.SB:
        raise SpaceError("no t total derivative on the semibasic space")
    if ctx is None:
        raise SpaceError("T on the equation manifold needs an equation context")
    return ctx.T(e)


def _D(obj, direction, space, ctx):
    """Total derivative of an expression or of anything with a ``total`` method."""
    if hasattr(obj, "total"):
        return obj.total(direction, ctx)
    return total_derivative(obj, direction, ctx, space)


def _Dpow(obj, a, i, space, ctx):
    for _ in range(i):
        obj = _D(obj, "x", space, ctx)
    for _ in range(a):
        obj = _D(obj, "t", space, ctx)
    return obj


def _is_zero_value(v):
    if hasattr(v, "is_zero_form"):
        return v.is_zero_form()
    return is_zero(v)


@dataclass(frozen=True)
class DiffOperator:
    """Sum of c_{a,i} D_t^a D_x^i in right normal form.

    On EQN the derivatives are X and T; terms with ``a > 0`` there need the
    equation context.  On SB only ``a = 0`` is allowed.
    """
    space: Space
    terms: tuple = ()
    ctx: Optional[EqContext] = field(default=None, compare=False)

    @staticmethod
    def make(space: Space, terms: Mapping, ctx: Optional[EqContext] = None) -> "DiffOperator":
        clean = {}
        for (a, i), c in terms.items():
            c = expand_lazy(c)
            if c == 0:
                continue
            if a and space is Space.SB:
                raise SpaceError("D_t is not available on the semibasic space")
            if space is not Space.FREE:
                _check_x_jets(c, "operator coefficient")
            clean[(a, i)] = c
        if space is Space.FREE:
            ctx = None
        elif any(a for a, _ in clean) and ctx is None:
            raise SpaceError("T in an operator on the equation manifold needs a context")
        return DiffOperator(space, tuple(sorted(clean.items())), ctx)

    @staticmethod
    def mult(c, space: Space, ctx=None) -> "DiffOperator":
        return DiffOperator.make(space, {(0, 0): c}, ctx)

    # -- basic structure -------------------------------------------------
    def as_dict(self) -> dict:
        return dict(self.terms)

    def coeff(self, a: int, i: int = None):
        if i is None:
            a, i = 0, a
        return self.as_dict().get((a, i), sp.Integer(0))

    def order(self) -> int:
        return max((a + i for (a, i), _ in self.terms), default=-1)

    def x_coeffs(self) -> list:
        """[r_0, r_1, ..., r_m] for an x-only operator."""
        d = self.as_dict()
        if any(a for a, _ in d):
            raise SpaceError("operator has t-derivatives")
        m = max((i for _, i in d), default=-1)
        return [d.get((0, i), sp.Integer(0)) for i in range(m + 1)]

    def _same(self, other: "DiffOperator"):
        if other.space is not self.space:
            raise SpaceError(f"cannot combine {self.space.value} and {other.space.value} operators")
        return self.ctx if self.ctx is not None else other.ctx

    def __add__(self, other):
        if not isinstance(other, DiffOperator):
            other = DiffOperator.mult(other, self.space, self.ctx)
        ctx = self._same(other)
        d = self.as_dict()
        for k, c in other.terms:
            d[k] = d.get(k, 0) + c
        return DiffOperator.make(self.space, d, ctx)

    __radd__ = __add__

    def __neg__(self):
        return DiffOperator.make(self.space, {k: -c for k, c in self.terms}, self.ctx)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, DiffOperator):
            return self.compose(other)
        return DiffOperator.make(self.space, {k: c * other for k, c in self.terms}, self.ctx)

    def __rmul__(self, other):
        return DiffOperator.make(self.space, {k: other * c for k, c in self.terms}, self.ctx)

    def __matmul__(self, other):
        if not isinstance(other, DiffOperator):
            other = DiffOperator.mult(other, self.space, self.ctx)
        return self.compose(other)

    def __rmatmul__(self, other):
        return DiffOperator.mult(other, self.space, self.ctx).compose(self)

    def __pow__(self, k: int):
        if not isinstance(k, int) or k < 0:
            raise ValueError("operator powers must be non-negative integers")
        out = identity(self.space, self.ctx)
        for _ in range(k):
            out = out.compose(self)
        return out

    def __call__(self, obj):
        return self.apply(obj)

    # -- algebra ----------------------------------------------------------
    def apply(self, obj):
        """Apply to an expression or to a form (acting on coefficients and
        contact indices)."""
        acc = None
        for (a, i), c in self.terms:
            term = _Dpow(obj, a, i, self.space, self.ctx)
            term = c * term if not hasattr(term, "total") else term.scale(c)
            acc = term if acc is None else acc + term
        if acc is None:
            return obj.scale(0) if hasattr(obj, "total") else sp.Integer(0)
        return acc if hasattr(acc, "total") else sp.expand(acc)

    def compose(self, other: "DiffOperator") -> "DiffOperator":
        """self o other, expanded by the Leibniz rule."""
        ctx = self._same(other)
        out: dict = {}
        for (a, i), c in self.terms:
            for (b, j), d in other.terms:
                for p in range(a + 1):
                    for q in range(i + 1):
                        dd = _Dpow(d, p, q, self.space, ctx)
                        if dd == 0:
                            continue
                        k = (a - p + b, i - q + j)
                        out[k] = out.get(k, 0) + comb(a, p) * comb(i, q) * c * dd
        return DiffOperator.make(self.space, out, ctx)

    def adjoint(self) -> "DiffOperator":
        """Formal adjoint sum (-D_t)^a (-D_x)^i o c."""
        out = zero(self.space, self.ctx)
        for (a, i), c in self.terms:
            mono = DiffOperator.make(self.space, {(a, i): (-1) ** (a + i)}, self.ctx)
            out = out + mono.compose(DiffOperator.mult(c, self.space, self.ctx))
        return out

    def equals(self, other: "DiffOperator") -> Optional[bool]:
        """Exact equality; None when a coefficient test is inconclusive."""
        diff = self - other
        verdict = True
        for _, c in diff.terms:
            z = is_zero(c)
            if z is False:
                return False
            if z is None:
                verdict = None
        return verdict

    def is_zero(self) -> Optional[bool]:
        return self.equals(zero(self.space, self.ctx))

    def is_skew(self) -> Optional[bool]:
        return (self + self.adjoint()).is_zero()

    def normalized(self) -> "DiffOperator":
        return DiffOperator.make(self.space, {k: normalize(c) for k, c in self.terms}, self.ctx)

    # -- change of space --------------------------------------------------
    def lift(self) -> "DiffOperator":
        """View an x-only operator on EQN/SB as an operator on the free jet space."""
        for (a, _), c in self.terms:
            if a:
                raise SpaceError("only x-operators can be lifted")
            _check_x_jets(c, "coefficient")
        return DiffOperator.make(Space.FREE, dict(self.terms))

    def on(self, space: Space, ctx: Optional[EqContext] = None) -> "DiffOperator":
        """Re-tag an x-only operator for ``space``."""
        if space is Space.FREE:
            return self.lift()
        for (a, _), c in self.terms:
            if a:
                raise SpaceError("only x-operators can be re-tagged")
            _check_x_jets(c, "coefficient")
        return DiffOperator.make(space, dict(self.terms), ctx)

    def shift(self, depth: int) -> "DiffOperator":
        """Substitute v_j -> u_{j+depth} in the coefficients."""
        return DiffOperator.make(self.space, {k: shift_jets(c, depth) for k, c in self.terms},
                                 self.ctx)

    def format(self, dep: str = "u") -> str:
        if not self.terms:
            return "0"
        parts = []
        for (a, i), c in sorted(self.terms, key=lambda kv: (-kv[0][0] - kv[0][1], kv[0])):
            d = []
            if a:
                d.append("Dt" if a == 1 else f"Dt^{a}")
            if i:
                d.append("Dx" if i == 1 else f"Dx^{i}")
            cs = format_expr(normalize(c), dep)
            if not d:
                parts.append(f"({cs})")
            elif c == 1:
                parts.append("*".join(d))
            else:
                parts.append(f"({cs})*" + "*".join(d))
        return " + ".join(parts)

    def __str__(self):
        return self.format()


def zero(space: Space, ctx=None) -> DiffOperator:
    return DiffOperator(space, (), ctx if space is not Space.FREE else None)


def identity(space: Space, ctx=None) -> DiffOperator:
    return DiffOperator.mult(1, space, ctx)


def Dx(space: Space = Space.SB, ctx=None) -> DiffOperator:
    return DiffOperator.make(space, {(0, 1): 1}, ctx)


def Dt(space: Space = Space.FREE, ctx=None) -> DiffOperator:
    return DiffOperator.make(space, {(1, 0): 1}, ctx)


def frechet(P, space: Space) -> DiffOperator:
    """Frechet derivative F_P = sum dP/du_{a,i} D_t^a D_x^i."""
    P = sp.sympify(P)
    if space is not Space.FREE:
        _check_x_jets(P)
    return DiffOperator.make(space, {jet_index(s): sp.diff(P, s) for s in free_jets(P)})


def linearization(ctx: EqContext):
    """Universal linearization T - sum K_i X^i and its adjoint on EQN."""
    terms = {(1, 0): 1}
    for i, k in enumerate(ctx.Ks):
        terms[(0, i)] = terms.get((0, i), 0) - k
    L = DiffOperator.make(Space.EQN, terms, ctx)
    return L, L.adjoint()


# --------------------------------------------------------------------------
# operator text


class _OpEvaluator(_Evaluator):
    def __init__(self, decls, cols, space, ctx):
        names = {"Dx": Dx(space, ctx)}
        if space is Space.FREE or (space is Space.EQN and ctx is not None):
            names["Dt"] = DiffOperator.make(space, {(1, 0): 1}, ctx)
        super().__init__(decls, cols, names)
        self.space, self.ctx = space, ctx

    def binop(self, op, a, b, node):
        import ast
        is_op = isinstance(a, DiffOperator) or isinstance(b, DiffOperator)
        if isinstance(op, ast.MatMult):
            if not isinstance(a, DiffOperator):
                a = DiffOperator.mult(a, self.space, self.ctx)
            return a @ b
        if not is_op:
            return super().binop(op, a, b, node)
        if isinstance(op, ast.Mult):
            if isinstance(a, DiffOperator):
                return a.compose(b) if isinstance(b, DiffOperator) else a @ b
            return a * b
        if isinstance(op, (ast.Add, ast.Sub)):
            return a + b if isinstance(op, ast.Add) else a - b
        if isinstance(op, ast.Pow) and isinstance(a, DiffOperator) and getattr(b, "is_Integer", False):
            return a ** int(b)
        if isinstance(op, ast.Div) and isinstance(a, DiffOperator) and not isinstance(b, DiffOperator):
            return a * (1 / b)
        self.fail("unsupported operator arithmetic", node)


def parse_operator(src: str, decls: Optional[Decls] = None, space: Space = Space.SB,
                   ctx: Optional[EqContext] = None, dep: Optional[str] = None) -> DiffOperator:
    """Parse operator text such as ``(1/u_x) @ Dx @ (1/u_x)`` or ``t*Dx``."""
    import ast
    decls = decls.copy(dep) if decls is not None else Decls(dep=dep or "u")
    decls, text = parse_decls(src, decls)
    if not text:
        raise ParseError("empty operator", 0)
    pysrc, cols = _caret_to_pow(text)
    try:
        tree = ast.parse(pysrc, mode="eval")
    except SyntaxError as exc:
        off = (exc.offset or 1) - 1
        raise ParseError(f"syntax error: {exc.msg}", cols[off] if off < len(cols) else off) from None
    val = _OpEvaluator(decls, cols, space, ctx).visit(tree)
    if not isinstance(val, DiffOperator):
        val = DiffOperator.mult(val, space, ctx)
    return val
