"""Exact expressions over jet coordinates.

Expressions are sympy expressions built from positive symbols.  The positive
assumption is the branch convention for fractional powers: every radicand is
treated as positive, so ``sqrt(u_x**2) == u_x``.

Coordinates are ``t``, ``x`` and ``U(a, i)``, the derivative of the
dependent variable with ``a`` time derivatives and ``i`` space derivatives.
"""
from __future__ import annotations

import ast
import re
import threading
from dataclasses import dataclass, field
from functools import reduce
from math import lcm
from typing import Iterable, Mapping, Optional

import sympy as sp
from sympy.core.function import AppliedUndef

__all__ = [
    "T", "X", "U", "jet_index", "is_jet", "is_t_jet", "coord_key",
    "Decls", "ParseError", "parse_expr", "parse_decls", "format_expr",
    "partial", "substitute", "shift_jets", "is_zero", "normalize",
    "Inconclusive", "free_jets", "jet_order", "opaque_atoms",
]

T = sp.Symbol("t", positive=True)
X = sp.Symbol("x", positive=True)

_jet_lock = threading.Lock()
_jets: dict[tuple[int, int], sp.Symbol] = {}
_jet_index: dict[sp.Symbol, tuple[int, int]] = {}


def _jet_name(a: int, i: int) -> str:
    return "u" if a == i == 0 else "u_" + "t" * a + "x" * i


def U(a: int, i: int = None) -> sp.Symbol:
    """Jet coordinate u with ``a`` t-derivatives and ``i`` x-derivatives.

    ``U(i)`` with a single argument is shorthand for ``U(0, i)``.
    """
    if i is None:
        a, i = 0, a
    if a < 0 or i < 0:
        raise ValueError("jet indices must be non-negative")
    key = (int(a), int(i))
    sym = _jets.get(key)
    if sym is None:
        with _jet_lock:
            sym = _jets.get(key)
            if sym is None:
                sym = sp.Symbol(_jet_name(*key), positive=True)
                _jet_index[sym] = key
                _jets[key] = sym
    return sym


def jet_index(s) -> Optional[tuple[int, int]]:
    """Return ``(a, i)`` when ``s`` is a jet coordinate, else None."""
    return _jet_index.get(s)


def is_jet(s) -> bool:
    return s in _jet_index


def is_t_jet(s) -> bool:
    idx = _jet_index.get(s)
    return idx is not None and idx[0] > 0


def coord_key(s):
    """Total order on coordinates: t < x < U(a, i) lexicographic."""
    if s == T:
        return (0, 0, 0)
    if s == X:
        return (1, 0, 0)
    a, i = _jet_index[s]
    return (2, a, i)


def free_jets(e) -> set:
    """Jet coordinates ``e`` depends on, including through opaque arguments."""
    return {s for s in sp.sympify(e).free_symbols if s in _jet_index}


def jet_order(e) -> int:
    """Highest x-order among pure x-jets in ``e``; -1 if none."""
    orders = [i for s in free_jets(e) for (a, i) in [_jet_index[s]] if a == 0]
    return max(orders, default=-1)


def opaque_atoms(e) -> set:
    e = sp.sympify(e)
    return e.atoms(AppliedUndef) | e.atoms(sp.Derivative)


# --------------------------------------------------------------------------
# declarations and parsing


class ParseError(ValueError):
    def __init__(self, msg: str, pos: Optional[int] = None):
        self.pos = pos
        super().__init__(msg if pos is None else f"{msg} (at column {pos})")


@dataclass
class Decls:
    """Declared parameters and opaque functions.

    ``dep`` is the letter used for the dependent variable in source text;
    ``v_xx`` read with ``dep='v'`` is the same coordinate as ``u_xx``.
    """
    params: dict = field(default_factory=dict)
    funcs: dict = field(default_factory=dict)
    dep: str = "u"

    def param(self, *names: str) -> "Decls":
        for n in names:
            self.params[n] = sp.Symbol(n, positive=True)
        return self

    def func(self, name: str, args: Iterable) -> "Decls":
        args = tuple(_coord_from_name(a, self.dep) if isinstance(a, str) else a
                     for a in args)
        for a in args:
            if a is None or not (a in (T, X) or is_jet(a)):
                raise ParseError(f"argument of {name} is not a jet coordinate")
        self.funcs[name] = sp.Function(name)(*args)
        return self

    def copy(self, dep: Optional[str] = None) -> "Decls":
        return Decls(dict(self.params), dict(self.funcs), dep or self.dep)

    def merged(self, other: Optional["Decls"]) -> "Decls":
        out = self.copy()
        if other is not None:
            out.params.update(other.params)
            out.funcs.update(other.funcs)
        return out


_JET_RE = re.compile(r"^([A-Za-z])(?:_(t*)(x*))?$")


def _coord_from_name(name: str, dep: str = "u"):
    if name == "t":
        return T
    if name == "x":
        return X
    m = _JET_RE.match(name)
    if m and m.group(1) == dep:
        if m.group(2) is None:
            return U(0, 0)
        a, i = len(m.group(2)), len(m.group(3))
        if a + i == 0:
            return None
        return U(a, i)
    return None


_DECL_RE = re.compile(r"^\s*(param|func)\s+(.*)$", re.S)


def parse_decls(src: str, decls: Optional[Decls] = None) -> tuple[Decls, str]:
    """Split leading ``param``/``func`` statements off ``src``.

    Returns the extended declarations and the remaining expression text.
    """
    decls = Decls() if decls is None else decls.copy()
    # multi-line input: newlines become spaces so columns stay aligned
    parts = src.replace("\r", " ").replace("\n", " ").replace("\t", " ").split(";")
    body = []
    for k, stmt in enumerate(parts):
        m = _DECL_RE.match(stmt)
        if m is None:
            body = parts[k:]
            break
        kind, rest = m.groups()
        if kind == "param":
            names = [n.strip() for n in rest.split(",") if n.strip()]
            for n in names:
                if not n.isidentifier():
                    raise ParseError(f"bad parameter name {n!r}")
            decls.param(*names)
        else:
            fm = re.match(r"^\s*([A-Za-z]\w*)\s*\((.*)\)\s*$", rest, re.S)
            if fm is None:
                raise ParseError(f"bad func declaration {stmt.strip()!r}")
            args = [a.strip() for a in fm.group(2).split(",") if a.strip()]
            coords = [_coord_from_name(a, decls.dep) for a in args]
            if any(c is None for c in coords):
                raise ParseError(f"func {fm.group(1)} has a non-coordinate argument")
            decls.func(fm.group(1), coords)
    text = ";".join(body).strip()
    if ";" in text:
        raise ParseError("only one expression may follow the declarations")
    return decls, text


def _caret_to_pow(src: str) -> tuple[str, list[int]]:
    """Replace ``^`` by ``**`` keeping a column map back to ``src``."""
    out, cols = [], []
    for k, ch in enumerate(src):
        if ch == "^":
            out.append("**")
            cols.extend([k, k])
        else:
            out.append(ch)
            cols.append(k)
    return "".join(out), cols


class _Evaluator:
    """Evaluate a restricted Python AST into sympy objects."""

    def __init__(self, decls: Decls, cols: list[int], names: Optional[Mapping] = None):
        self.decls = decls
        self.cols = cols
        self.names = dict(names or {})

    def pos(self, node) -> Optional[int]:
        c = getattr(node, "col_offset", None)
        if c is None:
            return None
        return self.cols[c] if c < len(self.cols) else c

    def fail(self, msg, node):
        raise ParseError(msg, self.pos(node))

    def name(self, ident: str, node):
        if ident in self.names:
            return self.names[ident]
        if ident in self.decls.params:
            return self.decls.params[ident]
        if ident in self.decls.funcs:
            return self.decls.funcs[ident]
        c = _coord_from_name(ident, self.decls.dep)
        if c is not None:
            return c
        self.fail(f"undeclared identifier {ident!r}", node)

    def visit(self, node):
        meth = getattr(self, "visit_" + type(node).__name__, None)
        if meth is None:
            self.fail(f"unsupported syntax {type(node).__name__}", node)
        return meth(node)

    def visit_Expression(self, node):
        return self.visit(node.body)

    def visit_Constant(self, node):
        v = node.value
        if isinstance(v, bool) or not isinstance(v, int):
            self.fail(f"non-rational literal {v!r}", node)
        return sp.Integer(v)

    def visit_Name(self, node):
        return self.name(node.id, node)

    def visit_UnaryOp(self, node):
        v = self.visit(node.operand)
        if isinstance(node.op, ast.USub):
            return -v
        if isinstance(node.op, ast.UAdd):
            return v
        self.fail("unsupported unary operator", node)

    def binop(self, op, a, b, node):
        if isinstance(op, ast.Add):
            return a + b
        if isinstance(op, ast.Sub):
            return a - b
        if isinstance(op, ast.Mult):
            return a * b
        if isinstance(op, ast.Div):
            return a / b
        if isinstance(op, ast.Pow):
            if not getattr(b, "is_Rational", False):
                self.fail("exponents must be rational numbers", node)
            return a ** b
        self.fail(f"unsupported operator {type(op).__name__}", node)

    def visit_BinOp(self, node):
        a = self.visit(node.left)
        b = self.visit(node.right)
        return self.binop(node.op, a, b, node)

    def visit_Call(self, node):
        if not isinstance(node.func, ast.Name) or node.keywords:
            self.fail("unsupported call", node)
        fname = node.func.id
        if fname == "sqrt" and len(node.args) == 1:
            return sp.sqrt(self.visit(node.args[0]))
        if fname in self.decls.funcs:
            # R(t,x,u,u_x) repeats the declared argument list
            f = self.decls.funcs[fname]
            got = tuple(self.visit(a) for a in node.args)
            if got != tuple(f.args):
                self.fail(f"{fname} must be applied to its declared arguments", node)
            return f
        self.fail(f"unknown function {fname!r}", node)

    def visit_Subscript(self, node):
        base = node.value
        sl = node.slice
        items = sl.elts if isinstance(sl, ast.Tuple) else [sl]
        if isinstance(base, ast.Name) and base.id == self.decls.dep:
            if len(items) != 2 or not all(
                    isinstance(k, ast.Constant) and type(k.value) is int for k in items):
                self.fail("indexed jet needs two integer indices", node)
            return U(items[0].value, items[1].value)
        if isinstance(base, ast.Name) and base.id in self.decls.funcs:
            f = self.decls.funcs[base.id]
            wrt = [self.visit(k) for k in items]
            for w in wrt:
                if not (w in (T, X) or is_jet(w)):
                    self.fail("derivative variable is not a coordinate", node)
            return sp.diff(f, *wrt)
        self.fail("unsupported subscript", node)


def _parse_ast(text: str):
    pysrc, cols = _caret_to_pow(text)
    if "**" in text:
        raise ParseError("use ^ for powers", text.index("**"))
    try:
        tree = ast.parse(pysrc.strip() or "0", mode="eval")
    except SyntaxError as exc:
        off = (exc.offset or 1) - 1
        raise ParseError(f"syntax error: {exc.msg}",
                         cols[off] if off < len(cols) else off) from None
    return tree, cols


def parse_expr(src: str, decls: Optional[Decls] = None, dep: Optional[str] = None):
    """Parse expression text into a normalized expression.

    ``src`` may start with ``param c1, c2;`` and ``func R(t,x,u,u_x);``
    statements.  Powers use ``^``; numeric literals must be integers, so
    rationals are written ``p/q``.
    """
    decls = (decls.copy(dep) if decls is not None else Decls(dep=dep or "u"))
    decls, text = parse_decls(src, decls)
    if not text:
        raise ParseError("empty expression", 0)
    tree, cols = _parse_ast(text)
    val = _Evaluator(decls, cols).visit(tree)
    return normalize(sp.sympify(val))


# --------------------------------------------------------------------------
# printing


class _Printer(sp.printing.str.StrPrinter):
    def _print_Symbol(self, s):
        return s.name

    def _print_Function(self, f):
        if isinstance(f, AppliedUndef):
            return f.func.__name__
        return super()._print_Function(f)

    def _print_Derivative(self, d):
        f = d.expr
        if not isinstance(f, AppliedUndef):
            return super()._print_Derivative(d)
        wrt = []
        for v, n in d.variable_count:
            wrt.extend([self._print(v)] * int(n))
        return f"{f.func.__name__}[{','.join(wrt)}]"


_printer = _Printer({"order": "grlex"})


def format_expr(e, dep: str = "u") -> str:
    """Round-trip stable text for ``e`` (``^`` for powers)."""
    s = _printer.doprint(sp.sympify(e)).replace("**", "^")
    if dep != "u":
        s = re.sub(r"\bu(?=(_[tx]+)?\b)", dep, s)
    return s


# --------------------------------------------------------------------------
# calculus


def partial(e, v):
    """Partial derivative with all other coordinates held fixed."""
    return sp.expand(sp.diff(e, v))


def substitute(e, bindings: Mapping):
    """Simultaneous substitution of coordinates.

    Bindings are read against the original ``e`` so a target occurring in
    another binding is never substituted twice.  Coordinates that are
    arguments of an opaque function cannot be substituted.
    """
    e = sp.sympify(e)
    if not bindings:
        return e
    for f in e.atoms(AppliedUndef):
        clash = set(f.args) & set(bindings)
        if clash:
            raise ValueError(
                f"cannot substitute {sorted(map(str, clash))} inside opaque {f.func}")
    return normalize(e.xreplace({k: sp.sympify(v) for k, v in bindings.items()}))


def shift_jets(e, depth: int):
    """Rename every x-jet u_i to u_{i+depth} (used for v = u_x, v = u_xxx)."""
    e = sp.sympify(e)
    binds = {}
    for s in free_jets(e):
        a, i = jet_index(s)
        if a:
            raise ValueError("shift_jets expects x-jets only")
        binds[s] = U(0, i + depth)
    return e.xreplace(binds)


# --------------------------------------------------------------------------
# zero testing and normalization


def expand_lazy(e):
    """expand() that leaves compound denominators (a + b)**-n unexpanded.

    Fully expanding large denominators dominates the cost on rational
    coefficients; the zero test clears denominators anyway.
    """
    e = sp.sympify(e)
    dens = {p.base for p in e.atoms(sp.Pow)
            if p.base.is_Add and p.exp.is_Integer and p.exp < 0}
    if not dens:
        return sp.expand(e)
    fwd = {b: sp.Dummy("den") for b in dens}
    back = {d: sp.expand(b) for b, d in fwd.items()}
    return sp.expand(e.xreplace(fwd)).xreplace(back)


class Inconclusive(ArithmeticError):
    """Raised when a zero test cannot be decided within the fragment."""


def _opaque_to_symbols(e):
    atoms = sorted(opaque_atoms(e), key=sp.default_sort_key)
    # replace derivatives before the functions they contain
    atoms.sort(key=lambda a: 0 if isinstance(a, sp.Derivative) else 1)
    back = {}
    fwd = {}
    for k, a in enumerate(atoms):
        d = sp.Dummy(f"op{k}")
        fwd[a] = d
        back[d] = a
    return e.xreplace(fwd) if fwd else e, back


def _radical_basis(e):
    """Rewrite rational powers over fresh positive symbols.

    Returns ``(expr, back, relations)``.  Symbol radicands ``s`` become
    ``w**N`` where ``N`` clears every exponent denominator of ``s``; compound
    radicands ``b`` are replaced by ``w`` with the relation ``w**N = b``.
    """
    pows = [p for p in e.atoms(sp.Pow)
            if p.exp.is_Rational and not p.exp.is_Integer and not p.base.is_Number]
    by_base: dict = {}
    for p in pows:
        by_base.setdefault(p.base, []).append(p.exp.q)
    back = {}
    relations = []
    sym_map = {}
    for b, qs in by_base.items():
        if b.is_Symbol:
            n = reduce(lcm, qs, 1)
            w = sp.Dummy(f"r_{b}", positive=True)
            sym_map[b] = w ** n
            back[w] = b ** sp.Rational(1, n)
    if sym_map:
        e = e.xreplace(sym_map)
    # compound bases after the symbol rewrite
    pows = [p for p in e.atoms(sp.Pow)
            if p.exp.is_Rational and not p.exp.is_Integer and not p.base.is_Number]
    by_base = {}
    for p in pows:
        by_base.setdefault(p.base, []).append(p)
    rep = {}
    for b, ps in by_base.items():
        n = reduce(lcm, [p.exp.q for p in ps], 1)
        w = sp.Dummy("rb", positive=True)
        for p in ps:
            rep[p] = w ** (p.exp * n)
        relations.append((w, n, b))
        back[w] = b ** sp.Rational(1, n)
    if rep:
        e = e.xreplace(rep)
    return e, back, relations


def _reduce_relations(num, relations):
    for w, n, b in relations:
        if not num.has(w):
            continue
        poly = sp.Poly(num, w)
        acc = sp.Integer(0)
        for (k,), c in poly.terms():
            acc += c * w ** (k % n) * b ** (k // n)
        num = sp.numer(sp.together(sp.expand(acc)))
    return sp.expand(num)


def _eisenstein_ok(relations) -> bool:
    # w**n - b is irreducible when some prime factor of b occurs exactly once
    if len(relations) != 1:
        return False
    w, n, b = relations[0]
    if b.has(*[r[0] for r in relations]):
        return False
    num, den = sp.fraction(sp.together(b))
    for part in (num, den):
        _, facs = sp.factor_list(part)
        if any(m == 1 and f.free_symbols for f, m in facs):
            return True
    return False


def _laurent_canonical(e) -> bool:
    """True when expand() is already canonical: no compound denominators."""
    for p in e.atoms(sp.Pow):
        if p.base.is_Symbol or (p.base.is_Number and p.exp.is_Rational):
            continue
        if not (p.exp.is_Integer and p.exp > 0):
            return False
    return not e.atoms(sp.log, sp.exp)


def is_zero(e, strict: bool = False) -> Optional[bool]:
    """Exact zero test.

    Returns True or False when decided and None when the test is not
    complete for ``e`` (several dependent radicands, transcendental atoms).
    With ``strict=True`` an undecided case raises :class:`Inconclusive`.
    """
    e = expand_lazy(e)
    if e == 0:
        return True
    e, _ = _opaque_to_symbols(e)
    if _laurent_canonical(e):
        return False
    r, _, relations = _radical_basis(e)
    num = sp.numer(sp.together(r))
    num = sp.expand(num)
    if relations:
        num = _reduce_relations(num, relations)
    if num == 0:
        return True
    if num.atoms(sp.log, sp.exp) or (relations and not _eisenstein_ok(relations)):
        if strict:
            raise Inconclusive(f"cannot decide whether {e} vanishes")
        return None
    return False


def normalize(e):
    """Canonical representative of ``e``.

    Laurent-type expressions come back fully expanded; anything with a
    compound denominator is returned as a single cancelled fraction.
    """
    e = expand_lazy(e)
    if e == 0 or _laurent_canonical(_opaque_to_symbols(e)[0]):
        return e
    e2, back_op = _opaque_to_symbols(e)
    r, back, relations = _radical_basis(e2)
    num, den = sp.fraction(sp.cancel(sp.together(r)))
    if relations:
        num = _reduce_relations(num, relations)
    num, den = sp.expand(num), sp.expand(den)
    if num == 0:
        return sp.Integer(0)
    back_all = dict(back)
    out_num = num.xreplace(back_all).xreplace(back_op)
    out_den = den.xreplace(back_all).xreplace(back_op)
    if not den.is_Add:
        return sp.expand(out_num / out_den)
    # a factored denominator keeps later derivatives small
    return out_num / sp.factor(out_den)
