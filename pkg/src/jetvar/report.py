"""Certificates and structured reports."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Optional

import sympy as sp

from . import __version__
from .expr import format_expr, is_zero, normalize


def _render(obj, dep="u"):
    if obj is None:
        return None
    if hasattr(obj, "format") and not isinstance(obj, str):
        try:
            return obj.format(dep)
        except TypeError:
            return obj.format()
    if isinstance(obj, sp.Basic):
        return format_expr(normalize(obj), dep)
    if isinstance(obj, (list, tuple)):
        return [_render(o, dep) for o in obj]
    if isinstance(obj, dict):
        return {k: _render(v, dep) for k, v in obj.items()}
    return obj


def zero_test(obj) -> Optional[bool]:
    """Exact zero test for an expression, form or operator."""
    if hasattr(obj, "is_zero_form"):
        return obj.is_zero_form()
    if hasattr(obj, "terms") and hasattr(obj, "adjoint"):
        return obj.is_zero()
    return is_zero(obj)


@dataclass
class Certificate:
    """A named residual that must vanish; ``ok`` is None when undecided."""
    name: str
    residual: Any
    ok: Optional[bool]

    @staticmethod
    def of(name: str, residual) -> "Certificate":
        return Certificate(name, residual, zero_test(residual))

    @staticmethod
    def flag(name: str, value: Optional[bool], detail: Any = None) -> "Certificate":
        """A boolean fact recorded as a certificate (residual is the detail)."""
        return Certificate(name, detail, value)

    def to_json(self, dep="u") -> dict:
        res = self.residual
        if self.ok is True and res is not None and not isinstance(res, (bool, str)):
            res = "0"
        return {"name": self.name, "residual": _render(res, dep), "ok": self.ok}


def combine(oks) -> Optional[bool]:
    """False beats None beats True."""
    oks = list(oks)
    if any(o is False for o in oks):
        return False
    if any(o is None for o in oks):
        return None
    return True


@dataclass
class Report:
    check: str
    inputs: dict = field(default_factory=dict)
    certificates: list = field(default_factory=list)
    witnesses: dict = field(default_factory=dict)
    verdict: Optional[str] = None
    notes: list = field(default_factory=list)
    timing: float = 0.0
    dep: str = "u"

    def add(self, cert: Certificate) -> Certificate:
        self.certificates.append(cert)
        return cert

    @property
    def ok(self) -> Optional[bool]:
        return combine(c.ok for c in self.certificates)

    def exit_code(self) -> int:
        ok = self.ok
        return 0 if ok is True else (2 if ok is None else 1)

    def to_json(self, timing: bool = True) -> dict:
        out = {
            "check": self.check,
            "inputs": _render(self.inputs, self.dep),
            "certificates": [c.to_json(self.dep) for c in self.certificates],
            "witnesses": _render(self.witnesses, self.dep),
            "verdict": self.verdict,
            "ok": self.ok,
            "notes": list(self.notes),
            "version": __version__,
        }
        if timing:
            out["timing"] = round(self.timing, 3)
        return out

    def dumps(self, timing: bool = True) -> str:
        return json.dumps(self.to_json(timing), indent=2, sort_keys=True)

    def text(self) -> str:
        lines = [f"{self.check}: {self.verdict or ''}".rstrip()]
        for c in self.certificates:
            mark = {True: "ok", False: "FAIL", None: "inconclusive"}[c.ok]
            lines.append(f"  [{mark}] {c.name}")
            if c.ok is not True and c.residual is not None:
                lines.append(f"      residual: {_render(c.residual, self.dep)}")
        for k, v in self.witnesses.items():
            lines.append(f"  {k} = {_render(v, self.dep)}")
        for n in self.notes:
            lines.append(f"  note: {n}")
        return "\n".join(lines)
