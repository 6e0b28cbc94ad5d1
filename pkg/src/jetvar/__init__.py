"""Variational bicomplex calculus for scalar evolution equations u_t = K."""

__version__ = "0.1.0"

from .expr import (T, X, U, Decls, ParseError, format_expr, is_zero, normalize,  # noqa: E402
                   parse_expr, partial, substitute)
from .jet import (DiffOperator, EqContext, Space, SpaceError, frechet,  # noqa: E402
                  linearization, parse_operator, total_derivative)
from .forms import (Form, d_horizontal, d_vertical, euler_lagrange, parse_form,  # noqa: E402
                    vertical_homotopy, horizontal_integrate)

__all__ = [
    "T", "X", "U", "Decls", "ParseError", "format_expr", "is_zero", "normalize",
    "parse_expr", "partial", "substitute", "DiffOperator", "EqContext", "Space",
    "SpaceError", "frechet", "linearization", "parse_operator", "total_derivative",
    "Form", "d_horizontal", "d_vertical", "euler_lagrange", "parse_form",
    "vertical_homotopy", "horizontal_integrate",
]
