from .core import (
    ExprError,
    PLACEHOLDERS,
    PoleError,
    RationalExpr,
    const,
    jet_name,
    shift_name,
    sym,
    symbol_key,
    term_count,
)
from .parser import parse
from .printing import to_string

__all__ = [
    "ExprError",
    "PLACEHOLDERS",
    "PoleError",
    "RationalExpr",
    "const",
    "jet_name",
    "parse",
    "shift_name",
    "sym",
    "symbol_key",
    "term_count",
    "to_string",
]
