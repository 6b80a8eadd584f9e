"""Workbench for a call-by-value lambda language with cells and actors."""

from .syntax import Expr, parse, to_text
from .memory import Memory, EMPTY
from .reducer import Description, eval_expr, evaluate, step

__all__ = [
    "Expr",
    "parse",
    "to_text",
    "Memory",
    "EMPTY",
    "Description",
    "eval_expr",
    "evaluate",
    "step",
]
