"""Expression parsing, printing and jet (truncated Taylor) evaluation."""
from .chart import Chart
from .evaluate import PointJet, batch_point, eval_jet, evaluate, evaluate_values
from .expr import (
    Binary,
    Const,
    Expr,
    FieldNode,
    Pow,
    Unary,
    Var,
    as_expr,
    cos,
    exp,
    has_fields,
    is_polynomial_degree_le,
    log,
    sin,
    sqrt,
    to_text,
    variables,
)
from .jet import Jet, JetSpace, blockdiag, contract, jet_space, matinv, matmul
from .parser import parse_expr

__all__ = [
    "Binary", "Chart", "Const", "Expr", "FieldNode", "Jet", "JetSpace", "PointJet",
    "Pow", "Unary", "Var", "as_expr", "batch_point", "blockdiag", "contract", "cos",
    "eval_jet", "evaluate", "evaluate_values", "exp", "has_fields",
    "is_polynomial_degree_le", "jet_space", "log", "matinv", "matmul", "parse_expr",
    "sin", "sqrt", "to_text", "variables",
]
