"""Separated field equations on the 2+2+2+2 shell ansatz and their exact solutions."""
from .ansatz import (
    ANSATZ_VARS,
    COORDS,
    SHELLS,
    GeneratingData,
    ShellAnsatz,
    SourceSpec,
    source_algebra,
    source_inverse,
)
from .constraints import ConstraintReport, lc_constraints_check
from .embed import curvature_cross_check, embed_shell
from .fields import Antiderivative, DerivField, adaptive_simpson, derivative, integral
from .generate import default_psi, generate_solution
from .grid import screen, tensor_grid
from .polarization import polarization_deform
from .residuals import FAMILIES, ResidualReport, shell_residuals

__all__ = [
    "ANSATZ_VARS", "Antiderivative", "COORDS", "ConstraintReport", "DerivField", "FAMILIES",
    "GeneratingData", "ResidualReport", "SHELLS", "ShellAnsatz", "SourceSpec", "adaptive_simpson",
    "curvature_cross_check", "default_psi", "derivative", "embed_shell", "generate_solution",
    "integral", "lc_constraints_check", "polarization_deform", "screen", "shell_residuals",
    "source_algebra", "source_inverse", "tensor_grid",
]
