"""Numerical laboratory for KPP fronts with fat-tailed nonlocal dispersal."""

from fatkpp.kernels import KernelSpec, build_kernel
from fatkpp.gridops import Grid1D, Field, discretize_kernel
from fatkpp.cauchy import SolverConfig, initial_condition, run

__version__ = "0.1.0"

__all__ = [
    "KernelSpec",
    "build_kernel",
    "Grid1D",
    "Field",
    "discretize_kernel",
    "SolverConfig",
    "initial_condition",
    "run",
    "__version__",
]
