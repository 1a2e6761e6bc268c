"""Excursions of one-dimensional diffusions: analytic solvers, samplers and checks."""
from .spec import DiffusionSpec, SpecError, absorbed_brownian, bessel3, brownian, build_spec, resolve_spec
from .eigen import ruin_function, solve_eigenfunctions

__all__ = [
    "DiffusionSpec", "SpecError", "absorbed_brownian", "bessel3", "brownian", "build_spec", "resolve_spec",
    "ruin_function", "solve_eigenfunctions",
]
