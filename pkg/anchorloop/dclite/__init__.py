"""Minimal distributional-clause engine: conditional random variables, forward sampling, queries."""

from .distributions import Distribution, Finite, Gaussian, Poisson, Uniform, density_at, make_distribution
from .program import Clause, Program, load_program
from .sampler import Event, QueryResult, World, query, sample_values, sample_world

__all__ = [
    "Distribution",
    "Finite",
    "Gaussian",
    "Poisson",
    "Uniform",
    "density_at",
    "make_distribution",
    "Clause",
    "Program",
    "load_program",
    "Event",
    "QueryResult",
    "World",
    "query",
    "sample_values",
    "sample_world",
]
