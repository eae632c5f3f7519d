"""BEAM: a Prolog-subset engine that runs by rewriting an And-Or tree."""

from .manager import Engine, EngineError, Options, RunResult, RunStats, canonical_answer, run_query
from .oracle import DepthExceeded, answer_multiset, audit_trace, sld_solve
from .program import LoadError, parse_program

__version__ = "0.1.0"

__all__ = [
    "Engine",
    "EngineError",
    "LoadError",
    "Options",
    "RunResult",
    "RunStats",
    "DepthExceeded",
    "answer_multiset",
    "audit_trace",
    "canonical_answer",
    "parse_program",
    "run_query",
    "sld_solve",
]
