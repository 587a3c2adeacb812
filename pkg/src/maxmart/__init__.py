"""Max-martingales, Skorokhod embeddings and Brownian supremum/local-time laws.

Exact finite-atom measure algebra, a reproducible Monte-Carlo path engine,
and checkers for the associated identities and bounds.
"""

import os as _os
import warnings as _warnings

# allow --threads above the core count; the active count is set below
_os.environ.setdefault("NUMBA_NUM_THREADS", str(max(8, _os.cpu_count() or 1)))
_warnings.filterwarnings("ignore", message=".*TBB threading layer.*")

from maxmart.measures import AtomicMeasure, empirical_measure, excess_wealth_leq  # noqa: E402
from maxmart.paths import PathGrid, SimConfig, set_threads, simulate, simulate_batch  # noqa: E402
from maxmart.piecewise import PiecewiseFn  # noqa: E402
from maxmart.rules import (  # noqa: E402
    AzemaYor,
    FirstExit,
    FixedTime,
    HittingLevel,
    RandomizedAbsHitting,
    StoppingRule,
    ValloisObloj,
)
from maxmart.stats import StatReport  # noqa: E402

set_threads()

__all__ = [
    "AtomicMeasure",
    "AzemaYor",
    "FirstExit",
    "FixedTime",
    "HittingLevel",
    "PathGrid",
    "PiecewiseFn",
    "RandomizedAbsHitting",
    "SimConfig",
    "StatReport",
    "StoppingRule",
    "ValloisObloj",
    "empirical_measure",
    "excess_wealth_leq",
    "set_threads",
    "simulate",
    "simulate_batch",
]
__version__ = "0.1.0"
