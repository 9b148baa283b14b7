"""Switching-control toolkit: exact solvers for the switcher problem, the
budget-constrained variant, desk-scale environments and tabular training
loops, all backed by the C++ core."""

from londi._core import *  # noqa: F401,F403
from londi._core import __version__  # noqa: F401
