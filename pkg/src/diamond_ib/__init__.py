"""Bounds on the bottleneck rate of a two-relay Gaussian diamond MIMO channel."""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.1.0"

from .channel import ChannelConfig
from .mmse import MmseArtifacts, lemma2_check, mmse_rate
from .qci import QciAllocation, QuantGrid, build_quantile_grid, qci_rate
from .scalar_dib import ScalarDibInstance, ScalarDibSolution, solve_scalar_rate
from .upper_bound import UpperBoundResult, upper_bound_rate

__all__ = [
    "ChannelConfig",
    "MmseArtifacts",
    "QciAllocation",
    "QuantGrid",
    "ScalarDibInstance",
    "ScalarDibSolution",
    "UpperBoundResult",
    "build_quantile_grid",
    "lemma2_check",
    "mmse_rate",
    "qci_rate",
    "solve_scalar_rate",
    "upper_bound_rate",
]
