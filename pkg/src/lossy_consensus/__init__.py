"""Rate-optimized quantized average consensus."""

__version__ = "0.1.0"

from .ggp import RateAllocation, optimize, sweep_total_cost  # noqa: E402
from .graph import Topology, WeightMatrix, generate_rgg_torus, max_degree_weights  # noqa: E402
from .heuristic import IntegerSchedule, build_trellis, exhaustive_search, search  # noqa: E402
from .rd_models import RdModel  # noqa: E402
from .state_evolution import DistortionSchedule, InfeasibleError  # noqa: E402

__all__ = [
    "DistortionSchedule",
    "InfeasibleError",
    "IntegerSchedule",
    "RateAllocation",
    "RdModel",
    "Topology",
    "WeightMatrix",
    "build_trellis",
    "exhaustive_search",
    "generate_rgg_torus",
    "max_degree_weights",
    "optimize",
    "search",
    "sweep_total_cost",
]
