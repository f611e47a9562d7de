"""Network candidate search: scaled-down CNN candidates, analytic costing,
resource grouping, and a resumable elimination tournament."""

__version__ = "0.1.0"

from .arch import (  # noqa: E402,F401
    ArchDescriptor,
    StageSpec,
    baseline_b0,
    build_model,
    compound_round,
    hf_transform,
    nearest_power_of_two,
    round_channels,
)
# the cost() function lives in ncs.cost; not re-exported here so the bare
# name keeps pointing at the submodule
from .cost import CostReport, cost_batch  # noqa: F401
from .errors import (  # noqa: F401
    ConfigError,
    DomainError,
    EvaluatorError,
    InvariantError,
    NcsError,
    ProtocolError,
    StructureError,
)
from .pool import Candidate, Group, PoolStats, generate_pool, group, standardize  # noqa: F401
from .scaling import ScalingLadder, derive_ladder  # noqa: F401
from .tournament import (  # noqa: F401
    TournamentState,
    avg_accuracy,
    champions,
    eliminate,
    initial_state,
    match_percentage,
    rank,
    run_round,
    run_search,
)
