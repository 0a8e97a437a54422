"""Noisy geometrically-local quantum circuits: exact dense simulation,
sequential qudit-by-qudit sampling from local conditionals, stabilizer
Monte-Carlo experiments, and Markov-length diagnostics."""

from .circuit import (
    CircuitSpec,
    Gate,
    InteractionGraph,
    ball,
    boundary_size,
    brickwork_circuit,
    build_interaction_graph,
    circuit_from_dict,
    circuit_to_dict,
    graph_distance,
    load_circuit,
    reseed_circuit,
    save_circuit,
)
from .densesim import (
    DensityPatch,
    DistributionTable,
    apply_depolarizing,
    apply_gate,
    apply_unitary,
    conditional_distribution,
    dephase,
    full_distribution,
    output_state,
    partial_trace,
    run_cone,
)
from .diagnostics import (
    BoundReport,
    DbarEstimate,
    MarkovLengthFit,
    TripartitionStats,
    bound_cmi_threshold,
    bound_uniform,
    cmi,
    cmi_threshold,
    dbar_haar_mc,
    fit_markov_length,
    markov_gap,
    potts_large_h,
    tripartition_stats,
    tvd,
    tvd_to_uniform,
)
from .errors import (
    BudgetExceeded,
    CircuitFormatError,
    InsufficientData,
    NoisyCircuitsError,
    NormalizationError,
    ZeroConditionalWarning,
)
from .lightcone import LightCone, backward_cone, cone_cost
from .sampler import (
    SampleTrace,
    ScanPoint,
    markov_scan,
    sample,
    sampler_distribution,
    suggested_radius,
)

__version__ = "0.1.0"
