"""fragrec: reference-guided reordering of sequence fragments.

A toolkit for simulating the reordering of shuffled, equal-length fragments
of an iid sequence with the help of a noisy reference copy, together with
the rate functions that govern when maximum-likelihood reordering succeeds.
"""

from .model import (
    Alphabet,
    ChannelKernel,
    FragmentConfig,
    Pmf,
    RngStream,
    SourceSpec,
    ValidationError,
    collision_entropy,
    renyi_entropy,
    sample_sequence,
    shannon_entropy,
)
from .distances import (
    DistortionMeasure,
    SymbolDistanceTable,
    chernoff_table,
    fragment_distance,
    fragment_distortion,
    joint_type,
    type_distance,
    type_distortion,
)
from .rates import (
    BhattacharyyaKernel,
    RateReport,
    binary_symmetric_closed_forms,
    broken_cycle_exponent,
    critical_beta,
    cycle_bound_margins,
    cycle_exponent,
    min_pair_distance_at_distortion,
    rate_report,
    symmetric_channel_distance,
    tradeoff_curve,
    transposition_exponent,
    transposition_exponent_mirror_descent,
    transposition_exponent_split,
)
from .sequences import (
    Histogram,
    ShuffledInstance,
    cardinality_concentration_experiment,
    fragment_and_shuffle,
    histogram,
    log_num_reconstructions,
)
from .decoder import (
    Reconstruction,
    WeightMatrix,
    build_weights,
    is_failure,
    reconstruct,
    solve_assignment,
    true_assignment,
)
from .experiments import (
    CellResult,
    SweepPlan,
    estimate_fp,
    exact_failure_probability,
    exact_transposition_probability,
    pairwise_probability_table,
    run_sweep,
    slope_fit,
    tradeoff_experiment,
)

__version__ = "0.1.0"
