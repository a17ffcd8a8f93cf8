"""trajdim: spanning-tree persistence dimension of optimization
trajectories, plus the statistics battery used to judge generalization
measures against the observed gap."""

__version__ = "0.1.0"

from .datasets import Dataset, load_dataset
from .dimension import (
    DEFAULT_SAMPLE_SIZES,
    DimEstimate,
    EstimatorConfig,
    default_sample_sizes,
    estimate_dimension,
    fit_dimension,
    growth_exponent,
)
from .metricspace import (
    DistanceOracle,
    LossMatrix,
    MetricKind,
    WeightTrajectory,
    euclidean_distance,
    loss_pseudo_distance,
    subsample_indices,
)
from .ph0 import (
    Barcode0,
    MstResult,
    minimum_spanning_tree,
    total_persistence,
    vietoris_rips_barcode0,
)
from .records import RunRecord, SchemaError, read_records, write_records
from .stats import (
    CmiTestResult,
    CorrelationReport,
    DegenerateStatisticError,
    PartialCorrResult,
    cmi_local_permutation_test,
    conditional_mutual_information,
    equal_frequency_bins,
    fisher_z_compare,
    granulated_kendall,
    granulated_kendall_detail,
    kendall_tau_b,
    partial_corr,
    spearman,
)
from .trainer import (
    CaptureResult,
    DivergenceError,
    MemoryBudgetError,
    MlpSpec,
    NonConvergenceError,
    SweepConfig,
    SweepResult,
    TrainConfig,
    adversarial_initialization,
    capture,
    compute_measures,
    grid_sweep,
    train_to_convergence,
)
from .trj1 import (
    TrjFormatError,
    read_loss_matrix,
    read_matrix,
    read_trajectory,
    write_loss_matrix,
    write_matrix,
    write_trajectory,
)

__all__ = [name for name in dir() if not name.startswith("_")]
