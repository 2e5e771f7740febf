"""Relative perturbation needed to change a nearest-neighbor rank: model, estimation, validation."""

__version__ = "0.1.0"

from .stats_core import (
    BetaParams,
    ConvergenceError,
    DegenerateSampleError,
    DensityTable2D,
    DomainError,
    EmpiricalDensity1D,
    KsReport,
    beta_pdf,
    inv_reg_inc_beta,
    kde_1d,
    kde_2d,
    ks_statistic,
    reg_inc_beta,
    sample_beta,
    silverman_bandwidth,
)
from .model import (
    AsymptoticDeltaModel,
    Estimate,
    FiniteDeltaModel,
    LidIndex,
    RankPair,
    asymptotic_cdf,
    asymptotic_pdf,
    away_cdf,
    delta_from_distances,
    expectation,
    finite_cdf,
    joint_order_pdf,
    median,
    mode,
    normalize_delta,
    sample_asymptotic,
    sample_away,
    success_probability,
)
from .lid import (
    DegenerateProfileError,
    DeltaSample,
    LidEstimate,
    NeighborProfile,
    ZeroDistanceError,
    bin_by_lid,
    delta_and_lid,
    hill_estimate,
    hill_estimates,
)
from .knn import (
    DatasetFormatError,
    QuerySet,
    TopKResult,
    VectorDataset,
    exhaustive_knn,
    load_dataset,
    read_topk_csv,
    write_dataset,
    write_topk_csv,
)
from .synthetic import (
    ChiLaw,
    DistanceLaw,
    PowerLaw,
    empirical_delta_distribution,
    make_chi_law,
    make_power_law,
    parse_law,
    rv_ratio,
    sample_order_stats,
)
from .pipeline import (
    ComparisonReport,
    ConvergenceTable,
    DeltaSampleSet,
    JointReport,
    BinnedKsTable,
    analyze,
    binned_ks_study,
    compare_to_theory,
    convergence_study,
    joint_compare,
    measure_all,
    measure_array,
    normalize_all,
)
