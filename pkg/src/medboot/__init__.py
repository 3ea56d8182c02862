"""Mediation analysis with missing data: multiple imputation inside the bootstrap."""
from .bootstrap import BootstrapReport, analyze, bc_interval, bootstrap_resample, bootstrap_se
from .dataset import Dataset, MissingPattern, from_columns, load_dataset, missing_patterns, save_dataset
from .estimator import PARAMS, SampleMoments, ThetaVector, fit_complete, pool_point_estimates, sobel_se
from .imputer import ImputationConfig, MvnParams, em_mvn, impute
from .simlab import (
    GenParams,
    StudyConfig,
    StudyReport,
    evaluate_bias,
    evaluate_coverage,
    evaluate_power,
    generate_mediation_data,
    imputation_sensitivity,
    impose_missingness,
    run_study,
)

__version__ = "0.1.0"
