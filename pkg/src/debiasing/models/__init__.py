from .data import (
    KINDS,
    Dataset,
    generate_synthetic,
    iter_rows,
    read_dataset,
    write_dataset,
    write_synthetic,
)
from .gaussian import GaussianMeanModel, expected_posterior_mean, gaussian_mean_expectation, nearest_spd
from .loggaussian import LogGaussianModel, loggaussian_sigma_expectation
from .logistic import LogisticRegressionModel, add_bias_column, logistic_weight_expectation
from .rff import (
    RffRegressionModel,
    draw_rff_basis,
    mse,
    rff_dual_predictive_mean,
    rff_feature_map,
    rff_features,
    rff_predictive_mean,
)

__all__ = [
    "KINDS",
    "Dataset",
    "GaussianMeanModel",
    "LogGaussianModel",
    "LogisticRegressionModel",
    "RffRegressionModel",
    "add_bias_column",
    "draw_rff_basis",
    "expected_posterior_mean",
    "gaussian_mean_expectation",
    "generate_synthetic",
    "iter_rows",
    "logistic_weight_expectation",
    "loggaussian_sigma_expectation",
    "mse",
    "nearest_spd",
    "read_dataset",
    "rff_dual_predictive_mean",
    "rff_feature_map",
    "rff_features",
    "rff_predictive_mean",
    "write_dataset",
    "write_synthetic",
]
