"""Regression-enhanced convolution density estimation with fast Gauss transforms."""

__version__ = "0.1.0"

from .bandwidth import BandwidthRule, bandwidth_conv, bandwidth_rp
from .datagen import (
    AuxiliarySample,
    CompleteSample,
    ScenarioSpec,
    generate_scenario,
    preset,
    sample_distribution,
)
from .estimators import DensityEstimate, Grid, estimate_conv, estimate_rp
from .gausstransform import Backend, GaussTransformProblem, gt_exact, gt_fft, gt_ifgt
from .harness import (
    MiseCell,
    ReferenceDensity,
    convergence_slopes,
    ise,
    mise_study,
    reference_density,
    timing_bench,
)
from .regression import RegressionFit, fit_ols, predict

__all__ = [
    "AuxiliarySample",
    "Backend",
    "BandwidthRule",
    "CompleteSample",
    "DensityEstimate",
    "GaussTransformProblem",
    "Grid",
    "MiseCell",
    "ReferenceDensity",
    "RegressionFit",
    "ScenarioSpec",
    "bandwidth_conv",
    "bandwidth_rp",
    "convergence_slopes",
    "estimate_conv",
    "estimate_rp",
    "fit_ols",
    "generate_scenario",
    "gt_exact",
    "gt_fft",
    "gt_ifgt",
    "ise",
    "mise_study",
    "predict",
    "preset",
    "reference_density",
    "sample_distribution",
    "timing_bench",
]
