"""Kernel estimators for causal effect estimation with proxy variables."""

from .data import Dataset, DoCurve, SchemaError
from .kernels import KernelSpec, KernelSpecs, gram, hadamard, median_heuristic
from .numerics import (
    NystromFactors,
    khatri_rao_cols,
    nystrom,
    solve_psd,
    woodbury_regularized_inverse_apply,
)
from .kpv import (
    KpvModel,
    Stage1Fit,
    fit_kpv,
    kpv_ate,
    kpv_fit,
    kpv_h,
    kpv_select_lambdas,
    stage1_embedding,
    stage1_fit,
)
from .pmmr import (
    PmmrModel,
    fit_pmmr,
    pmmr_ate,
    pmmr_fit,
    pmmr_fit_nystrom,
    pmmr_h,
    pmmr_select_lambda,
    vstat_risk,
)
from .baselines import (
    RidgeModel,
    adjusted_ate,
    kernel_ridge_fit,
    kernel_ridge_predict,
    linear_two_stage,
)
from .synthdata import DiscreteToy, SyntheticDraw, gen_discrete_toy, gen_main, true_ate
from .evaluation import ExperimentResult, cmae, run_table

__version__ = "0.1.0"

__all__ = [
    "Dataset",
    "DoCurve",
    "SchemaError",
    "KernelSpec",
    "KernelSpecs",
    "gram",
    "hadamard",
    "median_heuristic",
    "NystromFactors",
    "khatri_rao_cols",
    "nystrom",
    "solve_psd",
    "woodbury_regularized_inverse_apply",
    "KpvModel",
    "Stage1Fit",
    "fit_kpv",
    "kpv_ate",
    "kpv_fit",
    "kpv_h",
    "kpv_select_lambdas",
    "stage1_embedding",
    "stage1_fit",
    "PmmrModel",
    "fit_pmmr",
    "pmmr_ate",
    "pmmr_fit",
    "pmmr_fit_nystrom",
    "pmmr_h",
    "pmmr_select_lambda",
    "vstat_risk",
    "RidgeModel",
    "adjusted_ate",
    "kernel_ridge_fit",
    "kernel_ridge_predict",
    "linear_two_stage",
    "DiscreteToy",
    "SyntheticDraw",
    "gen_discrete_toy",
    "gen_main",
    "true_ate",
    "ExperimentResult",
    "cmae",
    "run_table",
    "__version__",
]
