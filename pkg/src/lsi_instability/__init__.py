"""Numerical instability checks for the Gaussian log-Sobolev inequality."""

__version__ = "0.1.0"

from .logvalue import LogValue
from .quadrature import DEFAULT_CONFIG, QuadratureConfig
from .families import (
    PiecewiseLogDensity,
    make_bump_family,
    make_heavytail_family,
    make_shifted_gaussian,
    make_standard_gaussian,
)
from .functionals import (
    Divergent,
    FunctionalReport,
    compute_report,
    fisher_info,
    lp_dist_to_one,
    lsi_deficit,
    moment,
    rel_entropy,
    tensorize,
)
from .transport import hwi_chain, talagrand_deficit, wasserstein_p
from .uncertainty import (
    WeightSpec,
    bhi_deficit,
    dist_to_optimizers,
    fourier_transform,
    lsi_to_bhi_transform,
    weighted_lp_norm,
)
from .asymptotics import fit_expansion, verify_instability_suite, verify_theorem1

__all__ = [
    "__version__",
    "LogValue",
    "QuadratureConfig",
    "DEFAULT_CONFIG",
    "PiecewiseLogDensity",
    "make_bump_family",
    "make_heavytail_family",
    "make_shifted_gaussian",
    "make_standard_gaussian",
    "Divergent",
    "FunctionalReport",
    "compute_report",
    "fisher_info",
    "rel_entropy",
    "lsi_deficit",
    "moment",
    "lp_dist_to_one",
    "tensorize",
    "wasserstein_p",
    "talagrand_deficit",
    "hwi_chain",
    "WeightSpec",
    "lsi_to_bhi_transform",
    "fourier_transform",
    "bhi_deficit",
    "weighted_lp_norm",
    "dist_to_optimizers",
    "fit_expansion",
    "verify_theorem1",
    "verify_instability_suite",
]
