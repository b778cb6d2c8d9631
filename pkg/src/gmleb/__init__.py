"""General maximum likelihood empirical Bayes estimation of normal means."""
from gmleb._backend import BACKEND
from gmleb.estimators import EstimatorSpec, EstimateResult, gmleb, run_estimator, s_gmleb
from gmleb.mixtures import DiscreteMixture, posterior_mean
from gmleb.npmle import NpmleFit, build_grid_paper, fit_npmle

__all__ = [
    "BACKEND", "DiscreteMixture", "EstimateResult", "EstimatorSpec", "NpmleFit",
    "build_grid_paper", "fit_npmle", "gmleb", "posterior_mean", "run_estimator", "s_gmleb",
]
__version__ = "0.1.0"
