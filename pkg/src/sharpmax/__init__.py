"""Numerical verification of the sharp Lp bound for the centered maximal
operator on peak-shaped functions."""

from .constants import alpha0_of_p, beta_of_alpha, c_p, certify_lemma6, r_of_alpha, tau_of_p
from .funcrep import PiecewiseLinearFn, is_peak_shaped, lp_norm_p, make_plf, random_peak_shaped, truncated_power
from .maxop import GridSpec, maximal_at, maximal_profile, norm_ratio, structural_checks, weak_type_ratio
from .variational import VariationalConfig, certify_chain

__all__ = [
    "GridSpec",
    "PiecewiseLinearFn",
    "VariationalConfig",
    "alpha0_of_p",
    "beta_of_alpha",
    "c_p",
    "certify_chain",
    "certify_lemma6",
    "is_peak_shaped",
    "lp_norm_p",
    "make_plf",
    "maximal_at",
    "maximal_profile",
    "norm_ratio",
    "r_of_alpha",
    "random_peak_shaped",
    "structural_checks",
    "tau_of_p",
    "truncated_power",
    "weak_type_ratio",
]
