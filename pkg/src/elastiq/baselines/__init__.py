"""Reference estimators: local linear regression, Kalman filtering, two-stage dense networks."""

from .kfa import KfaConfig, kalman_filter, kfa_estimate
from .llr import LlrConfig, llr_estimate, local_linear_fit
from .snn2 import Snn2Config, Snn2Model, anchor_features, snn2_estimate, snn2_fit

__all__ = [
    "KfaConfig",
    "LlrConfig",
    "Snn2Config",
    "Snn2Model",
    "anchor_features",
    "kalman_filter",
    "kfa_estimate",
    "llr_estimate",
    "local_linear_fit",
    "snn2_estimate",
    "snn2_fit",
]
