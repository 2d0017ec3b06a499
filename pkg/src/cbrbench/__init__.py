"""Clustered-confounding dose-response benchmark and estimators.

Generates semi-synthetic dose-response data with cluster-level confounding
and an exact counterfactual oracle, trains a representation-balancing
estimator plus baselines, and evaluates counterfactual error (MISE) across
confounding regimes.
"""

__version__ = "0.1.0"

from ._kernels import backend_name

__all__ = ["backend_name", "__version__"]
