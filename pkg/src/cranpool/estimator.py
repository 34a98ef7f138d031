"""Estimator-style front end so the optimizer composes with sklearn tooling.

``SpectrumPoolingOptimizer`` is a standard estimator: hyperparameters in
``__init__`` (visible to ``get_params``/``set_params``/``clone``), problem
data passed to ``fit``, results exposed as trailing-underscore attributes.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from . import metrics, optimizer
from .model import ChannelSet
from .optimizer import SCHEMES


def check_channel_set(X) -> ChannelSet:
    """Validate that X is a well-formed ChannelSet with finite channels."""
    if not isinstance(X, ChannelSet):
        raise TypeError(
            f"expected a ChannelSet, got {type(X).__name__}; build one with "
            "generate_channels or channel_set_from_links")
    sc = X.scenario
    for j in range(2):
        for k in range(sc.n_ues[j]):
            for i in range(2):
                for r in range(sc.n_rus[i]):
                    vec = X.h[j][k][i][r]
                    if vec.shape != (sc.n_antennas[i][r],):
                        raise ValueError(
                            f"channel ({j},{k},{i},{r}) has shape {vec.shape}")
                    if not np.all(np.isfinite(vec.view(float))):
                        raise ValueError(
                            f"channel ({j},{k},{i},{r}) has non-finite entries")
    return X


class SpectrumPoolingOptimizer(BaseEstimator):
    """Joint bandwidth/power/quantizer optimizer with an estimator API.

    Parameters mirror the optimizer configuration; ``fit`` consumes a
    :class:`~cranpool.model.ChannelSet` and stores the optimized design and
    its iteration trace.

    Attributes set by ``fit``: ``design_``, ``trace_``, ``n_iter_``,
    ``sum_rate_``, ``secrecy_sum_rate_``, ``report_``.
    """

    def __init__(self, scheme: str = "optimized-pooling",
                 max_outer_iters: int = 100, rel_obj_tol: float = 1e-4,
                 convergence_window: int = 3, subsolver_tol: float = 1e-7,
                 eps_shared_hz: float = 1.0, max_init_shrink: int = 60):
        self.scheme = scheme
        self.max_outer_iters = max_outer_iters
        self.rel_obj_tol = rel_obj_tol
        self.convergence_window = convergence_window
        self.subsolver_tol = subsolver_tol
        self.eps_shared_hz = eps_shared_hz
        self.max_init_shrink = max_init_shrink

    def _config(self) -> optimizer.OptimizerConfig:
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")
        return optimizer.OptimizerConfig(
            scheme=self.scheme,
            max_outer_iters=self.max_outer_iters,
            rel_obj_tol=self.rel_obj_tol,
            convergence_window=self.convergence_window,
            subsolver_tol=self.subsolver_tol,
            eps_shared_hz=self.eps_shared_hz,
            max_init_shrink=self.max_init_shrink,
        )

    def fit(self, X: ChannelSet, y=None):
        X = check_channel_set(X)
        scenario = X.scenario
        design, trace = optimizer.optimize(X, scenario, self._config())
        self.design_ = design
        self.trace_ = trace
        self.n_iter_ = len(trace)
        self.sum_rate_ = design.sum_rate()
        self.secrecy_sum_rate_ = metrics.secrecy_sum_rate(design, scenario)
        self.report_ = metrics.constraint_report(X, scenario, design)
        return self

    def score(self, X=None, y=None) -> float:
        """Final sum-rate in bits/s of the fitted design."""
        if not hasattr(self, "design_"):
            raise NotFittedError("call fit before score")
        return self.sum_rate_
