"""Estimator-style wrappers around the solvers and the flat distance.

``fit`` takes the initial measure (solvers) or reference measures
(transformer); hyperparameters are constructor arguments, as in sklearn.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .flat import flat_distance
from .linear import SolverConfig, solve_linear
from .model import ModelFunctions, check_model
from .nonlinear import solve_nonlinear
from .validation import check_is_fitted, check_measure, check_measures


class _PopulationSolver(BaseEstimator):
    def __init__(self, model: ModelFunctions = None, dt=1.0 / 64, T=1.0, tol=1e-10, max_iter=100,
                 lam=None, merge_radius=0.0, weight_floor=0.0, quadrature="left", validate=True):
        self.model = model
        self.dt = dt
        self.T = T
        self.tol = tol
        self.max_iter = max_iter
        self.lam = lam
        self.merge_radius = merge_radius
        self.weight_floor = weight_floor
        self.quadrature = quadrature
        self.validate = validate

    def _config(self, **extra):
        return SolverConfig(dt=self.dt, T=self.T, tol=self.tol, max_iter=self.max_iter, lam=self.lam,
                            merge_radius=self.merge_radius, weight_floor=self.weight_floor,
                            quadrature=self.quadrature, **extra)

    def _solve(self, mu0, cfg):
        raise NotImplementedError

    def fit(self, X, y=None):
        """Solve from the initial measure ``X``."""
        if not isinstance(self.model, ModelFunctions):
            raise TypeError("model must be a ModelFunctions instance")
        mu0 = check_measure(X, self.model.space)
        if self.validate:
            self.validation_ = check_model(self.model, T=self.T)
        self.path_, self.diagnostics_ = self._solve(mu0, self._config_for_fit())
        self.residuals_ = list(self.diagnostics_.residuals)
        self.n_iter_ = self.diagnostics_.iterations
        return self

    def _config_for_fit(self):
        return self._config()

    def predict(self, X):
        """Snapshots at the requested times (left-constant in time)."""
        check_is_fitted(self, "path_")
        times = np.atleast_1d(np.asarray(X, dtype=float))
        return [self.path_.at(t) for t in times]

    def masses(self):
        check_is_fitted(self, "path_")
        return self.path_.masses()


class LinearPopulationSolver(_PopulationSolver):
    """Linear model solved by the Banach iteration of the representation formula."""

    def _solve(self, mu0, cfg):
        return solve_linear(mu0, self.model, cfg)


class NonlinearPopulationSolver(_PopulationSolver):
    """Measure-dependent model solved by freeze-and-iterate."""

    def __init__(self, model: ModelFunctions = None, dt=1.0 / 64, T=1.0, tol=1e-10, max_iter=100,
                 lam=None, merge_radius=0.0, weight_floor=0.0, quadrature="left", validate=True,
                 outer_tol=1e-8, outer_max_iter=50, outer_lam=None):
        super().__init__(model, dt, T, tol, max_iter, lam, merge_radius, weight_floor, quadrature, validate)
        self.outer_tol = outer_tol
        self.outer_max_iter = outer_max_iter
        self.outer_lam = outer_lam

    def _config_for_fit(self):
        return self._config(outer_tol=self.outer_tol, outer_max_iter=self.outer_max_iter,
                            outer_lam=self.outer_lam)

    def _solve(self, mu0, cfg):
        path, diag = solve_nonlinear(mu0, self.model, cfg)
        self.outer_residuals_ = list(diag.outer_residuals)
        self.n_outer_iter_ = diag.outer_iterations
        return path, diag


class FlatDistanceTransformer(TransformerMixin, BaseEstimator):
    """Map measures to their flat distances from a set of reference measures.

    ``fit`` stores the references; ``transform`` returns an
    ``(n_samples, n_references)`` array.
    """

    def __init__(self, space=None):
        self.space = space

    def fit(self, X, y=None):
        refs = check_measures(X, self.space)
        self.references_ = refs
        self.space_ = refs[0].space
        self.n_features_out_ = len(refs)
        return self

    def transform(self, X):
        check_is_fitted(self, "references_")
        items = check_measures(X, self.space_)
        return np.array([[flat_distance(m, r) for r in self.references_] for m in items])
