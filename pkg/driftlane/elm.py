# -*- coding: utf-8 -*-
# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this file,
# You can obtain one at http://mozilla.org/MPL/2.0/.

from __future__ import annotations

from logging import getLogger

import numpy as np
import scipy.linalg
from scipy.special import expit

from driftlane.core import N_CLASSES, Classifier, DriftlaneError, InvalidInputError

logger = getLogger(__name__)


class SingularityError(DriftlaneError):
    pass


class NumericError(DriftlaneError):
    pass


class UninitializedError(DriftlaneError):
    pass


def one_hot_matrix(y):
    y = np.asarray(y, dtype=np.int64)
    targets = np.zeros((len(y), N_CLASSES))
    targets[np.arange(len(y)), y] = 1.0
    return targets


def _solve_symmetric(A, B):
    """Solve A X = B for symmetric A; falls back to LU when A is not positive definite."""
    try:
        factor = scipy.linalg.cho_factor(A)
        return scipy.linalg.cho_solve(factor, B)
    except np.linalg.LinAlgError:
        logger.debug("Cholesky failed, falling back to LU")
        try:
            return scipy.linalg.lu_solve(scipy.linalg.lu_factor(A), B)
        except (np.linalg.LinAlgError, ValueError) as e:
            raise SingularityError(f"Normal matrix is singular: {e}")


class OSELM(Classifier):
    """Online sequential extreme learning machine.

    A fixed random sigmoid hidden layer feeds a linear output layer solved by
    ridge regression on the warm-start set, then updated sample by sample with
    recursive least squares.
    """

    name = "OSELM"

    def __init__(self, hidden_units=1500, ridge=1e-3, standardize=True, seed=0):
        if hidden_units < 1:
            raise ValueError(f"hidden_units must be >= 1, got {hidden_units}")
        if ridge < 0:
            raise ValueError(f"ridge must be >= 0, got {ridge}")
        super().__init__(seed)
        self.hidden_units = hidden_units
        self.ridge = ridge
        self.standardize = standardize
        self.reset(seed)

    def reset(self, seed=None):
        if seed is not None:
            self.seed = seed
        self.input_weights = None
        self.biases = None
        self.beta = None
        self.P = None
        self.center = None
        self.scale = None
        self._warm_x = []
        self._warm_y = []

    @property
    def initialized(self):
        return self.beta is not None

    def _draw_hidden_layer(self, n_features):
        rng = np.random.default_rng(self.seed)
        self.input_weights = rng.uniform(-1.0, 1.0, size=(n_features, self.hidden_units))
        self.biases = rng.uniform(-1.0, 1.0, size=self.hidden_units)

    def _fit_scaler(self, X):
        if self.standardize:
            self.center = X.mean(axis=0)
            std = X.std(axis=0)
            self.scale = np.where(std > 0, std, 1.0)
        else:
            self.center = np.zeros(X.shape[1])
            self.scale = np.ones(X.shape[1])

    def hidden(self, X):
        X = (np.atleast_2d(X) - self.center) / self.scale
        return expit(X @ self.input_weights + self.biases)

    def initialize(self, X, y):
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or len(X) < 1:
            raise InvalidInputError("Initialization needs at least one instance")
        if self.input_weights is None or self.input_weights.shape[0] != X.shape[1]:
            self._draw_hidden_layer(X.shape[1])
        self._fit_scaler(X)

        H = self.hidden(X)
        T = one_hot_matrix(y)
        gram = H.T @ H + self.ridge * np.eye(self.hidden_units)
        if self.ridge == 0 and np.linalg.matrix_rank(H) < self.hidden_units:
            raise SingularityError(
                f"H'H is singular ({len(X)} instances for {self.hidden_units} hidden units); "
                "use a positive ridge"
            )

        P = _solve_symmetric(gram, np.eye(self.hidden_units))
        self.P = (P + P.T) / 2
        self.beta = self.P @ H.T @ T
        self._warm_x, self._warm_y = [], []
        logger.info(f"OS-ELM initialised on {len(X)} instances, {self.hidden_units} hidden units")

    def update(self, x, y):
        h = self.hidden(x)[0]
        Ph = self.P @ h
        denominator = 1.0 + h @ Ph
        P = self.P - np.outer(Ph, Ph) / denominator
        target = np.zeros(N_CLASSES)
        target[int(y)] = 1.0
        beta = self.beta + np.outer(P @ h, target - h @ self.beta)
        if not (np.all(np.isfinite(P)) and np.all(np.isfinite(beta))):
            # The previous P and beta are kept.
            raise NumericError("Non-finite value in the OS-ELM recursion")
        self.P, self.beta = P, beta

    def learn_one(self, x, y):
        x = np.asarray(x, dtype=float)
        if not self.initialized:
            self._warm_x.append(x)
            self._warm_y.append(int(y))
            return
        self.update(x, y)

    def end_warm_start(self):
        if not self.initialized and self._warm_x:
            self.initialize(np.vstack(self._warm_x), np.array(self._warm_y))

    def predict_one(self, x):
        if not self.initialized:
            raise UninitializedError("OS-ELM must be initialised before predicting")
        return self.hidden(np.asarray(x, dtype=float))[0] @ self.beta
