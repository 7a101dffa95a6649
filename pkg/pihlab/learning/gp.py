"""Exact Gaussian-process regression with an RBF kernel.

Inputs are standardized on the training set (the shift and scale are kept
with the model and applied to every query). Targets are used as given, so
the prior mean is zero and far-away predictions revert to 0 with the full
signal variance.

The posterior is computed through the Cholesky factor L of
K + (noise_variance + jitter) * I:

    alpha = L^T \\ (L \\ y)
    mean  = K_s^T alpha
    var   = k_ss - |L \\ K_s|^2
"""
import json
import math
from typing import Optional, Sequence

import numpy as np
from scipy import linalg
from scipy.spatial.distance import cdist

from pihlab import log
from pihlab._common import ConfigObject, dump_json
from pihlab.core import seeded_rng
from pihlab.errors import (
    ConfigError,
    DimensionError,
    IllConditionedError,
    InsufficientDataError,
    ModelFormatError,
)
from pihlab.types import AnyPath


__all__ = (
    "RbfKernelParams",
    "GpRegressor",
    "rbf_kernel",
    "gp_fit",
    "gp_predict",
    "gp_save",
    "gp_load",
    "tune_lengthscale",
    "LENGTHSCALE_GRID",
)


INITIAL_JITTER = 1e-8
JITTER_ESCALATIONS = 3
JITTER_FACTOR = 10.0
MIN_SCALE = 1e-12
NEGATIVE_VARIANCE_TOLERANCE = 1e-9
ALPHA_TOLERANCE = 1e-8
LENGTHSCALE_GRID = (0.3, 1.0, 3.0)
MODEL_VERSION = 1


class RbfKernelParams(ConfigObject):
    """RBF kernel hyperparameters, in standardized input units.

    Attributes:
        lengthscale (float or sequence of float): One value shared by every
            feature, or one per feature.
        signal_variance (float): Prior variance of the latent function.
        noise_variance (float): Observation noise variance.
    """

    SECTION = "learning.kernel"
    FIELDS = ("lengthscale", "signal_variance", "noise_variance")

    def __init__(self, lengthscale=1.0, signal_variance=1.0, noise_variance=0.01):
        if isinstance(lengthscale, (list, tuple)):
            self.lengthscale = tuple(float(v) for v in lengthscale)
        else:
            self.lengthscale = float(lengthscale)
        self.signal_variance = float(signal_variance)
        self.noise_variance = float(noise_variance)

        scales = self.lengthscale if isinstance(self.lengthscale, tuple) else (self.lengthscale,)
        if not scales or any(not v > 0 for v in scales):
            raise ConfigError("lengthscales must be positive", lengthscale=self.lengthscale)
        if not self.signal_variance > 0:
            raise ConfigError("signal variance must be positive", signal_variance=self.signal_variance)
        if not self.noise_variance > 0:
            raise ConfigError("noise variance must be positive", noise_variance=self.noise_variance)

    def lengthscales(self, n_features):
        if isinstance(self.lengthscale, tuple):
            if len(self.lengthscale) != n_features:
                raise DimensionError(
                    "lengthscale count does not match feature count",
                    lengthscales=len(self.lengthscale), features=n_features,
                )
            return np.array(self.lengthscale)
        return np.full(n_features, self.lengthscale)


def rbf_kernel(a, b, lengthscales, signal_variance):
    """signal_variance * exp(-0.5 * sum(((a_i - b_i) / l_i)**2)) for all row
    pairs of `a` and `b`."""
    sqdist = cdist(a / lengthscales, b / lengthscales, "sqeuclidean")
    return signal_variance * np.exp(-0.5 * sqdist)


def as_matrix(X):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, np.newaxis]
    if X.ndim != 2:
        raise DimensionError("inputs must be a 2-d array", ndim=X.ndim)
    return X


def factorize(K, noise_variance, logger):
    """Cholesky of K + (noise + jitter) I, escalating the jitter tenfold up to
    JITTER_ESCALATIONS times."""
    eye = np.eye(len(K))
    jitter = INITIAL_JITTER
    for attempt in range(JITTER_ESCALATIONS + 1):
        try:
            return linalg.cholesky(K + (noise_variance + jitter) * eye, lower=True), jitter
        except np.linalg.LinAlgError:
            if attempt == JITTER_ESCALATIONS:
                break
            logger.warning("Cholesky failed with jitter {jitter:g}, escalating", jitter=jitter)
            jitter *= JITTER_FACTOR
    raise IllConditionedError("kernel matrix not positive definite", jitter=jitter, n=len(K))


class GpRegressor(object):
    """A fitted GP. Treat as immutable; prediction is safe to share.

    Attributes:
        X (numpy.ndarray): Standardized training inputs, (n, d).
        y (numpy.ndarray): Training targets, (n,).
        params (RbfKernelParams)
        shift, scale (numpy.ndarray): Standardization, x_std = (x - shift) / scale.
        L (numpy.ndarray): Lower Cholesky factor.
        alpha (numpy.ndarray): Posterior weights.
        jitter (float): Diagonal jitter actually used.
    """

    def __init__(self, X, y, params, shift, scale, L, alpha, jitter):
        self.X = X
        self.y = y
        self.params = params
        self.shift = shift
        self.scale = scale
        self.L = L
        self.alpha = alpha
        self.jitter = jitter
        self._lengthscales = params.lengthscales(X.shape[1])

    @property
    def n_features(self):
        return self.X.shape[1]

    def standardize(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x[np.newaxis, :]
        if x.ndim != 2 or x.shape[1] != self.n_features:
            raise DimensionError(
                "feature dimension mismatch",
                expected=self.n_features, got=x.shape[-1] if x.ndim else 0,
            )
        return (x - self.shift) / self.scale

    def kernel(self, a, b):
        return rbf_kernel(a, b, self._lengthscales, self.params.signal_variance)

    def predict(self, x, logger=None):
        """Posterior mean and variance at each row of `x`."""
        xs = self.standardize(x)
        Ks = self.kernel(self.X, xs)
        mean = Ks.T @ self.alpha
        v = linalg.solve_triangular(self.L, Ks, lower=True)
        var = self.params.signal_variance - np.sum(v * v, axis=0)

        lowest = var.min() if var.size else 0.0
        if lowest < -NEGATIVE_VARIANCE_TOLERANCE:
            log.ensure_logger(logger).warning(
                "clamping negative posterior variance {var:g}", var=lowest,
            )
        return mean, np.maximum(var, 0.0)

    def log_marginal_likelihood(self):
        n = len(self.y)
        return float(
            -0.5 * self.y @ self.alpha
            - np.sum(np.log(np.diag(self.L)))
            - 0.5 * n * math.log(2 * math.pi)
        )

    def to_dict(self):
        return {
            "v": MODEL_VERSION,
            "X": self.X.tolist(),
            "y": self.y.tolist(),
            "params": self.params.to_dict(),
            "shift": self.shift.tolist(),
            "scale": self.scale.tolist(),
            "alpha": self.alpha.tolist(),
            "jitter": self.jitter,
        }

    @classmethod
    def from_dict(cls, data):
        """Rebuild from `to_dict` output. The factorization is recomputed and
        the stored alpha weights must be reproduced within 1e-8."""
        try:
            if data["v"] != MODEL_VERSION:
                raise ModelFormatError("unsupported GP model version", v=data["v"])
            X = np.array(data["X"], dtype=float)
            y = np.array(data["y"], dtype=float)
            params = RbfKernelParams.from_dict(data["params"])
            shift = np.array(data["shift"], dtype=float)
            scale = np.array(data["scale"], dtype=float)
            stored_alpha = np.array(data["alpha"], dtype=float)
            jitter = float(data["jitter"])
        except (KeyError, TypeError, ValueError) as error:
            raise ModelFormatError("malformed GP model", detail=error)

        if X.ndim != 2 or y.shape != (X.shape[0],) or stored_alpha.shape != y.shape:
            raise ModelFormatError("inconsistent GP model arrays", X=X.shape, y=y.shape)

        K = rbf_kernel(X, X, params.lengthscales(X.shape[1]), params.signal_variance)
        try:
            L = linalg.cholesky(K + (params.noise_variance + jitter) * np.eye(len(X)), lower=True)
        except np.linalg.LinAlgError:
            raise ModelFormatError("stored GP model does not factorize", jitter=jitter)
        alpha = linalg.cho_solve((L, True), y)

        deviation = float(np.max(np.abs(alpha - stored_alpha))) if len(alpha) else 0.0
        if deviation > ALPHA_TOLERANCE:
            raise ModelFormatError("stored alpha weights do not match", deviation=deviation)
        return cls(X, y, params, shift, scale, L, alpha, jitter)


def gp_fit(X, y, params: Optional[RbfKernelParams] = None, logger=None) -> GpRegressor:
    """Fit an exact GP.

    Args:
        X: Training inputs, (n, d) in raw units.
        y: Targets, (n,).
        params (RbfKernelParams or None): Defaults to RbfKernelParams().
        logger (log.Logger or None)

    Raises:
        InsufficientDataError: no samples.
        DimensionError: X and y disagree on n.
        IllConditionedError: factorization fails after jitter escalation.
    """
    logger = log.ensure_logger(logger)
    params = params if params is not None else RbfKernelParams()
    X = as_matrix(X)
    y = np.asarray(y, dtype=float).ravel()
    if len(X) < 1:
        raise InsufficientDataError("GP fit needs at least one sample")
    if len(y) != len(X):
        raise DimensionError("X and y lengths differ", X=len(X), y=len(y))

    shift = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale < MIN_SCALE] = 1.0
    Xs = (X - shift) / scale

    K = rbf_kernel(Xs, Xs, params.lengthscales(X.shape[1]), params.signal_variance)
    L, jitter = factorize(K, params.noise_variance, logger)
    alpha = linalg.cho_solve((L, True), y)

    logger.debug("GP fit: n={n} d={d} jitter={jitter:g}", n=len(X), d=X.shape[1], jitter=jitter)
    return GpRegressor(Xs, y, params, shift, scale, L, alpha, jitter)


def gp_predict(model: GpRegressor, x, logger=None):
    return model.predict(x, logger=logger)


def gp_save(model: GpRegressor, path: AnyPath):
    with open(path, "w") as stream:
        dump_json(model.to_dict(), stream)


def gp_load(path: AnyPath) -> GpRegressor:
    try:
        with open(path, "r") as stream:
            data = json.load(stream)
    except json.JSONDecodeError as error:
        raise ModelFormatError("model file is not JSON", path=path, detail=error)
    return GpRegressor.from_dict(data)


def tune_lengthscale(
    X,
    y,
    grid: Sequence[float] = LENGTHSCALE_GRID,
    seed=0,
    params: Optional[RbfKernelParams] = None,
    validation_fraction=0.2,
    logger=None,
) -> RbfKernelParams:
    """Pick the shared lengthscale from `grid` with the lowest RMSE on a
    seeded validation split. Ties keep the earlier grid entry."""
    logger = log.ensure_logger(logger)
    params = params if params is not None else RbfKernelParams()
    X = as_matrix(X)
    y = np.asarray(y, dtype=float).ravel()
    n_valid = int(round(len(X) * validation_fraction))
    if n_valid < 1 or len(X) - n_valid < 1:
        raise InsufficientDataError("too few samples for a validation split", n=len(X))

    order = seeded_rng(seed).permutation(len(X))
    valid, train = order[:n_valid], order[n_valid:]

    best = None
    for lengthscale in grid:
        candidate = params.replace(lengthscale=lengthscale)
        model = gp_fit(X[train], y[train], candidate, logger=logger)
        mean, _ = model.predict(X[valid])
        rmse = float(np.sqrt(np.mean((mean - y[valid]) ** 2)))
        logger.debug("lengthscale {l:g}: validation RMSE {rmse:.4f}", l=lengthscale, rmse=rmse)
        if best is None or rmse < best[0]:
            best = (rmse, candidate)

    logger.verbose("selected lengthscale {l}", l=best[1].lengthscale)
    return best[1]
