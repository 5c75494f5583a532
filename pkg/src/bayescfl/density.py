"""Gaussian densities, decentralized posterior fusion, and mixture merging.

Densities are value objects: arrays are frozen at construction and every
operation returns a new instance. Covariances are kept as full matrices
(dimensions stay small at simulation scale).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from .errors import ContractError, FusionDegenerateError

SPD_JITTER = 1e-12
WEIGHT_SUM_TOL = 1e-9


def symmetrize(a: np.ndarray) -> np.ndarray:
    return (a + a.T) / 2.0


def spd_cholesky(a: np.ndarray, jitter: float = SPD_JITTER) -> tuple[np.ndarray, np.ndarray]:
    """Cholesky factor of a symmetric matrix, adding jitter*I once if needed.

    Returns (possibly jittered matrix, lower factor). Raises ContractError if
    the matrix is not positive-definite even after the jitter.
    """
    try:
        return a, np.linalg.cholesky(a)
    except np.linalg.LinAlgError:
        pass
    bumped = a + jitter * np.eye(a.shape[0])
    try:
        return bumped, np.linalg.cholesky(bumped)
    except np.linalg.LinAlgError as exc:
        raise ContractError("matrix is not positive-definite") from exc


def _freeze(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=float)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class GaussianDensity:
    """Multivariate normal with full covariance.

    Invariants checked at construction: mean is a vector, covariance is a
    matching square matrix, symmetric to 1e-12 relative tolerance, and
    positive-definite (a Cholesky factorization must succeed).
    """

    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        mean = _freeze(np.atleast_1d(self.mean))
        cov = _freeze(np.atleast_2d(self.covariance))
        if mean.ndim != 1:
            raise ContractError("mean must be a vector")
        d = mean.shape[0]
        if cov.shape != (d, d):
            raise ContractError(f"covariance must be {d}x{d}, got {cov.shape}")
        scale = max(1.0, float(np.max(np.abs(cov))))
        if float(np.max(np.abs(cov - cov.T))) > 1e-12 * scale:
            raise ContractError("covariance is not symmetric")
        try:
            np.linalg.cholesky(cov)
        except np.linalg.LinAlgError as exc:
            raise ContractError("covariance is not positive-definite") from exc
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    @cached_property
    def chol(self) -> np.ndarray:
        return np.linalg.cholesky(self.covariance)

    @cached_property
    def precision(self) -> np.ndarray:
        eye = np.eye(self.dim)
        return symmetrize(cho_solve((self.chol, True), eye))

    @cached_property
    def log_det_cov(self) -> float:
        return 2.0 * float(np.sum(np.log(np.diag(self.chol))))

    def info_form(self) -> tuple[np.ndarray, np.ndarray]:
        """(precision, precision @ mean)."""
        return self.precision, self.precision @ self.mean

    def log_pdf(self, x: np.ndarray) -> np.ndarray:
        """Log density at one point (shape (dim,)) or a batch (shape (n, dim))."""
        pts = np.atleast_2d(np.asarray(x, dtype=float))
        diff = pts - self.mean
        sol = solve_triangular(self.chol, diff.T, lower=True)
        maha = np.sum(sol**2, axis=0)
        out = -0.5 * (self.dim * np.log(2.0 * np.pi) + self.log_det_cov + maha)
        return out[0] if np.asarray(x).ndim == 1 else out

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        z = rng.standard_normal((n, self.dim))
        return self.mean + z @ self.chol.T


def from_info(precision: np.ndarray, shift: np.ndarray,
              error: type[Exception] = ContractError) -> GaussianDensity:
    """Density from information form: covariance = precision^-1, mean = cov @ shift."""
    precision = symmetrize(np.asarray(precision, dtype=float))
    try:
        low = np.linalg.cholesky(precision)
    except np.linalg.LinAlgError as exc:
        raise error("precision matrix is not positive-definite") from exc
    cov = symmetrize(cho_solve((low, True), np.eye(precision.shape[0])))
    mean = cho_solve((low, True), np.asarray(shift, dtype=float))
    cov, _ = spd_cholesky(cov)
    return GaussianDensity(mean, cov)


@dataclass(frozen=True)
class SampleSet:
    """Weighted parameter samples drawn from a cluster density."""

    samples: np.ndarray   # (n, dim)
    weights: np.ndarray   # (n,), nonnegative, sums to 1

    def __post_init__(self):
        samples = _freeze(np.atleast_2d(self.samples))
        weights = _freeze(np.atleast_1d(self.weights))
        if samples.shape[0] == 0:
            raise ContractError("sample set must be nonempty")
        if weights.shape != (samples.shape[0],):
            raise ContractError("weights must pair one-to-one with samples")
        if np.any(weights < 0):
            raise ContractError("weights must be nonnegative")
        if abs(float(weights.sum()) - 1.0) > WEIGHT_SUM_TOL:
            raise ContractError("weights must sum to 1")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "weights", weights)


def fuse_local_posteriors(locals_: Sequence[GaussianDensity],
                          prior: GaussianDensity,
                          mode: str = "prior-corrected") -> GaussianDensity:
    """Combine per-client posteriors into one density in information form.

    naive-product: normalized product of the locals (precisions and
    precision-means add). prior-corrected: additionally removes the n-1
    extra copies of the shared prior so that, for conjugate models, the
    result equals the posterior given the union of all client datasets.
    """
    if not locals_:
        raise ContractError("need at least one local posterior")
    dim = locals_[0].dim
    if any(g.dim != dim for g in locals_) or prior.dim != dim:
        raise ContractError("all densities must share the same dimension")
    if mode not in ("naive-product", "prior-corrected"):
        raise ContractError(f"unknown fusion mode {mode!r}")

    precision = np.zeros((dim, dim))
    shift = np.zeros(dim)
    for g in locals_:
        lam, eta = g.info_form()
        precision += lam
        shift += eta
    if mode == "prior-corrected":
        lam0, eta0 = prior.info_form()
        n_extra = len(locals_) - 1
        precision -= n_extra * lam0
        shift -= n_extra * eta0
    return from_info(precision, shift, error=FusionDegenerateError)


def merge_mixture(weights: Sequence[float],
                  components: Sequence[GaussianDensity]) -> GaussianDensity:
    """Moment-matched single Gaussian for a weighted mixture.

    Mean is the weighted mean of component means; covariance preserves the
    mixture's second moment (weighted sum of component covariance plus mean
    outer product, minus the merged mean outer product).
    """
    w = np.asarray(weights, dtype=float)
    if len(components) == 0 or w.shape != (len(components),):
        raise ContractError("weights and components must be nonempty and same length")
    if np.any(w < 0):
        raise ContractError("weights must be nonnegative")
    total = float(w.sum())
    if abs(total - 1.0) > WEIGHT_SUM_TOL:
        raise ContractError(f"weights must sum to 1, got {total}")
    dim = components[0].dim
    if any(c.dim != dim for c in components):
        raise ContractError("components must share the same dimension")

    w = w / total
    mean = np.zeros(dim)
    second = np.zeros((dim, dim))
    for wi, c in zip(w, components):
        mean += wi * c.mean
        second += wi * (c.covariance + np.outer(c.mean, c.mean))
    cov = symmetrize(second - np.outer(mean, mean))
    cov, _ = spd_cholesky(cov)
    return GaussianDensity(mean, cov)
