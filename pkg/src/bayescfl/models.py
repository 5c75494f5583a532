"""Local client models: likelihoods, exact conjugate posterior updates, and
likelihood-based association weights.

Three model kinds:
  gaussian-mean    observations y ~ N(w, noise_variance * I); infer w.
  bayes-linear     responses y = x @ w + e, e ~ N(0, noise_variance); infer w.
  laplace-logistic binary logistic regression; posterior via Laplace
                   approximation (damped Newton mode search, covariance =
                   inverse Hessian at the mode).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .datasets import ClientDataset
from .density import GaussianDensity, SampleSet, spd_cholesky, symmetrize
from .errors import ContractError, SingularModelError

NEWTON_MAX_ITER = 100
NEWTON_GRAD_TOL = 1e-8
NEWTON_MAX_HALVINGS = 40

KINDS = ("gaussian-mean", "bayes-linear", "laplace-logistic")


@dataclass(frozen=True)
class LocalModelSpec:
    """Which likelihood/posterior formulas apply, and their fixed parameters."""

    kind: str
    feature_dim: int
    noise_variance: float | None = None
    label_count: int | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ContractError(f"unknown model kind {self.kind!r}")
        if self.feature_dim < 1:
            raise ContractError("feature_dim must be positive")
        if self.kind in ("gaussian-mean", "bayes-linear"):
            if self.noise_variance is None or self.noise_variance <= 0:
                raise ContractError(f"{self.kind} requires a positive noise_variance")
        if self.kind == "laplace-logistic":
            # The inferred weight vector lives in feature space, which pins the
            # model to two classes (labels 0/1).
            if self.label_count not in (None, 2):
                raise ContractError("laplace-logistic supports label_count=2 only")
            object.__setattr__(self, "label_count", 2)

    @property
    def param_dim(self) -> int:
        return self.feature_dim


def _check_data(data: ClientDataset, spec: LocalModelSpec) -> None:
    if data.is_empty():
        return
    if data.feature_dim != spec.feature_dim:
        raise ContractError(
            f"data feature dim {data.feature_dim} != spec feature dim {spec.feature_dim}")
    if spec.kind == "gaussian-mean":
        return
    if data.labels is None:
        raise ContractError(f"{spec.kind} data needs labels/responses")
    if spec.kind == "laplace-logistic":
        y = np.asarray(data.labels)
        if np.any((y != 0) & (y != 1)):
            raise ContractError("laplace-logistic labels must be 0 or 1")


def data_log_likelihood(omega: np.ndarray, data: ClientDataset,
                        spec: LocalModelSpec) -> float:
    """log p(D | omega); 0 for an empty dataset (log of an empty product)."""
    omega = np.asarray(omega, dtype=float)
    if omega.shape != (spec.param_dim,):
        raise ContractError(f"parameter must have shape ({spec.param_dim},)")
    _check_data(data, spec)
    if data.is_empty():
        return 0.0
    n = data.n_samples
    if spec.kind == "gaussian-mean":
        v = spec.noise_variance
        sq = float(np.sum((data.features - omega) ** 2))
        return -0.5 * (n * spec.feature_dim * np.log(2.0 * np.pi * v) + sq / v)
    if spec.kind == "bayes-linear":
        v = spec.noise_variance
        resid = np.asarray(data.labels, dtype=float) - data.features @ omega
        return -0.5 * (n * np.log(2.0 * np.pi * v) + float(resid @ resid) / v)
    # laplace-logistic: sum_i [y_i z_i - log(1 + exp(z_i))], z = X @ omega
    z = data.features @ omega
    y = np.asarray(data.labels, dtype=float)
    return float(np.sum(y * z - np.logaddexp(0.0, z)))


def _gaussian_mean_update(prior, data, spec):
    lam0, eta0 = prior.info_form()
    n = data.n_samples
    lam = lam0 + (n / spec.noise_variance) * np.eye(spec.param_dim)
    eta = eta0 + data.features.sum(axis=0) / spec.noise_variance
    return lam, eta


def _bayes_linear_update(prior, data, spec):
    lam0, eta0 = prior.info_form()
    x = data.features
    y = np.asarray(data.labels, dtype=float)
    lam = lam0 + (x.T @ x) / spec.noise_variance
    eta = eta0 + (x.T @ y) / spec.noise_variance
    return lam, eta


def _laplace_logistic_update(prior, data, spec):
    x = data.features
    y = np.asarray(data.labels, dtype=float)
    lam0 = prior.precision
    m0 = prior.mean

    def objective(w):
        return float(0.5 * (w - m0) @ lam0 @ (w - m0)) - data_log_likelihood(w, data, spec)

    w = m0.copy()
    obj = objective(w)
    for _ in range(NEWTON_MAX_ITER):
        p = 1.0 / (1.0 + np.exp(-(x @ w)))
        grad = x.T @ (p - y) + lam0 @ (w - m0)
        if float(np.linalg.norm(grad)) < NEWTON_GRAD_TOL:
            break
        hess = symmetrize(x.T @ (x * (p * (1.0 - p))[:, None]) + lam0)
        try:
            spd_cholesky(hess)
        except ContractError as exc:
            raise SingularModelError("Hessian not positive-definite") from exc
        step = np.linalg.solve(hess, grad)
        scale = 1.0
        for _ in range(NEWTON_MAX_HALVINGS):
            cand = w - scale * step
            cand_obj = objective(cand)
            if cand_obj <= obj:
                break
            scale *= 0.5
        w = w - scale * step
        obj = objective(w)

    p = 1.0 / (1.0 + np.exp(-(x @ w)))
    hess = symmetrize(x.T @ (x * (p * (1.0 - p))[:, None]) + lam0)
    try:
        spd_cholesky(hess)
    except ContractError as exc:
        raise SingularModelError("Hessian not positive-definite at the mode") from exc
    cov = symmetrize(np.linalg.inv(hess))
    return w, cov


def posterior_update(prior: GaussianDensity, data: ClientDataset,
                     spec: LocalModelSpec) -> GaussianDensity:
    """p(w | D) from the prior and one client dataset.

    Exact in information form for the conjugate kinds; Laplace approximation
    (mode + inverse Hessian) for laplace-logistic. An empty dataset returns
    the prior itself.
    """
    if prior.dim != spec.param_dim:
        raise ContractError(f"prior dim {prior.dim} != parameter dim {spec.param_dim}")
    _check_data(data, spec)
    if data.is_empty():
        return prior
    if spec.kind == "gaussian-mean":
        lam, eta = _gaussian_mean_update(prior, data, spec)
    elif spec.kind == "bayes-linear":
        lam, eta = _bayes_linear_update(prior, data, spec)
    else:
        mode, cov = _laplace_logistic_update(prior, data, spec)
        cov, _ = spd_cholesky(cov)
        return GaussianDensity(mode, cov)
    lam = symmetrize(lam)
    cov = symmetrize(np.linalg.inv(lam))
    cov, _ = spd_cholesky(cov)
    mean = np.linalg.solve(lam, eta)
    return GaussianDensity(mean, cov)


def assoc_log_weight_at_mean(cluster: GaussianDensity, data: ClientDataset,
                             spec: LocalModelSpec) -> float:
    """log p(D | w_hat) with w_hat the cluster's expected parameter value."""
    if cluster.dim != spec.param_dim:
        raise ContractError(f"cluster dim {cluster.dim} != parameter dim {spec.param_dim}")
    return data_log_likelihood(cluster.mean, data, spec)


def assoc_log_weight_sampled(cluster: GaussianDensity, data: ClientDataset,
                             spec: LocalModelSpec, n_samples: int,
                             seed: int) -> float:
    """Monte Carlo association weight: log mean_l p(D | w_l), w_l ~ cluster.

    Equal sample weights; deterministic for a fixed seed.
    """
    if n_samples < 1:
        raise ContractError("n_samples must be >= 1")
    if cluster.dim != spec.param_dim:
        raise ContractError(f"cluster dim {cluster.dim} != parameter dim {spec.param_dim}")
    rng = np.random.default_rng(np.random.SeedSequence(seed & ((1 << 63) - 1)))
    draws = SampleSet(cluster.sample(n_samples, rng), np.full(n_samples, 1.0 / n_samples))
    logliks = np.array([data_log_likelihood(w, data, spec) for w in draws.samples])
    return float(logsumexp(logliks, b=draws.weights))
