"""Shared test oracles: brute-force and integration baselines kept independent
of the implementation paths they check."""

import itertools

import numpy as np

from bayescfl import Assignment, ClientDataset, GaussianDensity


def brute_force_ranking(entries: np.ndarray):
    """Every assignment with its cost, sorted by (cost, labels)."""
    C, K = entries.shape
    items = []
    for labels in itertools.product(range(K), repeat=C):
        cost = float(entries[np.arange(C), list(labels)].sum())
        items.append((labels, cost))
    items.sort(key=lambda it: (it[1], it[0]))
    return items


def grid_posterior_moments(prior: GaussianDensity, loglik, lo: float, hi: float,
                           n: int = 801):
    """Posterior mean/covariance by dense grid integration (1-D or 2-D)."""
    dim = prior.dim
    axis = np.linspace(lo, hi, n)
    if dim == 1:
        pts = axis[:, None]
    elif dim == 2:
        xx, yy = np.meshgrid(axis, axis, indexing="ij")
        pts = np.column_stack([xx.ravel(), yy.ravel()])
    else:
        raise ValueError("grid oracle supports 1-D and 2-D only")
    log_post = prior.log_pdf(pts) + np.array([loglik(w) for w in pts])
    log_post -= log_post.max()
    dens = np.exp(log_post)
    dens /= dens.sum()
    mean = dens @ pts
    centered = pts - mean
    cov = (centered * dens[:, None]).T @ centered
    return mean, cov


def gaussian_mean_dataset(values, client_id=0, round_=0, group=0) -> ClientDataset:
    feats = np.asarray(values, dtype=float)
    if feats.ndim == 1:
        feats = feats[:, None]
    return ClientDataset(client_id=client_id, round=round_, features=feats,
                         labels=None, true_group=group)


def empty_dataset(dim: int) -> ClientDataset:
    return ClientDataset(client_id=0, round=0,
                         features=np.zeros((0, dim)), labels=None)


def regression_dataset(x: np.ndarray, y: np.ndarray) -> ClientDataset:
    return ClientDataset(client_id=0, round=0, features=np.asarray(x, dtype=float),
                         labels=np.asarray(y, dtype=float))


def binary_dataset(x: np.ndarray, y: np.ndarray) -> ClientDataset:
    return ClientDataset(client_id=0, round=0, features=np.asarray(x, dtype=float),
                         labels=np.asarray(y, dtype=int))


def assignment(*labels) -> Assignment:
    return Assignment(tuple(labels))
