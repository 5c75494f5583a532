"""Synthetic non-IID scenario generation.

Two schemes: feature-skew (well-separated group parameters, every client in a
group draws from its group's generative model) and label-skew (two-stage
Dirichlet sampling: one label distribution per group, then per-client
distributions concentrated around the group's). Each client dataset carries a
ground-truth group label for evaluation.

All randomness flows through per-purpose seed streams mixed with the round and
client indices, so generation is reproducible and parallelizable by client.
"""

from __future__ import annotations

import csv
import dataclasses
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ContractError

_SEED_MASK = (1 << 63) - 1

# substream tags: group parameters / label distributions / round data / held-out data
_PARAMS, _DISTS, _ROUNDS, _HELDOUT = 0, 1, 2, 3


def _rng(*keys: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([k & _SEED_MASK for k in keys]))


@dataclass(frozen=True)
class ClientDataset:
    """One client's observations for one communication round."""

    client_id: int
    round: int
    features: np.ndarray            # (n, feature_dim); n may be 0
    labels: np.ndarray | None       # (n,); float responses or integer classes
    true_group: int = 0

    def __post_init__(self):
        feats = np.array(self.features, dtype=float)
        if feats.ndim != 2:
            raise ContractError("features must be a 2-D array (n, dim)")
        feats.flags.writeable = False
        object.__setattr__(self, "features", feats)
        if self.labels is not None:
            labels = np.array(self.labels)
            if labels.shape != (feats.shape[0],):
                raise ContractError("labels must have one entry per observation")
            labels.flags.writeable = False
            object.__setattr__(self, "labels", labels)

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    def is_empty(self) -> bool:
        return self.n_samples == 0


@dataclass(frozen=True)
class SkewConfig:
    scheme: str                           # "feature-skew" | "label-skew"
    groups: int
    clients_per_group: int
    samples_per_client_per_round: int
    alpha_group: float = 0.1
    alpha_within: float = 10.0
    separation: float = 10.0              # group/class mean spacing in noise-sigma units
    label_count: int = 10
    seed: int = 0
    feature_dim: int = 2
    noise_variance: float = 1.0
    model_kind: str = "gaussian-mean"     # feature-skew generative model
    fresh_each_round: bool = True

    def __post_init__(self):
        if self.scheme not in ("feature-skew", "label-skew"):
            raise ContractError(f"unknown scheme {self.scheme!r}")
        if min(self.groups, self.clients_per_group, self.samples_per_client_per_round,
               self.label_count, self.feature_dim) < 1:
            raise ContractError("counts and dimensions must be positive")
        if self.alpha_group <= 0 or self.alpha_within <= 0:
            raise ContractError("Dirichlet concentrations must be strictly positive")
        if self.noise_variance <= 0 or self.separation <= 0:
            raise ContractError("noise_variance and separation must be positive")
        if self.model_kind not in ("gaussian-mean", "bayes-linear"):
            raise ContractError(f"unsupported generative model kind {self.model_kind!r}")

    @property
    def client_count(self) -> int:
        return self.groups * self.clients_per_group

    @property
    def noise_sigma(self) -> float:
        return float(np.sqrt(self.noise_variance))


@dataclass(frozen=True)
class GeneratedScenario:
    """Per-round client datasets plus the ground truth that produced them."""

    rounds: tuple[tuple[ClientDataset, ...], ...]   # T x C
    group_params: np.ndarray | None = None          # (G, dim), feature-skew
    class_means: np.ndarray | None = None           # (label_count, dim), label-skew
    group_label_dists: np.ndarray | None = None     # (G, label_count)
    client_label_dists: np.ndarray | None = None    # (C, label_count)


def separated_centers(count: int, dim: int, spacing: float,
                      rng: np.random.Generator) -> np.ndarray:
    """`count` points with pairwise distance >= spacing.

    Points sit on an integer lattice scaled by `spacing`, then get a seeded
    orthogonal rotation (distance-preserving) and recentering, so layouts vary
    with the seed while the separation guarantee is exact.
    """
    base = int(np.ceil(count ** (1.0 / dim))) if count > 1 else 1
    pts = np.zeros((count, dim))
    for g in range(count):
        rem = g
        for k in range(dim):
            pts[g, k] = rem % base
            rem //= base
    pts *= spacing
    gauss = rng.standard_normal((dim, dim))
    q, r = np.linalg.qr(gauss)
    q = q @ np.diag(np.sign(np.diag(r)))   # fix signs for determinism
    pts = pts @ q.T
    return pts - pts.mean(axis=0)


def _feature_skew_client(cfg: SkewConfig, params: np.ndarray, t: int, j: int,
                         n: int, stream: int) -> ClientDataset:
    g = j // cfg.clients_per_group
    rng = _rng(cfg.seed, stream, t, j)
    sigma = cfg.noise_sigma
    if cfg.model_kind == "gaussian-mean":
        feats = params[g] + sigma * rng.standard_normal((n, cfg.feature_dim))
        labels = None
    else:  # bayes-linear
        feats = rng.standard_normal((n, cfg.feature_dim))
        labels = feats @ params[g] + sigma * rng.standard_normal(n)
    return ClientDataset(client_id=j, round=max(t, 0), features=feats,
                         labels=labels, true_group=g)


def gen_feature_skew(cfg: SkewConfig, T: int) -> GeneratedScenario:
    """Feature-skew scenario: G separated group parameters, T rounds of C datasets."""
    if cfg.scheme != "feature-skew":
        raise ContractError("config scheme must be feature-skew")
    spacing = cfg.separation * cfg.noise_sigma
    params = separated_centers(cfg.groups, cfg.feature_dim, spacing,
                               _rng(cfg.seed, _PARAMS))
    n = cfg.samples_per_client_per_round
    rounds = []
    for t in range(T):
        src = t if cfg.fresh_each_round else 0
        row = tuple(
            dataclasses.replace(
                _feature_skew_client(cfg, params, src, j, n, _ROUNDS), round=t)
            for j in range(cfg.client_count)
        )
        rounds.append(row)
    return GeneratedScenario(rounds=tuple(rounds), group_params=params)


def _draw_simplex(rng: np.random.Generator, alpha: np.ndarray) -> np.ndarray:
    # Resample the rare draws that underflow to an all-zero or NaN vector;
    # individual zero entries are fine (that label is simply never sampled).
    for _ in range(100):
        p = rng.dirichlet(alpha)
        if np.all(np.isfinite(p)) and p.sum() > 0:
            return p / p.sum()
    raise ContractError("Dirichlet sampling kept producing degenerate draws")


def draw_client_distributions(group_dist: np.ndarray, alpha_within: float,
                              n: int, rng: np.random.Generator) -> np.ndarray:
    """Stage-2 draws: n client label distributions around one group distribution."""
    base = np.maximum(np.asarray(group_dist, dtype=float), 1e-300)
    return np.stack([_draw_simplex(rng, alpha_within * base) for _ in range(n)])


def label_skew_distributions(cfg: SkewConfig) -> tuple[np.ndarray, np.ndarray]:
    """Stage-1 group distributions and stage-2 per-client distributions."""
    rng = _rng(cfg.seed, _DISTS)
    ell = cfg.label_count
    group_dists = np.stack([
        _draw_simplex(rng, np.full(ell, cfg.alpha_group)) for _ in range(cfg.groups)
    ])
    client_rows = []
    for g in range(cfg.groups):
        client_rows.append(draw_client_distributions(
            group_dists[g], cfg.alpha_within, cfg.clients_per_group, rng))
    return group_dists, np.concatenate(client_rows, axis=0)


def _label_skew_client(cfg: SkewConfig, class_means: np.ndarray,
                       client_dists: np.ndarray, t: int, j: int,
                       n: int, stream: int) -> ClientDataset:
    rng = _rng(cfg.seed, stream, t, j)
    labels = rng.choice(cfg.label_count, size=n, p=client_dists[j])
    feats = class_means[labels] + cfg.noise_sigma * rng.standard_normal((n, cfg.feature_dim))
    return ClientDataset(client_id=j, round=max(t, 0), features=feats,
                         labels=labels, true_group=j // cfg.clients_per_group)


def gen_label_skew(cfg: SkewConfig, T: int) -> GeneratedScenario:
    """Two-stage Dirichlet label-skew with class-conditional Gaussian features."""
    if cfg.scheme != "label-skew":
        raise ContractError("config scheme must be label-skew")
    spacing = cfg.separation * cfg.noise_sigma
    class_means = separated_centers(cfg.label_count, cfg.feature_dim, spacing,
                                    _rng(cfg.seed, _PARAMS))
    group_dists, client_dists = label_skew_distributions(cfg)
    n = cfg.samples_per_client_per_round
    rounds = []
    for t in range(T):
        src = t if cfg.fresh_each_round else 0
        row = tuple(
            dataclasses.replace(
                _label_skew_client(cfg, class_means, client_dists, src, j, n, _ROUNDS),
                round=t)
            for j in range(cfg.client_count)
        )
        rounds.append(row)
    return GeneratedScenario(rounds=tuple(rounds), class_means=class_means,
                             group_label_dists=group_dists,
                             client_label_dists=client_dists)


def gen_scenario(cfg: SkewConfig, T: int) -> GeneratedScenario:
    if cfg.scheme == "feature-skew":
        return gen_feature_skew(cfg, T)
    return gen_label_skew(cfg, T)


def gen_heldout(cfg: SkewConfig, n_samples: int) -> tuple[ClientDataset, ...]:
    """One extra set of C datasets drawn from each client's own distribution."""
    if cfg.scheme == "feature-skew":
        spacing = cfg.separation * cfg.noise_sigma
        params = separated_centers(cfg.groups, cfg.feature_dim, spacing,
                                   _rng(cfg.seed, _PARAMS))
        return tuple(_feature_skew_client(cfg, params, 0, j, n_samples, _HELDOUT)
                     for j in range(cfg.client_count))
    spacing = cfg.separation * cfg.noise_sigma
    class_means = separated_centers(cfg.label_count, cfg.feature_dim, spacing,
                                    _rng(cfg.seed, _PARAMS))
    _, client_dists = label_skew_distributions(cfg)
    return tuple(_label_skew_client(cfg, class_means, client_dists, 0, j,
                                    n_samples, _HELDOUT)
                 for j in range(cfg.client_count))


def export_csv(rounds, path) -> None:
    """Columnar dump: client_id, round, true_group, label, f0..f{d-1}."""
    rounds = [list(r) for r in rounds]
    if not rounds or not rounds[0]:
        raise ContractError("nothing to export")
    dim = rounds[0][0].feature_dim
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["client_id", "round", "true_group", "label"]
                        + [f"f{k}" for k in range(dim)])
        for row in rounds:
            for ds in row:
                for i in range(ds.n_samples):
                    label = "" if ds.labels is None else repr(ds.labels[i].item())
                    writer.writerow([ds.client_id, ds.round, ds.true_group, label]
                                    + [repr(float(v)) for v in ds.features[i]])


def import_csv(path) -> tuple[tuple[ClientDataset, ...], ...]:
    """Inverse of export_csv; rows regroup by (round, client_id)."""
    path = Path(path)
    buckets: dict[tuple[int, int], dict] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        dim = len(header) - 4
        for row in reader:
            j, t, g = int(row[0]), int(row[1]), int(row[2])
            rec = buckets.setdefault((t, j), {"group": g, "feats": [], "labels": []})
            rec["feats"].append([float(v) for v in row[4:4 + dim]])
            rec["labels"].append(None if row[3] == "" else _parse_label(row[3]))
    if not buckets:
        raise ContractError(f"no data rows in {path}")
    t_values = sorted({t for t, _ in buckets})
    j_values = sorted({j for _, j in buckets})
    rounds = []
    for t in t_values:
        row = []
        for j in j_values:
            rec = buckets[(t, j)]
            labels = None
            if any(v is not None for v in rec["labels"]):
                labels = np.array(rec["labels"])
            row.append(ClientDataset(client_id=j, round=t,
                                     features=np.array(rec["feats"]),
                                     labels=labels, true_group=rec["group"]))
        rounds.append(tuple(row))
    return tuple(rounds)


def _parse_label(text: str):
    try:
        return int(text)
    except ValueError:
        return float(text)
