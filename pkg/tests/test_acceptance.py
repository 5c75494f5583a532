"""Acceptance suite: one test per criterion, each printing a PASS line with
its measured values (run with -s or -v to stream them)."""

import json
import math
import time

import numpy as np

from bayescfl import (CostMatrix, GaussianDensity, LocalModelSpec, RoundConfig,
                      SkewConfig, best_assignment, count_hypotheses_constrained,
                      count_hypotheses_unconstrained, fuse_local_posteriors,
                      gen_heldout, gen_scenario, heldout_log_likelihood,
                      m_best_exact, merge_mixture, posterior_update,
                      run_training)
from bayescfl.cli import cli_run
from bayescfl.datasets import draw_client_distributions, gen_label_skew
from bayescfl.reports import trajectories
from helpers import brute_force_ranking, gaussian_mean_dataset, regression_dataset

GM2 = LocalModelSpec("gaussian-mean", feature_dim=2, noise_variance=1.0)


def _report(num, text):
    print(f"ACCEPTANCE {num:02d}: PASS  {text}")


def test_criterion_01_worked_assignment_example():
    labels_costs = CostMatrix(np.array([[5.0, 8.0], [8.0, 2.0], [4.0, 8.0]]))
    assignment, cost = best_assignment(labels_costs)
    assert assignment.labels == (0, 1, 0)
    assert cost == 11.0
    _report(1, "3x2 worked example gives labels (0,1,0) with total cost 11")


def test_criterion_02_hypothesis_count_formulas():
    for k in range(1, 6):
        for c in range(1, 13):
            by_sum = 1
            for _ in range(k):
                by_sum *= sum(math.comb(c, i) for i in range(c + 1))
            assert count_hypotheses_unconstrained(k, c) == by_sum
            assert count_hypotheses_constrained(k, c) == k**c
    _report(2, "counting formulas match direct binomial summation for K<=5, C<=12")


def test_criterion_03_m_best_oracle_equivalence():
    start = time.monotonic()
    rng = np.random.default_rng(2024)
    for _ in range(200):
        c = int(rng.integers(1, 7))
        k = int(rng.integers(1, 5))
        entries = np.round(rng.standard_normal((c, k)) * 3, 3)
        ranked = m_best_exact(CostMatrix(entries), k**c)
        want = brute_force_ranking(entries)
        assert [a.labels for a, _ in ranked] == [lbl for lbl, _ in want]
        np.testing.assert_allclose([cost for _, cost in ranked],
                                   [cost for _, cost in want], atol=1e-12)
    elapsed = time.monotonic() - start
    assert elapsed < 10.0
    _report(3, f"200 random matrices ranked identically to brute force "
               f"({elapsed:.2f}s)")


def test_criterion_04_merge_moment_preservation():
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(100):
        dim = int(rng.integers(1, 9))
        m = int(rng.integers(1, 7))
        comps = []
        for _ in range(m):
            a = rng.standard_normal((dim, dim))
            comps.append(GaussianDensity(rng.standard_normal(dim),
                                         a @ a.T + dim * np.eye(dim)))
        w = rng.dirichlet(np.ones(m))
        merged = merge_mixture(w, comps)
        mean = sum(wi * c.mean for wi, c in zip(w, comps))
        second = sum(wi * (c.covariance + np.outer(c.mean, c.mean))
                     for wi, c in zip(w, comps))
        got_second = merged.covariance + np.outer(merged.mean, merged.mean)
        worst = max(worst,
                    float(np.max(np.abs(merged.mean - mean))),
                    float(np.max(np.abs(got_second - second))))
    assert worst < 1e-10
    _report(4, f"100 random mixtures: worst moment deviation {worst:.2e} < 1e-10")


def test_criterion_05_fusion_exactness():
    rng = np.random.default_rng(9)
    worst = 0.0
    for trial in range(100):
        dim = int(rng.integers(1, 4))
        a = rng.standard_normal((dim, dim))
        prior = GaussianDensity(rng.standard_normal(dim), a @ a.T + dim * np.eye(dim))
        n_clients = int(rng.integers(2, 5))
        if trial % 2 == 0:
            spec = LocalModelSpec("gaussian-mean", feature_dim=dim,
                                  noise_variance=float(rng.uniform(0.3, 2.0)))
            chunks = [rng.standard_normal((int(rng.integers(1, 5)), dim))
                      for _ in range(n_clients)]
            datasets = [gaussian_mean_dataset(c) for c in chunks]
            joint = gaussian_mean_dataset(np.vstack(chunks))
        else:
            spec = LocalModelSpec("bayes-linear", feature_dim=dim,
                                  noise_variance=float(rng.uniform(0.3, 2.0)))
            w_true = rng.standard_normal(dim)
            xs, ys = [], []
            for _ in range(n_clients):
                x = rng.standard_normal((int(rng.integers(1, 5)), dim))
                y = x @ w_true + rng.standard_normal(x.shape[0])
                xs.append(x)
                ys.append(y)
            datasets = [regression_dataset(x, y) for x, y in zip(xs, ys)]
            joint = regression_dataset(np.vstack(xs), np.concatenate(ys))
        locs = [posterior_update(prior, d, spec) for d in datasets]
        fused = fuse_local_posteriors(locs, prior, "prior-corrected")
        want = posterior_update(prior, joint, spec)
        worst = max(worst,
                    float(np.max(np.abs(fused.mean - want.mean))),
                    float(np.max(np.abs(fused.covariance - want.covariance))))
    assert worst < 1e-9
    _report(5, f"100 fusion instances: worst deviation from joint posterior "
               f"{worst:.2e} < 1e-9")


def test_criterion_06_conceptual_oracle_agreement():
    start = time.monotonic()
    sc = SkewConfig(scheme="feature-skew", groups=2, clients_per_group=1,
                    samples_per_client_per_round=8, separation=10.0, seed=5)
    scen = gen_scenario(sc, 2)
    conc = run_training(RoundConfig(K=2, C=2, T=2, mode="conceptual",
                                    model=GM2, seed=5), scen.rounds)
    mh = run_training(RoundConfig(K=2, C=2, T=2, mode="multi-hypothesis",
                                  m_max=64, model=GM2, seed=5), scen.rounds)
    assert len(conc[-1].assignments) == 16
    worst_w, worst_m = 0.0, 0.0
    for rep_a, rep_b, ta, tb in zip(conc, mh, trajectories(conc), trajectories(mh)):
        ka = sorted(ta, key=ta.get)
        kb = sorted(tb, key=tb.get)
        assert [ta[i] for i in ka] == [tb[i] for i in kb]
        for ia, ib in zip(ka, kb):
            worst_w = max(worst_w, abs(rep_a.weights[ia] - rep_b.weights[ib]))
            worst_m = max(worst_m, float(np.max(np.abs(
                np.asarray(rep_a.cluster_means[ia])
                - np.asarray(rep_b.cluster_means[ib])))))
    elapsed = time.monotonic() - start
    assert worst_w < 1e-9 and worst_m < 1e-9
    assert elapsed < 5.0
    _report(6, f"full-width multi-hypothesis run matches exhaustive enumeration "
               f"(weights {worst_w:.1e}, means {worst_m:.1e}, {elapsed:.2f}s)")


def test_criterion_07_mode_collapse_consistency():
    sc = SkewConfig(scheme="feature-skew", groups=2, clients_per_group=2,
                    samples_per_client_per_round=12, separation=4.0, seed=13)
    scen = gen_scenario(sc, 5)
    trajs = {}
    for mode in ("greedy", "consensus", "multi-hypothesis"):
        cfg = RoundConfig(K=2, C=4, T=5, m_max=1, mode=mode, model=GM2, seed=13)
        reps = run_training(cfg, scen.rounds)
        trajs[mode] = [rep.assignments for rep in reps]
    assert trajs["greedy"] == trajs["consensus"] == trajs["multi-hypothesis"]
    _report(7, "greedy, consensus(m=1), multi-hypothesis(m=1) produce identical "
               "association trajectories")


def test_criterion_08_cluster_recovery():
    start = time.monotonic()
    per_mode = {m: 0 for m in ("greedy", "consensus", "multi-hypothesis")}
    for seed in range(10):
        sc = SkewConfig(scheme="feature-skew", groups=5, clients_per_group=2,
                        samples_per_client_per_round=50, separation=10.0,
                        seed=seed)
        scen = gen_scenario(sc, 20)
        for mode in per_mode:
            cfg = RoundConfig(K=5, C=10, T=20, m_max=3, mode=mode, model=GM2,
                              seed=seed, warm_up_rounds=1)
            reps = run_training(cfg, scen.rounds)
            if reps[-1].metrics["association_accuracy"] >= 0.95:
                per_mode[mode] += 1
    elapsed = time.monotonic() - start
    assert elapsed < 60.0
    for mode, hits in per_mode.items():
        assert hits >= 9, f"{mode} recovered clusters on only {hits}/10 seeds"
    _report(8, f"5-group feature skew recovered by all modes on "
               f"{min(per_mode.values())}/10 seeds ({elapsed:.1f}s)")


def test_criterion_09_multi_hypothesis_trend():
    start = time.monotonic()
    diffs = []
    for seed in range(10):
        sc = SkewConfig(scheme="label-skew", groups=4, clients_per_group=10,
                        samples_per_client_per_round=20, alpha_group=0.1,
                        alpha_within=10.0, separation=2.0, label_count=5,
                        seed=seed)
        scen = gen_scenario(sc, 12)
        held = gen_heldout(sc, 500)
        lls = {}
        for mode, m in (("greedy", 1), ("multi-hypothesis", 6)):
            cfg = RoundConfig(K=4, C=40, T=12, m_max=m, mode=mode, model=GM2,
                              seed=seed)
            reps = run_training(cfg, scen.rounds)
            lls[mode] = heldout_log_likelihood(reps[-1], held, GM2)
        diffs.append(lls["multi-hypothesis"] - lls["greedy"])
    elapsed = time.monotonic() - start
    mean_diff = float(np.mean(diffs))
    strict = sum(d > 0 for d in diffs)
    assert elapsed < 300.0
    assert mean_diff >= -1e-6
    assert strict >= 6, f"strict improvement on only {strict}/10 seeds"
    _report(9, f"multi-hypothesis beats greedy held-out log-likelihood: "
               f"mean diff {mean_diff:+.3f}, strict on {strict}/10 seeds "
               f"({elapsed:.1f}s)")


def test_criterion_10_communication_ledger():
    sc = SkewConfig(scheme="feature-skew", groups=3, clients_per_group=2,
                    samples_per_client_per_round=10, separation=8.0, seed=1)
    scen = gen_scenario(sc, 4)
    k, c, t, m = 3, 6, 4, 4
    expected = {"multi-hypothesis": t * k * c * m,
                "consensus": t * k * c,
                "greedy": 0}
    for mode, want in expected.items():
        cfg = RoundConfig(K=k, C=c, T=t, m_max=m, mode=mode, model=GM2, seed=1)
        reps = run_training(cfg, scen.rounds)
        assert reps[-1].comm["weights_sent"] == want
    _report(10, f"weights-sent after {t} rounds: MH={expected['multi-hypothesis']}, "
                f"consensus={expected['consensus']}, greedy=0 (exact)")


def test_criterion_11_cli_determinism(tmp_path):
    cfg = {
        "mode": "consensus", "K": 2, "T": 4, "m_max": 3, "seed": 21,
        "scheme": "feature-skew", "groups": 2, "clients_per_group": 3,
        "samples_per_round": 15, "separation": 8.0, "label_count": 4,
        "test_samples": 30,
    }
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert cli_run(["run", "--config", str(path), "--out", str(out),
                        "--seed", "21"]) == 0
        outs.append(out)
    assert (outs[0] / "rounds.ndjson").read_bytes() == \
        (outs[1] / "rounds.ndjson").read_bytes()
    assert (outs[0] / "summary.json").read_bytes() == \
        (outs[1] / "summary.json").read_bytes()
    _report(11, "two identical CLI runs wrote byte-identical rounds.ndjson "
                "and summary.json")


def test_criterion_12_dirichlet_skew_fidelity():
    rng = np.random.default_rng(31)
    worst = 0.0
    for _ in range(5):
        group = rng.dirichlet(np.full(10, 0.1))
        draws = draw_client_distributions(group, 10.0, 10_000, rng)
        tv = 0.5 * float(np.abs(draws.mean(axis=0) - group).sum())
        worst = max(worst, tv)
    assert worst < 0.05

    sc = SkewConfig(scheme="label-skew", groups=4, clients_per_group=10,
                    samples_per_client_per_round=10, alpha_group=0.1,
                    alpha_within=10.0, separation=2.0, label_count=10, seed=2)
    scen = gen_label_skew(sc, 1)
    assert len(scen.rounds[0]) == 40
    assert scen.group_label_dists.shape == (4, 10)
    groups = [d.true_group for d in scen.rounds[0]]
    assert groups == sorted(groups)
    assert all(groups.count(g) == 10 for g in range(4))
    _report(12, f"stage-2 draws average to the group distribution "
                f"(worst TV {worst:.3f} < 0.05); Label(4,10,0.1) layout produced")
