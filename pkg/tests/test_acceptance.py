"""Acceptance suite: one test per criterion, each reporting a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v``; the per-criterion
lines appear in the terminal summary.
"""

import csv
import filecmp
import json
import math
import time

import numpy as np
import pytest
import statsmodels.api as sm
from scipy import stats

from coagg.channels import community_regression, global_regression, ols_fit
from coagg.config import RunConfig
from coagg.network import WeightedNetwork, shuffle_null, transition_system
from coagg.pipeline import normalized_manifest, run_pipeline
from coagg.proximity import Channel, ProximityMatrix, eg_index, labour_pooling
from coagg.stability import (MarkovKernel, Partition, louvain_maximize, mean_pairwise_vi, stability,
                             time_grid, variation_of_information)
from coagg.stability.louvain import louvain_labels, stability_matrix
from coagg.synthetic import SyntheticSpec, generate_synthetic_economy, write_economy


def random_network(rng, n, density=0.3):
    """Connected random weighted graph: a random spanning tree plus extra edges."""
    w = np.zeros((n, n))
    order = rng.permutation(n)
    for a in range(1, n):
        i, j = order[a], order[rng.integers(a)]
        w[i, j] = w[j, i] = rng.uniform(0.1, 2.0)
    extra = np.triu(rng.random((n, n)) < density, k=1)
    vals = rng.uniform(0.1, 2.0, size=(n, n))
    w = np.where(extra & (w == 0), vals, w)
    w = np.triu(w, k=1)
    return WeightedNetwork(tuple(f"v{i}" for i in range(n)), w + w.T)


def random_partition(rng, n, k_max=None):
    k = rng.integers(1, (k_max or n) + 1)
    return Partition(rng.integers(k, size=n))


# ---------------------------------------------------------------- 1


def test_criterion_1_stability_identities(report):
    rng = np.random.default_rng(101)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(2, 51))
        ts = transition_system(random_network(rng, n))
        kernel = MarkovKernel(ts)
        p = random_partition(rng, n)
        pi_c = p.indicator().T @ ts.pi
        for mode in ("continuous", "discrete"):
            r0 = stability(ts, p, 0, mode, kernel).r
            worst = max(worst, abs(r0 - (1.0 - np.sum(pi_c ** 2))))
            for t in (0, 1, 3):
                worst = max(worst, abs(stability(ts, Partition.whole(n), t, mode, kernel).r))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-12 and elapsed < 10
    report(1, ok, f"max error {worst:.2e} (tol 1e-12), {elapsed:.2f}s (limit 10s)")
    assert ok


# ---------------------------------------------------------------- 2


def modularity_oracle(w, labels):
    """Newman modularity from the edge list and community degree sums."""
    n = len(w)
    two_m = 0.0
    inside = {}
    degree_sum = {}
    for i in range(n):
        for j in range(n):
            if w[i, j]:
                two_m += w[i, j]
                if labels[i] == labels[j]:
                    inside[labels[i]] = inside.get(labels[i], 0.0) + w[i, j]
                degree_sum[labels[i]] = degree_sum.get(labels[i], 0.0) + w[i, j]
    return sum(inside.get(c, 0.0) / two_m - (degree_sum[c] / two_m) ** 2 for c in degree_sum)


def test_criterion_2_modularity_equivalence(report):
    rng = np.random.default_rng(202)
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(3, 41))
        net = random_network(rng, n, density=rng.uniform(0.05, 0.6))
        p = random_partition(rng, n, k_max=8)
        r1 = stability(transition_system(net), p, 1, "discrete").r
        worst = max(worst, abs(r1 - modularity_oracle(net.weights, p.assignment)))
    ok = worst <= 1e-12
    report(2, ok, f"max |r(1) - Q| {worst:.2e} (tol 1e-12) over 100 graphs")
    assert ok


# ---------------------------------------------------------------- 3


def test_criterion_3_continuous_decay_and_conservation(report):
    rng = np.random.default_rng(303)
    worst_r = worst_mass = 0.0
    grid = time_grid()
    for _ in range(30):
        n = int(rng.integers(3, 41))
        net = random_network(rng, n, density=0.3)
        # a triangle makes the graph non-bipartite
        w = net.weights.copy()
        for i, j in ((0, 1), (1, 2), (0, 2)):
            w[i, j] = w[j, i] = max(w[i, j], 1.0)
        ts = transition_system(WeightedNetwork(net.nodes, w))
        kernel = MarkovKernel(ts)
        for p in (random_partition(rng, n), Partition.singletons(n)):
            worst_r = max(worst_r, abs(stability(ts, p, 1e4, "continuous", kernel).r))
        for t in grid:
            worst_mass = max(worst_mass, abs(kernel.flow(t, "continuous").sum() - 1.0))
        for t in time_grid(mode="discrete"):
            worst_mass = max(worst_mass, abs(kernel.flow(t, "discrete").sum() - 1.0))
    ok = worst_r < 1e-6 and worst_mass <= 1e-10
    report(3, ok, f"max |r(1e4)| {worst_r:.2e} (tol 1e-6), max |sum - 1| {worst_mass:.2e} (tol 1e-10)")
    assert ok


# ---------------------------------------------------------------- 4


def test_criterion_4_vi_axioms(report):
    rng = np.random.default_rng(404)
    n = 40
    bad = 0
    for _ in range(1000):
        a, b, c = (random_partition(rng, n, k_max=10) for _ in range(3))
        ab, ba = variation_of_information(a, b), variation_of_information(b, a)
        bc, ac = variation_of_information(b, c), variation_of_information(a, c)
        checks = [
            ab == ba,
            variation_of_information(a, a) == 0.0,
            (ab == 0) == (a == b),
            ac <= ab + bc + 1e-12,
            0.0 <= ab <= math.log(n) + 1e-12,
        ]
        bad += not all(checks)
    one_vs_singletons = variation_of_information(Partition.whole(n), Partition.singletons(n))
    cross = variation_of_information(Partition([0, 0, 1, 1]), Partition([0, 1, 0, 1]))
    hand = abs(one_vs_singletons - math.log(n)) <= 1e-12 and abs(cross - 2 * math.log(2)) <= 1e-12
    ok = bad == 0 and hand
    report(4, ok, f"{1000 - bad}/1000 triples satisfy the axioms; VI(one, singletons) - ln 40 = "
                  f"{one_vs_singletons - math.log(n):.1e}; cross - 2 ln 2 = {cross - 2 * math.log(2):.1e}")
    assert ok


# ---------------------------------------------------------------- 5


def ring_of_cliques(n_cliques=5, size=8):
    n = n_cliques * size
    w = np.zeros((n, n))
    for c in range(n_cliques):
        idx = np.arange(c * size, (c + 1) * size)
        w[np.ix_(idx, idx)] = 1.0
        a, b = c * size + size - 1, ((c + 1) % n_cliques) * size
        w[a, b] = w[b, a] = 1.0
    np.fill_diagonal(w, 0.0)
    return WeightedNetwork(tuple(f"v{i}" for i in range(n)), w), np.repeat(np.arange(n_cliques), size)


def _runs_at(net, t, seeds):
    ts = transition_system(net)
    B, linked = stability_matrix(MarkovKernel(ts), t, "continuous")
    return [Partition(louvain_labels(B, linked, np.random.default_rng(s))) for s in seeds]


def test_criterion_5_planted_recovery(report):
    t0 = time.perf_counter()
    net, truth = ring_of_cliques()
    planted = Partition(truth)
    ts = transition_system(net)
    exact = sum(variation_of_information(louvain_maximize(ts, 1.0, seed=s), planted) == 0
                for s in range(100))
    runs = _runs_at(net, 1.0, range(100))
    vi_real = mean_pairwise_vi(runs)
    null_vis = []
    for j in range(4):
        null, _ = shuffle_null(net, 1000 + j).largest_component()
        null_vis.append(mean_pairwise_vi(_runs_at(null, 1.0, range(100))))
    vi_null = float(np.mean(null_vis))
    elapsed = time.perf_counter() - t0
    ok = exact >= 95 and vi_real < vi_null and elapsed < 60
    report(5, ok, f"{exact}/100 exact recoveries (need 95); mean VI {vi_real:.3f} vs null "
                  f"{vi_null:.3f}; {elapsed:.1f}s (limit 60s)")
    assert ok


# ---------------------------------------------------------------- 6


def normal_equations(x, y):
    """Independent OLS: normal equations, residual variance and Student t."""
    X = np.column_stack([np.ones_like(x), x])
    XtX = X.T @ X
    coef = np.linalg.solve(XtX, X.T @ y)
    resid = y - X @ coef
    n = len(y)
    s2 = resid @ resid / (n - 2)
    se = math.sqrt(s2 * np.linalg.inv(XtX)[1, 1])
    p = 2 * stats.t.sf(abs(coef[1] / se), n - 2)
    tss = np.sum((y - y.mean()) ** 2)
    return coef[0], coef[1], se, p, 1 - resid @ resid / tss


def test_criterion_6_regression_oracle(report):
    rng = np.random.default_rng(606)
    worst = 0.0
    for _ in range(1000):
        n = int(rng.integers(5, 200))
        x = rng.normal(size=n) * rng.uniform(0.1, 10)
        y = rng.normal() + rng.normal() * x + rng.normal(size=n) * rng.uniform(0.1, 5)
        f = ols_fit(x, y)
        oracle = normal_equations(x, y)
        got = (f.alpha, f.beta, f.se, f.p_value, f.r2)
        for g, o in zip(got, oracle):
            worst = max(worst, abs(g - o) / max(1.0, abs(o)))
    # cross-check a sample against statsmodels as a second implementation
    for _ in range(50):
        x = rng.normal(size=30)
        y = 0.3 * x + rng.normal(size=30)
        res = sm.OLS(y, sm.add_constant(x)).fit()
        f = ols_fit(x, y)
        for g, o in ((f.alpha, res.params[0]), (f.beta, res.params[1]), (f.se, res.bse[1]),
                     (f.p_value, res.pvalues[1]), (f.r2, res.rsquared)):
            worst = max(worst, abs(g - o) / max(1.0, abs(o)))

    n = 25
    a = rng.normal(size=(n, n))
    b = rng.normal(size=(n, n))
    eg = ProximityMatrix(Channel.EG, tuple(map(str, range(n))), (a + a.T) / 2)
    z = ProximityMatrix(Channel.L, tuple(map(str, range(n))), (b + b.T) / 2)
    whole = community_regression(eg, z, Partition.whole(n))[0]
    same = whole.fit == global_regression(eg, z).fit
    ok = worst <= 1e-10 and same
    report(6, ok, f"max deviation {worst:.2e} (tol 1e-10) over 1000 instances; "
                  f"all-in-one community equals global: {same}")
    assert ok


# ---------------------------------------------------------------- 7


REPORTED_N = {122: 7381, 86: 3655, 184: 16836}


def test_criterion_7_pair_counts(report):
    ok = True
    for n in (4, 9, 20, 33):
        econ = generate_synthetic_economy(SyntheticSpec(cluster_sizes=(n // 2, n - n // 2), seed=n))
        est = global_regression(eg_index(econ.tables.employment), labour_pooling(econ.tables.occupations))
        ok &= est.n == n * (n - 1) // 2
    reported = all(n * (n - 1) // 2 == big_n for n, big_n in REPORTED_N.items())
    ok &= reported
    report(7, ok, "global N = n(n-1)/2 on synthetic catalogs; 122, 86, 184 industries give "
                  + ", ".join(str(n * (n - 1) // 2) for n in REPORTED_N))
    assert ok


# ---------------------------------------------------------------- 8

E2E_SIZES = (15, 15)
E2E_CONFIG = dict(times="1e-2:1e2:40", repeats=20, nulls=0, max_k=14)


def _read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def end_to_end(seed, root):
    """Synthetic economy through the whole pipeline; returns (community ok, education ok)."""
    econ = generate_synthetic_economy(SyntheticSpec(cluster_sizes=E2E_SIZES, seed=seed))
    inputs = write_economy(econ, root / f"in{seed}")
    cfg = RunConfig(inputs=str(inputs), out=str(root / f"run{seed}"), seed=seed, **E2E_CONFIG).validate()
    run = run_pipeline(cfg)
    truth = json.loads((inputs / "truth.json").read_text())
    labour_ids = set(truth["clusters"][0])

    p2 = run / "communities" / "partitions" / "P_2.json"
    comm_ok = False
    if p2.is_file():
        comms = json.loads(p2.read_text())["communities"]
        est = {(r["scope_id"], r["channel"]): float(r["beta"] or "nan")
               for r in _read_csv(run / "channels" / "community.csv")}
        comm_ok = True
        for c, members in enumerate(comms):
            beta_l, beta_io = est[(f"P_2:{c}", "L")], est[(f"P_2:{c}", "IO")]
            labour_side = sum(m in labour_ids for m in members) > len(members) / 2
            comm_ok &= (beta_l > beta_io) if labour_side else (beta_io > beta_l)
        comm_ok &= len({sum(m in labour_ids for m in ms) > len(ms) / 2 for ms in comms}) == 2

    fits = {(r["scheme"], r["channel"]): float(r["b"])
            for r in _read_csv(run / "education" / "fits.csv") if r["zeroing"] == "none"}
    edu_ok = all(fits[(s, "L")] > 0 and fits[(s, "IO")] < 0 for s in ("OLS", "WLSI", "WLSII"))
    return bool(comm_ok), bool(edu_ok)


@pytest.mark.slow
def test_criterion_8_synthetic_channel_recovery(report, tmp_path):
    t0 = time.perf_counter()
    results = [end_to_end(seed, tmp_path) for seed in range(50)]
    elapsed = time.perf_counter() - t0
    comm = sum(c for c, _ in results)
    edu = sum(e for _, e in results)
    ok = comm >= 45 and edu >= 45 and elapsed < 300
    report(8, ok, f"community sign pattern {comm}/50, education signs {edu}/50 (need 45 each); "
                  f"{elapsed:.0f}s (limit 300s)")
    assert ok


# ---------------------------------------------------------------- 9


def _tree(root):
    return sorted(p.relative_to(root).as_posix() for p in root.rglob("*") if p.is_file())


def test_criterion_9_determinism(report, tmp_path):
    econ = generate_synthetic_economy(SyntheticSpec(cluster_sizes=(10, 10), seed=7))
    inputs = write_economy(econ, tmp_path / "inputs")
    base = RunConfig(inputs=str(inputs), seed=11, times="1e-2:1e2:25", repeats=8, nulls=2)
    a = run_pipeline(base.__class__(**{**base.__dict__, "out": str(tmp_path / "a")}))
    b = run_pipeline(base.__class__(**{**base.__dict__, "out": str(tmp_path / "b"), "workers": 2}))
    files_a, files_b = _tree(a), _tree(b)
    differing = [f for f in files_a if f != "manifest.json" and not filecmp.cmp(a / f, b / f, shallow=False)]
    manifests_equal = normalized_manifest(a / "manifest.json") == normalized_manifest(b / "manifest.json")
    ok = files_a == files_b and not differing and manifests_equal
    report(9, ok, f"{len(files_a)} files compared, {len(differing)} differ; normalized manifests "
                  f"equal: {manifests_equal}")
    assert ok
