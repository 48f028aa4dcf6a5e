"""End-to-end checks pinning the advertised guarantees of the package.

Each test prints one [PASS]/[FAIL] line naming the guarantee it audits, so a
plain pytest run doubles as an acceptance report.  Shared suites (20 seeded
synthetic instances at full dimension) are computed once per module.
"""

import functools
import math
import time
from types import SimpleNamespace

import numpy as np
import pytest

from npattack import autodiff as ad
from npattack import baselines, engine, harness, metrics
from npattack import predictor as pred
from npattack.audio import Direction, Waveform
from npattack.oracle import (
    QueryLedger,
    SyntheticOracle,
    SyntheticOracleSpec,
    closed_form_distance,
    random_sphere,
)
from npattack.search import SearchConfig, estimate_g, refine_query_count

SUITE_DIM = 4096
SUITE_BUDGET = 2000
SUITE_SEEDS = tuple(range(20))


def announce(capsys, name, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}"
    with capsys.disabled():
        print(line, flush=True)
    assert ok, line


def run_suite_instance(seed, lambda_factor, method):
    x, spec, d_star = harness.synthetic_instance("halfspace", seed, SUITE_DIM)
    lambda_max = lambda_factor * d_star
    cfg = harness.suite_attack_config(SUITE_BUDGET, lambda_max, seed)
    oracle = SyntheticOracle(spec, QueryLedger(SUITE_BUDGET + 1))
    if method == "np-attack":
        result = engine.run(oracle, x, cfg)
    elif method == "random":
        result = baselines.random_search(oracle, x, cfg)
    elif method == "random-basis":
        result = baselines.random_basis_search(oracle, x, cfg)
    else:
        raise ValueError(method)
    return SimpleNamespace(
        seed=seed,
        x=x,
        spec=spec,
        d_star=d_star,
        lambda_max=lambda_max,
        method=method,
        result=result,
        oracle_used=oracle.ledger.used,
    )


@pytest.fixture(scope="module")
def tight_suite():
    """Attack runs with the budget cut to 5% above each known optimum."""
    start = time.perf_counter()
    runs = [run_suite_instance(s, 1.05, "np-attack") for s in SUITE_SEEDS]
    return runs, time.perf_counter() - start


@pytest.fixture(scope="module")
def loose_suite():
    """All three methods on the same instances at 1.5x the optimum."""
    runs = {
        method: [run_suite_instance(s, 1.5, method) for s in SUITE_SEEDS]
        for method in ("np-attack", "random", "random-basis")
    }
    return runs


def test_boundary_search_accuracy_and_query_count(capsys):
    cfg = SearchConfig(step=0.05, tolerance=1e-4, magnitude_cap=0.6)
    refine = refine_query_count(cfg)
    rng = np.random.default_rng(2024)
    start = time.perf_counter()
    crossings = 0
    worst_gap = 0.0
    for i in range(200):
        dim = 128
        x = Waveform(harness.lowpass_noise(rng, dim), 16_000)
        if i % 2 == 0:
            normal = rng.standard_normal(dim)
            spec = SyntheticOracleSpec(
                kind="halfspace",
                normal=normal,
                offset=float(normal @ x.samples) + float(rng.uniform(0.3, 1.5)),
            )
        else:
            spec = random_sphere(rng, x, radius=float(rng.uniform(0.2, 0.5)))
        theta = Direction(rng.uniform(-1.0, 1.0, dim))
        exact = closed_form_distance(spec, x, theta)
        oracle = SyntheticOracle(spec, QueryLedger(10_000))
        base = spec.transcript_at(x.samples)
        est = estimate_g(oracle, x, theta, cfg, base)
        if exact is not None and exact <= cfg.magnitude_cap:
            crossings += 1
            assert est.found, f"instance {i} should cross at {exact}"
            gap = abs(est.lambda_hat - exact)
            worst_gap = max(worst_gap, gap)
            assert gap <= 1e-4, f"instance {i}: gap {gap}"
            coarse = math.ceil(exact / cfg.step)
            assert est.queries_spent == coarse + refine, (
                f"instance {i}: spent {est.queries_spent}, "
                f"expected {coarse} + {refine}"
            )
        else:
            assert not est.found
            assert est.lambda_hat == cfg.magnitude_cap
    elapsed = time.perf_counter() - start
    ok = crossings >= 50 and worst_gap <= 1e-4 and elapsed < 10.0
    announce(
        capsys,
        "boundary-search",
        ok,
        f"200 instances, {crossings} crossings, worst gap {worst_gap:.2e} "
        f"<= 1e-4, exact query counts, {elapsed:.1f}s",
    )


def test_predictor_gradients_match_finite_differences(capsys):
    eps = 1e-6
    start = time.perf_counter()
    checked = 0
    worst_rel = 0.0
    for seed in range(20):
        rng = np.random.default_rng(seed)
        params = pred.PredictorParams(seed=seed)
        thetas = rng.uniform(-1.0, 1.0, (2, 1200))
        mags = rng.uniform(0.05, 0.5, 2)

        loss = pred.loss_tensor(params, thetas, mags)
        loss.backward()
        for tensor in params.tensors():
            flat = tensor.data.reshape(-1)
            grads = tensor.grad.reshape(-1)
            coords = rng.choice(flat.size, size=min(2, flat.size), replace=False)
            for c in coords:
                saved = flat[c]
                flat[c] = saved + eps
                hi = pred.loss_value(params, thetas, mags)
                flat[c] = saved - eps
                lo = pred.loss_value(params, thetas, mags)
                flat[c] = saved
                fd = (hi - lo) / (2.0 * eps)
                assert grads[c] == pytest.approx(fd, rel=1e-3, abs=1e-8)
                if abs(fd) > 1e-8:
                    worst_rel = max(worst_rel, abs(grads[c] - fd) / abs(fd))
                checked += 1

        def input_loss(arr):
            s = pred.scores(params, ad.constant(arr))
            log_h = ad.log(ad.exp(s))
            return float(ad.mean_all(ad.square(ad.sub_const(log_h, np.log(mags)))).data)

        t = ad.parameter(thetas.copy())
        expr = ad.mean_all(
            ad.square(ad.sub_const(ad.log(ad.exp(pred.scores(params, t))), np.log(mags)))
        )
        expr.backward()
        grads = t.grad.reshape(-1)
        work = thetas.copy()
        flat = work.reshape(-1)
        for c in rng.choice(flat.size, size=3, replace=False):
            saved = flat[c]
            flat[c] = saved + eps
            hi = input_loss(work)
            flat[c] = saved - eps
            lo = input_loss(work)
            flat[c] = saved
            fd = (hi - lo) / (2.0 * eps)
            assert grads[c] == pytest.approx(fd, rel=1e-3, abs=1e-8)
            if abs(fd) > 1e-8:
                worst_rel = max(worst_rel, abs(grads[c] - fd) / abs(fd))
            checked += 1
    elapsed = time.perf_counter() - start
    ok = elapsed < 60.0
    announce(
        capsys,
        "gradient-check",
        ok,
        f"20 seeds, {checked} coordinates (weights and inputs), "
        f"worst rel err {worst_rel:.2e} <= 1e-3, {elapsed:.1f}s",
    )


def test_predictor_output_properties(capsys):
    rng = np.random.default_rng(5)
    params = pred.PredictorParams(seed=0)

    # always-positive predictions
    for length in (1024, 1500, 4096):
        out = pred.predict(params, rng.uniform(-1, 1, (3, length)))
        assert np.all(out > 0.0)

    # scale invariance: bit-exact for power-of-two scales, machine
    # precision otherwise
    theta = rng.uniform(-1, 1, 2000)
    base_val = pred.predict(params, theta)
    assert pred.predict(params, 4.0 * theta) == base_val
    for c in (3.0, 0.017, 250.0):
        np.testing.assert_allclose(pred.predict(params, c * theta), base_val, rtol=1e-12)

    # training loss is exactly zero when predictions already match
    zero_ok = True
    for seed in range(5):
        p = pred.PredictorParams(seed=seed)
        thetas = rng.uniform(-1, 1, (4, 1500))
        zero_ok &= pred.loss_value(p, thetas, pred.predict(p, thetas)) == 0.0
    assert zero_ok

    # spectrogram frame count follows the hop formula for random lengths
    for length in rng.integers(1024, 8192, size=10):
        spec = ad.stft_magnitude(ad.constant(rng.uniform(-1, 1, (1, int(length)))))
        frames = (int(length) - 1024) // 256 + 1
        assert spec.shape == (1, frames, 513)

    announce(
        capsys,
        "predictor-properties",
        True,
        "positive outputs, scale invariant, exact-zero matching loss, "
        "spectrogram frames = (L-1024)//256+1",
    )


def test_predictor_overfits_small_dataset(capsys):
    rng = np.random.default_rng(7)
    thetas = rng.uniform(-1, 1, (10, 2048))
    mags = rng.uniform(0.05, 0.5, 10)
    params = pred.PredictorParams(seed=0)
    history = pred.train(params, thetas, mags, pred.TrainConfig(epochs=1000))
    hit = next((i for i, v in enumerate(history) if v < 1e-2), None)
    ok = hit is not None
    announce(
        capsys,
        "overfit",
        ok,
        f"10 pairs, loss < 1e-2 at epoch {hit} of 1000, final {history[-1]:.2e}",
    )


def test_attack_reaches_near_optimal_distances(capsys, tight_suite):
    runs, elapsed = tight_suite
    hits = sum(1 for r in runs if r.result.best_lambda <= 1.05 * r.d_star)
    ok = hits >= 18 and elapsed < 600.0
    announce(
        capsys,
        "near-optimality",
        ok,
        f"{hits}/20 instances within 5% of the known optimum "
        f"(budget {SUITE_BUDGET}, dim {SUITE_DIM}), {elapsed:.1f}s",
    )


def test_attack_beats_query_matched_baselines(capsys, loose_suite, tmp_path):
    medians = {}
    for method, runs in loose_suite.items():
        qts = [engine.queries_to_success(r.result, r.lambda_max) for r in runs]
        medians[method] = float(np.median(qts))

    records = []
    for method, runs in loose_suite.items():
        for r in runs:
            rec = harness.result_record(
                r.result, r.x, method, f"synthetic:halfspace:{r.seed}",
                r.seed, r.lambda_max, r.d_star,
            )
            rec["lambda_max_value"] = 1.5
            rec["queries_to_success"] = engine.queries_to_success(
                r.result, r.lambda_max
            )
            records.append(rec)
    curve_path = tmp_path / "curves.csv"
    harness._write_curves(curve_path, records, SUITE_BUDGET)
    curves = {}
    lines = curve_path.read_text().splitlines()
    for line in lines[1:]:
        method, _, _, rate = line.split(",")[:4]
        curves.setdefault(method, []).append(float(rate))
    monotone = all(rates == sorted(rates) for rates in curves.values())

    ok = (
        medians["np-attack"] <= medians["random"]
        and medians["np-attack"] <= medians["random-basis"]
        and monotone
    )
    announce(
        capsys,
        "baseline-dominance",
        ok,
        f"median queries to success {medians['np-attack']:g} (predictor) <= "
        f"{medians['random']:g} (random) and {medians['random-basis']:g} "
        f"(random basis); success curves nondecreasing",
    )


def test_metric_implementations(capsys):
    def recursive_edit_distance(ref, hyp):
        @functools.lru_cache(maxsize=None)
        def d(i, j):
            if i == 0:
                return j
            if j == 0:
                return i
            return min(
                d(i - 1, j - 1) + (ref[i - 1] != hyp[j - 1]),
                d(i - 1, j) + 1,
                d(i, j - 1) + 1,
            )

        return d(len(ref), len(hyp))

    from npattack.oracle import Transcript

    rng = np.random.default_rng(1234)
    vocab = ["a", "b", "c", "d", "e"]
    for _ in range(1000):
        n = int(rng.integers(1, 9))
        m = int(rng.integers(0, 9))
        ref = tuple(vocab[k] for k in rng.integers(0, 5, n))
        hyp = tuple(vocab[k] for k in rng.integers(0, 5, m))
        b = metrics.wer(Transcript(words=ref), Transcript(words=hyp))
        total = b.substitutions + b.insertions + b.deletions
        assert total == recursive_edit_distance(ref, hyp)
        assert b.wer == total / n

    x = Waveform(harness.lowpass_noise(rng, 256), 16_000)
    assert metrics.snr(x, x.samples) == 0.0

    assert metrics.success_rate([True, True, False, False, False]) == 40.0
    assert metrics.success_rate([True] * 7) == 100.0
    assert metrics.success_rate([False] * 3) == 0.0

    announce(
        capsys,
        "metrics",
        True,
        "word error rate matches an independent alignment oracle on 1000 "
        "pairs, snr(x, x) = 0 dB, exact success-rate arithmetic",
    )


def test_budget_safety_and_determinism(capsys, tight_suite, loose_suite):
    runs, _ = tight_suite
    audited = 0
    for r in runs + [r for rs in loose_suite.values() for r in rs]:
        assert r.result.queries_used <= SUITE_BUDGET
        assert r.oracle_used == r.result.queries_used + 1
        audited += 1

    # byte-identical traces on rerun: seeding-phase path at full dimension
    for r in runs[:3]:
        again = run_suite_instance(r.seed, 1.05, "np-attack")
        assert harness.trace_lines(again.result.trace) == harness.trace_lines(
            r.result.trace
        )
        assert again.result.queries_used == r.result.queries_used

    for method in ("random", "random-basis"):
        first = loose_suite[method][0]
        again = run_suite_instance(first.seed, 1.5, method)
        assert harness.trace_lines(again.result.trace) == harness.trace_lines(
            first.result.trace
        )

    # predictor-round path at reduced dimension
    def rounds_run():
        rng = np.random.default_rng([2, 100])
        x = Waveform(rng.uniform(-0.02, 0.02, 512), 16_000)
        a = int(rng.integers(0, 512))
        normal = np.zeros(512)
        normal[a] = 1.2
        spec = SyntheticOracleSpec(
            kind="halfspace", normal=normal, offset=1.2 * x.samples[a] + 0.12
        )
        oracle = SyntheticOracle(spec, QueryLedger(301))
        cfg = engine.AttackConfig(
            query_budget=300,
            lambda_max=0.15,
            n_init=2,
            search=harness.ACCEPTANCE_SEARCH,
            seed=2,
            initial_epochs=5,
            refresh_epochs=2,
            candidates_per_round=5,
            descent_steps=10,
        )
        return engine.run(oracle, x, cfg), oracle.ledger.used

    first, used_a = rounds_run()
    second, used_b = rounds_run()
    assert harness.trace_lines(first.trace) == harness.trace_lines(second.trace)
    assert first.trace, "round path should improve at least once"
    assert (used_a, first.queries_used) == (used_b, second.queries_used)
    assert first.queries_used <= 300 and used_a == first.queries_used + 1

    announce(
        capsys,
        "budget-and-determinism",
        True,
        f"{audited} runs within budget (+1 transcript query), reruns "
        "byte-identical on seeding, round, and baseline paths",
    )


def test_success_rate_versus_wer_threshold(capsys, loose_suite):
    records = []
    for r in loose_suite["np-attack"]:
        rec = harness.result_record(
            r.result, r.x, "np-attack", f"synthetic:halfspace:{r.seed}",
            r.seed, r.lambda_max, r.d_star,
        )
        records.append(rec)
    thresholds = [0.2, 0.4, 0.6, 0.8, 1.0]
    report = harness.wer_ablation(records, thresholds)
    rates = report["success_rates"]
    nonincreasing = all(a >= b for a, b in zip(rates, rates[1:]))
    # the synthetic oracle swaps two of five words, so demanding more than
    # 0.4 leaves nothing
    ok = nonincreasing and rates[0] > 0.0 and rates[-1] == 0.0
    announce(
        capsys,
        "wer-ablation",
        ok,
        "success rates " + ", ".join(f"{t:.1f}:{r:.0f}%" for t, r in zip(thresholds, rates)),
    )
