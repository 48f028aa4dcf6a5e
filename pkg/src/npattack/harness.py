"""Experiment runner: attack suites, success-vs-queries curves, WER ablations.

A suite is the cross product of inputs, seeds, budgets, and methods.  Every
run owns its oracle and ledger, writes a trace (JSONL, one object per
improvement) and a result record (JSON), and the runner aggregates those
into a checkpointed CSV plus a summary keyed like a results table:
success rate, mean/std of the final perturbation size, mean/std SNR.
"""

import csv
import dataclasses
import json
from pathlib import Path
from typing import Optional

import numpy as np

from . import baselines, engine, metrics
from .audio import Direction, Waveform, read_wav, write_wav
from .oracle import (
    QueryLedger,
    RemoteOracle,
    SyntheticOracle,
    SyntheticOracleSpec,
    Transcript,
    closed_form_distance,
    random_sphere,
)
from .search import SearchConfig, worst_case_queries

DEFAULT_DIM = 4096
DEFAULT_CHECKPOINTS = (50, 100, 200, 500, 1000, 2000, 5000)
METHODS = ("np-attack", "random", "random-basis")


def trace_lines(trace) -> list:
    """Render a best-so-far trace as JSONL records."""
    return [
        json.dumps({"query": int(q), "best_lambda": float(lam)})
        for q, lam in trace
    ]


def write_trace(path, trace) -> None:
    lines = trace_lines(trace)
    text = "\n".join(lines)
    Path(path).write_text(text + "\n" if text else "")


def read_trace(path) -> list:
    out = []
    for line in Path(path).read_text().splitlines():
        if line.strip():
            rec = json.loads(line)
            out.append((int(rec["query"]), float(rec["best_lambda"])))
    return out


def best_lambda_at(trace, query_limit: int) -> float:
    """Best magnitude on record once ``query_limit`` queries have been spent."""
    best = float("inf")
    for q, lam in trace:
        if q <= query_limit:
            best = lam
        else:
            break
    return best


def lowpass_noise(rng, dim: int, peak: float = 0.08) -> np.ndarray:
    """Smooth random signal scaled to a small peak amplitude.

    Basing suite inputs on lowpass noise keeps perturbed samples far from
    the clip boundary, so synthetic-oracle geometry stays exact.
    """
    kernel = np.hanning(65)
    kernel /= kernel.sum()
    raw = rng.standard_normal(dim + kernel.size - 1)
    smooth = np.convolve(raw, kernel, mode="valid")[:dim]
    return peak * smooth / np.abs(smooth).max()


def halfspace_for(x: Waveform, rng) -> tuple:
    """Single-coordinate halfspace boundary with a known optimal distance.

    The normal touches one random sample, so the closest boundary point is
    a pure spike on that sample and the optimal magnitude is the margin
    divided by the weight.  Returns (oracle spec, optimal distance).
    """
    dim = len(x)
    coord = int(rng.integers(0, dim))
    weight = float(rng.uniform(0.5, 2.0))
    d_star = float(rng.uniform(0.08, 0.12))
    normal = np.zeros(dim)
    normal[coord] = weight
    spec = SyntheticOracleSpec(
        kind="halfspace",
        normal=normal,
        offset=weight * float(x.samples[coord]) + weight * d_star,
    )
    return spec, d_star


def synthetic_instance(kind: str, seed: int, dim: int = DEFAULT_DIM) -> tuple:
    """Deterministic (waveform, oracle spec, optimal distance) triple.

    The instance rng is decoupled from the attack seed so probing streams
    never alias instance geometry.  Sphere optima have no closed form under
    max-norm geometry, so that slot is None for spheres.
    """
    inst_rng = np.random.default_rng([seed, 0])
    x = Waveform(lowpass_noise(inst_rng, dim), 16_000)
    if kind == "halfspace":
        spec, d_star = halfspace_for(x, inst_rng)
        return x, spec, d_star
    if kind == "sphere":
        return x, random_sphere(inst_rng, x, radius=0.15), None
    raise ValueError(f"unknown synthetic kind {kind!r}")


ACCEPTANCE_SEARCH = SearchConfig(step=0.1, tolerance=5e-4, magnitude_cap=0.3)


def suite_attack_config(query_budget: int, lambda_max: float, seed: int,
                        search: Optional[SearchConfig] = None,
                        **overrides) -> engine.AttackConfig:
    """Attack configuration tuned for the synthetic halfspace suite.

    Seeding is sized to the budget: most instances resolve during the
    probing phase, with predictor rounds picking up the stragglers.
    """
    search = search or ACCEPTANCE_SEARCH
    per_probe = worst_case_queries(search)
    defaults = dict(
        n_init=min(180, query_budget // per_probe),
        candidates_per_round=5,
        initial_epochs=120,
        refresh_epochs=20,
        descent_steps=120,
        descent_lr=0.2,
    )
    defaults.update(overrides)
    return engine.AttackConfig(
        query_budget=query_budget,
        lambda_max=lambda_max,
        search=search,
        seed=seed,
        **defaults,
    )


@dataclasses.dataclass(frozen=True)
class ExperimentSpec:
    """Declarative suite description, loadable from JSON."""

    inputs: tuple
    methods: tuple
    query_budget: int
    lambda_max_values: tuple
    seeds: tuple
    output_dir: str
    oracle: str = "synthetic"
    lambda_max_relative: bool = False
    dim: int = DEFAULT_DIM
    basis_size: int = baselines.DEFAULT_BASIS_SIZE
    search: Optional[SearchConfig] = None
    attack_overrides: tuple = ()

    def __post_init__(self):
        if not self.inputs:
            raise ValueError("experiment needs at least one input")
        if not self.seeds:
            raise ValueError("experiment needs at least one seed")
        if not self.lambda_max_values:
            raise ValueError("experiment needs at least one lambda_max")
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise ValueError(f"unknown methods {bad}; expected one of {METHODS}")
        if self.query_budget < 1:
            raise ValueError("query_budget must be positive")

    @classmethod
    def from_json(cls, path) -> "ExperimentSpec":
        raw = json.loads(Path(path).read_text())
        return cls.from_dict(raw, base_dir=Path(path).parent)

    @classmethod
    def from_dict(cls, raw: dict, base_dir=Path(".")) -> "ExperimentSpec":
        inputs = raw.get("inputs")
        if isinstance(inputs, dict) and "synthetic" in inputs:
            syn = inputs["synthetic"]
            kind = syn.get("kind", "halfspace")
            count = int(syn.get("count", 1))
            parsed_inputs = tuple(f"synthetic:{kind}:{i}" for i in range(count))
        elif isinstance(inputs, list):
            parsed_inputs = tuple(str(base_dir / p) for p in inputs)
        else:
            raise ValueError("inputs must be a wav list or a synthetic suite")
        methods = raw.get("methods") or [raw.get("method", "np-attack")]
        search = None
        if "search" in raw:
            search = SearchConfig(**raw["search"])
        return cls(
            inputs=parsed_inputs,
            methods=tuple(methods),
            query_budget=int(raw["query_budget"]),
            lambda_max_values=tuple(float(v) for v in raw["lambda_max"]),
            seeds=tuple(int(s) for s in raw["seeds"]),
            output_dir=str(base_dir / raw["output_dir"]),
            oracle=str(raw.get("oracle", "synthetic")),
            lambda_max_relative=bool(raw.get("lambda_max_relative", False)),
            dim=int(raw.get("dim", DEFAULT_DIM)),
            basis_size=int(raw.get("basis_size", baselines.DEFAULT_BASIS_SIZE)),
            search=search,
            attack_overrides=tuple(sorted(raw.get("attack", {}).items())),
        )


def _load_input(token: str, seed: int, dim: int):
    """Resolve one input token to (waveform, oracle spec or None, optimum)."""
    if token.startswith("synthetic:"):
        parts = token.split(":")
        kind = parts[1]
        index = int(parts[2]) if len(parts) > 2 else 0
        return synthetic_instance(kind, seed + 1000 * index, dim)
    x = read_wav(token)
    return x, None, None


def _make_oracle(spec, oracle_kind: str, x: Waveform, seed: int, budget: int):
    if oracle_kind.startswith("remote:"):
        return RemoteOracle(oracle_kind[len("remote:"):], QueryLedger(budget + 1))
    if oracle_kind != "synthetic":
        raise ValueError(f"unknown oracle {oracle_kind!r}")
    if spec is None:
        # WAV input attacked under a synthetic boundary built around it.
        spec, _ = halfspace_for(x, np.random.default_rng([seed, 1]))
    return SyntheticOracle(spec, QueryLedger(budget + 1))


def _run_one(method: str, oracle, x: Waveform, cfg: engine.AttackConfig,
             basis_size: int) -> engine.AttackResult:
    if method == "np-attack":
        return engine.run(oracle, x, cfg)
    if method == "random":
        return baselines.random_search(oracle, x, cfg)
    if method == "random-basis":
        return baselines.random_basis_search(oracle, x, cfg, basis_size)
    raise ValueError(f"unknown method {method!r}")


def result_record(result: engine.AttackResult, x: Waveform, method: str,
                  input_token: str, seed: int, lambda_max: float,
                  optimum: Optional[float]) -> dict:
    rec = {
        "method": method,
        "input": input_token,
        "seed": seed,
        "lambda_max": lambda_max,
        "success": result.success,
        "best_lambda": result.best_lambda,
        "queries_used": result.queries_used,
        "base_transcript": str(result.base_transcript),
        "best_transcript": (
            None if result.best_transcript is None else str(result.best_transcript)
        ),
        "found_crossing": result.best_direction is not None,
        "optimal_lambda": optimum,
    }
    if result.best_direction is not None:
        delta = result.best_lambda * result.best_direction.unit()
        rec["snr_db"] = metrics.snr(x, delta)
    else:
        rec["snr_db"] = None
    return rec


def run_experiment(spec: ExperimentSpec) -> dict:
    """Run the whole suite, write report files, return the summary dict."""
    out_root = Path(spec.output_dir)
    out_root.mkdir(parents=True, exist_ok=True)
    records = []
    for method in spec.methods:
        for lam_value in spec.lambda_max_values:
            for input_index, token in enumerate(spec.inputs):
                for seed in spec.seeds:
                    x, oracle_spec, optimum = _load_input(token, seed, spec.dim)
                    lambda_max = lam_value
                    if spec.lambda_max_relative:
                        if optimum is None:
                            raise ValueError(
                                "relative lambda_max needs an input with a "
                                "known optimal distance"
                            )
                        lambda_max = lam_value * optimum
                    cfg = suite_attack_config(
                        spec.query_budget, lambda_max, seed,
                        search=spec.search,
                        **dict(spec.attack_overrides),
                    )
                    oracle = _make_oracle(
                        oracle_spec, spec.oracle, x, seed, spec.query_budget
                    )
                    result = _run_one(method, oracle, x, cfg, spec.basis_size)
                    run_dir = (
                        out_root / "runs" / method
                        / f"lmax{lam_value:g}_in{input_index}_seed{seed}"
                    )
                    run_dir.mkdir(parents=True, exist_ok=True)
                    write_trace(run_dir / "trace.jsonl", result.trace)
                    rec = result_record(
                        result, x, method, token, seed, lambda_max, optimum
                    )
                    rec["lambda_max_value"] = lam_value
                    rec["queries_to_success"] = engine.queries_to_success(
                        result, lambda_max
                    )
                    (run_dir / "result.json").write_text(
                        json.dumps(rec, indent=2) + "\n"
                    )
                    records.append(rec)
                    if result.best_direction is not None and not token.startswith(
                        "synthetic:"
                    ):
                        write_wav(
                            run_dir / "adversarial.wav",
                            engine.best_adversarial(result, x),
                        )

    _write_curves(out_root / "aggregate.csv", records, spec.query_budget)
    summary = _summarize(records)
    (out_root / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    return summary


def _checkpoints(budget: int) -> list:
    points = [c for c in DEFAULT_CHECKPOINTS if c <= budget]
    if budget not in points:
        points.append(budget)
    return points


def _write_curves(path, records, budget: int) -> None:
    """Success rate and distortion at log-spaced query checkpoints."""
    groups = {}
    for rec in records:
        groups.setdefault((rec["method"], rec["lambda_max_value"]), []).append(rec)
    rows = []
    for (method, lam_value), recs in sorted(groups.items()):
        previous_rate = 0.0
        for checkpoint in _checkpoints(budget):
            flags, linfs, snrs = [], [], []
            for rec in recs:
                q = rec["queries_to_success"]
                hit = q <= checkpoint
                flags.append(hit)
                if hit:
                    linfs.append(rec["best_lambda"])
                    if rec["snr_db"] is not None:
                        snrs.append(rec["snr_db"])
            rate = metrics.success_rate(flags)
            assert rate >= previous_rate, "success curve must be nondecreasing"
            previous_rate = rate
            rows.append({
                "method": method,
                "lambda_max": lam_value,
                "query_checkpoint": checkpoint,
                "success_rate": rate,
                "mean_linf": float(np.mean(linfs)) if linfs else float("nan"),
                "mean_snr": float(np.mean(snrs)) if snrs else float("nan"),
            })
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)


def _summarize(records) -> dict:
    groups = {}
    for rec in records:
        key = f"{rec['method']}@lmax={rec['lambda_max_value']:g}"
        groups.setdefault(key, []).append(rec)
    summary = {}
    for key, recs in sorted(groups.items()):
        wins = [r for r in recs if r["success"]]
        linfs = [r["best_lambda"] for r in wins]
        snrs = [r["snr_db"] for r in wins if r["snr_db"] is not None]
        finite_q = sorted(
            r["queries_to_success"] for r in recs
            if r["queries_to_success"] != float("inf")
        )
        qs = [r["queries_to_success"] for r in recs]
        summary[key] = {
            "runs": len(recs),
            "success_rate": metrics.success_rate([r["success"] for r in recs]),
            "linf_mean": float(np.mean(linfs)) if linfs else None,
            "linf_std": float(np.std(linfs)) if linfs else None,
            "snr_mean": float(np.mean(snrs)) if snrs else None,
            "snr_std": float(np.std(snrs)) if snrs else None,
            "median_queries_to_success": (
                float(np.median(qs)) if finite_q else None
            ),
            "mean_queries_used": float(np.mean([r["queries_used"] for r in recs])),
        }
    return summary


def load_results(results_dir) -> list:
    """Collect per-run result records written by :func:`run_experiment`."""
    paths = sorted(Path(results_dir).glob("runs/**/result.json"))
    if not paths:
        raise ValueError(f"no result.json files under {results_dir}")
    return [json.loads(p.read_text()) for p in paths]


def wer_ablation(records, thresholds) -> dict:
    """Success rate as the required transcript damage grows.

    Recomputes success per threshold from stored transcripts: the
    perturbation must fit the budget and the word error rate between base
    and adversarial transcripts must reach the threshold.
    """
    thresholds = [float(t) for t in thresholds]
    if not thresholds:
        raise ValueError("no thresholds given")
    rates = []
    for threshold in thresholds:
        flags = []
        for rec in records:
            if not rec["found_crossing"] or rec["best_transcript"] is None:
                flags.append(False)
                continue
            flags.append(
                metrics.is_success(
                    Transcript.from_text(rec["base_transcript"]),
                    Transcript.from_text(rec["best_transcript"]),
                    rec["best_lambda"],
                    rec["lambda_max"],
                    threshold,
                )
            )
        rates.append(metrics.success_rate(flags))
    order = np.argsort(thresholds)
    sorted_rates = [rates[i] for i in order]
    assert all(
        a >= b for a, b in zip(sorted_rates, sorted_rates[1:])
    ), "ablation must be nonincreasing in the threshold"
    return {"thresholds": thresholds, "success_rates": rates}
