"""Command line front end: single attacks, experiment suites, WER ablations.

Exit codes: 0 when the attack met its budget, 2 when the budget ran out
without success, 3 for bad arguments or specs, 4 for oracle failures.
"""

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import baselines, engine, harness
from .audio import WavFormatError, read_wav, write_wav
from .oracle import OracleError, QueryLedger, RemoteOracle, SyntheticOracle
from .search import SearchConfig

EXIT_SUCCESS = 0
EXIT_NO_SUCCESS = 2
EXIT_USAGE = 3
EXIT_RUNTIME = 4

logger = logging.getLogger(__name__)


class _Parser(argparse.ArgumentParser):
    """Argparse with usage failures moved off exit code 2.

    Code 2 is reserved for "attack ran out of budget", so malformed
    invocations exit with 3 instead of argparse's default.
    """

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="npattack")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    attack = sub.add_parser("attack", help="attack one input")
    attack.add_argument(
        "--input", required=True,
        help="WAV path, synthetic:halfspace, or synthetic:sphere",
    )
    attack.add_argument(
        "--oracle", default="synthetic", help="synthetic or remote:URL"
    )
    attack.add_argument(
        "--method", default="np-attack", choices=harness.METHODS
    )
    attack.add_argument("--query-budget", type=int, default=2000)
    attack.add_argument("--lambda-max", type=float, default=0.15)
    attack.add_argument("--seed", type=int, default=0)
    attack.add_argument("--out", default="attack_out")
    attack.add_argument("--dim", type=int, default=harness.DEFAULT_DIM,
                        help="sample count for synthetic inputs")
    attack.add_argument("--step", type=float, default=None)
    attack.add_argument("--tolerance", type=float, default=None)
    attack.add_argument("--cap", type=float, default=None)
    attack.add_argument("--n-init", type=int, default=None)
    attack.add_argument("--candidates", type=int, default=None)
    attack.add_argument("--basis-size", type=int,
                        default=baselines.DEFAULT_BASIS_SIZE)

    experiment = sub.add_parser("experiment", help="run a suite from a JSON spec")
    experiment.add_argument("--spec", required=True)

    ablation = sub.add_parser(
        "ablation", help="success rate vs required WER on stored results"
    )
    ablation.add_argument("--results", required=True)
    ablation.add_argument(
        "--thresholds", type=float, nargs="+",
        default=[0.2, 0.4, 0.6, 0.8, 1.0],
    )
    return parser


def _search_config(args) -> SearchConfig:
    base = harness.ACCEPTANCE_SEARCH if args.input.startswith("synthetic:") \
        else SearchConfig()
    return SearchConfig(
        step=base.step if args.step is None else args.step,
        tolerance=base.tolerance if args.tolerance is None else args.tolerance,
        magnitude_cap=base.magnitude_cap if args.cap is None else args.cap,
    )


def _cmd_attack(args) -> int:
    if args.input.startswith("synthetic:"):
        kind = args.input.split(":", 1)[1]
        x, spec, optimum = harness.synthetic_instance(kind, args.seed, args.dim)
    else:
        x, spec, optimum = read_wav(args.input), None, None

    overrides = {}
    if args.n_init is not None:
        overrides["n_init"] = args.n_init
    if args.candidates is not None:
        overrides["candidates_per_round"] = args.candidates
    cfg = harness.suite_attack_config(
        args.query_budget, args.lambda_max, args.seed,
        search=_search_config(args), **overrides,
    )

    if args.oracle.startswith("remote:"):
        oracle = RemoteOracle(
            args.oracle[len("remote:"):], QueryLedger(args.query_budget + 1)
        )
    elif args.oracle == "synthetic":
        if spec is None:
            spec, optimum = harness.halfspace_for(
                x, np.random.default_rng([args.seed, 1])
            )
        oracle = SyntheticOracle(spec, QueryLedger(args.query_budget + 1))
    else:
        raise ValueError(f"unknown oracle {args.oracle!r}")

    result = harness._run_one(args.method, oracle, x, cfg, args.basis_size)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    harness.write_trace(out / "trace.jsonl", result.trace)
    record = harness.result_record(
        result, x, args.method, args.input, args.seed, args.lambda_max, optimum
    )
    (out / "result.json").write_text(json.dumps(record, indent=2) + "\n")
    if result.best_direction is not None and not args.input.startswith("synthetic:"):
        write_wav(out / "adversarial.wav", engine.best_adversarial(result, x))

    status = "success" if result.success else "budget exhausted"
    print(
        f"{status}: best_lambda={result.best_lambda:.6g} "
        f"queries={result.queries_used} -> {out}"
    )
    return EXIT_SUCCESS if result.success else EXIT_NO_SUCCESS


def _cmd_experiment(args) -> int:
    spec = harness.ExperimentSpec.from_json(args.spec)
    summary = harness.run_experiment(spec)
    print(json.dumps(summary, indent=2))
    print(f"reports written to {spec.output_dir}")
    return EXIT_SUCCESS


def _cmd_ablation(args) -> int:
    records = harness.load_results(args.results)
    report = harness.wer_ablation(records, args.thresholds)
    out_path = Path(args.results) / "ablation.json"
    out_path.write_text(json.dumps(report, indent=2) + "\n")
    for threshold, rate in zip(report["thresholds"], report["success_rates"]):
        print(f"min_wer {threshold:.2f}: {rate:.1f}%")
    return EXIT_SUCCESS


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    handlers = {
        "attack": _cmd_attack,
        "experiment": _cmd_experiment,
        "ablation": _cmd_ablation,
    }
    try:
        return handlers[args.command](args)
    except OracleError as exc:
        print(f"oracle error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (WavFormatError, FileNotFoundError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
