from __future__ import annotations

import argparse
import json
import logging
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np
import regex
from pydantic import ValidationError
from rich.console import Console

from .config import RunConfig, configure_logging
from .dclite import Event, load_program, query, sample_values
from .dclite.sampler import parse_atom
from .errors import AnchorloopError
from .matcher import compare_algorithms, load_dataset, save_dataset, train
from .models import ALGORITHMS, load_model, save_model
from .programs import BUNDLED_PROGRAMS, bundled_program
from .scenarios import builtin_scenarios
from .simkit import (
    DEFAULT_DATASET_SIZE,
    aggregate,
    default_model,
    evaluate,
    generate_matcher_dataset,
    label_balance,
    resolve_scenario,
    run_scenario,
)
from .trace import TraceWriter

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2

CONSOLE = Console(highlight=False, soft_wrap=True, emoji=False)
ERR_CONSOLE = Console(stderr=True, highlight=False, soft_wrap=True)

logger = logging.getLogger(__name__)

TERM_PATTERN = regex.compile(r"^\s*(?P<name>[a-z_][\w\-]*)\s*(?:\(\s*(?P<args>[^()]*?)\s*\))?\s*(?:@\s*(?P<time>\d+))?\s*$")


class UsageError(AnchorloopError):
    """Bad flags, configuration or input files."""


def _emit(payload: Any) -> None:
    CONSOLE.print(json.dumps(payload, sort_keys=True, indent=2), markup=False)


def _write_json(path: Optional[Path], payload: Any) -> None:
    if path is None:
        return
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def _usage(load: Callable[[], Any]) -> Any:
    try:
        return load()
    except (AnchorloopError, OSError, ValidationError, ValueError) as exc:
        raise UsageError(str(exc)) from exc


def _trace_path(base: Optional[Path], seed: int, repeat: int) -> Optional[Path]:
    if base is None or repeat == 1:
        return base
    return base.with_name(f"{base.stem}-seed{seed}{base.suffix}")


# --- Commands ---


def cmd_run(args: argparse.Namespace) -> int:
    overrides = {
        "scenario": args.scenario,
        "seed": args.seed,
        "particles": args.particles,
        "tracker": args.tracker,
        "model": args.model,
        "threshold": args.threshold,
        "trace": args.trace,
        "metrics": args.metrics,
        "repeat": args.repeat,
        "trace_particles": args.trace_particles,
    }
    run_config = _usage(lambda: RunConfig.from_sources(args.config, overrides))
    scenario = _usage(lambda: resolve_scenario(run_config.scenario))
    if run_config.model is not None:
        model = _usage(lambda: load_model(run_config.model))
        matcher_report = None
    else:
        model, matcher_report = default_model()
    world_config = run_config.world_config()

    results = []
    for seed in range(run_config.seed, run_config.seed + run_config.repeat):
        trace_path = _trace_path(run_config.trace, seed, run_config.repeat)
        trace = TraceWriter(trace_path) if trace_path is not None else None
        try:
            _, reports, truths = run_scenario(scenario, model, world_config, seed=seed, trace=trace)
        finally:
            if trace is not None:
                trace.close()
        metrics = evaluate(
            reports, truths, scenario, seed=seed, tracker=world_config.tracker_enabled, matcher=matcher_report
        )
        logger.info("%s seed=%d switches=%d passed=%s", scenario.name, seed, metrics.id_switches, metrics.passed)
        results.append(metrics)

    if run_config.repeat == 1:
        payload: Dict[str, Any] = results[0].model_dump(mode="json")
    else:
        payload = {"summary": aggregate(results), "runs": [m.model_dump(mode="json") for m in results]}
    _write_json(run_config.metrics, payload)
    _emit(payload)
    return EXIT_OK


def cmd_train(args: argparse.Namespace) -> int:
    samples = _usage(lambda: load_dataset(args.dataset))
    model, report = train(samples, args.algo, split_seed=args.seed, n_features=args.features)
    if args.model_out is not None:
        save_model(model, args.model_out)
    _emit(report.to_dict())
    return EXIT_OK


def cmd_gen_dataset(args: argparse.Namespace) -> int:
    names: List[str] = args.scenarios or sorted(builtin_scenarios())
    scenarios = [_usage(lambda name=name: resolve_scenario(name)) for name in names]
    samples = generate_matcher_dataset(scenarios, np.random.default_rng(args.seed), args.n)
    save_dataset(args.out, samples)
    _emit({"out": str(args.out), "samples": len(samples), **label_balance(samples)})
    return EXIT_OK


def _parse_term(text: str) -> Dict[str, Any]:
    match = TERM_PATTERN.match(text)
    if match is None:
        raise UsageError(f"cannot parse term '{text}'; expected name(args)[@time]")
    raw_args = match.group("args")
    return {
        "name": match.group("name"),
        "args": tuple(parse_atom(a) for a in raw_args.split(",")) if raw_args else (),
        "time": int(match.group("time")) if match.group("time") is not None else None,
    }


def cmd_ddc(args: argparse.Namespace) -> int:
    if args.program in BUNDLED_PROGRAMS:
        program = _usage(lambda: load_program(bundled_program(args.program)))
    else:
        program = _usage(lambda: load_program(Path(args.program)))
    if args.query is None and args.mean is None:
        raise UsageError("give --query EVENT or --mean TERM")

    payload: Dict[str, Any] = {"program": args.program, "horizon": args.horizon, "seed": args.seed}
    if args.query is not None:
        event = _usage(lambda: Event.parse(args.query))
        payload["query"] = args.query
        payload.update(query(program, args.horizon, event, args.samples, args.seed).to_dict())
    if args.mean is not None:
        term = _parse_term(args.mean)
        values = sample_values(program, args.horizon, n_samples=args.samples, seed=args.seed, **term)
        defined = np.asarray([v for v in values if v is not None], dtype=float)
        payload["term"] = args.mean
        payload["defined"] = int(defined.shape[0])
        payload["mean"] = defined.mean(axis=0).tolist() if defined.size else None
    _emit(payload)
    return EXIT_OK


def cmd_compare(args: argparse.Namespace) -> int:
    samples = _usage(lambda: load_dataset(args.dataset))
    rows = compare_algorithms(samples, seeds=tuple(range(args.seeds)))
    _emit([row.to_dict() for row in rows])
    return EXIT_OK


# --- Parser ---


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="anchorloop", description="Perceptual anchoring with a relational particle filter")
    parser.add_argument("--log-level", default="WARNING", help="Logging level for messages on standard error.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Run a scenario through the world loop and report metrics.")
    run.add_argument("--config", type=Path, help="JSON run configuration; flags take precedence.")
    run.add_argument("--scenario", help="Builtin scenario name or scenario JSON path.")
    run.add_argument("--seed", type=int)
    run.add_argument("--particles", type=int)
    run.add_argument("--tracker", choices=["on", "off"])
    run.add_argument("--model", type=Path, help="Match model JSON; defaults to one trained on the builtin scenarios.")
    run.add_argument("--threshold", type=float)
    run.add_argument("--trace", type=Path, help="Per-frame JSONL trace output.")
    run.add_argument("--metrics", type=Path, help="Metrics JSON output.")
    run.add_argument("--repeat", type=int, help="Run seeds seed..seed+repeat-1 and aggregate.")
    run.add_argument(
        "--trace-particles", action="store_true", default=None, help="Add the full particle snapshot to every trace record."
    )
    run.set_defaults(handler=cmd_run)

    tr = sub.add_parser("train", help="Train a match model on a labeled CSV dataset (70/30 split).")
    tr.add_argument("--dataset", type=Path, required=True)
    tr.add_argument("--algo", choices=sorted(ALGORITHMS), default="logistic")
    tr.add_argument("--seed", type=int, default=0, help="Split seed.")
    tr.add_argument("--features", type=int, choices=[4, 5], default=5)
    tr.add_argument("--model-out", type=Path)
    tr.set_defaults(handler=cmd_train)

    gen = sub.add_parser("gen-dataset", help="Replay scenarios into a labeled similarity dataset.")
    gen.add_argument("--scenarios", nargs="*", help="Builtin names or scenario paths; all builtins by default.")
    gen.add_argument("--n", type=int, default=DEFAULT_DATASET_SIZE)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", type=Path, required=True)
    gen.set_defaults(handler=cmd_gen_dataset)

    ddc = sub.add_parser("ddc", help="Query a distributional-clause program by forward sampling.")
    ddc.add_argument("--program", required=True, help=f"Program JSON path or one of {sorted(BUNDLED_PROGRAMS)}.")
    ddc.add_argument("--query", help="Event such as 'left(1,2) = t' or 'true'.")
    ddc.add_argument("--mean", help="Term such as 'n' or 'pos(1)@3' whose sample mean to report.")
    ddc.add_argument("--horizon", type=int, default=0)
    ddc.add_argument("--samples", type=int, default=10_000)
    ddc.add_argument("--seed", type=int, default=0)
    ddc.set_defaults(handler=cmd_ddc)

    cmp_ = sub.add_parser("compare", help="Accuracy and F1 of every algorithm with and without the time feature.")
    cmp_.add_argument("--dataset", type=Path, required=True)
    cmp_.add_argument("--seeds", type=int, default=5)
    cmp_.set_defaults(handler=cmd_compare)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        configure_logging(args.log_level)
    except ValueError as exc:
        ERR_CONSOLE.print(f"error: {exc}", markup=False)
        return EXIT_USAGE
    try:
        return args.handler(args)
    except UsageError as exc:
        ERR_CONSOLE.print(f"error: {exc}", markup=False)
        return EXIT_USAGE
    except (AnchorloopError, OSError) as exc:
        ERR_CONSOLE.print(f"error: {exc}", markup=False)
        return EXIT_RUNTIME


if __name__ == "__main__":
    raise SystemExit(main())
