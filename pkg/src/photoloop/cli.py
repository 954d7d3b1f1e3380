"""Command-line entry points: ``photoloop {edit,batch,bench,sim2real,profile}``.

Exit codes: 0 success, 2 invalid configuration, 3 unreadable input, 4 internal failure.
Machine-readable output is JSON written under ``--out``; stdout gets plain-text tables
(or JSON with ``--json``).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import traceback
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Optional, Sequence

from .analysis.images import synthetic_photo, synthetic_photos
from .analysis.profiling import profile
from .analysis.sim2real import sim2real_experiment
from .analysis.strategies import ALL_STRATEGIES, Scenario, Strategy, budget_sweep, compare_strategies
from .analysis.synthetic import harmful_first_tree, random_tree, scripted_gain_tree, trap_tree
from .analysis.tables import format_table
from .config import ConfigError, EngineConfig, load_config
from .controller import Trajectory, run_loop
from .core import PixelImage, Scale, read_image

log = logging.getLogger("photoloop")

EXIT_OK, EXIT_CONFIG, EXIT_INPUT, EXIT_INTERNAL = 0, 2, 3, 4
IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")


class InputError(Exception):
    pass


def _load(args) -> EngineConfig:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    return cfg


def _read(path) -> PixelImage:
    try:
        return read_image(path)
    except Exception as exc:  # Pillow raises a zoo of types for bad files
        raise InputError(f"cannot read image {path}: {exc}") from exc


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2))


def edit_image(input_path, cfg: EngineConfig, out_dir, prompt: Optional[str] = None) -> Trajectory:
    """Run the loop on one file and write its outputs; raises InputError for unreadable input."""
    image = _read(input_path)
    perceiver, executor, evaluator = cfg.build()
    traj = run_loop(image, cfg.loop, prompt, perceiver=perceiver, executor=executor, evaluator=evaluator)
    traj.save(out_dir)
    return traj


def _trajectory_table(traj: Trajectory) -> str:
    rows = [(i, s.history[-1] if s.history else "(input)", r.aggregate) for i, (s, r) in enumerate(zip(traj.states, traj.reports))]
    return format_table(("State", "Action", "Aggregate"), rows, f"Terminated: {traj.termination_reason.value}")


def _fail(out: Optional[Path], code: int, exc: BaseException) -> int:
    print(f"photoloop: error: {exc}", file=sys.stderr)
    if out is not None and code == EXIT_INTERNAL:
        _write_json(out / "error.json", {"error": type(exc).__name__, "message": str(exc), "traceback": traceback.format_exc()})
    return code


def cmd_edit(args) -> int:
    out = Path(args.out or "out")
    try:
        cfg = _load(args)
    except ConfigError as exc:
        return _fail(out, EXIT_CONFIG, exc)
    try:
        traj = edit_image(args.input, cfg, out, args.prompt)
    except InputError as exc:
        return _fail(out, EXIT_INPUT, exc)
    except Exception as exc:
        return _fail(out, EXIT_INTERNAL, exc)
    print(json.dumps(traj.to_json(), indent=2) if args.json else _trajectory_table(traj))
    return EXIT_OK


def _batch_one(path: Path, cfg: EngineConfig, out: Path) -> dict:
    entry = {"input": path.name, "output": str(out / path.stem)}
    try:
        traj = edit_image(path, cfg, out / path.stem)
    except InputError as exc:
        return {**entry, "status": "failed", "exit_code": EXIT_INPUT, "error": str(exc)}
    except Exception as exc:
        log.exception("internal failure on %s", path)
        return {**entry, "status": "failed", "exit_code": EXIT_INTERNAL, "error": f"{type(exc).__name__}: {exc}"}
    return {
        **entry,
        "status": "ok",
        "exit_code": EXIT_OK,
        "initial_aggregate": traj.reports[0].aggregate,
        "final_aggregate": traj.reports[-1].aggregate,
        "termination_reason": traj.termination_reason.value,
        "accepted_actions": list(traj.final.history),
    }


def cmd_batch(args) -> int:
    out = Path(args.out or "out")
    try:
        cfg = _load(args)
    except ConfigError as exc:
        return _fail(out, EXIT_CONFIG, exc)
    src = Path(args.input_dir)
    if not src.is_dir():
        return _fail(out, EXIT_INPUT, InputError(f"not a directory: {src}"))
    files = sorted(p for p in src.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
    with ThreadPoolExecutor(max(1, args.parallel)) as pool:
        entries = list(pool.map(lambda p: _batch_one(p, cfg, out), files))
    ok = sum(e["status"] == "ok" for e in entries)
    summary = {"entries": entries, "succeeded": ok, "failed": len(entries) - ok}
    _write_json(out / "summary.json", summary)
    if args.json:
        print(json.dumps(summary, indent=2))
    else:
        rows = [(e["input"], e["status"], e.get("final_aggregate", "-"), e.get("termination_reason", e.get("error", ""))) for e in entries]
        print(format_table(("Image", "Status", "Final", "Reason"), rows, f"Batch: {ok}/{len(entries)} succeeded"))
    return EXIT_OK if ok or not entries else EXIT_INTERNAL


ENVIRONMENTS = {
    "trap": lambda n, seed: [trap_tree(seed + i) for i in range(n)],
    "random": lambda n, seed: [random_tree(seed + i) for i in range(n)],
    "harmful": lambda n, seed: [harmful_first_tree()],
    "gain": lambda n, seed: [scripted_gain_tree()],
    "images": lambda n, seed: [("img", im) for im in synthetic_photos(n, seed)],
}


def _emit(args, name: str, report_json: dict, table: str) -> None:
    if args.out:
        _write_json(Path(args.out) / f"{name}.json", report_json)
    print(json.dumps(report_json, indent=2) if args.json else table)


def cmd_bench(args) -> int:
    try:
        cfg = _load(args)
    except ConfigError as exc:
        return _fail(None, EXIT_CONFIG, exc)
    if args.budgets:
        budgets = tuple(int(b) for b in args.budgets.split(","))
        sweep = budget_sweep(budgets, seeds=args.seeds, depth=cfg.planner.depth, first_seed=cfg.seed)
        _emit(args, "bench_budgets", sweep.to_json(), sweep.table())
        return EXIT_OK
    strategies = [Strategy(s) for s in args.strategies.split(",")] if args.strategies else list(ALL_STRATEGIES)
    scenarios = ENVIRONMENTS[args.env](args.n, cfg.seed)
    if args.env == "images":
        scenarios = [Scenario.from_image(f"img{i}", im, cfg.loop) for i, (_, im) in enumerate(scenarios)]
    report = compare_strategies(scenarios, strategies, cfg.loop)
    _emit(args, "bench_strategies", report.to_json(), report.table())
    return EXIT_OK


def cmd_sim2real(args) -> int:
    try:
        cfg = _load(args)
    except ConfigError as exc:
        return _fail(None, EXIT_CONFIG, exc)
    try:
        images = [_read(p) for p in args.inputs] if args.inputs else synthetic_photos(args.images, cfg.seed)
    except InputError as exc:
        return _fail(None, EXIT_INPUT, exc)
    reports = [
        sim2real_experiment(images, args.candidates, Scale.parse(s), cfg.scorers, seed=cfg.seed) for s in args.scales.split(",")
    ]
    rows = [(r.scale.label, r.spearman, r.kendall_tau, r.top1_retention, r.top3_retention, r.n) for r in reports]
    table = format_table(("Scale", "Spearman", "Kendall tau", "Top-1", "Top-3", "Images"), rows, "Sim-to-real rank consistency")
    _emit(args, "sim2real", {"reports": [r.to_json() for r in reports]}, table)
    return EXIT_OK


def cmd_profile(args) -> int:
    try:
        cfg = _load(args)
    except ConfigError as exc:
        return _fail(None, EXIT_CONFIG, exc)
    try:
        image = _read(args.input) if args.input else synthetic_photo(cfg.seed)
    except InputError as exc:
        return _fail(None, EXIT_INPUT, exc)
    perceiver, executor, evaluator = cfg.build()
    traj = run_loop(image, cfg.loop, perceiver=perceiver, executor=executor, evaluator=evaluator)
    report = profile(traj)
    _emit(args, "profile", report.to_json(), report.table())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML or JSON engine configuration")
    common.add_argument("--seed", type=int, help="override the configured seed")
    common.add_argument("--out", help="output directory")
    common.add_argument("--verbose", "-v", action="count", default=0)
    common.add_argument("--json", action="store_true", help="print JSON instead of a table")

    parser = argparse.ArgumentParser(prog="photoloop", description="Closed-loop photo editing with tree search.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("edit", parents=[common], help="edit one image")
    p.add_argument("input")
    p.add_argument("--prompt", help="user guidance, e.g. 'warmer mood'")
    p.set_defaults(func=cmd_edit)

    p = sub.add_parser("batch", parents=[common], help="edit every image in a directory")
    p.add_argument("input_dir")
    p.add_argument("--parallel", type=int, default=1, help="images processed concurrently")
    p.set_defaults(func=cmd_batch)

    p = sub.add_parser("bench", parents=[common], help="compare strategies or sweep the simulation budget")
    p.add_argument("--strategies", help="comma list of " + ",".join(s.value for s in Strategy))
    p.add_argument("--env", choices=sorted(ENVIRONMENTS), default="trap")
    p.add_argument("--n", type=int, default=10, help="number of environments")
    p.add_argument("--budgets", help="comma list of budgets, e.g. 5,10,15,20 (switches to a budget sweep)")
    p.add_argument("--seeds", type=int, default=200, help="seeds per budget in a sweep")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("sim2real", parents=[common], help="reduced vs full resolution ranking agreement")
    p.add_argument("inputs", nargs="*", help="images (default: synthetic set)")
    p.add_argument("--images", type=int, default=20)
    p.add_argument("--candidates", type=int, default=10)
    p.add_argument("--scales", default="half,quarter")
    p.set_defaults(func=cmd_sim2real)

    p = sub.add_parser("profile", parents=[common], help="runtime breakdown of one loop run")
    p.add_argument("input", nargs="?")
    p.set_defaults(func=cmd_profile)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
