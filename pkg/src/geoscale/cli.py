"""Single command-line entry point for all file-driven workflows.

Exit codes: 0 success, 1 domain error (machine-readable JSON on stderr),
2 usage error. Every subcommand validates and computes in memory before
writing any output file, so a failing invocation leaves no partial
artifacts. All randomness flows from an explicit ``--seed``; the
``GEOSCALE_THREADS`` environment variable caps internal parallelism and
never changes output bytes. ``--config file.toml`` supplies per-subcommand
defaults (section name = subcommand), overridden by explicit flags.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__, catalog as catalog_mod, labelgen, scaling, schedule as schedule_mod, simulator
from .errors import GeoscaleError
from .runlog import read_runlog, write_runlog
from .sampler import bin_catalog, nested_subsets, rake, weighted_permutation
from .svgplot import scatter_fit_svg

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

log = logging.getLogger("geoscale")


@dataclass(frozen=True)
class GlobalConfig:
    seed: int
    log_level: str
    output_dir: Optional[Path]


def _max_workers() -> int:
    raw = os.environ.get("GEOSCALE_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise GeoscaleError(f"GEOSCALE_THREADS must be an integer, got {raw!r}") from None


def _load_toml(path: str | Path) -> dict:
    path = Path(path)
    if not path.exists():
        raise GeoscaleError(f"config file not found: {path}")
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise GeoscaleError(f"{path}: invalid TOML ({exc})") from None


def _json_dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _parse_sizes(raw: str) -> list[int]:
    try:
        return [int(float(s)) for s in raw.split(",") if s.strip()]
    except ValueError:
        raise GeoscaleError(f"could not parse sizes {raw!r}") from None


# ---------------------------------------------------------------------------
# subcommand handlers
# ---------------------------------------------------------------------------


def _cmd_sample(args) -> int:
    cat = catalog_mod.parse_manifest(args.manifest, catalog_mod.AttributeSchema.from_toml(args.schema))
    sizes = _parse_sizes(args.sizes)
    bins = bin_catalog(cat, k=args.bins)
    weights = rake(bins, tolerance=args.tolerance, max_iterations=args.max_iterations)
    if not weights.converged:
        log.warning(
            "raking did not converge: max marginal deviation %.3g after %d iterations",
            weights.max_marginal_deviation, weights.iterations_used,
        )
    ordering = weighted_permutation(weights, args.seed)
    chain = nested_subsets(ordering, sizes)

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ids = [rec.id for rec in cat.records]
    for size in chain.sizes:
        with open(out_dir / f"ids_{size}.txt", "w") as fh:
            fh.writelines(ids[i] + "\n" for i in ordering[:size])
    with open(out_dir / "weights.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "weight"])
        for rec_id, w in zip(ids, weights.weight):
            writer.writerow([rec_id, repr(float(w))])
    report = {
        "iterations": weights.iterations_used,
        "converged": weights.converged,
        "max_marginal_deviation": weights.max_marginal_deviation,
        "deviation_per_attribute": weights.deviation_per_attribute,
        "seed": args.seed,
        "sizes": list(chain.sizes),
        "records": len(cat),
    }
    (out_dir / "raking_report.json").write_text(_json_dumps(report))
    print(f"wrote {len(chain.sizes)} subset lists, weights.csv, raking_report.json to {out_dir}")
    return 0


def _cmd_summarize(args) -> int:
    cat = catalog_mod.parse_manifest(args.manifest, catalog_mod.AttributeSchema.from_toml(args.schema))
    summary = catalog_mod.summarize(cat)
    rows = summary.to_csv_rows()
    widths = [max(len(str(r[i])) for r in rows) for i in range(4)]
    for row in rows:
        print("  ".join(str(v).ljust(w) for v, w in zip(row, widths)))
    if args.out:
        with open(args.out, "w", newline="") as fh:
            csv.writer(fh).writerows(rows)
        print(f"wrote {args.out}")
    return 0


def _cmd_schedule(args) -> int:
    sched = schedule_mod.WsdSchedule(
        base_lr=args.base_lr,
        total_steps=args.total_steps,
        warmup_frac=args.warmup_frac,
        stable_frac=args.stable_frac,
        decay_frac=args.decay_frac,
        decay_floor_ratio=args.floor_ratio,
    )
    table = schedule_mod.lr_table(sched, stride=args.stride)
    print("step,lr")
    for step, lr in table:
        print(f"{step},{lr:.10g}")
    if args.out:
        with open(args.out, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["step", "lr"])
            for step, lr in table:
                writer.writerow([step, repr(lr)])
    return 0


def _policy_from_file(path: Optional[str]) -> schedule_mod.TriagePolicy:
    if not path:
        return schedule_mod.TriagePolicy()
    data = _load_toml(path)
    allowed = {"window", "spike_ratio", "oscillation_frac", "gradnorm_slope_max", "horizon", "smooth_width"}
    unknown = set(data) - allowed
    if unknown:
        raise GeoscaleError(f"unknown triage policy keys: {sorted(unknown)}")
    return schedule_mod.TriagePolicy(**data)


def _cmd_triage(args) -> int:
    runs_dir = Path(args.runs)
    if not runs_dir.is_dir():
        raise GeoscaleError(f"runs directory not found: {runs_dir}")
    paths = sorted(runs_dir.glob("*.csv"))
    if not paths:
        raise GeoscaleError(f"no run CSVs in {runs_dir}")
    policy = _policy_from_file(args.policy)
    verdicts = {}
    for path in paths:
        run = read_runlog(path)
        verdict = schedule_mod.triage(run, policy)
        verdicts[path.stem] = {
            "lr": float(run.lr.max()),
            "status": verdict.status,
            "reason": verdict.reason,
            "fail_step": verdict.fail_step,
        }

    header = f"{'run':<24} {'lr':>10} {'status':<6} {'reason':<16} {'fail_step':>9}"
    print(header)
    print("-" * len(header))
    for name, v in verdicts.items():
        print(f"{name:<24} {v['lr']:>10.3g} {v['status']:<6} {v['reason'] or '-':<16} "
              f"{v['fail_step'] if v['fail_step'] is not None else '-':>9}")
    survivors = sorted(v["lr"] for v in verdicts.values() if v["status"] == schedule_mod.PASS)
    print(f"survivors (ascending lr): {', '.join(f'{lr:g}' for lr in survivors) or 'none'}")
    out = Path(args.out) if args.out else runs_dir / "verdicts.json"
    out.write_text(_json_dumps(verdicts))
    print(f"wrote {out}")
    return 0


def _read_points_csv(path: str | Path) -> list[scaling.ScalingPoint]:
    path = Path(path)
    if not path.exists():
        raise GeoscaleError(f"points file not found: {path}")
    points = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        required = {"run_id", "scale", "loss"}
        if reader.fieldnames is None or not required <= set(reader.fieldnames):
            raise GeoscaleError(f"{path}: expected columns run_id,scale,loss[,trapped]")
        for i, row in enumerate(reader, start=2):
            try:
                points.append(
                    scaling.ScalingPoint(
                        run_id=row["run_id"],
                        scale=float(row["scale"]),
                        loss=float(row["loss"]),
                        trapped=str(row.get("trapped", "")).strip().lower() in ("1", "true", "yes"),
                    )
                )
            except (TypeError, ValueError) as exc:
                raise GeoscaleError(f"{path} line {i}: {exc}") from None
    return points


def _write_points_csv(points, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["run_id", "scale", "loss", "trapped"])
        for p in points:
            writer.writerow([p.run_id, repr(p.scale), repr(p.loss), str(p.trapped).lower()])


def _cmd_fit(args) -> int:
    points = _read_points_csv(args.points)
    fit = scaling.fit_power_law(points, mode=args.mode, floor=args.floor)
    payload = {
        "A": fit.A,
        "B": fit.B,
        "exponent": fit.exponent,
        "r_squared_loglog": fit.r_squared,
        "r_squared_linear": fit.r_squared_linear,
        "excluded": list(fit.excluded),
        "mode": fit.mode,
        "floor": fit.floor,
    }
    svg = None
    if args.plot:
        used = [p for p in points if not p.trapped]
        dropped = [p for p in points if p.trapped]
        grid = np.geomspace(min(p.scale for p in used), max(p.scale for p in used), 200)
        svg = scatter_fit_svg(
            [p.scale for p in used], [p.loss for p in used],
            grid, fit.predict(grid),
            excluded_x=[p.scale for p in dropped], excluded_y=[p.loss for p in dropped],
            title=f"L = {fit.A:.4g} + {fit.B:.4g} * s^-{fit.exponent:.4g}  (R2 {fit.r_squared:.3f})",
            x_label="scale", y_label="converged loss", log_x=True, log_y=True,
        )
    Path(args.out).write_text(_json_dumps(payload))
    if svg is not None:
        Path(args.plot).write_text(svg)
        print(f"wrote {args.out} and {args.plot}")
    else:
        print(f"wrote {args.out}")
    print(f"A={fit.A:.6g} B={fit.B:.6g} exponent={fit.exponent:.6g} "
          f"R2(loglog)={fit.r_squared:.4f} excluded={len(fit.excluded)}")
    return 0


def _cmd_plan(args) -> int:
    path = Path(args.fit)
    if not path.exists():
        raise GeoscaleError(f"fit file not found: {path}")
    data = json.loads(path.read_text())
    fit = scaling.PowerLawFit(
        A=data["A"], B=data["B"], exponent=data["exponent"],
        r_squared=data.get("r_squared_loglog", 1.0),
        r_squared_linear=data.get("r_squared_linear", 1.0),
        excluded=tuple(data.get("excluded", ())),
        mode=data.get("mode", scaling.DATA_SCALING),
        floor=data.get("floor", scaling.FLOOR_FREE),
    )
    required = scaling.plan_dataset_size(fit, args.target)
    print(f"{required:.6g}")
    return 0


def _cmd_batch(args) -> int:
    path = Path(args.points)
    if not path.exists():
        raise GeoscaleError(f"points file not found: {path}")
    pairs = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"batch", "steps"} <= set(reader.fieldnames):
            raise GeoscaleError(f"{path}: expected columns batch,steps")
        for row in reader:
            steps = float(row["steps"]) if row["steps"].strip() else float("nan")
            pairs.append((float(row["batch"]), steps))
    fit = scaling.fit_batch_tradeoff(pairs)
    payload = {
        "s_min": fit.s_min,
        "b_crit": fit.b_crit,
        "below_tested_range": fit.below_tested_range,
        "points": [list(p) for p in fit.points],
    }
    Path(args.out).write_text(_json_dumps(payload))
    flag = " (below tested range)" if fit.below_tested_range else ""
    print(f"s_min={fit.s_min:.6g} b_crit={fit.b_crit:.6g}{flag}; wrote {args.out}")
    return 0


def _cmd_simulate(args) -> int:
    cfg = _load_toml(args.config)
    law_cfg = cfg.get("law")
    if not law_cfg:
        raise GeoscaleError("sim config needs a [law] table with A, B, exponent")
    law = (float(law_cfg["A"]), float(law_cfg["B"]), float(law_cfg["exponent"]))
    scales = [float(s) for s in cfg.get("scales", [])]
    seeds = [int(s) for s in cfg.get("seeds", [args.seed])]
    mode = cfg.get("mode", "ensemble")
    total_steps = int(cfg.get("total_steps", 4000))
    common = dict(
        total_steps=total_steps,
        noise_sigma=float(cfg.get("noise_sigma", 0.0)),
        trap_floor_multiplier=float(cfg.get("trap_floor_multiplier", 3.0)),
        trap_onset=int(cfg["trap_onset"]) if "trap_onset" in cfg else None,
        tau=float(cfg["tau"]) if "tau" in cfg else None,
        loss_start=float(cfg.get("loss_start", 2.0)),
    )
    workers = _max_workers()
    if mode == "ensemble":
        runs = simulator.simulate_ensemble(
            law, scales, float(cfg.get("trapped_fraction", 0.0)), seeds,
            final_window=int(cfg.get("final_window", 101)), workers=workers, **common,
        )
    elif mode in (simulator.STABLE, simulator.TRAPPED, simulator.DIVERGENT):
        combos = [(scale, seed) for scale in scales for seed in seeds]
        configs = [
            simulator.SimConfig(
                mode=mode, law=law, scale=scale, seed=simulator.derive_run_seed(seed, idx),
                divergence_onset=int(cfg["divergence_onset"]) if "divergence_onset" in cfg else None,
                divergence_growth=float(cfg.get("divergence_growth", 1.02)),
                **common,
            )
            for idx, (scale, seed) in enumerate(combos)
        ]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            logs = list(pool.map(simulator.simulate_run, configs))
        window = int(cfg.get("final_window", 101))
        runs = [
            simulator.EnsembleRun(
                scaling.ScalingPoint(
                    run_id=f"N{scale:g}-s{seed}", scale=scale,
                    loss=float(np.median(run.loss[-min(window, len(run)):])),
                    trapped=(mode == simulator.TRAPPED),
                ),
                run,
            )
            for (scale, seed), run in zip(combos, logs)
        ]
    else:
        raise GeoscaleError(f"unknown simulate mode {mode!r}")

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for run in runs:
        write_runlog(run.log, out_dir / f"{run.point.run_id}.csv")
    _write_points_csv([r.point for r in runs], out_dir / "points.csv")
    print(f"wrote {len(runs)} run logs and points.csv to {out_dir}")
    return 0


def _cmd_label(args) -> int:
    chips = labelgen.read_chips(args.chips)
    if not chips:
        raise GeoscaleError("no chips to label")
    ids = [c.image_id for c in chips]
    if len(set(ids)) != len(ids):
        raise GeoscaleError("duplicate image_id in chips file")
    features = labelgen.read_geojson(args.vectors)
    classmap = labelgen.ClassMap.from_file(args.classes)

    def build(chip):
        return labelgen.generate_labels(chip, features, classmap, buffer_radius_px=args.buffer_radius)

    workers = _max_workers()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            bundles = list(pool.map(build, chips))
    else:
        bundles = [build(chip) for chip in chips]

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    total = 0
    for bundle in bundles:
        labelgen.write_bundle(bundle, out_dir)
        total += len(bundle.instances)
    print(f"labeled {len(bundles)} chips ({total} instances) into {out_dir}")
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    parser = argparse.ArgumentParser(
        prog="geoscale",
        description="Sampling, scheduling, scaling-law, and weak-label workflows for "
                    "large-scale pretraining experiments.",
    )
    parser.add_argument("--version", action="version", version=f"geoscale {__version__}")
    parser.add_argument("--config", help="TOML file of per-subcommand flag defaults")
    parser.add_argument("--log-level", default="warning",
                        choices=["debug", "info", "warning", "error"])
    subs = parser.add_subparsers(dest="command", metavar="command")
    registry: dict[str, argparse.ArgumentParser] = {}

    def sub(name, handler, help_text):
        p = subs.add_parser(name, help=help_text)
        p.set_defaults(func=handler)
        registry[name] = p
        return p

    p = sub("sample", _cmd_sample, "rake a catalog and emit nested balanced subsets")
    p.add_argument("--manifest", required=True)
    p.add_argument("--schema", required=True, help="attribute schema TOML")
    p.add_argument("--sizes", required=True, help="comma-separated ascending subset sizes")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--bins", type=int, default=10, help="quantile bins per numeric attribute")
    p.add_argument("--tolerance", type=float, default=1e-6)
    p.add_argument("--max-iterations", type=int, default=1000)

    p = sub("summarize", _cmd_summarize, "per-attribute histograms of a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--out", help="optional CSV output path")

    p = sub("schedule", _cmd_schedule, "print a WSD learning-rate table")
    p.add_argument("--base-lr", type=float, required=True)
    p.add_argument("--total-steps", type=int, required=True)
    p.add_argument("--warmup-frac", type=float, default=0.10)
    p.add_argument("--stable-frac", type=float, default=0.80)
    p.add_argument("--decay-frac", type=float, default=0.10)
    p.add_argument("--floor-ratio", type=float, default=0.01)
    p.add_argument("--stride", type=int, default=100)
    p.add_argument("--out", help="optional CSV output path")

    p = sub("triage", _cmd_triage, "fail-fast triage over a directory of run CSVs")
    p.add_argument("--runs", required=True)
    p.add_argument("--policy", help="triage policy TOML (defaults used when omitted)")
    p.add_argument("--out", help="verdicts JSON path (default <runs>/verdicts.json)")

    p = sub("fit", _cmd_fit, "fit a power law to (scale, loss) points")
    p.add_argument("--points", required=True, help="CSV with run_id,scale,loss[,trapped]")
    p.add_argument("--mode", choices=[scaling.DATA_SCALING, scaling.PARAMETER_SCALING],
                   default=scaling.DATA_SCALING)
    p.add_argument("--floor", choices=[scaling.FLOOR_ZERO, scaling.FLOOR_FREE],
                   default=scaling.FLOOR_FREE)
    p.add_argument("--out", default="fit.json")
    p.add_argument("--plot", help="optional SVG scatter+fit output path")

    p = sub("plan", _cmd_plan, "invert a fitted law for a target loss")
    p.add_argument("--fit", required=True, help="fit JSON from `geoscale fit`")
    p.add_argument("--target", type=float, required=True)

    p = sub("batch", _cmd_batch, "fit the steps-vs-batch tradeoff")
    p.add_argument("--points", required=True, help="CSV with batch,steps")
    p.add_argument("--out", default="batch.json")

    p = sub("simulate", _cmd_simulate, "generate synthetic run telemetry")
    p.add_argument("--config", dest="config", required=True, help="simulation TOML")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, default=0, help="base seed when the config lists none")

    p = sub("label", _cmd_label, "generate chip-aligned weak labels from vector data")
    p.add_argument("--chips", required=True, help="chips JSON-lines file")
    p.add_argument("--vectors", required=True, help="GeoJSON FeatureCollection")
    p.add_argument("--classes", required=True, help="ontology TOML/JSON")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--buffer-radius", type=float, default=1.5,
                   help="pixel radius for buffering line/point features")

    return parser, registry


def _peek_config(argv: list[str]) -> Optional[str]:
    for i, arg in enumerate(argv):
        if arg == "--config" and i + 1 < len(argv):
            return argv[i + 1]
        if arg.startswith("--config="):
            return arg.split("=", 1)[1]
        if arg in _SUBCOMMANDS:  # past the global section; a subcommand --config is its own flag
            return None
    return None


_SUBCOMMANDS = {"sample", "summarize", "schedule", "triage", "fit", "plan", "batch", "simulate", "label"}


def run_cli(argv: Optional[list[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, registry = _build_parser()
    try:
        config_path = _peek_config(argv)
        if config_path:
            defaults = _load_toml(config_path)
            for name, section in defaults.items():
                if name in registry and isinstance(section, dict):
                    supplied = {k.replace("-", "_"): v for k, v in section.items()}
                    registry[name].set_defaults(**supplied)
                    for action in registry[name]._actions:
                        if action.dest in supplied:
                            action.required = False
        try:
            args = parser.parse_args(argv)
        except SystemExit as exc:
            return int(exc.code or 0)
        logging.basicConfig(level=args.log_level.upper(), format="%(levelname)s %(name)s: %(message)s")
        if not getattr(args, "command", None):
            parser.print_usage(sys.stderr)
            return 2
        return args.func(args)
    except GeoscaleError as exc:
        sys.stderr.write(json.dumps({"error": str(exc), "type": type(exc).__name__}) + "\n")
        return 1


def main() -> None:
    sys.exit(run_cli())
