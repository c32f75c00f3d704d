"""Command line: ``risleo run | validate | mc-check | report``.

Exit codes are 0 on success, 1 when the config or output directory is
rejected and 2 when a run fails (outputs written so far are kept).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from ..rate import approx_rates, mc_ergodic_rates, mrt_beamformer
from .config import ParseError, ScenarioConfig, ValidationError, key_reference, load_scenario
from .experiments import EXPERIMENTS, run_experiment
from .output import ManifestMismatch, check_manifest, emit_csv, load_report, write_report
from .scenario import build_scenario, stream

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2
STREAM_MC_CHECK = 4


def _overrides(pairs: list[str]) -> dict:
    out = {}
    for pair in pairs:
        key, sep, literal = pair.partition("=")
        if not sep:
            raise ParseError(f"--set expects key=value, got {pair!r}")
        try:
            out[key.strip()] = json.loads(literal)
        except json.JSONDecodeError:
            out[key.strip()] = literal  # bare strings such as mode names
    return out


def _config(args) -> ScenarioConfig:
    # a config file names its own preset; --paper-scale forces the full sizes
    if args.config:
        cfg = load_scenario(args.config, "table2" if args.paper_scale else None)
    else:
        cfg = ScenarioConfig.from_values(None, "table2" if args.paper_scale else "desk")
    extra = _overrides(args.set)
    if args.seed is not None:
        extra["run.seed"] = args.seed
    if args.mode is not None:
        extra["run.mode"] = args.mode
    return cfg.with_overrides(extra) if extra else cfg


def cmd_validate(args) -> int:
    cfg = _config(args)
    print(f"ok  preset={cfg.preset}  S={cfg.S}  K={cfg.K}  slots={cfg.n_slots}  hash={cfg.config_hash()[:12]}")
    if args.show:
        print(cfg.to_text(), end="")
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = _config(args)
    out = Path(args.out)
    check_manifest(out, cfg.config_hash())
    mode = args.mode if args.preset in ("schemes_vs_time", "trajectory_plot") else None

    def progress(partial):
        write_report(partial, out)
        last = partial.points[-1]
        print(f"[{len(partial.points)}] {last.figure}/{last.scenario_id}: {last.status} ({last.seconds:.1f} s)")

    report = run_experiment(args.preset, mode=mode, jobs=args.jobs, base=cfg, on_point=progress)
    for path in write_report(report, out):
        print(path)
    return EXIT_OK if report.ok else EXIT_RUNTIME


def cmd_report(args) -> int:
    report = load_report(args.out)
    for path in emit_csv(report, args.out):
        print(path)
    return EXIT_OK


def cmd_mc_check(args) -> int:
    """Closed-form ergodic rates against sample means at slot 0, random phases, MRT."""
    cfg = _config(args)
    built = build_scenario(cfg)
    csi = built.slot_scene(0).build(np.zeros(2))
    rng = stream(cfg.seed, STREAM_MC_CHECK)
    theta = rng.uniform(0, 2 * np.pi, csi.M)
    V = mrt_beamformer(csi, theta, cfg.p_max)
    closed = approx_rates(csi, V, theta)
    mc, se = mc_ergodic_rates(csi, V, theta, n_samples=args.samples, rng=rng)
    ok = True
    print("ue  closed_form  monte_carlo  stderr  tolerance  pass")
    for k in range(csi.K):
        tol = max(3 * se[k], 0.1)
        good = abs(closed[k] - mc[k]) <= tol
        ok &= bool(good)
        print(f"{k:<3d} {closed[k]:11.5f}  {mc[k]:11.5f}  {se[k]:6.4f}  {tol:9.4f}  {'yes' if good else 'NO'}")
    return EXIT_OK if ok else EXIT_RUNTIME


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="risleo", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="key-value config file; omitted keys come from its preset")
        p.add_argument("--seed", type=int, help="master seed")
        p.add_argument("--mode", help="scheme for single-mode runs")
        p.add_argument("--paper-scale", action="store_true", help="full Table II sizes instead of desk scale")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override one config key")

    run = sub.add_parser("run", help="run an experiment preset")
    common(run)
    run.add_argument("--preset", required=True, choices=EXPERIMENTS)
    run.add_argument("--out", required=True, help="output directory for CSVs and the manifest")
    run.add_argument("--jobs", type=int, default=1, help="parallel sweep points")
    run.set_defaults(func=cmd_run)

    val = sub.add_parser("validate", help="check a config and print its hash")
    common(val)
    val.add_argument("--show", action="store_true", help="print the resolved config")
    val.add_argument("--keys", action="store_true", help="list every config key")
    val.set_defaults(func=cmd_validate)

    mc = sub.add_parser("mc-check", help="compare closed-form and sampled ergodic rates")
    common(mc)
    mc.add_argument("--samples", type=int, default=10_000)
    mc.set_defaults(func=cmd_mc_check)

    rep = sub.add_parser("report", help="re-emit CSVs from a saved manifest")
    rep.add_argument("--out", required=True)
    rep.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "keys", False):
        print(key_reference())
        return EXIT_OK
    try:
        return args.func(args)
    except (ParseError, ValidationError, ManifestMismatch) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
