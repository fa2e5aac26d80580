"""Batch command-line front end.

Subcommands:

* ``run``      one optimization run; writes history.csv, density fields
               and a final image/volume into the output directory.
* ``sweep``    a cartesian parameter grid of runs plus a summary table.
* ``validate`` quick self-checks (gradient vs finite differences, filter
               and projection properties, subproblem solver on analytic
               problems).
* ``export``   convert a saved density field to PNG/VTK.

Every failure exits nonzero after printing a single machine-parsable
``ERROR <category>: <message>`` line on stderr.
"""

from __future__ import annotations

import argparse
import itertools
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import output
from .errors import ConfigError, GravitopError
from .optimizer import RunOptions, RunResult, run
from .problems import (ProblemSpec, builtin, builtin_names, spec_from_dict,
                       spec_to_dict, with_overrides)


@dataclass
class RunConfig:
    """Declarative description of one CLI run (see docs/config_schema.md)."""

    problem: str | dict
    overrides: dict = field(default_factory=dict)
    n_iter: int = 250
    out_dir: str = "out"
    every: int = 0               # dump density_###.field every k iterations
    cg_tol: float = 1e-8
    serial: bool = True
    g2_enabled: bool | None = None
    threshold: float = 0.9

    def resolve_spec(self) -> ProblemSpec:
        if isinstance(self.problem, str):
            spec = builtin(self.problem)
        elif isinstance(self.problem, dict):
            spec = spec_from_dict(self.problem)
        else:
            raise ConfigError(f"problem must be a name or a spec table, "
                              f"got {type(self.problem).__name__}")
        return with_overrides(spec, self.overrides)


def load_config(path) -> RunConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(raw, dict) or "problem" not in raw:
        raise ConfigError(f"config {path} must be an object with a 'problem' key")
    known = set(RunConfig.__dataclass_fields__)
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return RunConfig(**raw)


def _config_from_args(args) -> RunConfig:
    if args.config:
        cfg = load_config(args.config)
    else:
        if not args.problem:
            raise ConfigError("either --problem or --config is required")
        cfg = RunConfig(problem=args.problem)
    overrides = dict(cfg.overrides)
    for item in args.set or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        overrides[key.strip()] = value.strip()
    shorthand = {"kappa": args.kappa, "vf_star": args.vf,
                 "eta_g": args.eta_gamma, "beta_g": args.beta_gamma,
                 "filter_mult": args.filter_mult}
    overrides.update({k: v for k, v in shorthand.items() if v is not None})
    cfg.overrides = overrides
    if args.iters is not None:
        cfg.n_iter = args.iters
    if args.out is not None:
        cfg.out_dir = args.out
    if args.every is not None:
        cfg.every = args.every
    if args.no_g2:
        cfg.g2_enabled = False
    if args.serial:
        cfg.serial = True
    if getattr(args, "threshold", None) is not None:
        cfg.threshold = args.threshold
    return cfg


def execute_run(cfg: RunConfig, spec: ProblemSpec | None = None,
                quiet: bool = False) -> RunResult:
    spec = spec if spec is not None else cfg.resolve_spec()
    for note in spec.recommendation_warnings():
        print(f"warning: {note}", file=sys.stderr)
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if not out_dir.is_dir():
        raise ConfigError(f"output directory {out_dir} is not writable")

    def dump(tag: str, values: np.ndarray, beta: float) -> None:
        output.write_field(out_dir / f"{tag}.field", values, spec.dim,
                           spec.nel, spec.lengths, spec.thickness, beta=beta)

    def callback(it, history, chain):
        if cfg.every > 0 and it % cfg.every == 0:
            dump(f"density_{it:03d}", chain.x_bar, history.beta[-1])
        if not quiet and (it % 25 == 0 or it == 1):
            print(f"  iter {it:4d}  f0 {history.f0[-1]:.6e}  "
                  f"vf {history.vol_frac[-1]:.4f}  g1 {history.g1[-1]:+.4f}  "
                  f"beta {history.beta[-1]:g}")

    options = RunOptions(n_iter=cfg.n_iter, g2_enabled=cfg.g2_enabled,
                         cg_tol=cfg.cg_tol, callback=callback)
    result = run(spec, options)

    output.write_history_csv(out_dir / "history.csv", result.history)
    dump("final", result.x_bar, result.history.beta[-1])
    if spec.dim == 2:
        output.write_png(out_dir / "final.png", result.x_bar, spec.nel)
    else:
        output.write_vtk(out_dir / "final.vtk", result.x_bar, spec.nel,
                         spec.lengths, threshold=cfg.threshold)
    (out_dir / "problem.json").write_text(
        json.dumps(spec_to_dict(spec), indent=2) + "\n")
    return result


def _cmd_run(args) -> int:
    cfg = _config_from_args(args)
    result = execute_run(cfg)
    h = result.history
    print(f"done: {len(h)} iterations, f0 {h.f0[-1]:.6e} N*m, "
          f"vol_frac {h.vol_frac[-1]:.4f}, elapsed {result.elapsed:.1f}s")
    return 0


def _parse_grid(items) -> dict[str, list[str]]:
    grid = {}
    for item in items or []:
        if "=" not in item:
            raise ConfigError(f"--grid expects key=v1,v2,..., got {item!r}")
        key, values = item.split("=", 1)
        vals = [v for v in values.split(",") if v]
        if not vals:
            raise ConfigError(f"--grid {key} has no values")
        grid[key.strip()] = vals
    if not grid:
        raise ConfigError("sweep needs at least one --grid key=v1,v2,...")
    return grid


def _cmd_sweep(args) -> int:
    cfg = _config_from_args(args)
    grid = _parse_grid(args.grid)
    keys = sorted(grid)
    combos = list(itertools.product(*(grid[k] for k in keys)))
    base_out = Path(cfg.out_dir)
    base_out.mkdir(parents=True, exist_ok=True)

    def one_case(combo):
        case = dict(zip(keys, combo))
        tag = "_".join(f"{k}-{v}" for k, v in case.items())
        case_cfg = RunConfig(problem=cfg.problem,
                             overrides={**cfg.overrides, **case},
                             n_iter=cfg.n_iter,
                             out_dir=str(base_out / tag), every=cfg.every,
                             cg_tol=cfg.cg_tol, g2_enabled=cfg.g2_enabled,
                             threshold=cfg.threshold)
        result = execute_run(case_cfg, quiet=True)
        h = result.history
        grey = float(np.mean((result.x_bar > 0.05) & (result.x_bar < 0.95)))
        row = [tag, *combo, f"{h.f0[-1]:.12e}", f"{h.vol_frac[-1]:.6f}",
               f"{h.g1[-1]:.6e}", f"{h.g2[-1]:.6e}", f"{grey:.6f}"]
        print(f"  {tag}: f0 {h.f0[-1]:.6e}  vf {h.vol_frac[-1]:.4f}")
        return row

    if cfg.serial or args.jobs <= 1:
        rows = [one_case(c) for c in combos]
    else:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_sweep_worker,
                                 [(cfg, keys, c) for c in combos]))
            for row in rows:
                print(f"  {row[0]}: f0 {float(row[len(keys) + 1]):.6e}")

    header = ["case", *keys, "f0_Nm", "vol_frac", "g1", "g2", "grey_frac"]
    lines = [",".join(header)] + [",".join(str(v) for v in r) for r in rows]
    (base_out / "summary.csv").write_text("\n".join(lines) + "\n")
    print(f"sweep finished: {len(rows)} runs, summary in {base_out/'summary.csv'}")
    return 0


def _sweep_worker(payload):
    cfg, keys, combo = payload
    case = dict(zip(keys, combo))
    tag = "_".join(f"{k}-{v}" for k, v in case.items())
    case_cfg = RunConfig(problem=cfg.problem,
                         overrides={**cfg.overrides, **case},
                         n_iter=cfg.n_iter,
                         out_dir=str(Path(cfg.out_dir) / tag), every=cfg.every,
                         cg_tol=cfg.cg_tol, g2_enabled=cfg.g2_enabled,
                         threshold=cfg.threshold)
    result = execute_run(case_cfg, quiet=True)
    h = result.history
    grey = float(np.mean((result.x_bar > 0.05) & (result.x_bar < 0.95)))
    return [tag, *combo, f"{h.f0[-1]:.12e}", f"{h.vol_frac[-1]:.6f}",
            f"{h.g1[-1]:.6e}", f"{h.g2[-1]:.6e}", f"{grey:.6f}"]


def _cmd_validate(_args) -> int:
    from .selfcheck import run_selfchecks

    results = run_selfchecks()
    failed = 0
    for name, ok, detail in results:
        print(f"{'ok  ' if ok else 'FAIL'} {name}: {detail}")
        failed += 0 if ok else 1
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return 0 if failed == 0 else 1


def _cmd_export(args) -> int:
    meta, values = output.read_field(args.input)
    fmt = args.format
    out = Path(args.out) if args.out else Path(args.input).with_suffix(f".{fmt}")
    if fmt == "png":
        if meta["dim"] != 2:
            raise ConfigError("png export needs a 2D field; use vtk for 3D")
        output.write_png(out, values, meta["nel"])
    elif fmt == "vtk":
        output.write_vtk(out, values, meta["nel"], meta["lengths"],
                         threshold=args.threshold)
    else:
        raise ConfigError(f"unknown export format {fmt!r}")
    print(f"wrote {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gravitop",
        description="Topology optimization of structures under self-weight")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_run_flags(p):
        p.add_argument("--problem", help="built-in problem name: "
                       + ", ".join(builtin_names()))
        p.add_argument("--config", help="JSON run-config file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a problem-spec field (repeatable)")
        p.add_argument("--iters", type=int, help="iteration budget")
        p.add_argument("--out", help="output directory")
        p.add_argument("--every", type=int,
                       help="write density_###.field every k iterations")
        p.add_argument("--serial", action="store_true",
                       help="force serial execution")
        p.add_argument("--no-g2", action="store_true",
                       help="disable the implicit mass lower-bound constraint")
        p.add_argument("--kappa", type=float, help="external load scale")
        p.add_argument("--vf", type=float, help="permitted volume fraction")
        p.add_argument("--eta-gamma", type=float, help="mass step position")
        p.add_argument("--beta-gamma", type=float, help="mass step sharpness")
        p.add_argument("--filter-mult", type=float,
                       help="filter radius in element-edge multiples")
        p.add_argument("--threshold", type=float,
                       help="solid threshold for volume exports (default 0.9)")

    p_run = sub.add_parser("run", help="execute one optimization")
    add_run_flags(p_run)
    p_run.set_defaults(func=_cmd_run)

    p_sweep = sub.add_parser("sweep", help="run a parameter grid")
    add_run_flags(p_sweep)
    p_sweep.add_argument("--grid", action="append", metavar="KEY=V1,V2,...",
                         help="sweep values for a spec field (repeatable; "
                              "cartesian product)")
    p_sweep.add_argument("--jobs", type=int, default=1,
                         help="concurrent runs (with --serial absent)")
    p_sweep.set_defaults(func=_cmd_sweep)

    p_val = sub.add_parser("validate", help="run quick numerical self-checks")
    p_val.set_defaults(func=_cmd_validate)

    p_exp = sub.add_parser("export", help="convert a density field file")
    p_exp.add_argument("--input", required=True, help="path to a .field file")
    p_exp.add_argument("--format", choices=("png", "vtk"), required=True)
    p_exp.add_argument("--out", help="output path")
    p_exp.add_argument("--threshold", type=float, default=0.9,
                       help="solid threshold for the vtk mask (default 0.9)")
    p_exp.set_defaults(func=_cmd_export)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except GravitopError as exc:
        print(f"ERROR {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
