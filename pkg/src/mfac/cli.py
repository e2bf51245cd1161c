"""Command-line front end.

Subcommands: ``run`` (one closed-loop experiment), ``compare`` (both
control laws side by side), ``stability`` (per-step diagnostics along a
run), ``sweep`` (one run per control-effort-weight grid point).  All
numbers are serialized with 17 significant digits so repeated runs of the
same configuration are byte-identical.

Exit codes: 0 success, 2 configuration error, 3 numerical divergence.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, ExperimentConfig, resolve_config_path
from .simulation import (
    DivergenceError,
    LtiSpec,
    Metrics,
    SimulationTrace,
    compute_metrics,
    run_closed_loop,
)
from .stability import StabilityReport, evaluate_trace

__all__ = ["main"]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGED = 3


def fmt17(x: float) -> str:
    """17-significant-digit text, round-trip exact for doubles."""
    return "%.17g" % float(x)


def write_trace_csv(trace: SimulationTrace, path) -> None:
    m = trace.dims.m
    width = trace.dims.regressor_len
    cols = (["i"]
            + [f"y{j + 1}" for j in range(m)]
            + [f"yd{j + 1}" for j in range(m)]
            + [f"u{j + 1}" for j in range(m)]
            + [f"e{j + 1}" for j in range(m)]
            + [f"phi_{r + 1}_{c + 1}" for r in range(m) for c in range(width)])
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(cols) + "\n")
        for r in range(trace.n_steps):
            row = [str(int(trace.steps[r]))]
            for arr in (trace.y, trace.y_ref, trace.u, trace.e):
                row += [fmt17(v) for v in arr[r]]
            row += [fmt17(v) for v in trace.phi[r].ravel()]
            fh.write(",".join(row) + "\n")


def write_metrics(metrics: Metrics, variant: str, path) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(f"variant = {variant}\n")
        fh.write(f"window = {metrics.window[0]}..{metrics.window[1]}\n")
        for j, v in enumerate(metrics.sum_sq_error):
            fh.write(f"sum_sq_error_{j + 1} = {fmt17(v)}\n")


def write_compare(metrics_p: Metrics, metrics_b: Metrics, path) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(f"window = {metrics_p.window[0]}..{metrics_p.window[1]}\n")
        fh.write("channel,proposed,current\n")
        for j in range(len(metrics_p.sum_sq_error)):
            fh.write(f"y{j + 1},{fmt17(metrics_p.sum_sq_error[j])},"
                     f"{fmt17(metrics_b.sum_sq_error[j])}\n")


def write_stability_csv(report: StabilityReport, path) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write("i,rho_A,d4,flag_rho,flag_d4\n")
        for r in range(len(report.steps)):
            fh.write(f"{int(report.steps[r])},{fmt17(report.rho_a[r])},"
                     f"{fmt17(report.d4[r])},{int(report.rho_a[r] < 1)},"
                     f"{int(report.d4[r] < 1)}\n")
        fh.write(f"# lambda_min,{fmt17(report.lambda_min)}\n")


def _load(args) -> ExperimentConfig:
    cfg = ExperimentConfig.from_file(resolve_config_path(args.config))
    if getattr(args, "variant", None):
        cfg = cfg.with_variant(args.variant)
    if getattr(args, "engine", None):
        cfg = dataclasses.replace(cfg, loop=dataclasses.replace(
            cfg.loop, engine=args.engine))
    if args.out:
        cfg = dataclasses.replace(cfg, out_dir=args.out)
    if getattr(args, "svg", False):
        cfg = dataclasses.replace(cfg, svg=True)
    return cfg


def _out_dir(cfg: ExperimentConfig) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _true_gain(cfg: ExperimentConfig):
    if isinstance(cfg.loop.plant, LtiSpec):
        plant = cfg.loop.plant.build()
        return plant.b[0]
    return None


def cmd_run(args) -> int:
    cfg = _load(args)
    out = _out_dir(cfg)
    trace = run_closed_loop(cfg.loop)
    metrics = compute_metrics(trace)
    write_trace_csv(trace, out / "trace.csv")
    write_metrics(metrics, cfg.loop.controller.variant, out / "metrics.txt")
    if cfg.svg:
        from .plotting import write_svg_plots
        write_svg_plots(trace, out)
    per_channel = ", ".join(
        f"y{j + 1}={fmt17(v)}" for j, v in enumerate(metrics.sum_sq_error))
    print(f"run: variant={cfg.loop.controller.variant} steps={trace.n_steps} "
          f"sum_sq_error: {per_channel}")
    print(f"wrote {out / 'trace.csv'} and {out / 'metrics.txt'}")
    return EXIT_OK


def cmd_compare(args) -> int:
    cfg = _load(args)
    out = _out_dir(cfg)
    cfg_p = cfg.with_variant("proposed")
    cfg_b = cfg.with_variant("baseline")
    trace_p = run_closed_loop(cfg_p.loop)
    trace_b = run_closed_loop(cfg_b.loop)
    metrics_p = compute_metrics(trace_p)
    metrics_b = compute_metrics(trace_b)
    write_trace_csv(trace_p, out / "trace_proposed.csv")
    write_trace_csv(trace_b, out / "trace_baseline.csv")
    write_compare(metrics_p, metrics_b, out / "compare.txt")
    if cfg.svg:
        from .plotting import write_svg_plots
        write_svg_plots(trace_p, out, tag="_proposed")
        write_svg_plots(trace_b, out, tag="_baseline")
    print("channel  proposed            current")
    for j in range(cfg.loop.dims.m):
        print(f"y{j + 1}       {fmt17(metrics_p.sum_sq_error[j]):<19} "
              f"{fmt17(metrics_b.sum_sq_error[j])}")
    return EXIT_OK


def cmd_stability(args) -> int:
    cfg = _load(args)
    out = _out_dir(cfg)
    trace = run_closed_loop(cfg.loop)
    if trace.n_steps == 0:
        raise ConfigError("simulation produced an empty trace")
    report = evaluate_trace(trace, cfg.loop.controller, _true_gain(cfg))
    write_stability_csv(report, out / "stability.csv")
    print(f"stability: {trace.n_steps} steps, "
          f"max rho_A={fmt17(report.rho_a.max())}, "
          f"max d4={fmt17(report.d4.max())}"
          f"{' (d4 estimated)' if report.d4_is_estimate else ''}, "
          f"lambda_min={fmt17(report.lambda_min)}")
    print(f"wrote {out / 'stability.csv'}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _load(args)
    if args.param != "lambda":
        raise ConfigError(f"unsupported sweep parameter {args.param!r}")
    try:
        grid = sorted(float(t) for t in args.grid.replace(",", " ").split())
    except ValueError as exc:
        raise ConfigError(f"cannot parse grid {args.grid!r}") from exc
    if not grid:
        raise ConfigError("sweep grid is empty")
    out = _out_dir(cfg)
    m = cfg.loop.dims.m
    true_gain = _true_gain(cfg)
    rows = []
    for lam in grid:
        loop = dataclasses.replace(cfg.loop, controller=dataclasses.replace(
            cfg.loop.controller, lam=lam))
        try:
            trace = run_closed_loop(loop)
            metrics = compute_metrics(trace)
            report = evaluate_trace(trace, loop.controller, true_gain,
                                    search_lambda_min=False)
            rows.append((lam, list(metrics.sum_sq_error),
                         float(report.rho_a.max()), 0))
        except DivergenceError:
            rows.append((lam, [np.inf] * m, np.inf, 1))
    with open(out / "sweep.csv", "w", newline="\n") as fh:
        heads = ",".join(f"sum_sq_error_{j + 1}" for j in range(m))
        fh.write(f"lambda,{heads},max_rho_A,diverged\n")
        for lam, sums, rho, div in rows:
            sums_txt = ",".join(fmt17(v) for v in sums)
            fh.write(f"{fmt17(lam)},{sums_txt},{fmt17(rho)},{div}\n")
    print(f"sweep: {len(rows)} lambda points "
          f"({sum(r[3] for r in rows)} diverged)")
    print(f"wrote {out / 'sweep.csv'}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mfac",
        description="Model-free adaptive control experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, variant=False):
        p.add_argument("--config", required=True,
                       help="config file path or bundled preset name (example1)")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--engine", choices=("auto", "python", "compiled"),
                       default=None, help="simulation engine override")
        p.add_argument("--seed", type=int, default=None,
                       help="reserved; experiments are deterministic")
        if variant:
            p.add_argument("--variant", choices=("proposed", "baseline"),
                           default=None, help="control law override")

    p_run = sub.add_parser("run", help="run one closed-loop experiment")
    common(p_run, variant=True)
    p_run.add_argument("--svg", action="store_true", help="also write SVG plots")
    p_run.set_defaults(func=cmd_run)

    p_cmp = sub.add_parser("compare", help="run both control laws")
    common(p_cmp)
    p_cmp.add_argument("--svg", action="store_true", help="also write SVG plots")
    p_cmp.set_defaults(func=cmd_compare)

    p_st = sub.add_parser("stability", help="stability diagnostics along a run")
    common(p_st, variant=True)
    p_st.set_defaults(func=cmd_stability)

    p_sw = sub.add_parser("sweep", help="one run per lambda grid point")
    common(p_sw, variant=True)
    p_sw.add_argument("--param", default="lambda", help="swept parameter")
    p_sw.add_argument("--grid", required=True,
                      help="comma-separated lambda values")
    p_sw.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED


if __name__ == "__main__":
    sys.exit(main())
