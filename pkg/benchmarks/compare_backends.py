#!/usr/bin/env python3
"""Timing comparison of the simulation engines.

Runs the benchmark experiment and an LTI tracking run on both the compiled
kernel and the pure-Python engine, reporting wall time per run and the
worst trajectory disagreement.

Usage: python benchmarks/compare_backends.py [--repeats N]
"""

import argparse
import statistics
import time

import numpy as np

from mfac import available_engines, compute_metrics, run_closed_loop
from mfac.config import ExperimentConfig, resolve_config_path


def scalar_lti_loop():
    from mfac import (ConstantReference, ControllerConfig, Dimensions,
                      EstimatorConfig, LoopConfig, LtiSpec, Pjm)
    dims = Dimensions(1, 1, 1)
    return LoopConfig(
        dims=dims,
        estimator=EstimatorConfig(mu=1.0, eta=1.0, phi_init=Pjm(dims, [[0.0, 0.5]])),
        controller=ControllerConfig(lam=1.0, rho=(0.5, 0.5)),
        plant=LtiSpec(a_blocks=(((0.5,),),), b_blocks=(((1.0,),),)),
        reference=ConstantReference(values=(1.0,)),
        horizon=2000,
    )


def time_engine(cfg, engine, repeats):
    times = []
    trace = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        trace = run_closed_loop(cfg, engine=engine)
        times.append(time.perf_counter() - t0)
    return min(times), statistics.median(times), trace


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    if "compiled" not in available_engines():
        print("compiled engine not built; install the package with its "
              "extension to benchmark both")
        return 1

    cases = [
        ("benchmark 2x2, N=1000",
         ExperimentConfig.from_file(resolve_config_path("example1")).loop),
        ("LTI 1x1, N=2000", scalar_lti_loop()),
    ]
    print(f"{'case':24s} {'python':>12s} {'compiled':>12s} {'speedup':>8s} "
          f"{'max traj gap':>14s}")
    for name, cfg in cases:
        t_py, _, trace_py = time_engine(cfg, "python", args.repeats)
        t_cy, _, trace_cy = time_engine(cfg, "compiled", args.repeats)
        gap = max(float(np.abs(trace_py.y - trace_cy.y).max()),
                  float(np.abs(trace_py.u - trace_cy.u).max()))
        print(f"{name:24s} {t_py * 1e3:10.2f}ms {t_cy * 1e3:10.2f}ms "
              f"{t_py / t_cy:7.1f}x {gap:14.3e}")
        m_py = compute_metrics(trace_py).sum_sq_error
        m_cy = compute_metrics(trace_cy).sum_sq_error
        rel = float(np.abs(m_py - m_cy).max() / max(m_py.max(), 1e-30))
        print(f"{'':24s} metrics relative gap: {rel:.3e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
