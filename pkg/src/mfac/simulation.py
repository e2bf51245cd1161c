"""Deterministic closed-loop simulation of the adaptive controller.

Per step: update the PJM estimate from the newest output increment, apply
the reset safeguard, compute the control increment against the next
reference sample, integrate the input, step the plant, record everything.

Two interchangeable engines run the loop: a pure-Python/numpy engine that
accepts any plant object, and a compiled kernel (Cython) covering the two
built-in plant families.  The compiled engine is selected automatically at
import when available; set ``MFAC_PURE_PYTHON=1`` to force the fallback.
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .controller import ControllerConfig, control_increment
from .estimator import EstimatorConfig, maybe_reset, update_pjm
from .ffdl import Dimensions, HistoryWindow, Pjm, assemble_delta_regressor
from .plants import Benchmark10, LtiPlant, reference_signals

try:
    from . import _loop as _compiled
except ImportError:  # extension not built; fall back to the Python engine
    _compiled = None

__all__ = [
    "PlantSpec",
    "Benchmark10Spec",
    "LtiSpec",
    "CustomPlantSpec",
    "ReferenceSpec",
    "Example1Reference",
    "ConstantReference",
    "LoopConfig",
    "SimulationTrace",
    "Metrics",
    "DivergenceError",
    "run_closed_loop",
    "compute_metrics",
    "compare_controllers",
    "active_engine",
    "available_engines",
]

DIVERGENCE_LIMIT = 1e9
ENGINES = ("auto", "python", "compiled")


class DivergenceError(RuntimeError):
    """Closed-loop output left the admissible region (instability)."""

    def __init__(self, step: int, norm: float):
        super().__init__(
            f"plant output diverged at step {step} (||y|| = {norm:.3e} "
            f"exceeds {DIVERGENCE_LIMIT:.0e})"
        )
        self.step = step
        self.norm = norm


# ---------------------------------------------------------------------------
# plant / reference specifications (buildable, hashable config atoms)

@dataclass(frozen=True)
class Benchmark10Spec:
    """The bundled two-channel nonlinear benchmark plant."""

    y2_typo_fix: bool = False
    y2_cross_denominator: bool = False
    name = "benchmark10"

    @property
    def m(self) -> int:
        return 2

    def build(self) -> Benchmark10:
        return Benchmark10(self.y2_typo_fix, self.y2_cross_denominator)


@dataclass(frozen=True)
class LtiSpec:
    """Linear plant given by tuples of m x m coefficient blocks."""

    a_blocks: tuple
    b_blocks: tuple
    y_init: tuple = ()
    u_init: tuple = ()
    name = "lti"

    @property
    def m(self) -> int:
        return np.atleast_2d(np.asarray(self.b_blocks[0])).shape[0]

    def build(self) -> LtiPlant:
        return LtiPlant(
            [np.array(b, dtype=float) for b in self.a_blocks],
            [np.array(b, dtype=float) for b in self.b_blocks],
            np.array(self.y_init, dtype=float) if self.y_init else None,
            np.array(self.u_init, dtype=float) if self.u_init else None,
        )

    def true_pjm(self, dims: Dimensions) -> Pjm:
        return self.build().true_pjm(dims)


@dataclass(frozen=True)
class CustomPlantSpec:
    """Escape hatch: any plant factory (Python engine only)."""

    factory: Callable
    m: int
    name = "custom"

    def build(self):
        return self.factory()


PlantSpec = Benchmark10Spec | LtiSpec | CustomPlantSpec


@dataclass(frozen=True)
class Example1Reference:
    """Two-channel mixed-sinusoid reference (period 200)."""

    name = "example1"
    m = 2

    def sample(self, i: int) -> np.ndarray:
        return reference_signals(i)


@dataclass(frozen=True)
class ConstantReference:
    """Constant set point."""

    values: tuple
    name = "constant"

    @property
    def m(self) -> int:
        return len(self.values)

    def sample(self, i: int) -> np.ndarray:
        return np.array(self.values, dtype=float)


ReferenceSpec = Example1Reference | ConstantReference


@dataclass(frozen=True)
class LoopConfig:
    """Everything a closed-loop run needs."""

    dims: Dimensions
    estimator: EstimatorConfig
    controller: ControllerConfig
    plant: PlantSpec
    reference: ReferenceSpec
    horizon: int
    engine: str = "auto"

    def __post_init__(self):
        if self.horizon < 4:
            raise ValueError(f"horizon must be at least 4, got {self.horizon}")
        if self.engine not in ENGINES:
            raise ValueError(f"engine must be one of {ENGINES}, got {self.engine!r}")
        if self.plant.m != self.dims.m:
            raise ValueError(
                f"plant has m={self.plant.m} channels but dims.m={self.dims.m}"
            )
        if self.reference.m != self.dims.m:
            raise ValueError(
                f"reference has m={self.reference.m} channels but dims.m={self.dims.m}"
            )
        self.controller.check_dims(self.dims.n_blocks)
        if self.estimator.phi_init.dims != self.dims:
            raise ValueError("estimator phi_init dimensions do not match loop dims")


@dataclass
class SimulationTrace:
    """Per-step record of a closed-loop run.

    Row r corresponds to absolute step ``steps[r]``; rows run from the
    first controlled step through the horizon.
    """

    steps: np.ndarray   # (n,) int
    y: np.ndarray       # (n, m) measured outputs
    y_ref: np.ndarray   # (n, m) reference at the same step
    u: np.ndarray       # (n, m) applied inputs
    e: np.ndarray       # (n, m) y_ref - y
    du: np.ndarray      # (n, m) control increments
    phi: np.ndarray     # (n, m, m*(l_y+l_u)) PJM estimate used at the step
    dims: Dimensions
    first_step: int
    horizon: int

    @property
    def n_steps(self) -> int:
        return len(self.steps)

    def pjm_at(self, row: int) -> Pjm:
        return Pjm(self.dims, self.phi[row])

    def check_consistency(self) -> None:
        if np.any(np.diff(self.steps) != 1):
            raise AssertionError("trace step index has gaps")
        if not np.array_equal(self.e, self.y_ref - self.y):
            raise AssertionError("stored errors disagree with stored y_ref - y")


@dataclass(frozen=True)
class Metrics:
    """Per-channel sum of squared tracking errors over a step window."""

    window: tuple[int, int]        # inclusive absolute step range
    sum_sq_error: np.ndarray       # (m,)


# ---------------------------------------------------------------------------
# engine selection

def available_engines() -> tuple[str, ...]:
    return ("python", "compiled") if _compiled is not None else ("python",)


def _compiled_supported(cfg: LoopConfig) -> bool:
    return (
        _compiled is not None
        and isinstance(cfg.plant, (Benchmark10Spec, LtiSpec))
        and not os.environ.get("MFAC_PURE_PYTHON")
    )


def active_engine(cfg: Optional[LoopConfig] = None, engine: Optional[str] = None) -> str:
    """Resolve which engine a run will use."""
    choice = engine or (cfg.engine if cfg is not None else "auto")
    if choice == "python":
        return "python"
    if choice == "compiled":
        if _compiled is None:
            raise RuntimeError("compiled engine requested but the extension is not built")
        if cfg is not None and not isinstance(cfg.plant, (Benchmark10Spec, LtiSpec)):
            raise RuntimeError("compiled engine supports only the built-in plant families")
        return "compiled"
    if cfg is None:
        return "compiled" if (_compiled is not None
                              and not os.environ.get("MFAC_PURE_PYTHON")) else "python"
    return "compiled" if _compiled_supported(cfg) else "python"


# ---------------------------------------------------------------------------
# shared warm-up bookkeeping

def _warm_start(cfg: LoopConfig):
    """Build the plant, replay published samples, return aligned histories.

    Returns (plant, y_known, u_known, first_step) where the known sample
    lists cover steps 1..first_step and 1..first_step-1 respectively.
    """
    plant = cfg.plant.build()
    plant.reset()
    y_known = [np.asarray(v, dtype=float) for v in plant.initial_outputs]
    u_known = [np.asarray(v, dtype=float) for v in plant.initial_inputs]
    if len(u_known) < len(y_known) - 1:
        raise ValueError("plant publishes fewer initial inputs than its outputs imply")
    first_step = len(u_known) + 1
    for t in range(len(y_known) + 1, first_step + 1):
        y_known.append(plant.step(u_known[t - 2]))
    return plant, y_known, u_known, first_step


def _reference_table(cfg: LoopConfig) -> np.ndarray:
    """Reference samples for steps 1..horizon+1 (row 0 unused)."""
    table = np.zeros((cfg.horizon + 2, cfg.dims.m))
    for i in range(1, cfg.horizon + 2):
        table[i] = cfg.reference.sample(i)
    return table


# ---------------------------------------------------------------------------
# pure-Python engine

def _run_python(cfg: LoopConfig) -> SimulationTrace:
    dims = cfg.dims
    plant, y_known, u_known, i0 = _warm_start(cfg)
    n = cfg.horizon - i0 + 1
    ref = _reference_table(cfg)

    hist = HistoryWindow(dims.m, y_depth=dims.l_y + 2, u_depth=dims.l_u + 2)
    for v in y_known[:-1]:
        hist.push_output(v)
    for v in u_known:
        hist.push_input(v)
    dl_prev = assemble_delta_regressor(hist, dims)
    hist.push_output(y_known[-1])

    phi = cfg.estimator.phi_init
    u_prev = u_known[-1]
    y_now = y_known[-1]

    out_y = np.empty((n, dims.m))
    out_ref = np.empty((n, dims.m))
    out_u = np.empty((n, dims.m))
    out_du = np.empty((n, dims.m))
    out_phi = np.empty((n, dims.m, dims.regressor_len))

    for r, i in enumerate(range(i0, cfg.horizon + 1)):
        dy_now = hist.output_delta(0)
        phi = update_pjm(phi, dy_now, dl_prev, cfg.estimator)
        phi = maybe_reset(phi, cfg.estimator, dl_prev)
        du = control_increment(phi, hist, y_now, ref[i + 1], cfg.controller)
        u_now = u_prev + du
        hist.push_input(u_now)
        dl_prev = assemble_delta_regressor(hist, dims)
        y_next = plant.step(u_now)

        out_y[r] = y_now
        out_ref[r] = ref[i]
        out_u[r] = u_now
        out_du[r] = du
        out_phi[r] = phi.flat

        norm = float(np.linalg.norm(y_next))
        if not np.isfinite(norm) or norm > DIVERGENCE_LIMIT:
            raise DivergenceError(i + 1, norm)
        hist.push_output(y_next)
        y_now = y_next
        u_prev = u_now

    return SimulationTrace(
        steps=np.arange(i0, cfg.horizon + 1),
        y=out_y, y_ref=out_ref, u=out_u, e=out_ref - out_y, du=out_du,
        phi=out_phi, dims=dims, first_step=i0, horizon=cfg.horizon,
    )


# ---------------------------------------------------------------------------
# compiled engine wrapper

def _run_compiled(cfg: LoopConfig) -> SimulationTrace:
    dims = cfg.dims
    _, y_known, u_known, i0 = _warm_start(cfg)
    n = cfg.horizon - i0 + 1
    ref = _reference_table(cfg)

    if isinstance(cfg.plant, Benchmark10Spec):
        plant_kind = 0
        a_stack = np.zeros((0, dims.m))
        b_stack = np.zeros((0, dims.m))
        typo_fix = cfg.plant.y2_typo_fix
        cross_den = cfg.plant.y2_cross_denominator
    else:
        plant_kind = 1
        plant = cfg.plant.build()
        a_stack = (np.vstack(plant.a) if plant.a else np.zeros((0, dims.m)))
        b_stack = np.vstack(plant.b)
        typo_fix = False
        cross_den = False

    ctrl = cfg.controller
    est = cfg.estimator
    out_y = np.empty((n, dims.m))
    out_u = np.empty((n, dims.m))
    out_du = np.empty((n, dims.m))
    out_phi = np.empty((n, dims.m * dims.regressor_len))
    out_norm = np.zeros(1)

    status = _compiled.run_loop(
        plant_kind,
        np.ascontiguousarray(a_stack), np.ascontiguousarray(b_stack),
        1 if typo_fix else 0, 1 if cross_den else 0,
        np.ascontiguousarray(np.stack(y_known)),
        np.ascontiguousarray(np.stack(u_known)),
        np.ascontiguousarray(ref),
        i0, cfg.horizon, dims.m, dims.l_y, dims.l_u,
        np.array(est.phi_init.flat),
        est.mu, est.eta, 1 if est.reset_enabled else 0, est.reset_epsilon,
        ctrl.lam, np.asarray(ctrl.rho, dtype=float),
        0 if ctrl.variant == "proposed" else 1,
        0 if ctrl.baseline_norm == "spectral" else 1,
        DIVERGENCE_LIMIT,
        out_y, out_u, out_du, out_phi, out_norm,
    )
    if status != 0:
        raise DivergenceError(status, float(out_norm[0]))

    out_ref = ref[i0:cfg.horizon + 1]
    return SimulationTrace(
        steps=np.arange(i0, cfg.horizon + 1),
        y=out_y, y_ref=out_ref, u=out_u, e=out_ref - out_y, du=out_du,
        phi=out_phi.reshape(n, dims.m, dims.regressor_len),
        dims=dims, first_step=i0, horizon=cfg.horizon,
    )


def run_closed_loop(cfg: LoopConfig, engine: Optional[str] = None) -> SimulationTrace:
    """Run the closed loop described by ``cfg`` and return its trace.

    Deterministic: identical configurations produce identical traces.
    Raises :class:`DivergenceError` when the output norm exceeds 1e9.
    """
    if active_engine(cfg, engine) == "compiled":
        return _run_compiled(cfg)
    return _run_python(cfg)


def compute_metrics(trace: SimulationTrace,
                    window: Optional[tuple[int, int]] = None) -> Metrics:
    """Per-channel sum of squared errors over an inclusive step window."""
    lo, hi = window if window is not None else (trace.first_step, trace.horizon)
    mask = (trace.steps >= lo) & (trace.steps <= hi)
    if not mask.any():
        raise ValueError(f"window [{lo}, {hi}] does not overlap the trace")
    err = trace.e[mask]
    return Metrics(window=(lo, hi), sum_sq_error=np.sum(err * err, axis=0))


def compare_controllers(cfg: LoopConfig, engine: Optional[str] = None):
    """Run both control laws from identical initial conditions.

    Returns (metrics_proposed, metrics_baseline, trace_proposed,
    trace_baseline); everything except the control law is shared.
    """
    cfg_p = dataclasses.replace(
        cfg, controller=dataclasses.replace(cfg.controller, variant="proposed"))
    cfg_b = dataclasses.replace(
        cfg, controller=dataclasses.replace(cfg.controller, variant="baseline"))
    trace_p = run_closed_loop(cfg_p, engine)
    trace_b = run_closed_loop(cfg_b, engine)
    return compute_metrics(trace_p), compute_metrics(trace_b), trace_p, trace_b
