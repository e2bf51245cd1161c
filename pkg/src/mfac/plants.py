"""Plants, reference signals and the dynamic-linearization oracle.

Plants are deterministic discrete-time systems exposing ``reset()`` and
``step(u) -> y_next`` plus their published initial samples.  ``LtiPlant``
doubles as a ground-truth oracle: its FFDL representation has a constant,
known PJM.  The linearization oracle (mean-value Jacobian blocks plus a
minimal-norm correction) numerically instantiates the existence argument
behind the FFDL model for any smooth plant.
"""

from __future__ import annotations

import math

import numpy as np

from .ffdl import Dimensions, Pjm

__all__ = [
    "Benchmark10",
    "LtiPlant",
    "reference_signals",
    "benchmark10_rhs",
    "mean_value_jacobian_blocks",
    "solve_eta_min_norm",
    "ffdl_residual_check",
    "simulate_open_loop",
]


def reference_signals(i: int) -> np.ndarray:
    """Two-channel sinusoidal reference sampled at step ``i``.

    Channel 1: 5 sin(pi i / 50) + 2 cos(pi i / 20)
    Channel 2: 2 sin(pi i / 50) + 5 cos(pi i / 20)

    Periodic with period 200 (least common multiple of 100 and 40).
    """
    s50 = math.sin(math.pi * i / 50)
    c20 = math.cos(math.pi * i / 20)
    return np.array([5.0 * s50 + 2.0 * c20, 2.0 * s50 + 5.0 * c20])


def benchmark10_rhs(y_args: np.ndarray, u_args: np.ndarray,
                    y2_typo_fix: bool = False,
                    y2_cross_denominator: bool = False) -> np.ndarray:
    """Right-hand side of the two-channel benchmark plant.

    ``y_args``/``u_args`` are (3, 2) arrays of the last three samples,
    newest first (lag 0, 1, 2).  Two published-reading toggles:

    * ``y2_typo_fix`` switches the duplicated 1.4-weighted current-input
      term of channel 2 to the two-step-delayed input u2(i-2), mirroring
      the delayed-input pattern of channel 1.
    * ``y2_cross_denominator`` damps the channel-2 product nonlinearity by
      the other channel's recent history instead of its own.  That variant
      loses the damping whenever channel 1 passes through zero, so the
      closed loop has a finite-escape region near the usual references;
      it is kept for fidelity experiments only.
    """
    y1_0, y1_1, y1_2 = y_args[0, 0], y_args[1, 0], y_args[2, 0]
    y2_0, y2_1, y2_2 = y_args[0, 1], y_args[1, 1], y_args[2, 1]
    u1_0, u1_1, u1_2 = u_args[0, 0], u_args[1, 0], u_args[2, 0]
    u2_0, u2_1, u2_2 = u_args[0, 1], u_args[1, 1], u_args[2, 1]

    half_sum = 0.5 * (y1_0 + y1_1)
    y1_next = (
        (2.5 * y1_0 * y1_1 + 0.09 * u1_0 * u1_1) / (1.0 + y1_0 * y1_0 + y1_1 * y1_1)
        + 1.2 * u1_0 + 1.6 * u1_2 + 0.09 * u1_0 * u2_1 + 0.5 * u2_0
        + 0.7 * math.sin(half_sum) * math.cos(half_sum)
    )
    if y2_cross_denominator:
        den = 1.0 + y1_0 * y1_0 + y1_1 * y1_1 + y1_2 * y1_2
    else:
        den = 1.0 + y2_0 * y2_0 + y2_1 * y2_1 + y2_2 * y2_2
    y2_next = (
        5.0 * y2_0 * y2_1 / den
        + u2_0 + 1.1 * u2_1
        + (1.4 * u2_2 if y2_typo_fix else 1.4 * u2_0)
        + 0.5 * u1_0
    )
    return np.array([y1_next, y2_next])


class Benchmark10:
    """Two-input two-output nonlinear benchmark plant.

    Published initial data: outputs for steps 1..3 and inputs for steps
    1..2, so the first controlled step is 3.  The plant consumes the last
    three samples of each signal.
    """

    m = 2
    n_y_args = 3
    n_u_args = 3

    #: outputs y(1), y(2), y(3) and inputs u(1), u(2) as published
    INITIAL_OUTPUTS = ((0.0, 0.0), (1.0, 1.0), (0.0, 0.0))
    INITIAL_INPUTS = ((1.0, 1.0), (1.0, 0.0))

    def __init__(self, y2_typo_fix: bool = False, y2_cross_denominator: bool = False):
        self.y2_typo_fix = bool(y2_typo_fix)
        self.y2_cross_denominator = bool(y2_cross_denominator)
        self.reset()

    def reset(self) -> None:
        ys = [np.array(v) for v in self.INITIAL_OUTPUTS]
        us = [np.array(v) for v in self.INITIAL_INPUTS]
        # newest first; the u window is padded with u(0) := 0
        self._y = np.stack([ys[2], ys[1], ys[0]])
        self._u = np.stack([us[1], us[0], np.zeros(2)])

    @property
    def initial_outputs(self) -> list[np.ndarray]:
        return [np.array(v) for v in self.INITIAL_OUTPUTS]

    @property
    def initial_inputs(self) -> list[np.ndarray]:
        return [np.array(v) for v in self.INITIAL_INPUTS]

    def rhs(self, y_args, u_args) -> np.ndarray:
        return benchmark10_rhs(np.asarray(y_args, float), np.asarray(u_args, float),
                               self.y2_typo_fix, self.y2_cross_denominator)

    def step(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.shape != (2,):
            raise ValueError(f"input must have shape (2,), got {u.shape}")
        u_args = np.stack([u, self._u[0], self._u[1]])
        y_next = benchmark10_rhs(self._y, u_args, self.y2_typo_fix,
                                 self.y2_cross_denominator)
        self._y = np.stack([y_next, self._y[0], self._y[1]])
        self._u = u_args
        return y_next.copy()


class LtiPlant:
    """Linear plant y(i+1) = sum_k A_k y(i-k+1) + sum_k B_k u(i-k+1).

    The exact FFDL representation of this plant has the constant PJM
    [A_1..A_p, B_1..B_q] (zero-padded to the requested pseudo orders), which
    makes it the ground-truth oracle for the estimator and controller tests.
    Pre-history is zero; initial output/input samples may be supplied.
    """

    def __init__(self, a_blocks, b_blocks, y_init=None, u_init=None):
        self.a = [np.atleast_2d(np.asarray(b, dtype=float)) for b in a_blocks]
        self.b = [np.atleast_2d(np.asarray(b, dtype=float)) for b in b_blocks]
        if not self.b:
            raise ValueError("need at least one input block")
        m = self.b[0].shape[0]
        for blk in self.a + self.b:
            if blk.shape != (m, m):
                raise ValueError(f"all blocks must be {m}x{m}, got {blk.shape}")
        if abs(np.linalg.det(self.b[0])) < 1e-12:
            raise ValueError("leading input block must be nonsingular")
        self.m = m
        self.n_y_args = max(len(self.a), 1)
        self.n_u_args = len(self.b)
        self._y0 = np.zeros(m) if y_init is None else np.asarray(y_init, float).copy()
        self._u0 = np.zeros(m) if u_init is None else np.asarray(u_init, float).copy()
        if self._y0.shape != (m,) or self._u0.shape != (m,):
            raise ValueError(f"initial samples must have shape ({m},)")
        self.reset()

    def reset(self) -> None:
        # newest first, zero pre-history
        self._y = [self._y0.copy()] + [np.zeros(self.m) for _ in range(len(self.a) - 1)]
        self._u = [np.zeros(self.m) for _ in range(max(len(self.b) - 1, 0))]

    @property
    def initial_outputs(self) -> list[np.ndarray]:
        return [self._y0.copy()]

    @property
    def initial_inputs(self) -> list[np.ndarray]:
        return [self._u0.copy()]

    def rhs(self, y_args, u_args) -> np.ndarray:
        y_args = np.asarray(y_args, dtype=float)
        u_args = np.asarray(u_args, dtype=float)
        out = np.zeros(self.m)
        for k, blk in enumerate(self.a):
            out += blk @ y_args[k]
        for k, blk in enumerate(self.b):
            out += blk @ u_args[k]
        return out

    def step(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.shape != (self.m,):
            raise ValueError(f"input must have shape ({self.m},), got {u.shape}")
        y_next = self.rhs(np.stack(self._y), np.stack([u] + self._u))
        if self.a:
            self._y = [y_next.copy()] + self._y[:-1] if len(self.a) > 1 else [y_next.copy()]
        if len(self.b) > 1:
            self._u = [u.copy()] + self._u[:-1]
        return y_next.copy()

    def true_pjm(self, dims: Dimensions) -> Pjm:
        """Constant PJM of the exact FFDL form at the given pseudo orders.

        Requires windows at least as deep as the plant's true orders,
        otherwise no constant PJM reproduces the dynamics.
        """
        if dims.m != self.m:
            raise ValueError(f"dims.m={dims.m} does not match plant m={self.m}")
        if dims.l_y < len(self.a) or dims.l_u < len(self.b):
            raise ValueError(
                f"pseudo orders ({dims.l_y}, {dims.l_u}) must cover the plant "
                f"orders ({len(self.a)}, {len(self.b)})"
            )
        zero = np.zeros((self.m, self.m))
        blocks = [self.a[k] if k < len(self.a) else zero for k in range(dims.l_y)]
        blocks += [self.b[k] if k < len(self.b) else zero for k in range(dims.l_u)]
        return Pjm.from_blocks(dims, blocks)


def simulate_open_loop(plant, inputs) -> tuple[np.ndarray, np.ndarray]:
    """Run ``plant`` from reset over ``inputs``; return full sample arrays.

    The returned arrays include the plant's published initial samples
    followed by the driven segment, aligned so y[t+1] is the response to
    u[t] (0-based rows = steps 1, 2, ...).
    """
    plant.reset()
    y_all = [np.asarray(v, float) for v in plant.initial_outputs]
    u_all = [np.asarray(v, float) for v in plant.initial_inputs]
    # consume any initial inputs the published outputs do not yet reflect
    for t in range(len(y_all), len(u_all) + 1):
        y_all.append(plant.step(u_all[t - 1]))
    for u in np.atleast_2d(np.asarray(inputs, dtype=float)):
        u_all.append(u)
        y_all.append(plant.step(u))
    return np.stack(y_all), np.stack(u_all)


def mean_value_jacobian_blocks(fn, y_args, u_args, l_y: int, l_u: int,
                               h: float = 1e-5):
    """Central finite-difference Jacobian blocks of a plant map.

    Differentiates ``fn(y_args, u_args)`` with respect to the first ``l_y``
    output arguments and first ``l_u`` input arguments at the given point.
    Returns ``(y_blocks, u_blocks)``: block k column q holds the partial
    derivative with respect to channel q of the lag-k argument.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    y_args = np.array(y_args, dtype=float)
    u_args = np.array(u_args, dtype=float)
    m = y_args.shape[1]
    if not 1 <= l_y <= y_args.shape[0] or not 1 <= l_u <= u_args.shape[0]:
        raise ValueError("window sizes exceed the available arguments")

    def diff(args, other, k, q, is_y):
        args[k, q] += h
        hi = fn(args, other) if is_y else fn(other, args)
        args[k, q] -= 2 * h
        lo = fn(args, other) if is_y else fn(other, args)
        args[k, q] += h
        col = (np.asarray(hi, float) - np.asarray(lo, float)) / (2.0 * h)
        if not np.all(np.isfinite(col)):
            raise ValueError("plant map returned non-finite values")
        return col

    y_blocks = []
    for k in range(l_y):
        blk = np.empty((m, m))
        for q in range(m):
            blk[:, q] = diff(y_args, u_args, k, q, True)
        y_blocks.append(blk)
    u_blocks = []
    for k in range(l_u):
        blk = np.empty((m, m))
        for q in range(m):
            blk[:, q] = diff(u_args, y_args, k, q, False)
        u_blocks.append(blk)
    return y_blocks, u_blocks


def solve_eta_min_norm(psi, dl) -> np.ndarray:
    """Minimal-Frobenius-norm matrix solution of ``psi = eta @ dl``.

    The solution is the rank-one matrix psi dl^T / ||dl||^2; any other
    solution differs by a component annihilated by dl and therefore has a
    strictly larger Frobenius norm.
    """
    psi = np.atleast_1d(np.asarray(psi, dtype=float))
    dl = np.asarray(dl, dtype=float)
    norm_sq = float(dl @ dl)
    if norm_sq == 0.0:
        raise ValueError("regressor is zero; the equation has no solution structure")
    return np.outer(psi, dl) / norm_sq


def ffdl_residual_check(plant, trajectory, dims: Dimensions, h: float = 1e-5) -> float:
    """Max FFDL reconstruction residual along a trajectory.

    At each step the PJM is built from finite-difference Jacobian blocks at
    the window midpoint plus the minimal-norm correction absorbing the
    truncated (beyond-window) arguments; the returned value is the largest
    ||dy(i+1) - Phi(i) dL(i)|| over the checked steps.  Steps with a zero
    regressor are skipped; if every step is degenerate this raises.
    """
    y_all, u_all = (np.asarray(a, dtype=float) for a in trajectory)
    m = dims.m
    if y_all.ndim != 2 or y_all.shape[1] != m or u_all.shape[1] != m:
        raise ValueError(f"trajectory arrays must have m={m} columns")
    n_ya, n_ua = plant.n_y_args, plant.n_u_args
    wy, wu = min(dims.l_y, n_ya), min(dims.l_u, n_ua)
    fn = plant.rhs

    def args_at(all_vals, t, depth):
        # lags 0..depth-1 ending at step index t (newest first)
        return np.stack([all_vals[t - k] for k in range(depth)])

    start = max(n_ya, n_ua, dims.l_y, dims.l_u) + 1
    stop = min(len(y_all) - 1, len(u_all))
    worst = None
    for t in range(start, stop):
        dy_parts = [y_all[t - k] - y_all[t - k - 1] for k in range(dims.l_y)]
        du_parts = [u_all[t - k] - u_all[t - k - 1] for k in range(dims.l_u)]
        dl = np.concatenate(dy_parts + du_parts)
        if not dl.any():
            continue

        y_now, y_prev = args_at(y_all, t, n_ya), args_at(y_all, t - 1, n_ya)
        u_now, u_prev = args_at(u_all, t, n_ua), args_at(u_all, t - 1, n_ua)
        y_mid = y_prev.copy()
        y_mid[:wy] = 0.5 * (y_now[:wy] + y_prev[:wy])
        y_mid[wy:] = y_now[wy:]
        u_mid = u_prev.copy()
        u_mid[:wu] = 0.5 * (u_now[:wu] + u_prev[:wu])
        u_mid[wu:] = u_now[wu:]
        y_blocks, u_blocks = mean_value_jacobian_blocks(fn, y_mid, u_mid, wy, wu, h)

        # truncation remainder: same window as at i-1, tail advanced vs not
        y_mix = y_prev.copy()
        y_mix[wy:] = y_now[wy:]
        u_mix = u_prev.copy()
        u_mix[wu:] = u_now[wu:]
        psi = fn(y_mix, u_mix) - fn(y_prev, u_prev)

        zero = np.zeros((m, m))
        blocks = y_blocks + [zero] * (dims.l_y - wy) + u_blocks + [zero] * (dims.l_u - wu)
        phi = np.hstack(blocks) + solve_eta_min_norm(psi, dl)
        residual = float(np.linalg.norm(y_all[t + 1] - y_all[t] - phi @ dl))
        worst = residual if worst is None else max(worst, residual)
    if worst is None:
        raise ValueError("trajectory is degenerate: every checked step has a zero regressor")
    return worst
