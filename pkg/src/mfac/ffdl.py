"""Full-form dynamic-linearization (FFDL) data model.

The FFDL representation of an unknown MIMO plant is the incremental
relation ``dy(i+1) = Phi(i) @ dL(i)`` where ``dL(i)`` stacks recent output
and input increments and ``Phi(i)`` is the pseudo-Jacobian matrix (PJM).
This module holds the dimension bookkeeping, the PJM container, the I/O
history buffers and the regressor assembly used by the estimator and the
controller.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Dimensions",
    "Pjm",
    "HistoryWindow",
    "assemble_delta_regressor",
    "predict_one_step",
    "pjm_flatten",
    "pjm_from_flat",
]


@dataclass(frozen=True)
class Dimensions:
    """Problem sizes: channel count and pseudo orders.

    m      -- number of input channels (= number of output channels)
    l_y    -- how many past output increments enter the regressor
    l_u    -- how many past input increments enter the regressor
    """

    m: int
    l_y: int
    l_u: int

    def __post_init__(self):
        for name in ("m", "l_y", "l_u"):
            v = getattr(self, name)
            if not isinstance(v, int) or v < 1:
                raise ValueError(f"{name} must be a positive integer, got {v!r}")

    @property
    def n_blocks(self) -> int:
        return self.l_y + self.l_u

    @property
    def regressor_len(self) -> int:
        return self.m * self.n_blocks


def _as_vector(x, m: int, what: str) -> np.ndarray:
    v = np.asarray(x, dtype=float)
    if v.shape != (m,):
        raise ValueError(f"{what} must have shape ({m},), got {v.shape}")
    return v


@dataclass(frozen=True, eq=False)
class Pjm:
    """Block-partitioned pseudo-Jacobian matrix.

    Stored flat as an ``m x m*(l_y+l_u)`` array.  Block k (0-based) is the
    m x m gain multiplying the k-th stacked increment of the regressor:
    blocks 0..l_y-1 act on output increments, blocks l_y..l_y+l_u-1 on
    input increments.  ``blocks[l_y]`` is the gain from the current input
    increment and is the block the control law inverts.
    """

    dims: Dimensions
    flat: np.ndarray

    def __post_init__(self):
        arr = np.array(self.flat, dtype=float)  # defensive copy
        if arr.shape != (self.dims.m, self.dims.regressor_len):
            raise ValueError(
                f"flat PJM must have shape {(self.dims.m, self.dims.regressor_len)}, "
                f"got {arr.shape}"
            )
        arr.setflags(write=False)
        object.__setattr__(self, "flat", arr)

    def __eq__(self, other):
        return (isinstance(other, Pjm) and self.dims == other.dims
                and np.array_equal(self.flat, other.flat))

    def __hash__(self):
        return hash((self.dims, self.flat.tobytes()))

    def block(self, k: int) -> np.ndarray:
        """Return block k (0-based, read-only view)."""
        if not 0 <= k < self.dims.n_blocks:
            raise IndexError(f"block index {k} out of range [0, {self.dims.n_blocks})")
        m = self.dims.m
        return self.flat[:, k * m:(k + 1) * m]

    @property
    def blocks(self) -> list[np.ndarray]:
        return [self.block(k) for k in range(self.dims.n_blocks)]

    @property
    def input_gain(self) -> np.ndarray:
        """The m x m block acting on the current input increment."""
        return self.block(self.dims.l_y)

    @classmethod
    def from_blocks(cls, dims: Dimensions, blocks) -> "Pjm":
        blocks = [np.asarray(b, dtype=float) for b in blocks]
        if len(blocks) != dims.n_blocks:
            raise ValueError(f"expected {dims.n_blocks} blocks, got {len(blocks)}")
        for b in blocks:
            if b.shape != (dims.m, dims.m):
                raise ValueError(f"each block must be {dims.m}x{dims.m}, got {b.shape}")
        return cls(dims, np.hstack(blocks))

    @classmethod
    def zeros(cls, dims: Dimensions) -> "Pjm":
        return cls(dims, np.zeros((dims.m, dims.regressor_len)))

    def blocks_bounded(self, bound: float) -> bool:
        """Diagnostic: spectral norm of every block at most ``bound``."""
        return all(np.linalg.norm(b, 2) <= bound for b in self.blocks)


def pjm_flatten(phi: Pjm) -> np.ndarray:
    """Flat m x m*(l_y+l_u) copy of the PJM."""
    return np.array(phi.flat)


def pjm_from_flat(flat, dims: Dimensions) -> Pjm:
    """Rebuild a PJM from its flat form (inverse of :func:`pjm_flatten`)."""
    return Pjm(dims, flat)


class HistoryWindow:
    """Ring buffers of recent absolute output/input samples.

    Increments are computed on demand; any increment that would reach back
    before the first recorded sample is exactly zero.  Absolute samples are
    the single source of truth so stored values can never drift from their
    increments.
    """

    def __init__(self, m: int, y_depth: int, u_depth: int):
        if m < 1 or y_depth < 2 or u_depth < 2:
            raise ValueError("need m >= 1 and depths >= 2")
        self.m = m
        self._y = deque(maxlen=y_depth)  # newest last
        self._u = deque(maxlen=u_depth)
        self._y_seen = 0
        self._u_seen = 0

    def push_output(self, y) -> None:
        self._y.append(_as_vector(y, self.m, "output sample"))
        self._y_seen += 1

    def push_input(self, u) -> None:
        self._u.append(_as_vector(u, self.m, "input sample"))
        self._u_seen += 1

    @property
    def n_outputs(self) -> int:
        return self._y_seen

    @property
    def n_inputs(self) -> int:
        return self._u_seen

    def latest_output(self) -> np.ndarray:
        if not self._y:
            raise ValueError("no output samples recorded")
        return self._y[-1].copy()

    def latest_input(self) -> np.ndarray:
        if not self._u:
            raise ValueError("no input samples recorded")
        return self._u[-1].copy()

    def _delta(self, buf: deque, lag: int) -> np.ndarray:
        # buf[-1-lag] - buf[-2-lag]; zero when either sample predates the buffer
        if lag < 0:
            raise ValueError("lag must be nonnegative")
        if len(buf) < lag + 2:
            return np.zeros(self.m)
        return buf[-1 - lag] - buf[-2 - lag]

    def output_delta(self, lag: int = 0) -> np.ndarray:
        """Increment of the output ``lag`` steps back (zero before warm-up)."""
        return self._delta(self._y, lag)

    def input_delta(self, lag: int = 0) -> np.ndarray:
        """Increment of the input ``lag`` steps back (zero before warm-up)."""
        return self._delta(self._u, lag)


def assemble_delta_regressor(hist: HistoryWindow, dims: Dimensions) -> np.ndarray:
    """Stack recent increments into the FFDL regressor dL(i).

    Ordering is output increments first (newest to oldest), then input
    increments, matching the PJM block layout so that
    ``Phi @ dL == sum_k block_k @ segment_k``.
    """
    if hist.m != dims.m:
        raise ValueError(f"history has m={hist.m}, dims have m={dims.m}")
    if hist.n_outputs < 1 or hist.n_inputs < 1:
        raise ValueError("history must contain at least one output and one input sample")
    parts = [hist.output_delta(k) for k in range(dims.l_y)]
    parts += [hist.input_delta(k) for k in range(dims.l_u)]
    return np.concatenate(parts)


def predict_one_step(phi: Pjm, dl, y_now) -> np.ndarray:
    """One-step output prediction ``y_now + Phi @ dL``."""
    dl = np.asarray(dl, dtype=float)
    if dl.shape != (phi.dims.regressor_len,):
        raise ValueError(
            f"regressor must have shape ({phi.dims.regressor_len},), got {dl.shape}"
        )
    y_now = _as_vector(y_now, phi.dims.m, "y_now")
    return y_now + phi.flat @ dl
