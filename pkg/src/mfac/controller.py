"""Control-increment laws built on the FFDL model.

Two variants of the same structure: the next input increment is a gain
applied to a bracket that combines the reference error with the predicted
effect of recent output/input increments,

    bracket = rho_key * (y_ref_next - y_now)
              - sum_k rho_k * block_k @ dy(i-k+1)      (output blocks)
              - sum_k rho_k * block_k @ du(...)         (input-history blocks)

* proposed: du = [G^T G + lambda I]^{-1} G^T @ bracket with G the
  input-gain block, computed by a symmetric positive-definite solve.
* baseline: du = G^T @ bracket / (lambda + ||G||^2), the scalar-denominator
  law that replaces the matrix inverse by the reciprocal of a norm and in
  doing so drops cross-channel coupling.

For m = 1 the two laws coincide.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .ffdl import HistoryWindow, Pjm, _as_vector

__all__ = [
    "ControllerConfig",
    "gain_matrix",
    "gain_from_block",
    "control_increment",
    "control_increment_proposed",
    "control_increment_baseline",
]

VARIANTS = ("proposed", "baseline")
BASELINE_NORMS = ("spectral", "frobenius")


@dataclass(frozen=True)
class ControllerConfig:
    """Control-law tunables.

    lam           -- control-effort weight, > 0
    rho           -- step factors, one per PJM block, each in (0, 1]
    variant       -- which law `control_increment` dispatches to
    baseline_norm -- norm in the baseline denominator
    """

    lam: float
    rho: tuple[float, ...]
    variant: str = "proposed"
    baseline_norm: str = "spectral"

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError(f"lam must be > 0, got {self.lam}")
        object.__setattr__(self, "rho", tuple(float(r) for r in self.rho))
        if any(not 0 < r <= 1 for r in self.rho):
            raise ValueError(f"every rho must lie in (0, 1], got {self.rho}")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.baseline_norm not in BASELINE_NORMS:
            raise ValueError(
                f"baseline_norm must be one of {BASELINE_NORMS}, got {self.baseline_norm!r}"
            )

    def check_dims(self, n_blocks: int) -> None:
        if len(self.rho) != n_blocks:
            raise ValueError(f"need {n_blocks} rho factors, got {len(self.rho)}")


def gain_from_block(block: np.ndarray, lam: float) -> np.ndarray:
    """Regularized pseudo-inverse gain [B^T B + lam I]^{-1} B^T of one block.

    Computed by a Cholesky solve of the symmetric positive-definite system;
    no explicit inverse is formed and failure is a hard error because the
    system is positive definite for any lam > 0.
    """
    if not lam > 0:
        raise ValueError(f"lam must be > 0, got {lam}")
    block = np.asarray(block, dtype=float)
    sys = block.T @ block + lam * np.eye(block.shape[0])
    return scipy.linalg.cho_solve(scipy.linalg.cho_factor(sys, lower=True), block.T)


def gain_matrix(phi: Pjm, lam: float) -> np.ndarray:
    """Regularized pseudo-inverse gain of the PJM's input-gain block."""
    return gain_from_block(phi.input_gain, lam)


def _bracket(phi: Pjm, hist: HistoryWindow, y_now, y_ref_next,
             cfg: ControllerConfig) -> np.ndarray:
    dims = phi.dims
    cfg.check_dims(dims.n_blocks)
    y_now = _as_vector(y_now, dims.m, "y_now")
    y_ref_next = _as_vector(y_ref_next, dims.m, "y_ref_next")
    if hist.m != dims.m:
        raise ValueError(f"history has m={hist.m}, PJM has m={dims.m}")
    # At control time the window holds outputs through y(i) and inputs
    # through u(i-1): output lag k is dy(i-k), input lag j is du(i-1-j).
    out = cfg.rho[dims.l_y] * (y_ref_next - y_now)
    for k in range(dims.l_y):
        out -= cfg.rho[k] * (phi.block(k) @ hist.output_delta(k))
    for b in range(dims.l_y + 1, dims.n_blocks):
        out -= cfg.rho[b] * (phi.block(b) @ hist.input_delta(b - dims.l_y - 1))
    return out


def control_increment_proposed(phi: Pjm, hist: HistoryWindow, y_now, y_ref_next,
                               cfg: ControllerConfig) -> np.ndarray:
    """Matrix-inverse control increment (coupling-preserving law)."""
    return gain_matrix(phi, cfg.lam) @ _bracket(phi, hist, y_now, y_ref_next, cfg)


def baseline_denominator(phi: Pjm, cfg: ControllerConfig) -> float:
    gain = phi.input_gain
    if cfg.baseline_norm == "spectral":
        n = np.linalg.norm(gain, 2)
    else:
        n = np.linalg.norm(gain)
    return cfg.lam + n * n


def control_increment_baseline(phi: Pjm, hist: HistoryWindow, y_now, y_ref_next,
                               cfg: ControllerConfig) -> np.ndarray:
    """Scalar-denominator control increment (norm-reciprocal law)."""
    br = _bracket(phi, hist, y_now, y_ref_next, cfg)
    return (phi.input_gain.T @ br) / baseline_denominator(phi, cfg)


def control_increment(phi: Pjm, hist: HistoryWindow, y_now, y_ref_next,
                      cfg: ControllerConfig) -> np.ndarray:
    """Dispatch on ``cfg.variant``."""
    if cfg.variant == "proposed":
        return control_increment_proposed(phi, hist, y_now, y_ref_next, cfg)
    return control_increment_baseline(phi, hist, y_now, y_ref_next, cfg)
