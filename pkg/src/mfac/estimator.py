"""Recursive projection estimator for the pseudo-Jacobian matrix.

Each step corrects the previous estimate toward explaining the newest
output increment:

    Phi(i) = Phi(i-1) + eta * (dy(i) - Phi(i-1) dL(i-1)) dL(i-1)^T
                          / (mu + ||dL(i-1)||^2)

A reset safeguard reinitializes the estimate when the regressor carries no
information or the input-gain block drifts out of its assumed sign/magnitude
region.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ffdl import Pjm

__all__ = ["EstimatorConfig", "update_pjm", "maybe_reset"]


@dataclass(frozen=True)
class EstimatorConfig:
    """Tunables of the projection estimator.

    mu            -- regularization weight on the estimate change, > 0
    eta           -- step factor in (0, 2]
    reset_enabled -- apply the reset safeguard
    reset_epsilon -- threshold on ||dL|| and on the input-gain magnitude
    phi_init      -- reset target (also the natural initial estimate)
    """

    mu: float
    eta: float
    phi_init: Pjm
    reset_enabled: bool = True
    reset_epsilon: float = 1e-5

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError(f"mu must be > 0, got {self.mu}")
        if not 0 < self.eta <= 2:
            raise ValueError(f"eta must be in (0, 2], got {self.eta}")
        if not self.reset_epsilon > 0:
            raise ValueError(f"reset_epsilon must be > 0, got {self.reset_epsilon}")


def update_pjm(phi_prev: Pjm, dy_now, dl_prev, cfg: EstimatorConfig) -> Pjm:
    """Projection update of the PJM estimate.

    Returns ``phi_prev`` unchanged when the previous regressor is exactly
    zero (no information) or when the prediction was already exact.
    """
    dims = phi_prev.dims
    dy_now = np.asarray(dy_now, dtype=float)
    dl_prev = np.asarray(dl_prev, dtype=float)
    if dy_now.shape != (dims.m,):
        raise ValueError(f"dy must have shape ({dims.m},), got {dy_now.shape}")
    if dl_prev.shape != (dims.regressor_len,):
        raise ValueError(
            f"regressor must have shape ({dims.regressor_len},), got {dl_prev.shape}"
        )
    norm_sq = float(dl_prev @ dl_prev)
    if norm_sq == 0.0:
        return phi_prev
    innovation = dy_now - phi_prev.flat @ dl_prev
    if not innovation.any():
        return phi_prev
    step = (cfg.eta / (cfg.mu + norm_sq)) * np.outer(innovation, dl_prev)
    return Pjm(dims, phi_prev.flat + step)


def maybe_reset(phi: Pjm, cfg: EstimatorConfig, dl_prev) -> Pjm:
    """Reset safeguard: return ``cfg.phi_init`` when the estimate is unsafe.

    Triggers when the previous regressor is negligible, when the input-gain
    block has shrunk below threshold (Frobenius norm), or when any diagonal
    entry of the input-gain block flipped sign relative to the reset target.
    """
    if not cfg.reset_enabled:
        return phi
    dl_prev = np.asarray(dl_prev, dtype=float)
    eps = cfg.reset_epsilon
    if np.linalg.norm(dl_prev) <= eps:
        return cfg.phi_init
    gain = phi.input_gain
    if np.linalg.norm(gain) <= eps:
        return cfg.phi_init
    init_diag = np.diag(cfg.phi_init.input_gain)
    if np.any(np.diag(gain) * init_diag < 0):
        return cfg.phi_init
    return phi
