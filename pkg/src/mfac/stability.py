"""Numerical stability diagnostics for the closed loop.

The contraction argument behind the controller reduces to quantities that
are all computable along a recorded run: the spectral radius of the
block-companion matrix of the increment dynamics, the infinity-norm
contraction factor of the error recursion (d4), and a root bound on the
companion eigenvalues.  The existential constants of the underlying proof
(norm-equivalence factors, arbitrary epsilon margins) are not computable
and are deliberately not reported; this module reports only well-defined
surrogates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .controller import ControllerConfig, gain_from_block
from .ffdl import Pjm

__all__ = [
    "StabilityReport",
    "build_companion_matrix",
    "spectral_radius",
    "regularized_inverse_norm_identity_check",
    "d4_quantity",
    "contraction_bound",
    "lambda_min_search",
    "evaluate_trace",
]

LAMBDA_GRID_LO = 1e-3
LAMBDA_GRID_HI = 1e6


def _companion(phi_hat: Pjm, rho, lam: float) -> np.ndarray:
    dims = phi_hat.dims
    m, nb = dims.m, dims.n_blocks
    gain = gain_from_block(phi_hat.input_gain, lam)
    a = np.zeros((m * nb, m * nb))

    def put(slot: int, block_idx: int) -> None:
        p = rho[block_idx] * (gain @ phi_hat.block(block_idx))
        a[0:m, slot * m:(slot + 1) * m] = -p

    slot = 0
    for b in range(dims.l_y + 1, nb):      # input-history blocks
        put(slot, b)
        slot += 1
    for b in range(dims.l_y):              # output blocks
        put(slot, b)
        slot += 1
    for r in range(1, nb):                 # sub-diagonal shift
        a[r * m:(r + 1) * m, (r - 1) * m:r * m] = np.eye(m)
    return a


def build_companion_matrix(phi_hat: Pjm, cfg: ControllerConfig) -> np.ndarray:
    """Block-companion matrix of the closed-loop increment recursion.

    State ordering is current-to-oldest input increments followed by
    current-to-oldest output increments.  The first block row carries the
    feedback couplings -rho_k G block_k (input-history blocks first, then
    output blocks, then a zero block); identity blocks sit on the
    sub-diagonal.  With all off-key blocks zero this is a pure down-shift.
    """
    cfg.check_dims(phi_hat.dims.n_blocks)
    return _companion(phi_hat, cfg.rho, cfg.lam)


def spectral_radius(mat) -> float:
    """Largest eigenvalue magnitude of a square matrix."""
    mat = np.asarray(mat, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError(f"matrix must be square, got shape {mat.shape}")
    try:
        eigs = np.linalg.eigvals(mat)
    except np.linalg.LinAlgError as exc:
        raise RuntimeError(f"eigenvalue iteration failed: {exc}") from exc
    return float(np.max(np.abs(eigs))) if eigs.size else 0.0


def regularized_inverse_norm_identity_check(phi_block, lam: float) -> tuple[float, float]:
    """Two independent evaluations of ||[B^T B + lam I]^{-1}||_2.

    Left: explicit inverse and its spectral norm.  Right: 1/(lam + s_min)
    with s_min the smallest eigenvalue of B^T B.  Equal in exact arithmetic;
    the caller asserts how close they are.
    """
    if not lam > 0:
        raise ValueError(f"lam must be > 0, got {lam}")
    b = np.atleast_2d(np.asarray(phi_block, dtype=float))
    gram = b.T @ b
    lhs = float(np.linalg.norm(np.linalg.inv(gram + lam * np.eye(b.shape[1])), 2))
    s_min = float(np.linalg.eigvalsh(gram)[0])
    return lhs, 1.0 / (lam + s_min)


def d4_quantity(phi_true_block, phi_hat_block, lam: float, rho_key: float) -> float:
    """Error-recursion contraction factor ||I - rho B_true G_hat||_inf.

    ``G_hat`` is the regularized gain built from the estimated input block;
    the true block enters as a plain product.  When no ground truth exists
    the caller substitutes the estimate and should label the result as such.
    """
    true = np.atleast_2d(np.asarray(phi_true_block, dtype=float))
    hat = np.atleast_2d(np.asarray(phi_hat_block, dtype=float))
    gain = gain_from_block(hat, lam)
    m = true.shape[0]
    return float(np.linalg.norm(np.eye(m) - rho_key * (true @ gain), np.inf))


def contraction_bound(phi_hat: Pjm, cfg: ControllerConfig) -> float:
    """Root bound on the companion eigenvalues from the coupling norms.

    Computes (max off-key rho)^(1/(nb-1)) * M1 where
    M1 = (sum over off-key blocks of ||G block_k||_inf)^(1/(nb-1)).
    Values below one certify a spectral radius below one.
    """
    dims = phi_hat.dims
    cfg.check_dims(dims.n_blocks)
    gain = gain_from_block(phi_hat.input_gain, cfg.lam)
    off_key = [b for b in range(dims.n_blocks) if b != dims.l_y]
    total = sum(np.linalg.norm(gain @ phi_hat.block(b), np.inf) for b in off_key)
    power = 1.0 / max(dims.n_blocks - 1, 1)
    rho_max = max(cfg.rho[b] for b in off_key)
    return (rho_max ** power) * (total ** power)


def _passes(phi: Pjm, cfg: ControllerConfig, lam: float) -> bool:
    hat = phi.input_gain
    if d4_quantity(hat, hat, lam, cfg.rho[phi.dims.l_y]) >= 1.0:
        return False
    return spectral_radius(_companion(phi, cfg.rho, lam)) < 1.0


def lambda_min_search(phi_trace: Sequence[Pjm], cfg: ControllerConfig,
                      lo: float = LAMBDA_GRID_LO, hi: float = LAMBDA_GRID_HI) -> float:
    """Smallest grid lambda making every step contractive.

    Scans decades from ``lo`` to ``hi`` for the first lambda with
    spectral radius < 1 and d4 estimate < 1 at every recorded step, then
    refines within the bracketing decade to two significant figures.
    Returns ``math.inf`` when no grid point qualifies.
    """
    phi_trace = list(phi_trace)
    if not phi_trace:
        raise ValueError("empty PJM trace")

    def all_pass(lam: float) -> bool:
        return all(_passes(phi, cfg, lam) for phi in phi_trace)

    decades = []
    lam = lo
    while lam <= hi * (1 + 1e-12):
        decades.append(lam)
        lam *= 10.0
    found = next((d for d in decades if all_pass(d)), None)
    if found is None:
        return math.inf
    if found == decades[0]:
        return lo
    # refine on the two-significant-figure grid inside the bracketing decade
    for j in range(10, 100):
        candidate = (j / 100.0) * found
        if all_pass(candidate):
            return candidate
    return found


@dataclass
class StabilityReport:
    """Per-step stability diagnostics along a recorded run."""

    steps: np.ndarray               # (n,)
    rho_a: np.ndarray               # spectral radius of the companion matrix
    d4: np.ndarray                  # error-recursion contraction factor
    contraction_bound: np.ndarray   # companion eigenvalue root bound
    d4_is_estimate: bool            # true PJM unavailable, estimate substituted
    lambda_min: float = math.nan

    @property
    def rho_a_ok(self) -> np.ndarray:
        return self.rho_a < 1.0

    @property
    def d4_ok(self) -> np.ndarray:
        return self.d4 < 1.0


def evaluate_trace(trace, cfg: ControllerConfig,
                   true_input_gain: Optional[np.ndarray] = None,
                   search_lambda_min: bool = True) -> StabilityReport:
    """Stability diagnostics for every step of a simulation trace.

    ``true_input_gain`` supplies the plant's actual input-gain block when
    known (linear oracle plants); otherwise the estimate is substituted and
    the report is flagged accordingly.
    """
    dims = trace.dims
    n = trace.n_steps
    rho_a = np.empty(n)
    d4 = np.empty(n)
    bound = np.empty(n)
    rho_key = cfg.rho[dims.l_y]
    for r in range(n):
        phi = trace.pjm_at(r)
        rho_a[r] = spectral_radius(build_companion_matrix(phi, cfg))
        hat = phi.input_gain
        true = hat if true_input_gain is None else true_input_gain
        d4[r] = d4_quantity(true, hat, cfg.lam, rho_key)
        bound[r] = contraction_bound(phi, cfg)
    report = StabilityReport(
        steps=trace.steps.copy(), rho_a=rho_a, d4=d4, contraction_bound=bound,
        d4_is_estimate=true_input_gain is None,
    )
    if search_lambda_min:
        report.lambda_min = lambda_min_search(
            [trace.pjm_at(r) for r in range(n)], cfg)
    return report
