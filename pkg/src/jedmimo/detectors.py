"""Joint channel estimation and symbol detection for the block-fading uplink.

Two iterative solvers recover the data block ``X_d`` and the channel ``H``
from ``Y = H [X_t X_d] + V`` using only the pilots ``X_t`` and the relaxed
constellation constraint (the box that is the constellation's convex hull):

* :func:`jed_am` alternates a projected least-squares symbol update with a
  regularized channel refit.
* :func:`jed_admm` replaces the symbol step with scaled-dual ADMM sweeps on
  the box-constrained least-squares problem, which propagates residual
  information through the dual variable and converges in far fewer
  iterations at the same per-iteration cost scale.

Both start from the pilot-only MMSE channel estimate
(:func:`mmse_channel_init`) and run a fixed iteration budget; there is no
early stopping, so runs are deterministic and directly comparable under the
flops metric in :mod:`jedmimo.flops`.

One-shot ZF / MMSE detectors with known ``H`` are included as perfect-CSI
baselines.

The per-iteration loops are dispatched to a compiled kernel when available
(see :mod:`jedmimo._kernels`); results do not depend on the backend beyond
floating-point roundoff.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from . import _kernels
from .errors import NumericalFailure
from .model import Constellation

__all__ = [
    "AdmmConfig",
    "IterationState",
    "IterationRecord",
    "project_box",
    "hard_decision",
    "mmse_channel_init",
    "jed_am",
    "jed_admm",
    "zf_detect",
    "mmse_detect",
    "backend_name",
]


def backend_name() -> str:
    """Which iteration-kernel backend this process is using."""
    return _kernels.BACKEND


# ===== ELEMENTWISE BUILDING BLOCKS =====


def project_box(x: np.ndarray, radius: float) -> np.ndarray:
    """Project onto the axis-aligned complex box of half-width ``radius``.

    Clips real and imaginary parts independently to ``[-radius, radius]``;
    this is the orthogonal projection onto the constellation's convex hull
    when ``radius = sqrt(beta) - 1``.
    """
    if radius < 0:
        raise ValueError("projection radius must be >= 0")
    x = np.asarray(x)
    return np.clip(x.real, -radius, radius) + 1j * np.clip(x.imag, -radius, radius)


def hard_decision(x: np.ndarray, constellation: Constellation) -> np.ndarray:
    """Map every entry to the nearest constellation point.

    Ties go to the candidate with the smaller real part, then the smaller
    imaginary part (the points are sorted that way and the first minimum
    wins), so results are deterministic on boundary inputs.
    """
    x = np.asarray(x)
    pts = constellation.points
    d2 = (x.real[..., None] - pts.real) ** 2 + (x.imag[..., None] - pts.imag) ** 2
    return pts[d2.argmin(axis=-1)]


# ===== CHANNEL INITIALIZATION =====


def mmse_channel_init(y_t: np.ndarray, x_t: np.ndarray, noise_ratio: float) -> np.ndarray:
    """Pilot-only regularized channel estimate.

    Solves ``H = Y_t X_t^H (X_t X_t^H + noise_ratio I)^-1`` where
    ``noise_ratio = sigma_v_sq / sigma_h_sq``.  This is the LMMSE estimate
    for i.i.d. channel entries and the shared starting point of both
    iterative solvers.

    Raises
    ------
    numpy.linalg.LinAlgError
        If the regularized pilot Gram matrix is singular (e.g. fewer pilot
        instants than users with ``noise_ratio = 0``).
    """
    y_t = np.asarray(y_t, dtype=complex)
    x_t = np.asarray(x_t, dtype=complex)
    if y_t.ndim != 2 or x_t.ndim != 2 or y_t.shape[1] != x_t.shape[1]:
        raise ValueError(f"pilot shape mismatch: Y_t is {y_t.shape}, X_t is {x_t.shape}")
    if noise_ratio < 0:
        raise ValueError("noise_ratio must be >= 0")
    k = x_t.shape[0]
    a = x_t @ x_t.conj().T
    a.flat[:: k + 1] += noise_ratio
    try:
        f = cho_factor(a, lower=True)
    except np.linalg.LinAlgError:
        raise np.linalg.LinAlgError(
            "pilot Gram matrix is singular; need t_pilot >= n_tx pilots with "
            "independent rows, or noise_ratio > 0"
        ) from None
    return cho_solve(f, (y_t @ x_t.conj().T).conj().T).conj().T


# ===== ITERATIVE JOINT SOLVERS =====


@dataclass(frozen=True)
class AdmmConfig:
    """Settings for :func:`jed_admm`.

    Attributes
    ----------
    rho : float
        ADMM penalty parameter, > 0.  The symbol update solves against
        ``H^H H + rho/2 I``; small values approach the plain LS solution,
        large values stick to the running consensus iterate.
    noise_ratio : float
        ``sigma_v_sq / sigma_h_sq``; regularizes every channel update and
        the initialization.
    iterations : int
        Fixed sweep count ``L >= 1``; no early stopping.
    box_radius : float or None
        Projection half-width; ``None`` uses the constellation's
        ``sqrt(beta) - 1`` hull radius.
    """

    rho: float
    noise_ratio: float
    iterations: int
    box_radius: float | None = None

    def __post_init__(self):
        if not self.rho > 0:
            raise ValueError("rho must be > 0")
        if self.noise_ratio < 0:
            raise ValueError("noise_ratio must be >= 0")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.box_radius is not None and not self.box_radius > 0:
            raise ValueError("box_radius must be > 0")


@dataclass(frozen=True)
class IterationState:
    """Full solver state captured after one iteration (diagnostics only)."""

    iteration: int
    x: np.ndarray
    z: np.ndarray
    dual: np.ndarray
    h: np.ndarray


@dataclass(frozen=True)
class IterationRecord:
    """Per-iteration diagnostics of :func:`jed_admm`.

    Attributes
    ----------
    iteration : int
        1-based sweep index.
    primal_residual : float
        ``||X - Z||_F`` after the projection step; the constraint violation
        the dual variable is working against.
    dual_residual : float
        ``||Z - Z_prev||_F``; stalls to 0 as the consensus settles.
    dual_norm : float
        ``||Lambda||_F`` after the dual ascent.
    state : IterationState or None
        Captured only when ``record_states=True``.
    """

    iteration: int
    primal_residual: float
    dual_residual: float
    dual_norm: float
    state: IterationState | None = None


def _split_blocks(y, x_t):
    y = np.asarray(y, dtype=complex)
    x_t = np.asarray(x_t, dtype=complex)
    if y.ndim != 2 or x_t.ndim != 2:
        raise ValueError("Y and X_t must be 2-D")
    t_t = x_t.shape[1]
    if t_t < 1 or y.shape[1] <= t_t:
        raise ValueError(
            f"received block has {y.shape[1]} instants for {t_t} pilots; "
            "need at least one pilot and one data instant"
        )
    return y[:, :t_t], y[:, t_t:], x_t


def jed_admm(
    y: np.ndarray,
    x_t: np.ndarray,
    config: AdmmConfig,
    constellation: Constellation,
    record_states: bool = False,
):
    """Joint channel estimation and detection via scaled-dual ADMM.

    Parameters
    ----------
    y : np.ndarray
        Received block ``N x (T_t + T_d)``; the first ``T_t`` columns are
        the pilot observations.
    x_t : np.ndarray
        Known pilot block ``K x T_t``.
    config : AdmmConfig
    constellation : Constellation
        Target constellation for the final hard decision (and the default
        projection radius).
    record_states : bool
        Capture full per-iteration states in the trace.  Forces the numpy
        backend; meant for diagnostics and tests, not sweeps.

    Returns
    -------
    (x_hat, h_hat, trace)
        Hard decisions ``K x T_d``, final channel estimate ``N x K`` and a
        list of :class:`IterationRecord`.

    Raises
    ------
    NumericalFailure
        If an inner Gram matrix loses positive definiteness; carries the
        1-based iteration index.
    """
    y_t, y_d, x_t = _split_blocks(y, x_t)
    radius = config.box_radius if config.box_radius is not None else constellation.box_radius
    h0 = mmse_channel_init(y_t, x_t, config.noise_ratio)

    states: list[IterationState] = []
    callback = None
    if record_states:
        def callback(it, x, z, lam, h):
            states.append(IterationState(iteration=it, x=x, z=z, dual=lam, h=h))

    x, h, primal, dual, lam_norm = _kernels.admm_iterations(
        y_t, y_d, x_t, h0, config.rho, config.noise_ratio, config.iterations,
        radius, state_callback=callback,
    )
    trace = [
        IterationRecord(
            iteration=i + 1,
            primal_residual=float(primal[i]),
            dual_residual=float(dual[i]),
            dual_norm=float(lam_norm[i]),
            state=states[i] if record_states else None,
        )
        for i in range(config.iterations)
    ]
    return hard_decision(x, constellation), h, trace


def jed_am(
    y: np.ndarray,
    x_t: np.ndarray,
    noise_ratio: float,
    iterations: int,
    constellation: Constellation,
    box_radius: float | None = None,
):
    """Joint channel estimation and detection via alternating minimization.

    Each iteration projects the least-squares symbol solution ``H^+ Y_d``
    onto the constellation box and refits the channel against pilots plus
    the current symbol estimate.  Same interface conventions as
    :func:`jed_admm`; returns ``(x_hat, h_hat)``.
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    if noise_ratio < 0:
        raise ValueError("noise_ratio must be >= 0")
    y_t, y_d, x_t = _split_blocks(y, x_t)
    radius = box_radius if box_radius is not None else constellation.box_radius
    h0 = mmse_channel_init(y_t, x_t, noise_ratio)
    x, h = _kernels.am_iterations(y_t, y_d, x_t, h0, noise_ratio, iterations, radius)
    return hard_decision(x, constellation), h


# ===== PERFECT-CSI BASELINES =====


def zf_detect(h: np.ndarray, y_d: np.ndarray, constellation: Constellation) -> np.ndarray:
    """Zero-forcing detection with known channel: ``hard_decision(H^+ Y_d)``.

    Requires full column rank (so ``N >= K``); raises
    :class:`~jedmimo.errors.NumericalFailure` otherwise.
    """
    h = np.asarray(h, dtype=complex)
    y_d = np.asarray(y_d, dtype=complex)
    g = h.conj().T @ h
    try:
        f = cho_factor(g, lower=True)
    except np.linalg.LinAlgError:
        raise NumericalFailure("channel matrix is column-rank deficient", 1) from None
    return hard_decision(cho_solve(f, h.conj().T @ y_d), constellation)


def mmse_detect(
    h: np.ndarray,
    y_d: np.ndarray,
    noise_var: float,
    energy_per_symbol: float,
    constellation: Constellation,
) -> np.ndarray:
    """LMMSE detection with known channel.

    Solves ``(H^H H + noise_var / E_s I) x = H^H y`` column-wise, then takes
    hard decisions.  With ``noise_var = 0`` this degenerates to ZF.
    """
    h = np.asarray(h, dtype=complex)
    y_d = np.asarray(y_d, dtype=complex)
    if noise_var < 0 or energy_per_symbol <= 0:
        raise ValueError("need noise_var >= 0 and energy_per_symbol > 0")
    k = h.shape[1]
    g = h.conj().T @ h
    g.flat[:: k + 1] += noise_var / energy_per_symbol
    try:
        f = cho_factor(g, lower=True)
    except np.linalg.LinAlgError:
        raise NumericalFailure("regularized channel Gram matrix is singular", 1) from None
    return hard_decision(cho_solve(f, h.conj().T @ y_d), constellation)
