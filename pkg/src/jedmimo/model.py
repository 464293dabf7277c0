"""System model for the block-fading MIMO uplink.

Everything downstream works on the linear model ``Y = H X + V`` where

* ``H`` is the ``N x K`` channel matrix (``N`` receive antennas, ``K``
  single-antenna users),
* ``X`` is the ``K x T`` transmit block, split column-wise into a pilot
  part ``X_t`` (``T_t`` columns, known at the receiver) and a data part
  ``X_d`` (``T_d`` columns, drawn from a square QAM constellation),
* ``V`` is circularly-symmetric complex Gaussian noise with per-entry
  variance ``sigma_v_sq`` (i.e. real and imaginary parts each carry
  ``sigma_v_sq / 2``).

This module provides the constellation object, channel generators (i.i.d.
Rayleigh and receive-correlated Kronecker), pilot constructions, data
generation and the noisy transmit step.  All randomness flows through a
caller-supplied :class:`numpy.random.Generator` so trials are reproducible
and can be parallelized with independent per-trial streams.

Conventions
-----------
* SNR is per receive antenna: ``snr = E_s / sigma_v_sq`` with ``E_s`` the
  mean constellation symbol energy.
* Channel columns are normalized via ``sigma_h_sq``; the Monte-Carlo
  harness defaults to ``sigma_h_sq = 1 / K`` so the per-antenna receive
  signal power is ``E_s`` regardless of the user count.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.linalg import dft, toeplitz

__all__ = [
    "Constellation",
    "make_constellation",
    "ChannelSpec",
    "gen_iid_rayleigh",
    "gen_kronecker",
    "exp_correlation_matrix",
    "psd_factor",
    "gen_dft_pilots",
    "gen_one_hot_pilots",
    "gen_data",
    "snr_to_noise_var",
    "transmit",
]


# ===== CONSTELLATION =====


@dataclass(frozen=True)
class Constellation:
    """Square QAM constellation of order ``beta``.

    Attributes
    ----------
    beta : int
        Constellation order; a perfect square >= 4.
    points : np.ndarray
        All ``beta`` constellation points, sorted by (real, imag).  Real and
        imaginary parts each range over the odd integers
        ``{-(sqrt(beta)-1), ..., sqrt(beta)-1}``.
    energy_per_symbol : float
        Mean symbol energy ``E_s = 2 (beta - 1) / 3``.
    box_radius : float
        Half-width ``sqrt(beta) - 1`` of the smallest axis-aligned box
        containing the constellation (its convex hull).
    """

    beta: int
    points: np.ndarray
    energy_per_symbol: float
    box_radius: float


def make_constellation(beta: int) -> Constellation:
    """Build the square QAM constellation of order ``beta``.

    Parameters
    ----------
    beta : int
        Modulation order.  Must be a perfect square >= 4 (4 -> QPSK,
        16 -> 16-QAM, ...).

    Returns
    -------
    Constellation

    Raises
    ------
    ValueError
        If ``beta`` is not a perfect square >= 4.
    """
    if beta < 4 or int(round(beta**0.5)) ** 2 != beta:
        raise ValueError(f"modulation order must be a perfect square >= 4, got {beta}")
    m = int(round(beta**0.5))
    levels = np.arange(-(m - 1), m, 2, dtype=float)
    re, im = np.meshgrid(levels, levels, indexing="ij")
    points = (re + 1j * im).ravel()  # already sorted by (real, imag)
    points.flags.writeable = False
    energy = 2.0 * (beta - 1) / 3.0  # mean squared modulus of the grid
    return Constellation(
        beta=beta,
        points=points,
        energy_per_symbol=energy,
        box_radius=float(m - 1),
    )


def gen_data(n_tx: int, t_data: int, constellation: Constellation, rng: np.random.Generator) -> np.ndarray:
    """Draw a ``n_tx x t_data`` block of uniform i.i.d. constellation symbols."""
    if n_tx < 1 or t_data < 0:
        raise ValueError("need n_tx >= 1 and t_data >= 0")
    idx = rng.integers(0, constellation.beta, size=(n_tx, t_data))
    return constellation.points[idx]


# ===== CHANNELS =====


@dataclass(frozen=True)
class ChannelSpec:
    """Channel distribution description.

    Attributes
    ----------
    n_rx, n_tx : int
        Receive antennas and single-antenna users.
    kind : str
        ``"iid_rayleigh"`` or ``"kronecker"`` (receive-side exponential
        correlation, i.i.d. across users).
    sigma_h_sq : float
        Per-entry channel variance (before receive correlation).
    rho_c : float
        Exponential correlation coefficient for ``kind="kronecker"``;
        ignored for i.i.d. Rayleigh.  ``0 <= rho_c < 1``.
    """

    n_rx: int
    n_tx: int
    kind: str = "iid_rayleigh"
    sigma_h_sq: float = 1.0
    rho_c: float = 0.0

    def __post_init__(self):
        if self.n_rx < 1 or self.n_tx < 1:
            raise ValueError("antenna counts must be positive")
        if self.kind not in ("iid_rayleigh", "kronecker"):
            raise ValueError(f"unknown channel kind {self.kind!r}")
        if self.sigma_h_sq < 0:
            raise ValueError("sigma_h_sq must be >= 0")
        if not 0.0 <= self.rho_c < 1.0:
            raise ValueError(f"correlation coefficient must lie in [0, 1), got {self.rho_c}")


def gen_iid_rayleigh(spec: ChannelSpec, rng: np.random.Generator) -> np.ndarray:
    """Draw ``H`` with i.i.d. CN(0, sigma_h_sq) entries."""
    scale = np.sqrt(spec.sigma_h_sq / 2.0)
    shape = (spec.n_rx, spec.n_tx)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def exp_correlation_matrix(n: int, rho_c: float) -> np.ndarray:
    """Exponential correlation matrix with entries ``rho_c ** |i - j|``.

    Symmetric Toeplitz and positive definite for ``0 <= rho_c < 1``.
    """
    if n < 1:
        raise ValueError("matrix order must be positive")
    if not 0.0 <= rho_c < 1.0:
        raise ValueError(f"correlation coefficient must lie in [0, 1), got {rho_c}")
    col = rho_c ** np.arange(n, dtype=float)
    return toeplitz(col)


def psd_factor(r: np.ndarray) -> np.ndarray:
    """Hermitian square root ``F`` of a Hermitian PSD matrix, ``F F^H = R``.

    Uses the eigendecomposition so positive semidefinite inputs (zero
    eigenvalues) are handled; tiny negative eigenvalues from roundoff are
    clipped to zero.

    Raises
    ------
    ValueError
        If ``r`` is not square/Hermitian or has a clearly negative
        eigenvalue.
    """
    r = np.asarray(r)
    if r.ndim != 2 or r.shape[0] != r.shape[1]:
        raise ValueError("expected a square matrix")
    if not np.allclose(r, r.conj().T, rtol=1e-10, atol=1e-12):
        raise ValueError("matrix is not Hermitian")
    w, v = np.linalg.eigh(r)
    tol = -1e-10 * max(1.0, float(np.abs(w).max()))
    if w.min() < tol:
        raise ValueError(f"matrix is not positive semidefinite (min eigenvalue {w.min():.3e})")
    root = (v * np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T
    if np.isrealobj(r):
        root = root.real
    return root


@lru_cache(maxsize=32)
def _corr_factor(n: int, rho_c: float) -> np.ndarray:
    # Cached across trials: the factor depends only on (n, rho_c).
    f = psd_factor(exp_correlation_matrix(n, rho_c))
    f.flags.writeable = False
    return f


def gen_kronecker(spec: ChannelSpec, rng: np.random.Generator) -> np.ndarray:
    """Draw ``H = R_r^{1/2} H_w`` with receive-side exponential correlation.

    ``H_w`` has i.i.d. CN(0, sigma_h_sq) entries, so column covariance is
    ``sigma_h_sq * R_r``.  The transmit side stays uncorrelated (users do
    not cooperate).
    """
    h_w = gen_iid_rayleigh(spec, rng)
    return _corr_factor(spec.n_rx, spec.rho_c) @ h_w


# ===== PILOTS =====


def gen_dft_pilots(n_tx: int, t_pilot: int, amplitude: float) -> np.ndarray:
    """First ``n_tx`` rows of the ``t_pilot``-point DFT matrix, scaled.

    Rows are orthogonal, so ``X_t X_t^H = amplitude^2 * t_pilot * I``;
    every entry has magnitude ``amplitude``.

    Raises
    ------
    ValueError
        If ``t_pilot < n_tx`` (rows would repeat and the pilot Gram matrix
        would lose rank).
    """
    if t_pilot < n_tx:
        raise ValueError(f"need t_pilot >= n_tx for orthogonal pilot rows, got {t_pilot} < {n_tx}")
    if amplitude <= 0:
        raise ValueError("pilot amplitude must be positive")
    return amplitude * dft(t_pilot)[:n_tx]


def gen_one_hot_pilots(n_tx: int, t_pilot: int, amplitude: float) -> np.ndarray:
    """Time-orthogonal pilots: user ``t mod n_tx`` sounds at pilot instant ``t``."""
    if t_pilot < n_tx:
        raise ValueError(f"need t_pilot >= n_tx so every user gets a pilot slot, got {t_pilot} < {n_tx}")
    if amplitude <= 0:
        raise ValueError("pilot amplitude must be positive")
    x = np.zeros((n_tx, t_pilot), dtype=complex)
    x[np.arange(t_pilot) % n_tx, np.arange(t_pilot)] = amplitude
    return x


# ===== NOISE / TRANSMIT =====


def snr_to_noise_var(snr_db: float, energy_per_symbol: float) -> float:
    """Per-entry noise variance for a per-receive-antenna SNR in dB."""
    if energy_per_symbol <= 0:
        raise ValueError("energy_per_symbol must be positive")
    return energy_per_symbol / 10.0 ** (snr_db / 10.0)


def transmit(h: np.ndarray, x: np.ndarray, noise_var: float, rng: np.random.Generator) -> np.ndarray:
    """Push ``x`` through the channel: ``Y = H X + V``.

    ``V`` is circularly-symmetric complex Gaussian with per-entry variance
    ``noise_var``.  With ``noise_var = 0`` the product is returned exactly
    and no random numbers are consumed.
    """
    h = np.asarray(h)
    x = np.asarray(x)
    if h.ndim != 2 or x.ndim != 2 or h.shape[1] != x.shape[0]:
        raise ValueError(f"shape mismatch: H is {h.shape}, X is {x.shape}")
    if noise_var < 0:
        raise ValueError("noise variance must be >= 0")
    y = h @ x
    if noise_var > 0:
        scale = np.sqrt(noise_var / 2.0)
        y = y + scale * (rng.standard_normal(y.shape) + 1j * rng.standard_normal(y.shape))
    return y
