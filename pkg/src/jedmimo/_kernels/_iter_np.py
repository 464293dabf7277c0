"""Numpy implementation of the per-iteration solver loops.

Reference backend: the compiled Cython kernel mirrors these loops exactly
(same update order, same factorizations), so results agree to floating-point
roundoff and decisions agree exactly in practice.  This module is also the
only backend that can report intermediate iteration states, which the
compiled path does not support.

All inputs must be complex128; the public wrappers in ``detectors`` take
care of validation and dtype coercion.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from ..errors import NumericalFailure

BACKEND_NAME = "numpy"


def _cho(a, iteration, what):
    try:
        return cho_factor(a, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"{what} lost positive definiteness: {exc}", iteration) from None


def _box(x, radius):
    # Orthogonal projection onto the complex box: clip Re and Im separately.
    return np.clip(x.real, -radius, radius) + 1j * np.clip(x.imag, -radius, radius)


def _channel_update(g_t, p_t, y_d, x, noise_ratio, iteration):
    # H = (P_t + Y_d X^H)(G_t + X X^H + r I)^-1, solved via Cholesky of the
    # Hermitian PD Gram matrix (never formed as an explicit inverse).
    a = g_t + x @ x.conj().T
    a.flat[:: a.shape[0] + 1] += noise_ratio
    b = p_t + y_d @ x.conj().T
    f = _cho(a, iteration, "channel-update Gram matrix")
    return cho_solve(f, b.conj().T, check_finite=False).conj().T


def admm_iterations(
    y_t,
    y_d,
    x_t,
    h0,
    rho,
    noise_ratio,
    iterations,
    box_radius,
    state_callback=None,
):
    """Run ``iterations`` scaled-dual ADMM sweeps from the channel guess ``h0``.

    Per iteration: symbol update (regularized LS), box projection, dual
    ascent, channel update.  Returns ``(x, h, primal, dual, lam_norm)``
    where the last three are per-iteration Frobenius norms of ``X - Z``,
    ``Z - Z_prev`` and the dual variable.
    """
    k, t_d = x_t.shape[0], y_d.shape[1]
    g_t = x_t @ x_t.conj().T
    p_t = y_t @ x_t.conj().T
    x = np.zeros((k, t_d), dtype=complex)
    z = np.zeros((k, t_d), dtype=complex)
    lam = np.zeros((k, t_d), dtype=complex)
    h = h0
    half_rho = 0.5 * rho
    primal = np.empty(iterations)
    dual = np.empty(iterations)
    lam_norm = np.empty(iterations)

    for it in range(1, iterations + 1):
        a = h.conj().T @ h
        a.flat[:: k + 1] += half_rho
        rhs = h.conj().T @ y_d + half_rho * (z - lam)
        f = _cho(a, it, "symbol-update Gram matrix")
        x = cho_solve(f, rhs, check_finite=False)

        z_new = _box(x + lam, box_radius)
        resid = x - z_new
        lam = lam + resid

        primal[it - 1] = np.linalg.norm(resid)
        dual[it - 1] = np.linalg.norm(z_new - z)
        lam_norm[it - 1] = np.linalg.norm(lam)
        z = z_new

        h = _channel_update(g_t, p_t, y_d, x, noise_ratio, it)

        if state_callback is not None:
            state_callback(it, x.copy(), z.copy(), lam.copy(), h.copy())

    return x, h, primal, dual, lam_norm


def am_iterations(
    y_t,
    y_d,
    x_t,
    h0,
    noise_ratio,
    iterations,
    box_radius,
    ridge_scale=1e-12,
    state_callback=None,
):
    """Run ``iterations`` alternating-minimization sweeps from ``h0``.

    Per iteration: project the least-squares symbol solution ``H^+ Y_d``
    onto the constellation box, then refresh the channel estimate.  The LS
    solve goes through the Gram matrix of the smaller dimension; a tiny
    ridge ``ridge_scale * trace`` keeps it positive definite when the
    system is underdetermined (K > N) or the estimate loses rank.
    """
    n = y_d.shape[0]
    k = x_t.shape[0]
    g_t = x_t @ x_t.conj().T
    p_t = y_t @ x_t.conj().T
    h = h0

    x = None
    for it in range(1, iterations + 1):
        if n >= k:
            g = h.conj().T @ h
            rhs = h.conj().T @ y_d
            try:
                f = cho_factor(g, lower=True, check_finite=False)
            except np.linalg.LinAlgError:
                # cho_factor left g untouched; retry with a tiny ridge
                g.flat[:: k + 1] += ridge_scale * max(g.flat[:: k + 1].real.sum(), 0.0)
                f = _cho(g, it, "rank-deficient symbol-update Gram matrix")
            x_ls = cho_solve(f, rhs, check_finite=False)
        else:
            # Underdetermined: minimum-norm solution H^H (H H^H)^-1 Y_d.
            g = h @ h.conj().T
            g.flat[:: n + 1] += ridge_scale * max(g.flat[:: n + 1].real.sum(), 0.0)
            f = _cho(g, it, "symbol-update Gram matrix")
            x_ls = h.conj().T @ cho_solve(f, y_d, check_finite=False)

        x = _box(x_ls, box_radius)
        h = _channel_update(g_t, p_t, y_d, x, noise_ratio, it)

        if state_callback is not None:
            state_callback(it, x.copy(), None, None, h.copy())

    return x, h
