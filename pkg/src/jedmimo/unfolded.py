"""Unfolded joint estimation/detection network with trainable scalars.

The ADMM solver of :mod:`jedmimo.detectors` is unrolled into ``L`` layers
over a real-valued recast of the system: complex signal matrices become
stacked ``[Re; Im]`` blocks and the channel becomes the ``2N x 2K`` block
matrix ``[[Re, -Im], [Im, Re]]`` (:func:`realify`).  Each layer keeps the
ADMM update structure but exposes four scalars: the symbol-update weight
``rho_l``, a tanh sharpness ``theta_l`` replacing the hard box projection,
a dual step size ``alpha_l`` and a channel-update regularizer ``gamma_l``.
With the projection restored, ``alpha = 1``, ``gamma`` at the noise ratio
and ``rho_l = rho / 2`` the network computes exactly the complex ADMM run
(the factor 2 because the complex solver carries ``rho/2`` where a layer
carries ``rho_l``).

Training tunes the scalars by gradient descent (Adam) on the squared
recovery error of the final layer, with fresh synthetic batches every
epoch.  Gradients come from a hand-written reverse-mode pass over the
layer recurrence; it is validated against central finite differences,
which is the correctness contract.

Gram products in the channel updates are taken over the stacked block
together with its quarter-rotated copy (the underlying complex block times
``j``).  This keeps every update inside the image of the complex model: the
plain ``A A^T`` of a stacked block is a different (and, for ``t_pilot ==
n_tx`` pilots, rank-deficient) operator, and using it would both break the
exact correspondence with the complex solver and cripple the channel
initialization.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import NumericalFailure, ParamsFormatError, TrainingDivergence
from .model import (
    ChannelSpec,
    Constellation,
    gen_data,
    gen_dft_pilots,
    gen_iid_rayleigh,
    gen_kronecker,
    gen_one_hot_pilots,
    make_constellation,
    snr_to_noise_var,
    transmit,
)
from .detectors import hard_decision

__all__ = [
    "THETA_FLOOR",
    "UnfoldedParams",
    "ParamGradients",
    "LayerRecord",
    "TrainConfig",
    "TrainingMeta",
    "AdamState",
    "realify",
    "derealify",
    "make_unfolded_params",
    "u_admm_forward",
    "loss",
    "grad_params",
    "adam_step",
    "train",
    "infer",
    "save_params",
    "load_params",
]

THETA_FLOOR = 1e-6  # |theta| below this is clamped (recorded, not an error)


# ===== REAL RECAST =====


def realify(m: np.ndarray, kind: str) -> np.ndarray:
    """Real-valued recast of a complex matrix.

    ``kind="signal"`` stacks to ``[Re; Im]`` (``2m x n``); ``kind="channel"``
    builds ``[[Re, -Im], [Im, Re]]`` (``2m x 2n``) so that
    ``realify(H, "channel") @ realify(X, "signal") == realify(H X, "signal")``.
    """
    m = np.asarray(m)
    if m.ndim != 2:
        raise ValueError("expected a 2-D matrix")
    re, im = m.real.astype(float), m.imag.astype(float)
    if kind == "signal":
        return np.vstack([re, im])
    if kind == "channel":
        return np.block([[re, -im], [im, re]])
    raise ValueError(f"unknown realification kind {kind!r}")


def derealify(m: np.ndarray, kind: str) -> np.ndarray:
    """Inverse of :func:`realify` (top blocks win; exact on true recasts)."""
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] % 2:
        raise ValueError("expected a 2-D matrix with an even row count")
    half = m.shape[0] // 2
    if kind == "signal":
        return m[:half] + 1j * m[half:]
    if kind == "channel":
        if m.shape[1] % 2:
            raise ValueError("channel recast needs an even column count")
        return m[:half, : m.shape[1] // 2] + 1j * m[half:, : m.shape[1] // 2]
    raise ValueError(f"unknown realification kind {kind!r}")


def _rot(m: np.ndarray) -> np.ndarray:
    # Stacked-real coordinates of (j * complex block): [Re; Im] -> [-Im; Re].
    half = m.shape[-2] // 2
    return np.concatenate([-m[..., half:, :], m[..., :half, :]], axis=-2)


def _rot_adj(m: np.ndarray) -> np.ndarray:
    half = m.shape[-2] // 2
    return np.concatenate([m[..., half:, :], -m[..., :half, :]], axis=-2)


def _stacked_gram(a: np.ndarray) -> np.ndarray:
    # Stacked-real image of (A_c A_c^H): the rotated copy supplies the
    # cross terms that plain A A^T misses.
    at = a.swapaxes(-1, -2)
    ra = _rot(a)
    return a @ at + ra @ ra.swapaxes(-1, -2)


def _stacked_cross(b: np.ndarray, a: np.ndarray) -> np.ndarray:
    # Stacked-real image of (B_c A_c^H).
    return b @ a.swapaxes(-1, -2) + _rot(b) @ _rot(a).swapaxes(-1, -2)


# ===== PARAMETERS =====


def _as_vec(x, name) -> np.ndarray:
    v = np.atleast_1d(np.asarray(x, dtype=float)).copy()
    if v.ndim != 1:
        raise ValueError(f"{name} must be a scalar or 1-D list")
    v.flags.writeable = False
    return v


@dataclass(frozen=True)
class UnfoldedParams:
    """Trainable scalars of the unfolded network.

    Attributes
    ----------
    mode : str
        ``"unshared"``: every layer has its own (rho, theta, alpha, gamma),
        4L trainable scalars.  ``"shared"``: one (theta, alpha, gamma) for
        all layers plus per-layer rho and a trainable gamma0, L+4 scalars.
    layers : int
        Layer count L.
    rho : np.ndarray
        Per-layer symbol-update weights, length L, all > 0.
    theta, alpha, gamma : np.ndarray
        Length L (unshared) or length 1 (shared).
    gamma0 : float
        Regularizer of the initial channel estimate; a trainable scalar in
        shared mode, fixed otherwise.
    """

    mode: str
    layers: int
    rho: np.ndarray
    theta: np.ndarray
    alpha: np.ndarray
    gamma: np.ndarray
    gamma0: float

    def __post_init__(self):
        if self.mode not in ("shared", "unshared"):
            raise ValueError(f"mode must be 'shared' or 'unshared', got {self.mode!r}")
        if self.layers < 1:
            raise ValueError("layers must be >= 1")
        object.__setattr__(self, "rho", _as_vec(self.rho, "rho"))
        per_layer = self.layers if self.mode == "unshared" else 1
        for name in ("theta", "alpha", "gamma"):
            v = _as_vec(getattr(self, name), name)
            if v.size != per_layer:
                raise ValueError(f"{name} must have length {per_layer} in {self.mode} mode, got {v.size}")
            object.__setattr__(self, name, v)
        if self.rho.size != self.layers:
            raise ValueError(f"rho must have length {self.layers}, got {self.rho.size}")
        if not np.all(self.rho > 0):
            raise ValueError("all rho entries must be > 0")
        object.__setattr__(self, "gamma0", float(self.gamma0))

    @property
    def trainable_count(self) -> int:
        """4L in unshared mode, L+4 in shared mode (gamma0 joins the pool)."""
        return 4 * self.layers if self.mode == "unshared" else self.layers + 4

    def layer_values(self, name: str) -> np.ndarray:
        """Per-layer view of a parameter (broadcast when shared)."""
        v = getattr(self, name)
        return v if v.size == self.layers else np.repeat(v, self.layers)


def make_unfolded_params(mode: str, layers: int, noise_ratio: float) -> UnfoldedParams:
    """Solver-like starting point: rho = gamma = gamma0 = noise_ratio, alpha = theta = 1."""
    if noise_ratio <= 0:
        raise ValueError("noise_ratio must be > 0 for the default initialization")
    per_layer = layers if mode == "unshared" else 1
    return UnfoldedParams(
        mode=mode,
        layers=layers,
        rho=np.full(layers, noise_ratio),
        theta=np.ones(per_layer),
        alpha=np.ones(per_layer),
        gamma=np.full(per_layer, noise_ratio),
        gamma0=noise_ratio,
    )


@dataclass(frozen=True)
class ParamGradients:
    """Loss gradients, shaped like the parameter lists they belong to.

    ``gamma0`` is always evaluated; it only counts as trainable in shared
    mode and :func:`train` ignores it otherwise.
    """

    rho: np.ndarray
    theta: np.ndarray
    alpha: np.ndarray
    gamma: np.ndarray
    gamma0: float


@dataclass(frozen=True)
class LayerRecord:
    """Per-layer forward diagnostics."""

    layer: int
    primal_residual: float
    theta_clamped: bool


# ===== FORWARD / BACKWARD =====


def _add_diag(a: np.ndarray, value: float) -> np.ndarray:
    n = a.shape[-1]
    a[..., np.arange(n), np.arange(n)] += value
    return a


def _solve(a: np.ndarray, b: np.ndarray, layer: int, what: str) -> np.ndarray:
    try:
        return np.linalg.solve(a, b)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"{what} is singular: {exc}", layer) from None


class _Tape:
    """Intermediates of one batched forward pass, kept for reverse mode."""

    __slots__ = ("h0", "c0", "layers", "x", "h")

    def __init__(self):
        self.layers = []


def _forward_batch(y_t, y_d, x_t, params: UnfoldedParams, nonlinearity: str,
                   box_radius: float, keep: bool):
    """Batched layer recurrence.

    ``y_t`` is ``(B, 2N, T_t)``, ``y_d`` ``(B, 2N, T_d)``, ``x_t``
    ``(2K, T_t)`` shared across the batch.  Returns ``(x, h, records,
    tape)``; the tape is ``None`` unless ``keep``.
    """
    if nonlinearity not in ("tanh", "box"):
        raise ValueError(f"unknown nonlinearity {nonlinearity!r}")
    rho = params.layer_values("rho")
    theta = params.layer_values("theta")
    alpha = params.layer_values("alpha")
    gamma = params.layer_values("gamma")

    batch, _, t_d = y_d.shape
    k2 = x_t.shape[0]

    g_t = _stacked_gram(x_t)
    p_t = _stacked_cross(y_t, x_t)
    c0 = _add_diag(g_t.copy(), params.gamma0)
    h = _solve(c0, p_t.swapaxes(-1, -2), 0, "pilot Gram matrix").swapaxes(-1, -2)

    tape = _Tape() if keep else None
    if keep:
        tape.h0, tape.c0 = h, c0

    z = np.zeros((batch, k2, t_d))
    lam = np.zeros((batch, k2, t_d))
    records = []
    x = None
    for l in range(params.layers):
        h_prev, z_prev, lam_prev = h, z, lam
        a = _add_diag(h.swapaxes(-1, -2) @ h, rho[l])
        b = h.swapaxes(-1, -2) @ y_d + rho[l] * (z - lam)
        x = _solve(a, b, l + 1, "symbol-update matrix")

        u = x + lam
        clamped = False
        if nonlinearity == "tanh":
            s = abs(theta[l])
            if s < THETA_FLOOR:
                s, clamped = THETA_FLOOR, True
            z = np.tanh(u / s)
        else:
            s = None
            z = np.clip(u, -box_radius, box_radius)
        lam = lam + alpha[l] * (x - z)

        c = _add_diag(g_t + _stacked_gram(x), gamma[l])
        d = p_t + _stacked_cross(y_d, x)
        h = _solve(c, d.swapaxes(-1, -2), l + 1, "channel-update matrix").swapaxes(-1, -2)

        records.append(LayerRecord(
            layer=l + 1,
            primal_residual=float(np.linalg.norm(x - z)),
            theta_clamped=clamped,
        ))
        if keep:
            tape.layers.append({
                "h_prev": h_prev, "z_prev": z_prev, "lam_prev": lam_prev,
                "x": x, "z": z, "a": a, "c": c, "h_out": h, "s": s,
                "clamped": clamped,
            })
    if keep:
        tape.x, tape.h = x, h
    return x, h, records, tape


def _backward_batch(y_d, x_true, params: UnfoldedParams, tape: _Tape):
    """Reverse-mode gradients of sum-over-batch loss w.r.t. every scalar."""
    rho = params.layer_values("rho")
    theta = params.layer_values("theta")
    alpha = params.layer_values("alpha")
    n_l = params.layers

    g_rho = np.zeros(n_l)
    g_theta = np.zeros(n_l)
    g_alpha = np.zeros(n_l)
    g_gamma = np.zeros(n_l)

    g_x_ext = 2.0 * (tape.x - x_true)
    g_z = np.zeros_like(g_x_ext)
    g_lam = np.zeros_like(g_x_ext)
    g_h = np.zeros_like(tape.h)

    def batch_trace(m):
        return float(np.trace(m, axis1=-2, axis2=-1).sum())

    for l in range(n_l - 1, -1, -1):
        t = tape.layers[l]
        x, z = t["x"], t["z"]

        # channel update: H = solve(C, D^T)^T with C symmetric
        g_d = np.linalg.solve(t["c"], g_h.swapaxes(-1, -2)).swapaxes(-1, -2)
        g_c = -(t["h_out"].swapaxes(-1, -2) @ g_d)
        g_gamma[l] += batch_trace(g_c)
        sym = g_c + g_c.swapaxes(-1, -2)
        g_x = sym @ x + _rot_adj(sym @ _rot(x))
        g_x += g_d.swapaxes(-1, -2) @ y_d + _rot_adj(g_d.swapaxes(-1, -2) @ _rot(y_d))
        if l == n_l - 1:
            g_x = g_x + g_x_ext

        # dual ascent: Lam_l = Lam_prev + alpha (X - Z)
        g_alpha[l] += float(np.sum(g_lam * (x - z)))
        g_x += alpha[l] * g_lam
        g_z_total = g_z - alpha[l] * g_lam
        g_lam_prev = g_lam.copy()

        # soft projection: Z = tanh(U / s), U = X + Lam_prev
        u = x + t["lam_prev"]
        s = t["s"]
        one_m_z2 = 1.0 - z * z
        g_u = g_z_total * one_m_z2 / s
        if not t["clamped"] and theta[l] != 0.0:
            g_theta[l] += -float(np.sum(g_z_total * one_m_z2 * u)) / s**2 * np.sign(theta[l])
        g_x += g_u
        g_lam_prev += g_u

        # symbol update: X = solve(A, H_prev^T Y_d + rho (Z_prev - Lam_prev))
        g_b = np.linalg.solve(t["a"], g_x)
        g_a = -(g_b @ x.swapaxes(-1, -2))
        g_rho[l] += batch_trace(g_a) + float(np.sum(g_b * (t["z_prev"] - t["lam_prev"])))
        g_z = rho[l] * g_b
        g_lam_prev -= rho[l] * g_b
        g_h = y_d @ g_b.swapaxes(-1, -2) + t["h_prev"] @ (g_a + g_a.swapaxes(-1, -2))
        g_lam = g_lam_prev

    # initialization: H0 = solve(C0, P_t^T)^T, C0 = Gram(X_t) + gamma0 I
    g_d0 = np.linalg.solve(tape.c0, g_h.swapaxes(-1, -2)).swapaxes(-1, -2)
    g_gamma0 = batch_trace(-(tape.h0.swapaxes(-1, -2) @ g_d0))

    if params.mode == "shared":
        g_theta = np.array([g_theta.sum()])
        g_alpha = np.array([g_alpha.sum()])
        g_gamma = np.array([g_gamma.sum()])
    return ParamGradients(rho=g_rho, theta=g_theta, alpha=g_alpha,
                          gamma=g_gamma, gamma0=g_gamma0)


def _split_bar(y_bar, x_t_bar):
    y_bar = np.asarray(y_bar, dtype=float)
    x_t_bar = np.asarray(x_t_bar, dtype=float)
    if y_bar.ndim != 2 or x_t_bar.ndim != 2:
        raise ValueError("expected 2-D stacked-real matrices")
    if y_bar.shape[0] % 2 or x_t_bar.shape[0] % 2:
        raise ValueError("stacked-real matrices need even row counts")
    t_t = x_t_bar.shape[1]
    if t_t < 1 or y_bar.shape[1] <= t_t:
        raise ValueError("need at least one pilot and one data instant")
    return y_bar[:, :t_t], y_bar[:, t_t:], x_t_bar


def u_admm_forward(
    y_bar: np.ndarray,
    x_t_bar: np.ndarray,
    params: UnfoldedParams,
    nonlinearity: str = "tanh",
    box_radius: float = 1.0,
):
    """Run the layered forward pass on one stacked-real instance.

    Parameters
    ----------
    y_bar : np.ndarray
        Stacked-real received block ``2N x (T_t + T_d)``.
    x_t_bar : np.ndarray
        Stacked-real pilots ``2K x T_t``.
    params : UnfoldedParams
    nonlinearity : str
        ``"tanh"`` (trainable soft projection, the network proper) or
        ``"box"`` (hard projection of half-width ``box_radius``, which
        collapses a layer to one complex-ADMM sweep).
    box_radius : float
        Only used with ``nonlinearity="box"``.

    Returns
    -------
    (x_bar, h_bar, layer_trace)
        Final symbol iterate ``2K x T_d``, channel iterate ``2N x 2K`` and
        a list of :class:`LayerRecord`.
    """
    y_t, y_d, x_t = _split_bar(y_bar, x_t_bar)
    x, h, records, _ = _forward_batch(y_t[None], y_d[None], x_t, params,
                                      nonlinearity, box_radius, keep=False)
    return x[0], h[0], records


def loss(x_true_bar: np.ndarray, x_hat_bar: np.ndarray) -> float:
    """Squared Frobenius recovery error of the final layer output."""
    x_true_bar = np.asarray(x_true_bar, dtype=float)
    x_hat_bar = np.asarray(x_hat_bar, dtype=float)
    if x_true_bar.shape != x_hat_bar.shape:
        raise ValueError(f"shape mismatch: {x_true_bar.shape} vs {x_hat_bar.shape}")
    diff = x_true_bar - x_hat_bar
    return float(np.sum(diff * diff))


def grad_params(
    y_bar: np.ndarray,
    x_t_bar: np.ndarray,
    x_d_true_bar: np.ndarray,
    params: UnfoldedParams,
) -> ParamGradients:
    """Gradient of :func:`loss` w.r.t. every trainable scalar (tanh mode).

    Hand-written reverse mode over the layer recurrence; contract-checked
    against central finite differences.
    """
    y_t, y_d, x_t = _split_bar(y_bar, x_t_bar)
    x_true = np.asarray(x_d_true_bar, dtype=float)
    _, _, _, tape = _forward_batch(y_t[None], y_d[None], x_t, params,
                                   "tanh", 1.0, keep=True)
    return _backward_batch(y_d[None], x_true[None], params, tape)


def infer(
    y_bar: np.ndarray,
    x_t_bar: np.ndarray,
    trained: UnfoldedParams,
    constellation: Constellation,
    nonlinearity: str = "tanh",
    box_radius: float = 1.0,
):
    """Forward pass, de-realify, hard-decide.  Returns ``(x_hat, h_hat)``."""
    x_bar, h_bar, _ = u_admm_forward(y_bar, x_t_bar, trained,
                                     nonlinearity=nonlinearity, box_radius=box_radius)
    x_hat = hard_decision(derealify(x_bar, "signal"), constellation)
    return x_hat, derealify(h_bar, "channel")


# ===== ADAM =====


@dataclass
class AdamState:
    """First/second moment accumulators, one slot per parameter."""

    m: np.ndarray
    v: np.ndarray

    @classmethod
    def zeros(cls, n: int) -> "AdamState":
        return cls(m=np.zeros(n), v=np.zeros(n))


_ADAM_BETA1 = 0.9
_ADAM_BETA2 = 0.999
_ADAM_EPS = 1e-8


def _adam_delta(grads, state: AdamState, learning_rate: float, step_index: int):
    """Bias-corrected Adam increment (to be added to the parameters)."""
    if step_index < 1:
        raise ValueError("step_index is 1-based")
    m = _ADAM_BETA1 * state.m + (1 - _ADAM_BETA1) * grads
    v = _ADAM_BETA2 * state.v + (1 - _ADAM_BETA2) * grads * grads
    m_hat = m / (1 - _ADAM_BETA1**step_index)
    v_hat = v / (1 - _ADAM_BETA2**step_index)
    return -learning_rate * m_hat / (np.sqrt(v_hat) + _ADAM_EPS), AdamState(m=m, v=v)


def adam_step(params, grads, state: AdamState, learning_rate: float, step_index: int):
    """One Adam update on a flat parameter vector.

    beta1 = 0.9, beta2 = 0.999, eps = 1e-8, with bias correction;
    ``step_index`` is 1-based.  Returns ``(params', state')``.
    """
    params = np.asarray(params, dtype=float)
    grads = np.asarray(grads, dtype=float)
    if params.shape != grads.shape or params.ndim != 1:
        raise ValueError("params and grads must be equal-length 1-D vectors")
    delta, new_state = _adam_delta(grads, state, learning_rate, step_index)
    return params + delta, new_state


# ===== TRAINING =====


@dataclass(frozen=True)
class TrainConfig:
    """Training run description.

    Attributes
    ----------
    epochs : int
        Adam steps; one fresh batch per epoch.
    learning_rate : float
    batch_size : int
        Realizations per epoch.
    snr_db : float
        Training (and intended operating) SNR.
    scenario : ExperimentConfig
        System geometry; must expose ``n_rx``, ``n_tx``, ``t_pilot``,
        ``t_data``, ``beta``, ``pilot_scheme``, ``channel_kind``, ``rho_c``,
        ``sigma_h_sq`` (``None`` means ``1 / n_tx``).
    seed : int
        Master seed; fixes the whole parameter trajectory.
    """

    epochs: int
    learning_rate: float
    batch_size: int
    snr_db: float
    scenario: object
    seed: int

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


def _scenario_system(scenario, snr_db: float):
    """Resolve a scenario into (constellation, channel spec, pilots, noise_var)."""
    const = make_constellation(getattr(scenario, "beta", 4))
    sigma_h = getattr(scenario, "sigma_h_sq", None)
    if sigma_h is None:
        sigma_h = 1.0 / scenario.n_tx
    chan = ChannelSpec(
        n_rx=scenario.n_rx,
        n_tx=scenario.n_tx,
        kind=getattr(scenario, "channel_kind", "iid_rayleigh"),
        sigma_h_sq=sigma_h,
        rho_c=getattr(scenario, "rho_c", 0.0),
    )
    amp = np.sqrt(const.energy_per_symbol)
    scheme = getattr(scenario, "pilot_scheme", "dft")
    if scheme == "dft":
        x_t = gen_dft_pilots(scenario.n_tx, scenario.t_pilot, amp)
    elif scheme == "one_hot":
        x_t = gen_one_hot_pilots(scenario.n_tx, scenario.t_pilot, amp)
    else:
        raise ValueError(f"unknown pilot scheme {scheme!r}")
    noise_var = snr_to_noise_var(snr_db, const.energy_per_symbol)
    return const, chan, x_t, noise_var


def _draw_batch(chan: ChannelSpec, x_t, const, noise_var, t_data, batch_size, rng):
    """Fresh (H, X_d, V) realizations, realified and stacked along a batch axis."""
    gen = gen_kronecker if chan.kind == "kronecker" else gen_iid_rayleigh
    y_t_b, y_d_b, x_true_b = [], [], []
    t_t = x_t.shape[1]
    for _ in range(batch_size):
        h = gen(chan, rng)
        x_d = gen_data(chan.n_tx, t_data, const, rng)
        y = transmit(h, np.hstack([x_t, x_d]), noise_var, rng)
        y_bar = realify(y, "signal")
        y_t_b.append(y_bar[:, :t_t])
        y_d_b.append(y_bar[:, t_t:])
        x_true_b.append(realify(x_d, "signal"))
    return np.stack(y_t_b), np.stack(y_d_b), np.stack(x_true_b)


def train(config: TrainConfig, params_init: UnfoldedParams):
    """Tune the scalars with Adam on fresh synthetic batches.

    ``rho`` is trained through its logarithm (multiplicative updates) so the
    symbol-update matrix stays positive definite; the other scalars are
    updated directly.  In unshared mode ``gamma0`` stays fixed at its
    initial value; in shared mode it is the (L+4)-th trainable scalar.

    Returns
    -------
    (trained, loss_history)
        Final frozen :class:`UnfoldedParams` and the per-epoch mean loss.

    Raises
    ------
    TrainingDivergence
        If a mean loss or any gradient turns non-finite; carries the epoch.
    """
    const, chan, x_t, noise_var = _scenario_system(config.scenario, config.snr_db)
    x_t_bar = realify(x_t, "signal")
    t_data = config.scenario.t_data
    rng = np.random.default_rng(np.random.SeedSequence(config.seed))

    p = params_init
    shared = p.mode == "shared"
    state = AdamState.zeros(p.trainable_count)
    history = []

    for epoch in range(1, config.epochs + 1):
        y_t_b, y_d_b, x_true_b = _draw_batch(chan, x_t, const, noise_var,
                                             t_data, config.batch_size, rng)
        try:
            _, _, _, tape = _forward_batch(y_t_b, y_d_b, x_t_bar, p, "tanh", 1.0, keep=True)
        except NumericalFailure as exc:
            raise TrainingDivergence(f"forward pass failed: {exc}", epoch) from None
        diff = tape.x - x_true_b
        mean_loss = float(np.sum(diff * diff)) / config.batch_size
        if not np.isfinite(mean_loss):
            raise TrainingDivergence("mean loss is not finite", epoch)
        history.append(mean_loss)

        g = _backward_batch(y_d_b, x_true_b, p, tape)
        # batch-mean gradients, rho mapped to log space
        vec = [g.rho * p.rho, g.theta, g.alpha, g.gamma]
        if shared:
            vec.append([g.gamma0])
        grad_vec = np.concatenate([np.asarray(v, dtype=float).ravel() for v in vec])
        grad_vec /= config.batch_size
        if not np.all(np.isfinite(grad_vec)):
            raise TrainingDivergence("gradient is not finite", epoch)

        delta, state = _adam_delta(grad_vec, state, config.learning_rate, epoch)
        n_l = p.layers
        per = n_l if p.mode == "unshared" else 1
        rho = p.rho * np.exp(delta[:n_l])
        theta = p.theta + delta[n_l:n_l + per]
        alpha = p.alpha + delta[n_l + per:n_l + 2 * per]
        gamma = p.gamma + delta[n_l + 2 * per:n_l + 3 * per]
        gamma0 = p.gamma0 + delta[-1] if shared else p.gamma0
        p = UnfoldedParams(mode=p.mode, layers=n_l, rho=rho, theta=theta,
                           alpha=alpha, gamma=gamma, gamma0=gamma0)
    return p, history


# ===== PERSISTENCE =====


_PARAMS_FORMAT = "jed-u-admm-params-v1"


@dataclass(frozen=True)
class TrainingMeta:
    """Provenance stored alongside trained parameters."""

    n_rx: int
    n_tx: int
    t_pilot: int
    t_data: int
    channel_kind: str
    rho_c: float
    pilot_scheme: str
    beta: int
    snr_db: float
    seed: int
    epochs: int
    learning_rate: float
    batch_size: int


def save_params(path, params: UnfoldedParams, meta: TrainingMeta) -> None:
    """Write parameters + provenance as self-describing key-value text.

    Floats are serialized with shortest round-trip repr, so a save/load
    cycle is bit-identical.
    """
    def fmt(v):
        if isinstance(v, np.ndarray):
            return ", ".join(repr(float(x)) for x in v)
        if isinstance(v, float):
            return repr(v)
        return str(v)

    lines = [f"format = {_PARAMS_FORMAT}"]
    for key in ("mode", "layers", "rho", "theta", "alpha", "gamma", "gamma0"):
        lines.append(f"{key} = {fmt(getattr(params, key))}")
    for key in ("n_rx", "n_tx", "t_pilot", "t_data", "channel_kind", "rho_c",
                "pilot_scheme", "beta", "snr_db", "seed", "epochs",
                "learning_rate", "batch_size"):
        lines.append(f"{key} = {fmt(getattr(meta, key))}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_params(path):
    """Read a parameter file back.  Returns ``(UnfoldedParams, TrainingMeta)``.

    Raises
    ------
    ParamsFormatError
        Naming the offending line or field on any malformed input.
    """
    fields = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ParamsFormatError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
            key, _, value = line.partition("=")
            fields[key.strip()] = value.strip()

    if fields.get("format") != _PARAMS_FORMAT:
        raise ParamsFormatError(
            f"{path}: missing or unsupported format tag {fields.get('format')!r} "
            f"(expected {_PARAMS_FORMAT!r})"
        )

    def need(key):
        if key not in fields:
            raise ParamsFormatError(f"{path}: missing field {key!r}")
        return fields[key]

    def parse(key, conv):
        raw = need(key)
        try:
            return conv(raw)
        except ValueError:
            raise ParamsFormatError(f"{path}: field {key!r} has malformed value {raw!r}") from None

    def float_list(raw):
        return np.array([float(tok) for tok in raw.split(",")])

    layers = parse("layers", int)
    mode = need("mode")
    try:
        params = UnfoldedParams(
            mode=mode,
            layers=layers,
            rho=parse("rho", float_list),
            theta=parse("theta", float_list),
            alpha=parse("alpha", float_list),
            gamma=parse("gamma", float_list),
            gamma0=parse("gamma0", float),
        )
    except ValueError as exc:
        raise ParamsFormatError(f"{path}: inconsistent parameters: {exc}") from None
    meta = TrainingMeta(
        n_rx=parse("n_rx", int),
        n_tx=parse("n_tx", int),
        t_pilot=parse("t_pilot", int),
        t_data=parse("t_data", int),
        channel_kind=need("channel_kind"),
        rho_c=parse("rho_c", float),
        pilot_scheme=need("pilot_scheme"),
        beta=parse("beta", int),
        snr_db=parse("snr_db", float),
        seed=parse("seed", int),
        epochs=parse("epochs", int),
        learning_rate=parse("learning_rate", float),
        batch_size=parse("batch_size", int),
    )
    return params, meta
