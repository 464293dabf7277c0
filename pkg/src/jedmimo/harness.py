"""Monte-Carlo BER engine: experiment configs, trials, sweeps, presets.

A sweep runs ``trials`` independent channel realizations per SNR point,
counts bit errors under the 4-QAM sign mapping (2 bits per symbol: sign of
the real part, sign of the imaginary part), and aggregates them into one
:class:`BerPoint` per SNR.  Trials are embarrassingly parallel; per-trial
seeds are derived from ``(seed, point_index, trial_index)`` and results are
reduced in trial-index order, so output is identical for any worker count.
"""

import dataclasses
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .detectors import AdmmConfig, jed_admm, jed_am, mmse_detect, zf_detect
from .errors import ConfigError, NumericalFailure
from .flops import FlopsReport, flops_estimate
from .model import (
    ChannelSpec,
    gen_data,
    gen_dft_pilots,
    gen_iid_rayleigh,
    gen_kronecker,
    gen_one_hot_pilots,
    make_constellation,
    snr_to_noise_var,
    transmit,
)
from .unfolded import (
    TrainConfig,
    TrainingMeta,
    infer,
    load_params,
    make_unfolded_params,
    realify,
    train,
)

logger = logging.getLogger("jedmimo")

ALGORITHMS = ("jed_am", "jed_admm", "jed_u_admm", "zf", "mmse")
_ITERATIVE = ("jed_am", "jed_admm", "jed_u_admm")

# entropy tag separating the training seed stream from trial seed streams
_TRAIN_TAG = 0x7E41

# a point is flagged when more than this fraction of its trials failed
FAILURE_FLAG_FRACTION = 0.01


@dataclass(frozen=True)
class ExperimentConfig:
    """One sweep: a system geometry plus a detector and its knobs.

    Fields mirror the config-file keys one to one.  ``t_pilot=None`` means
    ``n_tx`` (shortest pilot block that keeps the pilot Gram invertible) and
    ``sigma_h_sq=None`` means ``1 / n_tx``.  For ``jed_admm`` the penalty is
    ``rho_abs`` if given, else ``rho_scale * sigma_v^2 / sigma_h^2`` resolved
    per SNR point.  ``iterations`` is the iteration count for the solvers and
    the layer count for the unfolded network; ``zf`` and ``mmse`` ignore it.
    For ``jed_u_admm`` without ``params_path``, parameters are trained on the
    fly at each SNR point with the ``train_*`` settings.
    """

    name: str
    algorithm: str
    n_rx: int
    n_tx: int
    snr_grid_db: tuple
    t_pilot: int | None = None
    t_data: int = 512
    channel_kind: str = "iid_rayleigh"
    rho_c: float = 0.0
    sigma_h_sq: float | None = None
    pilot_scheme: str = "dft"
    beta: int = 4
    iterations: int = 20
    rho_scale: float = 1.0
    rho_abs: float | None = None
    unfolded_mode: str = "shared"
    params_path: str | None = None
    train_epochs: int = 100
    train_lr: float = 0.025
    train_batch: int = 32
    trials: int = 2000
    seed: int = 0

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"algorithm: unknown {self.algorithm!r}, "
                              f"expected one of {', '.join(ALGORITHMS)}")
        for key in ("n_rx", "n_tx", "t_data", "iterations", "trials"):
            v = getattr(self, key)
            if not isinstance(v, int) or v < 1:
                raise ConfigError(f"{key}: must be a positive integer, got {v!r}")
        if self.t_pilot is None:
            object.__setattr__(self, "t_pilot", self.n_tx)
        if not isinstance(self.t_pilot, int) or self.t_pilot < self.n_tx:
            raise ConfigError(f"t_pilot: must be an integer >= n_tx={self.n_tx}, "
                              f"got {self.t_pilot!r}")
        grid = tuple(float(s) for s in self.snr_grid_db)
        if not grid:
            raise ConfigError("snr_grid_db: must be nonempty")
        object.__setattr__(self, "snr_grid_db", grid)
        if self.channel_kind not in ("iid_rayleigh", "kronecker"):
            raise ConfigError(f"channel_kind: unknown {self.channel_kind!r}")
        if not 0.0 <= self.rho_c < 1.0:
            raise ConfigError(f"rho_c: must be in [0, 1), got {self.rho_c}")
        if self.sigma_h_sq is not None and self.sigma_h_sq <= 0:
            raise ConfigError(f"sigma_h_sq: must be positive, got {self.sigma_h_sq}")
        if self.pilot_scheme not in ("dft", "one_hot"):
            raise ConfigError(f"pilot_scheme: unknown {self.pilot_scheme!r}")
        if self.beta != 4:
            # the bit mapping (sign of Re, sign of Im) is only faithful at 4-QAM
            raise ConfigError(f"beta: bit accounting is defined for 4, got {self.beta}")
        if self.rho_abs is not None and self.rho_abs <= 0:
            raise ConfigError(f"rho_abs: must be positive, got {self.rho_abs}")
        if self.rho_abs is None and self.rho_scale <= 0:
            raise ConfigError(f"rho_scale: must be positive, got {self.rho_scale}")
        if self.unfolded_mode not in ("shared", "unshared"):
            raise ConfigError(f"unfolded_mode: unknown {self.unfolded_mode!r}")
        if self.train_epochs < 1 or self.train_batch < 1:
            raise ConfigError("train_epochs, train_batch: must be >= 1")
        if self.train_lr < 0:
            raise ConfigError(f"train_lr: must be >= 0, got {self.train_lr}")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError(f"seed: must be a non-negative integer, got {self.seed!r}")

    def sigma_h(self):
        return self.sigma_h_sq if self.sigma_h_sq is not None else 1.0 / self.n_tx

    def channel_spec(self):
        return ChannelSpec(n_rx=self.n_rx, n_tx=self.n_tx, kind=self.channel_kind,
                           sigma_h_sq=self.sigma_h(), rho_c=self.rho_c)

    def resolve_rho(self, noise_ratio):
        """Penalty actually used at a point with the given sigma_v^2/sigma_h^2."""
        if self.rho_abs is not None:
            return float(self.rho_abs)
        return float(self.rho_scale * noise_ratio)


@dataclass(frozen=True)
class BerPoint:
    """Aggregated outcome of all trials at one SNR point."""

    snr_db: float
    bit_errors: int
    bits_total: int
    trials_failed: int = 0
    flops: FlopsReport | None = None
    rho: float | None = None

    def __post_init__(self):
        if self.bit_errors < 0 or self.bits_total < 0 or self.trials_failed < 0:
            raise ValueError("counts must be non-negative")
        if self.bit_errors > self.bits_total:
            raise ValueError("bit_errors cannot exceed bits_total")

    @property
    def ber(self):
        if self.bits_total == 0:
            return float("nan")
        return self.bit_errors / self.bits_total

    @property
    def stderr(self):
        if self.bits_total == 0:
            return float("nan")
        p = self.ber
        return float(np.sqrt(p * (1.0 - p) / self.bits_total))


@dataclass
class SweepResult:
    config: ExperimentConfig
    points: list = field(default_factory=list)


def count_bit_errors(x_true, x_hat):
    """Bits differing under the 4-QAM mapping (sign of Re, sign of Im)."""
    errs = int(np.count_nonzero(np.sign(x_true.real) != np.sign(x_hat.real)))
    errs += int(np.count_nonzero(np.sign(x_true.imag) != np.sign(x_hat.imag)))
    return errs


def _pilot_matrix(config, amplitude):
    if config.pilot_scheme == "one_hot":
        return gen_one_hot_pilots(config.n_tx, config.t_pilot, amplitude)
    return gen_dft_pilots(config.n_tx, config.t_pilot, amplitude)


def run_trial(config, snr_db, trial_seed, unfolded_params=None):
    """One channel realization end to end.

    Draws a channel, pilots, data and noise from ``trial_seed``, runs the
    configured detector, and returns ``(bit_errors, bits_sent)`` with
    ``bits_sent = 2 * n_tx * t_data``.  Deterministic given the seed.

    ``unfolded_params`` must be supplied when ``algorithm == "jed_u_admm"``;
    the sweep engine trains or loads them once per SNR point.

    Raises
    ------
    NumericalFailure or numpy.linalg.LinAlgError
        When the detector hits a singular system; the caller decides whether
        to count the trial as failed.
    """
    rng = np.random.default_rng(trial_seed)
    const = make_constellation(config.beta)
    chan = config.channel_spec()
    x_t = _pilot_matrix(config, float(np.sqrt(const.energy_per_symbol)))
    noise_var = snr_to_noise_var(snr_db, const.energy_per_symbol)

    gen = gen_kronecker if chan.kind == "kronecker" else gen_iid_rayleigh
    h = gen(chan, rng)
    x_d = gen_data(config.n_tx, config.t_data, const, rng)
    y = transmit(h, np.hstack([x_t, x_d]), noise_var, rng)

    ratio = noise_var / chan.sigma_h_sq
    algo = config.algorithm
    if algo == "jed_admm":
        acfg = AdmmConfig(rho=config.resolve_rho(ratio), noise_ratio=ratio,
                          iterations=config.iterations, box_radius=const.box_radius)
        x_hat, _, _ = jed_admm(y, x_t, acfg, const)
    elif algo == "jed_am":
        x_hat, _ = jed_am(y, x_t, ratio, config.iterations, const,
                          box_radius=const.box_radius)
    elif algo == "jed_u_admm":
        if unfolded_params is None:
            raise ConfigError("params_path: jed_u_admm needs trained parameters")
        x_hat, _ = infer(realify(y, "signal"), realify(x_t, "signal"),
                         unfolded_params, const, box_radius=const.box_radius)
    elif algo == "zf":
        x_hat = zf_detect(h, y[:, config.t_pilot:], const)
    else:
        x_hat = mmse_detect(h, y[:, config.t_pilot:], noise_var,
                            const.energy_per_symbol, const)
    return count_bit_errors(x_d, x_hat), 2 * config.n_tx * config.t_data


def _sweep_worker(payload):
    """Picklable per-trial wrapper: failures become a counted flag."""
    config, snr_db, entropy, params = payload
    seed = np.random.SeedSequence(entropy)
    try:
        errs, bits = run_trial(config, snr_db, seed, params)
        return errs, bits, 0
    except (NumericalFailure, np.linalg.LinAlgError):
        return 0, 0, 1


def _training_seed(config, point_index):
    ss = np.random.SeedSequence((config.seed, point_index, _TRAIN_TAG))
    return int(ss.generate_state(1)[0])


def train_for_point(config, snr_db, point_index=0):
    """Train unfolded parameters for one SNR point of a config.

    Returns ``(params, meta, loss_history)``.  The training seed is derived
    from ``(config.seed, point_index)`` on a stream disjoint from the trial
    streams, so sweeps stay reproducible end to end.
    """
    noise_var = snr_to_noise_var(snr_db, make_constellation(config.beta).energy_per_symbol)
    init = make_unfolded_params(config.unfolded_mode, config.iterations,
                                noise_var / config.sigma_h())
    seed = _training_seed(config, point_index)
    tc = TrainConfig(epochs=config.train_epochs, learning_rate=config.train_lr,
                     batch_size=config.train_batch, snr_db=float(snr_db),
                     scenario=config, seed=seed)
    params, history = train(tc, init)
    meta = TrainingMeta(n_rx=config.n_rx, n_tx=config.n_tx, t_pilot=config.t_pilot,
                        t_data=config.t_data, channel_kind=config.channel_kind,
                        rho_c=config.rho_c, pilot_scheme=config.pilot_scheme,
                        beta=config.beta, snr_db=float(snr_db), seed=seed,
                        epochs=config.train_epochs, learning_rate=config.train_lr,
                        batch_size=config.train_batch)
    return params, meta, history


def _params_for_point(config, snr_db, point_index):
    if config.params_path is not None:
        params, _ = load_params(config.params_path)
        if params.layers != config.iterations:
            raise ConfigError(f"iterations: config says {config.iterations} but "
                              f"{config.params_path} holds {params.layers} layers")
        return params
    logger.info("training %s at %g dB (point %d)", config.name, snr_db, point_index)
    params, _, _ = train_for_point(config, snr_db, point_index)
    return params


def _resolve_parallelism(parallelism):
    if parallelism is None:
        parallelism = int(os.environ.get("MIMO_JED_THREADS", "1"))
    if parallelism < 1:
        raise ConfigError(f"parallelism: must be >= 1, got {parallelism}")
    return parallelism


def run_ber_sweep(config, parallelism=None):
    """Run all trials over the SNR grid and aggregate per-point BER.

    ``parallelism`` is the worker-process count; ``None`` reads the
    ``MIMO_JED_THREADS`` environment variable (default 1).  Failed trials
    are excluded from the bit counts and reported in ``trials_failed``;
    a sweep never aborts because individual trials failed.
    """
    workers = _resolve_parallelism(parallelism)
    points = []
    for pi, snr_db in enumerate(config.snr_grid_db):
        params = None
        if config.algorithm == "jed_u_admm":
            params = _params_for_point(config, snr_db, pi)
        payloads = [(config, snr_db, (config.seed, pi, ti), params)
                    for ti in range(config.trials)]
        if workers > 1 and config.trials > 1:
            chunk = max(1, config.trials // (8 * workers))
            with ProcessPoolExecutor(max_workers=workers) as pool:
                outcomes = list(pool.map(_sweep_worker, payloads, chunksize=chunk))
        else:
            outcomes = [_sweep_worker(p) for p in payloads]

        errs = bits = failed = 0
        for e, b, f in outcomes:  # trial-index order: deterministic reduction
            errs += e
            bits += b
            failed += f
        if failed > FAILURE_FLAG_FRACTION * config.trials:
            logger.warning("%s @ %g dB: %d/%d trials failed",
                           config.name, snr_db, failed, config.trials)

        flops = None
        rho = None
        if config.algorithm in _ITERATIVE:
            flops = flops_estimate(config.algorithm, config.n_rx, config.n_tx,
                                   config.t_pilot, config.t_data, config.iterations)
        if config.algorithm == "jed_admm":
            noise_var = snr_to_noise_var(
                snr_db, make_constellation(config.beta).energy_per_symbol)
            rho = config.resolve_rho(noise_var / config.sigma_h())
        points.append(BerPoint(snr_db=snr_db, bit_errors=errs, bits_total=bits,
                               trials_failed=failed, flops=flops, rho=rho))
    return SweepResult(config=config, points=points)


# ===== CONFIG FILES =====

_INT_KEYS = ("n_rx", "n_tx", "t_pilot", "t_data", "beta", "iterations",
             "train_epochs", "train_batch", "trials", "seed")
_FLOAT_KEYS = ("rho_c", "sigma_h_sq", "rho_scale", "rho_abs", "train_lr")
_STR_KEYS = ("name", "algorithm", "channel_kind", "pilot_scheme",
             "unfolded_mode", "params_path")
_OPTIONAL_KEYS = ("t_pilot", "sigma_h_sq", "rho_abs", "params_path")


def parse_config(path):
    """Read a ``key = value`` experiment file into an ExperimentConfig.

    One field per line, ``#`` starts a comment, blank lines are skipped.
    ``snr_grid_db`` is a comma-separated list.  Unknown or malformed keys
    raise :class:`ConfigError` naming the field and line.
    """
    fields = {}
    with open(path, "r", encoding="utf-8") as fh:
        for ln, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{ln}: expected key = value, got {line!r}")
            key, _, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if key in fields:
                raise ConfigError(f"{path}:{ln}: duplicate key {key!r}")
            fields[key] = (ln, value)

    kwargs = {}
    for key, (ln, value) in fields.items():
        try:
            if key in _OPTIONAL_KEYS and value.lower() in ("", "none"):
                kwargs[key] = None
            elif key in _INT_KEYS:
                kwargs[key] = int(value)
            elif key in _FLOAT_KEYS:
                kwargs[key] = float(value)
            elif key in _STR_KEYS:
                kwargs[key] = value
            elif key == "snr_grid_db":
                kwargs[key] = tuple(float(v) for v in value.split(",") if v.strip())
            else:
                raise ConfigError(f"{path}:{ln}: unknown field {key!r}")
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"{path}:{ln}: field {key!r}: {exc}") from None
    for required in ("name", "algorithm", "n_rx", "n_tx", "snr_grid_db"):
        if required not in kwargs:
            raise ConfigError(f"{path}: missing required field {required!r}")
    return ExperimentConfig(**kwargs)


def write_config(config, path):
    """Inverse of :func:`parse_config` (handy for recording what ran)."""
    lines = []
    for f in dataclasses.fields(config):
        v = getattr(config, f.name)
        if v is None:
            continue
        if f.name == "snr_grid_db":
            v = ",".join(repr(s) for s in v)
        lines.append(f"{f.name} = {v}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


# ===== PRESET EXPERIMENTS =====

_GRID = (0.0, 4.0, 8.0, 12.0, 16.0, 20.0)
_GRID_OVERLOADED = _GRID + (24.0,)  # 64x80 curves only separate beyond 20 dB
_GRID_SHORT = (0.0, 4.0, 8.0, 12.0, 16.0)

PRESET_NAMES = ("exp1", "exp2", "exp3", "exp4", "exp5", "exp6", "exp7", "exp8")


def _cfg(name, algorithm, n, k, grid, **kw):
    kw.setdefault("trials", 2000)
    return ExperimentConfig(name=name, algorithm=algorithm, n_rx=n, n_tx=k,
                            snr_grid_db=grid, **kw)


def _exp1():
    # penalty sensitivity: rho in {r, 4r} against the alternating baseline
    out = []
    for n, k, l in ((32, 32, 20), (32, 16, 100), (64, 80, 20)):
        grid = _GRID_OVERLOADED if k > n else _GRID
        tag = f"exp1-{n}x{k}"
        out.append(_cfg(f"{tag}-admm-rho1", "jed_admm", n, k, grid,
                        iterations=l, rho_scale=1.0))
        out.append(_cfg(f"{tag}-admm-rho4", "jed_admm", n, k, grid,
                        iterations=l, rho_scale=4.0))
        out.append(_cfg(f"{tag}-am", "jed_am", n, k, grid, iterations=l))
    return out


def _exp2():
    # iteration sweep at fixed rho = 4r
    out = []
    for n in (16, 32):
        for l in (10, 20, 50):
            tag = f"exp2-{n}x{n}"
            out.append(_cfg(f"{tag}-admm-l{l}", "jed_admm", n, n, _GRID,
                            iterations=l, rho_scale=4.0))
            out.append(_cfg(f"{tag}-am-l{l}", "jed_am", n, n, _GRID, iterations=l))
    return out


def _exp3():
    # receiver correlation, Kronecker model, rho = r
    out = []
    for n in (16, 32):
        for rho_c in (0.5, 0.9):
            tag = f"exp3-{n}x{n}-rc{int(10 * rho_c)}"
            out.append(_cfg(f"{tag}-admm", "jed_admm", n, n, _GRID, iterations=20,
                            rho_scale=1.0, channel_kind="kronecker", rho_c=rho_c))
            out.append(_cfg(f"{tag}-am", "jed_am", n, n, _GRID, iterations=20,
                            channel_kind="kronecker", rho_c=rho_c))
    return out


def _exp4():
    # shared (L+4 trainables) vs unshared (4L) at 10 layers
    return [
        _cfg("exp4-16x16-uadmm-shared", "jed_u_admm", 16, 16, _GRID,
             iterations=10, unfolded_mode="shared"),
        _cfg("exp4-16x16-uadmm-unshared", "jed_u_admm", 16, 16, _GRID,
             iterations=10, unfolded_mode="unshared"),
    ]


def _exp5():
    # layer-count sweep, shared parameters
    return [_cfg(f"exp5-16x16-uadmm-l{l}", "jed_u_admm", 16, 16, _GRID,
                 iterations=l) for l in (5, 10, 15, 20)]


def _exp6():
    # unfolding gain over the fixed-penalty solver at N = K
    out = []
    for n in (16, 32):
        tag = f"exp6-{n}x{n}"
        for l in (5, 10):
            out.append(_cfg(f"{tag}-uadmm-l{l}", "jed_u_admm", n, n, _GRID,
                            iterations=l))
        out.append(_cfg(f"{tag}-admm-l20", "jed_admm", n, n, _GRID,
                        iterations=20, rho_scale=1.0))
    return out


def _exp7():
    # standard (N > K) and overloaded (N < K) regimes
    out = []
    for n, k, admm_l in ((32, 16, 100), (64, 80, 20)):
        grid = _GRID_OVERLOADED if k > n else _GRID
        tag = f"exp7-{n}x{k}"
        for l in (5, 10):
            out.append(_cfg(f"{tag}-uadmm-l{l}", "jed_u_admm", n, k, grid,
                            iterations=l))
        out.append(_cfg(f"{tag}-admm-l{admm_l}", "jed_admm", n, k, grid,
                        iterations=admm_l, rho_scale=1.0))
    return out


def _exp8():
    # fixed K = 16, receive-antenna count swept across the load boundary
    return [_cfg(f"exp8-{n}x16-uadmm-l10", "jed_u_admm", n, 16, _GRID_SHORT,
                 iterations=10) for n in (8, 16, 32, 48, 64)]


_PRESETS = {"exp1": _exp1, "exp2": _exp2, "exp3": _exp3, "exp4": _exp4,
            "exp5": _exp5, "exp6": _exp6, "exp7": _exp7, "exp8": _exp8}


def preset(name):
    """Return the configs for one named experiment.

    Every preset uses 4-QAM, DFT pilots with t_pilot = n_tx, t_data = 512
    and 2000 trials per SNR point.
    """
    if name not in _PRESETS:
        raise ConfigError(f"preset: unknown name {name!r}, "
                          f"expected one of {', '.join(PRESET_NAMES)}")
    return _PRESETS[name]()


def override(config, trials=None, seed=None):
    """Copy a config with new trial count and/or seed (CLI overrides)."""
    changes = {}
    if trials is not None:
        changes["trials"] = trials
    if seed is not None:
        changes["seed"] = seed
    return dataclasses.replace(config, **changes) if changes else config
