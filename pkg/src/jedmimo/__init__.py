"""Joint channel estimation and symbol detection for MIMO uplinks.

The package simulates block-fading uplinks where neither the channel nor
the payload is known at the receiver: pilots give a first channel estimate,
then the solvers alternate between symbol and channel updates.  Three
detectors are provided (an alternating least-squares baseline, a
box-constrained consensus solver, and a trainable unfolded version of the
latter), plus perfect-CSI ZF/MMSE references, a Monte-Carlo BER harness
with canned experiments, a multiplication-count model, and CSV/SVG
reporting.  Hot kernels run on a compiled backend when available; set
``MIMO_JED_BACKEND=numpy|cython|auto`` to pick one explicitly.
"""

from .detectors import (
    AdmmConfig,
    IterationRecord,
    IterationState,
    backend_name,
    hard_decision,
    jed_admm,
    jed_am,
    mmse_channel_init,
    mmse_detect,
    project_box,
    zf_detect,
)
from .errors import ConfigError, NumericalFailure, ParamsFormatError, TrainingDivergence
from .flops import REPORTED_REFERENCE_FLOPS, FlopsReport, flops_estimate
from .harness import (
    ALGORITHMS,
    BerPoint,
    ExperimentConfig,
    PRESET_NAMES,
    SweepResult,
    count_bit_errors,
    parse_config,
    preset,
    run_ber_sweep,
    run_trial,
    train_for_point,
    write_config,
)
from .model import (
    ChannelSpec,
    Constellation,
    exp_correlation_matrix,
    gen_data,
    gen_dft_pilots,
    gen_iid_rayleigh,
    gen_kronecker,
    gen_one_hot_pilots,
    make_constellation,
    psd_factor,
    snr_to_noise_var,
    transmit,
)
from .report import CSV_HEADER, emit_csv, emit_plot, read_csv
from .selftest import SuiteResult, run_all
from .unfolded import (
    AdamState,
    LayerRecord,
    TrainConfig,
    TrainingMeta,
    UnfoldedParams,
    adam_step,
    derealify,
    grad_params,
    infer,
    load_params,
    loss,
    make_unfolded_params,
    realify,
    save_params,
    train,
    u_admm_forward,
)

__version__ = "0.1.0"

__all__ = [
    "AdamState", "AdmmConfig", "ALGORITHMS", "BerPoint", "ChannelSpec",
    "ConfigError", "Constellation", "CSV_HEADER", "ExperimentConfig",
    "FlopsReport", "IterationRecord", "IterationState", "LayerRecord",
    "NumericalFailure", "ParamsFormatError", "PRESET_NAMES",
    "REPORTED_REFERENCE_FLOPS", "SuiteResult", "SweepResult", "TrainConfig",
    "TrainingDivergence", "TrainingMeta", "UnfoldedParams", "adam_step",
    "backend_name", "count_bit_errors", "derealify", "emit_csv", "emit_plot",
    "exp_correlation_matrix", "flops_estimate", "gen_data", "gen_dft_pilots",
    "gen_iid_rayleigh", "gen_kronecker", "gen_one_hot_pilots", "grad_params",
    "hard_decision", "infer", "jed_admm", "jed_am", "load_params", "loss",
    "make_constellation", "make_unfolded_params", "mmse_channel_init",
    "mmse_detect", "parse_config", "preset", "project_box", "psd_factor",
    "read_csv", "realify", "run_all", "run_ber_sweep", "run_trial",
    "save_params", "snr_to_noise_var", "train", "train_for_point", "transmit",
    "u_admm_forward", "write_config", "zf_detect",
]
