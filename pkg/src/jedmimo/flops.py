"""Complex-multiplication counts for the iterative detectors.

Counts follow the per-step budget of the algorithms on an ``N x K`` system
with ``T_t`` pilot and ``T_d`` data instants:

* shared initialization (pilot-only MMSE channel estimate):
  ``N K T_t + K^2 T_t + K^2 N + K^3``
* one ADMM iteration (symbol update, box projection, dual update, channel
  update): ``3 K^2 N + K^2 (2 T_d + 2 T_t) + N K (2 T_d + 2 T_t) + 2 K^3``
* one alternating-minimization iteration (its symbol update needs only one
  ``N K T_d`` product): ``3 K^2 N + K^2 (2 T_d + 2 T_t) + N K (T_d + 2 T_t) + 2 K^3``

Each ``K x K`` system solve is charged as a cubic ``K^3`` term, once in the
symbol update and once in the channel update.  Elementwise work (projection,
dual step) is free under this metric.

The unfolded network performs the same matrix work per layer as an ADMM
iteration (the extra elementwise tanh is free under this metric), so it is
charged with the ADMM formulas, one layer = one iteration.
"""

from __future__ import annotations

from dataclasses import dataclass

__all__ = ["FlopsReport", "flops_estimate", "REPORTED_REFERENCE_FLOPS"]

_PER_ITER_ALGOS = ("jed_am", "jed_admm", "jed_u_admm")

# Previously published per-iteration totals.  The 16 x 16 pair sits exactly
# K^3 = 4096 below what the budget above yields: the reported numbers charge
# the K x K solve once overall, while the budget charges it in both the
# symbol and the channel update.  The 64 x 80 value (budget: 15,892,480)
# has no such single-term explanation.  Kept as reference metadata;
# flops_estimate() follows the budget.
REPORTED_REFERENCE_FLOPS = {
    ("jed_admm", 16, 16, 16, 512): 557_056,
    ("jed_am", 16, 16, 16, 512): 425_984,
    ("jed_admm", 64, 80, 80, 512): 14_315_520,
}


@dataclass(frozen=True)
class FlopsReport:
    """Complex-multiplication budget of one detector run.

    Attributes
    ----------
    init_flops : int
        Cost of the pilot-only channel initialization.
    per_iteration_flops : int
        Cost of one iteration (or one unfolded layer).
    iterations : int
        Number of iterations the run performs.
    """

    init_flops: int
    per_iteration_flops: int
    iterations: int

    @property
    def total_flops(self) -> int:
        return self.init_flops + self.iterations * self.per_iteration_flops


def flops_estimate(
    algorithm: str,
    n_rx: int,
    n_tx: int,
    t_pilot: int,
    t_data: int,
    iterations: int,
) -> FlopsReport:
    """Exact integer complex-multiplication count for a detector run.

    Parameters
    ----------
    algorithm : str
        One of ``"jed_am"``, ``"jed_admm"``, ``"jed_u_admm"``.
    n_rx, n_tx : int
        Antenna / user counts (``N``, ``K``).
    t_pilot, t_data : int
        Pilot and data block lengths.
    iterations : int
        Iteration (or layer) count ``L >= 1``.
    """
    if algorithm not in _PER_ITER_ALGOS:
        raise ValueError(f"no flops model for algorithm {algorithm!r}")
    if min(n_rx, n_tx, t_pilot) < 1 or t_data < 0 or iterations < 1:
        raise ValueError("dimensions must be positive (t_data may be 0) and iterations >= 1")

    n, k, tt, td = n_rx, n_tx, t_pilot, t_data
    init = n * k * tt + k * k * tt + k * k * n + k**3
    common = 3 * k * k * n + k * k * (2 * td + 2 * tt) + 2 * k**3
    if algorithm == "jed_am":
        per_iter = common + n * k * (td + 2 * tt)
    else:  # jed_admm and the unfolded network share the per-layer budget
        per_iter = common + n * k * (2 * td + 2 * tt)
    return FlopsReport(init_flops=init, per_iteration_flops=per_iter, iterations=iterations)
