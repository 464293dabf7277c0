"""Randomized invariant suites, runnable from the CLI and the test suite.

Each suite draws its own seeded RNG, checks one structural property over
many random instances, and reports a :class:`SuiteResult`.  These are the
properties the solvers rely on rather than statistical outcomes, so any
single failing case is a bug, not noise.
"""

import os
import tempfile
from dataclasses import dataclass

import numpy as np

from .detectors import AdmmConfig, hard_decision, jed_admm, project_box
from .harness import ExperimentConfig, run_ber_sweep
from .model import make_constellation
from .report import emit_csv
from .unfolded import derealify, realify

DEFAULT_CASES = 1000


@dataclass(frozen=True)
class SuiteResult:
    name: str
    cases: int
    passed: bool
    detail: str = ""


def _complex(rng, rows, cols, scale=2.0):
    return scale * (rng.standard_normal((rows, cols))
                    + 1j * rng.standard_normal((rows, cols)))


def _small_admm(rng, record_states):
    """One random small solver run with recorded per-iteration states."""
    n = int(rng.integers(2, 7))
    k = int(rng.integers(2, n + 1))
    t_d = int(rng.integers(4, 17))
    iters = int(rng.integers(1, 5))
    const = make_constellation(4)
    h = _complex(rng, n, k, scale=np.sqrt(0.5 / k))
    x = np.hstack([_complex(rng, k, k, 1.0),
                   const.points[rng.integers(0, 4, size=(k, t_d))]])
    y = h @ x + 0.1 * _complex(rng, n, k + t_d, 1.0)
    cfg = AdmmConfig(rho=float(rng.uniform(0.05, 2.0)), noise_ratio=0.1,
                     iterations=iters, box_radius=const.box_radius)
    return jed_admm(y, x[:, :k], cfg, const, record_states=record_states)


def check_projection(cases=DEFAULT_CASES, seed=101):
    """project_box is idempotent and nonexpansive in Frobenius norm."""
    rng = np.random.default_rng(seed)
    for i in range(cases):
        rows, cols = int(rng.integers(1, 9)), int(rng.integers(1, 9))
        radius = float(rng.uniform(0.2, 3.0))
        a = _complex(rng, rows, cols)
        b = _complex(rng, rows, cols)
        pa = project_box(a, radius)
        if not np.array_equal(project_box(pa, radius), pa):
            return SuiteResult("projection", cases, False,
                               f"case {i}: projection not idempotent")
        lhs = np.linalg.norm(pa - project_box(b, radius))
        rhs = np.linalg.norm(a - b)
        if lhs > rhs * (1 + 1e-12):
            return SuiteResult("projection", cases, False,
                               f"case {i}: expansive ({lhs} > {rhs})")
    return SuiteResult("projection", cases, True)


def check_hard_decision(cases=DEFAULT_CASES, seed=102):
    """Deciding an already-decided matrix changes nothing."""
    rng = np.random.default_rng(seed)
    const = make_constellation(4)
    for i in range(cases):
        rows, cols = int(rng.integers(1, 9)), int(rng.integers(1, 17))
        once = hard_decision(_complex(rng, rows, cols), const)
        if not np.array_equal(hard_decision(once, const), once):
            return SuiteResult("hard-decision", cases, False,
                               f"case {i}: decision not idempotent")
    return SuiteResult("hard-decision", cases, True)


def check_consensus_in_box(cases=DEFAULT_CASES, seed=103):
    """Every recorded consensus iterate lies inside the relaxation box."""
    rng = np.random.default_rng(seed)
    radius = make_constellation(4).box_radius
    for i in range(cases):
        _, _, trace = _small_admm(rng, record_states=True)
        for rec in trace:
            z = rec.state.z
            if np.abs(z.real).max() > radius or np.abs(z.imag).max() > radius:
                return SuiteResult("consensus-in-box", cases, False,
                                   f"case {i}: iterate {rec.iteration} "
                                   f"escapes the box")
    return SuiteResult("consensus-in-box", cases, True)


def check_dual_accumulation(cases=DEFAULT_CASES, seed=104):
    """The scaled dual equals the running sum of consensus gaps, bitwise."""
    rng = np.random.default_rng(seed)
    for i in range(cases):
        _, _, trace = _small_admm(rng, record_states=True)
        acc = np.zeros_like(trace[0].state.x)
        for rec in trace:
            acc = acc + (rec.state.x - rec.state.z)
            if not np.array_equal(acc, rec.state.dual):
                return SuiteResult("dual-accumulation", cases, False,
                                   f"case {i}: mismatch at iteration "
                                   f"{rec.iteration}")
    return SuiteResult("dual-accumulation", cases, True)


def check_realification(cases=DEFAULT_CASES, seed=105):
    """Real recast is a ring homomorphism and inverts exactly."""
    rng = np.random.default_rng(seed)
    for i in range(cases):
        n, k, t = (int(rng.integers(1, 7)) for _ in range(3))
        a = _complex(rng, n, k)
        b = _complex(rng, k, t)
        if not np.array_equal(derealify(realify(a, "channel"), "channel"), a):
            return SuiteResult("realification", cases, False,
                               f"case {i}: channel round trip broke")
        if not np.array_equal(derealify(realify(b, "signal"), "signal"), b):
            return SuiteResult("realification", cases, False,
                               f"case {i}: signal round trip broke")
        prod = realify(a, "channel") @ realify(b, "signal")
        want = realify(a @ b, "signal")
        if not np.allclose(prod, want, rtol=1e-10, atol=1e-12):
            return SuiteResult("realification", cases, False,
                               f"case {i}: product does not commute "
                               f"with the recast")
    return SuiteResult("realification", cases, True)


def check_parallel_determinism(cases=DEFAULT_CASES, seed=106):
    """Serial and multi-worker sweeps agree trial for trial and byte for byte.

    One sweep of ``cases`` independent trials is run at three worker counts;
    the aggregates and the emitted CSV bytes must match exactly.
    """
    cfg = ExperimentConfig(name="selftest", algorithm="jed_admm", n_rx=4,
                           n_tx=4, t_data=8, snr_grid_db=(12.0,), iterations=3,
                           trials=cases, seed=seed)
    sweeps = [run_ber_sweep(cfg, parallelism=w) for w in (1, 2, 3)]
    keys = [[(p.bit_errors, p.bits_total, p.trials_failed) for p in s.points]
            for s in sweeps]
    if not keys[0] == keys[1] == keys[2]:
        return SuiteResult("parallel-determinism", cases, False,
                           f"aggregates differ across worker counts: {keys}")
    blobs = []
    for s in sweeps:
        fd, path = tempfile.mkstemp(suffix=".csv")
        os.close(fd)
        try:
            emit_csv(s, path)
            with open(path, "rb") as fh:
                blobs.append(fh.read())
        finally:
            os.remove(path)
    if not blobs[0] == blobs[1] == blobs[2]:
        return SuiteResult("parallel-determinism", cases, False,
                           "CSV bytes differ across worker counts")
    return SuiteResult("parallel-determinism", cases, True)


SUITES = (check_projection, check_hard_decision, check_consensus_in_box,
          check_dual_accumulation, check_realification,
          check_parallel_determinism)


def run_all(cases=DEFAULT_CASES):
    """Run every suite; returns the list of SuiteResult records."""
    return [suite(cases=cases) for suite in SUITES]
