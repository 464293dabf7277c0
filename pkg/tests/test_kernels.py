"""Tests for the iteration kernels: backend parity and selection."""

import os
import subprocess
import sys

import numpy as np
import pytest

from jedmimo import _kernels
from jedmimo._kernels import _iter_np
from jedmimo.detectors import hard_decision
from jedmimo.errors import NumericalFailure
from jedmimo.model import make_constellation

try:
    from jedmimo._kernels import _iter_cy
except ImportError:
    _iter_cy = None

needs_compiled = pytest.mark.skipif(_iter_cy is None,
                                    reason="compiled kernel not built")


def _instance(rng, n, k, t_d):
    h = np.sqrt(0.5 / k) * (rng.standard_normal((n, k))
                            + 1j * rng.standard_normal((n, k)))
    x = rng.choice([-1.0, 1.0], (k, k + t_d)) + 1j * rng.choice([-1.0, 1.0], (k, k + t_d))
    y = h @ x + 0.1 * (rng.standard_normal((n, k + t_d))
                       + 1j * rng.standard_normal((n, k + t_d)))
    h0 = h + 0.05 * (rng.standard_normal((n, k)) + 1j * rng.standard_normal((n, k)))
    return y[:, :k], y[:, k:], x[:, :k], h0


# ============================================================================
# BACKEND PARITY
# ============================================================================


def _agree(a, b, rtol=1e-9, atol=1e-11):
    """Numerically indistinguishable: the backends use the same LAPACK
    solvers but different BLAS kernels for the Grams, so agreement is to
    roundoff, not bitwise."""
    return np.allclose(a, b, rtol=rtol, atol=atol)


@needs_compiled
class TestBackendParity:
    def test_admm_iterations_agree_and_decide_identically(self):
        rng = np.random.default_rng(21)
        const = make_constellation(4)
        for _ in range(25):
            n = int(rng.integers(2, 10))
            k = int(rng.integers(2, 10))
            y_t, y_d, x_t, h0 = _instance(rng, n, k, int(rng.integers(4, 33)))
            args = (y_t, y_d, x_t, h0, float(rng.uniform(0.05, 1.5)), 0.1,
                    int(rng.integers(1, 8)), 1.0)
            x_np, h_np, p_np, d_np, l_np = _iter_np.admm_iterations(*args)
            x_cy, h_cy, p_cy, d_cy, l_cy = _iter_cy.admm_iterations(*args)
            assert _agree(x_np, x_cy) and _agree(h_np, h_cy)
            assert np.array_equal(hard_decision(x_np, const),
                                  hard_decision(x_cy, const))
            assert _agree(p_np, p_cy) and _agree(d_np, d_cy) and _agree(l_np, l_cy)

    def test_am_iterations_agree_and_decide_identically(self):
        rng = np.random.default_rng(22)
        const = make_constellation(4)
        for _ in range(25):
            n = int(rng.integers(2, 10))
            k = int(rng.integers(2, 10))
            y_t, y_d, x_t, h0 = _instance(rng, n, k, int(rng.integers(4, 33)))
            args = (y_t, y_d, x_t, h0, 0.1, int(rng.integers(1, 8)), 1.0)
            x_np, h_np = _iter_np.am_iterations(*args)
            x_cy, h_cy = _iter_cy.am_iterations(*args)
            assert _agree(x_np, x_cy) and _agree(h_np, h_cy)
            assert np.array_equal(hard_decision(x_np, const),
                                  hard_decision(x_cy, const))

    def test_overloaded_parity(self):
        rng = np.random.default_rng(23)
        for _ in range(10):
            k = int(rng.integers(5, 10))
            n = int(rng.integers(2, k))  # fewer antennas than users
            y_t, y_d, x_t, h0 = _instance(rng, n, k, 16)
            a_args = (y_t, y_d, x_t, h0, 0.4, 0.1, 4, 1.0)
            assert _agree(_iter_np.admm_iterations(*a_args)[0],
                          _iter_cy.admm_iterations(*a_args)[0])
            m_args = (y_t, y_d, x_t, h0, 0.1, 4, 1.0)
            assert _agree(_iter_np.am_iterations(*m_args)[0],
                          _iter_cy.am_iterations(*m_args)[0])

    def test_failure_parity(self):
        # both backends must flag the same singular instance at the same sweep
        y_t = np.zeros((4, 4), dtype=complex)
        y_d = np.zeros((4, 8), dtype=complex)
        x_t = np.eye(4, dtype=complex)
        h0 = np.zeros((4, 4), dtype=complex)
        args = (y_t, y_d, x_t, h0, 0.5, 3, 1.0)
        with pytest.raises(NumericalFailure) as np_info:
            _iter_np.am_iterations(*args)
        with pytest.raises(NumericalFailure) as cy_info:
            _iter_cy.am_iterations(*args)
        assert np_info.value.iteration == cy_info.value.iteration == 1


# ============================================================================
# BACKEND SELECTION
# ============================================================================


class TestBackendSelection:
    def test_backend_name_is_exposed(self):
        assert _kernels.BACKEND in ("numpy", "cython")

    def test_env_var_forces_numpy(self):
        code = ("import jedmimo._kernels as k; print(k.BACKEND)")
        env = dict(os.environ, MIMO_JED_BACKEND="numpy")
        out = subprocess.run([sys.executable, "-c", code], env=env,
                             capture_output=True, text=True, check=True)
        assert out.stdout.strip() == "numpy"

    def test_env_var_rejects_unknown_backend(self):
        code = "import jedmimo._kernels"
        env = dict(os.environ, MIMO_JED_BACKEND="fortran")
        out = subprocess.run([sys.executable, "-c", code], env=env,
                             capture_output=True, text=True)
        assert out.returncode != 0
        assert "MIMO_JED_BACKEND" in out.stderr

    def test_state_callback_records_all_iterations(self):
        # callbacks always route through the numpy path, whatever the backend
        rng = np.random.default_rng(24)
        y_t, y_d, x_t, h0 = _instance(rng, 4, 4, 8)
        seen = []
        _kernels.admm_iterations(y_t, y_d, x_t, h0, 0.5, 0.1, 4, 1.0,
                                 state_callback=lambda *s: seen.append(s))
        assert [s[0] for s in seen] == [1, 2, 3, 4]
        x, z, lam, h = seen[-1][1:]
        assert x.shape == (4, 8) and z.shape == (4, 8)
        assert lam.shape == (4, 8) and h.shape == (4, 4)
