"""End-to-end guarantees: cost formulas, solver equivalences, gradient
correctness, exact recovery, invariants and Monte-Carlo behavior.

The Monte-Carlo tests at the bottom run thousands of trials at realistic
geometries and take a few minutes each; everything else is seconds.
"""

import numpy as np

from jedmimo.detectors import AdmmConfig, hard_decision, jed_admm, jed_am
from jedmimo.flops import REPORTED_REFERENCE_FLOPS, flops_estimate
from jedmimo.harness import ExperimentConfig, run_ber_sweep
from jedmimo.model import (
    ChannelSpec,
    gen_data,
    gen_dft_pilots,
    gen_iid_rayleigh,
    make_constellation,
    snr_to_noise_var,
    transmit,
)
from jedmimo.selftest import run_all
from jedmimo.unfolded import (
    UnfoldedParams,
    grad_params,
    infer,
    loss,
    realify,
    u_admm_forward,
)

CONST = make_constellation(4)


def _draw_system(rng, n, k, t_d, snr_db):
    chan = ChannelSpec(n_rx=n, n_tx=k, kind="iid_rayleigh", sigma_h_sq=1.0 / k)
    x_t = gen_dft_pilots(k, k, np.sqrt(CONST.energy_per_symbol))
    x_d = gen_data(k, t_d, CONST, rng)
    h = gen_iid_rayleigh(chan, rng)
    noise_var = snr_to_noise_var(snr_db, CONST.energy_per_symbol)
    y = transmit(h, np.hstack([x_t, x_d]), noise_var, rng)
    return y, x_t, x_d, noise_var / chan.sigma_h_sq


def _reduction_params(layers, rho, noise_ratio):
    """Layer scalars that collapse the network onto the complex solver."""
    return UnfoldedParams(mode="unshared", layers=layers,
                          rho=np.full(layers, rho / 2),
                          theta=np.ones(layers), alpha=np.ones(layers),
                          gamma=np.full(layers, noise_ratio),
                          gamma0=noise_ratio)


def _separated(better, worse):
    """Non-overlapping 3-stderr intervals with `better` strictly below."""
    gap = worse.ber - better.ber
    return gap > 3.0 * np.hypot(better.stderr, worse.stderr)


# ============================================================================
# COST MODEL
# ============================================================================


class TestCostModel:
    def test_flops_formulas_are_exact_integers(self):
        """Multiplication counts match the closed-form budget exactly, and
        the offset against the quoted per-iteration reference numbers is
        exactly K^3 (those quotes drop one K x K x K product)."""
        def init(n, k, tt):
            return n * k * tt + k * k * tt + k * k * n + k ** 3

        def per_iter(algo, n, k, tt, td):
            data = 2 * td if algo in ("jed_admm", "jed_u_admm") else td
            return (3 * k * k * n + k * k * (2 * td + 2 * tt)
                    + n * k * (data + 2 * tt) + 2 * k ** 3)

        geometries = [(16, 16, 16, 512), (32, 16, 16, 512), (64, 80, 80, 512),
                      (4, 4, 4, 32), (8, 4, 4, 64), (12, 10, 30, 100)]
        for n, k, tt, td in geometries:
            for algo in ("jed_am", "jed_admm", "jed_u_admm"):
                for layers in (1, 10, 20):
                    rep = flops_estimate(algo, n, k, tt, td, layers)
                    assert rep.init_flops == init(n, k, tt)
                    assert rep.per_iteration_flops == per_iter(algo, n, k, tt, td)
                    assert rep.total_flops == rep.init_flops + layers * rep.per_iteration_flops

        admm = flops_estimate("jed_admm", 16, 16, 16, 512, 1)
        am = flops_estimate("jed_am", 16, 16, 16, 512, 1)
        assert admm.per_iteration_flops == 561_152
        assert am.per_iteration_flops == 430_080
        reported_admm = REPORTED_REFERENCE_FLOPS[("jed_admm", 16, 16, 16, 512)]
        reported_am = REPORTED_REFERENCE_FLOPS[("jed_am", 16, 16, 16, 512)]
        assert (reported_admm, reported_am) == (557_056, 425_984)
        assert admm.per_iteration_flops - reported_admm == 16 ** 3
        assert am.per_iteration_flops - reported_am == 16 ** 3
        assert REPORTED_REFERENCE_FLOPS[("jed_admm", 64, 80, 80, 512)] == 14_315_520


# ============================================================================
# SOLVER EQUIVALENCE AND CORRECTNESS
# ============================================================================


class TestSolverEquivalence:
    def test_box_mode_network_is_decision_identical_to_admm(self):
        """With the hard projection restored, alpha = 1, gamma at the noise
        ratio and per-layer rho at half the solver penalty, the unfolded
        forward pass decides exactly like the complex solver on 100 random
        square systems of size 4 and 8."""
        rng = np.random.default_rng(202)
        for i in range(100):
            k = 4 if i % 2 == 0 else 8
            layers = int(rng.integers(1, 6))
            rho = float(rng.uniform(0.1, 2.0))
            snr_db = float(rng.uniform(6.0, 14.0))
            y, x_t, _, noise_ratio = _draw_system(rng, k, k, 32, snr_db)
            x_ref, _, _ = jed_admm(
                y, x_t,
                AdmmConfig(rho=rho, noise_ratio=noise_ratio, iterations=layers),
                CONST)
            params = _reduction_params(layers, rho, noise_ratio)
            x_hat, _ = infer(realify(y, "signal"), realify(x_t, "signal"),
                             params, CONST, nonlinearity="box",
                             box_radius=CONST.box_radius)
            assert np.array_equal(x_hat, x_ref), f"instance {i}"


class TestGradients:
    def test_every_trainable_scalar_matches_finite_differences(self):
        """Reverse-mode gradients agree with central differences to 1e-3
        relative (or 1e-6 absolute) for every scalar, over 20 random 4x4
        two-layer instances split across both parameter layouts."""
        rng = np.random.default_rng(303)
        for i in range(20):
            mode = "unshared" if i % 2 == 0 else "shared"
            y, x_t, x_d, noise_ratio = _draw_system(rng, 4, 4, 8, 8.0)
            y_bar = realify(y, "signal")
            xt_bar = realify(x_t, "signal")
            xd_bar = realify(x_d, "signal")
            base = np.full(2, noise_ratio)
            per = 2 if mode == "unshared" else 1
            params = UnfoldedParams(
                mode=mode, layers=2,
                rho=base * rng.uniform(0.7, 1.4, 2),
                theta=np.ones(per) * rng.uniform(0.8, 1.2, per),
                alpha=np.ones(per) * rng.uniform(0.8, 1.2, per),
                gamma=base[:per] * rng.uniform(0.7, 1.4, per),
                gamma0=noise_ratio * float(rng.uniform(0.7, 1.4)))
            grads = grad_params(y_bar, xt_bar, xd_bar, params)

            def loss_of(q):
                x_bar, _, _ = u_admm_forward(y_bar, xt_bar, q)
                return loss(xd_bar, x_bar)

            for name in ("rho", "theta", "alpha", "gamma", "gamma0"):
                values = np.atleast_1d(getattr(params, name))
                for j in range(values.size):
                    v = float(values[j])
                    step = 1e-4 * (abs(v) + 1e-3)
                    fields = {f: getattr(params, f) for f in
                              ("mode", "layers", "rho", "theta", "alpha",
                               "gamma", "gamma0")}

                    def with_value(val):
                        kw = dict(fields)
                        if name == "gamma0":
                            kw["gamma0"] = val
                        else:
                            vec = np.array(kw[name], dtype=float)
                            vec[j] = val
                            kw[name] = vec
                        return UnfoldedParams(**kw)

                    fd = (loss_of(with_value(v + step))
                          - loss_of(with_value(v - step))) / (2 * step)
                    an = float(np.atleast_1d(getattr(grads, name))[j])
                    assert (abs(fd - an) <= 1e-3 * max(abs(fd), abs(an))
                            or abs(fd - an) <= 1e-6), (i, mode, name, j, an, fd)


class TestExactRecovery:
    def test_noiseless_decisions_are_error_free(self):
        """With zero noise, N >= K and orthogonal pilots, all three joint
        detectors recover every transmitted symbol exactly."""
        rng = np.random.default_rng(404)
        for _ in range(10):
            n = int(rng.integers(4, 9))
            k = int(rng.integers(4, n + 1))
            y, x_t, x_d, _ = _draw_system(rng, n, k, 32, float("inf"))

            x_am, _ = jed_am(y, x_t, 0.0, 3, CONST)
            assert np.array_equal(x_am, x_d)

            rho = 1e-3  # vanishing penalty keeps the symbol update unbiased
            x_admm, _, _ = jed_admm(
                y, x_t, AdmmConfig(rho=rho, noise_ratio=0.0, iterations=5), CONST)
            assert np.array_equal(x_admm, x_d)

            params = _reduction_params(5, rho, 0.0)
            x_net, _ = infer(realify(y, "signal"), realify(x_t, "signal"),
                             params, CONST, nonlinearity="box",
                             box_radius=CONST.box_radius)
            assert np.array_equal(x_net, x_d)


# ============================================================================
# INVARIANTS AND CLOSED FORMS
# ============================================================================


class TestInvariants:
    def test_randomized_invariant_suites_pass(self):
        """Projection idempotence/nonexpansiveness, decision idempotence,
        consensus feasibility, dual accumulation, recast homomorphism and
        parallel determinism all hold over 1000 random cases per suite."""
        results = run_all(cases=1000)
        assert len(results) == 6
        for r in results:
            assert r.passed, f"{r.name}: {r.detail}"
            assert r.cases == 1000


class TestClosedFormOracle:
    def test_single_antenna_zf_matches_rayleigh_qpsk_formula(self):
        """A 1x1 perfect-CSI sweep reproduces the closed-form Rayleigh QPSK
        bit error rate P_b = (1 - sqrt(g / (2 + g))) / 2 within 3 stderr at
        0, 5 and 10 dB."""
        cfg = ExperimentConfig(name="oracle-1x1", algorithm="zf", n_rx=1, n_tx=1,
                               snr_grid_db=(0.0, 5.0, 10.0), t_data=1,
                               sigma_h_sq=1.0, trials=20000, seed=0)
        for point in run_ber_sweep(cfg).points:
            g = 10.0 ** (point.snr_db / 10.0)
            p_b = 0.5 * (1.0 - np.sqrt(g / (2.0 + g)))
            assert abs(point.ber - p_b) <= 3.0 * point.stderr, \
                (point.snr_db, point.ber, p_b, point.stderr)


# ============================================================================
# MONTE-CARLO BEHAVIOR AT REALISTIC GEOMETRY
# ============================================================================


class TestMonteCarlo:
    def test_lower_penalty_beats_inflated_penalty_at_32x32(self):
        """At 32x32, 20 iterations and 20 dB, the lower of two previously
        published penalty choices lands in the expected BER window and
        strictly beats the inflated one with non-overlapping 3-stderr
        intervals."""
        # The published operating points quote penalties of 1x and 4x the
        # noise ratio under a symbol update that adds the full penalty to the
        # Gram, (G + rho I).  Our update solves (G + rho/2 I), so the same two
        # operating points correspond to multipliers 2x and 8x here.  (The
        # box-mode reduction above pins the rho_l = rho/2 correspondence.)
        base = dict(algorithm="jed_admm", n_rx=32, n_tx=32, snr_grid_db=(20.0,),
                    iterations=20, trials=2000, seed=3)
        lower = run_ber_sweep(ExperimentConfig(name="pen-2x", rho_scale=2.0,
                                               **base)).points[0]
        inflated = run_ber_sweep(ExperimentConfig(name="pen-8x", rho_scale=8.0,
                                                  **base)).points[0]
        assert 7e-4 <= lower.ber <= 6e-3
        assert _separated(lower, inflated)
        # The ordering must also hold at the multipliers taken literally
        # (1x and 4x): lowering the penalty keeps improving the BER here.
        literal = run_ber_sweep(ExperimentConfig(name="pen-1x", rho_scale=1.0,
                                                 **base)).points[0]
        literal_4x = run_ber_sweep(ExperimentConfig(name="pen-4x",
                                                    rho_scale=4.0,
                                                    **base)).points[0]
        assert _separated(literal, literal_4x)
        assert literal.ber < lower.ber

    def test_ten_admm_sweeps_beat_fifty_am_sweeps_with_fewer_flops(self):
        """At 16x16 and 20 dB, 10 consensus iterations already beat 50
        alternating iterations, while spending at least 70% fewer total
        multiplications."""
        admm = run_ber_sweep(ExperimentConfig(
            name="short-admm", algorithm="jed_admm", n_rx=16, n_tx=16,
            snr_grid_db=(20.0,), iterations=10, rho_scale=4.0,
            trials=2000, seed=3)).points[0]
        am = run_ber_sweep(ExperimentConfig(
            name="long-am", algorithm="jed_am", n_rx=16, n_tx=16,
            snr_grid_db=(20.0,), iterations=50, trials=2000, seed=3)).points[0]
        assert _separated(admm, am)
        reduction = 1.0 - admm.flops.total_flops / am.flops.total_flops
        assert reduction >= 0.70

    def test_admm_dominates_am_when_overloaded(self):
        """With 80 users on 64 antennas at 24 dB, the consensus solver's BER
        is at least 5 times lower than alternating minimization's."""
        base = dict(n_rx=64, n_tx=80, snr_grid_db=(24.0,), iterations=20,
                    trials=2000, seed=3)
        admm = run_ber_sweep(ExperimentConfig(name="over-admm",
                                              algorithm="jed_admm",
                                              rho_scale=1.0, **base)).points[0]
        am = run_ber_sweep(ExperimentConfig(name="over-am", algorithm="jed_am",
                                            **base)).points[0]
        assert 5.0 * admm.ber <= am.ber

    def test_trained_ten_layer_network_reaches_twenty_iteration_admm(self):
        """A shared-parameter 10-layer network trained at 16 dB performs at
        least as well as the 20-iteration solver at the same SNR (within a
        3-stderr allowance)."""
        unfolded = run_ber_sweep(ExperimentConfig(
            name="net-10", algorithm="jed_u_admm", n_rx=16, n_tx=16,
            snr_grid_db=(16.0,), iterations=10, unfolded_mode="shared",
            train_epochs=100, train_lr=0.025, train_batch=32,
            trials=2000, seed=3)).points[0]
        solver = run_ber_sweep(ExperimentConfig(
            name="solver-20", algorithm="jed_admm", n_rx=16, n_tx=16,
            snr_grid_db=(16.0,), iterations=20, rho_scale=1.0,
            trials=2000, seed=3)).points[0]
        allowance = 3.0 * np.hypot(unfolded.stderr, solver.stderr)
        assert unfolded.ber <= solver.ber + allowance
