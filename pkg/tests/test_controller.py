import numpy as np
import pytest

from mfac import (
    ControllerConfig,
    Dimensions,
    HistoryWindow,
    Pjm,
    control_increment,
    control_increment_baseline,
    control_increment_proposed,
    gain_matrix,
)


def quiet_history(m, dims):
    hist = HistoryWindow(m, dims.l_y + 2, dims.l_u + 2)
    for _ in range(max(dims.l_y, dims.l_u) + 2):
        hist.push_output(np.zeros(m))
        hist.push_input(np.zeros(m))
    return hist


class TestConfigValidation:
    def test_rho_bounds(self):
        with pytest.raises(ValueError):
            ControllerConfig(lam=1.0, rho=(0.0, 0.5))
        with pytest.raises(ValueError):
            ControllerConfig(lam=1.0, rho=(1.1, 0.5))
        ControllerConfig(lam=1.0, rho=(1.0, 1.0))  # 1 admitted (undamped case)

    def test_lambda_positive(self):
        with pytest.raises(ValueError):
            ControllerConfig(lam=0.0, rho=(0.5,))

    def test_variant_names(self):
        with pytest.raises(ValueError):
            ControllerConfig(lam=1.0, rho=(0.5,), variant="magic")


class TestGainMatrix:
    def test_identity_block(self):
        dims = Dimensions(2, 1, 1)
        phi = Pjm.from_blocks(dims, [np.zeros((2, 2)), np.eye(2)])
        np.testing.assert_allclose(gain_matrix(phi, 1.0), 0.5 * np.eye(2), atol=1e-14)

    def test_zero_block(self):
        dims = Dimensions(2, 1, 1)
        phi = Pjm.zeros(dims)
        np.testing.assert_allclose(gain_matrix(phi, 1.0), np.zeros((2, 2)), atol=0)

    def test_diagonal_hand_solve(self):
        dims = Dimensions(2, 1, 1)
        phi = Pjm.from_blocks(dims, [np.zeros((2, 2)), np.diag([2.0, 4.0])])
        np.testing.assert_allclose(gain_matrix(phi, 1.0),
                                   np.diag([2 / 5, 4 / 17]), atol=1e-14)

    def test_push_through_identity(self):
        # (B^T B + lam I)^{-1} B^T == B^T (B B^T + lam I)^{-1}
        rng = np.random.default_rng(3)
        for m in (1, 2, 4):
            dims = Dimensions(m, 1, 1)
            for lam in (0.1, 1.0, 10.0):
                for _ in range(10):
                    b = rng.standard_normal((m, m))
                    phi = Pjm.from_blocks(dims, [np.zeros((m, m)), b])
                    lhs = gain_matrix(phi, lam)
                    rhs = b.T @ np.linalg.inv(b @ b.T + lam * np.eye(m))
                    np.testing.assert_allclose(lhs, rhs, atol=1e-10)

    def test_gain_norm_vanishes_monotonically_for_large_lam(self):
        # ||G(lam)||_2 = max_k sqrt(s_k)/(lam + s_k); decreasing once lam >= all s_k
        rng = np.random.default_rng(4)
        for _ in range(20):
            m = int(rng.integers(1, 4))
            dims = Dimensions(m, 1, 1)
            b = rng.standard_normal((m, m))
            b /= max(np.linalg.norm(b, 2), 1.0)  # unit-scaled: singular values <= 1
            phi = Pjm.from_blocks(dims, [np.zeros((m, m)), b])
            lam = 1.0
            for _ in range(4):
                g1 = np.linalg.norm(gain_matrix(phi, lam), 2)
                g2 = np.linalg.norm(gain_matrix(phi, 10 * lam), 2)
                assert g2 <= g1 * (1 + 1e-12)
                lam *= 10


class TestProposedLaw:
    def test_zero_bracket_gives_zero(self):
        dims = Dimensions(2, 1, 3)
        cfg = ControllerConfig(lam=1.0, rho=(0.5,) * 4)
        phi = Pjm(dims, np.random.default_rng(5).standard_normal((2, 8)))
        hist = quiet_history(2, dims)
        y = np.array([1.0, -2.0])
        du = control_increment_proposed(phi, hist, y, y, cfg)
        np.testing.assert_allclose(du, np.zeros(2), atol=1e-15)

    def test_scalar_hand_values(self):
        dims = Dimensions(1, 1, 1)
        cfg = ControllerConfig(lam=1.0, rho=(1.0, 1.0))
        phi = Pjm(dims, [[0.5, 1.0]])

        hist = quiet_history(1, dims)
        du = control_increment_proposed(phi, hist, [0.0], [1.0], cfg)
        np.testing.assert_allclose(du, [0.5], atol=1e-14)

        # now with a unit output increment in the window
        hist = HistoryWindow(1, 3, 3)
        hist.push_output([0.0])
        hist.push_input([0.0])
        hist.push_input([0.0])
        hist.push_output([1.0])  # output_delta(0) == 1
        du = control_increment_proposed(phi, hist, [1.0], [2.0], cfg)
        np.testing.assert_allclose(du, [0.25], atol=1e-14)

    def test_huge_lambda_freezes(self):
        dims = Dimensions(2, 1, 2)
        cfg = ControllerConfig(lam=1e12, rho=(0.5, 0.5, 0.5))
        rng = np.random.default_rng(6)
        phi = Pjm(dims, rng.standard_normal((2, 6)))
        hist = quiet_history(2, dims)
        du = control_increment_proposed(phi, hist, [0.0, 0.0], [1.0, -1.0], cfg)
        assert np.linalg.norm(du) <= 1e-9

    def test_bracket_homogeneity(self):
        # doubling the error and every history increment doubles du exactly
        dims = Dimensions(2, 2, 2)
        cfg = ControllerConfig(lam=0.7, rho=(0.9, 0.4, 0.8, 0.3))
        rng = np.random.default_rng(7)
        phi = Pjm(dims, rng.standard_normal((2, 8)))
        ys = rng.standard_normal((4, 2))
        us = rng.standard_normal((4, 2))
        h1 = HistoryWindow(2, 4, 4)
        h2 = HistoryWindow(2, 4, 4)
        for y, u in zip(ys, us):
            h1.push_output(y), h1.push_input(u)
            h2.push_output(2 * y), h2.push_input(2 * u)
        e = rng.standard_normal(2)
        du1 = control_increment_proposed(phi, h1, np.zeros(2), e, cfg)
        du2 = control_increment_proposed(phi, h2, np.zeros(2), 2 * e, cfg)
        np.testing.assert_allclose(du2, 2 * du1, rtol=1e-12, atol=1e-14)


class TestBaselineLaw:
    def test_zero_gain_gives_zero(self):
        dims = Dimensions(2, 1, 1)
        cfg = ControllerConfig(lam=1.0, rho=(0.5, 0.5), variant="baseline")
        phi = Pjm.zeros(dims)
        hist = quiet_history(2, dims)
        du = control_increment_baseline(phi, hist, [0.0, 0.0], [1.0, 1.0], cfg)
        np.testing.assert_array_equal(du, np.zeros(2))

    def test_scalar_equivalence_with_proposed(self):
        # for m = 1 both laws reduce to phi * bracket / (lam + phi^2)
        rng = np.random.default_rng(8)
        dims = Dimensions(1, 1, 2)
        for _ in range(1000):
            cfg = ControllerConfig(lam=float(rng.uniform(0.1, 10)),
                                   rho=tuple(rng.uniform(0.1, 1.0, 3)))
            phi = Pjm(dims, rng.standard_normal((1, 3)))
            hist = HistoryWindow(1, 3, 4)
            for _ in range(3):
                hist.push_output(rng.standard_normal(1))
                hist.push_input(rng.standard_normal(1))
            y, yr = rng.standard_normal(1), rng.standard_normal(1)
            a = control_increment_proposed(phi, hist, y, yr, cfg)
            b = control_increment_baseline(phi, hist, y, yr, cfg)
            np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)

    def test_weak_channel_divergence_from_proposed(self):
        # diag(2, 0.1) gain: the scalar denominator suppresses the weak channel
        dims = Dimensions(2, 1, 1)
        cfg = ControllerConfig(lam=1.0, rho=(1.0, 1.0), variant="baseline")
        phi = Pjm.from_blocks(dims, [np.zeros((2, 2)), np.diag([2.0, 0.1])])
        hist = quiet_history(2, dims)
        target = np.ones(2)
        base = control_increment_baseline(phi, hist, np.zeros(2), target, cfg)
        prop = control_increment_proposed(phi, hist, np.zeros(2), target, cfg)
        np.testing.assert_allclose(base, [2 / 5, 0.1 / 5], atol=1e-14)
        np.testing.assert_allclose(prop, [2 / 5, 0.1 / 1.01], atol=1e-14)

    def test_frobenius_option(self):
        dims = Dimensions(2, 1, 1)
        cfg = ControllerConfig(lam=1.0, rho=(1.0, 1.0), variant="baseline",
                               baseline_norm="frobenius")
        phi = Pjm.from_blocks(dims, [np.zeros((2, 2)), np.diag([2.0, 0.1])])
        hist = quiet_history(2, dims)
        du = control_increment_baseline(phi, hist, np.zeros(2), np.ones(2), cfg)
        denom = 1.0 + 4.0 + 0.01
        np.testing.assert_allclose(du, [2 / denom, 0.1 / denom], atol=1e-14)


class TestDispatch:
    def test_variant_dispatch(self):
        dims = Dimensions(2, 1, 1)
        rng = np.random.default_rng(9)
        phi = Pjm(dims, rng.standard_normal((2, 4)))
        hist = quiet_history(2, dims)
        y, yr = rng.standard_normal(2), rng.standard_normal(2)
        cfg_p = ControllerConfig(lam=1.0, rho=(0.5, 0.5), variant="proposed")
        cfg_b = ControllerConfig(lam=1.0, rho=(0.5, 0.5), variant="baseline")
        np.testing.assert_array_equal(
            control_increment(phi, hist, y, yr, cfg_p),
            control_increment_proposed(phi, hist, y, yr, cfg_p))
        np.testing.assert_array_equal(
            control_increment(phi, hist, y, yr, cfg_b),
            control_increment_baseline(phi, hist, y, yr, cfg_b))

    def test_rho_count_checked(self):
        dims = Dimensions(2, 1, 3)
        cfg = ControllerConfig(lam=1.0, rho=(0.5, 0.5))
        phi = Pjm.zeros(dims)
        hist = quiet_history(2, dims)
        with pytest.raises(ValueError):
            control_increment(phi, hist, np.zeros(2), np.zeros(2), cfg)
