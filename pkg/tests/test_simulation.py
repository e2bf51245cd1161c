import dataclasses

import numpy as np
import pytest

from mfac import (
    ConstantReference,
    ControllerConfig,
    CustomPlantSpec,
    Dimensions,
    DivergenceError,
    EstimatorConfig,
    Example1Reference,
    LoopConfig,
    LtiSpec,
    Pjm,
    SimulationTrace,
    compare_controllers,
    compute_metrics,
    run_closed_loop,
)
from helpers import example1_config, scalar_lti_config


class TestLoopConfigValidation:
    def test_horizon_minimum(self):
        with pytest.raises(ValueError):
            example1_config(horizon=3)

    def test_channel_mismatch(self):
        cfg = scalar_lti_config()
        with pytest.raises(ValueError):
            dataclasses.replace(cfg, reference=ConstantReference(values=(1.0, 2.0)))

    def test_rho_count(self):
        with pytest.raises(ValueError):
            dataclasses.replace(example1_config(),
                                controller=ControllerConfig(lam=1.0, rho=(0.5,)))

    def test_phi_init_dims(self):
        cfg = example1_config()
        bad = EstimatorConfig(mu=1.0, eta=0.5,
                              phi_init=Pjm.zeros(Dimensions(2, 1, 2)))
        with pytest.raises(ValueError):
            dataclasses.replace(cfg, estimator=bad)


class TestRunClosedLoop:
    def test_benchmark_row_count_and_steps(self):
        trace = run_closed_loop(example1_config(horizon=200))
        assert trace.first_step == 3
        assert trace.n_steps == 198  # horizon - 2 rows for this plant
        assert trace.steps[0] == 3 and trace.steps[-1] == 200
        trace.check_consistency()

    def test_trace_error_identity_exact(self):
        trace = run_closed_loop(example1_config(horizon=150))
        assert np.array_equal(trace.e, trace.y_ref - trace.y)

    def test_determinism_bitwise(self):
        a = run_closed_loop(example1_config(horizon=300))
        b = run_closed_loop(example1_config(horizon=300))
        for field in ("y", "y_ref", "u", "e", "du", "phi"):
            assert np.array_equal(getattr(a, field), getattr(b, field))

    def test_huge_lambda_freezes_identity_plant(self):
        # matched estimate, lam = 1e12: inputs move by less than 1e-9
        dims = Dimensions(1, 1, 1)
        cfg = LoopConfig(
            dims=dims,
            estimator=EstimatorConfig(mu=1.0, eta=1.0,
                                      phi_init=Pjm(dims, [[0.0, 1.0]])),
            controller=ControllerConfig(lam=1e12, rho=(0.5, 0.5)),
            plant=LtiSpec(a_blocks=(), b_blocks=(((1.0,),),)),
            reference=Example1Reference() if dims.m == 2
            else ConstantReference(values=(2.0,)),
            horizon=200,
            engine="python",
        )
        trace = run_closed_loop(cfg)
        assert np.abs(trace.du).max() <= 1e-9
        assert np.abs(trace.y - trace.y[0]).max() <= 1e-6

    def test_lti_constant_reference_tracks(self):
        trace = run_closed_loop(scalar_lti_config(horizon=600))
        err = np.abs(trace.e[:, 0])
        assert err[trace.steps >= 500].max() <= 1e-6
        assert np.abs(trace.u).max() <= 100
        assert np.abs(trace.y).max() <= 100

    def test_divergence_guard_raises(self):
        # the cross-channel denominator variant escapes in finite time
        with pytest.raises(DivergenceError) as info:
            run_closed_loop(example1_config(horizon=1000, cross=True))
        assert 50 <= info.value.step <= 120

    def test_custom_plant_spec_python_engine(self):
        from mfac.plants import LtiPlant

        spec = CustomPlantSpec(factory=lambda: LtiPlant([], [np.eye(1)]), m=1)
        cfg = dataclasses.replace(scalar_lti_config(horizon=50), plant=spec)
        trace = run_closed_loop(cfg)
        assert trace.n_steps == 49

    def test_explicit_compiled_with_custom_plant_rejected(self):
        pytest.importorskip("mfac._loop")
        from mfac.plants import LtiPlant

        spec = CustomPlantSpec(factory=lambda: LtiPlant([], [np.eye(1)]), m=1)
        cfg = dataclasses.replace(scalar_lti_config(horizon=50), plant=spec)
        with pytest.raises(RuntimeError):
            run_closed_loop(cfg, engine="compiled")


class TestMetrics:
    def synthetic_trace(self, errors):
        errors = np.asarray(errors, dtype=float)
        n, m = errors.shape
        steps = np.arange(1, n + 1)
        zeros = np.zeros((n, m))
        return SimulationTrace(steps=steps, y=-errors, y_ref=zeros, u=zeros,
                               e=errors, du=zeros,
                               phi=np.zeros((n, m, 2 * m)),
                               dims=Dimensions(m, 1, 1), first_step=1, horizon=n)

    def test_zero_error_trace(self):
        m = compute_metrics(self.synthetic_trace(np.zeros((50, 2))))
        np.testing.assert_array_equal(m.sum_sq_error, [0.0, 0.0])

    def test_unit_error_over_100_steps(self):
        m = compute_metrics(self.synthetic_trace(np.ones((100, 1))))
        np.testing.assert_array_equal(m.sum_sq_error, [100.0])

    def test_split_additivity(self):
        trace = run_closed_loop(example1_config(horizon=400))
        full = compute_metrics(trace, (3, 400)).sum_sq_error
        left = compute_metrics(trace, (3, 150)).sum_sq_error
        right = compute_metrics(trace, (151, 400)).sum_sq_error
        np.testing.assert_allclose(left + right, full, rtol=1e-14)

    def test_empty_window_rejected(self):
        trace = run_closed_loop(example1_config(horizon=100))
        with pytest.raises(ValueError):
            compute_metrics(trace, (2000, 3000))


class TestCompareControllers:
    def test_scalar_plant_laws_coincide(self):
        mp, mb, tp, tb = compare_controllers(scalar_lti_config(horizon=400))
        assert np.abs(tp.y - tb.y).max() <= 1e-9
        assert np.abs(tp.u - tb.u).max() <= 1e-9
        np.testing.assert_allclose(mp.sum_sq_error, mb.sum_sq_error,
                                   rtol=1e-9, atol=1e-12)

    def test_inert_controllers_equal(self):
        cfg = example1_config(horizon=300, lam=1e12)
        mp, mb, _, _ = compare_controllers(cfg)
        np.testing.assert_allclose(mp.sum_sq_error, mb.sum_sq_error, rtol=1e-9)

    def test_benchmark_ordering(self):
        mp, mb, _, _ = compare_controllers(example1_config(horizon=1000))
        assert np.all(mp.sum_sq_error < mb.sum_sq_error)
