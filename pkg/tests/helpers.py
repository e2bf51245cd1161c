"""Shared experiment builders for the test suite."""

import numpy as np

from mfac import (
    Benchmark10Spec,
    ConstantReference,
    ControllerConfig,
    Dimensions,
    EstimatorConfig,
    Example1Reference,
    LoopConfig,
    LtiSpec,
    Pjm,
)


def example1_config(horizon=1000, typo=False, cross=False, variant="proposed",
                    lam=1.0, reset=True, engine="python"):
    """The benchmark experiment with its published parameter set."""
    dims = Dimensions(2, 1, 3)
    init = np.zeros((2, 8))
    init[0, 2] = init[1, 3] = 0.1
    return LoopConfig(
        dims=dims,
        estimator=EstimatorConfig(mu=1.0, eta=0.5, phi_init=Pjm(dims, init),
                                  reset_enabled=reset),
        controller=ControllerConfig(lam=lam, rho=(0.5,) * 4, variant=variant),
        plant=Benchmark10Spec(y2_typo_fix=typo, y2_cross_denominator=cross),
        reference=Example1Reference(),
        horizon=horizon,
        engine=engine,
    )


def scalar_lti_config(horizon=600, lam=1.0, reference=1.0, engine="python",
                      pole=0.5, phi0=(0.0, 0.5)):
    """Single-channel linear oracle plant with a constant set point."""
    dims = Dimensions(1, 1, 1)
    return LoopConfig(
        dims=dims,
        estimator=EstimatorConfig(mu=1.0, eta=1.0, phi_init=Pjm(dims, [list(phi0)])),
        controller=ControllerConfig(lam=lam, rho=(0.5, 0.5)),
        plant=LtiSpec(a_blocks=(((pole,),),), b_blocks=(((1.0,),),)),
        reference=ConstantReference(values=(reference,)),
        horizon=horizon,
        engine=engine,
    )
