"""Randomized soundness trials for the first-derivative integral bounds.

Each trial draws a quadratic phase with a certified first-derivative
floor on an interval, a bump amplitude supported strictly inside it, and
a frequency in [1, 1e3]; the measured integral must stay below both
closed-form bounds (the curvature-capped one and the convexity one).
These are proved inequalities, so the trials tolerate zero violations
beyond quadrature error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .hypotheses import bump, bump_d1
from .oscquad import integrate_1d, vdc_bound_i, vdc_bound_ii

# interior max of |bump'|, measured once on a dense grid with headroom
_BUMP_D1_SUP = float(np.max(np.abs(bump_d1(np.linspace(-1, 1, 200001))))) * (1 + 1e-9)


@dataclass(frozen=True)
class VdcTrial:
    tau: float
    c1: float
    c2: float
    measured: float
    bound_first: float
    bound_second: float
    quad_err: float

    @property
    def ok(self) -> bool:
        slack = self.quad_err + 1e-14
        return (self.measured <= self.bound_first + slack
                and self.measured <= self.bound_second + slack)


def _draw_phase(rng: np.random.Generator):
    """Quadratic with |f'| >= c1 > 0 and f'' nonzero on a random interval."""
    while True:
        a = rng.uniform(-1.5, -0.2)
        b = rng.uniform(0.2, 1.5)
        alpha = rng.uniform(0.5, 3.0) * rng.choice([-1.0, 1.0])
        beta = rng.uniform(-3.0, 3.0)
        da = 2 * alpha * a + beta
        db = 2 * alpha * b + beta
        if da * db > 0 and min(abs(da), abs(db)) > 0.05:
            return a, b, alpha, beta, min(abs(da), abs(db)), 2 * abs(alpha)


def run_trial(rng: np.random.Generator) -> VdcTrial:
    a, b, alpha, beta, c1, c2 = _draw_phase(rng)
    kappa = 0.1 * (b - a)
    center = 0.5 * (a + b)
    half = 0.5 * (b - a) - kappa
    tau = float(np.exp(rng.uniform(0.0, math.log(1e3))))
    psi_deriv_max = _BUMP_D1_SUP / half

    def f(s):
        ph = tau * (alpha * s * s + beta * s)
        return bump((s - center) / half) * np.exp(1j * ph)

    cycles = tau * max(abs(2 * alpha * a + beta), abs(2 * alpha * b + beta)) \
        * (b - a) / (2 * math.pi)
    res = integrate_1d(f, a, b, tol=1e-11,
                       initial_panels=max(8, int(4 * cycles) + 1))
    measured = abs(res.value)
    return VdcTrial(
        tau=tau, c1=c1, c2=c2, measured=measured,
        bound_first=vdc_bound_i((a, b, kappa), c1, c2, psi_deriv_max, tau),
        bound_second=vdc_bound_ii((a, b, kappa), c1, psi_deriv_max, tau),
        quad_err=res.abs_error_estimate,
    )


def run_trials(trials: int, seed: int = 0) -> list:
    rng = np.random.default_rng(seed)
    return [run_trial(rng) for _ in range(trials)]
