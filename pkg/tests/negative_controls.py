"""Models declared with constants they do not satisfy, one per checker."""
from dataclasses import replace

import numpy as np

from mvchaos.model import CoefficientModel, Dissipation, GrowthMeta, Lyapunov, PolySpec, example61, linear_mean_field


def _with_growth(model, **changes):
    return replace(model, growth=replace(model.growth, **changes))


def monotonicity_small_L():
    return _with_growth(example61(), L_of_R=PolySpec.of((0.01, 0.0)))


def cubic_drift_declared_linear():
    g = GrowthMeta(L2=1.0, l1=1.0, l2=1.0)
    return CoefficientModel("cubic", lambda x, mu: -x**3, lambda x, mu: np.ones(x.shape + (1,)), growth=g)


def cubic_diffusion_declared_linear():
    g = GrowthMeta(L2=1.0, l1=1.0, l2=1.0)
    return CoefficientModel("cubic_noise", lambda x, mu: -x, lambda x, mu: (x**3)[..., None], growth=g)


def steep_measure_diffusion():
    g = GrowthMeta(L2=1.0)
    return CoefficientModel("steep", lambda x, mu: -x,
                            lambda x, mu: np.broadcast_to(5.0 * mu.mean()[..., None, :, None], x.shape + (1,)).copy(),
                            growth=g)


def coercivity_too_tight():
    return _with_growth(example61(), coercivity_bound=(0.5, 0.0, 0.5))


def drift_growth_too_low():
    return _with_growth(example61(), l3=1.0)


def diffusion_growth_too_low():
    return _with_growth(example61(), L4=1.0, l4=1.0)


def lyapunov_rates_too_small():
    m = example61()
    return replace(m, lyapunov=replace(m.lyapunov, alpha=0.01, beta=0.01))


def lyapunov_degree_too_low():
    m = example61()
    return replace(m, lyapunov=Lyapunov(PolySpec.of((1.0, 0.0)), m.lyapunov.f_bar, 2.0, 1.0))


def example61_declared_dissipative():
    return _with_growth(example61(), dissipation=Dissipation(L5=1.0, L6=0.5))


def linear_with_bad_dissipative_monotonicity():
    return _with_growth(linear_mean_field(), h_of_R=PolySpec.of((100.0, 2.0)), g_of_R=PolySpec.of((1.0, 1.0)))
