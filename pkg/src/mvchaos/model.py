"""Coefficient models b(x, mu), sigma(x, mu) with declared growth constants.

Shape convention: states ``x`` have shape ``batch + (n, d)`` and the measure
``mu`` has batch shape ``batch``; drift returns ``batch + (n, d)`` and
diffusion ``batch + (n, d, m)``. Models only touch the measure through its
functionals (mean, moments, kernel integrals).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .measure import EmpiricalMeasure, NonFiniteValueError


@dataclass(frozen=True)
class PolySpec:
    """f(r) = sum_k coef_k * r ** exp_k on r >= 0; exponents may be fractional."""

    terms: tuple[tuple[float, float], ...]

    @classmethod
    def of(cls, *terms):
        return cls(tuple((float(c), float(e)) for c, e in terms))

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        out = np.zeros_like(r)
        for c, e in self.terms:
            out = out + (c if e == 0 else c * r**e)
        return out

    def derivative(self, r):
        r = np.asarray(r, dtype=float)
        out = np.zeros_like(r)
        for c, e in self.terms:
            if e == 0:
                continue
            out = out + (c if e == 1 else c * e * r ** (e - 1))
        return out

    def second_derivative(self, r):
        r = np.asarray(r, dtype=float)
        out = np.zeros_like(r)
        for c, e in self.terms:
            if e in (0, 1):
                continue
            out = out + (c * e * (e - 1) if e == 2 else c * e * (e - 1) * r ** (e - 2))
        return out

    def derivative_over_r(self, r):
        """f'(r)/r, using the limit at r = 0 where it exists (nan otherwise)."""
        r = np.asarray(r, dtype=float)
        out = np.zeros_like(r)
        safe = np.where(r > 0, r, 1.0)
        for c, e in self.terms:
            if e == 0:
                continue
            if e == 2:
                out = out + 2 * c
            else:
                at_zero = 0.0 if e > 2 else np.nan
                out = out + np.where(r > 0, c * e * safe ** (e - 2), at_zero)
        return out

    @property
    def degree(self):
        live = [e for c, e in self.terms if c != 0]
        return max(live) if live else 0.0

    @property
    def leading_coefficient(self):
        d = self.degree
        return sum(c for c, e in self.terms if e == d)


@dataclass(frozen=True)
class Dissipation:
    """Declared 2<x,b> + (p-1)|sigma|^2 <= -L5 |x|^2 + L6 ||mu||_2^2 with L5 > L6 > 0."""

    L5: float
    L6: float
    p: float = 2.0

    def __post_init__(self):
        if not self.L5 > self.L6 > 0:
            raise ValueError(f"dissipation needs L5 > L6 > 0, got L5={self.L5}, L6={self.L6}")
        if self.p < 2:
            raise ValueError("dissipation exponent p must be >= 2")


@dataclass(frozen=True)
class Lyapunov:
    f: PolySpec
    f_bar: PolySpec
    alpha: float
    beta: float
    kappa: float = 1.0


@dataclass(frozen=True)
class GrowthMeta:
    """Constants and exponents a model claims to satisfy; checked, never trusted."""

    gamma: float = 2.0
    L_of_R: PolySpec = PolySpec.of((1.0, 0.0))
    L1: float = 1.0
    q: float = 2.0
    L2: float = 1.0
    l1: float = 1.0
    l2: float = 1.0
    L3: float = 1.0
    p: float = 2.0
    # (c0, c_x, c_mu): coercivity bound c0 + c_x |x|^2 + c_mu ||mu||_2^2; defaults to L3 * (1, 1, 1)
    coercivity_bound: Optional[tuple[float, float, float]] = None
    L4: float = 1.0
    l3: float = 1.0
    l4: float = 1.0
    dissipation: Optional[Dissipation] = None
    # optional dissipative local monotonicity: -h(R)|x-y|^2 + (g(R) + L1 ...)(...)
    h_of_R: Optional[PolySpec] = None
    g_of_R: Optional[PolySpec] = None

    def __post_init__(self):
        for name in ("l1", "l2", "l3", "l4"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.gamma < 2:
            raise ValueError("gamma must be >= 2")
        for name in ("L1", "L2", "L3", "L4"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    def coercivity_terms(self):
        if self.coercivity_bound is not None:
            return self.coercivity_bound
        return (self.L3, self.L3, self.L3)


@dataclass(frozen=True)
class CoefficientModel:
    name: str
    drift: Callable[[np.ndarray, EmpiricalMeasure], np.ndarray]
    diffusion: Callable[[np.ndarray, EmpiricalMeasure], np.ndarray]
    dim: int = 1
    noise_dim: int = 1
    growth: GrowthMeta = field(default_factory=GrowthMeta)
    lyapunov: Optional[Lyapunov] = None
    params: dict = field(default_factory=dict)
    # True when b and sigma ignore the measure argument entirely
    measure_free: bool = False


def _check(values, what, model, x, mu):
    if not np.all(np.isfinite(values)):
        idx = tuple(np.argwhere(~np.isfinite(values))[0])
        raise NonFiniteValueError(
            f"{model.name}: non-finite {what} at index {idx}; "
            f"x range [{np.min(x):.6g}, {np.max(x):.6g}], measure mean {np.asarray(mu.mean()).ravel()[:4]}"
        )
    return values


def _as_states(x, dim):
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1, 1)
    elif x.ndim == 1:
        x = x.reshape(-1, dim) if dim > 1 else x[:, None]
    return x


def eval_drift(model, x, mu):
    x = _as_states(x, model.dim)
    return _check(np.asarray(model.drift(x, mu), dtype=float), "drift", model, x, mu)


def eval_diffusion(model, x, mu):
    x = _as_states(x, model.dim)
    return _check(np.asarray(model.diffusion(x, mu), dtype=float), "diffusion", model, x, mu)


def _mean_b(mu):
    # measure mean broadcast against states of shape batch + (n, d)
    return mu.mean()[..., None, :]


def example61():
    """dX = (-18 X^5 - X^{1/3} (E X)^4 + 2) dt + (X^2 + E X) dW, with the real cube root."""

    def drift(x, mu):
        m = _mean_b(mu)
        return -18.0 * x**5 - np.cbrt(x) * m**4 + 2.0

    def diffusion(x, mu):
        return (x * x + _mean_b(mu))[..., None]

    growth = GrowthMeta(
        gamma=6.0,
        L_of_R=PolySpec.of((1.0, 2.0 / 3.0), (2.0, 0.0)),
        L1=2.0,
        q=2.0,
        L2=50.0,
        l1=4.0,
        l2=1.0,
        L3=6.0,
        p=2.0,
        coercivity_bound=(6.0, 0.0, 2.0),
        L4=20.0,
        l3=5.0,
        l4=2.0,
    )
    lyap = Lyapunov(
        f=PolySpec.of((0.25, 2.0), (1.0, 0.0)),
        f_bar=PolySpec.of((1.0, 1.5), (1.0, 2.0)),
        alpha=2.0,
        beta=1.0,
        kappa=1.0,
    )
    return CoefficientModel("example61", drift, diffusion, growth=growth, lyapunov=lyap)


def mean_square():
    """dX = (-X - X (E X)^2) dt + (X + E X) dW."""

    def drift(x, mu):
        m = _mean_b(mu)
        return -x - x * m * m

    def diffusion(x, mu):
        return (x + _mean_b(mu))[..., None]

    growth = GrowthMeta(
        gamma=4.0,
        L_of_R=PolySpec.of((4.0, 2.0), (4.0, 0.0)),
        L1=4.0,
        q=2.0,
        L2=4.0,
        l1=3.0,
        l2=1.0,
        L3=2.0,
        p=2.0,
        L4=2.0,
        l3=3.0,
        l4=1.0,
    )
    return CoefficientModel("mean_square", drift, diffusion, growth=growth)


def linear_mean_field(theta=2.0, kappa=0.5, sigma=0.5):
    """dX = (-theta X + kappa E X) dt + sigma X dW, a dissipative benchmark with closed moment ODEs."""

    def drift(x, mu):
        return -theta * x + kappa * _mean_b(mu)

    def diffusion(x, mu):
        return (sigma * x)[..., None]

    # 2x(-theta x + kappa m) + sigma^2 x^2 <= (-2 theta + sigma^2 + kappa) x^2 + kappa m^2  (Young)
    L5 = 2 * theta - sigma**2 - kappa
    L6 = kappa
    dissipation = Dissipation(L5=L5, L6=L6, p=2.0) if L5 > L6 > 0 else None
    growth = GrowthMeta(
        gamma=2.0,
        L_of_R=PolySpec.of((max(kappa, 1e-12), 0.0)),
        L1=1.0,
        q=2.0,
        L2=max(theta, kappa, sigma, 1.0),
        l1=1.0,
        l2=1.0,
        L3=max(2 * kappa, sigma**2 + kappa, 1e-12),
        p=2.0,
        L4=max(theta, kappa, sigma, 1.0),
        l3=1.0,
        l4=1.0,
        dissipation=dissipation,
    )
    params = {"theta": theta, "kappa": kappa, "sigma": sigma}
    return CoefficientModel("linear_mean_field", drift, diffusion, growth=growth, params=params)


def linear_moment_ode(times, mean0, var0, theta=2.0, kappa=0.5, sigma=0.5, N=None):
    """(E X_t, E X_t^2) for the linear mean-field model from the closed-form ODE solution.

    With ``N`` given, returns instead (E m_N(t)^2, E S_N(t)) for the N-particle
    system, where m_N is the empirical mean and S_N the empirical second
    moment; these close because the drift is linear in the state and mean.
    Both are evaluated exactly (no step-size or tolerance error), so tiny
    values at long horizons keep full relative accuracy.
    """
    t = np.asarray(times, dtype=float)
    a = -theta + kappa
    c = -2 * theta + sigma**2
    if N is None:
        m2 = mean0**2
        mean = mean0 * np.exp(a * t)
        # S' = c S + 2 kappa m0^2 e^{2at}
        gap = 2 * a - c
        if abs(gap) > 1e-12:
            forced = 2 * kappa * m2 * (np.exp(2 * a * t) - np.exp(c * t)) / gap
        else:
            forced = 2 * kappa * m2 * t * np.exp(c * t)
        return mean, (m2 + var0) * np.exp(c * t) + forced
    # y' = A y with y = (E m_N^2, E S_N)
    A = np.array([[2 * a, sigma**2 / N], [2 * kappa, c]])
    lam, vec = np.linalg.eig(A)
    y0 = np.array([mean0**2 + var0 / N, mean0**2 + var0])
    coef = np.linalg.solve(vec, y0)
    y = vec @ (coef[:, None] * np.exp(lam[:, None] * t[None, :]))
    return y[0].real, y[1].real


def double_kernel(drift_kernel, diffusion_kernel=None, growth=None, name="double_kernel"):
    """b(x, mu) = iint k(x, y, z) mu(dy) mu(dz),  sigma(x, mu) = int s(x, y) mu(dy).

    Kernels act on broadcast arrays with trailing state axis d = 1. The
    linear-growth bound on the kernel's partial derivatives is the caller's
    responsibility; it is not checked here.
    """

    def drift(x, mu):
        s = mu.samples
        X = x[..., :, None, None, :]
        Y = s[..., None, :, None, :]
        Z = s[..., None, None, :, :]
        vals = np.broadcast_to(drift_kernel(X, Y, Z), np.broadcast_shapes(X.shape, Y.shape, Z.shape))
        return vals.mean(axis=(-3, -2))

    def diffusion(x, mu):
        if diffusion_kernel is None:
            return np.zeros(x.shape + (1,))
        s = mu.samples
        X = x[..., :, None, :]
        Y = s[..., None, :, :]
        vals = np.broadcast_to(diffusion_kernel(X, Y), np.broadcast_shapes(X.shape, Y.shape))
        return vals.mean(axis=-2)[..., None]

    return CoefficientModel(name, drift, diffusion, growth=growth or GrowthMeta())


def measure_free(drift_fn, diffusion_fn, name="measure_free"):
    """Plain SDE coefficients b(x), sigma(x) wrapped as a (trivial) mean-field model."""
    return CoefficientModel(
        name,
        lambda x, mu: drift_fn(x),
        lambda x, mu: diffusion_fn(x)[..., None],
        measure_free=True,
    )


BUILTIN_MODELS = {
    "example61": example61,
    "mean_square": mean_square,
    "linear_mean_field": linear_mean_field,
}


def build_model(name, **params):
    try:
        factory = BUILTIN_MODELS[name]
    except KeyError:
        raise ValueError(f"unknown model {name!r}; choose one of {sorted(BUILTIN_MODELS)}") from None
    return factory(**params)
