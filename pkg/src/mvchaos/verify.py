"""Sampled verification of structural assumptions on coefficient models.

Each check draws randomized (state, measure) inputs, evaluates both sides of
an inequality, and records every violation with inputs sufficient to replay
it. Sampling is deterministic given ``seed``: chunk ``c`` always uses
``numpy.random.default_rng([seed, c])``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import minimize

from .integrator import Normal, SchemeConfig, integrate, sample_initial
from .measure import EmpiricalMeasure, wasserstein_1d
from .model import Dissipation, PolySpec
from .rng import BrownianDriver

REL_TOL = 1e-9
MAX_RECORDED = 25
CHUNK = 2000

PASS, FAIL, INCONCLUSIVE = "pass", "fail", "inconclusive"


@dataclass
class Violation:
    inputs: dict
    lhs: float
    rhs: float
    margin: float


@dataclass
class AssumptionReport:
    assumption: str
    name: str
    samples: int = 0
    violations: list = field(default_factory=list)
    n_violations: int = 0
    estimated_constants: dict = field(default_factory=dict)
    verdict: str = INCONCLUSIVE
    note: str = ""

    def table_row(self):
        consts = ", ".join(f"{k}={v:.4g}" for k, v in sorted(self.estimated_constants.items()))
        return f"{self.assumption:<5} {self.name:<34} {self.samples:>8} {self.n_violations:>6}  {self.verdict:<12} {consts}"


# --- inequality sides -------------------------------------------------------
# Inputs are batched: x, xbar of shape (B, 1, d); mu, nu samples (B, k, d).


def _dot(a, b):
    return np.sum(a * b, axis=(-2, -1))


def _fro2(s):
    return np.sum(s * s, axis=(-3, -2, -1))


def _norm(x):
    return np.sqrt(np.sum(x * x, axis=(-2, -1)))


def _w2(mu, nu):
    return wasserstein_1d(2, mu, nu)


def monotonicity_sides(model, x, xbar, mu, nu, R):
    g = model.growth
    mu, nu = EmpiricalMeasure(mu), EmpiricalMeasure(nu)
    db = model.drift(x, mu) - model.drift(xbar, nu)
    ds = model.diffusion(x, mu) - model.diffusion(xbar, nu)
    lhs = 2 * _dot(x - xbar, db) + (g.q - 1) * _fro2(ds)
    dist = _norm(x - xbar) ** 2 + _w2(mu, nu) ** 2
    coef = g.L_of_R(R) + g.L1 * mu.raw_moment(g.gamma) + g.L1 * nu.raw_moment(g.gamma)
    return lhs, coef * dist, {"dist": dist, "measure_terms": g.L1 * (mu.raw_moment(g.gamma) + nu.raw_moment(g.gamma))}


def dissipative_monotonicity_sides(model, x, xbar, mu, nu, R):
    g = model.growth
    mu, nu = EmpiricalMeasure(mu), EmpiricalMeasure(nu)
    db = model.drift(x, mu) - model.drift(xbar, nu)
    ds = model.diffusion(x, mu) - model.diffusion(xbar, nu)
    lhs = 2 * _dot(x - xbar, db) + _fro2(ds)
    gap2 = _norm(x - xbar) ** 2
    coef = g.g_of_R(R) + g.L1 * mu.raw_moment(g.gamma) + g.L1 * nu.raw_moment(g.gamma)
    rhs = -g.h_of_R(R) * gap2 + coef * (gap2 + _w2(mu, nu) ** 2)
    return lhs, rhs, {}


def drift_lipschitz_sides(model, x, xbar, mu, nu):
    g = model.growth
    mu, nu = EmpiricalMeasure(mu), EmpiricalMeasure(nu)
    lhs = _norm(model.drift(x, mu) - model.drift(xbar, nu))
    weight = 1 + _norm(x) ** g.l1 + _norm(xbar) ** g.l1 + mu.raw_moment(g.l1) + nu.raw_moment(g.l1)
    rhs = g.L2 * weight * (_norm(x - xbar) + _w2(mu, nu))
    return lhs, rhs, {}


def diffusion_state_lipschitz_sides(model, x, xbar, mu):
    g = model.growth
    mu = EmpiricalMeasure(mu)
    lhs = np.sqrt(_fro2(model.diffusion(x, mu) - model.diffusion(xbar, mu)))
    rhs = g.L2 * (1 + _norm(x) ** g.l2 + _norm(xbar) ** g.l2) * _norm(x - xbar)
    return lhs, rhs, {}


def diffusion_measure_lipschitz_sides(model, x, mu, nu):
    g = model.growth
    mu, nu = EmpiricalMeasure(mu), EmpiricalMeasure(nu)
    lhs = np.sqrt(_fro2(model.diffusion(x, mu) - model.diffusion(x, nu)))
    return lhs, g.L2 * _w2(mu, nu), {}


def coercivity_sides(model, x, mu, p, bound):
    mu = EmpiricalMeasure(mu)
    lhs = 2 * _dot(x, model.drift(x, mu)) + (p - 1) * _fro2(model.diffusion(x, mu))
    c0, cx, cmu = bound
    rhs = c0 + cx * _norm(x) ** 2 + cmu * mu.raw_moment(2)
    return lhs, rhs, {}


def dissipativity_sides(model, x, mu, L5, L6, p):
    mu = EmpiricalMeasure(mu)
    lhs = 2 * _dot(x, model.drift(x, mu)) + (p - 1) * _fro2(model.diffusion(x, mu))
    rhs = -L5 * _norm(x) ** 2 + L6 * mu.raw_moment(2)
    return lhs, rhs, {}


def growth_drift_sides(model, x, mu):
    g = model.growth
    mu = EmpiricalMeasure(mu)
    lhs = _norm(model.drift(x, mu))
    return lhs, g.L4 * (1 + _norm(x) ** g.l3 + mu.raw_moment(g.l3)), {}


def growth_diffusion_sides(model, x, mu):
    g = model.growth
    mu = EmpiricalMeasure(mu)
    lhs = np.sqrt(_fro2(model.diffusion(x, mu)))
    return lhs, g.L4 * (1 + _norm(x) ** g.l4 + mu.moment_norm(2)), {}


def lyapunov_sides(model, x, mu):
    """<grad f, b> + 1/2 |grad f sigma|^2 + 1/2 tr(sigma^T Hess f sigma) vs alpha f + beta f_bar(||mu||_2^2)."""
    ly = model.lyapunov
    mu = EmpiricalMeasure(mu)
    b = model.drift(x, mu)[:, 0, :]
    s = model.diffusion(x, mu)[:, 0, :, :]
    x = x[:, 0, :]
    r = np.sqrt(np.sum(x * x, axis=-1))
    xhat = x / np.where(r > 0, r, 1.0)[:, None]
    f1_over_r = ly.f.derivative_over_r(r)
    f2 = ly.f.second_derivative(r)
    grad = f1_over_r[:, None] * x
    # Hess f(|x|) = f'' xhat xhat^T + (f'/r)(I - xhat xhat^T)
    outer = xhat[:, :, None] * xhat[:, None, :]
    hess = f2[:, None, None] * outer + f1_over_r[:, None, None] * (np.eye(x.shape[-1]) - outer)
    gs = np.einsum("bi,bij->bj", grad, s)
    tr = np.einsum("bji,bjk,bki->b", s, hess, s)
    lhs = np.sum(grad * b, axis=-1) + 0.5 * np.sum(gs * gs, axis=-1) + 0.5 * tr
    rhs = ly.alpha * ly.f(r) + ly.beta * ly.f_bar(mu.raw_moment(2))
    return lhs, rhs, {}


SIDES = {
    "2.1": monotonicity_sides,
    "2.2a": drift_lipschitz_sides,
    "2.2b": diffusion_state_lipschitz_sides,
    "2.2c": diffusion_measure_lipschitz_sides,
    "2.3": coercivity_sides,
    "2.4a": growth_drift_sides,
    "2.4b": growth_diffusion_sides,
    "2.5": lyapunov_sides,
    "2.6": dissipativity_sides,
    "2.7": dissipative_monotonicity_sides,
}


# --- input sampling -----------------------------------------------------------


def _loguniform(rng, lo, hi, size):
    return np.exp(rng.uniform(np.log(lo), np.log(hi), size))


def sample_states(rng, B, d, radius, small=1e-4):
    """States with |x| <= radius, mixing uniform, small, boundary and zero magnitudes."""
    kind = rng.integers(0, 4, size=B)
    mag = np.where(kind == 0, radius * rng.uniform(size=B), _loguniform(rng, small, radius, B))
    mag = np.where(kind == 2, radius, mag)
    mag = np.where(kind == 3, 0.0, mag)
    if d == 1:
        direction = rng.choice([-1.0, 1.0], size=(B, 1))
    else:
        direction = rng.normal(size=(B, d))
        direction /= np.linalg.norm(direction, axis=-1, keepdims=True)
    return (mag[:, None] * direction)[:, None, :]


def sample_pair(rng, B, d, radius):
    """(x, xbar) in the ball, with exact ties and near-ties mixed in."""
    x = sample_states(rng, B, d, radius)
    xbar = sample_states(rng, B, d, radius)
    u = rng.uniform(size=B)
    tie = u < 0.1
    near = (u >= 0.1) & (u < 0.25)
    eps = _loguniform(rng, 1e-6, 1e-1, B)[:, None, None] * rng.choice([-1.0, 1.0], size=(B, 1, d))
    nudged = np.clip(x + eps, -radius, radius) if d == 1 else x + eps
    xbar = np.where(tie[:, None, None], x, np.where(near[:, None, None], nudged, xbar))
    return x, xbar


def sample_measures(rng, B, k, d, max_abs):
    """B finite-atom measures with k atoms each, from Gaussian mixtures (some atoms pinned to 0)."""
    center = rng.normal(size=(B, 1, d)) * _loguniform(rng, 1e-3, max_abs, B)[:, None, None]
    spread = _loguniform(rng, 1e-4, max_abs, B)[:, None, None]
    atoms = center + spread * rng.normal(size=(B, k, d))
    u = rng.uniform(size=B)
    atoms = np.where((u < 0.15)[:, None, None], 0.0, atoms)
    zero_some = rng.uniform(size=(B, k, 1)) < 0.2
    atoms = np.where(zero_some & (u > 0.85)[:, None, None], 0.0, atoms)
    return np.clip(atoms, -max_abs, max_abs)


def sample_measure_pair(rng, B, d, max_abs):
    k_mu, k_nu = (int(v) for v in rng.integers(1, 17, size=2))
    mu = sample_measures(rng, B, k_mu, d, max_abs)
    nu = sample_measures(rng, B, k_nu, d, max_abs)
    u = rng.uniform(size=B)
    if k_mu == k_nu:
        same = u < 0.15
        nudge = (u >= 0.15) & (u < 0.3)
        shifted = mu + _loguniform(rng, 1e-6, 1e-1, B)[:, None, None] * rng.normal(size=(B, 1, d))
        nu = np.where(same[:, None, None], mu, np.where(nudge[:, None, None], shifted, nu))
    return mu, nu


# --- driver -------------------------------------------------------------------


def _run_check(assumption, name, n_samples, seed, make_inputs, sides, extra_constants=None):
    report = AssumptionReport(assumption, name)
    max_ratio = -np.inf
    n_chunks = math.ceil(n_samples / CHUNK)
    for c in range(n_chunks):
        B = min(CHUNK, n_samples - c * CHUNK)
        rng = np.random.default_rng([seed, c])
        inputs = make_inputs(rng, B)
        lhs, rhs, aux = sides(**inputs)
        lhs = np.broadcast_to(lhs, (B,))
        rhs = np.broadcast_to(rhs, (B,))
        margin = rhs - lhs
        scale = np.maximum(np.abs(lhs), np.abs(rhs))
        bad = margin < -REL_TOL * scale
        bad |= ~np.isfinite(lhs) | ~np.isfinite(rhs)
        pos = rhs > 0
        if np.any(pos):
            max_ratio = max(max_ratio, float(np.max(lhs[pos] / rhs[pos])))
        if extra_constants is not None:
            extra_constants(report.estimated_constants, lhs, rhs, aux)
        report.samples += B
        idx = np.flatnonzero(bad)
        report.n_violations += len(idx)
        for i in idx[: max(0, MAX_RECORDED - len(report.violations))]:
            report.violations.append(
                Violation(
                    {k: (v[i] if isinstance(v, np.ndarray) and v.ndim and v.shape[0] == B else v) for k, v in inputs.items()
                     if k != "model"},
                    float(lhs[i]), float(rhs[i]), float(margin[i]),
                )
            )
    if np.isfinite(max_ratio):
        report.estimated_constants["max_lhs_over_rhs"] = max_ratio
    report.verdict = FAIL if report.n_violations else PASS
    return report


def replay(model, report, violation):
    """Recompute (lhs, rhs) for a recorded violation."""
    inputs = {}
    for k, v in violation.inputs.items():
        inputs[k] = v[None] if isinstance(v, np.ndarray) else v
    lhs, rhs, _ = SIDES[report.assumption](model, **inputs)
    return float(np.ravel(lhs)[0]), float(np.ravel(rhs)[0])


def _measure_limit(R):
    return max(3.0, float(R))


def check_local_monotonicity(model, R, n_samples=100_000, seed=0):
    """Local monotonicity on the ball |x| v |xbar| <= R with exact 1-D W2."""
    if model.dim != 1:
        return AssumptionReport("2.1", "local monotonicity", note="W2 is exact only for d = 1", verdict=INCONCLUSIVE)
    d = model.dim

    def make(rng, B):
        x, xbar = sample_pair(rng, B, d, R)
        mu, nu = sample_measure_pair(rng, B, d, _measure_limit(R))
        return {"model": model, "x": x, "xbar": xbar, "mu": mu, "nu": nu, "R": float(R)}

    def needed(consts, lhs, rhs, aux):
        dist = aux["dist"]
        ok = dist > 0
        if np.any(ok):
            need = np.max(lhs[ok] / dist[ok] - aux["measure_terms"][ok])
            consts["L_of_R_needed"] = max(consts.get("L_of_R_needed", -np.inf), float(need))

    report = _run_check("2.1", f"local monotonicity (R={R:g})", n_samples, seed, make,
                        lambda **kw: monotonicity_sides(**kw), needed)
    report.estimated_constants["L_of_R_declared"] = float(model.growth.L_of_R(R))
    return report


def check_dissipative_monotonicity(model, R, n_samples=100_000, seed=0):
    g = model.growth
    if g.h_of_R is None or g.g_of_R is None or g.dissipation is None:
        return AssumptionReport("2.7", "dissipative local monotonicity", verdict=INCONCLUSIVE,
                                note="model declares no h(R), g(R) and dissipation constants")
    if model.dim != 1:
        return AssumptionReport("2.7", "dissipative local monotonicity", verdict=INCONCLUSIVE,
                                note="W2 is exact only for d = 1")

    def make(rng, B):
        x, xbar = sample_pair(rng, B, 1, R)
        mu, nu = sample_measure_pair(rng, B, 1, _measure_limit(R))
        return {"model": model, "x": x, "xbar": xbar, "mu": mu, "nu": nu, "R": float(R)}

    report = _run_check("2.7", f"dissipative local monotonicity (R={R:g})", n_samples, seed, make,
                        lambda **kw: dissipative_monotonicity_sides(**kw))
    side = dissipative_side_conditions(model, R)
    report.estimated_constants.update({k: float(v) for k, v in side.items() if not isinstance(v, bool)})
    if not all(v for v in side.values() if isinstance(v, bool)):
        report.verdict = FAIL
        report.note = "side conditions on h, g fail: " + ", ".join(k for k, v in side.items() if v is False)
    return report


def dissipative_side_conditions(model, R):
    """h(R) - 3 g(R) > (gamma/2 + 1)(L5 - L6), lim h/g = lambda > 3, g -> infinity (leading terms)."""
    g = model.growth
    h_R, g_R = float(g.h_of_R(R)), float(g.g_of_R(R))
    diss = g.dissipation
    threshold = (g.gamma / 2 + 1) * (diss.L5 - diss.L6)
    if g.h_of_R.degree == g.g_of_R.degree:
        lam = g.h_of_R.leading_coefficient / g.g_of_R.leading_coefficient
    else:
        lam = math.inf if g.h_of_R.degree > g.g_of_R.degree else 0.0
    return {
        "h_minus_3g": h_R - 3 * g_R,
        "threshold": threshold,
        "margin_ok": h_R - 3 * g_R > threshold,
        "lambda": lam,
        "lambda_ok": 3 < lam < math.inf,
        "g_unbounded": g.g_of_R.degree > 0 and g.g_of_R.leading_coefficient > 0,
    }


def check_polynomial_lipschitz(model, n_samples=100_000, seed=0, radius=10.0):
    """The drift and the two diffusion Lipschitz bounds; verdict fails if any part fails."""
    if model.dim != 1:
        return [AssumptionReport(a, n, verdict=INCONCLUSIVE, note="W2 is exact only for d = 1")
                for a, n in (("2.2a", "drift Lipschitz"), ("2.2b", "diffusion state Lipschitz"),
                             ("2.2c", "diffusion measure Lipschitz"))]

    def make_a(rng, B):
        x, xbar = sample_pair(rng, B, 1, radius)
        mu, nu = sample_measure_pair(rng, B, 1, radius)
        return {"model": model, "x": x, "xbar": xbar, "mu": mu, "nu": nu}

    def make_b(rng, B):
        x, xbar = sample_pair(rng, B, 1, radius)
        mu, _ = sample_measure_pair(rng, B, 1, radius)
        return {"model": model, "x": x, "xbar": xbar, "mu": mu}

    def make_c(rng, B):
        x = sample_states(rng, B, 1, radius)
        mu, nu = sample_measure_pair(rng, B, 1, radius)
        return {"model": model, "x": x, "mu": mu, "nu": nu}

    return [
        _run_check("2.2a", "drift Lipschitz", n_samples, seed, make_a, lambda **kw: drift_lipschitz_sides(**kw)),
        _run_check("2.2b", "diffusion state Lipschitz", n_samples, seed + 1, make_b,
                   lambda **kw: diffusion_state_lipschitz_sides(**kw)),
        _run_check("2.2c", "diffusion measure Lipschitz", n_samples, seed + 2, make_c,
                   lambda **kw: diffusion_measure_lipschitz_sides(**kw)),
    ]


def check_coercivity(model, n_samples=100_000, seed=0, radius=20.0, p=None, bound=None,
                     dissipative=False, dissipation: Optional[Dissipation] = None):
    """Coercivity 2<x,b> + (p-1)|sigma|^2 <= c0 + cx|x|^2 + cmu||mu||_2^2.

    In dissipative mode the right side becomes -L5|x|^2 + L6||mu||_2^2, with
    constants from ``dissipation`` or the model's declaration.
    """
    g = model.growth
    d = model.dim
    if dissipative:
        diss = dissipation or g.dissipation
        if diss is None:
            return AssumptionReport("2.6", "dissipativity", verdict=INCONCLUSIVE,
                                    note="model declares no dissipation constants")

        def make(rng, B):
            return {"model": model, "x": sample_states(rng, B, d, radius),
                    "mu": sample_measures(rng, B, int(rng.integers(1, 17)), d, 10.0),
                    "L5": diss.L5, "L6": diss.L6, "p": diss.p}

        return _run_check("2.6", f"dissipativity (L5={diss.L5:g}, L6={diss.L6:g}, p={diss.p:g})", n_samples,
                          seed, make, lambda **kw: dissipativity_sides(**kw))

    p = g.p if p is None else p
    bound = g.coercivity_terms() if bound is None else bound

    def make(rng, B):
        return {"model": model, "x": sample_states(rng, B, d, radius),
                "mu": sample_measures(rng, B, int(rng.integers(1, 17)), d, 10.0),
                "p": p, "bound": tuple(bound)}

    return _run_check("2.3", f"coercivity (p={p:g})", n_samples, seed, make, lambda **kw: coercivity_sides(**kw))


def largest_feasible_p(model, candidates=(2, 3, 4, 6, 8, 10, 12, 16, 20), n_samples=20_000, seed=0):
    """Largest p in ``candidates`` for which the declared coercivity bound shows no violations."""
    best = None
    for p in sorted(candidates):
        if check_coercivity(model, n_samples, seed, p=p).verdict == PASS:
            best = p
    return best


def theorem_exponent_requirement(growth):
    """Minimum p the finite-horizon results need: max(gamma, 2 + 2 l3, 4 l4)."""
    return max(growth.gamma, 2 + 2 * growth.l3, 4 * growth.l4)


def check_growth(model, n_samples=100_000, seed=0, radius=10.0):
    """Polynomial growth bounds on |b| and ||sigma||; returns the drift and diffusion reports."""
    d = model.dim

    def make(rng, B):
        return {"model": model, "x": sample_states(rng, B, d, radius),
                "mu": sample_measures(rng, B, int(rng.integers(1, 17)), d, 10.0)}

    return [
        _run_check("2.4a", "drift growth", n_samples, seed, make, lambda **kw: growth_drift_sides(**kw)),
        _run_check("2.4b", "diffusion growth", n_samples, seed + 1, make, lambda **kw: growth_diffusion_sides(**kw)),
    ]


def growth_condition_holds(f, L, kappa):
    """lim_{R -> inf} f(R) - kappa L(R) = inf, decided from leading terms."""
    if f.degree > L.degree:
        return f.degree > 0 and f.leading_coefficient > 0
    if f.degree == L.degree and f.degree > 0:
        return f.leading_coefficient > kappa * L.leading_coefficient
    return False


def lyapunov_check(model, n_samples=100_000, seed=0, radius=20.0):
    ly = model.lyapunov
    if ly is None:
        return AssumptionReport("2.5", "Lyapunov / exponential integrability", verdict=INCONCLUSIVE,
                                note="model declares no Lyapunov function")
    d = model.dim

    def make(rng, B):
        return {"model": model, "x": sample_states(rng, B, d, radius),
                "mu": sample_measures(rng, B, int(rng.integers(1, 17)), d, 10.0)}

    report = _run_check("2.5", "Lyapunov / exponential integrability", n_samples, seed, make,
                        lambda **kw: lyapunov_sides(**kw))
    ok = growth_condition_holds(ly.f, model.growth.L_of_R, ly.kappa)
    report.estimated_constants["deg_f_minus_deg_L"] = ly.f.degree - model.growth.L_of_R.degree
    if not ok:
        report.verdict = FAIL
        report.note = "growth condition lim f(R) - kappa L(R) = inf fails"
    return report


def phi(x, y):
    return -36 * x**4 - 36 * x**3 * y - 36 * x**2 * y**2 - 36 * x * y**3 - 36 * y**4 + 4 * x**2 + 4 * y**2


def phi_grid_max(refinement=4, half_width=2.0):
    """Maximum of phi on a uniform grid over [-w, w]^2 with 12 * 2^refinement intervals per side.

    Successive refinements are nested, so the value is non-decreasing in
    ``refinement``.
    """
    n = 12 * 2**refinement + 1
    g = np.linspace(-half_width, half_width, n)
    vals = phi(g[:, None], g[None, :])
    i, j = np.unravel_index(np.argmax(vals), vals.shape)
    return float(vals[i, j]), (float(g[i]), float(g[j]))


def phi_extremum(refinement=6, n_starts=8):
    """Global maximum of phi over R^2: dense grid on [-2, 2]^2, then local polish.

    phi -> -inf outside the square (quartic part is negative definite), so
    the square contains the global maximizer.
    """
    n = 12 * 2**refinement + 1
    g = np.linspace(-2.0, 2.0, n)
    vals = phi(g[:, None], g[None, :])
    best = float(vals.max())
    flat = np.argsort(vals, axis=None)[-n_starts:]
    for idx in flat:
        i, j = np.unravel_index(idx, vals.shape)
        res = minimize(lambda v: -phi(v[0], v[1]), x0=[g[i], g[j]], method="BFGS",
                       options={"gtol": 1e-14})
        best = max(best, float(-res.fun))
    return best


@dataclass
class IntegrabilitySeries:
    times: np.ndarray
    log_mean: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray
    flagged: np.ndarray
    ceiling: float


def monitor_exponential_integrability(trajectory, f_spec, alpha, ceiling_factor=10.0):
    """Empirical (1/N) sum_i exp(e^{-alpha t} f(|X_t^i|)) at each snapshot, computed in log space."""
    times, logs, means, ses = [], [], [], []
    for snap in trajectory.snapshots:
        states = snap.states
        r = np.sqrt(np.sum(states * states, axis=-1))
        v = math.exp(-alpha * snap.time) * f_spec(r)
        v = v.reshape(-1)
        top = float(np.max(v))
        shifted = np.exp(v - top)
        lm = top + math.log(float(np.mean(shifted)))
        log_se = top + math.log(float(np.std(shifted, ddof=1) / math.sqrt(len(v)))) if len(v) > 1 else -np.inf
        times.append(snap.time)
        logs.append(lm)
        means.append(math.exp(lm) if lm < 700 else math.inf)
        ses.append(math.exp(log_se) if log_se < 700 else math.inf)
    log_mean = np.array(logs)
    ceiling = math.log(ceiling_factor) + log_mean[0]
    return IntegrabilitySeries(np.array(times), log_mean, np.array(means), np.array(ses),
                               log_mean > ceiling, math.exp(ceiling) if ceiling < 700 else math.inf)


def moment_series(trajectory, p):
    """(times, empirical p-th moments) along a trajectory."""
    times = np.array(trajectory.times)
    moms = np.array([EmpiricalMeasure(s.states).raw_moment(p) for s in trajectory.snapshots])
    return times, moms


def lemma_decay_bound(model, p):
    """-p (L5 - L6) / 2, the rate the p-th moment must at least achieve."""
    diss = model.growth.dissipation
    if diss is None:
        raise ValueError(f"{model.name} declares no dissipation constants")
    return -p * (diss.L5 - diss.L6) / 2


def estimate_decay_rate(model, p, N, T_long, dt=1e-3, seed=0, initial=Normal(0.0, 1.0), n_obs=41,
                        return_series=False):
    """Fitted slope of log (1/N) sum |X_t^i|^p over the tail window [T_long/2, T_long]."""
    from .chaos import fit_decay

    if model.growth.dissipation is None:
        raise ValueError(f"{model.name} declares no dissipation constants")
    times = np.linspace(T_long / 2, T_long, n_obs)
    times = np.round(times / dt) * dt
    driver = BrownianDriver(seed)
    ens0 = sample_initial(initial, N, driver, dim=model.dim)
    traj = integrate(ens0, model, SchemeConfig(dt=dt), driver, T_long, observe=list(times))
    t, moms = moment_series(traj, p)
    keep = t >= T_long / 2 - 1e-12
    slope, _ = fit_decay(t[keep], moms[keep])
    if return_series:
        return slope, t[keep], moms[keep]
    return slope


AUDIT_KEYS = ("2.1", "2.2", "2.3", "2.4", "2.5", "2.6", "2.7")


def run_audit(model, assumptions=AUDIT_KEYS, radii=(1.0, 5.0, 10.0), n_samples=100_000, seed=0):
    """Run the selected checkers; returns a flat list of reports in a fixed order.

    The local checks (2.1, 2.7) run once per radius. 2.6 and 2.7 are skipped
    when the model declares no dissipation constants.
    """
    unknown = set(assumptions) - set(AUDIT_KEYS)
    if unknown:
        raise ValueError(f"unknown assumptions {sorted(unknown)}; choose from {AUDIT_KEYS}")
    reports = []
    for key in AUDIT_KEYS:
        if key not in assumptions:
            continue
        if key == "2.1":
            reports += [check_local_monotonicity(model, R, n_samples, seed) for R in radii]
        elif key == "2.2":
            reports += check_polynomial_lipschitz(model, n_samples, seed)
        elif key == "2.3":
            reports.append(check_coercivity(model, n_samples, seed))
        elif key == "2.4":
            reports += check_growth(model, n_samples, seed)
        elif key == "2.5":
            reports.append(lyapunov_check(model, n_samples, seed))
        elif key == "2.6" and model.growth.dissipation is not None:
            reports.append(check_coercivity(model, n_samples, seed, dissipative=True))
        elif key == "2.7" and model.growth.dissipation is not None:
            reports += [check_dissipative_monotonicity(model, R, n_samples, seed) for R in radii]
    return reports
