"""Time stepping for the N-particle system and the frozen-measure scheme."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Union

import numpy as np

from .measure import EmpiricalMeasure

TAMED = "TamedEuler"
EXPLICIT = "ExplicitEuler"
FROZEN = "FrozenMeasureTamed"
SCHEME_KINDS = (TAMED, EXPLICIT, FROZEN)


class BlowUpError(FloatingPointError):
    """A particle state became non-finite. Carries enough context to replay the step."""

    def __init__(self, step_index, time, particle_id, replication, pre_state, scheme):
        self.step_index = step_index
        self.time = time
        self.particle_id = particle_id
        self.replication = replication
        self.pre_state = pre_state
        self.scheme = scheme
        super().__init__(
            f"{scheme} blew up at step {step_index} (t={time:.6g}): particle {particle_id}"
            f"{'' if replication is None else f', replication {replication}'}, pre-state {pre_state}"
        )

    def diagnostics(self):
        return {
            "step_index": self.step_index,
            "time": self.time,
            "particle_id": self.particle_id,
            "replication": self.replication,
            "pre_state": np.asarray(self.pre_state).tolist(),
            "scheme": self.scheme,
        }


@dataclass(frozen=True)
class SchemeConfig:
    kind: str = TAMED
    dt: float = 1e-3
    outer_m: Optional[int] = None

    def __post_init__(self):
        if self.kind not in SCHEME_KINDS:
            raise ValueError(f"unknown scheme {self.kind!r}; expected one of {SCHEME_KINDS}")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.kind == FROZEN and (self.outer_m is None or self.outer_m < 1):
            raise ValueError("FrozenMeasureTamed needs outer_m >= 1")

    def n_steps(self, T):
        return steps_for(T, self.dt)


def steps_for(T, dt, tol=1e-12):
    n = int(round(T / dt))
    if abs(n * dt - T) > tol * max(1.0, abs(T)):
        raise ValueError(f"dt={dt!r} does not divide T={T!r}")
    return n


@dataclass(frozen=True)
class Ensemble:
    """Particle states of shape ``batch + (N, d)``; ``particle_ids`` has shape ``groups + (N,)``.

    Leading axes beyond the particle-id shape are replications. The
    empirical measure is always taken over the particle axis, separately for
    each leading index, so grouped sub-systems step independently.
    """

    states: np.ndarray
    time: float = 0.0
    particle_ids: Optional[np.ndarray] = None

    def __post_init__(self):
        s = np.asarray(self.states, dtype=float)
        if s.ndim == 1:
            s = s[:, None]
        object.__setattr__(self, "states", s)
        ids = self.particle_ids
        if ids is None:
            ids = np.arange(s.shape[-2])
        ids = np.asarray(ids, dtype=np.int64)
        if ids.shape[-1] != s.shape[-2]:
            raise ValueError("particle_ids must match the particle axis")
        object.__setattr__(self, "particle_ids", ids)

    @property
    def n_particles(self):
        return self.states.shape[-2]

    @property
    def dim(self):
        return self.states.shape[-1]

    def measure(self):
        return EmpiricalMeasure(self.states)


@dataclass
class Trajectory:
    times: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)

    def append(self, ens):
        self.times.append(ens.time)
        self.snapshots.append(ens)

    @property
    def final(self):
        return self.snapshots[-1]

    def states(self):
        return np.stack([s.states for s in self.snapshots])


def tamed_coefficients(b, sigma, dt):
    """b / (1 + dt|b|) and sigma / sqrt(1 + dt ||sigma||^2), per particle."""
    bn = np.sqrt(np.sum(b * b, axis=-1, keepdims=True))
    sn2 = np.sum(sigma * sigma, axis=(-2, -1), keepdims=True)
    return b / (1.0 + dt * bn), sigma / np.sqrt(1.0 + dt * sn2)


def advance(states, mu, model, kind, dt, dW):
    """One step from ``states`` with the measure held at ``mu``.

    Overflow is not reported here; callers detect non-finite results and
    raise ``BlowUpError`` with context.
    """
    with np.errstate(over="ignore", invalid="ignore"):
        b = np.asarray(model.drift(states, mu), dtype=float)
        sigma = np.asarray(model.diffusion(states, mu), dtype=float)
        if kind != EXPLICIT:
            b, sigma = tamed_coefficients(b, sigma, dt)
        if sigma.shape[-1] == 1:
            noise = sigma[..., 0] * dW
        else:
            noise = np.einsum("...ij,...j->...i", sigma, dW)
        return states + b * dt + noise


def draw_increments(driver, step_index, particle_ids, dt, noise_dim):
    ids = np.asarray(particle_ids)
    dW = driver.increments(step_index, ids.reshape(-1), dt, noise_dim)
    return dW.reshape(tuple(driver.batch_shape) + ids.shape + (noise_dim,))


def check_finite(new_states, old_states, particle_ids, step_index, time, kind, batch_ndim):
    if np.all(np.isfinite(new_states)):
        return
    bad = np.argwhere(~np.all(np.isfinite(new_states), axis=-1))[0]
    rep = int(bad[0]) if batch_ndim else None
    pid_index = tuple(bad[batch_ndim:])
    pid = int(particle_ids[pid_index])
    raise BlowUpError(step_index, time, pid, rep, old_states[tuple(bad)].copy(), kind)


def step_particle_system(ensemble, model, scheme, driver, step_index, measure=None):
    """Advance every particle by one step of ``scheme.dt``.

    The measure is the ensemble's own empirical measure at the step start
    unless ``measure`` supplies a frozen one.
    """
    mu = ensemble.measure() if measure is None else measure
    dW = draw_increments(driver, step_index, ensemble.particle_ids, scheme.dt, model.noise_dim)
    new = advance(ensemble.states, mu, model, scheme.kind, scheme.dt, dW)
    batch_ndim = ensemble.states.ndim - ensemble.particle_ids.ndim - 1
    check_finite(new, ensemble.states, ensemble.particle_ids, step_index, ensemble.time, scheme.kind, batch_ndim)
    return replace(ensemble, states=new, time=ensemble.time + scheme.dt)


def _observation_steps(observe, dt, n_steps, t0):
    if observe is None:
        return {n_steps}
    steps = set()
    for t in observe:
        k = int(round((t - t0) / dt))
        if abs(k * dt - (t - t0)) > 1e-9 * max(1.0, abs(t)) or not 0 <= k <= n_steps:
            raise ValueError(f"observation time {t} is not on the step grid")
        steps.add(k)
    steps.add(n_steps)
    return steps


def _run(ensemble0, model, kind, dt, n_steps, driver, observe_steps, refresh_every, T, first_step=1):
    traj = Trajectory()
    ens = ensemble0
    t0 = ensemble0.time
    if 0 in observe_steps:
        traj.append(ens)
    step_scheme = SchemeConfig(TAMED if kind == FROZEN else kind, dt)
    mu = None
    for k in range(n_steps):
        if k % refresh_every == 0:
            mu = ens.measure()
        ens = step_particle_system(ens, model, step_scheme, driver, first_step + k, measure=mu)
        time = T if k + 1 == n_steps else t0 + (k + 1) * dt
        ens = replace(ens, time=time)
        if k + 1 in observe_steps:
            traj.append(ens)
    return traj


def integrate(ensemble0, model, scheme, driver, T, observe=None):
    """Integrate to time ``T`` (absolute), returning snapshots at the ``observe`` times.

    The final snapshot is always included and its time equals ``T`` exactly.
    """
    if scheme.kind == FROZEN:
        return integrate_frozen_measure(ensemble0, model, scheme.outer_m, scheme.dt, driver, T, observe)
    span = T - ensemble0.time
    if span < 0:
        raise ValueError("T precedes the ensemble time")
    if span == 0:
        return Trajectory([ensemble0.time], [ensemble0])
    n = steps_for(span, scheme.dt)
    steps = _observation_steps(observe, scheme.dt, n, ensemble0.time)
    return _run(ensemble0, model, scheme.kind, scheme.dt, n, driver, steps, 1, T)


def integrate_frozen_measure(ensemble0, model, outer_m, inner_dt, driver, T, observe=None):
    """Freeze the empirical measure on the outer mesh kT/m and take tamed inner steps.

    With ``outer_m = T / inner_dt`` this is the same computation as
    ``integrate`` with the tamed scheme.
    """
    if outer_m < 1:
        raise ValueError("outer_m must be >= 1")
    span = T - ensemble0.time
    if span <= 0:
        return Trajectory([ensemble0.time], [ensemble0])
    outer_dt = span / outer_m
    if inner_dt > outer_dt * (1 + 1e-12):
        raise ValueError("inner_dt must not exceed T / outer_m")
    per_outer = steps_for(outer_dt, inner_dt)
    n = per_outer * outer_m
    steps = _observation_steps(observe, inner_dt, n, ensemble0.time)
    return _run(ensemble0, model, FROZEN, inner_dt, n, driver, steps, per_outer, T)


@dataclass(frozen=True)
class Normal:
    mean: float = 0.0
    var: float = 1.0

    def __post_init__(self):
        if not (np.isfinite(self.mean) and np.isfinite(self.var) and self.var >= 0):
            raise ValueError(f"invalid Normal({self.mean}, {self.var})")


@dataclass(frozen=True)
class PointMass:
    x: float = 0.0

    def __post_init__(self):
        if not np.all(np.isfinite(self.x)):
            raise ValueError("PointMass location must be finite")


@dataclass(frozen=True)
class Custom:
    """Initial law given as a transform of i.i.d. standard normals of shape (..., N, d)."""

    transform: Callable[[np.ndarray], np.ndarray]


InitialLaw = Union[Normal, PointMass, Custom]


def sample_initial(dist, N, driver, dim=1, particle_ids=None):
    """I.i.d. initial states drawn from each particle's step-0 stream."""
    if N < 1:
        raise ValueError("N must be >= 1")
    ids = np.arange(N) if particle_ids is None else np.asarray(particle_ids)
    if isinstance(dist, PointMass):
        states = np.broadcast_to(np.asarray(dist.x, dtype=float), tuple(driver.batch_shape) + ids.shape + (dim,)).copy()
    else:
        z = driver.normals(0, ids.reshape(-1), dim).reshape(tuple(driver.batch_shape) + ids.shape + (dim,))
        if isinstance(dist, Normal):
            states = dist.mean + np.sqrt(dist.var) * z
        elif isinstance(dist, Custom):
            states = np.asarray(dist.transform(z), dtype=float)
            if not np.all(np.isfinite(states)):
                raise ValueError("custom initial law produced non-finite states")
        else:
            raise TypeError(f"unsupported initial law {dist!r}")
    return Ensemble(states, 0.0, ids)
