"""Propagation-of-chaos estimators, theoretical rates and decay fits."""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .integrator import (
    FROZEN,
    TAMED,
    BlowUpError,
    Normal,
    advance,
    check_finite,
    draw_increments,
    sample_initial,
    steps_for,
)
from .measure import EmpiricalMeasure
from .rng import BrownianDriver

REPLICATION_CHUNK = 10


def _refresh_every(scheme, T):
    if scheme.kind != FROZEN:
        return 1
    return steps_for(T / scheme.outer_m, scheme.dt)


def _step_kind(scheme):
    return TAMED if scheme.kind == FROZEN else scheme.kind


def _rms_gap(a, b):
    diff = a - b
    return np.sqrt(np.mean(np.sum(diff * diff, axis=-1), axis=-1))


def _obs_steps(times, dt, n):
    if times is None:
        return [n]
    out = []
    for t in times:
        k = int(round(t / dt))
        if abs(k * dt - t) > 1e-9 * max(1.0, t) or not 0 <= k <= n:
            raise ValueError(f"observation time {t} is not on the step grid")
        out.append(k)
    return out


def splitting_gaps(model, N_l, T, scheme, driver, times=None, initial=Normal(0.0, 1.0)):
    """RMS gap between the full N_l-particle system and its two half-systems.

    Particle j is driven by the same Brownian stream (and starts from the same
    initial value) in the full system and in whichever half contains it; each
    half uses only its own N_l/2 particles for the empirical measure. The
    three systems step in lockstep off one draw per step.

    Returns an array of shape ``(len(times),) + driver.batch_shape``.
    """
    if N_l < 2 or N_l % 2:
        raise ValueError(f"N_l must be a positive even integer, got {N_l}")
    n = steps_for(T, scheme.dt)
    obs = _obs_steps(times, scheme.dt, n)
    wanted = {k: [] for k in obs}
    refresh = _refresh_every(scheme, T)
    kind = _step_kind(scheme)
    dt = scheme.dt
    ids = np.arange(N_l)
    half_ids = ids.reshape(2, N_l // 2)
    full = sample_initial(initial, N_l, driver, dim=model.dim).states
    split = full.reshape(full.shape[:-2] + (2, N_l // 2, model.dim)).copy()
    batch_ndim = full.ndim - 2
    out = {}
    if 0 in wanted:
        out[0] = _rms_gap(full, split.reshape(full.shape))
    mu_full = mu_split = None
    for k in range(n):
        if k % refresh == 0:
            mu_full = EmpiricalMeasure(full)
            mu_split = EmpiricalMeasure(split)
        dW = draw_increments(driver, k + 1, ids, dt, model.noise_dim)
        new_full = advance(full, mu_full, model, kind, dt, dW)
        check_finite(new_full, full, ids, k + 1, k * dt, kind, batch_ndim)
        dW_split = dW.reshape(dW.shape[:-2] + (2, N_l // 2, model.noise_dim))
        new_split = advance(split, mu_split, model, kind, dt, dW_split)
        check_finite(new_split, split, half_ids, k + 1, k * dt, kind, batch_ndim)
        full, split = new_full, new_split
        if k + 1 in wanted:
            out[k + 1] = _rms_gap(full, split.reshape(full.shape))
    return np.stack([out[k] for k in obs])


def splitting_error(model, N_l, T, scheme, driver, initial=Normal(0.0, 1.0)):
    """Terminal RMS gap sqrt((1/N_l) sum_j (X_T^j - X~_T^j)^2) between full and split systems."""
    gaps = splitting_gaps(model, N_l, T, scheme, driver, None, initial)[0]
    return float(gaps) if np.ndim(gaps) == 0 else gaps


def decoupled_gaps(model, N, M_ref, T, scheme, driver, times=None, initial=Normal(0.0, 1.0)):
    """RMS gap between N interacting particles and N non-interacting copies.

    Copy i shares particle i's initial value and Brownian stream but feels the
    empirical measure of an independent M_ref-particle reference cloud
    (particle ids N .. N+M_ref-1) standing in for the law of the limit.
    """
    if M_ref < 8 * N:
        warnings.warn(f"reference cloud M_ref={M_ref} is smaller than 8N={8 * N}", stacklevel=2)
    n = steps_for(T, scheme.dt)
    obs = _obs_steps(times, scheme.dt, n)
    wanted = set(obs)
    refresh = _refresh_every(scheme, T)
    kind = _step_kind(scheme)
    dt = scheme.dt
    all_ids = np.arange(N + M_ref)
    ids, ref_ids = all_ids[:N], all_ids[N:]
    start = sample_initial(initial, N + M_ref, driver, dim=model.dim).states
    inter = start[..., :N, :]
    copies = inter.copy()
    ref = start[..., N:, :]
    batch_ndim = inter.ndim - 2
    out = {}
    if 0 in wanted:
        out[0] = _rms_gap(inter, copies)
    mu_inter = mu_ref = None
    for k in range(n):
        if k % refresh == 0:
            mu_inter = EmpiricalMeasure(inter)
            mu_ref = EmpiricalMeasure(ref)
        dW = draw_increments(driver, k + 1, all_ids, dt, model.noise_dim)
        dW_p, dW_r = dW[..., :N, :], dW[..., N:, :]
        new_inter = advance(inter, mu_inter, model, kind, dt, dW_p)
        new_copies = advance(copies, mu_ref, model, kind, dt, dW_p)
        new_ref = advance(ref, mu_ref, model, kind, dt, dW_r)
        for new, old, pid in ((new_inter, inter, ids), (new_copies, copies, ids), (new_ref, ref, ref_ids)):
            check_finite(new, old, pid, k + 1, k * dt, kind, batch_ndim)
        inter, copies, ref = new_inter, new_copies, new_ref
        if k + 1 in wanted:
            out[k + 1] = _rms_gap(inter, copies)
    return np.stack([out[k] for k in obs])


def decoupled_error(model, N, M_ref, T, scheme, driver, initial=Normal(0.0, 1.0)):
    gaps = decoupled_gaps(model, N, M_ref, T, scheme, driver, None, initial)[0]
    return float(gaps) if np.ndim(gaps) == 0 else gaps


def map_replications(fn, seed, U, threads=1, chunk=REPLICATION_CHUNK):
    """Evaluate ``fn(driver)`` over replications 0..U-1 in fixed-size chunks.

    ``fn`` must return an array whose last axis runs over the driver's
    replications. The chunking does not depend on ``threads``, so results are
    identical for any worker count.
    """
    chunks = [range(i, min(i + chunk, U)) for i in range(0, U, chunk)]
    base = BrownianDriver(seed)

    def run(reps):
        return fn(base.for_replications(reps))

    if threads <= 1 or len(chunks) == 1:
        parts = [run(c) for c in chunks]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, chunks))
    return np.concatenate(parts, axis=-1)


@dataclass
class ChaosReport:
    levels: list
    errors: list
    stderrs: list
    horizon: float
    replications: int
    slopes: list = field(default_factory=list)
    fitted_slope: float = float("nan")
    failures: dict = field(default_factory=dict)

    def __post_init__(self):
        self.refresh()

    def refresh(self):
        ok = [(n, e) for n, e in zip(self.levels, self.errors) if np.isfinite(e) and e > 0]
        logs = [math.log2(e) for _, e in ok]
        self.slopes = [b - a for a, b in zip(logs, logs[1:])]
        if len(ok) >= 2:
            x = np.log2([n for n, _ in ok])
            self.fitted_slope = float(np.polyfit(x, logs, 1)[0])
        else:
            self.fitted_slope = float("nan")

    def monotone_within_stderr(self):
        """Adjacent levels decrease, allowing the one-standard-error bands to overlap."""
        e, s = self.errors, self.stderrs
        return all(e[i + 1] - s[i + 1] <= e[i] + s[i] for i in range(len(e) - 1))

    def strictly_positive(self):
        return all(np.isfinite(x) and x > 0 for x in self.errors)


def run_chaos_sweep(model, N_1, levels, T, U, scheme, seed, threads=1, initial=Normal(0.0, 1.0),
                    on_level=None):
    """Splitting error at N_l = N_1 * 2^l for l < levels, averaged over U replications.

    Replication r uses counter stream r of the master seed at every level.
    A level that blows up is recorded in ``failures`` (with the blow-up
    diagnostics) and the sweep goes on. ``on_level(N_l, error, stderr)`` is
    called as each level finishes.
    """
    if levels < 1 or U < 1:
        raise ValueError("levels and U must be >= 1")
    if N_1 < 2 or N_1 % 2:
        raise ValueError("N_1 must be a positive even integer")
    Ns, errs, ses, failures = [], [], [], {}
    for level in range(levels):
        N_l = N_1 * 2**level
        Ns.append(N_l)
        try:
            per_rep = map_replications(
                lambda drv: splitting_gaps(model, N_l, T, scheme, drv, None, initial)[0],
                seed, U, threads,
            )
        except BlowUpError as exc:
            failures[N_l] = {"message": str(exc), **exc.diagnostics()}
            errs.append(float("nan"))
            ses.append(float("nan"))
        else:
            errs.append(float(np.mean(per_rep)))
            ses.append(float(np.std(per_rep, ddof=1) / math.sqrt(U)) if U > 1 else 0.0)
        if on_level is not None:
            on_level(N_l, errs[-1], ses[-1])
    return ChaosReport(Ns, errs, ses, T, U, failures=failures)


def phi_rate(N, d, q_tilde):
    """Empirical-measure W_2 rate Phi(N), without its constant."""
    if not q_tilde > 2:
        raise ValueError("q_tilde must exceed 2")
    if d < 1 or N < 1:
        raise ValueError("need d >= 1 and N >= 1")
    tail = N ** (-(q_tilde - 2.0) / q_tilde)
    if d < 4:
        if q_tilde == 4:
            raise ValueError("Phi(N) excludes q_tilde = 4 when d < 4")
        return N**-0.5 + tail
    if d == 4:
        if q_tilde == 4:
            raise ValueError("Phi(N) excludes q_tilde = 4 when d = 4")
        return N**-0.5 * math.log(1 + N) + tail
    if q_tilde == d / (d - 2):
        raise ValueError("Phi(N) excludes q_tilde = d/(d-2) when d > 4")
    return N ** (-2.0 / d) + tail


def fit_decay(times, values):
    """Least-squares slope of log(values) against time; returns (rate, r_squared).

    Non-positive observations are dropped with a warning.
    """
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    keep = np.isfinite(v) & (v > 0)
    if not keep.all():
        warnings.warn(f"fit_decay: dropping {int((~keep).sum())} non-positive observations", stacklevel=2)
    t, y = t[keep], np.log(v[keep])
    if len(t) < 3:
        raise ValueError("fit_decay needs at least 3 positive observations")
    slope, intercept = np.polyfit(t, y, 1)
    resid = y - (slope * t + intercept)
    ss_res = float(resid @ resid)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 if ss_tot == 0 or ss_res <= 1e-30 * max(ss_tot, 1.0) else 1.0 - ss_res / ss_tot
    return float(slope), r2
