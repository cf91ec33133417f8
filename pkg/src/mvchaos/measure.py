"""Empirical measures over particle clouds.

Samples are stored as an array of shape ``batch + (N, d)``: the measure is
taken over the ``N`` axis, independently for every leading batch index. All
functionals return arrays with the batch shape (plus ``d`` for the mean).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import lcm

import numpy as np


class NonFiniteValueError(ArithmeticError):
    pass


def _as_samples(samples):
    arr = np.asarray(samples, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim < 2 or arr.shape[-2] < 1:
        raise ValueError("an empirical measure needs at least one atom")
    return arr


@dataclass(frozen=True, eq=False)
class EmpiricalMeasure:
    """Uniform measure (1/N) sum_j delta_{x_j}. Immutable; functionals are cached."""

    samples: np.ndarray
    _moments: dict = field(default_factory=dict, repr=False)
    _mean: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        arr = _as_samples(self.samples)
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)

    @property
    def n_atoms(self):
        return self.samples.shape[-2]

    @property
    def dim(self):
        return self.samples.shape[-1]

    @property
    def batch_shape(self):
        return self.samples.shape[:-2]

    def norms(self):
        if self.dim == 1:
            return np.abs(self.samples[..., 0])
        return np.linalg.norm(self.samples, axis=-1)

    def raw_moment(self, p):
        """(1/N) sum |x_j|^p for p >= 1."""
        if not p >= 1:
            raise ValueError(f"moment order must be >= 1, got {p}")
        p = float(p)
        if p not in self._moments:
            norms = self.norms()
            if p == 2.0:
                val = np.mean(norms * norms, axis=-1)
            else:
                val = np.mean(norms**p, axis=-1)
            self._moments[p] = val
        return self._moments[p]

    def moment_norm(self, p):
        """||mu||_p = raw_moment(p) ** (1/p)."""
        return self.raw_moment(p) ** (1.0 / p)

    def mean(self):
        if not self._mean:
            self._mean.append(np.mean(self.samples, axis=-2))
        return self._mean[0]

    def kernel_integral(self, f):
        """(1/N) sum_j f(x_j); ``f`` maps an (..., d) array to (...)."""
        vals = np.asarray(f(self.samples), dtype=float)
        vals = np.broadcast_to(vals, self.samples.shape[:-1])
        _require_finite(vals, "kernel_integral")
        return np.mean(vals, axis=-1)

    def double_kernel_integral(self, f):
        """(1/N^2) sum_{j,k} f(x_j, x_k) over all ordered pairs."""
        y = self.samples[..., :, None, :]
        z = self.samples[..., None, :, :]
        vals = np.asarray(f(y, z), dtype=float)
        vals = np.broadcast_to(vals, self.samples.shape[:-1] + (self.n_atoms,))
        _require_finite(vals, "double_kernel_integral")
        return np.mean(vals, axis=(-2, -1))


def _require_finite(vals, what):
    if not np.all(np.isfinite(vals)):
        bad = np.argwhere(~np.isfinite(vals))[0]
        raise NonFiniteValueError(f"{what}: non-finite integrand at index {tuple(bad)}")


def raw_moment(mu, p):
    return mu.raw_moment(p)


def mean_vector(mu):
    return mu.mean()


def kernel_integral(mu, f):
    return mu.kernel_integral(f)


def double_kernel_integral(mu, f):
    return mu.double_kernel_integral(f)


def dirac(n_atoms, dim=1, at=0.0):
    """N atoms all placed at ``at``."""
    return EmpiricalMeasure(np.full((n_atoms, dim), at, dtype=float))


def _sorted_1d(mu, n_common):
    if mu.dim != 1:
        raise ValueError("exact Wasserstein distance is only implemented for d = 1; use coupling_bound")
    x = np.sort(mu.samples[..., 0], axis=-1)
    reps = n_common // mu.n_atoms
    return np.repeat(x, reps, axis=-1) if reps > 1 else x


def wasserstein_1d(p, mu, nu, max_refinement=1 << 22):
    """Exact W_p between 1-D empirical measures by pairing order statistics.

    Unequal atom counts are handled by splitting both measures into
    lcm(N, M) equal-mass atoms (the quantile coupling).
    """
    if not p >= 1:
        raise ValueError(f"p must be >= 1, got {p}")
    if mu.dim != 1 or nu.dim != 1:
        raise ValueError("exact Wasserstein distance is only implemented for d = 1; use coupling_bound")
    n_common = lcm(mu.n_atoms, nu.n_atoms)
    if n_common > max_refinement:
        raise ValueError(
            f"no common refinement within {max_refinement} atoms for sizes {mu.n_atoms} and {nu.n_atoms}"
        )
    x = _sorted_1d(mu, n_common)
    y = _sorted_1d(nu, n_common)
    gap = np.abs(x - y)
    if p == 1:
        return np.mean(gap, axis=-1)
    if p == 2:
        return np.sqrt(np.mean(gap * gap, axis=-1))
    return np.mean(gap**p, axis=-1) ** (1.0 / p)


def coupling_bound(p, paired_x, paired_y):
    """((1/N) sum_j |x_j - y_j|^p)^(1/p) for the given pairing; valid in any dimension."""
    x = _as_samples(paired_x)
    y = _as_samples(paired_y)
    if x.shape != y.shape:
        raise ValueError(f"paired samples differ in shape: {x.shape} vs {y.shape}")
    if x.shape[-1] == 1:
        gap = np.abs(x[..., 0] - y[..., 0])
    else:
        gap = np.linalg.norm(x - y, axis=-1)
    return np.mean(gap**p, axis=-1) ** (1.0 / p)
