"""Centroidal Voronoi tessellation of a box by sampling.

Voronoi cells are never built explicitly: uniform samples are assigned to
their nearest generator (ties to the lowest index) and cell centroids are
sample means.  The probabilistic hybrid blends each generator with its cell
centroid, ``(j1 g + j2 centroid) / (j1 + j2)``; ``j1 = 0`` is Lloyd's method.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError

_CHUNK = 65536


def as_bounds(bounds):
    """Validate per-dimension ``(low, high)`` pairs -> ``(N, 2)`` float array."""
    b = np.asarray(bounds, dtype=float)
    if b.ndim == 1 and b.size == 2:
        b = b[None, :]
    if b.ndim != 2 or b.shape[1] != 2 or b.shape[0] < 1:
        raise ConfigurationError(f"bounds must be a sequence of (low, high) pairs, got shape {b.shape}")
    if not np.all(np.isfinite(b)):
        raise ConfigurationError("bounds must be finite")
    if np.any(b[:, 0] > b[:, 1]):
        raise ConfigurationError("inverted bounds: low > high")
    return b


@dataclass
class GeneratorSet:
    points: np.ndarray  # (k, N)
    bounds: np.ndarray  # (N, 2)
    counts: np.ndarray = None  # MacQueen visit counts

    def __post_init__(self):
        self.bounds = as_bounds(self.bounds)
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))
        if self.points.shape[0] < 1:
            raise ConfigurationError("need at least one generator")
        if self.points.shape[1] != self.bounds.shape[0]:
            raise ConfigurationError("generator dimension does not match bounds")
        if self.counts is None:
            self.counts = np.ones(len(self.points), dtype=int)

    @property
    def k(self):
        return self.points.shape[0]

    def copy(self):
        return GeneratorSet(self.points.copy(), self.bounds.copy(), self.counts.copy())


@dataclass(frozen=True)
class CvtConfig:
    samples: int = None  # per iteration; None -> 64 * k
    iterations: int = 100
    j1: float = 1.0
    j2: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.samples is not None and self.samples < 1:
            raise ConfigurationError("samples must be >= 1")
        if self.iterations < 0:
            raise ConfigurationError("iterations must be >= 0")
        if self.j1 < 0 or self.j2 < 0 or self.j1 + self.j2 <= 0:
            raise ConfigurationError("averaging weights must be nonnegative with a positive sum")


def sample_box(bounds, n, rng):
    b = as_bounds(bounds)
    return b[:, 0] + (b[:, 1] - b[:, 0]) * rng.random((n, b.shape[0]))


def nearest(points, samples):
    """Index of the nearest generator for each sample; ties go to the lowest index."""
    samples = np.atleast_2d(samples)
    out = np.empty(len(samples), dtype=int)
    for s in range(0, len(samples), _CHUNK):
        chunk = samples[s:s + _CHUNK]
        d2 = ((chunk[:, None, :] - points[None, :, :]) ** 2).sum(axis=-1)
        out[s:s + _CHUNK] = np.argmin(d2, axis=1)
    return out


def cell_centroids(points, samples):
    """Per-generator sample centroid and sample count (centroid NaN if empty)."""
    idx = nearest(points, samples)
    k, n = points.shape
    counts = np.bincount(idx, minlength=k)
    sums = np.zeros((k, n))
    np.add.at(sums, idx, samples)
    with np.errstate(invalid="ignore", divide="ignore"):
        cent = sums / counts[:, None]
    return cent, counts


def jdg_step(gen, samples, j1=1.0, j2=1.0):
    """Blend each nonempty cell's generator with its sample centroid."""
    cent, counts = cell_centroids(gen.points, samples)
    new = gen.points.copy()
    hit = counts > 0
    if j1 == 0:
        new[hit] = cent[hit]
    else:
        new[hit] = (j1 * gen.points[hit] + j2 * cent[hit]) / (j1 + j2)
    new = np.clip(new, gen.bounds[:, 0], gen.bounds[:, 1])
    return GeneratorSet(new, gen.bounds, gen.counts.copy())


def lloyd_step(gen, samples, seed=0):
    """One Lloyd iteration with ``samples`` fresh uniform draws."""
    rng = np.random.default_rng(seed)
    return jdg_step(gen, sample_box(gen.bounds, samples, rng), 0.0, 1.0)


def macqueen_update(gen, sample):
    """Move the nearest generator to the running mean including ``sample``."""
    sample = np.asarray(sample, dtype=float).ravel()
    out = gen.copy()
    i = int(nearest(out.points, sample[None])[0])
    c = out.counts[i]
    out.points[i] = (c * out.points[i] + sample) / (c + 1)
    out.counts[i] = c + 1
    return out


def random_generators(bounds, k, rng):
    if k < 1:
        raise ConfigurationError("k must be >= 1")
    b = as_bounds(bounds)
    return GeneratorSet(sample_box(b, k, rng), b)


def jdg_cvt(bounds, k, config=CvtConfig(), initial=None):
    """Probabilistic Lloyd/MacQueen hybrid on a uniform box density.

    Sample batches come from ``default_rng(seed)``, so with ``initial`` given
    and ``j1 = 0`` a single iteration equals :func:`lloyd_step` with the same
    seed.  Without ``initial`` the starting generators come from a separate
    stream derived from the seed.
    """
    b = as_bounds(bounds)
    if initial is None:
        gen = random_generators(b, k, np.random.default_rng([config.seed, 1]))
    else:
        gen = initial.copy()
        if gen.k != k:
            raise ConfigurationError(f"initial set has {gen.k} generators, expected {k}")
    n = config.samples if config.samples is not None else 64 * k
    rng = np.random.default_rng(config.seed)
    for _ in range(config.iterations):
        gen = jdg_step(gen, sample_box(b, n, rng), config.j1, config.j2)
    return gen


def cvt_energy(gen, n=10000, seed=0, samples=None):
    """Monte Carlo quantization energy: mean squared distance to the nearest generator."""
    if samples is None:
        if n < 1:
            raise ConfigurationError("n must be >= 1")
        samples = sample_box(gen.bounds, n, np.random.default_rng(seed))
    samples = np.atleast_2d(samples)
    idx = nearest(gen.points, samples)
    return float(((samples - gen.points[idx]) ** 2).sum(axis=1).mean())


def cvt_energy_samples(gen, samples):
    """Per-sample squared distances (for noise estimates)."""
    samples = np.atleast_2d(samples)
    idx = nearest(gen.points, samples)
    return ((samples - gen.points[idx]) ** 2).sum(axis=1)
