"""Quantum-behaved particle swarm optimization, with a classic PSO baseline.

Both steppers minimize.  Each particle owns an independent random stream
spawned from the swarm seed, so the draws a particle sees do not depend on
evaluation order.  Fitness functions take a single position ``(N,)`` unless
``vectorized=True``, in which case they receive all positions ``(M, N)`` and
return ``(M,)``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import cvt
from .errors import ConfigurationError


@dataclass(frozen=True)
class AlphaSchedule:
    """Contraction-expansion coefficient: linear from ``start`` to ``end``, or constant."""

    start: float = 1.0
    end: float = 0.5
    constant: bool = False

    def __post_init__(self):
        if self.start < 0 or self.end < 0:
            raise ConfigurationError("alpha must be nonnegative")

    def value(self, iteration, total):
        if self.constant or total <= 1:
            return self.start
        frac = min(iteration, total - 1) / (total - 1)
        return self.start + (self.end - self.start) * frac


@dataclass
class SwarmState:
    positions: np.ndarray  # (M, N)
    personal_best: np.ndarray  # (M, N)
    personal_fitness: np.ndarray  # (M,)
    bounds: np.ndarray  # (N, 2)
    rngs: list
    seed: int
    mode: str = "quantum"
    velocities: np.ndarray = None
    alpha: float = 1.0
    c1: float = 2.0
    c2: float = 2.0
    inertia: float = 1.0
    iteration: int = 0
    skipped: np.ndarray = field(default=None)  # per-particle flag: last fitness non-finite

    @property
    def M(self):
        return self.positions.shape[0]

    @property
    def N(self):
        return self.positions.shape[1]

    @property
    def global_index(self):
        return int(np.argmin(self.personal_fitness))

    @property
    def global_best(self):
        return self.personal_best[self.global_index]

    @property
    def global_fitness(self):
        return float(self.personal_fitness[self.global_index])

    @property
    def mean_best(self):
        return self.personal_best.mean(axis=0)


def _evaluate(fitness, X, vectorized):
    if vectorized:
        f = np.asarray(fitness(X), dtype=float).reshape(-1)
        if f.shape[0] != X.shape[0]:
            raise ConfigurationError("vectorized fitness must return one value per particle")
        return f
    return np.array([float(fitness(x)) for x in X])


def init_swarm(bounds, M, seed=0, initializer="uniform", mode="quantum", fitness=None,
               vectorized=False, c1=2.0, c2=2.0, inertia=1.0, cvt_config=None, seed_positions=None):
    """Place ``M`` particles in the box and set personal bests to the start positions.

    ``seed_positions`` (``(k, N)``, clamped to the box) replace the first
    ``k`` particles.  With ``fitness`` given the bests are evaluated
    immediately; otherwise their fitness is ``inf`` until the first
    :func:`update_bests`.
    """
    b = cvt.as_bounds(bounds)
    if M < 2:
        raise ConfigurationError("a swarm needs at least two particles")
    if mode not in ("quantum", "classic"):
        raise ConfigurationError(f"unknown swarm mode {mode!r}")
    ss = np.random.SeedSequence(seed)
    init_ss, *particle_ss = ss.spawn(M + 1)
    if initializer == "uniform":
        X = cvt.sample_box(b, M, np.random.default_rng(init_ss))
    elif initializer == "cvt":
        config = cvt_config or cvt.CvtConfig(seed=int(init_ss.generate_state(1)[0]))
        X = cvt.jdg_cvt(b, M, config).points
    else:
        raise ConfigurationError(f"unknown initializer {initializer!r}")
    if seed_positions is not None:
        extra = np.atleast_2d(np.asarray(seed_positions, dtype=float))
        if extra.shape[1] != b.shape[0] or extra.shape[0] > M:
            raise ConfigurationError("seed positions must be (k <= M, N)")
        X[:len(extra)] = np.clip(extra, b[:, 0], b[:, 1])
    swarm = SwarmState(
        positions=X.copy(), personal_best=X.copy(), personal_fitness=np.full(M, np.inf),
        bounds=b, rngs=[np.random.default_rng(s) for s in particle_ss], seed=seed, mode=mode,
        velocities=np.zeros_like(X) if mode == "classic" else None,
        c1=c1, c2=c2, inertia=inertia, skipped=np.zeros(M, dtype=bool),
    )
    if fitness is not None:
        f = _evaluate(fitness, X, vectorized)
        ok = np.isfinite(f)
        swarm.personal_fitness[ok] = f[ok]
        swarm.skipped = ~ok
    return swarm


def update_bests(swarm, fitness, vectorized=False, values=None):
    """Keep the better of each particle's position and its previous best.

    Particles with non-finite fitness are left alone and flagged in
    ``swarm.skipped``.
    """
    f = _evaluate(fitness, swarm.positions, vectorized) if values is None else np.asarray(values, dtype=float)
    ok = np.isfinite(f)
    better = ok & (f < swarm.personal_fitness)
    swarm.personal_best[better] = swarm.positions[better]
    swarm.personal_fitness[better] = f[better]
    swarm.skipped = ~ok
    if not ok.all():
        warnings.warn(f"{int((~ok).sum())} particle(s) had non-finite fitness; their bests were not updated",
                      RuntimeWarning, stacklevel=2)
    return swarm


def _clamp(swarm):
    np.clip(swarm.positions, swarm.bounds[:, 0], swarm.bounds[:, 1], out=swarm.positions)


def classic_pso_step(swarm, fitness, vectorized=False):
    """Velocity/position update with per-dimension uniform draws, then best update."""
    if swarm.velocities is None:
        raise ConfigurationError("classic step needs a swarm with velocities")
    G = swarm.global_best.copy()
    for i, rng in enumerate(swarm.rngs):
        r = rng.random(swarm.N)
        R = rng.random(swarm.N)
        x = swarm.positions[i]
        swarm.velocities[i] = (swarm.inertia * swarm.velocities[i]
                               + swarm.c1 * r * (swarm.personal_best[i] - x)
                               + swarm.c2 * R * (G - x))
        swarm.positions[i] = x + swarm.velocities[i]
    _clamp(swarm)
    update_bests(swarm, fitness, vectorized)
    swarm.iteration += 1
    return swarm


def local_attractor(P, G, rng):
    """Per-dimension random convex combination of personal and global best."""
    P = np.asarray(P, dtype=float)
    G = np.asarray(G, dtype=float)
    if P.shape != G.shape:
        raise ConfigurationError("personal and global best dimensions differ")
    phi = rng.random(P.shape)
    return phi * P + (1.0 - phi) * G


def qpso_step(swarm, fitness, vectorized=False, alpha=None):
    """Jump every particle to ``p +/- alpha |X - C| ln(1/u)``, clamp, update bests.

    ``C`` is the mean of the personal bests before the move.  ``alpha``
    defaults to ``swarm.alpha``.
    """
    a = swarm.alpha if alpha is None else float(alpha)
    G = swarm.global_best.copy()
    C = swarm.mean_best
    for i, rng in enumerate(swarm.rngs):
        p = local_attractor(swarm.personal_best[i], G, rng)
        u = 1.0 - rng.random(swarm.N)  # (0, 1]
        sign = np.where(rng.random(swarm.N) < 0.5, 1.0, -1.0)
        swarm.positions[i] = p + sign * a * np.abs(swarm.positions[i] - C) * np.log(1.0 / u)
    _clamp(swarm)
    update_bests(swarm, fitness, vectorized)
    swarm.iteration += 1
    return swarm


@dataclass(frozen=True)
class OptimizerConfig:
    M: int = 20
    iterations: int = 500
    mode: str = "quantum"
    alpha: AlphaSchedule = AlphaSchedule()
    seed: int = 0
    initializer: str = "uniform"
    c1: float = 2.0
    c2: float = 2.0
    inertia: float = 1.0

    def __post_init__(self):
        if self.M < 2:
            raise ConfigurationError("M must be >= 2")
        if self.iterations < 0:
            raise ConfigurationError("iterations must be >= 0")
        if self.mode not in ("quantum", "classic"):
            raise ConfigurationError(f"unknown mode {self.mode!r}")


@dataclass
class OptimizationResult:
    position: np.ndarray
    fitness: float
    history: list  # global best fitness after each iteration (index 0 = initial swarm)
    swarm: SwarmState = field(repr=False, default=None)


def optimize(fitness, bounds, config=OptimizerConfig(), vectorized=False, callback=None, seed_positions=None,
             cvt_config=None):
    """Minimize ``fitness`` over the box; returns the best position and G history."""
    swarm = init_swarm(bounds, config.M, config.seed, config.initializer, config.mode,
                       fitness=fitness, vectorized=vectorized, c1=config.c1, c2=config.c2,
                       inertia=config.inertia, cvt_config=cvt_config, seed_positions=seed_positions)
    history = [swarm.global_fitness]
    for n in range(config.iterations):
        if config.mode == "quantum":
            swarm.alpha = config.alpha.value(n, config.iterations)
            qpso_step(swarm, fitness, vectorized)
        else:
            classic_pso_step(swarm, fitness, vectorized)
        history.append(swarm.global_fitness)
        if callback is not None:
            callback(swarm)
    return OptimizationResult(swarm.global_best.copy(), swarm.global_fitness, history, swarm)


def sphere(x):
    x = np.asarray(x, dtype=float)
    return np.sum(x * x, axis=-1)


def rosenbrock(x):
    x = np.asarray(x, dtype=float)
    return np.sum(100.0 * (x[..., 1:] - x[..., :-1] ** 2) ** 2 + (1.0 - x[..., :-1]) ** 2, axis=-1)


BENCHMARKS = {"sphere": sphere, "rosenbrock": rosenbrock}
