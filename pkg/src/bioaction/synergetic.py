"""Synergetic neural network: prototypes, adjoints, order-parameter dynamics.

A test pattern ``q`` is projected onto the adjoint prototypes to give order
parameters ``eps = V+ q``, which then compete under

    d eps_k / dt = lam_k eps_k - B sum_{k' != k} eps_k'^2 eps_k - C sum_k' eps_k'^2 eps_k

until one survives.  Integration is forward Euler and runs in order
parameter space; it is vectorized over leading batch axes so that many
patterns (or many candidate attention vectors) evolve at once.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DegenerateInputError, InstabilityError, SingularityError

DIVERGENCE_LIMIT = 1e6


def normalize_pattern(pattern):
    """Zero mean, unit L2 norm."""
    p = np.asarray(pattern, dtype=float).ravel()
    p = p - p.mean()
    norm = np.linalg.norm(p)
    if norm <= 1e-12 * max(1.0, np.abs(pattern).max()):
        raise DegenerateInputError("cannot normalize a constant pattern")
    return p / norm


def build_adjoints(V, max_condition=1e10):
    """Moore-Penrose adjoint ``(V^T V)^-1 V^T`` of the prototype columns."""
    V = np.asarray(V, dtype=float)
    if V.ndim == 1:
        V = V[:, None]
    gram = V.T @ V
    cond = np.linalg.cond(gram)
    if not np.isfinite(cond) or cond > max_condition:
        raise SingularityError(f"prototype Gram matrix condition number {cond:.3g} exceeds {max_condition:.3g}")
    return np.linalg.solve(gram, V.T)


def selector_matrix(class_sizes):
    """Block row selector: row c has ones over the columns of class c."""
    sizes = [int(n) for n in class_sizes]
    if any(n < 1 for n in sizes):
        raise ConfigurationError("class sizes must be positive")
    E = np.zeros((len(sizes), sum(sizes)))
    start = 0
    for c, n in enumerate(sizes):
        E[c, start:start + n] = 1.0
        start += n
    return E


def build_adjoints_mpod(V, p1, p2, class_sizes, max_condition=1e12):
    """Penalized adjoint ``E (V^T V + P1 O + P2 I)^-1 V^T`` (one row per class)."""
    if p1 < 0 or p2 < 0:
        raise ConfigurationError("MPOD penalties must be nonnegative")
    V = np.asarray(V, dtype=float)
    if V.ndim == 1:
        V = V[:, None]
    E = selector_matrix(class_sizes)
    if E.shape[1] != V.shape[1]:
        raise ConfigurationError(f"class sizes sum to {E.shape[1]} but V has {V.shape[1]} columns")
    k = V.shape[1]
    reg = V.T @ V + p1 * np.ones((k, k)) + p2 * np.eye(k)
    cond = np.linalg.cond(reg)
    if not np.isfinite(cond) or cond > max_condition:
        raise SingularityError(f"penalized Gram matrix condition number {cond:.3g} exceeds {max_condition:.3g}")
    return E @ np.linalg.solve(reg, V.T)


@dataclass
class PrototypeBank:
    """Normalized prototypes (columns of ``V``) with their adjoint.

    In ``plain`` mode the adjoint has one row per prototype; in ``mpod`` mode
    one row per class.  ``row_labels`` gives the class of each adjoint row.
    """

    V: np.ndarray
    adjoint: np.ndarray
    labels: list
    mode: str = "plain"
    p1: float = 0.0
    p2: float = 0.0

    @classmethod
    def build(cls, patterns, labels, mode="plain", p1=0.1, p2=0.1):
        cols = [normalize_pattern(p) for p in patterns]
        if not cols:
            raise ConfigurationError("empty prototype set")
        V = np.stack(cols, axis=1)
        labels = list(labels)
        if len(labels) != V.shape[1]:
            raise ConfigurationError("one label per prototype required")
        if mode == "plain":
            return cls(V, build_adjoints(V), labels, "plain", 0.0, 0.0)
        if mode == "mpod":
            classes, sizes = _class_blocks(labels)
            return cls(V, build_adjoints_mpod(V, p1, p2, sizes), labels, "mpod", float(p1), float(p2))
        raise ConfigurationError(f"unknown adjoint mode {mode!r}")

    @property
    def row_labels(self):
        if self.mode == "plain":
            return list(self.labels)
        return _class_blocks(self.labels)[0]

    @property
    def n_rows(self):
        return self.adjoint.shape[0]

    def to_dict(self):
        return {
            "mode": self.mode, "p1": self.p1, "p2": self.p2,
            "columns": [{"label": lab, "values": self.V[:, j].tolist()} for j, lab in enumerate(self.labels)],
            "adjoint": self.adjoint.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        V = np.array([c["values"] for c in d["columns"]], dtype=float).T
        return cls(V, np.array(d["adjoint"], dtype=float), [c["label"] for c in d["columns"]],
                   d["mode"], float(d["p1"]), float(d["p2"]))

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def _class_blocks(labels):
    """Distinct labels in order of appearance and their (contiguous) block sizes."""
    classes, sizes = [], []
    for lab in labels:
        if classes and classes[-1] == lab:
            sizes[-1] += 1
        elif lab in classes:
            raise ConfigurationError("MPOD mode needs prototypes grouped contiguously by class")
        else:
            classes.append(lab)
            sizes.append(1)
    return classes, sizes


def order_parameters(q, bank):
    """``eps = V+ q``; ``q`` may carry leading batch axes (``(..., n)``)."""
    return np.asarray(q, dtype=float) @ bank.adjoint.T


@dataclass(frozen=True)
class DynamicsConfig:
    attention: tuple = None  # per-prototype lambda; None -> all ones
    B: float = 1.0
    C: float = 1.0
    dt: float = 0.01
    max_steps: int = 100_000
    tolerance: float = 1e-8
    tie_tolerance: float = 1e-9

    def __post_init__(self):
        if not self.dt > 0 or not self.tolerance > 0:
            raise ConfigurationError("dt and tolerance must be positive")
        if self.B <= 0 or self.C <= 0:
            raise ConfigurationError("B and C must be positive")
        if self.attention is not None and np.any(np.asarray(self.attention) <= 0):
            raise ConfigurationError("attention parameters must be positive")

    def lambdas(self, m):
        if self.attention is None:
            return np.ones(m)
        lam = np.asarray(self.attention, dtype=float)
        if lam.shape[-1] != m:
            raise ConfigurationError(f"{lam.shape[-1]} attention parameters for {m} order parameters")
        return lam


@dataclass
class OrderParameterTrajectory:
    states: np.ndarray  # (steps + 1, M) when recorded, else just the final state
    winner: int | None
    converged: bool
    steps: int
    status: str = "converged"

    @property
    def final(self):
        return self.states[-1]


def rate(eps, lam, B, C):
    """Right-hand side of the order-parameter equation."""
    sq = eps * eps
    total = sq.sum(axis=-1, keepdims=True)
    return eps * (lam - B * (total - sq) - C * total)


def evolve_batch(eps0, lam, config):
    """Integrate many independent systems at once.

    ``eps0`` has shape ``(..., M)`` and ``lam`` broadcasts against it.
    Returns ``(final_state, converged_mask, steps_taken)``; each system stops
    moving once its own convergence criterion holds.
    """
    eps = np.array(eps0, dtype=float, copy=True)
    lam = np.asarray(lam, dtype=float)
    active = np.ones(eps.shape[:-1], dtype=bool)
    steps = np.zeros(eps.shape[:-1], dtype=int)
    B, C, dt, tol = config.B, config.C, config.dt, config.tolerance
    for _ in range(config.max_steps):
        d = rate(eps, lam, B, C) * dt
        active &= np.abs(d).max(axis=-1) >= tol
        if not active.any():
            break
        eps = np.where(active[..., None], eps + d, eps)
        steps += active
        if np.abs(eps).max() > DIVERGENCE_LIMIT:
            raise InstabilityError(f"order parameters diverged (|eps| > {DIVERGENCE_LIMIT:g}); reduce dt")
    converged = ~active
    return eps, converged, steps


def evolve_fixed(eps0, lam, config, steps):
    """Exactly ``steps`` Euler steps for a batch ``(..., M)``, no convergence test."""
    eps = np.array(eps0, dtype=float, copy=True)
    gain = config.dt * np.asarray(lam, dtype=float)
    b = config.dt * config.B
    bc = config.dt * (config.B + config.C)
    sq = np.empty_like(eps)
    for step in range(1, steps + 1):
        np.multiply(eps, eps, out=sq)
        total = sq.sum(axis=-1, keepdims=True)
        # eps * (1 + dt (lam + B eps^2 - (B + C) sum eps^2))
        sq *= b
        sq += gain
        sq -= bc * total
        sq += 1.0
        eps *= sq
        if step % 64 == 0 and np.abs(eps).max() > DIVERGENCE_LIMIT:
            raise InstabilityError(f"order parameters diverged (|eps| > {DIVERGENCE_LIMIT:g}); reduce dt")
    return eps


def _winner(final, tie_tol):
    mags = np.abs(final)
    order = np.argsort(-mags, kind="stable")
    if mags.size > 1 and mags[order[0]] - mags[order[1]] <= tie_tol * max(mags[order[0]], 1e-300):
        return None
    return int(order[0])


def evolve(eps0, config=DynamicsConfig(), record=False):
    """Forward-Euler trajectory for a single order-parameter vector.

    Convergence means ``max_k |d eps_k/dt| * dt < tolerance``.  A state whose
    two largest magnitudes are tied (a symmetric saddle) is not a decision:
    integration continues and ends with ``timeout`` status.
    """
    eps = np.array(eps0, dtype=float).ravel()
    if not np.all(np.isfinite(eps)):
        raise ConfigurationError("initial order parameters must be finite")
    lam = config.lambdas(eps.size)
    history = [eps.copy()] if record else None
    for step in range(1, config.max_steps + 1):
        d = rate(eps, lam, config.B, config.C) * config.dt
        if np.abs(d).max() < config.tolerance:
            win = _winner(eps, config.tie_tolerance)
            if win is not None:
                states = np.array(history) if record else eps[None]
                return OrderParameterTrajectory(states, win, True, step - 1, "converged")
        eps = eps + d
        if np.abs(eps).max() > DIVERGENCE_LIMIT:
            raise InstabilityError(f"order parameters diverged (|eps| > {DIVERGENCE_LIMIT:g}); reduce dt")
        if record:
            history.append(eps.copy())
    states = np.array(history) if record else eps[None]
    return OrderParameterTrajectory(states, None, False, config.max_steps, "timeout")


@dataclass
class Classification:
    label: object
    trajectory: OrderParameterTrajectory
    initial: np.ndarray = field(repr=False, default=None)


def classify(q, bank, config=DynamicsConfig(), record=False):
    """Normalize ``q``, project on the bank, and let the order parameters compete."""
    eps0 = order_parameters(normalize_pattern(q), bank)
    traj = evolve(eps0, config, record)
    label = None if traj.winner is None else bank.row_labels[traj.winner]
    return Classification(label, traj, eps0)


def classify_batch(Q, bank, config=DynamicsConfig(), attention=None):
    """Classify the rows of ``Q`` together.

    ``attention`` may be ``(M,)`` or ``(P, M)``; the latter evaluates ``P``
    attention vectors at once and returns arrays with a leading ``P`` axis.
    Returns ``(winner_index, final_state, converged)``; unresolved rows get
    winner ``-1``.
    """
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    Qn = np.stack([normalize_pattern(q) for q in Q])
    eps0 = order_parameters(Qn, bank)
    lam = config.lambdas(bank.n_rows) if attention is None else np.asarray(attention, dtype=float)
    if lam.ndim == 2:
        eps0 = np.broadcast_to(eps0, (lam.shape[0],) + eps0.shape)
        lam = lam[:, None, :]
    final, converged, _ = evolve_batch(eps0, lam, config)
    mags = np.abs(final)
    srt = np.sort(mags, axis=-1)
    top = srt[..., -1]
    tied = (top - srt[..., -2] <= config.tie_tolerance * np.maximum(top, 1e-300)) if mags.shape[-1] > 1 else False
    winners = np.where(converged & ~tied, np.argmax(mags, axis=-1), -1)
    return winners, final, converged


def melt_class(patterns, p1=0.1, p2=0.1):
    """Melt several patterns of one class into a single normalized template."""
    V = np.stack([normalize_pattern(p) for p in patterns], axis=1)
    row = build_adjoints_mpod(V, p1, p2, [V.shape[1]])[0]
    return normalize_pattern(row)


def melt(groups, p1=0.1, p2=0.1):
    """Two-stage melting of per-snippet pattern groups into one template.

    ``groups[a]`` holds the patterns (one per subject) of snippet ``a``.
    Stage one melts each group into a snippet prototype; stage two melts
    those prototypes into the final template.
    """
    if not groups or any(len(g) == 0 for g in groups):
        raise ConfigurationError("melt needs at least one non-empty snippet group")
    snippet_protos = []
    for a, group in enumerate(groups):
        try:
            snippet_protos.append(melt_class(group, p1, p2))
        except SingularityError as exc:
            raise SingularityError(f"melting stage 1 (snippet {a}): {exc}") from exc
    try:
        return melt_class(snippet_protos, p1, p2)
    except SingularityError as exc:
        raise SingularityError(f"melting stage 2: {exc}") from exc
