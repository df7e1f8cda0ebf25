"""Gaussian fuzzification of the two pathways and max-product fusion.

Each class keeps a mean and deviation for its form score and for each of
the four rectified motion channels.  Memberships are products of Gaussians
``exp(-(x - mu)^2 / sigma^2)``; the class with the largest fused membership
wins.  The ``log_*`` variants return log memberships, which keep their
ordering when the plain values underflow.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, InsufficientDataError

MOTION_CHANNELS = ("x_pos", "x_neg", "y_pos", "y_neg")
SIGMA_FLOOR_FRACTION = 1e-6


@dataclass(frozen=True)
class ClassStats:
    classes: tuple
    form_mean: np.ndarray  # (C,)
    form_std: np.ndarray  # (C,)
    motion_mean: np.ndarray  # (C, 4)
    motion_std: np.ndarray  # (C, 4)

    def __post_init__(self):
        if np.any(self.form_std <= 0) or np.any(self.motion_std <= 0):
            raise ConfigurationError("all deviations must be positive")

    def index(self, label):
        return self.classes.index(label)

    def to_dict(self):
        return {
            "classes": list(self.classes),
            "form_mean": self.form_mean.tolist(), "form_std": self.form_std.tolist(),
            "motion_mean": self.motion_mean.tolist(), "motion_std": self.motion_std.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(d["classes"]), np.array(d["form_mean"], dtype=float), np.array(d["form_std"], dtype=float),
                   np.array(d["motion_mean"], dtype=float).reshape(-1, 4),
                   np.array(d["motion_std"], dtype=float).reshape(-1, 4))

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def _floored_std(values, floor):
    return np.maximum(np.std(values, axis=0, ddof=1), floor)


def fit_class_stats(features, floor_fraction=SIGMA_FLOOR_FRACTION):
    """Per-class sample means and deviations.

    ``features`` maps each class label to a list of ``(form_score, motion)``
    pairs with ``motion`` a 4-vector.  Deviations are floored at
    ``floor_fraction`` times the feature's range over the whole training set
    (times 1 if that range is 0).
    """
    if not features:
        raise InsufficientDataError("no classes given")
    classes = tuple(features)
    forms, motions = {}, {}
    for c in classes:
        rows = list(features[c])
        if len(rows) < 2:
            raise InsufficientDataError(f"class {c!r} has {len(rows)} sample(s); at least 2 are needed")
        forms[c] = np.array([float(r[0]) for r in rows])
        motions[c] = np.array([np.asarray(r[1], dtype=float).reshape(4) for r in rows])
    all_form = np.concatenate([forms[c] for c in classes])
    all_motion = np.concatenate([motions[c] for c in classes])
    form_range = np.ptp(all_form)
    motion_range = np.ptp(all_motion, axis=0)
    form_floor = floor_fraction * (form_range if form_range > 0 else 1.0)
    motion_floor = floor_fraction * np.where(motion_range > 0, motion_range, 1.0)
    return ClassStats(
        classes,
        np.array([forms[c].mean() for c in classes]),
        np.array([_floored_std(forms[c], form_floor) for c in classes]),
        np.array([motions[c].mean(axis=0) for c in classes]),
        np.array([_floored_std(motions[c], motion_floor) for c in classes]),
    )


def gaussian_membership(x, mu, sigma):
    sigma = np.asarray(sigma, dtype=float)
    if np.any(sigma <= 0):
        raise ConfigurationError("sigma must be positive")
    return np.exp(log_gaussian_membership(x, mu, sigma))


def log_gaussian_membership(x, mu, sigma):
    d = (np.asarray(x, dtype=float) - mu) / sigma
    return -(d * d)


def form_membership(form_scores, stats, log=False):
    """Per-class membership of the per-class form scores ``(..., C)``."""
    lg = log_gaussian_membership(form_scores, stats.form_mean, stats.form_std)
    return lg if log else np.exp(lg)


def motion_membership(motion, stats, log=False):
    """Product of the four channel memberships for every class.

    ``motion`` is a 4-vector (or ``(..., 4)``); the result has a trailing
    class axis.
    """
    f = np.asarray(motion, dtype=float)[..., None, :]
    lg = log_gaussian_membership(f, stats.motion_mean, stats.motion_std).sum(axis=-1)
    return lg if log else np.exp(lg)


def fuse(form, motion, log=False, form_classes=None, motion_classes=None):
    """Per-class product (or sum, in the log domain) of the two pathways."""
    if form_classes is not None and motion_classes is not None and tuple(form_classes) != tuple(motion_classes):
        raise ConfigurationError("form and motion memberships refer to different class sets")
    form = np.asarray(form, dtype=float)
    motion = np.asarray(motion, dtype=float)
    if form.shape[-1] != motion.shape[-1]:
        raise ConfigurationError(f"{form.shape[-1]} form classes vs {motion.shape[-1]} motion classes")
    return form + motion if log else form * motion


@dataclass(frozen=True)
class Decision:
    labels: np.ndarray  # class index per row
    ties: np.ndarray  # bool
    unclassifiable: np.ndarray  # bool: row had no membership support


def defuzzify(Y, log=False):
    """Row-wise argmax with ties to the lowest index.

    Rows that are all zero (all ``-inf`` in the log domain) carry no
    membership support; they get label 0 and the unclassifiable flag.
    """
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if Y.size == 0:
        raise ConfigurationError("empty membership matrix")
    labels = np.argmax(Y, axis=1)
    top = Y[np.arange(len(Y)), labels]
    ties = (Y == top[:, None]).sum(axis=1) > 1
    dead = np.isneginf(top) if log else top <= 0
    return Decision(labels, ties & ~dead, dead)
