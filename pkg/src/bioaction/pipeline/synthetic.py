"""Seeded toy action dataset: a bar moving up, down or right.

Each subject has its own bar length, thickness, contrast, background level
and speed; each sequence adds positional jitter and sensor noise.  Bars that
move up stay in the upper half of the frame and bars that move down in the
lower half, so single frames carry form information about the action as
well as the motion between frames.
"""
from __future__ import annotations

import numpy as np

from ..synthetic import bar_image
from .dataset import SequenceDataset, Video

ACTIONS = ("up", "down", "right")


def _subject_params(rng):
    return {
        "length": rng.uniform(16.0, 22.0),
        "width": rng.uniform(2.5, 3.5),
        "contrast": rng.uniform(140.0, 200.0),
        "background": rng.uniform(20.0, 50.0),
        "speed": rng.uniform(1.2, 1.6),
        "offset": rng.uniform(-3.0, 3.0),
    }


def _trajectory(action, shape, subject, n_frames, rng):
    """Bar angle and per-frame centres ``(row, col)``."""
    h, w = shape
    jitter = rng.uniform(-1.5, 1.5, size=2)
    travel = subject["speed"] * np.arange(n_frames)
    if action == "up":
        start = (0.42 * h + jitter[0], w / 2 + subject["offset"] + jitter[1])
        centres = [(start[0] - d, start[1]) for d in travel]
        angle = 0.0
    elif action == "down":
        start = (0.58 * h + jitter[0], w / 2 + subject["offset"] + jitter[1])
        centres = [(start[0] + d, start[1]) for d in travel]
        angle = 0.0
    elif action == "right":
        start = (h / 2 + subject["offset"] + jitter[0], 0.33 * w + jitter[1])
        centres = [(start[0], start[1] + d) for d in travel]
        angle = np.pi / 2
    else:
        raise ValueError(f"unknown action {action!r}")
    return angle, centres


def render_sequence(action, subject, shape=(48, 48), n_frames=10, noise=3.0, rng=None):
    """One sequence as 8-bit-valued float frames ``(T, H, W)``."""
    rng = np.random.default_rng() if rng is None else rng
    angle, centres = _trajectory(action, shape, subject, n_frames, rng)
    frames = []
    for c in centres:
        img = subject["background"] + subject["contrast"] * bar_image(
            shape, angle, center=c, length=subject["length"], width=subject["width"])
        img = img + noise * rng.standard_normal(shape)
        frames.append(np.clip(np.rint(img), 0, 255))
    return np.stack(frames)


def make_action_dataset(seed=0, n_subjects=5, n_sequences=3, n_frames=10, shape=(48, 48), noise=3.0,
                        actions=ACTIONS):
    """Videos for every (action, subject, sequence), in that nesting order."""
    root = np.random.SeedSequence(seed)
    subj_ss, seq_ss = root.spawn(2)
    subjects = [_subject_params(np.random.default_rng(s)) for s in subj_ss.spawn(n_subjects)]
    seq_streams = iter(seq_ss.spawn(len(actions) * n_subjects * n_sequences))
    videos = []
    for action in actions:
        for s, params in enumerate(subjects):
            for q in range(n_sequences):
                rng = np.random.default_rng(next(seq_streams))
                frames = render_sequence(action, params, shape, n_frames, noise, rng)
                videos.append(Video(frames, action, f"s{s}", f"{action}/s{s}/seq{q}"))
    return SequenceDataset(videos, target=(shape[1], shape[0]))
