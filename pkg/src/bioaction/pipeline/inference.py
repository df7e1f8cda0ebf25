"""Sequence classification and evaluation with a trained bundle."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .. import active_basis, fuzzy_fusion, optical_flow
from ..errors import ConfigurationError
from ..synergetic import DynamicsConfig, classify_batch
from .dataset import Video
from .features import FeatureExtractor


def dynamics_config(config):
    s = config.synergetic
    return DynamicsConfig(B=s.B, C=s.C, dt=s.dt, max_steps=s.max_steps, tolerance=s.tolerance)


def class_magnitudes(states, row_classes, n_classes):
    """Largest ``|eps|`` among each class's order parameters, ``(..., C)``."""
    mags = np.abs(states)
    out = np.zeros(mags.shape[:-1] + (n_classes,))
    for c in range(n_classes):
        out[..., c] = mags[..., row_classes == c].max(axis=-1)
    return out


@dataclass
class FrameEvidence:
    form: np.ndarray  # (T, C) per-class form scores after the dynamics
    motion: np.ndarray  # (T, 4) pooled rectified flow
    has_motion: np.ndarray  # (T,) False for frame 0
    valid: np.ndarray  # (T,) False where the frame pattern was constant
    regions: list  # (r0, c0, r1, c1) motion pooling region per frame (None for frame 0)


def frame_evidence(video, bundle, extractor=None, attention=None):
    """Form and motion features of every frame of ``video``."""
    if not isinstance(video, Video):
        video = Video(np.asarray(video, dtype=float), "?", "?")
    ex = extractor or FeatureExtractor(bundle.config)
    cfg = bundle.config
    t = len(video)
    n_classes = len(bundle.classes)
    patterns = ex.frame_patterns(video)
    valid = np.array([p is not None for p in patterns])
    form = np.zeros((t, n_classes))
    if valid.any():
        Q = np.stack([p for p in patterns if p is not None])
        lam = bundle.attention if attention is None else np.asarray(attention, dtype=float)
        _, final, _ = classify_batch(Q, bundle.bank, dynamics_config(cfg), attention=lam)
        form[valid] = class_magnitudes(final, bundle.row_classes, n_classes)
    motion = np.zeros((t, 4))
    has_motion = np.zeros(t, dtype=bool)
    regions = [None] * t
    if t > 1:
        channels = ex.motion_channels(video)
        margin = cfg.active_basis.region_margin
        stride = cfg.active_basis.scan_stride
        for i in range(1, t):
            pooled = ex.pooled(ex.energy(video.frames[i]))
            best = (-np.inf, None)
            for tpl in bundle.templates:
                if tpl.lattice[0] > pooled.shape[-2] or tpl.lattice[1] > pooled.shape[-1] or len(tpl) == 0:
                    continue
                score, loc = active_basis.scan_pooled(pooled, tpl, stride)
                if score > best[0]:
                    best = (score, tpl.bounding_box(loc, margin))
            region = best[1]
            feats = optical_flow.DirectionalFlowFeatures(*channels[i])
            motion[i] = optical_flow.pool_motion(feats, region)
            has_motion[i] = True
            regions[i] = region
    return FrameEvidence(form, motion, has_motion, valid, regions)


def fused_log_membership(evidence, stats):
    """Log fused membership per frame and class; frames without motion use form only."""
    log_form = fuzzy_fusion.form_membership(evidence.form, stats, log=True)
    log_motion = fuzzy_fusion.motion_membership(evidence.motion, stats, log=True)
    log_motion[~evidence.has_motion] = 0.0  # neutral element of the product
    fused = fuzzy_fusion.fuse(log_form, log_motion, log=True)
    fused[~evidence.valid] = -np.inf
    return fused


@dataclass
class SequenceResult:
    frame_labels: list  # class label per frame, None if unclassifiable
    video_label: object
    video_tie: bool = False
    unclassifiable: bool = False
    form_only: bool = False  # single-frame video: no motion evidence at all
    frame_ties: list = field(default_factory=list)
    membership: np.ndarray = field(default=None, repr=False)


def majority_vote(labels, classes):
    """Most frequent label (ties to the lowest class index); ``(label, tie)``."""
    counts = np.zeros(len(classes), dtype=int)
    for lab in labels:
        if lab is not None:
            counts[classes.index(lab)] += 1
    if counts.sum() == 0:
        return None, False
    top = counts.max()
    return classes[int(np.argmax(counts))], int((counts == top).sum()) > 1


def classify_sequence(frames, bundle, extractor=None, attention=None):
    """Per-frame labels and the majority-vote video label."""
    video = frames if isinstance(frames, Video) else Video(np.asarray(frames, dtype=float), "?", "?")
    ev = frame_evidence(video, bundle, extractor, attention)
    fused = fused_log_membership(ev, bundle.stats)
    dec = fuzzy_fusion.defuzzify(fused, log=True)
    labels = [None if dead else bundle.classes[int(k)] for k, dead in zip(dec.labels, dec.unclassifiable)]
    video_label, tie = majority_vote(labels, bundle.classes)
    return SequenceResult(labels, video_label, tie, video_label is None, len(video) == 1,
                          [bool(x) for x in dec.ties], fused)


@dataclass
class ConfusionMatrix:
    """Rows are true classes, columns predicted; unclassified items are counted apart."""

    classes: tuple
    counts: np.ndarray
    unclassified: np.ndarray

    @classmethod
    def from_labels(cls, classes, true, predicted):
        classes = tuple(classes)
        counts = np.zeros((len(classes), len(classes)), dtype=int)
        unclassified = np.zeros(len(classes), dtype=int)
        for t, p in zip(true, predicted):
            if t not in classes:
                raise ConfigurationError(f"true label {t!r} is not one of the model classes")
            if p is None:
                unclassified[classes.index(t)] += 1
            else:
                counts[classes.index(t), classes.index(p)] += 1
        return cls(classes, counts, unclassified)

    @property
    def total(self):
        return int(self.counts.sum() + self.unclassified.sum())

    @property
    def class_counts(self):
        return self.counts.sum(axis=1) + self.unclassified

    @property
    def accuracy(self):
        """Correctly classified items over all items."""
        return float(np.trace(self.counts) / self.total) if self.total else 0.0

    @property
    def per_class_accuracy(self):
        n = self.class_counts
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(n > 0, np.diag(self.counts) / np.maximum(n, 1), np.nan)

    def to_csv(self, path=None):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["true\\predicted", *self.classes, "unclassified"])
        for c, row, u in zip(self.classes, self.counts, self.unclassified):
            w.writerow([c, *[int(x) for x in row], int(u)])
        w.writerow(["accuracy", repr(self.accuracy)])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


@dataclass
class Evaluation:
    frames: ConfusionMatrix
    videos: ConfusionMatrix
    results: list


def evaluate(dataset, bundle, extractor=None, attention=None):
    """Frame-level and video-level confusion matrices over a labeled dataset."""
    ex = extractor or FeatureExtractor(bundle.config)
    true_f, pred_f, true_v, pred_v, results = [], [], [], [], []
    for video in dataset:
        res = classify_sequence(video, bundle, ex, attention)
        results.append(res)
        true_f += [video.label] * len(video)
        pred_f += res.frame_labels
        true_v.append(video.label)
        pred_v.append(res.video_label)
    return Evaluation(ConfusionMatrix.from_labels(bundle.classes, true_f, pred_f),
                      ConfusionMatrix.from_labels(bundle.classes, true_v, pred_v), results)
