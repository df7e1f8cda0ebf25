"""Model training for both scenarios and attention-parameter tuning.

Scenario 1 melts one template per action from representative frames of
equal temporal snippets.  Scenario 2 keeps four key-frame prototypes per
action.  Both then tune the attention parameters and fit the fuzzy class
statistics on the training frames.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .. import active_basis, cvt, qpso
from ..errors import InsufficientDataError
from ..fuzzy_fusion import fit_class_stats
from ..synergetic import PrototypeBank, evolve_fixed, melt, normalize_pattern, order_parameters
from .bundle import ModelBundle
from .dataset import _natural_key
from .features import FeatureExtractor
from .inference import class_magnitudes, dynamics_config, frame_evidence


# ---------------------------------------------------------------------------
# attention parameters

@dataclass
class AttentionResult:
    lambdas: np.ndarray
    balanced: bool
    fitness: float
    history: list = field(default_factory=list)
    balanced_fitness: float = None

    def info(self):
        return {"balanced": self.balanced, "fitness": self.fitness, "balanced_fitness": self.balanced_fitness,
                "history": list(self.history)}


def margin_fitness(eps0, labels, row_classes, n_classes, config, horizon):
    """Vectorized fitness: minus the mean normalized margin after ``horizon`` steps.

    The margin of a frame is ``(g_true - max_other g) / sum g`` where ``g_c``
    is the largest order-parameter magnitude of class ``c``.  It lies in
    ``[-1, 1]`` and stays informative before the dynamics fully settle.
    """
    eps0 = np.asarray(eps0, dtype=float)
    labels = np.asarray(labels)
    idx = np.arange(len(labels))

    def fitness(L):
        L = np.atleast_2d(L)
        start = np.broadcast_to(eps0, (L.shape[0],) + eps0.shape)
        final = evolve_fixed(start, L[:, None, :], config, int(horizon))
        g = class_magnitudes(final, row_classes, n_classes)
        true = g[:, idx, labels]
        other = g.copy()
        other[:, idx, labels] = -np.inf
        total = g.sum(axis=-1)
        margin = (true - other.max(axis=-1)) / np.maximum(total, 1e-300)
        return -margin.mean(axis=-1)

    return fitness


def tune_attention(bank, patterns, labels, classes, config, seed=0):
    """QPSO search of the attention parameters on labeled training patterns.

    ``labels`` are class indices into ``classes``.  With the balanced flag
    set, every parameter is 1 and no search runs.
    """
    a = config.attention
    m = bank.n_rows
    ones = np.ones(m)
    if a.balanced:
        return AttentionResult(ones, True, float("nan"))
    row_classes = np.array([list(classes).index(c) for c in bank.row_labels])
    eps0 = order_parameters(np.stack([normalize_pattern(p) for p in patterns]), bank)
    fit = margin_fitness(eps0, labels, row_classes, len(classes), dynamics_config(config), a.horizon_steps)
    ss = np.random.SeedSequence([seed, 0xA77])
    opt_seed, cvt_seed = (int(s.generate_state(1)[0]) for s in ss.spawn(2))
    c = config.cvt
    cvt_config = cvt.CvtConfig(samples=c.samples, iterations=c.iterations, j1=c.j1, j2=c.j2, seed=cvt_seed)
    opt = qpso.OptimizerConfig(
        M=a.particles, iterations=a.iterations, mode="quantum", seed=opt_seed, initializer=a.initializer,
        alpha=qpso.AlphaSchedule(a.alpha_start, a.alpha_end, a.alpha_constant),
    )
    bounds = [(a.lambda_min, a.lambda_max)] * m
    seeds = ones[None] if a.include_balanced else None
    res = qpso.optimize(fit, bounds, opt, vectorized=True, seed_positions=seeds, cvt_config=cvt_config)
    balanced_fitness = float(fit(ones[None])[0])
    return AttentionResult(res.position, False, float(res.fitness), [float(h) for h in res.history],
                           balanced_fitness)


# ---------------------------------------------------------------------------
# shared pieces

def _videos_by_class(dataset, classes):
    out = {c: [] for c in classes}
    for v in dataset:
        out[v.label].append(v)
    for c in classes:
        out[c].sort(key=lambda v: (_natural_key(v.subject), _natural_key(v.source), v.mirrored))
    return out


class _TemplateLearner:
    def __init__(self, extractor, config, report):
        self.ex = extractor
        self.config = config
        self.report = report
        ab = config.active_basis
        self.background = active_basis.BackgroundModel.from_noise(
            extractor.dictionary, extractor.saturation, extractor.perturbation, pool_size=ab.background_pool,
            seed=config.training.seed, delta_max=ab.delta_max)

    def learn(self, frames, name):
        ab = self.config.active_basis
        shape = self.ex.template_shape(frames[0].shape)
        crops = [self.ex.crop_on_energy(f, shape) for f in frames]
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            tpl = active_basis.learn_template(
                crops, self.ex.dictionary, ab.n_elements, background=self.background,
                perturbation=self.ex.perturbation, saturation=self.ex.saturation,
                inhibition_radius=ab.inhibition_radius, inhibition_angle=ab.inhibition_angle)
        for w in caught:
            self.report.append(f"template {name}: {w.message}")
        return tpl


def _training_frames(videos_by_class, classes, extractor):
    patterns, labels = [], []
    for ci, c in enumerate(classes):
        for v in videos_by_class[c]:
            for p in extractor.frame_patterns(v):
                if p is not None:
                    patterns.append(p)
                    labels.append(ci)
    return patterns, np.array(labels, dtype=int)


def _finish(scenario, classes, templates, template_labels, bank, dataset, config, extractor, report):
    by_class = _videos_by_class(dataset, classes)
    patterns, labels = _training_frames(by_class, classes, extractor)
    att = tune_attention(bank, patterns, labels, classes, config, seed=config.training.seed)
    provisional = _Provisional(classes, templates, bank, att.lambdas, config)
    features = {c: [] for c in classes}
    for ci, c in enumerate(classes):
        for v in by_class[c]:
            ev = frame_evidence(v, provisional, extractor)
            for t in range(len(v)):
                if ev.valid[t] and ev.has_motion[t]:
                    features[c].append((ev.form[t, ci], ev.motion[t]))
    stats = fit_class_stats(features, config.fuzzy.sigma_floor_fraction)
    return ModelBundle(scenario, classes, templates, template_labels, bank, att.lambdas, stats, config,
                       att.info(), report)


class _Provisional:
    """Just enough of a bundle for :func:`frame_evidence` before the statistics exist."""

    def __init__(self, classes, templates, bank, attention, config):
        self.classes = tuple(classes)
        self.templates = templates
        self.bank = bank
        self.attention = np.asarray(attention, dtype=float)
        self.config = config
        self.row_classes = np.array([self.classes.index(c) for c in bank.row_labels])


def _chosen_subjects(videos, n_subjects, action):
    subjects = []
    for v in videos:
        if v.subject not in subjects:
            subjects.append(v.subject)
    if len(subjects) < n_subjects:
        raise InsufficientDataError(
            f"action {action!r} has {len(subjects)} subject(s); scenario 1 needs {n_subjects}")
    return subjects[:n_subjects]


# ---------------------------------------------------------------------------
# scenarios

def train_scenario1(dataset, config, extractor=None):
    """One melted form template per action."""
    ex = extractor or FeatureExtractor(config)
    t = config.training
    classes = tuple(dataset.classes)
    by_class = _videos_by_class(dataset, classes)
    report = []
    learner = _TemplateLearner(ex, config, report)
    finals, templates = [], []
    A = t.snippets
    for c in classes:
        subjects = _chosen_subjects(by_class[c], t.subjects, c)
        groups = [[] for _ in range(A)]
        reps = []
        for s in subjects:
            video = next(v for v in by_class[c] if v.subject == s)
            n = len(video)
            if n < A:
                raise InsufficientDataError(f"action {c!r}, subject {s!r}: {n} frames for {A} snippets")
            pats = ex.frame_patterns(video)
            for a in range(A):
                lo, hi = (a * n) // A, ((a + 1) * n) // A
                mid = (lo + hi - 1) // 2
                if pats[mid] is None:
                    raise InsufficientDataError(f"action {c!r}, subject {s!r}: blank representative frame {mid}")
                groups[a].append(pats[mid])
                reps.append(video.frames[mid])
        finals.append(melt(groups, config.synergetic.p1, config.synergetic.p2))
        templates.append(learner.learn(reps, c))
    bank = PrototypeBank.build(finals, classes, mode="plain")
    return _finish(1, classes, templates, list(classes), bank, dataset, config, ex, report)


def key_frame_indices(n, quantiles):
    return [min(n - 1, int(np.floor(q * n))) for q in quantiles]


def train_scenario2(dataset, config, extractor=None):
    """Key-frame prototypes and templates, one per quantile per action."""
    ex = extractor or FeatureExtractor(config)
    qs = config.training.key_quantiles
    classes = tuple(dataset.classes)
    by_class = _videos_by_class(dataset, classes)
    report = []
    learner = _TemplateLearner(ex, config, report)
    protos, labels, templates = [], [], []
    for c in classes:
        usable = []
        for v in by_class[c]:
            if len(v) < len(qs):
                report.append(f"skipped {v.source or v.key}: {len(v)} frames, need {len(qs)}")
            else:
                usable.append(v)
        if not usable:
            raise InsufficientDataError(f"action {c!r} has no sequence with at least {len(qs)} frames")
        for qi, q in enumerate(qs):
            frames, pats = [], []
            for v in usable:
                k = key_frame_indices(len(v), qs)[qi]
                p = ex.frame_patterns(v)[k]
                if p is not None:
                    frames.append(v.frames[k])
                    pats.append(p)
            if not pats:
                raise InsufficientDataError(f"action {c!r}: every key frame at quantile {q} is blank")
            protos.append(normalize_pattern(np.mean(pats, axis=0)))
            labels.append(c)
            templates.append(learner.learn(frames, f"{c}@{q}"))
    bank = PrototypeBank.build(protos, labels, mode="plain")
    return _finish(2, classes, templates, list(labels), bank, dataset, config, ex, report)


def train(dataset, config, extractor=None):
    if config.training.scenario == 1:
        return train_scenario1(dataset, config, extractor)
    return train_scenario2(dataset, config, extractor)

