"""Active basis templates: shared sketch learning, weights, scoring, scanning.

A template is a short list of Gabor elements, each allowed to shift a few
pixels along its normal and one orientation step when it is matched
against an image.  The response an element extracts is therefore the local
maximum of the normalized energy over that perturbation window.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np
from scipy.special import logsumexp

from . import gabor
from .errors import ConfigurationError, DimensionError


@dataclass(frozen=True)
class BasisElement:
    x: int
    y: int
    orientation: int
    scale: int


@dataclass(frozen=True)
class Perturbation:
    """Allowed element deformation: shift along the normal and orientation steps."""

    location: int = 3
    orientation: int = 1

    def __post_init__(self):
        if self.location < 0 or self.orientation < 0:
            raise ConfigurationError("perturbation bounds must be nonnegative")


@dataclass(frozen=True)
class ActiveBasisTemplate:
    elements: tuple
    weights: np.ndarray
    log_partition: np.ndarray
    lattice: tuple
    dictionary: dict
    saturation: float = gabor.DEFAULT_SATURATION
    perturbation: Perturbation = Perturbation()
    scores: np.ndarray = field(default_factory=lambda: np.zeros(0))
    truncated: bool = False

    def __post_init__(self):
        n = len(self.elements)
        if len(self.weights) != n or len(self.log_partition) != n:
            raise ConfigurationError("elements, weights and log-partition values must have equal length")

    def __len__(self):
        return len(self.elements)

    def bounding_box(self, offset=(0, 0), margin=0):
        """Half-open ``(row0, col0, row1, col1)`` around the placed elements."""
        if not self.elements:
            return (offset[0], offset[1], offset[0] + self.lattice[0], offset[1] + self.lattice[1])
        ys = [e.y for e in self.elements]
        xs = [e.x for e in self.elements]
        return (
            offset[0] + min(ys) - margin, offset[1] + min(xs) - margin,
            offset[0] + max(ys) + margin + 1, offset[1] + max(xs) + margin + 1,
        )

    def to_dict(self):
        return {
            "lattice": list(self.lattice),
            "dictionary": dict(self.dictionary),
            "saturation": self.saturation,
            "perturbation": {"location": self.perturbation.location, "orientation": self.perturbation.orientation},
            "truncated": self.truncated,
            "elements": [
                {
                    "x": e.x, "y": e.y, "orientation": e.orientation, "scale": e.scale,
                    "weight": float(w), "log_partition": float(z),
                    "score": None if np.isnan(sc) else float(sc),
                }
                for e, w, z, sc in zip(self.elements, self.weights, self.log_partition,
                                       _pad(self.scores, len(self.elements)))
            ],
        }

    @classmethod
    def from_dict(cls, d):
        els = d["elements"]
        scores = [e["score"] for e in els]
        return cls(
            elements=tuple(BasisElement(e["x"], e["y"], e["orientation"], e["scale"]) for e in els),
            weights=np.array([e["weight"] for e in els], dtype=float),
            log_partition=np.array([e["log_partition"] for e in els], dtype=float),
            lattice=tuple(d["lattice"]),
            dictionary=dict(d["dictionary"]),
            saturation=float(d["saturation"]),
            perturbation=Perturbation(**d["perturbation"]),
            scores=np.array([np.nan if s is None else s for s in scores], dtype=float),
            truncated=bool(d.get("truncated", False)),
        )


def _pad(a, n):
    a = [float(v) for v in a]
    return a + [np.nan] * (n - len(a))


def save_template(template, path):
    with open(path, "w") as fh:
        json.dump(template.to_dict(), fh, indent=1)


def load_template(path):
    with open(path) as fh:
        return ActiveBasisTemplate.from_dict(json.load(fh))


@lru_cache(maxsize=16)
def _dictionary(n_orientations, n_scales, kernel_extent, aspect):
    return gabor.build_dictionary(n_orientations, n_scales, kernel_extent, aspect)


def dictionary_from_dict(d):
    return _dictionary(d["n_orientations"], d["n_scales"], d["kernel_extent"], d.get("aspect", 0.6))


# ---------------------------------------------------------------------------
# perturbation pooling

def _shift(a, dy, dx):
    """``out[..., y, x] = a[..., y + dy, x + dx]``, zero outside."""
    out = np.zeros_like(a)
    h, w = a.shape[-2:]
    ys, yd = (slice(dy, h), slice(0, h - dy)) if dy >= 0 else (slice(0, h + dy), slice(-dy, h))
    xs, xd = (slice(dx, w), slice(0, w - dx)) if dx >= 0 else (slice(0, w + dx), slice(-dx, w))
    out[..., yd, xd] = a[..., ys, xs]
    return out


def normal_offsets(theta, b):
    """Distinct integer ``(dy, dx)`` steps along the normal of ``theta``, |t| <= b."""
    nx, ny = -np.sin(theta), np.cos(theta)
    seen = []
    for t in range(-b, b + 1):
        step = (int(round(t * ny)), int(round(t * nx)))
        if step not in seen:
            seen.append(step)
    return seen


def _orientation_band(o, steps, n):
    return sorted({(o + d) % n for d in range(-steps, steps + 1)})


def perturbed_max(energy, n_orientations, perturbation):
    """Local maximum of ``energy`` over each element's perturbation window."""
    angles = np.arange(n_orientations) * np.pi / n_orientations
    out = np.zeros_like(energy)
    for o in range(n_orientations):
        steps = normal_offsets(angles[o], perturbation.location)
        for o2 in _orientation_band(o, perturbation.orientation, n_orientations):
            for dy, dx in steps:
                np.maximum(out[o], _shift(energy[o2], dy, dx), out=out[o])
    return out


def _local_argmax(energy, el, n_orientations, perturbation):
    """Perturbed position ``(orientation, y, x)`` where element ``el`` peaks."""
    h, w = energy.shape[-2:]
    theta = el.orientation * np.pi / n_orientations
    best, where = -np.inf, (el.orientation, el.y, el.x)
    for o2 in _orientation_band(el.orientation, perturbation.orientation, n_orientations):
        for dy, dx in normal_offsets(theta, perturbation.location):
            y, x = el.y + dy, el.x + dx
            if 0 <= y < h and 0 <= x < w and energy[o2, el.scale, y, x] > best:
                best, where = energy[o2, el.scale, y, x], (o2, y, x)
    return where


def _inhibit(arr, o, y, x, radius, max_angle, n_orientations):
    """Zero entries near ``(y, x)`` at orientations within ``max_angle`` of ``o``."""
    h, w = arr.shape[-2:]
    yy, xx = np.ogrid[0:h, 0:w]
    disc = (yy - y) ** 2 + (xx - x) ** 2 < radius ** 2
    for o2 in range(n_orientations):
        d = abs(o2 - o) % n_orientations
        d = min(d, n_orientations - d) * np.pi / n_orientations
        if d < max_angle - 1e-12:
            arr[o2][:, disc] = 0


def orientation_distance(o1, o2, n_orientations):
    d = abs(o1 - o2) % n_orientations
    return min(d, n_orientations - d) * np.pi / n_orientations


# ---------------------------------------------------------------------------
# learning

@dataclass(frozen=True)
class SketchResult:
    template: ActiveBasisTemplate
    stacks: list  # per-image ResponseStack before inhibition
    residuals: list  # per-image energy after inhibition


def shared_sketch(images, dictionary, n_elements, perturbation=Perturbation(), saturation=gabor.DEFAULT_SATURATION,
                  inhibition_radius=None, inhibition_angle=np.pi / 4, return_details=False):
    """Greedy selection of elements shared by all training images.

    Each pick maximizes the summed perturbed-max response over the images;
    afterwards the neighbourhood it explains is inhibited, both in the
    candidate lattice and in every image's residual energy.  Weights are left
    at zero; see :func:`estimate_weights`.
    """
    images = [np.asarray(im, dtype=float) for im in images]
    if not images:
        raise ConfigurationError("need at least one training image")
    if n_elements < 1:
        raise ConfigurationError("n_elements must be >= 1")
    shape = images[0].shape
    if any(im.shape != shape for im in images):
        raise DimensionError("training images must share one shape")
    if inhibition_radius is None:
        inhibition_radius = dictionary.kernel_extent / 2.0
    no = dictionary.n_orientations

    stacks = [gabor.compute_responses(im, dictionary, saturation) for im in images]
    residuals = [s.energy.copy() for s in stacks]
    allowed = np.ones_like(residuals[0], dtype=bool)
    elements, scores = [], []
    truncated = False
    for _ in range(n_elements):
        total = sum(perturbed_max(r, no, perturbation) for r in residuals)
        total = np.where(allowed, total, -np.inf)
        best = total.max()
        if not np.isfinite(best) or best <= 0:
            truncated = True
            break
        # pooling makes whole perturbation windows tie; prefer the candidate
        # whose own (unpooled) energy is largest
        tied = total >= best - 1e-9 * abs(best)
        own = np.where(tied, sum(residuals), -np.inf)
        o, s, y, x = np.unravel_index(int(np.argmax(own)), total.shape)
        el = BasisElement(int(x), int(y), int(o), int(s))
        elements.append(el)
        scores.append(float(best))
        _inhibit(allowed, el.orientation, el.y, el.x, inhibition_radius, inhibition_angle, no)
        for r in residuals:
            o2, y2, x2 = _local_argmax(r, el, no, perturbation)
            _inhibit(r, o2, y2, x2, inhibition_radius, inhibition_angle, no)
    if truncated:
        warnings.warn(f"shared_sketch: only {len(elements)} of {n_elements} elements could be selected",
                      RuntimeWarning, stacklevel=2)
    n = len(elements)
    template = ActiveBasisTemplate(
        elements=tuple(elements), weights=np.zeros(n), log_partition=np.zeros(n), lattice=tuple(shape),
        dictionary=dictionary.to_dict(), saturation=float(saturation), perturbation=perturbation,
        scores=np.array(scores), truncated=truncated,
    )
    if return_details:
        return SketchResult(template, stacks, residuals)
    return template


class BackgroundModel:
    """Reference distribution of perturbed-max responses on white noise.

    ``log_partition(delta)`` is the log moment-generating function
    ``log E[exp(delta * r)]`` and ``moment(delta)`` the tilted mean; both are
    tabulated on a grid and linearly interpolated.
    """

    def __init__(self, samples, delta_max=3.0, grid_size=301):
        self.samples = np.sort(np.asarray(samples, dtype=float).ravel())
        if self.samples.size == 0:
            raise ConfigurationError("empty background sample")
        self.delta_max = float(delta_max)
        self.grid = np.linspace(0.0, self.delta_max, grid_size)
        self.log_partition_table = np.array([self.exact_log_partition(d) for d in self.grid])
        self.moment_table = np.array([self.exact_moment(d) for d in self.grid])
        # np.interp inverse requires strictly increasing abscissae
        self.moment_table = np.maximum.accumulate(self.moment_table)

    @classmethod
    def from_noise(cls, dictionary, saturation=gabor.DEFAULT_SATURATION, perturbation=Perturbation(),
                   pool_size=50, image_size=None, max_samples=20000, seed=0, **kw):
        rng = np.random.default_rng(seed)
        if image_size is None:
            image_size = max(32, 2 * dictionary.kernel_extent)
        margin = dictionary.kernel_extent // 2
        values = []
        for _ in range(pool_size):
            noise = rng.standard_normal((image_size, image_size))
            energy = gabor.compute_responses(noise, dictionary, saturation).energy
            pooled = perturbed_max(energy, dictionary.n_orientations, perturbation)
            values.append(pooled[..., margin:-margin, margin:-margin].ravel())
        values = np.concatenate(values)
        if values.size > max_samples:
            values = rng.choice(values, size=max_samples, replace=False)
        return cls(values, **kw)

    def exact_log_partition(self, delta):
        return float(logsumexp(delta * self.samples) - np.log(self.samples.size))

    def exact_moment(self, delta):
        w = delta * self.samples
        w = np.exp(w - w.max())
        return float(np.dot(w, self.samples) / w.sum())

    @property
    def mean(self):
        return self.moment_table[0]

    def log_partition(self, delta):
        return np.interp(delta, self.grid, self.log_partition_table)

    def moment(self, delta):
        return np.interp(delta, self.grid, self.moment_table)

    def solve(self, mean):
        """Weight whose tilted mean equals ``mean``; returns ``(delta, capped)``."""
        if mean <= self.moment_table[0]:
            return 0.0, False
        if mean >= self.moment_table[-1]:
            return self.delta_max, True
        table, idx = np.unique(self.moment_table, return_index=True)
        return float(np.interp(mean, table, self.grid[idx])), False


def element_responses(energy_max, template, offset=(0, 0)):
    """Perturbed-max response of each element placed at ``offset``."""
    h, w = energy_max.shape[-2:]
    out = np.zeros(len(template))
    for i, e in enumerate(template.elements):
        y, x = offset[0] + e.y, offset[1] + e.x
        if 0 <= y < h and 0 <= x < w:
            out[i] = energy_max[e.orientation, e.scale, y, x]
    return out


def _pooled(image, template):
    d = dictionary_from_dict(template.dictionary)
    energy = gabor.compute_responses(image, d, template.saturation).energy
    return perturbed_max(energy, d.n_orientations, template.perturbation)


def estimate_weights(template, images, background):
    """Maximum-likelihood weights by moment matching against ``background``.

    Returns ``(weights, log_partition)``.  Elements whose training mean lies
    beyond the reach of the background pool get the capped weight.
    """
    images = [np.asarray(im, dtype=float) for im in images]
    if not images:
        raise ConfigurationError("need at least one training image")
    means = np.mean([element_responses(_pooled(im, template), template) for im in images], axis=0)
    weights = np.zeros(len(template))
    logz = np.zeros(len(template))
    capped = 0
    for i, m in enumerate(means):
        weights[i], c = background.solve(m)
        capped += c
        logz[i] = background.log_partition(weights[i]) if weights[i] > 0 else 0.0
    if capped:
        warnings.warn(f"estimate_weights: {capped} element weight(s) capped at {background.delta_max}",
                      RuntimeWarning, stacklevel=2)
    return weights, logz


def learn_template(images, dictionary, n_elements, background=None, perturbation=Perturbation(),
                   saturation=gabor.DEFAULT_SATURATION, **kw):
    """Shared sketch followed by weight estimation."""
    template = shared_sketch(images, dictionary, n_elements, perturbation, saturation, **kw)
    if background is None:
        background = BackgroundModel.from_noise(dictionary, saturation, perturbation)
    weights, logz = estimate_weights(template, images, background)
    return replace(template, weights=weights, log_partition=logz)


def match_score(image, template, offset=(0, 0)):
    """Log-likelihood ratio score of ``template`` placed at ``offset``."""
    image = np.asarray(image, dtype=float)
    h, w = template.lattice
    if image.shape[0] < h + offset[0] or image.shape[1] < w + offset[1]:
        raise DimensionError(f"image {image.shape} cannot hold template lattice {template.lattice} at {offset}")
    r = element_responses(_pooled(image, template), template, offset)
    return float(np.sum(template.weights * r - template.log_partition))


def max_pool_scan(image, template, stride=1):
    """Best placement of ``template`` over the image lattice.

    Returns ``(score, (row, col))``; ties go to the first placement in
    row-major scan order.
    """
    image = np.asarray(image, dtype=float)
    h, w = template.lattice
    if image.shape[0] < h or image.shape[1] < w:
        raise DimensionError(f"image {image.shape} smaller than template lattice {template.lattice}")
    return scan_pooled(_pooled(image, template), template, stride)


def pooled_energy(image, dictionary, saturation=gabor.DEFAULT_SATURATION, perturbation=Perturbation()):
    """Perturbed-max energy of an image, reusable across templates that share these settings."""
    energy = gabor.compute_responses(image, dictionary, saturation).energy
    return perturbed_max(energy, dictionary.n_orientations, perturbation)


def scan_pooled(pooled, template, stride=1):
    """:func:`max_pool_scan` on precomputed perturbed-max energy."""
    h, w = template.lattice
    H, W = pooled.shape[-2:]
    if H < h or W < w:
        raise DimensionError(f"image {(H, W)} smaller than template lattice {template.lattice}")
    if stride < 1:
        raise ConfigurationError("stride must be >= 1")
    nr, nc = H - h + 1, W - w + 1
    scores = np.zeros(((nr - 1) // stride + 1, (nc - 1) // stride + 1))
    for e, wt in zip(template.elements, template.weights):
        block = pooled[e.orientation, e.scale, e.y:e.y + nr:stride, e.x:e.x + nc:stride]
        scores += wt * block
    scores -= template.log_partition.sum()
    r, c = np.unravel_index(int(np.argmax(scores)), scores.shape)
    return float(scores[r, c]), (int(r) * stride, int(c) * stride)
