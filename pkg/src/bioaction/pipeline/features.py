"""Per-frame form and motion features shared by training and classification."""
from __future__ import annotations

import numpy as np

from .. import active_basis, gabor, optical_flow
from ..errors import DegenerateInputError
from ..synergetic import normalize_pattern


class FeatureExtractor:
    """Holds the dictionary, perturbation and flow settings of one configuration."""

    def __init__(self, config):
        self.config = config
        g = config.gabor
        self.dictionary = gabor.build_dictionary(g.n_orientations, g.n_scales, g.kernel_extent, g.aspect)
        ab = config.active_basis
        self.perturbation = active_basis.Perturbation(ab.location_perturbation, ab.orientation_perturbation)
        self.flow_params = optical_flow.FlowParams(**vars(config.flow))

    @property
    def saturation(self):
        return self.config.gabor.saturation

    def energy(self, frame):
        return gabor.compute_responses(frame, self.dictionary, self.saturation, self.config.gabor.threshold).energy

    def pooled(self, energy):
        return active_basis.perturbed_max(energy, self.dictionary.n_orientations, self.perturbation)

    def pattern(self, energy):
        """Block-max downsampled energy, flattened and normalized; ``None`` if constant."""
        b = self.config.synergetic.pattern_block
        o, s, h, w = energy.shape
        hh, ww = -(-h // b) * b, -(-w // b) * b
        padded = np.zeros((o, s, hh, ww))
        padded[:, :, :h, :w] = energy
        blocks = padded.reshape(o, s, hh // b, b, ww // b, b).max(axis=(3, 5))
        try:
            return normalize_pattern(blocks)
        except DegenerateInputError:
            return None

    def template_shape(self, frame_shape):
        ts = self.config.active_basis.template_shape
        if ts is not None:
            return min(int(ts[0]), frame_shape[0]), min(int(ts[1]), frame_shape[1])
        k = self.dictionary.kernel_extent
        return (max(k, min(frame_shape[0], (2 * frame_shape[0]) // 3)),
                max(k, min(frame_shape[1], (2 * frame_shape[1]) // 3)))

    def crop_on_energy(self, frame, shape, energy=None):
        """Window of ``shape`` centred on the frame's energy centroid, kept inside the frame."""
        e = (self.energy(frame) if energy is None else energy).sum(axis=(0, 1))
        h, w = frame.shape
        total = e.sum()
        if total > 0:
            rows, cols = np.mgrid[0:h, 0:w]
            cy, cx = (rows * e).sum() / total, (cols * e).sum() / total
        else:
            cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
        r0 = int(np.clip(np.rint(cy - (shape[0] - 1) / 2.0), 0, h - shape[0]))
        c0 = int(np.clip(np.rint(cx - (shape[1] - 1) / 2.0), 0, w - shape[1]))
        return frame[r0:r0 + shape[0], c0:c0 + shape[1]]

    def motion_channels(self, video):
        """Rectified flow channels ``(T, 4, H, W)``; frame 0 has no motion (zeros).

        Results are cached on the video for these flow settings.
        """
        key = ("flow", tuple(sorted(vars(self.config.flow).items())))
        if key not in video.cache:
            t, h, w = video.frames.shape
            out = np.zeros((t, 4, h, w))
            for i in range(1, t):
                flow = optical_flow.estimate_flow(video.frames[i - 1], video.frames[i], self.flow_params)
                out[i] = optical_flow.rectify_flow(flow).stack()
            video.cache[key] = out
        return video.cache[key]

    def frame_patterns(self, video):
        """Pattern vector (or ``None``) for every frame, cached on the video."""
        key = ("pattern", tuple(sorted(vars(self.config.gabor).items())), self.config.synergetic.pattern_block)
        if key not in video.cache:
            video.cache[key] = [self.pattern(self.energy(f)) for f in video.frames]
        return video.cache[key]
