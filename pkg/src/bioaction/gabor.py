"""Gabor wavelet dictionary and normalized orientation-energy responses.

Orientation angles follow the element (edge) direction: an element at angle
``theta`` responds to a bar running along ``(cos theta, sin theta)`` in
``(x, y) = (column, row)`` coordinates.  The sinusoidal carrier therefore
oscillates along the element normal ``(-sin theta, cos theta)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import fftconvolve

from .errors import ConfigurationError, DimensionError

DEFAULT_SATURATION = 20.0

# Full width at half maximum of a Gaussian, in units of sigma.
_FWHM = 2.0 * np.sqrt(2.0 * np.log(2.0))


def gabor_pair(theta, omega, extent, aspect=0.6):
    """Return the zero-mean, unit-norm (cosine, sine) kernels for one element.

    The envelope's half-amplitude width along the element equals half the
    kernel extent; across the element it is ``aspect`` times that.
    """
    sigma_along = (extent / 2.0) / _FWHM
    sigma_across = aspect * sigma_along
    half = extent // 2
    y, x = np.mgrid[-half:half + 1, -half:half + 1].astype(float)
    along = x * np.cos(theta) + y * np.sin(theta)
    across = -x * np.sin(theta) + y * np.cos(theta)
    envelope = np.exp(-0.5 * ((along / sigma_along) ** 2 + (across / sigma_across) ** 2))
    waves = (np.cos(omega * across), np.sin(omega * across))
    pair = []
    for carrier in waves:
        k = envelope * carrier
        k = k - k.mean()
        k = k / np.linalg.norm(k)
        pair.append(k)
    # equal gain on the carrier wave makes cos^2 + sin^2 phase invariant
    gains = [float(np.sum(k * w)) for k, w in zip(pair, waves)]
    big = int(np.argmax(gains))
    if gains[big] > 0 and gains[1 - big] > 0:
        pair[big] = _shrink_gain(pair[big], waves[big] - waves[big].mean(), gains[1 - big])
    return pair[0], pair[1]


def _shrink_gain(k, wave, target):
    """Unit-norm ``k`` with its response to ``wave`` lowered to ``target``.

    Only the component along ``wave`` is reduced; the orthogonal remainder is
    scaled up to keep the norm, so the change is the smallest possible.
    """
    unit = wave / np.linalg.norm(wave)
    along = float(np.sum(k * unit))
    rest = k - along * unit
    new_along = target / np.linalg.norm(wave)
    r = np.linalg.norm(rest)
    if r == 0 or abs(new_along) > 1:
        return k
    return new_along * unit + rest * (np.sqrt(1.0 - new_along ** 2) / r)


@dataclass(frozen=True)
class GaborDictionary:
    """Bank of paired cosine/sine Gabor kernels, orientation x scale."""

    n_orientations: int
    n_scales: int
    kernel_extent: int
    aspect: float = 0.6
    kernels: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if int(self.n_orientations) != self.n_orientations or self.n_orientations < 1:
            raise ConfigurationError(f"n_orientations must be a positive integer, got {self.n_orientations}")
        if int(self.n_scales) != self.n_scales or self.n_scales < 1:
            raise ConfigurationError(f"n_scales must be a positive integer, got {self.n_scales}")
        if self.kernel_extent < 3 or self.kernel_extent % 2 == 0:
            raise ConfigurationError(f"kernel_extent must be odd and >= 3, got {self.kernel_extent}")
        if not self.aspect > 0:
            raise ConfigurationError("aspect must be positive")
        bank = np.empty((self.n_orientations, self.n_scales, 2, self.kernel_extent, self.kernel_extent))
        for k, theta in enumerate(self.angles):
            for i, omega in enumerate(self.frequencies):
                bank[k, i, 0], bank[k, i, 1] = gabor_pair(theta, omega, self.kernel_extent, self.aspect)
        bank.setflags(write=False)
        object.__setattr__(self, "kernels", bank)

    @property
    def angles(self):
        return np.arange(self.n_orientations) * np.pi / self.n_orientations

    @property
    def frequencies(self):
        return np.sqrt(2.0) / np.arange(1, self.n_scales + 1)

    @property
    def count(self):
        return self.n_orientations * self.n_scales

    def kernel(self, orientation, scale):
        """(cosine, sine) kernel pair for one element."""
        return self.kernels[orientation, scale, 0], self.kernels[orientation, scale, 1]

    def to_dict(self):
        return {
            "n_orientations": self.n_orientations,
            "n_scales": self.n_scales,
            "kernel_extent": self.kernel_extent,
            "aspect": self.aspect,
        }


def build_dictionary(n_orientations=16, n_scales=2, kernel_extent=17, aspect=0.6):
    return GaborDictionary(n_orientations, n_scales, kernel_extent, aspect)


def convolve(image, dictionary):
    """Raw responses of ``image`` to every kernel.

    Returns an array of shape ``(n_orientations, n_scales, 2, H, W)`` where the
    third axis holds the cosine and sine phase.  Each map is the full
    zero-padded convolution cropped back to the image size.
    """
    image = np.asarray(image, dtype=float)
    if image.ndim != 2:
        raise DimensionError(f"expected a 2-D image, got shape {image.shape}")
    ext = dictionary.kernel_extent
    if image.shape[0] < ext or image.shape[1] < ext:
        raise DimensionError(f"image {image.shape} smaller than kernel extent {ext}")
    out = np.empty((dictionary.n_orientations, dictionary.n_scales, 2) + image.shape)
    for k in range(dictionary.n_orientations):
        for i in range(dictionary.n_scales):
            for p in range(2):
                out[k, i, p] = fftconvolve(image, dictionary.kernels[k, i, p], mode="same")
    if not np.any(image):
        out[...] = 0.0  # fftconvolve leaves rounding noise around zero
    return out


@dataclass(frozen=True)
class ResponseStack:
    """Normalized energy maps, shape ``(n_orientations, n_scales, H, W)``."""

    energy: np.ndarray
    saturation: float

    @property
    def shape(self):
        return self.energy.shape[-2:]


def normalize_responses(raw, saturation=DEFAULT_SATURATION, threshold=0.0):
    """Phase energy, global whitening, saturating sigmoid, threshold.

    ``raw`` is the output of :func:`convolve`.  The whitening step divides by
    the mean energy of the whole stack; an all-zero stack stays all zero.
    """
    if not saturation > 0:
        raise ConfigurationError(f"saturation must be positive, got {saturation}")
    raw = np.asarray(raw, dtype=float)
    energy = raw[:, :, 0] ** 2 + raw[:, :, 1] ** 2
    mean = energy.mean()
    if mean > 0:
        energy = energy / mean
    energy = saturation * np.tanh(energy / saturation)
    if threshold > 0:
        energy[energy < threshold] = 0.0
    return ResponseStack(energy=energy, saturation=float(saturation))


def compute_responses(image, dictionary, saturation=DEFAULT_SATURATION, threshold=0.0):
    """Mean-centred image -> :class:`ResponseStack`.

    Centring removes the border response that zero padding would otherwise
    give to a constant offset.
    """
    image = np.asarray(image, dtype=float)
    return normalize_responses(convolve(image - image.mean(), dictionary), saturation, threshold)
