"""Synthetic images used by tests, demos and the toy action dataset."""
from __future__ import annotations

import numpy as np
from scipy import ndimage


def bar_image(shape, angle, center=None, length=None, width=2.0, value=1.0, softness=0.5):
    """Anti-aliased bar along ``(cos angle, sin angle)`` in (column, row) axes."""
    h, w = shape
    if center is None:
        center = ((h - 1) / 2.0, (w - 1) / 2.0)
    if length is None:
        length = 0.8 * min(h, w)
    cy, cx = center
    y, x = np.mgrid[0:h, 0:w].astype(float)
    along = (x - cx) * np.cos(angle) + (y - cy) * np.sin(angle)
    across = -(x - cx) * np.sin(angle) + (y - cy) * np.cos(angle)
    inside_across = np.clip((width / 2.0 - np.abs(across)) / softness + 0.5, 0.0, 1.0)
    inside_along = np.clip((length / 2.0 - np.abs(along)) / softness + 0.5, 0.0, 1.0)
    return value * inside_across * inside_along


def cross_image(shape, angle, center=None, length=None, width=2.0, value=1.0):
    """Two orthogonal bars sharing a centre."""
    return np.maximum(
        bar_image(shape, angle, center, length, width, value),
        bar_image(shape, angle + np.pi / 2, center, length, width, value),
    )


def smooth_texture(shape, rng, sigma=2.0, scale=255.0):
    """Band-limited random texture rescaled to ``[0, scale]``."""
    noise = rng.standard_normal(shape)
    tex = ndimage.gaussian_filter(noise, sigma, mode="wrap")
    tex -= tex.min()
    tex /= tex.max()
    return scale * tex


def translate(image, dx, dy):
    """Shift content by ``(dx, dy)`` pixels with periodic wrap."""
    if float(dx).is_integer() and float(dy).is_integer():
        return np.roll(image, (int(dy), int(dx)), axis=(0, 1))
    return ndimage.shift(image, (dy, dx), order=3, mode="grid-wrap")
