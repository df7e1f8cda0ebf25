"""Variational optical flow and half-wave rectified motion channels.

The estimator minimizes

    E(w) = sum psi(I2(x + w) - I1(x)) + rho * E_sym + xi * sum psi(|grad u|^2 + |grad v|^2)

with the Charbonnier penalty ``psi(s^2) = sqrt(s^2 + eps^2)``, by coarse to
fine warping.  At each level, outer iterations re-warp the second frame and
linearize the data term; inner iterations re-weight the penalties (lagged
nonlinearity) and solve the resulting sparse linear system for the flow
increment.  An outer step that would raise the true objective is shortened
by backtracking, so the recorded objective never increases.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy import ndimage
from scipy.sparse.linalg import cg, spsolve

from .errors import ConfigurationError, DimensionError

MIN_LEVEL_SIZE = 16
DIRECT_SOLVE_LIMIT = 2 * 80 * 80  # unknowns
_DERIV = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
_FLO_MAGIC = 202021.25


@dataclass(frozen=True)
class FlowParams:
    smoothness: float = 0.02
    symmetric: float = 0.0
    pyramid_levels: int = 4
    outer_iterations: int = 6
    inner_iterations: int = 2
    epsilon: float = 1e-3
    downsample: float = 0.5
    max_backtracks: int = 6

    def __post_init__(self):
        if self.pyramid_levels < 1 or self.outer_iterations < 1 or self.inner_iterations < 1:
            raise ConfigurationError("pyramid levels and iteration counts must be >= 1")
        if self.smoothness < 0 or self.symmetric < 0:
            raise ConfigurationError("smoothness and symmetric weights must be nonnegative")
        if not self.epsilon > 0:
            raise ConfigurationError("epsilon must be positive")
        if not 0 < self.downsample < 1:
            raise ConfigurationError("downsample factor must lie in (0, 1)")


@dataclass
class FlowField:
    u: np.ndarray
    v: np.ndarray
    objective_history: list = field(default_factory=list)
    backward: "FlowField | None" = None

    @property
    def shape(self):
        return self.u.shape

    def magnitude(self):
        return np.hypot(self.u, self.v)


@dataclass(frozen=True)
class DirectionalFlowFeatures:
    x_pos: np.ndarray
    x_neg: np.ndarray
    y_pos: np.ndarray
    y_neg: np.ndarray

    def stack(self):
        return np.stack([self.x_pos, self.x_neg, self.y_pos, self.y_neg])


# ---------------------------------------------------------------------------
# helpers

def _charb(s2, eps):
    return np.sqrt(s2 + eps * eps)


def _derivatives(img):
    ix = ndimage.correlate1d(img, _DERIV, axis=1, mode="nearest")
    iy = ndimage.correlate1d(img, _DERIV, axis=0, mode="nearest")
    return ix, iy


class _Warper:
    """Cubic-spline sampling of an image and its derivatives at displaced points."""

    def __init__(self, img):
        self.shape = img.shape
        ix, iy = _derivatives(img)
        self.coeffs = [ndimage.spline_filter(a, order=3, mode="nearest") for a in (img, ix, iy)]
        h, w = img.shape
        self.yy, self.xx = np.mgrid[0:h, 0:w].astype(float)

    def sample(self, u, v, which=(0, 1, 2)):
        coords = np.array([self.yy + v, self.xx + u])
        return [ndimage.map_coordinates(self.coeffs[k], coords, order=3, mode="nearest", prefilter=False)
                for k in which]


def _diff_operators(h, w):
    """Forward differences with Neumann boundary, as sparse (N x N) matrices."""
    def d1(n):
        main = -np.ones(n)
        main[-1] = 0.0
        return sp.diags([main, np.ones(n - 1)], [0, 1], shape=(n, n), format="csr")
    dx = sp.kron(sp.identity(h), d1(w), format="csr")
    dy = sp.kron(d1(h), sp.identity(w), format="csr")
    return dx, dy


def _smooth_sq(u, v):
    gx = lambda a: np.diff(a, axis=1, append=a[:, -1:])  # noqa: E731
    gy = lambda a: np.diff(a, axis=0, append=a[-1:, :])  # noqa: E731
    return gx(u) ** 2 + gy(u) ** 2 + gx(v) ** 2 + gy(v) ** 2


class _Level:
    """One pyramid level for one flow direction."""

    def __init__(self, i1, i2, params):
        self.i1 = i1
        self.params = params
        self.warper = _Warper(i2)
        self.ix1, self.iy1 = _derivatives(i1)
        self.dx, self.dy = _diff_operators(*i1.shape)

    def data_residual(self, u, v):
        (i2w,) = self.warper.sample(u, v, which=(0,))
        return i2w - self.i1

    def own_energy(self, u, v):
        p = self.params
        data = _charb(self.data_residual(u, v) ** 2, p.epsilon).sum()
        smooth = _charb(_smooth_sq(u, v), p.epsilon).sum()
        return data + p.smoothness * smooth

    def increment(self, u, v, target=None):
        """Solve the linearized, re-weighted problem for ``(du, dv)``."""
        p = self.params
        eps = p.epsilon
        i2w, ix2, iy2 = self.warper.sample(u, v)
        ix = 0.5 * (ix2 + self.ix1)
        iy = 0.5 * (iy2 + self.iy1)
        it = i2w - self.i1
        n = u.size
        du = np.zeros_like(u)
        dv = np.zeros_like(v)
        for _ in range(p.inner_iterations):
            r = it + ix * du + iy * dv
            a = (1.0 / _charb(r ** 2, eps)).ravel()
            b = 1.0 / _charb(_smooth_sq(u + du, v + dv), eps).ravel()
            lap = p.smoothness * (self.dx.T @ sp.diags(b) @ self.dx + self.dy.T @ sp.diags(b) @ self.dy)
            axx = a * ix.ravel() ** 2
            ayy = a * iy.ravel() ** 2
            axy = a * (ix * iy).ravel()
            rhs_u = -a * (ix * it).ravel() - lap @ u.ravel()
            rhs_v = -a * (iy * it).ravel() - lap @ v.ravel()
            diag_extra = np.zeros(n)
            if target is not None and p.symmetric > 0:
                tu, tv = target
                diag_extra = np.full(n, p.symmetric)
                rhs_u -= diag_extra * (u - tu).ravel()
                rhs_v -= diag_extra * (v - tv).ravel()
            # small Tikhonov term keeps textureless regions well posed
            reg = 1e-9
            system = sp.bmat([
                [lap + sp.diags(axx + diag_extra + reg), sp.diags(axy)],
                [sp.diags(axy), lap + sp.diags(ayy + diag_extra + reg)],
            ], format="csr")
            sol = _solve_spd(system, np.concatenate([rhs_u, rhs_v]), np.concatenate([du.ravel(), dv.ravel()]))
            du = sol[:n].reshape(u.shape)
            dv = sol[n:].reshape(v.shape)
        return du, dv


def _solve_spd(system, rhs, x0):
    """Direct factorization for small systems, else Jacobi-preconditioned CG.

    Textureless regions are coupled only through the smoothness term, which
    makes CG slow on small frames; there a sparse LU is cheaper.
    """
    if system.shape[0] <= DIRECT_SOLVE_LIMIT:
        return spsolve(system.tocsc(), rhs, permc_spec="MMD_AT_PLUS_A")
    precond = sp.diags(1.0 / system.diagonal())
    sol, info = cg(system, rhs, x0=x0, rtol=1e-7, atol=0.0, maxiter=5000, M=precond)
    if info != 0:
        sol = spsolve(system, rhs, permc_spec="MMD_AT_PLUS_A")
    return sol


def _symmetric_target(other_u, other_v, u, v, warper_shape):
    """``-w_other(x + w)``: the flow this direction would need to be consistent."""
    h, w = warper_shape
    yy, xx = np.mgrid[0:h, 0:w].astype(float)
    coords = np.array([yy + v, xx + u])
    ou = ndimage.map_coordinates(other_u, coords, order=1, mode="nearest")
    ov = ndimage.map_coordinates(other_v, coords, order=1, mode="nearest")
    return -ou, -ov


def _symmetric_energy(fu, fv, bu, bv):
    """Quadratic forward/backward consistency; zero where ``w_f(x) = -w_b(x + w_f)``."""
    tu, tv = _symmetric_target(bu, bv, fu, fv, fu.shape)
    return 0.5 * ((fu - tu) ** 2 + (fv - tv) ** 2).sum()


def _pyramid(img, levels, factor):
    pyr = [img]
    for _ in range(levels - 1):
        blurred = ndimage.gaussian_filter(pyr[-1], 1.0 / np.sqrt(2.0 * factor), mode="nearest")
        nxt = ndimage.zoom(blurred, factor, order=1, mode="nearest", grid_mode=True)
        if min(nxt.shape) < MIN_LEVEL_SIZE:
            break
        pyr.append(nxt)
    return pyr[::-1]


def _resize_flow(u, v, shape):
    fy = shape[0] / u.shape[0]
    fx = shape[1] / u.shape[1]
    zu = ndimage.zoom(u, (fy, fx), order=1, grid_mode=True, mode="nearest")
    zv = ndimage.zoom(v, (fy, fx), order=1, grid_mode=True, mode="nearest")
    if zu.shape != tuple(shape):
        raise DimensionError(f"flow resize produced {zu.shape}, expected {shape}")
    return zu * fx, zv * fy


# ---------------------------------------------------------------------------
# public API

def estimate_flow(frame_prev, frame_next, params=FlowParams()):
    """Dense flow ``w`` with ``frame_next(x + w) ~ frame_prev(x)``.

    Frames are rescaled jointly to [0, 1] by their common range, so adding a
    constant to both leaves the result unchanged.  With ``params.symmetric >
    0`` the backward flow is estimated alongside and exposed as
    ``.backward``.
    """
    f1 = np.asarray(frame_prev, dtype=float)
    f2 = np.asarray(frame_next, dtype=float)
    if f1.ndim != 2 or f1.shape != f2.shape:
        raise DimensionError(f"frames must be 2-D with equal shapes, got {f1.shape} and {f2.shape}")
    if min(f1.shape) < MIN_LEVEL_SIZE:
        raise DimensionError(f"frames must be at least {MIN_LEVEL_SIZE}x{MIN_LEVEL_SIZE}, got {f1.shape}")
    lo = min(f1.min(), f2.min())
    span = max(f1.max(), f2.max()) - lo
    if span > 0:
        f1 = (f1 - lo) / span
        f2 = (f2 - lo) / span
    else:
        f1 = np.zeros_like(f1)
        f2 = np.zeros_like(f2)

    p = params
    pyr1 = _pyramid(f1, p.pyramid_levels, p.downsample)
    pyr2 = _pyramid(f2, p.pyramid_levels, p.downsample)
    bidir = p.symmetric > 0
    fu = fv = bu = bv = None
    history = []
    for depth, (a, b) in enumerate(zip(pyr1, pyr2)):
        if fu is None:
            fu = np.zeros(a.shape)
            fv = np.zeros(a.shape)
            bu = np.zeros(a.shape)
            bv = np.zeros(a.shape)
        else:
            fu, fv = _resize_flow(fu, fv, a.shape)
            bu, bv = _resize_flow(bu, bv, a.shape)
        fwd = _Level(a, b, p)
        bwd = _Level(b, a, p) if bidir else None

        def total(fu_, fv_, bu_, bv_):
            e = fwd.own_energy(fu_, fv_)
            if bidir:
                e += bwd.own_energy(bu_, bv_)
                e += p.symmetric * (_symmetric_energy(fu_, fv_, bu_, bv_)
                                    + _symmetric_energy(bu_, bv_, fu_, fv_))
            return e

        finest = depth == len(pyr1) - 1
        energy = total(fu, fv, bu, bv)
        if finest:
            history.append(float(energy))
        for _ in range(p.outer_iterations):
            target = _symmetric_target(bu, bv, fu, fv, a.shape) if bidir else None
            du, dv = fwd.increment(fu, fv, target)
            fu, fv, energy = _line_search(lambda s: total(fu + s * du, fv + s * dv, bu, bv),
                                          energy, fu, fv, du, dv, p.max_backtracks)
            if bidir:
                target = _symmetric_target(fu, fv, bu, bv, a.shape)
                du, dv = bwd.increment(bu, bv, target)
                bu, bv, energy = _line_search(lambda s: total(fu, fv, bu + s * du, bv + s * dv),
                                              energy, bu, bv, du, dv, p.max_backtracks)
            if finest:
                history.append(float(energy))
    flow = FlowField(fu, fv, history)
    if bidir:
        flow.backward = FlowField(bu, bv, history)
    return flow


def _line_search(energy_at, current, u, v, du, dv, max_backtracks):
    step = 1.0
    for _ in range(max_backtracks + 1):
        e = energy_at(step)
        if e <= current:
            return u + step * du, v + step * dv, e
        step *= 0.5
    return u, v, current


def flow_objective(frame_prev, frame_next, flow, params=FlowParams()):
    """Forward-direction objective of ``flow`` on the jointly rescaled frames."""
    f1 = np.asarray(frame_prev, dtype=float)
    f2 = np.asarray(frame_next, dtype=float)
    lo = min(f1.min(), f2.min())
    span = max(f1.max(), f2.max()) - lo or 1.0
    return float(_Level((f1 - lo) / span, (f2 - lo) / span, params).own_energy(flow.u, flow.v))


def rectify_flow(flow):
    """Split each flow component into nonnegative positive/negative channels."""
    u, v = flow.u, flow.v
    return DirectionalFlowFeatures(
        x_pos=np.maximum(u, 0.0), x_neg=np.maximum(-u, 0.0),
        y_pos=np.maximum(v, 0.0), y_neg=np.maximum(-v, 0.0),
    )


def pool_motion(features, region=None):
    """Max-pool each channel over ``region = (row0, col0, row1, col1)`` (half-open).

    Returns ``(f_x+, f_x-, f_y+, f_y-)``; ``None`` pools the whole frame.
    """
    chans = features.stack()
    h, w = chans.shape[1:]
    if region is None:
        region = (0, 0, h, w)
    r0, c0, r1, c1 = (int(t) for t in region)
    r0, c0 = max(r0, 0), max(c0, 0)
    r1, c1 = min(r1, h), min(c1, w)
    if r1 <= r0 or c1 <= c0:
        raise DimensionError(f"empty pooling region {region} for features of shape {(h, w)}")
    return chans[:, r0:r1, c0:c1].max(axis=(1, 2))


def write_flo(path, flow):
    """Middlebury ``.flo``: magic, width, height, then interleaved float32 (u, v)."""
    h, w = flow.u.shape
    data = np.empty((h, w, 2), dtype="<f4")
    data[..., 0] = flow.u
    data[..., 1] = flow.v
    with open(path, "wb") as fh:
        fh.write(struct.pack("<fii", _FLO_MAGIC, w, h))
        fh.write(data.tobytes())


def read_flo(path):
    with open(path, "rb") as fh:
        magic, w, h = struct.unpack("<fii", fh.read(12))
        if magic != _FLO_MAGIC:
            raise ValueError(f"{path}: not a .flo file (magic {magic})")
        data = np.frombuffer(fh.read(), dtype="<f4")
    if data.size != 2 * w * h:
        raise ValueError(f"{path}: expected {2 * w * h} floats, found {data.size}")
    data = data.reshape(h, w, 2)
    return FlowField(data[..., 0].astype(float), data[..., 1].astype(float))
