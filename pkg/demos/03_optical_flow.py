"""Coarse-to-fine variational flow on a translated texture.

The estimate is split into four half-wave rectified direction channels,
which is what the motion pathway of the classifier consumes.
"""
import numpy as np

from bioaction import optical_flow as of
from bioaction import synthetic

rng = np.random.default_rng(0)
tex = synthetic.smooth_texture((96, 96), rng, sigma=2.0)
for dx, dy in [(2, 0), (0, -1), (-1, 1)]:
    flow = of.estimate_flow(tex, synthetic.translate(tex, dx, dy))
    inner = np.s_[8:-8, 8:-8]
    epe = np.hypot(flow.u[inner] - dx, flow.v[inner] - dy).mean()
    h = flow.objective_history
    print(f"shift ({dx:+d},{dy:+d}): mean endpoint error {epe:.4f} px, objective {h[0]:.1f} -> {h[-1]:.3f}")
    feats = of.rectify_flow(flow)
    pooled = of.pool_motion(feats, region=(8, 8, 88, 88))  # borders see texture that left the frame
    print("   pooled (right, left, down, up):", np.round(pooled, 3))
