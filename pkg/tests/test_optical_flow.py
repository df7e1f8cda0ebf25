import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bioaction import optical_flow as of
from bioaction.errors import ConfigurationError, DimensionError
from bioaction.synthetic import smooth_texture, translate

INTERIOR = (slice(5, -5), slice(5, -5))


@pytest.fixture(scope="module")
def texture():
    return smooth_texture((64, 64), np.random.default_rng(7), sigma=2.0)


def _epe(flow, dx, dy):
    return float(np.mean(np.hypot(flow.u - dx, flow.v - dy)[INTERIOR]))


def test_identical_frames_zero_flow(texture):
    flow = of.estimate_flow(texture, texture)
    assert np.abs(flow.u).max() < 1e-3 and np.abs(flow.v).max() < 1e-3


def test_translation_x(texture):
    flow = of.estimate_flow(texture, translate(texture, 2, 0))
    assert _epe(flow, 2, 0) <= 0.2


def test_translation_up(texture):
    flow = of.estimate_flow(texture, translate(texture, 0, -1))
    assert flow.v[INTERIOR].mean() == pytest.approx(-1.0, abs=0.2)


def test_objective_monotone(texture):
    flow = of.estimate_flow(texture, translate(texture, 1, 1))
    h = flow.objective_history
    assert len(h) == of.FlowParams().outer_iterations + 1
    assert all(b <= a for a, b in zip(h, h[1:]))
    assert h[-1] == pytest.approx(of.flow_objective(texture, translate(texture, 1, 1), flow))


def test_brightness_shift(texture):
    nxt = translate(texture, 1, 0)
    a = of.estimate_flow(texture, nxt)
    b = of.estimate_flow(texture + 5, nxt + 5)
    assert np.mean(np.hypot(a.u - b.u, a.v - b.v)) <= 0.05


def test_deterministic(texture):
    nxt = translate(texture, -1, 2)
    a = of.estimate_flow(texture, nxt)
    b = of.estimate_flow(texture, nxt)
    np.testing.assert_array_equal(a.u, b.u)
    np.testing.assert_array_equal(a.v, b.v)


def test_symmetric_term_runs(texture):
    nxt = translate(texture, 1, 0)
    flow = of.estimate_flow(texture, nxt, of.FlowParams(symmetric=0.1, outer_iterations=3))
    assert flow.backward is not None
    assert _epe(flow, 1, 0) <= 0.2
    assert float(np.mean(flow.backward.u[INTERIOR])) == pytest.approx(-1.0, abs=0.2)
    h = flow.objective_history
    assert all(b <= a for a, b in zip(h, h[1:]))


def test_mismatched_frames():
    with pytest.raises(DimensionError):
        of.estimate_flow(np.zeros((32, 32)), np.zeros((32, 33)))
    with pytest.raises(DimensionError):
        of.estimate_flow(np.zeros((8, 32)), np.zeros((8, 32)))


def test_bad_params():
    with pytest.raises(ConfigurationError):
        of.FlowParams(pyramid_levels=0)
    with pytest.raises(ConfigurationError):
        of.FlowParams(smoothness=-1)


def _field(u, v, shape=(6, 7)):
    return of.FlowField(np.full(shape, float(u)), np.full(shape, float(v)))


def test_rectify_constant_fields():
    f = of.rectify_flow(_field(2, 0))
    assert (f.x_pos == 2).all() and not f.x_neg.any() and not f.y_pos.any() and not f.y_neg.any()
    f = of.rectify_flow(_field(-1, 3))
    assert (f.x_neg == 1).all() and (f.y_pos == 3).all() and not f.x_pos.any() and not f.y_neg.any()


@settings(max_examples=50)
@given(st.integers(0, 2 ** 32 - 1))
def test_rectify_reconstruction(seed):
    r = np.random.default_rng(seed)
    flow = of.FlowField(r.standard_normal((9, 11)) * 3, r.standard_normal((9, 11)) * 3)
    f = of.rectify_flow(flow)
    assert np.array_equal(f.x_pos - f.x_neg, flow.u)
    assert np.array_equal(f.y_pos - f.y_neg, flow.v)
    for ch in f.stack():
        assert (ch >= 0).all()
    assert not np.any((f.x_pos > 0) & (f.x_neg > 0))
    assert not np.any((f.y_pos > 0) & (f.y_neg > 0))


def test_pool_constant_channels():
    shape = (8, 8)
    feats = of.DirectionalFlowFeatures(np.full(shape, 2.0), np.zeros(shape), np.zeros(shape), np.full(shape, 3.0))
    np.testing.assert_array_equal(of.pool_motion(feats, (1, 1, 5, 5)), [2, 0, 0, 3])


def test_pool_hot_pixel():
    z = np.zeros((10, 10))
    hot = z.copy()
    hot[4, 6] = 5.0
    feats = of.DirectionalFlowFeatures(hot, z, z, z)
    assert of.pool_motion(feats, (2, 2, 8, 8))[0] == 5.0
    assert of.pool_motion(feats, (0, 0, 4, 4))[0] == 0.0


def test_pool_exhaustive(rng):
    chans = rng.random((4, 16, 16))
    feats = of.DirectionalFlowFeatures(*chans)
    region = (3, 2, 11, 15)
    got = of.pool_motion(feats, region)
    for k in range(4):
        best = max(chans[k, r, c] for r in range(3, 11) for c in range(2, 15))
        assert got[k] == best


def test_pool_empty_region(rng):
    feats = of.DirectionalFlowFeatures(*rng.random((4, 8, 8)))
    with pytest.raises(DimensionError):
        of.pool_motion(feats, (4, 4, 4, 6))


def test_flo_round_trip(tmp_path, rng):
    flow = of.FlowField(rng.standard_normal((5, 9)).astype(np.float32).astype(float),
                        rng.standard_normal((5, 9)).astype(np.float32).astype(float))
    path = tmp_path / "f.flo"
    of.write_flo(path, flow)
    raw = path.read_bytes()
    assert raw[:4] == np.float32(202021.25).tobytes()
    assert int.from_bytes(raw[4:8], "little") == 9 and int.from_bytes(raw[8:12], "little") == 5
    back = of.read_flo(path)
    np.testing.assert_array_equal(back.u, flow.u)
    np.testing.assert_array_equal(back.v, flow.v)
