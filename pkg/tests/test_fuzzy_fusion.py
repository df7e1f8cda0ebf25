import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bioaction import fuzzy_fusion as fz
from bioaction.errors import ConfigurationError, InsufficientDataError


def _stats(form_mean, form_std, motion_mean, motion_std, classes=None):
    C = len(form_mean)
    return fz.ClassStats(tuple(classes or [f"c{i}" for i in range(C)]), np.asarray(form_mean, float),
                         np.asarray(form_std, float), np.asarray(motion_mean, float).reshape(C, 4),
                         np.asarray(motion_std, float).reshape(C, 4))


def test_fit_zero_variance_floor():
    feats = {"a": [(1.0, [1, 0, 0, 0])] * 3, "b": [(3.0, [0, 2, 0, 0]), (5.0, [0, 4, 0, 0])]}
    st_ = fz.fit_class_stats(feats)
    assert st_.form_mean[0] == 1.0
    assert st_.form_std[0] == pytest.approx(1e-6 * 4.0)  # floor = fraction x training range
    assert st_.motion_std[0, 2] == pytest.approx(1e-6)  # degenerate range -> floor of 1e-6 x 1


def test_fit_two_samples():
    st_ = fz.fit_class_stats({"a": [(0.0, [0, 0, 0, 0]), (2.0, [0, 0, 0, 2])]})
    assert st_.form_mean[0] == 1.0
    assert st_.form_std[0] == pytest.approx(math.sqrt(2), abs=1e-15)
    assert st_.motion_std[0, 3] == pytest.approx(math.sqrt(2))


def test_fit_two_pass_oracle(rng):
    forms = rng.normal(3, 2, 100)
    motions = rng.random((100, 4))
    st_ = fz.fit_class_stats({"a": list(zip(forms, motions)), "b": [(0.0, np.zeros(4)), (1.0, np.ones(4))]})
    mean = sum(forms) / 100
    var = sum((f - mean) ** 2 for f in forms) / 99
    assert st_.form_mean[0] == pytest.approx(mean, abs=1e-12)
    assert st_.form_std[0] == pytest.approx(math.sqrt(var), abs=1e-12)
    for j in range(4):
        col = motions[:, j]
        m = sum(col) / 100
        assert st_.motion_mean[0, j] == pytest.approx(m, abs=1e-12)
        assert st_.motion_std[0, j] == pytest.approx(math.sqrt(sum((c - m) ** 2 for c in col) / 99), abs=1e-12)


def test_fit_insufficient():
    with pytest.raises(InsufficientDataError, match="'b'"):
        fz.fit_class_stats({"a": [(1.0, np.zeros(4))] * 2, "b": [(1.0, np.zeros(4))]})


def test_stats_round_trip(tmp_path, rng):
    st_ = _stats(rng.random(3), rng.random(3) + 0.1, rng.random(12), rng.random(12) + 0.1, ["x", "y", "z"])
    st_.save(tmp_path / "s.json")
    back = fz.ClassStats.load(tmp_path / "s.json")
    assert back.classes == st_.classes
    for name in ("form_mean", "form_std", "motion_mean", "motion_std"):
        np.testing.assert_array_equal(getattr(back, name), getattr(st_, name))


def test_gaussian_examples():
    assert fz.gaussian_membership(0.7, 0.7, 0.3) == 1.0
    assert abs(fz.gaussian_membership(1.3 + 0.4, 1.3, 0.4) - math.exp(-1)) <= 1e-12
    assert fz.gaussian_membership(2.0, 0.0, 1.0) == pytest.approx(math.exp(-4), rel=1e-15)
    with pytest.raises(ConfigurationError):
        fz.gaussian_membership(0, 0, 0)


@pytest.fixture
def stats2():
    return _stats([1.0, 2.0], [0.5, 0.25], [[0, 1, 2, 3], [1, 1, 1, 1]], [[1, 1, 1, 1], [0.5, 0.5, 0.5, 0.5]])


def test_motion_membership_examples(stats2, rng):
    at_mean = fz.motion_membership([0, 1, 2, 3], stats2)
    assert at_mean[0] == 1.0
    off = fz.motion_membership([0, 1, 3, 3], stats2)
    assert off[0] == pytest.approx(math.exp(-1), abs=1e-12)
    for _ in range(20):
        f = rng.random(4) * 3
        for c in range(2):
            oracle = 1.0
            for j in range(4):
                oracle *= math.exp(-((f[j] - stats2.motion_mean[c, j]) / stats2.motion_std[c, j]) ** 2)
            assert fz.motion_membership(f, stats2)[c] == pytest.approx(oracle, rel=1e-12)


def test_log_memberships_consistent(stats2, rng):
    f = rng.random((5, 4))
    np.testing.assert_allclose(np.exp(fz.motion_membership(f, stats2, log=True)), fz.motion_membership(f, stats2))
    s = rng.random((5, 2)) * 3
    np.testing.assert_allclose(np.exp(fz.form_membership(s, stats2, log=True)), fz.form_membership(s, stats2))


def test_fuse_examples(rng):
    np.testing.assert_allclose(fz.fuse([1.0, 0.2], [0.5, 1.0]), [0.5, 0.2])
    x = rng.random(6)
    np.testing.assert_array_equal(fz.fuse(np.ones(6), x), x)
    np.testing.assert_array_equal(fz.fuse(x, np.ones(6)), x)
    fused = fz.fuse(x, y := rng.random(6))
    assert (fused <= np.minimum(x, y)).all()


def test_fuse_mismatched():
    with pytest.raises(ConfigurationError):
        fz.fuse([1.0, 0.5], [0.5, 0.5, 0.5])
    with pytest.raises(ConfigurationError):
        fz.fuse([1.0], [1.0], form_classes=["a"], motion_classes=["b"])


def test_defuzzify_examples():
    d = fz.defuzzify([[0.1, 0.9, 0.3], [0.4, 0.4, 0.0], [0.0, 0.0, 0.0]])
    assert d.labels.tolist()[:2] == [1, 0]
    assert d.ties.tolist() == [False, True, False]
    assert d.unclassifiable.tolist() == [False, False, True]
    lg = fz.defuzzify(np.log([[0.2, 0.5]]), log=True)
    assert lg.labels.tolist() == [1]
    assert fz.defuzzify([[-np.inf, -np.inf]], log=True).unclassifiable.tolist() == [True]
    with pytest.raises(ConfigurationError):
        fz.defuzzify(np.zeros((0, 3)))


def test_defuzzify_exhaustive(rng):
    Y = rng.random((20, 6))
    d = fz.defuzzify(Y)
    for row, lab in zip(Y, d.labels):
        best = 0
        for j in range(6):
            if row[j] > row[best]:
                best = j
        assert lab == best


@settings(max_examples=50)
@given(st.integers(0, 2 ** 32 - 1), st.floats(1e-3, 1e3))
def test_defuzzify_scale_invariant(seed, scale):
    Y = np.random.default_rng(seed).random((4, 5))
    assert (fz.defuzzify(Y).labels == fz.defuzzify(Y * scale).labels).all()


def test_memberships_in_unit_interval(stats2, rng):
    m = fz.motion_membership(rng.normal(1, 1, (200, 4)), stats2)
    f = fz.form_membership(rng.normal(1.5, 0.5, (200, 2)), stats2)
    fused = fz.fuse(f, m)
    for arr in (m, f, fused):
        assert ((arr > 0) & (arr <= 1)).all()


def test_exact_mean_sample_wins(rng):
    C = 4
    mu_f, sd_f = rng.random(C) * 5, rng.random(C) + 0.1
    mu_m, sd_m = rng.random((C, 4)) * 5, rng.random((C, 4)) + 0.1
    target = 2
    mu_f[np.arange(C) != target] = mu_f[target] + 3.5 * sd_f[np.arange(C) != target]
    for c in range(C):
        if c != target:
            mu_m[c] = mu_m[target] + 3.5 * sd_m[c]
    stats = _stats(mu_f, sd_f, mu_m, sd_m)
    form = np.full(C, mu_f[target])
    y = fz.fuse(fz.form_membership(form, stats), fz.motion_membership(mu_m[target], stats))
    assert fz.defuzzify(y[None]).labels[0] == target
