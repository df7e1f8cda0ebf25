import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import bisect

from bioaction import active_basis as ab
from bioaction import gabor, synthetic
from bioaction.errors import DimensionError


@pytest.fixture(scope="module")
def background(dictionary):
    return ab.BackgroundModel.from_noise(dictionary, pool_size=10, seed=3)


@pytest.fixture(scope="module")
def bar():
    return synthetic.bar_image((40, 40), 3 * np.pi / 16, length=14, width=2)


def _energy_oracle(image, dictionary):
    raw = gabor.convolve(image - image.mean(), dictionary)
    e = raw[:, :, 0] ** 2 + raw[:, :, 1] ** 2
    return 20.0 * np.tanh(e / e.mean() / 20.0)


def test_single_bar_element_exhaustive(dictionary, bar):
    tpl = ab.shared_sketch([bar], dictionary, 1)
    e = _energy_oracle(bar, dictionary)
    best, where = -np.inf, None
    no, ns, h, w = e.shape
    for o in range(no):
        for s in range(ns):
            for y in range(h):
                for x in range(w):
                    if e[o, s, y, x] > best:
                        best, where = e[o, s, y, x], (o, s, y, x)
    el = tpl.elements[0]
    assert (el.orientation, el.scale, el.y, el.x) == where
    assert el.orientation == 3


def test_duplicate_training_images(dictionary, bar):
    one = ab.shared_sketch([bar], dictionary, 4)
    two = ab.shared_sketch([bar, bar.copy()], dictionary, 4)
    assert one.elements == two.elements


def test_cross_gives_orthogonal_elements(dictionary):
    img = synthetic.cross_image((48, 48), np.pi / 8, length=22, width=2)
    tpl = ab.shared_sketch([img], dictionary, 2)
    o1, o2 = (e.orientation for e in tpl.elements)
    assert ab.orientation_distance(o1, o2, 16) == pytest.approx(np.pi / 2)
    assert {o1, o2} == {2, 10}


def test_scores_nonincreasing_and_inhibition(dictionary, rng):
    imgs = [synthetic.cross_image((48, 48), 0.3, length=30) + 0.05 * rng.standard_normal((48, 48))
            for _ in range(3)]
    tpl = ab.shared_sketch(imgs, dictionary, 12)
    assert np.all(np.diff(tpl.scores) <= 1e-9)
    radius = dictionary.kernel_extent / 2
    for i, a in enumerate(tpl.elements):
        assert 0 <= a.y < 48 and 0 <= a.x < 48
        for b in tpl.elements[:i]:
            close = (a.x - b.x) ** 2 + (a.y - b.y) ** 2 < radius ** 2
            near_angle = ab.orientation_distance(a.orientation, b.orientation, 16) < np.pi / 4 - 1e-12
            assert not (close and near_angle)


def test_truncation_warning(small_dictionary):
    with pytest.warns(RuntimeWarning, match="only 0 of 3"):
        tpl = ab.shared_sketch([np.zeros((20, 20))], small_dictionary, 3)
    assert tpl.truncated and len(tpl) == 0


def test_mismatched_training_shapes(small_dictionary):
    with pytest.raises(DimensionError):
        ab.shared_sketch([np.zeros((20, 20)), np.zeros((21, 20))], small_dictionary, 1)


def test_null_weight(background):
    delta, capped = background.solve(background.mean)
    assert delta == 0.0 and not capped
    assert background.log_partition(0.0) == 0.0


def test_moment_strictly_increasing(background):
    grid = np.linspace(0, background.delta_max, 60)
    m = [background.exact_moment(d) for d in grid]
    assert np.all(np.diff(m) > 0)


def test_weight_matches_bisection_oracle(small_dictionary):
    bg = ab.BackgroundModel.from_noise(small_dictionary, saturation=4.0, pool_size=10, delta_max=10.0)
    target = 0.9 * 4.0
    delta, capped = bg.solve(target)
    assert not capped
    oracle = bisect(lambda d: bg.exact_moment(d) - target, 0.0, 10.0, xtol=1e-12)
    assert delta == pytest.approx(oracle, abs=0.02)
    assert bg.exact_moment(delta) == pytest.approx(target, rel=2e-3)


def test_unreachable_mean_caps_with_warning(dictionary, background, bar):
    tpl = ab.shared_sketch([bar], dictionary, 1)
    strong = bar * 1e3  # saturated training mean close to the bound
    with pytest.warns(RuntimeWarning, match="capped"):
        w, _ = ab.estimate_weights(tpl, [strong], background)
    assert w[0] == background.delta_max


def test_equal_means_equal_weights(dictionary, background):
    img = np.maximum(synthetic.bar_image((40, 64), 0.0, (20, 16), length=12),
                     synthetic.bar_image((40, 64), 0.0, (20, 48), length=12))
    tpl = ab.shared_sketch([img], dictionary, 2)
    r = ab.element_responses(ab._pooled(img, tpl), tpl)
    assert r[0] == pytest.approx(r[1], rel=1e-9)
    w, _ = ab.estimate_weights(tpl, [img], background)
    assert w[0] == pytest.approx(w[1], rel=1e-9)


def test_zero_weights_zero_score(dictionary, bar, rng):
    tpl = ab.shared_sketch([bar], dictionary, 3)
    assert ab.match_score(rng.standard_normal(bar.shape), tpl) == 0.0


def test_single_element_score_arithmetic(dictionary, background, bar, rng):
    tpl = ab.learn_template([bar], dictionary, 1, background=background)
    img = bar + 0.1 * rng.standard_normal(bar.shape)
    e = _energy_oracle(img, dictionary)
    el = tpl.elements[0]
    r = max(e[o % 16, el.scale, el.y + dy, el.x + dx]
            for o in range(el.orientation - 1, el.orientation + 2)
            for dy, dx in ab.normal_offsets(el.orientation * np.pi / 16, 3))
    expected = tpl.weights[0] * r - background.log_partition(tpl.weights[0])
    assert ab.match_score(img, tpl) == pytest.approx(expected, abs=1e-9)


def test_training_image_beats_noise(dictionary, background, bar):
    tpl = ab.learn_template([bar], dictionary, 5, background=background)
    r = np.random.default_rng(0)
    noise = [ab.match_score(r.standard_normal(bar.shape), tpl) for _ in range(20)]
    assert ab.match_score(bar, tpl) > np.mean(noise)


@settings(max_examples=15, deadline=None)
@given(st.floats(-50, 50), st.integers(0, 2 ** 31))
def test_score_invariant_to_offset(shift, seed):
    d = gabor.build_dictionary(4, 1, 9)
    img = synthetic.bar_image((24, 24), np.pi / 4, length=10)
    bg = ab.BackgroundModel(np.random.default_rng(seed).random(500) * 20)
    tpl = ab.learn_template([img], d, 3, background=bg)
    probe = img + 0.2 * np.random.default_rng(seed).standard_normal(img.shape)
    assert ab.match_score(probe + shift, tpl) == pytest.approx(ab.match_score(probe, tpl), abs=1e-8)


def _piece():
    return np.maximum(synthetic.bar_image((24, 24), 0.0, (7, 12), length=9),
                      synthetic.bar_image((24, 24), np.pi / 2, (15, 6), length=9))


@pytest.fixture(scope="module")
def small_template(dictionary, background):
    piece = _piece()
    return ab.learn_template([piece], dictionary, 3, background=background), piece


@pytest.fixture(scope="module")
def rigid_template(dictionary, background):
    piece = _piece()
    rigid = ab.Perturbation(location=0, orientation=0)
    return ab.learn_template([piece], dictionary, 3, background=background, perturbation=rigid), piece


def _plant(piece, offset, shape=(50, 56)):
    img = np.zeros(shape)
    img[offset[0]:offset[0] + piece.shape[0], offset[1]:offset[1] + piece.shape[1]] = piece
    return img


@pytest.mark.parametrize("offset,stride", [((5, 7), 1), ((6, 8), 2)])
def test_scan_finds_planted_template(rigid_template, offset, stride):
    tpl, piece = rigid_template
    img = _plant(piece, offset)
    score, loc = ab.max_pool_scan(img, tpl, stride)
    assert loc == offset
    assert score == pytest.approx(ab.match_score(img, tpl, offset))


def test_scan_matches_exhaustive_oracle(small_template):
    tpl, piece = small_template
    img = _plant(piece, (5, 7), (40, 42))
    h, w = tpl.lattice
    best, where = -np.inf, None
    for r in range(img.shape[0] - h + 1):
        for c in range(img.shape[1] - w + 1):
            sc = ab.match_score(img, tpl, (r, c))
            if sc > best + 1e-9:
                best, where = sc, (r, c)
    score, loc = ab.max_pool_scan(img, tpl)
    assert loc == where
    assert score == pytest.approx(best)
    # pooling tolerates the deformation window, so the best spot stays near the planted one
    assert abs(loc[0] - 5) <= 3 and abs(loc[1] - 7) <= 3


def test_scan_uniform_image_tiebreak(small_template):
    tpl, _ = small_template
    score, loc = ab.max_pool_scan(np.full((40, 40), 7.0), tpl)
    assert loc == (0, 0)
    assert score == pytest.approx(-tpl.log_partition.sum())


def test_scan_too_small(small_template):
    tpl, _ = small_template
    with pytest.raises(DimensionError):
        ab.max_pool_scan(np.zeros((10, 40)), tpl)


def test_template_round_trip(small_template, tmp_path):
    tpl, _ = small_template
    path = tmp_path / "t.json"
    ab.save_template(tpl, path)
    back = ab.load_template(path)
    assert back.elements == tpl.elements
    np.testing.assert_array_equal(back.weights, tpl.weights)
    np.testing.assert_array_equal(back.log_partition, tpl.log_partition)
    assert back.lattice == tpl.lattice
