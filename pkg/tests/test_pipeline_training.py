import filecmp
import os

import numpy as np
import pytest

from bioaction.errors import InsufficientDataError
from bioaction.pipeline import (FeatureExtractor, ModelBundle, PipelineConfig, SequenceDataset, Video,
                                classify_sequence, evaluate, train, tune_attention)
from bioaction.pipeline.synthetic import make_action_dataset
from bioaction.pipeline.training import key_frame_indices
from bioaction.synergetic import PrototypeBank, classify_batch, order_parameters


def small_config(**sections):
    cfg = PipelineConfig().replace(
        training={"subjects": 3}, attention={"iterations": 10, "particles": 6},
        active_basis={"background_pool": 10}, dataset={"target_width": 40, "target_height": 40})
    return cfg.replace(**sections) if sections else cfg


@pytest.fixture(scope="module")
def data():
    return make_action_dataset(seed=1, n_subjects=3, n_sequences=1, n_frames=8, shape=(40, 40))


@pytest.fixture(scope="module")
def extractor():
    return FeatureExtractor(small_config())


@pytest.fixture(scope="module")
def bundles(data, extractor):
    return {sc: train(data, small_config(training={"scenario": sc}), extractor) for sc in (1, 2)}


def _patterns_by_class(data, extractor, classes):
    out = {c: [] for c in classes}
    for v in data:
        out[v.label] += [p for p in extractor.frame_patterns(v) if p is not None]
    return out


def test_bundle_contract(bundles):
    for sc, b in bundles.items():
        assert b.scenario == sc
        assert b.classes == ("down", "right", "up")
        assert set(b.template_labels) == set(b.bank.labels) == set(b.classes)
        assert b.attention.shape == (b.bank.n_rows,)
        assert ((b.attention >= 0.1) & (b.attention <= 10)).all()


def test_scenario1_templates_match_own_action(bundles, data, extractor):
    b = bundles[1]
    assert b.bank.n_rows == 3 and len(b.templates) == 3
    pats = _patterns_by_class(data, extractor, b.classes)
    for ci, c in enumerate(b.classes):
        for x in pats[c]:
            scores = [x @ b.bank.V[:, k] for k in range(3)]
            assert b.bank.labels[int(np.argmax(scores))] == c


def test_scenario2_bank_layout(bundles):
    b = bundles[2]
    assert b.bank.n_rows == 12 and len(b.templates) == 12
    assert b.bank.labels == [c for c in b.classes for _ in range(4)]


def test_scenario2_training_frames_win_own_prototype(bundles, data, extractor):
    b = bundles[2]
    for v in data:
        pats = extractor.frame_patterns(v)
        for k in key_frame_indices(len(v), b.config.training.key_quantiles):
            eps = order_parameters(pats[k], b.bank)
            assert b.bank.labels[int(np.argmax(np.abs(eps)))] == v.label


def test_training_sequences_classified(bundles, data, extractor):
    for b in bundles.values():
        ev = evaluate(data, b, extractor)
        assert ev.videos.accuracy == 1.0
        np.testing.assert_array_equal(ev.videos.class_counts, [3, 3, 3])


def test_tuned_margin_not_worse_than_balanced(bundles):
    for b in bundles.values():
        info = b.attention_info
        assert info["fitness"] <= info["balanced_fitness"]
        assert all(y <= x for x, y in zip(info["history"], info["history"][1:]))


def test_single_frame_video_is_form_only(bundles, data, extractor):
    v = data.videos[0]
    res = classify_sequence(v.frames[3:4], bundles[2], extractor)
    assert res.form_only and len(res.frame_labels) == 1
    assert res.video_label == v.label


def test_blank_video_unclassifiable(bundles, extractor):
    res = classify_sequence(np.full((3, 40, 40), 50.0), bundles[1], extractor)
    assert res.frame_labels == [None, None, None]
    assert res.video_label is None and res.unclassifiable


def test_bundle_round_trip(bundles, data, extractor, tmp_path):
    for sc, b in bundles.items():
        a_dir, b_dir = tmp_path / f"a{sc}", tmp_path / f"b{sc}"
        b.save(a_dir)
        loaded = ModelBundle.load(a_dir)
        loaded.save(b_dir)
        for root, _, files in os.walk(a_dir):
            for f in files:
                rel = os.path.relpath(os.path.join(root, f), a_dir)
                assert filecmp.cmp(a_dir / rel, b_dir / rel, shallow=False), rel
        v = data.videos[4]
        assert classify_sequence(v, loaded, extractor).frame_labels == classify_sequence(v, b, extractor).frame_labels


def test_retrain_is_deterministic(bundles, data, extractor, tmp_path):
    again = train(data, small_config(training={"scenario": 2}), extractor)
    bundles[2].save(tmp_path / "one")
    again.save(tmp_path / "two")
    cmp = filecmp.dircmp(tmp_path / "one", tmp_path / "two")
    assert not cmp.diff_files and not cmp.left_only and not cmp.right_only
    assert filecmp.cmp(tmp_path / "one/templates/005.json", tmp_path / "two/templates/005.json", shallow=False)


def test_balanced_flag_skips_search(bundles, data, extractor):
    cfg = small_config(attention={"balanced": True})
    b = bundles[2]
    pats = [p for v in data for p in extractor.frame_patterns(v) if p is not None]
    res = tune_attention(b.bank, pats, np.zeros(len(pats), dtype=int), b.classes, cfg)
    assert res.balanced and res.history == []
    np.testing.assert_array_equal(res.lambdas, np.ones(12))


def _toy_problem():
    r = np.random.default_rng(3)
    protos = r.standard_normal((2, 40))
    # class 1 frames lean toward prototype 0, so equal gains misclassify part of them
    frames, labels = [], []
    for i in range(40):
        c = i % 2
        w = (0.8, 0.2) if c == 0 else (0.45, 0.55)
        frames.append(w[0] * protos[0] + w[1] * protos[1] + 0.05 * r.standard_normal(40))
        labels.append(c)
    return PrototypeBank.build(protos, ["a", "b"]), np.array(frames), np.array(labels)


def test_tuned_lambda_training_accuracy_toy():
    bank, frames, labels = _toy_problem()
    cfg = PipelineConfig().replace(attention={"iterations": 40, "particles": 8})
    res = tune_attention(bank, frames, labels, ("a", "b"), cfg, seed=0)
    again = tune_attention(bank, frames, labels, ("a", "b"), cfg, seed=0)
    np.testing.assert_array_equal(res.lambdas, again.lambdas)

    def accuracy(lam):
        winners, _, _ = classify_batch(frames, bank, attention=lam)
        return np.mean(winners == labels)

    assert accuracy(res.lambdas) >= accuracy(np.ones(2))


def test_degenerate_scenario1_single_pattern(data, extractor):
    cfg = small_config(training={"snippets": 1, "subjects": 1}, attention={"iterations": 2})
    b = train(data, cfg, extractor)
    for ci, c in enumerate(b.classes):
        first = [v for v in data if v.label == c and v.subject == "s0"][0]
        mid = (len(first) - 1) // 2
        np.testing.assert_allclose(b.bank.V[:, ci], extractor.frame_patterns(first)[mid], atol=1e-12)


def test_identical_static_sequences_melt_to_common_pattern():
    frame = make_action_dataset(seed=2, n_subjects=1, n_sequences=1, n_frames=1, shape=(40, 40)).videos[0].frames[0]
    vids = [Video(np.repeat(frame[None], 5, axis=0), "still", f"s{i}", f"still/s{i}") for i in range(2)]
    vids += [Video(np.repeat(frame[None, :, ::-1], 5, axis=0), "flip", f"s{i}", f"flip/s{i}") for i in range(2)]
    ds = SequenceDataset(vids)
    cfg = small_config(training={"snippets": 5, "subjects": 2}, attention={"iterations": 2})
    ex = FeatureExtractor(cfg)
    b = train(ds, cfg, ex)
    k = b.classes.index("still")
    np.testing.assert_allclose(b.bank.V[:, k], ex.frame_patterns(vids[0])[0], atol=1e-9)


def test_too_few_subjects(data, extractor):
    cfg = small_config(training={"subjects": 5})
    with pytest.raises(InsufficientDataError, match="action 'down'"):
        train(data, cfg, extractor)


def test_short_sequences_skipped_with_report(data, extractor):
    vids = list(data.videos) + [Video(data.videos[0].frames[:2], "down", "s9", "down/short")]
    cfg = small_config(training={"scenario": 2}, attention={"iterations": 2})
    b = train(SequenceDataset(vids), cfg, extractor)
    assert any("down/short" in line and "skipped" in line for line in b.report)
