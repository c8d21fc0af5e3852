from collections import Counter

import numpy as np
import pytest
from hypothesis import given, strategies as st

import curvelet_faces.ensemble as ens
from curvelet_faces.ensemble import (PipelineConfig, ensemble_predict, ensemble_train, load_model,
                                     majority_vote, save_model)
from curvelet_faces.harness import synthetic_dataset
from curvelet_faces.imaging import DimensionError, Image


@pytest.fixture(scope="module")
def small_data():
    return synthetic_dataset(n_classes=4, per_class=6, size=32, seed=5)


def test_vote_examples():
    assert majority_vote({1: "A", 2: "A", 3: "A", 4: "A"}, 3) == "A"
    assert majority_vote({1: "A", 2: "A", 3: "B", 4: "C"}, 3) == "A"
    assert majority_vote({1: "A", 2: "A", 3: "B", 4: "B"}, 3) == "B"
    assert majority_vote({1: "A", 2: "B", 3: "C", 4: "C"}, 3) == "C"
    # tie-break voter is not part of the tie
    assert majority_vote({1: "A", 2: "A", 3: "C", 4: "B", 5: "B"}, 3) is None
    assert majority_vote({1: "A", 2: "B"}, None) is None
    assert majority_vote({}, 3) is None


votes_st = st.dictionaries(st.integers(1, 6), st.sampled_from("ABCD"), min_size=1, max_size=6)


@given(st.sampled_from("ABCD"), st.integers(1, 6))
def test_unanimity_never_rejected(label, n):
    assert majority_vote({j: label for j in range(1, n + 1)}, 3) == label


@given(votes_st, st.integers(1, 6))
def test_rejection_needs_two_voters(votes, tb):
    if majority_vote(votes, tb) is None:
        assert len(votes) >= 2


@given(votes_st, st.integers(1, 6))
def test_dropping_a_winning_voter_keeps_strict_winner(votes, tb):
    winner = majority_vote(votes, tb)
    for key in [k for k, lab in votes.items() if lab == winner]:
        rest = {k: v for k, v in votes.items() if k != key}
        counts = Counter(rest.values())
        if counts[winner] > max((n for lab, n in counts.items() if lab != winner), default=0):
            assert majority_vote(rest, tb) == winner


def test_train_structure():
    data = synthetic_dataset(n_classes=2, per_class=3, size=32, seed=1)
    model = ensemble_train(data, PipelineConfig(scales=(2, 3)))
    assert model.scale_indices == (2, 3)
    assert all(v.pca.k <= 6 for v in model.voters)
    assert model.classes == ("c00", "c01")


def test_default_config():
    c = PipelineConfig()
    assert c.scales == (1, 2, 3, 4) and c.num_scales == 4 and c.pca_k == 100
    assert c.classifier == "knn" and c.knn_k == 1 and c.tie_break_scale == 3


@pytest.mark.parametrize("kwargs", [dict(scales=(5,)), dict(classifier="tree"), dict(num_scales=2),
                                    dict(metric="cosine"), dict(pca_k=0)])
def test_bad_config(kwargs):
    with pytest.raises(ValueError):
        PipelineConfig(**kwargs)


def test_resubstitution_is_perfect(small_data):
    model = ensemble_train(small_data)
    assert all(ensemble_predict(model, img).label == lab for img, lab in small_data)


def test_one_transform_per_prediction(small_data, monkeypatch):
    model = ensemble_train(small_data)
    calls = []
    real = ens.fdct_forward

    def counting(img, windows):
        calls.append(1)
        return real(img, windows)

    monkeypatch.setattr(ens, "fdct_forward", counting)
    ensemble_predict(model, small_data[0][0])
    assert len(calls) == 1
    calls.clear()
    ensemble_train(small_data[:8])
    assert len(calls) == 8


def test_prediction_deterministic(small_data):
    model = ensemble_train(small_data)
    img = small_data[3][0]
    assert ensemble_predict(model, img) == ensemble_predict(model, img)


def test_prediction_records_votes(small_data):
    model = ensemble_train(small_data)
    p = ensemble_predict(model, small_data[0][0])
    assert set(p.votes) == {1, 2, 3, 4}
    assert sum(p.counts.values()) == 4
    assert not p.rejected


def test_geometry_errors(small_data):
    mixed = small_data[:2] + [(Image(np.zeros((16, 16))), "x")]
    with pytest.raises(DimensionError):
        ensemble_train(mixed)
    model = ensemble_train(small_data)
    with pytest.raises(DimensionError):
        ensemble_predict(model, Image(np.zeros((16, 16))))


def test_declared_class_without_samples(small_data):
    with pytest.raises(ValueError):
        ensemble_train(small_data, classes=["c00", "ghost"])


def test_svm_and_gaussian_variants(small_data):
    for cfg in (PipelineConfig(classifier="svm"), PipelineConfig(metric="gaussian", knn_k=3)):
        model = ensemble_train(small_data, cfg)
        acc = np.mean([ensemble_predict(model, img).label == lab for img, lab in small_data])
        assert acc >= 0.9


def test_quantized_mode(small_data, monkeypatch):
    model = ensemble_train(small_data, PipelineConfig(quantized_ensemble=True))
    assert model.scale_indices == (8, 4, 2)
    calls = []
    real = ens.fdct_forward
    monkeypatch.setattr(ens, "fdct_forward", lambda i, w: calls.append(1) or real(i, w))
    p = ensemble_predict(model, small_data[0][0])
    assert len(calls) == 3 and set(p.votes) == {8, 4, 2}


def test_bundle_roundtrip(tmp_path, small_data):
    for cfg in (PipelineConfig(), PipelineConfig(classifier="svm", scales=(2, 3)),
                PipelineConfig(metric="gaussian")):
        model = ensemble_train(small_data, cfg)
        path = tmp_path / "m.npz"
        save_model(model, path)
        back = load_model(path)
        assert back.config == model.config and back.classes == model.classes
        for img, _ in small_data[::5]:
            assert ensemble_predict(back, img) == ensemble_predict(model, img)
