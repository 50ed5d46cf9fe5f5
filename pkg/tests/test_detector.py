import numpy as np
import pytest
from sklearn.base import clone

from embank import MemoryBankDetector, build_bank, mixup_augment, score_dataset
from embank.pooling import FeatureVector


def _data(rng, n_source=60, n_target=8, dim=5, shift=3.0):
    X = np.vstack(
        [rng.standard_normal((n_source, dim)), rng.standard_normal((n_target, dim)) + shift]
    )
    y = np.array(["source"] * n_source + ["target"] * n_target, dtype=object)
    return X, y


def test_get_params_roundtrip_and_clone():
    det = MemoryBankDetector(n_neighbors=2, mixup_neighbors="full", mixup_weight=0.8)
    params = det.get_params()
    assert params["mixup_neighbors"] == "full"
    copy = clone(det)
    assert copy.get_params() == params


def test_fit_builds_banks_and_mixup():
    rng = np.random.default_rng(60)
    X, y = _data(rng)
    det = MemoryBankDetector(mixup_neighbors=10).fit(X, y)
    assert det.source_bank_.n_rows == 60
    assert det.target_bank_.n_rows == 8 * (1 + 10)
    plain = MemoryBankDetector().fit(X, y)
    assert plain.target_bank_.n_rows == 8


def test_score_samples_matches_functional_core():
    rng = np.random.default_rng(61)
    X, y = _data(rng)
    tests = rng.standard_normal((12, 5)) + 1.0
    det = MemoryBankDetector(normalization="transductive").fit(X, y)
    got = det.score_samples(tests)

    source = build_bank(list(X[:60]), "source")
    target = build_bank(list(X[60:]), "target")
    feats = [FeatureVector(f"clip{i:05d}", 0, row) for i, row in enumerate(tests)]
    expected = score_dataset(source, target, feats, norm_mode="transductive").final_scores()
    np.testing.assert_array_equal(got, expected)


def test_full_mixup_matches_explicit_count():
    rng = np.random.default_rng(62)
    X, y = _data(rng)
    tests = rng.standard_normal((6, 5))
    a = MemoryBankDetector(mixup_neighbors="full").fit(X, y).score_samples(tests)
    b = MemoryBankDetector(mixup_neighbors=60).fit(X, y).score_samples(tests)
    np.testing.assert_array_equal(a, b)


def test_predict_domain_on_separated_clusters():
    rng = np.random.default_rng(63)
    X, y = _data(rng, n_source=150, n_target=40, dim=8, shift=6.0)
    det = MemoryBankDetector().fit(X, y)
    near_source = rng.standard_normal((20, 8))
    near_target = rng.standard_normal((20, 8)) + 6.0
    domains = det.predict_domain(np.vstack([near_source, near_target]))
    assert (domains[:20] == "source").mean() >= 0.9
    assert (domains[20:] == "target").mean() >= 0.9


def test_score_table_carries_clip_ids():
    rng = np.random.default_rng(64)
    X, y = _data(rng)
    det = MemoryBankDetector().fit(X, y)
    table = det.score_table(rng.standard_normal((3, 5)), clip_ids=["a", "b", "c"])
    assert [r.clip_id for r in table.records] == ["a", "b", "c"]


def test_unfitted_and_bad_inputs():
    det = MemoryBankDetector()
    with pytest.raises(RuntimeError, match="not fitted"):
        det.score_samples(np.zeros((1, 3)))
    rng = np.random.default_rng(65)
    X, y = _data(rng)
    det.fit(X, y)
    with pytest.raises(ValueError, match="features"):
        det.score_samples(np.zeros((2, 9)))
    with pytest.raises(ValueError, match="both domains"):
        MemoryBankDetector().fit(X, np.array(["source"] * X.shape[0], dtype=object))
    with pytest.raises(ValueError, match="unknown domain"):
        MemoryBankDetector().fit(X, np.array(["src"] * X.shape[0], dtype=object))
    with pytest.raises(ValueError, match="normalization"):
        MemoryBankDetector(normalization="sometimes").fit(X, y)
    with pytest.raises(ValueError, match="mixup_neighbors"):
        MemoryBankDetector(mixup_neighbors=10_000).fit(X, y)


def test_mixup_augment_requires_matching_detector_behavior():
    # the estimator's augmented bank is exactly mixup_augment's output
    rng = np.random.default_rng(66)
    X, y = _data(rng)
    det = MemoryBankDetector(mixup_neighbors=5, mixup_weight=0.9).fit(X, y)
    source = build_bank(list(X[:60]), "source")
    target = build_bank(list(X[60:]), "target")
    expected = mixup_augment(source, target, 5, 0.9)
    assert det.target_bank_.features.tobytes() == expected.features.tobytes()
