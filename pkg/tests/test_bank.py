import numpy as np
import pytest

from embank import MemoryBank, build_bank, knn_query, load_bank, mixup_augment, save_bank
from embank.bank import PROV_MIXUP, PROV_ORIGINAL, knn_distances, pairwise_sqdist
from embank.pooling import FeatureVector

from conftest import knn_oracle


def _fv(values, clip_id="q", layer=1):
    return FeatureVector(clip_id=clip_id, layer=layer, values=np.asarray(values, dtype=np.float64))


class TestBuildBank:
    def test_single_vector(self):
        bank = build_bank([_fv([1.0, 2.0, 3.0])], "source")
        assert (bank.n_rows, bank.dim) == (1, 3)
        assert bank.provenance[0].kind == PROV_ORIGINAL

    def test_rows_keep_input_order(self):
        bank = build_bank([[0.0, 1.0], [2.0, 3.0], [4.0, 5.0]], "target")
        assert bank.features[1].tolist() == [2.0, 3.0]

    def test_realistic_source_scale(self):
        rng = np.random.default_rng(0)
        bank = build_bank(list(rng.standard_normal((990, 6))), "source")
        assert bank.n_rows == 990

    def test_ragged_dims_rejected(self):
        with pytest.raises(ValueError, match="ragged"):
            build_bank([[1.0, 2.0, 3.0], [1.0, 2.0, 3.0, 4.0]], "source")

    def test_empty_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            build_bank([], "source")

    def test_bad_domain_rejected(self):
        with pytest.raises(ValueError, match="domain"):
            build_bank([[1.0]], "both")

    def test_features_are_immutable(self):
        bank = build_bank([[1.0, 2.0]], "source")
        with pytest.raises(ValueError):
            bank.features[0, 0] = 9.0


class TestKnnQuery:
    def test_self_distance_zero(self):
        bank = build_bank([[5.0, 5.0], [1.0, 1.0]], "source")
        assert knn_query(bank, np.array([1.0, 1.0]), 1) == [(1, 0.0)]

    def test_hand_computed_distances(self):
        bank = build_bank([[0.0, 0.0], [3.0, 4.0], [1.0, 0.0]], "source")
        assert knn_query(bank, np.array([0.0, 0.0]), 2) == [(0, 0.0), (2, 1.0)]

    def test_ties_break_to_lower_index(self):
        bank = build_bank([[2.0], [0.0], [2.0], [0.0]], "source")
        result = knn_query(bank, np.array([1.0]), 4)
        assert [n.index for n in result] == [0, 1, 2, 3]

    def test_matches_oracle_on_random_instance(self):
        rng = np.random.default_rng(123)
        rows = rng.standard_normal((500, 64))
        bank = build_bank(list(rows), "source")
        query = rng.standard_normal(64)
        got = knn_query(bank, query, 7)
        expected = knn_oracle(bank.features, query, 7)
        assert [(n.index, n.distance) for n in got] == expected

    def test_matches_oracle_with_duplicated_rows(self):
        rng = np.random.default_rng(5)
        base = rng.standard_normal((40, 8))
        rows = np.vstack([base, base[:10]])  # exact duplicates force ties
        bank = build_bank(list(rows), "source")
        query = base[3] + 0.01
        got = [(n.index, n.distance) for n in knn_query(bank, query, 12)]
        assert got == knn_oracle(bank.features, query, 12)

    def test_accepts_feature_vector_queries(self):
        bank = build_bank([[0.0, 0.0], [1.0, 1.0]], "source")
        assert knn_query(bank, _fv([1.0, 1.0]), 1)[0].index == 1

    def test_argument_errors(self):
        bank = build_bank([[0.0, 0.0]], "source")
        with pytest.raises(ValueError, match="exceeds bank size"):
            knn_query(bank, np.zeros(2), 2)
        with pytest.raises(ValueError, match="dimension"):
            knn_query(bank, np.zeros(3), 1)
        with pytest.raises(ValueError, match=">= 1"):
            knn_query(bank, np.zeros(2), 0)

    def test_blocked_path_equals_naive(self):
        # large enough to force blocking over both queries and bank rows
        rng = np.random.default_rng(9)
        rows = rng.standard_normal((1600, 1501))
        queries = rng.standard_normal((5, 1501))
        got = pairwise_sqdist(queries, rows)
        expected = np.array(
            [[np.sum((rows[i] - q) ** 2) for i in range(rows.shape[0])] for q in queries]
        )
        assert np.array_equal(got, expected)

    def test_batch_equals_per_query(self):
        rng = np.random.default_rng(21)
        rows = rng.standard_normal((50, 6))
        queries = rng.standard_normal((8, 6))
        bank = build_bank(list(rows), "source")
        dists, idx = knn_distances(bank, queries, 3)
        for qi in range(8):
            singles = knn_query(bank, queries[qi], 3)
            assert [(n.index, n.distance) for n in singles] == list(
                zip(idx[qi].tolist(), dists[qi].tolist())
            )


class TestMixupAugment:
    def test_weight_one_reproduces_targets(self):
        rng = np.random.default_rng(2)
        source = build_bank(list(rng.standard_normal((20, 4))), "source")
        target = build_bank(list(rng.standard_normal((3, 4))), "target")
        aug = mixup_augment(source, target, 5, weight=1.0)
        assert aug.n_rows == 3 * (1 + 5)
        for row, prov in zip(aug.features, aug.provenance):
            if prov.kind == PROV_MIXUP:
                np.testing.assert_array_equal(row, target.features[prov.target_index])

    def test_hand_computed_interpolation(self):
        source = build_bank([[0.0, 0.0]], "source")
        target = build_bank([[1.0, 1.0]], "target")
        aug = mixup_augment(source, target, 1, weight=0.9)
        np.testing.assert_allclose(aug.features[1], [0.9, 0.9])

    def test_size_formula_at_full_source(self):
        rng = np.random.default_rng(4)
        source = build_bank(list(rng.standard_normal((990, 3))), "source")
        target = build_bank(list(rng.standard_normal((10, 3))), "target")
        aug = mixup_augment(source, target, 990, weight=0.9)
        assert aug.n_rows == 10 * 991

    def test_rows_match_recorded_parents(self):
        rng = np.random.default_rng(6)
        source = build_bank(list(rng.standard_normal((30, 5))), "source")
        target = build_bank(list(rng.standard_normal((4, 5))), "target")
        lam = 0.7
        aug = mixup_augment(source, target, 3, weight=lam)
        for row, prov in zip(aug.features, aug.provenance):
            if prov.kind != PROV_MIXUP:
                continue
            f_t = target.features[prov.target_index]
            f_s = source.features[prov.source_index]
            np.testing.assert_array_equal(row, lam * f_t + (1 - lam) * f_s)
            # strictly inside the segment
            np.testing.assert_allclose(
                np.linalg.norm(row - f_t), (1 - lam) * np.linalg.norm(f_s - f_t), rtol=1e-5
            )

    def test_neighbors_follow_knn_order(self):
        source = build_bank([[10.0], [1.0], [3.0]], "source")
        target = build_bank([[0.0]], "target")
        aug = mixup_augment(source, target, 2, weight=0.5)
        mixup_parents = [p.source_index for p in aug.provenance if p.kind == PROV_MIXUP]
        assert mixup_parents == [1, 2]  # nearest first

    def test_originals_preserved_verbatim(self):
        rng = np.random.default_rng(8)
        source = build_bank(list(rng.standard_normal((15, 4))), "source")
        target = build_bank(list(rng.standard_normal((6, 4))), "target")
        aug = mixup_augment(source, target, 4)
        np.testing.assert_array_equal(aug.features[:6], target.features)
        assert all(p.kind == PROV_ORIGINAL for p in aug.provenance[:6])

    def test_deterministic(self):
        rng = np.random.default_rng(12)
        source = build_bank(list(rng.standard_normal((25, 3))), "source")
        target = build_bank(list(rng.standard_normal((5, 3))), "target")
        a = mixup_augment(source, target, 7)
        b = mixup_augment(source, target, 7)
        assert a.features.tobytes() == b.features.tobytes()
        assert a.provenance == b.provenance

    def test_argument_errors(self):
        source = build_bank([[0.0]], "source")
        target = build_bank([[1.0]], "target")
        with pytest.raises(ValueError, match="n_neighbors"):
            mixup_augment(source, target, 2)
        with pytest.raises(ValueError, match="weight"):
            mixup_augment(source, target, 1, weight=1.5)
        wide = build_bank([[1.0, 2.0]], "target")
        with pytest.raises(ValueError, match="dim"):
            mixup_augment(source, wide, 1)


def test_bank_persistence_roundtrip(tmp_path):
    rng = np.random.default_rng(33)
    source = build_bank(list(rng.standard_normal((12, 5))), "source")
    target = build_bank(list(rng.standard_normal((3, 5))), "target")
    aug = mixup_augment(source, target, 2, weight=0.8)
    path = save_bank(aug, tmp_path / "target.bank")
    back = load_bank(path)
    assert back.domain == aug.domain
    assert back.features.tobytes() == aug.features.tobytes()
    assert back.provenance == aug.provenance


def test_bank_constructor_provenance_length():
    with pytest.raises(ValueError, match="provenance length"):
        MemoryBank("source", np.ones((2, 2)), provenance=[])
