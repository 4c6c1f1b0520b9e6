import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from skelgan.data import (
    TARGET_MAX,
    ActionSequence,
    Dataset,
    batches,
    center,
    dumps_csv,
    dumps_dataset,
    fit_scale,
    load_dataset,
    loads_dataset,
    normalize,
    normalize_frame,
    one_hot,
    one_hot_batch,
    resample,
    save_dataset,
    split_indices,
)


def seq(frames, label=0, source="s"):
    return ActionSequence(np.asarray(frames, dtype=float), label, source)


def random_dataset(rng, count=6, T=4, K=2, J=3, D=2):
    return Dataset(K, J, D, [seq(rng.normal(size=(T, J, D)), i % K, f"r{i}") for i in range(count)])


class TestOneHot:
    def test_value(self):
        np.testing.assert_array_equal(one_hot(2, 4), [0, 0, 1, 0])

    @pytest.mark.parametrize("K", [1, 3, 7])
    def test_round_trip(self, K):
        for k in range(K):
            v = one_hot(k, K)
            assert v.sum() == 1 and np.argmax(v) == k

    @pytest.mark.parametrize("label", [-1, 3])
    def test_out_of_range(self, label):
        with pytest.raises(ValueError):
            one_hot(label, 3)

    def test_batch(self):
        np.testing.assert_array_equal(one_hot_batch([1, 0], 2), [[0, 1], [1, 0]])
        with pytest.raises(ValueError):
            one_hot_batch([0, 5], 3)


class TestSequences:
    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            seq(np.full((2, 1, 2), np.nan))

    def test_rejects_wrong_rank(self):
        with pytest.raises(ValueError):
            seq(np.zeros((2, 3)))

    def test_dataset_checks_labels_and_shapes(self):
        with pytest.raises(ValueError):
            Dataset(2, 1, 2, [seq(np.zeros((2, 1, 2)), label=2)])
        with pytest.raises(ValueError):
            Dataset(2, 1, 2, [seq(np.zeros((2, 2, 2)))])

    def test_arrays_require_equal_lengths(self):
        ds = Dataset(1, 1, 1, [seq(np.zeros((2, 1, 1))), seq(np.zeros((3, 1, 1)))])
        with pytest.raises(ValueError, match="resample"):
            ds.arrays()


class TestNormalize:
    def test_centered_sequence_only_scales(self):
        f = np.random.default_rng(0).normal(size=(4, 3, 2))
        f -= f[0, 0]
        np.testing.assert_allclose(normalize(seq(f), 0.5).frames, f * 0.5, rtol=0, atol=1e-15)

    def test_idempotent_under_fixed_scale(self):
        f = np.random.default_rng(1).normal(size=(4, 3, 2)) + 5.0
        once = normalize(seq(f), 1.0)
        twice = normalize(once, 1.0)
        np.testing.assert_array_equal(once.frames, twice.frames)

    def test_training_split_peak(self):
        rng = np.random.default_rng(2)
        train = [seq(rng.normal(size=(5, 3, 2)) * 7 + 3) for _ in range(10)]
        scale = fit_scale(train)
        peak = max(np.abs(normalize(s, scale).frames).max() for s in train)
        assert peak == pytest.approx(TARGET_MAX, rel=1e-12)

    def test_degenerate_sequence(self, caplog):
        with caplog.at_level(logging.WARNING):
            out = normalize(seq(np.zeros((3, 2, 2))), 2.0)
        assert "degenerate" in out.flags
        assert not np.any(out.frames)
        assert "degenerate" in caplog.text

    def test_center_moves_root(self):
        f = np.ones((2, 2, 2)) * 3
        assert not np.any(center(seq(f)).frames)

    def test_normalize_frame_matches_sequence_path(self):
        f = np.random.default_rng(3).normal(size=(1, 3, 2))
        via_seq = normalize(seq(f), 0.7).flat()[0]
        np.testing.assert_allclose(normalize_frame(f.reshape(-1), 3, 2, 0.7), via_seq, atol=1e-15)


class TestResample:
    def test_identity_length(self):
        f = np.random.default_rng(0).normal(size=(6, 2, 2))
        np.testing.assert_array_equal(resample(seq(f), 6).frames, f)

    def test_midpoint(self):
        f = np.array([[[0.0, 2.0]], [[4.0, 6.0]]])
        out = resample(seq(f), 3).frames
        np.testing.assert_allclose(out[1], (f[0] + f[1]) / 2)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(2, 40), st.integers(2, 60), st.integers(0, 2**16))
    def test_endpoints_exact(self, T, N, s):
        f = np.random.default_rng(s).normal(size=(T, 2, 3))
        out = resample(seq(f), N).frames
        assert out.shape == (N, 2, 3)
        np.testing.assert_array_equal(out[0], f[0])
        np.testing.assert_array_equal(out[-1], f[-1])

    def test_linear_motion_stays_linear(self):
        t = np.linspace(0, 1, 7)
        f = np.stack([t, 2 * t], axis=-1)[:, None, :]
        out = resample(seq(f), 20).frames
        s = np.linspace(0, 1, 20)
        np.testing.assert_allclose(out[:, 0], np.stack([s, 2 * s], axis=-1), atol=1e-12)

    def test_too_short(self):
        with pytest.raises(ValueError):
            resample(seq(np.zeros((1, 1, 1))), 5)


class TestSplitAndBatches:
    def test_split_is_stratified_and_disjoint(self):
        y = np.repeat(np.arange(3), 50)
        train, held = split_indices(y, 0.2, seed=4)
        assert len(set(train) & set(held)) == 0
        assert len(train) + len(held) == 150
        assert [int(np.sum(y[held] == k)) for k in range(3)] == [10, 10, 10]

    def test_split_depends_on_seed(self):
        y = np.repeat(np.arange(2), 20)
        assert not np.array_equal(split_indices(y, 0.25, 0)[1], split_indices(y, 0.25, 1)[1])

    def test_each_sample_once_per_epoch(self):
        X = np.arange(10, dtype=float)[:, None, None] * np.ones((1, 4, 3))
        y = np.arange(10) % 2
        seen = [int(b[0][i, 0, 0]) for b in batches(X, y, 4, 2, seed=0, epochs=1) for i in range(len(b[0]))]
        assert sorted(seen) == list(range(10))

    def test_shapes(self):
        X, y = np.zeros((12, 5, 3)), np.arange(12) % 3
        frames, onehot, labels = next(batches(X, y, 4, 3, seed=0))
        assert frames.shape == (4, 5, 3) and onehot.shape == (4, 3) and labels.shape == (4,)
        np.testing.assert_array_equal(onehot.argmax(axis=1), labels)

    def test_orders_depend_on_seed(self):
        X, y = np.arange(20.0)[:, None, None], np.zeros(20, dtype=int)
        a = np.concatenate([b[0].ravel() for b in batches(X, y, 5, 1, seed=0, epochs=1)])
        b = np.concatenate([b[0].ravel() for b in batches(X, y, 5, 1, seed=1, epochs=1)])
        assert not np.array_equal(a, b)

    def test_batch_larger_than_data(self):
        with pytest.raises(ValueError):
            next(batches(np.zeros((3, 2, 1)), np.zeros(3, dtype=int), 4, 1, seed=0))


class TestFormats:
    def test_json_round_trip(self, tmp_path):
        ds = random_dataset(np.random.default_rng(5))
        path = tmp_path / "ds.json"
        save_dataset(ds, path)
        back = load_dataset(path)
        assert (back.classes, back.joints, back.dims) == (ds.classes, ds.joints, ds.dims)
        for a, b in zip(ds.sequences, back.sequences):
            assert a.label == b.label and a.source == b.source
            assert a.frames.tobytes() == b.frames.tobytes()
        assert dumps_dataset(back) == path.read_text()

    def test_json_missing_key(self):
        with pytest.raises(ValueError, match="missing key"):
            loads_dataset('{"classes": 2, "joints": 1}')

    def test_json_bad_frame_width(self):
        with pytest.raises(ValueError):
            loads_dataset('{"classes":1,"joints":2,"dims":2,"sequences":[{"label":0,"frames":[[1,2,3]]}]}')

    def test_csv_layout(self):
        ds = random_dataset(np.random.default_rng(6), count=2, T=3, J=1, D=2)
        lines = dumps_csv(ds).splitlines()
        assert lines[0] == "seq_id,frame_idx,label,c0,c1"
        assert len(lines) == 1 + 2 * 3
        row = lines[4].split(",")
        assert row[:3] == ["1", "0", "1"]
        assert float(row[3]) == ds.sequences[1].frames[0, 0, 0]


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 30), st.integers(2, 50), st.floats(0.1, 10.0), st.integers(0, 2**16))
def test_normalize_and_resample_commute(T, N, scale, s):
    f = np.random.default_rng(s).normal(size=(T, 3, 2)) * 4 + 1
    a = resample(normalize(seq(f), scale), N).frames
    b = normalize(resample(seq(f), N), scale).frames
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-12)
