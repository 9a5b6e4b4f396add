import numpy as np
import pytest

from eegdenoise import data, metrics
from eegdenoise.exceptions import FormatError, LengthError


class TestEdnb:
    def test_round_trip(self, tmp_path):
        m = np.random.default_rng(0).standard_normal((5, 7))
        data.save_matrix(m, tmp_path / "m.ednb")
        np.testing.assert_array_equal(data.load_matrix(tmp_path / "m.ednb"), m)

    def test_header_layout(self, tmp_path):
        data.save_matrix(np.arange(6.0).reshape(2, 3), tmp_path / "m.ednb")
        raw = (tmp_path / "m.ednb").read_bytes()
        assert raw[:4] == b"EDNB"
        assert int.from_bytes(raw[4:8], "little") == 2
        assert int.from_bytes(raw[8:12], "little") == 3
        assert len(raw) == 12 + 6 * 8

    def test_short_payload(self, tmp_path):
        data.save_matrix(np.ones((3, 4)), tmp_path / "m.ednb")
        raw = (tmp_path / "m.ednb").read_bytes()
        (tmp_path / "short.ednb").write_bytes(raw[:-8])
        with pytest.raises(FormatError, match="byte 12"):
            data.load_matrix(tmp_path / "short.ednb")

    def test_bad_magic(self, tmp_path):
        (tmp_path / "bad.ednb").write_bytes(b"NOPE" + bytes(8))
        with pytest.raises(FormatError) as exc:
            data.load_matrix(tmp_path / "bad.ednb")
        assert exc.value.field == "magic"

    def test_non_finite(self, tmp_path):
        m = np.ones((3, 2))
        m[2, 1] = np.nan
        raw = b"EDNB" + (3).to_bytes(4, "little") + (2).to_bytes(4, "little") + m.astype("<f8").tobytes()
        (tmp_path / "nan.ednb").write_bytes(raw)
        with pytest.raises(FormatError, match="row 2"):
            data.load_matrix(tmp_path / "nan.ednb")


class TestCsv:
    def test_basic(self, tmp_path):
        (tmp_path / "m.csv").write_text("1,2\n3,4")
        np.testing.assert_array_equal(data.load_matrix(tmp_path / "m.csv"), [[1, 2], [3, 4]])

    def test_ragged(self, tmp_path):
        (tmp_path / "m.csv").write_text("1,2\n3\n")
        with pytest.raises(FormatError, match="row 1"):
            data.load_matrix(tmp_path / "m.csv")

    def test_inf(self, tmp_path):
        (tmp_path / "m.csv").write_text("1,2\ninf,4\n")
        with pytest.raises(FormatError, match="row 1"):
            data.load_matrix(tmp_path / "m.csv")


def test_manifest_round_trip(tmp_path):
    data.write_manifest(tmp_path / "m.txt", {"b": 2, "a": "x"})
    assert (tmp_path / "m.txt").read_text() == "a=x\nb=2\n"
    (tmp_path / "c.txt").write_text("# comment\nkey = value  # trailing\n\nother=1\n")
    assert data.read_manifest(tmp_path / "c.txt") == {"key": "value", "other": "1"}


class TestPairing:
    def test_full_scale_counts(self):
        pairs = data.equalize_and_pair(np.empty((4514, 0)), np.empty((5598, 0)), seed=0)
        assert pairs.shape == (5598, 2)
        assert sorted(pairs[:, 1]) == list(range(5598))
        counts = np.bincount(pairs[:, 0], minlength=4514)
        assert counts.min() >= 1 and counts.max() <= 2

    def test_equal_counts_permutation(self):
        pairs = data.equalize_and_pair(np.empty((10, 1)), np.empty((10, 1)), seed=2)
        assert sorted(pairs[:, 0]) == list(range(10))
        assert sorted(pairs[:, 1]) == list(range(10))

    def test_deterministic(self):
        a = data.equalize_and_pair(np.empty((7, 1)), np.empty((20, 1)), seed=4)
        b = data.equalize_and_pair(np.empty((7, 1)), np.empty((20, 1)), seed=4)
        np.testing.assert_array_equal(a, b)

    def test_empty(self):
        with pytest.raises(LengthError):
            data.equalize_and_pair(np.empty((0, 1)), np.empty((3, 1)), seed=0)


class TestSplit:
    def test_full_scale_sizes(self):
        tr, va, te = data.split_pairs(np.arange(5598), seed=0)
        assert (len(tr), len(va), len(te)) == (4478, 560, 560)

    def test_ten(self):
        assert tuple(map(len, data.split_pairs(np.arange(10), seed=0))) == (8, 1, 1)

    @pytest.mark.parametrize("seed", range(10))
    def test_disjoint_cover(self, seed):
        tr, va, te = data.split_pairs(np.arange(64), seed)
        assert set(tr).isdisjoint(va) and set(tr).isdisjoint(te) and set(va).isdisjoint(te)
        assert sorted(np.concatenate([tr, va, te])) == list(range(64))

    def test_too_few(self):
        with pytest.raises(LengthError):
            data.split_pairs(np.arange(9), seed=0)


@pytest.fixture(scope="module")
def corpus():
    return data.synth_corpus(12, 12, seed=1)


class TestMixedSets:
    def test_training_set_size_and_snr(self, corpus):
        eeg, emg = corpus
        pairs = data.equalize_and_pair(eeg, emg, 0)
        ds = data.build_training_set(eeg, emg, pairs, seed=0)
        assert len(ds) == 12 * 10
        assert ds.snr_db.min() >= -7.0 and ds.snr_db.max() <= 2.0

    def test_full_scale_count(self):
        eeg = np.random.default_rng(0).standard_normal((4478, 4))
        emg = np.random.default_rng(1).standard_normal((4478, 4))
        pairs = np.stack([np.arange(4478)] * 2, axis=1)
        assert len(data.build_training_set(eeg, emg, pairs, seed=0)) == 44_780

    def test_example_invariants(self, corpus):
        eeg, emg = corpus
        pairs = data.equalize_and_pair(eeg, emg, 0)
        ds = data.build_training_set(eeg, emg, pairs, seed=3)
        np.testing.assert_allclose(ds.y_hat.std(axis=1), 1.0, atol=1e-9)
        for i in range(len(ds)):
            x = eeg[ds.eeg_index[i]]
            n = emg[ds.emg_index[i]]
            y = ds.y_hat[i] * ds.sigma_y[i]
            np.testing.assert_allclose(y, x + ds.lam[i] * n, rtol=1e-9, atol=1e-12)
            np.testing.assert_allclose(ds.x_hat[i] * ds.sigma_y[i], x, rtol=1e-12)
            assert abs(metrics.snr_of(x, y - x) - ds.snr_db[i]) < 1e-9

    def test_pairings_fixed_across_remixes(self, corpus):
        eeg, emg = corpus
        pairs = data.equalize_and_pair(eeg, emg, 0)
        ds = data.build_training_set(eeg, emg, pairs, seed=0, remix_count=3)
        n = len(pairs)
        for r in range(3):
            np.testing.assert_array_equal(ds.eeg_index[r * n:(r + 1) * n], pairs[:, 0])

    def test_eval_set_levels(self, corpus):
        eeg, emg = corpus
        pairs = data.equalize_and_pair(eeg, emg, 0)[:6]
        ds = data.build_eval_set(eeg, emg, pairs)
        assert len(ds) == 60
        levels, counts = np.unique(ds.snr_db, return_counts=True)
        np.testing.assert_array_equal(levels, np.arange(-7, 3))
        np.testing.assert_array_equal(counts, 6)

    def test_eval_set_single_pair(self, corpus):
        eeg, emg = corpus
        ds = data.build_eval_set(eeg, emg, [(0, 0)])
        np.testing.assert_array_equal(ds.snr_db, np.arange(-7, 3))

    def test_degenerate_emg_skipped(self, corpus):
        eeg, emg = corpus
        emg = emg.copy()
        emg[3] = 0.0
        pairs = np.stack([np.arange(12)] * 2, axis=1)
        ds = data.build_training_set(eeg, emg, pairs, seed=0, remix_count=2)
        assert ds.skipped == 2
        assert len(ds) == 22

    def test_deterministic(self, corpus):
        eeg, emg = corpus
        pairs = data.equalize_and_pair(eeg, emg, 0)
        a = data.build_training_set(eeg, emg, pairs, seed=9)
        b = data.build_training_set(eeg, emg, pairs, seed=9)
        np.testing.assert_array_equal(a.y_hat, b.y_hat)
        np.testing.assert_array_equal(a.snr_db, b.snr_db)


class TestSynth:
    def test_shapes_and_rms(self):
        eeg, emg = data.synth_corpus(5, 7, seed=0)
        assert eeg.shape == (5, 1024) and emg.shape == (7, 1024)
        np.testing.assert_allclose(np.sqrt(np.mean(eeg ** 2, axis=1)), 1.0, rtol=1e-12)
        np.testing.assert_allclose(np.sqrt(np.mean(emg ** 2, axis=1)), 1.0, rtol=1e-12)

    def test_deterministic(self):
        a = data.synth_corpus(4, 4, seed=3)
        b = data.synth_corpus(4, 4, seed=3)
        np.testing.assert_array_equal(a[0], b[0])
        np.testing.assert_array_equal(a[1], b[1])

    def test_spectral_content(self):
        eeg, emg = data.synth_corpus(32, 32, seed=0)
        freqs = metrics.psd(eeg[0]).frequencies
        eeg_psd = np.mean([metrics.psd(r).power for r in eeg], axis=0)
        emg_psd = np.mean([metrics.psd(r).power for r in emg], axis=0)
        assert eeg_psd[freqs < 30].sum() / eeg_psd.sum() > 0.8
        assert emg_psd[freqs > 20].sum() / emg_psd.sum() > 0.8
