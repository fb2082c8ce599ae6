import numpy as np
import pytest

from sparse_diarize.signal_io import (
    BadMagicError,
    ChunkGrid,
    DimensionMismatchError,
    EmbeddingSignal,
    TruncatedFileError,
    load_signal,
    make_chunk_grid,
    normalize_columns,
    save_signal,
)


def random_unit_signal(m, t, seed=0, f32=True):
    """Random unit-column signal; f32 makes every value float32-representable."""
    rng = np.random.default_rng(seed)
    data = rng.standard_normal((m, t))
    if f32:
        data = data.astype(np.float32)
        data /= np.linalg.norm(data, axis=0, keepdims=True).astype(np.float32)
        data = data.astype(np.float64)
    else:
        data /= np.linalg.norm(data, axis=0, keepdims=True)
    return EmbeddingSignal(data, step_seconds=1.0, window_seconds=6.0)


class TestMakeChunkGrid:
    def test_hour_long_audio_hits_one_second_step(self):
        grid = make_chunk_grid(3605.0, 6.0, 1.0, 3600)
        assert grid.step_seconds == 1.0
        assert grid.num_chunks == 3600

    def test_half_hour_audio_shrinks_step(self):
        grid = make_chunk_grid(1806.0, 6.0, 1.0, 3600)
        assert grid.step_seconds == pytest.approx(1800.0 / 3599.0, rel=1e-12)
        assert grid.num_chunks == 3600

    def test_barely_long_enough_audio_still_yields_min_chunks(self):
        grid = make_chunk_grid(7.0, 6.0, 1.0, 3600)
        assert grid.step_seconds == pytest.approx(1.0 / 3599.0, rel=1e-12)
        assert grid.num_chunks == 3600

    def test_audio_shorter_than_window_rejected(self):
        with pytest.raises(ValueError, match="shorter than one window"):
            make_chunk_grid(5.0, 6.0)

    @pytest.mark.parametrize("seed", range(20))
    def test_step_cap_and_min_chunk_guarantee(self, seed):
        rng = np.random.default_rng(seed)
        duration = float(rng.uniform(7.0, 5000.0))
        max_step = float(rng.uniform(0.05, 2.0))
        min_chunks = int(rng.integers(2, 5000))
        grid = make_chunk_grid(duration, 6.0, max_step, min_chunks)
        assert grid.step_seconds <= max_step + 1e-15
        assert grid.num_chunks >= min_chunks
        # grid never extends past the audio: last start + window <= duration (+step slack)
        last_start = (grid.num_chunks - 1) * grid.step_seconds
        assert last_start + grid.window_seconds <= duration + grid.step_seconds


class TestNormalizeColumns:
    def test_three_four_five_column(self):
        m = np.zeros((6, 1))
        m[0, 0], m[1, 0] = 3.0, 4.0
        sig = normalize_columns(m)
        assert sig.data[0, 0] == pytest.approx(0.6, abs=1e-15)
        assert sig.data[1, 0] == pytest.approx(0.8, abs=1e-15)
        assert np.all(sig.data[2:, 0] == 0.0)

    def test_zero_column_preserved_exactly(self):
        m = np.zeros((4, 3))
        m[:, 0] = [1, 2, 3, 4]
        sig = normalize_columns(m)
        assert np.all(sig.data[:, 1] == 0.0)
        assert np.all(sig.data[:, 2] == 0.0)

    def test_unit_column_unchanged_within_tolerance(self):
        col = np.array([[0.6], [0.8]])
        sig = normalize_columns(col)
        assert np.max(np.abs(sig.data - col)) < 1e-12

    def test_idempotent(self):
        rng = np.random.default_rng(7)
        m = rng.standard_normal((8, 20)) * rng.uniform(0.1, 10)
        m[:, 3] = 0.0
        once = normalize_columns(m).data
        twice = normalize_columns(once).data
        np.testing.assert_array_almost_equal(twice, once, decimal=15)

    def test_rejects_non_finite(self):
        m = np.ones((2, 2))
        m[0, 0] = np.nan
        with pytest.raises(ValueError, match="finite"):
            normalize_columns(m)


class TestEmbeddingSignalInvariants:
    def test_rejects_non_unit_columns(self):
        with pytest.raises(ValueError, match="unit or all-zero"):
            EmbeddingSignal(np.full((3, 2), 0.9), step_seconds=1.0)

    def test_rejects_window_below_step(self):
        with pytest.raises(ValueError, match="window_seconds"):
            EmbeddingSignal(np.eye(3), step_seconds=2.0, window_seconds=1.0)

    def test_accepts_zero_columns(self):
        data = np.zeros((3, 4))
        data[0, 0] = 1.0
        sig = EmbeddingSignal(data, step_seconds=0.5)
        assert sig.num_dims == 3 and sig.num_steps == 4


class TestRoundTrip:
    def test_binary_round_trip_is_identity(self, tmp_path):
        sig = random_unit_signal(4, 10, seed=1)
        path = tmp_path / "sig.embsig"
        save_signal(sig, path)
        back = load_signal(path)
        assert np.array_equal(back.data, sig.data)
        assert back.step_seconds == sig.step_seconds
        assert back.window_seconds == sig.window_seconds

    @pytest.mark.parametrize("seed", range(5))
    def test_binary_round_trip_many_shapes(self, tmp_path, seed):
        rng = np.random.default_rng(seed)
        m, t = int(rng.integers(1, 40)), int(rng.integers(1, 60))
        sig = random_unit_signal(m, t, seed=seed)
        path = tmp_path / "x.embsig"
        save_signal(sig, path)
        back = load_signal(path)
        assert np.array_equal(back.data, sig.data)

    def test_csv_round_trip_close(self, tmp_path):
        sig = random_unit_signal(5, 7, seed=2, f32=False)
        path = tmp_path / "sig.csv"
        save_signal(sig, path, format="csv")
        back = load_signal(path, format="csv")
        assert np.max(np.abs(back.data - sig.data)) < 1e-6
        assert back.step_seconds == pytest.approx(sig.step_seconds, rel=1e-9)

    def test_auto_detects_csv(self, tmp_path):
        sig = random_unit_signal(3, 4, seed=3)
        path = tmp_path / "sig.txt"
        save_signal(sig, path, format="csv")
        assert load_signal(path).num_dims == 3

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.embsig"
        path.write_bytes(b"NOTMAGIC" + b"\x00" * 64)
        with pytest.raises(BadMagicError):
            load_signal(path, format="embsig")

    def test_truncated_payload(self, tmp_path):
        sig = random_unit_signal(8, 10, seed=4)
        path = tmp_path / "trunc.embsig"
        save_signal(sig, path)
        raw = path.read_bytes()
        path.write_bytes(raw[: len(raw) - 40])  # drop one column
        with pytest.raises(TruncatedFileError):
            load_signal(path)

    def test_payload_longer_than_header(self, tmp_path):
        sig = random_unit_signal(4, 4, seed=5)
        path = tmp_path / "long.embsig"
        save_signal(sig, path)
        path.write_bytes(path.read_bytes() + b"\x00\x00\x00\x00")
        with pytest.raises(DimensionMismatchError):
            load_signal(path)

    def test_csv_wrong_row_width(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("2,2,1.0,6.0\n1.0,0.0\n1.0\n")
        with pytest.raises(DimensionMismatchError, match="row 3"):
            load_signal(path, format="csv")

    def test_missing_file(self, tmp_path):
        with pytest.raises(OSError):
            load_signal(tmp_path / "nope.embsig")


def test_chunk_grid_total_duration():
    grid = ChunkGrid(step_seconds=1.0, window_seconds=6.0, num_chunks=10)
    assert grid.total_duration == pytest.approx(15.0)
    assert grid.start_time(3) == pytest.approx(3.0)
