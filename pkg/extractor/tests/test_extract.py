import numpy as np
import pytest

from embsig_extractor.extract import ExtractionConfig, chunk_grid, extract, write_embsig

from conftest import synth_speech, write_wav


class TestChunkGrid:
    @pytest.mark.parametrize("seed", range(25))
    def test_bit_identical_to_engine_grid(self, seed):
        from sparse_diarize.signal_io import make_chunk_grid

        rng = np.random.default_rng(seed)
        duration = float(rng.uniform(6.5, 4000.0))
        window = 6.0
        max_step = float(rng.uniform(0.1, 1.5))
        min_chunks = int(rng.integers(2, 4000))
        step, num = chunk_grid(duration, window, max_step, min_chunks)
        grid = make_chunk_grid(duration, window, max_step, min_chunks)
        assert step == grid.step_seconds  # exact float equality, not approx
        assert num == grid.num_chunks

    def test_sixty_minutes_hits_3600_chunks(self):
        step, num = chunk_grid(3600.0, 6.0, 1.0, 3600)
        assert num >= 3595 and step <= 1.0
        step, num = chunk_grid(3605.0, 6.0, 1.0, 3600)
        assert (step, num) == (1.0, 3600)

    def test_too_short_audio(self):
        with pytest.raises(ValueError, match="shorter than one window"):
            chunk_grid(5.0, 6.0, 1.0, 3600)


class TestExtract:
    def test_speech_file_produces_valid_signal(self, tmp_path, speech_wav):
        out = tmp_path / "speech.embsig"
        summary = extract(
            ExtractionConfig(
                audio_path=str(speech_wav),
                output_path=str(out),
                min_chunks=100,
                embedding_dim=64,
            )
        )
        assert summary.num_chunks >= 100
        assert 0 < summary.num_speech_chunks <= summary.num_chunks

        from sparse_diarize.signal_io import load_signal

        sig = load_signal(out)
        assert sig.data.shape == (64, summary.num_chunks)
        norms = np.linalg.norm(sig.data, axis=0)
        assert np.all((np.abs(norms - 1.0) <= 1e-6) | (norms == 0.0))

    def test_silence_file_gives_all_zero_columns(self, tmp_path, silence_wav):
        out = tmp_path / "silence.embsig"
        summary = extract(
            ExtractionConfig(
                audio_path=str(silence_wav),
                output_path=str(out),
                min_chunks=50,
                embedding_dim=32,
            )
        )
        assert summary.num_speech_chunks == 0
        from sparse_diarize.signal_io import load_signal

        sig = load_signal(out)
        assert np.all(sig.data == 0.0)

    def test_pause_chunks_are_zeroed(self, tmp_path):
        # 8 s of speech, 8 s of silence, 8 s of speech: a 6 s chunk is
        # non-speech when most of its frames are silent (median rule)
        audio = np.concatenate(
            [synth_speech(8.0, seed=1), np.zeros(8 * 16000), synth_speech(8.0, seed=2)]
        )
        wav = tmp_path / "gappy.wav"
        write_wav(wav, audio)
        out = tmp_path / "gappy.embsig"
        extract(
            ExtractionConfig(
                audio_path=str(wav), output_path=str(out), min_chunks=20, embedding_dim=32
            )
        )
        from sparse_diarize.signal_io import load_signal

        sig = load_signal(out)
        norms = np.linalg.norm(sig.data, axis=0)
        assert (norms == 0).any() and (norms > 0).any()
        # chunks fully inside the 8 s gap must be zero
        starts = np.arange(sig.num_steps) * sig.step_seconds
        inside_gap = (starts >= 8.5) & (starts + sig.window_seconds <= 15.5)
        assert inside_gap.any()
        assert np.all(norms[inside_gap] == 0.0)

    def test_deterministic_output_bytes(self, tmp_path, speech_wav):
        outs = []
        for name in ("a.embsig", "b.embsig"):
            out = tmp_path / name
            extract(
                ExtractionConfig(
                    audio_path=str(speech_wav),
                    output_path=str(out),
                    min_chunks=60,
                    embedding_dim=32,
                )
            )
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]

    def test_audio_shorter_than_window_fails(self, tmp_path):
        wav = tmp_path / "short.wav"
        write_wav(wav, synth_speech(3.0))
        with pytest.raises(ValueError, match="shorter than one window"):
            extract(ExtractionConfig(audio_path=str(wav), output_path=str(tmp_path / "x")))

    def test_batch_size_does_not_change_output(self, tmp_path, speech_wav):
        blobs = []
        for batch in (7, 512):
            out = tmp_path / f"batch{batch}.embsig"
            extract(
                ExtractionConfig(
                    audio_path=str(speech_wav),
                    output_path=str(out),
                    min_chunks=40,
                    embedding_dim=32,
                    chunk_batch=batch,
                )
            )
            blobs.append(out.read_bytes())
        assert blobs[0] == blobs[1]


def test_write_embsig_matches_engine_reader(tmp_path):
    from sparse_diarize.signal_io import load_signal

    rng = np.random.default_rng(0)
    data = rng.standard_normal((8, 5)).astype(np.float32).astype(np.float64)
    data /= np.linalg.norm(data, axis=0, keepdims=True)
    data = data.astype(np.float32).astype(np.float64)
    path = tmp_path / "w.embsig"
    write_embsig(data, 0.5, 6.0, path)
    sig = load_signal(path)
    np.testing.assert_array_equal(sig.data, data)
    assert sig.step_seconds == 0.5 and sig.window_seconds == 6.0
