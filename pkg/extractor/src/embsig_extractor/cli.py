"""``extract`` command: audio in, EMBSIG01 embedding signal out."""

from __future__ import annotations

import argparse
import sys


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {text}")
    return value


def _positive_float(text: str) -> float:
    value = float(text)
    if value <= 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="extract",
        description="Slide a window over audio and write per-chunk speaker embeddings.",
    )
    parser.add_argument("--audio", required=True, help="input PCM WAV file")
    parser.add_argument("--out", required=True, help="output .embsig path")
    parser.add_argument("--window-seconds", type=_positive_float, default=6.0)
    parser.add_argument("--max-step-seconds", type=_positive_float, default=1.0)
    parser.add_argument("--min-chunks", type=_positive_int, default=3600)
    parser.add_argument("--embedder", default="spectral")
    parser.add_argument("--detector", default="energy")
    parser.add_argument("--dim", type=_positive_int, default=128)
    parser.add_argument("--threshold-db", type=float, default=-40.0)
    parser.add_argument("--batch-size", type=_positive_int, default=512)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)

    from .audio import UnsupportedAudioError
    from .extract import ExtractionConfig, extract
    from .features import ModelLoadError

    try:
        config = ExtractionConfig(
            audio_path=args.audio,
            output_path=args.out,
            window_seconds=args.window_seconds,
            max_step_seconds=args.max_step_seconds,
            min_chunks=args.min_chunks,
            embedder=args.embedder,
            detector=args.detector,
            embedding_dim=args.dim,
            detector_threshold_db=args.threshold_db,
            chunk_batch=args.batch_size,
        )
        summary = extract(config)
    except (UnsupportedAudioError, ModelLoadError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"invalid arguments: {exc}", file=sys.stderr)
        return 2
    print(f"output={summary.output_path}")
    print(f"dims={summary.num_dims}")
    print(f"chunks={summary.num_chunks}")
    print(f"speech_chunks={summary.num_speech_chunks}")
    print(f"step_seconds={summary.step_seconds:.9g}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
