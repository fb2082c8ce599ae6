"""Command-line pipeline: estimate-k, diarize, eval, and simulate subcommands.

Exit codes: 0 success, 2 usage error, 3 I/O or file-format error,
4 numerical failure. Output files are written atomically (temp file plus
rename), so a failing run never leaves partial output behind.
"""

from __future__ import annotations

import argparse
import os
import sys

_THREAD_ENV = "SPARSE_DIARIZE_THREADS"

EXIT_USAGE = 2
EXIT_IO = 3
EXIT_NUMERIC = 4

_PROGRESS_EVERY = 500


def _apply_thread_cap() -> None:
    cap = os.environ.get(_THREAD_ENV)
    if not cap:
        return
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(var, cap)


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


def _nonneg_float(text: str) -> float:
    value = float(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be non-negative, got {text}")
    return value


def _unit_open_float(text: str) -> float:
    value = float(text)
    if not 0.0 < value < 1.0:
        raise argparse.ArgumentTypeError(f"must lie in (0, 1), got {text}")
    return value


def _fraction_float(text: str) -> float:
    value = float(text)
    if not 0.0 <= value < 1.0:
        raise argparse.ArgumentTypeError(f"must lie in [0, 1), got {text}")
    return value


def _add_hyperparam_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--lambda1", type=_nonneg_float, default=0.3366)
    parser.add_argument("--lambda2", type=_nonneg_float, default=0.2424)
    parser.add_argument("--lambda3", type=_nonneg_float, default=0.06)
    parser.add_argument("--lr-psi", type=_positive_float, default=0.01)
    parser.add_argument("--lr-a", type=_positive_float, default=0.01)
    parser.add_argument("--max-iters", type=_positive_int, default=5000)
    parser.add_argument("--rel-tol", type=_positive_float, default=1e-5)
    parser.add_argument("--patience", type=_positive_int, default=10)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sparse-diarize",
        description="Overlap-aware unsupervised speaker diarization via sparse factorization.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate-k", help="print the spectrum knee and speaker budget")
    p.add_argument("signal", help="EMBSIG01 or CSV embedding-signal file")
    p.add_argument("--format", choices=("auto", "embsig", "csv"), default="auto")
    p.add_argument("--sensitivity", type=_positive_float, default=1.0)

    p = sub.add_parser("diarize", help="factorize a signal and write an RTTM")
    p.add_argument("signal")
    p.add_argument("out_rttm")
    p.add_argument("--format", choices=("auto", "embsig", "csv"), default="auto")
    p.add_argument("--k", type=_positive_int, default=None, help="speaker budget override")
    p.add_argument("--sensitivity", type=_positive_float, default=1.0)
    p.add_argument("--threshold", type=_unit_open_float, default=0.4)
    p.add_argument("--min-segment-steps", type=_positive_int, default=2)
    p.add_argument("--seed", type=int, default=0)
    _add_hyperparam_flags(p)

    p = sub.add_parser("eval", help="score a hypothesis RTTM against a reference RTTM")
    p.add_argument("ref_rttm")
    p.add_argument("hyp_rttm")
    p.add_argument("--duration", type=_positive_float, default=None)
    p.add_argument("--collar", type=_nonneg_float, default=0.0)

    p = sub.add_parser("simulate", help="write a synthetic signal plus ground-truth RTTM")
    p.add_argument("out_prefix")
    p.add_argument("--config", default=None, help="key=value file with scenario fields")
    p.add_argument("--speakers", type=_positive_int, default=None)
    p.add_argument("--dim", type=_positive_int, default=None)
    p.add_argument("--steps", type=_positive_int, default=None)
    p.add_argument("--mean-turn-steps", type=_positive_int, default=None)
    p.add_argument("--step-seconds", type=_positive_float, default=None)
    p.add_argument("--window-seconds", type=_positive_float, default=None)
    p.add_argument("--overlap", type=_fraction_float, default=None)
    p.add_argument("--silence", type=_fraction_float, default=None)
    p.add_argument("--noise-sigma", type=_nonneg_float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--orthogonalize", action="store_true", default=None)
    p.add_argument("--format", choices=("embsig", "csv"), default="embsig")
    return parser


def main(argv: list[str] | None = None) -> int:
    _apply_thread_cap()
    args = build_parser().parse_args(argv)

    from .metrics import RttmParseError
    from .optimizer import DivergenceError
    from .signal_io import SignalFormatError

    handlers = {
        "estimate-k": _cmd_estimate_k,
        "diarize": _cmd_diarize,
        "eval": _cmd_eval,
        "simulate": _cmd_simulate,
    }
    try:
        return handlers[args.command](args)
    except (SignalFormatError, RttmParseError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except DivergenceError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"invalid arguments: {exc}", file=sys.stderr)
        return EXIT_USAGE


def _write_text_atomic(path: str, text: str) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="ascii", newline="\n") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _cmd_estimate_k(args: argparse.Namespace) -> int:
    from .rank_estimation import estimate_max_speakers
    from .signal_io import load_signal

    signal = load_signal(args.signal, format=args.format)
    report = estimate_max_speakers(signal, sensitivity=args.sensitivity)
    top = report.singular_values[:64]
    print("singular_values=" + ",".join(f"{v:.6g}" for v in top))
    print(f"knee_index={report.knee_index}")
    print(f"k_max={report.k_max}")
    return 0


def _cmd_diarize(args: argparse.Namespace) -> int:
    from .decoder import decode
    from .metrics import LabeledTimeline, emit_rttm
    from .optimizer import Hyperparams, factorize, loss_trace_csv
    from .rank_estimation import estimate_max_speakers
    from .signal_io import load_signal

    signal = load_signal(args.signal, format=args.format)
    if args.k is not None:
        k = args.k
    else:
        k = estimate_max_speakers(signal, sensitivity=args.sensitivity).k_max
    hp = Hyperparams(
        lambda1=args.lambda1,
        lambda2=args.lambda2,
        lambda3=args.lambda3,
        lr_psi=args.lr_psi,
        lr_a=args.lr_a,
        max_iters=args.max_iters,
        rel_tol=args.rel_tol,
        patience=args.patience,
        seed=args.seed,
    )

    def progress(it, lb):
        if it % _PROGRESS_EVERY == 0:
            print(f"iter {it} loss {lb.total:.6f}", file=sys.stderr)

    _, activations, trace = factorize(signal, k, hp, progress=progress)
    diarization = decode(
        activations,
        signal.grid(),
        threshold=args.threshold,
        min_segment_steps=args.min_segment_steps,
    )
    file_id = os.path.splitext(os.path.basename(args.signal))[0]
    timeline = LabeledTimeline.from_segments(
        ((s.speaker, s.start_seconds, s.end_seconds) for s in diarization.segments),
        total_duration=diarization.total_duration,
    )
    _write_text_atomic(args.out_rttm, emit_rttm(timeline, file_id))
    trace_path = os.path.splitext(args.out_rttm)[0] + ".loss.csv"
    _write_text_atomic(trace_path, loss_trace_csv(trace))
    print(f"k={k}")
    print(f"iterations={len(trace) - 1}")
    print(f"final_loss={trace[-1].total:.6f}")
    print(f"speakers={len(diarization.speakers())}")
    print(f"speech_seconds={diarization.speech_duration():.3f}")
    print(f"rttm={args.out_rttm}")
    print(f"loss_trace={trace_path}")
    return 0


def _cmd_eval(args: argparse.Namespace) -> int:
    from .metrics import coverage, der, f_score, parse_rttm, purity

    with open(args.ref_rttm, "r", encoding="ascii") as fh:
        ref_text = fh.read()
    with open(args.hyp_rttm, "r", encoding="ascii") as fh:
        hyp_text = fh.read()
    duration = args.duration
    if duration is None:
        probe_ref = parse_rttm(ref_text)
        probe_hyp = parse_rttm(hyp_text)
        duration = max(probe_ref.total_duration, probe_hyp.total_duration)
    reference = parse_rttm(ref_text, total_duration=duration)
    hypothesis = parse_rttm(hyp_text, total_duration=duration)

    report = der(reference, hypothesis, collar_seconds=args.collar)
    p = purity(reference, hypothesis)
    c = coverage(reference, hypothesis)
    f = f_score(p, c)
    print(f"der={report.der:.6f}")
    print(f"false_alarm_seconds={report.false_alarm_seconds:.6f}")
    print(f"missed_seconds={report.missed_seconds:.6f}")
    print(f"confusion_seconds={report.confusion_seconds:.6f}")
    print(f"purity={p:.6f}")
    print(f"coverage={c:.6f}")
    print(f"f_score={f:.6f}")
    print("metric_csv=der,false_alarm_seconds,missed_seconds,confusion_seconds,purity,coverage,f_score")
    print(
        f"values_csv={report.der:.6f},{report.false_alarm_seconds:.6f},"
        f"{report.missed_seconds:.6f},{report.confusion_seconds:.6f},"
        f"{p:.6f},{c:.6f},{f:.6f}"
    )
    return 0


_SCENARIO_KEYS = {
    "speakers": ("num_speakers", int),
    "dim": ("embedding_dim", int),
    "steps": ("num_steps", int),
    "mean_turn_steps": ("mean_turn_steps", int),
    "step_seconds": ("step_seconds", float),
    "window_seconds": ("window_seconds", float),
    "overlap": ("overlap_fraction", float),
    "silence": ("silence_fraction", float),
    "noise_sigma": ("noise_sigma", float),
    "seed": ("seed", int),
    "orthogonalize": ("orthogonalize", lambda v: v.lower() in ("1", "true", "yes")),
}


def _cmd_simulate(args: argparse.Namespace) -> int:
    from .metrics import LabeledTimeline, emit_rttm
    from .signal_io import save_signal
    from .simulator import SimScenario, simulate

    fields: dict = {}
    if args.config:
        with open(args.config, "r", encoding="ascii") as fh:
            for lineno, line in enumerate(fh, start=1):
                stripped = line.strip()
                if not stripped or stripped.startswith("#"):
                    continue
                if "=" not in stripped:
                    raise ValueError(f"{args.config}:{lineno}: expected key=value")
                key, value = (part.strip() for part in stripped.split("=", 1))
                if key not in _SCENARIO_KEYS:
                    raise ValueError(f"{args.config}:{lineno}: unknown scenario key {key!r}")
                name, cast = _SCENARIO_KEYS[key]
                fields[name] = cast(value)
    overrides = {
        "num_speakers": args.speakers,
        "embedding_dim": args.dim,
        "num_steps": args.steps,
        "mean_turn_steps": args.mean_turn_steps,
        "step_seconds": args.step_seconds,
        "window_seconds": args.window_seconds,
        "overlap_fraction": args.overlap,
        "silence_fraction": args.silence,
        "noise_sigma": args.noise_sigma,
        "seed": args.seed,
        "orthogonalize": args.orthogonalize,
    }
    fields.update({k: v for k, v in overrides.items() if v is not None})
    for required in ("num_speakers", "embedding_dim", "num_steps"):
        if required not in fields:
            raise ValueError(f"scenario field {required} missing (flag or config)")
    scenario = SimScenario(**fields)

    signal, _, reference = simulate(scenario)
    ext = "embsig" if args.format == "embsig" else "csv"
    signal_path = f"{args.out_prefix}.{ext}"
    save_signal(signal, signal_path, format=args.format)
    file_id = os.path.basename(args.out_prefix)
    timeline = LabeledTimeline.from_segments(
        ((s.speaker, s.start_seconds, s.end_seconds) for s in reference.segments),
        total_duration=reference.total_duration,
    )
    _write_text_atomic(f"{args.out_prefix}.rttm", emit_rttm(timeline, file_id))
    print(f"signal={signal_path}")
    print(f"reference={args.out_prefix}.rttm")
    print(
        f"scenario=speakers:{scenario.num_speakers},dim:{scenario.embedding_dim},"
        f"steps:{scenario.num_steps},overlap:{scenario.overlap_fraction},"
        f"silence:{scenario.silence_fraction},noise:{scenario.noise_sigma},seed:{scenario.seed}"
    )
    print(f"speech_seconds={reference.speech_duration():.3f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
