"""Overlap-aware unsupervised speaker diarization via sparse matrix factorization.

The pipeline: load or simulate an embedding signal, estimate the speaker
budget from its singular-value spectrum, factorize it into a speaker basis
and an activation matrix, decode activations into timed segments, and score
against a reference with standard diarization metrics.
"""

from .signal_io import (
    ChunkGrid,
    EmbeddingSignal,
    SignalFormatError,
    load_signal,
    make_chunk_grid,
    normalize_columns,
    save_signal,
)
from .rank_estimation import SpectrumReport, estimate_max_speakers, kneedle_knee, singular_values
from .optimizer import (
    ActivationMatrix,
    BasisMatrix,
    DivergenceError,
    Hyperparams,
    LossBreakdown,
    OptimizerState,
    adam_step,
    compute_loss,
    factorize,
    grad_a,
    grad_psi,
    jitter_loss,
    project_interval,
    project_unit_disk,
    shrink,
)
from .decoder import Diarization, Segment, decode, prune_speakers
from .metrics import (
    DerReport,
    LabeledTimeline,
    RttmParseError,
    coverage,
    der,
    emit_rttm,
    f_score,
    parse_rttm,
    purity,
)
from .simulator import SimScenario, simulate

__version__ = "0.1.0"

__all__ = [
    "ActivationMatrix",
    "BasisMatrix",
    "ChunkGrid",
    "DerReport",
    "Diarization",
    "DivergenceError",
    "EmbeddingSignal",
    "Hyperparams",
    "LabeledTimeline",
    "LossBreakdown",
    "OptimizerState",
    "RttmParseError",
    "Segment",
    "SignalFormatError",
    "SimScenario",
    "SpectrumReport",
    "adam_step",
    "compute_loss",
    "coverage",
    "decode",
    "der",
    "emit_rttm",
    "estimate_max_speakers",
    "f_score",
    "factorize",
    "grad_a",
    "grad_psi",
    "jitter_loss",
    "kneedle_knee",
    "load_signal",
    "make_chunk_grid",
    "normalize_columns",
    "parse_rttm",
    "project_interval",
    "project_unit_disk",
    "prune_speakers",
    "purity",
    "save_signal",
    "shrink",
    "simulate",
]
