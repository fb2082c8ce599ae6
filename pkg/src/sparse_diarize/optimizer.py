"""Sparse factorization of an embedding signal into a speaker basis and activations.

Minimizes, over Psi (M x k, columns inside the unit disk) and A
(k x T, entries in [0, 1]):

    ||E - Psi A||_1 + lambda1 ||Psi||_1 + lambda2 ||A||_1 + lambda3 J(A)

where J is the mean absolute difference between consecutive activation
values per row. The solver alternates Adam subgradient steps on Psi and A
with soft-threshold shrinkage and feasibility projections after each
half-step.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .signal_io import EmbeddingSignal

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

BASIS_NORM_SLACK = 1e-9
DIVERGENCE_FACTOR = 10.0


class DivergenceError(RuntimeError):
    """Raised when the total loss blows up or turns non-finite mid-run."""


def _as_array(matrix) -> np.ndarray:
    return np.asarray(getattr(matrix, "data", matrix), dtype=np.float64)


@dataclass(frozen=True)
class BasisMatrix:
    """M x k candidate speaker embeddings; every column lies in the unit disk."""

    data: np.ndarray

    def __post_init__(self) -> None:
        data = np.asarray(self.data, dtype=np.float64)
        object.__setattr__(self, "data", data)
        if data.ndim != 2:
            raise ValueError(f"basis must be 2-D, got shape {data.shape}")
        norms = np.linalg.norm(data, axis=0)
        if np.any(norms > 1.0 + BASIS_NORM_SLACK):
            c = int(np.argmax(norms))
            raise ValueError(f"basis column {c} has norm {norms[c]:.12g} > 1")


@dataclass(frozen=True)
class ActivationMatrix:
    """k x T per-speaker activity levels, each entry in [0, 1]."""

    data: np.ndarray

    def __post_init__(self) -> None:
        data = np.asarray(self.data, dtype=np.float64)
        object.__setattr__(self, "data", data)
        if data.ndim != 2:
            raise ValueError(f"activations must be 2-D, got shape {data.shape}")
        if data.size and (data.min() < 0.0 or data.max() > 1.0):
            raise ValueError("activation entries must lie in [0, 1]")


@dataclass(frozen=True)
class Hyperparams:
    lambda1: float = 0.3366
    lambda2: float = 0.2424
    lambda3: float = 0.06
    lr_psi: float = 0.01
    lr_a: float = 0.01
    max_iters: int = 5000
    rel_tol: float = 1e-5
    patience: int = 10
    seed: int = 0

    def __post_init__(self) -> None:
        if min(self.lambda1, self.lambda2, self.lambda3) < 0:
            raise ValueError("regularization weights must be non-negative")
        if self.lr_psi <= 0 or self.lr_a <= 0:
            raise ValueError("learning rates must be positive")
        if self.max_iters < 1 or self.patience < 1:
            raise ValueError("max_iters and patience must be positive")
        if self.rel_tol <= 0:
            raise ValueError("rel_tol must be positive")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must fit in an unsigned 64-bit integer")


@dataclass
class OptimizerState:
    """Adam first/second moment accumulators for one parameter matrix."""

    m: np.ndarray
    v: np.ndarray
    step: int = 0
    beta1: float = ADAM_BETA1
    beta2: float = ADAM_BETA2
    eps: float = ADAM_EPS

    @classmethod
    def for_param(cls, param: np.ndarray) -> "OptimizerState":
        return cls(m=np.zeros_like(param), v=np.zeros_like(param))


@dataclass(frozen=True)
class LossBreakdown:
    """Components of the objective; total applies the lambda weights."""

    reconstruction: float
    l1_psi: float
    l1_a: float
    jitter: float
    total: float


def jitter_loss(a) -> float:
    """Mean absolute difference between consecutive entries in each activation row."""
    arr = _as_array(a)
    k, t = arr.shape
    if t < 2:
        return 0.0
    return float(np.abs(np.diff(arr, axis=1)).sum() / (k * t))


def compute_loss(signal, psi, a, hp: Hyperparams) -> LossBreakdown:
    """Evaluate all components of the objective at (psi, a).

    ``signal``, ``psi``, and ``a`` may be the typed wrappers or plain arrays;
    feasibility is not required here.
    """
    e = _as_array(signal)
    psi_arr, a_arr = _as_array(psi), _as_array(a)
    _check_shapes(e, psi_arr, a_arr)
    rec = float(np.abs(e - psi_arr @ a_arr).sum())
    l1p = float(np.abs(psi_arr).sum())
    l1a = float(np.abs(a_arr).sum())
    jit = jitter_loss(a_arr)
    total = rec + hp.lambda1 * l1p + hp.lambda2 * l1a + hp.lambda3 * jit
    return LossBreakdown(reconstruction=rec, l1_psi=l1p, l1_a=l1a, jitter=jit, total=total)


def shrink(x: np.ndarray, step: float, lam: float) -> np.ndarray:
    """Soft-threshold every entry toward zero by step * lam."""
    arr = np.asarray(x, dtype=np.float64)
    return np.sign(arr) * np.maximum(0.0, np.abs(arr) - step * lam)


def project_unit_disk(psi, always_normalize: bool = False) -> BasisMatrix:
    """Project every column into the unit disk.

    Columns with norm > 1 are rescaled to norm 1; interior columns are left
    alone. ``always_normalize`` instead rescales every nonzero column to
    exactly unit norm (the stricter sphere rule).
    """
    arr = _as_array(psi).copy()
    norms = np.linalg.norm(arr, axis=0)
    if always_normalize:
        hit = norms > 0.0
    else:
        hit = norms > 1.0
    arr[:, hit] /= norms[hit]
    return BasisMatrix(arr)


def project_interval(a) -> ActivationMatrix:
    """Clamp every activation entry into [0, 1]."""
    return ActivationMatrix(np.clip(_as_array(a), 0.0, 1.0))


def _jitter_subgradient(a_arr: np.ndarray) -> np.ndarray:
    k, t = a_arr.shape
    g = np.zeros_like(a_arr)
    if t < 2:
        return g
    s = np.sign(np.diff(a_arr, axis=1))
    g[:, 1:] += s
    g[:, :-1] -= s
    return g / (k * t)


def grad_psi(signal, psi, a, hp: Hyperparams) -> np.ndarray:
    """Subgradient of the smooth loss part w.r.t. the basis.

    Covers reconstruction only (the jitter term does not involve the basis);
    the l1 penalty is handled by the shrink step, not the gradient.
    """
    e = _as_array(signal)
    psi_arr, a_arr = _as_array(psi), _as_array(a)
    _check_shapes(e, psi_arr, a_arr)
    return -np.sign(e - psi_arr @ a_arr) @ a_arr.T


def grad_a(signal, psi, a, hp: Hyperparams) -> np.ndarray:
    """Subgradient of the smooth loss part w.r.t. the activations.

    Covers reconstruction plus the weighted jitter term; the l1 penalty is
    handled by the shrink step, not the gradient.
    """
    e = _as_array(signal)
    psi_arr, a_arr = _as_array(psi), _as_array(a)
    _check_shapes(e, psi_arr, a_arr)
    g = -psi_arr.T @ np.sign(e - psi_arr @ a_arr)
    return g + hp.lambda3 * _jitter_subgradient(a_arr)


def adam_step(
    param: np.ndarray, grad: np.ndarray, state: OptimizerState, lr: float
) -> tuple[np.ndarray, OptimizerState]:
    """One bias-corrected Adam update; returns the new parameter and the state."""
    if param.shape != grad.shape or param.shape != state.m.shape:
        raise ValueError("parameter, gradient, and state shapes must match")
    state.step += 1
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * grad
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * grad * grad
    m_hat = state.m / (1.0 - state.beta1**state.step)
    v_hat = state.v / (1.0 - state.beta2**state.step)
    return param - lr * m_hat / (np.sqrt(v_hat) + state.eps), state


def factorize(
    signal: EmbeddingSignal,
    k: int,
    hp: Hyperparams | None = None,
    progress: Callable[[int, LossBreakdown], None] | None = None,
    check_feasibility: bool = False,
    always_normalize_basis: bool = False,
) -> tuple[BasisMatrix, ActivationMatrix, list[LossBreakdown]]:
    """Alternating Adam / shrink / project solver for the factorization objective.

    Each iteration records the loss, then updates the basis and, at the
    updated basis, the activations. The Adam direction for each half-step is
    the subgradient of the full objective (reconstruction, jitter, and the
    corresponding l1 penalty term); shrinkage then applies the proximal
    soft-threshold and the feasibility projection runs last, so both
    invariants hold after every iteration. Runs stop once the per-iteration
    relative loss changes averaged over ``patience`` iterations fall below
    ``rel_tol``, or at ``max_iters``. Deterministic for a fixed seed; the
    returned trace holds one entry per iteration plus the final state.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    hp = hp or Hyperparams()
    e = signal.data
    m_dim, t_dim = e.shape
    rng = np.random.default_rng(hp.seed)
    psi = rng.standard_normal((m_dim, k))
    psi /= np.maximum(np.linalg.norm(psi, axis=0), 1e-12)
    a = rng.uniform(0.0, 1.0, (k, t_dim))
    state_psi = OptimizerState.for_param(psi)
    state_a = OptimizerState.for_param(a)

    trace: list[LossBreakdown] = []
    for it in range(hp.max_iters):
        lb = compute_loss(signal, psi, a, hp)
        trace.append(lb)
        _check_divergence(trace, it)
        if _converged(trace, hp):
            return _finish(psi, a, trace)
        if progress is not None:
            progress(it, lb)

        g = grad_psi(signal, psi, a, hp) + hp.lambda1 * np.sign(psi)
        psi, state_psi = adam_step(psi, g, state_psi, hp.lr_psi)
        psi = shrink(psi, hp.lr_psi, hp.lambda1)
        psi = project_unit_disk(psi, always_normalize=always_normalize_basis).data

        g = grad_a(signal, psi, a, hp) + hp.lambda2 * np.sign(a)
        a, state_a = adam_step(a, g, state_a, hp.lr_a)
        a = shrink(a, hp.lr_a, hp.lambda2)
        a = project_interval(a).data

        if check_feasibility:
            BasisMatrix(psi)
            ActivationMatrix(a)

    lb = compute_loss(signal, psi, a, hp)
    trace.append(lb)
    _check_divergence(trace, hp.max_iters)
    return _finish(psi, a, trace)


def loss_trace_csv(trace: Sequence[LossBreakdown]) -> str:
    """Render a loss trace as CSV with one row per recorded iteration."""
    lines = ["iteration,reconstruction,l1_psi,l1_a,jitter,total"]
    for i, lb in enumerate(trace):
        lines.append(
            f"{i},{lb.reconstruction!r},{lb.l1_psi!r},{lb.l1_a!r},{lb.jitter!r},{lb.total!r}"
        )
    return "\n".join(lines) + "\n"


def _finish(psi, a, trace) -> tuple[BasisMatrix, ActivationMatrix, list[LossBreakdown]]:
    return BasisMatrix(psi), ActivationMatrix(a), trace


def _check_shapes(e: np.ndarray, psi: np.ndarray, a: np.ndarray) -> None:
    if psi.ndim != 2 or a.ndim != 2 or psi.shape[1] != a.shape[0]:
        raise ValueError(f"incompatible factor shapes {psi.shape} x {a.shape}")
    if e.shape != (psi.shape[0], a.shape[1]):
        raise ValueError(f"factors {psi.shape} x {a.shape} do not match signal {e.shape}")


def _check_divergence(trace: list[LossBreakdown], it: int) -> None:
    total = trace[-1].total
    if not np.isfinite(total):
        raise DivergenceError(f"non-finite loss at iteration {it}")
    if total > DIVERGENCE_FACTOR * trace[0].total + 1e-12:
        raise DivergenceError(
            f"loss {total:.6g} exceeded {DIVERGENCE_FACTOR:g}x its initial value "
            f"{trace[0].total:.6g} at iteration {it}"
        )


def _converged(trace: list[LossBreakdown], hp: Hyperparams) -> bool:
    if len(trace) < hp.patience + 1:
        return False
    totals = np.array([lb.total for lb in trace[-(hp.patience + 1) :]])
    rels = np.abs(np.diff(totals)) / np.maximum(1e-12, totals[:-1])
    return bool(rels.mean() < hp.rel_tol)
