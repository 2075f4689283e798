"""Shared numeric primitives: tempered softmax, KL divergence, golden-section search."""

from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np

from .errors import (
    LengthMismatch,
    NonFinite,
    NonFiniteObjective,
    NonPositiveTemperature,
    NotNormalized,
)

# Floor applied to the second argument of the KL log ratio so the objective
# stays finite and reproducible when a reference puts mass where the scaled
# distribution has (numerically) none.
KL_CLAMP = 1e-12

# Golden ratio conjugate: interior-point placement factor for the search.
_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def softmax_with_temperature(logits: Sequence[float], t: float = 1.0) -> np.ndarray:
    """softmax(logits / t), computed with max subtraction for overflow safety.

    Entries sum to 1 within 1e-12. t > 0; t > 1 softens, t < 1 sharpens,
    and the argmax never moves.
    """
    if not (isinstance(t, (int, float)) and math.isfinite(t)):
        raise NonFinite(f"temperature {t!r} is not finite")
    if t <= 0:
        raise NonPositiveTemperature(f"temperature must be > 0, got {t}")
    arr = np.asarray(logits, dtype=float)
    if arr.size == 0:
        raise LengthMismatch("empty logit vector")
    if not np.all(np.isfinite(arr)):
        raise NonFinite("logits contain non-finite values")
    # Subtract the max before dividing: the shifted logits are <= 0, so even
    # denormal temperatures cannot overflow the quotient.
    z = (arr - arr.max()) / t
    e = np.exp(z)
    return e / e.sum()


def kl_divergence(p: Sequence[float], q: Sequence[float]) -> float:
    """KL(p || q) = sum_j p_j log(p_j / q_j), with 0 * log(0/q) = 0.

    p must be a probability vector (sum 1 within 1e-9). q entries are
    clamped below at ``KL_CLAMP`` before the log, so the result is always
    finite; it stays non-negative whenever q is (sub)normalized.
    """
    p_arr = np.asarray(p, dtype=float)
    q_arr = np.asarray(q, dtype=float)
    if p_arr.shape != q_arr.shape or p_arr.ndim != 1:
        raise LengthMismatch(f"shape mismatch: {p_arr.shape} vs {q_arr.shape}")
    if not (np.all(np.isfinite(p_arr)) and np.all(np.isfinite(q_arr))):
        raise NonFinite("distributions contain non-finite values")
    if np.any(p_arr < 0) or abs(p_arr.sum() - 1.0) > 1e-9:
        raise NotNormalized(f"p sums to {p_arr.sum()!r}, expected 1 within 1e-9")
    q_clamped = np.maximum(q_arr, KL_CLAMP)
    mask = p_arr > 0
    return float(np.sum(p_arr[mask] * np.log(p_arr[mask] / q_clamped[mask])))


def minimize_scalar(
    objective: Callable[[float], float],
    lo: float,
    hi: float,
    tol: float = 1e-6,
) -> float:
    """Golden-section search for the minimizer of a unimodal objective on [lo, hi].

    Returns the midpoint of the final bracket, within ``tol`` of the true
    minimizer for unimodal objectives (boundary minima included).
    """
    if not (tol > 0):
        raise ValueError(f"tol must be > 0, got {tol}")
    if not (hi > lo):
        raise ValueError(f"need hi > lo, got [{lo}, {hi}]")

    def f(x: float) -> float:
        y = objective(x)
        if not math.isfinite(y):
            raise NonFiniteObjective(f"objective({x!r}) = {y!r}")
        return y

    a, b = float(lo), float(hi)
    x1 = b - _INV_PHI * (b - a)
    x2 = a + _INV_PHI * (b - a)
    f1, f2 = f(x1), f(x2)
    # Bracket shrinks by 1/phi each step, so the iteration count is bounded.
    max_iter = int(math.ceil(math.log(tol / (b - a)) / math.log(_INV_PHI))) + 4
    for _ in range(max(max_iter, 0)):
        if b - a <= tol:
            break
        if f1 < f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - _INV_PHI * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + _INV_PHI * (b - a)
            f2 = f(x2)
    return 0.5 * (a + b)
