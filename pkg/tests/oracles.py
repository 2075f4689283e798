"""Independent reference implementations the tests check the library against.

These deliberately avoid the library's code paths: plain loops, dense grid
search instead of bracketing search, raw exp/log instead of the shared
softmax helper.
"""

from __future__ import annotations

import itertools
import math

import numpy as np


def ece_oracle(confs, correct, m: int, mode: str) -> float:
    """Direct evaluation of the binned calibration error definition."""
    confs = list(map(float, confs))
    correct = [bool(c) for c in correct]
    n = len(confs)
    assignments = [0] * n
    if mode == "equal-width":
        for i, c in enumerate(confs):
            k = 0
            while k < m - 1 and c > (k + 1) / m:
                k += 1
            assignments[i] = k
    else:
        order = sorted(range(n), key=lambda i: (confs[i], i))
        sizes = [n // m + (1 if j < n % m else 0) for j in range(m)]
        pos = 0
        for j, size in enumerate(sizes):
            for i in order[pos : pos + size]:
                assignments[i] = j
            pos += size
    total = 0.0
    for j in range(m):
        members = [i for i in range(n) if assignments[i] == j]
        if not members:
            continue
        acc = sum(correct[i] for i in members) / len(members)
        conf = sum(confs[i] for i in members) / len(members)
        total += len(members) / n * abs(acc - conf)
    return total


def grid_fit_nll(logit_rows, labels, resolution=1e-4, lo=-3.0, hi=3.0) -> float:
    """Log-temperature minimizing summed NLL, by dense grid search."""
    grid = np.arange(lo, hi + resolution / 2, resolution)
    inv_t = np.exp(-grid)
    total = np.zeros_like(grid)
    for logits, y in zip(logit_rows, labels):
        z = np.asarray(logits, dtype=float)[None, :] * inv_t[:, None]
        total += np.log(np.exp(z).sum(axis=1)) - z[:, y]
    return float(grid[int(np.argmin(total))])


def grid_fit_kl(logit_rows, refs, resolution=1e-4, lo=-3.0, hi=3.0) -> float:
    """Log-temperature minimizing summed KL(ref || scaled softmax), by grid."""
    grid = np.arange(lo, hi + resolution / 2, resolution)
    inv_t = np.exp(-grid)
    total = np.zeros_like(grid)
    for logits, p in zip(logit_rows, refs):
        z = np.asarray(logits, dtype=float)[None, :] * inv_t[:, None]
        q = np.exp(z) / np.exp(z).sum(axis=1, keepdims=True)
        p = np.asarray(p, dtype=float)
        mask = p > 0
        ratio = p[mask][None, :] / np.maximum(q[:, mask], 1e-12)
        total += (p[mask][None, :] * np.log(ratio)).sum(axis=1)
    return float(grid[int(np.argmin(total))])


def distinct_contexts(item_ids) -> set:
    """Brute-force set of (question, ordered shot sequence) contexts."""
    out = set()
    for order in itertools.permutations(range(len(item_ids))):
        for k in range(len(item_ids)):
            question = item_ids[order[k]]
            shots = tuple(item_ids[j] for j in order[:k])
            out.add((question, shots))
    return out


def unique_context_count(m: int) -> int:
    """Closed form: choose the question, then an ordered shot subset."""
    return sum(
        m * math.comb(m - 1, k) * math.factorial(k) for k in range(m)
    )
