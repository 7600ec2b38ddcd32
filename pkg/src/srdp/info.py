"""Entropy, mutual information, divergence and distances, all in bits."""
from __future__ import annotations

import math

import numpy as np

from .prob import JointPmf, Pmf

# rounding slack below which an information quantity is reported as zero
CLAMP_TOL = 1e-12


def _arr(x) -> np.ndarray:
    if isinstance(x, Pmf):
        return x.probs
    if isinstance(x, JointPmf):
        return x.cells
    return np.asarray(x, dtype=float)


def _clamp(v: float) -> float:
    return 0.0 if -CLAMP_TOL < v < 0.0 else v


def entropy(p) -> float:
    """Shannon entropy with ``0 log 0 = 0``; accepts a Pmf, JointPmf or array."""
    a = _arr(p).ravel()
    a = a[a > 0]
    return _clamp(float(-np.sum(a * np.log2(a))))


def binary_entropy(p: float) -> float:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"binary_entropy needs p in [0, 1], got {p}")
    if p == 0.0 or p == 1.0:
        return 0.0
    return -p * math.log2(p) - (1.0 - p) * math.log2(1.0 - p)


def inverse_binary_entropy(h: float, tol: float = 1e-15) -> float:
    """The unique ``p`` in ``[0, 1/2]`` with ``H_b(p) = h`` (bisection)."""
    if not 0.0 <= h <= 1.0:
        raise ValueError(f"inverse_binary_entropy needs h in [0, 1], got {h}")
    if h == 0.0:
        return 0.0
    if h == 1.0:
        return 0.5
    lo, hi = 0.0, 0.5
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if binary_entropy(mid) < h:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def star(a: float, b: float) -> float:
    """Crossover of two cascaded binary symmetric channels."""
    if not (0.0 <= a <= 1.0 and 0.0 <= b <= 1.0):
        raise ValueError(f"star needs a, b in [0, 1], got {a}, {b}")
    return a * (1.0 - b) + b * (1.0 - a)


def tv_distance(p, q) -> float:
    a, b = _arr(p), _arr(q)
    if a.shape != b.shape:
        raise ValueError(f"tv_distance: shapes {a.shape} and {b.shape} differ")
    return min(float(0.5 * np.abs(a - b).sum()), 1.0)


def kl_divergence(p, q) -> float:
    """D(p || q) in bits; infinite when p is not absolutely continuous w.r.t. q."""
    a, b = _arr(p).ravel(), _arr(q).ravel()
    if a.shape != b.shape:
        raise ValueError("kl_divergence: shapes differ")
    m = a > 0
    if np.any(b[m] <= 0):
        return math.inf
    return _clamp(float(np.sum(a[m] * np.log2(a[m] / b[m]))))


def _joint(j, arity: int, name: str) -> np.ndarray:
    a = _arr(j)
    if a.ndim != arity:
        raise ValueError(f"{name} needs a {arity}-variable joint, got {a.ndim}")
    return a


def mutual_information(j) -> float:
    """I(A;B) for a two-variable joint ``j[a, b]``."""
    a = _joint(j, 2, "mutual_information")
    v = entropy(a.sum(1)) + entropy(a.sum(0)) - entropy(a)
    return _clamp(v)


def conditional_entropy(j) -> float:
    """H(A|B) for a two-variable joint ``j[a, b]``."""
    a = _joint(j, 2, "conditional_entropy")
    return _clamp(entropy(a) - entropy(a.sum(0)))


def conditional_mi(j) -> float:
    """I(A;B|C) for a three-variable joint ``j[a, b, c]``.

    Letters of C with zero probability contribute nothing.
    """
    a = _joint(j, 3, "conditional_mi")
    total = 0.0
    for c in range(a.shape[2]):
        pc = a[:, :, c].sum()
        if pc <= 0:
            continue
        total += pc * mutual_information(a[:, :, c] / pc)
    return _clamp(total)
