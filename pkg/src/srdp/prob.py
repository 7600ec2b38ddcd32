"""Finite-alphabet probability objects: pmfs, channels and joint tables.

All objects are immutable after construction. Probabilities are float64 and
validated on construction with an absolute tolerance (``ATOL``); objects built
from arithmetic on other objects use the looser ``CHAIN_ATOL``.
"""
from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

ATOL = 1e-12
CHAIN_ATOL = 1e-10
DEFAULT_ENUM_CAP = 2**20


class DimensionError(ValueError):
    """Alphabet sizes of two objects do not line up."""


class EnumerationCapError(ValueError):
    """An exhaustive enumeration would exceed the configured cell cap."""

    def __init__(self, cells: int, cap: int, what: str = "enumeration"):
        self.cells = cells
        self.cap = cap
        # float64 cells
        self.bytes_required = 8 * cells
        super().__init__(
            f"{what} needs {cells} cells (~{self.bytes_required / 2**20:.1f} MiB), "
            f"cap is {cap}; raise SRDP_ENUM_CAP to allow it"
        )


def enum_cap() -> int:
    """Enumeration cap, overridable through the ``SRDP_ENUM_CAP`` env var."""
    raw = os.environ.get("SRDP_ENUM_CAP")
    if raw is None:
        return DEFAULT_ENUM_CAP
    cap = int(raw)
    if cap < 1:
        raise ValueError("SRDP_ENUM_CAP must be a positive integer")
    return cap


def check_cap(cells: int, what: str = "enumeration") -> None:
    cap = enum_cap()
    if cells > cap:
        raise EnumerationCapError(cells, cap, what)


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


def _check_simplex(arr: np.ndarray, atol: float, what: str) -> None:
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{what}: non-finite entries")
    if np.any(arr < -atol):
        raise ValueError(f"{what}: negative entries (min {arr.min():.3e})")
    total = arr.sum()
    if abs(total - 1.0) > atol:
        raise ValueError(f"{what}: mass {total!r} differs from 1 by more than {atol}")


@dataclass(frozen=True, eq=False)
class Pmf:
    """Probability mass function over ``{0, ..., size-1}``."""

    probs: np.ndarray

    def __init__(self, probs: Iterable[float], atol: float = ATOL):
        arr = np.asarray(list(probs) if not isinstance(probs, np.ndarray) else probs, dtype=float)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("Pmf needs a nonempty 1-d probability vector")
        _check_simplex(arr, atol, "Pmf")
        object.__setattr__(self, "probs", _frozen(np.clip(arr, 0.0, None)))

    @property
    def alphabet_size(self) -> int:
        return self.probs.size

    def __len__(self) -> int:
        return self.probs.size

    def __getitem__(self, i):
        return self.probs[i]

    def __repr__(self) -> str:
        return f"Pmf({np.array2string(self.probs, precision=6)})"

    @classmethod
    def uniform(cls, size: int) -> "Pmf":
        return cls(np.full(size, 1.0 / size))

    @classmethod
    def point(cls, size: int, index: int) -> "Pmf":
        p = np.zeros(size)
        p[index] = 1.0
        return cls(p)

    @classmethod
    def bernoulli(cls, p: float) -> "Pmf":
        """Bern(p) with P(1) = p."""
        return cls([1.0 - p, p])

    def allclose(self, other: "Pmf", atol: float = ATOL) -> bool:
        return self.probs.shape == other.probs.shape and np.allclose(
            self.probs, other.probs, rtol=0.0, atol=atol
        )


@dataclass(frozen=True, eq=False)
class Channel:
    """Row-stochastic matrix ``W[x, y] = P(y | x)``."""

    matrix: np.ndarray

    def __init__(self, matrix, atol: float = ATOL):
        arr = np.asarray(matrix, dtype=float)
        if arr.ndim != 2 or arr.size == 0:
            raise ValueError("Channel needs a nonempty 2-d matrix")
        if not np.all(np.isfinite(arr)):
            raise ValueError("Channel: non-finite entries")
        if np.any(arr < -atol):
            raise ValueError("Channel: negative entries")
        sums = arr.sum(axis=1)
        bad = np.flatnonzero(np.abs(sums - 1.0) > atol)
        if bad.size:
            raise ValueError(f"Channel: rows {bad.tolist()} are not stochastic (sums {sums[bad].tolist()})")
        object.__setattr__(self, "matrix", _frozen(np.clip(arr, 0.0, None)))

    @property
    def input_size(self) -> int:
        return self.matrix.shape[0]

    @property
    def output_size(self) -> int:
        return self.matrix.shape[1]

    @property
    def rows(self) -> list[Pmf]:
        return [Pmf(r, atol=CHAIN_ATOL) for r in self.matrix]

    def __getitem__(self, i):
        return self.matrix[i]

    def __repr__(self) -> str:
        return f"Channel({self.input_size}x{self.output_size})"

    @classmethod
    def identity(cls, size: int) -> "Channel":
        return cls(np.eye(size))

    @classmethod
    def bsc(cls, p: float) -> "Channel":
        return cls([[1.0 - p, p], [p, 1.0 - p]])

    @classmethod
    def constant(cls, input_size: int, output: Pmf | Sequence[float]) -> "Channel":
        """Channel whose output law ignores the input."""
        row = output.probs if isinstance(output, Pmf) else np.asarray(output, dtype=float)
        return cls(np.tile(row, (input_size, 1)))

    @classmethod
    def from_rows(cls, rows: Sequence[Pmf]) -> "Channel":
        return cls(np.vstack([r.probs for r in rows]))


@dataclass(frozen=True, eq=False)
class JointPmf:
    """Joint law of 2 to 4 finite random variables, indexed ``cells[a, b, ...]``."""

    cells: np.ndarray

    def __init__(self, cells, atol: float = ATOL):
        arr = np.asarray(cells, dtype=float)
        if not 2 <= arr.ndim <= 4:
            raise ValueError(f"JointPmf supports 2 to 4 variables, got {arr.ndim}")
        _check_simplex(arr, atol, "JointPmf")
        object.__setattr__(self, "cells", _frozen(np.clip(arr, 0.0, None)))

    @property
    def shape(self) -> tuple[int, ...]:
        return self.cells.shape

    @property
    def arity(self) -> int:
        return self.cells.ndim

    def __repr__(self) -> str:
        return f"JointPmf(shape={self.shape})"


def _rowvec(x) -> np.ndarray:
    return x.probs if isinstance(x, Pmf) else np.asarray(x, dtype=float)


def _mat(ch) -> np.ndarray:
    return ch.matrix if isinstance(ch, Channel) else np.asarray(ch, dtype=float)


def push_forward(source: Pmf, ch: Channel) -> Pmf:
    """Output law ``sum_x source[x] * ch[x, y]``."""
    if source.alphabet_size != ch.input_size:
        raise DimensionError(
            f"source has {source.alphabet_size} letters, channel expects {ch.input_size}"
        )
    return Pmf(source.probs @ ch.matrix, atol=CHAIN_ATOL)


def compose(ch1: Channel, ch2: Channel) -> Channel:
    """Cascade ``x -> ch1 -> u -> ch2 -> y``."""
    if ch1.output_size != ch2.input_size:
        raise DimensionError(f"cannot cascade {ch1!r} into {ch2!r}")
    return Channel(ch1.matrix @ ch2.matrix, atol=CHAIN_ATOL)


def joint_from(source: Pmf, ch: Channel) -> JointPmf:
    if source.alphabet_size != ch.input_size:
        raise DimensionError(
            f"source has {source.alphabet_size} letters, channel expects {ch.input_size}"
        )
    return JointPmf(source.probs[:, None] * ch.matrix, atol=CHAIN_ATOL)


def marginal(j: JointPmf, keep: Sequence[int]) -> JointPmf | Pmf:
    """Sum out every variable not in ``keep``; the kept order follows ``keep``.

    A single kept variable yields a :class:`Pmf`.
    """
    keep = list(keep)
    if not keep:
        raise ValueError("marginal needs at least one variable to keep")
    if len(set(keep)) != len(keep) or any(k < 0 or k >= j.arity for k in keep):
        raise ValueError(f"invalid keep set {keep} for arity {j.arity}")
    drop = tuple(i for i in range(j.arity) if i not in keep)
    out = j.cells.sum(axis=drop) if drop else j.cells
    remaining = sorted(keep)
    out = np.transpose(out, [remaining.index(k) for k in keep])
    if out.ndim == 1:
        return Pmf(out, atol=CHAIN_ATOL)
    return JointPmf(out, atol=CHAIN_ATOL)


def iid_extension(source: Pmf, n: int) -> Pmf:
    """Law of ``n`` i.i.d. letters, sequences in lexicographic order (first letter most significant)."""
    if n < 1:
        raise ValueError("n must be a positive integer")
    check_cap(source.alphabet_size**n, "iid extension")
    out = np.ones(1)
    for _ in range(n):
        out = np.outer(out, source.probs).ravel()
    return Pmf(out, atol=CHAIN_ATOL)


def sequences(alphabet_size: int, n: int) -> np.ndarray:
    """All length-``n`` sequences as rows, in the order used by :func:`iid_extension`."""
    check_cap(alphabet_size**n, "sequence enumeration")
    idx = np.arange(alphabet_size**n)
    digits = np.empty((idx.size, n), dtype=np.int64)
    for i in range(n - 1, -1, -1):
        digits[:, i] = idx % alphabet_size
        idx = idx // alphabet_size
    return digits
