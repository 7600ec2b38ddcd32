"""Exact small-blocklength simulation of the random-binning coding scheme.

A seeded codebook ``U^n(c, s)`` holds ``2^ceil(nR0)`` common-randomness
columns by ``2^ceil(nR)`` message rows, drawn i.i.d. from ``P_U``. Given the
source sequence and the shared index ``c``, a likelihood encoder picks ``s``
with probability proportional to ``prod_i P(x_i | U_i(c, s))``; the decoder
emits ``Y^n`` through ``P(y|u)`` applied letter by letter to the codeword.
Every metric is computed by exhaustive enumeration of ``x^n``, ``c``, ``s``
and ``y^n``, so results are exact for the given codebook.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import info
from .noiseless import DistortionMeasure, NoiselessWitness
from .prob import Channel, DimensionError, JointPmf, Pmf, check_cap, push_forward, sequences

# runs with more fallbacks than this fraction of (x^n, c) pairs are flagged
FALLBACK_LIMIT = 1e-3

CSV_COLUMNS = ("n", "eff_R", "eff_R0", "seed", "realism_tv", "distortion",
               "leakage_bits", "cr_independence_tv", "fallback_count")


def _bits(n: int, rate: float) -> int:
    # absorb float noise so that e.g. n * 0.5 with n = 4 stays 2
    return max(0, math.ceil(n * rate - 1e-9))


@dataclass(frozen=True, eq=False)
class OsrbConfig:
    n: int
    R: float
    R0: float
    source: Pmf
    u_prior: Pmf
    ux_channel: Channel  # P(x | u)
    yu_channel: Channel  # P(y | u)
    seed: int = 0

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or self.n < 1:
            raise ValueError("blocklength n must be a positive integer")
        if not (self.R >= 0 and self.R0 >= 0 and math.isfinite(self.R) and math.isfinite(self.R0)):
            raise ValueError("rates must be finite and nonnegative")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        k = self.u_prior.alphabet_size
        if self.ux_channel.input_size != k or self.yu_channel.input_size != k:
            raise DimensionError("channels must be indexed by the codeword alphabet")
        if self.ux_channel.output_size != self.source.alphabet_size:
            raise DimensionError("ux_channel output must be the source alphabet")
        if self.yu_channel.output_size != self.source.alphabet_size:
            raise DimensionError("yu_channel output must be the source alphabet")
        implied = push_forward(self.u_prior, self.ux_channel)
        if not implied.allclose(self.source, atol=1e-9):
            raise ValueError("u_prior pushed through ux_channel does not reproduce the source")
        check_cap(self.codebook_size, "codebook")
        check_cap(self.source.alphabet_size**self.n, "source sequences")

    @property
    def s_bits(self) -> int:
        return _bits(self.n, self.R)

    @property
    def c_bits(self) -> int:
        return _bits(self.n, self.R0)

    @property
    def codebook_size(self) -> int:
        return 2 ** (self.s_bits + self.c_bits)

    @property
    def eff_R(self) -> float:
        return self.s_bits / self.n

    @property
    def eff_R0(self) -> float:
        return self.c_bits / self.n

    def with_(self, **kw) -> "OsrbConfig":
        return replace(self, **kw)

    @classmethod
    def from_witness(cls, w: NoiselessWitness, n: int, R: float, R0: float, seed: int = 0) -> "OsrbConfig":
        """Reverse the test channel by Bayes' rule; letters of U with zero mass get the source row."""
        q = w.source.probs
        a = w.u_channel.matrix
        pu = q @ a
        rev = np.divide((q[:, None] * a).T, pu[:, None], out=np.tile(q, (pu.size, 1)),
                        where=pu[:, None] > 0)
        return cls(n, R, R0, w.source, Pmf(pu, atol=1e-9), Channel(rev, atol=1e-9), w.y_channel, seed)


def binary_cascade_config(alpha: float, beta: float, delta: float, n: int = 1, seed: int = 0,
                          delta_R0: float | None = None) -> OsrbConfig:
    """Uniform bit, ``U = X`` through BSC(alpha), ``Y = U`` through BSC(beta).

    Rates sit ``delta`` bits above the corner ``(1 - H_b(alpha), 1 - H_b(beta))``,
    clamped at zero; ``delta_R0`` overrides the offset of the common-randomness rate.
    """
    d0 = delta if delta_R0 is None else delta_R0
    R = max(1.0 - info.binary_entropy(alpha) + delta, 0.0)
    R0 = max(1.0 - info.binary_entropy(beta) + d0, 0.0)
    u = Pmf.uniform(2)
    return OsrbConfig(n, R, R0, u, u, Channel.bsc(alpha), Channel.bsc(beta), seed)


@dataclass(frozen=True, eq=False)
class Codebook:
    """``words[c, s]`` is the length-n codeword for common index c and message s."""

    words: np.ndarray

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.words.shape


def build_codebook(cfg: OsrbConfig) -> Codebook:
    rng = np.random.default_rng(cfg.seed)
    shape = (2**cfg.c_bits, 2**cfg.s_bits, cfg.n)
    words = rng.choice(cfg.u_prior.alphabet_size, size=shape, p=cfg.u_prior.probs)
    words.setflags(write=False)
    return Codebook(words)


def likelihood_encode(x_seq: Sequence[int], c: int, cb: Codebook, cfg: OsrbConfig) -> tuple[Pmf, bool]:
    """Posterior over messages given the source block and the common index.

    Returns the law and a flag that is ``True`` when every likelihood
    vanished and the uniform fallback was used.
    """
    x = np.asarray(x_seq, dtype=int)
    if x.shape != (cfg.n,):
        raise DimensionError(f"x_seq must have length {cfg.n}")
    if x.min() < 0 or x.max() >= cfg.source.alphabet_size:
        raise DimensionError("x_seq has letters outside the source alphabet")
    words = cb.words[c]
    lik = np.prod(cfg.ux_channel.matrix[words, x[None, :]], axis=1)
    total = lik.sum()
    if total <= 0:
        return Pmf.uniform(words.shape[0]), True
    return Pmf(lik / total, atol=1e-9), False


@dataclass(frozen=True)
class _Tables:
    xs: np.ndarray  # all x^n, shape (N, n)
    qn: np.ndarray  # Q_X^n
    lik: np.ndarray  # P(x^n | codeword), shape (N, C, S)
    post: np.ndarray  # encoder law P(s | x^n, c), shape (N, C, S)
    out: np.ndarray  # P(y^n | codeword), shape (C*S, N)
    fallbacks: int


def _tables(cfg: OsrbConfig, cb: Codebook) -> _Tables:
    xs = sequences(cfg.source.alphabet_size, cfg.n)
    nseq = xs.shape[0]
    c_size, s_size, n = cb.shape
    check_cap(nseq * c_size * s_size, "likelihood table")
    qn = np.prod(cfg.source.probs[xs], axis=1)
    words = cb.words.reshape(c_size * s_size, n)
    lik = np.ones((nseq, c_size * s_size))
    out = np.ones((c_size * s_size, nseq))
    for i in range(n):
        lik *= cfg.ux_channel.matrix[words[:, i]][:, xs[:, i]].T
        out *= cfg.yu_channel.matrix[words[:, i]][:, xs[:, i]]
    lik = lik.reshape(nseq, c_size, s_size)
    tot = lik.sum(axis=2, keepdims=True)
    dead = tot[:, :, 0] <= 0
    # only source sequences that can occur count as fallbacks
    fallbacks = int(np.count_nonzero(dead & (qn[:, None] > 0)))
    post = np.divide(lik, tot, out=np.full_like(lik, 1.0 / s_size), where=tot > 0)
    return _Tables(xs, qn, lik, post, out, fallbacks)


def induced_joint(cfg: OsrbConfig, cb: Codebook | None = None) -> JointPmf:
    """Exact law of ``(X^n, C, S, Y^n)``, sequences indexed as in :func:`prob.sequences`."""
    cb = cb or build_codebook(cfg)
    nseq = cfg.source.alphabet_size**cfg.n
    c_size, s_size, _ = cb.shape
    check_cap(nseq * c_size * s_size * nseq, "induced joint")
    t = _tables(cfg, cb)
    p_xcs = t.qn[:, None, None] * t.post / c_size
    cells = p_xcs[:, :, :, None] * t.out.reshape(c_size, s_size, nseq)[None]
    return JointPmf(cells, atol=1e-9)


@dataclass(frozen=True)
class OsrbMetrics:
    realism_tv: float
    avg_distortion: float
    leakage_bits: float
    cr_independence_tv: float
    fallback_count: int
    n: int = 0
    eff_R: float = 0.0
    eff_R0: float = 0.0
    seed: int = 0
    fallback_fraction: float = 0.0

    @property
    def unreliable(self) -> bool:
        return self.fallback_fraction > FALLBACK_LIMIT

    def row(self) -> dict:
        return {
            "n": self.n, "eff_R": self.eff_R, "eff_R0": self.eff_R0, "seed": self.seed,
            "realism_tv": self.realism_tv, "distortion": self.avg_distortion,
            "leakage_bits": self.leakage_bits, "cr_independence_tv": self.cr_independence_tv,
            "fallback_count": self.fallback_count,
        }


def metrics(cfg: OsrbConfig, d: DistortionMeasure | None = None) -> OsrbMetrics:
    """Realism, distortion, leakage ``I(Y^n; S)`` and common-randomness independence.

    ``cr_independence_tv`` is measured on the random-coding side: with
    ``(C, S)`` uniform and ``X^n`` drawn from the codeword through ``P(x|u)``,
    it is the TV distance between ``P_{C,X^n}`` and ``uniform(C) x Q_X^n``.
    Computed in factored form, never materialising the four-way joint.
    """
    nx = cfg.source.alphabet_size
    d = d or DistortionMeasure.hamming(nx)
    if d.matrix.shape != (nx, nx):
        raise DimensionError("distortion must be indexed by the source alphabet")
    cb = build_codebook(cfg)
    c_size, s_size, n = cb.shape
    t = _tables(cfg, cb)
    nseq = t.qn.size

    p_xcs = t.qn[:, None, None] * t.post / c_size  # (N, C, S)
    p_cs = p_xcs.sum(axis=0).reshape(c_size * s_size)
    p_y = p_cs @ t.out
    realism = info.tv_distance(p_y, t.qn)

    # per-sequence average letter distortion d_n[x^n, y^n]
    dn = np.zeros((nseq, nseq))
    for i in range(n):
        dn += d.matrix[t.xs[:, i][:, None], t.xs[:, i][None, :]]
    dn /= n
    dist = float(np.sum(p_xcs.reshape(nseq, -1) * (t.out @ dn.T).T))

    p_sy = (p_cs[:, None] * t.out).reshape(c_size, s_size, nseq).sum(axis=0)
    leak = 0.0 if s_size == 1 else info.mutual_information(p_sy)

    p_cx = t.lik.mean(axis=2).T / c_size  # (C, N)
    cr_tv = info.tv_distance(p_cx, np.tile(t.qn / c_size, (c_size, 1)))

    return OsrbMetrics(
        realism_tv=min(max(realism, 0.0), 1.0), avg_distortion=max(dist, 0.0),
        leakage_bits=leak, cr_independence_tv=min(max(cr_tv, 0.0), 1.0),
        fallback_count=t.fallbacks, n=n, eff_R=cfg.eff_R, eff_R0=cfg.eff_R0, seed=cfg.seed,
        fallback_fraction=t.fallbacks / (nseq * c_size),
    )


@dataclass(frozen=True)
class TrendRow:
    n: int
    eff_R: float
    eff_R0: float
    median: dict
    q25: dict
    q75: dict


@dataclass(frozen=True)
class SweepTable:
    runs: list[OsrbMetrics]
    trend: list[TrendRow] = field(default_factory=list)

    def medians(self, key: str) -> dict[int, float]:
        return {r.n: r.median[key] for r in self.trend}


_SUMMARY_KEYS = ("realism_tv", "distortion", "leakage_bits", "cr_independence_tv")


def _run(args):
    cfg, d = args
    return metrics(cfg, d)


def rate_sweep_experiment(base: OsrbConfig, n_list: Sequence[int], seed_count: int,
                          d: DistortionMeasure | None = None, jobs: int = 1) -> SweepTable:
    """Metrics for seeds ``base.seed, ..., base.seed + seed_count - 1`` at every blocklength.

    Returns the per-run rows plus median and quartiles per blocklength. Rows
    are ordered by ``(n, seed)`` regardless of ``jobs``.
    """
    if seed_count < 1:
        raise ValueError("seed_count must be >= 1")
    ns = [int(n) for n in n_list]
    if not ns:
        raise ValueError("n_list must be nonempty")
    cfgs = [base.with_(n=n, seed=base.seed + j) for n in ns for j in range(seed_count)]
    tasks = [(c, d) for c in cfgs]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            runs = list(ex.map(_run, tasks))
    else:
        runs = [_run(t) for t in tasks]
    trend = []
    for i, n in enumerate(ns):
        chunk = runs[i * seed_count:(i + 1) * seed_count]
        vals = {k: np.array([r.row()[k] for r in chunk]) for k in _SUMMARY_KEYS}
        trend.append(TrendRow(
            n, chunk[0].eff_R, chunk[0].eff_R0,
            {k: float(np.median(v)) for k, v in vals.items()},
            {k: float(np.quantile(v, 0.25)) for k, v in vals.items()},
            {k: float(np.quantile(v, 0.75)) for k, v in vals.items()},
        ))
    return SweepTable(runs, trend)
