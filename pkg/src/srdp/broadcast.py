"""Secure RDP over a memoryless broadcast channel with an eavesdropper output."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from . import info
from .noiseless import DistortionMeasure, NoiselessWitness, evaluate_witness
from .prob import ATOL, Channel, DimensionError, Pmf


class ConvergenceError(RuntimeError):
    def __init__(self, msg: str, gap: float):
        super().__init__(msg)
        self.gap = gap


class NotMoreCapableError(ValueError):
    """The channel violates the more-capable inequality at an explicit input law."""

    def __init__(self, witness: Pmf, margin: float):
        self.witness = witness
        self.margin = margin
        super().__init__(
            f"eavesdropper out-informs the decoder by {margin:.3e} bits at input law {witness.probs}"
        )


@dataclass(frozen=True, eq=False)
class BroadcastChannel:
    """``joint[x, y, z] = P(y, z | x)`` for the decoder output y and eavesdropper output z."""

    joint: np.ndarray

    def __init__(self, joint):
        arr = np.array(joint, dtype=float)
        if arr.ndim != 3:
            raise ValueError("broadcast channel needs a 3-d array joint[x, y, z]")
        if np.any(arr < -ATOL) or not np.all(np.isfinite(arr)):
            raise ValueError("broadcast channel entries must be finite and nonnegative")
        sums = arr.reshape(arr.shape[0], -1).sum(axis=1)
        bad = np.flatnonzero(np.abs(sums - 1.0) > ATOL)
        if bad.size:
            raise ValueError(f"broadcast channel rows {bad.tolist()} are not stochastic")
        arr = np.clip(arr, 0.0, None)
        arr.setflags(write=False)
        object.__setattr__(self, "joint", arr)

    @classmethod
    def from_marginals(cls, y_channel: Channel, z_channel: Channel) -> "BroadcastChannel":
        """Outputs conditionally independent given the input.

        Every quantity used here depends only on the two marginal channels.
        """
        if y_channel.input_size != z_channel.input_size:
            raise DimensionError("marginal channels must share the input alphabet")
        return cls(y_channel.matrix[:, :, None] * z_channel.matrix[:, None, :])

    @property
    def input_size(self) -> int:
        return self.joint.shape[0]

    @property
    def y_size(self) -> int:
        return self.joint.shape[1]

    @property
    def z_size(self) -> int:
        return self.joint.shape[2]

    @property
    def y_channel(self) -> Channel:
        return Channel(self.joint.sum(axis=2), atol=1e-10)

    @property
    def z_channel(self) -> Channel:
        return Channel(self.joint.sum(axis=1), atol=1e-10)


def _mi_input(p: np.ndarray, w: np.ndarray) -> float:
    return info.mutual_information(p[:, None] * w)


@dataclass(frozen=True)
class CapacityResult:
    capacity: float
    input_law: Pmf
    gap: float
    iterations: int


def blahut_arimoto(ch: Channel, tol: float = 1e-9, max_iter: int = 10_000) -> CapacityResult:
    """Capacity of a discrete memoryless channel by alternating maximisation.

    Stops once the duality gap ``max_x D(W_x || r) - I(p, W)`` drops below ``tol``.
    """
    w = ch.matrix
    nx = w.shape[0]
    p = np.full(nx, 1.0 / nx)
    logw = np.log2(np.where(w > 0, w, 1.0))
    gap = math.inf
    for it in range(1, max_iter + 1):
        r = p @ w
        logr = np.log2(np.where(r > 0, r, 1.0))
        # D(W_x || r) for every input letter
        div = np.sum(w * (logw - logr[None, :]), axis=1)
        lower = float(np.dot(p, div))
        upper = float(div.max())
        gap = upper - lower
        if gap < tol:
            return CapacityResult(max(lower, 0.0), Pmf(p, atol=1e-9), gap, it)
        p = p * np.exp2(div - upper)
        p /= p.sum()
    raise ConvergenceError(f"Blahut-Arimoto stopped after {max_iter} iterations", gap)


def capacity_unsecure(ch: Channel) -> float:
    """Capacity of the legitimate marginal channel, ignoring the eavesdropper."""
    return blahut_arimoto(ch).capacity


@dataclass(frozen=True)
class CheckConfig:
    samples: int = 1000
    seed: int = 0
    tol: float = 1e-12
    degraded_tol: float = 1e-9


@dataclass(frozen=True)
class MoreCapableResult:
    status: str  # "certified_degraded" | "violated" | "holds_on_samples"
    witness: Pmf | None = None
    margin: float = 0.0  # max over tested inputs of I(X;Z) - I(X;Y)
    degrading_channel: Channel | None = None
    tested: int = 0


def degrading_channel(bc: BroadcastChannel, tol: float = 1e-9) -> Channel | None:
    """A stochastic ``M`` with ``P(z|x) = sum_y P(y|x) M[y, z]``, if the LP finds one."""
    wy = bc.y_channel.matrix
    wz = bc.z_channel.matrix
    ny, nz = bc.y_size, bc.z_size
    nm = ny * nz
    # variables: M (ny*nz) then slack t+ and t- for each of nx*nz equations
    neq = bc.input_size * nz
    a_eq = []
    b_eq = []
    for x in range(bc.input_size):
        for z in range(nz):
            row = np.zeros(nm + 2 * neq)
            for y in range(ny):
                row[y * nz + z] = wy[x, y]
            k = x * nz + z
            row[nm + k] = 1.0
            row[nm + neq + k] = -1.0
            a_eq.append(row)
            b_eq.append(wz[x, z])
    for y in range(ny):
        row = np.zeros(nm + 2 * neq)
        row[y * nz:(y + 1) * nz] = 1.0
        a_eq.append(row)
        b_eq.append(1.0)
    c = np.concatenate([np.zeros(nm), np.ones(2 * neq)])
    res = linprog(c, A_eq=np.array(a_eq), b_eq=np.array(b_eq), bounds=[(0, None)] * c.size,
                  method="highs")
    if res.status != 0 or res.fun > tol:
        return None
    m = np.clip(res.x[:nm].reshape(ny, nz), 0.0, None)
    m /= m.sum(axis=1, keepdims=True)
    if np.abs(wy @ m - wz).max() > tol:
        return None
    return Channel(m, atol=1e-9)


def _candidate_inputs(nx: int, samples: int, seed: int) -> np.ndarray:
    pts = [np.eye(nx)[i] for i in range(nx)]
    pts.append(np.full(nx, 1.0 / nx))
    for i in range(nx):
        for j in range(i + 1, nx):
            e = np.zeros(nx)
            e[[i, j]] = 0.5
            pts.append(e)
    if nx == 2:
        pts += [np.array([t, 1.0 - t]) for t in np.linspace(0.0, 1.0, 101)]
    rng = np.random.default_rng(seed)
    pts += list(rng.dirichlet(np.ones(nx), samples))
    return np.array(pts)


def more_capable_check(bc: BroadcastChannel, config: CheckConfig = CheckConfig()) -> MoreCapableResult:
    """Three-valued test of ``I(X;Y) >= I(X;Z)`` for every input law.

    A degraded channel is certified (degradedness implies the inequality).
    Otherwise a grid plus seeded Dirichlet draws are scanned; the worst
    violating input law is returned as the witness. Passing the scan is
    evidence, not proof.
    """
    m = degrading_channel(bc, config.degraded_tol)
    if m is not None:
        return MoreCapableResult("certified_degraded", degrading_channel=m)
    wy = bc.y_channel.matrix
    wz = bc.z_channel.matrix
    cands = _candidate_inputs(bc.input_size, config.samples, config.seed)
    diffs = np.array([_mi_input(p, wz) - _mi_input(p, wy) for p in cands])
    worst = int(np.argmax(diffs))
    if diffs[worst] > config.tol:
        return MoreCapableResult("violated", Pmf(cands[worst]), float(diffs[worst]), tested=len(cands))
    return MoreCapableResult("holds_on_samples", margin=float(diffs[worst]), tested=len(cands))


@dataclass(frozen=True, eq=False)
class BcWitness:
    """Source-side witness for (X, W1, Y) and an independent channel-side pair (W2, input law)."""

    source_part: NoiselessWitness
    w2_prior: Pmf
    x_channel: Channel  # P(x_tilde | w2)

    def __post_init__(self):
        if self.x_channel.input_size != self.w2_prior.alphabet_size:
            raise DimensionError("x_channel input alphabet must match the W2 prior")
        cap = self.x_channel.output_size + 1
        if self.w2_prior.alphabet_size > cap:
            raise ValueError(f"|W2| = {self.w2_prior.alphabet_size} exceeds |X~| + 1 = {cap}")


@dataclass(frozen=True)
class BcPoint:
    R_lo: float
    R_hi: float
    R0_min: float
    R0_raw: float
    D: float

    @property
    def empty(self) -> bool:
        return self.R_lo > self.R_hi

    def admits(self, R: float, R0: float, D: float, tol: float = 0.0) -> bool:
        return (not self.empty and self.R_lo - tol <= R <= self.R_hi + tol
                and R0 >= self.R0_min - tol and D >= self.D - tol)


def bc_inner_point(w: BcWitness, bc: BroadcastChannel, d: DistortionMeasure) -> BcPoint:
    """Rate interval, common-randomness floor and distortion certified by a witness."""
    if w.x_channel.output_size != bc.input_size:
        raise DimensionError("witness channel input alphabet does not match the broadcast channel")
    corner = evaluate_witness(w.source_part, d)
    pw = w.w2_prior.probs
    a = w.x_channel.matrix
    i_w2_y = info.mutual_information(pw[:, None] * (a @ bc.y_channel.matrix))
    i_w2_z = info.mutual_information(pw[:, None] * (a @ bc.z_channel.matrix))
    raw = corner.R0 + i_w2_z - i_w2_y
    return BcPoint(corner.R, i_w2_y, max(raw, 0.0), raw, corner.D)


def more_capable_region_point(w: NoiselessWitness, x_dist: Pmf, bc: BroadcastChannel,
                              d: DistortionMeasure, config: CheckConfig = CheckConfig()) -> BcPoint:
    """Point of the exact region for a more-capable channel; the channel input itself plays W2."""
    status = more_capable_check(bc, config)
    if status.status == "violated":
        raise NotMoreCapableError(status.witness, status.margin)
    return bc_inner_point(BcWitness(w, x_dist, Channel.identity(bc.input_size)), bc, d)


def separation_feasible(kappa: float, R: float, ch: Channel) -> bool:
    """Whether a separate source/channel code can carry rate ``R`` with ``kappa`` channel uses per symbol."""
    if not kappa > 0:
        raise ValueError("mismatch factor must be positive")
    return R <= kappa * capacity_unsecure(ch) + 1e-9
