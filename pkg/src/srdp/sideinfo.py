"""Secure RDP regions with side information ``Z`` correlated with the source.

Two models:

* encoder and decoder both observe ``Z``: corner bounds
  ``R >= I(U;X|Z)``, ``R0 >= I(U;Y) - I(U;Z)``, ``R + R0 >= I(U;Y|Z) - H(Z|Y)``;
* only the decoder observes ``Z``: inner bound
  ``R >= I(U;X) - I(U;Z)``, ``R0 >= I(U;Y) - I(U;Z)``, ``R + R0 >= I(U;Y|Z)``,
  which is the exact region when the reconstruction and ``Z`` are modelled
  as jointly i.i.d.

Joint laws are indexed ``[x, z, u, y]`` throughout. Composite alphabets are
flattened row-major: ``(x, z) -> x * |Z| + z``, ``(u, y) -> u * |Y| + y``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog, minimize

from . import info
from .noiseless import REALISM_TOL, DistortionMeasure, RateTuple, RealismError
from .prob import Channel, DimensionError, JointPmf

MARKOV_TOL = 1e-12
IDENTITY_TOL = 1e-10
IPF_MAX_ITER = 1000
IPF_TOL = 1e-9


class MarkovError(ValueError):
    """The witness breaks a required Markov chain."""


def si_u_cap(x_size: int, z_size: int) -> int:
    return x_size**2 * z_size + 2


def _source_arr(joint_source: JointPmf) -> np.ndarray:
    if joint_source.arity != 2:
        raise DimensionError("side-information source must be a joint law Q[x, z]")
    return joint_source.cells


def _realism_check(cells: np.ndarray) -> None:
    qx = cells.sum(axis=(1, 2, 3))
    py = cells.sum(axis=(0, 1, 2))
    res = info.tv_distance(py, qx)
    if res > REALISM_TOL:
        raise RealismError(f"reconstruction law is {res:.3e} from the source in TV")


@dataclass(frozen=True, eq=False)
class SiWitnessBoth:
    """``uy_channel[(x, z), (u, y)] = P(u, y | x, z)``."""

    joint_source: JointPmf
    uy_channel: Channel
    u_size: int

    def __post_init__(self):
        q = _source_arr(self.joint_source)
        nx, nz = q.shape
        if self.uy_channel.input_size != nx * nz:
            raise DimensionError("uy_channel must be indexed by (x, z)")
        if self.uy_channel.output_size != self.u_size * nx:
            raise DimensionError("uy_channel outputs must be (u, y) with |Y| = |X|")
        if self.u_size > si_u_cap(nx, nz):
            raise ValueError(f"|U| = {self.u_size} exceeds |X|^2|Z| + 2 = {si_u_cap(nx, nz)}")
        cells = self.joint().cells
        # X - (U,Z) - Y: P(u,y|x,z) must factor as P(u|x,z) P(y|u,z)
        pu_xz = cells.sum(axis=3)
        p_zuy = cells.sum(axis=0)
        p_zu = p_zuy.sum(axis=2)
        cond = np.divide(p_zuy, p_zu[:, :, None], out=np.zeros_like(p_zuy), where=p_zu[:, :, None] > 0)
        qx_z = np.where(q > 0, q, 1.0)
        lhs = cells / qx_z[:, :, None, None]
        rhs = (pu_xz / qx_z[:, :, None])[:, :, :, None] * cond[None, :, :, :]
        gap = float(np.abs(np.where(q[:, :, None, None] > 0, lhs - rhs, 0.0)).max())
        if gap > MARKOV_TOL:
            raise MarkovError(f"X - (U,Z) - Y violated by {gap:.3e}")
        _realism_check(cells)

    @classmethod
    def from_parts(cls, joint_source: JointPmf, u_channel: Channel, y_channel: Channel) -> "SiWitnessBoth":
        """Build from ``P(u|x,z)`` and ``P(y|u,z)``; the Markov chain then holds by construction."""
        q = _source_arr(joint_source)
        nx, nz = q.shape
        k = u_channel.output_size
        if u_channel.input_size != nx * nz:
            raise DimensionError("u_channel must be indexed by (x, z)")
        if y_channel.input_size != k * nz:
            raise DimensionError("y_channel must be indexed by (u, z)")
        a = u_channel.matrix.reshape(nx, nz, k)
        b = y_channel.matrix.reshape(k, nz, -1)
        uy = a[:, :, :, None] * np.transpose(b, (1, 0, 2))[None, :, :, :]
        return cls(joint_source, Channel(uy.reshape(nx * nz, -1), atol=1e-10), k)

    def joint(self) -> JointPmf:
        q = self.joint_source.cells
        nx, nz = q.shape
        m = self.uy_channel.matrix.reshape(nx, nz, self.u_size, nx)
        return JointPmf(q[:, :, None, None] * m, atol=1e-10)


@dataclass(frozen=True, eq=False)
class SiWitnessDec:
    """``u_channel = P(u|x)`` and ``y_channel[(u, z), y] = P(y|u,z)``.

    Both Markov chains ``Z - X - U`` and ``X - (U,Z) - Y`` hold by construction.
    """

    joint_source: JointPmf
    u_channel: Channel
    y_channel: Channel

    def __post_init__(self):
        q = _source_arr(self.joint_source)
        nx, nz = q.shape
        if self.u_channel.input_size != nx:
            raise DimensionError("u_channel must be indexed by x")
        if self.y_channel.input_size != self.u_size * nz:
            raise DimensionError("y_channel must be indexed by (u, z)")
        if self.y_channel.output_size != nx:
            raise DimensionError("reconstruction alphabet must equal the source alphabet")
        if self.u_size > si_u_cap(nx, nz):
            raise ValueError(f"|U| = {self.u_size} exceeds |X|^2|Z| + 2 = {si_u_cap(nx, nz)}")
        _realism_check(self.joint().cells)

    @property
    def u_size(self) -> int:
        return self.u_channel.output_size

    def joint(self) -> JointPmf:
        q = self.joint_source.cells
        nx, nz = q.shape
        b = self.y_channel.matrix.reshape(self.u_size, nz, nx)
        cells = q[:, :, None, None] * self.u_channel.matrix[:, None, :, None] * np.transpose(b, (1, 0, 2))[None]
        return JointPmf(cells, atol=1e-10)


@dataclass(frozen=True)
class Exactness:
    exact: bool
    reason: str


def jointly_iid_exactness_flag(jointly_iid: bool, z_constant: bool = False) -> Exactness:
    """Whether decoder-only bounds describe the exact region or only an inner bound."""
    if jointly_iid:
        return Exactness(True, "reconstruction and side information declared jointly i.i.d.")
    if z_constant:
        return Exactness(True, "constant side information reduces to the noiseless region")
    return Exactness(False, "inner bound only")


@dataclass(frozen=True)
class SiPoint:
    R_min: float
    R0_min: float
    sum_min: float
    D: float
    raw: tuple[float, float, float]
    exactness: Exactness | None = None
    identity_gap: float | None = field(default=None, repr=False)

    def admits(self, target: RateTuple, tol: float = 0.0) -> bool:
        return (target.R >= self.R_min - tol and target.R0 >= self.R0_min - tol
                and target.R + target.R0 >= self.sum_min - tol and target.D >= self.D - tol)


def _pieces(cells: np.ndarray, d: DistortionMeasure):
    nx = cells.shape[0]
    if d.matrix.shape != (nx, nx):
        raise DimensionError(f"distortion is {d.matrix.shape}, source alphabet is {nx}")
    p_ux = cells.sum(axis=(1, 3)).T
    p_uy = cells.sum(axis=(0, 1))
    p_uz = cells.sum(axis=(0, 3)).T
    p_uxz = np.transpose(cells.sum(axis=3), (2, 0, 1))  # [u, x, z]
    p_uyz = np.transpose(cells.sum(axis=0), (1, 2, 0))  # [u, y, z]
    p_zy = cells.sum(axis=(0, 2))
    dist = max(d.expected(cells.sum(axis=(1, 2))), 0.0)
    return p_ux, p_uy, p_uz, p_uxz, p_uyz, p_zy, dist


def _clamped(raw) -> tuple[float, float, float]:
    return tuple(max(float(v), 0.0) for v in raw)


def si_both_point(w: SiWitnessBoth, d: DistortionMeasure) -> SiPoint:
    """Bounds certified by a witness when the encoder also sees ``Z``."""
    p_ux, p_uy, p_uz, p_uxz, p_uyz, p_zy, dist = _pieces(w.joint().cells, d)
    raw = (
        info.conditional_mi(p_uxz),
        info.mutual_information(p_uy) - info.mutual_information(p_uz),
        info.conditional_mi(p_uyz) - info.conditional_entropy(p_zy),
    )
    return SiPoint(*_clamped(raw), dist, tuple(map(float, raw)))


def si_dec_point(w: SiWitnessDec, d: DistortionMeasure, jointly_iid: bool = False) -> SiPoint:
    """Bounds certified by a witness when only the decoder sees ``Z``."""
    p_ux, p_uy, p_uz, p_uxz, p_uyz, p_zy, dist = _pieces(w.joint().cells, d)
    i_uz = info.mutual_information(p_uz)
    raw = (
        info.mutual_information(p_ux) - i_uz,
        info.mutual_information(p_uy) - i_uz,
        info.conditional_mi(p_uyz),
    )
    gap = abs(raw[0] - info.conditional_mi(p_uxz))
    if gap > IDENTITY_TOL:
        raise MarkovError(f"I(U;X) - I(U;Z) differs from I(U;X|Z) by {gap:.3e}")
    z_const = int(np.count_nonzero(w.joint_source.cells.sum(axis=0) > 0)) <= 1
    return SiPoint(*_clamped(raw), dist, tuple(map(float, raw)),
                   jointly_iid_exactness_flag(jointly_iid, z_const), gap)


# --------------------------------------------------------------------------
# constructing realism-feasible reconstruction channels


def _uz_weights(q: np.ndarray, u_channel: np.ndarray) -> np.ndarray:
    """P(u, z) flattened as ``u * |Z| + z`` for ``P(u|x)`` or ``P(u|x,z)``."""
    nx, nz = q.shape
    if u_channel.shape[0] == nx:
        p_uz = u_channel.T @ q
    elif u_channel.shape[0] == nx * nz:
        a = u_channel.reshape(nx, nz, -1)
        p_uz = np.einsum("xz,xzu->uz", q, a)
    else:
        raise DimensionError("u_channel must be indexed by x or by (x, z)")
    return p_uz.ravel()


def fit_realism(joint_source: JointPmf, u_channel: Channel, y_channel: Channel,
                max_iter: int = IPF_MAX_ITER, tol: float = IPF_TOL) -> Channel:
    """Iterative proportional fitting of ``P(y|u,z)`` toward output law ``Q_X``.

    Alternately rescales columns to match ``Q_X`` and renormalises rows.
    Returns the fitted channel; callers re-validate realism on the witness.
    """
    q = _source_arr(joint_source)
    target = q.sum(axis=1)
    w = _uz_weights(q, u_channel.matrix)
    b = np.array(y_channel.matrix, dtype=float)
    if b.shape != (w.size, target.size):
        raise DimensionError("y_channel must map (u, z) to the source alphabet")
    py = w @ b
    if np.any((py <= 0) & (target > 0)):
        b = 0.999999 * b + 1e-6 / target.size
    for _ in range(max_iter):
        py = w @ b
        if info.tv_distance(py, target) < tol:
            break
        scale = np.divide(target, py, out=np.zeros_like(py), where=py > 0)
        b = b * scale[None, :]
        s = b.sum(axis=1, keepdims=True)
        b = np.divide(b, s, out=np.full_like(b, 1.0 / b.shape[1]), where=s > 0)
    return Channel(b, atol=1e-9)


def min_distortion_combiner(joint_source: JointPmf, u_channel: Channel, d: DistortionMeasure) -> Channel:
    """``P(y|u,z)`` of least expected distortion subject to ``P_Y = Q_X`` (linear program)."""
    q = _source_arr(joint_source)
    nx, nz = q.shape
    a = u_channel.matrix
    k = a.shape[1]
    if a.shape[0] == nx:
        p_xzu = q[:, :, None] * a[:, None, :]
    elif a.shape[0] == nx * nz:
        p_xzu = q[:, :, None] * a.reshape(nx, nz, k)
    else:
        raise DimensionError("u_channel must be indexed by x or by (x, z)")
    # cost[(u,z), y] = sum_x P(x,z,u) d(x,y)
    cost = np.einsum("xzu,xy->uzy", p_xzu, d.matrix).reshape(k * nz, nx)
    w = p_xzu.sum(axis=0).T.ravel()
    nrow = k * nz
    rows = np.kron(np.eye(nrow), np.ones((1, nx)))
    cols = np.kron(w[None, :], np.eye(nx))
    target = q.sum(axis=1)
    res = linprog(cost.ravel(), A_eq=np.vstack([rows, cols[:-1]]),
                  b_eq=np.concatenate([np.ones(nrow), target[:-1]]),
                  bounds=(0, None), method="highs")
    if res.status != 0:
        raise RealismError("no reconstruction channel reaches the source law")
    b = np.clip(res.x.reshape(nrow, nx), 0.0, None)
    b /= b.sum(axis=1, keepdims=True)
    return Channel(b, atol=1e-9)


# --------------------------------------------------------------------------
# witness search


@dataclass(frozen=True)
class SiSearchConfig:
    starts: int = 8
    seed: int = 0
    u_size: int | None = None  # defaults to |X| * |Z| + 1, capped
    max_iter: int = 200
    tol: float = 1e-6
    jobs: int = 1


@dataclass(frozen=True)
class SiSearchResult:
    status: str  # "certified" | "not_found"
    mode: str
    target: RateTuple
    witness: SiWitnessBoth | SiWitnessDec | None = None
    point: SiPoint | None = None

    @property
    def found(self) -> bool:
        return self.status == "certified"


def _si_raw(cells: np.ndarray, mode: str) -> tuple[float, float, float]:
    p_ux = cells.sum(axis=(1, 3)).T
    p_uy = cells.sum(axis=(0, 1))
    p_uz = cells.sum(axis=(0, 3)).T
    p_uyz = np.transpose(cells.sum(axis=0), (1, 2, 0))
    i_uz = info.mutual_information(p_uz)
    if mode == "both":
        p_uxz = np.transpose(cells.sum(axis=3), (2, 0, 1))
        return (info.conditional_mi(p_uxz), info.mutual_information(p_uy) - i_uz,
                info.conditional_mi(p_uyz) - info.conditional_entropy(cells.sum(axis=(0, 2))))
    return (info.mutual_information(p_ux) - i_uz, info.mutual_information(p_uy) - i_uz,
            info.conditional_mi(p_uyz))


def si_search(joint_source: JointPmf, d: DistortionMeasure, target: RateTuple, mode: str = "dec",
              config: SiSearchConfig = SiSearchConfig(), jointly_iid: bool = False) -> SiSearchResult:
    """Multi-start search for a side-information witness whose bounds admit ``target``.

    Minimises the message-rate bound subject to the common-randomness, sum-rate,
    distortion and realism constraints (SLSQP, finite-difference gradients),
    then repairs realism by proportional fitting and re-evaluates exactly.
    """
    if mode not in ("both", "dec"):
        raise ValueError("mode must be 'both' or 'dec'")
    q = _source_arr(joint_source)
    nx, nz = q.shape
    k = min(config.u_size or nx * nz + 1, si_u_cap(nx, nz))
    na_in = nx * nz if mode == "both" else nx
    na, nb = na_in * k, k * nz * nx
    qx = q.sum(axis=1)
    dm = d.matrix

    def unpack(v):
        a = np.clip(v[:na].reshape(na_in, k), 0.0, None)
        b = np.clip(v[na:].reshape(k * nz, nx), 0.0, None)
        a = a / np.maximum(a.sum(axis=1, keepdims=True), 1e-300)
        b = b / np.maximum(b.sum(axis=1, keepdims=True), 1e-300)
        return a, b

    def cells_of(a, b):
        a3 = a.reshape(nx, nz, k) if mode == "both" else np.broadcast_to(a[:, None, :], (nx, nz, k))
        b3 = np.transpose(b.reshape(k, nz, nx), (1, 0, 2))
        return q[:, :, None, None] * a3[:, :, :, None] * b3[None]

    def raw_of(v):
        return _si_raw(cells_of(*unpack(v)), mode)

    rows = np.zeros((na_in + k * nz, na + nb))
    for i in range(na_in):
        rows[i, i * k:(i + 1) * k] = 1.0
    for j in range(k * nz):
        rows[na_in + j, na + j * nx:na + (j + 1) * nx] = 1.0

    def realism(v):
        a, b = unpack(v)
        return cells_of(a, b).sum(axis=(0, 1, 2))[:-1] - qx[:-1]

    def dist(v):
        return float(np.sum(cells_of(*unpack(v)).sum(axis=(1, 2)) * dm))

    cons = [
        {"type": "eq", "fun": lambda v: rows @ v - 1.0, "jac": lambda v: rows},
        {"type": "eq", "fun": realism},
        {"type": "ineq", "fun": lambda v: target.D - dist(v)},
        {"type": "ineq", "fun": lambda v: target.R0 - raw_of(v)[1]},
        {"type": "ineq", "fun": lambda v: target.R + target.R0 - raw_of(v)[2]},
    ]

    starts = []
    # U carries the source letter (with a spare letter unused), Y copies it
    a0 = np.zeros((na_in, k))
    a0[np.arange(na_in), (np.arange(na_in) // (nz if mode == "both" else 1)) % k] = 1.0
    a0 = 0.9 * a0 + 0.1 / k
    b0 = np.zeros((k * nz, nx))
    b0[np.arange(k * nz), (np.arange(k * nz) // nz) % nx] = 1.0
    b0 = 0.9 * b0 + 0.1 * qx[None, :]
    starts.append(np.concatenate([a0.ravel(), b0.ravel()]))
    for i in range(config.starts - 1):
        rng = np.random.default_rng([config.seed, i])
        starts.append(np.concatenate([rng.dirichlet(np.ones(k), na_in).ravel(),
                                      rng.dirichlet(np.ones(nx), k * nz).ravel()]))

    best = None
    for v0 in starts:
        res = minimize(lambda v: raw_of(v)[0], v0, method="SLSQP", bounds=[(0.0, 1.0)] * v0.size,
                       constraints=cons, options={"maxiter": config.max_iter, "ftol": 1e-10})
        a, b = unpack(res.x)
        u_ch = Channel(a, atol=1e-9)
        try:
            y_ch = fit_realism(joint_source, u_ch, Channel(b, atol=1e-9))
            if mode == "both":
                w = SiWitnessBoth.from_parts(joint_source, u_ch, y_ch)
                pt = si_both_point(w, d)
            else:
                w = SiWitnessDec(joint_source, u_ch, y_ch)
                pt = si_dec_point(w, d, jointly_iid)
        except ValueError:
            continue
        if pt.admits(target, config.tol) and (best is None or pt.R_min < best[1].R_min):
            best = (w, pt)
    if best is None:
        return SiSearchResult("not_found", mode, target)
    return SiSearchResult("certified", mode, target, best[0], best[1])
