"""Secure rate-distortion-perception region over a noiseless link.

A witness is a Markov chain ``X - U - Y`` built from the source law ``Q_X``, a
test channel ``P(u|x)`` and a reconstruction channel ``P(y|u)`` whose output
law matches ``Q_X`` exactly. Its corner point is

    (R, R0, D) = (I(U;X), I(U;Y), E d(X, Y))

and every tuple dominating the corner is achievable. The search routines
below only ever return witnessed points, so "not found" means "no witness
within the search budget", never "infeasible".
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import minimize

from . import info
from .prob import Channel, DimensionError, JointPmf, Pmf, push_forward

REALISM_TOL = 1e-9
LN2 = math.log(2.0)
# skip the witness search when the convex common-randomness floor exceeds the cap by this much
SCREEN_MARGIN = 1e-4


class RealismError(ValueError):
    """A witness whose reconstruction law does not match the source law."""


@dataclass(frozen=True)
class RateTuple:
    R: float
    R0: float
    D: float

    def __post_init__(self):
        for name in ("R", "R0", "D"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise ValueError(f"RateTuple.{name} must be finite and nonnegative, got {v}")

    def dominates(self, other: "RateTuple", tol: float = 0.0) -> bool:
        """True when every coordinate of ``self`` is at least that of ``other`` (up to ``tol``)."""
        return self.R >= other.R - tol and self.R0 >= other.R0 - tol and self.D >= other.D - tol

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.R, self.R0, self.D)


@dataclass(frozen=True, eq=False)
class DistortionMeasure:
    """Per-letter distortion ``d[x, y] >= 0``."""

    matrix: np.ndarray

    def __init__(self, matrix):
        arr = np.array(matrix, dtype=float)
        if arr.ndim != 2:
            raise ValueError("distortion matrix must be 2-d")
        if not np.all(np.isfinite(arr)) or np.any(arr < 0):
            raise ValueError("distortion entries must be finite and nonnegative")
        arr.setflags(write=False)
        object.__setattr__(self, "matrix", arr)

    @property
    def max_value(self) -> float:
        return float(self.matrix.max())

    @classmethod
    def hamming(cls, size: int) -> "DistortionMeasure":
        return cls(1.0 - np.eye(size))

    def scaled(self, lam: float) -> "DistortionMeasure":
        return DistortionMeasure(lam * self.matrix)

    def expected(self, joint_xy) -> float:
        cells = joint_xy.cells if isinstance(joint_xy, JointPmf) else np.asarray(joint_xy)
        if cells.shape != self.matrix.shape:
            raise DimensionError(f"joint shape {cells.shape} vs distortion {self.matrix.shape}")
        return float(np.sum(cells * self.matrix))


def u_cap(x_size: int) -> int:
    return x_size**2 + 1


@dataclass(frozen=True, eq=False)
class NoiselessWitness:
    source: Pmf
    u_channel: Channel
    y_channel: Channel

    def __post_init__(self):
        nx = self.source.alphabet_size
        if self.u_channel.input_size != nx:
            raise DimensionError("u_channel input alphabet must match the source")
        if self.y_channel.input_size != self.u_channel.output_size:
            raise DimensionError("y_channel input alphabet must match u_channel output")
        if self.y_channel.output_size != nx:
            raise DimensionError("reconstruction alphabet must equal the source alphabet")
        if self.u_size > u_cap(nx):
            raise ValueError(f"|U| = {self.u_size} exceeds the cap |X|^2 + 1 = {u_cap(nx)}")
        res = self.realism_residual
        if res > REALISM_TOL:
            raise RealismError(f"witness output law is {res:.3e} from the source in TV")

    @property
    def u_size(self) -> int:
        return self.u_channel.output_size

    @property
    def output_law(self) -> Pmf:
        return push_forward(push_forward(self.source, self.u_channel), self.y_channel)

    @property
    def realism_residual(self) -> float:
        return info.tv_distance(self.output_law, self.source)

    def joint(self) -> JointPmf:
        """Joint law indexed ``[x, u, y]``."""
        q, a, b = self.source.probs, self.u_channel.matrix, self.y_channel.matrix
        return JointPmf(q[:, None, None] * a[:, :, None] * b[None, :, :], atol=1e-10)


def evaluate_witness(w: NoiselessWitness, d: DistortionMeasure) -> RateTuple:
    """Corner point ``(I(U;X), I(U;Y), E d(X,Y))`` of a witness."""
    nx = w.source.alphabet_size
    if d.matrix.shape != (nx, nx):
        raise DimensionError(f"distortion is {d.matrix.shape}, source alphabet is {nx}")
    cells = w.joint().cells
    r = info.mutual_information(cells.sum(axis=2))
    r0 = info.mutual_information(cells.sum(axis=0))
    dist = d.expected(cells.sum(axis=1))
    return RateTuple(r, r0, max(dist, 0.0))


# --------------------------------------------------------------------------
# witness search


@dataclass(frozen=True)
class SearchConfig:
    """Budget for the multi-start witness search.

    ``u_size`` defaults to the cardinality cap ``|X|^2 + 1``. ``tol`` is the
    slack allowed when comparing a witness corner against a target.
    """

    starts: int = 32
    seed: int = 0
    u_size: int | None = None
    max_iter: int = 300
    tol: float = 1e-6
    jobs: int = 1

    def __post_init__(self):
        if self.starts < 1:
            raise ValueError("starts must be >= 1")
        if self.u_size is not None and self.u_size < 1:
            raise ValueError("u_size must be >= 1")
        if self.max_iter < 1 or self.tol < 0 or self.jobs < 1:
            raise ValueError("invalid search budget")


@dataclass(frozen=True)
class SearchResult:
    status: str  # "certified" | "not_found"
    target: RateTuple | None = None
    witness: NoiselessWitness | None = None
    corner: RateTuple | None = None

    @property
    def found(self) -> bool:
        return self.status == "certified"


def _lg(a):
    return np.log(np.maximum(a, 1e-300))


class _WitnessProblem:
    """Minimise I(U;X) over (P(u|x), P(y|u)) with realism, secrecy and distortion constraints.

    Variables are the two row-stochastic matrices flattened into one vector.
    """

    def __init__(self, q: np.ndarray, dmat: np.ndarray, k: int):
        self.q = q
        self.dm = dmat
        self.nx = q.size
        self.k = k
        self.na = self.nx * k
        self.n = self.na + k * self.nx
        sa = np.zeros((self.nx, self.n))
        for x in range(self.nx):
            sa[x, x * k:(x + 1) * k] = 1.0
        sb = np.zeros((k, self.n))
        for u in range(k):
            sb[u, self.na + u * self.nx:self.na + (u + 1) * self.nx] = 1.0
        self.rowsums = np.vstack([sa, sb])

    def unpack(self, z):
        return z[:self.na].reshape(self.nx, self.k), z[self.na:].reshape(self.k, self.nx)

    def i_ux(self, z):
        a, _ = self.unpack(z)
        p = self.q @ a
        la = _lg(a) - _lg(p)
        val = float(np.sum(self.q[:, None] * a * la)) / LN2
        grad = np.zeros(self.n)
        grad[:self.na] = (self.q[:, None] * la).ravel() / LN2
        return val, grad

    def i_uy(self, z):
        a, b = self.unpack(z)
        p = self.q @ a
        r = p @ b
        lb = _lg(b)
        lr = _lg(r)
        val = (float(np.sum(p[:, None] * b * lb)) - float(np.sum(r * lr))) / LN2
        grad = np.zeros(self.n)
        gp = (np.sum(b * lb, axis=1) - b @ (lr + 1.0)) / LN2
        grad[:self.na] = (self.q[:, None] * gp[None, :]).ravel()
        grad[self.na:] = (p[:, None] * (lb - lr[None, :])).ravel() / LN2
        return val, grad

    def dist(self, z):
        a, b = self.unpack(z)
        m = b @ self.dm.T  # m[u, x] = sum_y b[u, y] d[x, y]
        val = float(np.sum(self.q[:, None] * a * m.T))
        grad = np.empty(self.n)
        grad[:self.na] = (self.q[:, None] * m.T).ravel()
        grad[self.na:] = ((self.q[:, None] * a).T @ self.dm).ravel()
        return val, grad

    def realism(self, z):
        a, b = self.unpack(z)
        return (self.q @ a) @ b - self.q

    def realism_jac(self, z):
        a, b = self.unpack(z)
        p = self.q @ a
        jac = np.zeros((self.nx, self.n))
        for y in range(self.nx):
            jac[y, :self.na] = (self.q[:, None] * b[:, y][None, :]).ravel()
            gb = np.zeros((self.k, self.nx))
            gb[:, y] = p
            jac[y, self.na:] = gb.ravel()
        return jac

    def solve(self, z0, r0_cap: float, d_cap: float, max_iter: int):
        cons = [
            {"type": "eq", "fun": lambda z: self.rowsums @ z - 1.0, "jac": lambda z: self.rowsums},
            # one realism equation is implied by the row-sum constraints
            {"type": "eq", "fun": lambda z: self.realism(z)[:-1],
             "jac": lambda z: self.realism_jac(z)[:-1]},
            {"type": "ineq", "fun": lambda z: d_cap - self.dist(z)[0],
             "jac": lambda z: -self.dist(z)[1]},
        ]
        if math.isfinite(r0_cap):
            cons.append({"type": "ineq", "fun": lambda z: r0_cap - self.i_uy(z)[0],
                         "jac": lambda z: -self.i_uy(z)[1]})
        res = minimize(self.i_ux, z0, jac=True, method="SLSQP", bounds=[(0.0, 1.0)] * self.n,
                       constraints=cons, options={"maxiter": max_iter, "ftol": 1e-12})
        return res.x

    def starting_points(self, seed: int, count: int) -> list[np.ndarray]:
        nx, k = self.nx, self.k
        pts = []
        # near-lossless start: U copies X (when |U| allows), Y copies U
        a = np.full((nx, k), 0.1 / k)
        b = np.tile(self.q, (k, 1))
        for x in range(nx):
            a[x, x % k] += 0.9
            if x < k:
                b[x] = 0.9 * np.eye(nx)[x] + 0.1 * self.q
        pts.append(np.concatenate([(a / a.sum(1, keepdims=True)).ravel(), b.ravel()]))
        # near-independent start: U nearly constant, Y drawn from Q
        a = np.full((nx, k), 0.1 / k)
        a[:, 0] += 0.9
        pts.append(np.concatenate([a.ravel(), np.tile(self.q, (k, 1)).ravel()]))
        i = 0
        while len(pts) < count:
            rng = np.random.default_rng([seed, i])
            pts.append(np.concatenate([rng.dirichlet(np.ones(k), nx).ravel(),
                                       rng.dirichlet(np.ones(nx), k).ravel()]))
            i += 1
        return pts[:count]


def realism_rate_distortion(q: Pmf, d: DistortionMeasure, D: float, starts: int = 2) -> float:
    """``min I(X;Y)`` over channels with output law ``Q_X`` and ``E d <= D``.

    Every witness has ``I(U;Y) >= I(X;Y)``, so this is the least common-randomness
    rate compatible with distortion ``D``. The problem is convex in ``P(y|x)``.
    Returns ``inf`` when no channel meets the distortion cap.
    """
    nx = q.alphabet_size
    prob = _WitnessProblem(q.probs, d.matrix, nx)
    a = np.eye(nx)
    # with U = X only the reconstruction half of the variable vector moves
    fix_a = [(1.0, 1.0) if v else (0.0, 0.0) for v in a.ravel()]
    best = math.inf
    for i in range(starts):
        lam = 0.5 if i == 0 else 0.95
        b = lam * np.eye(nx) + (1.0 - lam) * q.probs[None, :]
        z0 = np.concatenate([a.ravel(), b.ravel()])
        cons = [
            {"type": "eq", "fun": lambda z: prob.rowsums[nx:] @ z - 1.0,
             "jac": lambda z: prob.rowsums[nx:]},
            {"type": "eq", "fun": lambda z: prob.realism(z)[:-1],
             "jac": lambda z: prob.realism_jac(z)[:-1]},
            {"type": "ineq", "fun": lambda z: D - prob.dist(z)[0], "jac": lambda z: -prob.dist(z)[1]},
        ]
        res = minimize(prob.i_uy, z0, jac=True, method="SLSQP",
                       bounds=fix_a + [(0.0, 1.0)] * (nx * nx), constraints=cons,
                       options={"maxiter": 500, "ftol": 1e-13})
        z = res.x
        if (np.abs(prob.realism(z)).max() < 1e-7 and prob.dist(z)[0] <= D + 1e-7
                and np.abs(prob.rowsums[nx:] @ z - 1.0).max() < 1e-7):
            best = min(best, prob.i_uy(z)[0])
    return best


def _restore_realism(q: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Mix every row of ``b`` with one common row so the output law equals ``q`` exactly.

    Mixing with an input-independent row cannot increase I(U;Y).
    """
    py = (q @ a) @ b
    pos = py > 0
    t = max(0.0, 1.0 - float(np.min(q[pos] / py[pos]))) if np.any(pos) else 1.0
    if np.any(q[~pos] > 0):
        t = 1.0
    if t < 1e-13:
        return b
    k = np.clip((q - (1.0 - t) * py) / t, 0.0, None)
    k /= k.sum()
    return (1.0 - t) * b + t * k[None, :]


def _normalize_rows(m: np.ndarray) -> np.ndarray:
    m = np.clip(m, 0.0, None)
    s = m.sum(axis=1, keepdims=True)
    bad = s[:, 0] <= 0
    if np.any(bad):
        m[bad] = 1.0
        s = m.sum(axis=1, keepdims=True)
    return m / s


def _better(cand: tuple, best: tuple | None) -> bool:
    """Smaller R wins; R ties within 1e-9 go to the smaller I(U;Y)."""
    if best is None:
        return True
    if cand[0].R < best[0].R - 1e-9:
        return True
    return abs(cand[0].R - best[0].R) <= 1e-9 and cand[0].R0 < best[0].R0


def _search(source: Pmf, d: DistortionMeasure, r0_cap: float, d_cap: float,
            search: SearchConfig, extra_starts: Sequence[np.ndarray] = ()):
    """Best (corner, witness) over all starts meeting the caps, or None."""
    q = source.probs
    nx = q.size
    if d.matrix.shape != (nx, nx):
        raise DimensionError(f"distortion is {d.matrix.shape}, source alphabet is {nx}")
    if math.isfinite(r0_cap):
        floor = realism_rate_distortion(source, d, d_cap)
        if math.isfinite(floor) and floor > r0_cap + SCREEN_MARGIN:
            return None
    k = search.u_size or u_cap(nx)
    prob = _WitnessProblem(q, d.matrix, k)
    best = None
    for z0 in list(extra_starts) + prob.starting_points(search.seed, search.starts):
        z = prob.solve(z0, r0_cap, d_cap, search.max_iter)
        a, b = prob.unpack(z)
        a = _normalize_rows(a)
        b = _restore_realism(q, a, _normalize_rows(b))
        try:
            w = NoiselessWitness(source, Channel(a, atol=1e-9), Channel(b, atol=1e-9))
        except (RealismError, ValueError):
            continue
        corner = evaluate_witness(w, d)
        if corner.R0 > r0_cap + search.tol or corner.D > d_cap + search.tol:
            continue
        if _better((corner, w), best):
            best = (corner, w)
    return best


def certify_achievable(q: Pmf, d: DistortionMeasure, target: RateTuple,
                       search: SearchConfig = SearchConfig()) -> SearchResult:
    """Look for a witness whose corner lies below ``target`` (componentwise, within ``search.tol``)."""
    best = _search(q, d, target.R0, target.D, search)
    if best is not None and best[0].R <= target.R + search.tol:
        return SearchResult("certified", target, best[1], best[0])
    return SearchResult("not_found", target)


@dataclass(frozen=True)
class FrontierPoint:
    R0: float
    D: float
    R_min: float | None
    corner: RateTuple | None = field(default=None, repr=False)
    witness: NoiselessWitness | None = field(default=None, repr=False)


def _sweep_one(args):
    q, d, r0, dd, search = args
    return _search(q, d, r0, dd, search)


def frontier_sweep(q: Pmf, d: DistortionMeasure, grid: Iterable[tuple[float, float]],
                   search: SearchConfig = SearchConfig()) -> list[FrontierPoint]:
    """Smallest witnessed R at each ``(R0, D)`` grid point.

    ``R0`` may be ``math.inf`` for an uncapped common-randomness rate. After the
    per-point searches, every point inherits the best witness found at any
    grid point it dominates, which makes the result nonincreasing in both
    coordinates while keeping every value backed by a stored witness.
    """
    pts = [(float(r0), float(dd)) for r0, dd in grid]
    if not pts:
        raise ValueError("frontier_sweep needs a nonempty grid")
    for r0, dd in pts:
        if r0 < 0 or dd < 0 or math.isnan(r0) or math.isnan(dd):
            raise ValueError(f"grid point ({r0}, {dd}) must be nonnegative")
    jobs = [(q, d, r0, dd, search) for r0, dd in pts]
    if search.jobs > 1:
        with ProcessPoolExecutor(max_workers=search.jobs) as ex:
            found = list(ex.map(_sweep_one, jobs))
    else:
        found = [_sweep_one(j) for j in jobs]

    out = []
    for r0, dd in pts:
        best = None
        for (r0j, ddj), cand in zip(pts, found):
            if cand is not None and r0j <= r0 and ddj <= dd and _better(cand, best):
                best = cand
        if best is None:
            out.append(FrontierPoint(r0, dd, None))
        else:
            out.append(FrontierPoint(r0, dd, best[0].R, best[0], best[1]))
    return out
