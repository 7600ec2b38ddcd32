"""Acceptance criteria, one pass/fail line per clause.

Run with ``pytest tests/test_acceptance.py -v``; the PASS/FAIL lines are
printed even when output capture is on. Tolerances are fixed per criterion.
"""
import math
import time

import numpy as np
import pytest

from srdp import broadcast as bc
from srdp import closed_forms as cf
from srdp import osrb
from srdp import sideinfo as si
from srdp.info import (binary_entropy, conditional_mi, entropy, inverse_binary_entropy, mutual_information,
                       star, tv_distance)
from srdp.noiseless import DistortionMeasure, NoiselessWitness, evaluate_witness, frontier_sweep
from srdp.prob import Channel, JointPmf, Pmf, compose, iid_extension, joint_from, marginal, push_forward

HAM = DistortionMeasure.hamming(2)
UNI = Pmf.uniform(2)
N_RANDOM = 1000


class Report:
    def __init__(self, capsys):
        self.capsys = capsys
        self.failed = []

    def __call__(self, criterion, clause, ok, detail=""):
        with self.capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {criterion}: {clause}  {detail}", end="")
        if not ok:
            self.failed.append(clause)

    def verify(self):
        assert not self.failed, f"failed clauses: {self.failed}"


@pytest.fixture
def report(capsys):
    return Report(capsys)


def rand_channel(rng, n_in, n_out):
    w = rng.random((n_in, n_out)) * (rng.random((n_in, n_out)) > 0.2)
    w[np.arange(n_in), rng.integers(0, n_out, n_in)] += 1e-3  # no empty rows
    return Channel(w / w.sum(axis=1, keepdims=True))


def rand_pmf(rng, n):
    return Pmf(rng.dirichlet(np.full(n, 0.5)))


# ---------------------------------------------------------------- 1


def test_c1_binary_closed_form_vs_optimizer(report):
    grid = [(float(r0), float(d)) for r0 in np.linspace(0, 1, 10) for d in np.linspace(0, 0.5, 10)]
    t0 = time.perf_counter()
    pts = frontier_sweep(UNI, HAM, grid)
    elapsed = time.perf_counter() - t0
    worst, missing, spurious = 0.0, 0, 0
    for p in pts:
        ref = cf.binary_min_R(p.R0, p.D)
        if ref is None:
            spurious += p.R_min is not None
        elif p.R_min is None:
            missing += 1
        else:
            worst = max(worst, abs(ref - p.R_min))
    report(1, "frontier matches binary closed form within 1e-3 bits", worst <= 1e-3 and missing == 0,
           f"worst={worst:.2e} missing={missing}")
    report(1, "no witness where the closed form is infeasible", spurious == 0, f"spurious={spurious}")
    report(1, "runtime < 5 min", elapsed < 300, f"{elapsed:.1f}s")
    report.verify()


# ---------------------------------------------------------------- 2


def test_c2_tradeoff_bands(report):
    t0 = time.perf_counter()
    t = cf.fig4_tradeoff_table()
    elapsed = time.perf_counter() - t0
    bands = {b.D: b for b in t.bands}
    for d, lo, hi in [(0.1, 0.45, 0.52), (0.4, 0.31, 0.39)]:
        b = bands[d]
        ok = b.saving[0] <= hi and lo <= b.saving[1]
        report(2, f"D={d} saving band overlaps {lo:.0%}-{hi:.0%}", ok,
               f"saving {b.saving[0]:.3f}-{b.saving[1]:.3f}")
    documented = all(r.anchor for r in t.rows)
    report(2, "baselines documented on every row", documented)
    report(2, "runtime < 1 s", elapsed < 1.0, f"{elapsed:.3f}s")
    report.verify()


# ---------------------------------------------------------------- 3


def test_c3_gaussian(report):
    t0 = time.perf_counter()
    g = cf.GaussianParams(0.0, 1.0, 0.5)
    rates = cf.gaussian_rates(g)
    # closed form evaluated by hand: s = 1, all three rates are 1/2 log2 2
    report(3, "(eta, Delta, nu) = (0, 1, 0.5) gives 0.5 bits within 1e-9",
           max(abs(r - 0.5) for r in rates) <= 1e-9, str(rates))
    mc = cf.sample_gaussian_family(g, n_samples=10**6, seed=0)
    z = [abs(e - r) / se for e, r, se in zip(mc.rates, rates, mc.rates_se)]
    report(3, "Monte Carlo (1e6 samples) within 3 SE", max(z) <= 3, f"z={max(z):.2f}")

    eta, delta = 0.3, 0.8
    rho2 = (1 - delta / 2) ** 2
    r1, _, r3 = cf.gaussian_rates(cf.GaussianParams(eta, delta, rho2 + 1e-8))
    lim = 0.5 * math.log2((1 - eta**2) / (1 - rho2))
    report(3, "R_G1 near rho^2 within 1e-4 of its limit", abs(r1 - lim) <= 1e-4, f"|diff|={abs(r1 - lim):.2e}")
    report(3, "R_G3 > 10 bits near rho^2", r3 > 10, f"R_G3={r3:.2f}")

    eta = 0.4
    delta = 2 - 2 * abs(eta)
    rho2 = (1 - delta / 2) ** 2
    r3 = cf.gaussian_rates(cf.GaussianParams(eta, delta, rho2 + 1e-9))[2]
    report(3, "boundary Delta = 2 - 2|eta|, eta = 0.4: R_G3 -> 0.5 within 1e-3", abs(r3 - 0.5) <= 1e-3,
           f"R_G3={r3:.6f}")
    elapsed = time.perf_counter() - t0
    report(3, "runtime < 1 min", elapsed < 60, f"{elapsed:.2f}s")
    report.verify()


# ---------------------------------------------------------------- 4


def test_c4_capacity(report):
    t0 = time.perf_counter()
    for p in (0.0, 0.11, 0.25, 0.5):
        c = bc.capacity_unsecure(Channel.bsc(p))
        ref = 1 - binary_entropy(p)
        report(4, f"BSC({p}) capacity within 1e-6", abs(c - ref) <= 1e-6, f"C={c:.9f}")
    elapsed = time.perf_counter() - t0
    report(4, "runtime < 1 s", elapsed < 1.0, f"{elapsed:.3f}s")
    report.verify()


# ---------------------------------------------------------------- 5


def test_c5_more_capable(report):
    t0 = time.perf_counter()
    res = bc.more_capable_check(bc.BroadcastChannel.from_marginals(Channel.bsc(0.1), Channel.bsc(0.2)))
    report(5, "degraded BSC pair certified_degraded", res.status == "certified_degraded", res.status)
    res = bc.more_capable_check(bc.BroadcastChannel.from_marginals(Channel.bsc(0.3), Channel.bsc(0.1)))
    ok = res.status == "violated" and res.witness is not None
    if ok:
        p = res.witness.probs[:, None]
        gap = mutual_information(p * Channel.bsc(0.1).matrix) - mutual_information(p * Channel.bsc(0.3).matrix)
        ok = gap > 0
    report(5, "reversed pair violated with explicit witness", ok,
           f"{res.status} witness={None if res.witness is None else np.round(res.witness.probs, 4).tolist()}")
    elapsed = time.perf_counter() - t0
    report(5, "runtime < 10 s", elapsed < 10, f"{elapsed:.2f}s")
    report.verify()


# ---------------------------------------------------------------- 6


@pytest.fixture(scope="module")
def osrb_sweep():
    t0 = time.perf_counter()
    base = osrb.binary_cascade_config(0.2, 0.2, 0.15)
    table = osrb.rate_sweep_experiment(base, [2, 4, 6, 8], 20)
    zero = osrb.rate_sweep_experiment(base.with_(R=0.0), [2, 4, 6, 8], 20)
    return table, zero, time.perf_counter() - t0


def test_c6_realism_trend(report, osrb_sweep):
    table, _, elapsed = osrb_sweep
    m = table.medians("realism_tv")
    report(6, "median realism_tv(n=8) < realism_tv(n=2)", m[8] < m[2], f"{m[2]:.4f} -> {m[8]:.4f}")
    report(6, "runtime < 10 min", elapsed < 600, f"{elapsed:.1f}s")
    report.verify()


def test_c6_leakage_trend(report, osrb_sweep):
    m = osrb_sweep[0].medians("leakage_bits")
    report(6, "median leakage_bits(n=8) < leakage_bits(n=2)", m[8] < m[2],
           " -> ".join(f"n={n}:{v:.4f}" for n, v in m.items()))
    report.verify()


def test_c6_zero_leakage(report, osrb_sweep):
    zero = osrb_sweep[1]
    ok = all(r.leakage_bits == 0.0 for r in zero.runs) and all(r.eff_R == 0 for r in zero.runs)
    report(6, "leakage exactly 0 when ceil(nR) = 0", ok, f"{len(zero.runs)} runs")
    report.verify()


def test_c6_distortion(report, osrb_sweep):
    d8 = osrb_sweep[0].medians("distortion")[8]
    target = star(0.2, 0.2)
    report(6, "median distortion at n=8 within 0.05 of 0.32", abs(d8 - target) <= 0.05, f"D={d8:.4f}")
    report.verify()


# ---------------------------------------------------------------- 7


def test_c7_side_information_reductions(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(100):
        nx, k = int(rng.integers(2, 4)), int(rng.integers(1, 5))
        q = rng.dirichlet(np.ones(nx))
        a = rand_channel(rng, nx, k).matrix
        pu = q @ a
        # posterior reconstruction keeps P_Y = Q_X exactly
        b = np.divide((q[:, None] * a).T, pu[:, None], out=np.tile(q, (k, 1)), where=pu[:, None] > 0)
        w = NoiselessWitness(Pmf(q), Channel(a), Channel(b, atol=1e-10))
        d = DistortionMeasure(rng.random((nx, nx)))
        ref = evaluate_witness(w, d)
        jq = JointPmf(q[:, None])
        for pt in (si.si_both_point(si.SiWitnessBoth.from_parts(jq, w.u_channel, w.y_channel), d),
                   si.si_dec_point(si.SiWitnessDec(jq, w.u_channel, w.y_channel), d)):
            worst = max(worst, abs(pt.R_min - ref.R), abs(pt.R0_min - ref.R0), abs(pt.D - ref.D))
    report(7, "Z constant reproduces the noiseless corner within 1e-12 (100 witnesses)", worst <= 1e-12,
           f"worst={worst:.1e}")

    worst = 0.0
    for _ in range(100):
        nx, nz, k = (int(v) for v in rng.integers(2, 5, 3))
        qxz = rng.dirichlet(np.ones(nx * nz)).reshape(nx, nz)
        a = rand_channel(rng, nx, k).matrix
        j = np.einsum("xz,xu->uxz", qxz, a)
        lhs = mutual_information(j.sum(2)) - mutual_information(j.sum(1))
        worst = max(worst, abs(lhs - conditional_mi(j)))
    report(7, "I(U;X) - I(U;Z) = I(U;X|Z) under Z-X-U within 1e-10 (100 instances)", worst <= 1e-10,
           f"worst={worst:.1e}")
    elapsed = time.perf_counter() - t0
    report(7, "runtime < 1 min", elapsed < 60, f"{elapsed:.2f}s")
    report.verify()


# ---------------------------------------------------------------- 8


def test_c8_invariant_suites(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(8)

    def sweep(check):
        worst = 0.0
        for _ in range(N_RANDOM):
            worst = max(worst, check())
        return worst

    def push_compose():
        n, m, r = (int(v) for v in rng.integers(1, 7, 3))
        p, a, b = rand_pmf(rng, n), rand_channel(rng, n, m), rand_channel(rng, m, r)
        return float(np.abs(push_forward(p, compose(a, b)).probs
                            - push_forward(push_forward(p, a), b).probs).max())

    def marginals_valid():
        shape = tuple(int(v) for v in rng.integers(1, 5, int(rng.integers(2, 5))))
        j = JointPmf(rng.dirichlet(np.full(int(np.prod(shape)), 0.5)).reshape(shape))
        worst = 0.0
        for axis in range(len(shape)):
            m = marginal(j, [axis])
            worst = max(worst, abs(m.probs.sum() - 1), max(0.0, -m.probs.min()))
        return worst

    def associative():
        n, m, r, s = (int(v) for v in rng.integers(1, 6, 4))
        a, b, c = rand_channel(rng, n, m), rand_channel(rng, m, r), rand_channel(rng, r, s)
        return float(np.abs(compose(compose(a, b), c).matrix - compose(a, compose(b, c)).matrix).max())

    def iid_mass():
        k = int(rng.integers(1, 5))
        n = int(rng.integers(1, int(math.log(2**20) / math.log(max(k, 2))) + 1))
        return abs(iid_extension(rand_pmf(rng, k), n).probs.sum() - 1)

    for clause, fn, tol in [
        ("push_forward commutes with compose within 1e-12", push_compose, 1e-12),
        ("marginals of random joints are valid within 1e-12", marginals_valid, 1e-12),
        ("compose is associative within 1e-12", associative, 1e-12),
        ("iid_extension mass is 1 within 1e-10", iid_mass, 1e-10),
    ]:
        worst = sweep(fn)
        report(8, f"prob: {clause} ({N_RANDOM} instances)", worst <= tol, f"worst={worst:.1e}")

    def mi_sym_bounded():
        n, m = (int(v) for v in rng.integers(1, 7, 2))
        j = rng.dirichlet(np.full(n * m, 0.5)).reshape(n, m)
        i = mutual_information(j)
        over = max(0.0, -i, i - min(entropy(j.sum(1)), entropy(j.sum(0))) - 1e-12)
        return max(abs(i - mutual_information(j.T)) - 1e-12, over * 1e12, 0.0)

    def dpi():
        n, m, r = (int(v) for v in rng.integers(1, 7, 3))
        p, c1, c2 = rand_pmf(rng, n), rand_channel(rng, n, m), rand_channel(rng, m, r)
        excess = mutual_information(joint_from(p, compose(c1, c2))) - mutual_information(joint_from(p, c1))
        return max(excess - 1e-10, 0.0)

    def tv_metric():
        n = int(rng.integers(1, 8))
        p, q, r = (rand_pmf(rng, n) for _ in range(3))
        return max(abs(tv_distance(p, q) - tv_distance(q, p)), tv_distance(p, p),
                   max(0.0, tv_distance(p, r) - tv_distance(p, q) - tv_distance(q, r) - 1e-12))

    for clause, fn in [
        ("I(A;B) symmetric and bounded by min entropy", mi_sym_bounded),
        ("data processing I(X;Y) <= I(X;U) + 1e-10", dpi),
        ("tv_distance symmetric, zero on equal laws, triangle inequality", tv_metric),
    ]:
        worst = sweep(fn)
        report(8, f"info: {clause} ({N_RANDOM} instances)", worst <= 1e-12, f"worst={worst:.1e}")

    grid = np.linspace(0, 0.5, 101)
    viol = sum(binary_entropy(star(a, b)) < binary_entropy(a) - 1e-12 for a in grid for b in grid)
    report(8, f"info: H_b(a*b) >= H_b(a) on a {grid.size}x{grid.size} grid", viol == 0, f"violations={viol}")

    ps = np.concatenate([[0.0, 0.5], rng.uniform(0, 0.5, N_RANDOM)])
    worst = max(abs(inverse_binary_entropy(binary_entropy(p)) - p) for p in ps)
    report(8, f"info: inverse_binary_entropy round trip within 1e-9 ({ps.size} points)", worst <= 1e-9,
           f"worst={worst:.1e}")
    elapsed = time.perf_counter() - t0
    report(8, "runtime < 2 min", elapsed < 120, f"{elapsed:.1f}s")
    report.verify()
