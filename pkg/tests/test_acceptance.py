"""Acceptance suite: one test per criterion, each recording a single pass/fail line."""

import math
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
from scipy.stats import norm

from conftest import record
from idfield import verify
from idfield.field import FieldSpec, KernelFamily, cf_integral, joint_cf, sample_field, scale_spec
from idfield.levy import LevyTriplet, PointMasses, StablePair, Tempered, cf_id, tau
from idfield.measure import DomainPartition, LocalCharacteristics, cell_triplet
from idfield.stable import (
    Association,
    StableSpec,
    as_field_spec,
    association_classify,
    null_check,
    sign_masses,
    spectral_measure,
    stable_cf,
)
from idfield.verify import empirical_cf, make_monotone_function

TESTS = Path(__file__).resolve().parent


def unit_box(x):
    return ((x[:, 0] >= 0.0) & (x[:, 0] < 1.0)).astype(float)


def random_chars(rng):
    """Mixed Gaussian / Poisson-type / tempered local characteristics."""
    family = rng.integers(3)
    if family == 0:
        rho = PointMasses(tuple((float(z), float(w)) for z, w in zip(rng.choice([-1, 1], 2) * rng.uniform(0.2, 2, 2), rng.uniform(0.1, 2, 2))))
    elif family == 1:
        rho = Tempered(float(rng.uniform(0.2, 1.8)), float(rng.uniform(0, 1)), float(rng.uniform(0, 1)), float(rng.uniform(0.5, 3)))
    else:
        rho = StablePair(float(rng.uniform(0.2, 1.8)), float(rng.uniform(0, 1)), float(rng.uniform(0, 1)))
    a0, a1 = rng.normal(size=2)
    s2 = float(rng.uniform(0, 1))
    return LocalCharacteristics(a=lambda x: a0 + a1 * x[0], sigma2=lambda x: s2 * (1 + x[0] ** 2), rho=rho)


def bump_kernels(widths, sign=1.0):
    def f(t, x):
        j = int(t[1])
        return sign * np.exp(-0.5 * np.sum((x - t[0]) ** 2, axis=1) / widths[j] ** 2)

    return KernelFamily(f, "nonnegative" if sign > 0 else "nonpositive")


# ---------------------------------------------------------------- 1


def test_criterion_1_gaussian_sanity():
    start = time.perf_counter()
    spec = FieldSpec(KernelFamily(lambda t, x: unit_box(x), "nonnegative"), LocalCharacteristics(sigma2=1.0),
                     DomainPartition.grid([0.0], [1.0], [8]))
    us = (0.5, 1.0, 2.0)
    analytic = max(abs(cf_integral(spec, [0.0], u) - math.exp(-u * u / 2)) for u in us)
    x = sample_field(spec, [[0.0]], 1, 1e-3, 1, 100_000)[:, 0]
    empirical = max(abs(empirical_cf(x, u) - math.exp(-u * u / 2)) for u in us)
    elapsed = time.perf_counter() - start
    ok = analytic <= 1e-10 and empirical <= 0.02 and elapsed < 10
    record(1, ok, f"analytic gap {analytic:.2e} (<=1e-10), empirical gap {empirical:.4f} (<=0.02), {elapsed:.1f}s (<10s)")
    assert ok


# ---------------------------------------------------------------- 2


def test_criterion_2_levy_khintchine_agreement():
    start = time.perf_counter()
    part = DomainPartition.grid([0.0], [1.0], [4])
    kern = KernelFamily(lambda t, x: 0.5 + x[:, 0], "nonnegative")
    specs = {
        "compound Poisson": FieldSpec(kern, LocalCharacteristics(a=0.3, rho=PointMasses(((1.0, 1.5), (-0.6, 0.8), (2.5, 0.2)))), part),
        "tempered stable": FieldSpec(kern, LocalCharacteristics(a=-0.1, rho=Tempered(0.7, 1.0, 0.6, 1.5)), part),
    }
    grid = (-2.0, -1.0, 0.5, 1.0, 2.0)
    gaps = {}
    for k, (name, spec) in enumerate(specs.items()):
        x = sample_field(spec, [[0.0]], 2, 1e-3, 100 + k, 100_000)[:, 0]
        gaps[name] = max(abs(empirical_cf(x, u) - cf_integral(spec, [0.0], u, level=2)) for u in grid)
    elapsed = time.perf_counter() - start
    ok = all(g <= 0.02 for g in gaps.values()) and elapsed < 60
    detail = ", ".join(f"{n} gap {g:.4f}" for n, g in gaps.items())
    record(2, ok, f"{detail} (<=0.02), {elapsed:.1f}s (<60s)")
    assert ok


# ---------------------------------------------------------------- 3


def random_field_spec(rng, sign=None):
    r = int(rng.integers(1, 4))
    widths = rng.uniform(0.15, 0.6, r)
    if sign is None:
        kern = KernelFamily(lambda t, x: np.sin(3 * x[:, 0] + t[0]) * np.exp(-((x[:, 0] - t[0]) ** 2) / widths[int(t[1])]))
    else:
        kern = bump_kernels(widths, sign)
    part = DomainPartition.grid([0.0], [1.0], [int(rng.integers(4, 12))], density=lambda x: 0.5 + x[:, 0])
    ts = [[float(rng.uniform(0, 1)), j] for j in range(r)]
    return FieldSpec(kern, random_chars(rng), part), ts


def test_criterion_3_infinite_divisibility():
    start = time.perf_counter()
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(10):
        spec, ts = random_field_spec(rng)
        for theta in rng.normal(scale=1.5, size=(3, len(ts))):
            target = joint_cf(spec, ts, theta)
            for n in (2, 3):
                worst = max(worst, abs(joint_cf(scale_spec(spec, 1 / n), ts, theta) ** n - target))
    poisson = FieldSpec(KernelFamily(lambda t, x: 1 + x[:, 0], "nonnegative"),
                        LocalCharacteristics(a=0.2, sigma2=0.3, rho=PointMasses(((1.0, 1.0), (-0.5, 0.7)))),
                        DomainPartition.grid([0.0], [1.0], [4]))
    rep = verify.test_id(poisson, [[0.0]], 3, 100_000, np.linspace(-2, 2, 5)[:, None], level=2, seed=3)
    empirical = rep.statistic("empirical_gap").estimate
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-12 and empirical <= 0.02 and elapsed < 60
    record(3, ok, f"max analytic gap {worst:.2e} over 10 specs (<=1e-12), empirical 3-fold gap {empirical:.4f} (<=0.02), {elapsed:.1f}s (<60s)")
    assert ok


# ---------------------------------------------------------------- 4


def test_criterion_4_independence():
    start = time.perf_counter()
    rng = np.random.default_rng(4)
    part = DomainPartition.grid([0.0], [10.0], [40])

    def box(t, x):
        return t[2] * ((x[:, 0] >= t[0]) & (x[:, 0] < t[1])).astype(float)

    worst, detected = 0.0, 0
    for _ in range(10):
        spec = FieldSpec(KernelFamily(box), random_chars(rng), part)
        ts = []
        for lo, hi in ((0.0, 4.5), (5.5, 10.0)):
            for _ in range(int(rng.integers(1, 3))):
                a, b = np.sort(rng.uniform(lo, hi, 2))
                ts.append([a, max(b, a + 0.3), float(rng.uniform(0.3, 2.0))])
        left = [i for i, t in enumerate(ts) if t[0] < 5]
        right = [i for i, t in enumerate(ts) if t[0] >= 5]
        rep = verify.test_independence(spec, ts, left, right, 5000, level=2, seed=int(rng.integers(1 << 30)))
        detected += rep.statistic("support_disjoint").estimate == 1.0
        worst = max(worst, rep.statistic("analytic_gap").estimate)
    overlap = FieldSpec(KernelFamily(lambda t, x: unit_box(x)), LocalCharacteristics(sigma2=1.0), DomainPartition.grid([0.0], [1.0], [4]))
    rep = verify.test_independence(overlap, [[0.0], [1.0]], [0], [1], 5000, [[1.0, 1.0]])
    dep_gap = rep.statistic("analytic_gap").estimate
    elapsed = time.perf_counter() - start
    ok = detected == 10 and worst <= 1e-9 and dep_gap > 0.05 and elapsed < 30
    record(4, ok, f"hypothesis detected {detected}/10, max analytic gap {worst:.2e} (<=1e-9), "
                  f"overlapping gap {dep_gap:.4f} (>0.05), {elapsed:.1f}s (<30s)")
    assert ok


# ---------------------------------------------------------------- 5


def test_criterion_5_association():
    start = time.perf_counter()
    rng = np.random.default_rng(5)
    below = {1.0: 0, -1.0: 0}
    pairs = {1.0: 0, -1.0: 0}
    for sign in (1.0, -1.0):
        for _ in range(20):
            spec, ts = random_field_spec(rng, sign)
            rep = verify.test_association(spec, ts, list(range(len(ts))), 50, 10_000, seed=int(rng.integers(1 << 30)))
            below[sign] += sum(s.estimate < -3 * s.std_error for s in rep.statistics)
            pairs[sign] += len(rep.statistics)
    elapsed = time.perf_counter() - start
    ok = below[1.0] == 0 and below[-1.0] == 0 and elapsed < 300
    record(5, ok, f"estimates below -3 SE: nonnegative {below[1.0]}/{pairs[1.0]}, "
                  f"nonpositive {below[-1.0]}/{pairs[-1.0]} (0 allowed), {elapsed:.1f}s (<300s)")
    assert ok


# ---------------------------------------------------------------- 6


def test_criterion_6_stochastic_continuity():
    start = time.perf_counter()
    # f_t(x) = x - t: X(s) - X(t) = (t - s) Lambda([0, 1]) ~ N(0, |s - t|^2)
    ramp = FieldSpec(KernelFamily(lambda t, x: x[:, 0] - t[0]), LocalCharacteristics(sigma2=1.0),
                     DomainPartition.grid([0.0], [1.0], [8]))
    radii, eps_x, n = [1.0, 0.3, 0.1, 0.03, 0.01, 1e-3], 0.1, 100_000
    rep = verify.test_stoch_continuity(ramp, [0.0], radii, eps_x, n, level=2, seed=0)
    z = []
    for r, s in zip(radii, rep.statistics):
        p = 2 * (1 - norm.cdf(eps_x / r))
        se = math.sqrt(p * (1 - p) / n)
        z.append(abs(s.estimate - p) / se if se > 0 else (0.0 if s.estimate == p else math.inf))
    within = all(v <= 2 for v in z)

    def jump(t, x):
        return (2.0 if t[0] == 0.0 else 1.0) * unit_box(x)

    jumpy = FieldSpec(KernelFamily(jump, "nonnegative"), LocalCharacteristics(sigma2=1.0), DomainPartition.grid([0.0], [1.0], [8]))
    bad = verify.test_stoch_continuity(jumpy, [0.0], [0.1, 0.01, 1e-3], eps_x, 10_000, level=3, seed=0)
    elapsed = time.perf_counter() - start
    ok = within and rep.passed and not bad.passed and elapsed < 60
    record(6, ok, f"max |p_k - closed form| = {max(z):.2f} SE (<=2), continuous verdict {rep.verdict.value}, "
                  f"discontinuous verdict {bad.verdict.value}, {elapsed:.1f}s (<60s)")
    assert ok


# ---------------------------------------------------------------- 7


def test_criterion_7_stable_spectral_measure():
    start = time.perf_counter()
    one = StableSpec(1.5, 1.0, DomainPartition.grid([0.0], [1.0], [1]), KernelFamily(lambda t, x: np.ones(len(x))))
    atoms = spectral_measure(one, [[0.0], [1.0]])
    loc_err = float(np.max(np.abs(atoms.points[0] - 1 / math.sqrt(2))))
    w_err = abs(atoms.weights[0] - 2**0.75)
    worked = len(atoms.weights) == 1 and loc_err <= 1e-12 and w_err <= 1e-12

    rng = np.random.default_rng(7)
    classified = 0
    for _ in range(10):
        n = int(rng.integers(2, 5))
        widths = rng.uniform(0.1, 0.5, n)
        beta = float(rng.uniform(-1, 1))
        part = DomainPartition.grid([0.0, 0.0], [1.0, 1.0], [5, 5], density=lambda x: 0.2 + x[:, 1])
        sspec = StableSpec(float(rng.uniform(0.2, 1.9)), beta, part, _planar(widths, rng))
        a = spectral_measure(sspec, [[j] for j in range(n)])
        classified += sign_masses(a)[0] == 0.0 and association_classify(a) in (Association.ASSOCIATED, Association.BOTH)

    single = StableSpec(1.3, lambda x: 0.8 * math.cos(3 * x[0]), DomainPartition.grid([0.0], [1.0], [6]),
                        KernelFamily(lambda t, x: 0.3 + x[:, 0], "nonnegative"))
    gamma = spectral_measure(single, [[0.0]])
    cf_gap = max(abs(stable_cf(gamma, 1.3, [u]) - cf_integral(as_field_spec(single), [0.0], u))
                 for u in (-2.0, -0.5, 0.5, 1.0, 2.0))
    elapsed = time.perf_counter() - start
    ok = worked and classified == 10 and cf_gap <= 0.01 and elapsed < 30
    record(7, ok, f"worked example errors {loc_err:.1e}/{w_err:.1e} (<=1e-12), associated {classified}/10, "
                  f"n=1 CF gap {cf_gap:.1e} (<=0.01), {elapsed:.1f}s (<30s)")
    assert ok


def _planar(widths, rng):
    centres = rng.uniform(0, 1, (len(widths), 2))

    def f(t, x):
        j = int(t[0])
        return np.exp(-0.5 * np.sum((x - centres[j]) ** 2, axis=1) / widths[j] ** 2)

    return KernelFamily(f, "nonnegative")


# ---------------------------------------------------------------- 8


def test_criterion_8_null_degeneracy():
    start = time.perf_counter()
    masses = np.where(np.arange(8) < 3, 0.0, 0.125)
    part = DomainPartition.grid([0.0], [1.0], [8]).with_masses(masses)
    f = lambda t, x: np.where(x[:, 0] < 3 / 8, 1.0 + x[:, 0], 0.0)
    sspec = StableSpec(1.5, 0.5, part, KernelFamily(f, "nonnegative"))
    res = null_check(sspec, lambda x: f(None, x))
    draws = sample_field(as_field_spec(sspec), [[0.0]], 2, 1e-2, 8, 10_000)
    nonzero = int(np.count_nonzero(draws))
    elapsed = time.perf_counter() - start
    ok = res.integral == 0.0 and res.degenerate and nonzero == 0 and elapsed < 5
    record(8, ok, f"integral {res.integral!r} (exactly 0), nonzero draws {nonzero}/10000, {elapsed:.2f}s (<5s)")
    assert ok


# ---------------------------------------------------------------- 9


def test_criterion_9_unit_invariants():
    rng = np.random.default_rng(9)
    z = rng.normal(scale=10, size=10_000)
    tau_ok = bool(np.all(np.abs(tau(z)) <= np.minimum(np.abs(z), 1.0)))

    trips = [
        LevyTriplet(0.4, 0.7, PointMasses(((1.5, 0.5), (-0.2, 2.0)))),
        LevyTriplet(-1.0, 0.0, StablePair(1.6, 0.3, 1.0)),
        LevyTriplet(0.0, 0.1, Tempered(0.5, 1.0, 1.0, 0.7)),
    ]
    cf_ok = True
    for trip in trips:
        cf_ok &= cf_id(trip, 0.0) == 1.0
        for t in rng.uniform(-8, 8, 10):
            phi = cf_id(trip, t)
            cf_ok &= abs(phi) <= 1 + 1e-12 and abs(cf_id(trip, -t) - np.conj(phi)) <= 1e-12

    chars = LocalCharacteristics(a=0.3, sigma2=0.5, rho=Tempered(1.2, 1.0, 0.4, 1.0))
    parent = DomainPartition.grid([0.0, 0.0], [1.0, 1.0], [1, 1])
    additive = max(
        abs(np.prod([cf_id(cell_triplet(c, chars), t) for c in parent.refine(2).cells]) - cf_id(cell_triplet(parent.cells[0], chars), t))
        for t in (0.5, 1.0, 3.0)
    )

    probes_ok = True
    for seed in range(20):
        fn = make_monotone_function(3, seed, rng.normal(size=(200, 3)))
        y = rng.normal(size=(1000, 3))
        bumped = y.copy()
        bumped[np.arange(1000), rng.integers(3, size=1000)] += rng.exponential(size=1000)
        probes_ok &= bool(np.all(fn(bumped) >= fn(y)))

    start = time.perf_counter()
    units = sorted(str(p) for p in TESTS.glob("test_*.py") if p.name != "test_acceptance.py")
    proc = subprocess.run([sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider", *units],
                          capture_output=True, text=True, cwd=TESTS.parent)
    elapsed = time.perf_counter() - start
    summary = proc.stdout.strip().splitlines()[-1] if proc.stdout.strip() else proc.stderr[-200:]
    ok = tau_ok and cf_ok and additive <= 1e-10 and probes_ok and proc.returncode == 0 and elapsed < 30
    record(9, ok, f"tau {tau_ok}, cf invariants {cf_ok}, subdivision gap {additive:.1e} (<=1e-10), "
                  f"monotone probes {probes_ok}, unit suite [{summary}] {elapsed:.1f}s (<30s)")
    assert ok
