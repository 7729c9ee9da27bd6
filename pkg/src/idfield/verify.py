"""Monte Carlo and analytic checks of the structural properties of spectral fields.

Every check returns an :class:`ExperimentReport`: a list of statistics, each
with an estimate, a standard error, the threshold it is judged against and a
verdict. The functions are named ``test_*`` after what they check; they are
not pytest tests (``__test__ = False``).
"""

from __future__ import annotations

import enum
import functools
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import expit

from .field import (
    FieldSpec,
    KernelFamily,
    SignClass,
    _as_points,
    integrability_check,
    joint_cf,
    kernel_matrix,
    sample_field,
    scale_spec,
    supports_disjoint,
)

ANALYTIC_TOL = 1e-9
ID_TOL = 1e-12


class Verdict(str, enum.Enum):
    PASS = "pass"
    FAIL = "fail"
    INCONCLUSIVE = "inconclusive"


@dataclass
class Statistic:
    name: str
    estimate: float
    std_error: float
    threshold: float
    verdict: Verdict
    n_samples: int
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        self.verdict = Verdict(self.verdict)


@dataclass
class ExperimentReport:
    name: str
    parameters: dict
    statistics: list[Statistic]
    seed: int
    runtime: float = 0.0
    verdict: Verdict | None = None

    def __post_init__(self):
        if self.verdict is None:
            self.verdict = combine([s.verdict for s in self.statistics])
        self.verdict = Verdict(self.verdict)

    @property
    def passed(self) -> bool:
        return self.verdict is Verdict.PASS

    def statistic(self, name: str) -> Statistic:
        for s in self.statistics:
            if s.name == name:
                return s
        raise KeyError(name)

    def to_dict(self, include_runtime: bool = True) -> dict:
        d = asdict(self)
        d["verdict"] = self.verdict.value
        for s in d["statistics"]:
            s["verdict"] = Verdict(s["verdict"]).value
        if not include_runtime:
            d.pop("runtime")
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentReport":
        stats = [Statistic(**s) for s in d["statistics"]]
        return cls(
            name=d["name"],
            parameters=d["parameters"],
            statistics=stats,
            seed=d["seed"],
            runtime=d.get("runtime", 0.0),
            verdict=d.get("verdict"),
        )


def combine(verdicts: Sequence[Verdict]) -> Verdict:
    verdicts = [Verdict(v) for v in verdicts]
    if Verdict.FAIL in verdicts:
        return Verdict.FAIL
    if Verdict.INCONCLUSIVE in verdicts:
        return Verdict.INCONCLUSIVE
    return Verdict.PASS


def _judge(ok: bool) -> Verdict:
    return Verdict.PASS if ok else Verdict.FAIL


def derive_seed(seed: int, *keys: int) -> int:
    """Independent child seed for ``(seed, *keys)``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def cf_tolerance(n: int) -> float:
    """Acceptance band for an empirical CF (or a product of them) built from n draws."""
    return 6.0 / math.sqrt(n)


def empirical_cf(samples, theta) -> complex | np.ndarray:
    """``mean(exp(i theta . X_k))``; ``theta`` of shape ``(r,)`` or ``(k, r)``."""
    x = np.asarray(samples, dtype=float)
    if x.size == 0:
        raise ValueError("samples must be nonempty")
    if x.ndim == 1:
        x = x[:, None]
    th = np.asarray(theta, dtype=float)
    single = th.ndim <= 1
    th = np.atleast_2d(th.reshape(1, -1) if single else th)
    if th.shape[1] != x.shape[1]:
        raise ValueError(f"theta has {th.shape[1]} entries for samples of dimension {x.shape[1]}")
    vals = np.exp(1j * (x @ th.T)).mean(axis=0)
    return complex(vals[0]) if single else vals


def _default_grid(dim: int, seed: int, k: int = 8) -> np.ndarray:
    rng = np.random.default_rng(derive_seed(seed, 977))
    return rng.uniform(-2.0, 2.0, size=(k, dim))


def _timed(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        start = time.perf_counter()
        report = fn(*args, **kwargs)
        report.runtime = time.perf_counter() - start
        return report

    wrapper.__test__ = False
    return wrapper


# ---------------------------------------------------------------------------
# monotone test functions


class MonotoneKind(str, enum.Enum):
    THRESHOLD = "threshold"
    SMOOTH_CLAMP = "smooth_clamp"


@dataclass(frozen=True)
class MonotoneTestFunction:
    """Bounded, coordinate-wise nondecreasing map ``R^dim -> [0, dim]``."""

    kind: MonotoneKind
    levels: tuple[float, ...]
    slope: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", MonotoneKind(self.kind))
        object.__setattr__(self, "levels", tuple(float(c) for c in np.atleast_1d(self.levels)))
        if not self.slope > 0:
            raise ValueError("slope must be positive")

    @property
    def dim(self) -> int:
        return len(self.levels)

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        single = y.ndim == 1
        y = np.atleast_2d(y)
        c = np.asarray(self.levels)
        if self.kind is MonotoneKind.THRESHOLD:
            out = (y > c).sum(axis=1).astype(float)
        else:
            out = expit(self.slope * (y - c)).sum(axis=1)
        return float(out[0]) if single else out


def make_monotone_function(
    dim: int,
    seed: int,
    pilot: np.ndarray | None = None,
    kind: MonotoneKind | str | None = None,
) -> MonotoneTestFunction:
    """Random member of the threshold / smooth-clamp families.

    Levels are drawn from the central range (20%-80% quantiles) of ``pilot``
    draws when given, from a standard normal otherwise.
    """
    if dim < 1:
        raise ValueError("dim must be >= 1")
    rng = np.random.default_rng(seed)
    kinds = list(MonotoneKind)
    kind = MonotoneKind(kind) if kind is not None else kinds[int(rng.integers(len(kinds)))]
    if pilot is not None:
        pilot = np.asarray(pilot, dtype=float).reshape(len(pilot), -1)
        q = rng.uniform(0.2, 0.8, size=dim)
        levels = np.array([np.quantile(pilot[:, j], q[j]) for j in range(dim)])
        spread = float(np.mean(np.quantile(pilot, 0.75, axis=0) - np.quantile(pilot, 0.25, axis=0)))
    else:
        levels = rng.standard_normal(dim)
        spread = 1.0
    slope = rng.uniform(1.0, 5.0) / max(spread, 1e-6)
    return MonotoneTestFunction(kind, tuple(levels), slope)


def _cov_with_se(fx: np.ndarray, gx: np.ndarray) -> tuple[float, float]:
    prod = (fx - fx.mean()) * (gx - gx.mean())
    n = prod.size
    cov = float(prod.sum() / (n - 1))
    se = float(prod.std(ddof=1) / math.sqrt(n)) if n > 1 else math.inf
    return cov, se


# ---------------------------------------------------------------------------
# independence


def _index_sets(ts, K, L):
    K, L = list(K), list(L)
    if not K or not L:
        raise ValueError("both index sets must be nonempty")
    if set(K) & set(L):
        raise ValueError("index sets must be disjoint")
    n = len(ts)
    if any(not 0 <= i < n for i in K + L):
        raise ValueError("index out of range")
    return K, L


@_timed
def test_independence(
    spec: FieldSpec,
    ts,
    K: Sequence[int],
    L: Sequence[int],
    N: int,
    theta_grid=None,
    *,
    level: int = 1,
    eps: float = 1e-3,
    seed: int = 0,
    tol: float | None = None,
) -> ExperimentReport:
    """Disjoint supports of the kernels indexed by K and L imply independence.

    Checks (a) the support hypothesis on the partition, (b) the analytic
    factorisation gap ``max |phi_T - phi_K phi_L|`` over the theta grid and
    (c) the same gap for empirical CFs of ``N`` joint draws.
    """
    ts = _as_points(ts)
    K, L = _index_sets(ts, K, L)
    T = K + L
    sub = [ts[i] for i in T]
    nk = len(K)
    grid = _default_grid(len(T), seed) if theta_grid is None else np.atleast_2d(theta_grid)
    tol = cf_tolerance(N) if tol is None else tol

    disjoint = supports_disjoint(spec, [ts[i] for i in K], [ts[i] for i in L], level)
    gaps = []
    for th in grid:
        phi_t = joint_cf(spec, sub, th, level)
        phi_k = joint_cf(spec, sub[:nk], th[:nk], level)
        phi_l = joint_cf(spec, sub[nk:], th[nk:], level)
        gaps.append(abs(phi_t - phi_k * phi_l))
    analytic = float(max(gaps))

    x = sample_field(spec, sub, level, eps, seed, N)
    e_t = empirical_cf(x, grid)
    e_k = empirical_cf(x[:, :nk], grid[:, :nk])
    e_l = empirical_cf(x[:, nk:], grid[:, nk:])
    empirical = float(np.max(np.abs(e_t - e_k * e_l)))

    stats = [
        Statistic("support_disjoint", float(disjoint), 0.0, 1.0, _judge(disjoint), 0),
        Statistic(
            "analytic_gap", analytic, 0.0, ANALYTIC_TOL, _judge(analytic <= ANALYTIC_TOL), 0,
            {"per_theta": [float(g) for g in gaps]},
        ),
        Statistic("empirical_gap", empirical, 1 / math.sqrt(N), tol, _judge(empirical <= tol), N),
    ]
    params = {"K": K, "L": L, "N": N, "level": level, "eps": eps, "theta_grid": grid.tolist()}
    return ExperimentReport("independence", params, stats, seed)


# ---------------------------------------------------------------------------
# association


def _pilot_and_draws(spec, sub, N, level, eps, seed, n_pilot=500):
    pilot = sample_field(spec, sub, level, eps, derive_seed(seed, 1), n_pilot)
    x = sample_field(spec, sub, level, eps, derive_seed(seed, 2), N)
    return pilot, x


@_timed
def test_association(
    spec: FieldSpec,
    ts,
    I: Sequence[int],
    n_pairs: int,
    N: int,
    seed: int = 0,
    *,
    level: int = 1,
    eps: float = 1e-3,
) -> ExperimentReport:
    """Covariances of random monotone pairs ``(f(X_I), g(X_I))`` must not be negative.

    A pair fails when its estimate is below ``-3 SE``. For kernels without a
    declared sign the outcome is exploratory: violations make the report
    inconclusive rather than failed.
    """
    ts = _as_points(ts)
    I = list(I)
    if not I:
        raise ValueError("index set must be nonempty")
    sub = [ts[i] for i in I]
    pilot, x = _pilot_and_draws(spec, sub, N, level, eps, seed)
    stats = []
    for k in range(n_pairs):
        f = make_monotone_function(len(I), derive_seed(seed, 10, k, 0), pilot)
        g = make_monotone_function(len(I), derive_seed(seed, 10, k, 1), pilot)
        cov, se = _cov_with_se(f(x), g(x))
        stats.append(
            Statistic(
                f"cov_{k}", cov, se, -3 * se, _judge(cov >= -3 * se), N,
                {"f": _describe(f), "g": _describe(g)},
            )
        )
    verdict = combine([s.verdict for s in stats])
    if spec.kernels.sign_class is SignClass.MIXED and verdict is Verdict.FAIL:
        verdict = Verdict.INCONCLUSIVE
    params = {"I": I, "n_pairs": n_pairs, "N": N, "level": level, "eps": eps,
              "sign_class": spec.kernels.sign_class.value}
    return ExperimentReport("association", params, stats, seed, verdict=verdict)


@_timed
def test_negative_association(
    spec: FieldSpec,
    ts,
    I: Sequence[int],
    J: Sequence[int],
    n_pairs: int,
    N: int,
    seed: int = 0,
    *,
    level: int = 1,
    eps: float = 1e-3,
) -> ExperimentReport:
    """Covariances of ``(f(X_I), g(X_J))`` over disjoint I, J must not be positive (``<= 3 SE``)."""
    ts = _as_points(ts)
    I, J = _index_sets(ts, I, J)
    sub = [ts[i] for i in I + J]
    ni = len(I)
    pilot, x = _pilot_and_draws(spec, sub, N, level, eps, seed)
    stats = []
    for k in range(n_pairs):
        f = make_monotone_function(ni, derive_seed(seed, 20, k, 0), pilot[:, :ni])
        g = make_monotone_function(len(J), derive_seed(seed, 20, k, 1), pilot[:, ni:])
        cov, se = _cov_with_se(f(x[:, :ni]), g(x[:, ni:]))
        stats.append(Statistic(f"cov_{k}", cov, se, 3 * se, _judge(cov <= 3 * se), N,
                               {"f": _describe(f), "g": _describe(g)}))
    params = {"I": I, "J": J, "n_pairs": n_pairs, "N": N, "level": level, "eps": eps}
    return ExperimentReport("negative_association", params, stats, seed)


def _describe(fn: MonotoneTestFunction) -> dict:
    return {"kind": fn.kind.value, "levels": list(fn.levels), "slope": fn.slope}


# ---------------------------------------------------------------------------
# infinite divisibility


@_timed
def test_id(
    spec: FieldSpec,
    ts,
    n_fold: int,
    N: int,
    theta_grid=None,
    *,
    level: int = 1,
    eps: float = 1e-3,
    seed: int = 0,
    tol: float | None = None,
) -> ExperimentReport:
    """n-fold divisibility of the finite-dimensional laws.

    Analytic: ``joint_cf(scale_spec(spec, 1/n))^n == joint_cf(spec)``.
    Empirical: the sum of ``n`` independent draws of the scaled field has the
    CF of the original field.
    """
    if n_fold < 2:
        raise ValueError("n_fold must be >= 2")
    ts = _as_points(ts)
    grid = _default_grid(len(ts), seed) if theta_grid is None else np.atleast_2d(theta_grid)
    tol = cf_tolerance(N) if tol is None else tol
    part = scale_spec(spec, 1.0 / n_fold)
    target = np.array([joint_cf(spec, ts, th, level) for th in grid])
    powered = np.array([joint_cf(part, ts, th, level) ** n_fold for th in grid])
    analytic = float(np.max(np.abs(powered - target)))

    total = sum(sample_field(part, ts, level, eps, derive_seed(seed, 30, k), N) for k in range(n_fold))
    emp = empirical_cf(total, grid)
    gaps = np.abs(emp - target)
    empirical = float(gaps.max())
    stats = [
        Statistic("analytic_gap", analytic, 0.0, ID_TOL, _judge(analytic <= ID_TOL), 0),
        Statistic("empirical_gap", empirical, 1 / math.sqrt(N), tol, _judge(empirical <= tol), N,
                  {"per_theta": gaps.tolist()}),
    ]
    params = {"n_fold": n_fold, "N": N, "level": level, "eps": eps, "theta_grid": grid.tolist()}
    return ExperimentReport("id", params, stats, seed)


# ---------------------------------------------------------------------------
# characteristic function agreement


@_timed
def test_cf(
    spec: FieldSpec,
    ts,
    theta_grid,
    N: int,
    *,
    level: int = 1,
    eps: float = 1e-3,
    seed: int = 0,
    tol: float | None = None,
) -> ExperimentReport:
    """Empirical CF of ``N`` joint draws against the analytic joint CF, one statistic per theta."""
    ts = _as_points(ts)
    grid = np.asarray(theta_grid, dtype=float).reshape(-1, len(ts))
    tol = cf_tolerance(N) if tol is None else tol
    x = sample_field(spec, ts, level, eps, seed, N)
    emp = empirical_cf(x, grid)
    stats = []
    for k, th in enumerate(grid):
        exact = joint_cf(spec, ts, th, level)
        gap = abs(emp[k] - exact)
        stats.append(
            Statistic(
                f"theta_{k}", float(gap), 1 / math.sqrt(N), tol, _judge(gap <= tol), N,
                {"theta": th.tolist(), "analytic": [exact.real, exact.imag],
                 "empirical": [float(emp[k].real), float(emp[k].imag)]},
            )
        )
    params = {"N": N, "level": level, "eps": eps, "theta_grid": grid.tolist()}
    return ExperimentReport("cf_check", params, stats, seed)


# ---------------------------------------------------------------------------
# stochastic continuity


@_timed
def test_stoch_continuity(
    spec: FieldSpec,
    t,
    radii: Sequence[float],
    eps_x: float,
    N: int,
    *,
    envelope: Callable[[np.ndarray], np.ndarray] | None = None,
    direction=None,
    level: int = 1,
    eps: float = 1e-3,
    seed: int = 0,
) -> ExperimentReport:
    """Exceedance probabilities ``P(|X(s_k) - X(t)| > eps_x)`` along shrinking radii.

    ``X(s_k)`` and ``X(t)`` come from the same measure sample in every
    replicate. Passes when the probabilities are nonincreasing within 2 SE and
    the last one is at most 2 SE. With an ``envelope`` g the kernel gaps are
    also checked against g at the cell midpoints and g's integrability is
    reported.
    """
    radii = [float(r) for r in radii]
    if not radii or any(r <= 0 for r in radii) or any(b >= a for a, b in zip(radii, radii[1:])):
        raise ValueError("radii must be positive and strictly decreasing")
    t = np.atleast_1d(np.asarray(t, dtype=float))
    e = np.zeros_like(t)
    e[0] = 1.0
    if direction is not None:
        e = np.asarray(direction, dtype=float) / np.linalg.norm(direction)
    ss = [t + r * e for r in radii]
    coef = kernel_matrix(spec, [t] + ss, level)
    sup_gaps = np.max(np.abs(coef[1:] - coef[0]), axis=1)

    stats = []
    if envelope is not None:
        pts = spec.partition_at(level).points
        g = np.asarray(envelope(pts), dtype=float)
        dominated = bool(np.all(np.abs(coef[1:] - coef[0]) <= g + 1e-15))
        gspec = FieldSpec(KernelFamily(lambda _t, x: envelope(x)), spec.chars, spec.partition, spec.gamma)
        integ = integrability_check(gspec, t, level)
        stats.append(Statistic("envelope_dominates", float(dominated), 0.0, 1.0, _judge(dominated), 0))
        stats.append(Statistic("envelope_integrable", float(integ.passed), 0.0, 1.0,
                               Verdict.PASS if integ.passed else Verdict.INCONCLUSIVE, 0,
                               {"cond_i": integ.cond_i, "cond_ii": integ.cond_ii, "cond_iii": integ.cond_iii}))

    x = sample_field(spec, [t] + ss, level, eps, seed, N)
    diffs = np.abs(x[:, 1:] - x[:, [0]])
    p = (diffs > eps_x).mean(axis=0)
    se = np.sqrt(p * (1 - p) / N)
    prev_p = prev_se = None
    for k, r in enumerate(radii):
        last = k == len(radii) - 1
        ok = True
        if prev_p is not None:
            ok = p[k] <= prev_p + 2 * max(se[k], prev_se)
        thr = prev_p + 2 * max(se[k], prev_se) if prev_p is not None else 1.0
        if last:
            ok = ok and p[k] <= 2 * se[k]
            thr = min(thr, 2 * se[k])
        stats.append(Statistic(f"p_{k}", float(p[k]), float(se[k]), float(thr), _judge(ok), N,
                               {"radius": r, "sup_kernel_gap": float(sup_gaps[k])}))
        prev_p, prev_se = p[k], se[k]
    params = {"t": t.tolist(), "radii": radii, "eps_x": eps_x, "N": N, "level": level, "eps": eps}
    return ExperimentReport("continuity", params, stats, seed)
