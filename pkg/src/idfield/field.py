"""Random fields X(t) = int_E f_t dLambda over a discretised ID random measure."""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable, Mapping, Sequence

import numpy as np

from .levy import (
    LevyDivergenceError,
    LevyMeasure,
    OVERFLOW_GUARD,
    QuadratureError,
    levy_exponent,
    levy_quadrature,
    tau,
)
from .measure import DomainPartition, LocalCharacteristics, sample_measure

log = logging.getLogger(__name__)


class SignClass(str, enum.Enum):
    NONNEGATIVE = "nonnegative"
    NONPOSITIVE = "nonpositive"
    MIXED = "mixed"


@dataclass(frozen=True)
class KernelFamily:
    """Deterministic integrands ``f_t(x)``.

    ``func(t, x)`` receives ``t`` of shape ``(d,)`` and points ``x`` of shape
    ``(n, m)`` and returns ``n`` values.
    """

    func: Callable[[np.ndarray, np.ndarray], np.ndarray]
    sign_class: SignClass = SignClass.MIXED
    support_hint: Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]] | None = None

    def __post_init__(self):
        object.__setattr__(self, "sign_class", SignClass(self.sign_class))

    def __call__(self, t, x) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        vals = np.asarray(self.func(t, np.atleast_2d(x)), dtype=float)
        vals = np.broadcast_to(vals, (np.atleast_2d(x).shape[0],)).copy()
        return vals[0] if single else vals

    def values(self, ts, points) -> np.ndarray:
        """Kernel matrix of shape ``(len(ts), n_points)``."""
        return np.stack([self(t, points) for t in _as_points(ts)])

    def check_sign(self, ts, lower, upper, n: int = 1000, seed: int = 0) -> None:
        """Spot-check the declared sign class at ``n`` random points of the box."""
        if self.sign_class is SignClass.MIXED:
            return
        rng = np.random.default_rng(seed)
        lower, upper = np.asarray(lower, float), np.asarray(upper, float)
        pts = lower + (upper - lower) * rng.random((n, lower.size))
        vals = self.values(ts, pts)
        bad = vals < 0 if self.sign_class is SignClass.NONNEGATIVE else vals > 0
        if np.any(bad):
            raise ValueError(f"kernel declared {self.sign_class.value} takes values of the wrong sign")


def _as_points(ts) -> list[np.ndarray]:
    return [np.atleast_1d(np.asarray(t, dtype=float)) for t in ts]


@dataclass
class FieldSpec:
    kernels: KernelFamily
    chars: LocalCharacteristics
    partition: DomainPartition
    gamma: float = 1.0
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        if not (self.gamma > 0 and math.isfinite(self.gamma)):
            raise ValueError(f"gamma must be positive, got {self.gamma}")

    def partition_at(self, level: int | None = None) -> DomainPartition:
        """The spec partition (``level=None``) or its ``level - 1`` fold dyadic refinement."""
        if level is None:
            return self.partition
        if level < 1:
            raise ValueError(f"refinement level must be >= 1, got {level}")
        key = ("partition", level)
        if key not in self._cache:
            self._cache[key] = self.partition.refine(level - 1)
        return self._cache[key]

    def cell_chars(self, level: int | None = None):
        key = ("chars", level)
        if key not in self._cache:
            self._cache[key] = self.chars.evaluate(self.partition_at(level))
        return self._cache[key]


@dataclass(frozen=True)
class SimpleFunction:
    """``sum_j x_j 1_{B_j}`` over distinct cells ``B_j``."""

    coefficients: np.ndarray
    cell_ids: np.ndarray

    def __post_init__(self):
        coef = np.asarray(self.coefficients, dtype=float).reshape(-1)
        ids = np.asarray(self.cell_ids, dtype=np.int64).reshape(-1)
        if coef.size != ids.size:
            raise ValueError("one coefficient per cell id is required")
        if np.unique(ids).size != ids.size:
            raise ValueError("cell ids of a simple function must be distinct")
        object.__setattr__(self, "coefficients", coef)
        object.__setattr__(self, "cell_ids", ids)

    @property
    def pieces(self) -> list[tuple[float, int]]:
        return [(float(c), int(i)) for c, i in zip(self.coefficients, self.cell_ids)]

    @classmethod
    def from_pieces(cls, pieces: Sequence[tuple[float, int]]) -> "SimpleFunction":
        pieces = list(pieces)
        return cls([p[0] for p in pieces], [p[1] for p in pieces])


def simple_approx(spec: FieldSpec, t, n: int) -> SimpleFunction:
    """Level-``n`` simple approximation of ``f_t``.

    Lives on the ``n - 1`` fold refinement of the spec partition; cells where
    ``|f_t(x_mid)| > n`` get coefficient zero. Declared single-signed kernels
    keep single-signed coefficients.
    """
    if n < 1:
        raise ValueError(f"level must be >= 1, got {n}")
    part = spec.partition_at(n)
    vals = spec.kernels(t, part.points)
    clipped = np.abs(vals) > n
    if np.any(clipped):
        log.warning("level %d drops %d cell(s) where |f_t| > %d; raise the level to keep them",
                    n, int(clipped.sum()), n)
    coef = np.where(clipped, 0.0, vals)
    if spec.kernels.sign_class is SignClass.NONNEGATIVE:
        coef = np.maximum(coef, 0.0)
    elif spec.kernels.sign_class is SignClass.NONPOSITIVE:
        coef = np.minimum(coef, 0.0)
    return SimpleFunction(coef, part.ids)


def integrate_simple(sf: SimpleFunction, measure_sample) -> float | np.ndarray:
    """``sum_j x_j Lambda(B_j)``.

    ``measure_sample`` is a mapping from cell id to value, a sequence indexed by
    cell id, or an array of shape ``(N, n_cells)`` of replicates.
    """
    if len(sf.cell_ids) == 0:
        return 0.0
    if isinstance(measure_sample, Mapping):
        missing = [int(i) for i in sf.cell_ids if int(i) not in measure_sample]
        if missing:
            raise KeyError(f"unknown cell ids {missing[:5]}")
        vals = np.array([measure_sample[int(i)] for i in sf.cell_ids], dtype=float)
        return float(np.dot(vals, sf.coefficients))
    arr = np.asarray(measure_sample, dtype=float)
    n_cells = arr.shape[-1]
    if np.any(sf.cell_ids < 0) or np.any(sf.cell_ids >= n_cells):
        raise KeyError("simple function refers to unknown cell ids")
    if arr.ndim == 1:
        return float(np.dot(arr[sf.cell_ids], sf.coefficients))
    return arr[:, sf.cell_ids] @ sf.coefficients


def kernel_matrix(spec: FieldSpec, ts, level: int | None = None) -> np.ndarray:
    """Per-cell kernel values, shape ``(len(ts), n_cells)``.

    With a level, these are the simple-function coefficients at that level;
    without, the raw midpoint values on the spec partition.
    """
    if level is None:
        return spec.kernels.values(ts, spec.partition.points)
    return np.stack([simple_approx(spec, t, level).coefficients for t in _as_points(ts)])


def sample_field(spec: FieldSpec, ts, level: int, eps: float, seed: int, size: int | None = None):
    """Joint draw(s) of ``(X_n(t_1), ..., X_n(t_r))`` from one shared measure sample.

    Returns shape ``(r,)`` or ``(size, r)``.
    """
    ts = _as_points(ts)
    if not ts:
        raise ValueError("at least one evaluation point is required")
    part = spec.partition_at(level)
    coef = kernel_matrix(spec, ts, level)
    lam = sample_measure(part.scaled(spec.gamma), spec.chars, eps, seed, size)
    lam2 = np.atleast_2d(lam)
    # one dot product per t keeps identical kernels bitwise identical
    out = np.column_stack([lam2 @ row for row in coef])
    return out[0] if size is None else out


def cumulant_kernel(u: float, x, chars: LocalCharacteristics) -> complex:
    """Pointwise log-CF ``i u a(x) - u^2 sigma^2(x) / 2 + jump exponent of rho(x)``."""
    a, s2, rho = chars.at(x)
    return _cumulant(float(u), a, s2, rho)


def _cumulant(u, a, s2, rho):
    if u == 0.0:
        return 0j
    return complex(1j * u * a - 0.5 * u * u * s2) + levy_exponent(rho, u)


def _log_joint_cf(spec: FieldSpec, ts, theta, level=None) -> complex:
    ts = _as_points(ts)
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    if theta.size != len(ts):
        raise ValueError(f"theta has {theta.size} entries for {len(ts)} evaluation points")
    part = spec.partition_at(level)
    a, s2, rhos = spec.cell_chars(level)
    u = theta @ kernel_matrix(spec, ts, level)
    eta = spec.gamma * part.masses
    total = complex(np.sum((1j * u * a - 0.5 * u * u * s2) * eta))
    for j in np.flatnonzero((u != 0.0) & (eta > 0.0)):
        if not rhos[j].is_null:
            total += levy_exponent(rhos[j], float(u[j])) * eta[j]
    return total


def joint_cf(spec: FieldSpec, ts, theta, level: int | None = None) -> complex:
    """Characteristic function of ``(X(t_1), ..., X(t_r))`` at ``theta``.

    ``exp(gamma * sum_cells K(sum_j theta_j f_{t_j}(x), x) eta(cell))``, midpoint
    rule; with ``level`` the kernels are replaced by their level-n simple
    approximations so the value is the exact CF of :func:`sample_field`'s law.
    """
    return complex(np.exp(_log_joint_cf(spec, ts, theta, level)))


def cf_integral(spec: FieldSpec, t, u: float, level: int | None = None) -> complex:
    return joint_cf(spec, [t], [u], level)


def scale_spec(spec: FieldSpec, gamma: float) -> FieldSpec:
    """Same field with the control measure multiplied by ``gamma``."""
    if not gamma > 0:
        raise ValueError(f"scale must be positive, got {gamma}")
    return replace(spec, gamma=spec.gamma * gamma)


def supports(spec: FieldSpec, ts, level: int | None = None) -> np.ndarray:
    """Boolean ``(len(ts), n_cells)`` matrix of cells where ``|f_t(x_mid)| > 0``."""
    return kernel_matrix(spec, ts, level) != 0.0


def supports_disjoint(spec: FieldSpec, ts_k, ts_l, level: int | None = None) -> bool:
    sk = supports(spec, ts_k, level).any(axis=0)
    sl = supports(spec, ts_l, level).any(axis=0)
    return not np.any(sk & sl)


# ---------------------------------------------------------------------------
# integrability


@dataclass
class IntegrabilityReport:
    cond_i: float
    cond_ii: float
    cond_iii: float
    cond_iii_core: float
    cond_iii_tail: float
    bound_u: float
    bound_v0: float

    @staticmethod
    def _finite(v):
        return math.isfinite(v) and abs(v) <= OVERFLOW_GUARD

    @property
    def pass_i(self) -> bool:
        return self._finite(self.cond_i)

    @property
    def pass_ii(self) -> bool:
        return self._finite(self.cond_ii)

    @property
    def pass_iii(self) -> bool:
        return self._finite(self.cond_iii)

    @property
    def passed(self) -> bool:
        return self.pass_i and self.pass_ii and self.pass_iii


def _safe_quad(nu, h):
    try:
        return levy_quadrature(nu, h)
    except (LevyDivergenceError, QuadratureError):
        return math.inf


@lru_cache(maxsize=4096)
def _abs_moments(nu: LevyMeasure) -> tuple[float, float]:
    core = _safe_quad(nu, lambda s: abs(s) if abs(s) <= 1.0 else 0.0)
    tail = _safe_quad(nu, lambda s: abs(s) if abs(s) > 1.0 else 0.0)
    return core, tail


def _u_term(u, nu):
    return _safe_quad(nu, lambda s: tau(s * u) - u * tau(s))


def _v0_term(u, nu):
    return _safe_quad(nu, lambda s: min(1.0, (s * u) ** 2))


def integrability_check(spec: FieldSpec, t, level: int | None = None) -> IntegrabilityReport:
    """Evaluate the three sufficient integrability integrals for ``f_t``.

    Also reports the split of the jump integral into ``|s| <= 1`` and
    ``|s| > 1`` parts and the bounds ``int |U(f(x), x)|`` and
    ``int |V0(f(x), x)|``. Divergences are reported as ``inf``.
    """
    part = spec.partition_at(level)
    a, s2, rhos = spec.cell_chars(level)
    f = kernel_matrix(spec, [t], level)[0]
    eta = spec.gamma * part.masses
    cond_i = float(np.sum(np.abs(f * a) * eta))
    cond_ii = float(np.sum(f * f * s2 * eta))
    core = tail = bound_u = bound_v0 = 0.0
    u_abs = np.abs(f * a) * eta
    for j in np.flatnonzero((f != 0.0) & (eta > 0.0)):
        nu = rhos[j]
        bound_u_j = u_abs[j]
        if not nu.is_null:
            c, tl = _abs_moments(nu)
            w = abs(f[j]) * eta[j]
            core += w * c
            tail += w * tl
            bound_u_j = abs(f[j] * a[j] + _u_term(float(f[j]), nu)) * eta[j]
            bound_v0 += abs(_v0_term(float(f[j]), nu)) * eta[j]
        bound_u += bound_u_j
    return IntegrabilityReport(
        cond_i=cond_i,
        cond_ii=cond_ii,
        cond_iii=core + tail,
        cond_iii_core=core,
        cond_iii_tail=tail,
        bound_u=float(bound_u),
        bound_v0=float(bound_v0),
    )
