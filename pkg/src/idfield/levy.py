"""One-dimensional infinitely divisible laws.

Truncation function, quadrature against Levy measures, the Levy-Khintchine
characteristic function and an approximate sampler (Gaussian part plus a
compensated compound Poisson stream of jumps larger than a cut-off).

Levy measures come in a few parametric families:

* :class:`NoJumps` -- the zero measure;
* :class:`PointMasses` -- finitely many atoms ``(z_k, w_k)``;
* :class:`StablePair` -- density ``c+ s^(-1-alpha)`` on ``s > 0`` and
  ``c- |s|^(-1-alpha)`` on ``s < 0``;
* :class:`Tempered` -- the stable density times ``exp(-theta |s|)``;
* :class:`LevySum` -- a finite sum of the above.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import mpmath
import numpy as np
from scipy import integrate

OVERFLOW_GUARD = 1e12

# probe points used to estimate power-law behaviour of an integrand
_ZERO_PROBES = (1e-5, 1e-3)
_TAIL_PROBES = (1e4, 1e8)


class LevyDivergenceError(ArithmeticError):
    """An integral against a Levy measure is infinite (or beyond the guard)."""


class QuadratureError(RuntimeError):
    """Adaptive quadrature failed to reach the requested tolerance."""


def tau(z):
    """Truncation function: ``z`` on ``[-1, 1]``, ``sign(z)`` outside."""
    if np.ndim(z) == 0:
        z = float(z)
        return z if abs(z) <= 1.0 else math.copysign(1.0, z)
    return np.clip(np.asarray(z, dtype=float), -1.0, 1.0)


# ---------------------------------------------------------------------------
# Levy measure descriptors


class LevyMeasure:
    """Base class of the Levy measure descriptors."""

    def scaled(self, k: float) -> "LevyMeasure":
        raise NotImplementedError

    @property
    def is_null(self) -> bool:
        raise NotImplementedError

    def __add__(self, other: "LevyMeasure") -> "LevyMeasure":
        if not isinstance(other, LevyMeasure):
            return NotImplemented
        return LevySum.of(self, other)


@dataclass(frozen=True)
class NoJumps(LevyMeasure):
    def scaled(self, k: float) -> "NoJumps":
        return self

    @property
    def is_null(self) -> bool:
        return True


@dataclass(frozen=True)
class PointMasses(LevyMeasure):
    atoms: tuple[tuple[float, float], ...]

    def __post_init__(self):
        atoms = tuple((float(z), float(w)) for z, w in self.atoms)
        for z, w in atoms:
            if z == 0.0 or not math.isfinite(z):
                raise ValueError(f"atom location must be finite and nonzero, got {z}")
            if w < 0.0 or not math.isfinite(w):
                raise ValueError(f"atom mass must be finite and nonnegative, got {w}")
        object.__setattr__(self, "atoms", atoms)

    @property
    def locations(self) -> np.ndarray:
        return np.array([z for z, _ in self.atoms], dtype=float)

    @property
    def masses(self) -> np.ndarray:
        return np.array([w for _, w in self.atoms], dtype=float)

    def scaled(self, k: float) -> "PointMasses":
        return PointMasses(tuple((z, w * k) for z, w in self.atoms))

    @property
    def is_null(self) -> bool:
        return all(w == 0.0 for _, w in self.atoms)


def _check_density_params(alpha, c_plus, c_minus):
    if not 0.0 < alpha < 2.0:
        raise ValueError(f"alpha must lie in (0, 2), got {alpha}")
    if c_plus < 0.0 or c_minus < 0.0:
        raise ValueError("c_plus and c_minus must be nonnegative")
    if not (math.isfinite(c_plus) and math.isfinite(c_minus)):
        raise ValueError("c_plus and c_minus must be finite")


@dataclass(frozen=True)
class StablePair(LevyMeasure):
    alpha: float
    c_plus: float
    c_minus: float

    def __post_init__(self):
        _check_density_params(self.alpha, self.c_plus, self.c_minus)

    theta = 0.0

    def scaled(self, k: float) -> "StablePair":
        return StablePair(self.alpha, self.c_plus * k, self.c_minus * k)

    @property
    def is_null(self) -> bool:
        return self.c_plus == 0.0 and self.c_minus == 0.0

    @property
    def beta(self) -> float:
        """Skewness ``(c+ - c-) / (c+ + c-)``."""
        total = self.c_plus + self.c_minus
        return 0.0 if total == 0.0 else (self.c_plus - self.c_minus) / total


@dataclass(frozen=True)
class Tempered(LevyMeasure):
    alpha: float
    c_plus: float
    c_minus: float
    theta: float

    def __post_init__(self):
        _check_density_params(self.alpha, self.c_plus, self.c_minus)
        if not (self.theta > 0.0 and math.isfinite(self.theta)):
            raise ValueError(f"tempering rate must be positive, got {self.theta}")

    def scaled(self, k: float) -> "Tempered":
        return Tempered(self.alpha, self.c_plus * k, self.c_minus * k, self.theta)

    @property
    def is_null(self) -> bool:
        return self.c_plus == 0.0 and self.c_minus == 0.0


@dataclass(frozen=True)
class LevySum(LevyMeasure):
    parts: tuple[LevyMeasure, ...]

    @classmethod
    def of(cls, *measures: LevyMeasure) -> LevyMeasure:
        parts: list[LevyMeasure] = []
        for m in measures:
            parts.extend(m.parts if isinstance(m, LevySum) else (m,))
        parts = [p for p in parts if not isinstance(p, NoJumps)]
        if not parts:
            return NoJumps()
        if len(parts) == 1:
            return parts[0]
        return cls(tuple(parts))

    def scaled(self, k: float) -> "LevySum":
        return LevySum(tuple(p.scaled(k) for p in self.parts))

    @property
    def is_null(self) -> bool:
        return all(p.is_null for p in self.parts)


DensityMeasure = (StablePair, Tempered)


@dataclass(frozen=True)
class LevyTriplet:
    """Shift, Gaussian variance and Levy measure of an ID law."""

    shift: float = 0.0
    gaussian_variance: float = 0.0
    jumps: LevyMeasure = NoJumps()

    def __post_init__(self):
        if not self.gaussian_variance >= 0.0:
            raise ValueError(f"gaussian variance must be >= 0, got {self.gaussian_variance}")
        if not isinstance(self.jumps, LevyMeasure):
            raise TypeError("jumps must be a LevyMeasure")

    def __add__(self, other: "LevyTriplet") -> "LevyTriplet":
        return LevyTriplet(
            self.shift + other.shift,
            self.gaussian_variance + other.gaussian_variance,
            self.jumps + other.jumps,
        )

    def scaled(self, k: float) -> "LevyTriplet":
        return LevyTriplet(self.shift * k, self.gaussian_variance * k, self.jumps.scaled(k))


# ---------------------------------------------------------------------------
# Quadrature


def _sides(nu):
    """(sign, weight) pairs of a density family; zero weights dropped."""
    return [(s, c) for s, c in ((1.0, nu.c_plus), (-1.0, nu.c_minus)) if c > 0.0]


def _envelope(h, s):
    pts = s * (1.0 + 0.1 * np.arange(5))
    return max(abs(float(h(p))) for p in pts)


def _power_order(h, probes):
    lo, hi = probes
    m_lo, m_hi = _envelope(h, lo), _envelope(h, hi)
    if m_lo == 0.0 and m_hi == 0.0:
        return None
    if m_lo == 0.0:
        return math.inf
    if m_hi == 0.0:
        return -math.inf
    return math.log(m_hi / m_lo) / math.log(hi / lo)


def _checked_quad(f, a, b, rtol, **kw):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, err = integrate.quad(f, a, b, epsabs=1e-13, epsrel=rtol, limit=400, **kw)
    if not math.isfinite(val):
        raise LevyDivergenceError("integral is not finite")
    if abs(val) > OVERFLOW_GUARD:
        raise LevyDivergenceError(f"integral {val:.3g} exceeds overflow guard")
    if err > max(1e-7, 1e3 * rtol * abs(val)):
        raise QuadratureError(f"quadrature did not converge: value {val:.6g}, error {err:.3g}")
    return val


def _core(g, p, alpha, rtol):
    """``int_0^1 g(s) s^(p-1-alpha) ds`` with the algebraic weight handled by QAWS."""
    expo = p - 1.0 - alpha

    def safe(s):
        return g(max(s, 1e-100))

    return _checked_quad(safe, 0.0, 1.0, rtol, weight="alg", wvar=(expo, 0.0))


def _half_line(h, alpha, c, theta, rtol):
    """``int_0^inf h(s) c s^(-1-alpha) exp(-theta s) ds`` for a real integrand h."""
    p = _power_order(h, _ZERO_PROBES)
    if p is None or p > 2.0:
        p = 2.0
    else:
        if abs(p - round(p)) < 0.05:
            p = float(round(p))
        if p <= alpha + 1e-6:
            raise LevyDivergenceError(
                f"integrand of order {p:.3g} at the origin is not integrable against s^(-1-{alpha})"
            )
    if theta == 0.0:
        q = _power_order(h, _TAIL_PROBES)
        if q is not None and q >= alpha - 1e-6:
            raise LevyDivergenceError(
                f"integrand of order {q:.3g} at infinity is not integrable against s^(-1-{alpha})"
            )

    def g(s):
        return c * h(s) / s**p * math.exp(-theta * s)

    core = _core(g, p, alpha, rtol)
    tail = _checked_quad(
        lambda s: c * h(s) * s ** (-1.0 - alpha) * math.exp(-theta * s), 1.0, math.inf, rtol
    )
    return core + tail


def levy_quadrature(nu: LevyMeasure, h: Callable[[float], float], rtol: float = 1e-9) -> float:
    """Integrate a real function ``h`` against the Levy measure ``nu``.

    Atoms are summed exactly. For the density families the integral is split at
    the origin and at ``|s| = 1``; the power-law singularity at the origin is
    absorbed into an algebraic quadrature weight after estimating the order of
    ``h`` there. Raises :class:`LevyDivergenceError` for infinite integrals and
    :class:`QuadratureError` when refinement does not converge.
    """
    if isinstance(nu, NoJumps):
        return 0.0
    if isinstance(nu, PointMasses):
        return float(sum(w * h(z) for z, w in nu.atoms))
    if isinstance(nu, LevySum):
        return float(sum(levy_quadrature(p, h, rtol) for p in nu.parts))
    if isinstance(nu, DensityMeasure):
        total = 0.0
        for sign, c in _sides(nu):
            total += _half_line(lambda s, sign=sign: h(sign * s), nu.alpha, c, nu.theta, rtol)
        if abs(total) > OVERFLOW_GUARD:
            raise LevyDivergenceError(f"integral {total:.3g} exceeds overflow guard")
        return float(total)
    raise TypeError(f"unsupported Levy measure {nu!r}")


@lru_cache(maxsize=4096)
def truncated_second_moment(nu: LevyMeasure) -> float:
    """``int min(1, z^2) nu(dz)``."""
    return levy_quadrature(nu, lambda s: min(1.0, s * s))


@lru_cache(maxsize=4096)
def _tail_mass(alpha: float, theta: float, lo: float) -> float:
    """``int_lo^inf s^(-1-alpha) exp(-theta s) ds``."""
    if theta == 0.0:
        return lo ** (-alpha) / alpha
    return float(theta**alpha * mpmath.gammainc(-alpha, theta * lo))


@lru_cache(maxsize=4096)
def _first_moment(alpha: float, theta: float, lo: float, hi: float) -> float:
    """``int_lo^hi s^(-alpha) exp(-theta s) ds``."""
    if lo >= hi:
        return 0.0
    if theta == 0.0:
        if alpha == 1.0:
            return math.log(hi / lo)
        return (hi ** (1.0 - alpha) - lo ** (1.0 - alpha)) / (1.0 - alpha)
    return float(theta ** (alpha - 1.0) * mpmath.gammainc(1.0 - alpha, theta * lo, theta * hi))


def _cos_minus_one(x):
    return -2.0 * math.sin(0.5 * x) ** 2


def _sin_minus_x(x):
    if abs(x) < 1e-2:
        x2 = x * x
        return -x * x2 / 6.0 * (1.0 - x2 / 20.0 * (1.0 - x2 / 42.0))
    return math.sin(x) - x


def _fourier_tail(alpha, theta, w, kind, rtol):
    """``int_1^inf (trig(ws) - k) s^(-1-alpha) exp(-theta s) ds`` for ``w > 0``.

    ``k`` is 1 for cos and ``w`` for sin (the truncation function equals 1 on
    the tail). The first oscillation is integrated on a log scale, the rest
    with QAWF, so tiny ``w`` does not produce a single enormous cycle.
    """
    trig = math.cos if kind == "cos" else math.sin
    k = 1.0 if kind == "cos" else w
    split = max(1.0, 2.0 * math.pi / w)
    head = 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        if split > 1.0:

            def g(y):
                s = math.exp(y)
                return (trig(w * s) - k) * math.exp(-alpha * y - theta * s)

            head, err = integrate.quad(g, 0.0, math.log(split), limit=200, epsabs=1e-14, epsrel=rtol)
            if err > max(1e-9, 1e3 * rtol * abs(head)):
                raise QuadratureError(f"Fourier head did not converge: {head:.6g} +- {err:.3g}")
        dens = lambda s: s ** (-1.0 - alpha) * math.exp(-theta * s)
        val, err = integrate.quad(dens, split, math.inf, weight=kind, wvar=w, limlst=200)
    if err > max(1e-7, 1e3 * rtol * abs(val)):
        raise QuadratureError(f"Fourier tail did not converge: {val:.6g} +- {err:.3g}")
    return head + val - k * _tail_mass(alpha, theta, split)


def _small_frequency(alpha, theta, w):
    """Exact (theta = 0) or second-order (theta > 0) exponent for tiny ``w > 0``."""
    if theta == 0.0:
        if alpha == 1.0:
            return complex(-0.5 * math.pi * w, -w * (math.log(w) + np.euler_gamma))
        head = math.gamma(-alpha) * w**alpha * complex(math.cos(0.5 * math.pi * alpha), -math.sin(0.5 * math.pi * alpha))
        return head - 1j * w * (1.0 / (1.0 - alpha) + 1.0 / alpha)
    drift = _first_moment(alpha, theta, 1.0, math.inf) - _tail_mass(alpha, theta, 1.0)
    second = math.gamma(2.0 - alpha) * theta ** (alpha - 2.0)
    return complex(-0.5 * w * w * second, w * drift)


def _density_exponent(alpha, theta, c, w, rtol):
    """``int_0^inf (e^{iws} - 1 - iw tau(s)) c s^(-1-alpha) e^(-theta s) ds``."""
    aw = abs(w)
    # the oscillatory tail is ill-conditioned as w -> 0; use the exact small-w forms there
    if aw < 1e-8 * (1.0 if theta == 0.0 else min(1.0, theta)):
        val = c * _small_frequency(alpha, theta, aw)
        return val if w > 0 else val.conjugate()
    re_core = _core(lambda s: c * _cos_minus_one(w * s) / (s * s) * math.exp(-theta * s), 2.0, alpha, rtol)
    im_core = _core(lambda s: c * _sin_minus_x(w * s) / (s * s) * math.exp(-theta * s), 2.0, alpha, rtol)
    re_tail = _fourier_tail(alpha, theta, abs(w), "cos", rtol)
    im_tail = math.copysign(1.0, w) * _fourier_tail(alpha, theta, abs(w), "sin", rtol)
    return complex(re_core + c * re_tail, im_core + c * im_tail)


@lru_cache(maxsize=1 << 16)
def levy_exponent(nu: LevyMeasure, u: float, rtol: float = 1e-10) -> complex:
    """Jump part ``int (e^{ius} - 1 - iu tau(s)) nu(ds)`` of the log-CF."""
    u = float(u)
    if u == 0.0 or isinstance(nu, NoJumps) or nu.is_null:
        return 0j
    if isinstance(nu, PointMasses):
        z, w = nu.locations, nu.masses
        return complex(np.sum(w * (np.exp(1j * u * z) - 1.0 - 1j * u * tau(z))))
    if isinstance(nu, LevySum):
        return sum((levy_exponent(p, u, rtol) for p in nu.parts), 0j)
    if isinstance(nu, DensityMeasure):
        total = 0j
        for sign, c in _sides(nu):
            total += _density_exponent(nu.alpha, nu.theta, c, sign * u, rtol)
        return total
    raise TypeError(f"unsupported Levy measure {nu!r}")


def cf_id(triplet: LevyTriplet, t: float) -> complex:
    """Levy-Khintchine characteristic function of ``triplet`` at ``t``."""
    t = float(t)
    if t == 0.0:
        return 1.0 + 0j
    expo = 1j * t * triplet.shift - 0.5 * t * t * triplet.gaussian_variance
    expo += levy_exponent(triplet.jumps, t)
    return complex(np.exp(expo))


# ---------------------------------------------------------------------------
# Sampling


def _compound_sum(counts, jumps, size):
    idx = np.repeat(np.arange(size), counts)
    return np.bincount(idx, weights=jumps, minlength=size)


def _pareto(rng, n, alpha, lo):
    return lo * rng.random(n) ** (-1.0 / alpha)


def _tempered_jumps(rng, n, alpha, theta, lo):
    """Draw n jumps from ``s^(-1-alpha) e^(-theta s)`` on ``(lo, inf)`` by rejection."""
    out = np.empty(n)
    filled = 0
    while filled < n:
        need = n - filled
        cand = _pareto(rng, need + need // 4 + 16, alpha, lo)
        keep = cand[rng.random(cand.size) < np.exp(-theta * (cand - lo))][:need]
        out[filled : filled + keep.size] = keep
        filled += keep.size
    return out


# jumps per chunk when drawing compound Poisson sums
_CHUNK = 1 << 22


def _side_jumps(rng, alpha, theta, c, eps, size):
    """Compensated sum of one side's jumps larger than eps (positive orientation)."""
    rate = c * _tail_mass(alpha, theta, eps)
    compensation = c * (_first_moment(alpha, theta, eps, 1.0) + _tail_mass(alpha, theta, 1.0))
    counts = rng.poisson(rate, size)
    out = np.zeros(size)
    start = 0
    while start < size:
        # bound memory by the number of jumps, not the number of draws
        csum = np.cumsum(counts[start:])
        stop = start + max(1, int(np.searchsorted(csum, _CHUNK, side="right")))
        block = counts[start:stop]
        n = int(block.sum())
        if theta == 0.0:
            jumps = _pareto(rng, n, alpha, eps)
        else:
            jumps = _tempered_jumps(rng, n, alpha, theta, eps)
        out[start:stop] = _compound_sum(block, jumps, stop - start)
        start = stop
    return out - compensation


def _jump_part(nu, eps, rng, size):
    if isinstance(nu, NoJumps) or nu.is_null:
        return np.zeros(size)
    if isinstance(nu, PointMasses):
        # finite measure: every atom is kept, no truncation needed
        out = np.zeros(size)
        for z, w in nu.atoms:
            if w > 0.0:
                out += z * rng.poisson(w, size) - w * tau(z)
        return out
    if isinstance(nu, LevySum):
        out = np.zeros(size)
        for p in nu.parts:
            out += _jump_part(p, eps, rng, size)
        return out
    if isinstance(nu, DensityMeasure):
        out = np.zeros(size)
        for sign, c in _sides(nu):
            out += sign * _side_jumps(rng, nu.alpha, nu.theta, c, eps, size)
        return out
    raise TypeError(f"unsupported Levy measure {nu!r}")


def sample_id(triplet: LevyTriplet, eps: float, rng: np.random.Generator, size: int | None = None):
    """Approximate draw(s) from the ID law of ``triplet``.

    Jumps with ``|z| > eps`` from the density families are simulated as a
    compound Poisson sum, compensated by ``int_{|z|>eps} tau(z) nu(dz)``;
    smaller jumps are discarded. Atoms are always simulated exactly.
    """
    if not 0.0 < eps <= 1.0:
        raise ValueError(f"eps must lie in (0, 1], got {eps}")
    n = 1 if size is None else int(size)
    out = np.full(n, float(triplet.shift))
    if triplet.gaussian_variance > 0.0:
        out += math.sqrt(triplet.gaussian_variance) * rng.standard_normal(n)
    out += _jump_part(triplet.jumps, eps, rng, n)
    return float(out[0]) if size is None else out
