"""alpha-stable specialisation: spectral measures on the sphere and association."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

from .field import FieldSpec, KernelFamily, _as_points
from .levy import StablePair, levy_quadrature, tau
from .measure import DomainPartition, LocalCharacteristics


@dataclass(frozen=True)
class StableSpec:
    """alpha-stable random measure with control ``m`` (the partition masses)."""

    alpha: float
    beta: float | Callable[[np.ndarray], float]
    partition: DomainPartition
    kernels: KernelFamily

    def __post_init__(self):
        if not 0.0 < self.alpha < 2.0:
            raise ValueError(f"alpha must lie in (0, 2), got {self.alpha}")
        b = self.beta_at(self.partition.points)
        if np.any(np.abs(b) > 1.0):
            raise ValueError("skewness beta must lie in [-1, 1]")

    def beta_at(self, points) -> np.ndarray:
        points = np.atleast_2d(points)
        if callable(self.beta):
            return np.array([float(self.beta(x)) for x in points])
        return np.full(points.shape[0], float(self.beta))


@dataclass
class SpectralMeasureAtoms:
    points: np.ndarray
    weights: np.ndarray
    mu: np.ndarray = field(default=None)

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))
        self.weights = np.asarray(self.weights, dtype=float).reshape(-1)
        if self.points.shape[0] != self.weights.size:
            raise ValueError("one weight per atom is required")
        if self.mu is None:
            self.mu = np.zeros(self.points.shape[1])
        self.mu = np.asarray(self.mu, dtype=float).reshape(-1)
        if self.weights.size and np.any(np.abs(np.linalg.norm(self.points, axis=1) - 1.0) > 1e-12):
            raise ValueError("atoms must lie on the unit sphere")
        if np.any(self.weights < 0) or not np.all(np.isfinite(self.weights)):
            raise ValueError("atom weights must be finite and nonnegative")

    @property
    def dim(self) -> int:
        return self.mu.size

    @property
    def total_mass(self) -> float:
        return float(self.weights.sum())

    @property
    def atoms(self) -> list[tuple[tuple[float, ...], float]]:
        return [(tuple(map(float, p)), float(w)) for p, w in zip(self.points, self.weights)]

    def to_dict(self) -> dict:
        return {"atoms": [[list(p), w] for p, w in self.atoms], "mu": self.mu.tolist()}


def g_map(x, ts, kernels: KernelFamily) -> np.ndarray | None:
    """Normalised kernel vector at ``x``; None where all kernels vanish."""
    f = kernels.values(ts, np.atleast_2d(x))[:, 0]
    norm2 = float(np.sum(f * f))
    if norm2 == 0.0:
        return None
    return f / math.sqrt(norm2)


def spectral_measure(sspec: StableSpec, ts) -> SpectralMeasureAtoms:
    """Discrete spectral measure of ``(X(t_1), ..., X(t_n))`` on the partition.

    Each cell with a nonzero kernel vector contributes ``(1 + beta)/2 * m1`` at
    ``g(x)`` and ``(1 - beta)/2 * m1`` at ``-g(x)``, where
    ``m1 = |f(x)|^alpha m(cell)``.
    """
    ts = _as_points(ts)
    if not ts:
        raise ValueError("at least one evaluation point is required")
    part = sspec.partition
    f = sspec.kernels.values(ts, part.points)
    norm = np.sqrt(np.sum(f * f, axis=0))
    beta = sspec.beta_at(part.points)
    merged: dict[tuple[float, ...], float] = {}
    for j in np.flatnonzero(norm > 0):
        g = f[:, j] / norm[j]
        m1 = norm[j] ** sspec.alpha * part.masses[j]
        for point, w in ((g, 0.5 * (1 + beta[j]) * m1), (-g, 0.5 * (1 - beta[j]) * m1)):
            if w > 0:
                key = tuple((point + 0.0).tolist())  # + 0.0 folds -0.0 into 0.0
                merged[key] = merged.get(key, 0.0) + w
    n = len(ts)
    if not merged:
        return SpectralMeasureAtoms(np.zeros((0, n)), np.zeros(0), np.zeros(n))
    pts = np.array(list(merged.keys()))
    return SpectralMeasureAtoms(pts, np.array(list(merged.values())), np.zeros(n))


def stable_cf(atoms: SpectralMeasureAtoms, alpha: float, theta) -> complex:
    """Characteristic function of the stable vector with spectral measure ``atoms``."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    if theta.size != atoms.dim:
        raise ValueError(f"theta has {theta.size} entries, atoms live in R^{atoms.dim}")
    if not atoms.weights.size:
        return complex(np.exp(1j * theta @ atoms.mu))
    proj = atoms.points @ theta
    mag = np.abs(proj)
    sgn = np.sign(proj)
    if alpha == 1.0:
        logs = np.zeros_like(mag)
        nz = mag > 0
        logs[nz] = np.log(mag[nz])
        terms = mag * (1 + 1j * (2 / math.pi) * sgn * logs)
    else:
        terms = mag**alpha * (1 - 1j * sgn * math.tan(math.pi * alpha / 2))
    expo = -np.sum(terms * atoms.weights) + 1j * theta @ atoms.mu
    return complex(np.exp(expo))


class Association(str, enum.Enum):
    ASSOCIATED = "associated"
    NEGATIVELY_ASSOCIATED = "negatively_associated"
    BOTH = "both"
    NEITHER = "neither"


def sign_masses(atoms: SpectralMeasureAtoms) -> tuple[float, float]:
    """``(Gamma(S-), Gamma(S+))`` with distinct coordinate pairs ``i != j``."""
    s_minus = s_plus = 0.0
    n = atoms.dim
    for p, w in zip(atoms.points, atoms.weights):
        prods = np.outer(p, p)[~np.eye(n, dtype=bool)]
        if np.any(prods < 0):
            s_minus += w
        if np.any(prods > 0):
            s_plus += w
    return s_minus, s_plus


def association_classify(atoms: SpectralMeasureAtoms) -> Association:
    s_minus, s_plus = sign_masses(atoms)
    if s_minus == 0.0 and s_plus == 0.0:
        return Association.BOTH
    if s_minus == 0.0:
        return Association.ASSOCIATED
    if s_plus == 0.0:
        return Association.NEGATIVELY_ASSOCIATED
    return Association.NEITHER


@dataclass
class NullCheck:
    integral: float
    degenerate: bool


def null_check(sspec: StableSpec, f: Callable[[np.ndarray], np.ndarray], alpha: float | None = None) -> NullCheck:
    """``sum_cells |f(x_mid)|^alpha m(cell)`` and whether it vanishes exactly."""
    alpha = sspec.alpha if alpha is None else alpha
    part = sspec.partition
    vals = np.abs(np.asarray(f(part.points), dtype=float))
    value = float(np.sum(vals**alpha * part.masses))
    return NullCheck(value, value == 0.0)


# ---------------------------------------------------------------------------
# bridge to the generic ID path


def stable_scale_constant(alpha: float) -> float:
    """``int_0^inf (1 - cos s) s^(-1-alpha) ds``.

    A :class:`StablePair` with ``c+ + c- = 1 / C`` has unit scale.
    """
    return math.pi / (2 * math.gamma(1 + alpha) * math.sin(math.pi * alpha / 2))


def stable_levy_measure(alpha: float, beta: float) -> StablePair:
    """Levy measure of a unit-scale stable law with skewness ``beta``."""
    total = 1.0 / stable_scale_constant(alpha)
    return StablePair(alpha, 0.5 * (1 + beta) * total, 0.5 * (1 - beta) * total)


@lru_cache(maxsize=1024)
def _stable_drift(nu: StablePair) -> float:
    """Drift density cancelling the truncation-function shift of ``nu``."""
    a = nu.alpha
    if a < 1:
        return levy_quadrature(nu, lambda s: tau(s))
    if a > 1:
        return -levy_quadrature(nu, lambda s: s - tau(s))
    if nu.c_plus != nu.c_minus:
        raise ValueError("asymmetric 1-stable measures are not supported on the ID path")
    return 0.0


def stable_characteristics(sspec: StableSpec) -> LocalCharacteristics:
    """Local characteristics of the stable random measure on the generic ID path.

    The jump density is a :class:`StablePair` with matching skewness and unit
    scale per unit control mass; the drift density removes the shift the
    truncation function introduces, so cell CFs are strictly stable.
    """
    alpha = sspec.alpha

    def rho(x):
        return stable_levy_measure(alpha, float(sspec.beta_at(x)[0]))

    def a(x):
        return _stable_drift(rho(x))

    return LocalCharacteristics(a=a, sigma2=0.0, rho=rho)


def as_field_spec(sspec: StableSpec) -> FieldSpec:
    return FieldSpec(sspec.kernels, stable_characteristics(sspec), sspec.partition)
