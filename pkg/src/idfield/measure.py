"""Independently scattered ID random measures discretised on a grid partition."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence

import numpy as np

from .levy import LevyMeasure, LevyTriplet, NoJumps, sample_id, truncated_second_moment

# replicates drawn per derived stream; fixed so results do not depend on batching
BLOCK = 8192


@dataclass(frozen=True)
class Cell:
    id: int
    point: np.ndarray
    base_mass: float


@dataclass(frozen=True, eq=False)
class DomainPartition:
    """Finite box decomposition of a compact subset of R^m.

    ``lower``/``upper`` hold the corners of each cell (shape ``(n, m)``) and
    ``masses`` the base-measure mass of each cell.
    """

    lower: np.ndarray
    upper: np.ndarray
    masses: np.ndarray
    ids: np.ndarray = field(default=None)

    def __post_init__(self):
        lower = np.atleast_2d(np.asarray(self.lower, dtype=float))
        upper = np.atleast_2d(np.asarray(self.upper, dtype=float))
        masses = np.asarray(self.masses, dtype=float).reshape(-1)
        if lower.shape != upper.shape or lower.shape[0] != masses.size:
            raise ValueError("lower, upper and masses must describe the same cells")
        if np.any(upper < lower):
            raise ValueError("cell upper corners must dominate lower corners")
        if np.any(masses < 0) or not np.all(np.isfinite(masses)):
            raise ValueError("base masses must be finite and nonnegative")
        ids = np.arange(masses.size) if self.ids is None else np.asarray(self.ids, dtype=np.int64)
        if np.unique(ids).size != ids.size:
            raise ValueError("cell ids must be unique")
        for name, val in (("lower", lower), ("upper", upper), ("masses", masses), ("ids", ids)):
            val.setflags(write=False)
            object.__setattr__(self, name, val)

    @classmethod
    def grid(
        cls,
        lower: Sequence[float],
        upper: Sequence[float],
        shape: Sequence[int],
        density: Callable[[np.ndarray], np.ndarray] | None = None,
    ) -> "DomainPartition":
        """Uniform grid on the box ``[lower, upper]``.

        Cell masses are Lebesgue volumes, optionally multiplied by ``density``
        evaluated at the cell midpoints.
        """
        lower = np.asarray(lower, dtype=float).reshape(-1)
        upper = np.asarray(upper, dtype=float).reshape(-1)
        shape = tuple(int(k) for k in np.atleast_1d(shape))
        if not (lower.size == upper.size == len(shape)):
            raise ValueError("lower, upper and shape must have the same length")
        if any(k < 1 for k in shape):
            raise ValueError("grid resolution must be >= 1 along every axis")
        edges = [np.linspace(lo, hi, k + 1) for lo, hi, k in zip(lower, upper, shape)]
        idx = np.array(list(itertools.product(*(range(k) for k in shape))), dtype=int)
        lo = np.column_stack([edges[j][idx[:, j]] for j in range(len(shape))])
        hi = np.column_stack([edges[j][idx[:, j] + 1] for j in range(len(shape))])
        masses = np.prod(hi - lo, axis=1)
        if density is not None:
            masses = masses * np.asarray(density(0.5 * (lo + hi)), dtype=float)
        return cls(lo, hi, masses)

    def __len__(self) -> int:
        return self.masses.size

    @property
    def dim(self) -> int:
        return self.lower.shape[1]

    @property
    def points(self) -> np.ndarray:
        """Cell midpoints, shape ``(n, m)``."""
        return 0.5 * (self.lower + self.upper)

    @property
    def cells(self) -> list[Cell]:
        return [Cell(int(i), p, float(w)) for i, p, w in zip(self.ids, self.points, self.masses)]

    @property
    def total_mass(self) -> float:
        return float(self.masses.sum())

    @property
    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return self.lower.min(axis=0), self.upper.max(axis=0)

    def refine(self, depth: int = 1) -> "DomainPartition":
        """Halve every cell along every axis ``depth`` times.

        Children share their parent's mass equally (constant density within a cell).
        """
        part = self
        for _ in range(depth):
            m = part.dim
            corners = np.array(list(itertools.product((0, 1), repeat=m)), dtype=float)
            mid = part.points
            lo = np.concatenate([np.where(c == 0, part.lower, mid) for c in corners])
            hi = np.concatenate([np.where(c == 0, mid, part.upper) for c in corners])
            masses = np.tile(part.masses / 2**m, len(corners))
            order = np.argsort(np.tile(np.arange(len(part)), len(corners)), kind="stable")
            part = DomainPartition(lo[order], hi[order], masses[order])
        return part

    def with_masses(self, masses) -> "DomainPartition":
        return DomainPartition(self.lower, self.upper, masses, self.ids)

    def scaled(self, k: float) -> "DomainPartition":
        return self.with_masses(self.masses * k)


def _as_callable(value):
    if callable(value):
        return value
    return lambda x, _v=value: _v


@dataclass(frozen=True)
class LocalCharacteristics:
    """Densities (a, sigma^2, rho) of an ID random measure w.r.t. its base measure.

    Each entry is either a constant or a function of a point ``x`` in R^m.
    """

    a: float | Callable[[np.ndarray], float] = 0.0
    sigma2: float | Callable[[np.ndarray], float] = 0.0
    rho: LevyMeasure | Callable[[np.ndarray], LevyMeasure] = NoJumps()

    def at(self, x) -> tuple[float, float, LevyMeasure]:
        x = np.asarray(x, dtype=float)
        a = float(_as_callable(self.a)(x))
        s2 = float(_as_callable(self.sigma2)(x))
        rho = _as_callable(self.rho)(x)
        if s2 < 0:
            raise ValueError(f"sigma2 must be nonnegative, got {s2} at {x}")
        if not isinstance(rho, LevyMeasure):
            raise TypeError(f"rho must return a LevyMeasure, got {rho!r}")
        return a, s2, rho

    def evaluate(self, partition: DomainPartition):
        """Per-cell arrays ``a``, ``sigma2`` and the list of ``rho`` at the midpoints."""
        vals = [self.at(x) for x in partition.points]
        a = np.array([v[0] for v in vals])
        s2 = np.array([v[1] for v in vals])
        return a, s2, [v[2] for v in vals]


def control_mass(cell: Cell, chars: LocalCharacteristics) -> float:
    """Canonical control measure of a cell, midpoint rule."""
    a, s2, rho = chars.at(cell.point)
    return (abs(a) + s2 + truncated_second_moment(rho)) * cell.base_mass


def cell_triplet(cell: Cell, chars: LocalCharacteristics) -> LevyTriplet:
    """Levy triplet of ``Lambda(cell)``."""
    a, s2, rho = chars.at(cell.point)
    eta = cell.base_mass
    if eta == 0.0:
        return LevyTriplet()
    return LevyTriplet(a * eta, s2 * eta, rho.scaled(eta))


def cell_stream(seed: int, cell_id: int, block: int = 0) -> np.random.Generator:
    """Generator for one (seed, cell, replicate block), independent of draw order."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(block), int(cell_id)))
    return np.random.default_rng(ss)


def _blocks(size: int) -> Iterator[tuple[int, int, int]]:
    for b, start in enumerate(range(0, size, BLOCK)):
        yield b, start, min(size, start + BLOCK)


def sample_measure(
    partition: DomainPartition,
    chars: LocalCharacteristics,
    eps: float,
    seed: int,
    size: int | None = None,
) -> np.ndarray:
    """Draw ``Lambda(B_j)`` for every cell.

    Returns shape ``(n_cells,)`` when ``size`` is None, else ``(size, n_cells)``.
    Each (replicate block, cell) pair gets its own stream derived from ``seed``.
    """
    n = 1 if size is None else int(size)
    cells = partition.cells
    triplets = [cell_triplet(c, chars) for c in cells]
    out = np.zeros((n, len(cells)))
    for b, start, stop in _blocks(n):
        for j, (cell, trip) in enumerate(zip(cells, triplets)):
            if trip.shift == 0.0 and trip.gaussian_variance == 0.0 and trip.jumps.is_null:
                continue
            out[start:stop, j] = sample_id(trip, eps, cell_stream(seed, cell.id, b), stop - start)
    return out[0] if size is None else out
