"""Shared kernel types: multi-indices, species, particle ensembles, grids.

Positions and velocities live in R^3 throughout.  Particle states are kept
in two frames: the physical frame (x, v) used by the integrator and the
co-moving frame (X, v) with X = x - v*t, in which free transport is the
identity map.  A Snapshot stores the co-moving coordinates as canonical
data and caches the physical positions, so the frame map is definitional
and round-trips at zero cost.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product
from functools import lru_cache

import numpy as np

MultiIndex = tuple[int, int, int]


@lru_cache(maxsize=None)
def multi_indices(ell: int) -> tuple[MultiIndex, ...]:
    """All 3-component multi-indices of order ell, in lexicographic order.

    There are (ell+1)(ell+2)/2 of them.
    """
    if ell < 0:
        raise ValueError(f"order must be nonnegative, got {ell}")
    out = [(b1, b2, ell - b1 - b2)
           for b1 in range(ell + 1) for b2 in range(ell - b1 + 1)]
    return tuple(sorted(out))


def index_order(beta: MultiIndex) -> int:
    return beta[0] + beta[1] + beta[2]


def index_factorial(beta: MultiIndex) -> int:
    """beta! = b1! b2! b3!"""
    return math.factorial(beta[0]) * math.factorial(beta[1]) * math.factorial(beta[2])


def monomial(points: np.ndarray, beta: MultiIndex) -> np.ndarray:
    """Evaluate x^beta = x1^b1 x2^b2 x3^b3 on an (..., 3) point array."""
    points = np.asarray(points, dtype=float)
    if points.shape[-1] != 3:
        raise ValueError(f"points must have trailing dimension 3, got {points.shape}")
    out = np.ones(points.shape[:-1], dtype=float)
    for ax, b in enumerate(beta):
        if b:
            out = out * points[..., ax] ** b
    return out


@dataclass(frozen=True)
class Species:
    """One particle species: charge q != 0, mass m > 0, display label."""

    charge: float
    mass: float
    label: str

    def __post_init__(self):
        if self.charge == 0.0:
            raise ValueError(f"species {self.label!r} must carry nonzero charge")
        if not self.mass > 0.0:
            raise ValueError(f"species {self.label!r} must have positive mass")


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ParticleEnsemble:
    """Weighted deterministic particles, one array block per species.

    positions[a], velocities[a] have shape (n_a, 3), weights[a] shape (n_a,).
    Weights are quadrature masses of the phase-space density (nonnegative;
    the species charge supplies the sign).  Arrays are immutable after
    construction; the integrator works on private mutable copies.
    """

    species: tuple[Species, ...]
    positions: tuple[np.ndarray, ...]
    velocities: tuple[np.ndarray, ...]
    weights: tuple[np.ndarray, ...]

    def __post_init__(self):
        if not (len(self.species) == len(self.positions)
                == len(self.velocities) == len(self.weights)):
            raise ValueError("per-species array lists must align with species list")
        pos, vel, wts = [], [], []
        for sp, x, v, w in zip(self.species, self.positions,
                               self.velocities, self.weights):
            x, v, w = _freeze(x), _freeze(v), _freeze(w)
            if x.ndim != 2 or x.shape[1] != 3 or v.shape != x.shape:
                raise ValueError(f"species {sp.label!r}: positions/velocities "
                                 f"must both be (n, 3)")
            if w.shape != (x.shape[0],):
                raise ValueError(f"species {sp.label!r}: weights must be (n,)")
            if np.any(w < 0.0):
                raise ValueError(f"species {sp.label!r}: negative weight")
            pos.append(x); vel.append(v); wts.append(w)
        object.__setattr__(self, "positions", tuple(pos))
        object.__setattr__(self, "velocities", tuple(vel))
        object.__setattr__(self, "weights", tuple(wts))

    @property
    def counts(self) -> tuple[int, ...]:
        return tuple(x.shape[0] for x in self.positions)

    @property
    def n_total(self) -> int:
        return sum(self.counts)


def total_charge(ensemble: ParticleEnsemble) -> float:
    """Net charge sum_a q_a sum_j w_j, summed in fixed species order.

    The per-species reductions use np.sum on the stored arrays, so repeated
    calls on an unchanged ensemble return bit-identical values.
    """
    return float(sum(sp.charge * np.sum(w)
                     for sp, w in zip(ensemble.species, ensemble.weights)))


def total_momentum(ensemble: ParticleEnsemble) -> np.ndarray:
    """sum_a m_a sum_j w_j V_j, shape (3,)."""
    out = np.zeros(3)
    for sp, v, w in zip(ensemble.species, ensemble.velocities, ensemble.weights):
        out += sp.mass * (w @ v)
    return out


@dataclass(frozen=True)
class Snapshot:
    """Particle state at one time.

    ``ensemble`` holds co-moving positions X = x - v*t (canonical data);
    ``physical_positions`` caches x.  Construct through ``from_g_frame`` or
    ``from_physical`` so the two stay definitionally consistent: whichever
    frame the caller supplies is stored verbatim and the other is computed
    exactly once.
    """

    time: float
    ensemble: ParticleEnsemble
    physical_positions: tuple[np.ndarray, ...] = field(repr=False, default=())

    def __post_init__(self):
        if not self.physical_positions:
            t = self.time
            phys = tuple(_freeze(x + v * t) for x, v in
                         zip(self.ensemble.positions, self.ensemble.velocities))
            object.__setattr__(self, "physical_positions", phys)
        else:
            object.__setattr__(
                self, "physical_positions",
                tuple(_freeze(x) for x in self.physical_positions))

    @classmethod
    def from_g_frame(cls, time: float, ensemble: ParticleEnsemble) -> "Snapshot":
        return cls(time=time, ensemble=ensemble)

    @classmethod
    def from_physical(cls, time: float, species: tuple[Species, ...],
                      positions: list[np.ndarray], velocities: list[np.ndarray],
                      weights: list[np.ndarray]) -> "Snapshot":
        g_pos = [x - v * time for x, v in zip(positions, velocities)]
        ens = ParticleEnsemble(species=tuple(species), positions=tuple(g_pos),
                               velocities=tuple(velocities), weights=tuple(weights))
        return cls(time=time, ensemble=ens, physical_positions=tuple(positions))


@dataclass(frozen=True)
class Grid3:
    """Uniform tensor-product grid over a box in R^3."""

    axes: tuple[np.ndarray, np.ndarray, np.ndarray]

    def __post_init__(self):
        axes = []
        for ax in self.axes:
            ax = _freeze(ax)
            if ax.ndim != 1 or ax.size < 2:
                raise ValueError("each axis needs at least two nodes")
            d = np.diff(ax)
            if not np.allclose(d, d[0], rtol=1e-12, atol=1e-15 * abs(float(ax[-1]))):
                raise ValueError("axis nodes must be uniformly spaced")
            axes.append(ax)
        object.__setattr__(self, "axes", tuple(axes))

    @classmethod
    def from_bounds(cls, lo, hi, shape) -> "Grid3":
        lo = np.broadcast_to(np.asarray(lo, dtype=float), (3,))
        hi = np.broadcast_to(np.asarray(hi, dtype=float), (3,))
        if np.isscalar(shape) or np.ndim(shape) == 0:
            shape = (int(shape),) * 3
        axes = tuple(np.linspace(lo[i], hi[i], int(shape[i])) for i in range(3))
        return cls(axes=axes)

    @property
    def shape(self) -> tuple[int, int, int]:
        return tuple(ax.size for ax in self.axes)

    @property
    def lo(self) -> np.ndarray:
        return np.array([ax[0] for ax in self.axes])

    @property
    def hi(self) -> np.ndarray:
        return np.array([ax[-1] for ax in self.axes])

    @property
    def spacing(self) -> np.ndarray:
        return np.array([ax[1] - ax[0] for ax in self.axes])

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    def nodes(self) -> np.ndarray:
        """All grid nodes as an (N, 3) array in C order."""
        m = np.meshgrid(*self.axes, indexing="ij")
        return np.stack(m, axis=-1).reshape(-1, 3)

    def contains(self, points: np.ndarray, margin: float = 0.0) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        ok = np.ones(points.shape[:-1], dtype=bool)
        for i in range(3):
            ok &= (points[..., i] >= self.axes[i][0] - margin)
            ok &= (points[..., i] <= self.axes[i][-1] + margin)
        return ok


# The velocity-space and position-space grids share one representation.
VGrid = Grid3
XGrid = Grid3
