"""Electrostatic field evaluation for particle ensembles and gridded densities.

All routines compute the convolution of a charge distribution with the
softened Coulomb kernel

    E(x) = (1/(4 pi)) * sum_s q_s * sum_j w_j (x - x_j) / (|x - x_j|^2 + eps^2)^(3/2)

Per-species sums are accumulated separately and scaled by the species charge
afterwards, so two species with bitwise-identical nodes and weights cancel
exactly (their partial sums are equal floating-point numbers).

Two summation backends are provided: an exact pairwise sum and a Barnes-Hut
octree with monopole + quadrupole far-field terms.  The tree falls back to
the pairwise sum for small ensembles.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .core import Grid3, ParticleEnsemble, Snapshot

FOUR_PI = 4.0 * np.pi


@dataclass(frozen=True)
class FieldConfig:
    """Parameters of the field summation backend."""

    method: str = "tree"
    eps: float = 0.1
    theta: float = 0.5
    leaf_size: int = 24
    direct_threshold: int = 1000

    def __post_init__(self):
        if self.method not in ("direct", "tree"):
            raise ValueError(f"unknown field method {self.method!r}")
        if self.eps < 0.0:
            raise ValueError("softening eps must be >= 0")
        if not 0.0 < self.theta <= 1.0:
            raise ValueError("opening angle theta must be in (0, 1]")
        if self.leaf_size < 1:
            raise ValueError("leaf_size must be >= 1")


@dataclass(frozen=True)
class LimitProfile:
    """Values of a limit function (scalar or 3-vector) on a velocity grid."""

    grid: Grid3
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape[:3] != self.grid.shape or vals.ndim not in (3, 4):
            raise ValueError("values must have shape grid.shape or grid.shape + (3,)")
        if not np.all(np.isfinite(vals)):
            raise ValueError("limit profile values must be finite")
        object.__setattr__(self, "values", vals)

    @property
    def is_vector(self) -> bool:
        return self.values.ndim == 4


def default_softening(ensemble: ParticleEnsemble) -> float:
    """Half the mean axis spacing of the initial g-frame lattice.

    The lattice spacing per axis is estimated from the distinct coordinate
    values actually present, which recovers the generating quadrature grid
    for tensor-product sampled data.
    """
    spacings = []
    for X in ensemble.positions:
        for ax in range(3):
            vals = np.unique(X[:, ax])
            if len(vals) > 1:
                spacings.append(np.diff(vals).mean())
    if not spacings:
        return 0.1
    return 0.5 * float(np.mean(spacings))


def _species_field_sum(positions, weights, targets, eps, method, theta, leaf_size,
                       direct_threshold):
    pos = np.ascontiguousarray(positions, dtype=float)
    w = np.ascontiguousarray(weights, dtype=float)
    tgt = np.ascontiguousarray(targets, dtype=float)
    eps2 = eps * eps
    if method == "direct" or len(pos) < direct_threshold:
        return _kernels.pairwise_field(pos, w, tgt, eps2)
    tree = _kernels.build_octree(pos, w, leaf_size)
    return _kernels.tree_field(*tree, pos, w, tgt, theta, eps2)


def field_at_points(ensemble: ParticleEnsemble, positions_list, targets,
                    config: FieldConfig) -> np.ndarray:
    """Field of the ensemble (at the given physical positions) on targets."""
    targets = np.ascontiguousarray(targets, dtype=float)
    out = np.zeros((len(targets), 3))
    for sp, pos, w in zip(ensemble.species, positions_list, ensemble.weights):
        out += sp.charge * _species_field_sum(
            pos, w, targets, config.eps, config.method, config.theta,
            config.leaf_size, config.direct_threshold)
    return out / FOUR_PI


def direct_field(snapshot: Snapshot, targets, eps: float) -> np.ndarray:
    """Exact softened pairwise field at the target points."""
    cfg = FieldConfig(method="direct", eps=eps)
    return field_at_points(snapshot.ensemble, snapshot.physical_positions, targets, cfg)


def tree_field(snapshot: Snapshot, targets, eps: float, theta: float = 0.5) -> np.ndarray:
    """Barnes-Hut field at the target points; exact for small ensembles."""
    cfg = FieldConfig(method="tree", eps=eps, theta=theta)
    return field_at_points(snapshot.ensemble, snapshot.physical_positions, targets, cfg)


def probe_grid(positions_list, resolution: int = 48, inflate: float = 1.2) -> Grid3:
    """Uniform grid over the bounding box of the positions, inflated about its center."""
    allpos = np.vstack(positions_list)
    lo = allpos.min(axis=0)
    hi = allpos.max(axis=0)
    center = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    half = np.where(half > 0, half, 1e-6) * inflate
    return Grid3.from_bounds(center - half, center + half, (resolution,) * 3)


def sup_field(snapshot: Snapshot, eps: float, config: FieldConfig | None = None,
              grid: Grid3 | None = None, resolution: int = 48,
              inflate: float = 1.2) -> tuple[float, np.ndarray]:
    """Max of |E| over a probe grid covering the physical support.

    Returns (sup value, maximizing node).  Warns when the maximizer lies on
    the grid boundary, which indicates the probed box may under-cover the
    true supremum.
    """
    cfg = config if config is not None else FieldConfig(method="direct", eps=eps)
    if cfg.eps != eps:
        cfg = FieldConfig(cfg.method, eps, cfg.theta, cfg.leaf_size, cfg.direct_threshold)
    if grid is None:
        grid = probe_grid(snapshot.physical_positions, resolution, inflate)
    nodes = grid.nodes()
    E = field_at_points(snapshot.ensemble, snapshot.physical_positions, nodes, cfg)
    mag = np.sqrt((E * E).sum(axis=1))
    i = int(mag.argmax())
    idx = np.unravel_index(i, grid.shape)
    if any(k == 0 or k == n - 1 for k, n in zip(idx, grid.shape)):
        warnings.warn("field maximizer lies on the probe boundary; "
                      "the probed box may under-cover the supremum")
    return float(mag[i]), nodes[i]


def limit_field(rho_lim: LimitProfile, eps: float | None = None) -> LimitProfile:
    """Velocity-space field generated by a scalar limit density.

    Softened Riemann sum over the grid nodes; the softening defaults to one
    grid spacing.  Fails when the density support touches the grid boundary
    (the convolution would be truncated).
    """
    if rho_lim.is_vector:
        raise ValueError("limit_field expects a scalar density profile")
    grid = rho_lim.grid
    vals = rho_lim.values
    nz = np.nonzero(vals)
    if len(nz[0]):
        for ax in range(3):
            if nz[ax].min() == 0 or nz[ax].max() == grid.shape[ax] - 1:
                raise ValueError("density support touches the grid boundary")
    if eps is None:
        eps = float(np.mean(grid.spacing))
    nodes = grid.nodes()
    w = vals.reshape(-1) * grid.cell_volume
    keep = w != 0.0
    E = _kernels.pairwise_field(np.ascontiguousarray(nodes[keep]),
                                np.ascontiguousarray(w[keep]),
                                np.ascontiguousarray(nodes), eps * eps)
    return LimitProfile(grid, (E / FOUR_PI).reshape(grid.shape + (3,)))


def field_from_density(grid: Grid3, values: np.ndarray, targets,
                       eps: float | None = None) -> np.ndarray:
    """Field of a gridded charge density via a softened Riemann sum."""
    values = np.asarray(values, dtype=float)
    if values.shape != grid.shape:
        raise ValueError("values shape must match grid shape")
    if eps is None:
        eps = float(np.mean(grid.spacing))
    w = values.reshape(-1) * grid.cell_volume
    keep = w != 0.0
    E = _kernels.pairwise_field(np.ascontiguousarray(grid.nodes()[keep]),
                                np.ascontiguousarray(w[keep]),
                                np.ascontiguousarray(targets, dtype=float),
                                eps * eps)
    return E / FOUR_PI
