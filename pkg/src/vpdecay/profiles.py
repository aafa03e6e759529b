"""Compactly supported 1-d profile factors and separable 3-d profiles.

Initial phase-space densities in this package are finite sums of tensor
products X1(x1) X2(x2) X3(x3) * V1(v1) V2(v2) V3(v3).  Keeping that
structure explicit buys three things: exact symbolic derivatives (for
limit-profile formulas), per-axis factorization of the free-transport
density integrals, and separable quadrature sampling.

Two 1-d factor families cover every construction here:

* PolyBump1D   amp * (1 - z^2)_+^s * P(z)      z = (u - center)/halfwidth
* GaussBump1D  amp * exp(-z^2/2) * P(z)        z = (u - mean)/sigma,
               truncated to |z| <= cutoff

with P a polynomial in ascending-coefficient form.  Both families are
closed under differentiation.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from numpy.polynomial import Polynomial

from .core import MultiIndex
from .quadrature import gauss_legendre

_MOMENT_NODES = 64  # fixed rule for normalizing/moment integrals


@dataclass(frozen=True)
class PolyBump1D:
    """amp * (1 - z^2)_+^s * P(z) with z = (u - center)/halfwidth."""

    s: float
    poly: Polynomial
    center: float = 0.0
    halfwidth: float = 1.0
    amp: float = 1.0

    def __post_init__(self):
        if self.s < 0:
            raise ValueError("exponent s must be nonnegative")
        if not self.halfwidth > 0:
            raise ValueError("halfwidth must be positive")

    @property
    def support(self) -> tuple[float, float]:
        return (self.center - self.halfwidth, self.center + self.halfwidth)

    @property
    def smoothness(self) -> int:
        """Largest k with the profile in C^k across the support edge."""
        s = self.s
        return int(s) - 1 if float(s).is_integer() else int(np.floor(s))

    def __call__(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        z = (u - self.center) / self.halfwidth
        inside = np.abs(z) < 1.0
        out = np.zeros(z.shape, dtype=float)
        zi = z[inside]
        out[inside] = self.amp * (1.0 - zi * zi) ** self.s * self.poly(zi)
        return out

    def derivative(self) -> "PolyBump1D":
        if self.s < 1.0:
            raise ValueError("derivative leaves the bounded-bump family for s < 1")
        dp = (Polynomial([0.0, -2.0 * self.s]) * self.poly
              + Polynomial([1.0, 0.0, -1.0]) * self.poly.deriv())
        return PolyBump1D(s=self.s - 1.0, poly=dp, center=self.center,
                          halfwidth=self.halfwidth, amp=self.amp / self.halfwidth)

    def moment(self, k: int = 0) -> float:
        a, b = self.support
        x, w = gauss_legendre(_MOMENT_NODES, a, b)
        return float(w @ (x ** k * self(x))) if k else float(w @ self(x))

    def scaled(self, c: float) -> "PolyBump1D":
        return replace(self, amp=self.amp * c)


@dataclass(frozen=True)
class GaussBump1D:
    """amp * exp(-z^2/2) * P(z), z = (u - mean)/sigma, cut at |z| = cutoff."""

    mean: float
    sigma: float
    poly: Polynomial = Polynomial([1.0])
    cutoff: float = 6.0
    amp: float = 1.0

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if not self.cutoff > 0:
            raise ValueError("cutoff must be positive")

    @property
    def support(self) -> tuple[float, float]:
        r = self.cutoff * self.sigma
        return (self.mean - r, self.mean + r)

    def __call__(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        z = (u - self.mean) / self.sigma
        inside = np.abs(z) < self.cutoff
        out = np.zeros(z.shape, dtype=float)
        zi = z[inside]
        out[inside] = self.amp * np.exp(-0.5 * zi * zi) * self.poly(zi)
        return out

    def derivative(self) -> "GaussBump1D":
        dp = self.poly.deriv() - Polynomial([0.0, 1.0]) * self.poly
        return replace(self, poly=dp, amp=self.amp / self.sigma)

    def moment(self, k: int = 0) -> float:
        a, b = self.support
        x, w = gauss_legendre(_MOMENT_NODES, a, b)
        return float(w @ (x ** k * self(x))) if k else float(w @ self(x))

    def scaled(self, c: float) -> "GaussBump1D":
        return replace(self, amp=self.amp * c)


Profile1D = PolyBump1D | GaussBump1D


@dataclass(frozen=True)
class SeparableProfile3D:
    """Finite sum of tensor products of 1-d factors on R^3."""

    terms: tuple[tuple[float, tuple[Profile1D, Profile1D, Profile1D]], ...]

    def __post_init__(self):
        if not self.terms:
            raise ValueError("profile needs at least one term")

    @classmethod
    def product(cls, f1: Profile1D, f2: Profile1D, f3: Profile1D,
                coef: float = 1.0) -> "SeparableProfile3D":
        return cls(terms=((coef, (f1, f2, f3)),))

    def __call__(self, points) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        out = np.zeros(points.shape[:-1], dtype=float)
        for coef, (f1, f2, f3) in self.terms:
            out += coef * f1(points[..., 0]) * f2(points[..., 1]) * f3(points[..., 2])
        return out

    def tensor_values(self, ax1, ax2, ax3) -> np.ndarray:
        """Values on a tensor grid given per-axis node arrays; shape (n1,n2,n3)."""
        out = 0.0
        for coef, (f1, f2, f3) in self.terms:
            out = out + coef * np.einsum("i,j,k->ijk", f1(ax1), f2(ax2), f3(ax3))
        return out

    def moment(self, beta: MultiIndex) -> float:
        """integral of x^beta times the profile, per-axis 64-node Gauss-Legendre."""
        total = 0.0
        for coef, factors in self.terms:
            prod = coef
            for f, b in zip(factors, beta):
                prod *= f.moment(int(b))
            total += prod
        return total

    def integral(self) -> float:
        return self.moment((0, 0, 0))

    def derivative(self, beta: MultiIndex) -> "SeparableProfile3D":
        new_terms = []
        for coef, factors in self.terms:
            fs = []
            for f, b in zip(factors, beta):
                for _ in range(int(b)):
                    f = f.derivative()
                fs.append(f)
            new_terms.append((coef, tuple(fs)))
        return SeparableProfile3D(terms=tuple(new_terms))

    @property
    def support_box(self) -> tuple[np.ndarray, np.ndarray]:
        los, his = [], []
        for _, factors in self.terms:
            lohi = [f.support for f in factors]
            los.append([ab[0] for ab in lohi])
            his.append([ab[1] for ab in lohi])
        return np.min(np.asarray(los), axis=0), np.max(np.asarray(his), axis=0)

    def scaled(self, c: float) -> "SeparableProfile3D":
        return SeparableProfile3D(
            terms=tuple((coef * c, fs) for coef, fs in self.terms))

    def __add__(self, other: "SeparableProfile3D") -> "SeparableProfile3D":
        return SeparableProfile3D(terms=self.terms + other.terms)

    def min_on_lattice(self, n: int = 81) -> float:
        """Minimum over an n^3 lattice covering the support box (sign guard)."""
        lo, hi = self.support_box
        axes = [np.linspace(lo[i], hi[i], n) for i in range(3)]
        vals = self.tensor_values(*axes)
        return float(vals.min())

    def sup_on_lattice(self, n: int = 81) -> float:
        lo, hi = self.support_box
        axes = [np.linspace(lo[i], hi[i], n) for i in range(3)]
        vals = self.tensor_values(*axes)
        return float(np.abs(vals).max())
