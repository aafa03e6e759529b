"""Gauss-Legendre quadrature helpers.

All particle sampling and profile integrals in the package run on
deterministic Gauss-Legendre rules; nothing is randomized.  The adaptive
1-d routine doubles the node count per panel until two successive rules
agree, splitting first at caller-supplied breakpoints (support edges of
compactly supported factors), where the integrands lose smoothness.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss


class QuadratureError(Exception):
    """Raised when an adaptive rule cannot reach the requested tolerance."""


@lru_cache(maxsize=None)
def _leggauss_cached(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_legendre(n: int, a: float, b: float) -> tuple[np.ndarray, np.ndarray]:
    """n-node Gauss-Legendre rule mapped to [a, b]."""
    if n < 1:
        raise ValueError("need at least one node")
    if not b > a:
        raise ValueError(f"empty interval [{a}, {b}]")
    x, w = _leggauss_cached(int(n))
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    return mid + half * x, half * w


def integrate_adaptive(f, a: float, b: float, *, breakpoints=(),
                       tol: float = 1e-13, n_start: int = 16,
                       n_max: int = 2048) -> tuple[float, float]:
    """Integrate a vectorized callable over [a, b] to absolute tolerance.

    Returns (value, error_estimate).  The interval is split at any interior
    breakpoints; on each panel the node count doubles until two successive
    Gauss-Legendre values agree within the panel's tolerance share.  Raises
    QuadratureError when n_max nodes are not enough.
    """
    if not b > a:
        return 0.0, 0.0
    cuts = [a] + sorted(p for p in breakpoints if a < p < b) + [b]
    n_panels = len(cuts) - 1
    total, err_total = 0.0, 0.0
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        panel_tol = tol / n_panels
        n = n_start
        x, w = gauss_legendre(n, lo, hi)
        prev = float(w @ f(x))
        change = np.inf
        while True:
            n *= 2
            if n > n_max:
                raise QuadratureError(
                    f"no convergence on [{lo:.6g}, {hi:.6g}] at {n // 2} nodes "
                    f"(last change {change:.3e}, tolerance {panel_tol:.3e})")
            x, w = gauss_legendre(n, lo, hi)
            val = float(w @ f(x))
            change = abs(val - prev)
            if change <= panel_tol:
                total += val
                err_total += change
                break
            prev = val
    return total, err_total


def tensor_rule(axis_rules) -> tuple[np.ndarray, np.ndarray]:
    """Tensor product of per-axis (nodes, weights) 1-d rules.

    Returns points of shape (N, d) and weights of shape (N,), with the last
    axis varying fastest (C order), so output ordering is reproducible.
    """
    nodes = [np.asarray(x, dtype=float) for x, _ in axis_rules]
    weights = [np.asarray(w, dtype=float) for _, w in axis_rules]
    mesh = np.meshgrid(*nodes, indexing="ij")
    pts = np.stack(mesh, axis=-1).reshape(-1, len(nodes))
    w = weights[0]
    for wi in weights[1:]:
        w = np.multiply.outer(w, wi)
    return pts, w.reshape(-1)
