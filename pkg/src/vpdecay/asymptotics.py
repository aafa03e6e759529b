"""Verdicts from diagnostic series: decay fits, limits, scattering defects.

Everything here is pure post-processing over immutable inputs.  Logarithmic
corrections to power laws are deliberately not modelled; fit windows start
late enough that slowly varying factors land inside the stated tolerances.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from ._kernels import phase_kde
from .core import Snapshot
from .diagnostics import DensityField, MomentTable, _lattice_spacing

DEFAULT_WINDOW = (10.0, 160.0)
DEFAULT_SAMPLES = 12


@dataclass(frozen=True)
class DecayFit:
    """Least-squares power law value ~ t^exponent over a time window."""

    window: tuple[float, float]
    exponent: float
    intercept: float
    residual_rms: float
    n_points: int
    slope_stderr: float = 0.0

    def __post_init__(self):
        if self.n_points < 5:
            raise ValueError("a decay fit needs at least 5 points")
        if self.window[0] < 1.0:
            raise ValueError("fit window must start at t >= 1")


def fit_decay(series, window: tuple[float, float] = DEFAULT_WINDOW) -> DecayFit:
    """OLS fit of log(value) against log(t) inside the window.

    ``series`` is an (N, 2) array of (t, value) rows.  Values must be
    strictly positive inside the window; the offending time is reported
    otherwise.
    """
    arr = np.asarray(series, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError("series must be an (N, 2) array of (t, value)")
    lo, hi = float(window[0]), float(window[1])
    sel = (arr[:, 0] >= lo - 1e-12) & (arr[:, 0] <= hi + 1e-12)
    t, val = arr[sel, 0], arr[sel, 1]
    if len(t) < 5:
        raise ValueError(f"only {len(t)} points inside window [{lo}, {hi}]; "
                         "need at least 5")
    bad = val <= 0
    if bad.any():
        raise ValueError(f"nonpositive value at t={t[bad][0]:.6g}; "
                         "cannot fit a power law")
    logt, logv = np.log(t), np.log(val)
    slope, intercept = np.polyfit(logt, logv, 1)
    resid = logv - (slope * logt + intercept)
    n = len(t)
    spread = float(np.sum((logt - logt.mean()) ** 2))
    if n > 2 and spread > 0:
        stderr = math.sqrt(float(resid @ resid) / (n - 2) / spread)
    else:
        stderr = 0.0
    return DecayFit(window=(lo, hi), exponent=float(slope),
                    intercept=float(intercept),
                    residual_rms=float(np.sqrt(np.mean(resid ** 2))),
                    n_points=int(n), slope_stderr=stderr)


@dataclass(frozen=True)
class ProfileErrorSeries:
    """Sup-norm gaps between rescaled densities and a limit profile."""

    ell: int
    rows: np.ndarray                      # (t, sup gap) for the density
    field_rows: np.ndarray | None = None  # optional analogue with t^(ell+2)

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=float)
        if rows.ndim != 2 or rows.shape[1] != 2:
            raise ValueError("rows must be (t, error) pairs")
        if np.any(np.diff(rows[:, 0]) <= 0):
            raise ValueError("times must increase")
        if np.any(rows[:, 1] < 0):
            raise ValueError("errors must be nonnegative")
        object.__setattr__(self, "rows", rows)

    def doubling_ratios(self) -> np.ndarray:
        """err(2t)/err(t) for every recorded doubling pair."""
        t, e = self.rows[:, 0], self.rows[:, 1]
        out = []
        for i, ti in enumerate(t):
            j = np.argmin(np.abs(t - 2.0 * ti))
            if abs(t[j] - 2.0 * ti) < 1e-9 * ti and e[i] > 0:
                out.append(e[j] / e[i])
        return np.array(out)

    def decay_exponent(self, window=None) -> float:
        window = window or (self.rows[0, 0], self.rows[-1, 0])
        return fit_decay(self.rows, window).exponent


def profile_error(fields, rho_lim, ell: int, kde_errors=None,
                  field_errors=None) -> ProfileErrorSeries:
    """Sup over each field's grid of |t^(ell+3) rho - rho_lim(x/t)|.

    ``rho_lim`` is a callable profile (evaluated at x/t).  When KDE error
    bars are supplied and one exceeds 30% of the measured gap, the result at
    that time is flagged as inconclusive via a warning.
    """
    rows = []
    for k, fld in enumerate(fields):
        t = fld.time
        nodes = fld.grid.nodes()
        target = np.asarray(rho_lim(nodes / t), dtype=float)
        gap = float(np.abs(fld.rescaled(ell).reshape(-1) - target).max())
        if kde_errors is not None:
            bar = float(kde_errors[k]) * t ** (ell + 3)
            if bar > 0.3 * gap:
                warnings.warn(f"KDE error bar {bar:.3e} exceeds 30% of the "
                              f"profile gap {gap:.3e} at t={t:.6g}; "
                              "inconclusive", stacklevel=2)
        rows.append((t, gap))
    return ProfileErrorSeries(ell=ell, rows=np.array(rows),
                              field_rows=None if field_errors is None
                              else np.asarray(field_errors, dtype=float))


@dataclass(frozen=True)
class ExtrapolationResult:
    """Richardson limit of a moment-table sequence with quality flags."""

    table: MomentTable
    cauchy_residual: float
    nonconvergent: np.ndarray

    @property
    def flagged_fraction(self) -> float:
        return float(self.nonconvergent.mean())


def extrapolate_limit(tables) -> ExtrapolationResult:
    """Node-wise limit of F(t) assuming an error that shrinks like 1/t.

    Uses the last two tables: F_inf ~ (t_K F_K - t_{K-1} F_{K-1}) /
    (t_K - t_{K-1}).  Nodes whose successive two-point extrapolations move
    further apart are flagged as non-convergent.
    """
    tables = list(tables)
    if len(tables) < 3:
        raise ValueError("extrapolation needs at least 3 tables")
    times = [tab.time for tab in tables]
    if any(b <= a for a, b in zip(times, times[1:])):
        raise ValueError("tables must come at increasing times")
    first = tables[0]
    for tab in tables[1:]:
        if tab.order != first.order or tab.values.shape != first.values.shape:
            raise ValueError("tables must share order and grid")

    def pair_limit(a: MomentTable, b: MomentTable) -> np.ndarray:
        return (b.time * b.values - a.time * a.values) / (b.time - a.time)

    extr = [pair_limit(a, b) for a, b in zip(tables[:-1], tables[1:])]
    corrections = [np.abs(f2 - f1) for f1, f2 in zip(extr[:-1], extr[1:])]
    if len(corrections) >= 2:
        nonconv = corrections[-1] > corrections[-2] + 1e-15
    else:
        nonconv = np.zeros_like(extr[-1], dtype=bool)
    cauchy = float(np.abs(tables[-1].values - tables[-2].values).max())
    table = MomentTable(order=first.order, species=tables[-1].species,
                        grid=tables[-1].grid, values=extr[-1],
                        bandwidth=tables[-1].bandwidth, time=math.inf)
    return ExtrapolationResult(table=table, cauchy_residual=cauchy,
                               nonconvergent=nonconv)


@dataclass(frozen=True)
class ScatteringRow:
    t: float
    defect: float
    noise_floor: float
    inconclusive: bool


@dataclass(frozen=True)
class ScatteringReport:
    """Defect series for linear or modified scattering comparisons."""

    mode: str
    rows: tuple[ScatteringRow, ...]

    def __post_init__(self):
        if self.mode not in ("linear", "modified"):
            raise ValueError("mode must be 'linear' or 'modified'")
        if any(r.defect < 0 for r in self.rows):
            raise ValueError("defects must be nonnegative")

    def defects(self) -> np.ndarray:
        return np.array([r.defect for r in self.rows])


def _phase_probes(snapshot: Snapshot, nx: int, nv: int):
    ens = snapshot.ensemble
    X = np.vstack(ens.positions)
    V = np.vstack(ens.velocities)
    ax_x = [np.linspace(X[:, d].min(), X[:, d].max(), nx) for d in range(3)]
    ax_v = [np.linspace(V[:, d].min(), V[:, d].max(), nv) for d in range(3)]
    px = np.stack(np.meshgrid(*ax_x, indexing="ij"), -1).reshape(-1, 3)
    pv = np.stack(np.meshgrid(*ax_v, indexing="ij"), -1).reshape(-1, 3)
    gx = np.repeat(px, len(pv), axis=0)
    gv = np.tile(pv, (len(px), 1))
    return gx, gv


def _kde_at(snapshot: Snapshot, probes_x, probes_v, hx, hv, shift=None):
    """Per-species phase-space KDE, optionally shifting probe positions."""
    out = []
    ens = snapshot.ensemble
    for i, (sp, X, V, w) in enumerate(zip(ens.species, ens.positions,
                                          ens.velocities, ens.weights)):
        px = probes_x if shift is None else probes_x + shift[i]
        out.append(phase_kde(np.ascontiguousarray(X), np.ascontiguousarray(V),
                             np.ascontiguousarray(w),
                             np.ascontiguousarray(px),
                             np.ascontiguousarray(probes_v), hx, hv))
    return out


def _limit_field_at(e0_lim, points: np.ndarray) -> np.ndarray:
    if callable(e0_lim):
        return np.asarray(e0_lim(points), dtype=float)
    interp = [RegularGridInterpolator(e0_lim.grid.axes,
                                      e0_lim.values[..., c],
                                      bounds_error=False, fill_value=0.0)
              for c in range(e0_lim.values.shape[-1])]
    return np.stack([f(points) for f in interp], axis=-1)


def scattering_defect(snap_t: Snapshot, snap_2t: Snapshot,
                      mode: str = "linear", e0_lim=None, *,
                      probe_nx: int = 4, probe_nv: int = 4) -> ScatteringRow:
    """Sup over probe states of |g(2t) - g(t)| estimated by phase-space KDE.

    Modified mode evaluates each g at X + (q/m) ln(t) E0(V), the logarithmic
    characteristic shift, before comparing.  The noise floor is the KDE's
    bandwidth sensitivity at the same probes; defects below three times the
    floor are marked inconclusive.
    """
    if mode not in ("linear", "modified"):
        raise ValueError("mode must be 'linear' or 'modified'")
    if mode == "modified" and e0_lim is None:
        raise ValueError("modified mode needs the limit field E0")
    ens = snap_t.ensemble
    gx, gv = _phase_probes(snap_t, probe_nx, probe_nv)
    hx = 2.5 * max(_lattice_spacing(ens.positions), 1e-3)
    hv = 2.5 * max(_lattice_spacing(ens.velocities), 1e-3)

    def shifts(snap: Snapshot):
        if mode == "linear":
            return None
        E0 = _limit_field_at(e0_lim, gv)
        return [(sp.charge / sp.mass) * math.log(snap.time) * E0
                for sp in snap.ensemble.species]

    kde_a = _kde_at(snap_t, gx, gv, hx, hv, shifts(snap_t))
    kde_b = _kde_at(snap_2t, gx, gv, hx, hv, shifts(snap_2t))
    defect = max(float(np.abs(b - a).max()) for a, b in zip(kde_a, kde_b))
    wide_a = _kde_at(snap_t, gx, gv, 1.3 * hx, 1.3 * hv, shifts(snap_t))
    wide_b = _kde_at(snap_2t, gx, gv, 1.3 * hx, 1.3 * hv, shifts(snap_2t))
    floor = max(float(np.abs(w - k).max())
                for w, k in zip(wide_a + wide_b, kde_a + kde_b))
    floor *= 0.5
    return ScatteringRow(t=snap_t.time, defect=defect, noise_floor=floor,
                         inconclusive=defect < 3.0 * floor)
