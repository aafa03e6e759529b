"""Characteristic integration of the interacting system, physical frame.

The integrator is kick-drift-kick leapfrog with a force refresh every step.
Runs record a time series of sup norms and the t^(5/3)-weighted field
monitor; particle states are emitted as immutable snapshots holding the
co-moving coordinates X = x - v t, which stay O(1) for all time and are the
natural variables for every late-time diagnostic.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .core import ParticleEnsemble, Snapshot, total_charge
from .field import FieldConfig, field_at_points, probe_grid
from .initial_data import InitialDataSpec, build_initial_data, sample

SERIES_COLUMNS = ("t", "sup_rho", "sup_E", "monitor_A", "g_diameter",
                  "total_charge")


@dataclass(frozen=True)
class RunConfig:
    """Step policy, output schedule, and probe settings for one run.

    The step size is dt0 up to t=1 and min(dt_max, eta*t) afterwards, so the
    velocity impulse per step stays bounded once the field enters its decay
    regime.  ``probe_eps_scale`` > 0 widens the field-probe softening
    linearly in time (measurement only); this keeps the sup-field probe
    self-similar instead of pinning it to the near field of individual
    particles at late times.

    ``field_eps_rate`` > 0 applies the same idea to the dynamics: the force
    softening becomes max(eps, rate*t).  In this expanding system the
    physical gap between neighbouring velocity streams grows like dv*t, so a
    softening fixed in the co-moving frame (i.e. growing linearly in the
    physical frame) is what keeps binary-encounter artifacts suppressed at
    all times, not just at t=0.  Rate 0 (default) keeps the softening
    constant.
    """

    t_end: float
    t_start: float = 0.0
    dt0: float = 0.05
    eta: float = 0.05
    dt_max: float = 0.05
    output_times: tuple[float, ...] | None = None
    field: FieldConfig = field(default_factory=FieldConfig)
    probe_resolution: int = 48
    probe_inflate: float = 1.2
    probe_eps_scale: float = 0.0
    field_eps_rate: float = 0.0
    snapshot_times: tuple[float, ...] | None = None
    seed: int = 0  # reserved; nothing in the pipeline draws random numbers

    def __post_init__(self):
        if not self.t_end > 1.0:
            raise ValueError("t_end must exceed 1")
        if not self.t_end > self.t_start >= 0.0:
            raise ValueError("need 0 <= t_start < t_end")
        if not 0.0 < self.eta <= 0.2:
            raise ValueError("eta must lie in (0, 0.2]")
        if self.dt0 <= 0 or self.dt_max <= 0:
            raise ValueError("step sizes must be positive")
        if self.probe_eps_scale < 0:
            raise ValueError("probe_eps_scale must be nonnegative")
        if self.field_eps_rate < 0:
            raise ValueError("field_eps_rate must be nonnegative")
        if self.output_times is not None:
            ts = tuple(float(t) for t in self.output_times)
            if any(b <= a for a, b in zip(ts, ts[1:])):
                raise ValueError("output times must be strictly increasing")
            if ts and (ts[0] <= self.t_start or ts[-1] > self.t_end + 1e-12):
                raise ValueError("output times must lie in (t_start, t_end]")
            object.__setattr__(self, "output_times", ts)

    def resolved_output_times(self) -> tuple[float, ...]:
        if self.output_times is not None:
            ts = list(self.output_times)
        else:
            lo = max(self.t_start + self.dt0, 1.0)
            ts = list(np.geomspace(lo, self.t_end, 16))
        if not ts or abs(ts[-1] - self.t_end) > 1e-12 * self.t_end:
            ts.append(self.t_end)
        return tuple(ts)


class TimeSeries:
    """Append-only table of run observables; one row per output time."""

    columns = SERIES_COLUMNS

    def __init__(self):
        self._rows: list[tuple[float, ...]] = []

    def append(self, t, sup_rho, sup_E, monitor, g_diameter, charge) -> None:
        if self._rows and t <= self._rows[-1][0]:
            raise ValueError("times must be strictly increasing")
        self._rows.append((float(t), float(sup_rho), float(sup_E),
                           float(monitor), float(g_diameter), float(charge)))

    def __len__(self) -> int:
        return len(self._rows)

    def as_array(self) -> np.ndarray:
        return np.array(self._rows, dtype=float).reshape(-1, 6)

    def column(self, name: str) -> np.ndarray:
        return self.as_array()[:, self.columns.index(name)]

    @property
    def t(self) -> np.ndarray:
        return self.column("t")

    @property
    def monitor(self) -> np.ndarray:
        return self.column("monitor_A")

    @classmethod
    def from_rows(cls, rows) -> "TimeSeries":
        ts = cls()
        for row in rows:
            ts.append(*row)
        return ts


class _State:
    """Flat mutable arrays plus the species bookkeeping of one run."""

    def __init__(self, ensemble: ParticleEnsemble, t: float):
        self.species = ensemble.species
        self.weights = [np.ascontiguousarray(w) for w in ensemble.weights]
        self.counts = ensemble.counts
        self.x = [np.ascontiguousarray(X + V * t) for X, V in
                  zip(ensemble.positions, ensemble.velocities)]
        self.v = [np.ascontiguousarray(V).copy() for V in ensemble.velocities]
        # the inertia sum_j m_j w_j is fixed; used by the momentum correction
        self.inertia = sum(sp.mass * float(w.sum())
                           for sp, w in zip(self.species, self.weights))

    def accelerations(self, fc: FieldConfig) -> list[np.ndarray]:
        targets = np.vstack(self.x)
        ens_like = _EnsembleView(self.species, self.weights)
        E = field_at_points(ens_like, self.x, targets, fc)
        # Remove the net force so total momentum is conserved exactly even
        # when the tree approximation breaks pairwise antisymmetry.
        net = np.zeros(3)
        off = 0
        for sp, w, n in zip(self.species, self.weights, self.counts):
            net += sp.charge * (w[:, None] * E[off:off + n]).sum(axis=0)
            off += n
        shift = net / self.inertia
        acc = []
        off = 0
        for sp, n in zip(self.species, self.counts):
            acc.append((sp.charge / sp.mass) * E[off:off + n] - shift)
            off += n
        return acc

    def snapshot(self, t: float) -> Snapshot:
        return Snapshot.from_physical(
            t, self.species, [x.copy() for x in self.x],
            [v.copy() for v in self.v], [w.copy() for w in self.weights])

    def check_finite(self, t: float) -> None:
        for x, v in zip(self.x, self.v):
            if not (np.isfinite(x).all() and np.isfinite(v).all()):
                raise FloatingPointError(
                    f"non-finite particle state at t={t:.6g}")

    def g_diameter(self, t: float) -> float:
        lo = np.full(3, np.inf)
        hi = np.full(3, -np.inf)
        for x, v in zip(self.x, self.v):
            X = x - v * t
            lo = np.minimum(lo, X.min(axis=0))
            hi = np.maximum(hi, X.max(axis=0))
        return float(np.linalg.norm(hi - lo))


class _EnsembleView:
    """Duck-typed stand-in passing species/weights to field_at_points."""

    def __init__(self, species, weights):
        self.species = species
        self.weights = weights


def step(snapshot: Snapshot, dt: float, fc: FieldConfig) -> Snapshot:
    """One kick-drift-kick step; returns a new snapshot at time + dt.

    Two field evaluations (start and end of step).  A negative dt is allowed
    so trajectories can be integrated backwards for reversibility checks.
    """
    if dt == 0:
        raise ValueError("dt must be nonzero")
    st = _State(snapshot.ensemble, snapshot.time)
    acc = st.accelerations(fc)
    for v, a in zip(st.v, acc):
        v += 0.5 * dt * a
    for x, v in zip(st.x, st.v):
        x += dt * v
    acc = st.accelerations(fc)
    for v, a in zip(st.v, acc):
        v += 0.5 * dt * a
    t_new = snapshot.time + dt
    st.check_finite(t_new)
    return st.snapshot(t_new)


def _policy_dt(t: float, rc: RunConfig) -> float:
    if t < 1.0:
        return rc.dt0
    return min(rc.dt_max, rc.eta * t)


def probe_sup_field(state_or_snapshot, fc: FieldConfig, t: float,
                    eps_scale: float = 0.0, resolution: int = 48,
                    inflate: float = 1.2) -> float:
    """Max |E| over a probe grid, with optionally time-scaled softening."""
    if isinstance(state_or_snapshot, Snapshot):
        species = state_or_snapshot.ensemble.species
        weights = state_or_snapshot.ensemble.weights
        xs = list(state_or_snapshot.physical_positions)
    else:
        species = state_or_snapshot.species
        weights = state_or_snapshot.weights
        xs = state_or_snapshot.x
    eps = max(fc.eps, eps_scale * t)
    grid = probe_grid(xs, resolution=resolution, inflate=inflate)
    E = field_at_points(_EnsembleView(species, weights), xs, grid.nodes(),
                        replace(fc, eps=eps))
    return float(np.linalg.norm(E, axis=1).max())


def run_stream(data, rc: RunConfig):
    """Generator form of ``run``: yields (snapshot, row) at output times.

    The initial state comes first with ``row=None``; consumers that only
    need per-time observables can process snapshots as they stream by
    instead of holding the whole trajectory in memory.
    """
    from .diagnostics import density  # local import, avoids a cycle

    if isinstance(data, InitialDataSpec):
        ensemble = sample(build_initial_data(data), data.nx, data.nv)
    elif isinstance(data, ParticleEnsemble):
        ensemble = data
    else:
        raise TypeError("run expects an InitialDataSpec or ParticleEnsemble")

    out_times = rc.resolved_output_times()
    st = _State(ensemble, rc.t_start)
    charge = total_charge(ensemble)
    yield st.snapshot(rc.t_start), None

    def force_config(now: float) -> FieldConfig:
        if rc.field_eps_rate <= 0:
            return rc.field
        return replace(rc.field, eps=max(rc.field.eps,
                                         rc.field_eps_rate * now))

    t = rc.t_start
    next_idx = 0
    acc = st.accelerations(force_config(t))
    while t < rc.t_end - 1e-12:
        dt = _policy_dt(t, rc)
        target = None
        if next_idx < len(out_times) and t + dt >= out_times[next_idx] - 1e-12:
            target = out_times[next_idx]
            dt = target - t
        for v, a in zip(st.v, acc):
            v += 0.5 * dt * a
        for x, v in zip(st.x, st.v):
            x += dt * v
        t = target if target is not None else t + dt
        acc = st.accelerations(force_config(t))
        for v, a in zip(st.v, acc):
            v += 0.5 * dt * a
        st.check_finite(t)
        if target is not None:
            snap = st.snapshot(t)
            sup_rho = density(snap, resolution=rc.probe_resolution).sup()
            sup_E = probe_sup_field(st, rc.field, t,
                                    eps_scale=rc.probe_eps_scale,
                                    resolution=rc.probe_resolution,
                                    inflate=rc.probe_inflate)
            row = (t, sup_rho, sup_E, t ** (5.0 / 3.0) * sup_E,
                   st.g_diameter(t), charge)
            yield snap, row
            next_idx += 1


def run(data, rc: RunConfig) -> tuple[list[Snapshot], TimeSeries]:
    """Integrate from t_start to t_end, emitting rows at the output times.

    ``data`` is an InitialDataSpec (built and sampled here) or a prepared
    ParticleEnsemble.  The returned snapshot list starts with the initial
    state; later entries land on the requested snapshot times (default: all
    output times).  Deterministic: identical inputs give identical output.
    """
    snap_times = (None if rc.snapshot_times is None
                  else tuple(float(t) for t in rc.snapshot_times))
    snaps: list[Snapshot] = []
    series = TimeSeries()
    for snap, row in run_stream(data, rc):
        if row is None:
            snaps.append(snap)
            continue
        series.append(*row)
        t = row[0]
        if snap_times is None or any(abs(t - s) <= 1e-12 * max(1.0, s)
                                     for s in snap_times):
            snaps.append(snap)
    return snaps, series


def assumption_A(series: TimeSeries) -> float:
    """Largest recorded value of the t^(5/3) |E| monitor."""
    if len(series) == 0:
        raise ValueError("empty time series")
    return float(series.monitor.max())


def to_g_frame(snapshot: Snapshot):
    """Per-species (X, V, w) in co-moving coordinates X = x - v t."""
    ens = snapshot.ensemble
    return tuple((X, V, w) for X, V, w in
                 zip(ens.positions, ens.velocities, ens.weights))
