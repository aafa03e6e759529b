"""Command-line entry points and the checksum-gated pipeline.

Subcommands: construct, free-stream, simulate, moments, fit-decay, profile,
scatter, pipeline.  Every stage writes headered CSV files with 17
significant digits; the pipeline records per-stage output checksums plus a
digest of each stage's inputs, so re-running skips stages whose inputs and
outputs are unchanged and fails loudly when an output file was tampered
with under an unchanged configuration.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .asymptotics import fit_decay, profile_error, scattering_defect
from .config import ConfigBundle, ConfigError, DiagnosticsPlan, parse_config
from .core import Grid3, Snapshot, Species, monomial, multi_indices
from .diagnostics import density, limit_density_profile, moment_table, \
    oracle_density_field, oracle_sup_density, oracle_sup_field
from .dynamics import RunConfig, run_stream
from .field import LimitProfile, limit_field
from .initial_data import InitialDataSpec, build_initial_data, sample
from .io import RunManifest, SERIES_HEADER, checksum_file, fnv1a64, \
    read_snapshot_csv, read_table_csv, write_snapshot_csv, write_table_csv

ORACLE_HEADER = "t,sup_rho,sup_E"
FIT_HEADER = "window_lo,window_hi,exponent,slope_stderr,intercept,residual_rms,n_points"
PROFILE_HEADER = "t,density_gap"
SCATTER_HEADER = "t,defect,noise_floor,inconclusive"
MOMENTS_REPORT_HEADER = "beta1,beta2,beta3,value"
TABLE_HEADER = "v1,v2,v3,value"


class PipelineError(RuntimeError):
    """Raised when a pipeline stage fails or an output checksum mismatches."""


# ---------------------------------------------------------------------------
# shared helpers


def _species_pair(charge: float = 1.0, mass: float = 1.0) -> tuple[Species, ...]:
    return (Species(charge=charge, mass=mass, label="plus"),
            Species(charge=-charge, mass=mass, label="minus"))


def _species_from_file(path: Path, charge: float = 1.0,
                       mass: float = 1.0) -> tuple[Species, ...]:
    """Species tuple sized to the ids present in a snapshot CSV."""
    n = 0
    with open(path) as fh:
        next(fh)
        for line in fh:
            if line.strip():
                n = max(n, int(line.split(",", 1)[0]) + 1)
    if n == 2:
        return _species_pair(charge, mass)
    return tuple(Species(charge=charge, mass=mass, label=f"s{i}")
                 for i in range(max(n, 1)))


def _spec_from_echo(echo: dict) -> InitialDataSpec:
    kwargs = {k: tuple(v) if isinstance(v, list) else v for k, v in echo.items()}
    return InitialDataSpec(**kwargs)


def _snap_name(t: float) -> str:
    return f"snap_t{t:g}.csv"


def _snapshot_times(out_dir: Path) -> list[tuple[float, Path]]:
    found = []
    for p in sorted(out_dir.glob("snap_t*.csv")):
        try:
            found.append((float(p.stem[6:]), p))
        except ValueError:
            continue
    return sorted(found)


def _read_series_column(path: Path, column: str) -> np.ndarray:
    header = Path(path).read_text().split("\n", 1)[0].split(",")
    if column not in header or column == header[0]:
        raise ValueError(f"{path}: no column {column!r}; choices: "
                         f"{', '.join(header[1:])}")
    data = read_table_csv(path)
    return np.column_stack([data[:, 0], data[:, header.index(column)]])


def _net_moment_rows(ensemble, max_order: int) -> list[tuple]:
    """Charge-weighted g-frame lattice moments up to the given total order."""
    rows = []
    for k in range(max_order + 1):
        for beta in multi_indices(k):
            total = 0.0
            for sp, X, w in zip(ensemble.species, ensemble.positions,
                                ensemble.weights):
                total += sp.charge * float(np.sum(w * monomial(X, beta)))
            rows.append((beta[0], beta[1], beta[2], total))
    return rows


def _doubling_times(window: tuple[float, float]) -> list[float]:
    lo, hi = window
    out, t = [], lo
    while t <= hi * (1 + 1e-9):
        out.append(t)
        t *= 2.0
    return out


def _e0_limit_profile(data, resolution: int = 33, pad: float = 1.3):
    """Limit electric field over velocities, from the order-0 limit density."""
    los, his = [], []
    for sp in data:
        vlo, vhi = sp.v_profile.support_box
        los.append(vlo)
        his.append(vhi)
    lo, hi = np.min(los, axis=0), np.max(his, axis=0)
    center, half = 0.5 * (lo + hi), 0.5 * (hi - lo) * pad
    grid = Grid3.from_bounds(center - half, center + half, (resolution,) * 3)
    rho0 = limit_density_profile(data, 0)
    values = np.asarray(rho0(grid.nodes()), dtype=float).reshape(grid.shape)
    return limit_field(LimitProfile(grid=grid, values=values))


# ---------------------------------------------------------------------------
# stage bodies (shared between standalone subcommands and the pipeline)


def _do_construct(ini: InitialDataSpec, nx: int, nv: int, out_dir: Path,
                  particles_name: str = "particles.csv",
                  report_name: str = "moments.csv") -> dict[str, str]:
    data = build_initial_data(ini)
    ens = sample(data, nx, nv)
    snap = Snapshot.from_g_frame(0.0, ens)
    write_snapshot_csv(out_dir / particles_name, snap)
    rows = _net_moment_rows(ens, ini.m + 1)
    write_table_csv(out_dir / report_name, MOMENTS_REPORT_HEADER, rows)
    return {particles_name: checksum_file(out_dir / particles_name),
            report_name: checksum_file(out_dir / report_name)}


def _do_free_stream(ini: InitialDataSpec, times: np.ndarray, out_dir: Path,
                    resolution: int = 48, probe_resolution: int = 21,
                    out_name: str = "oracle.csv") -> dict[str, str]:
    data = build_initial_data(ini)
    rows = []
    for t in times:
        sup_rho = oracle_sup_density(data, float(t), resolution=resolution)
        sup_e = oracle_sup_field(data, float(t),
                                 resolution=min(resolution, 40),
                                 probe_resolution=probe_resolution)
        rows.append((float(t), sup_rho, sup_e))
    write_table_csv(out_dir / out_name, ORACLE_HEADER, rows)
    return {out_name: checksum_file(out_dir / out_name)}


def _do_simulate(source, rc: RunConfig, out_dir: Path) -> dict[str, str]:
    """Run the dynamics, streaming snapshots to disk as they appear."""
    snap_times = (None if rc.snapshot_times is None
                  else tuple(float(t) for t in rc.snapshot_times))
    files: dict[str, str] = {}
    rows = []
    for snap, row in run_stream(source, rc):
        if row is None:
            continue
        rows.append(row)
        t = row[0]
        if snap_times is None or any(abs(t - s) <= 1e-12 * max(1.0, s)
                                     for s in snap_times):
            name = _snap_name(t)
            write_snapshot_csv(out_dir / name, snap)
            files[name] = checksum_file(out_dir / name)
    write_table_csv(out_dir / "series.csv", SERIES_HEADER, rows)
    files["series.csv"] = checksum_file(out_dir / "series.csv")
    return files


def _do_moments(snap_path: Path, species: tuple[Species, ...], ell: int,
                out_dir: Path, resolution: int = 33, time_value: float = 0.0,
                stem: str | None = None) -> dict[str, str]:
    snap = read_snapshot_csv(snap_path, species, time_value=time_value)
    tables = moment_table(snap, ell, resolution=resolution)
    files = {}
    for table in tables:
        name = (f"{stem}_{table.species.label}.csv" if stem is not None
                else f"F_{ell}_{table.species.label}.csv")
        nodes = table.grid.nodes()
        rows = np.column_stack([nodes, table.values.reshape(-1)])
        write_table_csv(out_dir / name, TABLE_HEADER, rows)
        files[name] = checksum_file(out_dir / name)
    return files


def _do_fit(series_path: Path, column: str, window: tuple[float, float],
            out_dir: Path, out_name: str = "fit.csv"):
    series = _read_series_column(series_path, column)
    fit = fit_decay(series, window)
    row = (fit.window[0], fit.window[1], fit.exponent, fit.slope_stderr,
           fit.intercept, fit.residual_rms, fit.n_points)
    write_table_csv(out_dir / out_name, FIT_HEADER, [row])
    return fit, {out_name: checksum_file(out_dir / out_name)}


def _do_profile(ini: InitialDataSpec, plan: DiagnosticsPlan, out_dir: Path,
                snapshots: list[tuple[float, Path]] | None,
                out_name: str = "profile_error.csv") -> dict[str, str]:
    data = build_initial_data(ini)
    rho_lim = limit_density_profile(data, plan.ell)
    fields = []
    if snapshots is None:
        for t in _doubling_times(plan.window):
            fields.append(oracle_density_field(
                data, t, resolution=plan.density_resolution))
    else:
        species = _species_pair(ini.charge, ini.mass)
        for t, path in snapshots:
            snap = read_snapshot_csv(path, species, time_value=t)
            fields.append(density(snap, resolution=plan.density_resolution))
    if not fields:
        raise PipelineError("profile stage found no snapshots inside the "
                            f"window [{plan.window[0]}, {plan.window[1]}]")
    result = profile_error(fields, rho_lim, plan.ell)
    write_table_csv(out_dir / out_name, PROFILE_HEADER, result.rows)
    return {out_name: checksum_file(out_dir / out_name)}


def _do_scatter(ini: InitialDataSpec, mode: str, out_dir: Path,
                snapshots: list[tuple[float, Path]],
                out_name: str = "scatter.csv") -> dict[str, str]:
    times = [t for t, _ in snapshots]
    pairs = []
    for i, (t, path) in enumerate(snapshots):
        for j in range(i + 1, len(snapshots)):
            if abs(snapshots[j][0] - 2.0 * t) <= 1e-6 * max(1.0, t):
                pairs.append(((t, path), snapshots[j]))
                break
    if not pairs:
        raise PipelineError(f"no (t, 2t) snapshot pairs among times {times}")
    data = build_initial_data(ini)
    e0_lim = _e0_limit_profile(data) if mode == "modified" else None
    species = _species_pair(ini.charge, ini.mass)
    rows = []
    for (t, pa), (t2, pb) in pairs:
        snap_a = read_snapshot_csv(pa, species, time_value=t)
        snap_b = read_snapshot_csv(pb, species, time_value=t2)
        row = scattering_defect(snap_a, snap_b, mode=mode, e0_lim=e0_lim)
        rows.append((row.t, row.defect, row.noise_floor,
                     1.0 if row.inconclusive else 0.0))
    write_table_csv(out_dir / out_name, SCATTER_HEADER, rows)
    return {out_name: checksum_file(out_dir / out_name)}


# ---------------------------------------------------------------------------
# pipeline orchestration


def _inputs_digest(config_part, input_files: dict[str, Path]) -> str:
    payload = {"config": config_part,
               "files": {name: checksum_file(path)
                         for name, path in sorted(input_files.items())}}
    return fnv1a64(json.dumps(payload, sort_keys=True).encode())


def _stage_status(manifest: RunManifest, name: str, out_dir: Path,
                  inputs: str) -> str:
    """'skip' when inputs and outputs are intact, else 'run'.

    An existing output whose checksum mismatches while the stage inputs are
    unchanged means the file was corrupted, not that work is stale; that is
    an error naming the file.
    """
    rec = manifest.stages.get(name)
    if rec is None or rec.get("inputs") != inputs:
        return "run"
    for fname, digest in rec.get("files", {}).items():
        path = out_dir / fname
        if not path.exists():
            return "run"
        actual = checksum_file(path)
        if actual != digest:
            raise PipelineError(
                f"stage {name}: checksum mismatch for {fname} "
                f"(recorded {digest}, found {actual})")
    return "skip"


def run_pipeline(bundle: ConfigBundle, out_dir: Path, until: str | None = None,
                 probe_res: int | None = None) -> list[tuple[str, str]]:
    """Execute the stage chain, skipping stages whose state is up to date.

    Returns (stage, status) pairs with status 'ran' or 'skipped'.  Fails
    fast with the stage name; outputs of completed stages are kept.
    """
    ini, rc, fc, plan = bundle
    if probe_res is not None:
        rc = dataclasses.replace(rc, probe_resolution=probe_res)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    mpath = out_dir / "manifest.json"
    if mpath.exists():
        manifest = RunManifest.load(mpath)
        manifest.config = bundle.resolved
        manifest.version = __version__
    else:
        manifest = RunManifest(config=bundle.resolved, version=__version__)

    cfg = bundle.resolved
    oracle_mode = plan.source == "free-stream"
    stages: list[tuple[str, object, dict[str, Path]]] = []

    stages.append(("construct", cfg["initial"], {}))
    if oracle_mode:
        stages.append(("free-stream",
                       {"initial": cfg["initial"], "times": list(plan.times),
                        "n_samples": plan.n_samples,
                        "density_resolution": plan.density_resolution,
                        "probe_res": probe_res}, {}))
    else:
        stages.append(("simulate",
                       {"initial": cfg["initial"], "run": cfg["run"],
                        "field": cfg["field"]},
                       {"particles.csv": out_dir / "particles.csv"}))
    stages.append(("moments",
                   {"ell": plan.ell, "resolution": plan.moment_resolution},
                   {}))  # input file resolved lazily after simulate
    stages.append(("fit-decay",
                   {"window": list(plan.window), "column": plan.column}, {}))
    stages.append(("profile",
                   {"initial": cfg["initial"], "ell": plan.ell,
                    "window": list(plan.window),
                    "density_resolution": plan.density_resolution}, {}))
    if not oracle_mode:
        stages.append(("scatter", {"mode": plan.scatter_mode}, {}))

    order = [name for name, _, _ in stages]
    if until is not None and until not in order:
        raise PipelineError(f"unknown stage {until!r}; chain is "
                            f"{' -> '.join(order)}")

    def moments_input() -> tuple[Path, float]:
        if oracle_mode:
            return out_dir / "particles.csv", 0.0
        snaps = _snapshot_times(out_dir)
        if not snaps:
            raise PipelineError("moments stage found no snapshot files")
        return snaps[-1][1], snaps[-1][0]

    def window_snaps() -> list[tuple[float, Path]]:
        lo, hi = plan.window
        return [(t, p) for t, p in _snapshot_times(out_dir)
                if lo - 1e-9 <= t <= hi * (1 + 1e-9)]

    results = []
    for name, config_part, input_files in stages:
        if name == "moments":
            path, tval = moments_input()
            input_files = {path.name: path}
        elif name == "fit-decay":
            src = out_dir / ("oracle.csv" if oracle_mode else "series.csv")
            input_files = {src.name: src}
        elif name == "profile" and not oracle_mode:
            input_files = {p.name: p for _, p in window_snaps()}
        elif name == "scatter":
            input_files = {p.name: p for _, p in _snapshot_times(out_dir)}
        missing = [str(p) for p in input_files.values() if not p.exists()]
        if missing:
            raise PipelineError(f"stage {name}: missing inputs {missing}")
        digest = _inputs_digest(config_part, input_files)
        status = _stage_status(manifest, name, out_dir, digest)
        if status == "skip":
            results.append((name, "skipped"))
        else:
            started = time.time()
            try:
                if name == "construct":
                    files = _do_construct(ini, ini.nx, ini.nv, out_dir)
                elif name == "free-stream":
                    times = np.geomspace(plan.times[0], plan.times[1],
                                         plan.n_samples)
                    files = _do_free_stream(
                        ini, times, out_dir,
                        resolution=plan.density_resolution,
                        probe_resolution=probe_res or 21)
                elif name == "simulate":
                    species = _species_pair(ini.charge, ini.mass)
                    ens = read_snapshot_csv(out_dir / "particles.csv",
                                            species, rc.t_start).ensemble
                    files = _do_simulate(ens, rc, out_dir)
                elif name == "moments":
                    species = _species_pair(ini.charge, ini.mass)
                    files = _do_moments(path, species, plan.ell, out_dir,
                                        resolution=plan.moment_resolution,
                                        time_value=tval)
                elif name == "fit-decay":
                    fit, files = _do_fit(src, plan.column, plan.window,
                                         out_dir)
                    print(f"fit-decay: exponent {fit.exponent:.6f} "
                          f"+/- {fit.slope_stderr:.6f}")
                elif name == "profile":
                    files = _do_profile(ini, plan, out_dir,
                                        None if oracle_mode else window_snaps())
                elif name == "scatter":
                    files = _do_scatter(ini, plan.scatter_mode, out_dir,
                                        _snapshot_times(out_dir))
            except PipelineError:
                manifest.save(mpath)
                raise
            except Exception as exc:
                manifest.save(mpath)
                raise PipelineError(f"stage {name} failed: {exc}") from exc
            manifest.record_stage(name, files, time.time() - started, digest)
            manifest.save(mpath)
            results.append((name, "ran"))
        if until is not None and name == until:
            break
    manifest.save(mpath)
    return results


# ---------------------------------------------------------------------------
# subcommands


def _out_base(args) -> Path:
    base = Path(args.out_dir)
    base.mkdir(parents=True, exist_ok=True)
    return base


def _resolve(args, path: str) -> Path:
    p = Path(path)
    return p if p.is_absolute() else _out_base(args) / p


def cmd_construct(args) -> int:
    try:
        nx, nv = (int(v) for v in args.resolution.split(","))
    except ValueError:
        raise ConfigError(f"--resolution expects nx,nv, got {args.resolution!r}")
    ini = InitialDataSpec(preset=args.preset, m=args.m,
                          nx=max(nx, 8), nv=max(nv, 8))
    out = _resolve(args, args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    data = build_initial_data(ini)
    ens = sample(data, nx, nv)
    write_snapshot_csv(out, Snapshot.from_g_frame(0.0, ens))
    rows = _net_moment_rows(ens, args.m + 1)
    report = out.parent / "moments.csv"
    write_table_csv(report, MOMENTS_REPORT_HEADER, rows)
    worst = max(abs(r[3]) for r in rows if sum(r[:3]) < max(args.m, 1))
    print(f"construct: {ens.n_total} particles -> {out}")
    print(f"construct: moment report -> {report} "
          f"(largest vanishing-order residual {worst:.3e})")
    return 0


def cmd_free_stream(args) -> int:
    t0, t1 = (float(v) for v in args.times.split(".."))
    ini = InitialDataSpec(preset="gegenbauer", m=args.m)
    out = _resolve(args, args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    times = np.geomspace(t0, t1, args.samples)
    files = _do_free_stream(ini, times, out.parent,
                            resolution=args.res,
                            probe_resolution=args.probe_res or 21,
                            out_name=out.name)
    print(f"free-stream: {len(times)} times -> {out} "
          f"(checksum {files[out.name]})")
    return 0


def cmd_simulate(args) -> int:
    bundle = parse_config(Path(args.config).read_text())
    ini, rc, fc, plan = bundle
    if args.probe_res is not None:
        rc = dataclasses.replace(rc, probe_resolution=args.probe_res)
    out_dir = _resolve(args, args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    started = time.time()
    files = _do_simulate(ini, rc, out_dir)
    manifest = RunManifest(config=bundle.resolved, version=__version__)
    manifest.record_stage("simulate", files, time.time() - started)
    manifest.save(out_dir / "manifest.json")
    print(f"simulate: {len(files) - 1} snapshots + series.csv -> {out_dir}")
    return 0


def cmd_moments(args) -> int:
    snap_path = Path(args.snap)
    out = _resolve(args, args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    species = _species_from_file(snap_path)
    files = _do_moments(snap_path, species, args.ell, out.parent,
                        resolution=args.res, time_value=args.time,
                        stem=out.stem)
    for name in files:
        print(f"moments: order {args.ell} -> {out.parent / name}")
    return 0


def cmd_fit_decay(args) -> int:
    lo, hi = (float(v) for v in args.window.split(":"))
    series_path = Path(args.series)
    out = _resolve(args, args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    fit, _ = _do_fit(series_path, args.column, (lo, hi), out.parent, out.name)
    print(f"fit-decay: {args.column} ~ t^{fit.exponent:.6f} "
          f"+/- {fit.slope_stderr:.6f} over [{lo:g}, {hi:g}] "
          f"({fit.n_points} points, residual rms {fit.residual_rms:.3e})")
    return 0


def cmd_profile(args) -> int:
    run_dir = _resolve(args, args.run)
    manifest = RunManifest.load(run_dir / "manifest.json")
    ini = _spec_from_echo(manifest.config["initial"])
    diag = dict(manifest.config.get("diagnostics", {}))
    diag["ell"] = args.ell
    plan = DiagnosticsPlan(**{k: tuple(v) if isinstance(v, list) else v
                              for k, v in diag.items()})
    snaps = None
    if plan.source == "simulate":
        lo, hi = plan.window
        snaps = [(t, p) for t, p in _snapshot_times(run_dir)
                 if lo - 1e-9 <= t <= hi * (1 + 1e-9)]
    files = _do_profile(ini, plan, run_dir, snaps)
    print(f"profile: order {args.ell} gaps -> "
          f"{run_dir / 'profile_error.csv'} ({list(files)[0]})")
    return 0


def cmd_scatter(args) -> int:
    run_dir = _resolve(args, args.run)
    manifest = RunManifest.load(run_dir / "manifest.json")
    ini = _spec_from_echo(manifest.config["initial"])
    files = _do_scatter(ini, args.mode, run_dir, _snapshot_times(run_dir))
    data = read_table_csv(run_dir / "scatter.csv", SCATTER_HEADER)
    flagged = int(data[:, 3].sum())
    print(f"scatter ({args.mode}): {len(data)} pairs, "
          f"{flagged} below the noise floor -> {run_dir / 'scatter.csv'}")
    return 0


def cmd_pipeline(args) -> int:
    bundle = parse_config(Path(args.config).read_text())
    out_dir = _out_base(args)
    results = run_pipeline(bundle, out_dir, until=args.until,
                           probe_res=args.probe_res)
    for name, status in results:
        print(f"pipeline: {name}: {status}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="vpdecay",
        description="Two-species collisionless Coulomb runs and decay-rate "
                    "diagnostics.")
    ap.add_argument("--out-dir", default=".",
                    help="base directory for outputs (default: current dir)")
    ap.add_argument("--threads", type=int, default=1,
                    help="reserved; stages currently run single-threaded")
    ap.add_argument("--probe-res", type=int, default=None,
                    help="override field-probe grid resolution per axis")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("construct", help="sample initial data to CSV")
    p.add_argument("--m", type=int, default=1)
    p.add_argument("--preset", default="gegenbauer")
    p.add_argument("--resolution", default="8,8", metavar="NX,NV")
    p.add_argument("--out", default="particles.csv")
    p.set_defaults(func=cmd_construct)

    p = sub.add_parser("free-stream", help="noise-free transported sup norms")
    p.add_argument("--m", type=int, default=1)
    p.add_argument("--times", default="10..160", metavar="T0..T1")
    p.add_argument("--samples", type=int, default=12)
    p.add_argument("--res", type=int, default=48)
    p.add_argument("--out", default="oracle.csv")
    p.set_defaults(func=cmd_free_stream)

    p = sub.add_parser("simulate", help="run the particle dynamics")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default="run")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("moments", help="velocity-space moment tables")
    p.add_argument("--snap", required=True)
    p.add_argument("--ell", type=int, default=0)
    p.add_argument("--res", type=int, default=33)
    p.add_argument("--time", type=float, default=0.0)
    p.add_argument("--out", default="F.csv")
    p.set_defaults(func=cmd_moments)

    p = sub.add_parser("fit-decay", help="log-log power-law fit of a column")
    p.add_argument("--series", required=True)
    p.add_argument("--column", default="sup_E")
    p.add_argument("--window", default="10:160", metavar="LO:HI")
    p.add_argument("--out", default="fit.csv")
    p.set_defaults(func=cmd_fit_decay)

    p = sub.add_parser("profile", help="rescaled density vs limit profile")
    p.add_argument("--run", required=True)
    p.add_argument("--ell", type=int, default=1)
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("scatter", help="phase-density convergence defects")
    p.add_argument("--run", required=True)
    p.add_argument("--mode", choices=("linear", "modified"), default="linear")
    p.set_defaults(func=cmd_scatter)

    p = sub.add_parser("pipeline", help="run all stages with checksum skipping")
    p.add_argument("--config", required=True)
    p.add_argument("--until", default=None,
                   help="stop after this stage (a contiguous prefix)")
    p.set_defaults(func=cmd_pipeline)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return 2
    try:
        return int(args.func(args) or 0)
    except (ConfigError, PipelineError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
