"""Stable file formats: particle CSV, time-series CSV, checksums, manifests.

Every numeric value is written with 17 significant digits, which is enough
to round-trip IEEE doubles exactly, so a write/read cycle reproduces arrays
bit for bit and re-running a stage on unchanged inputs reproduces identical
output bytes.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._kernels import fnv1a64_bytes
from .core import ParticleEnsemble, Snapshot, Species

SNAPSHOT_HEADER = "species,x1,x2,x3,v1,v2,v3,weight"
SERIES_HEADER = "t,sup_rho,sup_E,monitor_A,g_diameter,total_charge"
_FMT = "%.17e"


def _fmt(x: float) -> str:
    return _FMT % float(x)


def fnv1a64(data: bytes) -> str:
    """64-bit FNV-1a hash of a byte string, as a fixed-width hex literal."""
    if len(data) >= 4096:
        h = int(fnv1a64_bytes(np.frombuffer(data, dtype=np.uint8)))
        return f"{h:016x}"
    h = 0xCBF29CE484222325
    for b in data:
        h ^= b
        h = (h * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return f"{h:016x}"


def checksum_file(path: str | Path) -> str:
    return fnv1a64(Path(path).read_bytes())


def write_snapshot_csv(path: str | Path, snapshot: Snapshot) -> None:
    """One row per particle, g-frame coordinates, species by integer id."""
    lines = [SNAPSHOT_HEADER]
    ens = snapshot.ensemble
    for si, (X, V, w) in enumerate(zip(ens.positions, ens.velocities, ens.weights)):
        for j in range(len(w)):
            row = [str(si)]
            row += [_fmt(v) for v in X[j]]
            row += [_fmt(v) for v in V[j]]
            row.append(_fmt(w[j]))
            lines.append(",".join(row))
    Path(path).write_text("\n".join(lines) + "\n")


def read_snapshot_csv(path: str | Path, species: tuple[Species, ...],
                      time_value: float = 0.0) -> Snapshot:
    text = Path(path).read_text().strip().split("\n")
    if text[0] != SNAPSHOT_HEADER:
        raise ValueError(f"{path}: unexpected snapshot header {text[0]!r}")
    per = [[] for _ in species]
    for ln, line in enumerate(text[1:], start=2):
        parts = line.split(",")
        if len(parts) != 8:
            raise ValueError(f"{path}:{ln}: expected 8 columns, got {len(parts)}")
        si = int(parts[0])
        if not 0 <= si < len(species):
            raise ValueError(f"{path}:{ln}: species id {si} out of range")
        per[si].append([float(v) for v in parts[1:]])
    Xs, Vs, ws = [], [], []
    for rows in per:
        arr = np.array(rows, dtype=float).reshape(-1, 7)
        Xs.append(arr[:, 0:3])
        Vs.append(arr[:, 3:6])
        ws.append(arr[:, 6])
    ens = ParticleEnsemble(species, tuple(Xs), tuple(Vs), tuple(ws))
    return Snapshot.from_g_frame(time_value, ens)


def write_table_csv(path: str | Path, header: str, rows) -> None:
    """Generic numeric table; every cell formatted with 17 significant digits."""
    lines = [header]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def read_table_csv(path: str | Path, expected_header: str | None = None) -> np.ndarray:
    text = Path(path).read_text().strip().split("\n")
    if expected_header is not None and text[0] != expected_header:
        raise ValueError(f"{path}: unexpected header {text[0]!r}")
    return np.array([[float(v) for v in line.split(",")] for line in text[1:]],
                    dtype=float)


@dataclass
class RunManifest:
    """Resolved configuration, code version, and per-stage output checksums."""

    config: dict
    version: str
    stages: dict = field(default_factory=dict)

    def record_stage(self, name: str, files: dict[str, str], wall_seconds: float,
                     inputs: str = "") -> None:
        self.stages[name] = {"files": files, "wall_seconds": wall_seconds,
                             "inputs": inputs,
                             "finished_at": time.strftime("%Y-%m-%dT%H:%M:%S")}

    def stage_files(self, name: str) -> dict[str, str]:
        return self.stages.get(name, {}).get("files", {})

    def stage_inputs(self, name: str) -> str:
        return self.stages.get(name, {}).get("inputs", "")

    def to_json(self) -> str:
        return json.dumps({"config": self.config, "version": self.version,
                           "stages": self.stages}, indent=2, sort_keys=True)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json() + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "RunManifest":
        data = json.loads(Path(path).read_text())
        return cls(config=data["config"], version=data["version"],
                   stages=data.get("stages", {}))


def stage_up_to_date(manifest: RunManifest, name: str, out_dir: Path) -> bool:
    """True when every file recorded for the stage exists with a matching checksum."""
    files = manifest.stage_files(name)
    if not files:
        return False
    for fname, digest in files.items():
        p = out_dir / fname
        if not p.exists() or checksum_file(p) != digest:
            return False
    return True
