"""Measurement-record types, the damped-precession signal model and file I/O.

Record files: one CSV per run with columns ``shot_id,t,theta,n,pulse_index``
and a JSON sidecar of the same stem holding the model parameters and run
metadata. Spin vectors are ordered ``(J_z, J_y)`` throughout this package.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..errors import SchemaError

RECORD_COLUMNS = ["shot_id", "t", "theta", "n", "pulse_index"]
SIDECAR_SCHEMA = "planarsq.record_run"
SIDECAR_VERSION = 1


@dataclass(frozen=True)
class FidModelParams:
    """Globals of the precession model ``theta(t)``.

    ``g`` in rad per spin unit, ``omega_L`` in rad/s, times in s.
    """

    g: float
    omega_L: float
    T2: float
    theta_0: float = 0.0
    t_e: float = 0.0

    def __post_init__(self):
        if not self.T2 > 0:
            raise ValueError("T2 must be positive")
        if self.g == 0 or not math.isfinite(self.g):
            raise ValueError("g must be finite and non-zero")

    def design(self, t) -> np.ndarray:
        """Rows ``d theta / d (J_z, J_y)`` at times ``t``."""
        tr = np.asarray(t, dtype=float) - self.t_e
        damp = self.g * np.exp(-tr / self.T2)
        phi = self.omega_L * tr
        return np.column_stack([damp * np.cos(phi), -damp * np.sin(phi)])

    def signal(self, t, J) -> np.ndarray:
        return self.design(t) @ np.asarray(J, dtype=float) + self.theta_0


@dataclass(frozen=True)
class MeasurementRecord:
    shot_id: int
    t: np.ndarray
    theta: np.ndarray
    n: float  # photons per pulse
    pulse_index: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        if t.ndim != 1 or t.size != np.asarray(self.theta).size:
            raise ValueError("t and theta must be equal-length vectors")
        if np.any(np.diff(t) <= 0):
            raise ValueError(f"shot {self.shot_id}: times must be strictly increasing")
        if not self.n > 0:
            raise ValueError(f"shot {self.shot_id}: photon number per pulse must be positive")

    def split(self, t_e: float):
        """Samples strictly before ``t_e`` and at/after it."""
        pre = self.t < t_e
        return (self.t[pre], self.theta[pre]), (self.t[~pre], self.theta[~pre])

    def photons_before(self, t_e: float) -> float:
        return self.n * int(np.sum(self.t < t_e))


@dataclass
class RunMetadata:
    params: FidModelParams
    n_atoms: float
    two_j: int
    n_photons: float  # N_L, photons before t_e
    background: bool = False
    readout_sigma: float | None = None
    label: str = ""
    truth: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "schema": SIDECAR_SCHEMA,
            "schema_version": SIDECAR_VERSION,
            "params": asdict(self.params),
            "n_atoms": self.n_atoms,
            "two_j": self.two_j,
            "n_photons": self.n_photons,
            "background": self.background,
            "readout_sigma": self.readout_sigma,
            "label": self.label,
            "truth": self.truth,
        }

    @classmethod
    def from_dict(cls, d: dict, where: str = "sidecar") -> "RunMetadata":
        if d.get("schema") != SIDECAR_SCHEMA:
            raise SchemaError(f"{where}: field 'schema' must be {SIDECAR_SCHEMA!r}")
        if d.get("schema_version") != SIDECAR_VERSION:
            raise SchemaError(f"{where}: unsupported schema_version {d.get('schema_version')!r}")
        try:
            params = FidModelParams(**d["params"])
            return cls(params, float(d["n_atoms"]), int(d["two_j"]), float(d["n_photons"]),
                       bool(d.get("background", False)), d.get("readout_sigma"),
                       str(d.get("label", "")), dict(d.get("truth", {})))
        except KeyError as exc:
            raise SchemaError(f"{where}: missing field {exc.args[0]!r}") from None
        except (TypeError, ValueError) as exc:
            raise SchemaError(f"{where}: {exc}") from None


def write_run(path_csv: Path, records: list[MeasurementRecord], meta: RunMetadata,
              force: bool = False) -> None:
    path_csv = Path(path_csv)
    side = path_csv.with_suffix(".json")
    for p in (path_csv, side):
        if p.exists() and not force:
            raise FileExistsError(f"{p} exists (use force to overwrite)")
    path_csv.parent.mkdir(parents=True, exist_ok=True)
    with open(path_csv, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RECORD_COLUMNS)
        for r in records:
            for t, th, k in zip(r.t, r.theta, r.pulse_index):
                w.writerow([r.shot_id, repr(float(t)), repr(float(th)), repr(float(r.n)), int(k)])
    side.write_text(json.dumps(meta.to_dict(), indent=1), encoding="utf-8")


def read_run(path_csv: Path) -> tuple[list[MeasurementRecord], RunMetadata]:
    path_csv = Path(path_csv)
    side = path_csv.with_suffix(".json")
    try:
        meta = RunMetadata.from_dict(json.loads(side.read_text(encoding="utf-8")), str(side))
    except FileNotFoundError:
        raise SchemaError(f"{path_csv}: missing sidecar {side.name}") from None
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{side}: line {exc.lineno}: {exc.msg}") from None
    rows: dict[int, list] = {}
    with open(path_csv, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != RECORD_COLUMNS:
            raise SchemaError(f"{path_csv}: line 1: expected header {','.join(RECORD_COLUMNS)}")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(RECORD_COLUMNS):
                raise SchemaError(f"{path_csv}: line {lineno}: expected 5 fields, got {len(row)}")
            try:
                sid, t, th, n, k = int(row[0]), float(row[1]), float(row[2]), float(row[3]), int(row[4])
            except ValueError as exc:
                raise SchemaError(f"{path_csv}: line {lineno}: {exc}") from None
            rows.setdefault(sid, []).append((t, th, n, k))
    records = []
    for sid in sorted(rows):
        arr = rows[sid]
        ns = {a[2] for a in arr}
        if len(ns) != 1:
            raise SchemaError(f"{path_csv}: shot {sid}: photon number per pulse varies")
        try:
            records.append(MeasurementRecord(
                sid, np.array([a[0] for a in arr]), np.array([a[1] for a in arr]),
                ns.pop(), np.array([a[3] for a in arr], dtype=int)))
        except ValueError as exc:
            raise SchemaError(f"{path_csv}: {exc}") from None
    return records, meta
