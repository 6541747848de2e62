"""From measurement records to squeezing, depth and entangled fractions per photon number."""

from __future__ import annotations

import csv
import io
import json
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..criteria import (
    CriterionConfig,
    DepthVerdict,
    entangled_fraction,
    entanglement_depth,
    moments_to_dict,
    xi_parallel,
)
from ..curves import ZetaTable
from ..errors import SchemaError, UnphysicalMomentsError
from ..spin import PlanarMoments, SpinLabel, rotate_to_polarization_axis
from .estimate import bootstrap, conditional_covariance, fit_fid_segment, subtract_readout_noise
from .model import MeasurementRecord, RunMetadata, read_run

MIN_SHOTS = 3


@dataclass
class GroupResult:
    n_photons: float
    shots: int
    xi_sq: float | None
    sigma_xi: float | None
    polarization_per_atom: float
    readout_noise: float  # mean diagonal of Gamma_0
    gamma: list
    negative_eigenvalue: bool
    verdict: DepthVerdict | None
    fractions: dict = field(default_factory=dict)  # k -> f_{k+1}
    moments: PlanarMoments | None = None  # in the polarization frame

    def to_dict(self) -> dict:
        return {
            "n_photons": self.n_photons, "shots": self.shots, "xi_sq": self.xi_sq,
            "sigma_xi": self.sigma_xi, "polarization_per_atom": self.polarization_per_atom,
            "readout_noise": self.readout_noise, "gamma": self.gamma,
            "negative_eigenvalue": self.negative_eigenvalue,
            "verdict": self.verdict.to_dict() if self.verdict else None,
            "fractions": {str(k): v for k, v in sorted(self.fractions.items())},
            "moments": moments_to_dict(self.moments) if self.moments else None,
        }


@dataclass
class PipelineReport:
    groups: list
    k_max: int
    warnings: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"schema": "planarsq.pipeline_report", "schema_version": 1, "k_max": self.k_max,
                "groups": [g.to_dict() for g in self.groups], "warnings": self.warnings}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["N_L", "xi_sq", "depth"] + [f"f_{k + 1}" for k in range(1, self.k_max + 1)])
        for g in self.groups:
            depth = g.verdict.certified_depth if g.verdict else ""
            xi = "" if g.xi_sq is None else repr(g.xi_sq)
            w.writerow([repr(g.n_photons), xi, depth]
                       + [repr(g.fractions.get(k, 0.0)) for k in range(1, self.k_max + 1)])
        return buf.getvalue()


def estimate_pairs(records: list[MeasurementRecord], meta: RunMetadata):
    """Per-shot ``(J1, J2)`` from the segments before and after ``t_e``."""
    p = meta.params
    J1, J2 = [], []
    for r in sorted(records, key=lambda r: r.shot_id):
        (tp, yp), (tq, yq) = r.split(p.t_e)
        J1.append(fit_fid_segment(tp, yp, p).J)
        J2.append(fit_fid_segment(tq, yq, p).J)
    return np.array(J1), np.array(J2)


def _moments(J2_mean, gamma, meta: RunMetadata, sigma_xi=None) -> PlanarMoments:
    raw = PlanarMoments(
        mean_y=float(J2_mean[1]), mean_z=float(J2_mean[0]),
        var_y=float(gamma[1, 1]), var_z=float(gamma[0, 0]),
        mean_n=meta.n_atoms, spin=SpinLabel(meta.two_j), cov_yz=float(gamma[0, 1]),
        sigma_xi=sigma_xi,
    )
    return rotate_to_polarization_axis(raw)


def _xi_from(J1, J2, B1, B2) -> float:
    g = conditional_covariance(J1, J2) - conditional_covariance(B1, B2)
    return float(np.trace(g) / np.linalg.norm(J2.mean(axis=0)))


def analyze_group(atoms, background, config: CriterionConfig, table: ZetaTable,
                  n_boot: int = 500, seed: int = 0) -> GroupResult:
    recs, meta = atoms
    brecs, bmeta = background
    J1, J2 = estimate_pairs(recs, meta)
    B1, B2 = estimate_pairs(brecs, bmeta)
    gamma_0 = conditional_covariance(B1, B2)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        atomic = subtract_readout_noise(conditional_covariance(J1, J2), gamma_0)
    gamma = atomic.gamma
    mean = J2.mean(axis=0)
    pol = float(np.linalg.norm(mean))
    boots = bootstrap(_xi_from, [(J1, J2), (B1, B2)], n_boot, seed) if n_boot else np.array([])
    sigma = float(np.std(boots, ddof=1)) if boots.size > 1 else None
    xi = float(np.trace(gamma) / pol) if pol > 0 else None
    verdict, fractions, m = None, {}, None
    try:
        m = _moments(mean, gamma, meta, sigma)
        verdict = entanglement_depth(m, config, table)
        fractions = {k: entangled_fraction(m, k, table) for k in range(1, config.k_max + 1)
                     if SpinLabel(k * m.spin.two_j) in table}
        xi = xi_parallel(m)
    except UnphysicalMomentsError:
        pass  # negative variance after subtraction: reported without a verdict
    return GroupResult(meta.n_photons, len(recs), xi, sigma, pol / meta.n_atoms,
                       float(np.trace(gamma_0) / 2), gamma.tolist(), atomic.negative_eigenvalue,
                       verdict, fractions, m)


def analyze_run(groups, config: CriterionConfig, table: ZetaTable, n_boot: int = 500,
                seed: int = 0, threads: int | None = None) -> PipelineReport:
    """Analyze ``[(atoms, background), ...]`` where each is ``(records, meta)``.

    Groups with fewer than three shots are skipped with a warning.
    """
    if len(groups) < 2:
        raise ValueError("analysis needs at least two photon-number groups")
    notes, usable = [], []
    for atoms, bg in groups:
        if len(atoms[0]) < MIN_SHOTS or len(bg[0]) < MIN_SHOTS:
            notes.append(f"N_L={atoms[1].n_photons:g}: fewer than {MIN_SHOTS} shots, skipped")
            continue
        usable.append((atoms, bg))
    with ThreadPoolExecutor(max_workers=threads) as pool:
        results = list(pool.map(
            lambda ab: analyze_group(ab[0], ab[1], config, table, n_boot, seed), usable))
    results.sort(key=lambda g: g.n_photons)
    for g in results:
        if g.negative_eigenvalue:
            notes.append(f"N_L={g.n_photons:g}: negative eigenvalue after noise subtraction")
    return PipelineReport(results, config.k_max, notes)


def load_groups(directory) -> list:
    """Pair atom and background runs in a directory by photon number."""
    directory = Path(directory)
    runs = [read_run(p) for p in sorted(directory.glob("*.csv"))]
    if not runs:
        raise SchemaError(f"{directory}: no record CSV files found")
    atoms = {r[1].n_photons: r for r in runs if not r[1].background}
    bg = {r[1].n_photons: r for r in runs if r[1].background}
    missing = sorted(set(atoms) - set(bg))
    if missing:
        raise SchemaError(f"{directory}: no background run for N_L={missing[0]:g}")
    return [(atoms[n], bg[n]) for n in sorted(atoms)]
