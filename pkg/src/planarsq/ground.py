"""Extremal eigenpairs of the Lagrangian Hamiltonians within one spin-J block.

Two parametrizations are used:

* the plain multiplier Hamiltonian ``L_y^2 + L_z^2 - lam L_y``, whose ground
  states trace the minimal planar variance at each polarization
  (``sweep_lambda``);
* the shifted form ``(L_y - s_y)^2 + (L_z - s_z)^2 - lam L_y`` whose minimum
  over the shifts is the Legendre transform of the planar variance
  (``solve_lagrangian`` and ``lagrangian_value``).

All matrices are assembled in the y-eigenbasis where they are real symmetric
pentadiagonal.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
from scipy.optimize import minimize, minimize_scalar

from .errors import ConvergenceError, EigenSolverError
from .spin import DENSE_MAX_DIM, SpinLabel, lz_offdiag

SOLVER_VERSION = "1.1"
SWEEP_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class SolverConfig:
    """Tolerances and grid parameters; every field has a documented default.

    ``lam_max`` of ``None`` means ``8 J + 4``.
    """

    dense_max_dim: int = DENSE_MAX_DIM
    residual_rtol: float = 1e-10
    degeneracy_rtol: float = 1e-10
    shift_tol: float = 1e-10
    max_rounds: int = 200
    lam_min: float = 1e-2
    lam_max: float | None = None
    n_geometric: int = 48
    dx_max: float = 0.01
    dv_max: float = 0.01
    chord_tol: float = 1e-6
    x_top: float = 1 - 1e-6
    max_samples: int = 4000
    zeta_rtol: float = 1e-7
    shift_grid: int = 33

    def lam_upper(self, spin: SpinLabel) -> float:
        return self.lam_max if self.lam_max is not None else 8 * spin.J + 4

    def digest(self) -> str:
        payload = json.dumps(dataclasses.asdict(self), sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


DEFAULT_CONFIG = SolverConfig()


@dataclass(frozen=True)
class LagrangianParams:
    lam: float
    s_y: float = 0.0
    s_z: float = 0.0


@dataclass(frozen=True)
class Pentadiagonal:
    """Symmetric matrix with bandwidth two: main, first and second diagonals."""

    d0: np.ndarray
    d1: np.ndarray
    d2: np.ndarray

    @property
    def dim(self) -> int:
        return self.d0.shape[0]

    def upper_band(self) -> np.ndarray:
        """LAPACK upper band storage (3, n)."""
        n = self.dim
        band = np.zeros((3, n))
        band[2] = self.d0
        band[1, 1:] = self.d1
        band[0, 2:] = self.d2
        return band

    def todense(self) -> np.ndarray:
        n = self.dim
        out = np.diag(self.d0)
        if n > 1:
            out += np.diag(self.d1, 1) + np.diag(self.d1, -1)
        if n > 2:
            out += np.diag(self.d2, 2) + np.diag(self.d2, -2)
        return out

    def matvec(self, v: np.ndarray) -> np.ndarray:
        out = self.d0 * v
        if self.dim > 1:
            out[:-1] += self.d1 * v[1:]
            out[1:] += self.d1 * v[:-1]
        if self.dim > 2:
            out[:-2] += self.d2 * v[2:]
            out[2:] += self.d2 * v[:-2]
        return out

    def norm_bound(self) -> float:
        """Infinity-norm upper bound on the spectral norm."""
        row = np.abs(self.d0).copy()
        if self.dim > 1:
            row[:-1] += np.abs(self.d1)
            row[1:] += np.abs(self.d1)
        if self.dim > 2:
            row[:-2] += np.abs(self.d2)
            row[2:] += np.abs(self.d2)
        return float(row.max())


def hamiltonian_bands(spin, params: LagrangianParams, y_weight: float = 1.0) -> Pentadiagonal:
    """Bands of ``y_weight (L_y - s_y)^2 + (L_z - s_z)^2 - lam L_y``.

    ``y_weight=0`` gives the single-variance Hamiltonian used for the
    Sørensen-Mølmer curve.
    """
    spin = SpinLabel.of(spin)
    m = spin.J - np.arange(spin.dim)
    e = lz_offdiag(spin)
    lz2_diag = np.zeros(spin.dim)
    lz2_diag[:-1] += e * e
    lz2_diag[1:] += e * e
    d0 = y_weight * (m - params.s_y) ** 2 + lz2_diag + params.s_z**2 - params.lam * m
    d1 = -2.0 * params.s_z * e
    d2 = e[:-1] * e[1:]
    return Pentadiagonal(d0, d1, d2)


def hamiltonian_matrix(spin, params: LagrangianParams, y_weight: float = 1.0) -> np.ndarray:
    """Dense form of :func:`hamiltonian_bands`."""
    return hamiltonian_bands(spin, params, y_weight).todense()


@dataclass(frozen=True)
class Eigenpairs:
    values: np.ndarray
    vectors: np.ndarray
    residual: float


def lowest_eigenpairs(matrix, count: int = 2, config: SolverConfig = DEFAULT_CONFIG) -> Eigenpairs:
    if isinstance(matrix, Pentadiagonal):
        n = matrix.dim
        count = min(count, n)
        if n <= config.dense_max_dim:
            values, vectors = la.eigh(matrix.todense(), subset_by_index=[0, count - 1])
        else:
            values, vectors = la.eig_banded(
                matrix.upper_band(), lower=False, select="i", select_range=(0, count - 1)
            )
        apply = matrix.matvec
        scale = matrix.norm_bound()
    else:
        matrix = np.asarray(matrix)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise ValueError("matrix must be square")
        if not np.allclose(matrix, matrix.conj().T, atol=1e-12 * max(1.0, np.abs(matrix).max())):
            raise ValueError("matrix must be symmetric")
        n = matrix.shape[0]
        count = min(count, n)
        values, vectors = la.eigh(matrix, subset_by_index=[0, count - 1])
        apply = matrix.__matmul__
        scale = float(np.abs(matrix).sum(axis=1).max())
    v0 = vectors[:, 0]
    residual = float(np.linalg.norm(apply(v0) - values[0] * v0))
    if residual > config.residual_rtol * max(scale, 1.0):
        raise EigenSolverError(
            f"lowest eigenpair residual {residual:.3e} exceeds {config.residual_rtol:.1e} * |H|",
            residual=residual,
        )
    return Eigenpairs(values, vectors, residual)


def extremal_eigenpair(matrix, config: SolverConfig = DEFAULT_CONFIG):
    """Minimal eigenvalue and a unit eigenvector of a real symmetric matrix."""
    pairs = lowest_eigenpairs(matrix, 1, config)
    return float(pairs.values[0]), pairs.vectors[:, 0]


@dataclass(frozen=True)
class GroundStateSolution:
    spin: SpinLabel
    params: LagrangianParams
    energy: float
    state: np.ndarray = field(repr=False)
    mean_y: float
    mean_z: float
    var_sum: float
    converged: bool = True
    iterations: int = 1
    degenerate: bool = False
    objective_trace: tuple = field(default=(), repr=False)

    @property
    def X(self) -> float:
        """Normalized polarization ``<L_y> / J``."""
        return self.mean_y / self.spin.J if self.spin.two_j else 0.0

    @property
    def value(self) -> float:
        """Planar variance per unit spin, ``var_sum / J``."""
        return self.var_sum / self.spin.J


def _block_moments(spin: SpinLabel, v: np.ndarray, y_weight: float = 1.0):
    m = spin.J - np.arange(spin.dim)
    e = lz_offdiag(spin)
    p = v * v
    mean_y = float(p @ m)
    lz_v = np.zeros_like(v)
    lz_v[:-1] += e * v[1:]
    lz_v[1:] += e * v[:-1]
    mean_z = float(v @ lz_v)
    var_y = max(float(p @ (m * m)) - mean_y**2, 0.0)
    var_z = max(float(lz_v @ lz_v) - mean_z**2, 0.0)
    return mean_y, mean_z, var_y, var_z


def _pick_ground(spin: SpinLabel, pairs: Eigenpairs, config: SolverConfig):
    """Ground vector, breaking degeneracy toward the largest ``<L_y>``."""
    values, vectors = pairs.values, pairs.vectors
    tol = config.degeneracy_rtol * max(1.0, abs(values[0]), spin.J**2)
    cluster = int(np.sum(values - values[0] <= tol))
    if cluster == 1:
        return vectors[:, 0], False
    sub = vectors[:, :cluster]
    m = spin.J - np.arange(spin.dim)
    ly_sub = sub.T @ (m[:, None] * sub)
    w, u = np.linalg.eigh(0.5 * (ly_sub + ly_sub.T))
    v = sub @ u[:, -1]
    v /= np.linalg.norm(v)
    return v, True


def _canonical_sign(v: np.ndarray) -> np.ndarray:
    k = int(np.argmax(np.abs(v)))
    return -v if v[k] < 0 else v


def ground_state(spin, params: LagrangianParams, config: SolverConfig = DEFAULT_CONFIG,
                 y_weight: float = 1.0) -> GroundStateSolution:
    """Lowest eigenstate of the (shifted) Lagrangian Hamiltonian at fixed parameters."""
    spin = SpinLabel.of(spin)
    bands = hamiltonian_bands(spin, params, y_weight)
    count = 3 if spin.dim >= 3 else spin.dim
    pairs = lowest_eigenpairs(bands, count, config)
    v, degenerate = _pick_ground(spin, pairs, config)
    v = _canonical_sign(v)
    mean_y, mean_z, var_y, var_z = _block_moments(spin, v)
    return GroundStateSolution(
        spin=spin,
        params=params,
        energy=float(v @ bands.matvec(v)),
        state=v,
        mean_y=mean_y,
        mean_z=mean_z,
        var_sum=var_y + var_z,
        degenerate=degenerate,
    )


def _joint_objective(sol: GroundStateSolution) -> float:
    # <H_{s,lam}> with s at its optimal value <L> equals var_sum - lam <L_y>
    return sol.var_sum - sol.params.lam * sol.mean_y


def solve_lagrangian(spin, lam: float, config: SolverConfig = DEFAULT_CONFIG,
                     s_init: tuple[float, float] = (0.0, 0.0)) -> GroundStateSolution:
    """Self-consistent minimum of the shifted Hamiltonian at multiplier ``lam``.

    Coordinate descent alternates an eigensolve at fixed shifts with the shift
    update ``s <- (<L_y>, <L_z>)``. Both half-steps cannot increase the joint
    objective ``<(L_y-s_y)^2 + (L_z-s_z)^2> - lam <L_y>``. When the fixed point
    is not reached within ``max_rounds`` a Nelder-Mead search over the shifts
    takes over; if that also fails the best solution seen is returned with
    ``converged=False``.
    """
    spin = SpinLabel.of(spin)
    if not math.isfinite(lam):
        raise ValueError("lam must be finite")
    s = np.array(s_init, dtype=float)
    trace = []
    best = None
    for rounds in range(1, config.max_rounds + 1):
        sol = ground_state(spin, LagrangianParams(lam, s[0], s[1]), config)
        trace.append(sol.energy)  # objective after the eigen half-step
        s_new = np.array([sol.mean_y, sol.mean_z])
        trace.append(_joint_objective(sol))  # after the shift half-step
        if best is None or trace[-1] < _joint_objective(best):
            best = sol
        step = float(np.max(np.abs(s_new - s)))
        s = s_new
        if step < config.shift_tol:
            final = ground_state(spin, LagrangianParams(lam, s[0], s[1]), config)
            return dataclasses.replace(
                final, converged=True, iterations=rounds, objective_trace=tuple(trace)
            )
    fallback = _simplex_fallback(spin, lam, s, config)
    if fallback is not None and _joint_objective(fallback) <= _joint_objective(best) + 1e-12:
        return dataclasses.replace(
            fallback, iterations=config.max_rounds + fallback.iterations,
            objective_trace=tuple(trace),
        )
    return dataclasses.replace(
        best, converged=False, iterations=config.max_rounds, objective_trace=tuple(trace)
    )


def _simplex_fallback(spin, lam, s0, config):
    def energy(s):
        bands = hamiltonian_bands(spin, LagrangianParams(lam, s[0], s[1]))
        return float(lowest_eigenpairs(bands, 1, config).values[0])

    scale = max(spin.J, 1.0)
    res = minimize(
        energy, s0, method="Nelder-Mead",
        options=dict(xatol=config.shift_tol * scale, fatol=1e-15 * scale**2, maxiter=4000,
                     initial_simplex=[s0, s0 + [0.05 * scale, 0], s0 + [0, 0.05 * scale]]),
    )
    sol = ground_state(spin, LagrangianParams(lam, res.x[0], res.x[1]), config)
    fixed = max(abs(sol.mean_y - res.x[0]), abs(sol.mean_z - res.x[1]))
    return dataclasses.replace(sol, converged=bool(fixed < 1e-6 * scale), iterations=res.nit)


def lagrangian_value(spin, lam: float, config: SolverConfig = DEFAULT_CONFIG):
    """Legendre transform ``min_phi [var_sum - lam <L_y>]`` for ``lam >= 0``.

    Evaluated through the shifted eigenvalue problem: for ``lam >= 0`` the
    optimal state can be rotated so its polarization lies along +y, hence
    ``s_z = 0`` and only ``s_y`` in ``[0, J]`` is searched, on a grid followed
    by a bounded scalar polish. Returns ``(value, solution)``.
    """
    spin = SpinLabel.of(spin)
    if lam < 0:
        raise ValueError("lagrangian_value is defined here for lam >= 0")
    if spin.two_j == 0:
        sol = ground_state(spin, LagrangianParams(lam), config)
        return 0.0, sol
    J = spin.J

    def e0(sy):
        bands = hamiltonian_bands(spin, LagrangianParams(lam, sy, 0.0))
        return float(lowest_eigenpairs(bands, 1, config).values[0])

    grid = np.linspace(0.0, J, config.shift_grid)
    vals = np.array([e0(s) for s in grid])
    i = int(np.argmin(vals))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    res = minimize_scalar(e0, bounds=(lo, hi), method="bounded",
                          options=dict(xatol=1e-13 * max(J, 1.0)))
    s_best, e_best = (res.x, res.fun) if res.fun <= vals[i] else (grid[i], vals[i])
    sol = ground_state(spin, LagrangianParams(lam, s_best, 0.0), config)
    return float(e_best), sol


@dataclass(frozen=True)
class SweepResult:
    """Ground states of ``L_y^2 + L_z^2 - lam L_y`` over a multiplier grid.

    Samples are sorted by ``lam``; along that order the polarization is
    non-decreasing (the ground-state energy is concave in ``lam`` and
    ``<L_y>`` is minus its slope).
    """

    spin: SpinLabel
    samples: tuple
    config: SolverConfig

    @property
    def lams(self) -> np.ndarray:
        return np.array([s.params.lam for s in self.samples])

    @property
    def X(self) -> np.ndarray:
        return np.array([s.X for s in self.samples])

    @property
    def values(self) -> np.ndarray:
        return np.array([s.value for s in self.samples])

    def legendre_values(self, lams=None) -> list[tuple[float, float]]:
        """Pairs ``(lam, L(lam))`` with ``L(lam) = min_i [value_i - lam X_i]``."""
        lams = self.lams if lams is None else np.asarray(lams, dtype=float)
        X, v = self.X, self.values
        return [(float(l), float(np.min(v - l * X))) for l in lams]

    def to_dict(self) -> dict:
        return {
            "schema": "planarsq.sweep",
            "schema_version": SWEEP_SCHEMA_VERSION,
            "solver_version": SOLVER_VERSION,
            "spin": str(self.spin),
            "grid": dataclasses.asdict(self.config),
            "samples": [
                {"lambda": s.params.lam, "X": s.X, "var_sum": s.var_sum,
                 "mean_z": s.mean_z, "converged": s.converged}
                for s in self.samples
            ],
        }


def _lam_grid(spin: SpinLabel, config: SolverConfig) -> np.ndarray:
    top = config.lam_upper(spin)
    return np.concatenate([[0.0], np.geomspace(config.lam_min, top, config.n_geometric)])


def _midpoint(a: float, b: float) -> float:
    return math.sqrt(a * b) if a > 0 else 0.5 * (a + b)


def sweep_lambda(spin, config: SolverConfig = DEFAULT_CONFIG) -> SweepResult:
    """Sample the ground-state curve with adaptive refinement.

    The grid is extended past ``lam_upper`` by doubling until the polarization
    exceeds ``x_top``. A midpoint multiplier is then inserted wherever
    consecutive samples differ by more than ``dx_max`` in ``X`` or ``dv_max``
    in ``var_sum / J``, or where the chord between them may deviate from the
    curve by more than ``chord_tol`` (estimated from the tangent slopes
    ``lam - 2 J X``).
    """
    spin = SpinLabel.of(spin)
    if spin.two_j == 0:
        raise ValueError("spin-0 block has no polarization curve")
    solve = lambda lam: ground_state(spin, LagrangianParams(lam), config)
    samples = [solve(l) for l in _lam_grid(spin, config)]
    while samples[-1].X < config.x_top and len(samples) < config.max_samples:
        samples.append(solve(2 * samples[-1].params.lam))
    slope = lambda s: s.params.lam - 2 * spin.J * s.X

    def coarse(a, b):
        dx = abs(b.X - a.X)
        return (dx > config.dx_max or abs(b.value - a.value) > config.dv_max
                or dx * abs(slope(b) - slope(a)) > 4 * config.chord_tol)

    min_gap = 1e-12 * config.lam_upper(spin)
    changed = True
    while changed and len(samples) < config.max_samples:
        changed = False
        refined = [samples[0]]
        for a, b in zip(samples, samples[1:]):
            if b.params.lam - a.params.lam > min_gap and coarse(a, b):
                refined.append(solve(_midpoint(a.params.lam, b.params.lam)))
                changed = True
            refined.append(b)
        samples = refined
    return SweepResult(spin=spin, samples=tuple(samples), config=config)


def sm_ground_state(spin, lam: float, config: SolverConfig = DEFAULT_CONFIG) -> GroundStateSolution:
    """Minimizer of ``(Delta L_z)^2 - lam <L_y>`` over spin-J states.

    The shift ``s_z`` is searched over ``[0, J]`` (the energy is even in it);
    the returned solution carries ``var_sum`` equal to the z-variance alone.
    """
    spin = SpinLabel.of(spin)
    J = spin.J

    def e0(sz):
        bands = hamiltonian_bands(spin, LagrangianParams(lam, 0.0, sz), y_weight=0.0)
        return float(lowest_eigenpairs(bands, 1, config).values[0])

    grid = np.linspace(0.0, J, config.shift_grid)
    vals = np.array([e0(s) for s in grid])
    i = int(np.argmin(vals))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    res = minimize_scalar(e0, bounds=(lo, hi), method="bounded",
                          options=dict(xatol=1e-13 * max(J, 1.0)))
    sz = res.x if res.fun <= vals[i] else grid[i]
    bands = hamiltonian_bands(spin, LagrangianParams(lam, 0.0, sz), y_weight=0.0)
    count = 3 if spin.dim >= 3 else spin.dim
    pairs = lowest_eigenpairs(bands, count, config)
    v, degenerate = _pick_ground(spin, pairs, config)
    v = _canonical_sign(v)
    mean_y, mean_z, _, var_z = _block_moments(spin, v)
    return GroundStateSolution(
        spin=spin, params=LagrangianParams(lam, 0.0, float(sz)), energy=float(v @ bands.matvec(v)),
        state=v, mean_y=mean_y, mean_z=mean_z, var_sum=var_z, degenerate=degenerate,
    )


def require_converged(solutions) -> None:
    bad = [i for i, s in enumerate(solutions) if not s.converged]
    if bad:
        raise ConvergenceError(f"solver did not converge at sample indices {bad}")
