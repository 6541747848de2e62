"""Per-shot spin estimates and covariance estimators."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from ..errors import DimensionMismatchError, RankDeficientError, SingularCovarianceError
from .model import FidModelParams

COND_LIMIT = 1e12


@dataclass(frozen=True)
class SegmentFit:
    J: np.ndarray  # (J_z, J_y) at t_e
    covariance: np.ndarray  # estimator covariance for the supplied weights


def fit_fid_segment(t, theta, params: FidModelParams, sigma=None) -> SegmentFit:
    """Weighted least squares for ``(J_z, J_y)`` with the model globals fixed.

    ``sigma`` is the per-sample noise level (scalar or vector); without it the
    returned covariance is for unit noise.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(theta, dtype=float) - params.theta_0
    if t.shape != y.shape or t.ndim != 1:
        raise DimensionMismatchError("t and theta must be equal-length vectors")
    A = params.design(t)
    w = np.ones_like(t) if sigma is None else 1.0 / np.broadcast_to(np.asarray(sigma, float), t.shape) ** 2
    sw = np.sqrt(w)
    Aw = A * sw[:, None]
    if t.size < 2:
        raise RankDeficientError("segment needs at least two samples")
    s = np.linalg.svd(Aw, compute_uv=False)
    if s[-1] <= s[0] * 1e-10:
        raise RankDeficientError("design matrix is rank deficient (samples do not separate J_z and J_y)")
    J, *_ = np.linalg.lstsq(Aw, y * sw, rcond=None)
    cov = np.linalg.inv(Aw.T @ Aw)
    return SegmentFit(J, cov)


def _cov(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = a - a.mean(axis=0)
    b = b - b.mean(axis=0)
    return a.T @ b / (a.shape[0] - 1)


def conditional_covariance(J1, J2, ridge: float = 0.0) -> np.ndarray:
    """``Gamma_2 - Gamma_21 Gamma_1^{-1} Gamma_12`` from paired per-shot estimates.

    ``ridge`` (default off) adds ``ridge * trace(Gamma_1)/2`` to the diagonal
    of ``Gamma_1`` when it is ill-conditioned.
    """
    J1 = np.asarray(J1, dtype=float)
    J2 = np.asarray(J2, dtype=float)
    if J1.shape != J2.shape or J1.ndim != 2:
        raise DimensionMismatchError("J1 and J2 must be (shots, dim) arrays of equal shape")
    if J1.shape[0] < 3:
        raise ValueError("conditional covariance needs at least 3 shots")
    g1 = _cov(J1, J1)
    g2 = _cov(J2, J2)
    g21 = _cov(J2, J1)
    if ridge:
        g1 = g1 + ridge * np.trace(g1) / g1.shape[0] * np.eye(g1.shape[0])
    cond = np.linalg.cond(g1)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise SingularCovarianceError(
            f"Gamma_J1 is singular (condition number {cond:.3g}); pass ridge>0 to regularize"
        )
    out = g2 - g21 @ np.linalg.solve(g1, g21.T)
    return 0.5 * (out + out.T)


@dataclass(frozen=True)
class AtomicCovariance:
    gamma: np.ndarray
    negative_eigenvalue: bool


def subtract_readout_noise(gamma_cond, gamma_0) -> AtomicCovariance:
    """``Gamma_cond - Gamma_0`` without clamping; negative eigenvalues are flagged."""
    gc = np.asarray(gamma_cond, dtype=float)
    g0 = np.asarray(gamma_0, dtype=float)
    if gc.shape != g0.shape:
        raise DimensionMismatchError(f"shape mismatch {gc.shape} vs {g0.shape}")
    gamma = gc - g0
    neg = bool(np.linalg.eigvalsh(0.5 * (gamma + gamma.T)).min() < 0)
    if neg:
        warnings.warn("atomic covariance has a negative eigenvalue after noise subtraction",
                      RuntimeWarning, stacklevel=2)
    return AtomicCovariance(gamma, neg)


def bootstrap(statistic, arrays, n_resamples: int = 500, seed: int = 0) -> np.ndarray:
    """Shot bootstrap: ``statistic(*resampled)`` over independent index draws.

    ``arrays`` is a list of groups; each group is a tuple of arrays sharing
    the shot axis and is resampled with its own indices. The statistic gets
    the resampled arrays of all groups, flattened in order.
    """
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n_resamples):
        picked = []
        for group in arrays:
            n = group[0].shape[0]
            idx = rng.integers(0, n, n)
            picked.extend(a[idx] for a in group)
        try:
            out.append(statistic(*picked))
        except (SingularCovarianceError, np.linalg.LinAlgError):
            continue
    return np.array(out)


def calibrate_fid(records, params: FidModelParams, omega_grid, T2_grid, sigma=None):
    """Grid search over ``(omega_L, T2)`` with per-shot linear inner solves.

    The offset ``theta_0`` is fitted jointly as a shared linear parameter.
    Returns the best ``FidModelParams`` and the residual sum of squares.
    """
    best = None
    for om in np.asarray(omega_grid, dtype=float):
        for T2 in np.asarray(T2_grid, dtype=float):
            trial = FidModelParams(params.g, om, T2, 0.0, params.t_e)
            blocks, ys = [], []
            for r in records:
                blocks.append(trial.design(r.t))
                ys.append(r.theta)
            n = len(records)
            rows = sum(b.shape[0] for b in blocks)
            M = np.zeros((rows, 2 * n + 1))
            y = np.concatenate(ys)
            r0 = 0
            for i, b in enumerate(blocks):
                M[r0:r0 + b.shape[0], 2 * i:2 * i + 2] = b
                M[r0:r0 + b.shape[0], -1] = 1.0
                r0 += b.shape[0]
            coef, res, rank, _ = np.linalg.lstsq(M, y, rcond=None)
            rss = float(np.sum((M @ coef - y) ** 2))
            if best is None or rss < best[1]:
                best = (FidModelParams(params.g, om, T2, float(coef[-1]), params.t_e), rss)
    return best
