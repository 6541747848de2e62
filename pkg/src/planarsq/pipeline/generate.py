"""Synthetic measurement runs following the phenomenological QND model.

Per photon number ``N_L`` (photons before the estimation time):

* conditional variance of each planar component
  ``V = (N j / 2) [1 / (1 + kappa N_L) + eps N_L]``, with ``kappa = g^2 N``;
* unconditional variance ``(N j / 2)(1 + eps N_L)``;
* polarization ``N j exp(-eta N_L)``.

``kappa`` and ``eps`` are calibrated so that ``xi^2`` has its minimum value
``xi_min`` at ``N_L = n_opt``; ``eta`` so that the polarization there is
``coherence`` times ``N j``. The numbers are synthetic stand-ins for
unpublished experimental constants.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .model import FidModelParams, MeasurementRecord, RunMetadata


@dataclass(frozen=True)
class NoiseModel:
    kappa: float
    eps: float
    eta: float

    @classmethod
    def calibrated(cls, xi_min: float, n_opt: float, coherence: float) -> "NoiseModel":
        """Closed-form constants placing the minimum of ``xi^2`` at ``n_opt``."""
        if not 0 < coherence <= 1:
            raise ValueError("coherence must be in (0, 1]")
        eta = -math.log(coherence) / n_opt
        f = xi_min * coherence
        disc = 1 - f * (1 + eta * n_opt)
        if disc <= 0:
            raise ValueError("xi_min too large for an interior minimum")
        a = 1 - math.sqrt(disc)  # 1 / (1 + kappa n_opt)
        kappa = (1 / a - 1) / n_opt
        eps = (f - a) / n_opt
        if eps < 0:
            raise ValueError("calibration gives negative excess noise")
        return cls(kappa, eps, eta)

    def conditional_variance(self, nj: float, n_l: float) -> float:
        return 0.5 * nj * (1 / (1 + self.kappa * n_l) + self.eps * n_l)

    def prior_variance(self, nj: float, n_l: float) -> float:
        return 0.5 * nj * (1 + self.eps * n_l)

    def polarization(self, nj: float, n_l: float) -> float:
        return nj * math.exp(-self.eta * n_l)

    def xi_sq(self, n_l: float) -> float:
        return 2 * self.conditional_variance(1.0, n_l) / self.polarization(1.0, n_l)


@dataclass(frozen=True)
class SyntheticConfig:
    n_atoms: float = 1.75e6
    two_j: int = 2
    photon_numbers: tuple = (5e7, 1e8, 1.5e8, 2e8, 2.47e8, 3e8, 4e8, 5e8, 6e8)
    shots: int = 453
    background_shots: int = 453
    samples_pre: int = 100
    samples_post: int = 100
    dt: float = 5e-6
    omega_L: float = 2 * math.pi * 2e4
    T2: float = 0.02
    theta_0: float = 1e-3
    readout_sigma: float = 1e-4
    xi_min: float = 0.32
    n_opt: float = 2.47e8
    coherence: float = 0.83
    frame_angle: float = 0.0
    match_moments: bool = False
    seed: int = 0
    noise: NoiseModel | None = None  # overrides the calibration when set

    def __post_init__(self):
        if self.shots < 3 or self.background_shots < 3:
            raise ValueError("need at least 3 shots per run")
        if self.samples_pre < 2 or self.samples_post < 2:
            raise ValueError("each segment needs at least 2 samples")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if any(not n > 0 for n in self.photon_numbers):
            raise ValueError("photon numbers must be positive")
        if self.readout_sigma < 0:
            raise ValueError("readout_sigma must be non-negative")
        if self.match_moments and (self.shots <= 8 or self.background_shots <= 4):
            raise ValueError("match_moments needs more than 8 shots (4 for background)")

    @property
    def nj(self) -> float:
        return self.n_atoms * self.two_j / 2

    def noise_model(self) -> NoiseModel:
        return self.noise or NoiseModel.calibrated(self.xi_min, self.n_opt, self.coherence)

    def fid_params(self) -> FidModelParams:
        kappa = self.noise_model().kappa
        g = math.sqrt(kappa / self.n_atoms) if kappa > 0 else 1e-7
        return FidModelParams(g=g, omega_L=self.omega_L, T2=self.T2, theta_0=self.theta_0, t_e=0.0)

    def times(self) -> tuple[np.ndarray, np.ndarray]:
        pre = -self.dt * np.arange(self.samples_pre, 0, -1)
        post = self.dt * np.arange(self.samples_post)
        return pre, post

    def to_dict(self) -> dict:
        d = asdict(self)
        d["photon_numbers"] = list(self.photon_numbers)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SyntheticConfig":
        d = dict(d)
        if "photon_numbers" in d:
            d["photon_numbers"] = tuple(float(x) for x in d["photon_numbers"])
        if d.get("noise") is not None:
            d["noise"] = NoiseModel(**d["noise"])
        unknown = set(d) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        return cls(**d)


def _sqrtm_psd(m: np.ndarray) -> np.ndarray:
    w, u = np.linalg.eigh(0.5 * (m + m.T))
    if w.min() < -1e-9 * max(1.0, abs(w).max()):
        raise ValueError("covariance is not positive semidefinite")
    return u @ np.diag(np.sqrt(np.clip(w, 0, None))) @ u.T


def _whiten(w: np.ndarray) -> np.ndarray:
    """Shift and transform rows so their sample mean is 0 and covariance I."""
    w = w - w.mean(axis=0)
    cov = np.cov(w, rowvar=False)
    L = np.linalg.cholesky(cov)
    return np.linalg.solve(L, w.T).T


def _readout_cov(design: np.ndarray, sigma: float) -> np.ndarray:
    return sigma**2 * np.linalg.inv(design.T @ design)


@dataclass(frozen=True)
class SyntheticRun:
    n_photons: float
    records: list
    meta: RunMetadata
    background: list = field(default_factory=list)
    background_meta: RunMetadata | None = None


def _emit(rng, cfg, params, A, J_est, n_pp, base_id, times, sigma):
    """theta records whose least-squares estimates are ``J_est`` plus white out-of-span noise."""
    t_all = np.concatenate(times)
    records = []
    for s, (Jpre, Jpost) in enumerate(J_est):
        thetas = []
        for seg, Jseg in zip(A, (Jpre, Jpost)):
            eps = rng.normal(0.0, sigma, seg.shape[0]) if sigma > 0 else np.zeros(seg.shape[0])
            proj = seg @ np.linalg.lstsq(seg, eps, rcond=None)[0]
            thetas.append(seg @ Jseg + params.theta_0 + (eps - proj))
        records.append(MeasurementRecord(base_id + s, t_all, np.concatenate(thetas), n_pp,
                                         np.arange(t_all.size)))
    return records


def generate_synthetic_run(cfg: SyntheticConfig) -> list[SyntheticRun]:
    """One atom run and one background run per photon number; deterministic in ``seed``.

    Each group uses its own child generator spawned from the seed, so groups
    can be produced independently and in any order.
    """
    params = cfg.fid_params()
    noise = cfg.noise_model()
    pre_t, post_t = cfg.times()
    A = (params.design(pre_t), params.design(post_t))
    G0_pre, G0_post = (_readout_cov(a, cfg.readout_sigma) for a in A)
    c, s = math.cos(cfg.frame_angle), math.sin(cfg.frame_angle)
    rot = np.array([[c, s], [-s, c]])  # (J_z, J_y) frame rotation
    children = np.random.SeedSequence(cfg.seed).spawn(len(cfg.photon_numbers))
    runs = []
    for gi, (n_l, child) in enumerate(zip(cfg.photon_numbers, children)):
        rng = np.random.default_rng(child)
        V = noise.conditional_variance(cfg.nj, n_l)
        prior = noise.prior_variance(cfg.nj, n_l)
        P = noise.polarization(cfg.nj, n_l)
        mean = rot @ np.array([0.0, P])
        # first estimate: J + e1 + readout, with Var(e1 + readout) = c1 I
        c1 = V * prior / (prior - V) if prior > V else math.inf
        e1_cov = c1 * np.eye(2) - G0_pre if math.isfinite(c1) else None
        if e1_cov is not None and np.linalg.eigvalsh(e1_cov).min() < 0:
            raise ValueError(f"readout noise too large for N_L={n_l:g}: pre-segment covariance exceeds c1")
        shots = cfg.shots
        w = rng.standard_normal((shots, 8))
        if cfg.match_moments:
            w = _whiten(w)
        J = mean + math.sqrt(prior) * w[:, 0:2] @ rot.T
        e1 = w[:, 2:4] @ _sqrtm_psd(e1_cov).T if e1_cov is not None else np.zeros((shots, 2))
        r_pre = w[:, 4:6] @ _sqrtm_psd(G0_pre).T
        r_post = w[:, 6:8] @ _sqrtm_psd(G0_post).T
        if e1_cov is None:  # no squeezing: the first estimate carries no information on J
            J1 = mean + math.sqrt(prior) * w[:, 2:4] + r_pre
        else:
            J1 = J + e1 + r_pre
        J2 = J + r_post
        n_pp = n_l / cfg.samples_pre
        recs = _emit(rng, cfg, params, A, zip(J1, J2), n_pp, 0, (pre_t, post_t), cfg.readout_sigma)
        truth = {"V": V, "prior_variance": prior, "polarization": P, "xi_sq": 2 * V / P,
                 "mean_z": float(mean[0]), "mean_y": float(mean[1])}
        meta = RunMetadata(params, cfg.n_atoms, cfg.two_j, n_l, False, cfg.readout_sigma,
                           f"group{gi}", truth)
        bw = rng.standard_normal((cfg.background_shots, 4))
        if cfg.match_moments:
            bw = _whiten(bw)
        b1 = bw[:, 0:2] @ _sqrtm_psd(G0_pre).T
        b2 = bw[:, 2:4] @ _sqrtm_psd(G0_post).T
        bg = _emit(rng, cfg, params, A, zip(b1, b2), n_pp, 0, (pre_t, post_t), cfg.readout_sigma)
        bmeta = replace(meta, background=True, truth={"gamma_0": G0_post.tolist()})
        runs.append(SyntheticRun(n_l, recs, meta, bg, bmeta))
    return runs
