"""Angular-momentum matrices for a single spin-J block and planar moments.

Conventions
-----------
The default basis is the eigenbasis of ``L_y`` ordered ``m_y = J, J-1, ..., -J``.
In that basis ``L_y`` is diagonal, ``L_z`` is real symmetric tridiagonal and
``L_x`` is purely imaginary, so every Hamiltonian built from ``L_y`` and
``L_z`` is real symmetric with bandwidth two.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp

from .errors import DimensionMismatchError, UnphysicalMomentsError, ZeroPolarizationError

DENSE_MAX_DIM = 512

Y_BASIS = "y-eigenbasis"
Z_BASIS = "z-eigenbasis"


@dataclass(frozen=True, order=True)
class SpinLabel:
    """Spin quantum number stored as ``two_j`` so half-integers are exact."""

    two_j: int

    def __post_init__(self):
        if int(self.two_j) != self.two_j or self.two_j < 0:
            raise ValueError(f"two_j must be a non-negative integer, got {self.two_j!r}")
        object.__setattr__(self, "two_j", int(self.two_j))

    @property
    def J(self) -> float:
        return self.two_j / 2

    @property
    def dim(self) -> int:
        return self.two_j + 1

    @property
    def is_integer(self) -> bool:
        return self.two_j % 2 == 0

    @classmethod
    def of(cls, value) -> "SpinLabel":
        """Build from ``1``, ``0.5``, ``"3/2"``, ``Fraction(3, 2)`` or an existing label."""
        if isinstance(value, SpinLabel):
            return value
        frac = Fraction(str(value).strip()) if isinstance(value, str) else Fraction(value)
        twice = 2 * frac
        if twice.denominator != 1:
            raise ValueError(f"{value!r} is not an integer or half-integer spin")
        return cls(int(twice))

    def __str__(self) -> str:
        return str(self.two_j // 2) if self.is_integer else f"{self.two_j}/2"


def _ladder_offdiag(spin: SpinLabel) -> np.ndarray:
    """Matrix elements <m+1|L_+|m> for m = -J ... J-1, in descending-m order."""
    J = spin.J
    m = J - np.arange(1, spin.dim)  # lower state of each adjacent pair
    return np.sqrt(np.maximum(J * (J + 1) - m * (m + 1), 0.0))


def lz_offdiag(spin: SpinLabel) -> np.ndarray:
    """Off-diagonal of ``L_z`` in the y-eigenbasis (length ``dim - 1``)."""
    return 0.5 * _ladder_offdiag(spin)


@dataclass(frozen=True)
class SpinOperatorSet:
    spin: SpinLabel
    basis: str
    Lx: object
    Ly: object
    Lz: object
    Ly2: object
    Lz2: object

    @property
    def dimension(self) -> int:
        return self.spin.dim

    @property
    def is_sparse(self) -> bool:
        return sp.issparse(self.Ly)

    def as_dense(self) -> "SpinOperatorSet":
        if not self.is_sparse:
            return self
        conv = {k: getattr(self, k).toarray() for k in ("Lx", "Ly", "Lz", "Ly2", "Lz2")}
        return replace(self, **conv)


def build_operators(spin, basis: str = Y_BASIS, dense: bool | None = None) -> SpinOperatorSet:
    """Spin-J component matrices (hbar = 1).

    Blocks with more than ``DENSE_MAX_DIM`` states are returned as sparse
    CSR matrices unless ``dense=True``.
    """
    spin = SpinLabel.of(spin)
    if basis not in (Y_BASIS, Z_BASIS):
        raise ValueError(f"unknown basis {basis!r}")
    if dense is None:
        dense = spin.dim <= DENSE_MAX_DIM
    m = spin.J - np.arange(spin.dim)
    raise_ = sp.diags(_ladder_offdiag(spin), 1, shape=(spin.dim, spin.dim), format="csr")
    lower = raise_.T.tocsr()
    diag = sp.diags(m, 0, format="csr")
    real_part = 0.5 * (raise_ + lower)
    imag_part = (-0.5j) * (raise_ - lower)
    if basis == Y_BASIS:
        # cyclic relabelling (z, x, y) -> (y, z, x) keeps the commutators intact
        Ly, Lz, Lx = diag.astype(float), real_part.astype(float), imag_part
    else:
        Lz, Lx, Ly = diag.astype(float), real_part.astype(float), imag_part
    # squares of the real-symmetric or purely imaginary components are real
    mats = dict(Lx=Lx, Ly=Ly, Lz=Lz, Ly2=(Ly @ Ly).real.tocsr(), Lz2=(Lz @ Lz).real.tocsr())
    if dense:
        mats = {k: v.toarray() for k, v in mats.items()}
    return SpinOperatorSet(spin=spin, basis=basis, **mats)


def basis_state(spin, m_index: int) -> np.ndarray:
    """Unit vector for the ``m_index``-th basis state (0 is ``m = +J``)."""
    spin = SpinLabel.of(spin)
    v = np.zeros(spin.dim)
    v[m_index] = 1.0
    return v


class BlockMoments(NamedTuple):
    mean_y: float
    mean_z: float
    var_y: float
    var_z: float


def _expect(op, state):
    return np.vdot(state, op @ state).real


def moments_of(state, ops: SpinOperatorSet) -> BlockMoments:
    """First and second moments of ``L_y``, ``L_z`` in a normalized pure state."""
    state = np.asarray(state)
    if state.ndim != 1 or state.shape[0] != ops.dimension:
        raise DimensionMismatchError(
            f"state has shape {state.shape}, operators have dimension {ops.dimension}"
        )
    norm = np.vdot(state, state).real
    if abs(norm - 1.0) > 1e-12:
        raise ValueError(f"state is not normalized (norm^2 = {norm!r})")
    my = _expect(ops.Ly, state)
    mz = _expect(ops.Lz, state)
    vy = max(_expect(ops.Ly2, state) - my * my, 0.0)
    vz = max(_expect(ops.Lz2, state) - mz * mz, 0.0)
    return BlockMoments(my, mz, vy, vz)


@dataclass(frozen=True)
class PlanarMoments:
    """Collective in-plane spin data: means, variances and the average atom number.

    ``cov_yz`` is the symmetrized in-plane covariance, ``sigma_xi`` an optional
    one-sigma uncertainty on the planar squeezing parameter.
    """

    mean_y: float
    mean_z: float
    var_y: float
    var_z: float
    mean_n: float
    spin: SpinLabel = field(default_factory=lambda: SpinLabel(2))
    cov_yz: float = 0.0
    sigma_xi: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "spin", SpinLabel.of(self.spin))
        if not self.mean_n > 0:
            raise UnphysicalMomentsError(f"mean_n must be positive, got {self.mean_n}")
        if self.var_y < 0 or self.var_z < 0:
            raise UnphysicalMomentsError("variances must be non-negative")
        if self.polarization > self.mean_n * self.spin.J * (1 + 1e-9) + 1e-12:
            raise UnphysicalMomentsError(
                f"|<J_par>| = {self.polarization} exceeds mean_n * j = {self.mean_n * self.spin.J}"
            )
        if self.sigma_xi is not None and self.sigma_xi < 0:
            raise UnphysicalMomentsError("sigma_xi must be non-negative")

    @property
    def polarization(self) -> float:
        return math.hypot(self.mean_y, self.mean_z)

    @property
    def var_sum(self) -> float:
        return self.var_y + self.var_z

    @property
    def n_j(self) -> float:
        return self.mean_n * self.spin.J

    @property
    def covariance(self) -> np.ndarray:
        return np.array([[self.var_y, self.cov_yz], [self.cov_yz, self.var_z]])


def rotate_to_polarization_axis(moments: PlanarMoments) -> PlanarMoments:
    """Rotate about x so the mean planar spin points along +y."""
    if moments.polarization == 0:
        raise ZeroPolarizationError("in-plane polarization is zero; rotation undefined")
    theta = math.atan2(moments.mean_z, moments.mean_y)
    c, s = math.cos(theta), math.sin(theta)
    rot = np.array([[c, s], [-s, c]])
    cov = rot @ moments.covariance @ rot.T
    return replace(
        moments,
        mean_y=moments.polarization,
        mean_z=0.0,
        var_y=max(float(cov[0, 0]), 0.0),
        var_z=max(float(cov[1, 1]), 0.0),
        cov_yz=float(0.5 * (cov[0, 1] + cov[1, 0])),
    )
