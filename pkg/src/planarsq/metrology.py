"""Phase estimation with a planar state rotated about the x axis.

After a rotation by ``phi`` the measured component is
``J_z^out = J_z cos(phi) - J_y sin(phi)``. Sensitivities follow from error
propagation; the reference value at each phase is the one a state with both
planar variances equal to half the polarization would reach.
"""

from __future__ import annotations

import csv
import io
import math

import numpy as np
from scipy.integrate import quad

from .errors import BlindSpotError, ZeroPolarizationError
from .spin import PlanarMoments

BLIND_SPOT_RTOL = 1e-12


def rotated_moments(moments: PlanarMoments, phi: float) -> tuple[float, float]:
    """Mean and variance of ``J_z^out`` at phase ``phi``."""
    c, s = math.cos(phi), math.sin(phi)
    mean = moments.mean_z * c - moments.mean_y * s
    var = moments.var_z * c * c + moments.var_y * s * s - 2 * moments.cov_yz * s * c
    return mean, max(var, 0.0)


def _slope(moments: PlanarMoments, phi: float) -> float:
    slope = -moments.mean_z * math.sin(phi) - moments.mean_y * math.cos(phi)
    if abs(slope) <= BLIND_SPOT_RTOL * max(moments.polarization, 1e-300):
        raise BlindSpotError(f"signal slope vanishes at phi={phi}")
    return slope


def sensitivity(moments: PlanarMoments, phi: float) -> float:
    """``(Delta phi)^2 = (Delta J_z^out)^2 / |d<J_z^out>/dphi|^2``."""
    _, var = rotated_moments(moments, phi)
    return var / _slope(moments, phi) ** 2


def sql_sensitivity(moments: PlanarMoments, phi: float) -> float:
    """Reference ``|<J_par>| / (d<J_z^out>/dphi)^2``.

    The denominator is the squared signal slope, so the normalized ratio
    below depends only on the rotated variance.
    """
    if moments.polarization == 0:
        raise ZeroPolarizationError("reference undefined at zero polarization")
    return moments.polarization / _slope(moments, phi) ** 2


def normalized_sensitivity(moments: PlanarMoments, phi: float) -> float:
    """``(Delta phi)^2 / (Delta phi)^2_SQL``, finite even at blind spots."""
    if moments.polarization == 0:
        raise ZeroPolarizationError("ratio undefined at zero polarization")
    return rotated_moments(moments, phi)[1] / moments.polarization


def phase_averaged_enhancement(moments: PlanarMoments) -> float:
    """Mean of the normalized sensitivity over a full turn (adaptive quadrature)."""
    if moments.polarization == 0:
        raise ZeroPolarizationError("ratio undefined at zero polarization")
    val, _ = quad(lambda p: normalized_sensitivity(moments, p), 0.0, 2 * math.pi,
                  epsabs=1e-12, epsrel=1e-12, limit=200)
    return val / (2 * math.pi)


def sensitivity_table(moments: PlanarMoments, phis) -> str:
    """CSV ``phi,sensitivity_ratio`` for polar plots."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["phi", "sensitivity_ratio"])
    for p in np.asarray(phis, dtype=float):
        w.writerow([repr(float(p)), repr(normalized_sensitivity(moments, float(p)))])
    return buf.getvalue()
