"""Entanglement-depth criteria on collective planar-spin moments.

Three families are available: the tight hull criterion, the linear zeta
criterion, and the single-variance Sørensen-Mølmer criterion. The He et al.
detection is the ``k = 1`` case of the first two.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .curves import (
    BoundCurve,
    ZetaTable,
    curve_lower,
    producibility_hull,
    sm_curve,
    zeta_table,
)
from .errors import UnphysicalMomentsError, ZeroPolarizationError
from .spin import PlanarMoments, SpinLabel


class Criterion(str, Enum):
    OBS1_HULL = "obs1_hull"
    LINEAR_ZETA = "linear_zeta"
    SORENSEN_MOLMER = "sorensen_molmer"
    HE_K1 = "he_k1"


class Assumption(str, Enum):
    EQUAL_POLARIZATION_SPLIT = "equal_polarization_split"
    WORST_CASE_POLARIZATION = "worst_case_polarization"


@dataclass(frozen=True)
class CriterionConfig:
    k_max: int = 10
    which: Criterion = Criterion.LINEAR_ZETA
    tolerance: float = 1e-9

    def __post_init__(self):
        if self.k_max < 1:
            raise ValueError("k_max must be >= 1")
        object.__setattr__(self, "which", Criterion(self.which))


@dataclass(frozen=True)
class Check:
    violated: bool
    margin: float  # bound minus observed, positive when violated


@dataclass(frozen=True)
class DepthVerdict:
    certified_depth: int
    criterion_used: Criterion
    xi_parallel_sq: float
    fraction_entangled: dict = field(default_factory=dict)  # k -> f_{k+1}
    depth_interval: tuple | None = None
    assumptions: Assumption = Assumption.EQUAL_POLARIZATION_SPLIT

    def __post_init__(self):
        if self.certified_depth < 1:
            raise ValueError("certified_depth must be >= 1")
        for f in self.fraction_entangled.values():
            if not 0 <= f <= 1:
                raise ValueError("fractions must lie in [0, 1]")

    def to_dict(self) -> dict:
        return {
            "certified_depth": self.certified_depth,
            "criterion_used": self.criterion_used.value,
            "xi_parallel_sq": self.xi_parallel_sq,
            "fraction_entangled": {str(k): f for k, f in sorted(self.fraction_entangled.items())},
            "depth_interval": list(self.depth_interval) if self.depth_interval else None,
            "assumptions": self.assumptions.value,
        }


def xi_parallel(moments: PlanarMoments) -> float:
    """Planar squeezing parameter: variance sum over in-plane polarization."""
    pol = moments.polarization
    if pol == 0:
        raise ZeroPolarizationError("planar squeezing parameter undefined at zero polarization")
    return moments.var_sum / pol


def _normalized_x(moments: PlanarMoments) -> float:
    return moments.polarization / moments.n_j


def check_obs1(moments: PlanarMoments, k: int, hull: BoundCurve | None = None,
               tolerance: float = 1e-9) -> Check:
    """Tight k-producibility test against the convex hull.

    The hull is evaluated through its supporting-line lower envelope so a
    violation is never an artefact of chord interpolation.
    """
    hull = hull if hull is not None else producibility_hull(k, moments.spin)
    bound = moments.n_j * curve_lower(hull, _normalized_x(moments))
    margin = bound - moments.var_sum
    return Check(bool(margin > tolerance * max(moments.n_j, 1.0)), float(margin))


def check_linear(moments: PlanarMoments, k: int, table: ZetaTable,
                 hull: BoundCurve | None = None, tolerance: float = 1e-9) -> Check:
    """Linear criterion ``xi^2 >= zeta^2_{k j}``; margin in units of xi^2.

    For ``k = 1`` the line is not the tight single-particle bound, so the
    hull criterion is used instead and its margin returned.
    """
    if k == 1:
        return check_obs1(moments, 1, hull, tolerance)
    z = table[SpinLabel(k * moments.spin.two_j)]
    margin = z - xi_parallel(moments)
    return Check(bool(margin > tolerance), float(margin))


def _depth_from(violated_at) -> int:
    depth = 1
    for k, v in violated_at:
        if v:
            depth = k + 1
    return depth


def _table_for(moments, config, table):
    if table is not None:
        return table
    return zeta_table(SpinLabel(config.k_max * moments.spin.two_j))


def _verdict_core(moments, config, table, hulls, sm_curves):
    which = config.which
    ks = range(1, config.k_max + 1)
    if which == Criterion.HE_K1:
        ks = range(1, 2)
    if which in (Criterion.LINEAR_ZETA, Criterion.HE_K1):
        tbl = _table_for(moments, config, table) if which == Criterion.LINEAR_ZETA else None
        res = []
        for k in ks:
            if k == 1:
                hull = (hulls or {}).get(1) or producibility_hull(1, moments.spin)
                res.append((k, check_obs1(moments, 1, hull, config.tolerance).violated))
            else:
                res.append((k, check_linear(moments, k, tbl, tolerance=config.tolerance).violated))
        return _depth_from(res)
    if which == Criterion.OBS1_HULL:
        res = []
        for k in ks:
            hull = (hulls or {}).get(k) or producibility_hull(k, moments.spin)
            res.append((k, check_obs1(moments, k, hull, config.tolerance).violated))
        return _depth_from(res)
    return _sm_depth_value(moments, config, sm_curves)


def entanglement_depth(moments: PlanarMoments, config: CriterionConfig = CriterionConfig(),
                       table: ZetaTable | None = None, hulls: dict | None = None,
                       sm_curves: dict | None = None) -> DepthVerdict:
    """Largest violated producibility ``k`` plus one.

    When ``moments.sigma_xi`` is set the verdict is repeated at
    ``xi^2 -/+ sigma`` (variances rescaled at fixed polarization) to give the
    depth interval.
    """
    xi = xi_parallel(moments)
    depth = _verdict_core(moments, config, table, hulls, sm_curves)
    interval = None
    if moments.sigma_xi is not None:
        ends = []
        for target in (xi + moments.sigma_xi, xi - moments.sigma_xi):
            ends.append(_verdict_core(_with_xi(moments, target), config, table, hulls, sm_curves))
        interval = (min(ends), max(ends))
    fractions = {}
    if config.which in (Criterion.LINEAR_ZETA, Criterion.OBS1_HULL):
        tbl = _table_for(moments, config, table)
        for k in range(1, config.k_max + 1):
            if SpinLabel(k * moments.spin.two_j) in tbl:
                fractions[k] = entangled_fraction(moments, k, tbl)
    return DepthVerdict(depth, config.which, xi, fractions, interval)


def _with_xi(moments: PlanarMoments, target: float) -> PlanarMoments:
    from dataclasses import replace

    target = max(target, 0.0)
    scale = target / xi_parallel(moments) if moments.var_sum > 0 else 0.0
    if moments.var_sum == 0:
        half = target * moments.polarization / 2
        return replace(moments, var_y=half, var_z=half, cov_yz=0.0, sigma_xi=None)
    return replace(moments, var_y=moments.var_y * scale, var_z=moments.var_z * scale,
                   cov_yz=moments.cov_yz * scale, sigma_xi=None)


def entangled_fraction(moments: PlanarMoments, k: int, table: ZetaTable) -> float:
    """Lower bound on the fraction of particles in groups of more than ``k``.

    Assumes the polarization is shared equally between group sizes; zero when
    the linear criterion at ``k`` is not violated.
    """
    z = table[SpinLabel(k * moments.spin.two_j)]
    return float(max(0.0, 1.0 - xi_parallel(moments) / z))


def unequal_polarization_bound(moments: PlanarMoments, k: int, table: ZetaTable) -> float:
    """Upper bound on the fraction ``Q`` of particles in groups of at most ``k``.

    Valid without the equal-split assumption; ``W = <N> j / |<J_par>|``.
    """
    pol = moments.polarization
    if pol == 0:
        raise ZeroPolarizationError("W undefined at zero polarization")
    W = moments.n_j / pol
    if W < 1 - 1e-12:
        raise UnphysicalMomentsError(f"W = {W} < 1: polarization exceeds <N> j")
    z = table[SpinLabel(k * moments.spin.two_j)]
    q = (xi_parallel(moments) / z + W - 1) / W
    return float(min(1.0, max(0.0, q)))


def _sm_depth_value(moments, config, sm_curves) -> int:
    x = moments.mean_y / moments.n_j
    if x < 0:
        raise UnphysicalMomentsError("single-variance criterion needs the mean spin along +y")
    depth = 1
    for k in range(1, config.k_max + 1):
        J = SpinLabel(k * moments.spin.two_j)
        curve = (sm_curves or {}).get(J.two_j) or sm_curve(J)
        bound = moments.n_j * curve_lower(curve, min(x, 1.0))
        if bound - moments.var_z > config.tolerance * max(moments.n_j, 1.0):
            depth = k + 1
    return depth


def sm_depth(moments: PlanarMoments, config: CriterionConfig | None = None,
             sm_curves: dict | None = None) -> DepthVerdict:
    """Depth from ``(Delta J_z)^2 >= <N> j F_{k j}(<J_y> / <N> j)``.

    Uses only the variance orthogonal to the mean spin; the moments are
    expected in the frame where the mean spin points along +y.
    """
    config = config or CriterionConfig(which=Criterion.SORENSEN_MOLMER)
    depth = _sm_depth_value(moments, config, sm_curves)
    xi = xi_parallel(moments) if moments.polarization > 0 else math.inf
    return DepthVerdict(depth, Criterion.SORENSEN_MOLMER, xi, {},
                        assumptions=Assumption.WORST_CASE_POLARIZATION)


# ------------------------------------------------------------- comparison

@dataclass(frozen=True)
class ComparisonGrid:
    """Lower bounds on ``(Delta J_z)^2 / (N j)`` over (alpha, beta).

    ``alpha = (Delta J_z)^2 / (Delta J_y)^2``, ``beta = <J_y> / N``. Bounds are
    per ``N j`` so they do not depend on the particle number.
    """

    k: int
    j: SpinLabel
    alpha: np.ndarray
    beta: np.ndarray
    planar: np.ndarray  # shape (len(alpha), len(beta))
    sm: np.ndarray

    @property
    def winner(self) -> np.ndarray:
        return np.where(self.planar > self.sm, "planar",
                        np.where(self.planar < self.sm, "sm", "tie"))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["alpha", "beta", "planar_bound", "sm_bound", "winner"])
        win = self.winner
        for a, al in enumerate(self.alpha):
            for b, be in enumerate(self.beta):
                w.writerow([repr(float(al)), repr(float(be)), repr(float(self.planar[a, b])),
                            repr(float(self.sm[a, b])), win[a, b]])
        return buf.getvalue()


def compare_criteria(k: int, j, alpha_grid, beta_grid, threads: int | None = None) -> ComparisonGrid:
    """Planar versus single-variance lower bounds on the orthogonal variance.

    With ``(Delta J_y)^2 = (Delta J_z)^2 / alpha`` the hull criterion bounds
    ``(Delta J_z)^2 (1 + 1/alpha) >= N j G_k(beta / j)``; the single-variance
    criterion gives ``N j F_{k j}(beta / j)``.
    """
    j = SpinLabel.of(j)
    alpha = np.asarray(alpha_grid, dtype=float)
    beta = np.asarray(beta_grid, dtype=float)
    if np.any(alpha <= 0):
        raise ValueError("alpha values must be positive")
    if np.any(beta <= 0) or np.any(beta > j.J + 1e-12):
        raise ValueError(f"beta values must lie in (0, {j}]")
    with ThreadPoolExecutor(max_workers=threads) as pool:
        hull_f = pool.submit(producibility_hull, k, j)
        sm_f = pool.submit(sm_curve, SpinLabel(k * j.two_j))
        hull, F = hull_f.result(), sm_f.result()
    X = np.minimum(beta / j.J, 1.0)
    g = np.atleast_1d(curve_lower(hull, X))
    f = np.atleast_1d(curve_lower(F, X))
    planar = g[None, :] / (1 + 1 / alpha[:, None])
    sm = np.broadcast_to(f[None, :], planar.shape).copy()
    return ComparisonGrid(k, j, alpha, beta, planar, sm)


# ------------------------------------------------------------ moments I/O

MOMENT_FIELDS = ("mean_y", "mean_z", "var_y", "var_z", "mean_n", "two_j")
OPTIONAL_MOMENT_FIELDS = ("cov_yz", "sigma_xi")


def moments_to_dict(moments: PlanarMoments) -> dict:
    d = {"mean_y": moments.mean_y, "mean_z": moments.mean_z, "var_y": moments.var_y,
         "var_z": moments.var_z, "mean_n": moments.mean_n, "two_j": moments.spin.two_j,
         "cov_yz": moments.cov_yz}
    if moments.sigma_xi is not None:
        d["sigma_xi"] = moments.sigma_xi
    return d


def moments_from_dict(data, where: str = "moments") -> PlanarMoments:
    """Parse a moments record, naming the offending field on failure."""
    from .errors import SchemaError

    if not isinstance(data, dict):
        raise SchemaError(f"{where}: expected a JSON object")
    unknown = set(data) - set(MOMENT_FIELDS) - set(OPTIONAL_MOMENT_FIELDS)
    if unknown:
        raise SchemaError(f"{where}: unknown field {sorted(unknown)[0]!r}")
    vals = {}
    for name in MOMENT_FIELDS + OPTIONAL_MOMENT_FIELDS:
        if name not in data or data[name] is None:
            if name in MOMENT_FIELDS:
                raise SchemaError(f"{where}: missing field {name!r}")
            continue
        v = data[name]
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            raise SchemaError(f"{where}: field {name!r} must be a finite number, got {v!r}")
        if name == "two_j" and (int(v) != v or v < 1):
            raise SchemaError(f"{where}: field 'two_j' must be a positive integer")
        vals[name] = v
    return PlanarMoments(
        mean_y=float(vals["mean_y"]), mean_z=float(vals["mean_z"]), var_y=float(vals["var_y"]),
        var_z=float(vals["var_z"]), mean_n=float(vals["mean_n"]), spin=SpinLabel(int(vals["two_j"])),
        cov_yz=float(vals.get("cov_yz", 0.0)), sigma_xi=vals.get("sigma_xi"),
    )
