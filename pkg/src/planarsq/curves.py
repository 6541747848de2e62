"""Bound curves: the symmetric-block curve G, its producibility hull, zeta and F.

Coordinates are normalized per unit spin of the relevant group: a block of
spin ``J`` inside a ``k``-particle group of spin-``j`` particles contributes
points ``(X J/(k j), v J/(k j))`` where ``X = <L_y>/J`` and ``v = var_sum/J``.

Every curve vertex carries a subgradient slope when one is known. Between
two vertices the chord is an upper estimate of a convex curve while the
supporting lines through the vertices give a rigorous lower estimate; see
:func:`curve_eval` and :func:`curve_lower`.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from . import cache
from .errors import CurveRangeError, MissingTableEntryError, SchemaError
from .ground import (
    DEFAULT_CONFIG,
    SOLVER_VERSION,
    LagrangianParams,
    SolverConfig,
    ground_state,
    lagrangian_value,
    sm_ground_state,
    sweep_lambda,
)
from .spin import SpinLabel

SYMMETRIC_G = "symmetric_G"
PRODUCIBILITY_HULL = "producibility_hull"
SM_F = "sm_F"
CURVE_SCHEMA_VERSION = 1

# Printed reference values, keyed by the row label J. The rows from J=2 on
# agree to every printed digit with the computed zeta of spin J-1, so the
# labels appear shifted by one; see README.
PUBLISHED_TABLE_I = {
    1: 0.45, 2: 0.44906, 3: 0.38945, 4: 0.35321, 5: 0.32779, 6: 0.30852,
    7: 0.29318, 8: 0.28054, 9: 0.26986, 10: 0.26067, 11: 0.25262, 12: 0.2455,
    13: 0.23913, 14: 0.23338, 15: 0.22815, 16: 0.22336, 17: 0.21896,
    18: 0.21489, 19: 0.21111, 20: 0.20758, 21: 0.20428, 22: 0.20118,
    23: 0.19826, 24: 0.19551, 25: 0.1929, 26: 0.19043, 27: 0.18809,
}
PUBLISHED_DIGITS = {1: 2}  # decimal places when fewer than five


# ---------------------------------------------------------------- geometry

def lower_hull(x, y) -> np.ndarray:
    """Indices of the lower convex hull of the points, left to right.

    Monotone chain; collinear interior points are dropped. Among points
    sharing an abscissa only the lowest is eligible.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    order = np.lexsort((y, x))
    hull: list[int] = []
    for i in order:
        if hull and x[hull[-1]] == x[i]:
            continue
        while len(hull) >= 2:
            o, a = hull[-2], hull[-1]
            cross = (x[a] - x[o]) * (y[i] - y[o]) - (y[a] - y[o]) * (x[i] - x[o])
            scale = abs(x[i] - x[o]) * (abs(y[i]) + abs(y[o]) + abs(y[a]) + 1.0)
            if cross <= 1e-15 * scale:
                hull.pop()
            else:
                break
        hull.append(int(i))
    return np.array(hull, dtype=int)


@dataclass(frozen=True, eq=False)
class BoundCurve:
    """Sampled lower-bound function on ``[X[0], X[-1]]``.

    ``slopes[i]`` is a subgradient at ``X[i]`` or NaN when unknown.
    """

    kind: str
    identity: tuple
    X: np.ndarray
    values: np.ndarray
    slopes: np.ndarray = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        v = np.asarray(self.values, dtype=float)
        s = np.full_like(X, np.nan) if self.slopes is None else np.asarray(self.slopes, dtype=float)
        if X.ndim != 1 or X.shape != v.shape or s.shape != X.shape or X.size == 0:
            raise ValueError("X, values and slopes must be equal-length non-empty vectors")
        if np.any(np.diff(X) <= 0):
            raise ValueError("X must be strictly increasing")
        if X[0] < -1e-12 or X[-1] > 1 + 1e-12:
            raise ValueError("X must lie in [0, 1]")
        if np.any(v < -1e-12):
            raise ValueError("values must be non-negative")
        for name, arr in (("X", X), ("values", v), ("slopes", s)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.X.tolist(), self.values.tolist()))

    def __call__(self, X):
        return curve_eval(self, X)

    def second_differences(self) -> np.ndarray:
        """Slope increments between consecutive segments (>= 0 when convex)."""
        return np.diff(np.diff(self.values) / np.diff(self.X))

    def to_dict(self) -> dict:
        return {
            "schema": "planarsq.curve",
            "schema_version": CURVE_SCHEMA_VERSION,
            "solver_version": SOLVER_VERSION,
            "kind": self.kind,
            "identity": [str(i) for i in self.identity],
            "X": self.X.tolist(),
            "values": self.values.tolist(),
            "slopes": [None if math.isnan(s) else s for s in self.slopes.tolist()],
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "BoundCurve":
        if data.get("schema") != "planarsq.curve":
            raise SchemaError("not a planarsq curve document (field 'schema')")
        if data.get("schema_version") != CURVE_SCHEMA_VERSION:
            raise SchemaError(f"unsupported curve schema_version {data.get('schema_version')!r}")
        kind = data["kind"]
        ident = data["identity"]
        identity = (SpinLabel.of(ident[0]),) if len(ident) == 1 else (int(ident[0]), SpinLabel.of(ident[1]))
        slopes = [np.nan if s is None else s for s in data.get("slopes") or [None] * len(data["X"])]
        return cls(kind, identity, np.array(data["X"]), np.array(data["values"]),
                   np.array(slopes, dtype=float), dict(data.get("metadata", {})))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["X", "value"])
        for x, v in zip(self.X, self.values):
            w.writerow([repr(float(x)), repr(float(v))])
        return buf.getvalue()


def _locate(curve: BoundCurve, X):
    X = np.asarray(X, dtype=float)
    lo, hi = curve.X[0], curve.X[-1]
    tol = 1e-12
    if np.any(~np.isfinite(X)) or np.any(X < lo - tol) or np.any(X > hi + tol):
        raise CurveRangeError(f"X outside sampled range [{lo}, {hi}] of {curve.kind} curve")
    return np.clip(X, lo, hi)


def curve_eval(curve: BoundCurve, X):
    """Piecewise-linear interpolation between stored points; no extrapolation."""
    Xc = _locate(curve, X)
    out = np.interp(Xc, curve.X, curve.values)
    return float(out) if np.ndim(out) == 0 else out


def curve_lower(curve: BoundCurve, X):
    """Lower envelope from the supporting lines at the two bracketing vertices.

    For a convex curve with exact vertices this never exceeds the true
    function. Where neither bracketing slope is known, and on edges listed in
    ``metadata["exact_edges"]``, the chord is used.
    """
    Xc = np.atleast_1d(_locate(curve, X))
    xs, vs, ss = curve.X, curve.values, curve.slopes
    i = np.clip(np.searchsorted(xs, Xc, side="right") - 1, 0, len(xs) - 1)
    j = np.minimum(i + 1, len(xs) - 1)
    chord = np.interp(Xc, xs, vs)
    left = np.where(np.isnan(ss[i]), -np.inf, vs[i] + np.nan_to_num(ss[i]) * (Xc - xs[i]))
    right = np.where(np.isnan(ss[j]), -np.inf, vs[j] + np.nan_to_num(ss[j]) * (Xc - xs[j]))
    tangent = np.maximum(left, right)
    out = np.where(np.isfinite(tangent), np.minimum(tangent, chord), chord)
    exact = curve.metadata.get("exact_edges")
    if exact:
        out = np.where(np.isin(i, exact), chord, out)
    out = np.where(np.isclose(Xc, xs[i], rtol=0, atol=1e-15), vs[i], out)
    return float(out[0]) if np.ndim(X) == 0 else out


# ----------------------------------------------------- symmetric block curve

@dataclass(frozen=True)
class _BlockSamples:
    """Ground-state samples of one block along the multiplier ``mu``."""

    spin: SpinLabel
    mu: np.ndarray
    X: np.ndarray
    v: np.ndarray

    @property
    def slopes(self) -> np.ndarray:
        return self.mu - 2 * self.spin.J * self.X


def _point_at(spin: SpinLabel, mu: float, config: SolverConfig):
    sol = ground_state(spin, LagrangianParams(mu), config)
    return sol.X, sol.value


@lru_cache(maxsize=256)
def _block_samples(two_j: int, config: SolverConfig) -> _BlockSamples:
    spin = SpinLabel(two_j)
    sweep = sweep_lambda(spin, config)
    X = np.clip(sweep.X, 0.0, 1.0)
    X[np.abs(X) < 1e-12] = 0.0
    return _BlockSamples(spin, sweep.lams, X, sweep.values)


def _dedupe(X, v, s):
    keep = np.concatenate([[True], np.diff(X) > 1e-13])
    return X[keep], v[keep], s[keep]


def _x_of_mu_root(spin, target, samples: _BlockSamples, config):
    """Multiplier whose ground state has polarization ``target``."""
    k = int(np.searchsorted(samples.X, target))
    if k < len(samples.X) and samples.X[k] == target:
        return samples.mu[k]
    lo = samples.mu[max(k - 1, 0)]
    hi = samples.mu[min(k, len(samples.mu) - 1)]
    f = lambda m: _point_at(spin, m, config)[0] - target
    if f(hi) < 0:
        hi_val = hi
        while f(hi_val) < 0:
            hi_val *= 4
        hi = hi_val
    return brentq(f, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)


def symmetric_curve(J, config: SolverConfig = DEFAULT_CONFIG, X=None) -> BoundCurve:
    """Minimal planar variance per unit spin of a single spin-J block.

    Without ``X`` the adaptive multiplier sweep is returned, which traces the
    (not necessarily convex) curve itself. With ``X`` each requested point is
    solved for exactly by root-finding the multiplier. For ``J = 1/2`` every
    state is a coherent state and the curve is ``1 - X^2/2``.
    """
    spin = SpinLabel.of(J)
    if spin.two_j == 0:
        raise ValueError("symmetric_curve needs J >= 1/2")
    meta = {"grid": asdict(config), "solver_version": SOLVER_VERSION, "J": str(spin)}
    if spin.two_j == 1:
        grid = np.linspace(0, 1, 101) if X is None else np.unique(np.asarray(X, dtype=float))
        return BoundCurve(SYMMETRIC_G, (spin,), grid, 1 - grid**2 / 2, -grid, meta)
    samples = _block_samples(spin.two_j, config)
    if X is None:
        xs, vs, ss = samples.X, samples.v, samples.slopes
        if xs[-1] < 1.0:
            xs = np.append(xs, 1.0)
            vs = np.append(vs, 0.5)
            ss = np.append(ss, np.nan)
        xs, vs, ss = _dedupe(xs, vs, ss)
        return BoundCurve(SYMMETRIC_G, (spin,), xs, vs, ss, meta)
    grid = np.unique(np.asarray(X, dtype=float))
    if grid.size and (grid[0] < 0 or grid[-1] > 1):
        raise CurveRangeError("requested X outside [0, 1]")
    vs, ss = [], []
    for x in grid:
        if x >= 1.0:
            vs.append(0.5)
            ss.append(np.nan)
            continue
        if x == 0.0:
            vs.append(float(samples.v[0]))
            ss.append(0.0)
            continue
        mu = _x_of_mu_root(spin, x, samples, config)
        xv, v = _point_at(spin, mu, config)
        vs.append(v)
        ss.append(mu - 2 * spin.J * xv)
    meta["mode"] = "exact"
    return BoundCurve(SYMMETRIC_G, (spin,), grid, np.array(vs), np.array(ss), meta)


def _minimize_along_mu(spin, samples: _BlockSamples, objective, i, config):
    """Polish a sample-index minimum of ``objective(X, v)`` along ``mu``."""
    n = len(samples.mu)
    lo, hi = samples.mu[max(i - 1, 0)], samples.mu[min(i + 1, n - 1)]
    best = (objective(samples.X[i], samples.v[i]), samples.mu[i], samples.X[i], samples.v[i])
    if hi <= lo:
        return best
    cache_ = {}

    def f(m):
        if m not in cache_:
            cache_[m] = _point_at(spin, m, config)
        x, v = cache_[m]
        return objective(x, v)

    res = minimize_scalar(f, bounds=(lo, hi), method="bounded",
                          options=dict(xatol=config.zeta_rtol * 1e-5 * max(hi, 1e-3)))
    if res.fun < best[0]:
        x, v = cache_[res.x]
        best = (float(res.fun), float(res.x), x, v)
    return best


@dataclass(frozen=True)
class ZetaPoint:
    spin: SpinLabel
    zeta: float
    X_min: float
    mu: float


def zeta_point(J, config: SolverConfig = DEFAULT_CONFIG) -> ZetaPoint:
    """Minimum of ``v / X`` over the block curve and where it is attained."""
    spin = SpinLabel.of(J)
    if spin.two_j == 0:
        raise ValueError("zeta needs J >= 1/2")
    if spin.two_j == 1:
        return ZetaPoint(spin, 0.5, 1.0, math.inf)
    s = _block_samples(spin.two_j, config)
    ok = s.X > 1e-9
    ratio = np.where(ok, s.v / np.where(ok, s.X, 1.0), np.inf)
    i = int(np.argmin(ratio))
    val, mu, x, _ = _minimize_along_mu(spin, s, lambda x, v: v / x if x > 0 else math.inf, i, config)
    # the coherent endpoint is always available
    if 0.5 < val:
        return ZetaPoint(spin, 0.5, 1.0, math.inf)
    return ZetaPoint(spin, float(val), float(x), float(mu))


def zeta(J, config: SolverConfig = DEFAULT_CONFIG) -> float:
    """Minimal planar squeezing parameter reachable by one spin-J particle."""
    return zeta_point(J, config).zeta


# ------------------------------------------------------------- zeta tables

@dataclass(frozen=True)
class ZetaTable:
    entries: dict  # two_J -> zeta^2_J
    metadata: dict = field(default_factory=dict)

    def __getitem__(self, J) -> float:
        key = SpinLabel.of(J).two_j
        try:
            return self.entries[key]
        except KeyError:
            raise MissingTableEntryError(f"zeta^2 for J={SpinLabel.of(J)} not tabulated") from None

    def __contains__(self, J) -> bool:
        return SpinLabel.of(J).two_j in self.entries

    def spins(self) -> list[SpinLabel]:
        return [SpinLabel(t) for t in sorted(self.entries)]

    def is_monotone(self, atol: float = 0.0) -> bool:
        vals = [self.entries[t] for t in sorted(self.entries)]
        return all(b <= a + atol for a, b in zip(vals, vals[1:]))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["J", "zeta_squared"])
        for t in sorted(self.entries):
            w.writerow([str(SpinLabel(t)), f"{self.entries[t]:.10g}"])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, metadata: dict | None = None) -> "ZetaTable":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or [c.strip() for c in rows[0]] != ["J", "zeta_squared"]:
            raise SchemaError("line 1: expected header 'J,zeta_squared'")
        entries = {}
        for n, row in enumerate(rows[1:], start=2):
            if not row:
                continue
            if len(row) != 2:
                raise SchemaError(f"line {n}: expected 2 fields, got {len(row)}")
            try:
                spin = SpinLabel.of(row[0])
                val = float(row[1])
            except (ValueError, ZeroDivisionError) as exc:
                raise SchemaError(f"line {n}: {exc}") from None
            if not (0 < val <= 1):
                raise SchemaError(f"line {n}: zeta_squared {val} outside (0, 1]")
            entries[spin.two_j] = val
        return cls(entries, dict(metadata or {}))

    def to_dict(self) -> dict:
        return {"schema": "planarsq.zeta_table", "schema_version": CURVE_SCHEMA_VERSION,
                "entries": {str(SpinLabel(t)): v for t, v in sorted(self.entries.items())},
                "metadata": self.metadata}


def _zeta_cached(two_j: int, config: SolverConfig) -> float:
    key = ("zeta", str(SpinLabel(two_j)))
    hit = cache.load(key, config)
    if hit is not None:
        return float(hit["zeta"])
    z = zeta(SpinLabel(two_j), config)
    cache.store(key, config, {"zeta": z})
    return z


def zeta_table(J_max, config: SolverConfig = DEFAULT_CONFIG, include_half: bool = False,
               threads: int | None = None) -> ZetaTable:
    """Computed zeta^2_J for ``1 <= J <= J_max`` (and half-integers if asked)."""
    top = SpinLabel.of(J_max).two_j if not isinstance(J_max, (int, float)) or J_max >= 0 else -1
    labels = [t for t in range(1, top + 1) if include_half or t % 2 == 0]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        vals = list(pool.map(lambda t: _zeta_cached(t, config), labels))
    meta = {"source": "computed", "solver_version": SOLVER_VERSION, "grid_digest": config.digest()}
    return ZetaTable(dict(zip(labels, vals)), meta)


def published_zeta_table() -> ZetaTable:
    """The printed reference rows, labels as printed."""
    return ZetaTable(
        {2 * J: v for J, v in PUBLISHED_TABLE_I.items()},
        {"source": "published", "note": "row labels appear shifted by one relative to computed values"},
    )


# ------------------------------------------------------- producibility hull

def _group_blocks(k: int, j: SpinLabel) -> list[int]:
    """Block spins (as two_J) occurring in k spin-j particles, largest first."""
    if k < 1:
        raise ValueError("k must be >= 1")
    reach = {j.two_j}
    for _ in range(k - 1):
        reach = {t for a in reach for t in range(abs(a - j.two_j), a + j.two_j + 1, 2)}
    return sorted(reach, reverse=True)


def _tangent_points(spin, samples: _BlockSamples, sigma: float, near: list[int], config):
    """Points of the block curve touched by lines of slope ``sigma``."""
    obj = lambda x, v: v - sigma * x
    vals = samples.v - sigma * samples.X
    idx = {int(np.argmin(vals))} | set(near)
    out = []
    for i in idx:
        _, mu, x, v = _minimize_along_mu(spin, samples, obj, i, config)
        out.append((x, v, mu - 2 * spin.J * x, mu))
    return out


def _hull_sources(k: int, j: SpinLabel) -> tuple[list[tuple[int, float]], bool]:
    """Distinct (block two_J, scale) pairs over group sizes up to ``k``.

    A group of ``k' <= k`` particles contributes its blocks scaled by
    ``J / (k' j)``. Returns the pairs and whether a singlet occurs.
    """
    pairs, singlet = set(), False
    for kk in range(1, k + 1):
        for t in _group_blocks(kk, j):
            if t == 0:
                singlet = True
            else:
                pairs.add((t, t / (kk * j.two_j)))
    return sorted(pairs, reverse=True), singlet


def producibility_hull(k: int, j, config: SolverConfig = DEFAULT_CONFIG,
                       max_rounds: int = 8) -> BoundCurve:
    """Tight convex bound for groups of at most ``k`` spin-``j`` particles.

    Block curves of every group size ``k' <= k`` are scaled to per-particle
    units and pooled with the origin when some group admits a singlet. The
    pool is closed under mixing and under reversing the polarization, so the
    bound is its non-decreasing lower convex hull. Hull edges that join
    different sources or skip samples are refined with the exact tangent
    points at the edge slope.
    """
    j = SpinLabel.of(j)
    if k < 1:
        raise ValueError("k must be >= 1")
    if j.two_j == 0:
        raise ValueError("spin-0 particles have no polarization")
    key = ("hull", str(k), str(j), str(max_rounds))
    hit = cache.load(key, config)
    if hit is not None:
        return BoundCurve.from_dict(hit)

    pairs, singlet = _hull_sources(k, j)
    # per-source point lists: X, v, slope, mu
    per_src: dict[tuple, dict] = {}
    samples_of: dict[int, _BlockSamples] = {}
    for t, scale in pairs:
        if t == 1:
            g = np.linspace(0, 1, 101)
            per_src[(t, scale)] = dict(X=g * scale, v=(1 - g**2 / 2) * scale, s=-g,
                                       mu=np.full_like(g, np.nan))
            continue
        if t not in samples_of:
            samples_of[t] = _block_samples(t, config)
        smp = samples_of[t]
        per_src[(t, scale)] = dict(
            X=np.append(smp.X, 1.0) * scale, v=np.append(smp.v, 0.5) * scale,
            s=np.append(smp.slopes, np.nan), mu=np.append(smp.mu, np.inf),
        )
    names = list(per_src)

    def assemble():
        X, v, sl, src, pos = [], [], [], [], []
        for n, name in enumerate(names):
            d = per_src[name]
            X.extend(d["X"]); v.extend(d["v"]); sl.extend(d["s"])
            src.extend([n] * len(d["X"])); pos.extend(range(len(d["X"])))
        if singlet:
            X.append(0.0); v.append(0.0); sl.append(np.nan); src.append(-1); pos.append(0)
        X.append(0.0); v.append(min(v)); sl.append(0.0); src.append(-2); pos.append(0)
        return np.array(X), np.array(v), np.array(sl), np.array(src), np.array(pos)

    added = 1
    for _ in range(max_rounds):
        X, v, sl, src, pos = assemble()
        h = lower_hull(X, v)
        added = 0
        for a, b in zip(h, h[1:]):
            if src[a] == src[b] and src[a] >= 0 and pos[b] - pos[a] == 1:
                continue
            sigma = (v[b] - v[a]) / (X[b] - X[a])
            for n, (t, scale) in enumerate(names):
                if t not in samples_of:
                    continue
                smp, d = samples_of[t], per_src[(t, scale)]
                near = [int(np.argmin(np.abs(smp.X - X[e] / scale))) for e in (a, b) if src[e] == n]
                for x, val, slope, mu in _tangent_points(smp.spin, smp, sigma, near, config):
                    if np.any(np.abs(d["X"] - x * scale) < 1e-13):
                        continue
                    order = np.argsort(np.append(d["X"], x * scale), kind="stable")
                    d["X"] = np.append(d["X"], x * scale)[order]
                    d["v"] = np.append(d["v"], val * scale)[order]
                    d["s"] = np.append(d["s"], slope)[order]
                    d["mu"] = np.append(d["mu"], mu)[order]
                    added += 1
        if added == 0:
            break

    X, v, sl, src, pos = assemble()
    h = lower_hull(X, v)
    hx, hv, hs = X[h], v[h], sl[h].copy()
    # a stored slope is a hull subgradient only if it fits between adjacent edges
    edge = np.diff(hv) / np.diff(hx)
    for i in range(len(h)):
        lo = edge[i - 1] if i > 0 else -np.inf
        hi = edge[i] if i < len(edge) else np.inf
        if not (lo - 1e-9 <= hs[i] <= hi + 1e-9):
            hs[i] = np.nan
    hs = np.where(np.isnan(hs), np.nan, np.maximum(hs, 0.0))
    # once refinement has settled, edges between sources are tangent at both
    # ends, so the true hull is linear along them
    exact = [] if added else [
        i for i, (a, b) in enumerate(zip(h, h[1:]))
        if not (src[a] == src[b] and src[a] >= 0 and pos[b] - pos[a] == 1)
    ]
    meta = {"grid": asdict(config), "solver_version": SOLVER_VERSION, "k": k, "j": str(j),
            "sources": [[str(SpinLabel(t)), sc] for t, sc in names], "singlet": singlet,
            "exact_edges": exact}
    curve = BoundCurve(PRODUCIBILITY_HULL, (k, j), hx, np.maximum(hv, 0.0), hs, meta)
    cache.store(key, config, curve.to_dict())
    return curve


def hull_by_legendre(k: int, j, X, config: SolverConfig = DEFAULT_CONFIG) -> float:
    """Hull value at ``X`` from the double Legendre transform.

    ``sup_{lam >= 0} [lam X + min_src L_J(lam) * scale / J]`` where ``L_J``
    is the block Lagrangian minimum evaluated at the rescaled multiplier.
    Independent of the point-union construction.
    """
    j = SpinLabel.of(j)
    pairs, singlet = _hull_sources(k, j)

    def dual(lam):
        vals = [0.0] if singlet else []
        for t, scale in pairs:
            J = t / 2
            # source points are (x scale, v scale) with X = <L_y>/J, v = var/J
            vals.append(lagrangian_value(SpinLabel(t), lam, config)[0] * scale / J)
        return lam * X + min(vals)

    hi = config.lam_upper(SpinLabel(pairs[0][0]))
    grid = np.concatenate([[0.0], np.geomspace(1e-3, hi, 24)])
    vals = [dual(l) for l in grid]
    i = int(np.argmax(vals))
    a, b = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    # golden section: the dual is concave but kinked at the optimum, and the
    # bounded Brent stopping rule carries a sqrt(eps) relative tolerance
    g = (math.sqrt(5) - 1) / 2
    c, d = b - g * (b - a), a + g * (b - a)
    fc, fd = dual(c), dual(d)
    best = max(vals[i], fc, fd)
    while b - a > 1e-14 * max(b, 1.0):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - g * (b - a)
            fc = dual(c)
        else:
            a, c, fc = c, d, fd
            d = a + g * (b - a)
            fd = dual(d)
        best = max(best, fc, fd)
    return float(best)


def linear_lower_bound(k: int, j, table: ZetaTable | None = None,
                       config: SolverConfig = DEFAULT_CONFIG) -> "LinearBound":
    """The line ``X -> X zeta^2_{k j}`` below the producibility hull."""
    j = SpinLabel.of(j)
    if k < 1:
        raise ValueError("k must be >= 1")
    J = SpinLabel(k * j.two_j)
    slope = table[J] if table is not None else zeta(J, config)
    return LinearBound(J, slope)


@dataclass(frozen=True)
class LinearBound:
    J: SpinLabel
    slope: float

    def __call__(self, X):
        return self.slope * np.asarray(X, dtype=float) if np.ndim(X) else self.slope * float(X)


# ------------------------------------------------------ single-variance F_J

def sm_curve(J, config: SolverConfig = DEFAULT_CONFIG) -> BoundCurve:
    """Convex bound on ``(Delta L_z)^2 / J`` at polarization ``X`` along y."""
    spin = SpinLabel.of(J)
    if spin.two_j == 0:
        raise ValueError("sm_curve needs J >= 1/2")
    key = ("sm", str(spin))
    hit = cache.load(key, config)
    if hit is not None:
        return BoundCurve.from_dict(hit)
    solve = lambda lam: sm_ground_state(spin, lam, config)
    grid = np.concatenate([[0.0], np.geomspace(config.lam_min, config.lam_upper(spin), config.n_geometric // 2)])
    sols = [solve(l) for l in grid]
    changed = True
    while changed and len(sols) < config.max_samples:
        changed = False
        out = [sols[0]]
        for a, b in zip(sols, sols[1:]):
            if (abs(b.X - a.X) > config.dx_max or abs(b.value - a.value) > config.dv_max) \
                    and b.params.lam - a.params.lam > 1e-10:
                mid = math.sqrt(a.params.lam * b.params.lam) if a.params.lam > 0 else 0.5 * b.params.lam
                out.append(solve(mid))
                changed = True
            out.append(b)
        sols = out
    X = np.array([0.0] + [s.X for s in sols] + [1.0])
    v = np.array([0.0] + [s.value for s in sols] + [0.5])
    sl = np.array([np.nan] + [s.params.lam for s in sols] + [np.nan])
    X = np.clip(X, 0.0, 1.0)
    h = lower_hull(X, v)
    meta = {"grid": asdict(config), "solver_version": SOLVER_VERSION, "J": str(spin)}
    curve = BoundCurve(SM_F, (spin,), X[h], np.maximum(v[h], 0.0), sl[h], meta)
    cache.store(key, config, curve.to_dict())
    return curve
