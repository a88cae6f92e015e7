"""Verification suite for evolution variational inequalities and dissipation.

Checks run over sampled (time, reference point) grids.  A differential
inequality  d+/dt phi(t) <= RHS(t)  is verified in its step-integrated
form on each grid cell,

    [phi(t_{i+1}) - phi(t_i)] / h  <=  [RHS(t_i) + RHS(t_{i+1})] / 2 + budget,

which the inequality implies by integration and which is second-order
accurate; comparing the quotient against the left endpoint alone carries
a first-order bias proportional to the curve's acceleration and produces
false failures exactly at equality configurations.  The budget

    budget = abs + rel * scale + C * h^2 * (1 + L_loc^4)

uses a local Lipschitz estimate L_loc taken from the curve itself, so
genuine violations (wrong parameters, jittered points) exceed it by
orders of magnitude while discretization residue stays inside.

Reference points are sampled in three strata: near the curve (within one
local Lipschitz step), mid-range in the sampling box, and hugging the
domain boundary.  The inequality for curvature K and dimension N < 0 is
checked in three algebraically equivalent forms ("raw" on the squared
half-angle kernel, "i"/"ii" on the squared distance), in an integrated
window form with no differentiation at all, and in a localized form
restricted to balls.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .coefficients import CurvatureParams, c_values, s_values
from .convexity import sampling_box
from .core import DEFAULT_TOL, SampleSpec, Tolerance
from .errors import (
    DisjointWindows,
    KZero,
    ParamOutOfRange,
    PointOutsideDomain,
    StepUnderflow,
    TooFewSamples,
)
from .flows import Curve
from .functionals import Functional
from .spaces import Geodesic, Interval

_BOUNDARY_MARGIN = 1e-3
_SUP_LEVELS = 12
_STEP_BIAS_COEFF = 20.0  # C in the step-residual budget


@dataclass
class EviReport:
    """Outcome of a variational-inequality check.

    max_violation is the worst excess of the residual over the
    discretization-aware budget (pass iff <= tolerance, default 0);
    max_residual keeps the raw worst residual for equality-case asserts.
    """

    form: str
    params: dict
    z_samples: int
    t_samples: int
    max_violation: float
    worst: Optional[tuple]
    passed: bool
    tolerance: float = 0.0
    max_residual: float = -math.inf
    meta: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        out = {"form": self.form}
        out.update(self.params)
        out["z_samples"] = self.z_samples
        out["t_samples"] = self.t_samples
        out["max_violation"] = self.max_violation
        out["max_residual"] = self.max_residual
        out["worst"] = list(self.worst) if self.worst else None
        out["pass"] = bool(self.passed)
        return out


@dataclass
class EnergyAudit:
    """Per-sample dissipation data along a curve.

    residual(t) = -df/dt - speed^2/2 - slope^2/2 (central differences,
    one-sided at the ends); ede_residual integrates the same balance over
    the window.  budget is the discretization-aware per-sample allowance.
    """

    times: np.ndarray
    speed: np.ndarray
    slope: np.ndarray
    energy: np.ndarray
    residual: np.ndarray
    budget: np.ndarray
    ede_residual: float

    @property
    def passes_pointwise_balance(self) -> bool:
        return bool((np.abs(self.residual) <= self.budget).all())

    @property
    def fails_dissipation_inequality(self) -> bool:
        """True when dissipation falls short somewhere beyond the budget."""
        return bool((self.residual < -self.budget).any())


@dataclass(frozen=True)
class Bracket:
    """Supremum of scaled forward difference quotients of d^2 along rays."""

    value: float


@dataclass(frozen=True)
class ContractionRate:
    max_log_slope: float
    fitted_rate: float
    times: np.ndarray
    distances: np.ndarray


# ---------------------------------------------------------------------------
# elementary estimators
# ---------------------------------------------------------------------------

def forward_upper_derivative(g: Callable[[float], float], t: float,
                             tol: Tolerance = DEFAULT_TOL,
                             h0: float = 0.25, tail: int = 3) -> float:
    """limsup of (g(t+h) - g(t))/h as h -> 0+.

    Difference quotients over h = h0 * 2^-k down to tol.h_min; the max of
    the finest `tail` levels estimates the limsup.
    """
    if h0 < tol.h_min:
        raise StepUnderflow(f"h0={h0} below h_min={tol.h_min}")
    g0 = float(g(t))
    quotients = []
    h = float(h0)
    while h >= tol.h_min:
        quotients.append((float(g(t + h)) - g0) / h)
        h *= 0.5
    return float(max(quotients[-tail:]))


def metric_derivative(c: Curve) -> np.ndarray:
    """Central-difference metric speed, one-sided at the ends."""
    if c.n_samples < 3:
        raise TooFewSamples("metric derivative needs >= 3 samples")
    t, x = c.times, c.points
    diffs = x[1:] - x[:-1]
    seg = np.abs(diffs) if c.is_1d else np.linalg.norm(diffs, axis=-1)
    out = np.empty(c.n_samples)
    gaps = x[2:] - x[:-2]
    central = np.abs(gaps) if c.is_1d else np.linalg.norm(gaps, axis=-1)
    out[1:-1] = central / (t[2:] - t[:-2])
    out[0] = seg[0] / (t[1] - t[0])
    out[-1] = seg[-1] / (t[-1] - t[-2])
    return out


def _interval_speeds(c: Curve) -> np.ndarray:
    diffs = c.points[1:] - c.points[:-1]
    seg = np.abs(diffs) if c.is_1d else np.linalg.norm(diffs, axis=-1)
    return seg / np.diff(c.times)


def _local_lipschitz(c: Curve, window: int = 3) -> np.ndarray:
    """Per-interval speed bound: max of nearby interval speeds."""
    v = _interval_speeds(c)
    out = np.empty_like(v)
    for i in range(len(v)):
        lo = max(0, i - window)
        hi = min(len(v), i + window + 1)
        out[i] = v[lo:hi].max()
    return out


def _budget_lipschitz(c: Curve, stride: int = 8) -> np.ndarray:
    """Speed estimate feeding the discretization budget.

    The smaller of the local per-cell bound and twice a stride-averaged
    speed.  The two agree on smooth curves; on noisy data the per-cell
    bound inflates like noise/h and would blow the budget up, while the
    stride average stays at the noise/(stride*h) scale, so violations
    introduced by the noise remain visible.
    """
    local = _local_lipschitz(c)
    m = c.n_samples
    i = np.arange(len(local))
    lo = np.maximum(i - stride, 0)
    hi = np.minimum(i + stride, m - 1)
    gaps = c.points[hi] - c.points[lo]
    span = np.abs(gaps) if c.is_1d else np.linalg.norm(gaps, axis=-1)
    avg = span / (c.times[hi] - c.times[lo])
    return np.minimum(local, 2.0 * avg + 1e-12)


def _dists_to(c_points_i, zs, one_d: bool) -> np.ndarray:
    if one_d:
        return np.abs(zs - c_points_i)
    return np.linalg.norm(zs - c_points_i[None, :], axis=-1)


def _point_norm(x) -> float:
    return abs(float(x)) if np.ndim(x) == 0 else float(np.linalg.norm(x))


# ---------------------------------------------------------------------------
# reference-point sampling
# ---------------------------------------------------------------------------

def _stratified_z(fn: Functional, x_t, step: float, rng, n: int):
    """Near-curve / mid-range / near-boundary reference points."""
    box = sampling_box(fn)
    one_d = isinstance(fn.space, Interval)
    n_near = n // 3
    n_mid = n // 3
    n_bnd = n - n_near - n_mid
    if one_d:
        lo, hi = float(box[0]), float(box[1])
        near = x_t + step * rng.uniform(-1.0, 1.0, size=n_near)
        near = np.clip(near, lo, hi)
        mid = rng.uniform(lo, hi, size=n_mid)
        half = n_bnd // 2
        bnd_lo = lo + _BOUNDARY_MARGIN * rng.uniform(0.0, 1.0, size=half)
        bnd_hi = hi - _BOUNDARY_MARGIN * rng.uniform(0.0, 1.0, size=n_bnd - half)
        return np.concatenate([near, mid, np.clip(bnd_lo, lo, hi),
                               np.clip(bnd_hi, lo, hi)])
    lo = np.asarray(box[0], float)
    hi = np.asarray(box[1], float)
    dim = lo.size
    dirs = rng.normal(size=(n_near, dim))
    dirs /= np.maximum(np.linalg.norm(dirs, axis=1, keepdims=True), 1e-300)
    near = x_t[None, :] + step * rng.uniform(0, 1, size=(n_near, 1)) * dirs
    mid = rng.uniform(lo, hi, size=(n - n_near, dim))
    return np.clip(np.concatenate([near, mid], axis=0), lo, hi)


def _time_indices(c: Curve, t_samples: int) -> np.ndarray:
    m = c.n_samples
    if m < 2:
        raise TooFewSamples("need at least two samples for a forward step")
    return np.unique(np.linspace(0, m - 2, min(t_samples, m - 1)).round()
                     .astype(int))


# ---------------------------------------------------------------------------
# variational inequality checks
# ---------------------------------------------------------------------------

def _step_budget(tol: Tolerance, scale, L: float, h: float):
    return tol.abs + tol.rel * scale + _STEP_BIAS_COEFF * h * h * (1.0 + L ** 4)


def _reduce_evi(form, params, n_z, idx, times, viol_rows, res_rows, wit_rows):
    best = -math.inf
    worst = None
    max_res = -math.inf
    for t, v, r, w in zip(times, viol_rows, res_rows, wit_rows):
        if r > max_res:
            max_res = r
        if v > best:
            best = v
            worst = (float(t), w)
    return EviReport(form=form, params=params, z_samples=n_z,
                     t_samples=len(idx), max_violation=best, worst=worst,
                     passed=best <= 0.0, max_residual=max_res)


def _row_reduce(excess, residual, zs, one_d):
    finite = np.where(np.isfinite(excess), excess, -math.inf)
    j = int(np.argmax(finite))
    w = float(zs[j]) if one_d else zs[j].tolist()
    res = np.where(np.isfinite(residual), residual, -math.inf)
    return float(finite[j]), float(res.max()), w


def _lambda_rows(c, gn, lam, spec, tol, t_samples, one_d, z_maker):
    idx = _time_indices(c, t_samples)
    L = _budget_lipschitz(c)
    L_step = _local_lipschitz(c)
    g_curve = gn.values(c.points)
    if not np.isfinite(g_curve[idx]).all() or \
            not np.isfinite(g_curve[idx + 1]).all():
        raise PointOutsideDomain("curve leaves the finiteness domain of g")
    viol_rows, res_rows, wit_rows = [], [], []
    n_z = 0
    for i in idx:
        h = c.times[i + 1] - c.times[i]
        zs, keep_extra = z_maker(i, max(L_step[i] * h, 1e-3))
        n_z = len(zs)
        gz = gn.values(zs)
        keep = np.isfinite(gz)
        if keep_extra is not None:
            keep &= keep_extra
        d0 = _dists_to(c.points[i], zs, one_d)
        d1 = _dists_to(c.points[i + 1], zs, one_d)
        q = (d1 ** 2 - d0 ** 2) / (2.0 * h)
        rhs0 = gz - g_curve[i] - 0.5 * lam * d0 ** 2
        rhs1 = gz - g_curve[i + 1] - 0.5 * lam * d1 ** 2
        residual = q - 0.5 * (rhs0 + rhs1)
        residual = np.where(keep, residual, -math.inf)
        scale = np.maximum(1.0, np.where(keep, np.abs(rhs0), 1.0))
        excess = residual - _step_budget(tol, scale, L[i], h)
        v, r, w = _row_reduce(excess, residual, zs, one_d)
        viol_rows.append(v)
        res_rows.append(r)
        wit_rows.append(w)
    return idx, viol_rows, res_rows, wit_rows, n_z


def check_evi_lambda(c: Curve, gn: Functional, lam: float, spec: SampleSpec,
                     tol: Tolerance = DEFAULT_TOL, t_samples: int = 50,
                     z_override=None) -> EviReport:
    """Step-integrated check of the modulus-lambda variational inequality."""
    one_d = isinstance(gn.space, Interval)
    rng = spec.rng()

    def z_maker(i, step):
        if z_override is not None:
            return np.asarray(z_override, dtype=float), None
        return _stratified_z(gn, c.point(i), step, rng, spec.count), None

    idx, viol, res, wit, n_z = _lambda_rows(c, gn, lam, spec, tol, t_samples,
                                            one_d, z_maker)
    return _reduce_evi("evi_lambda", {"lambda": lam}, n_z, idx,
                       c.times[idx], viol, res, wit)


def _ratio_d_over_s(p: CurvatureParams, d: np.ndarray) -> np.ndarray:
    """d / s(d) with the limit value 1 at d = 0."""
    s = s_values(p, d)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(d > 0, d / np.where(s != 0, s, 1.0), 1.0)


def _half_kernel_term(p: CurvatureParams, d: np.ndarray) -> np.ndarray:
    """d * s(d/2)^2 / s(d) with the limit value 0 at d = 0."""
    s = s_values(p, d)
    sh = s_values(p, d / 2.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(d > 0, d * sh ** 2 / np.where(s != 0, s, 1.0), 0.0)


EVI_KN_FORMS = ("raw", "i", "ii")


def _kn_rhs(form, p, d, ratio):
    """Right-hand side of the chosen form at one time sample."""
    if form == "raw":
        u = s_values(p, d / 2.0) ** 2
        return 0.5 * p.N * (1.0 - ratio) - p.K * u
    dos = _ratio_d_over_s(p, d)
    if form == "i":
        return p.N * dos * (1.0 - ratio) - 2.0 * p.K * _half_kernel_term(p, d)
    return p.N * dos * (c_values(p, d) - ratio)


def check_evi_kn(c: Curve, fn: Functional, p: CurvatureParams, form: str,
                 spec: SampleSpec, tol: Tolerance = DEFAULT_TOL,
                 t_samples: int = 50, z_domain: str = "extended",
                 z_override=None) -> EviReport:
    """Step-integrated check of the dimensional variational inequality.

    form "raw" tests the inequality on the squared half-angle kernel;
    forms "i" and "ii" test the equivalent inequalities on the squared
    distance.  For K < 0, reference points beyond the singular distance
    cap are skipped at each time sample.  z ranges over the extended
    domain (f < +inf) by default, or over finite-f points with
    z_domain="closure".
    """
    if form not in EVI_KN_FORMS:
        raise ParamOutOfRange(f"form must be one of {EVI_KN_FORMS}")
    if z_domain not in ("extended", "closure"):
        raise ParamOutOfRange("z_domain must be 'extended' or 'closure'")
    one_d = isinstance(fn.space, Interval)
    idx = _time_indices(c, t_samples)
    L = _budget_lipschitz(c)
    L_step = _local_lipschitz(c)
    rng = spec.rng()
    f_curve = fn.values(c.points)
    if not np.isfinite(f_curve[idx]).all() or \
            not np.isfinite(f_curve[idx + 1]).all():
        raise PointOutsideDomain("curve leaves the finiteness domain of f")
    g_curve = -f_curve / p.N  # log of the exponential transform
    cap = p.theta_singular
    viol_rows, res_rows, wit_rows = [], [], []
    n_z = 0
    for i in idx:
        h = c.times[i + 1] - c.times[i]
        if z_override is not None:
            zs = np.asarray(z_override, dtype=float)
        else:
            zs = _stratified_z(fn, c.point(i), max(L_step[i] * h, 1e-3), rng,
                               spec.count)
        n_z = len(zs)
        fz = fn.values(zs)
        keep = fz < math.inf if z_domain == "extended" else np.isfinite(fz)
        d0 = _dists_to(c.points[i], zs, one_d)
        d1 = _dists_to(c.points[i + 1], zs, one_d)
        if p.K < 0:
            keep &= (d0 < cap) & (d1 < cap)
        with np.errstate(over="ignore"):
            ratio0 = np.exp(-fz / p.N - g_curve[i])
            ratio1 = np.exp(-fz / p.N - g_curve[i + 1])
        if form == "raw":
            u0 = s_values(p, d0 / 2.0) ** 2
            u1 = s_values(p, d1 / 2.0) ** 2
            q = (u1 - u0) / h
            kernel_gain = c_values(p, d0 / 2.0) ** 2 \
                + abs(p.K / p.N) * s_values(p, d0 / 2.0) ** 2
        else:
            q = (d1 ** 2 - d0 ** 2) / (2.0 * h)
            kernel_gain = 1.0
        rhs0 = _kn_rhs(form, p, d0, ratio0)
        rhs1 = _kn_rhs(form, p, d1, ratio1)
        residual = q - 0.5 * (rhs0 + rhs1)
        residual = np.where(keep, residual, -math.inf)
        with np.errstate(invalid="ignore"):
            scale = np.maximum(1.0, np.where(np.isfinite(rhs0),
                                             np.abs(rhs0), 1.0))
        budget = tol.abs + tol.rel * scale \
            + _STEP_BIAS_COEFF * kernel_gain * h * h * (1.0 + L[i] ** 4)
        excess = residual - budget
        v, r, w = _row_reduce(excess, residual, zs, one_d)
        viol_rows.append(v)
        res_rows.append(r)
        wit_rows.append(w)
    return _reduce_evi(f"evi_kn_{form}", {"K": p.K, "N": p.N}, n_z, idx,
                       c.times[idx], viol_rows, res_rows, wit_rows)


def check_evi_integrated(c: Curve, fn: Functional, p: CurvatureParams,
                         spec: SampleSpec, tol: Tolerance = DEFAULT_TOL,
                         t_samples: int = 50) -> EviReport:
    """Integrated window form of the dimensional inequality (K != 0 only).

    Compares exponential-window gains of the squared half-angle kernel
    against the transform ratio at the window end; no numerical
    differentiation is involved.
    """
    if p.K == 0:
        raise KZero("the integrated form needs K != 0")
    one_d = isinstance(fn.space, Interval)
    if c.n_samples < 2:
        raise TooFewSamples("need at least two samples")
    rng = spec.rng()
    zs = _stratified_z(fn, c.point(0), 0.5, rng, spec.count)
    fz = fn.values(zs)
    keep0 = fz < math.inf
    f_curve = fn.values(c.points)
    if not np.isfinite(f_curve).all():
        raise PointOutsideDomain("curve leaves the finiteness domain of f")
    d_all = np.abs(zs[None, :] - c.points[:, None]) if one_d else \
        np.linalg.norm(zs[None, :, :] - c.points[:, None, :], axis=-1)
    running_max = np.maximum.accumulate(d_all, axis=0)
    u_all = s_values(p, d_all / 2.0) ** 2
    t0 = c.times[0]
    idx = np.unique(np.linspace(1, c.n_samples - 1,
                                min(t_samples, c.n_samples - 1)).round()
                    .astype(int))
    cap = p.theta_singular
    viol_rows, res_rows, wit_rows = [], [], []
    for j in idx:
        t = c.times[j] - t0
        ekt = math.exp(p.K * t)
        with np.errstate(over="ignore"):
            ratio = np.exp((-fz + f_curve[j]) / p.N)
        lhs_gain = ekt * u_all[j] - u_all[0]
        rhs_gain = p.N * (ekt - 1.0) / (2.0 * p.K) * (1.0 - ratio)
        residual = lhs_gain - rhs_gain
        keep = keep0.copy()
        if p.K < 0:
            keep &= running_max[j] < cap
        residual = np.where(keep, residual, -math.inf)
        scale = np.maximum(1.0, np.where(np.isfinite(rhs_gain),
                                         np.abs(rhs_gain), 1.0))
        excess = residual - (tol.abs + tol.rel * scale)
        v, r, w = _row_reduce(excess, residual, zs, one_d)
        viol_rows.append(v)
        res_rows.append(r)
        wit_rows.append(w)
    return _reduce_evi("evi_integrated", {"K": p.K, "N": p.N}, len(zs), idx,
                       c.times[idx], viol_rows, res_rows, wit_rows)


def check_evi_local(c: Curve, gn: Functional, lam: float, radius: float,
                    spec: SampleSpec, tol: Tolerance = DEFAULT_TOL,
                    t_samples: int = 50,
                    z_filter: Optional[Callable] = None) -> EviReport:
    """Localized version: reference points restricted to balls around the
    curve (optionally filtered further, e.g. to a sublevel set)."""
    if not radius > 0:
        raise ParamOutOfRange("radius must be > 0")
    one_d = isinstance(gn.space, Interval)
    box = sampling_box(gn)
    rng = spec.rng()

    def z_maker(i, step):
        x_t = c.point(i)
        if one_d:
            lo = max(float(box[0]), x_t - radius)
            hi = min(float(box[1]), x_t + radius)
            zs = rng.uniform(lo, hi, size=spec.count)
        else:
            dirs = rng.normal(size=(spec.count, gn.space.n))
            dirs /= np.maximum(np.linalg.norm(dirs, axis=1, keepdims=True),
                               1e-300)
            radii = radius * rng.uniform(0, 1, size=(spec.count, 1)) ** (
                1.0 / gn.space.n)
            zs = np.clip(x_t[None, :] + radii * dirs,
                         np.asarray(box[0]), np.asarray(box[1]))
        extra = None
        if z_filter is not None:
            extra = np.asarray([bool(z_filter(z)) for z in zs])
        return zs, extra

    idx, viol, res, wit, n_z = _lambda_rows(c, gn, lam, spec, tol, t_samples,
                                            one_d, z_maker)
    return _reduce_evi("evi_local", {"lambda": lam, "radius": radius}, n_z,
                       idx, c.times[idx], viol, res, wit)


# ---------------------------------------------------------------------------
# slopes
# ---------------------------------------------------------------------------

def _extrapolated_sup(signed_rows: np.ndarray) -> float:
    """Limit estimate of direction-wise quotients over halving radii.

    signed_rows has shape (directions, levels), coarse to fine.  The limit
    along each direction is Richardson-extrapolated from the two finest
    levels: exact for quotients linear in the radius, and the identity at
    kinks, where quotients are radius-independent.  Keeping the raw finest
    quotient as well would reintroduce the O(radius) bias on directions
    with concave profiles.  Negative parts are floored at zero.
    """
    finest = signed_rows[:, -1]
    prev = signed_rows[:, -2] if signed_rows.shape[1] > 1 else finest
    ext = 2.0 * finest - prev
    return float(np.max(np.maximum(ext, 0.0)))


def _slope_definition_1d(fn: Functional, y: float, r0: float, levels: int,
                         fy: float) -> float:
    radii = r0 * 0.5 ** np.arange(levels)
    sp = fn.space
    rows = []
    for side in (1.0, -1.0):
        probes = y + side * radii
        inside = np.array([sp.contains(z) for z in probes])
        vals = np.full(levels, math.nan)
        if inside.any():
            vals[inside] = fn.values(probes[inside])
        with np.errstate(invalid="ignore"):
            quot = (fy - vals) / radii
        ok = inside & ~np.isnan(quot)
        if ok.sum() >= 2:
            rows.append(quot[ok][-2:])
        elif ok.sum() == 1:
            rows.append(np.repeat(quot[ok][-1], 2))
    if not rows:
        return 0.0
    return _extrapolated_sup(np.asarray(rows))


def _slope_definition_rn(fn: Functional, y: np.ndarray, r0: float,
                         levels: int, fy: float, rng) -> float:
    dim = fn.space.n
    dirs = rng.normal(size=(32, dim))
    dirs /= np.maximum(np.linalg.norm(dirs, axis=1, keepdims=True), 1e-300)
    r_prev, r_fin = r0 * 0.5 ** (levels - 2), r0 * 0.5 ** (levels - 1)
    rows = np.empty((len(dirs), 2))
    for col, r in enumerate((r_prev, r_fin)):
        vals = fn.values(y[None, :] + r * dirs)
        rows[:, col] = (fy - vals) / r
    return _extrapolated_sup(rows)


def slope(fn: Functional, y, method: str, spec: Optional[SampleSpec] = None,
          p: Optional[CurvatureParams] = None, R: Optional[float] = None,
          tol: Tolerance = DEFAULT_TOL, r0: Optional[float] = None,
          levels: int = _SUP_LEVELS) -> float:
    """Descending slope at y.

    "definition": limsup of the negative part of difference quotients,
    estimated over geometrically shrinking radii with direction-wise
    extrapolation at the finest levels.  "formula": the kernel-weighted
    supremum over a ball of radius R, which needs curvature parameters
    and, for K < 0, R below the singular distance cap.
    """
    fy = fn.value(y)
    if not math.isfinite(fy):
        raise PointOutsideDomain(f"f({y!r}) = {fy}")
    if method == "definition":
        one_d = isinstance(fn.space, Interval)
        scale = 1.0 + (abs(float(y)) if one_d else float(np.linalg.norm(y)))
        r_start = r0 if r0 is not None else 0.0625 * scale
        if one_d:
            return _slope_definition_1d(fn, float(y), r_start, levels, fy)
        rng = (spec or SampleSpec(seed=0, count=32)).rng()
        return _slope_definition_rn(fn, np.asarray(y, float), r_start,
                                    levels, fy, rng)
    if method == "formula":
        if p is None or R is None:
            raise ParamOutOfRange("formula method needs p=(K,N) and R")
        if p.K < 0 and R >= p.theta_singular:
            raise ParamOutOfRange("R must be below the singular distance cap")
        if not isinstance(fn.space, Interval):
            raise ParamOutOfRange("formula slope implemented on intervals")
        y = float(y)
        radii = R * 0.5 ** np.arange(levels)
        zs = list(y + radii) + list(y - radii)
        if spec is not None:
            rng = spec.rng()
            zs += list(y + R * rng.uniform(-1, 1, size=spec.count))
        sp = fn.space
        zs = np.asarray([z for z in zs if sp.contains(z) and z != y])
        if len(zs) == 0:
            return 0.0
        fz = fn.values(zs)
        keep = fz < math.inf
        zs, fz = zs[keep], fz[keep]
        d = np.abs(zs - y)
        with np.errstate(over="ignore"):
            ratio = np.exp((-fz + fy) / p.N)
        expr = p.N / s_values(p, d) * (1.0 - ratio) \
            - p.K * s_values(p, d / 2.0) / c_values(p, d / 2.0)
        return float(np.max(np.maximum(-expr, 0.0)))
    raise ParamOutOfRange("method must be 'definition' or 'formula'")


# ---------------------------------------------------------------------------
# energy audit
# ---------------------------------------------------------------------------

def energy_audit(c: Curve, fn: Functional, tol: Tolerance = DEFAULT_TOL,
                 slope_r0: float = 1e-3,
                 spec: Optional[SampleSpec] = None) -> EnergyAudit:
    """Dissipation balance along a curve.

    Central differences for -df/dt and the metric speed; the slope uses
    the definition estimator started at a small radius.  The budget per
    sample covers the quadratic bias of the central differences plus the
    slope estimator's resolution floor.
    """
    if c.n_samples < 3:
        raise TooFewSamples("energy audit needs >= 3 samples")
    energy = fn.values(c.points)
    if not np.isfinite(energy).all():
        raise PointOutsideDomain("curve leaves the finiteness domain")
    speed = metric_derivative(c)
    slopes = np.empty(c.n_samples)
    for i in range(c.n_samples):
        slopes[i] = slope(fn, c.point(i), "definition", spec, tol=tol,
                          r0=slope_r0 * (1.0 + _point_norm(c.point(i))))
    t = c.times
    dfdt = np.empty(c.n_samples)
    dfdt[1:-1] = (energy[2:] - energy[:-2]) / (t[2:] - t[:-2])
    dfdt[0] = (energy[1] - energy[0]) / (t[1] - t[0])
    dfdt[-1] = (energy[-1] - energy[-2]) / (t[-1] - t[-2])
    residual = -dfdt - 0.5 * speed ** 2 - 0.5 * slopes ** 2
    h = np.empty(c.n_samples)
    h[1:-1] = 0.5 * (t[2:] - t[:-2])
    h[0] = t[1] - t[0]
    h[-1] = t[-1] - t[-2]
    r_fin = slope_r0 * 0.5 ** (_SUP_LEVELS - 1)
    budget = (tol.abs + 4.0 * h ** 2 * (1.0 + speed ** 6)
              + 1e-4 * r_fin * (1.0 + np.abs(slopes) ** 3)
              + tol.rel * (1.0 + speed ** 2 + slopes ** 2))
    # the two window ends use one-sided differences (first-order bias);
    # pointwise balance is judged on interior samples only
    budget[0] = budget[-1] = math.inf
    dissipation = 0.5 * speed ** 2 + 0.5 * slopes ** 2
    ede = abs(energy[-1] - energy[0] + np.trapezoid(dissipation, t))
    return EnergyAudit(times=t, speed=speed, slope=slopes, energy=energy,
                       residual=residual, budget=budget,
                       ede_residual=float(ede))


# ---------------------------------------------------------------------------
# bracket against geodesics
# ---------------------------------------------------------------------------

def bracket(c: Curve, t0: float, g: Geodesic, tol: Tolerance = DEFAULT_TOL,
            levels: int = _SUP_LEVELS) -> Bracket:
    """Sup over ray parameters s of the scaled forward quotient of d^2.

    Estimates sup_s (1/2s) d+/dt d^2(y_t, z_s) at a grid time t0 with the
    time derivative at the curve's grid resolution; ray parameters are
    kept well above the grid step, where the scaled quotient is
    resolution-limited.
    """
    i = int(np.argmin(np.abs(c.times - t0)))
    if abs(c.times[i] - t0) > 1e-9 * (1.0 + abs(t0)):
        raise ParamOutOfRange(f"t0={t0} is not a grid time")
    if i >= c.n_samples - 1:
        raise ParamOutOfRange("t0 must have a forward neighbor")
    x0, x1 = c.point(i), c.point(i + 1)
    p0 = g.p0
    gap = abs(float(p0) - float(x0)) if c.is_1d else \
        float(np.linalg.norm(np.asarray(p0) - np.asarray(x0)))
    if gap > 1e-9 * (1.0 + _point_norm(x0)):
        raise ParamOutOfRange("geodesic must emanate from the curve point")
    h = c.times[i + 1] - c.times[i]
    s_floor = min(0.25, 256.0 * h)
    s_list = [0.5 ** k for k in range(levels) if 0.5 ** k >= s_floor] or [1.0]
    best = -math.inf
    for s in s_list:
        z = g(s)
        if c.is_1d:
            d0, d1 = abs(x0 - z), abs(x1 - z)
        else:
            d0 = float(np.linalg.norm(x0 - z))
            d1 = float(np.linalg.norm(x1 - z))
        q = (d1 ** 2 - d0 ** 2) / h / (2.0 * s)
        best = max(best, q)
    return Bracket(value=float(best))


# ---------------------------------------------------------------------------
# contraction certificates
# ---------------------------------------------------------------------------

def contraction_rate(c1: Curve, c2: Curve, r: float,
                     s_grid=None) -> ContractionRate:
    """Measured upper bound for the exponential rate between two curves.

    Reports the max over grid times s > r of (log d(s) - log d(r))/(s - r)
    plus a least-squares fitted rate of log d(s) over [r, end].
    """
    lo = max(c1.times[0], c2.times[0])
    hi = min(c1.times[-1], c2.times[-1])
    if not lo < hi:
        raise DisjointWindows(f"windows {c1.window} and {c2.window}")
    if s_grid is None:
        s_grid = c1.times[(c1.times >= lo) & (c1.times <= hi)]
    s_grid = np.asarray(s_grid, dtype=float)
    if len(s_grid) < 2:
        raise DisjointWindows("common window holds fewer than two samples")
    if not (lo - 1e-12 <= r <= hi):
        raise ParamOutOfRange(f"r={r} outside the common window [{lo}, {hi}]")
    x1 = c1.at(s_grid)
    x2 = c2.at(s_grid)
    gaps = x1 - x2
    d = np.abs(gaps) if c1.is_1d else np.linalg.norm(gaps, axis=-1)
    d = np.maximum(d, 1e-300)
    log_d = np.log(d)
    dr = float(np.interp(r, s_grid, log_d))
    after = s_grid > r + 1e-12
    if not after.any():
        raise ParamOutOfRange("no grid times after r")
    slopes = (log_d[after] - dr) / (s_grid[after] - r)
    sel = s_grid >= r - 1e-12
    A = np.vstack([s_grid[sel], np.ones(int(sel.sum()))]).T
    fit = np.linalg.lstsq(A, log_d[sel], rcond=None)[0][0]
    return ContractionRate(max_log_slope=float(np.max(slopes)),
                           fitted_rate=float(fit),
                           times=s_grid, distances=d)
