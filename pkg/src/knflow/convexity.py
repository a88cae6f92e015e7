"""Numerical verifiers for convexity inequalities along geodesics.

Two flavors: the classical quadratic-correction inequality with modulus
lambda, and the dimensional inequality in which the endpoint values of the
exponential transform are weighted by distortion ratio coefficients.  On
the model spaces used here geodesics are unique, so the existential
quantifier in both definitions collapses onto the straight segment.

Violations are measured against a scale-aware budget

    residual <= abs + rel * max(value(x0), value(x1), 1)

because the transform spans many orders of magnitude across a domain.  A
report stores the worst excess over that budget plus a reproducible
witness (x0, x1, t).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .coefficients import CurvatureParams, sigma_values
from .core import DEFAULT_TOL, SampleSpec, Tolerance
from .errors import BadBracket, EmptyDomain, ParamOutOfRange, UnboundedAbove
from .functionals import Functional, fN_functional
from .spaces import Interval

T_GRID_SIZE = 33  # t in {k/32}
_BOX_MARGIN = 1e-3
_BOX_EXTENT = 3.0


@dataclass
class ConvexityReport:
    """Outcome of a convexity check.

    max_violation is the largest excess of the residual over the
    scale-aware budget; the check passes iff it does not exceed
    `tolerance` (zero: the budget is already folded in).  max_residual
    keeps the raw, un-budgeted worst residual for equality-case asserts.
    """

    kind: str
    params: dict
    pairs_tested: int
    t_grid_size: int
    max_violation: float
    worst_witness: Optional[tuple]
    passed: bool
    tolerance: float = 0.0
    max_residual: float = -math.inf
    meta: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        out = {"kind": self.kind}
        out.update(self.params)
        out["pairs"] = self.pairs_tested
        out["t_grid"] = self.t_grid_size
        out["max_violation"] = self.max_violation
        out["max_residual"] = self.max_residual
        out["witness"] = list(self.worst_witness) if self.worst_witness else None
        out["pass"] = bool(self.passed)
        return out


def sampling_box(fn: Functional, margin: float = _BOX_MARGIN,
                 extent: float = _BOX_EXTENT):
    """Compact sub-box of the domain, shrunk by `margin` at open ends."""
    if fn.sample_box is not None:
        return fn.sample_box
    sp = fn.space
    if isinstance(sp, Interval):
        lo = sp.a + margin if sp.open_a else sp.a
        hi = sp.b - margin if sp.open_b else sp.b
        if not math.isfinite(lo):
            lo = -extent
        if not math.isfinite(hi):
            hi = max(extent, lo + 1.0)
        if not lo < hi:
            raise EmptyDomain(f"no room to sample inside {sp}")
        return (lo, hi)
    n = sp.n
    return (-extent * np.ones(n), extent * np.ones(n))


def _draw_points(rng, box, count, dim1: bool):
    lo, hi = box
    if dim1:
        return rng.uniform(float(lo), float(hi), size=count)
    lo = np.asarray(lo, float)
    hi = np.asarray(hi, float)
    return rng.uniform(lo, hi, size=(count, lo.size))


def _pair_distances(x0, x1, dim1: bool):
    if dim1:
        return np.abs(x1 - x0)
    return np.linalg.norm(x1 - x0, axis=-1)


def _geodesic_grid(x0, x1, ts, dim1: bool):
    """Points gamma_t for every pair and every t; shape (pairs, t[, dim])."""
    if dim1:
        return (1 - ts)[None, :] * x0[:, None] + ts[None, :] * x1[:, None]
    return ((1 - ts)[None, :, None] * x0[:, None, :]
            + ts[None, :, None] * x1[:, None, :])


def _draw_pairs(fn: Functional, spec: SampleSpec, box, cap: Optional[float]):
    """Seeded pairs from the box, resampling any pair beyond the cap."""
    rng = spec.rng()
    dim1 = isinstance(fn.space, Interval)
    x0 = _draw_points(rng, box, spec.count, dim1)
    x1 = _draw_points(rng, box, spec.count, dim1)
    if cap is not None and math.isfinite(cap):
        for _ in range(1000):
            bad = _pair_distances(x0, x1, dim1) >= cap
            if not bad.any():
                break
            k = int(bad.sum())
            x0[bad] = _draw_points(rng, box, k, dim1)
            x1[bad] = _draw_points(rng, box, k, dim1)
        else:
            raise EmptyDomain("could not sample pairs under the distance cap")
    return x0, x1


def _finite_pair_filter(v0, v1):
    good = np.isfinite(v0) & np.isfinite(v1)
    if not good.any():
        raise EmptyDomain("no sampled pair has finite values")
    return good


def check_lambda_convex(fn: Functional, lam: float, spec: SampleSpec,
                        tol: Tolerance = DEFAULT_TOL,
                        box=None) -> ConvexityReport:
    """Sample-based test of the modulus-lambda convexity inequality."""
    lam = float(lam)
    if math.isnan(lam):
        raise ParamOutOfRange("lambda must be a real number")
    box = box if box is not None else sampling_box(fn)
    dim1 = isinstance(fn.space, Interval)
    x0, x1 = _draw_pairs(fn, spec, box, cap=None)
    f0 = fn.values(x0)
    f1 = fn.values(x1)
    good = _finite_pair_filter(f0, f1)
    x0, x1, f0, f1 = x0[good], x1[good], f0[good], f1[good]
    d = _pair_distances(x0, x1, dim1)
    ts = np.linspace(0.0, 1.0, T_GRID_SIZE)
    gamma = _geodesic_grid(x0, x1, ts, dim1)
    fg = fn.values(gamma if dim1 else gamma.reshape(-1, fn.space.n))
    fg = fg.reshape(len(x0), T_GRID_SIZE)
    chord = ((1 - ts)[None, :] * f0[:, None] + ts[None, :] * f1[:, None]
             - 0.5 * lam * (ts * (1 - ts))[None, :] * (d ** 2)[:, None])
    with np.errstate(invalid="ignore"):
        residual = fg - chord
    residual = np.where(np.isnan(residual), -math.inf, residual)
    scale = np.maximum(1.0, np.maximum(np.abs(f0), np.abs(f1)))[:, None]
    excess = residual - (tol.abs + tol.rel * scale)
    return _reduce_report("lambda", {"lambda": lam}, x0, x1, ts, residual,
                          excess, dim1)


def check_kn_convex(fn: Functional, p: CurvatureParams, spec: SampleSpec,
                    tol: Tolerance = DEFAULT_TOL, box=None,
                    enforce_cap: bool = True) -> ConvexityReport:
    """Sample-based test of the dimensional convexity inequality.

    Pairs come from the extended domain; for K < 0 they are kept below
    the singular distance cap unless enforce_cap=False (singular rows are
    then vacuously satisfied since the right side is +inf).
    """
    box = box if box is not None else sampling_box(fn)
    dim1 = isinstance(fn.space, Interval)
    cap = p.theta_singular if (enforce_cap and p.K < 0) else None
    x0, x1 = _draw_pairs(fn, spec, box, cap)
    g0 = -fn.values(x0) / p.N
    g1 = -fn.values(x1) / p.N
    good = _finite_pair_filter(np.where(g0 < math.inf, 0.0, math.nan),
                               np.where(g1 < math.inf, 0.0, math.nan))
    x0, x1, g0, g1 = x0[good], x1[good], g0[good], g1[good]
    with np.errstate(over="ignore"):
        fN0 = np.exp(g0)
        fN1 = np.exp(g1)
    d = _pair_distances(x0, x1, dim1)
    ts = np.linspace(0.0, 1.0, T_GRID_SIZE)
    gamma = _geodesic_grid(x0, x1, ts, dim1)
    with np.errstate(over="ignore"):
        lhs = np.exp(-fn.values(gamma if dim1 else gamma.reshape(-1, fn.space.n))
                     / p.N).reshape(len(x0), T_GRID_SIZE)
    sig_1mt = sigma_values(p, (1 - ts)[None, :], d[:, None])
    sig_t = sigma_values(p, ts[None, :], d[:, None])
    rhs = _conv_mul(sig_1mt, fN0[:, None]) + _conv_mul(sig_t, fN1[:, None])
    with np.errstate(invalid="ignore"):
        residual = lhs - rhs
    residual = np.where(np.isnan(residual), -math.inf, residual)
    scale = np.maximum(1.0, np.maximum(fN0, fN1))[:, None]
    excess = residual - (tol.abs + tol.rel * scale)
    return _reduce_report("KN", {"K": p.K, "N": p.N}, x0, x1, ts, residual,
                          excess, dim1)


def _conv_mul(coef, val):
    """Elementwise coef*val with the conventions 0*inf = inf*0 = 0."""
    with np.errstate(invalid="ignore"):
        out = coef * val
    zero = (coef == 0.0) | (val == 0.0)
    return np.where(zero, 0.0, out)


def _reduce_report(kind, params, x0, x1, ts, residual, excess, dim1):
    finite_excess = np.where(np.isfinite(excess), excess, -math.inf)
    flat = int(np.argmax(finite_excess))
    i, j = np.unravel_index(flat, excess.shape)
    max_violation = float(finite_excess[i, j])
    witness = (x0[i] if dim1 else x0[i].tolist(),
               x1[i] if dim1 else x1[i].tolist(),
               float(ts[j]))
    max_res = float(np.max(np.where(np.isfinite(residual), residual, -math.inf)))
    return ConvexityReport(
        kind=kind, params=params, pairs_tested=len(x0), t_grid_size=len(ts),
        max_violation=max_violation, worst_witness=witness,
        passed=max_violation <= 0.0, max_residual=max_res,
    )


def check_gluing(fn: Functional, p: CurvatureParams, a: float, b: float,
                 c: float, d: float, tol: Tolerance = DEFAULT_TOL,
                 spec: Optional[SampleSpec] = None) -> bool:
    """Locality of the dimensional inequality on an interval.

    Checks the implication: passing on [a,c] and on [b,d] implies passing
    on [a,d].  Returns the truth value of that implication.
    """
    if not (a < b < c < d):
        raise BadBracket(f"need a<b<c<d, got {(a, b, c, d)}")
    if not isinstance(fn.space, Interval):
        raise ParamOutOfRange("gluing check is for interval functionals")
    if not (fn.space.contains_closure(a) and fn.space.contains_closure(d)):
        raise BadBracket("[a,d] must sit inside the interval domain")
    spec = spec or SampleSpec(seed=20, count=400)
    on_ac = check_kn_convex(fn, p, spec, tol, box=(a, c)).passed
    on_bd = check_kn_convex(fn, p, spec, tol, box=(b, d)).passed
    if not (on_ac and on_bd):
        return True  # implication is vacuous
    return check_kn_convex(fn, p, spec, tol, box=(a, d)).passed


def lifted_modulus(p: CurvatureParams, M) -> float:
    """Convexity modulus inherited by the exponential transform.

    Zero for K >= 0; for K < 0 it is -(K/N) * exp(-M/N) where M bounds the
    functional from above.
    """
    if p.K >= 0:
        return 0.0
    M = float(M)
    if M == math.inf:
        raise UnboundedAbove("K < 0 needs a finite upper bound M")
    if math.isnan(M):
        raise ParamOutOfRange("M must be a real number or +inf")
    return -(p.K / p.N) * math.exp(-M / p.N)


def check_lifting(fn: Functional, p: CurvatureParams, M, spec: SampleSpec,
                  tol: Tolerance = DEFAULT_TOL, box=None) -> ConvexityReport:
    """Check that the exponential transform is lambda-convex with the
    inherited modulus (0 for K >= 0, -(K/N)e^{-M/N} for K < 0)."""
    lam = lifted_modulus(p, M if M is not None else math.inf)
    gN = fN_functional(fn, p)
    report = check_lambda_convex(gN, lam, spec, tol, box=box)
    report.kind = "lifting"
    report.params = {"K": p.K, "N": p.N, "M": None if p.K >= 0 else float(M),
                     "lambda": lam}
    return report
