"""Gradient-curve generation: closed forms, ODE integration, proximal steps.

Three independent routes produce curves:

* ``oracle_flow``   - registered closed-form solutions (exact);
* ``ode_flow``      - adaptive Runge-Kutta integration of dy/dt = -grad f(y);
* ``minimizing_movement`` - the implicit Euler / proximal-point scheme
  U^n = argmin d^2(U^{n-1}, .)/(2 tau) + f(.).

When a trajectory reaches the boundary of the finiteness domain the curve
is continued constantly at the boundary point and the hitting time is
recorded in ``stop_time``.  Several functionals of interest are not
coercive (the proximal objective can be unbounded below); the proximal
solver brackets downhill from the input point and raises
:class:`NotBoundedBelow` rather than returning a diverging iterate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .coefficients import CurvatureParams
from .core import DEFAULT_TOL, Tolerance, require_not_nan
from .errors import (
    BasePointOutsideDomain,
    BlowUp,
    NoOracle,
    NotBoundedBelow,
    ParamOutOfRange,
    PointOutsideSpace,
)
from .functionals import Functional
from .spaces import Interval

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass
class Curve:
    """Sampled curve: strictly increasing time grid plus points.

    points has shape (m,) on intervals and (m, n) on R^n.  stop_time, when
    set, is the time the trajectory reached the domain boundary; the curve
    is constant from there on.
    """

    times: np.ndarray
    points: np.ndarray
    stop_time: Optional[float] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        x = np.asarray(self.points, dtype=float)
        if t.ndim != 1 or len(t) < 1:
            raise ParamOutOfRange("times must be a nonempty 1-d grid")
        if len(t) != len(x):
            raise ParamOutOfRange("times and points must have equal length")
        if t[0] < 0:
            raise ParamOutOfRange("time grid must start at t >= 0")
        if len(t) > 1 and not (np.diff(t) > 0).all():
            raise ParamOutOfRange("time grid must be strictly increasing")
        require_not_nan(t, "curve times")
        require_not_nan(x, "curve points")
        if not np.isfinite(x).all():
            raise ParamOutOfRange("curve points must be finite")
        self.times = t
        self.points = x

    @property
    def n_samples(self) -> int:
        return len(self.times)

    @property
    def is_1d(self) -> bool:
        return self.points.ndim == 1

    @property
    def window(self) -> tuple:
        return float(self.times[0]), float(self.times[-1])

    def point(self, i: int):
        return self.points[i] if self.is_1d else self.points[i].copy()

    def at(self, t):
        """Piecewise-linear interpolation (clamped outside the window)."""
        t = np.asarray(t, dtype=float)
        if self.is_1d:
            return np.interp(t, self.times, self.points)
        cols = [np.interp(t, self.times, self.points[:, j])
                for j in range(self.points.shape[1])]
        return np.stack(cols, axis=-1)

    def segment(self, t_lo: float, t_hi: float) -> "Curve":
        """Sub-curve of the grid points with t_lo <= t <= t_hi."""
        mask = (self.times >= t_lo - 1e-15) & (self.times <= t_hi + 1e-15)
        if not mask.any():
            raise ParamOutOfRange("empty segment window")
        stop = self.stop_time
        if stop is not None and stop > t_hi:
            stop = None
        return Curve(self.times[mask], self.points[mask], stop, dict(self.meta))

    def pre_stop(self, margin: float = 0.0) -> "Curve":
        """Portion strictly before stop_time - margin (whole curve if none)."""
        if self.stop_time is None:
            return self
        return self.segment(self.times[0], self.stop_time - margin - 1e-15)


def _as_grid(grid) -> np.ndarray:
    g = np.asarray(grid, dtype=float)
    if g.ndim != 1 or len(g) < 2:
        raise ParamOutOfRange("grid must contain at least two times")
    if g[0] < 0 or not (np.diff(g) > 0).all():
        raise ParamOutOfRange("grid must be nonnegative and strictly increasing")
    return g


def time_grid(t0: float, t1: float, n: int) -> np.ndarray:
    return _as_grid(np.linspace(float(t0), float(t1), int(n)))


# ---------------------------------------------------------------------------
# closed-form oracles
# ---------------------------------------------------------------------------

ORACLE_NAMES = ("log-x", "log-cosh", "log-cos", "quadratic", "fN-linear")


def oracle_flow(name: str, p: Optional[CurvatureParams], y0, grid,
                c: float = 1.0, a: float = 1.0) -> Curve:
    """Exact samples of a registered closed-form gradient flow."""
    grid = _as_grid(grid)
    meta = {"method": "oracle", "functional": name,
            "K": None if p is None else p.K, "N": None if p is None else p.N}
    if name == "log-x":
        if p is None:
            raise NoOracle("log-x oracle needs curvature parameters")
        y0 = float(y0)
        if y0 < 0:
            raise PointOutsideSpace("log-x flow needs y0 >= 0")
        stop = -y0 * y0 / (2.0 * p.N)
        ys = np.sqrt(np.maximum(y0 * y0 + 2.0 * p.N * grid, 0.0))
        return Curve(grid, ys, stop_time=stop, meta=meta)
    if name == "log-cosh":
        if p is None or p.K <= 0:
            raise NoOracle("log-cosh oracle needs K > 0")
        w = math.sqrt(-p.K / p.N)
        ys = np.arcsinh(math.sinh(w * float(y0)) * np.exp(-p.K * grid)) / w
        return Curve(grid, ys, stop_time=None, meta=meta)
    if name == "log-cos":
        if p is None or p.K >= 0:
            raise NoOracle("log-cos oracle needs K < 0")
        w = math.sqrt(p.K / p.N)
        half = 0.5 * math.pi / w
        y0 = float(y0)
        if not abs(y0) < half:
            raise PointOutsideSpace(f"y0 must lie in (-{half}, {half})")
        s0 = math.sin(w * y0)
        if s0 == 0.0:
            return Curve(grid, np.zeros_like(grid), stop_time=None, meta=meta)
        sgn = math.copysign(1.0, s0)
        stop = math.log(abs(s0)) / p.K  # positive: K < 0, |s0| < 1
        m = np.minimum(abs(s0) * np.exp(-p.K * grid), 1.0)
        ys = sgn * np.arcsin(m) / w
        meta = dict(meta)
        return Curve(grid, ys, stop_time=stop, meta=meta)
    if name == "quadratic":
        y0 = np.asarray(y0, dtype=float)
        decay = np.exp(-float(c) * grid)
        ys = y0 * decay if y0.ndim == 0 else y0[None, :] * decay[:, None]
        meta["c"] = float(c)
        return Curve(grid, ys, stop_time=None, meta=meta)
    if name == "fN-linear":
        y0 = float(y0)
        if y0 < 0:
            raise PointOutsideSpace("fN-linear flow needs y0 >= 0")
        a = float(a)
        ys = np.maximum(y0 - a * grid, 0.0)
        stop = y0 / a if a > 0 else None
        meta["a"] = a
        return Curve(grid, ys, stop_time=stop, meta=meta)
    raise NoOracle(f"no closed form registered under {name!r}")


# ---------------------------------------------------------------------------
# smooth ODE route
# ---------------------------------------------------------------------------

def ode_flow(fn: Functional, y0, grid, rtol: float = 1e-9) -> Curve:
    """Integrate dy/dt = -grad f(y) with an embedded adaptive RK pair.

    Dense output is resampled onto the grid.  On intervals, approach to a
    finite boundary stops the integration and sets stop_time; the curve is
    continued constantly at the boundary.
    """
    if fn.grad is None:
        raise ParamOutOfRange(f"{fn.name} has no analytic gradient")
    grid = _as_grid(grid)
    meta = {"method": "ode", "functional": fn.name, "rtol": rtol}
    # rtol is a global target; local per-step tolerances sit well below it
    loc_rtol = max(1e-13, 1e-2 * rtol)
    loc_atol = max(1e-15, 1e-4 * rtol)

    if isinstance(fn.space, Interval):
        a, b = fn.space.a, fn.space.b
        pad = 1e-13 * (1.0 + abs(float(y0)))

        def rhs(t, y):
            yy = min(max(y[0], a + pad), b - pad)
            return [-float(fn.grad(yy))]

        # the margin keeps the event ahead of the step-size collapse at a
        # gradient blow-up; crossing the last 1e-6 takes O(1e-12) time
        events = []
        if math.isfinite(a):
            eps = 1e-6 * (1.0 + abs(a))

            def hit_a(t, y, _eps=eps):
                return y[0] - (a + _eps)
            hit_a.terminal = True
            hit_a.direction = -1
            events.append(hit_a)
        if math.isfinite(b):
            eps = 1e-6 * (1.0 + abs(b))

            def hit_b(t, y, _eps=eps):
                return (b - _eps) - y[0]
            hit_b.terminal = True
            hit_b.direction = -1
            events.append(hit_b)

        sol = solve_ivp(rhs, (grid[0], grid[-1]), [float(y0)], method="RK45",
                        rtol=loc_rtol, atol=loc_atol, dense_output=True,
                        events=events)
        if sol.status == -1:
            raise BlowUp(f"integration failed: {sol.message}")
        stop = None
        boundary_val = None
        if sol.status == 1:  # a terminal event fired
            times = [float(te[0]) for te in sol.t_events if len(te)]
            stop = min(times)
            y_end = float(sol.sol(stop)[0])
            boundary_val = a if abs(y_end - a) < abs(y_end - b) else b
        t_end = sol.t[-1]
        ys = np.empty_like(grid)
        before = grid <= t_end
        ys[before] = sol.sol(grid[before])[0]
        ys[~before] = boundary_val if boundary_val is not None else ys[before][-1]
        ys = np.clip(ys, a, b)
        require_not_nan(ys, "ode trajectory")
        return Curve(grid, ys, stop_time=stop, meta=meta)

    y0 = np.asarray(y0, dtype=float)

    def rhs(t, y):
        return -np.asarray(fn.grad(y), dtype=float)

    sol = solve_ivp(rhs, (grid[0], grid[-1]), y0, method="RK45",
                    rtol=loc_rtol, atol=loc_atol, dense_output=True)
    if sol.status != 0:
        raise BlowUp(f"integration failed: {sol.message}")
    ys = sol.sol(grid).T
    require_not_nan(ys, "ode trajectory")
    return Curve(grid, ys, stop_time=None, meta=meta)


# ---------------------------------------------------------------------------
# proximal step and minimizing movements
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ProxStep:
    tau: float
    input: object
    output: object
    objective: float


def _golden_section(phi, lo, hi, xtol):
    c = hi - _GOLDEN * (hi - lo)
    d = lo + _GOLDEN * (hi - lo)
    fc, fd = phi(c), phi(d)
    for _ in range(200):
        if hi - lo <= xtol:
            break
        if fc < fd:
            hi, d, fd = d, c, fc
            c = hi - _GOLDEN * (hi - lo)
            fc = phi(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + _GOLDEN * (hi - lo)
            fd = phi(d)
    return 0.5 * (lo + hi)


def prox(fn: Functional, tau: float, v, tol: Tolerance = DEFAULT_TOL) -> ProxStep:
    """One proximal step: minimize d^2(v, .)/(2 tau) + f over the closure.

    1-d: bracketed golden-section search (gradient-polished when an
    analytic gradient is available), output clamped to the closure.
    R^n: damped Newton with gradient-descent fallback.  Raises
    :class:`NotBoundedBelow` when the objective diverges along the search.
    """
    tau = float(tau)
    if not tau > 0:
        raise ParamOutOfRange("tau must be > 0")
    if isinstance(fn.space, Interval):
        return _prox_1d(fn, tau, float(v), tol)
    return _prox_rn(fn, tau, np.asarray(v, dtype=float), tol)


def _prox_1d(fn: Functional, tau: float, v: float, tol: Tolerance) -> ProxStep:
    sp = fn.space
    if not sp.contains_closure(v):
        raise PointOutsideSpace(f"{v} outside the closure of {sp}")
    a, b = sp.a, sp.b

    def phi(w):
        return 0.5 * (w - v) ** 2 / tau + fn.value(w)

    fv = fn.value(v)
    if fv == math.inf:
        raise BasePointOutsideDomain("f(v) = +inf")
    phi_v = fv
    scale = 1.0 + abs(v)

    # local slope bound -> Euler-sized initial step
    delta = 1e-6 * scale
    probes = [w for w in (v - delta, v + delta) if a < w < b]
    G = 1.0
    for w in probes:
        fw = fn.value(w)
        if math.isfinite(fw) and math.isfinite(fv):
            G = max(G, abs(fw - fv) / delta)
    h0 = min(max(tau * G, 1e-12 * scale), max(b - a, 1.0))

    lo_cand = max(a, v - h0)
    hi_cand = min(b, v + h0)
    phi_lo, phi_hi = phi(lo_cand), phi(hi_cand)

    if phi_lo >= phi_v and phi_hi >= phi_v:
        bracket = (lo_cand, hi_cand)
    else:
        direction = -1.0 if phi_lo < phi_hi else 1.0
        bound = a if direction < 0 else b
        x_prev, phi_prev = v, phi_v
        x_cur = lo_cand if direction < 0 else hi_cand
        phi_cur = phi_lo if direction < 0 else phi_hi
        step = h0
        bracket = None
        for _ in range(200):
            step *= 2.0
            x_next = x_cur + direction * step
            clipped = False
            if direction < 0 and x_next <= bound:
                x_next, clipped = bound, True
            if direction > 0 and x_next >= bound:
                x_next, clipped = bound, True
            if not math.isfinite(x_next):
                raise NotBoundedBelow(
                    f"prox objective of {fn.name} decreases without bound")
            phi_next = phi(x_next)
            if phi_next >= phi_cur:
                bracket = (min(x_prev, x_next), max(x_prev, x_next))
                break
            if clipped:
                # still descending at the boundary of the closure
                if phi_next == -math.inf:
                    raise NotBoundedBelow(
                        f"prox objective of {fn.name} diverges to -inf at the boundary")
                out = bound
                return ProxStep(tau, v, out, phi_next)
            x_prev, phi_prev = x_cur, phi_cur
            x_cur, phi_cur = x_next, phi_next
        if bracket is None:
            raise NotBoundedBelow(
                f"prox objective of {fn.name} keeps descending after 200 expansions")

    lo, hi = bracket
    # with a gradient polish available the golden phase only localizes
    xtol = 1e-6 * scale if fn.grad is not None else 1e-11 * scale
    w_star = _golden_section(phi, lo, hi, xtol)

    # gradient polish: solve (w - v)/tau + f'(w) = 0 near the golden point
    if fn.grad is not None:
        def psi(w):
            return (w - v) / tau + float(fn.grad(w))
        r = max(1e-5 * scale, 4 * xtol)
        p_lo = max(lo, w_star - r)
        p_hi = min(hi, w_star + r)
        try:
            if p_lo < p_hi:
                s_lo, s_hi = psi(p_lo), psi(p_hi)
                if s_lo == 0.0:
                    w_star = p_lo
                elif s_hi == 0.0:
                    w_star = p_hi
                elif s_lo * s_hi < 0:
                    w_star = brentq(psi, p_lo, p_hi, xtol=1e-14 * scale)
        except (ValueError, ZeroDivisionError, OverflowError):
            pass

    w_star = min(max(w_star, a), b)
    obj = phi(w_star)
    # a bracket endpoint may undercut (or tie, within value resolution) the
    # interior point; ties snap to the endpoint so boundary hits are exact
    for w_end in (lo, hi):
        phi_end = phi(w_end)
        if phi_end <= obj:
            w_star, obj = w_end, phi_end
    if obj == -math.inf:
        raise NotBoundedBelow(f"prox objective of {fn.name} is -inf at {w_star}")
    return ProxStep(tau, v, w_star, float(obj))


def _prox_rn(fn: Functional, tau: float, v: np.ndarray, tol: Tolerance) -> ProxStep:
    if fn.grad is None:
        raise ParamOutOfRange("R^n prox needs an analytic gradient")
    n = v.size

    def phi(w):
        return 0.5 * float(np.dot(w - v, w - v)) / tau + fn.value(w)

    def grad_phi(w):
        return (w - v) / tau + np.asarray(fn.grad(w), dtype=float)

    x = v.copy()
    fx = phi(x)
    h = 1e-6 * (1.0 + float(np.linalg.norm(v)))
    for _ in range(100):
        g = grad_phi(x)
        gnorm = float(np.linalg.norm(g))
        if gnorm <= 1e-12 * (1.0 + 1.0 / tau):
            break
        # damped Newton via finite-difference Jacobian of grad_phi
        H = np.empty((n, n))
        for j in range(n):
            e = np.zeros(n)
            e[j] = h
            H[:, j] = (grad_phi(x + e) - grad_phi(x - e)) / (2 * h)
        try:
            step = np.linalg.solve(0.5 * (H + H.T), -g)
            if not np.isfinite(step).all() or float(np.dot(step, g)) >= 0:
                step = -g
        except np.linalg.LinAlgError:
            step = -g
        t = 1.0
        for _ in range(50):
            x_new = x + t * step
            f_new = phi(x_new)
            if f_new < fx - 1e-4 * t * min(gnorm ** 2, abs(fx) + 1.0):
                break
            t *= 0.5
        else:
            # gradient-descent fallback with a conservative step
            x_new = x - min(1.0 / (1.0 + gnorm), tau) * g
            f_new = phi(x_new)
            if f_new >= fx:
                break
        x, fx = x_new, f_new
        if float(np.linalg.norm(x)) > 1e9 or fx < -1e15:
            raise NotBoundedBelow(f"prox objective of {fn.name} diverges")
    return ProxStep(tau, v.copy(), x, float(fx))


def minimizing_movement(fn: Functional, tau: float, y0, horizon: float,
                        tol: Tolerance = DEFAULT_TOL) -> Curve:
    """Implicit Euler scheme: iterate prox steps up to the horizon.

    Emits the piecewise-constant interpolant sampled at the step
    boundaries n*tau (including t = 0).  Proximal failures are re-raised
    with the failing step index.
    """
    tau = float(tau)
    if not tau > 0:
        raise ParamOutOfRange("tau must be > 0")
    n_steps = int(math.floor(float(horizon) / tau + 1e-9))
    if n_steps < 1:
        raise ParamOutOfRange("horizon shorter than one step")
    one_d = isinstance(fn.space, Interval)
    u = float(y0) if one_d else np.asarray(y0, dtype=float)
    us = [u]
    stop = None
    for k in range(1, n_steps + 1):
        try:
            step = prox(fn, tau, u, tol)
        except (NotBoundedBelow, BasePointOutsideDomain, PointOutsideSpace) as exc:
            raise type(exc)(f"prox failed at step {k} (t={k * tau}): {exc}") from exc
        u = step.output
        us.append(u)
        if stop is None and one_d:
            sp = fn.space
            at_edge = (math.isfinite(sp.a) and abs(u - sp.a) <= 1e-12) or \
                      (math.isfinite(sp.b) and abs(u - sp.b) <= 1e-12)
            if at_edge:
                stop = k * tau
    times = tau * np.arange(n_steps + 1)
    pts = np.asarray(us, dtype=float)
    return Curve(times, pts, stop_time=stop,
                 meta={"method": "mms", "tau": tau, "functional": fn.name})
