"""Extended-real functionals with a log-domain exponential transform.

A functional f: X -> [-inf, +inf] is stored together with its log-domain
companion g = -f/N, so that the exponential transform f_N = exp(g) never
has to be formed for unboundedly negative f.  The conventions are

    f = -inf  <=>  g = -inf  <=>  f_N = 0,
    f = +inf  <=>  g = +inf  <=>  f_N = +inf.

The closed-form library collects the standard one-dimensional examples
whose transform satisfies the dimensional convexity inequality with
equality, plus quadratic / linear plumbing examples.
"""

from __future__ import annotations

import ast
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .coefficients import CurvatureParams
from .core import DEFAULT_TOL, ExtReal, Tolerance, require_not_nan
from .errors import (
    BasePointOutsideDomain,
    ExpressionError,
    IncompatibleSign,
    PointOutsideSpace,
)
from .spaces import EuclideanRn, Geodesic, Interval, ModelSpace, Point


@dataclass(frozen=True)
class Functional:
    """Extended-real function on a model space.

    fvec evaluates a batch of points (shape (m,) on intervals, (m, n) on
    R^n) and may return +-inf entries; NaN is rejected at the scalar
    boundary.  grad, if present, is the analytic gradient at interior
    smooth points (scalar on intervals, vector on R^n).
    """

    space: ModelSpace
    fvec: Callable[[np.ndarray], np.ndarray]
    name: str
    params: Optional[CurvatureParams] = None
    grad: Optional[Callable] = None
    upper_bound: Optional[float] = None
    sample_box: Optional[tuple] = None
    meta: dict = field(default_factory=dict)

    def value(self, x: Point) -> float:
        """f(x); +-inf allowed, NaN raises.  x must lie in the closure."""
        if not self.space.contains_closure(x):
            raise PointOutsideSpace(f"{x!r} outside {self.space}")
        return float(require_not_nan(self._eval_scalar(x), f"{self.name}({x!r})"))

    def _eval_scalar(self, x) -> float:
        if isinstance(self.space, Interval):
            return float(self.fvec(np.asarray([x], dtype=float))[0])
        return float(self.fvec(np.asarray([x], dtype=float).reshape(1, -1))[0])

    def values(self, xs: np.ndarray) -> np.ndarray:
        """Batch evaluation; caller guarantees points in the closure."""
        out = np.asarray(self.fvec(np.asarray(xs, dtype=float)), dtype=float)
        return require_not_nan(out, f"{self.name} batch")

    def in_domain(self, x: Point) -> bool:
        """x in D[f]: value finite."""
        return self.space.contains(x) and math.isfinite(self.value(x))

    def in_extended_domain(self, x: Point) -> bool:
        """x in D*[f]: value < +inf."""
        return self.space.contains(x) and self.value(x) < math.inf

    def grad_at(self, x: Point):
        if self.grad is None:
            return None
        return self.grad(x)


# ---------------------------------------------------------------------------
# exponential transform, log-domain
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LogDomainValue:
    """Value g = -f/N of the log-domain representation, so f_N = exp(g).

    f = -inf <=> g = -inf <=> f_N = 0, and f = +inf <=> g = +inf <=> f_N = +inf.
    """

    g: ExtReal

    @property
    def fN(self) -> ExtReal:
        return ExtReal(float(_exp_clip(self.g.value)))


def log_fN(fn: Functional, p: CurvatureParams, x: Point) -> float:
    """g(x) = -f(x)/N, the log of the exponential transform."""
    return -fn.value(x) / p.N


def log_domain_value(fn: Functional, p: CurvatureParams, x: Point) -> LogDomainValue:
    return LogDomainValue(ExtReal(log_fN(fn, p, x)))


def log_fN_values(fn: Functional, p: CurvatureParams, xs) -> np.ndarray:
    return -fn.values(xs) / p.N


def _exp_clip(g):
    with np.errstate(over="ignore"):
        return np.exp(g)


def fN_values(fn: Functional, p: CurvatureParams, xs) -> np.ndarray:
    """Batch f_N = exp(-f/N); overflow saturates to +inf."""
    return _exp_clip(log_fN_values(fn, p, xs))


def eval_fN(fn: Functional, p: CurvatureParams, x: Point) -> ExtReal:
    """f_N(x) in [0, +inf], computed through the log domain."""
    return ExtReal(float(_exp_clip(log_fN(fn, p, x))))


def fN_ratio(fn: Functional, p: CurvatureParams, z: Point, y: Point) -> ExtReal:
    """f_N(z)/f_N(y) = exp(g(z) - g(y)); y must have finite f."""
    gy = log_fN(fn, p, y)
    if not math.isfinite(gy):
        raise BasePointOutsideDomain(f"f({y!r}) is not finite")
    gz = log_fN(fn, p, z)
    if gz == -math.inf:
        return ExtReal(0.0)
    if gz == math.inf:
        return ExtReal(math.inf)
    return ExtReal(float(_exp_clip(gz - gy)))


def fN_ratio_values(fn: Functional, p: CurvatureParams, zs, y: Point) -> np.ndarray:
    """Vectorized f_N(z)/f_N(y) over a batch of z."""
    gy = log_fN(fn, p, y)
    if not math.isfinite(gy):
        raise BasePointOutsideDomain(f"f({y!r}) is not finite")
    return _exp_clip(log_fN_values(fn, p, zs) - gy)


# ---------------------------------------------------------------------------
# closed-form library
# ---------------------------------------------------------------------------

def _log_pos(v):
    """log with the domain conventions log(0) = -inf, log(v<0) = +inf."""
    v = np.asarray(v, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log(np.where(v > 0, v, 1.0))
    out = np.where(v > 0, out, np.where(v == 0, -math.inf, math.inf))
    return out


LIBRARY_NAMES = ("log-cosh", "log-sinh", "log-x", "log-cos", "quadratic", "linear")


def library(name: str, p: CurvatureParams, *, c: float = 1.0, a: float = 1.0,
            dim: int = 1) -> Functional:
    """Closed-form example functionals with their natural domains.

    log-cosh (K>0) on R, log-sinh (K>0) on (0,inf), log-x (K=0) on (0,inf),
    log-cos (K<0) on a symmetric bounded interval, plus quadratic c*x^2/2
    and linear a*x plumbing examples.  Sign mismatches raise
    :class:`IncompatibleSign`.
    """
    K, N = p.K, p.N
    if name == "log-cosh":
        if K <= 0:
            raise IncompatibleSign("log-cosh needs K > 0")
        w = math.sqrt(-K / N)
        return Functional(
            space=Interval(),
            fvec=lambda x: -N * np.log(np.cosh(w * x)),
            grad=lambda x: -N * w * math.tanh(w * float(x)),
            name="log-cosh", params=p, sample_box=(-3.0 / w, 3.0 / w),
        )
    if name == "log-sinh":
        if K <= 0:
            raise IncompatibleSign("log-sinh needs K > 0")
        w = math.sqrt(-K / N)
        return Functional(
            space=Interval(0.0, math.inf),
            fvec=lambda x: -N * _log_pos(np.sinh(w * np.maximum(x, 0.0))),
            grad=lambda x: -N * w / math.tanh(w * float(x)),
            name="log-sinh", params=p, sample_box=(1e-3 / w, 3.0 / w),
        )
    if name == "log-x":
        if K != 0:
            raise IncompatibleSign("log-x needs K = 0")
        return Functional(
            space=Interval(0.0, math.inf),
            fvec=lambda x: -N * _log_pos(x),
            grad=lambda x: -N / float(x),
            name="log-x", params=p, sample_box=(1e-3, 4.0),
        )
    if name == "log-cos":
        if K >= 0:
            raise IncompatibleSign("log-cos needs K < 0")
        w = math.sqrt(K / N)
        half = 0.5 * math.pi / w
        # mask closure boundary: cos(pi/2) rounds to 6e-17, not exactly 0
        return Functional(
            space=Interval(-half, half),
            fvec=lambda x: -N * _log_pos(
                np.where(np.abs(x) < half, np.cos(w * np.minimum(np.abs(x), half)), 0.0)),
            grad=lambda x: N * w * math.tan(w * float(x)),
            name="log-cos", params=p, upper_bound=0.0,
            sample_box=(-half + 1e-3, half - 1e-3),
        )
    if name == "quadratic":
        c = float(c)
        if dim == 1:
            return Functional(
                space=Interval(),
                fvec=lambda x: 0.5 * c * x * x,
                grad=lambda x: c * float(x),
                name=f"quadratic({c})", params=p, sample_box=(-3.0, 3.0),
                meta={"c": c},
            )
        return Functional(
            space=EuclideanRn(dim),
            fvec=lambda x: 0.5 * c * np.sum(x * x, axis=-1),
            grad=lambda x: c * np.asarray(x, dtype=float),
            name=f"quadratic({c})", params=p,
            sample_box=(-3.0 * np.ones(dim), 3.0 * np.ones(dim)),
            meta={"c": c},
        )
    if name == "linear":
        a = float(a)
        return Functional(
            space=Interval(0.0, math.inf, open_a=False),
            fvec=lambda x: a * x,
            grad=lambda x: a,
            name=f"linear({a})", params=p, sample_box=(0.0, 4.0),
            meta={"a": a},
        )
    raise IncompatibleSign(f"unknown library functional {name!r}")


def fN_functional(fn: Functional, p: CurvatureParams) -> Functional:
    """The exponential transform of fn as a functional in its own right."""
    def fvec(xs):
        return _exp_clip(-fn.fvec(xs) / p.N)

    grad = None
    if fn.grad is not None:
        def grad(x):  # chain rule through the log domain
            g = _exp_clip(-fn.value(x) / p.N)
            return -(1.0 / p.N) * g * np.asarray(fn.grad(x))
        if isinstance(fn.space, Interval):
            base_grad = grad

            def grad(x):
                return float(base_grad(x))

    ub = None
    if fn.upper_bound is not None:
        ub = float(_exp_clip(-fn.upper_bound / p.N))
    return Functional(
        space=fn.space, fvec=fvec, name=f"{fn.name}_N", params=p, grad=grad,
        upper_bound=ub, sample_box=fn.sample_box, meta=dict(fn.meta),
    )


# ---------------------------------------------------------------------------
# directional derivative (liminf estimator)
# ---------------------------------------------------------------------------

def directional_derivative(fn: Functional, g: Geodesic,
                           tol: Tolerance = DEFAULT_TOL,
                           t0: float = 0.25, tail: int = 4) -> float:
    """liminf of (f(gamma_t) - f(gamma_0))/t as t -> 0+.

    Difference quotients are evaluated on the geometric sequence
    t_k = t0 * 2^-k down to tol.h_min; the minimum over the finest `tail`
    levels estimates the liminf.  +-inf results are legitimate.
    """
    f0 = fn.value(g.p0)
    if not math.isfinite(f0):
        raise BasePointOutsideDomain(f"f(gamma(0)) = {f0}")
    steps = []
    t = float(t0)
    while t >= tol.h_min:
        steps.append(t)
        t *= 0.5
    if not steps:
        raise BasePointOutsideDomain("t0 below h_min")
    quotients = []
    for t in steps:
        ft = fn.value(g(t))
        quotients.append((ft - f0) / t if math.isfinite(ft) else ft)
    tail_q = quotients[-tail:]
    return float(min(tail_q))


# ---------------------------------------------------------------------------
# expression grammar
# ---------------------------------------------------------------------------

_BINOPS = {
    ast.Add: np.add, ast.Sub: np.subtract, ast.Mult: np.multiply,
    ast.Div: np.true_divide, ast.Pow: np.power,
}

_FUNCS = {
    "log": _log_pos, "exp": _exp_clip, "sin": np.sin, "cos": np.cos,
    "sinh": np.sinh, "cosh": np.cosh, "pow": np.power,
}

_CONSTS = {"pi": math.pi, "e": math.e}


def _compile_node(node, var_names):
    if isinstance(node, ast.Expression):
        return _compile_node(node.body, var_names)
    if isinstance(node, ast.Constant):
        if not isinstance(node.value, (int, float)):
            raise ExpressionError(f"constant {node.value!r} not allowed")
        v = float(node.value)
        return lambda env: v
    if isinstance(node, ast.Name):
        if node.id in var_names:
            key = node.id
            return lambda env: env[key]
        if node.id in _CONSTS:
            v = _CONSTS[node.id]
            return lambda env: v
        raise ExpressionError(f"unknown name {node.id!r}")
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        sub = _compile_node(node.operand, var_names)
        if isinstance(node.op, ast.UAdd):
            return sub
        return lambda env: np.negative(sub(env))
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        op = _BINOPS[type(node.op)]
        left = _compile_node(node.left, var_names)
        right = _compile_node(node.right, var_names)

        def run(env):
            with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
                return op(left(env), right(env))
        return run
    if isinstance(node, ast.Call):
        if not isinstance(node.func, ast.Name) or node.func.id not in _FUNCS:
            raise ExpressionError("only log/exp/sin/cos/sinh/cosh/pow calls allowed")
        if node.keywords:
            raise ExpressionError("keyword arguments not allowed")
        fname = node.func.id
        want = 2 if fname == "pow" else 1
        if len(node.args) != want:
            raise ExpressionError(f"{fname} takes {want} argument(s)")
        f = _FUNCS[fname]
        args = [_compile_node(a, var_names) for a in node.args]

        def run(env):
            with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
                return f(*(a(env) for a in args))
        return run
    raise ExpressionError(f"expression node {type(node).__name__} not allowed")


def expression_functional(expr: str, space: Optional[ModelSpace] = None,
                          name: Optional[str] = None,
                          params: Optional[CurvatureParams] = None,
                          sample_box: Optional[tuple] = None) -> Functional:
    """Build a functional from a small arithmetic expression.

    Grammar: + - * / and the calls log, exp, sin, cos, sinh, cosh, pow;
    constants (incl. pi, e); variable x on intervals, x1..xn on R^n.
    """
    space = space if space is not None else Interval()
    if isinstance(space, Interval):
        var_names = {"x"}
    else:
        var_names = {f"x{i + 1}" for i in range(space.n)}
    try:
        tree = ast.parse(expr, mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(f"cannot parse {expr!r}: {exc}") from exc
    body = _compile_node(tree, var_names)

    if isinstance(space, Interval):
        def fvec(xs):
            return np.broadcast_to(np.asarray(body({"x": np.asarray(xs, float)}),
                                              dtype=float), np.shape(xs)).copy()
    else:
        def fvec(xs):
            arr = np.asarray(xs, dtype=float)
            env = {f"x{i + 1}": arr[..., i] for i in range(space.n)}
            return np.broadcast_to(np.asarray(body(env), dtype=float),
                                   arr.shape[:-1]).copy()

    return Functional(space=space, fvec=fvec, name=name or f"expr:{expr}",
                      params=params, sample_box=sample_box,
                      meta={"expr": expr})


def functional_from_json(d: dict) -> Functional:
    """Build a functional from its JSON descriptor.

    Either {"library":"log-cos","K":-1,"N":-1,...} or
    {"expr":"log(cos(x))","domain":{...},"K":...,"N":...}.
    """
    from .spaces import space_from_json  # local to avoid cycle at import time
    from .errors import ConfigInvalid

    if not isinstance(d, dict):
        raise ConfigInvalid("functional descriptor must be a dict")
    if "library" in d:
        p = CurvatureParams(float(d.get("K", 0.0)), float(d.get("N", -1.0)))
        kwargs = {}
        if "c" in d:
            kwargs["c"] = float(d["c"])
        if "a" in d:
            kwargs["a"] = float(d["a"])
        if "dim" in d:
            kwargs["dim"] = int(d["dim"])
        return library(d["library"], p, **kwargs)
    if "expr" in d:
        space = space_from_json(d["domain"]) if "domain" in d else Interval()
        p = None
        if "K" in d and "N" in d:
            p = CurvatureParams(float(d["K"]), float(d["N"]))
        box = tuple(d["sample_box"]) if "sample_box" in d else None
        return expression_functional(d["expr"], space, params=p, sample_box=box)
    raise ConfigInvalid("functional descriptor needs 'library' or 'expr'")
