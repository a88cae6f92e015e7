"""Batch driver: JSON experiment configs in, curves / reports / manifests out.

One config file describes one command; a pipeline is an explicit ordered
list of such configs.  All numeric output is serialized with shortest
round-trip decimal formatting and written atomically (temp file + rename),
so re-running a config with the same seed reproduces every output byte for
byte.  Exit codes: 0 success, 2 a check ran and failed, 1 hard error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import tempfile
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .analysis import (
    check_evi_integrated,
    check_evi_kn,
    check_evi_lambda,
    check_evi_local,
    contraction_rate,
    energy_audit,
)
from .coefficients import CurvatureParams, sigma_values
from .convexity import check_kn_convex, check_lambda_convex, check_lifting
from .core import SampleSpec, Tolerance
from .errors import ConfigInvalid, IoError, KNFlowError
from .flows import Curve, minimizing_movement, ode_flow, oracle_flow
from .functionals import functional_from_json
from .reparam import r1, r2

COMMANDS = ("coeff", "flow", "check-convexity", "check-evi", "reparam",
            "contract", "audit-energy", "pipeline")


@dataclass
class RunManifest:
    """What a run produced; numeric outputs are byte-reproducible."""

    version: str
    command: str
    config_sha256: str
    outputs: list
    status: str  # "pass", "fail" (check failed) or "ok" (no check involved)
    started: float
    finished: float
    stages: list = field(default_factory=list)

    @property
    def exit_code(self) -> int:
        return 2 if self.status == "fail" else 0

    def to_json(self) -> dict:
        return {
            "version": self.version,
            "command": self.command,
            "config_sha256": self.config_sha256,
            "outputs": self.outputs,
            "status": self.status,
            "timestamps": {"start": self.started, "end": self.finished},
            "stages": self.stages,
        }


# ---------------------------------------------------------------------------
# serialization helpers
# ---------------------------------------------------------------------------

def _atomic_write(path: str, data: str):
    d = os.path.dirname(os.path.abspath(path)) or "."
    try:
        os.makedirs(d, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-knflow-")
        with os.fdopen(fd, "w") as f:
            f.write(data)
        os.replace(tmp, path)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def _fmt(x) -> str:
    """Shortest decimal that round-trips the float."""
    x = float(x)
    if x != x:
        raise IoError("NaN cannot be serialized")
    return repr(x)


def write_curve_csv(path: str, curve: Curve):
    n_cols = 1 if curve.is_1d else curve.points.shape[1]
    header = "t," + ",".join(f"x{j}" for j in range(n_cols))
    lines = [header]
    for i in range(curve.n_samples):
        if curve.is_1d:
            row = [_fmt(curve.times[i]), _fmt(curve.points[i])]
        else:
            row = [_fmt(curve.times[i])] + [_fmt(v) for v in curve.points[i]]
        lines.append(",".join(row))
    _atomic_write(path, "\n".join(lines) + "\n")


def read_curve_csv(path: str) -> Curve:
    try:
        with open(path) as f:
            lines = [ln.strip() for ln in f if ln.strip()]
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    if not lines or not lines[0].startswith("t,"):
        raise ConfigInvalid(f"{path} is not a curve CSV")
    rows = [[float(v) for v in ln.split(",")] for ln in lines[1:]]
    arr = np.asarray(rows, dtype=float)
    times = arr[:, 0]
    pts = arr[:, 1] if arr.shape[1] == 2 else arr[:, 1:]
    meta = {}
    stop = None
    meta_path = path + ".meta.json"
    if os.path.exists(meta_path):
        with open(meta_path) as f:
            meta = json.load(f)
        stop = meta.get("stop_time")
    return Curve(times, pts, stop_time=stop, meta=meta)


def write_json(path: str, payload: dict):
    _atomic_write(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def write_curve(path: str, curve: Curve):
    write_curve_csv(path, curve)
    meta = dict(curve.meta)
    meta["stop_time"] = curve.stop_time
    write_json(path + ".meta.json", _jsonable(meta))
    return [path, path + ".meta.json"]


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, float) and math.isinf(obj):
        return "inf" if obj > 0 else "-inf"
    return obj


# ---------------------------------------------------------------------------
# config validation
# ---------------------------------------------------------------------------

_SCHEMAS = {
    "coeff": {"required": {"K", "N", "out"},
              "optional": {"command", "thetas", "theta", "ts", "t", "seed"}},
    "flow": {"required": {"method", "functional", "y0", "out"},
             "optional": {"command", "times", "grid", "tau", "horizon",
                          "rtol", "seed", "oracle", "c", "a"}},
    "check-convexity": {"required": {"kind", "functional", "out"},
                        "optional": {"command", "lambda", "K", "N", "pairs",
                                     "seed", "tolerance", "M", "box"}},
    "check-evi": {"required": {"input", "functional", "form", "out"},
                  "optional": {"command", "lambda", "K", "N", "radius",
                               "z_per_time", "time_samples", "seed",
                               "tolerance", "z_domain"}},
    "reparam": {"required": {"direction", "input", "functional", "out"},
                "optional": {"command", "K", "N", "tolerance"}},
    "contract": {"required": {"input1", "input2", "r", "out"},
                 "optional": {"command", "s_grid"}},
    "audit-energy": {"required": {"input", "functional", "out_csv",
                                  "out_json"},
                     "optional": {"command", "tolerance", "slope_r0",
                                  "window"}},
    "pipeline": {"required": {"stages"}, "optional": {"command"}},
}


def validate_config(cfg: dict, command: str) -> dict:
    if not isinstance(cfg, dict):
        raise ConfigInvalid("config must be a JSON object")
    if command not in _SCHEMAS:
        raise ConfigInvalid(f"unknown command {command!r}")
    if "command" in cfg and cfg["command"] != command:
        raise ConfigInvalid(
            f"config says command={cfg['command']!r}, invoked as {command!r}")
    schema = _SCHEMAS[command]
    keys = set(cfg)
    unknown = keys - schema["required"] - schema["optional"]
    if unknown:
        raise ConfigInvalid(f"unknown config keys: {sorted(unknown)}")
    missing = schema["required"] - keys
    if missing:
        raise ConfigInvalid(f"missing config keys: {sorted(missing)}")
    return cfg


def _tolerance_from(cfg: dict) -> Tolerance:
    t = cfg.get("tolerance", {})
    return Tolerance(abs=float(t.get("abs", 1e-8)),
                     rel=float(t.get("rel", 1e-6)),
                     h_min=float(t.get("h_min", 1e-6)))


def _grid_from(cfg: dict) -> np.ndarray:
    if "times" in cfg:
        return np.asarray(cfg["times"], dtype=float)
    if "grid" in cfg:
        g = cfg["grid"]
        return np.linspace(float(g["t0"]), float(g["t1"]), int(g["n"]))
    raise ConfigInvalid("flow config needs 'times' or 'grid'")


def _axis_from(spec, default_n=33) -> np.ndarray:
    if isinstance(spec, (list, tuple)):
        return np.asarray(spec, dtype=float)
    return np.linspace(float(spec["min"]), float(spec["max"]),
                       int(spec.get("n", default_n)))


def _out_path(cfg_value: str, out_dir: str) -> str:
    if os.path.isabs(cfg_value):
        return cfg_value
    return os.path.join(out_dir, cfg_value)


# ---------------------------------------------------------------------------
# command handlers: each returns (outputs, status)
# ---------------------------------------------------------------------------

def _run_coeff(cfg, out_dir):
    p = CurvatureParams(float(cfg["K"]), float(cfg["N"]))
    thetas = _axis_from(cfg.get("thetas", cfg.get("theta",
                                                  {"min": 0.0, "max": 2.0})))
    ts = _axis_from(cfg.get("ts", cfg.get("t", {"min": 0.0, "max": 1.0})))
    lines = ["theta,t,sigma"]
    for theta in thetas:
        vals = sigma_values(p, ts, np.full_like(ts, theta))
        for t, v in zip(ts, vals):
            sv = "inf" if v == math.inf else _fmt(v)
            lines.append(f"{_fmt(theta)},{_fmt(t)},{sv}")
    path = _out_path(cfg["out"], out_dir)
    _atomic_write(path, "\n".join(lines) + "\n")
    return [path], "ok"


def _run_flow(cfg, out_dir):
    fn = functional_from_json(cfg["functional"])
    method = cfg["method"]
    y0 = cfg["y0"]
    y0 = np.asarray(y0, dtype=float) if isinstance(y0, list) else float(y0)
    if method == "oracle":
        name = cfg.get("oracle", cfg["functional"].get("library"))
        kwargs = {}
        if "c" in cfg:
            kwargs["c"] = float(cfg["c"])
        if "a" in cfg:
            kwargs["a"] = float(cfg["a"])
        curve = oracle_flow(name, fn.params, y0, _grid_from(cfg), **kwargs)
    elif method == "ode":
        curve = ode_flow(fn, y0, _grid_from(cfg),
                         rtol=float(cfg.get("rtol", 1e-9)))
    elif method == "mms":
        curve = minimizing_movement(fn, float(cfg["tau"]), y0,
                                    float(cfg["horizon"]),
                                    _tolerance_from(cfg))
    else:
        raise ConfigInvalid(f"unknown flow method {method!r}")
    return write_curve(_out_path(cfg["out"], out_dir), curve), "ok"


def _run_check_convexity(cfg, out_dir):
    fn = functional_from_json(cfg["functional"])
    spec = SampleSpec(seed=int(cfg.get("seed", 0)),
                      count=int(cfg.get("pairs", 2000)))
    tol = _tolerance_from(cfg)
    box = tuple(cfg["box"]) if "box" in cfg else None
    if cfg["kind"] == "lambda":
        rep = check_lambda_convex(fn, float(cfg["lambda"]), spec, tol, box=box)
    elif cfg["kind"] == "kn":
        p = CurvatureParams(float(cfg["K"]), float(cfg["N"]))
        rep = check_kn_convex(fn, p, spec, tol, box=box)
    elif cfg["kind"] == "lifting":
        p = CurvatureParams(float(cfg["K"]), float(cfg["N"]))
        M = cfg.get("M", fn.upper_bound)
        rep = check_lifting(fn, p, M, spec, tol, box=box)
    else:
        raise ConfigInvalid(f"unknown convexity kind {cfg['kind']!r}")
    path = _out_path(cfg["out"], out_dir)
    write_json(path, _jsonable(rep.to_json()))
    return [path], ("pass" if rep.passed else "fail")


def _run_check_evi(cfg, out_dir):
    curve = read_curve_csv(_out_path(cfg["input"], out_dir))
    fn = functional_from_json(cfg["functional"])
    spec = SampleSpec(seed=int(cfg.get("seed", 0)),
                      count=int(cfg.get("z_per_time", 500)))
    tol = _tolerance_from(cfg)
    t_samples = int(cfg.get("time_samples", 50))
    form = cfg["form"]
    if form == "lambda":
        rep = check_evi_lambda(curve, fn, float(cfg["lambda"]), spec, tol,
                               t_samples=t_samples)
    elif form in ("raw", "i", "ii"):
        p = CurvatureParams(float(cfg["K"]), float(cfg["N"]))
        rep = check_evi_kn(curve, fn, p, form, spec, tol,
                           t_samples=t_samples,
                           z_domain=cfg.get("z_domain", "extended"))
    elif form == "integrated":
        p = CurvatureParams(float(cfg["K"]), float(cfg["N"]))
        rep = check_evi_integrated(curve, fn, p, spec, tol,
                                   t_samples=t_samples)
    elif form == "local":
        rep = check_evi_local(curve, fn, float(cfg["lambda"]),
                              float(cfg["radius"]), spec, tol,
                              t_samples=t_samples)
    else:
        raise ConfigInvalid(f"unknown evi form {form!r}")
    path = _out_path(cfg["out"], out_dir)
    write_json(path, _jsonable(rep.to_json()))
    return [path], ("pass" if rep.passed else "fail")


def _run_reparam(cfg, out_dir):
    curve = read_curve_csv(_out_path(cfg["input"], out_dir))
    fn = functional_from_json(cfg["functional"])
    p = fn.params
    if p is None or "K" in cfg:
        p = CurvatureParams(float(cfg.get("K", 0.0)), float(cfg.get("N", -1.0)))
    tol = _tolerance_from(cfg)
    if cfg["direction"] == "r1":
        out = r1(curve, fn, p, tol)
    elif cfg["direction"] == "r2":
        out = r2(curve, fn, p, tol)
    else:
        raise ConfigInvalid("direction must be r1 or r2")
    return write_curve(_out_path(cfg["out"], out_dir), out), "ok"


def _run_contract(cfg, out_dir):
    c1 = read_curve_csv(_out_path(cfg["input1"], out_dir))
    c2 = read_curve_csv(_out_path(cfg["input2"], out_dir))
    s_grid = np.asarray(cfg["s_grid"], float) if "s_grid" in cfg else None
    rate = contraction_rate(c1, c2, float(cfg["r"]), s_grid)
    path = _out_path(cfg["out"], out_dir)
    write_json(path, {"max_log_slope": rate.max_log_slope,
                      "fitted_rate": rate.fitted_rate,
                      "n_samples": int(len(rate.times))})
    return [path], "ok"


def _run_audit_energy(cfg, out_dir):
    curve = read_curve_csv(_out_path(cfg["input"], out_dir))
    if "window" in cfg:
        lo, hi = cfg["window"]
        curve = curve.segment(float(lo), float(hi))
    fn = functional_from_json(cfg["functional"])
    audit = energy_audit(curve, fn, _tolerance_from(cfg),
                         slope_r0=float(cfg.get("slope_r0", 1e-3)))
    lines = ["t,speed,slope,energy,residual"]
    for i in range(len(audit.times)):
        lines.append(",".join(_fmt(v) for v in
                              (audit.times[i], audit.speed[i], audit.slope[i],
                               audit.energy[i], audit.residual[i])))
    csv_path = _out_path(cfg["out_csv"], out_dir)
    _atomic_write(csv_path, "\n".join(lines) + "\n")
    json_path = _out_path(cfg["out_json"], out_dir)
    write_json(json_path, {
        "ede_residual": audit.ede_residual,
        "pointwise_balance": audit.passes_pointwise_balance,
        "fails_dissipation_inequality": audit.fails_dissipation_inequality,
    })
    status = "pass" if audit.passes_pointwise_balance else "fail"
    return [csv_path, json_path], status


_HANDLERS = {
    "coeff": _run_coeff,
    "flow": _run_flow,
    "check-convexity": _run_check_convexity,
    "check-evi": _run_check_evi,
    "reparam": _run_reparam,
    "contract": _run_contract,
    "audit-energy": _run_audit_energy,
}


def _config_hash(cfg) -> str:
    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def run(cfg: dict, out_dir: str = ".", command: str = None) -> RunManifest:
    """Execute one experiment config and write its outputs atomically."""
    command = command or cfg.get("command")
    if command is None:
        raise ConfigInvalid("no command given")
    if command == "pipeline":
        return pipeline(cfg.get("stages", cfg), out_dir)
    cfg = validate_config(cfg, command)
    started = time.time()
    outputs, status = _HANDLERS[command](cfg, out_dir)
    return RunManifest(version=__version__, command=command,
                       config_sha256=_config_hash(cfg), outputs=outputs,
                       status=status, started=started, finished=time.time())


def pipeline(configs, out_dir: str = ".") -> RunManifest:
    """Run stages sequentially.

    A hard error stops the pipeline; a check failure is recorded in the
    manifest and the remaining stages still run.
    """
    if isinstance(configs, dict):
        configs = configs.get("stages", [])
    if not isinstance(configs, list):
        raise ConfigInvalid("pipeline expects a list of stage configs")
    started = time.time()
    outputs, stages = [], []
    status = "ok"
    for k, stage_cfg in enumerate(configs):
        manifest = run(stage_cfg, out_dir)
        outputs.extend(manifest.outputs)
        stages.append({"index": k, "command": manifest.command,
                       "status": manifest.status,
                       "config_sha256": manifest.config_sha256})
        if manifest.status == "fail":
            status = "fail"
    return RunManifest(version=__version__, command="pipeline",
                       config_sha256=_config_hash({"stages": configs}),
                       outputs=outputs, status=status, started=started,
                       finished=time.time(), stages=stages)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="knflow",
        description="Gradient flows of dimensionally convex functionals: "
                    "flow generation, inequality checking, reparametrization "
                    "and dissipation audits.")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="JSON config path")
    parser.add_argument("--out", default=".", help="output directory")
    args = parser.parse_args(argv)
    try:
        with open(args.config) as f:
            cfg = json.load(f)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: cannot load config: {exc}", file=sys.stderr)
        return 1
    try:
        manifest = run(cfg, args.out, command=args.command)
    except KNFlowError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    write_json(os.path.join(args.out, "manifest.json"), manifest.to_json())
    print(json.dumps({"status": manifest.status,
                      "outputs": manifest.outputs}))
    return manifest.exit_code


if __name__ == "__main__":
    sys.exit(main())
