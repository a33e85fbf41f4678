"""Batch laboratory: JSON scenario configs in, report.json and trace.csv out.

    twistflow validate|report|flow|lagrangian <config.json> [--output-dir DIR]
    twistflow suite <dir> [--output-dir DIR] [--criteria all|none|1,2,...]

Exit codes: 0 ok, 2 flow invariant violated, 3 numeric failure, 4 io or config.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import chern, flow, hermitian as hm, lagrangian as lg, subobjects as so
from .bundles import PRESET_KINDS, make_preset, reference_seam_residual
from .errors import BadField, ConfigError, IoError, ParseError, TwistflowError, UnknownPreset
from .torus import make_torus
from .twist import validate_twist

log = logging.getLogger(__name__)

EXIT_OK, EXIT_INVARIANT, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4
ACTIONS = ("validate", "report", "lagrangian", "flow", "suite")
METRIC_KINDS = ("reference", "conformal", "random")

# conformal factor shapes, selected by id in the config
EXPRESSIONS = {
    "cos_s": lambda s, t: np.cos(2 * np.pi * s),
    "sin_t": lambda s, t: np.sin(2 * np.pi * t),
    "mixed": lambda s, t: np.cos(2 * np.pi * s) * np.sin(2 * np.pi * t) + 0.5 * np.cos(2 * np.pi * (s + t)),
}

_TOP_KEYS = {"name", "preset", "params", "tau", "grid_n", "b_coeff", "initial_metric", "action", "flow",
             "lagrangian", "output_dir"}


@dataclass
class ScenarioConfig:
    name: str
    preset: str
    params: dict
    tau: complex = 1j
    grid_n: int = 64
    b_coeff: float = 0.0
    initial_metric: dict = field(default_factory=lambda: {"kind": "reference"})
    action: str = "report"
    flow: flow.FlowConfig = field(default_factory=flow.FlowConfig)
    lagrangian_nodes: int = 33
    output_dir: str = "twistflow_out"

    def echo(self) -> dict:
        return dict(name=self.name, preset=self.preset, params=self.params,
                    tau=[self.tau.real, self.tau.imag], grid_n=self.grid_n, b_coeff=self.b_coeff,
                    initial_metric=self.initial_metric, action=self.action,
                    flow={f.name: getattr(self.flow, f.name) for f in fields(self.flow)},
                    lagrangian={"nodes": self.lagrangian_nodes})


# config loading

def _number(value, path: str, kind=float):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise BadField(f"{path}: expected a number, got {value!r}")
    if kind is int:
        if float(value) != int(value):
            raise BadField(f"{path}: expected an integer, got {value!r}")
        return int(value)
    if not math.isfinite(value):
        raise BadField(f"{path}: must be finite")
    return float(value)


def _initial_metric(spec, path="initial_metric") -> dict:
    if isinstance(spec, str):
        spec = {"kind": spec}
    if not isinstance(spec, dict):
        raise BadField(f"{path}: expected an object")
    kind = spec.get("kind", "reference")
    if kind not in METRIC_KINDS:
        raise BadField(f"{path}.kind: expected one of {METRIC_KINDS}, got {kind!r}")
    allowed = {"reference": {"kind"}, "conformal": {"kind", "expression", "amplitude"},
               "random": {"kind", "seed", "amplitude", "modes"}}[kind]
    extra = set(spec) - allowed
    if extra:
        raise BadField(f"{path}: unexpected key(s) {sorted(extra)} for kind {kind!r}")
    out = {"kind": kind}
    if kind == "conformal":
        expr = spec.get("expression", "cos_s")
        if expr not in EXPRESSIONS:
            raise BadField(f"{path}.expression: unknown id {expr!r}; known: {sorted(EXPRESSIONS)}")
        out.update(expression=expr, amplitude=_number(spec.get("amplitude", 0.5), f"{path}.amplitude"))
    elif kind == "random":
        if "seed" not in spec:
            raise BadField(f"{path}.seed: a random metric needs an explicit seed")
        out.update(seed=_number(spec["seed"], f"{path}.seed", int),
                   amplitude=_number(spec.get("amplitude", 0.3), f"{path}.amplitude"),
                   modes=_number(spec.get("modes", 2), f"{path}.modes", int))
        if out["amplitude"] < 0:
            raise BadField(f"{path}.amplitude: must be non-negative")
    return out


def _flow_config(spec) -> flow.FlowConfig:
    if spec is None:
        return flow.FlowConfig()
    if not isinstance(spec, dict):
        raise BadField("flow: expected an object")
    known = {f.name: f for f in fields(flow.FlowConfig)}
    kw = {}
    for key, value in spec.items():
        if key not in known:
            raise BadField(f"flow.{key}: unknown field")
        if key in ("sl_normalize", "enforce_monotone"):
            if not isinstance(value, bool):
                raise BadField(f"flow.{key}: expected true or false")
            kw[key] = value
        elif key == "scheme":
            kw[key] = value
        elif key == "record_every":
            kw[key] = _number(value, f"flow.{key}", int)
        elif key == "target_m_K" and value is None:
            kw[key] = None
        else:
            kw[key] = _number(value, f"flow.{key}")
    return flow.FlowConfig(**kw)  # raises BadField with a flow.* path


def parse_config(data, name: str = "scenario") -> ScenarioConfig:
    """Validate a decoded JSON object and fill in defaults."""
    if not isinstance(data, dict):
        raise BadField("<root>: expected a JSON object")
    extra = set(data) - _TOP_KEYS
    if extra:
        raise BadField(f"<root>: unknown key(s) {sorted(extra)}")
    if "preset" not in data:
        raise BadField("preset: required")
    preset = data["preset"]
    if preset not in PRESET_KINDS:
        raise UnknownPreset(f"preset: unknown preset {preset!r}; known: {', '.join(PRESET_KINDS)}")
    params = data.get("params", {})
    if not isinstance(params, dict):
        raise BadField("params: expected an object")
    name = data.get("name", name)
    if not isinstance(name, str) or not name or "/" in name or name in (".", ".."):
        raise BadField(f"name: not usable as a directory name: {name!r}")
    tau = data.get("tau", [0.0, 1.0])
    if not (isinstance(tau, list) and len(tau) == 2):
        raise BadField("tau: expected a [re, im] pair")
    tau = complex(_number(tau[0], "tau[0]"), _number(tau[1], "tau[1]"))
    grid_n = _number(data.get("grid_n", 64), "grid_n", int)
    b_coeff = _number(data.get("b_coeff", 0.0), "b_coeff")
    action = data.get("action", "report")
    if action not in ACTIONS:
        raise BadField(f"action: expected one of {ACTIONS}, got {action!r}")
    nodes = 33
    if "lagrangian" in data:
        lag = data["lagrangian"]
        if not isinstance(lag, dict) or set(lag) - {"nodes"}:
            raise BadField("lagrangian: expected an object with optional 'nodes'")
        nodes = _number(lag.get("nodes", 33), "lagrangian.nodes", int)
        if nodes < 3 or nodes % 2 == 0:
            raise BadField("lagrangian.nodes: must be odd and at least 3")
    out = data.get("output_dir", "twistflow_out")
    if not isinstance(out, str):
        raise BadField("output_dir: expected a path string")
    cfg = ScenarioConfig(name, preset, params, tau, grid_n, b_coeff, _initial_metric(data.get("initial_metric", {})),
                         action, _flow_config(data.get("flow")), nodes, out)
    try:
        build_bundle(cfg)
    except TwistflowError as exc:
        path = "grid_n" if "grid" in str(exc).lower() else "tau" if "tau" in str(exc).lower() else "params"
        raise BadField(f"{path}: {exc}") from exc
    return cfg


def load_config(path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise IoError(f"{path}: {exc.strerror or exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return parse_config(data, path.stem)


# pipeline

def build_bundle(cfg: ScenarioConfig):
    geom = make_torus(cfg.tau, cfg.grid_n)
    return make_preset(cfg.preset, cfg.params, geom=geom, b_coeff=cfg.b_coeff)


def initial_metric(bundle, spec: dict) -> hm.MetricState:
    ref = hm.reference_metric(bundle)
    if spec["kind"] == "reference":
        return ref
    if spec["kind"] == "conformal":
        s, t = bundle.geom.st
        return hm.conformal_metric(ref, spec["amplitude"] * EXPRESSIONS[spec["expression"]](s, t))
    return hm.random_metric(bundle, spec["seed"], spec["amplitude"], spec["modes"])


def _validation(bundle, h) -> dict:
    rep = validate_twist(bundle)
    return dict(twist_defect=rep.defect, epsilon=rep.epsilon, passed=rep.passed, tolerance=rep.tolerance,
                reference_seam_residual=reference_seam_residual(bundle), metric_seam_residual=h.seam_residual(),
                commutant_defect=bundle.commutant_defect(h.reduced))


def _stability(bundle, h) -> dict:
    try:
        return so.slope_verdict(bundle, h).as_dict()
    except TwistflowError as exc:
        return dict(verdict=None, reason=f"{type(exc).__name__}: {exc}")


def _lagrangian_section(bundle, k, nodes: int) -> dict:
    h = hm.reference_metric(bundle)
    closed = lg.lagrangian_closed(h, k)
    geo = lg.lagrangian_path(hm.geodesic_path(h, k, nodes))
    lin = lg.lagrangian_path(hm.linear_path(h, k, nodes))
    fd, formula = lg.lagrangian_derivative_check(hm.linear_path(h, k, 3), 0.5)
    out = dict(closed_form=closed, geodesic_path=geo, linear_path=lin, nodes=nodes,
               path_difference=abs(geo - lin), closed_vs_path=abs(closed - geo),
               derivative_check={"t": 0.5, "finite_difference": fd, "formula": formula})
    mu = chern.degree(bundle, h) / bundle.rank
    for incl in bundle.declared_subbundles:
        sp = so.induced_structures(bundle, incl, h)
        if abs(chern.degree(sp.sub_bundle, sp.sub_metric) / incl.sub_rank - mu) < 1e-8:
            parts = lg.lagrangian_decomposition(h, k, incl)
            out["decomposition"] = dict(witness=incl.label or str(list(incl.columns)), **parts)
            break
    return out


def _flow_section(bundle, h0, cfg: ScenarioConfig, out_dir: Path) -> tuple[dict, int]:
    trace = flow.run_flow(bundle, h0, cfg.flow)
    trace.to_csv(out_dir / "trace.csv")
    viol = trace.violations()
    mk = trace.column("m_K")
    sec = dict(accepted_steps=trace.accepted, rejected_steps=trace.rejected, t_final=float(trace.column("t")[-1]),
               m_K_initial=float(mk[0]), m_K_final=float(mk[-1]), violations=viol,
               condition_number=flow.condition_number(trace.final),
               final_report=chern.bundle_report(bundle, trace.final).as_dict())
    if bundle.rank > 1 and mk[-1] > 1e-6:
        try:
            proj = flow.extract_destabilizer(trace.final)
            rank = float(np.real(np.trace(proj.values[0, 0])))
            deg = so.projector_degree(bundle, trace.final, proj)
            sec["destabilizer"] = dict(rank=rank, degree=deg, slope=deg / rank,
                                       weak_residuals=list(so.weakly_holo_residual(bundle, trace.final, proj)))
        except TwistflowError as exc:
            sec["destabilizer"] = dict(reason=f"{type(exc).__name__}: {exc}")
    return sec, EXIT_INVARIANT if any(viol.values()) else EXIT_OK


def run_scenario(cfg: ScenarioConfig, output_dir=None) -> int:
    """Run one scenario and write its report; returns the exit status."""
    out_dir = Path(output_dir or cfg.output_dir) / cfg.name
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        log.error("cannot create %s: %s", out_dir, exc)
        return EXIT_IO
    report = dict(scenario=cfg.name, action=cfg.action, config=cfg.echo())
    errors = []
    status = EXIT_OK
    try:
        bundle = build_bundle(cfg)
        h = initial_metric(bundle, cfg.initial_metric)
        report["bundle"] = dict(name=bundle.name, rank=bundle.rank, degrees=list(bundle.degrees),
                                epsilon=bundle.twist.epsilon, b_coeff=bundle.twist.b_coeff)
        report["validation"] = _validation(bundle, h)
        if not report["validation"]["passed"]:
            errors.append(dict(type="TwistValidation", message="cocycle defect above tolerance"))
            status = EXIT_NUMERIC
        if cfg.action != "validate":
            report["report"] = chern.bundle_report(bundle, h).as_dict()
            report["stability"] = _stability(bundle, h)
        if cfg.action in ("lagrangian", "suite"):
            report["lagrangian"] = _lagrangian_section(bundle, h, cfg.lagrangian_nodes)
        if cfg.action in ("flow", "suite"):
            report["flow"], code = _flow_section(bundle, h, cfg, out_dir)
            if code:
                errors.append(dict(type="FlowInvariant", message=f"monotonicity breached: {report['flow']['violations']}"))
            status = max(status, code)
    except OSError as exc:
        errors.append(dict(type="IoError", message=str(exc)))
        status = EXIT_IO
    except (TwistflowError, np.linalg.LinAlgError, FloatingPointError) as exc:
        errors.append(dict(type=type(exc).__name__, message=str(exc)))
        status = EXIT_NUMERIC
    report["errors"] = errors
    report["exit_code"] = status
    try:
        write_json(out_dir / "report.json", report)
    except IoError as exc:
        log.error("%s", exc)
        return EXIT_IO
    return status


# deterministic JSON

def _encode(obj, level: int) -> str:
    pad, inner = "  " * level, "  " * (level + 1)
    if obj is None or isinstance(obj, bool):
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return format(v, ".17g") if math.isfinite(v) else "null"
    if isinstance(obj, (complex, np.complexfloating)):
        return _encode([obj.real, obj.imag], level)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        return _encode(obj.tolist(), level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{inner}{json.dumps(str(k))}: {_encode(v, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        return "[\n" + ",\n".join(inner + _encode(v, level + 1) for v in obj) + "\n" + pad + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj) -> str:
    """JSON text with every float written to 17 significant digits."""
    return _encode(obj, 0) + "\n"


def write_json(path, obj):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(dumps(obj))
    except OSError as exc:
        raise IoError(f"{path}: {exc.strerror or exc}") from exc


# suite

def thread_cap() -> int:
    raw = os.environ.get("TWISTFLOW_THREADS")
    if raw is None or raw == "":
        return os.cpu_count() or 1
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"TWISTFLOW_THREADS: expected a positive integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError(f"TWISTFLOW_THREADS: expected a positive integer, got {raw!r}")
    return n


def _criteria_ids(spec: str) -> list[int]:
    from .acceptance import CRITERIA

    if spec == "all":
        return sorted(CRITERIA)
    if spec == "none":
        return []
    try:
        ids = sorted({int(x) for x in spec.split(",") if x.strip()})
    except ValueError:
        raise ConfigError(f"--criteria: expected 'all', 'none' or a comma list of ids, got {spec!r}") from None
    bad = [i for i in ids if i not in CRITERIA]
    if bad:
        raise ConfigError(f"--criteria: unknown id(s) {bad}")
    return ids


def run_suite(directory, output_dir=None, criteria: str = "all") -> int:
    from .acceptance import run_criterion

    directory = Path(directory)
    if not directory.is_dir():
        log.error("%s is not a directory", directory)
        return EXIT_IO
    out = Path(output_dir) if output_dir else directory / "twistflow_out"
    ids = _criteria_ids(criteria)
    workers = thread_cap()
    paths = sorted(directory.glob("*.json"))

    def one(path):
        try:
            cfg = load_config(path)
        except ConfigError as exc:
            return dict(config=path.name, scenario=None, exit_code=EXIT_IO, error=f"{type(exc).__name__}: {exc}")
        except IoError as exc:
            return dict(config=path.name, scenario=None, exit_code=EXIT_IO, error=str(exc))
        return dict(config=path.name, scenario=cfg.name, exit_code=run_scenario(cfg, out))

    with ThreadPoolExecutor(max_workers=workers) as pool:
        scenarios = list(pool.map(one, paths))
        results = list(pool.map(run_criterion, ids))
    summary = dict(scenarios=scenarios, criteria=[
        dict(id=r.cid, title=r.title, status="pass" if r.passed else "fail", metrics=r.metrics) for r in results])
    for r in results:
        print(r.line())
    try:
        write_json(out / "suite_summary.json", summary)
    except IoError as exc:
        log.error("%s", exc)
        return EXIT_IO
    status = max([s["exit_code"] for s in scenarios], default=EXIT_OK)
    if any(not r.passed for r in results):
        status = max(status, EXIT_NUMERIC)
    return status


# command line

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="twistflow", description="Twisted-bundle curvature and heat-flow laboratory.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for act in ("validate", "report", "flow", "lagrangian"):
        sp = sub.add_parser(act, help=f"run the {act} pipeline on one scenario config")
        sp.add_argument("config")
        sp.add_argument("--output-dir", default=None)
    sp = sub.add_parser("suite", help="run every *.json config in a directory plus the acceptance criteria")
    sp.add_argument("directory")
    sp.add_argument("--output-dir", default=None)
    sp.add_argument("--criteria", default="all", help="'all' (default), 'none' or a comma list such as 1,2,13")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "suite":
            return run_suite(args.directory, args.output_dir, args.criteria)
        cfg = load_config(args.config)
        cfg.action = args.command
        code = run_scenario(cfg, args.output_dir)
    except (ConfigError, IoError) as exc:
        print(f"twistflow: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_IO
    out = Path(args.output_dir or cfg.output_dir) / cfg.name
    print(f"{cfg.name}: exit {code}, report in {out}")
    return code


if __name__ == "__main__":
    sys.exit(main())
