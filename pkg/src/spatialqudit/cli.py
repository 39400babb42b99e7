"""Command-line front end.

Reads a JSON experiment config, runs one command and writes CSV tables or
canonical JSON documents (sorted keys, floats with 17 significant digits).
Errors go to stderr as one ``ERROR <code> <detail>`` line; the exit status
is 0 on success, 1 for invalid input and 2 when a search fails or an outcome
is impossible.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from . import mc, optics, planner, qstate
from .errors import ParseError, SpatialQuditError, ValidationError
from .mc import CountRecord, DetectorModel
from .optics import OpticalGeometry
from .planner import PovmPlan, SpatialPlan
from .povm import LcdSettings
from .qstate import DensityMatrix, Observable

_GEOMETRY_KEYS = {"D": "D", "a_m": "a", "d_m": "d", "lambda_m": "wavelength", "f_m": "f"}
_DETECTOR_KEYS = {"w_m": "pinhole_halfwidth", "efficiency": "efficiency", "shots": "shots"}
_TOP_KEYS = {"geometry", "state", "detector", "seed", "rescale", "observable"}


# ---------------------------------------------------------------------------
# canonical serialization


def fmt_float(x: float) -> str:
    x = float(x)
    if not math.isfinite(x):
        raise ValidationError(f"cannot serialize non-finite number {x!r}")
    if x == 0:
        return "0.0"
    s = format(x, ".17g")
    if "e" not in s and "." not in s:
        s += ".0"
    return s


def canonical_json(obj: Any) -> str:
    """Deterministic JSON text: sorted keys, 17-significant-digit floats, LF-terminated."""
    return _encode(obj) + "\n"


def _encode(obj: Any) -> str:
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt_float(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        items = sorted(obj.items())
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_encode(v)}" for k, v in items) + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_encode(v) for v in obj) + "]"
    raise ValidationError(f"cannot serialize {type(obj).__name__}")


def _loads(text: str, what: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{what}: {exc.msg} at line {exc.lineno} column {exc.colno}") from None


def csv_text(header: list[str], rows) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(str(int(v)) if isinstance(v, (int, np.integer)) else fmt_float(v) for v in row))
    return "\n".join(lines) + "\n"


def _matrix_to_json(m) -> list:
    m = np.asarray(m, dtype=complex)
    return [[[float(c.real), float(c.imag)] for c in row] for row in m]


def _matrix_from_json(rows, name: str) -> np.ndarray:
    if not isinstance(rows, list) or not rows or not all(isinstance(r, list) for r in rows):
        raise ValidationError(f"{name}: expected a list of rows")
    out = []
    for i, row in enumerate(rows):
        vals = []
        for j, c in enumerate(row):
            if isinstance(c, (int, float)) and not isinstance(c, bool):
                vals.append(complex(float(c), 0.0))
            elif isinstance(c, list) and len(c) in (1, 2) and all(isinstance(t, (int, float)) and not isinstance(t, bool) for t in c):
                vals.append(complex(float(c[0]), float(c[1]) if len(c) == 2 else 0.0))
            else:
                raise ValidationError(f"{name}[{i}][{j}]: expected a number or [re, im] pair, got {c!r}")
        out.append(vals)
    if len({len(r) for r in out}) != 1 or len(out[0]) != len(out):
        raise ValidationError(f"{name}: matrix must be square")
    return np.array(out, dtype=complex)


def _vector_to_json(v) -> list:
    return [[float(c.real), float(c.imag)] for c in np.asarray(v, dtype=complex)]


# ---------------------------------------------------------------------------
# experiment config


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    geometry: OpticalGeometry = field(default_factory=OpticalGeometry)
    state: DensityMatrix | None = None
    detector: DetectorModel = field(default_factory=DetectorModel)
    seed: int = 0
    rescale: bool = False
    observable: Observable | None = None

    def to_json(self) -> dict:
        g, det = self.geometry, self.detector
        doc = {
            "geometry": {"D": g.D, "a_m": float(g.a), "d_m": float(g.d), "lambda_m": float(g.wavelength), "f_m": float(g.f)},
            "detector": {"w_m": float(det.pinhole_halfwidth), "efficiency": float(det.efficiency), "shots": int(det.shots)},
            "seed": int(self.seed),
            "rescale": bool(self.rescale),
        }
        if self.state is not None:
            doc["state"] = {"rows": _matrix_to_json(self.state.entries)}
        if self.observable is not None:
            doc["observable"] = {"rows": _matrix_to_json(self.observable.entries)}
        return doc

    def __eq__(self, other):
        if not isinstance(other, ExperimentConfig):
            return NotImplemented
        return canonical_json(self.to_json()) == canonical_json(other.to_json())


def _number(section: dict, key: str, where: str, integer: bool = False):
    v = section[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ValidationError(f"{where}.{key}: expected a number, got {v!r}")
    if integer:
        if isinstance(v, float) and not v.is_integer():
            raise ValidationError(f"{where}.{key}: expected an integer, got {v!r}")
        return int(v)
    return float(v)


def _section(doc: dict, name: str, keys: dict) -> dict:
    sec = doc.get(name, {})
    if not isinstance(sec, dict):
        raise ValidationError(f"{name}: expected an object")
    unknown = set(sec) - set(keys)
    if unknown:
        raise ValidationError(f"{name}: unknown keys {sorted(unknown)}")
    return sec


def parse_observable(value, dim: int | None = None) -> Observable:
    if isinstance(value, str) and value.lstrip().startswith(("[", "{")):
        value = _loads(value, "observable")
    if isinstance(value, str):
        obs = Observable.pauli(value)
    elif isinstance(value, dict) and "rows" in value:
        obs = Observable(_matrix_from_json(value["rows"], "observable.rows"))
    elif isinstance(value, list):
        obs = Observable(_matrix_from_json(value, "observable"))
    else:
        raise ValidationError(f"observable: expected a Pauli name or {{rows: ...}}, got {value!r}")
    if dim is not None and obs.dim != dim:
        raise ValidationError(f"observable: dimension {obs.dim} does not match geometry.D = {dim}")
    return obs


def parse_config(text: str) -> ExperimentConfig:
    doc = _loads(text, "config")
    if not isinstance(doc, dict):
        raise ParseError("config: top level must be a JSON object")
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise ValidationError(f"config: unknown keys {sorted(unknown)}")

    g = _section(doc, "geometry", _GEOMETRY_KEYS)
    kwargs = {}
    for key, attr in _GEOMETRY_KEYS.items():
        if key in g:
            kwargs[attr] = _number(g, key, "geometry", integer=(key == "D"))
    geometry = OpticalGeometry(**kwargs)

    d = _section(doc, "detector", _DETECTOR_KEYS)
    kwargs = {}
    for key, attr in _DETECTOR_KEYS.items():
        if key in d:
            kwargs[attr] = _number(d, key, "detector", integer=(key == "shots"))
    detector = DetectorModel(**kwargs)

    state = None
    if "state" in doc:
        s = doc["state"]
        if not isinstance(s, dict) or "rows" not in s:
            raise ValidationError("state: expected an object with 'rows'")
        state = qstate.validate_density(_matrix_from_json(s["rows"], "state.rows"))
        if state.dim != geometry.D:
            raise ValidationError(f"state: dimension {state.dim} does not match geometry.D = {geometry.D}")

    seed = doc.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ValidationError(f"seed: expected a non-negative integer, got {seed!r}")
    rescale = doc.get("rescale", False)
    if not isinstance(rescale, bool):
        raise ValidationError(f"rescale: expected true or false, got {rescale!r}")
    obs = parse_observable(doc["observable"], geometry.D) if "observable" in doc else None
    return ExperimentConfig(geometry, state, detector, seed, rescale, obs)


def serialize_config(cfg: ExperimentConfig) -> str:
    return canonical_json(cfg.to_json())


# ---------------------------------------------------------------------------
# plans and records


def plan_to_json(plan) -> dict:
    doc = {
        "strategy": plan.strategy,
        "eigenvalues": [float(v) for v in plan.eigenvalues],
        "observable": {"rows": _matrix_to_json(plan.observable.entries)},
        "degenerate": bool(plan.degenerate),
    }
    if isinstance(plan, PovmPlan):
        doc["settings"] = [
            {"thetas_rad": s.thetas.tolist(), "phis_rad": s.phis.tolist(), "rescale_weight": s.rescale_weight}
            for s in plan.settings
        ]
        doc["detection"] = {"x_m": float(plan.detection_point[0]), "z_m": float(plan.detection_point[1])}
    else:
        doc["image_plane"] = plan.image_plane
        doc["z_m"] = None if plan.image_plane else float(plan.z)
        doc["positions_m"] = [float(x) for x in plan.positions]
        doc["compensation"] = [float(c) for c in plan.compensation]
        doc["fidelities"] = [float(f) for f in plan.fidelities]
    return doc


def plan_from_json(doc) -> PovmPlan | SpatialPlan:
    try:
        obs = parse_observable(doc["observable"])
        eigenvalues = np.array([float(v) for v in doc["eigenvalues"]])
        degenerate = bool(doc.get("degenerate", False))
        if doc["strategy"] == "povm":
            settings = tuple(
                LcdSettings(np.array(s["thetas_rad"], float), np.array(s["phis_rad"], float), float(s["rescale_weight"]))
                for s in doc["settings"]
            )
            point = (float(doc["detection"]["x_m"]), float(doc["detection"]["z_m"]))
            if point[0] != 0.0:
                raise ValidationError("detection.x_m: the fixed detector must sit at x = 0")
            return PovmPlan(obs, eigenvalues, settings, point, degenerate)
        if doc["strategy"] == "spatial":
            z = None if doc.get("image_plane") else float(doc["z_m"])
            return SpatialPlan(
                obs,
                eigenvalues,
                z,
                np.array(doc["positions_m"], float),
                np.array(doc["compensation"], float),
                np.array(doc["fidelities"], float),
                degenerate,
            )
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"plan: missing or malformed field {exc}") from None
    raise ValidationError(f"plan.strategy: expected 'povm' or 'spatial', got {doc.get('strategy')!r}")


def record_to_json(record: CountRecord, obs: Observable) -> dict:
    est = mc.estimate_probabilities(record)
    value, err = mc.estimate_expectation(obs, record)
    return {
        "plan": plan_to_json(record.plan),
        "counts": list(record.counts),
        "shots": int(record.shots),
        "seed": int(record.seed),
        "estimates": [{"p": p, "standard_error": e} for p, e in est],
        "expectation": {"value": value, "standard_error": err},
    }


def record_from_json(doc) -> CountRecord:
    try:
        return CountRecord(plan_from_json(doc["plan"]), tuple(int(c) for c in doc["counts"]), int(doc["shots"]), int(doc["seed"]))
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"record: missing or malformed field {exc}") from None


# ---------------------------------------------------------------------------
# commands


def _need_state(cfg: ExperimentConfig) -> DensityMatrix:
    if cfg.state is None:
        raise ValidationError("state: this command needs a state in the config")
    return cfg.state


def _observable(args, cfg: ExperimentConfig) -> Observable:
    if args.observable:
        return parse_observable(args.observable, cfg.geometry.D)
    if cfg.observable is not None:
        return cfg.observable
    raise ValidationError("observable: pass --observable or set it in the config")


def _plan(args, cfg: ExperimentConfig):
    if getattr(args, "plan", None):
        plan = plan_from_json(_loads(Path(args.plan).read_text(encoding="utf-8"), "plan"))
        if plan.dim != cfg.geometry.D:
            raise ValidationError(f"plan: dimension {plan.dim} does not match geometry.D = {cfg.geometry.D}")
        return plan
    obs = _observable(args, cfg)
    if args.strategy == "spatial":
        return planner.plan_spatial(obs, cfg.geometry)
    return planner.plan_povm(obs, cfg.geometry, rescale=cfg.rescale)


def _emit(text: str, path: str | None, out):
    if path:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        out.write(text)


def cmd_params(args, cfg, out):
    lines = ["z_m,eta,Z_m,kappa_per_m,delta"]
    for z in args.z:
        pp = optics.plane_params(cfg.geometry, z)
        # Z diverges in the focal plane
        big_z = fmt_float(pp.Z) if math.isfinite(pp.Z) else "inf"
        lines.append(",".join([fmt_float(pp.z), fmt_float(pp.eta), big_z, fmt_float(pp.kappa), fmt_float(pp.delta)]))
    _emit("\n".join(lines) + "\n", args.output, out)


def cmd_scan(args, cfg, out):
    rho = _need_state(cfg)
    g = cfg.geometry
    half = 5 * g.far_field_period
    x_min = -half if args.x_min is None else args.x_min
    x_max = half if args.x_max is None else args.x_max
    xs = np.linspace(x_min, x_max, args.nx)
    zs = args.z if args.z else np.linspace(args.z_min if args.z_min is not None else g.f, args.z_max if args.z_max is not None else g.f, args.nz)
    table = optics.scan_density(rho, g, xs, zs, workers=args.workers)
    _emit(csv_text(["x_m", "z_m", "density_per_m"], table), args.output, out)


def cmd_state_at(args, cfg, out):
    st = optics.postselected_state(cfg.geometry, args.x, args.z)
    doc = {
        "x_m": st.x,
        "z_m": st.z,
        "amplitudes": _vector_to_json(st.amplitudes),
        "norm2_per_m": st.norm2,
        "normalized": _vector_to_json(st.normalized),
    }
    if cfg.geometry.D == 2:
        b = qstate.bloch_from_pure(st.normalized)
        doc["bloch"] = {"theta_rad": b.theta, "phi_rad": b.phi}
    if cfg.state is not None:
        doc["density_per_m"] = optics.detection_density(cfg.state, cfg.geometry, args.x, args.z)
    _emit(canonical_json(doc), args.output, out)


def cmd_plan(args, cfg, out):
    _emit(canonical_json(plan_to_json(_plan(args, cfg))), args.output, out)


def cmd_measure(args, cfg, out):
    rho = _need_state(cfg)
    plan = _plan(args, cfg)
    probs, expectation = planner.predicted_statistics(rho, plan, cfg.geometry)
    header = [f"p_{k + 1}" for k in range(plan.dim)] + ["expectation"]
    _emit(csv_text(header, [list(probs) + [expectation]]), args.output, out)


def _detector(args, cfg) -> DetectorModel:
    det = cfg.detector
    if args.shots is not None:
        det = DetectorModel(det.pinhole_halfwidth, det.efficiency, args.shots)
    return det


def cmd_simulate(args, cfg, out):
    rho = _need_state(cfg)
    plan = _plan(args, cfg)
    seed = cfg.seed if args.seed is None else args.seed
    rec = mc.simulate_counts(rho, plan, cfg.geometry, _detector(args, cfg), seed, workers=args.workers)
    est = mc.estimate_probabilities(rec)
    rows = [(k + 1, float(plan.eigenvalues[k]), rec.counts[k], p, e) for k, (p, e) in enumerate(est)]
    _emit(csv_text(["outcome", "eigenvalue", "counts", "estimate", "standard_error"], rows), args.output, out)
    if args.record:
        _emit(canonical_json(record_to_json(rec, plan.observable)), args.record, out)


def cmd_tomo(args, cfg, out):
    rho = _need_state(cfg)
    seed = cfg.seed if args.seed is None else args.seed
    rep = mc.run_tomography(rho, cfg.geometry, _detector(args, cfg), seed, rescale=cfg.rescale, truth=rho, workers=args.workers)
    doc = {
        "seed": seed,
        "shots": int(rep.records[0].shots),
        "paulis": [
            {"observable": name, "counts": list(r.counts), "value": v, "standard_error": e}
            for name, r, (v, e) in zip(mc.PAULI_ORDER, rep.records, rep.estimates)
        ],
        "reconstruction": {"rows": _matrix_to_json(rep.reconstruction.entries)},
        "trace_distance": rep.trace_distance,
    }
    _emit(canonical_json(doc), args.output, out)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(f"usage: {message}")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="spatialqudit", description="Simulate and plan measurements of slit-encoded photonic qudits.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, output=True):
        sp.add_argument("--config", help="experiment config (JSON); defaults apply when omitted")
        if output:
            sp.add_argument("--output", "-o", help="write to this file instead of stdout")
        return sp

    def planning(sp):
        sp.add_argument("--observable", help="sigma_x, sigma_y, sigma_z or an inline JSON matrix")
        sp.add_argument("--strategy", choices=("povm", "spatial"), default="povm")
        sp.add_argument("--plan", help="use a previously written plan file")

    sp = common(sub.add_parser("params", help="plane parameters at one or more z"))
    sp.add_argument("--z", type=float, nargs="+", required=True)
    sp.set_defaults(func=cmd_params)

    sp = common(sub.add_parser("scan", help="detection density table"))
    sp.add_argument("--x-min", type=float)
    sp.add_argument("--x-max", type=float)
    sp.add_argument("--nx", type=int, default=201)
    sp.add_argument("--z", type=float, nargs="+")
    sp.add_argument("--z-min", type=float)
    sp.add_argument("--z-max", type=float)
    sp.add_argument("--nz", type=int, default=1)
    sp.add_argument("--workers", type=int, default=1)
    sp.set_defaults(func=cmd_scan)

    sp = common(sub.add_parser("state-at", help="postselected state and Bloch angles at (x, z)"))
    sp.add_argument("--x", type=float, required=True)
    sp.add_argument("--z", type=float, required=True)
    sp.set_defaults(func=cmd_state_at)

    sp = common(sub.add_parser("plan", help="measurement plan for an observable"))
    planning(sp)
    sp.set_defaults(func=cmd_plan)

    sp = common(sub.add_parser("measure", help="ideal outcome probabilities and expectation"))
    planning(sp)
    sp.set_defaults(func=cmd_measure)

    sp = common(sub.add_parser("simulate", help="Monte Carlo photon counts and estimates"))
    planning(sp)
    sp.add_argument("--shots", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--record", help="also write the count record (JSON) here")
    sp.set_defaults(func=cmd_simulate)

    sp = common(sub.add_parser("tomo", help="three-Pauli qubit tomography of the config state"))
    sp.add_argument("--shots", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--workers", type=int, default=1)
    sp.set_defaults(func=cmd_tomo)
    return p


def main(argv=None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    try:
        args = build_parser().parse_args(argv)
        if args.config:
            try:
                text = Path(args.config).read_text(encoding="utf-8")
            except OSError as exc:
                raise ParseError(f"config: cannot read {args.config}: {exc.strerror}") from None
            cfg = parse_config(text)
        else:
            cfg = ExperimentConfig()
        if getattr(args, "workers", 1) < 1:
            raise ValidationError("workers: must be >= 1")
        args.func(args, cfg, out)
    except SpatialQuditError as exc:
        detail = " ".join(str(exc).split())
        err.write(f"ERROR {exc.code} {detail}\n")
        return exc.exit_status
    except OSError as exc:
        err.write(f"ERROR IOError {exc.strerror}: {exc.filename}\n")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
