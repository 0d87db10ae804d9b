"""Experiment configuration: JSON loading, validation and object construction.

Validation is strict: unknown keys are rejected and every error names the
offending field. Relative paths inside a config resolve against the config
file's directory.
"""
from __future__ import annotations

import dataclasses
import importlib.util
import json
from importlib import resources
from pathlib import Path
from typing import Callable, Dict, List, Optional, Union

import numpy as np

from ..stl.constraint import ConstraintSpec
from ..stl.formula import Formula, is_bounded
from ..stl.parser import FormulaSyntaxError, UnknownPredicate, load_predicate_table, parse_formula, predicate_table_from_dict
from ..stl.predicates import AxisBox, PredicateAtom, atom_from_dict
from ..sim import bicycle, linear, models, uuv
from ..sim.controllers import ConstantController, LinearFeedback, NNController, NNWeights, TanhFeedback


class ConfigError(ValueError):
    """Invalid experiment configuration; the message names the field."""


DEFAULT_HORIZON = {"f110": 150, "uuv": 200, "linear": 100, "scalar_lipschitz": 100}


@dataclasses.dataclass(frozen=True)
class RiskEntry:
    metric: str
    beta: float = 0.9
    delta: float = 0.05
    support_bound: Optional[float] = None
    clip_to_support: bool = False
    convention: str = "tail"


@dataclasses.dataclass
class Experiment:
    system_name: str
    system: models.System
    horizon: int
    variants: Dict[str, models.SystemModel]  # "nominal" first, then perturbations in config order
    controllers: Dict[str, Callable]
    spec: Union[Formula, ConstraintSpec]
    spec_text: str
    until_inner: str
    trials: int
    master_seed: int
    chunk_size: int
    risk: List[RiskEntry]
    betas: Optional[List[float]]
    gap: Optional[dict]
    gamma: dict
    wasserstein: Optional[dict]
    output: Path
    base_dir: Path

    @property
    def horizon_clipped(self) -> bool:
        """Whether unbounded temporal operators are cut at the end of the trace."""
        return not isinstance(self.spec, ConstraintSpec) and not is_bounded(self.spec)


def _schema() -> dict:
    return json.loads(resources.files("stlrisk.schemas").joinpath("experiment.schema.json").read_text())


def _field(path) -> str:
    return "/".join(str(p) for p in path) or "<root>"


def validate(data: dict) -> None:
    import jsonschema

    validator = jsonschema.Draft202012Validator(_schema())
    errors = sorted(validator.iter_errors(data), key=lambda e: (len(e.absolute_path), list(map(str, e.absolute_path))))
    if errors:
        err = jsonschema.exceptions.best_match(errors)
        raise ConfigError(f"config field '{_field(err.absolute_path)}': {err.message}")


def _load_module(path: Path):
    spec = importlib.util.spec_from_file_location(f"stlrisk_custom_{path.stem}", path)
    if spec is None or spec.loader is None:
        raise ConfigError(f"config field 'system/custom': cannot load {path}")
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    return module


def _build_system(name: str, params: dict, module):
    try:
        if name == "f110":
            if "lidar" in params:
                params = dict(params, lidar=bicycle.LidarConfig(**params["lidar"]))
            if "walls_file" in params:
                params = dict(params)
                params["walls"] = bicycle.load_map(params.pop("walls_file"))
                params.setdefault("free_space", None)
            return bicycle.BicycleHallway(**params)
        if name == "uuv":
            return uuv.UuvPipeline(**params)
        if name == "linear":
            return linear.LinearSystem(**params) if params else linear.stable_linear_system()
        if name == "scalar_lipschitz":
            return linear.scalar_lipschitz_system(**params)
        return module.make_system(**params)
    except (TypeError, ValueError, KeyError, OSError) as exc:
        raise ConfigError(f"config field 'system_params': {exc}") from exc


def _scripted(name: str, system, module) -> Dict[str, Callable]:
    if name == "f110":
        return bicycle.scripted_bicycle_controllers(system.lidar)
    if name == "uuv":
        return uuv.scripted_uuv_controllers()
    if name in ("linear", "scalar_lipschitz"):
        return {"zero": ConstantController(np.zeros(system.control_dim)), "tanh": TanhFeedback(1.0)}
    return module.scripted_controllers() if hasattr(module, "scripted_controllers") else {}


def _perturbation(i: int, p: dict, module) -> models.Perturbation:
    kind = p["type"]
    args = {k: v for k, v in p.items() if k not in ("name", "type")}
    try:
        if kind == "dropped_rays":
            return bicycle.DroppedRays(**args)
        if kind == "structured_lidar":
            return bicycle.StructuredLidar(**args)
        if kind == "observation_offset":
            return models.ObservationOffset(args["offset"])
        if kind == "initial_offset":
            return models.InitialOffset(args["offset"])
        if kind == "process_noise_scale":
            return models.ProcessNoiseScale(args["scale"])
        if kind == "resample_disturbances":
            return models.ResampleDisturbances()
        if kind == "uuv_physics":
            return uuv.UuvPhysics(**args)
        if module is None or not hasattr(module, args["factory"]):
            raise ConfigError(f"config field 'perturbations/{i}/factory': no such factory in the custom module")
        return getattr(module, args["factory"])(**args.get("params", {}))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"config field 'perturbations/{i}': {exc}") from exc


def _controller(i: int, c: dict, system, scripted, base: Path) -> Callable:
    def where(key):
        return f"config field 'controllers/{i}/{key}'"

    if "scripted" in c:
        if c["scripted"] not in scripted:
            raise ConfigError(f"{where('scripted')}: unknown controller {c['scripted']!r}; "
                              f"available: {', '.join(sorted(scripted)) or 'none'}")
        return scripted[c["scripted"]]
    if "weights" in c:
        try:
            w = NNWeights.load(base / c["weights"])
        except (OSError, KeyError, ValueError, TypeError) as exc:
            raise ConfigError(f"{where('weights')}: {exc}") from exc
        if w.input_dim != system.obs_dim or w.output_dim != system.control_dim:
            raise ConfigError(f"{where('weights')}: network maps {w.input_dim} -> {w.output_dim}, "
                              f"system needs {system.obs_dim} -> {system.control_dim}")
        return NNController(w, c.get("input_offset", 0.0), c.get("input_scale", 1.0),
                            c.get("output_scale", 1.0), c.get("output_clip"))
    if "linear_gain" in c:
        k = np.asarray(c["linear_gain"], dtype=float)
        if k.shape != (system.control_dim, system.obs_dim):
            raise ConfigError(f"{where('linear_gain')}: expected shape {(system.control_dim, system.obs_dim)}, got {k.shape}")
        return LinearFeedback(k)
    if "tanh" in c:
        return TanhFeedback(c["tanh"]["gain"], c["tanh"].get("scale", 1.0))
    u = np.asarray(c["constant"], dtype=float)
    if u.size != system.control_dim:
        raise ConfigError(f"{where('constant')}: expected {system.control_dim} values")
    return ConstantController(u)


def _spec(s: dict, name: str, system, base: Path):
    if s["kind"] == "formula":
        try:
            if isinstance(s["predicates"], str):
                table = load_predicate_table(base / s["predicates"])
            else:
                table = predicate_table_from_dict(s["predicates"])
            return parse_formula(s["text"], table), s["text"]
        except FormulaSyntaxError as exc:
            raise ConfigError(f"config field 'spec/text': {exc}") from exc
        except UnknownPredicate as exc:
            raise ConfigError(f"config field 'spec/text': unknown predicate {exc.name!r}") from exc
        except Exception as exc:  # schema violations, unreadable files
            raise ConfigError(f"config field 'spec/predicates': {getattr(exc, 'message', exc)}") from exc
    if s["kind"] == "constraint":
        try:
            atom = atom_from_dict("constraint", s["predicate"])
        except (KeyError, ValueError, TypeError) as exc:
            raise ConfigError(f"config field 'spec/predicate': {exc}") from exc
        horizon = tuple(s["horizon"]) if "horizon" in s else None
        return ConstraintSpec(atom, horizon), "constraint " + json.dumps(s["predicate"], sort_keys=True)
    if name == "f110":
        return system.constraint(), "clearance: d_wall(x) - d_w >= 0 at every step"
    if name == "uuv":
        t_uuv = s.get("t_uuv", 10.0)
        return system.stl_spec(t_uuv), f"G(d < d_l -> F[0,{t_uuv}s](d >= d_l)) & G(d > d_u -> F[0,{t_uuv}s](d <= d_u))"
    if name in ("linear", "scalar_lipschitz"):
        n = system.state_dim
        atom = PredicateAtom("unit_box", AxisBox([-1.0] * n, [1.0] * n))
        return ConstraintSpec(atom), "state in [-1, 1]^n at every step"
    raise ConfigError("config field 'spec/kind': a custom system has no built-in specification")


def build(data: dict, base_dir: Path = Path(".")) -> Experiment:
    validate(data)
    module = None
    if isinstance(data["system"], dict):
        path = base_dir / data["system"]["custom"]
        try:
            module = _load_module(path)
        except (OSError, SyntaxError, ImportError) as exc:
            raise ConfigError(f"config field 'system/custom': {exc}") from exc
        if not hasattr(module, "make_system"):
            raise ConfigError("config field 'system/custom': module does not define make_system")
        name = "custom"
    else:
        name = data["system"]
    system = _build_system(name, data.get("system_params", {}), module)
    variants = {"nominal": models.SystemModel(system)}
    for i, p in enumerate(data.get("perturbations", [])):
        if p["name"] in variants:
            raise ConfigError(f"config field 'perturbations/{i}/name': duplicate variant {p['name']!r}")
        variants[p["name"]] = models.SystemModel(system, _perturbation(i, p, module), p["name"])
    scripted = _scripted(name, system, module)
    controllers = {}
    for i, c in enumerate(data["controllers"]):
        if c["name"] in controllers:
            raise ConfigError(f"config field 'controllers/{i}/name': duplicate controller {c['name']!r}")
        controllers[c["name"]] = _controller(i, c, system, scripted, base_dir)
    spec, spec_text = _spec(data["spec"], name, system, base_dir)
    risk = [RiskEntry(**r) for r in data["risk"]]
    for i, r in enumerate(risk):
        if r.metric == "CVaR" and r.delta > 0.5:
            raise ConfigError(f"config field 'risk/{i}/delta': the CVaR bound needs delta <= 0.5")
    gap = data.get("gap")
    if gap:
        for j, pair in enumerate(gap.get("compare", [])):
            for name_ in pair:
                if name_ not in controllers:
                    raise ConfigError(f"config field 'gap/compare/{j}': unknown controller {name_!r}")
    wass = data.get("wasserstein")
    if wass and "controller" in wass:
        if wass["controller"] not in controllers:
            raise ConfigError(f"config field 'wasserstein/controller': unknown controller {wass['controller']!r}")
        for v in wass["variants"]:
            if v not in variants:
                raise ConfigError(f"config field 'wasserstein/variants': unknown variant {v!r}")
    return Experiment(
        system_name=name,
        system=system,
        horizon=data.get("horizon", DEFAULT_HORIZON.get(name, 100)),
        variants=variants,
        controllers=controllers,
        spec=spec,
        spec_text=spec_text,
        until_inner=data.get("until_inner", "open"),
        trials=data.get("trials", 1000),
        master_seed=data.get("master_seed", 0),
        chunk_size=data.get("chunk_size", 512),
        risk=risk,
        betas=data.get("betas"),
        gap=gap,
        gamma=data.get("gamma", {}),
        wasserstein=wass,
        output=base_dir / data.get("output", "out"),
        base_dir=base_dir,
    )


def load(path) -> Experiment:
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config field '<root>': expected a JSON object")
    return build(data, path.parent)
