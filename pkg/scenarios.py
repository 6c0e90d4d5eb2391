# scenarios.py
"""Scenario-configuratie: inlezen, wegschrijven en bouwen van werkruimte, model en planner."""

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

from dynamics import DUBINS, INTEGRATOR, SdeModel, dubins_model, single_integrator_model
from environment import Workspace, workspace_from_config
from pi_control import RecedingHorizonConfig
from planner import PlannerGraph
from topology import ClassFilter

SCENARIO_DIR = Path(__file__).parent / "scenarios"

# Meegeleverde scenario's (geometrie benaderd uit de figuren)
BUNDLED = {
    "integrator_two_obstacles": SCENARIO_DIR / "integrator_two_obstacles.json",
    "dubins_cluttered": SCENARIO_DIR / "dubins_cluttered.json",
}

_SYSTEM_DEFAULTS = {
    INTEGRATOR: {"dt": 0.1, "R": 2.0, "phi_fail": math.inf},
    DUBINS: {"dt": 0.05, "R": 1.0, "phi_fail": 1000.0},
}


class ScenarioError(ValueError):
    """Scenario-bestand ongeldig of onvolledig."""


@dataclass
class ModelConfig:
    system: str
    b: float
    dt: float | None = None
    q: float = 1.0
    R: float | None = None
    V: float = 1.0
    rho: float = 1.0
    phi_fail: float | None = None
    lam: float | None = None


@dataclass
class PlannerConfig:
    iters: int = 2000
    seed: int = 0
    h_limit: float = 0.6
    gamma: float | None = None
    max_radius: float | None = None
    goal_bias: float = 0.05
    heading_weight: float = 1.0
    tol: float = 0.05
    curve_every: int = 100


@dataclass
class ControlConfig:
    n_samples: int = 200
    runs: int = 20
    max_steps: int | None = None
    max_wall_steps: int = 1000
    center_increments: bool = True


@dataclass
class Scenario:
    name: str
    workspace: dict
    model: ModelConfig
    start: list[float]
    planner: PlannerConfig = field(default_factory=PlannerConfig)
    control: ControlConfig = field(default_factory=ControlConfig)
    workspace_file: str | None = None
    base_dir: Path | None = field(default=None, compare=False, repr=False)


def _float_or_inf(value):
    if value is None:
        return None
    if isinstance(value, str):
        if value.strip().lower() in ("inf", "infinity", "+inf"):
            return math.inf
        raise ScenarioError(f"ongeldige waarde: {value!r}")
    return float(value)


def _section(cls, data: dict | None, name: str):
    data = dict(data or {})
    known = set(cls.__dataclass_fields__)
    unknown = set(data) - known
    if unknown:
        raise ScenarioError(f"onbekende sleutels in '{name}': {', '.join(sorted(unknown))}")
    try:
        return cls(**data)
    except TypeError as e:
        raise ScenarioError(f"sectie '{name}': {e}") from e


def parse_scenario(data: dict, base_dir: Path | None = None) -> Scenario:
    base_dir = Path(base_dir) if base_dir is not None else Path.cwd()
    for key in ("name", "workspace", "model", "start"):
        if key not in data:
            raise ScenarioError(f"ontbrekende sleutel: {key}")

    workspace_file = None
    workspace = data["workspace"]
    if isinstance(workspace, str):
        workspace_file = workspace
        path = base_dir / workspace
        if not path.exists():
            raise ScenarioError(f"werkruimtebestand niet gevonden: {path}")
        with open(path, encoding="utf-8") as f:
            workspace = json.load(f)

    model_data = dict(data["model"])
    if "lambda" in model_data:
        model_data["lam"] = model_data.pop("lambda")
    for key in ("phi_fail", "lam"):
        if key in model_data:
            model_data[key] = _float_or_inf(model_data[key])
    model = _section(ModelConfig, model_data, "model")

    scenario = Scenario(
        name=str(data["name"]),
        workspace=workspace,
        model=model,
        start=[float(v) for v in data["start"]],
        planner=_section(PlannerConfig, data.get("planner"), "planner"),
        control=_section(ControlConfig, data.get("control"), "control"),
        workspace_file=workspace_file,
        base_dir=base_dir,
    )
    check_scenario(scenario)
    return scenario


def check_scenario(s: Scenario) -> None:
    if s.model.system not in _SYSTEM_DEFAULTS:
        raise ScenarioError(f"onbekend systeem: {s.model.system}")
    if s.planner.h_limit <= 0:
        raise ScenarioError("h_limit moet > 0 zijn")
    if s.control.n_samples < 1:
        raise ScenarioError("n_samples moet >= 1 zijn")
    if s.model.b <= 0:
        raise ScenarioError("b moet > 0 zijn")
    expected = 3 if s.model.system == DUBINS else 2
    if len(s.start) != expected:
        raise ScenarioError(f"start moet {expected} componenten hebben")
    for key in ("bounds", "goal"):
        if key not in s.workspace:
            raise ScenarioError(f"werkruimte mist '{key}'")


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    if not path.exists() and str(path) in BUNDLED:
        path = BUNDLED[str(path)]
    if not path.exists():
        raise ScenarioError(f"scenario niet gevonden: {path}")
    try:
        with open(path, encoding="utf-8") as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise ScenarioError(f"{path}: ongeldige JSON ({e})") from e
    return parse_scenario(data, path.parent)


def scenario_to_dict(s: Scenario) -> dict:
    model = asdict(s.model)
    model["lambda"] = model.pop("lam")
    for key in ("phi_fail", "lambda"):
        if model[key] is not None and math.isinf(model[key]):
            model[key] = "inf"
    return {
        "name": s.name,
        "workspace": s.workspace_file if s.workspace_file is not None else s.workspace,
        "model": model,
        "start": list(s.start),
        "planner": asdict(s.planner),
        "control": asdict(s.control),
    }


def save_scenario(s: Scenario, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(scenario_to_dict(s), f, indent=2)
        f.write("\n")


# ── Bouwers ──

def build_workspace(s: Scenario) -> Workspace:
    try:
        return workspace_from_config(s.workspace, name=s.name)
    except (KeyError, TypeError, ValueError) as e:
        raise ScenarioError(f"werkruimte ongeldig: {e}") from e


def build_model(s: Scenario) -> SdeModel:
    """Model uit de config; een expliciete lambda wordt overgenomen (alleen voor validatie)."""
    cfg = s.model
    defaults = _SYSTEM_DEFAULTS[cfg.system]
    dt = cfg.dt if cfg.dt is not None else defaults["dt"]
    R = cfg.R if cfg.R is not None else defaults["R"]
    phi_fail = cfg.phi_fail if cfg.phi_fail is not None else defaults["phi_fail"]
    if cfg.system == INTEGRATOR:
        model = single_integrator_model(cfg.b, q=cfg.q, r=R, dt=dt, phi_fail=phi_fail)
    else:
        model = dubins_model(cfg.V, cfg.rho, cfg.b, q=cfg.q, R=R, dt=dt, phi_fail=phi_fail)
    if cfg.lam is not None:
        model = model.with_lambda(cfg.lam)
    return model


def build_planner(s: Scenario, model: SdeModel | None = None,
                  workspace: Workspace | None = None) -> PlannerGraph:
    p = s.planner
    return PlannerGraph(
        model or build_model(s), workspace or build_workspace(s), ClassFilter(p.h_limit),
        gamma=p.gamma, max_radius=p.max_radius if p.max_radius is not None else math.inf,
        goal_bias=p.goal_bias, heading_weight=p.heading_weight, tol=p.tol,
    )


def control_config(s: Scenario, workers: int = 1) -> RecedingHorizonConfig:
    c = s.control
    return RecedingHorizonConfig(
        n_samples=c.n_samples, max_steps=c.max_steps, max_wall_steps=c.max_wall_steps,
        center_increments=c.center_increments, workers=workers,
    )
