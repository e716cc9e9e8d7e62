"""Experiment configuration: schema, validation and named presets."""
from __future__ import annotations

import copy
import math
from typing import Any

import yaml

from .model import BOUNDARIES, DISORDER_TARGETS, MODEL_KINDS, ChainSpec, DisorderSpec
from .mps import DmrgConfig
from .quench import MEASURES, PAIR_SCHEMES, SOLVERS, QuenchPlan, solver_problems

SCHEMA_VERSION = 1

# key -> (type check, default); nested sections listed separately
_TOP = {
    "schema_version": int,
    "name": str,
    "model": dict,
    "disorder": dict,
    "panels": list,
    "measures": list,
    "pair_scheme": str,
    "site": int,
    "r_max": (int, type(None)),
    "margin": (int, type(None)),
    "solver": str,
    "realizations": int,
    "seed": int,
    "workers": (int, type(None)),
    "ordered_reference": bool,
    "discord_method": str,
    "measured_party": str,
    "on_failure": str,
    "fit": dict,
    "scaling": (dict, type(None)),
    "monogamy": bool,
    "dmrg": dict,
    "output": dict,
}
_MODEL = {"kind": str, "n_sites": int, "gamma": (int, float), "delta": (int, float), "boundary": str}
_DISORDER = {"target": str, "std_dev": (int, float)}
_PANEL = {
    "mean": (int, float),
    "fixed": (int, float),
    "n_sites": int,
    "delta": (int, float),
    "gamma": (int, float),
    "label": str,
}
_FIT = {
    "enabled": bool,
    "weights": str,
    "fit_range": (list, type(None)),
    "zero_threshold": (int, float),
}
_SCALING = {"transform": str}
_DMRG = {
    "chi_max": int,
    "n_sweeps": int,
    "energy_tol": (int, float),
    "svd_cutoff": (int, float),
    "warmup": str,
}
_OUTPUT = {"dir": str}

SCALING_TRANSFORMS = ("xi", "xi_minus_xi_inf")


class ConfigError(ValueError):
    def __init__(self, diagnostics: list[str]):
        super().__init__("; ".join(diagnostics))
        self.diagnostics = diagnostics


def default_config() -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "name": "custom",
        "model": {"kind": "XY", "n_sites": 50, "gamma": 0.5, "delta": 0.0, "boundary": "periodic"},
        "disorder": {"target": "coupling", "std_dev": 1.0},
        "panels": [{"mean": 0.5, "fixed": 1.0}],
        "measures": ["concurrence", "discord"],
        "pair_scheme": "fixed_i_all_j",
        "site": 0,
        "r_max": None,
        "margin": None,
        "solver": "freefermion",
        "realizations": 10000,
        "seed": 20150401,
        "workers": None,
        "ordered_reference": True,
        "discord_method": "auto",
        "measured_party": "first",
        "on_failure": "abort",
        "fit": {"enabled": True, "weights": "uniform", "fit_range": None, "zero_threshold": 1e-6},
        "scaling": None,
        "monogamy": False,
        "dmrg": {"chi_max": 64, "n_sweeps": 8, "energy_tol": 1e-9, "svd_cutoff": 1e-14, "warmup": "infinite"},
        "output": {"dir": "out"},
    }


def _check_section(d: Any, schema: dict, where: str, diags: list[str]) -> None:
    if not isinstance(d, dict):
        diags.append(f"{where}: expected a mapping, got {type(d).__name__}")
        return
    for key, value in d.items():
        if key not in schema:
            diags.append(f"{where}.{key}: unknown key")
            continue
        types = schema[key]
        if isinstance(value, bool) and types not in (bool,) and bool not in (types if isinstance(types, tuple) else (types,)):
            diags.append(f"{where}.{key}: expected {_type_name(types)}, got bool")
        elif not isinstance(value, types):
            diags.append(f"{where}.{key}: expected {_type_name(types)}, got {type(value).__name__}")


def _type_name(types) -> str:
    if isinstance(types, tuple):
        return " or ".join("null" if t is type(None) else t.__name__ for t in types)
    return types.__name__


def merged(config: dict) -> dict:
    """``config`` layered over the defaults (one level deep for sections)."""
    out = default_config()
    for key, value in config.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            sec = dict(out[key])
            sec.update(value)
            out[key] = sec
        else:
            out[key] = copy.deepcopy(value)
    return out


def validate(config: dict) -> list[str]:
    """Schema and cross-field diagnostics; an empty list means valid."""
    diags: list[str] = []
    if not isinstance(config, dict):
        return ["config: expected a mapping at top level"]
    _check_section(config, _TOP, "config", diags)
    if diags:
        return diags
    if config.get("schema_version", SCHEMA_VERSION) != SCHEMA_VERSION:
        diags.append(f"config.schema_version: unsupported version {config['schema_version']}")
    cfg = merged(config)
    _check_section(cfg["model"], _MODEL, "model", diags)
    _check_section(cfg["disorder"], _DISORDER, "disorder", diags)
    _check_section(cfg["fit"], _FIT, "fit", diags)
    _check_section(cfg["dmrg"], _DMRG, "dmrg", diags)
    _check_section(cfg["output"], _OUTPUT, "output", diags)
    if cfg["scaling"] is not None:
        _check_section(cfg["scaling"], _SCALING, "scaling", diags)
    if not cfg["panels"]:
        diags.append("panels: at least one panel required")
    for k, p in enumerate(cfg["panels"]):
        _check_section(p, _PANEL, f"panels[{k}]", diags)
        if isinstance(p, dict) and "mean" not in p:
            diags.append(f"panels[{k}].mean: required")
    if diags:
        return diags

    m = cfg["model"]
    if m["kind"] not in MODEL_KINDS:
        diags.append(f"model.kind: must be one of {MODEL_KINDS}")
    if m["boundary"] not in BOUNDARIES:
        diags.append(f"model.boundary: must be one of {BOUNDARIES}")
    if cfg["disorder"]["target"] not in DISORDER_TARGETS:
        diags.append(f"disorder.target: must be one of {DISORDER_TARGETS}")
    if cfg["disorder"]["std_dev"] < 0:
        diags.append("disorder.std_dev: must be >= 0")
    for name in cfg["measures"]:
        if name not in MEASURES:
            diags.append(f"measures: unknown measure {name!r}")
    if not cfg["measures"]:
        diags.append("measures: at least one measure required")
    if cfg["pair_scheme"] not in PAIR_SCHEMES:
        diags.append(f"pair_scheme: must be one of {PAIR_SCHEMES}")
    if cfg["solver"] not in SOLVERS:
        diags.append(f"solver: must be one of {SOLVERS}")
    if cfg["realizations"] < 1:
        diags.append(f"realizations: must be >= 1, got {cfg['realizations']}")
    if not 0 <= cfg["seed"] < 2**64:
        diags.append("seed: must be an unsigned 64-bit integer")
    if cfg["workers"] is not None and cfg["workers"] < 1:
        diags.append("workers: must be >= 1")
    if cfg["discord_method"] not in ("auto", "xstate_closed_form", "numeric_minimization"):
        diags.append("discord_method: must be auto, xstate_closed_form or numeric_minimization")
    if cfg["measured_party"] not in ("first", "second"):
        diags.append("measured_party: must be 'first' or 'second'")
    if cfg["on_failure"] not in ("abort", "skip"):
        diags.append("on_failure: must be 'abort' or 'skip'")
    if cfg["fit"]["weights"] not in ("uniform", "inverse_variance"):
        diags.append("fit.weights: must be 'uniform' or 'inverse_variance'")
    fr = cfg["fit"]["fit_range"]
    if fr is not None and (len(fr) != 2 or not all(isinstance(x, int) for x in fr) or fr[0] > fr[1]):
        diags.append("fit.fit_range: expected [r_min, r_max] integers with r_min <= r_max")
    if cfg["scaling"] is not None and cfg["scaling"].get("transform", "xi") not in SCALING_TRANSFORMS:
        diags.append(f"scaling.transform: must be one of {SCALING_TRANSFORMS}")
    if cfg["dmrg"]["warmup"] not in ("infinite", "random"):
        diags.append("dmrg.warmup: must be 'infinite' or 'random'")
    if cfg["dmrg"]["chi_max"] < 2:
        diags.append("dmrg.chi_max: must be >= 2")
    if cfg["dmrg"]["n_sweeps"] < 1:
        diags.append("dmrg.n_sweeps: must be >= 1")
    if diags:
        return diags

    # cross-field checks on each panel's chain
    for k, p in enumerate(cfg["panels"]):
        try:
            spec = panel_spec(cfg, p)
        except ValueError as exc:
            diags.append(f"panels[{k}]: {exc}")
            continue
        for msg in solver_problems(spec, cfg["solver"]):
            diags.append(f"solver: {msg} (model {spec.model_kind}, boundary {spec.boundary})")
        if cfg["pair_scheme"] == "central_site_distance_r" and spec.boundary != "open":
            diags.append(f"panels[{k}]: central_site_distance_r needs an open chain")
        if cfg["site"] >= spec.n_sites:
            diags.append(f"site: {cfg['site']} outside a chain of {spec.n_sites} sites")
    return sorted(set(diags), key=diags.index)


def panel_spec(cfg: dict, panel: dict) -> ChainSpec:
    m = cfg["model"]
    return ChainSpec(
        n_sites=int(panel.get("n_sites", m["n_sites"])),
        gamma=float(panel.get("gamma", m["gamma"])),
        delta=float(panel.get("delta", m["delta"])),
        boundary=m["boundary"],
        model_kind=m["kind"],
    )


def panel_label(cfg: dict, panel: dict) -> str:
    if "label" in panel:
        return panel["label"]
    spec = panel_spec(cfg, panel)
    parts = [f"mean{_fmt(panel['mean'])}", f"fixed{_fmt(panel.get('fixed', 1.0))}", f"N{spec.n_sites}"]
    if spec.model_kind == "XYZ":
        parts.append(f"delta{_fmt(spec.delta)}")
    return "_".join(parts)


def _fmt(x) -> str:
    return f"{float(x):g}"


def ordered_couplings(cfg: dict, panel: dict) -> tuple[float, float]:
    """``(J, h)`` of the ordered reference chain for ``panel``."""
    mean = float(panel["mean"])
    fixed = float(panel.get("fixed", 1.0))
    if cfg["disorder"]["target"] == "field":
        return fixed, mean
    return mean, fixed


def dmrg_config(cfg: dict) -> DmrgConfig:
    d = cfg["dmrg"]
    return DmrgConfig(
        chi_max=d["chi_max"],
        n_sweeps=d["n_sweeps"],
        energy_tol=float(d["energy_tol"]),
        svd_cutoff=float(d["svd_cutoff"]),
        warmup=d["warmup"],
        strict=cfg["on_failure"] == "abort",
    )


def panel_plan(cfg: dict, panel: dict) -> QuenchPlan:
    spec = panel_spec(cfg, panel)
    dis = DisorderSpec(cfg["disorder"]["target"], float(panel["mean"]), float(cfg["disorder"]["std_dev"]))
    return QuenchPlan(
        spec=spec,
        dis=dis,
        n_realizations=cfg["realizations"],
        master_seed=cfg["seed"],
        measure=cfg["measures"][0],
        pair_scheme=cfg["pair_scheme"],
        solver=cfg["solver"],
        fixed_value=float(panel.get("fixed", 1.0)),
        site=cfg["site"],
        r_max=cfg["r_max"],
        margin=cfg["margin"],
        dmrg=dmrg_config(cfg),
        discord_method=cfg["discord_method"],
        measured_party=cfg["measured_party"],
        on_failure=cfg["on_failure"],
    )


def dumps(config: dict) -> str:
    return yaml.safe_dump(config, sort_keys=False, default_flow_style=False)


def loads(text: str) -> dict:
    data = yaml.safe_load(text)
    if not isinstance(data, dict):
        raise ConfigError(["config: expected a mapping at top level"])
    return data


def _xy_preset(name, target, measures, panels, **extra) -> dict:
    cfg = {
        "schema_version": SCHEMA_VERSION,
        "name": name,
        "model": {"kind": "XY", "n_sites": 50, "gamma": 0.5, "delta": 0.0, "boundary": "periodic"},
        "disorder": {"target": target, "std_dev": 1.0},
        "panels": panels,
        "measures": measures,
        "pair_scheme": "fixed_i_all_j",
        "solver": "freefermion",
        "realizations": 10000,
        "seed": 20150401,
        "ordered_reference": True,
        "output": {"dir": f"out/{name}"},
    }
    cfg.update(extra)
    return cfg


def _xyz_preset(name, measures) -> dict:
    panels = [{"mean": j, "fixed": 1.0, "delta": d} for j in (0.5, 1.5) for d in (0.1, 0.5)]
    return {
        "schema_version": SCHEMA_VERSION,
        "name": name,
        "model": {"kind": "XYZ", "n_sites": 24, "gamma": 0.5, "delta": 0.1, "boundary": "open"},
        "disorder": {"target": "coupling", "std_dev": 1.0},
        "panels": panels,
        "measures": measures,
        "pair_scheme": "central_site_distance_r",
        # pairs reach the chain end; fits with the default N/4 margin come out short
        "margin": 0,
        "solver": "mps",
        "realizations": 8000,
        "seed": 20150401,
        "ordered_reference": True,
        "dmrg": {"chi_max": 64, "n_sweeps": 8, "energy_tol": 1e-9, "svd_cutoff": 1e-14, "warmup": "infinite"},
        "output": {"dir": f"out/{name}"},
    }


_GLASS_PANELS = [{"mean": v, "fixed": 1.0} for v in (0.5, 0.8, 1.1, 1.5)]
# random field: J = 1 and <h> = 1 / (J/<h>)
_FIELD_PANELS = [{"mean": 1.0 / v, "fixed": 1.0, "label": f"J_over_h{v:g}"} for v in (0.5, 0.8, 1.1, 1.5)]

PRESETS: dict[str, dict] = {
    "fig1": _xy_preset("fig1", "coupling", ["concurrence"], _GLASS_PANELS),
    "fig2": _xy_preset("fig2", "coupling", ["discord"], _GLASS_PANELS, monogamy=True),
    "fig3": _xy_preset(
        "fig3",
        "coupling",
        ["discord"],
        [{"mean": 0.5, "fixed": 1.0, "n_sites": n} for n in (10, 20, 30, 40, 50)],
        ordered_reference=False,
        scaling={"transform": "xi_minus_xi_inf"},
    ),
    "fig4": _xy_preset("fig4", "field", ["concurrence"], _FIELD_PANELS),
    "fig5": _xy_preset("fig5", "field", ["discord"], _FIELD_PANELS),
    "fig6": _xyz_preset("fig6", ["concurrence"]),
    "fig7": _xyz_preset("fig7", ["discord"]),
    "table1": _xyz_preset("table1", ["discord"]),
}


def preset(name: str) -> dict:
    if name not in PRESETS:
        raise ConfigError([f"preset: unknown preset {name!r}; choose from {sorted(PRESETS)}"])
    return copy.deepcopy(PRESETS[name])


def factorization_ratio(gamma: float) -> float:
    """Coupling-to-field ratio at which the ordered XY ground state factorizes."""
    return 1.0 / math.sqrt(1.0 - gamma**2)
