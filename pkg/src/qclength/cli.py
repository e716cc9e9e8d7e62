"""Command-line driver: ``qclength run|validate|presets|dump``.

Configuration layers, lowest to highest priority: built-in defaults, the
preset or YAML file, ``QCLENGTH_*`` environment variables, command-line
flags.  Exit codes: 0 success, 2 invalid configuration, 3 solver failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import platform
import shutil
import sys
import tempfile
import time
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from . import config as cfgmod
from .config import ConfigError
from .fitting import FitError, fit_decay, fit_scaling
from .mps import DmrgError
from .qcorr import monogamy_witness
from .quench import QuenchFailure, QuenchSeries, _json_default, ordered_series, run_quench_measures

log = logging.getLogger("qclength")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3

ENV_PREFIX = "QCLENGTH_"
_ENV_KEYS = {"SEED": ("seed", int), "REALIZATIONS": ("realizations", int), "WORKERS": ("workers", int), "OUT": ("out", str)}


def load_config(path: str | None, preset: str | None) -> dict:
    if path and preset:
        raise ConfigError(["--config and --preset are mutually exclusive"])
    if preset:
        return cfgmod.preset(preset)
    if not path:
        raise ConfigError(["one of --config or --preset is required"])
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError([f"config: cannot read {path}: {exc.strerror}"]) from None
    try:
        return cfgmod.loads(text)
    except yaml.YAMLError as exc:
        raise ConfigError([f"config: YAML syntax error: {exc}"]) from None


def apply_overrides(config: dict, args: argparse.Namespace, environ=None) -> dict:
    environ = os.environ if environ is None else environ
    config = dict(config)
    diags = []
    for suffix, (key, conv) in _ENV_KEYS.items():
        raw = environ.get(ENV_PREFIX + suffix)
        if raw is None:
            continue
        try:
            val = conv(raw)
        except ValueError:
            diags.append(f"{ENV_PREFIX}{suffix}: cannot parse {raw!r} as {conv.__name__}")
            continue
        _set(config, key, val)
    if diags:
        raise ConfigError(diags)
    for key in ("seed", "realizations", "workers", "out"):
        val = getattr(args, key, None)
        if val is not None:
            _set(config, key, val)
    return config


def _set(config: dict, key: str, val) -> None:
    if key == "out":
        config["output"] = {**config.get("output", {}), "dir": val}
    else:
        config[key] = val


def resolve(config: dict) -> dict:
    diags = cfgmod.validate(config)
    if diags:
        raise ConfigError(diags)
    return cfgmod.merged(config)


def _fit_model(measure: str) -> str:
    return "pure_exponential" if measure == "concurrence" else "offset_exponential"


def _fit(series: QuenchSeries, cfg: dict) -> dict:
    f = cfg["fit"]
    fr = tuple(f["fit_range"]) if f["fit_range"] else None
    try:
        res = fit_decay(
            series.distances,
            series.mean,
            _fit_model(series.measure),
            fit_range=fr,
            weights=f["weights"],
            std_error=series.std_error,
            zero_threshold=f["zero_threshold"],
        )
    except FitError as exc:
        return {"model": _fit_model(series.measure), "xi": None, "error": str(exc)}
    return res.to_dict()


def _write_series(out: Path, stem: str, s: QuenchSeries) -> None:
    with open(out / f"series_{stem}.csv", "w", newline="") as fh:
        s.write_csv(fh)
    with open(out / f"plot_{stem}.dat", "w") as fh:
        fh.write(f"# r {s.measure}\n")
        for r, m in zip(s.distances, s.mean):
            fh.write(f"{int(r)} {float(m)!r}\n")


def execute(cfg: dict, out: Path) -> dict:
    """Run every panel of a resolved config, writing artifacts into ``out``."""
    workers = cfg["workers"] or os.cpu_count() or 1
    t0 = time.time()
    fits, panels_meta, scaling_points = [], [], []
    monogamy = []
    for panel in cfg["panels"]:
        label = cfgmod.panel_label(cfg, panel)
        plan = cfgmod.panel_plan(cfg, panel)
        log.info("panel %s: %d realizations, N=%d, solver=%s", label, plan.n_realizations, plan.spec.n_sites, plan.solver)
        tp = time.time()
        quenched = run_quench_measures(plan, cfg["measures"], workers=workers)
        curves = {("quenched", m): s for m, s in quenched.items()}
        j, h = cfgmod.ordered_couplings(cfg, panel)
        if cfg["ordered_reference"]:
            ordered = ordered_series(
                plan.spec,
                j,
                h,
                list(cfg["measures"]),
                plan.pairs(),
                plan.solver,
                margin=plan.margin,
                dmrg_cfg=plan.dmrg,
                discord_method=plan.discord_method,
                measured_party=plan.measured_party,
            )
            curves.update({("ordered", m): s for m, s in ordered.items()})
        for (kind, m), s in sorted(curves.items()):
            stem = f"{label}_{m}_{kind}"
            _write_series(out, stem, s)
            if not cfg["fit"]["enabled"]:
                continue
            rec = {"panel": label, "measure": m, "kind": kind, "fit": _fit(s, cfg)}
            fits.append(rec)
            if kind == "quenched" and m == "discord":
                scaling_points.append((plan.spec.n_sites, rec["fit"].get("xi")))
        if cfg["monogamy"] and "discord" in cfg["measures"]:
            monogamy.append(_monogamy(cfg, plan, j, h, quenched.get("discord"), label))
        panels_meta.append(
            {
                "label": label,
                "panel": panel,
                "ordered_j": j,
                "ordered_h": h,
                "n_realizations_used": next(iter(quenched.values())).n_realizations,
                "skipped_indices": next(iter(quenched.values())).metadata["skipped_indices"],
                "wall_time_s": time.time() - tp,
            }
        )

    with open(out / "fits.json", "w") as fh:
        json.dump(fits, fh, indent=2, default=_json_default)
    _write_lengths(out, fits)
    scaling = None
    if cfg["scaling"] is not None:
        scaling = _scaling(cfg["scaling"].get("transform", "xi"), scaling_points)
        with open(out / "scaling.json", "w") as fh:
            json.dump(scaling, fh, indent=2, default=_json_default)
    if monogamy:
        with open(out / "monogamy.json", "w") as fh:
            json.dump(monogamy, fh, indent=2, default=_json_default)
    meta = {
        "config": cfg,
        "seed": cfg["seed"],
        "workers": workers,
        "version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "panels": panels_meta,
        "wall_time_s": time.time() - t0,
    }
    with open(out / "metadata.json", "w") as fh:
        json.dump(meta, fh, indent=2, default=_json_default)
    return {"fits": fits, "scaling": scaling, "monogamy": monogamy}


def _write_lengths(out: Path, fits: list[dict]) -> None:
    with open(out / "lengths.csv", "w") as fh:
        fh.write("panel,measure,kind,model,xi,a,b,c0\n")
        for rec in fits:
            f = rec["fit"]
            vals = [f.get(k) for k in ("xi", "a", "b", "c0")]
            cells = ["" if v is None else repr(float(v)) for v in vals]
            fh.write(",".join([rec["panel"], rec["measure"], rec["kind"], f["model"], *cells]) + "\n")


def _scaling(transform: str, points: list[tuple[int, float | None]]) -> dict:
    pts = sorted((n, xi) for n, xi in points if xi is not None)
    ns = np.array([p[0] for p in pts], dtype=float)
    xis = np.array([p[1] for p in pts], dtype=float)
    report = {"transform": transform, "n_sites": ns.tolist(), "xi": xis.tolist()}
    if transform == "xi":
        xs, ys, desc = ns, xis, "log(xi) vs log(N)"
    else:
        # distance of xi(N) from its largest-N value, on the smaller chains
        xs, ys, desc = ns[:-1], np.abs(xis[:-1] - xis[-1]) if xis.size else xis, "log|xi(N) - xi(N_max)| vs log(N)"
    try:
        report.update(fit_scaling(xs, ys, desc).to_dict())
    except ValueError as exc:
        report["error"] = str(exc)
    return report


def _monogamy(cfg, plan, j, h, quenched_discord, label) -> dict:
    spec = plan.spec
    node = cfg["site"]
    others = [k for k in range(spec.n_sites) if k != node]
    pairs = [(min(node, k), max(node, k)) for k in others]
    rep = {"panel": label, "nodal_site": node}
    try:
        od = ordered_series(spec, j, h, "discord", pairs, plan.solver, dmrg_cfg=plan.dmrg, margin=0)
        w = monogamy_witness(np.clip(od.mean, 0.0, 1.0), node)
        rep["ordered"] = {"sum": w.sum, "violated": w.witness_violated}
    except ValueError as exc:
        rep["ordered"] = {"error": str(exc)}
    if quenched_discord is not None and spec.periodic and cfg["pair_scheme"] == "fixed_i_all_j":
        # ring ensemble: the mean at distance r equals the mean at N - r
        n = spec.n_sites
        d = {int(r): float(m) for r, m in zip(quenched_discord.distances, quenched_discord.mean)}
        if all(min(r, n - r) in d for r in range(1, n)):
            vals = np.array([d[min(r, n - r)] for r in range(1, n)])
            w = monogamy_witness(np.clip(vals, 0.0, 1.0), node)
            rep["quenched_mean"] = {"sum": w.sum, "violated": w.witness_violated}
    return rep


def run(config: dict, out_dir: str | Path | None = None) -> Path:
    """Validate ``config``, run it and move the artifacts into place atomically.

    On any failure the output directory is left untouched.
    """
    cfg = resolve(config)
    out = Path(out_dir or cfg["output"]["dir"])
    out.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=f".{out.name}.", dir=out.parent))
    try:
        execute(cfg, tmp)
        with open(tmp / "config.yaml", "w") as fh:
            fh.write(cfgmod.dumps(cfg))
        if out.exists():
            shutil.rmtree(out)
        os.replace(tmp, out)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    return out


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qclength", description="Quenched correlation lengths of disordered spin chains.")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def source(sp):
        sp.add_argument("--config", help="YAML experiment file")
        sp.add_argument("--preset", help="named preset (see 'presets')")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--realizations", type=int)
        sp.add_argument("--workers", type=int)
        sp.add_argument("--out", help="output directory")

    source(sub.add_parser("run", help="run an experiment"))
    source(sub.add_parser("validate", help="check a configuration without running"))
    sub.add_parser("presets", help="list preset names")
    d = sub.add_parser("dump", help="print a preset as YAML")
    d.add_argument("name")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "presets":
            for name in sorted(cfgmod.PRESETS):
                print(name)
            return EXIT_OK
        if args.command == "dump":
            print(cfgmod.dumps(cfgmod.preset(args.name)), end="")
            return EXIT_OK
        config = apply_overrides(load_config(args.config, args.preset), args)
        if args.command == "validate":
            resolve(config)
            print("ok")
            return EXIT_OK
        out = run(config)
        print(f"wrote {out}")
        return EXIT_OK
    except ConfigError as exc:
        for d in exc.diagnostics:
            print(f"config error: {d}", file=sys.stderr)
        return EXIT_CONFIG
    except (QuenchFailure, DmrgError, RuntimeError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
