"""Command-line front end.

Every subcommand reads one JSON run configuration, validates it against
``CONFIG_SCHEMA`` before any computation, writes the fully resolved config
next to its outputs and exits with 0 (ok), 2 (input error) or 3 (flagged
non-convergence; results are still written).

    advest estimate --config run.json --seed 3 --out results/
"""
from __future__ import annotations

import argparse
import copy
import csv
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import fields
from pathlib import Path

import jsonschema
import numpy as np

from .adversarial import EstimationConfig, StructuralSimulator, estimate
from .calibration import InitialDistribution, SyntheticCalibration, synthetic_processes
from .dp import ExogenousProcesses, PolicySolution, make_grid, solution_hash, solve_policy
from .inference import (
    BINARY_X2_COLUMNS,
    Economy,
    bootstrap,
    build_problem,
    counterfactual,
    dimension_probe,
    fit_profiles,
    monte_carlo,
    synthetic_real_panel,
)
from .nn import TrainConfig
from .params import DomainError, FiscalParams, PreferenceParams, UnsupportedParameterError
from .sim import MalformedPanelError, Panel, build_features, draw_initials, draw_shocks, simulate_panel

log = logging.getLogger("advest")

EXIT_OK, EXIT_INPUT, EXIT_NOT_CONVERGED = 0, 2, 3
COMMANDS = ("solve", "simulate", "estimate", "bootstrap", "montecarlo", "counterfactual", "probe", "plot")
PLOT_KINDS = {"loss_trace": "estimate", "param_trace": "estimate", "fit_profiles": "fit_profiles",
              "autoencoder_curve": "probe"}


class InputError(Exception):
    """Bad configuration or missing input; maps to exit code 2."""


def _obj(props, required=()):
    return {"type": "object", "properties": props, "required": list(required), "additionalProperties": False}


_NUM = {"type": "number"}
_INT = {"type": "integer"}
_POS_INT = {"type": "integer", "minimum": 1}
_TRIPLE = {"type": "array", "items": _NUM, "minItems": 3, "maxItems": 3}
_HIDDEN = {"type": "array", "items": _POS_INT, "maxItems": 2}

CONFIG_SCHEMA = _obj({
    "seed": _INT,
    "params": _obj({"nu": _NUM, "mpc": _NUM, "k_curv": _NUM, "beta": _NUM, "r": _NUM}),
    "fiscal": _obj({
        "tau": {"type": "array", "items": {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2}},
        "tilde_tau": _NUM, "tilde_x": _NUM, "c_floor": _NUM,
        "tax_base": {"enum": ["total", "interest"]},
    }),
    "processes": _obj({
        "source": {"enum": ["synthetic", "file"]},
        "path": {"type": ["string", "null"]},
        "synthetic": _obj({f.name: _INT if f.type in ("int", int) else _NUM
                           for f in fields(SyntheticCalibration)}),
    }),
    "grid": _obj({"n_cash": {"type": "integer", "minimum": 2}, "cash_max": _NUM, "n_zeta": _POS_INT,
                  "n_quad": _POS_INT, "spacing_shift": _NUM, "med_cap": _NUM}),
    "simulation": _obj({
        "m": _POS_INT, "n": _POS_INT,
        "initials": {"enum": ["synthetic", "real"]},
        "initial_distribution": _obj({f.name: _INT if f.type in ("int", int) else _NUM
                                      for f in fields(InitialDistribution)}),
    }),
    "discriminator": _obj({
        "spec": {"enum": ["X1", "X2"]}, "hidden": _HIDDEN,
        "training": _obj({
            "optimizer": {"enum": ["adam", "adam_full", "lbfgs"]}, "batch_size": _POS_INT,
            "epochs": _POS_INT, "learning_rate": _NUM, "beta1": _NUM, "beta2": _NUM, "eps": _NUM,
            "standardize": {"type": "boolean"}, "dropout": _NUM, "max_iter": _POS_INT,
            "gtol": _NUM, "restarts": _POS_INT, "seed": _INT,
        }),
    }),
    "estimation": _obj({
        "lower": _TRIPLE, "upper": _TRIPLE, "steps": _TRIPLE,
        "accelerator": {"enum": ["rprop", "nag", "plain"]},
        "learning_rate": _NUM, "momentum": _NUM, "rprop_init": _NUM, "rprop_min": _NUM,
        "rprop_max": _NUM, "rprop_up": _NUM, "rprop_down": _NUM,
        "tol": _NUM, "max_iter": _POS_INT, "restarts": _INT, "stall_window": _INT, "stall_xtol": _NUM,
        "init_mean": {"oneOf": [_TRIPLE, {"type": "null"}]},
        "init_sd": {"oneOf": [_TRIPLE, {"type": "null"}]},
    }),
    "inference": _obj({
        "S": _INT, "R": _INT,
        "cells": {"type": "array", "items": {"type": "array", "prefixItems": [
            {"enum": ["X1", "X2"]}, _HIDDEN], "minItems": 2, "maxItems": 2}},
        "mode": {"enum": ["none", "no_bequest", "no_medical_risk"]},
        "dims": {"type": "array", "items": _POS_INT, "minItems": 1},
    }),
    "io": _obj({
        "real_panel": {"type": ["string", "null"]},
        "cache_dir": {"type": ["string", "null"]},
        "result": {"type": ["string", "null"]},
        "kind": {"enum": list(PLOT_KINDS)},
    }),
})

DEFAULTS = {
    "seed": 0,
    "params": {"nu": 3.8, "mpc": 0.25, "k_curv": 10_000.0, "beta": 0.971, "r": 0.02},
    "fiscal": {"tau": [[0.0, 0.0]], "tilde_tau": 0.0, "tilde_x": 0.0, "c_floor": 4_500.0, "tax_base": "total"},
    "processes": {"source": "synthetic", "path": None, "synthetic": {}},
    "grid": {"n_cash": 200, "cash_max": 2_000_000.0, "n_zeta": 5, "n_quad": 5, "spacing_shift": 1_000.0,
             "med_cap": 2_000_000.0},
    "simulation": {"m": 2_000, "n": 2_000, "initials": "real", "initial_distribution": {}},
    "discriminator": {"spec": "X1", "hidden": [5], "training": {"optimizer": "lbfgs"}},
    "estimation": {"init_mean": None, "init_sd": None},
    "inference": {"S": 50, "R": 10, "cells": [["X1", [5]]], "mode": "no_bequest",
                  "dims": list(range(1, 13))},
    "io": {"real_panel": None, "cache_dir": None, "result": None, "kind": "loss_trace"},
}


# ---------------------------------------------------------------------------
# configuration

def _merge(base, over):
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k not in ("synthetic", "initial_distribution"):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def validate_config(doc) -> None:
    """Raise ``InputError`` naming the offending path on a schema violation."""
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        where = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise InputError(f"config error at {where}: {e.message}")


def load_config(path, seed=None) -> dict:
    """Read, validate and resolve a run configuration against ``DEFAULTS``."""
    doc = {}
    if path is not None:
        try:
            doc = json.loads(Path(path).read_text())
        except FileNotFoundError:
            raise InputError(f"config file {path} not found") from None
        except json.JSONDecodeError as exc:
            raise InputError(f"config file {path} is not valid JSON: {exc}") from None
    validate_config(doc)
    cfg = _merge(DEFAULTS, doc)
    if seed is not None:
        cfg["seed"] = int(seed)
    validate_config(cfg)
    return cfg


def _preferences(cfg) -> PreferenceParams:
    p = cfg["params"]
    try:
        return PreferenceParams(p["nu"], p["mpc"], p["k_curv"], p["beta"], p["r"])
    except UnsupportedParameterError as exc:
        raise InputError(f"params: {exc}") from None
    except DomainError as exc:
        raise InputError(f"params: {exc}") from None


def _economy(cfg) -> Economy:
    pc = cfg["processes"]
    if pc["source"] == "file":
        if not pc["path"]:
            raise InputError("processes/path is required when processes/source is 'file'")
        try:
            procs = ExogenousProcesses.load(pc["path"])
        except FileNotFoundError:
            raise InputError(f"process file {pc['path']} not found") from None
    else:
        procs = synthetic_processes(**pc["synthetic"])
    f = cfg["fiscal"]
    fiscal = FiscalParams(tuple(map(tuple, f["tau"])), f["tilde_tau"], f["tilde_x"], f["c_floor"], f["tax_base"])
    grid = make_grid(procs, fiscal, **cfg["grid"])
    return Economy(procs, fiscal, grid, InitialDistribution(**cfg["simulation"]["initial_distribution"]))


def _train(cfg) -> TrainConfig:
    return TrainConfig(**cfg["discriminator"]["training"])


def _estimation(cfg, truth: PreferenceParams) -> EstimationConfig:
    est = {k: (tuple(v) if isinstance(v, list) else v) for k, v in cfg["estimation"].items()}
    if est.get("init_mean") is None:
        est["init_mean"] = truth.theta
        est["init_sd"] = est.get("init_sd") or (1.0, float(np.sqrt(0.025)), 2_000.0)
    est["seed"] = cfg["seed"]
    return EstimationConfig.structural(spec=cfg["discriminator"]["spec"],
                                       hidden=tuple(cfg["discriminator"]["hidden"]), train=_train(cfg), **est)


def _threads(args) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    env = os.environ.get("ADVEST_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise InputError(f"ADVEST_THREADS={env!r} is not an integer") from None
    return 1


def _executor(threads):
    return ProcessPoolExecutor(max_workers=threads) if threads > 1 else None


# ---------------------------------------------------------------------------
# outputs

def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n")


def _write_rows(path: Path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)


def _policy(cfg, truth, economy, out: Path) -> tuple[PolicySolution, Path]:
    """Solve or reuse a cached solution keyed by the parameter hash."""
    cache = Path(cfg["io"]["cache_dir"]) if cfg["io"]["cache_dir"] else out / "cache"
    cache.mkdir(parents=True, exist_ok=True)
    key = solution_hash(truth, economy.fiscal, economy.procs, economy.grid)
    path = cache / f"policy-{key[:20]}.npz"
    if path.exists():
        sol = PolicySolution.load(path, economy.grid)
        if sol.params_hash == key:
            log.info("policy %s found in cache, solve skipped", key[:12])
            return sol, path
    sol = solve_policy(truth, economy.fiscal, economy.procs, economy.grid)
    sol.save(path)
    return sol, path


def _real_panel(cfg, truth, economy) -> Panel:
    path = cfg["io"]["real_panel"]
    if path:
        try:
            return Panel.from_csv(path, real=True)
        except FileNotFoundError:
            raise InputError(f"real panel {path} not found") from None
        except MalformedPanelError as exc:
            raise InputError(f"real panel {path}: {exc}") from None
    log.info("no real panel configured; generating a synthetic one at params (Monte Carlo mode)")
    return synthetic_real_panel(truth, economy, cfg["simulation"]["n"], cfg["seed"])


def _problem(cfg, truth, economy, real_panel):
    d = cfg["discriminator"]
    return build_problem(real_panel, economy, cfg["simulation"]["m"], d["spec"], tuple(d["hidden"]),
                         _train(cfg), cfg["seed"], truth.beta, truth.r)


def _estimate_doc(res) -> dict:
    d = res.to_dict()
    d.pop("wall_time")
    d["kind"] = "estimate"
    return d


# ---------------------------------------------------------------------------
# subcommands

def cmd_solve(cfg, out, threads):
    truth = _preferences(cfg)
    economy = _economy(cfg)
    sol, path = _policy(cfg, truth, economy, out)
    g = economy.grid
    print(f"grid: {len(g.cash_grid)} cash nodes [{g.cash_grid[0]:.0f}, {g.cash_grid[-1]:.0f}], "
          f"{len(g.zeta_nodes)} zeta nodes, {len(g.pi_nodes)} PI nodes, ages {g.t_min}-{g.t_max}")
    _write_json(out / "solve.json", {"kind": "solve", "params_hash": sol.params_hash, "cache": str(path),
                                     "grid": g.settings(), "params": truth.to_dict()})
    return EXIT_OK


def cmd_simulate(cfg, out, threads):
    truth = _preferences(cfg)
    economy = _economy(cfg)
    sol, _ = _policy(cfg, truth, economy, out)
    ss = np.random.SeedSequence(cfg["seed"]).spawn(3)
    m = cfg["simulation"]["m"]
    real = None
    if cfg["simulation"]["initials"] == "real" and cfg["io"]["real_panel"]:
        real = _real_panel(cfg, truth, economy)
        initials = real.initials().resample(m, int(ss[0].generate_state(1)[0]))
    else:
        initials = draw_initials(m, int(ss[0].generate_state(1)[0]), economy.initial_dist)
    shocks = draw_shocks(m, int(ss[1].generate_state(1)[0]), economy.procs.t_min, economy.procs.t_max)
    panel = simulate_panel(sol, economy.procs, economy.fiscal, shocks, initials, truth.r)
    panel.to_csv(out / "panel.csv")
    features = build_features(panel, cfg["discriminator"]["spec"])
    np.savetxt(out / "features.csv", features, delimiter=",", fmt="%.10g")
    if real is None:
        real = synthetic_real_panel(truth, economy, cfg["simulation"]["n"], int(ss[2].generate_state(1)[0]))
    _write_json(out / "fit_profiles.json", {"kind": "fit_profiles", "rows": fit_profiles(real, panel)})
    return EXIT_OK


def cmd_estimate(cfg, out, threads):
    truth = _preferences(cfg)
    economy = _economy(cfg)
    problem = _problem(cfg, truth, economy, _real_panel(cfg, truth, economy))
    ex = _executor(threads)
    try:
        res = estimate(problem, _estimation(cfg, truth), ex)
    finally:
        if ex:
            ex.shutdown()
    log.info("estimate took %.1f s", res.wall_time)
    _write_json(out / "estimate.json", _estimate_doc(res))
    res.traces_to_csv(out / "trace.csv")
    return EXIT_OK if res.converged else EXIT_NOT_CONVERGED


def cmd_bootstrap(cfg, out, threads):
    truth = _preferences(cfg)
    economy = _economy(cfg)
    problem = _problem(cfg, truth, economy, _real_panel(cfg, truth, economy))
    S = cfg["inference"]["S"]
    if S < 2:
        raise InputError("inference/S must be at least 2")
    ex = _executor(threads)
    try:
        res = bootstrap(problem, _estimation(cfg, truth), S, cfg["seed"], ex)
    finally:
        if ex:
            ex.shutdown()
    doc = {"kind": "bootstrap", "names": list(res.names), "estimates": res.estimates.tolist(),
           "converged": res.converged.tolist(), "excluded": res.excluded}
    if len(res.kept) >= 2:
        doc["summary"] = res.summary()
        _write_rows(out / "bootstrap.csv", res.summary())
    _write_json(out / "bootstrap.json", doc)
    return EXIT_OK if res.excluded == 0 else EXIT_NOT_CONVERGED


def cmd_montecarlo(cfg, out, threads):
    truth = _preferences(cfg)
    economy = _economy(cfg)
    inf = cfg["inference"]
    if inf["R"] < 1:
        raise InputError("inference/R must be at least 1")
    cells = [(spec, tuple(h)) for spec, h in inf["cells"]]
    ex = _executor(threads)
    try:
        res = monte_carlo(truth, inf["R"], cfg["simulation"]["n"], economy, cells, _estimation(cfg, truth),
                          cfg["seed"], cfg["simulation"]["m"], ex)
    finally:
        if ex:
            ex.shutdown()
    res.to_csv(out / "montecarlo.csv")
    (out / "montecarlo.json").write_text(res.to_json() + "\n")
    ok = all(all(v) for v in res.converged.values())
    return EXIT_OK if ok else EXIT_NOT_CONVERGED


def cmd_counterfactual(cfg, out, threads):
    truth = _preferences(cfg)
    economy = _economy(cfg)
    ss = np.random.SeedSequence(cfg["seed"]).spawn(2)
    m = cfg["simulation"]["m"]
    initials = draw_initials(m, int(ss[0].generate_state(1)[0]), economy.initial_dist)
    shocks = draw_shocks(m, int(ss[1].generate_state(1)[0]), economy.procs.t_min, economy.procs.t_max)
    sim = StructuralSimulator(economy.procs, economy.fiscal, economy.grid, shocks, initials,
                              beta=truth.beta, r=truth.r)
    table = counterfactual(truth.theta, cfg["inference"]["mode"], sim)
    table.to_csv(out / "counterfactual.csv")
    _write_json(out / "counterfactual.json", {"kind": "counterfactual", "mode": table.mode, "rows": table.rows()})
    return EXIT_OK


def cmd_probe(cfg, out, threads):
    truth = _preferences(cfg)
    economy = _economy(cfg)
    panel = _real_panel(cfg, truth, economy)
    X = build_features(panel, "X2")[:, list(BINARY_X2_COLUMNS)]
    dims = cfg["inference"]["dims"]
    if max(dims) > X.shape[1]:
        raise InputError(f"inference/dims must lie in [1, {X.shape[1]}]")
    curve = dimension_probe(X, dims, _train(cfg))
    _write_json(out / "probe.json", {"kind": "probe", "curve": curve})
    _write_rows(out / "probe.csv", [{"d": c["d"], "mse": c["mse"], "mean_correlation": c["mean_correlation"]}
                                    for c in curve])
    return EXIT_OK


# ---------------------------------------------------------------------------
# plotting

_W, _H, _PAD = 640, 400, 50
_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _fmt(v) -> str:
    return f"{v:.2f}"


def svg_chart(series, title, xlabel, ylabel, points_only=False) -> str:
    """A standalone SVG line chart.

    ``series`` is a list of ``(label, xs, ys, colors)``; ``colors`` is one
    color for the whole series or one per point.
    """
    xs = np.concatenate([np.asarray(s[1], float) for s in series])
    ys = np.concatenate([np.asarray(s[2], float) for s in series])
    ok = np.isfinite(xs) & np.isfinite(ys)
    x0, x1 = (xs[ok].min(), xs[ok].max()) if ok.any() else (0.0, 1.0)
    y0, y1 = (ys[ok].min(), ys[ok].max()) if ok.any() else (0.0, 1.0)
    x1, y1 = (x1 if x1 > x0 else x0 + 1.0), (y1 if y1 > y0 else y0 + 1.0)

    def px(x):
        return _PAD + (x - x0) / (x1 - x0) * (_W - 2 * _PAD)

    def py(y):
        return _H - _PAD - (y - y0) / (y1 - y0) * (_H - 2 * _PAD)

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" viewBox="0 0 {_W} {_H}">',
             '<rect width="100%" height="100%" fill="white"/>',
             f'<text x="{_W / 2}" y="20" text-anchor="middle" font-size="14">{title}</text>',
             f'<line x1="{_PAD}" y1="{_H - _PAD}" x2="{_W - _PAD}" y2="{_H - _PAD}" stroke="black"/>',
             f'<line x1="{_PAD}" y1="{_PAD}" x2="{_PAD}" y2="{_H - _PAD}" stroke="black"/>',
             f'<text x="{_W / 2}" y="{_H - 12}" text-anchor="middle" font-size="12">{xlabel}</text>',
             f'<text x="14" y="{_H / 2}" text-anchor="middle" font-size="12" '
             f'transform="rotate(-90 14 {_H / 2})">{ylabel}</text>',
             f'<text x="{_PAD}" y="{_H - _PAD + 14}" font-size="10">{x0:.4g}</text>',
             f'<text x="{_W - _PAD}" y="{_H - _PAD + 14}" font-size="10" text-anchor="end">{x1:.4g}</text>',
             f'<text x="{_PAD - 4}" y="{_H - _PAD}" font-size="10" text-anchor="end">{y0:.4g}</text>',
             f'<text x="{_PAD - 4}" y="{_PAD + 4}" font-size="10" text-anchor="end">{y1:.4g}</text>']
    for label, sx, sy, colors in series:
        pts = [(px(x), py(y)) for x, y in zip(sx, sy) if np.isfinite(x) and np.isfinite(y)]
        per_point = not isinstance(colors, str)
        parts.append(f'<g class="series" data-label="{label}">')
        if not points_only and len(pts) > 1:
            stroke = colors if not per_point else "#999999"
            parts.append('<polyline fill="none" stroke="{}" points="{}"/>'.format(
                stroke, " ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in pts)))
        if points_only or per_point:
            kept = [c for c, x, y in zip(colors if per_point else [colors] * len(sx), sx, sy)
                    if np.isfinite(x) and np.isfinite(y)]
            for (a, b), c in zip(pts, kept):
                parts.append(f'<circle cx="{_fmt(a)}" cy="{_fmt(b)}" r="3" fill="{c}"/>')
        parts.append("</g>")
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _light_to_dark(n):
    """Gray levels from light (first iteration) to dark (last)."""
    levels = np.linspace(220, 20, n) if n > 1 else np.array([20.0])
    return [f"#{int(v):02x}{int(v):02x}{int(v):02x}" for v in levels]


def plot_series(doc, kind):
    """Series and CSV rows for a result document of the matching kind."""
    if doc.get("kind") != PLOT_KINDS[kind]:
        raise InputError(f"plot kind {kind!r} needs a {PLOT_KINDS[kind]!r} result, got {doc.get('kind')!r}")
    if kind in ("loss_trace", "param_trace"):
        trace = doc["traces"][doc["restart"]] if doc.get("traces") else []
        if not trace:
            raise InputError("the result holds an empty trace")
        it = list(range(len(trace)))
        names = list(doc["theta"])
        rows = [{"iteration": i, **dict(zip(names, r["theta"])), "loss": r["loss"]} for i, r in zip(it, trace)]
        if kind == "loss_trace":
            series = [("loss", it, [r["loss"] for r in trace], _PALETTE[0])]
            return series, rows, ("loss by iteration", "iteration", "loss"), False
        colors = _light_to_dark(len(trace))
        series = [(f"{names[0]} vs {names[1]}", [r["theta"][0] for r in trace], [r["theta"][1] for r in trace],
                   colors)]
        return series, rows, ("parameter path (light to dark by iteration)", names[0], names[1]), True
    if kind == "fit_profiles":
        rows = doc["rows"]
        if not rows:
            raise InputError("the result holds no fit profiles")
        groups = {}
        for r in rows:
            key = (r["cohort"], r["pi_quintile"], r.get("gender"))
            groups.setdefault(key, []).append(r)
        series = []
        for k, (key, grp) in enumerate(sorted(groups.items(), key=lambda kv: tuple(-1 if v is None else v
                                                                                 for v in kv[0]))):
            tag = f"cohort {key[0]} PIq {key[1]}" + ("" if key[2] is None else f" g {key[2]}")
            waves = [r["wave"] for r in grp]
            color = _PALETTE[k % len(_PALETTE)]
            series.append((f"{tag} real", waves, [r["real_mean"] for r in grp], color))
            series.append((f"{tag} simulated", waves, [r["sim_mean"] for r in grp], color))
        return series, rows, ("mean assets of the living", "wave", "assets"), False
    curve = doc["curve"]
    if not curve:
        raise InputError("the result holds an empty curve")
    d = [c["d"] for c in curve]
    rows = [{"d": c["d"], "mse": c["mse"], "mean_correlation": c["mean_correlation"]} for c in curve]
    series = [("mse", d, [c["mse"] for c in curve], _PALETTE[0]),
              ("mean correlation", d, [c["mean_correlation"] for c in curve], _PALETTE[1])]
    return series, rows, ("autoencoder reconstruction", "bottleneck d", "value"), False


def cmd_plot(cfg, out, threads):
    path = cfg["io"]["result"]
    if not path:
        raise InputError("io/result must name a result file to plot")
    try:
        doc = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise InputError(f"result file {path} not found") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"result file {path} is not valid JSON: {exc}") from None
    kind = cfg["io"]["kind"]
    series, rows, labels, points_only = plot_series(doc, kind)
    (out / f"{kind}.svg").write_text(svg_chart(series, *labels, points_only=points_only))
    _write_rows(out / f"{kind}.csv", rows)
    return EXIT_OK


HANDLERS = {"solve": cmd_solve, "simulate": cmd_simulate, "estimate": cmd_estimate, "bootstrap": cmd_bootstrap,
            "montecarlo": cmd_montecarlo, "counterfactual": cmd_counterfactual, "probe": cmd_probe,
            "plot": cmd_plot}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="advest", description="Adversarial estimation of a retiree savings model")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", type=Path, default=None, help="JSON run configuration")
    parser.add_argument("--seed", type=int, default=None, help="overrides the config seed")
    parser.add_argument("--threads", type=int, default=None, help="worker cap (default: ADVEST_THREADS or 1)")
    parser.add_argument("--out", type=Path, default=Path("."), help="output directory")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, args.seed)
        threads = _threads(args)
        args.out.mkdir(parents=True, exist_ok=True)
        _write_json(args.out / f"{args.command}.config.json", cfg)
        return HANDLERS[args.command](cfg, args.out, threads)
    except InputError as exc:
        print(f"advest: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (DomainError, UnsupportedParameterError) as exc:
        print(f"advest: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
