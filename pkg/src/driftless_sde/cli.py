"""Command-line entry point: ``driftless-sde <command> [options]``.

Every command can be driven by a JSON config file (``--config``), a packaged
preset (``--preset``) or per-command flags. Precedence, lowest first: command
defaults, config/preset file, environment (``DRIFTLESS_SDE_SEED``,
``DRIFTLESS_SDE_WORKERS``), command-line flags and ``--set key=value``.

Outputs go to ``<output>.json`` (summary plus the resolved config) and, for
tabular commands in csv format, ``<output>.csv``. Files are written to a
temporary name and renamed into place. Nothing time-dependent is written, so
reruns with the same config are byte-identical.

Exit codes: 0 success, 2 invalid input or configuration, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import copy
import json
import math
import os
import sys
import tempfile
from dataclasses import dataclass, field
from importlib import resources
from typing import Any

import numpy as np

from .cantor import holder_lambda, iterate_error_bound, sup01
from .coefficients import DiffusionSpec, default_grid, sup_distance
from .errors import ConfigError, DataError, DomainError, ParameterError, SDEError
from .feller import FellerConfig, classify_boundary
from .fokker_planck import TestFunction, default_test_set, density_estimate, weak_residual
from .simulate import SimConfig, Statistic, coupled_batch, estimate, simulate_at
from .stability import (
    Regime,
    cantor_family,
    run_rate_experiment,
    shift_family,
    steps_for_rule,
    theoretical_bound,
)

COMMANDS = ("classify", "cantor", "simulate", "rates", "density", "residual")
FORMATS = ("csv", "json")
ENV_SEED = "DRIFTLESS_SDE_SEED"
ENV_WORKERS = "DRIFTLESS_SDE_WORKERS"
EXIT_OK, EXIT_INVALID, EXIT_NUMERIC = 0, 2, 3

_SIM_DEFAULTS = {"x0": 1.0, "T": 1.0, "steps": 1000, "paths": 10000, "absorb_at_zero": None}

DEFAULTS: dict[str, dict[str, Any]] = {
    "classify": {
        "coefficient": {"kind": "power_law", "params": {"alpha": 0.5}, "shift": 0.0},
        "c": 0.5,
        "monotone": None,
        "sigma_zero_is_zero": None,
    },
    "cantor": {"lambda": 0.5, "base": "zero", "iterates": list(range(1, 13)), "points": 2**17 + 1},
    "simulate": {
        "coefficient": {"kind": "power_law", "params": {"alpha": 1.0}, "shift": 0.0},
        "perturbed": None,
        "sim": dict(_SIM_DEFAULTS),
    },
    "rates": {
        "family": {"type": "cantor", "lambda": 0.5, "base": "zero", "shift": 0.25},
        "n": list(range(2, 9)),
        "regime": {"regime": "nlg_positive", "H": None, "epsilon": None, "c_H": 1.0, "f_sup": 1.0, "sigma_sup": None},
        "statistic": "MeanSupSquared",
        "sim": dict(_SIM_DEFAULTS, steps="auto"),
    },
    "density": {
        "coefficient": {"kind": "power_law", "params": {"alpha": 1.0}, "shift": 0.0},
        "t": 1.0,
        "grid": None,
        "bandwidth": None,
        "method": "log",
        "sim": dict(_SIM_DEFAULTS, paths=100000),
    },
    "residual": {
        "coefficient": {"kind": "power_law", "params": {"alpha": 1.0}, "shift": 0.0},
        "t": 0.5,
        "dt": 0.01,
        "bumps": None,
        "n_stderr": 5.0,
        "sim": dict(_SIM_DEFAULTS, paths=100000),
    },
}

# keys whose value is free-form JSON (validated by the consumer, not by key set)
_OPAQUE = {"coefficient", "perturbed", "grid", "bumps", "n", "iterates", "family"}


# ---------------------------------------------------------------------- config
@dataclass
class RunConfig:
    command: str
    params: dict = field(default_factory=dict)
    output: str | None = None
    format: str = "csv"
    seed: int = 0
    workers: int = 1

    def to_json(self) -> dict:
        return {
            "command": self.command,
            "params": self.params,
            "output": self.output,
            "format": self.format,
            "seed": self.seed,
            "workers": self.workers,
        }

    @classmethod
    def from_json(cls, obj: dict, source: str = "<config>", text: str | None = None) -> "RunConfig":
        if not isinstance(obj, dict):
            raise ConfigError(f"{source}: top level must be a JSON object")
        unknown = set(obj) - {"command", "params", "output", "format", "seed", "workers"}
        if unknown:
            key = sorted(unknown)[0]
            raise ConfigError(f"{_where(source, text, key)}: unknown field {key!r}")
        if obj.get("command") not in COMMANDS:
            raise ConfigError(f"{_where(source, text, 'command')}: command must be one of {COMMANDS}")
        fmt = obj.get("format", "csv")
        if fmt not in FORMATS:
            raise ConfigError(f"{_where(source, text, 'format')}: format must be csv or json")
        seed = obj.get("seed", 0)
        if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
            raise ConfigError(f"{_where(source, text, 'seed')}: seed must be a non-negative integer")
        workers = obj.get("workers", 1)
        if not isinstance(workers, int) or isinstance(workers, bool) or workers < 1:
            raise ConfigError(f"{_where(source, text, 'workers')}: workers must be an integer >= 1")
        params = obj.get("params", {})
        if not isinstance(params, dict):
            raise ConfigError(f"{_where(source, text, 'params')}: params must be an object")
        output = obj.get("output")
        if output is not None and not isinstance(output, str):
            raise ConfigError(f"{_where(source, text, 'output')}: output must be a string")
        cfg = cls(obj["command"], params, output, fmt, seed, workers)
        cfg.params = resolve_params(cfg.command, params, source, text)
        return cfg


def _where(source: str, text: str | None, key: str) -> str:
    """``source, line N`` for the first occurrence of ``"key"`` in the raw text."""
    if text:
        needle = json.dumps(key)
        for i, line in enumerate(text.splitlines(), 1):
            if needle in line:
                return f"{source}, line {i}"
    return source


def _merge(defaults: dict, given: dict, path: str, source: str, text: str | None) -> dict:
    out = copy.deepcopy(defaults)
    for k, v in given.items():
        if k not in defaults:
            raise ConfigError(f"{_where(source, text, k)}: unknown parameter {path + k!r}")
        if isinstance(defaults[k], dict) and k not in _OPAQUE and v is not None:
            if not isinstance(v, dict):
                raise ConfigError(f"{_where(source, text, k)}: {path + k!r} must be an object")
            out[k] = _merge(defaults[k], v, f"{path}{k}.", source, text)
        else:
            out[k] = copy.deepcopy(v)
    return out


def resolve_params(command: str, params: dict, source: str = "<config>", text: str | None = None) -> dict:
    return _merge(DEFAULTS[command], params, "", source, text)


def load_config(path: str) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    return parse_config_text(text, path)


def parse_config_text(text: str, source: str) -> RunConfig:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}, line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return RunConfig.from_json(obj, source, text)


def preset_names() -> list[str]:
    root = resources.files("driftless_sde") / "presets"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def load_preset(name: str) -> RunConfig:
    res = resources.files("driftless_sde") / "presets" / f"{name}.json"
    if not res.is_file():
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(preset_names())}")
    return parse_config_text(res.read_text(encoding="utf-8"), f"preset:{name}")


# ---------------------------------------------------------------------- output
def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def format_number(v) -> str:
    """Shortest round-trip decimal for floats, plain digits for integers."""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if v is None:
        return ""
    return repr(float(v))


def _atomic_write(path: str, data: str):
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(columns: list[str], rows: list) -> str:
    lines = [",".join(columns)]
    lines += [",".join(format_number(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def write_outputs(cfg: RunConfig, summary: dict, columns: list[str] | None = None, rows: list | None = None) -> list[str]:
    stem = cfg.output or cfg.command
    directory = os.path.dirname(os.path.abspath(stem))
    if not os.path.isdir(directory) or not os.access(directory, os.W_OK):
        raise ConfigError(f"output directory {directory} does not exist or is not writable")
    doc = {"config": cfg.to_json(), "result": summary}
    written = []
    if columns is not None:
        if cfg.format == "csv":
            _atomic_write(stem + ".csv", _csv_text(columns, rows))
            written.append(stem + ".csv")
        else:
            doc["table"] = {"columns": columns, "rows": rows}
    _atomic_write(stem + ".json", json.dumps(_clean(doc), indent=2) + "\n")
    written.append(stem + ".json")
    return written


# ---------------------------------------------------------------------- commands
def _sim_config(sim: dict, cfg: RunConfig, steps: int | None = None) -> SimConfig:
    s = sim["steps"] if steps is None else steps
    return SimConfig(
        x0=float(sim["x0"]), T=float(sim["T"]), steps=int(s), paths=int(sim["paths"]),
        seed=cfg.seed, absorb_at_zero=sim["absorb_at_zero"], workers=cfg.workers,
    )


def _spec(obj, name: str) -> DiffusionSpec:
    if not isinstance(obj, dict):
        raise ConfigError(f"{name} must be a coefficient object with a 'kind'")
    return DiffusionSpec.from_json(obj)


_MONOTONE_ON_HALF_LINE = {"power_law", "girsanov", "tanaka", "skew", "cantor"}


def cmd_classify(cfg: RunConfig):
    p = cfg.params
    sigma = _spec(p["coefficient"], "coefficient")
    monotone = p["monotone"]
    if monotone is None:
        monotone = sigma.kind in _MONOTONE_ON_HALF_LINE or (sigma.kind == "custom" and sigma.fn is None)
    zero = p["sigma_zero_is_zero"]
    if zero is None:
        zero = sigma(0.0) == 0.0
    rep = classify_boundary(sigma, FellerConfig(c=float(p["c"])), bool(monotone), bool(zero))
    p["monotone"], p["sigma_zero_is_zero"] = bool(monotone), bool(zero)
    rows = [[float(x), float(m), float(n)] for x, m, n in rep.diagnostics]
    return rep.to_json(), ["x", "mu", "nu"], rows


def cmd_cantor(cfg: RunConfig):
    p = cfg.params
    lam, base = float(p["lambda"]), p["base"]
    exact = DiffusionSpec.cantor(lam, None, base)
    grid = np.unique(np.concatenate([np.linspace(0.0, 1.0, int(p["points"])),
                                     default_grid(exact, points=2)]))
    s01 = sup01(lam, base)
    rows = []
    ok = True
    for n in p["iterates"]:
        d = sup_distance(exact, DiffusionSpec.cantor(lam, int(n), base), grid)
        lemma = iterate_error_bound(int(n), s01)
        simple = 2.0 ** (2 - int(n))
        ok &= d <= lemma and d <= simple
        rows.append([int(n), d, lemma, simple])
    summary = {"lambda": lam, "base": base, "holder_exponent": holder_lambda(lam).value,
               "sup01": s01, "within_bounds": bool(ok)}
    return summary, ["n", "delta", "lemma_bound", "simple_bound"], rows


def cmd_simulate(cfg: RunConfig):
    p = cfg.params
    sigma = _spec(p["coefficient"], "coefficient")
    sim = _sim_config(p["sim"], cfg)
    if p["perturbed"] is not None:
        sigma_n = _spec(p["perturbed"], "perturbed")
        batch = coupled_batch(sigma, [sigma_n], sim)
        stats = {s.value: estimate(batch.statistic(s)).__dict__ for s in Statistic}
        summary = {"delta": sup_distance(sigma, sigma_n),
                   "estimates": {k: {"mean": v["mean"], "stderr": v["std_error"]} for k, v in stats.items()}}
        rows = [[i, float(batch.sup_error[i, 0]), float(batch.terminal_error[i, 0])] for i in range(sim.paths)]
        return summary, ["path", "sup_error", "terminal_error"], rows
    values, tau = simulate_at(sigma, sim, [sim.steps])
    est = estimate(values[:, 0])
    absorbed = int(np.count_nonzero(~np.isnan(tau)))
    summary = {"mean_X_T": est.mean, "stderr": est.std_error, "x0": sim.x0,
               "z_score": (est.mean - sim.x0) / est.std_error if est.std_error > 0 else 0.0,
               "absorbed_fraction": absorbed / sim.paths}
    rows = [[i, float(values[i, 0])] for i in range(sim.paths)]
    return summary, ["path", "X_T"], rows


def _build_family(fam: dict, ns):
    kind = fam.get("type")
    if kind == "cantor":
        lam = float(fam["lambda"])
        return cantor_family(lam, ns, fam.get("base", "zero"), float(fam.get("shift", 0.0))), lam
    if kind == "shift":
        sigma = _spec(fam.get("coefficient"), "family.coefficient")
        return shift_family(sigma, ns, float(fam.get("ratio", 2.0))), None
    raise ConfigError("family.type must be 'cantor' or 'shift'")


def cmd_rates(cfg: RunConfig):
    p = cfg.params
    ns = [int(n) for n in p["n"]]
    family, lam = _build_family(p["family"], ns)
    reg = dict(p["regime"])
    regime = Regime(reg["regime"])
    sigma = family[0].sigma
    if reg.get("H") is None and lam is not None:
        reg["H"] = holder_lambda(lam).value
    if reg.get("epsilon") is None:
        reg["epsilon"] = sigma.shift if sigma.shift > 0 else None
    if reg.get("sigma_sup") is None:
        reg["sigma_sup"] = sigma.sup_norm_estimate()
    bound = theoretical_bound(
        regime, float(p["sim"]["T"]), H=reg["H"], c_H=float(reg["c_H"]), sigma_sup=float(reg["sigma_sup"]),
        f_sup=float(reg["f_sup"]), epsilon=float(reg["epsilon"] or 0.0),
    )
    steps = p["sim"]["steps"]
    if steps == "auto":
        deltas = [sup_distance(m.sigma, m.sigma_n) for m in family]
        positive = [d for d in deltas if 0 < d < bound.threshold]
        if not positive:
            raise DataError("no usable Delta_n to size the time step")
        steps = steps_for_rule(float(p["sim"]["T"]), min(positive))
    sim = _sim_config(p["sim"], cfg, steps)
    p["regime"] = reg
    p["sim"]["steps_resolved"] = int(steps)
    res = run_rate_experiment(family, sim, bound, Statistic(p["statistic"]))
    summary = res.summary()
    summary["fit_intercept"] = res.intercept
    rows = [[q.n, q.delta, q.error, q.stderr, q.bound] for q in res.points]
    return summary, ["n", "delta", "error", "stderr", "bound"], rows


def cmd_density(cfg: RunConfig):
    p = cfg.params
    sigma = _spec(p["coefficient"], "coefficient")
    grid = p["grid"]
    if grid is not None:
        if not (isinstance(grid, dict) and {"lo", "hi", "points"} <= set(grid)):
            raise ConfigError("grid must be {lo, hi, points}")
        grid = np.linspace(float(grid["lo"]), float(grid["hi"]), int(grid["points"]))
    d = density_estimate(sigma, _sim_config(p["sim"], cfg), float(p["t"]), grid, p["bandwidth"], p["method"])
    summary = {"atom_at_zero": d.atom_at_zero, "bandwidth": d.bandwidth, "paths": d.paths,
               "method": d.method, "mass": d.mass()}
    rows = [[float(y), float(v)] for y, v in zip(d.grid, d.values)]
    return summary, ["y", "p_hat"], rows


def cmd_residual(cfg: RunConfig):
    p = cfg.params
    sigma = _spec(p["coefficient"], "coefficient")
    sim = _sim_config(p["sim"], cfg)
    if p["bumps"] is None:
        tests = default_test_set(sim.x0)
    else:
        try:
            tests = [TestFunction.bump(float(c), float(r)) for c, r in p["bumps"]]
        except (TypeError, ValueError) as exc:
            raise ConfigError("bumps must be a list of [center, radius] pairs") from exc
    rep = weak_residual(sigma, sim, float(p["t"]), float(p["dt"]), tests, float(p["n_stderr"]))
    return rep.to_json(), None, None


HANDLERS = {
    "classify": cmd_classify,
    "cantor": cmd_cantor,
    "simulate": cmd_simulate,
    "rates": cmd_rates,
    "density": cmd_density,
    "residual": cmd_residual,
}


def run(cfg: RunConfig) -> tuple[dict, list[str]]:
    summary, columns, rows = HANDLERS[cfg.command](cfg)
    return summary, write_outputs(cfg, summary, columns, rows)


# ---------------------------------------------------------------------- argv
def _set_path(params: dict, dotted: str, raw: str):
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    keys = dotted.split(".")
    node = params
    for k in keys[:-1]:
        if not isinstance(node.get(k), dict):
            node[k] = {}
        node = node[k]
    node[keys[-1]] = value


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="driftless-sde", description="Driftless SDE stability toolkit")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        src = sp.add_mutually_exclusive_group()
        src.add_argument("--config", help="JSON run config")
        src.add_argument("--preset", help="packaged preset name")
        sp.add_argument("--output", "-o", help="output path stem (default: command name)")
        sp.add_argument("--format", choices=FORMATS)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--workers", type=int)
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a parameter by dotted key; VALUE is parsed as JSON")
        if name in ("classify", "simulate", "density", "residual"):
            sp.add_argument("--coefficient", help="coefficient JSON, e.g. '{\"kind\":\"power_law\",\"params\":{\"alpha\":0.25}}'")
        if name == "classify":
            sp.add_argument("--c", type=float)
        if name in ("simulate", "rates", "density", "residual"):
            sp.add_argument("--paths", type=int)
            sp.add_argument("--steps", help="integer (or 'auto' for rates)")
            sp.add_argument("--T", type=float)
            sp.add_argument("--x0", type=float)
        if name == "cantor":
            sp.add_argument("--lambda", dest="lam", type=float)
            sp.add_argument("--base", choices=("zero", "identity"))
        if name in ("density", "residual"):
            sp.add_argument("--t", type=float)
        if name == "residual":
            sp.add_argument("--dt", type=float)
    sub.add_parser("presets", help="list packaged presets")
    return ap


def config_from_args(args: argparse.Namespace, environ=os.environ) -> RunConfig:
    if args.config:
        base = load_config(args.config)
    elif args.preset:
        base = load_preset(args.preset)
    else:
        base = RunConfig(args.command)
    if base.command != args.command:
        raise ConfigError(f"config is for command {base.command!r}, not {args.command!r}")
    raw = base.to_json()
    params = copy.deepcopy(base.params)
    if environ.get(ENV_SEED):
        raw["seed"] = _env_int(environ, ENV_SEED)
    if environ.get(ENV_WORKERS):
        raw["workers"] = _env_int(environ, ENV_WORKERS)
    for key in ("output", "format", "seed", "workers"):
        if getattr(args, key, None) is not None:
            raw[key] = getattr(args, key)
    flag_map = {"coefficient": "coefficient", "c": "c", "lam": "lambda", "base": "base", "t": "t", "dt": "dt"}
    for attr, key in flag_map.items():
        v = getattr(args, attr, None)
        if v is not None:
            params[key] = json.loads(v) if attr == "coefficient" else v
    for attr in ("paths", "steps", "T", "x0"):
        v = getattr(args, attr, None)
        if v is not None:
            if attr == "steps" and v != "auto":
                v = int(v)
            params.setdefault("sim", {})[attr] = v
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        _set_path(params, k, v)
    raw["params"] = params
    return RunConfig.from_json(raw, "<command line>")


def _env_int(environ, name: str) -> int:
    try:
        return int(environ[name])
    except ValueError as exc:
        raise ConfigError(f"{name} must be an integer") from exc


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "presets":
        print("\n".join(preset_names()))
        return EXIT_OK
    try:
        cfg = config_from_args(args)
        summary, written = run(cfg)
    except (ConfigError, ParameterError, DomainError, DataError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (SDEError, ArithmeticError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    print(json.dumps(_clean(summary), indent=2))
    for path in written:
        print(f"wrote {path}", file=sys.stderr)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
