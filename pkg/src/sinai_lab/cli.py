"""Command-line front end.

Each subcommand reads one section of a JSON config (unknown keys are
rejected), applies flag overrides, validates everything before touching the
output directory, and writes CSV and JSON files that start with a metadata
header: tool version, SHA-256 of the canonical config (without ``workers``)
and the master seed.

Exit codes: 0 success, 1 invalid configuration (nothing written), 2 runtime
failure, 3 acceptance failure of ``verify-formulas``.
"""

from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import json
import sys
from dataclasses import dataclass
from pathlib import Path

from . import __version__, _seeding
from . import experiments as E
from . import verify
from .env import make_distribution, potential, sample_environment
from .extrema import decompose, slopes, sweep_sign_changes
from .plpath import BMGridSpec, interpolate_potential, sample_two_sided_bm
from .walk import FunctionalSpec, simulate, write_stream_csv

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_ACCEPTANCE = 0, 1, 2, 3

CAMPAIGN_COLUMNS = [
    "experiment", "parameter", "N_or_x_or_t", "estimate", "ci_low", "ci_high", "n_trials", "seed",
]

_GRID = {"dt": 1e-3, "t_min": -16.0, "t_max": 16.0, "graded_from": None, "sigma_scale": 1.0}

DEFAULTS = {
    "seed": 0,
    "workers": None,
    "distribution": {"kind": "two-point", "params": {"p": 0.3}, "diagnostic": False},
    "simulate": {
        "n_steps": 10000, "half_width": 256, "targets": [],
        "functional": {"kind": "sign", "alpha": 0.0}, "u": 0.0, "stream": False,
    },
    "verify_formulas": {"scale": 1.0},
    "extrema": {"source": "bm", "x": 1.0, "grid": dict(_GRID), "half_width": 256},
    "sign_changes": {
        "source": "bm", "c": 1.0, "x_max": 20.0, "a": 0.0,
        "grid": dict(_GRID, t_min=-2000.0, t_max=2000.0, graded_from=1.0), "half_width": 4096,
    },
    "persistence": {
        "horizons": [100, 1000, 10000], "functional": {"kind": "sign", "alpha": 0.0},
        "u": 0.0, "n_envs": 1000, "walks_per_env": 1, "mode": "shared",
    },
    "rate_function": {
        "x_grid": [round(0.01 * k, 2) for k in range(1, 501)],
        "t_values": [2.0, 5.0, 10.0], "n_samples": 0,
    },
    "localization": {"N": 10000, "n_trials": 100},
}

# keys whose values are free-form dictionaries validated downstream
_OPEN = {("distribution", "params")}


class ConfigError(ValueError):
    """Invalid configuration; reported with exit code 1."""


@dataclass
class RunConfig:
    command: str
    seed: int
    workers: int
    data: dict
    out: Path

    @property
    def section(self) -> dict:
        return self.data[self.command.replace("-", "_")]

    def config_hash(self) -> str:
        d = {k: v for k, v in self.data.items() if k != "workers"}
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def metadata(self) -> dict:
        return {"tool": "sinai-lab", "version": __version__,
                "config_sha256": self.config_hash(), "seed": self.seed}


def _merge(base: dict, over: dict, path=()):
    for k, v in over.items():
        where = ".".join(path + (k,))
        if k not in base:
            raise ConfigError(f"unknown config key {where!r}")
        if isinstance(base[k], dict) and path + (k,) not in _OPEN:
            if not isinstance(v, dict):
                raise ConfigError(f"config key {where!r} must be an object")
            _merge(base[k], v, path + (k,))
        else:
            base[k] = v


def _set(data: dict, dotted: str, raw: str):
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    keys = dotted.split(".")
    over = value
    for k in reversed(keys):
        over = {k: over}
    _merge(data, over)


def _grid(g: dict) -> BMGridSpec:
    return BMGridSpec(float(g["dt"]), float(g["t_max"]), float(g["t_min"]),
                      float(g["sigma_scale"]), g["graded_from"])


def _validate(cfg: RunConfig):
    """Build every object the command needs; raises on any violated precondition."""
    d = cfg.data
    dist = d["distribution"]
    built = {"distribution": make_distribution(dist["kind"], dist["params"], bool(dist["diagnostic"]))}
    s = cfg.section
    if cfg.command == "simulate":
        if int(s["n_steps"]) < 0 or int(s["half_width"]) < 1:
            raise ValueError("need n_steps >= 0 and half_width >= 1")
        built["functional"] = FunctionalSpec.from_dict(s["functional"])
        if not s["u"] <= 0:
            raise ValueError("u must be <= 0")
    elif cfg.command == "verify-formulas":
        if not 0 < float(s["scale"]) <= 1:
            raise ValueError("scale must lie in (0, 1]")
    elif cfg.command in ("extrema", "sign-changes"):
        if s["source"] not in ("bm", "potential"):
            raise ValueError("source must be 'bm' or 'potential'")
        built["grid"] = _grid(s["grid"])
        if int(s["half_width"]) < 1:
            raise ValueError("half_width must be >= 1")
        if cfg.command == "extrema" and not float(s["x"]) > 0:
            raise ValueError("scale x must be positive")
        if cfg.command == "sign-changes" and not 0 < float(s["c"]) <= float(s["x_max"]):
            raise ValueError("need 0 < c <= x_max")
    elif cfg.command == "persistence":
        if s["mode"] not in ("shared", "independent"):
            raise ValueError("mode must be 'shared' or 'independent'")
        built["campaign"] = E.PersistenceCampaign(
            built["distribution"], tuple(s["horizons"]), FunctionalSpec.from_dict(s["functional"]),
            float(s["u"]), int(s["n_envs"]), int(s["walks_per_env"]), cfg.seed,
        )
    elif cfg.command == "rate-function":
        if any(float(x) < 0 for x in s["x_grid"]):
            raise ValueError("rate function grid must be non-negative")
        if int(s["n_samples"]) < 0:
            raise ValueError("n_samples must be >= 0")
    elif cfg.command == "localization":
        if int(s["N"]) < 1000 or int(s["n_trials"]) < 1:
            raise ValueError("need N >= 1000 and n_trials >= 1")
    return built


def parse_config(command: str, config_path=None, seed=None, workers=None, out=".",
                 overrides=()) -> tuple[RunConfig, dict]:
    """Defaults, then the config file, then flags; validated before returning."""
    data = copy.deepcopy(DEFAULTS)
    if config_path is not None:
        try:
            text = Path(config_path).read_text(encoding="utf-8")
            loaded = json.loads(text)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {config_path}: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ConfigError("config must be a JSON object")
        _merge(data, loaded)
    for dotted, raw in overrides:
        _set(data, dotted, raw)
    if seed is not None:
        data["seed"] = seed
    if workers is not None:
        data["workers"] = workers
    s = data["seed"]
    if isinstance(s, bool) or not isinstance(s, int) or not 0 <= s < 2**64:
        raise ConfigError("seed must be a non-negative 64-bit integer")
    try:
        n_workers = E.resolve_workers(data["workers"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    cfg = RunConfig(command, data["seed"], n_workers, data, Path(out))
    try:
        built = _validate(cfg)
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigError(str(exc)) from exc
    return cfg, built


# output helpers

def _header(cfg):
    m = cfg.metadata()
    return [f"# {m['tool']} {m['version']} config_sha256={m['config_sha256']} seed={m['seed']}"]


def _write_csv(cfg, name, header, rows):
    path = cfg.out / name
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(_header(cfg)[0] + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    return path


def _write_with(cfg, name, writer):
    path = cfg.out / name
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(_header(cfg)[0] + "\n")
        writer(fh)
    return path


def _write_json(cfg, name, payload):
    path = cfg.out / name
    doc = {"metadata": cfg.metadata(), **payload}
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def _f(x):
    return repr(float(x))


def _at(x):
    return int(x) if float(x).is_integer() else _f(x)


def _campaign_row(experiment, parameter, at, estimate, lo, hi, n, seed):
    return [experiment, parameter, _at(at), _f(estimate), _f(lo), _f(hi), int(n), seed]


def _path_from(cfg, built):
    s = cfg.section
    if s["source"] == "bm":
        return sample_two_sided_bm(built["grid"], _seeding.child(cfg.seed, _seeding.BM))
    env = sample_environment(built["distribution"], int(s["half_width"]),
                             _seeding.child(cfg.seed, _seeding.ENV))
    return interpolate_potential(potential(env))


# subcommands

def cmd_simulate(cfg, built):
    s = cfg.section
    env = sample_environment(built["distribution"], int(s["half_width"]),
                             _seeding.child(cfg.seed, _seeding.ENV))
    f = built["functional"]
    rec = simulate(env, int(s["n_steps"]), _seeding.child(cfg.seed, _seeding.WALK),
                   targets=[int(t) for t in s["targets"]], functional=f, u=float(s["u"]),
                   record_path=bool(s["stream"]))
    _write_json(cfg, "simulate.json", {"functional": f.to_dict(), "record": rec.to_json_dict()})
    if s["stream"]:
        _write_with(cfg, "simulate_stream.csv", lambda fh: write_stream_csv(rec, f, fh))
    return EXIT_OK


def cmd_verify_formulas(cfg, built):
    rows, summary = verify.run_suite(cfg.seed, float(cfg.section["scale"]))
    _write_with(cfg, "verify_formulas.csv", lambda fh: verify.write_csv(rows, fh))
    _write_json(cfg, "verify_formulas.json", {
        "checks": {k: {"passed": p, "cases": n, "meets_threshold": ok}
                   for k, (p, n, ok) in summary.items()}
    })
    return EXIT_OK if all(ok for _, _, ok in summary.values()) else EXIT_ACCEPTANCE


def cmd_extrema(cfg, built):
    x = float(cfg.section["x"])
    path = _path_from(cfg, built)
    dec = decompose(path, x)
    _write_with(cfg, "extrema.csv", dec.write_csv)
    try:
        sl = slopes(dec)
    except ValueError:
        sl = []
    _write_json(cfg, "extrema.json", {
        "x": x, "n_points": len(dec.points), "n_certified": len(dec.certified()),
        "ties": dec.ties,
        "slopes": [{"k": s.k, "support": list(s.support), "height": s.height,
                    "excess": s.excess, "orientation": s.orientation} for s in sl],
    })
    return EXIT_OK


def cmd_sign_changes(cfg, built):
    s = cfg.section
    rec = sweep_sign_changes(_path_from(cfg, built), float(s["c"]), float(s["x_max"]), float(s["a"]))
    _write_with(cfg, "sign_changes.csv", rec.write_csv)
    _write_json(cfg, "sign_changes.json", {
        "c": rec.c, "x_max": rec.x_max, "a": rec.a, "initial_sign": rec.initial_sign,
        "n_changes": len(rec.changes), "n_strong": sum(rec.strong_flags),
        "excess_certified": rec.excess_certified,
    })
    return EXIT_OK


def cmd_persistence(cfg, built):
    camp = built["campaign"]
    res = E.run_persistence(camp, cfg.workers, cfg.section["mode"])
    param = f"{camp.distribution.kind}:{json.dumps(camp.distribution.params, sort_keys=True)}" \
            f";f={camp.functional.kind}:{camp.functional.alpha};u={camp.u}"
    rows = [_campaign_row("persistence", param, N, e.point, e.ci_low, e.ci_high, e.n_trials, cfg.seed)
            for N, e in res.estimates]
    _write_csv(cfg, "persistence.csv", CAMPAIGN_COLUMNS, rows)
    summary = {"estimates": [{"N": N, "p": e.point, "ci_low": e.ci_low, "ci_high": e.ci_high,
                              "n_trials": e.n_trials} for N, e in res.estimates]}
    try:
        fit = E.fit_exponent(res.estimates)
        summary["fit"] = {"slope": fit.slope, "intercept": fit.intercept, "stderr": fit.stderr,
                          "r_squared": fit.r_squared, "ci_low": fit.ci_low, "ci_high": fit.ci_high,
                          "reference_exponent": -E.PERSISTENCE_EXPONENT}
    except ValueError as exc:
        summary["fit"] = {"error": str(exc)}
    _write_json(cfg, "persistence.json", summary)
    return EXIT_OK


def cmd_rate_function(cfg, built):
    s = cfg.section
    xs = [float(x) for x in s["x_grid"]]
    _write_csv(cfg, "rate_function.csv", ["x", "I"], [[_f(x), _f(E.rate_function(x))] for x in xs])
    x_star = E.rate_function_minimizer()
    summary = {"I0": E.rate_function(0.0), "minimizer": x_star,
               "I_at_minimizer": E.rate_function(x_star),
               "min_on_grid": min(E.rate_function(x) for x in xs) if xs else None}
    n = int(s["n_samples"])
    if n > 0:
        rows = E.sign_change_rate_check(None, s["t_values"], n, cfg.seed, cfg.workers)
        _write_csv(cfg, "sign_change_rate.csv", CAMPAIGN_COLUMNS, [
            _campaign_row("sign_change_rate", "c=1", t, m.mean, m.ci_low, m.ci_high, m.n_used, cfg.seed)
            for t, m in rows
        ])
        summary["sign_change_rate"] = [{"t": t, "mean": m.mean, "censored": m.n_censored}
                                       for t, m in rows]
    _write_json(cfg, "rate_function.json", summary)
    return EXIT_OK


def cmd_localization(cfg, built):
    s = cfg.section
    rep = E.localization_diagnostic(built["distribution"], int(s["N"]), int(s["n_trials"]),
                                    cfg.seed, cfg.workers)
    _write_csv(cfg, "localization.csv",
               ["trial", "S_N", "b", "offset_scaled", "sigma2_S_scaled"],
               [[i, S, _f(b), _f(o), _f(q)] for i, S, b, o, q in rep.rows])
    _write_json(cfg, "localization.json", {
        "N": rep.N, "n_trials": len(rep.rows),
        "median_abs_offset_scaled": rep.median_abs_offset,
        "median_abs_sigma2_S_scaled": rep.median_abs_scaled,
    })
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "verify-formulas": cmd_verify_formulas,
    "extrema": cmd_extrema,
    "sign-changes": cmd_sign_changes,
    "persistence": cmd_persistence,
    "rate-function": cmd_rate_function,
    "localization": cmd_localization,
}

# per-subcommand shortcut flags: (flag, dotted key, type)
_SHORTCUTS = {
    "simulate": [("--n-steps", "n_steps", int), ("--half-width", "half_width", int),
                 ("--stream", "stream", "flag")],
    "verify-formulas": [("--scale", "scale", float)],
    "extrema": [("--x", "x", float), ("--source", "source", str)],
    "sign-changes": [("--c", "c", float), ("--x-max", "x_max", float), ("--a", "a", float),
                     ("--source", "source", str)],
    "persistence": [("--horizons", "horizons", "ints"), ("--n-envs", "n_envs", int),
                    ("--walks-per-env", "walks_per_env", int), ("--mode", "mode", str),
                    ("--u", "u", float)],
    "rate-function": [("--n-samples", "n_samples", int)],
    "localization": [("--N", "N", int), ("--n-trials", "n_trials", int)],
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sinai-lab", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="JSON config file")
        sp.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
        sp.add_argument("--workers", type=int, help="worker threads (default: $SINAI_LAB_WORKERS or 1)")
        sp.add_argument("--out", default=".", help="output directory")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=JSON",
                        help="override any config key, e.g. persistence.n_envs=500")
        for flag, key, typ in _SHORTCUTS[name]:
            dest = "sc_" + key
            if typ == "flag":
                sp.add_argument(flag, dest=dest, action="store_true", default=None)
            elif typ == "ints":
                sp.add_argument(flag, dest=dest, help="comma-separated integers")
            else:
                sp.add_argument(flag, dest=dest, type=typ)
    return p


def _overrides(args):
    section = args.command.replace("-", "_")
    out = []
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=JSON, got {item!r}")
        k, v = item.split("=", 1)
        out.append((k.strip(), v))
    for _, key, typ in _SHORTCUTS[args.command]:
        v = getattr(args, "sc_" + key)
        if v is None:
            continue
        if typ == "ints":
            try:
                v = [int(float(x)) for x in v.split(",") if x.strip()]
            except ValueError as exc:
                raise ConfigError(f"cannot parse integer list {v!r}") from exc
        out.append((f"{section}.{key}", json.dumps(v)))
    return out


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg, built = parse_config(args.command, args.config, args.seed, args.workers, args.out,
                                  _overrides(args))
    except ConfigError as exc:
        print(f"sinai-lab: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg.out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](cfg, built)
    except Exception as exc:  # noqa: BLE001 - any failure after validation is a runtime error
        print(f"sinai-lab: {args.command} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
