"""Command-line front end: ``cascademix {simulate,infer,baseline,tune,evaluate,diagnose}``.

Settings come from flags, an optional ``--config`` JSON file, the
``CASCADE_INFER_SEED`` environment variable (seed only) and built-in
defaults, in that order of precedence. Unknown config keys are rejected.

Exit codes: 0 success, 1 usage error, 2 invalid input, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Callable

import numpy as np

from . import io
from .errors import CascadeMixError, DegenerateData, EmptySupport, SourceNode, ValidationError
from .estimator import EmConfig, baseline_fit, fit, identifiability_diagnostic, tune_rho
from .generate import BA, ER, SBM, GenSpec, gen_params
from .hazard import KINDS, HazardModel
from .metrics import DEFAULT_THRESHOLD, evaluate
from .mixture import MixtureParams
from .simulate import FixedSource, SimSpec, UniformSources, simulate_batch

log = logging.getLogger("cascademix")

EXIT_OK, EXIT_USAGE, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2, 3
SEED_ENV = "CASCADE_INFER_SEED"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse exits with status 2 on bad usage; we reserve 2 for invalid data."""

    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# ---------------------------------------------------------------------------
# option tables: name -> (type, default, help)

_COMMON = {
    "seed": (int, 0, "random seed (env %s is used when the flag is absent)" % SEED_ENV),
    "log_level": (str, "WARNING", "logging level"),
}
_MODEL = {
    "model": (str, "exp", "transmission model: " + ", ".join(KINDS)),
    "delta": (float, 1.0, "minimum delay of the pow model"),
}
_EM = {
    "rho": (str, "auto", "nuclear-norm radius of psi, or 'auto'"),
    "max_em_iters": (int, 200, "EM iteration cap"),
    "inner_iters": (int, 100, "ascent iterations per M-step"),
    "elbo_tol": (float, 1e-6, "relative tolerance on the mean marginal log-likelihood"),
    "epsilon": (float, 0.01, "pi is clipped to [epsilon, 1 - epsilon]"),
    "beta1": (float, 10.0, "upper bound on theta entries"),
    "beta2": (float, 10.0, "upper bound on psi entries"),
    "sparsity_s": (float, None, "l1 radius of theta when no mask is given"),
    "dykstra_passes": (int, 0, "extra alternating-projection passes for psi"),
    "grid_size": (int, 8, "number of radii tried by auto tuning"),
    "grid_lo": (float, 0.1, "smallest radius, as a multiple of the initial psi nuclear norm"),
    "grid_hi": (float, 2.0, "largest radius, as a multiple of the initial psi nuclear norm"),
    "split": (float, 0.8, "training fraction for rho tuning"),
    "threads": (int, os.cpu_count() or 1, "worker threads for the tuning grid"),
}
_IO_IN = {
    "cascades": (str, None, "cascade CSV (with its .json sidecar)"),
    "mask": (str, None, "optional theta support as a network CSV"),
    "out": (str, None, "output directory"),
}

COMMANDS: dict[str, dict] = {
    "simulate": {
        **_COMMON, **_MODEL,
        "out": (str, None, "output directory"),
        "n": (int, 50, "number of nodes"),
        "topology": (str, "er", "theta support: er, sbm or ba"),
        "p": (float, 0.01, "ER edge probability"),
        "blocks": (int, 4, "SBM block count"),
        "p_in": (float, 0.05, "SBM within-block probability"),
        "p_out": (float, 0.01, "SBM between-block probability"),
        "m": (int, 1, "BA edges per new node"),
        "weight_lo": (float, 1.0, "smallest theta rate"),
        "weight_hi": (float, 5.0, "largest theta rate"),
        "psi_rank": (int, 5, "rank of psi"),
        "factor_density": (float, 0.1, "nonzero fraction of the psi factors"),
        "factor_lo": (float, 1.0, "smallest factor entry"),
        "factor_hi": (float, 2.0, "largest factor entry"),
        "overlap": (float, None, "target Jaccard overlap of the two supports"),
        "pi_lo": (float, 0.3, "smallest node probability"),
        "pi_hi": (float, 0.7, "largest node probability"),
        "impute": (bool, True, "add edges so no node is isolated in theta + psi"),
        "window": (float, 10.0, "observation window T"),
        "n_cascades": (int, 1000, "number of cascades"),
        "source": (int, None, "fixed source node (default: uniform)"),
    },
    "infer": {**_COMMON, **_MODEL, **_IO_IN, **_EM},
    "baseline": {**_COMMON, **_MODEL, **_IO_IN,
                 "beta1": _EM["beta1"], "inner_iters": (int, 500, "ascent iterations")},
    "tune": {**_COMMON, **_MODEL, **_IO_IN, **_EM,
             "grid": (str, None, "comma-separated radii (default: geometric grid)")},
    "evaluate": {
        **_COMMON,
        "est": (str, None, "directory with theta.csv, psi.csv, pi.csv"),
        "truth": (str, None, "directory with theta.csv, psi.csv, pi.csv"),
        "threshold": (float, DEFAULT_THRESHOLD, "edge threshold for support metrics"),
        "out": (str, None, "output directory"),
    },
    "diagnose": {
        **_COMMON,
        "mask": (str, None, "theta support network CSV"),
        "psi": (str, None, "psi network CSV"),
        "out": (str, None, "output directory"),
    },
}
REQUIRED = {
    "simulate": ("out",),
    "infer": ("cascades", "out"),
    "baseline": ("cascades", "out"),
    "tune": ("cascades", "out"),
    "evaluate": ("est", "truth", "out"),
    "diagnose": ("mask", "psi", "out"),
}


def _flag(name: str) -> str:
    return "--" + name.replace("_", "-")


def _parse_bool(text: str) -> bool:
    low = text.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cascademix", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    for command, options in COMMANDS.items():
        p = sub.add_parser(command, argument_default=argparse.SUPPRESS)
        p.add_argument("--config", help="JSON file with settings (flags win)")
        for name, (typ, default, text) in options.items():
            shown = "" if default is None else f" (default: {default})"
            p.add_argument(_flag(name), dest=name, type=_parse_bool if typ is bool else typ,
                           help=text + shown)
    return parser


_ACCEPTS = {bool: (bool,), int: (int,), float: (int, float), str: (str, int, float)}


def _config_value(key: str, value, typ):
    if value is None:
        return None
    ok = isinstance(value, _ACCEPTS[typ]) and (typ is bool or not isinstance(value, bool))
    if not ok:
        raise ValidationError(f"config key {key!r} should be {typ.__name__}, got {value!r}")
    return typ(value) if typ in (float, str) else value


def resolve(command: str, flags: dict, environ=os.environ) -> dict:
    """Merge defaults < config file < environment seed < flags, rejecting unknown keys."""
    options = COMMANDS[command]
    settings = {name: spec[1] for name, spec in options.items()}
    config_path = flags.pop("config", None)
    if config_path is not None:
        path = Path(config_path)
        if not path.is_file():
            raise ValidationError(f"config file not found: {path}")
        try:
            loaded = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ValidationError(f"config file is not valid JSON: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ValidationError("config file must hold a JSON object")
        unknown = sorted(set(loaded) - set(options))
        if unknown:
            raise ValidationError(f"unknown config keys for {command}: {', '.join(unknown)}")
        for key, value in loaded.items():
            settings[key] = _config_value(key, value, options[key][0])
    if "seed" not in flags and SEED_ENV in environ:
        try:
            settings["seed"] = int(environ[SEED_ENV])
        except ValueError as exc:
            raise ValidationError(f"{SEED_ENV} must be an integer") from exc
    settings.update(flags)
    missing = [k for k in REQUIRED[command] if settings.get(k) is None]
    if missing:
        raise UsageError(f"missing required option(s): {', '.join(_flag(k) for k in missing)}")
    return settings


# ---------------------------------------------------------------------------
# helpers


def _model(s: dict) -> HazardModel:
    return HazardModel(s["model"], s["delta"])


def _em_config(s: dict) -> EmConfig:
    rho = s["rho"]
    if isinstance(rho, str) and rho.lower() != "auto":
        try:
            rho = float(rho)
        except ValueError as exc:
            raise ValidationError(f"--rho must be a number or 'auto', got {rho!r}") from exc
    return EmConfig(
        max_em_iters=s["max_em_iters"], inner_iters=s["inner_iters"], elbo_tol=s["elbo_tol"],
        epsilon_clip=s["epsilon"], beta1=s["beta1"], beta2=s["beta2"], rho=rho,
        sparsity_s=s["sparsity_s"], dykstra_passes=s["dykstra_passes"], grid_size=s["grid_size"],
        grid_span=(s["grid_lo"], s["grid_hi"]), validation_split=s["split"], seed=s["seed"],
    )


def _hashable(s: dict, command: str) -> dict:
    # thread count and log level do not change results
    return {"command": command, **{k: v for k, v in s.items() if k not in ("threads", "log_level", "out")}}


def _out_dir(s: dict) -> Path:
    out = Path(s["out"])
    if out.exists() and not out.is_dir():
        raise ValidationError(f"output path {out} exists and is not a directory")
    return out


def _read_mask(s: dict, n: int) -> np.ndarray | None:
    if s.get("mask") is None:
        return None
    mask = io.read_network(Path(s["mask"])) != 0
    if mask.shape != (n, n):
        raise ValidationError(f"mask has {mask.shape[0]} nodes, cascades have {n}")
    return mask


def _read_params(directory: Path) -> MixtureParams:
    directory = Path(directory)
    return MixtureParams(io.read_network(directory / "theta.csv"), io.read_network(directory / "psi.csv"),
                         io.read_pi(directory / "pi.csv"))


def _write_params(out: Path, params: MixtureParams, chash: str) -> list[Path]:
    files = [out / "theta.csv", out / "psi.csv", out / "pi.csv"]
    io.write_network(files[0], params.theta, chash)
    io.write_network(files[1], params.psi, chash)
    io.write_pi(files[2], params.pi, chash)
    return files


def _with_sidecars(files: list[Path]) -> list[Path]:
    return [p for f in files for p in (f, io.sidecar_path(f)) if p.exists()]


# ---------------------------------------------------------------------------
# commands


def cmd_simulate(s: dict) -> list[Path]:
    out = _out_dir(s)
    topo = s["topology"].lower()
    if topo == "er":
        topology = ER(s["p"])
    elif topo == "sbm":
        topology = SBM(s["blocks"], s["p_in"], s["p_out"])
    elif topo == "ba":
        topology = BA(s["m"])
    else:
        raise ValidationError(f"unknown topology {s['topology']!r}; expected er, sbm or ba")
    spec = GenSpec(s["n"], topology, (s["weight_lo"], s["weight_hi"]), s["psi_rank"],
                   s["factor_density"], (s["factor_lo"], s["factor_hi"]), s["overlap"], s["seed"])
    if not 0 <= s["pi_lo"] <= s["pi_hi"] <= 1:
        raise ValidationError("need 0 <= pi_lo <= pi_hi <= 1")
    source = UniformSources() if s["source"] is None else FixedSource(s["source"])
    rng = np.random.default_rng(np.random.SeedSequence(s["seed"]).spawn(1)[0])
    mask, params = gen_params(spec, rng, (s["pi_lo"], s["pi_hi"]), impute=s["impute"])
    sim = SimSpec(params, _model(s), s["window"], s["n_cascades"], source, s["seed"])
    cascades, z = simulate_batch(sim)
    chash = io.config_hash(_hashable(s, "simulate"))
    out.mkdir(parents=True, exist_ok=True)
    files = _write_params(out, params, chash)
    io.write_network(out / "mask.csv", mask.astype(float), chash)
    io.write_cascades(out / "cascades.csv", cascades, chash)
    io.write_indicators(out / "z.csv", z, chash)
    files += [out / "mask.csv", out / "cascades.csv", out / "z.csv"]
    return files


def cmd_infer(s: dict) -> list[Path]:
    out = _out_dir(s)
    cascades = io.read_cascades(Path(s["cascades"]))
    mask = _read_mask(s, cascades.n_nodes)
    if mask is None:
        log.warning("no mask given: theta is fitted under an l1 budget instead of a fixed support")
    config = _em_config(s)
    result = fit(cascades, _model(s), mask, config, threads=s["threads"])
    chash = io.config_hash(_hashable(s, "infer"))
    out.mkdir(parents=True, exist_ok=True)
    files = _write_params(out, result.params, chash)
    n = len(result.marginal_trace)
    rows = [[k, result.marginal_trace[k], result.elbo_trace[k - 1] if k else "",
             result.nuclear_trace[k] if k < len(result.nuclear_trace) else ""] for k in range(n)]
    io.write_table(out / "trace.csv", ["iteration", "mean_marginal_loglik", "elbo", "psi_nuclear_norm"],
                   rows, "trace", chash)
    scores = None if result.rho_scores is None else [v if np.isfinite(v) else None for v in result.rho_scores]
    summary = {"rho": result.rho, "converged": result.converged, "iterations": result.iterations,
               "diagnostics": result.diagnostics, "rho_scores": scores}
    (out / "fit.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return files + [out / "trace.csv", out / "fit.json"]


def cmd_baseline(s: dict) -> list[Path]:
    out = _out_dir(s)
    cascades = io.read_cascades(Path(s["cascades"]))
    mask = _read_mask(s, cascades.n_nodes)
    config = EmConfig(beta1=s["beta1"], baseline_iters=s["inner_iters"], seed=s["seed"])
    net = baseline_fit(cascades, _model(s), config, support=mask)
    out.mkdir(parents=True, exist_ok=True)
    io.write_network(out / "network.csv", net, io.config_hash(_hashable(s, "baseline")))
    return [out / "network.csv"]


def cmd_tune(s: dict) -> list[Path]:
    out = _out_dir(s)
    cascades = io.read_cascades(Path(s["cascades"]))
    mask = _read_mask(s, cascades.n_nodes)
    grid = None
    if s["grid"] is not None:
        try:
            grid = [float(v) for v in str(s["grid"]).split(",") if v.strip()]
        except ValueError as exc:
            raise ValidationError(f"--grid must be comma-separated numbers: {exc}") from exc
    config = _em_config(s)
    best, scores, grid = tune_rho(cascades, _model(s), mask, config, grid=grid, split=s["split"],
                                  threads=s["threads"], return_grid=True)
    chash = io.config_hash(_hashable(s, "tune"))
    out.mkdir(parents=True, exist_ok=True)
    io.write_table(out / "tune.csv", ["rho", "validation_loglik"],
                   ([float(r), float(v)] for r, v in zip(grid, scores)), "tuning", chash)
    (out / "tune.json").write_text(json.dumps({"rho": best}, indent=2) + "\n")
    return [out / "tune.csv", out / "tune.json"]


def cmd_evaluate(s: dict) -> list[Path]:
    out = _out_dir(s)
    est, truth = _read_params(Path(s["est"])), _read_params(Path(s["truth"]))
    if est.n_nodes != truth.n_nodes:
        raise ValidationError(f"estimate has {est.n_nodes} nodes, truth has {truth.n_nodes}")
    report = evaluate(est, truth, s["threshold"])
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(report.to_json() + "\n")
    (out / "report.csv").write_text(report.to_csv())
    return [out / "report.json", out / "report.csv"]


def cmd_diagnose(s: dict) -> list[Path]:
    out = _out_dir(s)
    mask, psi = io.read_network(Path(s["mask"])), io.read_network(Path(s["psi"]))
    if mask.shape != psi.shape:
        raise ValidationError("mask and psi have different sizes")
    rep = identifiability_diagnostic(mask != 0, psi)
    out.mkdir(parents=True, exist_ok=True)
    payload = {**rep._asdict(), "flagged": rep.flagged}
    (out / "diagnose.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return [out / "diagnose.json"]


HANDLERS: dict[str, Callable[[dict], list[Path]]] = {
    "simulate": cmd_simulate, "infer": cmd_infer, "baseline": cmd_baseline,
    "tune": cmd_tune, "evaluate": cmd_evaluate, "diagnose": cmd_diagnose,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
        if ns.command is None:
            raise UsageError("a subcommand is required: " + ", ".join(COMMANDS))
        flags = {k: v for k, v in vars(ns).items() if k != "command"}
        settings = resolve(ns.command, flags)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    level = getattr(logging, str(settings["log_level"]).upper(), None)
    if not isinstance(level, int):
        print(f"error: unknown log level {settings['log_level']!r}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        files = HANDLERS[ns.command](settings)
        io.write_manifest(_out_dir(settings), ns.command, _hashable(settings, ns.command),
                          _with_sidecars(files))
    except (ValidationError, DegenerateData, EmptySupport, SourceNode) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (CascadeMixError, OSError, RuntimeError, ValueError, FloatingPointError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
