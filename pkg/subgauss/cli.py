import argparse
import difflib
import io
import json
import sys
import time
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import List, Optional

import numpy as np
import scipy
import yaml
from prettytable import PrettyTable
from sconf import Config

import subgauss
from subgauss import config_registry
from subgauss.convolution import METHODS, density_zn
from subgauss.diagnostics import diagnose
from subgauss.distributions import get_builtin, spec_from_dict
from subgauss.distributions.cumulants import moments_and_cumulants
from subgauss.distributions.distributions import GridParams, TrigGaussian
from subgauss.divergence import chi_square, divergence_report, tail_constant
from subgauss.errors import (
    ConfigError,
    LabError,
    ParseError,
    RejectsInadmissibleC,
    RejectsNonStandardized,
    ValidationError,
)
from subgauss.lib import misc
from subgauss.lib.logger import Logger
from subgauss.lib.writers import FORMATS, dumps, get_writer, write_csv, write_json
from subgauss.local_limit import llt_report
from subgauss.sweep import MAX_N, run_sweep
from subgauss.tilt import PROFILE_HEADER, build_profile

DENSITY_HEADER = ["x", "p", "phi", "ratio_minus_1"]
COEFF_HEADER = ["k", "freq", "re", "im"]
FREE_FORM = ("spec", "x_samples")  # documents below these keys are not checked against the registry


@dataclass(frozen=True)
class ExperimentConfig:
    command: str
    name: str
    spec: dict
    method: str
    threads: Optional[int]
    out_dir: str
    formats: List[str]
    tensorboard: bool
    debug: bool
    grid: dict
    t_max: float
    t_step: float
    J: int
    tolerances: dict
    n: int
    n_list: List[int]
    alphas: List[float]
    a: float
    tau0: float
    c_window: float
    t0_list: List[float]
    x_samples: Optional[List[float]]
    tilt_n: List[int]

    @property
    def grid_params(self):
        return GridParams(float(self.grid["L"]), int(self.grid["points"]))

    def to_dict(self):
        return asdict(self)


###########################################################################
# parsing
###########################################################################


def _flat_keys(doc, prefix=""):
    for k, v in doc.items():
        key = f"{prefix}{k}"
        yield key
        if isinstance(v, dict) and k not in FREE_FORM:
            yield from _flat_keys(v, key + ".")


def check_keys(keys):
    """Strict mode: every key must exist in the registry; suggest the closest one otherwise."""
    known = config_registry.known_keys()
    for key in keys:
        if key in known:
            continue
        close = difflib.get_close_matches(key, known, n=1)
        hint = f"; did you mean {close[0]!r}?" if close else ""
        raise ParseError(f"unknown config key {key!r}{hint}")


def _load_document(source):
    if source is None:
        return {}
    if isinstance(source, dict):
        return json.loads(json.dumps(source))
    text = str(source)
    path = Path(text)
    name = "<inline>"
    if not text.lstrip().startswith("{") and path.exists():
        text, name = path.read_text(encoding="utf-8"), str(path)
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"{name}: line {e.lineno}, column {e.colno}: {e.msg}")
    if not isinstance(doc, dict):
        raise ParseError(f"{name}: top level must be a JSON object")
    return doc


def _spec_kind(spec_doc):
    if not isinstance(spec_doc, dict):
        return None
    if spec_doc.get("kind") == "builtin":
        try:
            return get_builtin(spec_doc.get("name")).kind
        except (NotImplementedError, LabError):
            return None
    return spec_doc.get("kind")


def _validate(doc):
    violations = []
    command = doc.get("command")
    if command not in config_registry.COMMANDS:
        violations.append(f"command must be one of {config_registry.COMMANDS}, got {command!r}")
    n = doc.get("n")
    if not isinstance(n, int) or n < 1:
        violations.append("n must be ≥ 1")
    n_list = doc.get("n_list") or []
    if not all(isinstance(k, int) and 1 <= k <= MAX_N for k in n_list):
        violations.append(f"n_list entries must be integers in [1, {MAX_N}]")
    elif any(a >= b for a, b in zip(n_list, n_list[1:])):
        violations.append("n_list must be increasing")
    if any(a <= 0 or a == 1 for a in doc.get("alphas") or []):
        violations.append("alphas must be positive and != 1")
    formats = doc.get("formats")
    if not formats or not set(formats) <= set(FORMATS):
        violations.append(f"formats must be a non-empty subset of {list(FORMATS)}")
    x_samples = doc.get("x_samples")
    if x_samples is not None and not (isinstance(x_samples, list) and all(isinstance(v, (int, float)) for v in x_samples)):
        violations.append("x_samples must be a list of numbers")
    grid = doc.get("grid") or {}
    points = grid.get("points")
    if not (isinstance(points, int) and points >= 3 and points % 2 == 1):
        violations.append("grid.points must be an odd integer >= 3")
    if not grid.get("L", 0) > 0:
        violations.append("grid.L must be positive")
    if doc.get("method") not in ("auto",) + METHODS:
        violations.append(f"method must be one of {('auto',) + METHODS}")
    for key in ("a", "tau0", "c_window", "t_max", "t_step"):
        if not (isinstance(doc.get(key), (int, float)) and doc[key] > 0):
            violations.append(f"{key} must be positive")
    threads = doc.get("threads")
    if threads is not None and (not isinstance(threads, int) or threads < 1):
        violations.append("threads must be an integer >= 1")
    if not 3 <= int(doc.get("J") or 0) <= 12:
        violations.append("J must lie in [3, 12]")
    if doc.get("spec") is None:
        violations.append("spec is required")
    else:
        try:
            spec_from_dict(doc["spec"])
        except ValidationError as e:
            violations += e.violations
        except (RejectsInadmissibleC, RejectsNonStandardized) as e:
            violations.append(str(e))
    if violations:
        raise ValidationError(violations)


def parse_config(source=None, command=None, argv=(), base_files=("config.yaml",)):
    """Merged, validated config: registry -> config.yaml -> JSON document -> argv."""
    doc = _load_document(source)
    check_keys(_flat_keys(doc))
    command = doc.get("command") or command
    if command not in config_registry.COMMANDS:
        raise ValidationError(f"command must be one of {config_registry.COMMANDS}, got {command!r}")
    doc["command"] = command
    check_keys(a[2:].split("=")[0] for a in argv if a.startswith("--"))

    defaults = config_registry.default_config(command, _spec_kind(doc.get("spec")))
    streams = [open(f, encoding="utf8") for f in base_files if Path(f).exists()]
    try:
        # YAML keeps floats such as 1e-08 as floats only in its own dump format
        streams.append(io.StringIO(yaml.safe_dump(doc)))
        config = Config(*streams, default=defaults)
    finally:
        for s in streams:
            s.close()
    config.argv_update(list(argv))
    merged = {k: v for k, v in json.loads(json.dumps(config)).items() if not k.startswith("_")}
    check_keys(_flat_keys(merged))
    if isinstance(doc.get("spec"), dict):
        merged["spec"] = doc["spec"]
    _validate(merged)
    return ExperimentConfig(**{k: merged[k] for k in ExperimentConfig.__dataclass_fields__})


###########################################################################
# commands
###########################################################################


def _density_rows(sum_density, grid):
    return sum_density.rows(grid)


def run_construct(spec, cfg, out_dir):
    info = {"spec": spec.to_dict(), "spec_id": spec.spec_id, "symmetric": spec.symmetric}
    info["support_radius"] = spec.support_radius
    info["t_period"] = spec.t_period
    if isinstance(spec, TrigGaussian):
        info["c_min"], info["c_max"] = spec.admissible
        info["lift_norm"] = spec.P.lift_norm()
        write_csv(out_dir / "coefficients.csv", COEFF_HEADER, spec.gauss_deviation().table(), cfg.formats)
    info["cumulants"] = moments_and_cumulants(spec, cfg.J, grid=cfg.grid_params).to_dict()
    write_json(out_dir / "spec.json", info, cfg.formats)
    p = density_zn(spec, 1, "auto", cfg.grid_params)
    write_csv(out_dir / "density.csv", DENSITY_HEADER, _density_rows(p, cfg.grid_params), cfg.formats)
    prof = build_profile(spec, t_max=cfg.t_max, dt=cfg.t_step, tol=cfg.tolerances["profile"])
    prof.to_csv(out_dir / "profile.csv", cfg.formats)
    return info


def run_diagnose(spec, cfg, out_dir):
    logger = Logger.get()
    prof = build_profile(spec, t_max=cfg.t_max, dt=cfg.t_step, tol=cfg.tolerances["profile"])
    report = diagnose(spec, prof, cfg.J, cfg.t0_list)
    write_json(out_dir / "diagnostics.json", report.to_dict(), cfg.formats)
    logger.nofmt(report.verdict_table())
    return report


def run_density(spec, cfg, out_dir):
    logger = Logger.get()
    grid = cfg.grid_params
    p = density_zn(spec, cfg.n, cfg.method, grid)
    g = p.grid(grid)
    if abs(g.integral - 1) > max(cfg.tolerances["integral"], 10 * p.accuracy):
        logger.warning(f"density integral {g.integral!r} off by more than the integral tolerance")
    write_csv(out_dir / "density.csv", DENSITY_HEADER, _density_rows(p, grid), cfg.formats)
    if p.is_spectral:
        write_csv(out_dir / "coefficients.csv", COEFF_HEADER, p.payload.table(), cfg.formats)
    summary = {
        "n": p.n,
        "method": p.method,
        "accuracy": p.accuracy,
        "integral": g.integral,
        "mean": g.mean,
        "variance": g.variance,
    }
    write_json(out_dir / "density.json", summary, cfg.formats)
    return summary


def _tail_inputs(spec, cfg):
    if isinstance(spec, TrigGaussian):
        return None, None
    prof = build_profile(spec, t_max=cfg.t_max, dt=cfg.t_step, tol=cfg.tolerances["profile"])
    return prof, tail_constant(spec, cfg.grid_params)


def run_divergence(spec, cfg, out_dir):
    p = density_zn(spec, cfg.n, cfg.method, cfg.grid_params)
    prof, c_const = _tail_inputs(spec, cfg)
    report = divergence_report(p, cfg.alphas, prof, c_const, misc.resolve_threads(cfg.threads))
    report.extras["chi_square"] = chi_square(p)
    report.save(out_dir, formats=cfg.formats)
    return report


def run_sweep_command(spec, cfg, out_dir):
    logger = Logger.get()
    prof = build_profile(spec, t_max=cfg.t_max, dt=cfg.t_step, tol=cfg.tolerances["profile"])
    predicted = diagnose(spec, prof, cfg.J, cfg.t0_list).predicted_clt
    writer = get_writer(out_dir / "runs", cfg.tensorboard)
    try:
        sweep = run_sweep(
            spec,
            cfg.n_list,
            cfg.method,
            threads=misc.resolve_threads(cfg.threads),
            writer=writer,
            predicted_clt=predicted,
            grid=cfg.grid_params,
        )
    finally:
        writer.close()
    sweep.extras["predicted_clt"] = predicted
    sweep.save(out_dir, formats=cfg.formats)

    table = PrettyTable(["n", "T_inf", "argmax_x", "rate_constant"])
    for p in sweep.points:
        table.add_row([p.n, f"{p.T_inf:.4e}", f"{p.argmax_x:.4f}", f"{p.rate_constant:.4e}"])
    logger.nofmt(table)
    logger.info(f"slope {sweep.loglog_slope:.3f}, verdict {sweep.verdict}")
    return sweep


def run_llt(spec, cfg, out_dir):
    prof = build_profile(spec, t_max=cfg.t_max, dt=cfg.t_step, tol=cfg.tolerances["profile"])
    c_const = tail_constant(spec, cfg.grid_params)
    report = llt_report(spec, cfg.n_list, cfg.a, cfg.tilt_n, prof, c_const, cfg.tau0, cfg.x_samples)
    report.save(out_dir, formats=cfg.formats)
    return report


RUNNERS = {
    "construct": run_construct,
    "diagnose": run_diagnose,
    "density": run_density,
    "divergence": run_divergence,
    "sweep": run_sweep_command,
    "llt": run_llt,
}


def _log_environment(logger, cfg):
    logger.nofmt("Environment:")
    logger.nofmt("\tPython: {}".format(sys.version.split(" ")[0]))
    logger.nofmt("\tNumPy: {}".format(np.__version__))
    logger.nofmt("\tSciPy: {}".format(scipy.__version__))
    logger.nofmt("\tsubgauss: {}".format(subgauss.__version__))
    logger.nofmt("Config:")
    for line in dumps(cfg.to_dict()).split("\n"):
        logger.nofmt("\t" + line)


def dispatch(cfg, cmd=""):
    """Run one experiment; returns the exit code. Failed runs leave no output directory."""
    out_dir = Path(cfg.out_dir) / f"{misc.timestamp()}_{cfg.name}"
    logger = Logger.get()
    try:
        out_dir.mkdir(parents=True, exist_ok=False)
    except OSError as e:
        logger.error(f"output directory {out_dir} not writable: {e}")
        return 2
    logger = Logger.get(out_dir / "log.txt")
    if cfg.debug:
        logger.setLevel("DEBUG")
    if cmd:
        logger.info(f"Command :: {cmd}")
    _log_environment(logger, cfg)

    start = time.time()
    try:
        spec = spec_from_dict(cfg.spec)
        RUNNERS[cfg.command](spec, cfg, out_dir)
    except ConfigError as e:
        code, err = 2, e
    except LabError as e:
        code, err = 1, e
    except Exception as e:
        logger.exception(f"unexpected failure in {cfg.command}")
        code, err = 1, e
    else:
        manifest = {
            "command": cfg.command,
            "spec_hash": misc.spec_hash(spec.to_dict()),
            "versions": {
                "python": sys.version.split(" ")[0],
                "numpy": np.__version__,
                "scipy": scipy.__version__,
                "subgauss": subgauss.__version__,
            },
            "tolerances": cfg.tolerances,
            "threads": misc.resolve_threads(cfg.threads),
            "wall_time_s": time.time() - start,
            "config": cfg.to_dict(),
        }
        write_json(out_dir / "manifest.json", manifest)
        logger.info(f"Outputs in {out_dir}")
        return 0

    logger.error(f"{type(err).__name__}: {err}")
    logger.close_file_handlers()
    misc.rm(out_dir)
    return code


def build_parser():
    parser = argparse.ArgumentParser(prog="subgauss-lab", description="Strictly subgaussian laws lab")
    parser.add_argument("command", choices=config_registry.COMMANDS)
    parser.add_argument("--config", type=str, default=None, help="JSON experiment document (path or inline)")
    parser.add_argument("--out", type=str, default=None, help="output root directory")
    parser.add_argument("--n", type=int, default=None)
    parser.add_argument("--threads", type=int, default=None, help="falls back to SUBGAUSS_LAB_THREADS")
    parser.add_argument("--show", action="store_true", help="Show the merged config w/o run")
    return parser


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    args, left_argv = build_parser().parse_known_args(argv)
    for flag, key in ((args.out, "out_dir"), (args.n, "n"), (args.threads, "threads")):
        if flag is not None:
            left_argv += [f"--{key}", str(flag)]

    logger = Logger.get()
    try:
        cfg = parse_config(args.config, args.command, left_argv)
    except ConfigError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return 2
    if args.show:
        logger.nofmt(dumps(cfg.to_dict()))
        return 0
    return dispatch(cfg, " ".join(["subgauss-lab"] + argv))


if __name__ == "__main__":
    sys.exit(main())
