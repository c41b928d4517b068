"""Command-line front end.

    fracdyn [--config FILE] [--seed S] [--out DIR] COMMAND [options]

Settings are resolved as built-in defaults < config file (YAML) <
``FRACDYN_*`` environment variables < command-line flags.
"""
from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .exceptions import (
    DatasetError,
    DomainError,
    FracDynError,
    IllPosedRegression,
    InconsistentData,
    InsufficientExcitation,
    ParameterError,
    SimulationDiverged,
    UsageError,
)
from .harness import NoiseSpec, add_noise, compare_responses, field_error_surface, write_json
from .learn import ExperimentDataset, ExperimentPlan, FractionalDynamicsLearner, estimate_order, generate_dataset
from .simulate import simulate
from .suite import COMPARISON_ORDERS, PRESETS, Preset, run_benchmark, run_suite
from .systems import BENCHMARKS, get_benchmark, make_polynomial_system

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4

ENV_PREFIX = "FRACDYN_"

_GENERIC = Preset("generic", 1.0, M=50, N=10, seed=0)


@dataclass
class RunConfig:
    system: object = "vanderpol"
    alpha: float | None = None
    params: dict = field(default_factory=dict)
    h: float | None = None
    horizon: int | None = None
    x0: list | None = None
    plan: dict = field(default_factory=dict)
    basis: dict = field(default_factory=dict)
    noise: dict | None = None
    grid_density: int | None = None
    output_dir: str = "fracdyn_out"

    def fill_defaults(self):
        """Unset values come from the benchmark preset, else generic defaults."""
        preset = PRESETS.get(self.system) if isinstance(self.system, str) else None
        base = preset or _GENERIC
        self.h = base.h if self.h is None else self.h
        self.horizon = base.horizon if self.horizon is None else self.horizon
        self.grid_density = base.grid_density if self.grid_density is None else self.grid_density
        for key, value in (("M", base.M), ("N", base.N), ("seed", base.seed),
                           ("input_range", list(base.input_range)), ("channel", 1)):
            self.plan.setdefault(key, value)
        self.basis.setdefault("family", "legendre-tensor")
        self.basis.setdefault("L", base.L)
        self.basis.setdefault("drift_L", None)
        if self.noise is not None:
            self.noise.setdefault("seed", 0)
            self.noise.setdefault("level", 0.05)
        return self

    def validate(self):
        if isinstance(self.system, str):
            if self.system not in BENCHMARKS:
                raise UsageError(
                    f"unknown benchmark {self.system!r}; valid names: {', '.join(sorted(BENCHMARKS))}"
                )
        elif not isinstance(self.system, dict):
            raise UsageError("system must be a benchmark name or a polynomial system mapping")
        if not isinstance(self.h, (int, float)) or not self.h > 0:
            raise UsageError("h must be positive")
        if not _is_int(self.horizon, 1):
            raise UsageError(f"horizon must be a positive integer, got {self.horizon}")
        if not _is_int(self.basis["L"], 1):
            raise UsageError(f"basis L must be a positive integer, got {self.basis['L']}")
        if self.basis["drift_L"] is not None and not _is_int(self.basis["drift_L"], 1):
            raise UsageError(f"drift L must be a positive integer, got {self.basis['drift_L']}")
        if not _is_int(self.grid_density, 2):
            raise UsageError(f"grid density must be an integer >= 2, got {self.grid_density}")
        if self.basis.get("family", "legendre-tensor") != "legendre-tensor":
            raise UsageError("only the legendre-tensor basis family is available from the CLI")
        for key in ("M", "N", "seed", "channel"):
            v = self.plan.get(key)
            if not _is_int(v, 0 if key == "seed" else 1):
                raise UsageError(f"plan.{key} is invalid: {v!r}")
        if self.noise is not None and not self.noise.get("level", 0) >= 0:
            raise UsageError("noise level must be nonnegative")
        return self

    # -- construction ------------------------------------------------------
    def build_system(self):
        if isinstance(self.system, str):
            params = dict(self.params)
            if self.alpha is not None:
                params["alpha"] = self.alpha
            try:
                return get_benchmark(self.system, **params).system
            except TypeError as err:
                raise UsageError(f"bad parameter for {self.system}: {err}") from None
        s = self.system
        try:
            drift = [[(c, e) for c, e in comp] for comp in s["drift"]]
            control = [[[(c, e) for c, e in ch] for ch in comp] for comp in s["control"]]
            return make_polynomial_system(drift, control, s["domain"], self.alpha or s.get("alpha", 1.0),
                                          s.get("time_kind", "continuous"), s.get("name", "polynomial"))
        except (KeyError, TypeError, ValueError) as err:
            raise UsageError(f"invalid polynomial system: {err}") from None

    def build_plan(self) -> ExperimentPlan:
        p = self.plan
        return ExperimentPlan(int(p["M"]), int(p["N"]), tuple(p.get("input_range", (-1.0, 1.0))),
                              int(p["seed"]), int(p.get("channel", 1)))


def _is_int(value, lo):
    return isinstance(value, int) and not isinstance(value, bool) and value >= lo


def _load_yaml(path):
    text = Path(path).read_text()
    try:
        data = yaml.safe_load(text) or {}
    except yaml.YAMLError as err:
        raise UsageError(f"cannot parse config {path}: {err}") from None
    if not isinstance(data, dict):
        raise UsageError("config file must hold a mapping")
    return data


def _merge(cfg: RunConfig, data: dict):
    for key, value in data.items():
        if not hasattr(cfg, key):
            raise UsageError(f"unknown config key {key!r}")
        current = getattr(cfg, key)
        if isinstance(current, dict) and isinstance(value, dict):
            current.update(value)
        else:
            setattr(cfg, key, value)


_ENV_KEYS = {
    "SYSTEM": ("system", str), "ALPHA": ("alpha", float), "H": ("h", float),
    "HORIZON": ("horizon", int), "OUT": ("output_dir", str), "SEED": ("plan.seed", int),
    "M": ("plan.M", int), "N": ("plan.N", int), "BASIS_L": ("basis.L", int),
    "NOISE": ("noise.level", float), "NOISE_SEED": ("noise.seed", int),
}


def _set(cfg, dotted, value):
    if "." in dotted:
        head, key = dotted.split(".")
        if getattr(cfg, head) is None:
            setattr(cfg, head, {})
        getattr(cfg, head)[key] = value
    else:
        setattr(cfg, dotted, value)


def resolve_config(args, environ=None) -> RunConfig:
    environ = os.environ if environ is None else environ
    cfg = RunConfig()
    config_path = getattr(args, "config", None) or environ.get(ENV_PREFIX + "CONFIG")
    if config_path:
        _merge(cfg, _load_yaml(config_path))
    for suffix, (dotted, cast) in _ENV_KEYS.items():
        if ENV_PREFIX + suffix in environ:
            try:
                _set(cfg, dotted, cast(environ[ENV_PREFIX + suffix]))
            except ValueError:
                raise UsageError(f"cannot parse {ENV_PREFIX + suffix}={environ[ENV_PREFIX + suffix]!r}") from None
    flag_map = {
        "system": "system", "alpha": "alpha", "h": "h", "horizon": "horizon", "out": "output_dir",
        "seed": "plan.seed", "M": "plan.M", "N": "plan.N", "channel": "plan.channel",
        "basis_L": "basis.L", "drift_L": "basis.drift_L", "noise": "noise.level",
        "noise_seed": "noise.seed", "grid": "grid_density",
    }
    for attr, dotted in flag_map.items():
        value = getattr(args, attr, None)
        if value is not None:
            _set(cfg, dotted, value)
    if getattr(args, "input_range", None) is not None:
        cfg.plan["input_range"] = list(args.input_range)
    if getattr(args, "x0", None) is not None:
        cfg.x0 = args.x0
    return cfg.fill_defaults().validate()


def _floats(text):
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _default_x0(cfg, system):
    if cfg.x0 is not None:
        x0 = np.asarray(cfg.x0, dtype=float)
        if x0.shape != (system.state_dim,):
            raise UsageError(f"x0 needs {system.state_dim} components")
        return x0
    if isinstance(cfg.system, str) and cfg.system in PRESETS:
        return np.array(PRESETS[cfg.system].x0)
    return system.domain.mean(axis=1)


def _dataset(cfg, args, system):
    if getattr(args, "dataset", None):
        return ExperimentDataset.load(args.dataset)
    ds = generate_dataset(system, cfg.build_plan(), cfg.h)
    if cfg.noise is not None and cfg.noise.get("level", 0) > 0:
        ds = add_noise(ds, NoiseSpec(float(cfg.noise["level"]), int(cfg.noise["seed"])))
    return ds


def _learner(cfg, alpha=None):
    return FractionalDynamicsLearner(L=int(cfg.basis["L"]), drift_L=cfg.basis.get("drift_L"), alpha=alpha)


# -- commands ------------------------------------------------------------------

def cmd_simulate(cfg: RunConfig, args) -> int:
    system = cfg.build_system()
    x0 = _default_x0(cfg, system)
    traj = simulate(system, x0, None, cfg.horizon, cfg.h)
    out = Path(cfg.output_dir)
    traj.to_csv(out / "trajectory.csv")
    traj.to_json(out / "trajectory.json")
    print(f"wrote {traj.states.shape[0]} states to {out / 'trajectory.csv'}")
    return EXIT_OK


def cmd_generate(cfg: RunConfig, args) -> int:
    system = cfg.build_system()
    ds = _dataset(cfg, args, system)
    path = ds.save(Path(cfg.output_dir) / "dataset")
    print(f"wrote dataset M={ds.M} N={ds.N} to {path}")
    return EXIT_OK


def cmd_estimate_order(cfg: RunConfig, args) -> int:
    system = None if getattr(args, "dataset", None) else cfg.build_system()
    ds = _dataset(cfg, args, system)
    est = estimate_order(ds)
    write_json(est.to_dict(), Path(cfg.output_dir) / "order.json")
    print("alpha_hat = " + ", ".join(f"{a:.12g}" for a in est.alpha))
    return EXIT_OK


def cmd_learn(cfg: RunConfig, args) -> int:
    system = cfg.build_system()
    ds = _dataset(cfg, args, system)
    learner = _learner(cfg).fit(ds)
    out = Path(cfg.output_dir)
    learner.model_.to_json(out / "model.json")
    report = field_error_surface(system, learner.model_, cfg.grid_density)
    report.to_csv(out / "error_report.csv")
    write_json(report.summary(), out / "error_summary.json")
    print("alpha_hat = " + ", ".join(f"{a:.12g}" for a in learner.alpha_))
    print(f"drift max abs error {report.field_max('f'):.6g}, control max abs error {report.field_max('g'):.6g}")
    return EXIT_OK


def cmd_compare(cfg: RunConfig, args) -> int:
    out = Path(cfg.output_dir)
    if args.paper_suite:
        for name, orders in COMPARISON_ORDERS.items():
            for a in orders:
                r = run_benchmark(PRESETS[name], out / f"{name}_a{a:g}", a)
                print(f"{name} a={a:g}: max dev frac {r['max_dev_frac']:.6g}, int {r['max_dev_int']:.6g}")
        return EXIT_OK
    system = cfg.build_system()
    ds = _dataset(cfg, args, system)
    frac = _learner(cfg).fit(ds)
    integer = _learner(cfg, alpha=1.0).fit(ds)
    report = compare_responses(system, frac.model_, integer.model_, _default_x0(cfg, system),
                               horizon=cfg.horizon, h=cfg.h)
    report.to_csv(out / "comparison.csv")
    write_json(report.summary(), out / "comparison.json")
    print(f"max dev frac {report.max_dev_fractional:.6g}, int {report.max_dev_integer:.6g}")
    return EXIT_OK


def cmd_bench_paper(cfg: RunConfig, args) -> int:
    summary = run_suite(Path(cfg.output_dir))
    width = max(len(c["check"]) for c in summary["checks"])
    for c in summary["checks"]:
        print(f"{c['status']}  {c['check']:<{width}}  {c['value']}  (target {c['target']})")
    if summary["passed"] or not args.strict:
        return EXIT_OK
    return EXIT_NUMERICAL


COMMANDS = {
    "simulate": cmd_simulate,
    "generate": cmd_generate,
    "learn": cmd_learn,
    "estimate-order": cmd_estimate_order,
    "compare": cmd_compare,
    "bench-paper": cmd_bench_paper,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS, help="YAML run configuration")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="experiment seed")
    common.add_argument("--out", default=argparse.SUPPRESS, help="output directory")

    system = argparse.ArgumentParser(add_help=False)
    system.add_argument("--system", help=f"benchmark name ({', '.join(sorted(BENCHMARKS))})")
    system.add_argument("--alpha", type=float)
    system.add_argument("--h", type=float, help="step size (continuous systems)")

    plan = argparse.ArgumentParser(add_help=False)
    plan.add_argument("--M", type=int, help="number of initial conditions")
    plan.add_argument("--N", type=int, help="input trials per initial condition")
    plan.add_argument("--input-range", type=_floats)
    plan.add_argument("--channel", type=int, help="active input channel (1-based)")
    plan.add_argument("--noise", type=float, help="relative measurement noise level")
    plan.add_argument("--noise-seed", type=int)
    plan.add_argument("--dataset", help="load a saved dataset directory instead of generating")

    learn = argparse.ArgumentParser(add_help=False)
    learn.add_argument("--basis-L", type=int)
    learn.add_argument("--drift-L", type=int)
    learn.add_argument("--grid", type=int, help="error-surface points per axis")

    parser = argparse.ArgumentParser(prog="fracdyn", parents=[common],
                                     description="Simulate and learn fractional-order control-affine systems.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common, system], help="simulate one trajectory")
    p.add_argument("--horizon", type=int)
    p.add_argument("--x0", type=_floats)
    sub.add_parser("generate", parents=[common, system, plan], help="generate an experiment dataset")
    sub.add_parser("estimate-order", parents=[common, system, plan], help="estimate the fractional order")
    sub.add_parser("learn", parents=[common, system, plan, learn], help="learn order and vector fields")
    p = sub.add_parser("compare", parents=[common, system, plan, learn],
                       help="compare fractional and integer-order models")
    p.add_argument("--horizon", type=int)
    p.add_argument("--x0", type=_floats)
    p.add_argument("--paper-suite", action="store_true", help="run every benchmark comparison sweep")
    p = sub.add_parser("bench-paper", parents=[common], help="full benchmark reproduction")
    p.add_argument("--no-strict", dest="strict", action="store_false",
                   help="exit 0 even when a threshold check fails")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](cfg, args)
    except (UsageError, DomainError, ParameterError) as err:
        print(f"fracdyn: usage error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except (DatasetError, OSError) as err:
        print(f"fracdyn: data error: {err}", file=sys.stderr)
        return EXIT_DATA
    except (SimulationDiverged, IllPosedRegression, InconsistentData, InsufficientExcitation) as err:
        print(f"fracdyn: numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERICAL
    except FracDynError as err:
        print(f"fracdyn: {err}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
