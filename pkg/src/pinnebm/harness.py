"""Config-driven experiment runner with seeded replicas and sweeps.

An experiment is a grid of (sweep value x variant x replica) training
runs. Each run gets its own noise realization and seed, is trained and
scored, and contributes one detail row to results.csv; mean +/- sample-std
rows per (sweep value, variant) go to aggregate.csv. Per-run artifacts
(learning curves, learned noise density, predictions, parameters) land in
run subdirectories for plotting.

Config files are line-oriented `key = value` with `#` comments; CLI
overrides take precedence.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import csv
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import ebm as ebm_mod
from . import metrics as metrics_mod
from . import noise as noise_mod
from . import problems as prob_mod
from .autodiff import ParamLayout, ParamVector
from .network import save_params
from .trainer import TrainConfig, Variant, train


class ConfigError(ValueError):
    """Bad experiment configuration (names the key and its source line)."""


# per-problem factor on the noise scale, so "strength 1" is comparable
# across problems of very different solution magnitudes
BASE_NOISE_SCALE = {"exp": 1.0, "bessel": 0.03, "ns": 0.05}

SWEEPABLE = ("omega", "n_data", "f_n")

ALL_VARIANTS = tuple(v.value for v in Variant)


@dataclass
class ExperimentConfig:
    problem: str = "exp"
    noise: str = "3G"
    f_n: float = 1.0
    n_data: int = 200
    n_val: int = 200
    n_colloc: int = 2000
    variants: tuple = ALL_VARIANTS
    n_total: int = 40_000
    i_ebm: int = 4_000
    n_ebm: int = 2_000
    omega: float = 1.0
    lr: float = 0.002
    lr_decay_factor: float | None = None
    lr_decay_at: int | None = None
    batch_data: int | None = None
    batch_colloc: int = 100
    curve_stride: int = 100
    pinn_hidden: int = 4
    pinn_width: int = 40
    n_replicas: int = 1
    base_seed: int = 0
    sweep: str | None = None
    sweep_values: tuple = ()
    ns_data: str | None = None
    outdir: str = "results"

    def validate(self):
        if self.problem not in ("exp", "bessel", "ns"):
            raise ConfigError(f"unknown problem {self.problem!r}")
        if self.n_replicas < 1:
            raise ConfigError("n_replicas must be >= 1")
        for v in self.variants:
            Variant(v)  # raises on unknown names
        if self.sweep is not None:
            if self.sweep not in SWEEPABLE:
                raise ConfigError(
                    f"sweep must be one of {', '.join(SWEEPABLE)}, got {self.sweep!r}"
                )
            if not self.sweep_values:
                raise ConfigError("sweep requires sweep_values")
            if any(v <= 0 for v in self.sweep_values):
                raise ConfigError("sweep values must be positive")
        if self.sweep is None and self.sweep_values:
            raise ConfigError("sweep_values given without a sweep key")
        if self.problem == "ns" and self.ns_data is None:
            raise ConfigError("the ns problem needs ns_data = <csv path>")
        if (self.lr_decay_factor is None) != (self.lr_decay_at is None):
            raise ConfigError("lr_decay_factor and lr_decay_at go together")
        make_noise_checked(self.noise)

    def train_config(self, seed, omega):
        decay = None
        if self.lr_decay_factor is not None:
            decay = (self.lr_decay_factor, self.lr_decay_at)
        return TrainConfig(
            n_total=self.n_total,
            i_ebm=self.i_ebm,
            n_ebm=self.n_ebm,
            omega=omega,
            lr=self.lr,
            lr_decay=decay,
            batch_data=self.batch_data,
            batch_colloc=self.batch_colloc,
            seed=seed,
            curve_stride=self.curve_stride,
            pinn_hidden=self.pinn_hidden,
            pinn_width=self.pinn_width,
        )


def make_noise_checked(kind):
    try:
        return noise_mod.make_noise(kind)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


# -- config parsing -----------------------------------------------------------

def _to_opt_str(raw):
    return None if raw.lower() == "none" else raw


def _to_int(raw):
    return int(raw)


def _to_opt_int(raw):
    return None if raw.lower() == "none" else int(raw)


def _to_float(raw):
    return float(raw)


def _to_opt_float(raw):
    return None if raw.lower() == "none" else float(raw)


def _to_str_tuple(raw):
    return tuple(p.strip() for p in raw.split(",") if p.strip())


def _to_float_tuple(raw):
    return tuple(float(p) for p in raw.split(",") if p.strip())


_PARSERS = {
    "problem": str,
    "noise": str,
    "f_n": _to_float,
    "n_data": _to_int,
    "n_val": _to_int,
    "n_colloc": _to_int,
    "variants": _to_str_tuple,
    "n_total": _to_int,
    "i_ebm": _to_int,
    "n_ebm": _to_int,
    "omega": _to_float,
    "lr": _to_float,
    "lr_decay_factor": _to_opt_float,
    "lr_decay_at": _to_opt_int,
    "batch_data": _to_opt_int,
    "batch_colloc": _to_int,
    "curve_stride": _to_int,
    "pinn_hidden": _to_int,
    "pinn_width": _to_int,
    "n_replicas": _to_int,
    "base_seed": _to_int,
    "sweep": _to_opt_str,
    "sweep_values": _to_float_tuple,
    "ns_data": str,
    "outdir": str,
}


def _apply_item(config, key, raw, where):
    parser = _PARSERS.get(key)
    if parser is None:
        raise ConfigError(f"{where}: unknown key {key!r}")
    try:
        value = parser(raw)
    except ValueError as exc:
        raise ConfigError(f"{where}: bad value for {key!r}: {exc}") from None
    setattr(config, key, value)


def parse_config(path, overrides=()) -> ExperimentConfig:
    """Read a `key = value` file, apply `key=value` CLI overrides, validate."""
    config = ExperimentConfig()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected `key = value`")
            key, raw = (s.strip() for s in line.split("=", 1))
            _apply_item(config, key, raw, f"{path}:{lineno}")
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r}: expected key=value")
        key, raw = (s.strip() for s in item.split("=", 1))
        _apply_item(config, key, raw, f"override {item!r}")
    config.validate()
    return config


# -- running ------------------------------------------------------------------

@dataclass
class RunTask:
    config: ExperimentConfig
    sweep_value: float | None
    variant: str
    replica: int

    @property
    def seed(self):
        return self.config.base_seed + self.replica

    def effective(self):
        """(omega, n_data, f_n) with the sweep value substituted in."""
        omega, n_data, f_n = self.config.omega, self.config.n_data, self.config.f_n
        if self.config.sweep == "omega":
            omega = self.sweep_value
        elif self.config.sweep == "n_data":
            n_data = int(self.sweep_value)
        elif self.config.sweep == "f_n":
            f_n = self.sweep_value
        return omega, n_data, f_n

    def run_dir_name(self):
        parts = []
        if self.sweep_value is not None:
            parts.append(f"{self.config.sweep}{self.sweep_value:g}")
        parts.append(self.variant)
        parts.append(f"s{self.seed}")
        return "_".join(parts)


def build_tasks(config: ExperimentConfig):
    values = list(config.sweep_values) if config.sweep else [None]
    return [
        RunTask(config, value, variant, replica)
        for value in values
        for variant in config.variants
        for replica in range(config.n_replicas)
    ]


def build_dataset(config, n_data, f_n, seed):
    problem = prob_mod.problem_by_name(config.problem)
    spec = noise_mod.make_noise(
        config.noise, base_scale=BASE_NOISE_SCALE[config.problem], strength=f_n
    )
    # independent stream from the training seed, so data and initialization
    # randomness never share draws
    rng = np.random.default_rng([seed, 1])
    if config.problem == "ns":
        dataset = prob_mod.load_external_dataset(
            config.ns_data, spec, n_data, config.n_val, config.n_colloc, rng
        )
    else:
        dataset = prob_mod.synth_dataset(
            problem, spec, n_data, config.n_val, config.n_colloc, rng
        )
    return problem, dataset


def run_task(task: RunTask):
    """Train and score one run; returns a results.csv detail row (dict)."""
    omega, n_data, f_n = task.effective()
    row = {
        "sweep": task.config.sweep or "",
        "sweep_value": "" if task.sweep_value is None else repr(task.sweep_value),
        "variant": task.variant,
        "replica": task.replica,
        "seed": task.seed,
        "status": "ok",
    }
    try:
        problem, dataset = build_dataset(task.config, n_data, f_n, task.seed)
        result = train(
            problem, dataset, task.variant, task.config.train_config(task.seed, omega)
        )
        scored = metrics_mod.evaluate(problem, dataset, result)
        for i, v in enumerate(result.lam):
            row[f"lam{i}"] = repr(float(v))
        row["theta0"] = "" if result.theta0 is None else repr(result.theta0)
        row.update({k: repr(v) for k, v in scored.as_row().items()})
        run_dir = Path(task.config.outdir) / "runs" / task.run_dir_name()
        export_artifacts(result, problem, dataset, run_dir)
    except Exception as exc:  # noqa: BLE001 - a replica failure must not kill the grid
        row["status"] = f"{type(exc).__name__}: {exc}"
    return row


def detail_fieldnames(problem):
    names = ["sweep", "sweep_value", "variant", "replica", "seed", "status"]
    names += [f"lam{i}" for i in range(problem.lambda_dim)]
    names.append("theta0")
    names += [f"dlam{i}_pct" for i in range(problem.lambda_dim)]
    names += ["rmse", "nll", "f2"]
    return names


def metric_fieldnames(problem):
    return [f"dlam{i}_pct" for i in range(problem.lambda_dim)] + ["rmse", "nll", "f2"]


def aggregate_rows(rows, problem):
    """One mean +/- std row per (sweep value, variant), skipping failures."""
    metric_names = metric_fieldnames(problem)
    groups = {}
    for row in rows:
        groups.setdefault((row["sweep_value"], row["variant"]), []).append(row)
    out = []
    for (sweep_value, variant), group in groups.items():
        ok = [r for r in group if r["status"] == "ok"]
        agg = {
            "sweep": group[0]["sweep"],
            "sweep_value": sweep_value,
            "variant": variant,
            "n_ok": len(ok),
            "n_failed": len(group) - len(ok),
        }
        for name in metric_names:
            if ok:
                mean, std = metrics_mod.aggregate([float(r[name]) for r in ok])
                agg[f"{name}_mean"] = repr(mean)
                agg[f"{name}_std"] = repr(std)
            else:
                agg[f"{name}_mean"] = ""
                agg[f"{name}_std"] = ""
        out.append(agg)
    return out


def _write_csv(path, fieldnames, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames)
        writer.writeheader()
        writer.writerows(rows)


def export_artifacts(result, problem, dataset, run_dir):
    """curves.csv, prediction.csv, params.bin, and pdf.csv when an EBM exists."""
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)

    curve_rows = [
        {f: repr(float(v)) for f, v in zip(result.curve_fields, row)}
        for row in result.curves
    ]
    _write_csv(run_dir / "curves.csv", list(result.curve_fields), curve_rows)

    if result.ebm is not None:
        eps, dens = ebm_mod.pdf_on_grid(result.ebm)
        _write_csv(
            run_dir / "pdf.csv",
            ["eps", "density"],
            [{"eps": repr(float(e)), "density": repr(float(d))}
             for e, d in zip(eps, dens)],
        )

    _write_prediction_csv(run_dir / "prediction.csv", result, problem, dataset)
    save_params(run_dir / "params.bin", _export_params(result))


def _export_params(result):
    entries = [("pinn." + n, s) for n, s in result.pinn.params.layout.entries]
    entries.append(("lam", result.lam.shape))
    if result.theta0 is not None:
        entries.append(("theta0", (1,)))
    if result.ebm is not None:
        entries += [("ebm." + n, s) for n, s in result.ebm.net.params.layout.entries]
    pv = ParamVector(ParamLayout(entries))
    for name in result.pinn.params.layout.names():
        pv.view("pinn." + name)[...] = result.pinn.params.view(name)
    pv.view("lam")[...] = result.lam
    if result.theta0 is not None:
        pv.view("theta0")[...] = result.theta0
    if result.ebm is not None:
        for name in result.ebm.net.params.layout.names():
            pv.view("ebm." + name)[...] = result.ebm.net.params.view(name)
    return pv


def _write_prediction_csv(path, result, problem, dataset):
    pred = prob_mod.predict_measured(problem, result.pinn, dataset.t_val)
    n = dataset.t_val.shape[0]
    if problem.kind in ("exp", "bessel"):
        order = np.argsort(dataset.t_val[:, 0])
        fields = ["t", "x_hat", "x_true", "y"]
        rows = [
            {
                "t": repr(float(dataset.t_val[i, 0])),
                "x_hat": repr(float(pred[i, 0])),
                "x_true": repr(float(dataset.x_val_true[i, 0])),
                "y": repr(float(dataset.y_val[i, 0])),
            }
            for i in order
        ]
    else:
        fields = ["t", "x", "y",
                  "u_hat", "v_hat", "u_true", "v_true", "u_meas", "v_meas"]
        rows = [
            {
                "t": repr(float(dataset.t_val[i, 0])),
                "x": repr(float(dataset.t_val[i, 1])),
                "y": repr(float(dataset.t_val[i, 2])),
                "u_hat": repr(float(pred[i, 0])),
                "v_hat": repr(float(pred[n + i, 0])),
                "u_true": repr(float(dataset.x_val_true[i, 0])),
                "v_true": repr(float(dataset.x_val_true[i, 1])),
                "u_meas": repr(float(dataset.y_val[i, 0])),
                "v_meas": repr(float(dataset.y_val[i, 1])),
            }
            for i in range(n)
        ]
    _write_csv(path, fields, rows)


def run_experiment(config: ExperimentConfig, workers=1):
    """Run the whole grid; returns (detail rows, aggregate rows).

    Writes results.csv and aggregate.csv under config.outdir. Rows appear
    in task order regardless of worker completion order."""
    config.validate()
    problem = prob_mod.problem_by_name(config.problem)
    outdir = Path(config.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    tasks = build_tasks(config)

    if workers > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(run_task, tasks))
    else:
        rows = [run_task(task) for task in tasks]

    agg = aggregate_rows(rows, problem)
    detail_fields = detail_fieldnames(problem)
    rows = [{f: r.get(f, "") for f in detail_fields} for r in rows]
    _write_csv(outdir / "results.csv", detail_fields, rows)
    agg_fields = ["sweep", "sweep_value", "variant", "n_ok", "n_failed"]
    for name in metric_fieldnames(problem):
        agg_fields += [f"{name}_mean", f"{name}_std"]
    _write_csv(outdir / "aggregate.csv", agg_fields, agg)
    return rows, agg


# -- CLI ----------------------------------------------------------------------

def build_arg_parser():
    parser = argparse.ArgumentParser(
        prog="pinnebm",
        description="Train PDE-constrained networks under unknown noise "
        "and export table/plot CSVs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    run_p = sub.add_parser("run", help="run the experiment grid from a config file")
    run_p.add_argument("--config", required=True, help="path to a key = value file")
    run_p.add_argument(
        "--override", action="append", default=[], metavar="KEY=VALUE",
        help="override a config key (repeatable)",
    )
    run_p.add_argument("--workers", type=int, default=1,
                       help="parallel replicas (default 1)")
    run_p.add_argument("--outdir", default=None,
                       help="output directory (overrides config)")
    return parser


def main(argv=None):
    args = build_arg_parser().parse_args(argv)
    try:
        config = parse_config(args.config, args.override)
        if args.outdir is not None:
            config.outdir = args.outdir
        if args.workers < 1:
            raise ConfigError("workers must be >= 1")
        rows, agg = run_experiment(config, workers=args.workers)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    n_failed = sum(1 for r in rows if r["status"] != "ok")
    print(f"{len(rows)} runs ({n_failed} failed); "
          f"results in {Path(config.outdir).resolve()}")
    return 0 if n_failed == 0 else 1


if __name__ == "__main__":
    sys.exit(main())
