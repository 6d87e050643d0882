"""Command-line front end: run, sweep, equiv-check, batch-study, plot.

Runs and sweeps are described by an INI-style config file (sections
``[problem]``, ``[optimizer]``, ``[run]``, ``[sweep]``) plus repeatable
``--set section.key=value`` overrides.  ``accelsgd --help-config`` (or any
subcommand's ``--help``) documents every key, its default, and its range.
Results land in ``--out`` (default: the ACCELSGD_OUTDIR environment
variable, else ``./accelsgd-out``).
"""

import argparse
import configparser
import dataclasses
import os
import sys
from pathlib import Path

import numpy as np

from . import equivalence, harness, problems
from .optimizers import ALGORITHMS, OptimizerConfig
from .schedules import (AlphaSchedule, AveragingSchedule, LearningRateSchedule,
                        MomentumSchedule)

ENV_OUTDIR = "ACCELSGD_OUTDIR"

# key -> (type, default, constraint description)
CONFIG_KEYS = {
    "problem": {
        "kind": (str, "quadratic", "one of quadratic | noisy-least-squares | logistic | mlp"),
        "dim": (int, 10, ">= 1; for mlp this is the input width"),
        "hess_low": (float, 0.1, "> 0; smallest Hessian eigenvalue (quadratic)"),
        "hess_high": (float, 1.0, ">= hess_low; largest Hessian eigenvalue (quadratic)"),
        "n_samples": (int, 256, ">= 1; dataset size (dataset problems)"),
        "batch_size": (int, 0, "0 = full batch, else in [1, n_samples]"),
        "label_noise": (float, 0.1, ">= 0; target noise (noisy-least-squares)"),
        "noise_sigma": (float, 0.0, ">= 0; additive gradient noise (quadratic)"),
        "hidden": (int, 16, ">= 1; hidden width (mlp)"),
        "target_noise": (float, 0.1, ">= 0; teacher noise (mlp)"),
        "seed": (int, 0, "dataset seed (independent of the run seed)"),
    },
    "optimizer": {
        "algorithm": (str, None, "one of " + " | ".join(ALGORITHMS)),
        "lr": (float, 1e-3, "> 0; peak learning rate"),
        "lr_kind": (str, "constant", "constant | cosine-with-warmup"),
        "lr_warmup": (int, 0, ">= 0 warmup steps; cosine requires <= steps"),
        "lr_floor": (float, 0.0, "in [0, lr]; cosine end value"),
        "beta1": (float, 0.9, "in [0, 1); schedule-free interpolation allows 1"),
        "beta1_kind": (str, "constant", "constant | one-minus-k-over-t | half-life-warmup"),
        "beta1_k": (float, 1.0, "> 0; k of 1 - k/t"),
        "beta1_start": (float, 0.9, "in (0, 1); half-life-warmup start"),
        "beta1_horizon": (int, 0, "0 = steps; half-life-warmup horizon"),
        "beta2": (float, 0.999, "in [0, 1)"),
        "beta3": (float, None, "in [0, 1); required by ademamix / accel-adam-avg"),
        "beta3_kind": (str, "constant", "constant | one-minus-k-over-t | half-life-warmup"),
        "beta3_k": (float, 1.0, "> 0"),
        "beta3_start": (float, 0.9, "in (0, 1)"),
        "beta3_horizon": (int, 0, "0 = steps"),
        "alpha": (float, 0.0, ">= 0; current-gradient weight"),
        "alpha_warmup": (int, 0, "0 = constant alpha, else linear warmup horizon"),
        "gamma": (float, 0.0, ">= 0; mars-approx correction scale"),
        "sf_r": (float, 0.0, ">= 0; schedule-free polynomial averaging power"),
        "averaging_kind": (str, "tailed", "uniform | tailed | as-written-max"),
        "averaging_delta": (float, 0.1, "in (0, 1]"),
        "eps": (float, 1e-8, "> 0"),
        "weight_decay": (float, 0.0, ">= 0; decoupled"),
        "bias_correction": (str, "default", "default | on | off"),
        "mars_clip": (bool, False, "clip the mars correction to unit norm"),
        "accel_from_sf": (bool, False, "accel-sgd: use the schedule-free image"),
    },
    "run": {
        "steps": (int, 1000, ">= 1"),
        "seed": (int, 0, "64-bit run seed"),
        "eval_every": (int, 0, "0 = steps/50; in [1, steps]"),
        "snapshot_every": (int, 0, "0 = none; must divide eval_every"),
        "w0_scale": (float, 1.0, "initial-point scale"),
    },
    "sweep": {
        "preset": (str, "", "catalog preset name (see --help-config)"),
        "repeats": (int, 1, ">= 1 seeds per cell (seeds 0..repeats-1)"),
        "budget": (int, 4096, "max cells x seeds"),
    },
}


class ConfigError(ValueError):
    pass


def _coerce(raw: str, typ, key: str):
    raw = raw.strip()
    try:
        if typ is bool:
            if raw.lower() in ("1", "true", "yes", "on"):
                return True
            if raw.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError
        return typ(raw)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r} as {typ.__name__}") from None


def read_config(path: str | Path, overrides=()) -> dict:
    """Parse the config file into {section: {key: value}} with defaults
    filled, then apply ``section.key=value`` overrides on top."""
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    parser.read(path)
    out: dict = {}
    for section, keys in CONFIG_KEYS.items():
        out[section] = {k: spec[1] for k, spec in keys.items()}
    grid: dict = {}
    for section in parser.sections():
        if section not in CONFIG_KEYS:
            raise ConfigError(f"unknown config section [{section}]")
        for key, raw in parser.items(section):
            if section == "sweep" and key.startswith("grid."):
                target = key[len("grid."):]
                _validate_grid_key(target)
                grid[target] = tuple(
                    _coerce(v, float, key) for v in raw.split(","))
                continue
            if key not in CONFIG_KEYS[section]:
                raise ConfigError(f"unknown key {section}.{key}")
            out[section][key] = _coerce(raw, _key_type(section, key), f"{section}.{key}")
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form section.key=value")
        dotted, raw = item.split("=", 1)
        if dotted.count(".") != 1:
            raise ConfigError(f"override key {dotted!r} must be section.key")
        section, key = dotted.split(".")
        if section not in CONFIG_KEYS or key not in CONFIG_KEYS[section]:
            raise ConfigError(f"unknown key {dotted}")
        out[section][key] = _coerce(raw, _key_type(section, key), dotted)
    out["sweep"]["grid"] = grid
    return out


def _key_type(section: str, key: str):
    return CONFIG_KEYS[section][key][0]


# config-file grid keys -> dotted RunSpec override paths (numeric optimizer
# hyperparameters only; schedule-shaped fields keep their kind, see
# harness.apply_override)
GRID_KEYS = {
    f"optimizer.{key}": f"optimizer.{key}"
    for key in ("lr", "beta1", "beta2", "beta3", "alpha", "gamma", "sf_r",
                "eps", "weight_decay")
}
GRID_KEYS["optimizer.averaging_delta"] = "optimizer.averaging.delta"


def _validate_grid_key(target: str):
    if target not in GRID_KEYS:
        raise ConfigError(f"grid key {target!r} is not sweepable; choose from "
                          + ", ".join(sorted(GRID_KEYS)))


def build_problem(cfg: dict) -> problems.Problem:
    p = cfg["problem"]
    kind = p["kind"]
    batch = p["batch_size"] or None
    if kind == "quadratic":
        noise = "additive-gaussian" if p["noise_sigma"] > 0 else "none"
        if batch:
            raise ConfigError("problem.batch_size: quadratic has no dataset; "
                              "use noise_sigma instead")
        return problems.quadratic(np.linspace(p["hess_low"], p["hess_high"],
                                              p["dim"]),
                                  noise=noise, noise_sigma=p["noise_sigma"])
    if kind == "noisy-least-squares":
        return problems.noisy_least_squares(n=p["n_samples"], d=p["dim"],
                                            batch_size=batch,
                                            label_noise=p["label_noise"],
                                            seed=p["seed"])
    if kind == "logistic":
        return problems.logistic(n=p["n_samples"], d=p["dim"],
                                 batch_size=batch, seed=p["seed"])
    if kind == "mlp":
        return problems.mlp(n_in=p["dim"], n_hidden=p["hidden"],
                            n_samples=p["n_samples"], batch_size=batch,
                            target_noise=p["target_noise"], seed=p["seed"])
    raise ConfigError(f"problem.kind: unknown kind {kind!r}")


def _momentum_field(o: dict, prefix: str, steps: int):
    kind = o[f"{prefix}_kind"]
    value = o[prefix]
    if kind == "constant":
        return value
    if kind == "one-minus-k-over-t":
        return MomentumSchedule(kind=kind, k=o[f"{prefix}_k"])
    if kind == "half-life-warmup":
        if value is None:
            raise ConfigError(f"optimizer.{prefix}: required for half-life-warmup")
        horizon = o[f"{prefix}_horizon"] or steps
        return MomentumSchedule(kind=kind, base=value,
                                beta_start=o[f"{prefix}_start"],
                                warmup_horizon=horizon)
    raise ConfigError(f"optimizer.{prefix}_kind: unknown kind {kind!r}")


def build_optimizer(cfg: dict, steps: int) -> OptimizerConfig:
    o = cfg["optimizer"]
    algorithm = o["algorithm"]
    if algorithm is None:
        raise ConfigError("optimizer.algorithm: required")
    if algorithm not in ALGORITHMS:
        raise ConfigError(f"optimizer.algorithm: unknown algorithm {algorithm!r}")
    if algorithm in ("ademamix", "accel-adam-avg") and o["beta3"] is None:
        raise ConfigError(f"optimizer.beta3: required for algorithm={algorithm}")
    if o["lr_kind"] == "constant":
        lr = (LearningRateSchedule(kind="constant", peak=o["lr"],
                                   warmup_steps=o["lr_warmup"])
              if o["lr_warmup"] else o["lr"])
    elif o["lr_kind"] == "cosine-with-warmup":
        lr = LearningRateSchedule(kind="cosine-with-warmup", peak=o["lr"],
                                  warmup_steps=o["lr_warmup"],
                                  total_steps=steps, floor=o["lr_floor"])
    else:
        raise ConfigError(f"optimizer.lr_kind: unknown kind {o['lr_kind']!r}")
    alpha = (AlphaSchedule(kind="linear-warmup", target=o["alpha"],
                           warmup_horizon=o["alpha_warmup"])
             if o["alpha_warmup"] else o["alpha"])
    bias = {"default": None, "on": True, "off": False}.get(o["bias_correction"])
    if o["bias_correction"] not in ("default", "on", "off"):
        raise ConfigError("optimizer.bias_correction: must be default | on | off")
    try:
        return OptimizerConfig(
            algorithm=algorithm, lr=lr,
            beta1=_momentum_field(o, "beta1", steps),
            beta2=o["beta2"],
            beta3=_momentum_field(o, "beta3", steps) if o["beta3"] is not None else None,
            alpha=alpha, gamma=o["gamma"], sf_r=o["sf_r"],
            averaging=AveragingSchedule(kind=o["averaging_kind"],
                                        delta=o["averaging_delta"]),
            eps=o["eps"], weight_decay=o["weight_decay"],
            bias_correction=bias, mars_clip=o["mars_clip"],
            accel_from_sf=o["accel_from_sf"])
    except ValueError as exc:
        raise ConfigError(f"optimizer: {exc}") from exc


def parse_config(path: str | Path, overrides=()) -> tuple[str, object]:
    """Resolve a config file into a RunSpec or SweepSpec.

    Returns ("sweep", SweepSpec) when the file has a preset or grid in its
    [sweep] section, otherwise ("run", RunSpec).
    """
    cfg = read_config(path, overrides)
    r = cfg["run"]
    steps = r["steps"]
    if steps < 1:
        raise ConfigError("run.steps: must be >= 1")
    problem = build_problem(cfg)
    eval_every = r["eval_every"] or max(1, steps // 50)
    s = cfg["sweep"]
    seeds = tuple(range(s["repeats"]))
    if s["preset"]:
        # the preset supplies the optimizer; the [optimizer] section is unused
        try:
            return "sweep", harness.build_preset(
                s["preset"], problem, steps, seeds, eval_every=eval_every,
                budget=s["budget"])
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"sweep.preset: {exc}") from exc
    try:
        spec = harness.RunSpec(
            problem=problem, optimizer=build_optimizer(cfg, steps),
            steps=steps, seed=r["seed"], eval_every=eval_every,
            snapshot_every=r["snapshot_every"] or None,
            w0_scale=r["w0_scale"])
    except ValueError as exc:
        raise ConfigError(f"run: {exc}") from exc
    if s["grid"]:
        grid = {GRID_KEYS[k]: v for k, v in s["grid"].items()}
        try:
            return "sweep", harness.SweepSpec(base=spec, grid=grid,
                                              seeds=seeds, budget=s["budget"])
        except ValueError as exc:
            raise ConfigError(f"sweep: {exc}") from exc
    return "run", spec


def config_help() -> str:
    lines = ["Config file keys (INI sections; defaults in brackets):", ""]
    for section, keys in CONFIG_KEYS.items():
        lines.append(f"[{section}]")
        for key, (typ, default, doc) in keys.items():
            lines.append(f"  {key:<18} [{default!r:>8}]  {doc}")
        lines.append("")
    lines.append("[sweep] also accepts grid.optimizer.<key> = v1, v2, ... for "
                 "the numeric optimizer keys\n(lr, beta1, beta2, beta3, alpha, "
                 "gamma, sf_r, eps, weight_decay, averaging_delta).")
    lines.append("")
    lines.append("Sweep presets: " + ", ".join(sorted(harness.PRESETS)))
    lines.append("")
    lines.append(f"Output directory: --out, else ${ENV_OUTDIR}, "
                 "else ./accelsgd-out")
    return "\n".join(lines)


def emit_plot(records, out_base: str | Path, style: str = "curves",
              log_loss: bool = True) -> tuple[Path, Path]:
    """Write a loss-vs-step SVG and the exact plotted data as CSV.

    ``records`` is a list of (label, rows) pairs; ``style`` is ``curves``
    (one curve per record) or ``best-per-optimizer`` (lowest final full loss
    per label).  Identical inputs produce byte-identical files.
    """
    if not records:
        raise ValueError("no records to plot")
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    matplotlib.rcParams["svg.hashsalt"] = "accelsgd"

    if style == "best-per-optimizer":
        best: dict[str, list] = {}
        for label, rows in records:
            if label not in best or rows[-1][2] < best[label][-1][2]:
                best[label] = rows
        series = sorted(best.items())
    elif style == "curves":
        series = list(records)
    else:
        raise ValueError(f"unknown plot style {style!r}")

    out_base = Path(out_base)
    out_base.parent.mkdir(parents=True, exist_ok=True)
    csv_path = out_base.with_suffix(".csv")
    lines = ["label,step,full_loss"]
    for label, rows in series:
        for r in rows:
            lines.append(f"{label},{r[0]},{r[2]!r}")
    csv_path.write_text("\n".join(lines) + "\n")

    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    for label, rows in series:
        ax.plot([r[0] for r in rows], [r[2] for r in rows], label=str(label))
    ax.set_xlabel("step")
    ax.set_ylabel("full_loss")
    if log_loss:
        ax.set_yscale("log")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    svg_path = out_base.with_suffix(".svg")
    fig.savefig(svg_path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return svg_path, csv_path


def _out_dir(args) -> Path:
    if args.out:
        return Path(args.out)
    return Path(os.environ.get(ENV_OUTDIR, "accelsgd-out"))


def _cmd_run(args) -> int:
    mode, spec = parse_config(args.config, args.set or [])
    if mode != "run":
        print("error: config describes a sweep; use the sweep subcommand",
              file=sys.stderr)
        return 2
    if args.seed is not None:
        spec = harness.apply_override(spec, "seed", args.seed)
    out = _out_dir(args)
    record = harness.run(spec, out)
    status = "aborted" if record.aborted else "ok"
    print(f"run {record.spec_hash}: {status}, {len(record.rows)} rows, "
          f"final full loss {record.final_full_loss!r} "
          f"({record.wall_time:.2f}s) -> {out}")
    return 1 if record.aborted else 0


def _cmd_sweep(args) -> int:
    mode, spec = parse_config(args.config, args.set or [])
    if mode != "sweep":
        print("error: config has no [sweep] preset or grid", file=sys.stderr)
        return 2
    if args.seed is not None:
        # shift the whole seed block, keeping one seed per repeat
        spec = dataclasses.replace(
            spec, seeds=tuple(args.seed + i for i in range(len(spec.seeds))))
    out = _out_dir(args)
    result = harness.sweep(spec, out)
    for cell in result.cells:
        mark = "ABORTED" if cell.aborted else f"{cell.mean_final_loss!r}"
        print(f"cell {cell.index}: {cell.overrides} -> {mark}")
    if result.best_index is None:
        print("no successful cells")
        return 1
    print(f"best cell: {result.best_index} {result.best.overrides} "
          f"mean final full loss {result.best.mean_final_loss!r}")
    print(f"manifest -> {out / 'manifest.txt'}")
    return 0


def _cmd_equiv_check(args) -> int:
    params = {}
    for item in args.set or []:
        if "=" not in item:
            print(f"error: bad --set {item!r}", file=sys.stderr)
            return 2
        key, raw = item.split("=", 1)
        params[key.strip()] = float(raw)
    try:
        results = equivalence.run_named_check(
            args.mapping, params=params, horizon=args.horizon,
            tolerance=args.tolerance, seed=args.seed or 0)
    except equivalence.SingularMappingError as exc:
        print(f"FAIL {args.mapping}: {exc}")
        return 1
    ok = True
    for label, diff in results:
        verdict = "PASS" if diff.ok else "FAIL"
        ok = ok and diff.ok
        print(f"{verdict} {args.mapping}/{label}: max_abs_gap={diff.max_abs_gap:.3e} "
              f"max_rel_gap={diff.max_rel_gap:.3e} "
              f"first_divergence_step={diff.first_divergence_step}")
    return 0 if ok else 1


def _cmd_batch_study(args) -> int:
    seeds = tuple(range(args.repeats))
    factory = harness.default_study_problem(d=args.dim, n=args.n_samples,
                                            label_noise=args.label_noise,
                                            seed=args.problem_seed)
    batch_sizes = [int(b) if int(b) > 0 else args.n_samples
                   for b in args.batch_sizes]
    entrants = [(name, f"{name}-desk") for name in ("accel-sgd", "sgd-momentum")]
    result = harness.batch_size_study(factory, entrants, batch_sizes, seeds,
                                      steps=args.steps, out_dir=_out_dir(args))
    print(result.table())
    return 0


def _cmd_plot(args) -> int:
    records = []
    for path in args.csv:
        rows = harness.load_rows(path)
        meta = harness.load_meta(path)
        label = meta.get("algorithm", Path(path).stem)
        records.append((label, rows))
    try:
        svg, csv = emit_plot(records, Path(args.out_base),
                             style=args.style, log_loss=not args.linear)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {svg} and {csv}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="accelsgd",
        description="Momentum-family optimizers, sweeps, and equivalence checks "
                    "on synthetic problems.",
        epilog=config_help(),
        formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", required=True, help="INI config file")
            p.add_argument("--set", action="append", metavar="SECTION.KEY=V",
                           help="override a config key (repeatable)")
        p.add_argument("--out", help=f"output directory (default ${ENV_OUTDIR} "
                                     "or ./accelsgd-out)")
        p.add_argument("--seed", type=int, help="run seed override")

    p_run = sub.add_parser("run", help="execute one seeded run",
                           epilog=config_help(),
                           formatter_class=argparse.RawDescriptionHelpFormatter)
    common(p_run)
    p_run.set_defaults(fn=_cmd_run)

    p_sweep = sub.add_parser("sweep", help="run a hyperparameter grid",
                             epilog=config_help(),
                             formatter_class=argparse.RawDescriptionHelpFormatter)
    common(p_sweep)
    p_sweep.set_defaults(fn=_cmd_sweep)

    p_eq = sub.add_parser("equiv-check",
                          help="dual-simulate a coefficient mapping")
    p_eq.add_argument("mapping", choices=list(equivalence.NAMED_CHECKS))
    p_eq.add_argument("--horizon", type=int, help="steps to simulate")
    p_eq.add_argument("--tolerance", type=float,
                      help="max relative trajectory gap")
    p_eq.add_argument("--seed", type=int, default=0)
    p_eq.add_argument("--set", action="append", metavar="KEY=V",
                      help="mapping parameter override, e.g. beta=0.9")
    p_eq.set_defaults(fn=_cmd_equiv_check)

    p_bs = sub.add_parser("batch-study",
                          help="small- vs large-batch comparison of tuned "
                               "accelerated SGD against momentum SGD")
    p_bs.add_argument("--batch-sizes", nargs="+", default=["1", "0"],
                      help="batch sizes; 0 means the full dataset")
    p_bs.add_argument("--steps", type=int, default=20_000)
    p_bs.add_argument("--repeats", type=int, default=10, help="seeds per cell")
    p_bs.add_argument("--dim", type=int, default=100)
    p_bs.add_argument("--n-samples", type=int, default=120)
    p_bs.add_argument("--label-noise", type=float, default=0.5)
    p_bs.add_argument("--problem-seed", type=int, default=7)
    p_bs.add_argument("--out")
    p_bs.set_defaults(fn=_cmd_batch_study)

    p_plot = sub.add_parser("plot", help="loss-vs-step figure from record CSVs")
    p_plot.add_argument("csv", nargs="+", help="run record CSV files")
    p_plot.add_argument("--out-base", required=True,
                        help="output path without extension")
    p_plot.add_argument("--style", choices=("curves", "best-per-optimizer"),
                        default="curves")
    p_plot.add_argument("--linear", action="store_true",
                        help="linear instead of log loss axis")
    p_plot.set_defaults(fn=_cmd_plot)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
