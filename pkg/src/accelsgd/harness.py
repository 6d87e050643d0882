"""Seeded runs, hyperparameter sweeps, and result persistence.

A run is a pure function of its RunSpec: the initial point, every stochastic
gradient, and the evaluation-loss draws all come from counter-based streams
keyed by (seed, step, purpose), so re-executing a spec reproduces the record
byte for byte.  Metric rows always evaluate loss at the algorithm's
designated evaluation point (x for schedule-free, the running average for
averaging Adam), never unconditionally at the raw iterate.

Records persist as CSV with header ``step,train_loss,full_loss,update_norm,
lr,momentum`` in files named ``<spec-hash>.csv``, one per run, with a
``<spec-hash>.meta.txt`` key-value sidecar (algorithm, seed, abort flag).
Sweeps additionally write a ``manifest.txt`` listing cells, per-cell
statistics, and the best-cell selection.

Runs are independent units: distinct (config, seed) cells share no mutable
state and could be dispatched concurrently; this implementation executes
them sequentially, which keeps records deterministic with no merge step.
"""

import dataclasses
import hashlib
import itertools
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import optimizers
from .optimizers import (NonFiniteUpdateError, OptimizerConfig, eval_point,
                         init_state, momentum_coefficient, query_point, step)
from .problems import Problem, full_loss, noisy_least_squares, sample_gradient
from .rng import StreamPool, stream
from .schedules import (AlphaSchedule, AveragingSchedule, LearningRateSchedule,
                        MomentumSchedule)

CSV_HEADER = "step,train_loss,full_loss,update_norm,lr,momentum"


@dataclass(frozen=True)
class RunSpec:
    problem: Problem
    optimizer: OptimizerConfig
    steps: int
    seed: int
    eval_every: int = 100
    snapshot_every: int | None = None
    w0_scale: float = 1.0

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if not 1 <= self.eval_every <= self.steps:
            raise ValueError("eval_every must lie in [1, steps]")
        if self.snapshot_every is not None:
            if self.snapshot_every < 1:
                raise ValueError("snapshot_every must be >= 1")
            if self.eval_every % self.snapshot_every != 0:
                raise ValueError("snapshot cadence must divide eval cadence")


def _canonical(obj):
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        out = {"__type__": type(obj).__name__}
        for f in dataclasses.fields(obj):
            out[f.name] = _canonical(getattr(obj, f.name))
        return out
    if isinstance(obj, np.ndarray):
        digest = hashlib.sha256(np.ascontiguousarray(obj).tobytes()).hexdigest()
        return {"__ndarray__": digest, "shape": list(obj.shape)}
    if isinstance(obj, dict):
        return {str(k): _canonical(v) for k, v in sorted(obj.items())}
    if isinstance(obj, (list, tuple)):
        return [_canonical(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    return obj


def spec_hash(spec) -> str:
    """Stable digest of a spec; determines record file names."""
    blob = json.dumps(_canonical(spec), sort_keys=True)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


@dataclass
class RunRecord:
    spec_hash: str
    algorithm: str
    seed: int
    rows: list[tuple]                  # (step, train, full, unorm, lr, momentum)
    final_params: np.ndarray
    wall_time: float
    aborted: tuple[int, str] | None = None
    snapshots: list[tuple[int, np.ndarray]] = field(default_factory=list)

    @property
    def final_full_loss(self) -> float:
        if not self.rows:
            return float("nan")
        return self.rows[-1][2]

    def csv_text(self) -> str:
        lines = [CSV_HEADER]
        for r in self.rows:
            lines.append(f"{r[0]},{r[1]!r},{r[2]!r},{r[3]!r},{r[4]!r},{r[5]!r}")
        return "\n".join(lines) + "\n"


def initial_point(spec: RunSpec) -> np.ndarray:
    return spec.w0_scale * stream(spec.seed, 0, "init").standard_normal(spec.problem.dim)


def run(spec: RunSpec, out_dir: str | Path | None = None) -> RunRecord:
    """Execute one seeded run.

    Gradients are queried at the optimizer's designated query point (y for
    schedule-free algorithms); metrics are recorded every ``eval_every``
    steps and always at step T.  A non-finite gradient or update aborts the
    run; the partial record is kept and flagged.
    """
    problem, config = spec.problem, spec.optimizer
    if problem.dim < 1:
        raise ValueError("empty problem")
    started = time.perf_counter()
    state = init_state(config, initial_point(spec))
    rows: list[tuple] = []
    snapshots: list[tuple[int, np.ndarray]] = []
    aborted = None
    pool = StreamPool()
    for t in range(1, spec.steps + 1):
        q = query_point(state, config)
        sample = sample_gradient(problem, q, pool.use(spec.seed, t, "grad"))
        try:
            report = step(state, sample.gradient, config)
        except NonFiniteUpdateError as exc:
            aborted = (exc.step, str(exc))
            break
        if t % spec.eval_every == 0 or t == spec.steps:
            ep = eval_point(state)
            train = sample_gradient(problem, ep, pool.use(spec.seed, t, "eval")).loss
            row = (t, float(train), full_loss(problem, ep),
                   report.update_norm,
                   optimizers._lr(config.lr, t),
                   momentum_coefficient(config, t))
            if not all(np.isfinite(v) for v in row[1:]):
                # finite updates can still overflow the recorded losses;
                # rows must stay finite unless the run is flagged
                aborted = (t, f"non-finite metrics at step {t}")
                break
            rows.append(row)
        if spec.snapshot_every is not None and t % spec.snapshot_every == 0:
            snapshots.append((t, eval_point(state).copy()))
    record = RunRecord(spec_hash=spec_hash(spec), algorithm=config.algorithm,
                       seed=spec.seed, rows=rows,
                       final_params=eval_point(state).copy(),
                       wall_time=time.perf_counter() - started,
                       aborted=aborted, snapshots=snapshots)
    if out_dir is not None:
        persist_record(record, out_dir)
    return record


def persist_record(record: RunRecord, out_dir: str | Path) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"{record.spec_hash}.csv"
    csv_path.write_text(record.csv_text())
    meta = [
        f"spec_hash = {record.spec_hash}",
        f"algorithm = {record.algorithm}",
        f"seed = {record.seed}",
        f"rows = {len(record.rows)}",
        f"final_full_loss = {record.final_full_loss!r}",
        "aborted = " + (f"step={record.aborted[0]} reason={record.aborted[1]}"
                        if record.aborted else "none"),
    ]
    (out / f"{record.spec_hash}.meta.txt").write_text("\n".join(meta) + "\n")
    return csv_path


def load_rows(csv_path: str | Path) -> list[tuple]:
    """Read back the rows of a persisted record CSV."""
    lines = Path(csv_path).read_text().strip().splitlines()
    if not lines or lines[0] != CSV_HEADER:
        raise ValueError(f"{csv_path} is not a run record (bad header)")
    rows = []
    for line in lines[1:]:
        parts = line.split(",")
        rows.append((int(parts[0]),) + tuple(float(p) for p in parts[1:]))
    return rows


def load_meta(csv_path: str | Path) -> dict:
    meta_path = Path(str(csv_path).removesuffix(".csv") + ".meta.txt")
    out = {}
    if meta_path.exists():
        for line in meta_path.read_text().splitlines():
            if "=" in line:
                key, val = line.split("=", 1)
                out[key.strip()] = val.strip()
    return out


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------

def _coerce_leaf(current, value):
    # A bare number against a schedule field replaces the schedule's level
    # and keeps its shape (kind, warmup, horizon).
    if isinstance(current, LearningRateSchedule) and isinstance(value, (int, float)):
        return dataclasses.replace(current, peak=float(value))
    if isinstance(current, MomentumSchedule) and isinstance(value, (int, float)):
        return dataclasses.replace(current, base=float(value))
    if isinstance(current, AlphaSchedule) and isinstance(value, (int, float)):
        return dataclasses.replace(current, target=float(value))
    return value


def _replace_path(obj, parts: list[str], value):
    name = parts[0]
    if not hasattr(obj, name):
        raise KeyError(f"unknown field {name!r} on {type(obj).__name__}")
    if len(parts) == 1:
        return dataclasses.replace(obj, **{name: _coerce_leaf(getattr(obj, name), value)})
    return dataclasses.replace(
        obj, **{name: _replace_path(getattr(obj, name), parts[1:], value)})


def apply_override(spec: RunSpec, key: str, value) -> RunSpec:
    """Return a copy of the spec with one dotted-path field replaced.

    Keys look like ``optimizer.alpha`` or ``optimizer.averaging.delta``;
    bare run-level fields (``steps``, ``seed``, ...) are also accepted.
    """
    return _replace_path(spec, key.split("."), value)


@dataclass(frozen=True)
class SweepSpec:
    base: RunSpec
    grid: dict                      # dotted key -> sequence of values
    seeds: tuple = (0,)
    budget: int = 4096

    def __post_init__(self):
        if not self.grid:
            raise ValueError("sweep grid must be non-empty")
        object.__setattr__(self, "grid",
                           {k: tuple(v) for k, v in self.grid.items()})
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if not self.seeds:
            raise ValueError("at least one seed is required")
        n = self.n_cells * len(self.seeds)
        if n > self.budget:
            raise ValueError(f"sweep needs {n} runs, over budget {self.budget}")

    @property
    def n_cells(self) -> int:
        n = 1
        for v in self.grid.values():
            n *= len(v)
        return n

    def cells(self) -> list[dict]:
        keys = sorted(self.grid)
        out = []
        for combo in itertools.product(*(self.grid[k] for k in keys)):
            out.append(dict(zip(keys, combo)))
        return out


@dataclass
class CellResult:
    index: int
    overrides: dict
    records: list[RunRecord]
    aborted: bool

    @property
    def final_losses(self) -> np.ndarray:
        return np.array([r.final_full_loss for r in self.records])

    @property
    def mean_final_loss(self) -> float:
        return float(np.mean(self.final_losses))

    @property
    def stderr_final_loss(self) -> float:
        losses = self.final_losses
        if losses.size < 2:
            return 0.0
        return float(np.std(losses, ddof=1) / np.sqrt(losses.size))


@dataclass
class SweepResult:
    spec: SweepSpec
    cells: list[CellResult]
    best_index: int | None

    @property
    def best(self) -> CellResult:
        if self.best_index is None:
            raise RuntimeError("every cell aborted; no best cell")
        return self.cells[self.best_index]


def _cell_lr(base: RunSpec, overrides: dict) -> float:
    for key in ("optimizer.lr", "optimizer.lr.peak"):
        if key in overrides:
            return float(overrides[key])
    lr = base.optimizer.lr
    return lr.peak if isinstance(lr, LearningRateSchedule) else float(lr)


def select_best(base: RunSpec, cells: list[CellResult]) -> int | None:
    """Pure selection over completed cells: lowest mean final full loss,
    ties broken by lower learning rate, then lexicographic overrides."""
    candidates = [c for c in cells if not c.aborted]
    if not candidates:
        return None
    def key(c: CellResult):
        return (c.mean_final_loss, _cell_lr(base, c.overrides),
                tuple(sorted((k, repr(v)) for k, v in c.overrides.items())))
    return min(candidates, key=key).index


def sweep(spec: SweepSpec, out_dir: str | Path | None = None) -> SweepResult:
    """Run every grid cell for every seed and select the best cell.

    Aborted runs flag their cell; flagged cells are excluded from selection.
    """
    cells = []
    for index, overrides in enumerate(spec.cells()):
        run_spec = spec.base
        for key, value in overrides.items():
            run_spec = apply_override(run_spec, key, value)
        records = []
        for seed in spec.seeds:
            records.append(run(dataclasses.replace(run_spec, seed=seed), out_dir))
        cells.append(CellResult(index=index, overrides=overrides,
                                records=records,
                                aborted=any(r.aborted for r in records)))
    result = SweepResult(spec=spec, cells=cells,
                         best_index=select_best(spec.base, cells))
    if out_dir is not None:
        write_manifest(result, Path(out_dir) / "manifest.txt")
    return result


def write_manifest(result: SweepResult, path: str | Path) -> None:
    lines = ["accelsgd-sweep-manifest v1",
             f"base = {spec_hash(result.spec.base)}",
             f"cells = {len(result.cells)}",
             "seeds = " + " ".join(str(s) for s in result.spec.seeds), ""]
    for cell in result.cells:
        lines.append(f"[cell {cell.index}]")
        for key in sorted(cell.overrides):
            lines.append(f"{key} = {cell.overrides[key]!r}")
        lines.append("runs = " + " ".join(r.spec_hash for r in cell.records))
        lines.append(f"aborted = {int(cell.aborted)}")
        if not cell.aborted:
            lines.append(f"mean_final_full_loss = {cell.mean_final_loss!r}")
            lines.append(f"stderr_final_full_loss = {cell.stderr_final_loss!r}")
        lines.append("")
    lines.append("[best]")
    lines.append("cell = " + ("none" if result.best_index is None
                              else str(result.best_index)))
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# Sweep presets
# ---------------------------------------------------------------------------

_LR_SMALL = (3.16e-4, 1e-3, 3.16e-3)
_LR_SF = (3.16e-4, 1e-3, 3.16e-3, 1e-2)
_LR_LARGE = (1e-3, 3.16e-3, 1e-2)


def _cosine(peak: float, steps: int, frac: float = 0.05) -> LearningRateSchedule:
    return LearningRateSchedule(kind="cosine-with-warmup", peak=peak,
                                warmup_steps=max(1, round(frac * steps)),
                                total_steps=steps)


def _hl_warmup(target: float, steps: int, start: float = 0.9) -> MomentumSchedule:
    return MomentumSchedule(kind="half-life-warmup", base=target,
                            beta_start=start, warmup_horizon=steps)


def _alpha_warmup(target: float, steps: int) -> AlphaSchedule:
    return AlphaSchedule(kind="linear-warmup", target=target,
                         warmup_horizon=steps)


def _tailed(delta: float) -> AveragingSchedule:
    return AveragingSchedule(kind="tailed", delta=delta)


def _preset_adamw_small(steps):
    cfg = OptimizerConfig(algorithm="adamw", lr=_cosine(1e-3, steps))
    return cfg, {"optimizer.lr": _LR_SMALL,
                 "optimizer.beta1": (0.9, 0.95),
                 "optimizer.beta2": (0.99, 0.999, 0.99968, 0.9999)}


def _preset_adamw_short_warmup_small(steps):
    cfg = OptimizerConfig(algorithm="adamw", lr=_cosine(1e-3, steps, frac=0.01),
                          beta1=0.9, beta2=0.999)
    return cfg, {"optimizer.lr": _LR_SMALL}


def _preset_adamw_avg_small(steps):
    # Adam with weight averaging: the averaging-Adam rule with beta3 = beta1
    # reproduces the standard Adam numerator.
    cfg = OptimizerConfig(algorithm="accel-adam-avg", lr=1e-3, beta1=0.9,
                          beta3=0.9, averaging=_tailed(0.1))
    return cfg, {"optimizer.lr": _LR_SMALL,
                 "optimizer.beta2": (0.99, 0.997, 0.999, 0.9997),
                 "optimizer.averaging.delta": (0.05, 0.1, 0.2)}


def _preset_adamw_cosine_avg_small(steps):
    cfg = OptimizerConfig(algorithm="accel-adam-avg", lr=_cosine(1e-3, steps),
                          beta1=0.9, beta2=0.999, beta3=0.9,
                          averaging=_tailed(0.05))
    return cfg, {"optimizer.lr": _LR_SMALL,
                 "optimizer.averaging.delta": (0.025, 0.05, 0.1)}


def _preset_accel_adamw_cosine_small(steps):
    # slow EMA in m (beta1 near 1), mixing weight beta3 on it; evaluation is
    # always at the running average (tail window 0.05)
    cfg = OptimizerConfig(algorithm="accel-adam-avg", lr=_cosine(1e-3, steps),
                          beta1=0.999, beta3=0.9, averaging=_tailed(0.05))
    return cfg, {"optimizer.lr": _LR_SMALL,
                 "optimizer.beta1": (0.999, 0.99968, 0.9999),
                 "optimizer.beta2": (0.99, 0.9968, 0.999)}


def _preset_accel_adamw_avg_small(steps):
    cfg = OptimizerConfig(algorithm="accel-adam-avg", lr=1e-3, beta1=0.999,
                          beta2=0.999, beta3=0.9, averaging=_tailed(0.1))
    return cfg, {"optimizer.lr": _LR_SMALL,
                 "optimizer.beta1": (0.99684, 0.999),
                 "optimizer.averaging.delta": (0.05, 0.1)}


def _preset_accel_adamw_cosine_avg_small(steps):
    cfg = OptimizerConfig(algorithm="accel-adam-avg", lr=_cosine(1e-3, steps),
                          beta1=0.999, beta2=0.999, beta3=0.9,
                          averaging=_tailed(0.1))
    return cfg, {"optimizer.lr": _LR_SMALL,
                 "optimizer.beta1": (0.99684, 0.999),
                 "optimizer.averaging.delta": (0.05, 0.1)}


def _preset_sf_adamw_small(steps):
    cfg = OptimizerConfig(algorithm="schedule-free-adamw", lr=1e-3, beta1=0.9,
                          beta2=0.999)
    return cfg, {"optimizer.lr": _LR_SF,
                 "optimizer.beta1": (0.8, 0.9, 0.95)}


def _preset_sf_adamw_cosine_small(steps):
    cfg = OptimizerConfig(algorithm="schedule-free-adamw",
                          lr=_cosine(1e-3, steps), beta1=0.9, beta2=0.999)
    return cfg, {"optimizer.lr": _LR_SF,
                 "optimizer.beta1": (0.8, 0.9, 0.95)}


def _preset_mars_small(steps):
    cfg = OptimizerConfig(algorithm="mars-approx", lr=1e-3)
    return cfg, {"optimizer.lr": _LR_SF,
                 "optimizer.beta1": (0.9, 0.95, 0.99),
                 "optimizer.beta2": (0.99, 0.999),
                 "optimizer.gamma": (0.0, 0.01, 0.02, 0.03, 0.04, 0.05)}


def _preset_ademamix_small(steps):
    cfg = OptimizerConfig(algorithm="ademamix", lr=1e-3, beta1=0.9,
                          beta2=0.999, beta3=_hl_warmup(0.999, steps),
                          alpha=_alpha_warmup(8.0, steps))
    return cfg, {"optimizer.lr": _LR_SMALL,
                 "optimizer.beta1": (0.0, 0.9),
                 "optimizer.beta3": (0.99, 0.999, 0.9999),
                 "optimizer.alpha": (2.0, 4.0, 8.0, 16.0)}


def _preset_sim_ademamix_small(steps):
    cfg = OptimizerConfig(algorithm="simplified-ademamix", lr=1e-5,
                          beta1=_hl_warmup(0.999, steps), beta2=0.999,
                          alpha=20.0)
    return cfg, {"optimizer.lr": (1e-6, 3.16e-6, 1e-5, 3.16e-5),
                 "optimizer.beta1": (0.99, 0.999, 0.9999),
                 "optimizer.alpha": (10.0, 20.0, 50.0, 100.0)}


def _preset_sf_adamw_large(steps):
    cfg = OptimizerConfig(algorithm="schedule-free-adamw", lr=1e-3, beta1=0.9,
                          beta2=0.95)
    return cfg, {"optimizer.lr": _LR_LARGE,
                 "optimizer.beta1": (0.8, 0.9, 0.95),
                 "optimizer.beta2": (0.9, 0.95),
                 "optimizer.sf_r": (0.0, 5.0, 9.0, 50.0)}


def _preset_adamw_large(steps):
    cfg = OptimizerConfig(algorithm="adamw", lr=_cosine(1e-3, steps))
    return cfg, {"optimizer.lr": _LR_LARGE,
                 "optimizer.beta1": (0.9, 0.95),
                 "optimizer.beta2": (0.9, 0.95)}


def _preset_laprop_large(steps):
    cfg = OptimizerConfig(algorithm="laprop", lr=_cosine(1e-3, steps))
    return cfg, {"optimizer.lr": _LR_LARGE,
                 "optimizer.beta1": (0.9, 0.95),
                 "optimizer.beta2": (0.9, 0.95)}


def _preset_ademamix_large(steps):
    cfg = OptimizerConfig(algorithm="ademamix", lr=1e-3, beta1=0.9, beta2=0.95,
                          beta3=_hl_warmup(0.95, steps),
                          alpha=_alpha_warmup(8.0, steps))
    return cfg, {"optimizer.lr": _LR_LARGE,
                 "optimizer.beta1": (0.0, 0.9),
                 "optimizer.beta3": (0.9, 0.95, 0.99),
                 "optimizer.alpha": (2.0, 4.0, 8.0, 16.0)}


def _preset_sim_ademamix_large(steps):
    cfg = OptimizerConfig(algorithm="simplified-ademamix", lr=3.16e-4,
                          beta1=0.95, beta2=0.95, alpha=0.5)
    return cfg, {"optimizer.lr": (1e-4, 3.16e-4, 1e-3),
                 "optimizer.beta1": (0.9, 0.95, 0.99),
                 "optimizer.alpha": (0.0, 0.5, 1.0)}


def _preset_sgd_momentum_desk(steps):
    # beta1 = 0 (plain SGD) is a deliberate grid point: it is often the best
    # momentum-family cell in the single-sample regime
    cfg = OptimizerConfig(algorithm="sgd-momentum", lr=3.16e-3, beta1=0.9)
    return cfg, {"optimizer.lr": (3.16e-4, 1e-3, 3.16e-3, 1e-2, 0.0316),
                 "optimizer.beta1": (0.0, 0.9, 0.99)}


def _preset_accel_sgd_desk(steps):
    # the schedule-free image of accelerated SGD: growing momentum 1 - c_{t-1},
    # decaying momentum step lr*beta*c_t, constant gradient step lr*(1-beta);
    # sf_r widens (0) or narrows (50) the implicit averaging window.  The
    # large lr values only survive noise-free full-batch gradients; their
    # single-sample cells abort and drop out of selection.
    cfg = OptimizerConfig(algorithm="accel-sgd", lr=0.01, beta1=0.9,
                          accel_from_sf=True)
    return cfg, {"optimizer.lr": (1e-3, 3.16e-3, 1e-2, 0.0316, 0.1),
                 "optimizer.beta1": (0.9, 0.98),
                 "optimizer.sf_r": (0.0, 9.0, 50.0)}


PRESETS = {
    "adamw-small-batch": _preset_adamw_small,
    "adamw-short-warmup-small-batch": _preset_adamw_short_warmup_small,
    "adamw-avg-small-batch": _preset_adamw_avg_small,
    "adamw-cosine-avg-small-batch": _preset_adamw_cosine_avg_small,
    "accel-adamw-cosine-small-batch": _preset_accel_adamw_cosine_small,
    "accel-adamw-avg-small-batch": _preset_accel_adamw_avg_small,
    "accel-adamw-cosine-avg-small-batch": _preset_accel_adamw_cosine_avg_small,
    "schedule-free-adamw-small-batch": _preset_sf_adamw_small,
    "schedule-free-adamw-cosine-small-batch": _preset_sf_adamw_cosine_small,
    "mars-small-batch": _preset_mars_small,
    "ademamix-small-batch": _preset_ademamix_small,
    "sim-ademamix-small-batch": _preset_sim_ademamix_small,
    "schedule-free-adamw-large-batch": _preset_sf_adamw_large,
    "adamw-large-batch": _preset_adamw_large,
    "laprop-large-batch": _preset_laprop_large,
    "ademamix-large-batch": _preset_ademamix_large,
    "sim-ademamix-large-batch": _preset_sim_ademamix_large,
    "sgd-momentum-desk": _preset_sgd_momentum_desk,
    "accel-sgd-desk": _preset_accel_sgd_desk,
}


def preset_grid(name: str, steps: int) -> tuple[OptimizerConfig, dict]:
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; known: {sorted(PRESETS)}")
    return PRESETS[name](steps)


def build_preset(name: str, problem: Problem, steps: int, seeds,
                 eval_every: int | None = None, budget: int = 4096) -> SweepSpec:
    """Instantiate a catalog preset as a runnable SweepSpec."""
    cfg, grid = preset_grid(name, steps)
    base = RunSpec(problem=problem, optimizer=cfg, steps=steps, seed=0,
                   eval_every=eval_every or max(1, steps // 50))
    return SweepSpec(base=base, grid=grid, seeds=tuple(seeds), budget=budget)


# ---------------------------------------------------------------------------
# Batch-size study
# ---------------------------------------------------------------------------

@dataclass
class StudyCell:
    entrant: str
    batch_size: int
    best_overrides: dict
    mean: float
    stderr: float
    n_seeds: int


@dataclass
class StudyResult:
    cells: list[StudyCell]

    def cell(self, entrant: str, batch_size: int) -> StudyCell:
        for c in self.cells:
            if c.entrant == entrant and c.batch_size == batch_size:
                return c
        raise KeyError((entrant, batch_size))

    def table(self) -> str:
        lines = [f"{'entrant':<28} {'batch':>6} {'mean final loss':>18} "
                 f"{'stderr':>12}  best cell"]
        for c in self.cells:
            best = " ".join(f"{k.split('.')[-1]}={v}" for k, v in
                            sorted(c.best_overrides.items()))
            lines.append(f"{c.entrant:<28} {c.batch_size:>6} {c.mean:>18.6e} "
                         f"{c.stderr:>12.3e}  {best}")
        return "\n".join(lines)


def batch_size_study(problem_factory, entrants, batch_sizes, seeds, steps: int,
                     eval_every: int | None = None,
                     out_dir: str | Path | None = None) -> StudyResult:
    """Tune each entrant per batch size and compare best-cell final losses.

    ``problem_factory(batch_size)`` builds the problem instance;
    ``entrants`` is a list of (label, preset_name).  Every entrant is tuned
    with its own preset grid at every batch size, so comparisons are between
    per-batch-size best cells, mean +- stderr over the seeds.
    """
    cells = []
    for batch_size in batch_sizes:
        problem = problem_factory(batch_size)
        for label, preset_name in entrants:
            sub_dir = None
            if out_dir is not None:
                sub_dir = Path(out_dir) / f"{label}-b{batch_size}"
            result = sweep(build_preset(preset_name, problem, steps, seeds,
                                        eval_every=eval_every), sub_dir)
            best = result.best
            cells.append(StudyCell(entrant=label, batch_size=batch_size,
                                   best_overrides=dict(best.overrides),
                                   mean=best.mean_final_loss,
                                   stderr=best.stderr_final_loss,
                                   n_seeds=len(result.spec.seeds)))
    return StudyResult(cells=cells)


def default_study_problem(d: int = 100, n: int = 120, label_noise: float = 0.5,
                          seed: int = 7):
    """Problem factory for the batch-size study: noisy least squares.

    The default n/d ratio of 1.2 puts the sample covariance's condition
    number in the few-hundreds, which is where the single-sample ordering
    between accelerated SGD and plain momentum is widest at desk scale.
    """
    def factory(batch_size: int) -> Problem:
        return noisy_least_squares(n=n, d=d, batch_size=batch_size,
                                   label_noise=label_noise, seed=seed)
    return factory
