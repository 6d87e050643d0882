"""Run determinism, persistence formats, sweep selection, and presets."""

import numpy as np
import pytest

from accelsgd.harness import (CSV_HEADER, PRESETS, RunSpec, SweepSpec,
                              apply_override, batch_size_study, build_preset,
                              default_study_problem, load_meta, load_rows,
                              preset_grid, run, select_best, spec_hash, sweep)
from accelsgd.optimizers import OptimizerConfig
from accelsgd.problems import full_loss, noisy_least_squares, quadratic
from accelsgd.schedules import AveragingSchedule, LearningRateSchedule


def small_spec(**kw):
    defaults = dict(
        problem=quadratic(np.linspace(0.2, 1.0, 6),
                          noise="additive-gaussian", noise_sigma=0.2),
        optimizer=OptimizerConfig(algorithm="adamw", lr=5e-3),
        steps=200, seed=0, eval_every=50)
    defaults.update(kw)
    return RunSpec(**defaults)


class TestRun:
    def test_zero_steps_rejected(self):
        with pytest.raises(ValueError, match="steps"):
            small_spec(steps=0)

    def test_rows_end_at_final_step(self):
        record = run(small_spec(steps=130, eval_every=50))
        assert [r[0] for r in record.rows] == [50, 100, 130]

    def test_same_spec_twice_is_byte_identical(self):
        spec = small_spec()
        a, b = run(spec), run(spec)
        assert a.csv_text() == b.csv_text()
        assert np.array_equal(a.final_params, b.final_params)
        assert a.spec_hash == b.spec_hash

    def test_plain_sgd_descends_monotonically_below_stability_limit(self):
        # eta < 2 / lambda_max on a noise-free quadratic
        prob = quadratic(np.linspace(0.5, 2.0, 8))
        spec = RunSpec(problem=prob,
                       optimizer=OptimizerConfig(algorithm="sgd-momentum",
                                                 lr=0.5, beta1=0.0),
                       steps=100, seed=1, eval_every=1)
        record = run(spec)
        losses = [r[2] for r in record.rows]
        assert all(b <= a + 1e-15 for a, b in zip(losses, losses[1:]))

    def test_abort_is_flagged_and_partial(self, tmp_path):
        # wildly unstable momentum run must abort, not emit NaN rows
        prob = noisy_least_squares(n=60, d=30, batch_size=1, seed=0)
        spec = RunSpec(problem=prob,
                       optimizer=OptimizerConfig(algorithm="sgd-momentum",
                                                 lr=50.0, beta1=0.99),
                       steps=5000, seed=0, eval_every=10)
        record = run(spec, tmp_path)
        assert record.aborted is not None
        assert record.aborted[0] <= 5000
        for row in record.rows:
            assert all(np.isfinite(v) for v in row[1:])
        meta = load_meta(tmp_path / f"{record.spec_hash}.csv")
        assert meta["aborted"].startswith("step=")

    def test_overflowing_loss_aborts_before_bad_row(self):
        # w grows geometrically: the squared loss overflows to inf while the
        # updates themselves are still finite
        prob = quadratic(np.ones(2))
        spec = RunSpec(problem=prob,
                       optimizer=OptimizerConfig(algorithm="sgd-momentum",
                                                 lr=10.0, beta1=0.0),
                       steps=600, seed=2, eval_every=1)
        record = run(spec)
        assert record.aborted is not None
        assert "metrics" in record.aborted[1] or "update" in record.aborted[1]
        for row in record.rows:
            assert all(np.isfinite(v) for v in row[1:])

    def test_snapshot_cadence_must_divide_eval(self):
        with pytest.raises(ValueError, match="cadence"):
            small_spec(eval_every=50, snapshot_every=20)
        spec = small_spec(eval_every=50, snapshot_every=25, steps=100)
        record = run(spec)
        assert [s for s, _ in record.snapshots] == [25, 50, 75, 100]

    def test_eval_uses_eval_point_not_w(self):
        # for an averaging algorithm the recorded loss is the average's loss
        prob = quadratic(np.linspace(0.2, 1.0, 8),
                         noise="additive-gaussian", noise_sigma=0.5)
        cfg = OptimizerConfig(algorithm="accel-adam-avg", lr=5e-3, beta1=0.9,
                              beta3=0.9,
                              averaging=AveragingSchedule(kind="tailed",
                                                          delta=0.2))
        spec = RunSpec(problem=prob, optimizer=cfg, steps=1500, seed=3,
                       eval_every=1500)
        record = run(spec)
        assert record.rows[-1][2] == pytest.approx(
            full_loss(prob, record.final_params), rel=1e-12)


class TestPersistence:
    def test_csv_round_trip(self, tmp_path):
        record = run(small_spec(), tmp_path)
        path = tmp_path / f"{record.spec_hash}.csv"
        assert path.read_text().splitlines()[0] == CSV_HEADER
        rows = load_rows(path)
        assert rows == record.rows

    def test_csv_floats_round_trip_exactly(self, tmp_path):
        record = run(small_spec(), tmp_path)
        rows = load_rows(tmp_path / f"{record.spec_hash}.csv")
        for loaded, orig in zip(rows, record.rows):
            assert loaded[2] == orig[2]

    def test_spec_hash_separates_specs(self):
        a, b = small_spec(seed=0), small_spec(seed=1)
        assert spec_hash(a) != spec_hash(b)
        assert spec_hash(a) == spec_hash(small_spec(seed=0))


class TestOverrides:
    def test_scalar_field(self):
        spec = small_spec()
        out = apply_override(spec, "optimizer.eps", 1e-6)
        assert out.optimizer.eps == 1e-6
        assert spec.optimizer.eps == 1e-8

    def test_number_against_schedule_keeps_shape(self):
        lr = LearningRateSchedule(kind="cosine-with-warmup", peak=1e-3,
                                  warmup_steps=10, total_steps=200)
        spec = small_spec(optimizer=OptimizerConfig(algorithm="adamw", lr=lr))
        out = apply_override(spec, "optimizer.lr", 5e-4)
        assert out.optimizer.lr.kind == "cosine-with-warmup"
        assert out.optimizer.lr.peak == 5e-4
        assert out.optimizer.lr.warmup_steps == 10

    def test_nested_path(self):
        cfg = OptimizerConfig(algorithm="accel-adam-avg", beta3=0.9)
        spec = small_spec(optimizer=cfg)
        out = apply_override(spec, "optimizer.averaging.delta", 0.05)
        assert out.optimizer.averaging.delta == 0.05

    def test_unknown_key_rejected(self):
        with pytest.raises(KeyError, match="momentum"):
            apply_override(small_spec(), "optimizer.momentum", 0.9)


class TestSweep:
    def grid_spec(self, tmp_path=None, **kw):
        base = small_spec(steps=150, eval_every=150)
        defaults = dict(base=base,
                        grid={"optimizer.lr": (5e-3, 1e-2),
                              "optimizer.beta1": (0.0, 0.9)},
                        seeds=(0, 1))
        defaults.update(kw)
        return SweepSpec(**defaults)

    def test_single_cell_equals_run(self):
        base = small_spec(steps=150, eval_every=150)
        result = sweep(SweepSpec(base=base, grid={"optimizer.lr": (5e-3,)},
                                 seeds=(0,)))
        direct = run(apply_override(base, "optimizer.lr", 5e-3))
        assert result.cells[0].records[0].csv_text() == direct.csv_text()

    def test_best_cell_and_manifest(self, tmp_path):
        result = sweep(self.grid_spec(), tmp_path)
        assert result.best_index is not None
        manifest = (tmp_path / "manifest.txt").read_text()
        assert manifest.startswith("accelsgd-sweep-manifest v1")
        assert f"cell = {result.best_index}" in manifest
        assert manifest.count("[cell ") == 4

    def test_selection_is_pure_function_of_records(self):
        result = sweep(self.grid_spec())
        again = select_best(result.spec.base, result.cells)
        assert again == result.best_index

    def test_budget_enforced(self):
        with pytest.raises(ValueError, match="budget"):
            self.grid_spec(budget=3)

    def test_aborted_cells_excluded(self):
        prob = noisy_least_squares(n=60, d=30, batch_size=1, seed=0)
        base = RunSpec(problem=prob,
                       optimizer=OptimizerConfig(algorithm="sgd-momentum",
                                                 lr=1e-3, beta1=0.9),
                       steps=400, seed=0, eval_every=400)
        result = sweep(SweepSpec(base=base,
                                 grid={"optimizer.lr": (1e-3, 50.0)},
                                 seeds=(0,)))
        flags = {tuple(c.overrides.items()): c.aborted for c in result.cells}
        assert flags[(("optimizer.lr", 50.0),)] is True
        assert result.best.overrides["optimizer.lr"] == 1e-3

    def test_tie_break_prefers_lower_lr(self):
        # two artificial cells with equal means: the lower lr must win
        from accelsgd.harness import CellResult
        rec_a = run(apply_override(small_spec(steps=60, eval_every=60),
                                   "optimizer.lr", 1e-2))
        rec_b = run(apply_override(small_spec(steps=60, eval_every=60),
                                   "optimizer.lr", 1e-3))
        rec_a.rows[-1] = rec_a.rows[-1][:2] + (0.5,) + rec_a.rows[-1][3:]
        rec_b.rows[-1] = rec_b.rows[-1][:2] + (0.5,) + rec_b.rows[-1][3:]
        cells = [CellResult(0, {"optimizer.lr": 1e-2}, [rec_a], False),
                 CellResult(1, {"optimizer.lr": 1e-3}, [rec_b], False)]
        assert select_best(small_spec(), cells) == 1


class TestPresets:
    def test_ademamix_small_batch_alpha_grid(self):
        _, grid = preset_grid("ademamix-small-batch", steps=1000)
        assert grid["optimizer.alpha"] == (2.0, 4.0, 8.0, 16.0)

    def test_sim_ademamix_large_batch_alpha_grid(self):
        _, grid = preset_grid("sim-ademamix-large-batch", steps=1000)
        assert grid["optimizer.alpha"] == (0.0, 0.5, 1.0)

    def test_adamw_small_batch_beta2_grid(self):
        _, grid = preset_grid("adamw-small-batch", steps=1000)
        assert grid["optimizer.beta2"] == (0.99, 0.999, 0.99968, 0.9999)

    def test_all_presets_instantiate(self):
        prob = noisy_least_squares(n=24, d=4, batch_size=2, seed=0)
        for name in PRESETS:
            spec = build_preset(name, prob, steps=20, seeds=(0,),
                                budget=100_000)
            assert spec.n_cells >= 1

    def test_unknown_preset(self):
        with pytest.raises(KeyError, match="unknown preset"):
            preset_grid("sgd-classic", 10)


class TestBatchStudy:
    def test_identical_entrants_give_identical_cells(self):
        factory = default_study_problem(d=6, n=24, label_noise=0.3, seed=1)
        entrants = [("a", "sgd-momentum-desk"), ("b", "sgd-momentum-desk")]
        result = batch_size_study(factory, entrants, [2], seeds=(0, 1),
                                  steps=120)
        a, b = result.cell("a", 2), result.cell("b", 2)
        assert a.mean == b.mean
        assert a.best_overrides == b.best_overrides

    def test_full_batch_deterministic_quadratic_families_tie(self):
        # with exact gradients both families drive a mild quadratic to the
        # optimum; best cells agree to solver precision
        def factory(batch_size):
            return quadratic(np.linspace(0.1, 1.0, 10))
        entrants = [("accel-sgd", "accel-sgd-desk"),
                    ("sgd-momentum", "sgd-momentum-desk")]
        result = batch_size_study(factory, entrants, [0], seeds=(0, 1, 2),
                                  steps=2000)
        acc, mom = result.cell("accel-sgd", 0), result.cell("sgd-momentum", 0)
        assert acc.mean == pytest.approx(mom.mean, abs=1e-12)

    def test_table_renders(self):
        factory = default_study_problem(d=4, n=16, label_noise=0.2, seed=0)
        result = batch_size_study(factory, [("m", "sgd-momentum-desk")], [2],
                                  seeds=(0,), steps=60)
        assert "entrant" in result.table()
        assert "m" in result.table()
