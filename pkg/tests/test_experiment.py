"""Experiment harness: config handling, trial reports, artifacts, CLI."""

import os

import numpy as np
import pytest

from srsct.cli import main
from srsct.config import (
    ExperimentConfig,
    SolverConfig,
    build_experiment_config,
    parse_angles,
    parse_config_file,
)
from srsct.experiment import run_experiment, scale_sweep, sweep_config
from srsct.pgm import write_pgm

# small but complete experiment: fast enough for the unit suite
FAST = dict(
    phantom="piecewise", grid_side=16, detector_pixels=23, angles="15:15:180",
    noise_level=0.02, trials=2, seed=11, variant="model-16", prior_sigma=0.1,
)
FAST_SOLVER = SolverConfig(data_weight=0.2, tv_weight=1.0, tikhonov_weight=1.0,
                           simplex_split_penalty=2.0, outer_max=6)


def fast_config(**overrides):
    kwargs = dict(FAST)
    kwargs.update(overrides)
    return ExperimentConfig(solver=FAST_SOLVER, **kwargs)


class TestAngleSpec:
    def test_six_degree_spacing(self):
        angles = parse_angles("6:6:180")
        assert len(angles) == 30
        assert angles[0] == 6.0 and angles[-1] == 180.0

    def test_fractional_step(self):
        angles = parse_angles("1.5:1.5:180")
        assert len(angles) == 120

    def test_bad_specs(self):
        with pytest.raises(ValueError):
            parse_angles("6:180")
        with pytest.raises(ValueError):
            parse_angles("6:-6:180")


class TestConfigFile:
    def test_parse_and_merge(self, tmp_path):
        path = tmp_path / "exp.cfg"
        path.write_text(
            "# comment line\n"
            "phantom = smooth\n"
            "grid_side = 32   # inline comment\n"
            "trials = 3\n"
            "data_weight = 7.5\n"
        )
        cfg = build_experiment_config(parse_config_file(path))
        assert cfg.phantom == "smooth"
        assert cfg.grid_side == 32
        assert cfg.trials == 3
        assert cfg.solver.data_weight == 7.5
        # untouched smooth defaults fill the rest
        assert cfg.noise_level == 0.01
        assert cfg.solver.tikhonov_weight == 35.0

    def test_overrides_beat_file(self, tmp_path):
        path = tmp_path / "exp.cfg"
        path.write_text("trials = 3\nnoise_level = 0.10\n")
        cfg = build_experiment_config(parse_config_file(path),
                                      {"trials": 5, "noise_level": 0.2})
        assert cfg.trials == 5
        assert cfg.noise_level == 0.2

    def test_piecewise_defaults(self):
        cfg = build_experiment_config({}, {})
        assert cfg.phantom == "piecewise"
        assert cfg.noise_level == 0.05
        assert cfg.solver.data_weight == 0.2
        assert cfg.solver.tv_weight == 1.0
        assert cfg.solver.simplex_split_penalty == 2.0

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "exp.cfg"
        path.write_text("phantum = piecewise\n")
        with pytest.raises(ValueError):
            build_experiment_config(parse_config_file(path))

    def test_malformed_line_rejected(self, tmp_path):
        path = tmp_path / "exp.cfg"
        path.write_text("trials\n")
        with pytest.raises(ValueError):
            parse_config_file(path)

    def test_invalid_values_rejected(self):
        with pytest.raises(ValueError):
            ExperimentConfig(trials=0)
        with pytest.raises(ValueError):
            ExperimentConfig(phantom="cube")
        with pytest.raises(ValueError):
            ExperimentConfig(variant="model-5")


class TestRunExperiment:
    def test_report_rows_and_aggregate(self, tmp_path):
        cfg = fast_config(out_dir=str(tmp_path / "run"))
        report = run_experiment(cfg)
        assert len(report.trials) == 2
        assert [t.seed for t in report.trials] == [11, 12]
        recs = [t.rec_err for t in report.trials]
        assert report.mean_rec_err == pytest.approx(np.mean(recs), abs=1e-12)
        segs = [t.seg_err for t in report.trials]
        assert report.mean_seg_err == pytest.approx(np.mean(segs), abs=1e-12)

        out = tmp_path / "run"
        lines = (out / "report.csv").read_text().splitlines()
        assert lines[0] == "seed,rec_err,seg_err,seconds,outer_iters,status"
        assert len(lines) == 4  # header + 2 trials + aggregate
        assert lines[-1].startswith("mean,")
        # aggregate cells parse as plain decimal numbers
        agg_cells = lines[-1].split(",")
        assert float(agg_cells[1]) == pytest.approx(report.mean_rec_err, abs=1e-15)
        assert float(agg_cells[2]) == pytest.approx(report.mean_seg_err, abs=1e-15)
        assert (out / "x_final.pgm").exists()
        assert (out / "labels.csv").exists()
        trace_lines = (out / "energy_trace.csv").read_text().splitlines()
        assert trace_lines[0] == "iter,E0,F,rel_change_x"
        assert len(trace_lines) >= 2

    def test_single_noise_free_trial_aggregate_equals_row(self, tmp_path):
        cfg = fast_config(trials=1, noise_level=0.0, out_dir=str(tmp_path))
        report = run_experiment(cfg)
        assert len(report.trials) == 1
        assert report.mean_rec_err == report.trials[0].rec_err
        assert report.mean_seg_err == report.trials[0].seg_err
        lines = (tmp_path / "report.csv").read_text().splitlines()
        assert len(lines) == 3

    def test_report_reproducible_except_seconds(self, tmp_path):
        cfg1 = fast_config(out_dir=str(tmp_path / "a"))
        cfg2 = fast_config(out_dir=str(tmp_path / "b"))
        run_experiment(cfg1)
        run_experiment(cfg2)

        def strip_seconds(path):
            rows = []
            for line in path.read_text().splitlines():
                cells = line.split(",")
                rows.append(",".join(cells[:3] + cells[4:]))
            return rows

        assert strip_seconds(tmp_path / "a" / "report.csv") == \
            strip_seconds(tmp_path / "b" / "report.csv")

    def test_parallel_matches_sequential(self, tmp_path, monkeypatch):
        cfg_seq = fast_config(out_dir=str(tmp_path / "seq"))
        monkeypatch.delenv("SRS_THREADS", raising=False)
        seq = run_experiment(cfg_seq)
        monkeypatch.setenv("SRS_THREADS", "2")
        par = run_experiment(fast_config(out_dir=str(tmp_path / "par")))
        for a, b in zip(seq.trials, par.trials):
            assert a.seed == b.seed
            assert a.rec_err == b.rec_err
            assert a.seg_err == b.seg_err
            assert a.outer_iters == b.outer_iters

    def test_no_files_without_out_dir(self):
        report = run_experiment(fast_config(trials=1))
        assert report.files == {}

    def test_failed_trial_marked_and_run_continues(self, tmp_path, monkeypatch):
        import srsct.experiment as exp
        from srsct.errors import DivergenceError

        real = exp.reconstruct_and_segment

        def flaky(problem, cfg, variant):
            if problem.sinogram.seed == 11:
                raise DivergenceError("forced failure")
            return real(problem, cfg, variant)

        monkeypatch.setattr(exp, "reconstruct_and_segment", flaky)
        report = run_experiment(fast_config(out_dir=str(tmp_path)))
        assert report.n_failed == 1
        statuses = [t.status for t in report.trials]
        assert statuses == ["failed", "ok"]
        lines = (tmp_path / "report.csv").read_text().splitlines()
        assert lines[1].startswith("11,nan,nan,") and lines[1].endswith("failed")
        # aggregate uses only the successful trials
        assert report.mean_rec_err == report.trials[1].rec_err


class TestSweep:
    def test_scaled_scan_keeps_measurement_ratio(self):
        base = fast_config()
        for side in (64, 128, 256, 512):
            cfg = sweep_config(base, side)
            n_angles = len(cfg.angle_list())
            rate = cfg.detector_pixels * n_angles / cfg.grid_side ** 2
            assert rate == pytest.approx(0.667, abs=2e-3)
        assert sweep_config(base, 128).detector_pixels == 182
        assert sweep_config(base, 128).angles == "3.0:3.0:180"

    def test_rejects_other_sides(self):
        with pytest.raises(ValueError):
            sweep_config(fast_config(), 96)

    def test_sweep_runs_at_base_side(self, tmp_path):
        # grid side 64 is the smallest sweep point; single fast trial
        base = fast_config(trials=1, out_dir=str(tmp_path),
                           noise_level=0.05)
        reports = scale_sweep(base, [64])
        assert len(reports) == 1
        assert reports[0].config.grid_side == 64
        assert (tmp_path / "n64" / "report.csv").exists()


class TestPgmWriter:
    def test_ascii_and_binary_agree(self, tmp_path):
        rng = np.random.default_rng(0)
        img = rng.random((5, 7))
        write_pgm(tmp_path / "a.pgm", img, binary=False)
        write_pgm(tmp_path / "b.pgm", img, binary=True)
        text = (tmp_path / "a.pgm").read_text("ascii").split()
        ascii_vals = np.array(text[4:], dtype=np.uint16)
        raw = (tmp_path / "b.pgm").read_bytes()
        header_end = raw.index(b"65535\n") + len(b"65535\n")
        binary_vals = np.frombuffer(raw[header_end:], dtype=">u2")
        np.testing.assert_array_equal(ascii_vals, binary_vals.astype(np.uint16))

    def test_negative_values_clip_to_zero(self, tmp_path):
        write_pgm(tmp_path / "c.pgm", np.array([[-1.0, 1.0]]))
        vals = (tmp_path / "c.pgm").read_text().split()[4:]
        assert vals == ["0", "65535"]


class TestCli:
    def test_run_exit_zero(self, tmp_path, capsys):
        code = main(["run", "--phantom", "piecewise", "--n", "16",
                     "--trials", "1", "--seed", "3", "--noise", "0.02",
                     "--out", str(tmp_path / "out")])
        assert code == 0
        assert (tmp_path / "out" / "report.csv").exists()
        assert "rec_err=" in capsys.readouterr().out

    def test_run_with_config_file(self, tmp_path):
        cfg = tmp_path / "exp.cfg"
        cfg.write_text(
            "phantom = piecewise\ngrid_side = 16\ndetector_pixels = 23\n"
            "angles = 15:15:180\ntrials = 1\nnoise_level = 0.0\n"
            f"out_dir = {tmp_path / 'out'}\nouter_max = 5\n"
        )
        assert main(["run", "--config", str(cfg)]) == 0
        assert (tmp_path / "out" / "report.csv").exists()

    def test_bad_config_exit_one(self, tmp_path, capsys):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("phantum = piecewise\n")
        assert main(["run", "--config", str(cfg)]) == 1
        assert "configuration error" in capsys.readouterr().err

    def test_missing_config_file_exit_one(self):
        assert main(["run", "--config", "/nonexistent/path.cfg"]) == 1

    def test_unknown_flag_exit_one(self):
        assert main(["run", "--does-not-exist", "1"]) == 1

    def test_bad_sides_exit_one(self, tmp_path):
        assert main(["sweep", "--sides", "", "--out", str(tmp_path)]) == 1

    def test_partial_failure_exit_two(self, monkeypatch):
        import srsct.cli as cli

        class Stub:
            config = fast_config()
            mean_rec_err = 0.1
            mean_seg_err = 0.1
            mean_seconds = 1.0
            n_failed = 1

        monkeypatch.setattr(cli, "run_experiment", lambda cfg: Stub())
        assert main(["run", "--phantom", "piecewise"]) == 2
