import json
from pathlib import Path

import numpy as np
import pytest
import yaml

from conftest import base_config_dict
from overlap_sgd.cli import main
from overlap_sgd.config import rand_k_size, validate_config
from overlap_sgd.data import load_libsvm
from overlap_sgd.metrics import read_metrics_csv
from overlap_sgd.runner import run_suite


def write_config(tmp_path, **overrides) -> Path:
    raw = base_config_dict(**overrides)
    if "output_dir" not in overrides:
        raw["output_dir"] = str(tmp_path / "out")
    path = tmp_path / "config.yaml"
    path.write_text(yaml.safe_dump(raw), encoding="utf-8")
    return path


def snapshot(directory: Path) -> dict[str, bytes]:
    return {p.name: p.read_bytes() for p in sorted(directory.iterdir()) if p.is_file()}


class TestValidateConfig:
    def test_misaligned_comm_window(self):
        raw = base_config_dict(step_times=[1, 2, 3, 6], comm_seconds=5)
        config, issues = validate_config(raw)
        assert config is None
        assert any("multiple of 6" in str(i) for i in issues)

    def test_sync_sgd_constraints(self):
        raw = base_config_dict(methods=["sync_sgd"], step_times=[1, 2], comm_seconds=0)
        config, issues = validate_config(raw)
        assert config is None
        msg = " ".join(str(i) for i in issues)
        assert "sync_sgd requires" in msg
        assert "equal step_times" in msg

    def test_mask_size_conversion(self):
        assert rand_k_size(0.3, 123) == 37
        assert rand_k_size(0.001, 100) == 1
        assert rand_k_size(1.0, 50) == 50
        assert rand_k_size(0.5, 5) == 3  # half rounds up

    def test_collects_multiple_issues(self):
        raw = base_config_dict(stepsize=-1, sparsity=2.0, rounds=-3)
        config, issues = validate_config(raw)
        assert config is None
        fields = {i.field for i in issues}
        assert {"stepsize", "sparsity", "rounds"} <= fields

    def test_unknown_key_is_flagged(self):
        raw = base_config_dict(lerning_rate=0.1)
        config, issues = validate_config(raw)
        assert config is None
        assert any(i.field == "lerning_rate" for i in issues)

    def test_min_examples_only_for_dirichlet(self):
        raw = base_config_dict(partition={"mode": "shard", "min_examples": 5})
        config, issues = validate_config(raw)
        assert config is None
        assert any(i.field == "partition.min_examples" for i in issues)
        raw = base_config_dict(partition={"mode": "dirichlet", "alpha": 0.1, "min_examples": 5})
        config, issues = validate_config(raw)
        assert not issues
        assert config.dirichlet_min_examples == 5
        again, issues2 = validate_config(config.to_dict())
        assert not issues2 and again == config

    def test_valid_config_round_trips(self):
        raw = base_config_dict()
        config, issues = validate_config(raw)
        assert not issues
        again, issues2 = validate_config(config.to_dict())
        assert not issues2
        assert again == config


class TestRunCommand:
    def test_exit_codes(self, tmp_path, capsys):
        good = write_config(tmp_path)
        assert main(["run", str(good)]) == 0
        bad = tmp_path / "bad.yaml"
        bad.write_text(yaml.safe_dump(base_config_dict(stepsize=-1)), encoding="utf-8")
        assert main(["run", str(bad)]) == 1
        assert main(["run", str(tmp_path / "missing.yaml")]) == 1
        capsys.readouterr()

    def test_run_twice_is_byte_identical(self, tmp_path, capsys):
        cfg = write_config(tmp_path, rounds=2, seeds=[0, 1])
        out_dir = tmp_path / "out"
        assert main(["run", str(cfg)]) == 0
        first = snapshot(out_dir)
        assert main(["run", str(cfg)]) == 0
        second = snapshot(out_dir)
        assert first == second
        assert any(name.endswith(".csv") for name in first)
        assert "manifest.json" in first
        capsys.readouterr()

    def test_manifest_replay_is_byte_identical(self, tmp_path, capsys):
        cfg = write_config(tmp_path, rounds=2)
        out_dir = tmp_path / "out"
        assert main(["run", str(cfg)]) == 0
        first = snapshot(out_dir)
        assert main(["run", str(out_dir / "manifest.json")]) == 0
        assert snapshot(out_dir) == first
        capsys.readouterr()

    def test_zero_rounds_writes_header_only(self, tmp_path, capsys):
        cfg = write_config(tmp_path, rounds=0)
        assert main(["run", str(cfg)]) == 0
        out_dir = tmp_path / "out"
        csvs = list(out_dir.glob("*.csv"))
        assert csvs
        assert read_metrics_csv(csvs[0]) == []
        assert (out_dir / "manifest.json").exists()
        capsys.readouterr()

    def test_divergence_exit_code(self, tmp_path, capsys, monkeypatch):
        import overlap_sgd.runner as runner_mod

        class ExplodingOracle:
            def __init__(self, **kwargs):
                self.dim = None

            def gradient(self, w, worker, round_index, step):
                return np.full(w.size, 1e200)

        monkeypatch.setattr(runner_mod, "LogisticOracle", ExplodingOracle)
        cfg = write_config(tmp_path, rounds=2)
        assert main(["run", str(cfg)]) == 2
        manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
        assert any(r["status"].startswith("diverged") for r in manifest["runs"])
        capsys.readouterr()

    @pytest.mark.filterwarnings("ignore:worker .* received zero examples")
    def test_starved_worker_skips_seed_without_failing_suite(self, tmp_path, capsys):
        # 3 examples over 4 workers: some pool is empty by pigeonhole
        cfg = write_config(
            tmp_path,
            dataset={"synthetic": {"dim": 4, "n_examples": 3, "separation": 1.0, "seed": 0}},
            val_fraction=0.0,
            partition={"mode": "dirichlet", "alpha": 1.0},
            step_times=[1, 1, 1, 1],
            comm_seconds=0,
            batch_size=2,
            rounds=1,
        )
        assert main(["run", str(cfg)]) == 0
        manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
        assert all(r["status"].startswith("skipped") for r in manifest["runs"])
        csvs = list((tmp_path / "out").glob("*.csv"))
        assert csvs and read_metrics_csv(csvs[0]) == []
        capsys.readouterr()

    def test_fairness_hashes_do_not_depend_on_method_list(self, tmp_path):
        raw_a = base_config_dict(methods=["local_sparse"], output_dir=str(tmp_path / "a"))
        raw_b = base_config_dict(
            methods=["overlap_delay_corrected", "overlap_overwrite"], output_dir=str(tmp_path / "b")
        )
        cfg_a, issues_a = validate_config(raw_a)
        cfg_b, issues_b = validate_config(raw_b)
        assert not issues_a and not issues_b
        res_a = run_suite(cfg_a)
        res_b = run_suite(cfg_b)
        hashes_a = json.loads(Path(res_a.manifest_path).read_text())["artifacts"]
        hashes_b = json.loads(Path(res_b.manifest_path).read_text())["artifacts"]
        assert hashes_a == hashes_b

    def test_per_worker_sidecar(self, tmp_path, capsys):
        cfg = write_config(tmp_path, rounds=2, eval_per_worker=True)
        assert main(["run", str(cfg)]) == 0
        sidecars = list((tmp_path / "out").glob("*_workers.jsonl"))
        assert sidecars
        rows = [json.loads(ln) for ln in sidecars[0].read_text().splitlines()]
        assert len(rows) == 3 * 2  # (initial + 2 rounds) x 2 workers
        assert {"round", "worker", "train_loss", "train_accuracy"} <= set(rows[0])
        capsys.readouterr()

    def test_theory_respects_pinned_analysis_params(self, tmp_path):
        raw = base_config_dict(
            sparsity=0.5,
            theory={"alpha": 0.2, "beta": 0.3},
            output_dir=str(tmp_path / "t"),
        )
        config, issues = validate_config(raw)
        assert not issues
        from overlap_sgd.runner import theory_report

        report = theory_report(config)
        assert report["bound_params"]["alpha"] == 0.2
        assert report["bound_params"]["beta"] == 0.3

    def test_manifest_records_derived_quantities(self, tmp_path, capsys):
        cfg = write_config(tmp_path, step_times=[1, 2, 3, 6], compute_periods=3, comm_seconds=6,
                           sparsity=0.3, rounds=1)
        assert main(["run", str(cfg)]) == 0
        manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
        derived = manifest["derived"]
        assert derived["pre_steps"] == [18, 9, 6, 3]
        assert derived["overlap_steps"] == [6, 3, 2, 1]
        assert derived["round_seconds"] == 24
        assert derived["mask_size"] == rand_k_size(0.3, derived["dim"])
        capsys.readouterr()


class TestOtherCommands:
    def test_validate_command(self, tmp_path, capsys):
        cfg = write_config(tmp_path)
        assert main(["validate", str(cfg)]) == 0
        out = capsys.readouterr().out
        assert "config ok" in out
        bad = tmp_path / "bad.yaml"
        bad.write_text(yaml.safe_dump(base_config_dict(comm_seconds=3)), encoding="utf-8")
        assert main(["validate", str(bad)]) == 1

    def test_theory_command_emits_json(self, tmp_path, capsys):
        cfg = write_config(tmp_path, stepsize=0.001)
        assert main(["theory", str(cfg)]) == 0
        report = json.loads(capsys.readouterr().out)
        assert "constants" in report and "complexity" in report
        assert report["complexity"]["rounds"] >= 1

    def test_gen_data_writes_loadable_libsvm(self, tmp_path, capsys):
        spec = tmp_path / "blobs.yaml"
        out_file = tmp_path / "data" / "blobs.libsvm"
        spec.write_text(
            yaml.safe_dump({"dim": 6, "n_examples": 30, "separation": 2.0, "seed": 1, "out": str(out_file)}),
            encoding="utf-8",
        )
        assert main(["gen-data", str(spec)]) == 0
        data = load_libsvm(out_file)
        assert data.n_examples == 30
        assert data.dim == 6
        capsys.readouterr()

    def test_gen_data_requires_out(self, tmp_path, capsys):
        spec = tmp_path / "nospec.yaml"
        spec.write_text("dim: 3\n", encoding="utf-8")
        assert main(["gen-data", str(spec)]) == 1
        capsys.readouterr()
