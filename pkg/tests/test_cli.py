import json

import pytest
from click.testing import CliRunner

from spadal.cli import main
from spadal.dataset import Manifest


@pytest.fixture()
def runner():
    return CliRunner()


def run_gen(runner, out_dir, classes="sphere,box", per_class=2, size="8x8", seed=0):
    return runner.invoke(main, [
        "gen", "--out", str(out_dir), "--classes", classes,
        "--per-class", str(per_class), "--size", size, "--seed", str(seed)])


@pytest.fixture(scope="module")
def gen_and_sim(tmp_path_factory):
    """Shared tiny generated + simulated dataset for run-al / sweep tests."""
    root = tmp_path_factory.mktemp("cli")
    runner = CliRunner()
    r = runner.invoke(main, [
        "gen", "--out", str(root / "raw"), "--classes", "sphere,box",
        "--per-class", "5", "--size", "8x8", "--train-fraction", "0.8",
        "--seed", "1"])
    assert r.exit_code == 0, r.output
    r = runner.invoke(main, [
        "simulate", "--manifest", str(root / "raw" / "manifest.json"),
        "-M", "4", "--out", str(root / "data"), "--seed", "1"])
    assert r.exit_code == 0, r.output
    return root


class TestGen:
    def test_entry_count(self, runner, tmp_path):
        r = run_gen(runner, tmp_path / "d", classes="sphere,box,pyramid",
                    per_class=4)
        assert r.exit_code == 0, r.output
        m = Manifest.load(tmp_path / "d" / "manifest.json")
        assert len(m.entries) == 12
        assert (tmp_path / "d" / "resolved_config.json").exists()

    def test_reproducible_manifest(self, runner, tmp_path):
        run_gen(runner, tmp_path / "a", seed=3)
        run_gen(runner, tmp_path / "b", seed=3)
        a = (tmp_path / "a" / "manifest.json").read_bytes()
        b = (tmp_path / "b" / "manifest.json").read_bytes()
        assert a == b

    def test_unknown_class(self, runner, tmp_path):
        r = run_gen(runner, tmp_path / "d", classes="sphere,dragon")
        assert r.exit_code == 2
        assert "unknown class" in r.output

    def test_bad_size(self, runner, tmp_path):
        r = runner.invoke(main, ["gen", "--out", str(tmp_path / "d"),
                                 "--size", "banana"])
        assert r.exit_code == 2


class TestSimulate:
    def test_missing_manifest(self, runner, tmp_path):
        r = runner.invoke(main, [
            "simulate", "--manifest", str(tmp_path / "nope.json"),
            "--out", str(tmp_path / "o")])
        assert r.exit_code == 1
        assert "not found" in r.output

    def test_condition_count_mismatch(self, runner, tmp_path):
        run_gen(runner, tmp_path / "raw", per_class=1)
        r = runner.invoke(main, [
            "simulate", "--manifest", str(tmp_path / "raw" / "manifest.json"),
            "-M", "3", "--out", str(tmp_path / "o")])  # default conditions = 4
        assert r.exit_code == 2
        assert "does not match" in r.output

    def test_images_per_entry(self, gen_and_sim):
        data = gen_and_sim / "data"
        m = Manifest.load(data / "manifest.json")
        sid = m.entries[0].id
        names = sorted(p.name for p in (data / "images").glob(f"{sid}_*.dph1"))
        assert names == [f"{sid}_obs.dph1"] + [f"{sid}_var{j}.dph1" for j in range(4)]


class TestRunAl:
    def test_csv_outputs(self, runner, gen_and_sim, tmp_path):
        out = tmp_path / "al"
        r = runner.invoke(main, [
            "run-al", "--data", str(gen_and_sim / "data"), "--strategy", "random",
            "--rounds", "1", "--batch", "2", "--ncand", "4", "--initial", "2",
            "--epochs", "2", "--seeds", "0,1", "--out", str(out)])
        assert r.exit_code == 0, r.output
        assert (out / "metrics_random_seed0.csv").exists()
        assert (out / "metrics_random_seed1.csv").exists()
        agg = (out / "metrics_random_aggregate.csv").read_text()
        assert agg.splitlines()[0].startswith("round,labeled_count,accuracy_mean,accuracy_std")
        cfg = json.loads((out / "resolved_config.json").read_text())
        assert cfg["command"] == "run-al" and cfg["seeds"] == [0, 1]

    def test_determinism(self, runner, gen_and_sim, tmp_path):
        csvs = []
        for name in ("x", "y"):
            out = tmp_path / name
            r = runner.invoke(main, [
                "run-al", "--data", str(gen_and_sim / "data"),
                "--strategy", "entropy", "--rounds", "1", "--batch", "1",
                "--initial", "2", "--epochs", "2", "--seeds", "0",
                "--out", str(out)])
            assert r.exit_code == 0, r.output
            csvs.append((out / "metrics_entropy_seed0.csv").read_bytes())
        assert csvs[0] == csvs[1]

    def test_budget_exceeds_pool(self, runner, gen_and_sim, tmp_path):
        r = runner.invoke(main, [
            "run-al", "--data", str(gen_and_sim / "data"), "--rounds", "10",
            "--batch", "10", "--initial", "10", "--out", str(tmp_path / "o")])
        assert r.exit_code == 2
        assert "budget" in r.output


class TestQualitySweep:
    def test_rows_and_trend(self, runner, gen_and_sim, tmp_path):
        out = tmp_path / "sweep.csv"
        r = runner.invoke(main, [
            "quality-sweep", "--data", str(gen_and_sim / "raw"),
            "--msppp", "0.5,2,8", "--scenes", "4", "--out", str(out)])
        assert r.exit_code == 0, r.output
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "msppp,rmse_mean,ssim_mean"
        assert len(lines) == 4
        rmses = [float(l.split(",")[1]) for l in lines[1:]]
        ssims = [float(l.split(",")[2]) for l in lines[1:]]
        assert rmses[0] > rmses[-1]
        assert ssims[0] < ssims[-1]

    def test_empty_sweep(self, runner, gen_and_sim, tmp_path):
        r = runner.invoke(main, [
            "quality-sweep", "--data", str(gen_and_sim / "raw"),
            "--msppp", ",", "--out", str(tmp_path / "s.csv")])
        assert r.exit_code == 2
