import json

import numpy as np
import pytest
from typer.testing import CliRunner

from mrkernel import gram as gram_io
from mrkernel.cli import app
from mrkernel.imaging import load_dataset
from mrkernel.oracle import OracleResult

runner = CliRunner()


@pytest.fixture
def dataset_file(tmp_path):
    path = tmp_path / "d.mrkd"
    result = runner.invoke(app, ["synth", "--per-class", "6", "--splits", "2", "--depth", "1", "--seed", "7", "--out", str(path)])
    assert result.exit_code == 0, result.output
    return path


def _gram(data, out, *extra):
    return runner.invoke(app, ["gram", "--data", str(data), "--out", str(out), *extra])


def _error_line(output: str) -> dict:
    lines = [line for line in output.splitlines() if line.startswith("{")]
    return json.loads(lines[-1])


class TestSynth:
    def test_record_count(self, tmp_path):
        path = tmp_path / "d.mrkd"
        result = runner.invoke(app, ["synth", "--per-class", "10", "--splits", "2", "--depth", "1", "--seed", "7", "--out", str(path)])
        assert result.exit_code == 0
        assert len(load_dataset(path).records) == 20

    def test_rerun_identical(self, tmp_path, dataset_file):
        again = tmp_path / "again.mrkd"
        runner.invoke(app, ["synth", "--per-class", "6", "--splits", "2", "--depth", "1", "--seed", "7", "--out", str(again)])
        assert again.read_bytes() == dataset_file.read_bytes()

    def test_zero_per_class_is_usage_error(self, tmp_path):
        result = runner.invoke(app, ["synth", "--per-class", "0", "--out", str(tmp_path / "x")])
        assert result.exit_code == 2


class TestIngest:
    def test_missing_image(self, tmp_path):
        manifest = tmp_path / "list.txt"
        manifest.write_text("nope.ppm,0\n")
        result = runner.invoke(app, ["ingest", "--manifest", str(manifest), "--splits", "2", "--depth", "1", "--out", str(tmp_path / "d")])
        assert result.exit_code == 1
        error = _error_line(result.output)
        assert error["error"] == "ManifestError"
        assert error["details"]["line"] == 1


class TestGram:
    def test_epsilon_echoed(self, tmp_path, dataset_file):
        out = tmp_path / "g.mrkg"
        result = _gram(dataset_file, out, "--kernel", "rbf:a=0.25", "--epsilon", "1/alpha", "--threads", "1")
        assert result.exit_code == 0, result.output
        run = gram_io.load(out).provenance["run"]
        assert run["options"]["epsilon_value"] == 0.25
        assert run["options"]["kernel"] == "rbf:a=0.25,b=1.0,rho=0.01"

    def test_threads_do_not_change_file(self, tmp_path, dataset_file):
        one, many = tmp_path / "one.mrkg", tmp_path / "many.mrkg"
        assert _gram(dataset_file, one, "--threads", "1").exit_code == 0
        assert _gram(dataset_file, many, "--threads", "8").exit_code == 0
        assert one.read_bytes() == many.read_bytes()

    def test_csv(self, tmp_path, dataset_file):
        out = tmp_path / "g.mrkg"
        assert _gram(dataset_file, out, "--csv", "--dense").exit_code == 0
        lines = (tmp_path / "g.mrkg.csv").read_text().splitlines()
        assert len(lines) == 2 + 12

    def test_bad_kernel(self, tmp_path, dataset_file):
        result = _gram(dataset_file, tmp_path / "g", "--kernel", "poly")
        assert result.exit_code == 1
        assert _error_line(result.output)["error"] == "ConfigError"


class TestCheckOracle:
    def test_pass(self):
        result = runner.invoke(app, ["check-oracle", "--alpha", "2", "--depth", "1", "--trials", "100", "--seed", "0"])
        assert result.exit_code == 0
        assert "PASS" in result.output

    def test_degenerate(self):
        result = runner.invoke(app, ["check-oracle", "--alpha", "2", "--depth", "0", "--trials", "10", "--seed", "0"])
        assert "max diff: 0.0 " in result.output

    def test_too_large(self):
        result = runner.invoke(app, ["check-oracle", "--alpha", "5", "--depth", "3"])
        assert result.exit_code == 1
        assert _error_line(result.output)["error"] == "EnumerationTooLarge"

    def test_mismatch_reports_json(self, monkeypatch):
        monkeypatch.setattr("mrkernel.cli.run_oracle", lambda *args: OracleResult(1, 1.0, [1.0]))
        result = runner.invoke(app, ["check-oracle"])
        assert result.exit_code == 1
        error = _error_line(result.output)
        assert error["command"] == "check-oracle"
        assert error["error"] == "OracleMismatch"
        assert error["details"]["max_diff"] == 1.0


class TestTrainEvalPsd:
    @pytest.fixture
    def gram_file(self, tmp_path, dataset_file):
        out = tmp_path / "g.mrkg"
        assert _gram(dataset_file, out, "--kernel", "rbf:a=0.25", "--threads", "2").exit_code == 0
        return out

    def test_train(self, tmp_path, gram_file):
        model = tmp_path / "m.txt"
        result = runner.invoke(app, ["train", "--gram", str(gram_file), "--out", str(model)])
        assert result.exit_code == 0, result.output
        assert "training error" in result.output
        assert model.read_text().startswith('# {"command":"train"')

    def test_eval_stdout(self, gram_file):
        args = ["eval", "--gram", str(gram_file), "--splits", "4", "--seed", "3"]
        first = runner.invoke(app, args + ["--threads", "1"])
        second = runner.invoke(app, args + ["--threads", "2"])
        assert first.exit_code == 0
        assert first.output == second.output
        lines = first.output.splitlines()
        assert lines[1] == "split,error_rate"
        assert lines[-1].startswith("mean,")

    def test_eval_file(self, tmp_path, gram_file):
        out = tmp_path / "e.csv"
        result = runner.invoke(app, ["eval", "--gram", str(gram_file), "--out", str(out)])
        assert result.exit_code == 0
        assert len(out.read_text().splitlines()) == 2 + 4 + 1

    def test_psd(self, gram_file):
        result = runner.invoke(app, ["psd", "--gram", str(gram_file)])
        assert result.exit_code == 0
        assert float(result.output.strip()) >= -1e-8

    def test_missing_gram(self, tmp_path):
        result = runner.invoke(app, ["psd", "--gram", str(tmp_path / "none")])
        assert result.exit_code == 1
        assert _error_line(result.output)["error"] == "IoFailure"


def test_sweep_writes_csv(tmp_path):
    out = tmp_path / "sweep.csv"
    result = runner.invoke(app, ["sweep", "--per-class", "4", "--splits", "1", "--threads", "2", "--out", str(out)])
    assert result.exit_code == 0, result.output
    lines = out.read_text().splitlines()
    assert lines[1] == "kernel,mode,alpha,depth,epsilon,mean_error"
    # kernel 4개 × (global 1 + grid 4 × 2)
    assert len(lines) == 2 + 4 * 9
    errors = np.array([float(line.rsplit(",", 1)[1]) for line in lines[2:]])
    assert np.all((errors >= 0.0) & (errors <= 1.0))
