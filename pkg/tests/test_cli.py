"""Command-line interface tests."""

import pytest

from siplink.cli import main
from siplink.harness import load_results, read_dataset
from siplink.scenario import ScenarioConfig, write_config_file
from siplink import fec


@pytest.fixture
def small_config(tmp_path):
    cfg = ScenarioConfig(num_subcarriers=24, num_symbols=14, master_seed=3)
    path = tmp_path / "scenario.cfg"
    write_config_file(cfg, path)
    return path


def test_selftest_passes(capsys):
    assert main(["selftest"]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out
    assert out.count("PASS") == 7


def test_sweep_writes_outputs(tmp_path, small_config):
    out = tmp_path / "result"
    rc = main(
        [
            "sweep",
            "--config",
            str(small_config),
            "--receiver",
            "genie-lmmse",
            "--scheme",
            "superimposed",
            "--snr-start",
            "0",
            "--snr-stop",
            "4",
            "--snr-step",
            "4",
            "--drops",
            "2",
            "--out",
            str(out),
        ]
    )
    assert rc == 0
    assert (tmp_path / "result.csv").exists()
    assert (tmp_path / "result.json").exists()
    assert (tmp_path / "result.png").exists()
    res = load_results(tmp_path / "result.json")
    assert len(res.points) == 2
    assert res.metadata["master_seed"] == 3


def test_sweep_seed_override(tmp_path, small_config):
    for seed in (3, 4):
        main(
            [
                "sweep",
                "--config",
                str(small_config),
                "--receiver",
                "genie-lmmse",
                "--snr-start",
                "2",
                "--snr-stop",
                "2",
                "--snr-step",
                "1",
                "--drops",
                "2",
                "--seed",
                str(seed),
                "--out",
                str(tmp_path / f"r{seed}"),
            ]
        )
    a = load_results(tmp_path / "r3.json")
    b = load_results(tmp_path / "r4.json")
    assert a.metadata["master_seed"] == 3
    assert b.metadata["master_seed"] == 4


def test_export_dataset_and_alist(tmp_path, small_config):
    out = tmp_path / "train.sipd"
    alist = tmp_path / "code.alist"
    rc = main(
        [
            "export",
            "--config",
            str(small_config),
            "--records",
            "3",
            "--out",
            str(out),
            "--alist",
            str(alist),
        ]
    )
    assert rc == 0
    header, records = read_dataset(out)
    assert header["record_count"] == 3
    code = fec.read_alist(alist)
    assert code.n == 24 * 14 * 2


def test_bad_config_key_raises(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("nonsense = 1\n")
    with pytest.raises(ValueError, match="unknown configuration key"):
        main(["export", "--config", str(bad), "--records", "1", "--out", str(tmp_path / "x")])
