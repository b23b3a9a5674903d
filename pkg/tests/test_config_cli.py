import pytest

from ris_nfloc.cli import main
from ris_nfloc.config import ConfigError, config_template, load_config

DESK_INI = """
[scene]
tile_count = 16

[waveform]
subcarriers = 256
spacing_hz = 1.5625e6

[assignment]
frames = 8

[experiment]
trials = 5
seed = 7
"""


@pytest.fixture
def desk_config(tmp_path):
    path = tmp_path / "desk.ini"
    path.write_text(DESK_INI)
    return str(path)


def test_defaults_match_reference_setup():
    cfg = load_config(None)
    assert cfg.tile_count == 64
    assert cfg.subcarriers == 3200
    assert cfg.spacing_hz == pytest.approx(120e3)
    assert cfg.bandwidth_hz == pytest.approx(384e6)
    assert cfg.carrier_hz == pytest.approx(28e9)
    assert cfg.power_dbm == 20.0
    assert cfg.noise_dbm == -8.0
    assert cfg.oversampling == 4
    assert cfg.clock_uncertainty_s == 1e-6
    assert cfg.exclusive_tiles == 4


def test_load_config_overrides(desk_config):
    cfg = load_config(desk_config)
    assert cfg.tile_count == 16
    assert cfg.subcarriers == 256
    assert cfg.frames == 8
    assert cfg.trials == 5
    assert cfg.seed == 7


def test_unknown_key_rejected(tmp_path):
    path = tmp_path / "bad.ini"
    path.write_text("[scene]\nnot_a_key = 3\n")
    with pytest.raises(ConfigError):
        load_config(str(path))
    missing = tmp_path / "nothere.ini"
    with pytest.raises(ConfigError):
        load_config(str(missing))


def test_config_template_round_trips(tmp_path):
    path = tmp_path / "template.ini"
    path.write_text(config_template())
    cfg = load_config(str(path))
    assert cfg == load_config(None)


def test_cli_unknown_subcommand_exits_2(capsys):
    with pytest.raises(SystemExit) as excinfo:
        main(["frobnicate"])
    assert excinfo.value.code == 2


def test_cli_bad_config_exits_2(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("[scene]\nwat = 1\n")
    assert main(["--config", str(bad), "simulate"]) == 2


def test_cli_simulate_writes_trials(desk_config, tmp_path):
    out = tmp_path / "out"
    assert main(["--config", desk_config, "--out", str(out), "simulate"]) == 0
    lines = (out / "trials.csv").read_text().strip().splitlines()
    assert len(lines) == 6


def test_cli_sweep_row_count(desk_config, tmp_path):
    out = tmp_path / "out"
    code = main(
        [
            "--config", desk_config, "--out", str(out), "--trials", "3",
            "sweep", "--var", "L", "--values", "8,16",
        ]
    )
    assert code == 0
    lines = (out / "sweep.csv").read_text().strip().splitlines()
    assert len(lines) == 3


def test_cli_peb_bandwidth_ratio(desk_config, tmp_path):
    out = tmp_path / "out"
    code = main(
        [
            "--config", desk_config, "--out", str(out),
            "peb", "--values", "5e7,4e8",
        ]
    )
    assert code == 0
    lines = (out / "peb.csv").read_text().strip().splitlines()
    assert lines[0] == "sweep_value,peb"
    low = float(lines[1].split(",")[1])
    high = float(lines[2].split(",")[1])
    # the per-tile SNRs do not depend on bandwidth, so the 1/B law is exact
    assert low / high == pytest.approx(8.0, rel=1e-9)


def test_cli_cdf_and_heatmap(desk_config, tmp_path):
    out = tmp_path / "out"
    assert main(["--config", desk_config, "--out", str(out), "cdf"]) == 0
    assert (out / "cdf.csv").exists()
    code = main(
        [
            "--config", desk_config, "--out", str(out), "--trials", "1",
            "heatmap", "--resolution-m", "5",
        ]
    )
    assert code == 0
    lines = (out / "heatmap.csv").read_text().strip().splitlines()
    assert len(lines) == 5


def test_cli_print_config(capsys):
    assert main(["--print-config"]) == 0
    out = capsys.readouterr().out
    assert "[scene]" in out and "tile_count" in out
