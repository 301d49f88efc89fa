import pytest

from hmdsim import cli, config
from hmdsim.report import read_rows

SMALL = """
[workload]
n_pages = 64
length = 6000
window_pages = 8
shift_every = 1000
[telemetry]
marking_interval = 0.0001
[bandit]
max_train = 40
"""


@pytest.fixture
def cfg_file(tmp_path):
    path = tmp_path / "small.ini"
    path.write_text(SMALL)
    return str(path)


def _rows(path):
    return read_rows(path)


def test_defaults_cover_every_key():
    cp = config.defaults()
    assert {(s, n) for s in cp.sections() for n in cp[s]} == {(k.section, k.name) for k in config.KEYS}
    ref = config.reference()
    assert all(k.name in ref for k in config.KEYS)


def test_unknown_keys_rejected(tmp_path):
    bad = tmp_path / "bad.ini"
    bad.write_text("[workload]\nnpages = 3\n")
    with pytest.raises(config.ConfigError):
        config.load(bad)
    bad.write_text("[nonsense]\n")
    with pytest.raises(config.ConfigError):
        config.load(bad)
    with pytest.raises(config.ConfigError):
        config.load(tmp_path / "missing.ini")


def test_env_var_config(cfg_file, monkeypatch):
    monkeypatch.setenv(config.ENV_VAR, cfg_file)
    assert config.load().get("workload", "n_pages") == "64"


def test_schedule_parsing():
    assert config.parse_schedule("") == ()
    assert config.parse_schedule("0.5:0.2, 1:0.4") == ((0.5, 0.2), (1.0, 0.4))
    with pytest.raises(ValueError):
        config.parse_schedule("0.5")


def test_run_replay_is_identical(cfg_file, tmp_path):
    first, second = tmp_path / "a.csv", tmp_path / "b.csv"
    assert cli.main(["run", "--config", cfg_file, "--policy", "adaptive", "--out", str(first)]) == 0
    # the report embeds its config, so it can be fed back in as one
    assert cli.main(["run", "--config", str(first), "--out", str(second)]) == 0
    assert first.read_text() == second.read_text()
    assert _rows(first)[0]["label"] == "adaptive"


def test_missing_trace_is_an_error(cfg_file, tmp_path, capsys):
    missing = tmp_path / "nope.trace"
    assert cli.main(["run", "--config", cfg_file, "--trace", str(missing)]) != 0
    assert str(missing) in capsys.readouterr().err


def test_generate_then_replay_trace(cfg_file, tmp_path):
    trace = tmp_path / "t.trace"
    assert cli.main(["generate", "--config", cfg_file, "--out", str(trace)]) == 0
    a, b = tmp_path / "gen.csv", tmp_path / "file.csv"
    cli.main(["run", "--config", cfg_file, "--out", str(a)])
    cli.main(["run", "--config", cfg_file, "--trace", str(trace), "--out", str(b)])
    assert _rows(a)[0]["completion_time"] == _rows(b)[0]["completion_time"]


def test_sweep_rows(cfg_file, tmp_path):
    out = tmp_path / "s.csv"
    assert cli.main(["sweep", "--config", cfg_file, "--out", str(out)]) == 0
    rows = _rows(out)
    assert len(rows) == 9
    assert all(float(r["runtime_degradation"]) >= 1.0 for r in rows)


def test_oracle_writes_swaps(cfg_file, tmp_path):
    swaps = tmp_path / "swaps.csv"
    assert cli.main(["oracle", "--config", cfg_file, "--swaps", str(swaps)]) == 0
    lines = swaps.read_text().splitlines()
    assert lines[0] == "time_ps,promoted,demoted" and len(lines) > 1


def test_train_eval_and_ablate_full_row(cfg_file, tmp_path):
    agent = tmp_path / "agent.bin"
    log = tmp_path / "train.txt"
    assert cli.main(["train", "--config", cfg_file, "--agent", str(agent), "--out", str(log)]) == 0
    assert "distinct_simulations" in log.read_text()
    ev, ab = tmp_path / "eval.csv", tmp_path / "ablate.csv"
    assert cli.main(["eval", "--config", cfg_file, "--agent", str(agent), "--out", str(ev)]) == 0
    assert cli.main(["ablate", "--config", cfg_file, "--no-burst", "--out", str(ab)]) == 0
    rows = _rows(ab)
    assert [r["label"] for r in rows] == ["full", "no-burst"]
    assert rows[0]["completion_time"] == _rows(ev)[0]["completion_time"]


def test_eval_rejects_garbage_agent(cfg_file, tmp_path, capsys):
    bad = tmp_path / "agent.bin"
    bad.write_bytes(b"junk")
    assert cli.main(["eval", "--config", cfg_file, "--agent", str(bad)]) == 2
    assert "hmdsim: error" in capsys.readouterr().err


def test_keys_command(capsys):
    assert cli.main(["keys"]) == 0
    assert "marking_interval" in capsys.readouterr().out
