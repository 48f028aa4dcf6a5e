import pytest

from asr_oracle_service import ModelLoadError, ServiceConfig
from asr_oracle_service import cli


@pytest.fixture
def captured_serve(monkeypatch):
    seen = {}

    def fake_serve(config):
        seen["config"] = config

    monkeypatch.setattr(cli, "serve", fake_serve)
    return seen


def test_defaults_flow_into_config(captured_serve):
    assert cli.main([]) == 0
    cfg = captured_serve["config"]
    assert cfg == ServiceConfig()


def test_flags_override_defaults(captured_serve):
    code = cli.main([
        "--model", "builtin-segment-grid",
        "--host", "0.0.0.0",
        "--port", "9001",
        "--max-seconds", "2.5",
        "--auth-token", "hunter2",
    ])
    assert code == 0
    cfg = captured_serve["config"]
    assert cfg.host == "0.0.0.0"
    assert cfg.port == 9001
    assert cfg.max_audio_seconds == 2.5
    assert cfg.auth_token == "hunter2"


def test_token_falls_back_to_env(captured_serve, monkeypatch):
    monkeypatch.setenv(cli.AUTH_TOKEN_ENV, "from-env")
    assert cli.main([]) == 0
    assert captured_serve["config"].auth_token == "from-env"


def test_flag_beats_env(captured_serve, monkeypatch):
    monkeypatch.setenv(cli.AUTH_TOKEN_ENV, "from-env")
    assert cli.main(["--auth-token", "from-flag"]) == 0
    assert captured_serve["config"].auth_token == "from-flag"


def test_invalid_config_exits_2(capsys):
    assert cli.main(["--max-seconds", "0"]) == 2
    assert "positive" in capsys.readouterr().err


def test_model_load_failure_exits_1(monkeypatch, capsys):
    def broken(config):
        raise ModelLoadError("no such checkpoint")

    monkeypatch.setattr(cli, "serve", broken)
    assert cli.main([]) == 1
    assert "no such checkpoint" in capsys.readouterr().err
