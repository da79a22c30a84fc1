from pathlib import Path

import orjson
import pytest

from app import run
from config import GradcheckConfig, KernelConfig, Settings, configure_logging, init_settings

LAYOUTS = Path(__file__).resolve().parents[2] / "layouts"


class TestSettings:
    def test_defaults(self):
        settings = init_settings({})
        assert settings.log_format == "console"
        assert settings.kernel_precision == "float64"
        assert settings.bench_precision == "float32"
        assert settings.gradcheck_cases == 20
        assert settings.train_lr == 0.05
        assert settings.rollout_hydra is None

    def test_environment_overrides(self):
        settings = init_settings({
            "HYDRANA_KERNEL_THREADS": "3",
            "HYDRANA_KERNEL_CHECKED": "off",
            "HYDRANA_GRADCHECK_EPS": "1e-6",
            "HYDRANA_ROLLOUT_HYDRA": "3x1:4",
            "HYDRANA_DEBUG": "yes",
        })
        assert settings.kernel_threads == 3
        assert settings.kernel_checked is False
        assert settings.gradcheck_eps == 1e-6
        assert settings.rollout_hydra == "3x1:4"
        assert settings.debug is True

    @pytest.mark.parametrize("env", [
        {"HYDRANA_KERNEL_THREADS": "many"},
        {"HYDRANA_KERNEL_CHECKED": "maybe"},
        {"HYDRANA_KERNEL_PRECISION": "float16"},
        {"HYDRANA_LOG_FORMAT": "xml"},
    ])
    def test_invalid_values(self, env):
        with pytest.raises(ValueError, match=next(iter(env))):
            Settings.load_from_env(env)

    def test_part_configs(self):
        settings = init_settings({"HYDRANA_KERNEL_THREADS": "2", "HYDRANA_GRADCHECK_CASES": "4"})
        assert KernelConfig.load_from_settings(settings).as_dict() == {
            "precision": "float64", "threads": 2, "checked": True,
        }
        gradcheck = GradcheckConfig.load_from_settings(settings)
        assert (gradcheck.eps, gradcheck.tolerance, gradcheck.cases) == (1e-5, 1e-5, 4)


class TestLogging:
    def test_rejects_unknown_format(self):
        with pytest.raises(ValueError):
            configure_logging("INFO", "xml")

    def test_rejects_unknown_level(self):
        with pytest.raises(ValueError):
            configure_logging("LOUD", "console")

    def test_json_events_on_stderr(self, capsys):
        code = run(["configs", "--layout", str(LAYOUTS / "styleswin256.toml"),
                    "--log-format", "json", "--log-level", "INFO", "--threads", "1"])
        captured = capsys.readouterr()
        assert code == 0
        events = [orjson.loads(line) for line in captured.err.splitlines() if line.strip()]
        counted = [e for e in events if e["event"] == "layout_counted"]
        assert counted and counted[0]["total"] == 13176
        assert captured.out.splitlines()[-1] == "total\t13176"


class TestEnvironmentThroughCli:
    def test_bad_environment_exits_2(self, monkeypatch, capsys):
        monkeypatch.setenv("HYDRANA_KERNEL_PRECISION", "float16")
        assert run(["configs", "--resolution", "8"]) == 2
        assert "HYDRANA_KERNEL_PRECISION" in capsys.readouterr().err

    def test_gradcheck_cases_from_environment(self, monkeypatch, capsys):
        monkeypatch.setenv("HYDRANA_GRADCHECK_CASES", "0")
        assert run(["gradcheck", "--threads", "1"]) == 0
        assert all(" PASS " in line for line in capsys.readouterr().out.splitlines())

    def test_rollout_groups_from_environment(self, monkeypatch, tmp_path):
        monkeypatch.setenv("HYDRANA_ROLLOUT_HYDRA", "3x1:1,3x2:1")
        assert run(["rollout", "--outdir", str(tmp_path), "--threads", "1"]) == 0
        assert len(list(tmp_path.iterdir())) == 4
