from pathlib import Path

import pytest

from app import run
from app.utils.layout import load_layout

LAYOUTS = Path(__file__).resolve().parents[2] / "layouts"


def test_layout_total(capsys):
    code = run(["configs", "--layout", str(LAYOUTS / "styleswin256.toml"), "--threads", "1"])
    lines = capsys.readouterr().out.splitlines()
    assert code == 0
    assert lines[-1] == "total\t13176"
    assert lines[0] == "8\t16\t4"
    assert len(lines) == 7


def test_large_layout_total(capsys):
    assert run(["configs", "--layout", str(LAYOUTS / "styleswin1024.toml"), "--threads", "1"]) == 0
    total = int(capsys.readouterr().out.splitlines()[-1].split("\t")[1])
    assert total == 47256
    assert total > 47000


def test_resolutions(capsys):
    assert run(["configs", "--resolution", "8", "--resolution", "12", "--threads", "1"]) == 0
    assert capsys.readouterr().out.splitlines() == ["8\t4", "12\t9"]


def test_needs_input(capsys):
    assert run(["configs", "--threads", "1"]) == 2
    assert "error" in capsys.readouterr().err


def test_odd_resolution(capsys):
    assert run(["configs", "--resolution", "9", "--threads", "1"]) == 2


@pytest.mark.parametrize("body", [
    "transformers_per_level = 2\n",
    "transformers_per_level = 2\n[[level]]\nresolution = 7\nheads = 4\n",
    "transformers_per_level = 0\n[[level]]\nresolution = 8\nheads = 4\n",
    "transformers_per_level = 2\n[[level]]\nresolution = 8\nheads = 4\ncolor = 1\n",
    "transformers_per_level = [\n",
])
def test_malformed_layout(tmp_path, capsys, body):
    path = tmp_path / "bad.toml"
    path.write_text(body)
    assert run(["configs", "--layout", str(path), "--threads", "1"]) == 2
    assert "error" in capsys.readouterr().err


def test_missing_layout(tmp_path):
    assert run(["configs", "--layout", str(tmp_path / "absent.toml"), "--threads", "1"]) == 1


def test_layout_pairs():
    layout = load_layout(LAYOUTS / "styleswin256.toml")
    assert layout.transformers_per_level == 2
    assert layout.pairs() == [(16, 8), (16, 16), (16, 32), (16, 64), (8, 128), (4, 256)]
