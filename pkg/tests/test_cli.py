import json

import pytest

from mathrel.cli import main
from mathrel.config import ConfigError, load_config

SMALL = """\
generate:
  n: 120
  seed: 3
model:
  d_model: 16
  n_heads: 2
  ffn_dim: 32
  max_len: 40
train:
  epochs: 2
  batch_size: 16
explain:
  n_sample_texts: 1
  bar_texts: 4
  exact_limit: 10
  n_permutations: 64
"""


@pytest.fixture
def small_config(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text(SMALL + f"output: {tmp_path / 'out'}\n", encoding="utf-8")
    return path


def test_defaults_from_empty_file(tmp_path, monkeypatch):
    monkeypatch.delenv("MATHREL_SEED", raising=False)
    (tmp_path / "e.yaml").write_text("", encoding="utf-8")
    cfg = load_config(tmp_path / "e.yaml")
    assert cfg == load_config()
    assert cfg.train.learning_rate == 2e-4 and cfg.train.batch_size == 12 and cfg.train.epochs == 10
    assert cfg.generate.n == 3284 and cfg.explain.exact_limit == 15 and cfg.explain.n_permutations == 2000


def test_config_errors_name_the_field(tmp_path):
    p = tmp_path / "bad.yaml"
    p.write_text("train:\n  learning_rate: -1\n", encoding="utf-8")
    with pytest.raises(ConfigError) as err:
        load_config(p)
    assert err.value.field == "train.learning_rate"
    p.write_text("train:\n  learnig_rate: 0.1\n", encoding="utf-8")
    with pytest.raises(ConfigError) as err:
        load_config(p)
    assert err.value.field == "train.learnig_rate"
    p.write_text("model:\n  d_model: sixty\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config(p)


def test_layering(tmp_path, monkeypatch):
    p = tmp_path / "c.yaml"
    p.write_text("train:\n  epochs: 40\n", encoding="utf-8")
    assert load_config(p).train.epochs == 40
    assert load_config(p, {"train.epochs": 3}).train.epochs == 3
    monkeypatch.setenv("MATHREL_SEED", "17")
    cfg = load_config()
    assert cfg.train.seed == cfg.generate.seed == cfg.explain.seed == 17
    p.write_text("train:\n  seed: 5\n", encoding="utf-8")
    assert load_config(p).train.seed == 5


def test_usage_errors_exit_2(tmp_path, capsys):
    assert main(["train", "--corpus", str(tmp_path / "missing.csv"), "--output", str(tmp_path)]) == 2
    assert "corpus not found" in capsys.readouterr().err
    (tmp_path / "bad.yaml").write_text("train:\n  batch_size: 0\n", encoding="utf-8")
    assert main(["gradcheck", "--config", str(tmp_path / "bad.yaml")]) == 2
    assert "train.batch_size" in capsys.readouterr().err
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2


def test_validate_reports_mismatch(tmp_path, capsys):
    p = tmp_path / "c.csv"
    p.write_text("id,text,entity1,entity2,relation\n"
                 "a,Two thousand multiplied by five is ten thousand.,Two thousand,Two,Multiplication\n"
                 "b,The square root of four is two.,four,two,Square Root\n", encoding="utf-8")
    assert main(["validate", "--corpus", str(p)]) == 1
    captured = capsys.readouterr()
    assert "mismatch 1" in captured.out and "a: " in captured.err


def test_pipeline_end_to_end(small_config, tmp_path, capsys):
    out = tmp_path / "out"
    cfg = ["--config", str(small_config), "--verbose", "0"]
    assert main(["generate", *cfg]) == 0
    assert (out / "corpus.csv").is_file()
    assert main(["validate", *cfg]) == 0
    assert main(["train", *cfg, "--epochs", "1"]) == 0
    assert len((out / "history.csv").read_text().splitlines()) == 2
    assert main(["eval", *cfg]) == 0
    doc = json.loads((out / "metrics.json").read_text())
    assert doc["micro"]["f1"] == doc["accuracy"]
    assert main(["explain", *cfg, "--terminal", "--no-color"]) == 0
    printed = capsys.readouterr().out
    assert "f_Addition=" in printed and "\x1b[" not in printed
    assert (out / "explanations" / "report.html").is_file()
    assert main(["report", *cfg]) == 0
    assert "Confusion matrix" in (out / "index.html").read_text()


def test_gradcheck_command(capsys):
    assert main(["gradcheck", "--samples", "3", "--batch", "2", "--length", "6", "--verbose", "0"]) == 0
    assert "max relative error" in capsys.readouterr().out
