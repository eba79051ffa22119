"""CLI harness: argument handling, exit codes, stage wiring."""

import pytest

from softsrv.cli import main
from softsrv.config import preset_config, save_config
from softsrv.records import read_records

from test_pipeline import mini_config


@pytest.fixture(scope="module")
def mini_ini(tmp_path_factory):
    path = tmp_path_factory.mktemp("cfg") / "mini.ini"
    save_config(str(path), mini_config())
    return str(path)


def test_missing_config_file_exits_two(tmp_path, capsys):
    code = main(["run", "--config", str(tmp_path / "ghost.ini"), "--out", str(tmp_path / "o")])
    assert code == 2
    assert "config error" in capsys.readouterr().err


def test_invalid_config_value_exits_two(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("[generation]\nmethod = osmosis\n", encoding="utf-8")
    code = main(["run", "--config", str(bad), "--out", str(tmp_path / "o")])
    assert code == 2


def test_unknown_method_flag_is_rejected_by_argparse(mini_ini, tmp_path):
    with pytest.raises(SystemExit) as err:
        main(["generate", "--config", mini_ini, "--out", str(tmp_path / "o"), "--method", "osmosis"])
    assert err.value.code == 2


def test_stage_failure_maps_to_stage_exit_code(tmp_path, capsys):
    cfg = mini_config()
    cfg.mauve.k = 10**6
    path = tmp_path / "broken.ini"
    save_config(str(path), cfg)
    code = main(["run", "--config", str(path), "--out", str(tmp_path / "o")])
    assert code == 17  # mauve stage
    assert "stage 'mauve'" in capsys.readouterr().err


def test_run_prints_the_summary(mini_ini, tmp_path, capsys):
    out = tmp_path / "run"
    code = main(["run", "--config", mini_ini, "--out", str(out)])
    assert code == 0
    text = capsys.readouterr().out
    assert text.startswith("experiment summary")
    assert "mauve_score" in text
    assert (out / "summary.txt").read_text(encoding="utf-8") == text


def test_staged_commands_share_artifacts(mini_ini, tmp_path, capsys):
    out = str(tmp_path / "staged")
    assert main(["pretrain", "--config", mini_ini, "--out", out]) == 0
    assert main(["train", "--config", mini_ini, "--out", out]) == 0
    assert main(["generate", "--config", mini_ini, "--out", out]) == 0
    assert main(["postprocess", "--config", mini_ini, "--out", out]) == 0
    assert main(["mauve", "--config", mini_ini, "--out", out]) == 0
    assert main(["student-eval", "--config", mini_ini, "--out", out]) == 0
    text = capsys.readouterr().out
    assert "answered records" in text
    assert "mauve_score" in text
    assert "student_ppl_ratio" in text


def test_method_flag_overrides_the_config(mini_ini, tmp_path):
    out = tmp_path / "pt"
    code = main(["generate", "--config", mini_ini, "--out", str(out), "--method", "pt"])
    assert code == 0
    records = read_records(out / "questions.jsonl")
    assert all(r.method_tag == "PT" for r in records)


def test_standalone_mauve_scores_two_files(mini_ini, tmp_path, capsys):
    out = str(tmp_path / "m")
    assert main(["pretrain", "--config", mini_ini, "--out", out]) == 0
    capsys.readouterr()
    gen = tmp_path / "gen.txt"
    ref = tmp_path / "ref.txt"
    gen.write_text("Ava has 3 apples.\nBen has 4 pears.\n\n", encoding="utf-8")
    ref.write_text("Ava has 3 apples.\nBen has 4 pears.\n", encoding="utf-8")
    cfg = mini_config()
    cfg.mauve.k = 2
    path = tmp_path / "m.ini"
    save_config(str(path), cfg)
    code = main([
        "mauve", "--config", str(path), "--out", out,
        "--gen", str(gen), "--ref", str(ref),
    ])
    assert code == 0
    first = capsys.readouterr().out.splitlines()[0]
    key, value = first.split("\t")
    assert key == "mauve_score"
    assert float(value) == pytest.approx(1.0, abs=1e-6)  # identical files


def test_standalone_mauve_requires_both_files(mini_ini, tmp_path, capsys):
    out = str(tmp_path / "m2")
    assert main(["pretrain", "--config", mini_ini, "--out", out]) == 0
    code = main(["mauve", "--config", mini_ini, "--out", out, "--gen", "only.txt"])
    assert code == 2
    assert "--gen and --ref" in capsys.readouterr().err


def test_seed_flag_rewrites_stage_seeds(tmp_path):
    out = tmp_path / "seeded"
    cfg = mini_config()
    path = tmp_path / "s.ini"
    save_config(str(path), cfg)
    code = main(["pretrain", "--config", str(path), "--out", str(out), "--seed", "5000"])
    assert code == 0
    text = (out / "config.ini").read_text(encoding="utf-8")
    assert "corpus = 5001" in text
    assert "student = 5009" in text
