import re

import pytest

from ncelm.cli import main
from ncelm.config import CONFIG_KEYS

from test_trainer import toy_corpus


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_schedule_large_preset(capsys):
    code, out, _ = run(capsys, "schedule", "L")
    assert code == 0
    rows = dict(re.findall(r"^\s*(\d+)\s+([\d.]+)$", out, re.M))
    assert all(rows[str(t)] == "1.000000" for t in range(12))
    assert rows["12"] == "0.869565"
    assert len(rows) == 55


def test_schedule_stable_output(capsys):
    assert run(capsys, "schedule", "M") == run(capsys, "schedule", "M")


def test_init_report_medium(capsys):
    code, out, _ = run(capsys, "init-report", "M")
    assert code == 0
    assert "glorot_quarter   U(-0.016984, 0.016984)" in out
    assert "U(-0.00849, 0.00849)" in out


def test_help_documents_every_key(capsys):
    for sub in ("train", "eval", "schedule", "init-report", "sample-noise", "grad-check", "consistency"):
        code, out, _ = run(capsys, sub, "--help")
        assert code == 0
        for _, key in CONFIG_KEYS:
            assert f"  {key} (" in out


def test_bad_config_exit_2(capsys, tmp_path):
    p = tmp_path / "bad.ini"
    p.write_text("[model]\nsize = 3\n")
    code, _, err = run(capsys, "schedule", str(p))
    assert code == 2 and "unknown key" in err
    code, _, err = run(capsys, "schedule", "nonexistent")
    assert code == 2 and err


def test_usage_error_exit_2(capsys):
    assert run(capsys, "frobnicate")[0] == 2
    assert run(capsys, "train", "tiny")[0] == 2


def test_train_missing_corpus(capsys, tmp_path):
    code, _, err = run(capsys, "train", "tiny", "--data", str(tmp_path / "none"), "--out", str(tmp_path / "out"))
    assert code == 2 and "no corpus" in err
    assert not (tmp_path / "out").exists()


def test_sample_noise(capsys):
    code, out, _ = run(capsys, "sample-noise", "tiny", "-n", "5000", "--top", "3")
    assert code == 0
    lines = [l for l in out.splitlines() if re.match(r"^\s+\d+ ", l)]
    assert len(lines) == 3
    p, freq = map(float, lines[0].split()[-2:])
    assert abs(p - freq) < 0.02


def test_consistency(capsys):
    code, out, _ = run(capsys, "consistency")
    assert code == 0 and "KL decreasing in k: yes" in out


def test_consistency_bad_counts(capsys):
    assert run(capsys, "consistency", "--counts", "a,b")[0] == 2


def test_grad_check(capsys, tmp_path):
    code, out, _ = run(capsys, "grad-check", "--csv", str(tmp_path / "g.csv"))
    assert code == 0 and "FAIL" not in out
    assert (tmp_path / "g.csv").read_text().startswith("tensor,max_rel_err,coord,h")


def test_train_then_eval(capsys, tmp_path):
    (tmp_path / "data").mkdir()
    toy_corpus(tmp_path / "data")
    cfg = tmp_path / "toy.ini"
    cfg.write_text(
        "[model]\nhidden = 8\nnum_steps = 5\nbatch_size = 4\nmax_vocab = 50\n"
        "[noise]\nk = 5\n[schedule]\ntau = 1\n[train]\nepochs = 2\n"
    )
    code, out, _ = run(capsys, "train", str(cfg), "--data", str(tmp_path / "data"), "--out", str(tmp_path / "out"), "-q")
    assert code == 0
    test_ppl = float(re.search(r"^test ppl: ([\d.]+)", out, re.M).group(1))
    code, out, _ = run(capsys, "eval", str(tmp_path / "out" / "best.ckpt"), "--split", "test")
    assert code == 0
    assert float(out.split()[-1]) == pytest.approx(test_ppl, abs=1e-3)


def test_eval_bad_checkpoint(capsys, tmp_path):
    p = tmp_path / "x.ckpt"
    p.write_bytes(b"garbage")
    assert run(capsys, "eval", str(p))[0] == 2
