"""End-to-end tests for the refold command line."""

import os
import shutil
import subprocess
from pathlib import Path

import numpy as np
import pytest

from refold.checkpoint import load_checkpoint, save_checkpoint
from refold.cli import main
from refold.config import load_train_config

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
TOY = str(CONFIGS / "toy.model")
B3 = str(CONFIGS / "b3_reference.model")
SMOKE = str(CONFIGS / "smoke.train")


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory):
    """One smoke-scale training run shared by the read-only tests."""
    out = tmp_path_factory.mktemp("run")
    rc = main(["train", "--model-config", TOY, "--train-config", SMOKE,
               "--out", str(out)])
    assert rc == 0
    return out


class TestPlan:
    def test_symbolic_table(self, capsys):
        assert main(["plan", "--config", B3]) == 0
        out = capsys.readouterr().out
        rows = [ln for ln in out.splitlines() if ln and ln[0].isdigit()]
        assert len(rows) == 6
        strides = [(ln.split("|")[2].strip(), ln.split("|")[3].strip())
                   for ln in rows]
        assert strides == [("1", "1"), ("2", "1"), ("1", "2"),
                           ("2", "1"), ("1", "2"), ("2", "1")]
        assert "(8C, F/8, T/4)" in rows[-1]

    def test_numeric_section(self, capsys):
        assert main(["plan", "--config", TOY, "--frames", "200"]) == 0
        out = capsys.readouterr().out
        assert "numeric at T=200" in out
        assert "stage 4: (6, 8, 100) -> (12, 4, 100)" in out

    def test_missing_file_exits_2(self, capsys):
        assert main(["plan", "--config", "/no/such/file.model"]) == 2
        assert "config error" in capsys.readouterr().err

    def test_unknown_key_exits_2(self, tmp_path, capsys):
        bad = tmp_path / "bad.model"
        bad.write_text("c0 = 3\nf0 = 16\nstages = 1:1:1:1\nwhat = 7\n")
        assert main(["plan", "--config", str(bad)]) == 2
        assert "what" in capsys.readouterr().err


class TestCost:
    def test_csv_totals(self, capsys):
        assert main(["cost", "--config", TOY]) == 0
        out = capsys.readouterr().out
        lines = out.strip().splitlines()
        assert lines[0] == "name,params,macs"
        body = [ln.split(",") for ln in lines[1:-1]]
        total = lines[-1].split(",")
        assert total[0] == "TOTAL"
        assert int(total[1]) == sum(int(r[1]) for r in body)
        assert int(total[2]) == sum(int(r[2]) for r in body)

    def test_ablation_ratio(self, capsys):
        assert main(["cost", "--config", B3, "--ablate-time"]) == 0
        out = capsys.readouterr().out
        header, row = out.strip().splitlines()
        assert header == "gmacs_with,gmacs_without,ratio"
        with_, without, ratio = map(float, row.split(","))
        assert without > with_
        assert ratio == pytest.approx(without / with_, abs=1e-4)


class TestTrain:
    ARTIFACTS = [
        "manifest.txt", "model.cfg", "train.cfg", "plan.txt", "cost.csv",
        "pretrain.ckpt", "final.ckpt", "metrics.csv", "curves.png",
        "trials.txt", "eval_report.csv", "eval_far_frr.png",
    ]

    def test_artifacts_exist(self, run_dir):
        for name in self.ARTIFACTS:
            assert (run_dir / name).exists(), name
        wavs = sorted(os.listdir(run_dir / "eval_wavs"))
        assert len(wavs) == 8  # 4 speakers x 2 trial utterances
        assert all(w.endswith(".wav") for w in wavs)

    def test_train_cfg_round_trips(self, run_dir):
        cfg = load_train_config(str(run_dir / "train.cfg"))
        assert cfg == load_train_config(SMOKE)

    def test_manifest_mentions_inputs(self, run_dir):
        text = (run_dir / "manifest.txt").read_text()
        assert "seed = 0" in text
        assert "smoke.train" in text

    def test_rerun_is_bitwise_identical(self, run_dir, tmp_path):
        rc = main(["train", "--model-config", TOY, "--train-config", SMOKE,
                   "--out", str(tmp_path)])
        assert rc == 0
        for name in ["pretrain.ckpt", "final.ckpt", "metrics.csv",
                     "eval_report.csv", "curves.png", "eval_far_frr.png"]:
            a = (run_dir / name).read_bytes()
            b = (tmp_path / name).read_bytes()
            assert a == b, name

    def test_bad_train_config_exits_2(self, tmp_path, capsys):
        bad = tmp_path / "bad.train"
        bad.write_text("lr_max = 0.001\nlr_min = 0.1\n")
        rc = main(["train", "--model-config", TOY, "--train-config", str(bad),
                   "--out", str(tmp_path / "out")])
        assert rc == 2
        assert "config error" in capsys.readouterr().err


class TestEval:
    def test_roundtrip_from_run_dir(self, run_dir, tmp_path, capsys):
        rc = main(["eval", "--model-config", TOY,
                   "--checkpoint", str(run_dir / "final.ckpt"),
                   "--trials", str(run_dir / "trials.txt"),
                   "--wav-dir", str(run_dir / "eval_wavs"),
                   "--out", str(tmp_path)])
        assert rc == 0
        assert "EER" in capsys.readouterr().out
        assert (tmp_path / "eval_far_frr.png").exists()
        # wav files quantize to 16 bits, so only expect a close EER
        train_eer = float((run_dir / "eval_report.csv")
                          .read_text().splitlines()[1].split(",")[0])
        eval_eer = float((tmp_path / "eval_report.csv")
                         .read_text().splitlines()[1].split(",")[0])
        assert eval_eer == pytest.approx(train_eer, abs=0.1)

    def test_wrong_model_config_exits_3(self, run_dir, tmp_path, capsys):
        other = tmp_path / "other.model"
        other.write_text("c0 = 2\nf0 = 8\nstages = 1:1:1:1\nembed_dim = 8\n")
        rc = main(["eval", "--model-config", str(other),
                   "--checkpoint", str(run_dir / "final.ckpt"),
                   "--trials", str(run_dir / "trials.txt"),
                   "--wav-dir", str(run_dir / "eval_wavs"),
                   "--out", str(tmp_path / "out")])
        assert rc == 3
        assert "contract violation" in capsys.readouterr().err

    def test_nan_checkpoint_exits_4(self, run_dir, tmp_path, capsys):
        state = load_checkpoint(str(run_dir / "final.ckpt"))
        victim = next(k for k in state if not k.startswith("classifier."))
        state[victim] = np.full_like(state[victim], np.nan)
        broken = tmp_path / "broken.ckpt"
        save_checkpoint(str(broken), state)
        rc = main(["eval", "--model-config", TOY,
                   "--checkpoint", str(broken),
                   "--trials", str(run_dir / "trials.txt"),
                   "--wav-dir", str(run_dir / "eval_wavs"),
                   "--out", str(tmp_path / "out")])
        assert rc == 4
        assert "numeric failure" in capsys.readouterr().err


class TestPareto:
    def _fake_run(self, root, name, macs, eer):
        d = root / name
        d.mkdir()
        (d / "cost.csv").write_text(
            f"name,params,macs\nstem,10,{macs // 2}\nTOTAL,1000,{macs}\n")
        (d / "eval_report.csv").write_text(
            "eer,threshold,n_trials,n_target,n_nontarget\n"
            f"{eer:.9f},0.5,10,5,5\n")
        return d

    def test_sorted_rows_and_skips(self, tmp_path, capsys):
        big = self._fake_run(tmp_path, "big", 4_000_000_000, 0.01)
        small = self._fake_run(tmp_path, "small", 500_000_000, 0.04)
        rc = main(["pareto", str(big), str(small),
                   str(tmp_path / "absent"), "--out", str(tmp_path / "agg")])
        assert rc == 0
        cap = capsys.readouterr()
        assert "skipping" in cap.err
        lines = cap.out.strip().splitlines()
        assert lines[0] == "gmacs,params,eer,run"
        names = [ln.split(",")[3] for ln in lines[1:]]
        assert names == ["small", "big"]  # ascending gmacs
        assert (tmp_path / "agg" / "pareto.csv").read_text() == cap.out
        assert (tmp_path / "agg" / "pareto.png").exists()

    def test_missing_total_row_exits_3(self, tmp_path, capsys):
        d = self._fake_run(tmp_path, "broken", 1_000_000, 0.1)
        (d / "cost.csv").write_text("name,params,macs\nstem,10,5\n")
        assert main(["pareto", str(d)]) == 3
        assert "TOTAL" in capsys.readouterr().err


def test_console_script_resolves():
    exe = shutil.which("refold")
    assert exe is not None
    proc = subprocess.run([exe, "plan", "--config", TOY],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "Block #" in proc.stdout
