"""Acceptance gate for the bridge. Each criterion prints one PASS/FAIL line.

  criterion 11: a session against the scripted fake pipeline and canned
                answers reproduces the committed golden transcript
                byte-for-byte, and a malformed controller message yields
                an error message and a nonzero exit.
  criterion 12: the preset preview-decode matrix matches its reference
                values exactly and the decode is linear pre-clamp on
                random latents to 1e-6.
"""

import json
import subprocess
import sys
from pathlib import Path

import numpy as np

from vlmbridge.decode import SDXL_PREVIEW_MATRIX, linear_decode

HERE = Path(__file__).parent
GOLDEN = HERE / "data" / "golden_transcript.txt"
CONFIG = HERE / "data" / "session_config.json"


def _report(criterion: int, ok: bool, detail: str) -> None:
    print(f"criterion {criterion}: {'PASS' if ok else 'FAIL'} -- {detail}")
    assert ok, detail


def _serve(tmp_path, controller_script: str) -> subprocess.CompletedProcess:
    return subprocess.run(
        [sys.executable, "-m", "vlmbridge.cli", "serve",
         "--config", str(CONFIG),
         "--controller-cmd", sys.executable, str(HERE / controller_script)],
        cwd=tmp_path,
        capture_output=True,
        text=True,
        timeout=120,
    )


class TestCriterion11:
    def test_golden_transcript_and_malformed_injection(self, tmp_path):
        (tmp_path / "good").mkdir()
        (tmp_path / "bad").mkdir()
        good = _serve(tmp_path / "good", "fake_controller.py")
        produced = (tmp_path / "good" / "transcript.txt").read_bytes()
        golden_ok = good.returncode == 0 and produced == GOLDEN.read_bytes()

        bad = _serve(tmp_path / "bad", "bad_controller.py")
        bad_transcript = (tmp_path / "bad" / "transcript.txt").read_text()
        sent = [ln[2:] for ln in bad_transcript.splitlines() if ln.startswith("> ")]
        last_sent = json.loads(sent[-1])
        malformed_ok = bad.returncode != 0 and last_sent["type"] == "error"

        _report(
            11,
            golden_ok and malformed_ok,
            f"golden byte-for-byte={golden_ok} (exit {good.returncode}), "
            f"malformed -> error+exit {bad.returncode}",
        )

    def test_cat_answer_round_trips_into_negatives(self, tmp_path):
        # The first canned answer is "It looks like a cat."; the controller's
        # first negatives reply and the next step's prompt must contain "cat".
        result = _serve(tmp_path, "fake_controller.py")
        assert result.returncode == 0
        lines = (tmp_path / "transcript.txt").read_text().splitlines()
        msgs = [json.loads(ln[2:]) for ln in lines]
        first_neg = next(m for m in msgs if m["type"] == "negatives")
        step2 = next(m for m in msgs if m["type"] == "step_begin" and m["step"] == 2)
        assert "cat" in first_neg["payload"]["negative_prompt"]
        assert "cat" in step2["payload"]["negative_prompt"]

    def test_runtime_report_written(self, tmp_path):
        result = _serve(tmp_path, "fake_controller.py")
        assert result.returncode == 0
        report = json.loads((tmp_path / "report.json").read_text())
        assert report["vlm_calls"] == 6
        assert len(report["per_call"]) == 6
        assert report["vlm_total_s"] >= 0.0


class TestCriterion12:
    def test_preset_matrix_and_preclamp_linearity(self):
        reference = np.array(
            [
                [60.0, -60.0, 25.0, -70.0],
                [60.0, -5.0, 15.0, -50.0],
                [60.0, 10.0, -5.0, -35.0],
            ]
        )
        exact = np.array_equal(SDXL_PREVIEW_MATRIX, reference)

        rng = np.random.default_rng(42)
        max_dev = 0.0
        for _ in range(200):
            a = rng.standard_normal((4, 8, 8)) * 10
            b = rng.standard_normal((4, 8, 8)) * 10
            lhs = linear_decode(a + b, clamp=False)
            rhs = linear_decode(a, clamp=False) + linear_decode(b, clamp=False)
            max_dev = max(max_dev, float(np.max(np.abs(lhs - rhs))))
        linear = max_dev < 1e-6

        _report(
            12,
            exact and linear,
            f"preset matrix exact={exact}, pre-clamp linearity max dev {max_dev:.2e}",
        )
