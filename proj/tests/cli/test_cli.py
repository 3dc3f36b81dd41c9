# Copyright 2026 The progseq Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""CLI contract checks: exit codes, determinism and output artefacts.

Usage: test_cli.py <progseq binary> <scratch dir>
"""

import filecmp
import json
import os
import shutil
import subprocess
import sys
from pathlib import Path

BIN = sys.argv[1]
TMP = Path(sys.argv[2])

TINY = {
    "epochs": 2,
    "batch_size": 4,
    "model": {"layers": 1, "heads": 2, "embed_dim": 16, "max_frames": 120},
}

failures = []


def run(*args, env=None, expect=0):
    full_env = dict(os.environ)
    full_env.pop("PROGSEQ_SEED", None)
    if env:
        full_env.update(env)
    proc = subprocess.run([BIN, *map(str, args)], capture_output=True, text=True, env=full_env)
    if expect is not None and proc.returncode != expect:
        raise AssertionError(
            f"{' '.join(map(str, args))}: exit {proc.returncode}, expected {expect}\n{proc.stderr}"
        )
    return proc


def check(name, fn):
    try:
        fn()
        print(f"ok   {name}")
    except (AssertionError, OSError, ValueError, KeyError) as e:
        failures.append(name)
        print(f"FAIL {name}: {e}")


def same_tree(a, b):
    cmp = filecmp.dircmp(a, b)
    if cmp.left_only or cmp.right_only or cmp.diff_files or cmp.funny_files:
        return False
    _, mismatch, errors = filecmp.cmpfiles(a, b, cmp.common_files, shallow=False)
    if mismatch or errors:
        return False
    return all(same_tree(Path(a) / d, Path(b) / d) for d in cmp.common_dirs)


def make_data(out, *extra, **kw):
    return run("make-data", "--sentences", 40, "--vocab", 4, "--joints", 3, "--out", out, *extra, **kw)


def test_make_data_deterministic():
    make_data(TMP / "d7a", "--seed", 7)
    make_data(TMP / "d7b", "--seed", 7)
    assert same_tree(TMP / "d7a", TMP / "d7b"), "same seed gave different directories"
    make_data(TMP / "d8", "--seed", 8)
    assert not same_tree(TMP / "d7a", TMP / "d8"), "different seeds gave identical corpora"


def test_env_seed_overrides_flag():
    make_data(TMP / "denv", "--seed", 9, env={"PROGSEQ_SEED": "7"})
    assert same_tree(TMP / "d7a", TMP / "denv")
    run("make-data", "--out", TMP / "dbad", env={"PROGSEQ_SEED": "seven"}, expect=2)


def test_vocab_size():
    run("make-data", "--vocab", 12, "--sentences", 60, "--out", TMP / "v12")
    manifest = json.loads((TMP / "v12" / "manifest.json").read_text())
    assert len(manifest["vocabulary"]) == 12, manifest["vocabulary"]
    run_config = json.loads((TMP / "v12" / "run_config.json").read_text())
    assert run_config["vocab"] == 12


def test_usage_errors():
    run("make-data", "--seed", 1, expect=2)
    run(expect=2)
    run("frobnicate", expect=2)
    run("make-data", "--vocab", 0, "--out", TMP / "v0", expect=2)


def test_non_empty_out_needs_force():
    proc = make_data(TMP / "d7a", "--seed", 7, expect=1)
    assert "--force" in proc.stderr
    make_data(TMP / "d7a", "--seed", 7, "--force")


def write_config(name, body):
    path = TMP / name
    path.write_text(json.dumps(body))
    return path


def test_train_smoke():
    cfg = write_config("tiny.json", TINY)
    run("train", "--config", cfg, "--data", TMP / "d7a", "--out", TMP / "run", "--quiet")
    ck = TMP / "run" / "checkpoint"
    assert (ck / "manifest.json").is_file() and (ck / "params.bin").is_file()
    lines = (TMP / "run" / "train_log.jsonl").read_text().splitlines()
    assert len(lines) == 2, lines
    for i, line in enumerate(lines, start=1):
        entry = json.loads(line)
        assert entry["epoch"] == i
        assert entry["train_loss"] > 0
    rc = json.loads((TMP / "run" / "run_config.json").read_text())
    assert rc["command"] == "train"
    assert rc["train"]["regime"] == "regression"
    assert rc["train"]["model"]["embed_dim"] == 16


def test_train_is_reproducible():
    cfg = write_config("tiny.json", TINY)
    run("train", "--config", cfg, "--data", TMP / "d7a", "--out", TMP / "run2", "--quiet")
    a = (TMP / "run" / "train_log.jsonl").read_text().splitlines()
    b = (TMP / "run2" / "train_log.jsonl").read_text().splitlines()
    strip = lambda lines: [{k: v for k, v in json.loads(l).items() if k != "seconds"} for l in lines]
    assert strip(a) == strip(b)
    assert filecmp.cmp(TMP / "run" / "checkpoint" / "params.bin", TMP / "run2" / "checkpoint" / "params.bin", shallow=False)


def test_train_mdn_regime_flag():
    cfg = write_config("tiny1.json", dict(TINY, epochs=1))
    run("train", "--config", cfg, "--regime", "mdn", "--data", TMP / "d7a", "--out", TMP / "run_mdn", "--quiet")
    rc = json.loads((TMP / "run_mdn" / "run_config.json").read_text())
    assert rc["train"]["model"]["head"] == "mdn"
    assert rc["train"]["model"]["mixtures"] == 4


def test_invalid_regime():
    proc = run("train", "--data", TMP / "d7a", "--out", TMP / "bad", "--regime", "wgan", expect=2)
    for name in ("regression", "adversarial", "mdn", "mdn_adv"):
        assert name in proc.stderr, proc.stderr


def test_bad_config_key():
    cfg = write_config("typo.json", {"epoch": 3})
    proc = run("train", "--config", cfg, "--data", TMP / "d7a", "--out", TMP / "bad2", expect=2)
    assert "epoch" in proc.stderr


def poseq_header(text):
    magic, joints, frames = text.splitlines()[0].split()
    assert magic == "POSEQ1"
    return int(joints), int(frames)


def test_generate():
    ck = TMP / "run" / "checkpoint"
    manifest = json.loads((TMP / "d7a" / "manifest.json").read_text())
    words = " ".join(manifest["vocabulary"][:2])
    proc = run("generate", "--checkpoint", ck, "--input", words, "--mode", "teacher:12")
    joints, frames = poseq_header(proc.stdout)
    assert (joints, frames) == (3, 12)
    proc = run("generate", "--checkpoint", ck, "--input", words)
    _, frames = poseq_header(proc.stdout)
    assert 1 <= frames <= 120
    run("generate", "--checkpoint", ck, "--input", words, "--out", TMP / "gen.poseq")
    assert (TMP / "gen.poseq").read_text() == proc.stdout
    proc = run("generate", "--checkpoint", ck, "--input", "zebra", expect=1)
    assert "zebra" in proc.stderr
    run("generate", "--checkpoint", ck, "--input", words, "--mode", "teacher:0", expect=2)


def test_evaluate():
    ck = TMP / "run" / "checkpoint"
    args = ["evaluate", "--checkpoint", ck, "--data", TMP / "d7a", "--split", "dev", "--mode", "teacher", "--limit", 3]
    proc = run(*args, "--out", TMP / "eval")
    report = json.loads(proc.stdout)
    assert list(report) == ["bleu1", "bleu2", "bleu3", "bleu4", "rougeL", "dtw_mean", "truncated_count"], list(report)
    for key in ("bleu1", "bleu2", "bleu3", "bleu4", "rougeL"):
        assert 0 <= report[key] <= 100
    assert (TMP / "eval" / "score_report.json").read_text().strip() == proc.stdout.strip()
    again = run(*args, "--jobs", 2)
    assert again.stdout == proc.stdout, "report depends on --jobs"
    run("evaluate", "--checkpoint", ck, "--data", TMP / "d7a", "--split", "valid", expect=2)


def test_render():
    pose = TMP / "gen.poseq"
    _, frames = poseq_header(pose.read_text())
    run("render", "--pose", pose, "--out", TMP / "render_a")
    run("render", "--pose", pose, "--out", TMP / "render_b")
    svgs = sorted(p.name for p in (TMP / "render_a").glob("frame_*.svg"))
    assert len(svgs) == frames, (len(svgs), frames)
    assert svgs[0] == "frame_00000.svg"
    csv = (TMP / "render_a" / "frames.csv").read_text().splitlines()
    assert len(csv) == frames + 1
    assert csv[0].startswith("frame,counter,j0_x,j0_y")
    assert filecmp.cmp(TMP / "render_a" / svgs[-1], TMP / "render_b" / svgs[-1], shallow=False)
    assert filecmp.cmp(TMP / "render_a" / "frames.csv", TMP / "render_b" / "frames.csv", shallow=False)

    bad = TMP / "bad.poseq"
    bad.write_text("POSE 1 1\n0 0 0 1\n")
    proc = run("render", "--pose", bad, "--out", TMP / "render_bad", expect=1)
    assert "line 1" in proc.stderr, proc.stderr
    bad.write_text("POSEQ1 1 2\n0 0 0 0.5\n0 0 x 1\n")
    proc = run("render", "--pose", bad, "--out", TMP / "render_bad", expect=1)
    assert "line 3" in proc.stderr, proc.stderr


def main():
    shutil.rmtree(TMP, ignore_errors=True)
    TMP.mkdir(parents=True)
    tests = [(name, fn) for name, fn in globals().items() if name.startswith("test_") and callable(fn)]
    for name, fn in tests:
        check(name, fn)
    if failures:
        print(f"{len(failures)} of {len(tests)} failed: {', '.join(failures)}")
        return 1
    print(f"all {len(tests)} passed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
