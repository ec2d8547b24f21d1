"""Integration tests for the `spazer` command-line interface."""

import filecmp
import json
import os
import subprocess

import pytest

CLI = os.environ.get("SPAZER_CLI")

pytestmark = pytest.mark.skipif(not CLI, reason="SPAZER_CLI not set")


def run(*args, **kw):
    return subprocess.run([CLI, *args], capture_output=True, text=True, **kw)


@pytest.fixture(scope="module")
def scene_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli") / "scene"
    r = run("synth", "--out", str(out), "--seed", "3")
    assert r.returncode == 0, r.stderr
    return out


def test_synth_is_reproducible(scene_dir, tmp_path):
    again = tmp_path / "again"
    assert run("synth", "--out", str(again), "--seed", "3").returncode == 0
    cmp = filecmp.dircmp(scene_dir, again)
    assert not cmp.diff_files

    def walk(c):
        assert not c.diff_files and not c.left_only and not c.right_only
        for sub in c.subdirs.values():
            walk(sub)

    walk(cmp)


def test_ground_oracle_stdout_json(scene_dir, tmp_path):
    query = json.loads((scene_dir / "queries.jsonl").read_text().splitlines()[0])
    out = tmp_path / "out"
    r = run("ground", "--scene", str(scene_dir), "-q", query["text"], "--out", str(out))
    assert r.returncode == 0, r.stderr
    payload = json.loads(r.stdout)  # stdout is machine-readable JSON only
    assert payload["final_id"] == query["gt_id"]
    assert (out / "0_trace.json").exists()
    assert (out / "0_screening_view.png").exists()


def test_evaluate_writes_reports(scene_dir, tmp_path):
    out = tmp_path / "out"
    r = run("evaluate", "--scene", str(scene_dir), "--queries",
            str(scene_dir / "queries.jsonl"), "--out", str(out), "--parallel", "2")
    assert r.returncode == 0, r.stderr
    summary = json.loads(r.stdout)
    assert summary["selection_accuracy"] == 1.0
    report = json.loads((out / "report.json").read_text())
    assert report["overall"]["count"] == summary["queries"]
    assert (out / "report.txt").exists()


def test_render_writes_views(scene_dir, tmp_path):
    out = tmp_path / "out"
    r = run("render", "--scene", str(scene_dir), "--out", str(out))
    assert r.returncode == 0, r.stderr
    views = sorted(p.name for p in (out / "views").iterdir())
    assert "view_0.png" in views and "view_4.png" in views
    assert "view_0_annotated.png" in views
    assert len(views) == 10  # 5 views, raw + annotated


def test_project_writes_per_object_json(scene_dir, tmp_path):
    out = tmp_path / "out"
    r = run("project", "--scene", str(scene_dir), "--out", str(out))
    assert r.returncode == 0, r.stderr
    files = list((out / "projections").glob("*.json"))
    assert len(files) >= 6
    sample = json.loads(files[0].read_text())
    assert "per_frame" in sample and "keyframe" in sample


def test_exit_codes(scene_dir, tmp_path):
    assert run("ground", "--scene", "/nonexistent", "-q", "x").returncode == 2
    assert run("ground", "--scene", str(scene_dir), "-q", "x",
               "--backend", "remote").returncode == 4

    empty = tmp_path / "empty.jsonl"
    empty.write_text("")
    r = run("evaluate", "--scene", str(scene_dir), "--queries", str(empty))
    assert r.returncode != 0
