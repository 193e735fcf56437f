from __future__ import annotations

import json
import math
import xml.etree.ElementTree as ET
from pathlib import Path

import pytest

from drivesim.cli import main
from drivesim.outputs import load_outputs
from drivesim.scene import load_dataset

SMALL_ENV = {
    "raster": {"width_px": 48, "height_px": 48, "history_frames": 1},
    "start": {"fixed": 0},
}


def write_env_config(tmp_path: Path) -> str:
    path = tmp_path / "env.json"
    path.write_text(json.dumps(SMALL_ENV), encoding="utf-8")
    return str(path)


def run(argv: list[str]) -> int:
    return main(argv)


@pytest.fixture()
def generated(tmp_path) -> Path:
    out = tmp_path / "scenes.json"
    assert run(["gen", "--seed", "7", "--scenes", "3", "--frames", "60",
                "--agents", "5", "-o", str(out)]) == 0
    return out


def test_gen_writes_loadable_dataset(generated):
    dataset = load_dataset(generated)
    assert len(dataset.scenes) == 3
    assert all(len(s.frames) == 60 for s in dataset.scenes)
    assert all(len(f.agents) == 5 for s in dataset.scenes for f in s.frames)


def test_gen_deterministic_bytes(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    argv = ["gen", "--seed", "5", "--scenes", "2", "--frames", "30", "--agents", "2"]
    assert run(argv + ["-o", str(a)]) == 0
    assert run(argv + ["-o", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_gen_missing_directory_fails(tmp_path, capsys):
    missing = tmp_path / "no_such_dir" / "scenes.json"
    assert run(["gen", "--seed", "1", "--scenes", "1", "--frames", "2",
                "--agents", "0", "-o", str(missing)]) == 1
    assert "error" in capsys.readouterr().err


def test_rollout_replay_matches_recorded(generated, tmp_path):
    out = tmp_path / "rollouts.json"
    assert run(["rollout", "--dataset", str(generated), "--policy", "replay",
                "--env-config", write_env_config(tmp_path), "-o", str(out)]) == 0
    outputs = load_outputs(out)
    assert len(outputs) == 3
    for output in outputs:
        for sim, rec in zip(output.simulated_ego_states, output.recorded_ego_states):
            assert sim.centroid == rec.centroid


def test_rollout_zero_policy_departs(generated, tmp_path):
    out = tmp_path / "rollouts.json"
    assert run(["rollout", "--dataset", str(generated), "--policy", "zero",
                "--env-config", write_env_config(tmp_path), "-o", str(out)]) == 0
    outputs = load_outputs(out)
    final = outputs[0]
    assert final.simulated_ego_states[-1].centroid != \
        final.recorded_ego_states[-1].centroid


def test_rollout_unknown_policy_usage_error(generated, tmp_path):
    with pytest.raises(SystemExit) as exc:
        run(["rollout", "--dataset", str(generated), "--policy", "fly",
             "-o", str(tmp_path / "x.json")])
    assert exc.value.code != 0


def test_rollout_scene_selection(generated, tmp_path):
    out = tmp_path / "one.json"
    assert run(["rollout", "--dataset", str(generated), "--policy", "replay",
                "--env-config", write_env_config(tmp_path),
                "--scene", "1", "-o", str(out)]) == 0
    outputs = load_outputs(out)
    assert len(outputs) == 1
    assert outputs[0].scene_id == "scene_0001"


def test_eval_replay_prints_clean_report(generated, tmp_path, capsys):
    out = tmp_path / "rollouts.json"
    run(["rollout", "--dataset", str(generated), "--policy", "replay",
         "--env-config", write_env_config(tmp_path), "-o", str(out)])
    assert run(["eval", "--outputs", str(out)]) == 0
    text = capsys.readouterr().out
    assert "l2_displacement" in text
    assert "0 (0)" in text
    report = json.loads((tmp_path / "rollouts.report.json").read_text())
    assert report["n_scenes"] == 3
    assert report["metrics"]["l2_displacement"]["mean_avg"] == 0.0
    assert all(v == 0 for v in report["validators"].values())


def test_eval_matches_library_evaluate(generated, tmp_path):
    from drivesim.cle import default_plan, evaluate, report_to_dict

    out = tmp_path / "rollouts.json"
    run(["rollout", "--dataset", str(generated), "--policy", "zero",
         "--env-config", write_env_config(tmp_path), "-o", str(out)])
    assert run(["eval", "--outputs", str(out)]) == 0
    written = json.loads((tmp_path / "rollouts.report.json").read_text())
    expected = report_to_dict(evaluate(default_plan(), load_outputs(out)))
    assert written == expected


def test_eval_with_explicit_plan_and_malformed_plan(generated, tmp_path, capsys):
    out = tmp_path / "rollouts.json"
    run(["rollout", "--dataset", str(generated), "--policy", "replay",
         "--env-config", write_env_config(tmp_path), "-o", str(out)])
    plan_path = tmp_path / "plan.json"
    plan_path.write_text(json.dumps({
        "metrics": ["l2_displacement"],
        "validators": [{"name": "fde", "metric": "l2_displacement",
                        "op": "ge", "threshold": 30.0, "scope": "final_frame"}],
        "composites": [],
    }))
    assert run(["eval", "--outputs", str(out), "--plan", str(plan_path)]) == 0

    bad = tmp_path / "bad_plan.json"
    bad.write_text("{not json")
    assert run(["eval", "--outputs", str(out), "--plan", str(bad)]) == 1
    assert "error" in capsys.readouterr().err


def parse_polyline(svg_path: Path, element_id: str) -> list[tuple[float, float]]:
    root = ET.parse(svg_path).getroot()
    for element in root.iter():
        if element.get("id") == element_id:
            points = element.get("points").split()
            return [tuple(float(v) for v in p.split(",")) for p in points]
    raise AssertionError(f"no element with id {element_id}")


def test_render_replay_trajectories_coincide(generated, tmp_path):
    out = tmp_path / "rollouts.json"
    run(["rollout", "--dataset", str(generated), "--policy", "replay",
         "--env-config", write_env_config(tmp_path), "-o", str(out)])
    svg = tmp_path / "scene.svg"
    assert run(["render", "--outputs", str(out), "--dataset", str(generated),
                "--scene-id", "scene_0000", "-o", str(svg)]) == 0
    sim = parse_polyline(svg, "simulated-ego")
    rec = parse_polyline(svg, "recorded-ego")
    assert sim == rec


def test_render_straight_scene_collinear(generated, tmp_path):
    out = tmp_path / "rollouts.json"
    run(["rollout", "--dataset", str(generated), "--policy", "replay",
         "--env-config", write_env_config(tmp_path), "-o", str(out)])
    svg = tmp_path / "scene.svg"
    # scene_0000 uses the straight template.
    assert run(["render", "--outputs", str(out), "--dataset", str(generated),
                "--scene-id", "scene_0000", "-o", str(svg)]) == 0
    points = parse_polyline(svg, "simulated-ego")
    (x0, y0), (x1, y1) = points[0], points[-1]
    for x, y in points:
        cross = (x1 - x0) * (y - y0) - (y1 - y0) * (x - x0)
        assert abs(cross) < 1e-6 * math.hypot(x1 - x0, y1 - y0)


def test_render_marker_count(generated, tmp_path):
    out = tmp_path / "rollouts.json"
    run(["rollout", "--dataset", str(generated), "--policy", "replay",
         "--env-config", write_env_config(tmp_path), "-o", str(out)])
    svg = tmp_path / "scene.svg"
    assert run(["render", "--outputs", str(out), "--dataset", str(generated),
                "--scene-id", "scene_0000", "--marker-interval", "2.0",
                "-o", str(svg)]) == 0
    text = svg.read_text()
    # 33 states at dt 0.1 with 2 s spacing: markers at frames 0 and 20.
    assert text.count('class="prediction"') == 2
    assert text.count('class="ego-box"') == 2


def test_render_unknown_scene_fails(generated, tmp_path, capsys):
    out = tmp_path / "rollouts.json"
    run(["rollout", "--dataset", str(generated), "--policy", "replay",
         "--env-config", write_env_config(tmp_path), "-o", str(out)])
    assert run(["render", "--outputs", str(out), "--dataset", str(generated),
                "--scene-id", "nope", "-o", str(tmp_path / "x.svg")]) == 1
    assert "nope" in capsys.readouterr().err


def test_raster_dump_pgm(generated, tmp_path):
    out_dir = tmp_path / "channels"
    assert run(["raster", "--dataset", str(generated), "--scene", "0",
                "--frame", "5", "--history", "1", "-o", str(out_dir)]) == 0
    files = sorted(out_dir.glob("channel_*.pgm"))
    assert len(files) == 3 + 2 * (1 + 1)
    assert files[0].read_text().startswith("P2")


def test_pipeline_deterministic_bytes(tmp_path):
    def pipeline(tag: str) -> bytes:
        scenes = tmp_path / f"scenes_{tag}.json"
        rollouts = tmp_path / f"rollouts_{tag}.json"
        run(["gen", "--seed", "3", "--scenes", "2", "--frames", "40",
             "--agents", "2", "-o", str(scenes)])
        run(["rollout", "--dataset", str(scenes), "--policy", "replay",
             "--env-config", write_env_config(tmp_path), "-o", str(rollouts)])
        run(["eval", "--outputs", str(rollouts)])
        return (scenes.read_bytes() + rollouts.read_bytes()
                + (tmp_path / f"rollouts_{tag}.report.json").read_bytes())

    assert pipeline("a") == pipeline("b")


def test_smoke_pipeline_on_defaults(tmp_path, capsys):
    # gen | rollout --policy replay | eval with default flags: all-pass report.
    scenes = tmp_path / "scenes.json"
    rollouts = tmp_path / "rollouts.json"
    assert run(["gen", "-o", str(scenes)]) == 0
    assert run(["rollout", "--dataset", str(scenes), "--policy", "replay",
                "-o", str(rollouts)]) == 0
    assert run(["eval", "--outputs", str(rollouts)]) == 0
    assert "0 (0)" in capsys.readouterr().out
    report = json.loads((tmp_path / "rollouts.report.json").read_text())
    assert report["n_scenes"] == 10
    assert all(count == 0 for count in report["validators"].values())


def test_threaded_rollout_and_eval_match_serial(generated, tmp_path, monkeypatch):
    def run_pipeline(tag: str) -> bytes:
        rollouts = tmp_path / f"rollouts_{tag}.json"
        assert run(["rollout", "--dataset", str(generated), "--policy", "replay",
                    "--env-config", write_env_config(tmp_path), "--max-steps", "16",
                    "-o", str(rollouts)]) == 0
        assert run(["eval", "--outputs", str(rollouts)]) == 0
        return (rollouts.read_bytes()
                + (tmp_path / f"rollouts_{tag}.report.json").read_bytes())

    serial = run_pipeline("serial")
    monkeypatch.setenv("DRIVEGYM_THREADS", "4")
    threaded = run_pipeline("threaded")
    assert serial == threaded
    outputs = load_outputs(tmp_path / "rollouts_threaded.json")
    assert all(len(o) == 17 for o in outputs)  # --max-steps honored
