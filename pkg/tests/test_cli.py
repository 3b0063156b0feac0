import json
import re
import shutil

import numpy as np
import pytest

from dasmr import checkpoint
from dasmr.cli import checkpoint_path, main
from dasmr.config import ConfigError, RunConfig, apply_overrides, dump_config, parse_config
from dasmr.environment import DasmrEnv, WorldConfig
from dasmr.evaluation import run_episode
from dasmr.trace import TRACE_HEADER, TraceError, read_trace, render_svg, write_trace

SMALL = [
    "--set", "network.actor_hidden=32,32",
    "--set", "network.critic_hidden=64,64",
    "--set", "world.max_steps=20",
    "--set", "agent.learning_starts=50",
    "--set", "agent.batch_size=32",
    "--set", "run.checkpoint_every=100",
    "--set", "run.log_every_episodes=1",
]


def train(out, steps=200, extra=()):
    assert main(["train", "--seed", "3", "--total-steps", str(steps), "--out", str(out), *SMALL, *extra]) == 0
    return out


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory):
    return train(tmp_path_factory.mktemp("run") / "r")


# config

def test_config_round_trip_fixed_point():
    cfg = apply_overrides(RunConfig(), ["agent.seed=7", "network.critic_hidden=64, 64", "world.d_th=0.2",
                                        "replay.her=false"])
    text = dump_config(cfg)
    again = parse_config(text)
    assert again == cfg and dump_config(again) == text
    assert parse_config("") == RunConfig()


def test_config_diagnostics():
    with pytest.raises(ConfigError, match=r":3: unknown key 'batchsize' in section \[agent\]"):
        parse_config("[agent]\nseed = 1\nbatchsize = 3\n")
    with pytest.raises(ConfigError, match=r":2: unknown section \[critic\]"):
        parse_config("\n[critic]\nx = 1\n")
    with pytest.raises(ConfigError, match=r":2: bad value for world.d_th"):
        parse_config("[world]\nd_th = wide\n")
    with pytest.raises(ConfigError, match="exactly 2"):
        parse_config("[network]\nactor_hidden = 8, 8, 8\n")
    with pytest.raises(ConfigError, match="unknown key 'nope'"):
        apply_overrides(RunConfig(), ["agent.nope=1"])


def test_invalid_key_exits_nonzero(tmp_path, capsys):
    cfg = tmp_path / "bad.ini"
    cfg.write_text("[agent]\nlearning_rat = 0.1\n")
    assert main(["train", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    err = capsys.readouterr().err
    assert err.startswith("error:") and "learning_rat" in err and err.count("\n") == 1


# checkpoint container

def test_checkpoint_bytes_round_trip():
    rng = np.random.default_rng(0)
    arrays = {"a": rng.normal(size=(3, 4)).astype(np.float32), "b": np.arange(5, dtype=np.int64),
              "c": np.array([True, False]), "d": np.zeros((0, 2))}
    data = checkpoint.dumps({"x": 1, "nested": {"y": [1.5]}}, arrays)
    meta, back = checkpoint.loads(data)
    assert meta == {"x": 1, "nested": {"y": [1.5]}}
    assert all(np.array_equal(arrays[k], back[k]) and arrays[k].dtype == back[k].dtype for k in arrays)
    assert checkpoint.dumps(meta, back) == data


def test_checkpoint_errors():
    data = bytearray(checkpoint.dumps({}, {"a": np.ones(4)}))
    bad_version = bytes(data[:8]) + (checkpoint.FORMAT_VERSION + 1).to_bytes(4, "little") + bytes(data[12:])
    with pytest.raises(checkpoint.CheckpointError, match="version"):
        checkpoint.loads(bad_version)
    with pytest.raises(checkpoint.CheckpointError, match="magic"):
        checkpoint.loads(b"NOTACKPT" + bytes(data[8:]))
    with pytest.raises(checkpoint.CheckpointError, match="truncated"):
        checkpoint.loads(bytes(data[:-8]))
    with pytest.raises(checkpoint.CheckpointError):
        checkpoint.loads(b"DASM")


def test_trained_checkpoint_save_load_save_identical(run_dir, tmp_path):
    path = checkpoint_path(run_dir, 200)
    meta, arrays = checkpoint.load(path)
    checkpoint.save(tmp_path / "again.ckpt", meta, arrays)
    assert (tmp_path / "again.ckpt").read_bytes() == path.read_bytes()
    nets = {k.split("/")[1] for k in arrays if k.startswith("agent/") and k.endswith(".W") and "adam" not in k}
    assert nets == {"actor", "critic1", "critic2"}
    assert all(v.dtype == np.float32 for k, v in arrays.items() if k.startswith("agent/"))


def test_version_mismatch_is_cli_error(run_dir, tmp_path, capsys):
    data = bytearray(checkpoint_path(run_dir, 200).read_bytes())
    data[8:12] = (99).to_bytes(4, "little")
    bad = tmp_path / "bad.ckpt"
    bad.write_bytes(bytes(data))
    assert main(["eval", "--checkpoint", str(bad), "--episodes", "1"]) == 2
    assert "version 99" in capsys.readouterr().err


# train

def test_smoke_train_layout(run_dir):
    assert (run_dir / "config.ini").exists()
    assert parse_config((run_dir / "config.ini").read_text()).agent.total_steps == 200
    ckpts = sorted(p.name for p in (run_dir / "checkpoints").iterdir())
    assert ckpts == ["step_000000100.ckpt", "step_000000200.ckpt"]
    records = [json.loads(line) for line in (run_dir / "log.jsonl").read_text().splitlines()]
    assert [r["episode"] for r in records] == list(range(1, 11))
    assert {"episode", "step", "return", "success_rate", "alpha", "critic_loss"} <= set(records[-1])


def test_identical_seeds_give_identical_logs(run_dir, tmp_path):
    other = train(tmp_path / "again")
    assert (other / "log.jsonl").read_bytes() == (run_dir / "log.jsonl").read_bytes()


def test_resume_is_bit_identical(run_dir, tmp_path):
    mid = tmp_path / "mid.ckpt"
    shutil.copy(checkpoint_path(run_dir, 100), mid)
    out = tmp_path / "resumed"
    assert main(["train", "--resume", str(mid), "--total-steps", "200", "--out", str(out)]) == 0
    assert (out / "log.jsonl").read_bytes() != b""
    full = [json.loads(x) for x in (run_dir / "log.jsonl").read_text().splitlines()]
    resumed = [json.loads(x) for x in (out / "log.jsonl").read_text().splitlines()]
    assert resumed == [r for r in full if r["step"] > 100]
    meta_a, arr_a = checkpoint.load(checkpoint_path(run_dir, 200))
    meta_b, arr_b = checkpoint.load(checkpoint_path(out, 200))
    meta_a.pop("config"), meta_b.pop("config")  # differ only in out_dir
    assert meta_a == meta_b
    assert arr_a.keys() == arr_b.keys()
    assert all(np.array_equal(arr_a[k], arr_b[k]) for k in arr_a)


# eval / rollout

def test_eval_one_episode(run_dir, tmp_path, capsys):
    ckpt = str(checkpoint_path(run_dir, 200))
    out = tmp_path / "seen"
    assert main(["eval", "--checkpoint", ckpt, "--episodes", "1", "--seed-mode", "seen", "--out", str(out)]) == 0
    assert re.search(r"SR", capsys.readouterr().out)
    assert [p.name for p in (out / "traces").iterdir()] == ["trace_0000.csv"]
    report = json.loads((out / "report.json").read_text())
    assert len(report["episodes"]) == 1 and 0.0 <= report["metrics"]["SR"] <= 100.0


def test_seen_and_unseen_goals_differ(run_dir, tmp_path):
    ckpt = str(checkpoint_path(run_dir, 200))
    goals = {}
    for mode in ("seen", "unseen"):
        out = tmp_path / mode
        assert main(["eval", "--checkpoint", ckpt, "--episodes", "3", "--seed-mode", mode, "--out", str(out)]) == 0
        goals[mode] = [tuple(e["goal"]) for e in json.loads((out / "report.json").read_text())["episodes"]]
        trace_goal = read_trace(out / "traces" / "trace_0000.csv")[0]
        assert (trace_goal["x_d"], trace_goal["y_d"]) == goals[mode][0]
    assert goals["seen"] != goals["unseen"]


def test_rollout_rejects_goal_outside_workspace(run_dir, tmp_path, capsys):
    code = main(["rollout", "--checkpoint", str(checkpoint_path(run_dir, 200)), "--goal", "9", "9",
                 "--trace", str(tmp_path / "t.csv")])
    assert code == 2 and "outside the workspace" in capsys.readouterr().err
    assert not (tmp_path / "t.csv").exists()


def test_rollout_goal_at_start(run_dir, tmp_path, capsys):
    trace = tmp_path / "t.csv"
    assert main(["rollout", "--checkpoint", str(checkpoint_path(run_dir, 200)), "--goal", "0", "0",
                 "--trace", str(trace)]) == 0
    assert capsys.readouterr().out.startswith("success=true final_error=0.0000 path_length=0.0000")
    records = read_trace(trace)
    assert len(records) == 1 and records[0]["step"] == 0


# traces and plots

@pytest.fixture
def straight_trace(tmp_path):
    env = DasmrEnv(WorldConfig(), rng=np.random.default_rng(0))
    result = run_episode(env, lambda obs: np.array([1.0, 0.0]), goal=(2.0, 0.0))
    path = tmp_path / "straight.csv"
    write_trace(path, result.trajectory, result.goal)
    return path, result


def test_trace_format(straight_trace):
    path, result = straight_trace
    lines = path.read_text().splitlines()
    assert tuple(lines[0].split(",")) == TRACE_HEADER
    records = read_trace(path)
    assert len(records) == len(result.trajectory) == len(lines) - 1
    assert [r["step"] for r in records] == list(range(len(records)))
    assert records[1]["time"] == pytest.approx(0.025)


def test_plot_is_byte_identical_with_monotone_polyline(straight_trace, tmp_path):
    path, _ = straight_trace
    a, b = tmp_path / "a.svg", tmp_path / "b.svg"
    assert main(["plot", "--trace", str(path), "--out", str(a)]) == 0
    assert main(["plot", "--trace", str(path), "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    svg = a.read_text()
    polylines = re.findall(r'<polyline points="([^"]+)"', svg)
    assert len(polylines) == 1
    xs = [float(p.split(",")[0]) for p in polylines[0].split()]
    assert all(x1 >= x0 for x0, x1 in zip(xs, xs[1:])) and xs[-1] > xs[0]
    assert svg == render_svg(read_trace(path))


def test_plot_errors(tmp_path, capsys):
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    assert main(["plot", "--trace", str(empty), "--out", str(tmp_path / "x.svg")]) == 2
    assert "empty trace" in capsys.readouterr().err
    header_only = tmp_path / "h.csv"
    header_only.write_text(",".join(TRACE_HEADER) + "\n")
    with pytest.raises(TraceError, match="no records"):
        read_trace(header_only)
    bad = tmp_path / "bad.csv"
    bad.write_text(",".join(TRACE_HEADER) + "\n" + ",".join(["0"] * 13) + "\n1,2,3\n")
    with pytest.raises(TraceError, match="row 3"):
        read_trace(bad)
    backwards = tmp_path / "back.csv"
    backwards.write_text(",".join(TRACE_HEADER) + "\n" + ",".join(["1"] * 13) + "\n" + ",".join(["0"] * 13) + "\n")
    with pytest.raises(TraceError, match="row 3: step 0 not increasing"):
        read_trace(backwards)
    nan_row = tmp_path / "nan.csv"
    nan_row.write_text(",".join(TRACE_HEADER) + "\n" + ",".join(["0"] + ["x"] * 12) + "\n")
    with pytest.raises(TraceError, match="row 2"):
        read_trace(nan_row)
