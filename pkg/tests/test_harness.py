import json
import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from banditgames.cli import main
from banditgames.errors import ConfigError
from banditgames.harness import (
    ENV_OUT,
    RunManifest,
    execute,
    parse_config,
    read_trajectory_csv,
    run_directory,
    summarize,
    validate_config,
)

ROOT = Path(__file__).resolve().parents[1]
EXPERIMENTS = ROOT / "experiments"


def _raw(**kw):
    raw = {
        "name": "small",
        "game": {"name": "cournot", "params": {"preset": "default"}},
        "algorithm": "bandit_md",
        "schedule": {"preset": "strongly_monotone_main"},
        "T": 300,
        "seeds": [1],
        "metrics": ["sq_dist", "gap_function"],
    }
    raw.update(kw)
    return raw


def _write(path, raw):
    path.write_text(json.dumps(raw))
    return path


def _snapshot(d: Path) -> dict:
    return {p.name: (p.read_bytes(), p.stat().st_mtime_ns) for p in sorted(d.iterdir())}


def test_shipped_configs_parse():
    for path in sorted(EXPERIMENTS.glob("*.json")):
        cfg = parse_config(path)
        assert cfg.name == path.stem
    cfg = parse_config(EXPERIMENTS / "zs_matrix.json")
    np.testing.assert_array_equal(cfg.game["params"]["A"], [[1.0, 2.0], [3.0, 4.0]])
    assert cfg.algorithm == "exact_gd" and cfg.schedule["overrides"]["eta"] == 0.01


def test_empty_config_names_missing_key(tmp_path):
    p = tmp_path / "empty.json"
    p.write_text("")
    with pytest.raises(ConfigError, match="name"):
        parse_config(p)
    p.write_text("{not json")
    with pytest.raises(ConfigError):
        parse_config(p)


@pytest.mark.parametrize(
    "change",
    [
        {"bogus": 1},
        {"game": {"name": "cournot", "params": {"colour": 1}}},
        {"schedule": {"preset": "linear_tau"}, "algorithm": "linear_md"},
        {"schedule": {"preset": "linear_tau"}},
        {"algorithm": "entropy_omd"},
        {"metrics": ["duality_gap"]},
        {"metrics": ["nope"]},
        {"T": 0},
        {"T": 1.5},
        {"seeds": []},
        {"seeds": [1, 1]},
        {"noise_sigma": -1.0},
        {"options": {"speed": "fast"}},
        {"schedule": {"preset": "monotone_main", "overrides": {"bogus": 1}}},
    ],
)
def test_invalid_configs_rejected(change):
    with pytest.raises(ConfigError):
        validate_config(_raw(**change))


def test_hash_ignores_key_order_output_and_seeds():
    a = validate_config(_raw())
    b = validate_config(dict(reversed(list(_raw(seeds=[4, 5], output_dir="/elsewhere").items()))))
    assert a.config_hash == b.config_hash
    assert validate_config(_raw(T=301)).config_hash != a.config_hash
    assert a.with_seeds([1, 2]).config_hash == a.config_hash


def test_seed_fan_out_and_csv_format(tmp_path):
    cfg = validate_config(_raw(seeds=[1, 2, 3, 4, 5]))
    m = execute(cfg, out=str(tmp_path))
    assert m.ok and not m.cache_hit and len(m.runs) == 5
    rdir = run_directory(cfg, str(tmp_path))
    assert rdir == tmp_path / "small" / cfg.config_hash[:12]
    assert sorted(p.name for p in rdir.glob("seed_*.csv")) == [f"seed_{s}.csv" for s in range(1, 6)]
    header, series = read_trajectory_csv(rdir / "seed_3.csv")
    assert header == {"config_hash": cfg.config_hash, "seed": "3"}
    assert set(series) == {"sq_dist", "gap_function"}
    lines = (rdir / "seed_3.csv").read_text().splitlines()
    assert lines[2] == "t,metric,value"
    loaded = RunManifest.load(rdir / "manifest.json")
    assert loaded.config_hash == cfg.config_hash and [r["seed"] for r in loaded.runs] == [1, 2, 3, 4, 5]


def test_rerun_is_cache_hit_without_writes(tmp_path):
    cfg = validate_config(_raw(seeds=[1, 2]))
    execute(cfg, out=str(tmp_path))
    rdir = run_directory(cfg, str(tmp_path))
    before = _snapshot(rdir)
    m = execute(cfg, out=str(tmp_path))
    assert m.cache_hit and _snapshot(rdir) == before
    # adding a seed runs only the new one
    m = execute(cfg.with_seeds([1, 2, 3]), out=str(tmp_path))
    assert not m.cache_hit and len(m.runs) == 3
    assert _snapshot(rdir)["seed_1.csv"] == before["seed_1.csv"]
    m = execute(cfg, out=str(tmp_path), force=True)
    assert not m.cache_hit


def test_parallelism_does_not_change_bytes(tmp_path):
    cfg = validate_config(_raw(seeds=[1, 2, 3, 4]))
    a = run_directory(cfg, str(tmp_path / "a"))
    b = run_directory(cfg, str(tmp_path / "b"))
    execute(cfg, parallelism=1, out=str(tmp_path / "a"))
    execute(cfg, parallelism=8, out=str(tmp_path / "b"))
    for s in range(1, 5):
        assert (a / f"seed_{s}.csv").read_bytes() == (b / f"seed_{s}.csv").read_bytes()


def test_output_root_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv(ENV_OUT, str(tmp_path / "env"))
    cfg = validate_config(_raw())
    m = execute(cfg)
    assert Path(m.directory).is_relative_to(tmp_path / "env")


def test_summary_statistics_recomputed(tmp_path):
    cfg = validate_config(_raw(seeds=[1, 2, 3]))
    m = execute(cfg, out=str(tmp_path))
    rep = summarize(m)
    assert rep.status == "complete"
    rdir = Path(m.directory)
    per_seed = [read_trajectory_csv(rdir / f"seed_{s}.csv")[1]["sq_dist"][1] for s in (1, 2, 3)]
    V = np.vstack(per_seed)
    rows = [r.split(",") for r in Path(rep.csv_path).read_text().splitlines()]
    assert rows[0] == ["metric", "t", "n", "mean", "median", "std", "slope"]
    sq = [r for r in rows[1:] if r[0] == "sq_dist"]
    np.testing.assert_allclose([float(r[3]) for r in sq], V.mean(axis=0), rtol=1e-14)
    np.testing.assert_allclose([float(r[4]) for r in sq], np.median(V, axis=0), rtol=1e-14)
    np.testing.assert_allclose([float(r[5]) for r in sq], V.std(axis=0), rtol=1e-12, atol=1e-300)
    assert all(r[2] == "3" for r in sq)
    assert "sq_dist" in Path(rep.text_path).read_text()


def test_summary_single_seed_has_zero_std(tmp_path):
    m = execute(validate_config(_raw()), out=str(tmp_path))
    rep = summarize(m)
    assert all(row[5] == 0.0 for row in rep.rows)


def test_summary_slope_of_power_law(tmp_path):
    # hand-built run whose metric is exactly t^-1/2
    rdir = tmp_path / "synthetic"
    rdir.mkdir()
    t = np.unique(np.round(np.logspace(0, 4, 120)).astype(int))
    body = ["# config_hash=x", "# seed=0", "t,metric,value"] + [f"{a},m,{float(a) ** -0.5!r}" for a in t]
    (rdir / "seed_0.csv").write_text("\n".join(body) + "\n")
    m = RunManifest("x", "0", "synthetic", {}, [{"seed": 0, "path": "seed_0.csv", "status": "ok", "error": None, "wall_clock": 0.0}], 0.0, str(rdir))
    rep = summarize(m)
    assert rep.slopes["m"] == pytest.approx(-0.5, abs=1e-9)


def test_summary_partial_when_seed_failed(tmp_path):
    m = execute(validate_config(_raw(seeds=[1, 2])), out=str(tmp_path))
    m.runs[1] = dict(m.runs[1], status="failed")
    assert summarize(m).status == "partial"


def test_cli_run_and_summarize(tmp_path, capsys):
    cfg = _write(tmp_path / "c.json", _raw(seeds=[1, 2]))
    out = str(tmp_path / "out")
    assert main(["run", str(cfg), "--out", out, "--summarize"]) == 0
    assert "ran:" in capsys.readouterr().out
    assert main(["run", str(cfg), "--out", out]) == 0
    assert "cache hit" in capsys.readouterr().out
    manifest = next(Path(out).rglob("manifest.json"))
    assert main(["summarize", str(manifest)]) == 0
    assert "sq_dist" in capsys.readouterr().out
    assert main(["run", str(cfg), "--out", out, "--seeds", "7"]) == 0


def test_cli_listings_and_certify(capsys):
    assert main(["list-games"]) == 0
    assert "tv_cournot" in capsys.readouterr().out
    assert main(["list-algorithms"]) == 0
    assert "optimistic_ew" in capsys.readouterr().out
    assert main(["certify", "cournot", "--samples", "200"]) == 0
    assert json.loads(capsys.readouterr().out)["monotonicity_min"] >= 0


def test_cli_error_exit_codes(tmp_path, capsys):
    bad = _write(tmp_path / "bad.json", _raw(bogus=1))
    assert main(["run", str(bad)]) == 2
    assert "bogus" in capsys.readouterr().err
    assert main(["run", str(tmp_path / "missing.json")]) == 2
    # a runtime failure inside a seed is recorded and gives exit code 1
    fail = _write(tmp_path / "fail.json", _raw(game={"name": "matrix", "params": {"A": [[1.0, 2.0], [3.0, 4.0]]}},
                                               algorithm="entropy_omd", schedule={"preset": "custom", "overrides": {"eta0": 0.1}},
                                               metrics=["kl_tau"]))
    assert main(["run", str(fail), "--out", str(tmp_path / "o")]) == 1


def test_console_script_module_entry(tmp_path):
    env = dict(os.environ, **{ENV_OUT: str(tmp_path)})
    out = subprocess.run([sys.executable, "-m", "banditgames.cli", "list-games"], env=env, capture_output=True, text=True)
    assert out.returncode == 0 and "cournot" in out.stdout
