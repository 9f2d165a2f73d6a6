"""Experiment orchestration: config parsing, seed fan-out, CSV output, summaries.

A run directory is ``<root>/<name>/<hash12>/`` where ``hash12`` is a prefix of
the config hash. It holds one ``seed_<s>.csv`` per seed, ``manifest.json``
and, after :func:`summarize`, ``summary.csv`` and ``summary.txt``.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .algorithms import (
    run_bandit_mirror_descent,
    run_entropy_bandit_omd,
    run_exact_gradient_baseline,
    run_linear_variant,
    run_optimistic_regularized_ew,
    run_time_varying,
)
from .errors import ConfigError, DomainError, UsageError
from .games import NoiseSpec
from .geometry import PlayerGeometry
from .library import (
    CournotGame,
    CournotParams,
    MatrixGame,
    MatrixGameSpec,
    all_active_cournot_params,
    cournot_nash,
    make_cournot,
    make_matrix_game,
    make_time_varying_cournot,
    default_cournot_params,
)
from .metrics import GRID_PER_DECADE, METRICS, MetricContext, fit_rate, record_metrics
from .prox import solve_regularized_ne
from .schedules import PRESETS, make_schedule

log = logging.getLogger(__name__)

ENV_OUT = "BANDITGAMES_OUT"
DEFAULT_OUT = "runs"

REQUIRED = ("name", "game", "algorithm", "schedule", "T", "seeds", "metrics")
OPTIONAL = ("noise_sigma", "output_dir", "grid_per_decade", "options")
# fields that do not change the numbers a seed produces
UNHASHED = ("output_dir", "seeds", "parallelism")

OPTION_KEYS = ("beta_mode", "engine", "regret_resolution")


# ---------------------------------------------------------------------------
# Registries
# ---------------------------------------------------------------------------


def _cournot_params(params: dict) -> CournotParams:
    preset = params.get("preset", "default")
    if preset == "default":
        base = default_cournot_params()
    elif preset == "all_active":
        base = all_active_cournot_params()
    else:
        raise ConfigError(f"unknown Cournot preset {preset!r}")
    return CournotParams(
        cost=params.get("cost", base.cost),
        intercept=params.get("intercept", base.intercept),
        slope=params.get("slope", base.slope),
        capacity=params.get("capacity", base.capacity),
    )


def _build_cournot(params: dict, T: int):
    p = _cournot_params(params)
    return make_cournot(p, normalize=params.get("normalize", True))


def _build_matrix(params: dict, T: int):
    if "A" not in params:
        raise ConfigError("matrix game needs parameter 'A'")
    spec = MatrixGameSpec(np.asarray(params["A"], dtype=float), params.get("orientation", "row_min"),
                          weight=float(params.get("weight", 0.0)))
    return make_matrix_game(spec, normalize=params.get("normalize", False))


def _build_tv_cournot(params: dict, T: int):
    period = params.get("period", "T")
    period = float(T) if period == "T" else float(period)
    return make_time_varying_cournot(
        _cournot_params(params),
        params.get("drift", "sinusoidal"),
        alpha=float(params.get("alpha", 0.5)),
        k=params.get("k"),
        amplitude=float(params.get("amplitude", 5.0)),
        period=period,
        normalize=params.get("normalize", True),
    )


GAME_PARAMS = {
    "cournot": ("preset", "cost", "intercept", "slope", "capacity", "normalize"),
    "matrix": ("A", "orientation", "weight", "normalize"),
    "tv_cournot": ("preset", "cost", "intercept", "slope", "capacity", "normalize", "drift", "alpha", "k", "amplitude", "period"),
}

GAMES = {
    "cournot": (_build_cournot, "Cournot market, costs normalized to [0, 1] (default 5 firms)"),
    "matrix": (_build_matrix, "two-player zero-sum matrix game, row player minimizes x^T A y"),
    "tv_cournot": (_build_tv_cournot, "Cournot market with drifting intercepts (sinusoidal or decaying)"),
}

ALGORITHMS = {
    "bandit_md": ("cournot matrix", "barrier mirror descent with ellipsoidal one-point estimates"),
    "linear_md": ("matrix", "the same loop with tau-weighted regularization for linear costs"),
    "converging_md": ("tv_cournot", "the main loop on a drifting game that settles down"),
    "tracking_md": ("tv_cournot", "tracking variant without the p-divergence term"),
    "entropy_omd": ("matrix", "entropy-regularized bandit KL mirror descent on a clipped simplex"),
    "optimistic_ew": ("matrix", "optimistic regularized exponentiated weights, two plays per round"),
    "exact_gd": ("cournot matrix", "projected gradient descent with exact gradients"),
    "exact_omd": ("matrix", "multiplicative weights with exact gradients"),
}

PRESET_FOR = {
    "bandit_md": {"monotone_main", "strongly_monotone_main", "noisy", "experiment_paper", "custom"},
    "linear_md": {"linear_tau"},
    "converging_md": {"monotone_main", "strongly_monotone_main", "noisy", "experiment_paper", "custom"},
    "tracking_md": {"tracking"},
    "entropy_omd": {"entropy", "custom"},
    "optimistic_ew": {"entropy", "custom"},
    "exact_gd": {"constant", "custom"},
    "exact_omd": {"constant", "custom"},
}

METRIC_NEEDS = {
    "duality_gap": {"matrix"},
    "duality_gap_avg": {"matrix"},
    "kl_tau": {"entropy_omd", "optimistic_ew"},
    "tracking_gap_avg": {"tv_cournot"},
}


# ---------------------------------------------------------------------------
# Config
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RunConfig:
    name: str
    game: dict
    algorithm: str
    schedule: dict
    T: int
    seeds: tuple
    metrics: tuple
    noise_sigma: float = 0.0
    output_dir: Optional[str] = None
    grid_per_decade: int = GRID_PER_DECADE
    options: dict = field(default_factory=dict)

    def hashed_dict(self) -> dict:
        d = asdict(self)
        for key in UNHASHED:
            d.pop(key, None)
        d["metrics"] = list(self.metrics)
        return d

    @property
    def config_hash(self) -> str:
        return config_hash(self.hashed_dict())

    def with_seeds(self, seeds) -> "RunConfig":
        return RunConfig(**{**asdict(self), "seeds": tuple(int(s) for s in seeds)})

    def with_output_dir(self, out: str) -> "RunConfig":
        return RunConfig(**{**asdict(self), "output_dir": out})


def config_hash(d: dict) -> str:
    blob = json.dumps(d, sort_keys=True, separators=(",", ":"), default=_json_default)
    return hashlib.sha256(blob.encode()).hexdigest()


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(f"not serializable: {type(o).__name__}")


def _reject_unknown(d: dict, allowed, where: str) -> None:
    for key in d:
        if key not in allowed:
            raise ConfigError(f"unknown key {key!r} in {where}")


def validate_config(raw: dict) -> RunConfig:
    """Strict validation of a parsed config mapping."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    for key in REQUIRED:
        if key not in raw:
            raise ConfigError(f"missing required key {key!r}")
    _reject_unknown(raw, REQUIRED + OPTIONAL, "config")
    game = raw["game"]
    if not isinstance(game, dict) or "name" not in game:
        raise ConfigError("missing required key 'name' in game")
    _reject_unknown(game, ("name", "params"), "game")
    gname = game["name"]
    if gname not in GAMES:
        raise ConfigError(f"unknown game {gname!r}")
    gparams = dict(game.get("params", {}))
    _reject_unknown(gparams, GAME_PARAMS[gname], f"game params of {gname!r}")
    algo = raw["algorithm"]
    if algo not in ALGORITHMS:
        raise ConfigError(f"unknown algorithm {algo!r}")
    if gname not in ALGORITHMS[algo][0].split():
        raise ConfigError(f"algorithm {algo!r} does not run on game {gname!r}")
    sched = raw["schedule"]
    if not isinstance(sched, dict) or "preset" not in sched:
        raise ConfigError("missing required key 'preset' in schedule")
    _reject_unknown(sched, ("preset", "overrides"), "schedule")
    preset = sched["preset"]
    if preset not in PRESETS:
        raise ConfigError(f"unknown schedule preset {preset!r}")
    if preset not in PRESET_FOR[algo]:
        raise ConfigError(f"schedule preset {preset!r} is incompatible with algorithm {algo!r} on game {gname!r}")
    if algo == "linear_md" and float(gparams.get("weight", 0.0)) != 0.0:
        raise ConfigError("linear_md needs linear costs (matrix weight 0)")
    T = raw["T"]
    if not isinstance(T, int) or isinstance(T, bool) or T < 1:
        raise ConfigError("T must be a positive integer")
    seeds = raw["seeds"]
    if not isinstance(seeds, list) or not seeds or not all(isinstance(s, int) and s >= 0 for s in seeds):
        raise ConfigError("seeds must be a nonempty list of nonnegative integers")
    if len(set(seeds)) != len(seeds):
        raise ConfigError("seeds must be distinct")
    metrics = raw["metrics"]
    if not isinstance(metrics, list) or not all(isinstance(m, str) for m in metrics):
        raise ConfigError("metrics must be a list of names")
    for m in metrics:
        if m not in METRICS:
            raise ConfigError(f"unknown metric {m!r}")
        need = METRIC_NEEDS.get(m)
        if need and gname not in need and algo not in need:
            raise ConfigError(f"metric {m!r} is not available for {algo!r} on {gname!r}")
    sigma = float(raw.get("noise_sigma", 0.0))
    if sigma < 0:
        raise ConfigError("noise_sigma must be nonnegative")
    grid = raw.get("grid_per_decade", GRID_PER_DECADE)
    if not isinstance(grid, int) or grid < 1:
        raise ConfigError("grid_per_decade must be a positive integer")
    options = dict(raw.get("options", {}))
    _reject_unknown(options, OPTION_KEYS, "options")
    cfg = RunConfig(
        name=str(raw["name"]),
        game={"name": gname, "params": gparams},
        algorithm=algo,
        schedule={"preset": preset, "overrides": dict(sched.get("overrides", {}))},
        T=T,
        seeds=tuple(seeds),
        metrics=tuple(metrics),
        noise_sigma=sigma,
        output_dir=raw.get("output_dir"),
        grid_per_decade=grid,
        options=options,
    )
    # building the game and schedule surfaces bad parameters now, not in a worker
    try:
        _build_schedule(cfg, _build_game(cfg))
    except (UsageError, DomainError, TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc
    return cfg


def parse_config(path) -> RunConfig:
    """Read and validate a JSON run config; an empty file counts as ``{}``."""
    text = Path(path).read_text()
    if not text.strip():
        raw = {}
    else:
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
    return validate_config(raw)


# ---------------------------------------------------------------------------
# One run
# ---------------------------------------------------------------------------


def _build_game(cfg: RunConfig):
    return GAMES[cfg.game["name"]][0](cfg.game["params"], cfg.T)


def _player_dim(game) -> int:
    sets = game.limit_game().sets if hasattr(game, "limit_game") else game.sets
    return max(PlayerGeometry.default_for(s).dim for s in sets)


def _build_schedule(cfg: RunConfig, game):
    d = _player_dim(game)
    ov = dict(cfg.schedule["overrides"])
    phi = float(ov.pop("phi", 0.0))
    return make_schedule(cfg.schedule["preset"], d=d, T=cfg.T, sigma=cfg.noise_sigma, phi=phi, **ov)


def run_single(cfg: RunConfig, seed: int):
    """Run one seed and record the configured metrics; returns the trajectory."""
    game = _build_game(cfg)
    sched = _build_schedule(cfg, game)
    noise = NoiseSpec(cfg.noise_sigma, "uniform")
    opts = cfg.options
    algo = cfg.algorithm
    engine = opts.get("engine", "auto")
    ctx = MetricContext(regret_resolution=int(opts.get("regret_resolution", 100)))
    if algo in ("bandit_md", "linear_md"):
        kw = {"engine": engine}
        if algo == "bandit_md":
            traj = run_bandit_mirror_descent(game, sched, cfg.T, noise, seed, **kw)
        else:
            traj = run_linear_variant(game, cfg.T, seed, noise=noise, schedule=sched, **kw)
        _static_context(ctx, game)
    elif algo in ("converging_md", "tracking_md"):
        mode = "tracking" if algo == "tracking_md" else "converging"
        traj = run_time_varying(game, mode, sched, cfg.T, noise, seed, engine=engine)
        limit = game.limit_game()
        ctx.game = limit
        ctx.reference = tuple(np.array([v]) for v in cournot_nash(game.base))
        ctx.sequence = game
        if "tracking_gap_avg" in cfg.metrics:
            ctx.nash_path = game.nash_path(np.arange(1, cfg.T + 1))
    elif algo in ("entropy_omd", "optimistic_ew"):
        eng = "kernel" if engine in ("auto", "kernel") else "reference"
        eta = float(sched.eta(1.0))
        if algo == "entropy_omd":
            traj = run_entropy_bandit_omd(game, eta, sched.tau, sched.beta, cfg.T, seed,
                                          beta_mode=opts.get("beta_mode", "clip"), noise=noise, engine=eng)
        else:
            traj = run_optimistic_regularized_ew(game, eta, sched.tau, sched.beta, sched.rho, cfg.T, seed,
                                                 beta_mode=opts.get("beta_mode", "offset"), noise=noise, engine=eng)
        _static_context(ctx, game)
        L = traj.info["loss_matrix"]
        if sched.tau > 0:
            fp = solve_regularized_ne(-L, sched.tau)
            ctx.tau_reference = (fp.x, fp.y)
        elif "kl_tau" in cfg.metrics:
            raise ConfigError("kl_tau needs tau > 0")
    else:
        method = "gd_projected" if algo == "exact_gd" else "omd_entropy"
        traj = run_exact_gradient_baseline(game, method, float(sched.eta(1.0)), cfg.T)
        traj.seed = seed
        _static_context(ctx, game)
    record_metrics(traj, cfg.metrics, ctx, cfg.grid_per_decade)
    return traj


def _static_context(ctx: MetricContext, game) -> None:
    base = getattr(game, "base", game)
    ctx.game = game
    if isinstance(base, MatrixGame):
        ctx.matrix = base.A
        ctx.reference = base.nash()
    elif isinstance(base, CournotGame):
        ctx.reference = base.nash()


def trajectory_csv(traj, chash: str, seed: int) -> str:
    """CSV text of a trajectory's metric series; floats use ``repr``."""
    lines = [f"# config_hash={chash}", f"# seed={seed}", "t,metric,value"]
    for name in sorted(traj.metrics):
        t, v = traj.metrics[name]
        lines.extend(f"{int(a)},{name},{float(b)!r}" for a, b in zip(t, v))
    return "\n".join(lines) + "\n"


def read_trajectory_csv(path) -> tuple:
    """Parse a trajectory CSV into ``(header, {metric: (t, values)})``."""
    header = {}
    series = {}
    with open(path) as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("#"):
                key, _, val = line[1:].strip().partition("=")
                header[key] = val
                continue
            if line == "t,metric,value" or not line:
                continue
            t, name, val = line.split(",")
            series.setdefault(name, ([], []))
            series[name][0].append(int(t))
            series[name][1].append(float(val))
    return header, {k: (np.array(a), np.array(b)) for k, (a, b) in series.items()}


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _worker(cfg_dict: dict, seed: int, path: str, chash: str) -> dict:
    cfg = RunConfig(**cfg_dict)
    start = time.perf_counter()
    try:
        traj = run_single(cfg, seed)
        _atomic_write(Path(path), trajectory_csv(traj, chash, seed))
        status, err = "ok", None
    except Exception as exc:  # recorded in the manifest, surfaced by the exit code
        status, err = "failed", f"{type(exc).__name__}: {exc}"
    return {"seed": seed, "path": Path(path).name, "status": status, "error": err,
            "wall_clock": time.perf_counter() - start}


# ---------------------------------------------------------------------------
# Fan-out and manifest
# ---------------------------------------------------------------------------


@dataclass
class RunManifest:
    config_hash: str
    version: str
    name: str
    config: dict
    runs: list
    wall_clock: float
    directory: str = ""
    cache_hit: bool = False

    @property
    def ok(self) -> bool:
        return all(r["status"] == "ok" for r in self.runs)

    def to_json(self) -> str:
        d = {k: v for k, v in asdict(self).items() if k not in ("directory", "cache_hit")}
        return json.dumps(d, indent=2, sort_keys=True, default=_json_default) + "\n"

    @classmethod
    def load(cls, path) -> "RunManifest":
        path = Path(path)
        d = json.loads(path.read_text())
        return cls(directory=str(path.parent), **d)


def output_root(cfg: RunConfig, out: Optional[str] = None) -> Path:
    return Path(out or cfg.output_dir or os.environ.get(ENV_OUT) or DEFAULT_OUT)


def run_directory(cfg: RunConfig, out: Optional[str] = None) -> Path:
    return output_root(cfg, out) / cfg.name / cfg.config_hash[:12]


def execute(cfg: RunConfig, parallelism: int = 1, force: bool = False, out: Optional[str] = None) -> RunManifest:
    """Run every seed of ``cfg`` and write the manifest last.

    Seeds already completed under the same config hash are skipped unless
    ``force``; when nothing is left to do no file is touched and the
    returned manifest has ``cache_hit`` set.
    """
    if parallelism < 1:
        raise UsageError("parallelism must be at least 1")
    rdir = run_directory(cfg, out)
    mpath = rdir / "manifest.json"
    chash = cfg.config_hash
    done = {}
    if mpath.exists() and not force:
        try:
            old = RunManifest.load(mpath)
        except (json.JSONDecodeError, TypeError, KeyError):
            old = None
        if old is not None and old.config_hash == chash:
            done = {r["seed"]: r for r in old.runs if r["status"] == "ok" and (rdir / r["path"]).exists()}
    todo = [s for s in cfg.seeds if s not in done]
    if not todo:
        log.info("cache hit for %s (%s)", cfg.name, chash[:12])
        runs = [done[s] for s in cfg.seeds]
        return RunManifest(chash, __version__, cfg.name, cfg.hashed_dict(), runs,
                           sum(r["wall_clock"] for r in runs), str(rdir), cache_hit=True)
    rdir.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    cfg_dict = asdict(cfg)
    jobs = [(cfg_dict, s, str(rdir / f"seed_{s}.csv"), chash) for s in todo]
    if parallelism == 1 or len(jobs) == 1:
        results = [_worker(*job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=min(parallelism, len(jobs))) as pool:
            results = list(pool.map(_worker, *zip(*jobs)))
    fresh = {r["seed"]: r for r in results}
    merged = {**done, **fresh}
    runs = [merged[s] for s in sorted(merged)]
    manifest = RunManifest(chash, __version__, cfg.name, cfg.hashed_dict(), runs, time.perf_counter() - start, str(rdir))
    _atomic_write(mpath, manifest.to_json())
    for r in results:
        if r["status"] != "ok":
            log.error("seed %s failed: %s", r["seed"], r["error"])
    return manifest


# ---------------------------------------------------------------------------
# Summaries
# ---------------------------------------------------------------------------


@dataclass
class SummaryReport:
    rows: list
    slopes: dict
    status: str
    csv_path: str
    text_path: str


def _final_decade_slope(t: np.ndarray, v: np.ndarray) -> float:
    T = int(t.max())
    try:
        return fit_rate(t, v, (T / 10.0, T))
    except (UsageError, DomainError):
        return float("nan")


def summarize(manifest) -> SummaryReport:
    """Aggregate per-seed CSVs into ``summary.csv`` and ``summary.txt``.

    Rows hold mean, median and population std across seeds at each grid
    time; the slope column is the Theil-Sen log-log slope of the mean series
    over the final decade (blank when undefined, e.g. for signed series).
    Failed or missing seeds make the status ``partial``.
    """
    if not isinstance(manifest, RunManifest):
        manifest = RunManifest.load(manifest)
    rdir = Path(manifest.directory)
    per_seed = []
    status = "complete"
    for r in manifest.runs:
        path = rdir / r["path"]
        if r["status"] != "ok" or not path.exists():
            status = "partial"
            continue
        per_seed.append(read_trajectory_csv(path)[1])
    if not per_seed:
        raise UsageError("no completed runs to summarize")
    if status == "partial":
        log.warning("summary of %s covers %d of %d seeds", manifest.name, len(per_seed), len(manifest.runs))
    names = sorted(set().union(*(s.keys() for s in per_seed)))
    rows = []
    slopes = {}
    for name in names:
        series = [s[name] for s in per_seed if name in s]
        t = series[0][0]
        if any(not np.array_equal(s[0], t) for s in series):
            raise UsageError(f"seeds disagree on the time grid of {name!r}")
        V = np.vstack([s[1] for s in series])
        mean = V.mean(axis=0)
        slope = _final_decade_slope(t, mean)
        slopes[name] = slope
        med = np.median(V, axis=0)
        std = V.std(axis=0)
        for k in range(t.size):
            rows.append((name, int(t[k]), V.shape[0], float(mean[k]), float(med[k]), float(std[k]), slope))
    lines = ["metric,t,n,mean,median,std,slope"]
    for name, t, n, mean, med, std, slope in rows:
        s = "" if np.isnan(slope) else repr(slope)
        lines.append(f"{name},{t},{n},{mean!r},{med!r},{std!r},{s}")
    csv_path = rdir / "summary.csv"
    _atomic_write(csv_path, "\n".join(lines) + "\n")
    text = _summary_text(manifest, rows, slopes, status, len(per_seed))
    text_path = rdir / "summary.txt"
    _atomic_write(text_path, text)
    return SummaryReport(rows, slopes, status, str(csv_path), str(text_path))


def _summary_text(manifest, rows, slopes, status, nseeds) -> str:
    out = [f"{manifest.name}  config {manifest.config_hash[:12]}  seeds {nseeds}  status {status}", ""]
    out.append(f"{'metric':<24}{'t':>10}{'mean':>14}{'median':>14}{'std':>14}{'slope':>10}")
    last = {}
    for row in rows:
        last[row[0]] = row
    for name in sorted(last):
        _, t, _, mean, med, std, slope = last[name]
        s = "-" if np.isnan(slope) else f"{slope:.3f}"
        out.append(f"{name:<24}{t:>10}{mean:>14.6g}{med:>14.6g}{std:>14.6g}{s:>10}")
    return "\n".join(out) + "\n"
