"""Experiment runner: config parsing, single runs, seed fan-out sweeps with
log-log slope fits, and metric persistence.

Per-round series go to CSV (stable schema, byte-deterministic per
config+seed), run summaries and comparator certificates to JSON. A sweep
fans out over (T, b, seed), optionally across worker processes; each run
owns its output directory, so fan-out shares no mutable state.
"""

from __future__ import annotations

import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .environment import LabelCurtain, Stream, best_fair_in_hindsight
from .hypotheses import HypothesisFamily, family_from_config
from .learners import (
    FullInfoLearner,
    Hyperparameters,
    InvalidRange,
    PartialInfoLearner,
    make_hyperparameters,
)
from .rng import substream_seed

__all__ = [
    "ConfigError",
    "RunConfig",
    "RunResult",
    "CSV_HEADER",
    "run",
    "sweep",
    "fit_loglog_slope",
    "fit_loglog_slope_polyfit",
    "resolve_out_dir",
]

CSV_HEADER = "t,cum_error,cum_violations,lambda,oracle_calls,cum_oracle_calls"


class ConfigError(ValueError):
    """Raised for malformed or out-of-range run configurations."""


@dataclass(frozen=True)
class RunConfig:
    mode: str
    T: int
    k: int
    alpha: float
    epsilon: float
    delta: float
    b: float
    seed: int
    family: dict
    stream: dict
    out_dir: str | None = None

    @staticmethod
    def from_dict(raw: dict) -> "RunConfig":
        required = ["mode", "T", "k", "alpha", "epsilon", "delta", "seed", "family", "stream"]
        missing = [key for key in required if key not in raw]
        if missing:
            raise ConfigError(f"config missing keys: {missing}")
        try:
            return RunConfig(
                mode=str(raw["mode"]),
                T=int(raw["T"]),
                k=int(raw["k"]),
                alpha=float(raw["alpha"]),
                epsilon=float(raw["epsilon"]),
                delta=float(raw["delta"]),
                b=float(raw.get("b", 0.0)),
                seed=int(raw["seed"]),
                family=dict(raw["family"]),
                stream=dict(raw["stream"]),
                out_dir=raw.get("out_dir"),
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"malformed config value: {exc}") from exc

    @staticmethod
    def from_json(path) -> "RunConfig":
        try:
            raw = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return RunConfig.from_dict(raw)

    def replace(self, **kwargs) -> "RunConfig":
        data = asdict(self)
        data.update(kwargs)
        return RunConfig.from_dict(data)

    def run_name(self) -> str:
        return f"{self.mode}-T{self.T}-b{self.b:g}-seed{self.seed}"

    def build(self) -> tuple[HypothesisFamily, Hyperparameters, Stream]:
        try:
            family = family_from_config(self.family)
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"bad family spec: {exc}") from exc
        try:
            hp = make_hyperparameters(
                T=self.T, k=self.k, s=family.s, alpha=self.alpha,
                epsilon=self.epsilon, delta=self.delta, b=self.b,
                mode=self.mode, n_members=family.n_members,
            )
        except InvalidRange as exc:
            raise ConfigError(str(exc)) from exc
        try:
            stream = Stream(self.stream, self.k, self.T, substream_seed(self.seed, "stream"))
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"bad stream spec: {exc}") from exc
        return family, hp, stream


def resolve_out_dir(cli_out: str | None, config: RunConfig) -> Path:
    """--out beats FAIRSTREAM_OUT beats the config's own out_dir beats ./runs."""
    if cli_out:
        return Path(cli_out)
    env = os.environ.get("FAIRSTREAM_OUT")
    if env:
        return Path(env)
    if config.out_dir:
        return Path(config.out_dir)
    return Path("runs")


@dataclass(frozen=True)
class RunResult:
    config: RunConfig
    final_error: int
    final_violations: int
    final_oracle_calls: int
    comparator_error: float
    regret: float
    run_dir: str
    wall_time_s: float

    @property
    def summary(self) -> dict:
        return {
            "final_regret": self.regret,
            "cum_error": self.final_error,
            "violations": self.final_violations,
            "oracle_calls": self.final_oracle_calls,
            "comparator_total_error": self.comparator_error,
            "wall_time_s": self.wall_time_s,
        }


def _format_row(t, cum_error, cum_violations, lam, calls, cum_calls) -> str:
    return f"{t},{cum_error},{cum_violations},{lam!r},{calls},{cum_calls}"


def run(config: RunConfig, out_dir=None) -> RunResult:
    """One seeded run: metrics CSV, summary JSON, comparator JSON."""
    t_start = time.perf_counter()
    family, hp, stream = config.build()
    if config.mode == "full":
        learner = FullInfoLearner(family, hp, config.seed)
    else:
        learner = PartialInfoLearner(family, hp, config.seed)

    run_dir = Path(out_dir) if out_dir is not None else resolve_out_dir(None, config)
    run_dir = run_dir / config.run_name()
    try:
        run_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {run_dir}: {exc}") from exc

    lines = [CSV_HEADER]
    cum_error = 0
    cum_violations = 0
    cum_calls = 0
    rounds = []
    for t in range(1, config.T + 1):
        X, y, scheme = stream.round(t)
        rounds.append((X, y, scheme))
        if config.mode == "full":
            log = learner.play_round(X, y, scheme)
        else:
            log = learner.play_round(X, LabelCurtain(y), scheme)
        cum_error += log.realized_error
        cum_violations += 0 if log.report is None else 1
        cum_calls += log.oracle_calls
        lines.append(
            _format_row(t, cum_error, cum_violations, log.lambda_after,
                        log.oracle_calls, cum_calls)
        )

    comparator = best_fair_in_hindsight(rounds, family, config.alpha - config.epsilon)
    regret = cum_error - comparator.total_error
    wall = time.perf_counter() - t_start

    csv_path = run_dir / "metrics.csv"
    try:
        csv_path.write_bytes(("\n".join(lines) + "\n").encode())
        (run_dir / "comparator.json").write_text(json.dumps({
            "weights": comparator.policy.weights.tolist(),
            "total_error": comparator.total_error,
            "max_slack": comparator.max_slack,
            "n_constraints": comparator.n_constraints,
        }, sort_keys=True, indent=1) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write run outputs under {run_dir}: {exc}") from exc

    result = RunResult(
        config=config,
        final_error=cum_error,
        final_violations=cum_violations,
        final_oracle_calls=cum_calls,
        comparator_error=comparator.total_error,
        regret=float(regret),
        run_dir=str(run_dir),
        wall_time_s=wall,
    )
    summary = dict(result.summary)
    summary["config"] = asdict(config)
    summary["hyperparameters"] = {
        "mu": hp.mu, "omega": hp.omega, "R": hp.R, "M": hp.M,
        "eps_prime": hp.eps_prime, "beta": hp.beta,
        "alpha_query": hp.alpha_query, "error_weight": hp.error_weight,
        "noise_scale": hp.noise_scale, "s": hp.s, "n_members": hp.n_members,
    }
    (run_dir / "summary.json").write_text(json.dumps(summary, sort_keys=True, indent=1) + "\n")
    return result


def fit_loglog_slope(Ts, values) -> float | None:
    """Least-squares slope of log(value) against log(T); None if undefined."""
    Ts = np.asarray(Ts, dtype=float)
    values = np.asarray(values, dtype=float)
    if len(Ts) < 2 or (values <= 0).any():
        return None
    x = np.log(Ts)
    y = np.log(values)
    xc = x - x.mean()
    return float((xc @ (y - y.mean())) / (xc @ xc))


def fit_loglog_slope_polyfit(Ts, values) -> float | None:
    """Independent recomputation of the log-log slope via polyfit."""
    Ts = np.asarray(Ts, dtype=float)
    values = np.asarray(values, dtype=float)
    if len(Ts) < 2 or (values <= 0).any():
        return None
    return float(np.polyfit(np.log(Ts), np.log(values), 1)[0])


def _run_for_sweep(args) -> dict:
    config_dict, out_dir = args
    result = run(RunConfig.from_dict(config_dict), out_dir)
    return {
        "T": result.config.T,
        "b": result.config.b,
        "seed": result.config.seed,
        "regret": result.regret,
        "violations": result.final_violations,
        "cum_error": result.final_error,
        "oracle_calls": result.final_oracle_calls,
    }


def sweep(
    base: RunConfig,
    Ts,
    n_seeds: int,
    bs,
    out_dir=None,
    jobs: int = 1,
) -> dict:
    """Seed fan-out over (T, b); per-cell seed means and per-b slope fits.

    Seeds are base.seed + 0 .. base.seed + n_seeds - 1. Returns the frontier
    table and writes frontier.json next to the runs.
    """
    Ts = [int(T) for T in Ts]
    bs = [float(b) for b in bs]
    if not Ts or not bs or n_seeds < 1:
        raise ConfigError("sweep needs nonempty T list, b list, and seeds >= 1")
    out_root = Path(out_dir) if out_dir is not None else resolve_out_dir(None, base)
    tasks = [
        (asdict(base.replace(T=T, b=b, seed=base.seed + i)), str(out_root))
        for T in Ts
        for b in bs
        for i in range(n_seeds)
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_run_for_sweep, tasks))
    else:
        rows = [_run_for_sweep(task) for task in tasks]

    cells = {}
    for row in rows:
        cells.setdefault((row["T"], row["b"]), []).append(row)
    table = []
    for (T, b), members in sorted(cells.items()):
        table.append({
            "T": T,
            "b": b,
            "n_seeds": len(members),
            "mean_regret": float(np.mean([m["regret"] for m in members])),
            "mean_violations": float(np.mean([m["violations"] for m in members])),
        })
    slopes = {}
    for b in bs:
        series = sorted((c for c in table if c["b"] == b), key=lambda c: c["T"])
        Ts_b = [c["T"] for c in series]
        slopes[f"b={b:g}"] = {
            "regret": fit_loglog_slope(Ts_b, [c["mean_regret"] for c in series]),
            "violations": fit_loglog_slope(Ts_b, [c["mean_violations"] for c in series]),
        }
    frontier = {"table": table, "slopes": slopes, "rows": rows}
    out_root.mkdir(parents=True, exist_ok=True)
    (out_root / "frontier.json").write_text(json.dumps(frontier, sort_keys=True, indent=1) + "\n")
    return frontier
