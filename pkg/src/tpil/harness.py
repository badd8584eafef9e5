"""Experiment configuration, execution, aggregation and result files."""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import logging
import os
import time
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .demos import (
    ObservationStore,
    add_observation_noise,
    discounted_features,
    expected_cumulative_features,
    observe,
    rollout,
)
from .errors import ConfigError, ExperimentFailed, InvalidParam, IoError
from .matching import match_features, solve_optimal_policy
from .mdp import build_gridworld, extract_policy, occupancy_of_policy, policy_value
from .perspectives import basis_perspectives, random_perspectives
from .strategies import (
    SelectionState,
    learner_view_estimate,
    next_active_sim,
    next_active_var,
    next_dissimilarity,
    next_ucb_residual,
    next_uniform,
)
from .theory import counterexample_marginals, counterexample_value
from .warmup import RidgeState, greedy_logdet_select, ridge_estimate, ridge_update

log = logging.getLogger(__name__)

KINDS = ("strategies", "validate-thm1", "warmup", "counterexample")
SELECTION = ("uniform", "active(var)", "active(sim)", "active(corr)", "ucb")
WARMUP_RULES = ("greedy-logdet", "fixed", "uniform")
CONSTRUCTIONS = ("basis", "duplicated-basis", "random-thresholded", "random-uniform")

# independent random streams per seed
WORLD, PERSPECTIVES, DEMOS, STRATEGY, LEARNER, NOISE = range(6)


def _stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


def _name_key(name: str) -> int:
    return zlib.crc32(name.encode())


# -- configuration ------------------------------------------------------------


@dataclass
class ExperimentConfig:
    kind: str = "strategies"
    grid_side: int = 10
    object_types: int = 4
    objects_per_type: int = 2
    perspectives: dict = field(default_factory=lambda: {"construction": "duplicated-basis", "duplicates": 12})
    strategies: list = field(default_factory=lambda: ["uniform", "active(var)", "active(sim)", "active(corr)"])
    settings: list = field(default_factory=list)
    ucb_c: float = 1.0
    ewa_alpha: float = 0.9
    ridge_lambda: float = 1.0
    similarity_floor: float = 1e-6
    corr_rollouts: int = 16
    noise_std: float = 0.1
    n_policies: int = 20
    budget: int = 60
    seeds: list = field(default_factory=lambda: list(range(100)))
    horizon: int = 30
    gamma: float = 0.3
    backend: str = "ipm"
    bootstrap_resamples: int = 2000
    bootstrap_seed: int = 2024
    parallel: int = 1
    out_dir: str | None = None

    def validate(self) -> ExperimentConfig:
        if self.kind not in KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}; choose from {KINDS}")
        if self.budget < 1:
            raise ConfigError("budget must be >= 1")
        if not self.seeds:
            raise ConfigError("seed list is empty")
        if not 0.0 < self.gamma < 1.0:
            raise ConfigError("gamma must lie in (0, 1)")
        if self.horizon < 1 or self.parallel < 1 or self.corr_rollouts < 1:
            raise ConfigError("horizon, parallel and corr_rollouts must be >= 1")
        if self.ridge_lambda <= 0 or not 0.0 <= self.ewa_alpha <= 1.0 or self.similarity_floor <= 0:
            raise ConfigError("need ridge_lambda > 0, ewa_alpha in [0, 1], similarity_floor > 0")
        if self.kind == "strategies":
            bad = [s for s in self.strategies if s not in SELECTION]
            if bad or not self.strategies:
                raise ConfigError(f"unknown strategies {bad}; choose from {SELECTION}")
        if self.kind == "warmup":
            bad = [s for s in self.strategies if s not in WARMUP_RULES]
            if bad or not self.strategies:
                raise ConfigError(f"unknown warm-up rules {bad}; choose from {WARMUP_RULES}")
        if self.kind == "validate-thm1":
            if not self.settings:
                raise ConfigError("validate-thm1 needs a settings list such as ['subset-4', 'random-2']")
            for s in self.settings:
                _parse_setting(s, self.object_types)
        if self.kind in ("strategies", "warmup"):
            if self.perspectives.get("construction") not in CONSTRUCTIONS:
                raise ConfigError(f"perspective construction must be one of {CONSTRUCTIONS}")
        return self

    @classmethod
    def from_dict(cls, d: dict) -> ExperimentConfig:
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(d) - names)
        if unknown:
            raise ConfigError(f"unknown configuration keys: {unknown}")
        base = default_config(d.get("kind", "strategies"))
        return dataclasses.replace(base, **d).validate()

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def config_hash(self) -> str:
        d = self.to_dict()
        for volatile in ("out_dir", "parallel"):
            d.pop(volatile)
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()


def default_config(kind: str) -> ExperimentConfig:
    if kind == "strategies":
        return ExperimentConfig()
    if kind == "validate-thm1":
        k = 4
        return ExperimentConfig(
            kind=kind,
            strategies=["uniform"],
            settings=[f"subset-{i}" for i in range(1, k + 1)] + [f"random-{i}" for i in range(1, k + 1)],
            budget=200,
            seeds=list(range(10)),
        )
    if kind == "warmup":
        return ExperimentConfig(kind=kind, strategies=["greedy-logdet", "fixed"], budget=50)
    if kind == "counterexample":
        return ExperimentConfig(kind=kind, strategies=[], budget=1, seeds=[0])
    raise ConfigError(f"unknown experiment kind {kind!r}; choose from {KINDS}")


def _parse_setting(name: str, k: int):
    try:
        family, i = name.rsplit("-", 1)
        i = int(i)
    except ValueError:
        raise ConfigError(f"setting {name!r} is not of the form subset-<i> or random-<i>") from None
    if family not in ("subset", "random") or not 1 <= i <= k:
        raise ConfigError(f"setting {name!r} needs family subset/random and 1 <= i <= {k}")
    return family, i


def make_perspectives(spec: dict, k: int, rng):
    kind = spec.get("construction")
    if kind == "basis":
        return basis_perspectives(k)
    if kind == "duplicated-basis":
        return basis_perspectives(k, int(spec.get("duplicates", 12)))
    if kind == "random-thresholded":
        return random_perspectives(k, int(spec.get("count", 40)), float(spec.get("threshold", 0.5)), rng)
    if kind == "random-uniform":
        return random_perspectives(k, int(spec.get("count", k)), None, rng)
    raise ConfigError(f"perspective construction must be one of {CONSTRUCTIONS}")


# -- records ------------------------------------------------------------------


def _no_csv():
    return field(default=None, metadata={"csv": False})


@dataclass(frozen=True)
class RunRecord:
    seed: int
    strategy: str
    t: int
    perspective: int
    normalized_reward: float
    residuals: np.ndarray | None = _no_csv()


@dataclass(frozen=True)
class WarmupRecord:
    seed: int
    strategy: str
    t: int
    perspective: int
    estimation_error: float
    logdet: float


@dataclass(frozen=True)
class CounterexampleRecord:
    seed: int
    policy: int
    p_left: float
    value: float
    expected_value: float
    marginal_deviation: float


@dataclass(frozen=True)
class AggregateCurve:
    strategy: str
    t: int
    mean: float
    ci_lo: float
    ci_hi: float
    n: int


RECORD_TYPES = {
    "strategies": RunRecord,
    "validate-thm1": RunRecord,
    "warmup": WarmupRecord,
    "counterexample": CounterexampleRecord,
}
METRIC = {RunRecord: "normalized_reward", WarmupRecord: "estimation_error"}


def csv_columns(record_type) -> list[str]:
    return [f.name for f in dataclasses.fields(record_type) if f.metadata.get("csv", True)]


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    records: list
    curves: list
    statuses: list  # per seed: {"seed", "status", "error"}
    wall_time: float

    @property
    def failed(self) -> bool:
        return any(s["status"] != "ok" for s in self.statuses)


# -- per-seed runners ---------------------------------------------------------


def _world(config: ExperimentConfig, seed: int):
    gw = build_gridworld(
        config.grid_side, config.object_types, config.objects_per_type, _stream(seed, WORLD), config.gamma
    )
    mu_E, J_star = solve_optimal_policy(gw.mdp, gw.reward, config.backend)
    if J_star <= 0:
        raise InvalidParam(f"seed {seed}: optimal value {J_star} is not positive, cannot normalize")
    return gw, mu_E, J_star


def _select(name, state, perspectives, rng, config):
    if name == "uniform":
        return next_uniform(state)
    if name == "active(var)":
        return next_active_var(state, perspectives)
    if name == "active(sim)":
        return next_active_sim(perspectives, state, rng, config.similarity_floor)
    if name == "active(corr)":
        return next_dissimilarity(state, rng, config.similarity_floor)
    if name == "ucb":
        return next_ucb_residual(state, config.ucb_c)
    raise ConfigError(f"unknown strategy {name!r}")


def _imitation_run(config, seed, label, rule, gw, J_star, perspectives, psi):
    "One learner loop; ``psi`` holds the pre-sampled expert demonstrations."
    mdp, F, r = gw.mdp, gw.features, gw.reward
    state = SelectionState(perspectives, config.ridge_lambda, config.ewa_alpha)
    store = ObservationStore.for_perspectives(perspectives)
    strat_rng = _stream(seed, STRATEGY, _name_key(label))
    learner_rng = _stream(seed, LEARNER, _name_key(label))
    pi_L = np.full((mdp.n_states, mdp.n_actions), 1.0 / mdp.n_actions)
    out = []
    for t in range(config.budget):
        nu = _select(rule, state, perspectives, strat_rng, config)
        store.record(nu, observe(psi[t], perspectives[nu]))
        state.register(nu, perspectives[nu])
        if rule == "active(corr)":
            # learner trajectories in the chosen perspective, generated by the
            # policy in force when the perspective was picked
            view = learner_view_estimate(mdp, F, perspectives[nu], pi_L, config.horizon, config.corr_rollouts, learner_rng)
            state.update_ewa(nu, view)
        match = match_features(mdp, F, perspectives, store, backend=config.backend)
        state.last_residuals = match.residuals
        pi_L = extract_policy(match.occupancy, mdp.n_actions)
        value = policy_value(occupancy_of_policy(mdp, pi_L), r) / J_star
        out.append(RunRecord(seed, label, t + 1, nu, float(value), match.residuals))
    return out


def _expert_demos(config, seed, gw, mu_E):
    pi_E = extract_policy(mu_E, gw.mdp.n_actions)
    states, actions = rollout(gw.mdp, pi_E, config.horizon, config.budget, _stream(seed, DEMOS))
    return discounted_features(gw.mdp, gw.features, states, actions)


def _run_strategies_seed(config, seed):
    gw, mu_E, J_star = _world(config, seed)
    perspectives = make_perspectives(config.perspectives, gw.object_types, _stream(seed, PERSPECTIVES))
    psi = _expert_demos(config, seed, gw, mu_E)  # shared by all strategies
    records = []
    for name in config.strategies:
        records += _imitation_run(config, seed, name, name, gw, J_star, perspectives, psi)
    return records


def _run_thm1_seed(config, seed):
    gw, mu_E, J_star = _world(config, seed)
    k = gw.object_types
    subset = basis_perspectives(k)
    random_set = random_perspectives(k, k, None, _stream(seed, PERSPECTIVES))
    psi = _expert_demos(config, seed, gw, mu_E)
    records = []
    for setting in config.settings:
        family, i = _parse_setting(setting, k)
        views = (subset if family == "subset" else random_set)[:i]
        records += _imitation_run(config, seed, setting, "uniform", gw, J_star, views, psi)
    return records


def _run_warmup_seed(config, seed):
    gw, mu_E, _ = _world(config, seed)
    pi_E = extract_policy(mu_E, gw.mdp.n_actions)
    psi_E = expected_cumulative_features(gw.mdp, pi_E, gw.features, config.horizon)
    perspectives = make_perspectives(config.perspectives, gw.object_types, _stream(seed, PERSPECTIVES))
    records = []
    for name in config.strategies:
        ridge = RidgeState(gw.object_types, config.ridge_lambda)
        noise_rng = _stream(seed, NOISE)  # same noise sequence for every rule
        fixed = int(_stream(seed, STRATEGY, _name_key(name)).integers(len(perspectives)))
        for t in range(config.budget):
            if name == "greedy-logdet":
                nu = greedy_logdet_select(ridge, perspectives)
            elif name == "fixed":
                nu = fixed
            else:
                nu = t % len(perspectives)
            A = perspectives[nu].matrix
            o = add_observation_noise(A @ psi_E, config.noise_std, noise_rng)
            ridge_update(ridge, A, o)
            err = float(np.linalg.norm(ridge_estimate(ridge) - psi_E))
            records.append(WarmupRecord(seed, name, t + 1, nu, err, ridge.logdet()))
    return records


def _run_counterexample_seed(config, seed):
    rng = _stream(seed, STRATEGY)
    reference = counterexample_marginals(1)
    probs = [Fraction(1), Fraction(0)] + [Fraction(float(p)) for p in rng.random(config.n_policies)]
    records = []
    for i, p in enumerate(probs):
        table = counterexample_marginals(p)
        dev = max(abs(table[d][key] - reference[d][key]) for d in table for key in table[d])
        records.append(
            CounterexampleRecord(seed, i, float(p), float(counterexample_value(p)), float(p / 2), float(dev))
        )
    return records


RUNNERS = {
    "strategies": _run_strategies_seed,
    "validate-thm1": _run_thm1_seed,
    "warmup": _run_warmup_seed,
    "counterexample": _run_counterexample_seed,
}


def _run_seed(config_dict: dict, seed: int):
    config = ExperimentConfig(**config_dict)
    return RUNNERS[config.kind](config, seed)


# -- aggregation --------------------------------------------------------------


def bootstrap_ci(values, n_resamples: int = 2000, rng=None, level: float = 0.95):
    "Percentile bootstrap CI of the mean, clamped to contain the sample mean."
    values = np.asarray(values, dtype=float)
    mean = float(values.mean())
    if values.size < 2:
        return mean, mean, mean
    rng = np.random.default_rng(rng)
    idx = rng.integers(0, values.size, size=(n_resamples, values.size))
    boot = values[idx].mean(axis=1)
    tail = 100 * (1 - level) / 2
    lo, hi = np.percentile(boot, [tail, 100 - tail])
    return mean, min(float(lo), mean), max(float(hi), mean)


def aggregate(records, n_resamples: int = 2000, seed: int = 2024) -> list[AggregateCurve]:
    """Mean and bootstrap 95% CI per (strategy, t), strategies in order of appearance."""
    if not records:
        return []
    metric = METRIC.get(type(records[0]))
    if metric is None:
        return []
    table: dict = {}
    for r in records:
        table.setdefault(r.strategy, {}).setdefault(r.t, []).append(getattr(r, metric))
    curves = []
    for si, (name, by_t) in enumerate(table.items()):
        rng = np.random.default_rng([seed, si])
        for t in sorted(by_t):
            mean, lo, hi = bootstrap_ci(by_t[t], n_resamples, rng)
            curves.append(AggregateCurve(name, t, mean, lo, hi, len(by_t[t])))
    return curves


# -- execution ----------------------------------------------------------------


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Run every seed, aggregate, and write results when ``config.out_dir`` is set.

    Stops at the first failing seed; the partial results are written with a
    failure manifest and ExperimentFailed is raised from the original error.
    """
    config.validate()
    start = time.perf_counter()
    cfg = config.to_dict()
    records, statuses, error = [], [], None
    if config.parallel > 1 and len(config.seeds) > 1:
        with ProcessPoolExecutor(max_workers=config.parallel) as pool:
            futures = [pool.submit(_run_seed, cfg, s) for s in config.seeds]
            for seed, fut in zip(config.seeds, futures):
                if error is not None:
                    fut.cancel()
                    statuses.append({"seed": seed, "status": "skipped", "error": None})
                    continue
                try:
                    records += fut.result()
                    statuses.append({"seed": seed, "status": "ok", "error": None})
                except Exception as exc:  # noqa: BLE001 - reported in the manifest
                    error = exc
                    statuses.append({"seed": seed, "status": "failed", "error": repr(exc)})
    else:
        for seed in config.seeds:
            if error is not None:
                statuses.append({"seed": seed, "status": "skipped", "error": None})
                continue
            try:
                records += _run_seed(cfg, seed)
                statuses.append({"seed": seed, "status": "ok", "error": None})
                log.info("seed %s done", seed)
            except Exception as exc:  # noqa: BLE001
                error = exc
                statuses.append({"seed": seed, "status": "failed", "error": repr(exc)})

    curves = aggregate(records, config.bootstrap_resamples, config.bootstrap_seed)
    result = ExperimentResult(config, records, curves, statuses, time.perf_counter() - start)
    if config.out_dir is not None:
        write_results(records, curves, config.out_dir, config, statuses, result.wall_time)
    if error is not None:
        raise ExperimentFailed(f"experiment failed: {error!r}", result) from error
    return result


# -- output -------------------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _csv_text(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(getattr(row, c)) for c in columns])
    return buf.getvalue()


def tool_version() -> str:
    from . import __version__

    return __version__


def write_results(records, curves, out_dir, config: ExperimentConfig | None = None, statuses=None, wall_time=None) -> dict:
    """Write runs.csv, curves.csv and manifest.json; return the manifest."""
    config = config or ExperimentConfig()
    record_type = type(records[0]) if records else RECORD_TYPES[config.kind]
    out = Path(out_dir)
    files = {
        "runs.csv": _csv_text(csv_columns(record_type), records),
        "curves.csv": _csv_text(csv_columns(AggregateCurve), curves),
    }
    statuses = statuses if statuses is not None else [{"seed": s, "status": "ok", "error": None} for s in config.seeds]
    manifest = {
        "tool": "tpil",
        "version": tool_version(),
        "kind": config.kind,
        "config": config.to_dict(),
        "config_hash": config.config_hash(),
        "wall_time_s": wall_time,
        "status": "ok" if all(s["status"] == "ok" for s in statuses) else "failed",
        "runs": statuses,
        "files": {name: hashlib.sha256(text.encode()).hexdigest() for name, text in files.items()},
    }
    path = out
    try:
        out.mkdir(parents=True, exist_ok=True)
        for name, text in files.items():
            path = out / name
            path.write_text(text, encoding="utf-8")
        path = out / "manifest.json"
        path.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n", encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot write {os.fspath(path)}: {exc.strerror or exc}") from exc
    return manifest
