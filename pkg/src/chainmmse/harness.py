"""Monte Carlo experiment driver: seeded sweeps over Es/N0 x IoT x algorithm.

Common-random-numbers discipline: at every grid point, each trial derives
three independent RNG streams (channel, noise pool, data) from
SeedSequence([seed, point_index, trial_index]), so every algorithm sees
identical channels, pools, bits, and data noise, and BER comparisons are
paired. Total RNG consumption is therefore independent of the algorithm
subset, and trials may run in any order.
"""
from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field, replace

import numpy as np
import yaml

from . import central, daisy, detect, model
from .interconnect import Topology, TrafficLedger

KNOWN_ALGORITHMS = ("zf", "mmse_exactR", "mmse_sampleR", "bdac", "bcd")

# wall_time_s is a ResultRow field but deliberately not a CSV column: the
# results file must be byte-identical across reruns of the same seed
RESULT_COLUMNS = ["algorithm", "L", "es_n0_db", "iot_db", "M", "C", "K", "N",
                  "ber", "ser", "symbols", "traffic_entries", "objective"]


def parse_algorithm(token: str) -> tuple[str, int | None]:
    """Split an algorithm token like 'bcd:4' into (name, sweeps)."""
    name, _, arg = token.partition(":")
    if name not in KNOWN_ALGORITHMS:
        raise ValueError(f"algorithms: unknown algorithm {token!r}")
    if name == "bcd":
        if not arg:
            raise ValueError("algorithms: 'bcd' needs a sweep count, e.g. 'bcd:4'")
        return name, int(arg)
    if arg:
        raise ValueError(f"algorithms: {name!r} takes no argument")
    return name, None


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: model.Scenario
    es_n0_db: tuple[float, ...]
    iot_db: tuple[float, ...]
    algorithms: tuple[str, ...]
    trials: int = 10
    symbols_per_trial: int = 250
    seed: int = 1
    out_dir: str = "out"
    schedule_variant: str = "gauss_seidel_loop"

    def __post_init__(self):
        errors = []
        if not self.es_n0_db:
            errors.append("es_n0_db: grid must be nonempty")
        if not self.iot_db:
            errors.append("iot_db: grid must be nonempty")
        if not self.algorithms:
            errors.append("algorithms: list must be nonempty")
        if self.trials < 1:
            errors.append("trials: must be >= 1")
        if self.symbols_per_trial < 1:
            errors.append("symbols_per_trial: must be >= 1")
        for token in self.algorithms:
            try:
                parse_algorithm(token)
            except ValueError as exc:
                errors.append(str(exc))
        if errors:
            raise ValueError("invalid experiment config: " + "; ".join(errors))


@dataclass(frozen=True)
class ResultRow:
    algorithm: str
    L: int
    es_n0_db: float
    iot_db: float
    M: int
    C: int
    K: int
    N: int
    ber: float
    ser: float
    symbols: int
    traffic_entries: int
    objective: float
    wall_time_s: float


PROFILES = {
    "desk": dict(M=32, C=4, K=4, K_int=4, N=96, constellation=16,
                 gain_range_db=(-6.0, 0.0)),
    "paper": dict(M=128, C=8, K=8, K_int=8, N=192, constellation=16,
                  gain_range_db=(-6.0, 0.0)),
}


def profile_scenario(name: str, **overrides) -> model.Scenario:
    if name not in PROFILES:
        raise ValueError(f"unknown profile {name!r}; choose from {sorted(PROFILES)}")
    params = dict(PROFILES[name])
    params.update(overrides)
    M, C = params.pop("M"), params.pop("C")
    return model.Scenario.uniform(M, C, **params)


def trial_rngs(seed: int, point_index: int, trial_index: int):
    """Three independent streams (channel, pool, data) for one trial."""
    ss = np.random.SeedSequence([seed, point_index, trial_index])
    return [np.random.default_rng(child) for child in ss.spawn(3)]


def _build_equalizer(token: str, channels, pool, R_hat, R_exact, scenario,
                     variant: str):
    """Returns (EqualizerMatrix, traffic_entries, objective)."""
    name, L = parse_algorithm(token)
    E_s = scenario.E_s
    traffic = 0
    if name == "zf":
        W = central.zf_centralized(channels.H, scenario.cluster_sizes)
    elif name == "mmse_exactR":
        W = central.mmse_centralized(channels.H, R_exact, E_s,
                                     scenario.cluster_sizes, label=name)
    elif name == "mmse_sampleR":
        W = central.mmse_centralized(channels.H, R_hat, E_s,
                                     scenario.cluster_sizes, label=name)
    elif name == "bdac":
        dbus = daisy.make_chain(channels, pool, E_s)
        ledger = TrafficLedger(Topology("uni_loop", scenario.C))
        W = daisy.bdac_init(dbus, ledger=ledger)
        traffic = ledger.total()
    else:  # bcd:L
        dbus = daisy.make_chain(channels, pool, E_s)
        result = daisy.run_bcd(dbus, daisy.Schedule(variant=variant, L=L))
        W = result.W
        traffic = result.ledger.total()
    objective = central.sample_objective(W, channels.H, pool, E_s)
    return W, traffic, objective


def run_experiment(config: ExperimentConfig) -> list[ResultRow]:
    """Evaluate every algorithm at every (Es/N0, IoT) grid point."""
    rows = []
    grid = [(es, iot) for iot in config.iot_db for es in config.es_n0_db]
    for p, (es, iot) in enumerate(grid):
        sc = config.scenario.with_ratios(es_n0_db=es, iot_db=iot)
        const = detect.Constellation(sc.constellation)
        stats = {a: detect.ErrorStats() for a in config.algorithms}
        traffic = {a: 0 for a in config.algorithms}
        objective = {a: 0.0 for a in config.algorithms}
        wall = {a: 0.0 for a in config.algorithms}
        for t in range(config.trials):
            rng_ch, rng_pool, rng_data = trial_rngs(config.seed, p, t)
            channels = model.build_channel(sc, rng_ch)
            pool = model.draw_noise_pool(channels, sc, rng_pool)
            R_hat = model.sample_covariance(pool)
            R_exact = model.exact_covariance(channels, sc)
            frame = detect.make_frame(channels, sc, config.symbols_per_trial,
                                      rng_data, const)
            for token in config.algorithms:
                t0 = time.perf_counter()
                W, tr, obj = _build_equalizer(token, channels, pool, R_hat,
                                              R_exact, sc, config.schedule_variant)
                wall[token] += time.perf_counter() - t0
                stats[token] = stats[token] + detect.evaluate_equalizer(W, frame, sc, const)
                traffic[token] += tr
                objective[token] += obj
        for token in config.algorithms:
            name, L = parse_algorithm(token)
            st = stats[token]
            rows.append(ResultRow(
                algorithm=name, L=L or 0, es_n0_db=es, iot_db=iot,
                M=sc.M, C=sc.C, K=sc.K, N=sc.N,
                ber=st.ber, ser=st.ser, symbols=st.symbols,
                traffic_entries=traffic[token],
                objective=objective[token] / config.trials,
                wall_time_s=wall[token]))
    return rows


def emit_csv(rows: list[ResultRow], path) -> None:
    """Write the result table; floats use repr so a parse-back is exact."""
    if not rows:
        raise ValueError(f"empty result table; refusing to write {path}")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RESULT_COLUMNS)
        for r in rows:
            writer.writerow([r.algorithm, r.L, repr(r.es_n0_db), repr(r.iot_db),
                             r.M, r.C, r.K, r.N, repr(r.ber), repr(r.ser),
                             r.symbols, r.traffic_entries, repr(r.objective)])


def read_results_csv(path) -> list[ResultRow]:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for rec in reader:
            rows.append(ResultRow(
                algorithm=rec["algorithm"], L=int(rec["L"]),
                es_n0_db=float(rec["es_n0_db"]), iot_db=float(rec["iot_db"]),
                M=int(rec["M"]), C=int(rec["C"]), K=int(rec["K"]), N=int(rec["N"]),
                ber=float(rec["ber"]), ser=float(rec["ser"]),
                symbols=int(rec["symbols"]),
                traffic_entries=int(rec["traffic_entries"]),
                objective=float(rec["objective"]),
                wall_time_s=0.0))
    return rows


@dataclass(frozen=True)
class TraceRow:
    sweep: int
    block: int
    objective: float
    w_error: float  # ||W - W*||_F / ||W*||_F against the centralized solve


def convergence_trace(scenario: model.Scenario, L: int = 50,
                      variant: str = "gauss_seidel_loop",
                      seed: int | None = None) -> list[TraceRow]:
    """Run one chain instance and report per-block-update distance to the optimum."""
    rng_ch, rng_pool, _ = trial_rngs(seed if seed is not None else scenario.seed, 0, 0)
    channels = model.build_channel(scenario, rng_ch)
    pool = model.draw_noise_pool(channels, scenario, rng_pool)
    R_hat = model.sample_covariance(pool)
    W_star = central.mmse_centralized(channels.H, R_hat, scenario.E_s).W
    norm_star = np.linalg.norm(W_star, "fro")
    dbus = daisy.make_chain(channels, pool, scenario.E_s)
    result = daisy.run_bcd(dbus, daisy.Schedule(variant=variant, L=L),
                           keep_iterates=True)
    rows = []
    for (sweep, block, obj), W in zip(result.objectives, result.iterates):
        err = np.linalg.norm(W - W_star, "fro") / norm_star
        rows.append(TraceRow(sweep=sweep, block=block, objective=obj, w_error=float(err)))
    return rows


def emit_convergence_trace(rows: list[TraceRow], path) -> None:
    if not rows:
        raise ValueError(f"empty trace; refusing to write {path}")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sweep", "block", "objective", "w_error"])
        for r in rows:
            writer.writerow([r.sweep, r.block, repr(r.objective), repr(r.w_error)])


def load_config(path, **overrides) -> ExperimentConfig:
    """Read a YAML experiment config (see README for the schema)."""
    with open(path) as fh:
        raw = yaml.safe_load(fh) or {}
    profile = overrides.pop("profile", None) or raw.pop("profile", None)
    sc_raw = dict(raw.pop("scenario", {}))
    if "gain_range_db" in sc_raw:
        sc_raw["gain_range_db"] = tuple(sc_raw["gain_range_db"])
    if profile:
        scenario = profile_scenario(profile, **sc_raw)
    else:
        M, C = sc_raw.pop("M"), sc_raw.pop("C")
        if "cluster_sizes" in sc_raw:
            scenario = model.Scenario(M=M, C=C,
                                      cluster_sizes=tuple(sc_raw.pop("cluster_sizes")),
                                      **sc_raw)
        else:
            scenario = model.Scenario.uniform(M, C, **sc_raw)
    params = dict(
        scenario=scenario,
        es_n0_db=tuple(raw.pop("es_n0_db", (10.0,))),
        iot_db=tuple(raw.pop("iot_db", (10.0,))),
        algorithms=tuple(raw.pop("algorithms", ("zf", "mmse_sampleR", "bdac", "bcd:4"))),
        trials=raw.pop("trials", 10),
        symbols_per_trial=raw.pop("symbols_per_trial", 250),
        seed=raw.pop("seed", 1),
        out_dir=raw.pop("out_dir", "out"),
        schedule_variant=raw.pop("schedule_variant", "gauss_seidel_loop"),
    )
    if raw:
        raise ValueError(f"unknown config keys: {sorted(raw)}")
    params.update(overrides)
    return ExperimentConfig(**params)
