"""Command-line entry points: run, trace, traffic."""
from __future__ import annotations

import argparse
import os

from . import daisy, harness, model
from .interconnect import Topology, TrafficLedger, predicted_traffic


def _add_run(sub):
    p = sub.add_parser("run", help="Monte Carlo BER sweep; writes results.csv")
    p.add_argument("--config", help="YAML experiment config")
    p.add_argument("--profile", choices=sorted(harness.PROFILES),
                   help="scenario profile used when no config scenario is given")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory (overrides config out_dir)")
    p.add_argument("--algorithms", help="comma list, e.g. zf,mmse_sampleR,bdac,bcd:4")
    p.add_argument("--sweeps", type=int, help="replace bcd sweep counts with this L")
    p.add_argument("--trials", type=int)
    p.add_argument("--symbols", type=int)


def _add_trace(sub):
    p = sub.add_parser("trace", help="per-block convergence trace; writes trace.csv")
    p.add_argument("--config", help="YAML experiment config")
    p.add_argument("--profile", choices=sorted(harness.PROFILES), default="desk")
    p.add_argument("--sweeps", type=int, default=50)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--out", default=".")


def _add_traffic(sub):
    p = sub.add_parser("traffic", help="predicted vs metered interconnect traffic")
    p.add_argument("--K", type=int, required=True)
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--L", type=int, required=True)
    p.add_argument("--C", type=int, default=4)
    p.add_argument("--M", type=int, default=None, help="antennas (default 4*C)")
    p.add_argument("--out", default=".")


def _resolve_config(args) -> harness.ExperimentConfig:
    overrides = {}
    for key, attr in [("seed", "seed"), ("trials", "trials"),
                      ("symbols_per_trial", "symbols"), ("out_dir", "out")]:
        val = getattr(args, attr, None)
        if val is not None:
            overrides[key] = val
    if getattr(args, "algorithms", None):
        overrides["algorithms"] = tuple(args.algorithms.split(","))
    if args.config:
        config = harness.load_config(args.config, profile=args.profile, **overrides)
    else:
        scenario = harness.profile_scenario(args.profile or "desk")
        config = harness.ExperimentConfig(
            scenario=scenario,
            es_n0_db=(0.0, 4.0, 8.0, 12.0, 16.0),
            iot_db=(10.0,),
            algorithms=overrides.pop("algorithms",
                                     ("zf", "mmse_exactR", "mmse_sampleR", "bdac",
                                      "bcd:1", "bcd:4")),
            **overrides)
    if getattr(args, "sweeps", None):
        algs = tuple(f"bcd:{args.sweeps}" if a.startswith("bcd") else a
                     for a in config.algorithms)
        config = harness.ExperimentConfig(**{**config.__dict__, "algorithms": algs})
    return config


def cmd_run(args) -> int:
    config = _resolve_config(args)
    rows = harness.run_experiment(config)
    os.makedirs(config.out_dir, exist_ok=True)
    path = os.path.join(config.out_dir, "results.csv")
    harness.emit_csv(rows, path)
    print(f"wrote {len(rows)} rows to {path}")
    for r in rows:
        print(f"  {r.algorithm:>12s} L={r.L} Es/N0={r.es_n0_db:5.1f} dB "
              f"IoT={r.iot_db:4.1f} dB  BER={r.ber:.3e}  SER={r.ser:.3e}")
    return 0


def cmd_trace(args) -> int:
    if args.config:
        config = harness.load_config(args.config)
        scenario, variant = config.scenario, config.schedule_variant
    else:
        scenario, variant = harness.profile_scenario(args.profile), "gauss_seidel_loop"
    rows = harness.convergence_trace(scenario, L=args.sweeps, variant=variant,
                                     seed=args.seed)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "trace.csv")
    harness.emit_convergence_trace(rows, path)
    last = rows[-1]
    print(f"wrote {len(rows)} block updates to {path}; "
          f"final objective {last.objective:.6e}, ||W - W*||_F/||W*||_F = {last.w_error:.3e}")
    return 0


def cmd_traffic(args) -> int:
    M = args.M if args.M is not None else 4 * args.C
    scenario = model.Scenario.uniform(M, args.C, K=args.K, K_int=args.K,
                                      N=args.N, iot_db=10.0)
    rng = harness.trial_rngs(0, 0, 0)
    channels = model.build_channel(scenario, rng[0])
    pool = model.draw_noise_pool(channels, scenario, rng[1])
    dbus = daisy.make_chain(channels, pool, scenario.E_s)
    result = daisy.run_bcd(dbus, daisy.Schedule(L=args.L))
    predicted = predicted_traffic(args.K, args.N, args.L)
    ledger = result.ledger
    print(f"predicted per-link entries (loop chain): {predicted}")
    for link in ledger.topology.links:
        print(f"  link {link[0]}-{link[1]}: metered {ledger.per_link(link)} "
              f"(preprocessing {ledger.per_link(link, 'preprocess')}, "
              f"sweeps {ledger.per_link(link, 'sweep')})")
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "traffic.csv")
    ledger.write_csv(path)
    print(f"wrote {path}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="chainmmse",
        description="Decentralized chain MMSE equalization simulator")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_run(sub)
    _add_trace(sub)
    _add_traffic(sub)
    args = parser.parse_args(argv)
    return {"run": cmd_run, "trace": cmd_trace, "traffic": cmd_traffic}[args.command](args)


if __name__ == "__main__":
    raise SystemExit(main())
