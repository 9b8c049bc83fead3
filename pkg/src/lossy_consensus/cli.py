"""Command-line front end.

Exit codes: 0 success, 2 usage error, 3 infeasible target, 4 numerical failure.
Outputs without an explicit path go to ``$LOSSY_CONSENSUS_OUT`` (default: the
working directory).
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from . import io
from .config import ExperimentConfig, load_config
from .ggp import OPTIMAL, optimize, sweep_total_cost
from .graph import GraphError, generate_rgg_torus, max_degree_weights, metropolis_weights
from .heuristic import average_ggp_rates, build_trellis, default_budget, evaluate, exhaustive_search, search
from .rd_models import RdModel
from .simulator import SimConfig, rd_curve, run
from .state_evolution import (
    DistortionSchedule,
    InfeasibleError,
    error_trajectory,
    lossless_mse,
    signal_plus_noise_cov,
    variance_trajectory,
)

log = logging.getLogger("lossy_consensus")

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_NUMERICAL = 0, 2, 3, 4
OUT_ENV = "LOSSY_CONSENSUS_OUT"
MODELS = ("gauss-vq", "ecsq", "dithered-uniform")


class UsageError(Exception):
    pass


class NumericalError(Exception):
    pass


def out_path(arg, default_name: str) -> Path:
    if arg:
        return Path(arg)
    return Path(os.environ.get(OUT_ENV, ".")) / default_name


def int_range(text: str) -> list[int]:
    """``"1..8"`` or ``"2,3,5"`` to a list of ints."""
    try:
        if ".." in text:
            lo, hi = text.split("..")
            vals = list(range(int(lo), int(hi) + 1))
        else:
            vals = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad integer range {text!r}") from None
    if not vals or min(vals) < 0:
        raise argparse.ArgumentTypeError(f"empty or negative range {text!r}")
    return vals


def float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad number list {text!r}") from None


# argument groups -----------------------------------------------------------


def _graph_args(p, seed_flag="--graph-seed"):
    g = p.add_argument_group("graph")
    g.add_argument("--graph", dest="graph_file", help="topology JSON written by the graph command")
    g.add_argument("--m", type=int, default=20)
    g.add_argument("--rho", type=float, default=0.35)
    g.add_argument(seed_flag, dest="graph_seed", type=int, default=0)
    g.add_argument("--weights", choices=("max-degree", "metropolis"), default="max-degree")


def _init_args(p):
    g = p.add_argument_group("initial state")
    g.add_argument("--sigma-x2", type=float, default=1.0)
    g.add_argument("--sigma-n2", type=float, default=0.5)


def _model_args(p):
    g = p.add_argument_group("rate model")
    g.add_argument("--model", choices=MODELS, default="gauss-vq")
    g.add_argument("--rc", type=float, help="rate offset R_c (ECSQ)")
    g.add_argument("--dmax", type=float, help="distortion cap multiplier D_max")
    g.add_argument("--delta", type=float, help="span of the fixed-rate quantizer in standard deviations")


def _target_args(p):
    g = p.add_argument_group("target")
    g.add_argument("--T", type=int, default=5)
    t = g.add_mutually_exclusive_group()
    t.add_argument("--mse-target", type=float)
    t.add_argument("--emse-db", type=float, help="target as excess MSE over lossless at T, in dB")


def _common(p):
    p.add_argument("--config", help="experiment config JSON; its values override flags")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lossy-consensus", description="Rate-optimized quantized consensus")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("graph", help="generate a random geometric graph on the unit torus")
    _graph_args(p, seed_flag="--seed")
    _common(p)

    p = sub.add_parser("analyze", help="MSE and variance trajectories from state evolution")
    _graph_args(p)
    _init_args(p)
    p.add_argument("--T", type=int, default=5)
    p.add_argument("--schedule", help="allocation JSON; lossless when omitted")
    _common(p)

    p = sub.add_parser("optimize", help="solve for the minimum aggregate rate schedule")
    _graph_args(p)
    _init_args(p)
    _model_args(p)
    _target_args(p)
    p.add_argument("--constant-distortion", action="store_true")
    p.add_argument("--k1", type=float, default=1.0)
    p.add_argument("--k2", type=float, default=0.0)
    p.add_argument("--sweep-T", type=int_range, help="horizons to sweep, e.g. 1..8")
    _common(p)

    p = sub.add_parser("heuristic", help="integer fixed-rate schedule via trellis search")
    _graph_args(p)
    _init_args(p)
    _target_args(p)
    p.add_argument("--delta", type=float)
    p.add_argument("--exhaustive", action="store_true", help="also run the exhaustive oracle")
    p.add_argument("--budget", type=int, help="per-node budget for the exhaustive oracle")
    _common(p)

    p = sub.add_parser("simulate", help="Monte Carlo run of a schedule")
    _graph_args(p)
    _init_args(p)
    p.add_argument("--T", type=int)
    p.add_argument("--schedule", help="allocation or integer schedule JSON")
    p.add_argument("--scheme", choices=("lossless", "dithered-uniform", "ecsq"))
    p.add_argument("--undithered", action="store_true", help="ECSQ without dither")
    p.add_argument("--L", type=int, default=10_000)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trial-csv", help="also write per-trial network MSE")
    _common(p)

    p = sub.add_parser("rdcurve", help="rate versus EMSE curves")
    _init_args(p)
    p.add_argument("--m", type=int, default=20)
    p.add_argument("--rho", type=float, default=0.35)
    p.add_argument("--topology-seeds", type=int_range, default=[0])
    p.add_argument("--T", type=int, default=5)
    p.add_argument("--emse-grid", type=float_list, default=[0.5, 1.0, 2.0, 3.0])
    p.add_argument("--schemes", default="ecsq,dithered-uniform,fixed-rate")
    p.add_argument("--constant-distortion", action="store_true", default=True)
    p.add_argument("--no-simulate", action="store_true")
    p.add_argument("--L", type=int, default=10_000)
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    _common(p)
    return ap


def apply_config(args, cfg: ExperimentConfig) -> None:
    """Copy config values over the parsed flags they correspond to."""
    pairs = {
        "m": cfg.graph.m,
        "rho": cfg.graph.rho_c,
        "graph_seed": cfg.graph.seed,
        "graph_file": cfg.graph.file,
        "model": cfg.model.name,
        "rc": cfg.model.rc,
        "dmax": cfg.model.dmax,
        "delta": cfg.model.delta,
        "T": cfg.horizon.T,
        "mse_target": cfg.horizon.mse_target,
        "emse_db": cfg.horizon.emse_db,
        "constant_distortion": cfg.horizon.constant_distortion,
        "k1": cfg.horizon.k1,
        "k2": cfg.horizon.k2,
        "sweep_T": cfg.horizon.sweep_T,
        "L": cfg.simulation.L,
        "trials": cfg.simulation.trials,
        "sigma_x2": cfg.simulation.sigma_x2,
        "sigma_n2": cfg.simulation.sigma_n2,
        "threads": cfg.simulation.threads,
        "seed": cfg.seed,
    }
    fields = cfg.model_fields_set
    for name, value in pairs.items():
        if hasattr(args, name):
            setattr(args, name, value)
    if hasattr(args, "undithered"):
        args.undithered = not cfg.simulation.dithered
    if cfg.output_dir and "output_dir" in fields:
        os.environ[OUT_ENV] = cfg.output_dir


# helpers -------------------------------------------------------------------


def _meta(args, seed=None) -> dict:
    cfg = {k: v for k, v in sorted(vars(args).items()) if k not in ("out", "verbose", "threads", "trial_csv")}
    return io.metadata(seed=seed, config=cfg)


def load_weights(args):
    if args.graph_file:
        path = Path(args.graph_file)
        if not path.exists():
            raise UsageError(f"graph file not found: {path}")
        topo, W = io.topology_from_dict(io.read_json(path))
        if W is None:
            W = max_degree_weights(topo).W
        return topo, W
    if args.m < 1:
        raise UsageError("--m must be at least 1")
    topo = generate_rgg_torus(args.m, args.rho, args.graph_seed, require_connected=True)
    wm = max_degree_weights(topo) if args.weights == "max-degree" else metropolis_weights(topo)
    return topo, wm.W


def _init(args, m):
    if args.sigma_x2 < 0 or args.sigma_n2 < 0 or (args.sigma_x2 == 0 and args.sigma_n2 == 0):
        raise UsageError("variances must be nonnegative and not both zero")
    return np.zeros(m), signal_plus_noise_cov(m, args.sigma_x2, args.sigma_n2)


def _target(args, W, mean0, cov0, T) -> float:
    if args.mse_target is not None:
        return args.mse_target
    if args.emse_db is not None:
        return lossless_mse(W, mean0, cov0, T) * 10 ** (args.emse_db / 10)
    raise UsageError("give --mse-target or --emse-db")


def _model(args) -> RdModel:
    try:
        return RdModel.from_name(args.model, getattr(args, "rc", None), getattr(args, "dmax", None), getattr(args, "delta", None))
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _table(headers, rows) -> str:
    cells = [[str(h) for h in headers]] + [[f"{v:.6g}" if isinstance(v, float) else str(v) for v in r] for r in rows]
    widths = [max(len(r[j]) for r in cells) for j in range(len(headers))]
    return "\n".join("  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in cells)


# commands ------------------------------------------------------------------


def cmd_graph(args) -> int:
    if args.m < 1:
        raise UsageError("--m must be at least 1")
    topo = generate_rgg_torus(args.m, args.rho, args.graph_seed, require_connected=True)
    wm = max_degree_weights(topo) if args.weights == "max-degree" else metropolis_weights(topo)
    path = io.write_json(out_path(args.out, "graph.json"), io.topology_to_dict(topo, wm), _meta(args, args.graph_seed))
    deg = topo.degrees
    print(f"{topo.m} nodes, {len(topo.edges)} edges, degree min/mean/max {deg.min()}/{deg.mean():.2f}/{deg.max()}")
    print(f"wrote {path}")
    return EXIT_OK


def cmd_analyze(args) -> int:
    if args.T < 0:
        raise UsageError("--T must be nonnegative")
    _, W = load_weights(args)
    m = W.shape[0]
    mean0, cov0 = _init(args, m)
    sched = None
    if args.schedule:
        if not Path(args.schedule).exists():
            raise UsageError(f"schedule file not found: {args.schedule}")
        sched, _ = io.load_schedule(args.schedule)
        if not isinstance(sched, DistortionSchedule):
            sched = evaluate(sched, W, mean0, cov0).distortions
            sched = DistortionSchedule.variable(sched)
        if sched.T < args.T:
            raise UsageError(f"schedule covers {sched.T} iterations, --T is {args.T}")
    errs = error_trajectory(W, mean0, cov0, sched, args.T)
    var = variance_trajectory(W, cov0, sched, args.T)
    rows = [
        {
            "t": e.t,
            "network_mse": e.network_mse,
            "lossless_mse": lossless_mse(W, mean0, cov0, e.t),
            "mean_variance": float(var[e.t].mean()),
            "max_node_mse": float(e.node_mse.max()),
        }
        for e in errs
    ]
    path = io.write_csv(out_path(args.out, "analyze.csv"), rows, _meta(args, args.graph_seed))
    print(_table(["t", "network_mse"], [(r["t"], r["network_mse"]) for r in rows]))
    print(f"wrote {path}")
    return EXIT_OK


def _print_allocation(a) -> None:
    rows = [(t, float(a.rates[t].mean()), float(a.rates[t].min()), float(a.rates[t].max()), float(a.predicted_mse[t + 1])) for t in range(a.T)]
    print(_table(["t", "mean_rate", "min_rate", "max_rate", "mse_after"], rows))
    print(f"aggregate rate {a.aggregate_rate:.6g} bits, final MSE {a.final_mse:.6g} (target {a.mse_target:.6g}), status {a.solver_status}")


def cmd_optimize(args) -> int:
    _, W = load_weights(args)
    mean0, cov0 = _init(args, W.shape[0])
    model = _model(args)
    mode = "constant" if args.constant_distortion else "variable"
    if args.sweep_T:
        if args.mse_target is None:
            raise UsageError("--sweep-T needs an absolute --mse-target")
        res = sweep_total_cost(W, mean0, cov0, model, args.mse_target, args.k1, args.k2, args.sweep_T, mode=mode)
        alloc = res.allocation
        print(_table(["T", "feasible", "aggregate_rate", "cost"], [(r["T"], r["feasible"], r["aggregate_rate"], r["cost"]) for r in res.table]))
        payload = io.allocation_to_dict(alloc) | {"sweep": {"chosen_T": res.T, "cost": res.cost, "table": res.table}}
    else:
        if args.T < 1:
            raise UsageError("--T must be at least 1")
        target = _target(args, W, mean0, cov0, args.T)
        alloc = optimize(W, mean0, cov0, args.T, target, model, mode)
        payload = io.allocation_to_dict(alloc)
    _print_allocation(alloc)
    path = io.write_json(out_path(args.out, "allocation.json"), payload, _meta(args, args.graph_seed))
    print(f"wrote {path}")
    if alloc.solver_status != OPTIMAL:
        raise NumericalError(f"solver stopped with status {alloc.solver_status}")
    return EXIT_OK


def cmd_heuristic(args) -> int:
    if args.T < 1:
        raise UsageError("--T must be at least 1")
    _, W = load_weights(args)
    mean0, cov0 = _init(args, W.shape[0])
    model = RdModel.dithered_uniform() if args.delta is None else RdModel.dithered_uniform(args.delta)
    target = _target(args, W, mean0, cov0, args.T)
    alloc = optimize(W, mean0, cov0, args.T, target, model, "constant")
    if alloc.solver_status != OPTIMAL:
        raise NumericalError(f"relaxed solve stopped with status {alloc.solver_status}")
    rggp = average_ggp_rates(alloc)
    cands = build_trellis(rggp)
    best = search(cands, W, mean0, cov0, model, target)
    payload = io.integer_schedule_to_dict(best) | {"r_ggp": rggp, "candidates": len(cands), "mse_target": target}
    if args.exhaustive:
        budget = args.budget if args.budget is not None else default_budget(rggp) + args.T
        ex = exhaustive_search(args.T, budget, W, mean0, cov0, model, target)
        payload["exhaustive"] = ex.to_dict() | {"budget": budget}
    print(_table(["t", "R_ggp", "R"], [(t, float(rggp[t]), int(best.rates[t])) for t in range(best.T)]))
    print(f"aggregate rate {best.aggregate} bits, predicted MSE {best.predicted_mse:.6g} (target {target:.6g}), {len(cands)} candidates")
    if args.exhaustive:
        print(f"exhaustive optimum {payload['exhaustive']['aggregate_rate']} bits")
    path = io.write_json(out_path(args.out, "integer_schedule.json"), payload, _meta(args, args.graph_seed))
    print(f"wrote {path}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    topo, W = load_weights(args)
    m = W.shape[0]
    mean0, cov0 = _init(args, m)
    sched, scheme, model = None, args.scheme, None
    if args.schedule:
        if not Path(args.schedule).exists():
            raise UsageError(f"schedule file not found: {args.schedule}")
        sched, doc = io.load_schedule(args.schedule)
        if isinstance(sched, list):
            sched = evaluate(sched, W, mean0, cov0)
            scheme = scheme or "dithered-uniform"
        else:
            md = doc["model"]
            model = RdModel(md["kind"], md["r_c"], md["d_max"], md.get("delta"))
            scheme = scheme or ("ecsq" if md["kind"] == "ecsq" else "dithered-uniform")
            if md["kind"] == "gaussian-vq" and args.scheme is None:
                log.warning("gaussian-vq allocation simulated with dithered uniform quantizers at the same distortions")
    elif scheme not in (None, "lossless"):
        raise UsageError(f"--scheme {scheme} needs --schedule")
    scheme = scheme or "lossless"
    T = args.T if args.T is not None else (sched.T if sched is not None else 5)
    if sched is not None and sched.T != T:
        raise UsageError(f"schedule horizon {sched.T} does not match --T {T}")
    try:
        cfg = SimConfig(
            T=T, topology=topo, L=args.L, sigma_x2=args.sigma_x2, sigma_n2=args.sigma_n2, trials=args.trials,
            scheme=scheme, seed=args.seed, dithered=not args.undithered, threads=args.threads,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    res = run(cfg, sched, model, W)
    meta = _meta(args, args.seed)
    rows = res.trajectory_rows()
    for r in rows:
        r["aggregate_rate"] = float(res.aggregate_rate.mean())
    path = io.write_csv(out_path(args.out, "simulate.csv"), rows, meta)
    if args.trial_csv:
        io.write_csv(args.trial_csv, res.trial_rows(), meta)
    print(_table(["t", "mse", "stderr", "emse_db"], [(r["t"], r["mse"], r["stderr"], r["emse_db"]) for r in rows]))
    print(f"aggregate rate {res.aggregate_rate.mean():.6g} bits, max mean drift {res.mean_drift.max(initial=0.0):.3g}")
    print(f"wrote {path}")
    return EXIT_OK


def cmd_rdcurve(args) -> int:
    schemes = [s.strip() for s in args.schemes.split(",") if s.strip()]
    for s in schemes:
        if s not in ("ecsq", "dithered-uniform", "fixed-rate"):
            raise UsageError(f"unknown scheme {s!r}")
    if not args.emse_grid:
        raise UsageError("empty --emse-grid")
    base = SimConfig(
        T=args.T, m=args.m, rho_c=args.rho, L=args.L, sigma_x2=args.sigma_x2, sigma_n2=args.sigma_n2,
        trials=args.trials, seed=args.seed, threads=args.threads,
    )
    rows = rd_curve(base, args.emse_grid, schemes, args.topology_seeds, "constant", simulate=not args.no_simulate)
    meta = _meta(args, args.seed)
    outdir = out_path(args.out, "rdcurve")
    for s in schemes:
        sr = [r for r in rows if r["scheme"] == s]
        path = io.write_csv(outdir / f"rdcurve_{s}.csv", sr, meta)
        print(f"wrote {path} ({len(sr)} points)")
    print(_table(["scheme", "emse_db", "R_agg", "emse_sim"], [(r["scheme"], r["emse_target_db"], r["aggregate_rate"], r["emse_simulated_db"]) for r in rows]))
    return EXIT_OK


COMMANDS = {
    "graph": cmd_graph,
    "analyze": cmd_analyze,
    "optimize": cmd_optimize,
    "heuristic": cmd_heuristic,
    "simulate": cmd_simulate,
    "rdcurve": cmd_rdcurve,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # exits with 2 on bad flags
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.config:
            try:
                apply_config(args, load_config(args.config))
            except FileNotFoundError:
                raise UsageError(f"config file not found: {args.config}") from None
            except ValidationError as exc:
                raise UsageError(f"invalid config: {exc}") from None
        if args.threads < 1:
            raise UsageError("--threads must be at least 1")
        return COMMANDS[args.command](args)
    except (UsageError, GraphError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InfeasibleError as exc:
        floor = f" (lossless floor {exc.floor:.6g})" if exc.floor is not None else ""
        print(f"infeasible: {exc}{floor}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (NumericalError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
