"""Command-line front end: synthesize, design-estimator, freqresp, simulate.

Exit codes: 0 success, 2 validation failure, 3 infeasible, 4 numerical
failure, 5 certified-bound violation detected in simulation.
"""

import argparse
import sys

import numpy as np

from . import artifacts, config, sim
from .errors import (ArtifactError, ConfigError, DesignInfeasibleError,
                     InvalidModelError, RecoveryError, SimulationDivergedError,
                     SynthesisInfeasibleError, VerificationError)
from .estimator import design_bz
from .synthesis import SynthesisOptions, synthesize

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_INFEASIBLE = 3
EXIT_NUMERICAL = 4
EXIT_BOUND_VIOLATION = 5


def _fail(code, message):
    print(f"error: {message}", file=sys.stderr)
    return code


def cmd_synthesize(args):
    cfg = config.load_config(args.config)
    opts = cfg.synthesis_options
    if args.tol is not None:
        opts = SynthesisOptions(margin=opts.margin, tol=args.tol, solver=opts.solver)
    try:
        bp = synthesize(cfg.plant, cfg.safety, grid=cfg.grid, options=opts)
    except SynthesisInfeasibleError as exc:
        print("synthesis infeasible; per-grid-point statuses:", file=sys.stderr)
        for mu_w, mu_vec, status in exc.statuses:
            print(f"  mu_w={mu_w:<10.4g} mu={tuple(round(m, 6) for m in mu_vec)}: {status}",
                  file=sys.stderr)
        return EXIT_INFEASIBLE
    artifacts.save_barrier_pair(bp, cfg.plant, args.out)
    from .synthesis import verify_barrier_pair
    report = verify_barrier_pair(cfg.plant, cfg.safety, bp)
    print(f"barrier pair written to {args.out}")
    print(f"logdet(Y) = {bp.logdet_Y:.6f}")
    print(f"multipliers: mu_w = {bp.mu_w:.6g}, mu = {tuple(round(float(m), 6) for m in bp.mu_vec)}")
    for name, margin in report.margins.items():
        print(f"certificate {name}: margin {margin:.3e}")
    return EXIT_OK


def cmd_design_estimator(args):
    cfg = config.load_config(args.config)
    bp = artifacts.load_barrier_pair(args.barrier_pair, cfg.plant)
    try:
        design = design_bz(bp.X, cfg.plant.w_bar, mu_grid=cfg.mu_e_grid,
                           margin=cfg.estimator_margin,
                           tol=args.tol if args.tol is not None else cfg.synthesis_options.tol,
                           solver=cfg.synthesis_options.solver)
    except DesignInfeasibleError as exc:
        print("estimator design infeasible; per-grid-point statuses:", file=sys.stderr)
        for mu_e, status in exc.statuses:
            print(f"  mu_e={mu_e:<10.4g}: {status}", file=sys.stderr)
        return EXIT_INFEASIBLE
    artifacts.save_estimator(design, cfg.plant, args.out)
    print(f"estimator design written to {args.out}")
    print(f"r_e = {design.r_e:.6g}")
    print(f"mu_e = {design.mu_e:.6g}")
    return EXIT_OK


def cmd_freqresp(args):
    plant = None
    if args.config:
        plant = config.load_config(args.config).plant
    bp = artifacts.load_barrier_pair(args.barrier_pair, plant)
    design = artifacts.load_estimator(args.estimator, plant)
    f_lo, f_hi = args.range
    if not 0 < f_lo < f_hi:
        raise ConfigError(f"need 0 < f_lo < f_hi, got ({f_lo}, {f_hi})")
    freqs = np.logspace(np.log10(f_lo), np.log10(f_hi),
                        max(2, int(round(200 * (np.log10(f_hi) - np.log10(f_lo)))) + 1))
    mags = sim.freq_response_Ge(bp.X, design, freqs)
    f_e, _ = sim.worst_sine(bp.X, design, w_bar=0.0, f_lo=f_lo, f_hi=f_hi)
    peak = sim.freq_response_Ge(bp.X, design, [f_e])[0]
    with open(args.out, "w") as fh:
        fh.write("f_hz,magnitude\n")
        for f, m in zip(freqs, mags):
            fh.write(f"{f!r},{m!r}\n")
    print(f"frequency response written to {args.out}")
    print(f"peak magnitude = {peak:.6g}")
    print(f"f_e = {f_e:.6g} Hz")
    return EXIT_OK


def cmd_simulate(args):
    cfg = config.load_config(args.config)
    bp = artifacts.load_barrier_pair(args.barrier_pair, cfg.plant)
    design = artifacts.load_estimator(args.estimator, cfg.plant)

    if args.batch:
        return _simulate_batch(args, cfg, bp, design)

    scenario = cfg.scenario(args.scenario, bp, design)
    trace = sim.run(scenario)
    trace.to_csv(args.out)
    stats = sim.summarize(trace, cfg.safety)
    bound_bad = stats["bound_violations"] or trace.e_norm.max() > design.r_e + 1e-12
    print(f"trace written to {args.out}")
    print(f"violations = {stats['violations']}")
    print(f"engagements = {stats['engagements']}, releases = {stats['releases']}")
    print(f"max B = {stats['max_B']:.6g}")
    print(f"max B - B_bar = {stats['max_B_minus_B_bar']:.6g}")
    print(f"max |e|_X = {stats['max_e_norm']:.6g} (certified {design.r_e:.6g})")
    if bound_bad:
        print("certified-bound violation detected", file=sys.stderr)
        return EXIT_BOUND_VIOLATION
    return EXIT_OK


def _simulate_batch(args, cfg, bp, design):
    base = cfg.scenarios.get(args.scenario)
    if base is None:
        raise ConfigError(f"no scenario named {args.scenario!r}")
    rng = np.random.default_rng(args.seed)
    n_p = cfg.plant.n_p
    w_bar = cfg.plant.w_bar
    rows = []
    worst_grid = None
    any_bound_violation = False
    for run_idx in range(args.batch):
        delta = rng.uniform(-1.0, 1.0, size=n_p)
        kind = ("sinusoid", "square", "piecewise_constant")[int(rng.integers(3))]
        if kind == "piecewise_constant":
            dist = sim.DisturbanceSpec(kind=kind, amplitude=w_bar,
                                       hold=float(rng.uniform(0.5, 3.0)),
                                       seed=int(rng.integers(2**31)))
        else:
            if worst_grid is None:
                worst_grid, _ = sim.worst_sine(bp.X, design, w_bar)
            freq = float(rng.uniform(0.2, 5.0)) * worst_grid
            dist = sim.DisturbanceSpec(kind=kind, amplitude=w_bar, frequency=freq,
                                       phase=float(rng.uniform(0, 2 * np.pi)))
        scenario = cfg.scenario(args.scenario, bp, design, delta_true=delta,
                                disturbance=dist)
        trace = sim.run(scenario)
        stats = sim.summarize(trace, cfg.safety)
        bad = stats["bound_violations"] or trace.e_norm.max() > design.r_e + 1e-12
        any_bound_violation = any_bound_violation or bad
        rows.append((run_idx, kind, stats))
    with open(args.out, "w") as fh:
        fh.write("run,kind,violations,engagements,releases,max_B,max_B_minus_B_bar,"
                 "max_e_norm,bound_violations\n")
        for run_idx, kind, stats in rows:
            fh.write(f"{run_idx},{kind},{stats['violations']},{stats['engagements']},"
                     f"{stats['releases']},{stats['max_B']!r},"
                     f"{stats['max_B_minus_B_bar']!r},{stats['max_e_norm']!r},"
                     f"{stats['bound_violations']}\n")
    total_bound = sum(s["bound_violations"] for _, _, s in rows)
    print(f"batch summary written to {args.out}")
    print(f"runs = {len(rows)}, bound violations = {total_bound}")
    if any_bound_violation:
        print("certified-bound violation detected", file=sys.stderr)
        return EXIT_BOUND_VIOLATION
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="barrierpairs",
        description="Barrier-pair synthesis, certified estimation, and supervised simulation")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synthesize", help="synthesize a verified barrier pair")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--tol", type=float, default=None)
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("design-estimator", help="design the certified estimator gain")
    p.add_argument("--config", required=True)
    p.add_argument("--barrier-pair", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--tol", type=float, default=None)
    p.set_defaults(func=cmd_design_estimator)

    p = sub.add_parser("freqresp", help="error-channel frequency response and peak")
    p.add_argument("--config", default=None)
    p.add_argument("--barrier-pair", required=True)
    p.add_argument("--estimator", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--range", nargs=2, type=float, default=(1e-3, 1e2),
                   metavar=("F_LO", "F_HI"))
    p.set_defaults(func=cmd_freqresp)

    p = sub.add_parser("simulate", help="run a closed-loop scenario (or a batch)")
    p.add_argument("--config", required=True)
    p.add_argument("--barrier-pair", required=True)
    p.add_argument("--estimator", required=True)
    p.add_argument("--scenario", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--batch", type=int, default=0, metavar="N")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_simulate)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, InvalidModelError, ArtifactError) as exc:
        return _fail(EXIT_VALIDATION, str(exc))
    except (SynthesisInfeasibleError, DesignInfeasibleError) as exc:
        return _fail(EXIT_INFEASIBLE, str(exc))
    except (RecoveryError, VerificationError, SimulationDivergedError,
            np.linalg.LinAlgError) as exc:
        return _fail(EXIT_NUMERICAL, str(exc))


if __name__ == "__main__":
    sys.exit(main())
