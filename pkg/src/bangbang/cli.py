"""
Command-line entry point.

Subcommands: ofpqs, optimize, simulate, pps, bench. Every run writes its
artifacts plus a manifest.json into the output directory (``--out``, or
$BANGBANG_OUT, or ./bangbang-out).
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .bench import CSV_COLUMNS, DEFAULT_DUTIES, DEFAULT_SIZES, run_benchmark
from .channels import FidelityReport, bb_evolve_with_twirls, robust_unitary_fidelity, state_fidelity
from .fileio import (
    FormatError,
    load_ga_config,
    load_matrix,
    load_sequence,
    load_system,
    save_matrix,
    save_sequence,
    write_columns,
    write_csv,
    write_json,
)
from .gaopt import GAConfig, UnitaryObjective, encode, run_ga
from .ofpqs import OFPQSConfig, holds_fixed_point_band, iterates_unitary, phase_schedule, success_curve
from .propagator import build_cache
from .spinsys import SpinSystem, demo_two_spin
from .statprep import EquilibriumSpec, basis_labels, equilibrium_deviation, pps_target, prepare_pps

log = logging.getLogger("bangbang")

OUT_ENV = "BANGBANG_OUT"


class CLIError(Exception):
    pass


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _float_list(text: str) -> list[float]:
    try:
        return [float(t) for t in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _resolve_seed(flag: int | None, fallback: int | None = None) -> int:
    if flag is not None:
        return flag
    if fallback is not None:
        return fallback
    return int(np.random.SeedSequence().entropy % (2**31))


def _out_dir(args) -> Path:
    out = Path(args.out or os.environ.get(OUT_ENV) or "bangbang-out")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _system(args, allow_demo: bool = False) -> tuple[SpinSystem, str]:
    if args.system:
        return load_system(args.system), str(args.system)
    if allow_demo:
        return demo_two_spin(), "<demo 2-spin>"
    raise CLIError("--system is required")


def _manifest(out: Path, subcommand: str, config: dict, seed, artifacts: list[Path],
              t0: float, results: dict | None = None) -> None:
    for path in artifacts:
        if not path.exists() or path.stat().st_size == 0:
            raise CLIError(f"artifact {path} was not written")
    write_json(out / "manifest.json", {
        "subcommand": subcommand,
        "version": __version__,
        "seed": seed,
        "config": config,
        "artifacts": [p.name for p in artifacts],
        "results": results or {},
        "wall_time_s": time.perf_counter() - t0,
    })


def _labels(system: SpinSystem) -> list[str]:
    return [sp.label for sp in system.species]


def _ga_config(args, **overrides) -> tuple[GAConfig, int]:
    cfg = load_ga_config(args.ga_config) if args.ga_config else GAConfig()
    seed = _resolve_seed(args.seed, cfg.seed)
    data = {**cfg.to_dict(), **overrides, "seed": seed}
    return GAConfig.from_dict(data), seed


def _check_resume(args, system: SpinSystem, cfg: GAConfig):
    if not getattr(args, "resume", None):
        return None
    seq, labels = load_sequence(args.resume)
    if seq.n_species != system.n_species:
        raise CLIError(f"{args.resume}: sequence has {seq.n_species} species, system has {system.n_species}")
    if seq.n_segments != cfg.n_segments:
        raise CLIError(f"{args.resume}: sequence has {seq.n_segments} segments, config asks for {cfg.n_segments}")
    return [encode(seq, cfg.n_twirls)]


# --- subcommands --------------------------------------------------------------------------

def cmd_ofpqs(args) -> int:
    t0 = time.perf_counter()
    out = _out_dir(args)
    if not 0 < args.delta2 <= 1:
        raise CLIError("--delta2 must lie in (0, 1]")
    delta = float(np.sqrt(args.delta2))
    try:
        OFPQSConfig(args.n_sys, args.marked, 0, delta)
    except ValueError as exc:
        raise CLIError(f"invalid marked set: {exc}") from None
    ls = list(range(1, args.l_max + 1))
    curve = success_curve(args.n_sys, args.marked, delta, ls)
    bound = 1.0 - args.delta2

    curve_csv = out / "ofpqs_curve.csv"
    write_csv(curve_csv, ("l", "L", "P_L"), curve)
    sched_rows = []
    for l in ls:
        s = phase_schedule(l, delta)
        sched_rows += [(l, j + 1, s.gamma, s.alpha[j], s.beta[j]) for j in range(l)]
    sched_csv = out / "phase_schedules.csv"
    write_csv(sched_csv, ("l", "j", "gamma", "alpha_rad", "beta_rad"), sched_rows)
    plot_dat = out / "ofpqs_curve.dat"
    write_columns(plot_dat, ([r[0] for r in curve], [r[2] for r in curve]), "l P_L")
    artifacts = [curve_csv, sched_csv, plot_dat]
    if not args.no_plots:
        from .plotting import plot_success_curve

        marked = ",".join(format(m, f"0{args.n_sys}b") for m in sorted(args.marked))
        artifacts.append(plot_success_curve(curve, bound, out / "ofpqs_curve.png",
                                            f"marked {{{marked}}}"))
    ok = all(p >= bound - 1e-9 for _, _, p in curve)
    _manifest(out, "ofpqs", {"n_sys": args.n_sys, "marked": sorted(args.marked),
                             "delta2": args.delta2, "l_max": args.l_max},
              None, artifacts, t0,
              {"min_P_L": min(p for _, _, p in curve), "all_above_bound": ok,
               "fixed_point_band": holds_fixed_point_band(curve, bound),
               "queries": [2 * l for l in ls]})
    for l, big_l, p in curve:
        print(f"l={l:3d} L={big_l:3d} P_L={p:.6f}")
    return 0


def _target_unitary(args, system: SpinSystem) -> tuple[np.ndarray, dict]:
    if args.target_unitary:
        u = load_matrix(args.target_unitary)
        info = {"kind": "unitary", "file": str(args.target_unitary)}
    else:
        if not args.marked:
            raise CLIError("--target-ofpqs needs --marked")
        n_sys = system.n_spins - 1
        delta = float(np.sqrt(args.delta2))
        try:
            OFPQSConfig(n_sys, args.marked, args.l, delta)
        except ValueError as exc:
            raise CLIError(f"invalid OFPQS target: {exc}") from None
        u = iterates_unitary(n_sys, args.marked, args.l, delta)
        info = {"kind": "ofpqs", "marked": sorted(args.marked), "l": args.l, "delta2": args.delta2}
    if u.shape != (system.dim, system.dim):
        raise CLIError(f"target is {u.shape[0]}x{u.shape[1]} but the system dimension is {system.dim}")
    return u, info


def cmd_optimize(args) -> int:
    t0 = time.perf_counter()
    out = _out_dir(args)
    system, system_src = _system(args)
    if args.target_pps is not None:
        return _run_pps(args, system, system_src, out, t0, "optimize")
    target, info = _target_unitary(args, system)
    cfg, seed = _ga_config(args, n_twirls=0)
    initial = _check_resume(args, system, cfg)
    result = run_ga(UnitaryObjective(system, target, cfg), cfg, initial)

    seq_path = out / "best_sequence.bbseq"
    save_sequence(result.sequence, seq_path, _labels(system))
    trace_csv = out / "fitness_trace.csv"
    write_csv(trace_csv, ("generation", "best_fitness"), enumerate(result.trace))
    target_path = out / "target_unitary.txt"
    save_matrix(target, target_path)
    artifacts = [seq_path, trace_csv, target_path]
    if not args.no_plots:
        from .plotting import plot_trace

        artifacts.append(plot_trace(result.trace, out / "fitness_trace.png"))
    _manifest(out, "optimize", {"system": system_src, "target": info, "ga": cfg.to_dict()},
              seed, artifacts, t0,
              {"best_fitness": result.best_fitness, "generations": len(result.trace) - 1,
               "evaluations": result.evaluations, "duty_cycle": result.sequence.duty_cycle})
    print(f"best mean F_u = {result.best_fitness:.6f} after {len(result.trace) - 1} generations")
    return 0


def _equilibrium(args, system: SpinSystem) -> EquilibriumSpec:
    if getattr(args, "purity", None):
        if len(args.purity) != system.n_spins:
            raise CLIError(f"--purity needs {system.n_spins} values")
        return EquilibriumSpec(tuple(args.purity))
    return EquilibriumSpec.from_species(system)


def _run_pps(args, system, system_src, out, t0, subcommand) -> int:
    index = args.target_pps if subcommand == "optimize" else args.index
    if not 0 <= index < system.dim:
        raise CLIError(f"PPS index {index} out of range for {system.n_spins} spins")
    cfg, seed = _ga_config(args)
    if cfg.n_twirls < 1:
        cfg = GAConfig.from_dict({**cfg.to_dict(), "n_twirls": 3})
    spec = _equilibrium(args, system)
    initial = _check_resume(args, system, cfg)
    res = prepare_pps(system, spec, index, cfg, initial)

    seq_path = out / "best_sequence.bbseq"
    save_sequence(res.optimization.sequence, seq_path, _labels(system))
    trace_csv = out / "fitness_trace.csv"
    write_csv(trace_csv, ("generation", "best_fitness"), enumerate(res.optimization.trace))
    labels = basis_labels(system.n_spins)
    bars_csv = out / "pps_bars.csv"
    write_csv(bars_csv, ("basis", "theoretical", "achieved"),
              zip(labels, res.target_diagonal, res.achieved_diagonal))
    artifacts = [seq_path, trace_csv, bars_csv]
    if not args.no_plots:
        from .plotting import plot_pps_bars, plot_trace

        artifacts.append(plot_pps_bars(labels, res.target_diagonal, res.achieved_diagonal,
                                       out / "pps_bars.png"))
        artifacts.append(plot_trace(res.optimization.trace, out / "fitness_trace.png"))
    _manifest(out, subcommand,
              {"system": system_src, "target": {"kind": "pps", "index": index},
               "purity": list(spec.purity), "ga": cfg.to_dict()},
              seed, artifacts, t0,
              {"best_fitness": res.optimization.best_fitness,
               "per_scale_fidelity": list(res.report.fidelities),
               "generations": len(res.optimization.trace) - 1,
               "twirls": list(res.optimization.sequence.twirls)})
    print(f"best mean F_s = {res.optimization.best_fitness:.6f}")
    return 0


def cmd_pps(args) -> int:
    t0 = time.perf_counter()
    out = _out_dir(args)
    system, system_src = _system(args, allow_demo=True)
    return _run_pps(args, system, system_src, out, t0, "pps")


def cmd_simulate(args) -> int:
    t0 = time.perf_counter()
    out = _out_dir(args)
    system, system_src = _system(args)
    seq, _ = load_sequence(args.sequence)
    if seq.n_species != system.n_species:
        raise CLIError(f"{args.sequence}: sequence has {seq.n_species} species, system has {system.n_species}")
    if args.scales:
        scales = tuple(args.scales)
    elif args.ga_config:
        scales = load_ga_config(args.ga_config).rf_scales
    else:
        scales = GAConfig().rf_scales

    artifacts = []
    if args.target_pps is not None:
        if not 0 <= args.target_pps < system.dim:
            raise CLIError(f"PPS index {args.target_pps} out of range")
        rho_in = equilibrium_deviation(system, _equilibrium(args, system))
        target = pps_target(system.n_spins, args.target_pps)
        fids, nominal = [], None
        for s in scales:
            rho = bb_evolve_with_twirls(build_cache(system.with_rf_scale(s), seq.dt), seq, rho_in)
            fids.append(state_fidelity(target, rho))
            if nominal is None or s == 1.0:
                nominal = rho
        report = FidelityReport(scales, tuple(fids))
        state_path = out / "output_state.txt"
        save_matrix(nominal, state_path)
        artifacts.append(state_path)
        target_info = {"kind": "pps", "index": args.target_pps}
        measure = "F_s"
    else:
        if seq.twirls:
            raise CLIError("sequence has twirls; a unitary target needs a twirl-free sequence")
        target, target_info = _target_unitary(args, system)
        report = robust_unitary_fidelity(system, seq, target, scales)
        measure = "F_u"
    report_csv = out / "fidelity_report.csv"
    write_csv(report_csv, ("rf_scale", measure), zip(report.scales, report.fidelities))
    artifacts.append(report_csv)
    _manifest(out, "simulate", {"system": system_src, "sequence": str(args.sequence),
                                "target": target_info, "rf_scales": list(scales)},
              None, artifacts, t0, {"mean_fidelity": report.mean, "measure": measure})
    print(f"mean {measure} = {report.mean:.9f}")
    return 0


def cmd_bench(args) -> int:
    t0 = time.perf_counter()
    out = _out_dir(args)
    seed = _resolve_seed(args.seed, 0)

    def progress(pt):
        print(f"n={pt.n_spins} duty={pt.duty:.2f} tau_sm={pt.tau_sm:.4g}s "
              f"tau_bb={pt.tau_bb:.4g}s ratio={pt.ratio:.2f}", flush=True)

    points = run_benchmark(args.sizes, args.duties, args.segments, args.dt, args.repeats, seed, progress)
    bench_csv = out / "bench.csv"
    write_csv(bench_csv, CSV_COLUMNS, (p.row() for p in points))
    artifacts = [bench_csv]
    for n in sorted({p.n_spins for p in points}):
        pts = sorted((p for p in points if p.n_spins == n), key=lambda p: p.duty)
        dat = out / f"bench_ratio_n{n}.dat"
        write_columns(dat, ([p.duty for p in pts], [p.ratio for p in pts]), "duty ratio")
        artifacts.append(dat)
    if not args.no_plots:
        from .plotting import plot_bench

        artifacts.append(plot_bench(points, out / "bench_ratio.png"))
    _manifest(out, "bench", {"sizes": args.sizes, "duties": args.duties, "K": args.segments,
                             "dt": args.dt, "repeats": args.repeats}, seed, artifacts, t0)
    return 0


# --- parser -------------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bangbang", description=__doc__.strip().splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log GA progress every 50 generations")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, system=True):
        p.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./bangbang-out)")
        p.add_argument("--seed", type=int, help="random seed; drawn and recorded when absent")
        p.add_argument("--no-plots", action="store_true", help="skip PNG figures")
        if system:
            p.add_argument("--system", help="spin-system JSON file")

    p = sub.add_parser("ofpqs", help="fixed-point search success curve")
    common(p, system=False)
    p.add_argument("--n-sys", type=int, default=2)
    p.add_argument("--marked", type=_int_list, required=True, help="marked basis indices, e.g. 2,3")
    p.add_argument("--delta2", type=float, default=0.2)
    p.add_argument("--l-max", type=int, default=10)
    p.set_defaults(func=cmd_ofpqs)

    def unitary_target(p):
        g = p.add_mutually_exclusive_group(required=True)
        g.add_argument("--target-unitary", help="matrix file (re,im pairs)")
        g.add_argument("--target-ofpqs", action="store_true",
                       help="search block G_l...G_1 on (system spins - 1) qubits + ancilla")
        g.add_argument("--target-pps", type=int, metavar="INDEX", help="pseudopure basis index")
        p.add_argument("--marked", type=_int_list)
        p.add_argument("--l", type=int, default=1)
        p.add_argument("--delta2", type=float, default=0.2)
        p.add_argument("--purity", type=_float_list, help="purity factors per spin (PPS targets)")

    p = sub.add_parser("optimize", help="GA synthesis of a BB sequence")
    common(p)
    unitary_target(p)
    p.add_argument("--ga-config", help="GA config JSON")
    p.add_argument("--resume", help="sequence file to seed the population with")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("simulate", help="evaluate a stored sequence against a target")
    common(p)
    unitary_target(p)
    p.add_argument("--sequence", required=True)
    p.add_argument("--ga-config", help="take the RF scale grid from this GA config")
    p.add_argument("--scales", type=_float_list, help="RF scale grid, e.g. 0.9,1,1.1")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("pps", help="pseudopure-state preparation")
    common(p)
    p.add_argument("--index", type=int, default=0)
    p.add_argument("--ga-config")
    p.add_argument("--purity", type=_float_list)
    p.add_argument("--resume")
    p.set_defaults(func=cmd_pps)

    p = sub.add_parser("bench", help="BB versus SM propagator timing")
    common(p, system=False)
    p.add_argument("--sizes", type=_int_list, default=list(DEFAULT_SIZES))
    p.add_argument("--duties", type=_float_list, default=list(DEFAULT_DUTIES))
    p.add_argument("--segments", type=int, default=100)
    p.add_argument("--dt", type=float, default=5e-6)
    p.add_argument("--repeats", type=int, default=5)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    if args.verbose:
        log.setLevel(logging.DEBUG)
    try:
        return args.func(args)
    except (CLIError, FormatError, FileNotFoundError) as exc:
        print(f"bangbang {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
