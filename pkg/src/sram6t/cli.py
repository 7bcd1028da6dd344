"""Command-line driver: characterize, sweeps, Monte Carlo and calibration.

Exit codes: 0 success, 2 configuration error, 3 solver non-convergence,
4 functional failure (read-unstable or unwriteable cell, failed write or
read in simulation). On 4 the outputs computed so far are still written.
"""
from __future__ import annotations

import argparse
import csv
import math
import os
import sys

import numpy as np

from . import calibration, dc, transient
from .cell import BiasCondition, relative_area
from .config import ConfigError, RunConfig, build_cell, load
from .power import CSV_HEADER as LEAK_HEADER, leakage
from .ser import SWEEP_HEADER, ser, ser_sweep
from .variability import McConfig, PelgromModel, monte_carlo

FEMTO = 1e-15
UNITS = {"v_trip": "V", "v_read": "V", "wlvm": "V", "srrv": "V", "srrv_assist": "V",
         "rsnm": "V", "hold_snm": "V", "wnm": "V", "i_s1": "A", "i_s2": "A", "i_s3": "A",
         "supply_leakage": "A", "read_delay": "s", "write_delay": "s"}


class FunctionalFailure(Exception):
    pass


def fmt(x):
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.9g}"
    return str(x)


def write_csv(path, header, rows, comment=None):
    with open(path, "w", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(v) for v in r])


# --- subcommands -------------------------------------------------------------

CHAR_HEADER = ["cr", "pr", "rsnm_V", "hold_snm_V", "wnm_V", "wlvm_V", "srrv_V", "v_trip_V",
               "v_read_V", "i_s1_A", "i_s2_A", "i_s3_A", "supply_A", "bitline_A",
               "qcrit_e_fC", "qcrit_h_fC", "ser", "read_delay_s", "write_delay_s",
               "write_energy_J", "qcrit_sim_fC"]


def _timing(cfg, d):
    """Read/write delay, write energy and simulated Q_crit; None where failed."""
    step = cfg.analysis.max_step_s
    out, failed = {}, []
    for key, f in (("read_delay_s", lambda: transient.read_delay(d, max_step=step)),
                   ("write_delay_s", lambda: transient.write_delay(d, max_step=step)),
                   ("write_energy_J", lambda: transient.write_energy(d, max_step=step)),
                   ("qcrit_sim_fC", lambda: transient.critical_charge(d, max_step=step) / FEMTO)):
        try:
            out[key] = f()
        except (transient.ReadTimeout, transient.WriteFailure, transient.BracketError) as e:
            out[key] = None
            failed.append(f"{key}: {e}")
    return out, failed


def cmd_characterize(cfg: RunConfig, args):
    d = build_cell(cfg)
    rep = dc.characterize(d)
    lk = leakage(d)
    s = ser(d, cfg.ser)
    timing, failed = _timing(cfg, d) if cfg.analysis.transient else ({}, [])
    row = [cfg.cell.cr, cfg.cell.pr, rep.rsnm, rep.hold_snm, rep.wnm, rep.wlvm, rep.srrv,
           rep.v_trip, rep.v_read, lk.i_s1, lk.i_s2, lk.i_s3, lk.supply_total,
           lk.bitline_total, s.q_crit_e, s.q_crit_h, s.ser]
    row += [timing.get(k) for k in CHAR_HEADER[len(row):]]
    write_csv(os.path.join(cfg.output_dir, "characterize.csv"), CHAR_HEADER, [row],
              "single-cell characterization: stability, leakage, SER and timing")
    if rep.read_unstable:
        failed.append("cell is read-unstable (RSNM = 0)")
    if rep.write_failure:
        failed.append("cell is not writeable (WNM or WLVM = 0)")
    if failed:
        raise FunctionalFailure("; ".join(failed))


def cmd_sweep_cr(cfg: RunConfig, args):
    out = cfg.output_dir
    grid = cfg.analysis.sweep_cr
    designs = [build_cell(cfg, cr) for cr in grid]
    failed = []
    write_csv(os.path.join(out, "area.csv"), ["cr", "relative_area"],
              [(cr, relative_area(d)) for cr, d in zip(grid, designs)],
              "figure: relative cell area vs CR (PR = 1)")
    margins, rsnm_rows, leak_rows = [], [], []
    for cr, d in zip(grid, designs):
        r = dc.rsnm(d)
        margins.append((cr, dc.wnm(d), dc.wlvm(d)))
        rsnm_rows.append((cr, r, dc.hold_snm(d), dc.v_read(d), dc.trip_point(d)))
        leak_rows.append(leakage(d).csv_row(cr, cfg.cell.pr))
        if r <= 0:
            failed.append(f"CR={cr:g} read-unstable")
    write_csv(os.path.join(out, "write_margins.csv"), ["cr", "wnm_V", "wlvm_V"], margins,
              "figure: WNM and WLVM vs CR")
    write_csv(os.path.join(out, "rsnm.csv"),
              ["cr", "rsnm_V", "hold_snm_V", "v_read_V", "v_trip_V"], rsnm_rows,
              "figure: RSNM vs CR")
    write_csv(os.path.join(out, "ser.csv"), SWEEP_HEADER.split(","),
              ser_sweep(grid, cfg.ser, cfg.cell.pr, cfg.cell.wmin_um, cfg.technology),
              "figure: SER and critical charge vs CR, alpha particles")
    write_csv(os.path.join(out, "leakage.csv"), LEAK_HEADER, leak_rows,
              "figure: leakage vs CR")
    if cfg.analysis.transient:
        trows, erows, qrows = [], [], []
        for cr, d in zip(grid, designs):
            tm, f = _timing(cfg, d)
            failed += [f"CR={cr:g} {m}" for m in f]
            trows.append((cr, tm["read_delay_s"], tm["write_delay_s"]))
            erows.append((cr, tm["write_energy_J"]))
            qrows.append((cr, tm["qcrit_sim_fC"]))
        write_csv(os.path.join(out, "timing.csv"), ["cr", "read_delay_s", "write_delay_s"],
                  trows, "figure: intrinsic read and write delay vs CR")
        write_csv(os.path.join(out, "energy.csv"), ["cr", "write_energy_J"], erows,
                  "figure: write energy vs CR")
        write_csv(os.path.join(out, "qcrit_sim.csv"), ["cr", "qcrit_sim_fC"], qrows,
                  "figure: simulated critical charge vs CR")
    if failed:
        raise FunctionalFailure("; ".join(failed))


def vwl_grid(cfg: RunConfig):
    s = cfg.analysis.sweep_vwl
    stop = cfg.technology.vdd if s.stop is None else s.stop
    n = int(math.floor((stop - s.start) / s.step + 1e-9))
    return [s.start + i * s.step for i in range(n + 1)]


def assist_level(vwl, rsnm, target):
    """Highest word-line level whose RSNM still reaches ``target`` (linear interpolation)."""
    vwl, rsnm = np.asarray(vwl), np.asarray(rsnm)
    ok = np.flatnonzero(rsnm >= target)
    if ok.size == 0:
        return None
    i = ok[-1]
    if i + 1 >= len(vwl):
        return float(vwl[i])
    r0, r1 = rsnm[i], rsnm[i + 1]
    return float(vwl[i] + (target - r0) * (vwl[i + 1] - vwl[i]) / (r1 - r0))


def cmd_sweep_vwl(cfg: RunConfig, args):
    d = build_cell(cfg)
    vdd = cfg.technology.vdd
    levels = vwl_grid(cfg)
    rs = [dc.rsnm(d, BiasCondition.read(vdd, v)) for v in levels]
    write_csv(os.path.join(cfg.output_dir, "rsnm_vs_vwl.csv"), ["vwl_V", "rsnm_V"],
              zip(levels, rs), f"figure: RSNM vs word-line level, CR = {cfg.cell.cr:g}")
    ref_cr = cfg.analysis.sweep_vwl.reference_cr
    ref = dc.rsnm(build_cell(cfg, ref_cr))
    lvl = assist_level(levels, rs, ref)
    write_csv(os.path.join(cfg.output_dir, "read_assist.csv"),
              ["reference_cr", "reference_rsnm_V", "equivalent_vwl_V", "equivalent_vwl_fraction"],
              [(ref_cr, ref, lvl, None if lvl is None else lvl / vdd)],
              "word-line level at which this cell matches the reference cell's RSNM")


def cmd_montecarlo(cfg: RunConfig, args):
    mc = cfg.analysis.montecarlo
    seed = args.seed if args.seed is not None else cfg.analysis.seed
    if seed is None:
        raise ConfigError("analysis.seed", "montecarlo needs a seed (config or --seed)")
    trials = args.trials if args.trials is not None else mc.trials
    d = build_cell(cfg, mc.cr)
    model = PelgromModel(cfg.technology.a_vt)
    vdd = cfg.technology.vdd
    rows = []
    for metric in mc.metrics:
        dist = monte_carlo(d, model, McConfig(trials, seed, metric, args.threads, mc.chunk, mc.bins))
        unit = UNITS[metric]
        write_csv(os.path.join(cfg.output_dir, f"mc_{metric}.csv"),
                  [f"bin_low_{unit}", f"bin_high_{unit}", "count"],
                  zip(dist.edges[:-1], dist.edges[1:], dist.counts),
                  f"figure: Monte Carlo histogram of {metric}")
        ok = dist.n > 1 and dist.std > 0
        shifted = None
        if metric.startswith("srrv") and ok:
            # supply lowered by 10%: rigid shift of the retention margin
            shifted = dist.fail_prob(0.1 * vdd)
        rows.append((metric, dist.mean, dist.std, dist.n, dist.censored,
                     dist.fail_prob() if ok else None, shifted, dist.unreliable))
    write_csv(os.path.join(cfg.output_dir, "mc_summary.csv"),
              ["metric", "mean", "std", "n", "censored", "fail_prob",
               "fail_prob_vcell_minus_10pct", "unreliable"], rows,
              f"Monte Carlo summary, {trials} trials, seed {seed}")


def cmd_calibrate(cfg: RunConfig, args):
    trials = args.trials if args.trials is not None else 10_000
    seed = args.seed if args.seed is not None else (cfg.analysis.seed or 1)
    tech = calibration.calibrate(cfg.technology, trials=trials, seed=seed,
                                 log=lambda s: print(s, file=sys.stderr))
    calibration.write_defaults(tech, os.path.join(cfg.output_dir, "defaults.json"))
    m = calibration.dc_metrics(tech)
    write_csv(os.path.join(cfg.output_dir, "calibration.csv"), ["metric", "value"],
              sorted(m.items()), "calibration anchors reached by the written defaults")


COMMANDS = {
    "characterize": cmd_characterize,
    "sweep-cr": cmd_sweep_cr,
    "sweep-vwl": cmd_sweep_vwl,
    "montecarlo": cmd_montecarlo,
    "calibrate": cmd_calibrate,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON run configuration")
    common.add_argument("--out", metavar="DIR", help="output directory (overrides config)")
    common.add_argument("--seed", type=int, metavar="N", help="Monte Carlo seed (overrides config)")
    common.add_argument("--trials", type=int, metavar="N", help="Monte Carlo trial count")
    common.add_argument("--threads", type=int, default=1, metavar="N", help="worker threads")
    p = argparse.ArgumentParser(prog="sram6t", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.threads < 1:
            raise ConfigError("--threads", "must be >= 1")
        if args.trials is not None and args.trials < 1:
            raise ConfigError("--trials", "must be >= 1")
        if args.seed is not None and not 0 <= args.seed < 2**64:
            raise ConfigError("--seed", "must fit in 64 bits")
        cfg = load(args.config) if args.config else RunConfig.default()
        if args.out:
            from dataclasses import replace
            cfg = replace(cfg, output_dir=args.out)
        os.makedirs(cfg.output_dir, exist_ok=True)
        COMMANDS[args.command](cfg, args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except FunctionalFailure as e:
        print(f"functional failure: {e}", file=sys.stderr)
        return 4
    except (transient.ReadTimeout, transient.WriteFailure) as e:
        print(f"functional failure: {e}", file=sys.stderr)
        return 4
    except (dc.SolverError, transient.SimulationError) as e:
        print(f"solver error: {e}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
