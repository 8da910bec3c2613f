"""Command-line interface.

Exit codes for ``selftest``: 0 Pass, 1 Fail, 2 NoDecision, 3 usage/config error.
"""

import argparse
import csv
import io
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import config as cfgmod
from . import figures, rejection, selftest, signalchain, testengine

EXIT_USAGE = 3

SELFTEST_HEADER = ("sequence_id", "order", "cov", "cor", "decision", "k_bound")
SWEEP_HEADER = ("f_hz", "sp_exact", "sp_exact_db", "sp_fft", "sp_fft_db")
MC_TRIAL_HEADER = ("trial", "f_hz", "phase_rad", "rel_cov_error", "cor", "decision")
MC_SUMMARY_HEADER = ("metric", "value")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def fmt(value):
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return f"{v:.10g}"
    return str(value)


def write_csv(header, rows, path=None, stream=None):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        (stream or sys.stdout).write(text)
    return text


def read_csv(path):
    """Rows of an emitted CSV as dicts, numeric fields converted to float."""
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.DictReader(fh))
    out = []
    for row in rows:
        conv = {}
        for k, v in row.items():
            try:
                conv[k] = float(v)
            except ValueError:
                conv[k] = v
        out.append(conv)
    return out


def _load_config(args):
    cfg = cfgmod.load(args.config) if args.config else cfgmod.default()
    for item in args.override or []:
        cfg = cfgmod.apply_override(cfg, item)
    if args.seed is not None:
        cfg["run"]["seed"] = args.seed
    return cfg


def _out_path(args, name):
    if args.out is None:
        return None
    os.makedirs(args.out, exist_ok=True)
    return os.path.join(args.out, name)


def cmd_selftest(args):
    cfg = _load_config(args)
    run = cfg["run"]
    base_order = int(run.get("base_order", cfg["code"]["order"]))
    rows = selftest.run_session(
        lambda order: cfgmod.build_scenario(cfg, order),
        n_tests=int(run["sequences"]),
        base_order=base_order,
        max_order=int(run["max_order"]),
        adaptive=bool(run["adaptive"]),
        cov_tolerance=float(run["cov_tolerance"]),
        cor_threshold=float(run["cor_threshold"]),
        average=bool(run["average"]),
    )
    table = [(r.sequence_id, r.order, r.verdict.cov, r.verdict.cor, r.verdict.decision.value,
              r.verdict.k_bound) for r in rows]
    write_csv(SELFTEST_HEADER, table, _out_path(args, "selftest.csv"))
    return rows[-1].verdict.decision.exit_code


def cmd_figure(args):
    if args.name not in figures.FIGURES:
        raise UsageError(f"unknown figure {args.name!r}; choose from {sorted(figures.FIGURES)}")
    out_dir = args.out or "."
    os.makedirs(out_dir, exist_ok=True)
    for filename, (header, rows) in figures.FIGURES[args.name]().items():
        path = os.path.join(out_dir, filename)
        write_csv(header, rows, path)
        print(path)
    return 0


def cmd_sweep(args):
    cfg = _load_config(args)
    code = cfgmod.build_code(cfg)
    rate = float(cfg["chain"].get("output_rate", rejection.TEST_RATE))
    if args.grid == "dft":
        freqs = rejection.dft_grid(code, rate)
    else:
        freqs = rejection.fine_grid(code, args.step)
    curve = rejection.sweep(code, freqs, rate)
    rows = zip(curve.freqs, curve.sp_exact, curve.sp_exact_db, curve.sp_fft, curve.sp_fft_db)
    write_csv(SWEEP_HEADER, rows, _out_path(args, "sweep.csv"))
    return 0


def _mc_trial(job):
    scenario, ref, sp_worst, f_p, phase, amplitude = job
    pert = (signalchain.Sine(amplitude, f_p, phase),) if amplitude > 0 else ()
    out = signalchain.run_chain(scenario.replace(perturbation=pert))
    d, c = out.sequence(0)
    verdict = testengine.evaluate(d, c, ref, sp_worst)
    return (verdict.cov - ref.cov_ref) / ref.cov_ref, verdict.cor, verdict.decision.value


def montecarlo(cfg, trials, jobs=1):
    """Random perturbation frequency/phase draws; returns (trial rows, summary rows)."""
    if trials < 1:
        raise UsageError("trials must be >= 1")
    scenario = cfgmod.build_scenario(cfg)
    amplitude = sum(p.amplitude for p in scenario.perturbation)
    band = float(cfg["run"].get("perturbation_band", scenario.config.chip_rate))
    ref = selftest.calibrate(scenario, float(cfg["run"]["cov_tolerance"]),
                             float(cfg["run"]["cor_threshold"]))
    sp_worst = selftest.sp_worst_for(scenario)
    rng = np.random.default_rng(int(cfg["run"]["seed"]))
    f_t = scenario.config.carrier_freq
    freqs = rng.uniform(f_t - band, f_t + band, trials)
    phases = rng.uniform(0.0, 2 * np.pi, trials)
    base = scenario.replace(perturbation=())
    work = [(base, ref, sp_worst, float(f), float(p), amplitude) for f, p in zip(freqs, phases)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_mc_trial, work))
    else:
        results = [_mc_trial(w) for w in work]
    trial_rows = [(i, f, p, e, c, d) for i, (f, p, (e, c, d)) in
                  enumerate(zip(freqs, phases, results))]
    err = np.abs([r[0] for r in results])
    decisions = [r[2] for r in results]
    k = amplitude / scenario.config.stimulus_amplitude
    summary = [
        ("trials", trials),
        ("k", k),
        ("sp_worst", sp_worst),
        ("bound_k_sp", k * sp_worst),
        ("max_rel_cov_error", float(err.max())),
        ("p50_rel_cov_error", float(np.percentile(err, 50))),
        ("p95_rel_cov_error", float(np.percentile(err, 95))),
        ("p99_rel_cov_error", float(np.percentile(err, 99))),
        ("pass_rate", decisions.count("Pass") / trials),
        ("fail_rate", decisions.count("Fail") / trials),
        ("nodecision_rate", decisions.count("NoDecision") / trials),
    ]
    return trial_rows, summary


def cmd_montecarlo(args):
    cfg = _load_config(args)
    trial_rows, summary = montecarlo(cfg, args.trials, args.jobs)
    if args.out is not None:
        write_csv(MC_TRIAL_HEADER, trial_rows, _out_path(args, "montecarlo_trials.csv"))
    write_csv(MC_SUMMARY_HEADER, summary, _out_path(args, "montecarlo_summary.csv"))
    return 0


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="TOML scenario file")
    common.add_argument("--seed", type=int, help="override run.seed")
    common.add_argument("--out", metavar="DIR", help="directory for CSV output (default: stdout)")
    common.add_argument("--override", action="append", metavar="KEY=VALUE",
                        help="override a config entry, e.g. sensor.fault.K=1.25 (repeatable)")

    parser = _Parser(prog="encbist", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("selftest", parents=[common], help="run the online test on a scenario")
    p.set_defaults(func=cmd_selftest)

    p = sub.add_parser("figure", parents=[common], help="emit reproduction figure data")
    p.add_argument("name", help="fig2, fig4, fig5, fig6 or fig7")
    p.set_defaults(func=cmd_figure)

    p = sub.add_parser("montecarlo", parents=[common], help="random perturbation sweep")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_montecarlo)

    p = sub.add_parser("sweep", parents=[common], help="SP versus down-shifted frequency")
    p.add_argument("--grid", choices=("dft", "fine"), default="dft")
    p.add_argument("--step", type=float, default=0.1, help="fine-grid step in Hz")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (cfgmod.ConfigError, UsageError) as exc:
        print(f"encbist: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"encbist: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
