"""Command line front end: ``ewa simulate | sweep-beta | sweep-delta | check-moments | check-mgf``.

Exit status is 0 when every acceptance flag is true, 2 when the run
completed but some flag is false, and 1 on error.
"""

import argparse
import contextlib
import csv
import itertools
import json
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from ewa import __version__
from ewa._validation import DomainError, ValidationError
from ewa.config import ConfigError, config_echo, parse_config, validate
from ewa.harness import exp_moment_check, run_experiment
from ewa.noise import mgf_check, random_unit_directions

TRIAL_COLUMNS = ["trial", "seed", "lhs", "rhs", "holds", "best_t", "nu_star", "gamma",
                 "pen_total", "price_total", "kl_term"]
SWEEP_COLUMNS = ["beta", "delta", "n_trials", "coverage", "target", "coverage_ok",
                 "mean_lhs", "expectation_rhs", "expectation_ok"]
MOMENT_COLUMNS = ["t", "u", "form", "empirical", "stderr", "bound", "ok"]
MGF_COLUMNS = ["direction", "norm", "empirical_mgf", "stderr", "bound", "ok"]


def fmt(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


@contextlib.contextmanager
def _atomic(path):
    """Write to a temp file next to ``path`` and move it into place on success."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            yield fh
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(FileNotFoundError):
            os.unlink(tmp)
        raise


def write_csv(path, columns, rows):
    with _atomic(path) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([fmt(row[c]) for c in columns])


def write_json(path, payload):
    with _atomic(path) as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def _experiment(cfg, jobs, **agg_overrides):
    agg = cfg.aggregation(**agg_overrides)
    map_fn = map
    pool = None
    if jobs > 1:
        pool = ThreadPoolExecutor(jobs)
        map_fn = pool.map
    try:
        return agg, run_experiment(cfg.signal(), cfg.collection(), cfg.noise(), agg,
                                   cfg.trials, cfg.seed, map_fn=map_fn)
    finally:
        if pool is not None:
            pool.shutdown()


def cmd_simulate(cfg, out, args):
    agg, report = _experiment(cfg, args.jobs)
    rows = [
        {"trial": i, "seed": t.seed, "lhs": t.lhs, "rhs": t.rhs, "holds": t.holds,
         "best_t": t.best_t, "nu_star": t.nu_star, "gamma": t.gamma,
         "pen_total": t.pen_total, "price_total": t.price_total, "kl_term": t.best_kl_term}
        for i, t in enumerate(report.trials)
    ]
    write_csv(out / "trials.csv", TRIAL_COLUMNS, rows)
    summary = {
        "coverage": report.empirical_coverage,
        "mean_lhs": report.mean_lhs,
        "expectation_rhs": report.expectation_rhs,
        "n_trials": report.n_trials,
        "n_holds": report.n_holds,
        "target": report.target,
        "stderr_lhs": report.stderr_lhs,
        "gamma": agg.gamma,
        "coverage_ok": report.coverage_ok,
        "expectation_ok": report.expectation_ok,
        "config": config_echo(cfg),
        "version": __version__,
    }
    write_json(out / "summary.json", summary)
    return report.coverage_ok and report.expectation_ok


def _sweep(cfg, out, args, name, make_overrides):
    rows = []
    for value in args.grid:
        over = make_overrides(value)
        agg, report = _experiment(cfg, args.jobs, **over)
        rows.append({"beta": agg.beta, "delta": agg.delta, "n_trials": report.n_trials,
                     "coverage": report.empirical_coverage, "target": report.target,
                     "coverage_ok": report.coverage_ok, "mean_lhs": report.mean_lhs,
                     "expectation_rhs": report.expectation_rhs,
                     "expectation_ok": report.expectation_ok})
    write_csv(out / f"{name}.csv", SWEEP_COLUMNS, rows)
    return all(r["coverage_ok"] and r["expectation_ok"] for r in rows)


def cmd_sweep_beta(cfg, out, args):
    agg = cfg.aggregation()
    unit = agg.sigma_sq * agg.v_bound
    return _sweep(cfg, out, args, "sweep_beta", lambda m: {"beta": m * unit})


def cmd_sweep_delta(cfg, out, args):
    return _sweep(cfg, out, args, "sweep_delta", lambda d: {"delta": d})


def cmd_check_moments(cfg, out, args):
    agg, coll = cfg.aggregation(), cfg.collection()
    pairs = [p for p in itertools.permutations(range(len(coll)), 2)][: cfg.moment_pairs]
    rows = [
        exp_moment_check(t, u, cfg.signal(), coll, cfg.noise(), agg, cfg.moment_samples,
                         (cfg.seed, i), form=args.form, nu=cfg.moment_nu)
        for i, (t, u) in enumerate(pairs)
    ]
    write_csv(out / "moments.csv", MOMENT_COLUMNS, rows)
    return all(r["ok"] for r in rows)


def cmd_check_mgf(cfg, out, args):
    noise = cfg.noise()
    dirs = random_unit_directions(cfg.n, cfg.mgf_directions, (cfg.seed, 1))
    results = mgf_check(noise, cfg.n, dirs, cfg.mgf_samples, (cfg.seed, 2))
    rows = [dict(r, direction=i, norm=1.0) for i, r in enumerate(results)]
    write_csv(out / "mgf.csv", MGF_COLUMNS, rows)
    return all(r["ok"] for r in rows)


COMMANDS = {
    "simulate": cmd_simulate,
    "sweep-beta": cmd_sweep_beta,
    "sweep-delta": cmd_sweep_delta,
    "check-moments": cmd_check_moments,
    "check-mgf": cmd_check_mgf,
}


def _grid(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid grid {text!r}") from None


def build_parser():
    parser = argparse.ArgumentParser(prog="ewa", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, type=Path)
        p.add_argument("--out", type=Path, help="output directory (default: run.out)")
        p.add_argument("--seed", type=int, help="override run.seed")
        if name in ("simulate", "sweep-beta", "sweep-delta"):
            p.add_argument("--trials", type=int, help="override run.trials")
            p.add_argument("--jobs", type=int, default=1, help="concurrent trial workers")
        if name.startswith("sweep"):
            unit = "multiples of sigma^2*V" if name == "sweep-beta" else "delta values"
            p.add_argument("--grid", required=True, type=_grid, help=f"comma separated {unit}")
        if name == "check-moments":
            p.add_argument("--samples", type=int, help="override moments.samples")
            p.add_argument("--form", choices=("gaussian", "general"))
        if name == "check-mgf":
            p.add_argument("--samples", type=int, help="override mgf.samples")
            p.add_argument("--directions", type=int, help="override mgf.directions")
    return parser


def _apply_overrides(cfg, args):
    changes = {}
    for flag, field_name in (("seed", "seed"), ("trials", "trials"), ("directions", "mgf_directions")):
        if getattr(args, flag, None) is not None:
            changes[field_name] = getattr(args, flag)
    if getattr(args, "samples", None) is not None:
        key = "moment_samples" if args.command == "check-moments" else "mgf_samples"
        changes[key] = args.samples
    return validate(cfg.replace(**changes)) if changes else cfg


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        try:
            text = args.config.read_text(encoding="utf-8")
        except OSError as exc:
            raise OSError(f"cannot read config {args.config}: {exc.strerror}") from None
        cfg = _apply_overrides(parse_config(text), args)
        out = args.out or Path(cfg.out)
        try:
            out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise OSError(f"cannot create output directory {out}: {exc.strerror}") from None
        ok = COMMANDS[args.command](cfg, out, args)
    except (ConfigError, ValidationError, DomainError, OSError) as exc:
        print(f"ewa {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0 if ok else 2


if __name__ == "__main__":
    sys.exit(main())
