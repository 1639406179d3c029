"""Command-line interface.

Subcommands: ``extract``, ``estimate``, ``simulate``, ``trend``, ``ppv``.
Exit codes: 0 ok, 1 usage, 2 data error, 3 numerical failure. Outputs are
written all-or-nothing, each with a ``<output>.manifest.json`` run record.
"""

import argparse
import datetime as dt
import os
import sys
from collections import Counter, defaultdict

from . import __version__, formats
from .em import EMConfig, bootstrap_sd, run_em
from .errors import DataError, DomainError, NumericalFailure
from .model import Censored, Exact, MixtureParams, ObservationSet, Rounded, rounding_bins
from .numerics import BACKEND
from .parser import LESS, EQUALS, Excluded, PValueRecord, classify, ingest_corpus, read_jsonl
from .simulate import CENSOR_MODES, SimConfig, TheoreticalInputs, simulate_observations, theoretical_swfdr
from .trend import MIN_STRATUM_SIZE, estimate_by_stratum, fit_mixed_model

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 0, 1, 2, 3
SEED_ENV = "PVALMIX_SEED"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _default_seed():
    value = os.environ.get(SEED_ENV, "0")
    try:
        return int(value)
    except ValueError:
        return 0


def _nonneg_int(text):
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {v}")
    return v


def _read(path):
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def _timestamp():
    # SOURCE_DATE_EPOCH pins the manifest time for reproducible builds
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    when = (dt.datetime.fromtimestamp(int(epoch), dt.timezone.utc) if epoch
            else dt.datetime.now(dt.timezone.utc))
    return when.strftime("%Y-%m-%dT%H:%M:%SZ")


def _manifest(args, inputs, outputs, **overrides):
    return formats.json_text({
        "schema_version": formats.SCHEMA_VERSION,
        "kind": "manifest",
        "subcommand": args.command,
        "inputs": inputs,
        "outputs": outputs,
        "seed": getattr(args, "seed", None),
        "config": overrides,
        "tool_version": __version__,
        "kernel_backend": BACKEND,
        "timestamp": _timestamp(),
    })


def _em_config(args):
    return EMConfig(max_iters=args.max_iters, loglik_tol=args.loglik_tol)


def _observations(pairs):
    return [obs for _, obs in pairs if not isinstance(obs, Excluded)]


def cmd_extract(args):
    counts = Counter()
    with open(args.input, encoding="utf-8") as fh:
        pairs, report = ingest_corpus(read_jsonl(fh, counts), args.alpha, counts)
    diag_path = args.diagnostics or f"{args.out}.diagnostics.json"
    report = {"schema_version": formats.SCHEMA_VERSION, "kind": "extract-diagnostics", **report}
    with formats.atomic_outputs() as out:
        out.write(args.out, formats.records_csv(rec for rec, _ in pairs))
        out.write(diag_path, formats.json_text(report))
        out.write(f"{args.out}.manifest.json",
                  _manifest(args, [args.input], [args.out, diag_path], alpha=args.alpha))
    return EXIT_OK


def _classified(path, alpha):
    records = formats.read_records(_read(path))
    return [(rec, classify(rec, alpha)) for rec in records]


def _stratum_key(rec, by):
    return (rec.journal if "journal" in by else None, rec.year if "year" in by else None)


def _parse_by(text):
    if not text:
        return ()
    parts = tuple(p.strip() for p in text.split(",") if p.strip())
    bad = [p for p in parts if p not in ("journal", "year")]
    if bad:
        raise argparse.ArgumentTypeError(f"--by accepts journal and/or year, got {', '.join(bad)}")
    return parts


def _stratum_json(e):
    return {"journal": e.journal, "year": e.year, "pi0_hat": e.pi0_hat, "sd": e.sd,
            "n_obs": e.n_obs, "converged": e.converged}


def cmd_estimate(args):
    config = _em_config(args)
    pairs = _classified(args.input, args.alpha)
    observations = _observations(pairs)
    data = ObservationSet.from_observations(observations, args.alpha)
    fit = run_em(data, config)
    boot = None
    if args.bootstrap:
        boot = bootstrap_sd(data, args.bootstrap, args.seed, config, n_jobs=args.jobs, point=fit)

    kinds = Counter(type(o).__name__.lower() for o in observations)
    excluded = Counter(o.reason for _, o in pairs if isinstance(o, Excluded))
    result = {
        "schema_version": formats.SCHEMA_VERSION,
        "kind": "estimate",
        "pi0": fit.params.pi0,
        "sd": boot.sd if boot else None,
        "n_records": len(pairs),
        "n_observations": data.n,
        "observations": {k: kinds.get(k, 0) for k in ("exact", "censored", "rounded")},
        "excluded": {k: excluded[k] for k in sorted(excluded)},
        "em": {
            "a": fit.params.shape.a,
            "b": fit.params.shape.b,
            "alpha": fit.params.alpha,
            "loglik": fit.loglik,
            "iterations": fit.iterations,
            "converged": fit.converged,
            "unidentifiable": fit.unidentifiable,
            "alt_uniform_tv": fit.alt_uniform_tv,
        },
        "bootstrap": ({"B": boot.B, "seed": boot.seed, "skipped": boot.skipped}
                      if boot else None),
        "strata": None,
        "skipped_strata": None,
    }

    estimates = None
    if args.by:
        groups = defaultdict(list)
        for rec, obs in pairs:
            if not isinstance(obs, Excluded):
                groups[_stratum_key(rec, args.by)].append(obs)
        estimates, skipped = estimate_by_stratum(
            groups, config, args.min_stratum, args.bootstrap, args.seed, args.jobs)
        result["strata"] = [_stratum_json(e) for e in estimates]
        result["skipped_strata"] = [{"journal": k[0], "year": k[1], "reason": why}
                                    for k, why in skipped]

    outputs = [args.out]
    with formats.atomic_outputs() as out:
        out.write(args.out, formats.json_text(result))
        if args.emit_hist:
            out.write(args.emit_hist, formats.csv_text(
                "histogram", formats.HIST_FIELDS, formats.histogram_rows(pairs, args.alpha)))
            outputs.append(args.emit_hist)
        if args.strata_out:
            if estimates is None:
                raise DataError("--strata-out needs --by")
            out.write(args.strata_out, formats.strata_csv(estimates))
            outputs.append(args.strata_out)
        out.write(f"{args.out}.manifest.json", _manifest(
            args, [args.input], outputs, bootstrap=args.bootstrap, by=list(args.by),
            min_stratum=args.min_stratum, alpha=args.alpha, max_iters=args.max_iters,
            loglik_tol=args.loglik_tol, jobs=args.jobs))
    return EXIT_OK


def simulated_records(observations, journal="simulated", year=2000, alpha=0.05):
    """Records that classify back to exactly ``observations``."""
    bins = rounding_bins(alpha)
    for i, obs in enumerate(observations):
        if isinstance(obs, Exact):
            comparison, value, span = EQUALS, obs.p, f"P={obs.p!r}"
        elif isinstance(obs, Rounded):
            value = bins.values[obs.bin]
            comparison, span = EQUALS, f"P={value:.2f}"
        else:
            comparison, value, span = LESS, obs.bound, f"P<{obs.bound!r}"
        yield PValueRecord(f"sim-{i}", journal, year, comparison, value, span)


def cmd_simulate(args):
    params = MixtureParams.make(args.pi0, args.a, args.b)
    config = SimConfig(args.n, params, args.censor_frac, args.round_frac, args.seed, args.censor_mode)
    observations, is_null, _ = simulate_observations(config)
    records = simulated_records(observations, args.journal, args.year, params.alpha)
    with formats.atomic_outputs() as out:
        out.write(args.out, formats.records_csv(records))
        out.write(f"{args.out}.manifest.json", _manifest(
            args, [], [args.out], n=args.n, pi0=args.pi0, a=args.a, b=args.b,
            censor_frac=args.censor_frac, round_frac=args.round_frac,
            censor_mode=args.censor_mode, journal=args.journal, year=args.year,
            null_count=int(is_null.sum())))
    return EXIT_OK


def cmd_trend(args):
    text = _read(args.input)
    if formats.csv_kind(text) == "strata":
        estimates = formats.read_strata(text)
        skipped = []
    else:
        records = formats.read_records(text)
        groups = defaultdict(list)
        for rec in records:
            obs = classify(rec, args.alpha)
            if not isinstance(obs, Excluded):
                groups[(rec.journal, rec.year)].append(obs)
        estimates, skipped = estimate_by_stratum(
            groups, _em_config(args), args.min_stratum, args.bootstrap, args.seed, args.jobs)

    submissions = None
    inputs = [args.input]
    if args.predictor == "submissions":
        if not args.submissions:
            raise DataError("--predictor submissions needs --submissions TABLE.csv")
        submissions = formats.read_submissions(_read(args.submissions))
        inputs.append(args.submissions)
    fit = fit_mixed_model(estimates, args.predictor, submissions)

    result = {"schema_version": formats.SCHEMA_VERSION, "kind": "trend",
              **{k: getattr(fit, k) for k in (
                  "predictor", "intercept", "slope", "slope_se", "slope_pvalue",
                  "var_random", "var_resid", "lam", "reml", "n_obs", "n_groups")},
              "skipped_strata": [{"journal": k[0], "year": k[1], "reason": why}
                                 for k, why in skipped]}
    plot_path = args.plot_out or f"{args.out}.plot.csv"
    rows = []
    for e in estimates:
        x = float(e.year) if args.predictor == "year" else submissions[(e.journal, e.year)]
        rows.append((e.journal, e.year, x, e.pi0_hat, e.sd, e.n_obs, fit.intercept + fit.slope * x))
    with formats.atomic_outputs() as out:
        out.write(args.out, formats.json_text(result))
        out.write(plot_path, formats.csv_text(
            "trend-plot", ["journal", "year", "x", "pi0_hat", "sd", "n_obs", "fitted"], rows))
        out.write(f"{args.out}.manifest.json", _manifest(
            args, inputs, [args.out, plot_path], predictor=args.predictor,
            min_stratum=args.min_stratum, bootstrap=args.bootstrap, alpha=args.alpha))
    return EXIT_OK


def cmd_ppv(args):
    swfdr = theoretical_swfdr(TheoreticalInputs(args.prior, args.alpha, args.power))
    text = formats.json_text({
        "schema_version": formats.SCHEMA_VERSION, "kind": "ppv",
        "prior": args.prior, "alpha": args.alpha, "power": args.power, "swfdr": swfdr,
    })
    if args.out:
        with formats.atomic_outputs() as out:
            out.write(args.out, text)
            out.write(f"{args.out}.manifest.json", _manifest(
                args, [], [args.out], prior=args.prior, alpha=args.alpha, power=args.power))
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _add_em_flags(p):
    p.add_argument("--alpha", type=float, default=0.05, help="significance threshold (default 0.05)")
    p.add_argument("--max-iters", type=int, default=10000)
    p.add_argument("--loglik-tol", type=float, default=1e-8)
    p.add_argument("--bootstrap", type=_nonneg_int, default=0, metavar="B",
                   help="bootstrap resamples for the s.d. of pi0 (0 = none)")
    p.add_argument("--seed", type=_nonneg_int, default=_default_seed(),
                   help=f"random seed (default ${SEED_ENV} or 0)")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for bootstrap refits")
    p.add_argument("--min-stratum", type=int, default=MIN_STRATUM_SIZE)


def build_parser():
    parser = _Parser(prog="pvalmix", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("extract", help="pull P-value reports out of a JSON-lines corpus")
    p.add_argument("input", help="JSON lines with id, journal, year, text")
    p.add_argument("-o", "--out", required=True, help="records CSV")
    p.add_argument("--diagnostics", help="diagnostics JSON (default <out>.diagnostics.json)")
    p.add_argument("--alpha", type=float, default=0.05)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("estimate", help="fit pi0 to a records CSV")
    p.add_argument("input", help="records CSV (from extract or simulate)")
    p.add_argument("-o", "--out", required=True, help="result JSON")
    p.add_argument("--by", type=_parse_by, default=(), help="stratify by journal,year")
    p.add_argument("--strata-out", help="CSV of per-stratum estimates (needs --by)")
    p.add_argument("--emit-hist", metavar="PATH", help="histogram CSV of reported values")
    _add_em_flags(p)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("simulate", help="write a simulated records CSV")
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--pi0", type=float, required=True)
    p.add_argument("--a", type=float, default=0.5)
    p.add_argument("--b", type=float, default=25.0)
    p.add_argument("--censor-frac", type=float, default=0.0)
    p.add_argument("--round-frac", type=float, default=0.0)
    p.add_argument("--censor-mode", choices=CENSOR_MODES, default="threshold")
    p.add_argument("--journal", default="simulated")
    p.add_argument("--year", type=int, default=2000)
    p.add_argument("--seed", type=_nonneg_int, default=_default_seed())
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("trend", help="random-intercept trend of per-stratum pi0")
    p.add_argument("input", help="strata CSV or records CSV")
    p.add_argument("-o", "--out", required=True, help="trend JSON")
    p.add_argument("--plot-out", help="plot-data CSV (default <out>.plot.csv)")
    p.add_argument("--predictor", choices=("year", "submissions"), default="year")
    p.add_argument("--submissions", help="CSV with journal,year,submissions")
    _add_em_flags(p)
    p.set_defaults(func=cmd_trend)

    p = sub.add_parser("ppv", help="theoretical false-positive fraction among significant results")
    p.add_argument("--prior", type=float, required=True, help="probability a tested hypothesis is true")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--power", type=float, default=0.8)
    p.add_argument("-o", "--out", help="JSON output (default stdout)")
    p.set_defaults(func=cmd_ppv)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NumericalFailure as exc:
        print(f"pvalmix: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (DataError, DomainError, OSError) as exc:
        print(f"pvalmix: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"pvalmix: invalid argument: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
