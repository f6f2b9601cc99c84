"""Command-line interface: ``andova {fit,simulate,roc,elicit}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import __version__, _accel
from .evidence import EvidenceError
from .markov_tree import ElicitationError, elicit_beta, elicit_delta, expected_signals, prjap_closed_form
from .model import FitConfig, fit
from .partition import PartitionError, load_dataset
from .plots import effects_svg, pmap_tree_svg
from .report import build_report
from .sampler import sample_states
from .simulation import SCENARIOS, ScenarioSpec, joint_null_methods, run_roc, run_statistics

log = logging.getLogger("andova")

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERIC = 3


def _positive_int(s):
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {s}")
    return v


def _add_model_flags(p):
    g = p.add_argument_group("model")
    g.add_argument("--depth", "-K", dest="K", type=int, default=11, help="maximum depth K (default 11)")
    g.add_argument("--beta", type=float, default=0.07)
    g.add_argument("--delta", type=float, default=0.4)
    g.add_argument("--grid-size", dest="T", type=_positive_int, default=50, help="precision grid points")
    g.add_argument("--nu-min", dest="l", type=float, default=-1.0, help="log10 lower grid bound")
    g.add_argument("--nu-max", dest="u", type=float, default=4.0, help="log10 upper grid bound")
    g.add_argument("--prior0", type=float, nargs=2, default=(0.5, 0.5), metavar=("A", "B"))
    g.add_argument("--prior1", type=float, nargs=2, default=(0.5, 0.5), metavar=("A", "B"))
    g.add_argument("--fdr", type=float, default=0.1, help="target Bayesian FDR (default 0.1)")
    g.add_argument("--threshold", type=float, default=None, help="fixed PMAP threshold instead of FDR")
    g.add_argument("--restrict-nu-infinity", action="store_true", help="use the nu = infinity model")
    g.add_argument("--model", choices=("graphical", "independent"), default="graphical")
    g.add_argument("--inner", choices=("corrected", "beta", "gauss"), default="corrected",
                   help="inner integral approximation (default corrected)")


def _common(p):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=None, help="worker threads (env ANDOVA_THREADS)")
    p.add_argument("-v", "--verbose", action="count", default=0)


def _config(args) -> FitConfig:
    return FitConfig(
        K=args.K, beta=args.beta, delta=args.delta, T=args.T, l=args.l, u=args.u,
        prior0=tuple(args.prior0), prior1=tuple(args.prior1), fdr=args.fdr,
        threshold=args.threshold, restrict_nu_infinity=args.restrict_nu_infinity,
        omega=getattr(args, "omega", None), model=args.model, inner=args.inner,
    )


def _write(text: str, path):
    if path is None or str(path) == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def cmd_fit(args) -> int:
    cfg = _config(args)
    data = load_dataset(args.input)
    res = fit(data, cfg)
    extra = {}
    if args.draws:
        if res.posterior is None:
            raise ValueError("--draws needs the graphical model")
        S = sample_states(res.posterior, args.seed, size=args.draws)
        extra["draws"] = args.draws
        extra["sampled_pmap"] = S.mean(axis=0).tolist()
    echo = {"input": str(args.input), "seed": args.seed, "draws": args.draws, **asdict(cfg)}
    echo["omega"] = [float(res.tree.omega_lo), float(res.tree.omega_hi)]
    report = build_report(res, data.group_labels, echo, extra)
    text = report.to_json() if args.format == "json" else report.to_csv()
    _write(text, args.output)
    if args.svg:
        prefix = Path(args.svg)
        Path(f"{prefix}_pmap.svg").write_text(pmap_tree_svg(report))
        Path(f"{prefix}_effects.svg").write_text(effects_svg(report))
    return EXIT_OK


def _base_spec(args) -> ScenarioSpec:
    return ScenarioSpec(
        args.scenario, k=args.groups, replicates=args.replicates, n=args.n, seed=args.seed
    )


def _jsonl_sink(path):
    if path is None:
        return None, None
    fh = sys.stdout if path == "-" else open(path, "w")

    def emit(rec):
        fh.write(json.dumps(rec) + "\n")
        fh.flush()

    return emit, fh


def cmd_simulate(args) -> int:
    base = _base_spec(args)
    methods = joint_null_methods(_config(args))
    emit, fh = _jsonl_sink(args.output or "-")
    try:
        if args.data_dir:
            _dump_datasets(args, base)
        run_statistics(args.scenario, args.runs, methods, base, args.seed, emit)
    finally:
        if fh is not sys.stdout:
            fh.close()
    return EXIT_OK


def _dump_datasets(args, base):
    from .simulation import generate

    out = Path(args.data_dir)
    out.mkdir(parents=True, exist_ok=True)
    tag = sorted(SCENARIOS).index(args.scenario)
    for r in range(args.runs):
        seed = int(np.random.SeedSequence([args.seed, tag, r]).generate_state(1)[0])
        d = generate(replace(base, seed=seed))
        lines = ["group,replicate,value"]
        for x, g, rl in zip(d.samples, d.group, d.replicate_labels):
            lines += [f"{d.group_labels[g]},{rl},{v!r}" for v in x.tolist()]
        (out / f"{args.scenario}_{r:04d}.csv").write_text("\n".join(lines) + "\n")


def cmd_roc(args) -> int:
    if args.runs < 2:
        raise ValueError("at least 2 runs are needed for a ROC curve")
    base = _base_spec(args)
    methods = joint_null_methods(_config(args))
    emit, fh = _jsonl_sink(args.results)
    try:
        roc = run_roc(args.runs, args.scenario, methods, base, args.seed, on_result=emit)
    finally:
        if fh is not None and fh is not sys.stdout:
            fh.close()
    out = roc.to_dict()
    out["runs"] = args.runs
    out["seed"] = args.seed
    _write(json.dumps(out, indent=1) + "\n", args.output)
    return EXIT_OK


def cmd_elicit(args) -> int:
    beta = elicit_beta(args.prjap, args.K)
    out = {"beta": beta, "prjap": prjap_closed_form(beta, args.K), "depth": args.K}
    if args.signals is not None:
        delta = elicit_delta(args.signals, beta, args.K)
        out["delta"] = delta
        out["signals"] = expected_signals(beta, delta, args.K)
    _write(json.dumps(out, indent=1) + "\n", args.output)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="andova", description=__doc__)
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit a dataset and write a report")
    p.add_argument("input", help="CSV (group,replicate,value) or JSON records")
    p.add_argument("--omega", type=float, nargs=2, metavar=("LO", "HI"), default=None)
    p.add_argument("-o", "--output", default=None, help="report path (default stdout)")
    p.add_argument("--format", choices=("json", "csv-summary"), default="json")
    p.add_argument("--svg", metavar="PREFIX", default=None, help="write PREFIX_pmap.svg and PREFIX_effects.svg")
    p.add_argument("--draws", type=int, default=0, help="posterior state draws to summarise")
    _add_model_flags(p)
    _common(p)
    p.set_defaults(func=cmd_fit)

    for name, fn, helptext in (
        ("simulate", cmd_simulate, "fit simulated datasets, emit JSON lines"),
        ("roc", cmd_roc, "null vs alternative ROC/AUC of both statistics"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--scenario", choices=sorted(SCENARIOS), default="null" if name == "simulate" else "local_shift")
        p.add_argument("--runs", type=int, default=100)
        p.add_argument("--groups", type=int, default=2)
        p.add_argument("--replicates", type=int, default=4)
        p.add_argument("--n", type=int, default=500, help="observations per group")
        p.add_argument("-o", "--output", default=None)
        if name == "simulate":
            p.add_argument("--data-dir", default=None, help="also write each dataset as CSV here")
        else:
            p.add_argument("--results", default=None, help="JSON-lines per-run output ('-' for stdout)")
        _add_model_flags(p)
        _common(p)
        p.set_defaults(func=fn)

    p = sub.add_parser("elicit", help="choose beta and delta from prior targets")
    p.add_argument("--prjap", type=float, required=True, help="target prior joint alternative probability")
    p.add_argument("--signals", type=float, default=None, help="target expected number of signals")
    p.add_argument("--depth", "-K", dest="K", type=int, default=11)
    p.add_argument("-o", "--output", default=None)
    _common(p)
    p.set_defaults(func=cmd_elicit)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(message)s"
    )
    try:
        _accel.set_threads(args.threads)
        return args.func(args)
    except BrokenPipeError:
        # downstream closed stdout (e.g. piped into head)
        sys.stderr.close()
        return EXIT_OK
    except EvidenceError as exc:
        where = f" (window {exc.window})" if exc.window is not None else ""
        print(f"andova: numerical failure{where}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ArithmeticError, FloatingPointError) as exc:
        print(f"andova: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (PartitionError, ElicitationError, ValueError, OSError) as exc:
        print(f"andova: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
