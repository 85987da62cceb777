"""Command-line entry point.

Exit status: 0 when the command ran (and, for ``verify``, every verdict
passed), 1 when at least one verdict failed, 2 on usage, domain, or I/O
errors.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys

import numpy as np

from . import bounds as B
from .combinatorics import count_table
from .config import COMMANDS, FORMATS, RunConfig, format_value, parse_config, validate, with_overrides
from .errors import ConcboundError, UsageError
from .simulate import PlusMomentTarget, analytic_ensemble_moments, estimate
from .verify import (
    NonnegativeFamily,
    check_averaging_lemma,
    check_combinatorics,
    check_mgf_lemma,
    check_moment_inequality,
    check_truncation_lemma,
    regime_comparison,
)

BOUND_COLUMNS = ["family", "l", "epsilon", "K", "A", "x", "n", "N", "p", "M", "sigma", "threshold", "value"]
VERDICT_COLUMNS = ["name", "passed", "empirical", "empirical_se", "bound", "margin_sigmas"]
DEFAULT_GRID = [(l, p, n, 10) for l in (1, 2) for p in (2.0, 3.0, 4.0, 8.0) for n in (100, 10_000)]


def _cell(v):
    return "" if v is None else format_value(v)


def _csv_text(columns, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_cell(row.get(c)) for c in columns])
    return buf.getvalue()


def _jsonl_text(records):
    return "".join(json.dumps(r, default=_json_default) + "\n" for r in records)


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if hasattr(o, "value"):
        return o.value
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def _check_seed(seed, index):
    # independent 64-bit substream seed per check
    return int(np.random.SeedSequence(seed, spawn_key=(index,)).generate_state(1, np.uint64)[0])


# ---------------------------------------------------------------- commands

def _bound_rows(cfg):
    rows = []
    for section in cfg.requests:
        request, spec, scale = section.build()
        res = B.evaluate(request, spec, scale)
        l = request.l
        if res.family in (B.BoundFamily.CHEBYSHEV_UPPER, B.BoundFamily.CHEBYSHEV_LOWER):
            l = res.notes["l_star"]
        K = request.K
        if res.family is B.BoundFamily.BOUNDED_PART:
            K = res.notes["K"]
        elif res.family is B.BoundFamily.TRUNCATION_BIAS:
            K = res.params["K"]
        rows.append(dict(family=res.family.value, l=l, epsilon=request.eps, K=K, A=request.A, x=request.x,
                         n=scale.n, N=scale.N, p=spec.p, M=spec.M, sigma=scale.sigma,
                         threshold=res.threshold, value=res.value,
                         raw_value=res.raw_value, notes=res.notes))
    return rows


def cmd_bound(cfg):
    rows = _bound_rows(cfg)
    if cfg.output_format() == "csv":
        return 0, _csv_text(BOUND_COLUMNS, rows)
    return 0, _jsonl_text(rows)


def cmd_simulate(cfg):
    config = cfg.ensemble_config()
    targets = [PlusMomentTarget(t.l, t.eps, t.direction) for t in cfg.targets]
    summary = estimate(config, cfg.replications, targets, K=cfg.simulate.K, pilot_fraction=cfg.pilot_fraction)
    record = {"ensemble": config.to_dict(), **summary.to_dict()}
    if cfg.simulate.p is not None:
        M, sigma = analytic_ensemble_moments(config, cfg.simulate.p)
        record["analytic"] = {"p": cfg.simulate.p, "M": M, "sigma": sigma}
    if cfg.output_format() == "jsonl":
        return 0, _jsonl_text([record])
    columns = ["l", "eps", "direction", "threshold", "estimate", "se", "replications",
               "mean_sup", "mean_sup_se", "sigma_hat", "seed"]
    rows = [dict(pm, mean_sup=summary.mean_sup, mean_sup_se=summary.mean_sup_se,
                 sigma_hat=summary.sigma_hat, seed=summary.seed) for pm in record["plus_moments"]]
    return 0, _csv_text(columns, rows)


def default_checks(cfg):
    """Suite run by ``verify`` when the config lists no checks."""
    from .config import CheckSection

    p = 2.0
    fam = cfg.ensemble_config().family
    tail = getattr(fam, "alpha", None) or getattr(fam, "dof", None)
    if tail is not None:
        p = min(4.0, max(1.0, (tail - 0.5)))
    return [
        CheckSection(kind="moment", p=p, l=1.0, eps=1.0, direction="upper"),
        CheckSection(kind="moment", p=p, l=1.0, eps=0.5, direction="lower"),
        CheckSection(kind="truncation", p=p, l=1.0),
        CheckSection(kind="averaging", family="uniform", l=1.0, n=10),
        CheckSection(kind="mgf", A=2.0),
        CheckSection(kind="combinatorics", m_max=6, n_max=6),
    ]


def run_checks(cfg):
    checks = cfg.checks or default_checks(cfg)
    verdicts = []
    for k, c in enumerate(checks, 1):
        R = c.replications or cfg.replications
        seed = _check_seed(cfg.seed, k)
        margin = cfg.margin_sigmas
        scale = cfg.bound_scale * c.bound_scale
        if c.kind in ("moment", "truncation"):
            ens = cfg.ensemble_config()
            ens = type(ens)(n=ens.n, N=ens.N, family=ens.family, dependence=ens.dependence, seed=seed)
            if c.kind == "moment":
                v = check_moment_inequality(ens, c.l, c.eps, c.direction, R, c.p, margin_sigmas=margin,
                                            pilot_fraction=cfg.pilot_fraction, bound_scale=scale)
            else:
                v = check_truncation_lemma(ens, c.l, R, c.p, margin_sigmas=margin, bound_scale=scale)
        elif c.kind == "averaging":
            v = check_averaging_lemma(NonnegativeFamily(c.family, c.alpha), c.l, c.n, R, seed=seed,
                                      margin_sigmas=margin, bound_scale=scale)
        elif c.kind == "mgf":
            v = check_mgf_lemma(c.values, c.probs, c.A, bound_scale=scale)
        else:
            v = check_combinatorics(c.m_max, c.n_max, bound_scale=scale)
        verdicts.append(v)
    return verdicts


def cmd_verify(cfg):
    verdicts = run_checks(cfg)
    records = [v.to_dict() for v in verdicts]
    status = 0 if all(v.passed for v in verdicts) else 1
    if cfg.output_format() == "csv":
        return status, _csv_text(VERDICT_COLUMNS, records)
    return status, _jsonl_text(records)


def cmd_combinatorics(cfg):
    table = count_table(cfg.combinatorics.m_max, cfg.combinatorics.n_max)
    rows = [dict(m=t.m, n=t.n, exact=t.exact, bound=t.bound, within_bound=t.within_bound()) for t in table]
    if cfg.output_format() == "csv":
        return 0, _csv_text(["m", "n", "exact", "bound", "within_bound"], rows)
    return 0, _jsonl_text(rows)


def cmd_regimes(cfg):
    grid = cfg.grid.rows() or DEFAULT_GRID
    rows = [r.to_dict() for r in regime_comparison(grid, M=cfg.grid.M)]
    if cfg.output_format() == "jsonl":
        return 0, _jsonl_text(rows)
    columns = list(rows[0]) if rows else ["l", "p", "n", "N"]
    for r in rows:
        r["inapplicable"] = ";".join(r["inapplicable"]) or None
    return 0, _csv_text(columns, rows)


COMMAND_TABLE = {
    "bound": cmd_bound,
    "simulate": cmd_simulate,
    "verify": cmd_verify,
    "combinatorics": cmd_combinatorics,
    "regimes": cmd_regimes,
}


def run(cfg: RunConfig):
    """Execute a validated config; returns ``(exit_status, output_text)``."""
    validate(cfg)
    return COMMAND_TABLE[cfg.command](cfg)


# ---------------------------------------------------------------- entry point

def build_parser():
    parser = argparse.ArgumentParser(prog="concbound", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="path to a key = value config document")
        p.add_argument("--seed", type=int, help="64-bit unsigned seed (overrides the config)")
        p.add_argument("--replications", type=int, help="Monte Carlo replications (overrides the config)")
        p.add_argument("--out", help="output path; stdout when omitted")
        p.add_argument("--format", choices=FORMATS, help="output format")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.config:
            with open(args.config, encoding="utf-8") as fh:
                cfg = parse_config(fh.read())
        else:
            cfg = RunConfig()
        if cfg.command is not None and cfg.command != args.command:
            raise UsageError(f"command: config says {cfg.command!r} but {args.command!r} was requested")
        cfg = with_overrides(cfg, command=args.command, seed=args.seed, replications=args.replications,
                             out=args.out, format=args.format)
        status, text = run(cfg)
        if cfg.output.path:
            with open(cfg.output.path, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
        return status
    except (ConcboundError, OSError, ValueError) as exc:
        print(f"concbound: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - exit status must stay within {0, 1, 2}
        print(f"concbound: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
