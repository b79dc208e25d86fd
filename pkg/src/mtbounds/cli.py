"""Command line entry point: ``mtbounds eval | sweep | verify``.

Exit codes: 0 ok, 1 parse/schema error, 2 domain error, 3 theorem violation.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from . import bounds as bd
from .errors import (
    ArityError,
    BoundsError,
    ParseError,
    SchemaError,
    TheoremViolationError,
)
from .family import FiniteFamily, GaussianFamily, product_extend
from .risk import (
    RiskReport,
    enumerate_deterministic,
    exact_bayes_success,
    mc_bayes_success,
    risk_report,
)
from .scenario import (
    ReportRow,
    Scenario,
    family_to_spec,
    parse_scenario,
    render_csv,
    render_json,
    write_atomic,
)
from .verify import run_suite

logger = logging.getLogger("mtbounds")

EXIT_OK, EXIT_PARSE, EXIT_DOMAIN, EXIT_VIOLATION = 0, 1, 2, 3
KURTOSIS_WARN = 100.0


def _risk_rows(report: RiskReport, n: int, ref_label: str) -> list[ReportRow]:
    if report.mc is not None:
        mc = report.mc
        if mc.kurtosis > KURTOSIS_WARN:
            logger.warning("Monte Carlo integrand kurtosis %.1f > %g: CI may be unreliable; "
                           "try a mixture reference", mc.kurtosis, KURTOSIS_WARN)
        notes = (f"ci99=[{mc.ci_low:.12g}, {mc.ci_high:.12g}]; samples={mc.samples}; "
                 f"seed={mc.seed}; kurtosis={mc.kurtosis:.6g}")
        return [ReportRow.make("mc_bayes", bd.BAYES, mc.estimate, mc.estimate,
                               reference_label=ref_label, n=n, notes=notes)]
    rows = [ReportRow.make("exact_bayes", bd.BAYES, report.bayes_success, report.bayes_success,
                           n=n, notes="pointwise-max sum")]
    if report.minimax_bracket is not None:
        lo, hi = report.minimax_bracket
        it = f"iterations={report.minimax_iterations}"
        rows.append(ReportRow.make("minimax_lower", bd.MINIMAX, lo, lo, n=n, notes=it))
        rows.append(ReportRow.make("minimax_upper", bd.MINIMAX, hi, hi, n=n, notes=it))
    return rows


def _evaluate(method, family, config, n=1):
    try:
        return bd.evaluate_bound(method, family, config, n)
    except ArityError as exc:
        raise SchemaError(f"bound {method!r} is not applicable: {exc}") from exc


def cmd_eval(scenario: Scenario) -> list[ReportRow]:
    """Every requested bound plus Bayes (exact or MC) and minimax rows."""
    base = scenario.build_family()
    n = scenario.product_n
    family = product_extend(base, n, scenario.oracle["product_size_cap"])
    config = scenario.bound_config()
    results = [_evaluate(m, family, config) for m in bd.METHODS if m in scenario.bounds]
    report = risk_report(family, ref=scenario.reference, samples=scenario.mc["samples"],
                         seed=scenario.mc["seed"],
                         minimax_iters=scenario.oracle["minimax_iters"])
    bd.check_soundness(results, report)
    rows = [ReportRow.from_bound(r, n) for r in results]
    rows += _risk_rows(report, n, scenario.reference.label)
    cap = scenario.oracle["enum_cap"]
    if isinstance(family, FiniteFamily) and family.n_members**family.space.size <= cap:
        det = enumerate_deterministic(family, cap)
        rows.append(ReportRow.make("minimax_deterministic", bd.MINIMAX, det, det, n=n,
                                   notes="best deterministic rule, exhaustive"))
    return rows


def cmd_sweep(scenario: Scenario, n_list) -> list[ReportRow]:
    """Bounds over n i.i.d. copies from tensorized divergences.

    The exact Bayes success is recomputed on the materialized product only
    while it fits under ``oracle.product_size_cap``.
    """
    if not n_list or any(isinstance(k, bool) or int(k) != k or k < 1 for k in n_list):
        raise SchemaError(f"--n must list positive integers, got {n_list!r}")
    base = scenario.build_family()
    cap = scenario.oracle["product_size_cap"]
    config = scenario.bound_config()
    rows = []
    for n in n_list:
        big = None
        if isinstance(base, GaussianFamily):
            big = product_extend(base, n)
        elif base.space.size**n <= cap:
            big = product_extend(base, n, cap)
        results = []
        for m in bd.METHODS:
            if m not in scenario.bounds:
                continue
            needs_product = n > 1 and isinstance(base, FiniteFamily) and m in (
                "two_point", "phi_hinge")
            if needs_product and big is None:
                rows.append(ReportRow.make(m, bd.BAYES, None, None, n=n,
                                           reference_label=scenario.reference.label,
                                           notes="does not tensorize; product above size cap"))
                continue
            r = _evaluate(m, big, config) if needs_product else _evaluate(m, base, config, n)
            results.append(r)
        if isinstance(base, GaussianFamily):
            mc = mc_bayes_success(big, scenario.reference, scenario.mc["samples"],
                                  scenario.mc["seed"])
            report = RiskReport(base.n_members, mc.estimate, "monte_carlo", mc=mc)
        elif big is not None:
            report = RiskReport(base.n_members, exact_bayes_success(big))
        else:
            report = None
        if report is not None:
            bd.check_soundness(results, report)
        rows += [ReportRow.from_bound(r, n) for r in results]
        if report is None:
            rows.append(ReportRow.make("exact_bayes", bd.BAYES, None, None, n=n,
                                       notes="n/a: product above size cap"))
        else:
            rows += _risk_rows(report, n, scenario.reference.label)
    return rows


def _emit(text: str, out_path):
    if out_path:
        write_atomic(out_path, text)
    else:
        sys.stdout.write(text)


def _parse_n_list(text: str):
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise SchemaError(f"--n must be a comma-separated list of integers: {exc}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mtbounds",
        description="Bayes success and minimax lower bounds for multiple testing.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eval", help="evaluate bounds for one scenario")
    p.add_argument("scenario")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out", default=None)

    p = sub.add_parser("sweep", help="bounds across sample sizes n")
    p.add_argument("scenario")
    p.add_argument("--n", required=True, help="comma-separated sample sizes, e.g. 1,2,5,10")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out", default=None)

    p = sub.add_parser("verify", help="run the randomized invariant suite")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--families", type=int, default=200)
    p.add_argument("--reproducer", default="verify_reproducer.json",
                   help="where to write the failing family on exit 3")
    p.add_argument("--fault-vj-scale", type=float, default=1.0, help=argparse.SUPPRESS)
    return parser


def _verify(args) -> int:
    report = run_suite(args.seed, args.families, fault_vj_scale=args.fault_vj_scale)
    for line in report.lines():
        print(line)
    print(f"{'all invariants pass' if report.ok else 'FAILED'} "
          f"(seed {report.seed}, {report.seconds:.1f} s)")
    if report.ok:
        return EXIT_OK
    family, msg = report.minimal_failure()
    doc = {"family_spec": family_to_spec(family), "bounds": list(bd.applicable_methods(family)),
           "description": f"verify --seed {args.seed}: {msg}"}
    write_atomic(args.reproducer, json.dumps(doc, indent=2) + "\n")
    print(f"reproducer written to {args.reproducer}")
    return EXIT_VIOLATION


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        if args.command == "verify":
            return _verify(args)
        scenario = parse_scenario(args.scenario)
        if args.command == "eval":
            rows = cmd_eval(scenario)
        else:
            rows = cmd_sweep(scenario, _parse_n_list(args.n))
        if args.format == "csv":
            text = render_csv(rows)
        else:
            text = render_json(rows, scenario, args.command)
        _emit(text, args.out)
        return EXIT_OK
    except (ParseError, SchemaError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except TheoremViolationError as exc:
        print(f"theorem violation: {exc}", file=sys.stderr)
        return EXIT_VIOLATION
    except (BoundsError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
