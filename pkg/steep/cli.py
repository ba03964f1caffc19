"""
Command-line front end. ``steep`` below is the parser's program name; launch
it as ``python run_steep.py`` or ``python -m steep``.

    steep check --n 4 --poly "I2^5/5 + I1^3/3 - I1^2/2 + I1*I2/2 - I3^2/2 - I4"
    steep degeneracy --n 4 --poly "..." --order 3
    steep generate --n 3 --m 2 --r 5
    steep table --n 5 --r 5
    steep examples --only example2

Exit codes: 0 steep certified (or success), 1 not certified (or a failing
example), 2 degenerate gradient, 3 inconclusive, 64 usage or input error.
A degeneracy scan exits 0 when non-degeneracy is certified, 1 when it finds
degenerate directions and 3 when it can decide neither.
"""
import argparse
import json
import logging
import sys
from dataclasses import dataclass, replace
from datetime import datetime
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from steep import __version__
from steep.catalog import FIVE_VARIABLE, FOUR_VARIABLE, WEAKLY_CONVEX_LIMIT, psi2_family
from steep.conditions import (
    DISCLAIMER,
    HIGH_DIMENSION_EXPLANATION,
    Degeneracy,
    UnsupportedDimension,
    Verdict,
    check_steepness,
    index_table,
    psi_direct,
    psi_membership,
    r_jet_degeneracy,
)
from steep.config import Config, config as default_config
from steep.generator import (
    GENERATION_ORDER,
    GOLDEN_PAIRS,
    build_xi,
    golden_mismatches,
    instantiate,
    validate_elimination,
)
from steep.polyjet import Jet, jet_at, load_jet, parse_polynomial, to_number
from steep.search import MODES, SearchConfig


logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_NOT_CERTIFIED = 1
EXIT_DEGENERATE_GRADIENT = 2
EXIT_INCONCLUSIVE = 3
EXIT_USAGE = 64

VERDICT_EXIT = {
    Verdict.STEEP_CERTIFIED: EXIT_OK,
    Verdict.NOT_CERTIFIED: EXIT_NOT_CERTIFIED,
    Verdict.DEGENERATE_GRADIENT: EXIT_DEGENERATE_GRADIENT,
    Verdict.INCONCLUSIVE: EXIT_INCONCLUSIVE,
}

DEGENERACY_EXIT = {
    Degeneracy.NON_DEGENERATE: EXIT_OK,
    Degeneracy.DEGENERATE: EXIT_NOT_CERTIFIED,
    Degeneracy.UNKNOWN: EXIT_INCONCLUSIVE,
}

SUPPORTED_DIMENSIONS = range(2, 6)


class UsageError(ValueError):
    """Bad command line."""


class _ArgumentParser(argparse.ArgumentParser):
    """Raises UsageError instead of exiting with status 2."""

    def error(self, message):
        raise UsageError(message)


def configure_logging(cfg: Config, verbose: bool = False):
    """Configure root logging from the ``logging`` config section."""
    handlers: List[logging.Handler] = [logging.StreamHandler(sys.stderr)]
    if cfg.log_file:
        handlers.append(logging.FileHandler(cfg.log_file))
    level = logging.DEBUG if verbose else getattr(logging, cfg.log_level, logging.WARNING)
    logging.basicConfig(level=level, format=cfg.log_format, handlers=handlers, force=True)


@dataclass(frozen=True)
class RunConfig:
    """One command's input source, point, engine settings and output target."""
    n: Optional[int]
    point: Optional[Tuple]
    poly: Optional[str]
    poly_file: Optional[str]
    jet_file: Optional[str]
    search: SearchConfig
    json_path: Optional[str] = None

    def __post_init__(self):
        sources = [s for s in (self.poly, self.poly_file, self.jet_file) if s is not None]
        if len(sources) != 1:
            raise UsageError("exactly one of --poly, --poly-file, --jet-file is required")
        if self.jet_file is None and self.n is None:
            raise UsageError("--n is required with --poly and --poly-file")
        if self.n is not None and self.point is not None and len(self.point) != self.n:
            raise UsageError(f"--point has {len(self.point)} coordinates, expected {self.n}")

    def load(self, order: int) -> Jet:
        """Build the jet of the selected input at the selected point."""
        if self.jet_file is not None:
            jet = load_jet(self.jet_file)
            if self.n is not None and jet.n != self.n:
                raise UsageError(f"jet file has n={jet.n}, --n says {self.n}")
            return jet
        if self.poly_file is not None:
            with open(self.poly_file, 'r') as f:
                text = f.read()
        else:
            text = self.poly
        p = parse_polynomial(text.strip(), self.n)
        point = self.point if self.point is not None else (0,) * self.n
        return jet_at(p, point, order)


def _parse_point(text: str) -> Tuple:
    try:
        return tuple(to_number(x) for x in text.split(','))
    except (ValueError, TypeError) as e:
        raise UsageError(f"invalid --point {text!r}: {e}") from e


def _load_config(args) -> Config:
    return Config(args.config) if getattr(args, 'config', None) else default_config


def _search_config(args, cfg: Config) -> SearchConfig:
    base = SearchConfig.from_config(cfg)
    overrides = {}
    if getattr(args, 'mode', None):
        overrides['mode'] = args.mode
    if getattr(args, 'seeds', None) is not None:
        overrides['starts'] = args.seeds
    if getattr(args, 'seed', None) is not None:
        overrides['seed'] = args.seed
    if getattr(args, 'tol', None) is not None:
        overrides['witness_tol'] = args.tol
    if getattr(args, 'threads', None) is not None:
        overrides['threads'] = args.threads
    return replace(base, **overrides)


def _run_config(args, cfg: Config) -> RunConfig:
    if args.n is not None and args.n not in SUPPORTED_DIMENSIONS:
        if args.n >= 6:
            raise UnsupportedDimension(HIGH_DIMENSION_EXPLANATION)
        raise UsageError(f"--n must be between 2 and 5, got {args.n}")
    return RunConfig(
        n=args.n,
        point=_parse_point(args.point) if args.point else None,
        poly=args.poly,
        poly_file=args.poly_file,
        jet_file=args.jet_file,
        search=_search_config(args, cfg),
        json_path=args.json,
    )


def _write_json(document: Dict, path: Optional[str]):
    if path is None:
        return
    text = json.dumps(document, indent=2)
    if path == '-':
        print(text)
        return
    with open(path, 'w') as f:
        f.write(text + "\n")
    logger.info(f"Report written to {path}")


def _format_vector(vec: Sequence[float]) -> str:
    return "(" + ", ".join(f"{x:.6g}" for x in vec) + ")"


def _check(args) -> int:
    cfg = _load_config(args)
    run = _run_config(args, cfg)
    jet = run.load(order=5)
    if jet.n not in SUPPORTED_DIMENSIONS:
        raise UnsupportedDimension(HIGH_DIMENSION_EXPLANATION if jet.n >= 6 else
                                   f"steepness conditions exist for n = 2..5, got n={jet.n}")
    report = check_steepness(jet, run.search)

    print(f"verdict: {report.verdict.value}")
    if report.reason:
        print(f"reason: {report.reason}")
    for scan in report.prechecks:
        print(f"  precheck {scan.order}-jet degeneracy: {scan.status.value}")
    for record in report.conditions:
        line = f"  {record.condition_id:<9} {record.set_id:<9} {record.status.value}"
        if record.best_residual is not None:
            line += f"  best residual {record.best_residual:.3e}"
        if record.certified_lower_bound is not None:
            line += f"  certified bound {record.certified_lower_bound:.3e}"
        print(line)
        if record.witness:
            for name, vec in record.witness.items():
                print(f"      {name} = {_format_vector(vec)}")
        if record.note:
            print(f"      note: {record.note}")
    print(DISCLAIMER)
    _write_json(report.to_dict(), run.json_path)
    return VERDICT_EXIT[report.verdict]


def _degeneracy(args) -> int:
    if not 1 <= args.order <= 5:
        raise UsageError(f"--order must be between 1 and 5, got {args.order}")
    cfg = _load_config(args)
    run = _run_config(args, cfg)
    jet = run.load(order=args.order)
    if jet.n not in SUPPORTED_DIMENSIONS:
        raise UnsupportedDimension(HIGH_DIMENSION_EXPLANATION)
    result = r_jet_degeneracy(jet, args.order, run.search)

    print(f"{args.order}-jet: {result.status.value}")
    for witness in result.witnesses:
        print(f"  witness {_format_vector(witness)}")
    if result.status is Degeneracy.NON_DEGENERATE:
        print(f"  certified residual bound {result.margin:.3e}")
    elif result.best_residual is not None:
        print(f"  best residual {result.best_residual:.3e}")
    _write_json(dict(result.to_dict(), config=run.search.to_dict(),
                     non_default=run.search.non_default(),
                     generated_at=datetime.now().isoformat(timespec='seconds')),
                run.json_path)
    return DEGENERACY_EXIT[result.status]


def _generate(args) -> int:
    if args.n not in SUPPORTED_DIMENSIONS:
        raise UsageError(f"--n must be between 2 and 5, got {args.n}")
    system = build_xi(args.n, args.r, args.m)
    if args.format == 'json':
        print(json.dumps(system.to_dict(), indent=2))
    else:
        print(system.to_text())
    return EXIT_OK


def _table(args) -> int:
    table = index_table(args.n, args.r)
    print(f"n={table.n} r={table.r}")
    print(f"{'m':>3} {'alpha_bar':>10} {'beta':>6}")
    for m, alpha, beta in table.rows():
        flag = ""
        if m == 1 and table.uninformative:
            flag = "  conditions uninformative: beta_1 <= 3"
        print(f"{m:>3} {alpha:>10} {beta:>6}{flag}")
    print(f"codimension bound: {table.codim_bound}")
    if args.json:
        _write_json(table.to_dict(), args.json)
    return EXIT_OK


def _close(a: Sequence[float], b: Sequence[float], tol: float = 1e-6) -> bool:
    return len(a) == len(b) and bool(np.allclose(a, b, atol=tol))


def _example1(cfg: SearchConfig, samples: int) -> Tuple[bool, str]:
    jet = jet_at(FOUR_VARIABLE.polynomial(), FOUR_VARIABLE.origin, 5)
    report = check_steepness(jet, cfg)
    three = r_jet_degeneracy(jet, 3, cfg)
    five = r_jet_degeneracy(jet, 5, cfg)
    ok = (report.verdict is Verdict.STEEP_CERTIFIED
          and len(three.witnesses) == 1 and _close(three.witnesses[0], (0, 1, 0, 0))
          and five.status is Degeneracy.NON_DEGENERATE)
    return ok, (f"verdict {report.verdict.value}, three-jet witnesses {len(three.witnesses)}, "
                f"five-jet {five.status.value}")


def _example2(cfg: SearchConfig, samples: int) -> Tuple[bool, str]:
    jet = jet_at(FIVE_VARIABLE.polynomial(), FIVE_VARIABLE.origin, 5)
    report = check_steepness(jet, cfg)
    three = r_jet_degeneracy(jet, 3, cfg)
    four = r_jet_degeneracy(jet, 4, cfg)
    two = r_jet_degeneracy(jet, 2, cfg)
    cone = all(abs(z[1]) < 1e-4 and abs(z[0] ** 2 + z[2] ** 2 + z[4] ** 2 - 2 * z[2] * z[3]) < 1e-4
               for z in two.witnesses)
    ok = (report.verdict is Verdict.STEEP_CERTIFIED
          and len(three.witnesses) == 1 and _close(three.witnesses[0], (0, 0, 0, 1, 0))
          and four.status is Degeneracy.NON_DEGENERATE
          and two.status is Degeneracy.DEGENERATE and cone)
    return ok, (f"verdict {report.verdict.value}, three-jet witnesses {len(three.witnesses)}, "
                f"four-jet {four.status.value}, two-jet cone directions {len(two.witnesses)}")


def _example3(cfg: SearchConfig, samples: int) -> Tuple[bool, str]:
    system = build_xi(3, GENERATION_ORDER, 2)
    worst = 0
    for variant in ('a', 'b'):
        for k in (1, 10, 100):
            member = psi2_family(k, variant)
            jet = jet_at(member.function.polynomial(), member.function.origin, 5)
            residuals = list(psi_direct(jet, member.u, member.v, member.params))
            residuals += instantiate(system, jet, [member.v, member.u],
                                     {'b21': 0, 'b22': member.alpha, 'b23': member.beta})
            worst = max(worst, max(abs(x) for x in residuals))
    limit = jet_at(WEAKLY_CONVEX_LIMIT.polynomial(), WEAKLY_CONVEX_LIMIT.origin, 5)
    membership = psi_membership(limit, 'psi2*(3)', cfg)
    report = check_steepness(limit, cfg)
    ok = (worst == 0 and membership.member is True
          and report.verdict is Verdict.NOT_CERTIFIED)
    return ok, (f"family residual {float(worst):.3e}, limit in psi2*(3): {membership.member}, "
                f"limit verdict {report.verdict.value}")


def _tables(cfg: SearchConfig, samples: int) -> Tuple[bool, str]:
    expected = {2: (5,), 3: (5, 4), 4: (5, 5, 3), 5: (4, 5, 4, 2)}
    found = {n: index_table(n, 5).beta for n in expected}
    ok = found == expected and index_table(4, 5).codim_bound == 2
    return ok, ", ".join(f"n={n}: {beta}" for n, beta in found.items())


def _golden(cfg: SearchConfig, samples: int) -> Tuple[bool, str]:
    failures = {pair: golden_mismatches(*pair) for pair in GOLDEN_PAIRS}
    bad = {pair: where for pair, where in failures.items() if where}
    return not bad, (f"{len(GOLDEN_PAIRS) - len(bad)}/{len(GOLDEN_PAIRS)} systems equal"
                     + (f"; mismatches {bad}" if bad else ""))


def _elimination(cfg: SearchConfig, samples: int) -> Tuple[bool, str]:
    reports = [validate_elimination(n, m, samples=samples, seed=cfg.seed)
               for n, m in ((3, 2), (4, 2), (4, 3), (5, 2), (5, 3), (5, 4))]
    ok = all(r.ok for r in reports)
    return ok, ", ".join(f"{r.set_id} {r.passed}/{r.samples}" for r in reports)


CASES: Dict[str, Callable[[SearchConfig, int], Tuple[bool, str]]] = {
    'example1': _example1,
    'example2': _example2,
    'example3': _example3,
    'tables': _tables,
    'golden': _golden,
    'elimination': _elimination,
}


def _examples(args) -> int:
    cfg = _load_config(args)
    search = _search_config(args, cfg)
    names = [args.only] if args.only else list(CASES)
    samples = args.samples if args.samples is not None else cfg.elimination_samples
    if samples < 1:
        raise UsageError(f"--samples must be positive, got {samples}")
    non_default = search.non_default()
    if non_default:
        print(f"non-default configuration: {non_default}")

    results = {}
    for name in names:
        logger.info(f"Running example case {name}")
        passed, detail = CASES[name](search, samples)
        results[name] = {'passed': passed, 'detail': detail}
        print(f"{'PASS' if passed else 'FAIL'}  {name:<12} {detail}")

    _write_json({'cases': results, 'config': search.to_dict(), 'non_default': non_default,
                 'generated_at': datetime.now().isoformat(timespec='seconds')}, args.json)
    return EXIT_OK if all(r['passed'] for r in results.values()) else EXIT_NOT_CERTIFIED


def _add_input_flags(parser: argparse.ArgumentParser):
    parser.add_argument('--n', type=int, help='Number of variables')
    parser.add_argument('--point', type=str, help='Comma-separated point (default: origin)')
    parser.add_argument('--poly', type=str, help='Polynomial in I1..In')
    parser.add_argument('--poly-file', type=str, help='File holding the polynomial')
    parser.add_argument('--jet-file', type=str, help='Jet JSON document')


def _add_search_flags(parser: argparse.ArgumentParser):
    parser.add_argument('--mode', choices=MODES, help='Search mode (default: from config)')
    parser.add_argument('--tol', type=float, help='Witness residual tolerance')
    parser.add_argument('--seeds', type=int, help='Random starts per search')
    parser.add_argument('--seed', type=int, help='RNG seed')
    parser.add_argument('--threads', type=int, help='Parallel condition checks')
    parser.add_argument('--json', type=str, help="Write the JSON report here ('-' for stdout)")


def build_parser() -> argparse.ArgumentParser:
    common = _ArgumentParser(add_help=False)
    common.add_argument('-v', '--verbose', action='store_true', help='Debug logging')
    common.add_argument('--config', type=str, help='Path to config.yaml')

    parser = _ArgumentParser(prog='steep', description='Sufficient steepness conditions for n = 2..5')
    parser.add_argument('--version', action='version', version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest='command', required=True)

    check = sub.add_parser('check', parents=[common], help='Check steepness at a point')
    _add_input_flags(check)
    _add_search_flags(check)
    check.set_defaults(handler=_check)

    degeneracy = sub.add_parser('degeneracy', parents=[common], help='r-jet degeneracy scan')
    _add_input_flags(degeneracy)
    _add_search_flags(degeneracy)
    degeneracy.add_argument('--order', type=int, required=True, help='Jet order r (1..5)')
    degeneracy.set_defaults(handler=_degeneracy)

    generate = sub.add_parser('generate', parents=[common], help='Generate the system Xi_m')
    generate.add_argument('--n', type=int, required=True)
    generate.add_argument('--m', type=int, required=True)
    generate.add_argument('--r', type=int, default=GENERATION_ORDER)
    generate.add_argument('--format', choices=('text', 'json'), default='text')
    generate.set_defaults(handler=_generate)

    table = sub.add_parser('table', parents=[common], help='Index table for (n, r)')
    table.add_argument('--n', type=int, required=True)
    table.add_argument('--r', type=int, default=GENERATION_ORDER)
    table.add_argument('--json', type=str)
    table.set_defaults(handler=_table)

    examples = sub.add_parser('examples', parents=[common], help='Run the reference regression cases')
    examples.add_argument('--only', choices=tuple(CASES), help='Run a single case')
    examples.add_argument('--samples', type=int,
                          help='Samples per elimination check (default: from config)')
    _add_search_flags(examples)
    examples.set_defaults(handler=_examples)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Parse arguments, run the selected command and return its exit code."""
    try:
        args = build_parser().parse_args(argv)
        configure_logging(_load_config(args), verbose=args.verbose)
        return args.handler(args)
    except (ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


def cmd_check(argv: Sequence[str]) -> int:
    return main(['check', *argv])


def cmd_degeneracy(argv: Sequence[str]) -> int:
    return main(['degeneracy', *argv])


def cmd_generate(argv: Sequence[str]) -> int:
    return main(['generate', *argv])


def cmd_table(argv: Sequence[str]) -> int:
    return main(['table', *argv])


def cmd_examples(argv: Sequence[str]) -> int:
    return main(['examples', *argv])
