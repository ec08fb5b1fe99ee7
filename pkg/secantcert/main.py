# Copyright 2023 Cloudbase Solutions Srl
#
#    Licensed under the Apache License, Version 2.0 (the "License"); you may
#    not use this file except in compliance with the License. You may obtain
#    a copy of the License at
#
#         http://www.apache.org/licenses/LICENSE-2.0
#
#    Unless required by applicable law or agreed to in writing, software
#    distributed under the License is distributed on an "AS IS" BASIS, WITHOUT
#    WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the
#    License for the specific language governing permissions and limitations
#    under the License.

import argparse
import json
import logging
import os
import sys

from secantcert import config
from secantcert import deduction
from secantcert import geometry
from secantcert import monomials
from secantcert import utils
from secantcert import verifier
from secantcert.geometry import Statement


utils.setupLogging()

LOG = logging.getLogger(__name__)

EXIT_PROVEN = 0
EXIT_USAGE = 1
EXIT_UNKNOWN = 2
EXIT_MISMATCH = 3

# Run-config fields which may be set from the command line.
_CONFIG_FLAGS = (
    "prime", "seed", "retries", "threads", "block_width", "d", "out_dir",
    "format", "max_n", "small_n_axiom")


class UsageError(ValueError):
    pass


class _ArgumentParser(argparse.ArgumentParser):
    """ Raises on bad arguments instead of exiting with argparse's code 2,
    which is reserved for unknown verdicts. """

    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _nonnegative(value: str) -> int:
    res = int(value)
    if res < 0:
        raise argparse.ArgumentTypeError(f"expected a nonnegative integer, got {value}")
    return res


def _common_arguments() -> argparse.ArgumentParser:
    parser = _ArgumentParser(add_help=False)
    parser.add_argument(
        "--config", type=argparse.FileType('r'),
        help="Path to a YAML run configuration. Explicit flags and the "
             "SECANTCERT_PRIME/SECANTCERT_THREADS environment variables "
             "take precedence over it.")
    parser.add_argument(
        "--log-level", choices=list(utils.LOG_LEVELS), default="info",
        help="Verbosity of the diagnostic log written to stderr.")
    parser.add_argument(
        "--prime", type=int,
        help="Characteristic of the field computations run over (default 8191).")
    parser.add_argument(
        "--seed", type=_nonnegative,
        help="Seed for the point sampler. Defaults to a time-derived seed "
             "which is always echoed in the output.")
    parser.add_argument(
        "--retries", type=_nonnegative,
        help="Extra attempts with derived seeds after a rank deficiency.")
    parser.add_argument(
        "--threads", type=int,
        help="Number of threads assembling column blocks (default: all cores).")
    parser.add_argument(
        "--block-width", type=int, dest="block_width",
        help="Width b of the variable blocks B_l (default 24).")
    parser.add_argument(
        "--out", dest="out_dir",
        help="Directory certificates are written to and read from.")
    parser.add_argument(
        "--format", choices=config.OUTPUT_FORMATS,
        help="Whether to print the run log or JSON.")
    return parser


def _add_arguments(parser: argparse.ArgumentParser) -> argparse.ArgumentParser:
    if not parser:
        raise ValueError("No parser supplied")

    common = _common_arguments()
    commands = parser.add_subparsers(dest="command", required=True)

    check = commands.add_parser(
        "check", parents=[common],
        help="Verify a single statement T(n, s; a1, a2, a3) and write its certificate.")
    check.add_argument("n", type=int)
    check.add_argument("s", type=_nonnegative)
    for a in ("a1", "a2", "a3"):
        check.add_argument(a, type=_nonnegative, nargs="?", default=0)
    check.add_argument(
        "--d", type=int,
        help="Degree of the forms (default 3). Degrees other than 3 only "
             "allow free points.")
    check.add_argument(
        "--basic", action="store_true", default=False,
        help="Also compute the rank of the unoptimised matrix on the same "
             "points and check it agrees.")

    base_cases = commands.add_parser(
        "base-cases", parents=[common],
        help="Run one of the base-case suites the induction rests on.")
    base_cases.add_argument(
        "case", choices=[c.value for c in verifier.BaseCase])
    base_cases.add_argument("--i", type=int, choices=(1, 2), default=1)
    base_cases.add_argument("--min-n", type=int, dest="min_n")
    base_cases.add_argument("--max-n", type=int, dest="max_n")

    formulas = commands.add_parser(
        "formulas", parents=[common],
        help="Print N(n), s_1(n), s_2(n), t(n) and c(n).")
    formulas.add_argument("n", type=int)

    verify = commands.add_parser(
        "verify", parents=[common],
        help="Replay certificate files bit-exactly.")
    verify.add_argument("certificates", nargs="+")

    conclude = commands.add_parser(
        "conclude", parents=[common],
        help="Derive T(n, 3; s_i(n)) from a store of certificates.")
    conclude.add_argument("n", type=int)
    conclude.add_argument(
        "--facts",
        help="Directory of certificates to load (defaults to --out).")
    conclude.add_argument(
        "--i", type=int, choices=(1, 2),
        help="Only conclude the given principal statement.")
    conclude.add_argument(
        "--axioms", type=str,
        help="YAML file of tagged axioms added to the fact base.")
    conclude.add_argument(
        "--small-n-axiom", action="store_true", default=None, dest="small_n_axiom",
        help="Accept every non-exceptional T(n, 3; s) with n <= 9 as an axiom.")

    scaling = commands.add_parser(
        "scaling", parents=[common],
        help="Time build+rank of one statement family over increasing n and "
             "fit the log-log slope.")
    scaling.add_argument(
        "case", choices=[c.value for c in verifier.BaseCase])
    scaling.add_argument("--n", type=int, nargs="+", required=True, dest="ns")
    scaling.add_argument("--i", type=int, choices=(1, 2), default=1)
    scaling.add_argument(
        "--repeats", type=int, default=1,
        help="Runs per statement; the fastest one is kept.")
    scaling.add_argument(
        "--max-slope", type=float, dest="max_slope",
        help="Exit with code 2 if the fitted slope exceeds this bound.")

    expected = commands.add_parser(
        "expected-dim", parents=[common],
        help="Print the expected dimension of the s-th secant variety.")
    expected.add_argument("n", type=int)
    expected.add_argument("s", type=int)
    expected.add_argument("--d", type=int)

    return parser


def _write_certificate(cert: verifier.Certificate, out_dir: str) -> str:
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, f"{cert.statement.slug}.json")
    with open(path, "w") as fout:
        fout.write(cert.to_json())
    with open(os.path.join(out_dir, f"{cert.statement.slug}.txt"), "w") as fout:
        fout.write(cert.to_text())
    LOG.info(f"Wrote certificate for {cert.statement} to {path}")
    return path


def _load_certificate(path: str) -> verifier.Certificate:
    with open(path, "r") as fin:
        return verifier.Certificate.from_json(fin.read())


def _emit(cfg: config.RunConfig, text: str, val: dict|list):
    if cfg.format == "json":
        print(json.dumps(val, indent=4))
    else:
        print(text.rstrip("\n"))


def _cmd_check(args, cfg: config.RunConfig) -> int:
    st = Statement(
        args.n, args.s, args.a1, args.a2, args.a3, d=cfg.d, b=cfg.block_width)
    seed = cfg.seed if cfg.seed is not None else verifier.default_seed()
    verdict, cert = verifier.check(
        st, seed, cfg.modulus, retries=cfg.retries, threads=cfg.threads)
    _write_certificate(cert, cfg.out_dir)
    _emit(cfg, cert.to_text(), cert.to_dict())

    if args.basic:
        rank = verifier.basic_rank(cert, cfg.max_basic_entries)
        found = verdict.base_dim + verdict.rank
        print(f"Unoptimised matrix has rank {rank} vs. {found} from R(Y).")
        if rank != found:
            LOG.error(f"Basic and optimised ranks disagree for {st}: {rank} != {found}")
            return EXIT_MISMATCH

    return EXIT_PROVEN if verdict.proven else EXIT_UNKNOWN


def _replays(path: str, cfg: config.RunConfig) -> bool:
    """ Whether an existing certificate replays to a proof. """
    try:
        cert = _load_certificate(path)
        return verifier.replay(cert, cfg.modulus, cfg.threads).proven
    except (OSError, verifier.CertificateError, verifier.ReplayMismatchError) as ex:
        LOG.warning(f"Existing certificate {path} does not replay, rerunning: {ex}")
        return False


def _cmd_base_cases(args, cfg: config.RunConfig) -> int:
    statements = verifier.base_case_suite(args.case, args.i)
    if args.min_n is not None:
        statements = [st for st in statements if st.n >= args.min_n]
    if cfg.max_n is not None:
        statements = [st for st in statements if st.n <= cfg.max_n]
    seed = cfg.seed if cfg.seed is not None else verifier.default_seed()
    LOG.info(f"Running {len(statements)} case ({args.case}) statements with seed {seed}")

    rows = []
    failures = 0
    for st in statements:
        path = os.path.join(cfg.out_dir, f"{st.slug}.json")
        if os.path.exists(path) and _replays(path, cfg):
            rows.append({"statement": str(st), "verdict": "SKIPPED", "certificate": path})
            continue

        verdict, cert = verifier.check(
            st, seed, cfg.modulus, retries=cfg.retries, threads=cfg.threads)
        path = _write_certificate(cert, cfg.out_dir)
        if not verdict.proven:
            failures += 1
        rows.append({
            "statement": str(st), "verdict": verdict.status.value,
            "found": verdict.base_dim + verdict.rank, "expected": verdict.expected,
            "seconds": cert.times_ms.get("total", 0) / 1000, "certificate": path})

    lines = [f"{'statement':<34} {'verdict':<12} {'found':>8} {'expected':>8}"]
    for row in rows:
        lines.append(
            f"{row['statement']:<34} {row['verdict']:<12} "
            f"{row.get('found', ''):>8} {row.get('expected', ''):>8}")
    lines.append(f"{len(rows) - failures}/{len(rows)} statements proven or already certified.")
    _emit(cfg, "\n".join(lines), rows)
    return EXIT_UNKNOWN if failures else EXIT_PROVEN


def _cmd_formulas(args, cfg: config.RunConfig) -> int:
    n = args.n
    if n < 8:
        print(f"n ≥ 8 required; T(7,3;8) handled directly (got n={n})", file=sys.stderr)
        return EXIT_USAGE

    val = {"n": n, "N": geometry.N(n), "s1": geometry.s1(n), "s2": geometry.s2(n)}
    if n >= 32:
        val["t"] = geometry.t(n)
        val["c"] = geometry.c(n)
    low, high = geometry.principal_statements(n, cfg.block_width)
    val["principal"] = {
        str(low): geometry.classify(low).value,
        str(high): geometry.classify(high).value}
    if n >= 56:
        tm = geometry.t(n - 24)
        val["two_block_statement"] = str(Statement(n, 96, tm, tm, 0))

    lines = [f"{key}({n}) = {val[key]}" for key in ("N", "s1", "s2", "t", "c") if key in val]
    lines.extend(f"{st}: {label}" for st, label in val["principal"].items())
    if "two_block_statement" in val:
        lines.append(f"two-block statement: {val['two_block_statement']}")
    _emit(cfg, "\n".join(lines), val)
    return EXIT_PROVEN


def _cmd_verify(args, cfg: config.RunConfig) -> int:
    code = EXIT_PROVEN
    results = []
    for path in args.certificates:
        cert = _load_certificate(path)
        try:
            verdict = verifier.replay(cert, threads=cfg.threads)
        except verifier.ReplayMismatchError as ex:
            LOG.error(f"{path}: {ex}")
            results.append({"certificate": path, "verdict": "MISMATCH", "error": str(ex)})
            code = EXIT_MISMATCH
            continue
        results.append({
            "certificate": path, "statement": str(cert.statement),
            "verdict": verdict.status.value,
            "found": verdict.base_dim + verdict.rank, "expected": verdict.expected})
        if not verdict.proven and code == EXIT_PROVEN:
            code = EXIT_UNKNOWN

    lines = []
    for res in results:
        if res["verdict"] == "MISMATCH":
            lines.append(f"{res['certificate']}: REPLAY MISMATCH ({res['error']})")
        else:
            lines.append(
                f"{res['certificate']}: {res['statement']} replays to "
                f"{res['found']} vs. {res['expected']} expected ({res['verdict']})")
    _emit(cfg, "\n".join(lines), results)
    return code


def _cmd_conclude(args, cfg: config.RunConfig) -> int:
    facts = deduction.FactBase(small_n_axiom=cfg.small_n_axiom)
    facts_dir = args.facts or cfg.out_dir
    if os.path.isdir(facts_dir):
        facts.load_directory(facts_dir, threads=cfg.threads)
    else:
        LOG.warning(f"Fact store '{facts_dir}' does not exist, starting empty")
    if args.axioms:
        facts.load_axioms_yaml(args.axioms)

    if args.i is not None:
        res = deduction.conclude(args.n, args.i, facts)
        _emit(cfg, res.to_text(), res.to_dict())
        return EXIT_PROVEN if res.proven else EXIT_UNKNOWN

    report = deduction.theorem_report(args.n, facts)
    sections = [report.to_text()]
    for row in report.rows:
        sections.append(row.subabundant.to_text())
        if row.superabundant.goal != row.subabundant.goal:
            sections.append(row.superabundant.to_text())
    _emit(cfg, "\n".join(sections), report.to_dict())
    return EXIT_PROVEN if report.proven else EXIT_UNKNOWN


def _cmd_scaling(args, cfg: config.RunConfig) -> int:
    seed = cfg.seed if cfg.seed is not None else verifier.default_seed()
    run = verifier.time_family(
        args.case, args.ns, args.i, seed, cfg.modulus, threads=cfg.threads,
        repeats=args.repeats)
    _emit(cfg, run.to_text(), run.to_dict())

    if not run.proven:
        LOG.error(f"Some case ({args.case}) statements were not proven with seed {seed}")
        return EXIT_UNKNOWN
    if args.max_slope is not None and run.slope > args.max_slope:
        LOG.error(f"Fitted slope {run.slope:.2f} exceeds the bound {args.max_slope}")
        return EXIT_UNKNOWN
    return EXIT_PROVEN


def _cmd_expected_dim(args, cfg: config.RunConfig) -> int:
    n, s, d = args.n, args.s, cfg.d
    st = Statement(n, s, d=d)
    val = {
        "n": n, "d": d, "s": s,
        "N": monomials.dim_Sd(n, d),
        "expected_dim": geometry.expected_dim_secant(n, d, s),
        "abundance": geometry.classify(st).value,
        "known_exception": geometry.known_exception(n, d, s),
        "generic_rank": geometry.generic_chow_waring_rank_d_minus_1_1(n, d),
    }
    lines = [
        f"expected dim of the {s}-secant cone of T_{{{n},{d}}} = "
        f"min({(2 * n + 1) * s}, {val['N']}) = {val['expected_dim']} ({val['abundance']})",
        f"generic (d-1,1) Chow-Waring rank: {val['generic_rank']}",
    ]
    if val["known_exception"]:
        lines.append("known defective [CGG2002]")
    _emit(cfg, "\n".join(lines), val)
    return EXIT_PROVEN


def main_with_args(argv: list[str]) -> int:
    parser = _ArgumentParser(
        "secant-certifier",
        description="Computer-assisted verification of the nondefectivity of "
                    "secant varieties of tangential varieties to Veronese "
                    "varieties.")
    parser = _add_arguments(parser)

    try:
        args = parser.parse_args(argv)
        logging.getLogger().setLevel(utils.LOG_LEVELS[args.log_level])
        cfg = config.load_config(
            args.config,
            overrides={name: getattr(args, name, None) for name in _CONFIG_FLAGS})
    except (UsageError, config.ConfigError) as ex:
        print(parser.format_usage().rstrip("\n"), file=sys.stderr)
        print(f"error: {ex}", file=sys.stderr)
        return EXIT_USAGE

    try:
        match args.command:
            case "check":
                return _cmd_check(args, cfg)
            case "base-cases":
                return _cmd_base_cases(args, cfg)
            case "formulas":
                return _cmd_formulas(args, cfg)
            case "verify":
                return _cmd_verify(args, cfg)
            case "conclude":
                return _cmd_conclude(args, cfg)
            case "expected-dim":
                return _cmd_expected_dim(args, cfg)
            case "scaling":
                return _cmd_scaling(args, cfg)
            case other:
                raise UsageError(f"Unsupported command: {other}")
    except verifier.ReplayMismatchError as ex:
        LOG.error(f"{args.command}: {ex}")
        return EXIT_MISMATCH
    except verifier.SamplingError as ex:
        LOG.error(f"{args.command}: {ex}")
        return EXIT_UNKNOWN
    except (UsageError, OSError, ValueError) as ex:
        # NOTE: statement, field, certificate and deduction errors are all
        # ValueErrors raised on bad user input.
        LOG.error(f"{args.command}: {ex}")
        return EXIT_USAGE


def main():
    sys.exit(main_with_args(sys.argv[1:]))
