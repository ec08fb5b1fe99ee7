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

""" Randomised verification of statements by rank computations over Z_p.

A statement is checked by sampling its points, assembling the rows Y of the
tangent-space matrix R and comparing base_dim + rank R(Y) with the expected
dimension. A full rank proves the statement by semicontinuity; anything
else is reported as unknown, never as false.
"""

import concurrent.futures
import dataclasses
import enum
import json
import logging
import time
from typing import Sequence
try:
    from typing import Self
except ImportError:  # Python < 3.11
    from typing_extensions import Self

import numpy as np

from secantcert import geometry
from secantcert import monomials
from secantcert import utils
from secantcert.ffield import FieldMatrix, FieldModulus, rank_mod_p
from secantcert.geometry import Statement, TangentPoint, FREE
from secantcert.monomials import DEFAULT_BLOCK_WIDTH


LOG = logging.getLogger(__name__)

CERTIFICATE_VERSION = 1
DEFAULT_RETRIES = 3
DEFAULT_MAX_BASIC_ENTRIES = 10 ** 8
MAX_SAMPLING_ATTEMPTS = 64

_MASK64 = (1 << 64) - 1
# Largest seed the 64-bit PRNG state holds without truncation.
MAX_SEED = _MASK64
_CERTIFICATE_FIELDS = [
    "version", "seed", "prime", "n", "d", "s", "a", "block_width", "points",
    "base_dim", "rank", "expected", "verdict", "times_ms", "prng"]


class SamplingError(RuntimeError):
    """ Raised when no non-degenerate point could be drawn. """


class SizeLimitError(ValueError):
    """ Raised when the basic algorithm's matrix exceeds the entry ceiling. """


class CertificateError(ValueError):
    """ Raised on malformed or inconsistent certificates. """


class ReplayMismatchError(RuntimeError):
    """ Raised when a replayed rank differs from the stored one. """


def _splitmix64(state: int) -> tuple[int, int]:
    """ Returns (next_state, output). """
    state = (state + 0x9E3779B97F4A7C15) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return state, z ^ (z >> 31)


class XorshiftStream():
    """ xorshift64* stream whose state is seeded through SplitMix64. """

    NAME = "splitmix64/xorshift64*"

    def __init__(self, seed: int):
        _, state = _splitmix64(seed & _MASK64)
        # NOTE: xorshift has the all-zero state as a fixed point.
        self._state = state or 0x9E3779B97F4A7C15

    def next_u64(self) -> int:
        x = self._state
        x ^= x >> 12
        x ^= (x << 25) & _MASK64
        x ^= x >> 27
        self._state = x
        return (x * 0x2545F4914F6CDD1D) & _MASK64

    def below(self, bound: int) -> int:
        """ Uniform integer in [0, bound) by rejection sampling. """
        limit = (1 << 64) - (1 << 64) % bound
        while True:
            x = self.next_u64()
            if x < limit:
                return x % bound


def attempt_seed(seed: int, attempt: int) -> int:
    """ Seed used by the given retry; attempt 0 uses the seed itself. """
    state = seed & _MASK64
    out = state
    for _ in range(attempt):
        state, out = _splitmix64(state)
    return out


def default_seed() -> int:
    return int(time.time())


def sample_points(st: Statement, seed: int,
                  modulus: FieldModulus|None=None) -> list[TangentPoint]:
    """ Draws s free points, then a_1, a_2, a_3 points on U_1, U_2, U_3.

    Coefficients are uniform in [0, p-1]; coordinates on a point's block are
    zero and consume no draws. Degenerate draws (l proportional to m) are
    redrawn from the same stream.
    """
    modulus = modulus or FieldModulus()
    stream = XorshiftStream(seed)
    n = st.n

    layout = [FREE] * st.s
    for l, count in enumerate(st.a, start=1):
        layout.extend([l] * count)

    points = []
    for block in layout:
        skipped = range(0)
        if block != FREE:
            skipped = monomials.BlockSpec(block, st.b).indices

        def _draw() -> tuple[int, ...]:
            return tuple(
                0 if i in skipped else stream.below(modulus.p)
                for i in range(n + 1))

        for _ in range(MAX_SAMPLING_ATTEMPTS):
            l, m = _draw(), _draw()
            point = TangentPoint.from_vectors(l, m, block)
            if not geometry.is_degenerate(point.l, point.m, modulus):
                points.append(point)
                break
            LOG.warning(
                f"sample_points({st}): degenerate draw for point "
                f"{len(points)}, resampling")
        else:
            raise SamplingError(
                f"Failed to draw a non-degenerate point for {st} after "
                f"{MAX_SAMPLING_ATTEMPTS} attempts")
    return points


def matrix_shape(st: Statement) -> tuple[int, int]:
    """ (rows, cols) of R(Y) without assembling it. """
    rows = monomials.dim_Sd(st.n, st.d) - geometry.base_dim(st)
    cols = 2 * (st.n + 1) * st.s + 2 * st.b * sum(st.a)
    return rows, cols


def row_set(st: Statement) -> monomials.RowIndexSet:
    return monomials.y_set(st.n, st.active_blocks, st.b, st.d)


def _check_points(st: Statement, points: list[TangentPoint]):
    if st.is_empty or not points:
        raise geometry.StatementError(f"{st} has no points to build R from")
    counts = [0, 0, 0, 0]
    for point in points:
        if point.block not in range(len(counts)):
            raise geometry.StatementError(f"Invalid point block {point.block}")
        counts[point.block] += 1
    if counts != [st.s, *st.a]:
        raise geometry.StatementError(
            f"Points inconsistent with {st}: got {counts[0]} free and "
            f"{counts[1:]} constrained points")


def build_R(st: Statement, points: list[TangentPoint],
            modulus: FieldModulus|None=None,
            rows: monomials.RowIndexSet|None=None,
            threads: int=1) -> FieldMatrix:
    """ Concatenates the tangent column blocks of all points.

    When `rows` is given only those rows are produced for each block, so
    the full N(n) x cols matrix is never held in memory.
    """
    modulus = modulus or FieldModulus()
    _check_points(st, points)

    def _block(point: TangentPoint) -> FieldMatrix:
        return geometry.tangent_columns(
            point, st.n, st.d, st.b, modulus, rows=rows)

    if threads > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as pool:
            blocks = list(pool.map(_block, points))
    else:
        blocks = [_block(point) for point in points]

    LOG.debug(
        f"build_R({st}): assembled {len(blocks)} column blocks "
        f"using {threads} thread(s)")
    return FieldMatrix.hstack(blocks)


def build_T_basic(st: Statement, points: list[TangentPoint],
                  modulus: FieldModulus|None=None,
                  max_entries: int=DEFAULT_MAX_BASIC_ENTRIES) -> FieldMatrix:
    """ [F_1 .. F_k | R] with explicit standard-basis columns for S_3(U_l). """
    modulus = modulus or FieldModulus()
    total_rows = monomials.dim_Sd(st.n, st.d)
    z_sets = [
        monomials.z_set(st.n, monomials.BlockSpec(l, st.b), st.d)
        for l in st.active_blocks]
    _, r_cols = matrix_shape(st)
    cols = r_cols + sum(len(z) for z in z_sets)
    if total_rows * cols > max_entries:
        raise SizeLimitError(
            f"build_T_basic({st}): {total_rows}x{cols} matrix exceeds the "
            f"{max_entries} entry ceiling")

    blocks = []
    for z in z_sets:
        f = np.zeros((total_rows, len(z)), dtype=np.int64)
        f[z.indices, np.arange(len(z))] = 1
        blocks.append(FieldMatrix(f, modulus))
    blocks.append(build_R(st, points, modulus))
    return FieldMatrix.hstack(blocks)


class VerdictStatus(enum.Enum):
    PROVEN_TRUE = "PROVEN_TRUE"
    UNKNOWN = "UNKNOWN"


@dataclasses.dataclass(frozen=True)
class Verdict:
    status: VerdictStatus
    rank: int
    expected: int
    base_dim: int

    @classmethod
    def from_counts(cls, rank: int, expected: int, base_dim: int) -> Self:
        status = VerdictStatus.UNKNOWN
        if base_dim + rank == expected:
            status = VerdictStatus.PROVEN_TRUE
        return cls(status, rank, expected, base_dim)

    @property
    def proven(self) -> bool:
        return self.status == VerdictStatus.PROVEN_TRUE


def annotations(st: Statement) -> list[str]:
    notes = []
    if not any(st.a) and geometry.known_exception(st.n, st.d, st.s):
        notes.append("known defective [CGG2002]")
    if st.d > geometry.CUBIC:
        notes.append(
            "exploratory: d >= 4 follows from the cubic case by reduction [BCGI]")
    return notes


@dataclasses.dataclass
class Certificate:
    seed: int
    prime: int
    statement: Statement
    points: list[TangentPoint]
    base_dim: int
    rank: int
    expected: int
    verdict: VerdictStatus
    times_ms: dict[str, int] = dataclasses.field(default_factory=dict)
    prng: str = XorshiftStream.NAME
    version: int = CERTIFICATE_VERSION

    def __repr__(self) -> str:
        return f"{self.__class__.__name__}({self.statement}, seed={self.seed}, {self.verdict.value})"

    @property
    def modulus(self) -> FieldModulus:
        return FieldModulus(self.prime)

    def to_dict(self) -> dict:
        st = self.statement
        return {
            "version": self.version,
            "seed": self.seed,
            "prime": self.prime,
            "n": st.n,
            "d": st.d,
            "s": st.s,
            "a": list(st.a),
            "block_width": st.b,
            "points": [
                {"l": list(p.l.coeffs), "m": list(p.m.coeffs), "block": p.block}
                for p in self.points],
            "base_dim": self.base_dim,
            "rank": self.rank,
            "expected": self.expected,
            "verdict": self.verdict.value,
            "times_ms": dict(self.times_ms),
            "prng": self.prng,
        }

    @classmethod
    def from_dict(cls, val: dict) -> Self:
        if not isinstance(val, dict):
            raise CertificateError(f"{cls.__name__}.from_dict() got non-dict: {type(val)}")

        required = [f for f in _CERTIFICATE_FIELDS if f not in ("times_ms", "prng")]
        missing = [f for f in required if f not in val]
        if missing:
            raise CertificateError(f"Certificate is missing fields: {missing}")
        unsupported = [k for k in val if k not in _CERTIFICATE_FIELDS]
        if unsupported:
            raise CertificateError(
                f"Certificate has unsupported fields {unsupported}. Supported "
                f"fields are: {_CERTIFICATE_FIELDS}")
        if val["version"] != CERTIFICATE_VERSION:
            raise CertificateError(
                f"Unsupported certificate version {val['version']}")

        try:
            a = [int(v) for v in val["a"]]
            if len(a) != 3:
                raise CertificateError(f"Field 'a' must hold 3 counts, got {a}")
            st = Statement(
                int(val["n"]), int(val["s"]), *a,
                d=int(val["d"]), b=int(val["block_width"]))
            points = [
                TangentPoint.from_vectors(
                    [int(v) for v in p["l"]], [int(v) for v in p["m"]],
                    int(p["block"]))
                for p in val["points"]]
            return cls(
                seed=int(val["seed"]), prime=int(val["prime"]),
                statement=st, points=points,
                base_dim=int(val["base_dim"]), rank=int(val["rank"]),
                expected=int(val["expected"]),
                verdict=VerdictStatus(val["verdict"]),
                times_ms={str(k): int(v) for k, v in val.get("times_ms", {}).items()},
                prng=str(val.get("prng", XorshiftStream.NAME)))
        except CertificateError:
            raise
        except (KeyError, TypeError, ValueError) as ex:
            raise CertificateError(f"Malformed certificate: {ex}") from ex

    def to_json(self) -> str:
        return json.dumps(self.to_dict()) + "\n"

    @classmethod
    def from_json(cls, text: str) -> Self:
        try:
            val = json.loads(text)
        except json.JSONDecodeError as ex:
            raise CertificateError(f"Certificate is not valid JSON: {ex}") from ex
        return cls.from_dict(val)

    def to_text(self) -> str:
        """ Renders the run log of the check that produced this certificate. """
        st = self.statement
        rows, cols = matrix_shape(st)
        counters = {}
        lines = [f"Using random seed: {self.seed}"]
        for point in self.points:
            j = counters.get(point.block, 0)
            counters[point.block] = j + 1
            suffix = f"{j}" if point.block == FREE else f"{point.block},{j}"
            lines.append(f"l_{suffix} = {utils.format_vector(point.l.coeffs)}")
            lines.append(f"m_{suffix} = {utils.format_vector(point.m.coeffs)}")

        times = {k: self.times_ms.get(k, 0) / 1000 for k in ("construct", "rank", "total")}
        outcome = "TRUE" if self.verdict == VerdictStatus.PROVEN_TRUE else "UNKNOWN"
        lines.extend([
            f"Constructed the {rows} x {cols} matrix R(Y) in {times['construct']:.3f}s.",
            f"Computed the rank of R(Y) over F_{self.prime} in {times['rank']:.3f}s.",
            f"Found {self.base_dim} + {self.rank} = {self.base_dim + self.rank} "
            f"vs. {self.expected} expected.",
            f"{st} is {outcome} ({st.log_label})",
        ])
        lines.extend(f"Note: {note}" for note in annotations(st))
        lines.append(f"Total computation took {times['total']:.3f}s.")
        return "\n".join(lines) + "\n"


def _verify_points(st: Statement, points: list[TangentPoint],
                   modulus: FieldModulus, threads: int) -> tuple[int, dict[str, int]]:
    rows = row_set(st)
    with utils.Stopwatch() as construct:
        r = build_R(st, points, modulus, rows=rows, threads=threads)
    with utils.Stopwatch() as ranking:
        rank = rank_mod_p(r)
    return rank, {"construct": construct.millis, "rank": ranking.millis}


def check(st: Statement, seed: int|None=None,
          modulus: FieldModulus|None=None, retries: int=DEFAULT_RETRIES,
          threads: int=1) -> tuple[Verdict, Certificate]:
    """ Runs the optimised algorithm, retrying with derived seeds on a rank
    deficiency. Returns the verdict of the last attempt. """
    modulus = modulus or FieldModulus()
    if seed is None:
        seed = default_seed()
    if not 0 <= seed <= MAX_SEED:
        raise ValueError(f"Seed must lie in [0, 2^64), got {seed}")
    if st.is_empty:
        raise geometry.StatementError(f"{st} has no points to check")

    base = geometry.base_dim(st)
    expected = geometry.expected_dim_W(st)

    verdict, cert = None, None
    for attempt in range(retries + 1):
        current_seed = attempt_seed(seed, attempt)
        with utils.Stopwatch() as total:
            points = sample_points(st, current_seed, modulus)
            rank, times = _verify_points(st, points, modulus, threads)
        times["total"] = total.millis

        verdict = Verdict.from_counts(rank, expected, base)
        cert = Certificate(
            seed=current_seed, prime=modulus.p, statement=st, points=points,
            base_dim=base, rank=rank, expected=expected,
            verdict=verdict.status, times_ms=times)
        LOG.info(
            f"check({st}): attempt {attempt} with seed {current_seed}: "
            f"{base} + {rank} vs. {expected} expected -> {verdict.status.value}")
        if verdict.proven:
            break

    return verdict, cert


def replay(cert: Certificate, modulus: FieldModulus|None=None,
           threads: int=1) -> Verdict:
    """ Recomputes the rank from the stored points, ignoring the seed. """
    try:
        cert_modulus = cert.modulus
    except ValueError as ex:
        raise CertificateError(f"Certificate prime is invalid: {ex}") from ex
    if modulus is not None and modulus != cert_modulus:
        raise CertificateError(
            f"Certificate prime {cert.prime} does not match requested {modulus.p}")

    st = cert.statement
    base = geometry.base_dim(st)
    expected = geometry.expected_dim_W(st)
    if (cert.base_dim, cert.expected) != (base, expected):
        raise CertificateError(
            f"Certificate for {st} stores base/expected "
            f"{cert.base_dim}/{cert.expected}, recomputed {base}/{expected}")

    try:
        rank, _ = _verify_points(st, cert.points, cert_modulus, threads)
    except geometry.StatementError as ex:
        raise CertificateError(f"Certificate points are invalid: {ex}") from ex

    if rank != cert.rank:
        raise ReplayMismatchError(
            f"Replay of {st} found rank {rank}, certificate stores {cert.rank}")
    verdict = Verdict.from_counts(rank, expected, base)
    if verdict.status != cert.verdict:
        raise ReplayMismatchError(
            f"Replay of {st} gives {verdict.status.value}, certificate "
            f"stores {cert.verdict.value}")
    return verdict


def basic_rank(cert: Certificate,
               max_entries: int=DEFAULT_MAX_BASIC_ENTRIES) -> int:
    """ Rank of the unoptimised [F_1 .. F_k | R] on the certificate's points,
    which must equal base_dim + rank R(Y). """
    m = build_T_basic(cert.statement, cert.points, cert.modulus, max_entries)
    return rank_mod_p(m)


class BaseCase(enum.Enum):
    I = "i"
    II = "ii"
    III = "iii"
    IV = "iv"


# Smallest n for which each statement family is defined, and the range of
# n each base-case suite covers.
FAMILY_MIN_N = {BaseCase.I: 71, BaseCase.II: 56, BaseCase.III: 32, BaseCase.IV: 8}
_SUITE_RANGES = {
    BaseCase.I: range(71, 72),
    BaseCase.II: range(56, 80),
    BaseCase.III: range(32, 56),
    BaseCase.IV: range(8, 32),
}
# Exponent of the predicted growth of build+rank time in n.
PREDICTED_EXPONENTS = {BaseCase.II: 4, BaseCase.III: 6, BaseCase.IV: 9}


def family_statement(case: BaseCase|str, n: int, i: int=1) -> Statement:
    """ The statement of the given family at dimension n:

      (i)   T(n, 0; 96, 96, 96)
      (ii)  T(n, 96; t(n-24), t(n-24), 0)
      (iii) T(n, t(n); s_i(n-24), 0, 0)
      (iv)  T(n, s_i(n); 0, 0, 0)
    """
    case = BaseCase(case)
    if n < FAMILY_MIN_N[case]:
        raise geometry.StatementError(
            f"Case ({case.value}) statements require n >= "
            f"{FAMILY_MIN_N[case]}, got {n=}")
    b = DEFAULT_BLOCK_WIDTH
    t = geometry.t
    match case:
        case BaseCase.I:
            return Statement(n, 0, 96, 96, 96, b=b)
        case BaseCase.II:
            return Statement(n, 96, t(n - 24), t(n - 24), 0, b=b)
        case BaseCase.III:
            return Statement(n, t(n), geometry.s_i(n - 24, i), 0, 0, b=b)
        case BaseCase.IV:
            return Statement(n, geometry.s_i(n, i), b=b)
        case other:
            raise ValueError(f"Unsupported base case: {other}")


def base_case_suite(case: BaseCase|str, i: int=1) -> list[Statement]:
    """ The base cases of the induction; cases (i) and (ii) ignore `i`. """
    case = BaseCase(case)
    return [family_statement(case, n, i) for n in _SUITE_RANGES[case]]


@dataclasses.dataclass
class ScalingSample:
    statement: Statement
    shape: tuple[int, int]
    seconds: float
    proven: bool

    @property
    def n(self) -> int:
        return self.statement.n

    def to_dict(self) -> dict:
        return {
            "statement": str(self.statement), "rows": self.shape[0],
            "cols": self.shape[1], "seconds": self.seconds,
            "verdict": (VerdictStatus.PROVEN_TRUE if self.proven else VerdictStatus.UNKNOWN).value}


@dataclasses.dataclass
class ScalingRun:
    """ Build+rank timings of one statement family over increasing n. """
    case: BaseCase
    samples: list[ScalingSample]

    @property
    def predicted_exponent(self) -> int|None:
        return PREDICTED_EXPONENTS.get(self.case)

    @property
    def slope(self) -> float:
        """ Least-squares slope of log(seconds) against log(n). """
        ns = sorted({sample.n for sample in self.samples})
        if len(ns) < 2:
            raise ValueError(
                f"Fitting a slope needs at least two distinct n, got {ns}")
        # NOTE: clamp so sub-microsecond timings stay finite under log.
        seconds = [max(sample.seconds, 1e-6) for sample in self.samples]
        return float(np.polyfit(
            np.log([sample.n for sample in self.samples]), np.log(seconds), 1)[0])

    @property
    def proven(self) -> bool:
        return all(sample.proven for sample in self.samples)

    def to_text(self) -> str:
        lines = [f"{'statement':<34} {'rows':>8} {'cols':>8} {'seconds':>10}"]
        for sample in self.samples:
            lines.append(
                f"{str(sample.statement):<34} {sample.shape[0]:>8} "
                f"{sample.shape[1]:>8} {sample.seconds:>10.3f}")
        line = f"Case ({self.case.value}) log-log slope: {self.slope:.2f}"
        if self.predicted_exponent is not None:
            line = f"{line} (predicted exponent {self.predicted_exponent})"
        lines.append(line)
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return {
            "case": self.case.value, "slope": self.slope,
            "predicted_exponent": self.predicted_exponent,
            "samples": [sample.to_dict() for sample in self.samples]}


def time_family(case: BaseCase|str, ns: Sequence[int], i: int=1,
                seed: int|None=None, modulus: FieldModulus|None=None,
                threads: int=1, repeats: int=1) -> ScalingRun:
    """ Times a single check (no retries) of the family's statement at each
    n, keeping the fastest of `repeats` runs. """
    case = BaseCase(case)
    if repeats < 1:
        raise ValueError(f"Repeat count must be positive, got {repeats}")
    modulus = modulus or FieldModulus()
    if seed is None:
        seed = default_seed()

    samples = []
    for n in ns:
        st = family_statement(case, n, i)
        best, proven = None, True
        for _ in range(repeats):
            with utils.Stopwatch() as watch:
                verdict, _ = check(st, seed, modulus, retries=0, threads=threads)
            proven = proven and verdict.proven
            best = watch.elapsed if best is None else min(best, watch.elapsed)
        samples.append(ScalingSample(st, matrix_shape(st), best, proven))
        LOG.info(f"time_family({case.value}): {st} took {best:.3f}s")
    return ScalingRun(case, samples)
