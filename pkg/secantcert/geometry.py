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

""" Statements about secant varieties of tangential varieties and the
dimension counts attached to them.

All dimensions are affine (dimensions of cones); N(n) stands for
N(n, 3) = binom(n+3, 3).
"""

import dataclasses
import enum
import logging
import math
import re
from typing import Sequence
try:
    from typing import Self
except ImportError:  # Python < 3.11
    from typing_extensions import Self

import numpy as np

from secantcert import monomials
from secantcert.ffield import FieldMatrix, FieldModulus, rank_mod_p
from secantcert.monomials import BlockSpec, DEFAULT_BLOCK_WIDTH


LOG = logging.getLogger(__name__)

# Degree the constrained statements and closed-form sequences are defined for.
CUBIC = 3
FREE = 0

_STATEMENT_REGEX = re.compile(
    r"^\s*T\s*\(\s*(\d+)\s*,\s*(\d+)\s*;\s*(\d+)\s*"
    r"(?:,\s*(\d+)\s*,\s*(\d+)\s*)?\)\s*$")


class StatementError(ValueError):
    """ Raised on invalid statements or formula arguments. """


class DegeneratePointError(StatementError):
    """ Raised when l and m of a tangent point are proportional. """


class AbundanceClass(enum.Enum):
    SUBABUNDANT = "subabundant"
    SUPERABUNDANT = "superabundant"
    EQUIABUNDANT = "equiabundant"


def N(n: int) -> int:
    return monomials.dim_Sd(n, CUBIC)


@dataclasses.dataclass(frozen=True)
class Statement:
    """ T(n, s; a1, a2, a3): s free points plus a_l points on U_l, together
    with S_3(U_l) for every nonzero a_l, span a subspace of the expected
    dimension. For d != 3 only free points are allowed and the statement
    reads T(n, d; s).
    """
    n: int
    s: int
    a1: int = 0
    a2: int = 0
    a3: int = 0
    d: int = CUBIC
    b: int = DEFAULT_BLOCK_WIDTH

    def __post_init__(self):
        if self.n < 1:
            raise StatementError(f"Ambient dimension must be >= 1, got n={self.n}")
        if self.d < 2:
            raise StatementError(f"Degree must be >= 2, got d={self.d}")
        if min(self.s, *self.a) < 0:
            raise StatementError(f"Point counts must be nonnegative in {self!r}")
        if self.d != CUBIC and any(self.a):
            raise StatementError(
                f"Block-constrained points require d = {CUBIC}, got d={self.d}")
        for l in self.active_blocks:
            try:
                BlockSpec(l, self.b).check(self.n)
            except monomials.MonomialError as ex:
                raise StatementError(
                    f"Invalid statement {self}: {ex}") from ex

    @property
    def a(self) -> tuple[int, int, int]:
        return (self.a1, self.a2, self.a3)

    @property
    def active_blocks(self) -> tuple[int, ...]:
        return tuple(l for l, count in enumerate(self.a, start=1) if count)

    @property
    def k(self) -> int:
        return len(self.active_blocks)

    @property
    def point_count(self) -> int:
        return self.s + sum(self.a)

    @property
    def is_empty(self) -> bool:
        return self.point_count == 0

    @property
    def log_label(self) -> str:
        """ Label used by the run log: the minimum's first item is active. """
        if _first_term(self) <= monomials.dim_Sd(self.n, self.d):
            return "SUBABUNDANT"
        return "SUPERABUNDANT"

    @property
    def slug(self) -> str:
        if self.d == CUBIC:
            res = f"T_{self.n}_{self.s}_{self.a1}_{self.a2}_{self.a3}"
        else:
            res = f"T_{self.n}_d{self.d}_{self.s}"
        if self.b != DEFAULT_BLOCK_WIDTH:
            res = f"{res}_b{self.b}"
        return res

    def __str__(self) -> str:
        if self.d == CUBIC:
            return f"T({self.n}, {self.s}; {self.a1}, {self.a2}, {self.a3})"
        return f"T({self.n}, {self.d}; {self.s})"

    @classmethod
    def parse(cls, text: str, b: int=DEFAULT_BLOCK_WIDTH) -> Self:
        """ Parses "T(n, s; a1, a2, a3)" (d = 3) or "T(n, d; s)". """
        match = _STATEMENT_REGEX.match(text)
        if not match:
            raise StatementError(
                f"Cannot parse statement '{text}'. Expected 'T(n, s; a1, a2, a3)' "
                "or 'T(n, d; s)'.")
        first, second, third, a2, a3 = match.groups()
        if a2 is None:
            return cls(int(first), int(third), d=int(second), b=b)
        return cls(int(first), int(second), int(third), int(a2), int(a3), b=b)


def _first_term(st: Statement) -> int:
    """ First item of the minimum defining the expected dimension. """
    base = monomials.union_dim(st.n, st.k, st.b) if st.k else 0
    return base + 2 * st.b * sum(st.a) + (2 * st.n + 1) * st.s


def expected_dim_secant(n: int, d: int, s: int) -> int:
    if n < 1 or d < 2 or s < 1:
        raise StatementError(f"expected_dim_secant() requires n>=1, d>=2, s>=1: {n=} {d=} {s=}")
    return min((2 * n + 1) * s, monomials.dim_Sd(n, d))


def expected_dim_W(st: Statement) -> int:
    return min(_first_term(st), monomials.dim_Sd(st.n, st.d))


def base_dim(st: Statement) -> int:
    """ dim of the sum of S_3(U_l) over the active blocks. """
    if not st.k:
        return 0
    return monomials.union_dim(st.n, st.k, st.b)


def classify(st: Statement) -> AbundanceClass:
    first = _first_term(st)
    total = monomials.dim_Sd(st.n, st.d)
    if first == total:
        return AbundanceClass.EQUIABUNDANT
    if first < total:
        return AbundanceClass.SUBABUNDANT
    return AbundanceClass.SUPERABUNDANT


def _check_formula_domain(name: str, n: int, minimum: int):
    if n < minimum:
        raise StatementError(
            f"{name}(n) is only defined for n >= {minimum}, got {n=}")


def s1(n: int) -> int:
    """ Largest s for which T(n, 3; s) is subabundant. """
    _check_formula_domain("s1", n, 8)
    k, r = divmod(n, 24)
    return 48 * k * k + (11 + 4 * r) * k + (4 * r * r + 22 * r + 33) // 48


def s2(n: int) -> int:
    """ Smallest s for which T(n, 3; s) is superabundant. """
    _check_formula_domain("s2", n, 8)
    return s1(n) + 1


def s_i(n: int, i: int) -> int:
    match i:
        case 1:
            return s1(n)
        case 2:
            return s2(n)
        case other:
            raise StatementError(f"Principal index must be 1 or 2, got {other}")


def t(n: int) -> int:
    _check_formula_domain("t", n, 32)
    return 4 * n - 37


def c(n: int) -> int:
    """ Expected codimension of W(n, t(n); s_1(n-24), 0, 0). """
    _check_formula_domain("c", n, 32)
    r = n % 24
    return (4 * r * r + 22 * r + 33) % 48


def known_exception(n: int, d: int, s: int) -> bool:
    """ The defective cases: d = 2 with s >= 2 and 2s <= n, and d = 3 with
    s = n in {2, 3, 4}.

    For d = 2 the s-th secant variety is the locus of quadrics of rank at
    most 2s, which fills S_2 only once 2s >= n + 1.
    """
    if d == 2:
        return s >= 2 and 2 * s <= n
    if d == 3:
        return s == n and n in (2, 3, 4)
    return False


def generic_chow_waring_rank_d_minus_1_1(n: int, d: int) -> int:
    if n < 1 or d < 2:
        raise StatementError(f"Generic rank requires n>=1 and d>=2: {n=} {d=}")
    s = math.ceil(monomials.dim_Sd(n, d) / (2 * n + 1))
    if known_exception(n, d, s):
        if d == 2:
            return 1 + n // 2
        return s + 1
    return s


def principal_statements(n: int, b: int=DEFAULT_BLOCK_WIDTH) -> tuple[Statement, Statement]:
    """ The (subabundant, superabundant) statements whose truth settles
    every s by monotonicity.

    For n >= 8 these are T(n, 3; s_1(n)) and T(n, 3; s_2(n)). Below that the
    bounds are computed directly and the exceptional s = n is stepped over,
    so both entries coincide for the equiabundant T(7, 3; 8).
    """
    if n >= 8:
        return (Statement(n, s1(n), b=b), Statement(n, s2(n), b=b))

    low, rem = divmod(N(n), 2 * n + 1)
    high = low + (1 if rem else 0)
    while low > 1 and known_exception(n, CUBIC, low):
        low -= 1
    while known_exception(n, CUBIC, high):
        high += 1
    return (Statement(n, max(low, 1), b=b), Statement(n, high, b=b))


@dataclasses.dataclass(frozen=True)
class LinearForm:
    coeffs: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(int(v) for v in self.coeffs))

    def __len__(self) -> int:
        return len(self.coeffs)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.coeffs, dtype=np.int64)


@dataclasses.dataclass(frozen=True)
class TangentPoint:
    """ The point [l^{d-1} m] of the tangential variety; `block` is 0 for a
    free point or the id l of the subspace U_l it is constrained to. """
    l: LinearForm
    m: LinearForm
    block: int = FREE

    @classmethod
    def from_vectors(cls, l: Sequence[int], m: Sequence[int], block: int=FREE) -> Self:
        return cls(LinearForm(tuple(l)), LinearForm(tuple(m)), block)

    def check(self, n: int, b: int=DEFAULT_BLOCK_WIDTH,
              modulus: FieldModulus|None=None):
        modulus = modulus or FieldModulus()
        if len(self.l) != n + 1 or len(self.m) != n + 1:
            raise StatementError(
                f"Tangent point forms must have {n + 1} coefficients, got "
                f"{len(self.l)} and {len(self.m)}")
        if any(not 0 <= v < modulus.p for v in self.l.coeffs + self.m.coeffs):
            raise StatementError(f"Tangent point coefficients not reduced mod {modulus.p}")
        if self.block != FREE:
            spec = BlockSpec(self.block, b)
            spec.check(n)
            if any(self.l.coeffs[i] or self.m.coeffs[i] for i in spec.indices):
                raise StatementError(
                    f"Point constrained to U_{self.block} has nonzero "
                    f"coefficients on x_{spec.start}..x_{spec.stop - 1}")
        if is_degenerate(self.l, self.m, modulus):
            raise DegeneratePointError(
                "degenerate point: l and m are proportional")


def is_degenerate(l: LinearForm, m: LinearForm, modulus: FieldModulus) -> bool:
    pair = FieldMatrix.from_rows([l.coeffs, m.coeffs], modulus)
    return rank_mod_p(pair) < 2


def tangent_columns(
        pt: TangentPoint, n: int, d: int=CUBIC, b: int=DEFAULT_BLOCK_WIDTH,
        modulus: FieldModulus|None=None,
        rows: monomials.RowIndexSet|None=None) -> FieldMatrix:
    """ Columns nu_d(l^{d-1} x_t) followed by nu_d(l^{d-2} m x_t).

    Free points range t over 0..n and span the affine tangent cone
    l^{d-1}U + l^{d-2}mU. Points on U_l range t over B_l only, which spans
    the same cone modulo S_3(U_l).

    Both heads are expanded once in degree d-1; multiplying by x_t only
    relabels monomials, so each column is a scatter of the head. When
    `rows` is given, only those rows are produced, in their order.
    """
    modulus = modulus or FieldModulus()
    pt.check(n, b=b, modulus=modulus)

    variables = list(range(n + 1))
    if pt.block != FREE:
        variables = list(BlockSpec(pt.block, b).indices)

    l = pt.l.as_array()
    m = pt.m.as_array()
    heads = [
        monomials.expand_product(np.vstack([l] * (d - 1)), n, modulus),
        monomials.expand_product(np.vstack([l] * (d - 2) + [m]), n, modulus),
    ]
    shift = monomials.multiplication_table(n, d)

    total = monomials.dim_Sd(n, d)
    height = total
    if rows is not None:
        if rows.total != total:
            raise StatementError(
                f"Row set over {rows.total} monomials used with N={total}")
        position = np.full(total, -1, dtype=np.intp)
        position[rows.indices] = np.arange(len(rows))
        shift = position[shift]
        height = len(rows)

    width = len(variables)
    columns = np.zeros((height, 2 * width), dtype=np.int64)
    for h, head in enumerate(heads):
        for j, var in enumerate(variables):
            target = shift[:, var]
            kept = target >= 0
            columns[target[kept], h * width + j] = head[kept]
    return FieldMatrix(columns, modulus)
