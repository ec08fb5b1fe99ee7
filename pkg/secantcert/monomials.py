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

""" Degree-d monomials in lex order and the row-index sets built on them.

Monomials x_{i_1}...x_{i_d} are stored as nondecreasing index tuples and
numbered 0-based in the lex-ordered sequence x_0^d, x_0^{d-1} x_1, ...,
x_n^d, which is exactly the order `itertools.combinations_with_replacement`
yields them in.
"""

import dataclasses
import functools
import itertools
import logging
import math
from typing import Iterable, Iterator, Sequence

import numpy as np

from secantcert.ffield import FieldModulus


LOG = logging.getLogger(__name__)

DEFAULT_BLOCK_WIDTH = 24
MAX_BLOCKS = 3
MAX_PRODUCT_DEGREE = 6

MonomialIndex = int


class MonomialError(ValueError):
    """ Raised on invalid monomials, indices or block layouts. """


def dim_Sd(n: int, d: int) -> int:
    """ N(n, d) = binom(n+d, d), with the convention N(m, d) = 0 for m < 0. """
    if d < 0:
        raise MonomialError(f"Degree must be nonnegative, got {d=}")
    if n < 0:
        return 0
    return math.comb(n + d, d)


@dataclasses.dataclass(frozen=True)
class Monomial:
    indices: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "indices", tuple(int(i) for i in self.indices))
        if any(a > b for a, b in itertools.pairwise(self.indices)):
            raise MonomialError(
                f"Monomial indices must be nondecreasing, got {self.indices}")
        if self.indices and self.indices[0] < 0:
            raise MonomialError(f"Negative variable index in {self.indices}")

    @property
    def degree(self) -> int:
        return len(self.indices)

    def check(self, n: int):
        if self.indices and self.indices[-1] > n:
            raise MonomialError(
                f"Monomial {self} uses variables beyond x_{n}")

    def __str__(self) -> str:
        if not self.indices:
            return "1"
        return "".join(f"x{i}" for i in self.indices)


def index_of(m: Monomial, n: int) -> MonomialIndex:
    """ Lex rank of `m` among the degree-d monomials in x_0..x_n.

    For each position t, counts the monomials agreeing on the first t
    indices but with a smaller index at t; each such prefix leaves a free
    nondecreasing tail of length d-t-1 over [v, n].
    """
    m.check(n)
    d = m.degree
    rank = 0
    low = 0
    for t, value in enumerate(m.indices):
        tail = d - t - 1
        for v in range(low, value):
            rank += math.comb(n - v + tail, tail)
        low = value
    return rank


def monomial_of(z: MonomialIndex, n: int, d: int) -> Monomial:
    total = dim_Sd(n, d)
    if not 0 <= z < total:
        raise MonomialError(
            f"Monomial index {z} out of range [0, {total}) for {n=}, {d=}")

    indices = []
    remaining = z
    low = 0
    for t in range(d):
        tail = d - t - 1
        value = low
        while True:
            count = math.comb(n - value + tail, tail)
            if remaining < count:
                break
            remaining -= count
            value += 1
        indices.append(value)
        low = value
    return Monomial(tuple(indices))


def iter_monomials(n: int, d: int) -> Iterator[Monomial]:
    for indices in itertools.combinations_with_replacement(range(n + 1), d):
        yield Monomial(indices)


@functools.lru_cache(maxsize=32)
def monomial_table(n: int, d: int) -> np.ndarray:
    """ Read-only (N(n,d), d) array whose z-th row holds the indices of the
    z-th monomial. """
    if n < 0 or d < 1:
        raise MonomialError(f"No monomial table for {n=}, {d=}")
    table = np.fromiter(
        itertools.chain.from_iterable(
            itertools.combinations_with_replacement(range(n + 1), d)),
        dtype=np.intp, count=dim_Sd(n, d) * d).reshape(-1, d)
    table.setflags(write=False)
    return table


@functools.lru_cache(maxsize=32)
def _distinct_assignments(n: int, d: int) -> tuple[tuple[tuple[int, ...], np.ndarray], ...]:
    """ For every permutation of the d positions, the mask of monomials for
    which it is the canonical representative of its distinct assignment.

    Positions holding the same variable are interchangeable; a permutation
    is kept only if it hands equal variables to the forms in increasing
    position order.
    """
    table = monomial_table(n, d)
    res = []
    for perm in itertools.permutations(range(d)):
        # inverse[a] = the form receiving position a
        inverse = [0] * d
        for form, position in enumerate(perm):
            inverse[position] = form

        mask = np.ones(table.shape[0], dtype=bool)
        for a, b in itertools.combinations(range(d), 2):
            if inverse[a] > inverse[b]:
                mask &= table[:, a] != table[:, b]
        mask.setflags(write=False)
        res.append((perm, mask))
    return tuple(res)


def expand_product(
        forms: Sequence[Sequence[int]]|np.ndarray, n: int,
        modulus: FieldModulus|None=None) -> np.ndarray:
    """ Coefficient vector of the product of d linear forms in the lex
    monomial basis, reduced modulo p.

    The entry of x_{i_1}...x_{i_d} sums, over every distinct assignment of
    the multiset {i_1, ..., i_d} to the d forms, the product of the
    assigned coefficients.
    """
    modulus = modulus or FieldModulus()
    p = modulus.p
    coeffs = np.remainder(np.asarray(forms, dtype=np.int64), p)
    if coeffs.ndim != 2 or coeffs.shape[1] != n + 1:
        raise MonomialError(
            f"expand_product() requires forms with {n + 1} coefficients, "
            f"got array of shape {coeffs.shape}")
    d = coeffs.shape[0]
    if not 1 <= d <= MAX_PRODUCT_DEGREE:
        raise MonomialError(
            f"expand_product() supports 1 <= d <= {MAX_PRODUCT_DEGREE}, got {d=}")

    table = monomial_table(n, d)
    total = np.zeros(table.shape[0], dtype=np.int64)
    for perm, mask in _distinct_assignments(n, d):
        term = coeffs[0, table[:, perm[0]]]
        for form in range(1, d):
            term = np.remainder(term * coeffs[form, table[:, perm[form]]], p)
        total += np.where(mask, term, 0)
        np.remainder(total, p, out=total)
    return total


def _lex_keys(rows: np.ndarray, n: int) -> np.ndarray:
    # Base n+1 digits compare exactly like the index tuples do.
    keys = np.zeros(rows.shape[:-1], dtype=np.int64)
    for j in range(rows.shape[-1]):
        keys = keys * (n + 1) + rows[..., j]
    return keys


@functools.lru_cache(maxsize=32)
def multiplication_table(n: int, d: int) -> np.ndarray:
    """ Read-only (N(n, d-1), n+1) array whose entry [u, t] is the index of
    the degree-d monomial (u-th degree d-1 monomial) * x_t. """
    if d < 2:
        raise MonomialError(f"multiplication_table() requires d >= 2, got {d=}")
    lower = monomial_table(n, d - 1)
    count = lower.shape[0]
    variables = np.broadcast_to(
        np.arange(n + 1, dtype=np.intp)[None, :, None], (count, n + 1, 1))
    stacked = np.concatenate(
        [np.broadcast_to(lower[:, None, :], (count, n + 1, d - 1)), variables],
        axis=2)
    products = np.sort(stacked, axis=2)

    keys = _lex_keys(monomial_table(n, d), n)
    table = np.searchsorted(keys, _lex_keys(products, n)).astype(np.intp)
    table.setflags(write=False)
    return table


@dataclasses.dataclass(frozen=True)
class BlockSpec:
    """ Block B_l = {x_{b(l-1)}, ..., x_{bl-1}} removed to form U_l. """
    block: int
    width: int = DEFAULT_BLOCK_WIDTH

    def __post_init__(self):
        if self.block not in range(1, MAX_BLOCKS + 1):
            raise MonomialError(
                f"Block id must be one of 1..{MAX_BLOCKS}, got {self.block}")
        if self.width < 1:
            raise MonomialError(f"Block width must be positive, got {self.width}")

    @property
    def start(self) -> int:
        return self.width * (self.block - 1)

    @property
    def stop(self) -> int:
        return self.width * self.block

    @property
    def indices(self) -> range:
        return range(self.start, self.stop)

    def check(self, n: int):
        """ The block must fit inside x_0..x_n and leave U_l at least two
        dimensional. """
        if self.stop > n + 1:
            raise MonomialError(
                f"Block B_{self.block} = x_{self.start}..x_{self.stop - 1} "
                f"does not fit in x_0..x_{n} (needs {self.block}*{self.width} "
                f"<= {n + 1})")
        if n + 1 - self.width < 2:
            raise MonomialError(
                f"Removing {self.width} variables from x_0..x_{n} leaves "
                f"U_{self.block} too small for tangent points")


class RowIndexSet():
    """ Strictly increasing, 0-based set of retained row indices. """

    def __init__(self, indices: Iterable[int]|np.ndarray, total: int):
        arr = np.array(
            list(indices) if not isinstance(indices, np.ndarray) else indices,
            dtype=np.intp)
        if arr.ndim != 1:
            raise MonomialError(f"Row index set must be 1-D, got {arr.shape}")
        if arr.size and (np.any(np.diff(arr) <= 0) or arr[0] < 0 or arr[-1] >= total):
            raise MonomialError(
                f"Row indices must be strictly increasing within [0, {total})")
        arr.setflags(write=False)
        self.indices = arr
        self.total = total

    def __repr__(self) -> str:
        return f"{self.__class__.__name__}({len(self)} of {self.total})"

    def __len__(self) -> int:
        return int(self.indices.size)

    def __iter__(self) -> Iterator[int]:
        return (int(i) for i in self.indices)

    def __contains__(self, z: int) -> bool:
        pos = int(np.searchsorted(self.indices, z))
        return pos < self.indices.size and int(self.indices[pos]) == z

    def one_based(self) -> list[int]:
        return [int(i) + 1 for i in self.indices]


def _avoids_block(table: np.ndarray, block: BlockSpec) -> np.ndarray:
    return np.all((table < block.start) | (table >= block.stop), axis=1)


def z_set(n: int, block: BlockSpec, d: int=3) -> RowIndexSet:
    """ Indices of the monomials whose variables all avoid B_l, i.e. the
    standard-basis columns spanning S_d(U_l). """
    block.check(n)
    table = monomial_table(n, d)
    return RowIndexSet(np.flatnonzero(_avoids_block(table, block)), table.shape[0])


def y_set(n: int, active_blocks: Iterable[int], b: int=DEFAULT_BLOCK_WIDTH,
          d: int=3) -> RowIndexSet:
    """ Complement of the union of Z_l over the active blocks. """
    table = monomial_table(n, d)
    covered = np.zeros(table.shape[0], dtype=bool)
    for l in sorted(set(active_blocks)):
        block = BlockSpec(l, b)
        block.check(n)
        covered |= _avoids_block(table, block)
    return RowIndexSet(np.flatnonzero(~covered), table.shape[0])


def union_dim(n: int, k: int, b: int=DEFAULT_BLOCK_WIDTH, d: int=3) -> int:
    """ dim (S_d(U_1) + ... + S_d(U_k)) by inclusion-exclusion. """
    if not 0 <= k <= MAX_BLOCKS:
        raise MonomialError(f"Block count must lie in 0..{MAX_BLOCKS}, got {k=}")
    if k * b > n + 1:
        raise MonomialError(f"{k} blocks of width {b} do not fit in x_0..x_{n}")
    return sum(
        (-1) ** (j - 1) * math.comb(k, j) * dim_Sd(n - b * j, d)
        for j in range(1, k + 1))
