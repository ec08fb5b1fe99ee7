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

""" Exact arithmetic over prime fields and exact matrix ranks. """

import dataclasses
import fractions
import logging
import math
from typing import Iterable, Sequence
try:
    from typing import Self
except ImportError:  # Python < 3.11
    from typing_extensions import Self

import numpy as np


LOG = logging.getLogger(__name__)

DEFAULT_PRIME = 8191
MAX_PRIME_EXCLUSIVE = 1 << 31
DEFAULT_ORACLE_LIMIT = 500

# Deterministic Miller-Rabin witnesses for every n < 3_474_749_660_383.
_MILLER_RABIN_BASES = (2, 3, 5, 7, 11, 13)


class FieldError(ValueError):
    """ Raised on invalid field arithmetic or malformed matrices. """


class OracleSizeError(FieldError):
    """ Raised when a matrix exceeds the rational oracle's size bound. """


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    for small in _MILLER_RABIN_BASES:
        if n % small == 0:
            return n == small

    d, r = n - 1, 0
    while d % 2 == 0:
        d //= 2
        r += 1

    for base in _MILLER_RABIN_BASES:
        x = pow(base, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(r - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


@dataclasses.dataclass(frozen=True)
class FieldModulus:
    p: int = DEFAULT_PRIME

    def __post_init__(self):
        if not isinstance(self.p, int) or isinstance(self.p, bool):
            raise FieldError(f"Field modulus must be an integer, got {self.p!r}")
        if not 2 <= self.p < MAX_PRIME_EXCLUSIVE:
            raise FieldError(
                f"Field modulus must lie in [2, 2^31), got {self.p}")
        if not is_prime(self.p):
            raise FieldError(f"Field modulus {self.p} is not prime")

    def __str__(self) -> str:
        return f"F_{self.p}"

    def element(self, value: int) -> "FieldElement":
        return FieldElement(value % self.p, self)


def _inverse(x: int, p: int) -> int:
    """ Extended Euclid on (x, p); assumes 0 < x < p. """
    old_r, r = x, p
    old_s, s = 1, 0
    while r:
        q = old_r // r
        old_r, r = r, old_r - q * r
        old_s, s = s, old_s - q * s
    if old_r != 1:
        raise FieldError(f"no inverse for {x} modulo {p}")
    return old_s % p


@dataclasses.dataclass(frozen=True)
class FieldElement:
    value: int
    modulus: FieldModulus

    def __post_init__(self):
        if not 0 <= self.value < self.modulus.p:
            raise FieldError(
                f"Field element {self.value} not reduced modulo {self.modulus.p}")

    def _coerce(self, other: "FieldElement|int") -> int:
        if isinstance(other, FieldElement):
            if other.modulus != self.modulus:
                raise FieldError(
                    f"Mixed moduli in field arithmetic: {self.modulus} "
                    f"and {other.modulus}")
            return other.value
        return other

    def __add__(self, other):
        return self.modulus.element(self.value + self._coerce(other))

    def __sub__(self, other):
        return self.modulus.element(self.value - self._coerce(other))

    def __mul__(self, other):
        return self.modulus.element(self.value * self._coerce(other))

    def __neg__(self):
        return self.modulus.element(-self.value)

    def __int__(self) -> int:
        return self.value

    def __repr__(self) -> str:
        return f"{self.value} (mod {self.modulus.p})"


def fe_inv(x: FieldElement) -> FieldElement:
    if x.value == 0:
        raise FieldError(f"no inverse: {x} is zero")
    return FieldElement(_inverse(x.value, x.modulus.p), x.modulus)


class FieldMatrix():
    """ Dense, immutable matrix over Z_p stored as a row-major int64 array.

    Entries are always reduced, so products of two entries stay below
    p^2 < 2^62 and fit the int64 intermediates of the elimination.
    """

    def __init__(self, array: np.ndarray, modulus: FieldModulus):
        arr = np.asarray(array)
        if arr.ndim != 2:
            raise FieldError(
                f"{self.__class__.__name__} requires a 2-D array, got "
                f"shape {arr.shape}")
        arr = np.remainder(arr.astype(np.int64, copy=True), modulus.p)
        arr.setflags(write=False)
        self._array = arr
        self.modulus = modulus

    def __repr__(self) -> str:
        return f"{self.__class__.__name__}({self.rows}x{self.cols}, {self.modulus})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, FieldMatrix):
            return False
        return self.modulus == other.modulus and \
               np.array_equal(self._array, other._array)

    @classmethod
    def from_rows(
            cls, rows: Iterable[Sequence[int]],
            modulus: FieldModulus|None=None) -> Self:
        modulus = modulus or FieldModulus()
        rows = [list(r) for r in rows]
        if not rows:
            return cls(np.zeros((0, 0), dtype=np.int64), modulus)
        widths = {len(r) for r in rows}
        if len(widths) != 1:
            raise FieldError(f"Ragged rows with widths {sorted(widths)}")
        # NOTE: reduce as Python ints first so big integers never overflow.
        reduced = [[int(v) % modulus.p for v in r] for r in rows]
        return cls(np.array(reduced, dtype=np.int64), modulus)

    @classmethod
    def zeros(cls, rows: int, cols: int, modulus: FieldModulus|None=None) -> Self:
        return cls(np.zeros((rows, cols), dtype=np.int64), modulus or FieldModulus())

    @classmethod
    def identity(cls, size: int, modulus: FieldModulus|None=None) -> Self:
        return cls(np.eye(size, dtype=np.int64), modulus or FieldModulus())

    @classmethod
    def hstack(cls, blocks: Sequence["FieldMatrix"], rows: int|None=None,
               modulus: FieldModulus|None=None) -> Self:
        if not blocks:
            if rows is None:
                raise FieldError("hstack() of no blocks requires a row count")
            return cls.zeros(rows, 0, modulus)
        moduli = {b.modulus for b in blocks}
        if len(moduli) != 1:
            raise FieldError(f"hstack() over mixed moduli: {moduli}")
        return cls(np.hstack([b.array for b in blocks]), blocks[0].modulus)

    @property
    def array(self) -> np.ndarray:
        return self._array

    @property
    def rows(self) -> int:
        return self._array.shape[0]

    @property
    def cols(self) -> int:
        return self._array.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows, self.cols)

    def to_rows(self) -> list[list[int]]:
        return self._array.tolist()

    def take_rows(self, indices: Sequence[int]|np.ndarray) -> "FieldMatrix":
        return FieldMatrix(self._array[np.asarray(indices, dtype=np.intp)], self.modulus)

    def with_rows_zeroed(self, indices: Sequence[int]|np.ndarray) -> "FieldMatrix":
        arr = self._array.copy()
        arr[np.asarray(indices, dtype=np.intp)] = 0
        return FieldMatrix(arr, self.modulus)


def rank_mod_p(m: FieldMatrix) -> int:
    """ Rank over Z_p by Gaussian elimination.

    Pivots are the first nonzero entry of each column scanning rows in
    order, so the elimination sequence (and hence the result) only depends
    on the input entries.
    """
    p = m.modulus.p
    work = np.array(m.array, dtype=np.int64, copy=True)
    rows, cols = work.shape

    rank = 0
    for col in range(cols):
        if rank == rows:
            break

        nonzero = np.flatnonzero(work[rank:, col])
        if not nonzero.size:
            continue

        pivot = rank + int(nonzero[0])
        if pivot != rank:
            work[[rank, pivot]] = work[[pivot, rank]]

        inv = _inverse(int(work[rank, col]), p)
        pivot_row = work[rank, col:]
        np.remainder(pivot_row * inv, p, out=pivot_row)

        if rank + 1 < rows:
            trailing = work[rank + 1:, col:]
            factors = trailing[:, 0].copy()
            if factors.any():
                trailing -= np.outer(factors, pivot_row)
                np.remainder(trailing, p, out=trailing)
        rank += 1

    return rank


class RationalMatrix():
    """ Integer matrix used as an exact rank oracle over Q.

    Rows given as fractions are scaled by the lcm of their denominators,
    which leaves the rank unchanged.
    """

    def __init__(self, rows: Iterable[Sequence[int|fractions.Fraction]]):
        entries = []
        for row in rows:
            row = [fractions.Fraction(v) for v in row]
            scale = math.lcm(*(v.denominator for v in row)) if row else 1
            entries.append(tuple(int(v * scale) for v in row))

        widths = {len(r) for r in entries}
        if len(widths) > 1:
            raise FieldError(f"Ragged rows with widths {sorted(widths)}")

        self.entries: tuple[tuple[int, ...], ...] = tuple(entries)
        self.rows = len(entries)
        self.cols = widths.pop() if widths else 0

    def __repr__(self) -> str:
        return f"{self.__class__.__name__}({self.rows}x{self.cols})"

    @classmethod
    def from_field_matrix(cls, m: FieldMatrix) -> Self:
        """ Lifts the reduced representatives of a Z_p matrix to Z. """
        return cls(m.to_rows())

    def reduce(self, modulus: FieldModulus) -> FieldMatrix:
        if not self.rows:
            return FieldMatrix.zeros(0, self.cols, modulus)
        return FieldMatrix.from_rows(self.entries, modulus)


def rank_rational(m: RationalMatrix, limit: int=DEFAULT_ORACLE_LIMIT) -> int:
    """ Exact rank over Q by Bareiss fraction-free elimination. """
    if m.rows > limit or m.cols > limit:
        raise OracleSizeError(
            f"oracle size limit: {m.rows}x{m.cols} exceeds {limit}x{limit}")

    work = [list(r) for r in m.entries]
    rows, cols = m.rows, m.cols

    rank = 0
    previous = 1
    for col in range(cols):
        if rank == rows:
            break

        pivot_row = next(
            (i for i in range(rank, rows) if work[i][col] != 0), None)
        if pivot_row is None:
            continue
        if pivot_row != rank:
            work[rank], work[pivot_row] = work[pivot_row], work[rank]

        pivot = work[rank][col]
        top = work[rank]
        for i in range(rank + 1, rows):
            row = work[i]
            multiplier = row[col]
            for k in range(col + 1, cols):
                # NOTE: exact division; every entry is a minor of the input.
                row[k] = (pivot * row[k] - multiplier * top[k]) // previous
            row[col] = 0
        previous = pivot
        rank += 1

    return rank
