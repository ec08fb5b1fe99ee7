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

import collections
import itertools
import math

import numpy as np
import pytest

from secantcert import monomials
from secantcert.ffield import FieldModulus
from secantcert.monomials import BlockSpec, Monomial, MonomialError, RowIndexSet


def _naive_product(forms: list[list[int]], n: int, p: int) -> list[int]:
    """ Multiplies the forms as polynomials stored as {sorted indices: coeff}. """
    poly = {(): 1}
    for form in forms:
        res = collections.defaultdict(int)
        for mono, coeff in poly.items():
            for var, c in enumerate(form):
                if c:
                    res[tuple(sorted(mono + (var,)))] += coeff * c
        poly = res
    return [
        poly.get(m.indices, 0) % p
        for m in monomials.iter_monomials(n, len(forms))]


@pytest.mark.parametrize("n, d, expected", [
    (7, 3, 120), (8, 3, 165), (79, 3, 88560), (2, 3, 10), (-1, 3, 0), (-24, 3, 0),
    (5, 2, 21), (0, 3, 1),
])
def test_dim_Sd(n, d, expected):
    assert monomials.dim_Sd(n, d) == expected


def test_index_round_trip_exhaustive():
    for n in range(0, 11):
        for d in range(1, 5):
            for z in range(monomials.dim_Sd(n, d)):
                assert monomials.index_of(monomials.monomial_of(z, n, d), n) == z


def test_lex_order_matches_enumeration():
    for n, d in [(3, 3), (5, 2), (4, 4)]:
        for z, m in enumerate(monomials.iter_monomials(n, d)):
            assert monomials.index_of(m, n) == z
            assert tuple(monomials.monomial_table(n, d)[z]) == m.indices


@pytest.mark.parametrize("indices, n, expected", [
    ((0, 0, 0), 7, 0),
    ((0, 0, 1), 7, 1),
    ((0, 0, 7), 7, 7),
    ((0, 1, 1), 7, 8),
    ((7, 7, 7), 7, 119),
])
def test_index_of_examples(indices, n, expected):
    assert monomials.index_of(Monomial(indices), n) == expected


def test_invalid_monomials():
    with pytest.raises(MonomialError):
        Monomial((2, 1, 3))
    with pytest.raises(MonomialError):
        monomials.index_of(Monomial((0, 1, 8)), 7)
    with pytest.raises(MonomialError):
        monomials.monomial_of(120, 7, 3)
    with pytest.raises(MonomialError):
        monomials.monomial_of(-1, 7, 3)


def test_monomial_table_is_readonly():
    table = monomials.monomial_table(4, 3)
    assert table.shape == (35, 3)
    assert not table.flags.writeable


def test_expand_product_of_variables():
    n = 3
    identity = np.eye(n + 1, dtype=np.int64)
    res = monomials.expand_product([identity[0], identity[0], identity[1]], n)
    assert res[1] == 1
    assert np.count_nonzero(res) == 1


def test_expand_product_matches_naive_multiplication(rng):
    p = 8191
    for n in range(1, 6):
        for d in range(1, 5):
            forms = rng.integers(0, p, size=(d, n + 1))
            forms[:, rng.integers(0, n + 1)] = 0
            expected = _naive_product(forms.tolist(), n, p)
            res = monomials.expand_product(forms, n, FieldModulus(p))
            assert res.tolist() == expected


def test_expand_product_rejects_bad_shapes():
    with pytest.raises(MonomialError):
        monomials.expand_product([[1, 2, 3]], 3)
    with pytest.raises(MonomialError):
        monomials.expand_product([[1, 2]] * 7, 1)


def test_multiplication_table():
    for n, d in [(3, 3), (6, 3), (4, 2)]:
        table = monomials.multiplication_table(n, d)
        assert table.shape == (monomials.dim_Sd(n, d - 1), n + 1)
        for u, lower in enumerate(monomials.iter_monomials(n, d - 1)):
            for t in range(n + 1):
                product = monomials.monomial_of(int(table[u, t]), n, d)
                assert product.indices == tuple(sorted(lower.indices + (t,)))


def test_block_spec():
    block = BlockSpec(2, 24)
    assert (block.start, block.stop) == (24, 48)
    assert list(block.indices) == list(range(24, 48))
    block.check(47)
    with pytest.raises(MonomialError):
        block.check(46)
    with pytest.raises(MonomialError):
        BlockSpec(4)
    with pytest.raises(MonomialError):
        BlockSpec(1, 24).check(24)


def test_z_set_example():
    z = monomials.z_set(2, BlockSpec(1, 1))
    assert len(z) == 4
    assert [monomials.monomial_of(i, 2, 3).indices for i in z] == [
        (1, 1, 1), (1, 1, 2), (1, 2, 2), (2, 2, 2)]


def test_row_index_set():
    rows = RowIndexSet([1, 4, 5], 10)
    assert len(rows) == 3
    assert 4 in rows and 3 not in rows
    assert rows.one_based() == [2, 5, 6]
    with pytest.raises(MonomialError):
        RowIndexSet([3, 2], 10)
    with pytest.raises(MonomialError):
        RowIndexSet([10], 10)


def test_union_dim_matches_exhaustive_count():
    for n in range(1, 13):
        for b in range(1, 4):
            for k in range(0, 4):
                if k * b > n + 1 or n + 1 - b < 2:
                    continue
                blocks = [BlockSpec(l, b) for l in range(1, k + 1)]
                covered = sum(
                    1 for m in itertools.combinations_with_replacement(range(n + 1), 3)
                    if any(all(i not in block.indices for i in m) for block in blocks))
                assert monomials.union_dim(n, k, b) == covered
                y = monomials.y_set(n, range(1, k + 1), b)
                assert len(y) == monomials.dim_Sd(n, 3) - covered


def test_two_block_row_count():
    for n in range(56, 80):
        assert monomials.dim_Sd(n, 3) - monomials.union_dim(n, 2) == 576 * n - 12672
    for n in (56, 79):
        assert len(monomials.y_set(n, (1, 2))) == 576 * n - 12672


def test_union_dim_rejects_bad_block_counts():
    with pytest.raises(MonomialError):
        monomials.union_dim(70, 3)
    with pytest.raises(MonomialError):
        monomials.union_dim(100, 4)


def test_three_blocks_and_their_span_cover_all_monomials():
    # Every cubic monomial lies in S_3(U_K) or in some S_3(U_l).
    for b in range(1, 4):
        for n in range(3 * b - 1, 13):
            for m in itertools.combinations_with_replacement(range(n + 1), 3):
                inside = m[-1] < 3 * b
                avoids = any(
                    all(i not in BlockSpec(l, b).indices for i in m)
                    for l in range(1, 4))
                assert inside or avoids

    for n in range(72, 91):
        table = monomials.monomial_table(n, 3)
        inside = table[:, -1] < 72
        avoids = np.zeros(table.shape[0], dtype=bool)
        for l in range(1, 4):
            block = BlockSpec(l)
            avoids |= np.all((table < block.start) | (table >= block.stop), axis=1)
        assert np.all(inside | avoids)
        assert math.comb(n + 3, 3) == table.shape[0]
