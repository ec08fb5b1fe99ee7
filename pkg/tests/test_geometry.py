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

import math

import numpy as np
import pytest

from secantcert import geometry
from secantcert import monomials
from secantcert.ffield import FieldModulus, rank_mod_p
from secantcert.geometry import (
    AbundanceClass, DegeneratePointError, Statement, StatementError, TangentPoint)


def test_principal_counts_are_floor_and_ceiling():
    for n in range(8, 2001):
        total = geometry.N(n)
        assert geometry.s1(n) == total // (2 * n + 1)
        assert geometry.s2(n) == -(-total // (2 * n + 1))


@pytest.mark.parametrize("n, s1, s2", [(8, 9, 10), (32, 100, 101)])
def test_principal_count_examples(n, s1, s2):
    assert (geometry.s1(n), geometry.s2(n)) == (s1, s2)


def test_formula_domains():
    with pytest.raises(StatementError):
        geometry.s1(7)
    with pytest.raises(StatementError):
        geometry.t(31)
    with pytest.raises(StatementError):
        geometry.c(31)
    with pytest.raises(StatementError):
        geometry.s_i(10, 3)
    assert geometry.t(55) == 183


def test_three_block_statements_are_equiabundant():
    for n in range(71, 501):
        st = Statement(n, 0, 96, 96, 96)
        assert geometry.classify(st) == AbundanceClass.EQUIABUNDANT
        assert geometry.N(n) == monomials.union_dim(n, 3) + 3 * 48 * 96


def test_two_block_statements_are_equiabundant():
    for n in range(56, 501):
        t = geometry.t(n - 24)
        st = Statement(n, 96, t, t, 0)
        assert geometry.classify(st) == AbundanceClass.EQUIABUNDANT
        assert geometry.N(n) - monomials.union_dim(n, 2) == \
            2 * 48 * t + 96 * (2 * n + 1)


def test_codimension_is_periodic():
    for n in range(32, 501):
        st = Statement(n, geometry.t(n), geometry.s1(n - 24))
        assert geometry.N(n) - geometry.expected_dim_W(st) == geometry.c(n)
        assert 0 <= geometry.c(n) < 48
    for n in range(32, 477):
        assert geometry.c(n + 24) == geometry.c(n)


def test_only_two_equiabundant_secant_statements():
    found = [
        (n, geometry.N(n) // (2 * n + 1)) for n in range(1, 501)
        if geometry.N(n) % (2 * n + 1) == 0]
    assert found == [(2, 2), (7, 8)]


def test_flagship_statement():
    st = Statement(7, 8)
    assert geometry.classify(st) == AbundanceClass.EQUIABUNDANT
    assert st.log_label == "SUBABUNDANT"
    assert geometry.expected_dim_W(st) == 120
    assert geometry.expected_dim_secant(7, 3, 8) == 120


@pytest.mark.parametrize("st, label", [
    (Statement(8, 9), AbundanceClass.SUBABUNDANT),
    (Statement(8, 10), AbundanceClass.SUPERABUNDANT),
    (Statement(5, 2, d=2), AbundanceClass.SUPERABUNDANT),
])
def test_classify(st, label):
    assert geometry.classify(st) == label


def test_expected_dimensions():
    assert geometry.expected_dim_secant(8, 3, 9) == 153
    assert geometry.expected_dim_secant(8, 3, 10) == 165
    assert geometry.expected_dim_W(Statement(7, 0)) == 0
    assert geometry.base_dim(Statement(71, 0, 96, 96, 96)) == monomials.union_dim(71, 3)
    with pytest.raises(StatementError):
        geometry.expected_dim_secant(7, 3, 0)


@pytest.mark.parametrize("n, d, s, expected", [
    (2, 3, 2, True), (3, 3, 3, True), (4, 3, 4, True), (5, 3, 5, False),
    (4, 3, 3, False), (5, 2, 2, True), (6, 2, 2, True), (7, 2, 3, True),
    (6, 2, 3, True), (5, 2, 1, False), (8, 2, 4, True), (7, 2, 4, False),
    (4, 2, 2, True), (3, 2, 2, False), (9, 4, 9, False),
])
def test_known_exceptions(n, d, s, expected):
    assert geometry.known_exception(n, d, s) == expected


@pytest.mark.parametrize("n, d, expected", [
    (7, 3, 8), (8, 3, 10), (2, 3, 3), (3, 3, 4), (4, 3, 5), (5, 2, 3), (6, 2, 4),
    (3, 2, 2),
])
def test_generic_rank(n, d, expected):
    assert geometry.generic_chow_waring_rank_d_minus_1_1(n, d) == expected


def test_generic_rank_is_ceiling_away_from_exceptions():
    for n in range(5, 60):
        expected = math.ceil(geometry.N(n) / (2 * n + 1))
        assert geometry.generic_chow_waring_rank_d_minus_1_1(n, 3) == expected


@pytest.mark.parametrize("n, low, high", [
    (2, 1, 3), (3, 2, 4), (4, 3, 5), (7, 8, 8), (8, 9, 10), (1, 1, 2),
])
def test_principal_statements(n, low, high):
    lo, hi = geometry.principal_statements(n)
    assert (lo.s, hi.s) == (low, high)


@pytest.mark.parametrize("text, st", [
    ("T(7, 8; 0, 0, 0)", Statement(7, 8)),
    ("T(79,96;183,183,0)", Statement(79, 96, 183, 183, 0)),
    ("T(5, 2; 2)", Statement(5, 2, d=2)),
])
def test_parse_and_format(text, st):
    assert Statement.parse(text) == st
    assert Statement.parse(str(st)) == st


def test_slugs():
    assert Statement(7, 8).slug == "T_7_8_0_0_0"
    assert Statement(5, 2, d=2).slug == "T_5_d2_2"
    assert Statement(5, 1, 1, b=2).slug == "T_5_1_1_0_0_b2"


@pytest.mark.parametrize("kwargs", [
    dict(n=7, s=8, a3=1),
    dict(n=0, s=1),
    dict(n=7, s=-1),
    dict(n=7, s=1, a1=1, d=4),
    dict(n=7, s=1, d=1),
])
def test_invalid_statements(kwargs):
    with pytest.raises(StatementError):
        Statement(**kwargs)


def test_parse_rejects_garbage():
    with pytest.raises(StatementError):
        Statement.parse("T(7; 8)")


def test_tangent_columns_span_the_tangent_space(modulus, rng):
    for n in (3, 5, 7):
        l, m = rng.integers(0, 8191, size=(2, n + 1))
        pt = TangentPoint.from_vectors(l, m)
        cols = geometry.tangent_columns(pt, n)
        assert cols.shape == (geometry.N(n), 2 * (n + 1))
        assert rank_mod_p(cols) == 2 * n + 1


def test_tangent_columns_match_direct_products(modulus, rng):
    n = 4
    l, m = rng.integers(0, 8191, size=(2, n + 1))
    pt = TangentPoint.from_vectors(l, m)
    cols = geometry.tangent_columns(pt, n).array
    identity = np.eye(n + 1, dtype=np.int64)
    for t in range(n + 1):
        first = monomials.expand_product([l, l, identity[t]], n)
        second = monomials.expand_product([l, m, identity[t]], n)
        assert cols[:, t].tolist() == first.tolist()
        assert cols[:, n + 1 + t].tolist() == second.tolist()


def test_tangent_columns_row_restriction(modulus, rng):
    n = 5
    l, m = rng.integers(0, 8191, size=(2, n + 1))
    l[:2] = 0
    m[:2] = 0
    pt = TangentPoint.from_vectors(l, m, block=1)
    rows = monomials.y_set(n, (1,), b=2)
    full = geometry.tangent_columns(pt, n, b=2)
    restricted = geometry.tangent_columns(pt, n, b=2, rows=rows)
    assert full.shape == (geometry.N(n), 4)
    assert restricted == full.take_rows(rows.indices)


def test_tangent_point_checks(modulus):
    with pytest.raises(DegeneratePointError, match="degenerate point"):
        TangentPoint.from_vectors([1, 2, 3], [2, 4, 6]).check(2)
    with pytest.raises(StatementError):
        TangentPoint.from_vectors([1, 2], [2, 1]).check(2)
    with pytest.raises(StatementError):
        TangentPoint.from_vectors([1, 2, 8191], [2, 1, 0]).check(2)
    with pytest.raises(StatementError):
        TangentPoint.from_vectors([1, 2, 3], [0, 1, 0], block=1).check(2, b=1)
    TangentPoint.from_vectors([0, 2, 3], [0, 1, 0], block=1).check(2, b=1)
