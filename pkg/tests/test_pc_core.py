import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pcsat.pc import (
    LinearConstraint,
    NonlinearError,
    Op,
    ParseError,
    PathCondition,
    canonize,
    dimension_of,
    format_pc,
    parse_pc,
)
from pcsat.solver import brute_force_solve

from helpers import random_pc_text


class TestParse:
    def test_two_constraints_three_variables(self):
        pc = parse_pc("x + y < z && x == z")
        assert len(pc.constraints) == 2
        assert pc.variables() == [0, 1, 2]
        assert not pc.canonical
        first = pc.constraints[0]
        assert first.coeffs == {0: 1, 1: 1, 2: -1}
        assert first.op is Op.LT

    def test_identity_comparison_collapses(self):
        pc = parse_pc("x == x")
        assert len(pc.constraints) == 1
        c = pc.constraints[0]
        assert c.coeffs == {}
        assert c.constant == 0
        assert c.op is Op.EQ

    def test_variable_product_rejected(self):
        with pytest.raises(NonlinearError):
            parse_pc("x*y > 0")

    def test_coefficient_times_product_rejected(self):
        with pytest.raises(NonlinearError):
            parse_pc("2*x*y > 0")

    def test_power_characters_rejected(self):
        with pytest.raises(ParseError):
            parse_pc("x^2 > 0")

    def test_error_carries_position(self):
        with pytest.raises(ParseError) as err:
            parse_pc("x + ? < 0")
        assert err.value.position == 4

    def test_missing_relop(self):
        with pytest.raises(ParseError):
            parse_pc("x + y")

    def test_negative_coefficients(self):
        pc = parse_pc("-2*x + -3 <= 0")
        c = pc.constraints[0]
        assert c.coeffs == {0: -2}
        assert c.constant == -3

    def test_names_map_by_first_appearance(self):
        a = parse_pc("b + a < 0 && a == 0")
        b = parse_pc("y + x < 0 && x == 0")
        assert a == b


class TestCanonize:
    def test_renamed_texts_share_canonical_form(self):
        pc1 = canonize(parse_pc("x + y < z && x == z && x - 10 > y"))
        pc2 = canonize(parse_pc("a + b < c && a == c && a - b > 10"))
        assert pc1 == pc2
        assert format_pc(pc1) == format_pc(pc2)

    def test_strict_less_tightening(self):
        pc = canonize(parse_pc("x + y < z && x == z && x - 10 > y"))
        first = pc.constraints[0]
        assert first.coeffs == {0: 1, 1: 1, 2: -1}
        assert first.constant == 1
        assert first.op is Op.LEQ

    def test_strict_greater_tightening_is_equisatisfiable(self):
        # Expected rewrite of "x - 10 > y": -v0 + v1 + 11 <= 0.  Verified
        # point-for-point against the source constraint over a box.
        original = parse_pc("x - 10 > y")
        canonical = canonize(original)
        c = canonical.constraints[0]
        assert c.coeffs == {0: -1, 1: 1}
        assert c.constant == 11
        assert c.op is Op.LEQ
        for x in range(-64, 65):
            for y in range(-64, 65):
                assignment = {0: x, 1: y}
                assert original.evaluate(assignment) == canonical.evaluate(assignment)

    def test_paper_order_preserved_for_worked_example(self):
        pc = canonize(parse_pc("x + y - z + 1 <= 0 && x - z == 0 && -1*x + y - 9 <= 0"))
        assert [c.op for c in pc.constraints] == [Op.LEQ, Op.EQ, Op.LEQ]
        assert pc.constraints[1].coeffs == {0: 1, 2: -1}

    def test_idempotent_on_random_pcs(self):
        rng = random.Random(7)
        for _ in range(1000):
            pc = parse_pc(random_pc_text(rng))
            once = canonize(pc)
            assert canonize(once) == once
            # Also stable through the textual round trip, which drops the flag.
            again = canonize(parse_pc(format_pc(once)))
            assert again == once

    def test_gcd_normalization_eq(self):
        pc = canonize(parse_pc("4*x + -6*y + 2 == 0"))
        c = pc.constraints[0]
        assert c.coeffs == {0: 2, 1: -3}
        assert c.constant == 1

    def test_gcd_normalization_leq_tightens_constant(self):
        # 2x + 3 <= 0 over the integers means x <= -2.
        pc = canonize(parse_pc("2*x + 3 <= 0"))
        c = pc.constraints[0]
        assert c.coeffs == {0: 1}
        assert c.constant == 2
        for x in range(-10, 11):
            assert (2 * x + 3 <= 0) == c.evaluate({0: x})

    def test_false_constant_collapses_pc(self):
        pc = canonize(parse_pc("5 == 4 && x > 0"))
        assert len(pc.constraints) == 1
        c = pc.constraints[0]
        assert (c.coeffs, c.constant, c.op) == ({}, 1, Op.LEQ)

    def test_true_constants_drop_to_tautology(self):
        pc = canonize(parse_pc("5 == 5"))
        assert len(pc.constraints) == 1
        c = pc.constraints[0]
        assert (c.coeffs, c.constant, c.op) == ({}, 0, Op.EQ)

    def test_duplicates_removed(self):
        pc = canonize(parse_pc("x > 0 && x > 0 && x >= 1"))
        assert len(pc.constraints) == 1

    def test_preserves_satisfiability_on_random_pcs(self):
        rng = random.Random(11)
        for _ in range(200):
            pc = parse_pc(random_pc_text(rng, max_d=4, max_t=3, coeff_range=5))
            a = brute_force_solve(pc, 16)
            b = brute_force_solve(canonize(pc), 16)
            assert a.sat == b.sat


class TestFormat:
    def test_direct_serialization(self):
        pc = PathCondition([LinearConstraint({0: 1, 1: -1}, 0, Op.EQ)])
        assert format_pc(pc) == "1*v0 + -1*v1 + 0 == 0"

    def test_round_trip_on_random_pcs(self):
        rng = random.Random(3)
        for _ in range(1000):
            pc = parse_pc(random_pc_text(rng))
            assert parse_pc(format_pc(pc)) == pc

    def test_canonical_forms_print_identically(self):
        t1 = format_pc(canonize(parse_pc("x + y < z && x == z && x - 10 > y")))
        t2 = format_pc(canonize(parse_pc("a + b < c && a == c && a - b > 10")))
        assert t1 == t2

    def test_constant_only_prints(self):
        assert format_pc(canonize(parse_pc("1 == 1"))) == "0 == 0"


class TestDimension:
    def test_worked_example(self):
        pc = parse_pc("x + y - z + 1 <= 0 && x - z == 0 && -1*x + y - 9 <= 0")
        dim = dimension_of(pc)
        assert (dim.d, dim.n, dim.t) == (3, 1, 3)

    def test_single_variable(self):
        dim = dimension_of(parse_pc("v0 == 0"))
        assert (dim.d, dim.n, dim.t) == (1, 1, 1)

    def test_constant_only(self):
        dim = dimension_of(parse_pc("5 == 5"))
        assert (dim.d, dim.n, dim.t) == (1, 0, 0)


@st.composite
def pc_texts(draw):
    rng = random.Random(draw(st.integers(0, 2**32 - 1)))
    return random_pc_text(rng, max_d=4, max_t=3, coeff_range=6)


@settings(max_examples=80, deadline=None)
@given(pc_texts())
def test_property_parse_format_round_trip(text):
    pc = parse_pc(text)
    assert parse_pc(format_pc(pc)) == pc


@settings(max_examples=80, deadline=None)
@given(pc_texts())
def test_property_canonize_idempotent_and_equisatisfiable(text):
    pc = parse_pc(text)
    once = canonize(pc)
    assert canonize(parse_pc(format_pc(once))) == once
    assert brute_force_solve(pc, 8).sat == brute_force_solve(once, 8).sat
