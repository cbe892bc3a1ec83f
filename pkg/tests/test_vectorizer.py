import random

import pytest

from pcsat.pc import PathCondition, canonize, parse_pc
from pcsat.solver import solve
from pcsat.vectorize import (
    CELL_CAP,
    CellOverflow,
    NotCanonical,
    PcMatrix,
    TooManyVariables,
    decode_matrix,
    dump_matrix,
    matrix_key,
    pad_rows,
    vectorize,
)

from helpers import random_pc_text

WORKED_EXAMPLE = "x + y - z + 1 <= 0 && x - z == 0 && -1*x + y - 9 <= 0"


class TestVectorize:
    def test_worked_example_3x5(self):
        m = vectorize(canonize(parse_pc(WORKED_EXAMPLE)), t_max=3)
        assert m.cells == (
            (1, 1, -1, 1, 2),
            (1, 0, -1, 0, 0),
            (-1, 1, 0, -9, 2),
        )

    def test_worked_example_3x6(self):
        m = vectorize(canonize(parse_pc(WORKED_EXAMPLE)), t_max=4)
        assert m.cells == (
            (1, 1, -1, 0, 1, 2),
            (1, 0, -1, 0, 0, 0),
            (-1, 1, 0, 0, -9, 2),
        )

    def test_tautology_row_is_all_zero(self):
        m = vectorize(canonize(parse_pc("0 == 0")), t_max=3)
        assert m.cells == ((0, 0, 0, 0, 0),)

    def test_requires_canonical(self):
        with pytest.raises(NotCanonical):
            vectorize(parse_pc("x > 0"), t_max=2)

    def test_too_many_variables(self):
        pc = canonize(parse_pc("a + b + c <= 0"))
        with pytest.raises(TooManyVariables):
            vectorize(pc, t_max=2)

    def test_cell_overflow(self):
        # Coefficients kept coprime so GCD normalization cannot shrink them.
        pc = canonize(parse_pc(f"{CELL_CAP + 2}*x + 2*y + 1 <= 0"))
        with pytest.raises(CellOverflow):
            vectorize(pc, t_max=2)

    def test_constant_overflow(self):
        pc = canonize(parse_pc(f"x + {CELL_CAP + 1} <= 0"))
        with pytest.raises(CellOverflow):
            vectorize(pc, t_max=1)


class TestMatrixKey:
    def test_reassociated_texts_share_key(self):
        # Different surface syntax, identical flat structure.
        a = canonize(parse_pc("2*x + 3*y - 4*z + 1 <= 0"))
        b = canonize(parse_pc("2*x + 3*y + -4*z + 1 <= 0"))
        assert matrix_key(vectorize(a, 4)) == matrix_key(vectorize(b, 4))

    def test_equal_to_itself(self):
        m = vectorize(canonize(parse_pc(WORKED_EXAMPLE)), 3)
        assert matrix_key(m) == matrix_key(m)

    def test_single_cell_perturbation_changes_key(self):
        m = vectorize(canonize(parse_pc(WORKED_EXAMPLE)), 3)
        base = matrix_key(m)
        for i in range(m.rows):
            for j in range(m.cols):
                cells = [list(row) for row in m.cells]
                cells[i][j] += 1
                other = PcMatrix(tuple(tuple(r) for r in cells), m.t_max)
                assert matrix_key(other) != base

    def test_shape_is_part_of_key(self):
        pc = canonize(parse_pc("x <= 0"))
        assert matrix_key(vectorize(pc, 2)) != matrix_key(vectorize(pc, 3))


class TestDecodeAndPad:
    def test_decode_round_trip(self):
        rng = random.Random(5)
        for _ in range(100):
            pc = canonize(parse_pc(random_pc_text(rng, max_d=4, max_t=4)))
            m = vectorize(pc, 5)
            back = decode_matrix(m, assume_canonical=True)
            assert vectorize(canonize(back), 5) == m

    def test_padding_soundness(self):
        rng = random.Random(9)
        for _ in range(30):
            pc = canonize(parse_pc(random_pc_text(rng, max_d=3, max_t=3)))
            m = vectorize(pc, 4)
            want = solve(decode_matrix(m)).sat
            for extra in range(1, 6):
                padded = pad_rows(m, extra)
                assert padded.rows == m.rows + extra
                assert solve(decode_matrix(padded)).sat == want

    def test_column_extension_soundness(self):
        rng = random.Random(13)
        for _ in range(50):
            pc = canonize(parse_pc(random_pc_text(rng, max_d=4, max_t=3)))
            a = solve(decode_matrix(vectorize(pc, 3))).sat
            b = solve(decode_matrix(vectorize(pc, 6))).sat
            assert a == b

    def test_zero_row_decodes_to_tautology(self):
        m = pad_rows(vectorize(canonize(parse_pc("x <= 0")), 2), 1)
        back = decode_matrix(m)
        assert back.constraints[1].coeffs == {}
        assert back.constraints[1].constant == 0


class TestDump:
    def test_tab_separated_rows(self):
        m = vectorize(canonize(parse_pc(WORKED_EXAMPLE)), 3)
        lines = dump_matrix(m).splitlines()
        assert lines[0] == "1\t1\t-1\t1\t2"
        assert len(lines) == 3
