"""Wave-plate algebra: anchor matrices, composition law, frozen gate tables.

Every expected operator here is written out either as an explicit literal or
as a product computed with plain numpy from the textbook half-wave-plate
matrix, so these tests do not trust the module under test for its own
reference values.
"""

import math

import numpy as np
import pytest

from cobit.plates import (
    PHI,
    THETA,
    PlateProgram,
    canonical_plate_angle,
    compile_nand_program,
    cumulative_operator,
    hwp,
    three_plate_nand,
)
from cobit.states import apply, basis_state, equal_up_to_global_phase, is_unitary

RT2 = math.sqrt(0.5)
I2 = np.eye(2)
SX = np.array([[0.0, 1.0], [1.0, 0.0]])
SZ = np.array([[1.0, 0.0], [0.0, -1.0]])
HAD = np.array([[RT2, RT2], [RT2, -RT2]])
# rotation by pi/2 in the real plane; the only non-trivial cumulative operator
J = np.array([[0.0, -1.0], [1.0, 0.0]])


def _ref_hwp(alpha):
    c, s = math.cos(2 * alpha), math.sin(2 * alpha)
    return np.array([[c, s], [s, -c]])


class TestHalfWavePlate:
    def test_anchor_angles(self):
        np.testing.assert_allclose(hwp(0.0), SZ, atol=1e-12)
        np.testing.assert_allclose(hwp(math.pi / 8), HAD, atol=1e-12)
        np.testing.assert_allclose(hwp(math.pi / 4), SX, atol=1e-12)

    def test_matches_reference_form(self):
        rng = np.random.default_rng(1)
        for alpha in rng.uniform(-math.pi, math.pi, size=100):
            np.testing.assert_allclose(hwp(alpha), _ref_hwp(alpha), atol=1e-12)

    def test_involution_and_determinant(self):
        rng = np.random.default_rng(2)
        for alpha in rng.uniform(-math.pi, math.pi, size=100):
            m = hwp(alpha)
            np.testing.assert_allclose(m @ m, I2, atol=1e-12)
            assert np.linalg.det(m) == pytest.approx(-1.0, abs=1e-12)
            assert is_unitary(m)

    def test_pair_composes_to_rotation(self):
        # hwp(a) @ hwp(b) rotates by 2(a - b); independent check of the
        # composition law the noise analysis relies on.
        rng = np.random.default_rng(3)
        for _ in range(50):
            a, b = rng.uniform(-1.0, 1.0, size=2)
            got = hwp(a) @ hwp(b)
            ang = 2 * (a - b)
            want = np.array(
                [[math.cos(ang), -math.sin(ang)], [math.sin(ang), math.cos(ang)]]
            )
            np.testing.assert_allclose(got, want, atol=1e-12)

    def test_canonical_angle_is_half_turn_periodic(self):
        rng = np.random.default_rng(4)
        for alpha in rng.uniform(-10, 10, size=200):
            c = canonical_plate_angle(alpha)
            assert -math.pi / 2 < c <= math.pi / 2
            np.testing.assert_allclose(hwp(c), hwp(alpha), atol=1e-10)


class TestProgramCompilation:
    # (a, b, r) -> plate angles in application order, in units of pi.
    FROZEN_ANGLES = {
        (0, 0, 0): (0.0, 0.0, 0.0, 0.0),
        (0, 1, 0): (0.0, -1 / 8, -1 / 8, 0.0),
        (1, 0, 0): (1 / 8, 0.0, -1 / 8, 0.0),
        (1, 1, 0): (1 / 8, -1 / 8, 0.0, 0.0),
        (0, 0, 1): (0.0, 0.0, 0.0, 1 / 4),
        (0, 1, 1): (0.0, -1 / 8, -1 / 8, 1 / 4),
        (1, 0, 1): (1 / 8, 0.0, -1 / 8, 1 / 4),
        (1, 1, 1): (1 / 8, -1 / 8, 0.0, 1 / 4),
    }

    def test_angles_for_all_inputs(self):
        for (a, b, r), frac in self.FROZEN_ANGLES.items():
            program = compile_nand_program(a, b, r)
            assert len(program.angles) == 4
            want = tuple(f * math.pi for f in frac)
            np.testing.assert_allclose(program.angles, want, atol=1e-12)

    def test_constants(self):
        assert THETA == pytest.approx(math.pi / 8)
        assert PHI == pytest.approx(math.pi / 4)

    def test_invalid_bits_rejected(self):
        with pytest.raises(ValueError):
            compile_nand_program(2, 0, 0)
        with pytest.raises(ValueError):
            compile_nand_program(0, 0, -1)

    def test_program_angles_canonicalized(self):
        p = PlateProgram((math.pi, -3 * math.pi / 4))
        assert all(-math.pi / 2 < x <= math.pi / 2 for x in p.angles)


class TestCumulativeOperator:
    # Frozen classification of the full four-plate product, up to nothing:
    # these are the exact matrices, global sign included.
    FROZEN_FULL = {
        (0, 0, 0): I2,
        (0, 1, 0): I2,
        (1, 0, 0): I2,
        (1, 1, 0): -J,  # equals sigma_z @ sigma_x
        (0, 0, 1): J,
        (0, 1, 1): J,
        (1, 0, 1): J,
        (1, 1, 1): I2,
    }

    def _product_oracle(self, angles):
        # plain left-multiplication of reference matrices, newest on the left
        acc = I2
        for alpha in angles:
            acc = _ref_hwp(alpha) @ acc
        return acc

    def test_matches_independent_product(self):
        for a in (0, 1):
            for b in (0, 1):
                for r in (0, 1):
                    program = compile_nand_program(a, b, r)
                    got = cumulative_operator(program)
                    want = self._product_oracle(program.angles)
                    np.testing.assert_allclose(got, want, atol=1e-12)

    def test_frozen_table(self):
        for (a, b, r), want in self.FROZEN_FULL.items():
            got = cumulative_operator(compile_nand_program(a, b, r))
            np.testing.assert_allclose(got, want, atol=1e-12)

    def test_identity_iff_decoded_outcome_zero(self):
        # The product is the identity ray exactly when s = nand(a,b) ^ 1 ^ r
        # would read 0, i.e. the plates only move the state when s must be 1.
        for (a, b, r), mat in self.FROZEN_FULL.items():
            s = (1 - (a & b)) ^ 1 ^ r
            is_identity_ray = np.allclose(np.abs(mat), I2, atol=1e-12)
            assert is_identity_ray == (s == 0)

    def test_pad_pair_per_input(self):
        # For every (a, b) the two padded products are {+-I, +-J} in some
        # order, so the pair of rays the server can see never depends on the
        # input.
        for a in (0, 1):
            for b in (0, 1):
                pair = []
                for r in (0, 1):
                    m = cumulative_operator(compile_nand_program(a, b, r))
                    pair.append(np.abs(m))
                key = sorted(np.round(p, 9).tobytes() for p in pair)
                want = sorted(np.round(np.abs(x), 9).tobytes() for x in (I2, J))
                assert key == want


class TestThreePlateStage:
    def test_sigma_z_for_nand_one(self):
        for a, b in ((0, 0), (0, 1), (1, 0)):
            np.testing.assert_allclose(three_plate_nand(a, b), SZ, atol=1e-12)

    def test_bit_flip_for_nand_zero(self):
        m = three_plate_nand(1, 1)
        out = apply(m, basis_state(0))
        assert equal_up_to_global_phase(out, basis_state(1))

    def test_encodes_nand_on_zero_state(self):
        for a in (0, 1):
            for b in (0, 1):
                out = apply(three_plate_nand(a, b), basis_state(0))
                want = basis_state(1 - (a & b) ^ 1)  # |0> flips iff nand is 0
                assert equal_up_to_global_phase(out, want)
