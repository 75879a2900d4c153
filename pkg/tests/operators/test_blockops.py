import numpy as np
import pytest
from hypothesis import given, seed, settings
from hypothesis import strategies as st

from src.errors import DimensionMismatchError
from src.operators.blockops import (
    BlockOp,
    Subspace,
    assemble,
    block_gaps,
    complement,
    decompose,
    norm_sandwich,
    orthonormalize,
    random_subspace,
)


class TestSubspace:
    """Tests for subspace construction."""

    def test_canonical(self):
        s = Subspace.canonical(4, 2)

        assert s.dim == 2
        assert s.ambient_dim == 4
        np.testing.assert_array_equal(s.projector, np.diag([1.0, 1.0, 0.0, 0.0]))

    def test_canonical_too_large(self):
        with pytest.raises(ValueError, match="Cannot take 5 canonical vectors"):
            Subspace.canonical(4, 5)

    def test_rejects_non_orthonormal(self):
        with pytest.raises(ValueError, match="not orthonormal"):
            Subspace(np.array([[1.0], [1.0]]))

    def test_orthonormalize_drops_dependent_columns(self):
        raw = np.array([[1.0, 2.0, 0.0], [1.0, 2.0, 0.0], [0.0, 0.0, 0.0]])
        s = orthonormalize(raw)

        assert s.dim == 1
        np.testing.assert_allclose(np.abs(s.basis[:, 0]), [2**-0.5, 2**-0.5, 0.0], atol=1e-12)

    def test_complement(self):
        rng = np.random.default_rng(0)
        s = random_subspace(5, 2, rng)
        perp = complement(s)

        assert perp.dim == 3
        np.testing.assert_allclose(s.basis.T @ perp.basis, 0.0, atol=1e-12)
        np.testing.assert_allclose(s.projector + perp.projector, np.eye(5), atol=1e-12)

    def test_complement_of_zero_subspace(self):
        perp = complement(Subspace(np.zeros((3, 0))))
        np.testing.assert_array_equal(perp.basis, np.eye(3))

    def test_rotated_keeps_projector(self):
        s = Subspace.canonical(3, 2)
        q = np.array([[0.0, 1.0], [-1.0, 0.0]])

        np.testing.assert_allclose(s.rotated(q).projector, s.projector)


class TestDecompose:
    """Tests for block decomposition and reassembly."""

    def test_canonical_blocks(self):
        t = np.arange(9.0).reshape(3, 3)
        eye = np.eye(3)
        blk = decompose(
            t,
            Subspace.canonical(3, 1),
            Subspace.canonical(3, 2),
            m_perp=Subspace(eye[:, 1:]),
            n_perp=Subspace(eye[:, 2:]),
        )

        np.testing.assert_array_equal(blk.a, [[0.0], [3.0]])
        np.testing.assert_array_equal(blk.b, [[1.0, 2.0], [4.0, 5.0]])
        np.testing.assert_array_equal(blk.c, [[6.0]])
        np.testing.assert_array_equal(blk.d, [[7.0, 8.0]])

    @seed(7)
    @settings(max_examples=30, deadline=None)
    @given(
        h=st.integers(min_value=1, max_value=6),
        k=st.integers(min_value=1, max_value=6),
        draw=st.integers(min_value=0, max_value=2**32 - 1),
    )
    def test_roundtrip(self, h, k, draw):
        """assemble(decompose(T)) reproduces T for any split."""
        rng = np.random.default_rng(draw)
        t = rng.standard_normal((k, h))
        m = random_subspace(h, int(rng.integers(0, h + 1)), rng)
        n = random_subspace(k, int(rng.integers(0, k + 1)), rng)
        blk = decompose(t, m, n)

        np.testing.assert_allclose(assemble(blk), t, atol=1e-10 * (1.0 + np.linalg.norm(t)))
        assert norm_sandwich(blk).holds

    def test_shape_mismatch(self):
        with pytest.raises(DimensionMismatchError, match="does not map"):
            decompose(np.zeros((2, 3)), Subspace.canonical(2, 1), Subspace.canonical(2, 1))

    def test_from_blocks_checks_shapes(self):
        with pytest.raises(DimensionMismatchError, match="Block d"):
            BlockOp(
                m_sub=Subspace.canonical(2, 1),
                n_sub=Subspace.canonical(2, 1),
                a=np.zeros((1, 1)),
                b=np.zeros((1, 1)),
                c=np.zeros((1, 1)),
                d=np.zeros((2, 1)),
            )

    def test_from_blocks_assembles(self):
        blk = BlockOp.from_blocks(np.eye(1), 2 * np.eye(1), 3 * np.eye(1), 4 * np.eye(1))
        np.testing.assert_array_equal(assemble(blk), [[1.0, 2.0], [3.0, 4.0]])


class TestNormSandwich:
    """Tests for the block norm bounds."""

    def test_identity(self):
        blk = decompose(np.eye(4), Subspace.canonical(4, 2), Subspace.canonical(4, 2))
        sandwich = norm_sandwich(blk)

        assert sandwich.lower == pytest.approx(1.0)
        assert sandwich.norm == pytest.approx(1.0)
        assert sandwich.upper == pytest.approx(2.0)
        assert sandwich.holds

    def test_empty_blocks(self):
        """A trivial split leaves empty blocks of norm zero."""
        blk = decompose(3 * np.eye(2), Subspace.canonical(2, 0), Subspace.canonical(2, 0))
        sandwich = norm_sandwich(blk)

        assert sandwich.lower == pytest.approx(3.0)
        assert sandwich.upper == pytest.approx(3.0)


class TestBlockGaps:
    """Tests for blockwise distances."""

    def test_gaps_of_inverse_example(self):
        n = 10
        t = np.array([[1.0, 1.0], [1.0, 0.0]])
        t_n = np.array([[1.0, 1.0], [1.0 + 1.0 / n, 1.0 / n]])
        s = Subspace.canonical(2, 1)
        gaps = block_gaps(t_n, t, s, s)

        assert gaps["a"] == 0.0
        assert gaps["b"] == 0.0
        assert gaps["c"] == pytest.approx(0.1)
        assert gaps["d"] == pytest.approx(0.1)
        assert gaps["total"] == pytest.approx(np.sqrt(2) / n)
        assert gaps["max_block"] <= gaps["total"] <= gaps["sum_blocks"]
