import numpy as np
import pytest
from numpy.testing import assert_allclose

from croplattice import (
    GridSpec,
    KernelSpec,
    cvm_combined,
    cvm_combined_permutation_test,
    cvm_permutation_test,
    cvm_statistic,
    morans_i,
    smooth,
    substream,
)


def cvm_reference(a, b):
    """Independent oracle: direct double loop over pooled points with
    right-continuous ECDFs evaluated at each pooled value."""
    a, b = np.asarray(a, float), np.asarray(b, float)
    n = a.size
    total = 0.0
    for z in np.concatenate([a, b]):
        fa = (a <= z).sum() / n
        fb = (b <= z).sum() / n
        total += (fa - fb) ** 2
    return total / (2 * n)


def moran_reference(values, nx, ny):
    """Independent oracle: explicit double sum with inverse-distance weights."""
    xs, ys = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    pts = np.column_stack([xs.ravel(), ys.ravel()]).astype(float)
    z = values.ravel() - values.mean()
    n = z.size
    num = 0.0
    s0 = 0.0
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            w = 1.0 / np.hypot(pts[i, 0] - pts[j, 0], pts[i, 1] - pts[j, 1])
            num += w * z[i] * z[j]
            s0 += w
    return (n / s0) * num / (z**2).sum()


class TestCvmStatistic:
    def test_identical_samples(self):
        assert cvm_statistic([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]) == 0.0

    def test_disjoint_constants(self):
        # ECDFs fully separated below 1: contribution 1 at each of the 4
        # pooled points at 0.5, zero at the points at 1 -> (1/8) * 4 = 0.5
        assert_allclose(cvm_statistic([1, 1, 1, 1], [0.5, 0.5, 0.5, 0.5]), 0.5)

    def test_same_multiset(self):
        assert cvm_statistic([0.0, 1.0], [1.0, 0.0]) == 0.0

    @pytest.mark.parametrize("seed", range(30))
    def test_matches_reference_oracle(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 40))
        if seed % 3 == 0:
            a = rng.integers(0, 5, n).astype(float)  # heavy ties
            b = rng.integers(0, 5, n).astype(float)
        else:
            a = rng.normal(size=n)
            b = rng.normal(size=n)
        assert_allclose(cvm_statistic(a, b), cvm_reference(a, b), atol=1e-13)

    @pytest.mark.parametrize("transform", [np.exp, lambda x: 3 * x + 7, lambda x: x**3])
    def test_invariant_under_increasing_transforms(self, transform):
        rng = np.random.default_rng(17)
        a = rng.normal(size=25)
        b = rng.normal(size=25) + 0.4
        assert_allclose(
            cvm_statistic(transform(a), transform(b)), cvm_statistic(a, b), rtol=1e-12
        )

    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="length"):
            cvm_statistic([1.0, 2.0], [1.0, 2.0, 3.0])

    def test_too_short(self):
        with pytest.raises(ValueError, match="2 pairs"):
            cvm_statistic([1.0], [2.0])

    def test_nonfinite(self):
        with pytest.raises(ValueError, match="finite"):
            cvm_statistic([1.0, np.nan], [1.0, 2.0])


class TestCvmPermutationTest:
    def test_identical_pairs_p_one(self):
        result = cvm_permutation_test(np.ones(5), np.ones(5), permutations=999, seed=1)
        assert result.statistic == 0.0
        assert result.p_value == 1.0

    def test_constant_shift_hits_floor(self):
        # constant 1.0 vs constant 0.63 over 400 pairs: no swap pattern short
        # of the full mirror reaches the observed statistic
        result = cvm_permutation_test(np.ones(400), np.full(400, 0.63), permutations=999, seed=42)
        assert_allclose(result.statistic, 0.5)
        assert result.p_value == 0.001

    def test_deterministic_per_seed(self):
        rng = np.random.default_rng(3)
        a, b = rng.normal(size=50), rng.normal(size=50)
        r1 = cvm_permutation_test(a, b, permutations=199, seed=11)
        r2 = cvm_permutation_test(a, b, permutations=199, seed=11)
        assert r1.p_value == r2.p_value
        assert r1.statistic == r2.statistic

    def test_min_permutations_enforced(self):
        with pytest.raises(ValueError, match="99"):
            cvm_permutation_test(np.ones(4), np.zeros(4) + 0.5, permutations=50, seed=0)

    def test_p_value_in_range(self):
        rng = np.random.default_rng(8)
        a, b = rng.normal(size=30), rng.normal(size=30)
        result = cvm_permutation_test(a, b, permutations=99, seed=5)
        assert 0 < result.p_value <= 1.0


class TestCvmCombined:
    def test_zeros(self):
        assert cvm_combined([0.0, 0.0, 0.0]) == 0.0

    def test_equal_values(self):
        assert_allclose(cvm_combined([0.3, 0.3, 0.3]), 0.3)

    def test_mean(self):
        assert_allclose(cvm_combined([0.1, 0.2, 0.6]), 0.3)

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            cvm_combined([0.1, -0.2, 0.3])

    def test_joint_test_statistic_is_channel_mean(self):
        rng = np.random.default_rng(21)
        initial = rng.uniform(0.5, 1.5, size=(60, 3))
        final = initial * rng.uniform(0.6, 0.9, size=(60, 3))
        result = cvm_combined_permutation_test(initial, final, permutations=99, seed=4)
        per_channel = [cvm_statistic(initial[:, c], final[:, c]) for c in range(3)]
        assert_allclose(result.statistic, cvm_combined(per_channel), rtol=1e-12)
        assert 0 < result.p_value <= 1.0

    def test_joint_test_deterministic(self):
        rng = np.random.default_rng(22)
        initial = rng.uniform(0.5, 1.5, size=(40, 3))
        final = initial * 0.8
        r1 = cvm_combined_permutation_test(initial, final, permutations=99, seed=9)
        r2 = cvm_combined_permutation_test(initial, final, permutations=99, seed=9)
        assert r1.p_value == r2.p_value


class TestMoransI:
    def test_checkerboard_negative_and_matches_oracle(self):
        grid = GridSpec(4, 4)
        board = (np.indices((4, 4)).sum(axis=0) % 2).astype(float)
        result = morans_i(board, grid, permutations=199, seed=3)
        assert result.i < 0
        assert_allclose(result.i, moran_reference(board, 4, 4), rtol=1e-10)

    def test_block_pattern_positive(self):
        grid = GridSpec(6, 6)
        blocks = np.zeros((6, 6))
        blocks[:3, :] = 1.0
        result = morans_i(blocks, grid, permutations=199, seed=3)
        assert result.i > 0
        assert_allclose(result.i, moran_reference(blocks, 6, 6), rtol=1e-10)

    def test_constant_field_rejected(self):
        with pytest.raises(ValueError, match="zero-variance"):
            morans_i(np.ones((4, 4)), GridSpec(4, 4), permutations=99, seed=0)

    def test_expected_value(self):
        grid = GridSpec(5, 5)
        rng = np.random.default_rng(1)
        result = morans_i(rng.normal(size=(5, 5)), grid, permutations=99, seed=1)
        assert_allclose(result.expected, -1.0 / 24)

    def test_deterministic_per_seed(self):
        grid = GridSpec(5, 5)
        rng = np.random.default_rng(2)
        field = rng.normal(size=(5, 5))
        r1 = morans_i(field, grid, permutations=199, seed=7)
        r2 = morans_i(field, grid, permutations=199, seed=7)
        assert r1.p_value == r2.p_value and r1.i == r2.i

    def test_shape_mismatch(self):
        with pytest.raises(ValueError, match="shape"):
            morans_i(np.ones((4, 5)), GridSpec(4, 4), permutations=99, seed=0)

    @pytest.mark.parametrize("seed", range(10))
    def test_smoothing_increases_autocorrelation(self, seed):
        grid = GridSpec(16, 16)
        field = substream(31, seed).standard_normal((16, 16))
        smoothed = smooth(field, KernelSpec(sigma=1.2))
        i_raw = morans_i(field, grid, permutations=99, seed=seed).i
        i_smooth = morans_i(smoothed, grid, permutations=99, seed=seed).i
        assert i_smooth >= i_raw
