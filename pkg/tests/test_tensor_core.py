import numpy as np
import pytest

from conftest import random_shape, random_tensor
from kernelizer.errors import (
    CorruptFactorizationError,
    InvalidPrecisionError,
    NotApplicableError,
    ShapeMismatchError,
)
from kernelizer.tensor_core import (
    DenseTensor,
    Factorization,
    as_tensor,
    contract_commutator,
    expand_commutator,
    factorization_from_json,
    factorization_to_json,
    factorize,
    kernel_size_bound,
    permute,
    reconstruct,
    round_to_precision,
    tensor_from_json,
    tensor_to_json,
    uniqueness_bound,
)


class TestDenseTensor:
    def test_rank_zero_rejected(self):
        with pytest.raises(ShapeMismatchError):
            DenseTensor(np.array(5))

    def test_empty_extent_rejected(self):
        with pytest.raises(ShapeMismatchError):
            DenseTensor(np.zeros((2, 0)))

    def test_immutable(self, small_matrix):
        with pytest.raises(ValueError):
            small_matrix.values[0, 0] = 1

    def test_row_major_data(self, small_matrix):
        assert small_matrix.data.tolist() == [2, 5, 2, 3, 0, 9, 0, 7, 0, 9, 2, 3]

    def test_json_complex(self):
        t = tensor_from_json({"shape": [2], "data": [[1, 2], 3]})
        assert t.is_complex
        assert t.values.tolist() == [1 + 2j, 3 + 0j]
        assert tensor_to_json(t) == {"shape": [2], "data": [[1.0, 2.0], [3.0, 0.0]]}

    def test_json_length_mismatch(self):
        with pytest.raises(ShapeMismatchError):
            tensor_from_json({"shape": [2, 2], "data": [1, 2, 3]})


class TestRounding:
    def test_half_away_from_zero(self):
        t = round_to_precision(as_tensor([0.26, 0.24]), 0.5)
        assert t.values.tolist() == [0.5, 0.0]

    def test_negative_half(self):
        t = round_to_precision(as_tensor([-0.25, 0.25]), 0.5)
        assert t.values.tolist() == [-0.5, 0.5]

    def test_integers_fixed(self, dot_vector):
        assert round_to_precision(dot_vector, 1) == dot_vector

    def test_integer_step(self):
        t = round_to_precision(as_tensor([4, 5, -5, 14]), 10)
        assert t.is_exact
        assert t.values.tolist() == [0, 10, -10, 10]

    def test_complex_componentwise(self):
        t = round_to_precision(as_tensor([0.26 - 0.74j]), 0.5)
        assert t.values.tolist() == [0.5 - 0.5j]

    def test_multiples_of_precision(self, rng):
        t = round_to_precision(as_tensor(rng.normal(size=50)), 0.001)
        steps = t.values / 0.001
        assert np.allclose(steps, np.round(steps), atol=1e-6)

    @pytest.mark.parametrize("eps", [0, -1])
    def test_invalid_precision(self, eps):
        with pytest.raises(InvalidPrecisionError):
            round_to_precision(as_tensor([1.0]), eps)


class TestFactorize:
    def test_vector(self, sparse_vector):
        f = factorize(sparse_vector)
        assert f.kernel.tolist() == [1, 5, 7]
        assert f.ymap.tolist() == [0, 1, 2, 3, 2, 0, 1]
        assert reconstruct(f) == sparse_vector

    def test_matrix(self, small_matrix):
        f = factorize(small_matrix)
        assert f.kernel.tolist() == [2, 5, 3, 9, 7]
        assert f.ymap.tolist() == [[1, 2, 1], [3, 0, 4], [0, 5, 0], [4, 1, 3]]
        assert reconstruct(f) == small_matrix

    def test_other_kernel_order_reconstructs(self, small_matrix):
        f = Factorization(kernel=[2, 3, 5, 7, 9],
                          ymap=[[1, 3, 1], [2, 0, 5], [0, 4, 0], [5, 1, 2]])
        f.validate()
        assert reconstruct(f) == small_matrix

    def test_binary_words(self, binary_words):
        f = factorize(binary_words)
        assert f.kernel.tolist() == [7, 9]
        assert f.ymap[0].tolist() == [1, 1, 1]
        assert f.ymap[1].tolist() == [1, 1, 2]
        assert f.ymap[-1].tolist() == [2, 2, 2]
        assert uniqueness_bound(f.shape, f.kernel_size)

    def test_all_zero(self):
        t = as_tensor(np.zeros((2, 3), dtype=int))
        f = factorize(t)
        assert f.kernel_size == 0
        assert reconstruct(f) == t

    def test_complex(self):
        t = as_tensor([[1 + 1j, 0], [1 + 1j, 2j]])
        f = factorize(t)
        assert f.kernel.tolist() == [1 + 1j, 2j]
        assert reconstruct(f) == t

    def test_round_trip_random(self, rng):
        for _ in range(50):
            t = random_tensor(rng, random_shape(rng), values=range(-3, 4))
            f = factorize(t)
            f.validate()
            assert reconstruct(f) == t
            assert f.kernel_size == len(set(t.data.tolist()) - {0})


class TestCommutator:
    def test_expand_vector(self, sparse_vector):
        z = expand_commutator(factorize(sparse_vector))
        assert z.shape == (7, 3)
        assert z.values.sum() == 5
        assert z.values[1].tolist() == [1, 0, 0]
        assert z.values[0].tolist() == [0, 0, 0]

    def test_contract_matches_reconstruct(self, rng):
        for _ in range(20):
            t = random_tensor(rng, random_shape(rng, max_rank=3, max_dim=5), values=range(-2, 3))
            f = factorize(t)
            if f.kernel_size == 0:
                continue
            assert contract_commutator(expand_commutator(f), f.kernel) == reconstruct(f)

    def test_last_axis_slices_hold_one_at_most(self, small_matrix):
        z = expand_commutator(factorize(small_matrix)).values
        assert z.sum(axis=-1).max() <= 1

    def test_all_zero_expands_to_zero(self):
        z = expand_commutator(factorize(as_tensor([0, 0])))
        assert not z.values.any()


class TestValidation:
    def test_out_of_range_index(self):
        f = Factorization(kernel=[3], ymap=[0, 2])
        with pytest.raises(CorruptFactorizationError):
            reconstruct(f)
        with pytest.raises(CorruptFactorizationError):
            f.validate()

    def test_duplicate_kernel(self):
        with pytest.raises(CorruptFactorizationError):
            Factorization(kernel=[3, 3], ymap=[1, 2]).validate()

    def test_unused_kernel_entry(self):
        with pytest.raises(CorruptFactorizationError):
            Factorization(kernel=[3, 4], ymap=[1, 1]).validate()

    def test_json_round_trip(self, small_matrix):
        f = factorize(small_matrix)
        assert factorization_from_json(factorization_to_json(f)) == f

    @pytest.mark.parametrize("kernel,data", [([3, 3], [1, 2]), ([3, 4], [1, 1]), ([3], [0, 2])])
    def test_json_rejects_corrupt(self, kernel, data):
        obj = {"kernel": kernel, "ymap": {"shape": [2], "data": data}}
        with pytest.raises(CorruptFactorizationError):
            factorization_from_json(obj)


class TestBounds:
    @pytest.mark.parametrize("shape,k,expected", [((8, 3), 2, True), ((9, 3), 2, False), ((4, 3), 5, True)])
    def test_uniqueness(self, shape, k, expected):
        assert uniqueness_bound(shape, k) is expected

    def test_uniqueness_rank_one(self):
        with pytest.raises(NotApplicableError):
            uniqueness_bound((4,), 2)

    def test_kernel_size_bound(self, dot_vector, sparse_vector):
        assert kernel_size_bound(dot_vector) == 3
        assert kernel_size_bound(sparse_vector) == 7

    def test_kernel_size_bound_holds(self, rng):
        for _ in range(30):
            t = round_to_precision(as_tensor(rng.uniform(-1, 1, size=8)), 0.25)
            assert factorize(t).kernel_size <= kernel_size_bound(t, 0.25)


class TestPermute:
    def test_transpose(self, small_matrix):
        f = permute(factorize(small_matrix), (1, 0))
        assert reconstruct(f).values.tolist() == small_matrix.values.T.tolist()

    def test_not_a_permutation(self, small_matrix):
        with pytest.raises(ShapeMismatchError):
            permute(factorize(small_matrix), (0, 0))
