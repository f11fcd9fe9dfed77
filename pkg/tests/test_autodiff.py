import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lfdepth.autodiff import (Graph, GraphError, ShapeMismatchError, Tensor, UnknownOpError,
                              absolute, add, backward, concat, exp, forward_op, leaky_relu,
                              masked_variance, mean, mul, op_kinds, rotate90, smul, softmax,
                              stack, variance)
from lfdepth.gradcheck import gradcheck_op
from oracles import finite_difference_grad, rel_err, variance_population


class TestForwardExamples:
    def test_variance_of_1_2_3(self):
        # independent recomputation of the population variance
        expected = variance_population([1.0, 2.0, 3.0])
        got = variance(Tensor([1.0, 2.0, 3.0]), axis=0).item()
        assert got == pytest.approx(expected, abs=1e-12)
        assert expected == pytest.approx(2.0 / 3.0)

    def test_softmax_uniform(self):
        out = softmax(Tensor(np.zeros(7)), axis=0)
        assert np.allclose(out.data, 1.0 / 7.0)

    def test_leaky_relu_values(self):
        out = leaky_relu(Tensor([-2.0, 3.0]), slope=0.1)
        assert out.data == pytest.approx([-0.2, 3.0])

    def test_variance_of_constant_slice_is_exactly_zero(self):
        t = Tensor(np.full((3, 5, 5), 0.73))
        assert np.all(variance(t, axis=0).data == 0.0)

    def test_forward_is_deterministic_bitwise(self):
        rng = np.random.default_rng(0)
        x = Tensor(rng.standard_normal((4, 9, 9)))
        w = Tensor(rng.standard_normal((3, 4, 3, 3)))
        a = forward_op("conv2d", [x, w], {"padding": 1}).data
        b = forward_op("conv2d", [x, w], {"padding": 1}).data
        assert np.array_equal(a, b) and a.tobytes() == b.tobytes()


class TestBackwardExamples:
    def test_mean_gradient(self):
        x = Tensor([1.0, 5.0, -2.0, 9.0], requires_grad=True)
        g = Graph()
        with g:
            loss = mean(x)
        g.backward(loss)
        assert np.allclose(x.grad, [0.25, 0.25, 0.25, 0.25])

    def test_sum_of_squares_gradient(self):
        x = Tensor([1.0, -2.0], requires_grad=True)
        g = Graph()
        with g:
            loss = smul(mean(mul(x, x)), 2.0)  # sum(x*x)
        backward(g, loss)
        assert np.allclose(x.grad, [2.0, -4.0])

    def test_random_five_op_composition_matches_finite_differences(self):
        rng = np.random.default_rng(3)
        x = Tensor(rng.uniform(0.2, 1.0, (3, 3)), requires_grad=True, dtype=np.float64)
        y = Tensor(rng.uniform(0.2, 1.0, (3, 3)), requires_grad=True, dtype=np.float64)

        def forward():
            a = mul(x, y)
            b = exp(smul(a, 0.5))
            c = add(b, absolute(y))
            d = leaky_relu(c, 0.1)
            return mean(d)

        g = Graph()
        with g:
            loss = forward()
        g.backward(loss)
        for t in (x, y):
            num = finite_difference_grad(lambda: forward().item(), t.data)
            assert rel_err(t.grad, num) < 1e-6

    def test_gradient_accumulates_over_reuse(self):
        x = Tensor([2.0], requires_grad=True)
        g = Graph()
        with g:
            loss = mean(mul(x, x))
        g.backward(loss)
        assert np.allclose(x.grad, [4.0])


class TestGradcheckExamples:
    def test_add_is_tight(self):
        assert gradcheck_op("add", trials=10) < 1e-6

    def test_conv2d(self):
        assert gradcheck_op("conv2d", trials=10) < 1e-4

    def test_bilinear_sample(self):
        assert gradcheck_op("bilinear-sample", trials=10) < 1e-4


class TestProperties:
    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2 ** 32 - 1), st.integers(2, 9))
    def test_softmax_nonnegative_sums_to_one(self, seed, d):
        rng = np.random.default_rng(seed)
        out = softmax(Tensor(rng.uniform(-20, 20, (d, 4, 4))), axis=0).data
        assert (out >= 0).all()
        assert np.abs(out.sum(axis=0) - 1.0).max() < 1e-6

    def test_rotate90_four_times_is_identity(self):
        rng = np.random.default_rng(1)
        t = Tensor(rng.standard_normal((2, 5, 7)))
        out = t
        for _ in range(4):
            out = rotate90(out, k=1)
        assert np.array_equal(out.data, t.data)

    def test_rotate90_round_trip(self):
        rng = np.random.default_rng(2)
        t = Tensor(rng.standard_normal((5, 7)))
        assert np.array_equal(rotate90(rotate90(t, k=1), k=-1).data, t.data)

    def test_masked_variance_all_valid_equals_variance(self):
        rng = np.random.default_rng(5)
        t = Tensor(rng.standard_normal((3, 2, 4, 4)))
        w = Tensor(np.ones((3, 1, 4, 4)))
        assert np.allclose(masked_variance(t, w, 0).data, variance(t, 0).data, atol=1e-12)


class TestErrors:
    def test_shape_mismatch_names_axes(self):
        with pytest.raises(ShapeMismatchError, match="axis"):
            add(Tensor(np.zeros((3, 4))), Tensor(np.zeros((3, 5))))

    def test_unknown_kind(self):
        with pytest.raises(UnknownOpError, match="frobnicate"):
            forward_op("frobnicate", [Tensor([1.0])])

    def test_conv_channel_mismatch_message(self):
        with pytest.raises(ShapeMismatchError, match="channels"):
            forward_op("conv2d", [Tensor(np.zeros((3, 8, 8))), Tensor(np.zeros((4, 2, 3, 3)))])

    def test_non_scalar_loss(self):
        x = Tensor(np.ones(3), requires_grad=True)
        g = Graph()
        with g:
            y = mul(x, x)
        with pytest.raises(GraphError, match="scalar"):
            g.backward(y)

    def test_mutation_after_backward(self):
        x = Tensor(np.ones(3), requires_grad=True)
        g = Graph()
        with g:
            loss = mean(x)
        g.backward(loss)
        with pytest.raises(GraphError, match="backward"):
            with g:
                mean(x)

    def test_graphs_do_not_nest(self):
        g1, g2 = Graph(), Graph()
        with g1:
            with pytest.raises(GraphError, match="nest"):
                g2.__enter__()

    def test_mixed_dtype_rejected(self):
        with pytest.raises(TypeError, match="dtype"):
            add(Tensor(np.zeros(3), dtype=np.float32), Tensor(np.zeros(3), dtype=np.float64))

    def test_concat_incompatible_shapes(self):
        with pytest.raises(ShapeMismatchError):
            concat([Tensor(np.zeros((2, 3))), Tensor(np.zeros((2, 4)))], axis=0)

    def test_stack_requires_equal_shapes(self):
        with pytest.raises(ShapeMismatchError):
            stack([Tensor(np.zeros((2, 3))), Tensor(np.zeros((2, 4)))], axis=0)


def test_op_registry_covers_pipeline_set():
    kinds = set(op_kinds())
    needed = {"add", "sub", "mul", "scalar-mul", "abs", "exp", "leaky-relu", "conv2d",
              "conv3d", "mean-reduce", "variance-reduce", "softmax", "inner-product",
              "bilinear-sample", "concat", "avg-pool", "nearest-upsample",
              "trilinear-upsample", "spatial-gradient", "rotate90"}
    assert needed <= kinds
