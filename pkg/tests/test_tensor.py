"""
Unit tests for the Tensor type and the backward pass.
"""

import threading

import numpy as np
import pytest

from activespeaker import functional as F
from activespeaker.exceptions import InvalidArgumentError, NumericError
from activespeaker.tensor import (
    OpGraph,
    Tensor,
    backward,
    get_default_dtype,
    is_grad_enabled,
    no_grad,
    precision,
    set_precision,
)


class TestTensor:
    """Test cases for Tensor construction and operators."""

    def setup_method(self):
        self.x = Tensor([[1.0, 2.0], [3.0, 4.0]], requires_grad=True, name="x")

    def test_default_dtype_is_float32(self):
        """Test that integer input is stored as 32-bit floats."""
        t = Tensor([1, 2, 3])
        assert t.dtype == np.float32
        assert t.shape == (3,)
        assert t.size == 3

    def test_precision_context_restores_default(self):
        """Test the temporary 64-bit switch."""
        with precision("float64"):
            assert Tensor([1, 2]).dtype == np.float64
        assert get_default_dtype() == np.float32

    def test_unknown_precision(self):
        """Test that an unknown precision name is rejected."""
        with pytest.raises(InvalidArgumentError):
            set_precision("float16")

    def test_repr_contains_name(self):
        """Test repr."""
        assert "name='x'" in repr(self.x)
        assert "(2, 2)" in repr(self.x)

    def test_operators_build_graph(self):
        """Test that arithmetic records a differentiable result."""
        y = (self.x * 2.0 + 1.0) / 2.0 - self.x
        assert y.requires_grad
        assert not y.is_leaf
        np.testing.assert_allclose(y.numpy(), np.full((2, 2), 0.5))

    def test_item(self):
        """Test scalar extraction."""
        assert self.x.sum().item() == pytest.approx(10.0)

    def test_non_finite_output_raises(self):
        """Test that NaN/Inf produced by an op is reported with the op name."""
        with pytest.raises(NumericError) as exc_info:
            F.log(Tensor([0.0, 1.0]))
        assert exc_info.value.op_name == "Log"
        assert exc_info.value.n_bad == 1

    def test_no_grad(self):
        """Test that no graph is recorded under no_grad."""
        with no_grad():
            y = self.x * 3.0
            assert not is_grad_enabled()
        assert is_grad_enabled()
        assert not y.requires_grad
        assert y.is_leaf

    def test_no_grad_is_thread_local(self):
        """Test that disabling gradients on one thread does not affect another."""
        seen = []

        def worker():
            seen.append(is_grad_enabled())

        with no_grad():
            thread = threading.Thread(target=worker)
            thread.start()
            thread.join()
        assert seen == [True]


class TestBackward:
    """Test cases for reverse-mode differentiation."""

    def test_sum_gradient_is_ones(self):
        """Test loss = sum(x)."""
        x = Tensor(np.arange(6.0).reshape(2, 3), requires_grad=True)
        x.sum().backward()
        np.testing.assert_array_equal(x.grad, np.ones((2, 3)))

    def test_square_gradient(self):
        """Test loss = sum(x * x) at x = [1, 2]."""
        x = Tensor([1.0, 2.0], requires_grad=True)
        (x * x).sum().backward()
        np.testing.assert_allclose(x.grad, [2.0, 4.0])

    def test_returns_leaf_gradients(self):
        """Test the id(leaf) -> gradient mapping returned by backward."""
        a = Tensor([1.0, 2.0], requires_grad=True)
        b = Tensor([3.0, 4.0], requires_grad=True)
        loss = (a * b).sum()
        grads = backward(OpGraph.from_output(loss), loss)
        np.testing.assert_allclose(grads[id(a)], [3.0, 4.0])
        np.testing.assert_allclose(grads[id(b)], [1.0, 2.0])

    def test_constant_inputs_get_no_gradient(self):
        """Test that tensors without requires_grad are left alone."""
        a = Tensor([1.0, 2.0], requires_grad=True)
        c = Tensor([5.0, 5.0])
        (a * c).sum().backward()
        assert c.grad is None
        np.testing.assert_allclose(a.grad, [5.0, 5.0])

    def test_shared_subexpression_accumulates(self):
        """Test that a node used twice receives the sum of both paths."""
        x = Tensor([3.0], requires_grad=True)
        y = x * 2.0
        (y * y + y).sum().backward()
        # d/dx (4x^2 + 2x) = 8x + 2
        np.testing.assert_allclose(x.grad, [26.0])

    def test_non_scalar_loss_raises(self):
        """Test that backward needs a scalar."""
        x = Tensor([1.0, 2.0], requires_grad=True)
        with pytest.raises(InvalidArgumentError):
            (x * 2.0).backward()

    def test_graph_order_is_topological(self):
        """Test that every node's parents precede it."""
        x = Tensor([1.0, 2.0], requires_grad=True)
        w = Tensor([0.5, -1.0], requires_grad=True)
        loss = F.sigmoid(x * w + x).sum()
        graph = OpGraph.from_output(loss)
        position = {id(t): i for i, t in enumerate(graph.order)}
        for node in graph.nodes:
            for parent in node._ctx.parents:
                if parent.requires_grad:
                    assert position[id(parent)] < position[id(node)]
        assert len(graph.order) == len({id(t) for t in graph.order})
        assert {id(t) for t in graph.leaves} == {id(x), id(w)}

    def test_backward_is_deterministic(self):
        """Test that two runs on the same graph give bit-identical gradients."""
        rng = np.random.default_rng(1)
        x_data, w_data = rng.standard_normal((4, 6)), rng.standard_normal((3, 6))

        def run():
            x = Tensor(x_data, requires_grad=True)
            w = Tensor(w_data, requires_grad=True)
            F.softmax(F.linear(x, w), axis=-1).mean().backward()
            return x.grad.copy(), w.grad.copy()

        first, second = run(), run()
        assert np.array_equal(first[0], second[0])
        assert np.array_equal(first[1], second[1])

    def test_deep_chain_does_not_recurse(self):
        """Test a graph deeper than the default recursion limit."""
        x = Tensor([1.0], requires_grad=True)
        y = x
        for _ in range(3000):
            y = y + 0.0
        y.sum().backward()
        np.testing.assert_allclose(x.grad, [1.0])
