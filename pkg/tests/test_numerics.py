import unittest

import numpy as np
import torch
from parameterized import parameterized

from torch_lencon.internals.exceptions import ShapeError, NonFiniteError, InputValidationError
from torch_lencon.numerics import (
    ComputationTape, tensor, affine, elementwise, softmax, log_softmax, mask_logits, concat, stack, embedding_lookup,
    gradient_check, gradient_check_blocks, DTYPE
)


class TestPrimitives(unittest.TestCase):
    def test_affine(self):
        out = affine(torch.eye(2, dtype=DTYPE), tensor([3., 4.]), tensor([0., 0.]))
        self.assertListEqual(out.tolist(), [3., 4.])
        out = affine(tensor([[1., 2.], [3., 4.]]), tensor([1., 1.]), tensor([1., 0.]))
        self.assertListEqual(out.tolist(), [4., 7.])

    def test_affine_grad(self):
        W = tensor(np.random.randn(3, 2), requires_grad=True)
        x = tensor([.5, -2.], requires_grad=True)
        b = tensor([0., 0., 0.], requires_grad=True)
        affine(W, x, b).sum().backward()
        for row in W.grad.tolist():
            self.assertListEqual(row, [.5, -2.])

    def test_affine_batched(self):
        W = tensor(np.random.randn(3, 2))
        x = tensor(np.random.randn(5, 2))
        out = affine(W, x)
        self.assertEqual(tuple(out.shape), (5, 3))
        self.assertTrue(torch.allclose(out[2], affine(W, x[2])))
        # per-batch matrices:
        Ws = tensor(np.random.randn(5, 3, 2))
        self.assertTrue(torch.allclose(affine(Ws, x)[4], affine(Ws[4], x[4])))

    def test_affine_shape_error(self):
        with self.assertRaises(ShapeError) as cm:
            affine(tensor(np.zeros((2, 3))), tensor([1., 2.]))
        self.assertIn('[2, 3]', str(cm.exception))
        self.assertIn('[2]', str(cm.exception))

    def test_elementwise(self):
        self.assertEqual(elementwise('tanh', tensor([0.])).tolist(), [0.])
        self.assertEqual(elementwise('sigmoid', tensor([0.])).tolist(), [.5])
        self.assertEqual(elementwise('mul', tensor([2., 3.]), tensor([4., 5.])).tolist(), [8., 15.])
        with self.assertRaises(ShapeError):
            elementwise('add', tensor([1., 2.]), tensor([1.]))
        with self.assertRaises(ValueError):
            elementwise('relu', tensor([1.]))

    def test_softmax(self):
        self.assertTrue(np.allclose(softmax(tensor([1., 1., 1.])).numpy(), 1 / 3))
        self.assertTrue(np.allclose(softmax(tensor([0., np.log(3.)])).numpy(), [.25, .75]))
        masked = softmax(mask_logits(tensor([2., 1.]), [1]))
        self.assertLess(masked[1].item(), 1e-100)

    def test_softmax_shift_invariance(self):
        logits = tensor(np.random.randn(7))
        p1, p2 = softmax(logits), softmax(logits + 123.)
        self.assertEqual(int(p1.argmax()), int(p2.argmax()))
        self.assertLess((p1 - p2).abs().max().item(), 1e-12)
        self.assertLess(abs(p1.sum().item() - 1), 1e-12)
        self.assertTrue(torch.allclose(log_softmax(logits).exp(), p1))

    def test_softmax_non_finite(self):
        with self.assertRaises(NonFiniteError):
            softmax(tensor([1., float('nan')]))
        with self.assertRaises(NonFiniteError):
            log_softmax(tensor([1., float('inf')]))

    def test_concat(self):
        self.assertListEqual(concat(tensor([1.]), tensor([2.])).tolist(), [1., 2.])
        self.assertListEqual(concat(tensor([]), tensor([5.])).tolist(), [5.])
        a, b = tensor([1.], requires_grad=True), tensor([2., 3.], requires_grad=True)
        (concat(a, b) * tensor([10., 20., 30.])).sum().backward()
        self.assertListEqual(a.grad.tolist(), [10.])
        self.assertListEqual(b.grad.tolist(), [20., 30.])

    def test_stack(self):
        self.assertEqual(tuple(stack([tensor([1., 2.]), tensor([3., 4.])]).shape), (2, 2))
        with self.assertRaises(ShapeError):
            stack([tensor([1.]), tensor([1., 2.])])

    def test_embedding_lookup(self):
        E = tensor([[1., 2.], [3., 4.]], requires_grad=True)
        self.assertListEqual(embedding_lookup(E, 1).tolist(), [3., 4.])
        with self.assertRaises(InputValidationError):
            embedding_lookup(E, 2)
        embedding_lookup(E, 1).sum().backward()
        self.assertListEqual(E.grad.tolist(), [[0., 0.], [1., 1.]])


class TestComputationTape(unittest.TestCase):
    def test_reverse_order(self):
        W = tensor(np.random.randn(3, 3), requires_grad=True)
        x = tensor(np.random.randn(3), requires_grad=True)
        with ComputationTape() as tape:
            h = elementwise('tanh', affine(W, x))
            out = log_softmax(affine(W, h))
        self.assertListEqual(tape.op_names, ['affine', 'tanh', 'affine', 'log_softmax'])
        visited = tape.backward(out[0])
        self.assertListEqual(visited, [3, 2, 1, 0])

    def test_deterministic_backward(self):
        W = tensor(np.random.randn(4, 4), requires_grad=True)
        x = tensor(np.random.randn(4))

        def grads():
            W.grad = None
            with ComputationTape() as tape:
                loss = softmax(affine(W, x)).max()
            tape.backward(loss)
            return W.grad.clone()

        self.assertTrue(torch.equal(grads(), grads()))


class TestGradientCheck(unittest.TestCase):
    def test_quadratic(self):
        theta = tensor([1., 2.], requires_grad=True)
        self.assertLess(gradient_check(lambda: (theta ** 2).sum(), [theta]), 1e-8)

    def test_eps_zero(self):
        theta = tensor([1., 2.], requires_grad=True)
        with self.assertRaises(ValueError):
            gradient_check(lambda: (theta ** 2).sum(), [theta], eps=0)

    def test_non_finite_loss(self):
        theta = tensor([1.], requires_grad=True)
        with self.assertRaises(NonFiniteError):
            gradient_check(lambda: theta.sum() / 0., [theta])

    def test_detects_wrong_gradient(self):
        theta = tensor([1., 2.], requires_grad=True)

        def loss_fn():
            # the forward value is theta^2 but the gradient is only that of theta:
            return (theta + (theta ** 2 - theta).detach()).sum()

        self.assertGreater(gradient_check(loss_fn, [theta]), .1)

    @parameterized.expand([('tanh',), ('sigmoid',)])
    def test_unary_primitives(self, op: str):
        x = tensor(np.random.uniform(-1, 1, 5), requires_grad=True)
        self.assertLess(gradient_check(lambda: elementwise(op, x).sum(), [x]), 1e-5)

    def test_composite_primitives(self):
        rng = np.random.default_rng(3)
        params = {
            'W': tensor(rng.uniform(-1, 1, (4, 3)), requires_grad=True),
            'b': tensor(rng.uniform(-1, 1, 4), requires_grad=True),
            'E': tensor(rng.uniform(-1, 1, (5, 3)), requires_grad=True)
        }

        def loss_fn():
            x = embedding_lookup(params['E'], 2)
            h = elementwise('mul', elementwise('sigmoid', affine(params['W'], x, params['b'])),
                            elementwise('tanh', affine(params['W'], x)))
            return -log_softmax(concat(h, x))[1]

        errors = gradient_check_blocks(loss_fn, params)
        self.assertSetEqual(set(errors), {'W', 'b', 'E'})
        self.assertLess(max(errors.values()), 1e-5)
