import math
import unittest

import numpy as np

from neuroaps.api.exceptions import InvalidInputException, NumericalException, ShapeException
from neuroaps.autodiff import (AdamState, Tape, adam_step, concat, cross_entropy, finite_difference_check, linear,
                               masked_max_pool, matmul, reduce_sum, relu, replace_rows, scaled_dot_attention, softmax,
                               take_rows)


def half_square(x):
    """0.5 * sum(x^2), recorded as a single primitive."""
    tape = x.tape
    data = np.asarray(0.5 * np.sum(x.data * x.data), dtype=x.dtype)
    return tape.record_op("half_square", (x,), data, lambda grad: (grad * x.data,))


class PrimitiveTest(unittest.TestCase):

    def setUp(self):
        self.tape = Tape(np.float64)

    def test_relu(self):
        out = relu(self.tape.watch([[-1.0, 0.0, 2.0]]))
        assert out.data.tolist() == [[0.0, 0.0, 2.0]]

    def test_matmul_identity(self):
        x = np.random.default_rng(0).normal(size=(3, 4))
        out = matmul(self.tape.constant(np.eye(3)), self.tape.watch(x))
        assert np.array_equal(out.data, x)

    def test_matmul_shape_mismatch(self):
        with self.assertRaises(ShapeException):
            matmul(self.tape.watch(np.ones((2, 3))), self.tape.watch(np.ones((2, 3))))

    def test_softmax_is_stable(self):
        probs = softmax(self.tape.watch([[1e4, -1e4, 0.0], [3.0, 3.0, 3.0]])).data
        assert np.all(probs >= 0)
        assert np.all(np.abs(probs.sum(axis=1) - 1.0) < 1e-12)
        assert np.allclose(probs[1], 1.0 / 3.0)

    def test_concat_and_take_rows(self):
        a = self.tape.watch(np.arange(6.0).reshape(2, 3))
        b = self.tape.watch(np.arange(4.0).reshape(2, 2))
        joined = concat([a, b], axis=1)
        assert joined.shape == (2, 5)
        row = take_rows(joined, [1])
        assert row.data.tolist() == [[3.0, 4.0, 5.0, 2.0, 3.0]]
        self.tape.backward(reduce_sum(row))
        assert a.grad.tolist() == [[0.0, 0.0, 0.0], [1.0, 1.0, 1.0]]
        assert b.grad.tolist() == [[0.0, 0.0], [1.0, 1.0]]

    def test_replace_rows(self):
        a = self.tape.watch(np.ones((3, 2)))
        token = self.tape.watch([5.0, 6.0])
        out = replace_rows(a, np.array([False, True, False]), token)
        assert out.data.tolist() == [[1.0, 1.0], [5.0, 6.0], [1.0, 1.0]]
        self.tape.backward(reduce_sum(out))
        assert token.grad.tolist() == [1.0, 1.0]
        assert a.grad.tolist() == [[1.0, 1.0], [0.0, 0.0], [1.0, 1.0]]

    def test_non_finite_output(self):
        with self.assertRaises(NumericalException):
            matmul(self.tape.watch([[1e300]]), self.tape.watch([[1e300]]))


class MaxPoolTest(unittest.TestCase):

    def setUp(self):
        self.tape = Tape(np.float64)

    def test_single_group(self):
        pooled = masked_max_pool(self.tape.watch([[1.0, 5.0], [3.0, 2.0]]), [0, 0], 1)
        assert pooled.tokens.data.tolist() == [[3.0, 5.0]]
        assert pooled.argmax.tolist() == [[1, 0]]

    def test_one_point_per_group(self):
        features = np.random.default_rng(1).normal(size=(4, 3))
        pooled = masked_max_pool(self.tape.watch(features), [0, 1, 2, 3], 4)
        assert np.array_equal(pooled.tokens.data, features)

    def test_matches_loop(self):
        rng = np.random.default_rng(2)
        features = rng.normal(size=(16, 4))
        groups = rng.integers(0, 3, size=16)
        groups[:3] = [0, 1, 2]
        pooled = masked_max_pool(self.tape.watch(features), groups, 3)
        for g in range(3):
            assert np.array_equal(pooled.tokens.data[g], features[groups == g].max(axis=0))

    def test_empty_group(self):
        pooled = masked_max_pool(self.tape.watch([[1.0], [2.0]]), [0, 0], 2)
        assert pooled.empty.tolist() == [False, True]
        assert pooled.tokens.data[1].tolist() == [0.0]
        assert pooled.argmax[1].tolist() == [-1]

    def test_ties_go_to_lowest_index(self):
        pooled = masked_max_pool(self.tape.watch([[2.0], [2.0], [1.0]]), [0, 0, 0], 1)
        assert pooled.argmax.tolist() == [[0]]

    def test_invalid_group(self):
        with self.assertRaises(InvalidInputException):
            masked_max_pool(self.tape.watch([[1.0], [2.0]]), [0, 2], 2)

    def test_gradient_routes_to_argmax(self):
        features = self.tape.watch([[1.0, 5.0], [3.0, 2.0], [0.0, 9.0]])
        pooled = masked_max_pool(features, [0, 0, 1], 2)
        self.tape.backward(reduce_sum(pooled.tokens))
        assert features.grad.tolist() == [[0.0, 1.0], [1.0, 0.0], [1.0, 1.0]]


class AttentionTest(unittest.TestCase):

    def setUp(self):
        self.tape = Tape(np.float64)

    def test_single_key(self):
        value = [[0.5, -1.0, 2.0]]
        out, weights = scaled_dot_attention(self.tape.watch([[1.0, 2.0, 3.0]]), self.tape.watch([[0.1, 0.2, 0.3]]),
                                            self.tape.watch(value))
        assert weights.tolist() == [1.0]
        assert np.allclose(out.data, value, rtol=0, atol=1e-15)

    def test_identical_keys(self):
        keys = np.tile([[0.3, -0.2]], (4, 1))
        _, weights = scaled_dot_attention(self.tape.watch([[1.0, 1.0]]), self.tape.watch(keys),
                                          self.tape.watch(np.random.default_rng(0).normal(size=(4, 2))))
        assert np.allclose(weights, 0.25, rtol=0, atol=1e-15)

    def test_matches_loop(self):
        rng = np.random.default_rng(4)
        q, k, v = rng.normal(size=(1, 8)), rng.normal(size=(4, 8)), rng.normal(size=(4, 8))
        out, weights = scaled_dot_attention(self.tape.watch(q), self.tape.watch(k), self.tape.watch(v))
        scores = [sum(q[0, d] * k[g, d] for d in range(8)) / math.sqrt(8) for g in range(4)]
        top = max(scores)
        exps = [math.exp(s - top) for s in scores]
        expected_w = [e / sum(exps) for e in exps]
        expected_out = [sum(expected_w[g] * v[g, d] for g in range(4)) for d in range(8)]
        assert np.max(np.abs(weights - expected_w)) < 1e-10
        assert np.max(np.abs(out.data[0] - expected_out)) < 1e-10

    def test_shape_mismatch(self):
        with self.assertRaises(ShapeException):
            scaled_dot_attention(self.tape.watch(np.ones((1, 3))), self.tape.watch(np.ones((4, 2))),
                                 self.tape.watch(np.ones((4, 2))))


class CrossEntropyTest(unittest.TestCase):

    def setUp(self):
        self.tape = Tape(np.float64)

    def test_equal_logits(self):
        assert abs(cross_entropy(self.tape.watch([0.0, 0.0]), [0]).item() - math.log(2.0)) < 1e-15

    def test_confident_logits(self):
        loss = cross_entropy(self.tape.watch([10.0, -10.0]), [0]).item()
        assert abs(loss - math.log1p(math.exp(-20.0))) < 1e-15
        assert 0 < loss < 3e-9

    def test_gradient(self):
        logits = self.tape.watch([0.0, 0.0])
        self.tape.backward(cross_entropy(logits, [1]))
        assert np.allclose(logits.grad, [0.5, -0.5], rtol=0, atol=1e-15)

    def test_batch_mean(self):
        loss = cross_entropy(self.tape.watch([[0.0, 0.0], [10.0, -10.0]]), [1, 0]).item()
        assert abs(loss - (math.log(2.0) + math.log1p(math.exp(-20.0))) / 2) < 1e-15

    def test_class_out_of_range(self):
        with self.assertRaises(InvalidInputException):
            cross_entropy(self.tape.watch([0.0, 0.0]), [2])


class AdamTest(unittest.TestCase):

    def test_zero_gradient(self):
        params = {"w": np.array([1.0, -2.0])}
        updated, state = adam_step(params, {"w": np.zeros(2)}, AdamState())
        assert np.array_equal(updated["w"], params["w"])
        assert state.step == 1

    def test_first_step_moves_by_learning_rate(self):
        params = {"w": np.array([0.5])}
        updated, _ = adam_step(params, {"w": np.array([1.0])}, AdamState(learning_rate=1e-3))
        assert abs((params["w"][0] - updated["w"][0]) - 1e-3) < 1e-7

    def test_inputs_untouched(self):
        params = {"w": np.array([0.5, 0.25])}
        state = AdamState()
        adam_step(params, {"w": np.array([1.0, 1.0])}, state)
        assert params["w"].tolist() == [0.5, 0.25]
        assert state.step == 0 and not state.m

    def test_deterministic(self):
        params = {"w": np.array([0.5, 0.25])}
        grads = {"w": np.array([0.3, -0.1])}
        a, sa = adam_step(params, grads, AdamState())
        b, sb = adam_step(params, grads, AdamState())
        assert np.array_equal(a["w"], b["w"])
        assert np.array_equal(sa.v["w"], sb.v["w"])

    def test_shape_mismatch(self):
        with self.assertRaises(ShapeException):
            adam_step({"w": np.zeros(2)}, {"w": np.zeros(3)}, AdamState())


class TapeTest(unittest.TestCase):

    def test_inference_records_nothing(self):
        tape = Tape(np.float64, record=False)
        x = tape.watch(np.ones((2, 2)))
        relu(matmul(x, x))
        assert tape.nodes == []
        assert tape.peak_live_bytes == 3 * 32

    def test_reset(self):
        tape = Tape(np.float64)
        relu(tape.watch(np.ones((4, 4))))
        assert tape.peak_live_bytes > 0
        tape.reset()
        assert tape.peak_live_bytes == 0 and tape.nodes == []

    def test_backward_needs_scalar(self):
        tape = Tape(np.float64)
        with self.assertRaises(ShapeException):
            tape.backward(relu(tape.watch(np.ones((2, 2)))))


class GradCheckTest(unittest.TestCase):

    def test_half_square(self):
        signs = np.where(np.arange(64) % 2, 1.0, -1.0).reshape(8, 8)
        theta = np.random.default_rng(0).uniform(0.5, 1.0, size=(8, 8)) * signs
        report = finite_difference_check(lambda p: half_square(p["theta"]), {"theta": theta}, h=1e-3)
        assert report.checked == 64
        assert report.max_rel_error < 1e-9

    def test_relu_network(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=(5, 3))
        params = {"w": rng.normal(size=(3, 4)), "b": rng.normal(size=4)}

        def loss_fn(p):
            return reduce_sum(relu(linear(p["w"].tape.constant(x), p["w"], p["b"])))

        report = finite_difference_check(loss_fn, params, h=1e-5, floor=1e-3)
        assert report.checked > 0
        assert report.max_rel_error < 1e-6

    def test_zero_coordinates(self):
        report = finite_difference_check(lambda p: half_square(p["theta"]), {"theta": np.ones(3)}, n_coords=0)
        assert report.checked == 0 and report.worst is None

    def test_non_finite_loss(self):
        with self.assertRaises(NumericalException):
            finite_difference_check(lambda p: half_square(p["theta"]), {"theta": np.array([1e200])})


if __name__ == '__main__':
    unittest.main()
