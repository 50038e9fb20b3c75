"""Tensor core: forward values, shape errors, gradients, tape behavior."""

import numpy as np
import pytest

from finegate import tensor as T
from finegate.errors import ContractError, DimensionError
from finegate.gradcheck import check_gradients

from conftest import make_loss_fn


def _leafed(*arrays):
    tape = T.Tape()
    return tape, [tape.leaf(a) for a in arrays]


class TestMatmul:
    def test_identity(self):
        _, (a, b) = _leafed(np.eye(2), np.array([[3.0], [4.0]]))
        assert np.array_equal(T.matmul(a, b).data, [[3.0], [4.0]])

    def test_row_times_column(self):
        _, (a, b) = _leafed(np.array([[1.0, 2.0]]), np.array([[3.0], [4.0]]))
        assert np.array_equal(T.matmul(a, b).data, [[11.0]])

    def test_shape_mismatch_names_both_shapes(self):
        _, (a, b) = _leafed(np.zeros((2, 3)), np.zeros((2, 3)))
        with pytest.raises(DimensionError, match=r"\(2, 3\).*\(2, 3\)"):
            T.matmul(a, b)

    def test_gradient_random_3x4_by_4x2(self):
        for seed in range(100):
            rng = np.random.default_rng(seed)
            arrays = [rng.standard_normal((3, 4)), rng.standard_normal((4, 2))]
            f = make_loss_fn(lambda tape, lv: T.matmul(lv[0], lv[1]))
            assert check_gradients(f, arrays) < 1e-4


class TestElementwise:
    def test_sigmoid_at_zero(self):
        _, (x,) = _leafed(np.zeros(2))
        assert np.array_equal(T.sigmoid(x).data, [0.5, 0.5])

    def test_mul_values(self):
        _, (a, b) = _leafed(np.array([1.0, 2.0, 3.0]), np.array([4.0, 5.0, 6.0]))
        assert np.array_equal(T.mul(a, b).data, [4.0, 10.0, 18.0])

    def test_binary_shape_mismatch(self):
        _, (a, b) = _leafed(np.zeros(3), np.zeros(4))
        for op in (T.add, T.sub, T.mul):
            with pytest.raises(DimensionError):
                op(a, b)

    def test_tanh_gradient_at_03(self):
        f = make_loss_fn(lambda tape, lv: T.tanh(lv[0]))
        assert check_gradients(f, [np.array([0.3])]) < 1e-4

    @pytest.mark.parametrize("build", [
        lambda t, lv: T.add(lv[0], lv[1]),
        lambda t, lv: T.sub(lv[0], lv[1]),
        lambda t, lv: T.mul(lv[0], lv[1]),
    ], ids=["add", "sub", "mul"])
    def test_binary_gradients(self, build):
        for seed in range(100):
            rng = np.random.default_rng(seed)
            arrays = [rng.standard_normal((3, 2)), rng.standard_normal((3, 2))]
            assert check_gradients(make_loss_fn(build), arrays) < 1e-4

    @pytest.mark.parametrize("build", [
        lambda t, lv: T.sigmoid(lv[0]),
        lambda t, lv: T.tanh(lv[0]),
        lambda t, lv: T.scale(lv[0], -1.7),
        lambda t, lv: T.one_minus(lv[0]),
    ], ids=["sigmoid", "tanh", "scale", "one_minus"])
    def test_unary_gradients(self, build):
        for seed in range(100):
            rng = np.random.default_rng(seed)
            assert check_gradients(make_loss_fn(build), [rng.standard_normal(5)]) < 1e-4


class TestSoftmax:
    def test_uniform(self):
        _, (x,) = _leafed(np.zeros(3))
        np.testing.assert_allclose(T.softmax(x).data, np.full(3, 1.0 / 3.0), rtol=0, atol=1e-15)

    def test_large_logits_no_overflow(self):
        _, (x,) = _leafed(np.array([1000.0, 1000.0]))
        out = T.softmax(x).data
        assert np.all(np.isfinite(out))
        np.testing.assert_allclose(out, [0.5, 0.5], atol=1e-15)

    def test_closed_form_values(self):
        # Independent closed form: e^z / sum(e^z).
        z = np.array([1.0, 2.0, 3.0])
        expected = np.exp(z) / np.exp(z).sum()
        np.testing.assert_allclose(expected, [0.09003057, 0.24472847, 0.66524096], atol=5e-9)
        _, (x,) = _leafed(z)
        np.testing.assert_allclose(T.softmax(x).data, expected, rtol=0, atol=1e-15)

    def test_sums_to_one_and_shift_invariance(self):
        for seed in range(100):
            rng = np.random.default_rng(seed)
            z = rng.standard_normal(7) * 5
            _, (a, b) = _leafed(z, z + 11.25)
            pa, pb = T.softmax(a).data, T.softmax(b).data
            assert abs(pa.sum() - 1.0) <= 1e-12
            assert np.all(np.abs(pa - pb) <= 1e-12)
            assert np.all(pa > 0)

    def test_empty_axis_rejected(self):
        with pytest.raises(DimensionError):
            tape = T.Tape()
            T.softmax(tape.leaf(np.zeros((2, 0))))

    def test_gradient_both_axes(self):
        for seed in range(100):
            rng = np.random.default_rng(seed)
            arrays = [rng.standard_normal((3, 4))]
            for axis in (0, 1):
                f = make_loss_fn(lambda tape, lv, ax=axis: T.softmax(lv[0], axis=ax))
                assert check_gradients(f, arrays) < 1e-4


class TestBackward:
    def test_sum_of_squares(self):
        tape = T.Tape()
        w = tape.leaf(np.array([1.0, 2.0]))
        loss = T.sum_all(T.mul(w, w))
        tape.backward(loss)
        assert np.array_equal(tape.grad(w), [2.0, 4.0])

    def test_unreachable_parameter_gets_zero(self):
        tape = T.Tape()
        w = tape.leaf(np.array([1.0, 2.0]))
        p = tape.leaf(np.array([5.0, 6.0]))
        tape.backward(T.sum_all(T.mul(w, w)))
        assert np.array_equal(tape.grad(p), [0.0, 0.0])

    def test_loss_grad_is_one(self):
        tape = T.Tape()
        w = tape.leaf(np.array([3.0]))
        loss = T.sum_all(w)
        grads = tape.backward(loss)
        assert grads[loss.node_id] == np.ones(())

    def test_non_scalar_loss_rejected(self):
        tape = T.Tape()
        w = tape.leaf(np.array([1.0, 2.0]))
        with pytest.raises(ContractError):
            tape.backward(T.mul(w, w))

    def test_leaf_reuse_accumulates_one_buffer(self):
        arr = np.array([2.0, 3.0])
        tape = T.Tape()
        a = tape.leaf(arr)
        b = tape.leaf(arr)
        assert a is b
        tape.backward(T.sum_all(T.add(a, T.mul(a, a))))
        assert np.array_equal(tape.grad(arr), [5.0, 7.0])


class TestStructuralOps:
    def test_concat_roundtrip_gradient(self):
        for seed in range(30):
            rng = np.random.default_rng(seed)
            arrays = [rng.standard_normal((2, 3)), rng.standard_normal((2, 2))]
            f = make_loss_fn(lambda tape, lv: T.concat(lv, axis=1))
            assert check_gradients(f, arrays) < 1e-4

    def test_take_rows_values_and_gradient(self):
        tape = T.Tape()
        m = tape.leaf(np.arange(12.0).reshape(4, 3))
        out = T.take_rows(m, [2, 0, 2])
        assert np.array_equal(out.data, [[6, 7, 8], [0, 1, 2], [6, 7, 8]])
        tape.backward(T.sum_all(out))
        assert np.array_equal(tape.grad(m), [[1, 1, 1], [0, 0, 0], [2, 2, 2], [0, 0, 0]])

    def test_take_rows_matches_onehot_matmul(self):
        # Row lookup is the matrix-vector product with a one-hot vector.
        rng = np.random.default_rng(3)
        e = rng.standard_normal((6, 4))
        onehot = np.zeros(6)
        onehot[4] = 1.0
        tape = T.Tape()
        lookup = T.take_row(tape.leaf(e), 4)
        product = T.matvec(T.transpose(tape.leaf(e)), tape.leaf(onehot))
        np.testing.assert_allclose(lookup.data, product.data, atol=1e-15)

    @pytest.mark.parametrize("build,shapes", [
        (lambda t, lv: T.matvec(lv[0], lv[1]), [(3, 4), (4,)]),
        (lambda t, lv: T.transpose(lv[0]), [(3, 4)]),
        (lambda t, lv: T.take_row(lv[0], 1), [(3, 4)]),
        (lambda t, lv: T.take_rows(lv[0], [1, 1, 2]), [(3, 4)]),
        (lambda t, lv: T.gather(lv[0], [0, 3, 3]), [(5,)]),
        (lambda t, lv: T.gather_pairs(lv[0], [2, 0, 1]), [(3, 4)]),
        (lambda t, lv: T.add_scalar(lv[0], lv[1]), [(3, 4), ()]),
        (lambda t, lv: T.scale_by(lv[0], lv[1]), [(3, 4), ()]),
        (lambda t, lv: T.add_rowvec(lv[0], lv[1]), [(3, 4), (4,)]),
        (lambda t, lv: T.mul_colvec(lv[0], lv[1]), [(3, 4), (3,)]),
        (lambda t, lv: T.log(T.sigmoid(lv[0])), [(4,)]),
        (lambda t, lv: T.stack_rows(lv), [(4,), (4,), (4,)]),
        (lambda t, lv: T.stack_steps(lv), [(2, 3), (2, 3)]),
        (lambda t, lv: T.slice_steps(lv[0], 1, 2), [(3, 4, 2)]),
        (lambda t, lv: T.pairwise_mul(lv[0], lv[1]), [(3, 4), (2, 4)]),
        (lambda t, lv: T.dot_last(lv[0], lv[1]), [(3, 2, 4), (4,)]),
        (lambda t, lv: T.attend_sum(lv[0], lv[1]), [(3, 2), (3, 2, 4)]),
        (lambda t, lv: T.dot_last_affine(lv[0], lv[1], np.eye(3, 2), lv[2], lv[3]),
         [(3, 2, 4), (4,), (), ()]),
        (lambda t, lv: T.concat(T.unpack_states(lv[0], lv[1], [2, 3, 1]), axis=0),
         [(3, 3, 2), (3, 3, 2)]),
        (lambda t, lv: T.concat(T.unpack_states(lv[0], None, [3, 1, 2]), axis=0),
         [(3, 3, 2)]),
        (lambda t, lv: T.pointer_log_mass(lv[0], [3, 2, 4], [[0, 2], [1], [3, 0]]),
         [(9,)]),
    ], ids=["matvec", "transpose", "take_row", "take_rows", "gather", "gather_pairs",
            "add_scalar", "scale_by", "add_rowvec", "mul_colvec", "log_sigmoid",
            "stack_rows", "stack_steps", "slice_steps", "pairwise_mul", "dot_last",
            "attend_sum", "dot_last_affine", "unpack_states", "unpack_states_fwd",
            "pointer_log_mass"])
    def test_gradients(self, build, shapes):
        for seed in range(25):
            rng = np.random.default_rng(seed)
            arrays = [rng.standard_normal(s) for s in shapes]
            assert check_gradients(make_loss_fn(build), arrays) < 1e-4


class TestTapeContracts:
    def test_nodes_are_topologically_ordered(self):
        tape = T.Tape()
        a = tape.leaf(np.ones(3))
        b = tape.leaf(np.full(3, 2.0))
        T.sum_all(T.mul(T.add(a, b), T.sigmoid(a)))
        seen = set()
        for node in tape.nodes:
            assert all(i in seen for i in node.input_ids)
            seen.update(node.output_ids)

    def test_mixed_tapes_rejected(self):
        t1, t2 = T.Tape(), T.Tape()
        a = t1.leaf(np.ones(2))
        b = t2.leaf(np.ones(2))
        with pytest.raises(ContractError):
            T.add(a, b)

    def test_replay_is_bit_identical(self):
        def run():
            rng = np.random.default_rng(99)
            tape = T.Tape()
            x = tape.leaf(rng.standard_normal((4, 3)))
            w = tape.leaf(rng.standard_normal((3, 2)))
            loss = T.sum_all(T.softmax(T.tanh(T.matmul(x, w)), axis=1))
            tape.backward(loss)
            return float(loss.data), tape.grad(w).copy()

        (l1, g1), (l2, g2) = run(), run()
        assert l1 == l2
        assert np.array_equal(g1, g2)

    def test_rank_limit(self):
        with pytest.raises(DimensionError):
            T.Tensor(np.zeros((2, 2, 2, 2)))

    def test_finite_outputs_for_bounded_params(self):
        for seed in range(20):
            rng = np.random.default_rng(seed)
            tape = T.Tape()
            x = tape.leaf(rng.uniform(-10, 10, size=(4, 4)))
            w = tape.leaf(rng.uniform(-10, 10, size=(4, 4)))
            out = T.softmax(T.sigmoid(T.matmul(x, w)), axis=1)
            assert np.all(np.isfinite(out.data))
