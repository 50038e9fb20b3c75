import numpy as np
import pytest

from finegate import tensor as T


def make_loss_fn(build, probe_seed=123):
    """Wrap a graph builder as f(arrays) -> (loss, grads) for gradcheck.

    ``build(tape, leaves)`` returns the output tensor; the loss is the sum of
    the output times a fixed random probe so every output coordinate
    influences the scalar.
    """
    probe_cache = {}

    def f(arrays):
        tape = T.Tape()
        leaves = [tape.leaf(a) for a in arrays]
        out = build(tape, leaves)
        if out.shape not in probe_cache:
            rng = np.random.default_rng(probe_seed)
            probe_cache[out.shape] = rng.standard_normal(out.shape)
        w = tape.leaf(probe_cache[out.shape])
        loss = T.sum_all(T.mul(out, w))
        tape.backward(loss)
        return float(loss.data), [tape.grad(leaf) for leaf in leaves]

    return f


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
