"""Central finite-difference verification of tape gradients.

Two probes are provided.  ``check_gradients`` compares every coordinate of
every input against (f(x+h) - f(x-h)) / 2h and is meant for small inputs.
``directional_check`` perturbs all inputs along one random direction and
compares the directional derivative, which keeps large models affordable
(two extra forward passes instead of two per coordinate).
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

DEFAULT_STEP = 1e-4
DEFAULT_RTOL = 1e-4
# Noise floor for central differences in float64 on O(1) losses; gradients
# this small cannot be resolved at the relative tolerance.
DEFAULT_ATOL = 1e-8


def _close(analytic: float, numeric: float, rtol: float, atol: float) -> bool:
    return abs(analytic - numeric) <= rtol * max(abs(analytic), abs(numeric)) + atol


def check_gradients(f: Callable[[Sequence[np.ndarray]], tuple[float, list[np.ndarray]]],
                    arrays: Sequence[np.ndarray],
                    step: float = DEFAULT_STEP,
                    rtol: float = DEFAULT_RTOL,
                    atol: float = DEFAULT_ATOL) -> float:
    """Per-coordinate check; returns the worst relative error seen.

    ``f`` evaluates the scalar loss on ``arrays`` and returns
    ``(loss_value, [grad per array])``.  It must not mutate its inputs.
    """
    arrays = [np.asarray(a, dtype=np.float64) for a in arrays]
    _, grads = f(arrays)
    worst = 0.0
    for k, a in enumerate(arrays):
        flat = a.reshape(-1)
        g = np.asarray(grads[k]).reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            up, _ = f(arrays)
            flat[i] = orig - step
            down, _ = f(arrays)
            flat[i] = orig
            numeric = (up - down) / (2.0 * step)
            analytic = g[i]
            denom = max(abs(analytic), abs(numeric), atol / rtol)
            worst = max(worst, abs(analytic - numeric) / denom)
            if not _close(analytic, numeric, rtol, atol):
                raise AssertionError(
                    f"gradient mismatch in array {k} at flat index {i}: "
                    f"analytic {analytic:.10g} vs numeric {numeric:.10g}")
    return worst


def directional_check(f: Callable[[Sequence[np.ndarray]], tuple[float, list[np.ndarray]]],
                      arrays: Sequence[np.ndarray],
                      rng: np.random.Generator,
                      step: float = DEFAULT_STEP,
                      rtol: float = DEFAULT_RTOL,
                      atol: float = DEFAULT_ATOL) -> float:
    """Single random-direction check; returns the relative error."""
    arrays = [np.asarray(a, dtype=np.float64) for a in arrays]
    _, grads = f(arrays)
    dirs = [rng.standard_normal(a.shape) for a in arrays]
    norm = np.sqrt(sum(float((d * d).sum()) for d in dirs))
    dirs = [d / norm for d in dirs]

    analytic = sum(float((np.asarray(g) * d).sum()) for g, d in zip(grads, dirs))
    shifted = [a + step * d for a, d in zip(arrays, dirs)]
    up, _ = f(shifted)
    shifted = [a - step * d for a, d in zip(arrays, dirs)]
    down, _ = f(shifted)
    numeric = (up - down) / (2.0 * step)

    if not _close(analytic, numeric, rtol, atol):
        raise AssertionError(f"directional gradient mismatch: analytic {analytic:.10g} "
                             f"vs numeric {numeric:.10g}")
    denom = max(abs(analytic), abs(numeric), atol / rtol)
    return abs(analytic - numeric) / denom
