"""GRU and LSTM cells plus sequence runners.

Each step is recorded on the tape as one fused node with a hand-derived
backward rule; the finite-difference suite in the tests pins these rules
down.  Step functions accept either a single vector (shape ``(I,)``) or a
batch of rows (shape ``(B, I)``); parameters are plain numpy arrays bound
to the active tape on use.

The GRU update follows h' = (1 - z) * h + z * h_tilde with
z = sigma(W_z [x; h] + b_z), r = sigma(W_r [x; h] + b_r) and
h_tilde = tanh(W_c [x; r * h] + b_c).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

import numpy as np
from scipy.special import expit

from . import tensor as T
from .errors import ContractError, DimensionError, EmptySequenceError

Mode = str        # "last_state" | "all_states"
Direction = str   # "forward" | "backward" | "bidirectional"

MODES = ("last_state", "all_states")
DIRECTIONS = ("forward", "backward", "bidirectional")


def _glorot(rng: np.random.Generator, rows: int, cols: int,
            gain: float = 1.0) -> np.ndarray:
    bound = gain * np.sqrt(6.0 / (rows + cols))
    return rng.uniform(-bound, bound, size=(rows, cols))


_sigmoid = expit


@dataclass
class GruParams:
    """Update/reset/candidate weights, each (hidden, input+hidden), plus biases."""

    input_dim: int
    hidden_dim: int
    w_z: np.ndarray = field(repr=False)
    w_r: np.ndarray = field(repr=False)
    w_c: np.ndarray = field(repr=False)
    b_z: np.ndarray = field(repr=False)
    b_r: np.ndarray = field(repr=False)
    b_c: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.hidden_dim <= 0:
            raise ContractError("GruParams: hidden_dim must be positive")
        for name, arr in self.named("gru"):
            if not np.all(np.isfinite(arr)):
                raise ContractError(f"GruParams: non-finite values in {name}")

    @classmethod
    def create(cls, rng: np.random.Generator, input_dim: int, hidden_dim: int,
               gain: float = 1.0) -> "GruParams":
        if input_dim <= 0 or hidden_dim <= 0:
            raise ContractError("GruParams: dimensions must be positive")
        cat = input_dim + hidden_dim
        return cls(input_dim, hidden_dim,
                   _glorot(rng, hidden_dim, cat, gain), _glorot(rng, hidden_dim, cat, gain),
                   _glorot(rng, hidden_dim, cat, gain),
                   np.zeros(hidden_dim), np.zeros(hidden_dim), np.zeros(hidden_dim))

    def named(self, prefix: str) -> Iterator[tuple[str, np.ndarray]]:
        for key in ("w_z", "w_r", "w_c", "b_z", "b_r", "b_c"):
            yield f"{prefix}.{key}", getattr(self, key)


@dataclass
class LstmParams:
    """Input/forget/output gate and cell-candidate weights plus biases."""

    input_dim: int
    hidden_dim: int
    w_i: np.ndarray = field(repr=False)
    w_f: np.ndarray = field(repr=False)
    w_o: np.ndarray = field(repr=False)
    w_u: np.ndarray = field(repr=False)
    b_i: np.ndarray = field(repr=False)
    b_f: np.ndarray = field(repr=False)
    b_o: np.ndarray = field(repr=False)
    b_u: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.hidden_dim <= 0:
            raise ContractError("LstmParams: hidden_dim must be positive")
        for name, arr in self.named("lstm"):
            if not np.all(np.isfinite(arr)):
                raise ContractError(f"LstmParams: non-finite values in {name}")

    @classmethod
    def create(cls, rng: np.random.Generator, input_dim: int, hidden_dim: int,
               forget_bias: float = 0.0) -> "LstmParams":
        if input_dim <= 0 or hidden_dim <= 0:
            raise ContractError("LstmParams: dimensions must be positive")
        cat = input_dim + hidden_dim
        return cls(input_dim, hidden_dim,
                   _glorot(rng, hidden_dim, cat), _glorot(rng, hidden_dim, cat),
                   _glorot(rng, hidden_dim, cat), _glorot(rng, hidden_dim, cat),
                   np.zeros(hidden_dim), np.full(hidden_dim, float(forget_bias)),
                   np.zeros(hidden_dim), np.zeros(hidden_dim))

    def named(self, prefix: str) -> Iterator[tuple[str, np.ndarray]]:
        for key in ("w_i", "w_f", "w_o", "w_u", "b_i", "b_f", "b_o", "b_u"):
            yield f"{prefix}.{key}", getattr(self, key)


def _check_step_shapes(name: str, params, x: T.Tensor, h: T.Tensor) -> bool:
    """Validate x/h against the cell dims; returns True when inputs are batched."""
    if x.data.ndim not in (1, 2) or x.data.ndim != h.data.ndim:
        raise DimensionError(f"{name}: x {x.shape} and h {h.shape} must both be "
                             "vectors or both be matrices")
    if x.shape[-1] != params.input_dim:
        raise DimensionError(f"{name}: input width {x.shape} != {params.input_dim}")
    if h.shape[-1] != params.hidden_dim:
        raise DimensionError(f"{name}: hidden width {h.shape} != {params.hidden_dim}")
    if x.data.ndim == 2 and x.shape[0] != h.shape[0]:
        raise DimensionError(f"{name}: batch sizes differ, {x.shape} vs {h.shape}")
    return x.data.ndim == 2


def gru_step(params: GruParams, x: T.Tensor, h_prev: T.Tensor) -> T.Tensor:
    batched = _check_step_shapes("gru_step", params, x, h_prev)
    tape = T._tape_of(x, h_prev)
    leaves = [tape.leaf(a) for a in (params.w_z, params.w_r, params.w_c,
                                     params.b_z, params.b_r, params.b_c)]
    wz, wr, wc, bz, br, bc = (lv.data for lv in leaves)

    x2 = x.data if batched else x.data[None, :]
    h2 = h_prev.data if batched else h_prev.data[None, :]
    i_dim = params.input_dim

    a = np.concatenate([x2, h2], axis=1)
    z = _sigmoid(a @ wz.T + bz)
    r = _sigmoid(a @ wr.T + br)
    ac = np.concatenate([x2, r * h2], axis=1)
    hc = np.tanh(ac @ wc.T + bc)
    out2 = (1.0 - z) * h2 + z * hc

    def back(g):
        g2 = g if batched else g[None, :]
        dz_pre = g2 * (hc - h2) * z * (1.0 - z)
        dhc_pre = g2 * z * (1.0 - hc * hc)
        dh = g2 * (1.0 - z)
        dac = dhc_pre @ wc
        drh = dac[:, i_dim:]
        dr_pre = drh * h2 * r * (1.0 - r)
        dh = dh + drh * r
        da = dz_pre @ wz + dr_pre @ wr
        dx = dac[:, :i_dim] + da[:, :i_dim]
        dh = dh + da[:, i_dim:]
        grads = (dx if batched else dx[0], dh if batched else dh[0],
                 dz_pre.T @ a, dr_pre.T @ a, dhc_pre.T @ ac,
                 dz_pre.sum(axis=0), dr_pre.sum(axis=0), dhc_pre.sum(axis=0))
        return grads

    out = out2 if batched else out2[0]
    return tape.record("gru_step", [x, h_prev] + leaves, [out], back)[0]


def lstm_step(params: LstmParams, x: T.Tensor, h_prev: T.Tensor,
              c_prev: T.Tensor) -> tuple[T.Tensor, T.Tensor]:
    batched = _check_step_shapes("lstm_step", params, x, h_prev)
    if c_prev.shape != h_prev.shape:
        raise DimensionError(f"lstm_step: cell state {c_prev.shape} != hidden {h_prev.shape}")
    tape = T._tape_of(x, h_prev, c_prev)
    leaves = [tape.leaf(a) for a in (params.w_i, params.w_f, params.w_o, params.w_u,
                                     params.b_i, params.b_f, params.b_o, params.b_u)]
    wi, wf, wo, wu, bi, bf, bo, bu = (lv.data for lv in leaves)

    x2 = x.data if batched else x.data[None, :]
    h2 = h_prev.data if batched else h_prev.data[None, :]
    c2 = c_prev.data if batched else c_prev.data[None, :]
    i_dim = params.input_dim

    a = np.concatenate([x2, h2], axis=1)
    gi = _sigmoid(a @ wi.T + bi)
    gf = _sigmoid(a @ wf.T + bf)
    go = _sigmoid(a @ wo.T + bo)
    u = np.tanh(a @ wu.T + bu)
    c_new = gf * c2 + gi * u
    tc = np.tanh(c_new)
    h_new = go * tc

    def back(gh, gc):
        gh2 = gh if batched else gh[None, :]
        gc2 = gc if batched else gc[None, :]
        do_pre = gh2 * tc * go * (1.0 - go)
        dc = gc2 + gh2 * go * (1.0 - tc * tc)
        di_pre = dc * u * gi * (1.0 - gi)
        df_pre = dc * c2 * gf * (1.0 - gf)
        du_pre = dc * gi * (1.0 - u * u)
        dc_prev = dc * gf
        da = di_pre @ wi + df_pre @ wf + do_pre @ wo + du_pre @ wu
        dx = da[:, :i_dim]
        dh = da[:, i_dim:]
        return (dx if batched else dx[0], dh if batched else dh[0],
                dc_prev if batched else dc_prev[0],
                di_pre.T @ a, df_pre.T @ a, do_pre.T @ a, du_pre.T @ a,
                di_pre.sum(axis=0), df_pre.sum(axis=0), do_pre.sum(axis=0),
                du_pre.sum(axis=0))

    if batched:
        outs = tape.record("lstm_step", [x, h_prev, c_prev] + leaves,
                           [h_new, c_new], back)
    else:
        outs = tape.record("lstm_step", [x, h_prev, c_prev] + leaves,
                           [h_new[0], c_new[0]], back)
    return outs[0], outs[1]


def _cell_step(cell, x, state):
    if isinstance(cell, GruParams):
        return gru_step(cell, x, state[0]), None
    h, c = lstm_step(cell, x, state[0], state[1])
    return h, c


def _run_one_direction(cell, inputs: T.Tensor, reverse: bool) -> list[T.Tensor]:
    """States aligned to input positions; position t's state covers t..end or start..t."""
    tape = inputs.tape
    t_len = inputs.shape[0]
    h = tape.leaf(np.zeros(cell.hidden_dim))
    c = tape.leaf(np.zeros(cell.hidden_dim)) if isinstance(cell, LstmParams) else None
    order = range(t_len - 1, -1, -1) if reverse else range(t_len)
    states: list[T.Tensor | None] = [None] * t_len
    for t in order:
        x_t = T.take_row(inputs, t)
        h, c = _cell_step(cell, x_t, (h, c)) if isinstance(cell, LstmParams) else \
            (gru_step(cell, x_t, h), None)
        states[t] = h
    return states  # type: ignore[return-value]


def run_sequence(cell: GruParams | LstmParams, inputs: T.Tensor,
                 mode: Mode = "last_state", direction: Direction = "forward") -> T.Tensor:
    """Run a cell over a (T, input_dim) sequence from zero initial state.

    ``last_state`` yields a vector of width hidden (2x hidden when
    bidirectional); ``all_states`` yields one row per time step.
    """
    if mode not in MODES:
        raise ContractError(f"run_sequence: unknown mode {mode!r}")
    if direction not in DIRECTIONS:
        raise ContractError(f"run_sequence: unknown direction {direction!r}")
    if inputs.data.ndim != 2:
        raise DimensionError(f"run_sequence: expects (T, input_dim), got {inputs.shape}")
    if inputs.shape[0] == 0:
        raise EmptySequenceError("run_sequence: empty sequence (T == 0)")
    if inputs.shape[1] != cell.input_dim:
        raise DimensionError(f"run_sequence: input width {inputs.shape} != {cell.input_dim}")

    if direction == "bidirectional":
        fwd = _run_one_direction(cell, inputs, reverse=False)
        bwd = _run_one_direction(cell, inputs, reverse=True)
        if mode == "last_state":
            return T.concat([fwd[-1], bwd[0]], axis=0)
        return T.stack_rows([T.concat([f, b], axis=0) for f, b in zip(fwd, bwd)])

    states = _run_one_direction(cell, inputs, reverse=(direction == "backward"))
    if mode == "last_state":
        return states[0] if direction == "backward" else states[-1]
    return T.stack_rows(states)
