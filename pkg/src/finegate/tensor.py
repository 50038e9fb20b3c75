"""Dense float64 tensors with reverse-mode autodiff over a dynamic tape.

A ``Tape`` records every operation of one forward pass in creation order,
which is automatically a topological order (define-by-run).  ``Tensor``
values are numpy float64 arrays of rank 0 to 3; there is no implicit
broadcasting -- every shape combination an operation accepts is part of its
explicit contract, and mismatches raise :class:`DimensionError`.

Persistent parameters are plain numpy arrays owned by the caller.  Each
forward pass attaches them with :meth:`Tape.leaf`, which caches by array
identity so the same array always maps to one node per tape, and gradients
can later be read back with :meth:`Tape.grad` keyed by either the leaf
tensor or the original array.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np
from scipy.special import expit

from .errors import ContractError, DimensionError, require_shapes_match

MAX_RANK = 3


def _as_f64(data) -> np.ndarray:
    # asarray keeps rank-0 inputs rank-0 (ascontiguousarray would promote them).
    arr = np.asarray(data, dtype=np.float64, order="C")
    if arr.ndim > MAX_RANK:
        raise DimensionError(f"rank {arr.ndim} exceeds maximum rank {MAX_RANK}")
    return arr


class Tensor:
    """A tape-tracked value: numpy data plus its node id on the owning tape."""

    __slots__ = ("data", "tape", "node_id")

    def __init__(self, data, tape: "Tape | None" = None, node_id: int | None = None):
        self.data = _as_f64(data)
        self.tape = tape
        self.node_id = node_id

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, node_id={self.node_id})"


class _Node:
    __slots__ = ("op", "input_ids", "output_ids", "backward")

    def __init__(self, op: str, input_ids: tuple[int, ...], output_ids: tuple[int, ...],
                 backward: Callable | None):
        self.op = op
        self.input_ids = input_ids
        self.output_ids = output_ids
        self.backward = backward


class Tape:
    """Append-only record of one forward pass.

    Node inputs always precede the node itself, so a single reverse sweep in
    :meth:`backward` propagates gradients correctly.  Gradient buffers are
    allocated lazily; nodes the loss never reached simply keep no buffer and
    read back as zeros.
    """

    def __init__(self):
        self.nodes: list[_Node] = []
        self.grads: dict[int, np.ndarray] = {}
        self._tensors: list[Tensor] = []
        self._leaf_cache: dict[int, Tensor] = {}
        # Keeps every cached key object alive so its id() cannot be recycled
        # for a different array during this tape's lifetime.
        self._leaf_refs: list = []

    # ------------------------------------------------------------------ #
    # construction

    def _new_tensor(self, data) -> Tensor:
        t = Tensor(data, tape=self, node_id=len(self._tensors))
        self._tensors.append(t)
        return t

    def _new_result(self, data: np.ndarray) -> Tensor:
        # Op outputs are freshly produced float64 arrays; skip re-validation.
        t = Tensor.__new__(Tensor)
        t.data = data
        t.tape = self
        t.node_id = len(self._tensors)
        self._tensors.append(t)
        return t

    def leaf(self, array) -> Tensor:
        """Attach an external array (parameter or constant) as a leaf node.

        Calling leaf twice with the same array object returns the same
        tensor, so gradient contributions from every use accumulate in one
        buffer.
        """
        cached = self._leaf_cache.get(id(array))
        if cached is not None:
            return cached
        t = self._new_tensor(array)
        self.nodes.append(_Node("leaf", (), (t.node_id,), None))
        self._leaf_cache[id(array)] = t
        self._leaf_refs.append(array)
        return t

    def constant(self, array) -> Tensor:
        """Alias of :meth:`leaf` for values that are not parameters."""
        return self.leaf(array)

    def record(self, op: str, inputs: Sequence[Tensor], outputs_data: Sequence[np.ndarray],
               backward: Callable) -> list[Tensor]:
        """Record one operation with ``backward(*output_grads) -> input grads``.

        ``backward`` receives one gradient array per output (zeros where no
        gradient reached that output) and must return one array or ``None``
        per input, in order.
        """
        for t in inputs:
            if t.tape is not self:
                raise ContractError(f"{op}: input tensor belongs to a different tape")
        outs = [self._new_result(np.asarray(d, dtype=np.float64)) for d in outputs_data]
        self.nodes.append(_Node(op, tuple(t.node_id for t in inputs),
                                tuple(t.node_id for t in outs), backward))
        return outs

    # ------------------------------------------------------------------ #
    # differentiation

    def backward(self, loss: Tensor) -> dict[int, np.ndarray]:
        """Populate gradients of ``loss`` w.r.t. every reachable node.

        Returns the node-id -> gradient map (also kept on ``self.grads``).
        """
        if loss.tape is not self:
            raise ContractError("backward: loss tensor is not on this tape")
        if loss.size != 1:
            raise ContractError(f"backward: loss must be scalar, got shape {loss.shape}")
        self.grads = {loss.node_id: np.ones_like(loss.data)}
        grads = self.grads
        for node in reversed(self.nodes):
            if node.backward is None:
                continue
            out_grads = [grads.get(i) for i in node.output_ids]
            if all(g is None for g in out_grads):
                continue
            out_grads = [g if g is not None else np.zeros_like(self._tensors[i].data)
                         for g, i in zip(out_grads, node.output_ids)]
            in_grads = node.backward(*out_grads)
            if len(in_grads) != len(node.input_ids):
                raise ContractError(f"{node.op}: backward returned {len(in_grads)} grads "
                                    f"for {len(node.input_ids)} inputs")
            for i, g in zip(node.input_ids, in_grads):
                if g is None:
                    continue
                if i in grads:
                    grads[i] = grads[i] + g
                else:
                    grads[i] = np.asarray(g, dtype=np.float64)
        return grads

    def grad(self, ref) -> np.ndarray:
        """Gradient for a tensor or a leaf-attached array; zeros if unreached.

        Arrays the forward pass never touched also read back as zeros, so a
        parameter bank can be swept uniformly after backward().
        """
        if isinstance(ref, Tensor):
            t = ref
        else:
            t = self._leaf_cache.get(id(ref))
            if t is None:
                return np.zeros_like(np.asarray(ref, dtype=np.float64))
        g = self.grads.get(t.node_id)
        return g if g is not None else np.zeros_like(t.data)


# ---------------------------------------------------------------------- #
# helpers

def _tape_of(*tensors: Tensor) -> Tape:
    tape = None
    for t in tensors:
        if t.tape is not None:
            if tape is not None and t.tape is not tape:
                raise ContractError("operation mixes tensors from different tapes")
            tape = t.tape
    if tape is None:
        raise ContractError("operation requires at least one tape-attached tensor")
    return tape


def _unary(op: str, t: Tensor, out: np.ndarray, back: Callable) -> Tensor:
    return _tape_of(t).record(op, [t], [out], lambda g: (back(g),))[0]


# ---------------------------------------------------------------------- #
# elementwise operations

def add(a: Tensor, b: Tensor) -> Tensor:
    require_shapes_match(a.shape, b.shape, "add")
    return _tape_of(a, b).record("add", [a, b], [a.data + b.data],
                                 lambda g: (g, g))[0]


def sub(a: Tensor, b: Tensor) -> Tensor:
    require_shapes_match(a.shape, b.shape, "sub")
    return _tape_of(a, b).record("sub", [a, b], [a.data - b.data],
                                 lambda g: (g, -g))[0]


def mul(a: Tensor, b: Tensor) -> Tensor:
    require_shapes_match(a.shape, b.shape, "mul")
    return _tape_of(a, b).record("mul", [a, b], [a.data * b.data],
                                 lambda g: (g * b.data, g * a.data))[0]


def scale(t: Tensor, c: float) -> Tensor:
    """Constant scalar times tensor."""
    c = float(c)
    return _unary("scale", t, c * t.data, lambda g: c * g)


def one_minus(t: Tensor) -> Tensor:
    return _unary("one_minus", t, 1.0 - t.data, lambda g: -g)


def sigmoid(t: Tensor) -> Tensor:
    out = expit(t.data)  # overflow-safe for any finite input
    return _unary("sigmoid", t, out, lambda g: g * out * (1.0 - out))


def tanh(t: Tensor) -> Tensor:
    out = np.tanh(t.data)
    return _unary("tanh", t, out, lambda g: g * (1.0 - out * out))


def log(t: Tensor) -> Tensor:
    return _unary("log", t, np.log(t.data), lambda g: g / t.data)


def add_scalar(t: Tensor, s: Tensor) -> Tensor:
    """Add a learned scalar to every element."""
    if s.size != 1:
        raise DimensionError(f"add_scalar: scalar operand has shape {s.shape}")
    return _tape_of(t, s).record("add_scalar", [t, s], [t.data + s.data],
                                 lambda g: (g, np.sum(g).reshape(s.shape)))[0]


def scale_by(t: Tensor, s: Tensor) -> Tensor:
    """Multiply every element by a learned scalar."""
    if s.size != 1:
        raise DimensionError(f"scale_by: scalar operand has shape {s.shape}")
    return _tape_of(t, s).record(
        "scale_by", [t, s], [t.data * s.data],
        lambda g: (g * s.data, np.sum(g * t.data).reshape(s.shape)))[0]


def add_rowvec(m: Tensor, v: Tensor) -> Tensor:
    """Add a length-d vector to every row of an (n, d) matrix."""
    if m.data.ndim != 2 or v.data.ndim != 1 or m.shape[1] != v.shape[0]:
        raise DimensionError(f"add_rowvec: shapes {m.shape} and {v.shape} incompatible")
    return _tape_of(m, v).record("add_rowvec", [m, v], [m.data + v.data],
                                 lambda g: (g, g.sum(axis=0)))[0]


def mul_colvec(m: Tensor, v: Tensor) -> Tensor:
    """Scale row i of an (n, d) matrix by v[i]."""
    if m.data.ndim != 2 or v.data.ndim != 1 or m.shape[0] != v.shape[0]:
        raise DimensionError(f"mul_colvec: shapes {m.shape} and {v.shape} incompatible")
    return _tape_of(m, v).record(
        "mul_colvec", [m, v], [m.data * v.data[:, None]],
        lambda g: (g * v.data[:, None], (g * m.data).sum(axis=1)))[0]


# ---------------------------------------------------------------------- #
# linear algebra

def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise DimensionError(f"matmul: expects two matrices, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul: inner dimensions differ, {a.shape} vs {b.shape}")
    return _tape_of(a, b).record(
        "matmul", [a, b], [a.data @ b.data],
        lambda g: (g @ b.data.T, a.data.T @ g))[0]


def matvec(m: Tensor, v: Tensor) -> Tensor:
    if m.data.ndim != 2 or v.data.ndim != 1 or m.shape[1] != v.shape[0]:
        raise DimensionError(f"matvec: shapes {m.shape} and {v.shape} incompatible")
    return _tape_of(m, v).record(
        "matvec", [m, v], [m.data @ v.data],
        lambda g: (np.outer(g, v.data), m.data.T @ g))[0]


def transpose(t: Tensor) -> Tensor:
    if t.data.ndim != 2:
        raise DimensionError(f"transpose: expects a matrix, got {t.shape}")
    return _unary("transpose", t, np.ascontiguousarray(t.data.T), lambda g: g.T)


# ---------------------------------------------------------------------- #
# reductions and normalization

def sum_all(t: Tensor) -> Tensor:
    return _unary("sum_all", t, np.asarray(t.data.sum()),
                  lambda g: np.broadcast_to(g, t.shape).copy())


def softmax(t: Tensor, axis: int = -1) -> Tensor:
    """Numerically stable softmax along ``axis`` (max-subtraction)."""
    if t.data.ndim == 0:
        raise DimensionError("softmax: scalar input has no axis")
    ax = axis if axis >= 0 else t.data.ndim + axis
    if not 0 <= ax < t.data.ndim:
        raise DimensionError(f"softmax: axis {axis} out of range for shape {t.shape}")
    if t.shape[ax] == 0:
        raise DimensionError("softmax: empty axis")
    z = t.data - t.data.max(axis=ax, keepdims=True)
    e = np.exp(z)
    out = e / e.sum(axis=ax, keepdims=True)

    def back(g):
        inner = (g * out).sum(axis=ax, keepdims=True)
        return ((g - inner) * out,)

    return _unary("softmax", t, out, lambda g: back(g)[0])


# ---------------------------------------------------------------------- #
# indexing, concatenation, stacking

def take_row(m: Tensor, i: int) -> Tensor:
    if m.data.ndim != 2:
        raise DimensionError(f"take_row: expects a matrix, got {m.shape}")
    if not 0 <= i < m.shape[0]:
        raise ContractError(f"take_row: row {i} out of range for {m.shape}")

    def back(g):
        out = np.zeros_like(m.data)
        out[i] = g
        return out

    return _unary("take_row", m, m.data[i].copy(), back)


def take_rows(m: Tensor, idx) -> Tensor:
    """Gather rows of a matrix by an integer index array (repeats allowed)."""
    if m.data.ndim != 2:
        raise DimensionError(f"take_rows: expects a matrix, got {m.shape}")
    idx = np.asarray(idx, dtype=np.intp)
    if idx.ndim != 1 or idx.size == 0:
        raise ContractError("take_rows: index must be a nonempty 1-D array")
    if idx.min() < 0 or idx.max() >= m.shape[0]:
        raise ContractError(f"take_rows: index out of range for {m.shape}")

    def back(g):
        out = np.zeros_like(m.data)
        np.add.at(out, idx, g)
        return out

    return _unary("take_rows", m, m.data[idx], back)


def gather(v: Tensor, idx) -> Tensor:
    """Gather elements of a vector by an integer index array."""
    if v.data.ndim != 1:
        raise DimensionError(f"gather: expects a vector, got {v.shape}")
    idx = np.asarray(idx, dtype=np.intp)
    if idx.ndim != 1 or idx.size == 0:
        raise ContractError("gather: index must be a nonempty 1-D array")
    if idx.min() < 0 or idx.max() >= v.shape[0]:
        raise ContractError(f"gather: index out of range for {v.shape}")

    def back(g):
        out = np.zeros_like(v.data)
        np.add.at(out, idx, g)
        return out

    return _unary("gather", v, v.data[idx], back)


def gather_pairs(m: Tensor, cols) -> Tensor:
    """Pick one column per row of an (n, d) matrix: out[i] = m[i, cols[i]]."""
    if m.data.ndim != 2:
        raise DimensionError(f"gather_pairs: expects a matrix, got {m.shape}")
    cols = np.asarray(cols, dtype=np.intp)
    if cols.shape != (m.shape[0],):
        raise DimensionError(f"gather_pairs: need {m.shape[0]} column ids, got {cols.shape}")
    if cols.min() < 0 or cols.max() >= m.shape[1]:
        raise ContractError(f"gather_pairs: column id out of range for {m.shape}")
    rows = np.arange(m.shape[0])

    def back(g):
        out = np.zeros_like(m.data)
        out[rows, cols] = g
        return out

    return _unary("gather_pairs", m, m.data[rows, cols].copy(), back)


def concat(parts: Sequence[Tensor], axis: int = 0) -> Tensor:
    if not parts:
        raise ContractError("concat: needs at least one tensor")
    nd = parts[0].data.ndim
    for p in parts:
        if p.data.ndim != nd:
            raise DimensionError("concat: mixed ranks")
    ax = axis if axis >= 0 else nd + axis
    if not 0 <= ax < nd:
        raise DimensionError(f"concat: axis {axis} out of range for rank {nd}")
    sizes = [p.shape[ax] for p in parts]
    splits = np.cumsum(sizes)[:-1]

    def back(g):
        return tuple(np.ascontiguousarray(piece) for piece in np.split(g, splits, axis=ax))

    tape = _tape_of(*parts)
    return tape.record("concat", list(parts),
                       [np.concatenate([p.data for p in parts], axis=ax)],
                       back)[0]


def stack_rows(rows: Sequence[Tensor]) -> Tensor:
    """Stack length-d vectors into an (n, d) matrix."""
    if not rows:
        raise ContractError("stack_rows: needs at least one vector")
    for r in rows:
        if r.data.ndim != 1:
            raise DimensionError(f"stack_rows: expects vectors, got {r.shape}")
        require_shapes_match(r.shape, rows[0].shape, "stack_rows")

    def back(g):
        return tuple(g[i].copy() for i in range(len(rows)))

    tape = _tape_of(*rows)
    return tape.record("stack_rows", list(rows),
                       [np.stack([r.data for r in rows], axis=0)], back)[0]


def stack_steps(steps: Sequence[Tensor]) -> Tensor:
    """Stack T matrices of shape (B, H) into a (B, T, H) tensor."""
    if not steps:
        raise ContractError("stack_steps: needs at least one matrix")
    for s in steps:
        if s.data.ndim != 2:
            raise DimensionError(f"stack_steps: expects matrices, got {s.shape}")
        require_shapes_match(s.shape, steps[0].shape, "stack_steps")

    def back(g):
        return tuple(np.ascontiguousarray(g[:, t, :]) for t in range(len(steps)))

    tape = _tape_of(*steps)
    return tape.record("stack_steps", list(steps),
                       [np.stack([s.data for s in steps], axis=1)], back)[0]


def unpack_states(fwd: Tensor, bwd: Tensor | None, lengths) -> list[Tensor]:
    """Per-sequence state matrices from (B, T, H) cubes, one tape node.

    Output b is ``fwd[b, :lengths[b], :]``, with the matching rows of ``bwd``
    concatenated on axis 1 when a backward-direction cube is given.
    """
    lengths = np.asarray(lengths, dtype=np.intp)
    for cube in (fwd,) if bwd is None else (fwd, bwd):
        if cube.data.ndim != 3:
            raise DimensionError(f"unpack_states: expects rank 3, got {cube.shape}")
    if bwd is not None and bwd.shape != fwd.shape:
        raise DimensionError(f"unpack_states: cubes {fwd.shape} vs {bwd.shape}")
    if lengths.shape != (fwd.shape[0],) or lengths.min() < 1 \
            or lengths.max() > fwd.shape[1]:
        raise ContractError(f"unpack_states: bad lengths for {fwd.shape}")
    h = fwd.shape[2]
    outs = []
    for b, ln in enumerate(lengths):
        piece = fwd.data[b, :ln, :]
        if bwd is not None:
            piece = np.concatenate([piece, bwd.data[b, :ln, :]], axis=1)
        outs.append(np.ascontiguousarray(piece))

    def back(*grads):
        df = np.zeros_like(fwd.data)
        db = np.zeros_like(fwd.data) if bwd is not None else None
        for b, ln in enumerate(lengths):
            df[b, :ln, :] = grads[b][:, :h]
            if db is not None:
                db[b, :ln, :] = grads[b][:, h:]
        return (df,) if db is None else (df, db)

    tape = _tape_of(fwd) if bwd is None else _tape_of(fwd, bwd)
    inputs = [fwd] if bwd is None else [fwd, bwd]
    return tape.record("unpack_states", inputs, outs, back)


def dot_last_affine(x: Tensor, v: Tensor, bias_matrix: np.ndarray,
                    s1: Tensor, s2: Tensor) -> Tensor:
    """``x @ v + s1 * bias_matrix + s2`` where ``bias_matrix`` is a constant
    (M, N) array and s1/s2 are learned scalars."""
    if x.data.ndim != 3 or v.data.ndim != 1 or x.shape[2] != v.shape[0]:
        raise DimensionError(f"dot_last_affine: shapes {x.shape} and {v.shape}")
    bias_matrix = np.asarray(bias_matrix, dtype=np.float64)
    if bias_matrix.shape != x.shape[:2]:
        raise DimensionError(f"dot_last_affine: bias {bias_matrix.shape} vs "
                             f"{x.shape[:2]}")
    if s1.size != 1 or s2.size != 1:
        raise DimensionError("dot_last_affine: s1/s2 must be scalars")
    out = x.data @ v.data + float(s1.data) * bias_matrix + float(s2.data)

    def back(g):
        return (g[:, :, None] * v.data,
                np.einsum("mnd,mn->d", x.data, g),
                np.sum(g * bias_matrix).reshape(s1.shape),
                np.sum(g).reshape(s2.shape))

    return _tape_of(x, v, s1, s2).record("dot_last_affine", [x, v, s1, s2],
                                         [out], back)[0]


def pointer_log_mass(logits: Tensor, lengths, positions) -> Tensor:
    """Per-segment log of the softmax mass on selected positions.

    ``logits`` is a flat vector packing B segments of the given lengths;
    ``positions[b]`` holds segment-relative indices. Output b is
    ``log(sum_{i in positions[b]} softmax(logits_b)[i])`` -- the pointer-sum
    log-likelihood used by the cloze and span heads.
    """
    if logits.data.ndim != 1:
        raise DimensionError(f"pointer_log_mass: expects a vector, got {logits.shape}")
    lengths = np.asarray(lengths, dtype=np.intp)
    if lengths.min() < 1 or lengths.sum() != logits.shape[0]:
        raise ContractError("pointer_log_mass: lengths do not tile the logits")
    offsets = np.concatenate([[0], np.cumsum(lengths)[:-1]])
    probs = np.empty_like(logits.data)
    out = np.empty(len(lengths))
    sel = []
    for b, (off, ln) in enumerate(zip(offsets, lengths)):
        idx = np.asarray(positions[b], dtype=np.intp)
        if idx.size == 0 or idx.min() < 0 or idx.max() >= ln:
            raise ContractError(f"pointer_log_mass: bad positions for segment {b}")
        z = logits.data[off:off + ln]
        e = np.exp(z - z.max())
        p = e / e.sum()
        probs[off:off + ln] = p
        mass = p[idx].sum()
        out[b] = np.log(mass)
        sel.append((idx, mass))

    def back(g):
        dz = np.empty_like(logits.data)
        for b, (off, ln) in enumerate(zip(offsets, lengths)):
            idx, mass = sel[b]
            p = probs[off:off + ln]
            q = np.zeros(ln)
            q[idx] = p[idx] / mass
            dz[off:off + ln] = g[b] * (q - p)
        return (dz,)

    return _tape_of(logits).record("pointer_log_mass", [logits], [out], back)[0]


def slice_steps(x: Tensor, b: int, length: int) -> Tensor:
    """Extract x[b, :length, :] from a (B, T, H) tensor as a (length, H) matrix."""
    if x.data.ndim != 3:
        raise DimensionError(f"slice_steps: expects rank 3, got {x.shape}")
    if not 0 <= b < x.shape[0]:
        raise ContractError(f"slice_steps: batch index {b} out of range for {x.shape}")
    if not 1 <= length <= x.shape[1]:
        raise ContractError(f"slice_steps: length {length} out of range for {x.shape}")

    def back(g):
        out = np.zeros_like(x.data)
        out[b, :length, :] = g
        return out

    return _unary("slice_steps", x, x.data[b, :length, :].copy(), back)


# ---------------------------------------------------------------------- #
# pairwise interaction primitives (document x query)

def pairwise_mul(p: Tensor, q: Tensor) -> Tensor:
    """All elementwise products of rows: out[i, j] = p[i] * q[j], shape (M, N, d)."""
    if p.data.ndim != 2 or q.data.ndim != 2 or p.shape[1] != q.shape[1]:
        raise DimensionError(f"pairwise_mul: shapes {p.shape} and {q.shape} incompatible")

    def back(g):
        return (np.einsum("mnd,nd->md", g, q.data),
                np.einsum("mnd,md->nd", g, p.data))

    return _tape_of(p, q).record(
        "pairwise_mul", [p, q], [p.data[:, None, :] * q.data[None, :, :]], back)[0]


def dot_last(x: Tensor, v: Tensor) -> Tensor:
    """Contract the last axis of an (M, N, d) tensor with a d-vector."""
    if x.data.ndim != 3 or v.data.ndim != 1 or x.shape[2] != v.shape[0]:
        raise DimensionError(f"dot_last: shapes {x.shape} and {v.shape} incompatible")

    def back(g):
        return (g[:, :, None] * v.data, np.einsum("mnd,mn->d", x.data, g))

    return _tape_of(x, v).record("dot_last", [x, v], [x.data @ v.data], back)[0]


def attend_sum(w: Tensor, x: Tensor) -> Tensor:
    """Weighted sum over axis 1: out[i] = sum_j w[i, j] * x[i, j, :]."""
    if w.data.ndim != 2 or x.data.ndim != 3 or w.shape != x.shape[:2]:
        raise DimensionError(f"attend_sum: shapes {w.shape} and {x.shape} incompatible")

    def back(g):
        return (np.einsum("mnd,md->mn", x.data, g), w.data[:, :, None] * g[:, None, :])

    return _tape_of(w, x).record(
        "attend_sum", [w, x], [np.einsum("mn,mnd->md", w.data, x.data)], back)[0]
