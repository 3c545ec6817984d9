"""Dense double-precision tensors with reverse-mode automatic differentiation.

A `Tape` records every primitive in execution order; `Tape.backward` replays
it once in reverse, accumulating gradients additively. Tensors are immutable
after creation except through recorded operations.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeMismatch


class Tensor:
    __slots__ = ("data", "grad", "tape", "node_id")

    def __init__(self, data, tape=None, node_id=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.tape = tape
        self.node_id = node_id

    @property
    def shape(self):
        return self.data.shape

    def item(self):
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, tape={'yes' if self.tape else 'no'})"


@dataclass
class _Op:
    output: Tensor
    inputs: tuple[Tensor, ...]
    backward: object  # callable(output_grad) -> tuple of input grads (or None)


class Tape:
    """Records primitives; single-threaded. Distinct tapes are independent."""

    def __init__(self):
        self._ops: list[_Op] = []
        self._next_id = 0

    def tensor(self, data) -> Tensor:
        t = Tensor(data, tape=self, node_id=self._next_id)
        self._next_id += 1
        return t

    def _record(self, data, inputs, backward) -> Tensor:
        out = self.tensor(data)
        self._ops.append(_Op(out, tuple(inputs), backward))
        return out

    def backward(self, output: Tensor):
        """Accumulate gradients of `output` (a scalar) into every tensor on
        the tape; visits recorded ops once, in reverse order."""
        if output.data.size != 1:
            raise ShapeMismatch("backward expects a scalar output")
        for op in self._ops:
            op.output.grad = None
            for t in op.inputs:
                t.grad = None
        output.grad = np.ones_like(output.data)
        for op in reversed(self._ops):
            if op.output.grad is None:
                continue
            grads = op.backward(op.output.grad)
            for t, g in zip(op.inputs, grads):
                if g is None:
                    continue
                # grads are never mutated in place, so the first contribution
                # can be stored by reference (it may alias op.output.grad,
                # which is final by the time this op's backward runs)
                if t.grad is None:
                    t.grad = g
                else:
                    t.grad = t.grad + g


def _lift(tape, x):
    if isinstance(x, Tensor):
        return x
    return Tensor(x)  # constant, no gradient tracked


def _unbroadcast(grad, shape):
    """Sum `grad` down to `shape` after numpy broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for i, s in enumerate(shape):
        if s == 1 and grad.shape[i] != 1:
            grad = grad.sum(axis=i, keepdims=True)
    return grad.reshape(shape)


def _binary(tape, a, b, fwd, bwd_a, bwd_b, name):
    a, b = _lift(tape, a), _lift(tape, b)
    try:
        data = fwd(a.data, b.data)
    except ValueError as e:
        raise ShapeMismatch(f"{name}: {a.shape} vs {b.shape}") from e

    def backward(g):
        ga = _unbroadcast(bwd_a(g, a.data, b.data), a.shape) if a.tape is tape else None
        gb = _unbroadcast(bwd_b(g, a.data, b.data), b.shape) if b.tape is tape else None
        return ga, gb

    return tape._record(data, (a, b), backward)


def add(tape, a, b):
    return _binary(tape, a, b, np.add, lambda g, x, y: g, lambda g, x, y: g, "add")


def sub(tape, a, b):
    return _binary(tape, a, b, np.subtract, lambda g, x, y: g, lambda g, x, y: -g, "sub")


def mul(tape, a, b):
    return _binary(tape, a, b, np.multiply, lambda g, x, y: g * y, lambda g, x, y: g * x, "mul")


def div(tape, a, b):
    return _binary(
        tape, a, b, np.divide,
        lambda g, x, y: g / y,
        lambda g, x, y: -g * x / (y * y),
        "div",
    )


def matmul(tape, a, b):
    a, b = _lift(tape, a), _lift(tape, b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeMismatch(f"matmul: {a.shape} @ {b.shape}")

    def backward(g):
        ga = g @ b.data.T if a.tape is tape else None
        gb = a.data.T @ g if b.tape is tape else None
        return ga, gb

    return tape._record(a.data @ b.data, (a, b), backward)


def transpose(tape, a):
    a = _lift(tape, a)
    return tape._record(a.data.T.copy(), (a,), lambda g: (g.T,))


def scale(tape, a, c: float):
    a = _lift(tape, a)
    c = float(c)
    return tape._record(a.data * c, (a,), lambda g: (g * c,))


def add_scalar(tape, a, c: float):
    a = _lift(tape, a)
    return tape._record(a.data + float(c), (a,), lambda g: (g,))


def pow_scalar(tape, a, p: float):
    a = _lift(tape, a)
    return tape._record(
        a.data**p, (a,), lambda g: (g * p * a.data ** (p - 1),)
    )


def relu(tape, a):
    a = _lift(tape, a)
    mask = (a.data > 0).astype(np.float64)
    return tape._record(a.data * mask, (a,), lambda g: (g * mask,))


def exp(tape, a):
    a = _lift(tape, a)
    out_data = np.exp(a.data)
    return tape._record(out_data, (a,), lambda g: (g * out_data,))


def log(tape, a):
    a = _lift(tape, a)
    return tape._record(np.log(a.data), (a,), lambda g: (g / a.data,))


def tsum(tape, a, axis=None):
    a = _lift(tape, a)

    def backward(g):
        if axis is None:
            return (np.broadcast_to(g, a.shape).astype(np.float64),)
        return (np.broadcast_to(np.expand_dims(g, axis), a.shape).astype(np.float64),)

    return tape._record(a.data.sum(axis=axis), (a,), backward)


def tmean(tape, a, axis=None):
    a = _lift(tape, a)
    count = a.data.size if axis is None else a.shape[axis]

    def backward(g):
        if axis is None:
            return (np.broadcast_to(g / count, a.shape).astype(np.float64),)
        return (
            np.broadcast_to(np.expand_dims(g, axis) / count, a.shape).astype(np.float64),
        )

    return tape._record(a.data.mean(axis=axis), (a,), backward)


def tmax(tape, a, axis):
    """Max over one axis; ties route the gradient to the first maximum."""
    a = _lift(tape, a)
    data = a.data.max(axis=axis)
    arg = a.data.argmax(axis=axis)

    def backward(g):
        out = np.zeros_like(a.data)
        idx = list(np.indices(data.shape))
        idx.insert(axis if axis >= 0 else a.data.ndim + axis, arg)
        out[tuple(idx)] = g
        return (out,)

    return tape._record(data, (a,), backward)


def concat(tape, tensors, axis=0):
    tensors = [_lift(tape, t) for t in tensors]
    data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def backward(g):
        return tuple(np.split(g, splits, axis=axis))

    return tape._record(data, tensors, backward)


def gather_rows(tape, a, indices):
    a = _lift(tape, a)
    indices = np.asarray(indices, dtype=np.int64)

    def backward(g):
        out = np.zeros_like(a.data)
        np.add.at(out, indices, g)
        return (out,)

    return tape._record(a.data[indices], (a,), backward)


def scatter_add_rows(tape, a, indices, num_rows):
    """out[r] = sum of rows of `a` whose index maps to r."""
    a = _lift(tape, a)
    indices = np.asarray(indices, dtype=np.int64)
    if len(indices) != a.shape[0]:
        raise ShapeMismatch(f"scatter_add_rows: {len(indices)} indices for {a.shape[0]} rows")
    data = np.zeros((num_rows,) + a.shape[1:])
    np.add.at(data, indices, a.data)

    def backward(g):
        return (g[indices],)

    return tape._record(data, (a,), backward)


def affine(tape, x, w, b):
    """x @ w + b in one recorded op; `b` broadcasts over rows."""
    x, w, b = _lift(tape, x), _lift(tape, w), _lift(tape, b)
    if x.data.ndim != 2 or w.data.ndim != 2 or x.shape[1] != w.shape[0]:
        raise ShapeMismatch(f"affine: {x.shape} @ {w.shape}")

    def backward(g):
        gx = g @ w.data.T if x.tape is tape else None
        gw = x.data.T @ g if w.tape is tape else None
        gb = _unbroadcast(g, b.shape) if b.tape is tape else None
        return gx, gw, gb

    return tape._record(x.data @ w.data + b.data, (x, w, b), backward)


def affine_relu(tape, x, w, b):
    """relu(x @ w + b) in one recorded op."""
    x, w, b = _lift(tape, x), _lift(tape, w), _lift(tape, b)
    if x.data.ndim != 2 or w.data.ndim != 2 or x.shape[1] != w.shape[0]:
        raise ShapeMismatch(f"affine_relu: {x.shape} @ {w.shape}")
    out_data = np.maximum(x.data @ w.data + b.data, 0.0)

    def backward(g):
        gz = g * (out_data > 0.0)
        gx = gz @ w.data.T if x.tape is tape else None
        gw = x.data.T @ gz if w.tape is tape else None
        gb = _unbroadcast(gz, b.shape) if b.tape is tape else None
        return gx, gw, gb

    return tape._record(out_data, (x, w, b), backward)


def gather_sum(tape, a, idx_a, b, idx_b):
    """a[idx_a] + b[idx_b] in one recorded op (parallel index arrays)."""
    a, b = _lift(tape, a), _lift(tape, b)
    idx_a = np.asarray(idx_a, dtype=np.int64)
    idx_b = np.asarray(idx_b, dtype=np.int64)
    if len(idx_a) != len(idx_b):
        raise ShapeMismatch(f"gather_sum: {len(idx_a)} vs {len(idx_b)} indices")

    def backward(g):
        ga = gb = None
        if a.tape is tape:
            ga = np.zeros_like(a.data)
            np.add.at(ga, idx_a, g)
        if b.tape is tape:
            gb = np.zeros_like(b.data)
            np.add.at(gb, idx_b, g)
        return ga, gb

    return tape._record(a.data[idx_a] + b.data[idx_b], (a, b), backward)


def edge_message_sum(tape, h, bond, src, etype, dst, num_rows):
    """out[r] = sum over edges e with dst[e] == r of (h[src[e]] + bond[etype[e]]);
    the fused gather-add-scatter at the heart of message passing."""
    h, bond = _lift(tape, h), _lift(tape, bond)
    src = np.asarray(src, dtype=np.int64)
    etype = np.asarray(etype, dtype=np.int64)
    dst = np.asarray(dst, dtype=np.int64)
    if not len(src) == len(etype) == len(dst):
        raise ShapeMismatch("edge_message_sum: index arrays differ in length")
    data = np.zeros((num_rows,) + h.data.shape[1:])
    np.add.at(data, dst, h.data[src] + bond.data[etype])

    def backward(g):
        ge = g[dst]
        gh = gb = None
        if h.tape is tape:
            gh = np.zeros_like(h.data)
            np.add.at(gh, src, ge)
        if bond.tape is tape:
            gb = np.zeros_like(bond.data)
            np.add.at(gb, etype, ge)
        return gh, gb

    return tape._record(data, (h, bond), backward)


def gin_combine(tape, h, eps, msg):
    """h * (1 + eps) + msg for a scalar `eps` tensor, in one recorded op."""
    h, eps, msg = _lift(tape, h), _lift(tape, eps), _lift(tape, msg)
    if eps.data.size != 1:
        raise ShapeMismatch(f"gin_combine: eps must be scalar, got {eps.shape}")
    if h.shape != msg.shape:
        raise ShapeMismatch(f"gin_combine: {h.shape} vs {msg.shape}")
    scale_val = 1.0 + eps.data

    def backward(g):
        gh = g * scale_val if h.tape is tape else None
        geps = np.sum(g * h.data).reshape(eps.shape) if eps.tape is tape else None
        gm = g if msg.tape is tape else None
        return gh, geps, gm

    return tape._record(h.data * scale_val + msg.data, (h, eps, msg), backward)


def masked_inner(tape, mask, a):
    """out[n, m] = sum_k mask[n, m, k] * a[n, k] for a constant (n, m, k)
    mask and a 2-D tensor; the batched contraction behind ranked-softmax
    denominators."""
    a = _lift(tape, a)
    mask = np.asarray(mask, dtype=np.float64)
    if a.data.ndim != 2 or mask.shape != (a.shape[0], mask.shape[1], a.shape[1]):
        raise ShapeMismatch(f"masked_inner: mask {mask.shape} vs a {a.shape}")
    data = np.einsum("nmk,nk->nm", mask, a.data)

    def backward(g):
        return (np.einsum("nmk,nm->nk", mask, g),)

    return tape._record(data, (a,), backward)


def ranked_suffix_sums(tape, dist, a):
    """out[n, m] = sum_k [dist[n, k] >= dist[n, m]] * a[n, k] for a constant
    square `dist` matrix; the ranked-softmax denominators, computed per row by
    sorting once (O(n^2 log n)) instead of materializing the cubic mask.
    Rows of `dist` set to -inf on the diagonal exclude the anchor itself."""
    a = _lift(tape, a)
    dist = np.asarray(dist, dtype=np.float64)
    if a.data.ndim != 2 or dist.shape != a.data.shape:
        raise ShapeMismatch(f"ranked_suffix_sums: dist {dist.shape} vs a {a.shape}")
    n, m = dist.shape
    order = np.argsort(dist, axis=1, kind="stable")
    sd = np.take_along_axis(dist, order, 1)
    se = np.take_along_axis(a.data, order, 1)
    suffix = np.cumsum(se[:, ::-1], axis=1)[:, ::-1]
    new_group = np.empty((n, m), dtype=bool)
    new_group[:, 0] = True
    new_group[:, 1:] = sd[:, 1:] != sd[:, :-1]
    # first index of each tie group; every member reads the suffix sum there
    group_start = np.maximum.accumulate(np.where(new_group, np.arange(m), 0), axis=1)
    data = np.empty_like(a.data)
    np.put_along_axis(data, order, np.take_along_axis(suffix, group_start, 1), 1)

    def backward(g):
        # d out[n, m] / d a[n, k] = [dist[n, m] <= dist[n, k]]: a prefix sum
        # up to the last index of k's tie group
        sg = np.take_along_axis(g, order, 1)
        prefix = np.cumsum(sg, axis=1)
        ends = np.where(np.roll(new_group, -1, axis=1), np.arange(m), m - 1)
        ends[:, -1] = m - 1
        group_end = np.minimum.accumulate(ends[:, ::-1], axis=1)[:, ::-1]
        grad = np.empty_like(a.data)
        np.put_along_axis(grad, order, np.take_along_axis(prefix, group_end, 1), 1)
        return (grad,)

    return tape._record(data, (a,), backward)


def l2_normalize(tape, a):
    """Row-wise L2 normalization of a 2-D tensor; rows must be nonzero."""
    a = _lift(tape, a)
    if a.data.ndim != 2:
        raise ShapeMismatch(f"l2_normalize expects a matrix, got {a.shape}")
    norms = np.linalg.norm(a.data, axis=1, keepdims=True)
    if np.any(norms == 0.0):
        raise ValueError("zero-norm row in l2_normalize")
    y = a.data / norms

    def backward(g):
        dot = (g * y).sum(axis=1, keepdims=True)
        return ((g - y * dot) / norms,)

    return tape._record(y, (a,), backward)


# ---------------------------------------------------------------------------
# Numerical verification


@dataclass
class GradCheckReport:
    max_rel_error: float
    passed: bool
    excluded: list[int] = field(default_factory=list)

    def __bool__(self):
        return self.passed


def grad_check(f, point, eps=1e-6, tol=1e-6) -> GradCheckReport:
    """Compare the tape gradient of scalar-valued `f` against central finite
    differences at `point` (a flat numpy array).

    `f(tape, tensor)` must return a scalar Tensor. Coordinates where the two
    one-sided differences disagree (a kink, e.g. relu at zero) are excluded
    and reported.
    """
    point = np.asarray(point, dtype=np.float64)

    tape = Tape()
    x = tape.tensor(point)
    out = f(tape, x)
    tape.backward(out)
    analytic = x.grad.copy()

    def value(p):
        t = Tape()
        return float(f(t, t.tensor(p)).data)

    max_rel = 0.0
    excluded = []
    for i in range(point.size):
        step = np.zeros_like(point)
        step.flat[i] = eps
        f0, fp, fm = value(point), value(point + step), value(point - step)
        d_plus = (fp - f0) / eps
        d_minus = (f0 - fm) / eps
        if abs(d_plus - d_minus) > 1e-3 * (abs(d_plus) + abs(d_minus)) + 1e-7:
            excluded.append(i)
            continue
        numeric = (fp - fm) / (2 * eps)
        denom = max(abs(numeric), abs(analytic.flat[i]), 1e-8)
        max_rel = max(max_rel, abs(numeric - analytic.flat[i]) / denom)
    return GradCheckReport(max_rel, passed=max_rel <= tol, excluded=excluded)
