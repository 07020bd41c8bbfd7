"""Dense float64 tensors with a reverse-mode gradient tape.

Every primitive is a (forward, vjp) pair registered in ``PRIMITIVES``.  A
tensor produced while a :class:`Tape` is active and that depends on a watched
tensor gets a ``tape_id``; everything else is a constant.

    with Tape() as tape:
        x = tape.watch(Tensor([3.0]))
        y = x * x
    grads = backward(tape, y)
    grads[x.tape_id]  # array([6.])
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, ClassVar, Sequence

import numpy as np

__all__ = [
    "Tensor",
    "Tape",
    "TensorError",
    "PRIMITIVES",
    "apply_primitive",
    "backward",
    "finite_difference_check",
    "as_tensor",
    "matmul",
    "transpose",
    "reshape",
    "relu",
    "sigmoid",
    "exp",
    "log",
    "tsum",
    "mean",
    "concat",
    "gather_rows",
    "scatter_add_rows",
    "logsumexp",
    "expand_cols",
    "expand_rows",
]


class TensorError(ValueError):
    """Shape, domain or tape misuse."""


class Tensor:
    __slots__ = ("data", "tape_id")

    def __init__(self, data, tape_id: int | None = None):
        arr = np.array(data, dtype=np.float64)
        arr.setflags(write=False)
        self.data = arr
        self.tape_id = tape_id

    @classmethod
    def _wrap(cls, arr: np.ndarray, tape_id: int | None = None) -> "Tensor":
        # skip the defensive copy for arrays we just computed
        t = cls.__new__(cls)
        arr = np.asarray(arr, dtype=np.float64)
        arr.setflags(write=False)
        t.data = arr
        t.tape_id = tape_id
        return t

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def item(self) -> float:
        if self.data.size != 1:
            raise TensorError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def __repr__(self) -> str:
        tid = "" if self.tape_id is None else f", tape_id={self.tape_id}"
        return f"Tensor({self.data!r}{tid})"

    # operator sugar; all routes go through apply_primitive
    def __add__(self, other):
        return apply_primitive("add", [self, as_tensor(other)])

    __radd__ = __add__

    def __mul__(self, other):
        return apply_primitive("mul", [self, as_tensor(other)])

    __rmul__ = __mul__

    def __neg__(self):
        return apply_primitive("neg", [self])

    def __sub__(self, other):
        return self + (-as_tensor(other))

    def __rsub__(self, other):
        return as_tensor(other) + (-self)

    def __matmul__(self, other):
        return apply_primitive("matmul", [self, as_tensor(other)])

    @property
    def T(self) -> "Tensor":
        return apply_primitive("transpose", [self])


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


@dataclass
class _Node:
    op: str
    inputs: tuple[int | None, ...]
    shape: tuple[int, ...]
    saved: tuple
    attrs: dict


@dataclass
class Tape:
    """Ordered record of primitive applications.

    Only one tape is active at a time.  ``gradients`` is filled by
    :func:`backward`.
    """

    nodes: list[_Node] = field(default_factory=list)
    gradients: dict[int, np.ndarray] = field(default_factory=dict)

    _active: ClassVar["Tape | None"] = None

    def __enter__(self) -> "Tape":
        if Tape._active is not None:
            raise TensorError("a tape is already active")
        Tape._active = self
        return self

    def __exit__(self, *exc) -> None:
        Tape._active = None

    def watch(self, x) -> Tensor:
        """Register ``x`` as a leaf and return the taped copy."""
        x = as_tensor(x)
        self.nodes.append(_Node("leaf", (), x.shape, (), {}))
        return Tensor._wrap(x.data, len(self.nodes) - 1)

    def clear(self) -> None:
        self.nodes.clear()
        self.gradients.clear()

    def __len__(self) -> int:
        return len(self.nodes)


def _active_tape() -> Tape | None:
    return Tape._active


# ---------------------------------------------------------------------------
# primitives


def _same_or_scalar(op: str, a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape and a.size != 1 and b.size != 1:
        raise TensorError(f"{op}: incompatible shapes {a.shape} and {b.shape}")


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if g.shape == shape:
        return g
    return np.asarray(g.sum()).reshape(shape)


def _fw_add(xs, attrs):
    a, b = xs
    _same_or_scalar("add", a, b)
    return a + b, ()


def _bw_add(g, xs, out, saved, attrs):
    a, b = xs
    return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)


def _fw_mul(xs, attrs):
    a, b = xs
    _same_or_scalar("mul", a, b)
    return a * b, ()


def _bw_mul(g, xs, out, saved, attrs):
    a, b = xs
    return _unbroadcast(g * b, a.shape), _unbroadcast(g * a, b.shape)


def _fw_neg(xs, attrs):
    return -xs[0], ()


def _bw_neg(g, xs, out, saved, attrs):
    return (-g,)


def _fw_matmul(xs, attrs):
    a, b = xs
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise TensorError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
    return a @ b, ()


def _bw_matmul(g, xs, out, saved, attrs):
    a, b = xs
    return g @ b.T, a.T @ g


def _fw_transpose(xs, attrs):
    if xs[0].ndim != 2:
        raise TensorError(f"transpose: expected a matrix, got shape {xs[0].shape}")
    return xs[0].T, ()


def _bw_transpose(g, xs, out, saved, attrs):
    return (g.T,)


def _fw_reshape(xs, attrs):
    shape = tuple(attrs["shape"])
    if int(np.prod(shape)) != xs[0].size:
        raise TensorError(f"reshape: cannot reshape {xs[0].shape} to {shape}")
    return xs[0].reshape(shape), ()


def _bw_reshape(g, xs, out, saved, attrs):
    return (g.reshape(xs[0].shape),)


def _fw_relu(xs, attrs):
    return np.maximum(xs[0], 0.0), ()


def _bw_relu(g, xs, out, saved, attrs):
    # subgradient 0 at the kink
    return (g * (xs[0] > 0.0),)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _fw_sigmoid(xs, attrs):
    return _sigmoid(xs[0]), ()


def _bw_sigmoid(g, xs, out, saved, attrs):
    return (g * out * (1.0 - out),)


def _fw_exp(xs, attrs):
    return np.exp(xs[0]), ()


def _bw_exp(g, xs, out, saved, attrs):
    return (g * out,)


def _fw_log(xs, attrs):
    x = xs[0]
    if np.any(x <= 0.0):
        raise TensorError(f"log: non-positive input (min {x.min():.3g})")
    return np.log(x), ()


def _bw_log(g, xs, out, saved, attrs):
    return (g / xs[0],)


def _fw_sum(xs, attrs):
    axis = attrs.get("axis")
    return np.sum(xs[0], axis=axis, keepdims=attrs.get("keepdims", False)), ()


def _expand_reduced(g, shape, axis, keepdims):
    if axis is not None and not keepdims:
        g = np.expand_dims(g, axis)
    return np.broadcast_to(g, shape)


def _bw_sum(g, xs, out, saved, attrs):
    x = xs[0]
    return (np.array(_expand_reduced(g, x.shape, attrs.get("axis"), attrs.get("keepdims", False))),)


def _fw_mean(xs, attrs):
    x = xs[0]
    if x.size == 0:
        raise TensorError("mean: empty input")
    return np.mean(x, axis=attrs.get("axis"), keepdims=attrs.get("keepdims", False)), ()


def _bw_mean(g, xs, out, saved, attrs):
    x = xs[0]
    axis = attrs.get("axis")
    count = x.size if axis is None else x.shape[axis]
    return (np.array(_expand_reduced(g, x.shape, axis, attrs.get("keepdims", False))) / count,)


def _fw_concat(xs, attrs):
    axis = attrs.get("axis", 0)
    ref = xs[0]
    for x in xs[1:]:
        if x.ndim != ref.ndim or any(
            x.shape[k] != ref.shape[k] for k in range(ref.ndim) if k != axis % ref.ndim
        ):
            raise TensorError(
                f"concat: incompatible shapes {[x.shape for x in xs]} along axis {axis}"
            )
    return np.concatenate(xs, axis=axis), ()


def _bw_concat(g, xs, out, saved, attrs):
    axis = attrs.get("axis", 0)
    cuts = np.cumsum([x.shape[axis] for x in xs])[:-1]
    return tuple(np.split(g, cuts, axis=axis))


def _index(attrs) -> np.ndarray:
    return np.asarray(attrs["index"], dtype=np.int64)


def _fw_gather_rows(xs, attrs):
    x = xs[0]
    idx = _index(attrs)
    if x.ndim < 1 or (idx.size and (idx.min() < 0 or idx.max() >= x.shape[0])):
        raise TensorError(f"gather_rows: index out of range for shape {x.shape}")
    return x[idx], ()


def _scatter(src: np.ndarray, idx: np.ndarray, num_rows: int) -> np.ndarray:
    out = np.zeros((num_rows,) + src.shape[1:])
    if src.ndim == 1:
        return np.bincount(idx, weights=src, minlength=num_rows).astype(np.float64)
    np.add.at(out, idx, src)
    return out


def _bw_gather_rows(g, xs, out, saved, attrs):
    return (_scatter(g, _index(attrs), xs[0].shape[0]),)


def _fw_scatter_add_rows(xs, attrs):
    src = xs[0]
    idx = _index(attrs)
    n = int(attrs["num_rows"])
    if src.ndim == 0 or idx.shape != (src.shape[0],):
        raise TensorError(
            f"scatter_add_rows: index length {idx.shape} does not match rows of {src.shape}"
        )
    if idx.size and (idx.min() < 0 or idx.max() >= n):
        raise TensorError(f"scatter_add_rows: index out of range for {n} rows")
    return _scatter(src, idx, n), ()


def _bw_scatter_add_rows(g, xs, out, saved, attrs):
    return (g[_index(attrs)],)


def _fw_logsumexp(xs, attrs):
    # max-subtraction; optional boolean mask selects the entries that take part
    x = xs[0]
    axis = attrs.get("axis")
    mask = attrs.get("mask")
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != x.shape:
            raise TensorError(f"logsumexp: mask shape {mask.shape} != input {x.shape}")
        if not np.all(mask.any(axis=axis)):
            raise TensorError("logsumexp: a reduction slice has no unmasked entries")
        xm = np.where(mask, x, -np.inf)
    else:
        xm = x
    m = np.max(xm, axis=axis, keepdims=True)
    e = np.exp(xm - m)
    s = np.sum(e, axis=axis, keepdims=True)
    out = np.log(s) + m
    weights = e / s
    if axis is not None:
        out = np.squeeze(out, axis=axis)
    else:
        out = out.reshape(())
    return out, (weights,)


def _bw_logsumexp(g, xs, out, saved, attrs):
    (weights,) = saved
    axis = attrs.get("axis")
    g = np.expand_dims(g, axis) if axis is not None else g
    return (g * weights,)


Forward = Callable[[list, dict], tuple]
Vjp = Callable[..., tuple]

PRIMITIVES: dict[str, tuple[Forward, Vjp]] = {
    "add": (_fw_add, _bw_add),
    "mul": (_fw_mul, _bw_mul),
    "neg": (_fw_neg, _bw_neg),
    "matmul": (_fw_matmul, _bw_matmul),
    "transpose": (_fw_transpose, _bw_transpose),
    "reshape": (_fw_reshape, _bw_reshape),
    "relu": (_fw_relu, _bw_relu),
    "sigmoid": (_fw_sigmoid, _bw_sigmoid),
    "exp": (_fw_exp, _bw_exp),
    "log": (_fw_log, _bw_log),
    "sum": (_fw_sum, _bw_sum),
    "mean": (_fw_mean, _bw_mean),
    "concat": (_fw_concat, _bw_concat),
    "gather_rows": (_fw_gather_rows, _bw_gather_rows),
    "scatter_add_rows": (_fw_scatter_add_rows, _bw_scatter_add_rows),
    "logsumexp": (_fw_logsumexp, _bw_logsumexp),
}


def apply_primitive(op_tag: str, inputs: Sequence[Tensor], **attrs) -> Tensor:
    """Evaluate primitive ``op_tag`` and record it on the active tape.

    Nothing is recorded when no input carries a tape id; the result is then a
    plain constant.
    """
    try:
        fw, _ = PRIMITIVES[op_tag]
    except KeyError:
        raise TensorError(f"unknown primitive {op_tag!r}") from None
    inputs = [as_tensor(x) for x in inputs]
    with np.errstate(over="raise", invalid="raise", divide="raise"):
        try:
            out, saved = fw([x.data for x in inputs], attrs)
        except FloatingPointError as exc:
            raise TensorError(f"{op_tag}: floating point error ({exc})") from None
    tape = _active_tape()
    ids = tuple(x.tape_id for x in inputs)
    if tape is None or all(i is None for i in ids):
        return Tensor._wrap(out)
    tape.nodes.append(_Node(op_tag, ids, np.shape(out), (inputs, out, saved), attrs))
    return Tensor._wrap(out, len(tape.nodes) - 1)


def backward(tape: Tape, seed: Tensor | int) -> dict[int, np.ndarray]:
    """Accumulate d(seed)/d(node) for every node on ``tape``.

    Nodes that the seed does not depend on receive a zero gradient.
    """
    sid = seed.tape_id if isinstance(seed, Tensor) else seed
    if sid is None or not 0 <= sid < len(tape.nodes):
        raise TensorError("backward: seed is not on this tape")
    sshape = tape.nodes[sid].shape
    if int(np.prod(sshape)) != 1 or len(sshape) > 1:
        raise TensorError(f"backward: seed must be scalar, got shape {sshape}")

    grads: dict[int, np.ndarray] = {sid: np.ones(sshape)}
    for nid in range(sid, -1, -1):
        g = grads.get(nid)
        node = tape.nodes[nid]
        if g is None or node.op == "leaf":
            continue
        inputs, out, saved = node.saved
        _, vjp = PRIMITIVES[node.op]
        parts = vjp(g, [x.data for x in inputs], out, saved, node.attrs)
        for iid, gi in zip(node.inputs, parts):
            if iid is None:
                continue
            if iid in grads:
                grads[iid] = grads[iid] + gi
            else:
                grads[iid] = np.array(gi, dtype=np.float64)
    for nid, node in enumerate(tape.nodes):
        if nid not in grads:
            grads[nid] = np.zeros(node.shape)
    tape.gradients = grads
    return grads


def finite_difference_check(
    fn: Callable[[Tensor], Tensor], point, eps: float = 1e-5
) -> float:
    """Max relative gap between tape gradients and central differences.

    ``fn`` maps a tensor to a scalar tensor.  The relative error of each
    coordinate is ``|g_ad - g_fd| / max(1, |g_ad|, |g_fd|)``.
    """
    if eps <= 0:
        raise TensorError("finite_difference_check: eps must be positive")
    x0 = np.array(as_tensor(point).data, dtype=np.float64)

    with Tape() as tape:
        x = tape.watch(Tensor._wrap(x0))
        y = fn(x)
    if not np.all(np.isfinite(y.data)):
        raise TensorError("finite_difference_check: non-finite function value")
    if y.tape_id is None:
        g_ad = np.zeros_like(x0)
    else:
        g_ad = backward(tape, y)[x.tape_id]

    def value(arr):
        v = fn(Tensor._wrap(arr)).data
        if not np.all(np.isfinite(v)):
            raise TensorError("finite_difference_check: non-finite function value")
        return float(np.sum(v))

    g_fd = np.zeros_like(x0)
    flat = x0.reshape(-1)
    for k in range(flat.size):
        up = flat.copy()
        dn = flat.copy()
        up[k] += eps
        dn[k] -= eps
        g_fd.reshape(-1)[k] = (value(up.reshape(x0.shape)) - value(dn.reshape(x0.shape))) / (
            2 * eps
        )
    denom = np.maximum(1.0, np.maximum(np.abs(g_ad), np.abs(g_fd)))
    if g_ad.size == 0:
        return 0.0
    return float(np.max(np.abs(g_ad - g_fd) / denom))


# thin functional spellings


def matmul(a, b) -> Tensor:
    return apply_primitive("matmul", [a, b])


def transpose(x) -> Tensor:
    return apply_primitive("transpose", [x])


def reshape(x, shape) -> Tensor:
    return apply_primitive("reshape", [x], shape=tuple(shape))


def relu(x) -> Tensor:
    return apply_primitive("relu", [x])


def sigmoid(x) -> Tensor:
    return apply_primitive("sigmoid", [x])


def exp(x) -> Tensor:
    return apply_primitive("exp", [x])


def log(x) -> Tensor:
    return apply_primitive("log", [x])


def tsum(x, axis: int | None = None, keepdims: bool = False) -> Tensor:
    return apply_primitive("sum", [x], axis=axis, keepdims=keepdims)


def mean(x, axis: int | None = None, keepdims: bool = False) -> Tensor:
    return apply_primitive("mean", [x], axis=axis, keepdims=keepdims)


def concat(xs: Sequence, axis: int = 0) -> Tensor:
    return apply_primitive("concat", list(xs), axis=axis)


def gather_rows(x, index) -> Tensor:
    return apply_primitive("gather_rows", [x], index=np.asarray(index, dtype=np.int64))


def scatter_add_rows(src, index, num_rows: int) -> Tensor:
    return apply_primitive(
        "scatter_add_rows", [src], index=np.asarray(index, dtype=np.int64), num_rows=num_rows
    )


def logsumexp(x, axis: int | None = None, mask=None) -> Tensor:
    return apply_primitive("logsumexp", [x], axis=axis, mask=mask)


def expand_cols(col, width: int) -> Tensor:
    """Repeat an (n, 1) column ``width`` times; matmul against a ones row."""
    return matmul(col, Tensor._wrap(np.ones((1, width))))


def expand_rows(row, count: int) -> Tensor:
    """Stack a (1, d) row ``count`` times."""
    return gather_rows(row, np.zeros(count, dtype=np.int64))
