"""Static computation graphs over numpy arrays with reverse-mode adjoints.

A :class:`Graph` is built once from named inputs, named parameters and
primitive ops; every op validates its input shapes when it is added. The
same graph is then evaluated or differentiated for any number of bindings.

Besides float-valued primitives the graph supports *index* nodes: integer
arrays computed from other nodes by an arbitrary callback (nearest-neighbour
tables, curve orderings). They carry no gradient and feed ``gather``.
"""
from __future__ import annotations

import zlib
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.special import expit

from .. import kernels
from ..errors import GraphError, ShapeError

_DTYPES = {"float64": np.float64, "float32": np.float32}
_active = {"dtype": np.float64}


def set_precision(name: str) -> None:
    """Select the global float width: ``"float64"`` (default) or ``"float32"``."""
    if name not in _DTYPES:
        raise ValueError(f"precision must be one of {sorted(_DTYPES)}, got {name!r}")
    _active["dtype"] = _DTYPES[name]


def get_dtype():
    return _active["dtype"]


# --------------------------------------------------------------------------
# op registry


class OpDef:
    __slots__ = ("name", "forward", "vjp", "shape")

    def __init__(self, name, forward, vjp, shape):
        self.name = name
        self.forward = forward
        self.vjp = vjp
        self.shape = shape


OPS: dict[str, OpDef] = {}


def register_op(name: str, forward: Callable, vjp: Callable | None, shape: Callable | None = None):
    """Register a primitive.

    ``forward(values, attrs) -> array``; ``vjp(g, values, out, attrs) -> list``
    with one gradient (or None) per input; ``shape(shapes, attrs) -> tuple``.
    When ``shape`` is omitted the op is treated as elementwise on input 0.
    """
    OPS[name] = OpDef(name, forward, vjp, shape or (lambda shapes, attrs: shapes[0]))


def _unbroadcast(g, shape):
    if g.shape == tuple(shape):
        return g
    lead = g.ndim - len(shape)
    if lead:
        g = g.sum(axis=tuple(range(lead)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def _broadcast_shape(shapes, attrs):
    try:
        return tuple(np.broadcast_shapes(*shapes))
    except ValueError:
        raise ShapeError(f"cannot broadcast shapes {shapes}") from None


def _binary(name, fwd, vjp):
    register_op(name, fwd, vjp, _broadcast_shape)


_binary(
    "add",
    lambda v, a: v[0] + v[1],
    lambda g, v, out, a: [_unbroadcast(g, v[0].shape), _unbroadcast(g, v[1].shape)],
)
_binary(
    "sub",
    lambda v, a: v[0] - v[1],
    lambda g, v, out, a: [_unbroadcast(g, v[0].shape), _unbroadcast(-g, v[1].shape)],
)
_binary(
    "mul",
    lambda v, a: v[0] * v[1],
    lambda g, v, out, a: [_unbroadcast(g * v[1], v[0].shape), _unbroadcast(g * v[0], v[1].shape)],
)
_binary(
    "div",
    lambda v, a: v[0] / v[1],
    lambda g, v, out, a: [
        _unbroadcast(g / v[1], v[0].shape),
        _unbroadcast(-g * out / v[1], v[1].shape),
    ],
)


def _matmul_shape(shapes, attrs):
    sa, sb = shapes
    if len(sa) == 0 or len(sb) == 0:
        raise ShapeError("matmul operands must have rank >= 1")
    a = sa if len(sa) > 1 else (1,) + sa
    b = sb if len(sb) > 1 else sb + (1,)
    if a[-1] != b[-2]:
        raise ShapeError(f"matmul inner dimensions differ: {sa} @ {sb}")
    try:
        batch = tuple(np.broadcast_shapes(a[:-2], b[:-2]))
    except ValueError:
        raise ShapeError(f"matmul batch dimensions differ: {sa} @ {sb}") from None
    out = batch + (a[-2], b[-1])
    if len(sb) == 1:
        out = out[:-1]
    if len(sa) == 1:
        out = out[:-2] + out[-1:] if len(sb) > 1 else out[:-1]
    return out


def _matmul_vjp(g, v, out, attrs):
    a, b = v
    A = a if a.ndim > 1 else a[None, :]
    B = b if b.ndim > 1 else b[:, None]
    batch = tuple(np.broadcast_shapes(A.shape[:-2], B.shape[:-2]))
    G = np.reshape(g, batch + (A.shape[-2], B.shape[-1]))
    gA = _unbroadcast(G @ np.swapaxes(B, -1, -2), A.shape).reshape(a.shape)
    gB = _unbroadcast(np.swapaxes(A, -1, -2) @ G, B.shape).reshape(b.shape)
    return [gA, gB]


register_op("matmul", lambda v, a: np.matmul(v[0], v[1]), _matmul_vjp, _matmul_shape)


def _concat_shape(shapes, attrs):
    axis = attrs["axis"]
    ref = list(shapes[0])
    nd = len(ref)
    ax = axis % nd
    total = 0
    for s in shapes:
        if len(s) != nd or any(s[i] != ref[i] for i in range(nd) if i != ax):
            raise ShapeError(f"concat shapes disagree off axis {axis}: {shapes}")
        total += s[ax]
    ref[ax] = total
    return tuple(ref)


def _concat_vjp(g, v, out, attrs):
    ax = attrs["axis"] % g.ndim
    cuts = np.cumsum([x.shape[ax] for x in v])[:-1]
    return np.split(g, cuts, axis=ax)


register_op("concat", lambda v, a: np.concatenate(v, axis=a["axis"]), _concat_vjp, _concat_shape)


def _slice_index(ndim, attrs):
    idx = [slice(None)] * ndim
    idx[attrs["axis"] % ndim] = slice(attrs["start"], attrs["stop"])
    return tuple(idx)


def _slice_shape(shapes, attrs):
    s = list(shapes[0])
    ax = attrs["axis"] % len(s)
    start, stop, _ = slice(attrs["start"], attrs["stop"]).indices(s[ax])
    s[ax] = max(0, stop - start)
    return tuple(s)


def _slice_vjp(g, v, out, attrs):
    full = np.zeros_like(v[0])
    full[_slice_index(full.ndim, attrs)] = g
    return [full]


register_op("slice", lambda v, a: v[0][_slice_index(v[0].ndim, a)], _slice_vjp, _slice_shape)

register_op("reverse", lambda v, a: v[0][..., ::-1].copy(), lambda g, v, out, a: [g[..., ::-1]])


def _transpose_shape(shapes, attrs):
    s = shapes[0]
    axes = attrs["axes"]
    if sorted(axes) != list(range(len(s))):
        raise ShapeError(f"transpose axes {axes} do not match rank {len(s)}")
    return tuple(s[i] for i in axes)


register_op(
    "transpose",
    lambda v, a: np.transpose(v[0], a["axes"]).copy(),
    lambda g, v, out, a: [np.transpose(g, np.argsort(a["axes"]))],
    _transpose_shape,
)


def _reshape_shape(shapes, attrs):
    if int(np.prod(shapes[0])) != int(np.prod(attrs["shape"])):
        raise ShapeError(f"cannot reshape {shapes[0]} to {attrs['shape']}")
    return tuple(attrs["shape"])


register_op(
    "reshape",
    lambda v, a: v[0].reshape(a["shape"]),
    lambda g, v, out, a: [g.reshape(v[0].shape)],
    _reshape_shape,
)

register_op("exp", lambda v, a: np.exp(v[0]), lambda g, v, out, a: [g * out])
register_op("log", lambda v, a: np.log(v[0]), lambda g, v, out, a: [g / v[0]])
register_op(
    "softplus",
    lambda v, a: np.logaddexp(0.0, v[0]).astype(v[0].dtype, copy=False),
    lambda g, v, out, a: [g * expit(v[0])],
)


def _silu_vjp(g, v, out, a):
    s = expit(v[0])
    return [g * (s + v[0] * s * (1.0 - s))]


register_op("silu", lambda v, a: v[0] * expit(v[0]), _silu_vjp)
register_op("relu", lambda v, a: np.maximum(v[0], 0.0), lambda g, v, out, a: [g * (v[0] > 0)])
register_op(
    "leaky_relu",
    lambda v, a: np.where(v[0] > 0, v[0], a["slope"] * v[0]),
    lambda g, v, out, a: [np.where(v[0] > 0, g, a["slope"] * g)],
)
register_op(
    "maximum",
    lambda v, a: np.maximum(v[0], a["value"]),
    lambda g, v, out, a: [g * (v[0] > a["value"])],
)


def _sqrt_vjp(g, v, out, a):
    # zero adjoint at sqrt(0): keeps norms of coincident points finite
    safe = np.where(out > 0, out, 1.0)
    return [np.where(out > 0, g / (2.0 * safe), 0.0)]


register_op("sqrt", lambda v, a: np.sqrt(v[0]), _sqrt_vjp)


def _softmax(v, a):
    x = v[0]
    z = np.exp(x - x.max(axis=a["axis"], keepdims=True))
    return z / z.sum(axis=a["axis"], keepdims=True)


register_op(
    "softmax",
    _softmax,
    lambda g, v, out, a: [out * (g - (g * out).sum(axis=a["axis"], keepdims=True))],
)


def _reduce_shape(shapes, attrs):
    s = shapes[0]
    axis, keep = attrs["axis"], attrs["keepdims"]
    if axis is None:
        return tuple(1 for _ in s) if keep else ()
    ax = axis % len(s)
    if keep:
        return s[:ax] + (1,) + s[ax + 1:]
    return s[:ax] + s[ax + 1:]


def _expand(g, x, attrs):
    if attrs["axis"] is None:
        return np.broadcast_to(np.reshape(g, (1,) * x.ndim), x.shape)
    if not attrs["keepdims"]:
        g = np.expand_dims(g, attrs["axis"])
    return np.broadcast_to(g, x.shape)


register_op(
    "sum",
    lambda v, a: np.sum(v[0], axis=a["axis"], keepdims=a["keepdims"]),
    lambda g, v, out, a: [np.array(_expand(g, v[0], a))],
    _reduce_shape,
)
register_op(
    "mean",
    lambda v, a: np.mean(v[0], axis=a["axis"], keepdims=a["keepdims"]),
    lambda g, v, out, a: [
        np.array(_expand(g, v[0], a)) * (out.size / max(v[0].size, 1))
    ],
    _reduce_shape,
)


def _max_vjp(g, v, out, a):
    x = v[0]
    if a["axis"] is None:
        mask = np.zeros(x.size, dtype=x.dtype)
        mask[np.argmax(x)] = 1.0
        return [mask.reshape(x.shape) * np.reshape(g, ())]
    ax = a["axis"] % x.ndim
    arg = np.expand_dims(np.argmax(x, axis=ax), ax)
    mask = np.zeros_like(x)
    np.put_along_axis(mask, arg, 1.0, axis=ax)
    return [mask * _expand(g, x, a)]


register_op(
    "max",
    lambda v, a: np.max(v[0], axis=a["axis"], keepdims=a["keepdims"]),
    _max_vjp,
    _reduce_shape,
)


def _scan_shape(shapes, attrs):
    if shapes[0] != shapes[1]:
        raise ShapeError(f"scan decay and input shapes differ: {shapes[0]} vs {shapes[1]}")
    if len(shapes[0]) < 1 or shapes[0][0] < 1:
        raise ShapeError("scan needs at least one step along axis 0")
    return shapes[0]


def _scan_forward(v, a):
    x = v[0]
    L = x.shape[0]
    h = kernels.scan_forward(x.reshape(L, -1), v[1].reshape(L, -1))
    return h.reshape(x.shape)


def _scan_vjp(g, v, out, a):
    L = out.shape[0]
    ga, gb = kernels.scan_backward(
        v[0].reshape(L, -1), out.reshape(L, -1), np.asarray(g, dtype=out.dtype).reshape(L, -1)
    )
    return [ga.reshape(out.shape), gb.reshape(out.shape)]


register_op("scan", _scan_forward, _scan_vjp, _scan_shape)


def _gather_vjp(g, v, out, a):
    full = np.zeros_like(v[0])
    np.add.at(full, v[1], g)
    return [full, None]


register_op(
    "gather",
    lambda v, a: v[0][v[1]],
    _gather_vjp,
    lambda shapes, attrs: tuple(shapes[1]) + tuple(shapes[0][1:]),
)


# --------------------------------------------------------------------------
# graph construction


class Node:
    """Handle to one value in a :class:`Graph`."""

    __slots__ = ("graph", "index", "op", "inputs", "attrs", "shape", "kind", "label")
    __array_priority__ = 1000

    def __init__(self, graph, index, op, inputs, attrs, shape, kind, label):
        self.graph = graph
        self.index = index
        self.op = op
        self.inputs = inputs
        self.attrs = attrs
        self.shape = tuple(shape)
        self.kind = kind
        self.label = label

    def __repr__(self):
        tag = f" {self.label!r}" if self.label else ""
        return f"<Node {self.index} {self.op}{tag} shape={self.shape}>"

    @property
    def ndim(self):
        return len(self.shape)

    def __add__(self, other):
        return self.graph.add(self, other)

    def __radd__(self, other):
        return self.graph.add(other, self)

    def __sub__(self, other):
        return self.graph.sub(self, other)

    def __rsub__(self, other):
        return self.graph.sub(other, self)

    def __mul__(self, other):
        return self.graph.mul(self, other)

    def __rmul__(self, other):
        return self.graph.mul(other, self)

    def __truediv__(self, other):
        return self.graph.div(self, other)

    def __rtruediv__(self, other):
        return self.graph.div(other, self)

    def __neg__(self):
        return self.graph.mul(self, -1.0)

    def __matmul__(self, other):
        return self.graph.matmul(self, other)

    def __rmatmul__(self, other):
        return self.graph.matmul(other, self)


class Graph:
    """A DAG of primitive ops with named inputs, parameters and outputs."""

    def __init__(self):
        self.nodes: list[Node] = []
        self.inputs: dict[str, Node] = {}
        self.param_inits: dict[str, Callable] = {}
        self.outputs: dict[str, Node] = {}

    def __len__(self):
        return len(self.nodes)

    # -- leaves ------------------------------------------------------------

    def _new(self, op, inputs, attrs, shape, kind="float", label=None):
        node = Node(self, len(self.nodes), op, tuple(inputs), attrs, shape, kind, label)
        self.nodes.append(node)
        return node

    def input(self, name: str, shape: Sequence[int], kind: str = "float") -> Node:
        if name in self.inputs:
            node = self.inputs[name]
            if node.shape != tuple(shape):
                raise ShapeError(f"input {name!r} redeclared with shape {tuple(shape)} != {node.shape}")
            return node
        node = self._new("input", (), {"name": name}, shape, kind, label=name)
        self.inputs[name] = node
        return node

    def param(self, name: str, shape: Sequence[int], init: Callable | None = None) -> Node:
        """Declare (or fetch, when the name exists) a trainable parameter slot.

        Declaring the same name twice returns the same node, which is how
        blocks share weights.
        """
        node = self.input(name, shape)
        if name not in self.param_inits:
            self.param_inits[name] = init or _default_init
        return node

    @property
    def params(self) -> dict[str, Node]:
        return {k: self.inputs[k] for k in self.param_inits}

    def const(self, value, kind: str = "float") -> Node:
        arr = np.asarray(value, dtype=np.int64 if kind == "index" else np.float64)
        return self._new("const", (), {"value": arr}, arr.shape, kind)

    def output(self, name: str, node: Node) -> Node:
        self.outputs[name] = node
        return node

    def init_params(self, seed: int = 0) -> dict[str, np.ndarray]:
        """Draw initial values for every parameter, keyed by name.

        Each parameter gets its own stream seeded from (seed, crc32(name)), so
        adding a block never reshuffles the others.
        """
        out = {}
        dtype = get_dtype()
        for name, init in self.param_inits.items():
            rng = np.random.default_rng([seed, zlib.crc32(name.encode())])
            shape = self.inputs[name].shape
            out[name] = np.asarray(init(rng, shape), dtype=dtype).reshape(shape)
        return out

    # -- op plumbing -------------------------------------------------------

    def _lift(self, x) -> Node:
        if isinstance(x, Node):
            if x.graph is not self:
                raise GraphError("node belongs to a different graph")
            return x
        return self.const(x)

    def apply(self, op: str, inputs: Iterable, label: str | None = None, **attrs) -> Node:
        spec = OPS[op]
        nodes = [self._lift(x) for x in inputs]
        for n in nodes:
            if n.kind != "float" and not (op == "gather" and n is nodes[-1]):
                raise ShapeError(f"{op}: index node {n!r} used as a float operand")
        try:
            shape = spec.shape([n.shape for n in nodes], attrs)
        except ShapeError as exc:
            where = f" ({label})" if label else ""
            raise ShapeError(f"node {len(self.nodes)} {op}{where}: {exc}") from None
        return self._new(op, nodes, attrs, shape, label=label)

    def add(self, a, b, label=None):
        return self.apply("add", (a, b), label)

    def sub(self, a, b, label=None):
        return self.apply("sub", (a, b), label)

    def mul(self, a, b, label=None):
        return self.apply("mul", (a, b), label)

    def div(self, a, b, label=None):
        return self.apply("div", (a, b), label)

    def matmul(self, a, b, label=None):
        return self.apply("matmul", (a, b), label)

    def concat(self, nodes, axis=-1, label=None):
        if not nodes:
            raise ShapeError("concat of no nodes")
        return self.apply("concat", nodes, label, axis=axis)

    def slice(self, x, start, stop, axis=-1, label=None):
        return self.apply("slice", (x,), label, axis=axis, start=start, stop=stop)

    def reverse(self, x, label=None):
        """Reverse the last axis (channel flip)."""
        return self.apply("reverse", (x,), label)

    def transpose(self, x, axes=None, label=None):
        x = self._lift(x)
        if axes is None:
            axes = tuple(range(x.ndim - 2)) + (x.ndim - 1, x.ndim - 2)
        return self.apply("transpose", (x,), label, axes=tuple(axes))

    def reshape(self, x, shape, label=None):
        return self.apply("reshape", (x,), label, shape=tuple(shape))

    def exp(self, x, label=None):
        return self.apply("exp", (x,), label)

    def log(self, x, label=None):
        return self.apply("log", (x,), label)

    def softplus(self, x, label=None):
        return self.apply("softplus", (x,), label)

    def silu(self, x, label=None):
        return self.apply("silu", (x,), label)

    def relu(self, x, label=None):
        return self.apply("relu", (x,), label)

    def leaky_relu(self, x, slope=0.2, label=None):
        return self.apply("leaky_relu", (x,), label, slope=float(slope))

    def maximum(self, x, value, label=None):
        """Elementwise max against a constant scalar."""
        return self.apply("maximum", (x,), label, value=float(value))

    def sqrt(self, x, label=None):
        return self.apply("sqrt", (x,), label)

    def softmax(self, x, axis=-1, label=None):
        return self.apply("softmax", (x,), label, axis=axis)

    def sum(self, x, axis=None, keepdims=False, label=None):
        return self.apply("sum", (x,), label, axis=axis, keepdims=keepdims)

    def mean(self, x, axis=None, keepdims=False, label=None):
        return self.apply("mean", (x,), label, axis=axis, keepdims=keepdims)

    def max(self, x, axis=None, keepdims=False, label=None):
        return self.apply("max", (x,), label, axis=axis, keepdims=keepdims)

    def min(self, x, axis=None, keepdims=False, label=None):
        return -self.max(-self._lift(x), axis=axis, keepdims=keepdims, label=label)

    def scan(self, decay, inp, label=None):
        """h[t] = decay[t] * h[t-1] + inp[t] along axis 0, starting from zero."""
        return self.apply("scan", (decay, inp), label)

    def gather(self, x, index: Node, label=None):
        """Rows of ``x`` picked by an index node: out[i...] = x[index[i...]]."""
        if not isinstance(index, Node) or index.kind != "index":
            raise ShapeError("gather needs an index node")
        return self.apply("gather", (x, index), label)

    def indices(self, fn: Callable, inputs: Sequence, shape: Sequence[int], label=None) -> Node:
        """Integer node ``fn(*input_values)``; carries no gradient."""
        nodes = [self._lift(x) for x in inputs]
        return self._new("indices", nodes, {"fn": fn}, shape, kind="index", label=label)


def _default_init(rng, shape):
    fan_in = shape[0] if len(shape) > 1 else max(shape[0] if shape else 1, 1)
    return rng.normal(0.0, 1.0 / np.sqrt(fan_in), size=shape)


# --------------------------------------------------------------------------
# evaluation


def _ancestors(graph: Graph, roots: Iterable[Node]) -> list[Node]:
    seen = set()
    stack = [r.index for r in roots]
    while stack:
        i = stack.pop()
        if i in seen:
            continue
        seen.add(i)
        stack.extend(n.index for n in graph.nodes[i].inputs)
    return [graph.nodes[i] for i in sorted(seen)]


def _run(graph: Graph, bindings, roots) -> dict[int, np.ndarray]:
    dtype = get_dtype()
    vals: dict[int, np.ndarray] = {}
    for node in _ancestors(graph, roots):
        if node.op == "input":
            name = node.attrs["name"]
            if name not in bindings:
                raise GraphError(f"unbound input {name!r}")
            want = np.int64 if node.kind == "index" else dtype
            v = np.asarray(bindings[name], dtype=want)
            if v.shape != node.shape:
                raise ShapeError(f"input {name!r} bound with shape {v.shape}, declared {node.shape}")
            vals[node.index] = v
        elif node.op == "const":
            v = node.attrs["value"]
            vals[node.index] = v if node.kind == "index" else v.astype(dtype, copy=False)
        elif node.op == "indices":
            v = np.asarray(node.attrs["fn"](*[vals[n.index] for n in node.inputs]), dtype=np.int64)
            if v.shape != node.shape:
                raise ShapeError(f"index node {node!r} produced shape {v.shape}")
            vals[node.index] = v
        else:
            ins = [vals[n.index] for n in node.inputs]
            out = OPS[node.op].forward(ins, node.attrs)
            vals[node.index] = np.asarray(out, dtype=dtype)
    return vals


def _resolve(graph: Graph, key) -> Node:
    if isinstance(key, Node):
        return key
    if key in graph.outputs:
        return graph.outputs[key]
    raise GraphError(f"graph has no output {key!r}")


def evaluate(graph: Graph, bindings: dict, outputs: Sequence[str] | None = None) -> dict[str, np.ndarray]:
    """Evaluate named outputs (all of them by default) for the given bindings.

    Only the ancestors of the requested outputs run, so inputs feeding other
    outputs may stay unbound.
    """
    names = list(graph.outputs) if outputs is None else list(outputs)
    roots = [_resolve(graph, n) for n in names]
    vals = _run(graph, bindings, roots)
    return {n: vals[r.index] for n, r in zip(names, roots)}


def value_and_grad(graph: Graph, output, bindings: dict, extra: Sequence[str] = ()):
    """Evaluate ``output`` (a scalar) plus ``extra`` outputs and back-propagate.

    Returns ``(values, grads)`` where ``grads`` maps every float input and
    parameter name to d(output)/d(input); unreachable inputs get zeros.
    """
    root = _resolve(graph, output)
    if int(np.prod(root.shape)) != 1:
        raise GraphError(f"backward needs a scalar output, got shape {root.shape}")
    extra_nodes = [_resolve(graph, e) for e in extra]
    vals = _run(graph, bindings, [root, *extra_nodes])
    order = _ancestors(graph, [root])

    # nodes that depend on some float input: only those need adjoints
    live = set()
    for node in order:
        if node.op == "input":
            if node.kind == "float":
                live.add(node.index)
        elif node.op not in ("const", "indices") and any(n.index in live for n in node.inputs):
            live.add(node.index)

    dtype = get_dtype()
    adj: dict[int, np.ndarray] = {root.index: np.ones(root.shape, dtype=dtype)}
    for node in reversed(order):
        g = adj.pop(node.index, None)
        if g is None or node.index not in live or node.op == "input":
            if node.op == "input" and g is not None:
                adj[node.index] = g
            continue
        spec = OPS[node.op]
        ins = [vals[n.index] for n in node.inputs]
        grads = spec.vjp(g, ins, vals[node.index], node.attrs)
        for src, gi in zip(node.inputs, grads):
            if gi is None or src.index not in live:
                continue
            gi = np.asarray(gi, dtype=dtype)
            if src.index in adj:
                adj[src.index] = adj[src.index] + gi
            else:
                adj[src.index] = gi

    grads = {}
    for name, node in graph.inputs.items():
        if node.kind != "float":
            continue
        g = adj.get(node.index)
        grads[name] = np.zeros(node.shape, dtype=dtype) if g is None else np.array(g).reshape(node.shape)
    values = {"__output__": vals[root.index]}
    for e, n in zip(extra, extra_nodes):
        values[e if isinstance(e, str) else repr(e)] = vals[n.index]
    return values, grads


def backward(graph: Graph, output, bindings: dict) -> dict[str, np.ndarray]:
    """Gradients of the scalar ``output`` w.r.t. every float input and parameter."""
    return value_and_grad(graph, output, bindings)[1]
