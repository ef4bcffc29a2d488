"""Reverse-mode autodiff over array-valued computation graphs.

Every operation appends one node to a Tape; backward() walks the node list
in reverse. Node payloads are numpy arrays so that a whole minibatch is a
single node, which keeps the per-iteration Python overhead bounded.
"""

from __future__ import annotations

import numpy as np

from .params import ParamVector


class StructuralError(ValueError):
    """Graph is malformed: cross-tape operands, bad indices, shape mismatch."""


class NumericError(FloatingPointError):
    """A non-finite value appeared during gradient accumulation."""


def _unbroadcast(grad, shape):
    """Sum `grad` down to `shape`, undoing numpy broadcasting."""
    grad = np.asarray(grad)
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


class Tape:
    """Ordered record of operations, plus the parameter-slot map.

    If constructed with a ParamVector, every segment is registered as a leaf
    whose gradient ends up in the vector returned by backward().
    """

    def __init__(self, params: ParamVector | None = None):
        self.parents = []  # tuple of parent node indices per node
        self.vjps = []     # callable grad -> tuple of parent grads, or None for leaves
        self.ops = []      # op name per node, for diagnostics
        self.params = params
        self.param_slots = {}
        if params is not None:
            for name in params.layout.names():
                v = self._leaf(params.view(name), f"param:{name}")
                self.param_slots[name] = v.index

    def _append(self, data, parents, vjp, op):
        idx = len(self.parents)
        self.parents.append(parents)
        self.vjps.append(vjp)
        self.ops.append(op)
        return Value(self, idx, data)

    def _leaf(self, data, op):
        return self._append(np.asarray(data, dtype=np.float64), (), None, op)

    def leaf(self, name):
        """Value wrapping the registered parameter segment `name`."""
        if name not in self.param_slots:
            raise StructuralError(f"no parameter segment named {name!r}")
        return Value(self, self.param_slots[name], self.params.view(name))

    def leaves(self, prefix=""):
        """Dict of all parameter leaves whose names start with `prefix`,
        keyed by the name with the prefix stripped."""
        return {
            name[len(prefix):]: self.leaf(name)
            for name in self.param_slots
            if name.startswith(prefix)
        }

    def variable(self, data):
        """Non-parameter leaf (an input that still receives a vjp path)."""
        return self._leaf(data, "variable")

    def __len__(self):
        return len(self.parents)


class Value:
    """Handle to one node of a Tape."""

    __slots__ = ("tape", "index", "data")

    # Make `ndarray <op> Value` fall through to our reflected methods
    # instead of numpy building an object array.
    __array_ufunc__ = None

    def __init__(self, tape, index, data):
        self.tape = tape
        self.index = index
        self.data = data

    def _check(self, other):
        if other.tape is not self.tape:
            raise StructuralError("operands recorded on different tapes")

    # -- binary arithmetic ------------------------------------------------

    def __add__(self, other):
        t = self.tape
        if isinstance(other, Value):
            self._check(other)
            sa, sb = self.data.shape, other.data.shape
            return t._append(
                self.data + other.data,
                (self.index, other.index),
                lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)),
                "add",
            )
        c = np.asarray(other, dtype=np.float64)
        sa = self.data.shape
        return t._append(
            self.data + c, (self.index,), lambda g: (_unbroadcast(g, sa),), "add_c"
        )

    __radd__ = __add__

    def __sub__(self, other):
        t = self.tape
        if isinstance(other, Value):
            self._check(other)
            sa, sb = self.data.shape, other.data.shape
            return t._append(
                self.data - other.data,
                (self.index, other.index),
                lambda g: (_unbroadcast(g, sa), _unbroadcast(-g, sb)),
                "sub",
            )
        c = np.asarray(other, dtype=np.float64)
        sa = self.data.shape
        return t._append(
            self.data - c, (self.index,), lambda g: (_unbroadcast(g, sa),), "sub_c"
        )

    def __rsub__(self, other):
        c = np.asarray(other, dtype=np.float64)
        sa = self.data.shape
        return self.tape._append(
            c - self.data, (self.index,), lambda g: (_unbroadcast(-g, sa),), "rsub_c"
        )

    def __mul__(self, other):
        t = self.tape
        if isinstance(other, Value):
            self._check(other)
            a, b = self.data, other.data
            return t._append(
                a * b,
                (self.index, other.index),
                lambda g: (_unbroadcast(g * b, a.shape), _unbroadcast(g * a, b.shape)),
                "mul",
            )
        c = np.asarray(other, dtype=np.float64)
        sa = self.data.shape
        return t._append(
            self.data * c, (self.index,), lambda g: (_unbroadcast(g * c, sa),), "mul_c"
        )

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Value):
            self._check(other)
            a, b = self.data, other.data
            return self.tape._append(
                a / b,
                (self.index, other.index),
                lambda g: (
                    _unbroadcast(g / b, a.shape),
                    _unbroadcast(-g * a / (b * b), b.shape),
                ),
                "div",
            )
        return self * (1.0 / np.asarray(other, dtype=np.float64))

    def __rtruediv__(self, other):
        c = np.asarray(other, dtype=np.float64)
        a = self.data
        return self.tape._append(
            c / a,
            (self.index,),
            lambda g: (_unbroadcast(-g * c / (a * a), a.shape),),
            "rdiv_c",
        )

    def __neg__(self):
        sa = self.data.shape
        return self.tape._append(
            -self.data, (self.index,), lambda g: (_unbroadcast(-g, sa),), "neg"
        )

    def __pow__(self, n):
        if isinstance(n, Value):
            raise StructuralError("only constant exponents are supported")
        a = self.data
        return self.tape._append(
            a ** n,
            (self.index,),
            lambda g: (_unbroadcast(g * n * a ** (n - 1), a.shape),),
            "pow",
        )

    def matmul(self, other):
        if isinstance(other, Value):
            self._check(other)
            a, b = self.data, other.data
            return self.tape._append(
                a @ b,
                (self.index, other.index),
                lambda g: (g @ b.T, a.T @ g),
                "matmul",
            )
        b = np.asarray(other, dtype=np.float64)
        return self.tape._append(
            self.data @ b, (self.index,), lambda g: (g @ b.T,), "matmul_c"
        )

    __matmul__ = matmul

    def __rmatmul__(self, other):
        a = np.asarray(other, dtype=np.float64)
        return self.tape._append(
            a @ self.data, (self.index,), lambda g: (a.T @ g,), "rmatmul_c"
        )

    # -- elementwise functions --------------------------------------------

    def tanh(self):
        y = np.tanh(self.data)
        return self.tape._append(
            y, (self.index,), lambda g: (g * (1.0 - y * y),), "tanh"
        )

    def exp(self):
        y = np.exp(self.data)
        return self.tape._append(y, (self.index,), lambda g: (g * y,), "exp")

    def log(self):
        a = self.data
        return self.tape._append(
            np.log(a), (self.index,), lambda g: (g / a,), "log"
        )

    def sin(self):
        a = self.data
        return self.tape._append(
            np.sin(a), (self.index,), lambda g: (g * np.cos(a),), "sin"
        )

    def cos(self):
        a = self.data
        return self.tape._append(
            np.cos(a), (self.index,), lambda g: (-g * np.sin(a),), "cos"
        )

    def sqrt(self):
        y = np.sqrt(self.data)
        return self.tape._append(
            y, (self.index,), lambda g: (g * 0.5 / y,), "sqrt"
        )

    def clip(self, lo, hi):
        """Clamp to [lo, hi]; gradient passes through only inside the range."""
        a = self.data
        mask = ((a >= lo) & (a <= hi)).astype(np.float64)
        return self.tape._append(
            np.clip(a, lo, hi), (self.index,), lambda g: (g * mask,), "clip"
        )

    # -- shape ops ---------------------------------------------------------

    def col(self, i):
        """Column slice [:, i:i+1] of a 2-d node."""
        a = self.data
        if a.ndim != 2:
            raise StructuralError("col() requires a 2-d node")

        def vjp(g):
            out = np.zeros_like(a)
            out[:, i : i + 1] = g
            return (out,)

        return self.tape._append(a[:, i : i + 1], (self.index,), vjp, "col")

    def sum(self):
        shape = self.data.shape
        return self.tape._append(
            np.float64(self.data.sum()),
            (self.index,),
            lambda g: (np.full(shape, g),),
            "sum",
        )

    def mean(self):
        shape = self.data.shape
        n = self.data.size
        return self.tape._append(
            np.float64(self.data.mean()),
            (self.index,),
            lambda g: (np.full(shape, g / n),),
            "mean",
        )

    def reshape(self, *shape):
        a = self.data
        return self.tape._append(
            a.reshape(*shape), (self.index,), lambda g: (g.reshape(a.shape),), "reshape"
        )

    def __float__(self):
        return float(self.data)


def concat_rows(values):
    """Stack 2-d Values vertically into one node."""
    if not values:
        raise StructuralError("concat_rows needs at least one operand")
    tape = values[0].tape
    for v in values:
        if v.tape is not tape:
            raise StructuralError("operands recorded on different tapes")
    sizes = [v.data.shape[0] for v in values]
    splits = np.cumsum(sizes)[:-1]
    return tape._append(
        np.concatenate([v.data for v in values], axis=0),
        tuple(v.index for v in values),
        lambda g: tuple(np.split(g, splits, axis=0)),
        "concat_rows",
    )


def backward(tape: Tape, output: Value) -> ParamVector:
    """Gradient of a scalar output w.r.t. every registered parameter segment.

    Raises NumericError (naming the offending node) if a non-finite value
    shows up in any accumulated gradient.
    """
    if output.tape is not tape:
        raise StructuralError("output was recorded on a different tape")
    if tape.params is None:
        raise StructuralError("tape has no registered parameters")
    grads = _accumulate(tape, output)
    result = ParamVector.zeros_like(tape.params)
    bad = None
    for name, idx in tape.param_slots.items():
        g = grads[idx]
        if g is None:
            continue
        if not np.all(np.isfinite(g)):
            bad = name
        result.view(name)[...] = g
    if bad is not None:
        node = _first_nonfinite(grads, tape)
        raise NumericError(
            f"non-finite gradient for parameter {bad!r}; "
            f"first bad node: #{node} op={tape.ops[node]}"
        )
    return result


def grad_at(tape: Tape, output: Value, wrt: Value):
    """Gradient of a scalar output w.r.t. an arbitrary recorded node."""
    grads = _accumulate(tape, output)
    g = grads[wrt.index]
    if g is None:
        return np.zeros_like(wrt.data)
    return g


def _accumulate(tape, output):
    n = output.index + 1
    if n > len(tape):
        raise StructuralError("output index beyond tape length")
    grads = [None] * len(tape)
    grads[output.index] = np.ones_like(np.asarray(output.data))
    parents_list = tape.parents
    vjps = tape.vjps
    for i in range(output.index, -1, -1):
        g = grads[i]
        if g is None:
            continue
        vjp = vjps[i]
        if vjp is None:
            continue
        parents = parents_list[i]
        try:
            pgs = vjp(g)
        except IndexError as exc:  # defensive: dangling operand
            raise StructuralError(f"dangling operand at node #{i}") from exc
        for p, pg in zip(parents, pgs):
            if p >= i:
                raise StructuralError(f"node #{i} has non-causal parent #{p}")
            if grads[p] is None:
                grads[p] = pg
            else:
                grads[p] = grads[p] + pg
    return grads


def _first_nonfinite(grads, tape):
    for i, g in enumerate(grads):
        if g is not None and not np.all(np.isfinite(g)):
            return i
    return -1


# Generic elementwise functions, usable on Values, Jets, and plain arrays.

def _dispatch(name, numpy_fn):
    def fn(x):
        method = getattr(x, name, None)
        if method is not None and not isinstance(x, np.ndarray):
            return method()
        return numpy_fn(x)

    fn.__name__ = name
    return fn


tanh = _dispatch("tanh", np.tanh)
exp = _dispatch("exp", np.exp)
log = _dispatch("log", np.log)
sin = _dispatch("sin", np.sin)
cos = _dispatch("cos", np.cos)
sqrt = _dispatch("sqrt", np.sqrt)


def matmul(x, w):
    if isinstance(x, np.ndarray) and isinstance(w, Value):
        return w.__rmatmul__(x)
    if hasattr(x, "matmul"):
        return x.matmul(w)
    return x @ w
