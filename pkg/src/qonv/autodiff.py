"""Dense float64 tensors with tape-based reverse-mode differentiation.

Everything trainable in this package runs through the handful of primitives
here: affine maps, same-size 1D/2D cross-correlations, channel concatenation,
elementwise activations, and mean-squared error. A fresh :class:`Tape` is
built per forward pass; ``Tape.backward`` walks it once in reverse and writes
gradients into the participating :class:`Parameter` objects.

Conventions:
  * "convolution" means cross-correlation (no kernel flip),
  * spatial outputs keep their input size via zero padding of (K-1)/2,
  * channel axis is axis 0 for grid tensors (C x N, C x H x W).
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import erf as _erf

from .errors import ContractError, ConfigurationError, DimensionError

TWO_OVER_SQRT_PI = 2.0 / np.sqrt(np.pi)


class Tensor:
    """Immutable dense array of float64 values."""

    __slots__ = ("data",)

    def __init__(self, data):
        arr = np.array(data, dtype=np.float64, order="C", copy=True)
        arr.setflags(write=False)
        self.data = arr

    @classmethod
    def _adopt(cls, arr: np.ndarray) -> "Tensor":
        # Internal fast path for freshly allocated op outputs; skips the copy.
        out = object.__new__(cls)
        arr.setflags(write=False)
        out.data = arr
        return out

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    def tolist(self):
        return self.data.tolist()

    def __repr__(self):
        return f"Tensor(shape={self.data.shape})"


class Parameter:
    """A named trainable tensor paired with a same-shape gradient buffer."""

    def __init__(self, name: str, value) -> None:
        self.name = name
        self.value = value if isinstance(value, Tensor) else Tensor(value)
        self.grad = np.zeros(self.value.shape)

    def assign(self, new_value: np.ndarray) -> None:
        if new_value.shape != self.value.shape:
            raise DimensionError(
                f"parameter {self.name}: cannot assign shape {new_value.shape} "
                f"over {self.value.shape}"
            )
        self.value = Tensor(new_value)

    def _assign_owned(self, new_value: np.ndarray) -> None:
        # For optimizers handing over a freshly computed array.
        self.value = Tensor._adopt(new_value)

    def zero_grad(self) -> None:
        self.grad = np.zeros(self.value.shape)

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.value.shape})"


class Node:
    """One recorded primitive result: a value, its parents, and a pullback."""

    __slots__ = ("value", "parents", "backward_fn", "param", "needs_grad")

    def __init__(self, value: Tensor, parents=(), backward_fn=None, param=None):
        self.value = value
        self.parents = tuple(parents)
        self.backward_fn = backward_fn
        self.param = param
        self.needs_grad = param is not None or any(
            p.needs_grad for p in self.parents
        )

    @property
    def shape(self):
        return self.value.shape


class Tape:
    """Append-only record of primitives; parents always precede children."""

    def __init__(self) -> None:
        self.nodes: list[Node] = []
        self._param_leaves: dict[int, Node] = {}

    def _record(self, node: Node) -> Node:
        self.nodes.append(node)
        return node

    def constant(self, value) -> Node:
        tensor = value if isinstance(value, Tensor) else Tensor(value)
        return self._record(Node(tensor))

    def leaf(self, param: Parameter) -> Node:
        """Leaf node for a parameter, memoized so reuse accumulates."""
        node = self._param_leaves.get(id(param))
        if node is None:
            node = self._record(Node(param.value, param=param))
            self._param_leaves[id(param)] = node
        return node

    def lift(self, obj) -> Node:
        if isinstance(obj, Node):
            return obj
        if isinstance(obj, Parameter):
            return self.leaf(obj)
        return self.constant(obj)

    def backward(self, loss: Node) -> None:
        """Populate gradients of every parameter reachable from ``loss``.

        Adjoints are reset on entry, so calling this twice on the same tape
        yields bitwise-identical gradients. Parameters on the tape get their
        accumulated adjoint written to ``grad``; parameters that never touched
        the tape are left with whatever gradient they held (zeros unless a
        caller stepped them), matching "unreachable means zero" when leaves
        start clean.
        """
        if loss.value.size != 1:
            raise ContractError(
                f"backward needs a scalar loss, got shape {loss.value.shape}"
            )
        adjoints: dict[int, np.ndarray] = {id(loss): np.ones(loss.value.shape)}
        for node in reversed(self.nodes):
            adj = adjoints.pop(id(node), None)
            if adj is None:
                continue
            if node.param is not None:
                node.param.grad = adj if adj.flags.owndata else adj.copy()
            if node.backward_fn is None:
                continue
            for parent, contribution in node.backward_fn(adj):
                key = id(parent)
                if key in adjoints:
                    adjoints[key] = adjoints[key] + contribution
                else:
                    adjoints[key] = contribution


def _check_same_shape(a: Node, b: Node, op: str) -> None:
    if a.value.shape != b.value.shape:
        raise DimensionError(
            f"{op}: shapes {a.value.shape} and {b.value.shape} differ"
        )


def add(tape: Tape, a, b) -> Node:
    a, b = tape.lift(a), tape.lift(b)
    _check_same_shape(a, b, "add")

    def backward_fn(adj):
        out = []
        if a.needs_grad:
            out.append((a, adj))
        if b.needs_grad:
            out.append((b, adj))
        return out

    out = Node(Tensor._adopt(a.value.data + b.value.data), (a, b), backward_fn)
    return tape._record(out)


def mul(tape: Tape, a, b) -> Node:
    a, b = tape.lift(a), tape.lift(b)
    _check_same_shape(a, b, "mul")
    av, bv = a.value.data, b.value.data

    def backward_fn(adj):
        out = []
        if a.needs_grad:
            out.append((a, adj * bv))
        if b.needs_grad:
            out.append((b, adj * av))
        return out

    return tape._record(Node(Tensor._adopt(av * bv), (a, b), backward_fn))


def scale(tape: Tape, x, factor: float) -> Node:
    x = tape.lift(x)
    factor = float(factor)
    out = Node(Tensor._adopt(x.value.data * factor), (x,),
               lambda adj: ((x, adj * factor),) if x.needs_grad else ())
    return tape._record(out)


def linear(tape: Tape, x, w, b) -> Node:
    """Affine map: out[n, j] = sum_i x[n, i] w[i, j] + b[j]."""
    x, w, b = tape.lift(x), tape.lift(w), tape.lift(b)
    xv, wv, bv = x.value.data, w.value.data, b.value.data
    if xv.ndim != 2 or wv.ndim != 2 or xv.shape[1] != wv.shape[0]:
        raise DimensionError(
            f"linear: x {xv.shape} is not compatible with w {wv.shape}"
        )
    if bv.shape != (wv.shape[1],):
        raise DimensionError(
            f"linear: bias {bv.shape} does not match output width {wv.shape[1]}"
        )
    out_val = xv @ wv + bv

    def backward_fn(adj):
        out = []
        if x.needs_grad:
            out.append((x, adj @ wv.T))
        if w.needs_grad:
            out.append((w, xv.T @ adj))
        if b.needs_grad:
            out.append((b, adj.sum(axis=0)))
        return out

    return tape._record(Node(Tensor._adopt(out_val), (x, w, b), backward_fn))


def _conv1d_cols(x: np.ndarray, k: int) -> np.ndarray:
    """im2col for a (C, N) signal, zero padded to keep length: (N, C*K)."""
    c, n = x.shape
    pad = (k - 1) // 2
    xp = np.zeros((n + 2 * pad, c))
    xp[pad:pad + n] = x.T
    win = sliding_window_view(xp, k, axis=0)        # (N, C, K)
    # The transpose+reshape stays an overlapping strided view here, and BLAS
    # is drastically slower on that layout; force a dense copy. Taps major,
    # channels minor.
    return np.ascontiguousarray(win.transpose(0, 2, 1)).reshape(n, c * k)


def conv1d(tape: Tape, x, k, b) -> Node:
    """Same-length 1D cross-correlation of (Cin, N) with (Cout, Cin, K)."""
    x, k, b = tape.lift(x), tape.lift(k), tape.lift(b)
    xv, kv, bv = x.value.data, k.value.data, b.value.data
    if kv.ndim != 3:
        raise DimensionError(f"conv1d: kernel must be 3-axis, got {kv.shape}")
    cout, cin, ksize = kv.shape
    if ksize % 2 == 0:
        raise ConfigurationError(f"conv1d: kernel size {ksize} must be odd")
    if xv.ndim != 2 or xv.shape[0] != cin:
        raise DimensionError(
            f"conv1d: input {xv.shape} does not provide {cin} channels"
        )
    if bv.shape != (cout,):
        raise DimensionError(f"conv1d: bias {bv.shape} != ({cout},)")
    n = xv.shape[1]
    cols = _conv1d_cols(xv, ksize)                    # (N, Cin*K)
    kmat = kv.transpose(2, 1, 0).reshape(ksize * cin, cout)
    out_val = np.ascontiguousarray((cols @ kmat + bv).T)  # (Cout, N)

    def backward_fn(adj):
        out = []
        if k.needs_grad:
            dk = (adj @ cols).reshape(cout, ksize, cin).transpose(0, 2, 1)
            out.append((k, dk))
        if b.needs_grad:
            out.append((b, adj.sum(axis=1)))
        if x.needs_grad:
            gcols = _conv1d_cols(adj, ksize)          # (N, Cout*K)
            kflip = kv[:, :, ::-1].transpose(2, 0, 1).reshape(ksize * cout, cin)
            out.append((x, (gcols @ kflip).T))        # (Cin, N)
        return out

    return tape._record(Node(Tensor._adopt(out_val), (x, k, b), backward_fn))


def _conv2d_cols(x: np.ndarray, k: int) -> np.ndarray:
    """im2col for a (C, H, W) image, zero padded: (H*W, K*K*C)."""
    c, h, w = x.shape
    pad = (k - 1) // 2
    xp = np.zeros((h + 2 * pad, w + 2 * pad, c))
    xp[pad:pad + h, pad:pad + w] = x.transpose(1, 2, 0)
    cols = np.empty((h, w, k, k, c))
    for dy in range(k):
        for dx in range(k):
            cols[:, :, dy, dx, :] = xp[dy:dy + h, dx:dx + w, :]
    return cols.reshape(h * w, k * k * c)


def conv2d(tape: Tape, x, k, b) -> Node:
    """Same-size 2D cross-correlation of (Cin, H, W) with (Cout, Cin, K, K)."""
    x, k, b = tape.lift(x), tape.lift(k), tape.lift(b)
    xv, kv, bv = x.value.data, k.value.data, b.value.data
    if kv.ndim != 4 or kv.shape[2] != kv.shape[3]:
        raise DimensionError(f"conv2d: kernel must be (Cout, Cin, K, K), got {kv.shape}")
    cout, cin, ksize = kv.shape[0], kv.shape[1], kv.shape[2]
    if ksize % 2 == 0:
        raise ConfigurationError(f"conv2d: kernel size {ksize} must be odd")
    if xv.ndim != 3 or xv.shape[0] != cin:
        raise DimensionError(
            f"conv2d: input {xv.shape} does not provide {cin} channels"
        )
    if bv.shape != (cout,):
        raise DimensionError(f"conv2d: bias {bv.shape} != ({cout},)")
    h, w = xv.shape[1], xv.shape[2]
    cols = _conv2d_cols(xv, ksize)                    # (HW, K*K*Cin)
    kmat = kv.transpose(2, 3, 1, 0).reshape(ksize * ksize * cin, cout)
    out_val = np.ascontiguousarray((cols @ kmat + bv).T).reshape(cout, h, w)

    def backward_fn(adj):
        g = adj.reshape(cout, h * w)
        out = []
        if k.needs_grad:
            dk = (g @ cols).reshape(cout, ksize, ksize, cin).transpose(0, 3, 1, 2)
            out.append((k, dk))
        if b.needs_grad:
            out.append((b, g.sum(axis=1)))
        if x.needs_grad:
            gcols = _conv2d_cols(adj, ksize)          # (HW, K*K*Cout)
            kflip = (kv[:, :, ::-1, ::-1]
                     .transpose(2, 3, 0, 1)
                     .reshape(ksize * ksize * cout, cin))
            out.append((x, (gcols @ kflip).T.reshape(cin, h, w)))
        return out

    return tape._record(Node(Tensor._adopt(out_val), (x, k, b), backward_fn))


def concat_channels(tape: Tape, a, b) -> Node:
    """Stack two tensors along the channel axis (axis 0), a's channels first."""
    a, b = tape.lift(a), tape.lift(b)
    av, bv = a.value.data, b.value.data
    if av.ndim != bv.ndim or av.shape[1:] != bv.shape[1:]:
        raise DimensionError(
            f"concat_channels: spatial extents of {av.shape} and {bv.shape} differ"
        )
    ca = av.shape[0]
    out_val = np.concatenate([av, bv], axis=0)

    def backward_fn(adj):
        out = []
        if a.needs_grad:
            out.append((a, adj[:ca]))
        if b.needs_grad:
            out.append((b, adj[ca:]))
        return out

    return tape._record(Node(Tensor._adopt(out_val), (a, b), backward_fn))


def _sinc(x: np.ndarray) -> np.ndarray:
    return np.sinc(x / np.pi)


def _sinc_deriv(x: np.ndarray) -> np.ndarray:
    small = np.abs(x) < 1e-6
    xs = np.where(small, 1.0, x)
    exact = (xs * np.cos(xs) - np.sin(xs)) / (xs * xs)
    return np.where(small, -x / 3.0, exact)


ACTIVATION_KINDS = ("relu", "siren", "sinc", "erf")


def activation(tape: Tape, x, kind: str, omega0: float = 30.0) -> Node:
    """Elementwise nonlinearity: relu, siren (sin of scaled input), sinc, erf."""
    x = tape.lift(x)
    xv = x.value.data
    if kind == "relu":
        out_val = np.maximum(xv, 0.0)
        deriv = (xv > 0.0).astype(np.float64)
    elif kind == "siren":
        if not omega0 > 0:
            raise ConfigurationError(f"siren frequency must be positive, got {omega0}")
        out_val = np.sin(omega0 * xv)
        deriv = omega0 * np.cos(omega0 * xv)
    elif kind == "sinc":
        out_val = _sinc(xv)
        deriv = _sinc_deriv(xv)
    elif kind == "erf":
        out_val = _erf(xv)
        deriv = TWO_OVER_SQRT_PI * np.exp(-xv * xv)
    else:
        raise ConfigurationError(
            f"unknown activation {kind!r}; expected one of {ACTIVATION_KINDS}"
        )
    out = Node(Tensor._adopt(out_val), (x,),
               lambda adj: ((x, adj * deriv),) if x.needs_grad else ())
    return tape._record(out)


def mse_loss(tape: Tape, pred, target) -> Node:
    """Mean of squared differences over all elements; scalar output."""
    pred, target = tape.lift(pred), tape.lift(target)
    _check_same_shape(pred, target, "mse_loss")
    diff = pred.value.data - target.value.data
    count = diff.size
    out_val = np.float64((diff * diff).sum() / count)

    def backward_fn(adj):
        g = (2.0 / count) * diff * adj
        out = []
        if pred.needs_grad:
            out.append((pred, g))
        if target.needs_grad:
            out.append((target, -g))
        return out

    return tape._record(Node(Tensor(out_val), (pred, target), backward_fn))
