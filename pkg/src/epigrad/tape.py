"""Tape-based reverse- and forward-mode differentiation over array values.

Nodes hold whole arrays (or scalars), so one simulation step records a few
dozen nodes regardless of population size. Every node stores the local
linearization evaluated at the recorded point; reverse sweeps multiply
adjoints against it, forward sweeps multiply tangents against it, which keeps
the two modes in exact agreement.
"""

from dataclasses import dataclass

import numpy as np

from ._kernels import segment_sum
from .errors import ContractError


@dataclass
class Node:
    op: str
    parents: tuple
    value: object
    payload: tuple = ()


class Var:
    """Handle to one tape node; arithmetic builds new nodes."""

    __slots__ = ("tape", "idx")
    __array_priority__ = 100  # keep numpy from hijacking ndarray <op> Var

    def __init__(self, tape, idx):
        self.tape = tape
        self.idx = idx

    @property
    def value(self):
        return self.tape.nodes[self.idx].value

    def __repr__(self):
        return f"Var(#{self.idx}, {self.value!r})"

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __pow__(self, k):
        return powi(self, k)


class Tape:
    """Append-only computation record plus the registry of named inputs."""

    def __init__(self):
        self.nodes: list[Node] = []
        self.inputs: dict[str, int] = {}

    def __len__(self):
        return len(self.nodes)

    def _push(self, node: Node) -> Var:
        for p in node.parents:
            if not (0 <= p < len(self.nodes)):
                raise ContractError(f"dangling parent id {p}")
        self.nodes.append(node)
        return Var(self, len(self.nodes) - 1)

    def input(self, name: str, value) -> Var:
        v = self._push(Node("input", (), _clean(value)))
        self.inputs[name] = v.idx
        return v

    def const(self, value) -> Var:
        return self._push(Node("const", (), _clean(value)))

    def record(self, op_kind: str, parents, value, local_partials) -> Var:
        """Generic node with caller-supplied local derivatives, one per parent."""
        pidx = tuple(p.idx if isinstance(p, Var) else int(p) for p in parents)
        partials = tuple(_clean(p) for p in local_partials)
        if len(partials) != len(pidx):
            raise ContractError("need exactly one local partial per parent")
        return self._push(Node(op_kind, pidx, _clean(value), ("ew", partials)))


def _clean(v):
    arr = np.asarray(v, dtype=np.float64)
    return float(arr) if arr.ndim == 0 else arr


def _as_var(tape, x):
    if isinstance(x, Var):
        if x.tape is not tape:
            raise ContractError("variables from different tapes cannot mix")
        return x
    return None  # constant operand, folded into the node's partials


def _binary(a, b):
    tape = a.tape if isinstance(a, Var) else b.tape
    av = a.value if isinstance(a, Var) else _clean(a)
    bv = b.value if isinstance(b, Var) else _clean(b)
    return tape, av, bv


def _ew(tape, name, value, parents_and_partials):
    parents = tuple(p.idx for p, _ in parents_and_partials)
    partials = tuple(_clean(g) for _, g in parents_and_partials)
    return tape._push(Node(name, parents, _clean(value), ("ew", partials)))


def add(a, b):
    tape, av, bv = _binary(a, b)
    pp = [(x, 1.0) for x in (a, b) if isinstance(x, Var)]
    return _ew(tape, "add", av + bv, pp)


def sub(a, b):
    tape, av, bv = _binary(a, b)
    pp = []
    if isinstance(a, Var):
        pp.append((a, 1.0))
    if isinstance(b, Var):
        pp.append((b, -1.0))
    return _ew(tape, "sub", av - bv, pp)


def mul(a, b):
    tape, av, bv = _binary(a, b)
    pp = []
    if isinstance(a, Var):
        pp.append((a, bv))
    if isinstance(b, Var):
        pp.append((b, av))
    return _ew(tape, "mul", av * bv, pp)


def div(a, b):
    tape, av, bv = _binary(a, b)
    pp = []
    if isinstance(a, Var):
        pp.append((a, 1.0 / bv))
    if isinstance(b, Var):
        pp.append((b, -av / (bv * bv)))
    return _ew(tape, "div", av / bv, pp)


def powi(x: Var, k):
    v = x.value
    return _ew(x.tape, "pow", v**k, [(x, k * v ** (k - 1))])


def exp(x: Var):
    v = np.exp(x.value)
    return _ew(x.tape, "exp", v, [(x, v)])


def log(x: Var):
    return _ew(x.tape, "log", np.log(x.value), [(x, 1.0 / x.value)])


def sqrt(x: Var):
    v = np.sqrt(x.value)
    return _ew(x.tape, "sqrt", v, [(x, 0.5 / v)])


def tanh(x: Var):
    v = np.tanh(x.value)
    return _ew(x.tape, "tanh", v, [(x, 1.0 - v * v)])


def sigmoid(x: Var):
    v = 1.0 / (1.0 + np.exp(-np.asarray(x.value, dtype=np.float64)))
    v = _clean(v)
    return _ew(x.tape, "sigmoid", v, [(x, v * (1.0 - v))])


def clip(x: Var, lo, hi):
    v = np.clip(x.value, lo, hi)
    inside = ((x.value >= lo) & (x.value <= hi)).astype(np.float64)
    return _ew(x.tape, "clip", v, [(x, inside)])


def vsum(x: Var):
    """Reduce a vector node to its scalar sum."""
    return x.tape._push(Node("sum", (x.idx,), float(np.sum(x.value))))


def vmean(x: Var):
    return vsum(x) / float(np.size(x.value))


def pick(x: Var, i: int):
    """Scalar node holding x[i]."""
    return x.tape._push(Node("pick", (x.idx,), float(x.value[i]), (i, np.size(x.value))))


def concat(tape, parts):
    """Concatenate 1-d vars/constants into one vector node."""
    vals, parents, sizes = [], [], []
    for p in parts:
        v = p.value if isinstance(p, Var) else _clean(p)
        v = np.atleast_1d(np.asarray(v, dtype=np.float64))
        vals.append(v)
        sizes.append(v.shape[0])
        parents.append(p.idx if isinstance(p, Var) else -1)
    return tape._push(
        Node("concat", tuple(p for p in parents if p >= 0), np.concatenate(vals),
             (tuple(parents), tuple(sizes)))
    )


def matvec(w, x):
    """w @ x for a (n, m) weight and an (m,) vector; either side may be a Var."""
    tape = w.tape if isinstance(w, Var) else x.tape
    wv = w.value if isinstance(w, Var) else np.asarray(w, dtype=np.float64)
    xv = x.value if isinstance(x, Var) else np.asarray(x, dtype=np.float64)
    parents = tuple(p.idx for p in (w, x) if isinstance(p, Var))
    which = (isinstance(w, Var), isinstance(x, Var))
    return tape._push(Node("matvec", parents, wv @ xv, (which, wv, xv)))


def neighbor_sum(x: Var, layer):
    """Vector node: out[i] = sum of x[j] over the CSR row i of ``layer``."""
    v = segment_sum(np.ascontiguousarray(x.value), layer.offsets, layer.cols)
    return x.tape._push(Node("nbr_sum", (x.idx,), v, (layer,)))


def _accumulate(adj, idx, contrib, node_value):
    if np.ndim(node_value) == 0:
        contrib = float(np.sum(contrib))
    if idx in adj:
        adj[idx] = adj[idx] + contrib
    else:
        adj[idx] = contrib


def backward(tape: Tape, output, seed=None) -> dict:
    """Adjoint sweep from ``output``; returns gradients per registered input.

    ``seed`` defaults to 1.0 and requires a scalar output; pass an explicit
    array seed to sweep from a vector node.
    """
    out_idx = output.idx if isinstance(output, Var) else int(output)
    if not 0 <= out_idx < len(tape.nodes):
        raise ContractError("output node is not on this tape")
    out_val = tape.nodes[out_idx].value
    if seed is None:
        if np.ndim(out_val) != 0:
            raise ContractError("backward needs a scalar output (or an explicit seed)")
        seed = 1.0
    adj: dict[int, object] = {out_idx: _clean(seed)}

    for idx in range(out_idx, -1, -1):
        if idx not in adj:
            continue
        node = tape.nodes[idx]
        a = adj[idx]
        op = node.op
        if op in ("input", "const"):
            continue
        if node.payload and node.payload[0] == "ew":
            partials = node.payload[1]
            for p, g in zip(node.parents, partials):
                _accumulate(adj, p, a * g, tape.nodes[p].value)
        elif op == "sum":
            p = node.parents[0]
            _accumulate(adj, p, a * np.ones_like(tape.nodes[p].value), tape.nodes[p].value)
        elif op == "pick":
            p = node.parents[0]
            i, size = node.payload
            contrib = np.zeros(size)
            contrib[i] = a
            _accumulate(adj, p, contrib, tape.nodes[p].value)
        elif op == "concat":
            parents_all, sizes = node.payload
            off = 0
            for p, s in zip(parents_all, sizes):
                if p >= 0:
                    piece = a[off : off + s]
                    pv = tape.nodes[p].value
                    _accumulate(adj, p, piece if np.ndim(pv) else float(piece[0]), pv)
                off += s
        elif op == "matvec":
            which, wv, xv = node.payload
            it = iter(node.parents)
            if which[0]:
                _accumulate(adj, next(it), np.outer(a, xv), wv)
            if which[1]:
                _accumulate(adj, next(it), wv.T @ a, xv)
        elif op == "nbr_sum":
            (layer,) = node.payload
            t_off, t_cols = layer.transpose_csr()
            contrib = segment_sum(np.ascontiguousarray(a), t_off, t_cols)
            _accumulate(adj, node.parents[0], contrib, tape.nodes[node.parents[0]].value)
        elif op == "cat_relax":
            _cat_backward(tape, node, a, adj)
        else:
            raise ContractError(f"no backward rule for op {op!r}")

    grads = {}
    for name, idx in tape.inputs.items():
        v = tape.nodes[idx].value
        zero = 0.0 if np.ndim(v) == 0 else np.zeros_like(v)
        grads[name] = adj.get(idx, zero)
    return grads


def _cat_backward(tape, node, a, adj):
    y, tau = node.payload
    contrib = (y * a - y * float(np.dot(y, a))) / tau
    _accumulate(adj, node.parents[0], contrib, tape.nodes[node.parents[0]].value)


def jvp_sweep(tape: Tape, tangents: dict, outputs) -> list:
    """Forward-mode pass over an already-recorded tape.

    ``tangents`` maps registered input names to seed values; returns the
    directional derivative at each requested output node.
    """
    tan: dict[int, object] = {}
    for name, t in tangents.items():
        if name not in tape.inputs:
            raise ContractError(f"unknown input {name!r}")
        idx = tape.inputs[name]
        t = _clean(t)
        if np.shape(t) != np.shape(tape.nodes[idx].value):
            raise ContractError(f"tangent for {name!r} has wrong shape")
        tan[idx] = t

    out_idxs = [o.idx if isinstance(o, Var) else int(o) for o in outputs]
    last = max(out_idxs) if out_idxs else -1

    for idx in range(last + 1):
        node = tape.nodes[idx]
        op = node.op
        if op in ("input", "const"):
            continue
        acc = None
        if node.payload and node.payload[0] == "ew":
            for p, g in zip(node.parents, node.payload[1]):
                if p in tan:
                    term = g * tan[p]
                    acc = term if acc is None else acc + term
        elif op == "sum":
            p = node.parents[0]
            if p in tan:
                acc = float(np.sum(tan[p]))
        elif op == "pick":
            p = node.parents[0]
            if p in tan:
                acc = float(tan[p][node.payload[0]])
        elif op == "concat":
            parents_all, sizes = node.payload
            if any(p in tan for p in parents_all if p >= 0):
                pieces = []
                for p, s in zip(parents_all, sizes):
                    if p >= 0 and p in tan:
                        pieces.append(np.atleast_1d(np.asarray(tan[p], dtype=np.float64)))
                    else:
                        pieces.append(np.zeros(s))
                acc = np.concatenate(pieces)
        elif op == "matvec":
            which, wv, xv = node.payload
            it = iter(node.parents)
            if which[0]:
                p = next(it)
                if p in tan:
                    acc = tan[p] @ xv
            if which[1]:
                p = next(it)
                if p in tan:
                    term = wv @ tan[p]
                    acc = term if acc is None else acc + term
        elif op == "nbr_sum":
            p = node.parents[0]
            if p in tan:
                (layer,) = node.payload
                acc = segment_sum(np.ascontiguousarray(tan[p]), layer.offsets, layer.cols)
        elif op == "cat_relax":
            p = node.parents[0]
            if p in tan:
                y, tau = node.payload
                t = tan[p]
                acc = (y * t - y * float(np.dot(y, t))) / tau
        else:
            raise ContractError(f"no forward rule for op {op!r}")
        if acc is not None:
            # value may broadcast a scalar tangent up to the node's shape
            if np.ndim(node.value) and np.ndim(acc) == 0:
                acc = np.full(np.shape(node.value), acc)
            tan[idx] = acc

    results = []
    for oi in out_idxs:
        v = tape.nodes[oi].value
        zero = 0.0 if np.ndim(v) == 0 else np.zeros_like(v)
        results.append(tan.get(oi, zero))
    return results


def forward_jvp(fn, inputs: dict, tangents: dict):
    """Record ``fn`` at ``inputs`` and return J·v for its outputs.

    ``fn(tape, vars)`` receives a dict of registered input Vars and returns a
    Var or a list of Vars.
    """
    tape = Tape()
    vars_ = {name: tape.input(name, val) for name, val in inputs.items()}
    out = fn(tape, vars_)
    outs = out if isinstance(out, (list, tuple)) else [out]
    res = jvp_sweep(tape, tangents, outs)
    return res if isinstance(out, (list, tuple)) else res[0]


def check_gradient(fn, inputs: dict, eps: float = 1e-4) -> float:
    """Max relative error between reverse-mode and central finite differences.

    ``fn(tape, vars) -> scalar Var`` must be deterministic for fixed inputs
    (use common random numbers inside). Error metric per coordinate:
    |g_ad - g_fd| / max(1, |g_fd|).
    """

    def evaluate(vals):
        tape = Tape()
        vars_ = {name: tape.input(name, v) for name, v in vals.items()}
        return fn(tape, vars_)

    out = evaluate(inputs)
    grads = backward(out.tape, out)

    worst = 0.0
    for name, val in inputs.items():
        arr = np.asarray(val, dtype=np.float64)
        scalar = arr.ndim == 0
        base = arr.ravel().copy()
        g_ad = np.asarray(grads[name], dtype=np.float64).ravel()
        for j in range(base.size):
            bumped = dict(inputs)
            for sign in (+1.0, -1.0):
                shifted = base.copy()
                shifted[j] += sign * eps
                bumped[name] = float(shifted[0]) if scalar else shifted.reshape(arr.shape)
                if sign > 0:
                    f_plus = float(np.asarray(evaluate(bumped).value))
                else:
                    f_minus = float(np.asarray(evaluate(bumped).value))
            g_fd = (f_plus - f_minus) / (2.0 * eps)
            err = abs(g_ad[j] - g_fd) / max(1.0, abs(g_fd))
            worst = max(worst, err)
    return worst
