"""Layered sparse contact networks in compressed-row form.

Rows are stored canonically (column indices sorted within each row), which
makes every reduction independent of the edge order the layer was built from:
feeding any permutation of the same edge list yields bit-identical results.
"""

from dataclasses import dataclass, field

import numpy as np

from ._kernels import segment_max, segment_sum
from .errors import ConfigError, ValidationError


@dataclass
class GraphLayer:
    """One CSR adjacency layer: offsets has length N+1, cols length E."""

    offsets: np.ndarray
    cols: np.ndarray
    weights: np.ndarray | None = None
    _transpose: tuple[np.ndarray, np.ndarray] | None = field(
        default=None, repr=False, compare=False
    )

    @property
    def num_nodes(self) -> int:
        return self.offsets.shape[0] - 1

    @property
    def num_edges(self) -> int:
        return self.cols.shape[0]

    @property
    def degrees(self) -> np.ndarray:
        return np.diff(self.offsets)

    def neighbors(self, i: int) -> np.ndarray:
        return self.cols[self.offsets[i] : self.offsets[i + 1]]

    def transpose_csr(self):
        """CSR of the reversed edges, built once and cached."""
        if self._transpose is None:
            n = self.num_nodes
            rows = np.repeat(np.arange(n, dtype=self.cols.dtype), self.degrees)
            order = np.lexsort((rows, self.cols))
            t_offsets = np.zeros(n + 1, dtype=np.int64)
            np.cumsum(np.bincount(self.cols, minlength=n), out=t_offsets[1:])
            self._transpose = (t_offsets, rows[order])
        return self._transpose


def _canonicalize(offsets, cols):
    rows = np.repeat(np.arange(offsets.shape[0] - 1, dtype=np.int64), np.diff(offsets))
    same_row = rows[1:] == rows[:-1]
    if not np.any(cols[1:][same_row] < cols[:-1][same_row]):
        return cols
    return cols[np.lexsort((cols, rows))]


def make_layer(num_agents, offsets, cols, weights=None) -> GraphLayer:
    offsets = np.ascontiguousarray(offsets, dtype=np.int64)
    cols = np.ascontiguousarray(cols, dtype=np.int64)
    if offsets.shape[0] != num_agents + 1:
        raise ValidationError(
            f"row offsets must have length N+1={num_agents + 1}, got {offsets.shape[0]}"
        )
    if offsets[0] != 0 or offsets[-1] != cols.shape[0]:
        raise ValidationError("row offsets must start at 0 and end at the edge count")
    if np.any(np.diff(offsets) < 0):
        raise ValidationError("row offsets must be monotone non-decreasing")
    if cols.shape[0] and (cols.min() < 0 or cols.max() >= num_agents):
        raise ValidationError("column indices must lie in [0, N)")
    # sorting edge blocks makes reductions invariant to input edge order
    if cols.shape[0] > 1:
        cols = _canonicalize(offsets, cols)
    return GraphLayer(offsets=offsets, cols=cols, weights=weights)


def layer_from_edges(num_agents, src, dst) -> GraphLayer:
    """Build a canonical CSR layer from directed edge endpoint arrays."""
    src = np.asarray(src, dtype=np.int64)
    dst = np.asarray(dst, dtype=np.int64)
    if src.shape != dst.shape:
        raise ValidationError("edge endpoint arrays must have equal length")
    order = np.lexsort((dst, src))
    offsets = np.zeros(num_agents + 1, dtype=np.int64)
    np.cumsum(np.bincount(src, minlength=num_agents), out=offsets[1:])
    return make_layer(num_agents, offsets, dst[order])


class ContactGraph:
    """Named collection of adjacency layers over one agent population."""

    def __init__(self, num_agents: int):
        self.num_agents = num_agents
        self.layers: dict[str, GraphLayer] = {}

    def add_layer(self, name, offsets, cols, weights=None) -> GraphLayer:
        layer = make_layer(self.num_agents, offsets, cols, weights)
        self.layers[name] = layer
        return layer

    def add_layer_from_edges(self, name, src, dst) -> GraphLayer:
        layer = layer_from_edges(self.num_agents, src, dst)
        self.layers[name] = layer
        return layer

    def layer(self, name: str) -> GraphLayer:
        try:
            return self.layers[name]
        except KeyError:
            raise ConfigError(f"unknown network layer {name!r}") from None

    def layer_names(self):
        return list(self.layers)


def aggregate_messages(graph: ContactGraph, layer: str, values, reduction="sum"):
    """Per-agent reduction of neighbor values: out[i] = op over {values[j], j in N(i)}.

    Empty neighborhoods yield 0 for every reduction.
    """
    lay = graph.layer(layer)
    values = np.ascontiguousarray(values, dtype=np.float64)
    if values.shape[0] != graph.num_agents:
        raise ValidationError(
            f"values must have length N={graph.num_agents}, got {values.shape[0]}"
        )
    if reduction == "sum":
        return segment_sum(values, lay.offsets, lay.cols)
    if reduction == "mean":
        sums = segment_sum(values, lay.offsets, lay.cols)
        degs = lay.degrees
        out = np.zeros_like(sums)
        np.divide(sums, degs, out=out, where=degs > 0)
        return out
    if reduction == "max":
        return segment_max(values, lay.offsets, lay.cols)
    raise ConfigError(f"unknown reduction {reduction!r}")
