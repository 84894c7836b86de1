"""Prefetch buffer and tensor storage.

The prefetch buffer (PB) holds the input, weight and output regions of
the layer currently being simulated plus a keyed store of partial sums.
Reads and writes are served through a bounded number of ports per cycle;
excess requests are deferred to later cycles and counted as stalls.

Addresses are ``(region, key)`` pairs where region is one of
``"inputs"`` (key ``(n, g, c, x, y)``), ``"weights"`` (``(g, k, c, r, s)``),
``"outputs"`` / ``"psum"`` (``(n, g, k, ox, oy)``).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import LayerConfig, derive_output_dims
from .errors import AddressOutOfRange, ShapeMismatch

DEFAULT_DTYPE = np.int32

INPUT_ORDER = ("n", "g", "c", "x", "y")
WEIGHT_ORDER = ("g", "k", "c", "r", "s")
OUTPUT_ORDER = ("n", "g", "k", "ox", "oy")


@dataclass
class Tensor:
    """Row-major tensor with an explicit dimension order."""

    dims: tuple[int, ...]
    data: np.ndarray
    dim_order: tuple[str, ...]

    @classmethod
    def zeros(cls, dims, dim_order, dtype=DEFAULT_DTYPE) -> "Tensor":
        dims = tuple(int(d) for d in dims)
        return cls(dims, np.zeros(dims, dtype=dtype), tuple(dim_order))

    @classmethod
    def from_array(cls, array: np.ndarray, dim_order) -> "Tensor":
        return cls(tuple(array.shape), np.asarray(array), tuple(dim_order))

    def flat_index(self, index: tuple[int, ...]) -> int:
        if len(index) != len(self.dims):
            raise AddressOutOfRange(
                f"index {index} has rank {len(index)}, tensor has "
                f"rank {len(self.dims)}"
            )
        flat = 0
        for i, d in zip(index, self.dims):
            if not 0 <= i < d:
                raise AddressOutOfRange(f"index {index} out of dims {self.dims}")
            flat = flat * d + i
        return flat

    def at(self, index: tuple[int, ...]):
        self.flat_index(index)  # bounds check
        return self.data[index]


@dataclass
class MemCounters:
    reads: int = 0
    writes: int = 0
    read_stalls: int = 0
    write_stalls: int = 0


def input_dims(layer: LayerConfig) -> tuple[int, ...]:
    return (layer.n, layer.g, layer.c, layer.x, layer.y)


def weight_dims(layer: LayerConfig) -> tuple[int, ...]:
    return (layer.g, layer.k, layer.c, layer.r, layer.s)


def output_dims(layer: LayerConfig) -> tuple[int, ...]:
    ox, oy = derive_output_dims(layer)
    return (layer.n, layer.g, layer.k, ox, oy)


class PrefetchBuffer:
    """On-chip global buffer with bounded read/write ports.

    Capacity is unbounded; only port bandwidth is modeled.  Partial sums
    are stored keyed by output coordinate so folding traffic can be
    attributed in the statistics.
    """

    def __init__(self, read_ports: int, write_ports: int):
        if read_ports < 1 or write_ports < 1:
            raise ShapeMismatch("port counts must be >= 1")
        self.read_ports = read_ports
        self.write_ports = write_ports
        self.inputs: Tensor | None = None
        self.weights: Tensor | None = None
        self.outputs: Tensor | None = None
        self.psums: dict[tuple[int, ...], int] = {}
        self.counters = MemCounters()
        self._layer: LayerConfig | None = None

    def load_layer_data(self, layer: LayerConfig, inputs: Tensor,
                        weights: Tensor) -> None:
        """Populate the PB for one layer; zeroes outputs, resets counters."""
        if inputs.dims != input_dims(layer):
            raise ShapeMismatch(
                f"input dims {inputs.dims} do not match layer "
                f"{input_dims(layer)}"
            )
        if weights.dims != weight_dims(layer):
            raise ShapeMismatch(
                f"weight dims {weights.dims} do not match layer "
                f"{weight_dims(layer)}"
            )
        self.inputs = inputs
        self.weights = weights
        self.outputs = Tensor.zeros(output_dims(layer), OUTPUT_ORDER,
                                    dtype=inputs.data.dtype)
        self.psums = {}
        self.counters = MemCounters()
        self._layer = layer

    # -- port-limited access ---------------------------------------------

    def _region(self, name: str) -> Tensor:
        region = {"inputs": self.inputs, "weights": self.weights,
                  "outputs": self.outputs}.get(name)
        if name not in ("inputs", "weights", "outputs", "psum"):
            raise AddressOutOfRange(f"unknown region {name!r}")
        if name != "psum" and region is None:
            raise AddressOutOfRange(f"region {name!r} not loaded")
        return region

    def peek(self, address):
        """Read without consuming a port (verification/export only)."""
        region, key = address
        if region == "psum":
            self._check_psum_key(key)
            return self.psums.get(key, 0)
        return self._region(region).at(key)

    def _check_psum_key(self, key) -> None:
        if self._layer is None:
            raise AddressOutOfRange("no layer loaded")
        dims = output_dims(self._layer)
        if len(key) != len(dims) or any(
            not 0 <= i < d for i, d in zip(key, dims)
        ):
            raise AddressOutOfRange(f"psum key {key} out of range {dims}")

    def serve_reads(self, requests, cycle: int):
        """Serve up to ``read_ports`` element reads, in request order.

        Returns ``(served, deferred)`` where served is a list of
        ``(address, value)`` pairs.
        """
        served, deferred = [], []
        for req in requests:
            if len(served) < self.read_ports:
                served.append((req, self.peek(req)))
            else:
                deferred.append(req)
        self.counters.reads += len(served)
        self.counters.read_stalls += len(deferred)
        return served, deferred

    def serve_writes(self, requests, cycle: int):
        """Serve up to ``write_ports`` element writes, in request order.

        Two same-cycle writes to one address serialize: the second is
        deferred so accumulation order stays deterministic.
        """
        served, deferred = [], []
        touched = set()
        for address, value in requests:
            region, key = address
            if len(served) >= self.write_ports or address in touched:
                deferred.append((address, value))
                continue
            if region == "psum":
                self._check_psum_key(key)
                self.psums[key] = value
            elif region == "outputs":
                tensor = self._region(region)
                tensor.flat_index(key)
                tensor.data[key] = value
            else:
                raise AddressOutOfRange(
                    f"region {region!r} is not writable during simulation"
                )
            touched.add(address)
            served.append((address, value))
        self.counters.writes += len(served)
        self.counters.write_stalls += len(deferred)
        return served, deferred

    def output_array(self) -> np.ndarray:
        if self.outputs is None:
            raise AddressOutOfRange("no layer loaded")
        return self.outputs.data
