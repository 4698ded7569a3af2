"""Binary network types and the reference XNOR+Popcount inference engine.

The reference engine works on packed :class:`~tacitsim.bits.BitVector` words
and never touches the crossbar code. Every simulated backend is checked
against it bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .bits import BitMatrix, BitVector, xnor
from .errors import DimensionError

DENSE = "dense"
CONV2D = "conv2d"
BINARY = "binary"
FULL = "full"

Activation = Union[BitVector, np.ndarray]


@dataclass(frozen=True, slots=True)
class DotResult:
    """Bipolar dot product recovered from an XNOR popcount."""

    value: int
    popcount_raw: int
    length: int

    @classmethod
    def from_popcount(cls, popcount_raw: int, length: int) -> "DotResult":
        return cls(2 * popcount_raw - length, popcount_raw, length)


@dataclass(frozen=True, eq=False)
class DotVector:
    """The dot products of one input vector against ``n`` weight vectors.

    Stores raw popcounts; the ``2x - length`` post-processing is applied on
    access, once per output.
    """

    popcounts: np.ndarray
    length: int

    def __post_init__(self):
        arr = np.asarray(self.popcounts, dtype=np.int64).reshape(-1)
        arr.setflags(write=False)
        object.__setattr__(self, "popcounts", arr)

    @property
    def values(self) -> np.ndarray:
        return 2 * self.popcounts - self.length

    def __len__(self) -> int:
        return self.popcounts.size

    def __getitem__(self, j: int) -> DotResult:
        return DotResult.from_popcount(int(self.popcounts[j]), self.length)

    def __iter__(self):
        return (self[j] for j in range(len(self)))

    def __eq__(self, other) -> bool:
        if not isinstance(other, DotVector):
            return NotImplemented
        return self.length == other.length and np.array_equal(self.popcounts, other.popcounts)

    def __repr__(self) -> str:
        return f"DotVector(values={self.values.tolist()}, length={self.length})"


def xnor_popcount_dot(in_bits: BitVector, w_bits: BitVector) -> DotResult:
    """Bipolar dot product of two bit vectors via ``2*popcount(xnor) - len``."""
    if len(in_bits) != len(w_bits):
        raise DimensionError(f"dot length mismatch: {len(in_bits)} vs {len(w_bits)}")
    if len(in_bits) == 0:
        raise DimensionError("dot product of empty vectors")
    return DotResult.from_popcount(xnor(in_bits, w_bits).popcount(), len(in_bits))


def xnor_popcount_matrix(inputs, weights) -> np.ndarray:
    """Popcount of ``xnor(input, weight)`` for every pair, as a ``V x n`` array.

    Batched form of :func:`xnor_popcount_dot` for bulk checks. ``inputs`` is a
    ``V x L`` bit array (or a sequence of BitVectors) and ``weights`` an
    ``L x n`` bit array or a :class:`BitMatrix`.
    """
    a = np.array([v.to_array() for v in inputs], dtype=np.uint8).reshape(len(inputs), -1) \
        if not isinstance(inputs, np.ndarray) else inputs.astype(np.uint8, copy=False)
    w = weights.to_array() if isinstance(weights, BitMatrix) else np.asarray(weights, dtype=np.uint8)
    if a.ndim != 2 or w.ndim != 2 or a.shape[1] != w.shape[0]:
        raise DimensionError(f"dot length mismatch: inputs {a.shape}, weights {w.shape}")
    length = a.shape[1]
    if length == 0:
        raise DimensionError("dot product of empty vectors")
    pa = np.packbits(a, axis=1)
    pw = np.packbits(w.T, axis=1)
    same = ~(pa[:, None, :] ^ pw[None, :, :])
    pad = 8 * pa.shape[1] - length  # zero padding bits xnor to 1
    return np.bitwise_count(same).sum(axis=-1, dtype=np.int64) - pad


def binarize(x, threshold=0) -> BitVector:
    """Bit ``i`` is 1 iff ``x[i] >= threshold``; ties go to 1.

    ``threshold`` may be a scalar or an array broadcastable against ``x``.
    """
    x = np.asarray(x)
    return BitVector.from_array((x >= threshold).astype(np.uint8).reshape(-1))


# ---------------------------------------------------------------------------
# convolution lowering


@dataclass(frozen=True)
class ConvGeometry:
    out_ch: int
    in_ch: int
    kh: int
    kw: int
    stride: int = 1
    pad: int = 0

    @property
    def patch_len(self) -> int:
        return self.in_ch * self.kh * self.kw

    def output_hw(self, h: int, w: int) -> tuple[int, int]:
        oh = (h + 2 * self.pad - self.kh) // self.stride + 1
        ow = (w + 2 * self.pad - self.kw) // self.stride + 1
        if oh < 1 or ow < 1:
            raise DimensionError(
                f"kernel {self.kh}x{self.kw} (pad {self.pad}) does not fit input {h}x{w}"
            )
        return oh, ow


def im2col(x: np.ndarray, geom: ConvGeometry, pad_value=0) -> np.ndarray:
    """Lower a ``(C, H, W)`` array to a ``(C*kh*kw, out_H*out_W)`` patch matrix.

    Patch rows are ordered ``(c, ky, kx)``; patch columns are the output
    positions in row-major order.
    """
    x = np.asarray(x)
    if x.ndim != 3 or x.shape[0] != geom.in_ch:
        raise DimensionError(f"conv input shape {x.shape} does not match in_ch={geom.in_ch}")
    c, h, w = x.shape
    oh, ow = geom.output_hw(h, w)
    if geom.pad:
        x = np.pad(x, ((0, 0), (geom.pad, geom.pad), (geom.pad, geom.pad)),
                   constant_values=pad_value)
    s = geom.stride
    cols = np.empty((c, geom.kh, geom.kw, oh, ow), dtype=x.dtype)
    for ky in range(geom.kh):
        for kx in range(geom.kw):
            cols[:, ky, kx] = x[:, ky:ky + s * oh:s, kx:kx + s * ow:s]
    return cols.reshape(geom.patch_len, oh * ow)


def im2col_lower(layer: "BnnLayer", feature_map: BitVector) -> tuple[BitMatrix, tuple[int, int]]:
    """Lower a binary feature map into patch columns for ``layer``.

    Padding cells hold bit 0, i.e. bipolar -1.
    """
    if layer.kind != CONV2D:
        raise DimensionError(f"im2col_lower needs a conv2d layer, got {layer.kind}")
    if len(feature_map) != int(np.prod(layer.in_shape)):
        raise DimensionError(
            f"feature map has {len(feature_map)} bits, layer expects {layer.in_shape}"
        )
    fmap = feature_map.to_array().reshape(layer.in_shape)
    patches = im2col(fmap, layer.geometry, pad_value=0)
    return BitMatrix.from_array(patches), layer.geometry.output_hw(*layer.in_shape[1:])


# ---------------------------------------------------------------------------
# layers and networks


@dataclass(frozen=True, eq=False)
class BnnLayer:
    """One network layer.

    Binary layers keep their weights as a :class:`BitMatrix` whose columns are
    the weight vectors (for conv layers: one column per output channel,
    lowered in ``(c, ky, kx)`` order). Full-precision layers keep an integer or
    real array: ``(in, out)`` for dense, ``(out, in, kh, kw)`` for conv.
    """

    kind: str
    precision: str
    weights: Union[BitMatrix, np.ndarray]
    in_shape: tuple[int, ...]
    thresholds: np.ndarray | None = None
    geometry: ConvGeometry | None = None

    def __post_init__(self):
        if self.kind not in (DENSE, CONV2D):
            raise ValueError(f"unknown layer kind {self.kind!r}")
        if self.precision not in (BINARY, FULL):
            raise ValueError(f"unknown precision {self.precision!r}")
        object.__setattr__(self, "in_shape", tuple(int(d) for d in self.in_shape))
        if self.precision == BINARY and not isinstance(self.weights, BitMatrix):
            raise TypeError("binary layers carry BitMatrix weights")
        if self.precision == FULL:
            if isinstance(self.weights, BitMatrix):
                raise TypeError("full-precision layers carry array weights")
            w = np.array(self.weights)
            w.setflags(write=False)
            object.__setattr__(self, "weights", w)
        if self.kind == CONV2D:
            g = self.geometry
            if g is None:
                raise DimensionError("conv2d layer needs a geometry")
            if len(self.in_shape) != 3 or self.in_shape[0] != g.in_ch:
                raise DimensionError(f"conv in_shape {self.in_shape} vs in_ch={g.in_ch}")
            g.output_hw(*self.in_shape[1:])
            expect = (g.patch_len, g.out_ch)
            if self.precision == FULL:
                if self.weights.shape != (g.out_ch, g.in_ch, g.kh, g.kw):
                    raise DimensionError(f"conv weights {self.weights.shape} vs geometry {g}")
            elif self.weights.shape != expect:
                raise DimensionError(f"lowered conv weights {self.weights.shape}, expected {expect}")
        else:
            fan_in = int(np.prod(self.in_shape))
            if self.weights.shape[0] != fan_in:
                raise DimensionError(f"dense weights {self.weights.shape} vs input size {fan_in}")
        n_out = self.out_channels
        if self.thresholds is None:
            th = np.zeros(n_out, dtype=np.int64)
        else:
            th = np.asarray(self.thresholds).reshape(-1)
            if th.size != n_out:
                raise DimensionError(f"{th.size} thresholds for {n_out} output neurons")
        th = th.copy()
        th.setflags(write=False)
        object.__setattr__(self, "thresholds", th)

    @property
    def out_channels(self) -> int:
        if self.kind == CONV2D:
            return self.geometry.out_ch
        return self.weights.shape[1]

    @property
    def out_shape(self) -> tuple[int, ...]:
        if self.kind == CONV2D:
            return (self.geometry.out_ch, *self.geometry.output_hw(*self.in_shape[1:]))
        return (self.weights.shape[1],)

    @property
    def in_size(self) -> int:
        return int(np.prod(self.in_shape))

    @property
    def out_size(self) -> int:
        return int(np.prod(self.out_shape))

    @property
    def vector_length(self) -> int:
        """Length ``m`` of each weight vector."""
        if self.kind == CONV2D:
            return self.geometry.patch_len
        return self.in_size

    def neuron_thresholds(self) -> np.ndarray:
        """Thresholds expanded to one entry per output element."""
        if self.kind == CONV2D:
            return np.repeat(self.thresholds, self.out_size // self.out_channels)
        return self.thresholds


@dataclass(frozen=True, eq=False)
class BnnNetwork:
    layers: tuple[BnnLayer, ...]
    input_shape: tuple[int, ...]
    class_count: int
    name: str = "network"

    def __post_init__(self):
        layers = tuple(self.layers)
        object.__setattr__(self, "layers", layers)
        object.__setattr__(self, "input_shape", tuple(int(d) for d in self.input_shape))
        if not layers:
            raise DimensionError("network has no layers")
        for i, layer in enumerate(layers):
            boundary = i == 0 or i == len(layers) - 1
            if boundary and layer.precision != FULL:
                raise DimensionError(f"layer {i}: first and last layers must be full precision")
            if not boundary and layer.precision != BINARY:
                raise DimensionError(f"layer {i}: hidden layers must be binary")
        if layers[0].in_size != int(np.prod(self.input_shape)):
            raise DimensionError(
                f"layer 0 expects {layers[0].in_shape}, network input is {self.input_shape}"
            )
        if layers[0].kind == CONV2D and layers[0].in_shape != self.input_shape:
            raise DimensionError(f"layer 0 expects {layers[0].in_shape}, got {self.input_shape}")
        for i in range(1, len(layers)):
            prev, cur = layers[i - 1], layers[i]
            if cur.kind == CONV2D and cur.in_shape != prev.out_shape:
                raise DimensionError(f"layer {i}: in_shape {cur.in_shape} != {prev.out_shape}")
            if cur.in_size != prev.out_size:
                raise DimensionError(
                    f"layer {i}: expects {cur.in_size} inputs, layer {i - 1} emits {prev.out_size}"
                )
        if layers[-1].out_size != self.class_count:
            raise DimensionError(
                f"last layer emits {layers[-1].out_size} scores for {self.class_count} classes"
            )


# ---------------------------------------------------------------------------
# reference engine


def layer_input_vectors(layer: BnnLayer, x: BitVector) -> list[BitVector]:
    """The vectors a binary layer dots against its weights: one per conv patch."""
    if len(x) != layer.in_size:
        raise DimensionError(f"layer expects {layer.in_size} input bits, got {len(x)}")
    if layer.kind == CONV2D:
        patches, _ = im2col_lower(layer, x)
        return list(patches.columns)
    return [x]


def reference_layer_dots(layer: BnnLayer, x: BitVector) -> list[DotVector]:
    """Pre-threshold dot products of a binary layer, one vector per patch."""
    if layer.precision != BINARY:
        raise TypeError("reference_layer_dots applies to binary layers")
    w = layer.weights
    out = []
    for v in layer_input_vectors(layer, x):
        pops = [xnor_popcount_dot(v, w.column(j)).popcount_raw for j in range(w.cols)]
        out.append(DotVector(np.array(pops, dtype=np.int64), len(v)))
    return out


def binary_layer_output(layer: BnnLayer, dots: Sequence[DotVector]) -> BitVector:
    """Threshold dot vectors into the layer's output bits, in ``(C, H, W)`` order."""
    values = np.stack([d.values for d in dots])  # (positions, out_ch)
    bits = values >= layer.thresholds[None, :]
    return BitVector.from_array(bits.T.astype(np.uint8).reshape(-1))


def full_layer_forward(layer: BnnLayer, x: Activation) -> np.ndarray:
    if isinstance(x, BitVector):
        if len(x) != layer.in_size:
            raise DimensionError(f"layer expects {layer.in_size} inputs, got {len(x)}")
        values = x.bipolar()
    else:
        values = np.asarray(x).reshape(-1)
        if values.size != layer.in_size:
            raise DimensionError(f"layer expects {layer.in_size} inputs, got {values.size}")
    if values.dtype.kind in "iub":
        values = values.astype(np.int64)
    w = layer.weights
    if w.dtype.kind in "iub":
        w = w.astype(np.int64)
    if layer.kind == DENSE:
        return values @ w
    g = layer.geometry
    patches = im2col(values.reshape(layer.in_shape), g, pad_value=0)
    return (w.reshape(g.out_ch, -1) @ patches).reshape(-1)


def reference_layer_forward(layer: BnnLayer, x: Activation) -> Activation:
    """Forward one layer: bits out for binary layers, raw values for full ones."""
    if layer.precision == BINARY:
        if not isinstance(x, BitVector):
            raise DimensionError("binary layers take BitVector activations")
        return binary_layer_output(layer, reference_layer_dots(layer, x))
    return full_layer_forward(layer, x)


def binarize_boundary(layer: BnnLayer, values: np.ndarray) -> BitVector:
    """Binarize a full-precision layer's output with its per-neuron thresholds."""
    return binarize(values, layer.neuron_thresholds())


@dataclass
class InferenceTrace:
    """Activations and binary-layer dots recorded during one forward pass."""

    scores: np.ndarray
    predicted: int
    activations: list = field(default_factory=list)
    dots: dict = field(default_factory=dict)


def check_input(net: BnnNetwork, x: Activation) -> Activation:
    size = int(np.prod(net.input_shape))
    n = len(x) if isinstance(x, BitVector) else np.asarray(x).size
    if n != size:
        raise DimensionError(f"input has {n} elements, network expects {net.input_shape}")
    return x


def reference_trace(net: BnnNetwork, x: Activation) -> InferenceTrace:
    """Run the reference engine and keep every intermediate."""
    act = check_input(net, x)
    acts = [act]
    dots = {}
    last = len(net.layers) - 1
    for i, layer in enumerate(net.layers):
        if layer.precision == BINARY:
            d = reference_layer_dots(layer, act)
            dots[i] = d
            act = binary_layer_output(layer, d)
        else:
            out = full_layer_forward(layer, act)
            act = out if i == last else binarize_boundary(layer, out)
        acts.append(act)
    scores = np.asarray(act).reshape(-1)
    return InferenceTrace(scores, int(np.argmax(scores)), acts, dots)


def reference_infer(net: BnnNetwork, x: Activation) -> tuple[np.ndarray, int]:
    """Class scores and predicted class (ties resolved to the lowest index)."""
    t = reference_trace(net, x)
    return t.scores, t.predicted
