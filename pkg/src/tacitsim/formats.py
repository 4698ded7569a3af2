"""On-disk formats: network manifest (JSON), weights file and inputs file.

Weights file
    8-byte magic ``TSBNNWGT``, little-endian ``uint32`` version, then raw
    blobs addressed by absolute ``offset``/``length`` (bytes) from the
    manifest. Binary weight matrices are stored column-major (one weight
    vector after another) as a single bit stream packed LSB-first. Full
    precision weights and all thresholds are little-endian ``int32``; dense
    weights column-major, conv weights in ``(out, in, kh, kw)`` order.

Inputs file
    8-byte magic ``TSBNNINP``, then little-endian ``uint32`` version, format
    flag (0 = packed bits, 1 = int32), count and vector length. Bit vectors
    are packed LSB-first, each padded to a whole byte.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .bits import BitMatrix, BitVector
from .bnn import BINARY, CONV2D, DENSE, FULL, BnnLayer, BnnNetwork, ConvGeometry
from .errors import DimensionError, FormatError

WEIGHTS_MAGIC = b"TSBNNWGT"
INPUTS_MAGIC = b"TSBNNINP"
FORMAT_VERSION = 1
INPUT_BITS = 0
INPUT_INT32 = 1

_WHEADER = struct.Struct("<8sI")
_IHEADER = struct.Struct("<8sIIII")


def _pack_bitmatrix(w: BitMatrix) -> bytes:
    word = 0
    m = w.rows
    for j, col in enumerate(w.columns):
        word |= col.word << (j * m)
    return word.to_bytes((m * w.cols + 7) // 8, "little")


def _unpack_bitmatrix(data: bytes, m: int, n: int) -> BitMatrix:
    word = int.from_bytes(data, "little")
    mask = (1 << m) - 1
    return BitMatrix([BitVector((word >> (j * m)) & mask, m) for j in range(n)], m)


def _layer_dims(layer: BnnLayer) -> dict:
    if layer.kind == CONV2D:
        g = layer.geometry
        return {"out_ch": g.out_ch, "in_ch": g.in_ch, "kh": g.kh, "kw": g.kw,
                "stride": g.stride, "pad": g.pad,
                "in_h": layer.in_shape[1], "in_w": layer.in_shape[2]}
    return {"in": layer.in_size, "out": layer.out_channels}


def save_network(net: BnnNetwork, manifest_path, weights_path) -> None:
    blob = bytearray(_WHEADER.pack(WEIGHTS_MAGIC, FORMAT_VERSION))
    entries = []

    def put(data: bytes) -> dict:
        ref = {"offset": len(blob), "length": len(data)}
        blob.extend(data)
        return ref

    for layer in net.layers:
        if layer.precision == BINARY:
            wbytes = _pack_bitmatrix(layer.weights)
        else:
            w = np.asarray(layer.weights)
            if w.dtype.kind not in "iub" or np.any(w != w.astype("<i4")):
                raise FormatError("full-precision weights must be 32-bit integers to be saved")
            order = "F" if layer.kind == DENSE else "C"
            wbytes = w.astype("<i4").tobytes(order=order)
        entries.append({
            "kind": layer.kind,
            "precision": layer.precision,
            "dims": _layer_dims(layer),
            "weight_ref": put(wbytes),
            "threshold_ref": put(np.asarray(layer.thresholds).astype("<i4").tobytes()),
        })
    manifest = {
        "format_version": FORMAT_VERSION,
        "name": net.name,
        "input_shape": list(net.input_shape),
        "class_count": net.class_count,
        "layers": entries,
    }
    Path(manifest_path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    Path(weights_path).write_bytes(bytes(blob))


def _slice(blob: bytes, ref, what: str, i: int) -> bytes:
    try:
        off, length = int(ref["offset"]), int(ref["length"])
    except (TypeError, KeyError, ValueError):
        raise FormatError(f"layer {i}: malformed {what} {ref!r}") from None
    if off < _WHEADER.size or length < 0 or off + length > len(blob):
        raise FormatError(
            f"layer {i}: {what} [{off}, {off + length}) dangles outside the "
            f"{len(blob)}-byte weights file"
        )
    return blob[off:off + length]


def _expect_len(data: bytes, n: int, what: str, i: int) -> None:
    if len(data) != n:
        raise FormatError(f"layer {i}: {what} has {len(data)} bytes, dims need {n}")


def _build_layer(i: int, spec: dict, blob: bytes, in_shape: tuple) -> BnnLayer:
    try:
        kind, precision, dims = spec["kind"], spec["precision"], spec["dims"]
    except (KeyError, TypeError):
        raise FormatError(f"layer {i}: needs kind, precision and dims") from None
    if kind not in (DENSE, CONV2D) or precision not in (BINARY, FULL):
        raise FormatError(f"layer {i}: unsupported kind/precision {kind!r}/{precision!r}")
    try:
        if kind == CONV2D:
            g = ConvGeometry(int(dims["out_ch"]), int(dims["in_ch"]), int(dims["kh"]),
                             int(dims["kw"]), int(dims.get("stride", 1)), int(dims.get("pad", 0)))
            shape = (g.in_ch, int(dims["in_h"]), int(dims["in_w"]))
            n_out, fan_in = g.out_ch, g.patch_len
        else:
            g = None
            fan_in, n_out = int(dims["in"]), int(dims["out"])
            shape = (fan_in,)
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"layer {i}: bad dims ({exc})") from None
    if kind == DENSE and in_shape is not None and int(np.prod(in_shape)) != fan_in:
        raise FormatError(f"layer {i}: expects {fan_in} inputs, previous layer emits {int(np.prod(in_shape))}")
    if kind == CONV2D and in_shape is not None and tuple(in_shape) != shape:
        raise FormatError(f"layer {i}: conv input {shape} does not match previous output {tuple(in_shape)}")
    wdata = _slice(blob, spec.get("weight_ref"), "weight_ref", i)
    tdata = _slice(blob, spec.get("threshold_ref"), "threshold_ref", i)
    _expect_len(tdata, 4 * n_out, "threshold_ref", i)
    thresholds = np.frombuffer(tdata, dtype="<i4").astype(np.int64)
    if precision == BINARY:
        _expect_len(wdata, (fan_in * n_out + 7) // 8, "weight_ref", i)
        weights = _unpack_bitmatrix(wdata, fan_in, n_out)
    else:
        _expect_len(wdata, 4 * fan_in * n_out, "weight_ref", i)
        flat = np.frombuffer(wdata, dtype="<i4").astype(np.int64)
        if kind == DENSE:
            weights = flat.reshape((fan_in, n_out), order="F")
        else:
            weights = flat.reshape(g.out_ch, g.in_ch, g.kh, g.kw)
    try:
        return BnnLayer(kind, precision, weights, shape, thresholds, g)
    except (DimensionError, TypeError, ValueError) as exc:
        raise FormatError(f"layer {i}: {exc}") from None


def load_network(manifest_path, weights_path) -> BnnNetwork:
    """Read a manifest and its weights file into a validated :class:`BnnNetwork`."""
    try:
        manifest = json.loads(Path(manifest_path).read_text())
        blob = Path(weights_path).read_bytes()
    except OSError as exc:
        raise FormatError(f"cannot read network files: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise FormatError(f"manifest {manifest_path} is not valid JSON: {exc}") from exc
    if not isinstance(manifest, dict):
        raise FormatError("manifest must be a JSON object")
    if manifest.get("format_version") != FORMAT_VERSION:
        raise FormatError(f"unsupported manifest format_version {manifest.get('format_version')!r}")
    if len(blob) < _WHEADER.size:
        raise FormatError("weights file is shorter than its header")
    magic, version = _WHEADER.unpack_from(blob)
    if magic != WEIGHTS_MAGIC or version != FORMAT_VERSION:
        raise FormatError(f"weights file has bad magic/version {magic!r}/{version}")
    try:
        input_shape = tuple(int(d) for d in manifest["input_shape"])
        class_count = int(manifest["class_count"])
        specs = list(manifest["layers"])
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"manifest is missing or has a bad field: {exc}") from None
    if not specs:
        raise FormatError("manifest lists no layers")
    for i, spec in enumerate(specs):
        boundary = i in (0, len(specs) - 1)
        prec = spec.get("precision") if isinstance(spec, dict) else None
        if boundary and prec != FULL:
            raise FormatError(f"layer {i}: first and last layers must be full precision, got {prec!r}")
        if not boundary and prec != BINARY:
            raise FormatError(f"layer {i}: hidden layers must be binary, got {prec!r}")
    layers = []
    prev = input_shape
    for i, spec in enumerate(specs):
        layer = _build_layer(i, spec, blob, prev)
        layers.append(layer)
        prev = layer.out_shape
    try:
        return BnnNetwork(tuple(layers), input_shape, class_count,
                          str(manifest.get("name", Path(manifest_path).stem)))
    except DimensionError as exc:
        raise FormatError(str(exc)) from None


def save_inputs(inputs, path) -> None:
    """Write a list of BitVectors (bits format) or integer arrays (int32 format)."""
    inputs = list(inputs)
    if inputs and all(isinstance(x, BitVector) for x in inputs):
        flag, length = INPUT_BITS, len(inputs[0])
        body = b"".join(x.to_bytes() for x in inputs)
        if any(len(x) != length for x in inputs):
            raise FormatError("input vectors differ in length")
    else:
        arrs = [np.asarray(x).reshape(-1) for x in inputs]
        length = arrs[0].size if arrs else 0
        if any(a.size != length for a in arrs):
            raise FormatError("input vectors differ in length")
        flag = INPUT_INT32
        body = b"".join(a.astype("<i4").tobytes() for a in arrs)
    header = _IHEADER.pack(INPUTS_MAGIC, FORMAT_VERSION, flag, len(inputs), length)
    Path(path).write_bytes(header + body)


def load_inputs(path) -> list:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise FormatError(f"cannot read inputs file: {exc}") from exc
    if len(data) < _IHEADER.size:
        raise FormatError("inputs file is shorter than its header")
    magic, version, flag, count, length = _IHEADER.unpack_from(data)
    if magic != INPUTS_MAGIC or version != FORMAT_VERSION:
        raise FormatError(f"inputs file has bad magic/version {magic!r}/{version}")
    body = data[_IHEADER.size:]
    if flag == INPUT_BITS:
        stride = (length + 7) // 8
        if len(body) != stride * count:
            raise FormatError(f"inputs file holds {len(body)} bytes, header implies {stride * count}")
        return [BitVector.from_bytes(body[i * stride:(i + 1) * stride], length) for i in range(count)]
    if flag == INPUT_INT32:
        if len(body) != 4 * length * count:
            raise FormatError(f"inputs file holds {len(body)} bytes, header implies {4 * length * count}")
        arr = np.frombuffer(body, dtype="<i4").astype(np.int64).reshape(count, length)
        return [row.copy() for row in arr]
    raise FormatError(f"unknown inputs format flag {flag}")
