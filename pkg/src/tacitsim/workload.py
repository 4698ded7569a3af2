"""Seeded synthetic networks and inputs for exercising the simulator."""

from __future__ import annotations

import numpy as np

from .bits import BitMatrix, BitVector
from .bnn import BINARY, CONV2D, DENSE, FULL, BnnLayer, BnnNetwork, ConvGeometry


def random_bitmatrix(rng: np.random.Generator, m: int, n: int) -> BitMatrix:
    return BitMatrix.from_array(rng.integers(0, 2, size=(m, n), dtype=np.uint8))


def random_bitvector(rng: np.random.Generator, length: int) -> BitVector:
    return BitVector.from_array(rng.integers(0, 2, size=length, dtype=np.uint8))


def _full_dense(rng, fan_in, fan_out, thresholds=True):
    w = rng.integers(-3, 4, size=(fan_in, fan_out))
    th = rng.integers(-2, 3, size=fan_out) if thresholds else None
    return BnnLayer(DENSE, FULL, w, (fan_in,), th)


def _binary_dense(rng, fan_in, fan_out):
    return BnnLayer(DENSE, BINARY, random_bitmatrix(rng, fan_in, fan_out), (fan_in,),
                    rng.integers(-2, 3, size=fan_out))


def synthetic_mlp(seed: int, input_size: int = 32, hidden=(64, 32), classes: int = 10,
                  name: str = "mlp") -> BnnNetwork:
    """Full input layer, binary hidden layers, full output layer."""
    rng = np.random.default_rng(seed)
    widths = list(hidden)
    layers = [_full_dense(rng, input_size, widths[0])]
    for a, b in zip(widths, widths[1:]):
        layers.append(_binary_dense(rng, a, b))
    layers.append(_full_dense(rng, widths[-1], classes, thresholds=False))
    return BnnNetwork(tuple(layers), (input_size,), classes, name)


def synthetic_cnn(seed: int, input_shape=(1, 8, 8), channels=(8, 8), hidden: int = 32,
                  classes: int = 10, name: str = "cnn") -> BnnNetwork:
    """Full 3x3 conv, binary 3x3 convs, a binary dense layer and a full classifier."""
    rng = np.random.default_rng(seed)
    c, h, w = input_shape
    g0 = ConvGeometry(channels[0], c, 3, 3, 1, 1)
    layers = [BnnLayer(CONV2D, FULL, rng.integers(-3, 4, size=(g0.out_ch, c, 3, 3)),
                       input_shape, rng.integers(-2, 3, size=g0.out_ch), g0)]
    shape = layers[0].out_shape
    for out_ch in channels[1:]:
        g = ConvGeometry(out_ch, shape[0], 3, 3, 1, 1)
        layers.append(BnnLayer(CONV2D, BINARY, random_bitmatrix(rng, g.patch_len, out_ch), shape,
                               rng.integers(-2, 3, size=out_ch), g))
        shape = layers[-1].out_shape
    flat = int(np.prod(shape))
    layers.append(_binary_dense(rng, flat, hidden))
    layers.append(_full_dense(rng, hidden, classes, thresholds=False))
    return BnnNetwork(tuple(layers), input_shape, classes, name)


def single_layer_net(seed: int, m: int = 16, n: int = 32, classes: int = 4,
                     name: str = "single") -> BnnNetwork:
    """One binary hidden layer of ``n`` weight vectors of length ``m``."""
    rng = np.random.default_rng(seed)
    layers = (_full_dense(rng, m, m), _binary_dense(rng, m, n),
              _full_dense(rng, n, classes, thresholds=False))
    return BnnNetwork(layers, (m,), classes, name)


def synthetic_inputs(seed: int, net: BnnNetwork, count: int, low: int = -8, high: int = 8) -> list:
    """Integer input samples for a network whose first layer is full precision."""
    rng = np.random.default_rng(seed + 1)
    size = int(np.prod(net.input_shape))
    return [rng.integers(low, high + 1, size=size) for _ in range(count)]
