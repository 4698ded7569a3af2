import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import bipolar_dot, bipolar_matvec, sliding_window_conv
from tacitsim.bits import BitMatrix, BitVector, complement, popcount, xnor
from tacitsim.bnn import (BINARY, CONV2D, DENSE, FULL, BnnLayer, BnnNetwork, ConvGeometry,
                          DotResult, binarize, im2col, im2col_lower, reference_infer,
                          reference_layer_dots, reference_layer_forward, xnor_popcount_dot,
                          xnor_popcount_matrix)
from tacitsim.errors import DimensionError

bit_lists = st.lists(st.integers(0, 1), min_size=1, max_size=300)


def bv(bits):
    return BitVector.from_bits(bits)


# -- BitVector ---------------------------------------------------------------


@given(bit_lists)
def test_popcount_plus_complement_is_length(bits):
    v = bv(bits)
    assert popcount(v) + popcount(complement(v)) == len(v)
    assert complement(complement(v)) == v


@given(bit_lists)
def test_bitvector_round_trips(bits):
    v = bv(bits)
    assert v.to_array().tolist() == bits
    assert list(v) == bits
    assert BitVector.from_bytes(v.to_bytes(), len(v)) == v
    assert v[0] == bits[0] and v[-1] == bits[-1]


def test_slicing_and_concat():
    v = bv([1, 0, 1, 1, 0])
    assert v[1:4] == bv([0, 1, 1])
    assert v[::2] == bv([1, 1, 0])
    assert v[:2].concat(v[2:]) == v


def test_bitvector_rejects_non_bits():
    with pytest.raises(ValueError):
        BitVector.from_bits([0, 2])


def test_bitmatrix_columns():
    arr = np.array([[1, 0, 1], [0, 0, 1]], dtype=np.uint8)
    W = BitMatrix.from_array(arr)
    assert W.shape == (2, 3)
    assert all(len(W.column(j)) == 2 for j in range(3))
    assert W.column(2) == bv([1, 1])
    np.testing.assert_array_equal(W.to_array(), arr)
    with pytest.raises(DimensionError):
        BitMatrix([bv([1, 0]), bv([1])])


# -- xnor ----------------------------------------------------------------------


def test_xnor_examples():
    assert xnor(bv([1, 0]), bv([1, 1])) == bv([1, 0])
    v = bv([1, 0, 0, 1, 1])
    assert xnor(v, v) == BitVector.ones(5)
    assert xnor(v, complement(v)) == BitVector.zeros(5)


def test_xnor_length_mismatch():
    with pytest.raises(DimensionError):
        xnor(bv([1]), bv([1, 0]))


# -- xnor_popcount_dot ---------------------------------------------------------


def test_dot_examples():
    r = xnor_popcount_dot(bv([1, 0]), bv([1, 1]))
    assert (r.popcount_raw, r.value) == (1, 0)
    v = bv([0, 1, 1, 0, 1, 1, 1])
    assert xnor_popcount_dot(v, v).value == 7


def test_dot_errors():
    with pytest.raises(DimensionError):
        xnor_popcount_dot(bv([1, 0]), bv([1]))
    with pytest.raises(DimensionError):
        xnor_popcount_dot(BitVector.zeros(0), BitVector.zeros(0))


def test_dot_random_pairs_match_decoded_dot():
    rng = np.random.default_rng(1)
    for _ in range(1000):
        L = int(rng.integers(1, 257))
        a, b = rng.integers(0, 2, L), rng.integers(0, 2, L)
        r = xnor_popcount_dot(bv(a), bv(b))
        assert r.value == bipolar_dot(a, b)
        assert r.popcount_raw == sum(int(x == y) for x, y in zip(a, b))


@pytest.mark.parametrize("L", range(1, 9))
def test_dot_exhaustive_small(L):
    for a in itertools.product((0, 1), repeat=L):
        for b in itertools.product((0, 1), repeat=L):
            assert xnor_popcount_dot(bv(a), bv(b)).value == bipolar_dot(a, b)


@given(st.data())
def test_dot_invariants(data):
    a = data.draw(bit_lists)
    b = data.draw(st.lists(st.integers(0, 1), min_size=len(a), max_size=len(a)))
    r = xnor_popcount_dot(bv(a), bv(b))
    assert r.value == 2 * r.popcount_raw - len(a)
    assert -len(a) <= r.value <= len(a)
    assert (r.value - len(a)) % 2 == 0
    assert xnor_popcount_dot(bv(a), complement(bv(b))).value == -r.value


def test_dotresult_from_popcount():
    assert DotResult.from_popcount(3, 4) == DotResult(2, 3, 4)


# -- binarize ------------------------------------------------------------------


def test_binarize_examples():
    assert binarize([0.5, -0.5], 0) == bv([1, 0])
    assert binarize([0, 0], 0) == bv([1, 1])


@given(st.lists(st.floats(-5, 5, allow_nan=False), min_size=1, max_size=50))
def test_binarize_matches_sign(xs):
    sign = [1 if x >= 0 else -1 for x in xs]
    assert binarize(xs, 0).bipolar().tolist() == sign


def test_binarize_per_neuron_thresholds():
    assert binarize([3, 3, 3], [2, 3, 4]) == bv([1, 1, 0])


# -- im2col ----------------------------------------------------------------------


def _conv_layer(geom, in_shape, rng):
    W = BitMatrix.from_array(rng.integers(0, 2, (geom.patch_len, geom.out_ch)))
    return BnnLayer(CONV2D, BINARY, W, in_shape, None, geom)


def test_im2col_1x1_reorders_pixels():
    rng = np.random.default_rng(0)
    g = ConvGeometry(2, 3, 1, 1)
    layer = _conv_layer(g, (3, 2, 2), rng)
    fmap = rng.integers(0, 2, (3, 2, 2))
    patches, (oh, ow) = im2col_lower(layer, BitVector.from_array(fmap))
    assert (oh, ow) == (2, 2)
    np.testing.assert_array_equal(patches.to_array(), fmap.reshape(3, 4))


def test_im2col_single_window():
    g = ConvGeometry(1, 1, 3, 3)
    layer = _conv_layer(g, (1, 3, 3), np.random.default_rng(0))
    fmap = np.arange(9) % 2
    patches, hw = im2col_lower(layer, BitVector.from_array(fmap))
    assert patches.shape == (9, 1) and hw == (1, 1)
    assert patches.column(0) == BitVector.from_array(fmap)


def test_im2col_rejects_dense_layer():
    layer = BnnLayer(DENSE, BINARY, BitMatrix.from_array(np.ones((4, 2))), (4,))
    with pytest.raises(DimensionError):
        im2col_lower(layer, BitVector.zeros(4))


def test_conv_geometry_mismatch():
    g = ConvGeometry(2, 1, 3, 3)
    with pytest.raises(DimensionError):
        BnnLayer(CONV2D, BINARY, BitMatrix.from_array(np.ones((8, 2))), (1, 4, 4), None, g)
    with pytest.raises(DimensionError):
        BnnLayer(CONV2D, BINARY, BitMatrix.from_array(np.ones((9, 2))), (2, 4, 4), None, g)
    with pytest.raises(DimensionError):
        g.output_hw(2, 2)


conv_cases = st.tuples(
    st.integers(1, 3), st.integers(1, 3), st.integers(1, 3), st.integers(1, 3),
    st.integers(1, 2), st.integers(0, 1), st.integers(3, 8), st.integers(3, 8),
    st.integers(0, 2 ** 32 - 1),
)


@settings(max_examples=60, deadline=None)
@given(conv_cases)
def test_im2col_dot_matches_direct_convolution(case):
    out_ch, in_ch, kh, kw, stride, pad, H, W, seed = case
    rng = np.random.default_rng(seed)
    g = ConvGeometry(out_ch, in_ch, kh, kw, stride, pad)
    layer = _conv_layer(g, (in_ch, H, W), rng)
    fmap = rng.integers(0, 2, (in_ch, H, W))
    dots = reference_layer_dots(layer, BitVector.from_array(fmap))
    # pad bit 0 decodes to -1
    kernel = layer.weights.to_array().T.reshape(out_ch, in_ch, kh, kw).astype(int) * 2 - 1
    expect = sliding_window_conv(fmap * 2 - 1, kernel, stride, pad, pad_value=-1)
    got = np.stack([d.values for d in dots]).T.reshape(expect.shape)
    np.testing.assert_array_equal(got, expect)


def test_integer_im2col_matches_direct_convolution():
    rng = np.random.default_rng(3)
    g = ConvGeometry(3, 2, 3, 2, 2, 1)
    x = rng.integers(-5, 6, (2, 7, 6))
    w = rng.integers(-3, 4, (3, 2, 3, 2))
    got = (w.reshape(3, -1) @ im2col(x, g)).reshape(3, *g.output_hw(7, 6))
    np.testing.assert_array_equal(got, sliding_window_conv(x, w, 2, 1))


# -- reference engine --------------------------------------------------------------


def test_dense_forward_identity_and_complement():
    x = bv([1, 0, 1, 1])
    same = BnnLayer(DENSE, BINARY, BitMatrix([x]), (4,))
    assert reference_layer_forward(same, x) == bv([1])
    opp = BnnLayer(DENSE, BINARY, BitMatrix([complement(x)]), (4,))
    assert reference_layer_forward(opp, x) == bv([0])


def test_dense_forward_random_matches_brute_force():
    rng = np.random.default_rng(5)
    for _ in range(50):
        m, n = rng.integers(1, 40, 2)
        w = rng.integers(0, 2, (m, n))
        th = rng.integers(-4, 5, n)
        x = rng.integers(0, 2, m)
        layer = BnnLayer(DENSE, BINARY, BitMatrix.from_array(w), (m,), th)
        expect = [int(d >= t) for d, t in zip(bipolar_matvec(x, w), th)]
        assert reference_layer_forward(layer, bv(x)).to_array().tolist() == expect


def test_full_layer_shape_mismatch():
    layer = BnnLayer(DENSE, FULL, np.eye(3, dtype=int), (3,))
    with pytest.raises(DimensionError):
        reference_layer_forward(layer, np.array([1, 2]))


def test_identity_network_scores_equal_input():
    net = BnnNetwork((BnnLayer(DENSE, FULL, np.eye(4, dtype=int), (4,)),), (4,), 4)
    scores, cls = reference_infer(net, np.array([3, -1, 7, 2]))
    assert scores.tolist() == [3, -1, 7, 2] and cls == 2


def test_argmax_ties_go_to_lowest_index():
    net = BnnNetwork((BnnLayer(DENSE, FULL, np.eye(3, dtype=int), (3,)),), (3,), 3)
    assert reference_infer(net, np.array([5, 5, 5]))[1] == 0


def test_two_layer_hand_computed():
    # x@W0 = [-3,-5,2,7]; thresholds [0,-5,3,0] -> bits [0,1,0,1] -> [-1,1,-1,1]
    # scores = [-1,1,-1,1] @ W1 = [0, -1]
    W0 = np.array([[1, 0, -1, 2], [2, 1, 0, -1], [0, -1, 1, 1]])
    W1 = np.array([[1, -1], [2, 0], [0, 3], [-1, 1]])
    net = BnnNetwork((BnnLayer(DENSE, FULL, W0, (3,), [0, -5, 3, 0]),
                      BnnLayer(DENSE, FULL, W1, (4,))), (3,), 2)
    scores, cls = reference_infer(net, np.array([1, -2, 3]))
    assert scores.tolist() == [0, -1] and cls == 0


def test_three_layer_hand_computed():
    # hidden bits [0,1,0,1]; col0 [1,1,0,0] -> dot 0 -> 1; col1 [0,1,0,1] -> dot 4 -> 1
    # scores = [1,1] @ [[1,2],[-3,1]] = [-2, 3]
    W0 = np.array([[1, 0, -1, 2], [2, 1, 0, -1], [0, -1, 1, 1]])
    Wb = BitMatrix([bv([1, 1, 0, 0]), bv([0, 1, 0, 1])])
    W2 = np.array([[1, 2], [-3, 1]])
    net = BnnNetwork((BnnLayer(DENSE, FULL, W0, (3,), [0, -5, 3, 0]),
                      BnnLayer(DENSE, BINARY, Wb, (4,)),
                      BnnLayer(DENSE, FULL, W2, (2,))), (3,), 2)
    scores, cls = reference_infer(net, np.array([1, -2, 3]))
    assert scores.tolist() == [-2, 3] and cls == 1


def test_network_invariants():
    full = BnnLayer(DENSE, FULL, np.ones((4, 4), dtype=int), (4,))
    binary = BnnLayer(DENSE, BINARY, BitMatrix.from_array(np.ones((4, 4))), (4,))
    with pytest.raises(DimensionError):
        BnnNetwork((binary, full), (4,), 4)
    with pytest.raises(DimensionError):
        BnnNetwork((full, full, full), (4,), 4)
    with pytest.raises(DimensionError):
        BnnNetwork((full, binary, full), (5,), 4)
    with pytest.raises(DimensionError):
        BnnNetwork((full, binary, full), (4,), 3)
    BnnNetwork((full, binary, full), (4,), 4)


def test_infer_input_shape_mismatch():
    net = BnnNetwork((BnnLayer(DENSE, FULL, np.eye(3, dtype=int), (3,)),), (3,), 3)
    with pytest.raises(DimensionError):
        reference_infer(net, np.array([1, 2]))


def test_xnor_popcount_matrix_matches_scalar():
    rng = np.random.default_rng(12)
    for L in (1, 7, 8, 9, 64, 100):
        xs = [BitVector.from_array(rng.integers(0, 2, L)) for _ in range(5)]
        w = BitMatrix.from_array(rng.integers(0, 2, (L, 6)).astype(np.uint8))
        pops = xnor_popcount_matrix(xs, w)
        assert pops.shape == (5, 6)
        for i, x in enumerate(xs):
            assert pops[i].tolist() == [xnor_popcount_dot(x, w.column(j)).popcount_raw for j in range(6)]
    with pytest.raises(DimensionError):
        xnor_popcount_matrix(np.zeros((2, 3)), np.zeros((4, 1)))
