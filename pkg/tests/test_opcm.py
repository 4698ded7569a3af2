import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import bipolar_matvec, ceil_div
from tacitsim.bits import BitMatrix, BitVector
from tacitsim.errors import DimensionError, UnsupportedBackendError
from tacitsim.mapping import CrossbarDims, custbinary_layout, tacitmap_layout
from tacitsim.opcm import (PowerModel, WdmBatch, WdmConfig, crossbar_tia_power,
                           execute_layer_opcm, mmm_step, transmitter_power, wdm_batch)
from tacitsim.xbar import AdcModel, execute_layer, vmm_step


def W(arr):
    return BitMatrix.from_array(np.asarray(arr, dtype=np.uint8))


def rand_inputs(rng, m, count):
    return [BitVector.from_array(rng.integers(0, 2, m)) for _ in range(count)]


def test_wdm_batch_sizes():
    ones = [BitVector.ones(4)] * 33
    assert [len(b) for b in wdm_batch(ones[:3], 16)] == [3]
    assert [len(b) for b in wdm_batch(ones, 16)] == [16, 16, 1]
    assert wdm_batch([], 16) == []
    b = wdm_batch(ones, 16)[1]
    assert b.first_input == 16 and b.wavelengths == tuple(range(16))


def test_wdm_batch_keeps_order():
    rng = np.random.default_rng(0)
    xs = rand_inputs(rng, 5, 7)
    flat = [d for b in wdm_batch(xs, 3) for d in b.drives]
    assert [BitVector.from_array(d) for d in flat] == xs


def test_wdm_batch_errors():
    with pytest.raises(ValueError):
        wdm_batch([BitVector.ones(2)], 0)
    with pytest.raises(DimensionError):
        wdm_batch([BitVector.ones(2), BitVector.ones(3)], 4)
    with pytest.raises(ValueError):
        WdmBatch((np.ones(2), np.ones(2)), (0, 0))


def test_mmm_equals_stacked_vmm():
    rng = np.random.default_rng(1)
    tile = tacitmap_layout(W(rng.integers(0, 2, (4, 5))), CrossbarDims(8, 6)).tiles[0][0]
    drives = [rng.integers(0, 2, 8) for _ in range(5)]
    (batch,) = wdm_batch(drives, 16)
    out, rec = mmm_step(tile, batch, AdcModel())
    assert out.shape == (5, 6)
    for b, d in enumerate(drives):
        expect, _ = vmm_step(tile, d, AdcModel())
        assert out[b].tolist() == expect.tolist()
    assert rec.steps == 1 and rec.wavelength_count == 5 and rec.kind == "mmm"
    assert rec.tia_activations == 5 and rec.backend == "opcm"


def test_mmm_batch_of_one_is_vmm():
    tile = tacitmap_layout(W([[1], [0]]), CrossbarDims(4, 1)).tiles[0][0]
    (batch,) = wdm_batch([np.array([1, 0, 0, 1])], 16)
    out, _ = mmm_step(tile, batch, AdcModel())
    assert out.tolist() == [[2]]


def test_mmm_rejects_over_capacity_and_custbinary():
    tile = tacitmap_layout(W([[1], [0]]), CrossbarDims(4, 1)).tiles[0][0]
    (batch,) = wdm_batch([np.array([1, 0, 0, 1])] * 5, 16)
    with pytest.raises(DimensionError):
        mmm_step(tile, batch, AdcModel(), capacity=4)
    cb = custbinary_layout(W([[1], [0]]), CrossbarDims(4, 4))
    with pytest.raises(UnsupportedBackendError):
        mmm_step(cb.tiles[0][0], batch, AdcModel())
    with pytest.raises(UnsupportedBackendError):
        execute_layer_opcm(cb, [BitVector.ones(2)], WdmConfig())


def test_tia_power():
    assert crossbar_tia_power(3) == 6.0
    assert crossbar_tia_power(0) == 0.0
    assert crossbar_tia_power(128) == 256.0


def test_transmitter_power_values():
    # hand evaluated: 3KM + (3KM + 1)/K * 45 with zero laser power
    assert transmitter_power(WdmConfig(1), 1) == 183.0
    assert transmitter_power(WdmConfig(16), 4) == 734.8125
    pm = PowerModel(WdmConfig(16), 4, 3)
    assert pm.total == 734.8125 + 6.0


@given(st.integers(1, 64), st.integers(1, 256), st.floats(0, 1e4))
def test_transmitter_laser_additive_and_monotone(K, M, p):
    base = transmitter_power(WdmConfig(K), M)
    assert transmitter_power(WdmConfig(K, p), M) == pytest.approx(base + p)
    assert transmitter_power(WdmConfig(K), M + 1) > base


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 30), st.integers(1, 30), st.integers(2, 12), st.integers(1, 12),
       st.integers(0, 40), st.integers(1, 20), st.integers(0, 2 ** 32 - 1))
def test_opcm_matches_epcm_and_step_law(m, n, M, N, V, K, seed):
    rng = np.random.default_rng(seed)
    w = rng.integers(0, 2, (m, n))
    mapped = tacitmap_layout(W(w), CrossbarDims(M, N))
    inputs = rand_inputs(rng, m, V)
    do, to = execute_layer_opcm(mapped, inputs, WdmConfig(K))
    de, te = execute_layer(mapped, inputs)
    assert do == de
    for x, d in zip(inputs, do):
        assert d.values.tolist() == bipolar_matvec(x.to_array(), w)
    assert te.steps == V * mapped.row_tiles
    assert to.steps == ceil_div(V, K) * mapped.row_tiles
    assert sum(r.wavelength_count for r in to) == V * mapped.row_tiles
    assert all(r.wavelength_count <= K for r in to)


def test_k1_degenerates_to_epcm_steps():
    rng = np.random.default_rng(3)
    mapped = tacitmap_layout(W(rng.integers(0, 2, (6, 4))), CrossbarDims(4, 4))
    inputs = rand_inputs(rng, 6, 5)
    _, to = execute_layer_opcm(mapped, inputs, WdmConfig(1))
    _, te = execute_layer(mapped, inputs)
    assert to.steps == te.steps


def test_quantized_mmm_matches_quantized_vmm():
    rng = np.random.default_rng(4)
    mapped = tacitmap_layout(W(rng.integers(0, 2, (9, 5))), CrossbarDims(8, 4))
    inputs = rand_inputs(rng, 9, 10)
    adc = AdcModel.quantized(2)
    do, _ = execute_layer_opcm(mapped, inputs, WdmConfig(4), adc)
    de, _ = execute_layer(mapped, inputs, adc=adc)
    assert do == de
