"""Optical PCM backend with wavelength division multiplexing.

Up to ``K`` drive vectors ride distinct wavelengths through one TacitMap tile,
so a single activation computes ``B <= K`` VMMs at once (an MMM). The
transmitter (laser, comb, MUX/DMUX, VOAs) is modelled by its power draw and
the batching rule only.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Sequence

import numpy as np

from .bits import BitVector
from .bnn import DotVector
from .errors import DimensionError, UnsupportedBackendError
from .mapping import TACIT, MappedLayer, TilePlacement
from .xbar import (MMM, OPCM, AdcModel, StepRecord, StepTrace, _check_inputs, _finish,
                   column_sums, merge_parallel)

TIA_POWER_MW = 2
MODULATOR_POWER_MW = 3
TUNING_POWER_MW = 45


@dataclass(frozen=True)
class WdmConfig:
    """WDM capacity ``K`` and laser power (mW)."""

    capacity: int = 16
    p_laser: float = 0.0

    def __post_init__(self):
        if self.capacity < 1:
            raise ValueError(f"WDM capacity must be >= 1, got {self.capacity}")
        if self.p_laser < 0:
            raise ValueError("laser power must be non-negative")


@dataclass(frozen=True)
class WdmBatch:
    drives: tuple[np.ndarray, ...]
    wavelengths: tuple[int, ...]
    first_input: int = 0

    def __post_init__(self):
        drives = tuple(np.asarray(d, dtype=np.uint8) for d in self.drives)
        object.__setattr__(self, "drives", drives)
        if len(set(self.wavelengths)) != len(self.wavelengths):
            raise ValueError("wavelength ids must be distinct")
        if len(self.wavelengths) != len(drives):
            raise ValueError("one wavelength per drive")
        if len({d.size for d in drives}) > 1:
            raise DimensionError("all drives in a batch must have equal length")

    def __len__(self) -> int:
        return len(self.drives)


def wdm_batch(inputs: Sequence, capacity: int) -> list[WdmBatch]:
    """Group drive vectors, in order, into batches of at most ``capacity``."""
    if capacity < 1:
        raise ValueError(f"WDM capacity must be >= 1, got {capacity}")
    drives = [x.to_array() if isinstance(x, BitVector) else np.asarray(x, dtype=np.uint8)
              for x in inputs]
    if len({d.size for d in drives}) > 1:
        raise DimensionError(f"drive lengths differ: {sorted({d.size for d in drives})}")
    return [
        WdmBatch(tuple(drives[i:i + capacity]), tuple(range(len(drives[i:i + capacity]))), i)
        for i in range(0, len(drives), capacity)
    ]


def mmm_step(tile: TilePlacement, batch: WdmBatch, adc: AdcModel,
             capacity: int | None = None) -> tuple[np.ndarray, StepRecord]:
    """All wavelengths of ``batch`` through one tile in a single activation.

    Returns a ``B x N`` matrix whose row ``b`` equals the VMM of drive ``b``.
    """
    if tile.mapping_kind != TACIT:
        raise UnsupportedBackendError(f"tile {tile.tile_id}: WDM needs a tacit tile")
    if capacity is not None and len(batch) > capacity:
        raise DimensionError(f"batch of {len(batch)} exceeds WDM capacity {capacity}")
    adc = adc.for_rows(tile.dims.rows)
    # wavelengths are ideally separable: each one accumulates independently
    out = np.stack([adc.convert(column_sums(tile, d)) for d in batch.drives]) if len(batch) else \
        np.zeros((0, tile.dims.cols), dtype=np.int64)
    rec = StepRecord(MMM, OPCM, (tile.tile_id,), steps=adc.columns_per_adc,
                     wavelength_count=len(batch), adc_conversions=tile.columns_used,
                     tia_activations=tile.columns_used, rows=tile.dims.rows, cols=tile.dims.cols)
    return out, rec


def crossbar_tia_power(columns: int) -> float:
    """Receiver TIA power in mW, 2 mW per column."""
    if columns < 0:
        raise ValueError("column count must be non-negative")
    return float(columns * TIA_POWER_MW)


def transmitter_power_exact(cfg: WdmConfig, rows: int) -> Fraction:
    K, M = cfg.capacity, rows
    if M < 1:
        raise ValueError("drive length must be >= 1")
    modulators = MODULATOR_POWER_MW * K * M
    return (Fraction(cfg.p_laser) + modulators
            + Fraction(modulators + 1, K) * TUNING_POWER_MW)


def transmitter_power(cfg: WdmConfig, rows: int) -> float:
    """Laser + modulator + tuning power in mW for ``K`` wavelengths and ``rows`` lines."""
    return float(transmitter_power_exact(cfg, rows))


@dataclass(frozen=True)
class PowerModel:
    """Static power of one oPCM core (mW)."""

    wdm: WdmConfig
    rows: int
    cols: int

    @property
    def crossbar(self) -> float:
        return crossbar_tia_power(self.cols)

    @property
    def transmitter(self) -> float:
        return transmitter_power(self.wdm, self.rows)

    @property
    def total(self) -> float:
        return self.crossbar + self.transmitter


def execute_layer_opcm(mapped: MappedLayer, inputs: Sequence[BitVector], cfg: WdmConfig,
                       adc: AdcModel | None = None,
                       layer_index: int = 0) -> tuple[list[DotVector], StepTrace]:
    """Run a TacitMap layer on the WDM-enabled oPCM crossbar.

    Inputs are batched ``K`` at a time in input order; each batch costs one
    MMM per row tile, with column tiles firing in parallel.
    """
    if mapped.kind != TACIT:
        raise UnsupportedBackendError(f"{mapped.kind} mapping has no WDM execution path")
    inputs = list(inputs)
    _check_inputs(mapped, inputs)
    adc = (adc or AdcModel()).for_rows(mapped.dims.rows)
    dtype = np.int64 if adc.mode == "ideal" else np.float64
    pops = np.zeros((len(inputs), mapped.n), dtype=dtype)
    per_row = [[] for _ in mapped.tiles]
    for x in inputs:
        for r, d in enumerate(mapped.encode_input(x)):
            per_row[r].append(d)
    batches_per_row = [wdm_batch(drives, cfg.capacity) for drives in per_row]
    records = []
    for b in range(len(batches_per_row[0]) if batches_per_row else 0):
        for row, batches in zip(mapped.tiles, batches_per_row):
            batch = batches[b]
            lo = batch.first_input
            recs = []
            for tile in row:
                out, rec = mmm_step(tile, batch, adc, cfg.capacity)
                c0, c1 = tile.col_range
                pops[lo:lo + len(batch), c0:c1] += out[:, :c1 - c0]
                recs.append(replace(rec, layer=layer_index))
            records.append(merge_parallel(recs))
    return _finish(pops, mapped.m), StepTrace(records)
