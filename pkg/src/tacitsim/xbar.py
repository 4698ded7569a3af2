"""Functional crossbar execution with step accounting.

TacitMap tiles are driven with ``concat(in, ~in)`` and every column sum goes
through an :class:`AdcModel`. CustBinaryMap tiles are read one weight row per
step through a precharge sense amplifier; local counters and a global tree
finish the popcount in the same step (pipelined).

Every crossbar activation epoch is logged as a :class:`StepRecord`.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .bits import BitVector
from .bnn import DotVector
from .errors import CounterOverflowError, DimensionError, UnsupportedBackendError
from .mapping import CUSTBINARY, TACIT, MappedLayer, TilePlacement

VMM = "vmm"
MMM = "mmm"
PCSA_READ = "pcsa_read"

EPCM = "epcm"
OPCM = "opcm"

DEFAULT_COUNTER_BITS = 5


@dataclass(frozen=True)
class AdcModel:
    """Column ADC.

    ``max_level`` is the full-scale input and defaults to the row count of the
    crossbar the ADC is attached to (see :meth:`for_rows`). ``columns_per_adc``
    is the column multiplexing factor; each VMM costs that many sub-steps.
    """

    bits: int | None = None
    mode: str = "ideal"
    max_level: int | None = None
    columns_per_adc: int = 1

    def __post_init__(self):
        if self.mode not in ("ideal", "quantized"):
            raise ValueError(f"unknown ADC mode {self.mode!r}")
        if self.mode == "quantized" and (self.bits is None or self.bits < 1):
            raise ValueError("a quantized ADC needs bits >= 1")
        if self.columns_per_adc < 1:
            raise ValueError("columns_per_adc must be >= 1")

    @classmethod
    def ideal(cls, max_level: int | None = None) -> "AdcModel":
        bits = None if max_level is None else math.ceil(math.log2(max_level + 1))
        return cls(bits, "ideal", max_level)

    @classmethod
    def quantized(cls, bits: int, max_level: int | None = None) -> "AdcModel":
        return cls(bits, "quantized", max_level)

    def for_rows(self, rows: int) -> "AdcModel":
        """Bind an unbound ADC to a crossbar with ``rows`` rows."""
        if self.max_level is not None:
            return self
        bits = self.bits if self.mode == "quantized" else math.ceil(math.log2(rows + 1))
        return replace(self, bits=bits, max_level=rows)

    @property
    def step(self) -> float:
        """Quantization step ``max_level / (2**bits - 1)``."""
        return self.max_level / (2 ** self.bits - 1)

    def convert(self, sums: np.ndarray) -> np.ndarray:
        if self.mode == "ideal":
            return np.asarray(sums, dtype=np.int64)
        if self.max_level is None:
            raise ValueError("quantized ADC is not bound to a crossbar; call for_rows()")
        v = np.asarray(sums, dtype=np.float64)
        q = np.floor(v / self.step + 0.5) * self.step
        return np.clip(q, 0.0, float(self.max_level))


@dataclass(frozen=True, slots=True)
class StepRecord:
    """One crossbar activation epoch.

    ``tile_ids`` lists every tile fired in parallel during the epoch;
    ``steps`` is the latency it costs (more than 1 under ADC multiplexing).
    ``rows``/``cols`` are the crossbar dimensions, used by the power models.
    """

    kind: str
    backend: str
    tile_ids: tuple[int, ...]
    steps: int = 1
    wavelength_count: int = 1
    adc_conversions: int = 0
    sa_activations: int = 0
    counter_increments: int = 0
    tree_reductions: int = 0
    tia_activations: int = 0
    rows: int = 0
    cols: int = 0
    layer: int = 0

    @property
    def tile_id(self) -> int:
        return self.tile_ids[0]


COUNT_FIELDS = ("steps", "adc_conversions", "sa_activations", "counter_increments",
                "tree_reductions", "tia_activations")


def merge_parallel(records: Sequence[StepRecord]) -> StepRecord:
    """Fuse records of tiles fired in the same epoch into one record."""
    first = records[0]
    if len(records) == 1:
        return first
    counts = {f: sum(getattr(r, f) for r in records) for f in COUNT_FIELDS if f != "steps"}
    return replace(first, tile_ids=tuple(t for r in records for t in r.tile_ids),
                   steps=max(r.steps for r in records), **counts)


@dataclass(frozen=True)
class StepTrace:
    records: tuple[StepRecord, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def totals(self) -> dict[str, int]:
        return {f: sum(getattr(r, f) for r in self.records) for f in COUNT_FIELDS}

    @property
    def steps(self) -> int:
        return sum(r.steps for r in self.records)

    def steps_by_backend(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for r in self.records:
            out[r.backend] = out.get(r.backend, 0) + r.steps
        return out

    def activations_per_tile(self) -> Counter:
        """Crossbar activations keyed by ``(layer, tile_id)``."""
        return Counter((r.layer, t) for r in self.records for t in r.tile_ids)

    def for_layer(self, layer: int) -> "StepTrace":
        return StepTrace(replace(r, layer=layer) for r in self.records)

    def only_layer(self, layer: int) -> "StepTrace":
        return StepTrace(r for r in self.records if r.layer == layer)

    def scaled(self, factor: int) -> "StepTrace":
        """Every counter multiplied by ``factor`` (used for linearity checks)."""
        return StepTrace(
            replace(r, **{f: getattr(r, f) * factor for f in COUNT_FIELDS}) for r in self.records
        )

    @staticmethod
    def concat(traces: Iterable["StepTrace"]) -> "StepTrace":
        return StepTrace(r for t in traces for r in t.records)


# ---------------------------------------------------------------------------
# tile-level operations


def _tile_drive(tile: TilePlacement, drive) -> np.ndarray:
    d = drive.to_array() if isinstance(drive, BitVector) else np.asarray(drive, dtype=np.uint8)
    used = tile.rows_used
    if d.size == used:
        return d
    if d.size == tile.dims.rows and not d[used:].any():
        return d[:used]
    raise DimensionError(
        f"tile {tile.tile_id}: drive has {d.size} lines, tile uses {used} rows"
    )


def column_sums(tile: TilePlacement, drive: np.ndarray) -> np.ndarray:
    """Raw analog column accumulation, before the ADC."""
    d = _tile_drive(tile, drive).astype(np.int64)
    return d @ tile.cell_bits[:d.size].astype(np.int64)


def vmm_step(tile: TilePlacement, drive, adc: AdcModel) -> tuple[np.ndarray, StepRecord]:
    """One VMM on a TacitMap tile: ``N`` column sums through the ADC."""
    if tile.mapping_kind != TACIT:
        raise UnsupportedBackendError(f"tile {tile.tile_id}: vmm_step needs a tacit tile")
    adc = adc.for_rows(tile.dims.rows)
    out = adc.convert(column_sums(tile, drive))
    rec = StepRecord(VMM, EPCM, (tile.tile_id,), steps=adc.columns_per_adc,
                     adc_conversions=tile.columns_used, rows=tile.dims.rows, cols=tile.dims.cols)
    return out, rec


def _pcsa_bits(tile: TilePlacement, row: int, drive) -> np.ndarray:
    if tile.mapping_kind != CUSTBINARY:
        raise UnsupportedBackendError(f"tile {tile.tile_id}: pcsa_read needs a custbinary tile")
    if not 0 <= row < tile.vector_count:
        raise IndexError(f"tile {tile.tile_id}: row {row} outside mapped rows 0..{tile.vector_count - 1}")
    L = tile.slice_len
    d = drive.to_array() if isinstance(drive, BitVector) else np.asarray(drive, dtype=np.uint8)
    if d.size != 2 * L:
        raise DimensionError(f"tile {tile.tile_id}: interleaved drive has {d.size} lines, need {2 * L}")
    cells = tile.cell_bits[row, :2 * L]
    return (d[0::2] & cells[0::2]) | (d[1::2] & cells[1::2])


def pcsa_read(tile: TilePlacement, row: int, drive) -> tuple[BitVector, StepRecord]:
    """Read the XNOR of one stored weight row with the interleaved input."""
    bits = _pcsa_bits(tile, row, drive)
    rec = StepRecord(PCSA_READ, EPCM, (tile.tile_id,), sa_activations=bits.size,
                     rows=tile.dims.rows, cols=tile.dims.cols)
    return BitVector.from_array(bits), rec


def local_popcount(bits, counter_bits: int = DEFAULT_COUNTER_BITS, tile_id: int | None = None) -> int:
    """Count set bits with a ``counter_bits``-wide counter; refuse to saturate."""
    if counter_bits < 1:
        raise ValueError("counter width must be >= 1")
    count = bits.popcount() if isinstance(bits, BitVector) else int(np.count_nonzero(bits))
    if count >= 2 ** counter_bits:
        where = "" if tile_id is None else f"tile {tile_id}: "
        raise CounterOverflowError(
            f"{where}popcount {count} overflows a {counter_bits}-bit counter (max {2 ** counter_bits - 1})"
        )
    return count


def global_popcount_tree(local_counts: Iterable[int]) -> int:
    return sum(int(c) for c in local_counts)


def check_counter_capacity(mapped: MappedLayer, counter_bits: int) -> None:
    """A crossbar row wider than the counter range is a configuration error."""
    if mapped.dims.cols >= 2 ** counter_bits:
        raise CounterOverflowError(
            f"tile {mapped.tiles[0][0].tile_id}: crossbar rows hold {mapped.dims.cols} logical cells "
            f"but the local counter has {counter_bits} bits (max count {2 ** counter_bits - 1})"
        )


# ---------------------------------------------------------------------------
# layer execution


def _finish(pops: np.ndarray, m: int) -> list[DotVector]:
    if pops.dtype.kind == "f":
        pops = np.floor(pops + 0.5).astype(np.int64)
    return [DotVector(p, m) for p in pops]


def _check_inputs(mapped: MappedLayer, inputs: Sequence[BitVector]) -> None:
    for i, v in enumerate(inputs):
        if len(v) != mapped.m:
            raise DimensionError(f"input {i} has {len(v)} bits, layer vectors have {mapped.m}")


def execute_tacit(mapped: MappedLayer, inputs: Sequence[BitVector], adc: AdcModel,
                  layer_index: int = 0) -> tuple[list[DotVector], StepTrace]:
    adc = adc.for_rows(mapped.dims.rows)
    dtype = np.int64 if adc.mode == "ideal" else np.float64
    pops = np.zeros((len(inputs), mapped.n), dtype=dtype)
    records = []
    for v, x in enumerate(inputs):
        drives = mapped.encode_input(x)
        for row, drive in zip(mapped.tiles, drives):
            recs = []
            for tile in row:
                sums, rec = vmm_step(tile, drive, adc)
                c0, c1 = tile.col_range
                pops[v, c0:c1] += sums[:c1 - c0]
                recs.append(replace(rec, layer=layer_index))
            records.append(merge_parallel(recs))
    return _finish(pops, mapped.m), StepTrace(records)


def execute_custbinary(mapped: MappedLayer, inputs: Sequence[BitVector],
                       counter_bits: int = DEFAULT_COUNTER_BITS,
                       layer_index: int = 0) -> tuple[list[DotVector], StepTrace]:
    check_counter_capacity(mapped, counter_bits)
    pops = np.zeros((len(inputs), mapped.n), dtype=np.int64)
    dims = mapped.dims
    records = []
    for v, x in enumerate(inputs):
        drives = mapped.encode_input(x)
        for row in mapped.tiles:
            for local in range(row[0].vector_count):
                counts = []
                sa = 0
                for tile, drive in zip(row, drives):
                    bits = _pcsa_bits(tile, local, drive)
                    sa += bits.size
                    counts.append(local_popcount(bits, counter_bits, tile.tile_id))
                total = global_popcount_tree(counts)
                pops[v, row[0].col_range[0] + local] = total
                records.append(StepRecord(
                    PCSA_READ, EPCM, tuple(t.tile_id for t in row), sa_activations=sa,
                    counter_increments=total, tree_reductions=1,
                    rows=dims.rows, cols=dims.cols, layer=layer_index))
    return _finish(pops, mapped.m), StepTrace(records)


def execute_layer(mapped: MappedLayer, inputs: Sequence[BitVector], backend: str | None = None,
                  adc: AdcModel | None = None, counter_bits: int = DEFAULT_COUNTER_BITS,
                  layer_index: int = 0) -> tuple[list[DotVector], StepTrace]:
    """Run every input through a mapped layer on the ePCM crossbar.

    Parameters
    ----------
    mapped : MappedLayer
        Output of :func:`~tacitsim.mapping.tacitmap_layout` or
        :func:`~tacitsim.mapping.custbinary_layout`.
    inputs : sequence of BitVector
        Input vectors of length ``mapped.m``.
    backend : {"epcm_tacit", "epcm_custbinary"}, optional
        Must agree with ``mapped.kind``; inferred when omitted.
    adc : AdcModel, optional
        Column ADC for TacitMap; ideal by default. Ignored for CustBinaryMap.
    counter_bits : int
        Width of the CustBinaryMap local popcount counters.

    Returns
    -------
    list of DotVector, StepTrace
        One dot vector per input, and the step log. Tacit costs one VMM per
        input per row tile (column tiles fire in parallel); CustBinaryMap
        costs one PCSA read per input per weight vector.
    """
    expected = f"{EPCM}_{mapped.kind}"
    if backend is not None and backend != expected:
        raise UnsupportedBackendError(f"backend {backend!r} cannot run a {mapped.kind} mapping")
    inputs = list(inputs)
    _check_inputs(mapped, inputs)
    if mapped.kind == TACIT:
        return execute_tacit(mapped, inputs, adc or AdcModel(), layer_index)
    return execute_custbinary(mapped, inputs, counter_bits, layer_index)
