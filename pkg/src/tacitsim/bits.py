"""Packed binary vectors and matrices.

Bits are stored in {0, 1}; bit ``b`` stands for the bipolar value ``2b - 1``.
A :class:`BitVector` packs its bits into a single Python integer (bit ``i`` of
the vector is bit ``i`` of the integer), so XNOR and popcount reduce to a
handful of big-integer instructions.
"""

from __future__ import annotations

from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import DimensionError


class BitVector:
    """Immutable packed bit vector."""

    __slots__ = ("_word", "_len")

    def __init__(self, word: int, length: int):
        if length < 0:
            raise DimensionError(f"negative bit vector length {length}")
        if word < 0 or word >> length:
            raise ValueError(f"word {word:#x} does not fit in {length} bits")
        self._word = word
        self._len = length

    # -- constructors -----------------------------------------------------
    @classmethod
    def from_bits(cls, bits: Iterable[int]) -> "BitVector":
        arr = np.asarray(list(bits) if not isinstance(bits, np.ndarray) else bits)
        return cls.from_array(arr)

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "BitVector":
        arr = np.asarray(arr).reshape(-1)
        if arr.size and not np.isin(arr, (0, 1)).all():
            raise ValueError("bit arrays may only contain 0 and 1")
        packed = np.packbits(arr.astype(np.uint8), bitorder="little")
        return cls(int.from_bytes(packed.tobytes(), "little"), int(arr.size))

    @classmethod
    def from_bytes(cls, data: bytes, length: int) -> "BitVector":
        """Decode ``length`` bits packed LSB-first from ``data``."""
        nbytes = (length + 7) // 8
        if len(data) < nbytes:
            raise DimensionError(f"need {nbytes} bytes for {length} bits, got {len(data)}")
        word = int.from_bytes(data[:nbytes], "little") & ((1 << length) - 1)
        return cls(word, length)

    @classmethod
    def zeros(cls, length: int) -> "BitVector":
        return cls(0, length)

    @classmethod
    def ones(cls, length: int) -> "BitVector":
        return cls((1 << length) - 1, length)

    # -- accessors ----------------------------------------------------------
    @property
    def word(self) -> int:
        return self._word

    def __len__(self) -> int:
        return self._len

    def __getitem__(self, key):
        if isinstance(key, slice):
            start, stop, step = key.indices(self._len)
            if step == 1:
                n = max(0, stop - start)
                return BitVector((self._word >> start) & ((1 << n) - 1), n)
            return BitVector.from_array(self.to_array()[key])
        if key < 0:
            key += self._len
        if not 0 <= key < self._len:
            raise IndexError(key)
        return (self._word >> key) & 1

    def __iter__(self) -> Iterator[int]:
        w = self._word
        for _ in range(self._len):
            yield w & 1
            w >>= 1

    def __eq__(self, other) -> bool:
        if not isinstance(other, BitVector):
            return NotImplemented
        return self._len == other._len and self._word == other._word

    def __hash__(self) -> int:
        return hash((self._word, self._len))

    def __repr__(self) -> str:
        body = "".join(str(b) for b in self) if self._len <= 64 else f"{self._len} bits"
        return f"BitVector({body})"

    def to_array(self) -> np.ndarray:
        nbytes = (self._len + 7) // 8
        raw = np.frombuffer(self._word.to_bytes(nbytes, "little"), dtype=np.uint8)
        return np.unpackbits(raw, bitorder="little", count=self._len)

    def to_bytes(self) -> bytes:
        return self._word.to_bytes((self._len + 7) // 8, "little")

    def bipolar(self) -> np.ndarray:
        """Decode to a vector of -1/+1 integers."""
        return self.to_array().astype(np.int64) * 2 - 1

    def popcount(self) -> int:
        return self._word.bit_count()

    def complement(self) -> "BitVector":
        return BitVector(self._word ^ ((1 << self._len) - 1), self._len)

    def concat(self, other: "BitVector") -> "BitVector":
        return BitVector(self._word | (other._word << self._len), self._len + other._len)


def popcount(v: BitVector) -> int:
    return v.popcount()


def complement(v: BitVector) -> BitVector:
    return v.complement()


def xnor(a: BitVector, b: BitVector) -> BitVector:
    """Bitwise XNOR; bit ``i`` is set iff ``a[i] == b[i]``."""
    if len(a) != len(b):
        raise DimensionError(f"xnor length mismatch: {len(a)} vs {len(b)}")
    mask = (1 << len(a)) - 1
    return BitVector(~(a.word ^ b.word) & mask, len(a))


class BitMatrix:
    """Immutable ``m x n`` bit matrix whose columns are the weight vectors.

    Parameters
    ----------
    columns : sequence of BitVector
        The ``n`` columns, each of length ``m``.
    """

    __slots__ = ("_columns", "_rows", "_array")

    def __init__(self, columns: Sequence[BitVector], rows: int | None = None):
        columns = tuple(columns)
        if rows is None:
            if not columns:
                raise DimensionError("cannot infer row count of an empty BitMatrix")
            rows = len(columns[0])
        for j, col in enumerate(columns):
            if len(col) != rows:
                raise DimensionError(f"column {j} has length {len(col)}, expected {rows}")
        self._columns = columns
        self._rows = rows
        self._array = None

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "BitMatrix":
        arr = np.asarray(arr)
        if arr.ndim != 2:
            raise DimensionError(f"BitMatrix needs a 2-D array, got shape {arr.shape}")
        return cls([BitVector.from_array(arr[:, j]) for j in range(arr.shape[1])], arr.shape[0])

    @property
    def rows(self) -> int:
        return self._rows

    @property
    def cols(self) -> int:
        return len(self._columns)

    @property
    def shape(self) -> tuple[int, int]:
        return (self._rows, len(self._columns))

    def column(self, j: int) -> BitVector:
        return self._columns[j]

    @property
    def columns(self) -> tuple[BitVector, ...]:
        return self._columns

    def to_array(self) -> np.ndarray:
        """Return an ``m x n`` read-only ``uint8`` array."""
        if self._array is None:
            arr = np.zeros((self._rows, len(self._columns)), dtype=np.uint8)
            for j, col in enumerate(self._columns):
                arr[:, j] = col.to_array()
            arr.setflags(write=False)
            self._array = arr
        return self._array

    def __eq__(self, other) -> bool:
        if not isinstance(other, BitMatrix):
            return NotImplemented
        return self._rows == other._rows and self._columns == other._columns

    def __hash__(self) -> int:
        return hash((self._rows, self._columns))

    def __repr__(self) -> str:
        return f"BitMatrix({self._rows}x{len(self._columns)})"
