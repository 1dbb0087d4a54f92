"""Streaming summaries that live entirely in private memory

Both sketches hash items with seeded 64-bit MurmurHash3 (`mmh3.hash64`,
unsigned, first half) of the item's decimal string. KMV maps the hash to
[0, 1) by dividing by 2**64; count-min reduces it modulo the row width with a
distinct seed per row.

Blob layouts (little endian):

    KMV:        b"ODPK" | u16 version | u32 capacity | u32 seed | u8 saturated
                | u32 count | count * u64 hashes
    count-min:  b"ODPC" | u16 version | u32 width | u32 depth | depth * u32 seeds
                | width * depth * f64 cells (row major)
"""
import math
import struct
from typing import Hashable, Optional, Sequence

import mmh3
import numpy as np
from sortedcontainers import SortedList

BLOB_VERSION = 1
KMV_MAGIC = b"ODPK"
CM_MAGIC = b"ODPC"
HASH_RANGE = 2 ** 64


class InvalidSketchBlob(ValueError):
    pass


def hash64(item: Hashable, seed: int) -> int:
    return mmh3.hash64(str(item), seed=seed, signed=False)[0]


def kmv_capacity(alpha: float) -> int:
    """t = ceil(3 / alpha^2)"""
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    return math.ceil(3 / alpha ** 2)


class KmvSketch:
    """Bottom-k sketch keeping the t smallest distinct hash values"""

    def __init__(self, capacity: int, seed: int = 0):
        if capacity < 2:
            raise ValueError("KMV capacity must be at least 2")
        self.capacity = capacity
        self.seed = seed
        self.smallest_hashes = SortedList()
        # set once a distinct hash was dropped, the set no longer holds every item
        self.saturated = False

    @property
    def words(self) -> int:
        return self.capacity + 3

    def update(self, item: Hashable) -> None:
        value = hash64(item, self.seed)
        if value in self.smallest_hashes:
            return
        if len(self.smallest_hashes) < self.capacity:
            self.smallest_hashes.add(value)
            return
        self.saturated = True
        if value < self.smallest_hashes[-1]:
            self.smallest_hashes.pop()
            self.smallest_hashes.add(value)

    def estimate(self) -> float:
        if not self.saturated:
            return float(len(self.smallest_hashes))
        largest = self.smallest_hashes[-1] / HASH_RANGE
        return (self.capacity - 1) / largest

    def to_bytes(self) -> bytes:
        header = KMV_MAGIC + struct.pack(
            "<HIIBI",
            BLOB_VERSION,
            self.capacity,
            self.seed,
            int(self.saturated),
            len(self.smallest_hashes),
        )
        return header + struct.pack(f"<{len(self.smallest_hashes)}Q", *self.smallest_hashes)

    @classmethod
    def from_bytes(cls, blob: bytes) -> "KmvSketch":
        header_size = len(KMV_MAGIC) + struct.calcsize("<HIIBI")
        if blob[: len(KMV_MAGIC)] != KMV_MAGIC or len(blob) < header_size:
            raise InvalidSketchBlob("Not a KMV sketch blob")
        version, capacity, seed, saturated, count = struct.unpack(
            "<HIIBI", blob[len(KMV_MAGIC) : header_size]
        )
        if version != BLOB_VERSION:
            raise InvalidSketchBlob(f"Unsupported KMV blob version {version}")
        if len(blob) != header_size + 8 * count:
            raise InvalidSketchBlob("KMV blob has the wrong length")
        sketch = cls(capacity, seed)
        sketch.smallest_hashes.update(struct.unpack(f"<{count}Q", blob[header_size:]))
        sketch.saturated = bool(saturated)
        return sketch

    def __eq__(self, other):
        if not isinstance(other, KmvSketch):
            return NotImplemented
        return (
            self.capacity == other.capacity
            and self.seed == other.seed
            and self.saturated == other.saturated
            and list(self.smallest_hashes) == list(other.smallest_hashes)
        )


def kmv_update(sketch: KmvSketch, item: Hashable) -> None:
    sketch.update(item)


def kmv_estimate(sketch: KmvSketch) -> float:
    return sketch.estimate()


def count_min_dimensions(alpha: float, theta: float):
    """(width, depth) = (ceil(e / alpha), ceil(ln(1 / theta)))"""
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    if not 0 < theta < 1:
        raise ValueError(f"theta must be in (0, 1), got {theta}")
    return math.ceil(math.e / alpha), max(1, math.ceil(math.log(1 / theta)))


class CountMinSketch:
    def __init__(self, width: int, depth: int, seeds: Optional[Sequence[int]] = None):
        if width < 1 or depth < 1:
            raise ValueError("Count-min width and depth must be positive")
        if seeds is None:
            seeds = range(depth)
        seeds = list(seeds)
        if len(seeds) != depth:
            raise ValueError(f"Expected {depth} row seeds, got {len(seeds)}")
        self.width = width
        self.depth = depth
        self.seeds = seeds
        self.table = np.zeros((depth, width), dtype=np.float64)

    @property
    def words(self) -> int:
        return self.width * self.depth

    def _columns(self, item: Hashable):
        return [hash64(item, seed) % self.width for seed in self.seeds]

    def update(self, item: Hashable, count: int = 1) -> None:
        self.table[np.arange(self.depth), self._columns(item)] += count

    def query(self, item: Hashable) -> float:
        return float(self.table[np.arange(self.depth), self._columns(item)].min())

    def to_bytes(self) -> bytes:
        header = CM_MAGIC + struct.pack("<HII", BLOB_VERSION, self.width, self.depth)
        seeds = struct.pack(f"<{self.depth}I", *self.seeds)
        return header + seeds + self.table.astype("<f8").tobytes()

    @classmethod
    def from_bytes(cls, blob: bytes) -> "CountMinSketch":
        offset = len(CM_MAGIC) + struct.calcsize("<HII")
        if blob[: len(CM_MAGIC)] != CM_MAGIC or len(blob) < offset:
            raise InvalidSketchBlob("Not a count-min sketch blob")
        version, width, depth = struct.unpack("<HII", blob[len(CM_MAGIC) : offset])
        if version != BLOB_VERSION:
            raise InvalidSketchBlob(f"Unsupported count-min blob version {version}")
        if len(blob) != offset + 4 * depth + 8 * width * depth:
            raise InvalidSketchBlob("Count-min blob has the wrong length")
        seeds = struct.unpack(f"<{depth}I", blob[offset : offset + 4 * depth])
        sketch = cls(width, depth, seeds)
        cells = np.frombuffer(blob[offset + 4 * depth :], dtype="<f8")
        sketch.table = cells.reshape(depth, width).astype(np.float64)
        return sketch

    def __eq__(self, other):
        if not isinstance(other, CountMinSketch):
            return NotImplemented
        return (
            self.width == other.width
            and self.seeds == other.seeds
            and np.array_equal(self.table, other.table)
        )


def cm_update(sketch: CountMinSketch, item: Hashable) -> None:
    sketch.update(item)


def cm_query(sketch: CountMinSketch, item: Hashable) -> float:
    return sketch.query(item)
