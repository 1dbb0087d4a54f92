"""Data-oblivious primitives over external arrays

Sorting uses Batcher's odd-even mergesort. Arrays whose length is not a power
of two are treated as padded with +inf sentinels at the end; comparators that
touch a sentinel can never swap, so they are dropped from the network instead
of materialising the sentinel cells.
"""
from functools import lru_cache
from typing import Any, Callable, List, NamedTuple, Tuple

import numpy as np

from .extmem import BoundsException, ExternalArray, ExternalMemory

TAG_BYTES = 16


class SortKey(NamedTuple):
    primary: Any
    secondary: int = 0


class Tagged(NamedTuple):
    tag: int
    tie_break: int
    payload: Any


def network_size(length: int) -> int:
    """Size of the power-of-two network used for `length` cells"""
    if length <= 1:
        return 1
    return 1 << (length - 1).bit_length()


def _sorting_network(indices):
    if len(indices) < 2:
        return
    if len(indices) == 2:
        yield (indices[0], indices[1])
        return
    mid = len(indices) // 2
    yield from _sorting_network(indices[:mid])
    yield from _sorting_network(indices[mid:])
    yield from _merge_network(indices)


def _merge_network(indices):
    if len(indices) < 2:
        return
    if len(indices) == 2:
        yield (indices[0], indices[1])
        return
    yield from _merge_network(indices[0::2])
    yield from _merge_network(indices[1::2])
    for x, y in zip(indices[1::2], indices[2::2]):
        yield (x, y)


@lru_cache(maxsize=64)
def batcher_network(length: int) -> Tuple[Tuple[int, int], ...]:
    """Compare-exchange pairs (low, high) sorting `length` cells ascending"""
    size = network_size(length)
    return tuple(
        (low, high)
        for low, high in _sorting_network(list(range(size)))
        if high < length
    )


def comparator_count(length: int) -> int:
    return len(batcher_network(length))


def sort_event_count(length: int) -> int:
    # two reads and two writes per comparator
    return 4 * comparator_count(length)


def shuffle_event_count(length: int) -> int:
    # tagging scan, sort on tags, untagging scan
    return 2 * length + sort_event_count(length) + 2 * length


def oblivious_sort(arr: ExternalArray, key: Callable[[Any], Any]) -> None:
    """Sorts `arr` in place by `key`, evaluated in private memory.

    Both cells of a comparator are always read and written back, so the trace
    depends on the array length only.
    """
    with arr.memory.meter.hold(2):
        for low, high in batcher_network(len(arr)):
            first = arr.read(low)
            second = arr.read(high)
            if key(second) < key(first):
                first, second = second, first
            arr.write(low, first)
            arr.write(high, second)


def _tag_key(cell: Tagged):
    return (cell.tag, cell.tie_break)


def oblivious_shuffle(arr: ExternalArray, rng: np.random.Generator) -> None:
    """Permutes `arr` uniformly at random by sorting on 128-bit random tags

    Tag ties are broken by the payload's `record_id` when it has one, else by
    its position before the shuffle.
    """
    if len(arr) == 0:
        raise ValueError("Cannot shuffle an empty array")
    with arr.memory.meter.hold(1):
        for i in range(len(arr)):
            payload = arr.read(i)
            tag = int.from_bytes(rng.bytes(TAG_BYTES), "big")
            arr.write(i, Tagged(tag, getattr(payload, "record_id", i), payload))
    oblivious_sort(arr, _tag_key)
    with arr.memory.meter.hold(1):
        for i in range(len(arr)):
            arr.write(i, arr.read(i).payload)


class OramArray:
    """Linear-scan ORAM: every logical access reads and rewrites all k cells"""

    def __init__(self, memory: ExternalMemory, array_id: str, length: int, fill=0):
        if length < 1:
            raise ValueError("An ORAM array needs at least one cell")
        self.length = length
        self.backing = memory.allocate(array_id, length, fill=fill)

    def __len__(self):
        return self.length

    def access(self, index: int, update: Callable[[Any], Any] = None) -> Any:
        """Returns the value at `index`; with `update`, stores update(value) there.

        The physical pattern is read(j), write(j) for every j in ascending order.
        """
        if not 0 <= index < self.length:
            raise BoundsException(
                f"Index {index} out of bounds for ORAM of length {self.length}"
            )
        result = None
        with self.backing.memory.meter.hold(2):
            for j in range(self.length):
                value = self.backing.read(j)
                if j == index:
                    result = value
                    if update is not None:
                        value = update(value)
                self.backing.write(j, value)
        return result

    def read(self, index: int) -> Any:
        return self.access(index)

    def write(self, index: int, payload: Any) -> None:
        self.access(index, lambda _: payload)

    def snapshot(self) -> List[Any]:
        return self.backing.snapshot()


def oram_read(oram: OramArray, index: int) -> Any:
    return oram.read(index)


def oram_write(oram: OramArray, index: int, payload: Any) -> None:
    oram.write(index, payload)

