import itertools
import math
from collections import Counter

import numpy as np
import pytest
from scipy import stats

from odp_tools.extmem import BoundsException, ExternalMemory, capture_trace
from odp_tools.oprim import (
    OramArray,
    batcher_network,
    comparator_count,
    network_size,
    oblivious_shuffle,
    oblivious_sort,
    oram_read,
    oram_write,
    shuffle_event_count,
    sort_event_count,
)


def identity(value):
    return value


@pytest.mark.parametrize("length, size", [(1, 1), (2, 2), (3, 4), (8, 8), (9, 16)])
def test_network_size(length, size):
    assert network_size(length) == size


def test_comparator_count_of_eight():
    assert comparator_count(8) == 19
    assert sort_event_count(8) == 76


@pytest.mark.parametrize("length", range(1, 13))
def test_network_sorts_every_zero_one_input(length):
    network = batcher_network(length)
    for bits in itertools.product([0, 1], repeat=length):
        cells = list(bits)
        for low, high in network:
            if cells[high] < cells[low]:
                cells[low], cells[high] = cells[high], cells[low]
        assert cells == sorted(bits)


def test_network_only_touches_real_cells():
    assert all(high < 5 for _, high in batcher_network(5))


def test_oblivious_sort(memory, rng):
    values = [int(v) for v in rng.integers(0, 100, size=37)]
    arr = memory.allocate("a", cells=values)

    oblivious_sort(arr, identity)

    assert arr.snapshot() == sorted(values)


@pytest.mark.parametrize("instances", [500, pytest.param(10 ** 4, marks=pytest.mark.slow)])
def test_oblivious_sort_matches_reference_sort(rng, instances):
    for _ in range(instances):
        length = int(rng.integers(1, 65))
        values = [int(v) for v in rng.integers(-50, 50, size=length)]
        memory = ExternalMemory(keep_events=False)
        arr = memory.allocate("a", cells=values)

        oblivious_sort(arr, identity)

        assert arr.snapshot() == sorted(values)


def test_oblivious_sort_by_key(memory):
    arr = memory.allocate("a", cells=[(1, "b"), (0, "z"), (1, "a")])

    oblivious_sort(arr, lambda cell: cell[1])

    assert arr.snapshot() == [(1, "a"), (1, "b"), (0, "z")]


def test_sort_trace_is_input_independent():
    traces = []
    for values in ([3, 1, 2], [9, 8, 7]):
        memory = ExternalMemory()
        arr = memory.allocate("a", cells=values)
        traces.append(capture_trace(memory, lambda: oblivious_sort(arr, identity)).dumps())

    assert traces[0] == traces[1]


@pytest.mark.parametrize("length", [1, 2, 7, 16, 33])
def test_sort_event_count(memory, length):
    arr = memory.allocate("a", cells=list(range(length, 0, -1)))

    trace = capture_trace(memory, lambda: oblivious_sort(arr, identity))

    assert len(trace) == sort_event_count(length)


def test_shuffle_is_a_permutation(memory, rng):
    values = list(range(20))
    arr = memory.allocate("a", cells=values)

    trace = capture_trace(memory, lambda: oblivious_shuffle(arr, rng))

    assert sorted(arr.snapshot()) == values
    assert len(trace) == shuffle_event_count(20)


def test_shuffle_trace_depends_on_length_only(rng):
    seed = int(rng.integers(0, 2 ** 32))
    traces = []
    for values in (["x"] * 6, list(range(6))):
        memory = ExternalMemory()
        arr = memory.allocate("a", cells=values)
        generator = np.random.default_rng(seed)
        traces.append(capture_trace(memory, lambda: oblivious_shuffle(arr, generator)).dumps())

    assert traces[0] == traces[1]


@pytest.mark.parametrize("length", [2, 3, 4])
def test_shuffle_is_uniform(rng, length):
    orders = math.factorial(length)
    counts = Counter()
    for _ in range(1000 * orders):
        memory = ExternalMemory(keep_events=False)
        arr = memory.allocate("a", cells=list(range(length)))
        oblivious_shuffle(arr, rng)
        counts[tuple(arr.snapshot())] += 1

    assert len(counts) == orders
    assert stats.chisquare(list(counts.values())).pvalue > 0.001


def test_shuffle_empty_array(memory, rng):
    with pytest.raises(ValueError):
        oblivious_shuffle(memory.allocate("a"), rng)


def test_oram_read_write(memory):
    oram = OramArray(memory, "oram", 4)

    oram_write(oram, 2, 5)
    assert oram_read(oram, 2) == 5
    assert oram.access(2, lambda value: value + 1) == 5
    assert oram.snapshot() == [0, 0, 6, 0]


def test_oram_access_scans_every_cell(memory):
    oram = OramArray(memory, "oram", 3)

    trace = capture_trace(memory, lambda: oram.read(1))

    assert trace.dumps() == (
        "0,read,oram,0\n1,write,oram,0\n"
        "2,read,oram,1\n3,write,oram,1\n"
        "4,read,oram,2\n5,write,oram,2\n"
    )


def test_oram_trace_is_index_independent(memory):
    oram = OramArray(memory, "oram", 5)

    traces = [capture_trace(memory, lambda: oram.write(i, i)).dumps() for i in range(5)]

    assert len(set(traces)) == 1


def test_oram_out_of_bounds(memory):
    oram = OramArray(memory, "oram", 2)

    with pytest.raises(BoundsException):
        oram.read(2)
    assert len(memory.capture()) == 0
