"""Obliviously differentially private queries

Each query reads its input from a `Database` held in external memory and
leaves its access pattern in that memory's trace. Queries may reorder the
database array in place.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .extmem import AccessTrace, ExternalArray, ExternalMemory, WRITE
from .noise import (
    LaplaceNoise,
    NoiseVector,
    PrivacyParams,
    padding_constant,
    truncated_noise_vector,
)
from .oprim import (
    OramArray,
    SortKey,
    oblivious_shuffle,
    oblivious_sort,
    shuffle_event_count,
)
from .sketches import CountMinSketch, KmvSketch, count_min_dimensions, kmv_capacity

logger = logging.getLogger(__name__)

DEFAULT_TAU = 2.0
COUNTER_ARRAY_ID = "b"
AUGMENTED_ARRAY_ID = "augmented"
RUNS_ARRAY_ID = "runs"


class ConfigurationException(ValueError):
    pass


@dataclass(frozen=True)
class Record:
    record_id: int
    item_type: int


def dummy_type(k: int) -> int:
    return k + 1


@dataclass
class Database:
    records: ExternalArray

    @property
    def n(self) -> int:
        return len(self.records)

    @property
    def memory(self) -> ExternalMemory:
        return self.records.memory

    @classmethod
    def from_types(
        cls,
        memory: ExternalMemory,
        types: Iterable[int],
        *,
        domain: Optional[int] = None,
        array_id: str = "db",
    ) -> "Database":
        """Loads records with ids 0..n-1 carrying `types` into `memory`"""
        return cls.from_records(
            memory,
            [Record(i, int(t)) for i, t in enumerate(types)],
            domain=domain,
            array_id=array_id,
        )

    @classmethod
    def from_records(
        cls,
        memory: ExternalMemory,
        records: Sequence[Record],
        *,
        domain: Optional[int] = None,
        array_id: str = "db",
    ) -> "Database":
        seen_ids = set()
        for record in records:
            if record.record_id < 0 or record.record_id in seen_ids:
                raise ConfigurationException(
                    f"Record ids must be unique and nonnegative, got {record.record_id}"
                )
            seen_ids.add(record.record_id)
            if record.item_type < 1 or (
                domain is not None and record.item_type > domain
            ):
                raise ConfigurationException(
                    f"Record {record.record_id} has type {record.item_type} outside the domain"
                )
        return cls(memory.allocate(array_id, cells=records))

    def types(self) -> List[int]:
        """The record types, read outside the adversary model"""
        return [record.item_type for record in self.records.snapshot()]


@dataclass
class NoisyHistogram:
    counts: List[float]
    params: PrivacyParams
    padding_constant: int = 0
    debug_noise: Optional[NoiseVector] = None

    def to_dict(self) -> Dict:
        result = {
            "counts": self.counts,
            "params": self.params.to_dict(),
            "padding_constant": self.padding_constant,
        }
        if self.debug_noise is not None:
            result["debug_noise"] = {
                "values": self.debug_noise.values,
                "truncated": self.debug_noise.truncated_flag,
            }
        return result


@dataclass
class HeavyHitterList:
    entries: List[Tuple[int, float]] = field(default_factory=list)

    @property
    def items(self) -> List[int]:
        return [item for item, _ in self.entries]

    def to_dict(self) -> Dict:
        return {"entries": [{"item": i, "count": c} for i, c in self.entries]}


def _validate_histogram_arguments(n: int, k: int) -> None:
    if not 1 <= k <= n:
        raise ConfigurationException(f"Histogram needs 1 <= k <= n, got k={k}, n={n}")
    if n < 2:
        raise ConfigurationException("Histogram needs at least two records")


def _validate_heavy_hitters_arguments(
    n: int, k: int, m: int, epsilon: float, theta: float, tau: float
) -> None:
    if k < 1 or m < 2:
        raise ConfigurationException(f"Heavy hitters needs k >= 1 and m >= 2, got k={k}, m={m}")
    if not 0 < theta < 1:
        raise ConfigurationException(f"theta must be in (0, 1), got {theta}")
    if tau <= 1:
        raise ConfigurationException(f"tau must exceed 1, got {tau}")
    if not n / k > tau / epsilon * math.log(m):
        raise ConfigurationException(
            f"Heavy hitters needs n/k > tau/epsilon * ln(m), got n/k={n / k:.3f}"
        )


def _noise_source(noise: Optional[LaplaceNoise], rng: np.random.Generator):
    return noise if noise is not None else LaplaceNoise(rng)


def _type_key(record: Record) -> SortKey:
    return SortKey(record.item_type, record.record_id)


def privacy_cost(
    query: str,
    epsilon: float,
    *,
    n: int,
    m: Optional[int] = None,
    tau: float = DEFAULT_TAU,
) -> PrivacyParams:
    """The (epsilon, delta) a query consumes from the budget"""
    if query == "histogram":
        return PrivacyParams(epsilon, 1 / n ** 2)
    if query == "heavy-hitters":
        if m is None:
            raise ConfigurationException("Heavy hitters needs the domain size m")
        return PrivacyParams(epsilon, 1 / m ** (tau - 1))
    return PrivacyParams(epsilon, 0.0)


def validate_query(
    query: str,
    epsilon: float,
    *,
    n: int,
    k: Optional[int] = None,
    m: Optional[int] = None,
    theta: float = 0.05,
    tau: float = DEFAULT_TAU,
) -> None:
    """Checks the preconditions of a query that depend only on public sizes.

    Raises `ConfigurationException` or `InvalidParameterException` before any
    record is read, so a failed check never has to be charged to a budget.
    """
    PrivacyParams(epsilon)
    if query in ("histogram", "histogram-oram"):
        if k is None:
            raise ConfigurationException(f"{query} needs the number of types k")
        _validate_histogram_arguments(n, k)
    elif query == "heavy-hitters":
        if k is None or m is None:
            raise ConfigurationException("Heavy hitters needs k and the domain size m")
        _validate_heavy_hitters_arguments(n, k, m, epsilon, theta, tau)
    elif n < 1:
        raise ConfigurationException(f"{query} needs at least one record")


def distinct_sort_odp(
    db: Database,
    params: PrivacyParams,
    *,
    rng: np.random.Generator,
    noise: Optional[LaplaceNoise] = None,
) -> float:
    """Distinct count by oblivious sort plus one boundary-counting scan, + Lap(1/epsilon)"""
    if db.n < 1:
        raise ConfigurationException("Distinct count needs at least one record")
    noise = _noise_source(noise, rng)
    oblivious_sort(db.records, _type_key)

    with db.memory.meter.hold(2):
        distinct = 0
        previous = None
        for i in range(db.n):
            item_type = db.records.read(i).item_type
            if item_type != previous:
                distinct += 1
            previous = item_type
    return distinct + noise.sample(1 / params.epsilon)


def distinct_stream_odp(
    db: Database,
    params: PrivacyParams,
    alpha: float,
    *,
    rng: np.random.Generator,
    noise: Optional[LaplaceNoise] = None,
    hash_seed: Optional[int] = None,
) -> float:
    """Single pass distinct count through a KMV sketch kept in private memory"""
    noise = _noise_source(noise, rng)
    if hash_seed is None:
        hash_seed = int(rng.integers(0, 2 ** 32))
    sketch = KmvSketch(kmv_capacity(alpha), hash_seed)
    with db.memory.meter.hold(sketch.words):
        for i in range(db.n):
            sketch.update(db.records.read(i).item_type)
        estimate = sketch.estimate()
    return estimate + noise.sample(1 / params.epsilon)


def histogram_odp(
    db: Database,
    k: int,
    params: PrivacyParams,
    *,
    rng: np.random.Generator,
    noise: Optional[LaplaceNoise] = None,
    debug: bool = False,
) -> NoisyHistogram:
    """Oblivious DP histogram via fake and dummy records and a shuffle.

    1. draw the truncated, rounded noise vector X
    2. append C + X_i fake records of each type i
    3. append k*C - sum(X) dummy records of type k+1, total length T = n + 2kC
    4. obliviously shuffle the augmented array
    5. scan it, incrementing b[type]; dummies fake-write b round-robin
    and finally subtract C from every counter.
    """
    n = db.n
    _validate_histogram_arguments(n, k)
    noise = _noise_source(noise, rng)
    memory = db.memory
    epsilon = params.epsilon

    c = padding_constant(n, epsilon)
    noise_vector = truncated_noise_vector(k, epsilon, n, noise)
    total = n + 2 * k * c

    augmented = memory.allocate(AUGMENTED_ARRAY_ID, total)
    counters = None
    try:
        with memory.meter.hold(k + 2):
            for i in range(n):
                record = db.records.read(i)
                if record.item_type > k:
                    raise ConfigurationException(
                        f"Record {record.record_id} has type {record.item_type} > k={k}"
                    )
                augmented.write(i, record)

            position = n
            for item_type, x in enumerate(noise_vector.values, start=1):
                for _ in range(c + x):
                    augmented.write(position, Record(-(position + 1), item_type))
                    position += 1
            while position < total:
                augmented.write(position, Record(-(position + 1), dummy_type(k)))
                position += 1

        oblivious_shuffle(augmented, rng)

        counters = memory.allocate(COUNTER_ARRAY_ID, k, fill=0)
        with memory.meter.hold(2):
            pointer = 0
            for j in range(total):
                item_type = augmented.read(j).item_type
                if item_type == dummy_type(k):
                    counters.write(pointer, counters.read(pointer))
                    pointer = (pointer + 1) % k
                else:
                    counters.write(item_type - 1, counters.read(item_type - 1) + 1)

            counts = []
            for i in range(k):
                value = counters.read(i) - c
                counters.write(i, value)
                counts.append(float(value))
    finally:
        memory.free(augmented)
        if counters is not None:
            memory.free(counters)
    return NoisyHistogram(
        counts=counts,
        params=PrivacyParams(epsilon, 1 / n ** 2),
        padding_constant=c,
        debug_noise=noise_vector if (debug or noise.zero_noise) else None,
    )


def histogram_odp_event_count(n: int, k: int, epsilon: float) -> int:
    """Exact trace length of `histogram_odp`"""
    c = padding_constant(n, epsilon)
    total = n + 2 * k * c
    copy_and_pad = 2 * n + (total - n)
    counting_scan = 3 * total
    release = 2 * k
    return copy_and_pad + shuffle_event_count(total) + counting_scan + release


def histogram_oram(
    db: Database,
    k: int,
    params: PrivacyParams,
    *,
    rng: np.random.Generator,
    noise: Optional[LaplaceNoise] = None,
) -> NoisyHistogram:
    """DP histogram whose counters sit in a linear-scan ORAM, fully oblivious"""
    n = db.n
    _validate_histogram_arguments(n, k)
    noise = _noise_source(noise, rng)
    memory = db.memory

    oram = OramArray(memory, COUNTER_ARRAY_ID, k, fill=0)
    backing = oram.backing
    try:
        with memory.meter.hold(1):
            for i in range(n):
                item_type = db.records.read(i).item_type
                if item_type > k:
                    raise ConfigurationException(f"Record type {item_type} > k={k}")
                oram.access(item_type - 1, lambda value: value + 1)

        # releasing every counter is one fixed scan, no ORAM needed
        counts = []
        for i in range(k):
            value = backing.read(i) + noise.sample(2 / params.epsilon)
            backing.write(i, value)
            counts.append(float(value))
    finally:
        memory.free(backing)
    return NoisyHistogram(counts=counts, params=PrivacyParams(params.epsilon))


def histogram_oram_event_count(n: int, k: int) -> int:
    return n + n * 2 * k + 2 * k


def histogram_naive(
    db: Database,
    k: int,
    params: PrivacyParams,
    *,
    rng: np.random.Generator,
    noise: Optional[LaplaceNoise] = None,
) -> NoisyHistogram:
    """Textbook Laplace histogram indexing the counters by type.

    Differentially private output, but the trace reveals every record's type.
    """
    n = db.n
    _validate_histogram_arguments(n, k)
    noise = _noise_source(noise, rng)
    counters = db.memory.allocate(COUNTER_ARRAY_ID, k, fill=0)
    try:
        for i in range(n):
            item_type = db.records.read(i).item_type
            counters.write(item_type - 1, counters.read(item_type - 1) + 1)
        counts = [
            float(counters.read(i) + noise.sample(2 / params.epsilon)) for i in range(k)
        ]
    finally:
        db.memory.free(counters)
    return NoisyHistogram(counts=counts, params=PrivacyParams(params.epsilon))


def histogram_private(
    db: Database,
    k: int,
    params: PrivacyParams,
    *,
    rng: np.random.Generator,
    noise: Optional[LaplaceNoise] = None,
) -> NoisyHistogram:
    """Histogram built in private memory in one scan, for k that fits there"""
    _validate_histogram_arguments(db.n, k)
    noise = _noise_source(noise, rng)
    with db.memory.meter.hold(k + 1):
        counts = [0] * k
        for i in range(db.n):
            item_type = db.records.read(i).item_type
            if item_type > k:
                raise ConfigurationException(f"Record type {item_type} > k={k}")
            counts[item_type - 1] += 1
        noisy = [float(c + noise.sample(2 / params.epsilon)) for c in counts]
    return NoisyHistogram(counts=noisy, params=PrivacyParams(params.epsilon))


def _noisy_runs(
    db: Database, params: PrivacyParams, noise: LaplaceNoise, domain: int
) -> ExternalArray:
    """Sorts the database by type and writes one (flag, noisy count, type) tuple per record

    The last tuple of every run of equal types carries flag 0 and its run length
    plus Lap(2/epsilon); all other tuples carry flag 1. The result is sorted by
    flag ascending, noisy count descending, type ascending. Types above `domain`
    are rejected during the first scan.
    """
    memory = db.memory
    n = db.n
    oblivious_sort(db.records, _type_key)

    runs = memory.allocate(RUNS_ARRAY_ID, n)
    try:
        with memory.meter.hold(2):
            previous = None
            count = 0
            for i in range(n):
                item_type = db.records.read(i).item_type
                if item_type > domain:
                    raise ConfigurationException(
                        f"Record type {item_type} outside the domain 1..{domain}"
                    )
                count = count + 1 if item_type == previous else 1
                previous = item_type
                runs.write(i, (item_type, count))

        with memory.meter.hold(2):
            following = None
            for i in reversed(range(n)):
                item_type, count = runs.read(i)
                if item_type != following:
                    runs.write(i, (0, count + noise.sample(2 / params.epsilon), item_type))
                else:
                    runs.write(i, (1, float(count), item_type))
                following = item_type

        oblivious_sort(runs, lambda cell: SortKey((cell[0], -cell[1]), cell[2]))
    except Exception:
        memory.free(runs)
        raise
    return runs


def heavy_hitters_odp(
    db: Database,
    k: int,
    m: int,
    params: PrivacyParams,
    theta: float,
    *,
    rng: np.random.Generator,
    noise: Optional[LaplaceNoise] = None,
    tau: float = DEFAULT_TAU,
) -> HeavyHitterList:
    """Items whose noisy count reaches n/k, at most k of them

    `theta` is the failure probability the caller's error bounds refer to; the
    procedure itself does not depend on it.
    """
    n = db.n
    _validate_heavy_hitters_arguments(n, k, m, params.epsilon, theta, tau)
    noise = _noise_source(noise, rng)
    runs = _noisy_runs(db, params, noise, m)

    threshold = n / k
    entries = []
    try:
        with db.memory.meter.hold(2 * k + 2):
            for i in range(min(k, n)):
                flag, noisy_count, item_type = runs.read(i)
                if flag == 0 and noisy_count >= threshold:
                    entries.append((item_type, noisy_count))
    finally:
        db.memory.free(runs)
    return HeavyHitterList(entries=entries)


def histogram_sort_odp(
    db: Database,
    k: int,
    params: PrivacyParams,
    *,
    rng: np.random.Generator,
    noise: Optional[LaplaceNoise] = None,
) -> NoisyHistogram:
    """Histogram from the heavy-hitters runs: one noisy count per present type,
    types absent from the database get Lap(2/epsilon) alone."""
    _validate_histogram_arguments(db.n, k)
    noise = _noise_source(noise, rng)
    runs = _noisy_runs(db, params, noise, k)
    try:
        with db.memory.meter.hold(k + 2):
            counts: List[Optional[float]] = [None] * k
            for i in range(db.n):
                flag, noisy_count, item_type = runs.read(i)
                if flag == 0:
                    counts[item_type - 1] = noisy_count
            released = [
                count if count is not None else noise.sample(2 / params.epsilon)
                for count in counts
            ]
    finally:
        db.memory.free(runs)
    return NoisyHistogram(counts=[float(c) for c in released], params=params)


def freq_oracle_build(
    db: Database,
    alpha: float,
    theta: float,
    params: PrivacyParams,
    *,
    rng: np.random.Generator,
    noise: Optional[LaplaceNoise] = None,
    seeds: Optional[Sequence[int]] = None,
) -> CountMinSketch:
    """One pass count-min sketch in private memory, released with Lap(2d/epsilon) per cell"""
    noise = _noise_source(noise, rng)
    width, depth = count_min_dimensions(alpha, theta)
    if seeds is None:
        seeds = [int(seed) for seed in rng.integers(0, 2 ** 32, size=depth)]
    sketch = CountMinSketch(width, depth, seeds)
    with db.memory.meter.hold(sketch.words):
        for i in range(db.n):
            sketch.update(db.records.read(i).item_type)
        scale = 2 * depth / params.epsilon
        sketch.table = sketch.table + noise.sample_vector(
            scale, width * depth
        ).reshape(depth, width)
    return sketch


def freq_oracle_query(sketch: CountMinSketch, item: int) -> float:
    return sketch.query(item)


def trace_write_counts(trace: AccessTrace, k: int) -> List[int]:
    """Per-counter write counts an observer tallies from a `histogram_odp` trace.

    Only the counting scan is tallied; the final release writes every
    counter once and is excluded.
    """
    counts = [0] * k
    for event in trace.events:
        if event.kind == WRITE and event.array_id == COUNTER_ARRAY_ID:
            counts[event.index] += 1
    return [count - 1 for count in counts]


def round_robin_share(dummies: int, k: int) -> List[int]:
    """How many of `dummies` round-robin fake writes land on each counter"""
    return [dummies // k + (1 if i < dummies % k else 0) for i in range(k)]


def augmented_histogram(
    write_counts: Sequence[int], n: int, k: int, epsilon: float, noise_total: int
) -> Tuple[List[int], int]:
    """Recovers (real + fake count per type, dummy count) from counter write counts.

    `noise_total` is sum(X); it fixes the dummy count k*C - sum(X).
    """
    c = padding_constant(n, epsilon)
    dummies = k * c - noise_total
    shares = round_robin_share(dummies, k)
    return [w - s for w, s in zip(write_counts, shares)], dummies
