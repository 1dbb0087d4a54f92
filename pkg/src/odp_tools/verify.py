"""Empirical checks of obliviousness, trace differential privacy and utility

Every check returns `CheckRow`s that are written as CSV (`name, metric, bound,
observed, pass`) and summarised for humans. All randomness derives from one
master seed through `numpy.random.SeedSequence`, so every run is replayable.
"""
import csv
import logging
import math
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial
from typing import Any, Callable, Dict, Hashable, List, Optional, Sequence

import numpy as np
from scipy import stats

from . import datasets
from .extmem import ExternalMemory, PrivateMemoryMeter, capture_trace
from .files import ensure_path_for_file_exists
from .noise import (
    LaplaceNoise,
    PrivacyParams,
    ScriptedNoise,
    padding_constant,
    truncated_noise_vector,
    truncation_bound,
)
from .oprim import OramArray, oblivious_shuffle, oblivious_sort
from .queries import (
    Database,
    distinct_sort_odp,
    distinct_stream_odp,
    freq_oracle_build,
    freq_oracle_query,
    heavy_hitters_odp,
    histogram_naive,
    histogram_odp,
    histogram_oram,
    round_robin_share,
    trace_write_counts,
)
from .sketches import count_min_dimensions

logger = logging.getLogger(__name__)

DEFAULT_SLACK = 0.3
DEFAULT_MIN_BIN_COUNT = 1000
CONFIDENCE = 0.95
REPORT_HEADER = ["name", "metric", "bound", "observed", "pass"]


class NotNeighborsException(ValueError):
    pass


@dataclass
class CheckRow:
    name: str
    metric: str
    bound: float
    observed: float
    passed: bool

    def to_csv_row(self):
        return [self.name, self.metric, repr(self.bound), repr(self.observed), str(self.passed).lower()]


@dataclass
class Divergence:
    input_index: int
    event_index: int
    expected: str
    observed: str


@dataclass
class ObliviousnessReport:
    passed: bool
    inputs_checked: int
    divergence: Optional[Divergence] = None


@dataclass
class EpsilonEstimate:
    epsilon: float
    lower: float
    upper: float
    bins_used: int
    trials: int


def write_report_csv(rows: Sequence[CheckRow], file_path: str) -> None:
    ensure_path_for_file_exists(file_path)
    with open(file_path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(REPORT_HEADER)
        writer.writerows(row.to_csv_row() for row in rows)


def format_summary(rows: Sequence[CheckRow]) -> str:
    lines = []
    for row in rows:
        status = "PASS" if row.passed else "FAIL"
        lines.append(
            f"{status}  {row.name}: {row.metric} observed {row.observed:.6g}, bound {row.bound:.6g}"
        )
    failed = sum(not row.passed for row in rows)
    lines.append(f"{len(rows) - failed}/{len(rows)} checks passed")
    return "\n".join(lines)


def _child_generators(seed: int, count: int) -> List[np.random.Generator]:
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(count)]


# Traced algorithms: (memory, types, rng) -> result


def run_sort(memory: ExternalMemory, types: Sequence[int], rng, **_):
    db = Database.from_types(memory, types)
    oblivious_sort(db.records, lambda record: record.item_type)


def run_shuffle(memory: ExternalMemory, types: Sequence[int], rng, **_):
    db = Database.from_types(memory, types)
    oblivious_shuffle(db.records, rng)


def run_oram(memory: ExternalMemory, types: Sequence[int], rng, *, k: int, **_):
    """Reads and rewrites slot type-1 for every type in the input"""
    oram = OramArray(memory, "oram", k)
    for item_type in types:
        value = oram.read(item_type - 1)
        oram.write(item_type - 1, value + 1)


def run_histogram_oram(memory, types, rng, *, k: int, epsilon: float, **_):
    return histogram_oram(
        Database.from_types(memory, types), k, PrivacyParams(epsilon), rng=rng
    )


def run_histogram_odp(memory, types, rng, *, k: int, epsilon: float, **_):
    return histogram_odp(
        Database.from_types(memory, types), k, PrivacyParams(epsilon), rng=rng
    )


def run_histogram_naive(memory, types, rng, *, k: int, epsilon: float, **_):
    return histogram_naive(
        Database.from_types(memory, types), k, PrivacyParams(epsilon), rng=rng
    )


def run_distinct_sort(memory, types, rng, *, epsilon: float, **_):
    return distinct_sort_odp(Database.from_types(memory, types), PrivacyParams(epsilon), rng=rng)


def run_distinct_stream(memory, types, rng, *, epsilon: float, alpha: float = 0.1, **_):
    return distinct_stream_odp(
        Database.from_types(memory, types), PrivacyParams(epsilon), alpha, rng=rng
    )


def run_freq_oracle(memory, types, rng, *, epsilon: float, alpha: float = 0.1, theta: float = 0.05, **_):
    return freq_oracle_build(
        Database.from_types(memory, types), alpha, theta, PrivacyParams(epsilon), rng=rng
    )


TRACED_ALGORITHMS: Dict[str, Callable] = {
    "sort": run_sort,
    "shuffle": run_shuffle,
    "oram": run_oram,
    "histogram-oram": run_histogram_oram,
    "histogram": run_histogram_odp,
    "naive-histogram": run_histogram_naive,
    "distinct": run_distinct_sort,
    "distinct-stream": run_distinct_stream,
    "freq-oracle": run_freq_oracle,
}


def check_exact_obliviousness(
    algorithm: Callable, inputs: Sequence[Sequence[int]], seed: int = 0
) -> ObliviousnessReport:
    """Runs `algorithm` on every input with the same randomness tape and
    compares the serialized traces byte for byte against the first input."""
    if not inputs:
        raise ValueError("Need at least one input")
    if len({len(types) for types in inputs}) != 1:
        raise ValueError("All inputs must have the same size")

    reference = None
    for input_index, types in enumerate(inputs):
        memory = ExternalMemory()
        rng = np.random.default_rng(seed)
        trace = capture_trace(memory, lambda: algorithm(memory, types, rng))
        if reference is None:
            reference = trace
            continue
        if trace.dumps() != reference.dumps():
            position = reference.first_divergence(trace)

            def line(events):
                return events[position].to_line() if position < len(events) else "<end>"

            divergence = Divergence(
                input_index, position, line(reference.events), line(trace.events)
            )
            logger.warning("Traces diverge at input %d, event %d", input_index, position)
            return ObliviousnessReport(False, input_index + 1, divergence)
    return ObliviousnessReport(True, len(inputs))


def check_neighbors(types1: Sequence[int], types2: Sequence[int]) -> None:
    """Raises unless the databases have the same size and differ in at most one record"""
    if len(types1) != len(types2):
        raise NotNeighborsException(
            f"Databases have different sizes {len(types1)} and {len(types2)}"
        )
    differing = sum(a != b for a, b in zip(types1, types2))
    if differing > 1:
        raise NotNeighborsException(f"Databases differ in {differing} records")


def histogram_trace_statistic(
    types: Sequence[int], rng: np.random.Generator, *, k: int, epsilon: float, zero_noise: bool = False
) -> tuple:
    """Counter write counts observed in a full traced run of `histogram_odp`"""
    memory = ExternalMemory()
    db = Database.from_types(memory, types)
    noise = LaplaceNoise(rng, zero_noise=zero_noise)
    trace = capture_trace(
        memory, lambda: histogram_odp(db, k, PrivacyParams(epsilon), rng=rng, noise=noise)
    )
    return tuple(trace_write_counts(trace, k))


def histogram_configuration_statistic(
    types: Sequence[int], rng: np.random.Generator, *, k: int, epsilon: float, zero_noise: bool = False
) -> tuple:
    """The same statistic as `histogram_trace_statistic`, derived from the noise draw.

    After the shuffle the scan is deterministic, so the write counts are
    n_i + C + X_i plus the round-robin share of the k*C - sum(X) dummies.
    Consumes the generator exactly like the traced run up to the shuffle.
    """
    n = len(types)
    c = padding_constant(n, epsilon)
    noise_vector = truncated_noise_vector(k, epsilon, n, LaplaceNoise(rng, zero_noise=zero_noise))
    shares = round_robin_share(k * c - sum(noise_vector.values), k)
    truth = datasets.true_histogram(types, k)
    return tuple(t + c + x + s for t, x, s in zip(truth, noise_vector.values, shares))


def _clopper_pearson(count: int, total: int, confidence: float = CONFIDENCE):
    alpha = 1 - confidence
    lower = stats.beta.ppf(alpha / 2, count, total - count + 1) if count > 0 else 0.0
    upper = stats.beta.ppf(1 - alpha / 2, count + 1, total - count) if count < total else 1.0
    return float(lower), float(upper)


def _log_ratio(numerator: float, denominator: float) -> float:
    if numerator <= 0:
        return 0.0
    if denominator <= 0:
        return math.inf
    return math.log(numerator / denominator)


def estimate_epsilon_from_samples(
    samples1: Sequence[Hashable],
    samples2: Sequence[Hashable],
    *,
    min_bin_count: int = DEFAULT_MIN_BIN_COUNT,
) -> EpsilonEstimate:
    """Largest add-one-smoothed |log ratio| of bin frequencies between two samples

    Only bins observed at least `min_bin_count` times across both samples take
    part; the interval is the Clopper-Pearson interval of the winning bin.
    """
    counts1, counts2 = Counter(samples1), Counter(samples2)
    total1, total2 = len(samples1), len(samples2)
    bins = set(counts1) | set(counts2)
    smoothing = len(bins)

    best = None
    bins_used = 0
    for value in bins:
        c1, c2 = counts1.get(value, 0), counts2.get(value, 0)
        if c1 + c2 < min_bin_count:
            continue
        bins_used += 1
        p1 = (c1 + 1) / (total1 + smoothing)
        p2 = (c2 + 1) / (total2 + smoothing)
        ratio = abs(math.log(p1 / p2))
        if best is None or ratio > best[0]:
            best = (ratio, c1, c2)

    if best is None:
        return EpsilonEstimate(0.0, 0.0, 0.0, 0, min(total1, total2))

    ratio, c1, c2 = best
    if c1 < c2:
        c1, c2, total1, total2 = c2, c1, total2, total1
    low1, high1 = _clopper_pearson(c1, total1)
    low2, high2 = _clopper_pearson(c2, total2)
    lower = max(0.0, _log_ratio(low1, high2))
    upper = _log_ratio(high1, low2)
    return EpsilonEstimate(ratio, lower, upper, bins_used, min(total1, total2))


def _statistic_samples(
    statistic: Callable, types: Sequence[int], seeds, workers: int
) -> List[Hashable]:
    def generators():
        return (np.random.default_rng(seed) for seed in seeds)

    if workers <= 1:
        return [statistic(types, rng) for rng in generators()]
    with ProcessPoolExecutor(max_workers=workers) as executor:
        return list(
            executor.map(
                partial(_run_statistic, statistic, types),
                seeds,
                chunksize=max(1, len(seeds) // (8 * workers)),
            )
        )


def _run_statistic(statistic, types, seed):
    return statistic(types, np.random.default_rng(seed))


def estimate_trace_epsilon(
    statistic: Callable[[Sequence[int], np.random.Generator], Hashable],
    types1: Sequence[int],
    types2: Sequence[int],
    trials: int,
    *,
    seed: int = 0,
    project: Optional[Callable[[Any], Hashable]] = None,
    min_bin_count: int = DEFAULT_MIN_BIN_COUNT,
    workers: int = 1,
) -> EpsilonEstimate:
    """Estimates the epsilon of the trace statistic between two neighbors.

    `statistic` must be picklable when `workers` > 1. `project` post-processes
    each statistic before binning, e.g. to the coordinates where the neighbors
    differ.
    """
    check_neighbors(types1, types2)
    seeds1, seeds2 = np.random.SeedSequence(seed).spawn(2)
    samples = []
    for types, side in ((types1, seeds1), (types2, seeds2)):
        values = _statistic_samples(statistic, types, side.spawn(trials), workers)
        if project is not None:
            values = [project(value) for value in values]
        samples.append(values)
    return estimate_epsilon_from_samples(*samples, min_bin_count=min_bin_count)


def differing_coordinates(types1: Sequence[int], types2: Sequence[int], k: int) -> Callable:
    """Projection of a k-vector statistic onto the types whose counts differ"""
    h1, h2 = datasets.true_histogram(types1, k), datasets.true_histogram(types2, k)
    coordinates = [i for i in range(k) if h1[i] != h2[i]] or [0]
    return partial(_project, coordinates)


def _project(coordinates, value):
    return tuple(value[i] for i in coordinates)


def laplace_calibration(
    k: int,
    epsilon: float,
    trials: int,
    *,
    seed: int = 0,
    min_bin_count: int = DEFAULT_MIN_BIN_COUNT,
) -> EpsilonEstimate:
    """Runs the estimator on k independent Lap(2/epsilon) counts of neighboring
    histograms, whose true epsilon is known to be `epsilon`."""
    if k < 2:
        raise ValueError("Calibration needs k >= 2")
    rng1, rng2 = _child_generators(seed, 2)
    base = np.full(k, 10)
    shifted = base.copy()
    shifted[0] += 1
    shifted[1] -= 1

    def sample(histogram, rng):
        noise = LaplaceNoise(rng).sample_vector(2 / epsilon, trials * k).reshape(trials, k)
        values = np.floor(histogram + noise).astype(int)
        return [(int(row[0]), int(row[1])) for row in values]

    return estimate_epsilon_from_samples(
        sample(base, rng1), sample(shifted, rng2), min_bin_count=min_bin_count
    )


def neighbor_pair(n: int, k: int, seed: int):
    """A uniform database over 1..k and its neighbor with record 0 moved to another type"""
    types1 = datasets.generate_types(n, k, np.random.default_rng(seed))
    types2 = list(types1)
    types2[0] = types1[0] % k + 1
    return types1, types2


def trace_dp_suite(
    *,
    n: int,
    k: int,
    epsilon: float,
    trials: int,
    seed: int = 0,
    slack: float = DEFAULT_SLACK,
    strawman_bound: float = 3.0,
    min_bin_count: int = DEFAULT_MIN_BIN_COUNT,
    full_trace: bool = False,
    workers: int = 1,
) -> List[CheckRow]:
    types1, types2 = neighbor_pair(n, k, seed)
    project = differing_coordinates(types1, types2, k)
    statistic_function = histogram_trace_statistic if full_trace else histogram_configuration_statistic

    calibration = laplace_calibration(
        k, epsilon, trials, seed=seed + 1, min_bin_count=min_bin_count
    )
    estimate = estimate_trace_epsilon(
        partial(statistic_function, k=k, epsilon=epsilon),
        types1,
        types2,
        trials,
        seed=seed + 2,
        project=project,
        min_bin_count=min_bin_count,
        workers=workers,
    )
    strawman = estimate_trace_epsilon(
        partial(statistic_function, k=k, epsilon=epsilon, zero_noise=True),
        types1,
        types2,
        trials,
        seed=seed + 3,
        project=project,
        min_bin_count=min_bin_count,
        workers=workers,
    )
    logger.info(
        "Trace epsilon %.3f [%.3f, %.3f] over %d bins",
        estimate.epsilon,
        estimate.lower,
        estimate.upper,
        estimate.bins_used,
    )
    return [
        CheckRow(
            "laplace-calibration",
            "abs(eps_hat-eps)",
            slack,
            abs(calibration.epsilon - epsilon),
            abs(calibration.epsilon - epsilon) <= slack,
        ),
        CheckRow(
            "histogram-trace-dp",
            "eps_hat",
            epsilon + slack,
            estimate.epsilon,
            estimate.epsilon <= epsilon + slack,
        ),
        CheckRow(
            "histogram-strawman",
            "eps_hat>bound",
            strawman_bound,
            strawman.epsilon,
            strawman.epsilon > strawman_bound,
        ),
    ]


def obliviousness_suite(
    algorithm: str,
    *,
    n: int,
    k: int,
    epsilon: float,
    inputs: int,
    seed: int = 0,
) -> List[CheckRow]:
    run = partial(TRACED_ALGORITHMS[algorithm], k=k, epsilon=epsilon)
    generators = _child_generators(seed, inputs)
    databases = [datasets.generate_types(n, k, rng) for rng in generators]
    report = check_exact_obliviousness(run, databases, seed=seed)
    if report.divergence is not None:
        logger.warning(
            "First divergence at input %d event %d: expected %s, observed %s",
            report.divergence.input_index,
            report.divergence.event_index,
            report.divergence.expected,
            report.divergence.observed,
        )
    observed = report.divergence.event_index if report.divergence else -1
    return [
        CheckRow(
            f"{algorithm}-obliviousness",
            "first_divergent_event",
            -1,
            observed,
            report.passed,
        )
    ]


def binomial_floor(rate: float, trials: int) -> float:
    """rate minus three binomial standard deviations"""
    return rate - 3 * math.sqrt(rate * (1 - rate) / trials)


def _rate_row(name: str, successes: int, total: int, target: float) -> CheckRow:
    observed = successes / total if total else 1.0
    floor = binomial_floor(target, total) if total else target
    return CheckRow(name, "pass_rate", floor, observed, observed >= floor)


def _memory_row(name: str, peaks: List[float]) -> CheckRow:
    worst = max(peaks) if peaks else 0.0
    return CheckRow(name, "peak/capacity", 1.0, worst, worst <= 1.0)


@dataclass
class UtilityConfig:
    n: int
    k: int = 16
    m: int = 2 ** 16
    epsilon: float = 1.0
    theta: float = 0.05
    alpha: float = 0.1
    trials: int = 100
    seed: int = 0
    distribution: str = "uniform"
    zipf_s: float = 1.2
    stream_rate: float = 0.85


def _metered_database(types, n):
    memory = ExternalMemory(meter=PrivateMemoryMeter.for_size(n), keep_events=False)
    return Database.from_types(memory, types)


def _histogram_utility(config: UtilityConfig) -> List[CheckRow]:
    # +1: the released noise is the Laplace draw rounded up
    bound = math.log(config.k / config.theta) * 2 / config.epsilon + 1
    successes, peaks = 0, []
    for rng in _child_generators(config.seed, config.trials):
        types = datasets.generate_types(
            config.n, config.k, rng, distribution=config.distribution, s=config.zipf_s
        )
        db = _metered_database(types, config.n)
        result = histogram_odp(db, config.k, PrivacyParams(config.epsilon), rng=rng)
        truth = datasets.true_histogram(types, config.k)
        error = max(abs(a - b) for a, b in zip(result.counts, truth))
        successes += error <= bound
        peaks.append(db.memory.meter.peak_words / db.memory.meter.capacity_words)

    # rigged tape: one draw past the truncation bound must zero the whole vector
    rng = np.random.default_rng(config.seed)
    types = datasets.generate_types(config.n, config.k, rng)
    tape = [truncation_bound(config.n, config.epsilon) + 1] + [0.5] * (config.k - 1)
    result = histogram_odp(
        _metered_database(types, config.n),
        config.k,
        PrivacyParams(config.epsilon),
        rng=rng,
        noise=ScriptedNoise(tape),
        debug=True,
    )
    fallback_ok = result.debug_noise.truncated_flag and result.counts == [
        float(c) for c in datasets.true_histogram(types, config.k)
    ]
    return [
        _rate_row("histogram-max-error", successes, config.trials, 1 - config.theta),
        CheckRow("histogram-truncation-fallback", "exact_counts", 1, int(fallback_ok), fallback_ok),
        _memory_row("histogram-private-memory", peaks),
    ]


def _distinct_utility(config: UtilityConfig) -> List[CheckRow]:
    bound = math.log(1 / config.theta) / config.epsilon
    successes = 0
    for rng in _child_generators(config.seed, config.trials):
        types = datasets.generate_types(config.n, config.k, rng, distribution=config.distribution, s=config.zipf_s)
        db = _metered_database(types, config.n)
        estimate = distinct_sort_odp(db, PrivacyParams(config.epsilon), rng=rng)
        successes += abs(estimate - datasets.distinct_count(types)) <= bound
    return [_rate_row("distinct-sort-error", successes, config.trials, 1 - config.theta)]


def _distinct_stream_utility(config: UtilityConfig) -> List[CheckRow]:
    additive = math.log(1 / config.theta) / config.epsilon
    successes, peaks = 0, []
    for rng in _child_generators(config.seed, config.trials):
        types = datasets.generate_types(config.n, config.m, rng, distribution=config.distribution, s=config.zipf_s)
        db = _metered_database(types, config.n)
        estimate = distinct_stream_odp(db, PrivacyParams(config.epsilon), config.alpha, rng=rng)
        truth = datasets.distinct_count(types)
        successes += abs(estimate - truth) <= config.alpha * truth + additive
        peaks.append(db.memory.meter.peak_words / db.memory.meter.capacity_words)
    observed = successes / config.trials
    return [
        CheckRow(
            "distinct-stream-error",
            "pass_rate",
            config.stream_rate,
            observed,
            observed >= config.stream_rate,
        ),
        _memory_row("distinct-stream-private-memory", peaks),
    ]


def _heavy_hitters_utility(config: UtilityConfig) -> List[CheckRow]:
    n, k, m = config.n, config.k, config.m
    bound = math.log(m / config.theta) * 2 / config.epsilon
    floor = n / k - 2 * bound
    within, reported, floor_violations = 0, 0, 0
    complete = 0
    for rng in _child_generators(config.seed, config.trials):
        types = datasets.generate_types(n, m, rng, distribution="zipf", s=config.zipf_s)
        truth = datasets.true_frequencies(types)
        result = heavy_hitters_odp(
            _metered_database(types, n), k, m, PrivacyParams(config.epsilon), config.theta, rng=rng
        )
        for item, noisy in result.entries:
            reported += 1
            within += abs(noisy - truth[item]) <= bound
            floor_violations += truth[item] < floor

        exact = heavy_hitters_odp(
            _metered_database(types, n),
            k,
            m,
            PrivacyParams(config.epsilon),
            config.theta,
            rng=rng,
            noise=LaplaceNoise(rng, zero_noise=True),
        )
        heavy = {item for item, count in truth.items() if count > n / k}
        complete += heavy <= set(exact.items)
    return [
        _rate_row("heavy-hitters-item-error", within, reported, 1 - config.theta),
        CheckRow("heavy-hitters-floor", "violations", 0, floor_violations, floor_violations == 0),
        CheckRow(
            "heavy-hitters-completeness",
            "zero_noise_rate",
            1.0,
            complete / config.trials,
            complete == config.trials,
        ),
    ]


def _freq_oracle_utility(config: UtilityConfig) -> List[CheckRow]:
    width, depth = count_min_dimensions(config.alpha, config.theta)
    # failure probability theta' of the noise union bound
    theta_noise = config.theta
    bound_noise = math.log(depth * width / theta_noise) * 2 * depth / config.epsilon
    within, queried, underestimates, peaks = 0, 0, 0, []
    for rng in _child_generators(config.seed, config.trials):
        types = datasets.generate_types(config.n, config.m, rng, distribution="zipf", s=config.zipf_s)
        truth = datasets.true_frequencies(types)
        seeds = [int(s) for s in rng.integers(0, 2 ** 32, size=depth)]
        db = _metered_database(types, config.n)
        noisy = freq_oracle_build(
            db, config.alpha, config.theta, PrivacyParams(config.epsilon), rng=rng, seeds=seeds
        )
        peaks.append(db.memory.meter.peak_words / db.memory.meter.capacity_words)
        exact = freq_oracle_build(
            _metered_database(types, config.n),
            config.alpha,
            config.theta,
            PrivacyParams(config.epsilon),
            rng=rng,
            noise=LaplaceNoise(rng, zero_noise=True),
            seeds=seeds,
        )
        bound = config.alpha * config.n + bound_noise
        for item, count in truth.items():
            queried += 1
            within += abs(freq_oracle_query(noisy, item) - count) <= bound
            underestimates += freq_oracle_query(exact, item) < count
    return [
        _rate_row("freq-oracle-error", within, queried, 1 - config.theta - theta_noise),
        CheckRow("freq-oracle-no-underestimate", "violations", 0, underestimates, underestimates == 0),
        _memory_row("freq-oracle-private-memory", peaks),
    ]


UTILITY_CHECKS: Dict[str, Callable[[UtilityConfig], List[CheckRow]]] = {
    "histogram": _histogram_utility,
    "distinct": _distinct_utility,
    "distinct-stream": _distinct_stream_utility,
    "heavy-hitters": _heavy_hitters_utility,
    "freq-oracle": _freq_oracle_utility,
}


def utility_suite(algorithm: str, config: UtilityConfig) -> List[CheckRow]:
    """Per-bound pass rates of `algorithm` over `config.trials` generated databases"""
    if algorithm not in UTILITY_CHECKS:
        raise ValueError(f"No utility checks for {algorithm}")
    rows = UTILITY_CHECKS[algorithm](config)
    for row in rows:
        if not row.passed:
            logger.warning("Utility check %s failed: %s", row.name, row)
    return rows
