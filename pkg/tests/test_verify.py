import csv
from functools import partial

import numpy as np
import pytest

from odp_tools.datasets import generate_types
from odp_tools.verify import (
    CheckRow,
    NotNeighborsException,
    UtilityConfig,
    check_exact_obliviousness,
    check_neighbors,
    differing_coordinates,
    estimate_epsilon_from_samples,
    estimate_trace_epsilon,
    format_summary,
    histogram_configuration_statistic,
    histogram_trace_statistic,
    laplace_calibration,
    neighbor_pair,
    obliviousness_suite,
    run_histogram_naive,
    run_histogram_odp,
    run_histogram_oram,
    run_oram,
    run_shuffle,
    run_sort,
    trace_dp_suite,
    utility_suite,
    write_report_csv,
)


@pytest.fixture()
def inputs(rng):
    return [generate_types(32, 4, rng) for _ in range(50)]


@pytest.mark.parametrize(
    "algorithm",
    [
        run_sort,
        run_shuffle,
        partial(run_oram, k=4),
        partial(run_histogram_oram, k=4, epsilon=1.0),
    ],
    ids=["sort", "shuffle", "oram", "histogram-oram"],
)
def test_primitives_are_oblivious(inputs, algorithm):
    report = check_exact_obliviousness(algorithm, inputs)

    assert report.passed
    assert report.inputs_checked == 50
    assert report.divergence is None


def test_naive_histogram_is_not_oblivious():
    report = check_exact_obliviousness(
        partial(run_histogram_naive, k=3, epsilon=1.0), [[1, 2, 3], [3, 2, 1]]
    )

    assert not report.passed
    assert report.divergence.input_index == 1
    assert report.divergence.event_index == 1
    assert report.divergence.expected == "1,read,b,0"
    assert report.divergence.observed == "1,read,b,2"


def test_histogram_odp_is_not_exactly_oblivious(inputs):
    report = check_exact_obliviousness(partial(run_histogram_odp, k=4, epsilon=1.0), inputs[:5])

    assert not report.passed


def test_obliviousness_needs_same_size_inputs():
    with pytest.raises(ValueError):
        check_exact_obliviousness(run_sort, [[1, 2], [1, 2, 3]])


def test_check_neighbors():
    check_neighbors([1, 2, 3], [1, 2, 3])
    check_neighbors([1, 2, 3], [1, 4, 3])
    with pytest.raises(NotNeighborsException):
        check_neighbors([1, 2, 3], [1, 2])
    with pytest.raises(NotNeighborsException):
        check_neighbors([1, 2, 3], [2, 1, 3])


def test_estimate_rejects_non_neighbors():
    with pytest.raises(NotNeighborsException):
        estimate_trace_epsilon(lambda types, rng: 0, [1, 1, 1], [2, 2, 1], trials=10)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_configuration_statistic_matches_traced_run(seed):
    types = generate_types(40, 3, np.random.default_rng(seed))

    traced = histogram_trace_statistic(types, np.random.default_rng(seed), k=3, epsilon=1.0)
    derived = histogram_configuration_statistic(types, np.random.default_rng(seed), k=3, epsilon=1.0)

    assert traced == derived


def test_estimate_from_identical_distributions(rng):
    samples1 = [int(v) for v in rng.integers(0, 5, size=20000)]
    samples2 = [int(v) for v in rng.integers(0, 5, size=20000)]

    estimate = estimate_epsilon_from_samples(samples1, samples2, min_bin_count=100)

    assert estimate.epsilon < 0.2
    assert estimate.bins_used == 5
    assert estimate.lower <= estimate.epsilon <= estimate.upper


def test_estimate_without_qualifying_bins():
    estimate = estimate_epsilon_from_samples([1, 2], [3, 4], min_bin_count=10)

    assert estimate.epsilon == 0.0
    assert estimate.bins_used == 0


def test_strawman_diverges():
    types1, types2 = neighbor_pair(60, 3, seed=4)
    statistic = partial(histogram_configuration_statistic, k=3, epsilon=1.0, zero_noise=True)

    estimate = estimate_trace_epsilon(
        statistic,
        types1,
        types2,
        trials=500,
        project=differing_coordinates(types1, types2, 3),
        min_bin_count=100,
    )

    assert estimate.epsilon > 3.0


def test_identical_databases_estimate_near_zero():
    types, _ = neighbor_pair(60, 3, seed=4)
    statistic = partial(histogram_configuration_statistic, k=3, epsilon=1.0)

    estimate = estimate_trace_epsilon(
        statistic,
        types,
        types,
        trials=4000,
        project=lambda value: value[0] % 4,
        min_bin_count=200,
    )

    assert estimate.epsilon < 0.3


def test_laplace_calibration():
    estimate = laplace_calibration(4, 1.0, 100000, seed=3, min_bin_count=1000)

    assert abs(estimate.epsilon - 1.0) <= 0.3


def test_report_csv(tmp_path):
    rows = [
        CheckRow("histogram-trace-dp", "eps_hat", 1.3, 1.1, True),
        CheckRow("histogram-strawman", "eps_hat>bound", 3.0, 2.0, False),
    ]
    report_path = tmp_path / "reports" / "trace-dp.csv"

    write_report_csv(rows, report_path)

    with open(report_path) as f:
        lines = list(csv.reader(f))
    assert lines[0] == ["name", "metric", "bound", "observed", "pass"]
    assert lines[1] == ["histogram-trace-dp", "eps_hat", "1.3", "1.1", "true"]
    assert lines[2][-1] == "false"
    assert format_summary(rows).splitlines()[-1] == "1/2 checks passed"


def test_obliviousness_suite():
    assert obliviousness_suite("sort", n=16, k=4, epsilon=1.0, inputs=10)[0].passed
    assert not obliviousness_suite("naive-histogram", n=16, k=4, epsilon=1.0, inputs=10)[0].passed


def test_histogram_utility():
    rows = utility_suite("histogram", UtilityConfig(n=200, k=4, trials=40, seed=1))

    assert [row.name for row in rows] == [
        "histogram-max-error",
        "histogram-truncation-fallback",
        "histogram-private-memory",
    ]
    assert all(row.passed for row in rows)


def test_distinct_utility():
    rows = utility_suite("distinct", UtilityConfig(n=100, k=30, trials=40, seed=2))

    assert all(row.passed for row in rows)


def test_unknown_utility_algorithm():
    with pytest.raises(ValueError):
        utility_suite("sort", UtilityConfig(n=10))


@pytest.mark.slow
def test_histogram_trace_dp_acceptance():
    rows = trace_dp_suite(n=200, k=4, epsilon=1.0, trials=100000, seed=0)

    assert all(row.passed for row in rows), format_summary(rows)


@pytest.mark.slow
def test_trace_dp_suite_on_full_traces_matches_fast_path():
    arguments = dict(n=50, k=3, epsilon=1.0, trials=1000, seed=0, min_bin_count=50)

    traced = trace_dp_suite(**arguments, full_trace=True, workers=4)
    derived = trace_dp_suite(**arguments)

    assert traced == derived
    assert traced[2].passed, format_summary(traced)


@pytest.mark.slow
def test_histogram_utility_acceptance():
    rows = utility_suite("histogram", UtilityConfig(n=10 ** 4, k=16, trials=100, seed=0))

    assert all(row.passed for row in rows), format_summary(rows)


@pytest.mark.slow
def test_heavy_hitters_utility_acceptance():
    rows = utility_suite(
        "heavy-hitters", UtilityConfig(n=10 ** 4, k=10, m=2 ** 16, trials=50, seed=0)
    )

    assert all(row.passed for row in rows), format_summary(rows)


@pytest.mark.slow
def test_distinct_stream_utility_acceptance():
    rows = utility_suite(
        "distinct-stream", UtilityConfig(n=10 ** 4, m=10 ** 6, alpha=0.1, trials=200, seed=0)
    )

    assert all(row.passed for row in rows), format_summary(rows)


@pytest.mark.slow
def test_freq_oracle_utility_acceptance():
    rows = utility_suite(
        "freq-oracle",
        UtilityConfig(n=10 ** 5, m=2 ** 16, alpha=0.005, theta=0.01, trials=20, seed=0),
    )

    assert all(row.passed for row in rows), format_summary(rows)
