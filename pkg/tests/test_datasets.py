import numpy as np
import pytest

from odp_tools.datasets import (
    distinct_count,
    generate_types,
    load_types,
    true_frequencies,
    true_histogram,
    zipf_probabilities,
)
from odp_tools.files import write_dataset_csv


def test_uniform_types_in_domain(rng):
    types = generate_types(500, 4, rng)

    assert len(types) == 500
    assert set(types) == {1, 2, 3, 4}


def test_generation_is_deterministic():
    first = generate_types(100, 10, np.random.default_rng(7), distribution="zipf")
    second = generate_types(100, 10, np.random.default_rng(7), distribution="zipf")

    assert first == second


def test_zipf_is_skewed(rng):
    types = generate_types(5000, 100, rng, distribution="zipf", s=1.2)
    histogram = true_histogram(types, 100)

    assert histogram[0] == max(histogram)
    assert histogram[0] > 4 * histogram[9]


def test_zipf_probabilities():
    probabilities = zipf_probabilities(3, 1.0)

    assert probabilities.sum() == pytest.approx(1.0)
    assert probabilities[0] == pytest.approx(2 * probabilities[1])


@pytest.mark.parametrize(
    "n, domain, distribution", [(0, 4, "uniform"), (10, 0, "uniform"), (10, 4, "from-file")]
)
def test_invalid_generation(rng, n, domain, distribution):
    with pytest.raises(ValueError):
        generate_types(n, domain, rng, distribution=distribution)


def test_ground_truth():
    types = [2, 2, 5, 1]

    assert true_histogram(types, 3) == [1, 2, 0]
    assert true_frequencies(types) == {2: 2, 5: 1, 1: 1}
    assert distinct_count(types) == 3


def test_load_types_orders_by_record_id(tmp_path):
    file_path = tmp_path / "db.csv"
    file_path.write_text("record_id,item_type\n2,9\n0,4\n1,6\n")

    assert load_types(file_path) == [4, 6, 9]


def test_load_types_round_trip(tmp_path, rng):
    types = generate_types(50, 8, rng)
    write_dataset_csv(types, tmp_path / "db.csv")

    assert load_types(tmp_path / "db.csv") == types
