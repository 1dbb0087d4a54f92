import csv
import json

import pytest
from click.testing import CliRunner

from odp_tools.cli import main
from odp_tools.extmem import AccessTrace


@pytest.fixture()
def runner():
    return CliRunner()


@pytest.fixture()
def dataset(runner, tmp_path):
    path = tmp_path / "db.csv"
    result = runner.invoke(
        main, ["gen", "--n", "100", "--k", "4", "--dist", "uniform", "--seed", "7", "-o", str(path)]
    )
    assert result.exit_code == 0, result.output
    return path


@pytest.fixture()
def ledger(tmp_path):
    return str(tmp_path / "ledger.json")


def last_json(output):
    return json.loads(output.strip().splitlines()[-1])


def test_gen(dataset):
    with open(dataset) as f:
        rows = list(csv.reader(f))

    assert rows[0] == ["record_id", "item_type"]
    assert len(rows) == 101
    assert {int(item_type) for _, item_type in rows[1:]} <= {1, 2, 3, 4}


def test_gen_is_deterministic(runner, dataset, tmp_path):
    again = tmp_path / "again.csv"
    runner.invoke(main, ["gen", "--n", "100", "--k", "4", "--seed", "7", "-o", str(again)])

    assert again.read_bytes() == dataset.read_bytes()


def test_gen_seed_from_environment(runner, dataset, tmp_path):
    again = tmp_path / "again.csv"
    runner.invoke(main, ["gen", "--n", "100", "--k", "4", "-o", str(again)], env={"ODP_SEED": "7"})

    assert again.read_bytes() == dataset.read_bytes()


@pytest.mark.parametrize(
    "args", [["--n", "0", "--k", "4"], ["--n", "10"], ["--n", "10", "--dist", "from-file"]]
)
def test_gen_usage_errors(runner, tmp_path, args):
    result = runner.invoke(main, ["gen", *args, "-o", str(tmp_path / "x.csv")])

    assert result.exit_code == 2


def test_gen_from_file(runner, dataset, tmp_path):
    output = tmp_path / "resampled.csv"
    result = runner.invoke(
        main, ["gen", "--n", "30", "--dist", "from-file", "--input", str(dataset), "-o", str(output)]
    )

    assert result.exit_code == 0, result.output
    assert len(output.read_text().splitlines()) == 31


def test_query_histogram(runner, dataset, ledger):
    result = runner.invoke(
        main, ["query", "histogram", str(dataset), "--k", "4", "--eps", "1", "--ledger", ledger]
    )

    assert result.exit_code == 0, result.output
    output = last_json(result.output)
    assert output["schema_version"] == 1
    assert output["query"] == "histogram"
    assert len(output["result"]["counts"]) == 4
    assert output["params"]["delta"] == pytest.approx(1e-4)
    assert output["budget_remaining"]["epsilon"] == pytest.approx(0.0)
    assert output["trace_file"] is None


def test_budget_is_exhausted_across_invocations(runner, dataset, ledger):
    arguments = ["query", "distinct", str(dataset), "--eps", "0.6", "--budget-eps", "1.0", "--ledger", ledger]

    first = runner.invoke(main, arguments)
    second = runner.invoke(main, arguments)

    assert first.exit_code == 0, first.output
    assert second.exit_code == 3
    error = last_json(second.output)
    assert error["error"] == "budget_exhausted"
    assert error["budget_remaining"]["epsilon"] == pytest.approx(0.4)


def test_ledger_totals_cannot_be_raised(runner, dataset, ledger):
    base = ["query", "distinct", str(dataset), "--eps", "0.6", "--ledger", ledger]
    runner.invoke(main, [*base, "--budget-eps", "1.0"])

    result = runner.invoke(main, [*base, "--budget-eps", "10.0"])

    assert result.exit_code == 3


def test_zero_noise_needs_unsafe(runner, dataset, ledger):
    base = ["query", "histogram", str(dataset), "--k", "4", "--eps", "0.5", "--ledger", ledger]

    refused = runner.invoke(main, [*base, "--zero-noise"])
    accepted = runner.invoke(main, [*base, "--zero-noise", "--unsafe"])

    assert refused.exit_code == 2
    assert accepted.exit_code == 0, accepted.output
    with open(dataset) as f:
        types = [int(row[1]) for row in list(csv.reader(f))[1:]]
    counts = last_json(accepted.output)["result"]["counts"]
    assert counts == [float(types.count(i)) for i in range(1, 5)]


def test_malformed_dataset(runner, tmp_path, ledger):
    path = tmp_path / "broken.csv"
    path.write_text("record_id,item_type\n0,1\n1,oops\n")

    result = runner.invoke(main, ["query", "distinct", str(path), "--eps", "1", "--ledger", ledger])

    assert result.exit_code == 2
    assert "line 3" in result.output


def test_invalid_query_parameters(runner, dataset, ledger):
    result = runner.invoke(
        main, ["query", "heavy-hitters", str(dataset), "--k", "50", "--eps", "1", "--ledger", ledger]
    )

    assert result.exit_code == 2


def test_heavy_hitters_query(runner, tmp_path, ledger):
    path = tmp_path / "skewed.csv"
    runner.invoke(main, ["gen", "--n", "400", "--k", "50", "--dist", "zipf", "--s", "2", "-o", str(path)])

    result = runner.invoke(
        main,
        [
            "query",
            "heavy-hitters",
            str(path),
            "--k",
            "4",
            "--m",
            "50",
            "--eps",
            "1",
            "--budget-delta",
            "0.05",
            "--ledger",
            ledger,
        ],
    )

    assert result.exit_code == 0, result.output
    output = last_json(result.output)
    assert len(output["result"]["entries"]) <= 4
    assert output["params"]["delta"] == pytest.approx(1 / 50)


def test_freq_oracle_query(runner, dataset, ledger, tmp_path):
    sketch_path = tmp_path / "sketch.bin"
    result = runner.invoke(
        main,
        [
            "query",
            "freq-oracle",
            str(dataset),
            "--eps",
            "1",
            "--item",
            "1",
            "--item",
            "3",
            "--sketch-out",
            str(sketch_path),
            "--ledger",
            ledger,
        ],
    )

    assert result.exit_code == 0, result.output
    output = last_json(result.output)["result"]
    assert set(output["queries"]) == {"1", "3"}
    assert sketch_path.read_bytes().startswith(b"ODPC")


def test_trace_round_trips_through_verify(runner, dataset, ledger, tmp_path):
    trace_path = tmp_path / "traces" / "histogram.trace"
    query = runner.invoke(
        main,
        [
            "query",
            "histogram-oram",
            str(dataset),
            "--k",
            "4",
            "--eps",
            "1",
            "--trace",
            str(trace_path),
            "--ledger",
            ledger,
        ],
    )
    assert query.exit_code == 0, query.output

    result = runner.invoke(main, ["verify", "trace", str(trace_path), "--expect-events", str(100 + 800 + 8)])

    assert result.exit_code == 0, result.output
    output = last_json(result.output)
    assert output["lossless"]
    assert output["events"] == len(AccessTrace.read(trace_path))
    assert output["arrays"] == ["b", "db"]


def test_verify_obliviousness(runner, tmp_path):
    report = tmp_path / "sort.csv"

    result = runner.invoke(main, ["verify", "obliviousness", "--alg", "sort", "--report", str(report)])

    assert result.exit_code == 0, result.output
    assert "1/1 checks passed" in result.output
    with open(report) as f:
        rows = list(csv.reader(f))
    assert rows[1][0] == "sort-obliviousness"
    assert rows[1][-1] == "true"


def test_verify_naive_histogram_fails(runner, tmp_path):
    result = runner.invoke(
        main,
        ["verify", "obliviousness", "--alg", "naive-histogram", "--inputs", "5", "--report", str(tmp_path / "r.csv")],
    )

    assert result.exit_code == 4


def test_verify_trace_dp_report(runner, tmp_path):
    report = tmp_path / "trace-dp.csv"

    result = runner.invoke(
        main,
        [
            "verify",
            "trace-dp",
            "--n",
            "50",
            "--k",
            "3",
            "--trials",
            "300",
            "--min-bin-count",
            "50",
            "--report",
            str(report),
        ],
    )

    assert result.exit_code in (0, 4), result.output
    with open(report) as f:
        rows = list(csv.reader(f))
    assert [row[0] for row in rows[1:]] == [
        "laplace-calibration",
        "histogram-trace-dp",
        "histogram-strawman",
    ]


def test_verify_utility(runner, tmp_path):
    report = tmp_path / "distinct.csv"

    result = runner.invoke(
        main,
        [
            "verify",
            "utility",
            "--alg",
            "distinct",
            "--n",
            "100",
            "--k",
            "30",
            "--trials",
            "40",
            "--seed",
            "2",
            "--report",
            str(report),
        ],
    )

    assert result.exit_code == 0, result.output
    assert report.exists()


@pytest.mark.parametrize(
    "arguments",
    [
        ["histogram", "--k", "9"],
        ["histogram-oram", "--k", "9"],
        ["heavy-hitters", "--k", "2", "--m", "1000"],
    ],
)
def test_usage_errors_do_not_spend_budget(runner, tmp_path, ledger, arguments):
    path = tmp_path / "small.csv"
    path.write_text("record_id,item_type\n0,1\n1,2\n2,1\n")
    query, *options = arguments

    refused = runner.invoke(main, ["query", query, str(path), *options, "--eps", "0.6", "--ledger", ledger])
    accepted = runner.invoke(
        main, ["query", "histogram", str(path), "--k", "2", "--eps", "1", "--budget-delta", "0.5", "--ledger", ledger]
    )

    assert refused.exit_code == 2
    assert accepted.exit_code == 0, accepted.output
    assert last_json(accepted.output)["budget_remaining"]["epsilon"] == pytest.approx(0.0)


def test_duplicate_record_ids_are_rejected(runner, tmp_path, ledger):
    path = tmp_path / "duplicates.csv"
    path.write_text("record_id,item_type\n0,1\n0,2\n0,2\n")

    result = runner.invoke(
        main, ["query", "distinct", str(path), "--eps", "1", "--zero-noise", "--unsafe", "--ledger", ledger]
    )

    assert result.exit_code == 2
    assert "line 3" in result.output
    assert "duplicate record_id" in result.output
