import json
import logging
import sys
from pathlib import Path
from typing import Callable, Dict, Optional, Sequence

import click
import numpy as np

from . import datasets
from .budget import ChargeResult, PrivacyBudget
from .extmem import READ, AccessTrace, ExternalMemory, PrivateMemoryMeter, capture_trace
from .files import (
    DatasetParseException,
    ensure_path_for_file_exists,
    load_json_asset,
    write_dataset_csv,
    write_pretty_json_asset,
)
from .noise import InvalidParameterException, LaplaceNoise, PrivacyParams
from .queries import (
    DEFAULT_TAU,
    ConfigurationException,
    Database,
    distinct_sort_odp,
    distinct_stream_odp,
    freq_oracle_build,
    freq_oracle_query,
    heavy_hitters_odp,
    histogram_odp,
    histogram_oram,
    privacy_cost,
    validate_query,
)
from .sketches import count_min_dimensions
from .verify import (
    DEFAULT_MIN_BIN_COUNT,
    DEFAULT_SLACK,
    TRACED_ALGORITHMS,
    UTILITY_CHECKS,
    UtilityConfig,
    format_summary,
    obliviousness_suite,
    trace_dp_suite,
    utility_suite,
    write_report_csv,
)

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
LEDGER_DEFAULT = ".odp-ledger.json"
REPORTS_DIR_DEFAULT = "reports"

EXIT_BUDGET_EXHAUSTED = 3
EXIT_VERIFICATION_FAILED = 4


seed_option = click.option(
    "--seed",
    help="Master seed of all randomness",
    type=int,
    default=0,
    show_default=True,
    envvar="ODP_SEED",
)
eps_option = click.option(
    "--eps",
    "epsilon",
    help="Privacy parameter epsilon of the query",
    type=click.FloatRange(min=0, min_open=True),
    required=True,
)
budget_eps_option = click.option(
    "--budget-eps",
    help="Total epsilon of a new ledger, ignored when the ledger exists",
    type=click.FloatRange(min=0),
    default=1.0,
    show_default=True,
    envvar="ODP_BUDGET_EPS",
)
budget_delta_option = click.option(
    "--budget-delta",
    help="Total delta of a new ledger, ignored when the ledger exists",
    type=click.FloatRange(min=0, max=1, max_open=True),
    default=0.01,
    show_default=True,
    envvar="ODP_BUDGET_DELTA",
)
ledger_option = click.option(
    "--ledger",
    "ledger_path",
    help="Path of the privacy budget ledger",
    type=click.Path(dir_okay=False),
    default=LEDGER_DEFAULT,
    show_default=True,
    envvar="ODP_LEDGER",
)
trace_option = click.option(
    "--trace",
    "trace_path",
    help="Write the external memory access trace of the query to this file",
    type=click.Path(dir_okay=False, writable=True),
    default=None,
)
zero_noise_option = click.option(
    "--zero-noise",
    help="Force every Laplace draw to 0. NOT private, needs --unsafe",
    is_flag=True,
    default=False,
)
unsafe_option = click.option(
    "--unsafe",
    help="Acknowledge that --zero-noise releases exact statistics",
    is_flag=True,
    default=False,
)
dataset_argument = click.argument(
    "dataset", type=click.Path(exists=True, dir_okay=False)
)
k_option = click.option(
    "--k", help="Number of item types", type=click.IntRange(min=1), required=True
)
m_option = click.option(
    "--m",
    help="Size of the item domain",
    type=click.IntRange(min=2),
    default=2 ** 16,
    show_default=True,
)
alpha_option = click.option(
    "--alpha",
    help="Relative accuracy of the sketch",
    type=click.FloatRange(min=0, max=1, min_open=True, max_open=True),
    default=0.1,
    show_default=True,
)
theta_option = click.option(
    "--theta",
    help="Failure probability of the error bounds",
    type=click.FloatRange(min=0, max=1, min_open=True, max_open=True),
    default=0.05,
    show_default=True,
)
trials_option = click.option(
    "--trials", type=click.IntRange(min=1), default=1000, show_default=True
)
workers_option = click.option(
    "--workers",
    help="Worker processes for independent trials",
    type=click.IntRange(min=1),
    default=1,
    show_default=True,
    envvar="ODP_WORKERS",
)
report_option = click.option(
    "--report",
    "report_path",
    help=f"CSV report path [default: {REPORTS_DIR_DEFAULT}/<suite>-<alg>.csv]",
    type=click.Path(dir_okay=False, writable=True),
    default=None,
)


def configure_logging(verbose: bool):
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if verbose else logging.WARNING,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        force=True,
    )


@click.group()
@click.option("--verbose", "-v", is_flag=True, default=False, help="Log debug output to stderr")
def main(verbose):
    configure_logging(verbose)


@main.command(short_help="Generates a synthetic dataset")
@click.option("--n", type=click.IntRange(min=1), required=True, help="Number of records")
@click.option(
    "--k",
    "--m",
    "domain",
    type=click.IntRange(min=1),
    default=None,
    help="Size of the type domain 1..k, required unless --dist from-file",
)
@click.option(
    "--dist",
    "distribution",
    type=click.Choice(datasets.DISTRIBUTIONS),
    default="uniform",
    show_default=True,
)
@click.option(
    "--s",
    "zipf_s",
    type=click.FloatRange(min=0, min_open=True),
    default=1.2,
    show_default=True,
    help="Exponent of the zipf distribution",
)
@click.option(
    "--input",
    "input_path",
    type=click.Path(exists=True, dir_okay=False),
    default=None,
    help="Dataset whose type distribution is resampled by --dist from-file",
)
@seed_option
@click.option(
    "--output",
    "-o",
    type=click.Path(dir_okay=False, writable=True),
    default="data/dataset.csv",
    show_default=True,
    help="Name of the output file",
)
def gen(n, domain, distribution, zipf_s, input_path, seed, output):
    """Writes a `record_id,item_type` CSV file of N records, deterministic under --seed"""
    rng = np.random.default_rng(seed)
    if distribution == "from-file":
        if input_path is None:
            raise click.BadOptionUsage("--input", "--dist from-file needs --input")
        source = read_types_or_fail(input_path)
        types = [int(t) for t in rng.choice(source, size=n, replace=True)]
    else:
        if domain is None:
            raise click.BadOptionUsage("--k", f"--dist {distribution} needs --k")
        types = datasets.generate_types(n, domain, rng, distribution=distribution, s=zipf_s)
    write_dataset_csv(types, output)


@main.group(short_help="Runs a private query against a dataset")
def query():
    pass


def common_query_options(function):
    for option in (
        seed_option,
        unsafe_option,
        zero_noise_option,
        trace_option,
        ledger_option,
        budget_delta_option,
        budget_eps_option,
        eps_option,
        dataset_argument,
    ):
        function = option(function)
    return function


@query.command(short_help="Oblivious DP histogram with fake and dummy records")
@common_query_options
@k_option
def histogram(k, **options):
    def run(db, params, rng, noise):
        return histogram_odp(db, k, params, rng=rng, noise=noise).to_dict()

    run_query(
        "histogram", run, cost_arguments={}, checks={"k": k}, parameters={"k": k}, **options
    )


@query.command("histogram-oram", short_help="DP histogram with counters in a linear-scan ORAM")
@common_query_options
@k_option
def histogram_oram_command(k, **options):
    def run(db, params, rng, noise):
        return histogram_oram(db, k, params, rng=rng, noise=noise).to_dict()

    run_query(
        "histogram-oram", run, cost_arguments={}, checks={"k": k}, parameters={"k": k}, **options
    )


@query.command(short_help="Distinct count via oblivious sort")
@common_query_options
def distinct(**options):
    def run(db, params, rng, noise):
        return {"estimate": distinct_sort_odp(db, params, rng=rng, noise=noise)}

    run_query("distinct", run, cost_arguments={}, checks={}, parameters={}, **options)


@query.command("distinct-stream", short_help="Distinct count via a KMV sketch")
@common_query_options
@alpha_option
def distinct_stream(alpha, **options):
    def run(db, params, rng, noise):
        return {"estimate": distinct_stream_odp(db, params, alpha, rng=rng, noise=noise)}

    run_query(
        "distinct-stream", run, cost_arguments={}, checks={}, parameters={"alpha": alpha}, **options
    )


@query.command("heavy-hitters", short_help="Top k heavy hitters via two oblivious sorts")
@common_query_options
@k_option
@m_option
@theta_option
@click.option("--tau", type=click.FloatRange(min=1, min_open=True), default=DEFAULT_TAU, show_default=True)
def heavy_hitters(k, m, theta, tau, **options):
    def run(db, params, rng, noise):
        return heavy_hitters_odp(db, k, m, params, theta, rng=rng, noise=noise, tau=tau).to_dict()

    run_query(
        "heavy-hitters",
        run,
        cost_arguments={"m": m, "tau": tau},
        checks={"k": k, "m": m, "theta": theta, "tau": tau},
        parameters={"k": k, "m": m, "theta": theta, "tau": tau},
        **options,
    )


@query.command("freq-oracle", short_help="Noisy count-min sketch frequency oracle")
@common_query_options
@alpha_option
@theta_option
@click.option("--item", "items", type=int, multiple=True, help="Item to query, can be repeated")
@click.option(
    "--sketch-out",
    type=click.Path(dir_okay=False, writable=True),
    default=None,
    help="Write the released sketch blob to this file",
)
def freq_oracle(alpha, theta, items, sketch_out, **options):
    def run(db, params, rng, noise):
        sketch = freq_oracle_build(db, alpha, theta, params, rng=rng, noise=noise)
        if sketch_out is not None:
            ensure_path_for_file_exists(sketch_out)
            Path(sketch_out).write_bytes(sketch.to_bytes())
        return {
            "width": sketch.width,
            "depth": sketch.depth,
            "seeds": list(sketch.seeds),
            "queries": {str(item): freq_oracle_query(sketch, item) for item in items},
            "sketch_file": sketch_out,
        }

    width, depth = count_min_dimensions(alpha, theta)
    run_query(
        "freq-oracle",
        run,
        cost_arguments={},
        checks={},
        parameters={"alpha": alpha, "theta": theta, "width": width, "depth": depth},
        **options,
    )


def run_query(
    query_name: str,
    run: Callable,
    *,
    cost_arguments: Dict,
    checks: Dict,
    parameters: Dict,
    dataset: str,
    epsilon: float,
    budget_eps: float,
    budget_delta: float,
    ledger_path: str,
    trace_path: Optional[str],
    zero_noise: bool,
    unsafe: bool,
    seed: int,
):
    if zero_noise and not unsafe:
        raise click.BadOptionUsage(
            "--zero-noise", "--zero-noise releases exact statistics, add --unsafe to confirm"
        )
    types = read_types_or_fail(dataset)
    try:
        validate_query(query_name, epsilon, n=len(types), **checks)
        cost = privacy_cost(query_name, epsilon, n=len(types), **cost_arguments)
    except (ConfigurationException, InvalidParameterException) as e:
        raise click.UsageError(str(e))

    budget = load_budget(ledger_path, budget_eps, budget_delta)
    if budget.charge(cost, query_name) is ChargeResult.EXHAUSTED:
        click.echo(
            json.dumps(
                {
                    "schema_version": SCHEMA_VERSION,
                    "query": query_name,
                    "error": "budget_exhausted",
                    "requested": cost.to_dict(),
                    "budget_remaining": budget.remaining(),
                }
            )
        )
        sys.exit(EXIT_BUDGET_EXHAUSTED)

    rng = np.random.default_rng(seed)
    memory = ExternalMemory(
        meter=PrivateMemoryMeter.for_size(len(types)), keep_events=trace_path is not None
    )
    results = {}
    try:
        db = Database.from_types(memory, types)
        params = PrivacyParams(epsilon)
        noise = LaplaceNoise(rng, zero_noise=zero_noise)
        trace = capture_trace(
            memory, lambda: results.update(result=run(db, params, rng, noise))
        )
    except (ConfigurationException, InvalidParameterException) as e:
        # a run that fails after the charge still spends it
        save_budget(budget, ledger_path)
        raise click.UsageError(str(e))
    save_budget(budget, ledger_path)

    if trace_path is not None:
        ensure_path_for_file_exists(trace_path)
        trace.write(trace_path)

    click.echo(
        json.dumps(
            {
                "schema_version": SCHEMA_VERSION,
                "query": query_name,
                "params": {**cost.to_dict(), **parameters, "zero_noise": zero_noise},
                "result": results["result"],
                "budget_remaining": budget.remaining(),
                "trace_file": trace_path,
                "trace_events": len(trace),
            }
        )
    )


def read_dataset_or_fail(dataset: str) -> Sequence[int]:
    try:
        return datasets.load_types(dataset)
    except DatasetParseException as e:
        raise click.BadParameter(f"Could not parse {dataset}, {e}", param_hint="DATASET")


def read_types_or_fail(dataset: str) -> Sequence[int]:
    types = read_dataset_or_fail(dataset)
    if not types:
        raise click.BadParameter(f"Dataset {dataset} has no records", param_hint="DATASET")
    return types


def load_budget(ledger_path: str, budget_eps: float, budget_delta: float) -> PrivacyBudget:
    """Opens the ledger at `ledger_path`, or a new one with the given totals"""
    if Path(ledger_path).exists():
        return PrivacyBudget.from_report(load_json_asset(ledger_path))
    return PrivacyBudget(budget_eps, budget_delta)


def save_budget(budget: PrivacyBudget, ledger_path: str):
    ensure_path_for_file_exists(ledger_path)
    write_pretty_json_asset(budget.report(), ledger_path)


@main.group(short_help="Runs an empirical verification suite")
def verify():
    pass


def default_report_path(suite: str, algorithm: str) -> str:
    return str(Path(REPORTS_DIR_DEFAULT) / f"{suite}-{algorithm}.csv")


def finish_report(rows, report_path: str):
    write_report_csv(rows, report_path)
    click.echo(format_summary(rows))
    click.echo(f"Report written to {report_path}")
    if not all(row.passed for row in rows):
        sys.exit(EXIT_VERIFICATION_FAILED)


@verify.command(short_help="Checks byte-identical traces across same-size inputs")
@click.option("--alg", "algorithm", type=click.Choice(sorted(TRACED_ALGORITHMS)), required=True)
@click.option("--n", type=click.IntRange(min=2), default=32, show_default=True)
@click.option("--k", type=click.IntRange(min=1), default=4, show_default=True)
@click.option("--eps", "epsilon", type=click.FloatRange(min=0, min_open=True), default=1.0, show_default=True)
@click.option("--inputs", type=click.IntRange(min=2), default=50, show_default=True)
@seed_option
@report_option
def obliviousness(algorithm, n, k, epsilon, inputs, seed, report_path):
    rows = obliviousness_suite(algorithm, n=n, k=k, epsilon=epsilon, inputs=inputs, seed=seed)
    finish_report(rows, report_path or default_report_path("obliviousness", algorithm))


@verify.command("trace-dp", short_help="Estimates the trace epsilon of the histogram")
@click.option("--alg", "algorithm", type=click.Choice(["histogram"]), default="histogram", show_default=True)
@click.option("--n", type=click.IntRange(min=2), default=200, show_default=True)
@click.option("--k", type=click.IntRange(min=2), default=4, show_default=True)
@click.option("--eps", "epsilon", type=click.FloatRange(min=0, min_open=True), default=1.0, show_default=True)
@trials_option
@click.option("--slack", type=click.FloatRange(min=0), default=DEFAULT_SLACK, show_default=True)
@click.option("--min-bin-count", type=click.IntRange(min=1), default=DEFAULT_MIN_BIN_COUNT, show_default=True)
@click.option(
    "--full-trace",
    is_flag=True,
    default=False,
    help="Run the traced algorithm in every trial instead of deriving the statistic from the noise draw",
)
@seed_option
@workers_option
@report_option
def trace_dp(algorithm, n, k, epsilon, trials, slack, min_bin_count, full_trace, seed, workers, report_path):
    rows = trace_dp_suite(
        n=n,
        k=k,
        epsilon=epsilon,
        trials=trials,
        seed=seed,
        slack=slack,
        min_bin_count=min_bin_count,
        full_trace=full_trace,
        workers=workers,
    )
    finish_report(rows, report_path or default_report_path("trace-dp", algorithm))


@verify.command(short_help="Measures how often the error bounds hold")
@click.option("--alg", "algorithm", type=click.Choice(sorted(UTILITY_CHECKS)), required=True)
@click.option("--n", type=click.IntRange(min=2), default=10 ** 4, show_default=True)
@click.option("--k", type=click.IntRange(min=1), default=16, show_default=True)
@m_option
@click.option("--eps", "epsilon", type=click.FloatRange(min=0, min_open=True), default=1.0, show_default=True)
@theta_option
@alpha_option
@trials_option
@click.option(
    "--dist",
    "distribution",
    type=click.Choice(["uniform", "zipf"]),
    default="uniform",
    show_default=True,
)
@seed_option
@report_option
def utility(algorithm, n, k, m, epsilon, theta, alpha, trials, distribution, seed, report_path):
    config = UtilityConfig(
        n=n,
        k=k,
        m=m,
        epsilon=epsilon,
        theta=theta,
        alpha=alpha,
        trials=trials,
        seed=seed,
        distribution=distribution,
    )
    try:
        rows = utility_suite(algorithm, config)
    except (ConfigurationException, InvalidParameterException) as e:
        raise click.UsageError(str(e))
    finish_report(rows, report_path or default_report_path("utility", algorithm))


@verify.command(short_help="Reparses a trace file and checks it serializes back unchanged")
@click.argument("trace_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--expect-events", type=click.IntRange(min=0), default=None)
def trace(trace_file, expect_events):
    try:
        parsed = AccessTrace.read(trace_file)
    except ValueError as e:
        raise click.BadParameter(f"Could not parse {trace_file}: {e}", param_hint="TRACE_FILE")
    lossless = parsed.dumps() == Path(trace_file).read_text()
    reads = sum(event.kind == READ for event in parsed.events)
    click.echo(
        json.dumps(
            {
                "schema_version": SCHEMA_VERSION,
                "events": len(parsed),
                "reads": reads,
                "writes": len(parsed) - reads,
                "arrays": sorted({event.array_id for event in parsed.events}),
                "lossless": lossless,
            }
        )
    )
    if not lossless or (expect_events is not None and expect_events != len(parsed)):
        sys.exit(EXIT_VERIFICATION_FAILED)
