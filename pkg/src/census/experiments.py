"""Experiment harness: scenario configs, seeded batches, summaries, CSV.

A scenario is a flat record describing topology, churn, protocol and run
bounds.  Batches execute ``repetitions`` independent runs with seeds
``base_seed + index``; each run owns its whole world, so runs can execute
in parallel (capped by the CENSUS_THREADS environment variable) without
changing a single output byte — records are ordered by seed before
emission.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import os
import statistics
from dataclasses import dataclass
from concurrent.futures import ProcessPoolExecutor

from . import gossip, random_tour
from .sim import SeededRng, Simulator
from .topology import ChurnParams, GenParams, generate_topology

PROTOCOLS = ("rt_adapted", "rt_baseline", "gossip_adapted", "gossip_baseline")


@dataclass(frozen=True)
class ScenarioConfig:
    protocol: str
    n_masters: int
    n_slaves: int
    pmp_fraction: float = 0.0
    max_pmp_degree: int = 2
    require_connected: bool = True
    migration_rate: float = 0.0
    pmp_link_rate: float = 0.0
    crash_rate: float = 0.0
    preserve_connectivity: bool = True
    churn_period: int = 5
    epsilon: float = 0.0
    precision_scope: str = "all_nodes"
    repetitions: int = 1
    base_seed: int = 0
    ack_timeout_ticks: int = 4
    max_hops: int = 0  # 0: 50 * node count
    max_rounds: int = 10 ** 6
    out_path: str | None = None

    def validate(self) -> None:
        if self.protocol not in PROTOCOLS:
            raise ValueError(f"protocol must be one of {PROTOCOLS}, got {self.protocol!r}")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if self.churn_period < 1:
            raise ValueError("churn_period must be >= 1")
        if self.max_rounds < 1:
            raise ValueError("max_rounds must be >= 1")
        if self.max_hops < 0:
            raise ValueError("max_hops must be >= 0 (0 selects the default)")
        for rate in ("migration_rate", "pmp_link_rate", "crash_rate"):
            if not 0.0 <= getattr(self, rate) <= 1.0:
                raise ValueError(f"{rate} must lie in [0, 1]")
        # constructing the nested param objects re-checks their own bounds
        self.gen_params()
        gossip.PrecisionSpec(self.epsilon, self.precision_scope)
        if self.ack_timeout_ticks < 3:
            raise ValueError("ack_timeout_ticks must be >= 3")

    def gen_params(self) -> GenParams:
        return GenParams(
            n_masters=self.n_masters,
            n_slaves=self.n_slaves,
            pmp_fraction=self.pmp_fraction,
            max_pmp_degree=self.max_pmp_degree,
            require_connected=self.require_connected,
        )

    def churn_params(self) -> ChurnParams | None:
        if self.migration_rate == 0 and self.pmp_link_rate == 0 and self.crash_rate == 0:
            return None
        return ChurnParams(
            migration_rate=self.migration_rate,
            pmp_link_rate=self.pmp_link_rate,
            crash_rate=self.crash_rate,
            preserve_connectivity=self.preserve_connectivity,
        )


@dataclass(frozen=True)
class ExperimentRecord:
    seed: int
    initial_n: int
    true_n: int  # node count at completion time
    estimate: float | None
    relative_error: float | None
    rounds_or_hops: int
    messages_sent: int
    completed_via: str
    wall_ticks: int


RECORD_FIELDS = [f.name for f in dataclasses.fields(ExperimentRecord)]


@dataclass(frozen=True)
class SummaryStats:
    label: str
    n_runs: int
    n_failed: int
    mean_rel_error: float
    median_rel_error: float
    stddev_rel_error: float
    bias: float  # mean signed relative error
    mean_rounds_or_hops: float
    mean_messages: float


SUMMARY_FIELDS = [f.name for f in dataclasses.fields(SummaryStats)]


def run_one(config: ScenarioConfig, seed: int, trace=None) -> ExperimentRecord:
    """Execute a single seeded run of the configured scenario."""
    rng = SeededRng(seed)
    topo = generate_topology(rng.substream("topology"), config.gen_params())
    initial_n = topo.n_nodes
    sim = Simulator(topo, rng, trace=trace)
    churn = config.churn_params()
    proto_rng = rng.substream("protocol")

    if config.protocol.startswith("rt_"):
        if churn is not None:
            sim.configure_churn(churn, config.churn_period, rng.substream("churn"))
        originator = proto_rng.choice(topo.master_ids())
        params = random_tour.TourParams(
            ack_timeout_ticks=config.ack_timeout_ticks,
            max_hops=config.max_hops or None,
        )
        variant = (random_tour.VARIANT_ADAPTED if config.protocol == "rt_adapted"
                   else random_tour.VARIANT_BASELINE)
        outcome = random_tour.run_tour(topo, sim, originator, variant, params,
                                       rng=proto_rng, tour_id=seed)
        estimate = outcome.estimate
        completed_via = outcome.completed_via
        rounds_or_hops = outcome.hops
        messages = outcome.messages_sent
    else:
        initiator = proto_rng.choice(topo.node_ids())
        precision = gossip.PrecisionSpec(config.epsilon, config.precision_scope)
        runner = gossip.run_adapted if config.protocol == "gossip_adapted" else gossip.run_baseline
        result = runner(topo, sim, initiator, precision, churn=churn,
                        churn_period=config.churn_period, max_rounds=config.max_rounds,
                        rng=proto_rng)
        state = result.states.get(initiator)
        estimate = gossip.estimate_of(state) if state is not None else None
        completed_via = "converged" if result.converged else "censored"
        rounds_or_hops = result.rounds
        messages = result.messages_sent

    true_n = topo.n_nodes
    rel = abs(estimate - true_n) / true_n if estimate is not None else None
    return ExperimentRecord(
        seed=seed,
        initial_n=initial_n,
        true_n=true_n,
        estimate=estimate,
        relative_error=rel,
        rounds_or_hops=rounds_or_hops,
        messages_sent=messages,
        completed_via=completed_via,
        wall_ticks=sim.now,
    )


def _run_one_safe(config: ScenarioConfig, seed: int) -> ExperimentRecord:
    try:
        return run_one(config, seed)
    except Exception:
        return ExperimentRecord(
            seed=seed, initial_n=0, true_n=0, estimate=None, relative_error=None,
            rounds_or_hops=0, messages_sent=0, completed_via=random_tour.FAILED,
            wall_ticks=0,
        )


def run_batch(config: ScenarioConfig) -> list[ExperimentRecord]:
    """Run all repetitions; a failing run becomes a failed row, never an abort."""
    config.validate()
    seeds = [config.base_seed + i for i in range(config.repetitions)]
    workers = int(os.environ.get("CENSUS_THREADS", "1") or "1")
    if workers > 1 and len(seeds) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_run_one_safe, [config] * len(seeds), seeds))
    else:
        records = [_run_one_safe(config, s) for s in seeds]
    records.sort(key=lambda r: r.seed)
    return records


def summarize(records: list[ExperimentRecord], label: str = "") -> SummaryStats:
    """Error statistics over the completed records of one scenario."""
    if not records:
        raise ValueError("cannot summarize an empty record list")
    done = [r for r in records if r.estimate is not None]
    n_failed = len(records) - len(done)
    if not done:
        raise ValueError("no completed records to summarize")
    rel = [r.relative_error for r in done]
    signed = [(r.estimate - r.true_n) / r.true_n for r in done]
    return SummaryStats(
        label=label,
        n_runs=len(records),
        n_failed=n_failed,
        mean_rel_error=statistics.fmean(rel),
        median_rel_error=statistics.median(rel),
        stddev_rel_error=statistics.stdev(rel) if len(rel) > 1 else 0.0,
        bias=statistics.fmean(signed),
        mean_rounds_or_hops=statistics.fmean(r.rounds_or_hops for r in done),
        mean_messages=statistics.fmean(r.messages_sent for r in done),
    )


# -- CSV ---------------------------------------------------------------------


def _cell(value) -> str:
    return "" if value is None else str(value)


def _write_rows(path, header: list[str], rows) -> None:
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([_cell(v) for v in row])
    except OSError as exc:
        raise OSError(f"cannot write CSV to {path}: {exc}") from exc


def emit_csv(rows, path, kind: str = "records", extra_header: list[str] | None = None) -> None:
    """Write records or summaries; byte-stable for identical inputs.

    ``rows`` may be ExperimentRecord/SummaryStats instances or, when
    ``extra_header`` is given, (extra_cells, record) pairs for labelled
    sweep output.
    """
    base = RECORD_FIELDS if kind == "records" else SUMMARY_FIELDS
    header = (extra_header or []) + base
    out = []
    for row in rows:
        if extra_header:
            extra, rec = row
            out.append(list(extra) + [getattr(rec, f) for f in base])
        else:
            out.append([getattr(row, f) for f in base])
    _write_rows(path, header, out)


def load_records(path) -> list[ExperimentRecord]:
    """Read a records CSV back, re-deriving and asserting relative errors."""
    records = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            est = float(row["estimate"]) if row["estimate"] else None
            rel = float(row["relative_error"]) if row["relative_error"] else None
            true_n = int(row["true_n"])
            if est is not None:
                expected = abs(est - true_n) / true_n
                if rel is None or abs(rel - expected) > 1e-12:
                    raise ValueError(
                        f"relative_error {rel} disagrees with |{est} - {true_n}| / {true_n}")
            records.append(ExperimentRecord(
                seed=int(row["seed"]),
                initial_n=int(row["initial_n"]),
                true_n=true_n,
                estimate=est,
                relative_error=rel,
                rounds_or_hops=int(row["rounds_or_hops"]),
                messages_sent=int(row["messages_sent"]),
                completed_via=row["completed_via"],
                wall_ticks=int(row["wall_ticks"]),
            ))
    return records


# -- flat key = value config files --------------------------------------------


def render_config(config: ScenarioConfig) -> str:
    lines = ["# census scenario"]
    for f in dataclasses.fields(ScenarioConfig):
        value = getattr(config, f.name)
        if value is None:
            value = "none"
        elif isinstance(value, bool):
            value = "true" if value else "false"
        lines.append(f"{f.name} = {value}")
    return "\n".join(lines) + "\n"


def parse_config(text: str) -> ScenarioConfig:
    fields = {f.name: f for f in dataclasses.fields(ScenarioConfig)}
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        if key not in fields:
            raise ValueError(f"line {lineno}: unknown key {key!r}")
        values[key] = _parse_value(fields[key].type, val, lineno)
    if "protocol" not in values:
        raise ValueError("config must set 'protocol'")
    config = ScenarioConfig(**values)
    config.validate()
    return config


def _parse_value(field_type: str, val: str, lineno: int):
    t = str(field_type)
    if val.lower() == "none":
        return None
    if t == "bool":
        if val.lower() in ("true", "1", "yes"):
            return True
        if val.lower() in ("false", "0", "no"):
            return False
        raise ValueError(f"line {lineno}: expected a boolean, got {val!r}")
    if t == "int":
        return int(val)
    if t == "float":
        return float(val)
    return val


def load_config(path) -> ScenarioConfig:
    with open(path) as fh:
        return parse_config(fh.read())
