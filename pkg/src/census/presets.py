"""Named experiment sweeps shipped with the package.

Each preset is an ordered list of labelled scenarios at network sizes of
20 to 100 nodes.  ``fig1_random_tour`` compares the two tour variants on
static and slowly churning topologies, ``tbl1_gossip`` compares the two
gossip variants to integer-exact convergence, and ``mobility_stress``
sweeps churn intensity for the adapted protocols.
"""

from __future__ import annotations

import os

from .experiments import ScenarioConfig, emit_csv, run_batch, summarize

# (n_masters, n_slaves, pmp_fraction, max_pmp_degree) per total size.
# Tour topologies are PMP-dense so one visited master's degree already spans
# much of the network; gossip topologies carry more masters so cluster rounds
# have work to do.
_TOUR_SIZES = {20: (3, 17, 0.7, 3), 60: (4, 56, 0.6, 4), 100: (4, 96, 0.6, 4)}
_GOSSIP_SIZES = {20: (5, 15, 0.3, 3), 60: (9, 51, 0.3, 3), 100: (12, 88, 0.3, 3)}

_CHURN_LEVELS = {
    "static": dict(migration_rate=0.0, pmp_link_rate=0.0),
    "low": dict(migration_rate=0.02, pmp_link_rate=0.005),
    "medium": dict(migration_rate=0.05, pmp_link_rate=0.01),
    "high": dict(migration_rate=0.1, pmp_link_rate=0.02),
}


def _scenario(protocol: str, size: int, churn: str, reps: int, seed: int,
              **overrides) -> ScenarioConfig:
    table = _TOUR_SIZES if protocol.startswith("rt_") else _GOSSIP_SIZES
    n_masters, n_slaves, pmp_fraction, max_deg = table[size]
    return ScenarioConfig(
        protocol=protocol,
        n_masters=n_masters,
        n_slaves=n_slaves,
        pmp_fraction=pmp_fraction,
        max_pmp_degree=max_deg,
        repetitions=reps,
        base_seed=seed,
        **_CHURN_LEVELS[churn],
        **overrides,
    )


def _fig1_random_tour() -> list[tuple[str, ScenarioConfig]]:
    scenarios = []
    seed = 10_000
    for size in (20, 60, 100):
        for churn in ("static", "low"):
            for protocol in ("rt_adapted", "rt_baseline"):
                label = f"n{size}_{churn}_{protocol}"
                scenarios.append((label, _scenario(protocol, size, churn, reps=10, seed=seed)))
                seed += 1_000
    return scenarios


def _tbl1_gossip() -> list[tuple[str, ScenarioConfig]]:
    scenarios = []
    seed = 50_000
    for size in (20, 60, 100):
        for protocol in ("gossip_adapted", "gossip_baseline"):
            label = f"n{size}_{protocol}"
            scenarios.append((label, _scenario(protocol, size, "static", reps=5, seed=seed,
                                               epsilon=0.0)))
            seed += 1_000
    return scenarios


def _mobility_stress() -> list[tuple[str, ScenarioConfig]]:
    scenarios = []
    seed = 90_000
    for protocol in ("rt_adapted", "gossip_adapted"):
        for churn in ("low", "medium", "high"):
            label = f"n60_{churn}_{protocol}"
            scenarios.append((label, _scenario(protocol, 60, churn, reps=10, seed=seed)))
            seed += 1_000
    return scenarios


PRESETS = {
    "fig1_random_tour": _fig1_random_tour,
    "tbl1_gossip": _tbl1_gossip,
    "mobility_stress": _mobility_stress,
}


def preset_scenarios(name: str) -> list[tuple[str, ScenarioConfig]]:
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; available: {', '.join(sorted(PRESETS))}")
    return PRESETS[name]()


def run_preset(name: str, out_dir: str = ".") -> tuple[str, str]:
    """Run a preset sweep; writes <name>_records.csv and <name>_summary.csv."""
    scenarios = preset_scenarios(name)
    labelled_rows = []
    summaries = []
    for label, config in scenarios:
        records = run_batch(config)
        labelled_rows.extend(((label, config.protocol), r) for r in records)
        summaries.append(summarize(records, label=label))
    records_path = os.path.join(out_dir, f"{name}_records.csv")
    summary_path = os.path.join(out_dir, f"{name}_summary.csv")
    emit_csv(labelled_rows, records_path, kind="records", extra_header=["scenario", "protocol"])
    emit_csv(summaries, summary_path, kind="summary")
    return records_path, summary_path
