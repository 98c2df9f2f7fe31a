"""Dark-market transaction-graph analytics.

Thin Python veneer over the C++ core: ledger ingestion, address clustering,
ego networks, resilience series, and closure-migration analysis.
"""

from ._core import (  # noqa: F401
    DmflowError,
    EgoNetwork,
    EntityPartition,
    Ledger,
    PriceSeries,
    UNITS_PER_COIN,
    __version__,
    build_ego_network,
    cluster,
    ema,
    filter_exchanges,
    generate_files,
    ks_two_sample,
    macd,
    null_model,
    quartiles,
    recovery_time,
    run_pipeline,
    scenario_config,
    scenario_names,
    to_usd,
    validate_transaction_line,
    weekly_series,
)
