"""Range-based set reconciliation over order-statistics stores."""

from ._core import (
    Aggregate,
    AggBTree,
    Bound,
    ConfigError,
    DecodeError,
    Error,
    ItemKey,
    OpStats,
    OutOfRangeError,
    PagedSnapshot,
    PagedStore,
    PreconditionError,
    ProtocolError,
    SortedListStore,
    StaleWindowError,
    StorageError,
    Store,
    StoreView,
    SummaryConfig,
    Window,
    generate_scenario,
    reconcile,
    run_scenario,
    verify_file,
    window_aggregate,
    window_open,
    window_select,
    window_split,
)

FAMILIES = ("base_dense", "base_sparse", "scale_dense", "scale_sparse", "stress", "stress_dyn")
BACKENDS = ("ref", "btree", "paged", "btree+window", "paged+window")

__version__ = "0.1.0"
