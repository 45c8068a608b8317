"""Per-address feature computation over a layered subgraph.

Every candidate address gets a fixed 75-slot vector: 7 lifecycle-time
features, 60 amount statistics (2 directions x 6 series x 5 statistics), and
8 network-structure counts.  The slot order is a frozen contract; see
FEATURE_NAMES and the README table.

All functions here are pure over immutable inputs, so per-address extraction
parallelizes freely and must stay bit-identical regardless of worker count.
The only ordering that matters for float reproducibility is the series
construction order, which is fixed: the target's own edges first (adjacency
order), then contributions per level in sorted-address order.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ArityMismatch
from .graph import DEFAULT_HUB_CAP, LayeredSubgraph, TransactionGraph, extract_layers

MISSING = -1  # sentinel for "event never happened"; real timestamps are > 0

DEFAULT_NATIVE_COINS: dict[str, str] = {
    "ethereum": "ETH",
    "eth": "ETH",
    "bsc": "BNB",
    "bnb": "BNB",
    "polygon": "MATIC",
    "arbitrum": "ETH",
    "optimism": "ETH",
    "base": "ETH",
    "avalanche": "AVAX",
}

TIME_FEATURE_NAMES = (
    "first_gas_time",
    "first_tx_time",
    "first_activity_time",
    "interval_tx_gas",
    "interval_activity_tx",
    "interval_activity_gas",
    "active_duration",
)

AMOUNT_SERIES_NAMES = (
    "level0_usdt",
    "level0_native",
    "level0_gas",
    "fused1_usdt",
    "fused2_usdt",
    "counterparty_total_usdt",
)

STAT_NAMES = ("min", "max", "avg", "median", "var")

NETWORK_FEATURE_NAMES = (
    "in_degree",
    "out_degree",
    "layer1_in_addrs",
    "layer1_out_addrs",
    "layer2_in_addrs",
    "layer2_out_addrs",
    "coin_count",
    "network_count",
)

AMOUNT_FEATURE_NAMES = tuple(
    f"{direction}_{series}_{stat}"
    for direction in ("in", "out")
    for series in AMOUNT_SERIES_NAMES
    for stat in STAT_NAMES
)

FEATURE_NAMES: tuple[str, ...] = TIME_FEATURE_NAMES + AMOUNT_FEATURE_NAMES + NETWORK_FEATURE_NAMES

N_FEATURES = len(FEATURE_NAMES)
assert N_FEATURES == 75


@dataclass(frozen=True)
class TimeFeatures:
    """Lifecycle timestamps and intervals; missing events carry -1."""

    first_gas_time: float
    first_tx_time: float
    first_activity_time: float
    interval_tx_gas: float
    interval_activity_tx: float
    interval_activity_gas: float
    active_duration: float

    def as_tuple(self) -> tuple[float, ...]:
        return (
            self.first_gas_time,
            self.first_tx_time,
            self.first_activity_time,
            self.interval_tx_gas,
            self.interval_activity_tx,
            self.interval_activity_gas,
            self.active_duration,
        )


@dataclass(frozen=True)
class AmountSeriesSet:
    """The twelve raw series feeding the 60 amount statistics.

    Fused series follow the propagation cascade: level-1 fusion merges the
    target's own amounts with those of its direct layer (restricted to edges
    joining consecutive levels), level-2 fusion additionally merges the outer
    layer's amounts.  Each fused series therefore contains its predecessor as
    a multiset prefix.
    """

    in_series: tuple[tuple[float, ...], ...]
    out_series: tuple[tuple[float, ...], ...]

    def ordered(self) -> tuple[tuple[float, ...], ...]:
        return self.in_series + self.out_series


@dataclass(frozen=True)
class NetworkFeatures:
    in_degree: int
    out_degree: int
    layer1_in_addrs: int
    layer1_out_addrs: int
    layer2_in_addrs: int
    layer2_out_addrs: int
    coin_count: int
    network_count: int

    def as_tuple(self) -> tuple[int, ...]:
        return (
            self.in_degree,
            self.out_degree,
            self.layer1_in_addrs,
            self.layer1_out_addrs,
            self.layer2_in_addrs,
            self.layer2_out_addrs,
            self.coin_count,
            self.network_count,
        )


@dataclass(frozen=True)
class FeatureVector:
    address: str
    values: tuple[float, ...]

    def __post_init__(self):
        if len(self.values) != N_FEATURES:
            raise ArityMismatch(
                f"feature vector for {self.address!r} has {len(self.values)} slots, "
                f"expected {N_FEATURES}"
            )

    @property
    def names(self) -> tuple[str, ...]:
        return FEATURE_NAMES


def stats5(series: Sequence[float]) -> tuple[float, float, float, float, float]:
    """(min, max, avg, median, var) of a series.

    Population variance (divide by n); the median of an even-length series is
    the mean of the two middle values; an empty series yields all zeros.
    """
    if len(series) == 0:
        return (0.0, 0.0, 0.0, 0.0, 0.0)
    arr = np.asarray(series, dtype=np.float64)
    return (
        float(arr.min()),
        float(arr.max()),
        float(arr.mean()),
        float(np.median(arr)),
        float(arr.var()),
    )


def compute_time_features(
    subgraph: LayeredSubgraph,
    activity_addresses: Iterable[str],
    native_coins: Mapping[str, str] = DEFAULT_NATIVE_COINS,
) -> TimeFeatures:
    """Lifecycle features from the target's own transactions (no propagation).

    A transaction counts as a gas receipt when the target receives the native
    coin of its network, per ``native_coins``.  First activity is the first
    transfer from the target into ``activity_addresses``.  Negative
    interval_tx_gas is legitimate: an incoming token transfer can predate the
    first gas top-up.
    """
    graph = subgraph.graph
    target = subgraph.target
    activity = set(activity_addresses)

    in_edges = graph.in_edges(target)
    out_edges = graph.out_edges(target)
    all_ts = [e.timestamp for e in in_edges] + [e.timestamp for e in out_edges]

    t_gas = min(
        (e.timestamp for e in in_edges if e.coin == native_coins.get(e.network)),
        default=MISSING,
    )
    t_first = min(all_ts, default=MISSING)
    t_activity = min(
        (e.timestamp for e in out_edges if e.output_address in activity),
        default=MISSING,
    )
    t_last = max(all_ts, default=MISSING)

    def interval(a: float, b: float) -> float:
        return a - b if a != MISSING and b != MISSING else MISSING

    return TimeFeatures(
        first_gas_time=float(t_gas),
        first_tx_time=float(t_first),
        first_activity_time=float(t_activity),
        interval_tx_gas=interval(t_first, t_gas),
        interval_activity_tx=interval(t_activity, t_first),
        interval_activity_gas=interval(t_activity, t_gas),
        active_duration=interval(t_last, t_first),
    )


def _edge_sort_key(record):
    return (record.timestamp, record.tx_hash)


def propagate_and_fuse(subgraph: LayeredSubgraph) -> AmountSeriesSet:
    """Collect the six amount series per direction for the target.

    Outflow side: the target's own outgoing usdt amounts, then (fused level 1)
    the outgoing amounts of each level-1 address over incident edges, then
    (fused level 2) those of level-2 addresses; additive degree-style
    quantities fuse by summation and surface as the layer counts in
    NetworkFeatures.  Inflow side is symmetric over levels -1 and -2.
    Self-transfers stay out of every amount series, matching the exclusion of
    same-level edges from the cascade.
    """
    graph = subgraph.graph
    target = subgraph.target

    own_in = [e for e in graph.in_edges(target) if e.input_address != target]
    own_out = [e for e in graph.out_edges(target) if e.output_address != target]

    incident_in: dict[str, list] = {}
    incident_out: dict[str, list] = {}
    for idx in subgraph.incident_edge_ids:
        e = graph.records[idx]
        incident_out.setdefault(e.input_address, []).append(e)
        incident_in.setdefault(e.output_address, []).append(e)
    for edges in incident_in.values():
        edges.sort(key=_edge_sort_key)
    for edges in incident_out.values():
        edges.sort(key=_edge_sort_key)

    def layer_amounts(level: int, bucket: dict[str, list]) -> list[float]:
        amounts: list[float] = []
        for addr in sorted(subgraph.levels[level]):
            amounts.extend(e.amount_usdt for e in bucket.get(addr, ()))
        return amounts

    in_usdt = [e.amount_usdt for e in own_in]
    fused1_in = in_usdt + layer_amounts(-1, incident_in)
    fused2_in = fused1_in + layer_amounts(-2, incident_in)

    out_usdt = [e.amount_usdt for e in own_out]
    fused1_out = out_usdt + layer_amounts(1, incident_out)
    fused2_out = fused1_out + layer_amounts(2, incident_out)

    def counterparty_totals(edges, key) -> list[float]:
        totals: dict[str, float] = {}
        for e in edges:
            other = key(e)
            totals[other] = totals.get(other, 0.0) + e.amount_usdt
        return [totals[a] for a in sorted(totals)]

    in_series = (
        tuple(in_usdt),
        tuple(e.amount for e in own_in),
        tuple(e.gas_fee for e in own_in),
        tuple(fused1_in),
        tuple(fused2_in),
        tuple(counterparty_totals(own_in, lambda e: e.input_address)),
    )
    out_series = (
        tuple(out_usdt),
        tuple(e.amount for e in own_out),
        tuple(e.gas_fee for e in own_out),
        tuple(fused1_out),
        tuple(fused2_out),
        tuple(counterparty_totals(own_out, lambda e: e.output_address)),
    )
    return AmountSeriesSet(in_series=in_series, out_series=out_series)


def compute_amount_features(series_set: AmountSeriesSet) -> tuple[float, ...]:
    """Apply stats5 to the twelve series in canonical order (60 values)."""
    values: list[float] = []
    for series in series_set.ordered():
        values.extend(stats5(series))
    return tuple(values)


def compute_network_features(
    graph: TransactionGraph, subgraph: LayeredSubgraph
) -> NetworkFeatures:
    """Degree, layer-size, and diversity counts for the target.

    Degrees count edges (parallel edges included); layer sizes count distinct
    addresses, so the two families stay non-redundant.
    """
    target = subgraph.target
    coins = set()
    networks = set()
    for e in graph.in_edges(target):
        coins.add(e.coin)
        networks.add(e.network)
    for e in graph.out_edges(target):
        coins.add(e.coin)
        networks.add(e.network)
    return NetworkFeatures(
        in_degree=len(graph.in_edge_ids(target)),
        out_degree=len(graph.out_edge_ids(target)),
        layer1_in_addrs=len(subgraph.levels[-1]),
        layer1_out_addrs=len(subgraph.levels[1]),
        layer2_in_addrs=len(subgraph.levels[-2]),
        layer2_out_addrs=len(subgraph.levels[2]),
        coin_count=len(coins),
        network_count=len(networks),
    )


def assemble_feature_vector(
    address: str,
    time_features: TimeFeatures,
    amount_features: Sequence[float],
    network_features: NetworkFeatures,
) -> FeatureVector:
    """Concatenate the three blocks in the canonical 75-slot order."""
    t = time_features.as_tuple()
    a = tuple(float(x) for x in amount_features)
    n = tuple(float(x) for x in network_features.as_tuple())
    if len(t) != len(TIME_FEATURE_NAMES):
        raise ArityMismatch(f"time block has {len(t)} slots, expected {len(TIME_FEATURE_NAMES)}")
    if len(a) != len(AMOUNT_FEATURE_NAMES):
        raise ArityMismatch(f"amount block has {len(a)} slots, expected {len(AMOUNT_FEATURE_NAMES)}")
    if len(n) != len(NETWORK_FEATURE_NAMES):
        raise ArityMismatch(
            f"network block has {len(n)} slots, expected {len(NETWORK_FEATURE_NAMES)}"
        )
    return FeatureVector(address=address, values=t + a + n)


def compute_features(
    graph: TransactionGraph,
    address: str,
    activity_addresses: Iterable[str],
    native_coins: Mapping[str, str] = DEFAULT_NATIVE_COINS,
    hub_cap: int = DEFAULT_HUB_CAP,
) -> FeatureVector:
    """Extract the full vector for one address."""
    subgraph = extract_layers(graph, address, hub_cap)
    time_features = compute_time_features(subgraph, activity_addresses, native_coins)
    amount_features = compute_amount_features(propagate_and_fuse(subgraph))
    network_features = compute_network_features(graph, subgraph)
    return assemble_feature_vector(address, time_features, amount_features, network_features)


_WORKER_CTX: dict = {}


def _init_worker(graph, activity, native_coins, hub_cap):
    _WORKER_CTX["args"] = (graph, activity, native_coins, hub_cap)


def _extract_one(address: str) -> tuple[str, tuple[float, ...]]:
    graph, activity, native_coins, hub_cap = _WORKER_CTX["args"]
    return address, compute_features(graph, address, activity, native_coins, hub_cap).values


def build_feature_matrix(
    graph: TransactionGraph,
    candidates: Iterable[str],
    activity_addresses: Iterable[str] = (),
    native_coins: Mapping[str, str] = DEFAULT_NATIVE_COINS,
    hub_cap: int = DEFAULT_HUB_CAP,
    n_workers: int = 1,
) -> tuple[list[str], np.ndarray]:
    """Feature matrix for all candidates, rows in sorted-address order.

    The result is bit-identical for any ``n_workers``: each row is a pure
    function of the immutable graph, and row order is fixed by sorting.
    """
    ordered = sorted(set(candidates))
    activity = frozenset(activity_addresses)
    matrix = np.zeros((len(ordered), N_FEATURES), dtype=np.float64)
    if n_workers <= 1 or len(ordered) < 4:
        for i, addr in enumerate(ordered):
            matrix[i] = compute_features(graph, addr, activity, native_coins, hub_cap).values
        return ordered, matrix

    import multiprocessing as mp

    ctx = mp.get_context("fork")
    chunk = max(1, len(ordered) // (n_workers * 8))
    with ctx.Pool(
        processes=n_workers,
        initializer=_init_worker,
        initargs=(graph, activity, dict(native_coins), hub_cap),
    ) as pool:
        for i, (_, values) in enumerate(pool.imap(_extract_one, ordered, chunksize=chunk)):
            matrix[i] = values
    return ordered, matrix


def feature_name_manifest() -> str:
    """JSON manifest of the canonical feature layout for downstream tools."""
    payload = {
        "version": 1,
        "n_features": N_FEATURES,
        "names": list(FEATURE_NAMES),
        "blocks": {
            "time": list(TIME_FEATURE_NAMES),
            "amount": {
                "directions": ["in", "out"],
                "series": list(AMOUNT_SERIES_NAMES),
                "statistics": list(STAT_NAMES),
            },
            "network": list(NETWORK_FEATURE_NAMES),
        },
        "missing_event_sentinel": MISSING,
    }
    return json.dumps(payload, indent=2, sort_keys=True)
