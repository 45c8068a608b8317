"""Directed transaction multigraph and two-layer neighborhood extraction.

The graph is immutable after construction and safe to share across worker
processes or threads.  Per-address adjacency lists are sorted by
(timestamp, tx_hash), which makes every downstream traversal independent of
record input order.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import UnknownAddress
from .ingest import TransactionRecord

DEFAULT_HUB_CAP = 10_000

LEVELS = (-2, -1, 0, 1, 2)


class TransactionGraph:
    """Address vertices, one directed edge per record, sorted adjacency."""

    __slots__ = ("records", "_out", "_in")

    def __init__(self, records: Sequence[TransactionRecord]):
        self.records: tuple[TransactionRecord, ...] = tuple(records)
        out: dict[str, list[int]] = {}
        inc: dict[str, list[int]] = {}
        for idx, rec in enumerate(self.records):
            out.setdefault(rec.input_address, []).append(idx)
            inc.setdefault(rec.input_address, [])
            out.setdefault(rec.output_address, [])
            inc.setdefault(rec.output_address, []).append(idx)
        key = lambda i: (self.records[i].timestamp, self.records[i].tx_hash)
        for lst in out.values():
            lst.sort(key=key)
        for lst in inc.values():
            lst.sort(key=key)
        self._out = out
        self._in = inc

    def __contains__(self, address: str) -> bool:
        return address in self._out

    @property
    def addresses(self):
        return self._out.keys()

    @property
    def n_edges(self) -> int:
        return len(self.records)

    def out_edge_ids(self, address: str) -> list[int]:
        return self._out.get(address, [])

    def in_edge_ids(self, address: str) -> list[int]:
        return self._in.get(address, [])

    def out_edges(self, address: str) -> list[TransactionRecord]:
        return [self.records[i] for i in self._out.get(address, [])]

    def in_edges(self, address: str) -> list[TransactionRecord]:
        return [self.records[i] for i in self._in.get(address, [])]

    def degree(self, address: str) -> int:
        return len(self._out.get(address, ())) + len(self._in.get(address, ()))


def build_graph(records: Iterable[TransactionRecord]) -> TransactionGraph:
    """Construct the immutable multigraph; expects cleaned records."""
    return TransactionGraph(list(records))


@dataclass(frozen=True)
class LayeredSubgraph:
    """Two layers of inflow and outflow neighborhood around ``target``.

    ``levels`` maps -2..2 to disjoint address sets with the target alone at
    level 0.  ``incident_edge_ids`` are the graph edges joining consecutive
    levels (same-level edges and self-transfers are excluded by design, the
    propagation cascade only moves across adjacent levels).
    ``truncated_hubs`` lists neighbors whose expansion was capped.
    """

    target: str
    levels: dict[int, frozenset[str]]
    incident_edge_ids: tuple[int, ...]
    truncated_hubs: frozenset[str]
    graph: TransactionGraph = field(repr=False, compare=False)

    def level_of(self, address: str) -> int | None:
        for lvl, members in self.levels.items():
            if address in members:
                return lvl
        return None

    def incident_edges(self) -> list[TransactionRecord]:
        return [self.graph.records[i] for i in self.incident_edge_ids]


def extract_layers(
    graph: TransactionGraph, target: str, hub_cap: int = DEFAULT_HUB_CAP
) -> LayeredSubgraph:
    """Assign addresses around ``target`` to levels -2..2 and collect edges.

    Each address lands on exactly one level: the smallest absolute level at
    which it is first reached, with the inflow side explored before the
    outflow side on ties.  A frontier address whose total degree exceeds
    ``hub_cap`` stays in its level set but is neither expanded nor scanned
    for incident edges; it is recorded in ``truncated_hubs``.
    """
    if target not in graph:
        raise UnknownAddress(target)
    if hub_cap <= 0:
        raise ValueError("hub_cap must be positive")

    assigned: dict[str, int] = {target: 0}

    # inflow before outflow at equal |level|
    for idx in graph.in_edge_ids(target):
        sender = graph.records[idx].input_address
        if sender not in assigned:
            assigned[sender] = -1
    for idx in graph.out_edge_ids(target):
        recipient = graph.records[idx].output_address
        if recipient not in assigned:
            assigned[recipient] = 1

    truncated: set[str] = set()

    def frontier(level: int) -> list[str]:
        return sorted(a for a, lvl in assigned.items() if lvl == level)

    for addr in frontier(-1):
        if graph.degree(addr) > hub_cap:
            truncated.add(addr)
            continue
        for idx in graph.in_edge_ids(addr):
            sender = graph.records[idx].input_address
            if sender not in assigned:
                assigned[sender] = -2
    for addr in frontier(1):
        if graph.degree(addr) > hub_cap:
            truncated.add(addr)
            continue
        for idx in graph.out_edge_ids(addr):
            recipient = graph.records[idx].output_address
            if recipient not in assigned:
                assigned[recipient] = 2

    # outermost addresses are never expanded, but an oversized one must not
    # be edge-scanned either
    for addr, lvl in assigned.items():
        if abs(lvl) == 2 and graph.degree(addr) > hub_cap:
            truncated.add(addr)

    incident: set[int] = set()
    for addr in sorted(assigned):
        if addr in truncated:
            continue
        lvl = assigned[addr]
        for idx in graph.out_edge_ids(addr):
            other = graph.records[idx].output_address
            other_lvl = assigned.get(other)
            if other_lvl is not None and abs(other_lvl - lvl) == 1:
                incident.add(idx)
        for idx in graph.in_edge_ids(addr):
            other = graph.records[idx].input_address
            other_lvl = assigned.get(other)
            if other_lvl is not None and abs(other_lvl - lvl) == 1:
                incident.add(idx)

    levels = {
        lvl: frozenset(a for a, l in assigned.items() if l == lvl) for lvl in LEVELS
    }
    return LayeredSubgraph(
        target=target,
        levels=levels,
        incident_edge_ids=tuple(sorted(incident)),
        truncated_hubs=frozenset(truncated),
        graph=graph,
    )


def subgraph_to_json(subgraph: LayeredSubgraph) -> str:
    """JSON dump with levels, truncated hubs, and the incident edge list."""
    payload = {
        "target": subgraph.target,
        "levels": {str(lvl): sorted(members) for lvl, members in subgraph.levels.items()},
        "truncated_hubs": sorted(subgraph.truncated_hubs),
        "edges": [
            {
                "tx_hash": e.tx_hash,
                "from": e.input_address,
                "to": e.output_address,
                "network": e.network,
                "coin": e.coin,
                "amount": e.amount,
                "amount_usdt": e.amount_usdt,
                "gas_fee": e.gas_fee,
                "timestamp": e.timestamp,
            }
            for e in subgraph.incident_edges()
        ],
    }
    return json.dumps(payload, indent=2, sort_keys=True)
