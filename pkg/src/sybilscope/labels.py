"""Address labels and label providers.

A label provider answers "what kind of address is this" from some source of
truth.  The file-backed provider is the primary implementation; the HTTP
client speaks a minimal ``GET <base>/labels?address=<a>`` protocol so a real
intelligence API can be dropped in behind the same interface.
"""
from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Protocol

import requests

from .errors import MalformedRow, PartialResponse, ProviderUnavailable

# Highest severity first; the most definitive non-candidate class wins a merge.
CATEGORIES = ("contract", "hot_wallet", "institutional", "eoa", "unknown")
_SEVERITY = {name: rank for rank, name in enumerate(CATEGORIES)}

# Categories removed from the candidate set (their edges are still kept).
EXCLUDED_CATEGORIES = frozenset({"institutional", "hot_wallet", "contract"})


@dataclass(frozen=True)
class AddressLabel:
    address: str
    category: str
    source: str


def merge_labels(a: AddressLabel, b: AddressLabel) -> AddressLabel:
    """Keep the higher-severity label; ties keep the first seen."""
    return b if _SEVERITY[b.category] < _SEVERITY[a.category] else a


class LabelProvider(Protocol):
    def fetch(self, addresses: Iterable[str]) -> tuple[dict[str, AddressLabel], set[str]]:
        """Return (labels found, addresses the provider failed to answer)."""
        ...


class FileLabelProvider:
    """Reads a ``address,category,source`` CSV once and serves lookups."""

    def __init__(self, path):
        self.path = path
        self._table: dict[str, AddressLabel] | None = None

    def _load(self) -> dict[str, AddressLabel]:
        if self._table is not None:
            return self._table
        table: dict[str, AddressLabel] = {}
        try:
            fh = open(self.path, newline="", encoding="utf-8")
        except OSError as exc:
            raise ProviderUnavailable(f"label file not readable: {exc}") from exc
        with fh:
            reader = csv.DictReader(fh)
            required = ("address", "category", "source")
            if reader.fieldnames is None or any(f not in reader.fieldnames for f in required):
                raise MalformedRow(1, "label file header must name address,category,source")
            for row in reader:
                line = reader.line_num
                addr, cat = row.get("address"), row.get("category")
                if not addr or not cat:
                    raise MalformedRow(line, "label row missing address or category")
                if cat not in CATEGORIES:
                    raise MalformedRow(line, f"unknown category {cat!r}")
                label = AddressLabel(addr, cat, row.get("source") or "file")
                table[addr] = merge_labels(table[addr], label) if addr in table else label
        self._table = table
        return table

    def fetch(self, addresses):
        table = self._load()
        found = {a: table[a] for a in addresses if a in table}
        return found, set()


class HttpLabelProvider:
    """Per-address GET client with bounded retries and thread fan-out.

    A 503 or a connection failure means the provider itself is down and
    raises ProviderUnavailable.  A 404 is a legitimate "never heard of it".
    Other failures that survive the retry budget are reported back as failed
    addresses so the caller can decide how hard to be about them.
    """

    def __init__(self, base_url: str, *, timeout: float = 5.0, retries: int = 2,
                 max_workers: int = 8, session: requests.Session | None = None):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self.retries = retries
        self.max_workers = max_workers
        self._session = session or requests.Session()

    def _fetch_one(self, address: str) -> AddressLabel | None:
        last_error: Exception | None = None
        for _ in range(self.retries + 1):
            try:
                resp = self._session.get(
                    f"{self.base_url}/labels",
                    params={"address": address},
                    timeout=self.timeout,
                )
            except requests.ConnectionError as exc:
                raise ProviderUnavailable(f"cannot reach {self.base_url}: {exc}") from exc
            except requests.RequestException as exc:
                last_error = exc
                continue
            if resp.status_code == 503:
                raise ProviderUnavailable(f"{self.base_url} returned 503")
            if resp.status_code == 404:
                return None
            if resp.status_code != 200:
                last_error = RuntimeError(f"status {resp.status_code}")
                continue
            try:
                payload = resp.json()
                category = payload["category"]
            except (ValueError, KeyError, TypeError) as exc:
                last_error = exc
                continue
            if category not in CATEGORIES:
                # foreign taxonomy; treat as unlabeled rather than inventing a class
                return None
            return AddressLabel(address, category, payload.get("source", self.base_url))
        raise LookupError(f"{address}: {last_error}")

    def fetch(self, addresses):
        addresses = list(addresses)
        found: dict[str, AddressLabel] = {}
        failed: set[str] = set()
        if not addresses:
            return found, failed
        with ThreadPoolExecutor(max_workers=self.max_workers) as pool:
            for address, outcome in zip(addresses, pool.map(self._try, addresses)):
                kind, value = outcome
                if kind == "ok" and value is not None:
                    found[address] = value
                elif kind == "failed":
                    failed.add(address)
                elif kind == "down":
                    raise value
        return found, failed

    def _try(self, address: str):
        try:
            return "ok", self._fetch_one(address)
        except ProviderUnavailable as exc:
            return "down", exc
        except LookupError:
            return "failed", None


def load_labels(
    provider: LabelProvider,
    addresses: Iterable[str],
    *,
    strict: bool = False,
) -> dict[str, AddressLabel]:
    """Label every queried address, defaulting missing ones to ``unknown``.

    Strict mode raises PartialResponse when the provider failed on specific
    addresses (as opposed to simply not knowing them).
    """
    queried = set(addresses)
    found, failed = provider.fetch(queried)
    if failed and strict:
        raise PartialResponse(failed)
    out: dict[str, AddressLabel] = {}
    for addr in queried:
        out[addr] = found.get(addr, AddressLabel(addr, "unknown", "default"))
    return out


def write_labels_csv(target, labels: Iterable[AddressLabel]) -> None:
    own = isinstance(target, (str, bytes)) or hasattr(target, "__fspath__")
    fh = open(target, "w", encoding="utf-8", newline="") if own else target
    try:
        writer = csv.writer(fh)
        writer.writerow(["address", "category", "source"])
        for label in labels:
            writer.writerow([label.address, label.category, label.source])
    finally:
        if own:
            fh.close()
