"""Transaction record parsing, serialization, and dataset cleaning.

Input formats
-------------
CSV with header ``tx_hash,input_address,output_address,network,coin,amount,
amount_usdt,gas_fee,timestamp`` (RFC-4180 quoting, UTF-8), or JSONL with one
object per line carrying the same nine keys.

``parse_transactions`` is a lazy single-pass iterator, so a caller can hand
it to a feeder thread and consume records through a bounded queue while the
file is still being read.  Malformed rows are never dropped silently: strict
mode raises on the first one, lenient mode appends a ``MalformedRow`` per bad
row to the supplied ``errors`` sink (or logs a warning when no sink is given).
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import dataclass
from typing import IO, Iterable, Iterator, Mapping

from .errors import DuplicateRecord, MalformedRow
from .labels import AddressLabel, EXCLUDED_CATEGORIES

log = logging.getLogger(__name__)

TRANSACTION_FIELDS = (
    "tx_hash",
    "input_address",
    "output_address",
    "network",
    "coin",
    "amount",
    "amount_usdt",
    "gas_fee",
    "timestamp",
)

SECONDS_PER_DAY = 86_400
DEFAULT_MAX_LIFECYCLE = 365 * SECONDS_PER_DAY


@dataclass(frozen=True)
class TransactionRecord:
    """One directed transfer.

    ``amount`` is the quantity in units of ``coin``; ``amount_usdt`` is its
    USD value at transfer time; ``gas_fee`` is in the chain's native token.
    Self-transfers (input == output) are legal records.
    """

    tx_hash: str
    input_address: str
    output_address: str
    network: str
    coin: str
    amount: float
    amount_usdt: float
    gas_fee: float
    timestamp: int


@dataclass(frozen=True)
class CleaningReport:
    """Accounting emitted by :func:`clean`; the exclusion sets are disjoint."""

    total_addresses: int
    excluded_institutional: int
    excluded_lifecycle: int
    retained_candidates: int
    retained_transactions: int

    def to_dict(self) -> dict:
        return {
            "total_addresses": self.total_addresses,
            "excluded_institutional": self.excluded_institutional,
            "excluded_lifecycle": self.excluded_lifecycle,
            "retained_candidates": self.retained_candidates,
            "retained_transactions": self.retained_transactions,
        }


def _parse_amount(raw, name: str) -> float:
    try:
        value = float(raw)
    except (TypeError, ValueError):
        raise ValueError(f"field {name!r} is not a number: {raw!r}")
    if not math.isfinite(value):
        raise ValueError(f"field {name!r} is not finite: {raw!r}")
    if value < 0:
        raise ValueError(f"field {name!r} is negative: {raw!r}")
    return value


def _parse_timestamp(raw) -> int:
    try:
        value = int(raw)
    except (TypeError, ValueError):
        try:
            as_float = float(raw)
        except (TypeError, ValueError):
            raise ValueError(f"unparseable timestamp: {raw!r}")
        if not (math.isfinite(as_float) and as_float.is_integer()):
            raise ValueError(f"unparseable timestamp: {raw!r}")
        value = int(as_float)
    if value <= 0:
        raise ValueError(f"timestamp must be positive: {raw!r}")
    return value


def record_from_mapping(row: Mapping) -> TransactionRecord:
    """Build a validated record from a parsed row; raises ValueError."""
    for name in TRANSACTION_FIELDS:
        if row.get(name) is None or row.get(name) == "":
            raise ValueError(f"missing field {name!r}")
    return TransactionRecord(
        tx_hash=str(row["tx_hash"]),
        input_address=str(row["input_address"]),
        output_address=str(row["output_address"]),
        network=str(row["network"]),
        coin=str(row["coin"]),
        amount=_parse_amount(row["amount"], "amount"),
        amount_usdt=_parse_amount(row["amount_usdt"], "amount_usdt"),
        gas_fee=_parse_amount(row["gas_fee"], "gas_fee"),
        timestamp=_parse_timestamp(row["timestamp"]),
    )


def _as_text(stream) -> IO[str]:
    if isinstance(stream, (bytes, bytearray)):
        stream = io.BytesIO(stream)
    if isinstance(stream, str):
        return io.StringIO(stream)
    probe = stream.read(0)
    if isinstance(probe, bytes):
        return io.TextIOWrapper(stream, encoding="utf-8", newline="")
    return stream


def _report(err: MalformedRow, strict: bool, errors: list | None) -> None:
    if strict:
        raise err
    if errors is not None:
        errors.append(err)
    else:
        log.warning("skipping malformed row: %s", err)


def parse_transactions(
    stream,
    fmt: str = "csv",
    *,
    strict: bool = False,
    errors: list | None = None,
) -> Iterator[TransactionRecord]:
    """Yield records from a byte or text stream in input order.

    ``fmt`` is ``"csv"`` or ``"jsonl"``.  In strict mode the first malformed
    row raises :class:`MalformedRow`; otherwise bad rows are reported through
    ``errors`` and skipped.
    """
    if fmt not in ("csv", "jsonl"):
        raise ValueError(f"unknown format: {fmt!r}")
    text = _as_text(stream)
    if fmt == "csv":
        yield from _parse_csv(text, strict, errors)
    else:
        yield from _parse_jsonl(text, strict, errors)


def _parse_csv(text: IO[str], strict: bool, errors: list | None):
    reader = csv.DictReader(text)
    if reader.fieldnames is None:
        raise MalformedRow(1, "empty input, header row required")
    missing = [f for f in TRANSACTION_FIELDS if f not in reader.fieldnames]
    if missing:
        raise MalformedRow(1, f"header is missing fields: {', '.join(missing)}")
    for row in reader:
        line = reader.line_num
        if None in row:
            _report(MalformedRow(line, "more cells than header columns"), strict, errors)
            continue
        try:
            yield record_from_mapping(row)
        except ValueError as exc:
            _report(MalformedRow(line, str(exc)), strict, errors)


def _parse_jsonl(text: IO[str], strict: bool, errors: list | None):
    for line_no, line in enumerate(text, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            _report(MalformedRow(line_no, f"invalid JSON: {exc.msg}"), strict, errors)
            continue
        if not isinstance(obj, dict):
            _report(MalformedRow(line_no, "line is not a JSON object"), strict, errors)
            continue
        try:
            yield record_from_mapping(obj)
        except ValueError as exc:
            _report(MalformedRow(line_no, str(exc)), strict, errors)


def read_transaction_file(
    path, fmt: str | None = None, *, strict: bool = False
) -> tuple[list[TransactionRecord], list[MalformedRow]]:
    """Materialize a record file; returns (records, malformed-row reports)."""
    fmt = fmt or ("jsonl" if str(path).endswith((".jsonl", ".ndjson")) else "csv")
    found: list[MalformedRow] = []
    with open(path, "rb") as fh:
        records = list(parse_transactions(fh, fmt, strict=strict, errors=found))
    return records, found


def _format_number(value) -> str:
    # repr round-trips floats exactly, which keeps serialize/parse a fixed point
    if isinstance(value, float) and value.is_integer() and abs(value) < 2**53:
        return repr(value)
    return repr(value) if isinstance(value, float) else str(value)


def write_transactions(target, records: Iterable[TransactionRecord], fmt: str = "csv") -> None:
    """Serialize records in the canonical nine-column layout."""
    own = isinstance(target, (str, bytes)) or hasattr(target, "__fspath__")
    fh = open(target, "w", encoding="utf-8", newline="") if own else target
    try:
        if fmt == "csv":
            writer = csv.writer(fh)
            writer.writerow(TRANSACTION_FIELDS)
            for r in records:
                writer.writerow(
                    [
                        r.tx_hash,
                        r.input_address,
                        r.output_address,
                        r.network,
                        r.coin,
                        _format_number(r.amount),
                        _format_number(r.amount_usdt),
                        _format_number(r.gas_fee),
                        r.timestamp,
                    ]
                )
        elif fmt == "jsonl":
            for r in records:
                fh.write(
                    json.dumps(
                        {name: getattr(r, name) for name in TRANSACTION_FIELDS},
                        ensure_ascii=False,
                    )
                )
                fh.write("\n")
        else:
            raise ValueError(f"unknown format: {fmt!r}")
    finally:
        if own:
            fh.close()


def clean(
    records: Iterable[TransactionRecord],
    labels: Mapping[str, AddressLabel],
    now: int | None = None,
    max_lifecycle: int = DEFAULT_MAX_LIFECYCLE,
    *,
    strict: bool = False,
) -> tuple[set[str], list[TransactionRecord], CleaningReport]:
    """Apply the candidate-cleaning rules.

    Addresses labeled institutional, hot_wallet, or contract leave the
    candidate set but keep their transactions as graph edges (contract
    fan-outs are a signal, not noise).  Addresses whose observed lifecycle
    (last tx minus first tx) exceeds ``max_lifecycle`` are excluded next; the
    two exclusion sets are disjoint by construction.  Record retention only
    drops exact duplicate rows (same tx_hash, same field values); a tx_hash
    reused with different fields is a DuplicateRecord error in strict mode
    and keep-first otherwise.

    ``now`` is accepted as the dataset snapshot clock for interface parity
    with callers that timestamp runs; lifecycle is measured over observed
    records only and never consults it.
    """
    if max_lifecycle <= 0:
        raise ValueError("max_lifecycle must be positive")

    retained: list[TransactionRecord] = []
    by_hash: dict[str, TransactionRecord] = {}
    for rec in records:
        prev = by_hash.get(rec.tx_hash)
        if prev is None:
            by_hash[rec.tx_hash] = rec
            retained.append(rec)
        elif prev != rec:
            if strict:
                raise DuplicateRecord(
                    f"tx_hash {rec.tx_hash!r} repeated with differing fields"
                )
            # lenient: keep the first occurrence
        # identical duplicate row: drop silently

    first_seen: dict[str, int] = {}
    last_seen: dict[str, int] = {}
    for rec in retained:
        for addr in (rec.input_address, rec.output_address):
            t = rec.timestamp
            if addr not in first_seen:
                first_seen[addr] = t
                last_seen[addr] = t
            else:
                if t < first_seen[addr]:
                    first_seen[addr] = t
                if t > last_seen[addr]:
                    last_seen[addr] = t

    observed = set(first_seen)
    label_excluded = {
        addr
        for addr in observed
        if addr in labels and labels[addr].category in EXCLUDED_CATEGORIES
    }
    lifecycle_excluded = {
        addr
        for addr in observed - label_excluded
        if last_seen[addr] - first_seen[addr] > max_lifecycle
    }
    candidates = observed - label_excluded - lifecycle_excluded

    report = CleaningReport(
        total_addresses=len(observed),
        excluded_institutional=len(label_excluded),
        excluded_lifecycle=len(lifecycle_excluded),
        retained_candidates=len(candidates),
        retained_transactions=len(retained),
    )
    return candidates, retained, report
