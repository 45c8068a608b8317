"""Seeded synthetic transaction datasets with planted sybil clusters.

Three funding motifs are planted into benign background traffic:

* star: a hub tops up k-1 spokes with gas and near-equal stablecoin amounts,
  each spoke performs one airdrop-activity transaction and sweeps its funds
  back to the hub;
* chain: funds hop a1 -> a2 -> ... -> ak, every receiving address
  participating right after its hop, the tail optionally sweeping to the head;
* tree: a hub funds intermediates which fund further leaves (branching >= 2),
  every non-root address participating.

All of a cluster's operations land inside its time_jitter window, drawn from
a campaign slice of the timeline (farms spin up shortly before the airdrop).
Benign addresses activate uniformly over the range, receive gas from a small
pool of hot-wallet funders, trade with random peers at Poisson-spread times,
and a configurable fraction also touches the activity address; a thin
"newcomer" slice activates late AND participates quickly, which makes them
hard negatives that only the structural features can separate.

Generation is single-threaded and byte-reproducible for a given spec.
"""
from __future__ import annotations

import dataclasses
import json
import math
import os
import random
from dataclasses import dataclass, field

from .errors import SpecInvalid
from .ingest import TransactionRecord, write_transactions
from .labels import AddressLabel, write_labels_csv
from .rng import substream

PATTERNS = ("star", "chain", "tree")

NATIVE_USD_PRICE = 600.0  # flat conversion for synthetic native-coin transfers

DEFAULT_ACTIVITY_ADDRESS = "0x00000000000000000000000000000000a1cd0000"


@dataclass
class SynthSpec:
    """Knobs for one generated dataset; defaults are the canonical benchmark."""

    n_benign: int = 4400
    n_sybil_clusters: int = 86
    cluster_size_range: tuple[int, int] = (4, 10)
    pattern_mix: dict[str, float] = field(
        default_factory=lambda: {"star": 1.0, "chain": 1.0, "tree": 1.0}
    )
    funding_amount_usdt: tuple[float, float] = (120.0, 12.0)  # (mean, jitter)
    gas_amount: tuple[float, float] = (0.006, 0.003)  # native units (mean, jitter)
    time_jitter: int = 3600
    activity_address: str = DEFAULT_ACTIVITY_ADDRESS
    benign_activity_rate: float = 0.15
    rng_seed: int = 42
    start_time: int = 1_700_000_000
    duration: int = 300 * 86_400
    sybil_window: tuple[float, float] = (0.60, 0.72)  # campaign slice of duration
    newcomer_rate: float = 0.02  # benign hard negatives: late + prompt activity
    benign_tx_rate: float = 4.0  # mean peer transactions per benign address
    sweep_funds: bool = True
    n_funders: int = 12
    networks: tuple[tuple[str, str], ...] = (("bsc", "BNB"),)  # (network, native coin)

    def validate(self) -> None:
        if self.n_benign < 0 or self.n_sybil_clusters < 0:
            raise SpecInvalid("n_benign and n_sybil_clusters must be non-negative")
        lo, hi = self.cluster_size_range
        if lo < 3 or hi < lo:
            raise SpecInvalid("cluster sizes must satisfy 3 <= min <= max")
        if set(self.pattern_mix) - set(PATTERNS):
            raise SpecInvalid(f"pattern_mix keys must be among {PATTERNS}")
        if any(wt < 0 for wt in self.pattern_mix.values()) or sum(self.pattern_mix.values()) <= 0:
            raise SpecInvalid("pattern weights must be non-negative with positive sum")
        if self.time_jitter < 0:
            raise SpecInvalid("time_jitter must be >= 0")
        if not (0.0 <= self.benign_activity_rate <= 1.0):
            raise SpecInvalid("benign_activity_rate must be in [0,1]")
        if not (0.0 <= self.newcomer_rate <= 1.0):
            raise SpecInvalid("newcomer_rate must be in [0,1]")
        if self.duration <= 0 or self.start_time <= 0:
            raise SpecInvalid("start_time and duration must be positive")
        a, b = self.sybil_window
        if not (0.0 <= a <= b <= 1.0):
            raise SpecInvalid("sybil_window must satisfy 0 <= start <= end <= 1")
        if self.funding_amount_usdt[0] <= 0 or self.gas_amount[0] <= 0:
            raise SpecInvalid("funding and gas means must be positive")
        if self.n_funders < 1:
            raise SpecInvalid("n_funders must be >= 1")
        if not self.networks:
            raise SpecInvalid("at least one network is required")
        if self.benign_tx_rate < 0:
            raise SpecInvalid("benign_tx_rate must be >= 0")

    def to_dict(self) -> dict:
        raw = dataclasses.asdict(self)
        raw["cluster_size_range"] = list(self.cluster_size_range)
        raw["funding_amount_usdt"] = list(self.funding_amount_usdt)
        raw["gas_amount"] = list(self.gas_amount)
        raw["sybil_window"] = list(self.sybil_window)
        raw["networks"] = [list(pair) for pair in self.networks]
        return raw

    @classmethod
    def from_dict(cls, data: dict) -> "SynthSpec":
        if not isinstance(data, dict):
            raise SpecInvalid("spec must be a JSON object")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise SpecInvalid(f"unknown spec fields: {', '.join(sorted(unknown))}")
        kwargs = dict(data)
        try:
            if "cluster_size_range" in kwargs:
                kwargs["cluster_size_range"] = tuple(int(x) for x in kwargs["cluster_size_range"])
            if "funding_amount_usdt" in kwargs:
                kwargs["funding_amount_usdt"] = tuple(float(x) for x in kwargs["funding_amount_usdt"])
            if "gas_amount" in kwargs:
                kwargs["gas_amount"] = tuple(float(x) for x in kwargs["gas_amount"])
            if "sybil_window" in kwargs:
                kwargs["sybil_window"] = tuple(float(x) for x in kwargs["sybil_window"])
            if "networks" in kwargs:
                kwargs["networks"] = tuple((str(n), str(c)) for n, c in kwargs["networks"])
            spec = cls(**kwargs)
        except (TypeError, ValueError) as exc:
            raise SpecInvalid(f"bad spec value: {exc}") from exc
        spec.validate()
        return spec

    @classmethod
    def from_json_file(cls, path) -> "SynthSpec":
        try:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SpecInvalid(
                f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}"
            ) from exc
        except OSError as exc:
            raise SpecInvalid(f"cannot read spec file: {exc}") from exc
        return cls.from_dict(data)


@dataclass
class LabeledDataset:
    """Generated records plus ground truth and infra categories."""

    records: list[TransactionRecord]
    labels: dict[str, str]  # address -> "sybil" | "benign"
    cluster_assignments: dict[str, tuple[str, str]]  # address -> (cluster id, pattern)
    address_categories: dict[str, str]  # hot_wallet / contract infra for cleaning
    activity_address: str

    @property
    def sybil_addresses(self) -> set[str]:
        return {a for a, lab in self.labels.items() if lab == "sybil"}


def default_benchmark_spec() -> SynthSpec:
    """The canonical acceptance dataset: ~5,000 candidates, ~12% sybil, seed 42."""
    return SynthSpec()


def _poisson(rng: random.Random, lam: float) -> int:
    if lam <= 0:
        return 0
    threshold = math.exp(-lam)
    k, p = 0, 1.0
    while True:
        p *= rng.random()
        if p <= threshold:
            return k
        k += 1


class _Maker:
    """Address/record factory bound to one RNG stream."""

    def __init__(self, rng: random.Random, taken: set[str]):
        self.rng = rng
        self.taken = taken

    def address(self) -> str:
        while True:
            addr = "0x%040x" % self.rng.getrandbits(160)
            if addr not in self.taken:
                self.taken.add(addr)
                return addr

    def tx(self, t: int, src: str, dst: str, network: str, coin: str,
           amount: float, usdt: float) -> TransactionRecord:
        return TransactionRecord(
            tx_hash="0x%064x" % self.rng.getrandbits(256),
            input_address=src,
            output_address=dst,
            network=network,
            coin=coin,
            amount=round(max(amount, 1e-8), 8),
            amount_usdt=round(max(usdt, 0.0), 6),
            gas_fee=round(self.rng.uniform(1e-4, 6e-4), 8),
            timestamp=int(t),
        )


def _cluster_records(spec: SynthSpec, mk: _Maker, members: list[str], pattern: str,
                     base_time: int, network: str, native: str) -> list[TransactionRecord]:
    rng = mk.rng
    fund_mean, fund_jitter = spec.funding_amount_usdt
    gas_mean, gas_jitter = spec.gas_amount
    act = spec.activity_address
    out: list[TransactionRecord] = []

    def times(n: int) -> list[int]:
        return sorted(base_time + rng.randint(0, max(spec.time_jitter, 0)) for _ in range(n))

    def gas_tx(t, src, dst):
        native_amt = max(gas_mean + rng.uniform(-gas_jitter, gas_jitter), 1e-4)
        return mk.tx(t, src, dst, network, native, native_amt, native_amt * NATIVE_USD_PRICE)

    def fund_value() -> float:
        return max(fund_mean + rng.uniform(-fund_jitter, fund_jitter), 1.0)

    def activity_tx(t, src):
        usdt = rng.uniform(0.5, 2.0)
        return mk.tx(t, src, act, network, "USDT", usdt, usdt)

    def sweep_tx(t, src, dst, funded: float):
        usdt = max(funded - rng.uniform(1.0, 5.0), 0.1)
        return mk.tx(t, src, dst, network, "USDT", usdt, usdt)

    if pattern == "star":
        hub, spokes = members[0], members[1:]
        for spoke in spokes:
            t_gas, t_fund, t_act, t_sweep = times(4)
            funded = fund_value()
            out.append(gas_tx(t_gas, hub, spoke))
            out.append(mk.tx(t_fund, hub, spoke, network, "USDT", funded, funded))
            out.append(activity_tx(t_act, spoke))
            if spec.sweep_funds:
                out.append(sweep_tx(t_sweep, spoke, hub, funded))
    elif pattern == "chain":
        hops = len(members) - 1
        schedule = times(3 * hops + (1 if spec.sweep_funds else 0))
        cursor = 0
        funded = fund_value()
        for i in range(hops):
            src, dst = members[i], members[i + 1]
            out.append(gas_tx(schedule[cursor], src, dst))
            out.append(mk.tx(schedule[cursor + 1], src, dst, network, "USDT", funded, funded))
            out.append(activity_tx(schedule[cursor + 2], dst))
            cursor += 3
            funded = max(funded - rng.uniform(1.0, 4.0), 1.0)
        if spec.sweep_funds:
            out.append(sweep_tx(schedule[cursor], members[-1], members[0], funded))
    elif pattern == "tree":
        parent_of: dict[str, str] = {}
        queue = [members[0]]
        next_member = 1
        while next_member < len(members):
            parent = queue.pop(0) if queue else members[next_member - 1]
            for _ in range(rng.randint(2, 3)):
                if next_member >= len(members):
                    break
                child = members[next_member]
                parent_of[child] = parent
                queue.append(child)
                next_member += 1
        children = list(parent_of)  # creation order, parents before their children
        leaves = [m for m in children if m not in set(parent_of.values())]
        schedule = times(3 * len(children) + (len(leaves) if spec.sweep_funds else 0))
        cursor = 0
        funded_of: dict[str, float] = {}
        for child in children:
            parent = parent_of[child]
            funded = fund_value()
            funded_of[child] = funded
            out.append(gas_tx(schedule[cursor], parent, child))
            out.append(mk.tx(schedule[cursor + 1], parent, child, network, "USDT", funded, funded))
            out.append(activity_tx(schedule[cursor + 2], child))
            cursor += 3
        if spec.sweep_funds:
            for leaf in leaves:
                out.append(sweep_tx(schedule[cursor], leaf, members[0], funded_of[leaf]))
                cursor += 1
    else:
        raise SpecInvalid(f"unknown pattern {pattern!r}")
    return out


def generate(spec: SynthSpec) -> LabeledDataset:
    """Build the labeled dataset; deterministic for a given spec."""
    spec.validate()
    taken: set[str] = {spec.activity_address}

    addr_rng = substream(spec.rng_seed, "synth-addresses")
    addr_maker = _Maker(addr_rng, taken)
    funders = [addr_maker.address() for _ in range(spec.n_funders)]
    benign = [addr_maker.address() for _ in range(spec.n_benign)]

    records: list[TransactionRecord] = []
    labels: dict[str, str] = {}
    clusters: dict[str, tuple[str, str]] = {}

    # planted clusters
    crng = substream(spec.rng_seed, "synth-clusters")
    cmk = _Maker(crng, taken)
    window_lo = spec.start_time + int(spec.sybil_window[0] * spec.duration)
    window_hi = spec.start_time + int(spec.sybil_window[1] * spec.duration)
    names = sorted(spec.pattern_mix)
    weights = [spec.pattern_mix[n] for n in names]
    for i in range(spec.n_sybil_clusters):
        pattern = crng.choices(names, weights=weights)[0]
        size = crng.randint(*spec.cluster_size_range)
        members = [cmk.address() for _ in range(size)]
        base_time = crng.randint(window_lo, max(window_lo, window_hi))
        network, native = spec.networks[crng.randrange(len(spec.networks))]
        records.extend(_cluster_records(spec, cmk, members, pattern, base_time, network, native))
        cluster_id = f"c{i:04d}"
        for member in members:
            labels[member] = "sybil"
            clusters[member] = (cluster_id, pattern)

    # benign background
    brng = substream(spec.rng_seed, "synth-benign")
    bmk = _Maker(brng, taken)
    end = spec.start_time + spec.duration
    n_newcomers = int(round(spec.n_benign * spec.newcomer_rate))
    for pos, addr in enumerate(benign):
        labels[addr] = "benign"
        newcomer = pos < n_newcomers
        if newcomer:
            activation = brng.randint(window_lo, max(window_lo, window_hi))
        else:
            activation = spec.start_time + brng.randint(0, int(spec.duration * 0.92))
        funder = funders[brng.randrange(len(funders))]
        network, native = spec.networks[brng.randrange(len(spec.networks))]

        # occasionally a token lands before the first gas top-up
        if not newcomer and brng.random() < 0.15:
            t_pre = max(spec.start_time, activation - brng.randint(3600, 10 * 86_400))
            peer = benign[brng.randrange(len(benign))]
            usdt = round(brng.lognormvariate(3.2, 1.1), 2)
            records.append(bmk.tx(t_pre, peer, addr, network, "USDT", usdt, usdt))

        gas_native = brng.uniform(0.002, 0.02)
        records.append(
            bmk.tx(activation, funder, addr, network, native, gas_native,
                   gas_native * NATIVE_USD_PRICE)
        )

        n_extra = _poisson(brng, spec.benign_tx_rate) if not newcomer else brng.randint(1, 2)
        for _ in range(n_extra):
            t = brng.randint(activation, max(activation, end))
            peer = funder if brng.random() < 0.1 else benign[brng.randrange(len(benign))]
            if peer == addr:
                peer = benign[(pos + 1) % len(benign)] if len(benign) > 1 else funder
            coin = "USDT" if brng.random() < 0.85 else ("BUSD" if brng.random() < 0.5 else "CAKE")
            usdt = round(brng.lognormvariate(3.2, 1.1), 2)
            if brng.random() < 0.5:
                records.append(bmk.tx(t, addr, peer, network, coin, usdt, usdt))
            else:
                records.append(bmk.tx(t, peer, addr, network, coin, usdt, usdt))

        participates = newcomer or brng.random() < spec.benign_activity_rate
        if participates:
            if newcomer:
                t_act = activation + brng.randint(600, 3 * 86_400)
            else:
                t_act = brng.randint(activation, max(activation, end))
            usdt = brng.uniform(0.5, 2.0)
            records.append(
                bmk.tx(min(t_act, end), addr, spec.activity_address, network, "USDT", usdt, usdt)
            )

    for funder in funders:
        labels[funder] = "benign"
    labels[spec.activity_address] = "benign"

    categories = {f: "hot_wallet" for f in funders}
    categories[spec.activity_address] = "contract"

    records.sort(key=lambda r: (r.timestamp, r.tx_hash))
    return LabeledDataset(
        records=records,
        labels=labels,
        cluster_assignments=clusters,
        address_categories=categories,
        activity_address=spec.activity_address,
    )


def write_dataset(dataset: LabeledDataset, out_dir) -> dict[str, str]:
    """Write records.csv, labels.csv, address_labels.csv, activity_addresses.txt."""
    os.makedirs(out_dir, exist_ok=True)
    paths = {
        "records": os.path.join(out_dir, "records.csv"),
        "labels": os.path.join(out_dir, "labels.csv"),
        "address_labels": os.path.join(out_dir, "address_labels.csv"),
        "activity_addresses": os.path.join(out_dir, "activity_addresses.txt"),
    }
    write_transactions(paths["records"], dataset.records, fmt="csv")
    with open(paths["labels"], "w", encoding="utf-8", newline="") as fh:
        fh.write("address,label,cluster_id,pattern\n")
        for addr in sorted(dataset.labels):
            cluster_id, pattern = dataset.cluster_assignments.get(addr, ("", ""))
            fh.write(f"{addr},{dataset.labels[addr]},{cluster_id},{pattern}\n")
    write_labels_csv(
        paths["address_labels"],
        [
            AddressLabel(addr, category, "synthetic")
            for addr, category in sorted(dataset.address_categories.items())
        ],
    )
    with open(paths["activity_addresses"], "w", encoding="utf-8") as fh:
        fh.write(dataset.activity_address + "\n")
    return paths
