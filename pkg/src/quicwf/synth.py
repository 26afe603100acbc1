"""Deterministic synthetic website traffic with network impairments.

A visit is a strict request/response exchange: one client request per
resource, answered by ``ceil(size / mtu_payload)`` server packets. Packets are
observed at the client side, so a lost client packet is seen twice (original
plus retransmission) and a lost server packet is seen only as its
retransmission.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .trace import Protocol, Trace

HEADER_BYTES = 54
RETRANSMIT_EXTRA = 0.001  # seconds added to 2 * delay


def _rng(*keys: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([k & (2**64 - 1) for k in keys])))


@dataclass(frozen=True)
class WebsiteModel:
    site_id: str
    resources: tuple[int, ...]          # bytes; resources[0] is the HTML document
    request_size_range: tuple[int, int] = (100, 500)
    seed: int = 0

    def __post_init__(self):
        if len(self.resources) < 1:
            raise ValueError("a website needs at least one resource")
        if min(self.resources) < 1:
            raise ValueError("resource sizes must be >= 1 byte")
        lo, hi = self.request_size_range
        if not 1 <= lo <= hi:
            raise ValueError(f"bad request_size_range {self.request_size_range}")
        object.__setattr__(self, "resources", tuple(int(r) for r in self.resources))
        object.__setattr__(self, "request_size_range", (int(lo), int(hi)))

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, obj: dict) -> "WebsiteModel":
        return cls(obj["site_id"], tuple(obj["resources"]), tuple(obj["request_size_range"]),
                   obj.get("seed", 0))


@dataclass(frozen=True)
class NetworkCondition:
    bandwidth: float = 0.0    # bits/s, 0 = unlimited
    delay: float = 0.01       # one-way seconds
    loss: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.loss < 1.0:
            raise ValueError(f"loss must be in [0, 1), got {self.loss}")
        if self.delay < 0:
            raise ValueError(f"delay must be >= 0, got {self.delay}")
        if self.bandwidth < 0:
            raise ValueError(f"bandwidth must be >= 0, got {self.bandwidth}")

    @property
    def timeout(self) -> float:
        return 2 * self.delay + RETRANSMIT_EXTRA

    def serialization(self, size: int) -> float:
        return size * 8 / self.bandwidth if self.bandwidth > 0 else 0.0


@dataclass(frozen=True)
class VisitConfig:
    protocol: Protocol = Protocol.IQUIC
    mtu_payload: int = 1400
    seed: int = 0
    size_jitter: float = 0.0   # log-normal sigma applied to resource sizes per visit
    order_window: float = 0.0  # embedded resources fetched in order of index + U(0, window)

    def __post_init__(self):
        if self.order_window < 0:
            raise ValueError("order_window must be >= 0")
        if self.mtu_payload < 160:
            raise ValueError(f"mtu_payload must be >= 160, got {self.mtu_payload}")
        if self.size_jitter < 0:
            raise ValueError("size_jitter must be >= 0")
        object.__setattr__(self, "protocol", Protocol.parse(self.protocol))


@dataclass(frozen=True)
class SiteParams:
    """Resource-profile distribution for generated sites."""

    n_resources: tuple[int, int] = (4, 12)
    size_median: float = 6_000.0
    size_sigma: float = 1.2
    request_size_range: tuple[int, int] = (100, 500)

    def __post_init__(self):
        lo, hi = self.n_resources
        if not 1 <= lo <= hi:
            raise ValueError(f"bad n_resources range {self.n_resources}")
        if self.size_median <= 0 or self.size_sigma < 0:
            raise ValueError("size_median must be > 0 and size_sigma >= 0")
        rlo, rhi = self.request_size_range
        if not 1 <= rlo <= rhi:
            raise ValueError(f"bad request_size_range {self.request_size_range}")

    def quartiles(self) -> tuple[float, float]:
        from scipy.stats import lognorm
        dist = lognorm(s=self.size_sigma, scale=self.size_median)
        return float(dist.ppf(0.25)), float(dist.ppf(0.75))


def generate_site(seed: int, params: SiteParams = SiteParams(),
                  site_id: Optional[str] = None) -> WebsiteModel:
    rng = _rng(seed, 0x517E)
    lo, hi = params.n_resources
    n = int(rng.integers(lo, hi + 1))
    sizes = np.rint(rng.lognormal(math.log(params.size_median), params.size_sigma, n))
    sizes = np.maximum(sizes, 1).astype(np.int64)
    return WebsiteModel(site_id or f"site-{seed}", tuple(sizes.tolist()),
                        params.request_size_range, seed)


def _chunks(size: int, mtu: int) -> list[int]:
    full, rem = divmod(size, mtu)
    return [mtu] * full + ([rem] if rem else [])


def simulate_visit(site: WebsiteModel, network: NetworkCondition = NetworkCondition(),
                   config: VisitConfig = VisitConfig()) -> Trace:
    rng = _rng(config.seed, 0x7151)
    jmax = 0.2 * network.delay
    lo, hi = site.request_size_range
    sizes = np.asarray(site.resources, dtype=np.float64)
    if config.size_jitter > 0:
        sizes = np.maximum(np.rint(sizes * rng.lognormal(0.0, config.size_jitter, len(sizes))), 1)
    if config.order_window > 0 and len(sizes) > 2:
        keys = np.arange(1, len(sizes)) + rng.uniform(0.0, config.order_window, len(sizes) - 1)
        sizes = np.concatenate([sizes[:1], sizes[1:][np.argsort(keys, kind="stable")]])

    events: list[tuple[float, int, int, int]] = []  # (time, seq, dir, wire size)

    def observe(t, d, size):
        events.append((t, len(events), d, size))

    clock = 0.0
    for r in sizes.astype(np.int64).tolist():
        req = int(rng.integers(lo, hi + 1)) + HEADER_BYTES
        t_req = clock + rng.uniform(0.0, jmax)
        observe(t_req, 1, req)
        server_rx = t_req + network.delay + network.serialization(req)
        if rng.random() < network.loss:
            observe(t_req + network.timeout, 1, req)
            server_rx += network.timeout
        t = server_rx + network.delay
        done = t
        for chunk in _chunks(r, config.mtu_payload):
            wire = chunk + HEADER_BYTES
            t += network.serialization(wire) + rng.uniform(0.0, jmax)
            arrive = t
            if rng.random() < network.loss:
                arrive = t + network.timeout
            observe(arrive, -1, wire)
            done = max(done, arrive)
        clock = done

    events.sort()
    times = np.array([e[0] for e in events])
    dirs = np.array([e[2] for e in events], dtype=np.int8)
    wires = np.array([e[3] for e in events], dtype=np.int64)
    return Trace(times, dirs, wires, config.protocol, site.site_id)


def site_seeds(seed: int, n_sites: int) -> list[int]:
    ss = np.random.SeedSequence(seed & (2**64 - 1))
    return [int(c.generate_state(1, np.uint64)[0]) for c in ss.spawn(n_sites)]


@dataclass(frozen=True)
class Corpus:
    sites: tuple[WebsiteModel, ...]
    traces: tuple[Trace, ...] = field(repr=False)


def generate_corpus(n_sites: int, visits_per_site: int,
                    network: NetworkCondition = NetworkCondition(),
                    protocol: Protocol | str = Protocol.IQUIC, seed: int = 0,
                    params: SiteParams = SiteParams(), mtu_payload: int = 1400,
                    size_jitter: float = 0.0, order_window: float = 4.0,
                    sites: Optional[Sequence[WebsiteModel]] = None) -> Corpus:
    """Sites are drawn from ``seed`` alone, so impairments can vary over a fixed site set."""
    if n_sites < 2:
        raise ValueError(f"n_sites must be >= 2, got {n_sites}")
    if visits_per_site < 1:
        raise ValueError(f"visits_per_site must be >= 1, got {visits_per_site}")
    protocol = Protocol.parse(protocol)
    if sites is None:
        width = max(3, len(str(n_sites - 1)))
        sites = [generate_site(s, params, f"site{i:0{width}d}")
                 for i, s in enumerate(site_seeds(seed, n_sites))]
    traces = []
    for site in sites:
        for v in range(visits_per_site):
            cfg = VisitConfig(protocol, mtu_payload, (site.seed * 1_000_003 + v) & (2**64 - 1),
                              size_jitter, order_window)
            traces.append(simulate_visit(site, network, cfg))
    return Corpus(tuple(sites), tuple(traces))


def generate_dataset(n_sites: int, visits_per_site: int,
                     network: NetworkCondition = NetworkCondition(),
                     protocol: Protocol | str = Protocol.IQUIC, seed: int = 0,
                     params: SiteParams = SiteParams(), mtu_payload: int = 1400,
                     size_jitter: float = 0.0, order_window: float = 4.0) -> list[Trace]:
    return list(generate_corpus(n_sites, visits_per_site, network, protocol, seed, params,
                                mtu_payload, size_jitter, order_window).traces)


def dump_sites(sites: Sequence[WebsiteModel], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump([s.to_json() for s in sites], fh, indent=1)


def load_sites(path) -> list[WebsiteModel]:
    with open(path, encoding="utf-8") as fh:
        return [WebsiteModel.from_json(o) for o in json.load(fh)]
