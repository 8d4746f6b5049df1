"""Desk-scale deployment of the three tiers plus the centralized baseline.

``deploy`` mirrors ``snapshot.registered_domains``: one tier-3 node per
organisation, one tier-2 node per second-level domain and one tier-1
federator per country. A root federator over all countries answers global
queries; it is not a DRIS node and has no registry entry.
"""

from __future__ import annotations

import json
import random
import time
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

from .registry import NAMESPACE, Registry
from .text_index import FOREIGN, SearchHit
from .tier1 import Federator
from .tier2 import HarvestReport, Tier2Node
from .tier3 import Tier3Node
from .transport import InProcessTransport, SocketTransport
from .web import (
    DomainName,
    Fetcher,
    MutationSpec,
    WebSnapshot,
    dumps_canonical,
    load_snapshot,
    mutate_web,
    save_snapshot,
    url_host,
)

ROOT_ENDPOINT = f"http://{NAMESPACE}"
BASELINE_BUDGET_FRACTION = 0.6


def make_transport(kind: str):
    if kind == "inproc":
        return InProcessTransport()
    if kind == "socket":
        return SocketTransport()
    raise ValueError(f"unknown transport {kind!r}")


@dataclass
class Deployment:
    snapshot: WebSnapshot
    transport: object
    registry: Registry
    tier3: dict[str, Tier3Node] = field(default_factory=dict)
    tier2: dict[str, Tier2Node] = field(default_factory=dict)
    tier1: dict[str, Federator] = field(default_factory=dict)
    root: Federator | None = None
    concurrent: bool = False

    def query(
        self, terms: list[str], k: int = 10, tier: int = 1, node: str | None = None, m: int | None = None
    ) -> tuple[list[SearchHit], bool]:
        """Search through the root (tier 1, no node) or one named node."""
        if tier == 1:
            target = self.root if node is None else self.tier1[str(DomainName.parse(node))]
            return target.federated_search(terms, k, m)
        if tier == 2:
            return self.tier2[node].search(terms, k), False
        if tier == 3:
            return self.tier3[node].search(terms, k), False
        raise ValueError(f"tier must be 1, 2 or 3, got {tier}")

    def recrawl(self, orgs: list[str] | None = None) -> int:
        """Recrawl the given tier-3 nodes against the current snapshot; returns pages fetched."""
        fetched = 0
        for name in sorted(orgs if orgs is not None else self.tier3):
            self.tier3[name].recrawl(self.snapshot)
            fetched += self.tier3[name].pages_fetched
        return fetched

    def harvest(self, slds: list[str] | None = None) -> dict[str, HarvestReport]:
        return {s: self.tier2[s].harvest_cycle() for s in sorted(slds if slds is not None else self.tier2)}

    def mutate(self, spec: MutationSpec) -> WebSnapshot:
        self.snapshot = mutate_web(self.snapshot, spec)
        return self.snapshot

    def total_records(self) -> int:
        return sum(len(n.store.records) for n in self.tier3.values())

    def close(self) -> None:
        self.transport.close()

    # ------------------------------------------------------------ persistence

    def save(self, state_dir: str | Path) -> None:
        state = Path(state_dir)
        state.mkdir(parents=True, exist_ok=True)
        save_snapshot(self.snapshot, state / "snapshot.json")
        (state / "manifest.json").write_text(dumps_canonical(self.registry.manifest()), encoding="utf-8")
        for name, node in self.tier3.items():
            node.save(state / "nodes" / name)
        for name, node in self.tier2.items():
            node.save(state / "nodes" / name)

    @classmethod
    def load(cls, state_dir: str | Path, transport: str = "inproc", concurrent: bool = False) -> Deployment:
        state = Path(state_dir)
        snapshot = load_snapshot(state / "snapshot.json")
        registry = Registry.from_manifest(json.loads((state / "manifest.json").read_text(encoding="utf-8")))
        dep = _wire(snapshot, registry, make_transport(transport), concurrent, harvest_limit=100)
        for name in dep.tier3:
            loaded = Tier3Node.load(DomainName.parse(name), state / "nodes" / name)
            dep.tier3[name].index, dep.tier3[name].store = loaded.index, loaded.store
        for name, node in dep.tier2.items():
            node.load_catalog(state / "nodes" / name)
        return dep


def _wire(snapshot: WebSnapshot, registry: Registry, transport, concurrent: bool, harvest_limit: int) -> Deployment:
    """Create node objects for every registry entry and serve them on ``transport``."""
    dep = Deployment(snapshot, transport, registry, concurrent=concurrent)
    workers = 4 if concurrent else 1
    for rec in registry.listing():
        name = str(rec.domain)
        if rec.tier == 3:
            node = dep.tier3[name] = Tier3Node(rec.domain, workers)
        elif rec.tier == 2:
            node = dep.tier2[name] = Tier2Node(
                rec.domain, transport,
                {c: registry.resolve(c) for c in rec.children},
                harvest_limit=harvest_limit, concurrent=concurrent,
            )
        else:
            node = dep.tier1[name] = Federator(name, transport, registry, concurrent=concurrent)
            for child in rec.children:
                node.register_child(DomainName.parse(child))
        transport.serve(rec.endpoint, node.handle)
    dep.root = Federator(NAMESPACE, transport, concurrent=concurrent)
    for name in sorted(dep.tier1):
        dep.root.register_child(DomainName.parse(name), registry.resolve(name))
    transport.serve(ROOT_ENDPOINT, dep.root.handle)
    return dep


def build_registry(snapshot: WebSnapshot) -> Registry:
    registry = Registry()
    for country in snapshot.countries():
        registry.register(country, 1)
        for sld in snapshot.slds(str(country)):
            registry.register(sld, 2, parent=country)
            for org in snapshot.orgs(str(sld)):
                registry.register(org, 3, parent=sld)
    return registry


def deploy(
    snapshot: WebSnapshot, transport: str = "inproc", concurrent: bool = False, harvest_limit: int = 100
) -> Deployment:
    """Build every node, crawl every tier-3 domain and run one full harvest."""
    dep = _wire(snapshot, build_registry(snapshot), make_transport(transport), concurrent, harvest_limit)
    dep.recrawl()
    dep.harvest()
    return dep


# ---------------------------------------------------------------- baseline


@dataclass
class BaselineResult:
    indexed: frozenset[str]
    pages_fetched: int


def baseline_seeds(snapshot: WebSnapshot, seed: int = 0) -> list[str]:
    """First page of one randomly chosen registered site per country."""
    rng = random.Random(seed)
    seeds = []
    for country in snapshot.countries():
        hosts = sorted(h for h in snapshot.sites if snapshot.sites[h].pages
                       and snapshot.org_of(h) is not None and country.contains_host(h))
        if hosts:
            site = snapshot.sites[rng.choice(hosts)]
            seeds.append(min(site.pages))
    return seeds


def baseline_crawl(snapshot: WebSnapshot, budget: int, seed: int = 0) -> BaselineResult:
    """Centralized breadth-first crawl that follows every link until ``budget`` fetches."""
    fetcher = Fetcher(snapshot)
    queue = deque(baseline_seeds(snapshot, seed))
    seen = set(queue)
    indexed = set()
    while queue and fetcher.pages_fetched < budget:
        page = fetcher.fetch(queue.popleft())
        if page is None:
            continue
        indexed.add(page.url)
        for link in page.outlinks:
            if link not in seen:
                seen.add(link)
                queue.append(link)
    return BaselineResult(frozenset(indexed), fetcher.pages_fetched)


# ------------------------------------------------------------- experiments


@dataclass
class ExperimentReport:
    name: str
    metrics: dict = field(default_factory=dict)
    phases: dict = field(default_factory=dict)
    timing: dict = field(default_factory=dict)

    def to_dict(self, include_timing: bool = False) -> dict:
        out = {"experiment": self.name, "metrics": self.metrics, "phases": self.phases}
        if include_timing:
            out["timing"] = self.timing
        return out


def _top_hit(dep: Deployment, term: str) -> str | None:
    hits, _ = dep.query([term], k=1)
    return hits[0].url if hits else None


def experiment_coverage(dep: Deployment, seed: int = 0) -> ExperimentReport:
    start = time.perf_counter()
    snapshot = dep.snapshot
    native = snapshot.native_pages()
    native_urls = {p.url for p in native}
    retrieved = sum(1 for p in native if p.sentinels() and _top_hit(dep, p.sentinels()[0]) == p.url)
    t_query = time.perf_counter()

    cited = {link for p in native for link in p.outlinks if url_host(link) != str(p.host)}
    off_domain = [p for p in snapshot.pages() if p.url not in native_urls]
    off_covered = {p.url for p in off_domain if p.sentinels() and _top_hit(dep, p.sentinels()[0]) == p.url}
    off_cited = {p.url for p in off_domain if p.url in cited}

    budget = int(BASELINE_BUDGET_FRACTION * len(native))
    baseline = baseline_crawl(snapshot, budget, seed)
    full = baseline_crawl(snapshot, snapshot.page_count(), seed)
    n = len(native) or 1
    return ExperimentReport(
        "coverage",
        metrics={
            "native_pages": len(native),
            "coverage_fraction": retrieved / n,
            "pages_fetched": sum(t.pages_fetched for t in dep.tier3.values()),
            "records_total": dep.total_records(),
            "off_domain_pages": len(off_domain),
            "off_domain_cited": len(off_cited),
            "off_domain_covered": len(off_covered),
            "off_domain_covered_iff_cited": off_covered == off_cited,
            "baseline_budget": budget,
            "baseline_pages_fetched": baseline.pages_fetched,
            "baseline_coverage_fraction": len(baseline.indexed & native_urls) / n,
            "baseline_unbounded_coverage_fraction": len(full.indexed & native_urls) / n,
        },
        timing={"query_s": t_query - start, "total_s": time.perf_counter() - start},
    )


def expected_freshness_records(before: WebSnapshot, after: WebSnapshot, orgs: list[DomainName]) -> int:
    """Records a single harvest must move after edits, from the mutation log and link graph.

    Each edited page yields its native record plus one foreign record per
    other organisation whose pages link to it.
    """
    tick = after.clock
    edited = [u for t, u, kind in after.mutation_log if t == tick and kind == "edited"]
    total = 0
    for url in edited:
        host = url_host(url)
        total += any(o.contains_host(host) for o in orgs)
        for org in orgs:
            if org.contains_host(host):
                continue
            if any(url in p.outlinks for h in after.sites if org.contains_host(h)
                   for p in after.sites[h].pages.values()):
                total += 1
    return total


def experiment_freshness(dep: Deployment, edit_count: int = 10, seed: int = 0) -> ExperimentReport:
    start = time.perf_counter()
    before = dep.snapshot
    orgs = before.orgs()
    after = dep.mutate(MutationSpec(edit_count=edit_count, seed=seed))
    edited = [u for t, u, kind in after.mutation_log if t == after.clock and kind == "edited"]

    # home nodes of edited pages and nodes holding them as downloaded stop targets
    affected = set()
    for url in edited:
        for name, node in dep.tier3.items():
            doc = node.index.docs.get(url)
            if node.domain.contains_host(url_host(url)) or (doc is not None and doc.origin == FOREIGN):
                affected.add(name)
    dep.recrawl(sorted(affected))
    t_crawl = time.perf_counter()

    pending = 0
    for t2 in dep.tier2.values():
        for child, cursor in t2.cursors.items():
            pending += len(dep.tier3[child].store.listing(cursor.since))
    reports = dep.harvest()
    transferred = sum(r.total for r in reports.values())
    t_harvest = time.perf_counter()

    retrievable = sum(1 for u in edited if _top_hit(dep, after.get(u).sentinels()[-1]) == u)
    fetcher = Fetcher(after)
    for page in after.native_pages():
        fetcher.fetch(page.url)
    total_records = dep.total_records()
    return ExperimentReport(
        "freshness",
        metrics={
            "edit_count": edit_count,
            "affected_tier3_nodes": len(affected),
            "records_transferred": transferred,
            "records_pending_before_cycle": pending,
            "records_expected": expected_freshness_records(before, after, orgs),
            "records_total": total_records,
            "transferred_fraction": transferred / total_records if total_records else 0.0,
            "edited_retrievable": retrievable,
            "edited_retrievable_fraction": retrievable / edit_count if edit_count else 1.0,
            "native_pages": len(after.native_pages()),
            "baseline_pages_fetched": fetcher.pages_fetched,
            "baseline_refetch_fraction": fetcher.pages_fetched / max(1, len(after.native_pages())),
        },
        phases={
            "harvest": {s: dict(sorted(r.transferred.items())) for s, r in reports.items()},
            "harvest_errors": {s: r.errors for s, r in reports.items() if r.errors},
        },
        timing={"crawl_s": t_crawl - start, "harvest_s": t_harvest - t_crawl,
                "total_s": time.perf_counter() - start},
    )
