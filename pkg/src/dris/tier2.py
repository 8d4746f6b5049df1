"""Tier-2 node: metadata-harvesting aggregator for one second-level domain.

The union catalog holds, per url, the native record from the page's home
node and the foreign records from every sibling node that cited or
downloaded it. The overlap number of a page is the total count of citing
pages carried by those foreign records, keyed by citing site.

Search score: ``text2 * (1 + ln(1 + overlap))`` where ``text2`` is TF*IDF
over the harvested keyword lists with ``idf = ln(1 + M/union_df)``.
"""

from __future__ import annotations

import json
import logging
import math
import threading
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .errors import DrisError, ProtocolError
from .harvest import BAD_TOKEN, HarvestCursor, MetadataRecord
from .text_index import NATIVE, SearchHit, rank
from .transport import call, error_reply
from .web import DomainName, dumps_canonical

log = logging.getLogger(__name__)

MAX_RESTARTS = 5


@dataclass
class UnionCatalogEntry:
    url: str
    native: MetadataRecord | None = None
    # source tier-3 domain -> that node's foreign record for this url
    foreign: dict[str, MetadataRecord] = field(default_factory=dict)

    @property
    def best_native(self) -> MetadataRecord | None:
        return self.native

    @property
    def foreign_meta(self) -> MetadataRecord | None:
        with_content = [r for r in self.foreign.values() if r.has_content]
        if not with_content:
            return None
        return min(with_content, key=lambda r: (-r.datestamp, r.source_domain))

    @property
    def metadata(self) -> MetadataRecord | None:
        return self.native or self.foreign_meta

    @property
    def overlap_sources(self) -> dict[str, int]:
        sources: dict[str, int] = {}
        for rec in self.foreign.values():
            for c in rec.citations:
                sources[c.citing_host] = c.citing_page_count
        return dict(sorted(sources.items()))

    @property
    def overlap(self) -> int:
        return sum(self.overlap_sources.values())

    @property
    def deleted(self) -> bool:
        return self.metadata is None

    def keyword_weights(self) -> dict[str, int]:
        meta = self.metadata
        return dict(meta.keywords) if meta is not None else {}

    def to_dict(self) -> dict:
        return {
            "url": self.url,
            "native": self.native.to_wire() if self.native else None,
            "foreign": {src: r.to_wire() for src, r in sorted(self.foreign.items())},
            "overlap": self.overlap,
            "overlap_sources": self.overlap_sources,
            "deleted": self.deleted,
        }


@dataclass
class HarvestReport:
    transferred: dict[str, int] = field(default_factory=dict)
    errors: dict[str, str] = field(default_factory=dict)
    restarts: dict[str, int] = field(default_factory=dict)

    @property
    def total(self) -> int:
        return sum(self.transferred.values())


class Tier2Node:
    def __init__(
        self,
        domain: DomainName,
        transport,
        children: dict[str, str] | None = None,
        harvest_limit: int = 100,
        concurrent: bool = False,
    ):
        self.domain = domain
        self.transport = transport
        self.harvest_limit = harvest_limit
        self.concurrent = concurrent
        self.children: dict[str, str] = {}
        self.cursors: dict[str, HarvestCursor] = {}
        self.catalog: dict[str, UnionCatalogEntry] = {}
        self.union_df: Counter[str] = Counter()
        self._postings: dict[str, set[str]] = {}
        self._lock = threading.RLock()
        for child, endpoint in sorted((children or {}).items()):
            self.add_child(child, endpoint)

    def add_child(self, child: str, endpoint: str) -> None:
        self.children[child] = endpoint
        self.cursors.setdefault(child, HarvestCursor(child))

    @property
    def M(self) -> int:
        return sum(1 for e in self.catalog.values() if not e.deleted)

    # ---------------------------------------------------------------- harvest

    def _pull(self, child: str) -> tuple[list[MetadataRecord], int, int]:
        endpoint = self.children[child]
        cursor = self.cursors[child]
        restarts = 0
        while True:
            records: list[MetadataRecord] = []
            token = None
            try:
                while True:
                    reply = call(self.transport, endpoint, {
                        "op": "ListRecords", "from": cursor.since, "token": token, "limit": self.harvest_limit,
                    })
                    records.extend(MetadataRecord.from_wire(r) for r in reply["records"])
                    token = cursor.token = reply["next_token"]
                    if token is None:
                        return records, int(reply["cursor"]), restarts
            except ProtocolError as exc:
                cursor.token = None
                if exc.code != BAD_TOKEN or restarts >= MAX_RESTARTS:
                    raise
                restarts += 1
                log.info("%s: restarting harvest of %s after %s", self.domain, child, exc.code)

    def harvest_cycle(self, children: list[str] | None = None) -> HarvestReport:
        """Pull every child's new records and merge them into the catalog.

        A failing child leaves its cursor untouched and does not stop the
        others. Merging happens under the catalog lock in child order, so
        searches never see a half-applied cycle.
        """
        names = sorted(children if children is not None else self.children)
        report = HarvestReport()

        def pull(child):
            try:
                return child, self._pull(child), None
            except DrisError as exc:
                return child, None, exc

        if self.concurrent and len(names) > 1:
            with ThreadPoolExecutor(max_workers=len(names)) as pool:
                results = list(pool.map(pull, names))
        else:
            results = [pull(c) for c in names]

        with self._lock:
            for child, pulled, exc in results:
                if exc is not None:
                    report.errors[child] = f"{type(exc).__name__}: {exc}"
                    continue
                records, server_cursor, restarts = pulled
                for rec in records:
                    self._merge(rec)
                cursor = self.cursors[child]
                cursor.last_datestamp = max(cursor.last_datestamp, server_cursor)
                report.transferred[child] = len(records)
                report.restarts[child] = restarts
        return report

    def _merge(self, rec: MetadataRecord) -> None:
        entry = self.catalog.get(rec.url)
        if entry is None:
            entry = self.catalog[rec.url] = UnionCatalogEntry(rec.url)
        self._unindex(entry)
        if rec.origin == NATIVE:
            if rec.deleted:
                entry.native = None
            elif entry.native is None or rec.datestamp >= entry.native.datestamp:
                entry.native = rec
        elif rec.deleted:
            entry.foreign.pop(rec.source_domain, None)
        else:
            entry.foreign[rec.source_domain] = rec
        if entry.native is None and not entry.foreign:
            del self.catalog[rec.url]
        else:
            self._reindex(entry)

    def _unindex(self, entry: UnionCatalogEntry) -> None:
        for term in entry.keyword_weights():
            self.union_df[term] -= 1
            if not self.union_df[term]:
                del self.union_df[term]
            self._postings[term].discard(entry.url)

    def _reindex(self, entry: UnionCatalogEntry) -> None:
        for term in entry.keyword_weights():
            self.union_df[term] += 1
            self._postings.setdefault(term, set()).add(entry.url)

    # ----------------------------------------------------------------- search

    def overlap(self, url: str) -> int:
        entry = self.catalog.get(url)
        return entry.overlap if entry is not None else 0

    def search(self, query: list[str], k: int) -> list[SearchHit]:
        if k < 1:
            raise ValueError("k must be at least 1")
        with self._lock:
            m = self.M
            text: dict[str, float] = {}
            for term in sorted(set(query)):
                df = self.union_df.get(term, 0)
                if not df:
                    continue
                weight = math.log(1 + m / df)
                for url in self._postings[term]:
                    wtf = self.catalog[url].keyword_weights()[term]
                    text[url] = text.get(url, 0.0) + wtf * weight
            hits = []
            for url, t in text.items():
                entry = self.catalog[url]
                score = t * (1 + math.log(1 + entry.overlap))
                if score > 0:
                    hits.append(SearchHit(url, score, entry.metadata.title_terms, ((str(self.domain), score),)))
        return rank(hits, k)

    def handle(self, message: dict) -> dict:
        try:
            op = message.get("op")
            if op == "Ping":
                return {"ok": True}
            if op == "Search":
                hits = self.search(list(message.get("q") or []), int(message.get("k", 10)))
                return {"ok": True, "hits": [h.to_wire() for h in hits], "partial": False}
            raise ProtocolError("badVerb", f"unknown op {op!r}")
        except (ProtocolError, ValueError, TypeError) as exc:
            return error_reply(exc)

    # ------------------------------------------------------------ persistence

    def to_dict(self) -> dict:
        with self._lock:
            return {
                "domain": str(self.domain),
                "cursors": {c: cur.last_datestamp for c, cur in sorted(self.cursors.items())},
                "entries": [self.catalog[u].to_dict() for u in sorted(self.catalog)],
            }

    def save(self, directory: Path) -> None:
        directory.mkdir(parents=True, exist_ok=True)
        (directory / "catalog.json").write_text(dumps_canonical(self.to_dict()), encoding="utf-8")

    def load_catalog(self, directory: Path) -> None:
        data = json.loads((directory / "catalog.json").read_text(encoding="utf-8"))
        with self._lock:
            for child, stamp in data["cursors"].items():
                self.cursors.setdefault(child, HarvestCursor(child)).last_datestamp = stamp
            for e in data["entries"]:
                if e["native"]:
                    self._merge(MetadataRecord.from_wire(e["native"]))
                for rec in e["foreign"].values():
                    self._merge(MetadataRecord.from_wire(rec))
