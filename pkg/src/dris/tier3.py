"""Tier-3 node: one organisation's centralized engine."""

from __future__ import annotations

import json
import threading
from dataclasses import replace
from pathlib import Path

from .crawler import DomainCrawl, crawl_domain
from .errors import ProtocolError
from .harvest import RecordStore, list_records, make_records
from .text_index import InvertedIndex, build_index, search
from .transport import error_reply
from .web import DomainName, Fetcher, WebSnapshot, dumps_canonical, hosts_under


class Tier3Node:
    def __init__(self, domain: DomainName, workers: int = 1):
        self.domain = domain
        self.workers = workers
        self.crawl: DomainCrawl | None = None
        self.index = InvertedIndex({}, {})
        self.store = RecordStore()
        self.pages_fetched = 0
        self._lock = threading.Lock()

    def recrawl(self, snapshot: WebSnapshot) -> DomainCrawl:
        fetcher = Fetcher(snapshot)
        crawl = crawl_domain(fetcher, self.domain, hosts_under(snapshot, self.domain), self.workers)
        index = build_index(crawl)
        records = make_records(crawl, index)
        with self._lock:
            self.crawl, self.index = crawl, index
            self.store.refresh(records, crawl.crawl_tick)
            self.pages_fetched = fetcher.pages_fetched
        return crawl

    def search(self, query: list[str], k: int):
        return search(self.index, query, k)

    def handle(self, message: dict) -> dict:
        try:
            op = message.get("op")
            if op == "Ping":
                return {"ok": True}
            if op == "Search":
                hits = self.search(list(message.get("q") or []), int(message.get("k", 10)))
                hits = [replace(h, sources=((str(self.domain), h.score),)) for h in hits]
                return {"ok": True, "hits": [h.to_wire() for h in hits], "partial": False}
            if op == "ListRecords":
                with self._lock:
                    records, token, cursor = list_records(
                        self.store, message.get("from"), message.get("token"), int(message.get("limit", 100))
                    )
                return {
                    "ok": True,
                    "records": [r.to_wire() for r in records],
                    "next_token": token,
                    "cursor": cursor,
                }
            raise ProtocolError("badVerb", f"unknown op {op!r}")
        except (ProtocolError, ValueError, TypeError) as exc:
            return error_reply(exc)

    def save(self, directory: Path) -> None:
        directory.mkdir(parents=True, exist_ok=True)
        self.index.save(directory / "index.json")
        (directory / "records.json").write_text(dumps_canonical(self.store.to_dict()), encoding="utf-8")
        if self.crawl is not None:
            (directory / "crawl.json").write_text(dumps_canonical(self.crawl.report()), encoding="utf-8")

    @classmethod
    def load(cls, domain: DomainName, directory: Path, workers: int = 1) -> Tier3Node:
        node = cls(domain, workers)
        node.index = InvertedIndex.load(directory / "index.json")
        node.store = RecordStore.from_dict(json.loads((directory / "records.json").read_text(encoding="utf-8")))
        return node
