"""Top-layer federated searcher.

Holds no records. It forwards each query to its registered children and
adds up the scores a page receives from different children.
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor, wait
from dataclasses import dataclass

from .errors import DrisError, ProtocolError, RegistrationError
from .registry import Registry
from .text_index import SearchHit, rank
from .transport import call, error_reply
from .web import DomainName

log = logging.getLogger(__name__)

DEFAULT_DEADLINE = 10.0


def default_per_child_limit(k: int) -> int:
    return max(10 * k, 100)


@dataclass
class ChildEntry:
    domain: DomainName
    endpoint: str
    healthy: bool = True
    last_error: str | None = None


def merge_results(responses: list[tuple[str, list[SearchHit]]], k: int) -> list[SearchHit]:
    """Sum per-url scores across children; output is independent of arrival order."""
    merged: dict[str, list] = {}
    for child, hits in sorted(responses, key=lambda r: r[0]):
        for hit in hits:
            slot = merged.setdefault(hit.url, [0.0, hit.title_terms, []])
            slot[0] += hit.score
            slot[2].append((child, hit.score))
    return rank([SearchHit(url, s, title, tuple(src)) for url, (s, title, src) in merged.items()], k)


class Federator:
    def __init__(
        self,
        name: str,
        transport,
        registry: Registry | None = None,
        concurrent: bool = False,
        deadline: float = DEFAULT_DEADLINE,
    ):
        self.name = name
        self.transport = transport
        self.registry = registry
        self.concurrent = concurrent
        self.deadline = deadline
        self.children: dict[str, ChildEntry] = {}

    def register_child(self, domain: DomainName, endpoint: str | None = None) -> ChildEntry:
        key = str(domain)
        if key in self.children:
            raise RegistrationError(f"{key} is already a child of {self.name}")
        if endpoint is None:
            if self.registry is None:
                raise RegistrationError("no endpoint given and no registry to resolve it")
            endpoint = self.registry.resolve(domain)
        entry = ChildEntry(domain, endpoint)
        self.children = dict(sorted({**self.children, key: entry}.items()))
        return entry

    def _ask(self, entry: ChildEntry, message: dict, timeout: float) -> list[SearchHit]:
        reply = call(self.transport, entry.endpoint, message, timeout)
        return [SearchHit.from_wire(h) for h in reply["hits"]]

    def _fail(self, entry: ChildEntry, error: str) -> None:
        entry.healthy = False
        entry.last_error = error
        log.warning("%s: child %s failed: %s", self.name, entry.domain, error)

    def federated_search(
        self, query: list[str], k: int, m: int | None = None, deadline: float | None = None
    ) -> tuple[list[SearchHit], bool]:
        if k < 1:
            raise ValueError("k must be at least 1")
        m = m if m is not None else default_per_child_limit(k)
        if m < k:
            raise ValueError("per-child limit must be at least k")
        deadline = self.deadline if deadline is None else deadline
        message = {"op": "Search", "q": list(query), "k": m, "m": m}
        targets = [e for e in self.children.values() if e.healthy]
        partial = len(targets) < len(self.children)
        responses: list[tuple[str, list[SearchHit]]] = []
        start = time.monotonic()

        if self.concurrent and len(targets) > 1:
            pool = ThreadPoolExecutor(max_workers=len(targets))
            futures = {pool.submit(self._ask, e, message, deadline): e for e in targets}
            done, pending = wait(futures, timeout=deadline)
            pool.shutdown(wait=False, cancel_futures=True)
            for fut in pending:
                self._fail(futures[fut], "deadline exceeded")
                partial = True
            for fut in done:
                entry = futures[fut]
                try:
                    responses.append((str(entry.domain), fut.result()))
                except DrisError as exc:
                    self._fail(entry, str(exc))
                    partial = True
        else:
            for entry in targets:
                remaining = deadline - (time.monotonic() - start)
                if remaining <= 0:
                    self._fail(entry, "deadline exceeded")
                    partial = True
                    continue
                try:
                    responses.append((str(entry.domain), self._ask(entry, message, remaining)))
                except DrisError as exc:
                    self._fail(entry, str(exc))
                    partial = True

        if not responses:
            return [], True
        return merge_results(responses, k), partial

    def health_probe(self) -> dict[str, bool]:
        for entry in self.children.values():
            try:
                call(self.transport, entry.endpoint, {"op": "Ping"}, self.deadline)
                entry.healthy, entry.last_error = True, None
            except DrisError as exc:
                self._fail(entry, str(exc))
        return {d: e.healthy for d, e in self.children.items()}

    def handle(self, message: dict) -> dict:
        try:
            op = message.get("op")
            if op == "Ping":
                return {"ok": True}
            if op == "Search":
                k = int(message.get("k", 10))
                m = message.get("m")
                hits, partial = self.federated_search(list(message.get("q") or []), k, int(m) if m else None)
                return {"ok": True, "hits": [h.to_wire() for h in hits], "partial": partial}
            raise ProtocolError("badVerb", f"unknown op {op!r}")
        except (ProtocolError, ValueError, TypeError) as exc:
            return error_reply(exc)
