"""Metadata records and the incremental ListRecords protocol between tiers 3 and 2.

A tier-3 node turns its crawl into compact :class:`MetadataRecord` values and
keeps them in a :class:`RecordStore`. Tier-2 nodes pull them page by page
with ``ListRecords``, asking only for records newer than their cursor.
Resumption tokens pin one store version; any store update invalidates them.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .crawler import Citation, DomainCrawl
from .errors import ProtocolError
from .text_index import FOREIGN, NATIVE, InvertedIndex
from .web import url_host

MAX_KEYWORDS = 16
ABSTRACT_LENGTH = 30
BAD_TOKEN = "badResumptionToken"

_ORIGIN_RANK = {NATIVE: 0, FOREIGN: 1}


@dataclass(frozen=True)
class MetadataRecord:
    url: str
    home_host: str
    origin: str
    title_terms: tuple[str, ...]
    keywords: tuple[tuple[str, int], ...]
    abstract_terms: tuple[str, ...]
    datestamp: int
    citations: tuple[Citation, ...]
    source_domain: str
    deleted: bool = False

    @property
    def key(self) -> tuple[str, str]:
        return (self.url, self.origin)

    @property
    def has_content(self) -> bool:
        """False for citation-only records and tombstones."""
        return bool(self.keywords) and not self.deleted

    def to_wire(self) -> dict:
        return {
            "url": self.url,
            "home_host": self.home_host,
            "origin": self.origin,
            "title": list(self.title_terms),
            "keywords": [[t, w] for t, w in self.keywords],
            "abstract": list(self.abstract_terms),
            "datestamp": self.datestamp,
            "citations": [{"citing_host": c.citing_host, "count": c.citing_page_count} for c in self.citations],
            "source_domain": self.source_domain,
            "deleted": self.deleted,
        }

    @classmethod
    def from_wire(cls, data: dict) -> MetadataRecord:
        url = data["url"]
        return cls(
            url,
            data["home_host"],
            data["origin"],
            tuple(data["title"]),
            tuple((t, int(w)) for t, w in data["keywords"]),
            tuple(data["abstract"]),
            int(data["datestamp"]),
            tuple(Citation(data.get("target", url), c["citing_host"], int(c["count"])) for c in data["citations"]),
            data["source_domain"],
            bool(data.get("deleted", False)),
        )


def sort_key(record: MetadataRecord) -> tuple:
    return (record.datestamp, record.url, _ORIGIN_RANK[record.origin])


def top_keywords(term_weights: dict[str, int]) -> tuple[tuple[str, int], ...]:
    ranked = sorted(term_weights.items(), key=lambda tw: (-tw[1], tw[0]))
    return tuple(ranked[:MAX_KEYWORDS])


def make_records(crawl: DomainCrawl, index: InvertedIndex) -> list[MetadataRecord]:
    source = str(crawl.domain)
    doc_terms: dict[str, dict[str, int]] = {}
    for term, plist in index.postings.items():
        for p in plist:
            doc_terms.setdefault(p.url, {})[term] = p.wtf

    by_target: dict[str, list[Citation]] = {}
    for c in crawl.citations:
        by_target.setdefault(c.target_url, []).append(c)

    records = []
    for url, page in crawl.native_pages.items():
        records.append(MetadataRecord(
            url, str(page.host), NATIVE, page.title_terms, top_keywords(doc_terms.get(url, {})),
            page.body_terms[:ABSTRACT_LENGTH], page.last_modified, (), source,
        ))
    for url, page in crawl.foreign_pages.items():
        records.append(MetadataRecord(
            url, str(page.host), FOREIGN, page.title_terms, top_keywords(doc_terms.get(url, {})),
            page.body_terms[:ABSTRACT_LENGTH], crawl.crawl_tick, tuple(sorted(by_target.get(url, ()))), source,
        ))
    # intra-domain and dead targets still carry their overlap evidence
    for url, cites in by_target.items():
        if url not in crawl.foreign_pages:
            records.append(MetadataRecord(
                url, url_host(url), FOREIGN, (), (), (), crawl.crawl_tick, tuple(sorted(cites)), source,
            ))
    records.sort(key=lambda r: (r.url, _ORIGIN_RANK[r.origin]))
    return records


def tombstone(record: MetadataRecord, tick: int) -> MetadataRecord:
    return replace(record, title_terms=(), keywords=(), abstract_terms=(), citations=(),
                   datestamp=tick, deleted=True)


@dataclass
class RecordStore:
    """Versioned record set served by one tier-3 node.

    Records keep their datestamp across refreshes unless their content
    changes, so an unchanged foreign copy is not re-sent on every recrawl.
    Records that disappear leave a tombstone stamped with the refresh tick.
    """

    records: dict[tuple[str, str], MetadataRecord] = field(default_factory=dict)
    version: int = 0

    def __post_init__(self) -> None:
        self._listing = sorted(self.records.values(), key=sort_key)

    def refresh(self, new_records: list[MetadataRecord], tick: int) -> None:
        updated: dict[tuple[str, str], MetadataRecord] = {}
        for rec in new_records:
            old = self.records.get(rec.key)
            if old is not None and not old.deleted and replace(old, datestamp=rec.datestamp) == rec:
                rec = old
            updated[rec.key] = rec
        for key, old in self.records.items():
            if key not in updated:
                updated[key] = old if old.deleted else tombstone(old, tick)
        if updated != self.records:
            self.records = dict(sorted(updated.items()))
            self._listing = sorted(self.records.values(), key=sort_key)
            self.version += 1

    @property
    def cursor(self) -> int:
        return self._listing[-1].datestamp if self._listing else -1

    def listing(self, since: int | None) -> list[MetadataRecord]:
        if since is None:
            return list(self._listing)
        return [r for r in self._listing if r.datestamp > since]

    def to_dict(self) -> dict:
        return {"version": self.version, "records": [r.to_wire() for r in self._listing]}

    @classmethod
    def from_dict(cls, data: dict) -> RecordStore:
        recs = [MetadataRecord.from_wire(r) for r in data["records"]]
        return cls({r.key: r for r in sorted(recs, key=lambda r: r.key)}, data["version"])


def _encode_token(version: int, since: int | None, offset: int) -> str:
    return f"{version}:{'' if since is None else since}:{offset}"


def _decode_token(token: str) -> tuple[int, int | None, int]:
    try:
        version, since, offset = token.split(":")
        return int(version), (int(since) if since else None), int(offset)
    except ValueError:
        raise ProtocolError(BAD_TOKEN, f"unparseable token {token!r}") from None


def list_records(
    store: RecordStore, since: int | None = None, token: str | None = None, limit: int = 100
) -> tuple[list[MetadataRecord], str | None, int]:
    """One page of records with datestamp greater than ``since``.

    Returns ``(records, next_token, cursor)`` where ``cursor`` is the newest
    datestamp in the store, to be used as the client's next ``since``.
    """
    if limit < 1:
        raise ProtocolError("badArgument", "limit must be at least 1")
    offset = 0
    if token is not None:
        version, since, offset = _decode_token(token)
        if version != store.version:
            raise ProtocolError(BAD_TOKEN, "store changed since token was issued")
    listing = store.listing(since)
    page = listing[offset : offset + limit]
    end = offset + limit
    next_token = _encode_token(store.version, since, end) if end < len(listing) else None
    return page, next_token, store.cursor


@dataclass
class HarvestCursor:
    child: str
    last_datestamp: int = -1
    token: str | None = None

    @property
    def since(self) -> int | None:
        return None if self.last_datestamp < 0 else self.last_datestamp
