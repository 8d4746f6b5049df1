"""Tier-3 inverted index with tag-weighted TF*IDF scoring.

Per document and term the index keeps the raw counts in the title, heading
and body fields. The weighted frequency is ``4*title + 2*heading + body``
and a query scores ``sum(wtf * ln(1 + N/df))`` over its distinct terms.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

from .crawler import DomainCrawl
from .web import Page, dumps_canonical

TITLE_WEIGHT = 4
HEADING_WEIGHT = 2
BODY_WEIGHT = 1

NATIVE = "native"
FOREIGN = "foreign"


@dataclass(frozen=True)
class Posting:
    url: str
    wtf: int
    tf_title: int
    tf_heading: int
    tf_body: int


@dataclass(frozen=True)
class DocInfo:
    title_terms: tuple[str, ...]
    body_length: int
    last_modified: int
    origin: str
    home_host: str


@dataclass(frozen=True)
class SearchHit:
    url: str
    score: float
    title_terms: tuple[str, ...] = ()
    # (domain, score) per contributing node
    sources: tuple[tuple[str, float], ...] = ()

    def to_wire(self) -> dict:
        return {
            "url": self.url,
            "score": wire_score(self.score),
            "title": list(self.title_terms),
            "sources": [{"domain": d, "score": wire_score(s)} for d, s in self.sources],
        }

    @classmethod
    def from_wire(cls, data: dict) -> SearchHit:
        return cls(
            data["url"],
            float(data["score"]),
            tuple(data.get("title", ())),
            tuple((s["domain"], float(s["score"])) for s in data.get("sources", ())),
        )


def wire_score(score: float) -> float:
    """Round to the 12 significant digits carried by search messages."""
    return float(f"{score:.12g}")


def rank(hits: list[SearchHit], k: int) -> list[SearchHit]:
    return sorted(hits, key=lambda h: (-h.score, h.url))[:k]


def field_counts(page: Page) -> dict[str, tuple[int, int, int]]:
    title, heading, body = Counter(page.title_terms), Counter(page.heading_terms), Counter(page.body_terms)
    return {t: (title[t], heading[t], body[t]) for t in sorted(title.keys() | heading.keys() | body.keys())}


def weighted_tf(counts: tuple[int, int, int]) -> int:
    t, h, b = counts
    return TITLE_WEIGHT * t + HEADING_WEIGHT * h + BODY_WEIGHT * b


@dataclass(frozen=True)
class InvertedIndex:
    postings: dict[str, tuple[Posting, ...]]
    docs: dict[str, DocInfo]
    built_tick: int = 0

    @property
    def N(self) -> int:
        return len(self.docs)

    def df(self, term: str) -> int:
        return len(self.postings.get(term, ()))

    def to_dict(self) -> dict:
        return {
            "N": self.N,
            "built_tick": self.built_tick,
            "docs": {
                url: {
                    "title": list(d.title_terms),
                    "body_length": d.body_length,
                    "last_modified": d.last_modified,
                    "origin": d.origin,
                    "home_host": d.home_host,
                }
                for url, d in self.docs.items()
            },
            "postings": {
                term: [[p.url, p.wtf, p.tf_title, p.tf_heading, p.tf_body] for p in plist]
                for term, plist in self.postings.items()
            },
        }

    @classmethod
    def from_dict(cls, data: dict) -> InvertedIndex:
        docs = {
            url: DocInfo(tuple(d["title"]), d["body_length"], d["last_modified"], d["origin"], d["home_host"])
            for url, d in sorted(data["docs"].items())
        }
        postings = {
            term: tuple(Posting(*row) for row in rows) for term, rows in sorted(data["postings"].items())
        }
        index = cls(postings, docs, data["built_tick"])
        if index.N != data["N"]:
            raise ValueError(f"index file claims N={data['N']} but holds {index.N} docs")
        return index

    def save(self, path: str | Path) -> None:
        Path(path).write_text(dumps_canonical(self.to_dict()), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> InvertedIndex:
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def build_index(crawl: DomainCrawl) -> InvertedIndex:
    docs: dict[str, DocInfo] = {}
    raw: dict[str, list[Posting]] = {}
    sources = [(p, NATIVE) for p in crawl.native_pages.values()]
    sources += [(p, FOREIGN) for p in crawl.foreign_pages.values()]
    for page, origin in sorted(sources, key=lambda s: s[0].url):
        docs[page.url] = DocInfo(
            page.title_terms, len(page.body_terms), page.last_modified, origin, str(page.host)
        )
        for term, counts in field_counts(page).items():
            raw.setdefault(term, []).append(Posting(page.url, weighted_tf(counts), *counts))
    postings = {t: tuple(raw[t]) for t in sorted(raw)}
    return InvertedIndex(postings, docs, crawl.crawl_tick)


def idf(index: InvertedIndex, term: str) -> float:
    df = index.df(term)
    return math.log(1 + index.N / df) if df else 0.0


def search(index: InvertedIndex, query: list[str], k: int) -> list[SearchHit]:
    if k < 1:
        raise ValueError("k must be at least 1")
    scores: dict[str, float] = {}
    for term in sorted(set(query)):
        weight = idf(index, term)
        for p in index.postings.get(term, ()):
            scores[p.url] = scores.get(p.url, 0.0) + p.wtf * weight
    hits = [SearchHit(url, s, index.docs[url].title_terms) for url, s in scores.items() if s > 0]
    return rank(hits, k)
