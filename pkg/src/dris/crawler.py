"""Tier-3 crawler: enumerate every site of a third-level domain.

A crawl never follows a link that leaves the current site. Such a link is a
"stop URL": its target is recorded as a citation and, when it lies outside
the whole domain, downloaded once as a foreign page whose own links are
ignored.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .web import DomainName, Fetcher, Page, url_host

log = logging.getLogger(__name__)


@dataclass(frozen=True, order=True)
class Citation:
    target_url: str
    citing_host: str
    citing_page_count: int


@dataclass
class SiteCrawl:
    host: str
    pages: dict[str, Page] = field(default_factory=dict)
    citations: list[Citation] = field(default_factory=list)
    stop_targets: set[str] = field(default_factory=set)
    diagnostics: list[str] = field(default_factory=list)


@dataclass
class DomainCrawl:
    domain: DomainName
    native_pages: dict[str, Page]
    foreign_pages: dict[str, Page]
    citations: list[Citation]
    crawl_tick: int
    diagnostics: list[str] = field(default_factory=list)

    def report(self) -> dict:
        return {
            "domain": str(self.domain),
            "crawl_tick": self.crawl_tick,
            "native_count": len(self.native_pages),
            "foreign_count": len(self.foreign_pages),
            "citations": [
                {"target": c.target_url, "citing_host": c.citing_host, "count": c.citing_page_count}
                for c in self.citations
            ],
            "diagnostics": list(self.diagnostics),
        }


def crawl_site(fetcher: Fetcher, host: str) -> SiteCrawl:
    result = SiteCrawl(host)
    urls = fetcher.site_urls(host)
    if urls is None:
        result.diagnostics.append(f"host not found: {host}")
        return result

    citing: dict[str, set[str]] = {}
    for url in urls:
        page = fetcher.fetch(url)
        if page is None:
            result.diagnostics.append(f"page vanished during crawl: {url}")
            continue
        result.pages[url] = page
        for target in page.outlinks:
            if url_host(target) != host:
                citing.setdefault(target, set()).add(url)

    result.citations = [Citation(t, host, len(citing[t])) for t in sorted(citing)]
    result.stop_targets = set(citing)
    return result


def crawl_domain(
    fetcher: Fetcher, domain: DomainName, hosts: list[str], workers: int = 1
) -> DomainCrawl:
    """Crawl all ``hosts`` of ``domain`` and download out-of-domain stop targets.

    With ``workers > 1`` sites are crawled concurrently; the merged result is
    identical because it is assembled in host order.
    """
    hosts = sorted(hosts)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            site_crawls = list(pool.map(lambda h: crawl_site(fetcher, h), hosts))
    else:
        site_crawls = [crawl_site(fetcher, h) for h in hosts]

    native: dict[str, Page] = {}
    citations: list[Citation] = []
    stop_targets: set[str] = set()
    diagnostics: list[str] = []
    for sc in site_crawls:
        native.update(sc.pages)
        citations.extend(sc.citations)
        stop_targets |= sc.stop_targets
        diagnostics.extend(sc.diagnostics)

    foreign: dict[str, Page] = {}
    for target in sorted(stop_targets):
        if domain.contains_host(url_host(target)):
            continue
        page = fetcher.fetch(target)
        if page is None:
            diagnostics.append(f"stop target not found: {target}")
        else:
            foreign[target] = page

    citations.sort()
    for d in diagnostics:
        log.debug("%s: %s", domain, d)
    return DomainCrawl(
        domain,
        dict(sorted(native.items())),
        dict(sorted(foreign.items())),
        citations,
        fetcher.snapshot.clock,
        diagnostics,
    )
