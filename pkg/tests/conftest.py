from __future__ import annotations

import sys
from pathlib import Path

import pytest

from dris.deployment import deploy
from dris.web import DomainName, GenConfig, Page, Site, WebSnapshot, generate_web, url_host

sys.path.insert(0, str(Path(__file__).parent))

TINY = GenConfig(
    countries=1, slds_per_country=2, orgs_per_sld=2, sites_per_org=(1, 2), pages_per_site=(3, 6),
    body_terms=(4, 10), vocabulary_size=40, cross_site_link_prob=0.15, off_domain_site_count=1,
    isolated_site_count=0, seed=7,
)


def build_snapshot(pages: dict[str, dict], registered: dict, clock: int = 0) -> WebSnapshot:
    """Hand-built snapshot; ``pages`` maps url -> {title, headings, body, links, lm}."""
    sites: dict[str, dict[str, Page]] = {}
    for url, spec in pages.items():
        host = url_host(url)
        sites.setdefault(host, {})[url] = Page(
            url, DomainName.parse(host), tuple(spec.get("title", ())), tuple(spec.get("headings", ())),
            tuple(spec.get("body", ())), tuple(spec.get("links", ())), spec.get("lm", 0),
        )
    return WebSnapshot(
        {h: Site(DomainName.parse(h), ps) for h, ps in sites.items()}, registered, clock, (), 0
    )


@pytest.fixture(scope="session")
def default_web() -> WebSnapshot:
    return generate_web(GenConfig())


@pytest.fixture(scope="session")
def default_deployment(default_web):
    dep = deploy(default_web)
    yield dep
    dep.close()


@pytest.fixture()
def tiny_web() -> WebSnapshot:
    return generate_web(TINY)
