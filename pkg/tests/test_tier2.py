from __future__ import annotations

import math
from dataclasses import replace

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import TINY, build_snapshot
from dris.crawler import Citation
from dris.harvest import MetadataRecord, RecordStore
from dris.registry import service_url
from dris.tier2 import Tier2Node
from dris.tier3 import Tier3Node
from dris.transport import InProcessTransport
from dris.web import DomainName, Site, generate_web
from oracles import cross_site_citers, orgs_of_sld, tier2_scores

EDU = {"cn": {"edu.cn": ["a.edu.cn", "b.edu.cn"]}}


def tier2_over(snap, sld="edu.cn"):
    """A tier-2 node over freshly crawled tier-3 children, not yet harvested."""
    transport = InProcessTransport()
    children = {}
    for org in snap.orgs(sld):
        node = Tier3Node(org)
        node.recrawl(snap)
        transport.serve(service_url(org), node.handle)
        children[str(org)] = node
    t2 = Tier2Node(DomainName.parse(sld), transport, {c: service_url(DomainName.parse(c)) for c in children})
    return t2, children, transport


def edit_pages(snap, urls):
    """Copy of ``snap`` one tick later with each page's body replaced."""
    tick = snap.clock + 1
    sites = dict(snap.sites)
    for url in urls:
        page = snap.get(url)
        host = str(page.host)
        pages = dict(sites[host].pages)
        pages[url] = replace(page, body_terms=("edited",), last_modified=tick)
        sites[host] = Site(sites[host].host, pages)
    return replace(snap, sites=sites, clock=tick)


def stub_child(transport, domain, records):
    node = Tier3Node(DomainName.parse(domain))
    node.store = RecordStore({r.key: r for r in records})
    transport.serve(service_url(DomainName.parse(domain)), node.handle)
    return node


def native(url, keywords, datestamp=0, source="a.edu.cn"):
    host = url.split("/")[2]
    return MetadataRecord(url, host, "native", (), tuple(keywords), (), datestamp, (), source)


def citations(url, counts, source):
    cites = tuple(Citation(url, host, n) for host, n in sorted(counts.items()))
    return MetadataRecord(url, url.split("/")[2], "foreign", (), (), (), 0, cites, source)


@pytest.fixture()
def overlap_web():
    return build_snapshot({
        "http://t.a.edu.cn/p0": {"body": ["target"]},
        "http://t.a.edu.cn/p1": {"body": ["self"], "links": ["http://t.a.edu.cn/p0"]},
        "http://x.a.edu.cn/p0": {"body": ["c"], "links": ["http://t.a.edu.cn/p0"]},
        "http://x.a.edu.cn/p1": {"body": ["c"], "links": ["http://t.a.edu.cn/p0"]},
        "http://y.b.edu.cn/p0": {"body": ["d"], "links": ["http://t.a.edu.cn/p0", "http://x.a.edu.cn/p0"]},
    }, EDU)


def test_cold_start_then_idle_cycle(tiny_web):
    t2, children, _ = tier2_over(tiny_web, "edu.cn")
    first = t2.harvest_cycle()
    assert first.transferred == {c: len(n.store.records) for c, n in children.items()}
    assert first.errors == {}
    second = t2.harvest_cycle()
    assert second.transferred == {c: 0 for c in children}


def test_edit_three_pages_transfers_exactly_those(tiny_web):
    t2, children, _ = tier2_over(tiny_web, "edu.cn")
    t2.harvest_cycle()
    a = sorted(children)[0]
    urls = sorted(u for u, o in children[a].store.records if o == "native")[:3]
    edited = edit_pages(tiny_web, urls)
    children[a].recrawl(edited)
    report = t2.harvest_cycle()
    assert report.transferred[a] == 3
    assert all(n == 0 for c, n in report.transferred.items() if c != a)
    assert t2.cursors[a].last_datestamp == edited.clock
    for url in urls:
        assert [h.url for h in t2.search(["edited"], 100)].count(url) == 1


def test_overlap_counts(overlap_web):
    t2, _, _ = tier2_over(overlap_web)
    t2.harvest_cycle()
    assert t2.overlap("http://t.a.edu.cn/p0") == 3  # two pages on x, one on y; same-site p1 excluded
    assert t2.catalog["http://t.a.edu.cn/p0"].overlap_sources == {"x.a.edu.cn": 2, "y.b.edu.cn": 1}
    assert t2.overlap("http://x.a.edu.cn/p0") == 1
    assert t2.overlap("http://y.b.edu.cn/p0") == 0
    assert t2.overlap("http://nowhere/p0") == 0


def test_reharvest_is_idempotent(overlap_web):
    t2, _, _ = tier2_over(overlap_web)
    t2.harvest_cycle()
    before = t2.to_dict()["entries"]
    for cursor in t2.cursors.values():
        cursor.last_datestamp = -1
    assert t2.harvest_cycle().total > 0
    assert t2.to_dict()["entries"] == before


def test_worked_score():
    transport = InProcessTransport()
    stub_child(transport, "a.edu.cn", [
        native("http://h.a.edu.cn/d1", [("apple", 5)]),
        native("http://h.a.edu.cn/d2", [("pear", 1)]),
    ])
    stub_child(transport, "b.edu.cn", [
        citations("http://h.a.edu.cn/d1", {"x.b.edu.cn": 2, "y.b.edu.cn": 1}, "b.edu.cn"),
    ])
    t2 = Tier2Node(DomainName.parse("edu.cn"), transport,
                   {d: service_url(DomainName.parse(d)) for d in ("a.edu.cn", "b.edu.cn")})
    t2.harvest_cycle()
    assert (t2.M, t2.union_df["apple"], t2.overlap("http://h.a.edu.cn/d1")) == (2, 1, 3)
    (hit,) = t2.search(["apple"], 10)
    assert abs(hit.score - 5 * math.log(3) * (1 + math.log(4))) < 1e-12
    assert hit.score == pytest.approx(13.108, abs=1e-3)
    assert t2.search([], 10) == []


def test_native_beats_foreign_metadata():
    transport = InProcessTransport()
    stub_child(transport, "a.edu.cn", [native("http://h.a.edu.cn/d1", [("mine", 1)])])
    foreign = replace(citations("http://h.a.edu.cn/d1", {"z.b.edu.cn": 1}, "b.edu.cn"), keywords=(("theirs", 9),))
    stub_child(transport, "b.edu.cn", [foreign])
    t2 = Tier2Node(DomainName.parse("edu.cn"), transport,
                   {d: service_url(DomainName.parse(d)) for d in ("a.edu.cn", "b.edu.cn")})
    t2.harvest_cycle()
    assert [h.url for h in t2.search(["mine"], 5)] == ["http://h.a.edu.cn/d1"]
    assert t2.search(["theirs"], 5) == []
    assert set(t2.union_df) == {"mine"}


def test_sentinel_retrieval(default_deployment):
    snap = default_deployment.snapshot
    checked = 0
    for sld, t2 in default_deployment.tier2.items():
        orgs = {str(o) for o in snap.orgs(sld)}
        for page in snap.pages():
            if snap.org_of(str(page.host)) in orgs:
                (sentinel,) = page.sentinels()
                assert [h.url for h in t2.search([sentinel], 10)] == [page.url]
                checked += 1
    assert checked == sum(1 for p in snap.pages() if snap.org_of(str(p.host)) is not None)


def test_unreachable_child_keeps_cursor(tiny_web):
    t2, children, transport = tier2_over(tiny_web, "edu.cn")
    down, up = sorted(children)
    transport.take_down(service_url(DomainName.parse(down)))
    report = t2.harvest_cycle()
    assert down in report.errors and down not in report.transferred
    assert t2.cursors[down].last_datestamp == -1
    assert report.transferred[up] == len(children[up].store.records)
    transport.restore(service_url(DomainName.parse(down)))
    assert t2.harvest_cycle().transferred[down] == len(children[down].store.records)


def test_fixed_point(default_deployment):
    for t2 in default_deployment.tier2.values():
        state, df = t2.to_dict(), dict(t2.union_df)
        assert t2.harvest_cycle().total == 0
        assert t2.to_dict() == state
        assert dict(t2.union_df) == df


def test_union_df_matches_catalog(default_deployment):
    for t2 in default_deployment.tier2.values():
        expected = {}
        for e in t2.catalog.values():
            if not e.deleted:
                for term in e.keyword_weights():
                    expected[term] = expected.get(term, 0) + 1
        assert dict(t2.union_df) == expected
        assert t2.M == sum(1 for e in t2.catalog.values() if not e.deleted)


def test_single_child_matches_tier3_without_truncation():
    snap = build_snapshot({
        "http://w.a.edu.cn/p0": {"title": ["alpha"], "body": ["beta", "beta", "gamma"]},
        "http://w.a.edu.cn/p1": {"headings": ["beta"], "body": ["alpha", "delta"]},
        "http://w.a.edu.cn/p2": {"body": ["gamma", "gamma", "delta", "alpha"]},
    }, {"cn": {"edu.cn": ["a.edu.cn"]}})
    t2, children, _ = tier2_over(snap)
    t2.harvest_cycle()
    t3 = children["a.edu.cn"]
    for query in (["alpha"], ["beta", "gamma"], ["delta", "alpha", "beta"]):
        two = [(h.url, h.score) for h in t2.search(query, 10)]
        three = [(h.url, h.score) for h in t3.search(query, 10)]
        assert [u for u, _ in two] == [u for u, _ in three]
        assert all(math.isclose(a, b, rel_tol=1e-12) for (_, a), (_, b) in zip(two, three))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 20), st.integers(0, 20), st.integers(1, 8))
def test_rank_monotone_in_overlap(low, extra, wtf):
    transport = InProcessTransport()
    urls = ["http://h.a.edu.cn/p0", "http://h.a.edu.cn/p1"]
    stub_child(transport, "a.edu.cn", [native(u, [("t", wtf)]) for u in urls])
    stub_child(transport, "b.edu.cn", [
        citations(urls[0], {"x.b.edu.cn": low}, "b.edu.cn"),
        citations(urls[1], {"x.b.edu.cn": low + extra}, "b.edu.cn"),
    ])
    t2 = Tier2Node(DomainName.parse("edu.cn"), transport,
                   {d: service_url(DomainName.parse(d)) for d in ("a.edu.cn", "b.edu.cn")})
    t2.harvest_cycle()
    hits = t2.search(["t"], 10)
    if extra:
        assert hits[0].url == urls[1] and hits[0].score > hits[1].score
    else:
        assert hits[0].score == hits[1].score


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10_000))
def test_overlap_and_scores_match_snapshot_oracle(seed):
    snap = generate_web(replace(TINY, seed=seed))
    for sld in snap.slds():
        t2, _, _ = tier2_over(snap, str(sld))
        t2.harvest_cycle()
        citers = cross_site_citers(snap, orgs_of_sld(snap, str(sld)))
        assert {u: len(c) for u, c in citers.items()} == {u: e.overlap for u, e in t2.catalog.items() if e.overlap}
        terms = sorted({t for p in snap.pages() for t in p.body_terms})[:6]
        expected = tier2_scores(snap, str(sld), terms)
        got = {h.url: h.score for h in t2.search(terms, 10_000)}
        assert got.keys() == expected.keys()
        assert all(math.isclose(got[u], expected[u], rel_tol=1e-12) for u in got)


def test_concurrent_harvest_matches_sequential(default_web):
    seq, _, _ = tier2_over(default_web)
    par, _, _ = tier2_over(default_web)
    par.concurrent = True
    seq.harvest_cycle()
    par.harvest_cycle()
    assert seq.to_dict() == par.to_dict()


def test_wire_search_and_errors(default_deployment):
    t2 = default_deployment.tier2["edu.cn"]
    reply = t2.handle({"op": "Search", "q": ["w0001"], "k": 3})
    assert reply["ok"] and reply["partial"] is False and len(reply["hits"]) <= 3
    assert set(reply["hits"][0]) == {"url", "score", "title", "sources"}
    assert t2.handle({"op": "Search", "q": ["w0001"], "k": 0})["ok"] is False
    assert t2.handle({"op": "ListRecords"})["error"] == "badVerb"


def test_catalog_save_and_load(tmp_path, default_deployment):
    t2 = default_deployment.tier2["edu.cn"]
    t2.save(tmp_path)
    fresh = Tier2Node(t2.domain, InProcessTransport())
    fresh.load_catalog(tmp_path)
    assert fresh.to_dict() == t2.to_dict()
    assert fresh.union_df == t2.union_df
