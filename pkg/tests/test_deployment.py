from __future__ import annotations

import json
from dataclasses import replace

import pytest

from conftest import TINY, build_snapshot
from dris.deployment import (
    Deployment,
    baseline_crawl,
    baseline_seeds,
    deploy,
    experiment_coverage,
    experiment_freshness,
)
from dris.web import GenConfig, MutationSpec, generate_web
from oracles import freshness_records, host_of, under

QUERIES = [["w0000"], ["w0003", "w0010"], ["w0001", "w0002", "w0005"], ["sent_1"], ["nothing"]]


def results(dep, queries=QUERIES, k=10):
    return [[(h.url, h.score, h.sources) for h in dep.query(q, k)[0]] for q in queries]


def test_minimal_config_node_counts():
    cfg = GenConfig(countries=1, slds_per_country=1, orgs_per_sld=1, sites_per_org=(1, 1),
                    pages_per_site=(2, 2), off_domain_site_count=0, isolated_site_count=0)
    dep = deploy(generate_web(cfg))
    assert (len(dep.tier1), len(dep.tier2), len(dep.tier3)) == (1, 1, 1)
    assert len(dep.registry.manifest()["nodes"]) == 3
    dep.close()


def test_default_node_counts(default_deployment):
    snap = default_deployment.snapshot
    assert len(default_deployment.registry.manifest()["nodes"]) == (
        len(snap.countries()) + len(snap.slds()) + len(snap.orgs()))
    assert sorted(default_deployment.root.children) == sorted(default_deployment.tier1)


def test_deploy_is_deterministic(tiny_web):
    a, b = deploy(tiny_web), deploy(tiny_web)
    for name in a.tier3:
        assert a.tier3[name].index == b.tier3[name].index
        assert a.tier3[name].store.to_dict() == b.tier3[name].store.to_dict()
    for name in a.tier2:
        assert a.tier2[name].to_dict() == b.tier2[name].to_dict()
    assert results(a) == results(b)


def test_query_routes_by_tier(default_deployment):
    dep = default_deployment
    page = next(p for p in dep.snapshot.native_pages())
    sentinel = page.sentinels()[0]
    org = dep.snapshot.org_of(str(page.host))
    sld = org.split(".", 1)[1]
    country = sld.split(".", 1)[1]
    for tier, node in ((3, org), (2, sld), (1, country), (1, None)):
        hits, partial = dep.query([sentinel], 5, tier=tier, node=node)
        assert [h.url for h in hits] == [page.url] and not partial
    with pytest.raises(ValueError):
        dep.query([sentinel], 5, tier=4)


def test_each_native_page_has_one_native_entry(default_deployment):
    snap = default_deployment.snapshot
    for page in snap.native_pages():
        holders = [s for s, t2 in default_deployment.tier2.items()
                   if page.url in t2.catalog and t2.catalog[page.url].native is not None]
        assert holders == [s for s in default_deployment.tier2 if under(s, host_of(page.url))]


def test_baseline_budget_zero(default_web):
    result = baseline_crawl(default_web, 0)
    assert result.indexed == frozenset() and result.pages_fetched == 0


def test_baseline_saturates_connected_web():
    links = {f"http://s{i}.a.edu.cn/p0": {"links": [f"http://s{(i + 1) % 4}.a.edu.cn/p0"]} for i in range(4)}
    snap = build_snapshot(links, {"cn": {"edu.cn": ["a.edu.cn"]}})
    result = baseline_crawl(snap, 100)
    assert result.indexed == frozenset(links)


def test_baseline_misses_isolated_sites(default_web):
    result = baseline_crawl(default_web, default_web.page_count())
    native = {p.url for p in default_web.native_pages()}
    assert len(result.indexed & native) < len(native)
    assert result.pages_fetched <= default_web.page_count()


def test_baseline_seeds_are_seeded(default_web):
    assert baseline_seeds(default_web, 3) == baseline_seeds(default_web, 3)
    assert len(baseline_seeds(default_web, 0)) == len(default_web.countries())


def test_socket_transport_matches_inprocess(default_web, default_deployment):
    dep = deploy(default_web, transport="socket")
    try:
        assert results(dep) == results(default_deployment)
        for name in dep.tier2:
            assert dep.tier2[name].to_dict() == default_deployment.tier2[name].to_dict()
    finally:
        dep.close()


def test_concurrent_matches_deterministic(default_web, default_deployment):
    dep = deploy(default_web, concurrent=True)
    assert results(dep) == results(default_deployment)
    for name in dep.tier2:
        assert dep.tier2[name].to_dict() == default_deployment.tier2[name].to_dict()


def test_small_harvest_pages_give_same_catalog(default_web, default_deployment):
    dep = deploy(default_web, harvest_limit=3)
    for name in dep.tier2:
        assert dep.tier2[name].to_dict() == default_deployment.tier2[name].to_dict()


def test_save_load_round_trip(tmp_path, default_deployment):
    default_deployment.save(tmp_path)
    assert json.loads((tmp_path / "manifest.json").read_text()) == default_deployment.registry.manifest()
    loaded = Deployment.load(tmp_path)
    try:
        assert results(loaded) == results(default_deployment)
        for name in loaded.tier2:
            assert loaded.tier2[name].to_dict() == default_deployment.tier2[name].to_dict()
        assert loaded.tier2["edu.cn"].harvest_cycle().total == 0
    finally:
        loaded.close()


def test_coverage_experiment(default_web):
    report = experiment_coverage(deploy(default_web)).to_dict()
    m = report["metrics"]
    assert m["coverage_fraction"] == 1.0
    assert m["off_domain_covered_iff_cited"] is True
    assert m["baseline_coverage_fraction"] <= 0.6
    assert m["baseline_unbounded_coverage_fraction"] < 1.0
    assert "timing" not in report


def test_freshness_with_no_edits(tiny_web):
    m = experiment_freshness(deploy(tiny_web), edit_count=0).metrics
    assert m["records_transferred"] == m["records_expected"] == 0
    assert m["baseline_refetch_fraction"] == 1.0


@pytest.mark.parametrize("seed", [1, 2, 3])
def test_freshness_matches_mutation_log(seed):
    snap = generate_web(replace(TINY, seed=seed))
    dep = deploy(snap)
    m = experiment_freshness(dep, edit_count=4, seed=seed).metrics
    oracle = freshness_records(dep.snapshot, [str(o) for o in snap.orgs()])
    assert m["records_transferred"] == m["records_pending_before_cycle"] == m["records_expected"] == oracle
    assert m["edited_retrievable"] == 4


def test_recrawl_after_mutation_updates_results(tiny_web):
    dep = deploy(tiny_web)
    after = dep.mutate(MutationSpec(delete_count=2, seed=5))
    dep.recrawl()
    dep.harvest()
    gone = [u for t, u, k in after.mutation_log if k == "deleted"]
    for url in gone:
        sentinel = tiny_web.get(url).sentinels()[0]
        assert dep.query([sentinel], 5)[0] == []
