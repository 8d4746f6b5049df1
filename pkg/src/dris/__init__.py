"""A three-tier web search engine laid out along the DNS hierarchy.

Tier 3 crawls and indexes one organisation's domain, tier 2 harvests
metadata from the organisations under a second-level domain, and tier 1
federates queries over the second-level nodes of a country.
"""

from .deployment import Deployment, baseline_crawl, deploy, experiment_coverage, experiment_freshness
from .registry import Registry, class_name, service_url
from .web import DomainName, GenConfig, MutationSpec, WebSnapshot, generate_web, mutate_web

__all__ = [
    "Deployment",
    "DomainName",
    "GenConfig",
    "MutationSpec",
    "Registry",
    "WebSnapshot",
    "baseline_crawl",
    "class_name",
    "deploy",
    "experiment_coverage",
    "experiment_freshness",
    "generate_web",
    "mutate_web",
    "service_url",
]
