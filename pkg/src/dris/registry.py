"""DRIS naming: every node is reachable as ``http://DRIS.<domain>`` and its
service class is ``DRIS.<reversed domain>``.

The :class:`Registry` is the in-process resolution table of a deployment.
A parent node keeps the index of its direct children.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import DomainNameError, RegistrationError, ResolutionError
from .web import DomainName

NAMESPACE = "DRIS"
_CLASS_PREFIX = NAMESPACE + "."
_URL_PREFIX = "http://" + NAMESPACE + "."


def class_name(domain: DomainName) -> str:
    return _CLASS_PREFIX + ".".join(reversed(domain.labels))


def service_url(domain: DomainName) -> str:
    return _URL_PREFIX + str(domain)


def parse_class_name(name: str) -> DomainName:
    if not name.startswith(_CLASS_PREFIX):
        raise DomainNameError(f"not a DRIS class name: {name!r}")
    return DomainName.parse(".".join(reversed(name[len(_CLASS_PREFIX):].split("."))))


def parse_service_url(url: str) -> DomainName:
    if not url.startswith(_URL_PREFIX):
        raise DomainNameError(f"not a DRIS service url: {url!r}")
    return DomainName.parse(url[len(_URL_PREFIX):].rstrip("/"))


def parse_name(name: str | DomainName) -> DomainName:
    """Accept a class name, a service url or a plain domain."""
    if isinstance(name, DomainName):
        return name
    if name.startswith(_URL_PREFIX):
        return parse_service_url(name)
    if name.startswith(_CLASS_PREFIX):
        return parse_class_name(name)
    return DomainName.parse(name)


@dataclass
class NodeRecord:
    domain: DomainName
    tier: int
    endpoint: str
    children: list[str] = field(default_factory=list)


class Registry:
    def __init__(self) -> None:
        self.nodes: dict[str, NodeRecord] = {}

    def register(
        self, domain: DomainName, tier: int, endpoint: str | None = None, parent: DomainName | None = None
    ) -> NodeRecord:
        key = str(domain)
        if key in self.nodes:
            raise RegistrationError(f"{key} is already registered")
        if tier not in (1, 2, 3):
            raise RegistrationError(f"tier must be 1, 2 or 3, got {tier}")
        if parent is not None:
            parent_rec = self.nodes.get(str(parent))
            if parent_rec is None:
                raise RegistrationError(f"parent {parent} of {key} is not registered")
            if parent == domain or not parent.is_suffix_of(domain):
                raise RegistrationError(f"{parent} is not a proper suffix of {key}")
            parent_rec.children = sorted(parent_rec.children + [key])
        record = NodeRecord(domain, tier, endpoint or service_url(domain))
        self.nodes[key] = record
        return record

    def _lookup(self, name: str | DomainName) -> NodeRecord:
        try:
            domain = parse_name(name)
        except DomainNameError as exc:
            raise ResolutionError(str(exc)) from None
        record = self.nodes.get(str(domain))
        if record is None:
            raise ResolutionError(f"no DRIS node registered for {domain}")
        return record

    def resolve(self, name: str | DomainName) -> str:
        return self._lookup(name).endpoint

    def children(self, name: str | DomainName) -> list[str]:
        return list(self._lookup(name).children)

    def listing(self) -> list[NodeRecord]:
        return [self.nodes[k] for k in sorted(self.nodes)]

    def manifest(self) -> dict:
        return {
            "nodes": [
                {"domain": str(r.domain), "tier": r.tier, "endpoint": r.endpoint, "children": list(r.children)}
                for r in self.listing()
            ]
        }

    @classmethod
    def from_manifest(cls, data: dict) -> Registry:
        registry = cls()
        for node in data["nodes"]:
            registry.nodes[node["domain"]] = NodeRecord(
                DomainName.parse(node["domain"]), node["tier"], node["endpoint"], sorted(node["children"])
            )
        return registry
