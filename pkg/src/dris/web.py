"""Synthetic web: domain names, pages, sites and deterministic snapshots.

A :class:`WebSnapshot` is the ground truth every node crawls and every test
checks against. Pages carry pre-tokenized term lists and each generated page
holds one unique ``sent_<n>`` term so that per-page retrievability can be
tested with a single-term query.
"""

from __future__ import annotations

import json
import random
import re
import threading
from collections import Counter
from dataclasses import dataclass, field, fields
from itertools import accumulate
from pathlib import Path
from typing import Iterator
from urllib.parse import urlsplit

from .errors import ConfigError, DomainNameError, InfeasibleMutation, SnapshotParseError

_LABEL_RE = re.compile(r"^[a-z0-9]([a-z0-9-]*[a-z0-9])?$")

SENTINEL_PREFIX = "sent_"
OFF_DOMAIN_SUFFIX = "net.x"

_COUNTRY_NAMES = ["cn", "us", "uk", "de", "fr", "jp", "kr", "br", "in", "ca"]
_SLD_NAMES = ["edu", "com", "gov", "org", "ac", "net"]
_ORG_NAMES = [
    "hust", "pku", "fudan", "zju", "nju", "whu", "sjtu", "ustc", "xjtu",
    "sysu", "nku", "tju", "sdu", "jlu", "scu", "hit", "buaa", "bnu",
]
_SUBDOMAINS = ["www", "cs", "lib", "math", "news", "phys", "chem", "bio"]
_OFF_DOMAIN_NAMES = ["lab", "club", "forum", "wiki", "blog", "team"]


def _pick_name(names: list[str], i: int, prefix: str) -> str:
    return names[i] if i < len(names) else f"{prefix}{i}"


@dataclass(frozen=True, order=True)
class DomainName:
    """A DNS name as a tuple of labels, most specific first."""

    labels: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.labels:
            raise DomainNameError("domain name needs at least one label")
        for label in self.labels:
            if not isinstance(label, str) or not _LABEL_RE.match(label):
                raise DomainNameError(f"invalid domain label {label!r}")

    @classmethod
    def parse(cls, text: str) -> DomainName:
        if not isinstance(text, str) or not text:
            raise DomainNameError(f"invalid domain name {text!r}")
        return cls(tuple(text.split(".")))

    def __str__(self) -> str:
        return ".".join(self.labels)

    def is_suffix_of(self, other: DomainName) -> bool:
        """True if ``other`` equals this name or lies beneath it."""
        n = len(self.labels)
        return len(other.labels) >= n and other.labels[-n:] == self.labels

    def contains_host(self, host: str) -> bool:
        return host == str(self) or host.endswith("." + str(self))

    @property
    def parent(self) -> DomainName | None:
        return DomainName(self.labels[1:]) if len(self.labels) > 1 else None


def url_host(url: str) -> str:
    return urlsplit(url).hostname or ""


@dataclass(frozen=True)
class Page:
    url: str
    host: DomainName
    title_terms: tuple[str, ...] = ()
    heading_terms: tuple[str, ...] = ()
    body_terms: tuple[str, ...] = ()
    outlinks: tuple[str, ...] = ()
    last_modified: int = 0

    def __post_init__(self) -> None:
        if url_host(self.url) != str(self.host):
            raise ValueError(f"url {self.url!r} is not on host {self.host}")

    def sentinels(self) -> list[str]:
        return [t for t in self.body_terms if t.startswith(SENTINEL_PREFIX)]


@dataclass(frozen=True)
class Site:
    host: DomainName
    pages: dict[str, Page] = field(default_factory=dict)


@dataclass(frozen=True)
class WebSnapshot:
    """Immutable view of the whole synthetic web at one logical tick.

    ``registered_domains`` maps country -> second-level domain -> list of
    third-level (organisation) domains, all as rendered strings.
    """

    sites: dict[str, Site]
    registered_domains: dict[str, dict[str, list[str]]]
    clock: int = 0
    mutation_log: tuple[tuple[int, str, str], ...] = ()
    next_sentinel: int = 0

    def countries(self) -> list[DomainName]:
        return [DomainName.parse(c) for c in sorted(self.registered_domains)]

    def slds(self, country: str | None = None) -> list[DomainName]:
        out = []
        for c, slds in sorted(self.registered_domains.items()):
            if country is None or c == country:
                out.extend(DomainName.parse(s) for s in sorted(slds))
        return out

    def orgs(self, sld: str | None = None) -> list[DomainName]:
        out = []
        for slds in self.registered_domains.values():
            for s, orgs in slds.items():
                if sld is None or s == sld:
                    out.extend(DomainName.parse(o) for o in orgs)
        return sorted(out, key=str)

    def org_of(self, host: str) -> str | None:
        """The registered third-level domain ``host`` lives under, if any."""
        for org in self.orgs():
            if org.contains_host(host):
                return str(org)
        return None

    def pages(self) -> Iterator[Page]:
        for host in sorted(self.sites):
            site = self.sites[host]
            for url in sorted(site.pages):
                yield site.pages[url]

    def page_count(self) -> int:
        return sum(len(s.pages) for s in self.sites.values())

    def native_pages(self) -> list[Page]:
        """Pages on sites under some registered organisation domain."""
        orgs = self.orgs()
        return [p for p in self.pages() if any(o.is_suffix_of(p.host) for o in orgs)]

    def get(self, url: str) -> Page | None:
        site = self.sites.get(url_host(url))
        return site.pages.get(url) if site is not None else None


def fetch(snapshot: WebSnapshot, url: str) -> Page | None:
    """Return the page at ``url`` or ``None`` when it does not exist."""
    return snapshot.get(url)


def hosts_under(snapshot: WebSnapshot, domain: DomainName) -> list[str]:
    return sorted(h for h in snapshot.sites if domain.is_suffix_of(DomainName.parse(h)))


class Fetcher:
    """Network stand-in used by crawlers; counts every fetch per url."""

    def __init__(self, snapshot: WebSnapshot):
        self.snapshot = snapshot
        self.fetch_log: Counter[str] = Counter()
        self._lock = threading.Lock()

    def fetch(self, url: str) -> Page | None:
        with self._lock:
            self.fetch_log[url] += 1
        return fetch(self.snapshot, url)

    def site_urls(self, host: str) -> list[str] | None:
        site = self.snapshot.sites.get(host)
        return sorted(site.pages) if site is not None else None

    @property
    def pages_fetched(self) -> int:
        return sum(self.fetch_log.values())


# --------------------------------------------------------------------------
# generation


@dataclass(frozen=True)
class GenConfig:
    countries: int = 2
    slds_per_country: int = 2
    orgs_per_sld: int = 3
    sites_per_org: tuple[int, int] = (1, 2)
    pages_per_site: tuple[int, int] = (8, 15)
    title_terms: tuple[int, int] = (1, 3)
    heading_terms: tuple[int, int] = (0, 3)
    body_terms: tuple[int, int] = (8, 24)
    vocabulary_size: int = 400
    intra_site_link_prob: float = 0.15
    cross_site_link_prob: float = 0.03
    off_domain_site_count: int = 2
    # registered sites with no cross-site links in or out
    isolated_site_count: int = 1
    seed: int = 42

    def validate(self) -> None:
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, tuple):
                if len(value) != 2 or not all(isinstance(v, int) for v in value):
                    raise ConfigError(f.name, "expected a [lo, hi] integer pair")
                lo, hi = value
                if lo < 0 or lo > hi:
                    raise ConfigError(f.name, f"need 0 <= lo <= hi, got {list(value)}")
            elif f.name.endswith("_prob"):
                if not isinstance(value, (int, float)) or not 0.0 <= value <= 1.0:
                    raise ConfigError(f.name, "probability must lie in [0, 1]")
            elif f.name != "seed":
                if not isinstance(value, int) or isinstance(value, bool) or value < 0:
                    raise ConfigError(f.name, "count must be a non-negative integer")
        if self.vocabulary_size < 1:
            raise ConfigError("vocabulary_size", "must be at least 1")
        if self.isolated_site_count > self.countries * self.slds_per_country * self.orgs_per_sld * self.sites_per_org[0]:
            raise ConfigError("isolated_site_count", "exceeds the guaranteed number of registered sites")

    @classmethod
    def from_dict(cls, data: dict) -> GenConfig:
        known = {f.name: f for f in fields(cls)}
        kwargs = {}
        for key, value in data.items():
            if key not in known:
                raise ConfigError(key, "unknown field")
            if isinstance(value, list):
                value = tuple(value)
            kwargs[key] = value
        config = cls(**kwargs)
        config.validate()
        return config

    def to_dict(self) -> dict:
        return {f.name: (list(v) if isinstance(v := getattr(self, f.name), tuple) else v) for f in fields(self)}


def _vocabulary(size: int) -> tuple[list[str], list[float]]:
    words = [f"w{i:04d}" for i in range(size)]
    # mildly skewed so that common terms recur across pages
    cum = list(accumulate(1.0 / (i + 1) ** 0.7 for i in range(size)))
    return words, cum


def generate_web(config: GenConfig | None = None) -> WebSnapshot:
    """Build a snapshot as a pure function of ``config``."""
    config = config or GenConfig()
    config.validate()
    rng = random.Random(config.seed)
    words, cum = _vocabulary(config.vocabulary_size)

    registered: dict[str, dict[str, list[str]]] = {}
    registered_hosts: list[str] = []
    org_counter = 0
    for ci in range(config.countries):
        country = _pick_name(_COUNTRY_NAMES, ci, "c")
        registered[country] = {}
        for si in range(config.slds_per_country):
            sld = f"{_pick_name(_SLD_NAMES, si, 's')}.{country}"
            orgs = []
            for _ in range(config.orgs_per_sld):
                org = f"{_pick_name(_ORG_NAMES, org_counter, 'o')}.{sld}"
                org_counter += 1
                orgs.append(org)
                for k in range(rng.randint(*config.sites_per_org)):
                    registered_hosts.append(f"{_pick_name(_SUBDOMAINS, k, 'h')}.{org}")
            registered[country][sld] = orgs
    off_hosts = [
        f"{_pick_name(_OFF_DOMAIN_NAMES, i, 'x')}.{OFF_DOMAIN_SUFFIX}"
        for i in range(config.off_domain_site_count)
    ]
    isolated = set(rng.sample(sorted(registered_hosts), config.isolated_site_count))

    all_hosts = sorted(registered_hosts + off_hosts)
    site_urls: dict[str, list[str]] = {}
    terms: dict[str, tuple[list[str], list[str], list[str]]] = {}
    sentinel = 0
    for host in all_hosts:
        urls = [f"http://{host}/p{k}" for k in range(rng.randint(*config.pages_per_site))]
        site_urls[host] = urls
        for url in urls:
            title = rng.choices(words, cum_weights=cum, k=rng.randint(*config.title_terms))
            heading = rng.choices(words, cum_weights=cum, k=rng.randint(*config.heading_terms))
            body = rng.choices(words, cum_weights=cum, k=rng.randint(*config.body_terms))
            body.append(f"{SENTINEL_PREFIX}{sentinel}")
            sentinel += 1
            terms[url] = (title, heading, body)

    linkable = [h for h in all_hosts if h not in isolated]
    sites: dict[str, Site] = {}
    for host in all_hosts:
        domain = DomainName.parse(host)
        pages = {}
        urls = site_urls[host]
        for url in urls:
            links = [u for u in urls if u != url and rng.random() < config.intra_site_link_prob]
            if host not in isolated:
                for other in linkable:
                    if other != host and site_urls[other] and rng.random() < config.cross_site_link_prob:
                        links.append(rng.choice(site_urls[other]))
            title, heading, body = terms[url]
            pages[url] = Page(url, domain, tuple(title), tuple(heading), tuple(body), tuple(links), 0)
        sites[host] = Site(domain, pages)
    return WebSnapshot(sites, registered, clock=0, mutation_log=(), next_sentinel=sentinel)


@dataclass(frozen=True)
class MutationSpec:
    edit_count: int = 0
    create_count: int = 0
    delete_count: int = 0
    seed: int = 0


def mutate_web(snapshot: WebSnapshot, spec: MutationSpec) -> WebSnapshot:
    """Advance the clock by one tick and apply edits, creations and deletions.

    Only pages on registered sites are touched; off-domain sites stay static.
    Edited pages get a few body terms replaced plus a fresh sentinel term.
    """
    for name in ("edit_count", "create_count", "delete_count"):
        if getattr(spec, name) < 0:
            raise InfeasibleMutation(f"{name} must be non-negative")
    tick = snapshot.clock + 1
    rng = random.Random(f"mutate:{spec.seed}:{snapshot.clock}")
    candidates = [p.url for p in snapshot.native_pages()]
    if spec.delete_count > len(candidates):
        raise InfeasibleMutation(f"cannot delete {spec.delete_count} of {len(candidates)} pages")
    if spec.edit_count + spec.delete_count > len(candidates):
        raise InfeasibleMutation(
            f"cannot edit {spec.edit_count} and delete {spec.delete_count} of {len(candidates)} pages"
        )
    chosen = rng.sample(candidates, spec.edit_count + spec.delete_count)
    edits = sorted(chosen[: spec.edit_count])
    deletes = sorted(chosen[spec.edit_count :])
    vocab = sorted({t for p in snapshot.pages() for t in p.body_terms + p.title_terms
                    if not t.startswith(SENTINEL_PREFIX)}) or ["w0000"]

    site_pages = {h: dict(s.pages) for h, s in snapshot.sites.items()}
    log = list(snapshot.mutation_log)
    sentinel = snapshot.next_sentinel

    for url in edits:
        page = snapshot.get(url)
        body = list(page.body_terms)
        plain = [i for i, t in enumerate(body) if not t.startswith(SENTINEL_PREFIX)]
        for i in rng.sample(plain, min(len(plain), max(1, len(plain) // 4))):
            body[i] = rng.choice(vocab)
        body.append(f"{SENTINEL_PREFIX}{sentinel}")
        sentinel += 1
        site_pages[url_host(url)][url] = Page(
            url, page.host, page.title_terms, page.heading_terms, tuple(body), page.outlinks, tick
        )
        log.append((tick, url, "edited"))

    registered_hosts = sorted(h for h in snapshot.sites if snapshot.org_of(h) is not None)
    if spec.create_count and not registered_hosts:
        raise InfeasibleMutation("no registered site to create pages on")
    created = []
    for _ in range(spec.create_count):
        host = rng.choice(registered_hosts)
        pages = site_pages[host]
        used = [int(u.rsplit("/p", 1)[1]) for u in pages]
        url = f"http://{host}/p{max(used, default=-1) + 1}"
        siblings = sorted(pages)
        links = tuple(rng.sample(siblings, min(len(siblings), rng.randint(1, 3))))
        title = tuple(rng.choice(vocab) for _ in range(2))
        body = tuple(rng.choice(vocab) for _ in range(10)) + (f"{SENTINEL_PREFIX}{sentinel}",)
        sentinel += 1
        pages[url] = Page(url, DomainName.parse(host), title, (), body, links, tick)
        created.append(url)
    log.extend((tick, url, "created") for url in sorted(created))

    for url in deletes:
        del site_pages[url_host(url)][url]
        log.append((tick, url, "deleted"))

    sites = {h: Site(snapshot.sites[h].host, pages) for h, pages in site_pages.items()}
    return WebSnapshot(sites, snapshot.registered_domains, tick, tuple(log), sentinel)


# --------------------------------------------------------------------------
# serialization


def snapshot_to_dict(snapshot: WebSnapshot) -> dict:
    return {
        "clock": snapshot.clock,
        "next_sentinel": snapshot.next_sentinel,
        "registered_domains": snapshot.registered_domains,
        "sites": [
            {
                "host": host,
                "pages": [
                    {
                        "url": p.url,
                        "title": list(p.title_terms),
                        "headings": list(p.heading_terms),
                        "body": list(p.body_terms),
                        "outlinks": list(p.outlinks),
                        "last_modified": p.last_modified,
                    }
                    for _, p in sorted(snapshot.sites[host].pages.items())
                ],
            }
            for host in sorted(snapshot.sites)
        ],
        "mutation_log": [list(entry) for entry in snapshot.mutation_log],
    }


def snapshot_from_dict(data: dict) -> WebSnapshot:
    sites = {}
    for s in data["sites"]:
        host = DomainName.parse(s["host"])
        pages = {}
        for p in s["pages"]:
            pages[p["url"]] = Page(
                p["url"], host, tuple(p["title"]), tuple(p["headings"]), tuple(p["body"]),
                tuple(p["outlinks"]), int(p["last_modified"]),
            )
        sites[s["host"]] = Site(host, pages)
    registered = {
        c: {s: list(orgs) for s, orgs in slds.items()} for c, slds in data["registered_domains"].items()
    }
    log = tuple((int(t), u, k) for t, u, k in data["mutation_log"])
    return WebSnapshot(sites, registered, int(data["clock"]), log, int(data.get("next_sentinel", 0)))


def dumps_canonical(obj) -> str:
    """The one serialization used for every file this package writes."""
    return json.dumps(obj, sort_keys=True, indent=1, ensure_ascii=False) + "\n"


def save_snapshot(snapshot: WebSnapshot, path: str | Path) -> None:
    Path(path).write_text(dumps_canonical(snapshot_to_dict(snapshot)), encoding="utf-8")


def load_snapshot(path: str | Path) -> WebSnapshot:
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SnapshotParseError(f"malformed snapshot {path}: {exc.msg}", exc.lineno) from exc
    try:
        return snapshot_from_dict(data)
    except (KeyError, TypeError, ValueError) as exc:
        raise SnapshotParseError(f"malformed snapshot {path}: {exc!r}") from exc
