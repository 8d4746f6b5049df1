"""Command-line interface: ``dris <command> ...``.

Exit status is 0 on success, 1 on usage errors and 2 on runtime errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .deployment import Deployment, deploy, experiment_coverage, experiment_freshness
from .errors import DrisError
from .registry import class_name, service_url
from .web import (
    DomainName,
    GenConfig,
    MutationSpec,
    dumps_canonical,
    generate_web,
    load_snapshot,
    mutate_web,
    save_snapshot,
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _load_config(path: str | None, seed: int | None) -> GenConfig:
    data = json.loads(Path(path).read_text(encoding="utf-8")) if path else {}
    if seed is not None:
        data["seed"] = seed
    return GenConfig.from_dict(data)


def _emit(payload: dict, out: str | None) -> None:
    text = dumps_canonical(payload)
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_gen(args) -> None:
    save_snapshot(generate_web(_load_config(args.config, args.seed)), args.out)


def cmd_deploy(args) -> None:
    dep = deploy(load_snapshot(args.snapshot), transport=args.transport, concurrent=args.concurrent)
    try:
        dep.save(args.state)
    finally:
        dep.close()


def cmd_query(args) -> None:
    dep = Deployment.load(args.state)
    if args.tier != 1 and args.node is None:
        raise UsageError("--node is required for tier 2 and tier 3 queries")
    node = str(DomainName.parse(args.node)) if args.node else None
    hits, partial = dep.query([t.lower() for t in args.terms], k=args.k, tier=args.tier, node=node)
    for hit in hits:
        print(json.dumps(hit.to_wire(), sort_keys=True))
    if partial:
        print("warning: partial result, some children did not answer", file=sys.stderr)


def cmd_harvest(args) -> None:
    dep = Deployment.load(args.state)
    report = dep.tier2[str(DomainName.parse(args.node))].harvest_cycle()
    dep.save(args.state)
    _emit({"transferred": report.transferred, "errors": report.errors, "restarts": report.restarts}, None)


def cmd_crawl(args) -> None:
    dep = Deployment.load(args.state)
    name = str(DomainName.parse(args.node))
    crawl = dep.tier3[name].recrawl(dep.snapshot)
    dep.save(args.state)
    _emit(crawl.report(), None)


def cmd_mutate(args) -> None:
    spec = MutationSpec(args.edit, args.create, args.delete, args.seed)
    if args.state:
        dep = Deployment.load(args.state)
        dep.mutate(spec)
        dep.save(args.state)
    else:
        save_snapshot(mutate_web(load_snapshot(args.snapshot), spec), args.out or args.snapshot)


def cmd_experiment(args) -> None:
    if args.state:
        dep = Deployment.load(args.state)
    else:
        dep = deploy(generate_web(_load_config(args.config, None)))
    try:
        if args.which == "coverage":
            report = experiment_coverage(dep, seed=args.seed)
        else:
            report = experiment_freshness(dep, edit_count=args.edits, seed=args.seed)
        if args.state:
            dep.save(args.state)
    finally:
        dep.close()
    _emit(report.to_dict(include_timing=args.timing), args.out)


def cmd_name(args) -> None:
    domain = DomainName.parse(args.domain)
    print(class_name(domain) if args.form == "class" else service_url(domain))


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dris", description="Search engine organised like DNS, at desk scale.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen", help="generate a synthetic web snapshot")
    p.add_argument("--config", help="JSON file with generator settings")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("deploy", help="build all nodes, crawl and harvest into a state dir")
    p.add_argument("--snapshot", required=True)
    p.add_argument("--state", required=True)
    p.add_argument("--transport", choices=["inproc", "socket"], default="inproc")
    p.add_argument("--concurrent", action="store_true")
    p.set_defaults(func=cmd_deploy)

    p = sub.add_parser("query", help="search one tier; prints hits as JSON lines")
    p.add_argument("--state", required=True)
    p.add_argument("--tier", type=int, choices=[1, 2, 3], default=1)
    p.add_argument("--node", help="node domain; tier 1 defaults to the root over all countries")
    p.add_argument("-k", type=int, default=10)
    p.add_argument("terms", nargs="+")
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("harvest", help="run one harvest cycle on a tier-2 node")
    p.add_argument("--state", required=True)
    p.add_argument("--node", required=True)
    p.set_defaults(func=cmd_harvest)

    p = sub.add_parser("crawl", help="recrawl one tier-3 node against the current snapshot")
    p.add_argument("--state", required=True)
    p.add_argument("--node", required=True)
    p.set_defaults(func=cmd_crawl)

    p = sub.add_parser("mutate", help="advance the web by one tick")
    target = p.add_mutually_exclusive_group(required=True)
    target.add_argument("--state")
    target.add_argument("--snapshot")
    p.add_argument("--out", help="with --snapshot: write here instead of in place")
    p.add_argument("--edit", type=int, default=0)
    p.add_argument("--create", type=int, default=0)
    p.add_argument("--delete", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_mutate)

    p = sub.add_parser("experiment", help="run the coverage or freshness experiment")
    p.add_argument("which", choices=["coverage", "freshness"])
    p.add_argument("--config")
    p.add_argument("--state", help="use this deployment instead of generating one")
    p.add_argument("--seed", type=int, default=0, help="baseline seed pick / mutation seed")
    p.add_argument("--edits", type=int, default=10)
    p.add_argument("--timing", action="store_true", help="include wall-clock timings")
    p.add_argument("--out")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("name", help="print the DRIS class name or service url of a domain")
    p.add_argument("form", choices=["class", "url"])
    p.add_argument("domain")
    p.set_defaults(func=cmd_name)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
        args.func(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except (DrisError, OSError, KeyError, ValueError) as exc:
        print(f"dris: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
