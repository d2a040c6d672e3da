"""Command-line client: extraction, merging, grafting, validation, serving,
audit replay, and the scripted simulation.

All file outputs use the same canonical serialization as the service, so any
artifact written here can be loaded there and vice versa.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .agents import AgentProfile, resolve_strategy
from .canonical import canonical_dumps
from .errors import CrystalError
from .extraction import CandidateChain, extract_corpus, load_corpus
from .graph import EngineConfig
from .merge import merge
from .rules import RuleSet, graft
from .simulate import load_scenario_text, run_simulation
from .store import load_graph_file, read_audit_log, replay_audit, save_graph_file


def _read_text(path: str) -> str:
    return Path(path).read_text(encoding="utf-8")


def _write_or_print(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _load_config(path: str | None) -> EngineConfig:
    if not path:
        return EngineConfig()
    return EngineConfig.from_dict(json.loads(_read_text(path)))


def _chains_from_file(path: str) -> list[CandidateChain]:
    raw = json.loads(_read_text(path))
    if isinstance(raw, dict):
        raw = raw.get("chains", [])
    return [CandidateChain.from_dict(c) for c in raw]


def cmd_extract(args: argparse.Namespace) -> int:
    resolve_strategy(args.agent)  # fail fast on unknown profile
    agent = AgentProfile(agent_id=f"cli-{args.agent}", strategy_id=args.agent)
    corpus = load_corpus(_read_text(args.corpus))
    result = extract_corpus([agent], corpus)
    for failure in result.failures:
        print(f"warning: case {failure.case_id}: {failure.reason}", file=sys.stderr)
    _write_or_print(canonical_dumps(result.to_dict()), args.output)
    return 0


def cmd_merge(args: argparse.Namespace) -> int:
    chains: list[CandidateChain] = []
    for path in args.chains:
        chains.extend(_chains_from_file(path))
    config = _load_config(args.config)
    graph, report = merge(chains, config)
    save_graph_file(args.output, graph, config)
    print(canonical_dumps(report.to_dict()))
    return 0


def cmd_graft(args: argparse.Namespace) -> int:
    raw = json.loads(_read_text(args.rules))
    if isinstance(raw, dict):
        raw = raw.get("rules", [])
    ruleset = RuleSet.from_dicts(raw)
    graph = graft(ruleset)
    config = _load_config(args.config)
    if args.output:
        save_graph_file(args.output, graph, config)
        print(f"grafted {graph.graph_id}: {len(graph.nodes)} nodes, {len(graph.edges)} edges")
    else:
        print(canonical_dumps(graph.to_dict()))
    return 0


def cmd_validate(args: argparse.Namespace) -> int:
    graph, _config = load_graph_file(args.graph)
    print(
        f"OK {graph.graph_id}: {len(graph.nodes)} nodes, {len(graph.edges)} edges, "
        f"version {graph.version}"
    )
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app

    data_dir = os.environ.get("CRYSTAL_DATA_DIR") or args.data_dir
    app = create_app(data_dir)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def cmd_replay(args: argparse.Namespace) -> int:
    records = read_audit_log(args.log)
    graph = replay_audit(records, up_to_seq=args.up_to_seq)
    _write_or_print(canonical_dumps(graph.to_dict()), args.output)
    return 0


def cmd_simulate(args: argparse.Namespace) -> int:
    scenario = load_scenario_text(_read_text(args.scenario))
    result = run_simulation(scenario, max_budget=args.turns)
    _write_or_print(result.to_csv(), args.output)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="crystal", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="extract candidate chains from a case corpus")
    p.add_argument("corpus", help="corpus file of case blocks")
    p.add_argument("--agent", required=True, help="prompt profile to extract with")
    p.add_argument("-o", "--output", help="write chains JSON here instead of stdout")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("merge", help="merge chain files into one consensus graph")
    p.add_argument("chains", nargs="+", help="chain JSON files")
    p.add_argument("-o", "--output", required=True, help="graph file to write")
    p.add_argument("--config", help="engine config JSON file")
    p.set_defaults(func=cmd_merge)

    p = sub.add_parser("graft", help="build a graph from a routing ruleset")
    p.add_argument("rules", help="rules JSON file")
    p.add_argument("-o", "--output", help="graph file to write")
    p.add_argument("--config", help="engine config JSON file")
    p.set_defaults(func=cmd_graft)

    p = sub.add_parser("validate", help="check a graph file end to end")
    p.add_argument("graph", help="graph file to check")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--data-dir", default="./crystal-data")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("replay", help="rebuild a graph from its audit log")
    p.add_argument("log", help="audit log file")
    p.add_argument("--up-to-seq", type=int, default=None)
    p.add_argument("-o", "--output", help="write graph JSON here instead of stdout")
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("simulate", help="run the scripted accuracy simulation")
    p.add_argument("scenario", help="scenario JSON file")
    p.add_argument("--turns", type=int, default=5, help="largest turn budget")
    p.add_argument("-o", "--output", help="write CSV here instead of stdout")
    p.set_defaults(func=cmd_simulate)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CrystalError as err:
        print(f"error: {type(err).__name__}: {err}", file=sys.stderr)
        return 1
    except FileNotFoundError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
