"""Command-line entry point.

Exit codes: 0 success, 1 validation/data errors, 2 usage errors. Every run
emits a JSON run manifest: next to ``--out`` (``<out>.manifest.json``, or
``manifest.json`` inside an output directory), at ``--manifest`` if given,
otherwise on stderr.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path

from . import __version__
from .causal import CausalConfig, CausalResult, evaluate
from .errors import ConfigError, LedgerMineError, ParseError
from .guidance import load_context, recommend
from .kgraph import KnowledgeGraph, export_dot, load_graph, save_graph, seed_expert_rules
from .ledger import load_ledger, load_taxonomy, parse_instant, save_ledger, save_taxonomy
from .miner import Hypothesis, MinerConfig, mine_associations
from .pipeline import PipelineConfig, build_graph, derive_seed, run_pipeline
from .synth import generate, load_scenario

log = logging.getLogger("ledgermine")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _dump(obj, out=None):
    text = json.dumps(obj, indent=2) + "\n"
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def _read_json(path, what):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{what} {path} is not valid JSON: {exc}") from exc


def _section(data, name):
    """Config files may be flat or hold per-command sections."""
    if isinstance(data, dict) and name in data:
        return data[name]
    return data


def _seed(args, default=0):
    return args.seed if args.seed is not None else default


def _require(args, *names):
    missing = [n for n in names if getattr(args, n) is None]
    if missing:
        raise UsageError("missing required flag(s): " + ", ".join("--" + n.replace("_", "-") for n in missing))


def _note_inputs(args, manifest, *names):
    manifest["inputs"].update({n: getattr(args, n) for n in names if getattr(args, n) is not None})


def _load_inputs(args, manifest):
    _require(args, "ledger", "taxonomy")
    tax = load_taxonomy(args.taxonomy)
    skipped = []
    ledger = load_ledger(args.ledger, tax, strict=not args.lenient, skipped=skipped)
    manifest["inputs"].update(ledger=args.ledger, taxonomy=args.taxonomy)
    if skipped:
        manifest["skipped_lines"] = len(skipped)
    return ledger, tax


# --- subcommands ------------------------------------------------------------

def cmd_ingest(args, manifest):
    ledger, _ = _load_inputs(args, manifest)
    if args.out:
        save_ledger(ledger, args.out)
        manifest["outputs"].append(args.out)
    else:
        for e in ledger:
            sys.stdout.write(json.dumps(e.to_record(), separators=(",", ":")) + "\n")
    manifest["n_events"] = len(ledger)


def cmd_mine(args, manifest):
    ledger, tax = _load_inputs(args, manifest)
    cfg = MinerConfig()
    if args.config:
        cfg = MinerConfig.from_dict(_section(_read_json(args.config, "config"), "miner"))
        manifest["config_paths"].append(args.config)
    hyps = mine_associations(ledger, tax, cfg)
    _dump([h.to_dict() for h in hyps], args.out)
    if args.out:
        manifest["outputs"].append(args.out)


def cmd_test(args, manifest):
    ledger, tax = _load_inputs(args, manifest)
    cfg = CausalConfig()
    if args.config:
        cfg = CausalConfig.from_dict(_section(_read_json(args.config, "config"), "causal"))
        manifest["config_paths"].append(args.config)
    if args.permutations is not None:
        cfg.permutations = args.permutations
    confounders = cfg.confounders
    if args.confounders is not None:
        confounders = [c for c in args.confounders.split(",") if c]
    if args.hypothesis:
        hyps = [Hypothesis.from_dsl(args.hypothesis)]
    elif args.hypotheses:
        data = _read_json(args.hypotheses, "hypotheses")
        hyps = [Hypothesis.from_dict(d) for d in data][: args.top]
        manifest["inputs"]["hypotheses"] = args.hypotheses
    else:
        raise UsageError("one of --hypothesis or --hypotheses is required")
    seed = _seed(args)
    if len(hyps) == 1:
        results = [evaluate(ledger, hyps[0], confounders, cfg, seed, tax).to_dict()]
    else:
        # a batch reports untestable hypotheses inline instead of aborting
        results, failures = [], []
        for i, h in enumerate(hyps):
            try:
                results.append(evaluate(ledger, h, confounders, cfg, derive_seed(seed, i), tax).to_dict())
            except LedgerMineError as exc:
                log.warning("hypothesis %s not tested: %s", h.dsl(), exc)
                failures.append(exc)
                results.append({"hypothesis": h.to_dict(), "error": f"{type(exc).__name__}: {exc}"})
        if failures and len(failures) == len(hyps):
            raise failures[0]
    _dump(results, args.out)
    if args.out:
        manifest["outputs"].append(args.out)


def cmd_graph_build(args, manifest):
    _require(args, "taxonomy", "out")
    _note_inputs(args, manifest, "taxonomy", "graph", "results", "rules")
    tax = load_taxonomy(args.taxonomy)
    graph = load_graph(args.graph, tax) if args.graph else KnowledgeGraph(tax)
    results = []
    alpha = args.alpha
    if args.config:
        causal = CausalConfig.from_dict(_section(_read_json(args.config, "config"), "causal"))
        manifest["config_paths"].append(args.config)
        alpha = alpha if alpha is not None else causal.alpha
    alpha = 0.05 if alpha is None else alpha
    if args.results:
        data = _read_json(args.results, "results")
        if isinstance(data, dict):
            data = [data]
        results = [CausalResult.from_dict(d) for d in data if "error" not in d]
    updated_at = parse_instant(args.now) if args.now else 0
    build_graph(tax, results, alpha, rules_path=args.rules, graph=graph, updated_at=updated_at)
    save_graph(graph, args.out)
    manifest["outputs"].append(args.out)
    manifest["n_edges"] = len(graph)


def cmd_graph_export_dot(args, manifest):
    _require(args, "graph", "taxonomy", "out")
    _note_inputs(args, manifest, "graph", "taxonomy")
    tax = load_taxonomy(args.taxonomy)
    graph = load_graph(args.graph, tax)
    export_dot(graph, args.out)
    manifest["outputs"].append(args.out)


def cmd_recommend(args, manifest):
    _require(args, "graph", "taxonomy", "context")
    _note_inputs(args, manifest, "graph", "taxonomy", "context")
    tax = load_taxonomy(args.taxonomy)
    graph = load_graph(args.graph, tax)
    ctx = load_context(args.context, tax)
    media = [m for m in args.media.split(",") if m] if args.media else None
    recs = recommend(graph, ctx, tax, args.theta, media)
    _dump([r.to_dict() for r in recs], args.out)
    if args.out:
        manifest["outputs"].append(args.out)


def _synthesize(args, manifest, out_dir):
    scenario = load_scenario(args.scenario)
    manifest["inputs"]["scenario"] = args.scenario
    seed = _seed(args, scenario.seed)
    ledger, truth = generate(scenario, seed)
    tax = scenario.taxonomy()
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = [out_dir / "ledger.jsonl", out_dir / "taxonomy.json", out_dir / "ground_truth.json"]
    save_ledger(ledger, paths[0])
    save_taxonomy(tax, paths[1])
    _dump(truth.to_dict(), paths[2])
    manifest["outputs"].extend(str(p) for p in paths)
    return ledger, tax, truth


def cmd_synth(args, manifest):
    _require(args, "scenario", "out")
    ledger, _, _ = _synthesize(args, manifest, Path(args.out))
    manifest["n_events"] = len(ledger)


def cmd_pipeline(args, manifest):
    _require(args, "out")
    out_dir = Path(args.out)
    cfg = PipelineConfig()
    if args.config:
        cfg = PipelineConfig.from_dict(_read_json(args.config, "config"))
        manifest["config_paths"].append(args.config)
    truth = None
    if args.scenario:
        ledger, tax, truth = _synthesize(args, manifest, out_dir)
    elif args.ledger:
        ledger, tax = _load_inputs(args, manifest)
        out_dir.mkdir(parents=True, exist_ok=True)
    else:
        raise UsageError("pipeline needs --scenario or --ledger/--taxonomy")
    seed = _seed(args)
    hyps, results, graph, report = run_pipeline(ledger, tax, cfg, seed, rules_path=args.rules, truth=truth)
    outputs = {
        "hypotheses.json": [h.to_dict() for h in hyps],
        "results.json": [r.to_dict() for r in results],
        "report.json": report,
    }
    for name, obj in outputs.items():
        _dump(obj, out_dir / name)
        manifest["outputs"].append(str(out_dir / name))
    save_graph(graph, out_dir / "graph.json")
    export_dot(graph, out_dir / "graph.dot")
    manifest["outputs"].extend([str(out_dir / "graph.json"), str(out_dir / "graph.dot")])
    manifest["n_events"] = len(ledger)


# --- parser -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--ledger")
    common.add_argument("--taxonomy")
    common.add_argument("--config")
    common.add_argument("--graph")
    common.add_argument("--context")
    common.add_argument("--scenario")
    common.add_argument("--seed", type=int)
    common.add_argument("--out")
    common.add_argument("--manifest", help="where to write the run manifest")
    mode = common.add_mutually_exclusive_group()
    mode.add_argument("--strict", dest="lenient", action="store_false", help="reject invalid ledger lines (default)")
    mode.add_argument("--lenient", dest="lenient", action="store_true", help="warn and skip invalid ledger lines")
    common.set_defaults(lenient=False)

    p = _Parser(prog="ledgermine", description="Temporal event mining, causal testing and guidance.")
    p.add_argument("--version", action="version", version=f"ledgermine {__version__}")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    s = sub.add_parser("ingest", parents=[common], help="validate and normalize a ledger")
    s.set_defaults(func=cmd_ingest)

    s = sub.add_parser("mine", parents=[common], help="ledger -> ranked hypotheses")
    s.set_defaults(func=cmd_mine)

    s = sub.add_parser("test", parents=[common], help="causal test of hypotheses")
    s.add_argument("--hypothesis", help="DSL string, e.g. 'exercise.bike W[2,4] work'")
    s.add_argument("--hypotheses", help="hypotheses JSON from 'mine'")
    s.add_argument("--top", type=int, default=10)
    s.add_argument("--confounders", help="comma-separated confounder keys")
    s.add_argument("--permutations", type=int)
    s.set_defaults(func=cmd_test)

    g = sub.add_parser("graph", help="knowledge graph operations")
    gsub = g.add_subparsers(dest="graph_command", parser_class=_Parser)
    s = gsub.add_parser("build", parents=[common], help="results + expert rules -> graph")
    s.add_argument("--results")
    s.add_argument("--rules")
    s.add_argument("--alpha", type=float)
    s.add_argument("--now", help="ISO instant stamped on mined edges")
    s.set_defaults(func=cmd_graph_build)
    s = gsub.add_parser("export-dot", parents=[common], help="graph -> DOT")
    s.set_defaults(func=cmd_graph_export_dot)

    s = sub.add_parser("recommend", parents=[common], help="graph + context -> recommendations")
    s.add_argument("--theta", type=float, default=0.0, help="minimum edge confidence")
    s.add_argument("--media", help="comma-separated default media, most preferred first")
    s.set_defaults(func=cmd_recommend)

    s = sub.add_parser("synth", parents=[common], help="scenario -> ledger + ground truth")
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("pipeline", parents=[common], help="synth|ingest -> mine -> test -> graph -> report")
    s.add_argument("--rules")
    s.set_defaults(func=cmd_pipeline)
    return p


def _manifest_path(args):
    if args is None:
        return None
    if getattr(args, "manifest", None):
        return Path(args.manifest)
    out = getattr(args, "out", None)
    if not out:
        return None
    if args.command in ("synth", "pipeline"):
        return Path(out) / "manifest.json"
    return Path(out + ".manifest.json")


def _setup_logging():
    level = os.environ.get("LEDGERMINE_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")


def main(argv=None) -> int:
    _setup_logging()
    argv = list(sys.argv[1:] if argv is None else argv)
    t0 = time.perf_counter()
    manifest = {
        "command": None,
        "argv": argv,
        "tool_version": __version__,
        "config_paths": [],
        "seeds": {},
        "inputs": {},
        "outputs": [],
        "started_at": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        "error": None,
    }
    args = None
    code = 0
    try:
        args = build_parser().parse_args(argv)
        if getattr(args, "func", None) is None:
            raise UsageError("a subcommand is required" if args.command is None else f"{args.command}: a subcommand is required")
        manifest["command"] = args.command + (f" {args.graph_command}" if args.command == "graph" else "")
        manifest["seeds"] = {"seed": args.seed}
        args.func(args, manifest)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        manifest["error"] = f"UsageError: {exc}"
        code = 2
    except (LedgerMineError, ConfigError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        manifest["error"] = f"{type(exc).__name__}: {exc}"
        code = 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        manifest["error"] = f"{type(exc).__name__}: {exc}"
        code = 1
    manifest["exit_code"] = code
    manifest["elapsed_s"] = round(time.perf_counter() - t0, 6)
    _write_manifest(manifest, _manifest_path(args))
    return code


def _write_manifest(manifest, path):
    text = json.dumps(manifest, indent=2, default=str) + "\n"
    if path is not None:
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(text, encoding="utf-8")
            return
        except OSError as exc:
            log.warning("could not write manifest to %s: %s", path, exc)
    sys.stderr.write(text)


if __name__ == "__main__":
    sys.exit(main())
