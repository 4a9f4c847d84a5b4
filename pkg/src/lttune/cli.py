"""``lt`` command line: ``lt tune`` runs the whole pipeline, ``lt compress`` only the compressor."""

from __future__ import annotations

import argparse
import logging
import sys
from typing import Sequence

from lttune.compressor import compress, default_budget, render_compressed
from lttune.evaluator import ConfigMeta
from lttune.events import EventLog
from lttune.executor import ExecutorError, ScenarioError, SimScenario, SimExecutor
from lttune.llm import (DEFAULT_TEMPERATURE, HttpChatClient, LlmError, ReplayClient,
                        render_configuration, sample_configurations)
from lttune.prompt import HardwareSpec, build_prompt, template_overhead
from lttune.report import Meters, RunReport, Winner
from lttune.selector import (DEFAULT_ALPHA, DEFAULT_MAX_ROUNDS, DEFAULT_T0, SelectionError,
                             config_select)
from lttune.workload import (DEFAULT_TOKENIZER, ScenarioCostProvider, UniformCostProvider,
                             WorkloadError, load_workload, pair_values)

logger = logging.getLogger("lttune")

DEFAULT_CONTEXT_LIMIT = 8192
RESPONSE_RESERVE = 1024


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--workload", required=True, help="directory of *.sql files")
    p.add_argument("--dbms", default="postgres")
    p.add_argument("--memory-gb", type=float, default=61.0)
    p.add_argument("--cores", type=int, default=8)
    p.add_argument("--token-budget", "--budget", dest="token_budget", type=int, default=None,
                   help="tokens for the workload section (default: fill the context)")
    p.add_argument("--context-limit", type=int, default=DEFAULT_CONTEXT_LIMIT)
    p.add_argument("--simulate", metavar="SCENARIO", help="run against a simulator scenario file")
    p.add_argument("--db-url", help="PostgreSQL connection string")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lt")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    t = sub.add_parser("tune", help="compress, prompt, sample and select a configuration")
    _common(t)
    t.add_argument("--n", type=int, default=5, help="configurations to sample")
    t.add_argument("--temperature", type=float, default=DEFAULT_TEMPERATURE)
    t.add_argument("--t0", type=float, default=DEFAULT_T0, help="first-round timeout in seconds")
    t.add_argument("--alpha", type=float, default=DEFAULT_ALPHA)
    t.add_argument("--max-rounds", type=int, default=DEFAULT_MAX_ROUNDS)
    t.add_argument("--llm-endpoint", help="OpenAI-compatible chat completions URL")
    t.add_argument("--llm-model", default="gpt-4")
    t.add_argument("--llm-workers", type=int, default=1)
    t.add_argument("--replay", metavar="DIR", help="serve LLM responses from resp_<k>.txt files")
    t.add_argument("--report-out", default="report.json")

    c = sub.add_parser("compress", help="print the compressed workload")
    _common(c)
    return parser


def _cost_provider(args, scenario: SimScenario | None, conn):
    if scenario is not None and scenario.join_costs:
        return ScenarioCostProvider(scenario.join_costs)
    if conn is not None:
        from lttune.pgadapter import ExplainCostProvider
        return ExplainCostProvider(conn)
    return UniformCostProvider()


def _compress(args, report: RunReport, scenario, conn):
    workload = load_workload(args.workload)
    for q in workload:
        report.warnings.extend(f"{q.id}: {w}" for w in q.warnings)
    hw = HardwareSpec(args.memory_gb, args.cores)
    values = pair_values(workload, _cost_provider(args, scenario, conn), report.warnings)
    budget = args.token_budget
    if budget is None:
        budget = default_budget(args.context_limit, template_overhead(args.dbms, hw), RESPONSE_RESERVE)
    if budget < 0:
        raise ValueError("token budget must be >= 0")
    selection = compress(values, budget, DEFAULT_TOKENIZER)
    text = render_compressed(selection)
    report.token_budget = budget
    report.compressed = {
        "text": text,
        "tokens": DEFAULT_TOKENIZER.count(text),
        "objective": selection.objective,
        "pairs_available": len(values),
        "pairs_selected": sum(len(r) for r in selection.lines.values()),
    }
    return workload, hw, text


def _load_scenario(args) -> SimScenario | None:
    return SimScenario.load(args.simulate) if args.simulate else None


def _connect(args, scenario):
    if args.db_url and scenario is None:
        from lttune.pgadapter import connect
        return connect(args.db_url)
    return None


def compress_only(args) -> int:
    report = RunReport()
    scenario = _load_scenario(args)
    _, _, text = _compress(args, report, scenario, _connect(args, scenario))
    if text:
        print(text)
    print(f"tokens: {report.compressed['tokens']}", file=sys.stderr)
    return 0


def _meta_dict(m: ConfigMeta) -> dict:
    return {
        "time": m.time,
        "is_complete": m.is_complete,
        "index_time": m.index_time,
        "completed_queries": sorted(m.completed_queries),
        "query_times": dict(sorted(m.query_times.items())),
        "wasted_time": m.wasted_time,
        "cumulative_index_time": m.cumulative_index_time,
        "reconfig_time": m.reconfig_time,
        "failed": m.failed,
        "warnings": list(m.warnings),
    }


def tune(args) -> RunReport:
    """Run the pipeline; fills a report even when a stage fails (then re-raises)."""
    report = RunReport(dbms=args.dbms,
                       hardware={"memory_gb": args.memory_gb, "cores": args.cores},
                       settings={"n": args.n, "temperature": args.temperature, "t0": args.t0,
                                 "alpha": args.alpha, "max_rounds": args.max_rounds})
    meta: dict[int, ConfigMeta] = {}
    log = EventLog()
    try:
        scenario = _load_scenario(args)
        conn = _connect(args, scenario)
        if scenario is None and conn is None:
            raise ExecutorError("no executor: pass --simulate SCENARIO or --db-url URL")
        workload, hw, text = _compress(args, report, scenario, conn)
        prompt = build_prompt(args.dbms, text, hw, DEFAULT_TOKENIZER)
        report.prompt = {"text": prompt.text, "token_count": prompt.token_count}

        if args.replay:
            client = ReplayClient(args.replay)
        elif args.llm_endpoint:
            client = HttpChatClient(args.llm_endpoint, args.llm_model)
        else:
            raise LlmError("no LLM: pass --replay DIR or --llm-endpoint URL")
        usage: dict = {}
        configs = sample_configurations(prompt.text, args.n, args.temperature, client,
                                        args.dbms, args.llm_workers, usage)
        report.meters.llm_prompt_tokens = usage.get("prompt_tokens") or prompt.token_count * len(configs)
        report.meters.llm_completion_tokens = (usage.get("completion_tokens")
                                               or sum(DEFAULT_TOKENIZER.count(c.raw) for c in configs))
        report.configurations = [{
            "id": c.id,
            "raw": c.raw,
            "empty": c.empty,
            "param_sets": [list(p) for p in c.param_sets],
            "indexes": [{"name": ix.name, "table": ix.table, "columns": list(ix.columns)} for ix in c.indexes],
            "ignored": list(c.ignored),
            "sql": render_configuration(c, args.dbms),
        } for c in configs]

        if scenario is not None:
            executor = SimExecutor(scenario)
        else:
            from lttune.pgadapter import PostgresExecutor
            executor = PostgresExecutor(conn)
        best = config_select(workload, configs, args.t0, args.alpha, executor,
                             args.max_rounds, meta=meta, log=log)
        m = meta[best.config.id]
        report.winner = Winner(
            config_id=best.config.id,
            total_time=best.time,
            params=[list(p) for p in best.config.param_sets],
            indexes=[{"name": ix.name, "table": ix.table, "columns": list(ix.columns)}
                     for ix in best.config.indexes],
            query_times=dict(sorted(m.query_times.items())),
        )
    except Exception as e:
        report.status = "error"
        report.error = f"{type(e).__name__}: {e}"
        raise
    finally:
        report.events = log.events
        report.incumbents = [{"config": e["config"], "time": e["time"], "at": e["at"]}
                             for e in log.of_kind("incumbent")]
        report.config_meta = {str(k): _meta_dict(v) for k, v in sorted(meta.items())}
        report.meters = Meters(
            query_time=sum(v.time + v.wasted_time for v in meta.values()),
            wasted_time=sum(v.wasted_time for v in meta.values()),
            index_time=sum(v.cumulative_index_time for v in meta.values()),
            reconfig_time=sum(v.reconfig_time for v in meta.values()),
            llm_prompt_tokens=report.meters.llm_prompt_tokens,
            llm_completion_tokens=report.meters.llm_completion_tokens,
        )
        if args.report_out:
            report.write(args.report_out)
    return report


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "compress":
            return compress_only(args)
        report = tune(args)
    except (WorkloadError, ScenarioError, ExecutorError, LlmError, SelectionError, ValueError) as e:
        print(f"lt: error: {e}", file=sys.stderr)
        return 1
    print(report.summary())
    return 0


if __name__ == "__main__":
    sys.exit(main())
