"""Command-line entry point: generate, postprocess, analyze, eval,
fit-counselor, serve, chat.
"""

from __future__ import annotations

import argparse
import csv
import json
import random
import sys
from pathlib import Path

from . import analysis, evaluation, postprocess
from .config import load_config
from .corpus import (
    STRATEGIES,
    SEEKER,
    SeedPools,
    Utterance,
    load_corpus,
    load_taxonomy,
    merge_consecutive,
    save_corpus,
)
from .counselor import Counselor, TransitionModel, fit_transition_model
from .engine import Engine, EngineConfig, RoleBackends
from .gateway import BackendConfig, ScriptedBackend, make_backend
from .prompts import PromptLibrary
from .service import ServiceSettings, SupportStack, create_app

ROLES = ("seeker", "supporter", "counselor", "scenario", "profile")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="escforge", description=__doc__)
    parser.add_argument("--config", help="JSON config file (flags override it)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="run the role-playing batch generator")
    p.add_argument("--n", type=int, required=True, help="number of dialogues")
    p.add_argument("--seed", type=int, default=None, help="master RNG seed")
    p.add_argument("--out", required=True, help="output corpus JSONL")
    p.add_argument("--report", help="write the run report JSON here")
    p.add_argument("--fixture", help="scripted fixture JSONL driving every role")
    p.add_argument("--pools-out", help="directory to save the grown seed pools")

    p = sub.add_parser("postprocess", help="filter a corpus with the quality rules")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--report", help="drop-report JSONL path")

    p = sub.add_parser("analyze", help="emit all corpus analysis reports")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--report-dir", required=True)

    p = sub.add_parser("eval", help="evaluate a responder against a test corpus")
    p.add_argument("--model", choices=("echo", "canned", "gateway"), required=True)
    p.add_argument("--test", required=True, help="test corpus JSONL")
    p.add_argument("--mode", choices=(evaluation.MODE_GENERATED, evaluation.MODE_REFERENCE), required=True)
    p.add_argument("--out", help="EvalReport JSON path")
    p.add_argument("--canned", help="file with one canned response per line")
    p.add_argument("--fixture", help="scripted fixture for the gateway model")

    p = sub.add_parser("fit-counselor", help="fit the transition model from a labeled corpus")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("serve", help="run the live evaluation HTTP service")
    p.add_argument("--port", type=int, default=None)
    p.add_argument("--host", default=None)
    p.add_argument("--fixture", help="scripted fixture serving every configured model")

    p = sub.add_parser("chat", help="terminal REPL against the live stack")
    p.add_argument("--fixture", help="scripted fixture for offline replies")

    return parser


# --- shared builders ---------------------------------------------------------


def _build_backends(cfg: dict, fixture: str | None) -> dict[str, object]:
    """Resolve one backend per role, sharing instances across roles that name
    the same config (a shared scripted fixture must be one consumer)."""
    if fixture:
        shared = ScriptedBackend.from_path(fixture)
        return {role: shared for role in ROLES}
    built: dict[str, object] = {}
    backends: dict[str, object] = {}
    for role in ROLES:
        raw = cfg["backends"].get(role) or cfg["backends"].get("default")
        if raw is None:
            continue
        key = json.dumps(raw, sort_keys=True)
        if key not in built:
            built[key] = make_backend(BackendConfig(**raw))
        backends[role] = built[key]
    return backends


def _build_prompts(cfg: dict) -> PromptLibrary:
    return PromptLibrary(cfg["paths"]["prompts_dir"])


def _build_counselor(cfg: dict, backends: dict[str, object], prompts: PromptLibrary) -> Counselor:
    mode = cfg["engine"]["counselor_mode"]
    model_path = cfg["counselor"]["model_path"]
    model = TransitionModel.load(model_path) if model_path else None
    return Counselor(
        mode=mode,
        model=model,
        backend=backends.get("counselor"),
        prompts=prompts,
        expected_length=cfg["counselor"]["expected_length"],
        sample=cfg["counselor"]["sample"],
        history_window=cfg["engine"]["history_window"],
    )


def _build_policy(cfg: dict) -> postprocess.FilterPolicy:
    section = cfg["postprocess"]
    return postprocess.FilterPolicy(
        min_utterances=section["min_utterances"],
        max_utterances=section["max_utterances"],
        max_flags=section["max_flags"],
    )


def _load_pools(cfg: dict) -> SeedPools:
    paths = cfg["paths"]
    if paths["scenario_pool"] and paths["profile_pool"]:
        return SeedPools.load(paths["scenario_pool"], paths["profile_pool"])
    return SeedPools.load_starter()


def _load_patterns(cfg: dict):
    path = cfg["paths"]["patterns"]
    if not path:
        return None
    return postprocess.DEFAULT_PATTERNS + postprocess.load_patterns(path)


# --- subcommands ---------------------------------------------------------------


def cmd_generate(args, cfg: dict) -> int:
    if args.seed is not None:
        cfg["engine"]["rng_seed"] = args.seed
    backends = _build_backends(cfg, args.fixture)
    missing = [r for r in ("seeker", "supporter") if r not in backends]
    if missing:
        print(f"error: no backend configured for roles {missing}; set backends.default or --fixture", file=sys.stderr)
        return 1
    prompts = _build_prompts(cfg)
    counselor = _build_counselor(cfg, backends, prompts)
    engine = Engine(
        config=EngineConfig(**cfg["engine"]),
        backends=RoleBackends(
            seeker=backends["seeker"],
            supporter=backends["supporter"],
            counselor=backends.get("counselor"),
            scenario=backends.get("scenario"),
            profile=backends.get("profile"),
        ),
        counselor=counselor,
        prompts=prompts,
        filter_policy=_build_policy(cfg),
    )
    taxonomy = load_taxonomy(cfg["paths"]["taxonomy"])
    pools = _load_pools(cfg)
    corpus, pools, report = engine.run_batch(args.n, taxonomy, pools)
    save_corpus(corpus, args.out)
    if args.pools_out:
        out = Path(args.pools_out)
        out.mkdir(parents=True, exist_ok=True)
        pools.save(out / "scenario_pool.jsonl", out / "profile_pool.jsonl")
    payload = json.dumps(report.to_dict(), indent=2)
    if args.report:
        Path(args.report).write_text(payload + "\n", encoding="utf-8")
    print(payload)
    return 0


def cmd_postprocess(args, cfg: dict) -> int:
    corpus = load_corpus(args.input)
    kept, dropped = postprocess.filter_corpus(corpus, _build_policy(cfg), patterns=_load_patterns(cfg))
    save_corpus(kept, args.out)
    if args.report:
        postprocess.write_drop_report(dropped, args.report)
    print(json.dumps({"input": len(corpus), "kept": len(kept), "dropped": len(dropped)}))
    return 0


def _write_csv(path: Path, header: list[str], rows: list) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        writer.writerows(rows)


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


def cmd_analyze(args, cfg: dict) -> int:
    out = Path(args.report_dir)
    out.mkdir(parents=True, exist_ok=True)
    corpus = [merge_consecutive(d) for d in load_corpus(args.input)]

    def attempt(name: str, fn) -> None:
        try:
            fn()
        except ValueError as exc:
            _write_json(out / f"{name}.json", {"error": str(exc)})

    def stats() -> None:
        report = analysis.corpus_statistics(corpus)
        _write_json(out / "stats.json", report.to_dict())
        _write_csv(out / "stats.csv", ["section", "metric", "value"], report.to_rows())

    def similarity(grouping: str) -> None:
        summaries, warnings = analysis.grouped_similarity(corpus, grouping)
        payload = {name: summary.to_dict() for name, summary in summaries.items()}
        _write_json(out / f"similarity_{grouping}.json", {"groups": payload, "warnings": warnings})
        rows = [
            (name, lo, hi, count)
            for name, summary in summaries.items()
            for lo, hi, count in summary.histogram
        ]
        _write_csv(out / f"similarity_{grouping}_histogram.csv", ["group", "bin_low", "bin_high", "count"], rows)

    def distinct() -> None:
        docs = [d.text() for d in corpus]
        payload = {f"distinct_{n}": 100.0 * analysis.distinct_n_corpus(docs, n) for n in (1, 2, 3)}
        _write_json(out / "distinct_n.json", payload)

    def distribution() -> None:
        dist = analysis.strategy_distribution(corpus)
        _write_json(out / "strategy_distribution.json", dist)
        _write_csv(
            out / "strategy_distribution.csv",
            ["strategy", "proportion"],
            [(name, dist[name]) for name in STRATEGIES],
        )

    def transition() -> None:
        matrix, empty = analysis.strategy_transition(corpus)
        rows = [[b, *matrix[b].tolist()] for b in range(matrix.shape[0])]
        _write_csv(out / "strategy_transition.csv", ["bucket", *STRATEGIES], rows)
        _write_json(out / "strategy_transition.json", {"matrix": matrix.tolist(), "empty_buckets": empty})

    def unique() -> None:
        histogram = analysis.unique_strategy_histogram(corpus)
        _write_json(out / "unique_strategy_histogram.json", {str(k): v for k, v in histogram.items()})
        _write_csv(out / "unique_strategy_histogram.csv", ["unique_strategies", "dialogues"], sorted(histogram.items()))

    def scenario_similarity() -> None:
        summary, warnings = analysis.scenario_dialogue_similarity(corpus)
        _write_json(out / "scenario_dialogue_similarity.json", {**summary.to_dict(), "warnings": warnings})

    attempt("stats", stats)
    for grouping in ("global", "by_problem_type", "by_strategy"):
        attempt(f"similarity_{grouping}", lambda g=grouping: similarity(g))
    attempt("distinct_n", distinct)
    attempt("strategy_distribution", distribution)
    attempt("strategy_transition", transition)
    attempt("unique_strategy_histogram", unique)
    attempt("scenario_dialogue_similarity", scenario_similarity)
    print(f"reports written to {out}")
    return 0


def cmd_eval(args, cfg: dict) -> int:
    corpus = [merge_consecutive(d) for d in load_corpus(args.test)]
    if args.model == "echo":
        model = evaluation.EchoModel()
    elif args.model == "canned":
        if not args.canned:
            print("error: --canned FILE is required for the canned model", file=sys.stderr)
            return 1
        responses = Path(args.canned).read_text(encoding="utf-8").splitlines()
        model = evaluation.CannedModel([r for r in responses if r.strip()])
    else:
        backends = _build_backends(cfg, args.fixture)
        if "supporter" not in backends:
            print("error: gateway model needs a supporter backend or --fixture", file=sys.stderr)
            return 1
        model = evaluation.GatewayModel(backends["supporter"], _build_prompts(cfg))
    report = evaluation.run_eval(model, corpus, args.mode)
    payload = json.dumps(report.to_dict(), indent=2)
    if args.out:
        Path(args.out).write_text(payload + "\n", encoding="utf-8")
    print(payload)
    return 0


def cmd_fit_counselor(args, cfg: dict) -> int:
    corpus = [merge_consecutive(d) for d in load_corpus(args.input)]
    model = fit_transition_model(corpus)
    model.save(args.out)
    print(f"transition model written to {args.out} ({int(model.counts.sum())} transitions)")
    return 0


def _build_service_settings(cfg: dict, fixture: str | None) -> ServiceSettings:
    prompts = _build_prompts(cfg)
    backends = _build_backends(cfg, fixture)
    service_cfg = cfg["service"]
    models: dict[str, SupportStack] = {}
    pools = _load_pools(cfg)
    exemplar = pools.scenarios[0].dialogue if pools.scenarios else None
    for ref, model_cfg in service_cfg["models"].items():
        model_cfg = model_cfg or {}
        backend_name = model_cfg.get("backend", "supporter")
        supporter_backend = backends.get(backend_name) or backends.get("supporter")
        if supporter_backend is None:
            raise ValueError(f"service model {ref!r}: no backend available")
        counselor_model_path = model_cfg.get("counselor_model") or cfg["counselor"]["model_path"]
        counselor_mode = model_cfg.get("counselor_mode", "statistical")
        if counselor_mode == "statistical" and not counselor_model_path:
            # Live sessions default to the statistical counselor for latency;
            # with no fitted model configured, fit one from the starter pool.
            model = fit_transition_model([s.dialogue for s in pools.scenarios])
        elif counselor_model_path:
            model = TransitionModel.load(counselor_model_path)
        else:
            model = None
        counselor = Counselor(
            mode=counselor_mode,
            model=model,
            backend=backends.get("counselor"),
            prompts=prompts,
            expected_length=model_cfg.get("expected_length", cfg["counselor"]["expected_length"]),
            sample=model_cfg.get("sample", cfg["counselor"]["sample"]),
        )
        models[ref] = SupportStack(
            counselor=counselor,
            supporter_backend=supporter_backend,
            prompts=prompts,
            exemplar=exemplar,
            history_window=cfg["engine"]["history_window"],
            sentence_cap=cfg["engine"]["sentence_cap"],
        )
    if not models:
        raise ValueError("service.models is empty; configure at least one model ref")
    return ServiceSettings(
        models=models,
        rng_seed=service_cfg["rng_seed"],
        log_path=service_cfg["log_path"],
        static_dir=service_cfg["static_dir"],
        cors_origins=tuple(service_cfg["cors_origins"]),
    )


def cmd_serve(args, cfg: dict) -> int:
    import uvicorn

    settings = _build_service_settings(cfg, args.fixture)
    app = create_app(settings)
    host = args.host or cfg["service"]["host"]
    port = args.port if args.port is not None else cfg["service"]["port"]
    uvicorn.run(app, host=host, port=port, log_level="warning")
    return 0


def cmd_chat(args, cfg: dict) -> int:
    prompts = _build_prompts(cfg)
    backends = _build_backends(cfg, args.fixture)
    if "supporter" not in backends:
        print("error: chat needs a supporter backend or --fixture", file=sys.stderr)
        return 1
    pools = _load_pools(cfg)
    model_path = cfg["counselor"]["model_path"]
    model = (
        TransitionModel.load(model_path)
        if model_path
        else fit_transition_model([s.dialogue for s in pools.scenarios])
    )
    counselor = Counselor(mode="statistical", model=model, expected_length=cfg["counselor"]["expected_length"])
    stack = SupportStack(
        counselor=counselor,
        supporter_backend=backends["supporter"],
        prompts=prompts,
        exemplar=pools.scenarios[0].dialogue if pools.scenarios else None,
    )
    rng = random.Random(cfg["engine"]["rng_seed"])
    history: list[Utterance] = []
    print("escforge chat — you are the seeker. Type 'quit' to leave.")
    while True:
        try:
            line = input("you> ").strip()
        except EOFError:
            break
        if not line:
            continue
        if line.lower() in ("quit", "exit"):
            break
        history.append(Utterance(speaker=SEEKER, text=line))
        try:
            reply = stack.reply(history, rng)
        except Exception as exc:
            print(f"[error] {exc}", file=sys.stderr)
            history.pop()
            continue
        history.append(reply)
        print(f"[{reply.strategy}] {reply.text}")
    return 0


COMMANDS = {
    "generate": cmd_generate,
    "postprocess": cmd_postprocess,
    "analyze": cmd_analyze,
    "eval": cmd_eval,
    "fit-counselor": cmd_fit_counselor,
    "serve": cmd_serve,
    "chat": cmd_chat,
}


def dispatch(argv: list[str]) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = load_config(args.config)
        return COMMANDS[args.command](args, cfg)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
