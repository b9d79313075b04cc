"""Command-line entry point: plan, exec, bench, foon2pddl.

Exit codes: 0 success, 1 a stage failed or execution stopped early,
2 bad input (missing file, bad config, unknown approach), 3 no plan for a
unit or an alias without an instance.
"""
from __future__ import annotations

import argparse
import configparser
import json
import logging
import sys
import warnings
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

from . import bench
from .foon import FoonError, parse_olp_json, serialize_olp
from .grounding import (DEFAULT_THRESHOLDS, AliasBinding, GeomThresholds, GroundingError, PreconditionMismatch,
                        UnboundAlias, load_scene)
from .llm.pipeline import PipelineError, UnresolvableAlias, greedy_binding, plan_aliases, run_olp_pipeline
from .llm.providers import (ChatCompletionsProvider, ChatProviderConfig, ProviderError, RecordingProvider,
                            ReplayProvider)
from .llm.retrieval import ExemplarLibrary
from .pddl import builtin_blockworld_domain, print_domain, print_problem
from .planner import SubgoalUnsolvable, format_plan, parse_plan, plan_olp
from .simulator import TaskSpec, execute_plan

log = logging.getLogger("olplan")

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_UNSOLVED = 0, 1, 2, 3
MODES = ("live", "replay", "record")


class UsageError(Exception):
    """Bad input: exit code 2."""


class Unsolved(Exception):
    """No plan or no binding: exit code 3."""


def bundled_fixtures() -> Path:
    return Path(str(resources.files("olplan.data").joinpath("fixtures")))


@dataclass
class CliConfig:
    mode: str = "replay"
    provider: ChatProviderConfig = field(default_factory=ChatProviderConfig)
    fixtures: Path | None = None
    library: Path | None = None
    thresholds: GeomThresholds = DEFAULT_THRESHOLDS
    seed: int = 0
    jobs: int = 1

    def __post_init__(self):
        if self.mode not in MODES:
            raise UsageError(f"provider mode must be one of {', '.join(MODES)}, got {self.mode!r}")
        for what, path in (("fixtures", self.fixtures), ("library", self.library)):
            if path is not None and not Path(path).exists() and not (what == "fixtures" and self.mode == "record"):
                raise UsageError(f"{what} path does not exist: {path}")


def load_config(path: str | Path | None) -> CliConfig:
    """INI file with [provider], [paths], [geometry] and [run] sections.

    Credentials are never read from the file; ``api_key_env`` names the
    environment variable holding the key.
    """
    if path is None:
        return CliConfig()
    path = Path(path)
    if not path.is_file():
        raise UsageError(f"config file not found: {path}")
    cp = configparser.ConfigParser()
    try:
        cp.read(path)
        prov = cp["provider"] if cp.has_section("provider") else {}
        if "api_key" in prov:
            raise UsageError("config must not contain api_key; set api_key_env to an environment variable name")
        provider = ChatProviderConfig(
            endpoint=prov.get("endpoint", ChatProviderConfig.endpoint),
            model=prov.get("model", ChatProviderConfig.model),
            temperature=float(prov.get("temperature", 0.0)),
            api_key_env=prov.get("api_key_env", ChatProviderConfig.api_key_env),
        )
        paths = cp["paths"] if cp.has_section("paths") else {}
        geo = cp["geometry"] if cp.has_section("geometry") else {}
        run = cp["run"] if cp.has_section("run") else {}
        base = path.parent

        def rel(p):
            return (base / p) if p else None

        return CliConfig(
            mode=prov.get("mode", "replay"),
            provider=provider,
            fixtures=rel(paths.get("fixtures")),
            library=rel(paths.get("library")),
            thresholds=GeomThresholds(float(geo.get("contact_eps", DEFAULT_THRESHOLDS.contact_eps)),
                                      float(geo.get("support_overlap_min", DEFAULT_THRESHOLDS.support_overlap_min))),
            seed=int(run.get("seed", 0)),
            jobs=int(run.get("jobs", 1)),
        )
    except (configparser.Error, ValueError) as exc:
        raise UsageError(f"bad config {path}: {exc}") from exc


def make_provider(cfg: CliConfig):
    if cfg.mode == "replay":
        return ReplayProvider.from_path(cfg.fixtures or bundled_fixtures())
    live = ChatCompletionsProvider(cfg.provider)
    if cfg.mode == "record":
        target = Path(cfg.fixtures or "fixtures")
        if target.suffix != ".json":
            target = target / "recorded.json"
        return RecordingProvider(live, target)
    return live


def _need_file(path: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"file not found: {p}")
    return p


def _scene(path: str):
    try:
        return load_scene(_need_file(path))
    except (ValueError, KeyError, TypeError) as exc:
        raise UsageError(f"cannot read scene {path}: {exc}") from exc


def _emit(args, payload: dict, text: str) -> None:
    if args.json:
        print(json.dumps(payload, indent=2, ensure_ascii=False))
    else:
        print(text)


def _write_problems(out: Path, problems) -> list[str]:
    out.mkdir(parents=True, exist_ok=True)
    names = []
    for p in problems:
        f = out / f"{p.name}.pddl"
        f.write_text(print_problem(p))
        names.append(str(f))
    return names


# -- commands ----------------------------------------------------------------------------------

def cmd_plan(args, cfg: CliConfig) -> int:
    scene = _scene(args.scene)
    lib = ExemplarLibrary.load(cfg.library)
    provider = make_provider(cfg)
    try:
        res = run_olp_pipeline(args.task, scene.ids, lib, provider)
    except PipelineError as exc:
        if isinstance(exc.cause, GroundingError):
            raise Unsolved(str(exc)) from exc
        raise
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "olp.json").write_text(serialize_olp(res.plan) + "\n")
    (out / "binding.json").write_text(json.dumps(res.binding.to_dict(), indent=2) + "\n")
    domain = builtin_blockworld_domain()
    (out / "domain.pddl").write_text(print_domain(domain))
    problems: list = []
    try:
        plan, stats = plan_olp(res.plan, res.binding, scene, domain, cfg.thresholds, problems=problems)
    except SubgoalUnsolvable as exc:
        _write_problems(out / "problems", problems)
        raise Unsolved(f"{exc} (step {res.plan.units[exc.unit].step})") from exc
    files = _write_problems(out / "problems", problems)
    (out / "plan.txt").write_text(format_plan(plan))
    payload = {"plan": [str(a) for a in plan.actions], "length": plan.cost, "binding": res.binding.to_dict(),
               "tokens": {"prompt": res.tokens.prompt_tokens, "completion": res.tokens.completion_tokens,
                          "total": res.tokens.total},
               "problems": files, "expanded": stats.expanded, "out": str(out)}
    _emit(args, payload, format_plan(plan) + f"; {plan.cost} actions, {res.tokens.total} tokens, written to {out}")
    return EXIT_OK


def cmd_exec(args, cfg: CliConfig) -> int:
    scene = _scene(args.scene)
    try:
        actions = parse_plan(_need_file(args.plan).read_text())
    except ValueError as exc:
        raise UsageError(f"cannot parse plan {args.plan}: {exc}") from exc
    spec = None
    if args.task_spec:
        try:
            spec = TaskSpec.from_dict(json.loads(args.task_spec))
        except (ValueError, KeyError) as exc:
            raise UsageError(f"bad --task-spec: {exc}") from exc
    trace = execute_plan(scene, actions, spec, cfg.thresholds, seed=cfg.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "trace.jsonl").write_text(trace.to_jsonl())
    fail = trace.failure
    payload = {"completed": trace.completed, "succeeded": trace.succeeded, "steps": len(trace.steps),
               "failure": None if fail is None else {"action": str(fail.action), "reason": fail.reason}}
    succ = "n/a" if trace.succeeded is None else str(trace.succeeded).lower()
    text = f"completed: {str(trace.completed).lower()}  succeeded: {succ}"
    if fail is not None:
        text += f"\nfailed at step {len(trace.steps)} {fail.action}: {fail.reason}"
    _emit(args, payload, text)
    return EXIT_OK if trace.completed else EXIT_FAIL


def cmd_bench(args, cfg: CliConfig) -> int:
    try:
        configs = bench.load_matrix_config(_need_file(args.matrix))
    except (ValueError, KeyError, json.JSONDecodeError) as exc:
        raise UsageError(f"bad matrix config {args.matrix}: {exc}") from exc
    if args.seed is not None:
        configs = [replace(c, seed=args.seed) for c in configs]
    lib = ExemplarLibrary.load(cfg.library)
    results = bench.run_matrix(configs, make_provider(cfg), lib, jobs=cfg.jobs, thr=cfg.thresholds)
    rows = [r.row for r in results]
    report = bench.emit_report(rows, args.format)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ext = {"csv": "csv", "markdown": "md", "json": "json"}[args.format]
    (out / f"report.{ext}").write_text(report)
    bench.write_records(results, out / "trials.jsonl")
    if args.json:
        print(bench.emit_report(rows, "json"))
    else:
        print(report, end="")
    return EXIT_OK


def cmd_foon2pddl(args, cfg: CliConfig) -> int:
    scene = _scene(args.scene)
    try:
        plan = parse_olp_json(_need_file(args.olp).read_text())
    except FoonError as exc:
        raise UsageError(f"cannot read plan {args.olp}: {exc}") from exc
    try:
        if args.binding:
            binding = AliasBinding(json.loads(_need_file(args.binding).read_text()))
            for alias in plan_aliases(plan):
                binding[alias]
        else:
            binding = greedy_binding(plan_aliases(plan), scene.ids)
    except (UnboundAlias, UnresolvableAlias) as exc:
        raise Unsolved(str(exc)) from exc
    problems: list = []
    error = None
    try:
        plan_olp(plan, binding, scene, builtin_blockworld_domain(), cfg.thresholds, problems=problems)
    except SubgoalUnsolvable as exc:
        error = exc
    files = _write_problems(Path(args.out), problems)
    _emit(args, {"problems": files, "binding": binding.to_dict()}, "\n".join(files))
    if error is not None:
        raise Unsolved(str(error))
    return EXIT_OK


# -- argument parsing ----------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI config file")
    common.add_argument("--provider", choices=MODES, help="chat provider mode (default: replay)")
    common.add_argument("--fixtures", help="fixture file or directory for replay/record")
    common.add_argument("--library", help="exemplar library JSON")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument("--jobs", type=int, default=None, help="parallel bench trials")
    common.add_argument("--json", action="store_true", help="print machine-readable output")
    common.add_argument("-v", "--verbose", action="store_true")

    ap = argparse.ArgumentParser(prog="olplan", description="Object-level planning toolkit")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", parents=[common], help="task text + scene -> object-level plan, PDDL problems, plan")
    p.add_argument("task")
    p.add_argument("scene")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("exec", parents=[common], help="execute a plan file in the kinematic simulator")
    p.add_argument("scene")
    p.add_argument("plan")
    p.add_argument("--task-spec", help='task for the success check, e.g. \'{"kind": "tower", "n": 3}\'')
    p.set_defaults(func=cmd_exec)

    p = sub.add_parser("bench", parents=[common], help="run an approach x task matrix and report metrics")
    p.add_argument("matrix", help="matrix config JSON")
    p.add_argument("--format", choices=("csv", "markdown", "json"), default="csv")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("foon2pddl", parents=[common], help="object-level plan + scene -> one PDDL problem per unit")
    p.add_argument("olp")
    p.add_argument("scene")
    p.add_argument("--binding", help="JSON alias -> instance map (default: name matching)")
    p.set_defaults(func=cmd_foon2pddl)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    warnings.simplefilter("ignore" if not args.verbose else "default", PreconditionMismatch)
    try:
        cfg = load_config(args.config)
        if args.provider:
            cfg.mode = args.provider
        if args.fixtures:
            cfg.fixtures = Path(args.fixtures)
        if args.library:
            cfg.library = Path(args.library)
        if args.jobs:
            cfg.jobs = args.jobs
        if args.seed is not None:
            cfg.seed = args.seed
        cfg.__post_init__()
        return args.func(args, cfg)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Unsolved as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNSOLVED
    except (PipelineError, ProviderError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
