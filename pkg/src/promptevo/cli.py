"""Command line entry point: init, run, resume, eval and report."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import statistics
import sys
from collections.abc import Sequence
from pathlib import Path

from . import config as config_mod
from .catalog import Catalog
from .config import Config
from .errors import ConfigError, PromptEvoError
from .evolution import EvolutionRun, RunResult, seed_streams, write_json_atomic
from .gateway import ROLES, TARGET, Gateway, OpenAICompatibleBackend, UsageLedger
from .genome import Genome, PromptTemplate, Registry
from .harness import Evaluator, PromptFile, Split, TaskAdapter, load_examples, split_dataset
from .mock import mock_policy
from .pools import generate_pools, load_pools, save_pools

log = logging.getLogger("promptevo")

CONFIG_NAME = "config.yaml"
CHECKPOINT_NAME = "checkpoint.json"
REPORT_NAME = "report.json"
BEST_NAME = "best_prompt.json"
CURVE_NAME = "curve.csv"
SUMMARY_NAME = "summary.json"


# -- builders --------------------------------------------------------------------


def build_registry(cfg: Config) -> Registry:
    return Registry.from_config(cfg.registry)


def build_template(cfg: Config) -> PromptTemplate:
    if cfg.template:
        return PromptTemplate.from_file(cfg.resolve(cfg.template))
    return PromptTemplate.default()


def build_catalog(cfg: Config) -> Catalog:
    return Catalog(cfg.resolve(cfg.catalog_dir) if cfg.catalog_dir else None)


def build_adapter(cfg: Config) -> TaskAdapter:
    t = cfg.task
    try:
        return TaskAdapter(kind=t.kind, labels=tuple(t.labels), metric=t.metric,
                           answer_tag=t.answer_tag, positive_label=t.positive_label)
    except ValueError as exc:
        raise ConfigError(f"invalid task section: {exc}") from exc


def build_gateway(cfg: Config, mock: bool, seed: int, sleep=None) -> Gateway:
    llm = cfg.llm
    backends = {}
    for role in ROLES:
        if mock:
            script = llm.mock.get(role, "builtin")
            if script == "builtin":
                script = {"responder": role, "fallback": "error"}
            else:
                script = cfg.resolve(script)
            backends[role] = mock_policy(seed, script)
        else:
            ep = getattr(llm, role)
            if role == TARGET and not ep.base_url:
                ep = llm.optimizer
            if not ep.base_url or not ep.model:
                raise ConfigError(f"llm.{role} needs base_url and model (or use --mock)")
            backends[role] = OpenAICompatibleBackend(ep.base_url, ep.model,
                                                     api_key_env=ep.api_key_env,
                                                     timeout=ep.timeout)
    ledger = UsageLedger(prices={r: tuple(p) for r, p in llm.prices.items()})
    kwargs = {} if sleep is None else {"sleep": sleep}
    return Gateway(backends, retries=llm.retries, backoff_base=llm.backoff_base,
                   max_in_flight=llm.max_in_flight, reasoning_tag=llm.reasoning_tag,
                   ledger=ledger, **kwargs)


def build_split(cfg: Config) -> Split:
    ev = cfg.eval
    if ev.dev and ev.test:
        return Split(tuple(load_examples(cfg.resolve(ev.dev), ev.columns)),
                     tuple(load_examples(cfg.resolve(ev.test), ev.columns)), None)
    if ev.dataset:
        examples = load_examples(cfg.resolve(ev.dataset), ev.columns)
        return split_dataset(examples, ev.test_size, ev.split_seed)
    raise ConfigError("eval.dataset or both eval.dev and eval.test must be set")


def load_test_split(cfg: Config):
    """Only the held-out examples; a dev file is never opened."""
    ev = cfg.eval
    if ev.test:
        return tuple(load_examples(cfg.resolve(ev.test), ev.columns))
    if ev.dataset:
        examples = load_examples(cfg.resolve(ev.dataset), ev.columns)
        return split_dataset(examples, ev.test_size, ev.split_seed).test
    raise ConfigError("eval.test or eval.dataset must be set")


def _evaluator(cfg: Config, examples, gateway: Gateway, template: PromptTemplate,
               subsample: int | None, rng=None) -> Evaluator:
    return Evaluator(examples, build_adapter(cfg), gateway, template, subsample, rng,
                     temperature=cfg.llm.target_temperature,
                     max_output_tokens=cfg.llm.target_max_tokens)


# -- outputs -----------------------------------------------------------------------


def write_curve(path: Path, report: dict) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", "best", "mean"])
        if report.get("initial"):
            w.writerow([-1, report["initial"]["best"], report["initial"]["mean"]])
        for e in report["epochs"]:
            w.writerow([e["epoch"], e["best"], e["mean"]])


def _finish_seed(cfg: Config, run_dir: Path, run: EvolutionRun, result: RunResult,
                 registry: Registry, template: PromptTemplate) -> dict:
    best = result.best
    test_score = None
    try:
        test = load_test_split(cfg)
    except ConfigError:
        test = None
    if test:
        ev = _evaluator(cfg, test, run.gateway, template, None)
        test_score = ev.score_rendered(best.rendered, best.genome)
    report = dict(result.report)
    report["test_score"] = test_score
    report["usage"] = run.gateway.ledger.totals()
    write_json_atomic(run_dir / REPORT_NAME, report)
    prompt = PromptFile(best.rendered, best.genome.to_dict(), best.score, run.seed,
                        registry.to_config())
    write_json_atomic(run_dir / BEST_NAME, {**prompt.to_dict(), "test_score": test_score})
    write_curve(run_dir / CURVE_NAME, report)
    return {"seed": run.seed, "dev_score": best.score, "test_score": test_score,
            "label": report["label"]}


def write_summary(out: Path, rows: list[dict], label: str) -> dict:
    summary: dict = {"label": label, "runs": rows}
    for key in ("dev_score", "test_score"):
        vals = [r[key] for r in rows if r[key] is not None]
        if vals:
            summary[f"{key}_mean"] = statistics.fmean(vals)
            if len(vals) > 1:
                summary[f"{key}_std"] = statistics.stdev(vals)
    write_json_atomic(out / SUMMARY_NAME, summary)
    return summary


# -- commands ----------------------------------------------------------------------


def _load_config(args) -> Config:
    cfg = config_mod.load(args.config, args.set or ())
    if getattr(args, "values_per_type", None):
        cfg.init.values_per_type = args.values_per_type
    if getattr(args, "seed", None):
        cfg.seeds = list(args.seed)
    return cfg


def _pools_path(cfg: Config, out: Path | None) -> Path:
    """Relative pool paths live in ``--out`` when given, else next to the config."""
    p = Path(cfg.init.pools_path)
    if not p.is_absolute() and out is not None:
        return out / p
    return cfg.resolve(cfg.init.pools_path)


def cmd_init(args) -> int:
    cfg = _load_config(args)
    if not cfg.task.description:
        raise ConfigError("task.description is required to generate pools")
    path = _pools_path(cfg, Path(args.out) if args.out else None)
    registry = build_registry(cfg)
    existing = None
    if path.exists():
        existing = json.loads(path.read_text(encoding="utf-8")).get("pools")
    gw = build_gateway(cfg, args.mock, cfg.seeds[0])

    def keep(partial):
        save_pools(path, partial, registry, cfg.init.values_per_type)

    pools = generate_pools(
        registry, cfg.task.description, gw, cfg.init.values_per_type, cfg.init.null_option,
        cfg.init.attempts, build_catalog(cfg), temperature=cfg.evolution.temperature,
        max_output_tokens=cfg.evolution.max_output_tokens, existing=existing, on_type_done=keep,
    )
    keep(pools)
    print(f"wrote {path} ({len(pools)} types x {cfg.init.values_per_type} values)")
    return 0


def _run_seed(cfg: Config, seed: int, run_dir: Path, mock: bool, pools_path: Path,
              resume: bool) -> dict:
    registry = build_registry(cfg)
    template = build_template(cfg)
    split = build_split(cfg)
    gw = build_gateway(cfg, mock, seed)
    _, eval_rng = seed_streams(seed)
    evaluator = _evaluator(cfg, split.dev, gw, template, cfg.eval.subsample_size, eval_rng)
    ckpt = run_dir / CHECKPOINT_NAME
    if resume and ckpt.exists():
        run = EvolutionRun.from_checkpoint(ckpt, gateway=gw, eval_fn=evaluator,
                                           catalog=build_catalog(cfg))
    else:
        run = EvolutionRun(
            registry=registry, template=template, pools=load_pools(pools_path, registry),
            gateway=gw, eval_fn=evaluator, task_description=cfg.task.description,
            config=cfg.evolution, seed=seed, catalog=build_catalog(cfg), checkpoint_path=ckpt,
        )
    result = run.run()
    return _finish_seed(cfg, run_dir, run, result, registry, template)


def _run_all(cfg: Config, out: Path, mock: bool, resume: bool) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    pools_path = _pools_path(cfg, out)
    if not pools_path.exists():
        raise ConfigError(f"pools file {pools_path} not found; run `promptevo init` first")
    cfg = cfg.absolutized()
    cfg.init.pools_path = str(pools_path.resolve())
    if not resume:
        cfg.dump(out / CONFIG_NAME)
    rows = []
    for seed in cfg.seeds:
        run_dir = out / f"seed_{seed}"
        run_dir.mkdir(exist_ok=True)
        print(f"seed {seed}: running", file=sys.stderr)
        rows.append(_run_seed(cfg, seed, run_dir, mock, pools_path, resume))
    summary = write_summary(out, rows, cfg.evolution.label)
    print(json.dumps(summary, indent=1))
    return summary


def cmd_run(args) -> int:
    cfg = _load_config(args)
    _run_all(cfg, Path(args.out or "runs"), args.mock, resume=False)
    return 0


def cmd_resume(args) -> int:
    out = Path(args.out or "runs")
    cfg_path = Path(args.config) if args.config else out / CONFIG_NAME
    cfg = config_mod.load(cfg_path, args.set or ())
    _run_all(cfg, out, args.mock, resume=True)
    return 0


def cmd_eval(args) -> int:
    cfg = _load_config(args)
    prompt = PromptFile.load(args.prompt)
    template = build_template(cfg)
    test = load_test_split(cfg)
    gw = build_gateway(cfg, args.mock, cfg.seeds[0])
    ev = _evaluator(cfg, test, gw, template, None)
    genome = None
    if prompt.genome:
        registry = Registry.from_config(prompt.registry) if prompt.registry else build_registry(cfg)
        genome = Genome(prompt.genome, registry)
    score = ev.score_rendered(prompt.text, genome)
    result = {"score": score, "metric": ev.adapter.metric, "examples": len(test),
              "calls": gw.ledger.totals()[TARGET]["calls"]}
    if args.out:
        write_json_atomic(Path(args.out) / "eval.json", result)
    print(json.dumps(result, indent=1))
    return 0


def _collect_runs(dirs: Sequence[Path]) -> list[tuple[Path, dict]]:
    found = []
    for d in dirs:
        for p in sorted(d.rglob(REPORT_NAME)):
            found.append((p.parent, json.loads(p.read_text(encoding="utf-8"))))
    return found


def build_report(dirs: Sequence[Path]) -> dict:
    runs = _collect_runs(dirs)
    if not runs:
        raise ConfigError(f"no {REPORT_NAME} found under {[str(d) for d in dirs]}")
    curves, costs, by_label = [], {}, {}
    for path, rep in runs:
        for e in rep["epochs"]:
            curves.append({"run": str(path), "label": rep["label"], "seed": rep["seed"],
                           "epoch": e["epoch"], "best": e["best"], "mean": e["mean"]})
        for role, u in (rep.get("usage") or {}).items():
            acc = costs.setdefault(role, {"calls": 0, "prompt_tokens": 0,
                                          "completion_tokens": 0, "total_tokens": 0,
                                          "cost_usd": 0.0})
            for k in acc:
                acc[k] += u.get(k, 0)
        best = rep["best"]["score"] if rep.get("best") else None
        by_label.setdefault(rep["label"], []).append((best, rep.get("test_score")))
    ablation = {}
    for label, vals in by_label.items():
        dev = [v[0] for v in vals if v[0] is not None]
        test = [v[1] for v in vals if v[1] is not None]
        ablation[label] = {
            "runs": len(vals),
            "dev_mean": statistics.fmean(dev) if dev else None,
            "dev_std": statistics.stdev(dev) if len(dev) > 1 else None,
            "test_mean": statistics.fmean(test) if test else None,
            "test_std": statistics.stdev(test) if len(test) > 1 else None,
        }
    return {"curve": curves, "cost": costs, "ablation": ablation}


def _fmt(v) -> str:
    if v is None:
        return "-"
    return f"{v:.4f}" if isinstance(v, float) else str(v)


def format_report(rep: dict) -> str:
    lines = ["Token usage and cost per role",
             f"{'role':<10} {'calls':>8} {'prompt':>10} {'completion':>11} {'total':>10} {'usd':>10}"]
    for role, u in rep["cost"].items():
        lines.append(f"{role:<10} {u['calls']:>8} {u['prompt_tokens']:>10} "
                     f"{u['completion_tokens']:>11} {u['total_tokens']:>10} {u['cost_usd']:>10.4f}")
    lines += ["", "Scores by configuration",
              f"{'label':<22} {'runs':>5} {'dev mean':>9} {'dev std':>8} {'test mean':>10} {'test std':>9}"]
    for label, a in rep["ablation"].items():
        lines.append(f"{label:<22} {a['runs']:>5} {_fmt(a['dev_mean']):>9} {_fmt(a['dev_std']):>8} "
                     f"{_fmt(a['test_mean']):>10} {_fmt(a['test_std']):>9}")
    return "\n".join(lines)


def cmd_report(args) -> int:
    dirs = [Path(d) for d in args.run_dirs]
    rep = build_report(dirs)
    out = Path(args.out) if args.out else dirs[0]
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "report_curve.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=["run", "label", "seed", "epoch", "best", "mean"])
        w.writeheader()
        w.writerows(rep["curve"])
    write_json_atomic(out / "report_summary.json", {"cost": rep["cost"], "ablation": rep["ablation"]})
    print(format_report(rep))
    return 0


# -- argument parsing -----------------------------------------------------------------


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="promptevo",
                                     description="Memory-guided evolutionary prompt optimisation.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seeds=True):
        p.add_argument("--config", help="YAML or JSON config file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a config key by dotted path (repeatable)")
        p.add_argument("--mock", action="store_true", help="use the offline mock backends")
        p.add_argument("--out", help="output directory")
        if seeds:
            p.add_argument("--seed", type=int, action="append",
                           help="run seed (repeatable; default from config)")

    p = sub.add_parser("init", help="generate candidate value pools")
    common(p)
    p.add_argument("--values-per-type", type=int, help="values to generate per component type")
    p.set_defaults(func=cmd_init)

    p = sub.add_parser("run", help="optimise a prompt once per seed")
    common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("resume", help="continue interrupted runs from their checkpoints")
    common(p, seeds=False)
    p.set_defaults(func=cmd_resume)

    p = sub.add_parser("eval", help="score a prompt file on the held-out test split")
    common(p)
    p.add_argument("--prompt", required=True, help="best-prompt JSON file")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("report", help="curves, cost tables and ablation comparison")
    p.add_argument("run_dirs", nargs="+", help="run output directories")
    p.add_argument("--out", help="where to write report files (default: first run dir)")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except PromptEvoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
