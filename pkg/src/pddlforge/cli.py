"""The operational surface: asset generation, trials, grids, and reports.

A trial is addressed by (domain, pipeline, description class, trial
index); its seed is a stable hash of those coordinates plus the base
seed, so any grid subset reproduces the full grid's trials. Records are
appended to a JSONL file as trials finish, and a rerun skips coordinates
already present.
"""

from __future__ import annotations

import hashlib
import json
import statistics
import sys
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from threading import Lock
from typing import Optional

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

import click

from . import dataset
from .backends import BackendConfig, BackendError, make_backend
from .construction import ConstructionError, build_initial_domain
from .hde import HdeBreakdown, hde_domains, perfect_count
from .landmarks import problem_landmarks, write_landmarks
from .planner import DEFAULT_HORIZON, PlannerConfig, enumerate_plans
from .search import PIPELINES, PipelineConfig, RunResult, render_tree, run_pipeline
from .text import parse_domain, parse_problem, print_domain, print_plan

EVAL_CSV_HEADER = "problem,forward_num,forward_den,backward_num,backward_den,score"


class ConfigError(Exception):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    dataset_root: Path = Path("dataset")
    out_dir: Path = Path("runs")
    domains: tuple[str, ...] = ()
    pipelines: tuple[str, ...] = ("N",)
    backend: BackendConfig = field(default_factory=lambda: BackendConfig(kind="scripted", script_path="-"))
    trials: int = 20
    description_classes: tuple[str, ...] = ("simple", "detailed")
    feedback_problem_count: int = 5
    eval_problem_count: int = 5
    feedback_plans_per_problem: int = 2
    eval_plans_per_problem: int = 100
    base_seed: int = 0
    budget: int = 15
    child_cap: int = 10
    weight: float = 1.0
    syntax_retries: int = 3
    construction_retries: int = 5
    landmark_check_k: int = 2
    workers: int = 1

    def __post_init__(self) -> None:
        for count in (
            self.trials,
            self.feedback_problem_count,
            self.eval_problem_count,
            self.feedback_plans_per_problem,
            self.eval_plans_per_problem,
        ):
            if count < 1:
                raise ConfigError("counts must be positive")
        if not self.pipelines:
            raise ConfigError("at least one pipeline is required")
        for p in self.pipelines:
            if p not in PIPELINES:
                raise ConfigError(f"unknown pipeline {p!r}")
        for c in self.description_classes:
            if c not in ("simple", "detailed"):
                raise ConfigError(f"unknown description class {c!r}")


def load_config(path: Path, **overrides) -> ExperimentConfig:
    data = tomllib.loads(path.read_text(encoding="utf-8"))
    backend_data = data.pop("backend", {})
    known = {f for f in ExperimentConfig.__dataclass_fields__}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    merged = {**data, **{k: v for k, v in overrides.items() if v is not None}}
    for key in ("dataset_root", "out_dir"):
        if key in merged:
            merged[key] = Path(merged[key])
    for key in ("domains", "pipelines", "description_classes"):
        if key in merged:
            merged[key] = tuple(merged[key])
    backend = BackendConfig(**backend_data)
    return ExperimentConfig(backend=backend, **merged)


def trial_seed(base_seed: int, domain: str, pipeline: str, description_class: str, trial: int) -> int:
    """Stable 64-bit coordinate hash; grid subsets reproduce full-grid seeds."""
    key = f"{base_seed}:{domain}:{pipeline}:{description_class}:{trial}"
    return int.from_bytes(hashlib.blake2b(key.encode(), digest_size=8).digest(), "big")


@dataclass
class TrialRecord:
    domain: str
    pipeline: str
    description_class: str
    trial: int
    seed: int
    termination: str
    llm_calls: int
    wall_time: float
    construction_ok: bool
    hde_num: int = 0
    hde_den: int = 1
    entries: list[dict] = field(default_factory=list)

    @property
    def score(self) -> Fraction:
        return Fraction(self.hde_num, self.hde_den)

    @property
    def coordinates(self) -> tuple[str, str, str, int]:
        return (self.domain, self.pipeline, self.description_class, self.trial)

    def to_json(self) -> str:
        return json.dumps(self.__dict__, sort_keys=True)

    @classmethod
    def from_json(cls, line: str) -> "TrialRecord":
        return cls(**json.loads(line))


def _breakdown_entries(breakdown: HdeBreakdown) -> list[dict]:
    return [
        {
            "problem": e.problem_id,
            "forward": [e.forward.numerator, e.forward.denominator],
            "backward": [e.backward.numerator, e.backward.denominator],
            "score": [e.score.numerator, e.score.denominator],
            "reference_plans": e.reference_plan_count,
            "candidate_plans": e.candidate_plan_count,
            "flags": list(e.flags),
        }
        for e in breakdown.per_problem
    ]


def _pipeline_config(config: ExperimentConfig, pipeline: str, seed: int) -> PipelineConfig:
    return PipelineConfig(
        kind=pipeline,
        budget=config.budget,
        child_cap=config.child_cap,
        weight=config.weight,
        planner=PlannerConfig(k=config.landmark_check_k),
        seed=seed,
        syntax_retries=config.syntax_retries,
    )


def _trial_backend(config: ExperimentConfig, domain_dir: Path, seed: int):
    backend_cfg = config.backend
    if backend_cfg.kind == "mutation" and not backend_cfg.source_domain:
        backend_cfg = replace(backend_cfg, source_domain=str(domain_dir / "domain.pddl"))
    backend_cfg = replace(backend_cfg, seed=seed)
    return make_backend(backend_cfg)


def _write_trial_artifacts(trial_dir: Path, result: RunResult) -> None:
    dataset.write_text(trial_dir / "final_domain.pddl", print_domain(result.final_domain))
    dataset.write_text(trial_dir / "tree.txt", render_tree(result.tree))
    for node in result.tree:
        lines = [f"[{m.role}]\n{m.content}" for m in node.history.messages]
        dataset.write_text(trial_dir / "transcripts" / f"{node.id:03d}.txt", "\n\n".join(lines) + "\n")


def run_trial(
    config: ExperimentConfig, domain: str, pipeline: str, description_class: str, trial: int
) -> TrialRecord:
    """Construction, refinement, and evaluation for one grid coordinate.

    Per-trial artifacts (final domain, tree dump, per-node transcripts) are
    written under out_dir; failures yield a record with score 0.
    """
    domain_dir = config.dataset_root / domain
    seed = trial_seed(config.base_seed, domain, pipeline, description_class, trial)
    started = time.monotonic()
    record = TrialRecord(
        domain=domain,
        pipeline=pipeline,
        description_class=description_class,
        trial=trial,
        seed=seed,
        termination="failure",
        llm_calls=0,
        wall_time=0.0,
        construction_ok=False,
    )

    description = dataset.load_description(domain_dir)
    backend = _trial_backend(config, domain_dir, seed)
    try:
        construction = build_initial_domain(
            description, description_class, backend,
            retry_limit=config.construction_retries, domain_name=domain,
        )
    except (ConstructionError, BackendError):
        record.wall_time = time.monotonic() - started
        return record
    record.construction_ok = True

    assets = dataset.load_feedback_assets(domain_dir)
    cfg = _pipeline_config(config, pipeline, seed)
    result = run_pipeline(cfg, construction.domain, construction.transcript, assets, backend)
    record.termination = result.termination
    record.llm_calls = result.llm_calls

    trial_dir = config.out_dir / f"{domain}_{pipeline}_{description_class}_{trial:02d}"
    _write_trial_artifacts(trial_dir, result)

    gt = dataset.load_ground_truth(domain_dir)
    eval_problems, eval_plans = dataset.load_eval_assets(domain_dir)
    breakdown = hde_domains(
        gt, result.final_domain, eval_problems, eval_plans, PlannerConfig(k=config.eval_plans_per_problem)
    )
    record.hde_num = breakdown.aggregate.numerator
    record.hde_den = breakdown.aggregate.denominator
    record.entries = _breakdown_entries(breakdown)
    record.wall_time = time.monotonic() - started
    return record


def _check_plan_pipeline_coverage(config: ExperimentConfig, domain: str) -> None:
    """Plan-feedback pipelines need every feedback-problem predicate described."""
    domain_dir = config.dataset_root / domain
    description = dataset.load_description(domain_dir)
    assets = dataset.load_feedback_assets(domain_dir)
    used = {atom.pred for p in assets.problems for atom in p.init | p.goal}
    missing = sorted(used - set(description.predicates))
    if missing:
        raise ConfigError(
            f"{domain}: plan-feedback pipelines need descriptions for predicates {missing}"
        )


def load_records(path: Path) -> list[TrialRecord]:
    if not path.exists():
        return []
    return [TrialRecord.from_json(line) for line in path.read_text(encoding="utf-8").splitlines() if line]


def run_grid(config: ExperimentConfig) -> list[TrialRecord]:
    """Every (domain, pipeline, class, trial) coordinate, crash-resumable.

    Trials split evenly across description classes. Per-trial errors are
    recorded, never raised; config errors abort before any trial runs.
    """
    if config.backend.kind == "remote":
        import os

        if not config.backend.api_key_env or not os.environ.get(config.backend.api_key_env):
            raise ConfigError("remote backend requires api_key_env naming a set environment variable")
    if not config.domains:
        raise ConfigError("no domains configured")
    if any("V" in p for p in config.pipelines):
        for domain in config.domains:
            _check_plan_pipeline_coverage(config, domain)

    per_class = max(1, config.trials // max(1, len(config.description_classes)))
    coordinates = [
        (domain, pipeline, cls, trial)
        for domain in config.domains
        for pipeline in config.pipelines
        for cls in config.description_classes
        for trial in range(per_class)
    ]
    records_path = config.out_dir / "records.jsonl"
    existing = load_records(records_path)
    done = {r.coordinates for r in existing}
    todo = [c for c in coordinates if c not in done]

    config.out_dir.mkdir(parents=True, exist_ok=True)
    write_lock = Lock()
    results: list[TrialRecord] = list(existing)

    def one(coordinate) -> TrialRecord:
        domain, pipeline, cls, trial = coordinate
        try:
            return run_trial(config, domain, pipeline, cls, trial)
        except Exception:
            return TrialRecord(
                domain=domain, pipeline=pipeline, description_class=cls, trial=trial,
                seed=trial_seed(config.base_seed, domain, pipeline, cls, trial),
                termination="failure", llm_calls=0, wall_time=0.0, construction_ok=False,
            )

    with ThreadPoolExecutor(max_workers=config.workers) as pool:
        futures = [pool.submit(one, c) for c in todo]
        for future in as_completed(futures):
            record = future.result()
            with write_lock:
                with open(records_path, "a", encoding="utf-8") as fh:
                    fh.write(record.to_json() + "\n")
                results.append(record)
    return results


# ---------------------------------------------------------------------------
# Reporting


@dataclass(frozen=True)
class ReportRow:
    domain: str
    pipeline: str
    n: int
    mean_pct: float
    sem_pct: float
    perfect: int


def report_rows(records: list[TrialRecord]) -> list[ReportRow]:
    """Mean HDE% with standard error and perfect counts per (domain,
    pipeline), plus per-pipeline aggregate rows (mean of means, sum of
    perfects)."""
    groups: dict[tuple[str, str], list[TrialRecord]] = {}
    for r in records:
        groups.setdefault((r.domain, r.pipeline), []).append(r)
    rows = []
    for (domain, pipeline), group in sorted(groups.items()):
        pcts = [float(r.score) * 100 for r in group]
        mean = statistics.fmean(pcts)
        sem = statistics.stdev(pcts) / len(pcts) ** 0.5 if len(pcts) > 1 else 0.0
        rows.append(
            ReportRow(
                domain=domain, pipeline=pipeline, n=len(group),
                mean_pct=mean, sem_pct=sem,
                perfect=perfect_count([r.score for r in group]),
            )
        )
    by_pipeline: dict[str, list[ReportRow]] = {}
    for row in rows:
        by_pipeline.setdefault(row.pipeline, []).append(row)
    aggregate = [
        ReportRow(
            domain="aggregate", pipeline=pipeline, n=sum(r.n for r in group),
            mean_pct=statistics.fmean([r.mean_pct for r in group]),
            sem_pct=statistics.fmean([r.sem_pct for r in group]),
            perfect=sum(r.perfect for r in group),
        )
        for pipeline, group in sorted(by_pipeline.items())
    ]
    return rows + aggregate


def report_csv(rows: list[ReportRow]) -> str:
    lines = ["domain,pipeline,n,mean_pct,sem_pct,perfect"]
    for r in rows:
        lines.append(f"{r.domain},{r.pipeline},{r.n},{r.mean_pct:.4f},{r.sem_pct:.4f},{r.perfect}")
    return "\n".join(lines) + "\n"


def report_table(rows: list[ReportRow]) -> str:
    header = f"{'domain':<14} {'pipeline':<8} {'n':>4} {'HDE %':>12} {'perfect':>8}"
    lines = [header, "-" * len(header)]
    for r in rows:
        lines.append(
            f"{r.domain:<14} {r.pipeline:<8} {r.n:>4} {r.mean_pct:>6.1f}±{r.sem_pct:<5.1f} {r.perfect:>8}"
        )
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Click commands


@click.group()
def main() -> None:
    """Synthesize and evaluate typed-STRIPS planning domains."""


@main.command("gen-assets")
@click.argument("domain_dir", type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.option("--feedback-problems", default=5, show_default=True)
@click.option("--eval-problems", default=5, show_default=True)
@click.option("--feedback-plans", default=2, show_default=True)
@click.option("--eval-plans", default=100, show_default=True)
@click.option("--horizon", default=DEFAULT_HORIZON, show_default=True)
def gen_assets_cmd(domain_dir, feedback_problems, eval_problems, feedback_plans, eval_plans, horizon):
    """Generate feedback/eval problems, plans, and landmarks for a domain dir."""
    try:
        dataset.gen_assets(
            domain_dir,
            feedback_problem_count=feedback_problems,
            eval_problem_count=eval_problems,
            feedback_plans_per_problem=feedback_plans,
            eval_plans_per_problem=eval_plans,
            horizon=horizon,
        )
    except dataset.AssetError as e:
        raise click.ClickException(str(e))
    click.echo(f"assets written under {domain_dir}")


@main.command("construct")
@click.option("--config", "config_path", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--domain", required=True)
@click.option("--description-class", "description_class", default="simple", show_default=True)
@click.option("--out", type=click.Path(path_type=Path), default=None)
def construct_cmd(config_path, domain, description_class, out):
    """Run only the initial construction phase and print/write the domain."""
    config = load_config(config_path)
    domain_dir = config.dataset_root / domain
    description = dataset.load_description(domain_dir)
    seed = trial_seed(config.base_seed, domain, "construct", description_class, 0)
    backend = _trial_backend(config, domain_dir, seed)
    try:
        result = build_initial_domain(
            description, description_class, backend,
            retry_limit=config.construction_retries, domain_name=domain,
        )
    except (ConstructionError, BackendError) as e:
        raise click.ClickException(str(e))
    text = print_domain(result.domain)
    if out is not None:
        dataset.write_text(out, text)
        click.echo(f"wrote {out}")
    else:
        click.echo(text, nl=False)


@main.command("run")
@click.option("--config", "config_path", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--pipeline", "pipelines", multiple=True, type=click.Choice(PIPELINES))
@click.option("--domain", "domains", multiple=True)
@click.option("--trials", type=int, default=None)
@click.option("--seed", "base_seed", type=int, default=None)
@click.option("--out", "out_dir", type=click.Path(path_type=Path), default=None)
def run_cmd(config_path, pipelines, domains, trials, base_seed, out_dir):
    """Run the experiment grid (resumable); flags narrow/override the config."""
    overrides = {
        "pipelines": tuple(pipelines) or None,
        "domains": tuple(domains) or None,
        "trials": trials,
        "base_seed": base_seed,
        "out_dir": out_dir,
    }
    try:
        config = load_config(config_path, **overrides)
        records = run_grid(config)
    except ConfigError as e:
        raise click.ClickException(str(e))
    click.echo(f"{len(records)} records in {config.out_dir / 'records.jsonl'}")
    click.echo(report_table(report_rows(records)), nl=False)


@main.command("eval")
@click.option("--gt", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--gen", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--eval-dir", type=click.Path(exists=True, file_okay=False, path_type=Path), required=True)
@click.option("--k", default=100, show_default=True, help="candidate plans per problem")
@click.option("--csv", "csv_path", type=click.Path(path_type=Path), default=None)
def eval_cmd(gt, gen, eval_dir, k, csv_path):
    """Score a generated domain against ground truth over evaluation assets."""
    gt_domain = parse_domain(gt.read_text(encoding="utf-8"))
    gen_domain = parse_domain(gen.read_text(encoding="utf-8"))
    problems, plans = dataset._load_problem_set(eval_dir, "evaluation")
    breakdown = hde_domains(gt_domain, gen_domain, problems, plans, PlannerConfig(k=k))
    lines = [EVAL_CSV_HEADER]
    for e in breakdown.per_problem:
        lines.append(
            f"{e.problem_id},{e.forward.numerator},{e.forward.denominator},"
            f"{e.backward.numerator},{e.backward.denominator},{float(e.score):.6f}"
        )
    csv_text = "\n".join(lines) + "\n"
    if csv_path is not None:
        dataset.write_text(csv_path, csv_text)
    click.echo(f"{'problem':<16} {'forward':>10} {'backward':>10} {'score':>8}  flags")
    for e in breakdown.per_problem:
        flags = ",".join(e.flags)
        click.echo(
            f"{e.problem_id:<16} {str(e.forward):>10} {str(e.backward):>10} {float(e.score):>8.4f}  {flags}"
        )
    click.echo(f"aggregate: {breakdown.aggregate} = {breakdown.aggregate_float:.6f}")


@main.command("plan")
@click.option("--domain", "domain_path", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--problem", "problem_path", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--k", default=1, show_default=True)
@click.option("--max-length", type=int, default=None, help="plan length horizon (default adaptive)")
@click.option("--out-dir", type=click.Path(path_type=Path), default=None)
def plan_cmd(domain_path, problem_path, k, max_length, out_dir):
    """Enumerate up to k shortest valid plans; write .soln files with --out-dir."""
    domain = parse_domain(domain_path.read_text(encoding="utf-8"))
    problem = parse_problem(problem_path.read_text(encoding="utf-8"))
    result = enumerate_plans(domain, problem, PlannerConfig(k=k, max_plan_length=max_length))
    if result.diagnostics:
        raise click.ClickException("; ".join(str(d) for d in result.diagnostics))
    if result.none_found:
        click.echo("no plan found" + (" (search truncated)" if result.truncated else ""))
        sys.exit(1)
    for i, plan in enumerate(result.plans):
        if out_dir is not None:
            dataset.write_text(out_dir / f"{problem.name}-{i:03d}.soln", print_plan(plan) + "\n")
        else:
            click.echo(f"; plan {i} ({len(plan)} steps)")
            click.echo(print_plan(plan))
    if out_dir is not None:
        click.echo(f"wrote {len(result.plans)} plan(s) to {out_dir}")


@main.command("landmarks")
@click.option("--domain", "domain_path", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--problem", "problem_path", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--horizon", default=DEFAULT_HORIZON, show_default=True)
@click.option("--out", type=click.Path(path_type=Path), default=None)
def landmarks_cmd(domain_path, problem_path, horizon, out):
    """Extract disjunctive action landmarks for a problem."""
    domain = parse_domain(domain_path.read_text(encoding="utf-8"))
    problem = parse_problem(problem_path.read_text(encoding="utf-8"))
    text = write_landmarks(problem_landmarks(domain, problem, horizon))
    if out is not None:
        dataset.write_text(out, text)
        click.echo(f"wrote {out}")
    else:
        click.echo(text, nl=False)


@main.command("report")
@click.argument("records_path", type=click.Path(exists=True, path_type=Path))
@click.option("--csv", "csv_path", type=click.Path(path_type=Path), default=None)
def report_cmd(records_path, csv_path):
    """Summarize trial records: mean HDE%, SEM, and perfect counts."""
    rows = report_rows(load_records(records_path))
    if csv_path is not None:
        dataset.write_text(csv_path, report_csv(rows))
    click.echo(report_table(rows), nl=False)


if __name__ == "__main__":
    main()
