"""Evaluation harness: per-script metrics, aggregation, and statistics.

One record is produced per seed x arm x scenario by running the full
pipeline (retrieve, prompt, generate, parse, execute). Binary metrics
aggregate to per-run percentages first, then to mean +/- sample std
across runs; pairwise arm comparisons use Welch's unequal-variance
t-test with pooled-std Cohen's d. The t CDF is evaluated through a
regularized incomplete-beta continued fraction rather than table
lookups, so p-values are testable against an independent oracle.
"""
from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .errors import GroundctlError, ProviderError, ScriptSyntaxError
from .executor import (
    FixtureBundle,
    StepOutcome,
    execute,
    resolution_stats,
)
from .gen import GeneratorKind, generate, parse_script
from .rag import RetrievalConfig, construct_prompt, retrieve_context
from .store import VectorStore

METRICS = ("syntax_validity", "element_resolution", "execution_success")

DEFAULT_SEEDS = (42, 123, 456)

ARM_LABELS = {
    GeneratorKind.MOCK_GROUNDED: "Full",
    GeneratorKind.MOCK_TEXT_ONLY: "Text-Only",
    GeneratorKind.MOCK_HTML_ONLY: "HTML-Only",
    GeneratorKind.MOCK_UNGROUNDED: "Ungrounded",
    GeneratorKind.REMOTE_LLM: "Remote LLM",
}

# CLI-facing arm aliases.
ARM_ALIASES = {
    "grounded": GeneratorKind.MOCK_GROUNDED,
    "ungrounded": GeneratorKind.MOCK_UNGROUNDED,
    "text-only": GeneratorKind.MOCK_TEXT_ONLY,
    "html-only": GeneratorKind.MOCK_HTML_ONLY,
    "remote": GeneratorKind.REMOTE_LLM,
}


class FailureMode(str, Enum):
    SYNTAX = "syntax"
    HALLUCINATION = "hallucination"  # a locator resolved to nothing
    AMBIGUOUS = "ambiguous"
    TIMEOUT = "timeout"
    LOGIC = "logic"  # state mismatch or unmet goal


_OUTCOME_TO_FAILURE = {
    StepOutcome.NOT_FOUND: FailureMode.HALLUCINATION,
    StepOutcome.AMBIGUOUS: FailureMode.AMBIGUOUS,
    StepOutcome.TIMEOUT: FailureMode.TIMEOUT,
    StepOutcome.STATE_MISMATCH: FailureMode.LOGIC,
}


@dataclass(frozen=True)
class EvalRecord:
    scenario_id: int
    arm: GeneratorKind
    seed: int
    syntax_valid: bool
    resolved: int
    total: int
    resolution_rate: float | None
    execution_success: bool
    failure_mode: FailureMode | None
    script_text: str

    def to_json(self) -> dict:
        return {
            "scenario_id": self.scenario_id,
            "arm": self.arm.value,
            "seed": self.seed,
            "syntax_valid": self.syntax_valid,
            "resolved": self.resolved,
            "total": self.total,
            "resolution_rate": self.resolution_rate,
            "execution_success": self.execution_success,
            "failure_mode": self.failure_mode.value if self.failure_mode else None,
            "script": self.script_text,
        }


@dataclass
class SuiteResult:
    records: list[EvalRecord] = field(default_factory=list)
    incomplete: list[str] = field(default_factory=list)  # arm-level provider failures
    elapsed_s: float = 0.0


def run_suite(
    arms: list[GeneratorKind],
    seeds: list[int],
    bundle: FixtureBundle,
    store: VectorStore,
    embedder,
    cfg: RetrievalConfig | None = None,
) -> SuiteResult:
    """Evaluate every seed x arm x scenario through the full pipeline.

    Mock arms are deterministic; the seed is still recorded with every
    record so stochastic arms slot in without a schema change. Provider
    failures abort only their own arm and are reported, never silent.
    """
    cfg = cfg or RetrievalConfig()
    result = SuiteResult()
    started = time.monotonic()
    for seed in seeds:
        for arm in arms:
            try:
                for scenario in bundle.manifest.scenarios:
                    result.records.append(
                        _evaluate_one(scenario, arm, seed, bundle, store, embedder, cfg)
                    )
            except ProviderError as exc:
                result.incomplete.append(
                    f"arm {arm.value} seed {seed} aborted: {exc}"
                )
    result.elapsed_s = time.monotonic() - started
    return result


def _evaluate_one(
    scenario, arm, seed, bundle, store, embedder, cfg
) -> EvalRecord:
    ctx = retrieve_context(scenario.query, store, embedder, cfg)
    prompt = construct_prompt(ctx, cfg)
    raw = generate(prompt, arm)
    try:
        script = parse_script(raw, scenario_id=str(scenario.scenario_id))
    except ScriptSyntaxError:
        return EvalRecord(
            scenario_id=scenario.scenario_id,
            arm=arm,
            seed=seed,
            syntax_valid=False,
            resolved=0,
            total=0,
            resolution_rate=None,
            execution_success=False,
            failure_mode=FailureMode.SYNTAX,
            script_text=raw,
        )
    stats = resolution_stats(script, bundle.index, bundle.manifest)
    trace = execute(script, bundle.manifest, bundle.index, goals=scenario.goals)
    failure_mode = None
    if not trace.execution_success:
        failing = trace.failure
        if failing is not None:
            failure_mode = _OUTCOME_TO_FAILURE[failing.outcome]
        else:
            failure_mode = FailureMode.LOGIC  # all steps passed, goal unmet
    return EvalRecord(
        scenario_id=scenario.scenario_id,
        arm=arm,
        seed=seed,
        syntax_valid=True,
        resolved=stats.resolved,
        total=stats.total,
        resolution_rate=stats.rate,
        execution_success=trace.execution_success,
        failure_mode=failure_mode,
        script_text=raw,
    )


# ---------------------------------------------------------------------------
# Aggregation


@dataclass(frozen=True)
class RunMetrics:
    """Per-run (one seed, one arm) percentages in [0, 100]."""

    arm: GeneratorKind
    seed: int
    syntax_validity: float
    element_resolution: float
    execution_success: float

    def metric(self, name: str) -> float:
        return getattr(self, name)


def run_metrics(records: list[EvalRecord]) -> list[RunMetrics]:
    """Collapse records into per-(arm, seed) run percentages.

    Element resolution averages per-scenario M/N rates, skipping scripts
    with no interaction steps (N = 0 is not applicable, not zero).
    """
    groups: dict[tuple[GeneratorKind, int], list[EvalRecord]] = {}
    for rec in records:
        groups.setdefault((rec.arm, rec.seed), []).append(rec)
    out = []
    for (arm, seed), recs in sorted(groups.items(), key=lambda kv: (kv[0][0].value, kv[0][1])):
        rates = [r.resolution_rate for r in recs if r.resolution_rate is not None]
        out.append(
            RunMetrics(
                arm=arm,
                seed=seed,
                syntax_validity=100.0 * sum(r.syntax_valid for r in recs) / len(recs),
                element_resolution=100.0 * sum(rates) / len(rates) if rates else 0.0,
                execution_success=100.0
                * sum(r.execution_success for r in recs)
                / len(recs),
            )
        )
    return out


def _mean(xs: list[float]) -> float:
    return sum(xs) / len(xs)


def _sample_var(xs: list[float]) -> float:
    m = _mean(xs)
    return sum((x - m) ** 2 for x in xs) / (len(xs) - 1)


@dataclass(frozen=True)
class ArmMetric:
    mean: float
    std: float | None  # absent when n < 2
    n: int
    ci95: tuple[float, float] | None  # mean confidence interval, n >= 2


@dataclass(frozen=True)
class PairwiseStats:
    arm_a: GeneratorKind
    arm_b: GeneratorKind
    metric: str
    t: float
    p: float
    cohen_d: float


@dataclass
class MetricsSummary:
    arms: list[GeneratorKind]
    per_arm: dict[tuple[GeneratorKind, str], ArmMetric]
    pairwise: list[PairwiseStats]
    failure_modes: dict[GeneratorKind, dict[str, int]]
    n_records: int


def welch_t_test(a: list[float], b: list[float]) -> tuple[float, float]:
    """Welch's unequal-variance t statistic and two-sided p-value.

    Degenerate inputs are pinned: equal constant samples give (0, 1);
    unequal constant samples give (+/-inf, 0).
    """
    n1, n2 = len(a), len(b)
    if n1 < 2 or n2 < 2:
        raise ValueError("welch_t_test needs at least two samples per group")
    m1, m2 = _mean(a), _mean(b)
    v1, v2 = _sample_var(a), _sample_var(b)
    se2 = v1 / n1 + v2 / n2
    if se2 == 0.0:
        if m1 == m2:
            return 0.0, 1.0
        return math.copysign(math.inf, m1 - m2), 0.0
    t = (m1 - m2) / math.sqrt(se2)
    df = se2 ** 2 / (
        (v1 / n1) ** 2 / (n1 - 1) + (v2 / n2) ** 2 / (n2 - 1)
    )
    p = 2.0 * student_t_sf(abs(t), df)
    return t, min(p, 1.0)


def cohen_d(a: list[float], b: list[float]) -> float:
    """Pooled-standard-deviation effect size; sign follows mean(a)-mean(b)."""
    n1, n2 = len(a), len(b)
    v1, v2 = _sample_var(a), _sample_var(b)
    pooled = ((n1 - 1) * v1 + (n2 - 1) * v2) / (n1 + n2 - 2)
    diff = _mean(a) - _mean(b)
    if pooled == 0.0:
        if diff == 0.0:
            return 0.0
        return math.copysign(math.inf, diff)
    return diff / math.sqrt(pooled)


def student_t_sf(t: float, df: float) -> float:
    """P(T > t) for Student's t with df degrees of freedom, t >= 0."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    if math.isinf(t):
        return 0.0
    x = df / (df + t * t)
    return 0.5 * regularized_incomplete_beta(df / 2.0, 0.5, x)


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b) via the continued-fraction expansion (abs error < 1e-12)."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_cf(a, b, x) / a
    return 1.0 - front * _beta_cf(b, a, 1.0 - x) / b


def _beta_cf(a: float, b: float, x: float) -> float:
    max_iter, eps, tiny = 300, 3e-16, 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    raise ArithmeticError("incomplete beta continued fraction did not converge")


def student_t_quantile(prob: float, df: float) -> float:
    """Smallest t with P(T <= t) >= prob, by bisection on the CDF."""
    if not 0.5 <= prob < 1.0:
        raise ValueError("prob must be in [0.5, 1)")
    lo, hi = 0.0, 1.0
    while 1.0 - student_t_sf(hi, df) < prob:
        hi *= 2.0
        if hi > 1e9:
            break
    for _ in range(200):
        mid = (lo + hi) / 2.0
        if 1.0 - student_t_sf(mid, df) < prob:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2.0


def summarize(records: list[EvalRecord]) -> MetricsSummary:
    """Mean/std per arm per metric plus pairwise Welch t, p, and Cohen's d.

    With fewer than two runs for an arm, std is reported as absent and
    pairwise tests involving that arm are skipped.
    """
    runs = run_metrics(records)
    arms = sorted({r.arm for r in runs}, key=lambda a: a.value)
    per_arm: dict[tuple[GeneratorKind, str], ArmMetric] = {}
    samples: dict[tuple[GeneratorKind, str], list[float]] = {}
    for arm in arms:
        arm_runs = [r for r in runs if r.arm == arm]
        for metric in METRICS:
            values = [r.metric(metric) for r in arm_runs]
            samples[(arm, metric)] = values
            if len(values) >= 2:
                std = math.sqrt(_sample_var(values))
                se = std / math.sqrt(len(values))
                tq = student_t_quantile(0.975, len(values) - 1)
                ci = (_mean(values) - tq * se, _mean(values) + tq * se)
            else:
                std, ci = None, None
            per_arm[(arm, metric)] = ArmMetric(
                mean=_mean(values), std=std, n=len(values), ci95=ci
            )
    pairwise: list[PairwiseStats] = []
    for i, arm_a in enumerate(arms):
        for arm_b in arms[i + 1:]:
            for metric in METRICS:
                a = samples[(arm_a, metric)]
                b = samples[(arm_b, metric)]
                if len(a) < 2 or len(b) < 2:
                    continue
                t, p = welch_t_test(a, b)
                pairwise.append(
                    PairwiseStats(
                        arm_a=arm_a, arm_b=arm_b, metric=metric,
                        t=t, p=p, cohen_d=cohen_d(a, b),
                    )
                )
    failure_modes: dict[GeneratorKind, dict[str, int]] = {}
    for arm in arms:
        counts = {mode.value: 0 for mode in FailureMode}
        for rec in records:
            if rec.arm == arm and rec.failure_mode is not None:
                counts[rec.failure_mode.value] += 1
        failure_modes[arm] = counts
    return MetricsSummary(
        arms=arms,
        per_arm=per_arm,
        pairwise=pairwise,
        failure_modes=failure_modes,
        n_records=len(records),
    )


# ---------------------------------------------------------------------------
# Reporting


_METRIC_TITLES = {
    "syntax_validity": "Syntax Validity (%)",
    "element_resolution": "Element Resolution (%)",
    "execution_success": "Execution Success (%)",
}


def _fmt_cell(metric: ArmMetric) -> str:
    if metric.std is None:
        return f"{metric.mean:.1f}"
    return f"{metric.mean:.1f} ± {metric.std:.1f}"


def summary_to_json(summary: MetricsSummary) -> dict:
    return {
        "arms": [arm.value for arm in summary.arms],
        "labels": {arm.value: ARM_LABELS[arm] for arm in summary.arms},
        "metrics": {
            metric: {
                arm.value: {
                    "mean": summary.per_arm[(arm, metric)].mean,
                    "std": summary.per_arm[(arm, metric)].std,
                    "n": summary.per_arm[(arm, metric)].n,
                    "ci95": summary.per_arm[(arm, metric)].ci95,
                }
                for arm in summary.arms
            }
            for metric in METRICS
        },
        "pairwise": [
            {
                "arm_a": s.arm_a.value,
                "arm_b": s.arm_b.value,
                "metric": s.metric,
                "t": _json_float(s.t),
                "p": _json_float(s.p),
                "cohen_d": _json_float(s.cohen_d),
            }
            for s in summary.pairwise
        ],
        "failure_modes": {
            arm.value: counts for arm, counts in summary.failure_modes.items()
        },
        "n_records": summary.n_records,
    }


def _json_float(x: float) -> float | str:
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if math.isnan(x):
        return "nan"
    return x


def render_markdown(summary: MetricsSummary) -> str:
    """Metric-rows-by-arm-columns table plus pairwise statistics."""
    header = "| Metric | " + " | ".join(ARM_LABELS[a] for a in summary.arms) + " |"
    sep = "|---" * (len(summary.arms) + 1) + "|"
    lines = ["# Evaluation Report", "", header, sep]
    for metric in METRICS:
        cells = " | ".join(
            _fmt_cell(summary.per_arm[(arm, metric)]) for arm in summary.arms
        )
        lines.append(f"| {_METRIC_TITLES[metric]} | {cells} |")
    if summary.pairwise:
        lines += ["", "## Pairwise comparisons", ""]
        lines.append("| Arms | Metric | t | p | Cohen's d |")
        lines.append("|---|---|---|---|---|")
        for s in summary.pairwise:
            pair = f"{ARM_LABELS[s.arm_a]} vs {ARM_LABELS[s.arm_b]}"
            lines.append(
                f"| {pair} | {_METRIC_TITLES[s.metric]} | {s.t:.3g} | {s.p:.3g} "
                f"| {s.cohen_d:.3g} |"
            )
    lines += ["", "## Failure modes", ""]
    modes = [mode.value for mode in FailureMode]
    lines.append("| Arm | " + " | ".join(modes) + " |")
    lines.append("|---" * (len(modes) + 1) + "|")
    for arm in summary.arms:
        counts = summary.failure_modes[arm]
        lines.append(
            f"| {ARM_LABELS[arm]} | " + " | ".join(str(counts[m]) for m in modes) + " |"
        )
    return "\n".join(lines) + "\n"


def render_report(summary: MetricsSummary, out_dir: Path, records: list[EvalRecord] | None = None) -> dict[str, Path]:
    """Write report.md, report.json, and raw_records.jsonl into out_dir."""
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "markdown": out_dir / "report.md",
        "json": out_dir / "report.json",
    }
    paths["markdown"].write_text(render_markdown(summary), encoding="utf-8")
    paths["json"].write_text(
        json.dumps(summary_to_json(summary), indent=2) + "\n", encoding="utf-8"
    )
    if records is not None:
        paths["records"] = out_dir / "raw_records.jsonl"
        with paths["records"].open("w", encoding="utf-8") as fh:
            for rec in records:
                fh.write(json.dumps(rec.to_json()) + "\n")
    return paths


def check_failure_ordering(records: list[EvalRecord]) -> None:
    """Execution success must imply a perfect resolution rate."""
    for rec in records:
        if rec.execution_success and rec.total > 0 and rec.resolution_rate != 1.0:
            raise GroundctlError(
                f"failure-ordering violation: scenario {rec.scenario_id} arm "
                f"{rec.arm.value} succeeded with resolution {rec.resolution_rate}"
            )
