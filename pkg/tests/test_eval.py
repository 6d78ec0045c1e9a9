"""Evaluation harness: records, aggregation, statistics, and reports."""
import json
import math

import numpy as np
import pytest
from scipy import stats as sps
from scipy.special import betainc

from groundctl.evaluation import (
    DEFAULT_SEEDS,
    FailureMode,
    check_failure_ordering,
    cohen_d,
    regularized_incomplete_beta,
    render_markdown,
    render_report,
    run_metrics,
    run_suite,
    student_t_quantile,
    student_t_sf,
    summarize,
    summary_to_json,
    welch_t_test,
)
from groundctl.gen import GeneratorKind

from helpers import welch_oracle

ABLATION_ARMS = [
    GeneratorKind.MOCK_TEXT_ONLY,
    GeneratorKind.MOCK_HTML_ONLY,
    GeneratorKind.MOCK_GROUNDED,
]


@pytest.fixture(scope="module")
def suite_result(fixture_bundle, knowledge_store, embedder):
    arms = [GeneratorKind.MOCK_GROUNDED, GeneratorKind.MOCK_UNGROUNDED] + ABLATION_ARMS[:2]
    return run_suite(
        arms, list(DEFAULT_SEEDS), fixture_bundle, knowledge_store, embedder
    )


class TestRunSuite:
    def test_cardinality_one_arm(self, fixture_bundle, knowledge_store, embedder):
        result = run_suite(
            [GeneratorKind.MOCK_GROUNDED], list(DEFAULT_SEEDS),
            fixture_bundle, knowledge_store, embedder,
        )
        assert len(result.records) == 60  # 20 scenarios x 3 seeds

    def test_seed_recorded(self, suite_result):
        assert {r.seed for r in suite_result.records} == set(DEFAULT_SEEDS)

    def test_ungrounded_hallucinations_tagged_not_found(self, suite_result):
        ungrounded = [
            r for r in suite_result.records
            if r.arm == GeneratorKind.MOCK_UNGROUNDED and not r.execution_success
        ]
        assert ungrounded
        for rec in ungrounded:
            assert rec.failure_mode == FailureMode.HALLUCINATION

    def test_no_incompletes_with_mocks(self, suite_result):
        assert suite_result.incomplete == []

    def test_failure_ordering_invariant(self, suite_result):
        check_failure_ordering(suite_result.records)

    def test_mocks_identical_across_seeds(self, suite_result):
        by_key = {}
        for rec in suite_result.records:
            by_key.setdefault((rec.arm, rec.scenario_id), set()).add(rec.script_text)
        for scripts in by_key.values():
            assert len(scripts) == 1


class TestAggregation:
    def test_run_metrics_shape(self, suite_result):
        runs = run_metrics(suite_result.records)
        assert len(runs) == 4 * 3  # arms x seeds
        for run in runs:
            assert 0.0 <= run.syntax_validity <= 100.0
            assert 0.0 <= run.element_resolution <= 100.0
            assert 0.0 <= run.execution_success <= 100.0

    def test_identical_runs_zero_std(self, suite_result):
        summary = summarize(suite_result.records)
        for (arm, metric), am in summary.per_arm.items():
            assert am.n == 3
            assert am.std == 0.0, (arm, metric)

    def test_ablation_rows_present(self, fixture_bundle, knowledge_store, embedder):
        result = run_suite(
            ABLATION_ARMS, [42], fixture_bundle, knowledge_store, embedder
        )
        summary = summarize(result.records)
        assert set(summary.arms) == set(ABLATION_ARMS)

    def test_single_run_omits_std_and_tests(self, fixture_bundle, knowledge_store, embedder):
        result = run_suite(
            [GeneratorKind.MOCK_GROUNDED], [42], fixture_bundle, knowledge_store, embedder
        )
        summary = summarize(result.records)
        for am in summary.per_arm.values():
            assert am.std is None
            assert am.ci95 is None
        assert summary.pairwise == []


class TestWelch:
    def test_equal_samples_no_effect(self):
        a = [10.0, 12.0, 11.0]
        t, p = welch_t_test(a, list(a))
        assert (t, p) == (0.0, 1.0)
        assert cohen_d(a, list(a)) == 0.0

    def test_textbook_example(self):
        a = [40.0, 41.0, 39.0]
        b = [95.0, 94.0, 96.0]
        t, p = welch_t_test(a, b)
        t_ref, p_ref, d_ref = welch_oracle(a, b)
        assert t == pytest.approx(t_ref, abs=1e-9)
        assert p == pytest.approx(p_ref, abs=1e-9)
        assert cohen_d(a, b) == pytest.approx(d_ref, abs=1e-9)

    def test_oracle_agreement_randomized(self):
        rng = np.random.default_rng(42)
        for _ in range(25):
            n1 = int(rng.integers(3, 15))
            n2 = int(rng.integers(3, 15))
            a = list(rng.normal(rng.uniform(0, 100), rng.uniform(0.5, 20), n1))
            b = list(rng.normal(rng.uniform(0, 100), rng.uniform(0.5, 20), n2))
            t, p = welch_t_test(a, b)
            t_ref, p_ref, d_ref = welch_oracle(a, b)
            assert t == pytest.approx(t_ref, abs=1e-9)
            assert p == pytest.approx(p_ref, abs=1e-9)
            assert cohen_d(a, b) == pytest.approx(d_ref, abs=1e-9)

    def test_antisymmetry(self):
        a = [50.0, 52.0, 48.0, 51.0]
        b = [60.0, 59.0, 61.0]
        t_ab, p_ab = welch_t_test(a, b)
        t_ba, p_ba = welch_t_test(b, a)
        assert t_ab == pytest.approx(-t_ba, abs=1e-12)
        assert p_ab == pytest.approx(p_ba, abs=1e-12)

    def test_scaling_invariance(self):
        rng = np.random.default_rng(7)
        a = list(rng.normal(40, 5, 6))
        b = list(rng.normal(90, 4, 5))
        t1, p1 = welch_t_test(a, b)
        d1 = cohen_d(a, b)
        c = 3.7
        t2, p2 = welch_t_test([x * c for x in a], [x * c for x in b])
        d2 = cohen_d([x * c for x in a], [x * c for x in b])
        assert t1 == pytest.approx(t2, abs=1e-9)
        assert p1 == pytest.approx(p2, abs=1e-9)
        assert d1 == pytest.approx(d2, abs=1e-9)

    def test_d_sign_matches_mean_difference(self):
        lo = [1.0, 2.0, 3.0]
        hi = [7.0, 8.0, 9.5]
        assert cohen_d(hi, lo) > 0
        assert cohen_d(lo, hi) < 0

    def test_zero_variance_unequal_means(self):
        t, p = welch_t_test([5.0, 5.0], [9.0, 9.0])
        assert math.isinf(t) and t < 0
        assert p == 0.0
        assert math.isinf(cohen_d([5.0, 5.0], [9.0, 9.0]))

    def test_requires_two_samples(self):
        with pytest.raises(ValueError):
            welch_t_test([1.0], [2.0, 3.0])


class TestDistributions:
    def test_incomplete_beta_against_scipy(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            a = float(rng.uniform(0.2, 20))
            b = float(rng.uniform(0.2, 20))
            x = float(rng.uniform(0, 1))
            assert regularized_incomplete_beta(a, b, x) == pytest.approx(
                float(betainc(a, b, x)), abs=1e-12
            )

    def test_t_sf_against_scipy(self):
        for t in (0.0, 0.5, 1.0, 2.2, 5.0, 18.4):
            for df in (1.0, 2.0, 3.7, 10.0, 100.0):
                assert student_t_sf(t, df) == pytest.approx(
                    float(sps.t.sf(t, df)), abs=1e-12
                )

    def test_t_quantile_against_scipy(self):
        for prob in (0.9, 0.95, 0.975, 0.995):
            for df in (2.0, 3.0, 10.0, 30.0):
                assert student_t_quantile(prob, df) == pytest.approx(
                    float(sps.t.ppf(prob, df)), abs=1e-8
                )


class TestReports:
    def test_markdown_table_layout(self, suite_result):
        summary = summarize(suite_result.records)
        md = render_markdown(summary)
        lines = md.splitlines()
        header = next(ln for ln in lines if ln.startswith("| Metric |"))
        assert header.count("|") == len(summary.arms) + 2
        for title in ("Syntax Validity", "Element Resolution", "Execution Success"):
            assert any(title in ln for ln in lines)

    def test_ablation_row_labels(self, fixture_bundle, knowledge_store, embedder):
        result = run_suite(ABLATION_ARMS, [42, 123], fixture_bundle, knowledge_store, embedder)
        md = render_markdown(summarize(result.records))
        for label in ("Text-Only", "HTML-Only", "Full"):
            assert label in md

    def test_failure_mode_columns_always_present(self, suite_result):
        md = render_markdown(summarize(suite_result.records))
        for mode in FailureMode:
            assert mode.value in md

    def test_json_round_trips_to_identical_markdown(self, suite_result, tmp_path):
        summary = summarize(suite_result.records)
        paths = render_report(summary, tmp_path, suite_result.records)
        payload = json.loads(paths["json"].read_text())
        md_again = _markdown_from_json(payload)
        assert md_again == _markdown_from_json(
            json.loads(json.dumps(summary_to_json(summary)))
        )
        # every number in the markdown comes from the JSON verbatim
        for metric, arms in payload["metrics"].items():
            for arm, cell in arms.items():
                rendered = f"{cell['mean']:.1f}"
                assert rendered in paths["markdown"].read_text()

    def test_records_jsonl(self, suite_result, tmp_path):
        summary = summarize(suite_result.records)
        paths = render_report(summary, tmp_path, suite_result.records)
        lines = paths["records"].read_text().strip().split("\n")
        assert len(lines) == len(suite_result.records)
        first = json.loads(lines[0])
        assert {"scenario_id", "arm", "seed", "execution_success"} <= set(first)


def _markdown_from_json(payload: dict) -> str:
    rows = []
    for metric in ("syntax_validity", "element_resolution", "execution_success"):
        cells = [
            f"{payload['metrics'][metric][arm]['mean']:.1f}"
            for arm in payload["arms"]
        ]
        rows.append(" | ".join(cells))
    return "\n".join(rows)
