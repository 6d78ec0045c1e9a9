"""Static-DOM execution simulator driven by a declarative fixture manifest.

The manifest describes what a real browser session would observe:
pages, click-driven navigation transitions, state effects of clicks,
scenario goals, and the set of "dynamic" elements that a static HTML
snapshot cannot capture. Waiting on a dynamic element times out by
design; that models the snapshot limitation rather than scripting it
with real JavaScript.

Execution semantics: navigate sets the current page; click, type_text,
wait_for, and assert_present resolve their locator on the current page
and require a unique match (an ambiguous match is its own failure kind,
distinct from not-found); clicks apply manifest effects and transitions;
type_text records its value under ``input.<element-id>``; execution
stops at the first failure. A script succeeds only when every step
passed and the scenario's goal assertions hold afterwards.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from pathlib import Path

from .dom import DomIndex, Locator, LocatorStrategy, MatchKind, build_index, clean_html, resolve
from .errors import ConfigurationError, ManifestError
from .gen import INTERACTION_ACTIONS, ActionScript, ActionStep, ActionType, parse_locator_token
from .ingest import SourceDocument, SourceType

MANIFEST_FORMAT = "groundctl-fixture"
MANIFEST_VERSION = 1


@dataclass(frozen=True)
class Mutation:
    key: str
    op: str  # "set" or "add"
    value: object


@dataclass(frozen=True)
class Goal:
    state_key: str | None = None
    expected: object = None
    page_id: str | None = None
    present: str | None = None  # locator text that must resolve uniquely

    def describe(self) -> str:
        if self.state_key is not None:
            return f"state {self.state_key} == {self.expected!r}"
        return f"on page {self.page_id} with {self.present} present"


@dataclass(frozen=True)
class ScenarioSpec:
    scenario_id: int
    query: str
    goals: tuple[Goal, ...]


@dataclass
class FixtureManifest:
    pages: dict[str, str]  # page_id -> html file name
    start_page: str
    transitions: dict[tuple[str, str], str]  # (page, element id) -> page
    effects: dict[tuple[str, str], tuple[Mutation, ...]]
    dynamic_elements: set[tuple[str, str]]  # (page, element id)
    scenarios: list[ScenarioSpec]
    base_dir: Path

    def scenario(self, scenario_id: int) -> ScenarioSpec:
        for spec in self.scenarios:
            if spec.scenario_id == scenario_id:
                return spec
        raise KeyError(f"no scenario {scenario_id}")


def load_manifest(path: Path) -> FixtureManifest:
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ManifestError(f"{path}: invalid JSON: {exc}") from exc
    if data.get("format") != MANIFEST_FORMAT:
        raise ManifestError(f"{path}: not a {MANIFEST_FORMAT} manifest")
    if data.get("version") != MANIFEST_VERSION:
        raise ManifestError(f"{path}: unsupported version {data.get('version')!r}")
    pages = data.get("pages") or {}
    start_page = data.get("start_page")
    if start_page not in pages:
        raise ManifestError(f"start_page {start_page!r} is not a manifest page")
    transitions: dict[tuple[str, str], str] = {}
    for t in data.get("transitions", []):
        if t["page"] not in pages or t["to"] not in pages:
            raise ManifestError(f"transition references unknown page: {t}")
        transitions[(t["page"], t["id"])] = t["to"]
    effects: dict[tuple[str, str], tuple[Mutation, ...]] = {}
    for e in data.get("effects", []):
        if e["page"] not in pages:
            raise ManifestError(f"effect references unknown page: {e}")
        muts = tuple(
            Mutation(key=m["key"], op=m["op"], value=m["value"])
            for m in e["mutations"]
        )
        for mut in muts:
            if mut.op not in ("set", "add"):
                raise ManifestError(f"unknown mutation op {mut.op!r}")
        effects[(e["page"], e["id"])] = muts
    dynamic = {
        (d["page"], d["id"]) for d in data.get("dynamic_elements", [])
    }
    for page, _ in dynamic:
        if page not in pages:
            raise ManifestError(f"dynamic element references unknown page {page!r}")
    scenarios: list[ScenarioSpec] = []
    seen_ids: set[int] = set()
    for s in data.get("scenarios", []):
        sid = s["id"]
        if sid in seen_ids:
            raise ManifestError(f"duplicate scenario id {sid}")
        seen_ids.add(sid)
        goals = []
        for g in s.get("goals", []):
            if "state" in g:
                goals.append(Goal(state_key=g["state"], expected=g["equals"]))
            elif "page" in g:
                if g["page"] not in pages:
                    raise ManifestError(f"goal references unknown page: {g}")
                goals.append(Goal(page_id=g["page"], present=g["present"]))
            else:
                raise ManifestError(f"goal must have 'state' or 'page': {g}")
        scenarios.append(
            ScenarioSpec(scenario_id=sid, query=s["query"], goals=tuple(goals))
        )
    return FixtureManifest(
        pages=dict(pages),
        start_page=start_page,
        transitions=transitions,
        effects=effects,
        dynamic_elements=dynamic,
        scenarios=scenarios,
        base_dir=path.parent,
    )


@dataclass
class FixtureBundle:
    """Loaded fixture: manifest, DOM index, and the ingestable documents."""

    manifest: FixtureManifest
    index: DomIndex
    documents: list[SourceDocument]


def default_fixture_dir() -> Path:
    return Path(str(resources.files("groundctl") / "fixture"))


def load_fixture(fixture_dir: Path | None = None) -> FixtureBundle:
    """Load manifest + pages from a directory (the bundled app by default).

    The returned documents are the HTML pages plus any markdown/text/JSON
    files sitting next to them (the PRD), ready for knowledge-base ingest.
    """
    fixture_dir = fixture_dir or default_fixture_dir()
    manifest = load_manifest(fixture_dir / "manifest.json")
    pages: dict[str, list] = {}
    documents: list[SourceDocument] = []
    for page_id, file_name in manifest.pages.items():
        raw = (fixture_dir / file_name).read_bytes()
        pages[page_id] = clean_html(raw, page_id).elements
        documents.append(
            SourceDocument(
                source_id=page_id,
                source_type=SourceType.HTML,
                raw_bytes=raw,
                origin=str(fixture_dir / file_name),
            )
        )
    for path in sorted(fixture_dir.iterdir()):
        if path.suffix.lower() in (".md", ".txt", ".json") and path.name != "manifest.json":
            stype = {
                ".md": SourceType.MARKDOWN,
                ".txt": SourceType.TEXT,
                ".json": SourceType.JSON,
            }[path.suffix.lower()]
            documents.append(
                SourceDocument(
                    source_id=path.stem,
                    source_type=stype,
                    raw_bytes=path.read_bytes(),
                    origin=str(path),
                )
            )
    return FixtureBundle(
        manifest=manifest, index=build_index(pages), documents=documents
    )


class StepOutcome(str, Enum):
    RESOLVED = "resolved"
    NOT_FOUND = "not_found"
    AMBIGUOUS = "ambiguous"
    TIMEOUT = "timeout"
    STATE_MISMATCH = "state_mismatch"


FAILURE_OUTCOMES = frozenset(
    {StepOutcome.NOT_FOUND, StepOutcome.AMBIGUOUS, StepOutcome.TIMEOUT,
     StepOutcome.STATE_MISMATCH}
)


@dataclass(frozen=True)
class TraceStep:
    step: ActionStep
    outcome: StepOutcome
    page_id: str
    detail: str = ""


@dataclass
class ExecutionTrace:
    steps: list[TraceStep] = field(default_factory=list)
    final_state: dict[str, object] = field(default_factory=dict)
    final_page: str = ""
    goal_met: bool = False
    goals: tuple[Goal, ...] = ()

    @property
    def failure(self) -> TraceStep | None:
        for ts in self.steps:
            if ts.outcome in FAILURE_OUTCOMES:
                return ts
        return None

    @property
    def execution_success(self) -> bool:
        return self.failure is None and self.goal_met


def _locator_id(locator: Locator) -> str | None:
    """The element id a locator names directly, when it names exactly one."""
    if locator.strategy == LocatorStrategy.BY_ID:
        return locator.value
    if locator.strategy == LocatorStrategy.BY_CSS and locator.value.startswith("#"):
        rest = locator.value[1:]
        if rest and all(c not in rest for c in " .#["):
            return rest
    return None


def _state_key(element) -> str:
    if element.id_attr:
        return f"input.{element.id_attr}"
    if element.name_attr:
        return f"input.{element.name_attr}"
    return f"input.{element.element_uid}"


def execute(
    script: ActionScript,
    manifest: FixtureManifest,
    index: DomIndex,
    goals: tuple[Goal, ...] = (),
) -> ExecutionTrace:
    """Run a parsed script against the fixture; stops at the first failure."""
    if manifest.start_page not in manifest.pages or not index.has_page(manifest.start_page):
        raise ConfigurationError(f"start page {manifest.start_page!r} is not loaded")
    page = manifest.start_page
    state: dict[str, object] = {}
    trace = ExecutionTrace(goals=goals)
    for step in script.steps:
        outcome, detail, page = _run_step(step, page, state, manifest, index)
        trace.steps.append(TraceStep(step=step, outcome=outcome, page_id=page, detail=detail))
        if outcome in FAILURE_OUTCOMES:
            break
    trace.final_state = state
    trace.final_page = page
    trace.goal_met = all(_goal_holds(g, state, page, index) for g in goals)
    return trace


def _run_step(
    step: ActionStep,
    page: str,
    state: dict[str, object],
    manifest: FixtureManifest,
    index: DomIndex,
) -> tuple[StepOutcome, str, str]:
    if step.action == ActionType.NAVIGATE:
        if step.page_id not in manifest.pages:
            return StepOutcome.NOT_FOUND, f"unknown page {step.page_id!r}", page
        return StepOutcome.RESOLVED, "", step.page_id

    if step.action == ActionType.ASSERT_STATE:
        actual = state.get(step.state_key)
        if actual == step.expected:
            return StepOutcome.RESOLVED, "", page
        return (
            StepOutcome.STATE_MISMATCH,
            f"{step.state_key}: expected {step.expected!r}, got {actual!r}",
            page,
        )

    assert step.locator is not None
    res = resolve(index, page, step.locator)
    if res.kind == MatchKind.AMBIGUOUS:
        return (
            StepOutcome.AMBIGUOUS,
            f"{step.locator.render()} matched {res.count} elements on {page}",
            page,
        )
    if res.kind == MatchKind.NONE:
        loc_id = _locator_id(step.locator)
        if step.action == ActionType.WAIT_FOR and loc_id and (page, loc_id) in manifest.dynamic_elements:
            return (
                StepOutcome.TIMEOUT,
                f"#{loc_id} is dynamic and never appeared in the static snapshot",
                page,
            )
        return (
            StepOutcome.NOT_FOUND,
            f"{step.locator.render()} not found on {page}",
            page,
        )

    element = res.element
    if step.action == ActionType.CLICK:
        if element.id_attr:
            for mut in manifest.effects.get((page, element.id_attr), ()):
                _apply_mutation(state, mut)
            target = manifest.transitions.get((page, element.id_attr))
            if target is not None:
                return StepOutcome.RESOLVED, f"navigated to {target}", target
    elif step.action == ActionType.TYPE_TEXT:
        state[_state_key(element)] = step.value
    return StepOutcome.RESOLVED, "", page


def _apply_mutation(state: dict[str, object], mut: Mutation) -> None:
    if mut.op == "set":
        state[mut.key] = mut.value
    else:
        current = state.get(mut.key, 0)
        if not isinstance(current, (int, float)) or isinstance(current, bool):
            current = 0
        state[mut.key] = current + mut.value


def _goal_holds(
    goal: Goal, state: dict[str, object], page: str, index: DomIndex
) -> bool:
    if goal.state_key is not None:
        return state.get(goal.state_key) == goal.expected
    if page != goal.page_id:
        return False
    locator = parse_locator_token(goal.present or "")
    return resolve(index, goal.page_id, locator).kind == MatchKind.UNIQUE


@dataclass(frozen=True)
class StepResolution:
    line_no: int
    locator: Locator
    page_id: str
    outcome: StepOutcome
    counted: bool  # whether this step is part of the M/N denominator


@dataclass(frozen=True)
class ResolutionStats:
    resolved: int  # M
    total: int  # N
    steps: tuple[StepResolution, ...]

    @property
    def rate(self) -> float | None:
        """M/N; None when the script has no interaction steps."""
        if self.total == 0:
            return None
        return self.resolved / self.total


def resolution_stats(
    script: ActionScript, index: DomIndex, manifest: FixtureManifest
) -> ResolutionStats:
    """Static selector audit along the script's page sequence.

    N counts locator-bearing interaction steps (clicks and inputs); M
    counts those that resolve uniquely on their step's current page. The
    page sequence follows navigate steps and the transitions of clicks
    that resolved. Waits and presence assertions are audited for the
    preview but excluded from the denominator.
    """
    page: str | None = manifest.start_page
    resolved = 0
    total = 0
    audited: list[StepResolution] = []
    for step in script.steps:
        if step.action == ActionType.NAVIGATE:
            page = step.page_id if step.page_id in manifest.pages else None
            continue
        if step.locator is None:
            continue
        counted = step.action in INTERACTION_ACTIONS
        if page is None or not index.has_page(page):
            outcome = StepOutcome.NOT_FOUND
        else:
            res = resolve(index, page, step.locator)
            if res.kind == MatchKind.UNIQUE:
                outcome = StepOutcome.RESOLVED
            elif res.kind == MatchKind.AMBIGUOUS:
                outcome = StepOutcome.AMBIGUOUS
            else:
                outcome = StepOutcome.NOT_FOUND
        audited.append(
            StepResolution(
                line_no=step.line_no,
                locator=step.locator,
                page_id=page or "<unknown>",
                outcome=outcome,
                counted=counted,
            )
        )
        if counted:
            total += 1
            if outcome == StepOutcome.RESOLVED:
                resolved += 1
        if (
            step.action == ActionType.CLICK
            and outcome == StepOutcome.RESOLVED
            and page is not None
        ):
            res = resolve(index, page, step.locator)
            el = res.element
            if el.id_attr:
                page = manifest.transitions.get((page, el.id_attr), page)
    return ResolutionStats(resolved=resolved, total=total, steps=tuple(audited))
