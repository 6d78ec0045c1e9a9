"""Script generation and the restricted action DSL.

Generated scripts target a line-oriented automation DSL instead of raw
Selenium code: syntax validity becomes a grammar check and execution
becomes simulable. The grammar:

    navigate <page_id>
    click <locator>
    type_text <locator> "<value>"
    wait_for <locator> <timeout_ms>
    assert_present <locator>
    assert_state <key> <expected>

Locators are bare CSS selectors from the supported subset, or are
prefixed ``id=`` / ``name=`` / ``css=``. Full-line ``#`` comments and
blank lines are ignored. A thin emitter can transpile parsed steps to
Selenium Python for use outside the simulator.

Generators share one interface: a prompt bundle in, raw script text
out. The mock family is deterministic (pure functions of the prompt
text); the remote provider speaks an OpenAI-style chat-completions
contract configured through environment variables.
"""
from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass
from enum import Enum

from .dom import Locator, LocatorStrategy, parse_css
from .errors import GroundingError, ProviderError, ScriptSyntaxError, SelectorError
from .rag import Intent, PromptBundle, extract_intent, extract_quoted, tokenize


class GeneratorKind(str, Enum):
    REMOTE_LLM = "remote_llm"
    MOCK_GROUNDED = "mock_grounded"
    MOCK_UNGROUNDED = "mock_ungrounded"
    MOCK_TEXT_ONLY = "mock_text_only"
    MOCK_HTML_ONLY = "mock_html_only"


class ActionType(str, Enum):
    NAVIGATE = "navigate"
    CLICK = "click"
    TYPE_TEXT = "type_text"
    WAIT_FOR = "wait_for"
    ASSERT_PRESENT = "assert_present"
    ASSERT_STATE = "assert_state"


# Actions whose locator counts toward the element-resolution denominator.
INTERACTION_ACTIONS = frozenset({ActionType.CLICK, ActionType.TYPE_TEXT})

DEFAULT_WAIT_MS = 3000


@dataclass(frozen=True)
class ActionStep:
    action: ActionType
    line_no: int
    locator: Locator | None = None
    page_id: str | None = None
    value: str | None = None
    timeout_ms: int | None = None
    state_key: str | None = None
    expected: object = None

    def render(self) -> str:
        if self.action == ActionType.NAVIGATE:
            return f"navigate {self.page_id}"
        if self.action == ActionType.CLICK:
            return f"click {self.locator.render()}"
        if self.action == ActionType.TYPE_TEXT:
            return f'type_text {self.locator.render()} {_quote(self.value or "")}'
        if self.action == ActionType.WAIT_FOR:
            return f"wait_for {self.locator.render()} {self.timeout_ms}"
        if self.action == ActionType.ASSERT_PRESENT:
            return f"assert_present {self.locator.render()}"
        return f"assert_state {self.state_key} {_render_expected(self.expected)}"


@dataclass(frozen=True)
class ActionScript:
    raw_text: str
    steps: tuple[ActionStep, ...]
    scenario_id: str | None = None

    def render(self) -> str:
        """Canonical text: one line per step, comments dropped."""
        return "\n".join(step.render() for step in self.steps)


def _quote(value: str) -> str:
    return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _render_expected(expected: object) -> str:
    if isinstance(expected, str):
        return _quote(expected)
    return json.dumps(expected)


def _tokenize_line(line: str, line_no: int) -> list[tuple[str, bool]]:
    """Split into (token, was_quoted) pairs; quotes support backslash escapes."""
    tokens: list[tuple[str, bool]] = []
    i = 0
    while i < len(line):
        ch = line[i]
        if ch.isspace():
            i += 1
            continue
        if ch == '"':
            buf: list[str] = []
            j = i + 1
            while j < len(line) and line[j] != '"':
                if line[j] == "\\" and j + 1 < len(line):
                    buf.append(line[j + 1])
                    j += 2
                else:
                    buf.append(line[j])
                    j += 1
            if j >= len(line):
                raise ScriptSyntaxError("unterminated quote", line_no)
            tokens.append(("".join(buf), True))
            i = j + 1
        else:
            j = i
            while j < len(line) and not line[j].isspace():
                j += 1
            tokens.append((line[i:j], False))
            i = j
    return tokens


def parse_locator_token(token: str, line_no: int = 0) -> Locator:
    if not token:
        raise ScriptSyntaxError("empty locator", line_no)
    if token.startswith("id="):
        value = token[3:]
        if not value:
            raise ScriptSyntaxError("empty id locator", line_no)
        return Locator(LocatorStrategy.BY_ID, value)
    if token.startswith("name="):
        value = token[5:]
        if not value:
            raise ScriptSyntaxError("empty name locator", line_no)
        return Locator(LocatorStrategy.BY_NAME, value)
    if token.startswith("css="):
        token = token[4:]
    try:
        parse_css(token)
    except SelectorError as exc:
        raise ScriptSyntaxError(f"malformed locator: {exc}", line_no) from exc
    return Locator(LocatorStrategy.BY_CSS, token)


_ARITY = {
    ActionType.NAVIGATE: 1,
    ActionType.CLICK: 1,
    ActionType.TYPE_TEXT: 2,
    ActionType.WAIT_FOR: 2,
    ActionType.ASSERT_PRESENT: 1,
    ActionType.ASSERT_STATE: 2,
}


def parse_script(raw: str, scenario_id: str | None = None) -> ActionScript:
    """Parse DSL text; any grammar violation raises ScriptSyntaxError."""
    steps: list[ActionStep] = []
    for line_no, line in enumerate(raw.split("\n"), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        tokens = _tokenize_line(stripped, line_no)
        name = tokens[0][0].lower()
        try:
            action = ActionType(name)
        except ValueError:
            raise ScriptSyntaxError(f"unknown action: {name!r}", line_no) from None
        args = tokens[1:]
        if len(args) != _ARITY[action]:
            raise ScriptSyntaxError(
                f"{name} expects {_ARITY[action]} argument(s), got {len(args)}",
                line_no,
            )
        steps.append(_build_step(action, args, line_no))
    if not steps:
        raise ScriptSyntaxError("empty script", 1)
    return ActionScript(raw_text=raw, steps=tuple(steps), scenario_id=scenario_id)


def _build_step(
    action: ActionType, args: list[tuple[str, bool]], line_no: int
) -> ActionStep:
    if action == ActionType.NAVIGATE:
        return ActionStep(action=action, line_no=line_no, page_id=args[0][0])
    if action in (ActionType.CLICK, ActionType.ASSERT_PRESENT):
        return ActionStep(
            action=action, line_no=line_no,
            locator=parse_locator_token(args[0][0], line_no),
        )
    if action == ActionType.TYPE_TEXT:
        return ActionStep(
            action=action, line_no=line_no,
            locator=parse_locator_token(args[0][0], line_no),
            value=args[1][0],
        )
    if action == ActionType.WAIT_FOR:
        try:
            timeout = int(args[1][0])
        except ValueError:
            raise ScriptSyntaxError(
                f"wait_for timeout must be an integer, got {args[1][0]!r}", line_no
            ) from None
        if timeout <= 0:
            raise ScriptSyntaxError("wait_for timeout must be positive", line_no)
        return ActionStep(
            action=action, line_no=line_no,
            locator=parse_locator_token(args[0][0], line_no),
            timeout_ms=timeout,
        )
    # assert_state: quoted expected stays a string, bare tokens parse as JSON
    token, quoted = args[1]
    expected: object = token
    if not quoted:
        try:
            expected = json.loads(token)
        except json.JSONDecodeError:
            expected = token
    return ActionStep(
        action=action, line_no=line_no, state_key=args[0][0], expected=expected
    )


def extract_locators(script: ActionScript) -> list[Locator]:
    """Locators in step order, duplicates preserved."""
    return [step.locator for step in script.steps if step.locator is not None]


# ---------------------------------------------------------------------------
# Structural-line candidates shared by the grounded mock family


_LINE_RE = re.compile(
    r"^(?P<tag>[a-z][a-z0-9]*)"
    r"(?:#(?P<id>[A-Za-z0-9_-]+))?"
    r"(?P<classes>(?:\.[A-Za-z0-9_-]+)*)"
    r"(?:\[(?P<attrs>[^\]]*)\])?"
    r'(?: "(?P<text>.*)")?$'
)
_ATTR_RE = re.compile(r'([a-z][a-z0-9-]*)="([^"]*)"')

_INPUT_TAGS = frozenset({"input", "textarea", "select"})


@dataclass(frozen=True)
class ElementLine:
    tag: str
    element_id: str
    classes: tuple[str, ...]
    attrs: dict[str, str]
    text: str

    @property
    def is_input(self) -> bool:
        return self.tag in _INPUT_TAGS


def parse_html_block(block: str) -> list[ElementLine]:
    """Id-bearing element lines from a prompt's HTML-structure block."""
    seen: set[str] = set()
    out: list[ElementLine] = []
    for line in block.split("\n"):
        line = line.strip()
        if not line:
            continue
        m = _LINE_RE.match(line)
        if not m or not m.group("id"):
            continue
        element_id = m.group("id")
        if element_id in seen:
            continue
        seen.add(element_id)
        attrs = dict(_ATTR_RE.findall(m.group("attrs") or ""))
        out.append(
            ElementLine(
                tag=m.group("tag"),
                element_id=element_id,
                classes=tuple(
                    c for c in (m.group("classes") or "").split(".") if c
                ),
                attrs=attrs,
                text=m.group("text") or "",
            )
        )
    return out


def _bigrams(tokens: list[str]) -> set[tuple[str, str]]:
    return set(zip(tokens, tokens[1:]))


def _overlap_score(query: str, token_seqs: list[list[str]]) -> int:
    """Unigram-set overlap plus bigram overlap against the query tokens."""
    q_tokens = tokenize(query)
    q_set = set(q_tokens)
    q_bi = _bigrams(q_tokens)
    uni: set[str] = set()
    bi = 0
    for seq in token_seqs:
        uni |= q_set & set(seq)
        bi += len(q_bi & _bigrams(seq))
    return len(uni) + bi


def _score_element(query: str, el: ElementLine) -> int:
    seqs = [tokenize(el.element_id), tokenize(el.text)]
    if "placeholder" in el.attrs:
        seqs.append(tokenize(el.attrs["placeholder"]))
    if "name" in el.attrs:
        seqs.append(tokenize(el.attrs["name"]))
    return _overlap_score(query, seqs)


_PAGE_MARKER_RE = re.compile(r"^\s*([A-Za-z][A-Za-z0-9_-]*)\s+Page\s*$", re.MULTILINE)


def _page_markers(doc_block: str) -> list[tuple[int, str]]:
    """(offset, page_id) for every "<Word> Page" heading in the doc block."""
    return [
        (m.start(), m.group(1).lower()) for m in _PAGE_MARKER_RE.finditer(doc_block)
    ]


def _corroborated_page(doc_block: str, element_id: str) -> str | None:
    """Page of the nearest marker heading preceding the id's mention."""
    pos = doc_block.find(element_id)
    if pos < 0:
        return None
    best: str | None = None
    for offset, page in _page_markers(doc_block):
        if offset < pos:
            best = page
        else:
            break
    return best


def _marker_page_for_query(doc_block: str, query: str) -> str | None:
    """Best marker heading by query-token overlap; "page" itself is ignored."""
    q_tokens = set(tokenize(query)) - {"page"}
    best: str | None = None
    best_score = 0
    for _, page in _page_markers(doc_block):
        score = len(q_tokens & {page})
        if score > best_score:
            best, best_score = page, score
    return best


def _synth_value(query: str, intent: Intent, el: ElementLine | None) -> str:
    quoted = extract_quoted(query)
    if quoted:
        return quoted
    if el is not None and el.attrs.get("type") == "email":
        return "qa@example.com"
    if "email" in tokenize(query):
        return "qa@example.com"
    return intent.object or query


# ---------------------------------------------------------------------------
# Mock generators


def _css_id(element_id: str) -> Locator:
    return Locator(LocatorStrategy.BY_CSS, f"#{element_id}")


def _script_for_target(
    page: str, element_id: str, use_type: bool, value: str | None
) -> str:
    steps = [f"navigate {page}", f"wait_for #{element_id} {DEFAULT_WAIT_MS}"]
    if use_type:
        steps.append(f"type_text #{element_id} {_quote(value or '')}")
    else:
        steps.append(f"click #{element_id}")
    steps.append(f"assert_present #{element_id}")
    return "\n".join(steps)


def _mock_grounded(prompt: PromptBundle, read_docs: bool, read_html: bool) -> str:
    """Shared engine for the grounded, text-only, and html-only mocks."""
    query = prompt.user_query
    intent = extract_intent(query)
    doc_block = prompt.documentation_block if read_docs else ""
    html_block = prompt.html_block if read_html else ""

    if intent.verb == "navigate":
        page = (
            (_marker_page_for_query(doc_block, query) if read_docs else None)
            or intent.page_hint
            or "home"
        )
        return f"navigate {page}"

    if read_html:
        candidates = parse_html_block(html_block)
        if not candidates:
            raise GroundingError(
                "no grounding context: the HTML structure block is empty"
            )
        best = max(candidates, key=lambda el: _score_element(query, el))
        # max() keeps the first of equal scores, preserving block order
        page = (
            (_corroborated_page(doc_block, best.element_id) if read_docs else None)
            or intent.page_hint
            or "home"
        )
        value = _synth_value(query, intent, best) if best.is_input else None
        return _script_for_target(page, best.element_id, best.is_input, value)

    # text-only: mine id-shaped tokens out of the documentation block
    ids = _doc_ids(doc_block)
    if ids:
        best_id = max(ids, key=lambda i: _overlap_score(query, [tokenize(i)]))
        if _overlap_score(query, [tokenize(best_id)]) > 0:
            page = _corroborated_page(doc_block, best_id) or intent.page_hint or "home"
            use_type = bool(
                set(tokenize(best_id)) & {"inp", "input", "text", "field", "box"}
            )
            value = _synth_value(query, intent, None) if use_type else None
            return _script_for_target(page, best_id, use_type, value)
    # nothing in the docs names the target: guess like the baseline would
    return _mock_ungrounded(prompt)


_DOC_ID_RE = re.compile(r"(?<![\w-])([a-z][a-z0-9]*(?:[-_][a-z0-9]+)+)(?![\w-])")


def _doc_ids(doc_block: str) -> list[str]:
    seen: set[str] = set()
    out: list[str] = []
    for m in _DOC_ID_RE.finditer(doc_block):
        if m.group(1) not in seen:
            seen.add(m.group(1))
            out.append(m.group(1))
    return out


# Fabrications the ungrounded baseline reaches for, per intent verb.
_UNGROUNDED_TABLE: dict[str, list[tuple[str, str]]] = {
    "add": [("click", "add-to-cart")],
    "remove": [("click", "remove-item")],
    "update": [("click", "update-btn")],
    "search": [("type_text", "search-box"), ("click", "search-btn")],
    "complete": [("type_text", "email-input"), ("click", "submit")],
    "apply": [("type_text", "promo-code"), ("click", "apply-btn")],
    "sort": [("click", "sort-dropdown")],
    "filter": [("click", "filter-btn")],
    "view": [("click", "orders-link")],
    "write": [("type_text", "review-box"), ("click", "submit-btn")],
    "share": [("click", "share-btn")],
    "cancel": [("click", "cancel-btn")],
    "generic": [("click", "submit")],
}


def _mock_ungrounded(prompt: PromptBundle) -> str:
    """No-context baseline: generic ids guessed from the query alone."""
    query = prompt.user_query
    intent = extract_intent(query)
    page = intent.page_hint or "home"
    if intent.verb == "navigate":
        return f"navigate {page}"
    actions = _UNGROUNDED_TABLE.get(intent.verb, _UNGROUNDED_TABLE["generic"])
    lines = [f"navigate {page}", f"wait_for #{actions[0][1]} {DEFAULT_WAIT_MS}"]
    for op, element_id in actions:
        if op == "type_text":
            lines.append(
                f"type_text #{element_id} {_quote(_synth_value(query, intent, None))}"
            )
        else:
            lines.append(f"click #{element_id}")
    lines.append(f"assert_present #{actions[0][1]}")
    return "\n".join(lines)


class RemoteLlmGenerator:
    """OpenAI-style chat-completions client; temperature pinned to 0.

    Reads LLM_API_URL, LLM_API_KEY, and LLM_MODEL unless configured
    explicitly. Code fences in the response are stripped before the
    text is handed to the DSL parser.
    """

    def __init__(
        self,
        endpoint: str | None = None,
        api_key: str | None = None,
        model: str | None = None,
        session=None,
    ):
        import requests

        self.endpoint = endpoint or os.environ.get("LLM_API_URL", "")
        self.api_key = api_key or os.environ.get("LLM_API_KEY", "")
        self.model = model or os.environ.get("LLM_MODEL", "")
        if not self.endpoint:
            raise ProviderError("remote generator requires an endpoint (LLM_API_URL)")
        self._session = session or requests.Session()

    def generate(self, prompt: PromptBundle) -> str:
        import requests

        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        body = {
            "model": self.model,
            "messages": [{"role": "user", "content": prompt.render()}],
            "temperature": 0,
        }
        try:
            resp = self._session.post(
                self.endpoint, json=body, headers=headers, timeout=60
            )
        except requests.RequestException as exc:
            raise ProviderError(f"LLM request failed: {exc}", retryable=True) from exc
        if resp.status_code >= 500 or resp.status_code == 429:
            raise ProviderError(
                f"LLM provider returned {resp.status_code}", retryable=True
            )
        if resp.status_code != 200:
            raise ProviderError(f"LLM provider returned {resp.status_code}")
        try:
            text = resp.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError) as exc:
            raise ProviderError(f"malformed LLM response: {exc}") from exc
        return strip_code_fences(text)


def strip_code_fences(text: str) -> str:
    lines = [ln for ln in text.strip().split("\n") if not ln.strip().startswith("```")]
    return "\n".join(lines).strip()


def generate(prompt: PromptBundle, kind: GeneratorKind) -> str:
    """Produce raw script text from a prompt with the chosen generator."""
    if kind == GeneratorKind.MOCK_GROUNDED:
        return _mock_grounded(prompt, read_docs=True, read_html=True)
    if kind == GeneratorKind.MOCK_HTML_ONLY:
        return _mock_grounded(prompt, read_docs=False, read_html=True)
    if kind == GeneratorKind.MOCK_TEXT_ONLY:
        return _mock_grounded(prompt, read_docs=True, read_html=False)
    if kind == GeneratorKind.MOCK_UNGROUNDED:
        return _mock_ungrounded(prompt)
    return RemoteLlmGenerator().generate(prompt)


_STEP_DESCRIPTIONS = {
    ActionType.NAVIGATE: lambda s: f"Navigate to the {s.page_id} page",
    ActionType.CLICK: lambda s: f"Click the element {s.locator.render()}",
    ActionType.TYPE_TEXT: lambda s: f'Type "{s.value}" into {s.locator.render()}',
    ActionType.WAIT_FOR: lambda s: (
        f"Wait up to {s.timeout_ms} ms for {s.locator.render()} to appear"
    ),
    ActionType.ASSERT_PRESENT: lambda s: f"Verify {s.locator.render()} is present",
    ActionType.ASSERT_STATE: lambda s: (
        f"Verify state {s.state_key} equals {_render_expected(s.expected)}"
    ),
}


def plan_steps(prompt: PromptBundle, kind: GeneratorKind) -> list[str]:
    """Natural-language test steps derived from the generator's script."""
    script = parse_script(generate(prompt, kind))
    return [_STEP_DESCRIPTIONS[step.action](step) for step in script.steps]


_SELENIUM_HEADER = '''\
from selenium import webdriver
from selenium.webdriver.common.by import By
from selenium.webdriver.support.ui import WebDriverWait
from selenium.webdriver.support import expected_conditions as EC

BASE_URL = "http://localhost:8000"
PAGES = {page_ids}

driver = webdriver.Chrome()
try:
'''

_SELENIUM_FOOTER = """\
finally:
    driver.quit()
"""


def to_selenium_python(script: ActionScript) -> str:
    """Transpile parsed steps to Selenium Python source (text emission only)."""
    page_ids = sorted(
        {s.page_id for s in script.steps if s.action == ActionType.NAVIGATE and s.page_id}
    )
    pages_literal = "{" + ", ".join(f'"{p}": "{p}.html"' for p in page_ids) + "}"
    body: list[str] = []
    for step in script.steps:
        if step.action == ActionType.NAVIGATE:
            body.append(f'driver.get(BASE_URL + "/" + PAGES["{step.page_id}"])')
        elif step.action == ActionType.CLICK:
            body.append(f"driver.find_element({_selenium_by(step.locator)}).click()")
        elif step.action == ActionType.TYPE_TEXT:
            body.append(
                f"driver.find_element({_selenium_by(step.locator)})"
                f".send_keys({json.dumps(step.value)})"
            )
        elif step.action == ActionType.WAIT_FOR:
            seconds = (step.timeout_ms or DEFAULT_WAIT_MS) / 1000
            body.append(
                f"WebDriverWait(driver, {seconds}).until("
                f"EC.presence_of_element_located(({_selenium_tuple(step.locator)})))"
            )
        elif step.action == ActionType.ASSERT_PRESENT:
            body.append(
                f"assert driver.find_elements({_selenium_by(step.locator)}), "
                f"{json.dumps(step.locator.render() + ' missing')}"
            )
        else:
            body.append(
                f"# state assertion (simulator-only): "
                f"{step.state_key} == {_render_expected(step.expected)}"
            )
    indented = "\n".join("    " + line for line in body)
    return _SELENIUM_HEADER.format(page_ids=pages_literal) + indented + "\n" + _SELENIUM_FOOTER


def _selenium_tuple(locator: Locator) -> str:
    if locator.strategy == LocatorStrategy.BY_ID:
        return f"By.ID, {json.dumps(locator.value)}"
    if locator.strategy == LocatorStrategy.BY_NAME:
        return f"By.NAME, {json.dumps(locator.value)}"
    return f"By.CSS_SELECTOR, {json.dumps(locator.value)}"


def _selenium_by(locator: Locator) -> str:
    return _selenium_tuple(locator)
