"""Independent oracles shared across test modules.

Everything here deliberately re-derives behavior from first principles
(naive scans, regex re-parsing, textbook formulas) so the tests stay
independent of the implementation paths they check.
"""
from __future__ import annotations

import math
import random
import re

from groundctl.dom import DomElement, Locator, LocatorStrategy, clean_html


def naive_matches(elements: list[DomElement], locator: Locator) -> list[DomElement]:
    """Full-scan matcher with its own selector interpretation."""
    if locator.strategy == LocatorStrategy.BY_ID:
        return [e for e in elements if e.id_attr == locator.value]
    if locator.strategy == LocatorStrategy.BY_NAME:
        return [e for e in elements if e.name_attr == locator.value]
    parts = locator.value.split()
    matched = [e for e in elements if _naive_compound(e, parts[-1])]
    if len(parts) == 1:
        return matched
    by_path = {e.tree_path: e for e in elements}
    out = []
    for el in matched:
        for depth in range(1, len(el.tree_path)):
            anc = by_path.get(el.tree_path[:depth])
            if anc is not None and _naive_compound(anc, parts[0]):
                out.append(el)
                break
    return out


_NAIVE_PARTS = re.compile(r'([a-zA-Z][a-zA-Z0-9]*)|#([\w-]+)|\.([\w-]+)|\[([\w-]+)="([^"]*)"\]')


def _naive_compound(el: DomElement, compound: str) -> bool:
    pos = 0
    for m in _NAIVE_PARTS.finditer(compound):
        assert m.start() == pos, f"oracle cannot parse {compound!r}"
        pos = m.end()
        tag, id_attr, cls, attr, val = m.groups()
        if tag is not None and el.tag != tag.lower():
            return False
        if id_attr is not None and el.id_attr != id_attr:
            return False
        if cls is not None and cls not in el.classes:
            return False
        if attr is not None:
            actual = {
                "id": el.id_attr,
                "name": el.name_attr,
            }.get(attr, el.other_attrs.get(attr))
            if actual != val:
                return False
    assert pos == len(compound), f"oracle cannot parse {compound!r}"
    return True


_TAG_VOCAB = ["div", "span", "button", "input", "a", "h3", "main", "header", "p"]
_ID_VOCAB = [
    "add-headphones", "add-watch", "btn_pay", "inp_email", "search-input",
    "nav-home", "view-orders", "apply-discount", "product-title", "go-checkout",
]
_CLASS_VOCAB = ["product", "price", "btn-add", "site-header", "grid", "promo", "name"]
_NAME_VOCAB = ["q", "email", "discount", "review", "payment"]
_TEXT_VOCAB = ["Add to Cart", "Search", "Submit Order", "Checkout", "Remove Item", ""]


def generate_page_html(rng: random.Random, max_elements: int = 50) -> str:
    """Random nested page over the fixture vocabulary, depth capped at 5."""
    n_target = rng.randint(1, max_elements)
    count = 0

    def element(depth: int) -> str:
        nonlocal count
        count += 1
        tag = rng.choice(_TAG_VOCAB)
        attrs = []
        if rng.random() < 0.5:
            attrs.append(f'id="{rng.choice(_ID_VOCAB)}"')
        if rng.random() < 0.6:
            classes = rng.sample(_CLASS_VOCAB, k=rng.randint(1, 2))
            attrs.append(f'class="{" ".join(classes)}"')
        if rng.random() < 0.3:
            attrs.append(f'name="{rng.choice(_NAME_VOCAB)}"')
        attr_text = (" " + " ".join(attrs)) if attrs else ""
        if tag == "input":
            return f"<input{attr_text}>"
        inner = rng.choice(_TEXT_VOCAB)
        children = []
        while depth < 5 and count < n_target and rng.random() < 0.55:
            children.append(element(depth + 1))
        return f"<{tag}{attr_text}>{inner}{''.join(children)}</{tag}>"

    body = []
    while count < n_target:
        body.append(element(1))
    return "<html><body>" + "".join(body) + "</body></html>"


def grammar_selectors(elements: list[DomElement]) -> list[str]:
    """Every supported production instantiated over a page's vocabulary."""
    tags = sorted({e.tag for e in elements})
    ids = sorted({e.id_attr for e in elements if e.id_attr}) + ["no-such-id"]
    classes = sorted({c for e in elements for c in e.classes}) + ["no-such-class"]
    names = sorted({e.name_attr for e in elements if e.name_attr})
    selectors: list[str] = []
    selectors += tags
    selectors += [f"#{i}" for i in ids]
    selectors += [f".{c}" for c in classes]
    for tag in tags[:6]:
        for cls in classes[:4]:
            selectors.append(f"{tag}.{cls}")
        for i in ids[:4]:
            selectors.append(f"{tag}#{i}")
        for name in names[:3]:
            selectors.append(f'{tag}[name="{name}"]')
    for name in names:
        selectors.append(f'[name="{name}"]')
    ancestors = (tags[:3] + [f".{c}" for c in classes[:3]]) or ["div"]
    targets = (tags[:3] + [f"#{i}" for i in ids[:3]]) or ["span"]
    for a in ancestors:
        for t in targets:
            selectors.append(f"{a} {t}")
    return selectors


def page_from_html(html: str, page_id: str = "gen") -> list[DomElement]:
    return clean_html(html.encode("utf-8"), page_id).elements


def sliding_window_ranges(n: int, size: int, overlap: int) -> list[tuple[int, int]]:
    """Expected chunk ranges for separator-free text of length n."""
    if n == 0:
        return []
    ranges = []
    start = 0
    while True:
        end = min(start + size, n)
        ranges.append((start, end))
        if end == n:
            return ranges
        start = end - overlap


def welch_oracle(a: list[float], b: list[float]) -> tuple[float, float, float]:
    """Textbook Welch t, two-sided p (via scipy), and pooled Cohen's d."""
    from scipy import stats as sps

    t, p = sps.ttest_ind(a, b, equal_var=False)
    n1, n2 = len(a), len(b)
    m1 = sum(a) / n1
    m2 = sum(b) / n2
    v1 = sum((x - m1) ** 2 for x in a) / (n1 - 1)
    v2 = sum((x - m2) ** 2 for x in b) / (n2 - 1)
    pooled = ((n1 - 1) * v1 + (n2 - 1) * v2) / (n1 + n2 - 2)
    d = (m1 - m2) / math.sqrt(pooled)
    return float(t), float(p), d
