"""HTML cleaning, structural DOM indexing, and locator resolution.

Raw HTML is reduced to its structural skeleton: scripts, styles, and
comments are dropped, and every remaining element is serialized one per
line as ``tag#id.class1.class2[name="..."] "inner text"``. The serialized
form is what gets chunked and embedded; the element list behind it is the
ground truth that generated locators are resolved against.

The selector engine supports a deliberate subset of CSS: ``tag``, ``#id``,
``.class``, compounds of those, ``tag[attr="v"]``, and a single level of
descendant combination (``A B``). Anything else raises SelectorError,
which callers must keep distinct from "matched nothing".
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from enum import Enum
from html.parser import HTMLParser

from .errors import SelectorError, UnknownPageError

# Attributes kept on elements beyond id/class/name, in serialization order.
RETAINED_ATTRS = ("type", "value", "href", "placeholder")

VOID_TAGS = frozenset(
    {"area", "base", "br", "col", "embed", "hr", "img", "input",
     "link", "meta", "param", "source", "track", "wbr"}
)

_SKIPPED_TAGS = frozenset({"script", "style"})

MAX_TEXT_LEN = 200


@dataclass(frozen=True)
class DomElement:
    element_uid: str
    page_id: str
    tag: str
    id_attr: str | None
    classes: frozenset[str]
    name_attr: str | None
    other_attrs: dict[str, str]
    text: str
    tree_path: tuple[int, ...]

    def serialize(self) -> str:
        """One-line structural form used for chunking and prompts."""
        parts = [self.tag]
        if self.id_attr:
            parts.append(f"#{self.id_attr}")
        for cls in sorted(self.classes):
            parts.append(f".{cls}")
        attrs = []
        if self.name_attr:
            attrs.append(f'name="{self.name_attr}"')
        for key in RETAINED_ATTRS:
            if key in self.other_attrs:
                attrs.append(f'{key}="{self.other_attrs[key]}"')
        if attrs:
            parts.append("[" + " ".join(attrs) + "]")
        line = "".join(parts)
        if self.text:
            line += f' "{self.text}"'
        return line


@dataclass
class CleanResult:
    structural_text: str
    elements: list[DomElement]
    recovered: int  # count of malformed-markup recoveries applied


class _Node:
    __slots__ = ("tag", "attrs", "text_parts", "children", "path")

    def __init__(self, tag: str, attrs: dict[str, str | None], path: tuple[int, ...]):
        self.tag = tag
        self.attrs = attrs
        self.text_parts: list[str] = []
        self.children: list[_Node] = []
        self.path = path


class _StructuralParser(HTMLParser):
    """Tree builder with permissive recovery for malformed markup."""

    def __init__(self) -> None:
        super().__init__(convert_charrefs=True)
        self.roots: list[_Node] = []
        self.stack: list[_Node] = []
        self.recovered = 0
        self._skip_depth = 0

    def _append(self, node: _Node) -> None:
        if self.stack:
            self.stack[-1].children.append(node)
        else:
            self.roots.append(node)

    def _next_path(self) -> tuple[int, ...]:
        if self.stack:
            parent = self.stack[-1]
            return parent.path + (len(parent.children),)
        return (len(self.roots),)

    def handle_starttag(self, tag: str, attrs: list[tuple[str, str | None]]) -> None:
        tag = tag.lower()
        if self._skip_depth:
            if tag in _SKIPPED_TAGS and tag not in VOID_TAGS:
                self._skip_depth += 1
            return
        if tag in _SKIPPED_TAGS:
            self._skip_depth = 1
            return
        node = _Node(tag, dict(attrs), self._next_path())
        self._append(node)
        if tag not in VOID_TAGS:
            self.stack.append(node)

    def handle_startendtag(self, tag: str, attrs: list[tuple[str, str | None]]) -> None:
        tag = tag.lower()
        if self._skip_depth or tag in _SKIPPED_TAGS:
            return
        self._append(_Node(tag, dict(attrs), self._next_path()))

    def handle_endtag(self, tag: str) -> None:
        tag = tag.lower()
        if self._skip_depth:
            if tag in _SKIPPED_TAGS:
                self._skip_depth -= 1
            return
        for depth, node in enumerate(reversed(self.stack)):
            if node.tag == tag:
                # Implicitly close anything left open inside this element.
                self.recovered += depth
                del self.stack[len(self.stack) - depth - 1:]
                return
        self.recovered += 1  # stray end tag, ignored

    def handle_data(self, data: str) -> None:
        if self._skip_depth or not data.strip():
            return
        if self.stack:
            self.stack[-1].text_parts.append(data)

    def close(self) -> None:
        super().close()
        self.recovered += len(self.stack)  # unclosed at end of input
        self.stack.clear()


def clean_html(raw: bytes | str, page_id: str = "") -> CleanResult:
    """Strip scripts/styles/comments and serialize the element skeleton."""
    if isinstance(raw, bytes):
        raw = raw.decode("utf-8", errors="replace")
    parser = _StructuralParser()
    parser.feed(raw)
    parser.close()
    elements: list[DomElement] = []
    for root in parser.roots:
        _collect(root, page_id, elements)
    text = "\n".join(el.serialize() for el in elements)
    return CleanResult(structural_text=text, elements=elements, recovered=parser.recovered)


def _collect(node: _Node, page_id: str, out: list[DomElement]) -> None:
    out.append(_to_element(node, page_id))
    for child in node.children:
        _collect(child, page_id, out)


def _to_element(node: _Node, page_id: str) -> DomElement:
    attrs = {k: (v if v is not None else "") for k, v in node.attrs.items()}
    id_attr = attrs.get("id") or None
    name_attr = attrs.get("name") or None
    classes = frozenset(attrs.get("class", "").split())
    other = {k: attrs[k] for k in RETAINED_ATTRS if k in attrs}
    text = re.sub(r"\s+", " ", " ".join(node.text_parts)).strip()[:MAX_TEXT_LEN]
    path = node.path
    return DomElement(
        element_uid=f"{page_id or 'page'}/{'.'.join(map(str, path))}",
        page_id=page_id,
        tag=node.tag,
        id_attr=id_attr,
        classes=classes,
        name_attr=name_attr,
        other_attrs=other,
        text=text,
        tree_path=path,
    )


@dataclass(frozen=True)
class IdCollision:
    page_id: str
    id_attr: str
    element_uids: tuple[str, ...]  # first entry wins for map lookups


@dataclass
class DomIndex:
    pages: dict[str, tuple[DomElement, ...]]
    by_id: dict[tuple[str, str], str] = field(default_factory=dict)
    by_name: dict[tuple[str, str], list[str]] = field(default_factory=dict)
    collisions: list[IdCollision] = field(default_factory=list)
    _by_uid: dict[str, DomElement] = field(default_factory=dict)
    _by_path: dict[str, dict[tuple[int, ...], DomElement]] = field(default_factory=dict)

    def element(self, uid: str) -> DomElement:
        return self._by_uid[uid]

    def get_by_id(self, page_id: str, id_attr: str) -> DomElement | None:
        uid = self.by_id.get((page_id, id_attr))
        return self._by_uid[uid] if uid else None

    def page_ids(self) -> list[str]:
        return list(self.pages)

    def has_page(self, page_id: str) -> bool:
        return page_id in self.pages

    def element_count(self) -> int:
        return sum(len(els) for els in self.pages.values())

    def collision_report(self) -> list[dict]:
        return [
            {
                "page_id": c.page_id,
                "id": c.id_attr,
                "elements": list(c.element_uids),
                "kept": c.element_uids[0],
            }
            for c in self.collisions
        ]


def build_index(pages: dict[str, list[DomElement]]) -> DomIndex:
    """Assemble lookup maps over cleaned pages; duplicate ids are flagged.

    Elements are restamped with their page_id so callers may clean pages
    before deciding on page naming.
    """
    index = DomIndex(pages={})
    for page_id, elements in pages.items():
        stamped = tuple(
            el if el.page_id == page_id else replace(
                el,
                page_id=page_id,
                element_uid=f"{page_id}/{'.'.join(map(str, el.tree_path))}",
            )
            for el in elements
        )
        index.pages[page_id] = stamped
        id_owners: dict[str, list[str]] = {}
        index._by_path[page_id] = {el.tree_path: el for el in stamped}
        for el in stamped:
            index._by_uid[el.element_uid] = el
            if el.id_attr:
                id_owners.setdefault(el.id_attr, []).append(el.element_uid)
            if el.name_attr:
                index.by_name.setdefault((page_id, el.name_attr), []).append(
                    el.element_uid
                )
        for id_attr, uids in id_owners.items():
            index.by_id[(page_id, id_attr)] = uids[0]
            if len(uids) > 1:
                index.collisions.append(
                    IdCollision(page_id=page_id, id_attr=id_attr, element_uids=tuple(uids))
                )
    return index


class LocatorStrategy(str, Enum):
    BY_ID = "by_id"
    BY_CSS = "by_css"
    BY_NAME = "by_name"


@dataclass(frozen=True)
class Locator:
    strategy: LocatorStrategy
    value: str

    def __post_init__(self) -> None:
        if not self.value:
            raise ValueError("locator value must be nonempty")

    def render(self) -> str:
        if self.strategy == LocatorStrategy.BY_ID:
            return f"id={self.value}"
        if self.strategy == LocatorStrategy.BY_NAME:
            return f"name={self.value}"
        return self.value


_IDENT = r"[A-Za-z_][A-Za-z0-9_-]*|[0-9][A-Za-z0-9_-]*"
_SIMPLE_RE = re.compile(
    rf"#(?P<id>{_IDENT})|\.(?P<cls>{_IDENT})|\[(?P<attr>{_IDENT})=\"(?P<val>[^\"]*)\"\]"
)
_TAG_RE = re.compile(r"[a-zA-Z][a-zA-Z0-9]*")


@dataclass(frozen=True)
class CompoundSelector:
    tag: str | None
    id_attr: str | None
    classes: frozenset[str]
    attrs: tuple[tuple[str, str], ...]


@dataclass(frozen=True)
class CssSelector:
    ancestor: CompoundSelector | None
    target: CompoundSelector


def parse_css(selector: str) -> CssSelector:
    """Parse the restricted CSS grammar; anything else is a SelectorError."""
    stripped = selector.strip()
    if not stripped:
        raise SelectorError("empty selector")
    parts = stripped.split()
    if len(parts) > 2:
        raise SelectorError(
            f"unsupported selector {selector!r}: at most one descendant level"
        )
    compounds = [_parse_compound(part, selector) for part in parts]
    if len(compounds) == 2:
        return CssSelector(ancestor=compounds[0], target=compounds[1])
    return CssSelector(ancestor=None, target=compounds[0])


def _parse_compound(part: str, whole: str) -> CompoundSelector:
    pos = 0
    tag: str | None = None
    m = _TAG_RE.match(part)
    if m:
        tag = m.group(0).lower()
        pos = m.end()
    id_attr: str | None = None
    classes: set[str] = set()
    attrs: list[tuple[str, str]] = []
    while pos < len(part):
        m = _SIMPLE_RE.match(part, pos)
        if not m:
            raise SelectorError(f"unsupported selector syntax in {whole!r} at {part[pos:]!r}")
        if m.group("id"):
            if id_attr is not None:
                raise SelectorError(f"multiple ids in {whole!r}")
            id_attr = m.group("id")
        elif m.group("cls"):
            classes.add(m.group("cls"))
        else:
            attr = m.group("attr").lower()
            if attr == "class":
                raise SelectorError("use .class instead of [class=...]")
            attrs.append((attr, m.group("val")))
        pos = m.end()
    if tag is None and id_attr is None and not classes and not attrs:
        raise SelectorError(f"selector {whole!r} selects nothing")
    return CompoundSelector(
        tag=tag, id_attr=id_attr, classes=frozenset(classes), attrs=tuple(attrs)
    )


def _element_attr(el: DomElement, name: str) -> str | None:
    if name == "id":
        return el.id_attr
    if name == "name":
        return el.name_attr
    return el.other_attrs.get(name)


def _matches_compound(el: DomElement, comp: CompoundSelector) -> bool:
    if comp.tag is not None and el.tag != comp.tag:
        return False
    if comp.id_attr is not None and el.id_attr != comp.id_attr:
        return False
    if not comp.classes <= el.classes:
        return False
    return all(_element_attr(el, k) == v for k, v in comp.attrs)


class MatchKind(str, Enum):
    UNIQUE = "unique"
    AMBIGUOUS = "ambiguous"
    NONE = "none"


@dataclass(frozen=True)
class Resolution:
    elements: tuple[DomElement, ...]

    @property
    def kind(self) -> MatchKind:
        if len(self.elements) == 1:
            return MatchKind.UNIQUE
        return MatchKind.AMBIGUOUS if self.elements else MatchKind.NONE

    @property
    def count(self) -> int:
        return len(self.elements)

    @property
    def element(self) -> DomElement:
        if self.kind != MatchKind.UNIQUE:
            raise ValueError("resolution is not unique")
        return self.elements[0]


def resolve(index: DomIndex, page_id: str, locator: Locator) -> Resolution:
    """Match a locator against one page; reports 0, 1, or n matches.

    A full scan in document order keeps resolution trivially consistent
    with a naive matcher; page sizes here make anything cleverer pointless.
    """
    if page_id not in index.pages:
        raise UnknownPageError(f"unknown page: {page_id!r}")
    elements = index.pages[page_id]
    if locator.strategy == LocatorStrategy.BY_ID:
        matched = tuple(el for el in elements if el.id_attr == locator.value)
    elif locator.strategy == LocatorStrategy.BY_NAME:
        matched = tuple(el for el in elements if el.name_attr == locator.value)
    else:
        selector = parse_css(locator.value)
        by_path = index._by_path[page_id]
        matched = tuple(
            el
            for el in elements
            if _matches_compound(el, selector.target)
            and (
                selector.ancestor is None
                or _has_matching_ancestor(el, selector.ancestor, by_path)
            )
        )
    return Resolution(elements=matched)


def _has_matching_ancestor(
    el: DomElement,
    comp: CompoundSelector,
    by_path: dict[tuple[int, ...], DomElement],
) -> bool:
    for depth in range(1, len(el.tree_path)):
        ancestor = by_path.get(el.tree_path[:depth])
        if ancestor is not None and _matches_compound(ancestor, comp):
            return True
    return False
