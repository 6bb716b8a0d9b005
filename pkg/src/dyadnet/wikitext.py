"""Wikitext parsing: military-conflict infoboxes, entity references,
redirect resolution, section splitting, and markup stripping.

This module ships a documented, versioned rule set (RULESET_VERSION) instead
of a full wikitext renderer. All functions are pure.
"""

from __future__ import annotations

import html
import re
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Set, Tuple

from .errors import DataError, InfoboxParseError, RedirectError

RULESET_VERSION = 1

MAX_NESTING = 64
REDIRECT_HOP_LIMIT = 5

# Section titles dropped before featurization (case-insensitive, trimmed).
DEFAULT_SECTION_BLACKLIST = frozenset({
    "see also", "bibliography", "references", "further reading", "sources",
    "literature", "external links", "citations", "footnotes", "notes",
})

# Wrapper templates whose positional arguments are kept as content.
_LIST_TEMPLATES = frozenset({
    "plainlist", "flatlist", "hlist", "ubl", "unbulleted list",
    "collapsible list",
})

_NON_ENTITY_NAMESPACES = ("file:", "image:", "category:")


@dataclass(frozen=True)
class RawArticle:
    """One corpus page."""

    title: str
    page_id: int
    wikitext: str
    is_redirect: bool = False
    redirect_target: Optional[str] = None


@dataclass(frozen=True)
class EntityRef:
    """A belligerent mention inside a combatant cell."""

    raw_text: str
    link_target: Optional[str] = None
    resolved_title: Optional[str] = None


def entity_id(ref: EntityRef) -> str:
    """Stable node id: the resolved article title for linked refs, the raw
    link target when resolution was skipped, else "unlinked:<normalized raw>".
    """
    if ref.resolved_title:
        return ref.resolved_title
    if ref.link_target:
        return normalize_title(ref.link_target)
    return "unlinked:" + re.sub(r"\s+", " ", ref.raw_text).strip().casefold()


@dataclass(frozen=True)
class InfoboxMilitaryConflict:
    """Parsed military-conflict infobox with >= 2 combatant groups."""

    conflict_title: str
    conflict_id: int
    combatant_groups: Tuple[Tuple[EntityRef, ...], ...]
    place: Optional[str] = None
    date: Optional[str] = None
    strength: Optional[str] = None
    casualties: Optional[str] = None
    commanders: Optional[str] = None
    result: Optional[str] = None


@dataclass(frozen=True)
class SectionedArticle:
    """Article body split at level-2 headings; leading text is "Summary"."""

    article_title: str
    sections: Tuple[Tuple[str, str], ...]


def normalize_title(title: str) -> str:
    """Canonical page title: underscores to spaces, collapsed whitespace,
    first character uppercased."""
    t = re.sub(r"[\s_]+", " ", title).strip()
    if not t:
        return t
    return t[0].upper() + t[1:]


_COMMENT_RE = re.compile(r"<!--.*?-->", re.S)
_REF_RE = re.compile(r"<ref[^>/]*/\s*>|<ref[^>]*>.*?</ref\s*>", re.S | re.I)
_BR_RE = re.compile(r"<br\s*/?\s*>", re.I)
_TAG_RE = re.compile(r"</?[a-zA-Z][^>]*>")
_TABLE_RE = re.compile(r"\{\|.*?\|\}", re.S)
_LINK_RE = re.compile(r"\[\[([^\[\]|]+)(?:\|([^\[\]]*))?\]\]")
_EXTLINK_RE = re.compile(r"\[(?:https?|ftp)://[^\s\]]+(?:\s+([^\]]*))?\]")
_URL_RE = re.compile(r"(?:https?|ftp)://\S+")
_QUOTES_RE = re.compile(r"''+")
_HEADING_LINE_RE = re.compile(r"^(={2,})\s*(.*?)\s*\1\s*$")


def _scan_template(text: str, start: int, max_nesting: int = MAX_NESTING,
                   article: str = "<input>") -> int:
    """Return the index just past the template that opens at `start`.

    Tracks {{ }} nesting (bounded) and ignores braces inside [[ ]].
    """
    depth = 0
    bracket = 0
    i = start
    n = len(text)
    while i < n:
        two = text[i:i + 2]
        if two == "{{" and bracket == 0:
            depth += 1
            if depth > max_nesting:
                raise InfoboxParseError(article, "template nesting too deep")
            i += 2
        elif two == "}}" and bracket == 0:
            depth -= 1
            i += 2
            if depth == 0:
                return i
        elif two == "[[":
            bracket += 1
            i += 2
        elif two == "]]" and bracket > 0:
            bracket -= 1
            i += 2
        else:
            i += 1
    raise InfoboxParseError(article, "unbalanced template braces")


def _split_top_level(body: str) -> List[str]:
    """Split template body on '|' at zero {{ }} / [[ ]] depth."""
    parts: List[str] = []
    depth = 0
    bracket = 0
    cur: List[str] = []
    i = 0
    n = len(body)
    while i < n:
        two = body[i:i + 2]
        if two == "{{":
            depth += 1
            cur.append(two)
            i += 2
        elif two == "}}":
            depth -= 1
            cur.append(two)
            i += 2
        elif two == "[[":
            bracket += 1
            cur.append(two)
            i += 2
        elif two == "]]":
            bracket -= 1
            cur.append(two)
            i += 2
        elif body[i] == "|" and depth == 0 and bracket == 0:
            parts.append("".join(cur))
            cur = []
            i += 1
        else:
            cur.append(body[i])
            i += 1
    parts.append("".join(cur))
    return parts


def _template_name(body: str) -> str:
    name = _split_top_level(body)[0]
    return re.sub(r"[\s_]+", " ", name).strip().lower()


def _strip_templates(text: str, keep_list_content: bool,
                     article: str = "<input>") -> str:
    """Remove {{...}} templates; optionally keep list-wrapper arguments."""
    out: List[str] = []
    i = 0
    n = len(text)
    while i < n:
        if text[i:i + 2] == "{{":
            end = _scan_template(text, i, article=article)
            inner = text[i + 2:end - 2]
            if keep_list_content and _template_name(inner) in _LIST_TEMPLATES:
                args = _split_top_level(inner)[1:]
                kept = [a for a in args
                        if "=" not in a.split("{{")[0].split("[[")[0]]
                out.append("\n".join(a.strip() for a in kept if a.strip()))
            i = end
        else:
            out.append(text[i])
            i += 1
    return "".join(out)


def strip_markup(text: str) -> str:
    """Reduce wikitext to plain text (rule set v1)."""
    t = _COMMENT_RE.sub("", text)
    t = _REF_RE.sub("", t)
    t = _BR_RE.sub("\n", t)
    for _ in range(4):  # tables may nest a little
        t2 = _TABLE_RE.sub("", t)
        if t2 == t:
            break
        t = t2
    try:
        t = _strip_templates(t, keep_list_content=True)
    except InfoboxParseError:
        t = re.sub(r"\{\{[^{}]*\}\}", "", t)  # salvage what a flat pass can
    # file/image/category links removed wholesale (captions may nest links)
    t = _remove_namespace_links(t)
    for _ in range(4):  # nested links resolve innermost-out
        t2 = _LINK_RE.sub(lambda m: (m.group(2) if m.group(2) else m.group(1)), t)
        if t2 == t:
            break
        t = t2
    t = _EXTLINK_RE.sub(lambda m: m.group(1) or "", t)
    t = _URL_RE.sub("", t)
    t = _TAG_RE.sub("", t)
    t = _QUOTES_RE.sub("", t)
    lines = [ln for ln in t.split("\n")
             if not _HEADING_LINE_RE.match(ln.strip())]
    t = "\n".join(ln.lstrip("*#:; ").strip() for ln in lines)
    t = html.unescape(t)
    t = re.sub(r"[ \t]+", " ", t)
    t = re.sub(r"\n{2,}", "\n", t)
    return t.strip()


def _remove_namespace_links(text: str) -> str:
    out: List[str] = []
    i = 0
    n = len(text)
    while i < n:
        if text[i:i + 2] == "[[":
            rest = text[i + 2:i + 16].lower()
            if any(rest.startswith(ns) for ns in _NON_ENTITY_NAMESPACES):
                depth = 0
                j = i
                while j < n:
                    if text[j:j + 2] == "[[":
                        depth += 1
                        j += 2
                    elif text[j:j + 2] == "]]":
                        depth -= 1
                        j += 2
                        if depth == 0:
                            break
                    else:
                        j += 1
                i = j
                continue
        out.append(text[i])
        i += 1
    return "".join(out)


_INFOBOX_START_RE = re.compile(
    r"\{\{\s*infobox[ _\s]+military[ _\s]+conflict\s*(?=[|}\n])", re.I)

_COMBATANT_RE = re.compile(r"^combatant(\d+)$")

_PUNCT_ONLY_RE = re.compile(r"^[\W_]+$")


def extract_entity_refs(cell_wikitext: str) -> List[EntityRef]:
    """Entity references from one combatant cell, in order, deduplicated.

    Wikilinks become linked refs; lines with no links become plain refs
    keyed by their text. Flag and icon templates, reference tags, line
    breaks, and bare formatting markup are stripped first.
    """
    t = _COMMENT_RE.sub("", cell_wikitext)
    t = _REF_RE.sub("", t)
    t = _BR_RE.sub("\n", t)
    t = _strip_templates(t, keep_list_content=True)
    t = _TAG_RE.sub("", t)

    refs: List[EntityRef] = []
    seen: Set[Tuple[str, str]] = set()

    def push(ref: EntityRef) -> None:
        if ref.link_target is not None:
            key = ("link", ref.link_target)
        else:
            key = ("plain", re.sub(r"\s+", " ", ref.raw_text).casefold())
        if key not in seen:
            seen.add(key)
            refs.append(ref)

    for line in t.split("\n"):
        matches = list(_LINK_RE.finditer(line))
        if matches:
            for m in matches:
                target = m.group(1)
                low = target.strip().lower()
                if any(low.startswith(ns) for ns in _NON_ENTITY_NAMESPACES):
                    continue
                target = target.split("#", 1)[0]
                norm = normalize_title(target)
                if not norm:
                    continue
                label = (m.group(2) or "").strip() or target.strip()
                push(EntityRef(raw_text=label, link_target=norm))
        else:
            plain = _QUOTES_RE.sub("", line)
            plain = re.sub(r"\s+", " ", plain).strip().strip("*#:;").strip()
            if (not plain or plain.endswith(":")
                    or _PUNCT_ONLY_RE.match(plain)):
                continue
            push(EntityRef(raw_text=plain, link_target=None))
    return refs


def _clean_meta(value: str) -> Optional[str]:
    cleaned = re.sub(r"\s+", " ", strip_markup(value)).strip()
    return cleaned or None


def parse_infobox(article: RawArticle) -> Optional[InfoboxMilitaryConflict]:
    """Parse the military-conflict infobox, or None when the article has no
    such infobox or fewer than two non-empty combatant groups.

    Raises InfoboxParseError (naming the article) on unbalanced braces or
    nesting beyond the configured bound.
    """
    m = _INFOBOX_START_RE.search(article.wikitext)
    if m is None:
        return None
    end = _scan_template(article.wikitext, m.start(), article=article.title)
    body = article.wikitext[m.start() + 2:end - 2]
    params: Dict[str, str] = {}
    for part in _split_top_level(body)[1:]:
        if "=" not in part:
            continue
        name, value = part.split("=", 1)
        name = re.sub(r"\s+", "", name).lower()
        if name and name not in params:
            params[name] = value.strip()

    groups: List[Tuple[int, Tuple[EntityRef, ...]]] = []
    for name, value in params.items():
        cm = _COMBATANT_RE.match(name)
        if cm and value.strip():
            refs = extract_entity_refs(value)
            if refs:
                groups.append((int(cm.group(1)), tuple(refs)))
    groups.sort(key=lambda item: item[0])
    if len(groups) < 2:
        return None

    def joined(prefixes: Sequence[str]) -> Optional[str]:
        vals: List[Tuple[int, str]] = []
        for name, value in params.items():
            for prefix in prefixes:
                nm = re.fullmatch(re.escape(prefix) + r"(\d*)", name)
                if nm and value.strip():
                    rank = int(nm.group(1)) if nm.group(1) else 0
                    cleaned = _clean_meta(value)
                    if cleaned:
                        vals.append((rank, cleaned))
                    break
        vals.sort(key=lambda item: item[0])
        return "; ".join(v for _, v in vals) if vals else None

    return InfoboxMilitaryConflict(
        conflict_title=article.title,
        conflict_id=article.page_id,
        combatant_groups=tuple(g for _, g in groups),
        place=joined(["place"]),
        date=joined(["date"]),
        strength=joined(["strength"]),
        casualties=joined(["casualties", "casualty"]),
        commanders=joined(["commander", "commanders"]),
        result=joined(["result"]),
    )


def resolve_redirect(ref: EntityRef, redirect_table: Dict[str, str],
                     max_hops: int = REDIRECT_HOP_LIMIT) -> EntityRef:
    """Follow the redirect table until a non-redirect title is reached.

    Plain refs (no link target) pass through unchanged. A cycle or more
    than max_hops hops raises RedirectError carrying the chain.
    """
    if ref.link_target is None:
        return ref
    title = normalize_title(ref.link_target)
    chain = [title]
    hops = 0
    while title in redirect_table:
        title = normalize_title(redirect_table[title])
        hops += 1
        if title in chain:
            raise RedirectError(f"redirect cycle: {' -> '.join(chain + [title])}")
        chain.append(title)
        if hops > max_hops:
            raise RedirectError(f"redirect chain too long: {' -> '.join(chain)}")
    return EntityRef(raw_text=ref.raw_text, link_target=ref.link_target,
                     resolved_title=title)


def section_split(article: RawArticle,
                  blacklist: frozenset = DEFAULT_SECTION_BLACKLIST
                  ) -> SectionedArticle:
    """Split at level-2 headings; leading body is "Summary"; blacklisted
    sections dropped; deeper headings do not split (their lines are removed,
    their text stays in the enclosing section)."""
    sections: List[Tuple[str, List[str]]] = [("Summary", [])]
    current_kept = True
    for line in article.wikitext.split("\n"):
        hm = _HEADING_LINE_RE.match(line.strip())
        if hm:
            level = len(hm.group(1))
            if level == 2:
                title = hm.group(2).strip()
                current_kept = title.casefold() not in blacklist
                if current_kept:
                    sections.append((title, []))
            continue  # heading lines never become body text
        if current_kept:
            sections[-1][1].append(line)
    return SectionedArticle(
        article_title=article.title,
        sections=tuple((title, "\n".join(body)) for title, body in sections),
    )


def harvest_category_tree(category_index: Dict[str, List[str]], root: str,
                          max_depth: int) -> Set[str]:
    """Article titles of root plus subcategories reachable in <= max_depth
    steps (breadth-first, each category visited once)."""
    if root not in category_index:
        raise DataError(f"category not found: {root}")
    seen = {root}
    frontier = [root]
    articles: Set[str] = set()
    depth = 0
    while frontier:
        next_frontier: List[str] = []
        for cat in frontier:
            for member in category_index.get(cat, []):
                if member.lower().startswith("category:"):
                    if depth < max_depth and member not in seen:
                        seen.add(member)
                        next_frontier.append(member)
                else:
                    articles.add(member)
        frontier = next_frontier
        depth += 1
    return articles
