"""Corpus loading (directory or MediaWiki XML export) and the ingest stage.

The ingest stage turns raw articles into three line-delimited JSON outputs:
conflicts.jsonl, entities.jsonl, and sections.jsonl.
"""

from __future__ import annotations

import json
import re
import urllib.parse
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Set, Tuple

from .errors import DataError, InfoboxParseError, RedirectError
from .wikitext import (
    DEFAULT_SECTION_BLACKLIST, EntityRef, InfoboxMilitaryConflict, RawArticle,
    SectionedArticle, entity_id, harvest_category_tree, normalize_title,
    parse_infobox, resolve_redirect, section_split,
)

_REDIRECT_TEXT_RE = re.compile(r"^\s*#redirect\s*:?\s*\[\[([^\[\]|]+)", re.I)


def title_slug(title: str) -> str:
    """Filesystem-safe, reversible-enough file stem for a page title."""
    return urllib.parse.quote(title.replace(" ", "_"), safe="_-.()")


def _detect_redirect(wikitext: str) -> Optional[str]:
    m = _REDIRECT_TEXT_RE.match(wikitext)
    return normalize_title(m.group(1).split("#", 1)[0]) if m else None


def load_corpus_dir(path, warnings: Optional[List[Tuple[str, str]]] = None
                    ) -> List[RawArticle]:
    """Read `<title-slug>.wiki` files described by `index.json`.

    Returns articles sorted by title. Missing files yield empty wikitext
    (normal for redirect entries).  An unreadable wikitext file raises
    unless ``warnings`` is a list, in which case the failure is recorded
    there as (title, message) and the article proceeds with empty text.
    """
    root = Path(path)
    index_path = root / "index.json"
    if not index_path.is_file():
        raise DataError(f"missing corpus index: {index_path}")
    try:
        entries = json.loads(index_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"invalid corpus index: {exc}") from exc
    articles: List[RawArticle] = []
    seen_ids: Set[int] = set()
    for entry in entries:
        title = entry["title"]
        page_id = int(entry["page_id"])
        if page_id in seen_ids:
            raise DataError(f"duplicate page_id {page_id} in index")
        seen_ids.add(page_id)
        wiki_path = root / (title_slug(title) + ".wiki")
        wikitext = ""
        if wiki_path.is_file():
            try:
                wikitext = wiki_path.read_text(encoding="utf-8")
            except (UnicodeDecodeError, OSError) as exc:
                if warnings is None:
                    raise DataError(
                        f"unreadable wikitext {wiki_path.name}: {exc}") from exc
                warnings.append((title, f"unreadable wikitext "
                                        f"{wiki_path.name}: {exc}"))
        is_redirect = bool(entry.get("is_redirect", False))
        redirect_target = entry.get("redirect_target")
        if not is_redirect:
            detected = _detect_redirect(wikitext)
            if detected:
                is_redirect, redirect_target = True, detected
        articles.append(RawArticle(title=title, page_id=page_id,
                                   wikitext=wikitext, is_redirect=is_redirect,
                                   redirect_target=redirect_target))
    articles.sort(key=lambda a: a.title)
    return articles


def _local_name(tag: str) -> str:
    return tag.rsplit("}", 1)[-1]


def read_xml_export(path) -> List[RawArticle]:
    """Read main-namespace pages from a MediaWiki XML export stream."""
    articles: List[RawArticle] = []
    for _, elem in ET.iterparse(str(path), events=("end",)):
        if _local_name(elem.tag) != "page":
            continue
        ns_text, title, page_id, redirect, text = "0", None, None, None, ""
        for child in elem:
            name = _local_name(child.tag)
            if name == "ns":
                ns_text = (child.text or "0").strip()
            elif name == "title":
                title = child.text or ""
            elif name == "id" and page_id is None:
                page_id = int(child.text)
            elif name == "redirect":
                redirect = child.get("title")
            elif name == "revision":
                for sub in child:
                    if _local_name(sub.tag) == "text":
                        text = sub.text or ""
        elem.clear()
        if ns_text != "0" or title is None or page_id is None:
            continue
        if redirect is None:
            redirect = _detect_redirect(text)
        articles.append(RawArticle(
            title=title, page_id=page_id, wikitext=text,
            is_redirect=redirect is not None,
            redirect_target=normalize_title(redirect) if redirect else None))
    articles.sort(key=lambda a: a.title)
    return articles


def build_redirect_table(articles: Iterable[RawArticle]) -> Dict[str, str]:
    table: Dict[str, str] = {}
    for a in articles:
        if a.is_redirect and a.redirect_target:
            table[normalize_title(a.title)] = normalize_title(a.redirect_target)
    return table


@dataclass
class IngestResult:
    conflicts: List[InfoboxMilitaryConflict] = field(default_factory=list)
    entities: List[EntityRef] = field(default_factory=list)
    sections: List[SectionedArticle] = field(default_factory=list)
    warnings: List[Tuple[str, str]] = field(default_factory=list)


def run_ingest(articles: List[RawArticle],
               blacklist: frozenset = DEFAULT_SECTION_BLACKLIST,
               category_root: Optional[str] = None,
               category_index: Optional[Dict[str, List[str]]] = None,
               category_depth: int = 4) -> IngestResult:
    """Parse conflicts, resolve entity redirects, split sections.

    Articles failing infobox parsing are skipped with a warning; redirect
    resolution failures leave the reference unresolved with a warning.
    """
    result = IngestResult()
    redirects = build_redirect_table(articles)
    pages = {normalize_title(a.title): a for a in articles if not a.is_redirect}

    allowed: Optional[Set[str]] = None
    if category_root is not None:
        if category_index is None:
            raise DataError("category filtering requires a category index")
        allowed = {normalize_title(t) for t in harvest_category_tree(
            category_index, category_root, category_depth)}

    for title in sorted(pages):
        if allowed is not None and title not in allowed:
            continue
        article = pages[title]
        try:
            conflict = parse_infobox(article)
        except InfoboxParseError as exc:
            result.warnings.append((article.title, f"infobox parse: {exc.reason}"))
            continue
        if conflict is None:
            continue
        groups: List[Tuple[EntityRef, ...]] = []
        for group in conflict.combatant_groups:
            resolved: List[EntityRef] = []
            for ref in group:
                try:
                    resolved.append(resolve_redirect(ref, redirects))
                except RedirectError as exc:
                    result.warnings.append((article.title, str(exc)))
                    resolved.append(ref)
            groups.append(tuple(resolved))
        result.conflicts.append(InfoboxMilitaryConflict(
            conflict_title=conflict.conflict_title,
            conflict_id=conflict.conflict_id,
            combatant_groups=tuple(groups),
            place=conflict.place, date=conflict.date,
            strength=conflict.strength, casualties=conflict.casualties,
            commanders=conflict.commanders, result=conflict.result))

    by_id: Dict[str, EntityRef] = {}
    for conflict in result.conflicts:
        for group in conflict.combatant_groups:
            for ref in group:
                by_id.setdefault(entity_id(ref), ref)
    result.entities = [by_id[k] for k in sorted(by_id)]

    section_titles = {normalize_title(c.conflict_title) for c in result.conflicts}
    for eid in by_id:
        t = normalize_title(eid)
        if t in pages:
            section_titles.add(t)
    for title in sorted(section_titles):
        if title in pages:
            result.sections.append(section_split(pages[title], blacklist))
    return result


def _ref_dict(ref: EntityRef) -> dict:
    d = {"raw_text": ref.raw_text}
    if ref.link_target is not None:
        d["link_target"] = ref.link_target
    if ref.resolved_title is not None:
        d["resolved_title"] = ref.resolved_title
    return d


def _ref_from_dict(d: dict) -> EntityRef:
    return EntityRef(raw_text=d["raw_text"], link_target=d.get("link_target"),
                     resolved_title=d.get("resolved_title"))


def write_conflicts_jsonl(path, conflicts: Iterable[InfoboxMilitaryConflict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for c in conflicts:
            rec = {
                "conflict_title": c.conflict_title,
                "conflict_id": c.conflict_id,
                "combatant_groups": [[_ref_dict(r) for r in g]
                                     for g in c.combatant_groups],
            }
            for name in ("place", "date", "strength", "casualties",
                         "commanders", "result"):
                value = getattr(c, name)
                if value is not None:
                    rec[name] = value
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")


def read_conflicts_jsonl(path) -> List[InfoboxMilitaryConflict]:
    out: List[InfoboxMilitaryConflict] = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            d = json.loads(line)
            out.append(InfoboxMilitaryConflict(
                conflict_title=d["conflict_title"],
                conflict_id=d["conflict_id"],
                combatant_groups=tuple(
                    tuple(_ref_from_dict(r) for r in g)
                    for g in d["combatant_groups"]),
                place=d.get("place"), date=d.get("date"),
                strength=d.get("strength"), casualties=d.get("casualties"),
                commanders=d.get("commanders"), result=d.get("result")))
    return out


def write_entities_jsonl(path, entities: Iterable[EntityRef]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ref in entities:
            fh.write(json.dumps(_ref_dict(ref), ensure_ascii=False) + "\n")


def read_entities_jsonl(path) -> List[EntityRef]:
    out: List[EntityRef] = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                out.append(_ref_from_dict(json.loads(line)))
    return out


def write_sections_jsonl(path, sections: Iterable[SectionedArticle]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for sa in sections:
            rec = {"article_title": sa.article_title,
                   "sections": [[t, b] for t, b in sa.sections]}
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")


def read_sections_jsonl(path) -> List[SectionedArticle]:
    out: List[SectionedArticle] = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                d = json.loads(line)
                out.append(SectionedArticle(
                    article_title=d["article_title"],
                    sections=tuple((t, b) for t, b in d["sections"])))
    return out
