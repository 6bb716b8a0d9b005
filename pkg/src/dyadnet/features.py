"""Tf-idf featurization over two corpora (entity articles and conflict
articles), with a shared vocabulary construction rule:

- token filter: keep lowercased lemmas of NOUN/ADJ tokens, drop tokens
  tagged as locations, dates, nationalities, political groups,
  organizations, or other named entities; religion-tagged tokens are kept
- document-frequency band, inclusive on both ends, computed over articles
- top-``max_terms`` terms by absolute corpus term frequency, ties broken
  lexicographically
- idf(t) = ln((1 + N) / (1 + df_t)) + 1, tf = raw count, L2-normalized
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .annotate import (ADJ, DATE, LOCATION, NATIONALITY, NOUN, ORGANIZATION,
                       OTHER_NE, POLITICAL_GROUP, RELIGION, AnnotatedToken)
from .errors import DataError

ENTITY = "ENTITY"
CONFLICT = "CONFLICT"

DEFAULT_MAX_TERMS = 500
DEFAULT_DF_LOW = 0.01
DEFAULT_DF_HIGH = 0.40

_DROPPED_TAGS = frozenset({LOCATION, DATE, NATIONALITY, POLITICAL_GROUP,
                           ORGANIZATION, OTHER_NE})


def preprocess(tokens: Iterable[AnnotatedToken]) -> Counter:
    """Bag of lowercased lemmas after the POS / entity-tag filter."""
    bag: Counter = Counter()
    for tok in tokens:
        if tok.coarse_pos not in (NOUN, ADJ):
            continue
        if tok.entity_tag is not None and tok.entity_tag != RELIGION:
            if tok.entity_tag in _DROPPED_TAGS:
                continue
            continue  # unknown tags are treated as named entities
        bag[tok.lemma.lower()] += 1
    return bag


@dataclass(frozen=True)
class Vocabulary:
    corpus_tag: str
    terms: Tuple[str, ...]
    document_frequency: Tuple[int, ...]
    total_documents: int

    def __post_init__(self) -> None:
        if len(self.terms) != len(self.document_frequency):
            raise DataError("terms and document_frequency lengths differ")

    @property
    def size(self) -> int:
        return len(self.terms)

    def index(self) -> Dict[str, int]:
        return {t: i for i, t in enumerate(self.terms)}

    def idf(self) -> np.ndarray:
        df = np.asarray(self.document_frequency, dtype=np.float64)
        return np.log((1.0 + self.total_documents) / (1.0 + df)) + 1.0


def build_vocabulary(docs: Sequence[Mapping[str, int]], corpus_tag: str,
                     max_terms: int = DEFAULT_MAX_TERMS,
                     df_low: float = DEFAULT_DF_LOW,
                     df_high: float = DEFAULT_DF_HIGH) -> Vocabulary:
    """Select terms from per-article bags.

    The result is independent of the order of ``docs`` because it depends
    only on per-term document frequencies and corpus totals.
    """
    n_docs = len(docs)
    if n_docs == 0:
        raise DataError("cannot build a vocabulary from an empty corpus")
    df: Counter = Counter()
    total: Counter = Counter()
    for bag in docs:
        for term, count in bag.items():
            if count <= 0:
                continue
            df[term] += 1
            total[term] += count
    kept = [t for t in df if df_low <= df[t] / n_docs <= df_high]
    kept.sort(key=lambda t: (-total[t], t))
    terms = tuple(kept[:max_terms])
    return Vocabulary(corpus_tag=corpus_tag, terms=terms,
                      document_frequency=tuple(df[t] for t in terms),
                      total_documents=n_docs)


def tfidf_vector(doc: Mapping[str, int], vocab: Vocabulary) -> np.ndarray:
    """L2-normalized tf-idf vector; all-zero stays all-zero."""
    vec = np.zeros(vocab.size, dtype=np.float64)
    index = vocab.index()
    for term, count in doc.items():
        i = index.get(term)
        if i is not None:
            vec[i] = float(count)
    vec *= vocab.idf()
    norm = float(np.linalg.norm(vec))
    if norm > 0.0:
        vec /= norm
    return vec


def edge_embedding(conflict_ids: Sequence[int],
                   conflict_vectors: Mapping[int, np.ndarray]) -> np.ndarray:
    """Arithmetic mean of conflict-article vectors, not re-normalized."""
    if not conflict_ids:
        raise DataError("edge has no associated conflicts")
    rows = []
    for cid in conflict_ids:
        vec = conflict_vectors.get(cid)
        if vec is None:
            raise DataError(f"no feature vector for conflict {cid!r}")
        rows.append(np.asarray(vec, dtype=np.float64))
    return np.mean(np.stack(rows, axis=0), axis=0)


def top_unigrams(doc: Mapping[str, int], vocab: Vocabulary,
                 k: int = 10) -> List[str]:
    """Vocabulary terms ranked by tf-idf weight, ties lexicographic."""
    idf = vocab.idf()
    weighted = [(-float(doc.get(term, 0)) * idf[i], term)
                for i, term in enumerate(vocab.terms)
                if doc.get(term, 0) > 0]
    weighted.sort()
    return [term for _, term in weighted[:k]]


def write_vocabulary(path, vocab: Vocabulary) -> None:
    payload = {
        "corpus_tag": vocab.corpus_tag,
        "total_documents": vocab.total_documents,
        "terms": list(vocab.terms),
        "document_frequency": list(vocab.document_frequency),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, ensure_ascii=False, indent=1)
        fh.write("\n")


def read_vocabulary(path) -> Vocabulary:
    with open(path, encoding="utf-8") as fh:
        d = json.load(fh)
    return Vocabulary(corpus_tag=d["corpus_tag"], terms=tuple(d["terms"]),
                      document_frequency=tuple(d["document_frequency"]),
                      total_documents=d["total_documents"])


@dataclass(frozen=True)
class FeatureRow:
    doc_id: str
    section_title: Optional[str]
    values: np.ndarray


def write_features_jsonl(path, rows: Iterable[FeatureRow]) -> None:
    """Floats serialized at 17 significant digits (exact round trip)."""
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            values = ",".join(f"{float(v):.17g}" for v in row.values)
            head = json.dumps({"doc_id": row.doc_id,
                               "section_title": row.section_title},
                              ensure_ascii=False)
            fh.write(head[:-1] + ', "values": [' + values + "]}\n")


def read_features_jsonl(path) -> List[FeatureRow]:
    rows: List[FeatureRow] = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            d = json.loads(line)
            rows.append(FeatureRow(doc_id=d["doc_id"],
                                   section_title=d.get("section_title"),
                                   values=np.asarray(d["values"],
                                                     dtype=np.float64)))
    return rows


def feature_map(rows: Iterable[FeatureRow],
                doc_ids: Optional[Iterable[str]] = None,
                sections: bool = False) -> Dict:
    """Article-level map doc_id -> vector, or (doc_id, section) -> vector."""
    wanted = set(doc_ids) if doc_ids is not None else None
    out: Dict = {}
    for row in rows:
        if wanted is not None and row.doc_id not in wanted:
            continue
        if sections:
            if row.section_title is not None:
                out[(row.doc_id, row.section_title)] = row.values
        else:
            if row.section_title is None:
                out[row.doc_id] = row.values
    return out


@dataclass(frozen=True)
class FeaturizeResult:
    entity_vocab: Vocabulary
    conflict_vocab: Vocabulary
    entity_rows: Tuple[FeatureRow, ...]
    conflict_rows: Tuple[FeatureRow, ...]

    @property
    def rows(self) -> Tuple[FeatureRow, ...]:
        return self.conflict_rows + self.entity_rows


def document_term_bags(sectioned, annotations=None
                       ) -> Dict[str, List[Tuple[str, Counter]]]:
    """Per-article [(section_title, term bag)] lists keyed by title."""
    return _document_bags(sectioned, annotations)


def _document_bags(sectioned, annotations) -> Dict[str, List[Tuple[str, Counter]]]:
    from .annotate import annotate_text
    from .wikitext import strip_markup

    per_article: Dict[str, List[Tuple[str, Counter]]] = {}
    for art in sectioned:
        bags: List[Tuple[str, Counter]] = []
        for title, body in art.sections:
            tokens = None
            if annotations is not None:
                tokens = annotations.get((art.article_title, title))
            if tokens is None:
                tokens = annotate_text(strip_markup(body))
            bags.append((title, preprocess(tokens)))
        per_article[art.article_title] = bags
    return per_article


def featurize_corpus(sectioned, conflict_titles: Sequence[str],
                     entity_ids: Sequence[str], annotations=None,
                     max_terms: int = DEFAULT_MAX_TERMS,
                     df_low: float = DEFAULT_DF_LOW,
                     df_high: float = DEFAULT_DF_HIGH) -> FeaturizeResult:
    """Build both vocabularies and all article/section feature rows.

    ``sectioned`` is the sectioned-article list; documents missing from it
    get an all-zero article vector (and no section rows).  Conflict and
    entity doc-id namespaces must be disjoint because feature rows carry a
    single doc_id field.
    """
    conflict_docs = sorted(set(conflict_titles))
    entity_docs = sorted(set(entity_ids))
    overlap = set(conflict_docs) & set(entity_docs)
    if overlap:
        raise DataError("doc ids present in both corpora: "
                        + ", ".join(sorted(overlap)[:5]))
    per_article = _document_bags(sectioned, annotations)

    def corpus_rows(doc_ids: List[str], tag: str):
        article_bags = []
        for doc in doc_ids:
            total: Counter = Counter()
            for _, bag in per_article.get(doc, []):
                total.update(bag)
            article_bags.append(total)
        vocab = build_vocabulary(article_bags, tag, max_terms=max_terms,
                                 df_low=df_low, df_high=df_high)
        rows: List[FeatureRow] = []
        for doc, art_bag in zip(doc_ids, article_bags):
            rows.append(FeatureRow(doc_id=doc, section_title=None,
                                   values=tfidf_vector(art_bag, vocab)))
            for sec_title, bag in per_article.get(doc, []):
                rows.append(FeatureRow(doc_id=doc, section_title=sec_title,
                                       values=tfidf_vector(bag, vocab)))
        return vocab, tuple(rows)

    conflict_vocab, conflict_rows = corpus_rows(conflict_docs, CONFLICT)
    entity_vocab, entity_rows = corpus_rows(entity_docs, ENTITY)
    return FeaturizeResult(entity_vocab=entity_vocab,
                           conflict_vocab=conflict_vocab,
                           entity_rows=entity_rows,
                           conflict_rows=conflict_rows)
