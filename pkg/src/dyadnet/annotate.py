"""Token annotation: a pluggable sidecar-file format plus a built-in
fallback annotator (suffix-rule lemmatizer, POS lexicon, gazetteer NER
with a religion allowlist).

The fallback is a documented heuristic, not a full tagger; any external
tagger can replace it by supplying annotations.jsonl.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Tuple

NOUN = "NOUN"
ADJ = "ADJ"
OTHER = "OTHER"

LOCATION = "LOCATION"
DATE = "DATE"
NATIONALITY = "NATIONALITY"
POLITICAL_GROUP = "POLITICAL_GROUP"
ORGANIZATION = "ORGANIZATION"
RELIGION = "RELIGION"
OTHER_NE = "OTHER_NE"


@dataclass(frozen=True)
class AnnotatedToken:
    surface: str
    lemma: str
    coarse_pos: str
    entity_tag: Optional[str] = None


_STOPWORDS = frozenset("""
a an the and or but nor so yet of in on at to from by with without for as is
are was were be been being am do does did done have has had having will would
shall should can could may might must not no this that these those it its he
his she her they them their we our you your i me my who whom whose which what
when where why how if then than there here also both each few more most other
some such only own same too very just about against between into through
during before after above below up down out off over under again further once
all any because until while
""".split())

_VERBS = frozenset("""
say said says go went gone goes make made makes take took taken takes come
came comes see saw seen sees get got gotten gets know knew known knows think
thought thinks become became becomes begin began begun begins bring brought
brings hold held holds keep kept keeps lead leads let lets put puts set sets
run ran runs move moved moves try tried tries call called calls use used uses
want wanted wants give gave given gives find found finds tell told tells ask
asked asks work worked works seem seemed seems feel felt feels leave left
leaves remain remained remains include included includes continue continued
continues became describe described describes consider considered considers
""".split())

_LOCATIONS = frozenset("""
mali france germany russia china india japan spain italy england britain
america africa europe asia algeria libya chad niger nigeria egypt syria iraq
iran turkey israel lebanon jordan afghanistan pakistan vietnam korea poland
ukraine austria hungary serbia bosnia croatia greece portugal belgium
netherlands sweden norway denmark finland mexico brazil argentina canada
australia bamako paris london berlin moscow washington rome madrid timbuktu
gao kidal azawad sahel sahara konna mopti sevare douentza
""".split())

_NATIONALITIES = frozenset("""
malian french german russian chinese indian japanese spanish italian english
british american african european asian algerian libyan chadian nigerien
nigerian egyptian syrian iraqi iranian turkish israeli lebanese jordanian
afghan pakistani vietnamese korean polish ukrainian austrian hungarian
serbian bosnian croatian greek portuguese belgian dutch swedish norwegian
danish finnish mexican brazilian argentine canadian australian tuareg arab
soviet prussian ottoman
""".split())

_ORGANIZATIONS = frozenset("""
un nato unesco ecowas eu mnla aqim mujao mujwa isis isil wehrmacht luftwaffe
gestapo kgb cia fbi minusma interpol
""".split())

_POLITICAL_GROUPS = frozenset("""
taliban bolsheviks bolshevik mensheviks communists nazis nazi fascists
republicans democrats loyalists royalists jacobins confederates unionists
islamists islamist separatists rebels insurgents
""".split())

_RELIGIONS = frozenset("""
islam islamic muslim muslims christianity christian christians catholicism
catholic catholics protestantism protestant protestants orthodoxy orthodox
judaism jewish jews buddhism buddhist buddhists hinduism hindu hindus sikhism
sikh sikhs sunni shia sufi animism animist
""".split())

_MONTHS = frozenset("""
january february march april may june july august september october november
december
""".split())

_ADJ_SUFFIXES = ("ous", "ful", "ive", "able", "ible", "less", "ish", "ant",
                 "ent", "ary", "ical", "ic", "al")

_TOKEN_RE = re.compile(r"[A-Za-z][A-Za-z'\-]*|\d+")
_SENT_END_RE = re.compile(r"[.!?]\s*$|\n$")


def lemmatize(word: str) -> str:
    """Suffix-rule plural stripping on a lowercased word."""
    w = word.lower()
    if len(w) > 4 and w.endswith("ies"):
        return w[:-3] + "y"
    if len(w) > 4 and (w.endswith("xes") or w.endswith("ches")
                       or w.endswith("shes") or w.endswith("sses")
                       or w.endswith("zes")):
        return w[:-2]
    if len(w) > 3 and w.endswith("s") and not w.endswith("ss") \
            and not w.endswith("us") and not w.endswith("is"):
        return w[:-1]
    return w


def _entity_tag(word: str, lemma: str, capitalized: bool,
                sentence_initial: bool) -> Optional[str]:
    if word.isdigit():
        year = int(word)
        return DATE if 1000 <= year <= 2100 else OTHER_NE
    if lemma in _MONTHS:
        return DATE
    if lemma in _RELIGIONS:
        return RELIGION
    if lemma in _LOCATIONS:
        return LOCATION
    if lemma in _NATIONALITIES:
        return NATIONALITY
    if word.lower() in _ORGANIZATIONS or lemma in _ORGANIZATIONS:
        return ORGANIZATION
    if lemma in _POLITICAL_GROUPS:
        return POLITICAL_GROUP
    if capitalized and not sentence_initial:
        return OTHER_NE
    if word.isupper() and len(word) >= 2:
        return OTHER_NE  # unknown acronym
    return None


def _coarse_pos(lemma: str) -> str:
    if lemma in _STOPWORDS or lemma in _VERBS:
        return OTHER
    if lemma.endswith("ly"):
        return OTHER
    for suffix in _ADJ_SUFFIXES:
        if len(lemma) > len(suffix) + 2 and lemma.endswith(suffix):
            return ADJ
    return NOUN


def annotate_text(text: str) -> List[AnnotatedToken]:
    """Fallback annotation of plain text."""
    tokens: List[AnnotatedToken] = []
    pos = 0
    sentence_initial = True
    for m in _TOKEN_RE.finditer(text):
        gap = text[pos:m.start()]
        if pos == 0 or _SENT_END_RE.search(gap) or "\n" in gap:
            sentence_initial = True
        word = m.group(0)
        lemma = lemmatize(word)
        capitalized = word[:1].isupper()
        tag = _entity_tag(word, lemma, capitalized, sentence_initial)
        if tag == RELIGION:
            coarse = _coarse_pos(lemma)
            if coarse == OTHER:
                coarse = NOUN
        elif tag is not None:
            coarse = NOUN
        else:
            coarse = _coarse_pos(lemma)
        tokens.append(AnnotatedToken(surface=word, lemma=lemma,
                                     coarse_pos=coarse, entity_tag=tag))
        sentence_initial = False
        pos = m.end()
    return tokens


def write_annotations_jsonl(path, docs: Iterable[Tuple[str, Optional[str], List[AnnotatedToken]]]) -> None:
    """docs: (article_title, section_title, tokens) triples."""
    with open(path, "w", encoding="utf-8") as fh:
        for article_title, section_title, tokens in docs:
            rec = {
                "article_title": article_title,
                "section_title": section_title,
                "tokens": [{"surface": t.surface, "lemma": t.lemma,
                            "pos": t.coarse_pos, "ne_tag": t.entity_tag}
                           for t in tokens],
            }
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")


def read_annotations_jsonl(path) -> Dict[Tuple[str, Optional[str]], List[AnnotatedToken]]:
    out: Dict[Tuple[str, Optional[str]], List[AnnotatedToken]] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            d = json.loads(line)
            tokens = [AnnotatedToken(surface=t["surface"], lemma=t["lemma"],
                                     coarse_pos=t["pos"],
                                     entity_tag=t.get("ne_tag"))
                      for t in d["tokens"]]
            out[(d["article_title"], d.get("section_title"))] = tokens
    return out
