"""Token annotation: lemmas, coarse POS, named-entity tags."""

from dyadnet.annotate import (DATE, LOCATION, NOUN, OTHER_NE, RELIGION,
                              annotate_text, lemmatize,
                              read_annotations_jsonl, write_annotations_jsonl)


class TestLemmatize:
    def test_plural_rules(self):
        assert lemmatize("armies") == "army"
        assert lemmatize("marches") == "march"
        assert lemmatize("fortresses") == "fortress"
        assert lemmatize("ships") == "ship"
        assert lemmatize("boxes") == "box"

    def test_protected_endings(self):
        assert lemmatize("glass") == "glass"
        assert lemmatize("census") == "census"
        assert lemmatize("crisis") == "crisis"

    def test_short_words_untouched(self):
        assert lemmatize("gas") == "gas"
        assert lemmatize("is") == "is"

    def test_lowercases(self):
        assert lemmatize("Harbors") == "harbor"


class TestAnnotateText:
    def test_surfaces_and_lemmas(self):
        toks = annotate_text("The harbors shelter fleets.")
        surfaces = [t.surface for t in toks]
        assert surfaces == ["The", "harbors", "shelter", "fleets"]
        by_surface = {t.surface: t for t in toks}
        assert by_surface["harbors"].lemma == "harbor"
        assert by_surface["fleets"].lemma == "fleet"

    def test_year_tagged_date(self):
        toks = {t.surface: t for t in annotate_text("It fell in 1873.")}
        assert toks["1873"].entity_tag == DATE

    def test_mid_sentence_capitals_are_entities(self):
        toks = {t.surface: t for t in
                annotate_text("The army reached Valoria quickly.")}
        assert toks["Valoria"].entity_tag == OTHER_NE
        assert toks["The"].entity_tag is None

    def test_sentence_initial_capital_not_entity(self):
        toks = annotate_text("Harbors are useful. Ships sail.")
        first = toks[0]
        assert first.surface == "Harbors"
        assert first.entity_tag is None
        ships = [t for t in toks if t.surface == "Ships"][0]
        assert ships.entity_tag is None  # follows a sentence boundary

    def test_known_gazetteer_tags(self):
        toks = {t.surface: t for t in
                annotate_text("Fought in Europe over Catholic lands.")}
        assert toks["Europe"].entity_tag == LOCATION
        assert toks["Catholic"].entity_tag == RELIGION

    def test_common_nouns_pos(self):
        toks = {t.surface: t for t in annotate_text("the iron mine")}
        assert toks["iron"].coarse_pos == NOUN
        assert toks["mine"].coarse_pos == NOUN

    def test_empty_text(self):
        assert annotate_text("") == []


class TestAnnotationsJsonl:
    def test_round_trip(self, tmp_path):
        docs = [
            ("Valoria", "Summary", annotate_text("Harbors and fleets of 1873.")),
            ("Valoria", None, annotate_text("Plain article text.")),
        ]
        path = tmp_path / "ann.jsonl"
        write_annotations_jsonl(path, docs)
        loaded = read_annotations_jsonl(path)
        assert set(loaded) == {("Valoria", "Summary"), ("Valoria", None)}
        assert loaded[("Valoria", "Summary")] == docs[0][2]
        assert loaded[("Valoria", None)] == docs[1][2]
