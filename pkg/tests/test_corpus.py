"""Tests for corpus I/O, partial-dataset construction and synthetic generation."""

import numpy as np
import pytest

from taxex.corpus import (
    Corpus,
    Sentence,
    SplitSpec,
    SyntheticSpec,
    Token,
    build_overlapping_setup,
    build_subtype_setup,
    final_view,
    generate_synthetic_corpus,
    plan_disjoint,
    read_conll,
    repair_bio,
    side_view,
    split_and_scrub,
    subsample_per_type,
    with_gold_pairs,
    write_conll,
)
from taxex.errors import (
    DisjointSubsetsError,
    EmptyCorpusError,
    NoSubtypesError,
    ParseError,
    TaxexError,
    TaxexWarning,
)
from taxex.taxonomy import RelationKind


def sentence(*pairs, fine=None):
    toks = [Token(t, observed=tag) for t, tag in pairs]
    if fine:
        for tok, f in zip(toks, fine):
            tok.fine = f
    return Sentence(toks)


class TestBioRepair:
    def test_orphan_i_becomes_b(self):
        assert repair_bio(["O", "I-LOC"]) == ["O", "B-LOC"]

    def test_label_switch_becomes_b(self):
        assert repair_bio(["B-PER", "I-LOC"]) == ["B-PER", "B-LOC"]

    def test_well_formed_untouched(self):
        tags = ["B-PER", "I-PER", "O", "B-LOC"]
        assert repair_bio(tags) == tags

    def test_leading_i(self):
        assert repair_bio(["I-ORG", "I-ORG"]) == ["B-ORG", "I-ORG"]


class TestConllIO:
    def test_single_token(self, tmp_path):
        path = tmp_path / "c.conll"
        path.write_text("John B-PER\n\n", encoding="utf-8")
        corpus = read_conll(path)
        assert len(corpus) == 1
        assert corpus.sentences[0].tokens[0].text == "John"
        assert corpus.sentences[0].tokens[0].observed == "B-PER"

    def test_orphan_repaired_on_ingestion(self, tmp_path):
        path = tmp_path / "c.conll"
        path.write_text("went I-LOC\n\n", encoding="utf-8")
        corpus = read_conll(path)
        assert corpus.sentences[0].tokens[0].observed == "B-LOC"

    def test_malformed_line_reports_number(self, tmp_path):
        path = tmp_path / "c.conll"
        path.write_text("a B-PER\nb B-PER extra\n", encoding="utf-8")
        with pytest.raises(ParseError, match="line 2"):
            read_conll(path)

    def test_empty_file_rejected(self, tmp_path):
        path = tmp_path / "c.conll"
        path.write_text("\n\n", encoding="utf-8")
        with pytest.raises(EmptyCorpusError):
            read_conll(path)

    def test_roundtrip_bytes(self, tmp_path):
        src = tmp_path / "a.conll"
        src.write_text("John B-PER\nruns O\n\nBBC B-ORG\n\n", encoding="utf-8")
        corpus = read_conll(src)
        out1 = tmp_path / "b.conll"
        write_conll(corpus, out1)
        out2 = tmp_path / "c.conll"
        write_conll(read_conll(out1), out2)
        assert out1.read_bytes() == out2.read_bytes()
        assert out1.read_text(encoding="utf-8") == src.read_text(encoding="utf-8")

    def test_two_level_tags(self, tmp_path):
        path = tmp_path / "c.conll"
        path.write_text("James B-Person.Actor\nSmith I-Person.Actor\n\n", encoding="utf-8")
        corpus = read_conll(path)
        tok = corpus.sentences[0].tokens[0]
        assert tok.observed == "B-Person"
        assert tok.fine == "B-Person.Actor"
        out = tmp_path / "o.conll"
        write_conll(corpus, out)
        assert out.read_text(encoding="utf-8").splitlines()[0] == "James B-Person.Actor"


class TestSplitAndScrub:
    def make_full(self, n_types, sentences, seed=0):
        spec = SyntheticSpec(n_types=n_types, sentences=sentences, density=0.3, seed=seed)
        return generate_synthetic_corpus(spec)

    def test_nine_nine_split(self):
        full = self.make_full(18, 120)
        types = full.observed_types()
        spec = SplitSpec({t: ("A" if i < 9 else "B") for i, t in enumerate(types)},
                         sentence_split_seed=3)
        d_a, d_b = split_and_scrub(full, spec)
        assert len(d_a.observed_types()) == 9
        assert len(d_b.observed_types()) == 9

    def test_seventeen_one_split(self):
        full = self.make_full(18, 150)
        types = full.observed_types()
        spec = SplitSpec({t: ("A" if i < 17 else "B") for i, t in enumerate(types)},
                         sentence_split_seed=3)
        _, d_b = split_and_scrub(full, spec)
        assert len(d_b.observed_types()) == 1

    def test_scrub_rewrites_other_side_to_o(self):
        # sentence gold (Org, O, Per) with Per on side A: observed in the
        # side-A view becomes (O, O, B-Per)
        full = Corpus([sentence(("BBC", "B-Org"), ("hired", "O"), ("Robert", "B-Per"))])
        plan = plan_disjoint({"Per": "A", "Org": "B"})
        paired = with_gold_pairs(full, plan)
        d_a = side_view(paired, "A")
        assert d_a.sentences[0].observed_tags() == ["O", "O", "B-Per"]
        d_b = side_view(paired, "B")
        assert d_b.sentences[0].observed_tags() == ["B-Org", "O", "O"]

    def test_partition_is_disjoint_and_complete(self):
        full = self.make_full(4, 40)
        spec = SplitSpec({t: ("A" if i < 2 else "B")
                          for i, t in enumerate(full.observed_types())},
                         sentence_split_seed=9, ratio=0.5)
        d_a, d_b = split_and_scrub(full, spec)
        assert len(d_a) + len(d_b) == len(full)
        texts = lambda c: sorted(" ".join(s.texts()) for s in c.sentences)
        assert sorted(texts(d_a) + texts(d_b)) == texts(full)

    def test_scrub_soundness(self):
        full = self.make_full(6, 60)
        types = full.observed_types()
        split = {t: ("A" if i < 3 else "B") for i, t in enumerate(types)}
        e_b = {t for t, s in split.items() if s == "B"}
        d_a, _ = split_and_scrub(full, SplitSpec(split, sentence_split_seed=1))
        for sent in d_a.sentences:
            for tok in sent.tokens:
                if tok.observed != "O":
                    assert tok.observed.partition("-")[2] not in e_b
                # every side-A gold mention survives untouched
                assert tok.observed == tok.gold[0]

    def test_ratio_bounds(self):
        with pytest.raises(TaxexError):
            SplitSpec({"T": "A"}, ratio=1.0)


class TestSubtypeSetup:
    def make_two_level(self):
        spec = SyntheticSpec(n_types=2, sentences=80, density=0.3, seed=5,
                             subtypes_per_coarse=3)
        return generate_synthetic_corpus(spec)

    def test_relation_and_views(self):
        full = self.make_two_level()
        d_a, d_b, tax = build_subtype_setup(full, {"C1": "A", "C2": "B"}, "C1",
                                            ["C1f1", "C1f2"], seed=0)
        assert tax.relations.get("C1", "C1f1") is RelationKind.SUPERTYPE
        assert tax.relations.get("C1f1", "C1") is RelationKind.SUBTYPE
        assert set(tax.e_b) == {"C2", "C1f1", "C1f2"}

    def test_token_views_follow_gold(self):
        full = self.make_two_level()
        d_a, d_b, _ = build_subtype_setup(full, {"C1": "A", "C2": "B"}, "C1",
                                          ["C1f1"], seed=0, ratio=0.5)
        for corpus, idx in ((d_a, 0), (d_b, 1)):
            for sent in corpus.sentences:
                for tok in sent.tokens:
                    assert tok.observed == tok.gold[idx]
        # a C1f1 mention is observed B-C1 on side A and B-C1f1 on side B
        plan_pairs = with_gold_pairs(full, __import__("taxex.corpus", fromlist=["plan_subtype"])
                                     .plan_subtype({"C1": "A", "C2": "B"}, "C1", ["C1f1"]))
        seen_a = seen_b = False
        for sent in plan_pairs.sentences:
            for tok in sent.tokens:
                if tok.fine and tok.fine.endswith("C1.C1f1") and tok.fine.startswith("B-"):
                    assert tok.gold == ("B-C1", "B-C1f1")
                    seen_a = seen_b = True
        assert seen_a and seen_b

    def test_unselected_fine_stays_o_on_side_b(self):
        full = self.make_two_level()
        from taxex.corpus import plan_subtype
        paired = with_gold_pairs(full, plan_subtype({"C1": "A", "C2": "B"}, "C1", ["C1f1"]))
        hit = False
        for sent in paired.sentences:
            for tok in sent.tokens:
                if tok.fine and "C1.C1f2" in tok.fine:
                    assert tok.gold[1] == "O"
                    assert tok.gold[0].endswith("C1")
                    hit = True
        assert hit

    def test_empty_selection_rejected(self):
        full = self.make_two_level()
        with pytest.raises(NoSubtypesError):
            build_subtype_setup(full, {"C1": "A", "C2": "B"}, "C1", [], seed=0)


class TestOverlappingSetup:
    def make_two_level(self):
        spec = SyntheticSpec(n_types=2, sentences=80, density=0.3, seed=6,
                             subtypes_per_coarse=3)
        return generate_synthetic_corpus(spec)

    def test_membership_rules(self):
        full = self.make_two_level()
        from taxex.corpus import plan_overlapping
        plan = plan_overlapping({"C1": "A", "C2": "B"}, "C1",
                                ["C1f1", "C1f2"], ["C1f2", "C1f3"])
        assert plan.taxonomy.relations.get("C1_A", "C1_B") is RelationKind.OVERLAPPING
        paired = with_gold_pairs(full, plan)
        cases = {"C1f1": ("B-C1_A", "O"), "C1f2": ("B-C1_A", "B-C1_B"),
                 "C1f3": ("O", "B-C1_B")}
        seen = set()
        for sent in paired.sentences:
            for tok in sent.tokens:
                if tok.fine and tok.fine.startswith("B-C1."):
                    fine = tok.fine.split(".", 1)[1]
                    assert tok.gold == cases[fine]
                    seen.add(fine)
        assert seen == set(cases)

    def test_disjoint_subsets_rejected(self):
        full = self.make_two_level()
        with pytest.raises(DisjointSubsetsError):
            build_overlapping_setup(full, "C1", ["C1f1"], ["C1f3"], seed=0)

    def test_builder_returns_sides(self):
        full = self.make_two_level()
        d_a, d_b, tax = build_overlapping_setup(full, "C1", ["C1f1", "C1f2"],
                                                ["C1f2", "C1f3"], seed=0)
        assert "C1_A" in tax.e_a and "C1_B" in tax.e_b
        assert len(d_a) + len(d_b) == len(full)


class TestSubsample:
    def make_d_b(self, seed=0, sentences=120):
        spec = SyntheticSpec(n_types=4, sentences=sentences, density=0.3, seed=seed)
        full = generate_synthetic_corpus(spec)
        split = {t: ("A" if i < 2 else "B") for i, t in enumerate(full.observed_types())}
        return split_and_scrub(full, SplitSpec(split, sentence_split_seed=2))[1]

    def test_each_type_covered(self):
        d_b = self.make_d_b()
        k = 5
        sub = subsample_per_type(d_b, k, seed=1)
        for t in d_b.observed_types():
            n = sum(1 for s in sub.sentences
                    if any(tok.observed == f"B-{t}" for tok in s.tokens))
            assert n >= min(k, 1)

    def test_k_larger_than_corpus_returns_everything(self):
        d_b = self.make_d_b()
        with pytest.warns(TaxexWarning):
            sub = subsample_per_type(d_b, 10_000, seed=1)
        assert len(sub) == len(d_b)

    def test_deterministic(self):
        d_b = self.make_d_b()
        a = subsample_per_type(d_b, 3, seed=9)
        b = subsample_per_type(d_b, 3, seed=9)
        assert [s.texts() for s in a.sentences] == [s.texts() for s in b.sentences]

    def test_monotone_in_k(self):
        d_b = self.make_d_b()
        for k1, k2 in ((1, 2), (2, 5), (5, 11)):
            small = {" ".join(s.texts()) for s in subsample_per_type(d_b, k1, seed=4).sentences}
            big = {" ".join(s.texts()) for s in subsample_per_type(d_b, k2, seed=4).sentences}
            assert small <= big

    def test_k_must_be_positive(self):
        with pytest.raises(TaxexError):
            subsample_per_type(self.make_d_b(), 0, seed=1)


class TestSyntheticGenerator:
    def test_deterministic_under_seed(self):
        spec = SyntheticSpec(n_types=4, sentences=200, density=0.2, seed=7)
        a = generate_synthetic_corpus(spec)
        b = generate_synthetic_corpus(spec)
        assert [s.texts() for s in a.sentences] == [s.texts() for s in b.sentences]
        assert [s.observed_tags() for s in a.sentences] == \
            [s.observed_tags() for s in b.sentences]

    def test_entity_token_fraction_tracks_density(self):
        spec = SyntheticSpec(n_types=4, sentences=2000, density=0.2, seed=7,
                             min_len=8, max_len=16)
        corpus = generate_synthetic_corpus(spec)
        entity = sum(1 for s in corpus.sentences for t in s.tokens if t.observed != "O")
        frac = entity / corpus.n_tokens()
        assert abs(frac - 0.2) <= 0.02

    def test_minimal_two_type_spec(self):
        corpus = generate_synthetic_corpus(SyntheticSpec(n_types=2, sentences=50,
                                                         density=0.3, seed=1))
        assert corpus.observed_types() == ("T1", "T2")

    def test_two_level_gold(self):
        corpus = generate_synthetic_corpus(SyntheticSpec(n_types=2, sentences=50,
                                                         density=0.3, seed=1,
                                                         subtypes_per_coarse=2))
        fines = {t.fine.partition("-")[2] for s in corpus.sentences
                 for t in s.tokens if t.fine}
        assert fines == {"C1.C1f1", "C1.C1f2", "C2.C2f1", "C2.C2f2"}

    def test_spec_validation(self):
        with pytest.raises(TaxexError):
            SyntheticSpec(n_types=1)
        with pytest.raises(TaxexError):
            SyntheticSpec(density=0.0)

    def test_bio_structure_well_formed(self):
        corpus = generate_synthetic_corpus(SyntheticSpec(n_types=3, sentences=100,
                                                         density=0.4, seed=2))
        for s in corpus.sentences:
            tags = s.observed_tags()
            assert tags == repair_bio(tags)


class TestFinalView:
    def test_projects_gold_pairs(self):
        full = Corpus([sentence(("BBC", "B-Org"), ("hired", "O"), ("Robert", "B-Per"))])
        plan = plan_disjoint({"Per": "A", "Org": "B"})
        fv = final_view(with_gold_pairs(full, plan), plan.taxonomy)
        assert fv.sentences[0].observed_tags() == ["B-B:Org", "O", "B-A:Per"]
        assert fv.label_space == plan.taxonomy.space.tags
