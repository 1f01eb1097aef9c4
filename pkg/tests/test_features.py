import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cmekselect.features import (
    FeatureDistribution,
    Vocabulary,
    build_vocabulary,
    export_pair_csv,
    feature_distribution,
    ngrams,
    tfidf_vectorize,
    top_k_support,
)
from cmekselect.corpus import LabeledCorpus

from conftest import make_corpus


class TestBuildVocabulary:
    def test_min_count_and_df_pass(self):
        rows = [("good " * 4 + "filler", 1)] * 2 + [("good good filler", 0)]
        rows += [("filler other", 0)] * 97
        corpus = make_corpus("c", rows)
        vocab = build_vocabulary(corpus, min_count=4, max_df_fraction=0.4)
        assert "good" in vocab.index  # 10 occurrences, df 3/100

    def test_high_df_excluded(self):
        rows = [("the common word", 1)] * 45 + [("the other word", 0)] * 45
        rows += [("rare word word word word word", 0)] * 10
        corpus = make_corpus("c", rows)
        vocab = build_vocabulary(corpus, min_count=4, max_df_fraction=0.4)
        assert "the" not in vocab.index  # df 0.9 > 0.4
        assert "word" not in vocab.index  # df 1.0

    def test_exactly_min_count_excluded(self):
        rows = [("edge keeper", 1)] * 4 + [("keeper", 0)] * 6 + [(f"p{i}", 0) for i in range(20)]
        corpus = make_corpus("c", rows)
        vocab = build_vocabulary(corpus, min_count=4, max_df_fraction=0.4)
        assert "edge" not in vocab.index  # exactly 4 occurrences: "more than 4" is strict
        assert "keeper" in vocab.index  # 10 occurrences, df 10/30

    def test_bigrams_included(self):
        rows = [("nice day here", 1)] * 10 + [(f"pad{i} pad{i} x", 0) for i in range(25)]
        corpus = make_corpus("c", rows)
        vocab = build_vocabulary(corpus, min_count=4, max_df_fraction=0.4)
        assert "nice day" in vocab.index
        assert "day here" in vocab.index

    def test_empty_vocabulary_error(self):
        corpus = make_corpus("c", [("solo tokens once", 1), ("another set", 0)])
        with pytest.raises(ValueError, match="no features survive"):
            build_vocabulary(corpus)

    def test_terms_sorted(self):
        rows = [("zeta alpha mid", 1)] * 8 + [(f"p{i}", 0) for i in range(30)]
        vocab = build_vocabulary(make_corpus("c", rows))
        assert list(vocab.terms) == sorted(vocab.terms)

    @given(st.permutations(range(20)))
    def test_order_invariance(self, perm):
        rows = [(f"tok{i % 4} tok{(i + 1) % 4} shared", i % 2) for i in range(20)]
        base = make_corpus("c", rows)
        shuffled = LabeledCorpus("c", tuple(base.documents[i] for i in perm), "t")
        va = build_vocabulary(base, min_count=2, max_df_fraction=0.9)
        vb = build_vocabulary(shuffled, min_count=2, max_df_fraction=0.9)
        assert va.terms == vb.terms
        assert np.array_equal(va.doc_freq, vb.doc_freq)


class TestTfidf:
    def test_zero_row_for_oov(self):
        fit = make_corpus("f", [("aa bb aa bb aa", 1)] * 6 + [("aa cc", 0)] * 6)
        vocab = build_vocabulary(fit, min_count=2, max_df_fraction=0.9)
        target = make_corpus("t", [("zz qq", 0)])
        rows = tfidf_vectorize(target, vocab).rows
        assert rows[0].nnz == 0

    def test_single_term_unit_entry(self):
        vocab = Vocabulary(("only",), np.array([3]), 5)
        doc_corpus = make_corpus("d", [("only words count", 1)])
        rows = tfidf_vectorize(doc_corpus, vocab).rows
        assert rows[0, 0] == pytest.approx(1.0)

    def test_weight_formula(self):
        # count=2, N=2, df=1 -> 2 * (1 + ln(3/2)) before normalization
        vocab = Vocabulary(("term", "zodd"), np.array([1, 2]), 2)
        corpus = make_corpus("d", [("term term", 1)])
        raw_weight = 2 * (1 + math.log(3 / 2))
        assert raw_weight == pytest.approx(2.8109302162163288, abs=1e-10)
        rows = tfidf_vectorize(corpus, vocab).rows
        # single active term: normalized to 1; check unnormalized via idf
        idf = vocab.idf()
        assert 2 * idf[0] == pytest.approx(raw_weight)
        assert rows[0, 0] == pytest.approx(1.0)

    def test_rows_unit_or_zero_norm(self):
        fit = make_corpus(
            "f", [(f"w{i % 5} w{(i + 2) % 5} w{i % 5}", i % 2) for i in range(30)]
        )
        vocab = build_vocabulary(fit, min_count=2, max_df_fraction=0.9)
        rows = tfidf_vectorize(fit, vocab).rows
        norms = np.sqrt(np.asarray(rows.multiply(rows).sum(axis=1)).ravel())
        assert np.all((np.abs(norms - 1) < 1e-12) | (norms == 0))


class TestTopKSupport:
    def test_hand_counts_with_bigrams(self):
        a = make_corpus("a", [("a b a", 1)])
        b = make_corpus("b", [("a b a", 0)])
        assert top_k_support(a, b, 2) == ("a", "a b")

    def test_k_exceeds_features(self):
        a = make_corpus("a", [("x y", 1)])
        b = make_corpus("b", [("x", 0)])
        support = top_k_support(a, b, 50)
        assert set(support) == {"x", "y", "x y"}

    def test_disjoint_union_ranked(self):
        a = make_corpus("a", [("p p p", 1)])
        b = make_corpus("b", [("q q", 0)])
        assert top_k_support(a, b, 2) == ("p", "q")

    def test_tie_break_lexicographic(self):
        a = make_corpus("a", [("m", 1)])
        b = make_corpus("b", [("z", 0)])
        assert top_k_support(a, b, 1) == ("m",)


class TestFeatureDistribution:
    def test_all_mass_on_hit(self):
        corpus = make_corpus("c", [("x x x", 1)])
        dist = feature_distribution(corpus, ("x", "y"))
        assert np.allclose(dist.mass, [1.0, 0.0])

    def test_uniform_fallback(self):
        corpus = make_corpus("c", [("zz", 1)])
        dist = feature_distribution(corpus, ("x", "y", "w"))
        assert np.allclose(dist.mass, [1 / 3] * 3)
        assert dist.token_total == 0

    def test_seeded_subsample_pinned(self):
        # 30 "x" + 10 "y" tokens, budget 20: the seeded hypergeometric draw
        # under seed 1234 yields counts [15, 5] (recorded once from running
        # the subsampler), i.e. exactly the expected [0.75, 0.25].
        corpus = make_corpus("c", [("x " * 30, 1), ("y " * 10, 0)])
        dist = feature_distribution(corpus, ("x", "y"), token_budget=20, seed=1234)
        assert dist.token_total == 20
        assert np.array_equal(dist.mass, np.array([15, 5]) / 20)

    def test_no_subsample_when_within_budget(self):
        corpus = make_corpus("c", [("x x y", 1)])
        dist = feature_distribution(corpus, ("x", "y"), token_budget=10, seed=0)
        assert np.allclose(dist.mass, [2 / 3, 1 / 3])
        assert dist.token_total == 3

    @given(st.integers(0, 2**31))
    def test_deterministic(self, seed):
        corpus = make_corpus("c", [("x " * 9 + "y " * 4, 1)])
        a = feature_distribution(corpus, ("x", "y"), token_budget=6, seed=seed)
        b = feature_distribution(corpus, ("x", "y"), token_budget=6, seed=seed)
        assert np.array_equal(a.mass, b.mass)

    @given(
        st.lists(st.sampled_from(["x", "y", "z", "w"]), min_size=0, max_size=40),
        st.one_of(st.none(), st.integers(1, 30)),
    )
    def test_mass_is_distribution(self, tokens, budget):
        corpus = make_corpus("c", [(" ".join(tokens), 1)])
        dist = feature_distribution(corpus, ("x", "y", "z"), token_budget=budget, seed=5)
        assert abs(dist.mass.sum() - 1.0) <= 1e-12
        assert np.all(dist.mass >= 0)

    def test_validation(self):
        with pytest.raises(ValueError, match="sum to 1"):
            FeatureDistribution(("a", "b"), np.array([0.5, 0.4]), 9)
        with pytest.raises(ValueError, match="non-negative"):
            FeatureDistribution(("a", "b"), np.array([1.5, -0.5]), 2)


class TestExport:
    def test_pair_csv(self, tmp_path):
        a = FeatureDistribution(("f1", "f2"), np.array([0.25, 0.75]), 4)
        b = FeatureDistribution(("f1", "f2"), np.array([0.5, 0.5]), 4)
        path = tmp_path / "pair.csv"
        export_pair_csv(a, b, path)
        content = path.read_text()
        assert content.splitlines()[0] == "feature,mass_a,mass_b"
        assert '"f1",0.25,0.5' in content

    def test_mismatched_support(self, tmp_path):
        a = FeatureDistribution(("f1",), np.array([1.0]), 1)
        b = FeatureDistribution(("f2",), np.array([1.0]), 1)
        with pytest.raises(ValueError, match="share support"):
            export_pair_csv(a, b, tmp_path / "x.csv")


def test_ngrams_order():
    assert ngrams(("a", "b", "c")) == ["a", "b", "c", "a b", "b c"]
