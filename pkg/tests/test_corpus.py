import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from cmekselect.corpus import (
    Document,
    LabeledCorpus,
    SplitSpec,
    load_corpus,
    load_manifest,
    preprocess,
    save_corpus,
    stratified_folds,
)

from conftest import make_corpus


class TestPreprocess:
    def test_lowercase_and_strip(self):
        assert preprocess("The CAT makes me Happy.") == ["the", "cat", "makes", "me", "happy"]

    def test_empty(self):
        assert preprocess("") == []

    def test_apostrophe_and_exclamation(self):
        assert preprocess("don't stop!!") == ["dont", "stop"]

    def test_all_ascii_punctuation_removed(self):
        import string

        assert preprocess(string.punctuation) == []
        assert preprocess("a" + string.punctuation + "b") == ["ab"]

    def test_non_ascii_kept(self):
        assert preprocess("Café naïve") == ["café", "naïve"]

    @given(st.text())
    def test_idempotent(self, text):
        once = preprocess(text)
        assert preprocess(" ".join(once)) == once

    @given(st.text())
    def test_tokens_clean(self, text):
        import string

        for token in preprocess(text):
            assert token
            assert not set(token) & set(string.punctuation)


class TestLoadCorpus:
    def _write(self, tmp_path, lines):
        path = tmp_path / "corpus.jsonl"
        path.write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")
        return path

    def test_basic(self, tmp_path):
        path = self._write(
            tmp_path,
            ['{"text":"good","label":1}', '{"text":"bad","label":0}'],
        )
        corpus = load_corpus(path, "c")
        assert len(corpus) == 2
        assert [d.id for d in corpus.documents] == [0, 1]
        assert [d.tokens for d in corpus.documents] == [("good",), ("bad",)]
        assert [d.label for d in corpus.documents] == [1, 0]

    def test_invalid_label(self, tmp_path):
        path = self._write(tmp_path, ['{"text":"x","label":2}'])
        with pytest.raises(ValueError, match="invalid label at line 1"):
            load_corpus(path, "c")

    def test_bool_label_rejected(self, tmp_path):
        path = self._write(tmp_path, ['{"text":"x","label":true}'])
        with pytest.raises(ValueError, match="invalid label at line 1"):
            load_corpus(path, "c")

    def test_empty_file(self, tmp_path):
        path = self._write(tmp_path, [])
        with pytest.raises(ValueError, match="empty corpus"):
            load_corpus(path, "c")

    def test_malformed_line_names_lineno(self, tmp_path):
        path = self._write(tmp_path, ['{"text":"ok","label":0}', "{broken"])
        with pytest.raises(ValueError, match="malformed line 2"):
            load_corpus(path, "c")

    def test_missing_label_required(self, tmp_path):
        path = self._write(tmp_path, ['{"text":"x"}'])
        with pytest.raises(ValueError, match="missing label at line 1"):
            load_corpus(path, "c")
        corpus = load_corpus(path, "c", require_labels=False)
        assert corpus.documents[0].label is None

    @given(
        rows=st.lists(
            st.tuples(
                st.lists(st.text(alphabet="abcxyz09", min_size=1, max_size=6), max_size=5),
                st.one_of(st.none(), st.integers(0, 1)),
            ),
            min_size=1,
            max_size=8,
        )
    )
    def test_save_load_roundtrip(self, tmp_path_factory, rows):
        docs = [Document(tuple(tokens), label, i) for i, (tokens, label) in enumerate(rows)]
        corpus = LabeledCorpus("rt", tuple(docs), "orig")
        path = tmp_path_factory.mktemp("rt") / "c.jsonl"
        save_corpus(corpus, path)
        loaded = load_corpus(path, "rt", require_labels=False)
        assert [d.tokens for d in loaded.documents] == [d.tokens for d in corpus.documents]
        assert [d.label for d in loaded.documents] == [d.label for d in corpus.documents]
        assert [d.id for d in loaded.documents] == [d.id for d in corpus.documents]


class TestManifest:
    def test_roles_and_relative_paths(self, tmp_path):
        (tmp_path / "a.jsonl").write_text('{"text":"x y","label":1}\n{"text":"z","label":0}\n')
        (tmp_path / "t.jsonl").write_text('{"text":"unlabeled"}\n')
        manifest = tmp_path / "manifest.json"
        manifest.write_text(
            json.dumps(
                [
                    {"name": "a", "path": "a.jsonl", "role": "candidate"},
                    {"name": "t", "path": "t.jsonl", "role": "target"},
                ]
            )
        )
        entries = load_manifest(manifest)
        assert [(role, c.name) for role, c in entries] == [("candidate", "a"), ("target", "t")]

    def test_duplicate_names_rejected(self, tmp_path):
        (tmp_path / "a.jsonl").write_text('{"text":"x","label":1}\n')
        manifest = tmp_path / "manifest.json"
        manifest.write_text(
            json.dumps(
                [
                    {"name": "a", "path": "a.jsonl", "role": "candidate"},
                    {"name": "a", "path": "a.jsonl", "role": "candidate"},
                ]
            )
        )
        with pytest.raises(ValueError, match="duplicate corpus name"):
            load_manifest(manifest)


def _balanced_corpus(n_pos, n_neg):
    rows = [(f"pos text {i}", 1) for i in range(n_pos)]
    rows += [(f"neg text {i}", 0) for i in range(n_neg)]
    return make_corpus("bal", rows)


class TestStratifiedFolds:
    def test_two_folds_balanced(self):
        corpus = _balanced_corpus(5, 5)
        folds = stratified_folds(corpus, SplitSpec(2, seed=7))
        assert len(folds) == 2
        tests = [test for _, test in folds]
        assert tests[0] | tests[1] == set(range(10))
        assert not tests[0] & tests[1]
        for test in tests:
            assert len(test) == 5
            positives = sum(corpus.documents[i].label for i in test)
            assert positives in (2, 3)

    def test_deterministic(self):
        corpus = _balanced_corpus(5, 5)
        spec = SplitSpec(2, seed=7)
        assert stratified_folds(corpus, spec) == stratified_folds(corpus, spec)

    def test_single_positive_lands_in_one_fold(self):
        corpus = _balanced_corpus(1, 3)
        folds = stratified_folds(corpus, SplitSpec(2, seed=7))
        tests = [test for _, test in folds]
        assert sorted(len(t) for t in tests) == [2, 2]
        pos_hits = [
            sum(1 for i in test if corpus.documents[i].label == 1) for test in tests
        ]
        assert sorted(pos_hits) == [0, 1]

    def test_fold_count_exceeds_documents(self):
        corpus = _balanced_corpus(2, 2)
        with pytest.raises(ValueError, match="fold_count"):
            stratified_folds(corpus, SplitSpec(5, seed=0))

    def test_train_test_partition(self):
        corpus = _balanced_corpus(6, 9)
        for train_set, test_set in stratified_folds(corpus, SplitSpec(3, seed=1)):
            assert train_set | test_set == set(range(15))
            assert not train_set & test_set

    @given(st.integers(0, 2**32), st.permutations(range(12)))
    def test_order_invariance_via_ids(self, seed, perm):
        base = _balanced_corpus(6, 6)
        shuffled = LabeledCorpus("bal", tuple(base.documents[i] for i in perm), "test")
        spec = SplitSpec(3, seed)
        base_folds = stratified_folds(base, spec)
        shuf_folds = stratified_folds(shuffled, spec)
        # Compare by document id: position i in shuffled holds base doc perm[i].
        def id_sets(corpus, folds):
            return [
                frozenset(corpus.documents[i].id for i in test) for _, test in folds
            ]

        assert id_sets(base, base_folds) == id_sets(shuffled, shuf_folds)

    def test_requires_labels(self):
        corpus = make_corpus("u", [("a", 1), ("b", None), ("c", 0), ("d", 0)])
        with pytest.raises(ValueError, match="requires labels"):
            stratified_folds(corpus, SplitSpec(2, 0))


class TestTypes:
    def test_document_label_validation(self):
        with pytest.raises(ValueError):
            Document(("x",), 2, 0)

    def test_splitspec_validation(self):
        with pytest.raises(ValueError):
            SplitSpec(1, 0)
        with pytest.raises(ValueError):
            SplitSpec(2, -1)

    def test_strip_labels(self):
        corpus = make_corpus("c", [("a b", 1), ("c d", 0)])
        stripped = corpus.strip_labels()
        assert all(d.label is None for d in stripped.documents)
        assert [d.tokens for d in stripped.documents] == [d.tokens for d in corpus.documents]
