import warnings

import pytest
from hypothesis import given, strategies as st

from logsieve import annotation
from logsieve.errors import ValidationError

from conftest import build_document


def write_labels(path, rows, header="repo,run_id,line_index,annotator,label"):
    path.write_text(header + "\n" + "".join(f"{r}\n" for r in rows))


@pytest.fixture
def corpus_docs():
    return [
        build_document(["a", "b", "c"], repo="acme/widget", run_id="1"),
        build_document(["d", "e"], repo="acme/gadget", run_id="2"),
    ]


class TestImportLabels:
    def test_joins_rows(self, tmp_path, corpus_docs):
        path = tmp_path / "labels.csv"
        rows = []
        for doc in corpus_docs:
            for line in doc.lines:
                for who in ("ann1", "ann2"):
                    rows.append(f"{doc.repo},{doc.run_id},{line.index},{who},1")
        write_labels(path, rows)
        labeled = annotation.import_labels(path, corpus_docs)
        assert len(labeled) == 5
        assert labeled.annotator_ids == ("ann1", "ann2")

    def test_dangling_reference_rejected(self, tmp_path):
        doc = build_document(["x"] * 41, repo="meditohq/medito", run_id="9")
        path = tmp_path / "labels.csv"
        write_labels(path, ["meditohq/medito,9,999,ann1,1"])
        with pytest.raises(ValidationError, match="not present in the"):
            annotation.import_labels(path, [doc])

    def test_empty_body_is_valid(self, tmp_path, corpus_docs):
        path = tmp_path / "labels.csv"
        write_labels(path, [])
        labeled = annotation.import_labels(path, corpus_docs)
        assert len(labeled) == 0

    def test_schema_mismatch(self, tmp_path, corpus_docs):
        path = tmp_path / "labels.csv"
        path.write_text("repo,annotator,label\nacme/widget,ann1,1\n")
        with pytest.raises(ValidationError, match="missing columns"):
            annotation.import_labels(path, corpus_docs)

    def test_duplicate_rows_rejected(self, tmp_path, corpus_docs):
        path = tmp_path / "labels.csv"
        write_labels(
            path,
            ["acme/widget,1,0,ann1,1", "acme/widget,1,0,ann1,0"],
        )
        with pytest.raises(ValidationError, match="duplicate"):
            annotation.import_labels(path, corpus_docs)

    def test_non_binary_label_rejected(self, tmp_path, corpus_docs):
        path = tmp_path / "labels.csv"
        write_labels(path, ["acme/widget,1,0,ann1,2"])
        with pytest.raises(ValidationError, match="label must be 0 or 1"):
            annotation.import_labels(path, corpus_docs)

    def test_consensus_column_read_back(self, tmp_path, corpus_docs):
        path = tmp_path / "labels.csv"
        rows = []
        for doc in corpus_docs:
            for line in doc.lines:
                rows.append(f"{doc.repo},{doc.run_id},{line.index},ann1,1,0")
        write_labels(
            path, rows, header="repo,run_id,line_index,annotator,label,consensus"
        )
        labeled = annotation.import_labels(path, corpus_docs)
        assert labeled.consensus is not None
        assert set(labeled.consensus.values()) == {0}


class TestCohenKappa:
    def test_perfect_agreement_mixed_classes(self):
        assert annotation.cohen_kappa([1, 0, 1, 0], [1, 0, 1, 0]) == 1.0

    def test_hand_worked_example(self):
        # p_o = 0.75, p_e = 0.5
        assert annotation.cohen_kappa([1, 1, 0, 0], [1, 0, 0, 0]) == pytest.approx(0.5)

    def test_total_disagreement(self):
        assert annotation.cohen_kappa([1, 0], [0, 1]) == pytest.approx(-1.0)

    def test_length_mismatch(self):
        with pytest.raises(ValidationError, match="length"):
            annotation.cohen_kappa([1], [1, 0])

    def test_empty(self):
        with pytest.raises(ValidationError, match="non-empty"):
            annotation.cohen_kappa([], [])

    def test_degenerate_equal_constants(self):
        with pytest.warns(UserWarning, match="constant"):
            assert annotation.cohen_kappa([1, 1], [1, 1]) == 1.0

    def test_degenerate_unequal_constants(self):
        with pytest.warns(UserWarning, match="constant"):
            assert annotation.cohen_kappa([1, 1], [0, 0]) == 0.0

    @given(
        st.lists(st.integers(0, 1), min_size=1, max_size=40),
        st.lists(st.integers(0, 1), min_size=1, max_size=40),
    )
    def test_symmetry(self, a, b):
        n = min(len(a), len(b))
        a, b = a[:n], b[:n]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            assert annotation.cohen_kappa(a, b) == pytest.approx(
                annotation.cohen_kappa(b, a)
            )

    @given(st.lists(st.integers(0, 1), min_size=2, max_size=40))
    def test_self_agreement(self, a):
        if len(set(a)) < 2:
            return
        assert annotation.cohen_kappa(a, a) == pytest.approx(1.0)

    @given(
        st.lists(st.integers(0, 1), min_size=1, max_size=40),
        st.lists(st.integers(0, 1), min_size=1, max_size=40),
    )
    def test_relabeling_invariance(self, a, b):
        n = min(len(a), len(b))
        a, b = a[:n], b[:n]
        swapped_a = [1 - x for x in a]
        swapped_b = [1 - x for x in b]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            original = annotation.cohen_kappa(a, b)
            swapped = annotation.cohen_kappa(swapped_a, swapped_b)
        assert original == pytest.approx(swapped)
        assert -1.0 - 1e-12 <= original <= 1.0 + 1e-12


class TestMergeConsensus:
    def _corpus(self, a_labels, b_labels):
        entries = {
            ("acme/widget", "1", i): {"ann1": x, "ann2": y}
            for i, (x, y) in enumerate(zip(a_labels, b_labels))
        }
        return annotation.AnnotatedCorpus(
            entries=entries, annotator_ids=("ann1", "ann2")
        )

    def test_no_disagreements_empty_resolutions(self):
        corpus = self._corpus([1, 0, 1], [1, 0, 1])
        merged = annotation.merge_consensus(corpus, {})
        assert merged.consensus == {
            ("acme/widget", "1", 0): 1,
            ("acme/widget", "1", 1): 0,
            ("acme/widget", "1", 2): 1,
        }

    def test_full_resolution_set(self):
        a = [1, 0] * 21
        b = [0, 1] * 20 + [1, 0]
        corpus = self._corpus(a, b)
        disagreements = corpus.disagreements()
        assert len(disagreements) == 40
        merged = annotation.merge_consensus(
            corpus, {key: 1 for key in disagreements}
        )
        assert all(merged.consensus[key] == 1 for key in disagreements)

    def test_resolution_for_agreed_line_rejected(self):
        corpus = self._corpus([1, 1], [1, 1])
        with pytest.raises(ValidationError, match="already agree"):
            annotation.merge_consensus(corpus, {("acme/widget", "1", 0): 1})

    def test_missing_resolution_rejected(self):
        corpus = self._corpus([1, 0], [0, 0])
        with pytest.raises(ValidationError, match="missing"):
            annotation.merge_consensus(corpus, {})

    def test_wrong_annotator_count(self):
        entries = {("a/b", "1", 0): {"ann1": 1}}
        corpus = annotation.AnnotatedCorpus(entries=entries, annotator_ids=("ann1",))
        with pytest.raises(ValidationError, match="exactly 2"):
            annotation.merge_consensus(corpus, {})

    def test_consensus_all_or_nothing(self):
        with pytest.raises(ValidationError, match="cover all entries"):
            annotation.AnnotatedCorpus(
                entries={("a/b", "1", 0): {"x": 1}, ("a/b", "1", 1): {"x": 0}},
                annotator_ids=("x",),
                consensus={("a/b", "1", 0): 1},
            )


class TestConsensusExport:
    def test_round_trip_through_csv(self, tmp_path, corpus_docs):
        entries = {}
        for doc in corpus_docs:
            for key in doc.line_keys():
                entries[key] = {"ann1": 1, "ann2": 1}
        corpus = annotation.AnnotatedCorpus(entries=entries, annotator_ids=("ann1", "ann2"))
        merged = annotation.merge_consensus(corpus, {})
        path = tmp_path / "consensus.csv"
        annotation.export_consensus_csv(merged, path)
        reloaded = annotation.import_labels(path, corpus_docs)
        assert reloaded.consensus == merged.consensus
        assert reloaded.entries == merged.entries

    def test_consensus_vector_order(self, corpus_docs):
        entries = {}
        for doc in corpus_docs:
            for key in doc.line_keys():
                entries[key] = {"ann1": key[2] % 2, "ann2": key[2] % 2}
        corpus = annotation.AnnotatedCorpus(entries=entries, annotator_ids=("ann1", "ann2"))
        merged = annotation.merge_consensus(corpus, {})
        assert annotation.consensus_vector(merged, corpus_docs) == [0, 1, 0, 0, 1]
