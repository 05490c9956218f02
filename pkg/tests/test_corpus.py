import hypothesis.strategies as st
import pytest
from hypothesis import given

from pva.corpus import corpus_stats, decode_bytes, load_split, strip_headers, Corpus
from pva.errors import EmptyClass, MissingSplit

from conftest import write_tree


@pytest.fixture
def two_by_two(tmp_path):
    write_tree(tmp_path, "train", {"b": ["x y", "z w"], "a": ["p q", "r s"]})
    return tmp_path


class TestLoadSplit:
    def test_fixture_two_classes(self, two_by_two):
        corpus = load_split(two_by_two, "train", False)
        assert len(corpus.documents) == 4
        assert corpus.label_names == ("a", "b")
        assert [d.id for d in corpus.documents] == ["a/0000", "a/0001", "b/0000", "b/0001"]
        assert [d.label_index for d in corpus.documents] == [0, 0, 1, 1]
        assert corpus.split_name == "train"

    def test_missing_split(self, two_by_two):
        with pytest.raises(MissingSplit):
            load_split(two_by_two, "dev", False)

    def test_empty_class(self, two_by_two):
        (two_by_two / "train" / "c").mkdir()
        with pytest.raises(EmptyClass):
            load_split(two_by_two, "train", False)

    def test_headers_kept_by_default(self, two_by_two):
        doc = load_split(two_by_two, "train").documents[0]
        assert doc.text.startswith("Subject: a 0\n\n")

    def test_strip_flag(self, two_by_two):
        doc = load_split(two_by_two, "train", True).documents[0]
        assert doc.text == "p q\n"

    def test_bydate_archive_alias(self, tmp_path):
        write_tree(tmp_path, "20news-bydate-test", {"a": ["x"]})
        corpus = load_split(tmp_path, "test")
        assert len(corpus) == 1 and corpus.split_name == "test"

    def test_deterministic_and_parallel_order(self, two_by_two):
        first = load_split(two_by_two, "train")
        assert load_split(two_by_two, "train") == first
        assert load_split(two_by_two, "train", workers=4) == first

    def test_latin1_fallback(self, tmp_path):
        d = tmp_path / "train" / "a"
        d.mkdir(parents=True)
        (d / "1").write_bytes(b"caf\xe9 ol\xe9")
        assert load_split(tmp_path, "train").documents[0].text == "café olé"


class TestStripHeaders:
    @pytest.mark.parametrize("raw, expected", [
        ("Subject: x\nFrom: y\n\nbody here", "body here"),
        ("no blank line at all", "no blank line at all"),
        ("\n\nbody", "body"),
        ("A: b\r\n\r\nwindows body", "windows body"),
    ])
    def test_examples(self, raw, expected):
        assert strip_headers(raw) == expected

    @given(st.text(alphabet="ab\n\r :", max_size=60))
    def test_reapplication_never_grows(self, text):
        once = strip_headers(text)
        assert len(strip_headers(once)) <= len(once) <= len(text)


def test_decode_prefers_utf8():
    assert decode_bytes("naïve".encode("utf-8")) == "naïve"


class TestCorpusStats:
    def test_fixture_counts(self, two_by_two):
        s = corpus_stats(load_split(two_by_two, "train"))
        assert s.per_label == {"a": 2, "b": 2}
        assert s.total == 4

    def test_empty(self):
        s = corpus_stats(Corpus((), (), "test"))
        assert s.total == 0 and s.per_label == {}

    def test_counts_sum(self, toy_root):
        s = corpus_stats(load_split(toy_root, "train"))
        assert sum(s.per_label.values()) == s.total == 10
