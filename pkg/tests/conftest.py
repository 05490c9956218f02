from __future__ import annotations

import numpy as np
import pytest

from pva.corpus import load_split
from pva.ftclass import FtConfig, train_ft
from pva.linclass import TrainConfig, train_logreg
from pva.pipeline import Classifier
from pva.textproc import build_vocab, tfidf_vector, tokenize

TOY_DOCS = {
    "a": [
        "turn on the kitchen lights please",
        "switch the lights on in the hall",
        "lights off in the bedroom now",
        "dim the living room lights",
        "turn off all lights downstairs",
    ],
    "b": [
        "question about my invoice payment",
        "billing question regarding last invoice",
        "refund for the duplicate payment charge",
        "invoice total looks wrong billing",
        "payment failed on my credit card",
    ],
}


def write_tree(root, split, classes):
    for name, texts in classes.items():
        d = root / split / name
        d.mkdir(parents=True, exist_ok=True)
        for i, t in enumerate(texts):
            (d / f"{i:04d}").write_text(f"Subject: {name} {i}\n\n{t}\n", encoding="utf-8")


@pytest.fixture(scope="session")
def toy_root(tmp_path_factory):
    root = tmp_path_factory.mktemp("toy")
    write_tree(root, "train", TOY_DOCS)
    write_tree(root, "test", {k: v[:3] for k, v in TOY_DOCS.items()})
    return root


@pytest.fixture(scope="session")
def toy_train(toy_root):
    corpus = load_split(toy_root, "train")
    docs = [tokenize(t) for t in corpus.texts]
    vocab, idf = build_vocab(docs)
    return corpus, docs, vocab, idf


@pytest.fixture(scope="session")
def toy_linear(toy_train):
    corpus, docs, vocab, idf = toy_train
    X = [tfidf_vector(d, vocab, idf) for d in docs]
    model = train_logreg(X, corpus.labels, TrainConfig(), num_features=len(vocab),
                         label_names=corpus.label_names, vocab_fingerprint=vocab.fingerprint())
    return model, vocab


@pytest.fixture(scope="session")
def toy_ft(toy_train):
    corpus, docs, vocab, _ = toy_train
    model = train_ft(docs, corpus.labels, vocab, FtConfig(dim=16, buckets=1024, epochs=50, lr0=0.5),
                     label_names=corpus.label_names)
    return model, vocab


@pytest.fixture(scope="session")
def toy_classifier(toy_linear):
    return Classifier(*toy_linear)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# Acceptance reporting: tests tagged ``@pytest.mark.criterion(n, title)`` are
# grouped by n; a criterion passes only if all of its tests pass.  Tests may
# attach a one-line detail through ``record_property("detail", ...)``.

_CRITERIA: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion this test checks")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or (rep.when != "call" and not rep.failed):
        return
    number, title = marker.args
    entry = _CRITERIA.setdefault(number, {"title": title, "ok": True, "details": [], "errors": []})
    if rep.failed:
        entry["ok"] = False
        entry["errors"].append(f"{item.name}: {rep.longrepr.reprcrash.message if hasattr(rep.longrepr, 'reprcrash') else rep.longrepr}")
    if rep.when == "call":
        entry["details"].extend(v for k, v in item.user_properties if k == "detail")


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        entry = _CRITERIA[number]
        status = "PASS" if entry["ok"] else "FAIL"
        terminalreporter.write_line(f"criterion {number:>2} {status}: {entry['title']}")
        for d in entry["details"]:
            terminalreporter.write_line(f"    {d}")
        for e in entry["errors"]:
            terminalreporter.write_line(f"    ! {e.splitlines()[0][:200]}")
