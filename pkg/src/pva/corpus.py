"""Loading the 20 Newsgroups "bydate" directory layout.

Layout: ``<root>/<split>/<class-name>/<doc-file>``.  The stock archive
extracts to ``20news-bydate-train`` / ``20news-bydate-test``; those names
are accepted as aliases for ``train`` / ``test``.
"""

from __future__ import annotations

import re
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .errors import EmptyClass, IoFailure, MissingSplit

_BLANK_LINE = re.compile(r"\r?\n\r?\n")


@dataclass(frozen=True)
class Document:
    id: str
    label_index: Optional[int]
    text: str


@dataclass(frozen=True)
class Corpus:
    label_names: tuple[str, ...]
    documents: tuple[Document, ...]
    split_name: str

    def __len__(self) -> int:
        return len(self.documents)

    @property
    def texts(self) -> list[str]:
        return [d.text for d in self.documents]

    @property
    def labels(self) -> list[Optional[int]]:
        return [d.label_index for d in self.documents]


@dataclass(frozen=True)
class CorpusStats:
    total: int
    per_label: dict[str, int]


def decode_bytes(raw: bytes) -> str:
    """UTF-8 if valid, otherwise Latin-1 (never fails, lossless)."""
    try:
        return raw.decode("utf-8")
    except UnicodeDecodeError:
        return raw.decode("latin-1")


def strip_headers(raw: str) -> str:
    """Return the text after the first blank line, or ``raw`` if there is none."""
    m = _BLANK_LINE.search(raw)
    if m is None:
        return raw
    return raw[m.end():]


def resolve_split_dir(root: str | Path, split_name: str) -> Path:
    root = Path(root)
    for candidate in (root / split_name, root / f"20news-bydate-{split_name}"):
        if candidate.is_dir():
            return candidate
    raise MissingSplit(f"no split directory {split_name!r} under {root}")


def _read(path: Path, strip: bool) -> str:
    try:
        text = decode_bytes(path.read_bytes())
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    return strip_headers(text) if strip else text


def load_split(
    root_path: str | Path,
    split_name: str,
    strip_headers_flag: bool = False,
    workers: int = 1,
) -> Corpus:
    split_dir = resolve_split_dir(root_path, split_name)
    try:
        class_dirs = sorted((p for p in split_dir.iterdir() if p.is_dir()), key=lambda p: p.name)
    except OSError as exc:
        raise IoFailure(f"cannot list {split_dir}: {exc}") from exc

    label_names = tuple(p.name for p in class_dirs)
    jobs: list[tuple[str, int, Path]] = []
    for label_index, class_dir in enumerate(class_dirs):
        files = sorted((p for p in class_dir.iterdir() if p.is_file()), key=lambda p: p.name)
        if not files:
            raise EmptyClass(f"class directory {class_dir} holds no files")
        for f in files:
            jobs.append((f"{class_dir.name}/{f.name}", label_index, f))

    # executor.map preserves submission order, so parallel reads keep sorted order
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            texts = list(pool.map(lambda j: _read(j[2], strip_headers_flag), jobs))
    else:
        texts = [_read(j[2], strip_headers_flag) for j in jobs]

    documents = tuple(
        Document(id=doc_id, label_index=label, text=text)
        for (doc_id, label, _), text in zip(jobs, texts)
    )
    return Corpus(label_names=label_names, documents=documents, split_name=split_name)


def corpus_stats(corpus: Corpus) -> CorpusStats:
    counts = Counter(d.label_index for d in corpus.documents if d.label_index is not None)
    per_label = {name: counts.get(i, 0) for i, name in enumerate(corpus.label_names)}
    return CorpusStats(total=len(corpus.documents), per_label=per_label)
