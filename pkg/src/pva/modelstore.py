"""Versioned binary model files.

Layout (all integers little-endian; see docs/model_format.md)::

    magic            4 bytes  b"PVA1"
    format_version   u32      1
    model_kind       u8       1 = linear, 2 = embedding
    header_length    u32
    header           UTF-8 JSON, sorted keys, no whitespace
    header_crc32     u32      CRC-32 of every preceding byte
    payload          float32 arrays, row-major
                     linear:    weights (K x D), biases (K)
                     embedding: input (V+B x dim), output (K x dim)
    vocabulary       u32 token count, then per token:
                     u32 byte length, UTF-8 bytes, u32 document frequency
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
import zlib
from pathlib import Path
from typing import BinaryIO, Optional, Union

import numpy as np

from .errors import (
    BadMagic,
    CorruptHeader,
    DimensionMismatch,
    IoFailure,
    KindMismatch,
    TruncatedPayload,
    UnsupportedVersion,
)
from .ftclass import EmbeddingModel
from .linclass import LinearModel
from .textproc import Vocabulary

MAGIC = b"PVA1"
FORMAT_VERSION = 1
KIND_LINEAR = 1
KIND_EMBEDDING = 2

_KIND_NAMES = {KIND_LINEAR: "linear", KIND_EMBEDDING: "embedding"}
_PREFIX = struct.Struct("<4sIBI")
_U32 = struct.Struct("<I")
_F32 = np.dtype("<f4")

Model = Union[LinearModel, EmbeddingModel]


def _header(model: Model, vocab: Vocabulary) -> tuple[int, dict]:
    common = {
        "label_names": list(model.label_names),
        "vocab_fingerprint": model.vocab_fingerprint,
        "vocab_size": len(vocab),
        "num_documents": vocab.num_documents,
        "config": model.config or {},
    }
    if isinstance(model, LinearModel):
        k, d = model.weights.shape
        return KIND_LINEAR, {"kind": "linear", "num_classes": k, "num_features": d, **common}
    if isinstance(model, EmbeddingModel):
        rows, dim = model.input_embeddings.shape
        return KIND_EMBEDDING, {
            "kind": "embedding",
            "num_classes": model.num_classes,
            "input_rows": rows,
            "dim": dim,
            "model_vocab_size": model.vocab_size,
            "max_n": model.max_n,
            "buckets": model.buckets,
            **common,
        }
    raise TypeError(f"cannot serialise {type(model).__name__}")


def _write_f32(f: BinaryIO, arr: np.ndarray) -> None:
    data = np.ascontiguousarray(arr, dtype=_F32)
    f.write(memoryview(data).cast("B"))


def write_model(f: BinaryIO, model: Model, vocab: Vocabulary) -> None:
    kind, header = _header(model, vocab)
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode("utf-8")
    prefix = _PREFIX.pack(MAGIC, FORMAT_VERSION, kind, len(header_bytes)) + header_bytes
    f.write(prefix)
    f.write(_U32.pack(zlib.crc32(prefix)))
    if kind == KIND_LINEAR:
        _write_f32(f, model.weights)
        _write_f32(f, model.biases)
    else:
        _write_f32(f, model.input_embeddings)
        _write_f32(f, model.output_weights)
    f.write(_U32.pack(len(vocab)))
    chunks = []
    for token, df in zip(vocab.tokens, vocab.doc_frequency.tolist()):
        raw = token.encode("utf-8")
        chunks.append(_U32.pack(len(raw)) + raw + _U32.pack(df))
    f.write(b"".join(chunks))


def save_model(model: Model, vocab: Vocabulary, path: str | Path) -> None:
    """Write atomically: a temp file in the target directory, then rename."""
    path = Path(path)
    try:
        fd, tmp = tempfile.mkstemp(prefix=path.name + ".", suffix=".tmp", dir=path.parent or ".")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
    try:
        with os.fdopen(fd, "wb") as f:
            write_model(f, model, vocab)
        umask = os.umask(0)
        os.umask(umask)
        os.chmod(tmp, 0o666 & ~umask)
        os.replace(tmp, path)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)


def _read_exact(f: BinaryIO, n: int, what: str) -> bytes:
    data = f.read(n)
    if len(data) != n:
        raise TruncatedPayload(f"file ends inside {what}")
    return data


def _read_f32(f: BinaryIO, shape: tuple[int, ...], what: str) -> np.ndarray:
    out = np.empty(shape, dtype=_F32)
    if f.readinto(memoryview(out).cast("B")) != out.nbytes:
        raise TruncatedPayload(f"file ends inside {what}")
    return out.astype(np.float32, copy=False)


def read_model(f: BinaryIO, expected_kind: Optional[str] = None) -> tuple[Model, Vocabulary]:
    head = f.read(_PREFIX.size)
    if len(head) < 4 or head[:4] != MAGIC:
        raise BadMagic(f"not a model file (magic {head[:4]!r})")
    if len(head) < _PREFIX.size:
        raise TruncatedPayload("file ends inside the fixed prefix")
    _, version, kind, header_length = _PREFIX.unpack(head)
    if version != FORMAT_VERSION:
        raise UnsupportedVersion(f"format version {version}, this reader handles {FORMAT_VERSION}")
    header_bytes = _read_exact(f, header_length, "the header")
    (crc,) = _U32.unpack(_read_exact(f, 4, "the header checksum"))
    if zlib.crc32(head + header_bytes) != crc:
        raise CorruptHeader("header checksum mismatch")
    try:
        header = json.loads(header_bytes.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptHeader(f"unreadable header: {exc}") from exc
    if _KIND_NAMES.get(kind) != header.get("kind"):
        raise CorruptHeader(f"kind byte {kind} disagrees with header kind {header.get('kind')!r}")
    if expected_kind is not None and header["kind"] != expected_kind:
        raise KindMismatch(f"expected a {expected_kind} model, file holds {header['kind']}")

    try:
        model, vocab = _read_body(f, kind, header)
    except (KeyError, TypeError, ValueError, DimensionMismatch) as exc:
        raise CorruptHeader(f"inconsistent header: {exc}") from exc
    if f.read(1):
        raise TruncatedPayload("trailing bytes after the vocabulary section")
    return model, vocab


def _read_body(f: BinaryIO, kind: int, header: dict) -> tuple[Model, Vocabulary]:
    label_names = tuple(header["label_names"])
    k = header["num_classes"]
    if k != len(label_names):
        raise CorruptHeader("num_classes disagrees with label_names")
    if kind == KIND_LINEAR:
        d = header["num_features"]
        weights = _read_f32(f, (k, d), "the weight matrix")
        biases = _read_f32(f, (k,), "the bias vector")
    else:
        rows, dim = header["input_rows"], header["dim"]
        w_in = _read_f32(f, (rows, dim), "the input embeddings")
        w_out = _read_f32(f, (k, dim), "the output matrix")

    (n_tokens,) = _U32.unpack(_read_exact(f, 4, "the vocabulary count"))
    if n_tokens != header["vocab_size"]:
        raise TruncatedPayload("vocabulary count disagrees with the header")
    tokens, dfs = [], []
    for _ in range(n_tokens):
        (length,) = _U32.unpack(_read_exact(f, 4, "the vocabulary"))
        tokens.append(_read_exact(f, length, "the vocabulary").decode("utf-8"))
        dfs.append(_U32.unpack(_read_exact(f, 4, "the vocabulary"))[0])
    vocab = Vocabulary(tuple(tokens), np.array(dfs, dtype=np.int64), header["num_documents"])

    config = header.get("config") or None
    if kind == KIND_LINEAR:
        model: Model = LinearModel(weights, biases, label_names, header["vocab_fingerprint"], config)
    else:
        model = EmbeddingModel(
            input_embeddings=w_in,
            output_weights=w_out,
            label_names=label_names,
            vocab_size=header["model_vocab_size"],
            max_n=header["max_n"],
            buckets=header["buckets"],
            vocab_fingerprint=header["vocab_fingerprint"],
            config=config,
        )
    return model, vocab


def load_model(path: str | Path, expected_kind: Optional[str] = None) -> tuple[Model, Vocabulary]:
    try:
        with open(path, "rb") as f:
            return read_model(f, expected_kind)
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
