"""Binary model container (see docs/model_format.md for the layout).

Header: 8-byte magic ``ATHALANG`` + u32 format version, then four
length-prefixed sections (u64 length + payload): params, registry,
vocabulary, trees. Each tree is a preorder node list; an internal node
is flag 0x01 + feature u32 + threshold f64, a leaf is flag 0x00 +
pair count u32 + (class u32, count u64) pairs. All integers little
endian. Writing is canonical, so identical models produce identical
bytes.
"""

from __future__ import annotations

import hashlib
import io
import struct
from pathlib import Path
from typing import BinaryIO, Union

from .corpus import ClassRegistry
from .features import Vocabulary
from .forest import (
    MODEL_FORMAT_VERSION,
    ForestModel,
    ForestParams,
    TreeNode,
    tree_from_preorder,
    tree_to_preorder,
)

MAGIC = b"ATHALANG"

_KIND_CODES = {"char": 0, "word": 1}
_KIND_NAMES = {code: kind for kind, code in _KIND_CODES.items()}


class ModelFormatError(Exception):
    """The stream is not a valid model file of a supported version."""


class _Reader:
    def __init__(self, data: bytes, label: str = "model file"):
        self._data = data
        self._pos = 0
        self._label = label

    def take(self, n: int) -> bytes:
        if self._pos + n > len(self._data):
            raise ModelFormatError(
                f"truncated {self._label}: needed {n} bytes at offset {self._pos}, "
                f"only {len(self._data) - self._pos} left"
            )
        out = self._data[self._pos : self._pos + n]
        self._pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def utf8(self) -> str:
        (length,) = self.unpack("<I")
        raw = self.take(length)
        try:
            return raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ModelFormatError(f"invalid UTF-8 in {self._label}: {exc}") from exc

    @property
    def exhausted(self) -> bool:
        return self._pos == len(self._data)

    @property
    def remaining(self) -> int:
        return len(self._data) - self._pos


def _pack_utf8(text: str) -> bytes:
    raw = text.encode("utf-8")
    return struct.pack("<I", len(raw)) + raw


def _params_bytes(params: ForestParams) -> bytes:
    if params.features_per_split is None:
        raise ValueError("cannot serialize unresolved params (features_per_split unset)")
    return struct.pack(
        "<IIIIBq",
        params.n_trees,
        params.max_depth or 0,
        params.min_samples_split,
        params.features_per_split,
        int(params.bootstrap),
        params.seed,
    )


def _read_params(reader: _Reader) -> ForestParams:
    n_trees, max_depth, min_split, per_split, bootstrap, seed = reader.unpack("<IIIIBq")
    if not reader.exhausted:
        raise ModelFormatError("params section has trailing bytes")
    return ForestParams(
        n_trees=n_trees,
        max_depth=max_depth or None,
        min_samples_split=min_split,
        features_per_split=per_split,
        bootstrap=bool(bootstrap),
        seed=seed,
    )


def _registry_bytes(registry: ClassRegistry) -> bytes:
    out = bytearray(struct.pack("<I", len(registry)))
    for index, name in registry.entries:
        out += struct.pack("<I", index)
        out += _pack_utf8(name)
    return bytes(out)


def _read_registry(reader: _Reader) -> ClassRegistry:
    (count,) = reader.unpack("<I")
    names = []
    for expected in range(count):
        (index,) = reader.unpack("<I")
        if index != expected:
            raise ModelFormatError(
                f"registry entries out of order: found class {index}, expected {expected}"
            )
        names.append(reader.utf8())
    if not reader.exhausted:
        raise ModelFormatError("registry section has trailing bytes")
    try:
        return ClassRegistry(tuple(names))
    except ValueError as exc:
        raise ModelFormatError(f"invalid registry: {exc}") from exc


def _vocabulary_bytes(vocab: Vocabulary) -> bytes:
    out = bytearray(
        struct.pack(
            "<BIIII",
            _KIND_CODES[vocab.kind],
            vocab.n_range[0],
            vocab.n_range[1],
            vocab.dimension,
            vocab.dimension,
        )
    )
    counts = vocab.counts or (0,) * vocab.dimension
    for index, gram in enumerate(vocab.ngrams_by_index()):
        out += _pack_utf8(gram)
        out += struct.pack("<Q", counts[index])
    return bytes(out)


def _read_vocabulary(reader: _Reader) -> Vocabulary:
    kind_code, n_min, n_max, dimension, n_entries = reader.unpack("<BIIII")
    if kind_code not in _KIND_NAMES:
        raise ModelFormatError(f"unknown vocabulary kind code {kind_code}")
    if n_entries != dimension:
        raise ModelFormatError(
            f"vocabulary says dimension {dimension} but carries {n_entries} entries"
        )
    ngram_to_index = {}
    counts = []
    for index in range(n_entries):
        gram = reader.utf8()
        (count,) = reader.unpack("<Q")
        if gram in ngram_to_index:
            raise ModelFormatError(f"duplicate vocabulary n-gram {gram!r}")
        ngram_to_index[gram] = index
        counts.append(count)
    if not reader.exhausted:
        raise ModelFormatError("vocabulary section has trailing bytes")
    try:
        return Vocabulary(
            ngram_to_index=ngram_to_index,
            n_range=(n_min, n_max),
            dimension=dimension,
            kind=_KIND_NAMES[kind_code],
            counts=tuple(counts),
        )
    except ValueError as exc:
        raise ModelFormatError(f"invalid vocabulary: {exc}") from exc


def _tree_bytes(root: TreeNode) -> bytes:
    out = bytearray()
    for item in tree_to_preorder(root):
        if item[0] == 1:
            out += struct.pack("<BId", 1, item[1], item[2])
        else:
            pairs = item[1]
            out += struct.pack("<BI", 0, len(pairs))
            for class_index, count in pairs:
                out += struct.pack("<IQ", class_index, count)
    return bytes(out)


def _read_tree(reader: _Reader, dimension: int, n_classes: int) -> TreeNode:
    items = []
    while not reader.exhausted:
        (flag,) = reader.unpack("<B")
        if flag == 1:
            feature, threshold = reader.unpack("<Id")
            if feature >= dimension:
                raise ModelFormatError(
                    f"tree references feature {feature}, model dimension is {dimension}"
                )
            items.append((1, feature, threshold))
        elif flag == 0:
            (n_pairs,) = reader.unpack("<I")
            if n_pairs == 0:
                raise ModelFormatError("leaf with no class counts")
            pairs = []
            for _ in range(n_pairs):
                class_index, count = reader.unpack("<IQ")
                if class_index >= n_classes:
                    raise ModelFormatError(
                        f"leaf references class {class_index}, registry has {n_classes}"
                    )
                pairs.append((class_index, count))
            items.append((0, tuple(pairs)))
        else:
            raise ModelFormatError(f"invalid tree node flag byte 0x{flag:02x}")
    try:
        return tree_from_preorder(items)
    except ValueError as exc:
        raise ModelFormatError(f"malformed tree: {exc}") from exc


def _trees_bytes(trees: list[TreeNode]) -> bytes:
    out = bytearray(struct.pack("<I", len(trees)))
    for tree in trees:
        encoded = _tree_bytes(tree)
        out += struct.pack("<Q", len(encoded))
        out += encoded
    return bytes(out)


def _read_trees(reader: _Reader, dimension: int, n_classes: int) -> list[TreeNode]:
    (n_trees,) = reader.unpack("<I")
    trees = []
    for index in range(n_trees):
        (length,) = reader.unpack("<Q")
        sub = _Reader(reader.take(length), label=f"tree {index}")
        trees.append(_read_tree(sub, dimension, n_classes))
    if not reader.exhausted:
        raise ModelFormatError("trees section has trailing bytes")
    return trees


def model_bytes(model: ForestModel) -> bytes:
    """Serialize a model to its canonical byte string."""
    out = bytearray(MAGIC)
    out += struct.pack("<I", model.format_version)
    for payload in (
        _params_bytes(model.params),
        _registry_bytes(model.registry),
        _vocabulary_bytes(model.vocabulary),
        _trees_bytes(model.trees),
    ):
        out += struct.pack("<Q", len(payload))
        out += payload
    return bytes(out)


def save_model(model: ForestModel, destination: Union[str, Path, BinaryIO]) -> None:
    data = model_bytes(model)
    if isinstance(destination, (str, Path)):
        Path(destination).write_bytes(data)
    else:
        destination.write(data)


def load_model(source: Union[str, Path, BinaryIO, bytes]) -> ForestModel:
    """Parse a model file; raises ModelFormatError on any structural
    problem (bad magic or version, truncation, corrupt sections)."""
    if isinstance(source, (str, Path)):
        data = Path(source).read_bytes()
    elif isinstance(source, bytes):
        data = source
    else:
        data = source.read()
    reader = _Reader(data)
    magic = reader.take(len(MAGIC))
    if magic != MAGIC:
        raise ModelFormatError(f"bad magic: found {magic!r}, expected {MAGIC!r}")
    (version,) = reader.unpack("<I")
    if version != MODEL_FORMAT_VERSION:
        raise ModelFormatError(
            f"unsupported format version: found {version}, expected {MODEL_FORMAT_VERSION}"
        )
    sections = []
    for name in ("params", "registry", "vocabulary", "trees"):
        (length,) = reader.unpack("<Q")
        sections.append(_Reader(reader.take(length), label=f"{name} section"))
    if not reader.exhausted:
        raise ModelFormatError(f"{reader.remaining} trailing bytes after trees section")
    params = _read_params(sections[0])
    registry = _read_registry(sections[1])
    vocabulary = _read_vocabulary(sections[2])
    trees = _read_trees(sections[3], vocabulary.dimension, len(registry))
    if len(trees) != params.n_trees:
        raise ModelFormatError(
            f"trees section holds {len(trees)} trees, params say {params.n_trees}"
        )
    return ForestModel(
        params=params,
        trees=trees,
        vocabulary=vocabulary,
        registry=registry,
        format_version=version,
    )


def fingerprint(source: Union[str, Path, bytes, ForestModel]) -> str:
    """sha256 hex digest of a model file's bytes."""
    if isinstance(source, ForestModel):
        data = model_bytes(source)
    elif isinstance(source, (str, Path)):
        data = Path(source).read_bytes()
    else:
        data = source
    return hashlib.sha256(data).hexdigest()
