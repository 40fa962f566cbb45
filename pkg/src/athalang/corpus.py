"""Corpus ingestion: Leipzig/plain sentence files, dataset manifests,
class registries and the deterministic stratified train/test split."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence, TextIO

from .features import normalize
from .rng import SplitMix64
from .validation import check_fraction

logger = logging.getLogger(__name__)

MANIFEST_FORMATS = ("leipzig", "plain")


class CorpusError(Exception):
    """Fatal corpus problem: unreadable file, bad manifest, empty class."""


@dataclass(frozen=True)
class RawSentence:
    line_number: int
    text: str


@dataclass(frozen=True)
class ParseError:
    """One recoverable bad line, located by physical line number."""

    line_number: int
    reason: str


@dataclass(frozen=True)
class ClassRegistry:
    """Class index -> language name, indices contiguous from 0."""

    names: tuple[str, ...]

    def __post_init__(self):
        if not self.names:
            raise ValueError("registry must contain at least one class")
        if len(set(self.names)) != len(self.names):
            raise ValueError("registry language names must be unique")
        if any(not n for n in self.names):
            raise ValueError("registry language names must be non-empty")

    def __len__(self) -> int:
        return len(self.names)

    @property
    def entries(self) -> list[tuple[int, str]]:
        return list(enumerate(self.names))

    def name_of(self, class_index: int) -> str:
        return self.names[class_index]

    def index_of(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise ValueError(
                f"language {name!r} not in registry; known languages: "
                + ", ".join(self.names)
            ) from None

    @classmethod
    def generic(cls, n_classes: int) -> "ClassRegistry":
        return cls(tuple(f"class-{i}" for i in range(n_classes)))


@dataclass(frozen=True)
class LabeledSentence:
    text: str
    label: int


@dataclass(frozen=True)
class ManifestRow:
    language: str
    class_index: int
    path: Path
    format: str


@dataclass
class SplitDataset:
    train: list[LabeledSentence]
    test: list[LabeledSentence]
    seed: int
    test_fraction: float


def parse_leipzig(stream: Iterable[str]) -> tuple[list[RawSentence], list[ParseError]]:
    """Parse `<integer><TAB><sentence>` lines.

    Returns the sentences in file order plus per-line errors for
    malformed lines (missing tab, non-integer prefix, empty sentence).
    Blank lines are skipped; empty input is an empty result.
    """
    sentences: list[RawSentence] = []
    errors: list[ParseError] = []
    for lineno, line in enumerate(stream, start=1):
        line = line.rstrip("\n").rstrip("\r")
        if not line.strip():
            continue
        prefix, tab, text = line.partition("\t")
        if not tab:
            errors.append(ParseError(lineno, "no TAB separator"))
            continue
        try:
            number = int(prefix)
        except ValueError:
            errors.append(ParseError(lineno, f"non-integer line prefix {prefix!r}"))
            continue
        if number < 1:
            errors.append(ParseError(lineno, f"line prefix must be >= 1, got {number}"))
            continue
        if not text.strip():
            errors.append(ParseError(lineno, "empty sentence text"))
            continue
        sentences.append(RawSentence(number, text.strip()))
    return sentences, errors


def parse_plain(stream: Iterable[str]) -> list[RawSentence]:
    """One sentence per line; blank lines skipped; numbered by line."""
    out = []
    for lineno, line in enumerate(stream, start=1):
        text = line.strip()
        if text:
            out.append(RawSentence(lineno, text))
    return out


def read_manifest(path: str | Path) -> list[ManifestRow]:
    """Read a tab-separated manifest.

    Columns: language_name, class_index, path, format; `#` comment lines
    and blank lines are ignored. Relative paths are resolved against the
    manifest's own directory.
    """
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise CorpusError(f"cannot read manifest {path}: {exc}") from exc
    rows: list[ManifestRow] = []
    for lineno, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 4:
            raise CorpusError(
                f"{path}:{lineno}: expected 4 tab-separated columns, got {len(parts)}"
            )
        language, class_str, file_path, fmt = (p.strip() for p in parts)
        try:
            class_index = int(class_str)
        except ValueError:
            raise CorpusError(f"{path}:{lineno}: class_index {class_str!r} is not an integer")
        if class_index < 0:
            raise CorpusError(f"{path}:{lineno}: class_index must be >= 0")
        if fmt not in MANIFEST_FORMATS:
            raise CorpusError(
                f"{path}:{lineno}: unknown format {fmt!r}, expected one of {MANIFEST_FORMATS}"
            )
        resolved = Path(file_path)
        if not resolved.is_absolute():
            resolved = path.parent / resolved
        rows.append(ManifestRow(language, class_index, resolved, fmt))
    if not rows:
        raise CorpusError(f"manifest {path} lists no corpora")
    return rows


def _build_registry(rows: Sequence[ManifestRow]) -> ClassRegistry:
    names: list[str] = []
    for row in rows:
        if row.class_index == len(names):
            names.append(row.language)
        elif row.class_index < len(names):
            if names[row.class_index] != row.language:
                raise CorpusError(
                    f"class {row.class_index} maps to both "
                    f"{names[row.class_index]!r} and {row.language!r}"
                )
        else:
            raise CorpusError(
                f"class indices must appear in contiguous order; "
                f"saw {row.class_index} before {len(names)}"
            )
    return ClassRegistry(tuple(names))


def load_dataset(
    rows: Sequence[ManifestRow],
) -> tuple[ClassRegistry, list[LabeledSentence]]:
    """Parse every manifest file, normalize and label its sentences.

    Per-line Leipzig parse errors are recoverable and logged; an
    unreadable file or a class that ends up with zero sentences is fatal.
    """
    registry = _build_registry(rows)
    data: list[LabeledSentence] = []
    per_class = [0] * len(registry)
    for row in rows:
        try:
            with open(row.path, encoding="utf-8") as handle:
                if row.format == "leipzig":
                    sentences, errors = parse_leipzig(handle)
                    for err in errors:
                        logger.warning(
                            "%s:%d: skipped line (%s)", row.path, err.line_number, err.reason
                        )
                else:
                    sentences = parse_plain(handle)
        except OSError as exc:
            raise CorpusError(f"cannot read corpus file {row.path}: {exc}") from exc
        for raw in sentences:
            text = normalize(raw.text)
            if text:
                data.append(LabeledSentence(text, row.class_index))
                per_class[row.class_index] += 1
    for class_index, count in enumerate(per_class):
        if count == 0:
            raise CorpusError(
                f"class {class_index} ({registry.name_of(class_index)}) has no sentences"
            )
    return registry, data


def stratified_split(
    data: Sequence[LabeledSentence], test_fraction: float, seed: int
) -> SplitDataset:
    """Deterministic per-class split.

    For each class, its positions are shuffled by a SplitMix64 stream
    derived from (seed, class_index) and the first round(n * fraction)
    of them (clamped to [1, n-1] so both splits see every class) become
    the test set. Input order is preserved within each split.
    """
    test_fraction = check_fraction(test_fraction)
    by_class: dict[int, list[int]] = {}
    for pos, sentence in enumerate(data):
        by_class.setdefault(sentence.label, []).append(pos)
    test_positions: set[int] = set()
    for label in sorted(by_class):
        positions = by_class[label]
        n = len(positions)
        if n < 2:
            raise CorpusError(
                f"class {label} has only {n} sentence(s); cannot place one in each split"
            )
        take = min(max(round(n * test_fraction), 1), n - 1)
        SplitMix64.stream(seed, label).shuffle(positions)
        test_positions.update(positions[:take])
    train = [s for i, s in enumerate(data) if i not in test_positions]
    test = [s for i, s in enumerate(data) if i in test_positions]
    return SplitDataset(train=train, test=test, seed=seed, test_fraction=test_fraction)
