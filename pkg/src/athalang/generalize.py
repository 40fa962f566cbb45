"""Out-of-distribution runs: apply a trained model to a related-language
corpus and report how much of it lands on a chosen target class."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional, Sequence

from .forest import ForestModel, predict_texts


@dataclass(frozen=True)
class GeneralizationResult:
    corpus_name: str
    total_sentences: int
    classified_as_target: int
    rate: float
    prediction_histogram: dict[int, int]


def prediction_histogram(
    model: ForestModel, sentences: Sequence[str], n_jobs: int = 1
) -> dict[int, int]:
    """Counts of predicted classes over the sentences (only classes that
    actually occur appear as keys)."""
    if not sentences:
        raise ValueError("cannot build a histogram over zero sentences")
    labels, _ = predict_texts(model, sentences, n_jobs=n_jobs)
    histogram: dict[int, int] = {}
    for label in labels:
        label = int(label)
        histogram[label] = histogram.get(label, 0) + 1
    return dict(sorted(histogram.items()))


def generalization_rate(
    model: ForestModel,
    sentences: Sequence[str],
    target: int,
    corpus_name: str = "corpus",
    n_jobs: int = 1,
) -> GeneralizationResult:
    """Fraction of sentences the model classifies as `target`."""
    if not sentences:
        raise ValueError(f"corpus {corpus_name!r} has no sentences; rate is undefined")
    if not 0 <= target < len(model.registry):
        raise ValueError(
            f"target class {target} not in registry of {len(model.registry)} classes"
        )
    histogram = prediction_histogram(model, sentences, n_jobs=n_jobs)
    hits = histogram.get(target, 0)
    return GeneralizationResult(
        corpus_name=corpus_name,
        total_sentences=len(sentences),
        classified_as_target=hits,
        rate=hits / len(sentences),
        prediction_histogram=histogram,
    )


def render_generalization(
    results: Sequence[GeneralizationResult],
    target_name: str,
    fmt: str = "text-table",
    provenance: Optional[dict] = None,
) -> str:
    """Rows of corpus name, percent classified as target (2 decimals)
    and sentence count, as a text table or json."""
    if fmt in ("text", "text-table"):
        header = ["Language", f"Classified as {target_name}", "Total Sentences"]
        rows = [header] + [
            [r.corpus_name, f"{100.0 * r.rate:.2f}%", str(r.total_sentences)]
            for r in results
        ]
        widths = [max(len(row[i]) for row in rows) for i in range(3)]
        lines = [
            row[0].ljust(widths[0])
            + "  "
            + row[1].rjust(widths[1])
            + "  "
            + row[2].rjust(widths[2])
            for row in rows
        ]
        if provenance:
            lines.append("")
            for key, value in provenance.items():
                lines.append(f"# {key}: {json.dumps(value, sort_keys=True)}")
        return "\n".join(lines) + "\n"
    if fmt == "json":
        doc = dict(provenance or {})
        doc["target"] = target_name
        doc["corpora"] = [
            {
                "name": r.corpus_name,
                "total_sentences": r.total_sentences,
                "classified_as_target": r.classified_as_target,
                "rate": r.rate,
                "prediction_histogram": {str(k): v for k, v in r.prediction_histogram.items()},
            }
            for r in results
        ]
        return json.dumps(doc, indent=2) + "\n"
    raise ValueError(f"unknown format {fmt!r}, expected text-table or json")
