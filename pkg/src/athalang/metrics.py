"""Confusion matrix, per-class precision/recall/F1/support, overall
accuracy, and report rendering (text table, TSV, JSON).

Rounding happens only at render time; TSV and JSON carry full float
precision so metrics survive a round trip exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .corpus import ClassRegistry

REPORT_FORMATS = ("text-table", "tsv", "json")


@dataclass(frozen=True)
class ConfusionMatrix:
    """counts[i][j] = samples of true class i predicted as class j."""

    counts: np.ndarray
    registry: ClassRegistry

    def __post_init__(self):
        counts = np.asarray(self.counts)
        k = len(self.registry)
        if counts.shape != (k, k):
            raise ValueError(
                f"confusion counts shape {counts.shape} does not match {k} classes"
            )

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass(frozen=True)
class PerClassMetrics:
    class_index: int
    precision: float
    recall: float
    f1: float
    support: int
    undefined: tuple[str, ...] = ()


def _as_registry(registry_or_k: Union[ClassRegistry, int]) -> ClassRegistry:
    if isinstance(registry_or_k, ClassRegistry):
        return registry_or_k
    return ClassRegistry.generic(int(registry_or_k))


def confusion_matrix(
    y_true: Sequence[int], y_pred: Sequence[int],
    registry_or_k: Union[ClassRegistry, int],
) -> ConfusionMatrix:
    registry = _as_registry(registry_or_k)
    k = len(registry)
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape:
        raise ValueError(
            f"y_true has {len(y_true)} labels but y_pred has {len(y_pred)}"
        )
    for name, y in (("y_true", y_true), ("y_pred", y_pred)):
        if len(y) and (y.min() < 0 or y.max() >= k):
            raise ValueError(f"{name} contains labels outside 0..{k - 1}")
    counts = np.zeros((k, k), dtype=np.int64)
    np.add.at(counts, (y_true, y_pred), 1)
    return ConfusionMatrix(counts=counts, registry=registry)


def per_class_metrics(cm: ConfusionMatrix) -> list[PerClassMetrics]:
    """Precision (column-wise), recall (row-wise), F1 and support per
    class; zero denominators report 0 and are flagged as undefined."""
    counts = cm.counts
    out = []
    for c in range(len(cm.registry)):
        diag = int(counts[c, c])
        col = int(counts[:, c].sum())
        row = int(counts[c, :].sum())
        undefined = []
        precision = diag / col if col else 0.0
        if not col:
            undefined.append("precision")
        recall = diag / row if row else 0.0
        if not row:
            undefined.append("recall")
        if precision + recall > 0:
            f1 = 2 * precision * recall / (precision + recall)
        else:
            f1 = 0.0
            undefined.append("f1")
        out.append(
            PerClassMetrics(
                class_index=c,
                precision=precision,
                recall=recall,
                f1=f1,
                support=row,
                undefined=tuple(undefined),
            )
        )
    return out


def overall_accuracy(cm: ConfusionMatrix) -> float:
    total = cm.total
    if total < 1:
        raise ValueError("accuracy is undefined for an empty confusion matrix")
    return float(np.trace(cm.counts)) / total


def verify_identities(cm: ConfusionMatrix, tol: float = 1e-12) -> None:
    """Self-check of metric identities, applied to every evaluation:
    supports sum to the sample count, accuracy equals support-weighted
    mean recall, and F1 * (P + R) = 2 * P * R per class."""
    metrics = per_class_metrics(cm)
    supports = sum(m.support for m in metrics)
    if supports != cm.total:
        raise ValueError(f"supports sum to {supports}, expected {cm.total}")
    accuracy = overall_accuracy(cm)
    weighted = sum(m.support * m.recall for m in metrics) / cm.total
    if abs(weighted - accuracy) > tol:
        raise ValueError(
            f"accuracy {accuracy!r} != support-weighted mean recall {weighted!r}"
        )
    for m in metrics:
        lhs = m.f1 * (m.precision + m.recall)
        rhs = 2 * m.precision * m.recall
        if abs(lhs - rhs) > tol:
            raise ValueError(
                f"class {m.class_index}: F1*(P+R)={lhs!r} != 2PR={rhs!r}"
            )


def _confusion_grid_rows(cm: ConfusionMatrix) -> list[list[str]]:
    names = list(cm.registry.names)
    rows = [[""] + names]
    for i, name in enumerate(names):
        rows.append([name] + [str(int(v)) for v in cm.counts[i]])
    return rows


def _render_text(metrics, cm, accuracy, provenance) -> str:
    header = ["Language", "Class", "Precision", "Recall", "F1-score", "Support"]
    rows = [header]
    for m in metrics:
        rows.append(
            [
                cm.registry.name_of(m.class_index),
                str(m.class_index),
                f"{m.precision:.2f}",
                f"{m.recall:.2f}",
                f"{m.f1:.2f}",
                str(m.support),
            ]
        )
    widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
    lines = []
    for r in rows:
        lines.append(
            r[0].ljust(widths[0])
            + "  "
            + "  ".join(r[i].rjust(widths[i]) for i in range(1, len(header)))
        )
    lines.append("")
    lines.append(f"Overall accuracy: {accuracy:.2f}  (N = {cm.total})")
    lines.append("")
    lines.append("Confusion matrix (rows = true class, columns = predicted):")
    grid = _confusion_grid_rows(cm)
    gwidths = [max(len(row[i]) for row in grid) for i in range(len(grid[0]))]
    for row in grid:
        lines.append("  ".join(cell.rjust(gwidths[i]) for i, cell in enumerate(row)))
    if provenance:
        lines.append("")
        for key, value in provenance.items():
            lines.append(f"# {key}: {json.dumps(value, sort_keys=True)}")
    return "\n".join(lines) + "\n"


def _render_tsv(metrics, cm, accuracy, provenance) -> str:
    lines = []
    if provenance:
        for key, value in provenance.items():
            lines.append(f"# {key}\t{json.dumps(value, sort_keys=True)}")
    lines.append("language\tclass\tprecision\trecall\tf1\tsupport")
    for m in metrics:
        lines.append(
            "\t".join(
                [
                    cm.registry.name_of(m.class_index),
                    str(m.class_index),
                    repr(m.precision),
                    repr(m.recall),
                    repr(m.f1),
                    str(m.support),
                ]
            )
        )
    lines.append(f"# overall_accuracy\t{accuracy!r}")
    lines.append(f"# test_size\t{cm.total}")
    lines.append("")
    for row in _confusion_grid_rows(cm):
        lines.append("\t".join(row))
    return "\n".join(lines) + "\n"


def _render_json(metrics, cm, accuracy, provenance) -> str:
    doc = dict(provenance or {})
    doc.update(
        {
            "accuracy": accuracy,
            "test_size": cm.total,
            "classes": [
                {
                    "language": cm.registry.name_of(m.class_index),
                    "class": m.class_index,
                    "precision": m.precision,
                    "recall": m.recall,
                    "f1": m.f1,
                    "support": m.support,
                    "undefined": list(m.undefined),
                }
                for m in metrics
            ],
            "confusion": {
                "languages": list(cm.registry.names),
                "counts": cm.counts.tolist(),
            },
        }
    )
    return json.dumps(doc, indent=2, sort_keys=False) + "\n"


def render_report(
    metrics: Sequence[PerClassMetrics],
    cm: ConfusionMatrix,
    fmt: str = "text-table",
    provenance: Optional[dict] = None,
) -> str:
    """Render the per-class table plus confusion grid.

    The text table rounds to 2 decimals; tsv and json keep full
    precision. `provenance` (run config, model fingerprint) is embedded
    verbatim in json and as comment lines in the text formats.
    """
    if fmt == "text":
        fmt = "text-table"
    if fmt not in REPORT_FORMATS:
        raise ValueError(f"unknown report format {fmt!r}, expected one of {REPORT_FORMATS}")
    accuracy = overall_accuracy(cm)
    if fmt == "text-table":
        return _render_text(metrics, cm, accuracy, provenance)
    if fmt == "tsv":
        return _render_tsv(metrics, cm, accuracy, provenance)
    return _render_json(metrics, cm, accuracy, provenance)
