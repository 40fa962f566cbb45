"""athalang: language identification for Navajo and related Athabaskan
languages with a character n-gram random forest.

Typical use: build a manifest of per-language sentence files, then

    athalang train --manifest data.tsv --model navajo.alm
    athalang evaluate --manifest data.tsv --model navajo.alm
    athalang predict --model navajo.alm --text "..."

or, as a library, compose the sklearn-style estimators::

    vec = NgramCountVectorizer(dimension=5000)
    X = vec.fit(train_texts).transform(train_texts)
    clf = RandomForest(n_trees=100, seed=42).fit(X, labels)
"""

__version__ = "0.1.0"

from .corpus import (
    ClassRegistry,
    CorpusError,
    LabeledSentence,
    ManifestRow,
    ParseError,
    RawSentence,
    SplitDataset,
    load_dataset,
    parse_leipzig,
    parse_plain,
    read_manifest,
    stratified_split,
)
from .features import (
    FeatureVector,
    NgramCountVectorizer,
    Vocabulary,
    build_vocabulary,
    count_matrix,
    extract_ngrams,
    normalize,
    vectorize,
)
from .forest import (
    ForestModel,
    ForestParams,
    RandomForest,
    TreeNode,
    best_split,
    gini,
    grow_tree,
    predict,
    predict_matrix,
    predict_texts,
    train_trees,
)
from .generalize import (
    GeneralizationResult,
    generalization_rate,
    prediction_histogram,
    render_generalization,
)
from .metrics import (
    ConfusionMatrix,
    PerClassMetrics,
    confusion_matrix,
    overall_accuracy,
    per_class_metrics,
    render_report,
    verify_identities,
)
from .model_io import ModelFormatError, fingerprint, load_model, save_model

__all__ = [
    "__version__",
    "ClassRegistry",
    "ConfusionMatrix",
    "CorpusError",
    "FeatureVector",
    "ForestModel",
    "ForestParams",
    "GeneralizationResult",
    "LabeledSentence",
    "ManifestRow",
    "ModelFormatError",
    "NgramCountVectorizer",
    "ParseError",
    "PerClassMetrics",
    "RandomForest",
    "RawSentence",
    "SplitDataset",
    "TreeNode",
    "Vocabulary",
    "best_split",
    "build_vocabulary",
    "confusion_matrix",
    "count_matrix",
    "extract_ngrams",
    "fingerprint",
    "generalization_rate",
    "gini",
    "grow_tree",
    "load_dataset",
    "load_model",
    "normalize",
    "overall_accuracy",
    "parse_leipzig",
    "parse_plain",
    "per_class_metrics",
    "predict",
    "predict_matrix",
    "predict_texts",
    "prediction_histogram",
    "read_manifest",
    "render_generalization",
    "render_report",
    "save_model",
    "stratified_split",
    "train_trees",
    "vectorize",
    "verify_identities",
]
