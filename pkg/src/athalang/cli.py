"""Command-line driver: train, evaluate, predict, generalize, dump-vocab.

Every report embeds the full run configuration and the sha256 of the
model file it used, so results are re-derivable from the report alone.
Exit code is 0 iff no fatal error; fatals print one `error: ...` line
to stderr. The tool never touches the network.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional

from . import __version__
from .corpus import CorpusError, load_dataset, read_manifest, stratified_split
from .features import FEATURE_KINDS, build_vocabulary, count_matrix
from .forest import ForestModel, ForestParams, predict_texts, train_trees
from .generalize import generalization_rate, render_generalization
from .metrics import confusion_matrix, per_class_metrics, render_report, verify_identities
from .model_io import ModelFormatError, fingerprint, load_model, save_model


@dataclass
class RunConfig:
    """Everything that determines a run; embedded in reports."""

    seed: int = 42
    test_fraction: float = 0.2
    features_dimension: int = 5000
    ngram_min: int = 1
    ngram_max: int = 3
    features_kind: str = "char"
    trees: int = 100
    max_depth: Optional[int] = None
    min_samples_split: int = 2
    features_per_split: Optional[int] = None
    bootstrap: bool = True
    threads: int = 1
    manifest: Optional[str] = None
    model: Optional[str] = None

    def to_dict(self) -> dict:
        return asdict(self)

    def forest_params(self) -> ForestParams:
        return ForestParams(
            n_trees=self.trees,
            max_depth=self.max_depth,
            min_samples_split=self.min_samples_split,
            features_per_split=self.features_per_split,
            bootstrap=self.bootstrap,
            seed=self.seed,
        )


def _default_threads() -> int:
    env = os.environ.get("ATHALANG_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValueError(f"ATHALANG_THREADS must be an integer, got {env!r}")
    return os.cpu_count() or 1


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    config = RunConfig()
    for name in vars(config):
        if hasattr(args, name) and getattr(args, name) is not None:
            setattr(config, name, getattr(args, name))
    if getattr(args, "no_bootstrap", False):
        config.bootstrap = False
    if getattr(args, "threads", None) is None:
        config.threads = _default_threads()
    if config.ngram_min < 1 or config.ngram_max < config.ngram_min:
        raise ValueError(
            f"bad n-gram range ({config.ngram_min}, {config.ngram_max})"
        )
    return config


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _provenance(config: RunConfig, model_path: Optional[str] = None) -> dict:
    prov = {"run_config": config.to_dict()}
    if model_path:
        prov["model_sha256"] = fingerprint(model_path)
    return prov


def cmd_train(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    started = time.perf_counter()
    rows = read_manifest(args.manifest)
    registry, data = load_dataset(rows)
    split = stratified_split(data, config.test_fraction, config.seed)
    train_texts = [s.text for s in split.train]
    vocab = build_vocabulary(
        train_texts,
        (config.ngram_min, config.ngram_max),
        config.features_dimension,
        config.features_kind,
    )
    X = count_matrix(train_texts, vocab)
    y = [s.label for s in split.train]
    params = config.forest_params().resolve(vocab.dimension)
    trees = train_trees(X, y, params, n_jobs=config.threads, n_classes=len(registry))
    model = ForestModel(params=params, trees=trees, vocabulary=vocab, registry=registry)
    save_model(model, args.model)
    elapsed = time.perf_counter() - started
    summary = {
        "run_config": config.to_dict(),
        "model_path": str(args.model),
        "model_sha256": fingerprint(args.model),
        "languages": len(registry),
        "train_samples": len(split.train),
        "test_samples": len(split.test),
        "effective_dimension": vocab.dimension,
        "trees": params.n_trees,
        "features_per_split": params.features_per_split,
        "wall_time_seconds": round(elapsed, 3),
    }
    if args.format == "json":
        _emit(json.dumps(summary, indent=2) + "\n", args.out)
    else:
        lines = [f"{key}: {value}" for key, value in summary.items() if key != "run_config"]
        lines.append(f"run_config: {json.dumps(config.to_dict(), sort_keys=True)}")
        _emit("\n".join(lines) + "\n", args.out)
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    model = load_model(args.model)
    rows = read_manifest(args.manifest)
    registry, data = load_dataset(rows)
    if registry.names != model.registry.names:
        raise ValueError(
            "manifest registry does not match the model's: "
            f"{list(registry.names)} vs {list(model.registry.names)}"
        )
    split = stratified_split(data, config.test_fraction, config.seed)
    texts = [s.text for s in split.test]
    y_true = [s.label for s in split.test]
    y_pred, _votes = predict_texts(model, texts, n_jobs=config.threads)
    cm = confusion_matrix(y_true, y_pred, registry)
    verify_identities(cm)
    report = render_report(
        per_class_metrics(cm),
        cm,
        fmt=args.format,
        provenance=_provenance(config, args.model),
    )
    _emit(report, args.out)
    return 0


def cmd_predict(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    model = load_model(args.model)
    if args.text is not None:
        texts = [args.text]
    elif args.file is not None:
        try:
            texts = Path(args.file).read_text(encoding="utf-8").splitlines()
        except OSError as exc:
            raise CorpusError(f"cannot read input file {args.file}: {exc}") from exc
    else:
        texts = sys.stdin.read().splitlines()
    if not texts:
        return 0
    labels, votes = predict_texts(model, texts, n_jobs=config.threads)
    n_trees = model.params.n_trees
    for i, label in enumerate(labels):
        name = model.registry.name_of(int(label))
        sys.stdout.write(f"{name}\t{int(votes[i, label])}/{n_trees}\n")
    return 0


def cmd_generalize(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    model = load_model(args.model)
    target = model.registry.index_of(args.target)
    directory = Path(args.corpora)
    if not directory.is_dir():
        raise CorpusError(f"corpora path {directory} is not a directory")
    files = sorted(directory.glob("*.txt"))
    if not files:
        raise CorpusError(f"no .txt corpora found in {directory}")
    results = []
    for path in files:
        try:
            sentences = [
                line.strip()
                for line in path.read_text(encoding="utf-8").splitlines()
                if line.strip()
            ]
        except OSError as exc:
            raise CorpusError(f"cannot read corpus file {path}: {exc}") from exc
        if not sentences:
            logging.getLogger(__name__).warning("skipping empty corpus %s", path)
            continue
        results.append(
            generalization_rate(
                model, sentences, target, corpus_name=path.stem, n_jobs=config.threads
            )
        )
    report = render_generalization(
        results, args.target, fmt=args.format, provenance=_provenance(config, args.model)
    )
    _emit(report, args.out)
    return 0


def cmd_dump_vocab(args: argparse.Namespace) -> int:
    model = load_model(args.model)
    vocab = model.vocabulary
    counts = vocab.counts or (0,) * vocab.dimension
    lines = [
        f"{index}\t{gram}\t{counts[index]}"
        for index, gram in enumerate(vocab.ngrams_by_index())
    ]
    _emit("\n".join(lines) + "\n", args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="athalang",
        description="Navajo / Athabaskan language identification "
        "with a character n-gram random forest",
    )
    parser.add_argument("--version", action="version", version=f"athalang {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, model_required=True):
        p.add_argument("--model", required=model_required, help="model file path")
        p.add_argument("--threads", type=int, default=None,
                       help="worker count (default: ATHALANG_THREADS or all cores)")
        p.add_argument("--out", default=None, help="write output to this file instead of stdout")

    def add_run_flags(p):
        p.add_argument("--seed", type=int, default=None, help="master seed (default 42)")
        p.add_argument("--test-fraction", dest="test_fraction", type=float, default=None,
                       help="held-out fraction (default 0.2)")

    train = sub.add_parser("train", help="train a model from a manifest")
    train.add_argument("--manifest", required=True, help="dataset manifest (TSV)")
    add_common(train)
    add_run_flags(train)
    train.add_argument("--features", dest="features_dimension", type=int, default=None,
                       help="feature dimension (default 5000)")
    train.add_argument("--ngram-min", dest="ngram_min", type=int, default=None)
    train.add_argument("--ngram-max", dest="ngram_max", type=int, default=None)
    train.add_argument("--features-kind", dest="features_kind", choices=FEATURE_KINDS,
                       default=None, help="character or word n-grams (default char)")
    train.add_argument("--trees", type=int, default=None, help="number of trees (default 100)")
    train.add_argument("--max-depth", dest="max_depth", type=int, default=None,
                       help="depth limit (default unlimited)")
    train.add_argument("--min-split", dest="min_samples_split", type=int, default=None,
                       help="minimum samples to split a node (default 2)")
    train.add_argument("--features-per-split", dest="features_per_split", type=int,
                       default=None, help="candidate features per node (default round(sqrt(D)))")
    train.add_argument("--no-bootstrap", dest="no_bootstrap", action="store_true",
                       help="train each tree on the full sample instead of a bootstrap")
    train.add_argument("--format", choices=("text", "json"), default="text",
                       help="summary format")
    train.set_defaults(func=cmd_train)

    evaluate = sub.add_parser("evaluate", help="evaluate a model on the held-out split")
    evaluate.add_argument("--manifest", required=True)
    add_common(evaluate)
    add_run_flags(evaluate)
    evaluate.add_argument("--format", choices=("text", "tsv", "json"), default="text",
                          help="report format")
    evaluate.set_defaults(func=cmd_evaluate)

    predict = sub.add_parser("predict", help="predict the language of text")
    add_common(predict)
    predict.add_argument("--text", default=None, help="classify this string")
    predict.add_argument("--file", default=None, help="classify each line of this file")
    predict.set_defaults(func=cmd_predict)

    generalize = sub.add_parser(
        "generalize", help="rate of a target class over out-of-distribution corpora"
    )
    add_common(generalize)
    generalize.add_argument("--corpora", required=True,
                            help="directory of plain .txt corpora, one sentence per line")
    generalize.add_argument("--target", required=True, help="target language name")
    generalize.add_argument("--format", choices=("text", "json"), default="text")
    generalize.set_defaults(func=cmd_generalize)

    dump = sub.add_parser("dump-vocab", help="dump the model vocabulary as TSV")
    add_common(dump)
    dump.set_defaults(func=cmd_dump_vocab)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (CorpusError, ModelFormatError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
