"""Command-line entry point: ``lexst <command> [options]``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

from . import __doc__ as _summary
from .classifier import init_params, load_checkpoint, save_checkpoint, train
from .corpus import Vocabulary, load_dataset, write_jsonl
from .harness import (
    ExperimentConfig,
    Report,
    evaluate,
    generate_synthetic,
    load_experiment_data,
    make_split,
    run_ablation,
    run_k_sweep,
    run_once,
    seeded_config,
)
from .kernels import BACKEND
from .lexicon import build_lexicon
from .lexknowledge import augment_many, load_kb
from .selftrain import Mode

log = logging.getLogger("lexst")


def _dump(obj, path: Optional[Path] = None) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False)
    if path is None:
        print(text)
    else:
        path.write_text(text + "\n", encoding="utf-8")


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("shared options")
    g.add_argument("--config", type=Path, help="JSON experiment config")
    g.add_argument("--seed", type=int, help="run a single seed")
    g.add_argument("--out-dir", type=Path)
    g.add_argument("--mode", choices=[m.value for m in Mode])
    g.add_argument("--lambda", dest="lam", type=float, help="confidence threshold for every class")
    g.add_argument("--tau", type=int, help="lexicon matching threshold")
    g.add_argument("--n", type=int, help="top attention words taken per example")
    g.add_argument("--k-percent", type=float, help="share of candidates kept per class")
    g.add_argument("--dump-selection", action="store_true", help="write per-document selection records")
    g.add_argument("-v", "--verbose", action="store_true")
    d = p.add_argument_group("data")
    d.add_argument("--data", help="labeled corpus (train/dev/pool are sampled from it)")
    d.add_argument("--test", help="labeled test corpus")
    d.add_argument("--kb", help="lexical knowledge base TSV")
    d.add_argument("--format", choices=["jsonl", "csv"])
    d.add_argument("--text-field")
    d.add_argument("--label-field")
    d.add_argument("--classes", help="file with one class name per line")
    d.add_argument("--per-class", type=int)
    return p


def _experiment(args) -> ExperimentConfig:
    data = json.loads(args.config.read_text(encoding="utf-8")) if args.config else {}
    cfg = ExperimentConfig.from_dict(data)
    for key in ("data", "test", "kb", "format", "text_field", "label_field", "classes", "per_class"):
        value = getattr(args, key, None)
        if value is not None:
            setattr(cfg, key, value)
    if args.out_dir is not None:
        cfg.out_dir = str(args.out_dir)
    if args.seed is not None:
        cfg.seeds = [args.seed]
    st = cfg.selftrain
    if args.mode:
        st = replace(st, mode=Mode(args.mode))
    if args.lam is not None:
        st = replace(st, selection=replace(st.selection, lambdas=(args.lam,)))
    if args.tau is not None:
        st = replace(st, selection=replace(st.selection, tau=args.tau))
    if args.n is not None:
        st = replace(st, lexicon_cfg=replace(st.lexicon_cfg, n=args.n))
    if args.k_percent is not None:
        st = replace(st, lexicon_cfg=replace(st.lexicon_cfg, k_percent=args.k_percent))
    cfg.selftrain = st
    return cfg


def _out_dir(cfg: ExperimentConfig) -> Path:
    if not cfg.out_dir:
        raise ValueError("--out-dir is required for this command")
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_synth(args) -> None:
    out = args.out_dir or Path(".")
    out.mkdir(parents=True, exist_ok=True)
    sd = generate_synthetic(
        args.num_classes, args.vocab_size, args.docs_per_class, args.keyword_rate,
        args.noise_rate, args.doc_len, args.seed if args.seed is not None else 0,
        test_per_class=args.test_per_class, keyword_slots=args.keyword_slots,
        synonym_rate=args.synonym_rate, crosstalk=args.crosstalk,
    )
    write_jsonl(sd.corpus, out / "data.jsonl")
    write_jsonl(sd.test, out / "test.jsonl")
    sd.kb.save(out / "kb.tsv")
    (out / "classes.txt").write_text("\n".join(sd.corpus.class_names) + "\n", encoding="utf-8")
    _dump({"data": str(out / "data.jsonl"), "test": str(out / "test.jsonl"),
           "kb": str(out / "kb.tsv"), "docs": len(sd.corpus), "test_docs": len(sd.test)})


def cmd_train(args) -> None:
    cfg = _experiment(args)
    data = load_experiment_data(cfg)
    seed = cfg.seeds[0]
    split = make_split(data, cfg.per_class, seed)
    tcfg = replace(cfg.selftrain.train_cfg, seed=seed)
    start = init_params(len(split.vocab), tcfg.emb_dim, tcfg.attn_dim, split.train.num_classes, seed)
    model, history = train(start, split.train, split.dev, tcfg)
    result = {"seed": seed, "epochs": history, "test_accuracy": evaluate(model, split.test, tcfg.leaky_slope)}
    if cfg.out_dir:
        out = _out_dir(cfg)
        save_checkpoint(model, out / "model.json", split.vocab.itos, split.train.class_names)
        _dump(result, out / "result.json")
    _dump(result)


def cmd_selftrain(args) -> None:
    cfg = _experiment(args)
    out = _out_dir(cfg)
    data = load_experiment_data(cfg)
    seed = cfg.seeds[0]
    split = make_split(data, cfg.per_class, seed)
    selection_log = (out / "selection.jsonl").open("w", encoding="utf-8") if args.dump_selection else None

    def on_selection(it, records):
        for r in records:
            selection_log.write(json.dumps({"iteration": it, **r.to_dict()}) + "\n")

    try:
        model, lexicon, history, acc = run_once(
            split, data.kb, cfg.selftrain, seed, out,
            on_selection if selection_log is not None else None,
        )
    finally:
        if selection_log is not None:
            selection_log.close()
    (out / "history.json").write_text(history.to_json() + "\n", encoding="utf-8")
    save_checkpoint(model, out / "model.json", split.vocab.itos, split.train.class_names)
    lexicon.save(out / "lexicon.json")
    manifest = {
        "experiment": cfg.to_dict(),
        "effective_selftrain": seeded_config(cfg.selftrain, seed).to_dict(),
        "seed": seed,
        "split_hash": split.hash(),
        "backend": BACKEND,
    }
    _dump(manifest, out / "manifest.json")
    _dump({"seed": seed, "test_accuracy": acc, "best_dev_accuracy": history.best_dev_accuracy,
           "best_iteration": history.best_iteration, "iterations": len(history.records)})


def _report(report: Report, cfg: ExperimentConfig) -> None:
    print(report.table(), file=sys.stderr)
    if cfg.out_dir:
        (_out_dir(cfg) / "report.json").write_text(report.to_json() + "\n", encoding="utf-8")
    summary = {r.name: {"mean": r.mean, "std": r.std, "accuracies": r.accuracies} for r in report.rows}
    _dump(summary)


def cmd_ablation(args) -> None:
    cfg = _experiment(args)
    _report(run_ablation(cfg), cfg)


def cmd_ksweep(args) -> None:
    cfg = _experiment(args)
    _report(run_k_sweep(cfg, args.ks), cfg)


def cmd_lexicon_dump(args) -> None:
    cfg = _experiment(args)
    model, extras = load_checkpoint(args.model)
    if "vocab" not in extras:
        raise ValueError(f"{args.model}: checkpoint carries no vocabulary")
    vocab = Vocabulary(extras["vocab"])
    if cfg.data is None:
        raise ValueError("--data is required")
    corpus = load_dataset(
        cfg.data, format=cfg.format, text_field=cfg.text_field, label_field=cfg.label_field,
        class_names=extras.get("class_names"),
    )
    lexicon = build_lexicon(model, vocab.encode_corpus(corpus), cfg.selftrain.lexicon_cfg,
                            cfg.selftrain.train_cfg.leaky_slope)
    _dump(lexicon.to_dict(), args.output)


def cmd_augment(args) -> None:
    cfg = _experiment(args)
    if cfg.data is None or cfg.kb is None:
        raise ValueError("--data and --kb are required")
    corpus = load_dataset(cfg.data, format=cfg.format, text_field=cfg.text_field, label_field=cfg.label_field)
    kb = load_kb(cfg.kb)
    aug = cfg.selftrain.augment_cfg
    if args.seed is not None:
        aug = replace(aug, seed=args.seed)
    if args.fraction is not None:
        aug = replace(aug, replace_fraction=args.fraction)
    if args.copies is not None:
        aug = replace(aug, copies_per_example=args.copies)
    pairs = augment_many(kb, [(ex.doc, ex.label) for ex in corpus.examples], aug)
    sink = args.output.open("w", encoding="utf-8") if args.output else sys.stdout
    try:
        for doc, y in pairs:
            row = {cfg.text_field: doc.raw_text, cfg.label_field: corpus.class_names[y]}
            sink.write(json.dumps(row, ensure_ascii=False) + "\n")
    finally:
        if sink is not sys.stdout:
            sink.close()


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="lexst", description=_summary)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common], help="write a synthetic corpus, test set and KB")
    p.add_argument("--num-classes", type=int, default=4)
    p.add_argument("--vocab-size", type=int, default=500)
    p.add_argument("--docs-per-class", type=int, default=560)
    p.add_argument("--test-per-class", type=int, default=250)
    p.add_argument("--keyword-rate", type=float, default=0.6)
    p.add_argument("--noise-rate", type=float, default=0.05)
    p.add_argument("--doc-len", type=int, default=10)
    p.add_argument("--keyword-slots", type=int, default=4)
    p.add_argument("--synonym-rate", type=float, default=0.3)
    p.add_argument("--crosstalk", type=float, default=0.0)
    p.set_defaults(func=cmd_synth)

    sub.add_parser("train", parents=[common], help="supervised training only").set_defaults(func=cmd_train)
    sub.add_parser("selftrain", parents=[common], help="one self-training run").set_defaults(func=cmd_selftrain)
    sub.add_parser("ablation", parents=[common], help="compare the four modes").set_defaults(func=cmd_ablation)

    p = sub.add_parser("ksweep", parents=[common], help="vary the lexicon frequency ratio")
    p.add_argument("--ks", type=float, nargs="+", default=[1, 10, 50, 100])
    p.set_defaults(func=cmd_ksweep)

    p = sub.add_parser("lexicon", help="lexicon utilities")
    lex = p.add_subparsers(dest="lexicon_command", required=True)
    d = lex.add_parser("dump", parents=[common], help="mine a lexicon with a saved model")
    d.add_argument("--model", type=Path, required=True)
    d.add_argument("--output", type=Path)
    d.set_defaults(func=cmd_lexicon_dump)

    p = sub.add_parser("augment", parents=[common], help="write KB-augmented copies as JSON Lines")
    p.add_argument("--fraction", type=float)
    p.add_argument("--copies", type=int)
    p.add_argument("--output", type=Path)
    p.set_defaults(func=cmd_augment)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        args.func(args)
    except (OSError, ValueError, KeyError) as exc:
        print(f"lexst: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
