"""Command-line interface.

Subcommands: ingest, build-prompts, train, predict, score, fewshot, augment,
run-all, synth. Exit codes: 0 success, 1 validation/usage error, 2 runtime
failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .augment import DictLexicon, augment_backtranslate, expand_with_eda, identity_translator
from .corpus import fewshot_sample, ingest, write_corpus
from .errors import ConfigError, EventPromptError
from .generation import MockBackend, TrainConfig, train
from .pipeline import (
    GenerationRecord,
    PipelineConfig,
    StageBackends,
    build_training_instances,
    predict_documents,
    run_end_to_end,
    write_predictions,
    _write_loss_curve,
)
from .prompting import FAMILIES, read_instances, write_instances
from .schema import load_schema, save_schema
from .scoring import score_report
from .pipeline import read_predictions
from .synthetic import build_ace_shape_schema, build_synthetic_corpus, build_synthetic_schema


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors by default; the CLI contract is 1.
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="eventprompt", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log diagnostics")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("ingest", help="validate a corpus file against a schema")
    p.add_argument("--corpus", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--out", help="write the validated corpus back out (normalized)")

    p = sub.add_parser("build-prompts", help="build one prompt family as JSONL")
    p.add_argument("--family", required=True, choices=FAMILIES)
    p.add_argument("--corpus", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--external-window", type=int, default=100)
    p.add_argument("--internal-window", type=int, default=120)
    p.add_argument("--max-gap", type=int, default=3)

    p = sub.add_parser("train", help="train one stage on instance files (mock backend)")
    p.add_argument("--stage", required=True, choices=["trigger_coarse", "trigger_subtype", "argument"])
    p.add_argument("--instances", required=True, nargs="+")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--learning-rate", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--seed", type=int, default=42)

    p = sub.add_parser("predict", help="run detection + argument extraction over a corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--checkpoints", required=True, help="directory holding stage_*.json")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--regime", choices=["end_to_end", "gold_trigger"], default="end_to_end")
    p.add_argument("--external-window", type=int, default=100)
    p.add_argument("--decode-max-len", type=int, default=64)

    p = sub.add_parser("score", help="score predictions against gold annotations")
    p.add_argument("--gold", required=True, help="gold corpus JSONL")
    p.add_argument("--schema", required=True)
    p.add_argument("--pred", required=True, help="predictions JSONL")

    p = sub.add_parser("fewshot", help="sample k mentions per subtype into a corpus file")
    p.add_argument("--corpus", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out", required=True)

    p = sub.add_parser("augment", help="augment single-argument instances")
    p.add_argument("--method", required=True, choices=["eda", "backtranslate"])
    p.add_argument("--instances", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--ops", type=int, default=1, help="EDA operations per instance")
    p.add_argument("--target-count", type=int, help="expand to this many instances (EDA)")
    p.add_argument("--lexicon", help="JSON file {word: [synonyms]} for EDA")

    p = sub.add_parser("run-all", help="full pipeline from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--schema", dest="schema_path")
    p.add_argument("--corpus", dest="corpus_path")
    p.add_argument("--out-dir", dest="output_dir")
    p.add_argument("--backend")
    p.add_argument("--regime", choices=["end_to_end", "gold_trigger"])
    p.add_argument("--seed", type=int)

    p = sub.add_parser("synth", help="write the synthetic schema and mini-corpus")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--docs", type=int, default=20)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--ace-shape", action="store_true", help="also write the 8/33/35 skeleton schema")

    return parser


def _cmd_ingest(args) -> int:
    schema = load_schema(args.schema)
    docs, mentions = ingest(args.corpus, schema)
    by_subtype: dict[str, int] = {}
    for m in mentions:
        by_subtype[m.subtype] = by_subtype.get(m.subtype, 0) + 1
    print(
        json.dumps(
            {
                "documents": len(docs),
                "sentences": sum(len(d.sentences) for d in docs),
                "events": len(mentions),
                "arguments": sum(len(m.arguments) for m in mentions),
                "events_by_subtype": dict(sorted(by_subtype.items())),
            },
            indent=2,
        )
    )
    if args.out:
        write_corpus(docs, mentions, args.out)
    return 0


def _cmd_build_prompts(args) -> int:
    schema = load_schema(args.schema)
    docs, mentions = ingest(args.corpus, schema)
    config = PipelineConfig(
        schema_path=args.schema,
        corpus_path=args.corpus,
        output_dir=".",
        seed=args.seed,
        external_window=args.external_window,
        internal_window=args.internal_window,
        max_gap_sentences=args.max_gap,
    )
    families = build_training_instances(docs, mentions, schema, config)
    write_instances(families[args.family], args.out)
    print(f"wrote {len(families[args.family])} {args.family} instances to {args.out}")
    return 0


def _cmd_train(args) -> int:
    instances = []
    for path in args.instances:
        instances.extend(read_instances(path))
    if not instances:
        raise ConfigError("no training instances found")
    config = TrainConfig.for_stage(args.stage, seed=args.seed)
    overrides = {
        k: v
        for k, v in (
            ("learning_rate", args.learning_rate),
            ("epochs", args.epochs),
            ("batch_size", args.batch_size),
        )
        if v is not None
    }
    config = replace(config, **overrides)
    # Sentinels used by these instances are already in their texts; only the
    # always-allowed structural answers need adding explicitly.
    vocab = {"</s>", "None", "|"}
    for inst in instances:
        vocab.update(inst.input_text.split())
        vocab.update(inst.target_text.split())
    backend = MockBackend(sorted(vocab))
    _, curve = train(backend, instances, config)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / f"stage_{args.stage}.json", "w", encoding="utf-8") as fh:
        json.dump(backend.state_dict(), fh)
    _write_loss_curve(curve, out_dir / f"loss_{args.stage}.csv")
    print(f"trained {args.stage} on {len(instances)} instances; final loss "
          f"{curve[-1].loss:.6f}" if curve else "no training steps ran")
    return 0


def _load_stage(checkpoints: Path, stage: str) -> MockBackend:
    path = checkpoints / f"stage_{stage}.json"
    if not path.exists():
        raise ConfigError(f"missing checkpoint {path}")
    with open(path, encoding="utf-8") as fh:
        return MockBackend.from_state_dict(json.load(fh))


def _cmd_predict(args) -> int:
    schema = load_schema(args.schema)
    docs, mentions = ingest(args.corpus, schema)
    checkpoints = Path(args.checkpoints)
    backends = StageBackends(
        trigger=_load_stage(checkpoints, "trigger_coarse"),
        subtype=_load_stage(checkpoints, "trigger_subtype"),
        argument=_load_stage(checkpoints, "argument"),
    )
    config = PipelineConfig(
        schema_path=args.schema,
        corpus_path=args.corpus,
        output_dir=args.out_dir,
        regime=args.regime,
        external_window=args.external_window,
        decode_max_len=args.decode_max_len,
        splits={"test": [d.doc_id for d in docs]},
    )
    records: list[GenerationRecord] = []
    predictions = predict_documents(backends, docs, mentions, schema, config, records)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_predictions(predictions, out_dir / "predictions.jsonl")
    with open(out_dir / "generations.jsonl", "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record.to_dict(), ensure_ascii=False) + "\n")
    print(f"wrote {len(predictions)} event predictions to {out_dir / 'predictions.jsonl'}")
    return 0


def _cmd_score(args) -> int:
    schema = load_schema(args.schema)
    _, gold = ingest(args.gold, schema)
    pred = read_predictions(args.pred)
    print(score_report(gold, pred).to_json())
    return 0


def _cmd_fewshot(args) -> int:
    schema = load_schema(args.schema)
    docs, mentions = ingest(args.corpus, schema)
    sampled = fewshot_sample(mentions, args.k, args.seed)
    sampled_ids = {m.doc_id for m in sampled}
    write_corpus([d for d in docs if d.doc_id in sampled_ids], sampled, args.out)
    print(f"sampled {len(sampled)} mentions ({args.k} per subtype) into {args.out}")
    return 0


def _cmd_augment(args) -> int:
    instances = read_instances(args.instances)
    if args.method == "eda":
        lexicon = None
        if args.lexicon:
            with open(args.lexicon, encoding="utf-8") as fh:
                lexicon = DictLexicon(json.load(fh))
        target = args.target_count if args.target_count else 2 * len(instances)
        out = expand_with_eda(
            instances, target, seed=args.seed, ops_per_instance=args.ops, lexicon=lexicon
        )
    else:
        # Shipping real translation models is out of scope; the identity
        # transform exercises the interface. Plug real translators in via the
        # Python API (augment_backtranslate).
        out = augment_backtranslate(instances, identity_translator, seed=args.seed)
    write_instances(out, args.out)
    print(f"wrote {len(out)} instances to {args.out}")
    return 0


def _cmd_run_all(args) -> int:
    config = PipelineConfig.from_json_file(args.config)
    overrides = {
        key: getattr(args, key)
        for key in ("schema_path", "corpus_path", "output_dir", "backend", "regime", "seed")
        if getattr(args, key, None) is not None
    }
    if overrides:
        config = replace(config, **overrides)
    result = run_end_to_end(config)
    print(result.report.to_json())
    print(f"artifacts in {result.output_dir}", file=sys.stderr)
    return 0


def _cmd_synth(args) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    schema = build_synthetic_schema()
    docs, mentions = build_synthetic_corpus(n_docs=args.docs, seed=args.seed)
    save_schema(schema, out_dir / "synthetic_schema.json")
    write_corpus(docs, mentions, out_dir / "synthetic_corpus.jsonl")
    written = ["synthetic_schema.json", "synthetic_corpus.jsonl"]
    if args.ace_shape:
        save_schema(build_ace_shape_schema(), out_dir / "ace_shape_schema.json")
        written.append("ace_shape_schema.json")
    print(f"wrote {', '.join(written)} to {out_dir}")
    return 0


_COMMANDS = {
    "ingest": _cmd_ingest,
    "build-prompts": _cmd_build_prompts,
    "train": _cmd_train,
    "predict": _cmd_predict,
    "score": _cmd_score,
    "fewshot": _cmd_fewshot,
    "augment": _cmd_augment,
    "run-all": _cmd_run_all,
    "synth": _cmd_synth,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exit_:  # usage errors exit 1, --help exits 0
        return int(exit_.code or 0)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return _COMMANDS[args.command](args)
    except EventPromptError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # unexpected failure
        logging.getLogger(__name__).exception("unhandled failure")
        print(f"internal error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
