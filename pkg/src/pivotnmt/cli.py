"""Command-line surface for the full experiment lifecycle.

Every subcommand writes its resolved configuration and a MANIFEST of
produced files into its output directory, refuses to clobber existing
outputs unless --overwrite is given, and prints its headline result to
stdout. Exit codes: 0 success, 1 usage error, 2 runtime error.

Heavy imports happen inside the command functions so that --threads can cap
the BLAS pool before numpy is loaded.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .errors import InputError, IoError, PivotNmtError

log = logging.getLogger(__name__)

BPE_FILE = "bpe.model"
VOCAB_FILE = "vocab.tsv"
CKPT_FILE = "model.ckpt"
REPORT_FILE = "train_report.jsonl"

PAIR_FILES = {
    "src-piv": ("srcpiv.src", "srcpiv.piv", "dev.src", "dev.piv"),
    "piv-trg": ("pivtrg.piv", "pivtrg.trg", "dev.piv", "dev.trg"),
    "src-trg": ("srctrg.src", "srctrg.trg", "dev.src", "dev.trg"),
}


def _cap_threads(argv: list[str]) -> None:
    """Apply --threads to the BLAS pool; must run before numpy is imported."""
    threads = None
    for i, arg in enumerate(argv):
        if arg == "--threads" and i + 1 < len(argv):
            threads = argv[i + 1]
        elif arg.startswith("--threads="):
            threads = arg.split("=", 1)[1]
    if threads is None:
        return
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ[var] = str(threads)


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; this surface reserves 2 for runtime."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _add_common(sub: argparse.ArgumentParser, seed_required: bool) -> None:
    sub.add_argument("--config", help="JSON file of experiment settings")
    sub.add_argument("--seed", type=int, required=seed_required,
                     default=None if seed_required else 0,
                     help="random seed" + (" (required: stochastic command)" if seed_required else ""))
    sub.add_argument("--threads", type=int, help="cap BLAS worker threads")
    sub.add_argument("--overwrite", action="store_true",
                     help="allow clobbering existing outputs")


def _resolve(args, **overrides):
    from .config import load_config_file, resolve_config
    file_values = load_config_file(args.config) if args.config else None
    overrides["seed"] = args.seed
    return resolve_config(file_values, overrides)


def _read_required(path: Path) -> list[str]:
    from .corpus import read_lines
    if not Path(path).exists():
        raise IoError(f"missing input file: {path}")
    return read_lines(path)


def _load_subwords(subwords_dir):
    from .bpe import BpeModel
    from .vocab import Vocabulary
    subwords_dir = Path(subwords_dir)
    bpe = BpeModel.load(subwords_dir / BPE_FILE)
    vocab = Vocabulary.load(subwords_dir / VOCAB_FILE)
    return bpe, vocab


def _encode_lines(lines, bpe, vocab):
    from .corpus import encode
    return [encode(line, bpe, vocab) for line in lines]


def _payload(ids: list[int]) -> list[int]:
    from .vocab import EOS_ID
    return ids[:-1] if ids and ids[-1] == EOS_ID else list(ids)


def _write_report(path: Path, records: list[dict]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for record in records:
            fh.write(json.dumps(record, sort_keys=True) + "\n")


def cmd_gen_data(args) -> int:
    from .config import start_run, write_manifest
    from .synthetic import SyntheticTaskSpec, gen_synthetic_corpus
    cfg = _resolve(args)
    out = start_run(args.out, cfg, args.overwrite)
    spec = SyntheticTaskSpec.build(cfg.alphabet, cfg.sent_min_len, cfg.sent_max_len,
                                   cfg.reorder_window, cfg.noise, cfg.seed)
    sizes = {"src-piv": cfg.n_srcpiv, "piv-trg": cfg.n_pivtrg,
             "src-trg": cfg.n_srctrg, "three-way-dev": cfg.n_dev,
             "three-way-test": cfg.n_test}
    from .config import ensure_fresh
    expected = [out / name for name in
                ("srcpiv.src", "srcpiv.piv", "pivtrg.piv", "pivtrg.trg",
                 "srctrg.src", "srctrg.trg", "dev.src", "dev.piv", "dev.trg",
                 "test.src", "test.piv", "test.trg", "task_spec.json")]
    ensure_fresh(expected, args.overwrite)
    written = gen_synthetic_corpus(spec, sizes, out)
    write_manifest(out, written)
    print(f"wrote {len(written)} corpus files to {out}")
    return 0


def cmd_train_bpe(args) -> int:
    from .bpe import build_vocabulary, train_bpe
    from .config import ensure_fresh, start_run, write_manifest
    cfg = _resolve(args, bpe_merges=args.merges)
    data = Path(args.data)
    blobs = [Path(data / name).read_text(encoding="utf-8") for name in
             ("srcpiv.src", "srcpiv.piv", "pivtrg.piv", "pivtrg.trg",
              "srctrg.src", "srctrg.trg")
             if (data / name).exists()]
    if not blobs:
        raise InputError(f"no training corpora found under {data}")
    out = start_run(args.out, cfg, args.overwrite)
    bpe_path, vocab_path = out / BPE_FILE, out / VOCAB_FILE
    ensure_fresh([bpe_path, vocab_path], args.overwrite)
    bpe = train_bpe(blobs, cfg.bpe_merges)
    vocab = build_vocabulary(bpe, blobs)
    bpe.save(bpe_path)
    vocab.save(vocab_path)
    write_manifest(out, [bpe_path, vocab_path])
    print(f"trained {cfg.bpe_merges} merges; vocabulary size {len(vocab)}; wrote {out}")
    return 0


def _train_model(args, kind: str) -> int:
    from .checkpoint import save_model, vocab_fingerprint
    from .config import ensure_fresh, start_run, write_manifest
    from .rng import seed_rng, split_rng
    from .transformer import ArModel, ModelConfig
    cfg = _resolve(args, epochs=args.epochs, peak_lr=args.lr)
    data = Path(args.data)
    bpe, vocab = _load_subwords(args.subwords)

    if kind == "ar":
        src_name, trg_name, dev_src_name, dev_trg_name = PAIR_FILES[args.pair]
        src_dir, trg_dir = data, data
    else:
        if args.distilled:
            src_dir = trg_dir = Path(args.distilled)
            src_name, trg_name = "distilled.src", "distilled.piv"
        else:
            src_dir = trg_dir = data
            src_name, trg_name = "srcpiv.src", "srcpiv.piv"
        dev_src_name, dev_trg_name = "dev.src", "dev.piv"
    sources = _encode_lines(_read_required(src_dir / src_name), bpe, vocab)
    targets = _encode_lines(_read_required(trg_dir / trg_name), bpe, vocab)
    dev_sources = _encode_lines(_read_required(data / dev_src_name), bpe, vocab)
    dev_targets = _encode_lines(_read_required(data / dev_trg_name), bpe, vocab)
    if len(sources) != len(targets):
        raise InputError(f"{src_name}/{trg_name} line counts differ")

    out = start_run(args.out, cfg, args.overwrite)
    ckpt_path, report_path = out / CKPT_FILE, out / REPORT_FILE
    ensure_fresh([ckpt_path, report_path], args.overwrite)
    init_rng, train_rng = split_rng(seed_rng(cfg.seed), 2)

    if kind == "ar":
        from .training import train_ar
        model_cfg = ModelConfig(len(vocab), len(vocab), cfg.dim, cfg.layers, cfg.heads,
                                cfg.ff_dim, cfg.max_len, cfg.dropout)
        model = ArModel(model_cfg, init_rng)
        records = train_ar(model, list(zip(sources, targets)),
                           list(zip(dev_sources, dev_targets)), cfg.epochs, train_rng,
                           cfg.peak_lr, cfg.warmup_steps, cfg.token_budget)
    else:
        from .cmlm import CmlmModel
        from .training import train_cmlm
        pairs = [(s, _payload(t)) for s, t in zip(sources, targets)]
        kept = [(s, t) for s, t in pairs if 1 <= len(t) <= cfg.k_max]
        if len(kept) < len(pairs):
            log.warning("dropped %d sentences with payload length outside [1, %d]",
                        len(pairs) - len(kept), cfg.k_max)
        if not kept:
            raise InputError("no usable sentences: every payload length falls "
                             f"outside [1, {cfg.k_max}]")
        dev_pairs = [(s, _payload(t)) for s, t in zip(dev_sources, dev_targets)]
        dev_pairs = [(s, t) for s, t in dev_pairs if 1 <= len(t) <= cfg.k_max]
        model_cfg = ModelConfig(len(vocab), len(vocab), cfg.dim, cfg.layers, cfg.heads,
                                cfg.ff_dim, cfg.max_len, cfg.dropout,
                                length_classes=cfg.k_max)
        model = CmlmModel(model_cfg, init_rng)
        records = train_cmlm(model, kept, dev_pairs, cfg.epochs, train_rng,
                             cfg.peak_lr, cfg.warmup_steps, cfg.token_budget)

    save_model(ckpt_path, model, vocab_fingerprint(vocab), records[-1].extra["global_step"])
    _write_report(report_path, [r.to_dict() for r in records])
    write_manifest(out, [ckpt_path, report_path])
    print(f"final dev loss {records[-1].dev_loss:.4f} after {cfg.epochs} epochs; "
          f"checkpoint {ckpt_path}")
    return 0


def cmd_train_ar(args) -> int:
    return _train_model(args, "ar")


def cmd_train_cmlm(args) -> int:
    return _train_model(args, "cmlm")


def cmd_distill(args) -> int:
    from .checkpoint import load_model
    from .config import ensure_fresh, start_run, write_manifest
    from .corpus import decode as decode_ids
    from .corpus import write_lines
    from .rl import distill_corpus
    cfg = _resolve(args, distill_beam=args.beam)
    bpe, vocab = _load_subwords(args.subwords)
    teacher, header = load_model(args.teacher)
    if header["model_kind"] != "ar":
        raise InputError(f"distillation teacher must be autoregressive, got {header['model_kind']}")
    source_lines = _read_required(Path(args.data) / "srcpiv.src")
    sources = _encode_lines(source_lines, bpe, vocab)
    out = start_run(args.out, cfg, args.overwrite)
    src_path, piv_path = out / "distilled.src", out / "distilled.piv"
    ensure_fresh([src_path, piv_path], args.overwrite)
    outputs = distill_corpus(teacher, sources, cfg.distill_beam, cfg.max_len)
    write_lines(src_path, source_lines)
    write_lines(piv_path, [decode_ids(ids, vocab) for ids in outputs])
    write_manifest(out, [src_path, piv_path])
    print(f"distilled {len(outputs)} sentences with beam {cfg.distill_beam} to {out}")
    return 0


def cmd_rl_finetune(args) -> int:
    from .checkpoint import load_model, save_model, vocab_fingerprint
    from .config import ensure_fresh, start_run, write_manifest
    cfg = _resolve(args)
    rl_overrides = {"reward": args.reward, "seed": cfg.seed}
    if args.lr is not None:
        rl_overrides["lr"] = args.lr
    if args.epochs is not None:
        rl_overrides["epochs"] = args.epochs
    if args.batch_size is not None:
        rl_overrides["batch_size"] = args.batch_size
    rl_config = cfg.rl_config(**rl_overrides)
    bpe, vocab = _load_subwords(args.subwords)
    cmlm, cmlm_header = load_model(args.cmlm)
    piv2trg, ar_header = load_model(args.pivtrg)
    if cmlm_header["model_kind"] != "cmlm":
        raise InputError(f"--cmlm must point at a masked model, got {cmlm_header['model_kind']}")
    if ar_header["model_kind"] != "ar":
        raise InputError(f"--pivtrg must point at an autoregressive model, got {ar_header['model_kind']}")

    data = Path(args.data)
    train_sources = _encode_lines(_read_required(data / "srctrg.src"), bpe, vocab)
    train_targets = _encode_lines(_read_required(data / "srctrg.trg"), bpe, vocab)
    dev_sources = _encode_lines(_read_required(data / "dev.src"), bpe, vocab)
    dev_references = _read_required(data / "dev.trg")

    out = start_run(args.out, cfg, args.overwrite)
    ckpt_path, report_path = out / CKPT_FILE, out / REPORT_FILE
    ensure_fresh([ckpt_path, report_path], args.overwrite)

    from .rl import rl_finetune
    report, best_state = rl_finetune(cmlm, piv2trg, list(zip(train_sources, train_targets)),
                                     dev_sources, dev_references, rl_config, vocab)
    for name, value in best_state.items():
        cmlm.params[name].data[...] = value
    save_model(ckpt_path, cmlm, vocab_fingerprint(vocab), len(report))
    _write_report(report_path, report)
    write_manifest(out, [ckpt_path, report_path])
    best_bleu = max(r["dev_bleu"] for r in report)
    print(f"reward {rl_config.reward}: best dev cascade BLEU {best_bleu:.2f} "
          f"over {len(report)} epochs; checkpoint {ckpt_path}")
    return 0


def _cascade_parts(args):
    from .checkpoint import load_model
    from .rl import DecodeConfig
    bpe, vocab = _load_subwords(args.subwords)
    src2piv, _ = load_model(args.src2piv)
    piv2trg, header = load_model(args.pivtrg)
    if header["model_kind"] != "ar":
        raise InputError(f"--pivtrg must point at an autoregressive model, got {header['model_kind']}")
    cfg = _resolve(args)
    decode_config = DecodeConfig(iterations=cfg.decode_iterations,
                                 stage1_beam=cfg.beam_size, stage2="greedy",
                                 max_pivot_len=cfg.max_len, max_target_len=cfg.max_len)
    return bpe, vocab, src2piv, piv2trg, cfg, decode_config


def cmd_decode_pivot(args) -> int:
    from .config import ensure_fresh, start_run, write_manifest
    from .corpus import decode as decode_ids
    from .corpus import write_lines
    from .rl import two_step_decode_batch
    bpe, vocab, src2piv, piv2trg, cfg, decode_config = _cascade_parts(args)
    lines = _read_required(args.input)
    sources = _encode_lines(lines, bpe, vocab)
    out = start_run(args.out, cfg, args.overwrite)
    piv_path, trg_path = out / "pivot.txt", out / "target.txt"
    ensure_fresh([piv_path, trg_path], args.overwrite)
    results = []
    for start in range(0, len(sources), 64):
        results.extend(two_step_decode_batch(src2piv, piv2trg,
                                             sources[start:start + 64], decode_config))
    write_lines(piv_path, [decode_ids(r.pivot.ids, vocab) for r in results])
    write_lines(trg_path, [decode_ids(r.target.ids, vocab) for r in results])
    write_manifest(out, [piv_path, trg_path])
    print(f"decoded {len(results)} sentences; pivots {piv_path}, targets {trg_path}")
    return 0


def cmd_evaluate(args) -> int:
    from .metrics import corpus_bleu, sentence_bleu, sentence_chrf
    hyp_lines = _read_required(args.hypothesis)
    ref_lines = _read_required(args.reference)
    score = corpus_bleu(hyp_lines, ref_lines)
    sent_bleu = [sentence_bleu(h.split(), r.split()).value
                 for h, r in zip(hyp_lines, ref_lines)]
    sent_chrf = [sentence_chrf(h, r).value for h, r in zip(hyp_lines, ref_lines)]
    report = {
        "corpus_bleu": score.value,
        "sentence_bleu_mean": sum(sent_bleu) / len(sent_bleu),
        "sentence_chrf_mean": sum(sent_chrf) / len(sent_chrf),
        "count": len(hyp_lines),
    }
    text = json.dumps(report, indent=2, sort_keys=True)
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        from .config import ensure_fresh
        ensure_fresh([out], args.overwrite)
        out.write_text(text + "\n", encoding="utf-8")
    print(text)
    return 0


def cmd_bench_sampling(args) -> int:
    from .bench import bench_sampling
    from .checkpoint import load_model
    from .config import ensure_fresh, start_run, write_manifest
    from .rng import seed_rng
    cfg = _resolve(args)
    bpe, vocab = _load_subwords(args.subwords)
    ar_model, ar_header = load_model(args.ar)
    cmlm_model, cmlm_header = load_model(args.cmlm)
    if ar_header["model_kind"] != "ar" or cmlm_header["model_kind"] != "cmlm":
        raise InputError("bench-sampling needs --ar (autoregressive) and --cmlm (masked) checkpoints")
    lines = _read_required(Path(args.data) / "test.src")
    if args.limit:
        lines = lines[:args.limit]
    sources = _encode_lines(lines, bpe, vocab)
    out = start_run(args.out, cfg, args.overwrite)
    report_path = out / "bench.json"
    ensure_fresh([report_path], args.overwrite)
    report = bench_sampling(ar_model, cmlm_model, sources, seed_rng(cfg.seed),
                            batch_size=args.batch_size, max_len=args.max_len,
                            repetitions=args.repetitions)
    report_path.write_text(report.to_json(), encoding="utf-8")
    write_manifest(out, [report_path])
    na = report.record("cmlm")
    ar = report.record("ar")
    print(f"cmlm {na.wall_mean_seconds * 1e3:.1f}±{na.wall_std_seconds * 1e3:.1f} ms "
          f"vs ar {ar.wall_mean_seconds * 1e3:.1f}±{ar.wall_std_seconds * 1e3:.1f} ms "
          f"over {report.sentences} sentences; report {report_path}")
    if report.ci_overlap:
        print(f"warning: {report.warning}")
    return 0


def cmd_analyze_correlation(args) -> int:
    from .analysis import CorrelationRecord, emit_scatter, summarize_records
    from .config import ensure_fresh, start_run, write_manifest
    from .rl import evaluate_cascade
    bpe, vocab, src2piv, piv2trg, cfg, decode_config = _cascade_parts(args)
    data = Path(args.data)
    src_lines = _read_required(data / "test.src")
    piv_refs = _read_required(data / "test.piv")
    trg_refs = _read_required(data / "test.trg")
    sources = _encode_lines(src_lines, bpe, vocab)
    out = start_run(args.out, cfg, args.overwrite)
    svg_path, summary_path = out / "scatter.svg", out / "correlation.json"
    ensure_fresh([svg_path, svg_path.with_suffix(".tsv"), summary_path], args.overwrite)
    corpus_score, results = evaluate_cascade(src2piv, piv2trg, sources, trg_refs,
                                             decode_config, vocab, pivot_references=piv_refs)
    records = [CorrelationRecord(r.pivot_score, r.target_score) for r in results]
    summary = summarize_records(records)
    tsv_path = emit_scatter(records, svg_path)
    summary_dict = {**summary.to_dict(), "cascade_corpus_bleu": corpus_score}
    summary_path.write_text(json.dumps(summary_dict, indent=2, sort_keys=True) + "\n",
                            encoding="utf-8")
    write_manifest(out, [svg_path, tsv_path, summary_path])
    print(f"n={summary.count} pearson={summary_dict['pearson']} "
          f"spearman={summary_dict['spearman']} cascade BLEU {corpus_score:.2f}; "
          f"scatter {svg_path}")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="pivotnmt",
                     description="Pivot-based NMT with a non-autoregressive first "
                                 "stage and REINFORCE fine-tuning.")
    subs = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sub = subs.add_parser("gen-data", help="write a synthetic three-language corpus")
    _add_common(sub, seed_required=True)
    sub.add_argument("--out", required=True, help="corpus output directory")
    sub.set_defaults(func=cmd_gen_data)

    sub = subs.add_parser("train-bpe", help="learn subword merges and the joint vocabulary")
    _add_common(sub, seed_required=False)
    sub.add_argument("--data", required=True, help="corpus directory from gen-data")
    sub.add_argument("--out", required=True, help="output directory for bpe.model/vocab.tsv")
    sub.add_argument("--merges", type=int, help="override merge count")
    sub.set_defaults(func=cmd_train_bpe)

    sub = subs.add_parser("train-ar", help="MLE-train an autoregressive model")
    _add_common(sub, seed_required=True)
    sub.add_argument("--data", required=True)
    sub.add_argument("--subwords", required=True, help="directory from train-bpe")
    sub.add_argument("--pair", required=True, choices=sorted(PAIR_FILES))
    sub.add_argument("--out", required=True)
    sub.add_argument("--epochs", type=int)
    sub.add_argument("--lr", type=float, dest="lr", help="peak learning rate")
    sub.set_defaults(func=cmd_train_ar)

    sub = subs.add_parser("train-cmlm", help="MLE-train the masked src->piv model")
    _add_common(sub, seed_required=True)
    sub.add_argument("--data", required=True)
    sub.add_argument("--subwords", required=True)
    sub.add_argument("--distilled", help="directory from distill; use its corpus instead")
    sub.add_argument("--out", required=True)
    sub.add_argument("--epochs", type=int)
    sub.add_argument("--lr", type=float, dest="lr")
    sub.set_defaults(func=cmd_train_cmlm)

    sub = subs.add_parser("distill", help="re-label the src->piv corpus with a teacher")
    _add_common(sub, seed_required=False)
    sub.add_argument("--data", required=True)
    sub.add_argument("--subwords", required=True)
    sub.add_argument("--teacher", required=True, help="autoregressive src->piv checkpoint")
    sub.add_argument("--out", required=True)
    sub.add_argument("--beam", type=int, help="teacher beam size")
    sub.set_defaults(func=cmd_distill)

    sub = subs.add_parser("rl-finetune", help="REINFORCE fine-tuning of the masked model")
    _add_common(sub, seed_required=True)
    sub.add_argument("--data", required=True)
    sub.add_argument("--subwords", required=True)
    sub.add_argument("--cmlm", required=True, help="masked src->piv checkpoint")
    sub.add_argument("--pivtrg", required=True, help="frozen piv->trg checkpoint")
    sub.add_argument("--reward", required=True, choices=("negce", "bleu", "chrf"))
    sub.add_argument("--out", required=True)
    sub.add_argument("--lr", type=float)
    sub.add_argument("--epochs", type=int)
    sub.add_argument("--batch-size", type=int, dest="batch_size")
    sub.set_defaults(func=cmd_rl_finetune)

    sub = subs.add_parser("decode-pivot", help="two-step cascade decoding of a text file")
    _add_common(sub, seed_required=False)
    sub.add_argument("--subwords", required=True)
    sub.add_argument("--src2piv", required=True, help="first-stage checkpoint (masked or AR)")
    sub.add_argument("--pivtrg", required=True)
    sub.add_argument("--input", required=True, help="source text, one sentence per line")
    sub.add_argument("--out", required=True)
    sub.set_defaults(func=cmd_decode_pivot)

    sub = subs.add_parser("evaluate", help="corpus BLEU of a hypothesis file")
    _add_common(sub, seed_required=False)
    sub.add_argument("--hypothesis", required=True)
    sub.add_argument("--reference", required=True)
    sub.add_argument("--out", help="optional JSON report path")
    sub.set_defaults(func=cmd_evaluate)

    sub = subs.add_parser("bench-sampling", help="time parallel vs ancestral sampling")
    _add_common(sub, seed_required=True)
    sub.add_argument("--data", required=True)
    sub.add_argument("--subwords", required=True)
    sub.add_argument("--ar", required=True, help="autoregressive src->piv checkpoint")
    sub.add_argument("--cmlm", required=True, help="masked src->piv checkpoint")
    sub.add_argument("--out", required=True)
    sub.add_argument("--limit", type=int, help="benchmark only the first N sentences")
    sub.add_argument("--batch-size", type=int, default=64, dest="batch_size")
    sub.add_argument("--max-len", type=int, default=32, dest="max_len")
    sub.add_argument("--repetitions", type=int, default=3)
    sub.set_defaults(func=cmd_bench_sampling)

    sub = subs.add_parser("analyze-correlation",
                          help="pivot-vs-target sentence BLEU on the three-way test set")
    _add_common(sub, seed_required=False)
    sub.add_argument("--data", required=True)
    sub.add_argument("--subwords", required=True)
    sub.add_argument("--src2piv", required=True)
    sub.add_argument("--pivtrg", required=True)
    sub.add_argument("--out", required=True)
    sub.set_defaults(func=cmd_analyze_correlation)

    return parser


def dispatch(argv: list[str]) -> int:
    _cap_threads(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except PivotNmtError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def entry() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    entry()
