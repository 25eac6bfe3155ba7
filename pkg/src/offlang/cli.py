"""Command-line pipeline driver.

One executable with the subcommands build-vocab, pretrain, finetune,
distill, crossval, predict, evaluate, stats and rerun. Every run that
produces artifacts gets its own run directory containing ``manifest.json``
with the fully resolved configuration, input paths, seed and tool version;
``rerun`` re-executes a manifest and reproduces the outputs byte for byte.

Settings resolve in three layers: command-line flags override values from
the ``key = value`` config file (INI sections ``[encoder]``, ``[training]``,
``[masking]``), which override built-in defaults. Environment variables are
never consulted.

Exit codes: 0 success, 1 runtime failure (single-line ``error: ...`` on
stderr), 2 usage error.
"""

from __future__ import annotations

import argparse
import configparser
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .corpus import (
    LabeledExample,
    ParseError,
    Task,
    ValidationError,
    format_stats,
    mix_multilingual,
    parse_olid,
    parse_solid_distant,
    stats,
)
from .distillation import (
    FileTeacher,
    ModelTeacher,
    TeacherEnsemble,
    distill_student,
    ensemble_soft_labels,
    write_soft_labels,
)
from .encoder import (
    CheckpointError,
    EncoderConfig,
    ModelParameters,
    init_params,
    load_checkpoint,
    save_checkpoint,
)
from .ensemble import predict_ensemble, train_cv_ensemble, write_predictions
from .evaluation import compare_runs, confusion, format_report, report
from .tokenizer import Vocabulary, VocabError, build_vocab
from .training import (
    MaskingPolicy,
    TrainConfig,
    finetune,
    pretrain_mlm,
)

RUNTIME_ERRORS = (
    ParseError,
    ValidationError,
    CheckpointError,
    VocabError,
    ValueError,
    OSError,
)


class CliError(Exception):
    """Runtime failure with a user-facing one-line message."""


# ---------------------------------------------------------------------------
# Config resolution: flags > config file > defaults


def _read_config_file(path: str | None) -> dict[str, dict[str, str]]:
    if path is None:
        return {}
    if not Path(path).is_file():
        raise CliError(f"config file not found: {path}")
    parser = configparser.ConfigParser()
    parser.read(path, encoding="utf-8")
    return {section: dict(parser.items(section)) for section in parser.sections()}


def _coerce(value: str, target_type):
    if target_type is bool:
        if value.lower() in ("1", "true", "yes", "on"):
            return True
        if value.lower() in ("0", "false", "no", "off"):
            return False
        raise CliError(f"expected a boolean, got {value!r}")
    return target_type(value)


def _resolve_section(cls, file_section: dict[str, str], overrides: dict) -> dict:
    """Merge dataclass defaults, config-file strings and explicit overrides."""
    out = {}
    for f in dataclasses.fields(cls):
        if overrides.get(f.name) is not None:
            out[f.name] = overrides[f.name]
        elif f.name in file_section:
            base = type(f.default) if f.default is not None else float
            if f.name == "warmup_steps":
                base = int
            out[f.name] = _coerce(file_section[f.name], base)
    return out


def resolve_encoder_config(
    file_cfg: dict, args: argparse.Namespace, vocab_size: int
) -> EncoderConfig:
    overrides = {
        "layers": getattr(args, "layers", None),
        "hidden": getattr(args, "hidden", None),
        "heads": getattr(args, "heads", None),
        "ff": getattr(args, "ff", None),
        "max_len": getattr(args, "max_len", None),
        "dropout": getattr(args, "dropout", None),
    }
    fields = _resolve_section(EncoderConfig, file_cfg.get("encoder", {}), overrides)
    fields.pop("vocab_size", None)
    fields.pop("tasks", None)
    return EncoderConfig(vocab_size=vocab_size, **fields)


def resolve_train_config(file_cfg: dict, args: argparse.Namespace) -> TrainConfig:
    overrides = {
        "learning_rate": getattr(args, "lr", None),
        "batch_size": getattr(args, "batch_size", None),
        "epochs": getattr(args, "epochs", None),
        "seed": getattr(args, "seed", None),
    }
    fields = _resolve_section(TrainConfig, file_cfg.get("training", {}), overrides)
    return TrainConfig(**fields)


def resolve_masking(file_cfg: dict) -> MaskingPolicy:
    fields = _resolve_section(MaskingPolicy, file_cfg.get("masking", {}), {})
    return MaskingPolicy(**fields)


# ---------------------------------------------------------------------------
# Data loading


def _parse_data_arg(value: str) -> tuple[str, str]:
    """``lang=path`` or bare path (language defaults to ``en``)."""
    if "=" in value:
        lang, path = value.split("=", 1)
        return lang, path
    return "en", value


def _require_files(paths: list[str]) -> None:
    missing = [p for p in paths if not Path(p).is_file()]
    if missing:
        raise CliError(f"input file not found: {missing[0]}")


def load_datasets(
    data_args: list[str], data_format: str = "olid", task: Task | None = None
) -> list[LabeledExample]:
    """Parse and concatenate ``lang=path`` datasets; ids become ``lang:id``."""
    pairs = [_parse_data_arg(v) for v in data_args]
    _require_files([p for _, p in pairs])
    datasets = []
    for lang, path in pairs:
        if data_format == "solid":
            if task is None:
                raise CliError("--format solid needs a --task")
            examples = parse_solid_distant(path, task, language=lang)
        else:
            examples = parse_olid(path, lang)
        datasets.append((lang, examples))
    return mix_multilingual(datasets)


def _load_corpus_texts(corpus_args: list[str]) -> list[str]:
    """Text lines from .txt files, otherwise the tweet column of gold TSVs."""
    pairs = [_parse_data_arg(v) for v in corpus_args]
    _require_files([p for _, p in pairs])
    texts: list[str] = []
    for lang, path in pairs:
        if path.endswith(".txt"):
            texts.extend(
                line for line in Path(path).read_text(encoding="utf-8").splitlines() if line
            )
        else:
            texts.extend(ex.text for ex in parse_olid(path, lang))
    return texts


# ---------------------------------------------------------------------------
# Run directories and manifests


def _make_run_dir(out: str) -> Path:
    run_dir = Path(out)
    if run_dir.exists() and any(run_dir.iterdir()):
        raise CliError(f"output directory {out} exists and is not empty")
    run_dir.mkdir(parents=True, exist_ok=True)
    return run_dir


def _write_manifest(run_dir: Path, spec: dict) -> None:
    (run_dir / "manifest.json").write_text(
        json.dumps(spec, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def _write_history(run_dir: Path, history, name: str = "history.jsonl") -> None:
    lines = [json.dumps(rec.to_json_dict(), sort_keys=True) for rec in history]
    (run_dir / name).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _abs(path: str | None) -> str | None:
    return None if path is None else str(Path(path).resolve())


def _abs_data(values: list[str]) -> list[str]:
    out = []
    for v in values:
        lang, path = _parse_data_arg(v)
        out.append(f"{lang}={Path(path).resolve()}")
    return out


# ---------------------------------------------------------------------------
# Command execution (spec dicts are exactly what manifests store)


def execute_build_vocab(spec: dict, out_path: str) -> None:
    texts = _load_corpus_texts(spec["inputs"]["corpus"])
    if not texts:
        raise CliError("corpus is empty")
    vocab = build_vocab(texts, spec["size"])
    Path(out_path).parent.mkdir(parents=True, exist_ok=True)
    vocab.save(out_path)
    print(f"wrote vocabulary of {vocab.size} tokens to {out_path}")


def execute_pretrain(spec: dict, out: str) -> None:
    _require_files([spec["inputs"]["vocab"]])
    texts = _load_corpus_texts(spec["inputs"]["corpus"])
    vocab = Vocabulary.load(spec["inputs"]["vocab"])
    encoder_cfg = EncoderConfig(vocab_size=vocab.size, **spec["encoder"])
    train_cfg = TrainConfig(**spec["training"])
    policy = MaskingPolicy(**spec["masking"])
    run_dir = _make_run_dir(out)
    _write_manifest(run_dir, spec)
    params, history = pretrain_mlm(
        texts, vocab, encoder_cfg, train_cfg, policy, checkpoint_dir=run_dir
    )
    save_checkpoint(params, run_dir / "final.ckpt")
    _write_history(run_dir, history)
    print(f"pretrained {train_cfg.epochs} epochs; final checkpoint in {run_dir}")


def _init_model(spec: dict, vocab: Vocabulary) -> ModelParameters:
    if spec["inputs"].get("init"):
        params = load_checkpoint(spec["inputs"]["init"])
        if params.config.vocab_size != vocab.size:
            raise CliError(
                f"checkpoint vocab_size={params.config.vocab_size} does not match "
                f"vocabulary of {vocab.size} tokens"
            )
        return params
    encoder_cfg = EncoderConfig(vocab_size=vocab.size, **spec["encoder"])
    return init_params(encoder_cfg, spec["training"]["seed"])


def execute_finetune(spec: dict, out: str) -> None:
    inputs = spec["inputs"]
    _require_files([inputs["vocab"]] + ([inputs["init"]] if inputs.get("init") else []))
    task = Task(spec["task"])
    examples = load_datasets(inputs["data"], spec.get("data_format", "olid"), task)
    val = load_datasets(inputs["val"], "olid", task) if inputs.get("val") else None
    vocab = Vocabulary.load(inputs["vocab"])
    train_cfg = TrainConfig(**spec["training"])
    n_seeds = spec.get("seeds", 1)
    if n_seeds > 1 and val is None:
        raise CliError("--seeds sweeps need --val data to report macro-F1")
    run_dir = _make_run_dir(out)
    _write_manifest(run_dir, spec)
    reports = []
    for offset in range(n_seeds):
        sweep_cfg = dataclasses.replace(train_cfg, seed=train_cfg.seed + offset)
        init = _init_model({**spec, "training": dataclasses.asdict(sweep_cfg)}, vocab)
        params, history = finetune(
            init, examples, task, vocab, sweep_cfg,
            loss_mode=spec["loss"], val_examples=val,
        )
        suffix = f"_seed{sweep_cfg.seed}" if n_seeds > 1 else ""
        save_checkpoint(params, run_dir / f"model{suffix}.ckpt")
        _write_history(run_dir, history, f"history{suffix}.jsonl")
        if val is not None:
            from .encoder import classify
            from .training import encode_examples

            probs = classify(params, encode_examples(val, vocab, params.config.max_len), task)
            preds = [task.labels[i] for i in probs.argmax(axis=1)]
            golds = [ex.hard[task] for ex in val]
            reports.append((f"seed{sweep_cfg.seed}", report(confusion(golds, preds, task))))
    if reports:
        table = compare_runs(reports, fmt="text")
        (run_dir / "sweep.txt").write_text(table + "\n", encoding="utf-8")
        print(table)
    print(f"finetune run complete in {run_dir}")


def execute_distill(spec: dict, out: str) -> None:
    inputs = spec["inputs"]
    _require_files([inputs["vocab"]] + [p for _, p in inputs["teachers"]])
    task = Task(spec["task"])
    examples = load_datasets(inputs["data"], spec.get("data_format", "olid"), task)
    vocab = Vocabulary.load(inputs["vocab"])
    train_cfg = TrainConfig(**spec["training"])

    teachers = []
    for name, path in inputs["teachers"]:
        if path.endswith(".ckpt"):
            teachers.append(ModelTeacher.from_checkpoint(name, path, vocab))
        else:
            teachers.append(FileTeacher.from_file(name, path, task))
    ensemble = TeacherEnsemble(teachers, spec.get("weights"))

    run_dir = _make_run_dir(out)
    _write_manifest(run_dir, spec)
    soft_examples = ensemble_soft_labels(ensemble, examples, task)
    write_soft_labels(run_dir / "soft_labels.tsv", soft_examples, task)
    student_init = _init_model(spec, vocab)
    student, history = distill_student(student_init, soft_examples, task, vocab, train_cfg)
    save_checkpoint(student, run_dir / "student.ckpt")
    _write_history(run_dir, history)
    print(f"distilled student into {run_dir}")


def execute_crossval(spec: dict, out: str) -> None:
    inputs = spec["inputs"]
    _require_files([inputs["vocab"]])
    task = Task(spec["task"])
    examples = load_datasets(inputs["data"], spec.get("data_format", "olid"), task)
    test = load_datasets(inputs["test"], "olid", task) if inputs.get("test") else None
    vocab = Vocabulary.load(inputs["vocab"])
    base_cfg = TrainConfig(**spec["training"])
    run_dir = _make_run_dir(out)
    _write_manifest(run_dir, spec)

    sweep_reports = []
    for offset in range(spec.get("seeds", 1)):
        train_cfg = dataclasses.replace(base_cfg, seed=base_cfg.seed + offset)
        init = _init_model({**spec, "training": dataclasses.asdict(train_cfg)}, vocab)
        ensemble = train_cv_ensemble(
            examples, task, spec["k"], init, vocab, train_cfg,
            loss_mode=spec["loss"], jobs=spec.get("jobs", 1),
        )
        tag = f"_seed{train_cfg.seed}" if spec.get("seeds", 1) > 1 else ""
        (run_dir / f"split{tag}.json").write_text(
            json.dumps(
                {"k": ensemble.split.k, "assignments": ensemble.split.assignments},
                indent=2, sort_keys=True,
            ) + "\n",
            encoding="utf-8",
        )
        for member in ensemble.members:
            save_checkpoint(member.params, run_dir / f"member{tag}_{member.fold:02d}.ckpt")
        fold_reports = [(f"fold{m.fold}", m.validation) for m in ensemble.members]
        fold_table = compare_runs(fold_reports, fmt="tsv")
        (run_dir / f"fold_reports{tag}.tsv").write_text(fold_table, encoding="utf-8")

        predict_on = test if test is not None else examples
        results = predict_ensemble(ensemble, predict_on, task, vocab)
        write_predictions(
            run_dir / f"predictions{tag}.tsv",
            [ex.id for ex in predict_on],
            results,
            fmt=spec.get("format", "tsv"),
        )
        sweep_reports.append((f"seed{train_cfg.seed}", fold_reports))

    if spec.get("seeds", 1) > 1:
        rows = [(name, _mean_report(reports)) for name, reports in sweep_reports]
        table = compare_runs(rows, fmt="text")
        (run_dir / "sweep.txt").write_text(table + "\n", encoding="utf-8")
        print(table)
    else:
        print((run_dir / "fold_reports.tsv").read_text(encoding="utf-8"), end="")
    print(f"cross-validation run complete in {run_dir}")


def _mean_report(fold_reports):
    # average the per-fold validation reports into one summary row
    from .evaluation import ClassMetrics, MetricsReport

    task = fold_reports[0][1].task
    per_class = []
    for i, label in enumerate(task.labels):
        per_class.append(
            ClassMetrics(
                label=label,
                precision=float(np.mean([r.per_class[i].precision for _, r in fold_reports])),
                recall=float(np.mean([r.per_class[i].recall for _, r in fold_reports])),
                f1=float(np.mean([r.per_class[i].f1 for _, r in fold_reports])),
                support=sum(r.per_class[i].support for _, r in fold_reports),
                included=True,
            )
        )
    macro = float(np.mean([r.macro_f1 for _, r in fold_reports]))
    return MetricsReport(task=task, per_class=tuple(per_class), macro_f1=macro)


def execute_predict(spec: dict, out_path: str) -> None:
    inputs = spec["inputs"]
    _require_files([inputs["vocab"]])
    task = Task(spec["task"])
    examples = load_datasets(inputs["data"], spec.get("data_format", "olid"), task)
    vocab = Vocabulary.load(inputs["vocab"])
    if inputs.get("model"):
        _require_files([inputs["model"]])
        members = [load_checkpoint(inputs["model"])]
    else:
        run_dir = Path(inputs["ensemble"])
        ckpts = sorted(run_dir.glob("member_*.ckpt"))
        if not ckpts:
            raise CliError(f"no member_*.ckpt checkpoints under {run_dir}")
        members = [load_checkpoint(p) for p in ckpts]
    results = predict_ensemble(members, examples, task, vocab)
    Path(out_path).parent.mkdir(parents=True, exist_ok=True)
    write_predictions(out_path, [ex.id for ex in examples], results, fmt=spec.get("format", "tsv"))
    print(f"wrote {len(results)} predictions to {out_path}")


def execute_evaluate(spec: dict, out_path: str | None) -> None:
    from .ensemble import read_predictions

    inputs = spec["inputs"]
    _require_files([p for _, p in map(_parse_data_arg, inputs["gold"])] + [inputs["pred"]])
    task = Task(spec["task"])
    golds = load_datasets(inputs["gold"], "olid", task)
    preds_by_id = read_predictions(inputs["pred"])
    missing = [ex.id for ex in golds if ex.id not in preds_by_id]
    if missing:
        raise CliError(f"predictions missing for ids: {missing[:5]}")
    unlabeled = [ex.id for ex in golds if task not in ex.hard]
    if unlabeled:
        raise CliError(f"gold examples missing task-{task.value} labels: {unlabeled[:5]}")
    gold_labels = [ex.hard[task] for ex in golds]
    pred_labels = [preds_by_id[ex.id] for ex in golds]
    rep = report(confusion(gold_labels, pred_labels, task))
    text = format_report(rep)
    if out_path:
        Path(out_path).write_text(text + "\n", encoding="utf-8")
    print(text)


def execute_stats(spec: dict, out_path: str | None) -> None:
    examples = load_datasets(spec["inputs"]["data"], spec.get("data_format", "olid"),
                             Task(spec["task"]) if spec.get("task") else None)
    table = format_stats(stats(examples), Task(spec.get("task") or "A"))
    if out_path:
        Path(out_path).write_text(table + "\n", encoding="utf-8")
    print(table)


_EXECUTORS = {
    "build-vocab": lambda spec, out: execute_build_vocab(spec, out),
    "pretrain": execute_pretrain,
    "finetune": execute_finetune,
    "distill": execute_distill,
    "crossval": execute_crossval,
    "predict": execute_predict,
}


# ---------------------------------------------------------------------------
# Argument parsing


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="offlang",
        description="Offensive language detection and categorization pipeline.",
    )
    parser.add_argument("--version", action="version", version=f"offlang {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, with_model_knobs=True):
        p.add_argument("--config", help="key = value config file with [encoder]/[training] sections")
        p.add_argument("--seed", type=int, default=None)
        if with_model_knobs:
            p.add_argument("--layers", type=int, default=None)
            p.add_argument("--hidden", type=int, default=None)
            p.add_argument("--heads", type=int, default=None)
            p.add_argument("--ff", type=int, default=None)
            p.add_argument("--max-len", dest="max_len", type=int, default=None)
            p.add_argument("--dropout", type=float, default=None)
            p.add_argument("--lr", type=float, default=None)
            p.add_argument("--batch-size", dest="batch_size", type=int, default=None)
            p.add_argument("--epochs", type=int, default=None)

    p = sub.add_parser("build-vocab", help="learn a byte-level BPE vocabulary")
    p.add_argument("--corpus", action="append", required=True,
                   help="text (.txt, one doc per line) or gold TSV; repeatable, lang=path allowed")
    p.add_argument("--size", type=int, default=2048)
    p.add_argument("--out", required=True)

    p = sub.add_parser("pretrain", help="masked-LM pretraining on raw texts")
    p.add_argument("--corpus", action="append", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--out", required=True, help="run directory")
    add_common(p)

    p = sub.add_parser("finetune", help="fine-tune a classifier head")
    p.add_argument("--init", help="starting checkpoint (default: fresh init)")
    p.add_argument("--data", action="append", required=True, help="lang=path, repeatable")
    p.add_argument("--val", action="append", help="validation data, lang=path")
    p.add_argument("--task", required=True, choices=["A", "B", "C"])
    p.add_argument("--loss", choices=["hard", "soft"], default="hard")
    p.add_argument("--format", dest="data_format", choices=["olid", "solid"], default="olid")
    p.add_argument("--vocab", required=True)
    p.add_argument("--seeds", type=int, default=1, help="seed-sweep width")
    p.add_argument("--out", required=True)
    add_common(p)

    p = sub.add_parser("distill", help="train a student on teacher soft labels")
    p.add_argument("--teachers", required=True,
                   help="comma-separated checkpoints (.ckpt) and/or soft-label TSVs")
    p.add_argument("--weights", help="comma-separated teacher weights")
    p.add_argument("--data", action="append", required=True)
    p.add_argument("--task", required=True, choices=["A", "B", "C"])
    p.add_argument("--format", dest="data_format", choices=["olid", "solid"], default="olid")
    p.add_argument("--vocab", required=True)
    p.add_argument("--init", help="student starting checkpoint (default: fresh init)")
    p.add_argument("--out", required=True)
    add_common(p)

    p = sub.add_parser("crossval", help="k-fold CV training + averaged prediction")
    p.add_argument("--data", action="append", required=True)
    p.add_argument("--test", action="append", help="predict on this set instead of --data")
    p.add_argument("--task", required=True, choices=["A", "B", "C"])
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--loss", choices=["hard", "soft"], default="hard")
    p.add_argument("--vocab", required=True)
    p.add_argument("--init", help="shared starting checkpoint")
    p.add_argument("--jobs", type=int, default=1, help="max folds trained concurrently")
    p.add_argument("--seeds", type=int, default=1)
    p.add_argument("--prediction-format", dest="pred_format", choices=["tsv", "csv"], default="tsv")
    p.add_argument("--out", required=True)
    add_common(p)

    p = sub.add_parser("predict", help="label a dataset with a model or ensemble")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--model", help="single checkpoint")
    group.add_argument("--ensemble", help="crossval run directory")
    p.add_argument("--data", action="append", required=True)
    p.add_argument("--task", required=True, choices=["A", "B", "C"])
    p.add_argument("--format", dest="pred_format", choices=["tsv", "csv"], default="tsv")
    p.add_argument("--vocab", required=True)
    p.add_argument("--out", required=True, help="prediction file path")

    p = sub.add_parser("evaluate", help="score predictions against gold labels")
    p.add_argument("--gold", action="append", required=True, help="gold TSV, lang=path")
    p.add_argument("--pred", required=True, help="prediction TSV")
    p.add_argument("--task", required=True, choices=["A", "B", "C"])
    p.add_argument("--out", help="also write the report here")

    p = sub.add_parser("stats", help="per-language label counts")
    p.add_argument("--data", action="append", required=True)
    p.add_argument("--task", choices=["A", "B", "C"], default="A")
    p.add_argument("--format", dest="data_format", choices=["olid", "solid"], default="olid")
    p.add_argument("--out")

    p = sub.add_parser("rerun", help="re-execute a run from its manifest")
    p.add_argument("manifest", help="path to manifest.json")
    p.add_argument("--out", required=True, help="new output location")

    return parser


def parse_invocation(argv: list[str]) -> argparse.Namespace:
    return build_parser().parse_args(argv)


def _training_spec(args: argparse.Namespace, vocab_size_hint: int | None = None) -> dict:
    """Resolved encoder/training/masking sections for the manifest."""
    file_cfg = _read_config_file(getattr(args, "config", None))
    train_cfg = resolve_train_config(file_cfg, args)
    # vocab_size is filled at execution time from the vocabulary file
    encoder_cfg = resolve_encoder_config(file_cfg, args, vocab_size_hint or 261)
    encoder_fields = dataclasses.asdict(encoder_cfg)
    encoder_fields.pop("vocab_size")
    encoder_fields.pop("tasks")
    return {
        "tool_version": __version__,
        "encoder": encoder_fields,
        "training": dataclasses.asdict(train_cfg),
        "masking": dataclasses.asdict(resolve_masking(file_cfg)),
    }


def _dispatch(args: argparse.Namespace) -> int:
    cmd = args.command
    if cmd == "build-vocab":
        spec = {
            "command": cmd,
            "tool_version": __version__,
            "size": args.size,
            "inputs": {"corpus": _abs_data(args.corpus)},
            "outputs": {"vocab": _abs(args.out)},
        }
        execute_build_vocab(spec, args.out)
        return 0

    if cmd == "pretrain":
        spec = _training_spec(args)
        spec.update(
            command=cmd,
            inputs={"corpus": _abs_data(args.corpus), "vocab": _abs(args.vocab)},
        )
        execute_pretrain(spec, args.out)
        return 0

    if cmd == "finetune":
        spec = _training_spec(args)
        spec.update(
            command=cmd,
            task=args.task,
            loss=args.loss,
            seeds=args.seeds,
            data_format=args.data_format,
            inputs={
                "data": _abs_data(args.data),
                "val": _abs_data(args.val) if args.val else None,
                "vocab": _abs(args.vocab),
                "init": _abs(args.init),
            },
        )
        execute_finetune(spec, args.out)
        return 0

    if cmd == "distill":
        teacher_paths = [t for t in args.teachers.split(",") if t]
        weights = [float(w) for w in args.weights.split(",")] if args.weights else None
        if weights is not None and len(weights) != len(teacher_paths):
            raise CliError(
                f"{len(weights)} weights for {len(teacher_paths)} teachers"
            )
        spec = _training_spec(args)
        spec.update(
            command=cmd,
            task=args.task,
            weights=weights,
            data_format=args.data_format,
            inputs={
                "data": _abs_data(args.data),
                "vocab": _abs(args.vocab),
                "init": _abs(args.init),
                "teachers": [
                    (f"teacher{i}:{Path(t).name}", _abs(t))
                    for i, t in enumerate(teacher_paths)
                ],
            },
        )
        execute_distill(spec, args.out)
        return 0

    if cmd == "crossval":
        spec = _training_spec(args)
        spec.update(
            command=cmd,
            task=args.task,
            k=args.k,
            loss=args.loss,
            jobs=args.jobs,
            seeds=args.seeds,
            format=args.pred_format,
            inputs={
                "data": _abs_data(args.data),
                "test": _abs_data(args.test) if args.test else None,
                "vocab": _abs(args.vocab),
                "init": _abs(args.init),
            },
        )
        execute_crossval(spec, args.out)
        return 0

    if cmd == "predict":
        spec = {
            "command": cmd,
            "tool_version": __version__,
            "task": args.task,
            "format": args.pred_format,
            "inputs": {
                "data": _abs_data(args.data),
                "vocab": _abs(args.vocab),
                "model": _abs(args.model),
                "ensemble": _abs(args.ensemble),
            },
        }
        execute_predict(spec, args.out)
        return 0

    if cmd == "evaluate":
        spec = {
            "command": cmd,
            "tool_version": __version__,
            "task": args.task,
            "inputs": {"gold": _abs_data(args.gold), "pred": _abs(args.pred)},
        }
        execute_evaluate(spec, args.out)
        return 0

    if cmd == "stats":
        spec = {
            "command": cmd,
            "tool_version": __version__,
            "task": args.task,
            "data_format": args.data_format,
            "inputs": {"data": _abs_data(args.data)},
        }
        execute_stats(spec, args.out)
        return 0

    if cmd == "rerun":
        manifest_path = Path(args.manifest)
        if not manifest_path.is_file():
            raise CliError(f"manifest not found: {args.manifest}")
        spec = json.loads(manifest_path.read_text(encoding="utf-8"))
        command = spec.get("command")
        if command not in _EXECUTORS:
            raise CliError(f"manifest names unknown command {command!r}")
        if command == "distill":
            spec["inputs"]["teachers"] = [tuple(t) for t in spec["inputs"]["teachers"]]
        _EXECUTORS[command](spec, args.out)
        return 0

    raise CliError(f"unhandled command {cmd!r}")


def main(argv: list[str] | None = None) -> int:
    args = parse_invocation(sys.argv[1:] if argv is None else argv)
    try:
        return _dispatch(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except RUNTIME_ERRORS as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
