"""Batch command-line surface for reproducible runs.

Every subcommand resolves its configuration (defaults, then an optional
TOML file, then flags), hashes its inputs, and writes a JSON run
manifest before doing any work, so a finished run can be audited and
replayed bit-exactly. Exit codes: 0 success, 1 input error, 2 runtime
failure.
"""

from __future__ import annotations

import argparse
import functools
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - 3.10 fallback
    import tomli as tomllib

from .checkpoint import load_checkpoint, save_checkpoint
from .corpus import (
    MockLlmClient,
    SynonymDictionary,
    build_rationality_prompt,
    generate_corpus,
    judge_rationality,
    load_corpus,
    load_synth,
    noun_filter,
    save_corpus,
    save_synth,
    synth_dataset,
)
from .corpus.generate import CorpusText
from .corpus.llm import HttpLlmClient
from .encoders import FrozenEncoderPair
from .errors import (
    ContractError,
    DictionaryError,
    DigestMismatchError,
    FormatError,
    InputError,
    ParameterError,
    ShapeError,
    TransportError,
)
from .losses import LabelSets, total_loss
from .model import DualAdapter, PseudoVisualPrompt, TextPromptSet
from .numerics import finite_diff_check, no_grad
from .pipeline import (
    StageConfig,
    correlation_map,
    ensemble_scores,
    evaluate_map,
    infer,
    run_sweep,
    train_stage1,
    train_stage2,
)
from .pipeline.infer import save_heatmap_csv, save_heatmap_pgm

__all__ = ["main"]

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_RUNTIME = 2

# user-supplied files or flags are wrong
_INPUT_ERRORS = (
    ParameterError,
    InputError,
    FormatError,
    DictionaryError,
    ShapeError,
    DigestMismatchError,
    OSError,
)
# the computation itself went wrong
_RUNTIME_ERRORS = (ContractError, TransportError)


class _Parser(argparse.ArgumentParser):
    """Argparse that reports usage errors with exit code 1, not 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_INPUT)


def _sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(65536), b""):
            digest.update(block)
    return digest.hexdigest()


def _write_manifest(
    manifest_path,
    command: str,
    config: dict,
    seed: int | None,
    inputs: dict[str, str | None],
    outputs: dict[str, str | None],
) -> None:
    """Record what a run is about to do; written before work starts."""
    if manifest_path is None:
        return
    body = {
        "command": command,
        "config": config,
        "seed": seed,
        "inputs": {
            role: {"path": str(path), "sha256": _sha256_file(path)}
            for role, path in inputs.items()
            if path is not None
        },
        "outputs": {role: str(path) for role, path in outputs.items() if path is not None},
    }
    Path(manifest_path).write_text(
        json.dumps(body, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def _manifest_target(args, primary_output) -> str | None:
    if getattr(args, "manifest", None):
        return args.manifest
    if primary_output is not None:
        return f"{primary_output}.manifest.json"
    return None


def _read_classes(path) -> list[str]:
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise InputError(f"cannot read class list {path}: {exc}") from exc
    names = [ln.strip() for ln in lines if ln.strip() and not ln.lstrip().startswith("#")]
    if not names:
        raise InputError(f"class list {path} is empty")
    return names


def _read_matrix(path) -> np.ndarray:
    try:
        return np.loadtxt(path, delimiter=",", ndmin=2, dtype=np.float64)
    except (OSError, ValueError) as exc:
        raise InputError(f"cannot read matrix {path}: {exc}") from exc


def _write_matrix(path, values: np.ndarray) -> None:
    lines = [",".join(f"{v:.10g}" for v in row) for row in np.atleast_2d(values)]
    Path(path).write_text("".join(line + "\n" for line in lines), encoding="utf-8")


def _load_config_file(path) -> dict:
    if path is None:
        return {}
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise InputError(f"config {path} is not valid TOML: {exc}") from exc


def _resolve_config(args, flag_map: dict[str, str]) -> StageConfig:
    """defaults < TOML file < explicit flags, via the config parser."""
    cfg = StageConfig.from_dict(_load_config_file(getattr(args, "config", None)))
    overrides = {}
    for dest, key in flag_map.items():
        value = getattr(args, dest)
        if value is not None:
            overrides[key] = value
    return cfg.replace(**overrides) if overrides else cfg


def _build_client(args):
    if args.client == "mock":
        return MockLlmClient(
            seed=args.seed,
            unlikely_rate=args.unlikely_rate,
            keyword_drop_rate=args.keyword_drop_rate,
        )
    if not args.endpoint:
        raise InputError("--endpoint is required with --client http")
    return HttpLlmClient(
        endpoint=args.endpoint, model=args.model, cache_dir=args.cache_dir
    )


def _load_dictionary(args, classes: list[str]) -> SynonymDictionary:
    if args.dictionary:
        dictionary = SynonymDictionary.from_file(args.dictionary)
        if dictionary.classes != classes:
            raise InputError(
                f"dictionary classes {dictionary.classes} do not match "
                f"class list {classes}"
            )
        return dictionary
    return SynonymDictionary.identity(classes)


def _encoders_like(ckpt) -> FrozenEncoderPair:
    return FrozenEncoderPair.from_config(ckpt.meta["encoder_config"])


def cmd_gen_text(args) -> int:
    classes = _read_classes(args.classes)
    dictionary = _load_dictionary(args, classes)
    client = _build_client(args)
    _write_manifest(
        _manifest_target(args, args.out),
        "gen-text",
        {
            "count": args.count,
            "max_words": args.max_words,
            "client": args.client,
            "unlikely_rate": args.unlikely_rate,
            "keyword_drop_rate": args.keyword_drop_rate,
        },
        args.seed,
        {"classes": args.classes, "dictionary": args.dictionary},
        {"corpus": args.out},
    )
    result = generate_corpus(
        classes, args.count, client, dictionary, seed=args.seed, max_words=args.max_words
    )
    save_corpus(args.out, result.texts)
    s = result.stats
    print(
        f"kept {s.kept} of {s.queried} generated texts "
        f"(unlikely {s.dropped_unlikely}, unmatched {s.dropped_unmatched}, "
        f"overlong {s.dropped_overlong}, transport failures {s.transport_failures})"
    )
    return EXIT_OK


def cmd_filter_text(args) -> int:
    try:
        lines = Path(args.input).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise InputError(f"cannot read texts {args.input}: {exc}") from exc
    candidates = [ln.strip() for ln in lines if ln.strip()]
    classes = _read_classes(args.classes)
    dictionary = _load_dictionary(args, classes)
    client = _build_client(args)
    _write_manifest(
        _manifest_target(args, args.out),
        "filter-text",
        {"max_words": args.max_words, "client": args.client},
        args.seed,
        {"texts": args.input, "classes": args.classes, "dictionary": args.dictionary},
        {"corpus": args.out},
    )
    kept: list[CorpusText] = []
    dropped_unlikely = dropped_unmatched = dropped_overlong = 0
    for text in candidates:
        if len(text.split()) > args.max_words:
            dropped_overlong += 1
            continue
        reply = client.complete(build_rationality_prompt(text))
        if not judge_rationality(reply):
            dropped_unlikely += 1
            continue
        filtered = noun_filter(text, dictionary)
        if filtered is None:
            dropped_unmatched += 1
            continue
        kept.append(
            CorpusText(text=filtered.text, labels=filtered.labels.positives)
        )
    save_corpus(args.out, kept)
    print(
        f"kept {len(kept)} of {len(candidates)} texts "
        f"(unlikely {dropped_unlikely}, unmatched {dropped_unmatched}, "
        f"overlong {dropped_overlong})"
    )
    return EXIT_OK


def cmd_train_stage1(args) -> int:
    texts = load_corpus(args.corpus)
    classes = _read_classes(args.classes)
    cfg = _resolve_config(
        args,
        {
            "seed": "seed",
            "batch_size": "batch_size",
            "epochs": "stage1_epochs",
            "lr": "stage1_lr",
            "prompt_hw": "prompt_hw",
            "margin": "loss.margin",
        },
    )
    vocab = classes + [t.text for t in texts]
    encoders = FrozenEncoderPair(
        vocab,
        embed_dim=args.embed_dim,
        patch_size=args.patch_size,
        seed=args.encoder_seed,
    )
    _write_manifest(
        _manifest_target(args, args.out),
        "train-stage1",
        cfg.as_dict(),
        cfg.seed,
        {"corpus": args.corpus, "classes": args.classes, "config": args.config},
        {"checkpoint": args.out, "log": args.log},
    )
    ckpt = train_stage1(texts, classes, encoders, cfg, log_path=args.log)
    save_checkpoint(args.out, ckpt)
    if ckpt.meta["aborted"]:
        print(f"training aborted early; best-effort checkpoint at {args.out}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"stage-1 checkpoint written to {args.out}")
    return EXIT_OK


def cmd_train_stage2(args) -> int:
    texts = load_corpus(args.corpus)
    s1 = load_checkpoint(args.ckpt)
    encoders = _encoders_like(s1)
    cfg = _resolve_config(
        args,
        {
            "seed": "seed",
            "batch_size": "batch_size",
            "epochs": "stage2_epochs",
            "lr_text": "lr_text",
            "lr_pvp": "lr_pvp",
            "lambda_mix": "lambda_mix",
            "context_length": "context_length",
            "alpha": "alpha",
            "margin": "loss.margin",
            "tau": "loss.tau",
            "gamma": "loss.gamma",
            "eta": "loss.eta",
            "nu": "loss.nu",
        },
    )
    _write_manifest(
        _manifest_target(args, args.out),
        "train-stage2",
        cfg.as_dict(),
        cfg.seed,
        {"corpus": args.corpus, "stage1": args.ckpt, "config": args.config},
        {"checkpoint": args.out, "log": args.log},
    )
    ckpt = train_stage2(texts, s1, encoders, cfg, log_path=args.log)
    save_checkpoint(args.out, ckpt)
    if ckpt.meta["aborted"]:
        print(f"training aborted early; best-effort checkpoint at {args.out}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"stage-2 checkpoint written to {args.out}")
    return EXIT_OK


def cmd_infer(args) -> int:
    ds = load_synth(args.images)
    ckpt = load_checkpoint(args.ckpt)
    encoders = _encoders_like(ckpt)
    _write_manifest(
        _manifest_target(args, args.out),
        "infer",
        {"alpha": args.alpha},
        None,
        {"images": args.images, "checkpoint": args.ckpt},
        {"scores": args.out, "visual": args.visual_out, "text": args.text_out},
    )
    result = infer(ds.images, ckpt, encoders, alpha=args.alpha)
    _write_matrix(args.out, result.scores)
    if args.visual_out:
        _write_matrix(args.visual_out, result.visual_scores)
    if args.text_out:
        _write_matrix(args.text_out, result.text_scores)
    print(
        f"scored {ds.n_images} images against {len(result.class_names)} classes "
        f"at alpha {result.alpha}"
    )
    return EXIT_OK


def cmd_eval(args) -> int:
    scores = _read_matrix(args.scores)
    labels = _read_matrix(args.labels)
    mean, per_class = evaluate_map(scores, labels)
    if args.per_class:
        for j, value in enumerate(per_class):
            shown = "skipped (no positives)" if value is None else repr(value)
            print(f"AP[{j}] {shown}")
    print(f"mAP {mean!r}")
    return EXIT_OK


def cmd_ensemble(args) -> int:
    a = _read_matrix(args.a)
    b = _read_matrix(args.b)
    _write_manifest(
        _manifest_target(args, args.out),
        "ensemble",
        {"weight": args.weight},
        None,
        {"a": args.a, "b": args.b},
        {"scores": args.out},
    )
    _write_matrix(args.out, ensemble_scores(a, b, args.weight))
    print(f"ensembled scores written to {args.out}")
    return EXIT_OK


def cmd_heatmap(args) -> int:
    ds = load_synth(args.images)
    if not 0 <= args.index < ds.n_images:
        raise InputError(f"image index {args.index} outside 0..{ds.n_images - 1}")
    ckpt = load_checkpoint(args.ckpt)
    encoders = _encoders_like(ckpt)
    _write_manifest(
        _manifest_target(args, args.out),
        "heatmap",
        {"index": args.index, "class_index": args.class_index, "alpha": args.alpha},
        None,
        {"images": args.images, "checkpoint": args.ckpt},
        {"pgm": args.out, "csv": args.csv_out},
    )
    cmap = correlation_map(
        ds.images[args.index], ckpt, encoders, args.class_index, alpha=args.alpha
    )
    save_heatmap_pgm(args.out, cmap)
    if args.csv_out:
        save_heatmap_csv(args.csv_out, cmap)
    print(f"heatmap ({cmap.shape[0]}x{cmap.shape[1]}) written to {args.out}")
    return EXIT_OK


def _sweep_evaluate(
    cfg: StageConfig,
    corpus_path: str,
    classes_path: str,
    images_path: str,
    embed_dim: int,
    patch_size: int,
    encoder_seed: int,
) -> float:
    # module-level so --jobs can pickle it into worker processes
    texts = load_corpus(corpus_path)
    classes = _read_classes(classes_path)
    encoders = FrozenEncoderPair(
        classes + [t.text for t in texts],
        embed_dim=embed_dim,
        patch_size=patch_size,
        seed=encoder_seed,
    )
    s1 = train_stage1(texts, classes, encoders, cfg)
    s2 = train_stage2(texts, s1, encoders, cfg)
    ds = load_synth(images_path)
    result = infer(ds.images, s2, encoders, alpha=cfg.alpha)
    return evaluate_map(result.scores, ds.labels)[0]


def _flatten_grid(data: dict, prefix: str = "") -> dict[str, list]:
    flat: dict[str, list] = {}
    for key, value in data.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            flat.update(_flatten_grid(value, prefix=f"{name}."))
        else:
            flat[name] = value
    return flat


def cmd_sweep(args) -> int:
    try:
        with open(args.grid, "rb") as fh:
            grid = _flatten_grid(tomllib.load(fh))
    except OSError as exc:
        raise InputError(f"cannot read grid {args.grid}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise InputError(f"grid {args.grid} is not valid TOML: {exc}") from exc
    base = _resolve_config(args, {"seed": "seed"})
    _write_manifest(
        _manifest_target(args, args.out),
        "sweep",
        {"base": base.as_dict(), "grid": grid, "jobs": args.jobs},
        base.seed,
        {
            "corpus": args.corpus,
            "classes": args.classes,
            "images": args.images,
            "grid_file": args.grid,
            "config": args.config,
        },
        {"results": args.out},
    )
    evaluate = functools.partial(
        _sweep_evaluate,
        corpus_path=args.corpus,
        classes_path=args.classes,
        images_path=args.images,
        embed_dim=args.embed_dim,
        patch_size=args.patch_size,
        encoder_seed=args.encoder_seed,
    )
    records = run_sweep(base, grid, evaluate, out_csv=args.out, jobs=args.jobs)
    ok = [r for r in records if r["status"] == "ok"]
    best = max((r["map"] for r in ok), default=None)
    print(
        f"swept {len(records)} points ({len(ok)} ok); "
        f"best mAP {best!r}" if best is not None else f"swept {len(records)} points (0 ok)"
    )
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    # small co-training rig: 3 classes, 8-dim embeddings, 4 context
    # vectors, 8x8 prompt pixels, 4 corpus texts
    classes = ["bench", "person", "dog"]
    encoders = FrozenEncoderPair(
        classes + ["a", "park", "walking", "in", "the"],
        embed_dim=8,
        patch_size=4,
        max_text_len=16,
        seed=args.seed,
    )
    pvp = PseudoVisualPrompt.init(3, 8, seed=args.seed)
    prompts = TextPromptSet.init(encoders, classes, context_length=4, seed=args.seed)
    adapter = DualAdapter.init(8, 0.5, seed=args.seed)
    corpus = [
        "a bench in the park",
        "a person walking",
        "a dog in the park",
        "a person walking a dog",
    ]
    with no_grad():
        from .numerics import Tensor

        text_emb = Tensor(
            np.stack([encoders.encode_text(t).data for t in corpus])
        )
    labels = [
        LabelSets.from_positives(p, 3) for p in [(0,), (1,), (2,), (1, 2)]
    ]
    cfg = StageConfig()

    def loss_fn():
        u = adapter.apply(pvp.embeddings(encoders), "visual")
        g = adapter.apply(prompts.embeddings(encoders), "text")
        e_b = adapter.apply(text_emb, "text")
        value, _ = total_loss(u, g, e_b, labels, cfg.loss)
        return value

    params = pvp.params() + prompts.params() + adapter.params()
    max_err = finite_diff_check(loss_fn, params, eps=args.eps)
    print(f"max relative error {max_err:.6e}")
    return EXIT_OK if max_err <= args.tol else EXIT_RUNTIME


def cmd_export_synth(args) -> int:
    classes = _read_classes(args.classes)
    if args.like_ckpt:
        encoders = _encoders_like(load_checkpoint(args.like_ckpt))
    else:
        encoders = FrozenEncoderPair(
            classes,
            embed_dim=args.embed_dim,
            patch_size=args.patch_size,
            seed=args.encoder_seed,
        )
    _write_manifest(
        _manifest_target(args, args.out),
        "export-synth",
        {
            "images_per_combo": args.images_per_combo,
            "n_combos": args.n_combos,
            "noise_std": args.noise_std,
            "hw": args.hw,
            "encoder_digest": encoders.digest(),
        },
        args.seed,
        {"classes": args.classes, "like_ckpt": args.like_ckpt},
        {"dataset": args.out},
    )
    ds = synth_dataset(
        classes,
        encoders,
        images_per_combo=args.images_per_combo,
        noise_std=args.noise_std,
        seed=args.seed,
        n_combos=args.n_combos,
        hw=args.hw,
    )
    save_synth(args.out, ds)
    print(f"wrote {ds.n_images} images over {len(classes)} classes to {args.out}")
    return EXIT_OK


def _add_client_flags(p: _Parser) -> None:
    p.add_argument("--client", choices=["mock", "http"], default="mock")
    p.add_argument("--unlikely-rate", type=float, default=0.0)
    p.add_argument("--keyword-drop-rate", type=float, default=0.0)
    p.add_argument("--endpoint", help="chat-completions URL for --client http")
    p.add_argument("--model", default="default", help="model name for --client http")
    p.add_argument("--cache-dir", help="reply cache directory for --client http")


def _add_encoder_flags(p: _Parser) -> None:
    p.add_argument("--embed-dim", type=int, default=64)
    p.add_argument("--patch-size", type=int, default=4)
    p.add_argument("--encoder-seed", type=int, default=0)


def build_parser() -> _Parser:
    parser = _Parser(prog="pvp", description=__doc__)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("gen-text", help="generate and screen a text corpus")
    p.add_argument("--classes", required=True, help="file with one class name per line")
    p.add_argument("--count", type=int, default=400)
    p.add_argument("--max-words", type=int, default=25)
    p.add_argument("--dictionary", help="synonym dictionary file; identity if omitted")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output corpus JSONL")
    p.add_argument("--manifest", help="manifest path (default <out>.manifest.json)")
    _add_client_flags(p)
    p.set_defaults(func=cmd_gen_text)

    p = sub.add_parser("filter-text", help="screen an existing list of texts")
    p.add_argument("--in", dest="input", required=True, help="file with one text per line")
    p.add_argument("--classes", required=True)
    p.add_argument("--max-words", type=int, default=25)
    p.add_argument("--dictionary")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--manifest")
    _add_client_flags(p)
    p.set_defaults(func=cmd_filter_text)

    p = sub.add_parser("train-stage1", help="learn pixel prompts against the frozen pair")
    p.add_argument("--corpus", required=True, help="corpus JSONL from gen-text")
    p.add_argument("--classes", required=True)
    p.add_argument("--config", help="TOML config; flags override it")
    p.add_argument("--seed", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--prompt-hw", type=int)
    p.add_argument("--margin", type=float)
    p.add_argument("--log", help="per-step loss CSV")
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--manifest")
    _add_encoder_flags(p)
    p.set_defaults(func=cmd_train_stage1)

    p = sub.add_parser("train-stage2", help="co-train prompts and adapter")
    p.add_argument("--corpus", required=True)
    p.add_argument("--ckpt", required=True, help="stage-1 checkpoint")
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr-text", type=float)
    p.add_argument("--lr-pvp", type=float)
    p.add_argument("--lambda", dest="lambda_mix", type=float)
    p.add_argument("--context-length", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--margin", type=float)
    p.add_argument("--tau", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--eta", type=float)
    p.add_argument("--nu", type=float)
    p.add_argument("--log")
    p.add_argument("--out", required=True)
    p.add_argument("--manifest")
    p.set_defaults(func=cmd_train_stage2)

    p = sub.add_parser("infer", help="score images with a trained checkpoint")
    p.add_argument("--images", required=True, help="npz dataset from export-synth")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--alpha", type=float)
    p.add_argument("--out", required=True, help="fused score CSV")
    p.add_argument("--visual-out")
    p.add_argument("--text-out")
    p.add_argument("--manifest")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("eval", help="mean average precision of a score matrix")
    p.add_argument("--scores", required=True, help="score CSV")
    p.add_argument("--labels", required=True, help="multi-hot label CSV")
    p.add_argument("--per-class", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ensemble", help="min-max blend of two score matrices")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--weight", type=float, default=0.5)
    p.add_argument("--out", required=True)
    p.add_argument("--manifest")
    p.set_defaults(func=cmd_ensemble)

    p = sub.add_parser("heatmap", help="per-patch correlation map for one image")
    p.add_argument("--images", required=True)
    p.add_argument("--index", type=int, default=0)
    p.add_argument("--ckpt", required=True)
    p.add_argument("--class-index", type=int, required=True)
    p.add_argument("--alpha", type=float)
    p.add_argument("--out", required=True, help="PGM image path")
    p.add_argument("--csv-out")
    p.add_argument("--manifest")
    p.set_defaults(func=cmd_heatmap)

    p = sub.add_parser("sweep", help="grid sweep of training configurations")
    p.add_argument("--corpus", required=True)
    p.add_argument("--classes", required=True)
    p.add_argument("--images", required=True)
    p.add_argument("--grid", required=True, help="TOML lists keyed by config field")
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True, help="results CSV")
    p.add_argument("--manifest")
    _add_encoder_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("gradcheck", help="finite-difference check of the training gradient")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--eps", type=float, default=1e-5)
    p.add_argument("--tol", type=float, default=1e-4)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("export-synth", help="write a synthetic labeled image dataset")
    p.add_argument("--classes", required=True)
    p.add_argument("--like-ckpt", help="reuse a checkpoint's encoder configuration")
    p.add_argument("--images-per-combo", type=int, default=8)
    p.add_argument("--n-combos", type=int, default=20)
    p.add_argument("--noise-std", type=float, default=0.02)
    p.add_argument("--hw", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="npz dataset path")
    p.add_argument("--manifest")
    _add_encoder_flags(p)
    p.set_defaults(func=cmd_export_synth)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if getattr(args, "func", None) is None:
        parser.print_usage(sys.stderr)
        return EXIT_INPUT
    try:
        return args.func(args)
    except _RUNTIME_ERRORS as exc:
        print(f"pvp: runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except _INPUT_ERRORS as exc:
        print(f"pvp: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # anything unplanned is a runtime failure
        print(f"pvp: unexpected failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
