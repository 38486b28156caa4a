"""Command-line entry point.

Subcommands: train, eval, sweep, augment-preview, gradcheck,
export-embeddings. Settings come from an optional JSON config file with
flat keys, overridden by --key value flags. Exit codes: 0 success,
1 config error, 2 data error, 3 numeric-check failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import statistics
import sys
from dataclasses import asdict, dataclass, fields, replace

from .augment import STRATEGY_KINDS, load_synonyms
from .batcher import build_batch
from .corpus import (CorpusError, DEFAULT_LEXICON, LABEL_NAMES, gen_synthetic,
                     load_jsonl, load_synth_lexicon)
from .gradcheck import full_model_check
from .trainer import (CheckpointError, Model, TrainConfig, checkpoint_load,
                      checkpoint_save, evaluate, export_embeddings, train)

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

SWEEP_PRESETS = {
    "tau": [0.02, 0.08, 0.5, 5.0],
    "eta": [0.1, 0.2, 0.4, 0.6, 0.8],
    "alpha_beta": [(a, b) for a in (0.2, 0.5, 1.0, 2.0) for b in (0.2, 0.5, 1.0, 2.0)],
}


class ConfigError(ValueError):
    pass


class DataError(ValueError):
    pass


@dataclass
class RunConfig(TrainConfig):
    train_path: str | None = None
    dev_path: str | None = None
    test_path: str | None = None
    out_dir: str = "."
    synonyms_path: str | None = None
    synth_lexicon_path: str | None = None
    back_translate_cmd: str | None = None

    def train_config(self) -> TrainConfig:
        keep = {f.name for f in fields(TrainConfig)}
        return TrainConfig(**{k: v for k, v in asdict(self).items() if k in keep})


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(key: str, value):
    if key not in _FIELD_TYPES:
        raise ConfigError(f"unknown config key {key!r}")
    if key == "strategies":
        if isinstance(value, str):
            value = [s.strip() for s in value.split(",")]
        value = tuple(value)
        for kind in value:
            if kind not in STRATEGY_KINDS:
                raise ConfigError(f"unknown strategy {kind!r} (choose from {STRATEGY_KINDS})")
        return value
    current = getattr(RunConfig(), key)
    if isinstance(current, int):
        return int(value)
    if isinstance(current, float):
        return float(value)
    return value if value is None else str(value)


def load_config(config_path: str | None, overrides: dict) -> RunConfig:
    settings: dict = {}
    if config_path is not None:
        try:
            with open(config_path, encoding="utf-8") as fh:
                raw = json.load(fh)
        except FileNotFoundError as e:
            raise ConfigError(f"config file not found: {config_path}") from e
        except json.JSONDecodeError as e:
            raise ConfigError(f"config file {config_path} is not valid JSON: {e}") from e
        if not isinstance(raw, dict):
            raise ConfigError("config file must hold a JSON object with flat keys")
        for key, value in raw.items():
            settings[key] = _coerce(key, value)
    for key, value in overrides.items():
        if value is not None:
            settings[key] = _coerce(key, value)
    try:
        return RunConfig(**settings)
    except (TypeError, ValueError) as e:
        raise ConfigError(str(e)) from e


def _load_pairs(path: str | None, role: str):
    if path is None:
        raise DataError(f"no {role} data path configured")
    try:
        return load_jsonl(path)
    except FileNotFoundError as e:
        raise DataError(f"{role} data file not found: {path}") from e
    except CorpusError as e:
        raise DataError(str(e)) from e


def _load_synonyms(cfg: RunConfig):
    if cfg.synonyms_path is None:
        return None
    try:
        return load_synonyms(cfg.synonyms_path)
    except FileNotFoundError as e:
        raise DataError(f"synonym lexicon not found: {cfg.synonyms_path}") from e
    except ValueError as e:
        raise DataError(str(e)) from e


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_train(cfg: RunConfig) -> int:
    train_pairs = _load_pairs(cfg.train_path, "train")
    dev_pairs = _load_pairs(cfg.dev_path, "dev")
    model, metrics = train(cfg.train_config(), train_pairs, dev_pairs,
                           synonyms=_load_synonyms(cfg),
                           back_translate_cmd=cfg.back_translate_cmd)
    out = _outdir(cfg)
    with open(out / "metrics.jsonl", "w", encoding="utf-8") as fh:
        for record in metrics:
            fh.write(json.dumps(record) + "\n")
    checkpoint_save(model, out / "checkpoint.bin")
    dev_acc = evaluate(model, dev_pairs)
    print(f"dev accuracy: {dev_acc:.4f}")
    return EXIT_OK


def cmd_eval(cfg: RunConfig, checkpoint: str, data_path: str | None) -> int:
    model = _load_model(checkpoint)
    pairs = _load_pairs(data_path or cfg.test_path, "eval")
    print(f"accuracy: {evaluate(model, pairs):.4f}")
    return EXIT_OK


def cmd_sweep(cfg: RunConfig, axis: str, values_arg: str | None, n_seeds: int) -> int:
    if axis not in SWEEP_PRESETS:
        raise ConfigError(f"unknown sweep axis {axis!r} (choose from {sorted(SWEEP_PRESETS)})")
    if n_seeds < 3:
        raise ConfigError(f"sweeps need at least 3 seeds, got {n_seeds}")
    values = _parse_sweep_values(axis, values_arg)
    if len(values) < 2:
        raise ConfigError("sweeps need at least 2 values")

    train_pairs = _load_pairs(cfg.train_path, "train")
    dev_pairs = _load_pairs(cfg.dev_path, "dev")
    test_pairs = _load_pairs(cfg.test_path, "test")
    synonyms = _load_synonyms(cfg)

    rows = []
    for value in values:
        accs = []
        for j in range(n_seeds):
            point = _apply_axis(cfg.train_config(), axis, value)
            point = replace(point, seed=cfg.seed + j)
            model, _ = train(point, train_pairs, dev_pairs, synonyms=synonyms,
                             back_translate_cmd=cfg.back_translate_cmd)
            accs.append(evaluate(model, test_pairs))
        mean = statistics.fmean(accs)
        sd = statistics.stdev(accs) if len(accs) > 1 else 0.0
        rows.append((value, mean, sd))
        print(f"{axis}={value}: mean accuracy {mean:.4f} (sd {sd:.4f})")

    out = _outdir(cfg) / f"sweep_{axis}.csv"
    with open(out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([axis, "mean_accuracy", "sd_accuracy"])
        for value, mean, sd in rows:
            label = f"{value[0]}:{value[1]}" if axis == "alpha_beta" else value
            writer.writerow([label, f"{mean:.6f}", f"{sd:.6f}"])
    print(f"wrote {out}")
    return EXIT_OK


def _parse_sweep_values(axis: str, values_arg: str | None):
    if values_arg is None:
        return SWEEP_PRESETS[axis]
    values = []
    for part in values_arg.split(","):
        part = part.strip()
        if axis == "alpha_beta":
            try:
                a, b = part.split(":")
                values.append((float(a), float(b)))
            except ValueError as e:
                raise ConfigError(f"alpha_beta values look like A:B, got {part!r}") from e
        else:
            try:
                values.append(float(part))
            except ValueError as e:
                raise ConfigError(f"bad sweep value {part!r}") from e
    return values


def _apply_axis(config: TrainConfig, axis: str, value) -> TrainConfig:
    if axis == "tau":
        return replace(config, tau=value)
    if axis == "eta":
        return replace(config, eta=value)
    return replace(config, alpha=value[0], beta=value[1])


def cmd_augment_preview(cfg: RunConfig, n: int) -> int:
    if n <= 0:
        raise ConfigError(f"preview count must be positive, got {n}")
    pairs = _load_pairs(cfg.train_path, "train")
    synonyms = _load_synonyms(cfg)
    strategies = cfg.strategy_objects()
    for idx, pair in enumerate(pairs[:n]):
        batch = build_batch([pair, pair], strategies, cfg.seed + idx,
                            embed_dim=cfg.k, synonyms=synonyms,
                            back_translate_cmd=cfg.back_translate_cmd)
        v1, v2 = batch.views[0], batch.views[1]
        print(f"--- sample {idx} [{LABEL_NAMES[pair.label]}]")
        print(f"original:  {' '.join(pair.premise)} / {' '.join(pair.hypothesis)}")
        print(f"view 1:    {' '.join(v1.premise)} / {' '.join(v1.hypothesis)}")
        print(f"view 2:    {' '.join(v2.premise)} / {' '.join(v2.hypothesis)}")
    return EXIT_OK


def cmd_gradcheck(seed: int) -> int:
    result = full_model_check(seed=seed)
    for name, worst in result.worst_by_block.items():
        print(f"{name:16s} worst relative error {worst:.3e}")
    if result.passed:
        print("gradient check passed")
        return EXIT_OK
    print(f"gradient check FAILED for blocks: {', '.join(result.failures())}")
    return EXIT_NUMERIC


def cmd_export_embeddings(cfg: RunConfig, checkpoint: str, data_path: str | None,
                          out_path: str | None) -> int:
    model = _load_model(checkpoint)
    pairs = _load_pairs(data_path or cfg.test_path, "export")
    out = out_path or str(_outdir(cfg) / "embeddings.csv")
    export_embeddings(model, pairs, out)
    print(f"wrote {out}")
    return EXIT_OK


def cmd_gen_synthetic(cfg: RunConfig, n_per_class: int, out_path: str) -> int:
    lexicon = DEFAULT_LEXICON
    if cfg.synth_lexicon_path is not None:
        try:
            lexicon = load_synth_lexicon(cfg.synth_lexicon_path)
        except (FileNotFoundError, CorpusError) as e:
            raise DataError(str(e)) from e
    from .corpus import write_jsonl
    write_jsonl(gen_synthetic(n_per_class, cfg.seed, lexicon), out_path)
    print(f"wrote {out_path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# wiring
# ---------------------------------------------------------------------------

def _outdir(cfg: RunConfig):
    from pathlib import Path
    path = Path(cfg.out_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _load_model(checkpoint: str) -> Model:
    try:
        return checkpoint_load(checkpoint)
    except FileNotFoundError as e:
        raise DataError(f"checkpoint not found: {checkpoint}") from e
    except CheckpointError as e:
        raise DataError(str(e)) from e


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file with flat keys")
    for f in fields(RunConfig):
        parser.add_argument(f"--{f.name.replace('_', '-')}", dest=f.name,
                            metavar="V", default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="contrastnli",
        description="Train and probe contrastive sentence-pair models.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model, write checkpoint and metrics")
    _add_config_flags(p)

    p = sub.add_parser("eval", help="accuracy of a checkpoint on a dataset")
    _add_config_flags(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", default=None, help="JSONL pairs (default: test_path)")

    p = sub.add_parser("sweep", help="train across a hyperparameter grid")
    _add_config_flags(p)
    p.add_argument("--axis", required=True, choices=sorted(SWEEP_PRESETS))
    p.add_argument("--values", default=None,
                   help="comma-separated values (A:B pairs for alpha_beta); "
                        "defaults to the built-in grid")
    p.add_argument("--seeds", type=int, default=5, help="seeds per point (>= 3)")

    p = sub.add_parser("augment-preview", help="print augmented views of samples")
    _add_config_flags(p)
    p.add_argument("-n", type=int, default=5, help="number of samples to show")

    p = sub.add_parser("gradcheck", help="finite-difference check of the model")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("export-embeddings", help="dump pair vectors to CSV")
    _add_config_flags(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", default=None)
    p.add_argument("--out", default=None)

    p = sub.add_parser("gen-synthetic", help="write a synthetic JSONL corpus")
    _add_config_flags(p)
    p.add_argument("--per-class", type=int, default=20)
    p.add_argument("--out", required=True)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "gradcheck":
            return cmd_gradcheck(args.seed)
        overrides = {f.name: getattr(args, f.name, None) for f in fields(RunConfig)}
        cfg = load_config(getattr(args, "config", None), overrides)
        if args.command == "train":
            return cmd_train(cfg)
        if args.command == "eval":
            return cmd_eval(cfg, args.checkpoint, args.data)
        if args.command == "sweep":
            return cmd_sweep(cfg, args.axis, args.values, args.seeds)
        if args.command == "augment-preview":
            return cmd_augment_preview(cfg, args.n)
        if args.command == "export-embeddings":
            return cmd_export_embeddings(cfg, args.checkpoint, args.data, args.out)
        if args.command == "gen-synthetic":
            return cmd_gen_synthetic(cfg, args.per_class, args.out)
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
