"""Command line interface.

Subcommands cover the full workflow: synth (benchmark generation),
ingest (dataset validation/normalization), op-corpus (ontology-derived
pretraining corpus), pairs (contrastive sample files), split, train,
predict, prompts (export for external generative models), evaluate,
cross-eval, stats, and pipeline (synth through report in one run).

Exit codes: 0 success, 1 usage error, 2 data or validation error,
3 training divergence. All randomness flows from --seed (or the seed
config key); equal seeds give byte-identical artifacts.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import config as configmod
from .contrastive import contrastive_pairs_and_triples, save_pairs, \
    save_triples, synonym_pairs_from_dataset, synonym_pairs_from_ontology
from .data import dataset_stats, load_dataset, load_split, \
    make_splits, out_fraction, save_dataset, save_split
from .errors import TermNormError, TrainingDivergedError, UsageError
from .fileio import atomic_write_text, dump_json
from .metrics import aggregate, cross_csv, cross_matrix, evaluate, \
    results_csv
from .models import ingest_predictions, load_model, predict_split, \
    save_model, save_predictions, save_prompts
from .ontology import build_pretraining_corpus, load_ontology, save_ontology
from .rng import derive_seed
from .synthetic import gen_synthetic
from .training import default_config, run_strategy
from .version import __version__

N_SPLITS = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _say(path):
    print(f"wrote {path}")


def _add_config_flags(parser, keys):
    for key in keys:
        flag = "--" + key.replace("_", "-")
        parser.add_argument(flag, dest=f"cfg_{key}", default=None,
                            metavar="V", help=f"override config key {key}")


def _collect_config(args) -> dict:
    overrides = {}
    for name, value in vars(args).items():
        if name.startswith("cfg_") and value is not None:
            key = name[len("cfg_"):]
            overrides[key] = configmod.coerce(key, value)
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    return configmod.load_config(getattr(args, "config", None), overrides)


def _train_config(cfg: dict, strategy: str, seed: int):
    overrides = {
        "batch_size": cfg["batch_size"], "n_features": cfg["n_features"],
        "ngram_range": (cfg["ngram_min"], cfg["ngram_max"]),
        "embed_dim": cfg["embed_dim"], "temperature": cfg["temperature"],
    }
    if cfg["learning_rate"] is not None:
        overrides["learning_rate"] = cfg["learning_rate"]
    return default_config(strategy, cfg["model_kind"], seed=seed,
                          epoch_scale=cfg["epoch_scale"], **overrides)


# -- subcommand handlers -------------------------------------------------

def cmd_synth(args) -> int:
    cfg = _collect_config(args)
    ontology, datasets = gen_synthetic(configmod.synth_config(cfg))
    out = Path(args.out_dir)
    _say(save_ontology(ontology, out / "ontology.tsv"))
    for ds in datasets:
        _say(save_dataset(ds, out / f"{ds.name}.jsonl"))
    return 0


def cmd_ingest(args) -> int:
    ontology = load_ontology(args.ontology)
    dataset = load_dataset(args.dataset, ontology)
    _say(save_dataset(dataset, args.out, label_field="pt"))
    print(f"{len(dataset)} samples, {len(dataset.label_set())} distinct "
          f"concepts")
    return 0


def cmd_op_corpus(args) -> int:
    ontology = load_ontology(args.ontology)
    corpus = build_pretraining_corpus(ontology)
    _say(save_dataset(corpus, args.out, label_field="pt"))
    print(f"{len(corpus)} samples covering "
          f"{len(corpus.label_set())} concepts")
    return 0


def _load_subset(args, ontology):
    dataset = load_dataset(args.dataset, ontology)
    if getattr(args, "split", None):
        split = load_split(args.split, dataset)
        ids = split.train if args.subset == "train" else split.test
        dataset = dataset.subset(ids)
    return dataset


def cmd_pairs(args) -> int:
    ontology = load_ontology(args.ontology)
    if args.mode == "ontology-synonym":
        pairs = synonym_pairs_from_ontology(ontology)
        _say(save_pairs(pairs, args.out))
        print(f"{len(pairs)} positive pairs")
        return 0
    if args.dataset is None:
        raise UsageError(f"mode {args.mode!r} requires --dataset")
    dataset = _load_subset(args, ontology)
    if args.mode == "dataset-synonym":
        pairs = synonym_pairs_from_dataset(dataset, ontology)
        _say(save_pairs(pairs, args.out))
        print(f"{len(pairs)} positive pairs")
        return 0
    pairs, triples = contrastive_pairs_and_triples(
        dataset, ontology, max_negatives_per_positive=args.max_negatives,
        seed=args.seed or 0)
    _say(save_pairs(pairs, args.out))
    if args.triples_out is None:
        raise UsageError("mode pair-triple requires --triples-out")
    _say(save_triples(triples, args.triples_out))
    n_pos = sum(1 for p in pairs if p.polarity == "positive")
    print(f"{n_pos} positive / {len(pairs) - n_pos} negative pairs, "
          f"{len(triples)} triples")
    return 0


def cmd_split(args) -> int:
    ontology = load_ontology(args.ontology)
    dataset = load_dataset(args.dataset, ontology)
    if args.seeds:
        seeds = [int(s) for s in args.seeds.split(",")]
    else:
        base = args.seed if args.seed is not None else 0
        seeds = [derive_seed(base, f"split:{dataset.name}:{k}")
                 for k in range(N_SPLITS)]
    splits = make_splits(dataset, seeds, train_ratio=args.train_ratio)
    out = Path(args.out_dir)
    for k, split in enumerate(splits):
        _say(save_split(split, out / f"split_{k}.json"))
        frac = out_fraction(split)
        frac_text = "n/a" if frac is None else f"{100 * frac:.2f}%"
        print(f"  split {k}: {len(split.train)} train / "
              f"{len(split.test)} test, OUT {frac_text}")
    return 0


def cmd_train(args) -> int:
    cfg = _collect_config(args)
    ontology = load_ontology(args.ontology)
    dataset = load_dataset(args.dataset, ontology)
    if args.split:
        split = load_split(args.split, dataset)
        train_set = dataset.subset(split.train)
    else:
        train_set = dataset
    tc = _train_config(cfg, args.strategy, cfg["seed"])
    model = run_strategy(tc, ontology, train_set)
    _say(save_model(model, args.out))
    return 0


def cmd_predict(args) -> int:
    ontology = load_ontology(args.ontology)
    model = load_model(args.model, ontology)
    dataset = load_dataset(args.dataset, ontology)
    split = load_split(args.split, dataset)
    _say(save_predictions(predict_split(model, dataset, split), args.out))
    return 0


def cmd_prompts(args) -> int:
    ontology = load_ontology(args.ontology)
    dataset = _load_subset(args, ontology)
    _say(save_prompts(dataset, args.style, args.out))
    return 0


def _metrics_line(label, m) -> str:
    def pct(v):
        return "  n/a " if v is None else f"{100 * v:6.2f}"
    return (f"  {label}: acc in/out/all {pct(m.accuracy_in)}/"
            f"{pct(m.accuracy_out)}/{pct(m.accuracy_overall)}  "
            f"f1 {pct(m.macro_f1_in)}/{pct(m.macro_f1_out)}/"
            f"{pct(m.macro_f1_overall)}  "
            f"support {m.support_in}+{m.support_out}")


def cmd_evaluate(args) -> int:
    ontology = load_ontology(args.ontology)
    dataset = load_dataset(args.dataset, ontology)
    preds = args.predictions or []
    split_paths = args.split or []
    if len(preds) != len(split_paths):
        raise UsageError(f"got {len(preds)} --predictions but "
                         f"{len(split_paths)} --split; they pair up")
    if len(preds) not in (1, N_SPLITS):
        raise UsageError(f"expected 1 or {N_SPLITS} prediction/split "
                         f"pairs, got {len(preds)}")
    runs = []
    for pred_path, split_path in zip(preds, split_paths):
        split = load_split(split_path, dataset)
        predictions = ingest_predictions(pred_path, ontology, split)
        runs.append(evaluate(predictions, split, dataset))
    payload = {
        "header": {
            "tool_version": __version__,
            "f1_averaging": "macro",
            "ontology_version": ontology.version_tag,
            "dataset": dataset.name,
            "split_seeds": [load_split(p).seed for p in split_paths],
        },
        "per_split": [m.to_dict() for m in runs],
    }
    for k, m in enumerate(runs):
        print(_metrics_line(f"split {k}", m))
    if len(runs) == N_SPLITS:
        payload["aggregate"] = aggregate(runs).to_dict()
    _say(atomic_write_text(args.out, dump_json(payload)))
    return 0


def cmd_cross_eval(args) -> int:
    ontology = load_ontology(args.ontology)
    datasets = []
    models = {}
    splits = {}
    for entry in args.entry:
        try:
            name, rest = entry.split("=", 1)
            dataset_path, splits_dir, model_path = rest.split(":")
        except ValueError:
            raise UsageError(
                f"bad --entry {entry!r}; expected "
                f"NAME=dataset.jsonl:splits_dir:model.npz") from None
        dataset = load_dataset(dataset_path, ontology, name=name)
        datasets.append(dataset)
        models[name] = load_model(model_path, ontology)
        splits[name] = tuple(
            load_split(Path(splits_dir) / f"split_{k}.json", dataset)
            for k in range(N_SPLITS))
    matrix = cross_matrix(models, datasets, splits, jobs=args.jobs)
    out = Path(args.out_dir)
    _say(atomic_write_text(out / "cross_matrix.json",
                           dump_json(matrix.to_dict())))
    for metric_field in ("accuracy_overall", "macro_f1_overall"):
        _say(atomic_write_text(out / f"cross_{metric_field}.csv",
                               cross_csv(matrix, metric_field)))
    return 0


def cmd_stats(args) -> int:
    ontology = load_ontology(args.ontology)
    datasets = [load_dataset(p, ontology) for p in args.dataset]
    report = dataset_stats(datasets)
    _say(atomic_write_text(args.out, dump_json(report.to_dict())))
    for name in report.dataset_names:
        print(f"  {name}: {len(report.label_counts[name])} concepts, "
              f"{report.unique_labels[name]} unique to it")
    print(f"  shared by >=2: {report.shared_two_or_more}, "
          f"shared by all: {report.shared_all}, "
          f"union: {report.union_size}")
    return 0


def cmd_pipeline(args) -> int:
    cfg = _collect_config(args)
    seed = cfg["seed"]
    out = Path(args.out_dir)
    ontology, datasets = gen_synthetic(configmod.synth_config(cfg))
    artifacts = [save_ontology(ontology, out / "ontology.tsv")]
    artifacts += [save_dataset(ds, out / f"{ds.name}.jsonl")
                  for ds in datasets]

    split_seeds = {
        ds.name: [derive_seed(seed, f"split:{ds.name}:{k}")
                  for k in range(N_SPLITS)]
        for ds in datasets
    }
    all_splits = {
        ds.name: make_splits(ds, split_seeds[ds.name],
                             train_ratio=cfg["train_ratio"])
        for ds in datasets
    }
    for ds in datasets:
        for k, split in enumerate(all_splits[ds.name]):
            artifacts.append(save_split(
                split, out / "splits" / ds.name / f"split_{k}.json"))

    results = {}
    cross_models = {}
    for ds in datasets:
        for strategy in cfg["strategies"]:
            runs = []
            for k, split in enumerate(all_splits[ds.name]):
                tc = _train_config(
                    cfg, strategy,
                    derive_seed(seed, f"train:{ds.name}:{strategy}:{k}"))
                model = run_strategy(tc, ontology, ds.subset(split.train))
                if args.save_models:
                    artifacts.append(save_model(
                        model, out / "models"
                        / f"{ds.name}.{strategy}.{k}.npz"))
                preds = predict_split(model, ds, split)
                runs.append(evaluate(preds, split, ds))
                if k == 0:
                    cross_models.setdefault(strategy, {})[ds.name] = model
            results[(ds.name, strategy)] = aggregate(runs)

    cross = {
        strategy: cross_matrix(cross_models[strategy], datasets,
                               all_splits, jobs=args.jobs)
        for strategy in cfg["strategies"]
    }
    overlap = dataset_stats(datasets)

    report = {
        "header": {
            "tool_version": __version__,
            "f1_averaging": "macro",
            "config": configmod.config_as_strings(cfg),
            "config_hash": configmod.config_hash(cfg),
            "seed": seed,
            "ontology_version": ontology.version_tag,
            "split_seeds": split_seeds,
            "strategies": list(cfg["strategies"]),
            "model_kind": cfg["model_kind"],
        },
        "out_fractions": {
            ds.name: [out_fraction(s) for s in all_splits[ds.name]]
            for ds in datasets
        },
        "results": {
            ds.name: {
                strategy: results[(ds.name, strategy)].to_dict()
                for strategy in cfg["strategies"]
            }
            for ds in datasets
        },
        "cross": {s: m.to_dict() for s, m in cross.items()},
        "overlap": overlap.to_dict(),
    }
    artifacts.append(atomic_write_text(out / "report.json",
                                       dump_json(report)))
    artifacts.append(atomic_write_text(out / "results.csv",
                                       results_csv(results)))
    for strategy, matrix in cross.items():
        artifacts.append(atomic_write_text(
            out / f"cross_{strategy}.csv", cross_csv(matrix)))

    for ds in datasets:
        for strategy in cfg["strategies"]:
            agg = results[(ds.name, strategy)]

            def pct(f):
                st = agg.stats[f]
                if st.mean is None:
                    return "n/a"
                std = f" ±{100 * st.std:.2f}" if st.std is not None else ""
                return f"{100 * st.mean:.2f}{std}"

            print(f"{ds.name} {strategy}: "
                  f"acc in {pct('accuracy_in')} / "
                  f"out {pct('accuracy_out')} / "
                  f"all {pct('accuracy_overall')}")
    for p in artifacts:
        _say(p)
    return 0


# -- parser --------------------------------------------------------------

_SYNTH_KEYS = ("n_pt", "children_min", "children_max", "n_hlt",
               "n_samples", "zipf_exponent", "typo_rates",
               "paraphrase_rates")
_TRAIN_KEYS = ("model_kind", "learning_rate", "batch_size", "n_features",
               "ngram_min", "ngram_max", "embed_dim", "temperature",
               "epoch_scale")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="termnorm",
                     description="Deterministic term normalization over "
                                 "two-level concept ontologies.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", metavar="COMMAND",
                                parser_class=_Parser)

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        p.set_defaults(func=func)
        return p

    p = add("synth", cmd_synth, "generate the synthetic benchmark")
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--out-dir", required=True)
    _add_config_flags(p, _SYNTH_KEYS)

    p = add("ingest", cmd_ingest, "validate a dataset and write its "
                                  "concept-labeled normal form")
    p.add_argument("--ontology", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)

    p = add("op-corpus", cmd_op_corpus,
            "write the ontology pretraining corpus (child term -> parent)")
    p.add_argument("--ontology", required=True)
    p.add_argument("--out", required=True)

    p = add("pairs", cmd_pairs, "write contrastive sample files")
    p.add_argument("--mode", required=True,
                   choices=("pair-triple", "dataset-synonym",
                            "ontology-synonym"))
    p.add_argument("--ontology", required=True)
    p.add_argument("--dataset")
    p.add_argument("--split", help="restrict to one side of a split")
    p.add_argument("--subset", choices=("train", "test"), default="train")
    p.add_argument("--max-negatives", type=int, default=None,
                   help="cap negatives at N per positive (pair-triple)")
    p.add_argument("--seed", type=int, default=0,
                   help="seed for the negative subsample")
    p.add_argument("--out", required=True, help="pairs JSONL path")
    p.add_argument("--triples-out", help="triples JSONL path (pair-triple)")

    p = add("split", cmd_split, "write train/test splits with categories")
    p.add_argument("--ontology", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--train-ratio", type=float, default=0.6)
    p.add_argument("--seed", type=int, help="master seed (derives "
                                            f"{N_SPLITS} split seeds)")
    p.add_argument("--seeds", help="explicit comma-separated split seeds")
    p.add_argument("--out-dir", required=True)

    p = add("train", cmd_train, "train one model under a strategy")
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--seed", type=int)
    p.add_argument("--ontology", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--split", help="train on this split's train side")
    p.add_argument("--strategy", required=True,
                   choices=("finetune", "pretrain", "pretrain_finetune"))
    p.add_argument("--out", required=True, help="checkpoint path (.npz)")
    _add_config_flags(p, _TRAIN_KEYS)

    p = add("predict", cmd_predict, "predict a split's test side")
    p.add_argument("--ontology", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--split", required=True)
    p.add_argument("--out", required=True)

    p = add("prompts", cmd_prompts, "render prompts for external "
                                    "generative models")
    p.add_argument("--ontology", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--split")
    p.add_argument("--subset", choices=("train", "test"), default="test")
    p.add_argument("--style", required=True, choices=("gpt2", "sci5"))
    p.add_argument("--out", required=True)

    p = add("evaluate", cmd_evaluate, "score prediction files on splits")
    p.add_argument("--ontology", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--predictions", action="append",
                   help=f"prediction JSONL; give 1 or {N_SPLITS} times")
    p.add_argument("--split", action="append",
                   help="split file paired with --predictions")
    p.add_argument("--out", required=True)

    p = add("cross-eval", cmd_cross_eval,
            "zero-shot transfer matrix across datasets")
    p.add_argument("--ontology", required=True)
    p.add_argument("--entry", action="append", required=True,
                   help="NAME=dataset.jsonl:splits_dir:model.npz "
                        "(repeat per dataset)")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out-dir", required=True)

    p = add("stats", cmd_stats, "label overlap across datasets")
    p.add_argument("--ontology", required=True)
    p.add_argument("--dataset", action="append", required=True)
    p.add_argument("--out", required=True)

    p = add("pipeline", cmd_pipeline,
            "synth + split + train + evaluate + report, end to end")
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--save-models", action="store_true")
    _add_config_flags(p, _SYNTH_KEYS + _TRAIN_KEYS
                      + ("train_ratio", "strategies"))
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:      # --help / --version
        return int(exc.code or 0)
    if not getattr(args, "func", None):
        parser.print_help()
        return 1
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except TrainingDivergedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (TermNormError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
