"""Command-line entry points.

Subcommands: ``run`` (one experiment), ``sweep`` (a config axis over several
values), ``gen-corpus`` (write a synthetic fully annotated corpus), ``eval``
(score a prediction file against gold).  Config files use key=value lines;
``-D key=value`` overrides individual entries.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from .corpus import SyntheticSpec, generate_synthetic_corpus, read_conll, write_conll
from .errors import TaxexError
from .evaluation import masked_micro_f1, micro_f1_tags
from .harness import (
    ExperimentConfig,
    Runner,
    config_from_mapping,
    parse_config_file,
    run_experiment,
    run_model_b_comparison,
    sweep,
)


def _overrides(pairs) -> dict[str, str]:
    out = {}
    for pair in pairs or []:
        if "=" not in pair:
            raise TaxexError(f"override must look like key=value, got {pair!r}")
        key, _, value = pair.partition("=")
        out[key.strip()] = value.strip()
    return out


def _config(args) -> ExperimentConfig:
    mapping = parse_config_file(args.config) if args.config else {}
    mapping.update(_overrides(args.define))
    return config_from_mapping(mapping)


def _cmd_run(args) -> int:
    config = _config(args)
    runner = Runner(config)
    if args.compare_model_b:
        report = run_model_b_comparison(config, runner=runner)
    else:
        report = run_experiment(config, runner=runner)
    if args.out:
        csv_path, summary_path = report.write(args.out)
        print(f"wrote {csv_path} and {summary_path}")
        if config.training_logs:
            runner.write_training_logs(f"{args.out}/training_logs")
    print(report.summary(), end="")
    return 0


def _cmd_sweep(args) -> int:
    config = _config(args)
    values: list = []
    for raw in args.values.split(","):
        raw = raw.strip()
        if not raw:
            continue
        values.append(int(raw) if args.axis == "few_shot_k" else raw)
    report = sweep(config, args.axis, values)
    if args.out:
        csv_path, summary_path = report.write(args.out)
        print(f"wrote {csv_path} and {summary_path}")
    print(report.summary(), end="")
    return 0


def _cmd_gen_corpus(args) -> int:
    mapping = parse_config_file(args.config) if args.config else {}
    mapping.update(_overrides(args.define))
    spec = SyntheticSpec()
    fields = {}
    for key, value in mapping.items():
        name = key.split(".", 1)[-1]  # accept both density= and synthetic.density=
        if name not in SyntheticSpec.__dataclass_fields__:
            raise TaxexError(f"unknown synthetic option {name!r}")
        sample = getattr(spec, name)
        fields[name] = type(sample)(value)
    corpus = generate_synthetic_corpus(replace(spec, **fields))
    write_conll(corpus, args.out)
    print(f"wrote {len(corpus)} sentences ({corpus.n_tokens()} tokens) to {args.out}")
    return 0


def _cmd_eval(args) -> int:
    gold = read_conll(args.gold)
    pred = read_conll(args.pred)
    if len(gold) != len(pred):
        raise TaxexError(f"sentence count mismatch: gold={len(gold)} pred={len(pred)}")
    gold_tags = [s.observed_tags() for s in gold.sentences]
    pred_tags = [s.observed_tags() for s in pred.sentences]
    if args.mask:
        masked = [t.strip() for t in args.mask.split(",") if t.strip()]
        prf = masked_micro_f1(pred_tags, gold_tags, masked)
    else:
        prf = micro_f1_tags(pred_tags, gold_tags)
    print(f"precision={prf.precision:.4f} recall={prf.recall:.4f} f1={prf.f1:.4f} "
          f"(tp={prf.tp} fp={prf.fp} fn={prf.fn})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="taxex",
                                     description="Taxonomy-expansion NER experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one experiment config")
    run_p.add_argument("--config", help="key=value config file")
    run_p.add_argument("--out", help="directory for report.csv and summary.txt")
    run_p.add_argument("-D", "--define", action="append", metavar="key=value",
                       help="override a config entry")
    run_p.add_argument("--compare-model-b", action="store_true",
                       help="run the side-B model comparison protocol instead")
    run_p.set_defaults(func=_cmd_run)

    sweep_p = sub.add_parser("sweep", help="run one config across axis values")
    sweep_p.add_argument("--config", help="key=value config file")
    sweep_p.add_argument("--axis", required=True, choices=("few_shot_k", "type_ratio"))
    sweep_p.add_argument("--values", required=True, help="comma-separated axis values")
    sweep_p.add_argument("--out")
    sweep_p.add_argument("-D", "--define", action="append", metavar="key=value")
    sweep_p.set_defaults(func=_cmd_sweep)

    gen_p = sub.add_parser("gen-corpus", help="write a synthetic annotated corpus")
    gen_p.add_argument("--out", required=True, help="output CoNLL file")
    gen_p.add_argument("--config", help="key=value file of synthetic options")
    gen_p.add_argument("-D", "--define", action="append", metavar="key=value")
    gen_p.set_defaults(func=_cmd_gen_corpus)

    eval_p = sub.add_parser("eval", help="span micro-F1 of predictions against gold")
    eval_p.add_argument("--gold", required=True)
    eval_p.add_argument("--pred", required=True)
    eval_p.add_argument("--mask", help="comma-separated label names to ignore in predictions")
    eval_p.set_defaults(func=_cmd_eval)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except TaxexError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
