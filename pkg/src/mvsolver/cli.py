"""Command-line front end: synth / augment / train / eval / predict.

Exit codes: 0 success, 1 usage, 2 unusable data or config, 3 training
divergence.
"""

import argparse
import logging
import sys
from dataclasses import replace

from .augmentation import augment_dataset
from .checkpoint import CheckpointError
from .config import ConfigError, DataError, TrainConfig, load_config
from .data import dump_dataset, generate_synthetic, load_dataset
from .encoder import Vocab, tokenize
from .evaluate import (
    dump_predictions, evaluate_model, prediction_expression, report_text,
)
from .expression import EvaluationError, Problem, evaluate, to_infix
from .model import Model
from .train import TrainingDiverged, train, train_discriminator

log = logging.getLogger("mvsolver.cli")


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad usage; the contract here reserves 2 for
    # data errors and uses 1 for usage
    def error(self, message):
        self.print_usage(sys.stderr)
        print("%s: error: %s" % (self.prog, message), file=sys.stderr)
        raise SystemExit(1)


def cmd_synth(args):
    problems = generate_synthetic(args.size, args.seed)
    dump_dataset(problems, args.out)
    log.info("wrote %d problems to %s", len(problems), args.out)
    return 0


def cmd_augment(args):
    problems = load_dataset(args.inp)
    if not problems:
        raise DataError("%s: no usable records" % args.inp)
    grown = augment_dataset(problems)
    dump_dataset(grown, args.out)
    log.info("%s: %d problems grew to %d", args.out, len(problems),
             len(grown))
    return 0


def cmd_train(args):
    cfg = load_config(args.config) if args.config else TrainConfig()
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    cfg.validated()
    train_set = load_dataset(args.train_path, cfg.tokenizer)
    if not train_set:
        raise DataError("%s: no usable training records" % args.train_path)
    dev_set = load_dataset(args.dev_path, cfg.tokenizer)
    vocab = Vocab.build([p.tokens for p in train_set + dev_set],
                        cfg.max_quantities)
    model = Model(cfg, vocab)
    train(model, train_set, dev_set)
    if cfg.disc_epochs > 0:
        train_discriminator(model, train_set)
    model.save(args.out)
    log.info("saved checkpoint to %s", args.out)
    return 0


def cmd_eval(args):
    model = Model.load(args.ckpt)
    test_set = load_dataset(args.test, model.cfg.tokenizer)
    if not test_set:
        raise DataError("%s: no usable test records" % args.test)
    report, records = evaluate_model(model, test_set, phase=args.phase)
    text = report_text(report)
    with open(args.report, "w") as f:
        f.write(text)
    if args.dump:
        dump_predictions(records, args.dump)
    sys.stdout.write(text)
    return 0


def cmd_predict(args):
    model = Model.load(args.ckpt)
    tokens, quantities = tokenize(args.text, model.cfg.tokenizer)
    if not quantities:
        raise DataError("no numeric quantities in the given text")
    problem = Problem(text=args.text, tokens=tokens, quantities=quantities)
    pred = model.predict(problem, phase=args.phase)
    expr = prediction_expression(pred)
    print("view = %s" % pred.view)
    print("abstained = %s" % ("true" if pred.abstained else "false"))
    if expr is not None:
        print("equation = %s" % " ".join(to_infix(expr)))
        try:
            print("answer = %r" % evaluate(expr, problem.bindings()))
        except EvaluationError as exc:
            log.warning("equation does not evaluate: %s", exc)
    return 0


def build_parser():
    parser = _Parser(prog="mvsolver",
                     description="two-view math word problem solver")
    parser.add_argument("-v", "--verbose", action="store_true",
                        help="debug-level logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a seeded synthetic corpus")
    p.add_argument("--size", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("augment",
                       help="append distributive variants to a dataset")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("train", help="fit both views, then the selector")
    p.add_argument("--train", dest="train_path", required=True)
    p.add_argument("--dev", dest="dev_path", required=True)
    p.add_argument("--config", default=None,
                   help="flat key = value file; defaults otherwise")
    p.add_argument("--seed", type=int, default=None,
                   help="override the config seed")
    p.add_argument("--out", required=True, help="checkpoint path")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score a checkpoint on a test set")
    p.add_argument("--test", required=True)
    p.add_argument("--ckpt", required=True)
    p.add_argument("--phase", type=int, choices=(1, 2), default=1)
    p.add_argument("--report", required=True, help="report text path")
    p.add_argument("--dump", default=None,
                   help="also write per-problem predictions as JSONL")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("predict", help="solve one problem text")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--text", required=True)
    p.add_argument("--phase", type=int, choices=(1, 2), default=1)
    p.set_defaults(func=cmd_predict)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (DataError, ConfigError, CheckpointError, OSError) as exc:
        log.error("%s", exc)
        return 2
    except TrainingDiverged as exc:
        log.error("%s", exc)
        return 3


if __name__ == "__main__":
    sys.exit(main())
