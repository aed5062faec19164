"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 data, grammar or model error.
Vectors are exchanged as comma-separated decimals, trees as one term per line.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import re
import sys
from dataclasses import asdict, replace
from typing import List, Optional

import numpy as np

from . import data, harness, modelfile, optim
from .errors import TesaeError
from .grammar import Grammar, load_grammar, load_grammar_file, parse_tree, print_tree
from .ted import rmse_from_distances

log = logging.getLogger("tesae")

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


class _Formatter(argparse.HelpFormatter):
    """Shows every optional flag's default, with or without help text."""

    def _get_help_string(self, action):
        text = action.help or ""
        if (not action.option_strings or action.required or action.default is argparse.SUPPRESS
                or "default:" in text):
            return text
        if action.default is None:
            if "if unset" in text:
                return text
            shown = "unset"
        elif action.default is False:
            shown = "off"
        else:
            shown = "%(default)s"
        return f"{text} (default: {shown})".lstrip()


# ---------------------------------------------------------------------------
# helpers


def _grammar(spec: str) -> Grammar:
    """A builtin grammar name or a grammar file path."""
    if spec in data.BUILTIN_GRAMMARS:
        return load_grammar(data.BUILTIN_GRAMMARS[spec])
    return load_grammar_file(spec)


def _out(path: Optional[str]):
    if path in (None, "-"):
        return _Stdout()
    return open(path, "w", encoding="utf-8", newline="")


class _Stdout:
    def __enter__(self):
        return sys.stdout

    def __exit__(self, *exc):
        sys.stdout.flush()
        return False


def _lines(items: List[str]) -> List[str]:
    """Positional arguments, or non-blank stdin lines when there are none."""
    if items:
        return items
    return [ln.strip() for ln in sys.stdin if ln.strip()]


def format_vector(v) -> str:
    return ",".join(f"{x:.17g}" for x in np.asarray(v, dtype=float))


def parse_vector(text: str) -> np.ndarray:
    try:
        return np.array([float(p) for p in text.replace(" ", "").split(",") if p != ""], dtype=float)
    except ValueError as exc:
        raise ValueError(f"not a comma-separated vector: {exc}") from None


def _hyper_from_args(args, variant: str, seed: int):
    base = harness.default_hyper(variant, seed)
    if variant == "esae":
        changes = {"cycle_weight": args.cycle_weight, "jump_weight": args.jump_weight,
                   "jump_length": args.jump_length, "input_scale": args.input_scale,
                   "ridge": args.ridge, "max_len": args.max_len}
    else:
        changes = {"spectral_radius": args.rho, "sparsity": args.beta, "svm_C": args.svm_c,
                   "kernel": args.kernel}
    changes["dim"] = args.dim
    return replace(base, **{k: v for k, v in changes.items() if v is not None})


def _encode(model, t):
    return harness.encode_code(model, t)


# ---------------------------------------------------------------------------
# subcommands


def cmd_gen(args, kind):
    cfg = data.GenConfig(count=args.count, seed=args.seed, max_binary=getattr(args, "max_binary", 3),
                         size_cap=getattr(args, "size_cap", 50))
    trees = data.gen_boolean(cfg) if kind == "boolean" else data.gen_expressions(cfg, args.mode)
    with _out(args.out) as fh:
        for t in trees:
            fh.write(print_tree(t) + "\n")
    return EXIT_OK


def cmd_train(args):
    g = _grammar(args.grammar)
    corpus = data.load_corpus(args.data)
    hyper = _hyper_from_args(args, args.variant, args.seed)
    model = harness.train_model(g, corpus, hyper)
    modelfile.save_model(model, args.out)
    log.info("trained %s on %d trees -> %s", args.variant, len(corpus), args.out)
    return EXIT_OK


def cmd_encode(args):
    model = modelfile.load_model(args.model)
    with _out(args.out) as fh:
        for line in _lines(args.trees):
            fh.write(format_vector(_encode(model, parse_tree(line))) + "\n")
    return EXIT_OK


def cmd_decode(args):
    model = modelfile.load_model(args.model)
    with _out(args.out) as fh:
        for line in _lines(args.vectors):
            v = parse_vector(line)
            if v.shape != (model.dim,):
                raise ValueError(f"vector has {v.size} components, expected n = {model.dim}")
            fh.write(print_tree(model.decode(v)) + "\n")
    return EXIT_OK


def cmd_eval(args):
    model = modelfile.load_model(args.model)
    corpus = data.load_corpus(args.data)
    distances, ok, outs = harness.evaluate_model(model, corpus)
    if args.out:
        import csv
        with _out(args.out) as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["index", "tree", "decoded", "distance", "grammatical"])
            for i, (t, o, d, g) in enumerate(zip(corpus, outs, distances, ok), 1):
                w.writerow([i, print_tree(t), print_tree(o), d, int(g)])
    print(f"rmse {rmse_from_distances(distances):.6f}")
    print(f"grammatical {sum(ok) / len(ok):.6f}")
    return EXIT_OK


def cmd_crossval(args):
    g = _grammar(args.grammar)
    corpus = data.load_corpus(args.data)
    hyper = _hyper_from_args(args, args.variant, args.seed)
    report = harness.crossval(g, corpus, hyper, k=args.folds, seed=args.seed, jobs=args.jobs)
    if args.out:
        with _out(args.out) as fh:
            fh.write(report.to_csv(timings=not args.no_timings))
    print(report.summary())
    return EXIT_OK


def cmd_hypersearch(args):
    g = _grammar(args.grammar)
    train = data.load_corpus(args.data)
    val = data.load_corpus(args.val_data)
    res = harness.hypersearch(g, train, val, args.variant, args.trials, args.seed, args.jobs, args.dim,
                              args.kernel)
    if args.out:
        with _out(args.out) as fh:
            fh.write(res.to_csv())
    print(json.dumps({"val_rmse": res.best_rmse, "hyperparameters": asdict(res.best)}, sort_keys=True))
    return EXIT_OK


def cmd_optimize(args):
    model = modelfile.load_model(args.model)
    corpus = data.load_corpus(args.data)
    codes = np.array([_encode(model, t) for t in corpus])
    cfg = optim.OptimConfig(budget=args.budget, population=args.pop, iterations=args.iters, seed=args.seed)
    res = optim.optimize_latent(model, args.objective, cfg, codes)
    if args.out:
        with _out(args.out) as fh:
            fh.write("generation,best\n")
            for i, h in enumerate(res.history, 1):
                fh.write(f"{i},{h:.17g}\n")
    score = res.score
    print(f"score {score:.17g}" if isinstance(score, float) else f"score {score}")
    print(f"tree {print_tree(res.tree)}")
    print(f"evaluations {res.evaluations}")
    return EXIT_OK


def cmd_export_codes(args):
    model = modelfile.load_model(args.model)
    corpus = data.load_corpus(args.data)
    if args.out in (None, "-"):
        sys.stdout.write(harness.export_codes(model, corpus))
    else:
        harness.export_codes(model, corpus, args.out)
    return EXIT_OK


def cmd_score(args):
    fn, _ = optim.OBJECTIVES[args.objective]
    for line in _lines(args.trees):
        s = fn(parse_tree(line))
        print(s if isinstance(s, int) else f"{s:.17g}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def _variant_defaults(field: str, variants) -> str:
    parts = [f"{v} {getattr(harness.default_hyper(v), field)}" for v in variants]
    return "default: " + ", ".join(parts)


def _add_hyper_flags(p):
    p.add_argument("--dim", type=int, default=256, help="reservoir dimension n")
    tree = ("tesae", "stesae")
    t = p.add_argument_group("tree variants (tesae, stesae)")
    t.add_argument("--rho", type=float, default=None,
                   help=f"spectral radius in (0, 1) ({_variant_defaults('spectral_radius', tree)})")
    t.add_argument("--beta", type=float, default=None,
                   help=f"matrix density in (0, 1] ({_variant_defaults('sparsity', tree)})")
    t.add_argument("--svm-c", type=float, default=None,
                   help=f"SVM regularization C ({_variant_defaults('svm_C', tree)})")
    t.add_argument("--kernel", choices=("rbf", "linear"), default=None,
                   help=f"rule classifier kernel ({_variant_defaults('kernel', tree)})")
    s = p.add_argument_group("sequence variant (esae)")
    s.add_argument("--cycle-weight", type=float, default=None,
                   help=f"cycle weight r_c ({_variant_defaults('cycle_weight', ['esae'])})")
    s.add_argument("--jump-weight", type=float, default=None,
                   help=f"jump weight r_j ({_variant_defaults('jump_weight', ['esae'])})")
    s.add_argument("--jump-length", type=int, default=None,
                   help=f"jump length l ({_variant_defaults('jump_length', ['esae'])})")
    s.add_argument("--input-scale", type=float, default=None,
                   help=f"input weight magnitude v ({_variant_defaults('input_scale', ['esae'])})")
    s.add_argument("--ridge", type=float, default=None,
                   help=f"ridge regularization ({_variant_defaults('ridge', ['esae'])})")
    s.add_argument("--max-len", type=int, default=None,
                   help="decoded sequence length cap (default: 4 x mean training tree size, at least 16)")


def _common(p):
    # also accepted after the subcommand; SUPPRESS keeps the top-level value
    p.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="random seed (default: 0, or the value given before the command)")
    p.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS,
                   help="suppress progress messages (default: off)")


def _available_cpus() -> int:
    try:
        return len(os.sched_getaffinity(0)) or 1
    except AttributeError:
        return os.cpu_count() or 1


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="tesae", description="Tree echo state autoencoders.", formatter_class=_Formatter)
    p.add_argument("--seed", type=int, default=0, help="random seed")
    p.add_argument("--quiet", action="store_true", help="suppress progress messages")
    sub = p.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True
    jobs_default = _available_cpus()

    def add(name, help_):
        sp = sub.add_parser(name, help=help_, description=help_, formatter_class=_Formatter)
        _common(sp)
        return sp

    sp = add("gen-boolean", "generate random Boolean formulae")
    sp.add_argument("--count", type=int, default=500, help="number of trees")
    sp.add_argument("--max-binary", type=int, default=3, help="maximum number of and/or nodes")
    sp.add_argument("--size-cap", type=int, default=50, help="size at which only leaves are drawn")
    sp.add_argument("--out", default=None, help="output corpus file (stdout if unset)")
    sp.set_defaults(func=lambda a: cmd_gen(a, "boolean"))

    sp = add("gen-expr", "generate random arithmetic expressions")
    sp.add_argument("--count", type=int, default=500, help="number of trees")
    sp.add_argument("--mode", choices=("template", "mixed"), default="template",
                    help="fixed 11-node template or free sampling")
    sp.add_argument("--out", default=None, help="output corpus file (stdout if unset)")
    sp.set_defaults(func=lambda a: cmd_gen(a, "expressions"))

    sp = add("train", "train a model and write it to a file")
    sp.add_argument("--grammar", required=True, help="grammar file or builtin name (boolean, expressions)")
    sp.add_argument("--data", required=True, help="training corpus file")
    sp.add_argument("--variant", choices=harness.VARIANTS, default="tesae", help="model family")
    _add_hyper_flags(sp)
    sp.add_argument("--out", required=True, help="model file to write")
    sp.set_defaults(func=cmd_train)

    sp = add("encode", "encode trees (arguments or stdin lines) to vectors")
    sp.add_argument("--model", required=True, help="model file")
    sp.add_argument("--out", default=None, help="output file (stdout if unset)")
    sp.add_argument("trees", nargs="*", help="trees; read from stdin when absent")
    sp.set_defaults(func=cmd_encode)

    sp = add("decode", "decode comma-separated vectors (arguments or stdin lines) to trees")
    sp.add_argument("--model", required=True, help="model file")
    sp.add_argument("--out", default=None, help="output file (stdout if unset)")
    sp.add_argument("vectors", nargs="*", help="vectors; read from stdin when absent")
    # "-0.5,0.1" is a vector, not an option
    sp._negative_number_matcher = re.compile(r"^-\.?\d")
    sp.set_defaults(func=cmd_decode)

    sp = add("eval", "autoencode a corpus and report RMSE")
    sp.add_argument("--model", required=True, help="model file")
    sp.add_argument("--data", required=True, help="corpus file")
    sp.add_argument("--out", default=None, help="per-tree CSV report")
    sp.set_defaults(func=cmd_eval)

    sp = add("crossval", "k-fold cross-validation")
    sp.add_argument("--grammar", required=True, help="grammar file or builtin name (boolean, expressions)")
    sp.add_argument("--data", required=True, help="corpus file")
    sp.add_argument("--variant", choices=harness.VARIANTS, default="tesae", help="model family")
    _add_hyper_flags(sp)
    sp.add_argument("--folds", type=int, default=20, help="number of folds")
    sp.add_argument("--jobs", type=int, default=jobs_default,
                    help="worker processes (default: %(default)s, the available CPU count)")
    sp.add_argument("--out", default=None, help="CSV report")
    sp.add_argument("--no-timings", action="store_true", help="leave timing columns empty in the report")
    sp.set_defaults(func=cmd_crossval)

    sp = add("hypersearch", "random hyperparameter search")
    sp.add_argument("--grammar", required=True, help="grammar file or builtin name (boolean, expressions)")
    sp.add_argument("--data", required=True, help="training corpus")
    sp.add_argument("--val-data", required=True, help="validation corpus")
    sp.add_argument("--variant", choices=harness.VARIANTS, default="tesae", help="model family")
    sp.add_argument("--dim", type=int, default=256, help="reservoir dimension n, fixed during the search")
    sp.add_argument("--trials", type=int, default=50, help="random configurations to try")
    sp.add_argument("--kernel", choices=("rbf", "linear"), default="rbf",
                    help="rule classifier kernel for the tree variants")
    sp.add_argument("--jobs", type=int, default=jobs_default,
                    help="worker processes (default: %(default)s, the available CPU count)")
    sp.add_argument("--out", default=None, help="CSV trial log")
    sp.set_defaults(func=cmd_hypersearch)

    sp = add("optimize", "CMA-ES search in the code space of a model")
    sp.add_argument("--model", required=True, help="model file")
    sp.add_argument("--data", required=True, help="training corpus (start point and step size)")
    sp.add_argument("--objective", choices=tuple(optim.OBJECTIVES), required=True, help="objective")
    sp.add_argument("--budget", type=int, default=750, help="maximum objective evaluations")
    sp.add_argument("--pop", type=int, default=50, help="population size")
    sp.add_argument("--iters", type=int, default=15, help="generations")
    sp.add_argument("--out", default=None, help="CSV of best-so-far per generation")
    sp.set_defaults(func=cmd_optimize)

    sp = add("export-codes", "write tree codes as CSV")
    sp.add_argument("--model", required=True, help="model file")
    sp.add_argument("--data", required=True, help="corpus file")
    sp.add_argument("--out", default=None, help="CSV file (stdout if unset)")
    sp.set_defaults(func=cmd_export_codes)

    sp = add("score", "score trees under an optimization objective")
    sp.add_argument("--objective", choices=tuple(optim.OBJECTIVES), required=True, help="objective")
    sp.add_argument("trees", nargs="*", help="trees; read from stdin when absent")
    sp.set_defaults(func=cmd_score)
    return p


def run(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(message)s", stream=sys.stderr)
    try:
        for name in ("count", "folds", "trials", "budget", "pop", "iters", "jobs", "dim"):
            value = getattr(args, name, None)
            if value is not None and value < 1:
                raise UsageError(f"tesae {args.command}: error: --{name} must be >= 1")
        return args.func(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (TesaeError, ValueError, KeyError, OSError, ArithmeticError) as exc:
        print(f"tesae {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_DATA


def main() -> None:
    sys.exit(run())
