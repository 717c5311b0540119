"""Command-line front end.

Exit status: 0 success, 1 usage error, 2 data/parse/I-O error,
3 numerical or runtime failure (including a failed gradient check).
"""

import argparse
import sys

import numpy as np

from . import __version__
from .errors import (
    AngularMetricError,
    InvalidInputError,
    NumericalError,
    ParseError,
    SamplingError,
)
from .evaluation import evaluate, split_by_class
from .gradcheck import CHECKABLE, run_grad_check
from .io import read_features, write_features
from .training import (
    ANGULAR_LOSSES,
    LOSS_ALIASES,
    LOSS_KINDS,
    TrainConfig,
    embed,
    generate_synthetic,
    load_model,
    save_model,
    train,
)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_RUNTIME = 0, 1, 2, 3


class UsageError(AngularMetricError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _int_list(text):
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def _float_list(text):
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def _fmt_num(x):
    return f"{x:.6f}"


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_synth(args, out):
    data = generate_synthetic(args.classes, args.per_class, args.dim, args.center_scale,
                              args.noise, args.seed, signal_dim=args.signal_dim)
    header = [f"synth classes={args.classes} per_class={args.per_class} dim={args.dim} "
              f"center_scale={args.center_scale} noise={args.noise} "
              f"signal_dim={args.signal_dim or args.dim} seed={args.seed}"]
    if args.test_out:
        train_set, test_set = split_by_class(data, args.train_fraction, args.seed)
        write_features(args.out, train_set, header + ["split=train"])
        write_features(args.test_out, test_set, header + ["split=test"])
        print(f"rows={len(train_set)} classes={len(train_set.classes)} -> {args.out}", file=out)
        print(f"rows={len(test_set)} classes={len(test_set.classes)} -> {args.test_out}", file=out)
    else:
        write_features(args.out, data, header)
        print(f"rows={len(data)} classes={len(data.classes)} -> {args.out}", file=out)


def _train_config(args, alpha=None):
    try:
        return TrainConfig(
            loss=args.loss,
            alpha_degrees=args.alpha if alpha is None else alpha,
            margin=args.margin,
            lam=args.lam,
            batch_size=args.batch,
            iterations=args.iters,
            learning_rate=args.lr,
            seed=args.seed,
            encoder=args.encoder,
            embed_dim=args.embed_dim,
            hidden_dim=args.hidden_dim,
            normalize_output=args.normalize,
        )
    except InvalidInputError as exc:
        raise UsageError(str(exc)) from exc


def _log(msg):
    print(msg, file=sys.stderr)


def cmd_train(args, out):
    config = _train_config(args)
    data = read_features(args.data)
    model, history = train(data, config, log_every=args.log_every, log=_log)
    save_model(model, args.out_model)
    if args.out_history:
        with open(args.out_history, "w", encoding="ascii") as fh:
            fh.write("".join(f"{v:.17g}\n" for v in history))
    print(f"loss first={_fmt_num(history[0])} last={_fmt_num(history[-1])} "
          f"iterations={len(history)} -> {args.out_model}", file=out)


def cmd_embed(args, out):
    model = load_model(args.model)
    data = read_features(args.data)
    if data.dim != model.input_dim:
        raise InvalidInputError(f"model expects dim {model.input_dim}, data has {data.dim}")
    emb = data.with_vectors(embed(model, data.vectors))
    write_features(args.out, emb, [f"embedding kind={model.kind} embed_dim={model.embed_dim} "
                                   f"normalize={int(model.normalize_output)}"])
    print(f"rows={len(emb)} dim={emb.dim} -> {args.out}", file=out)


def _report(data, recall, k, seed):
    return evaluate(data.vectors, data.labels, recall, k=k, seed=seed)


def cmd_eval(args, out):
    data = read_features(args.data)
    out.write(_report(data, args.recall, args.k, args.seed).format())


def cmd_grad_check(args, out):
    if args.loss not in CHECKABLE:
        raise UsageError(f"unknown loss {args.loss!r}; choose from {', '.join(CHECKABLE)}")
    if args.tol < 0 or args.trials < 1 or args.dim < 1:
        raise UsageError("need tol >= 0, trials >= 1 and dim >= 1")
    summary = run_grad_check(args.loss, args.trials, args.dim, args.tol, args.seed,
                             batch_size=args.batch, alpha=args.alpha, margin=args.margin,
                             lam=args.lam, step=args.step)
    print(summary.format(), file=out)
    return EXIT_OK if summary.passed else EXIT_RUNTIME


def cmd_sweep_alpha(args, out):
    if args.loss not in ANGULAR_LOSSES:
        raise UsageError(f"sweep-alpha needs an angular loss ({', '.join(ANGULAR_LOSSES)})")
    configs = [_train_config(args, alpha) for alpha in args.alphas]
    data = read_features(args.data)
    if args.eval_data:
        train_set, test_set = data, read_features(args.eval_data)
    else:
        train_set, test_set = split_by_class(data, args.train_fraction, args.seed)
    if args.report_dir:
        import os

        os.makedirs(args.report_dir, exist_ok=True)
    columns = None
    for alpha, config in zip(args.alphas, configs):
        _log(f"alpha={alpha:g}: training {config.iterations} iterations")
        model, _ = train(train_set, config)
        emb = test_set.with_vectors(embed(model, test_set.vectors))
        report = _report(emb, args.recall, args.k, args.seed)
        if columns is None:
            columns = [f"recall@{r}" for r in sorted(report.recall_at)] + ["nmi", "f1"]
            out.write("\t".join(["alpha"] + columns) + "\n")
        values = [report.recall_at[r] for r in sorted(report.recall_at)] + [report.nmi, report.f1]
        out.write("\t".join([_fmt_num(alpha)] + [_fmt_num(v) for v in values]) + "\n")
        if args.report_dir:
            with open(f"{args.report_dir}/alpha_{alpha:g}.tsv", "w", encoding="ascii") as fh:
                fh.write(report.format())


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _add_train_flags(p, alpha_flag=True):
    p.add_argument("--loss", default="npair-angular",
                   help=f"one of {', '.join(LOSS_KINDS)} (aliases: {', '.join(LOSS_ALIASES)})")
    if alpha_flag:
        p.add_argument("--alpha", type=float, default=None, help="angle bound in degrees (angular losses)")
    p.add_argument("--margin", type=float, default=0.1)
    p.add_argument("--lambda", dest="lam", type=float, default=2.0)
    p.add_argument("--batch", type=int, default=32)
    p.add_argument("--iters", type=int, default=2000)
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--encoder", choices=("identity", "linear", "mlp"), default="linear")
    p.add_argument("--embed-dim", type=int, default=16)
    p.add_argument("--hidden-dim", type=int, default=64)
    p.add_argument("--normalize", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--seed", type=int, required=True)


def build_parser():
    parser = _Parser(prog="angular-metric", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="write a synthetic Gaussian-blob feature file")
    p.add_argument("--classes", type=int, required=True)
    p.add_argument("--per-class", type=int, required=True)
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--center-scale", type=float, default=1.0)
    p.add_argument("--noise", type=float, default=0.1)
    p.add_argument("--signal-dim", type=int, default=None)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--test-out", default=None, help="also write a class-disjoint test split here")
    p.add_argument("--train-fraction", type=float, default=0.5)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train an encoder on a feature file")
    p.add_argument("--data", required=True)
    _add_train_flags(p)
    p.add_argument("--out-model", required=True)
    p.add_argument("--out-history", default=None)
    p.add_argument("--log-every", type=int, default=0)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("embed", help="map a feature file through a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("eval", help="Recall@R, NMI and F1 of an embedding file")
    p.add_argument("--data", required=True)
    p.add_argument("--recall", type=_int_list, default=[1, 2, 4, 8])
    p.add_argument("--k", type=int, default=None, help="clusters (default: number of classes)")
    p.add_argument("--seed", type=int, required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("grad-check", help="compare analytic and finite-difference gradients")
    p.add_argument("--loss", required=True, help=", ".join(CHECKABLE))
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--dim", type=int, default=8)
    p.add_argument("--tol", type=float, default=1e-5)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--batch", type=int, default=8)
    p.add_argument("--alpha", type=float, default=None, help="fixed alpha; default draws 20-60 per trial")
    p.add_argument("--margin", type=float, default=0.1)
    p.add_argument("--lambda", dest="lam", type=float, default=2.0)
    p.add_argument("--step", type=float, default=1e-5)
    p.set_defaults(func=cmd_grad_check)

    p = sub.add_parser("sweep-alpha", help="train and evaluate once per alpha")
    p.add_argument("--data", required=True)
    p.add_argument("--eval-data", default=None, help="test features (default: class-disjoint split of --data)")
    p.add_argument("--train-fraction", type=float, default=0.5)
    p.add_argument("--alphas", type=_float_list, required=True)
    _add_train_flags(p, alpha_flag=False)
    p.add_argument("--recall", type=_int_list, default=[1, 2, 4, 8])
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--report-dir", default=None, help="also write each alpha's full eval report here")
    p.set_defaults(func=cmd_sweep_alpha)
    return parser


def main(argv=None, out=None):
    out = sys.stdout if out is None else out
    try:
        args = build_parser().parse_args(argv)
        status = args.func(args, out)
        return EXIT_OK if status is None else status
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ParseError, InvalidInputError, SamplingError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericalError, AngularMetricError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
