"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import imageops, pipeline, storage
from .sparse import NumericalError

log = logging.getLogger("boostsr")


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors by default; 2 is reserved for data errors
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _load_config_arg(path) -> pipeline.Config:
    if path is None:
        return pipeline.Config().validate()
    return pipeline.load_config(path)


def _cmd_gen_corpus(args) -> int:
    from . import corpus

    paths = corpus.write_corpus(args.out, args.count, args.seed)
    print(f"wrote {len(paths)} images to {args.out}")
    return 0


def _cmd_train_dict(args) -> int:
    config = _load_config_arg(args.config)
    _, images = pipeline.ingest_dataset(args.train, "train-dict", config)
    pair, anchors = pipeline.train_dict_stage(images, config)
    pipeline.save_model(args.out, config, pair, anchors)
    err = pair.training_errors[-1] if pair.training_errors else float("nan")
    print(f"trained {pair.atom_count} atoms on {len(images)} images "
          f"(final representation error {err:.6g}); model saved to {args.out}")
    return 0


def _cmd_train_boost(args) -> int:
    config, pair, _, _ = pipeline.load_model(args.dict)
    if args.config is not None:
        override = pipeline.load_config(args.config)
        if override.geometry() != config.geometry():
            raise ValueError("--config geometry does not match the dictionary model")
        config = override
    _, images = pipeline.ingest_dataset(args.train, "train-boost", config)
    model = pipeline.train_boost_stage(images, pair, config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    storage.save_boost(storage.model_paths(out)["boost"], model, config.bp_weight)
    if not storage.model_paths(out)["config"].exists():
        pipeline.save_config(storage.model_paths(out)["config"], config)
    betas = ", ".join(f"{b:.4f}" for b in model.betas)
    print(f"trained {len(model.rounds)} boosting round(s) on {len(images)} images "
          f"(beta: {betas}); saved to {out}")
    return 0


def _gather_inputs(path) -> list[Path]:
    p = Path(path)
    if p.is_dir():
        files = sorted(q for q in p.iterdir() if q.is_file())
        if not files:
            raise ValueError(f"no input images in {p}")
        return files
    if p.is_file():
        return [p]
    raise ValueError(f"input {p} does not exist")


def _cmd_sr(args) -> int:
    config, pair, anchors, model = pipeline.load_model(args.model)
    methods = pipeline.build_methods(config, pair, anchors, model,
                                     selected=[args.method])
    run = methods[args.method]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for path in _gather_inputs(args.input):
        lr = imageops.load_image(path)
        recon = run(lr)
        target = out / f"{path.stem}_{args.method}.png"
        imageops.save_image(target, recon)
        print(f"{path.name} -> {target}")
    return 0


def _cmd_eval(args) -> int:
    config, pair, anchors, model = pipeline.load_model(args.model)
    selected = [m.strip() for m in args.methods.split(",") if m.strip()]
    if not selected:
        raise ValueError("--methods must name at least one method")
    methods = pipeline.build_methods(config, pair, anchors, model, selected=selected)
    names, images = pipeline.ingest_dataset(args.test, "test", config)
    report = pipeline.evaluate(names, images, methods, config, out_dir=args.out)
    print(pipeline.report_table(report), end="")
    timing = "  ".join(f"{m}: {report.runtimes[m]:.2f}s" for m in report.methods)
    print(f"runtime  {timing}")
    if report.errors:
        print(f"{len(report.errors)} method failure(s); see log")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="boostsr",
                     description="Face image super-resolution toolkit")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen-corpus", help="write a synthetic face corpus")
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_gen_corpus)

    p = sub.add_parser("train-dict", help="train the coupled dictionaries")
    p.add_argument("--train", required=True, help="folder of HR training images")
    p.add_argument("--config", default=None)
    p.add_argument("--out", required=True, help="model output directory")
    p.set_defaults(func=_cmd_train_dict)

    p = sub.add_parser("train-boost", help="train the boosted patch weights")
    p.add_argument("--train", required=True, help="folder of held-out HR images")
    p.add_argument("--dict", required=True, help="trained dictionary model directory")
    p.add_argument("--config", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_train_boost)

    p = sub.add_parser("sr", help="super-resolve an image or folder")
    p.add_argument("--input", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--method", required=True,
                   choices=["bicubic", "sparse", "anr", "boost"])
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_sr)

    p = sub.add_parser("eval", help="benchmark methods on a test folder")
    p.add_argument("--test", required=True, help="folder of ground-truth HR images")
    p.add_argument("--model", required=True)
    p.add_argument("--methods", default="bicubic,sparse,anr,boost",
                   help="comma-separated method list")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_eval)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except (ValueError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
