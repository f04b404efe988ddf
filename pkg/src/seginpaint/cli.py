"""Command-line entry point wiring the full pipeline.

Subcommands: synth (paired dataset generation), inpaint (any engine on one
image), train (learned engine), eval (score predictions against a manifest),
report (combine result CSVs), taxonomy (inspect/export taxonomies).

Exit codes: 0 success, 1 usage error, 2 data/validation error, 3 partial
evaluation failure. Diagnostics go to stderr; machine output only to files.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from . import engines, evalkit, pngio
from .classic import DiffusionParams
from .patchmatch import PatchParams
from .synth import SynthConfig, build_dataset
from .taxonomy import TaxonomyError, builtin_names, get_taxonomy, load_taxonomy

TAXONOMY_DIR_ENV = "SEGINPAINT_TAXONOMY_DIR"


class _UsageExit(SystemExit):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise _UsageExit(1)


def _resolve_taxonomy(name: str):
    if name in builtin_names():
        return get_taxonomy(name)
    if os.path.exists(name):
        return load_taxonomy(name)
    tax_dir = os.environ.get(TAXONOMY_DIR_ENV)
    if tax_dir:
        cand = os.path.join(tax_dir, name + ".json")
        if os.path.exists(cand):
            return load_taxonomy(cand)
    raise TaxonomyError(f"taxonomy {name!r} is neither built-in nor a readable file")


def _build_parser(config: dict) -> _Parser:
    p = _Parser(prog="seginpaint", description=__doc__,
                formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--config", help="JSON config file with per-subcommand defaults")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("synth", help="generate a paired synthetic dataset")
    sp.add_argument("--count", type=int, default=100)
    sp.add_argument("--out", required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--width", type=int, default=400)
    sp.add_argument("--height", type=int, default=300)
    sp.add_argument("--threshold", type=float, default=0.0104,
                    help="dynamic-pixel filter as a fraction of image area")
    sp.add_argument("--drift-max", type=int, default=2)
    sp.add_argument("--drift-prob", type=float, default=0.5)
    sp.add_argument("--taxonomy", default="carla9")

    ip = sub.add_parser("inpaint", help="inpaint one label map with a chosen engine")
    ip.add_argument("--method", required=True, choices=engines.METHODS)
    ip.add_argument("--in", dest="input", required=True)
    ip.add_argument("--mask", required=True)
    ip.add_argument("--taxonomy", default="carla9")
    ip.add_argument("--out", required=True)
    ip.add_argument("--ckpt", help="checkpoint for the learned engine")
    ip.add_argument("--dt", type=float, default=0.1)
    ip.add_argument("--iters", type=int, default=2000)
    ip.add_argument("--tol", type=float, default=1e-4)
    ip.add_argument("--transport-weight", type=float, default=1.0)
    ip.add_argument("--patch-size", type=int, default=7)
    ip.add_argument("--nnf-iters", type=int, default=5)
    ip.add_argument("--vote-iters", type=int, default=3)
    ip.add_argument("--seed", type=int, default=0)
    ip.add_argument("--color-render", help="also write an RGB preview PNG here")

    tp = sub.add_parser("train", help="train the learned engine on a dataset manifest")
    tp.add_argument("--manifest", required=True)
    tp.add_argument("--out", required=True, help="checkpoint output path")
    tp.add_argument("--steps", type=int, default=500)
    tp.add_argument("--seed", type=int, default=0)
    tp.add_argument("--batch", type=int, default=8)
    tp.add_argument("--lr", type=float, default=1e-3)
    tp.add_argument("--gamma", type=float, default=0.99)
    tp.add_argument("--adv-weight", type=float, default=0.01)
    tp.add_argument("--crop-w", type=int, default=256)
    tp.add_argument("--crop-h", type=int, default=128)
    tp.add_argument("--taxonomy", default="carla9")
    tp.add_argument("--resume", action="store_true")
    tp.add_argument("--loss-csv", help="per-step loss curve output (default <ckpt>.csv)")

    ep = sub.add_parser("eval", help="score a directory of predictions against a manifest")
    ep.add_argument("--manifest", required=True)
    ep.add_argument("--pred-dir", required=True)
    ep.add_argument("--method", default="method")
    ep.add_argument("--out", required=True)
    ep.add_argument("--taxonomy", default="carla9")

    rp = sub.add_parser("report", help="combine accuracy CSVs into one comparison table")
    rp.add_argument("--result", action="append", required=True,
                    help="accuracy CSV produced by eval (repeatable)")
    rp.add_argument("--out", required=True)

    xp = sub.add_parser("taxonomy", help="list or export taxonomies")
    xp.add_argument("--list", action="store_true")
    xp.add_argument("--name")
    xp.add_argument("--out", help="write the taxonomy JSON here (default stdout)")

    for name, sprs in sub.choices.items():
        if name in config:
            known = {a.dest for a in sprs._actions}
            sprs.set_defaults(**{k: v for k, v in config[name].items() if k in known})
    return p


def _cmd_synth(args) -> int:
    cfg = SynthConfig(count=args.count, width=args.width, height=args.height,
                      threshold_frac=args.threshold, drift_prob=args.drift_prob,
                      drift_max=args.drift_max, seed=args.seed, taxonomy=args.taxonomy)
    summary = build_dataset(cfg, args.out)
    print(f"generated={summary.generated} kept={summary.kept} rejected={summary.rejected}",
          file=sys.stderr)
    if summary.kept == 0:
        print("no sample passed the dynamic-pixel threshold", file=sys.stderr)
        return 2
    return 0


def _cmd_inpaint(args) -> int:
    tax = _resolve_taxonomy(args.taxonomy)
    m = pngio.read_labelmap(args.input)
    mask = pngio.read_mask(args.mask)
    generator = None
    if args.method == "learned":
        if not args.ckpt:
            print("--ckpt is required for --method learned", file=sys.stderr)
            return 1
        from .learned.train import load_generator
        generator, ckpt_tax = load_generator(args.ckpt)
        if ckpt_tax.name != tax.name:
            print(f"checkpoint taxonomy {ckpt_tax.name!r} != {tax.name!r}", file=sys.stderr)
            return 2
    out = engines.run_engine(
        args.method, m, mask, tax,
        diffusion=DiffusionParams(dt=args.dt, max_iters=args.iters, residual_tol=args.tol,
                                  transport_weight=args.transport_weight),
        patch=PatchParams(patch_size=args.patch_size, nnf_iters=args.nnf_iters,
                          vote_iters=args.vote_iters, rng_seed=args.seed),
        generator=generator)
    pngio.write_labelmap(args.out, out, tax)
    if args.color_render:
        pngio.write_color_render(args.color_render, out, tax)
    return 0


def _cmd_train(args) -> int:
    from .learned import TrainConfig, fit
    tax = _resolve_taxonomy(args.taxonomy)
    cfg = TrainConfig(steps=args.steps, batch_size=args.batch, lr=args.lr, gamma=args.gamma,
                      adv_weight=args.adv_weight, seed=args.seed,
                      crop_w=args.crop_w, crop_h=args.crop_h)
    loss_csv = args.loss_csv or (args.out + ".csv")
    _, reports = fit(args.manifest, cfg, args.out, tax, resume=args.resume, loss_csv=loss_csv)
    if reports:
        last = reports[-1]
        print(f"trained {len(reports)} steps, final ce={last.ce:.4f} "
              f"acc={last.batch_acc:.3f}", file=sys.stderr)
    return 0


def _cmd_eval(args) -> int:
    tax = _resolve_taxonomy(args.taxonomy)
    result, cm = evalkit.evaluate_dataset(args.manifest, args.pred_dir, tax, args.method)
    os.makedirs(args.out, exist_ok=True)
    evalkit.render_report([result], {args.method: cm}, args.out)
    print(f"method={result.method} mean={result.mean:.4f} pooled={result.pooled_accuracy:.4f} "
          f"n={result.n} excluded_empty={result.excluded_empty}", file=sys.stderr)
    for err in result.errors:
        print(f"sample error: {err}", file=sys.stderr)
    if result.errors:
        return 3
    if result.n == 0:
        print("no sample was scored", file=sys.stderr)
        return 2
    return 0


def _cmd_report(args) -> int:
    rows = []
    header = None
    for path in args.result:
        with open(path, newline="") as f:
            r = csv.reader(f)
            h = next(r)
            if header is None:
                header = h
            elif h != header:
                print(f"{path}: column mismatch with first result file", file=sys.stderr)
                return 2
            rows.extend(list(r))
    os.makedirs(args.out, exist_ok=True)
    out_path = os.path.join(args.out, "comparison.csv")
    with open(out_path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(header)
        w.writerows(rows)
    print(f"wrote {out_path} ({len(rows)} methods)", file=sys.stderr)
    return 0


def _cmd_taxonomy(args) -> int:
    if args.list or not args.name:
        for name in builtin_names():
            tax = get_taxonomy(name)
            print(f"{name}: |C|={tax.num_classes} static={len(tax.static_ids)} "
                  f"dynamic={len(tax.dynamic_ids)}", file=sys.stderr)
        return 0
    tax = _resolve_taxonomy(args.name)
    text = tax.to_json()
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            f.write(text + "\n")
    else:
        print(text)
    return 0


_COMMANDS = {
    "synth": _cmd_synth,
    "inpaint": _cmd_inpaint,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "report": _cmd_report,
    "taxonomy": _cmd_taxonomy,
}


def run(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    config = {}
    if "--config" in argv:
        try:
            cfg_path = argv[argv.index("--config") + 1]
        except IndexError:
            print("--config requires a path", file=sys.stderr)
            return 1
        try:
            with open(cfg_path, "r", encoding="utf-8") as f:
                config = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            print(f"cannot read config file: {e}", file=sys.stderr)
            return 2
    parser = _build_parser(config)
    try:
        args = parser.parse_args(argv)
    except _UsageExit:
        return 1
    try:
        return _COMMANDS[args.command](args)
    except (TaxonomyError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
