"""Command-line entry point.

Exit codes: 0 success, 1 I/O failure, 2 invalid input, 3 numerical failure.
JSON output carries the resolved arguments under ``config``; CSV files get a
``<name>.config.json`` sidecar so the CSV itself stays machine-parseable.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path
from typing import List

from . import delivery, metrics, payloads, report
from .codecs import CodecError, CodecId, EncodedBlob, decode_blob, encode_image
from .raster import (SceneSpec, generate_scene, load_pnm, read_annotations, save_pnm,
                     scene_corpus, write_annotations, write_pnm)

log = logging.getLogger("edgeintel")

EXIT_OK, EXIT_IO, EXIT_INVALID, EXIT_NUMERIC = 0, 1, 2, 3
PNM_SUFFIXES = (".pnm", ".ppm", ".pgm")


class UsageError(ValueError):
    pass


def _int_list(text: str) -> List[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _config(args) -> dict:
    skip = {"func"}
    return {k: (str(v) if isinstance(v, Path) else v) for k, v in sorted(vars(args).items())
            if k not in skip}


def _jsonable(v):
    if isinstance(v, float) and math.isinf(v):
        return "inf"
    if isinstance(v, float) and math.isnan(v):
        return None
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


def _emit(args, doc: dict) -> None:
    doc = dict(doc)
    doc["config"] = _config(args)
    print(json.dumps(_jsonable(doc), indent=2))


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_csv(args, path: Path, text: str) -> None:
    path.write_text(text)
    path.with_name(path.name + ".config.json").write_text(
        json.dumps(_config(args), indent=2) + "\n")


def _link(args) -> delivery.LinkModel:
    return delivery.LinkModel(args.bandwidth_bps, args.latency_s)


# --------------------------------------------------------------------------
# commands


def cmd_metrics(args) -> int:
    a, b = load_pnm(args.image_a), load_pnm(args.image_b)
    q = metrics.quality_report(a, b, max_value=args.psnr_max)
    if args.format == "csv":
        d = q.to_dict()
        print(",".join(d))
        print(",".join(str(v) for v in d.values()))
    else:
        _emit(args, q.to_dict())
    return EXIT_OK


def cmd_codec(args) -> int:
    src = Path(args.input)
    data = src.read_bytes()
    if args.action == "encode":
        cid = CodecId.parse(args.codec)
        if cid is CodecId.AE_EMBEDDING:
            from .autoencoder.checkpoint import read_model
            from .autoencoder.codec import encode_embedding
            if not args.model:
                raise UsageError("ae_embedding encoding needs --model")
            image = load_pnm(src)
            blob = encode_embedding(read_model(args.model), image)
        else:
            from .raster import read_pnm
            image = read_pnm(data)
            blob = encode_image(image, args.codec, args.quality)
        out = blob.to_bytes()
        pixels = image.width * image.height
        bytes_in = len(data)
    else:
        blob = EncodedBlob.from_bytes(data)
        if blob.codec_id is CodecId.AE_EMBEDDING:
            from .autoencoder.checkpoint import read_model
            from .autoencoder.codec import decode_embedding
            if not args.model:
                raise UsageError("ae_embedding decoding needs --model")
            image = decode_embedding(read_model(args.model), blob)
        else:
            image = decode_blob(blob)
        out = write_pnm(image)
        pixels = image.width * image.height
        bytes_in = len(data)
    Path(args.output).write_bytes(out)
    _emit(args, {
        "action": args.action,
        "codec": blob.codec_id.label,
        "bytes_in": bytes_in,
        "bytes_out": len(out),
        "ratio_pct": metrics.compression_ratio_bytes(bytes_in, len(out)),
        "bitrate_bpp": metrics.bitrate_bpp(blob.byte_size, pixels),
    })
    return EXIT_OK


def _load_dataset(args):
    if args.dataset_dir:
        files = sorted(p for p in Path(args.dataset_dir).iterdir()
                       if p.suffix.lower() in PNM_SUFFIXES)
        if not files:
            raise UsageError(f"no PNM images in {args.dataset_dir}")
        return [load_pnm(p) for p in files]
    return scene_corpus(args.synthetic, args.input_side, seed=args.seed,
                        channels=args.channels)


def _configs(args, blocks: int):
    from .autoencoder.model import ModelConfig
    from .autoencoder.train import TrainConfig
    mc = ModelConfig(blocks=blocks, input_side=args.input_side, image_channels=args.channels,
                     base_width=args.base_width, seed=args.seed, skip_mode=args.skip_mode)
    tc = TrainConfig(epochs=args.epochs, batch_size=args.batch_size, val_split=args.val_split,
                     learning_rate=args.lr, seed=args.seed)
    return mc, tc


def cmd_ablate(args) -> int:
    from .autoencoder.train import AblationRow, ablation_csv, train
    for b in args.blocks:
        if not 0 <= b <= 5:
            raise UsageError(f"block count {b} outside 0..5")
    out = _out_dir(args)
    if args.sizes_only:
        rows = [AblationRow.sizes_only(b, args.input_side) for b in args.blocks]
    else:
        dataset = _load_dataset(args)
        rows = []
        for b in args.blocks:
            mc, tc = _configs(args, b)
            rep = train(mc, tc, dataset, args.psnr_max)
            _write_csv(args, out / f"curves_b{b}.csv", rep.curves_csv())
            if not rep.converged:
                log.warning("blocks=%d did not halve its validation loss", b)
            rows.append(AblationRow.from_report(rep))
    text = ablation_csv(rows)
    _write_csv(args, out / args.out_csv, text)
    if args.format == "csv":
        sys.stdout.write(text)
    else:
        _emit(args, {"rows": [{
            "blocks": r.blocks, "psnr_train": r.psnr_train, "ssim_train": r.ssim_train,
            "psnr_test": r.psnr_test, "ssim_test": r.ssim_test, "output_size": r.output_size,
            "compression_pct": metrics.format_pct(r.compression_pct),
            "converged": None if r.report is None else r.report.converged,
        } for r in rows]})
    return EXIT_OK


def cmd_train(args) -> int:
    from .autoencoder.checkpoint import write_model
    from .autoencoder.train import train
    out = _out_dir(args)
    mc, tc = _configs(args, args.blocks)
    rep = train(mc, tc, _load_dataset(args), args.psnr_max)
    model_path = Path(args.model_out) if args.model_out else out / f"model_b{args.blocks}.aemd"
    write_model(rep.model, model_path)
    _write_csv(args, out / f"curves_b{args.blocks}.csv", rep.curves_csv())
    doc = rep.to_dict()
    doc["model_path"] = str(model_path)
    _emit(args, doc)
    return EXIT_OK


def cmd_cutout(args) -> int:
    image = load_pnm(args.image)
    anns = read_annotations(Path(args.annotations).read_bytes())
    cuts = payloads.extract_cutouts(image, anns, args.min_confidence, args.image_id)
    out = _out_dir(args)
    entries = []
    for i, p in enumerate(cuts):
        path = out / f"cutout_{i:03d}.{p.extension}"
        path.write_bytes(p.data)
        entries.append({"path": str(path), "byte_size": p.byte_size, **p.meta})
    _emit(args, {"cutouts": entries})
    return EXIT_OK


def cmd_caption(args) -> int:
    anns = read_annotations(Path(args.annotations).read_bytes())
    if args.image_id is not None:
        anns = [a for a in anns if a.image_id == args.image_id]
    p = payloads.generate_caption(anns, args.image_id or "")
    (_out_dir(args) / "caption.txt").write_bytes(p.data)
    if args.format == "csv":
        print(p.data.decode("utf-8"))
    else:
        _emit(args, {"caption": p.data.decode("utf-8"), "byte_size": p.byte_size})
    return EXIT_OK


def _parse_sizes(text: str):
    items = []
    for tok in text.split(","):
        kind, _, size = tok.strip().partition(":")
        if not size:
            raise UsageError(f"expected kind:bytes, got {tok!r}")
        if kind not in delivery.KIND_RANK:
            raise UsageError(f"unknown payload kind {kind!r}")
        items.append(delivery.SizedItem(kind, int(size)))
    return items


def _delivery_outputs(args, items, out: Path) -> dict:
    link = _link(args)
    plan = delivery.plan_hierarchical(items)
    timeline = delivery.simulate(plan, link)
    results = delivery.compare_policies(items, link)
    _write_csv(args, out / "timeline.csv", timeline.to_csv())
    _write_csv(args, out / "policies.csv", delivery.policies_to_csv(results))
    return {
        "order": [p.kind for p in plan.payloads],
        "timeline": [vars(e) for e in timeline.entries],
        "total_duration_s": timeline.total_duration,
        "policies": [vars(r) for r in results],
    }


def cmd_simulate(args) -> int:
    if args.manifest:
        doc = payloads.parse_manifest(Path(args.manifest).read_bytes())
        items = [delivery.SizedItem(e["kind"], int(e["byte_size"])) for e in doc["payloads"]]
    elif args.sizes:
        items = _parse_sizes(args.sizes)
    else:
        raise UsageError("simulate needs --manifest or --sizes")
    out = _out_dir(args)
    summary = _delivery_outputs(args, items, out)
    if args.format == "csv":
        sys.stdout.write((out / "timeline.csv").read_text())
    else:
        _emit(args, summary)
    return EXIT_OK


def cmd_pipeline(args) -> int:
    image = load_pnm(args.image)
    image_id = args.image_id if args.image_id is not None else Path(args.image).stem
    anns = read_annotations(Path(args.annotations).read_bytes())
    anns = [a for a in anns if a.image_id == image_id] if args.image_id is not None else anns
    confident = [a for a in anns if a.confidence >= args.min_confidence]
    items = [payloads.generate_caption(confident, image_id)]
    items += payloads.extract_cutouts(image, confident, args.min_confidence)
    if args.model:
        from .autoencoder.checkpoint import read_model
        items.append(payloads.package_image(image, "ae", model=read_model(args.model),
                                            image_id=image_id))
    else:
        print("notice: no --model given, AE payload skipped", file=sys.stderr)
    items.append(payloads.package_image(image, "dct", quality=args.quality, image_id=image_id))
    items.append(payloads.package_image(image, "lossless", image_id=image_id))
    items.append(payloads.package_image(image, "raw", image_id=image_id))

    out = _out_dir(args)
    plan = delivery.plan_hierarchical(items)
    for i, p in enumerate(plan.payloads):
        (out / f"payload_{i:02d}_{p.kind}.{p.extension}").write_bytes(p.data)
    manifest = payloads.build_manifest(list(plan.payloads), image_id=image_id)
    (out / "manifest.json").write_bytes(manifest)
    summary = _delivery_outputs(args, list(plan.payloads), out)
    summary["image_id"] = image_id
    summary["caption"] = items[0].data.decode("utf-8")
    _emit(args, summary)
    return EXIT_OK


def _report_images(args):
    if args.images:
        return [load_pnm(p) for p in args.images], [Path(p).stem for p in args.images]
    imgs = scene_corpus(args.synthetic, args.side, seed=args.seed, channels=args.channels)
    return imgs, [f"scene{i:04d}" for i in range(len(imgs))]


def cmd_report(args) -> int:
    images, names = _report_images(args)
    model = None
    if args.model:
        from .autoencoder.checkpoint import read_model
        model = read_model(args.model)
    out = _out_dir(args)
    tables = {}
    for name, img in zip(names, images):
        rows = report.method_table(img, args.qualities, model
                                   if model is not None and img.width == model.config.input_side
                                   else None, args.psnr_max)
        _write_csv(args, out / f"methods_{name}.csv", report.method_table_csv(rows))
        tables[name] = [vars(r) for r in rows]
    doc = {"methods": tables}
    if model is not None:
        cmp = report.ae_vs_dct(model, images, names, args.psnr_max)
        _write_csv(args, out / "ae_vs_dct.csv", cmp.to_csv())
        doc["ae_vs_dct"] = cmp.to_dict()
    _emit(args, doc)
    return EXIT_OK


def cmd_scene(args) -> int:
    spec = SceneSpec(seed=args.seed, width=args.side, height=args.side,
                     object_count=args.objects, background_texture=args.background,
                     channels=args.channels, image_id=args.image_id)
    image, anns = generate_scene(spec)
    out = _out_dir(args)
    img_path = out / f"{args.image_id}.{'ppm' if args.channels == 3 else 'pgm'}"
    save_pnm(image, img_path)
    ann_path = out / f"{args.image_id}.jsonl"
    ann_path.write_bytes(write_annotations(anns))
    _emit(args, {"image": str(img_path), "annotations": str(ann_path), "objects": len(anns)})
    return EXIT_OK


# --------------------------------------------------------------------------
# parser


def _add_link(p):
    p.add_argument("--bandwidth-bps", type=float, default=10_000.0,
                   help="link bandwidth in bytes per second")
    p.add_argument("--latency-s", type=float, default=0.0, help="per-message latency")


def _add_training(p, blocks_type, blocks_default):
    p.add_argument("--dataset-dir", default=None, help="directory of PNM images")
    p.add_argument("--synthetic", type=int, default=200, help="synthetic scene count")
    p.add_argument("--input-side", type=int, default=64)
    p.add_argument("--channels", type=int, default=3, choices=(1, 3))
    p.add_argument("--blocks", type=blocks_type, default=blocks_default)
    p.add_argument("--base-width", type=int, default=16)
    p.add_argument("--skip-mode", default="codec_honest", choices=("paper", "codec_honest"))
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--batch-size", type=int, default=25)
    p.add_argument("--val-split", type=float, default=0.2)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--psnr-max", type=float, default=255.0)


def build_parser() -> argparse.ArgumentParser:
    # global flags are accepted before or after the subcommand; the
    # subcommand copies suppress their defaults so they never clobber
    # a value given up front
    def globals_parser(top: bool):
        g = argparse.ArgumentParser(add_help=False)
        d = (lambda v: v) if top else (lambda v: argparse.SUPPRESS)
        g.add_argument("--seed", type=int, default=d(0))
        g.add_argument("--out-dir", default=d("."))
        g.add_argument("--format", choices=("json", "csv"), default=d("json"))
        g.add_argument("-v", "--verbose", action="store_true", default=d(False))
        return g

    common = globals_parser(False)
    parser = argparse.ArgumentParser(prog="edgeintel", parents=[globals_parser(True)],
                                     description="Edge image compression and delivery experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("metrics", parents=[common], help="compare two PNM images")
    p.add_argument("image_a")
    p.add_argument("image_b")
    p.add_argument("--psnr-max", type=float, default=255.0)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("codec", parents=[common], help="encode or decode an image blob")
    p.add_argument("action", choices=("encode", "decode"))
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--codec", default="predictive")
    p.add_argument("--quality", type=int, default=75)
    p.add_argument("--model", default=None, help="checkpoint for ae_embedding blobs")
    p.set_defaults(func=cmd_codec)

    p = sub.add_parser("ablate", parents=[common], help="block-count ablation table")
    _add_training(p, _int_list, [0, 1, 2, 3, 4, 5])
    p.add_argument("--sizes-only", action="store_true",
                   help="skip training; emit output size and compression only")
    p.add_argument("--out-csv", default="ablation.csv")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("train", parents=[common], help="train one autoencoder")
    _add_training(p, int, 1)
    p.add_argument("--model-out", default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("cutout", parents=[common], help="cut detections out of an image")
    p.add_argument("image")
    p.add_argument("annotations")
    p.add_argument("--min-confidence", type=float, default=payloads.DEFAULT_MIN_CONFIDENCE)
    p.add_argument("--image-id", default=None)
    p.set_defaults(func=cmd_cutout)

    p = sub.add_parser("caption", parents=[common], help="template caption from detections")
    p.add_argument("annotations")
    p.add_argument("--image-id", default=None)
    p.set_defaults(func=cmd_caption)

    p = sub.add_parser("simulate", parents=[common], help="simulate delivery over a link")
    p.add_argument("--manifest", default=None)
    p.add_argument("--sizes", default=None, help="kind:bytes,kind:bytes,...")
    _add_link(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("pipeline", parents=[common], help="build, order and simulate payloads")
    p.add_argument("image")
    p.add_argument("annotations")
    p.add_argument("--model", default=None)
    p.add_argument("--quality", type=int, default=75)
    p.add_argument("--min-confidence", type=float, default=payloads.DEFAULT_MIN_CONFIDENCE)
    p.add_argument("--image-id", default=None)
    _add_link(p)
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("report", parents=[common], help="codec and autoencoder comparison")
    p.add_argument("images", nargs="*")
    p.add_argument("--synthetic", type=int, default=3)
    p.add_argument("--side", type=int, default=64)
    p.add_argument("--channels", type=int, default=3, choices=(1, 3))
    p.add_argument("--qualities", type=_int_list, default=[25, 50, 75, 95])
    p.add_argument("--model", default=None)
    p.add_argument("--psnr-max", type=float, default=255.0)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("scene", parents=[common], help="generate a synthetic annotated scene")
    p.add_argument("--side", type=int, default=256)
    p.add_argument("--objects", type=int, default=4)
    p.add_argument("--background", default="noise", choices=("flat", "gradient", "noise"))
    p.add_argument("--channels", type=int, default=3, choices=(1, 3))
    p.add_argument("--image-id", default="scene")
    p.set_defaults(func=cmd_scene)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    from .autoencoder.model import NumericalError
    try:
        return args.func(args)
    except (NumericalError, FloatingPointError) as e:
        print(f"error: numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, KeyError, CodecError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
