"""Command-line entry point: ``kissdetect <command> [options]``.

JSON goes to stdout, diagnostics to stderr.  Exit codes: 0 success,
1 invalid input or arguments, 2 unreadable or malformed files.
"""
import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import audio, dataio, fusion, image
from .exceptions import FormatError, ValidationError
from .metrics import confusion_counts, metrics_dict
from .rng import SplitMix64
from .segmentor import find_segments
from .validation import check_fraction

EXIT_OK, EXIT_INVALID, EXIT_IO = 0, 1, 2

FORMATS_EPILOG = """\
file formats:
  labels      text, one '0' or '1' per line, line k = second k-1
  segments    JSON array of {"start_s", "end_s", "density"} (inclusive seconds)
  EMB1        magic, u8 role (0 image, 1 audio, 2 fused), u32 count, u32 dim, f32 rows
  KDH1        magic, u32 2, u32 640, f32 W row-major, f32 b, optional Adam checkpoint
  LMP1        magic, u32 rows (96), u32 cols (64), f32 row-major
  IMG1        magic, u32 height, u32 width, u32 channels (3), f32 HWC in [0, 1]
  manifest    JSON Lines with video_id, start_s, end_s, label
"""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _fraction(text):
    try:
        return check_fraction(float(text), "min-density")
    except (ValueError, ValidationError) as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _nonneg_int(text):
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError("must be a nonnegative integer")
    return value


def _emit(args, payload):
    if not args.quiet:
        print(json.dumps(payload))


def _load_fused(path):
    emb = dataio.read_embeddings(path)
    if emb.role != "fused":
        raise ValidationError(f"{path}: expected fused (640-d) embeddings, got {emb.role}")
    return emb.data.astype(np.float64)


def _load_pair(emb_path, label_path):
    X = _load_fused(emb_path)
    y = dataio.read_label_stream(label_path)
    if X.shape[0] != y.size:
        raise ValidationError(f"{emb_path} has {X.shape[0]} rows but {label_path} has {y.size} labels")
    return X, y


def _segment_summary(segments):
    return {"segments": len(segments), "covered_s": sum(s.length for s in segments)}


def cmd_segment(args):
    labels = dataio.read_label_stream(args.labels)
    segments = find_segments(labels, args.min_len, args.min_density)
    if args.out:
        dataio.write_segments(segments, args.out)
        _emit(args, _segment_summary(segments))
    elif not args.quiet:
        print(dataio.segments_to_json(segments))
    return EXIT_OK


def cmd_melpatch(args):
    samples, rate = audio.read_wav(args.wav)
    patch = audio.log_mel_patch(samples, rate)
    audio.write_patch(patch, args.out)
    bands = np.bincount(patch.argmax(axis=1), minlength=patch.shape[1])
    _emit(args, {
        "rows": patch.shape[0], "cols": patch.shape[1],
        "min": float(patch.min()), "max": float(patch.max()),
        "argmax_band": int(bands.argmax()),
    })
    return EXIT_OK


def cmd_train(args):
    X, y = _load_pair(args.train_embeddings, args.train_labels)
    X_val = y_val = None
    if args.val_embeddings or args.val_labels:
        if not (args.val_embeddings and args.val_labels):
            raise ValidationError("--val-embeddings and --val-labels go together")
        X_val, y_val = _load_pair(args.val_embeddings, args.val_labels)
    params, history, state = fusion.train_head(
        X, y, X_val, y_val, epochs=args.epochs, batch_size=args.batch_size,
        seed=args.seed, lr=args.lr,
    )
    fusion.save_model(params, args.out, state)
    for row in history:
        _emit(args, row)
    return EXIT_OK


def cmd_eval(args):
    params, _ = fusion.load_model(args.model)
    X, y = _load_pair(args.embeddings, args.labels)
    pred = fusion.predict_stream(X, params)
    _emit(args, metrics_dict(confusion_counts(pred, y)))
    return EXIT_OK


def cmd_predict(args):
    params, _ = fusion.load_model(args.model)
    pred = fusion.predict_stream(_load_fused(args.embeddings), params)
    if args.out:
        dataio.write_label_stream(pred, args.out)
    elif not args.quiet:
        sys.stdout.write("".join(f"{v}\n" for v in pred.tolist()))
    return EXIT_OK


def cmd_detect(args):
    params, _ = fusion.load_model(args.model)
    pred = fusion.predict_stream(_load_fused(args.embeddings), params)
    segments = find_segments(pred, args.min_len, args.min_density)
    if args.out:
        dataio.write_segments(segments, args.out)
    if not args.quiet:
        print(dataio.segments_to_json(segments))
    return EXIT_OK


def cmd_split(args):
    entries = dataio.load_manifest(args.manifest)
    parts = dataio.split_dataset(entries, dataio.SplitSpec(seed=args.seed))
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, part in zip(("train", "val", "test"), parts):
        dataio.save_manifest(part, out / f"{name}.jsonl")
    _emit(args, {name: len(p) for name, p in zip(("train", "val", "test"), parts)})
    return EXIT_OK


def cmd_transform_image(args):
    img = image.read_image(args.image)
    stats = image.ChannelStats(tuple(args.mean), tuple(args.std))
    rng = SplitMix64(args.seed)
    if args.mode == "train":
        out = image.train_transform(img, stats, rng)
    else:
        out = image.eval_transform(img, stats, literal=args.mode == "eval-literal", rng=rng)
    image.write_image(out, args.out)
    _emit(args, {"shape": list(out.shape), "mean": float(out.mean())})
    return EXIT_OK


def build_parser():
    parser = _Parser(
        prog="kissdetect", description="Detect contiguous positive scenes in long videos.",
        epilog=FORMATS_EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--quiet", action="store_true", help="suppress JSON on stdout")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def seg_opts(p):
        p.add_argument("--min-len", type=_nonneg_int, default=10,
                       help="minimum gap in seconds between first and last positive (default 10)")
        p.add_argument("--min-density", type=_fraction, default=0.7,
                       help="minimum positive fraction in [0, 1] (default 0.7)")

    p = sub.add_parser("segment", help="label stream -> segment JSON")
    p.add_argument("--labels", required=True)
    p.add_argument("--out")
    seg_opts(p)
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("melpatch", help="WAV -> LMP1 log-mel patch of the trailing window")
    p.add_argument("--wav", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_melpatch)

    p = sub.add_parser("train", help="train the fusion head on EMB1 fused embeddings")
    p.add_argument("--train-embeddings", required=True)
    p.add_argument("--train-labels", required=True)
    p.add_argument("--val-embeddings")
    p.add_argument("--val-labels")
    p.add_argument("--epochs", type=_nonneg_int, default=10)
    p.add_argument("--lr", type=float, default=0.001)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="KDH1 model path")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="precision/recall/F1 of a model on labelled embeddings")
    p.add_argument("--model", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--labels", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("predict", help="per-second label stream from a model")
    p.add_argument("--model", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("detect", help="predict per-second labels, then segment them")
    p.add_argument("--model", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--out")
    seg_opts(p)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("split", help="80/10/10 seeded split of a JSONL manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("transform-image", help="crop/flip/standardise one frame to 3x224x224")
    p.add_argument("--image", required=True, help="IMG1 or PNG file")
    p.add_argument("--mode", choices=("train", "eval", "eval-literal"), default="eval")
    p.add_argument("--mean", type=float, nargs=3, default=(0.5, 0.5, 0.5))
    p.add_argument("--std", type=float, nargs=3, default=(0.25, 0.25, 0.25))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="IMG1 output path")
    p.set_defaults(func=cmd_transform_image)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"kissdetect: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (FormatError, OSError) as exc:
        print(f"kissdetect: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
