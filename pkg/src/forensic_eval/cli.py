"""Command-line entry point wiring all modules into reproducible runs.

Configuration precedence is command line > --config JSON file > built-in
defaults; every report embeds the merged config that produced it, the
artifact version, and digests of the primary inputs. Exit codes: 0 ok,
1 usage error, 2 data error, 3 internal error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import traceback
from pathlib import Path

from . import __version__
from .cleanse import DEFAULT_RESIZE, DEFAULT_THRESHOLD, cleanse_dataset, heatmap_csv_rows
from .corpus import (
    DecodeError,
    ManifestError,
    build_manifest_from_dir,
    load_manifest,
    missing_files,
    rebase_manifest,
    save_manifest,
)
from .metrics_image import ScoresError, evaluate_image, load_scores
from .metrics_pixel import (
    METRIC_FIELDS,
    MissingPredictionsError,
    evaluate_pixel,
)
from .robustness import DEFAULT_LEVELS, PERTURB_KINDS, PerturbSpec, perturb_manifest
from .synth import TAMPER_KINDS, TamperSpec, build_test_corpus
from .util import BatchItemError, ensure_dir, sha256_file

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3

CORE_PIXEL_FIELDS = ("f1", "auc", "accuracy", "iou")
VARIANT_FIELDS = ("invert_f1", "permute_f1", "macro_f1", "micro_f1", "weighted_f1")

_REQUIRED = object()


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# option plumbing
# ---------------------------------------------------------------------------


def _merge_options(args, defaults: dict) -> dict:
    """defaults < config file < explicitly-given command-line values."""
    merged = {k: (None if v is _REQUIRED else v) for k, v in defaults.items()}
    config_path = getattr(args, "config", None)
    if config_path:
        try:
            config = json.loads(Path(config_path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config file {config_path}: {exc}") from exc
        if not isinstance(config, dict):
            raise UsageError("config file must hold a JSON object")
        for key, value in config.items():
            if key not in defaults:
                raise UsageError(f"unknown config key {key!r}")
            merged[key] = value
    for key in defaults:
        value = getattr(args, key, None)
        if value is not None and value != []:
            merged[key] = value
    for key, default in defaults.items():
        if default is _REQUIRED and merged[key] in (None, []):
            raise UsageError(f"missing required option --{key.replace('_', '-')}")
    return merged


def _parse_levels(text, kind: str):
    if text is None:
        return list(DEFAULT_LEVELS[kind])
    if isinstance(text, (list, tuple)):
        values = list(text)
    else:
        values = [token for token in str(text).split(",") if token.strip()]
    out = []
    for token in values:
        value = float(token)
        out.append(int(value) if value.is_integer() else value)
    if not out:
        raise UsageError("levels list is empty")
    return out


def _parse_size(text) -> tuple[int, int]:
    try:
        width, height = (int(t) for t in str(text).lower().split("x"))
    except ValueError as exc:
        raise UsageError(f"size must look like 512x512, got {text!r}") from exc
    if width <= 0 or height <= 0:
        raise UsageError("size dimensions must be positive")
    return width, height


def _parse_range(text) -> tuple[float, float]:
    try:
        lo, hi = (float(t) for t in str(text).split(","))
    except ValueError as exc:
        raise UsageError(f"range must look like 0.01,0.15, got {text!r}") from exc
    return lo, hi


def _parse_variants(text) -> tuple[str, ...]:
    if text in (None, "all"):
        return VARIANT_FIELDS
    if text in ("", "none"):
        return ()
    chosen = []
    for token in str(text).split(","):
        token = token.strip()
        name = token if token.endswith("_f1") else f"{token}_f1"
        if name not in VARIANT_FIELDS:
            raise UsageError(f"unknown F1 variant {token!r}")
        chosen.append(name)
    return tuple(chosen)


def _envelope(config: dict, inputs: dict) -> dict:
    return {
        "artifact": {"name": "forensic-eval", "version": __version__},
        "config": config,
        "inputs": inputs,
    }


def _write_json(path, doc) -> None:
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def _write_csv(path, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        csv.writer(fh).writerows(rows)


def _fmt(value) -> str:
    return "n/a" if value is None else f"{value:.4f}"


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

MANIFEST_BUILD_DEFAULTS = {"dir": _REQUIRED, "out": _REQUIRED, "dataset": None}


def cmd_manifest_build(args) -> int:
    opts = _merge_options(args, MANIFEST_BUILD_DEFAULTS)
    manifest = build_manifest_from_dir(opts["dir"], dataset=opts["dataset"])
    out = Path(opts["out"])
    save_manifest(rebase_manifest(manifest, out.parent), out)
    print(f"wrote manifest with {len(manifest)} sample(s) to {out}")
    return EXIT_OK


MANIFEST_VALIDATE_DEFAULTS = {"manifest": _REQUIRED}


def cmd_manifest_validate(args) -> int:
    opts = _merge_options(args, MANIFEST_VALIDATE_DEFAULTS)
    manifest = load_manifest(opts["manifest"])
    problems = missing_files(manifest)
    if problems:
        for problem in problems:
            print(problem, file=sys.stderr)
        return EXIT_DATA
    print(f"manifest ok: {len(manifest)} sample(s), {len(manifest.manipulated())} manipulated")
    return EXIT_OK


EVAL_PIXEL_DEFAULTS = {
    "manifest": _REQUIRED,
    "pred_dir": _REQUIRED,
    "out_dir": _REQUIRED,
    "threshold": 0.5,
    "aggregate": "mean",
    "workers": None,
    "invert_gt": False,
    "invert_pred": False,
    "variants": "all",
}


def cmd_eval_pixel(args) -> int:
    opts = _merge_options(args, EVAL_PIXEL_DEFAULTS)
    variants = _parse_variants(opts["variants"])
    manifest = load_manifest(opts["manifest"])
    report = evaluate_pixel(
        manifest,
        opts["pred_dir"],
        threshold=float(opts["threshold"]),
        aggregate=opts["aggregate"],
        workers=opts["workers"],
        invert_gt=bool(opts["invert_gt"]),
        invert_pred=bool(opts["invert_pred"]),
    )
    fields = [f for f in METRIC_FIELDS if f in CORE_PIXEL_FIELDS or f in variants]
    doc = _envelope(
        opts,
        {
            "manifest": str(opts["manifest"]),
            "manifest_sha256": sha256_file(opts["manifest"]),
            "pred_dir": str(opts["pred_dir"]),
        },
    )
    body = report.to_dict()
    body["per_sample"] = [
        {key: value for key, value in row.items() if key == "id" or key in fields or key in ("tp", "tn", "fp", "fn")}
        for row in body["per_sample"]
    ]
    body["aggregate"] = {
        key: value
        for key, value in body["aggregate"].items()
        if key in fields or key in ("n_samples", "n_auc_samples", "pooled_counts")
    }
    doc.update(body)
    out_dir = ensure_dir(opts["out_dir"])
    _write_json(out_dir / "report.json", doc)
    header = ["id", *fields, "tp", "tn", "fp", "fn"]
    rows = [header]
    for row in body["per_sample"]:
        rows.append([("" if row.get(k) is None else row.get(k)) for k in header])
    _write_csv(out_dir / "report.csv", rows)
    print(f"pixel metrics over {body['aggregate']['n_samples']} manipulated sample(s):")
    for name in fields:
        print(f"  {name:>12} {_fmt(body['aggregate'].get(name))}")
    if report.skipped_auc:
        print(f"  auc skipped for {len(report.skipped_auc)} single-class sample(s)")
    return EXIT_OK


EVAL_IMAGE_DEFAULTS = {
    "manifest": _REQUIRED,
    "scores": _REQUIRED,
    "out_dir": _REQUIRED,
    "threshold": 0.5,
}


def cmd_eval_image(args) -> int:
    opts = _merge_options(args, EVAL_IMAGE_DEFAULTS)
    manifest = load_manifest(opts["manifest"])
    records = load_scores(opts["scores"], manifest)
    result = evaluate_image(records, threshold=float(opts["threshold"]))
    doc = _envelope(
        opts,
        {
            "manifest": str(opts["manifest"]),
            "manifest_sha256": sha256_file(opts["manifest"]),
            "scores": str(opts["scores"]),
            "scores_sha256": sha256_file(opts["scores"]),
        },
    )
    doc["dataset"] = manifest.dataset
    doc["metrics"] = result
    out_dir = ensure_dir(opts["out_dir"])
    _write_json(out_dir / "report.json", doc)
    _write_csv(
        out_dir / "report.csv",
        [["f1", "auc", "accuracy"], [result["f1"], "" if result["auc"] is None else result["auc"], result["accuracy"]]],
    )
    print(f"image metrics over {result['n_samples']} sample(s):")
    for name in ("f1", "auc", "accuracy"):
        print(f"  {name:>12} {_fmt(result[name])}")
    return EXIT_OK


PERTURB_DEFAULTS = {
    "manifest": _REQUIRED,
    "kind": _REQUIRED,
    "levels": None,
    "seed": _REQUIRED,
    "out_dir": _REQUIRED,
    "workers": None,
}


def cmd_perturb(args) -> int:
    opts = _merge_options(args, PERTURB_DEFAULTS)
    if opts["kind"] not in PERTURB_KINDS:
        raise UsageError(f"kind must be one of {', '.join(PERTURB_KINDS)}")
    levels = _parse_levels(opts["levels"], opts["kind"])
    spec = PerturbSpec(kind=opts["kind"], levels=tuple(levels), seed=int(opts["seed"]))
    manifest = load_manifest(opts["manifest"])
    out_dir = ensure_dir(opts["out_dir"])
    level_dirs = perturb_manifest(manifest, spec, out_dir, workers=opts["workers"])
    doc = _envelope(
        {**opts, "levels": levels},
        {"manifest": str(opts["manifest"]), "manifest_sha256": sha256_file(opts["manifest"])},
    )
    doc["level_dirs"] = {str(level): str(path) for level, path in level_dirs.items()}
    _write_json(out_dir / "perturb.json", doc)
    print(f"wrote {len(manifest)} image(s) x {len(levels)} level(s) under {out_dir / spec.kind}")
    return EXIT_OK


CLEANSE_DEFAULTS = {
    "manifest": _REQUIRED,
    "out_dir": _REQUIRED,
    "threshold": DEFAULT_THRESHOLD,
    "resize": f"{DEFAULT_RESIZE[0]}x{DEFAULT_RESIZE[1]}",
    "workers": None,
}


def cmd_cleanse(args) -> int:
    opts = _merge_options(args, CLEANSE_DEFAULTS)
    manifest = load_manifest(opts["manifest"])
    result = cleanse_dataset(
        manifest,
        threshold=float(opts["threshold"]),
        resize_to=_parse_size(opts["resize"]),
        workers=opts["workers"],
    )
    out_dir = ensure_dir(opts["out_dir"])
    save_manifest(result.manifest, out_dir / "manifest.json")
    doc = _envelope(
        opts,
        {"manifest": str(opts["manifest"]), "manifest_sha256": sha256_file(opts["manifest"])},
    )
    doc["groups"] = result.report
    _write_json(out_dir / "groups.json", doc)
    _write_csv(out_dir / "heatmap.csv", heatmap_csv_rows(result.matrix))
    kept = result.report["n_kept"]
    total = result.report["n_manipulated"]
    print(f"kept {kept} of {total} manipulated sample(s) at threshold {opts['threshold']}")
    return EXIT_OK


SYNTH_DEFAULTS = {
    "count": _REQUIRED,
    "out_dir": _REQUIRED,
    "size": "256x256",
    "kind": "copy_move",
    "seed": _REQUIRED,
    "area_range": "0.01,0.15",
}


def cmd_synth(args) -> int:
    opts = _merge_options(args, SYNTH_DEFAULTS)
    if opts["kind"] not in TAMPER_KINDS:
        raise UsageError(f"kind must be one of {', '.join(TAMPER_KINDS)}")
    spec = TamperSpec(
        kind=opts["kind"],
        area_fraction_range=_parse_range(opts["area_range"]),
        seed=int(opts["seed"]),
    )
    out_dir = ensure_dir(opts["out_dir"])
    manifest = build_test_corpus(int(opts["count"]), _parse_size(opts["size"]), spec, out_dir)
    doc = _envelope(opts, {})
    doc["manifest"] = str(out_dir / "manifest.json")
    _write_json(out_dir / "synth.json", doc)
    print(f"wrote {len(manifest)} tampered sample(s) and 3 prediction sets under {out_dir}")
    return EXIT_OK


REPORT_DEFAULTS = {
    "kind": _REQUIRED,
    "levels": _REQUIRED,
    "metric": "f1",
    "out_dir": _REQUIRED,
    "reports": _REQUIRED,
}


def cmd_report(args) -> int:
    opts = _merge_options(args, REPORT_DEFAULTS)
    if opts["kind"] in DEFAULT_LEVELS:
        levels = _parse_levels(opts["levels"], opts["kind"])
    else:
        levels = _parse_levels(str(opts["levels"]), "gaussian_blur")  # kind is a free label here
    reports = list(opts["reports"])
    if len(levels) != len(reports):
        raise ValueError(f"{len(levels)} level(s) but {len(reports)} report file(s)")
    metrics = [m.strip() for m in str(opts["metric"]).split(",")]
    rows = [["kind", "level", "metric", "value"]]
    curve = []
    for level, report_path in zip(levels, reports):
        try:
            doc = json.loads(Path(report_path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ValueError(f"cannot read report {report_path}: {exc}") from exc
        aggregate = doc.get("aggregate")
        if not isinstance(aggregate, dict):
            raise ValueError(f"report {report_path} has no aggregate section")
        for metric in metrics:
            if metric not in aggregate:
                raise ValueError(f"report {report_path} has no metric {metric!r}")
            rows.append([opts["kind"], level, metric, aggregate[metric]])
            curve.append(
                {"kind": opts["kind"], "level": level, "metric": metric, "value": aggregate[metric]}
            )
    out_dir = ensure_dir(opts["out_dir"])
    doc = _envelope({**opts, "levels": levels, "reports": [str(r) for r in reports]}, {})
    doc["curve"] = curve
    _write_json(out_dir / "curve.json", doc)
    _write_csv(out_dir / "curve.csv", rows)
    for row in rows[1:]:
        print(f"  {row[0]} level={row[1]} {row[2]}={_fmt(row[3])}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _add_config(parser) -> None:
    parser.add_argument("--config", help="JSON file with option defaults")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="forensic-eval",
        description="Deterministic evaluation and dataset hygiene for manipulation localization",
    )
    parser.add_argument("--version", action="version", version=f"forensic-eval {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    manifest = sub.add_parser("manifest", help="build or validate dataset manifests")
    manifest_sub = manifest.add_subparsers(dest="subcommand", required=True)
    build = manifest_sub.add_parser("build")
    build.add_argument("--dir", help="dataset directory with images/ and optional masks/")
    build.add_argument("--out", help="output manifest path")
    build.add_argument("--dataset", help="dataset name (default: directory name)")
    _add_config(build)
    build.set_defaults(func=cmd_manifest_build)
    validate = manifest_sub.add_parser("validate")
    validate.add_argument("manifest", nargs="?", help="manifest path")
    _add_config(validate)
    validate.set_defaults(func=cmd_manifest_validate)

    evaluate = sub.add_parser("eval", help="evaluate predictions")
    eval_sub = evaluate.add_subparsers(dest="subcommand", required=True)
    pixel = eval_sub.add_parser("pixel")
    pixel.add_argument("--manifest")
    pixel.add_argument("--pred-dir", dest="pred_dir")
    pixel.add_argument("--out-dir", dest="out_dir")
    pixel.add_argument("--threshold", type=float)
    pixel.add_argument("--aggregate", choices=("mean", "global"))
    pixel.add_argument("--workers", type=int)
    pixel.add_argument("--invert-gt", dest="invert_gt", action="store_const", const=True)
    pixel.add_argument("--invert-pred", dest="invert_pred", action="store_const", const=True)
    pixel.add_argument("--variants", help="comma list of F1 variants, 'all', or 'none'")
    _add_config(pixel)
    pixel.set_defaults(func=cmd_eval_pixel)
    image = eval_sub.add_parser("image")
    image.add_argument("--manifest")
    image.add_argument("--scores", help="CSV of id,score")
    image.add_argument("--out-dir", dest="out_dir")
    image.add_argument("--threshold", type=float)
    _add_config(image)
    image.set_defaults(func=cmd_eval_image)

    perturb = sub.add_parser("perturb", help="write perturbed image corpora")
    perturb.add_argument("--manifest")
    perturb.add_argument("--kind", choices=PERTURB_KINDS)
    perturb.add_argument("--levels", help="comma list; defaults per kind")
    perturb.add_argument("--seed", type=int)
    perturb.add_argument("--out-dir", dest="out_dir")
    perturb.add_argument("--workers", type=int)
    _add_config(perturb)
    perturb.set_defaults(func=cmd_perturb)

    cleanse = sub.add_parser("cleanse", help="deduplicate near-identical samples by SSIM")
    cleanse.add_argument("--manifest")
    cleanse.add_argument("--threshold", type=float)
    cleanse.add_argument("--resize", help="comparison resolution, e.g. 256x256")
    cleanse.add_argument("--out-dir", dest="out_dir")
    cleanse.add_argument("--workers", type=int)
    _add_config(cleanse)
    cleanse.set_defaults(func=cmd_cleanse)

    synth = sub.add_parser("synth", help="generate a naive tampered test corpus")
    synth.add_argument("--count", type=int)
    synth.add_argument("--size", help="image size, e.g. 256x256")
    synth.add_argument("--kind", choices=TAMPER_KINDS)
    synth.add_argument("--seed", type=int)
    synth.add_argument("--area-range", dest="area_range", help="tamper area fractions lo,hi")
    synth.add_argument("--out-dir", dest="out_dir")
    _add_config(synth)
    synth.set_defaults(func=cmd_synth)

    report = sub.add_parser("report", help="merge per-level eval reports into a curve")
    report.add_argument("reports", nargs="*", help="per-level report.json paths in level order")
    report.add_argument("--kind")
    report.add_argument("--levels", help="comma list matching the report order")
    report.add_argument("--metric", help="aggregate metric(s) to extract (default f1)")
    report.add_argument("--out-dir", dest="out_dir")
    _add_config(report)
    report.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except MissingPredictionsError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        for sample_id in exc.ids:
            print(f"  missing prediction: {sample_id}", file=sys.stderr)
        return EXIT_DATA
    except BatchItemError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ManifestError, DecodeError, ScoresError, FileNotFoundError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # pragma: no cover - defensive
        traceback.print_exc()
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
