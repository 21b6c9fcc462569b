"""Command-line batch pipeline.

Subcommands: synth, magnify, ssim, features, pulse, train, eval, sweep.
Exit codes: 0 success, 1 at least one clip failed, 2 configuration error.
Log level comes from ``EVMFORGE_LOG`` (default WARNING).
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from evmforge import __version__, detect, evm, frameio, pulse, ssim, synth
from evmforge.errors import EvmError, MalformedManifest, NoPeak
from evmforge.frameio import Roi
from evmforge.report import dumps, fmt, write_text
from evmforge.tfilter import BandSpec

log = logging.getLogger("evmforge")

EXIT_OK, EXIT_CLIP_FAILED, EXIT_CONFIG = 0, 1, 2
MANIFEST_LABELS = ("REAL", "FAKE", "UNKNOWN")
MAGNIFY_BAND = (0.8, 1.0)


class ConfigError(Exception):
    pass


# ---------------------------------------------------------------- manifest

@dataclass(frozen=True)
class ManifestEntry:
    clip_id: str
    path: str
    label: str = "UNKNOWN"
    roi: Roi | None = None
    split: str = "TRAIN"
    fps: float | None = None
    pair: str | None = None
    base_dir: Path = field(default=Path("."), compare=False)

    def resolve(self) -> Path:
        p = Path(self.path)
        return p if p.is_absolute() else self.base_dir / p


def load_manifest(path) -> list[ManifestEntry]:
    """Parse a manifest: a JSON list of entries or ``{"clips": [...]}``.

    Relative clip paths resolve against the manifest's directory.
    """
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise MalformedManifest(f"cannot read manifest {path}: {exc}") from exc
    items = doc.get("clips") if isinstance(doc, dict) else doc
    if not isinstance(items, list):
        raise MalformedManifest("manifest must be a list or an object with a 'clips' list")
    entries, seen = [], set()
    for i, item in enumerate(items):
        if not isinstance(item, dict) or "clip_id" not in item or "path" not in item:
            raise MalformedManifest(f"entry {i} lacks clip_id/path")
        cid = str(item["clip_id"])
        if cid in seen:
            raise MalformedManifest(f"duplicate clip_id {cid!r}")
        seen.add(cid)
        label = str(item.get("label", "UNKNOWN")).upper()
        split = str(item.get("split", "TRAIN")).upper()
        if label not in MANIFEST_LABELS:
            raise MalformedManifest(f"{cid}: bad label {label!r}")
        if split not in detect.SPLITS:
            raise MalformedManifest(f"{cid}: bad split {split!r}")
        try:
            roi = Roi.parse(item["roi"]) if item.get("roi") is not None else None
        except (EvmError, KeyError, TypeError, ValueError) as exc:
            raise MalformedManifest(f"{cid}: bad roi {item.get('roi')!r}") from exc
        entries.append(ManifestEntry(
            clip_id=cid, path=str(item["path"]), label=label, roi=roi, split=split,
            fps=item.get("fps"), pair=item.get("pair"), base_dir=path.parent,
        ))
    return entries


# ---------------------------------------------------------------- config

@dataclass(frozen=True)
class RunConfig:
    mag: evm.MagParams
    ssim: ssim.SsimParams
    pulse_band: BandSpec
    channel: str | None
    out: Path
    seed: int = 0
    jobs: int = 1
    fps: float | None = None
    frame_format: str = "png"
    bit_depth: int = 8

    def provenance(self):
        return {
            "evmforge_version": __version__,
            "magnification": self.mag.to_dict(),
            "ssim": {"window": self.ssim.window, "stride": self.ssim.stride,
                     "c1": self.ssim.c1, "c2": self.ssim.c2},
            "pulse_band": [self.pulse_band.f_lo, self.pulse_band.f_hi],
            "channel": self.channel,
            "seed": self.seed,
        }


def _band(lo, hi) -> BandSpec:
    try:
        return BandSpec(lo, hi)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def build_config(args, alpha=None, band=None) -> RunConfig:
    try:
        mag = evm.MagParams(
            mode=args.mode,
            alpha=args.alpha[0] if alpha is None else alpha,
            band=band or _band(args.f_lo, args.f_hi),
            depth=args.depth,
            chroma_atten=args.chroma_atten,
            lambda_cutoff=args.lambda_cutoff,
            filter=args.filter,
        )
        sp = ssim.SsimParams(window=args.window, stride=args.stride)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return RunConfig(
        mag=mag,
        ssim=sp,
        pulse_band=band or _band(args.f_lo, args.f_hi),
        channel=args.channel,
        out=Path(args.out),
        seed=args.seed,
        jobs=max(1, args.jobs),
        fps=args.fps,
        frame_format=args.format,
        bit_depth=args.bit_depth,
    )


# ---------------------------------------------------------------- clip runner

@dataclass
class ClipResult:
    clip_id: str
    ok: bool
    value: object = None
    error: str = ""


def _load_clip(entry: ManifestEntry, cfg: RunConfig):
    seq = frameio.load_frames(entry.resolve(), fps=entry.fps or cfg.fps)
    if seq.colorspace == "GRAY":
        seq = seq.replace(frames=seq.frames.repeat(3, axis=-1), colorspace="RGB")
    if entry.roi is not None:
        seq = frameio.crop(seq, entry.roi)
    return seq


def run_clips(entries, fn, jobs=1) -> list[ClipResult]:
    """Apply ``fn(entry)`` per clip, isolating failures; keeps manifest order."""
    def one(entry):
        try:
            return ClipResult(entry.clip_id, True, fn(entry))
        except (EvmError, OSError, ValueError) as exc:
            log.error("%s: %s: %s", entry.clip_id, type(exc).__name__, exc)
            return ClipResult(entry.clip_id, False, error=f"{type(exc).__name__}: {exc}")

    if jobs <= 1:
        return [one(e) for e in entries]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(one, entries))


def _finish(results, cfg: RunConfig, command):
    failed = [r for r in results if not r.ok]
    report = {
        "command": command,
        "clips": [{"clip_id": r.clip_id, "status": "ok" if r.ok else "failed",
                   "error": r.error} for r in results],
        "n_failed": len(failed),
    }
    write_text(cfg.out / f"{command}_report.json", dumps(report))
    if failed:
        print(f"{len(failed)} of {len(results)} clips failed:", file=sys.stderr)
        width = max(len(r.clip_id) for r in failed)
        for r in failed:
            print(f"  {r.clip_id:<{width}}  {r.error}", file=sys.stderr)
        return EXIT_CLIP_FAILED
    return EXIT_OK


def _write_clip(seq, directory: Path, cfg: RunConfig, provenance):
    if cfg.frame_format == "y4m":
        frameio.write_frames(seq, directory / "clip.y4m", "y4m", cfg.bit_depth)
    else:
        frameio.write_frames(seq, directory, "png", cfg.bit_depth)
    write_text(directory / "provenance.json", dumps(provenance))


def _entry_provenance(entry, cfg, **extra):
    return {"clip_id": entry.clip_id, "source_path": entry.path, "label": entry.label,
            "roi": None if entry.roi is None else [entry.roi.x, entry.roi.y, entry.roi.w, entry.roi.h],
            **cfg.provenance(), **extra}


# ---------------------------------------------------------------- commands

def cmd_synth(args):
    params = {"frames": args.frames, "width": args.width, "height": args.height,
              "fps": args.fps or frameio.DEFAULT_FPS, "seed": args.seed}
    if args.kind in ("sine_brightness", "sine_translation"):
        params["freq"] = args.freq
        if args.amplitude is not None:
            params["amplitude"] = args.amplitude
    if args.kind == "glitch":
        params["glitch_frames"] = args.glitch_frames
    try:
        seq = synth.make(args.kind, **params)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    out = Path(args.out)
    if args.format == "y4m":
        frameio.write_frames(seq, out, "y4m", args.bit_depth)
    else:
        frameio.write_frames(seq, out, "png", args.bit_depth)
    return EXIT_OK


def _magnify_into(entries, cfg, root: Path):
    def work(entry):
        seq = _load_clip(entry, cfg)
        out = evm.magnify(seq, cfg.mag)
        _write_clip(out, root / entry.clip_id, cfg, _entry_provenance(entry, cfg))
        return None
    return run_clips(entries, work, cfg.jobs)


def cmd_magnify(args):
    entries = load_manifest(args.manifest)
    alphas = args.alpha
    if len(alphas) == 1:
        cfg = build_config(args)
        return _finish(_magnify_into(entries, cfg, cfg.out), cfg, "magnify")
    status = EXIT_OK
    for a in alphas:
        cfg = build_config(args, alpha=a)
        sub = cfg.out / f"alpha_{fmt(a)}"
        results = _magnify_into(entries, cfg, sub)
        status = max(status, _finish(results, dataclasses.replace(cfg, out=sub), "magnify"))
    return status


def _tracks(entry, cfg: RunConfig):
    seq = _load_clip(entry, cfg)
    orig = ssim.ssim_series(seq, cfg.ssim, "ORIGINAL")
    mag = ssim.ssim_series(evm.magnify(seq, cfg.mag), cfg.ssim, "EVM")
    return orig, mag


def _write_series(entry, cfg, series_pair):
    for s in series_pair:
        write_text(cfg.out / "series" / f"{entry.clip_id}_{s.source.lower()}.csv", ssim.series_csv(s))


def cmd_ssim(args):
    cfg = build_config(args)
    entries = load_manifest(args.manifest)

    def work(entry):
        pair = _tracks(entry, cfg)
        _write_series(entry, cfg, pair)
        return pair
    return _finish(run_clips(entries, work, cfg.jobs), cfg, "ssim")


def cmd_features(args):
    cfg = build_config(args)
    entries = load_manifest(args.manifest)

    def work(entry):
        pair = _tracks(entry, cfg)
        _write_series(entry, cfg, pair)
        return [(entry.clip_id, s.source, ssim.features(s), entry.label) for s in pair]

    results = run_clips(entries, work, cfg.jobs)
    rows = [row for r in results if r.ok for row in r.value]
    write_text(cfg.out / "features.csv", ssim.features_csv(rows))
    return _finish(results, cfg, "features")


PULSE_HEADER = ("clip_id", "label", "status", "bpm", "freq_hz", "peak_magnitude")


def cmd_pulse(args):
    band = _band(args.f_lo if args.f_lo is not None else pulse.DEFAULT_BAND.f_lo,
                 args.f_hi if args.f_hi is not None else pulse.DEFAULT_BAND.f_hi)
    cfg = build_config(args, band=band)
    entries = load_manifest(args.manifest)
    channel = cfg.channel or ("G" if args.no_magnify else "Y")

    def work(entry):
        seq = _load_clip(entry, cfg)
        if not args.no_magnify:
            seq = evm.magnify(seq, cfg.mag.replace(mode="COLOR"))
        series = pulse.mean_series(seq, None, channel)
        try:
            est = pulse.estimate_bpm(series, cfg.pulse_band)
        except NoPeak:
            return None
        write_text(cfg.out / "spectra" / f"{entry.clip_id}.csv", pulse.spectrum_csv(est))
        return est

    results = run_clips(entries, work, cfg.jobs)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(PULSE_HEADER)
    by_id = {e.clip_id: e for e in entries}
    for r in results:
        label = by_id[r.clip_id].label
        if not r.ok:
            w.writerow([r.clip_id, label, "failed", "", "", ""])
        elif r.value is None:
            w.writerow([r.clip_id, label, "NoPeak", "", "", ""])
        else:
            est = r.value
            w.writerow([r.clip_id, label, "ok", fmt(est.bpm), fmt(est.freq), fmt(est.peak_magnitude)])
    write_text(cfg.out / "pulse.csv", buf.getvalue())
    write_text(cfg.out / "pulse_pairs.csv", _pairs_csv(entries, results))
    return _finish(results, cfg, "pulse")


def _pairs_csv(entries, results):
    est = {r.clip_id: r.value for r in results if r.ok and r.value is not None}
    groups = {}
    for e in entries:
        if e.pair is not None:
            groups.setdefault(str(e.pair), []).append(e)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["pair", "real_clip", "fake_clip", "real_bpm", "fake_bpm", "delta_bpm"])
    for name in sorted(groups):
        reals = [e for e in groups[name] if e.label == "REAL" and e.clip_id in est]
        fakes = [e for e in groups[name] if e.label == "FAKE" and e.clip_id in est]
        for re_ in reals:
            for fe in fakes:
                a, b = est[re_.clip_id], est[fe.clip_id]
                w.writerow([name, re_.clip_id, fe.clip_id, fmt(a.bpm), fmt(b.bpm),
                            fmt(pulse.compare_pulse(a, b))])
    return buf.getvalue()


def _records(features_path, manifest_path, source):
    try:
        rows = ssim.read_features_csv(Path(features_path).read_text())
    except KeyError as exc:
        raise MalformedManifest(f"features CSV lacks columns {exc.args[0]}") from exc
    except (OSError, ValueError) as exc:
        raise MalformedManifest(f"cannot read features CSV: {exc}") from exc
    splits = None
    if manifest_path:
        splits = {e.clip_id: e.split for e in load_manifest(manifest_path)}
    records = []
    for clip_id, src, fv, label in rows:
        if src != source or label not in detect.LABELS:
            continue
        split = splits.get(clip_id, "TRAIN") if splits is not None else "TRAIN"
        records.append(detect.ClipRecord(clip_id, label, tuple(fv), split))
    if not records:
        raise MalformedManifest(f"no labelled {source} rows in {features_path}")
    return records, splits is not None


def _metrics_outputs(out: Path, metrics: detect.Metrics, stem="metrics"):
    write_text(out / f"{stem}.json", dumps(metrics.to_dict()))
    d = metrics.to_dict()
    c = d.pop("confusion")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    keys = ["accuracy", "cross_entropy_loss", "precision", "recall", "f1", "n", "TP", "FN", "FP", "TN"]
    w.writerow(keys)
    vals = {**d, **c}
    w.writerow([fmt(vals[k]) if isinstance(vals[k], float) else vals[k] for k in keys])
    write_text(out / f"{stem}.csv", buf.getvalue())


def _train(records, args):
    if not args.no_oversample:
        records = detect.oversample_minority(records, seed=args.seed)
    if args.model == "logistic":
        return detect.train_logistic(records, {
            "learning_rate": args.learning_rate, "epochs": args.epochs, "l2": args.l2, "seed": args.seed})
    return detect.train_tree(records, {"max_depth": args.max_depth, "min_leaf": args.min_leaf})


def cmd_train(args):
    records, has_split = _records(args.features, args.manifest, args.source)
    try:
        model = _train(records, args)
    except (detect.SingleClass, detect.NonFiniteLoss) as exc:
        raise ConfigError(str(exc)) from exc
    out = Path(args.out)
    text = detect.model_to_json(model)
    write_text(out / "model.json", text)
    test = [r for r in records if r.split == "TEST"]
    if has_split and test:
        _metrics_outputs(out, detect.evaluate(detect.model_from_json(text), records, "TEST"))
    return EXIT_OK


def cmd_eval(args):
    records, has_split = _records(args.features, args.manifest, args.source)
    try:
        model = detect.model_from_json(Path(args.model_file).read_text())
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigError(f"cannot load model: {exc}") from exc
    split = "TEST" if has_split else None
    try:
        metrics = detect.evaluate(model, records, split)
    except detect.EmptyTestSet as exc:
        raise ConfigError(str(exc)) from exc
    _metrics_outputs(Path(args.out), metrics)
    return EXIT_OK


SWEEP_HEADER = ("alpha", *ssim.FEATURES_HEADER)


def cmd_sweep(args):
    entries = load_manifest(args.manifest)
    base = build_config(args)
    alphas = args.alphas

    def work(entry):
        seq = _load_clip(entry, base)
        rows = []
        for a, out in zip(alphas, evm.sweep_alpha(seq, base.mag, alphas)):
            s = ssim.ssim_series(out, base.ssim, "EVM")
            rows.append((a, ssim.features(s)))
            write_text(base.out / "series" / f"{entry.clip_id}_alpha_{fmt(a)}.csv", ssim.series_csv(s))
            if args.write_frames:
                _write_clip(out, base.out / f"alpha_{fmt(a)}" / entry.clip_id, base,
                            _entry_provenance(entry, base, alpha=a))
        return rows

    results = run_clips(entries, work, base.jobs)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_HEADER)
    labels = {e.clip_id: e.label for e in entries}
    for r in results:
        if r.ok:
            for a, fv in r.value:
                w.writerow([fmt(a), r.clip_id, "EVM", *(fmt(x) for x in fv), labels[r.clip_id]])
    write_text(base.out / "sweep.csv", buf.getvalue())
    return _finish(results, base, "sweep")


# ---------------------------------------------------------------- parser

def _common(p, band_default=MAGNIFY_BAND):
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--mode", choices=evm.MODES, default="COLOR")
    p.add_argument("--alpha", type=float, nargs="+", default=[50.0])
    p.add_argument("--f-lo", type=float, default=band_default[0] if band_default else None)
    p.add_argument("--f-hi", type=float, default=band_default[1] if band_default else None)
    p.add_argument("--depth", type=int, default=None)
    p.add_argument("--chroma-atten", type=float, default=1.0)
    p.add_argument("--lambda-cutoff", type=float, default=None)
    p.add_argument("--filter", choices=sorted(evm.tfilter.FILTERS), default="ideal")
    p.add_argument("--window", type=int, default=8)
    p.add_argument("--stride", type=int, default=1)
    p.add_argument("--channel", choices=pulse.CHANNELS, default=None)
    p.add_argument("--fps", type=float, default=None, help="override input frame rate")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--format", choices=("png", "y4m"), default="png")
    p.add_argument("--bit-depth", type=int, choices=(8, 16), default=8)


def _classifier(p):
    p.add_argument("--features", required=True)
    p.add_argument("--manifest", default=None, help="supplies TRAIN/TEST splits")
    p.add_argument("--source", choices=ssim.SOURCES, default="EVM")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)


def build_parser():
    parser = argparse.ArgumentParser(prog="evmforge", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic clip")
    p.add_argument("kind", choices=synth.KINDS)
    p.add_argument("--out", required=True)
    p.add_argument("--frames", type=int, default=300)
    p.add_argument("--width", type=int, default=32)
    p.add_argument("--height", type=int, default=32)
    p.add_argument("--fps", type=float, default=None)
    p.add_argument("--freq", type=float, default=1.096)
    p.add_argument("--amplitude", type=float, default=None)
    p.add_argument("--glitch-frames", type=int, nargs="*", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=("png", "y4m"), default="png")
    p.add_argument("--bit-depth", type=int, choices=(8, 16), default=8)
    p.set_defaults(func=cmd_synth)

    for name, func, helptext in (
        ("magnify", cmd_magnify, "magnify every manifest clip"),
        ("ssim", cmd_ssim, "adjacent-frame SSIM series (original and magnified)"),
        ("features", cmd_features, "SSIM drop features CSV"),
        ("sweep", cmd_sweep, "SSIM features across amplification factors"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--manifest", required=True)
        _common(p)
        if name == "sweep":
            p.add_argument("--alphas", type=float, nargs="+", default=[10, 20, 30, 40, 50])
            p.add_argument("--write-frames", action="store_true")
        p.set_defaults(func=func)

    p = sub.add_parser("pulse", help="heart-rate estimate per clip")
    p.add_argument("--manifest", required=True)
    _common(p, band_default=None)
    p.add_argument("--no-magnify", action="store_true")
    p.set_defaults(func=cmd_pulse)

    p = sub.add_parser("train", help="train a classifier on a features CSV")
    _classifier(p)
    p.add_argument("--model", choices=("logistic", "tree"), default="logistic")
    p.add_argument("--learning-rate", type=float, default=0.1)
    p.add_argument("--epochs", type=int, default=500)
    p.add_argument("--l2", type=float, default=0.0)
    p.add_argument("--max-depth", type=int, default=4)
    p.add_argument("--min-leaf", type=int, default=1)
    p.add_argument("--no-oversample", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a trained model")
    _classifier(p)
    p.add_argument("--model-file", required=True)
    p.set_defaults(func=cmd_eval)
    return parser


def _setup_logging():
    level = os.environ.get("EVMFORGE_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def main(argv=None):
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, MalformedManifest) as exc:
        print(f"evmforge {args.command}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except EvmError as exc:
        print(f"evmforge {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CLIP_FAILED


if __name__ == "__main__":
    sys.exit(main())
