"""Batch front-end: manifests, config files, and the three subcommands.

`augment` runs score-guided augmentation over a TSV manifest, `random-
baseline` applies the uniform random pitch/duration baseline, `stats`
reports the acoustic-gap metrics of a corpus. Per-utterance failures are
recorded and the batch continues; exit code 0 means full success, 1
partial failures, 2 a fatal setup problem.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import fields, replace
from functools import partial
from pathlib import Path

from .audio import read_wav, resample, write_wav
from .augment import (
    MODES,
    AugmentConfig,
    UtteranceInput,
    augment_utterance,
    discover_midi_pool,
)
from .errors import PDAugmentError, ValidationError
from .stats import corpus_report, utterance_stats
from .syllables import syllabify
from .textgrid import parse_alignment
from .vocoder import estimate_f0

EXIT_OK = 0
EXIT_PARTIAL = 1
EXIT_FATAL = 2

log = logging.getLogger("pdaugment")


def read_manifest(path: str | Path) -> list[UtteranceInput]:
    """UTF-8 TSV: id, wav, alignment[, midi]. '#' lines are comments;
    relative paths resolve against the manifest's directory."""
    path = Path(path)
    base = path.parent
    try:
        lines = path.read_text("utf-8").splitlines()
    except OSError as exc:
        raise ValidationError(f"cannot read manifest {path}: {exc}") from exc

    def resolve(p: str) -> str:
        q = Path(p)
        return str(q if q.is_absolute() else base / q)

    entries: list[UtteranceInput] = []
    seen: set[str] = set()
    for i, line in enumerate(lines, 1):
        line = line.rstrip("\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        cols = line.split("\t")
        if len(cols) not in (3, 4):
            raise ValidationError(
                f"{path}:{i}: expected 3 or 4 tab-separated columns, got {len(cols)}")
        uid = cols[0].strip()
        if not uid:
            raise ValidationError(f"{path}:{i}: empty utterance id")
        if uid in seen:
            raise ValidationError(f"{path}:{i}: duplicate utterance id {uid!r}")
        seen.add(uid)
        midi = resolve(cols[3].strip()) if len(cols) == 4 and cols[3].strip() else None
        entry = UtteranceInput(uid, resolve(cols[1].strip()),
                               resolve(cols[2].strip()), midi)
        for p in (entry.wav_path, entry.alignment_path, entry.midi_path):
            if p is not None and not Path(p).is_file():
                raise ValidationError(f"{path}:{i}: referenced file missing: {p}")
        entries.append(entry)
    if not entries:
        raise ValidationError(f"manifest {path} lists no utterances")
    return entries


_CONFIG_KEYS = {f.name for f in fields(AugmentConfig)}


def read_config_file(path: str | Path) -> dict:
    """Flat key = value text config; '#' starts a comment. Values are
    coerced to int/float/bool where they parse as such."""
    values: dict = {}
    for i, raw in enumerate(Path(path).read_text("utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"{path}:{i}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in _CONFIG_KEYS:
            raise ValidationError(f"{path}:{i}: unknown config key {key!r}")
        values[key] = _coerce(value.strip())
    return values


def _coerce(raw: str):
    low = raw.lower()
    if low in ("true", "false"):
        return low == "true"
    for cast in (int, float):
        try:
            return cast(raw)
        except ValueError:
            pass
    return raw


def build_config(args: argparse.Namespace) -> AugmentConfig:
    cfg = AugmentConfig()
    if args.config:
        cfg = replace(cfg, **read_config_file(args.config))
    overrides = {
        "out_dir": args.out,
        "seed": args.seed,
        "jobs": args.jobs,
        "mode": getattr(args, "mode", None),
        "midi_pool_dir": getattr(args, "midi_pool", None),
    }
    cfg = replace(cfg, **{k: v for k, v in overrides.items() if v is not None})
    cfg.validate()
    return cfg


def _process_entry(inp: UtteranceInput, cfg: AugmentConfig,
                   midi_pool) -> dict:
    """Worker body: augment one utterance and write its outputs. Never
    raises; failures come back as records so the batch continues."""
    try:
        result = augment_utterance(inp, cfg, midi_pool)
        out_dir = Path(cfg.out_dir)
        clip_count = write_wav(result.waveform, out_dir / f"{inp.utterance_id}.wav")
        meta = dict(result.meta)
        meta["clip_count"] = clip_count
        (out_dir / f"{inp.utterance_id}.meta.json").write_text(
            json.dumps(meta, indent=2, sort_keys=True) + "\n", "utf-8")
        return {"utterance_id": inp.utterance_id, "ok": True}
    except PDAugmentError as exc:
        return {"utterance_id": inp.utterance_id, "ok": False,
                "error": f"{type(exc).__name__}: {exc}"}
    except Exception as exc:  # crash isolation for the whole batch
        return {"utterance_id": inp.utterance_id, "ok": False,
                "error": f"unexpected {type(exc).__name__}: {exc}"}


def _expand_copies(entries: list[UtteranceInput], copies: int) -> list[UtteranceInput]:
    if copies <= 1:
        return entries
    out = []
    for e in entries:
        out.append(e)
        for k in range(2, copies + 1):
            out.append(replace_id(e, f"{e.utterance_id}.c{k}"))
    return out


def replace_id(e: UtteranceInput, uid: str) -> UtteranceInput:
    return UtteranceInput(uid, e.wav_path, e.alignment_path, e.midi_path)


def run_augment(args: argparse.Namespace, force_mode: str | None = None) -> int:
    entries = read_manifest(args.manifest)
    cfg = build_config(args)
    if force_mode:
        cfg = replace(cfg, mode=force_mode)
        cfg.validate()
    midi_pool = None
    if cfg.mode != "random" and any(e.midi_path is None for e in entries):
        if cfg.midi_pool_dir is None:
            raise ValidationError(
                "mode requires MIDI guidance: give --midi-pool or per-entry "
                "midi paths in the manifest")
        midi_pool = discover_midi_pool(cfg.midi_pool_dir)
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    work = _expand_copies(entries, cfg.copies)

    worker = partial(_process_entry, cfg=cfg, midi_pool=midi_pool)
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            records = list(pool.map(worker, work))
    else:
        records = [worker(e) for e in work]

    failures = sorted((r for r in records if not r["ok"]),
                      key=lambda r: r["utterance_id"])
    for r in failures:
        log.error("%s failed: %s", r["utterance_id"], r["error"])
    summary = {
        "mode": cfg.mode,
        "seed": cfg.seed,
        "ok": len(records) - len(failures),
        "failed": len(failures),
        "failures": [{"utterance_id": r["utterance_id"], "error": r["error"]}
                     for r in failures],
    }
    (out_dir / "summary.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n", "utf-8")
    print(f"{cfg.mode}: {summary['ok']} ok, {summary['failed']} failed "
          f"-> {out_dir}")
    return EXIT_PARTIAL if failures else EXIT_OK


def run_stats(args: argparse.Namespace) -> int:
    entries = read_manifest(args.manifest)
    cfg = build_config(args)
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    per_utt = []
    failures = []
    for e in entries:
        try:
            wav = read_wav(e.wav_path)
            if wav.sample_rate_hz != cfg.sample_rate_hz:
                wav = resample(wav, cfg.sample_rate_hz)
            contour = estimate_f0(wav, cfg.hop_s, cfg.f0_floor_hz, cfg.f0_ceil_hz)
            syllables = syllabify(parse_alignment(e.alignment_path))
            per_utt.append(utterance_stats(e.utterance_id, contour, syllables))
        except PDAugmentError as exc:
            failures.append({"utterance_id": e.utterance_id,
                             "error": f"{type(exc).__name__}: {exc}"})
            log.error("%s failed: %s", e.utterance_id, exc)
    if not per_utt:
        raise ValidationError("no utterance could be analyzed")
    report = corpus_report(per_utt, corpus_id=Path(args.manifest).stem)
    doc = json.loads(report.to_json())
    doc["failures"] = failures
    (out_dir / "stats.json").write_text(
        json.dumps(doc, indent=2, sort_keys=True) + "\n", "utf-8")
    (out_dir / "stats.txt").write_text(report.to_table(), "utf-8")
    print(report.to_table(), end="")
    if failures:
        print(f"({len(failures)} utterances failed analysis)")
    return EXIT_PARTIAL if failures else EXIT_OK


def _add_common(sub: argparse.ArgumentParser):
    sub.add_argument("--manifest", required=True,
                     help="TSV manifest: id, wav, alignment[, midi]")
    sub.add_argument("--config", help="key = value config file")
    sub.add_argument("--out", help="output directory")
    sub.add_argument("--seed", type=int, help="global seed")
    sub.add_argument("--jobs", type=int, help="parallel workers (default 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pdaugment",
        description="Make speech singing-like under MIDI score guidance.")
    subs = parser.add_subparsers(dest="command", required=True)

    p_aug = subs.add_parser("augment", help="score-guided augmentation")
    _add_common(p_aug)
    p_aug.add_argument("--mode", choices=[m for m in MODES if m != "random"],
                       help="pdaugment (default), pitch_only, or duration_only")
    p_aug.add_argument("--midi-pool", help="directory of .mid files")

    p_rnd = subs.add_parser("random-baseline",
                            help="uniform random pitch/duration baseline")
    _add_common(p_rnd)

    p_sts = subs.add_parser("stats", help="acoustic-gap metrics of a corpus")
    _add_common(p_sts)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        if args.command == "augment":
            return run_augment(args)
        if args.command == "random-baseline":
            return run_augment(args, force_mode="random")
        return run_stats(args)
    except PDAugmentError as exc:
        log.error("fatal: %s", exc)
        return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())
