"""Command-line entry point: ``vemb <command> ...``.

Exit codes: 0 success, 2 usage or config error, 3 data error, 4 numeric
failure.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import sys
from pathlib import Path

import numpy as np

from . import config as config_mod
from . import vectors
from .audio import SegmentSpec, center_segment, load_wav, resample
from .config import PipelineConfig
from .duration import ConditioningMode, DurationDataset, load_alignment, run_conditioning_experiment
from .encoders import embed
from .ensemble import PRESETS, REFERENCE_EER, evaluate_fusion, fuse_scores, read_scores
from .errors import ConfigError, DataError, NumericError
from .metrics import FPR_LEVELS, read_trials, score_trials, verification_report
from .train import load_checkpoint, manifest_hash, save_checkpoint, scan_dataset, split_validation, train

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4

# TPR at each FPR level for the full-scale system on 800 held-out speakers
REFERENCE_TPR = {"0.5": 0.9869, "0.2": 0.9469, "0.1": 0.9044, "0.05": 0.8354, "0.01": 0.5920}


def _config(path) -> PipelineConfig:
    return config_mod.load(path) if path else PipelineConfig()


def _write_json(obj, path):
    text = json.dumps(obj, indent=2, sort_keys=True)
    if path:
        Path(path).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)


def _embed_file(path, model, cfg) -> np.ndarray:
    w = resample(load_wav(path), cfg.audio.sample_rate)
    seg = center_segment(w, SegmentSpec(cfg.audio.segment_seconds, cfg.audio.sample_rate))
    return embed(seg, model, cfg).vector


def cmd_train(args) -> int:
    cfg = _config(args.config)
    clips = scan_dataset(args.data, cfg.audio.sample_rate)
    train_clips, val_clips = split_validation(clips, cfg.train.val_fraction)
    out = Path(args.out)
    log_fh = open(args.log, "w", encoding="utf-8") if args.log else None

    def log(line):
        print(line, file=log_fh or sys.stderr, flush=True)

    try:
        result = train(train_clips, cfg, val_clips=val_clips or None, out_dir=out.parent, log=log, prefix=out.stem)
    finally:
        if log_fh:
            log_fh.close()
    m = save_checkpoint(out, result.model, result.head, cfg, step=len(result.losses), speakers=sorted({c.speaker for c in train_clips}))
    print(json.dumps({"checkpoint": str(out), "config_hash": cfg.hash(), "manifest_hash": manifest_hash(m), "final_loss": result.losses[-1]}))
    return EXIT_OK


def cmd_embed(args) -> int:
    model, cfg, _ = load_checkpoint(args.checkpoint)
    records = [(str(p), _embed_file(p, model, cfg)) for p in args.wavs]
    vectors.save(args.out, records)
    return EXIT_OK


def cmd_verify(args) -> int:
    from .metrics import cosine_similarity

    model, cfg, _ = load_checkpoint(args.checkpoint)
    a = _embed_file(args.wav_a, model, cfg)
    b = _embed_file(args.wav_b, model, cfg)
    print(f"{cosine_similarity(a, b):.8f}")
    return EXIT_OK


def cmd_eval(args) -> int:
    trials = read_trials(args.trials)
    cfg_hash = man_hash = None
    if args.embeddings:
        store = vectors.load_store(args.embeddings)
    else:
        if not args.checkpoint:
            raise ConfigError("eval needs --checkpoint or --embeddings")
        model, cfg, m = load_checkpoint(args.checkpoint)
        cfg_hash, man_hash = cfg.hash(), manifest_hash(m)
        root = Path(args.audio_root or ".")
        ids = sorted({t.id_a for t in trials} | {t.id_b for t in trials})
        store = {i: _embed_file(root / i, model, cfg) for i in ids}
    report = verification_report(score_trials(store, trials), tuple(args.fpr))
    report.update(config_hash=cfg_hash, manifest_hash=man_hash, reference_full_scale={"tpr_at_fpr": REFERENCE_TPR})
    _write_json(report, args.out)
    return EXIT_OK


def cmd_duration(args) -> int:
    cfg = _config(args.config)
    dcfg = cfg.duration
    utts = load_alignment(args.alignments)
    ids, matrix = vectors.load(args.embeddings)
    if matrix.shape[1] != dcfg.embedding_dim:
        dcfg = config_mod.DurationConfig(**{**vars(dcfg), "embedding_dim": int(matrix.shape[1])})
    data = DurationDataset.from_alignments(utts, dict(zip(ids, matrix.astype(np.float64))), dcfg)
    modes = tuple(ConditioningMode) if args.mode == "all" else (ConditioningMode.parse(args.mode),)
    report = run_conditioning_experiment(data, dcfg, seeds=tuple(args.seeds), modes=modes)
    report.update(config_hash=cfg.hash(), manifest_hash=_checkpoint_hash(args.checkpoint), duration_config=vars(dcfg))
    _write_json(report, args.out)
    return EXIT_OK


def _checkpoint_hash(path):
    if not path:
        return None
    _, _, m = load_checkpoint(path)
    return manifest_hash(m)


def cmd_fuse(args) -> int:
    x1 = read_scores(args.scores1)
    x2 = read_scores(args.scores2)
    trials = read_trials(args.trials)
    if not (len(x1) == len(x2) == len(trials)):
        raise DataError(f"length mismatch: scores1 {len(x1)}, scores2 {len(x2)}, trials {len(trials)}")
    presets = PRESETS if args.preset == "all" else {args.preset: PRESETS[args.preset]}
    report = {"eer": evaluate_fusion(trials.labels, x1, x2, presets)}
    if args.fused_out:
        from .ensemble import write_scores

        name = next(iter(presets))
        write_scores(args.fused_out, fuse_scores(x1, x2, presets[name]))
    report.update(
        presets={k: vars(v) for k, v in presets.items()},
        config_hash=_config(args.config).hash(),
        manifest_hash=_checkpoint_hash(args.checkpoint),
        reference_full_scale={"eer_percent": REFERENCE_EER},
    )
    _write_json(report, args.out)
    return EXIT_OK


def cmd_make_synthetic(args) -> int:
    from .synth import write_speaker_corpus

    paths = write_speaker_corpus(args.out, n_speakers=args.speakers, clips_per_speaker=args.clips, seconds=args.seconds, seed=args.seed)
    print(f"wrote {len(paths)} clips to {args.out}")
    return EXIT_OK


def cmd_config(args) -> int:
    from .config import desk_config

    cfg = desk_config() if args.desk else PipelineConfig()
    sys.stdout.write(config_mod.dumps(cfg))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vemb", description="Multi-representation speaker embeddings.")
    p.add_argument("--deterministic", action="store_true", help="limit BLAS to one thread")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("train", help="train an encoder on data_dir/<speaker>/*.wav")
    s.add_argument("--config")
    s.add_argument("--data", required=True)
    s.add_argument("--out", required=True, help="final checkpoint path")
    s.add_argument("--log", help="write the per-step loss log here instead of stderr")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("embed", help="write one embedding per input file")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("wavs", nargs="+")
    s.set_defaults(func=cmd_embed)

    s = sub.add_parser("verify", help="print the cosine score of two recordings")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("wav_a")
    s.add_argument("wav_b")
    s.set_defaults(func=cmd_verify)

    s = sub.add_parser("eval", help="TPR at fixed FPR levels and EER over a trial list")
    s.add_argument("--trials", required=True)
    s.add_argument("--checkpoint")
    s.add_argument("--audio-root", help="trial ids are paths relative to this directory")
    s.add_argument("--embeddings", help="precomputed embeddings instead of a checkpoint")
    s.add_argument("--fpr", type=float, nargs="+", default=list(FPR_LEVELS))
    s.add_argument("--out")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("duration", help="duration predictor under each conditioning mode")
    s.add_argument("--config")
    s.add_argument("--alignments", required=True)
    s.add_argument("--embeddings", required=True)
    s.add_argument("--mode", default="all", choices=["all"] + [m.value for m in ConditioningMode])
    s.add_argument("--seeds", type=int, nargs="+", default=[0])
    s.add_argument("--checkpoint", help="record this checkpoint's manifest hash")
    s.add_argument("--out")
    s.set_defaults(func=cmd_duration)

    s = sub.add_parser("fuse", help="score fusion with fixed weight presets")
    s.add_argument("--scores1", required=True, help="this model's cosine scores")
    s.add_argument("--scores2", required=True, help="second system's scores")
    s.add_argument("--trials", required=True)
    s.add_argument("--preset", default="all", choices=["all", *PRESETS])
    s.add_argument("--fused-out", help="write fused scores of the (first) preset")
    s.add_argument("--config")
    s.add_argument("--checkpoint", help="record this checkpoint's manifest hash")
    s.add_argument("--out")
    s.set_defaults(func=cmd_fuse)

    s = sub.add_parser("make-synthetic", help="write a procedural multi-speaker corpus")
    s.add_argument("--out", required=True)
    s.add_argument("--speakers", type=int, default=8)
    s.add_argument("--clips", type=int, default=50)
    s.add_argument("--seconds", type=float, default=4.5)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_make_synthetic)

    s = sub.add_parser("config", help="print a default config file")
    s.add_argument("--desk", action="store_true", help="reduced widths for CPU training")
    s.set_defaults(func=cmd_config)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.deterministic:
        from threadpoolctl import threadpool_limits

        limiter = threadpool_limits(limits=1)
    else:
        limiter = contextlib.nullcontext()
    try:
        with limiter:
            return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataError, OSError, KeyError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
