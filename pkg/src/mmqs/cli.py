"""Command-line front end.

    mmqs inpaint --config barbara-inpaint --reference barbara.png --out-dir out/
    mmqs denoise --config denoise --input noisy.png --set max_iters=500
    mmqs degrade --config sr --reference photo.png --out-dir lowres/
    mmqs export-codes --config run.cfg --resume out/state.npz --out-dir out/

``--config`` takes a file path or a preset name (see ``mmqs presets``).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import canonical
from ._runtime import tune_allocator
from .actions import identity_only
from .autoencoder import encode
from .config import TASKS, TaskConfig, preset_names, resolve
from .image import GaussianSampler, as_image, psnr, read_image, ssim, write_image
from .observation import ObservationOp
from .reconstruct import ReconstructionProblem, run

log = logging.getLogger("mmqs")


def random_mask(shape, missing_rate: float, seed: int) -> np.ndarray:
    """Boolean keep-mask with exactly ``floor(missing_rate * N)`` pixels removed."""
    n = shape[0] * shape[1]
    drop = math.floor(missing_rate * n)
    mask = np.ones(n, dtype=bool)
    mask[np.random.default_rng(seed).permutation(n)[:drop]] = False
    return mask.reshape(shape[:2])


def make_operator(cfg: TaskConfig, image_shape=None, mask=None) -> ObservationOp:
    if cfg.task == "inpaint":
        if mask is None:
            mask = random_mask(image_shape, cfg.missing_rate, cfg.seed + 3)
        return ObservationOp.masking(mask)
    if cfg.task == "deblur":
        return ObservationOp.blur(cfg.blur_width, cfg.blur_std)
    if cfg.task == "sr":
        return ObservationOp.downsample(cfg.sr_factor)
    return ObservationOp.identity()


def synthesize_degradation(reference, cfg: TaskConfig) -> tuple[np.ndarray, ObservationOp]:
    """Seeded observation ``F(reference) + noise`` and its operator.

    ``noise_sigma`` is on the 0..255 scale. Inpainting drops exactly
    ``floor(missing_rate * H * W)`` pixel sites, shared across channels.
    """
    reference = as_image(reference)
    if cfg.task == "inpaint" and cfg.missing_rate is None:
        raise ValueError("inpaint degradation needs missing_rate")
    if cfg.missing_rate is not None and not 0 <= cfg.missing_rate < 1:
        raise ValueError("missing_rate must lie in [0, 1)")
    if cfg.noise_sigma < 0:
        raise ValueError("noise_sigma must be non-negative")
    op = make_operator(cfg, reference.shape)
    observed = op.forward(reference)
    if cfg.noise_sigma > 0:
        observed = observed + GaussianSampler(cfg.seed + 2, cfg.noise_sigma / 255).sample(observed.shape)
    return observed, op


def _json_value(v):
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    return v


def load_observation(cfg: TaskConfig):
    """(observed, op, reference) from either an input image or a reference to degrade."""
    reference = read_image(cfg.reference) if cfg.reference else None
    if cfg.input is None:
        observed, op = synthesize_degradation(reference, cfg)
        return observed, op, reference
    observed = read_image(cfg.input)
    mask = None
    if cfg.task == "inpaint":
        mask = read_image(cfg.mask)
        if mask.ndim == 3:
            mask = mask.mean(axis=2)
        mask = mask > 0.5
    return observed, make_operator(cfg, observed.shape, mask), reference


def build_problem(cfg: TaskConfig, observed, op) -> ReconstructionProblem:
    return ReconstructionProblem.create(
        observed, op, cfg.patch_side, list(cfg.hidden), stride=cfg.stride, sigma=cfg.sigma,
        lam=cfg.lambda_init, seed=cfg.seed, canonical=cfg.canonical, slope=cfg.slope,
    )


def export_codes(problem: ReconstructionProblem, path) -> np.ndarray:
    """One CSV row per patch: index, origin, action number, bottleneck code, canonical pixels.

    Identical canonical patches are encoded once so their codes agree bitwise.
    Returns the code matrix (bottleneck dim x T).
    """
    grid = problem.grid
    c = problem.canonical_patches()
    uniq, inverse = np.unique(c, axis=1, return_inverse=True)
    codes = encode(problem.net, uniq)[:, inverse.ravel()]
    numbers = (np.array([a.index for a in problem.actions])[problem.assignment] if problem.canonical
               else np.ones(grid.patch_count, dtype=int))
    header = (["patch", "row", "col", "action"] + [f"code_{i}" for i in range(codes.shape[0])]
              + [f"pix_{i}" for i in range(c.shape[0])])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for t, (r, col) in enumerate(grid.origins()):
            w.writerow([t, r, col, int(numbers[t])] + [repr(float(v)) for v in codes[:, t]]
                       + [repr(float(v)) for v in c[:, t]])
    return codes


def run_task(cfg: TaskConfig, resume=None) -> dict:
    """Reconstruct and write output.png, trace.csv, metrics.json, labels.pgm, state.npz."""
    cfg.validate()
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    observed, op, reference = load_observation(cfg)
    problem = build_problem(cfg, observed, op)
    if reference is not None and reference.shape != problem.estimate.shape:
        raise ValueError(f"reference shape {reference.shape} does not match output shape {problem.estimate.shape}")
    if resume is not None:
        problem.load(resume)
    train = cfg.train_config()
    if train.early_stop:
        train.noise_energy = observed.size * (cfg.noise_sigma / 255) ** 2

    def report(p, rec):
        if rec.iter % 100 == 0:
            log.info("iter %d  L_rec %.4g  L_cae %.4g  lambda %.3g", rec.iter, rec.loss_rec, rec.loss_cae, rec.lam)

    result, trace = run(problem, train, reference=reference, callback=report)
    write_image(out / "output.png", result)
    trace.to_csv(out / "trace.csv")
    problem.save(out / "state.npz")
    labels = problem.assignment if problem.canonical else np.zeros(problem.grid.patch_count, dtype=int)
    actions = problem.actions if problem.canonical else identity_only(cfg.patch_side)
    canonical.export_labels(out / "labels.pgm", labels, actions, problem.grid.n_rows, problem.grid.n_cols)
    last = trace.records[-1]
    metrics = {
        "task": cfg.task,
        "iterations": len(trace),
        "stopped_early": trace.stopped_early,
        "loss_rec": last.loss_rec,
        "loss_cae": last.loss_cae,
        "lambda": problem.lam,
        "output_shape": list(result.shape),
    }
    if reference is not None:
        metrics["psnr"] = psnr(reference, result)
        metrics["ssim"] = ssim(reference, result)
        if observed.shape == reference.shape and cfg.task != "inpaint":
            metrics["psnr_observed"] = psnr(reference, observed)
    (out / "metrics.json").write_text(json.dumps({k: _json_value(v) for k, v in metrics.items()},
                                                 indent=2, sort_keys=True) + "\n")
    return metrics


def degrade(cfg: TaskConfig) -> None:
    """Write observed.png (and mask.png for inpainting) from the reference."""
    if cfg.reference is None:
        raise ValueError("degrade needs --reference")
    reference = read_image(cfg.reference)
    observed, op = synthesize_degradation(reference, cfg)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_image(out / "observed.png", observed)
    if op.kind == "mask":
        write_image(out / "mask.png", op.mask.astype(float))


def parse_overrides(items) -> dict[str, str]:
    pairs = {}
    for item in items or []:
        if "=" not in item:
            raise ValueError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        pairs[k.strip()] = v.strip()
    return pairs


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mmqs", description="Single-image reconstruction with a canonical patch auto-encoder.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in (*TASKS, "degrade", "export-codes"):
        p = sub.add_parser(name)
        p.add_argument("--config", help="config file or preset name")
        p.add_argument("--input", help="observed image")
        p.add_argument("--reference", help="clean image for metrics, or to degrade when --input is absent")
        p.add_argument("--mask", help="inpainting mask image, nonzero = observed")
        p.add_argument("--seed", type=int)
        p.add_argument("--iters", type=int, help="maximum iterations")
        p.add_argument("--out-dir")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config value")
        p.add_argument("--resume", help="state.npz from an earlier run")
        p.add_argument("-v", "--verbose", action="store_true", help="log progress every 100 iterations")
    sub.add_parser("presets", help="list shipped presets")
    return parser


def config_from_args(args) -> TaskConfig:
    cfg = resolve(args.config) if args.config else TaskConfig()
    if args.command in TASKS:
        cfg = cfg.replace(task=args.command)
    flags = {"input": args.input, "reference": args.reference, "mask": args.mask,
             "seed": args.seed, "max_iters": args.iters, "output_dir": args.out_dir}
    cfg = cfg.replace(**{k: v for k, v in flags.items() if v is not None})
    return cfg.with_overrides(parse_overrides(args.set))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING, format="%(message)s")
    if args.command == "presets":
        print("\n".join(preset_names()))
        return 0
    tune_allocator()
    try:
        cfg = config_from_args(args)
        if args.command == "degrade":
            degrade(cfg)
        elif args.command == "export-codes":
            if args.resume is None:
                raise ValueError("export-codes needs --resume state.npz")
            cfg.validate()
            observed, op, _ = load_observation(cfg)
            problem = build_problem(cfg, observed, op)
            problem.load(args.resume)
            out = Path(cfg.output_dir)
            out.mkdir(parents=True, exist_ok=True)
            export_codes(problem, out / "codes.csv")
        else:
            metrics = run_task(cfg, resume=args.resume)
            print(json.dumps({k: _json_value(v) for k, v in metrics.items()}, sort_keys=True))
    except (OSError, ValueError, FloatingPointError) as exc:
        print(f"mmqs: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
