"""Joint self-supervised reconstruction: fit an image and a canonical patch
auto-encoder to a single degraded observation.

The objective is ``L = L_rec + lam * L_cae`` with

    L_rec = || Y - F(agg(P^-1 A(P H(X)))) ||^2
    L_cae = || P H(X) - A(P H(X) + n) ||^2

where ``H`` extracts patches, ``agg`` averages them back, ``P`` applies the
per-patch assigned actions and ``A`` is the auto-encoder. ``X`` and the
network weights take simultaneous Adam steps while the assignment is
refreshed periodically by exhaustive search.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field, fields

import numpy as np

from . import canonical, patches
from .actions import Action, build_actions, identity_only
from .autoencoder import AdamState, Gradients, Mlp, backprop, forward_cached, DEFAULT_SLOPE
from .image import GaussianSampler, as_image, psnr
from .observation import ObservationOp, pseudo_init

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    max_iters: int = 2000
    lr_x: float = 0.01
    lr_theta: float = 0.01
    lr_final_ratio: float = 1.0
    assign_every: int = 10
    lambda_init: float = 1.0
    target_ratio: float = 0.5
    lambda_rate: float = 0.05
    lambda_min: float = 1e-4
    lambda_max: float = 1e4
    early_stop: bool = False
    patience: int = 10
    noise_energy: float = 0.0
    seed: int = 0

    def __post_init__(self):
        for f in ("max_iters", "assign_every", "patience"):
            if getattr(self, f) < 1:
                raise ValueError(f"{f} must be >= 1")
        if self.lr_x < 0 or self.lr_theta < 0:
            raise ValueError("learning rates must be non-negative")
        if not 0 < self.lr_final_ratio <= 1:
            raise ValueError("lr_final_ratio must lie in (0, 1]")
        if not 0 < self.lambda_min <= self.lambda_max:
            raise ValueError("need 0 < lambda_min <= lambda_max")
        if not 0 < self.target_ratio < 1:
            raise ValueError("target_ratio must lie in (0, 1)")


@dataclass
class TraceRecord:
    iter: int
    loss_rec: float
    loss_cae: float
    lam: float
    psnr: float = float("nan")


@dataclass
class TrainTrace:
    records: list[TraceRecord] = field(default_factory=list)
    stopped_early: bool = False

    def append(self, rec: TraceRecord) -> None:
        if self.records and rec.iter <= self.records[-1].iter:
            raise ValueError("trace iterations must increase")
        self.records.append(rec)

    def __len__(self):
        return len(self.records)

    def __getitem__(self, i):
        return self.records[i]

    def as_array(self) -> np.ndarray:
        """``(n, 5)`` array of iter, loss_rec, loss_cae, lam, psnr."""
        return np.array([[r.iter, r.loss_rec, r.loss_cae, r.lam, r.psnr] for r in self.records])

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iter", "loss_rec", "loss_cae", "lambda", "psnr"])
            for r in self.records:
                w.writerow([r.iter, repr(r.loss_rec), repr(r.loss_cae), repr(r.lam), repr(r.psnr)])


@dataclass
class ReconstructionProblem:
    """Mutable optimization state for one reconstruction run.

    ``actions=None`` bypasses canonicalization entirely (plain patch AE).
    """

    observed: np.ndarray
    op: ObservationOp
    grid: patches.PatchGrid
    net: Mlp
    estimate: np.ndarray
    sigma: float
    lam: float
    sampler: GaussianSampler
    actions: list[Action] | None = None
    assignment: np.ndarray | None = None
    counts: np.ndarray | None = None

    def __post_init__(self):
        self.observed = as_image(self.observed)
        self.estimate = as_image(self.estimate).copy()
        if self.op.output_shape(self.estimate.shape) != self.observed.shape:
            raise ValueError(
                f"F(estimate) has shape {self.op.output_shape(self.estimate.shape)}, observed is {self.observed.shape}"
            )
        if self.estimate.shape != self.grid.image_shape:
            raise ValueError("estimate shape does not match the patch grid")
        if self.net.input_dim != self.grid.patch_dim:
            raise ValueError(f"network input {self.net.input_dim} != patch dimension {self.grid.patch_dim}")
        if self.lam <= 0:
            raise ValueError("lambda must be positive")
        if self.counts is None:
            self.counts = patches.overlap_counts(self.grid)
        if self.actions is not None and self.assignment is None:
            self.assignment = np.zeros(self.grid.patch_count, dtype=np.intp)

    @classmethod
    def create(cls, observed, op: ObservationOp, patch_side: int, hidden, *, stride: int = 1,
               sigma: float = 0.05, lam: float = 1.0, seed: int = 0, canonical: bool = True,
               actions: list[Action] | None = None, slope: float = DEFAULT_SLOPE) -> "ReconstructionProblem":
        """Problem with ``X`` from :func:`pseudo_init` and a fresh network.

        ``canonical=False`` gives the plain patch AE baseline; ``actions``
        overrides the default eight rotation/flip actions.
        """
        observed = as_image(observed)
        x0 = pseudo_init(op, observed)
        grid = patches.PatchGrid.for_image(x0, patch_side, stride)
        net = Mlp.autoencoder(grid.patch_dim, hidden, seed=seed, slope=slope)
        if canonical and actions is None:
            actions = build_actions(patch_side)
        return cls(observed, op, grid, net, x0, sigma, lam, GaussianSampler(seed + 1, sigma),
                   actions=actions if canonical else None)

    @property
    def canonical(self) -> bool:
        return self.actions is not None

    def to_canonical(self, m: np.ndarray) -> np.ndarray:
        return canonical.canonicalize(m, self.assignment, self.actions) if self.canonical else m

    def from_canonical(self, m: np.ndarray) -> np.ndarray:
        return canonical.decanonicalize(m, self.assignment, self.actions) if self.canonical else m

    def canonical_patches(self) -> np.ndarray:
        return self.to_canonical(patches.extract(self.estimate, self.grid))

    def reconstruct(self) -> np.ndarray:
        """The model image ``agg(P^-1 A(P H(X)))`` for the current state."""
        out, _ = forward_cached(self.net, self.canonical_patches())
        return patches.aggregate(self.from_canonical(out), self.grid, self.counts)

    def refresh_assignment(self) -> None:
        if self.canonical:
            self.assignment = canonical.update_assignment(
                self.net, patches.extract(self.estimate, self.grid), self.actions
            )

    def draw_noise(self) -> np.ndarray:
        return self.sampler.sample(self.grid.matrix_shape)

    def save(self, path) -> None:
        """Checkpoint ``(X, weights, assignment, lam)`` to an ``.npz`` file."""
        arrays = {f"w{i}": w for i, w in enumerate(self.net.weights)}
        arrays.update({f"b{i}": b for i, b in enumerate(self.net.biases)})
        np.savez(path, estimate=self.estimate, lam=self.lam, slope=self.net.slope,
                 assignment=self.assignment if self.canonical else np.zeros(0, dtype=np.intp), **arrays)

    def load(self, path) -> None:
        with np.load(path) as z:
            n = len(self.net.weights)
            self.net = Mlp([z[f"w{i}"] for i in range(n)], [z[f"b{i}"] for i in range(n)], float(z["slope"]))
            self.estimate = z["estimate"].copy()
            self.lam = float(z["lam"])
            if self.canonical:
                self.assignment = z["assignment"].astype(np.intp)


def loss_rec(problem: ReconstructionProblem) -> float:
    resid = problem.op.forward(problem.reconstruct()) - problem.observed
    return float(np.sum(resid * resid))


def loss_cae(problem: ReconstructionProblem, noise: np.ndarray | None = None) -> float:
    """CAE loss; draws fresh noise from the problem's sampler unless given."""
    if noise is None:
        noise = problem.draw_noise()
    c = problem.canonical_patches()
    out, _ = forward_cached(problem.net, c + noise)
    resid = c - out
    return float(np.sum(resid * resid))


@dataclass
class Evaluation:
    loss_rec: float
    loss_cae: float
    grad_x: np.ndarray
    grad_theta: Gradients
    image: np.ndarray


def evaluate(problem: ReconstructionProblem, noise: np.ndarray, lam: float | None = None) -> Evaluation:
    """Both losses and the gradient of ``L_rec + lam * L_cae`` w.r.t. ``X`` and weights.

    The assignment is treated as constant; ``noise`` is the CAE corruption.
    """
    lam = problem.lam if lam is None else lam
    grid, counts, op = problem.grid, problem.counts, problem.op
    c = problem.canonical_patches()

    out, cache = forward_cached(problem.net, c)
    image = patches.aggregate(problem.from_canonical(out), grid, counts)
    resid = op.forward(image) - problem.observed
    l_rec = float(np.sum(resid * resid))
    g_img = op.adjoint(2.0 * resid)
    g_out = problem.to_canonical(patches.aggregate_adjoint(g_img, grid, counts))
    g_rec = backprop(problem.net, cache, g_out)

    out_n, cache_n = forward_cached(problem.net, c + noise)
    resid_n = out_n - c
    l_cae = float(np.sum(resid_n * resid_n))
    g_cae = backprop(problem.net, cache_n, 2.0 * lam * resid_n)
    # c appears both as target and (noised) input
    g_c = g_rec.input + g_cae.input - 2.0 * lam * resid_n
    grad_x = patches.extract_adjoint(problem.from_canonical(g_c), grid)

    grad_theta = Gradients(
        [a + b for a, b in zip(g_rec.weights, g_cae.weights)],
        [a + b for a, b in zip(g_rec.biases, g_cae.biases)],
    )
    return Evaluation(l_rec, l_cae, grad_x, grad_theta, image)


class Optimizer:
    """Separate Adam states for the image and the network weights.

    Both learning rates decay geometrically so that after ``max_iters``
    steps they have shrunk by ``lr_final_ratio``.
    """

    def __init__(self, config: TrainConfig):
        self.config = config
        self.x = AdamState(lr=config.lr_x)
        self.theta = AdamState(lr=config.lr_theta)

    def anneal(self, iteration: int) -> None:
        c = self.config
        if c.lr_final_ratio == 1.0:
            return
        scale = c.lr_final_ratio ** (iteration / max(c.max_iters - 1, 1))
        self.x.lr = c.lr_x * scale
        self.theta.lr = c.lr_theta * scale


def step(problem: ReconstructionProblem, config: TrainConfig, optimizer: Optimizer,
         iteration: int = 0, reference=None) -> TraceRecord:
    """One simultaneous gradient step on ``X`` and the weights.

    The returned record holds the losses of the state *before* the update.
    """
    optimizer.anneal(iteration)
    ev = evaluate(problem, problem.draw_noise())
    if not (np.isfinite(ev.loss_rec) and np.isfinite(ev.loss_cae)):
        raise FloatingPointError(
            f"non-finite loss at iteration {iteration}: L_rec={ev.loss_rec}, L_cae={ev.loss_cae}, lam={problem.lam}"
        )
    score = psnr(reference, ev.image) if reference is not None else float("nan")
    rec = TraceRecord(iteration, ev.loss_rec, ev.loss_cae, problem.lam, score)
    if optimizer.config.lr_x > 0:
        optimizer.x.update([problem.estimate], [ev.grad_x])
    if optimizer.config.lr_theta > 0:
        optimizer.theta.update(problem.net.params(), ev.grad_theta.params())
    return rec


def adjust_lambda(trace: TrainTrace, config: TrainConfig, lam: float | None = None) -> float:
    """Steer the share ``L_cae / (L_rec + L_cae)`` toward ``target_ratio``.

    ``lam <- lam * exp(rate * (share - target))``, clipped to the configured
    bounds: a CAE term that dominates is weighted up so it gets reduced.
    """
    if not trace.records:
        raise ValueError("trace is empty")
    last = trace.records[-1]
    lam = last.lam if lam is None else lam
    total = last.loss_rec + last.loss_cae
    share = last.loss_cae / total if total > 0 else config.target_ratio
    lam = lam * np.exp(config.lambda_rate * (share - config.target_ratio))
    return float(np.clip(lam, config.lambda_min, config.lambda_max))


def run(problem: ReconstructionProblem, config: TrainConfig, reference=None,
        callback=None) -> tuple[np.ndarray, TrainTrace]:
    """Alternate assignment refreshes and joint gradient steps.

    The assignment is refreshed before iteration 0 and then every
    ``assign_every`` iterations. With ``config.early_stop`` the loop ends once
    ``L_rec`` has stayed at or below ``config.noise_energy`` for ``patience``
    consecutive iterations. The assignment is refreshed once more at the end
    and the model image ``agg(P^-1 A(P H(X)))`` is returned.
    """
    trace = TrainTrace()
    optimizer = Optimizer(config)
    reference = None if reference is None else as_image(reference)
    problem.lam = float(np.clip(problem.lam, config.lambda_min, config.lambda_max))
    below = 0
    for it in range(config.max_iters):
        if it % config.assign_every == 0:
            problem.refresh_assignment()
        rec = step(problem, config, optimizer, it, reference)
        trace.append(rec)
        problem.lam = adjust_lambda(trace, config, problem.lam)
        if callback is not None:
            callback(problem, rec)
        if config.early_stop:
            below = below + 1 if rec.loss_rec <= config.noise_energy else 0
            if below >= config.patience:
                log.info("early stop at iteration %d (L_rec=%.4g)", it, rec.loss_rec)
                trace.stopped_early = True
                break
    problem.refresh_assignment()
    return problem.reconstruct(), trace


def config_field_names() -> list[str]:
    return [f.name for f in fields(TrainConfig)]
