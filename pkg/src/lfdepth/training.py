"""Joint unsupervised training of the disparity and occlusion networks."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .autodiff import Graph, Tensor, constant
from .checkpoint import join_namespaces, save_checkpoint, split_namespace
from .dispnet import DispNet, warp_horizontal
from .lightfield import combination_views, enumerate_combinations, rotate_inputs
from .losses import ForwardBundle, LossWeights, loss_full
from .occlusion import ConfidencePair, OccNet, predict_confidence, reconstruct_center

CURVE_FIELDS = ("epoch", "lr", "l_full", "l_wpm", "l_rec", "l_ssim", "l_smd", "l_smo")


class TrainingDivergedError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    epochs: int = 60
    lr: float = 1e-3
    lr_decay: float = 0.8
    lr_decay_every: int = 50
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    crop: int = 48
    offsets: tuple = (1,)
    seed: int = 0
    checkpoint_every: int = 50

    def validate_against(self, coarse_samples):
        max_mag = max(abs(coarse_samples.s_min), abs(coarse_samples.s_max))
        if self.crop < 2 * max_mag:
            raise ValueError(
                f"crop size {self.crop} must be >= twice the max coarse sample magnitude "
                f"({max_mag}) so warps stay mostly in-crop")


def lr_at(cfg: TrainConfig, epoch: int) -> float:
    return cfg.lr * cfg.lr_decay ** (epoch // cfg.lr_decay_every)


class Adam:
    """Standard Adam over a name->Tensor dict; updates in sorted-name order."""

    def __init__(self, params: dict, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0
        self.m = {k: np.zeros_like(v.data) for k, v in params.items()}
        self.v = {k: np.zeros_like(v.data) for k, v in params.items()}

    def step(self, lr: float):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        bc1 = 1.0 - b1 ** self.t
        bc2 = 1.0 - b2 ** self.t
        for name in sorted(self.params):
            p = self.params[name]
            if p.grad is None:
                continue
            g = p.grad.astype(np.float64)
            self.m[name] = b1 * self.m[name] + (1 - b1) * g
            self.v[name] = b2 * self.v[name] + (1 - b2) * g * g
            mhat = self.m[name] / bc1
            vhat = self.v[name] / bc2
            p.data = (p.data - (lr * mhat / (np.sqrt(vhat) + self.eps)).astype(p.data.dtype))

    def zero_grad(self):
        for p in self.params.values():
            p.grad = None


def to_chw(image: np.ndarray, dtype) -> Tensor:
    """(X, Y, C) numpy image -> constant (C, X, Y) tensor."""
    return constant(np.moveaxis(image, -1, 0).astype(dtype))


def forward_training(dispnet: DispNet, occnet: OccNet | None, i_c: Tensor, i_l: Tensor,
                     i_r: Tensor, weights: LossWeights):
    """One full forward pass; returns the loss tensor and its breakdown.

    With ``occnet=None`` the confidence pair is fixed at 0.5 (the
    no-occlusion-prediction ablation).
    """
    d_coa, d_res, d = dispnet.estimate(i_c, i_l, i_r)
    i_lc = warp_horizontal(i_l, d, +1)
    i_rc = warp_horizontal(i_r, d, -1)
    if occnet is None:
        half = constant(np.full(d.shape, 0.5, dtype=d.dtype.type))
        pair = ConfidencePair(half, half)
    else:
        pair = predict_confidence(i_lc, i_rc, d, net=occnet)
    i_rec = reconstruct_center(i_lc, i_rc, pair)
    bundle = ForwardBundle(i_c=i_c, i_lc=i_lc, i_rc=i_rc, pair=pair, i_rec=i_rec, d_tilde=d)
    if weights.coarse_weight > 0 and dispnet.config.coarse_to_fine:
        bundle.d_coa = d_coa
        bundle.i_lc_coa = warp_horizontal(i_l, d_coa, +1)
        bundle.i_rc_coa = warp_horizontal(i_r, d_coa, -1)
    return loss_full(bundle, weights)


def _crop_views(views, x0, y0, size):
    return tuple(v[x0:x0 + size, y0:y0 + size] for v in views)


def train(scenes, dispnet: DispNet, occnet: OccNet | None, cfg: TrainConfig,
          weights: LossWeights | None = None, out_dir=None):
    """Joint training loop; returns the per-epoch loss history.

    Each epoch shuffles the scenes and takes one Adam step per scene on a
    random crop and a random view combination. Emits the loss curve CSV and
    initial/periodic/final checkpoints when ``out_dir`` is given.
    """
    weights = weights or LossWeights()
    cfg.validate_against(dispnet.config.coarse)
    rng = np.random.default_rng(cfg.seed)
    params = {f"dispnet/{k}": v for k, v in dispnet.params.tensors.items()}
    if occnet is not None:
        params.update({f"occnet/{k}": v for k, v in occnet.params.tensors.items()})
    optim = Adam(params, cfg.beta1, cfg.beta2, cfg.eps)

    out_dir = Path(out_dir) if out_dir is not None else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        _save(out_dir / "ckpt_epoch0000.lfdw", dispnet, occnet)

    dtype = dispnet.config.dtype
    history = []
    for epoch in range(cfg.epochs):
        lr = lr_at(cfg, epoch)
        sums = {k: 0.0 for k in CURVE_FIELDS[2:]}
        order = rng.permutation(len(scenes))
        for si in order:
            lf = scenes[si]
            combos = enumerate_combinations(lf, cfg.offsets)
            combo = combos[int(rng.integers(len(combos)))]
            x_max, y_max = lf.spatial_shape
            if cfg.crop > min(x_max, y_max):
                raise ValueError(f"crop {cfg.crop} exceeds scene resolution {lf.spatial_shape}")
            x0 = int(rng.integers(0, x_max - cfg.crop + 1))
            y0 = int(rng.integers(0, y_max - cfg.crop + 1))
            left, center, right = _crop_views(combination_views(lf, combo), x0, y0, cfg.crop)
            left, center, right = rotate_inputs((left, center, right), combo.orientation)

            optim.zero_grad()
            graph = Graph()
            with graph:
                loss, terms = forward_training(dispnet, occnet,
                                               to_chw(center, dtype),
                                               to_chw(left, dtype),
                                               to_chw(right, dtype), weights)
            if not np.isfinite(loss.item()):
                raise TrainingDivergedError(
                    f"loss became non-finite at epoch {epoch}, scene {si}: {terms}")
            graph.backward(loss)
            optim.step(lr)
            for k in sums:
                sums[k] += terms.get(k, 0.0)
        row = {"epoch": epoch, "lr": lr}
        row.update({k: v / len(scenes) for k, v in sums.items()})
        history.append(row)
        if out_dir is not None and (epoch + 1) % cfg.checkpoint_every == 0:
            _save(out_dir / f"ckpt_epoch{epoch + 1:04d}.lfdw", dispnet, occnet)

    if out_dir is not None:
        _save(out_dir / "final.lfdw", dispnet, occnet)
        write_loss_curve(out_dir / "loss_curve.csv", history)
    return history


def _save(path, dispnet, occnet):
    namespaces = {"dispnet": dispnet.state_dict()}
    if occnet is not None:
        namespaces["occnet"] = occnet.state_dict()
    save_checkpoint(path, join_namespaces(**namespaces))


def load_networks(path, dispnet: DispNet, occnet: OccNet | None = None):
    state = None
    from .checkpoint import load_checkpoint
    state = load_checkpoint(path)
    dispnet.load_state_dict(split_namespace(state, "dispnet"))
    if occnet is not None:
        occ = split_namespace(state, "occnet")
        if occ:
            occnet.load_state_dict(occ)


def write_loss_curve(path, history):
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=CURVE_FIELDS)
        writer.writeheader()
        for row in history:
            writer.writerow({k: row[k] for k in CURVE_FIELDS})
