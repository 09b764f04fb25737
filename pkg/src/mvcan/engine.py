"""Noise-robust multi-view clustering with per-view decoupled autoencoders.

Training alternates two levels:

* target level: concatenate the per-view embeddings scaled by per-view
  factors, run a fresh K-means, build robust soft labels, and refresh the
  factors as ``exp(NMI)`` between each view's labels and the fused labels.
  The sharpened fused labels become the learning target ``T``.  Nothing
  trainable is touched here.
* representation level: each view matches ``T`` to its own soft labels with
  a permutation and then trains its own encoder, decoder and centroids on
  ``reconstruction + lam * ||T A - Y||^2`` with its own Adam optimizer.
"""
from __future__ import annotations

import hashlib
import json
import time
from dataclasses import asdict, dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import clustering as cl
from . import nn
from .data import MultiViewDataset

ABLATION_MODES = ("full", "no-matching", "shared-params", "rec-only", "clu-only",
                  "kmeans-concat")


class NotFittedError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    n_clusters: int
    lam: float = 100.0
    t1: int = 2
    t2: int = 100
    epochs: int = 200
    pretrain_epochs: int = 50
    batch_size: int = 256
    lr: float = 1e-4
    seed: int = 0
    embed_dim: int = 10
    hidden: Tuple[int, ...] = (500, 500, 2000)
    kmeans_init: int = 20
    # ablation switches; "full" leaves all of them at their defaults
    use_matching: bool = True
    shared_centroids: bool = False
    use_reconstruction: bool = True

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)
        self.validate()

    def validate(self) -> None:
        if self.n_clusters < 2:
            raise ValueError("n_clusters must be >= 2")
        if not self.lam >= 0:
            raise ValueError("lam must be non-negative")
        for name in ("t1", "t2", "epochs", "batch_size", "embed_dim", "kmeans_init"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.pretrain_epochs < 0:
            raise ValueError("pretrain_epochs must be >= 0")
        if not self.lr > 0:
            raise ValueError("lr must be positive")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        return cls(**d)


@dataclass
class ViewState:
    encoder: nn.MlpParams
    decoder: nn.MlpParams
    centroids: np.ndarray
    optimizer: nn.AdamState

    def parameters(self) -> List[np.ndarray]:
        return nn.flatten_params(self.encoder) + nn.flatten_params(self.decoder) + [self.centroids]

    def with_parameters(self, arrays: Sequence[np.ndarray],
                        optimizer: Optional[nn.AdamState] = None) -> "ViewState":
        ne = 2 * len(self.encoder)
        nd = 2 * len(self.decoder)
        return ViewState(nn.unflatten_params(self.encoder, arrays[:ne]),
                         nn.unflatten_params(self.decoder, arrays[ne:ne + nd]),
                         arrays[ne + nd],
                         optimizer if optimizer is not None else self.optimizer)

    def embed(self, x: np.ndarray) -> np.ndarray:
        return nn.encode(x, self.encoder)

    def soft_labels(self, x: np.ndarray) -> np.ndarray:
        return cl.soft_assign(self.embed(x), self.centroids)


@dataclass
class ScalingState:
    t: int
    weights: np.ndarray  # factors that produced z / y below
    next_weights: np.ndarray  # latest factor update, not yet consumed
    z: np.ndarray
    centroids: np.ndarray
    y: np.ndarray
    weight_history: List[List[float]] = field(default_factory=list)


@dataclass
class TrainReport:
    mode: str = "full"
    records: List[dict] = field(default_factory=list)
    cycles: List[dict] = field(default_factory=list)
    weight_trace: List[List[float]] = field(default_factory=list)
    labels: Optional[np.ndarray] = None
    metrics: Dict[str, float] = field(default_factory=dict)
    wall_time: float = 0.0

    def to_lines(self) -> List[str]:
        """Line-delimited JSON records; wall time is left out so reruns compare equal."""
        out = [json.dumps({"type": "epoch", **r}, sort_keys=True) for r in self.records]
        out += [json.dumps({"type": "cycle", **c}, sort_keys=True) for c in self.cycles]
        out.append(json.dumps({"type": "final", "mode": self.mode,
                               "weight_trace": self.weight_trace,
                               "metrics": self.metrics}, sort_keys=True))
        return out

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(self.to_lines()) + "\n")


@dataclass
class MvcanModel:
    config: TrainConfig
    views: List[ViewState]
    scaling: Optional[ScalingState] = None
    feature_min: Optional[List[np.ndarray]] = None
    feature_span: Optional[List[np.ndarray]] = None

    def prepare(self, dataset: MultiViewDataset) -> List[np.ndarray]:
        """Apply the training-time min-max scaling to ``dataset``."""
        if dataset.n_views != len(self.views):
            raise ValueError(f"model has {len(self.views)} views, dataset has {dataset.n_views}")
        expected = [v.encoder[0].fan_in for v in self.views]
        if dataset.widths != expected:
            raise ValueError(f"view widths differ: expected {expected}, got {dataset.widths}")
        if self.feature_min is None:
            return list(dataset.views)
        return [apply_minmax(x, lo, span)
                for x, lo, span in zip(dataset.views, self.feature_min, self.feature_span)]


# --------------------------------------------------------------------------
# helpers

def minmax_stats(views: Sequence[np.ndarray]):
    los, spans = [], []
    for i, x in enumerate(views):
        if not np.isfinite(x).all():
            raise ValueError(f"view {i} contains NaN or infinite values")
        lo = x.min(axis=0)
        los.append(lo)
        spans.append(x.max(axis=0) - lo)
    return los, spans


def apply_minmax(x: np.ndarray, lo: np.ndarray, span: np.ndarray) -> np.ndarray:
    safe = np.where(span > 0, span, 1.0)
    return np.where(span > 0, (x - lo) / safe, 0.0)


def params_checksum(views: Sequence[ViewState]) -> str:
    h = hashlib.sha256()
    for view in views:
        for p in view.parameters():
            h.update(np.ascontiguousarray(p, dtype="<f8").tobytes())
    return h.hexdigest()


def epoch_order(seed: int, epoch: int, n: int) -> np.ndarray:
    return np.random.default_rng([seed, epoch]).permutation(n)


def _as_inputs(dataset) -> List[np.ndarray]:
    if isinstance(dataset, MultiViewDataset):
        return dataset.views
    return list(dataset)


def build_views(widths: Sequence[int], config: TrainConfig) -> List[ViewState]:
    """Fresh, independently initialised per-view models."""
    views = []
    for v, width in enumerate(widths):
        rng = np.random.default_rng([config.seed, 1000 + v])
        enc = nn.init_mlp(nn.encoder_widths(width, config.hidden, config.embed_dim), rng)
        dec = nn.init_mlp(nn.decoder_widths(width, config.hidden, config.embed_dim), rng)
        mu = np.zeros((config.n_clusters, config.embed_dim))
        params = nn.flatten_params(enc) + nn.flatten_params(dec) + [mu]
        views.append(ViewState(enc, dec, mu, nn.AdamState.zeros_like(params, lr=config.lr)))
    return views


# --------------------------------------------------------------------------
# losses

def view_loss_and_grads(view: ViewState, x: np.ndarray, target: Optional[np.ndarray],
                        lam: float, use_reconstruction: bool = True):
    """Loss ``rec + lam * ||target - Y||^2`` on one batch of one view.

    ``target`` is the matched target rows ``(T A)[batch]``; pass ``None`` (or
    ``lam == 0``) to train on reconstruction only.  Returns
    ``(loss_rec, loss_clu, grads)`` with ``grads`` aligned to
    ``view.parameters()``.
    """
    z, enc_cache = nn.forward(x, view.encoder)
    zero_dec = [np.zeros_like(p) for p in nn.flatten_params(view.decoder)]
    g_z = np.zeros_like(z)
    loss_rec = 0.0
    if use_reconstruction:
        x_hat, dec_cache = nn.forward(z, view.decoder)
        loss_rec = nn.reconstruction_loss(x, x_hat)
        dec_grads, g_z = nn.backward(dec_cache, view.decoder,
                                     nn.reconstruction_grad(x, x_hat))
        dec_flat = nn.flatten_grads(dec_grads)
    else:
        dec_flat = zero_dec
    loss_clu = 0.0
    g_mu = np.zeros_like(view.centroids)
    if target is not None and lam != 0.0:
        y = cl.soft_assign(z, view.centroids)
        diff = y - target
        loss_clu = float(np.sum(diff * diff))
        g_zc, g_mu = cl.soft_assign_backward(z, view.centroids, 2.0 * lam * diff)
        g_z = g_z + g_zc
    enc_grads, _ = nn.backward(enc_cache, view.encoder, g_z)
    return loss_rec, loss_clu, nn.flatten_grads(enc_grads) + dec_flat + [g_mu]


def clustering_loss(view_index: int, t: np.ndarray, a: np.ndarray,
                    views: Sequence[ViewState], dataset, rows=None):
    """Per-view clustering term ``||T A - Y^v||_F^2`` and its gradients.

    Gradients are returned for the encoder and the centroids of view
    ``view_index`` only (as arrays aligned with ``parameters()``, decoder
    entries zero).
    """
    view = views[view_index]
    x = _as_inputs(dataset)[view_index]
    if a.shape != (t.shape[1], t.shape[1]):
        raise ValueError(f"matching has shape {a.shape}, target has {t.shape[1]} clusters")
    if t.shape[0] != x.shape[0]:
        raise ValueError("target rows do not match the dataset")
    target = t @ a
    if rows is not None:
        x, target = x[rows], target[rows]
    _, loss, grads = view_loss_and_grads(view, x, target, 1.0, use_reconstruction=False)
    return loss, grads


# --------------------------------------------------------------------------
# training blocks

def _sync_shared(views: List[ViewState], grads: List[List[np.ndarray]]) -> None:
    total = sum(g[-1] for g in grads)
    for g in grads:
        g[-1] = total


def _train_epochs(views: List[ViewState], xs: List[np.ndarray], targets, config: TrainConfig,
                  n_epochs: int, epoch_offset: int, lam: float, phase: str,
                  use_reconstruction: bool = True):
    views = list(views)
    n = xs[0].shape[0]
    bs = min(config.batch_size, n)
    records = []
    for e in range(n_epochs):
        epoch = epoch_offset + e
        order = epoch_order(config.seed, epoch, n)
        rec_sum = np.zeros(len(views))
        clu_sum = np.zeros(len(views))
        for start in range(0, n, bs):
            idx = order[start:start + bs]
            batch_grads = []
            for v, view in enumerate(views):
                tgt = None if targets is None else targets[v][idx]
                lr_, lc_, g = view_loss_and_grads(view, xs[v][idx], tgt, lam,
                                                  use_reconstruction)
                rec_sum[v] += lr_
                clu_sum[v] += lc_
                batch_grads.append(g)
            if config.shared_centroids and targets is not None and lam != 0.0:
                _sync_shared(views, batch_grads)
            for v, view in enumerate(views):
                new_p, new_opt = nn.adam_step(view.parameters(), batch_grads[v], view.optimizer)
                views[v] = view.with_parameters(new_p, new_opt)
        for v in range(len(views)):
            records.append({"phase": phase, "epoch": epoch, "view": v,
                            "loss_rec": float(rec_sum[v]), "loss_clu": float(clu_sum[v]),
                            "loss_total": float(rec_sum[v] + lam * clu_sum[v])})
    return views, records


def pretrain(dataset, views: List[ViewState], config: TrainConfig,
             epochs: Optional[int] = None, epoch_offset: int = 0):
    """Reconstruction-only training; each view steps its own optimizer."""
    xs = _as_inputs(dataset)
    _check_widths(xs, views)
    n_epochs = config.pretrain_epochs if epochs is None else epochs
    return _train_epochs(views, xs, None, config, n_epochs, epoch_offset, 0.0, "pretrain")


def _check_widths(xs, views):
    if len(xs) != len(views):
        raise ValueError(f"{len(xs)} data views for {len(views)} models")
    for v, (x, view) in enumerate(zip(xs, views)):
        if x.shape[1] != view.encoder[0].fan_in:
            raise nn.ShapeError(
                f"view {v}: data width {x.shape[1]}, encoder expects {view.encoder[0].fan_in}")


def init_centroids(views: List[ViewState], dataset, config: TrainConfig) -> List[ViewState]:
    """K-means centroids on each view's embedding (or one shared set)."""
    xs = _as_inputs(dataset)
    zs = [view.embed(x) for view, x in zip(views, xs)]
    if config.shared_centroids:
        c, _, _ = cl.kmeans(np.vstack(zs), config.n_clusters, config.seed,
                            n_init=config.kmeans_init)
        centers = [c] * len(views)
    else:
        centers = [cl.kmeans(z, config.n_clusters, config.seed, n_init=config.kmeans_init)[0]
                   for z in zs]
    return [replace(view, centroids=c.copy()) for view, c in zip(views, centers)]


def scaling_update(view_labels: Sequence[np.ndarray], fused: np.ndarray) -> np.ndarray:
    """``exp(NMI)`` between each view's hard labels and the fused hard labels."""
    fused_hard = cl.harden(fused)
    return np.exp([cl.nmi(cl.harden(y), fused_hard) for y in view_labels])


def fuse(zs: Sequence[np.ndarray], weights) -> np.ndarray:
    return np.hstack([w * z for w, z in zip(weights, zs)])


def t_level_iterate(views: Sequence[ViewState], dataset, config: TrainConfig,
                    t1: Optional[int] = None, seed: Optional[int] = None):
    """Non-parametric target construction; returns ``(ScalingState, T)``."""
    xs = _as_inputs(dataset)
    t1 = config.t1 if t1 is None else t1
    if t1 < 1:
        raise ValueError("t1 must be >= 1")
    seed = config.seed if seed is None else seed
    zs = [view.embed(x) for view, x in zip(views, xs)]
    ys = [cl.soft_assign(z, view.centroids) for view, z in zip(views, zs)]
    weights = np.ones(len(views))
    history = []
    for t in range(t1):
        if t > 0:
            weights = next_weights
        zt = fuse(zs, weights)
        centers, _, _ = cl.kmeans(zt, config.n_clusters, seed, n_init=config.kmeans_init)
        yt = cl.soft_assign(zt, centers)
        next_weights = scaling_update(ys, yt)
        history.append(next_weights.tolist())
    state = ScalingState(t1, weights, next_weights, zt, centers, yt, history)
    return state, cl.sharpen_target(yt)


def compute_view_matchings(t: np.ndarray, views: Sequence[ViewState], dataset) -> List[np.ndarray]:
    xs = _as_inputs(dataset)
    return [cl.match_labels(t, view.soft_labels(x)) for view, x in zip(views, xs)]


def matching_objectives(t, matchings, views, dataset) -> Tuple[float, float]:
    """(sum_v ||T A^v - Y^v||^2, sum_v ||T - Y^v||^2)."""
    xs = _as_inputs(dataset)
    lhs = rhs = 0.0
    for a, view, x in zip(matchings, views, xs):
        y = view.soft_labels(x)
        lhs += float(np.sum((t @ a - y) ** 2))
        rhs += float(np.sum((t - y) ** 2))
    return lhs, rhs


def r_level_train(views: List[ViewState], dataset, t: np.ndarray,
                  matchings: Sequence[np.ndarray], config: TrainConfig,
                  t2: Optional[int] = None, epoch_offset: int = 0):
    """Mini-batch Adam on ``rec + lam * clu`` with ``T`` and the matchings frozen."""
    xs = _as_inputs(dataset)
    _check_widths(xs, views)
    targets = [t @ a for a in matchings]
    n_epochs = config.t2 if t2 is None else t2
    return _train_epochs(views, xs, targets, config, n_epochs, epoch_offset, config.lam,
                         "train", config.use_reconstruction)


# --------------------------------------------------------------------------
# end to end

def _metrics(labels, truth) -> Dict[str, float]:
    if truth is None:
        return {}
    return {"acc": cl.accuracy(labels, truth), "nmi": cl.nmi(labels, truth),
            "ari": cl.ari(labels, truth)}


def fit(dataset: MultiViewDataset, config: TrainConfig, normalize: bool = True,
        mode: str = "full") -> Tuple[MvcanModel, TrainReport]:
    """Pretrain, initialise centroids, then alternate target/representation
    levels until ``config.epochs`` representation epochs have run."""
    start = time.perf_counter()
    if dataset.n_samples < config.n_clusters:
        raise ValueError(f"need at least K={config.n_clusters} samples")
    if normalize:
        lo, span = minmax_stats(dataset.views)
        xs = [apply_minmax(x, a, b) for x, a, b in zip(dataset.views, lo, span)]
    else:
        lo = span = None
        xs = list(dataset.views)
    report = TrainReport(mode=mode)
    views = build_views([x.shape[1] for x in xs], config)
    views, recs = pretrain(xs, views, config)
    report.records += recs
    views = init_centroids(views, xs, config)

    offset = config.pretrain_epochs
    e = cycle = 0
    while e < config.epochs:
        before = params_checksum(views)
        state, target = t_level_iterate(views, xs, config, seed=config.seed + e)
        after = params_checksum(views)
        if config.use_matching:
            matchings = compute_view_matchings(target, views, xs)
        else:
            matchings = [np.eye(config.n_clusters) for _ in views]
        lhs, rhs = matching_objectives(target, matchings, views, xs)
        report.weight_trace += state.weight_history
        report.cycles.append({"cycle": cycle, "epoch": e,
                              "weights": state.weights.tolist(),
                              "weight_updates": state.weight_history,
                              "matched_loss": lhs, "unmatched_loss": rhs,
                              "checksum_before": before, "checksum_after": after})
        n_ep = min(config.t2, config.epochs - e)
        views, recs = r_level_train(views, xs, target, matchings, config, n_ep,
                                    epoch_offset=offset + e)
        report.records += recs
        e += n_ep
        cycle += 1

    # refresh the fused labels with the final parameters so predict() agrees
    before = params_checksum(views)
    state, _ = t_level_iterate(views, xs, config, seed=config.seed + e)
    report.weight_trace += state.weight_history
    report.cycles.append({"cycle": cycle, "epoch": e, "weights": state.weights.tolist(),
                          "weight_updates": state.weight_history,
                          "checksum_before": before,
                          "checksum_after": params_checksum(views)})
    model = MvcanModel(config, views, state, lo, span)
    report.labels = cl.harden(state.y)
    report.metrics = _metrics(report.labels, dataset.labels)
    report.wall_time = time.perf_counter() - start
    return model, report


def predict(model: MvcanModel, dataset: MultiViewDataset) -> Tuple[np.ndarray, np.ndarray]:
    """Hard labels and fused soft labels using the stored factors and centroids."""
    if model.scaling is None:
        raise NotFittedError("model has no stored scaling state; call fit() first")
    xs = model.prepare(dataset)
    zs = [view.embed(x) for view, x in zip(model.views, xs)]
    y = cl.soft_assign(fuse(zs, model.scaling.weights), model.scaling.centroids)
    return cl.harden(y), y


def scaled_representation(model: MvcanModel, dataset: MultiViewDataset) -> np.ndarray:
    if model.scaling is None:
        raise NotFittedError("model has no stored scaling state; call fit() first")
    xs = model.prepare(dataset)
    return fuse([v.embed(x) for v, x in zip(model.views, xs)], model.scaling.weights)


def kmeans_concat(dataset: MultiViewDataset, config: TrainConfig,
                  normalize: bool = True) -> np.ndarray:
    xs = dataset.views
    if normalize:
        lo, span = minmax_stats(xs)
        xs = [apply_minmax(x, a, b) for x, a, b in zip(xs, lo, span)]
    _, labels, _ = cl.kmeans(np.hstack(xs), config.n_clusters, config.seed,
                             n_init=config.kmeans_init)
    return labels


def ablate(dataset: MultiViewDataset, config: TrainConfig, mode: str,
           normalize: bool = True) -> Tuple[Optional[MvcanModel], TrainReport]:
    """Run one variant: full, no-matching, shared-params, rec-only, clu-only
    or kmeans-concat."""
    if mode not in ABLATION_MODES:
        raise ValueError(f"unknown ablation mode {mode!r}; choose from {ABLATION_MODES}")
    if mode == "kmeans-concat":
        start = time.perf_counter()
        labels = kmeans_concat(dataset, config, normalize)
        report = TrainReport(mode=mode, labels=labels,
                             metrics=_metrics(labels, dataset.labels))
        report.wall_time = time.perf_counter() - start
        return None, report
    overrides = {
        "full": {},
        "no-matching": {"use_matching": False},
        "shared-params": {"shared_centroids": True},
        "rec-only": {"lam": 0.0},
        "clu-only": {"use_reconstruction": False},
    }[mode]
    cfg = replace(config, **overrides)
    return fit(dataset, cfg, normalize=normalize, mode=mode)
