"""Multi-view datasets: synthetic generation, noise-view injection, MVDS files.

MVDS layout (all integers little-endian uint64, floats little-endian float64)::

    b"MVDS"                      magic
    version, V, N, k_hint
    width_1 ... width_V
    has_labels
    manifest_len, manifest_len bytes of UTF-8 JSON  ({"names": [...], "notes": "..."})
    V blocks of N*width_v floats, row-major
    N label ids                  (only when has_labels == 1)

``k_hint == 0`` means no hint.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

MAGIC = b"MVDS"
VERSION = 1
_U64 = np.dtype("<u8")
_F64 = np.dtype("<f8")


class DatasetFormatError(ValueError):
    """Bad magic bytes or an otherwise unparseable header."""


class DatasetVersionError(DatasetFormatError):
    pass


class TruncatedPayloadError(DatasetFormatError):
    pass


class ManifestMismatchError(DatasetFormatError):
    """Manifest and header/payload disagree."""


@dataclass
class MultiViewDataset:
    views: List[np.ndarray]
    labels: Optional[np.ndarray] = None
    names: Optional[List[str]] = None
    k_hint: int = 0
    notes: str = ""

    def __post_init__(self):
        self.views = [np.ascontiguousarray(v, dtype=np.float64) for v in self.views]
        if not self.views:
            raise ValueError("a dataset needs at least one view")
        n = self.views[0].shape[0]
        for i, v in enumerate(self.views):
            if v.ndim != 2:
                raise ValueError(f"view {i} is not a matrix")
            if v.shape[0] != n:
                raise ValueError(f"view {i} has {v.shape[0]} rows, expected {n}")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if self.labels.shape != (n,):
                raise ValueError("labels must have one entry per sample")
        if self.names is None:
            self.names = [f"view{i}" for i in range(len(self.views))]
        if len(self.names) != len(self.views):
            raise ManifestMismatchError(
                f"{len(self.names)} names for {len(self.views)} views")

    @property
    def n_samples(self) -> int:
        return self.views[0].shape[0]

    @property
    def n_views(self) -> int:
        return len(self.views)

    @property
    def widths(self) -> List[int]:
        return [v.shape[1] for v in self.views]

    def select_views(self, indices: Sequence[int]) -> "MultiViewDataset":
        return MultiViewDataset([self.views[i] for i in indices], self.labels,
                                [self.names[i] for i in indices], self.k_hint, self.notes)

    def manifest_text(self) -> str:
        lines = [f"format: MVDS v{VERSION}",
                 f"samples: {self.n_samples}",
                 f"views: {self.n_views}",
                 f"k_hint: {self.k_hint or 'none'}",
                 f"labels: {'present' if self.labels is not None else 'absent'}"]
        for name, w in zip(self.names, self.widths):
            lines.append(f"  {name}: width {w}")
        if self.notes:
            lines.append(f"notes: {self.notes}")
        return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# synthetic data

@dataclass
class ViewSpec:
    width: int
    kind: str = "informative"  # informative | noisy
    spacing: float = 3.0
    std: float = 1.0

    def __post_init__(self):
        if self.kind not in ("informative", "noisy"):
            raise ValueError(f"unknown view kind {self.kind!r}")
        if self.width < 1:
            raise ValueError("view width must be positive")
        if self.kind == "informative" and (self.spacing <= 0 or self.std < 0):
            raise ValueError("informative views need spacing > 0 and std >= 0")


@dataclass
class SyntheticSpec:
    n: int
    k: int
    views: List[ViewSpec] = field(default_factory=list)
    seed: int = 0


def _cluster_means(k: int, width: int, spacing: float, rng) -> np.ndarray:
    if width >= k:
        # orthonormal directions: every pair of means sits spacing*sqrt(2) apart
        q, _ = np.linalg.qr(rng.standard_normal((width, k)))
        return spacing * q.T
    return spacing * rng.standard_normal((k, width))


def generate_synthetic(spec: SyntheticSpec) -> MultiViewDataset:
    """Gaussian-mixture views sharing one latent cluster per sample, plus
    optional uniform-noise views carrying no label signal."""
    if spec.k < 1 or spec.n < spec.k:
        raise ValueError(f"need N >= K, got N={spec.n}, K={spec.k}")
    if not spec.views:
        raise ValueError("spec lists no views")
    rng = np.random.default_rng(spec.seed)
    labels = np.arange(spec.n) % spec.k
    views, names = [], []
    for i, vs in enumerate(spec.views):
        if vs.kind == "informative":
            means = _cluster_means(spec.k, vs.width, vs.spacing, rng)
            x = means[labels] + vs.std * rng.standard_normal((spec.n, vs.width))
            names.append(f"inf{i}")
        else:
            x = rng.uniform(0.0, 1.0, size=(spec.n, vs.width))
            names.append(f"noise{i}")
        views.append(x)
    notes = "synthetic seed=%d; " % spec.seed + ", ".join(
        f"{v.kind}:{v.width}" + (f"(spacing={v.spacing},std={v.std})"
                                 if v.kind == "informative" else "")
        for v in spec.views)
    return MultiViewDataset(views, labels, names, spec.k, notes)


def inject_noise_view(dataset: MultiViewDataset, width: Optional[int] = None,
                      seed: int = 0) -> MultiViewDataset:
    """Append one view of i.i.d. uniform [0, 1] entries.

    ``width`` defaults to the mean of the existing view widths.
    """
    if width is None:
        width = int(round(float(np.mean(dataset.widths))))
    if width < 1:
        raise ValueError("noise view width must be >= 1")
    rng = np.random.default_rng(seed)
    noise = rng.uniform(0.0, 1.0, size=(dataset.n_samples, width))
    name = f"noise{dataset.n_views}"
    notes = (dataset.notes + "; " if dataset.notes else "") + \
        f"injected noise view width={width} seed={seed}"
    return MultiViewDataset(list(dataset.views) + [noise], dataset.labels,
                            list(dataset.names) + [name], dataset.k_hint, notes)


def normalize(dataset: MultiViewDataset) -> MultiViewDataset:
    """Per-feature min-max scaling to [0, 1]; constant features become 0."""
    out = []
    for i, x in enumerate(dataset.views):
        if np.isnan(x).any():
            raise ValueError(f"view {i} contains NaN")
        if not np.isfinite(x).all():
            raise ValueError(f"view {i} contains infinite values")
        lo = x.min(axis=0)
        span = x.max(axis=0) - lo
        safe = np.where(span > 0, span, 1.0)
        out.append(np.where(span > 0, (x - lo) / safe, 0.0))
    return MultiViewDataset(out, dataset.labels, list(dataset.names),
                            dataset.k_hint, dataset.notes)


# --------------------------------------------------------------------------
# MVDS files

def to_bytes(dataset: MultiViewDataset) -> bytes:
    has_labels = dataset.labels is not None
    header = [VERSION, dataset.n_views, dataset.n_samples, dataset.k_hint,
              *dataset.widths, int(has_labels)]
    manifest = json.dumps({"names": dataset.names, "notes": dataset.notes},
                          sort_keys=True).encode("utf-8")
    parts = [MAGIC, np.asarray(header, dtype=_U64).tobytes(),
             np.asarray([len(manifest)], dtype=_U64).tobytes(), manifest]
    parts.extend(v.astype(_F64).tobytes(order="C") for v in dataset.views)
    if has_labels:
        parts.append(dataset.labels.astype(_U64).tobytes())
    return b"".join(parts)


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.buf):
            raise TruncatedPayloadError(
                f"file ends inside {what}: need {n} bytes at offset {self.pos}, "
                f"only {len(self.buf) - self.pos} left")
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def u64(self, count: int, what: str) -> np.ndarray:
        return np.frombuffer(self.take(8 * count, what), dtype=_U64).astype(np.int64)


def from_bytes(buf: bytes) -> MultiViewDataset:
    r = _Reader(buf)
    if len(buf) < 4 or buf[:4] != MAGIC:
        raise DatasetFormatError("not an MVDS file (bad magic bytes)")
    r.pos = 4
    version, v, n, k_hint = r.u64(4, "header")
    if version != VERSION:
        raise DatasetVersionError(f"unsupported MVDS version {version}, expected {VERSION}")
    widths = r.u64(int(v), "view widths")
    (has_labels,) = r.u64(1, "labels flag")
    if has_labels not in (0, 1):
        raise DatasetFormatError(f"bad labels flag {has_labels}")
    (mlen,) = r.u64(1, "manifest length")
    try:
        manifest = json.loads(r.take(int(mlen), "manifest").decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DatasetFormatError(f"unreadable manifest: {exc}") from None
    names = manifest.get("names")
    if not isinstance(names, list) or len(names) != v:
        raise ManifestMismatchError(
            f"manifest names {names!r} do not match header view count {v}")
    views = []
    for i, w in enumerate(widths):
        raw = r.take(8 * int(n) * int(w), f"view {i} payload")
        views.append(np.frombuffer(raw, dtype=_F64).reshape(int(n), int(w)).astype(np.float64))
    labels = None
    if has_labels:
        labels = r.u64(int(n), "labels")
    if r.pos != len(buf):
        raise ManifestMismatchError(
            f"{len(buf) - r.pos} trailing bytes after payload; widths disagree with data")
    return MultiViewDataset(views, labels, [str(s) for s in names], int(k_hint),
                            str(manifest.get("notes", "")))


def save(dataset: MultiViewDataset, path) -> None:
    Path(path).write_bytes(to_bytes(dataset))


def load(path) -> MultiViewDataset:
    return from_bytes(Path(path).read_bytes())
