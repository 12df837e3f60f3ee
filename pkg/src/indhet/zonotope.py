"""Zonotope volume, Gini volume and tangent-against-input-axes angles.

A panel of N firms gives N nonnegative generator vectors a_n in R^d (inputs
first, then outputs).  The zonotope is the Minkowski sum of the segments
[0, a_n]; its volume is the sum of |det| over all d-element generator
subsets.  The Gini volume divides that by the volume of the axis-aligned
box whose diagonal is sum(a_n), the largest zonotope the same totals can
span.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .errors import InvalidRange, SubsetCapExceeded, ZeroDiagonal

DEFAULT_SUBSET_CAP = 10**8
DEFAULT_SAMPLES = 100_000


@dataclass(frozen=True)
class GeneratorSet:
    vectors: np.ndarray
    n_inputs: int
    axis_labels: tuple[str, ...]

    def __init__(self, vectors, n_inputs: int | None = None, axis_labels: Sequence[str] | None = None):
        arr = np.array(vectors, dtype=float)
        if arr.ndim != 2 or arr.shape[0] < 1:
            raise ValueError("generators must be a nonempty (N, d) array")
        if not np.all(np.isfinite(arr)) or np.any(arr < 0):
            raise ValueError("generator components must be finite and >= 0")
        d = arr.shape[1]
        n_inputs = d - 1 if n_inputs is None else int(n_inputs)
        if not 0 <= n_inputs <= d:
            raise ValueError(f"n_inputs must lie in [0, {d}]")
        if axis_labels is None:
            axis_labels = [f"x{i + 1}" for i in range(n_inputs)] + [f"y{i + 1}" for i in range(d - n_inputs)]
        if len(axis_labels) != d:
            raise ValueError("need one axis label per dimension")
        arr.setflags(write=False)
        object.__setattr__(self, "vectors", arr)
        object.__setattr__(self, "n_inputs", n_inputs)
        object.__setattr__(self, "axis_labels", tuple(axis_labels))

    @classmethod
    def from_observations(cls, panel) -> "GeneratorSet":
        """Firm vectors (K, L, Y) from a sequence of FirmObservation."""
        return cls([(o.k, o.l, o.y) for o in panel], n_inputs=2, axis_labels=("K", "L", "Y"))

    @property
    def count(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def canonical(self) -> np.ndarray:
        """Rows in lexicographic order; makes every result order-independent."""
        v = self.vectors
        return v[np.lexsort(v.T[::-1])]


@dataclass(frozen=True)
class VolumeEstimate:
    value: float
    mode: str
    sample_count: int | None = None
    std_error: float | None = None


@dataclass(frozen=True)
class ZonotopeMetrics:
    volume: VolumeEstimate
    diagonal: tuple[float, ...]
    parallelotope_volume: float
    gini: float
    degenerate: bool = False

    def to_dict(self) -> dict:
        out = {"volume": self.volume.value, "mode": self.volume.mode}
        if self.volume.std_error is not None:
            out["std_error"] = self.volume.std_error
            out["sample_count"] = self.volume.sample_count
        out.update(
            diagonal=list(self.diagonal),
            parallelotope_volume=self.parallelotope_volume,
            gini=self.gini,
            degenerate=self.degenerate,
        )
        return out


@dataclass(frozen=True)
class TangentReport:
    angles: dict[str, float]
    diagonal: tuple[float, ...]
    parallel_norms: dict[str, float]
    perp_norms: dict[str, float]

    def to_dict(self) -> dict:
        return dict(self.angles)


@dataclass(frozen=True)
class BiasReport:
    biased_ratio: float
    adjusted_ratio: float
    relative_bias: float

    def to_dict(self) -> dict:
        return {
            "biased_ratio": self.biased_ratio,
            "adjusted_ratio": self.adjusted_ratio,
            "relative_bias": self.relative_bias,
        }


def abs_determinants(mats: np.ndarray) -> np.ndarray:
    """|det| of a stack of (m, d, d) matrices, closed form for d <= 3."""
    d = mats.shape[-1]
    if d == 1:
        return np.abs(mats[:, 0, 0])
    if d == 2:
        return np.abs(mats[:, 0, 0] * mats[:, 1, 1] - mats[:, 0, 1] * mats[:, 1, 0])
    if d == 3:
        a, b, c = mats[:, 0], mats[:, 1], mats[:, 2]
        return np.abs(
            a[:, 0] * (b[:, 1] * c[:, 2] - b[:, 2] * c[:, 1])
            - a[:, 1] * (b[:, 0] * c[:, 2] - b[:, 2] * c[:, 0])
            + a[:, 2] * (b[:, 0] * c[:, 1] - b[:, 1] * c[:, 0])
        )
    return np.abs(np.linalg.det(mats))


def iter_subset_chunks(n: int, d: int) -> Iterator[np.ndarray]:
    """All d-subsets of range(n) in lexicographic order, in contiguous chunks.

    A chunk holds every subset sharing the same first d-2 indices, so
    chunk boundaries depend only on (n, d).
    """
    if d > n or d < 1:
        return
    if d == 1:
        yield np.arange(n)[:, None]
        return
    for prefix in itertools.combinations(range(n), d - 2):
        start = prefix[-1] + 1 if prefix else 0
        m = n - start
        if m < 2:
            continue
        j, k = np.triu_indices(m, k=1)
        chunk = np.empty((j.size, d), dtype=np.intp)
        chunk[:, : d - 2] = prefix
        chunk[:, d - 2] = j + start
        chunk[:, d - 1] = k + start
        yield chunk


def zonotope_volume(
    G: GeneratorSet,
    mode: str = "exact",
    sample_count: int = DEFAULT_SAMPLES,
    seed: int | None = 42,
    subset_cap: int = DEFAULT_SUBSET_CAP,
) -> VolumeEstimate:
    """Volume of the zonotope generated by ``G``.

    ``exact`` sums |det| over every d-subset (lexicographic order, each
    chunk summed with ``math.fsum`` and chunk totals merged in order).
    ``sampled`` returns C(N, d) times the mean |det| of uniformly drawn
    subsets along with its standard error.  Fewer generators than
    dimensions gives volume 0.
    """
    n, d = G.count, G.dim
    if mode not in ("exact", "sampled"):
        raise ValueError(f"mode must be 'exact' or 'sampled', got {mode!r}")
    if n < d:
        if mode == "exact":
            return VolumeEstimate(0.0, "exact")
        return VolumeEstimate(0.0, "sampled", sample_count, 0.0)

    vecs = G.canonical()
    total_subsets = math.comb(n, d)
    if mode == "exact":
        if total_subsets > subset_cap:
            raise SubsetCapExceeded(total_subsets, subset_cap)
        partials = [
            math.fsum(abs_determinants(vecs[chunk]).tolist())
            for chunk in iter_subset_chunks(n, d)
        ]
        return VolumeEstimate(math.fsum(partials), "exact")

    if sample_count < 2:
        raise ValueError("sampled mode needs sample_count >= 2")
    rng = np.random.default_rng(seed)
    idx = _draw_subsets(rng, n, d, sample_count)
    dets = abs_determinants(vecs[idx])
    mean = math.fsum(dets.tolist()) / sample_count
    sd = float(np.std(dets, ddof=1))
    return VolumeEstimate(
        total_subsets * mean, "sampled", sample_count, total_subsets * sd / math.sqrt(sample_count)
    )


def _draw_subsets(rng: np.random.Generator, n: int, d: int, size: int) -> np.ndarray:
    """``size`` uniformly random d-subsets of range(n) (rejection on repeats)."""
    out = rng.integers(0, n, size=(size, d))
    while True:
        s = np.sort(out, axis=1)
        bad = np.any(s[:, 1:] == s[:, :-1], axis=1)
        if not bad.any():
            return out
        out[bad] = rng.integers(0, n, size=(int(bad.sum()), d))


def diagonal(G: GeneratorSet) -> tuple[float, ...]:
    """Componentwise sum of the generators (exactly rounded)."""
    return tuple(math.fsum(col) for col in G.vectors.T.tolist())


def parallelotope_volume(G: GeneratorSet) -> float:
    """Volume of the axis-aligned box with diagonal sum(a_n)."""
    return math.prod(diagonal(G))


def gini_volume(G: GeneratorSet, mode: str = "exact", **kwargs) -> ZonotopeMetrics:
    vol = zonotope_volume(G, mode, **kwargs)
    diag = diagonal(G)
    box = math.prod(diag)
    if box <= 0:
        return ZonotopeMetrics(vol, diag, box, 0.0, degenerate=True)
    return ZonotopeMetrics(vol, diag, box, vol.value / box)


def tangent_angles(G: GeneratorSet) -> TangentReport:
    """Angle (radians) between the zonotope diagonal and each input axis."""
    diag = diagonal(G)
    if not any(diag):
        raise ZeroDiagonal("generator diagonal is the zero vector")
    labels = G.axis_labels
    angles, par, perp = {}, {}, {}
    for j in range(G.n_inputs):
        p = abs(diag[j])
        q = math.sqrt(math.fsum(x * x for i, x in enumerate(diag) if i != j))
        par[labels[j]] = p
        perp[labels[j]] = q
        # atan2 gives pi/2 when the axis component is zero
        angles[labels[j]] = math.atan2(q, p)
    return TangentReport(angles, diag, par, perp)


def normalization_bias_report(volume: float, y_min: float, y_max: float) -> BiasReport:
    """Volume ratio against [0, y_max] versus the threshold-adjusted [y_min, y_max]."""
    if not y_max > y_min:
        raise InvalidRange(f"need y_max > y_min, got y_min={y_min}, y_max={y_max}")
    if y_min < 0 or volume < 0:
        raise InvalidRange("volume and y_min must be >= 0")
    biased = volume / y_max
    adjusted = volume / (y_max - y_min)
    return BiasReport(biased, adjusted, y_min / y_max)
