"""Uniform sampling on boxes, point-set geometry and separation bounds."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.spatial.distance import cdist, pdist

from .errors import ParseError, ValidationError
from .rng import generator

__all__ = [
    "SampleSet",
    "GeometrySummary",
    "ProbabilityBound",
    "GaussianSeparationBound",
    "sample_uniform",
    "separation_radius",
    "fill_distance_estimate",
    "geometry_summary",
    "separation_prob_bound",
    "gaussian_separation_bound",
]

MAX_ENTRIES = 500_000_000


@dataclass(frozen=True)
class SampleSet:
    """Points in an axis-aligned box ``[lo, hi]^d``.

    Attributes
    ----------
    points : ndarray, shape (m, d)
    box : tuple of float
        ``(lo, hi)``, shared by every coordinate.
    seed : int or None
        Seed the points were drawn with, if any.
    """

    points: np.ndarray
    box: tuple = (0.0, 1.0)
    seed: Optional[int] = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise ValidationError(f"points must be an (m, d) array with m, d >= 1, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValidationError("points have non-finite coordinates")
        lo, hi = _check_box(self.box)
        if pts.min() < lo or pts.max() > hi:
            raise ValidationError(f"points fall outside the box [{lo}, {hi}]")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "box", (lo, hi))

    @property
    def m(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    @property
    def volume(self) -> float:
        lo, hi = self.box
        return (hi - lo) ** self.d

    @property
    def diameter(self) -> float:
        lo, hi = self.box
        return (hi - lo) * math.sqrt(self.d)

    def to_csv(self, y=None) -> str:
        """CSV text with header ``x1,...,xd`` (and ``y`` if given)."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        header = [f"x{j + 1}" for j in range(self.d)]
        if y is not None:
            header.append("y")
        w.writerow(header)
        for i, row in enumerate(self.points):
            cells = [repr(float(v)) for v in row]
            if y is not None:
                cells.append(repr(float(y[i])))
            w.writerow(cells)
        return buf.getvalue()


@dataclass(frozen=True)
class GeometrySummary:
    """Separation radius ``q`` and a Monte-Carlo lower estimate ``h`` of the
    fill distance."""

    separation_radius: float
    fill_distance_estimate: float
    probe_count: int

    def to_dict(self) -> dict:
        return {"separation_radius": self.separation_radius,
                "fill_distance_estimate": self.fill_distance_estimate,
                "probe_count": self.probe_count}


@dataclass(frozen=True)
class ProbabilityBound:
    """A probability lower bound; ``vacuous`` when it is below zero."""

    value: float
    vacuous: bool


@dataclass(frozen=True)
class GaussianSeparationBound:
    d0: float
    q_lower: float
    confidence: float
    vacuous: bool
    d_exceeds_d0: bool = field(default=False)

    def to_dict(self) -> dict:
        return {"d0": self.d0, "q_lower": self.q_lower, "confidence": self.confidence,
                "vacuous": self.vacuous, "d_exceeds_d0": self.d_exceeds_d0}


def _check_box(box) -> tuple[float, float]:
    try:
        lo, hi = (float(v) for v in box)
    except (TypeError, ValueError):
        raise ValidationError(f"box must be a pair (lo, hi), got {box!r}") from None
    if not (math.isfinite(lo) and math.isfinite(hi)) or not lo < hi:
        raise ValidationError(f"invalid box [{lo}, {hi}]")
    return lo, hi


def sample_uniform(m: int, d: int, box=(0.0, 1.0), seed: int = 0) -> SampleSet:
    """Draw ``m`` i.i.d. uniform points in ``[lo, hi]^d``.

    Identical ``(m, d, box, seed)`` always produce bit-identical points.
    """
    if int(m) != m or m < 1 or int(d) != d or d < 1:
        raise ValidationError(f"need integers m >= 1 and d >= 1, got m={m}, d={d}")
    m, d = int(m), int(d)
    if m * d > MAX_ENTRIES:
        raise ValidationError(f"sample of {m}x{d} exceeds the {MAX_ENTRIES} entry memory budget")
    lo, hi = _check_box(box)
    u = generator(seed).random((m, d))
    pts = lo + (hi - lo) * u
    return SampleSet(pts, (lo, hi), int(seed))


def separation_radius(S) -> float:
    """Half the minimal pairwise distance, by an exact pairwise scan."""
    pts = S.points if isinstance(S, SampleSet) else np.asarray(S, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 2:
        raise ValidationError("separation radius needs at least two points")
    return 0.5 * float(np.sqrt(np.min(pdist(pts, "sqeuclidean"))))


def _min_dist_to_set(probes: np.ndarray, pts: np.ndarray) -> np.ndarray:
    d = pts.shape[1]
    if d <= 32:
        return np.sqrt(cdist(probes, pts, "sqeuclidean").min(axis=1))
    # Gram-trick distances in high dimension, where cdist is the bottleneck.
    sq = (probes * probes).sum(1)[:, None] + (pts * pts).sum(1)[None, :] - 2.0 * probes @ pts.T
    return np.sqrt(np.maximum(sq.min(axis=1), 0.0))


def fill_distance_estimate(S: SampleSet, probes: Optional[int] = None, seed: int = 0,
                           chunk: int = 2048) -> float:
    """Monte-Carlo lower estimate of the fill distance.

    The fill distance is ``sup_x min_j ||x - x_j||`` over the box.  The
    supremum is replaced by a maximum over ``probes`` uniform probe points,
    so the result never exceeds the true value (up to rounding).

    Parameters
    ----------
    S : SampleSet
    probes : int, optional
        Number of probe points, default ``10 * m``.
    seed : int
    """
    if S.m < 1:
        raise ValidationError("empty sample set")
    n = 10 * S.m if probes is None else int(probes)
    if n < 1:
        raise ValidationError(f"probes must be >= 1, got {probes}")
    lo, hi = S.box
    rng = generator(seed)
    best = 0.0
    done = 0
    while done < n:
        k = min(chunk, n - done)
        P = lo + (hi - lo) * rng.random((k, S.d))
        best = max(best, float(_min_dist_to_set(P, S.points).max()))
        done += k
    return best


def geometry_summary(S: SampleSet, probes: Optional[int] = None, seed: int = 0) -> GeometrySummary:
    n = 10 * S.m if probes is None else int(probes)
    q = separation_radius(S) if S.m >= 2 else float("nan")
    return GeometrySummary(q, fill_distance_estimate(S, n, seed), n)


def _finite(*vals):
    for v in vals:
        if not math.isfinite(v):
            raise ValidationError(f"non-finite input {v}")


def separation_prob_bound(m: int, d: int, vol: float, t: float) -> ProbabilityBound:
    """Lower bound on ``P(q >= t)`` for ``m`` i.i.d. uniform points in a set of
    volume ``vol``: ``1 - m^2 pi^{d/2} t^d / (2 vol Gamma(d/2 + 1))``."""
    _finite(m, d, vol, t)
    if m < 2 or d < 1 or vol <= 0 or t < 0:
        raise ValidationError(f"need m >= 2, d >= 1, vol > 0, t >= 0; got m={m}, d={d}, vol={vol}, t={t}")
    if t == 0:
        return ProbabilityBound(1.0, False)
    log_term = (2 * math.log(m) + 0.5 * d * math.log(math.pi) + d * math.log(t)
                - math.log(2 * vol) - math.lgamma(d / 2 + 1))
    value = 1.0 - math.exp(log_term) if log_term < 709 else -math.inf
    return ProbabilityBound(value, value < 0)


def gaussian_separation_bound(m: int, d: int, M: float, sigma: float) -> GaussianSeparationBound:
    """Separation guarantee for high-dimensional Gaussian-type samples.

    Returns the dimension threshold ``d0 = 2048 e^{4 pi} M^2 / sigma^2``, the
    separation lower bound ``sigma sqrt(d) / 2`` and its confidence
    ``1 - 8 m^2 e^{4 pi} [exp(-d/(96 M^2)) + exp(-sigma^2 d/(5824 M^2))]``.
    """
    _finite(m, d, M, sigma)
    if M <= 0 or sigma <= 0:
        raise ValidationError(f"need M > 0 and sigma > 0, got M={M}, sigma={sigma}")
    if m < 2 or d < 1:
        raise ValidationError(f"need m >= 2 and d >= 1, got m={m}, d={d}")
    e4pi = math.exp(4 * math.pi)
    d0 = 2048.0 * e4pi * M * M / (sigma * sigma)
    q_lower = sigma * math.sqrt(d) / 2.0
    tail = math.exp(-d / (96.0 * M * M)) + math.exp(-sigma * sigma * d / (5824.0 * M * M))
    confidence = 1.0 - 8.0 * m * m * e4pi * tail
    return GaussianSeparationBound(d0, q_lower, confidence, confidence < 0, d > d0)


def bounding_box(points) -> tuple[float, float]:
    """Smallest shared box ``[lo, hi]`` holding all points (widened if flat)."""
    pts = np.asarray(points, dtype=float)
    lo, hi = float(pts.min()), float(pts.max())
    if lo == hi:
        lo, hi = lo - 0.5, hi + 0.5
    return lo, hi


def read_points_csv(text: str, allow_y: bool = True):
    """Parse CSV with header ``x1..xd[,y]``; returns ``(points, y or None)``."""
    rows = list(csv.reader(io.StringIO(text)))
    rows = [r for r in rows if r and any(c.strip() for c in r)]
    if not rows:
        raise ParseError("empty CSV")
    header = [h.strip() for h in rows[0]]
    has_y = bool(header) and header[-1] == "y"
    xs = header[:-1] if has_y else header
    if not xs or xs != [f"x{j + 1}" for j in range(len(xs))]:
        raise ParseError(f"header must be x1,...,xd[,y], got {','.join(header)}")
    if has_y and not allow_y:
        raise ParseError("unexpected y column")
    body = rows[1:]
    if not body:
        raise ParseError("CSV has a header but no rows")
    data = np.empty((len(body), len(header)))
    for i, row in enumerate(body, start=1):
        if len(row) != len(header):
            raise ParseError(f"row {i} has {len(row)} cells, expected {len(header)}")
        for j, cell in enumerate(row):
            try:
                v = float(cell)
            except ValueError:
                raise ParseError(f"row {i} column {j + 1}: non-numeric cell {cell!r}") from None
            if not math.isfinite(v):
                raise ParseError(f"row {i} column {j + 1}: non-finite value {cell!r}")
            data[i - 1, j] = v
    if has_y:
        return data[:, :-1].copy(), data[:, -1].copy()
    return data, None
