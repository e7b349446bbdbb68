"""Creativity evaluation suite: relative typicality, Vendi score, total
variance, validity, unknown-rate, PCA projection, and KDE density grids."""

from __future__ import annotations

from dataclasses import dataclass, field, asdict
from typing import Callable, Sequence

import numpy as np
import scipy.linalg

from .errors import (
    DegenerateAnchor,
    InsufficientData,
    NumericalError,
)


@dataclass(frozen=True)
class EmbeddingSet:
    points: np.ndarray  # (n, d)
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        object.__setattr__(self, "points", pts)
        if pts.ndim != 2 or pts.shape[0] < 1:
            raise InsufficientData("points must be a non-empty (n, d) matrix")
        if not np.all(np.isfinite(pts)):
            raise NumericalError("points contain non-finite values")


@dataclass(frozen=True)
class MetricsReport:
    relative_typicality_mean: float
    vendi: float
    total_variance: float
    validity_mean: float
    unknown_rate: float
    n: int
    kernel: str = "rbf-median"
    bandwidths: tuple[float, ...] = ()

    def to_dict(self) -> dict:
        d = asdict(self)
        d["bandwidths"] = list(self.bandwidths)
        return d


def _cosine(a: np.ndarray, b: np.ndarray) -> float:
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na < 1e-12 or nb < 1e-12:
        raise DegenerateAnchor("cosine of a near-zero vector")
    return float(np.dot(a, b) / (na * nb))


def relative_typicality(
    z: np.ndarray,
    category_anchor: np.ndarray,
    subcategory_anchors: Sequence[np.ndarray],
    reduce: str = "max",
) -> float:
    """100 * (cos(z, category) - max_j cos(z, subcategory_j)).

    ``reduce="mean"`` is an optional variant that averages over subcategories
    instead of taking the maximum.
    """
    if len(subcategory_anchors) < 1:
        raise InsufficientData("need at least one subcategory anchor")
    sims = [_cosine(z, a) for a in subcategory_anchors]
    agg = max(sims) if reduce == "max" else float(np.mean(sims))
    return 100.0 * (_cosine(z, category_anchor) - agg)


def rbf_median_kernel(points: np.ndarray) -> np.ndarray:
    """RBF kernel matrix with median-heuristic bandwidth; unit diagonal by
    construction. A zero median (all points identical) degrades to exact
    0/1 similarity."""
    pts = np.asarray(points, dtype=float)
    d2 = np.sum((pts[:, None, :] - pts[None, :, :]) ** 2, axis=-1)
    off = d2[~np.eye(len(pts), dtype=bool)]
    med = float(np.median(off)) if off.size else 0.0
    if med <= 0:
        return (d2 == 0).astype(float)
    return np.exp(-d2 / (2.0 * med))


def vendi_score_from_kernel(kernel_matrix: np.ndarray) -> float:
    """exp of the eigenvalue Shannon entropy of K/n; negative eigenvalues are
    clamped to zero before the entropy."""
    k = np.asarray(kernel_matrix, dtype=float)
    n = k.shape[0]
    try:
        lam = scipy.linalg.eigvalsh(k / n)
    except Exception as e:
        raise NumericalError(f"eigendecomposition failed: {e}") from e
    lam = np.clip(lam, 0.0, None)
    pos = lam[lam > 0]
    return float(np.exp(-(pos * np.log(pos)).sum()))


def vendi_score(
    points: np.ndarray | EmbeddingSet,
    kernel: Callable[[np.ndarray, np.ndarray], float] | None = None,
) -> float:
    """Effective number of dissimilar samples, between 1 and n.

    ``kernel`` is a symmetric similarity with k(x, x) = 1; defaults to the
    RBF median-heuristic kernel.
    """
    pts = points.points if isinstance(points, EmbeddingSet) else np.asarray(points, float)
    if kernel is None:
        k = rbf_median_kernel(pts)
    else:
        n = pts.shape[0]
        k = np.empty((n, n))
        for i in range(n):
            for j in range(i, n):
                k[i, j] = k[j, i] = kernel(pts[i], pts[j])
    return vendi_score_from_kernel(k)


def total_variance(points: np.ndarray | EmbeddingSet) -> float:
    """Trace of the sample covariance (divisor n-1)."""
    pts = points.points if isinstance(points, EmbeddingSet) else np.asarray(points, float)
    if pts.shape[0] < 2:
        raise InsufficientData("total variance needs n >= 2")
    return float(np.trace(np.cov(pts, rowvar=False, ddof=1).reshape(pts.shape[1], -1)))


def validity_score(z: np.ndarray, category_anchor: np.ndarray) -> float:
    """Cosine alignment with the category anchor, in [-1, 1]."""
    return _cosine(z, category_anchor)


def unknown_rate(labels: Sequence[str]) -> float:
    """Fraction of labels equal to "unknown"."""
    if len(labels) == 0:
        raise InsufficientData("unknown_rate needs at least one label")
    return sum(1 for l in labels if l == "unknown") / len(labels)


def pca_project(
    points: np.ndarray | EmbeddingSet, out_dims: int = 2
) -> tuple[np.ndarray, np.ndarray]:
    """Mean-centered projection onto the top principal directions.

    Sign convention: the largest-magnitude coordinate of each direction is
    positive. Returns (n x out_dims projection, explained-variance fractions).
    """
    pts = points.points if isinstance(points, EmbeddingSet) else np.asarray(points, float)
    n, d = pts.shape
    if n < 3 or d < 2:
        raise InsufficientData("PCA needs n >= 3 and d >= 2")
    centered = pts - pts.mean(axis=0)
    try:
        _, svals, vt = np.linalg.svd(centered, full_matrices=False)
    except np.linalg.LinAlgError as e:
        raise NumericalError(f"SVD failed: {e}") from e
    dirs = vt[:out_dims]
    for r in range(dirs.shape[0]):
        j = int(np.argmax(np.abs(dirs[r])))
        if dirs[r, j] < 0:
            dirs[r] = -dirs[r]
    eig = svals**2
    total = eig.sum()
    fractions = eig[:out_dims] / total if total > 0 else np.zeros(out_dims)
    return centered @ dirs.T, fractions


def fit_pca_basis(points: np.ndarray, out_dims: int = 2) -> tuple[np.ndarray, np.ndarray]:
    """Fit and return (mean, directions) so several sets can share one basis."""
    pts = np.asarray(points, float)
    if pts.shape[0] < 3:
        raise InsufficientData("PCA basis needs n >= 3")
    mean = pts.mean(axis=0)
    _, _, vt = np.linalg.svd(pts - mean, full_matrices=False)
    dirs = vt[:out_dims]
    for r in range(dirs.shape[0]):
        j = int(np.argmax(np.abs(dirs[r])))
        if dirs[r, j] < 0:
            dirs[r] = -dirs[r]
    return mean, dirs


def kde_grid(
    points2d: np.ndarray,
    grid_size: int = 50,
    bandwidth: str | tuple[float, float] = "scott",
    extent: tuple[float, float, float, float] | None = None,
) -> tuple[np.ndarray, tuple[float, float, float, float], tuple[float, float]]:
    """Product-Gaussian KDE on a uniform grid over the 10%-padded data extent.

    Default bandwidth is Scott's rule per axis: sigma_j * n^(-1/6).
    Returns (grid values at cell centers, extent, bandwidths). An explicit
    ``extent`` lets several runs share one grid.
    """
    pts = np.asarray(points2d, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 2:
        raise InsufficientData("KDE needs an (n, 2) matrix with n >= 2")
    n = pts.shape[0]
    if bandwidth == "scott":
        sig = pts.std(axis=0, ddof=1)
        h = np.maximum(sig * n ** (-1.0 / 6.0), 1e-6)
    else:
        h = np.asarray(bandwidth, dtype=float)
    if extent is None:
        lo, hi = pts.min(axis=0), pts.max(axis=0)
        span = np.maximum(hi - lo, 1e-6)
        lo, hi = lo - 0.1 * span, hi + 0.1 * span
        extent = (float(lo[0]), float(hi[0]), float(lo[1]), float(hi[1]))
    xmin, xmax, ymin, ymax = extent
    dx, dy = (xmax - xmin) / grid_size, (ymax - ymin) / grid_size
    gx = xmin + dx * (np.arange(grid_size) + 0.5)
    gy = ymin + dy * (np.arange(grid_size) + 0.5)

    def axis_density(grid, data, hh):
        z = (grid[:, None] - data[None, :]) / hh
        return np.exp(-0.5 * z**2) / (hh * np.sqrt(2.0 * np.pi))

    px = axis_density(gx, pts[:, 0], h[0])  # (gx, n)
    py = axis_density(gy, pts[:, 1], h[1])  # (gy, n)
    grid = (px @ py.T) / n  # (gx, gy)
    return grid, extent, (float(h[0]), float(h[1]))


def evaluate(
    points: np.ndarray,
    labels: Sequence[str],
    category_anchor: np.ndarray,
    subcategory_anchors: Sequence[np.ndarray],
) -> MetricsReport:
    """Assemble the standard report over a set of final-sample embeddings."""
    pts = np.asarray(points, dtype=float)
    typ = [relative_typicality(z, category_anchor, subcategory_anchors) for z in pts]
    val = [validity_score(z, category_anchor) for z in pts]
    return MetricsReport(
        relative_typicality_mean=float(np.mean(typ)),
        vendi=vendi_score(pts),
        total_variance=total_variance(pts),
        validity_mean=float(np.mean(val)),
        unknown_rate=unknown_rate(list(labels)),
        n=pts.shape[0],
    )
