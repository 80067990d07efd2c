"""Planar curve predicates: simplicity, containment, nesting reports.

Projected periodic orbits are closed polylines.  Pairwise status is one
of ``disjoint`` (no contact within tolerance, nested or separate),
``identical`` (Hausdorff-close), ``crossing`` (one curve has vertices
strictly inside and strictly outside the other, by the winding test),
or ``tangent`` (contact without a crossing).  Tangency is reported,
never promoted to crossing.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

__all__ = ["JordanCurve", "PairReport", "nesting_check", "winding_inside", "polyline_distance"]

DEFAULT_TOL = 1e-7
IDENTICAL_TOL = 1e-6


@dataclass
class JordanCurve:
    """Closed polyline (last vertex connects back to the first)."""

    vertices: np.ndarray  # (n, 2)
    amplitude: float = float("nan")
    curve_id: str = ""

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=np.float64)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 2 or self.vertices.shape[0] < 3:
            raise ValueError("a Jordan curve needs an (n, 2) vertex array with n >= 3")

    @property
    def segments(self):
        a = self.vertices
        b = np.roll(self.vertices, -1, axis=0)
        return a, b

    def bbox(self):
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def is_simple(self, tol: float = DEFAULT_TOL) -> bool:
        cached = getattr(self, "_simple_cache", None)
        if cached is not None and cached[0] == tol:
            return cached[1]
        a, b = self.segments
        n = a.shape[0]
        result = (not _segment_pairs_cross(a, b, a, b, tol, skip_adjacent=True)) if n >= 4 else True
        self._simple_cache = (tol, result)
        return result


def _cross2(o, a, b):
    return (a[..., 0] - o[..., 0]) * (b[..., 1] - o[..., 1]) - (a[..., 1] - o[..., 1]) * (b[..., 0] - o[..., 0])


def _segment_pairs_cross(a1, b1, a2, b2, tol, skip_adjacent=False) -> bool:
    """Any strict (proper) crossing between the two segment sets."""
    n, m = a1.shape[0], a2.shape[0]
    A1 = a1[:, None, :]
    B1 = b1[:, None, :]
    A2 = a2[None, :, :]
    B2 = b2[None, :, :]
    d1 = _cross2(A2, B2, A1)
    d2 = _cross2(A2, B2, B1)
    d3 = _cross2(A1, B1, A2)
    d4 = _cross2(A1, B1, B2)
    scale = (
        np.maximum(np.linalg.norm(b1 - a1, axis=1)[:, None], 1e-30)
        * np.maximum(np.linalg.norm(b2 - a2, axis=1)[None, :], 1e-30)
    )
    eps = tol * scale
    proper = (d1 * d2 < -eps * eps) & (d3 * d4 < -eps * eps)
    if skip_adjacent and n == m:
        idx = np.arange(n)
        for off in (-1, 0, 1):
            proper[idx, (idx + off) % n] = False
    return bool(np.any(proper))


def winding_inside(points: np.ndarray, curve: JordanCurve) -> np.ndarray:
    """Winding-number containment test, vectorized over points."""
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    a, b = curve.segments
    x, y = pts[:, 0][:, None], pts[:, 1][:, None]
    ax, ay = a[None, :, 0], a[None, :, 1]
    bx, by = b[None, :, 0], b[None, :, 1]
    is_left = (bx - ax) * (y - ay) - (x - ax) * (by - ay)
    up = (ay <= y) & (by > y) & (is_left > 0)
    down = (ay > y) & (by <= y) & (is_left < 0)
    winding = np.count_nonzero(up, axis=1) - np.count_nonzero(down, axis=1)
    return winding != 0


def _points_to_segments_dist(points: np.ndarray, curve: JordanCurve) -> np.ndarray:
    """Distance from each point to the closed polyline."""
    pts = np.atleast_2d(points)
    a, b = curve.segments
    d = b - a
    len2 = np.maximum(np.einsum("ij,ij->i", d, d), 1e-300)
    ap = pts[:, None, :] - a[None, :, :]
    t = np.clip(np.einsum("pij,ij->pi", ap, d) / len2[None, :], 0.0, 1.0)
    proj = a[None, :, :] + t[:, :, None] * d[None, :, :]
    dist = np.linalg.norm(pts[:, None, :] - proj, axis=2)
    return dist.min(axis=1)


def polyline_distance(c1: JordanCurve, c2: JordanCurve) -> float:
    """Symmetric minimum vertex-to-polyline distance."""
    return float(min(_points_to_segments_dist(c1.vertices, c2).min(), _points_to_segments_dist(c2.vertices, c1).min()))


def hausdorff(c1: JordanCurve, c2: JordanCurve) -> float:
    return float(max(_points_to_segments_dist(c1.vertices, c2).max(), _points_to_segments_dist(c2.vertices, c1).max()))


@dataclass(frozen=True)
class PairReport:
    i: int
    j: int
    status: str  # disjoint | identical | crossing | tangent
    min_distance: float
    hausdorff: float


def classify_pair(c1: JordanCurve, c2: JordanCurve, tol: float = DEFAULT_TOL, identical_tol: float = IDENTICAL_TOL) -> PairReport:
    d1 = _points_to_segments_dist(c1.vertices, c2)
    d2 = _points_to_segments_dist(c2.vertices, c1)
    hd = float(max(d1.max(), d2.max()))
    if hd < identical_tol:
        return PairReport(0, 0, "identical", 0.0, hd)
    dmin = float(min(d1.min(), d2.min()))

    in1 = winding_inside(c1.vertices, c2)
    strict_in = bool(np.any(in1 & (d1 > tol)))
    strict_out = bool(np.any(~in1 & (d1 > tol)))
    in2 = winding_inside(c2.vertices, c1)
    strict_in2 = bool(np.any(in2 & (d2 > tol)))
    strict_out2 = bool(np.any(~in2 & (d2 > tol)))

    a1, b1 = c1.segments
    a2, b2 = c2.segments
    segments_cross = _segment_pairs_cross(a1, b1, a2, b2, tol)

    if (strict_in and strict_out) or (strict_in2 and strict_out2) or segments_cross:
        return PairReport(0, 0, "crossing", dmin, hd)
    if dmin <= tol:
        return PairReport(0, 0, "tangent", dmin, hd)
    return PairReport(0, 0, "disjoint", dmin, hd)


def nesting_check(
    curves: Sequence[JordanCurve],
    tol: float = DEFAULT_TOL,
    identical_tol: float = IDENTICAL_TOL,
    require_simple: bool = True,
) -> List[PairReport]:
    """Pairwise classification of a family of projected orbits."""
    if require_simple:
        for k, c in enumerate(curves):
            if not c.is_simple(tol):
                raise ValueError(f"curve {c.curve_id or k} is not simple at tolerance {tol}")
    reports: List[PairReport] = []
    for i in range(len(curves)):
        for j in range(i + 1, len(curves)):
            rep = classify_pair(curves[i], curves[j], tol, identical_tol)
            reports.append(PairReport(i, j, rep.status, rep.min_distance, rep.hausdorff))
    return reports
