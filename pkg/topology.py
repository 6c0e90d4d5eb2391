# topology.py
"""H-signatures van trajectories, homologie-tests en het toegestane klassenfilter."""

from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2 * np.pi
DEFAULT_TOLERANCE = 0.05
MAX_SUBTENDED = np.pi / 4
_K = np.arange(-2, 3) * TWO_PI
_DEGENERATE_EPS = 1e-12

HSignature = np.ndarray


class DegenerateSegment(ValueError):
    """Segment begint of eindigt precies op een representatief punt."""


class LengthMismatch(ValueError):
    """Signaturen van verschillende lengte vergeleken."""


def _reps(obstacles) -> np.ndarray:
    if hasattr(obstacles, "representative_points"):
        return obstacles.representative_points
    return np.asarray(obstacles, dtype=float).reshape(-1, 2)


def absmin(values) -> np.ndarray:
    """Kandidaat met kleinste absolute waarde langs de laatste as; gelijkspel naar positief."""
    values = np.asarray(values, dtype=float)
    mags = np.abs(values)
    best = mags.min(axis=-1, keepdims=True)
    ties = mags <= best + 1e-12
    return np.where(ties, values, -np.inf).max(axis=-1)


def _delta_arg(z1: np.ndarray, z2: np.ndarray, reps: np.ndarray) -> np.ndarray:
    """absmin van het verschil in argument per (segment, obstakel): vorm (S, L)."""
    d1 = z1[:, None, :] - reps[None, :, :]
    d2 = z2[:, None, :] - reps[None, :, :]
    if np.any(np.hypot(d1[..., 0], d1[..., 1]) < _DEGENERATE_EPS) or \
            np.any(np.hypot(d2[..., 0], d2[..., 1]) < _DEGENERATE_EPS):
        raise DegenerateSegment("segment raakt een representatief punt")
    raw = np.arctan2(d2[..., 1], d2[..., 0]) - np.arctan2(d1[..., 1], d1[..., 0])
    return absmin(raw[..., None] + _K)


def segment_signature(z1, z2, obstacles) -> HSignature:
    reps = _reps(obstacles)
    z1 = np.asarray(z1, dtype=float)[:2]
    z2 = np.asarray(z2, dtype=float)[:2]
    if reps.shape[0] == 0:
        return np.zeros(0)
    if np.array_equal(z1, z2):
        _delta_arg(z1[None], z2[None], reps)
        return np.zeros(len(reps))
    return _delta_arg(z1[None], z2[None], reps)[0] / TWO_PI


def _densify(points: np.ndarray, reps: np.ndarray, max_rounds: int = 30) -> np.ndarray:
    pts = points
    for _ in range(max_rounds):
        if len(pts) < 2:
            return pts
        angles = np.abs(_delta_arg(pts[:-1], pts[1:], reps)).max(axis=1)
        pieces = np.ceil(angles / (MAX_SUBTENDED * 0.5)).astype(int)
        if np.all(angles < MAX_SUBTENDED):
            return pts
        pieces = np.where(angles < MAX_SUBTENDED, 1, np.maximum(pieces, 2))
        out = [pts[:1]]
        for a, b, k in zip(pts[:-1], pts[1:], pieces):
            t = np.arange(1, k + 1)[:, None] / k
            out.append(a + t * (b - a))
        pts = np.concatenate(out)
    return pts


def path_signature(traj, obstacles) -> HSignature:
    """Som van de segment-signaturen over de (verdichte) koorden van een pad."""
    reps = _reps(obstacles)
    states = traj.states if hasattr(traj, "states") else traj
    pts = np.atleast_2d(np.asarray(states, dtype=float))[:, :2]
    if reps.shape[0] == 0:
        return np.zeros(0)
    if len(pts) < 2:
        _delta_arg(pts, pts, reps)
        return np.zeros(len(reps))
    pts = _densify(pts, reps)
    return _delta_arg(pts[:-1], pts[1:], reps).sum(axis=0) / TWO_PI


def homologous(h1, h2, tol: float = DEFAULT_TOLERANCE) -> bool:
    h1, h2 = np.asarray(h1, dtype=float), np.asarray(h2, dtype=float)
    if h1.shape != h2.shape:
        raise LengthMismatch(f"lengte {h1.shape} vs {h2.shape}")
    return bool(np.all(np.abs(h1 - h2) <= tol))


@dataclass(frozen=True)
class ClassFilter:
    h_limit: float
    offset: np.ndarray | None = field(default=None, compare=False)

    def offset_for(self, n: int) -> np.ndarray:
        return np.ones(n) if self.offset is None else np.asarray(self.offset, dtype=float)


def is_allowed(h, class_filter: ClassFilter) -> bool:
    h = np.asarray(h, dtype=float)
    offset = class_filter.offset_for(len(h))
    if offset.shape != h.shape:
        raise LengthMismatch(f"lengte {h.shape} vs offset {offset.shape}")
    if np.isinf(class_filter.h_limit):
        return True
    return bool(np.all(np.abs(offset - h) <= class_filter.h_limit))


def h_key(h, tol: float = DEFAULT_TOLERANCE) -> str:
    """Leesbaar klasselabel, alleen voor uitvoer (niet voor equivalentie)."""
    decimals = max(int(np.ceil(-np.log10(tol))), 0) if tol > 0 else 3
    return "|".join(f"{v:.{decimals}f}" for v in np.round(np.asarray(h, dtype=float), decimals) + 0.0)


def realized_class(trace_points, goal_rep, references, obstacles, tol: float = DEFAULT_TOLERANCE) -> int:
    """Index van de referentie die homoloog is met het gerealiseerde pad, anders -1."""
    pts = np.atleast_2d(np.asarray(trace_points, dtype=float))[:, :2]
    closed = np.vstack([pts, np.asarray(goal_rep, dtype=float)[None, :2]])
    h = 1.0 + path_signature(closed, obstacles)
    for i, ref in enumerate(references):
        ref_h = ref.h if hasattr(ref, "h") else ref
        if homologous(h, ref_h, tol):
            return i
    return -1
