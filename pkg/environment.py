# environment.py
"""Werkruimte voor PI-RRHT*: domein D, obstakels, doelgebied en botsingscontroles."""

from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

DEFAULT_RESOLUTION = 0.05
_EPS = 1e-12


class ChordTooCoarse(ValueError):
    """Trajectory samples liggen verder uit elkaar dan de botsingsresolutie."""


class ExitClass(IntEnum):
    INTERIOR = 0
    GOAL = 1
    FAILURE = 2  # obstakel of buitenrand


# ── Vormen ──

@dataclass(frozen=True)
class Disc:
    center: tuple[float, float]
    radius: float

    def contains(self, points: np.ndarray) -> np.ndarray:
        """Gesloten schijf: True voor punten op of binnen de rand."""
        d = np.asarray(points, dtype=float) - np.asarray(self.center)
        return np.einsum("...i,...i->...", d, d) <= self.radius ** 2

    def contains_strict(self, p) -> bool:
        d = np.asarray(p, dtype=float) - np.asarray(self.center)
        return float(d @ d) < self.radius ** 2 - _EPS

    def hits_segments(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        c = np.asarray(self.center)
        ab = b - a
        denom = np.einsum("ij,ij->i", ab, ab)
        t = np.where(denom > 0, np.einsum("ij,ij->i", c - a, ab) / np.where(denom > 0, denom, 1.0), 0.0)
        t = np.clip(t, 0.0, 1.0)
        closest = a + t[:, None] * ab
        d = closest - c
        return np.einsum("ij,ij->i", d, d) <= self.radius ** 2

    def inside_bounds(self, bounds) -> bool:
        (cx, cy), r = self.center, self.radius
        xmin, ymin, xmax, ymax = bounds
        return cx - r >= xmin and cx + r <= xmax and cy - r >= ymin and cy + r <= ymax


@dataclass(frozen=True)
class ConvexPolygon:
    vertices: tuple[tuple[float, float], ...]

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        # Zorg voor tegen-de-klok-in volgorde
        area = 0.5 * np.sum(v[:, 0] * np.roll(v[:, 1], -1) - np.roll(v[:, 0], -1) * v[:, 1])
        if area < 0:
            object.__setattr__(self, "vertices", tuple(map(tuple, v[::-1])))

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.vertices, dtype=float)

    def _cross(self, points: np.ndarray) -> np.ndarray:
        v = self.array
        e = np.roll(v, -1, axis=0) - v
        p = np.asarray(points, dtype=float)[..., None, :] - v
        return e[:, 0] * p[..., 1] - e[:, 1] * p[..., 0]

    def contains(self, points: np.ndarray) -> np.ndarray:
        return np.all(self._cross(points) >= -_EPS, axis=-1)

    def contains_strict(self, p) -> bool:
        return bool(np.all(self._cross(np.asarray(p, dtype=float)) > _EPS))

    def hits_segments(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Gesloten segmenten [a_i, b_i] tegen de gesloten polygoon."""
        hit = self.contains(a) | self.contains(b)
        v = self.array
        w = np.roll(v, -1, axis=0)
        # segment i tegen polygoonzijde j
        d1 = b - a
        d2 = w - v
        denom = d1[:, None, 0] * d2[None, :, 1] - d1[:, None, 1] * d2[None, :, 0]
        diff = v[None, :, :] - a[:, None, :]
        parallel = np.abs(denom) < _EPS
        safe = np.where(parallel, 1.0, denom)
        t = (diff[..., 0] * d2[None, :, 1] - diff[..., 1] * d2[None, :, 0]) / safe
        s = (diff[..., 0] * d1[:, None, 1] - diff[..., 1] * d1[:, None, 0]) / safe
        crosses = ~parallel & (t >= -_EPS) & (t <= 1 + _EPS) & (s >= -_EPS) & (s <= 1 + _EPS)
        return hit | np.any(crosses, axis=1)

    def inside_bounds(self, bounds) -> bool:
        v = self.array
        xmin, ymin, xmax, ymax = bounds
        return bool(np.all(v[:, 0] >= xmin) and np.all(v[:, 0] <= xmax)
                    and np.all(v[:, 1] >= ymin) and np.all(v[:, 1] <= ymax))


Shape = Disc | ConvexPolygon


@dataclass(frozen=True)
class Obstacle:
    """Logisch obstakel: unie van convexe stukken met één representatief punt."""
    pieces: tuple[Shape, ...]
    representative_point: tuple[float, float]

    def contains(self, points: np.ndarray) -> np.ndarray:
        out = np.zeros(np.asarray(points).shape[:-1], dtype=bool)
        for piece in self.pieces:
            out |= piece.contains(points)
        return out

    def hits_segments(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        out = np.zeros(len(a), dtype=bool)
        for piece in self.pieces:
            out |= piece.hits_segments(a, b)
        return out


@dataclass(frozen=True)
class GoalRegion:
    center: tuple[float, float]
    radius: float
    representative_point: tuple[float, float] | None = None
    heading_tolerance: tuple[float, float] | None = None

    @property
    def rep(self) -> np.ndarray:
        p = self.representative_point if self.representative_point is not None else self.center
        return np.asarray(p, dtype=float)

    def contains(self, points: np.ndarray) -> np.ndarray:
        return Disc(self.center, self.radius).contains(points)

    def heading_ok(self, headings: np.ndarray) -> np.ndarray:
        headings = np.asarray(headings, dtype=float)
        if self.heading_tolerance is None:
            return np.ones(headings.shape, dtype=bool)
        lo, hi = self.heading_tolerance
        mid = 0.5 * (lo + hi)
        half = 0.5 * (hi - lo)
        return np.abs(wrap_angle(headings - mid)) <= half + _EPS


def wrap_angle(a):
    """Hoek naar [-pi, pi)."""
    return (np.asarray(a) + np.pi) % (2 * np.pi) - np.pi


# ── Werkruimte ──

@dataclass(frozen=True)
class Workspace:
    bounds: tuple[float, float, float, float]
    obstacles: tuple[Obstacle, ...]
    goal: GoalRegion
    resolution: float = DEFAULT_RESOLUTION
    name: str = field(default="", compare=False)

    @property
    def representative_points(self) -> np.ndarray:
        if not self.obstacles:
            return np.zeros((0, 2))
        return np.array([o.representative_point for o in self.obstacles], dtype=float)

    @property
    def diagonal(self) -> float:
        xmin, ymin, xmax, ymax = self.bounds
        return float(np.hypot(xmax - xmin, ymax - ymin))

    def in_bounds(self, points: np.ndarray) -> np.ndarray:
        p = np.asarray(points, dtype=float)
        xmin, ymin, xmax, ymax = self.bounds
        return (p[..., 0] > xmin) & (p[..., 0] < xmax) & (p[..., 1] > ymin) & (p[..., 1] < ymax)

    def in_obstacle(self, points: np.ndarray) -> np.ndarray:
        out = np.zeros(np.asarray(points).shape[:-1], dtype=bool)
        for obs in self.obstacles:
            out |= obs.contains(points)
        return out

    def contains_free(self, p) -> bool:
        p = np.asarray(p, dtype=float)[:2]
        return bool(self.in_bounds(p) and not self.in_obstacle(p) and not self.goal.contains(p))

    def classify_exit_batch(self, points: np.ndarray, headings: np.ndarray | None = None) -> np.ndarray:
        p = np.atleast_2d(np.asarray(points, dtype=float))[:, :2]
        codes = np.full(len(p), int(ExitClass.INTERIOR), dtype=np.int8)
        fail = ~self.in_bounds(p) | self.in_obstacle(p)
        in_goal = self.goal.contains(p) & ~fail
        if headings is not None:
            good = in_goal & self.goal.heading_ok(headings)
            fail |= in_goal & ~good
            in_goal = good
        codes[in_goal] = int(ExitClass.GOAL)
        codes[fail] = int(ExitClass.FAILURE)
        return codes

    def classify_exit(self, p, heading: float | None = None) -> ExitClass:
        h = None if heading is None else np.array([heading])
        return ExitClass(int(self.classify_exit_batch(np.asarray(p, dtype=float)[None, :2], h)[0]))

    def segments_free(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        a = np.atleast_2d(np.asarray(a, dtype=float))[:, :2]
        b = np.atleast_2d(np.asarray(b, dtype=float))[:, :2]
        # begrenzing is convex: eindpunten binnen = segment binnen
        ok = self.in_bounds(a) & self.in_bounds(b)
        for obs in self.obstacles:
            ok &= ~obs.hits_segments(a, b)
        return ok

    def segment_free(self, a, b) -> bool:
        return bool(self.segments_free(np.asarray(a)[None, :2], np.asarray(b)[None, :2])[0])

    def trajectory_free(self, traj) -> bool:
        """Chord-gewijze botsingscontrole van de positieprojectie van een trajectory."""
        pts = _positions(traj)
        if len(pts) == 0:
            raise ValueError("trajectory zonder samples")
        if len(pts) == 1:
            return bool(self.in_bounds(pts[0]) and not self.in_obstacle(pts[0]))
        chords = np.linalg.norm(np.diff(pts, axis=0), axis=1)
        if np.any(chords > self.resolution * (1 + 1e-9)):
            raise ChordTooCoarse(
                f"chord van {chords.max():.4f} groter dan resolutie {self.resolution}")
        return bool(np.all(self.segments_free(pts[:-1], pts[1:])))


def _positions(traj) -> np.ndarray:
    states = traj.states if hasattr(traj, "states") else traj
    return np.atleast_2d(np.asarray(states, dtype=float))[:, :2]


# ── 1D domein voor analytische controles ──

@dataclass(frozen=True)
class IntervalDomain:
    """Open interval (lo, hi); elk uiteinde telt als doel of als falen."""
    lo: float
    hi: float
    goal_lo: bool = True
    goal_hi: bool = True

    def classify_exit_batch(self, points: np.ndarray, headings=None) -> np.ndarray:
        x = np.asarray(points, dtype=float).reshape(len(points), -1)[:, 0]
        codes = np.full(len(x), int(ExitClass.INTERIOR), dtype=np.int8)
        low, high = x <= self.lo, x >= self.hi
        codes[low] = int(ExitClass.GOAL if self.goal_lo else ExitClass.FAILURE)
        codes[high] = int(ExitClass.GOAL if self.goal_hi else ExitClass.FAILURE)
        return codes

    def classify_exit(self, p, heading=None) -> ExitClass:
        return ExitClass(int(self.classify_exit_batch(np.atleast_2d(np.asarray(p, dtype=float)))[0]))

    def contains_free(self, p) -> bool:
        return self.lo < float(np.ravel(p)[0]) < self.hi


# ── Config ──

def _shape_from_config(cfg: dict) -> Shape:
    kind = cfg.get("type", "polygon")
    if kind == "disc":
        return Disc(tuple(map(float, cfg["center"])), float(cfg["radius"]))
    if kind == "polygon":
        return ConvexPolygon(tuple(tuple(map(float, v)) for v in cfg["vertices"]))
    if kind == "rect":
        x0, y0, x1, y1 = map(float, cfg["bounds"])
        return ConvexPolygon(((x0, y0), (x1, y0), (x1, y1), (x0, y1)))
    raise ValueError(f"Onbekend obstakeltype: {kind}")


def workspace_from_config(cfg: dict, name: str = "") -> Workspace:
    obstacles = []
    for o in cfg.get("obstacles", []):
        pieces = [_shape_from_config(p) for p in o["pieces"]] if "pieces" in o else [_shape_from_config(o)]
        if "rep" in o:
            rep = tuple(map(float, o["rep"]))
        elif isinstance(pieces[0], Disc):
            rep = pieces[0].center
        else:
            rep = tuple(pieces[0].array.mean(axis=0))
        obstacles.append(Obstacle(tuple(pieces), rep))
    g = cfg["goal"]
    goal = GoalRegion(
        center=tuple(map(float, g["center"])),
        radius=float(g["radius"]),
        representative_point=tuple(map(float, g["rep"])) if g.get("rep") is not None else None,
        heading_tolerance=tuple(map(float, g["heading"])) if g.get("heading") is not None else None,
    )
    return Workspace(
        bounds=tuple(map(float, cfg["bounds"])),
        obstacles=tuple(obstacles),
        goal=goal,
        resolution=float(cfg.get("resolution", DEFAULT_RESOLUTION)),
        name=name,
    )


# ── Validatie ──

def _shapes_overlap(a: Shape, b: Shape) -> bool:
    if isinstance(a, Disc) and isinstance(b, Disc):
        return float(np.hypot(*np.subtract(a.center, b.center))) <= a.radius + b.radius
    if isinstance(a, Disc):
        a, b = b, a
    if isinstance(b, Disc):
        poly = a.array
        if a.contains(np.asarray(b.center)):
            return True
        edges = Disc(b.center, b.radius).hits_segments(poly, np.roll(poly, -1, axis=0))
        return bool(np.any(edges))
    # twee convexe polygonen: scheidende-as-test
    pa, pb = a.array, b.array
    for poly in (pa, pb):
        e = np.roll(poly, -1, axis=0) - poly
        normals = np.stack([-e[:, 1], e[:, 0]], axis=1)
        for n in normals:
            ra, rb = pa @ n, pb @ n
            if ra.max() < rb.min() - _EPS or rb.max() < ra.min() - _EPS:
                return False
    return True


def validate_workspace(ws: Workspace) -> list[str]:
    """Lijst met geschonden werkruimte-invarianten (leeg = in orde)."""
    problems = []
    if ws.goal.radius <= 0:
        problems.append("doelgebied heeft straal <= 0")
    goal_disc = Disc(ws.goal.center, max(ws.goal.radius, 0.0))
    for i, obs in enumerate(ws.obstacles):
        if not any(p.contains_strict(obs.representative_point) for p in obs.pieces):
            problems.append(f"obstakel {i}: representatief punt ligt niet binnen het obstakel")
        for piece in obs.pieces:
            if not piece.inside_bounds(ws.bounds):
                problems.append(f"obstakel {i}: ligt (deels) buiten de begrenzing")
                break
        if any(_shapes_overlap(p, goal_disc) for p in obs.pieces):
            problems.append(f"obstakel {i}: overlapt het doelgebied")
        for j in range(i + 1, len(ws.obstacles)):
            other = ws.obstacles[j]
            if any(_shapes_overlap(p, q) for p in obs.pieces for q in other.pieces):
                problems.append(f"obstakels {i} en {j} overlappen")
    return problems
