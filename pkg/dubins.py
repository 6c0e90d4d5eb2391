# dubins.py
"""Kortste Dubins-krommen (zes woorden) onder |u| <= 1."""

import logging
import math
from dataclasses import dataclass

import numpy as np

from dynamics import ControlProfile

log = logging.getLogger(__name__)

TWO_PI = 2 * math.pi
ENDPOINT_TOLERANCE = 1e-6
_SNAP = 1e-9

WORDS = ("LSL", "RSR", "LSR", "RSL", "RLR", "LRL")
_CURVATURE = {"L": 1.0, "S": 0.0, "R": -1.0}


def mod2pi(theta: float) -> float:
    v = theta % TWO_PI
    return 0.0 if v > TWO_PI - _SNAP else v


def _sqrt_clamped(value: float) -> float | None:
    if value < -_SNAP:
        return None
    return math.sqrt(max(value, 0.0))


def _acos_clamped(value: float) -> float | None:
    if abs(value) > 1.0 + _SNAP:
        return None
    return math.acos(min(1.0, max(-1.0, value)))


# Genormaliseerde woordlengtes (t, p, q) in eenheden van de draaistraal.

def _lsl(a, b, d, sa, ca, sb, cb, cab):
    p = _sqrt_clamped(2 + d * d - 2 * cab + 2 * d * (sa - sb))
    if p is None:
        return None
    tmp = math.atan2(cb - ca, d + sa - sb)
    return mod2pi(tmp - a), p, mod2pi(b - tmp)


def _rsr(a, b, d, sa, ca, sb, cb, cab):
    p = _sqrt_clamped(2 + d * d - 2 * cab + 2 * d * (sb - sa))
    if p is None:
        return None
    tmp = math.atan2(ca - cb, d - sa + sb)
    return mod2pi(a - tmp), p, mod2pi(tmp - b)


def _lsr(a, b, d, sa, ca, sb, cb, cab):
    p = _sqrt_clamped(-2 + d * d + 2 * cab + 2 * d * (sa + sb))
    if p is None:
        return None
    tmp = math.atan2(-ca - cb, d + sa + sb) - math.atan2(-2.0, p)
    return mod2pi(tmp - a), p, mod2pi(tmp - mod2pi(b))


def _rsl(a, b, d, sa, ca, sb, cb, cab):
    p = _sqrt_clamped(-2 + d * d + 2 * cab - 2 * d * (sa + sb))
    if p is None:
        return None
    tmp = math.atan2(ca + cb, d - sa - sb) - math.atan2(2.0, p)
    return mod2pi(a - tmp), p, mod2pi(b - tmp)


def _rlr(a, b, d, sa, ca, sb, cb, cab):
    acos = _acos_clamped((6.0 - d * d + 2 * cab + 2 * d * (sa - sb)) / 8.0)
    if acos is None:
        return None
    phi = math.atan2(ca - cb, d - sa + sb)
    p = mod2pi(TWO_PI - acos)
    t = mod2pi(a - phi + mod2pi(p / 2.0))
    return t, p, mod2pi(a - b - t + mod2pi(p))


def _lrl(a, b, d, sa, ca, sb, cb, cab):
    acos = _acos_clamped((6.0 - d * d + 2 * cab + 2 * d * (sb - sa)) / 8.0)
    if acos is None:
        return None
    phi = math.atan2(ca - cb, d + sa - sb)
    p = mod2pi(TWO_PI - acos)
    t = mod2pi(-a - phi + p / 2.0)
    return t, p, mod2pi(mod2pi(b) - a - t + mod2pi(p))


_SOLVERS = {"LSL": _lsl, "RSR": _rsr, "LSR": _lsr, "RSL": _rsl, "RLR": _rlr, "LRL": _lrl}


@dataclass(frozen=True)
class DubinsPath:
    word: str
    lengths: tuple[float, float, float]   # genormaliseerd
    turning_radius: float
    speed: float

    @property
    def length(self) -> float:
        return sum(self.lengths) * self.turning_radius

    @property
    def duration(self) -> float:
        return self.length / self.speed

    @property
    def profile(self) -> ControlProfile:
        rho = self.turning_radius / self.speed
        return ControlProfile(tuple(
            (l * rho, np.array([_CURVATURE[c]]))
            for c, l in zip(self.word, self.lengths) if l > 0
        ))

    def endpoint(self, x1) -> np.ndarray:
        x, y, th = map(float, x1)
        for c, l in zip(self.word, self.lengths):
            k = _CURVATURE[c]
            if k == 0.0:
                x += self.turning_radius * l * math.cos(th)
                y += self.turning_radius * l * math.sin(th)
            else:
                x += self.turning_radius * (math.sin(th + k * l) - math.sin(th)) / k
                y -= self.turning_radius * (math.cos(th + k * l) - math.cos(th)) / k
                th += k * l
        return np.array([x, y, th])


def _endpoint_error(path: DubinsPath, x1, x2) -> float:
    end = path.endpoint(x1)
    heading = abs((end[2] - x2[2] + math.pi) % TWO_PI - math.pi)
    return max(math.hypot(end[0] - x2[0], end[1] - x2[1]), heading)


def candidates(x1, x2, speed: float, rho: float) -> list[DubinsPath]:
    """Alle geldige woorden waarvan het eindpunt exact klopt."""
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    radius = speed * rho
    dx, dy = x2[0] - x1[0], x2[1] - x1[1]
    d = math.hypot(dx, dy) / radius
    phi = math.atan2(dy, dx) if d > 0 else 0.0
    a = mod2pi(x1[2] - phi)
    b = mod2pi(x2[2] - phi)
    sa, ca, sb, cb = math.sin(a), math.cos(a), math.sin(b), math.cos(b)
    cab = math.cos(a - b)
    out = []
    for word in WORDS:
        lengths = _SOLVERS[word](a, b, d, sa, ca, sb, cb, cab)
        if lengths is None:
            continue
        path = DubinsPath(word, tuple(float(v) for v in lengths), radius, speed)
        if _endpoint_error(path, x1, x2) < ENDPOINT_TOLERANCE:
            out.append(path)
        else:
            log.debug("Dubins-woord %s verworpen (eindpuntfout)", word)
    return out


def shortest_path(x1, x2, speed: float = 1.0, rho: float = 1.0) -> DubinsPath:
    paths = candidates(x1, x2, speed, rho)
    if not paths:
        raise RuntimeError(f"geen geldige Dubins-verbinding van {x1} naar {x2}")
    return min(paths, key=lambda p: p.length)
