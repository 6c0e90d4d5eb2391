# tests/test_topology.py
from pathlib import Path

import numpy as np
import pytest

from csv_io import read_path_csv
from scenarios import build_workspace, load_scenario
from topology import (
    ClassFilter, DegenerateSegment, LengthMismatch, absmin, h_key, homologous, is_allowed,
    path_signature, realized_class, segment_signature,
)

SAMPLE_DIR = Path(__file__).parent / "sample_data"
REPS = np.array([[5.0, 2.0], [5.0, 3.0]])


def _winding(points: np.ndarray, rep, n: int = 40000) -> float:
    """Numerieke lijnintegraal van Im(dz / (z - zeta)) / 2pi (middelpuntregel)."""
    z = points[:, 0] + 1j * points[:, 1]
    zeta = complex(rep[0], rep[1])
    t = (np.arange(n) + 0.5) / n
    total = 0.0
    for a, b in zip(z[:-1], z[1:]):
        mid = a + t * (b - a)
        total += np.sum(((b - a) / n / (mid - zeta)).imag)
    return total / (2 * np.pi)


def _segment_distance(a, b, p) -> float:
    ab = b - a
    t = np.clip((p - a) @ ab / (ab @ ab), 0.0, 1.0) if ab @ ab > 0 else 0.0
    return float(np.linalg.norm(a + t * ab - p))


def _random_polyline(rng, start, end, n_mid=3) -> np.ndarray:
    while True:
        mid = np.column_stack([rng.uniform(0.5, 9.5, n_mid), rng.uniform(0.2, 4.8, n_mid)])
        pts = np.vstack([start, mid, end])
        gaps = [_segment_distance(a, b, r) for a, b in zip(pts[:-1], pts[1:]) for r in REPS]
        if min(gaps) > 0.1:
            return pts


def test_absmin_examples():
    assert absmin([3.5 + k * 2 * np.pi for k in range(-2, 3)]) == pytest.approx(3.5 - 2 * np.pi)
    assert absmin([0.0, 2 * np.pi, -2 * np.pi]) == 0.0
    assert absmin([np.pi, -np.pi]) == np.pi
    assert absmin([-np.pi, np.pi]) == np.pi


def test_segment_signature_examples():
    h = segment_signature([-1.0, 0.0], [1.0, 0.0], np.array([[0.0, 1.0]]))
    assert h[0] == pytest.approx(0.25)
    h = segment_signature([0.0, 0.0], [1.0, 0.0], np.array([[0.5, 10.0]]))
    assert h[0] == pytest.approx(0.0159, abs=1e-4)
    assert np.all(segment_signature([1.0, 1.0], [1.0, 1.0], REPS) == 0.0)


def test_segment_signature_matches_line_integral():
    rng = np.random.default_rng(3)
    for _ in range(20):
        a, b = rng.uniform(0, 10, 2), rng.uniform(0, 10, 2)
        rep = rng.uniform(0, 10, 2)
        if _segment_distance(a, b, rep) < 0.2:
            continue
        expected = _winding(np.vstack([a, b]), rep)
        assert segment_signature(a, b, rep[None])[0] == pytest.approx(expected, abs=1e-6)


def test_segment_through_representative_point_is_degenerate():
    with pytest.raises(DegenerateSegment):
        segment_signature([5.0, 2.0], [6.0, 2.0], REPS)


def test_square_loop_from_csv():
    ws = build_workspace(load_scenario("integrator_two_obstacles"))
    loop = read_path_csv(SAMPLE_DIR / "square_loop.csv")
    h = path_signature(loop, ws)
    assert h == pytest.approx([1.0, 0.0], abs=1e-9)
    assert path_signature(loop[::-1], ws) == pytest.approx([-1.0, 0.0], abs=1e-9)


def test_closed_loops_have_integer_signatures():
    rng = np.random.default_rng(4)
    for _ in range(30):
        pts = _random_polyline(rng, np.array([1.0, 1.0]), np.array([1.0, 1.0]), n_mid=4)
        h = path_signature(pts, REPS)
        assert np.allclose(h, np.round(h), atol=1e-9)


def test_signature_is_additive():
    rng = np.random.default_rng(5)
    for _ in range(50):
        p1 = _random_polyline(rng, np.array([1.0, 2.5]), np.array([7.0, 1.0]))
        p2 = _random_polyline(rng, np.array([7.0, 1.0]), np.array([9.0, 2.5]))
        joined = np.vstack([p1, p2[1:]])
        assert path_signature(joined, REPS) == pytest.approx(
            path_signature(p1, REPS) + path_signature(p2, REPS), abs=1e-6)


def test_signature_is_reparameterization_invariant():
    rng = np.random.default_rng(6)
    pts = _random_polyline(rng, np.array([1.0, 2.5]), np.array([9.0, 2.5]))
    dense = np.vstack([a + np.linspace(0, 1, 37, endpoint=False)[:, None] * (b - a)
                       for a, b in zip(pts[:-1], pts[1:])] + [pts[-1:]])
    assert path_signature(dense, REPS) == pytest.approx(path_signature(pts, REPS), abs=1e-6)


def test_homology_agrees_with_winding_numbers():
    rng = np.random.default_rng(7)
    start, end = np.array([1.0, 2.5]), np.array([9.0, 2.5])
    for _ in range(50):
        p1 = _random_polyline(rng, start, end)
        p2 = _random_polyline(rng, start, end)
        loop = np.vstack([p1, p2[::-1][1:]])
        windings = np.array([_winding(loop, rep) for rep in REPS])
        same = bool(np.all(np.abs(windings) < 0.5))
        assert homologous(path_signature(p1, REPS), path_signature(p2, REPS)) == same


def test_paths_on_opposite_sides_are_not_homologous():
    above = np.array([[1.0, 2.5], [5.0, 4.5], [9.0, 2.5]])
    slit = np.array([[1.0, 2.5], [9.0, 2.5]])
    below = np.array([[1.0, 2.5], [5.0, 0.5], [9.0, 2.5]])
    hs = [path_signature(p, REPS) for p in (above, slit, below)]
    assert not homologous(hs[0], hs[1])
    assert not homologous(hs[1], hs[2])
    assert not homologous(hs[0], hs[2])


def test_homologous_examples():
    assert homologous([0.2, 0.5], [0.22, 0.48])
    assert not homologous([0.2, 0.5], [1.2, 0.5])
    with pytest.raises(LengthMismatch):
        homologous([0.2], [0.2, 0.5])


def test_is_allowed_examples():
    f = ClassFilter(0.6)
    assert is_allowed([1.0, 1.0], f)
    assert is_allowed([0.5, 1.5], f)
    assert not is_allowed([1.7, 1.0], f)
    assert is_allowed([25.0, -4.0], ClassFilter(float("inf")))
    assert not is_allowed([0.0, 0.0], ClassFilter(0.6, offset=np.array([1.0, 1.0])))


def test_h_key_is_readable():
    assert h_key([0.5391, -0.0001]) == "0.54|0.00"


def test_realized_class_matches_reference():
    start_to_goal = np.array([[1.0, 2.5], [5.0, 4.5], [8.9, 2.5]])
    goal_rep = np.array([9.0, 2.5])
    refs = [
        1.0 + path_signature(np.array([[1.0, 2.5], [9.0, 2.5]]), REPS),
        1.0 + path_signature(np.array([[1.0, 2.5], [5.0, 4.5], [9.0, 2.5]]), REPS),
    ]
    assert realized_class(start_to_goal, goal_rep, refs, REPS) == 1
    assert realized_class(np.array([[1.0, 2.5], [5.0, 0.5], [8.9, 2.5]]), goal_rep, refs, REPS) == -1
