# dynamics.py
"""Controle-affiene SDE-modellen, Euler-Maruyama, kostfunctionaal en exacte TPBVP's."""

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from environment import ExitClass

INTEGRATOR = "integrator"
DUBINS = "dubins"
RESIDUAL_TOLERANCE = 1e-9


class NonFiniteState(ArithmeticError):
    """Euler-Maruyama stap leverde een niet-eindige toestand op."""


class ModelInconsistent(ValueError):
    """Model schendt de lambda-voorwaarde of de partitionering."""


# ── Modellen ──

def _zero_drift(x: np.ndarray) -> np.ndarray:
    return np.zeros_like(x)


def _unicycle_drift(speed: float) -> Callable[[np.ndarray], np.ndarray]:
    def drift(x: np.ndarray) -> np.ndarray:
        out = np.zeros_like(x)
        out[..., 0] = speed * np.cos(x[..., 2])
        out[..., 1] = speed * np.sin(x[..., 2])
        return out
    return drift


@dataclass(frozen=True, eq=False)
class SdeModel:
    """dX = f(X)dt + G(X)u dt + B(X)dW met constante G, B, R en q.

    G en B zijn n x m met nul bovenste (n - m) rijen; het onderste m x m blok
    is G_c resp. B_c.
    """
    kind: str
    state_dim: int
    control_dim: int
    drift: Callable[[np.ndarray], np.ndarray]
    G: np.ndarray
    B: np.ndarray
    R: np.ndarray
    q: float
    lam: float
    dt: float
    phi_goal: float = 0.0
    phi_fail: float = math.inf
    params: dict = field(default_factory=dict)

    @property
    def G_c(self) -> np.ndarray:
        return self.G[-self.control_dim:]

    @property
    def B_c(self) -> np.ndarray:
        return self.B[-self.control_dim:]

    @property
    def heading_index(self) -> int | None:
        return 2 if self.kind == DUBINS else None

    @property
    def position_dim(self) -> int:
        return min(self.state_dim, 2)

    def terminal_cost(self, exit_class) -> float:
        if ExitClass(exit_class) == ExitClass.GOAL:
            return self.phi_goal
        return self.phi_fail

    def terminal_costs(self, codes: np.ndarray) -> np.ndarray:
        return np.where(codes == int(ExitClass.GOAL), self.phi_goal, self.phi_fail)

    def running_cost(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        return self.q + 0.5 * np.einsum("...i,ij,...j->...", u, self.R, u)

    def with_lambda(self, lam: float) -> "SdeModel":
        return SdeModel(self.kind, self.state_dim, self.control_dim, self.drift, self.G, self.B,
                        self.R, self.q, float(lam), self.dt, self.phi_goal, self.phi_fail,
                        dict(self.params, lam_override=float(lam)))


def single_integrator_model(b: float, q: float = 1.0, r: float = 2.0, dt: float = 0.1,
                            phi_fail: float = math.inf, dim: int = 2) -> SdeModel:
    """f = 0, G = I, B = b*I, R = r*I; lambda = r*b^2."""
    if b <= 0:
        raise ValueError("b moet positief zijn")
    eye = np.eye(dim)
    return SdeModel(
        kind=INTEGRATOR, state_dim=dim, control_dim=dim, drift=_zero_drift,
        G=eye.copy(), B=b * eye, R=r * eye, q=float(q), lam=float(r * b * b), dt=float(dt),
        phi_fail=float(phi_fail), params={"b": float(b), "r": float(r)},
    )


def dubins_model(V: float, rho: float, b: float, q: float = 1.0, R: float = 1.0,
                 dt: float = 0.05, phi_fail: float = 1000.0) -> SdeModel:
    """Unicycle met vaste snelheid V; stuurbare hoeksnelheid u/rho; lambda = R*b^2*rho^2."""
    if min(V, rho, b) <= 0:
        raise ValueError("V, rho en b moeten positief zijn")
    return SdeModel(
        kind=DUBINS, state_dim=3, control_dim=1, drift=_unicycle_drift(float(V)),
        G=np.array([[0.0], [0.0], [1.0 / rho]]), B=np.array([[0.0], [0.0], [b]]),
        R=np.array([[float(R)]]), q=float(q), lam=float(R * b * b * rho * rho), dt=float(dt),
        phi_fail=float(phi_fail), params={"b": float(b), "V": float(V), "rho": float(rho)},
    )


# ── Controles op het model ──

def lambda_residual(model: SdeModel, x=None) -> float:
    """Frobenius-norm van lambda G_c R^-1 G_c' - B_c B_c' (constant in x)."""
    G_c, B_c = model.G_c, model.B_c
    lhs = model.lam * G_c @ np.linalg.solve(model.R, G_c.T)
    return float(np.linalg.norm(lhs - B_c @ B_c.T, ord="fro"))


def check_model(model: SdeModel, states) -> list[str]:
    problems = []
    states = np.atleast_2d(np.asarray(states, dtype=float))
    worst = max((lambda_residual(model, x) for x in states), default=lambda_residual(model))
    if worst >= RESIDUAL_TOLERANCE:
        problems.append(f"lambda-voorwaarde geschonden: residu {worst:.3e}")
    top = model.state_dim - model.control_dim
    if np.any(model.G[:top] != 0) or np.any(model.B[:top] != 0):
        problems.append("bovenste rijen van G of B zijn niet nul")
    for name, block in (("G_c", model.G_c), ("B_c", model.B_c), ("R", model.R)):
        if not np.isfinite(np.linalg.cond(block)):
            problems.append(f"{name} is singulier")
    if model.lam <= 0:
        problems.append("lambda moet positief zijn")
    return problems


def require_consistent(model: SdeModel, states=None) -> None:
    problems = check_model(model, states if states is not None else np.zeros((1, model.state_dim)))
    if problems:
        raise ModelInconsistent("; ".join(problems))


# ── Trajectories en tapes ──

@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    controls: np.ndarray | None = None

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        states = np.atleast_2d(np.asarray(self.states, dtype=float))
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "states", states)
        if len(times) != len(states):
            raise ValueError("times en states hebben verschillende lengte")
        if len(times) > 1 and np.any(np.diff(times) <= 0):
            raise ValueError("times moeten strikt stijgend zijn")
        if self.controls is not None:
            controls = np.asarray(self.controls, dtype=float).reshape(len(times) - 1, -1) \
                if len(times) > 1 else np.zeros((0, 0))
            object.__setattr__(self, "controls", controls)


@dataclass(frozen=True, eq=False)
class ControlTape:
    dt: float
    controls: np.ndarray

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt moet positief zijn")
        controls = np.asarray(self.controls, dtype=float)
        if controls.ndim != 2:
            controls = controls.reshape(len(controls), -1) if controls.size else np.zeros((0, 1))
        object.__setattr__(self, "controls", controls)

    def __len__(self) -> int:
        return len(self.controls)

    @property
    def duration(self) -> float:
        return len(self) * self.dt

    def at(self, i: int, m: int | None = None) -> np.ndarray:
        """Besturing voor stap i; na het einde van de tape de nulbesturing."""
        if 0 <= i < len(self):
            return self.controls[i]
        return np.zeros(m if m is not None else self.controls.shape[1])

    def padded(self, steps: int, m: int) -> np.ndarray:
        out = np.zeros((steps, m))
        n = min(steps, len(self))
        if n:
            out[:n] = self.controls[:n, :m]
        return out


@dataclass(frozen=True, eq=False)
class ControlProfile:
    """Stuksgewijs constante besturing: segmenten (duur, u)."""
    segments: tuple[tuple[float, np.ndarray], ...]

    @property
    def duration(self) -> float:
        return float(sum(d for d, _ in self.segments))

    def __add__(self, other: "ControlProfile") -> "ControlProfile":
        return ControlProfile(self.segments + other.segments)

    def to_list(self) -> list:
        return [[float(d), [float(v) for v in np.ravel(u)]] for d, u in self.segments]

    @classmethod
    def from_list(cls, data) -> "ControlProfile":
        return cls(tuple((float(d), np.asarray(u, dtype=float)) for d, u in data))


def exact_flow(model: SdeModel, x0, u, t) -> np.ndarray:
    """Deterministische toestand na tijden t onder constante besturing u."""
    x0 = np.asarray(x0, dtype=float)
    u = np.asarray(u, dtype=float).ravel()
    t = np.asarray(t, dtype=float)
    if model.kind == INTEGRATOR:
        return x0 + t[:, None] * (model.G @ u)[None, :]
    if model.kind == DUBINS:
        V = model.params["V"]
        omega = float(model.G[2] @ u)
        theta = x0[2] + omega * t
        if abs(omega) < 1e-12:
            xs = x0[0] + V * t * np.cos(x0[2])
            ys = x0[1] + V * t * np.sin(x0[2])
        else:
            xs = x0[0] + V / omega * (np.sin(theta) - np.sin(x0[2]))
            ys = x0[1] - V / omega * (np.cos(theta) - np.cos(x0[2]))
        return np.stack([xs, ys, theta], axis=1)
    raise ValueError(f"Geen exacte stroming voor model '{model.kind}'")


def _position_speed(model: SdeModel, u) -> float:
    if model.kind == DUBINS:
        return model.params["V"]
    return float(np.linalg.norm((model.G @ np.ravel(u))[:2]))


def integrate_profile(model: SdeModel, x0, profile: ControlProfile, resolution: float) -> Trajectory:
    """Exacte integratie, bemonsterd met koorden niet groter dan de resolutie."""
    x = np.asarray(x0, dtype=float)
    times, states, controls = [0.0], [x], []
    t0 = 0.0
    for duration, u in profile.segments:
        if duration <= 0:
            continue
        speed = _position_speed(model, u)
        n = max(1, int(math.ceil(duration * speed / (0.999 * resolution))))
        ts = np.linspace(0.0, duration, n + 1)[1:]
        seg = exact_flow(model, x, u, ts)
        times.extend(t0 + ts)
        states.extend(seg)
        controls.extend([np.ravel(u)] * n)
        x = seg[-1]
        t0 += duration
    ctrl = np.array(controls) if controls else None
    return Trajectory(np.array(times), np.array(states), ctrl)


def discretize_profile(profile: ControlProfile, dt: float, m: int) -> ControlTape:
    """Tape met per dt-bin het gemiddelde (integraal / dt) van het profiel."""
    durations = np.array([d for d, _ in profile.segments], dtype=float)
    if len(durations) == 0 or durations.sum() <= 0:
        return ControlTape(dt, np.zeros((0, m)))
    U = np.array([np.ravel(u) for _, u in profile.segments], dtype=float).reshape(len(durations), m)
    ends = np.cumsum(durations)
    starts = ends - durations
    total = ends[-1]
    n_bins = max(1, int(math.ceil(total / dt - 1e-9)))
    lo = np.arange(n_bins)[:, None] * dt
    hi = lo + dt
    overlap = np.clip(np.minimum(hi, ends[None, :]) - np.maximum(lo, starts[None, :]), 0.0, None)
    return ControlTape(dt, overlap @ U / dt)


# ── Euler-Maruyama ──

def em_step(model: SdeModel, x, u, z, dt: float) -> np.ndarray:
    """x + f(x)dt + G u dt + B z sqrt(dt); werkt ook op batches (K, n)."""
    if dt <= 0:
        raise ValueError("dt moet positief zijn")
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    z = np.asarray(z, dtype=float)
    out = x + model.drift(x) * dt + (u @ model.G.T) * dt + (z @ model.B.T) * math.sqrt(dt)
    if not np.all(np.isfinite(out)):
        raise NonFiniteState("niet-eindige toestand na Euler-Maruyama stap")
    return out


# ── TPBVP ──

@dataclass(frozen=True, eq=False)
class TpbvpSolution:
    traj: Trajectory
    tape: ControlTape
    cost: float
    profile: ControlProfile


def tpbvp_profile(model: SdeModel, x1, x2) -> tuple[ControlProfile, float]:
    """Optimaal obstakelvrij profiel van x1 naar x2 en de deterministische kost."""
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    if model.kind == INTEGRATOR:
        e = x2 - x1
        d = float(np.linalg.norm(e))
        if d == 0.0:
            return ControlProfile(()), 0.0
        unit = e / d
        r_e = float(unit @ model.R @ unit)
        T = d * math.sqrt(r_e / (2.0 * model.q))
        return ControlProfile(((T, e / T),)), d * math.sqrt(2.0 * model.q * r_e)
    if model.kind == DUBINS:
        from dubins import shortest_path
        path = shortest_path(x1, x2, model.params["V"], model.params["rho"])
        return path.profile, model.q * path.duration
    raise ValueError(f"Geen TPBVP voor model '{model.kind}'")


def tpbvp(model: SdeModel, x1, x2, resolution: float = 0.05) -> TpbvpSolution:
    profile, cost = tpbvp_profile(model, x1, x2)
    traj = integrate_profile(model, x1, profile, resolution)
    tape = discretize_profile(profile, model.dt, model.control_dim)
    return TpbvpSolution(traj, tape, cost, profile)


# ── Kost ──

def rollout_cost(model: SdeModel, traj: Trajectory, tape: ControlTape, env) -> float:
    """phi(exit-klasse van de eindtoestand) + som (q + u'Ru/2) dt; binnenin eindigen telt als falen."""
    states = traj.states
    heading = None if model.heading_index is None else float(states[-1, model.heading_index])
    exit_class = env.classify_exit(states[-1, :model.position_dim], heading)
    phi = model.terminal_cost(exit_class) if exit_class != ExitClass.INTERIOR else model.phi_fail
    steps = len(states) - 1
    if steps == 0:
        return float(phi)
    U = tape.padded(steps, model.control_dim)
    return float(phi + model.running_cost(U).sum() * tape.dt)
