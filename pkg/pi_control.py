# pi_control.py
"""Uitvoeringsfase: path-integral schatting van psi en de open-lus besturing.

Rollouts worden per klasse in één numpy-batch gesimuleerd. Gewichten staan
in het log-domein en worden pas bij het middelen met een gezamenlijke
max-shift geëxponentieerd.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from dynamics import ControlTape, SdeModel, Trajectory, em_step, rollout_cost
from environment import ExitClass

log = logging.getLogger(__name__)

MAX_STEPS_FACTOR = 4
MIN_ROLLOUT_STEPS = 10


class DegenerateEstimate(RuntimeError):
    """Alle rollout-gewichten zijn nul."""


@dataclass(frozen=True, eq=False)
class MeasureSpec:
    """Rollout-maat: passief (geen referentie) of verschoven met u_in."""
    model: SdeModel
    reference: ControlTape | None = None

    def controls(self, steps: int) -> np.ndarray:
        m = self.model.control_dim
        if self.reference is None:
            return np.zeros((steps, m))
        return self.reference.padded(steps, m)


@dataclass(frozen=True, eq=False)
class RolloutResult:
    log_weight: float
    increments: np.ndarray
    exit: ExitClass
    steps: int
    truncated: bool = False

    @property
    def weight(self) -> float:
        return math.exp(self.log_weight) if self.log_weight > -math.inf else 0.0


@dataclass(frozen=True, eq=False)
class RolloutBatch:
    log_weights: np.ndarray       # (N,)
    increments: np.ndarray        # (N, T, m), nul na exit
    controls: np.ndarray          # (T, m) u_in per opgeslagen stap
    exits: np.ndarray             # (N,) ExitClass-codes
    steps: np.ndarray             # (N,)
    truncated: np.ndarray         # (N,)


@dataclass(frozen=True, eq=False)
class ClassEstimate:
    psi: float
    log_psi: float
    se: float
    tape: ControlTape
    n_valid: int
    n_goal: int


@dataclass(frozen=True, eq=False)
class PiEstimate:
    psi_hat: float
    log_psi_hat: float
    se: float
    control_tape: ControlTape
    per_class: list[ClassEstimate] = field(default_factory=list)

    @property
    def dominant_class(self) -> int:
        return int(np.argmax([c.log_psi for c in self.per_class]))


def _seed_sequence(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed)


def child_stream(seq: np.random.SeedSequence, *key: int) -> np.random.Generator:
    """Reproduceerbare deelstroom (root seed + sleutel), los van volgorde van aanmaak."""
    child = np.random.SeedSequence(entropy=seq.entropy, spawn_key=tuple(seq.spawn_key) + tuple(key))
    return np.random.default_rng(child)


def girsanov_gain(model: SdeModel) -> np.ndarray:
    """G_c' Sigma_c^-1 B_c met Sigma_c = G_c R^-1 G_c'."""
    G_c, B_c = model.G_c, model.B_c
    sigma = G_c @ np.linalg.solve(model.R, G_c.T)
    return G_c.T @ np.linalg.solve(sigma, B_c)


# ── Rollouts ──

def simulate_batch(spec: MeasureSpec, x0, env, n: int, rng: np.random.Generator,
                   max_steps: int, store_steps: int | None = None) -> RolloutBatch:
    """N rollouts tot exit of max_steps; rollout k leest rij k van elk ruisblok."""
    model = spec.model
    m, dt = model.control_dim, model.dt
    sqrt_dt = math.sqrt(dt)
    store = max_steps if store_steps is None else min(store_steps, max_steps)
    pos = model.position_dim
    k_head = model.heading_index
    gain = girsanov_gain(model)

    X = np.tile(np.asarray(x0, dtype=float), (n, 1))
    alive = np.ones(n, dtype=bool)
    running = np.zeros(n)
    exits = np.full(n, int(ExitClass.INTERIOR), dtype=np.int8)
    steps = np.zeros(n, dtype=int)
    Z_store = np.zeros((n, store, m))
    U = spec.controls(max_steps)

    for i in range(max_steps):
        idx = np.flatnonzero(alive)
        if idx.size == 0:
            break
        Z = rng.standard_normal((n, m))[idx]
        u = U[i]
        running[idx] += model.running_cost(u) + Z @ (gain.T @ u) / sqrt_dt
        X[idx] = em_step(model, X[idx], np.broadcast_to(u, (idx.size, m)), Z, dt)
        if i < store:
            Z_store[idx, i] = Z
        steps[idx] += 1
        headings = None if k_head is None else X[idx, k_head]
        codes = env.classify_exit_batch(X[idx, :pos], headings)
        done = codes != int(ExitClass.INTERIOR)
        exits[idx[done]] = codes[done]
        alive[idx[done]] = False

    truncated = alive
    exits[truncated] = int(ExitClass.FAILURE)
    phi = model.terminal_costs(exits)
    with np.errstate(invalid="ignore"):
        log_w = np.where(np.isinf(phi), -np.inf, -(phi + dt * running) / model.lam)
    return RolloutBatch(log_w, Z_store, U[:store], exits, steps, truncated)


def rollout(spec: MeasureSpec, x0, env, rng: np.random.Generator, max_steps: int) -> RolloutResult:
    batch = simulate_batch(spec, x0, env, 1, rng, max_steps)
    n_steps = int(batch.steps[0])
    return RolloutResult(float(batch.log_weights[0]), batch.increments[0, :n_steps].copy(),
                         ExitClass(int(batch.exits[0])), n_steps, bool(batch.truncated[0]))


# ── Schatters ──

def combine(batches: list[RolloutBatch], model: SdeModel, center: bool = True) -> PiEstimate:
    """Mengsel over klassen: gedeelde psi in de noemer, vaste optelvolgorde."""
    finite = [b.log_weights[np.isfinite(b.log_weights)] for b in batches]
    if not any(len(f) for f in finite):
        raise DegenerateEstimate("alle gewichten zijn nul")
    shift = max(float(f.max()) for f in finite if len(f))
    dt = model.dt
    noise_gain = np.linalg.solve(model.G_c, model.B_c) * math.sqrt(dt)
    H = len(batches)

    scaled, sums = [], []
    for b in batches:
        w = np.exp(b.log_weights - shift)
        Z = b.increments - b.increments.mean(axis=0) if center else b.increments
        num = w.sum() * b.controls * dt + np.einsum("k,kti->ti", w, Z) @ noise_gain.T
        scaled.append(w)
        sums.append(num)

    mean_w = np.array([w.mean() for w in scaled])
    psi_tilde = mean_w.mean()
    # gelijke N per klasse: sum_h sum_k w = H * N * psi
    control = np.sum(sums, axis=0) / sum(w.sum() for w in scaled) / dt

    # psi onderloopt naar 0 bij kleine lambda; log_psi blijft eindig
    scale = math.exp(shift) if shift < 700 else math.inf
    per_class = []
    for b, w, num, mw in zip(batches, scaled, sums, mean_w):
        se_w = w.std(ddof=1) / math.sqrt(len(w)) if len(w) > 1 else 0.0
        log_psi = shift + math.log(mw) if mw > 0 else -math.inf
        per_class.append(ClassEstimate(
            psi=float(mw * scale), log_psi=log_psi, se=float(se_w * scale),
            tape=ControlTape(dt, num / (len(w) * psi_tilde) / dt),
            n_valid=int(np.isfinite(b.log_weights).sum()),
            n_goal=int((b.exits == int(ExitClass.GOAL)).sum()),
        ))
    se = math.sqrt(sum(c.se ** 2 for c in per_class)) / H
    return PiEstimate(
        psi_hat=float(psi_tilde * scale), log_psi_hat=shift + math.log(psi_tilde), se=se,
        control_tape=ControlTape(dt, control), per_class=per_class,
    )


def _default_max_steps(specs: list[MeasureSpec]) -> int:
    longest = max((len(s.reference) for s in specs if s.reference is not None), default=0)
    if longest == 0:
        raise ValueError("max_steps is verplicht zonder referentietapes")
    return max(MAX_STEPS_FACTOR * longest, MIN_ROLLOUT_STEPS)


def estimate_importance(specs: list[MeasureSpec], x0, env, n_samples: int, seed, *,
                        max_steps: int | None = None, tape_steps: int | None = None,
                        center: bool = True, workers: int = 1) -> PiEstimate:
    """N rollouts per klasse onder de eigen maat; gewichten met Girsanov-correctie."""
    if not specs:
        raise ValueError("minstens één maat nodig")
    if n_samples < 1:
        raise ValueError("n_samples moet >= 1 zijn")
    seq = _seed_sequence(seed)
    steps = max_steps if max_steps is not None else _default_max_steps(specs)

    def run(h: int) -> RolloutBatch:
        return simulate_batch(specs[h], x0, env, n_samples, child_stream(seq, h), steps, tape_steps)

    if workers > 1 and len(specs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            batches = list(pool.map(run, range(len(specs))))
    else:
        batches = [run(h) for h in range(len(specs))]
    return combine(batches, specs[0].model, center)


def estimate_passive(model: SdeModel, x0, env, n_samples: int, seed, *, max_steps: int,
                     tape_steps: int | None = None, center: bool = True) -> PiEstimate:
    return estimate_importance([MeasureSpec(model)], x0, env, n_samples, seed,
                               max_steps=max_steps, tape_steps=tape_steps, center=center)


# ── Receding horizon ──

@dataclass
class RecedingHorizonConfig:
    n_samples: int = 200
    max_steps: int | None = None
    max_wall_steps: int = 1000
    center_increments: bool = True
    workers: int = 1


@dataclass
class StepRecord:
    t: float
    x: np.ndarray
    u: np.ndarray
    psi_hat: float
    dominant: str
    psi_per_class: dict[str, float]
    fallback: bool = False
    log_psi_hat: float = -math.inf
    log_psi_per_class: dict[str, float] = field(default_factory=dict)


@dataclass
class RecedingHorizonResult:
    trace: Trajectory
    reached_goal: bool
    realized_cost: float
    exit: ExitClass
    steps: int
    records: list[StepRecord]
    initial_references: list
    reason: str | None = None

    @property
    def class_history(self) -> list[str]:
        return [r.dominant for r in self.records]


def run_receding_horizon(model: SdeModel, env, graph, x0, seed: int,
                         config: RecedingHorizonConfig | None = None) -> RecedingHorizonResult:
    """Schat, pas één periode dt toe met verse ruis, herhaal tot exit.

    De graaf wordt aangevuld met de opgevraagde toestanden; geef een kopie mee
    als hij ongewijzigd moet blijven.
    """
    config = config or RecedingHorizonConfig()
    dt, m = model.dt, model.control_dim
    x = np.asarray(x0, dtype=float)
    states, controls, records = [x], [], []
    initial_refs = None
    exit_class = ExitClass.INTERIOR
    reason = None

    for step in range(config.max_wall_steps):
        refs = graph.extract_reference(x)
        if initial_refs is None:
            initial_refs = refs
        specs = [MeasureSpec(model, r.tape) for r in refs]
        try:
            est = estimate_importance(
                specs, x, env, config.n_samples, np.random.SeedSequence(seed, spawn_key=(0, step)),
                max_steps=config.max_steps, tape_steps=1, center=config.center_increments,
                workers=config.workers,
            )
            u = est.control_tape.controls[0]
            dominant = refs[est.dominant_class].label
            psi, log_psi = est.psi_hat, est.log_psi_hat
            per_class = {r.label: c.psi for r, c in zip(refs, est.per_class)}
            log_per_class = {r.label: c.log_psi for r, c in zip(refs, est.per_class)}
            fallback = False
        except DegenerateEstimate:
            log.warning("stap %d: psi = 0, val terug op goedkoopste referentie", step)
            u = refs[0].tape.at(0, m)
            dominant, psi, per_class, fallback = refs[0].label, 0.0, {}, True
            log_psi, log_per_class = -math.inf, {}

        records.append(StepRecord(step * dt, x, u, psi, dominant, per_class, fallback,
                                  log_psi_hat=log_psi, log_psi_per_class=log_per_class))
        z = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(1, step))).standard_normal(m)
        x = em_step(model, x, u, z, dt)
        states.append(x)
        controls.append(u)
        k = model.heading_index
        exit_class = env.classify_exit(x[:model.position_dim], None if k is None else float(x[k]))
        if exit_class != ExitClass.INTERIOR:
            break
    else:
        reason = "max_wall_steps"
        log.warning("run afgebroken na %d stappen", config.max_wall_steps)

    if exit_class == ExitClass.FAILURE:
        reason = "botsing of buitenrand"
    times = np.arange(len(states)) * dt
    trace = Trajectory(times, np.array(states), np.array(controls).reshape(len(controls), m))
    cost = rollout_cost(model, trace, ControlTape(dt, trace.controls), env)
    return RecedingHorizonResult(
        trace=trace, reached_goal=exit_class == ExitClass.GOAL, realized_cost=cost,
        exit=exit_class, steps=len(controls), records=records,
        initial_references=initial_refs or [], reason=reason,
    )
