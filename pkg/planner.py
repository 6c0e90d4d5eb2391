# planner.py
"""Expansiefase: RRG met knopensets per vertex (H-signatuur, kost, ouder).

Elke vertex draagt een set niet-gedomineerde knopen; samen vormen ze een
boom naar de doelwortels in de met H-signaturen uitgebreide ruimte.
"""

import heapq
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from dynamics import (
    ControlProfile, ControlTape, SdeModel, discretize_profile, integrate_profile, tpbvp_profile,
)
from environment import Workspace, wrap_angle
from topology import (
    DEFAULT_TOLERANCE, ClassFilter, h_key, homologous, is_allowed, path_signature, segment_signature,
)

log = logging.getLogger(__name__)

PROGRESS_EVERY = 500
COST_TOLERANCE = 1e-9
_SAME_STATE = 1e-9


class Unreachable(RuntimeError):
    """Toestand kan met geen enkele knoop verbonden worden."""


@dataclass
class Node:
    id: int
    vertex: int
    h: np.ndarray
    cost: float
    parent: int | None = None
    edge: int | None = None
    alive: bool = True


@dataclass
class Vertex:
    id: int
    x: np.ndarray
    nodes: list[int] = field(default_factory=list)
    is_root: bool = False


@dataclass
class Edge:
    """Verbinding src -> dst (rijrichting naar het doel)."""
    id: int
    src: int
    dst: int
    cost: float
    hsig: np.ndarray
    profile: ControlProfile


@dataclass
class Reference:
    tape: ControlTape
    h: np.ndarray
    cost: float
    profile: ControlProfile
    states: np.ndarray
    label: str


@dataclass
class ConnectResult:
    vertex: Vertex | None
    nodes: list[Node]
    edges: list[Edge]


class PlannerGraph:
    def __init__(self, model: SdeModel, workspace: Workspace, class_filter: ClassFilter,
                 gamma: float | None = None, max_radius: float = math.inf,
                 goal_bias: float = 0.05, heading_weight: float = 1.0,
                 tol: float = DEFAULT_TOLERANCE):
        self.model = model
        self.workspace = workspace
        self.filter = class_filter
        self.gamma = float(gamma) if gamma is not None else 2.5 * workspace.diagonal
        self.max_radius = float(max_radius)
        self.goal_bias = float(goal_bias)
        self.heading_weight = float(heading_weight)
        self.tol = float(tol)
        self.vertices: list[Vertex] = []
        self.nodes: list[Node] = []
        self.edges: list[Edge] = []
        self.in_edges: dict[int, list[int]] = {}
        self.children: dict[int, list[int]] = {}
        self.iterations = 0
        self._killed: list[int] = []

    # ── Basis ──

    @property
    def dim(self) -> int:
        return self.model.state_dim

    @property
    def n_obstacles(self) -> int:
        return len(self.workspace.obstacles)

    def live_nodes(self) -> list[Node]:
        return [n for n in self.nodes if n.alive]

    def near_radius(self) -> float:
        n = len(self.vertices) + 1
        if n < 2:
            return self.max_radius
        return min(self.gamma * (math.log(n) / n) ** (1.0 / self.dim), self.max_radius)

    def distances(self, x: np.ndarray) -> np.ndarray:
        if not self.vertices:
            return np.zeros(0)
        X = np.array([v.x for v in self.vertices])
        diff = X - x
        if self.model.heading_index is not None:
            k = self.model.heading_index
            diff[:, k] = self.heading_weight * wrap_angle(diff[:, k])
        return np.linalg.norm(diff, axis=1)

    def near(self, x: np.ndarray, exclude: int | None = None) -> list[int]:
        d = self.distances(x)
        idx = np.flatnonzero((d <= self.near_radius()) & (d > _SAME_STATE))
        return [int(i) for i in idx if i != exclude]

    def find_vertex(self, x) -> Vertex | None:
        d = self.distances(np.asarray(x, dtype=float))
        if len(d) and d.min() <= _SAME_STATE:
            return self.vertices[int(d.argmin())]
        return None

    def _connect(self, src: int, dst: int) -> Edge | None:
        """TPBVP van src naar dst; registreert de edge als hij botsingsvrij is."""
        a = self.vertices[src].x
        b = self.vertices[dst].x
        profile, cost = tpbvp_profile(self.model, a, b)
        if cost <= 0.0:
            return None
        traj = integrate_profile(self.model, a, profile, self.workspace.resolution)
        if not self.workspace.trajectory_free(traj):
            return None
        edge = Edge(len(self.edges), src, dst, float(cost),
                    path_signature(traj.states[:, :2], self.workspace), profile)
        self.edges.append(edge)
        self.in_edges.setdefault(dst, []).append(edge.id)
        return edge

    # ── Knopen ──

    def append_node(self, vertex: Vertex, node: Node) -> bool:
        """Voeg node toe tenzij geblokkeerd of gedomineerd; snoeit wat hij domineert."""
        if not is_allowed(node.h, self.filter):
            return False
        same_class = []
        for nid in vertex.nodes:
            other = self.nodes[nid]
            if homologous(other.h, node.h, self.tol):
                if other.cost <= node.cost:
                    return False
                same_class.append(nid)
        for nid in same_class:
            self._kill(nid)
        node.id = len(self.nodes)
        node.vertex = vertex.id
        self.nodes.append(node)
        vertex.nodes.append(node.id)
        if node.parent is not None:
            self.children.setdefault(node.parent, []).append(node.id)
        return True

    def _kill(self, nid: int) -> None:
        node = self.nodes[nid]
        node.alive = False
        self.vertices[node.vertex].nodes.remove(nid)
        self._killed.append(nid)

    def _drop_orphans(self) -> None:
        stack = list(self._killed)
        while stack:
            nid = stack.pop()
            for child in self.children.get(nid, []):
                if self.nodes[child].alive:
                    log.debug("knoop %d verliest ouder %d", child, nid)
                    self._kill(child)
                    stack.append(child)
        self._killed.clear()

    # ── Algoritme-stappen ──

    def add_root(self, x_new) -> Vertex | None:
        x_new = np.asarray(x_new, dtype=float)
        h = np.ones(self.n_obstacles) + segment_signature(x_new[:2], self.workspace.goal.rep, self.workspace)
        vertex = Vertex(len(self.vertices), x_new, [], is_root=True)
        self.vertices.append(vertex)
        if not self.append_node(vertex, Node(-1, vertex.id, h, 0.0)):
            self.vertices.pop()
            return None
        return vertex

    def choose_parent(self, x_new, retain: bool = True) -> ConnectResult:
        x_new = np.asarray(x_new, dtype=float)
        near = self.near(x_new)
        node_mark, edge_mark = len(self.nodes), len(self.edges)
        vertex = Vertex(len(self.vertices), x_new)
        self.vertices.append(vertex)
        for j in near:
            target = self.vertices[j]
            if not target.nodes:
                continue
            edge = self._connect(vertex.id, j)
            if edge is None:
                continue
            for nid in list(target.nodes):
                parent = self.nodes[nid]
                self.append_node(vertex, Node(-1, vertex.id, parent.h + edge.hsig,
                                              parent.cost + edge.cost, nid, edge.id))
        self._killed.clear()
        nodes = [self.nodes[i] for i in vertex.nodes]
        edges = self.edges[edge_mark:]
        if retain and vertex.nodes:
            return ConnectResult(vertex, nodes, edges)
        self._rollback(node_mark, edge_mark)
        return ConnectResult(None, nodes, edges)

    def _rollback(self, node_mark: int, edge_mark: int) -> None:
        self.vertices.pop()
        for node in self.nodes[node_mark:]:
            if node.parent is not None:
                self.children[node.parent].remove(node.id)
        del self.nodes[node_mark:]
        for edge in self.edges[edge_mark:]:
            self.in_edges[edge.dst].remove(edge.id)
        del self.edges[edge_mark:]

    def rewire(self, vertex: Vertex) -> None:
        """Achterwaartse edges naar vertex, daarna uniform-cost propagatie over inkomende edges."""
        for j in self.near(vertex.x, exclude=vertex.id):
            if not self.vertices[j].is_root:
                self._connect(j, vertex.id)
        counter = 0
        queue = []
        for nid in vertex.nodes:
            heapq.heappush(queue, (self.nodes[nid].cost, counter, nid))
            counter += 1
        while queue:
            _, _, nid = heapq.heappop(queue)
            node = self.nodes[nid]
            if not node.alive:
                continue
            for eid in self.in_edges.get(node.vertex, []):
                edge = self.edges[eid]
                src = self.vertices[edge.src]
                if src.is_root:
                    continue
                cand = Node(-1, src.id, node.h + edge.hsig, node.cost + edge.cost, nid, eid)
                if self.append_node(src, cand):
                    heapq.heappush(queue, (cand.cost, counter, cand.id))
                    counter += 1
        self._drop_orphans()

    # ── Bemonstering ──

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        goal = self.workspace.goal
        if rng.random() < self.goal_bias:
            r = goal.radius * math.sqrt(rng.random())
            a = rng.uniform(-math.pi, math.pi)
            pos = np.asarray(goal.center) + r * np.array([math.cos(a), math.sin(a)])
            if goal.heading_tolerance is not None:
                heading = rng.uniform(*goal.heading_tolerance)
            else:
                heading = rng.uniform(-math.pi, math.pi)
        else:
            xmin, ymin, xmax, ymax = self.workspace.bounds
            pos = np.array([rng.uniform(xmin, xmax), rng.uniform(ymin, ymax)])
            heading = rng.uniform(-math.pi, math.pi)
        if self.model.heading_index is None:
            return pos[:self.dim]
        return np.array([pos[0], pos[1], heading])

    def _in_goal(self, x: np.ndarray) -> bool:
        goal = self.workspace.goal
        if not goal.contains(x[:2]):
            return False
        k = self.model.heading_index
        return k is None or bool(goal.heading_ok(x[k]))

    def step(self, rng: np.random.Generator) -> Vertex | None:
        """Eén iteratie: bemonster, wortel of ouder kiezen, en rewire."""
        self.iterations += 1
        x = self.sample(rng)
        pos = x[:2]
        if not self.workspace.in_bounds(pos) or self.workspace.in_obstacle(pos):
            return None
        if self.workspace.goal.contains(pos):
            if not self._in_goal(x):
                return None
            vertex = self.add_root(x)
        else:
            vertex = self.choose_parent(x).vertex
        if vertex is not None and vertex.nodes:
            self.rewire(vertex)
        return vertex

    def expand(self, n_iter: int, rng) -> "PlannerGraph":
        rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
        for _ in range(n_iter):
            self.step(rng)
            if self.iterations % PROGRESS_EVERY == 0:
                log.info("iteratie %d: %d vertices, %d edges, %d knopen",
                         self.iterations, len(self.vertices), len(self.edges), len(self.live_nodes()))
        return self

    # ── Uitlezen ──

    def query_vertex(self, x) -> Vertex | None:
        """Bestaande vertex op x, anders ChooseParent zonder rewire (vertex blijft in de graaf)."""
        x = np.asarray(x, dtype=float)
        vertex = self.find_vertex(x)
        if vertex is not None:
            return vertex
        return self.choose_parent(x).vertex

    def chain(self, nid: int) -> list[Edge]:
        out = []
        node = self.nodes[nid]
        while node.parent is not None:
            out.append(self.edges[node.edge])
            node = self.nodes[node.parent]
        return out

    def extract_reference(self, x_cur) -> list[Reference]:
        x_cur = np.asarray(x_cur, dtype=float)
        vertex = self.query_vertex(x_cur)
        if vertex is None or not vertex.nodes:
            raise Unreachable(f"toestand {np.round(x_cur, 4).tolist()} is met geen knoop te verbinden")
        refs = []
        for nid in vertex.nodes:
            node = self.nodes[nid]
            profile = ControlProfile(())
            for edge in self.chain(nid):
                profile = profile + edge.profile
            traj = integrate_profile(self.model, vertex.x, profile, self.workspace.resolution)
            tape = discretize_profile(profile, self.model.dt, self.model.control_dim)
            refs.append(Reference(tape, node.h.copy(), node.cost, profile, traj.states,
                                  h_key(node.h, self.tol)))
        refs.sort(key=lambda r: r.cost)
        return refs

    def class_costs(self, x) -> dict[str, float]:
        vertex = self.query_vertex(x)
        if vertex is None:
            return {}
        return {h_key(self.nodes[i].h, self.tol): self.nodes[i].cost for i in vertex.nodes}

    def audit(self) -> list[str]:
        problems = []
        for node in self.live_nodes():
            if not is_allowed(node.h, self.filter):
                problems.append(f"knoop {node.id}: geblokkeerde klasse")
            if node.parent is None:
                if not self.vertices[node.vertex].is_root or node.cost != 0.0:
                    problems.append(f"knoop {node.id}: ouderloos maar geen wortel")
                continue
            parent = self.nodes[node.parent]
            edge = self.edges[node.edge]
            if not parent.alive:
                problems.append(f"knoop {node.id}: ouder {parent.id} is gesnoeid")
            if edge.src != node.vertex or edge.dst != parent.vertex:
                problems.append(f"knoop {node.id}: edge past niet bij ouder")
            if abs(node.cost - (parent.cost + edge.cost)) > COST_TOLERANCE:
                problems.append(f"knoop {node.id}: kost wijkt af van ouder + edge")
            if not homologous(node.h, parent.h + edge.hsig, self.tol):
                problems.append(f"knoop {node.id}: signatuur wijkt af van ouder + edge")
            seen, cur = {node.id}, parent
            while cur.parent is not None:
                if cur.id in seen or len(seen) > len(self.nodes):
                    problems.append(f"knoop {node.id}: cyclus in ouderketen")
                    break
                seen.add(cur.id)
                cur = self.nodes[cur.parent]
        for vertex in self.vertices:
            hs = [self.nodes[i].h for i in vertex.nodes]
            for a in range(len(hs)):
                for b in range(a + 1, len(hs)):
                    if homologous(hs[a], hs[b], self.tol):
                        problems.append(f"vertex {vertex.id}: twee homologe knopen")
        return problems

    # ── Opslag ──

    def to_dict(self) -> dict:
        return {
            "params": {
                "gamma": self.gamma, "max_radius": None if math.isinf(self.max_radius) else self.max_radius,
                "goal_bias": self.goal_bias, "heading_weight": self.heading_weight,
                "tol": self.tol, "h_limit": None if math.isinf(self.filter.h_limit) else self.filter.h_limit,
                "iterations": self.iterations,
            },
            "vertices": [{"id": v.id, "x": v.x.tolist(), "root": v.is_root} for v in self.vertices],
            "edges": [{"id": e.id, "src": e.src, "dst": e.dst, "cost": e.cost,
                       "hsig": e.hsig.tolist(), "segments": e.profile.to_list()} for e in self.edges],
            "nodes": [{"id": n.id, "vertex": n.vertex, "h": n.h.tolist(), "cost": n.cost,
                       "parent": n.parent, "edge": n.edge} for n in self.live_nodes()],
        }

    @classmethod
    def from_dict(cls, data: dict, model: SdeModel, workspace: Workspace) -> "PlannerGraph":
        p = data["params"]
        h_limit = math.inf if p.get("h_limit") is None else p["h_limit"]
        max_radius = math.inf if p.get("max_radius") is None else p["max_radius"]
        graph = cls(model, workspace, ClassFilter(h_limit), gamma=p["gamma"], max_radius=max_radius,
                    goal_bias=p["goal_bias"], heading_weight=p["heading_weight"], tol=p["tol"])
        graph.iterations = int(p.get("iterations", 0))
        graph.vertices = [Vertex(v["id"], np.asarray(v["x"], dtype=float), [], bool(v["root"]))
                          for v in data["vertices"]]
        for e in data["edges"]:
            edge = Edge(e["id"], e["src"], e["dst"], float(e["cost"]), np.asarray(e["hsig"], dtype=float),
                        ControlProfile.from_list(e["segments"]))
            graph.edges.append(edge)
            graph.in_edges.setdefault(edge.dst, []).append(edge.id)
        # gesnoeide knopen komen niet in de dump; ids blijven geldig via opvulling
        size = max((n["id"] for n in data["nodes"]), default=-1) + 1
        graph.nodes = [Node(i, -1, np.zeros(0), math.inf, alive=False) for i in range(size)]
        for n in data["nodes"]:
            node = Node(n["id"], n["vertex"], np.asarray(n["h"], dtype=float), float(n["cost"]),
                        n["parent"], n["edge"])
            graph.nodes[node.id] = node
            graph.vertices[node.vertex].nodes.append(node.id)
            if node.parent is not None:
                graph.children.setdefault(node.parent, []).append(node.id)
        return graph
