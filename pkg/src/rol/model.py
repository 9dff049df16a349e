"""Scenario data model: plant, sensor nodes, communication graph, attack
class, design weights, and simulation setup, plus JSON round-trip IO and
validation.

Conventions used throughout the package:

* node ids are 1-based (``1..N``) in JSON, in the public API, and in all
  reported results;
* a directed edge ``(j, i)`` means node ``j`` is an in-neighbour of node
  ``i``: node ``i`` receives data from node ``j``;
* matrices are row-major nested lists in JSON and ``numpy`` arrays in
  memory; time-varying matrices are piecewise schedules sampled on a
  strictly increasing time grid.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ScenarioError

__all__ = [
    "MatrixSchedule",
    "PlantModel",
    "SensorNode",
    "Edge",
    "NetworkGraph",
    "NodeAttackClass",
    "AttackClassSpec",
    "DesignWeights",
    "BiasSegment",
    "SignalTerm",
    "AttackSignalSpec",
    "DisturbanceSpec",
    "SimulationConfig",
    "Scenario",
    "ValidationIssue",
    "ValidationReport",
    "builtin_example_scenario",
    "example_disturbance_suite",
    "dump_json",
    "load_scenario",
    "save_scenario",
    "scenario_from_dict",
    "scenario_to_dict",
    "validate_scenario",
    "scenario_synthesis_hash",
]


def _frozen(a: np.ndarray) -> np.ndarray:
    """Return a float64 C-contiguous copy marked read-only."""
    out = np.array(a, dtype=float, order="C")
    out.setflags(write=False)
    return out


def _matrix(data, field_name: str, rows: int | None = None, cols: int | None = None) -> np.ndarray:
    try:
        m = _frozen(data)
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"{field_name}: not a numeric matrix ({exc})") from None
    if m.ndim != 2:
        raise ScenarioError(f"{field_name}: expected a 2-d matrix, got shape {m.shape}")
    if rows is not None and m.shape[0] != rows:
        raise ScenarioError(f"{field_name}: expected {rows} rows, got {m.shape[0]}")
    if cols is not None and m.shape[1] != cols:
        raise ScenarioError(f"{field_name}: expected {cols} columns, got {m.shape[1]}")
    return m


# ---------------------------------------------------------------------------
# Matrix schedules
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class MatrixSchedule:
    """A constant matrix or a matrix sampled on a time grid.

    ``times is None`` means constant. Sampled schedules are evaluated with
    zero-order hold (``hold=True``) or linear interpolation, clamped to the
    first/last sample outside the grid.
    """

    values: np.ndarray  # (m, n) when constant, else (k, m, n)
    times: np.ndarray | None = None  # (k,) strictly increasing
    hold: bool = True

    @classmethod
    def constant(cls, m) -> "MatrixSchedule":
        return cls(values=_frozen(np.atleast_2d(m)))

    @classmethod
    def sampled(cls, times, values, hold: bool = True) -> "MatrixSchedule":
        t = _frozen(times).reshape(-1)
        v = np.array(values, dtype=float)
        if v.ndim != 3:
            raise ScenarioError("sampled schedule values must be a sequence of matrices")
        if len(t) != v.shape[0]:
            raise ScenarioError("sampled schedule: len(times) != number of matrices")
        if len(t) == 0:
            raise ScenarioError("sampled schedule: empty time grid")
        if np.any(np.diff(t) <= 0):
            raise ScenarioError("sampled schedule: times must be strictly increasing")
        return cls(values=_frozen(v), times=t, hold=hold)

    @property
    def is_constant(self) -> bool:
        return self.times is None

    @property
    def shape(self) -> tuple[int, int]:
        return tuple(self.values.shape[-2:])

    @property
    def constant_value(self) -> np.ndarray:
        if not self.is_constant:
            raise ValueError("schedule is time-varying; no single constant value")
        return self.values

    def __call__(self, t: float) -> np.ndarray:
        if self.times is None:
            return self.values
        ts = self.times
        if t <= ts[0]:
            return self.values[0]
        if t >= ts[-1]:
            return self.values[-1]
        k = int(np.searchsorted(ts, t, side="right") - 1)
        if self.hold:
            return self.values[k]
        w = (t - ts[k]) / (ts[k + 1] - ts[k])
        return (1.0 - w) * self.values[k] + w * self.values[k + 1]

    def sample_times(self) -> np.ndarray:
        """Times at which shape/definiteness invariants are checked."""
        return np.array([0.0]) if self.times is None else self.times

    def to_json(self):
        if self.times is None:
            return {"constant": self.values.tolist()}
        return {
            "samples": [
                {"t": float(t), "m": m.tolist()} for t, m in zip(self.times, self.values)
            ],
            "hold": bool(self.hold),
        }

    @classmethod
    def from_json(cls, data, field_name: str) -> "MatrixSchedule":
        if not isinstance(data, Mapping):
            raise ScenarioError(f"{field_name}: schedule must be an object")
        if "constant" in data:
            return cls.constant(_matrix(data["constant"], field_name))
        if "samples" in data:
            samples = data["samples"]
            if not samples:
                raise ScenarioError(f"{field_name}: empty sample list")
            times = [s["t"] for s in samples]
            mats = [_matrix(s["m"], field_name) for s in samples]
            return cls.sampled(times, np.stack(mats), hold=bool(data.get("hold", True)))
        raise ScenarioError(f"{field_name}: schedule needs 'constant' or 'samples'")


# ---------------------------------------------------------------------------
# Physical layers
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PlantModel:
    """Continuous-time plant  dx/dt = A(t) x + B(t) w."""

    A: MatrixSchedule
    B: MatrixSchedule

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def n_w(self) -> int:
        return self.B.shape[1]

    @property
    def is_lti(self) -> bool:
        return self.A.is_constant and self.B.is_constant


@dataclass(frozen=True, eq=False)
class SensorNode:
    """Sensor node measurement  y_i = C_i(t) x + D_i(t) v_i."""

    C: MatrixSchedule
    D: MatrixSchedule

    @property
    def p(self) -> int:
        return self.C.shape[0]

    @property
    def n_v(self) -> int:
        return self.D.shape[1]

    @property
    def is_lti(self) -> bool:
        return self.C.is_constant and self.D.is_constant


@dataclass(frozen=True, eq=False)
class Edge:
    """Directed communication link j -> i carrying  c_ij = W x_hat_j + H v_ij
    on the observer layer and  eta_ij = W e_hat_j + Hc v_c,ij  on the
    detector layer."""

    j: int
    i: int
    W: np.ndarray  # (p_ij, n)
    H: np.ndarray  # (p_ij, n_vij)
    Hc: np.ndarray  # (p_ij, n_vcij)

    @property
    def p(self) -> int:
        return self.W.shape[0]

    @property
    def key(self) -> tuple[int, int]:
        return (self.j, self.i)


@dataclass(frozen=True, eq=False)
class NetworkGraph:
    """Directed sensor-communication graph over nodes 1..n_nodes."""

    n_nodes: int
    edges: tuple[Edge, ...]

    def __post_init__(self):
        object.__setattr__(
            self, "_by_key", {e.key: e for e in self.edges}
        )

    def edge(self, j: int, i: int) -> Edge:
        return self._by_key[(j, i)]

    def has_edge(self, j: int, i: int) -> bool:
        return (j, i) in self._by_key

    def in_neighbors(self, i: int) -> tuple[int, ...]:
        return tuple(sorted(e.j for e in self.edges if e.i == i))

    def in_edges(self, i: int) -> tuple[Edge, ...]:
        return tuple(e for e in sorted(self.edges, key=lambda e: e.key) if e.i == i)

    @property
    def edge_keys(self) -> tuple[tuple[int, int], ...]:
        return tuple(sorted(self._by_key))

    def reversed(self) -> "NetworkGraph":
        """Graph with every edge direction flipped (W/H/Hc carried along)."""
        return NetworkGraph(
            self.n_nodes,
            tuple(Edge(e.i, e.j, e.W, e.H, e.Hc) for e in self.edges),
        )

    def is_weakly_connected(self) -> bool:
        if self.n_nodes <= 1:
            return True
        adj: dict[int, set[int]] = {i: set() for i in range(1, self.n_nodes + 1)}
        for e in self.edges:
            adj[e.i].add(e.j)
            adj[e.j].add(e.i)
        seen = {1}
        stack = [1]
        while stack:
            u = stack.pop()
            for v in adj[u]:
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        return len(seen) == self.n_nodes


# ---------------------------------------------------------------------------
# Attack class
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class NodeAttackClass:
    """Per-node admissible-attack description.

    ``F`` injects the attack into the state observer; ``Fbar`` / ``Fcheck``
    describe the anticipated injection into the two rows of the defence
    layer. ``num``/``den`` are the coefficient lists (highest degree first)
    of the scalar shaping filter G(s) = num(s)/den(s) applied on every attack
    channel.
    """

    F: np.ndarray  # (n, n_f)
    Fbar: np.ndarray  # (n, n_f)
    num: tuple[float, ...]
    den: tuple[float, ...]
    Fcheck: np.ndarray | None = None  # (n_eps, n_f), validated at realization

    @property
    def n_f(self) -> int:
        return self.F.shape[1]


@dataclass(frozen=True, eq=False)
class AttackClassSpec:
    per_node: tuple[NodeAttackClass, ...]

    def node(self, i: int) -> NodeAttackClass:
        return self.per_node[i - 1]


# ---------------------------------------------------------------------------
# Weights, signals, simulation setup
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DesignWeights:
    """Design degrees of freedom for the two synthesis layers.

    ``Z``/``Zbar`` are per-edge positive-definite channel weights for the
    detector and observer layers. ``X``/``Xbar`` weight the initial estimation
    error per node (their inverses initialise the Riccati recursions in the
    time-varying path); ``X0`` optionally weights the initial bias-model
    error. ``P`` is the global error-energy weight of the performance bound.
    ``alpha`` is the slack used by the closed-form weight rules. ``gamma2``
    and ``bar_gamma2`` fix the attenuation levels when given; when ``None``
    they are optimized by bisection.
    """

    Z: dict[tuple[int, int], np.ndarray]
    Zbar: dict[tuple[int, int], np.ndarray]
    X: tuple[np.ndarray, ...]
    Xbar: tuple[np.ndarray, ...]
    P: np.ndarray
    alpha: float = 1.0
    X0: tuple[np.ndarray, ...] | None = None
    gamma2: float | None = None
    bar_gamma2: float | None = None


@dataclass(frozen=True, eq=False)
class BiasSegment:
    """Constant bias ``value`` injected on [start, end)."""

    value: np.ndarray  # (n_f,)
    start: float
    end: float


@dataclass(frozen=True, eq=False)
class SignalTerm:
    """One scalar waveform term, used for attack masking and disturbances.

    ``decaying_sin``: a * exp(-b (t - start)) * sin(omega (t - start) + phi)
    for t >= start, zero before; requires b > 0 so the term has finite
    energy.

    ``burst``: seeded mixture of ``components`` sinusoids with a smooth
    sin^2 on/off ramp, supported on [start, end]; amplitudes scale with
    ``amplitude``. Realizations are a deterministic function of
    (run seed, salt).
    """

    kind: str  # "decaying_sin" | "burst"
    a: float = 0.0
    b: float = 0.0
    omega: float = 0.0
    phi: float = 0.0
    start: float = 0.0
    end: float | None = None
    amplitude: float = 0.0
    salt: int = 0
    components: int = 6

    def to_json(self):
        if self.kind == "decaying_sin":
            return {
                "kind": "decaying_sin",
                "a": float(self.a),
                "b": float(self.b),
                "omega": float(self.omega),
                "phi": float(self.phi),
                "start": float(self.start),
            }
        return {
            "kind": "burst",
            "amplitude": float(self.amplitude),
            "start": float(self.start),
            "end": float(self.end if self.end is not None else self.start),
            "salt": int(self.salt),
            "components": int(self.components),
        }

    @classmethod
    def from_json(cls, data, field_name: str) -> "SignalTerm":
        kind = data.get("kind")
        if kind == "decaying_sin":
            return cls(
                kind="decaying_sin",
                a=float(data.get("a", 0.0)),
                b=float(data.get("b", 0.0)),
                omega=float(data.get("omega", 0.0)),
                phi=float(data.get("phi", 0.0)),
                start=float(data.get("start", 0.0)),
            )
        if kind == "burst":
            return cls(
                kind="burst",
                amplitude=float(data.get("amplitude", 0.0)),
                start=float(data.get("start", 0.0)),
                end=float(data.get("end", 0.0)),
                salt=int(data.get("salt", 0)),
                components=int(data.get("components", 6)),
            )
        raise ScenarioError(f"{field_name}: unknown signal term kind {kind!r}")


@dataclass(frozen=True, eq=False)
class AttackSignalSpec:
    """Attack signal at one node: piecewise-constant bias segments plus
    finite-energy masking terms (applied to every attack channel)."""

    node: int
    bias: tuple[BiasSegment, ...] = ()
    masking: tuple[SignalTerm, ...] = ()


@dataclass(frozen=True, eq=False)
class DisturbanceSpec:
    """A finite-energy disturbance on one input channel.

    ``channel``: "w" (process), "v" (a node's measurement noise), "v_edge"
    (observer-layer link noise), "vc_edge" (detector-layer link noise).
    ``component`` selects one coordinate (None = all coordinates of the
    channel receive the same waveform).
    """

    channel: str
    term: SignalTerm
    node: int | None = None
    edge: tuple[int, int] | None = None
    component: int | None = None


@dataclass(frozen=True, eq=False)
class SimulationConfig:
    t_end: float
    step: float
    x0: np.ndarray  # (n,)
    xi: tuple[np.ndarray, ...]  # observer initial states, one per node
    store_decimation: int = 20


@dataclass(frozen=True, eq=False)
class Scenario:
    plant: PlantModel
    sensors: tuple[SensorNode, ...]
    graph: NetworkGraph
    attack_class: AttackClassSpec | None
    weights: DesignWeights
    simulation: SimulationConfig
    attacks: tuple[AttackSignalSpec, ...] = ()
    disturbances: tuple[DisturbanceSpec, ...] = ()
    notes: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.plant.n

    @property
    def n_w(self) -> int:
        return self.plant.n_w

    @property
    def N(self) -> int:
        return self.graph.n_nodes

    def sensor(self, i: int) -> SensorNode:
        return self.sensors[i - 1]

    @property
    def is_lti(self) -> bool:
        return self.plant.is_lti and all(s.is_lti for s in self.sensors)

    def n_f(self, i: int) -> int:
        if self.attack_class is None:
            return 0
        return self.attack_class.node(i).n_f


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ValidationIssue:
    severity: str  # "error" | "warning"
    field: str
    message: str

    def __str__(self) -> str:  # pragma: no cover - cosmetic
        return f"[{self.severity}] {self.field}: {self.message}"


@dataclass(frozen=True)
class ValidationReport:
    issues: tuple[ValidationIssue, ...]
    notes: dict

    @property
    def errors(self) -> tuple[ValidationIssue, ...]:
        return tuple(i for i in self.issues if i.severity == "error")

    @property
    def warnings(self) -> tuple[ValidationIssue, ...]:
        return tuple(i for i in self.issues if i.severity == "warning")

    @property
    def ok(self) -> bool:
        return not self.errors

    @property
    def empty(self) -> bool:
        return not self.issues


def _sym_min_eig(M: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(0.5 * (M + M.T))[0])


def validate_scenario(scenario: Scenario) -> ValidationReport:
    """Cross-check all dimensions and definiteness requirements.

    Returns a report whose ``errors`` make the scenario unusable and whose
    ``warnings`` flag suspicious but workable structure (e.g. a graph that is
    not weakly connected, which merely means components could be treated
    separately).
    """
    issues: list[ValidationIssue] = []

    def err(field_name: str, msg: str):
        issues.append(ValidationIssue("error", field_name, msg))

    def warn(field_name: str, msg: str):
        issues.append(ValidationIssue("warning", field_name, msg))

    s = scenario
    n = s.plant.A.shape[0]
    if s.plant.A.shape[0] != s.plant.A.shape[1]:
        err("plant.A", f"must be square, got {s.plant.A.shape}")
    if s.plant.B.shape[0] != n:
        err("plant.B", f"row count {s.plant.B.shape[0]} != state dimension {n}")

    N = s.graph.n_nodes
    if len(s.sensors) != N:
        err("sensors", f"{len(s.sensors)} sensor nodes for {N} graph nodes")

    for idx, sensor in enumerate(s.sensors, start=1):
        if sensor.C.shape[1] != n:
            err(f"sensors[{idx}].C", f"column count {sensor.C.shape[1]} != {n}")
        if sensor.D.shape[0] != sensor.C.shape[0]:
            err(
                f"sensors[{idx}].D",
                f"row count {sensor.D.shape[0]} != measurement dimension {sensor.C.shape[0]}",
            )
        for t in sensor.D.sample_times():
            D = sensor.D(t)
            if _sym_min_eig(D @ D.T) <= 1e-12:
                err(
                    f"sensors[{idx}].D",
                    f"D*D' singular at node {idx} (t={t:g}); measurement noise must be full rank",
                )
                break

    seen_edges = set()
    for e in s.graph.edges:
        name = f"graph.edge[{e.j}->{e.i}]"
        if not (1 <= e.j <= N) or not (1 <= e.i <= N):
            err(name, f"node ids out of range 1..{N}")
            continue
        if e.j == e.i:
            err(name, "self-loops are not allowed")
        if e.key in seen_edges:
            err(name, "duplicate edge")
        seen_edges.add(e.key)
        if e.W.shape[1] != n:
            err(name + ".W", f"column count {e.W.shape[1]} != {n}")
        if e.H.shape[0] != e.p:
            err(name + ".H", f"row count {e.H.shape[0]} != link dimension {e.p}")
        if e.Hc.shape[0] != e.p:
            err(name + ".Hc", f"row count {e.Hc.shape[0]} != link dimension {e.p}")

    if not s.graph.is_weakly_connected():
        warn("graph", "graph not connected; components may be estimated separately")

    if s.attack_class is not None:
        if len(s.attack_class.per_node) != N:
            err("attack_class", f"{len(s.attack_class.per_node)} entries for {N} nodes")
        for idx, ac in enumerate(s.attack_class.per_node, start=1):
            name = f"attack_class[{idx}]"
            if ac.F.shape[0] != n:
                err(name + ".F", f"row count {ac.F.shape[0]} != {n}")
            if ac.Fbar.shape != ac.F.shape:
                err(name + ".Fbar", f"shape {ac.Fbar.shape} != F shape {ac.F.shape}")
            if len(ac.den) == 0 or ac.den[0] == 0.0:
                err(name + ".G", "denominator must have a nonzero leading coefficient")
            if len(ac.num) == 0 or not any(c != 0.0 for c in ac.num):
                err(name + ".G", "shaping filter numerator is identically zero")
            if len(ac.num) > len(ac.den):
                err(name + ".G", "shaping filter must be proper (deg num <= deg den)")

    w = s.weights
    edge_keys = set(s.graph.edge_keys)
    for label, zdict in (("weights.Z", w.Z), ("weights.Zbar", w.Zbar)):
        if set(zdict) != edge_keys:
            err(label, "edge weight keys must match the graph edge set exactly")
        for key, Zm in sorted(zdict.items()):
            if key not in edge_keys:
                continue
            p = s.graph.edge(*key).p
            kname = f"{label}[{key[0]}->{key[1]}]"
            if Zm.shape != (p, p):
                err(kname, f"shape {Zm.shape} != ({p}, {p})")
                continue
            if np.linalg.norm(Zm - Zm.T) > 1e-10 * (1.0 + np.linalg.norm(Zm)):
                err(kname, "must be symmetric")
            elif _sym_min_eig(Zm) <= 0.0:
                err(kname, "must be positive definite")

    for label, per_node in (("weights.X", w.X), ("weights.Xbar", w.Xbar)):
        if len(per_node) != N:
            err(label, f"{len(per_node)} entries for {N} nodes")
            continue
        for idx, Xm in enumerate(per_node, start=1):
            kname = f"{label}[{idx}]"
            if Xm.shape != (n, n):
                err(kname, f"shape {Xm.shape} != ({n}, {n})")
            elif np.linalg.norm(Xm - Xm.T) > 1e-10 * (1.0 + np.linalg.norm(Xm)):
                err(kname, "must be symmetric")
            elif _sym_min_eig(Xm) <= 0.0:
                err(kname, "must be positive definite")

    Pn = N * n
    if w.P.shape != (Pn, Pn):
        err("weights.P", f"shape {w.P.shape} != ({Pn}, {Pn})")
    else:
        if np.linalg.norm(w.P - w.P.T) > 1e-10 * (1.0 + np.linalg.norm(w.P)):
            err("weights.P", "must be symmetric")
        elif _sym_min_eig(w.P) < -1e-10 * (1.0 + float(np.linalg.norm(w.P))):
            err("weights.P", "must be positive semidefinite")

    if not (w.alpha > 0.0):
        err("weights.alpha", "must be positive")
    for label, g in (("weights.gamma2", w.gamma2), ("weights.bar_gamma2", w.bar_gamma2)):
        if g is not None and not (g > 0.0):
            err(label, "must be positive when given")

    sim = s.simulation
    if not (sim.t_end > 0.0):
        err("simulation.t_end", "must be positive")
    if not (0.0 < sim.step <= sim.t_end):
        err("simulation.step", "must satisfy 0 < step <= t_end")
    if sim.store_decimation < 1:
        err("simulation.store_decimation", "must be >= 1")
    if sim.x0.shape != (n,):
        err("simulation.x0", f"length {sim.x0.shape} != state dimension {n}")
    if len(sim.xi) != N:
        err("simulation.xi", f"{len(sim.xi)} initial observer states for {N} nodes")
    else:
        for idx, xi in enumerate(sim.xi, start=1):
            if xi.shape != (n,):
                err(f"simulation.xi[{idx}]", f"length {xi.shape} != {n}")

    for a_idx, atk in enumerate(s.attacks):
        name = f"attacks[{a_idx}]"
        if not (1 <= atk.node <= N):
            err(name, f"node {atk.node} out of range 1..{N}")
            continue
        if s.attack_class is None:
            err(name, "attack declared but scenario has no attack class")
            continue
        nf = s.n_f(atk.node)
        for b_idx, seg in enumerate(atk.bias):
            bname = f"{name}.bias[{b_idx}]"
            if seg.value.shape != (nf,):
                err(bname, f"value length {seg.value.shape} != attack dimension {nf}")
            if not (seg.end > seg.start):
                err(bname, "segment must satisfy end > start")
        for m_idx, term in enumerate(atk.masking):
            mname = f"{name}.masking[{m_idx}]"
            if term.kind == "decaying_sin" and not (term.b > 0.0):
                err(mname, "decaying sinusoid needs decay rate b > 0 (finite energy)")
            if term.kind == "burst" and not ((term.end or 0.0) > term.start):
                err(mname, "burst support must satisfy end > start")

    for d_idx, dist in enumerate(s.disturbances):
        name = f"disturbances[{d_idx}]"
        if dist.channel not in ("w", "v", "v_edge", "vc_edge"):
            err(name, f"unknown channel {dist.channel!r}")
            continue
        if dist.channel == "w":
            dim = s.n_w
        elif dist.channel == "v":
            if dist.node is None or not (1 <= dist.node <= N):
                err(name, "channel 'v' needs a valid node id")
                continue
            dim = s.sensor(dist.node).n_v
        else:
            if dist.edge is None or not s.graph.has_edge(*dist.edge):
                err(name, "edge channel needs an existing graph edge [j, i]")
                continue
            e = s.graph.edge(*dist.edge)
            dim = e.H.shape[1] if dist.channel == "v_edge" else e.Hc.shape[1]
        if dist.component is not None and not (0 <= dist.component < dim):
            err(name, f"component {dist.component} out of range for dimension {dim}")
        if dist.term.kind == "decaying_sin" and not (dist.term.b > 0.0):
            err(name, "decaying sinusoid needs decay rate b > 0 (finite energy)")
        if dist.term.kind == "burst" and not ((dist.term.end or 0.0) > dist.term.start):
            err(name, "burst support must satisfy end > start")

    return ValidationReport(tuple(issues), dict(s.notes))


# ---------------------------------------------------------------------------
# JSON serialization
# ---------------------------------------------------------------------------


def _edge_key_str(key: tuple[int, int]) -> str:
    return f"{key[0]}->{key[1]}"


def _parse_edge_key(text: str, field_name: str) -> tuple[int, int]:
    try:
        j, i = text.split("->")
        return (int(j), int(i))
    except ValueError:
        raise ScenarioError(f"{field_name}: bad edge key {text!r}, expected 'j->i'") from None


def scenario_to_dict(s: Scenario) -> dict:
    """Plain-JSON representation; round-trips bit-identically."""
    d: dict = {
        "plant": {"A": s.plant.A.to_json(), "B": s.plant.B.to_json()},
        "sensors": [
            {"C": sn.C.to_json(), "D": sn.D.to_json()} for sn in s.sensors
        ],
        "graph": {
            "nodes": s.graph.n_nodes,
            "edges": [
                {
                    "from": e.j,
                    "to": e.i,
                    "W": e.W.tolist(),
                    "H": e.H.tolist(),
                    "Hc": e.Hc.tolist(),
                }
                for e in sorted(s.graph.edges, key=lambda e: e.key)
            ],
        },
        "attack_class": None,
        "weights": {
            "Z": {_edge_key_str(k): m.tolist() for k, m in sorted(s.weights.Z.items())},
            "Zbar": {_edge_key_str(k): m.tolist() for k, m in sorted(s.weights.Zbar.items())},
            "X": [m.tolist() for m in s.weights.X],
            "Xbar": [m.tolist() for m in s.weights.Xbar],
            "X0": None if s.weights.X0 is None else [m.tolist() for m in s.weights.X0],
            "P": s.weights.P.tolist(),
            "alpha": float(s.weights.alpha),
            "gamma2": s.weights.gamma2,
            "bar_gamma2": s.weights.bar_gamma2,
        },
        "simulation": {
            "t_end": float(s.simulation.t_end),
            "step": float(s.simulation.step),
            "x0": s.simulation.x0.tolist(),
            "xi": [x.tolist() for x in s.simulation.xi],
            "store_decimation": int(s.simulation.store_decimation),
        },
        "attacks": [
            {
                "node": a.node,
                "bias": [
                    {"value": seg.value.tolist(), "start": float(seg.start), "end": float(seg.end)}
                    for seg in a.bias
                ],
                "masking": [t.to_json() for t in a.masking],
            }
            for a in s.attacks
        ],
        "disturbances": [
            {
                "channel": dspec.channel,
                **({"node": dspec.node} if dspec.node is not None else {}),
                **({"edge": list(dspec.edge)} if dspec.edge is not None else {}),
                **({"component": dspec.component} if dspec.component is not None else {}),
                "term": dspec.term.to_json(),
            }
            for dspec in s.disturbances
        ],
        "notes": dict(s.notes),
    }
    if s.attack_class is not None:
        d["attack_class"] = {
            "nodes": [
                {
                    "F": ac.F.tolist(),
                    "Fbar": ac.Fbar.tolist(),
                    "Fcheck": None if ac.Fcheck is None else ac.Fcheck.tolist(),
                    "G": {"num": list(ac.num), "den": list(ac.den)},
                }
                for ac in s.attack_class.per_node
            ]
        }
    return d


def scenario_from_dict(data: Mapping) -> Scenario:
    """Parse a scenario dictionary; structural problems raise ScenarioError."""
    if not isinstance(data, Mapping):
        raise ScenarioError("scenario root must be a JSON object")
    for key in ("plant", "sensors", "graph", "weights", "simulation"):
        if key not in data:
            raise ScenarioError(f"scenario is missing required key {key!r}")

    plant = PlantModel(
        A=MatrixSchedule.from_json(data["plant"].get("A"), "plant.A"),
        B=MatrixSchedule.from_json(data["plant"].get("B"), "plant.B"),
    )

    sensors = tuple(
        SensorNode(
            C=MatrixSchedule.from_json(sn.get("C"), f"sensors[{k}].C"),
            D=MatrixSchedule.from_json(sn.get("D"), f"sensors[{k}].D"),
        )
        for k, sn in enumerate(data["sensors"], start=1)
    )

    gdata = data["graph"]
    try:
        n_nodes = int(gdata["nodes"])
    except (KeyError, TypeError, ValueError):
        raise ScenarioError("graph.nodes: must be an integer") from None
    edges = []
    for e in gdata.get("edges", []):
        try:
            j, i = int(e["from"]), int(e["to"])
        except (KeyError, TypeError, ValueError):
            raise ScenarioError("graph.edges: each edge needs integer 'from' and 'to'") from None
        name = f"graph.edge[{j}->{i}]"
        edges.append(
            Edge(
                j=j,
                i=i,
                W=_matrix(e.get("W"), name + ".W"),
                H=_matrix(e.get("H"), name + ".H"),
                Hc=_matrix(e.get("Hc"), name + ".Hc"),
            )
        )
    graph = NetworkGraph(n_nodes, tuple(edges))

    attack_class = None
    if data.get("attack_class") is not None:
        nodes = []
        for k, ac in enumerate(data["attack_class"].get("nodes", []), start=1):
            name = f"attack_class[{k}]"
            g = ac.get("G", {})
            nodes.append(
                NodeAttackClass(
                    F=_matrix(ac.get("F"), name + ".F"),
                    Fbar=_matrix(ac.get("Fbar"), name + ".Fbar"),
                    Fcheck=None
                    if ac.get("Fcheck") is None
                    else _matrix(ac.get("Fcheck"), name + ".Fcheck"),
                    num=tuple(float(c) for c in g.get("num", [])),
                    den=tuple(float(c) for c in g.get("den", [])),
                )
            )
        attack_class = AttackClassSpec(tuple(nodes))

    wdata = data["weights"]

    def zdict(label: str) -> dict[tuple[int, int], np.ndarray]:
        raw = wdata.get(label, {})
        return {
            _parse_edge_key(k, f"weights.{label}"): _matrix(m, f"weights.{label}[{k}]")
            for k, m in raw.items()
        }

    weights = DesignWeights(
        Z=zdict("Z"),
        Zbar=zdict("Zbar"),
        X=tuple(_matrix(m, f"weights.X[{k}]") for k, m in enumerate(wdata.get("X", []), 1)),
        Xbar=tuple(
            _matrix(m, f"weights.Xbar[{k}]") for k, m in enumerate(wdata.get("Xbar", []), 1)
        ),
        X0=None
        if wdata.get("X0") is None
        else tuple(_matrix(m, f"weights.X0[{k}]") for k, m in enumerate(wdata["X0"], 1)),
        P=_matrix(wdata.get("P"), "weights.P"),
        alpha=float(wdata.get("alpha", 1.0)),
        gamma2=None if wdata.get("gamma2") is None else float(wdata["gamma2"]),
        bar_gamma2=None if wdata.get("bar_gamma2") is None else float(wdata["bar_gamma2"]),
    )

    sdata = data["simulation"]
    try:
        simulation = SimulationConfig(
            t_end=float(sdata["t_end"]),
            step=float(sdata["step"]),
            x0=_frozen(sdata["x0"]).reshape(-1),
            xi=tuple(_frozen(x).reshape(-1) for x in sdata["xi"]),
            store_decimation=int(sdata.get("store_decimation", 20)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioError(f"simulation: {exc}") from None

    attacks = []
    for k, a in enumerate(data.get("attacks", [])):
        name = f"attacks[{k}]"
        try:
            node = int(a["node"])
        except (KeyError, TypeError, ValueError):
            raise ScenarioError(f"{name}: needs an integer 'node'") from None
        attacks.append(
            AttackSignalSpec(
                node=node,
                bias=tuple(
                    BiasSegment(
                        value=_frozen(seg.get("value", [])).reshape(-1),
                        start=float(seg.get("start", 0.0)),
                        end=float(seg.get("end", 0.0)),
                    )
                    for seg in a.get("bias", [])
                ),
                masking=tuple(
                    SignalTerm.from_json(t, f"{name}.masking") for t in a.get("masking", [])
                ),
            )
        )

    disturbances = []
    for k, dspec in enumerate(data.get("disturbances", [])):
        name = f"disturbances[{k}]"
        disturbances.append(
            DisturbanceSpec(
                channel=str(dspec.get("channel", "")),
                node=None if dspec.get("node") is None else int(dspec["node"]),
                edge=None if dspec.get("edge") is None else tuple(int(v) for v in dspec["edge"]),
                component=None if dspec.get("component") is None else int(dspec["component"]),
                term=SignalTerm.from_json(dspec.get("term", {}), name + ".term"),
            )
        )

    return Scenario(
        plant=plant,
        sensors=sensors,
        graph=graph,
        attack_class=attack_class,
        weights=weights,
        simulation=simulation,
        attacks=tuple(attacks),
        disturbances=tuple(disturbances),
        notes=dict(data.get("notes", {})),
    )


def dump_json(data, path) -> None:
    """Write canonical JSON: sorted keys, 2-space indent, trailing newline."""
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_scenario(path) -> Scenario:
    """Load and validate a scenario file; raises ScenarioError on any error
    (warnings are tolerated and can be re-derived with validate_scenario)."""
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario file: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"scenario file is not valid JSON: {exc}") from None
    scenario = scenario_from_dict(data)
    report = validate_scenario(scenario)
    if not report.ok:
        detail = "; ".join(str(e) for e in report.errors)
        raise ScenarioError(f"invalid scenario: {detail}")
    return scenario


def save_scenario(scenario: Scenario, path) -> None:
    dump_json(scenario_to_dict(scenario), path)


def scenario_synthesis_hash(scenario: Scenario) -> str:
    """Content hash of everything gain synthesis depends on (plant, sensors,
    graph, attack class, weights); simulation grid / attack / disturbance
    edits do not change it."""
    d = scenario_to_dict(scenario)
    subset = {k: d[k] for k in ("plant", "sensors", "graph", "attack_class", "weights")}
    text = json.dumps(subset, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


# ---------------------------------------------------------------------------
# Builtin example
# ---------------------------------------------------------------------------


def builtin_example_scenario() -> Scenario:
    """Six-node reference scenario used by the test-suite and the docs.

    A 6-state unstable plant observed by six 2-output sensor nodes on a
    directed ring (every node listens to its predecessor; the ring choice is
    recorded as an assumption in ``notes``). Node 2 is subject to a constant
    observer-biasing attack of amplitude 5 on t in [4, 7). The shaping filter
    of the admissible class is G(s) = 410/(s+40) on every node.
    """
    from .netmatrix import in_degree_laplacian  # local import to avoid a cycle

    n = 6
    N = 6
    A = np.array(
        [
            [0.3775, 0.0, 0.0, 0.0, 0.0, 0.0],
            [0.2959, 0.3510, 0.0, 0.0, 0.0, 0.0],
            [1.4751, 0.6232, 1.0078, 0.0, 0.0, 0.0],
            [0.2340, 0.0, 0.0, 0.5596, 0.0, 0.0],
            [0.0, 0.0, 0.0, 0.4437, 1.1878, -0.0215],
            [0.0, 0.0, 0.0, 0.0, 2.2023, 1.0039],
        ]
    )
    B = 0.1 * np.eye(n)
    plant = PlantModel(A=MatrixSchedule.constant(A), B=MatrixSchedule.constant(B))

    sensors = []
    for i in range(1, N + 1):
        C = np.zeros((2, n))
        C[0, i - 1] = 1.0
        C[1, i % n] = 1.0
        sensors.append(
            SensorNode(
                C=MatrixSchedule.constant(C),
                D=MatrixSchedule.constant(0.01 * np.eye(2)),
            )
        )

    Hcol = (0.1 / np.sqrt(2.0)) * np.ones((n, 1))
    edges = tuple(
        Edge(j=i - 1 if i > 1 else N, i=i, W=_frozen(np.eye(n)), H=_frozen(Hcol), Hc=_frozen(Hcol))
        for i in range(1, N + 1)
    )
    graph = NetworkGraph(N, edges)

    attack_class = AttackClassSpec(
        tuple(
            NodeAttackClass(
                F=_frozen(np.ones((n, 1))),
                Fbar=_frozen(np.zeros((n, 1))),
                num=(410.0,),
                den=(1.0, 40.0),
            )
            for _ in range(N)
        )
    )

    L, _ = in_degree_laplacian(graph)
    LT, _ = in_degree_laplacian(graph.reversed())
    P = np.kron(L + LT, np.eye(n))

    Z = {e.key: _frozen(0.01 * np.eye(e.p)) for e in edges}
    weights = DesignWeights(
        Z=Z,
        Zbar=dict(Z),
        X=tuple(_frozen(np.eye(n)) for _ in range(N)),
        Xbar=tuple(_frozen(np.eye(n)) for _ in range(N)),
        P=_frozen(P),
        alpha=1.0,
    )

    simulation = SimulationConfig(
        t_end=8.0,
        step=1e-5,
        x0=_frozen(np.zeros(n)).reshape(-1),
        xi=tuple(_frozen(np.zeros(n)).reshape(-1) for _ in range(N)),
        store_decimation=20,
    )

    attacks = (
        AttackSignalSpec(
            node=2,
            bias=(BiasSegment(value=_frozen([[5.0]]).reshape(-1), start=4.0, end=7.0),),
        ),
    )

    return Scenario(
        plant=plant,
        sensors=tuple(sensors),
        graph=graph,
        attack_class=attack_class,
        weights=weights,
        simulation=simulation,
        attacks=attacks,
        disturbances=(),
        notes={"graph_assumed": True},
    )


def example_disturbance_suite() -> tuple[DisturbanceSpec, ...]:
    """Finite-energy disturbances exercising every input channel of the
    builtin example: process noise, measurement noise at two nodes, and
    link noise on both communication layers.

    All terms die out well before the end of the 8 s horizon (bursts end by
    t = 4.5, the decaying term has a 0.5 s time constant), so quiet-tail
    checks of the compensation signals remain meaningful. Amplitudes are
    sized so the detector outputs they induce stay an order of magnitude
    below the attack-detection threshold. Burst realizations vary with the
    run seed; distinct salts keep the channels independent.
    """
    return (
        DisturbanceSpec(
            channel="w",
            component=0,
            term=SignalTerm(kind="burst", amplitude=0.05, start=0.5, end=4.0, salt=11),
        ),
        DisturbanceSpec(
            channel="w",
            component=3,
            term=SignalTerm(kind="burst", amplitude=0.05, start=1.0, end=4.5, salt=12),
        ),
        DisturbanceSpec(
            channel="w",
            component=1,
            term=SignalTerm(kind="decaying_sin", a=0.05, b=2.0, omega=7.0, start=0.2),
        ),
        DisturbanceSpec(
            channel="v",
            node=1,
            component=0,
            term=SignalTerm(kind="burst", amplitude=0.002, start=0.5, end=4.0, salt=21),
        ),
        DisturbanceSpec(
            channel="v",
            node=4,
            component=1,
            term=SignalTerm(kind="burst", amplitude=0.002, start=1.5, end=4.0, salt=22),
        ),
        DisturbanceSpec(
            channel="v_edge",
            edge=(1, 2),
            term=SignalTerm(kind="burst", amplitude=0.002, start=0.5, end=3.5, salt=31),
        ),
        DisturbanceSpec(
            channel="vc_edge",
            edge=(4, 5),
            term=SignalTerm(kind="burst", amplitude=0.002, start=1.0, end=4.0, salt=32),
        ),
    )
