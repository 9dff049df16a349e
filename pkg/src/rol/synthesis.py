"""Gain synthesis for the resilient distributed estimator.

The design is decentralized and proceeds in three steps per node:

1. *Defence layer.* Each node's estimation error is extended with the
   bias-model error of its attack channel. The extended design blocks are

       Abold = [[A, -F Ups], [0, Om]]
       Bbold = [[B,  Fhat ], [0, Gcheck]]
       Cbold = [C, 0],   Wbold_ij = [W_ij, 0]

   with ``Fhat = F + Fbar`` and ``Gcheck = Gamma + Fcheck`` (the design
   model always couples the bias-model error into the state error through
   the anticipated pattern ``F``, while the chosen compensation split only
   shifts the input matrix). A filter-type Riccati equation with
   attenuation level ``gamma2`` yields the gain stack
   ``Lb = Y Cbold' (D D')^-1`` (rows split into Lhat / Lcheck) and
   per-edge ``Kb_ij = Y Wbold_ij' U_ij^-1`` (rows split into Khat /
   Kcheck), where ``U_ij`` is the combined-channel weight of the defence
   layer.

2. *Observer layer.* The same machinery at base dimension with input
   matrix ``[B, -F]`` (the residual of the compensated attack acts as an
   extra finite-energy disturbance) and level ``bar_gamma2`` yields the
   observer gains ``L_i`` and ``K_ij``.

3. *Composition.* The defence filter is implemented relative to the
   observer, which requires the differences ``Lbar = Lhat - L`` and
   ``Kbar_ij = Khat_ij - K_ij``.

Attenuation levels are optimized by bisection on a log bracket; the
returned levels are therefore *suboptimal with respect to the closed-form
weight rules* used here (the free weight matrices R are picked by simple
eigenvalue formulas rather than jointly optimized), which is recorded in
the ``label`` of every result.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .attackclass import BiasModel, realize_bias_model
from .errors import InfeasibleError, ScenarioError
from .model import (
    DesignWeights,
    Edge,
    MatrixSchedule,
    NetworkGraph,
    Scenario,
    dump_json,
    scenario_synthesis_hash,
)
from .netmatrix import (
    NodeCoupling,
    coupling_matrices,
    in_degree_laplacian,
)
from .numerics import (
    DreResult,
    integrate_dre,
    pbh_stabilizable,
    solve_filter_are,
    spectral_abscissa,
)

__all__ = [
    "LABEL_SUBOPTIMAL",
    "NodeGains",
    "SynthesizedGains",
    "SelectedWeights",
    "select_weights",
    "graph_shape_penalty",
    "LayerRiccati",
    "layer_riccati",
    "BisectionResult",
    "bisect_attenuation",
    "synthesize",
    "assemble_error_dynamics",
    "error_dynamics_indices",
    "GraphCandidateResult",
    "GraphSearchResult",
    "scenario_with_edges",
    "optimize_over_graphs",
    "gains_to_dict",
    "gains_from_dict",
    "save_gains",
    "load_gains",
]

LABEL_SUBOPTIMAL = "suboptimal (closed-form weights)"

#: default log-scale bisection bracket and stopping rule for attenuation levels
GAMMA2_BRACKET = (1e-6, 1e4)
GAMMA2_REL_TOL = 1e-3
GAMMA2_MAX_ITER = 40


# ---------------------------------------------------------------------------
# Result containers
# ---------------------------------------------------------------------------


GainLike = "np.ndarray | MatrixSchedule"


def _gain_at(g, t: float) -> np.ndarray:
    return g(t) if isinstance(g, MatrixSchedule) else g


def _gain_is_constant(g) -> bool:
    return not isinstance(g, MatrixSchedule) or g.is_constant


@dataclass(frozen=True, eq=False)
class NodeGains:
    """All gains of one node. Defence-layer fields are ``None`` for the
    baseline (observer-only) design. Gains are constant arrays on the
    time-invariant path and sampled schedules on the time-varying path."""

    i: int
    L: "np.ndarray | MatrixSchedule"
    K: dict
    Xbar_eff: np.ndarray
    Lhat: "np.ndarray | MatrixSchedule | None" = None
    Lcheck: "np.ndarray | MatrixSchedule | None" = None
    Lbar: "np.ndarray | MatrixSchedule | None" = None
    Khat: dict | None = None
    Kcheck: dict | None = None
    Kbar: dict | None = None
    bias: BiasModel | None = None
    F: np.ndarray | None = None
    Fbar: np.ndarray | None = None
    Fhat: np.ndarray | None = None
    Fcheck: np.ndarray | None = None
    X_eff: np.ndarray | None = None

    @property
    def has_defence(self) -> bool:
        return self.Lhat is not None

    @property
    def n_eps(self) -> int:
        return 0 if self.bias is None else self.bias.n_eps

    def is_constant(self) -> bool:
        gains = [self.L, self.Lhat, self.Lcheck, self.Lbar]
        for d in (self.K, self.Khat, self.Kcheck, self.Kbar):
            if d:
                gains.extend(d.values())
        return all(g is None or _gain_is_constant(g) for g in gains)


@dataclass(frozen=True, eq=False)
class SynthesizedGains:
    """Synthesis output: per-node gains plus the achieved attenuation
    levels and the hash of the scenario subset they were computed from.
    ``diagnostics`` holds JSON-safe feasibility and weight details for the
    synthesis report (levels per layer, bisection traces, weight scalars,
    plant stabilizability)."""

    kind: str  # "resilient" | "baseline"
    gamma2: float | None
    bar_gamma2: float
    nodes: tuple[NodeGains, ...]
    scenario_hash: str
    label: str = LABEL_SUBOPTIMAL
    diagnostics: dict = field(default_factory=dict)

    def node(self, i: int) -> NodeGains:
        return self.nodes[i - 1]

    @property
    def is_resilient(self) -> bool:
        return self.kind == "resilient"

    def is_constant(self) -> bool:
        return all(ng.is_constant() for ng in self.nodes)


# ---------------------------------------------------------------------------
# Per-layer Riccati data
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class LayerRiccati:
    """Riccati coefficients of one node on one layer.

    ``A``, ``Q`` and ``penalty`` are functions of time (constant on the
    time-invariant path, where ``lti`` is True). The quadratic coefficient
    at level g is ``S(t) = penalty(t) - R(g) / g`` with the closed-form
    weight ``R(g)``;  ``r_scale`` multiplies the estimation-error block of
    ``R`` (never the bias-model block) and is 1 unless the optional weight
    refinement adjusted this node.
    """

    i: int
    m: int
    lti: bool
    A: Callable[[float], np.ndarray]
    Q: Callable[[float], np.ndarray]
    penalty: Callable[[float], np.ndarray]
    R_of_gamma2: Callable[[float, float], np.ndarray]
    C_ext: Callable[[float], np.ndarray]
    DDt_inv: Callable[[float], np.ndarray]
    coupling: NodeCoupling
    Y0: np.ndarray  # Riccati initial value for the time-varying path
    sample_times: np.ndarray
    bias: BiasModel | None = None
    F: np.ndarray | None = None
    Fbar: np.ndarray | None = None
    Fhat: np.ndarray | None = None
    Fcheck: np.ndarray | None = None
    r_scale: float = 1.0

    def R(self, gamma2: float) -> np.ndarray:
        return self.R_of_gamma2(gamma2, self.r_scale)

    def S(self, gamma2: float) -> Callable[[float], np.ndarray]:
        R = self.R(gamma2)
        return lambda t: self.penalty(t) - R / gamma2


def _ddt_inv_fun(sensor) -> Callable[[float], np.ndarray]:
    def f(t: float) -> np.ndarray:
        D = sensor.D(t)
        M = D @ D.T
        Minv = np.linalg.inv(M)
        return 0.5 * (Minv + Minv.T)

    return f


def _schedule_times(scenario: Scenario) -> np.ndarray:
    """Union of all schedule sample times (just {0} when time-invariant)."""
    ts = {0.0}
    for sched in (scenario.plant.A, scenario.plant.B):
        ts.update(sched.sample_times().tolist())
    for s in scenario.sensors:
        ts.update(s.C.sample_times().tolist())
        ts.update(s.D.sample_times().tolist())
    return np.array(sorted(ts))


# ---------------------------------------------------------------------------
# Closed-form weight selection
# ---------------------------------------------------------------------------
#
# The level- and graph-optimization procedure states its feasibility
# inequalities through the *shape* of the interconnection, i.e. the
# in-degree Laplacian of the communication graph:
#
#     defence:   R      + gamma2     * PenG  > 0,    Rcheck_i > Ups' Ups
#     observer:  R_bar  + bar_gamma2 * PenG  > P
#
# with  PenG = (L + L' - D_in) (x) I_n.  This is the quantity that changes
# between candidate graphs, which is what makes the graph recursion
# meaningful; the channel weights (W, H, Hc, Z) enter the per-node Riccati
# equations instead, where they only add damping.  The state-block
# inequalities are satisfied with margin alpha by scalar multiples of the
# identity, one common scalar per layer (the graph is fixed, so the
# defence scalar is affine in the level and the observer scalar needs one
# eigensolve per level); the bias-model block takes the tight matrix
# solution, which keeps the Riccati subtraction rank-deficient in exactly
# the directions the bias output does not excite (an inflated scalar
# multiple there was measured to destabilize the interconnected filter
# network at every level):
#
#     r_e    (g) = max(0, -g * lambda_min(PenG))      + alpha
#     R_check    = Ups' Ups + alpha I                  (per node)
#     r_bar  (g) = max(0, lambda_max(P - g * PenG))   + alpha


def graph_shape_penalty(graph: NetworkGraph, n: int) -> np.ndarray:
    """Graph-shape interconnection penalty (L + L' - D_in) (x) I_n."""
    Lap, _ = in_degree_laplacian(graph)
    Din = np.diag(np.diag(Lap))
    return np.kron(Lap + Lap.T - Din, np.eye(n))


def _defence_r_scalar(lam_min_pen: float, alpha: float, gamma2: float) -> float:
    return max(0.0, -gamma2 * lam_min_pen) + alpha


def _observer_r_scalar(
    P_sym: np.ndarray, pen: np.ndarray, alpha: float, bar_gamma2: float
) -> float:
    worst = float(np.linalg.eigvalsh(P_sym - bar_gamma2 * pen)[-1])
    return max(0.0, worst) + alpha


@dataclass(frozen=True, eq=False)
class SelectedWeights:
    """Closed-form stage weights at fixed attenuation levels.

    ``penalty`` is the graph-shape interconnection penalty the weight rule
    enforces its inequalities against (the same matrix for both layers).
    ``margins`` reports the smallest eigenvalues of the three feasibility
    inequalities (each is ``alpha`` up to roundoff by construction).
    """

    gamma2: float | None
    bar_gamma2: float
    alpha: float
    r_e: float | None  # defence layer, estimation-error block scalar
    r_check: tuple[np.ndarray, ...]  # per node, bias-model block Ups'Ups + alpha I
    r_bar: float  # observer layer scalar
    penalty: np.ndarray  # graph-shape interconnection penalty
    margins: dict


def select_weights(
    scenario: Scenario, gamma2: float | None, bar_gamma2: float
) -> SelectedWeights:
    """Evaluate the closed-form weight scalars and their feasibility margins."""
    w = scenario.weights
    alpha = w.alpha
    n = scenario.n
    N = scenario.N
    P_sym = 0.5 * (w.P + w.P.T)

    pen = graph_shape_penalty(scenario.graph, n)
    r_bar = _observer_r_scalar(P_sym, pen, alpha, bar_gamma2)
    margins = {
        "observer": float(
            np.linalg.eigvalsh(
                r_bar * np.eye(N * n) + bar_gamma2 * pen - P_sym
            )[0]
        )
    }

    r_e = None
    r_check: tuple[float, ...] = ()
    if gamma2 is not None:
        if scenario.attack_class is None:
            raise ScenarioError(
                "defence-layer weights require an attack class in the scenario"
            )
        lam_min_pen = float(np.linalg.eigvalsh(pen)[0])
        r_e = _defence_r_scalar(lam_min_pen, alpha, gamma2)
        margins["defence"] = float(
            np.linalg.eigvalsh(r_e * np.eye(N * n) + gamma2 * pen)[0]
        )
        checks = []
        bias_margins = []
        for i in range(1, N + 1):
            ac = scenario.attack_class.node(i)
            bias = realize_bias_model(ac.num, ac.den, n_f=ac.n_f)
            UtU = bias.Upsilon.T @ bias.Upsilon
            R_c = UtU + alpha * np.eye(bias.n_eps)
            checks.append(R_c)
            bias_margins.append(float(np.linalg.eigvalsh(R_c - UtU)[0]))
        r_check = tuple(checks)
        margins["bias_model"] = min(bias_margins)

    return SelectedWeights(
        gamma2=gamma2,
        bar_gamma2=bar_gamma2,
        alpha=alpha,
        r_e=r_e,
        r_check=r_check,
        r_bar=r_bar,
        penalty=pen,
        margins=margins,
    )


def layer_riccati(
    scenario: Scenario, layer: str, kind: str = "resilient"
) -> tuple[LayerRiccati, ...]:
    """Riccati coefficient functions for every node on one layer.

    ``layer`` is "detector" (extended blocks, combined channel weights) or
    "observer" (base blocks; ``kind`` decides whether the attack residual
    channel ``-F`` is appended to the input matrix).
    """
    if layer not in ("detector", "observer"):
        raise ValueError(f"unknown layer {layer!r}")
    w = scenario.weights
    n = scenario.n
    N = scenario.N
    alpha = w.alpha
    times = _schedule_times(scenario)
    zdict = w.Z if layer == "detector" else w.Zbar
    cm = coupling_matrices(scenario.graph, zdict, layer)
    coupling = cm.nodes

    # One weight scalar per layer, from the graph-shape penalty (memoized:
    # the observer formula costs an (Nn x Nn) eigensolve per level).
    pen_shape = graph_shape_penalty(scenario.graph, n)
    if layer == "observer":
        P_sym = 0.5 * (w.P + w.P.T)
        _memo: dict[float, float] = {}

        def r_state_scalar(g: float) -> float:
            if g not in _memo:
                _memo[g] = _observer_r_scalar(P_sym, pen_shape, alpha, g)
            return _memo[g]

    else:
        lam_min_pen = float(np.linalg.eigvalsh(pen_shape)[0])

        def r_state_scalar(g: float) -> float:
            return _defence_r_scalar(lam_min_pen, alpha, g)

    if layer == "detector" or kind == "resilient":
        if scenario.attack_class is None:
            raise ScenarioError(
                "resilient synthesis requires an attack class in the scenario"
            )

    out: list[LayerRiccati] = []
    for i in range(1, N + 1):
        sensor = scenario.sensor(i)
        ddt_inv = _ddt_inv_fun(sensor)
        nc = coupling[i - 1]

        def pen_base(t: float, _sensor=sensor, _ddt=ddt_inv, _nc=nc) -> np.ndarray:
            C = _sensor.C(t)
            M = C.T @ _ddt(t) @ C + _nc.penalty
            return 0.5 * (M + M.T)

        if layer == "observer":
            F = None
            if kind == "resilient":
                F = scenario.attack_class.node(i).F

            def A_fun(t: float, _A=scenario.plant.A) -> np.ndarray:
                return _A(t)

            def Q_fun(t: float, _B=scenario.plant.B, _F=F) -> np.ndarray:
                B = _B(t)
                Q = B @ B.T
                if _F is not None:
                    Q = Q + _F @ _F.T
                return Q

            def R_fun(g: float, scale: float = 1.0, _n=n) -> np.ndarray:
                return (scale * r_state_scalar(g)) * np.eye(_n)

            out.append(
                LayerRiccati(
                    i=i,
                    m=n,
                    lti=scenario.is_lti,
                    A=A_fun,
                    Q=Q_fun,
                    penalty=pen_base,
                    R_of_gamma2=R_fun,
                    C_ext=lambda t, _s=sensor: _s.C(t),
                    DDt_inv=ddt_inv,
                    coupling=nc,
                    Y0=np.linalg.inv(w.Xbar[i - 1]),
                    sample_times=times,
                    F=F,
                )
            )
            continue

        # ----- defence layer: extended blocks -----
        ac = scenario.attack_class.node(i)
        bias = realize_bias_model(ac.num, ac.den, n_f=ac.n_f)
        n_eps = bias.n_eps
        m = n + n_eps
        Fhat = ac.F + ac.Fbar
        Fcheck = (
            np.zeros((n_eps, ac.n_f)) if ac.Fcheck is None else np.array(ac.Fcheck)
        )
        if Fcheck.shape != (n_eps, ac.n_f):
            raise ScenarioError(
                f"attack_class[{i}].Fcheck: shape {Fcheck.shape} != ({n_eps}, {ac.n_f})"
            )
        Gcheck = bias.Gamma + Fcheck

        def A_fun(
            t: float,
            _A=scenario.plant.A,
            _F=ac.F,
            _Ups=bias.Upsilon,
            _Om=bias.Omega,
            _n=n,
            _m=m,
        ) -> np.ndarray:
            M = np.zeros((_m, _m))
            M[:_n, :_n] = _A(t)
            M[:_n, _n:] = -_F @ _Ups
            M[_n:, _n:] = _Om
            return M

        def Q_fun(
            t: float, _B=scenario.plant.B, _Fh=Fhat, _Gc=Gcheck, _n=n, _m=m
        ) -> np.ndarray:
            B = _B(t)
            Bb = np.zeros((_m, B.shape[1] + _Fh.shape[1]))
            Bb[:_n, : B.shape[1]] = B
            Bb[:_n, B.shape[1] :] = _Fh
            Bb[_n:, B.shape[1] :] = _Gc
            return Bb @ Bb.T

        def pen_ext(t: float, _pb=pen_base, _n=n, _m=m) -> np.ndarray:
            M = np.zeros((_m, _m))
            M[:_n, :_n] = _pb(t)
            return M

        ups_sq = bias.Upsilon.T @ bias.Upsilon

        def R_fun(
            g: float, scale: float = 1.0, _usq=ups_sq, _n=n, _ne=n_eps
        ) -> np.ndarray:
            r_e = scale * r_state_scalar(g)
            R = np.zeros((_n + _ne, _n + _ne))
            R[:_n, :_n] = r_e * np.eye(_n)
            R[_n:, _n:] = _usq + alpha * np.eye(_ne)
            return R

        def C_ext(t: float, _s=sensor, _n=n, _ne=n_eps) -> np.ndarray:
            C = _s.C(t)
            return np.hstack([C, np.zeros((C.shape[0], _ne))])

        X0 = (
            np.eye(n_eps)
            if w.X0 is None
            else np.array(w.X0[i - 1], dtype=float)
        )
        if X0.shape != (n_eps, n_eps):
            raise ScenarioError(
                f"weights.X0[{i}]: shape {X0.shape} != ({n_eps}, {n_eps})"
            )
        Y0 = np.zeros((m, m))
        Y0[:n, :n] = np.linalg.inv(w.X[i - 1])
        Y0[n:, n:] = np.linalg.inv(X0)

        out.append(
            LayerRiccati(
                i=i,
                m=m,
                lti=scenario.is_lti,
                A=A_fun,
                Q=Q_fun,
                penalty=pen_ext,
                R_of_gamma2=R_fun,
                C_ext=C_ext,
                DDt_inv=ddt_inv,
                coupling=nc,
                Y0=Y0,
                sample_times=times,
                bias=bias,
                F=ac.F,
                Fbar=ac.Fbar,
                Fhat=Fhat,
                Fcheck=Fcheck,
            )
        )
    return tuple(out)


# ---------------------------------------------------------------------------
# Feasibility and bisection
# ---------------------------------------------------------------------------


def _node_feasible_lti(data: LayerRiccati, gamma2: float) -> np.ndarray | None:
    """Stabilizing, invertible Riccati solution at level gamma2, or None."""
    S = data.S(gamma2)
    Y = solve_filter_are(data.A(0.0), data.Q(0.0), S(0.0))
    if Y is None:
        return None
    norm = float(np.linalg.norm(Y))
    if float(np.linalg.eigvalsh(Y)[0]) <= 1e-10 * (1.0 + norm):
        return None
    if spectral_abscissa(data.A(0.0) - Y @ S(0.0)) >= 0.0:
        return None
    return Y


def _node_feasible_ltv(
    data: LayerRiccati, gamma2: float, horizon: float, h: float, store_every: int = 0
) -> DreResult | None:
    """Bounded, uniformly positive-definite Riccati trajectory, or None."""
    S = data.S(gamma2)
    res = integrate_dre(
        data.A, data.Q, S, data.Y0, 0.0, horizon, h, store_every=store_every
    )
    if not res.bounded or res.min_eig <= 1e-10:
        return None
    return res


@dataclass(frozen=True)
class BisectionResult:
    """Outcome of the attenuation-level search.

    ``value`` is +inf (with ``payload`` None) when even the top of the
    bracket is infeasible.  ``monotone`` is False when probed levels
    contradicted the expected feasible-above/infeasible-below pattern, in
    which case the value is an upper bound on the true threshold rather
    than an approximation of it.
    """

    value: float
    payload: object | None
    monotone: bool
    evaluations: int


def bisect_attenuation(
    feasible: Callable[[float], object],
    lo: float = GAMMA2_BRACKET[0],
    hi: float = GAMMA2_BRACKET[1],
    rel_tol: float = GAMMA2_REL_TOL,
    max_iter: int = GAMMA2_MAX_ITER,
    probe: bool = True,
    label: str = "attenuation level",
) -> BisectionResult:
    """Minimize a feasibility threshold by bisection on a log bracket.

    ``feasible(g)`` returns a payload (anything non-None) when level ``g``
    is achievable and None otherwise. Returns value +inf when even the top
    of the bracket fails, and the bottom of the bracket when it is already
    feasible. Feasibility is expected to be monotone in ``g``; a probe
    pass warns (and clears the ``monotone`` flag) if the sampled pattern
    contradicts that.
    """
    evals = 0

    def check(g: float):
        nonlocal evals
        evals += 1
        return feasible(g)

    payload_hi = check(hi)
    if payload_hi is None:
        return BisectionResult(
            value=np.inf, payload=None, monotone=True, evaluations=evals
        )
    payload_lo = check(lo)
    if payload_lo is not None:
        return BisectionResult(
            value=lo, payload=payload_lo, monotone=True, evaluations=evals
        )

    monotone = True
    if probe:
        pts = np.exp(np.linspace(np.log(lo), np.log(hi), 5))[1:-1]
        flags = [(float(p), check(float(p))) for p in pts]
        pattern = [f is not None for _, f in flags]
        if any(pattern[k] and not pattern[k + 1] for k in range(len(pattern) - 1)):
            monotone = False
            warnings.warn(
                f"{label}: feasibility is not monotone across probed levels; "
                "the bisected value may be conservative",
                RuntimeWarning,
                stacklevel=2,
            )
        feas = [(p, f) for p, f in flags if f is not None]
        if feas:
            hi, payload_hi = feas[0]
        lo = max([p for p, f in flags if f is None and p < hi], default=lo)

    it = 0
    while hi / lo > 1.0 + rel_tol and it < max_iter:
        mid = float(np.sqrt(lo * hi))
        f = check(mid)
        if f is not None:
            hi, payload_hi = mid, f
        else:
            lo = mid
        it += 1
    return BisectionResult(
        value=hi, payload=payload_hi, monotone=monotone, evaluations=evals
    )


def _layer_feasibility_fn(
    nodes: Sequence[LayerRiccati], horizon: float | None, h_dre: float
) -> Callable[[float], tuple | None]:
    """All-nodes feasibility at a common level (None if any node fails).

    The returned closure carries a ``state`` dict whose ``failed_node``
    entry names the node that broke the most recent infeasible call, for
    error messages.
    """
    state: dict = {"failed_node": None}

    def feasible(g: float):
        out = []
        for data in nodes:
            if data.lti and horizon is None:
                Y = _node_feasible_lti(data, g)
            else:
                Y = _node_feasible_ltv(data, g, horizon, h_dre)
            if Y is None:
                state["failed_node"] = data.i
                return None
            out.append(Y)
        return tuple(out)

    feasible.state = state
    return feasible


# ---------------------------------------------------------------------------
# Gain extraction
# ---------------------------------------------------------------------------


def _gains_from_solution(
    data: LayerRiccati, Y: np.ndarray, t: float
) -> tuple[np.ndarray, dict]:
    """Measurement gain and per-edge link gains from one Riccati solution."""
    L = Y @ data.C_ext(t).T @ data.DDt_inv(t)
    K = {}
    for ec in data.coupling.edges:
        gf = ec.gain_factor  # (n, p)
        ext = np.zeros((data.m, gf.shape[1]))
        ext[: gf.shape[0], :] = gf
        K[ec.key] = Y @ ext
    return L, K


def _schedule_gains(
    data: LayerRiccati, res: DreResult
) -> tuple[MatrixSchedule, dict]:
    """Sampled gain schedules along a Riccati trajectory."""
    Ls = []
    Ks: dict[tuple[int, int], list[np.ndarray]] = {
        ec.key: [] for ec in data.coupling.edges
    }
    for t, Y in zip(res.times, res.trajectory):
        L, K = _gains_from_solution(data, Y, float(t))
        Ls.append(L)
        for key, val in K.items():
            Ks[key].append(val)
    L_sched = MatrixSchedule.sampled(res.times, np.stack(Ls), hold=False)
    K_sched = {
        key: MatrixSchedule.sampled(res.times, np.stack(vals), hold=False)
        for key, vals in Ks.items()
    }
    return L_sched, K_sched


_REFINE_SCALES = (0.5, 0.25, 0.125)


def _refine_layer_weights(
    scenario: Scenario,
    layer: str,
    nodes: Sequence[LayerRiccati],
    level: float,
    payload: tuple,
) -> tuple[tuple, dict]:
    """Scale per-node estimation-error weights down where margin allows.

    Works node by node (time-invariant path only): a smaller scale is kept
    when the node's stationary Riccati equation still has a solution and
    the layer's global feasibility inequality retains a positive smallest
    eigenvalue with all currently accepted scales in place.  Returns the
    updated payload and a record ``{node id: kept scale}``.
    """
    w = scenario.weights
    n = scenario.n
    N = scenario.N
    pen = graph_shape_penalty(scenario.graph, n)
    P_sym = 0.5 * (w.P + w.P.T) if layer == "observer" else None
    # Unscaled estimation-error scalar (common to all nodes of the layer).
    r_base = float(nodes[0].R_of_gamma2(level, 1.0)[0, 0])

    def global_ok(scales: Sequence[float]) -> bool:
        R_state = np.diag(np.repeat([s * r_base for s in scales], n))
        M = R_state + level * pen
        if P_sym is not None:
            M = M - P_sym
        return float(np.linalg.eigvalsh(M)[0]) > 1e-9

    scales = [1.0] * N
    new_payload = list(payload)
    record: dict[int, float] = {}
    for idx, data in enumerate(nodes):
        kept = 1.0
        for s in _REFINE_SCALES:
            trial = list(scales)
            trial[idx] = s
            if not global_ok(trial):
                break
            data.r_scale = s
            Y = _node_feasible_lti(data, level)
            if Y is None:
                break
            kept = s
            scales[idx] = s
            new_payload[idx] = Y
        data.r_scale = kept
        if kept != 1.0:
            record[data.i] = kept
    return tuple(new_payload), record


def _subtract_gains(a, b):
    """Difference of two gains that may be schedules (on the same grid)."""
    if isinstance(a, np.ndarray) and isinstance(b, np.ndarray):
        return a - b
    if isinstance(a, MatrixSchedule) and isinstance(b, MatrixSchedule):
        if a.times is not None and b.times is not None and np.array_equal(a.times, b.times):
            return MatrixSchedule.sampled(a.times, a.values - b.values, hold=a.hold)
    # fall back to sampling on the union grid
    ta = a.sample_times() if isinstance(a, MatrixSchedule) else np.array([0.0])
    tb = b.sample_times() if isinstance(b, MatrixSchedule) else np.array([0.0])
    ts = np.union1d(ta, tb)
    vals = np.stack([_gain_at(a, t) - _gain_at(b, t) for t in ts])
    if len(ts) == 1:
        return vals[0]
    return MatrixSchedule.sampled(ts, vals, hold=False)


# ---------------------------------------------------------------------------
# Top-level synthesis
# ---------------------------------------------------------------------------


def synthesize(
    scenario: Scenario,
    kind: str = "resilient",
    gamma2: float | None = None,
    bar_gamma2: float | None = None,
    ltv_horizon: float | None = None,
    dre_steps: int = 2000,
    refine_weights: bool = False,
) -> SynthesizedGains:
    """Design all estimator gains for a scenario.

    ``kind`` is "resilient" (observer + defence layer) or "baseline"
    (observer only, no attack channel in the input matrix). Attenuation
    levels are taken from the arguments, else from the scenario weights,
    else minimized by bisection. On the time-invariant path gains come from
    stationary Riccati solutions; with time-varying plant/sensor data (or an
    explicit ``ltv_horizon``) they come from Riccati trajectories integrated
    over the horizon with ``dre_steps`` steps and are returned as sampled
    schedules.

    With ``refine_weights`` (time-invariant path only, off by default) the
    per-node estimation-error weight scalars are scaled down where the
    node's Riccati equation and the global feasibility inequalities retain
    margin, before gains are extracted.

    Raises InfeasibleError when no level in the bisection bracket is
    achievable (the message names the failing layer and node), and
    ScenarioError for structural problems.
    """
    if kind not in ("resilient", "baseline"):
        raise ValueError(f"kind must be 'resilient' or 'baseline', got {kind!r}")
    w = scenario.weights
    if gamma2 is None:
        gamma2 = w.gamma2
    if bar_gamma2 is None:
        bar_gamma2 = w.bar_gamma2
    ltv = not scenario.is_lti or ltv_horizon is not None
    horizon = None
    h_dre = 0.0
    if ltv:
        horizon = (
            float(ltv_horizon) if ltv_horizon is not None else scenario.simulation.t_end
        )
        h_dre = horizon / max(1, dre_steps)
    store_every = max(1, dre_steps // 400)

    def solve_layer(nodes, level, layer_label):
        feas = _layer_feasibility_fn(nodes, horizon, h_dre)
        if level is not None:
            payload = feas(float(level))
            if payload is None:
                raise InfeasibleError(
                    f"{layer_label} {level:g} is not achievable for this "
                    f"scenario (Riccati infeasible at node "
                    f"{feas.state['failed_node']})"
                )
            return float(level), payload, {"mode": "given", "level": float(level)}
        res = bisect_attenuation(feas, label=layer_label)
        if not np.isfinite(res.value):
            raise InfeasibleError(
                f"no admissible design: {layer_label} infeasible up to "
                f"{GAMMA2_BRACKET[1]:g} (Riccati infeasible at node "
                f"{feas.state['failed_node']})"
            )
        return res.value, res.payload, {
            "mode": "bisected",
            "level": res.value,
            "monotone": res.monotone,
            "evaluations": res.evaluations,
        }

    # Observer layer (both kinds).
    obs_nodes = layer_riccati(scenario, "observer", kind=kind)
    bar_g2, obs_payload, obs_info = solve_layer(
        obs_nodes, bar_gamma2, "observer attenuation level"
    )

    det_nodes = det_payload = det_info = None
    det_g2 = None
    if kind == "resilient":
        det_nodes = layer_riccati(scenario, "detector", kind=kind)
        det_g2, det_payload, det_info = solve_layer(
            det_nodes, gamma2, "defence attenuation level"
        )

    refine_record: dict | None = None
    if refine_weights:
        if ltv:
            warnings.warn(
                "weight refinement is only available on the time-invariant "
                "path; skipping",
                RuntimeWarning,
                stacklevel=2,
            )
        else:
            refine_record = {}
            obs_payload, rec = _refine_layer_weights(
                scenario, "observer", obs_nodes, bar_g2, obs_payload
            )
            refine_record["observer"] = rec
            if kind == "resilient":
                det_payload, rec = _refine_layer_weights(
                    scenario, "detector", det_nodes, det_g2, det_payload
                )
                refine_record["defence"] = rec

    # For the time-varying path, re-run the winning level storing trajectories.
    def extract(data: LayerRiccati, payload_entry):
        if isinstance(payload_entry, DreResult):
            res = _node_feasible_ltv(
                data,
                det_g2 if data.bias is not None else bar_g2,
                horizon,
                h_dre,
                store_every=store_every,
            )
            L, K = _schedule_gains(data, res)
            Y_end = res.Y
            return L, K, Y_end, np.linalg.inv(data.Y0)
        Y = payload_entry
        L, K = _gains_from_solution(data, Y, 0.0)
        return L, K, Y, np.linalg.inv(Y)

    node_gains = []
    for idx in range(scenario.N):
        od = obs_nodes[idx]
        L, K, _, Xbar_eff = extract(od, obs_payload[idx])
        if kind == "baseline":
            node_gains.append(
                NodeGains(i=idx + 1, L=L, K=K, Xbar_eff=Xbar_eff)
            )
            continue
        dd = det_nodes[idx]
        Lb, Kb, _, X_eff = extract(dd, det_payload[idx])
        n = scenario.n
        if isinstance(Lb, MatrixSchedule):
            Lhat = MatrixSchedule.sampled(Lb.times, Lb.values[:, :n, :], hold=False)
            Lcheck = MatrixSchedule.sampled(Lb.times, Lb.values[:, n:, :], hold=False)
            Khat = {
                k: MatrixSchedule.sampled(v.times, v.values[:, :n, :], hold=False)
                for k, v in Kb.items()
            }
            Kcheck = {
                k: MatrixSchedule.sampled(v.times, v.values[:, n:, :], hold=False)
                for k, v in Kb.items()
            }
        else:
            Lhat, Lcheck = Lb[:n, :], Lb[n:, :]
            Khat = {k: v[:n, :] for k, v in Kb.items()}
            Kcheck = {k: v[n:, :] for k, v in Kb.items()}
        Lbar = _subtract_gains(Lhat, L)
        Kbar = {k: _subtract_gains(Khat[k], K[k]) for k in Khat}
        node_gains.append(
            NodeGains(
                i=idx + 1,
                L=L,
                K=K,
                Xbar_eff=Xbar_eff,
                Lhat=Lhat,
                Lcheck=Lcheck,
                Lbar=Lbar,
                Khat=Khat,
                Kcheck=Kcheck,
                Kbar=Kbar,
                bias=dd.bias,
                F=dd.F,
                Fbar=dd.Fbar,
                Fhat=dd.Fhat,
                Fcheck=dd.Fcheck,
                X_eff=X_eff,
            )
        )

    def node_diag(data: LayerRiccati, entry, level: float) -> dict:
        if isinstance(entry, DreResult):
            return {
                "i": data.i,
                "bound_estimate": float(entry.bound_estimate),
                "min_eig": float(entry.min_eig),
            }
        Y = entry
        S = data.S(level)
        return {
            "i": data.i,
            "min_eig": float(np.linalg.eigvalsh(Y)[0]),
            "closed_loop_abscissa": float(
                spectral_abscissa(data.A(0.0) - Y @ S(0.0))
            ),
        }

    sel = select_weights(scenario, det_g2, bar_g2)
    diagnostics = {
        "kind": kind,
        "label": LABEL_SUBOPTIMAL,
        "certificate": "horizon-limited" if ltv else "stationary",
        "horizon": horizon,
        "plant_stabilizable": (
            pbh_stabilizable(scenario.plant.A(0.0), scenario.plant.B(0.0))
            if scenario.is_lti
            else None
        ),
        "levels": {"gamma2": det_g2, "bar_gamma2": bar_g2},
        "weights": {
            "alpha": w.alpha,
            "rule": LABEL_SUBOPTIMAL,
            "penalty": "graph shape (L + L' - D_in) kron I",
            "r_e": sel.r_e,
            "r_check": [R.tolist() for R in sel.r_check],
            "r_bar": sel.r_bar,
            "margins": sel.margins,
        },
        "observer": {
            "selection": obs_info,
            "nodes": [
                node_diag(d, p, bar_g2) for d, p in zip(obs_nodes, obs_payload)
            ],
        },
        "defence": (
            None
            if kind != "resilient"
            else {
                "selection": det_info,
                "nodes": [
                    node_diag(d, p, det_g2)
                    for d, p in zip(det_nodes, det_payload)
                ],
            }
        ),
        "weight_refinement": refine_record,
    }

    return SynthesizedGains(
        kind=kind,
        gamma2=det_g2,
        bar_gamma2=bar_g2,
        nodes=tuple(node_gains),
        scenario_hash=scenario_synthesis_hash(scenario),
        diagnostics=diagnostics,
    )


# ---------------------------------------------------------------------------
# Autonomous error dynamics (stability certificate)
# ---------------------------------------------------------------------------


def error_dynamics_indices(scenario: Scenario, gains: SynthesizedGains) -> dict:
    """Index slices of the autonomous error state (e blocks, then z, then d)."""
    n = scenario.n
    N = scenario.N
    idx = {"e": [], "z": [], "d": []}
    off = 0
    for _ in range(N):
        idx["e"].append(slice(off, off + n))
        off += n
    if gains.is_resilient:
        for _ in range(N):
            idx["z"].append(slice(off, off + n))
            off += n
        for ng in gains.nodes:
            idx["d"].append(slice(off, off + ng.n_eps))
            off += ng.n_eps
    idx["total"] = off
    return idx


def assemble_error_dynamics(
    scenario: Scenario, gains: SynthesizedGains, t: float = 0.0
) -> np.ndarray:
    """Closed-loop matrix of the autonomous (noise- and input-free)
    estimation-error network.

    States are stacked as all observer errors e_i, then all defence
    residuals z_i = e_i - ehat_i, then all bias-model errors d_i. For a
    baseline design only the e block exists. The coupling blocks follow
    the same design model the gains were synthesized against (state error
    driven by the bias-model error through the anticipated pattern ``-F
    Ups``); when the scenario's compensation split equals that pattern
    (``Fbar = 0``, ``Fcheck = 0``, the default), this matrix is exactly
    the realized closed-loop error dynamics. The matrix is evaluated at
    time ``t`` (relevant only for schedule-valued gains); for a
    time-invariant design its spectral abscissa certifies exponential
    convergence of the whole error network.
    """
    n = scenario.n
    N = scenario.N
    idx = error_dynamics_indices(scenario, gains)
    M = np.zeros((idx["total"], idx["total"]))
    A = scenario.plant.A(t)

    for i in range(1, N + 1):
        ng = gains.node(i)
        C = scenario.sensor(i).C(t)
        ei = idx["e"][i - 1]
        L = _gain_at(ng.L, t)
        diag = A - L @ C
        for key, Kg in sorted(ng.K.items()):
            j = key[0]
            K = _gain_at(Kg, t)
            W = scenario.graph.edge(*key).W
            diag = diag - K @ W
            M[ei, idx["e"][j - 1]] += K @ W
        M[ei, ei] += diag
        if not gains.is_resilient:
            continue

        zi = idx["z"][i - 1]
        di = idx["d"][i - 1]
        Ups = ng.bias.Upsilon
        # e-row coupling: the true injection -F (f - u) = -F Ups d + ...
        M[ei, di] += -ng.F @ Ups

        Lhat = _gain_at(ng.Lhat, t)
        zdiag = A - Lhat @ C
        for key, Kg in sorted(ng.Khat.items()):
            j = key[0]
            K = _gain_at(Kg, t)
            W = scenario.graph.edge(*key).W
            zdiag = zdiag - K @ W
            M[zi, idx["z"][j - 1]] += K @ W
        M[zi, zi] += zdiag
        M[zi, di] += -ng.F @ Ups

        Lcheck = _gain_at(ng.Lcheck, t)
        M[di, zi] += -Lcheck @ C
        for key, Kg in sorted(ng.Kcheck.items()):
            j = key[0]
            K = _gain_at(Kg, t)
            W = scenario.graph.edge(*key).W
            M[di, zi] += -K @ W
            M[di, idx["z"][j - 1]] += K @ W
        M[di, di] += ng.bias.Omega
    return M


# ---------------------------------------------------------------------------
# Graph optimization
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GraphCandidateResult:
    index: int
    edges: tuple[tuple[int, int], ...]
    feasible: bool
    gamma2: float | None
    bar_gamma2: float | None
    message: str = ""

    @property
    def objective(self) -> float:
        """Defence attenuation level when the design has a defence layer,
        else the observer level (infinite when infeasible)."""
        if not self.feasible:
            return np.inf
        return self.gamma2 if self.gamma2 is not None else self.bar_gamma2


def _none_if_inf(v: float) -> float | None:
    return None if not np.isfinite(v) else float(v)


@dataclass(frozen=True)
class GraphSearchResult:
    """Outcome of the candidate-graph search.

    ``running_gamma2`` / ``running_bar_gamma2`` are the running minima of
    the two attenuation levels over the candidate sequence (entries are
    +inf until the first feasible candidate; for an observer-only search
    the defence sequence stays +inf throughout).
    """

    candidates: tuple[GraphCandidateResult, ...]
    winner: int | None  # index into candidates, None when all infeasible
    running_gamma2: tuple[float, ...]
    running_bar_gamma2: tuple[float, ...]

    @property
    def all_infeasible(self) -> bool:
        return self.winner is None

    def to_dict(self) -> dict:
        return {
            "candidates": [
                {
                    "index": c.index,
                    "edges": [list(k) for k in c.edges],
                    "feasible": c.feasible,
                    "gamma2": c.gamma2,
                    "bar_gamma2": c.bar_gamma2,
                    "objective": None if not c.feasible else c.objective,
                    "message": c.message,
                }
                for c in self.candidates
            ],
            "winner": self.winner,
            "all_infeasible": self.all_infeasible,
            "running_gamma2": [_none_if_inf(v) for v in self.running_gamma2],
            "running_bar_gamma2": [
                _none_if_inf(v) for v in self.running_bar_gamma2
            ],
        }


def scenario_with_edges(
    scenario: Scenario,
    edge_keys: Sequence[tuple[int, int]],
    default_Z: float = 0.01,
) -> Scenario:
    """Scenario variant with the communication edges replaced.

    Edges present in the original graph keep their link matrices and
    weights; new edges get an identity relative map, noiseless channels,
    and ``default_Z * I`` edge weights. The global error weight P is
    rebuilt from the new graph's Laplacian following the same convention as
    the builtin example (``kron(L + L_reversed, I_n)``).
    """
    n = scenario.n
    edges = []
    Z: dict[tuple[int, int], np.ndarray] = {}
    Zbar: dict[tuple[int, int], np.ndarray] = {}
    for j, i in edge_keys:
        if scenario.graph.has_edge(j, i):
            e = scenario.graph.edge(j, i)
            Z[(j, i)] = scenario.weights.Z[(j, i)]
            Zbar[(j, i)] = scenario.weights.Zbar[(j, i)]
        else:
            e = Edge(
                j=j,
                i=i,
                W=np.eye(n),
                H=np.zeros((n, 1)),
                Hc=np.zeros((n, 1)),
            )
            Z[(j, i)] = default_Z * np.eye(n)
            Zbar[(j, i)] = default_Z * np.eye(n)
        edges.append(Edge(j=j, i=i, W=e.W, H=e.H, Hc=e.Hc))
    graph = NetworkGraph(scenario.graph.n_nodes, tuple(edges))
    L, _ = in_degree_laplacian(graph)
    LT, _ = in_degree_laplacian(graph.reversed())
    P = np.kron(L + LT, np.eye(n))
    weights = DesignWeights(
        Z=Z,
        Zbar=Zbar,
        X=scenario.weights.X,
        Xbar=scenario.weights.Xbar,
        P=P,
        alpha=scenario.weights.alpha,
        X0=scenario.weights.X0,
        gamma2=None,
        bar_gamma2=None,
    )
    return Scenario(
        plant=scenario.plant,
        sensors=scenario.sensors,
        graph=graph,
        attack_class=scenario.attack_class,
        weights=weights,
        simulation=scenario.simulation,
        attacks=scenario.attacks,
        disturbances=scenario.disturbances,
        notes=dict(scenario.notes),
    )


def optimize_over_graphs(
    scenario: Scenario,
    candidates: Sequence[Sequence[tuple[int, int]]],
    kind: str = "resilient",
    max_workers: int = 1,
) -> GraphSearchResult:
    """Synthesize over candidate edge sets and pick the best one.

    Each candidate is a list of directed edges (j, i), evaluated
    independently at its own minimized attenuation levels; two running
    minima are tracked across the candidate sequence. The winner is the
    candidate attaining the smallest defence level (observer level and
    then candidate order break ties; for an observer-only search the
    observer level decides). A candidate whose graph is not weakly
    connected is recorded as infeasible without synthesis, as is one where
    either layer is infeasible across the whole bisection bracket. When
    every candidate is infeasible the result says so explicitly instead of
    picking a winner.  With ``max_workers > 1`` candidates are evaluated
    on a thread pool (results keep candidate order).
    """
    cand_keys = [tuple((int(j), int(i)) for j, i in keys) for keys in candidates]

    def evaluate(job: tuple[int, tuple[tuple[int, int], ...]]):
        idx, keys = job
        variant = scenario_with_edges(scenario, keys)
        if not variant.graph.is_weakly_connected():
            return GraphCandidateResult(
                index=idx,
                edges=keys,
                feasible=False,
                gamma2=None,
                bar_gamma2=None,
                message="graph is not weakly connected",
            )
        try:
            gains = synthesize(variant, kind=kind)
        except InfeasibleError as exc:
            return GraphCandidateResult(
                index=idx,
                edges=keys,
                feasible=False,
                gamma2=None,
                bar_gamma2=None,
                message=str(exc),
            )
        return GraphCandidateResult(
            index=idx,
            edges=keys,
            feasible=True,
            gamma2=gains.gamma2,
            bar_gamma2=gains.bar_gamma2,
        )

    jobs = list(enumerate(cand_keys))
    if max_workers > 1 and len(jobs) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            results = list(pool.map(evaluate, jobs))
    else:
        results = [evaluate(job) for job in jobs]

    run_g: list[float] = []
    run_bg: list[float] = []
    best_g = best_bg = np.inf
    best: tuple[float, float, int] | None = None
    for res in results:
        if res.feasible:
            g = res.gamma2 if res.gamma2 is not None else np.inf
            bg = res.bar_gamma2
            best_g = min(best_g, g)
            best_bg = min(best_bg, bg)
            key = (g if res.gamma2 is not None else bg, bg, res.index)
            if best is None or key < best:
                best = key
        run_g.append(best_g)
        run_bg.append(best_bg)
    return GraphSearchResult(
        candidates=tuple(results),
        winner=best[2] if best is not None else None,
        running_gamma2=tuple(run_g),
        running_bar_gamma2=tuple(run_bg),
    )


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def _gain_to_json(g):
    if g is None:
        return None
    if isinstance(g, MatrixSchedule):
        return g.to_json()
    return {"constant": np.asarray(g).tolist()}


def _gain_from_json(data, name):
    if data is None:
        return None
    sched = MatrixSchedule.from_json(data, name)
    return sched.constant_value if sched.is_constant else sched


def _gdict_to_json(d):
    if d is None:
        return None
    return {f"{k[0]}->{k[1]}": _gain_to_json(v) for k, v in sorted(d.items())}


def _gdict_from_json(data, name):
    if data is None:
        return None
    out = {}
    for key, v in data.items():
        j, i = key.split("->")
        out[(int(j), int(i))] = _gain_from_json(v, f"{name}[{key}]")
    return out


def gains_to_dict(gains: SynthesizedGains) -> dict:
    return {
        "kind": gains.kind,
        "label": gains.label,
        "scenario_hash": gains.scenario_hash,
        "gamma2": gains.gamma2,
        "bar_gamma2": gains.bar_gamma2,
        "diagnostics": gains.diagnostics,
        "nodes": [
            {
                "i": ng.i,
                "L": _gain_to_json(ng.L),
                "K": _gdict_to_json(ng.K),
                "Xbar_eff": ng.Xbar_eff.tolist(),
                "Lhat": _gain_to_json(ng.Lhat),
                "Lcheck": _gain_to_json(ng.Lcheck),
                "Lbar": _gain_to_json(ng.Lbar),
                "Khat": _gdict_to_json(ng.Khat),
                "Kcheck": _gdict_to_json(ng.Kcheck),
                "Kbar": _gdict_to_json(ng.Kbar),
                "bias_model": None
                if ng.bias is None
                else {
                    "Omega": ng.bias.Omega.tolist(),
                    "Gamma": ng.bias.Gamma.tolist(),
                    "Upsilon": ng.bias.Upsilon.tolist(),
                },
                "F": None if ng.F is None else ng.F.tolist(),
                "Fbar": None if ng.Fbar is None else ng.Fbar.tolist(),
                "Fhat": None if ng.Fhat is None else ng.Fhat.tolist(),
                "Fcheck": None if ng.Fcheck is None else ng.Fcheck.tolist(),
                "X_eff": None if ng.X_eff is None else ng.X_eff.tolist(),
            }
            for ng in gains.nodes
        ],
    }


def gains_from_dict(data: dict) -> SynthesizedGains:
    nodes = []
    for nd in data["nodes"]:
        bias = None
        if nd.get("bias_model") is not None:
            bm = nd["bias_model"]
            bias = BiasModel(
                Omega=np.array(bm["Omega"], dtype=float),
                Gamma=np.array(bm["Gamma"], dtype=float),
                Upsilon=np.array(bm["Upsilon"], dtype=float),
            )

        def arr(key):
            return None if nd.get(key) is None else np.array(nd[key], dtype=float)

        nodes.append(
            NodeGains(
                i=int(nd["i"]),
                L=_gain_from_json(nd["L"], "L"),
                K=_gdict_from_json(nd["K"], "K"),
                Xbar_eff=np.array(nd["Xbar_eff"], dtype=float),
                Lhat=_gain_from_json(nd.get("Lhat"), "Lhat"),
                Lcheck=_gain_from_json(nd.get("Lcheck"), "Lcheck"),
                Lbar=_gain_from_json(nd.get("Lbar"), "Lbar"),
                Khat=_gdict_from_json(nd.get("Khat"), "Khat"),
                Kcheck=_gdict_from_json(nd.get("Kcheck"), "Kcheck"),
                Kbar=_gdict_from_json(nd.get("Kbar"), "Kbar"),
                bias=bias,
                F=arr("F"),
                Fbar=arr("Fbar"),
                Fhat=arr("Fhat"),
                Fcheck=arr("Fcheck"),
                X_eff=arr("X_eff"),
            )
        )
    return SynthesizedGains(
        kind=data["kind"],
        gamma2=data.get("gamma2"),
        bar_gamma2=float(data["bar_gamma2"]),
        nodes=tuple(nodes),
        scenario_hash=data.get("scenario_hash", ""),
        label=data.get("label", LABEL_SUBOPTIMAL),
        diagnostics=data.get("diagnostics") or {},
    )


def save_gains(gains: SynthesizedGains, path) -> None:
    dump_json(gains_to_dict(gains), path)


def load_gains(path) -> SynthesizedGains:
    import json

    with open(path) as fh:
        return gains_from_dict(json.load(fh))
