"""Closed-loop simulation of the attacked sensor network.

The full simulation state stacks the plant with every node's estimator:

    [ x | xhat_1 .. xhat_N | ehat_1 .. ehat_N | epshat_1 .. epshat_N ]

(the defence blocks ``ehat``/``epshat`` exist only for resilient gains).
The exogenous input stacks process noise, per-node measurement noise, the
two per-edge channel noises, and per-node attack signals:

    [ w | v_1 .. v_N | v_e (edges) | vc_e (edges) | f_1 .. f_N ]

Everything is linear, so a run is ``dstate/dt = M state + Bin inp(t)``.
On the time-invariant path the classical RK4 step is precomputed as an
affine map

    state+ = Phi state + G1B inp(t) + GmB inp(t+h/2) + G4B inp(t+h)

whose matrices are exact polynomial functions of ``h M``; spans where all
inputs are identically zero (known from the declared signal supports)
advance directly through pre-multiplied powers of ``Phi``, which makes
long quiescent stretches essentially free. The generic path re-assembles
``M(t)``/``Bin(t)`` at every stage and is meant for time-varying data on
short horizons.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .attackclass import attack_signal, disturbance_signal
from .errors import DivergenceError, ScenarioError
from .model import Scenario, scenario_synthesis_hash
from .numerics import rk4_step
from .synthesis import SynthesizedGains, _gain_at

__all__ = [
    "StateLayout",
    "InputLayout",
    "state_layout",
    "input_layout",
    "InputEvaluator",
    "build_input_evaluator",
    "assemble_closed_loop",
    "Trajectory",
    "simulate",
    "write_trajectory_csv",
]

#: RK4 becomes unstable roughly when |h * eig| exceeds 2.78 on the real axis;
#: warn with some margin when the closed-loop spectrum gets close.
RK4_STABILITY_MARGIN = 2.5

DIVERGENCE_LIMIT = 1e12


# ---------------------------------------------------------------------------
# Layouts
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StateLayout:
    n: int
    N: int
    x: slice
    xhat: tuple[slice, ...]
    ehat: tuple[slice, ...] | None
    epshat: tuple[slice, ...] | None
    total: int


def state_layout(scenario: Scenario, gains: SynthesizedGains) -> StateLayout:
    n = scenario.n
    N = scenario.N
    off = 0
    x = slice(0, n)
    off = n
    xhat = []
    for _ in range(N):
        xhat.append(slice(off, off + n))
        off += n
    ehat = epshat = None
    if gains.is_resilient:
        ehat = []
        for _ in range(N):
            ehat.append(slice(off, off + n))
            off += n
        epshat = []
        for ng in gains.nodes:
            epshat.append(slice(off, off + ng.n_eps))
            off += ng.n_eps
        ehat = tuple(ehat)
        epshat = tuple(epshat)
    return StateLayout(
        n=n, N=N, x=x, xhat=tuple(xhat), ehat=ehat, epshat=epshat, total=off
    )


@dataclass(frozen=True)
class InputLayout:
    w: slice
    v: tuple[slice, ...]
    v_edge: dict
    vc_edge: dict
    f: tuple[slice, ...]
    total: int


def input_layout(scenario: Scenario) -> InputLayout:
    off = 0
    w = slice(0, scenario.n_w)
    off = scenario.n_w
    v = []
    for i in range(1, scenario.N + 1):
        nv = scenario.sensor(i).n_v
        v.append(slice(off, off + nv))
        off += nv
    v_edge = {}
    for key in scenario.graph.edge_keys:
        m = scenario.graph.edge(*key).H.shape[1]
        v_edge[key] = slice(off, off + m)
        off += m
    vc_edge = {}
    for key in scenario.graph.edge_keys:
        m = scenario.graph.edge(*key).Hc.shape[1]
        vc_edge[key] = slice(off, off + m)
        off += m
    f = []
    for i in range(1, scenario.N + 1):
        nf = scenario.n_f(i)
        f.append(slice(off, off + nf))
        off += nf
    return InputLayout(
        w=w, v=tuple(v), v_edge=v_edge, vc_edge=vc_edge, f=tuple(f), total=off
    )


# ---------------------------------------------------------------------------
# Input evaluation
# ---------------------------------------------------------------------------


class InputEvaluator:
    """Evaluates the stacked exogenous input on arrays of times.

    Also tracks the union of signal support intervals so the integrator can
    prove entire spans identically zero (a decaying term's support is
    half-infinite, so only its past is skippable).
    """

    def __init__(self, scenario: Scenario, seed: int):
        self.layout = input_layout(scenario)
        self.seed = int(seed)
        self._parts: list[tuple[slice, Callable]] = []
        self._supports: list[tuple[float, float]] = []

        for atk in scenario.attacks:
            sl = self.layout.f[atk.node - 1]
            if sl.stop == sl.start:
                continue
            fn = attack_signal(atk, scenario.n_f(atk.node), self.seed)
            self._parts.append((sl, fn))
            for seg in atk.bias:
                self._supports.append((seg.start, seg.end))
            for term in atk.masking:
                self._supports.append(_term_support(term))

        for dist in scenario.disturbances:
            if dist.channel == "w":
                sl = self.layout.w
            elif dist.channel == "v":
                sl = self.layout.v[dist.node - 1]
            elif dist.channel == "v_edge":
                sl = self.layout.v_edge[dist.edge]
            else:
                sl = self.layout.vc_edge[dist.edge]
            dim = sl.stop - sl.start
            if dim == 0:
                continue
            fn = disturbance_signal(dist, dim, self.seed)
            self._parts.append((sl, fn))
            self._supports.append(_term_support(dist.term))

    @property
    def total(self) -> int:
        return self.layout.total

    def __call__(self, t: np.ndarray) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.zeros((t.size, self.layout.total))
        for sl, fn in self._parts:
            out[:, sl] += fn(t)
        return out

    def is_zero_on(self, t0: float, t1: float, margin: float = 0.0) -> bool:
        """True when every signal is identically zero on [t0, t1]."""
        lo = t0 - margin
        hi = t1 + margin
        for a, b in self._supports:
            if a <= hi and b >= lo:
                return False
        return True


def _term_support(term) -> tuple[float, float]:
    if term.kind == "decaying_sin":
        return (term.start, np.inf)
    return (term.start, term.end if term.end is not None else term.start)


def build_input_evaluator(scenario: Scenario, seed: int) -> InputEvaluator:
    return InputEvaluator(scenario, seed)


# ---------------------------------------------------------------------------
# Closed-loop assembly
# ---------------------------------------------------------------------------


def assemble_closed_loop(
    scenario: Scenario, gains: SynthesizedGains, t: float = 0.0
) -> tuple[np.ndarray, np.ndarray]:
    """System matrix M and input matrix Bin of the full closed loop at ``t``.

    For constant gains and a time-invariant scenario the pair fully defines
    the run; otherwise it is the frozen evaluation at one instant.
    """
    sl = state_layout(scenario, gains)
    il = input_layout(scenario)
    M = np.zeros((sl.total, sl.total))
    Bin = np.zeros((sl.total, il.total))

    A = scenario.plant.A(t)
    B = scenario.plant.B(t)
    M[sl.x, sl.x] = A
    Bin[sl.x, il.w] = B

    resilient = gains.is_resilient
    for i in range(1, scenario.N + 1):
        ng = gains.node(i)
        sensor = scenario.sensor(i)
        C = sensor.C(t)
        D = sensor.D(t)
        xi = sl.xhat[i - 1]
        L = _gain_at(ng.L, t)
        diag = A - L @ C
        M[xi, sl.x] += L @ C
        Bin[xi, il.v[i - 1]] += L @ D
        for key in sorted(ng.K):
            K = _gain_at(ng.K[key], t)
            edge = scenario.graph.edge(*key)
            diag = diag - K @ edge.W
            M[xi, sl.xhat[key[0] - 1]] += K @ edge.W
            Bin[xi, il.v_edge[key]] += K @ edge.H
        M[xi, xi] += diag

        nf = scenario.n_f(i)
        if nf and scenario.attack_class is not None:
            F = scenario.attack_class.node(i).F
            Bin[xi, il.f[i - 1]] += F

        if not resilient:
            continue

        ei = sl.ehat[i - 1]
        pi = sl.epshat[i - 1]
        Ups = ng.bias.Upsilon
        # observer compensation -F u with u = Upsilon epshat
        M[xi, pi] += -ng.F @ Ups

        Lhat = _gain_at(ng.Lhat, t)
        Lbar = _gain_at(ng.Lbar, t)
        M[ei, sl.x] += Lbar @ C
        M[ei, xi] += -Lbar @ C
        M[ei, ei] += A - Lhat @ C
        M[ei, pi] += -ng.Fbar @ Ups
        Bin[ei, il.v[i - 1]] += Lbar @ D
        if nf:
            Bin[ei, il.f[i - 1]] += ng.Fbar
        for key in sorted(ng.Khat):
            Khat = _gain_at(ng.Khat[key], t)
            Kbar = _gain_at(ng.Kbar[key], t)
            edge = scenario.graph.edge(*key)
            WK = edge.W
            M[ei, xi] += -Kbar @ WK
            M[ei, sl.xhat[key[0] - 1]] += Kbar @ WK
            M[ei, ei] += -Khat @ WK
            M[ei, sl.ehat[key[0] - 1]] += Khat @ WK
            Bin[ei, il.v_edge[key]] += Kbar @ edge.H
            Bin[ei, il.vc_edge[key]] += Khat @ edge.Hc

        Lcheck = _gain_at(ng.Lcheck, t)
        M[pi, sl.x] += Lcheck @ C
        M[pi, xi] += -Lcheck @ C
        M[pi, ei] += -Lcheck @ C
        M[pi, pi] += ng.bias.Omega - ng.Fcheck @ Ups
        Bin[pi, il.v[i - 1]] += Lcheck @ D
        if nf:
            Bin[pi, il.f[i - 1]] += ng.Fcheck
        for key in sorted(ng.Kcheck):
            Kc = _gain_at(ng.Kcheck[key], t)
            edge = scenario.graph.edge(*key)
            WK = edge.W
            M[pi, xi] += -Kc @ WK
            M[pi, sl.xhat[key[0] - 1]] += Kc @ WK
            M[pi, ei] += -Kc @ WK
            M[pi, sl.ehat[key[0] - 1]] += Kc @ WK
            Bin[pi, il.v_edge[key]] += Kc @ edge.H
            Bin[pi, il.vc_edge[key]] += Kc @ edge.Hc
    return M, Bin


# ---------------------------------------------------------------------------
# Trajectories
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class Trajectory:
    """Decimated simulation record.

    ``xhat`` has shape (k, N, n); defence-layer arrays are per-node tuples
    because attack-channel dimensions may differ between nodes. ``u`` holds
    the compensation signals (zeros for a baseline run), ``f`` the attack
    signals that were actually applied, ``zeta`` each node's innovation
    ``y_i - C_i xhat_i``, and ``inputs`` the full stacked exogenous input
    at the stored samples (``input_layout`` says which columns are which).
    """

    t: np.ndarray
    x: np.ndarray
    xhat: np.ndarray
    ehat: tuple[np.ndarray, ...] | None
    epshat: tuple[np.ndarray, ...] | None
    u: tuple[np.ndarray, ...]
    f: tuple[np.ndarray, ...]
    kind: str
    seed: int
    zeta: tuple[np.ndarray, ...] | None = None
    inputs: np.ndarray | None = None
    input_layout: InputLayout | None = None
    meta: dict = field(default_factory=dict)

    @property
    def e(self) -> np.ndarray:
        """Estimation errors x - xhat_i, shape (k, N, n)."""
        return self.x[:, None, :] - self.xhat


def _precompute_rk4_maps(M: np.ndarray, h: float):
    """Exact affine RK4 step matrices for a constant system matrix."""
    n = M.shape[0]
    I = np.eye(n)
    hM = h * M
    hM2 = hM @ hM
    hM3 = hM2 @ hM
    hM4 = hM3 @ hM
    Phi = I + hM + hM2 / 2.0 + hM3 / 6.0 + hM4 / 24.0
    G1 = (h / 6.0) * (I + hM + hM2 / 2.0 + hM3 / 4.0)
    Gm = (h / 6.0) * (4.0 * I + 2.0 * hM + hM2 / 2.0)
    G4 = (h / 6.0) * I
    return Phi, G1, Gm, G4


def simulate(
    scenario: Scenario,
    gains: SynthesizedGains,
    seed: int = 0,
    store_decimation: int | None = None,
    divergence_limit: float = DIVERGENCE_LIMIT,
    check_hash: bool = True,
) -> Trajectory:
    """Run the closed loop over the scenario's simulation grid.

    The store decimation (every d-th step is recorded, plus t=0) defaults
    to the scenario's. ``check_hash`` verifies the gains were synthesized
    from this scenario's design data. Raises DivergenceError when any state
    magnitude exceeds ``divergence_limit``.
    """
    if check_hash and gains.scenario_hash:
        expect = scenario_synthesis_hash(scenario)
        if gains.scenario_hash != expect:
            raise ScenarioError(
                "gains were synthesized from different design data than this "
                f"scenario (hash {gains.scenario_hash[:12]} != {expect[:12]}); "
                "re-run synthesis or pass gains matching the scenario"
            )
    sim = scenario.simulation
    dec = int(store_decimation if store_decimation is not None else sim.store_decimation)
    dec = max(1, dec)
    h = sim.step
    n_steps = max(1, int(round(sim.t_end / h)))
    h = sim.t_end / n_steps

    sl = state_layout(scenario, gains)
    evaluator = InputEvaluator(scenario, seed)

    state0 = np.zeros(sl.total)
    state0[sl.x] = sim.x0
    for i in range(scenario.N):
        state0[sl.xhat[i]] = sim.xi[i]

    lti_path = scenario.is_lti and gains.is_constant()
    if lti_path:
        M, Bin = assemble_closed_loop(scenario, gains, 0.0)
        rho = float(np.max(np.abs(np.linalg.eigvals(M))))
        if h * rho > RK4_STABILITY_MARGIN:
            warnings.warn(
                f"integration step {h:g} is too large for the closed-loop "
                f"spectrum (radius {rho:.3g}); reduce the step below "
                f"{RK4_STABILITY_MARGIN / rho:.3g} to keep RK4 stable",
                RuntimeWarning,
                stacklevel=2,
            )
        t_store, states = _run_lti(
            M, Bin, evaluator, state0, h, n_steps, dec, divergence_limit
        )
    else:
        t_store, states = _run_generic(
            scenario, gains, evaluator, state0, h, n_steps, dec, divergence_limit
        )

    x = states[:, sl.x]
    xhat = np.stack([states[:, s] for s in sl.xhat], axis=1)
    ehat = epshat = None
    u: list[np.ndarray] = []
    if gains.is_resilient:
        ehat = tuple(states[:, s] for s in sl.ehat)
        epshat = tuple(states[:, s] for s in sl.epshat)
        for i, ng in enumerate(gains.nodes):
            u.append(epshat[i] @ ng.bias.Upsilon.T)
    else:
        for i in range(1, scenario.N + 1):
            u.append(np.zeros((len(t_store), scenario.n_f(i))))

    il = evaluator.layout
    inp = evaluator(t_store)
    f = tuple(inp[:, il.f[i]] for i in range(scenario.N))

    zeta = []
    for i in range(1, scenario.N + 1):
        sensor = scenario.sensor(i)
        ei = x - xhat[:, i - 1, :]
        vi = inp[:, il.v[i - 1]]
        if scenario.is_lti:
            zeta.append(ei @ sensor.C(0.0).T + vi @ sensor.D(0.0).T)
        else:
            zeta.append(
                np.stack(
                    [
                        sensor.C(tk) @ ei[k] + sensor.D(tk) @ vi[k]
                        for k, tk in enumerate(t_store)
                    ]
                )
            )

    return Trajectory(
        t=t_store,
        x=x,
        xhat=xhat,
        ehat=ehat,
        epshat=epshat,
        u=tuple(u),
        f=f,
        kind=gains.kind,
        seed=int(seed),
        zeta=tuple(zeta),
        inputs=inp,
        input_layout=il,
        meta={
            "step": h,
            "t_end": sim.t_end,
            "store_decimation": dec,
            "scenario_hash": gains.scenario_hash,
            "label": gains.label,
            "gamma2": gains.gamma2,
            "bar_gamma2": gains.bar_gamma2,
        },
    )


def _check_magnitude(state: np.ndarray, t: float, limit: float) -> None:
    m = float(np.max(np.abs(state)))
    if not np.isfinite(m) or m > limit:
        raise DivergenceError(
            f"simulation diverged at t={t:.6g} (state magnitude {m:.3g}); "
            "check gain feasibility or reduce the integration step"
        )


def _run_lti(
    M: np.ndarray,
    Bin: np.ndarray,
    evaluator: InputEvaluator,
    state0: np.ndarray,
    h: float,
    n_steps: int,
    dec: int,
    limit: float,
):
    Phi, G1, Gm, G4 = _precompute_rk4_maps(M, h)
    G1B = G1 @ Bin
    GmB = Gm @ Bin
    G4B = G4 @ Bin
    Phi_dec = np.linalg.matrix_power(Phi, dec)

    # chunks aligned with the store decimation
    steps_per_chunk = dec * max(1, 4096 // dec)
    n_store = n_steps // dec + 1
    stored = np.empty((n_store, state0.size))
    t_store = np.empty(n_store)
    stored[0] = state0
    t_store[0] = 0.0

    state = state0.copy()
    k = 0  # global step index
    w = 1  # next store row
    while k < n_steps:
        c = min(steps_per_chunk, n_steps - k)
        t0 = k * h
        t1 = (k + c) * h
        if evaluator.is_zero_on(t0, t1, margin=h):
            # whole chunk input-free: advance store-point by store-point
            full, rem = divmod(c, dec)
            for _ in range(full):
                state = Phi_dec @ state
                k += dec
                stored[w] = state
                t_store[w] = k * h
                w += 1
            for _ in range(rem):
                state = Phi @ state
                k += 1
                if k % dec == 0:
                    stored[w] = state
                    t_store[w] = k * h
                    w += 1
            _check_magnitude(state, k * h, limit)
            continue
        ts = t0 + h * np.arange(c + 1)
        grid_vals = evaluator(ts)
        mid_vals = evaluator(ts[:-1] + 0.5 * h)
        U = grid_vals[:-1] @ G1B.T + mid_vals @ GmB.T + grid_vals[1:] @ G4B.T
        for j in range(c):
            state = Phi @ state + U[j]
            k += 1
            if k % dec == 0:
                stored[w] = state
                t_store[w] = k * h
                w += 1
        _check_magnitude(state, k * h, limit)
    if w != n_store:  # pragma: no cover - guard against index arithmetic slips
        raise RuntimeError("internal error: stored-sample bookkeeping mismatch")
    _check_magnitude(stored[-1], t_store[-1], limit)
    return t_store, stored


def _run_generic(
    scenario: Scenario,
    gains: SynthesizedGains,
    evaluator: InputEvaluator,
    state0: np.ndarray,
    h: float,
    n_steps: int,
    dec: int,
    limit: float,
):
    def f(t, s):
        M, Bin = assemble_closed_loop(scenario, gains, t)
        return M @ s + Bin @ evaluator(np.array([t]))[0]

    n_store = n_steps // dec + 1
    stored = np.empty((n_store, state0.size))
    t_store = np.empty(n_store)
    stored[0] = state0
    t_store[0] = 0.0
    state = state0.copy()
    w = 1
    for k in range(n_steps):
        t = k * h
        state = rk4_step(f, t, state, h)
        _check_magnitude(state, t + h, limit)
        if (k + 1) % dec == 0:
            stored[w] = state
            t_store[w] = (k + 1) * h
            w += 1
    return t_store, stored


# ---------------------------------------------------------------------------
# CSV output
# ---------------------------------------------------------------------------


def _layout_comment(traj: Trajectory) -> str:
    """One-line description of the joint simulation state behind the run."""
    N = traj.xhat.shape[1]
    n = traj.xhat.shape[2]
    parts = [f"x({n})", f"xhat({N}x{n})"]
    total = n + N * n
    if traj.ehat is not None:
        parts.append(f"ehat({N}x{n})")
        total += N * n
        dims = ",".join(str(p.shape[1]) for p in traj.epshat)
        total += sum(p.shape[1] for p in traj.epshat)
        parts.append(f"epshat({dims})")
    return (
        f"# {traj.kind} run, seed {traj.seed}; joint simulation state "
        f"[{' | '.join(parts)}] = {total} states"
    )


def write_trajectory_csv(traj: Trajectory, path) -> None:
    """Write the trajectory as CSV, quantity-major.

    The first line is a ``#`` comment describing the joint simulation
    state; the second names the columns: t; plant state ``x[0..n)``; each
    node's estimate ``xhat{i}[0..n)``; each node's error ``e{i}[0..n)``;
    each node's compensation ``u{i}[0..n_f)``; each node's attack
    ``f{i}[0..n_f)``. Floats are written with ``repr`` so files
    round-trip exactly and are byte-identical across runs with the same
    seed.
    """
    N = traj.xhat.shape[1]
    n = traj.xhat.shape[2]
    header = ["t"]
    header += [f"x[{k}]" for k in range(n)]
    for i in range(1, N + 1):
        header += [f"xhat{i}[{k}]" for k in range(n)]
    for i in range(1, N + 1):
        header += [f"e{i}[{k}]" for k in range(n)]
    for i in range(1, N + 1):
        header += [f"u{i}[{k}]" for k in range(traj.u[i - 1].shape[1])]
    for i in range(1, N + 1):
        header += [f"f{i}[{k}]" for k in range(traj.f[i - 1].shape[1])]

    e = traj.e
    blocks = [traj.t[:, None], traj.x]
    blocks += [traj.xhat[:, i, :] for i in range(N)]
    blocks += [e[:, i, :] for i in range(N)]
    blocks += list(traj.u)
    blocks += list(traj.f)
    data = np.hstack(blocks)

    with open(path, "w") as fh:
        fh.write(_layout_comment(traj) + "\n")
        fh.write(",".join(header) + "\n")
        for row in data:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
