"""Admissible-attack machinery: analysis of the scalar shaping filter
G(s) = N(s)/D(s), state-space realizations of the bias model used by the
defence layer, and deterministic evaluation of attack / disturbance
waveforms.

An attack signal is admissible when it splits into a piecewise-constant
bias plus a finite-energy masking part. Whether the defence layer can
absorb such signals is a property of the shaping filter alone: the
estimation residual of the bias channel has transfer

    T(s) = -s D(s) / (s D(s) + N(s)),

so the class is admissible exactly when the polynomial ``s D(s) + N(s)``
is Hurwitz. Two certificates quantify the residual:

* ``g1`` - energy of the residual caused by a unit bias step,
  ``(1/pi) * int_0^inf |D(jw)|^2 / |p(jw)|^2 dw``  with ``p = s D + N``;
* ``g2`` - squared peak gain ``sup_w |jw D(jw) / p(jw)|^2``, which bounds
  the residual energy caused by any finite-energy masking signal.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.integrate
import scipy.optimize

from .errors import ScenarioError
from .model import AttackSignalSpec, DisturbanceSpec, SignalTerm

__all__ = [
    "AdmissibilityReport",
    "BiasModel",
    "check_admissibility",
    "realize_bias_model",
    "residual_filter",
    "term_values",
    "attack_signal",
    "disturbance_signal",
]


def _poly_trim(c: np.ndarray) -> np.ndarray:
    """Drop leading (highest-degree) zero coefficients."""
    c = np.atleast_1d(np.asarray(c, dtype=float))
    nz = np.nonzero(c)[0]
    if nz.size == 0:
        return np.zeros(1)
    return c[nz[0] :]


def _loop_polynomial(num: Sequence[float], den: Sequence[float]) -> np.ndarray:
    """p(s) = s*D(s) + N(s), coefficients highest degree first."""
    D = _poly_trim(den)
    N = _poly_trim(num)
    sD = np.concatenate([D, [0.0]])
    p = sD.copy()
    p[len(p) - len(N) :] += N
    return p


@dataclass(frozen=True)
class AdmissibilityReport:
    """Result of analysing one shaping filter.

    ``poles`` are the roots of ``s D(s) + N(s)``; admissibility requires all
    of them strictly inside the open left half-plane. ``g1``/``g2`` are the
    residual-energy certificates (NaN when inadmissible). ``messages``
    explains failures in plain language.
    """

    admissible: bool
    poles: np.ndarray
    g1: float
    g2: float
    g2_frequency: float
    messages: tuple[str, ...]


def check_admissibility(
    num: Sequence[float], den: Sequence[float], margin: float = 1e-9
) -> AdmissibilityReport:
    """Analyse the shaping filter G = num/den (coefficients highest first)."""
    messages: list[str] = []
    N = _poly_trim(num)
    D = _poly_trim(den)
    if np.all(N == 0.0):
        return AdmissibilityReport(
            False, np.zeros(0), np.nan, np.nan, np.nan, ("numerator is identically zero",)
        )
    if len(N) > len(D):
        messages.append("shaping filter is improper (deg num > deg den)")
    p = _loop_polynomial(N, D)
    poles = np.roots(p)
    scale = 1.0 + float(np.max(np.abs(poles))) if poles.size else 1.0
    if poles.size and float(np.max(poles.real)) >= -margin * scale:
        messages.append(
            "bias-loop polynomial s*D(s) + N(s) is not Hurwitz "
            f"(max pole real part {float(np.max(poles.real)):.3g})"
        )
    if messages:
        return AdmissibilityReport(False, poles, np.nan, np.nan, np.nan, tuple(messages))

    g1 = _g1_step_energy(D, p)
    g2, w_star = _g2_peak_gain(D, p)
    return AdmissibilityReport(True, poles, g1, g2, w_star, ())


def _g1_step_energy(D: np.ndarray, p: np.ndarray) -> float:
    """(1/pi) * int_0^inf |D(jw)|^2 / |p(jw)|^2 dw for Hurwitz p."""

    def integrand(w):
        jw = 1j * w
        return float(np.abs(np.polyval(D, jw)) ** 2 / np.abs(np.polyval(p, jw)) ** 2)

    # Split at the pole magnitudes so the quadrature sees the resonances.
    breaks = sorted({float(np.abs(r)) for r in np.roots(p)} | {1.0})
    total = 0.0
    lo = 0.0
    for b in breaks:
        part, _ = scipy.integrate.quad(integrand, lo, b, limit=200)
        total += part
        lo = b
    tail, _ = scipy.integrate.quad(integrand, lo, np.inf, limit=200)
    return (total + tail) / np.pi


def _g2_peak_gain(D: np.ndarray, p: np.ndarray) -> tuple[float, float]:
    """sup_w |jw D(jw)/p(jw)|^2 and the maximizing frequency.

    The gain tends to ``(lead(D)/lead(p))^2`` as w -> inf; a log-spaced
    sweep locates interior peaks and a bounded scalar minimization polishes
    the best one.
    """

    def ratio(logw):
        w = np.exp(logw)
        jw = 1j * w
        return -float(
            (w * np.abs(np.polyval(D, jw))) ** 2 / np.abs(np.polyval(p, jw)) ** 2
        )

    grid = np.log(np.logspace(-4.0, 6.0, 1201))
    vals = np.array([ratio(lw) for lw in grid])
    k = int(np.argmin(vals))
    lo = grid[max(0, k - 1)]
    hi = grid[min(len(grid) - 1, k + 1)]
    res = scipy.optimize.minimize_scalar(ratio, bounds=(lo, hi), method="bounded")
    best = min(float(res.fun), float(vals[k]))
    w_best = float(np.exp(res.x)) if res.fun <= vals[k] else float(np.exp(grid[k]))
    limit = float(D[0] / p[0]) ** 2
    if limit >= -best:
        return limit, np.inf
    return -best, w_best


# ---------------------------------------------------------------------------
# Realizations
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class BiasModel:
    """State-space bias model of the defence layer.

    ``d eps / dt = Omega eps + Gamma u_drive``, ``u = Upsilon eps`` realizes
    the transfer ``-N(s) / (s D(s))`` on every attack channel (channels are
    independent copies, stacked block-diagonally).
    """

    Omega: np.ndarray  # (n_eps, n_eps)
    Gamma: np.ndarray  # (n_eps, n_f)
    Upsilon: np.ndarray  # (n_f, n_eps)

    @property
    def n_eps(self) -> int:
        return self.Omega.shape[0]

    @property
    def n_f(self) -> int:
        return self.Gamma.shape[1]


def _cancel_common_roots(
    num: np.ndarray, den: np.ndarray, tol: float = 1e-8
) -> tuple[np.ndarray, np.ndarray]:
    """Remove root pairs shared by num and den (within ``tol``, relative)."""
    rn = list(np.roots(num)) if len(num) > 1 else []
    rd = list(np.roots(den)) if len(den) > 1 else []
    keep_n = rn[:]
    keep_d = rd[:]
    for r in rn:
        for q in keep_d:
            if abs(r - q) <= tol * (1.0 + abs(r)):
                keep_n.remove(r)
                keep_d.remove(q)
                break
    if len(keep_n) == len(rn):
        return num, den
    new_num = np.real(np.poly(keep_n)) * num[0] if keep_n else np.array([num[0]])
    new_den = np.real(np.poly(keep_d)) * den[0] if keep_d else np.array([den[0]])
    return new_num, new_den


def _companion_siso(num: np.ndarray, den: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Controllable-companion realization of the strictly proper num/den."""
    den = den / den[0]
    num = num / 1.0  # caller already folded the leading-coefficient scaling
    r = len(den) - 1
    if len(num) > r:
        raise ScenarioError("bias-model transfer must be strictly proper")
    A = np.zeros((r, r))
    A[:-1, 1:] = np.eye(r - 1)
    A[-1, :] = -den[1:][::-1]
    B = np.zeros((r, 1))
    B[-1, 0] = 1.0
    C = np.zeros((1, r))
    c_asc = num[::-1]  # ascending powers
    C[0, : len(c_asc)] = c_asc
    return A, B, C


def realize_bias_model(
    num: Sequence[float], den: Sequence[float], n_f: int = 1, tol: float = 1e-8
) -> BiasModel:
    """Realize the bias model for one node's shaping filter.

    Builds the controllable-companion form of ``-N(s) / (s D(s))`` (after
    cancelling root pairs shared to within ``tol``), replicates it on each
    of the ``n_f`` attack channels, and verifies the result by a
    pole-placement (PBH) rank check and a frequency-response comparison.
    Raises ScenarioError when the class is inadmissible or the realization
    cannot be certified.
    """
    report = check_admissibility(num, den)
    if not report.admissible:
        raise ScenarioError(
            "attack class is inadmissible: " + "; ".join(report.messages)
        )
    N = _poly_trim(num)
    D = _poly_trim(den)
    sD = np.concatenate([D, [0.0]])
    Nc, sDc = _cancel_common_roots(-N, sD, tol=tol)
    lead = sDc[0]
    Nc = Nc / lead
    sDc = sDc / lead
    Om, Ga, Up = _companion_siso(Nc, sDc)

    # PBH controllability: [lambda I - Omega, Gamma] full rank at each mode.
    for lam in np.linalg.eigvals(Om):
        M = np.hstack([lam * np.eye(Om.shape[0]) - Om, Ga])
        if np.linalg.matrix_rank(M, tol=1e-10 * (1.0 + abs(lam))) < Om.shape[0]:
            raise ScenarioError(
                f"bias-model realization lost controllability at mode {lam:.4g}"
            )

    # Frequency-response certificate against -N/(s D), away from poles.
    pole_mags = np.abs(np.linalg.eigvals(Om))
    for w in (0.37, 2.3, 17.0, 230.0):
        if pole_mags.size and np.min(np.abs(pole_mags - w)) < 1e-3:
            continue
        jw = 1j * w
        denom = jw * np.polyval(D, jw)
        if abs(denom) < 1e-9:
            continue
        want = -np.polyval(N, jw) / denom
        got = (Up @ np.linalg.solve(jw * np.eye(Om.shape[0]) - Om, Ga))[0, 0]
        if abs(got - want) > 1e-6 * (1.0 + abs(want)):
            raise ScenarioError(
                f"bias-model realization mismatch at frequency {w:g}: "
                f"{got:.6g} vs {want:.6g}"
            )

    if n_f == 1:
        return BiasModel(Om, Ga, Up)
    I = np.eye(n_f)
    return BiasModel(np.kron(I, Om), np.kron(I, Ga), np.kron(I, Up))


def residual_filter(
    num: Sequence[float], den: Sequence[float], n_f: int = 1
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Realize the bias-estimate transfer ``N(s) / (s D(s) + N(s))``.

    Returns (Af, Bf, Cf) with ``dx/dt = Af x + Bf f`` and estimate
    ``f_hat = Cf x``; the residual is ``f_hat - f``. Used to measure the
    residual energy a recorded attack signal actually produced.
    """
    N = _poly_trim(num)
    p = _loop_polynomial(N, den)
    lead = p[0]
    A, B, C = _companion_siso(N / lead, p / lead)
    if n_f == 1:
        return A, B, C
    I = np.eye(n_f)
    return np.kron(I, A), np.kron(I, B), np.kron(I, C)


# ---------------------------------------------------------------------------
# Waveforms
# ---------------------------------------------------------------------------


def term_values(term: SignalTerm, t: np.ndarray, seed: int) -> np.ndarray:
    """Evaluate one scalar signal term on time array ``t`` (vectorized).

    Burst terms draw their sinusoid mixture from a generator seeded with
    ``(seed, salt)``, so realizations are reproducible bit-for-bit for a
    given run seed.
    """
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    if term.kind == "decaying_sin":
        tau = t - term.start
        active = tau >= 0.0
        ta = tau[active]
        out[active] = term.a * np.exp(-term.b * ta) * np.sin(term.omega * ta + term.phi)
        return out
    if term.kind == "burst":
        end = term.end if term.end is not None else term.start
        dur = end - term.start
        if dur <= 0.0:
            return out
        rng = np.random.default_rng(
            [int(seed) & 0xFFFFFFFF, int(term.salt) & 0xFFFFFFFF, 0x5EED]
        )
        k = max(1, int(term.components))
        freqs = rng.uniform(0.5, 30.0, size=k)
        phases = rng.uniform(0.0, 2.0 * np.pi, size=k)
        amps = rng.normal(0.0, 1.0, size=k)
        rms = float(np.sqrt(np.sum(amps**2) / 2.0))
        amps = amps * (term.amplitude / max(rms, 1e-12))
        tau = (t - term.start) / dur
        active = (tau >= 0.0) & (tau <= 1.0)
        ta = t[active]
        env = np.sin(np.pi * tau[active]) ** 2
        acc = np.zeros_like(ta)
        for a, w, ph in zip(amps, freqs, phases):
            acc += a * np.sin(w * ta + ph)
        out[active] = env * acc
        return out
    raise ValueError(f"unknown signal term kind {term.kind!r}")


def attack_signal(
    spec: AttackSignalSpec, n_f: int, seed: int
) -> Callable[[np.ndarray], np.ndarray]:
    """Evaluator for one node's attack: (k,) times -> (k, n_f) values.

    Bias segments add per-channel constants on [start, end); masking terms
    are scalar waveforms applied to every attack channel.
    """

    def evaluate(t: np.ndarray) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.zeros((t.size, n_f))
        for seg in spec.bias:
            m = (t >= seg.start) & (t < seg.end)
            out[m] += seg.value
        if spec.masking:
            total = np.zeros(t.size)
            for term in spec.masking:
                total += term_values(term, t, seed)
            out += total[:, None]
        return out

    return evaluate


def disturbance_signal(
    spec: DisturbanceSpec, dim: int, seed: int
) -> Callable[[np.ndarray], np.ndarray]:
    """Evaluator for one disturbance: (k,) times -> (k, dim) values."""

    def evaluate(t: np.ndarray) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        vals = term_values(spec.term, t, seed)
        out = np.zeros((t.size, dim))
        if spec.component is None:
            out[:] = vals[:, None]
        else:
            out[:, spec.component] = vals
        return out

    return evaluate
