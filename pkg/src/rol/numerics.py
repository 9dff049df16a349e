"""Shared numerical kernels: classical fixed-step RK4 integration, matrix
Riccati differential equations (batched over nodes), and the stabilizing
solution of filter-type algebraic Riccati equations via a Hamiltonian Schur
decomposition.

The Riccati equations handled here have the filter orientation

    dY/dt = A Y + Y A' + Q - Y S Y,      Y(t0) = Y0,

with ``Q`` positive semidefinite and ``S`` symmetric but possibly
indefinite (attenuation terms subtract from it). For indefinite ``S`` the
solution can escape to infinity in finite time; boundedness of the
trajectory is exactly the feasibility information the synthesis layer
needs, so the integrator reports escapes instead of raising.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg

from .errors import DivergenceError

__all__ = [
    "rk4_step",
    "integrate_ode",
    "dre_rhs",
    "DreResult",
    "integrate_dre",
    "solve_filter_are",
    "sym_eig_bounds",
    "spectral_abscissa",
    "is_hurwitz",
    "symmetrize",
    "pbh_stabilizable",
]


def rk4_step(f: Callable, t: float, y: np.ndarray, h: float) -> np.ndarray:
    """One classical Runge-Kutta step of size ``h`` for ``dy/dt = f(t, y)``."""
    k1 = f(t, y)
    k2 = f(t + 0.5 * h, y + (0.5 * h) * k1)
    k3 = f(t + 0.5 * h, y + (0.5 * h) * k2)
    k4 = f(t + h, y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate_ode(
    f: Callable,
    y0: np.ndarray,
    t0: float,
    t1: float,
    h: float,
    observer: Callable | None = None,
    divergence_limit: float = 1e12,
) -> tuple[float, np.ndarray]:
    """Integrate ``dy/dt = f(t, y)`` from ``t0`` to ``t1`` with fixed-step RK4.

    The step is adjusted to the nearest value that lands exactly on ``t1``.
    ``observer(k, t, y)`` is called after every step. Raises
    ``DivergenceError`` if the state norm exceeds ``divergence_limit`` or
    becomes non-finite.
    """
    if t1 <= t0:
        return t0, np.array(y0, dtype=float)
    n_steps = max(1, int(round((t1 - t0) / h)))
    h_eff = (t1 - t0) / n_steps
    y = np.array(y0, dtype=float)
    t = t0
    for k in range(n_steps):
        y = rk4_step(f, t, y, h_eff)
        t = t0 + (k + 1) * h_eff
        norm = float(np.max(np.abs(y))) if y.size else 0.0
        if not np.isfinite(norm) or norm > divergence_limit:
            raise DivergenceError(
                f"integration diverged at t={t:.6g} (magnitude {norm:.3g})"
            )
        if observer is not None:
            observer(k, t, y)
    return t, y


# ---------------------------------------------------------------------------
# Riccati differential equation
# ---------------------------------------------------------------------------


def symmetrize(Y: np.ndarray) -> np.ndarray:
    """(Y + Y') / 2 on the trailing two axes."""
    return 0.5 * (Y + np.swapaxes(Y, -1, -2))


def dre_rhs(Y: np.ndarray, A: np.ndarray, Q: np.ndarray, S: np.ndarray) -> np.ndarray:
    """Right-hand side A Y + Y A' + Q - Y S Y, broadcasting over leading axes."""
    AY = A @ Y
    return AY + np.swapaxes(AY, -1, -2) + Q - Y @ S @ Y


@dataclass(frozen=True)
class DreResult:
    """Outcome of a Riccati differential-equation integration.

    ``bounded`` is True only if the whole trajectory stayed finite, never
    exceeded the spectral-norm cap, and remained positive definite.  When
    the trajectory escapes (non-finite entries or spectral norm above the
    cap) ``t_escape`` records the first bad step time; escapes are reported
    through the flag, never raised, because an escaping solution is exactly
    the "no admissible design at this attenuation level" signal the
    synthesis layer probes for.  ``bound_estimate`` is the largest spectral
    norm seen over the step grid and ``min_eig`` the smallest eigenvalue
    seen (both over every step, not just stored samples).
    """

    Y: np.ndarray
    bounded: bool
    t_escape: float | None
    bound_estimate: float
    min_eig: float
    times: np.ndarray | None = None
    trajectory: np.ndarray | None = None


def integrate_dre(
    A_of_t: Callable[[float], np.ndarray],
    Q_of_t: Callable[[float], np.ndarray],
    S_of_t: Callable[[float], np.ndarray],
    Y0: np.ndarray,
    t0: float,
    t1: float,
    h: float,
    bound: float = 1e8,
    store_every: int = 0,
) -> DreResult:
    """Integrate the matrix Riccati ODE with RK4, symmetrizing every step.

    ``Y0`` may carry leading batch axes (e.g. one Riccati equation per
    node); the coefficient functions must broadcast against it. With
    ``store_every = d > 0`` the trajectory is recorded at ``t0`` and then
    after every ``d``-th step (the final state is always included).
    Spectral norm and extreme eigenvalues are tracked at every step; the
    batch axes are reduced with max/min so one escape fails the batch.
    """
    n_steps = max(1, int(round((t1 - t0) / h)))
    h_eff = (t1 - t0) / n_steps
    Y = symmetrize(np.array(Y0, dtype=float))

    def f(t, Yc):
        return dre_rhs(Yc, A_of_t(t), Q_of_t(t), S_of_t(t))

    def eig_range(Yc: np.ndarray) -> tuple[float, float]:
        w = np.linalg.eigvalsh(Yc)
        return float(np.min(w)), float(np.max(np.abs(w)))

    times: list[float] = []
    traj: list[np.ndarray] = []
    if store_every > 0:
        times.append(t0)
        traj.append(Y.copy())

    min_eig, bound_estimate = eig_range(Y)
    t = t0
    for k in range(n_steps):
        Y = symmetrize(rk4_step(f, t, Y, h_eff))
        t = t0 + (k + 1) * h_eff
        if not np.all(np.isfinite(Y)):
            return DreResult(
                Y=Y,
                bounded=False,
                t_escape=t,
                bound_estimate=np.inf,
                min_eig=min_eig,
                times=np.array(times) if store_every > 0 else None,
                trajectory=np.array(traj) if store_every > 0 else None,
            )
        lo, hi = eig_range(Y)
        min_eig = min(min_eig, lo)
        bound_estimate = max(bound_estimate, hi)
        if hi > bound:
            return DreResult(
                Y=Y,
                bounded=False,
                t_escape=t,
                bound_estimate=bound_estimate,
                min_eig=min_eig,
                times=np.array(times) if store_every > 0 else None,
                trajectory=np.array(traj) if store_every > 0 else None,
            )
        if store_every > 0 and ((k + 1) % store_every == 0 or k == n_steps - 1):
            times.append(t)
            traj.append(Y.copy())

    return DreResult(
        Y=Y,
        bounded=min_eig > 0.0,
        t_escape=None,
        bound_estimate=bound_estimate,
        min_eig=min_eig,
        times=np.array(times) if store_every > 0 else None,
        trajectory=np.array(traj) if store_every > 0 else None,
    )


# ---------------------------------------------------------------------------
# Algebraic Riccati equation
# ---------------------------------------------------------------------------


def solve_filter_are(
    A: np.ndarray,
    Q: np.ndarray,
    S: np.ndarray,
    imag_axis_tol: float = 1e-9,
    residual_rtol: float = 1e-8,
) -> np.ndarray | None:
    """Stabilizing solution of  A Y + Y A' + Q - Y S Y = 0, or None.

    The solution is extracted from the stable invariant subspace of the
    Hamiltonian matrix  [[A', -S], [-Q, -A]]  via an ordered real Schur
    decomposition. Returns ``None`` (meaning: no admissible design at these
    parameters, not a numerical failure) when

    * the Hamiltonian has an eigenvalue within ``imag_axis_tol`` of the
      imaginary axis (no stable/antistable splitting),
    * the subspace basis is too ill-conditioned to invert,
    * the Riccati residual exceeds ``residual_rtol * (1 + ||Y||_F^2)``, or
    * the candidate is not positive semidefinite (up to roundoff).

    When a matrix is returned it is exactly symmetric and ``A - Y S`` is
    Hurwitz.
    """
    m = A.shape[0]
    Z = np.block([[A.T, -S], [-Q, -A]])

    eigs = np.linalg.eigvals(Z)
    scale = 1.0 + float(np.max(np.abs(eigs)))
    if float(np.min(np.abs(eigs.real))) < imag_axis_tol * scale:
        return None

    try:
        _, U, sdim = scipy.linalg.schur(Z, output="real", sort="lhp")
    except np.linalg.LinAlgError:  # pragma: no cover - scipy failure path
        return None
    if sdim != m:
        return None

    U1 = U[:m, :m]
    U2 = U[m:, :m]
    if np.linalg.cond(U1) > 1e13:
        return None
    # Y U1 = U2  =>  U1' Y' = U2'
    Y = np.linalg.solve(U1.T, U2.T).T
    Y = 0.5 * (Y + Y.T)

    norm2 = float(np.linalg.norm(Y)) ** 2
    residual = float(np.linalg.norm(A @ Y + Y @ A.T + Q - Y @ S @ Y))
    if residual > residual_rtol * (1.0 + norm2):
        return None

    min_eig = float(np.linalg.eigvalsh(Y)[0])
    if min_eig < -1e-8 * (1.0 + float(np.linalg.norm(Y))):
        return None

    return Y


# ---------------------------------------------------------------------------
# Spectra
# ---------------------------------------------------------------------------


def sym_eig_bounds(M: np.ndarray, asym_rtol: float = 1e-8) -> tuple[float, float]:
    """(smallest, largest) eigenvalue of the symmetric matrix ``M``.

    Raises ``ValueError`` when ``M`` is not symmetric to within
    ``asym_rtol`` relative to its norm.  Definiteness conclusions drawn
    from eigenvalues of a silently-symmetrized matrix would be wrong for
    the original, so an asymmetric argument is treated as a caller bug,
    not something to paper over.
    """
    M = np.asarray(M, dtype=float)
    residual = float(np.linalg.norm(M - M.T))
    scale = max(1.0, float(np.linalg.norm(M)))
    if residual > asym_rtol * scale:
        raise ValueError(
            f"matrix is not symmetric (asymmetry {residual:.3g} vs "
            f"tolerance {asym_rtol * scale:.3g}); symmetrize explicitly first"
        )
    w = np.linalg.eigvalsh(0.5 * (M + M.T))
    return float(w[0]), float(w[-1])


def spectral_abscissa(M: np.ndarray) -> float:
    """Largest real part over the eigenvalues of ``M``."""
    return float(np.max(np.linalg.eigvals(M).real))


def is_hurwitz(M: np.ndarray, tol: float = 0.0) -> bool:
    return spectral_abscissa(M) < -tol


def pbh_stabilizable(A: np.ndarray, B: np.ndarray, tol: float = 1e-8) -> bool:
    """Eigenvector (PBH) test: is the pair ``(A, B)`` stabilizable?

    Checks that ``[lam I - A, B]`` has full row rank at every eigenvalue
    ``lam`` of ``A`` with non-negative real part.  Rank is judged by the
    smallest singular value relative to the problem scale.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    n = A.shape[0]
    scale = max(1.0, float(np.linalg.norm(A)), float(np.linalg.norm(B)))
    for lam in np.linalg.eigvals(A):
        if lam.real < -1e-12 * scale:
            continue
        pencil = np.hstack([lam * np.eye(n) - A, B.astype(complex)])
        smin = float(np.linalg.svd(pencil, compute_uv=False)[-1])
        if smin < tol * scale:
            return False
    return True
