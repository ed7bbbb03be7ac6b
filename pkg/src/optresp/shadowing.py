"""Bounded covector paths: solve ``omega_k = df_k^T omega_{k+1} + nu_k``.

The pullback leaves two covector subspaces invariant: the annihilator of
the unstable bundle (where it contracts going backward in time) and the
annihilator of the stable bundle (where it expands going backward, hence
contracts going forward when inverted).  Solving each component with the
recursion running in its stable direction, from a zero start at the far
end, picks out the unique bounded solution; the artificial starts only
contaminate an exponentially short stretch near each end, which the end
buffer discards.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SolverFailureError, TangencyError
from .frames import FrameBundle, Orbit

RESIDUAL_LIMIT = 1e-6


def default_end_buffer(frame_warmup: int, W: int) -> int:
    """Steps dropped at each orbit end before any downstream average."""
    return max(frame_warmup, 2 * W + 10)


def oblique_split(w: np.ndarray, e_k: np.ndarray,
                  eps_k: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Split a covector into coframe coordinates plus an annihilator part.

    Returns ``(a, w_s)`` with ``w = eps_k a + w_s`` and ``e_k^T w_s = 0``.
    """
    a = e_k.T @ w
    w_s = w - eps_k @ a
    return a, w_s


@dataclass
class CovectorPath:
    """A covector per orbit step, with its residual certificate."""

    omega: np.ndarray   # (T, M)
    source: str
    buffer: int         # steps untrusted at each end
    sup_norm: float     # max |omega| over the trusted interior
    max_residual: float

    @property
    def T(self) -> int:
        return self.omega.shape[0]


def adjoint_shadowing_solve(orbit: Orbit, frames: FrameBundle, nu: np.ndarray,
                            source: str = "nu", end_buffer: int | None = None,
                            check: bool = True) -> CovectorPath:
    """Two-sweep solve for the bounded covector path driven by ``nu``.

    ``nu`` must hold one covector per step; the final row is ignored (no
    relation constrains it).  Sweep one runs backward for the component in
    the annihilator of the unstable bundle; sweep two runs forward for the
    coframe coordinates, inverting the transition matrices
    ``theta_k = e_k^T df_k^T eps_{k+1} = r_{k+1}^T``.
    """
    T = orbit.T
    e, eps, r = frames.e, frames.eps, frames.r
    u = frames.u
    jac = orbit.jacobians
    if nu.shape != (T, orbit.model.dim):
        raise ValueError("nu must hold one covector per orbit step")
    if end_buffer is None:
        end_buffer = frames.frame_warmup

    # backward sweep: annihilator-of-V^u component
    ws = np.empty_like(nu)
    ws[T - 1] = 0.0
    for k in range(T - 2, -1, -1):
        v = jac[k].T @ ws[k + 1] + nu[k]
        ws[k] = v - eps[k] @ (e[k].T @ v)

    # forward sweep: coframe coordinates
    a = np.zeros((T, u))
    for k in range(T - 1):
        rhs = a[k] - e[k].T @ nu[k]
        try:
            a[k + 1] = np.linalg.solve(r[k + 1].T, rhs)
        except np.linalg.LinAlgError:
            raise TangencyError(f"singular frame transition at step {k}") from None

    omega = ws + np.einsum("tmu,tu->tm", eps, a)

    lo, hi = end_buffer, T - end_buffer
    res = omega[:-1] - np.einsum("tpq,tp->tq", jac[:-1], omega[1:]) - nu[:-1]
    interior_res = np.abs(res[lo:hi - 1])
    max_residual = float(interior_res.max()) if interior_res.size else 0.0
    sup_norm = float(np.abs(omega[lo:hi]).max()) if hi > lo else 0.0
    if check and max_residual > RESIDUAL_LIMIT:
        worst = lo + int(np.argmax(interior_res.max(axis=1)))
        raise SolverFailureError(
            f"covector residual {max_residual:.3e} exceeds {RESIDUAL_LIMIT:.0e} "
            f"at step {worst} (source {source})")
    return CovectorPath(omega=omega, source=source, buffer=end_buffer,
                        sup_norm=sup_norm, max_residual=max_residual)
