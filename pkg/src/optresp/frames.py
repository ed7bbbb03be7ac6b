"""Orbit sampling and the oblique unstable frame / adjoint coframe pair.

The unstable frame ``e`` is grown by pushing a random orthonormal start
forward with one QR renormalization per step; the adjoint coframe ``eps``
is grown by pulling a second random start backward with the transposed
Jacobians (the annihilator of the stable bundle expands under backward
adjoint iteration) and is then rescaled step by step so that
``eps_k^T e_k = I``.  Both passes need a transient; only steps inside
``[frame_warmup, T - frame_warmup)`` should enter averages.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .dynamics import MapModel
from .errors import ConfigurationError, DegenerateFrameError, DivergedOrbitError, TangencyError

_RANK_TOL = 1e-13
_COND_LIMIT = 1e12


@dataclass
class Orbit:
    """A warmed-up trajectory with cached Jacobians and observable values."""

    model: MapModel
    states: np.ndarray      # (T, M)
    jacobians: np.ndarray   # (T, M, M)
    phi: np.ndarray         # (T,)
    warmup: int
    seed: int
    seg_len: int
    n_segments: int

    @property
    def T(self) -> int:
        return self.states.shape[0]


def generate_orbit(model: MapModel, n_segments: int, seg_len: int,
                   warmup: int, seed: int) -> Orbit:
    """Run ``warmup`` discarded steps from a seeded uniform start, then
    record ``n_segments * seg_len`` states with Jacobians and observable
    values cached."""
    if n_segments <= 0 or seg_len <= 0 or warmup < 0:
        raise ConfigurationError("orbit counts must be positive")
    T = n_segments * seg_len
    rng = np.random.default_rng(seed)
    x = model.random_state(rng)
    states = np.empty((T, model.dim))
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(warmup):
            x = model.step(x)
        for k in range(T):
            states[k] = x
            if k < T - 1:
                x = model.step(x)
    finite = np.isfinite(states).all(axis=1)
    if not finite.all():
        raise DivergedOrbitError(int(np.argmin(finite)))

    if model.jacobian_batch is not None:
        jac = model.jacobian_batch(states)
    else:
        jac = np.stack([model.jacobian(s) for s in states])
    if model.observable_batch is not None:
        phi = model.observable_batch(states)
    else:
        phi = np.array([model.observable(s) for s in states])
    return Orbit(model, states, jac, phi, warmup, seed, seg_len, n_segments)


def orbit_average(model, n_steps: int, warmup: int, seed: int) -> float:
    """Plain long-orbit mean of the observable, without caching derivatives.

    Accepts a :class:`MapModel` or a :class:`~optresp.dynamics.PerturbedModel`;
    used by the verification sweeps where only the average matters.
    """
    base = getattr(model, "base", model)
    rng = np.random.default_rng(seed)
    x = base.random_state(rng)
    total = 0.0
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(warmup):
            x = model.step(x)
        for k in range(n_steps):
            x = model.step(x)
            total += base.observable(x)
    if not np.isfinite(total) or not np.all(np.isfinite(x)):
        raise DivergedOrbitError(-1, "observable average diverged")
    return total / n_steps


def _qr_pos(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # QR with the sign convention of a positive R diagonal, which makes the
    # frames deterministic functions of the start vectors.
    q, r = np.linalg.qr(a)
    d = np.diagonal(r).copy()
    sign = np.where(d < 0.0, -1.0, 1.0)
    if np.any(np.abs(d) < _RANK_TOL):
        raise DegenerateFrameError(f"rank-deficient frame (|R_ii| < {_RANK_TOL})")
    return q * sign, r * sign[:, None]


def _random_orthonormal(rng: np.random.Generator, m: int, u: int) -> np.ndarray:
    q, _ = _qr_pos(rng.standard_normal((m, u)))
    return q


def unstable_frame(orbit: Orbit, u: int, frame_warmup: int,
                   seed) -> tuple[np.ndarray, np.ndarray]:
    """Forward QR pass: per-step orthonormal ``e_k`` spanning the expanding
    bundle after the transient, plus the QR factors ``r`` with
    ``df_{k-1} e_{k-1} = e_k r_k`` (``r_0 = I``)."""
    M = orbit.model.dim
    if u > M:
        raise ConfigurationError("unstable dimension exceeds phase-space dimension")
    T = orbit.T
    rng = np.random.default_rng(seed)
    e = np.empty((T, M, u))
    r = np.empty((T, u, u))
    e[0] = _random_orthonormal(rng, M, u)
    r[0] = np.eye(u)
    for k in range(T - 1):
        e[k + 1], r[k + 1] = _qr_pos(orbit.jacobians[k] @ e[k])
    return e, r


def adjoint_frame(orbit: Orbit, e: np.ndarray, frame_warmup: int,
                  seed) -> np.ndarray:
    """Backward transposed-Jacobian QR pass, rescaled to ``eps_k^T e_k = I``."""
    T, M, u = e.shape
    rng = np.random.default_rng(seed)
    eps = np.empty((T, M, u))
    w = _random_orthonormal(rng, M, u)
    eps[T - 1] = _dualize(w, e[T - 1])
    for k in range(T - 2, -1, -1):
        w, _ = _qr_pos(orbit.jacobians[k].T @ w)
        eps[k] = _dualize(w, e[k])
    return eps


def _dualize(w: np.ndarray, e_k: np.ndarray) -> np.ndarray:
    # Unique combination of the backward frame columns with eps^T e = I.
    g = w.T @ e_k
    try:
        ginv = np.linalg.inv(g)
    except np.linalg.LinAlgError:
        raise TangencyError("stable/unstable angle collapse (w^T e singular)") from None
    if np.linalg.norm(g, 1) * np.linalg.norm(ginv, 1) > _COND_LIMIT:
        raise TangencyError("stable/unstable angle collapse (w^T e ill-conditioned)")
    return w @ ginv.T


@dataclass
class FrameBundle:
    """Per-step unstable frame, adjoint coframe, and forward QR factors."""

    e: np.ndarray    # (T, M, u)
    eps: np.ndarray  # (T, M, u)
    r: np.ndarray    # (T, u, u), df_{k-1} e_{k-1} = e_k r_k
    frame_warmup: int

    @property
    def u(self) -> int:
        return self.e.shape[2]

    def retained(self, T: int | None = None) -> slice:
        T = self.e.shape[0] if T is None else T
        return slice(self.frame_warmup, T - self.frame_warmup)


def compute_frames(orbit: Orbit, u: int | None = None, frame_warmup: int = 100,
                   seed: int = 0) -> FrameBundle:
    """Run both frame passes with seeds derived from one parent seed."""
    u = orbit.model.unstable_dim if u is None else u
    if orbit.T <= 2 * frame_warmup:
        raise ConfigurationError("orbit shorter than twice the frame warmup")
    fwd_seed, bwd_seed = np.random.SeedSequence(seed).spawn(2)
    e, r = unstable_frame(orbit, u, frame_warmup, fwd_seed)
    eps = adjoint_frame(orbit, e, frame_warmup, bwd_seed)
    return FrameBundle(e=e, eps=eps, r=r, frame_warmup=frame_warmup)


def span_angle(a: np.ndarray, b: np.ndarray) -> float:
    """Largest principal angle (radians) between two column spans."""
    qa, _ = np.linalg.qr(a)
    qb, _ = np.linalg.qr(b)
    s = np.linalg.svd(qa.T @ qb, compute_uv=False)
    return float(np.arccos(np.clip(s.min(), -1.0, 1.0)))


def save_orbit_cache(orbit: Orbit, path: str) -> None:
    """Write the orbit to the documented CSV cache format.

    Line 1: ``M,u,T,seed`` (the model's unstable dimension is recorded for
    provenance).  Each following line holds one step: the M state
    coordinates, then the M*M Jacobian entries in row-major order, all with
    full round-trip precision.
    """
    M = orbit.model.dim
    buf = io.StringIO()
    buf.write(f"{M},{orbit.model.unstable_dim},{orbit.T},{orbit.seed}\n")
    flat = np.hstack([orbit.states, orbit.jacobians.reshape(orbit.T, M * M)])
    for row in flat:
        buf.write(",".join(f"{v:.17g}" for v in row) + "\n")
    with open(path, "w") as fh:
        fh.write(buf.getvalue())


def load_orbit_cache(path: str, model: MapModel, warmup: int = 0,
                     seg_len: int | None = None) -> Orbit:
    """Rebuild an :class:`Orbit` from a cache file written by
    :func:`save_orbit_cache`; observable values are recomputed."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        M, _u, T, seed = (int(v) for v in header)
        if M != model.dim:
            raise ConfigurationError("cache dimension does not match the model")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    if data.shape != (T, M + M * M):
        raise ConfigurationError("cache body does not match its header")
    states = data[:, :M]
    jac = data[:, M:].reshape(T, M, M)
    if model.observable_batch is not None:
        phi = model.observable_batch(states)
    else:
        phi = np.array([model.observable(s) for s in states])
    seg = seg_len or T
    return Orbit(model, states, jac, phi, warmup, seed, seg, T // seg)
