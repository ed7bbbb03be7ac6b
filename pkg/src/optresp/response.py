"""Assembly of the linear response from orbit averages.

The derivative of the long-time average splits into three orbit averages:
a shadowing part contracting the observable's shadowing covector with the
perturbation, plus two windowed parts carrying the unstable contribution
through the equivariant divergence of the perturbation and of the map's
pushforward.  Everything here is deterministic given the orbit and frames;
error bars come from non-overlapping batch means with one batch per orbit
segment.

Perturbations enter in additive form (a field added to the map) and are
converted to the composition convention by an index shift: the field
sampled at step ``k`` acts on the state at step ``k + 1``, and its spatial
gradient picks up an inverse-Jacobian factor.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .dynamics import MapModel
from .errors import CapabilityError, ConfigurationError
from .frames import FrameBundle, Orbit, compute_frames, generate_orbit
from .shadowing import CovectorPath, adjoint_shadowing_solve, default_end_buffer


def phi_window(phi: np.ndarray, W: int, mu_phi: float) -> np.ndarray:
    """Centered sliding sum of the observable over ``2 W + 1`` steps.

    Entry ``k`` sums ``phi[k - W .. k + W] - mu_phi``; entries within ``W``
    of either end are NaN so that accidental use poisons an average instead
    of silently biasing it.
    """
    T = phi.shape[0]
    if W < 0 or 2 * W + 1 > T:
        raise ConfigurationError(f"window W={W} does not fit an orbit of {T} steps")
    centered = phi - mu_phi
    cs = np.concatenate([[0.0], np.cumsum(centered)])
    out = np.full(T, np.nan)
    k = np.arange(W, T - W)
    out[k] = cs[k + W + 1] - cs[k - W]
    return out


def equivariant_div_X(e_k: np.ndarray, eps_k: np.ndarray,
                      gradX_k: np.ndarray) -> float:
    """Divergence of a field as seen by the unstable bundle:
    ``trace(eps^T gradX e)`` with the frames dual at this step."""
    return float(np.einsum("pi,pq,qi->", eps_k, gradX_k, e_k))


def equivariant_div_fstar(orbit: Orbit, frames: FrameBundle) -> np.ndarray:
    """Per-step covector contracting the map's curvature with the frames.

    At step ``k`` the second derivative of the map is contracted, over the
    unstable directions, between the frame ``e_k`` and the coframe at step
    ``k + 1`` renormalized to be dual to the pushed-forward frame
    ``df_k e_k`` (the QR factor undoes the renormalization of ``e``):
    ``nu_k(Y) = sum_a (eps_{k+1} r_{k+1}^{-T})_a . D2f(e_{k,a}, Y)``.
    The final row has no successor frame and is set to zero; it sits inside
    the discarded end buffer.
    """
    model = orbit.model
    T = orbit.T
    e, eps, r = frames.e, frames.eps, frames.r
    # eps_hat = eps_{k+1} r_{k+1}^{-T}; dual to the pushed frame df_k e_k.
    eps_hat = np.linalg.solve(r[1:], np.transpose(eps[1:], (0, 2, 1)))
    eps_hat = np.transpose(eps_hat, (0, 2, 1))
    nu = np.zeros((T, model.dim))
    if model.d2f_contract_batch is not None:
        nu[:-1] = model.d2f_contract_batch(orbit.states[:-1], eps_hat, e[:-1])
        return nu
    if model.second_derivative is None:
        raise CapabilityError(f"model {model.name} has no second derivative")
    # generic fallback: one bilinear-form evaluation per step, frame column,
    # and coordinate direction (fine for test-sized orbits)
    M, u = model.dim, frames.u
    eye = np.eye(M)
    for k in range(T - 1):
        x = orbit.states[k]
        for a in range(u):
            d2 = np.stack([model.second_derivative(x, e[k][:, a], eye[j])
                           for j in range(M)], axis=1)  # (M out, M direction)
            nu[k] += eps_hat[k][:, a] @ d2
    return nu


def pullback_frames(orbit: Orbit, frames: FrameBundle) -> np.ndarray:
    """``h_k = df_k^{-1} e_{k+1}``, the next frame pulled back one step.

    With additive fields this turns the equivariant divergence into a plain
    contraction of the raw field gradient:
    ``div X at step k+1 = trace(eps_{k+1}^T gradXprime_k h_k)``.
    """
    return np.linalg.solve(orbit.jacobians[:-1], frames.e[1:])


@dataclass
class PerturbationOnOrbit:
    """A perturbation direction sampled along one orbit.

    ``X`` is in composition convention (``X[k]`` acts at step ``k``; row 0
    is unusable and NaN).  ``gradX`` may be omitted when ``divX`` (the
    equivariant-divergence series) is supplied directly, which is how the
    batched basis path avoids materializing dense gradients.
    """

    label: str
    X: np.ndarray                      # (T, M)
    gradX: Optional[np.ndarray] = None  # (T, M, M)
    divX: Optional[np.ndarray] = None   # (T,)

    def div_series(self, frames: FrameBundle) -> np.ndarray:
        if self.divX is not None:
            return self.divX
        if self.gradX is None:
            raise ConfigurationError("perturbation carries neither gradX nor divX")
        out = np.full(self.X.shape[0], np.nan)
        out[1:] = np.einsum("tpi,tpq,tqi->t", frames.eps[1:], self.gradX[1:],
                            frames.e[1:])
        return out


def additive_to_composition(orbit: Orbit, frames: FrameBundle,
                            Xp: np.ndarray, gradXp: np.ndarray,
                            label: str = "") -> PerturbationOnOrbit:
    """Shift an additive field into composition convention.

    ``X[k+1] = Xp[k]`` and ``gradX[k+1] = gradXp[k] df_k^{-1}`` (dense
    solve); step 0 of the shifted path is NaN.
    """
    T = orbit.T
    X = np.full((T, orbit.model.dim), np.nan)
    X[1:] = Xp[:-1]
    gradX = np.full((T,) + gradXp.shape[1:], np.nan)
    try:
        sol = np.linalg.solve(np.transpose(orbit.jacobians[:-1], (0, 2, 1)),
                              np.transpose(gradXp[:-1], (0, 2, 1)))
    except np.linalg.LinAlgError:
        raise ConfigurationError("singular Jacobian while shifting a field") from None
    gradX[1:] = np.transpose(sol, (0, 2, 1))
    return PerturbationOnOrbit(label=label, X=X, gradX=gradX)


@dataclass
class ResponseBreakdown:
    """One response estimate split into its three orbit averages."""

    label: str
    r1: float
    r2w: float
    r3w: float
    total: float
    stderr: float
    W: int
    T_used: int


def _batched_mean(series: np.ndarray, seg_len: int) -> tuple[float, float, int]:
    # Per-segment sums first, then across segments, so the reduction order
    # is fixed no matter how the work is scheduled.
    nb = series.shape[0] // seg_len
    if nb < 2:
        raise ConfigurationError("interior too short for batch means")
    bm = series[:nb * seg_len].reshape(nb, seg_len).mean(axis=1)
    return float(bm.mean()), float(bm.std(ddof=1) / np.sqrt(nb)), nb * seg_len


def interior_slice(T: int, frame_warmup: int, W: int) -> slice:
    """Steps entering averages: end buffer plus the window margin."""
    buf = default_end_buffer(frame_warmup, W) + W
    if 2 * buf >= T:
        raise ConfigurationError("orbit too short for the requested window and buffers")
    return slice(buf, T - buf)


def response(orbit: Orbit, frames: FrameBundle, omega_phi: CovectorPath,
             omega_div: CovectorPath, phi_w: np.ndarray,
             pert: PerturbationOnOrbit, W: int,
             unstable_sign: int = 1) -> ResponseBreakdown:
    """Contract one perturbation against the shared covector paths."""
    T = orbit.T
    if pert.X.shape[0] != T or phi_w.shape[0] != T:
        raise ConfigurationError("perturbation/window not sampled on this orbit")
    sl = interior_slice(T, frames.frame_warmup, W)
    div = pert.div_series(frames)
    i1 = np.einsum("tj,tj->t", omega_phi.omega[sl], pert.X[sl])
    i2 = phi_w[sl] * np.einsum("tj,tj->t", omega_div.omega[sl], pert.X[sl])
    i3 = phi_w[sl] * div[sl]
    r1, _, _ = _batched_mean(i1, orbit.seg_len)
    r2w, _, _ = _batched_mean(i2, orbit.seg_len)
    r3w, _, _ = _batched_mean(i3, orbit.seg_len)
    r2w *= unstable_sign
    r3w *= unstable_sign
    _, se, t_used = _batched_mean(i1 + unstable_sign * (i2 + i3), orbit.seg_len)
    return ResponseBreakdown(label=pert.label, r1=r1, r2w=r2w, r3w=r3w,
                             total=r1 + r2w + r3w, stderr=se, W=W, T_used=t_used)


def batch_response(orbit: Orbit, frames: FrameBundle, omega_phi: CovectorPath,
                   omega_div: CovectorPath, phi_w: np.ndarray,
                   perts: Sequence[PerturbationOnOrbit], W: int,
                   unstable_sign: int = 1) -> list[ResponseBreakdown]:
    """Responses of many perturbations against one shared data set."""
    return [response(orbit, frames, omega_phi, omega_div, phi_w, p, W,
                     unstable_sign) for p in perts]


@dataclass(frozen=True)
class EngineParams:
    """Sampling parameters of one response computation."""

    seg_len: int = 20
    n_segments: int = 4000
    W: int = 10
    warmup: int = 500
    frame_warmup: int = 100
    seed: int = 0
    unstable_sign: int = 1

    def asdict(self) -> dict:
        return {
            "seg_len": self.seg_len, "n_segments": self.n_segments,
            "W": self.W, "warmup": self.warmup,
            "frame_warmup": self.frame_warmup, "seed": self.seed,
            "unstable_sign": self.unstable_sign,
        }


class ResponseSession:
    """Shared orbit / frame / covector data for many response queries.

    Building the session costs two frame passes and two covector solves;
    afterwards each perturbation only pays for its own contractions, which
    is what makes sweeping a large basis cheap.
    """

    def __init__(self, model: MapModel, params: EngineParams):
        self.model = model
        self.params = params
        self.orbit = generate_orbit(model, params.n_segments, params.seg_len,
                                    params.warmup, params.seed)
        frame_seed = np.random.SeedSequence(params.seed).spawn(1)[0]
        self.frames = compute_frames(self.orbit, model.unstable_dim,
                                     params.frame_warmup, frame_seed)
        buf = default_end_buffer(params.frame_warmup, params.W)
        if model.observable_gradient_batch is not None:
            dphi = model.observable_gradient_batch(self.orbit.states)
        else:
            dphi = np.stack([model.observable_gradient(s) for s in self.orbit.states])
        self.omega_phi = adjoint_shadowing_solve(self.orbit, self.frames, dphi,
                                                 source="dPhi", end_buffer=buf)
        nu_fstar = equivariant_div_fstar(self.orbit, self.frames)
        self.omega_div = adjoint_shadowing_solve(self.orbit, self.frames, nu_fstar,
                                                 source="div_fstar", end_buffer=buf)
        self.pullback = pullback_frames(self.orbit, self.frames)  # (T-1, M, u)
        self._phi_w: dict[int, np.ndarray] = {}
        self.mu_phi = self._retained_mean()

    def _retained_mean(self) -> float:
        buf = default_end_buffer(self.params.frame_warmup, self.params.W)
        return float(self.orbit.phi[buf:self.orbit.T - buf].mean())

    def window(self, W: int | None = None) -> np.ndarray:
        W = self.params.W if W is None else W
        if W not in self._phi_w:
            self._phi_w[W] = phi_window(self.orbit.phi, W, self.mu_phi)
        return self._phi_w[W]

    def pert_additive(self, Xp: np.ndarray, gradXp: np.ndarray,
                      label: str = "") -> PerturbationOnOrbit:
        return additive_to_composition(self.orbit, self.frames, Xp, gradXp, label)

    def pert_additive_fields(self, field: Callable, field_gradient: Callable,
                             label: str = "") -> PerturbationOnOrbit:
        """Sample point-valued field callables along the orbit, then shift."""
        xs = self.orbit.states
        Xp = np.stack([np.asarray(field(x), dtype=float) for x in xs])
        gradXp = np.stack([np.asarray(field_gradient(x), dtype=float) for x in xs])
        return self.pert_additive(Xp, gradXp, label)

    def breakdown(self, pert: PerturbationOnOrbit,
                  W: int | None = None) -> ResponseBreakdown:
        W = self.params.W if W is None else W
        return response(self.orbit, self.frames, self.omega_phi, self.omega_div,
                        self.window(W), pert, W, self.params.unstable_sign)

    def batch(self, perts: Sequence[PerturbationOnOrbit],
              W: int | None = None) -> list[ResponseBreakdown]:
        return [self.breakdown(p, W) for p in perts]
