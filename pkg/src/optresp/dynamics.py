"""Hyperbolic benchmark maps on the torus and additive perturbations of them.

A map model bundles the map itself with its first two derivatives, an
observable, and the observable's gradient.  The three built-in benchmarks
form one family: a contracting first coordinate driven by cosines of the
remaining coordinates, and expanding (doubling-like) coordinates weakly
coupled back through ``x^1 sin(2 pi x^i)``.  Only coordinates whose update
rule is taken mod 1 are wrapped; the first coordinate lives on a bounded
band of the real line and is never wrapped.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import ConfigurationError

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class MapModel:
    """A diffeomorphism of the torus with derivatives and an observable.

    Immutable after construction; all callbacks are pure functions, so a
    model can be shared freely across workers.

    Required callbacks operate on single points:

    - ``step(x) -> x'``: one application of the map, wrapped per ``wrap_mask``.
    - ``jacobian(x) -> (M, M)``: entry ``[p, q] = d step_p / d x_q``.
    - ``second_derivative(x, a, b) -> (M,)``: the bilinear form D2f(a, b).
    - ``observable(x) -> float`` and ``observable_gradient(x) -> (M,)``.

    The ``*_batch`` and ``d2f_contract_batch`` hooks are optional vectorized
    fast paths over arrays of points; generic fallbacks exist wherever the
    pipeline needs them.  ``d2f_contract_batch(xs, W, V)`` must return
    ``out[t, j] = sum_{p, a} W[t, p, a] * D2f_{xs[t]}(V[t, :, a], e_j)_p``.
    """

    name: str
    dim: int
    unstable_dim: int
    wrap_mask: np.ndarray
    domain_lo: np.ndarray
    step: Callable[[np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray], np.ndarray]
    second_derivative: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]
    observable: Callable[[np.ndarray], float]
    observable_gradient: Callable[[np.ndarray], np.ndarray]
    jacobian_batch: Optional[Callable[[np.ndarray], np.ndarray]] = None
    observable_batch: Optional[Callable[[np.ndarray], np.ndarray]] = None
    observable_gradient_batch: Optional[Callable[[np.ndarray], np.ndarray]] = None
    d2f_contract_batch: Optional[Callable[..., np.ndarray]] = None

    def wrap(self, x: np.ndarray) -> np.ndarray:
        """Apply mod-1 wrapping to the wrapped coordinates only."""
        y = np.array(x, dtype=float, copy=True)
        y[..., self.wrap_mask] = np.mod(y[..., self.wrap_mask], 1.0)
        return y

    def random_state(self, rng: np.random.Generator) -> np.ndarray:
        """Uniform draw from the fundamental domain."""
        return self.domain_lo + rng.random(self.dim)


@dataclass(frozen=True)
class PerturbedModel:
    """Additive perturbation ``x -> base(x) + gamma * field(x)`` of a model.

    The perturbed update is wrapped exactly like the base map.  With
    ``gamma == 0`` the step is bit-identical to the base step.
    """

    base: MapModel
    gamma: float
    field: Callable[[np.ndarray], np.ndarray]
    field_gradient: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def step(self, x: np.ndarray) -> np.ndarray:
        return self.base.wrap(self.base.step(x) + self.gamma * np.asarray(self.field(x)))


def perturbed_step(model: PerturbedModel, x: np.ndarray) -> np.ndarray:
    """One update of the additively perturbed map."""
    return model.step(x)


def _observable_2d():
    # Observable x1^3 + 0.5 * (x2 - 0.5)^2; the quadratic term is taken in
    # the second (expanding) coordinate, in line with the higher-dimensional
    # family members which sum (x^i - 0.5)^2 over i >= 2.
    def phi(x):
        return x[0] ** 3 + 0.5 * (x[1] - 0.5) ** 2

    def dphi(x):
        return np.array([3.0 * x[0] ** 2, x[1] - 0.5])

    def phi_batch(xs):
        return xs[:, 0] ** 3 + 0.5 * (xs[:, 1] - 0.5) ** 2

    def dphi_batch(xs):
        out = np.empty_like(xs)
        out[:, 0] = 3.0 * xs[:, 0] ** 2
        out[:, 1] = xs[:, 1] - 0.5
        return out

    return phi, dphi, phi_batch, dphi_batch


def _observable_sum_sq(dim, cubic_head=True):
    # x1^3 + 0.5 sum (x^i - 0.5)^2 for the 3d map; x1 + 2 sum (x^i - 0.5)^2
    # for the 21d map.
    if cubic_head:
        head, dhead, w = (lambda t: t ** 3), (lambda t: 3.0 * t ** 2), 0.5
    else:
        head, dhead, w = (lambda t: t), (lambda t: np.ones_like(t)), 2.0

    def phi(x):
        return head(x[0]) + w * np.sum((x[1:] - 0.5) ** 2)

    def dphi(x):
        out = np.empty(dim)
        out[0] = dhead(x[0])
        out[1:] = 2.0 * w * (x[1:] - 0.5)
        return out

    def phi_batch(xs):
        return head(xs[:, 0]) + w * np.sum((xs[:, 1:] - 0.5) ** 2, axis=1)

    def dphi_batch(xs):
        out = np.empty_like(xs)
        out[:, 0] = dhead(xs[:, 0])
        out[:, 1:] = 2.0 * w * (xs[:, 1:] - 0.5)
        return out

    return phi, dphi, phi_batch, dphi_batch


def _solenoid_family(name, dim, unstable_dim, contraction, observables,
                     cos_gain=0.01, sin_gain=0.1):
    """Build one member of the solenoid-like family.

    Update rule (coordinates 0-based, ``a`` = contraction, ``c`` = cos_gain,
    ``b`` = sin_gain)::

        y_0 = a x_0 + c * sum_{i>=1} cos(2 pi x_i)
        y_i = 2 x_i + b x_0 sin(2 pi x_i)   (mod 1),   i >= 1
    """
    a, c, b = contraction, cos_gain, sin_gain
    M = dim
    wrap_mask = np.zeros(M, dtype=bool)
    wrap_mask[1:] = True
    domain_lo = np.zeros(M)
    domain_lo[0] = -0.5
    phi, dphi, phi_batch, dphi_batch = observables

    def step(x):
        x = np.asarray(x, dtype=float)
        y = np.empty(M)
        y[0] = a * x[0] + c * np.sum(np.cos(TWO_PI * x[1:]))
        y[1:] = np.mod(2.0 * x[1:] + b * x[0] * np.sin(TWO_PI * x[1:]), 1.0)
        return y

    def jacobian(x):
        x = np.asarray(x, dtype=float)
        J = np.zeros((M, M))
        s = np.sin(TWO_PI * x[1:])
        co = np.cos(TWO_PI * x[1:])
        J[0, 0] = a
        J[0, 1:] = -TWO_PI * c * s
        J[1:, 0] = b * s
        J[np.arange(1, M), np.arange(1, M)] = 2.0 + TWO_PI * b * x[0] * co
        return J

    def jacobian_batch(xs):
        T = xs.shape[0]
        J = np.zeros((T, M, M))
        s = np.sin(TWO_PI * xs[:, 1:])
        co = np.cos(TWO_PI * xs[:, 1:])
        J[:, 0, 0] = a
        J[:, 0, 1:] = -TWO_PI * c * s
        J[:, 1:, 0] = b * s
        J[:, np.arange(1, M), np.arange(1, M)] = 2.0 + TWO_PI * b * xs[:, :1] * co
        return J

    def second_derivative(x, va, vb):
        # Nonzero entries of D2f: d2 y_0 / dx_i dx_i, d2 y_i / dx_0 dx_i,
        # and d2 y_i / dx_i dx_i (i >= 1).
        x = np.asarray(x, dtype=float)
        va = np.asarray(va, dtype=float)
        vb = np.asarray(vb, dtype=float)
        s = np.sin(TWO_PI * x[1:])
        co = np.cos(TWO_PI * x[1:])
        out = np.empty(M)
        out[0] = np.sum(-TWO_PI ** 2 * c * co * va[1:] * vb[1:])
        out[1:] = (TWO_PI * b * co * (va[0] * vb[1:] + va[1:] * vb[0])
                   - TWO_PI ** 2 * b * x[0] * s * va[1:] * vb[1:])
        return out

    def d2f_contract_batch(xs, W, V):
        # out[t, j] = sum_{p, a} W[t, p, a] * D2f(V[t, :, a], e_j)_p,
        # evaluated through the sparse structure above.
        s = np.sin(TWO_PI * xs[:, 1:])
        co = np.cos(TWO_PI * xs[:, 1:])
        A = -TWO_PI ** 2 * c * co                      # (T, M-1)
        B = TWO_PI * b * co
        C = -TWO_PI ** 2 * b * xs[:, :1] * s
        # pairwise row contractions over the frame axis
        WV_0j = np.einsum('ta,tja->tj', W[:, 0, :], V[:, 1:, :])   # W_0 . V_j
        WV_j0 = np.einsum('tja,ta->tj', W[:, 1:, :], V[:, 0, :])   # W_j . V_0
        WV_jj = np.einsum('tja,tja->tj', W[:, 1:, :], V[:, 1:, :])  # W_j . V_j
        out = np.empty((xs.shape[0], M))
        out[:, 0] = np.sum(B * WV_jj, axis=1)
        out[:, 1:] = A * WV_0j + B * WV_j0 + C * WV_jj
        return out

    return MapModel(
        name=name,
        dim=M,
        unstable_dim=unstable_dim,
        wrap_mask=wrap_mask,
        domain_lo=domain_lo,
        step=step,
        jacobian=jacobian,
        second_derivative=second_derivative,
        observable=phi,
        observable_gradient=dphi,
        jacobian_batch=jacobian_batch,
        observable_batch=phi_batch,
        observable_gradient_batch=dphi_batch,
        d2f_contract_batch=d2f_contract_batch,
    )


def _make_solenoid2d():
    return _solenoid_family("solenoid2d", 2, 1, 0.5, _observable_2d())


def _make_solenoid3d():
    return _solenoid_family("solenoid3d", 3, 2, 0.5,
                            _observable_sum_sq(3, cubic_head=True))


def _make_solenoid21d():
    return _solenoid_family("solenoid21d", 21, 20, 0.1,
                            _observable_sum_sq(21, cubic_head=False))


_REGISTRY: dict[str, Callable[[], MapModel]] = {
    "solenoid2d": _make_solenoid2d,
    "solenoid3d": _make_solenoid3d,
    "solenoid21d": _make_solenoid21d,
}


def register_model(name: str, factory: Callable[[], MapModel]) -> None:
    """Add a user-defined model to the registry used by ``make_model``."""
    _REGISTRY[name] = factory


def make_model(name: str) -> MapModel:
    """Instantiate a registered benchmark model by name."""
    try:
        factory = _REGISTRY[name]
    except KeyError:
        raise ConfigurationError(
            f"unknown model {name!r}; known: {sorted(_REGISTRY)}") from None
    return factory()
