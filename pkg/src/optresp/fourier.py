"""Trigonometric vector-field basis on T^M under weighted Sobolev products.

Scalar factors: ``b_0 = 1``, ``b_m = sqrt(2) sin(q 2 pi x)`` for odd ``m``
and ``sqrt(2) cos(q 2 pi x)`` for even ``m > 0``, with frequency
``q = floor((m+1)/2)``.  A basis field puts the product of one factor per
coordinate into a single vector slot.  The weighted Sobolev norm of such a
product has the closed form ``sum_l C_l * Q**l`` with
``Q = sum_i (2 pi q_i)**2``, because differentiating a factor multiplies its
L2 norm by ``2 pi q_i`` and distinct factors stay orthogonal.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

TWO_PI = 2.0 * np.pi
SQRT2 = np.sqrt(2.0)


def int2vec(m: int, N: int, n_bits: int) -> list[int]:
    """Split ``m`` into ``n_bits`` base-N digits plus a leading quotient.

    Returns ``n_bits + 1`` integers, most significant first: the leading
    entry is ``m // N**n_bits`` and the rest are the base-N digits of the
    remainder.
    """
    digits: list[int] = []
    for _ in range(n_bits):
        digits.insert(0, m % N)
        m //= N
    digits.insert(0, m)
    return digits


def vec2int(digits: Sequence[int], N: int) -> int:
    """Inverse of :func:`int2vec`: fold digits back into one integer."""
    m = 0
    for d in digits:
        m = m * N + d
    return m


def freq(m: int) -> int:
    """Oscillation count of the scalar factor ``b_m``."""
    return (m + 1) // 2


def factor_values(m: int, x: np.ndarray) -> np.ndarray:
    """Evaluate ``b_m`` elementwise."""
    x = np.asarray(x, dtype=float)
    if m == 0:
        return np.ones_like(x)
    arg = TWO_PI * freq(m) * x
    return SQRT2 * (np.sin(arg) if m % 2 == 1 else np.cos(arg))


def factor_derivatives(m: int, x: np.ndarray) -> np.ndarray:
    """Evaluate ``b_m'`` elementwise."""
    x = np.asarray(x, dtype=float)
    if m == 0:
        return np.zeros_like(x)
    q = TWO_PI * freq(m)
    arg = q * x
    return SQRT2 * q * (np.cos(arg) if m % 2 == 1 else -np.sin(arg))


def factor_bank(x: np.ndarray, N: int) -> tuple[np.ndarray, np.ndarray]:
    """Tabulate ``b_m`` and ``b_m'`` for all ``m < N`` over an array of points.

    Returns two ``(N,) + x.shape`` arrays (values, derivatives); the heavy
    per-orbit trigonometry is paid once here and reused for every index.
    """
    x = np.asarray(x, dtype=float)
    vals = np.empty((N,) + x.shape)
    ders = np.empty((N,) + x.shape)
    for m in range(N):
        vals[m] = factor_values(m, x)
        ders[m] = factor_derivatives(m, x)
    return vals, ders


@dataclass(frozen=True)
class HpWeighting:
    """Derivative weights ``C_0 .. C_p`` of the order-``p`` Sobolev product."""

    p: int
    weights: tuple[float, ...]

    def __post_init__(self):
        if len(self.weights) != self.p + 1:
            raise ValueError("need exactly p + 1 weights")
        if self.weights[0] <= 0.0:
            raise ValueError("C_0 must be positive for a nondegenerate norm")

    @classmethod
    def two_pi_inverse(cls, p: int) -> "HpWeighting":
        """The preset ``C_l = (2 pi)**(-2 l)``, which cancels the frequency
        factors so that norms become integer sums."""
        return cls(p, tuple(TWO_PI ** (-2 * l) for l in range(p + 1)))

    @classmethod
    def ones(cls, p: int) -> "HpWeighting":
        return cls(p, (1.0,) * (p + 1))


def hp_norm_sq(n: Sequence[int], weighting: HpWeighting) -> float:
    """Squared Sobolev norm of the (unnormalized) product basis function."""
    Q = sum((TWO_PI * freq(ni)) ** 2 for ni in n)
    return sum(c * Q ** l for l, c in enumerate(weighting.weights))


@dataclass(frozen=True)
class FourierIndex:
    """Label of one basis field: vector slot (0-based) and multi-index n.

    The flat integer packs the slot as the most significant digit:
    ``flat = slot * N**M + sum_i n[i] * N**(M - 1 - i)``.
    """

    slot: int
    n: tuple[int, ...]
    N: int

    @property
    def flat(self) -> int:
        return vec2int((self.slot,) + self.n, self.N)

    @classmethod
    def from_flat(cls, m: int, M: int, N: int) -> "FourierIndex":
        digits = int2vec(m, N, M)
        return cls(slot=digits[0], n=tuple(digits[1:]), N=N)

    def label(self) -> str:
        """Human-readable name matching the 1-based superscript convention."""
        return f"B{self.slot + 1}_({','.join(str(v) for v in self.n)})"


def enumerate_full_basis(M: int, N: int) -> list[FourierIndex]:
    """All ``M * N**M`` indices in flat order."""
    return [FourierIndex.from_flat(m, M, N) for m in range(M * N ** M)]


def basis_eval(idx: FourierIndex, x: np.ndarray,
               weighting: HpWeighting | None = None) -> np.ndarray:
    """The basis vector field at one point; normalized when a weighting is given."""
    x = np.asarray(x, dtype=float)
    M = x.shape[-1]
    prod = 1.0
    for i, ni in enumerate(idx.n):
        prod = prod * factor_values(ni, x[..., i])
    if weighting is not None:
        prod = prod / np.sqrt(hp_norm_sq(idx.n, weighting))
    out = np.zeros(x.shape)
    out[..., idx.slot] = prod
    return out


def basis_grad(idx: FourierIndex, x: np.ndarray,
               weighting: HpWeighting | None = None) -> np.ndarray:
    """Spatial gradient of the basis field at one point.

    Entry ``[p, q] = d (B_p) / d x_q``; only row ``idx.slot`` is nonzero.
    Normalized by the Sobolev norm when a weighting is given.
    """
    x = np.asarray(x, dtype=float)
    M = x.shape[0]
    vals = [factor_values(ni, x[i]) for i, ni in enumerate(idx.n)]
    ders = [factor_derivatives(ni, x[i]) for i, ni in enumerate(idx.n)]
    scale = 1.0
    if weighting is not None:
        scale = 1.0 / np.sqrt(hp_norm_sq(idx.n, weighting))
    out = np.zeros((M, M))
    for q in range(M):
        g = ders[q]
        for i in range(M):
            if i != q:
                g = g * vals[i]
        out[idx.slot, q] = g * scale
    return out


def restricted_basis_21d(n: int, x: np.ndarray,
                         weighting: HpWeighting) -> tuple[np.ndarray, np.ndarray]:
    """One member of the 21d restricted family, normalized.

    The field is ``[b_n(x^1), b_n(x^1), 0, ..., 0]`` divided by its norm,
    which is the one-dimensional Sobolev norm of ``b_n`` alone; the gradient
    is nonzero only in column 1 (dependence on ``x^1`` only).
    """
    x = np.asarray(x, dtype=float)
    M = x.shape[0]
    nrm = np.sqrt(restricted_norm_sq(n, weighting))
    vec = np.zeros(M)
    vec[0] = vec[1] = factor_values(n, x[0]) / nrm
    grad = np.zeros((M, M))
    grad[0, 0] = grad[1, 0] = factor_derivatives(n, x[0]) / nrm
    return vec, grad


def restricted_norm_sq(n: int, weighting: HpWeighting) -> float:
    """Squared norm of the scalar factor ``b_n`` on the line."""
    return hp_norm_sq((n,), weighting)
