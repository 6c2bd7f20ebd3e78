"""Bubbles, their derivatives, closed Riesz convolutions, and the sphere transport.

The bubble W_{y,beta}(x) = c beta^((N-4)/2) (1 + beta^2 |x-y|^2)^((4-N)/2) is
the only function this toolkit ever represents explicitly; everything else is
built from it through exact identities.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .specfun import ProblemParams, c_n_alpha, i_of_s

__all__ = [
    "Bubble",
    "SpherePoint",
    "eval_bubble",
    "eval_kernel_derivatives",
    "riesz_convolution_Wp",
    "stereographic",
    "stereographic_inverse",
    "stereographic_jacobian",
    "psi_transport",
    "phi_transport",
    "bilaplacian_fd",
]

SOUTH_POLE_MARGIN = 1e-12


@dataclass(frozen=True)
class Bubble:
    """A rescaled/translated extremal W_{y,beta} with amplitude c.

    The default amplitude is the canonical (solvability-derived) C(N, alpha),
    for which W solves the critical equation exactly.
    """

    params: ProblemParams
    y: np.ndarray = None
    beta: float = 1.0
    c: float = None

    def __post_init__(self):
        y = np.zeros(self.params.N) if self.y is None else np.asarray(self.y, dtype=float)
        if y.shape != (self.params.N,):
            raise ValueError(f"center must have shape ({self.params.N},), got {y.shape}")
        object.__setattr__(self, "y", y)
        if self.beta <= 0.0:
            raise ValueError(f"scale beta must be positive, got {self.beta}")
        if self.c is None:
            object.__setattr__(self, "c", c_n_alpha(self.params).canonical)

    def evaluate(self, x) -> np.ndarray | float:
        return eval_bubble(self, x)

    def profile(self, r):
        """Radial profile about the center: c beta^((N-4)/2) (1+beta^2 r^2)^((4-N)/2)."""
        r = np.asarray(r, dtype=float)
        halfpow = 0.5 * (self.params.N - 4.0)
        return self.c * self.beta**halfpow * (1.0 + (self.beta * r) ** 2) ** (-halfpow)


def eval_bubble(b: Bubble, x) -> np.ndarray | float:
    """Closed-form value of W_{y,beta} at x (point of shape (N,) or batch (.., N))."""
    x = np.asarray(x, dtype=float)
    r2 = np.sum((x - b.y) ** 2, axis=-1)
    halfpow = 0.5 * (b.params.N - 4.0)
    out = b.c * b.beta**halfpow * (1.0 + b.beta**2 * r2) ** (-halfpow)
    return float(out) if out.ndim == 0 else out


def eval_kernel_derivatives(b: Bubble, x) -> np.ndarray:
    """Kernel derivatives (phi_1 .. phi_N, phi_{N+1}) at the gauge (y, beta) = (0, 1).

    phi_j     = (4-N) W(x) x_j / (1+|x|^2)            (translations)
    phi_{N+1} = (N-4)/2 W(x) (1-|x|^2) / (1+|x|^2)    (dilation)

    Values at general (y, beta) follow from the exact covariance rule and are
    deliberately not re-derived here.
    """
    if b.beta != 1.0 or np.any(b.y != 0.0):
        raise ValueError("kernel derivatives are defined at the normalized gauge (y, beta) = (0, 1)")
    x = np.asarray(x, dtype=float)
    if x.shape != (b.params.N,):
        raise ValueError(f"expected a single point of shape ({b.params.N},)")
    N = b.params.N
    r2 = float(np.dot(x, x))
    w = eval_bubble(b, x)
    out = np.empty(N + 1)
    out[:N] = (4.0 - N) * w * x / (1.0 + r2)
    out[N] = 0.5 * (N - 4.0) * w * (1.0 - r2) / (1.0 + r2)
    return out


def riesz_convolution_Wp(b: Bubble, x) -> np.ndarray | float:
    """Closed-form (|.|^(-alpha) * W_{y,beta}^p)(x) = C (beta/(1+beta^2|x-y|^2))^(alpha/2).

    C = I(alpha/2) c^p; for the canonical amplitude this is the constant of
    the critical equation's right-hand side.
    """
    params = b.params
    x = np.asarray(x, dtype=float)
    r2 = np.sum((x - b.y) ** 2, axis=-1)
    const = i_of_s(params.N, 0.5 * params.alpha) * b.c**params.p
    out = const * (b.beta / (1.0 + b.beta**2 * r2)) ** (0.5 * params.alpha)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# Stereographic projection machinery
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SpherePoint:
    """A point xi on the unit sphere S^N in R^(N+1), |xi| = 1 within 1e-12."""

    xi: np.ndarray

    def __post_init__(self):
        xi = np.asarray(self.xi, dtype=float)
        nrm = float(np.linalg.norm(xi))
        if abs(nrm - 1.0) > 1e-12:
            raise ValueError(f"|xi| must equal 1 within 1e-12, got |xi| = {nrm!r}")
        object.__setattr__(self, "xi", xi)

    @property
    def last(self) -> float:
        return float(self.xi[-1])


def stereographic(x) -> np.ndarray:
    """S(x) = (2x/(1+|x|^2), (1-|x|^2)/(1+|x|^2)) in R^(N+1); S(0) is the north pole."""
    x = np.asarray(x, dtype=float)
    r2 = float(np.dot(x, x))
    return np.concatenate([2.0 * x / (1.0 + r2), [(1.0 - r2) / (1.0 + r2)]])


def stereographic_inverse(xi) -> np.ndarray:
    """Inverse map xi -> xi'/(1 + xi_{N+1}); rejects the south pole."""
    xi = xi.xi if isinstance(xi, SpherePoint) else np.asarray(xi, dtype=float)
    last = float(xi[-1])
    if last < -1.0 + SOUTH_POLE_MARGIN:
        raise ValueError("stereographic inverse is undefined at the south pole")
    return xi[:-1] / (1.0 + last)


def stereographic_jacobian(x) -> float:
    """J_S(x) = (2/(1+|x|^2))^N."""
    x = np.asarray(x, dtype=float)
    return float((2.0 / (1.0 + np.dot(x, x))) ** x.shape[-1])


def psi_transport(f, xi, N: int | None = None) -> float:
    """Transport to the sphere: Psi(f)(xi) = J_S^((4-N)/(2N))(S^-1 xi) f(S^-1 xi)."""
    x = stereographic_inverse(xi)
    n = x.shape[0] if N is None else N
    return stereographic_jacobian(x) ** ((4.0 - n) / (2.0 * n)) * f(x)


def phi_transport(iota, x) -> float:
    """Transport back: Phi(iota)(x) = J_S^((N-4)/(2N))(x) iota(S x).  Inverse of Psi."""
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    return stereographic_jacobian(x) ** ((n - 4.0) / (2.0 * n)) * iota(stereographic(x))


# ---------------------------------------------------------------------------
# Finite-difference bilaplacian (validation stencil)
# ---------------------------------------------------------------------------


def _fourth_axis(f, x, h, i, f0):
    e = np.zeros_like(x)
    e[i] = 1.0
    return (
        f(x + 2 * h * e) - 4.0 * f(x + h * e) + 6.0 * f0 - 4.0 * f(x - h * e) + f(x - 2 * h * e)
    ) / h**4


def _mixed_axes(f, x, h, i, j, f0, axis_cache):
    ei = np.zeros_like(x)
    ei[i] = 1.0
    ej = np.zeros_like(x)
    ej[j] = 1.0
    corners = (
        f(x + h * ei + h * ej)
        + f(x + h * ei - h * ej)
        + f(x - h * ei + h * ej)
        + f(x - h * ei - h * ej)
    )
    return (corners - 2.0 * (axis_cache[i] + axis_cache[j]) + 4.0 * f0) / h**4


def bilaplacian_fd(f, x, h: float = 1e-2, richardson: bool = True, levels: int = 2) -> float:
    """Finite-difference Delta^2 f at x via 5-point fourth-derivative stencils.

    Delta^2 f = sum_i f_xxxx + 2 sum_{i<j} f_xxyy, each term from the classical
    O(h^2) stencil.  With richardson=True the h, 2h, ... evaluations are
    combined to O(h^(2 levels)), which also keeps the rounding error of the
    1/h^4 division in check; this trade-off is why the default step is as
    large as 1e-2.  Callers probing a function with an intrinsic length scale
    should stretch h accordingly.
    """
    x = np.asarray(x, dtype=float)

    def one_level(hh):
        f0 = f(x)
        n = x.shape[0]
        axis_cache = {}
        for i in range(n):
            e = np.zeros_like(x)
            e[i] = 1.0
            axis_cache[i] = f(x + hh * e) + f(x - hh * e)
        total = 0.0
        for i in range(n):
            total += _fourth_axis(f, x, hh, i, f0)
        for i in range(n):
            for j in range(i + 1, n):
                total += 2.0 * _mixed_axes(f, x, hh, i, j, f0, axis_cache)
        return total

    if not richardson:
        return one_level(h)
    # the stencil error is a series in h^2; eliminate levels-1 leading terms
    table = [one_level(h * 2.0**i) for i in range(levels)]
    for lvl in range(1, levels):
        fac = 4.0**lvl
        table = [
            (fac * table[i] - table[i + 1]) / (fac - 1.0) for i in range(len(table) - 1)
        ]
    return table[0]
