"""Closed-form constants of the critical biharmonic Hartree problem.

Everything here is a Gamma-function ratio evaluated in log space: the
Funk-Hecke multipliers lambda_k(s), the bubble amplitude, the Riesz
convolution constant I(s), and the sharp inequality constants.  All
functions are pure and stateless.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

__all__ = [
    "ProblemParams",
    "PaperConstants",
    "AmplitudeInfo",
    "log_gamma",
    "lambda_k",
    "log_lambda_k",
    "lambda_ratio",
    "i_of_s",
    "c_n_alpha",
    "norm_w_squared_closed",
    "sharp_constants",
    "sphere_area",
]


@dataclass(frozen=True)
class ProblemParams:
    """The triple (N, alpha, p) with p = (2N - alpha)/(N - 4) derived.

    N must be at least 9 and alpha must lie in (0, N).  p is never stored;
    it is always recomputed from (N, alpha).
    """

    N: int
    alpha: float

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 9:
            raise ValueError(f"dimension N must be an integer >= 9, got {self.N}")
        if not 0.0 < self.alpha < self.N:
            raise ValueError(f"alpha must lie in (0, N)=(0, {self.N}), got {self.alpha}")

    @property
    def p(self) -> float:
        return (2.0 * self.N - self.alpha) / (self.N - 4.0)

    @property
    def p_ge_two(self) -> bool:
        """p >= 2 holds exactly when alpha <= 8."""
        return self.alpha <= 8.0


def log_gamma(x: float) -> float:
    """Natural log of Gamma(x) for x > 0.

    Relative error below 1e-13 on [0.5, 200].
    """
    if x <= 0.0:
        raise ValueError(f"log_gamma requires x > 0, got {x}")
    return float(gammaln(x))


def log_lambda_k(N: int, s: float, k: int) -> float:
    """log of the degree-k Funk-Hecke multiplier of the kernel |xi - eta|^(-s) on S^N."""
    if not 0.0 < s < N:
        raise ValueError(f"kernel exponent s must lie in (0, N)=(0, {N}), got {s}")
    if k < 0 or int(k) != k:
        raise ValueError(f"harmonic degree k must be a nonnegative integer, got {k}")
    return (
        (N - s) * math.log(2.0)
        + 0.5 * N * math.log(math.pi)
        + log_gamma(k + 0.5 * s)
        + log_gamma(0.5 * (N - s))
        - log_gamma(0.5 * s)
        - log_gamma(k + N - 0.5 * s)
    )


def lambda_k(N: int, s: float, k: int) -> float:
    """Funk-Hecke multiplier lambda_k(s) on S^N, evaluated in log space.

    lambda_k(s) = 2^(N-s) pi^(N/2) Gamma(k + s/2) Gamma((N-s)/2)
                  / [Gamma(s/2) Gamma(k + N - s/2)].
    """
    return math.exp(log_lambda_k(N, s, k))


def lambda_ratio(N: int, s: float, k: int) -> float:
    """Exact successive ratio lambda_{k+1}(s) / lambda_k(s) = (k + s/2)/(k + N - s/2)."""
    if not 0.0 < s < N:
        raise ValueError(f"kernel exponent s must lie in (0, N), got {s}")
    return (k + 0.5 * s) / (k + N - 0.5 * s)


def i_of_s(N: int, s: float) -> float:
    """Riesz convolution constant I(s) = pi^(N/2) Gamma((N-2s)/2) / Gamma(N-s).

    This is the constant in the closed identity
    integral |x-y|^(-2s) (1+|y|^2)^(s-N) dy = I(s) (1+|x|^2)^(-s),
    valid for 0 < s < N/2.
    """
    if not 0.0 < s < 0.5 * N:
        raise ValueError(f"i_of_s requires 0 < s < N/2 = {0.5 * N}, got {s}")
    return math.exp(
        0.5 * N * math.log(math.pi) + log_gamma(0.5 * (N - 2.0 * s)) - log_gamma(N - s)
    )


def sphere_area(n: int) -> float:
    """Surface area of the unit sphere S^(n-1) in R^n: 2 pi^(n/2) / Gamma(n/2)."""
    return math.exp(math.log(2.0) + 0.5 * n * math.log(math.pi) - log_gamma(0.5 * n))


def _log_green_constant(N: int) -> float:
    # C_N = Gamma(N/2) / (4 (N-2)(N-4) pi^(N/2)), the bilaplacian Green constant.
    return (
        log_gamma(0.5 * N)
        - math.log(4.0 * (N - 2.0) * (N - 4.0))
        - 0.5 * N * math.log(math.pi)
    )


@dataclass(frozen=True)
class AmplitudeInfo:
    """The bubble amplitude, computed three ways, with their discrepancies.

    printed        -- the general closed form with Gamma((2N-alpha)/2)
    cd_quoted      -- the alpha = 8 special form with (N-4)! (None otherwise)
    solvability    -- amplitude forced by kappa' lambda_0(N-4) lambda_0(alpha) = 1
    canonical      -- the value used downstream (the solvability one)

    The variants are reported side by side rather than silently merged; the
    discrepancies are recorded so a disagreement is visible in reports.
    """

    printed: float
    solvability: float
    rel_discrepancy: float
    cd_quoted: float | None = None
    cd_rel_discrepancy: float | None = None

    @property
    def canonical(self) -> float:
        return self.solvability


def c_n_alpha(params: ProblemParams) -> AmplitudeInfo:
    """Bubble amplitude C(N, alpha) of W(x) = C (1+|x|^2)^((4-N)/2).

    Returns the printed general form, the alpha = 8 factorial form when it
    applies, and the amplitude derived from the solvability identity
    kappa' lambda_0(N-4) lambda_0(alpha) = 1.  The three agree to rounding;
    the discrepancy fields make that checkable instead of assumed.
    """
    N, alpha = params.N, params.alpha
    p = params.p
    expo = (N - 4.0) / (2.0 * (N + 4.0 - alpha))

    log_printed = expo * (
        math.log((N + 2.0) * N * (N - 2.0) * (N - 4.0))
        + log_gamma(0.5 * (2.0 * N - alpha))
        - 0.5 * N * math.log(math.pi)
        - log_gamma(0.5 * (N - alpha))
    )
    printed = math.exp(log_printed)

    # C^(2(N+4-alpha)/(N-4)) = 2^((p-1)(N-4)) / (C_N lambda_0(N-4) lambda_0(alpha))
    log_solv = expo * (
        (p - 1.0) * (N - 4.0) * math.log(2.0)
        - _log_green_constant(N)
        - log_lambda_k(N, N - 4.0, 0)
        - log_lambda_k(N, alpha, 0)
    )
    solvability = math.exp(log_solv)
    rel = abs(printed - solvability) / solvability

    cd = None
    cd_rel = None
    if alpha == 8.0:
        log_cd = 0.5 * (
            math.log((N + 2.0) * N * (N - 2.0))
            + log_gamma(N - 3.0)  # (N-4)!
            - 0.5 * N * math.log(math.pi)
            - log_gamma(0.5 * (N - 8.0))
        )
        cd = math.exp(log_cd)
        cd_rel = abs(cd - solvability) / solvability
    return AmplitudeInfo(
        printed=printed,
        solvability=solvability,
        rel_discrepancy=rel,
        cd_quoted=cd,
        cd_rel_discrepancy=cd_rel,
    )


def norm_w_squared_closed(params: ProblemParams) -> float:
    """Closed Gamma form of ||W||^2 = integral (|x|^(-alpha) * W^p) W^p dx.

    The convolution is closed, (|.|^(-alpha) * W^p) = I(alpha/2) C^p (1+r^2)^(-alpha/2),
    and the remaining radial integral is a Beta function.
    """
    N = params.N
    amp = c_n_alpha(params).canonical
    beta_half = math.exp(2.0 * log_gamma(0.5 * N) - log_gamma(float(N))) * 0.5
    return i_of_s(N, 0.5 * params.alpha) * amp ** (2.0 * params.p) * sphere_area(N) * beta_half


@dataclass(frozen=True)
class PaperConstants:
    """Sharp constants attached to one (N, alpha) pair.

    All entries are strictly positive; S* satisfies S* = ||W||^(2-2/p).
    """

    params: ProblemParams
    C_N_alpha: float
    C_N: float
    i_alpha_half: float
    S2: float
    C_HLS: float
    Sstar: float
    amplitude: AmplitudeInfo = field(repr=False, default=None)


def sharp_constants(params: ProblemParams) -> PaperConstants:
    """All sharp constants: S2, HLS C(N, alpha) at t = r = 2N/(2N-alpha), C_N, I(alpha/2), S*.

    S* comes from the norm identity S* = ||W||^(2 - 2/p) with ||W||^2 in
    closed Gamma form.
    """
    N, alpha = params.N, params.alpha
    amp = c_n_alpha(params)
    s2 = math.exp(
        2.0 * math.log(math.pi)
        + math.log((N - 4.0) * (N - 2.0) * N * (N + 2.0))
        + (4.0 / N) * (log_gamma(0.5 * N) - log_gamma(float(N)))
    )
    c_hls = math.exp(
        0.5 * alpha * math.log(math.pi)
        + log_gamma(0.5 * (N - alpha))
        - log_gamma(N - 0.5 * alpha)
        + (-1.0 + alpha / N) * (log_gamma(0.5 * N) - log_gamma(float(N)))
    )
    sstar = norm_w_squared_closed(params) ** (1.0 - 1.0 / params.p)
    return PaperConstants(
        params=params,
        C_N_alpha=amp.canonical,
        C_N=math.exp(_log_green_constant(N)),
        i_alpha_half=i_of_s(N, 0.5 * alpha),
        S2=s2,
        C_HLS=c_hls,
        Sstar=sstar,
        amplitude=amp,
    )
