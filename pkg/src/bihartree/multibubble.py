"""Polygonal bubble configurations and the finite-dimensional reduced equations.

m bubbles sit at the vertices of a regular m-gon of radius r_bar in the first
two coordinates, sharing x_bar'' and the scale beta.  The reduced system
couples the critical-point equations of r^4 V(r, x'') with the beta-balance
between the potential term A1 V / t^5 and the aggregated interaction
A3 / t^(N-3), t = beta m^(-(N-4)/(N-8)).
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field, replace

import numpy as np

from .quad import DEFAULT_SPEC, QuadratureError, QuadratureSpec, bipolar_self_test, radial_integral, two_center_integral
from .specfun import ProblemParams, c_n_alpha, i_of_s, log_gamma, sphere_area

__all__ = [
    "ParseError",
    "EvaluationError",
    "SolverError",
    "PotentialModel",
    "parse_potential",
    "load_potential_config",
    "PolygonConfig",
    "InteractionConstants",
    "polygon_sum",
    "polygon_sum_direct",
    "constant_A1",
    "pair_interaction",
    "constant_A2",
    "interaction_constants",
    "reduced_residuals",
    "solve_reduced",
    "alpha_range_guard",
]


# ---------------------------------------------------------------------------
# Potential expression parser (recursive descent)
# ---------------------------------------------------------------------------


class ParseError(ValueError):
    """Syntax error with a 1-based source position."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


class EvaluationError(ArithmeticError):
    """Runtime failure while evaluating a potential (e.g. division by zero)."""


_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>\d+(?:\.\d*)?(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()]))"
)


def _tokenize(source: str):
    tokens = []
    pos = 0
    while pos < len(source):
        match = _TOKEN_RE.match(source, pos)
        if match is None:
            stripped = source[pos:].lstrip()
            if not stripped:
                break
            bad_at = len(source) - len(stripped) + 1
            raise ParseError(f"unexpected character {stripped[0]!r}", bad_at)
        kind = match.lastgroup
        text = match.group(kind)
        tokens.append((kind, text, match.start(kind) + 1))
        pos = match.end()
    tokens.append(("end", "", len(source) + 1))
    return tokens


_VAR_RE = re.compile(r"^(?:r|x(?P<idx>\d+))$")


class _Parser:
    def __init__(self, source: str):
        self.tokens = _tokenize(source)
        self.i = 0

    def _peek(self):
        return self.tokens[self.i]

    def _next(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def _prev_pos(self):
        # position of the last real token before the current one (for EOF errors)
        return self.tokens[max(self.i - 2, 0)][2]

    def parse(self):
        node = self.expr()
        kind, text, pos = self._peek()
        if kind != "end":
            raise ParseError(f"unexpected token {text!r}", pos)
        return node

    def expr(self):
        node = self.term()
        while True:
            kind, text, pos = self._peek()
            if kind == "op" and text in "+-":
                self._next()
                node = (text, node, self.term())
            else:
                return node

    def term(self):
        node = self.unary()
        while True:
            kind, text, pos = self._peek()
            if kind == "op" and text in "*/":
                self._next()
                node = (text, node, self.unary())
            else:
                return node

    def unary(self):
        kind, text, pos = self._peek()
        if kind == "op" and text == "-":
            self._next()
            return ("neg", self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        kind, text, pos = self._peek()
        if kind == "op" and text == "^":
            self._next()
            return ("^", base, self.unary())
        return base

    def atom(self):
        kind, text, pos = self._next()
        if kind == "num":
            return ("num", float(text))
        if kind == "ident":
            if text == "exp":
                k2, t2, p2 = self._next()
                if not (k2 == "op" and t2 == "("):
                    raise ParseError("expected '(' after exp", p2 if k2 != "end" else pos)
                arg = self.expr()
                k3, t3, p3 = self._next()
                if not (k3 == "op" and t3 == ")"):
                    raise ParseError("expected ')'", p3 if k3 != "end" else self._prev_pos())
                return ("call", "exp", arg)
            match = _VAR_RE.match(text)
            if match is None or (match.group("idx") is not None and int(match.group("idx")) < 3):
                raise ParseError(f"unknown identifier {text!r}", pos)
            return ("var", text)
        if kind == "op" and text == "(":
            node = self.expr()
            k2, t2, p2 = self._next()
            if not (k2 == "op" and t2 == ")"):
                raise ParseError("expected ')'", p2 if k2 != "end" else self._prev_pos())
            return node
        if kind == "end":
            raise ParseError("unexpected end of expression", self._prev_pos())
        raise ParseError(f"unexpected token {text!r}", pos)


def _eval_node(node, env):
    op = node[0]
    if op == "num":
        return node[1]
    if op == "var":
        try:
            return env[node[1]]
        except KeyError:
            raise EvaluationError(f"variable {node[1]!r} has no value for this dimension") from None
    if op == "neg":
        return -_eval_node(node[1], env)
    if op == "call":
        return math.exp(_eval_node(node[2], env))
    left = _eval_node(node[1], env)
    right = _eval_node(node[2], env)
    if op == "+":
        return left + right
    if op == "-":
        return left - right
    if op == "*":
        return left * right
    if op == "/":
        if right == 0.0:
            raise EvaluationError("division by zero while evaluating the potential")
        return left / right
    if op == "^":
        return left**right
    raise AssertionError(f"unknown node {op!r}")


def _var_indices(node, found):
    op = node[0]
    if op == "var":
        if node[1] != "r":
            found.add(int(node[1][1:]))
    elif op in ("neg",):
        _var_indices(node[1], found)
    elif op == "call":
        _var_indices(node[2], found)
    elif op in ("+", "-", "*", "/", "^"):
        _var_indices(node[1], found)
        _var_indices(node[2], found)


@dataclass(frozen=True)
class PotentialModel:
    """A parsed axisymmetric potential V(r, x3..xN).

    Evaluation is exact on the parsed tree; gradients and Hessians of both V
    and r^4 V come from central differences (cached per point).  The model is
    immutable after parsing and safe to share.
    """

    expression: str
    ast: tuple = field(repr=False, default=None)
    grad_step: float = 1e-5
    hess_step: float = 1e-4

    def __post_init__(self):
        if self.ast is None:
            object.__setattr__(self, "ast", _Parser(self.expression).parse())
        object.__setattr__(self, "_cache", {})
        found = set()
        _var_indices(self.ast, found)
        object.__setattr__(self, "max_x_index", max(found) if found else 2)

    def evaluate(self, r: float, xpp) -> float:
        xpp = np.atleast_1d(np.asarray(xpp, dtype=float))
        if self.max_x_index - 2 > xpp.shape[0]:
            raise EvaluationError(
                f"potential uses x{self.max_x_index} but only {xpp.shape[0]} transverse coordinates given"
            )
        env = {"r": float(r)}
        for i, v in enumerate(xpp):
            env[f"x{i + 3}"] = float(v)
        return float(_eval_node(self.ast, env))

    __call__ = evaluate

    def rv4(self, r: float, xpp) -> float:
        """r^4 V(r, x'') whose critical points locate the bubble circle."""
        return r**4 * self.evaluate(r, xpp)

    def grad_rv4(self, r: float, xpp) -> np.ndarray:
        """Central-difference gradient of r^4 V in (r, x'')."""
        xpp = np.atleast_1d(np.asarray(xpp, dtype=float))
        key = ("g", float(r), tuple(xpp))
        cached = self._cache.get(key)
        if cached is not None:
            return cached.copy()
        h = self.grad_step
        point = np.concatenate([[r], xpp])
        grad = np.empty_like(point)
        for i in range(point.shape[0]):
            step = h * max(1.0, abs(point[i]))
            plus = point.copy()
            minus = point.copy()
            plus[i] += step
            minus[i] -= step
            grad[i] = (self.rv4(plus[0], plus[1:]) - self.rv4(minus[0], minus[1:])) / (2.0 * step)
        self._cache[key] = grad
        return grad.copy()

    def hess_rv4(self, r: float, xpp) -> np.ndarray:
        """Central-difference Hessian of r^4 V in (r, x'')."""
        xpp = np.atleast_1d(np.asarray(xpp, dtype=float))
        key = ("h", float(r), tuple(xpp))
        cached = self._cache.get(key)
        if cached is not None:
            return cached.copy()
        h = self.hess_step
        point = np.concatenate([[r], xpp])
        n = point.shape[0]
        hess = np.empty((n, n))
        for i in range(n):
            step = h * max(1.0, abs(point[i]))
            plus = point.copy()
            minus = point.copy()
            plus[i] += step
            minus[i] -= step
            gp = self._grad_at(plus)
            gm = self._grad_at(minus)
            hess[i] = (gp - gm) / (2.0 * step)
        hess = 0.5 * (hess + hess.T)
        self._cache[key] = hess
        return hess.copy()

    def _grad_at(self, point):
        return self.grad_rv4(point[0], point[1:])

    def grad_V(self, r: float, xpp) -> np.ndarray:
        xpp = np.atleast_1d(np.asarray(xpp, dtype=float))
        h = self.grad_step
        point = np.concatenate([[r], xpp])
        grad = np.empty_like(point)
        for i in range(point.shape[0]):
            step = h * max(1.0, abs(point[i]))
            plus = point.copy()
            minus = point.copy()
            plus[i] += step
            minus[i] -= step
            grad[i] = (self.evaluate(plus[0], plus[1:]) - self.evaluate(minus[0], minus[1:])) / (2.0 * step)
        return grad


def parse_potential(source: str) -> PotentialModel:
    """Parse an arithmetic expression in r, x3..xN with +, -, *, /, ^ and exp."""
    return PotentialModel(expression=source)


def load_potential_config(path) -> dict:
    """Load a potential run configuration from JSON.

    Schema::

        {
          "expression": "(1 + (r-2)^2 + (x3-1)^2) / r^4",
          "box": {"r": [lo, hi], "xpp_center": [...], "xpp_radius": rho},
          "constants": {"L0": ..., "L1": ...}
        }

    Returns a dict with keys model, box, L0, L1.
    """
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    for key in ("expression", "box"):
        if key not in raw:
            raise ValueError(f"potential config is missing the {key!r} field")
    box = raw["box"]
    for key in ("r", "xpp_center", "xpp_radius"):
        if key not in box:
            raise ValueError(f"potential config box is missing the {key!r} field")
    lo, hi = float(box["r"][0]), float(box["r"][1])
    if not 0.0 < lo < hi:
        raise ValueError(f"box r-range must satisfy 0 < lo < hi, got [{lo}, {hi}]")
    consts = raw.get("constants", {})
    return {
        "model": parse_potential(raw["expression"]),
        "box": {
            "r": (lo, hi),
            "xpp_center": np.asarray(box["xpp_center"], dtype=float),
            "xpp_radius": float(box["xpp_radius"]),
        },
        "L0": float(consts.get("L0", 1e-3)),
        "L1": float(consts.get("L1", 1e3)),
    }


# ---------------------------------------------------------------------------
# Polygon configurations and interaction constants
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PolygonConfig:
    """m bubbles on the circle of radius r_bar in the x'-plane, shared x'' and beta."""

    m: int
    r_bar: float
    x_bar_pp: np.ndarray
    beta: float
    params: ProblemParams

    def __post_init__(self):
        if self.m < 2:
            raise ValueError(f"need at least two bubbles, got m = {self.m}")
        if self.r_bar <= 0.0 or self.beta <= 0.0:
            raise ValueError("r_bar and beta must be positive")
        xpp = np.asarray(self.x_bar_pp, dtype=float)
        if xpp.shape != (self.params.N - 2,):
            raise ValueError(f"x_bar_pp must have shape ({self.params.N - 2},), got {xpp.shape}")
        object.__setattr__(self, "x_bar_pp", xpp)

    def centers(self) -> np.ndarray:
        """z_j = (r cos(2(j-1)pi/m), r sin(2(j-1)pi/m), x''), j = 1..m."""
        angles = 2.0 * np.pi * np.arange(self.m) / self.m
        out = np.empty((self.m, self.params.N))
        out[:, 0] = self.r_bar * np.cos(angles)
        out[:, 1] = self.r_bar * np.sin(angles)
        out[:, 2:] = self.x_bar_pp
        return out

    @property
    def t(self) -> float:
        """The normalized scale t = beta m^(-(N-4)/(N-8))."""
        N = self.params.N
        return self.beta * self.m ** (-(N - 4.0) / (N - 8.0))


def polygon_sum(config: PolygonConfig) -> float:
    """sum_{j>=2} |z_1 - z_j|^(4-N) = (2 r)^(4-N) sum_j sin(j pi/m)^(4-N)."""
    N = config.params.N
    j = np.arange(1, config.m)
    terms = np.sin(j * np.pi / config.m) ** (-(N - 4.0))
    return (2.0 * config.r_bar) ** (-(N - 4.0)) * float(np.sum(terms))


def polygon_sum_direct(config: PolygonConfig) -> float:
    """Same sum from explicit pairwise coordinate distances (exactness oracle)."""
    centers = config.centers()
    d = np.linalg.norm(centers[1:] - centers[0], axis=1)
    return float(np.sum(d ** (-(config.params.N - 4.0))))


@dataclass(frozen=True)
class InteractionConstants:
    """A1 = int W^2, A2 = pair-interaction coefficient, A3 = polygon aggregate.

    A3 depends on (m, r_bar) and is frozen per configuration:
    A3 = A2 * polygon_sum(config) / m^(N-4).
    """

    A1: float
    A2: float
    A3: float | None = None
    A2_rel_uncertainty: float = 0.0

    def __post_init__(self):
        if self.A1 <= 0.0 or self.A2 <= 0.0:
            raise ValueError("interaction constants must be positive")

    def a3_for(self, config: PolygonConfig) -> float:
        N = config.params.N
        return self.A2 * polygon_sum(config) / config.m ** (N - 4.0)


def constant_A1(
    params: ProblemParams, spec: QuadratureSpec = DEFAULT_SPEC, cross_check: bool = True
) -> float:
    """A1 = int W_{0,1}^2 dx = C^2 pi^(N/2) Gamma((N-8)/2) / Gamma(N-4).

    When cross_check is set the Beta closed form must agree with the adaptive
    radial quadrature to 1e-8.
    """
    N = params.N
    if N < 9:
        raise ValueError("the squared-bubble integral needs N >= 9")
    amp = c_n_alpha(params).canonical
    closed = amp**2 * math.exp(
        0.5 * N * math.log(math.pi) + log_gamma(0.5 * (N - 8.0)) - log_gamma(N - 4.0)
    )
    if cross_check:
        quadr = radial_integral(lambda r: (amp * (1.0 + r * r) ** (-0.5 * (N - 4.0))) ** 2, N, spec)
        if abs(quadr - closed) > 1e-8 * closed:
            raise QuadratureError(
                f"A1 quadrature cross-check failed: {quadr} vs {closed}", best_estimate=quadr
            )
    return closed


@dataclass(frozen=True)
class PairInteraction:
    """The two channels of the derivative-in-beta pair interaction at separation d."""

    d: float
    beta: float
    local: float
    nonlocal_: float

    @property
    def total(self) -> float:
        return self.local + self.nonlocal_


def pair_interaction(
    params: ProblemParams, d: float, beta: float = 1.0, spec: QuadratureSpec = DEFAULT_SPEC
) -> PairInteraction:
    """P(d) = p I_nl + (p-1) I_loc for two unit bubbles at distance d.

    I_loc = int (|.|^-a * W^p) W^(p-2) (d_beta W) W_2 and I_nl is the
    channel with the perturbation inside the convolution, evaluated through
    the exact beta-derivative of the closed convolution.  Both reduce to the
    same radial shape (1-u^2)(1+u^2)^(-(N+6)/2) against the far bubble, and
    both scale as beta^(3-N) d^(4-N).
    """
    N, alpha, p = params.N, params.alpha, params.p
    bipolar_self_test(N, spec)
    amp = c_n_alpha(params).canonical
    conv_const = i_of_s(N, 0.5 * alpha) * amp**p

    shape = lambda u: (1.0 - u * u) * (1.0 + u * u) ** (-0.5 * (N + 6.0))
    far = lambda v: amp * (1.0 + v * v) ** (-0.5 * (N - 4.0))
    core = two_center_integral(shape, far, beta * d, N, spec) / beta

    pref = conv_const * amp ** (p - 1.0)
    local = pref * 0.5 * (N - 4.0) * core * (p - 1.0)
    nonlocal_ = pref * 0.5 * alpha * core
    return PairInteraction(d=d, beta=beta, local=local, nonlocal_=nonlocal_)


_A2_DISTANCES = (8.0, 16.0, 32.0, 64.0)


@dataclass(frozen=True)
class A2Estimate:
    value: float
    rel_uncertainty: float
    distances: tuple
    scaled_values: tuple


def constant_A2(params: ProblemParams, spec: QuadratureSpec = DEFAULT_SPEC) -> A2Estimate:
    """A2 as the d -> infinity limit of -d^(N-4) P(d), Richardson-extrapolated.

    P(d) expands in even powers of 1/d (odd moments of the radial shape
    vanish), so the extrapolation steps eliminate 1/d^2, 1/d^4, ... over the
    dyadic distance ladder.  Raises when the extrapolation is not stable to 1%.
    """
    N = params.N
    ds = _A2_DISTANCES
    ys = []
    for d in ds:
        pi = pair_interaction(params, d, 1.0, spec)
        ys.append(-(d ** (N - 4.0)) * pi.total)
    table = [list(ys)]
    level = 1
    while len(table[-1]) > 1:
        fac = 4.0**level
        prev = table[-1]
        table.append([(fac * prev[i + 1] - prev[i]) / (fac - 1.0) for i in range(len(prev) - 1)])
        level += 1
    best = table[-1][0]
    prev_best = table[-2][-1]
    unc = abs(best - prev_best) / abs(best)
    if not (best > 0.0 and unc < 0.01):
        raise QuadratureError(
            "pair-interaction extrapolation did not stabilize to 1%",
            best_estimate=best,
            err_estimate=unc,
            profile={"distances": ds, "scaled_values": tuple(ys)},
        )
    return A2Estimate(
        value=best, rel_uncertainty=unc, distances=ds, scaled_values=tuple(ys)
    )


def interaction_constants(
    params: ProblemParams, spec: QuadratureSpec = DEFAULT_SPEC
) -> InteractionConstants:
    a2 = constant_A2(params, spec)
    return InteractionConstants(
        A1=constant_A1(params, spec),
        A2=a2.value,
        A2_rel_uncertainty=a2.rel_uncertainty,
    )


# ---------------------------------------------------------------------------
# Reduced equations and the damped-Newton solver
# ---------------------------------------------------------------------------


def alpha_range_guard(params: ProblemParams) -> bool:
    """True when alpha >= 6 - 12/(N-4), the range where the reduction closes."""
    return params.alpha >= 6.0 - 12.0 / (params.N - 4.0)


def reduced_residuals(
    config: PolygonConfig, V: PotentialModel, consts: InteractionConstants
) -> np.ndarray:
    """Residual vector [d(r^4 V)/dr, d(r^4 V)/dx'' (N-2 entries), -A1 V/t^5 + A3/t^(N-3)].

    t = beta m^(-(N-4)/(N-8)) and A3 is frozen at the configuration's r_bar.
    """
    r, xpp = config.r_bar, config.x_bar_pp
    v = V.evaluate(r, xpp)
    if v <= 0.0:
        raise ValueError(f"potential must be positive at the probe, got V({r}, {xpp}) = {v}")
    N = config.params.N
    t = config.t
    a3 = consts.a3_for(config)
    out = np.empty(N)
    out[: N - 1] = V.grad_rv4(r, xpp)
    out[N - 1] = -consts.A1 * v / t**5 + a3 / t ** (N - 3.0)
    return out


class SolverError(RuntimeError):
    """Newton failure carrying the iteration trace."""

    def __init__(self, message, trace=None, condition=None):
        super().__init__(message)
        self.trace = trace or []
        self.condition = condition


def _balance_residual(w, V, consts, config0):
    """Equilibrated residual: last row scaled by t^5/A1 so all entries are O(V)."""
    N = config0.params.N
    r, xpp, t = w[0], w[1 : N - 1], w[N - 1]
    config = replace(config0, r_bar=r, x_bar_pp=xpp, beta=t * config0.m ** ((N - 4.0) / (N - 8.0)))
    v = V.evaluate(r, xpp)
    if v <= 0.0:
        raise ValueError(f"potential must be positive on the Newton path, got {v}")
    a3 = consts.a3_for(config)
    res = np.empty(N)
    res[: N - 1] = V.grad_rv4(r, xpp)
    res[N - 1] = a3 / (consts.A1 * t ** (N - 8.0)) - v
    return res, config


def _balance_jacobian(w, V, consts, config0):
    N = config0.params.N
    r, xpp, t = w[0], w[1 : N - 1], w[N - 1]
    config = replace(config0, r_bar=r, x_bar_pp=xpp, beta=t * config0.m ** ((N - 4.0) / (N - 8.0)))
    a3 = consts.a3_for(config)
    jac = np.zeros((N, N))
    jac[: N - 1, : N - 1] = V.hess_rv4(r, xpp)
    grad_v = V.grad_V(r, xpp)
    # a3 ~ r^(4-N); the scaled beta-balance row is a3/(A1 t^(N-8)) - V
    jac[N - 1, 0] = -(N - 4.0) * a3 / (consts.A1 * t ** (N - 8.0) * r) - grad_v[0]
    jac[N - 1, 1 : N - 1] = -grad_v[1:]
    jac[N - 1, N - 1] = -(N - 8.0) * a3 / (consts.A1 * t ** (N - 7.0))
    return jac


def solve_reduced(
    V: PotentialModel,
    m: int,
    initial: PolygonConfig,
    consts: InteractionConstants,
    L0: float = 1e-3,
    L1: float = 1e3,
    box: dict | None = None,
    tol: float = 1e-10,
    max_iter: int = 60,
) -> tuple[PolygonConfig, dict]:
    """Damped Newton on the reduced equations; returns (solution, report).

    The beta-balance row is equilibrated by t^5/A1 internally so the
    convergence test sup|residual| < tol is meaningful across rows; the
    report carries the raw-form residual as well.  Armijo backtracking
    halves the step at most 40 times.  The topological-degree entry is a
    boundary sign-sampling heuristic, not a certificate.
    """
    config0 = replace(initial, m=m)
    N = config0.params.N
    w = np.empty(N)
    w[0] = config0.r_bar
    w[1 : N - 1] = config0.x_bar_pp
    w[N - 1] = config0.t

    trace = []
    converged = False
    for it in range(max_iter):
        try:
            res, config = _balance_residual(w, V, consts, config0)
        except (ValueError, EvaluationError) as exc:
            raise SolverError(f"residual evaluation failed: {exc}", trace=trace) from exc
        norm = float(np.max(np.abs(res)))
        trace.append({"iter": it, "w": w.copy().tolist(), "residual_sup": norm})
        if norm < tol:
            converged = True
            break
        jac = _balance_jacobian(w, V, consts, config0)
        cond = float(np.linalg.cond(jac))
        if not np.isfinite(cond) or cond > 1e12:
            raise SolverError(
                f"degenerate Jacobian (condition number {cond:.3e})", trace=trace, condition=cond
            )
        step = np.linalg.solve(jac, -res)
        # Armijo backtracking on the squared residual norm, factor 1/2.
        merit0 = float(np.dot(res, res))
        lam = 1.0
        accepted = False
        for _ in range(40):
            w_try = w + lam * step
            if w_try[0] > 0.0 and w_try[N - 1] > 0.0:
                try:
                    res_try, _ = _balance_residual(w_try, V, consts, config0)
                except (ValueError, EvaluationError):
                    res_try = None
                if res_try is not None and float(np.dot(res_try, res_try)) <= merit0 * (
                    1.0 - 1e-4 * lam
                ):
                    accepted = True
                    break
            lam *= 0.5
        if not accepted:
            raise SolverError("Armijo line search stalled (no descent step)", trace=trace)
        w = w + lam * step

    if not converged:
        raise SolverError(f"Newton did not converge in {max_iter} iterations", trace=trace)

    t_star = float(w[N - 1])
    beta_star = t_star * m ** ((N - 4.0) / (N - 8.0))
    solution = replace(config0, r_bar=float(w[0]), x_bar_pp=w[1 : N - 1].copy(), beta=beta_star)
    raw = reduced_residuals(solution, V, consts)
    report = {
        "converged": True,
        "iterations": len(trace),
        "residual_sup_equilibrated": trace[-1]["residual_sup"],
        "raw_residual": raw.tolist(),
        "t_star": t_star,
        "beta_star": beta_star,
        "t_in_range": bool(L0 <= t_star <= L1),
        "L0": L0,
        "L1": L1,
        "alpha_range_ok": alpha_range_guard(config0.params),
        "trace": trace,
    }
    if box is not None:
        report["degree"] = degree_heuristic(V, box)
    return solution, report


def degree_heuristic(V: PotentialModel, box: dict, samples_per_face: int = 40, seed: int = 7) -> dict:
    """Boundary sign-sampling of grad(r^4 V) over the box plus a Hessian orientation.

    The estimate is sign(det Hess(r^4 V)) at the box center provided the
    gradient never vanishes on the sampled boundary.  Heuristic only.
    """
    rng = np.random.default_rng(seed)
    r_lo, r_hi = box["r"]
    center = np.asarray(box["xpp_center"], dtype=float)
    radius = float(box["xpp_radius"])
    dim = 1 + center.shape[0]

    min_norm = np.inf
    for face_axis in range(dim):
        for side in (-1.0, 1.0):
            for _ in range(samples_per_face):
                pt = np.empty(dim)
                pt[0] = rng.uniform(r_lo, r_hi)
                pt[1:] = center + radius * rng.uniform(-1.0, 1.0, size=dim - 1)
                if face_axis == 0:
                    pt[0] = r_lo if side < 0 else r_hi
                else:
                    pt[face_axis] = center[face_axis - 1] + side * radius
                g = V.grad_rv4(pt[0], pt[1:])
                min_norm = min(min_norm, float(np.linalg.norm(g)))
    r_mid = 0.5 * (r_lo + r_hi)
    hess = V.hess_rv4(r_mid, center)
    det = float(np.linalg.det(hess))
    nonvanishing = bool(min_norm > 0.0)
    return {
        "heuristic": True,
        "boundary_min_grad_norm": float(min_norm),
        "boundary_nonvanishing": nonvanishing,
        "hessian_det_sign": int(np.sign(det)),
        "degree_estimate": int(np.sign(det)) if nonvanishing else 0,
    }
