"""Large-deviations rate functions and Chernoff-style stockout bounds.

For centered per-period CGF ``phi`` and a per-period safety margin ``eps``
(one entry per commodity, over ``N`` commodities), the per-degree rate is

    R(eps) = (1/N) * max_{u >= 0} [ u . eps - phi(u) ],

and the probability that demand summed over ``L`` periods exceeds its mean by
``L * eps`` in every commodity is at most ``exp(-L * N * R(eps))``.  Rates
returned here are always per degree (per period and per commodity); bounds
multiply the ``L * N`` factor back in.

Any feasible ``u`` certifies a valid bound, so an ascent stopped early still
yields a conservative probability, only a looser one.  The numeric maximizer
is fixed-step projected gradient ascent with an additive update, projection
onto the sign cone, and a step that is halved when it would leave the CGF's
effective domain or decrease the objective.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from . import events
from .cgf import CgfEvaluator, gaussian_cgf
from .demand import GaussianModel, validate_lead_time

__all__ = [
    "RateResult",
    "SolverConfig",
    "UnreachableRateError",
    "chernoff_bound",
    "invert_rate",
    "rate_gaussian_closed",
    "rate_numeric",
]


class UnreachableRateError(ValueError):
    """No safety margin can push the bound down to the requested rate."""


@dataclass(frozen=True)
class SolverConfig:
    """Projected-gradient settings.

    ``step`` is the fixed ascent step, ``tol`` the stopping threshold on the
    l1 change of the argument between iterations, ``max_iter`` the iteration
    cap, and ``u0`` an optional starting point (defaults to all ones, pulled
    inside the effective domain when needed).
    """

    step: float = 1e-3
    tol: float = 1e-6
    max_iter: int = 1_000_000
    u0: np.ndarray | None = None

    def __post_init__(self):
        if not (self.step > 0.0 and math.isfinite(self.step)):
            raise ValueError("step must be positive")
        if not (self.tol > 0.0 and math.isfinite(self.tol)):
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")


@dataclass(frozen=True)
class RateResult:
    """Outcome of a rate maximization.

    ``rate`` is per degree: multiply by lead time and commodity count to get
    the exponent of the probability bound.  ``u_star`` is the maximizer that
    achieved it (None when the rate is infinite), ``iterations`` counts
    accepted ascent steps, and ``converged`` records whether the stopping
    rule fired before the iteration cap.
    """

    epsilon: np.ndarray
    rate: float
    u_star: np.ndarray | None
    iterations: int
    converged: bool

    def __post_init__(self):
        eps = np.asarray(self.epsilon, dtype=float).reshape(-1).copy()
        eps.setflags(write=False)
        object.__setattr__(self, "epsilon", eps)
        if self.u_star is not None:
            u = np.asarray(self.u_star, dtype=float).reshape(-1).copy()
            u.setflags(write=False)
            object.__setattr__(self, "u_star", u)

    @property
    def dim(self) -> int:
        return self.epsilon.shape[0]

    def exponent(self, lead_time: int) -> float:
        """Total bound exponent ``L * N * rate``."""
        return validate_lead_time(lead_time) * self.dim * self.rate


def _start_point(cfg: SolverConfig, cgf: CgfEvaluator, signs: np.ndarray) -> np.ndarray:
    if cfg.u0 is not None:
        v = signs * np.asarray(cfg.u0, dtype=float).reshape(-1)
        if v.shape[0] != cgf.dim:
            raise ValueError("u0 has the wrong number of coordinates")
        return np.maximum(v, 0.0)
    v = np.ones(cgf.dim)
    if cgf.domain is not None:
        for i, (lo, hi) in enumerate(cgf.domain):
            upper = hi if signs[i] > 0 else -lo
            if upper <= 0.0:
                v[i] = 0.0
            elif math.isfinite(upper):
                v[i] = min(1.0, 0.5 * upper)
    return v


def rate_numeric(
    cgf: CgfEvaluator,
    epsilon,
    config: SolverConfig | None = None,
    signs=None,
) -> RateResult:
    """Maximize ``u . eps - phi(u)`` over a sign cone by projected ascent.

    With no ``signs`` the cone is the nonnegative orthant, matching the
    event that every commodity exceeds its margin.  A +1/-1 sign vector
    instead constrains each coordinate of ``u`` to that sign, matching mixed
    exceed/stay-below events.  The update is

        u <- project( u + step * (eps - grad phi(u)) ),

    stopped when the l1 change drops below ``tol``.  The step is halved when
    a move would exit the effective domain or lower the objective; it is
    never enlarged.
    """
    cfg = config if config is not None else SolverConfig()
    eps = np.asarray(epsilon, dtype=float).reshape(-1)
    if eps.shape[0] != cgf.dim:
        raise ValueError(f"margin has {eps.shape[0]} coordinates, expected {cgf.dim}")
    if not np.all(np.isfinite(eps)):
        raise ValueError("margins must be finite")
    s = events.check_pattern(events.ORTHANT, cgf.dim, signs) if signs is not None else np.ones(cgf.dim)

    # Work on v = s * u >= 0 so the projection is a plain clamp at zero.
    def value_and_grad(v: np.ndarray):
        val, grad = cgf.value_and_gradient(s * v)
        return val, s * grad

    eps_v = s * eps
    v = _start_point(cfg, cgf, s)
    val, grad = value_and_grad(v)
    if not math.isfinite(val):
        v = np.zeros_like(v)
        val, grad = value_and_grad(v)
    obj = float(v @ eps_v) - val
    step = cfg.step
    floor = cfg.step * 2.0**-200
    iterations = 0
    converged = False
    for _ in range(cfg.max_iter):
        v_new = np.maximum(v + step * (eps_v - grad), 0.0)
        val_new, grad_new = value_and_grad(v_new)
        if not math.isfinite(val_new):
            step *= 0.5
            if step < floor:
                raise RuntimeError(
                    "step size underflowed while avoiding the CGF domain boundary"
                )
            continue
        obj_new = float(v_new @ eps_v) - val_new
        if obj_new < obj - 1e-12 * (1.0 + abs(obj)):
            step *= 0.5
            if step < floor:
                break
            continue
        delta = float(np.abs(v_new - v).sum())
        v, val, grad, obj = v_new, val_new, grad_new, obj_new
        iterations += 1
        if delta < cfg.tol:
            converged = True
            break
    return RateResult(
        epsilon=eps,
        rate=max(obj, 0.0) / cgf.dim,
        u_star=s * v,
        iterations=iterations,
        converged=converged,
    )


def rate_gaussian_closed(
    model: GaussianModel, epsilon, config: SolverConfig | None = None
) -> RateResult:
    """Gaussian rate in closed form where the orthant constraint is slack.

    The unconstrained maximizer is ``u* = Sigma^{-1} eps`` with per-degree
    rate ``eps . u* / (2 N)``.  When ``u*`` has a negative coordinate the
    constrained optimum sits on the boundary and the numeric solver takes
    over.  For singular covariance the pseudoinverse solution is used; a
    margin outside the covariance's range makes the unconstrained form
    unbounded and is reported as an infinite rate.
    """
    eps = np.asarray(epsilon, dtype=float).reshape(-1)
    n = model.dim
    if eps.shape[0] != n:
        raise ValueError(f"margin has {eps.shape[0]} coordinates, expected {n}")
    eigvals, eigvecs = np.linalg.eigh(model.covariance)
    cutoff = 1e-12 * max(float(eigvals.max(initial=0.0)), 1.0)
    live = eigvals > cutoff
    coeff = eigvecs.T @ eps
    null_part = np.where(live, 0.0, coeff)
    if np.any(np.abs(null_part) > 1e-9 * max(1.0, float(np.abs(eps).max(initial=0.0)))):
        return RateResult(epsilon=eps, rate=math.inf, u_star=None, iterations=0, converged=True)
    u = eigvecs @ np.where(live, coeff / np.where(live, eigvals, 1.0), 0.0)
    if np.all(u >= -1e-12):
        u = np.maximum(u, 0.0)
        return RateResult(
            epsilon=eps,
            rate=max(0.5 * float(eps @ u), 0.0) / n,
            u_star=u,
            iterations=0,
            converged=True,
        )
    return rate_numeric(gaussian_cgf(model), eps, config)


def _scalar_rate(cgf: CgfEvaluator, eps: float) -> tuple[float, float]:
    """Exact 1-d rate ``max_{u>=0} (u*eps - phi(u))`` for a scalar CGF.

    Solves ``phi'(u) = eps`` by bracketed root finding, which is sharp enough
    for tight inversion tolerances where fixed-step ascent is not.
    """
    if eps <= 0.0:
        return 0.0, 0.0

    def slope(v: float) -> float:
        return float(cgf.gradient(np.array([v]))[0])

    edge = math.inf if cgf.domain is None else cgf.domain[0][1]
    if math.isfinite(edge):
        if edge <= 0.0:
            return 0.0, 0.0
        if math.isfinite(cgf.value(np.array([edge]))):
            # Closed edge: the maximizer may sit on the boundary.
            if slope(edge) < eps:
                return edge * eps - cgf.value(np.array([edge])), edge
            lo, hi = 0.0, edge
        else:
            # Open edge with a pole: the slope blows up before it.
            lo, hi = 0.0, edge * 0.5
            while slope(hi) < eps:
                lo, hi = hi, edge - 0.5 * (edge - hi)
                if edge - hi <= 1e-15 * edge:
                    raise RuntimeError("could not bracket the rate maximizer")
    else:
        lo, hi = 0.0, 1.0
        while slope(hi) < eps:
            lo, hi = hi, 2.0 * hi
            if hi > 2.0**200:
                raise RuntimeError("could not bracket the rate maximizer")
    u_star = brentq(lambda v: slope(v) - eps, lo, hi, xtol=1e-15, maxiter=300)
    value = cgf.value(np.array([u_star]))
    return max(u_star * eps - value, 0.0), u_star


def _marginal_evaluator(cgf: CgfEvaluator, index: int) -> CgfEvaluator:
    """Restriction of a joint CGF to one coordinate, others held at zero."""
    basis = np.zeros(cgf.dim)
    basis[index] = 1.0
    domain = None if cgf.domain is None else (cgf.domain[index],)
    return CgfEvaluator(
        dim=1,
        domain=domain,
        model=cgf.model,
        _value=lambda u: cgf.value(basis * u[0]),
        _grad=lambda u: np.array([cgf.gradient(basis * u[0])[index]]),
    )


def _pooled_evaluator(cgf: CgfEvaluator) -> CgfEvaluator:
    """CGF of the summed (fungible) demand: ``phi_sum(v) = phi(v * ones)``."""
    ones = np.ones(cgf.dim)
    if cgf.domain is None:
        domain = None
    else:
        lo = max(interval[0] for interval in cgf.domain)
        hi = min(interval[1] for interval in cgf.domain)
        domain = ((lo, hi),)
    return CgfEvaluator(
        dim=1,
        domain=domain,
        model=cgf.model,
        _value=lambda u: cgf.value(ones * u[0]),
        _grad=lambda u: np.array([float(cgf.gradient(ones * u[0]).sum())]),
    )


def invert_rate(
    cgf: CgfEvaluator, delta: float, lead_time: int, config: SolverConfig | None = None
) -> float:
    """Smallest lead-time safety stock whose bound meets a stockout rate.

    Finds the margin ``eps >= 0`` with ``R(eps) = -log(delta) / L`` by
    bisection (the rate is nondecreasing in the margin) and returns
    ``L * eps``.  The bracket doubles upward from 1; if the target rate is
    still out of reach at a margin of 2**60 the demand cannot be certified
    at that rate and an error is raised.
    """
    lead = validate_lead_time(lead_time)
    if cgf.dim != 1:
        raise ValueError("rate inversion requires a single-commodity CGF")
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie strictly between 0 and 1")
    target = -math.log(delta) / lead
    if target == 0.0:
        return 0.0
    hi = 1.0
    while _scalar_rate(cgf, hi)[0] < target:
        hi *= 2.0
        if hi > 2.0**60:
            raise UnreachableRateError("unreachable stockout rate for this demand model")
    lo = 0.0
    residual = math.inf
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        rate = _scalar_rate(cgf, mid)[0]
        residual = abs(rate - target)
        if residual < 1e-10:
            return lead * mid
        if rate < target:
            lo = mid
        else:
            hi = mid
    raise RuntimeError(f"rate inversion stalled; residual {residual:.3e}")


def chernoff_bound(
    cgf: CgfEvaluator,
    epsilon,
    lead_time: int,
    pattern: str = events.ALL_EXCEED,
    signs=None,
    config: SolverConfig | None = None,
) -> float:
    """Upper bound on the probability of a stockout pattern.

    Margins are per period: the bounded event compares lead-time demand
    against ``L * (mean + epsilon)``.  Patterns:

    - ``all_exceed``: every commodity exceeds; ``exp(-L * N * R(eps))``.
    - ``orthant``: exceed where sign is +1, stay below where -1.
    - ``union`` (two commodities): either commodity exceeds; the sum of a
      single-commodity bound for the first and a mixed-sign bound for the
      event that the second exceeds while the first does not.
    - ``fungible``: pooled demand exceeds a single scalar margin, using the
      CGF of the summed demand.

    A nonpositive margin in every coordinate gives the trivial bound 1.
    """
    lead = validate_lead_time(lead_time)
    if pattern == events.FUNGIBLE:
        eps = float(np.asarray(epsilon, dtype=float).reshape(()))
        rate, _ = _scalar_rate(_pooled_evaluator(cgf), eps)
        return min(1.0, math.exp(-lead * rate))
    eps = np.asarray(epsilon, dtype=float).reshape(-1)
    events.check_pattern(pattern, cgf.dim, signs)
    if pattern == events.ALL_EXCEED:
        result = rate_numeric(cgf, eps, config)
        return min(1.0, math.exp(-result.exponent(lead)))
    if pattern == events.ORTHANT:
        result = rate_numeric(cgf, eps, config, signs=signs)
        return min(1.0, math.exp(-result.exponent(lead)))
    if pattern == events.UNION:
        first_rate, _ = _scalar_rate(_marginal_evaluator(cgf, 0), eps[0])
        mixed = rate_numeric(cgf, eps, config, signs=np.array([-1.0, 1.0]))
        return min(1.0, math.exp(-lead * first_rate) + math.exp(-mixed.exponent(lead)))
    raise ValueError(f"unknown stockout pattern {pattern!r}")
