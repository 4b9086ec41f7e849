"""Discrete weighted Minkowski problem.

Given masses mu_i on directions v_i of the open polar cap, find support
numbers h so that the Wulff shape [h] has weighted surface-area measure mu.
The solver maximizes the 0-homogeneous functional

    F(h) = Vbar([h]) ** (-1/(n-q)) * sum_i h_i mu_i

by projected gradient ascent.  The derivative of Vbar([h]) in h_i is the
facet mass S_i, so stationary points satisfy mu = lam * S([h]) with
lam = sum(h mu) / ((n-q) Vbar), and the (n-1-q)-homogeneity of S turns h into
the solution h_tilde = lam ** (1/(n-1-q)) * h.
"""

from dataclasses import dataclass
import math

import numpy as np

from .errors import ValidationError, ExponentOutOfRange, NotConverged, EmptyWulff
from .pseudocone import WulffShape, distance_from_origin
from .weighted_functionals import DiscreteMeasure, covolume, surface_area_measure
from .weights import WeightSpec

__all__ = ["SolverConfig", "SolverReport", "objective", "variational_gradient",
           "support_consistent_projection", "solve"]

_ARMIJO = 1e-4
_ASCENT_SLACK = 1e-12


@dataclass(frozen=True)
class SolverConfig:
    max_iters: int = 500
    grad_tol: float = 1e-6
    step0: float = 0.1
    backtrack: float = 0.5
    normalization: str = "covolume_one"
    seed: int = 0
    init: str = "uniform"

    def __post_init__(self):
        if not (self.max_iters > 0 and self.grad_tol > 0 and self.step0 > 0):
            raise ValidationError("max_iters, grad_tol and step0 must be positive")
        if not 0 < self.backtrack < 1:
            raise ValidationError("backtrack factor must lie in (0, 1)")
        if self.normalization not in ("covolume_one", "mass_one"):
            raise ValidationError("normalization must be covolume_one or mass_one")
        if self.init not in ("uniform", "random"):
            raise ValidationError("init must be uniform or random")
        if self.seed < 0:
            raise ValidationError("seed must be nonnegative")

    @classmethod
    def from_json(cls, spec):
        try:
            return cls(**spec)
        except TypeError as exc:
            raise ValidationError("bad solver config: %s" % exc) from None


@dataclass
class SolverReport:
    h_tilde: np.ndarray
    lambda_: float
    residual: float
    objective_trace: list
    iterations: int
    converged: bool
    h: np.ndarray = None
    normalization: str = "covolume_one"
    inner_distance: float = float("nan")

    def to_json(self):
        return {
            "converged": bool(self.converged),
            "h_tilde": [float(x) for x in self.h_tilde],
            "inner_distance": float(self.inner_distance),
            "iterations": int(self.iterations),
            "lambda": float(self.lambda_),
            "normalization": self.normalization,
            "objective_trace": [float(x) for x in self.objective_trace],
            "residual": float(self.residual),
        }


def _check(mu, theta, cone):
    if not isinstance(mu, DiscreteMeasure):
        raise ValidationError("datum must be a DiscreteMeasure")
    if not isinstance(theta, WeightSpec):
        raise ValidationError("weight must be a WeightSpec")
    n, q = cone.dim, theta.q
    if not 0 <= q < n - 1:
        raise ExponentOutOfRange("the discrete Minkowski solver needs 0 <= q < n-1")
    mu.validate(cone)
    return n, q


def _positive(h, m):
    h = np.asarray(h, dtype=float).ravel()
    if h.size != m:
        raise ValidationError("h must have one entry per direction")
    if not np.all(np.isfinite(h)) or np.any(h <= 0):
        raise ValidationError("h must be positive")
    return h


class _State:
    """Facet masses, co-volume and objective of one iterate."""

    def __init__(self, h, mu, theta, cone, S=None):
        n, q = cone.dim, theta.q
        self.args = (mu, theta, cone)
        self.h = h
        if S is None:
            S = surface_area_measure(WulffShape(cone, mu.directions, h, check=False), theta).masses
        self.S = S
        # divergence theorem: Vbar = (1/(n-q)) sum h_i S_i, exact for every h > 0
        self.vbar = float(h @ S) / (n - q)
        if not self.vbar > 0:
            raise EmptyWulff("Wulff shape has zero co-volume")
        self.mass = float(h @ mu.masses)
        p = n - q
        self.F = self.vbar ** (-1.0 / p) * self.mass
        self.grad = self.vbar ** (-1.0 / p) * (mu.masses - self.mass / (p * self.vbar) * S)
        self.lam = self.mass / (p * self.vbar)

    def scaled(self, t):
        mu, theta, cone = self.args
        return _State(t * self.h, mu, theta, cone, S=t ** (cone.dim - 1 - theta.q) * self.S)


def objective(h, mu, theta, cone):
    """F(h); the co-volume comes from the cap quadrature, independent of the facet masses."""
    n, q = _check(mu, theta, cone)
    h = _positive(h, len(mu))
    E = WulffShape(cone, mu.directions, h, check=False)
    vbar = float(covolume(E, theta).value)
    if not vbar > 0:
        raise EmptyWulff("Wulff shape has zero co-volume")
    return vbar ** (-1.0 / (n - q)) * float(h @ mu.masses)


def variational_gradient(h, mu, theta, cone):
    """dF/dh_i, using dVbar/dh_i = S_i([h])."""
    _check(mu, theta, cone)
    return _State(_positive(h, len(mu)), mu, theta, cone).grad


def support_consistent_projection(h, cone, directions, masses=None):
    """Replace each h_i by hbar_[h](v_i) >= h_i.  Facets with positive mass are
    already supporting and are skipped when their masses are supplied."""
    V = np.atleast_2d(np.asarray(directions, dtype=float))
    h = _positive(h, len(V))
    E = WulffShape(cone, V, h, check=False)
    out = h.copy()
    idx = np.arange(len(h)) if masses is None else np.flatnonzero(np.asarray(masses) <= 0)
    if len(idx):
        lifted = -E.exact_support(E.directions[idx])
        out[idx] = np.maximum(h[idx], lifted)
    return out


def _normalize(st, how):
    mu, theta, cone = st.args
    if how == "mass_one":
        return st.scaled(1.0 / st.mass)
    return st.scaled(st.vbar ** (-1.0 / (cone.dim - theta.q)))


def _initial(mu, cone, config):
    m = len(mu)
    h = np.ones(m)
    if config.init == "random":
        rng = np.random.default_rng(config.seed)
        h = np.exp(0.5 * rng.standard_normal(m))
    return h


def solve(mu, theta, cone, config=None, h0=None):
    """Projected-gradient ascent on F; raises NotConverged (carrying the report) on failure."""
    config = config or SolverConfig()
    n, q = _check(mu, theta, cone)
    p = n - q
    h = _initial(mu, cone, config) if h0 is None else _positive(h0, len(mu))

    def prepare(h):
        st = _State(h, mu, theta, cone)
        lifted = support_consistent_projection(h, cone, mu.directions, st.S)
        if np.any(lifted != h):
            st = _State(lifted, mu, theta, cone)
        return _normalize(st, config.normalization)

    def residual(st):
        return float(np.max(np.abs(st.lam * st.S - mu.masses)) / np.max(np.abs(mu.masses)))

    st = prepare(h)
    trace = [st.F]
    step = None
    it = 0
    res = residual(st)
    converged = res <= config.grad_tol
    prev = None
    while not converged and it < config.max_iters:
        it += 1
        g = st.grad
        if step is None:
            step = config.step0 * np.max(st.h) / max(np.max(np.abs(g)), 1e-300)
        elif prev is not None:
            s, y = st.h - prev.h, g - prev.grad
            sy = float(s @ y)
            # Barzilai-Borwein on the concave side: -s.s / s.y > 0
            step = float(s @ s) / -sy if sy < 0 else 2 * step
        accepted = None
        a = step
        for _ in range(60):
            trial = np.maximum(st.h + a * g, 0.1 * st.h)
            try:
                cand = prepare(trial)
            except EmptyWulff:
                cand = None
            if cand is not None:
                # F is 0-homogeneous, so compare at matching scale
                if cand.F >= st.F + _ARMIJO * float(g @ (trial - st.h)) - _ASCENT_SLACK * abs(st.F):
                    accepted = cand
                    break
            a *= config.backtrack
        if accepted is None:
            break
        prev, st, step = st, accepted, a
        trace.append(st.F)
        res = residual(st)
        converged = res <= config.grad_tol

    lam = st.lam
    h_tilde = lam ** (1.0 / (n - 1 - q)) * st.h
    check = surface_area_measure(WulffShape(cone, mu.directions, h_tilde, check=False), theta).masses
    res = float(np.max(np.abs(check - mu.masses)) / np.max(np.abs(mu.masses)))
    converged = res <= config.grad_tol
    try:
        b = float(distance_from_origin(WulffShape(cone, mu.directions, h_tilde, check=False)))
    except Exception:
        b = float("nan")
    report = SolverReport(h_tilde=h_tilde, lambda_=float(lam), residual=res, objective_trace=trace,
                          iterations=it, converged=converged, h=st.h,
                          normalization=config.normalization, inner_distance=b)
    if not converged:
        raise NotConverged("solver stopped after %d iterations with residual %.3e" % (it, res), report)
    return report
