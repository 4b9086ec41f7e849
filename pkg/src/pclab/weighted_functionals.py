"""Weighted functionals of C-pseudo-cones.

Everything is computed in polar form over the cap Omega_C: a body is known
through its radial function, and each functional becomes a cap integral of
Theta(u) times a power of rho.  Surface-area measures of Wulff shapes are
integrated facet by facet in the facet planes instead.
"""

from dataclasses import dataclass, field
import functools
import math
from typing import NamedTuple

import numpy as np
from scipy.optimize import linprog

from .cone_geometry import Cone, cap_quadrature, integrate_cap, polar_cone, _orth_frame
from .errors import (ValidationError, ExponentOutOfRange, NumericDivergence, SingularAtOrigin,
                     DivergentMeasure, GradientUnavailable, NotInCone, OutsideCap, InconclusiveFit)
from .pseudocone import PseudoCone, ShiftedCone, WulffShape, translate
from .weights import WeightSpec

__all__ = [
    "Estimate", "WeightSpec", "DiscreteMeasure", "FinitenessVerdict",
    "covolume", "volume", "asymptotic_covolume", "cone_weighted_volume", "surface_area_measure",
    "surface_area_total", "wulff_covolume", "dual_volume", "directional_derivative_integral", "finiteness_probe",
]


class Estimate(NamedTuple):
    value: float
    error: float

    def __float__(self):
        return float(self.value)

    def to_json(self):
        return {"value": self.value, "error": self.error}


# ---------------------------------------------------------------------------
# measures


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Finitely many point masses on directions of the polar cap."""

    directions: np.ndarray
    masses: np.ndarray

    def __post_init__(self):
        V = np.atleast_2d(np.asarray(self.directions, dtype=float))
        m = np.asarray(self.masses, dtype=float).ravel()
        if len(V) != len(m):
            raise ValidationError("directions and masses differ in length")
        if len(m) == 0:
            raise ValidationError("measure has no atoms")
        nv = np.linalg.norm(V, axis=1)
        if np.any(nv == 0):
            raise ValidationError("zero direction in measure")
        V = V / nv[:, None]
        if not np.all(np.isfinite(m)) or np.any(m < 0):
            raise ValidationError("masses must be finite and nonnegative")
        G = np.clip(V @ V.T, -1.0, 1.0)
        np.fill_diagonal(G, -1.0)
        if np.any(np.arccos(G.max(axis=1)) <= 1e-9):
            raise ValidationError("measure directions must be pairwise distinct")
        object.__setattr__(self, "directions", V)
        object.__setattr__(self, "masses", m)

    def __len__(self):
        return len(self.masses)

    @property
    def total(self):
        return float(self.masses.sum())

    def validate(self, cone):
        if self.directions.shape[1] != cone.dim:
            raise ValidationError("measure dimension does not match the cone")
        if np.any(polar_cone(cone).interior_margin(self.directions) <= 0):
            raise OutsideCap("measure directions must lie in the open polar cap")
        if not np.any(self.masses > 0):
            raise ValidationError("measure is zero")
        return self

    @classmethod
    def from_json(cls, spec):
        if not isinstance(spec, dict) or "directions" not in spec or "masses" not in spec:
            raise ValidationError("measure needs 'directions' and 'masses'")
        return cls(np.asarray(spec["directions"], dtype=float), np.asarray(spec["masses"], dtype=float))

    def to_json(self):
        return {"directions": self.directions.tolist(), "masses": self.masses.tolist()}


@dataclass
class FinitenessVerdict:
    status: str
    value: float = None
    error: float = None
    growth_exponent: float = None
    trace: list = field(default_factory=list)
    fit_r2: float = None
    note: str = ""

    @property
    def divergent(self):
        return self.status in ("power_divergent", "log_divergent")

    def to_json(self):
        return {"status": self.status, "value": self.value, "error": self.error,
                "growth_exponent": self.growth_exponent, "fit_r2": self.fit_r2,
                "trace": [[float(a), float(b)] for a, b in self.trace], "note": self.note}


# ---------------------------------------------------------------------------
# helpers


def _check_weight(theta, cone):
    if not isinstance(theta, WeightSpec):
        raise ValidationError("weight must be a WeightSpec")
    if theta.kind == "directional_power" and theta.direction.size != cone.dim:
        raise ValidationError("weight direction has the wrong dimension")
    return theta.q, cone.dim


def _breakpoints(E):
    try:
        return E.breakpoints()
    except Exception:
        return []


def _integrate(f, cone, tol, max_depth, breakpoints=None):
    if max_depth is None:
        # planar panels are cheap, and weak endpoint singularities need the depth
        max_depth = 200 if cone.dim == 2 else 40
    val, err = integrate_cap(f, cone, tol, max_depth, breakpoints)
    if not (np.isfinite(val) and np.isfinite(err)):
        raise NumericDivergence("cap integral is not finite")
    fail = max(1e-6 if cone.dim == 2 else 1e-2, 1e3 * tol)
    if err > fail * abs(val) and err > 1e-300:
        raise NumericDivergence("cap quadrature did not settle (relative error %.2e); "
                                "the integral is most likely infinite" % (err / max(abs(val), 1e-300)))
    return Estimate(float(val), float(err))


def _point_in_cone(cone, z):
    z = np.asarray(z, dtype=float).ravel()
    if z.size != cone.dim:
        raise ValidationError("point has the wrong dimension")
    if not cone.contains(z[None], tol=1e-12)[0]:
        raise NotInCone("point must lie in the cone")
    return z


def _power_difference(rc, d, p):
    """(rc + d)**p - rc**p without cancellation when d << rc."""
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        return np.where(d > 0, rc ** p * np.expm1(p * np.log1p(d / rc)), 0.0)


# ---------------------------------------------------------------------------
# integrands (per unit direction, already integrated along the ray)


def _covolume_integrand(E, theta):
    p = E.cone.dim - theta.q
    return lambda U: theta.on_sphere(U) * E.radial(U) ** p / p


def _volume_integrand(E, theta):
    p = E.cone.dim - theta.q
    return lambda U: theta.on_sphere(U) * E.radial(U) ** p / (-p)


def _t_integrand(A, z, theta):
    n, q = A.cone.dim, theta.q
    p = n - q
    if np.linalg.norm(z) == 0:
        return lambda U: theta.on_sphere(U) * A.radial(U) ** p / p
    Z = ShiftedCone(A.cone, z)

    def f(U):
        rc = Z.radial(U)
        d = A.radial_excess(U, z)
        if q == n:
            return theta.on_sphere(U) * np.log1p(d / rc)
        return theta.on_sphere(U) * _power_difference(rc, d, p) / p
    return f


def _sam_integrand(E, theta):
    n, q = E.cone.dim, theta.q

    def f(U):
        rho = E.radial(U)
        N = E.normals(U)
        c = np.abs(np.einsum("ij,ij->i", U, N))
        return theta.on_sphere(U) * rho ** (n - 1 - q) / c
    return f


# ---------------------------------------------------------------------------
# functionals


def covolume(E, theta, tol=1e-10, max_depth=None, method="auto"):
    """Weighted co-volume: the Theta-mass of C minus E (q < n).

    method="auto" integrates 3D Wulff shapes facet by facet (the cap integral
    split along the kinks of rho); "cap" forces the plain cap quadrature.
    """
    q, n = _check_weight(theta, E.cone)
    if q >= n:
        raise ExponentOutOfRange("the co-volume is infinite near the origin for q >= n")
    if method not in ("auto", "cap", "facets"):
        raise ValidationError("unknown co-volume method %r" % (method,))
    if method == "facets" or (method == "auto" and n == 3 and isinstance(E, WulffShape)
                              and np.all(polar_cone(E.cone).interior_margin(E.directions) > 1e-12)):
        return wulff_covolume(E, theta)
    return _integrate(_covolume_integrand(E, theta), E.cone, tol, max_depth, _breakpoints(E))


def volume(E, theta, tol=1e-10, max_depth=None):
    """Weighted volume: the Theta-mass of E (q > n)."""
    q, n = _check_weight(theta, E.cone)
    if q <= n:
        raise ExponentOutOfRange("the weighted volume is infinite for q <= n")
    return _integrate(_volume_integrand(E, theta), E.cone, tol, max_depth, _breakpoints(E))


def asymptotic_covolume(A, z, theta, tol=1e-10, max_depth=None):
    """T(A, z): the Theta-mass of (z + C) minus (z + A); log form at q = n."""
    q, n = _check_weight(theta, A.cone)
    z = _point_in_cone(A.cone, z)
    if np.linalg.norm(z) == 0 and q >= n:
        raise SingularAtOrigin("T(A, o) is infinite for q >= n")
    bps = []
    if A.cone.dim == 2:
        try:
            bps = translate(A, z).breakpoints() if np.linalg.norm(z) > 0 else _breakpoints(A)
        except Exception:
            bps = []
    return _integrate(_t_integrand(A, z, theta), A.cone, tol, max_depth, bps)


def cone_weighted_volume(z, theta, cone, tol=1e-10, max_depth=None):
    """V(z + C), which equals the convolution of the indicator of -C with Theta at z (q > n)."""
    z = _point_in_cone(cone, z)
    if np.linalg.norm(z) == 0:
        raise SingularAtOrigin("the cone-weighted volume is infinite at z = o")
    return volume(ShiftedCone(cone, z), theta, tol, max_depth)


def dual_volume(E, r, tol=1e-10, max_depth=None):
    """(1/n) times the cap integral of rho**r, for r < 0 or 0 < r < 1."""
    r = float(r)
    if not (r < 0 or 0 < r < 1):
        raise ExponentOutOfRange("dual volume needs r < 0 or 0 < r < 1")
    n = E.cone.dim
    return _integrate(lambda U: E.radial(U) ** r / n, E.cone, tol, max_depth, _breakpoints(E))


def directional_derivative_integral(z, theta, cone, tol=1e-10, max_depth=None):
    """(1/(n-q)) times the integral of <grad Theta, z> over z + C (q > n, smooth Theta).

    Along each ray the radial integral is done in closed form, so only the
    cap integral of <grad Theta(u), z> rho**(n-q-1) / (q+1-n) is numerical.
    """
    q, n = _check_weight(theta, cone)
    if not theta.smooth:
        raise GradientUnavailable("weight has no gradient")
    if q <= n:
        raise ExponentOutOfRange("the derivative identity needs q > n")
    z = _point_in_cone(cone, z)
    if np.linalg.norm(z) == 0:
        raise SingularAtOrigin("z must not be the origin")
    Z = ShiftedCone(cone, z)
    f = lambda U: (theta.gradient(U) @ z) * Z.radial(U) ** (n - q - 1) / (q + 1 - n)
    raw = _integrate(f, cone, tol, max_depth, Z.breakpoints())
    return Estimate(raw.value / (n - q), raw.error / abs(n - q))


def surface_area_total(E, theta, tol=1e-10, max_depth=None):
    """Total weighted surface area of the boundary over the open cap.

    The cap integrand is Theta(u) rho**(n-1-q) / |<u, nu>|.  A non-settling
    quadrature is reported as DivergentMeasure; use finiteness_probe for a
    classification of the growth.
    """
    _check_weight(theta, E.cone)
    try:
        return _integrate(_sam_integrand(E, theta), E.cone, tol, max_depth, _breakpoints(E))
    except NumericDivergence as exc:
        raise DivergentMeasure(str(exc))


# ---------------------------------------------------------------------------
# surface-area measure of Wulff shapes, facet by facet


@functools.lru_cache(maxsize=16)
def _inner_normals(cone, m=256):
    """Facet normals of a polyhedral cone inscribed in a circular cone."""
    a = cone.axis
    e1, e2 = _orth_frame(a)
    phi = 2 * math.pi * np.arange(m) / m
    b = math.sin(cone.half_angle)
    G = math.cos(cone.half_angle) * a + b * (np.cos(phi)[:, None] * e1 + np.sin(phi)[:, None] * e2)
    N = np.cross(G, np.roll(G, -1, axis=0))
    N /= np.linalg.norm(N, axis=1)[:, None]
    N *= -np.sign(N @ a)[:, None]
    return N


def _facet_center(E, i, A, b):
    """A relative interior point of facet i, or None when the facet is lower dimensional."""
    n = E.cone.dim
    v, h = E.directions[i], E.hbar[i]
    scale = max(h, 1e-300)
    rows = np.hstack([A, np.linalg.norm(A, axis=1)[:, None]])
    c = np.zeros(n + 1)
    c[-1] = -1.0
    res = linprog(c, A_ub=rows, b_ub=b, A_eq=np.append(v, 0.0)[None, :], b_eq=[-h],
                  bounds=[(None, None)] * n + [(None, 10 * scale)], method="highs")
    if res.status != 0 or res.x[-1] <= 1e-10 * scale:
        return None
    return res.x[:n]


def _ray_lengths(D, p0, A, slack, cone):
    if len(A) == 0:
        r = np.full(len(D), np.inf)
        idx = np.zeros(len(D), int)
    else:
        proj = D @ A.T
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(proj > 0, slack[None, :] / proj, np.inf)
        r = t.min(axis=1)
        idx = t.argmin(axis=1)
    if cone.kind == "circular":
        a = cone.axis
        c2 = math.cos(cone.half_angle) ** 2
        da = D @ a
        pa = p0 @ a
        qa = da * da - c2
        qb = pa * da - c2 * (D @ p0)
        qc = pa * pa - c2 * (p0 @ p0)
        disc = np.sqrt(np.maximum(qb * qb - qa * qc, 0.0))
        with np.errstate(divide="ignore", invalid="ignore"):
            root = np.where(qb <= 0, qc / (disc - qb), (qb + disc) / (-qa))
        root = np.where(root > 0, root, np.inf)
        use = root < r
        r = np.where(use, root, r)
        idx = np.where(use, -1, idx)
    return r, idx


def _facet_integral(E, i, theta, order):
    """Integral of Theta over facet i of a Wulff shape, with a crude error estimate."""
    cone = E.cone
    n = cone.dim
    keep = np.arange(len(E.hbar)) != i
    A = E.directions[keep]
    b = -E.hbar[keep]
    if cone.kind == "polyhedral" or n == 2:
        A = np.vstack([A, cone.normals])
        b = np.concatenate([b, np.zeros(len(cone.normals))])
        lp_A, lp_b = A, b
    else:
        inner = _inner_normals(cone)
        lp_A = np.vstack([A, inner])
        lp_b = np.concatenate([b, np.zeros(len(inner))])
    p0 = _facet_center(E, i, lp_A, lp_b)
    if p0 is None:
        return 0.0, 0.0
    slack = b - A @ p0
    v = E.directions[i]
    # orthonormal basis of the facet plane
    Q, _ = np.linalg.qr(np.column_stack([v, np.eye(n)]))
    basis = Q[:, 1:n].T
    x, w = np.polynomial.legendre.leggauss(order)
    xl, wl = np.polynomial.legendre.leggauss(max(order - 8, 4))

    def radial_line(D, rule):
        # integral over t in [0, r(d)] of Theta(p0 + t d) t**(n-2), composite in 4 panels
        r, _ = _ray_lengths(D, p0, A, slack, cone)
        if not np.all(np.isfinite(r)):
            raise DivergentMeasure("facet is unbounded")
        xs, ws = rule
        edges = np.linspace(0.0, 1.0, 5)
        tot = np.zeros(len(D))
        for lo, hi in zip(edges[:-1], edges[1:]):
            s = 0.5 * (lo + hi) + 0.5 * (hi - lo) * xs
            t = r[:, None] * s[None, :]
            P = p0[None, None, :] + t[:, :, None] * D[:, None, :]
            vals = theta(P.reshape(-1, n)).reshape(t.shape) * t ** (n - 2)
            tot += (vals * (0.5 * (hi - lo) * ws)[None, :]).sum(axis=1) * r
        return tot

    if n == 2:
        D = np.array([basis[0], -basis[0]])
        hi = radial_line(D, (x, w)).sum()
        lo = radial_line(D, (xl, wl)).sum()
        return float(hi), abs(float(hi - lo))

    e1, e2 = basis
    dirs = lambda phi: np.cos(phi)[:, None] * e1 + np.sin(phi)[:, None] * e2
    # angular pieces between kinks of the boundary distance r(phi)
    m = 720
    phi = 2 * math.pi * np.arange(m + 1) / m
    _, ids = _ray_lengths(dirs(phi), p0, A, slack, cone)
    cuts = [0.0, 2 * math.pi]
    for k in np.flatnonzero(ids[:-1] != ids[1:]):
        lo, hi = phi[k], phi[k + 1]
        id_lo = ids[k]
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if _ray_lengths(dirs(np.array([mid])), p0, A, slack, cone)[1][0] == id_lo:
                lo = mid
            else:
                hi = mid
        cuts.append(0.5 * (lo + hi))
    cuts = np.unique(cuts)

    def angular(rule):
        xs, ws = rule
        total = 0.0
        for lo, hi in zip(cuts[:-1], cuts[1:]):
            if hi - lo <= 0:
                continue
            sub = np.linspace(lo, hi, 3)
            for a, c in zip(sub[:-1], sub[1:]):
                ph = 0.5 * (a + c) + 0.5 * (c - a) * xs
                total += float((radial_line(dirs(ph), rule) * 0.5 * (c - a) * ws).sum())
        return total

    hi = angular((x, w))
    lo = angular((xl, wl))
    return hi, abs(hi - lo)


def surface_area_measure(E, theta, order=20):
    """Weighted surface-area measure of a Wulff shape, one atom per direction.

    Each mass is the integral of Theta over the facet with that normal.  Only
    directions in the open polar cap carry atoms; facets whose normal lies on
    the boundary of the polar cap (pieces of a shifted copy of the boundary of
    C) are excluded, and redundant or lower-dimensional facets get mass 0.
    """
    if not isinstance(E, WulffShape):
        raise ValidationError("surface_area_measure takes a Wulff shape; use surface_area_total otherwise")
    _check_weight(theta, E.cone)
    interior = polar_cone(E.cone).interior_margin(E.directions) > 1e-12
    masses, errs, dirs = [], [], []
    for i in range(len(E.hbar)):
        if not interior[i]:
            continue
        dirs.append(E.directions[i])
        if E.hbar[i] <= 0:
            masses.append(0.0)
            errs.append(0.0)
            continue
        val, err = _facet_integral(E, i, theta, order)
        masses.append(val)
        errs.append(err)
    if not dirs:
        raise ValidationError("no Wulff direction lies in the open polar cap")
    mu = DiscreteMeasure(np.array(dirs), np.array(masses))
    object.__setattr__(mu, "errors", np.array(errs))
    return mu


def wulff_covolume(E, theta, order=20):
    """Co-volume of a Wulff shape with all normals in the open polar cap, as
    (1/(n-q)) * sum of hbar_i times the facet masses (divergence theorem for x Theta(x))."""
    q, n = _check_weight(theta, E.cone)
    if q >= n:
        raise ExponentOutOfRange("the co-volume is infinite near the origin for q >= n")
    if np.any(polar_cone(E.cone).interior_margin(E.directions) <= 1e-12):
        raise ValidationError("facet formula needs every normal in the open polar cap")
    mu = surface_area_measure(E, theta, order)
    return Estimate(float(E.hbar @ mu.masses) / (n - q), float(E.hbar @ mu.errors) / (n - q))


# ---------------------------------------------------------------------------
# finiteness probes

_TAGS = ("S", "V", "Vbar", "I_inf", "T_origin", "T")
_SLOPE_TOL = 0.02
_R2_MIN = 0.999
_NFIT = 4


def _fit(x, y):
    A = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    res = y - A @ coef
    ss = float(((y - y.mean()) ** 2).sum())
    sr = float((res ** 2).sum())
    # an exactly level series (log growth) has ss ~ 0; rounding must not count as misfit
    if sr <= 1e-20 * len(y) * max(1.0, float(np.abs(y).max())) ** 2:
        return float(coef[0]), 1.0
    r2 = 1.0 - sr / ss if ss > 0 else 1.0
    return float(coef[0]), r2


def _classify(R, D, partial, tol, err0=0.0):
    """Classify a series from its increments D_k at growing cutoffs R_k.

    Increments growing like R**s (s > 0) mean power growth with exponent s,
    increments that stay level mean log growth, decaying increments mean a
    finite limit, which is extrapolated with a geometric tail.
    """
    R = np.asarray(R, dtype=float)
    D = np.asarray(D, dtype=float)
    trace = list(zip(R.tolist(), np.asarray(partial, dtype=float).tolist()))
    F = float(partial[-1])
    tail = D[-_NFIT:]
    if np.all(tail == 0):
        return FinitenessVerdict("finite", F, err0, trace=trace, note="increments vanish")
    if np.any(tail <= 0):
        raise InconclusiveFit("increments change sign")
    lr = np.log(R[-_NFIT:])
    ld = np.log(tail)
    if lr[-1] - lr[0] < 1e-3:
        # cutoffs have stopped growing: the body is bounded in these directions
        slope_k, r2 = _fit(np.arange(_NFIT, dtype=float), ld)
        ratio = math.exp(slope_k)
        if ratio >= 1:
            raise InconclusiveFit("increments do not decay at bounded cutoffs")
        t = tail[-1] * ratio / (1 - ratio)
        st = "finite" if t <= tol * max(abs(F), 1.0) else "inconclusive"
        return FinitenessVerdict(st, F + t, abs(t) + err0, trace=trace, fit_r2=r2)
    s, r2 = _fit(lr, ld)
    if r2 < _R2_MIN:
        raise InconclusiveFit("fit R^2 = %.6f below %.3f" % (r2, _R2_MIN))
    if s > _SLOPE_TOL:
        return FinitenessVerdict("power_divergent", growth_exponent=s, trace=trace, fit_r2=r2)
    if s >= -_SLOPE_TOL:
        return FinitenessVerdict("log_divergent", growth_exponent=0.0, trace=trace, fit_r2=r2)
    step = float(np.mean(np.diff(lr)))
    ratio = math.exp(s * step)
    t = tail[-1] * ratio / (1 - ratio)
    st = "finite" if t <= tol * max(abs(F), 1.0) else "inconclusive"
    return FinitenessVerdict(st, F + t, abs(t) + err0, trace=trace, fit_r2=r2)


def _level_probe(cone, f, rho, depth, tol, schedule=None):
    """Directional truncation: partial sums over graded cap levels toward the boundary."""
    quad = cap_quadrature(cone, 1e-6, depth, 0.5, 10 if cone.dim == 2 else 6)
    U, W, lev = quad.nodes, quad.weights, quad.level
    vals = np.asarray(f(U), dtype=float)
    if not np.all(np.isfinite(vals)):
        raise NumericDivergence("integrand is not finite at a quadrature node")
    r = np.asarray(rho(U), dtype=float)
    levels = np.arange(depth)  # the last level touches the boundary and is dropped
    D = np.array([float(np.sum(W[lev == k] * vals[lev == k])) for k in levels])
    R = np.array([float(r[lev == k].max()) for k in levels])
    R = np.maximum.accumulate(R)
    partial = np.cumsum(D)
    if schedule is not None:
        # partial sums at requested cutoffs: all levels whose cutoff is below each R
        sched = np.asarray(schedule, dtype=float)
        idx = np.searchsorted(R, sched, side="right") - 1
        ok = idx >= 0
        idx = idx[ok]
        if len(idx) < _NFIT + 1:
            raise InconclusiveFit("schedule reaches fewer than %d grading levels" % (_NFIT + 1))
        P = partial[idx]
        D = np.diff(np.concatenate([[0.0], P]))
        R = sched[ok]
        partial = P
    # skip the first levels, which carry the bulk of the integral
    start = 0 if schedule is not None else min(4, len(D) - _NFIT)
    return _classify(R[start:], D[start:], partial[start:], tol)


def _radial_tail_probe(E, theta, schedule, tol):
    """Volume truncated at |x| <= R, in closed form per ray."""
    n, q = E.cone.dim, theta.q
    p = n - q
    quad = cap_quadrature(E.cone, 1e-8, 40)
    U, W = quad.nodes, quad.weights
    rho = E.radial(U)
    th = theta.on_sphere(U)
    if schedule is None:
        base = max(1.0, float(np.median(rho)))
        schedule = base * 10.0 ** (np.arange(1, 15) * 0.5)
    R = np.asarray(schedule, dtype=float)

    def ray(lo, hi):
        if p == 0:
            return np.log(hi / lo)
        return (hi ** p - lo ** p) / p

    prev = rho.copy()
    D, partial, acc = [], [], 0.0
    for Rk in R:
        cur = np.maximum(rho, Rk)
        d = float(np.sum(W * th * ray(prev, cur)))
        prev = cur
        acc += d
        D.append(d)
        partial.append(acc)
    v = _classify(R, D, partial, tol)
    if v.status in ("finite", "inconclusive") and q > n:
        # the untruncated value is available directly
        v.value = float(np.sum(W * th * rho ** p / (-p)))
    return v


def _origin_probe(E, theta, schedule, tol):
    """Mass of C minus E outside a ball of radius eps, eps decreasing to 0."""
    n, q = E.cone.dim, theta.q
    p = n - q
    quad = cap_quadrature(E.cone, 1e-8, 40)
    U, W = quad.nodes, quad.weights
    rho = E.radial(U)
    th = theta.on_sphere(U)
    if schedule is None:
        top = float(rho.min())
        schedule = top * 10.0 ** (-np.arange(1, 15) * 0.5)
    eps = np.asarray(schedule, dtype=float)
    if np.any(np.diff(eps) >= 0):
        raise ValidationError("origin probe radii must decrease")

    def ray(lo, hi):
        if p == 0:
            return np.log(hi / lo)
        return (hi ** p - lo ** p) / p

    prev = rho.copy()
    D, partial, acc = [], [], 0.0
    for e in eps:
        cur = np.minimum(rho, e)
        d = float(np.sum(W * th * ray(cur, prev)))
        prev = cur
        acc += d
        D.append(d)
        partial.append(acc)
    return _classify(1.0 / eps, D, partial, tol)


def finiteness_probe(tag, body, theta, schedule=None, z=None, depth=None, tol=1e-6):
    """Empirical finiteness classification of one functional on one body.

    tag is one of S, V, Vbar, I_inf (tail of the co-volume), T_origin (T(A, o))
    or T (T(A, z), z required).  Tail probes of S, Vbar, I_inf and T truncate
    directionally along the graded cap levels; V is truncated radially; the
    origin singularity of Vbar and T_origin is probed with shrinking balls.
    """
    if tag not in _TAGS:
        raise ValidationError("unknown functional tag %r" % (tag,))
    cone = body.cone
    q, n = _check_weight(theta, cone)
    if schedule is not None:
        sch = np.asarray(schedule, dtype=float)
        if sch.ndim != 1 or len(sch) < _NFIT + 1 or np.any(~np.isfinite(sch)) or np.any(sch <= 0):
            raise ValidationError("schedule needs at least %d positive cutoffs" % (_NFIT + 1))
        if tag in ("Vbar", "T_origin") and q >= n:
            if np.any(np.diff(sch) >= 0):
                raise ValidationError("origin probe radii must be strictly decreasing")
        elif np.any(np.diff(sch) <= 0):
            raise ValidationError("schedule must be strictly increasing")
    if depth is None:
        depth = 400 if n == 2 else 160
    if tag == "V":
        return _radial_tail_probe(body, theta, schedule, tol)
    if tag in ("Vbar", "T_origin", "I_inf"):
        if q >= n:
            if tag == "I_inf":
                raise ExponentOutOfRange("the tail probe of the co-volume needs q < n")
            return _origin_probe(body, theta, schedule, tol)
        return _level_probe(cone, _covolume_integrand(body, theta), body.radial, depth, tol, schedule)
    if tag == "S":
        return _level_probe(cone, _sam_integrand(body, theta), body.radial, depth, tol, schedule)
    if z is None:
        raise ValidationError("the T probe needs a point z")
    z = _point_in_cone(cone, z)
    if np.linalg.norm(z) == 0:
        raise ValidationError("use tag T_origin for z = o")
    shifted = translate(body, z)
    return _level_probe(cone, _t_integrand(body, z, theta), shifted.radial, depth, tol, schedule)
