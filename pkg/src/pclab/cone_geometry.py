"""Pointed cones, polar cones, spherical caps and quadrature over caps.

Integrals over the open cap Omega_C are pulled back to the flat cross-section
C(1) = {y in C : <y, u_ref> = 1} by the gnomonic map y -> y/|y|, whose
Jacobian is |y|^(-n) (times <y/|y|, u_ref>^0; the cross-section is orthogonal
to u_ref so the factor is exactly |y|^(-n)).  The cross-section is charted so
that every node is addressed by its distance to the boundary, which keeps
unit vectors accurate deep inside the boundary layer.
"""

from dataclasses import dataclass, field
import functools
import itertools
import math

import numpy as np
from scipy.optimize import nnls

from .errors import DegenerateCone, UnsupportedDimension, ValidationError, NumericDivergence

_EPS = 1e-12


def _unit(v):
    v = np.asarray(v, dtype=float)
    nv = np.linalg.norm(v)
    if not np.isfinite(nv) or nv == 0:
        raise ValidationError("zero or non-finite vector")
    return v / nv


def _orth_frame(a):
    """Two unit vectors completing the unit vector a (3D) to an orthonormal frame."""
    k = int(np.argmin(np.abs(a)))
    ref = np.zeros(3)
    ref[k] = 1.0
    e1 = ref - np.dot(ref, a) * a
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(a, e1)
    return e1, e2


@dataclass(frozen=True, eq=False)
class Cone:
    """A pointed closed convex cone with nonempty interior.

    Use the constructors :meth:`circular`, :meth:`polyhedral` and
    :meth:`from_generators` rather than calling the class directly.
    """

    dim: int
    kind: str
    axis: np.ndarray = None
    half_angle: float = None
    normals: np.ndarray = None
    generators: np.ndarray = None
    u_ref: np.ndarray = None
    _chart: object = field(default=None, repr=False)

    # construction -------------------------------------------------------

    @classmethod
    def circular(cls, axis, half_angle):
        a = _unit(axis)
        n = a.size
        if n < 2:
            raise UnsupportedDimension("dimension must be at least 2")
        beta = float(half_angle)
        if not (0.0 < beta < math.pi / 2):
            raise DegenerateCone("half angle must lie in (0, pi/2)")
        gens = None
        normals = None
        if n == 2:
            rot = lambda t: np.array([[math.cos(t), -math.sin(t)], [math.sin(t), math.cos(t)]])
            gens = np.array([rot(-beta) @ a, rot(beta) @ a])
            # outward normals of the two boundary rays
            normals = np.array([rot(-beta - math.pi / 2) @ a, rot(beta + math.pi / 2) @ a])
        cone = cls(dim=n, kind="circular", axis=a, half_angle=beta, normals=normals,
                   generators=gens, u_ref=a.copy())
        object.__setattr__(cone, "_chart", _make_chart(cone))
        return cone

    @classmethod
    def polyhedral(cls, normals, u_ref=None):
        W = np.array([_unit(w) for w in np.atleast_2d(np.asarray(normals, dtype=float))])
        n = W.shape[1]
        if n < 2:
            raise UnsupportedDimension("dimension must be at least 2")
        W = _dedupe(W)
        if W.shape[0] < n:
            raise DegenerateCone("a pointed cone needs at least n facet normals")
        for j in range(W.shape[0]):
            others = np.delete(W, j, axis=0)
            _, res = nnls(others.T, W[j])
            if res < 1e-9:
                raise DegenerateCone("facet normal %d is redundant" % j)
        gens = _extreme_rays(W)
        if gens.shape[0] < n:
            raise DegenerateCone("cone is not pointed or has empty interior")
        return cls._finish_polyhedral(W, gens, u_ref)

    @classmethod
    def from_generators(cls, generators, u_ref=None):
        """Polyhedral cone spanned by the given generators (kept as given, not normalized)."""
        G = np.atleast_2d(np.asarray(generators, dtype=float))
        n = G.shape[1]
        if n < 2:
            raise UnsupportedDimension("dimension must be at least 2")
        U = np.array([_unit(g) for g in G])
        # facet normals of cone(G) are the extreme rays of its polar
        W = _extreme_rays(U)
        if W.shape[0] < n:
            raise DegenerateCone("generators do not span a pointed full-dimensional cone")
        return cls._finish_polyhedral(W, G, u_ref)

    @classmethod
    def _finish_polyhedral(cls, W, gens, u_ref):
        if u_ref is None:
            m = gens.mean(axis=0)
            if np.linalg.norm(m) <= _EPS * np.abs(gens).max():
                raise DegenerateCone("cone is not pointed")
            u = _unit(m)
        else:
            u = _unit(u_ref)
        if np.any(gens @ u <= _EPS * np.linalg.norm(gens, axis=1)):
            raise DegenerateCone("reference direction not strictly positive on generators")
        if np.any(W @ u >= -_EPS):
            raise DegenerateCone("reference direction not interior")
        cone = cls(dim=W.shape[1], kind="polyhedral", normals=W, generators=gens, u_ref=u)
        object.__setattr__(cone, "_chart", _make_chart(cone))
        return cone

    @classmethod
    def from_json(cls, spec):
        if not isinstance(spec, dict) or "kind" not in spec:
            raise ValidationError("cone spec must be an object with a 'kind'")
        kind = spec["kind"]
        if kind == "circular":
            cone = cls.circular(spec["axis"], math.radians(float(spec["half_angle_deg"])))
        elif kind == "polyhedral":
            if "generators" in spec:
                cone = cls.from_generators(spec["generators"], spec.get("u_ref"))
            else:
                cone = cls.polyhedral(spec["normals"], spec.get("u_ref"))
        else:
            raise ValidationError("unknown cone kind %r" % kind)
        if "dim" in spec and int(spec["dim"]) != cone.dim:
            raise ValidationError("cone 'dim' does not match its data")
        return cone

    def to_json(self):
        if self.kind == "circular":
            return {"kind": "circular", "dim": self.dim, "axis": self.axis.tolist(),
                    "half_angle_deg": math.degrees(self.half_angle)}
        return {"kind": "polyhedral", "dim": self.dim, "normals": self.normals.tolist()}

    # geometry -----------------------------------------------------------

    def contains(self, X, tol=0.0):
        """Membership test for rows of X; tol is relative to |x|."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        r = np.linalg.norm(X, axis=1)
        if self.kind == "circular":
            return X @ self.axis >= r * (math.cos(self.half_angle) - tol)
        return np.all(X @ self.normals.T <= tol * r[:, None], axis=1)

    def interior_margin(self, U):
        """Positive iff u is interior; roughly the angular distance to the boundary."""
        U = np.atleast_2d(U)
        if self.kind == "circular":
            ca = U @ self.axis
            sa = np.linalg.norm(U - ca[:, None] * self.axis, axis=1)
            return self.half_angle - np.arctan2(sa, ca)
        return -(U @ self.normals.T).max(axis=1)

    def unit_generators(self):
        if self.generators is None:
            return None
        return self.generators / np.linalg.norm(self.generators, axis=1)[:, None]

    @property
    def chart(self):
        return self._chart

    def cap_measure(self):
        """Surface measure of Omega_C, closed form where available."""
        if self.dim == 2:
            g = self.unit_generators()
            return math.acos(np.clip(g[0] @ g[1], -1, 1))
        if self.dim == 3 and self.kind == "circular":
            return 2 * math.pi * (1 - math.cos(self.half_angle))
        if self.dim == 3:
            # spherical polygon area by Girard's theorem
            Wo = self.normals[self.chart.facet_order]
            k = len(Wo)
            ang = sum(math.pi - math.acos(np.clip(Wo[i - 1] @ Wo[i], -1, 1)) for i in range(k))
            return ang - (k - 2) * math.pi
        raise UnsupportedDimension("cap measure only for n in {2, 3}")


def _dedupe(W):
    keep = []
    for w in W:
        if not any(np.linalg.norm(w - k) < 1e-12 for k in keep):
            keep.append(w)
    return np.array(keep)


def _extreme_rays(W):
    """Unit extreme rays of {x : W x <= 0} for small dimensions."""
    n = W.shape[1]
    rays = []
    for idx in itertools.combinations(range(W.shape[0]), n - 1):
        A = W[list(idx)]
        _, s, vt = np.linalg.svd(A)
        if s.size == n - 1 and s[-1] < 1e-12:
            continue
        x = vt[-1]
        for cand in (x, -x):
            if np.all(W @ cand <= 1e-10):
                if not any(np.linalg.norm(cand - r) < 1e-9 for r in rays):
                    rays.append(cand / np.linalg.norm(cand))
    return np.array(rays).reshape(-1, n)


def polar_cone(C):
    """The polar cone {y : <x, y> <= 0 for all x in C}."""
    if C.kind == "circular":
        return Cone.circular(-C.axis, math.pi / 2 - C.half_angle)
    return Cone.polyhedral(C.unit_generators())


def reference_direction(C):
    return C.u_ref.copy()


def boundary_directions(C, m):
    """Unit vectors on the relative boundary of the polar cap.

    In the plane the boundary consists of exactly two directions and those are
    returned whatever m is.
    """
    m = int(m)
    if m < C.dim:
        raise ValidationError("m must be at least the dimension")
    P = polar_cone(C)
    if C.dim == 2:
        return P.unit_generators().copy()
    if C.dim != 3:
        raise UnsupportedDimension("boundary directions only for n in {2, 3}")
    if C.kind == "circular":
        e1, e2 = _orth_frame(C.axis)
        gam = P.half_angle
        phi = 2 * math.pi * np.arange(m) / m
        return (math.cos(gam) * P.axis[None, :]
                + math.sin(gam) * (np.cos(phi)[:, None] * e1 + np.sin(phi)[:, None] * e2))
    # spherical polygon with vertices the unit facet normals of C, in cyclic order
    V = C.normals[C.chart.facet_order]
    k = len(V)
    arcs = np.array([math.acos(np.clip(V[i] @ V[(i + 1) % k], -1, 1)) for i in range(k)])
    total = arcs.sum()
    pos = total * np.arange(m) / m
    out = []
    cum = np.concatenate([[0.0], np.cumsum(arcs)])
    for p in pos:
        i = min(int(np.searchsorted(cum, p, side="right")) - 1, k - 1)
        t = p - cum[i]
        a, b = V[i], V[(i + 1) % k]
        w = b - (a @ b) * a
        w /= np.linalg.norm(w)
        out.append(math.cos(t) * a + math.sin(t) * w)
    return np.array(out)


# ---------------------------------------------------------------------------
# charts of the cross-section


class SegmentChart:
    """Cross-section of a planar cone: a segment [P0, P1].

    A point is addressed by (end, d): y = P_end + d (P_other - P_end), d in (0, 1/2].
    """

    dim = 2

    def __init__(self, cone):
        g = cone.unit_generators()
        u = cone.u_ref
        P = g / (g @ u)[:, None]
        # order the ends counterclockwise
        if P[0, 0] * P[1, 1] - P[0, 1] * P[1, 0] < 0:
            P = P[::-1]
        self.P = P
        self.L = float(np.linalg.norm(P[1] - P[0]))

    def points(self, piece, a, b=None):
        piece = np.asarray(piece)
        a = np.asarray(a, dtype=float)
        P0 = np.where(piece[:, None] == 0, self.P[0], self.P[1])
        P1 = np.where(piece[:, None] == 0, self.P[1], self.P[0])
        Y = P0 + a[:, None] * (P1 - P0)
        return Y, np.full(a.shape, self.L)

    def to_params(self, U):
        """Inverse chart for unit vectors (interior precision only)."""
        U = np.atleast_2d(U)
        Y = U / (U @ self._u)[:, None]
        t = (Y - self.P[0]) @ (self.P[1] - self.P[0]) / self.L ** 2
        piece = np.where(t <= 0.5, 0, 1)
        d = np.where(t <= 0.5, t, 1 - t)
        return piece, d

    _u = None


class PolygonChart:
    """Cross-section of a 3D polyhedral cone: a convex polygon fanned from its centroid.

    Sector k is the triangle (c, p_k, p_{k+1}); y = (1-tau) b(s) + tau c with
    b(s) = p_k + s (p_{k+1} - p_k).  tau = 0 is the boundary.
    """

    dim = 3

    def __init__(self, cone):
        u = cone.u_ref
        g = cone.unit_generators()
        Pv = g / (g @ u)[:, None]
        e1, e2 = _orth_frame(u)
        ang = np.arctan2(Pv @ e2, Pv @ e1)
        order = np.argsort(ang)
        self.vertex_order = order
        self.V = Pv[order]
        self.c = self.V.mean(axis=0)
        k = len(self.V)
        # facet between consecutive vertices: the normal orthogonal to both
        facet_order = []
        for i in range(k):
            a, b = self.V[i], self.V[(i + 1) % k]
            j = int(np.argmin(np.abs(cone.normals @ a) + np.abs(cone.normals @ b)))
            facet_order.append(j)
        self.facet_order = np.array(facet_order)
        self.jac = np.array([np.linalg.norm(np.cross(self.V[i] - self.c, self.V[(i + 1) % k] - self.V[i]))
                             for i in range(k)])
        self.npieces = k

    def points(self, piece, tau, s):
        piece = np.asarray(piece)
        tau = np.asarray(tau, dtype=float)
        s = np.asarray(s, dtype=float)
        k = self.npieces
        A = self.V[piece]
        B = self.V[(piece + 1) % k]
        bs = A + s[:, None] * (B - A)
        Y = (1 - tau)[:, None] * bs + tau[:, None] * self.c
        return Y, (1 - tau) * self.jac[piece]


class DiskChart:
    """Cross-section of a 3D circular cone: a disk of radius tan(beta) about the axis."""

    dim = 3
    npieces = 1

    def __init__(self, cone):
        self.c = cone.axis.copy()
        self.R = math.tan(cone.half_angle)
        self.e1, self.e2 = _orth_frame(cone.axis)

    def points(self, piece, tau, s):
        tau = np.asarray(tau, dtype=float)
        s = np.asarray(s, dtype=float)
        phi = 2 * math.pi * s
        r = (1 - tau) * self.R
        Y = self.c + r[:, None] * (np.cos(phi)[:, None] * self.e1 + np.sin(phi)[:, None] * self.e2)
        return Y, (1 - tau) * self.R ** 2 * 2 * math.pi


def _make_chart(cone):
    if cone.dim == 2:
        ch = SegmentChart(cone)
        ch._u = cone.u_ref
        return ch
    if cone.dim == 3:
        if cone.kind == "circular":
            return DiskChart(cone)
        return PolygonChart(cone)
    return None


def _require_chart(cone):
    if cone.chart is None:
        raise UnsupportedDimension("quadrature is implemented for n in {2, 3}")
    return cone.chart


# ---------------------------------------------------------------------------
# 1D rules

_XGK = np.array([0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
                 0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
                 0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
                 0.207784955007898467600689403773245, 0.0])
_WGK = np.array([0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
                 0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
                 0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
                 0.204432940075298892414161999234649, 0.209482141084727828012999174891714])
_WG = np.array([0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
                0.381830050505118944950369775488975, 0.417959183673469387755102040816327])
GK_X = np.concatenate([-_XGK[:-1], _XGK[::-1]])
GK_WK = np.concatenate([_WGK[:-1], _WGK[::-1]])
GK_WG = np.zeros(15)
# Gauss nodes are the odd-indexed Kronrod nodes (x = +-0.949, +-0.741, +-0.405, 0)
for i, w in zip([1, 3, 5, 7, 9, 11, 13], [_WG[0], _WG[1], _WG[2], _WG[3], _WG[2], _WG[1], _WG[0]]):
    GK_WG[i] = w


def graded_rule(length, depth, ratio=0.5, sub=1, order=8):
    """Gauss rule on (0, length] with panels graded geometrically toward 0.

    Returns nodes, weights and the panel level of each node (0 = outermost).
    """
    x, w = np.polynomial.legendre.leggauss(order)
    edges = [length * ratio ** k for k in range(depth + 1)] + [0.0]
    nodes, weights, level = [], [], []
    for k in range(depth + 1):
        hi, lo = edges[k], edges[k + 1]
        sub_k = sub if k < depth else max(sub, 2)
        for j in range(sub_k):
            a = lo + (hi - lo) * j / sub_k
            b = lo + (hi - lo) * (j + 1) / sub_k
            nodes.append(0.5 * (a + b) + 0.5 * (b - a) * x)
            weights.append(0.5 * (b - a) * w)
            level.append(np.full(order, k))
    return np.concatenate(nodes), np.concatenate(weights), np.concatenate(level)


def uniform_rule(panels, order=8):
    x, w = np.polynomial.legendre.leggauss(order)
    e = np.linspace(0.0, 1.0, panels + 1)
    a, b = e[:-1, None], e[1:, None]
    return (0.5 * (a + b) + 0.5 * (b - a) * x).ravel(), (0.5 * (b - a) * w).ravel()


# ---------------------------------------------------------------------------
# static cap rules


@dataclass(frozen=True, eq=False)
class SphericalQuadrature:
    """Nodes u_k in the open cap with positive weights; integrates f by sum w_k f(u_k)."""

    nodes: np.ndarray
    weights: np.ndarray
    est_error: float
    boundary_grading: float
    piece: np.ndarray
    a: np.ndarray
    b: np.ndarray
    level: np.ndarray
    cone: Cone = None

    def integrate(self, f):
        vals = np.asarray(f(self.nodes), dtype=float)
        return float(np.sum(self.weights * vals))

    def sum(self, vals):
        return float(np.sum(self.weights * vals))

    def __len__(self):
        return len(self.weights)


def _static_rule(cone, depth, ratio=0.5, sub=1, order=8, s_panels=None):
    chart = _require_chart(cone)
    if cone.dim == 2:
        d, w, lev = graded_rule(0.5, depth, ratio, sub, order)
        piece = np.concatenate([np.zeros(d.size, int), np.ones(d.size, int)])
        a = np.concatenate([d, d])
        wt = np.concatenate([w, w])
        lev = np.concatenate([lev, lev])
        b = np.zeros_like(a)
    else:
        t, wt_t, lev_t = graded_rule(1.0, depth, ratio, sub, order)
        if s_panels is None:
            s_panels = 16 if chart.npieces == 1 else 6
        s, ws = uniform_rule(s_panels, order)
        T, S = np.meshgrid(t, s, indexing="ij")
        WT, WS = np.meshgrid(wt_t, ws, indexing="ij")
        L, _ = np.meshgrid(lev_t, s, indexing="ij")
        k = chart.npieces
        piece = np.repeat(np.arange(k), T.size)
        a = np.tile(T.ravel(), k)
        b = np.tile(S.ravel(), k)
        wt = np.tile((WT * WS).ravel(), k)
        lev = np.tile(L.ravel(), k)
    Y, jac = chart.points(piece, a, b)
    r = np.linalg.norm(Y, axis=1)
    U = Y / r[:, None]
    W = wt * jac / r ** cone.dim
    keep = cone.interior_margin(U) > 0
    return U[keep], W[keep], piece[keep], a[keep], b[keep], lev[keep]


@functools.lru_cache(maxsize=64)
def cap_quadrature(cone, tol=1e-10, max_depth=40, ratio=0.5, order=None):
    """Static graded product rule on Omega_C.

    The rule is graded geometrically toward the boundary of the cross-section
    down to ratio**max_depth; est_error compares it with a lower-order rule on
    the constant and linear test functions.
    """
    _require_chart(cone)
    if order is None:
        order = 10 if cone.dim == 2 else (6 if tol >= 1e-8 else 8)
    sub = 2 if cone.dim == 2 else 1
    U, W, piece, a, b, lev = _static_rule(cone, max_depth, ratio, sub, order)
    U2, W2, *_ = _static_rule(cone, max_depth, ratio, sub, max(order - 2, 3))
    u = cone.u_ref
    est = abs(W.sum() - W2.sum()) + abs(W @ (U @ u) - W2 @ (U2 @ u))
    return SphericalQuadrature(nodes=U, weights=W, est_error=float(est), boundary_grading=ratio,
                               piece=piece, a=a, b=b, level=lev, cone=cone)


# ---------------------------------------------------------------------------
# adaptive integration


def _check_finite(vals):
    if not np.all(np.isfinite(vals)):
        raise NumericDivergence("integrand is not finite at a quadrature node")


def _gk_panels(f, chart, cone, piece, lo, hi):
    """Kronrod and Gauss values on the panels (piece, [lo, hi]) of the segment chart."""
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    d = (mid[:, None] + half[:, None] * GK_X[None, :]).ravel()
    pc = np.repeat(piece, 15)
    Y, jac = chart.points(pc, d)
    r = np.linalg.norm(Y, axis=1)
    vals = np.asarray(f(Y / r[:, None]), dtype=float) * jac / r ** 2
    _check_finite(vals)
    vals = vals.reshape(-1, 15)
    K = half * (vals @ GK_WK)
    G = half * (vals @ GK_WG)
    return K, np.abs(K - G)


def _breakpoint_params(chart, cone, breakpoints):
    out = []
    for bp in breakpoints or ():
        if len(bp) == 2 and isinstance(bp, tuple) and isinstance(bp[0], (int, np.integer)):
            out.append((int(bp[0]), float(bp[1])))
            continue
        u = np.asarray(bp, dtype=float)
        if u @ cone.u_ref <= 0:
            continue
        pc, d = chart.to_params(u / np.linalg.norm(u))
        if 0 < d[0] < 0.5:
            out.append((int(pc[0]), float(d[0])))
    return out


def integrate_cap(f, cone, tol=1e-10, max_depth=40, breakpoints=None, max_iter=400):
    """Adaptive integral of f(u) over Omega_C; returns (value, error estimate).

    In the plane this is an adaptive Gauss-Kronrod (7/15) scheme on the
    cross-section with panels started on a geometric grading toward both ends.
    Breakpoints (unit vectors or (end, d) pairs) force panel edges at kinks.
    In 3D a static graded rule is refined globally until two successive rules agree.
    """
    chart = _require_chart(cone)
    if cone.dim == 3:
        return _integrate_cap_3d(f, cone, tol, max_depth)
    init = 8
    edges = sorted(set([0.5 * 0.5 ** k for k in range(init + 1)] + [0.0]))
    cuts = {0: set(edges), 1: set(edges)}
    for pc, d in _breakpoint_params(chart, cone, breakpoints):
        cuts[pc].add(d)
    piece, lo, hi = [], [], []
    for pc in (0, 1):
        e = sorted(cuts[pc])
        for a, b in zip(e[:-1], e[1:]):
            if b > a:
                piece.append(pc)
                lo.append(a)
                hi.append(b)
    piece = np.array(piece)
    lo = np.array(lo)
    hi = np.array(hi)
    K, E = _gk_panels(f, chart, cone, piece, lo, hi)
    min_width = 0.5 * 0.5 ** max_depth
    for _ in range(max_iter):
        total = float(np.sum(K))
        err = float(np.sum(E))
        if err <= tol * max(abs(total), 1e-300) or err == 0.0:
            break
        splittable = (hi - lo) > min_width
        roundoff = E <= 50 * np.finfo(float).eps * np.abs(K)
        cand = splittable & ~roundoff
        if not np.any(cand):
            break
        order = np.argsort(-np.where(cand, E, -1.0), kind="stable")
        cum = np.cumsum(E[order])
        nsplit = int(np.searchsorted(cum, 0.5 * err)) + 1
        sel = order[:nsplit]
        sel = sel[cand[sel]]
        if sel.size == 0:
            break
        m = 0.5 * (lo[sel] + hi[sel])
        # singular end panels are split geometrically, others bisected
        at_end = lo[sel] == 0.0
        m = np.where(at_end, 0.5 * hi[sel], m)
        npc = np.concatenate([piece[sel], piece[sel]])
        nlo = np.concatenate([lo[sel], m])
        nhi = np.concatenate([m, hi[sel]])
        nK, nE = _gk_panels(f, chart, cone, npc, nlo, nhi)
        keep = np.ones(len(lo), bool)
        keep[sel] = False
        piece = np.concatenate([piece[keep], npc])
        lo = np.concatenate([lo[keep], nlo])
        hi = np.concatenate([hi[keep], nhi])
        K = np.concatenate([K[keep], nK])
        E = np.concatenate([E[keep], nE])
    order = np.lexsort((lo, piece))
    return math.fsum(K[order]), float(np.sum(E))


def _integrate_cap_3d(f, cone, tol, max_depth):
    prev = None
    best = None
    for order, s_mult in ((6, 1), (8, 2), (10, 3), (12, 4)):
        base = 16 if cone.chart.npieces == 1 else 6
        U, W, *_ = _static_rule(cone, max_depth, 0.5, 1, order, s_panels=base * s_mult)
        vals = np.asarray(f(U), dtype=float)
        _check_finite(vals)
        val = float(np.sum(W * vals))
        if prev is not None:
            err = abs(val - prev)
            best = (val, err)
            if err <= tol * max(abs(val), 1e-300):
                return best
        prev = val
    return best
