"""C-pseudo-cones: representations, radial and support evaluation, sums and decomposition.

A body is always attached to its cone C.  Radial functions are evaluated on
arrays of unit vectors of shape (N, n) strictly inside the cap.
"""

from dataclasses import dataclass
import functools
import itertools
import math

import numpy as np
from scipy.optimize import linprog, minimize, nnls
from scipy.spatial import HalfspaceIntersection, QhullError

from .cone_geometry import Cone, _orth_frame, boundary_directions, cap_quadrature, polar_cone
from .errors import (ConeMismatch, EmptyWulff, NotInCone, NumericDivergence, OutsideCap,
                     ValidationError)


def _rows(U):
    return np.atleast_2d(np.asarray(U, dtype=float))


class PseudoCone:
    """Base class.  Subclasses implement ``radial``; the rest has generic fallbacks."""

    cone: Cone

    def radial(self, U):
        raise NotImplementedError

    def contains(self, X):
        X = _rows(X)
        r = np.linalg.norm(X, axis=1)
        out = np.zeros(len(X), bool)
        inside = self.cone.contains(X) & (r > 0)
        if np.any(inside):
            U = X[inside] / r[inside, None]
            ok = self.cone.interior_margin(U) > 0
            idx = np.flatnonzero(inside)
            rr = np.full(len(U), np.inf)
            rr[ok] = self.radial(U[ok])
            out[idx] = r[inside] >= rr * (1 - 1e-13)
        return out

    def exact_support(self, V):
        """Closed-form support values, or None when no closed form is available."""
        return None

    def breakpoints(self):
        """Unit directions where the radial function has kinks (planar bodies)."""
        return []

    def normals(self, U):
        """Outward unit normals at the boundary points rho(u) u."""
        return _numeric_normals(self, _rows(U))

    def radial_excess(self, U, z):
        """rho_{z+E}(u) - rho_{z+C}(u) for z in C; overridden where it can be done accurately."""
        U = _rows(U)
        z = np.asarray(z, dtype=float)
        base = ShiftedCone(self.cone, z).radial(U)[:, None] * U - z
        # rho_{z+E} <= rho_{z+C} + rho_E, so the excess lies in [0, rho_E]
        f = lambda e: np.where(self.contains(base + e[:, None] * U), 1.0, -1.0)
        return _monotone_root(f, self.radial(U))

    def to_json(self):
        raise ValidationError("body has no JSON form")


def _numeric_normals(E, U):
    n = U.shape[1]
    rho = E.radial(U)
    # tangent frame at each u
    if n == 2:
        T = np.stack([-U[:, 1], U[:, 0]], axis=1)[:, None, :]
    else:
        a = np.where(np.abs(U[:, :1]) < 0.9, np.array([[1.0, 0, 0]]), np.array([[0, 1.0, 0]]))
        t1 = a - np.einsum("ij,ij->i", a, U)[:, None] * U
        t1 /= np.linalg.norm(t1, axis=1)[:, None]
        t2 = np.cross(U, t1)
        T = np.stack([t1, t2], axis=1)
    margin = E.cone.interior_margin(U)
    h = np.minimum(1e-6, 0.25 * margin)
    grads = []
    for k in range(T.shape[1]):
        up = U + h[:, None] * T[:, k]
        dn = U - h[:, None] * T[:, k]
        up /= np.linalg.norm(up, axis=1)[:, None]
        dn /= np.linalg.norm(dn, axis=1)[:, None]
        grads.append((E.radial(up) - E.radial(dn)) / (2 * h))
    gs = sum(g[:, None] * T[:, k] for k, g in enumerate(grads))
    # the boundary is the level set |x| = rho(x/|x|); its normal is u - grad_S(rho)/rho
    N = -(U - gs / rho[:, None])
    return N / np.linalg.norm(N, axis=1)[:, None]


# ---------------------------------------------------------------------------
# concrete bodies


class WulffShape(PseudoCone):
    """E = C intersected with the halfspaces <x, v_i> <= -hbar_i."""

    def __init__(self, cone, directions, hbar, check=True):
        V = _rows(directions)
        h = np.asarray(hbar, dtype=float).ravel()
        if V.shape[1] != cone.dim:
            raise ConeMismatch("direction dimension does not match the cone")
        if len(h) != len(V):
            raise ValidationError("directions and hbar differ in length")
        if len(V) == 0:
            raise EmptyWulff("no directions")
        nv = np.linalg.norm(V, axis=1)
        V = V / nv[:, None]
        if check:
            P = polar_cone(cone)
            if not np.all(P.contains(V, tol=1e-12)):
                raise OutsideCap("Wulff directions must lie in the closed polar cap")
            if np.any(h < 0) or not np.all(np.isfinite(h)):
                raise ValidationError("hbar must be finite and nonnegative")
            if not np.any(h > 0):
                raise EmptyWulff("at least one hbar must be positive")
        self.cone = cone
        self.directions = V
        self.hbar = h
        self._verts = None

    def radial(self, U):
        U = _rows(U)
        den = -(U @ self.directions.T)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(self.hbar[None, :] > 0, self.hbar[None, :] / den, 0.0)
        return ratio.max(axis=1)

    def active_index(self, U):
        U = _rows(U)
        den = -(U @ self.directions.T)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(self.hbar[None, :] > 0, self.hbar[None, :] / den, 0.0)
        return ratio.argmax(axis=1), ratio

    def contains(self, X):
        X = _rows(X)
        ok = self.cone.contains(X, tol=1e-13)
        return ok & np.all(X @ self.directions.T <= -self.hbar[None, :] * (1 - 1e-13), axis=1)

    def normals(self, U):
        idx, _ = self.active_index(U)
        return self.directions[idx]

    def breakpoints(self):
        if self.cone.dim != 2:
            return []
        P = self.vertices()
        U = P / np.linalg.norm(P, axis=1)[:, None]
        return [u for u in U[self.cone.interior_margin(U) > 0]]

    def vertices(self):
        """Vertices of E (polyhedral cones in n = 2, 3)."""
        if self._verts is not None:
            return self._verts
        if self.cone.kind != "polyhedral" and self.cone.dim != 2:
            return None
        try:
            self._verts = self._vertices_qhull()
        except QhullError:
            self._verts = self._vertices_brute()
        return self._verts

    def _vertices_qhull(self):
        # intersect with a far cap <x, uref> <= T, drop the cap's own vertices,
        # and push the cap out until no true vertex comes near it
        n = self.cone.dim
        a = self.cone.u_ref
        s = 2.0 * float(self.radial(a[None])[0]) + 1e-12
        A = np.vstack([self.cone.normals, self.directions])
        b = np.concatenate([np.zeros(len(self.cone.normals)), self.hbar])
        T = 4.0 * s
        for _ in range(60):
            H = np.vstack([np.c_[A, b], np.r_[a, -T][None]])
            P = HalfspaceIntersection(H, s * a).intersections
            far = P @ a > T * (1 - 1e-9)
            P = P[~far]
            if len(P) and np.max(P @ a) <= 0.5 * T:
                break
            T *= 4.0
        if not len(P):
            raise EmptyWulff("Wulff shape has no vertices")
        # merge duplicates produced by degenerate vertices
        key = np.round(P / (1.0 + np.abs(P).max()), 11)
        _, idx = np.unique(key, axis=0, return_index=True)
        return P[np.sort(idx)]

    def _vertices_brute(self):
        n = self.cone.dim
        A = np.vstack([self.cone.normals, self.directions])
        b = np.concatenate([np.zeros(len(self.cone.normals)), -self.hbar])
        scale = 1.0 + float(np.max(self.hbar))
        pts = []
        for idx in itertools.combinations(range(len(A)), n):
            M = A[list(idx)]
            if abs(np.linalg.det(M)) < 1e-12:
                continue
            x = np.linalg.solve(M, b[list(idx)])
            if np.all(A @ x <= b + 1e-10 * scale):
                pts.append(x)
        if not pts:
            raise EmptyWulff("Wulff shape has no vertices")
        return np.array(pts)

    def exact_support(self, V):
        V = _rows(V)
        P = self.vertices()
        if P is not None:
            return (V @ P.T).max(axis=1)
        return np.array([_circular_wulff_support(self, v) for v in V])

    def radial_excess(self, U, z):
        U = _rows(U)
        z = np.asarray(z, dtype=float)
        rc = ShiftedCone(self.cone, z).radial(U)
        den = -(U @ self.directions.T)
        num = self.hbar - self.directions @ z
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(self.hbar[None, :] > 0, num[None, :] / den, 0.0).max(axis=1)
        # exact zero wherever the shifted cone is the binding constraint
        return np.maximum(r - rc, 0.0)

    def to_json(self):
        return {"kind": "wulff", "directions": self.directions.tolist(), "hbar": self.hbar.tolist()}


def _circular_wulff_support(E, v, tol=1e-11, max_cuts=200):
    """sup <x, v> over a Wulff shape in a circular cone by LP with tangent-plane cuts.

    The cone is replaced by an outer polyhedral cone; whenever the LP optimum
    leaves the circular cone, the tangent plane through its azimuth is added.
    """
    C = E.cone
    a = C.axis
    cb, sb = math.cos(C.half_angle), math.sin(C.half_angle)
    e1, e2 = _orth_frame(a)

    def normal(phi):
        d = math.cos(phi) * e1 + math.sin(phi) * e2
        return sb * a - cb * d  # outward normal of the cone along azimuth phi, times -1

    cuts = [-normal(2 * math.pi * k / 16) for k in range(16)]
    x = None
    prev = math.inf
    for _ in range(max_cuts):
        A = np.vstack([E.directions, np.array(cuts)])
        b = np.concatenate([-E.hbar, np.zeros(len(cuts))])
        res = linprog(-v, A_ub=A, b_ub=b, bounds=[(None, None)] * 3, method="highs",
                      options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10})
        if res.status != 0:
            # unbounded outer model: v is on or near the boundary of the polar cap
            return float(support(E, v[None])[0])
        x = res.x
        val = float(v @ x)
        if prev - val <= tol * max(1.0, abs(val)):
            return val  # cuts no longer move the optimum at solver precision
        prev = val
        axial = x @ a
        radial_part = x - axial * a
        rr = np.linalg.norm(radial_part)
        if rr * cb - axial * sb <= tol * max(1.0, np.linalg.norm(x)):
            return float(v @ x)
        phi = math.atan2(radial_part @ e2, radial_part @ e1)
        cuts.append(-normal(phi))
    return float(v @ x)


class ShiftedCone(PseudoCone):
    """z + C for z in C.  z = o gives C itself, allowed only as a limiting datum."""

    def __init__(self, cone, z):
        z = np.asarray(z, dtype=float).ravel()
        if z.size != cone.dim:
            raise ConeMismatch("shift has the wrong dimension")
        if not cone.contains(z[None], tol=1e-12)[0]:
            raise NotInCone("shift must lie in the cone")
        self.cone = cone
        self.z = z

    def radial(self, U):
        U = _rows(U)
        C, z = self.cone, self.z
        if C.kind == "polyhedral" or C.dim == 2:
            W = C.normals
            wz = np.minimum(W @ z, 0.0)
            return (wz[None, :] / (U @ W.T)).max(axis=1)
        a = C.axis
        c2 = math.cos(C.half_angle) ** 2
        A = U @ a
        B = z @ a
        uz = U @ z
        qa = A * A - c2
        qb = A * B - c2 * uz
        qc = B * B - c2 * (z @ z)
        disc = np.sqrt(np.maximum(qb * qb - qa * qc, 0.0))
        with np.errstate(divide="ignore", invalid="ignore"):
            big = np.where(qb >= 0, (qb + disc) / qa, qc / (qb - disc))
        return np.maximum(big, 0.0)

    def contains(self, X):
        return self.cone.contains(_rows(X) - self.z, tol=1e-13)

    def normals(self, U):
        U = _rows(U)
        C = self.cone
        if C.kind == "polyhedral" or C.dim == 2:
            W = C.normals
            wz = np.minimum(W @ self.z, 0.0)
            return W[(wz[None, :] / (U @ W.T)).argmax(axis=1)]
        X = self.radial(U)[:, None] * U - self.z
        r = np.linalg.norm(X, axis=1)
        r = np.where(r > 0, r, 1.0)
        N = math.cos(C.half_angle) * X / r[:, None] - C.axis
        return N / np.linalg.norm(N, axis=1)[:, None]

    def exact_support(self, V):
        return _rows(V) @ self.z

    def breakpoints(self):
        nz = np.linalg.norm(self.z)
        return [self.z / nz] if self.cone.dim == 2 and nz > 0 else []

    def radial_excess(self, U, z):
        U = _rows(U)
        z = np.asarray(z, dtype=float)
        return np.maximum(ShiftedCone(self.cone, z + self.z).radial(U) - ShiftedCone(self.cone, z).radial(U), 0.0)

    def to_json(self):
        return {"kind": "shifted_cone", "z": self.z.tolist()}


class HyperbolaBody(PseudoCone):
    """{x in the orthant : prod x_i**a_i >= c}, with a_i > 0 (a_i = 1 by default)."""

    def __init__(self, cone, c=1.0, exponents=None):
        n = cone.dim
        if not _is_orthant(cone):
            raise ConeMismatch("hyperbola bodies live in the nonnegative orthant")
        a = np.ones(n) if exponents is None else np.asarray(exponents, dtype=float).ravel()
        if a.size != n or np.any(a <= 0) or not (c > 0):
            raise ValidationError("hyperbola needs c > 0 and positive exponents")
        self.cone = cone
        self.c = float(c)
        self.a = a
        self.A = float(a.sum())

    def radial(self, U):
        U = _rows(U)
        return np.exp((math.log(self.c) - np.log(U) @ self.a) / self.A)

    def contains(self, X):
        X = _rows(X)
        with np.errstate(divide="ignore"):
            return np.all(X > 0, axis=1) & (np.log(np.maximum(X, 1e-300)) @ self.a >= math.log(self.c) - 1e-13)

    def normals(self, U):
        X = self.radial(U)[:, None] * _rows(U)
        N = -self.a[None, :] / X
        return N / np.linalg.norm(N, axis=1)[:, None]

    def exact_support(self, V):
        V = _rows(V)
        av = -V
        out = np.zeros(len(V))
        pos = np.all(av > 0, axis=1)
        if np.any(pos):
            # Lagrange: x_i = lam a_i / |v_i| with prod x_i**a_i = c
            loglam = (math.log(self.c) + np.log(av[pos] / self.a) @ self.a) / self.A
            out[pos] = -self.A * np.exp(loglam)
        return out

    def radial_excess(self, U, z):
        """rho_{z+E} - rho_{z+C} by a Newton iteration on the excess itself."""
        U = _rows(U)
        z = np.asarray(z, dtype=float)
        ratio = z[None, :] / U
        rc = ratio.max(axis=1)
        base = U * (rc[:, None] - ratio)  # exactly zero in the maximizing coordinate
        logc = math.log(self.c)

        # in t = log(excess) the equation G(t) = 0 is convex increasing, so Newton
        # iterates started to the right of the root decrease monotonically to it;
        # excess <= rho_E(u) gives such a start
        with np.errstate(divide="ignore"):
            lb = np.log(base)
        lu = np.log(U)

        def G(t):
            # log(base_i + e u_i) in log space: e u_i can underflow near the cap boundary
            le = t[:, None] + lu
            ls = np.logaddexp(lb, le)
            return ls @ self.a - logc, np.exp(le - ls) @ self.a

        t = np.log(self.radial(U)) + 1e-12
        for _ in range(100):
            gv, dv = G(t)
            step = np.minimum(-gv / dv, 0.0)
            t = t + step
            if np.all(-step <= 1e-15 * np.maximum(1.0, np.abs(t))):
                break
        return np.exp(t)

    def to_json(self):
        d = {"kind": "hyperbola", "c": self.c}
        if not np.all(self.a == 1):
            d["exponents"] = self.a.tolist()
        return d


class LogAsymptoteBody(PseudoCone):
    """{x in the orthant : x_n log(1 + x_1 + ... + x_{n-1}) >= c}.

    Its gap to the face x_n = 0 decays like 1/log|x|, slower than any power.
    """

    def __init__(self, cone, c=1.0):
        if not _is_orthant(cone):
            raise ConeMismatch("log-asymptote body is defined in the orthant")
        if not (c > 0):
            raise ValidationError("log-asymptote body needs c > 0")
        self.cone = cone
        self.c = float(c)

    def _g(self, X):
        return X[:, -1] * np.log1p(np.maximum(X[:, :-1].sum(axis=1), 0.0)) - self.c

    def contains(self, X):
        X = _rows(X)
        return np.all(X > 0, axis=1) & (self._g(X) >= -1e-13 * self.c)

    def radial(self, U):
        U = _rows(U)
        return _monotone_root(lambda r: self._g(r[:, None] * U), np.ones(len(U)))

    def radial_excess(self, U, z):
        U = _rows(U)
        z = np.asarray(z, dtype=float)
        base = ShiftedCone(self.cone, z).radial(U)[:, None] * U - z
        base = np.maximum(base, 0.0)
        return _monotone_root(lambda e: self._g(base + e[:, None] * U), self.radial(U))

    def normals(self, U):
        X = self.radial(U)[:, None] * _rows(U)
        s = X[:, :-1].sum(axis=1)
        G = np.empty_like(X)
        G[:, :-1] = (X[:, -1] / (1 + s))[:, None]
        G[:, -1] = np.log1p(s)
        return -G / np.linalg.norm(G, axis=1)[:, None]

    def exact_support(self, V):
        from scipy.optimize import minimize_scalar
        V = _rows(V)
        out = np.zeros(len(V))
        for k, v in enumerate(V):
            if np.all(v < 0):
                m = float(-v[:-1].max())
                # cheapest way to reach a given coordinate sum s is along one axis
                phi = lambda t: m * math.exp(t) - v[-1] * self.c / math.log1p(math.exp(t))
                res = minimize_scalar(phi, bounds=(-40, 40), method="bounded", options={"xatol": 1e-13})
                out[k] = -res.fun
        return out

    def to_json(self):
        return {"kind": "log_asymptote", "c": self.c}


class SegmentConeBody(PseudoCone):
    """[A, B] + C, the convex hull of (A + C) and (B + C)."""

    def __init__(self, cone, A, B):
        A = np.asarray(A, dtype=float)
        B = np.asarray(B, dtype=float)
        if not np.all(cone.contains(np.array([A, B]), tol=1e-12)):
            raise NotInCone("segment ends must lie in the cone")
        self.cone = cone
        self.A = A
        self.B = B

    def radial(self, U):
        U = _rows(U)
        if self.cone.kind == "polyhedral" or self.cone.dim == 2:
            return self._radial_facets(U)
        phi = lambda lam: _shift_radial(self.cone, (1 - lam)[:, None] * self.A + lam[:, None] * self.B, U)
        # rho of z + C is convex in z, so golden-section search over the segment parameter
        lo = np.zeros(len(U))
        hi = np.ones(len(U))
        g = (math.sqrt(5) - 1) / 2
        for _ in range(90):
            x1 = hi - g * (hi - lo)
            x2 = lo + g * (hi - lo)
            left = phi(x1) <= phi(x2)
            hi = np.where(left, x2, hi)
            lo = np.where(left, lo, x1)
        ends = np.minimum(phi(np.zeros(len(U))), phi(np.ones(len(U))))
        return np.minimum(phi(0.5 * (lo + hi)), ends)

    def _radial_facets(self, U):
        # rho(lam) = max_j min(a_j + lam b_j, 0) / d_j is convex and piecewise
        # linear in lam, so its minimum sits at 0, 1, a zero of some a_j + lam b_j
        # or a crossing of two pieces
        W = self.cone.normals
        a = W @ self.A
        b = W @ (self.B - self.A)
        d = U @ W.T
        with np.errstate(divide="ignore", invalid="ignore"):
            ca, cb = a / d, b / d
            cand = [np.zeros(len(U)), np.ones(len(U))]
            cand += [np.broadcast_to(-a[j] / b[j], (len(U),)) for j in range(len(a))]
            for j in range(len(a)):
                for k in range(j + 1, len(a)):
                    cand.append((ca[:, k] - ca[:, j]) / (cb[:, j] - cb[:, k]))
            L = np.clip(np.nan_to_num(np.stack(cand, axis=1), nan=0.0, posinf=0.0, neginf=0.0), 0.0, 1.0)
            vals = np.minimum(a[None, None, :] + L[:, :, None] * b[None, None, :], 0.0) / d[:, None, :]
        vals = np.nan_to_num(vals, nan=0.0).max(axis=2)
        return vals.min(axis=1)

    def exact_support(self, V):
        V = _rows(V)
        return np.maximum(V @ self.A, V @ self.B)

    def to_json(self):
        return {"kind": "segment_cone", "a": self.A.tolist(), "b": self.B.tolist()}


def _shift_radial(cone, Z, U):
    """Row-wise radial function of z_k + C at u_k."""
    if cone.kind == "polyhedral" or cone.dim == 2:
        W = cone.normals
        wz = np.minimum(Z @ W.T, 0.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.nan_to_num(wz / (U @ W.T), nan=0.0).max(axis=1)
    a = cone.axis
    c2 = math.cos(cone.half_angle) ** 2
    A = U @ a
    B = Z @ a
    uz = np.einsum("ij,ij->i", U, Z)
    qa = A * A - c2
    qb = A * B - c2 * uz
    qc = B * B - c2 * np.einsum("ij,ij->i", Z, Z)
    disc = np.sqrt(np.maximum(qb * qb - qa * qc, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        big = np.where(qb >= 0, (qb + disc) / qa, qc / (qb - disc))
    return np.maximum(np.nan_to_num(big, nan=0.0), 0.0)


def _monotone_root(f, start):
    """Smallest r > 0 with f(r) >= 0 for f increasing along each ray (vectorized).

    Brackets by doubling steps in log r, then bisects in log r to full relative precision.
    """
    lh = np.log(np.maximum(start, 1e-300))
    step = np.full(len(lh), math.log(2.0))
    for _ in range(64):
        bad = (f(np.exp(lh)) < 0) & (lh < 700)
        if not np.any(bad):
            break
        lh = np.where(bad, np.minimum(lh + step, 700.0), lh)
        step = np.where(bad, 2 * step, step)
    ll = lh - math.log(2.0)
    step = np.full(len(lh), math.log(2.0))
    for _ in range(64):
        good = (f(np.exp(ll)) >= 0) & (ll > -744)
        if not np.any(good):
            break
        lh = np.where(good, ll, lh)
        ll = np.where(good, np.maximum(ll - step, -745.0), ll)
        step = np.where(good, 2 * step, step)
    for _ in range(200):
        mid = 0.5 * (ll + lh)
        ok = f(np.exp(mid)) >= 0
        lh = np.where(ok, mid, lh)
        ll = np.where(ok, ll, mid)
        if np.all(lh - ll <= 2.5e-16 * np.maximum(1.0, np.abs(lh))):
            break
    out = np.exp(lh)
    # a root below the smallest normal number is reported as 0
    return np.where(f(np.exp(np.full(len(lh), -745.0))) >= 0, 0.0, out)


def _is_orthant(cone):
    if cone.kind != "polyhedral":
        return False
    W = cone.normals
    return (W.shape[0] == cone.dim and np.all(W <= 1e-15)
            and np.allclose(np.abs(W).sum(axis=0), 1) and np.allclose(np.abs(W).sum(axis=1), 1))


class Scaled(PseudoCone):
    def __init__(self, base, t):
        if not (t > 0 and np.isfinite(t)):
            raise ValidationError("scale factor must be positive")
        self.base = base
        self.t = float(t)
        self.cone = base.cone

    def radial(self, U):
        return self.t * self.base.radial(U)

    def contains(self, X):
        return self.base.contains(_rows(X) / self.t)

    def normals(self, U):
        return self.base.normals(U)

    def exact_support(self, V):
        h = self.base.exact_support(V)
        return None if h is None else self.t * h

    def breakpoints(self):
        return self.base.breakpoints()

    def radial_excess(self, U, z):
        return self.t * self.base.radial_excess(U, np.asarray(z, dtype=float) / self.t)

    def to_json(self):
        return {"kind": "scale", "t": self.t, "body": self.base.to_json()}


class Translated(PseudoCone):
    """z + E.  With allow_outside the shift may leave the cone (used for E - z in decompositions)."""

    def __init__(self, base, z, allow_outside=False):
        z = np.asarray(z, dtype=float).ravel()
        if z.size != base.cone.dim:
            raise ConeMismatch("shift has the wrong dimension")
        if not allow_outside and not base.cone.contains(z[None], tol=1e-12)[0]:
            raise NotInCone("translation vector must lie in the cone")
        self.base = base
        self.z = z
        self.cone = base.cone
        self.allow_outside = allow_outside

    def contains(self, X):
        X = _rows(X)
        return self.cone.contains(X, tol=1e-13) & self.base.contains(X - self.z)

    def radial(self, U):
        U = _rows(U)
        if np.linalg.norm(self.z) == 0:
            return self.base.radial(U)
        if not self.allow_outside:
            return ShiftedCone(self.cone, self.z).radial(U) + self.base.radial_excess(U, self.z)
        f = lambda r: np.where(self.base.contains(r[:, None] * U - self.z), 1.0, -1.0)
        start = np.full(len(U), max(1.0, float(np.linalg.norm(self.z))))
        return _monotone_root(f, start)

    def normals(self, U):
        if isinstance(self.base, (WulffShape, HyperbolaBody, ShiftedCone, LogAsymptoteBody)) \
                and not self.allow_outside:
            X = self.radial(U)[:, None] * _rows(U) - self.z
            r = np.linalg.norm(X, axis=1)
            return self.base.normals(X / r[:, None])
        return _numeric_normals(self, _rows(U))

    def exact_support(self, V):
        h = self.base.exact_support(V)
        return None if h is None else h + _rows(V) @ self.z

    def breakpoints(self):
        if self.cone.dim != 2:
            return []
        bps = []
        if not self.allow_outside:
            bps.append(self.z / np.linalg.norm(self.z))
        for b in self.base.breakpoints():
            # kink of the base at direction b moves to the direction of z + rho_b b
            x = self.z + self.base.radial(b[None])[0] * b
            bps.append(x / np.linalg.norm(x))
        return bps

    def to_json(self):
        return {"kind": "translate", "z": self.z.tolist(), "body": self.base.to_json()}


class SumBody(PseudoCone):
    """Radial sum (rho_L + rho_R) or Minkowski sum (outer Wulff approximation of h_L + h_R)."""

    def __init__(self, left, right, op, directions=None):
        if left.cone is not right.cone and not _same_cone(left.cone, right.cone):
            raise ConeMismatch("summands live in different cones")
        if op not in ("radial", "minkowski"):
            raise ValidationError("sum op must be 'radial' or 'minkowski'")
        self.left = left
        self.right = right
        self.op = op
        self.cone = left.cone
        self._approx = None
        self._coarse = None
        self._dirs = directions

    def _build(self):
        if self._approx is None:
            V = self._dirs if self._dirs is not None else minkowski_directions(self)
            hbar = -(support(self.left, V, "auto") + support(self.right, V, "auto"))
            hbar = np.maximum(hbar, 0.0)
            self._approx = WulffShape(self.cone, V, hbar, check=False)
            half = np.arange(0, len(V), 2)
            self._coarse = WulffShape(self.cone, V[half], hbar[half], check=False)
        return self._approx

    def radial(self, U):
        if self.op == "radial":
            return self.left.radial(U) + self.right.radial(U)
        return self._build().radial(U)

    def contains(self, X):
        if self.op == "minkowski":
            return self._build().contains(X)
        return super().contains(X)

    def radial_excess(self, U, z):
        if self.op == "minkowski":
            return self._build().radial_excess(U, z)
        return super().radial_excess(U, z)

    def approximation_error(self, U):
        """Pointwise gap between the fine and a half-density outer approximation."""
        if self.op == "radial":
            return np.zeros(len(_rows(U)))
        self._build()
        return np.abs(self._approx.radial(U) - self._coarse.radial(U))

    def normals(self, U):
        if self.op == "minkowski":
            return self._build().normals(U)
        return _numeric_normals(self, _rows(U))

    def exact_support(self, V):
        if self.op == "minkowski":
            a = self.left.exact_support(V)
            b = self.right.exact_support(V)
            if a is not None and b is not None:
                return a + b
        return None

    def breakpoints(self):
        if self.op == "minkowski":
            return self._build().breakpoints()
        return list(self.left.breakpoints()) + list(self.right.breakpoints())

    def to_json(self):
        return {"kind": "sum", "op": self.op, "left": self.left.to_json(), "right": self.right.to_json()}


def _same_cone(a, b):
    if a.dim != b.dim or a.kind != b.kind:
        return False
    if a.kind == "circular":
        return np.allclose(a.axis, b.axis) and abs(a.half_angle - b.half_angle) < 1e-15
    return a.normals.shape == b.normals.shape and np.allclose(a.normals, b.normals)


# ---------------------------------------------------------------------------
# operations


def radial(E, U):
    U = _rows(U)
    if np.any(E.cone.interior_margin(U) <= 0):
        raise OutsideCap("radial function is evaluated on the open cap only")
    return E.radial(U)


def scale(E, t):
    if isinstance(E, Scaled):
        return Scaled(E.base, E.t * t)
    return Scaled(E, t)


def translate(E, z):
    z = np.asarray(z, dtype=float).ravel()
    if not E.cone.contains(z[None], tol=1e-12)[0]:
        raise NotInCone("translation vector must lie in the cone")
    if np.linalg.norm(z) == 0:
        return E
    if isinstance(E, Scaled):
        return Scaled(translate(E.base, z / E.t), E.t)
    if isinstance(E, ShiftedCone):
        return ShiftedCone(E.cone, E.z + z)
    if isinstance(E, Translated) and not E.allow_outside:
        return Translated(E.base, E.z + z)
    if isinstance(E, WulffShape) and E.cone.kind == "polyhedral":
        W = E.cone.normals
        V = np.vstack([E.directions, W])
        h = np.concatenate([E.hbar - E.directions @ z, -(W @ z)])
        return WulffShape(E.cone, V, np.maximum(h, 0.0), check=False)
    return Translated(E, z)


def radial_sum(E, F):
    return SumBody(E, F, "radial")


def minkowski_sum(E, F, directions=None):
    """E + F.  Sums of dilates of one body are returned exactly as a dilate."""
    bE, tE = (E.base, E.t) if isinstance(E, Scaled) else (E, 1.0)
    bF, tF = (F.base, F.t) if isinstance(F, Scaled) else (F, 1.0)
    if bE is bF:
        return scale(bE, tE + tF)
    if isinstance(E, ShiftedCone) and isinstance(F, ShiftedCone):
        return ShiftedCone(E.cone, E.z + F.z)
    if (directions is None and E.cone.dim == 2 and isinstance(bE, WulffShape)
            and isinstance(bF, WulffShape) and _same_cone(E.cone, F.cone)):
        # planar polygons add edge by edge: the sum is cut out by the union of the normals
        V = np.vstack([bE.directions, bF.directions])
        _, keep = np.unique(np.round(V, 14), axis=0, return_index=True)
        V = V[np.sort(keep)]
        hbar = -(tE * bE.exact_support(V) + tF * bF.exact_support(V))
        return WulffShape(E.cone, V, np.maximum(hbar, 0.0), check=False)
    return SumBody(E, F, "minkowski", directions)


def polar_cap_sample(cone, m=None):
    """Deterministic sample of the closed polar cap, boundary included."""
    P = polar_cone(cone)
    if m is None:
        m = 512 if cone.dim == 2 else 4096
    if cone.dim == 2:
        g = P.unit_generators()
        ang = math.acos(np.clip(g[0] @ g[1], -1, 1))
        e = g[1] - (g[0] @ g[1]) * g[0]
        e /= np.linalg.norm(e)
        t = ang * np.arange(m) / (m - 1)
        return np.cos(t)[:, None] * g[0] + np.sin(t)[:, None] * e
    nb = max(64, m // 8)
    B = boundary_directions(cone, nb)
    chart = P.chart
    ni = m - nb
    per = max(1, ni // chart.npieces)
    nt = max(2, int(round(math.sqrt(per / 2))))
    ns = max(2, per // nt)
    tt = (np.arange(nt) + 0.5) / nt
    ss = (np.arange(ns) + 0.5) / ns
    T, S = np.meshgrid(tt ** 2, ss, indexing="ij")
    pieces = np.repeat(np.arange(chart.npieces), T.size)
    Y, _ = chart.points(pieces, np.tile(T.ravel(), chart.npieces), np.tile(S.ravel(), chart.npieces))
    I = Y / np.linalg.norm(Y, axis=1)[:, None]
    return np.vstack([B, I])


def minkowski_directions(body, m=None):
    V = [polar_cap_sample(body.cone, m)]

    def collect(E):
        if isinstance(E, WulffShape):
            V.append(E.directions)
        elif isinstance(E, (Scaled, Translated)):
            collect(E.base)
        elif isinstance(E, SumBody):
            collect(E.left)
            collect(E.right)

    collect(body)
    return np.vstack(V)


# ---------------------------------------------------------------------------
# numeric support and related searches over the cap


@functools.lru_cache(maxsize=32)
def _search_rule(cone):
    """Graded cap nodes plus, in 3D, a log-log grid toward every corner of the cross-section."""
    depth = 60 if cone.dim == 2 else 34
    q = cap_quadrature(cone, 1e-6, depth, 0.5, 4)
    if cone.dim == 2 or cone.kind != "polyhedral":
        return q.nodes, q.piece, q.a, q.b
    k = cone.chart.npieces
    g = 2.0 ** -np.arange(0.0, 120.0, 2.0)
    T, Sg = np.meshgrid(g, g, indexing="ij")
    pc = np.repeat(np.arange(k), T.size)
    ta = np.tile(T.ravel(), k)
    sb = np.tile(Sg.ravel(), k)
    Y, _ = cone.chart.points(pc, ta, sb)
    U = Y / np.linalg.norm(Y, axis=1)[:, None]
    ok = cone.interior_margin(U) > 0
    return (np.vstack([q.nodes, U[ok]]), np.concatenate([q.piece, pc[ok]]),
            np.concatenate([q.a, ta[ok]]), np.concatenate([q.b, sb[ok]]))


def _tau_floor(cone):
    # below this the chart cannot place points strictly inside a curved boundary
    return 1e-300 if cone.kind == "polyhedral" else 1e-13


def _eval_params(E, piece, a, b):
    chart = E.cone.chart
    Y, _ = chart.points(piece, a, b)
    U = Y / np.linalg.norm(Y, axis=1)[:, None]
    return U, E.radial(U)


def _cap_maximize(E, score, V=None):
    """Maximize score(X, U, k) = value for direction k over boundary points X = rho(u) u.

    score receives points (N, n), unit vectors (N, n) and, for a batch of
    directions, returns (N, M).  Returns best values (M,) and the unit vectors.
    """
    U, r_piece, r_a, r_b = _search_rule(E.cone)
    rho = E.radial(U)
    X = rho[:, None] * U
    S = score(X, U)
    M = S.shape[1]
    best = np.full(M, -np.inf)
    best_u = np.zeros((M, E.cone.dim))
    floor = _tau_floor(E.cone)
    if E.cone.dim == 2:
        for pc in (0, 1):
            sel = np.flatnonzero(r_piece == pc)
            order = sel[np.argsort(r_a[sel])]
            d = r_a[order]
            Sp = S[order]
            k = Sp.argmax(axis=0)
            lo = np.log(np.where(k > 0, d[np.maximum(k - 1, 0)], max(d[0] * 2.0 ** -200, floor)))
            hi = np.log(d[np.minimum(k + 1, len(d) - 1)])
            hi = np.where(k == len(d) - 1, math.log(0.5), hi)
            cols = np.arange(M)

            def phi(t):
                Uu, r = _eval_params(E, np.full(M, pc), np.exp(t), None)
                return score(r[:, None] * Uu, Uu)[cols, cols], Uu

            g = (math.sqrt(5) - 1) / 2
            x1 = hi - g * (hi - lo)
            x2 = lo + g * (hi - lo)
            f1, _ = phi(x1)
            f2, _ = phi(x2)
            for _ in range(120):
                left = f1 >= f2
                hi = np.where(left, x2, hi)
                lo = np.where(left, lo, x1)
                nx1 = np.where(left, hi - g * (hi - lo), x2)
                nx2 = np.where(left, x1, lo + g * (hi - lo))
                nf1 = np.where(left, phi(nx1)[0], f2)
                nf2 = np.where(left, f1, phi(nx2)[0])
                x1, x2, f1, f2 = nx1, nx2, nf1, nf2
                if np.all(hi - lo < 1e-14):
                    break
            xs = np.where(f1 >= f2, x1, x2)
            fv, Uu = phi(xs)
            node_best = Sp[k, cols]
            take_node = node_best > fv
            fv = np.where(take_node, node_best, fv)
            Uu = np.where(take_node[:, None], U[order][k], Uu)
            upd = fv > best
            best = np.where(upd, fv, best)
            best_u = np.where(upd[:, None], Uu, best_u)
        return best, best_u
    # 3D: both scores in use have convex superlevel sets in the gnomonic chart,
    # so the score is unimodal along every ray from the chart center and the
    # ray-wise maximum is unimodal in the ray parameter.  A nested golden
    # search (outer over the ray, inner over log tau) is therefore exact even
    # on creases where two facets meet.  Polygon sectors use log s measured
    # from either end; the disk is cut where the node profile is lowest.
    cols = np.arange(M)
    lfloor = max(math.log(floor), -250.0)
    polygon = E.cone.kind == "polyhedral"
    chart = E.cone.chart
    sweeps = [(pc, rev) for pc in range(chart.npieces) for rev in ((False, True) if polygon else (False,))]
    for pc, rev in sweeps:
        sel = np.flatnonzero(r_piece == pc)
        k = sel[S[sel].argmax(axis=0)]
        pcs = np.full(M, pc)

        def val(x0, x1):
            sv = np.exp(x1) if polygon else np.mod(x1, 1.0)
            if polygon:
                # s measured from the sector's first vertex, or from its second when rev
                A = chart.V[(pc + rev) % chart.npieces]
                B = chart.V[(pc + 1 - rev) % chart.npieces]
                t = np.exp(x0)[:, None]
                Y = (1 - t) * (A + sv[:, None] * (B - A)) + t * chart.c
                Uu = Y / np.linalg.norm(Y, axis=1)[:, None]
                r = E.radial(Uu)
            else:
                Uu, r = _eval_params(E, pcs, np.exp(x0), sv)
            f = score(r[:, None] * Uu, Uu)[cols, cols]
            return np.where(np.isfinite(f), f, -np.inf), Uu

        def inner(x1):
            x0 = _golden(lambda t: val(t, x1)[0], np.full(M, lfloor), np.zeros(M), 58)
            return x0, val(x0, x1)[0]

        if polygon:
            lo1, hi1 = np.full(M, lfloor), np.full(M, math.log(0.5))
        else:
            nb = 64
            prof = np.full((nb, M), -np.inf)
            np.maximum.at(prof, np.minimum((r_b[sel] * nb).astype(int), nb - 1), S[sel])
            cut = (prof.argmin(axis=0) + 0.5) / nb
            lo1, hi1 = cut, cut + 1.0
        p1 = _golden(lambda x: inner(x)[1], lo1, hi1, 58)
        p0, _ = inner(p1)
        fv, Uu = val(p0, p1)
        node_best = S[k, cols]
        take_node = node_best > fv
        fv = np.where(take_node, node_best, fv)
        Uu = np.where(take_node[:, None], U[k], Uu)
        upd = fv > best
        best = np.where(upd, fv, best)
        best_u = np.where(upd[:, None], Uu, best_u)
    return best, best_u


def _golden(f, lo, hi, iters=80):
    """Vectorized golden-section maximization of f on [lo, hi]."""
    g = (math.sqrt(5) - 1) / 2
    lo = lo.copy()
    hi = hi.copy()
    x1 = hi - g * (hi - lo)
    x2 = lo + g * (hi - lo)
    f1, f2 = f(x1), f(x2)
    for _ in range(iters):
        left = f1 >= f2
        hi = np.where(left, x2, hi)
        lo = np.where(left, lo, x1)
        nx1 = np.where(left, hi - g * (hi - lo), x2)
        nx2 = np.where(left, x1, lo + g * (hi - lo))
        fn = f(np.where(left, nx1, nx2))
        f1, f2 = np.where(left, fn, f2), np.where(left, f1, fn)
        x1, x2 = nx1, nx2
        if np.all(hi - lo < 1e-13):
            break
    return np.where(f1 >= f2, x1, x2)


def support(E, V, method="numeric"):
    """h_E(v) = sup <x, v> over E for v in the closed polar cap.

    The numeric route maximizes <rho(u) u, v> over graded cap nodes and
    refines locally; method="exact" uses closed forms where the body has one.
    """
    V = _rows(V)
    if V.shape[1] != E.cone.dim:
        raise ConeMismatch("direction dimension does not match the cone")
    V = V / np.linalg.norm(V, axis=1)[:, None]
    if not np.all(polar_cone(E.cone).contains(V, tol=1e-12)):
        raise OutsideCap("support is evaluated on the closed polar cap only")
    if method in ("exact", "auto"):
        h = E.exact_support(V)
        if h is not None:
            return h
        if method == "exact":
            raise ValidationError("no closed-form support for this body")
    h, _ = _cap_maximize(E, lambda X, U: X @ V.T)
    if not np.all(np.isfinite(h)) or np.any(h > 1e-9 * (1 + np.abs(h))):
        raise NumericDivergence("support evaluation did not stabilize")
    return np.minimum(h, 0.0)


def truncated_wulff_support(E, v, t):
    """sup of <x, v> over E intersected with {<x, u_ref> <= t} by linear programming."""
    u = E.cone.u_ref
    if E.cone.kind != "polyhedral" and E.cone.dim != 2:
        raise ValidationError("truncated support needs a polyhedral cone")
    A = np.vstack([E.cone.normals, E.directions, u[None, :]])
    b = np.concatenate([np.zeros(len(E.cone.normals)), -E.hbar, [t]])
    res = linprog(-np.asarray(v, float), A_ub=A, b_ub=b, bounds=[(None, None)] * E.cone.dim, method="highs")
    if res.status != 0:
        return -np.inf
    return -res.fun


def distance_from_origin(E):
    """b(E) = min of rho_E over the cap."""
    val, _ = _cap_maximize(E, lambda X, U: -np.linalg.norm(X, axis=1)[:, None])
    return float(-val[0])


@dataclass(frozen=True, eq=False)
class Decomposition:
    z: np.ndarray
    asymptotic_part: PseudoCone
    residual: float
    degenerate: bool

    def to_json(self):
        return {"z": self.z.tolist(), "residual": self.residual, "degenerate": self.degenerate}


def _project_to_cone(cone, z):
    if cone.contains(z[None])[0]:
        return z
    if cone.kind == "polyhedral" or cone.dim == 2:
        G = cone.unit_generators()
        lam, _ = nnls(G.T, z)
        return G.T @ lam
    a = cone.axis
    t = z @ a
    w = z - t * a
    nw = np.linalg.norm(w)
    beta = cone.half_angle
    if nw == 0 or t * math.tan(beta) >= nw:
        return z
    if nw * math.tan(beta) <= -t:
        return np.zeros_like(z)
    # project onto the boundary ray in the plane of a and w
    g = math.cos(beta) * a + math.sin(beta) * w / nw
    return max(z @ g, 0.0) * g


def starting_point(E, m=64, threshold=1e-6):
    """Least-squares fit of h_E(v) = <z, v> on boundary directions v of the polar cap."""
    V = boundary_directions(E.cone, m)
    h = support(E, V)
    z, *_ = np.linalg.lstsq(V, h, rcond=None)
    residual = float(np.max(np.abs(V @ z - h)))
    scale_z = 1.0 + float(np.linalg.norm(z))
    degenerate = residual > threshold * scale_z
    z = _project_to_cone(E.cone, z)
    if np.linalg.norm(z) <= threshold * scale_z:
        z = np.zeros_like(z)
    if degenerate or np.linalg.norm(z) == 0:
        part = E
    else:
        part = Translated(E, -z, allow_outside=True)
    return Decomposition(z=z, asymptotic_part=part, residual=residual, degenerate=bool(degenerate))


# ---------------------------------------------------------------------------
# JSON


def body_from_json(spec, cone, named=None):
    if isinstance(spec, str):
        if named is None or spec not in named:
            raise ValidationError("unknown body reference %r" % spec)
        return body_from_json(named[spec], cone, named)
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ValidationError("body spec must be an object with a 'kind'")
    kind = spec["kind"]
    try:
        if kind == "wulff":
            return WulffShape(cone, spec["directions"], spec["hbar"])
        if kind == "hyperbola":
            return HyperbolaBody(cone, float(spec.get("c", 1.0)), spec.get("exponents"))
        if kind == "log_asymptote":
            return LogAsymptoteBody(cone, float(spec.get("c", 1.0)))
        if kind == "shifted_cone":
            return ShiftedCone(cone, spec["z"])
        if kind == "segment_cone":
            return SegmentConeBody(cone, spec["a"], spec["b"])
        if kind == "sum":
            left = body_from_json(spec["left"], cone, named)
            right = body_from_json(spec["right"], cone, named)
            op = spec.get("op", "minkowski")
            if op == "minkowski":
                return minkowski_sum(left, right)
            if op == "radial":
                return radial_sum(left, right)
            raise ValidationError("sum op must be 'minkowski' or 'radial'")
        if kind == "scale":
            return scale(body_from_json(spec["body"], cone, named), float(spec["t"]))
        if kind == "translate":
            return translate(body_from_json(spec["body"], cone, named), spec["z"])
    except KeyError as exc:
        raise ValidationError("body spec of kind %r is missing %s" % (kind, exc))
    raise ValidationError("unknown body kind %r" % kind)
