"""Numerical checks of identities, inequalities and counterexamples for weighted functionals.

Every check returns a CheckResult.  Inequalities are read as lhs <= rhs with
margin = rhs - lhs; a margin inside the combined error band is reported as
equality_within_tol, never as holds.
"""

from dataclasses import dataclass, field
import math

import numpy as np
from scipy.integrate import quad

from .cone_geometry import Cone, cap_quadrature, polar_cone, _static_rule
from .errors import (ValidationError, ExponentOutOfRange, GradientUnavailable, InconclusiveFit,
                     UnknownCase, NotInCone)
from .pseudocone import (HyperbolaBody, LogAsymptoteBody, ShiftedCone, WulffShape, minkowski_sum, polar_cap_sample, radial_sum,
                         scale, translate)
from .weighted_functionals import (asymptotic_covolume, cone_weighted_volume, covolume,
                                   directional_derivative_integral, finiteness_probe, volume,
                                   Estimate, _sam_integrand, _t_integrand)
from .weights import WeightSpec

__all__ = ["CheckResult", "check_bm", "check_radial_containment", "check_convolution_identity",
           "check_gradient_identity", "check_decay", "explore_asymptotic_bm", "bm_sweep",
           "random_wulff", "reproduce_counterexample", "COUNTEREXAMPLES", "finiteness_table"]

VERDICTS = ("holds", "violated", "equality_within_tol", "inconclusive")


@dataclass
class CheckResult:
    name: str
    lhs: float
    rhs: float
    lhs_error: float = 0.0
    rhs_error: float = 0.0
    verdict: str = "inconclusive"
    witness: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)

    @property
    def margin(self):
        if self.lhs is None or self.rhs is None:
            return None
        return self.rhs - self.lhs

    @property
    def error(self):
        return self.lhs_error + self.rhs_error

    def to_json(self):
        return {"name": self.name, "lhs": self.lhs, "rhs": self.rhs, "lhs_error": self.lhs_error,
                "rhs_error": self.rhs_error, "margin": self.margin, "verdict": self.verdict,
                "witness": self.witness, "details": self.details}

    def csv_row(self):
        return [self.name, self.lhs, self.rhs, self.margin, self.verdict]


def _inequality_verdict(margin, band):
    if abs(margin) <= band:
        return "equality_within_tol"
    return "holds" if margin > 0 else "violated"


def _identity_verdict(lhs, rhs, err, rtol):
    return "holds" if abs(lhs - rhs) <= max(rtol * abs(rhs), err) else "violated"


def _json(E):
    try:
        return E.to_json()
    except Exception:
        return {"kind": type(E).__name__}


# ---------------------------------------------------------------------------
# Brunn-Minkowski for the co-volume


def check_bm(E1, E2, theta, rtol=1e-9, minkowski=False):
    """Vbar(E1 + E2)**(1/p) <= Vbar(E1)**(1/p) + Vbar(E2)**(1/p), p = n - q.

    The verdict uses the radial sum, whose co-volume dominates that of the
    Minkowski sum, so it is the conservative side.  With minkowski=True the
    margin of the (outer-approximated) Minkowski sum is reported as well.
    """
    n, q = E1.cone.dim, theta.q
    if not 0 <= q <= n - 1:
        raise ExponentOutOfRange("the co-volume Brunn-Minkowski inequality needs 0 <= q <= n-1")
    p = n - q
    v1, v2 = covolume(E1, theta), covolume(E2, theta)
    vs = covolume(radial_sum(E1, E2), theta)

    def root(est):
        val = est.value ** (1.0 / p)
        return val, val / (p * est.value) * est.error

    lhs, le = root(vs)
    r1, e1 = root(v1)
    r2, e2 = root(v2)
    rhs, re = r1 + r2, e1 + e2
    margin = rhs - lhs
    verdict = _inequality_verdict(margin, max(le + re, rtol * abs(rhs)))
    details = {"p": p, "covolumes": [v1.value, v2.value, vs.value]}
    if minkowski:
        vm = covolume(minkowski_sum(E1, E2), theta)
        m, me = root(vm)
        details["minkowski_lhs"] = m
        details["minkowski_margin"] = rhs - m
        details["minkowski_error"] = me + re
    return CheckResult("bm", lhs, rhs, le, re, verdict,
                       {"E1": _json(E1), "E2": _json(E2), "weight": theta.to_json()}, details)


def random_wulff(cone, rng, k=None):
    """Wulff shape with 1..4 random directions inside the polar cap and hbar in [0.5, 2]."""
    P = polar_cone(cone)
    pool = polar_cap_sample(cone, 512 if cone.dim == 2 else 2048)
    pool = pool[P.interior_margin(pool) > 0.05]
    k = int(rng.integers(1, 5)) if k is None else k
    V = pool[rng.choice(len(pool), size=k, replace=False)]
    h = rng.uniform(0.5, 2.0, size=k)
    return WulffShape(cone, V, h)


def bm_sweep(cone, theta, count, seed=0, dilates=0):
    """Randomized Brunn-Minkowski sweep; instance i is drawn from the seed pair (seed, i).
    The first `dilates` instances pair a body with a random dilate of itself."""
    out = []
    for i in range(count):
        rng = np.random.default_rng([seed, i])
        E1 = random_wulff(cone, rng)
        E2 = scale(E1, float(rng.uniform(0.3, 3.0))) if i < dilates else random_wulff(cone, rng)
        r = check_bm(E1, E2, theta)
        r.witness["seed"] = [seed, i]
        out.append(r)
    return out


def check_radial_containment(E1, E2, tol=1e-9, nodes=None):
    """rho of the radial sum >= rho of the Minkowski sum at every quadrature node."""
    if nodes is None:
        nodes = cap_quadrature(E1.cone, 1e-6, 20).nodes
    rad = radial_sum(E1, E2).radial(nodes)
    M = minkowski_sum(E1, E2)
    mink = M.radial(nodes)
    slack = tol * np.maximum(1.0, rad)
    if hasattr(M, "approximation_error"):
        slack = slack + M.approximation_error(nodes)
    gap = rad - mink
    worst = float(np.max(-gap))
    band = float(slack[int(np.argmax(-gap))])
    strict = int(np.sum(gap > slack))
    if np.all(np.abs(gap) <= slack):
        verdict = "equality_within_tol"
    elif np.all(gap >= -slack):
        verdict = "holds"
    else:
        verdict = "violated"
    return CheckResult("radial_containment", worst, 0.0, band, 0.0, verdict,
                       {"E1": _json(E1), "E2": _json(E2)},
                       {"nodes": int(len(nodes)), "strict_nodes": strict, "max_gap": float(np.max(gap))})


# ---------------------------------------------------------------------------
# identities for q > n


def _require_q_above_n(theta, cone):
    if not theta.q > cone.dim:
        raise ExponentOutOfRange("this identity needs q > n")


def _nonzero(z, cone):
    z = np.asarray(z, dtype=float).ravel()
    if np.linalg.norm(z) == 0:
        raise ValidationError("z must be nonzero")
    if not cone.contains(z[None], tol=1e-12)[0]:
        raise NotInCone("z must lie in the cone")
    return z


def check_convolution_identity(A, z, theta, rtol=1e-5, tol=1e-11):
    """T(A, z) + V(z + A) against the cone-weighted volume V(z + C)."""
    _require_q_above_n(theta, A.cone)
    z = _nonzero(z, A.cone)
    T = asymptotic_covolume(A, z, theta, tol)
    V = volume(translate(A, z), theta, tol)
    chi = cone_weighted_volume(z, theta, A.cone, tol)
    lhs, rhs = T.value + V.value, chi.value
    err = T.error + V.error + chi.error
    return CheckResult("convolution_identity", lhs, rhs, T.error + V.error, chi.error,
                       _identity_verdict(lhs, rhs, err, rtol),
                       {"A": _json(A), "z": z.tolist(), "weight": theta.to_json()},
                       {"T": T.value, "V": V.value, "relative_error": abs(lhs - rhs) / abs(rhs)})


def check_gradient_identity(z, theta, cone, rtol=1e-4, tol=1e-11):
    """V(z + C) against (1/(n-q)) times the integral of <grad Theta, z> over z + C."""
    _require_q_above_n(theta, cone)
    if not theta.smooth:
        raise GradientUnavailable("the weight has no gradient")
    z = _nonzero(z, cone)
    chi = cone_weighted_volume(z, theta, cone, tol)
    d = directional_derivative_integral(z, theta, cone, tol)
    return CheckResult("gradient_identity", chi.value, d.value, chi.error, d.error,
                       _identity_verdict(chi.value, d.value, chi.error + d.error, rtol),
                       {"z": z.tolist(), "weight": theta.to_json(), "cone": cone.to_json()},
                       {"relative_error": abs(chi.value - d.value) / abs(d.value)})


def check_decay(A, z, theta, t_schedule=(10.0, 1e2, 1e3, 1e4), slack=0.05, tol=1e-11):
    """Slope of log T(A, t z) against log t, compared with n - q - 1 + slack."""
    _require_q_above_n(theta, A.cone)
    z = _nonzero(z, A.cone)
    t = np.asarray(t_schedule, dtype=float)
    if t.ndim != 1 or len(t) < 3:
        raise InconclusiveFit("the decay fit needs at least 3 values of t")
    if np.any(t <= 0):
        raise ValidationError("t values must be positive")
    vals = [asymptotic_covolume(A, ti * z, theta, tol) for ti in t]
    T = np.array([v.value for v in vals])
    if np.any(T <= 0):
        raise InconclusiveFit("T vanished on the schedule; no log-log slope")
    slope, icept = np.polyfit(np.log(t), np.log(T), 1)
    bound = A.cone.dim - theta.q - 1 + slack
    verdict = "holds" if slope <= bound else "violated"
    return CheckResult("decay", float(slope), float(bound), 0.0, 0.0, verdict,
                       {"A": _json(A), "z": z.tolist(), "weight": theta.to_json(), "t": t.tolist()},
                       {"trace": [[float(a), float(b)] for a, b in zip(t, T)]})


# ---------------------------------------------------------------------------
# asymptotic Brunn-Minkowski explorer (open problem, no verdict asserted)


def _t_of(A, z, theta, tol):
    if not hasattr(A, "approximation_error"):
        return asymptotic_covolume(A, z, theta, tol)
    # outer Wulff approximation with hundreds of kinks: fixed graded rules,
    # error from halving both the panel count and the direction sample
    A._build()
    fine, coarse = A._approx, A._coarse
    vals = []
    for body, sub in ((fine, 16), (fine, 8), (coarse, 16)):
        U, W, *_ = _static_rule(A.cone, 60, 0.5, sub, 8)
        vals.append(float(W @ _t_integrand(body, z, theta)(U)))
    return Estimate(vals[0], abs(vals[0] - vals[1]) + abs(vals[0] - vals[2]))


def explore_asymptotic_bm(config=None):
    """Random pairs E_k = z_k + A_k with A_k random hyperbola bodies.

    Compares T(combination)**(1/(n-q)) with the convex combination of the
    single-body powers, literally as lhs <= rhs.  Margins beyond the error band
    on the negative side are flagged as candidate witnesses; positive margins
    are reported as inconclusive since the intended direction is open.
    """
    cfg = {"n": 2, "q": 3.0, "count": 100, "seed": 0, "lam": 0.5, "dilates": 0, "tol": 1e-9}
    cfg.update(config or {})
    n, q, lam = int(cfg["n"]), float(cfg["q"]), float(cfg["lam"])
    if q < 0 or q == n:
        raise ExponentOutOfRange("the explorer needs q >= 0 and q != n")
    if not 0 <= lam <= 1:
        raise ValidationError("lam must lie in [0, 1]")
    cone = Cone.polyhedral(-np.eye(n))
    theta = WeightSpec.radial_power(q)
    p = n - q
    out = []
    for i in range(int(cfg["count"])):
        rng = np.random.default_rng([int(cfg["seed"]), i])
        A1 = HyperbolaBody(cone, float(rng.uniform(0.5, 2.0)), rng.uniform(0.5, 2.0, size=n))
        z1 = rng.uniform(0.2, 2.0, size=n)
        if i < cfg["dilates"]:
            t = float(rng.uniform(0.5, 2.0))
            A2, z2 = scale(A1, t), t * z1
        else:
            A2 = HyperbolaBody(cone, float(rng.uniform(0.5, 2.0)), rng.uniform(0.5, 2.0, size=n))
            z2 = rng.uniform(0.2, 2.0, size=n)
        if lam == 1:
            A, z = A1, z1
        elif lam == 0:
            A, z = A2, z2
        else:
            A = minkowski_sum(scale(A1, lam), scale(A2, 1 - lam))
            z = lam * z1 + (1 - lam) * z2
        T1, T2, Tc = (_t_of(A1, z1, theta, cfg["tol"]), _t_of(A2, z2, theta, cfg["tol"]),
                      _t_of(A, z, theta, cfg["tol"]))

        def pw(est):
            v = est.value ** (1.0 / p)
            return v, abs(v / (p * est.value)) * est.error

        lhs, le = pw(Tc)
        a, ae = pw(T1)
        b, be = pw(T2)
        rhs = lam * a + (1 - lam) * b
        re = lam * ae + (1 - lam) * be
        band = max(le + re, 1e-9 * abs(rhs))
        margin = rhs - lhs
        if abs(margin) <= band:
            verdict = "equality_within_tol"
        elif margin < 0:
            verdict = "violated"
        else:
            verdict = "inconclusive"
        out.append(CheckResult("asymptotic_bm", lhs, rhs, le, re, verdict,
                               {"A1": _json(A1), "A2": _json(A2), "z1": z1.tolist(), "z2": z2.tolist(),
                                "lam": lam, "q": q, "seed": [int(cfg["seed"]), i]},
                               {"flagged": verdict == "violated", "band": band}))
    return out


# ---------------------------------------------------------------------------
# counterexamples

COUNTEREXAMPLES = ("sam_critical", "i_infty_small_q", "t_small_q")


def _quadrant():
    return Cone.polyhedral([[-1.0, 0.0], [0.0, -1.0]])


def _sam_truncated(E, theta, X):
    """Weighted boundary length of the hyperbola over 1/X <= x <= X, via the cap integrand.

    The boundary point at angle phi has x**2 = cot(phi), so the window is an
    angular interval."""
    f = _sam_integrand(E, theta)
    g = lambda phi: float(f(np.array([[math.cos(phi), math.sin(phi)]]))[0])
    lo, hi = math.atan(X ** -2), math.atan(X ** 2)
    mid = math.pi / 4
    a = quad(g, lo, mid, epsabs=0, epsrel=1e-12, limit=400)
    b = quad(g, mid, hi, epsabs=0, epsrel=1e-12, limit=400)
    return a[0] + b[0], a[1] + b[1]


def reproduce_counterexample(case, X_values=(10.0, 1e2, 1e3)):
    if case not in COUNTEREXAMPLES:
        raise UnknownCase("unknown counterexample %r; choose one of %s" % (case, ", ".join(COUNTEREXAMPLES)))
    C = _quadrant()
    if case == "sam_critical":
        theta = WeightSpec.directional_power(1.0, [1.0, 1.0])
        E = HyperbolaBody(C)
        rows = []
        for X in X_values:
            val, err = _sam_truncated(E, theta, X)
            col = math.sqrt(2) * math.asinh(X)
            rows.append([X, val, col, abs(val - col) / col])
        probe = finiteness_probe("S", E, theta)
        matches = all(r[3] <= 5e-3 for r in rows)
        ok = matches and probe.status == "log_divergent"
        last = rows[-1]
        return CheckResult(case, last[1], last[2], 0.0, 0.0, "holds" if ok else "violated",
                           {"body": E.to_json(), "weight": theta.to_json()},
                           {"trace": rows, "columns": ["X", "truncated_S", "sqrt2_asinh_X", "rel_diff"],
                            "closed_form_match": matches, "classification": probe.to_json()})
    cells = []
    if case == "i_infty_small_q":
        E = ShiftedCone(C, [1.0, 1.0])
        for q in (0.5, 1.0):
            v = finiteness_probe("I_inf", E, WeightSpec.radial_power(q))
            cells.append({"q": q, "status": v.status, "growth_exponent": v.growth_exponent,
                          "verdict": v.to_json()})
        witness = {"body": E.to_json()}
    else:
        A = HyperbolaBody(C)
        z = [1.0, 1.0]
        for q in (0.5, 1.0):
            v = finiteness_probe("T", A, WeightSpec.radial_power(q), z=z)
            cells.append({"q": q, "status": v.status, "growth_exponent": v.growth_exponent,
                          "verdict": v.to_json()})
        witness = {"body": A.to_json(), "z": z}
    divergent = sum(c["status"] in ("power_divergent", "log_divergent") for c in cells)
    return CheckResult(case, None, None, 0.0, 0.0, "holds" if divergent == len(cells) else "violated",
                       witness, {"cells": cells, "divergent_cells": divergent})


# ---------------------------------------------------------------------------
# finiteness table

TABLE_FUNCTIONALS = ("S", "V", "Vbar", "T_origin", "T")


def _expected_row(n, q):
    """'finite', 'infinite' or 'either' for each functional, by the range of q."""
    if q > n:
        row = ("finite", "finite", "infinite", "infinite", "finite")
    elif q == n:
        row = ("finite", "infinite", "infinite", "infinite", "finite")
    elif q > n - 1:
        row = ("finite", "infinite", "finite", "finite", "finite")
    else:
        row = ("either", "infinite", "either", "either", "either")
    return dict(zip(TABLE_FUNCTIONALS, row))


def _table_bodies(n):
    C = Cone.polyhedral(-np.eye(n))
    u = np.ones(n) / math.sqrt(n)
    return {
        "hyperbola": HyperbolaBody(C),
        # C-full: bounded complement, every functional finite whenever the cone part allows it
        "wulff": WulffShape(C, [-u], [math.sqrt(n)]),
        "shifted_cone": ShiftedCone(C, np.ones(n)),
        "log_asymptote": LogAsymptoteBody(C),
    }


# divergent witnesses for the undetermined cells
_DIVERGENT_WITNESS = {"S": "hyperbola", "Vbar": "shifted_cone", "T_origin": "log_asymptote",
                      "T": "log_asymptote"}


def _classify_cell(tag, body, theta, n):
    z = np.ones(n) if tag == "T" else None
    try:
        v = finiteness_probe(tag, body, theta, z=z)
    except InconclusiveFit as exc:
        return {"status": "inconclusive", "note": str(exc)}
    return {"status": v.status, "growth_exponent": v.growth_exponent, "value": v.value}


def _agrees(expected, status):
    if expected == "finite":
        return status == "finite"
    if expected == "infinite":
        return status in ("power_divergent", "log_divergent")
    return True


def finiteness_table(n, q):
    """Classify S, V, Vbar, T(A, o) and T(A, z) on the hyperbola body of the orthant.

    Cells whose finiteness depends on the body get a finite witness (a Wulff
    shape) and a divergent witness in addition.  Returns a CheckResult whose
    verdict is holds when every determinate cell and every witness agrees."""
    n, q = int(n), float(q)
    if n not in (2, 3) or q < 0:
        raise ValidationError("the table is reproduced for n in {2, 3} and q >= 0")
    theta = WeightSpec.radial_power(q)
    bodies = _table_bodies(n)
    expected = _expected_row(n, q)
    cells = []
    ok = True
    for tag in TABLE_FUNCTIONALS:
        cell = {"functional": tag, "expected": expected[tag],
                "hyperbola": _classify_cell(tag, bodies["hyperbola"], theta, n)}
        good = _agrees(expected[tag], cell["hyperbola"]["status"])
        if expected[tag] == "either":
            fin = _classify_cell(tag, bodies["wulff"], theta, n)
            name = _DIVERGENT_WITNESS[tag]
            div = _classify_cell(tag, bodies[name], theta, n)
            cell["finite_witness"] = dict(fin, body="wulff")
            cell["divergent_witness"] = dict(div, body=name)
            good = _agrees("finite", fin["status"]) and _agrees("infinite", div["status"])
        cell["agrees"] = good
        ok = ok and good
        cells.append(cell)
    return CheckResult("finiteness_table", None, None, 0.0, 0.0, "holds" if ok else "violated",
                       {"n": n, "q": q, "bodies": {k: _json(b) for k, b in bodies.items()}},
                       {"cells": cells})
