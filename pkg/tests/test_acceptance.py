"""Acceptance criteria 1-10.  Each test records one PASS/FAIL line, printed in the
terminal summary (see conftest.py) or directly when this file is run as a script."""

import math
import time

import numpy as np

from pclab import (Cone, DiscreteMeasure, HyperbolaBody, SegmentConeBody, SolverConfig, WeightSpec,
                   WulffShape, asymptotic_covolume, covolume, scale, solve, starting_point,
                   surface_area_measure, translate)
from pclab.inequality_lab import (bm_sweep, check_convolution_identity, check_decay,
                                  check_gradient_identity, finiteness_table, random_wulff,
                                  reproduce_counterexample)

RESULTS = {}

QUADRANT = Cone.polyhedral([[-1.0, 0.0], [0.0, -1.0]])
OCTANT = Cone.polyhedral(-np.eye(3))
C45 = Cone.circular([0.0, 0.0, 1.0], math.pi / 4)
HYP = HyperbolaBody(QUADRANT)


def record(k, ok, detail):
    line = "CRITERION %2d: %s  %s" % (k, "PASS" if ok else "FAIL", detail)
    RESULTS[k] = line
    return ok


def _polar(deg):
    t = math.radians(deg)
    return np.array([math.cos(t), math.sin(t)])


def test_criterion_01_sam_critical():
    t0 = time.perf_counter()
    r = reproduce_counterexample("sam_critical")
    dt = time.perf_counter() - t0
    rows = r.details["trace"]
    match = all(row[3] <= 5e-3 for row in rows)
    status = r.details["classification"]["status"]
    ok = match and status == "log_divergent" and dt < 5.0
    diffs = ", ".join("X=%g: %.4g vs %.4g (%.1f%%)" % (row[0], row[1], row[2], 100 * row[3]) for row in rows)
    assert record(1, ok, "asinh match %s [%s]; probe %s; %.2fs" % (match, diffs, status, dt))


def test_criterion_02_finiteness_table():
    t0 = time.perf_counter()
    bad = []
    for n, qs in ((2, (0.5, 1.0, 1.5, 2.0, 3.0)), (3, (1.0, 2.0, 2.5, 3.0, 4.0))):
        for q in qs:
            r = finiteness_table(n, q)
            bad += ["n=%d q=%g %s" % (n, q, c["functional"]) for c in r.details["cells"] if not c["agrees"]]
    dt = time.perf_counter() - t0
    ok = not bad and dt < 120.0
    assert record(2, ok, "%d disagreeing cells %s; %.1fs" % (len(bad), bad, dt))


def test_criterion_03_convolution_identity():
    r = check_convolution_identity(HYP, [1.0, 1.0], WeightSpec.radial_power(3))
    rel = r.details["relative_error"]
    assert record(3, rel <= 1e-5, "relative error %.2e (<= 1e-5)" % rel)


def test_criterion_04_gradient_identity():
    rels = []
    for z in ([1.0, 1.0], [1.0, 1e-3]):
        rels.append(check_gradient_identity(z, WeightSpec.radial_power(3), QUADRANT).details["relative_error"])
    assert record(4, max(rels) <= 1e-4, "relative errors %s (<= 1e-4)" % ["%.2e" % x for x in rels])


def test_criterion_05_homogeneity():
    theta = WeightSpec.radial_power(3)
    z = np.array([1.0, 1.0])
    base = asymptotic_covolume(HYP, z, theta).value
    rels = []
    for t in (2.0, 10.0):
        val = asymptotic_covolume(scale(HYP, t), t * z, theta).value
        rels.append(abs(val - t ** (2 - 3) * base) / abs(t ** (2 - 3) * base))
    assert record(5, max(rels) <= 1e-8, "relative errors %s (<= 1e-8)" % ["%.1e" % x for x in rels])


def test_criterion_06_decay():
    parts, ok = [], True
    for q in (3.0, 4.0):
        r = check_decay(HYP, [1.0, 1.0], WeightSpec.radial_power(q), (10.0, 1e2, 1e3, 1e4))
        ok = ok and r.lhs <= 2 - q - 1 + 0.05
        parts.append("q=%g slope %.3f <= %.2f" % (q, r.lhs, 2 - q - 1 + 0.05))
    assert record(6, ok, "; ".join(parts))


def test_criterion_07_brunn_minkowski():
    t0 = time.perf_counter()
    parts, ok = [], True
    for q in (0.0, 0.5):
        res = bm_sweep(QUADRANT, WeightSpec.radial_power(q), 220, seed=2024, dilates=20)
        dil, rnd = res[:20], res[20:]
        viol = sum(r.margin < -1e-9 for r in rnd)
        dil_ok = all(r.verdict == "equality_within_tol" and abs(r.margin) <= 1e-6 for r in dil)
        ok = ok and viol == 0 and dil_ok
        parts.append("q=%g: %d/200 violations, min margin %.2e, dilates equal %s"
                     % (q, viol, min(r.margin for r in rnd), dil_ok))
    dt = time.perf_counter() - t0
    ok = ok and dt < 300.0
    assert record(7, ok, "; ".join(parts) + "; %.1fs" % dt)


def _fd_check(E, theta):
    S = surface_area_measure(E, theta).masses
    worst = 0.0
    for i in range(len(S)):
        eps = 1e-6 * E.hbar[i]
        up, dn = E.hbar.copy(), E.hbar.copy()
        up[i] += eps
        dn[i] -= eps
        fd = (covolume(WulffShape(E.cone, E.directions, up), theta).value
              - covolume(WulffShape(E.cone, E.directions, dn), theta).value) / (2 * eps)
        # central differences carry roughly 1e-10 relative rounding noise, visible on zero-mass facets
        worst = max(worst, abs(fd - S[i]) / (1e-3 * abs(S[i]) + 1e-6 * S.max()))
    return worst


def test_criterion_08_variational_gradient():
    worst2 = worst3 = 0.0
    for i in range(20):
        rng = np.random.default_rng([8, i])
        E = random_wulff(QUADRANT, rng)
        worst2 = max(worst2, _fd_check(E, WeightSpec.radial_power(rng.uniform(0.0, 1.0))))
    for i in range(5):
        rng = np.random.default_rng([9, i])
        cone = (OCTANT, C45)[i % 2]
        E = random_wulff(cone, rng)
        worst3 = max(worst3, _fd_check(E, WeightSpec.radial_power(rng.uniform(0.0, 2.0))))
    ok = max(worst2, worst3) <= 1.0
    assert record(8, ok, "worst |fd - S| / (1e-3 |S| + 1e-6 max S): 2D %.2e, 3D %.2e (<= 1)" % (worst2, worst3))


def test_criterion_09_minkowski_solver():
    t0 = time.perf_counter()
    theta = WeightSpec.radial_power(0.5)
    V = np.array([_polar(200), _polar(225), _polar(250)])
    h_true = np.array([1.0, 1.3, 1.1])
    mu = surface_area_measure(WulffShape(QUADRANT, V, h_true), theta)
    rep = solve(mu, theta, QUADRANT, SolverConfig(grad_tol=1e-4))
    rec = float(np.max(np.abs(rep.h_tilde - h_true) / h_true))
    tilt = math.radians(20)
    V3 = np.array([[math.sin(tilt) * math.cos(a), math.sin(tilt) * math.sin(a), -math.cos(tilt)]
                   for a in np.arange(4) * math.pi / 2])
    mu3 = DiscreteMeasure(V3, np.ones(4))
    rep3 = solve(mu3, theta, C45, SolverConfig(grad_tol=1e-3))
    r1 = solve(mu3, theta, C45, SolverConfig(grad_tol=1e-6, init="random", seed=1)).h_tilde
    r2 = solve(mu3, theta, C45, SolverConfig(grad_tol=1e-6, init="random", seed=2)).h_tilde
    agree = float(np.max(np.abs(r1 - r2) / np.abs(r2)))
    dt = time.perf_counter() - t0
    ok = rec <= 1e-3 and rep.residual <= 1e-4 and rep3.residual <= 1e-3 and agree <= 1e-3 and dt < 60
    assert record(9, ok, "2D recovery %.1e, residual %.1e; 3D residual %.1e; random inits differ %.1e; %.1fs"
                  % (rec, rep.residual, rep3.residual, agree, dt))


def test_criterion_10_decomposition():
    rng = np.random.default_rng(10)
    worst = 0.0
    for _ in range(100):
        z = rng.uniform(0.0, 3.0, size=2)
        d = starting_point(translate(HYP, z))
        worst = max(worst, float(np.max(np.abs(d.z - z))))
    sch = starting_point(SegmentConeBody(OCTANT, [2.0, 0.0, 0.0], [0.0, 2.0, 0.0]))
    ok = worst <= 1e-6 and sch.degenerate and sch.residual > 0.1
    assert record(10, ok, "max |z - z_true| %.1e over 100 z; sweep body degenerate=%s residual %.3f"
                  % (worst, sch.degenerate, sch.residual))


if __name__ == "__main__":
    for name, fn in sorted(globals().items()):
        if name.startswith("test_criterion_"):
            try:
                fn()
            except AssertionError:
                pass
    for k in sorted(RESULTS):
        print(RESULTS[k])
