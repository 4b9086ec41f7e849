"""pclab command line.

Exit status: 0 on success, 2 on validation errors, 3 when a quantity that had
to be finite diverged, 1 for anything else (including solver non-convergence).
"""

import argparse
import csv
import io
import json
import math
import os
import sys

import numpy as np

from .errors import PclabError, ValidationError, ExponentOutOfRange, NotInCone
from .scene import Scene

COMMANDS = ("covolume", "volume", "asym-covolume", "sam", "dual-volume", "starting-point",
            "finiteness", "solve", "check", "reproduce")
CHECKS = ("bm", "radial-containment", "convolution", "gradient", "decay", "bm-sweep", "asymptotic-bm")


def _floats(text, what):
    try:
        vals = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ValidationError("%s must be a comma-separated list of numbers" % what) from None
    if not vals:
        raise ValidationError("%s is empty" % what)
    return vals


def _clean(obj):
    """JSON-safe copy: numpy to builtins, non-finite floats to null."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def dumps(obj):
    return json.dumps(_clean(obj), sort_keys=True, allow_nan=False)


def _parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scene", help="scene JSON file")
    common.add_argument("--body", help="body name in the scene")
    common.add_argument("--other", help="second body name (two-body checks)")
    common.add_argument("--weight", help="weight name in the scene (default: the scene's weight)")
    common.add_argument("--tol", type=float, help="quadrature tolerance; residual target for solve")
    common.add_argument("--max-depth", type=int, help="quadrature grading depth")
    common.add_argument("--truncation", help="finiteness cutoffs R0,R1,...")
    common.add_argument("--seed", type=int, help="random seed (overrides the scene)")
    common.add_argument("--threads", type=int, help="worker cap (falls back to PCLAB_THREADS)")
    common.add_argument("--out", help="write the result to this file instead of stdout")
    common.add_argument("--emit-csv", action="store_true", help="emit CSV rows instead of JSON")
    common.add_argument("--dry-run", action="store_true", help="validate inputs without quadrature")
    common.add_argument("--figures", metavar="DIR", help="also render PNG figures into DIR")
    common.add_argument("--z", help="point z as x1,x2,... or a scene point name")
    common.add_argument("--r", type=float, help="dual-volume exponent")
    common.add_argument("--tag", help="finiteness functional: S, V, Vbar, I_inf, T_origin or T")
    common.add_argument("--measure", help="measure JSON for solve")
    common.add_argument("--t", help="decay schedule t0,t1,...")
    common.add_argument("--count", type=int, help="instances in a sweep")
    common.add_argument("--dilates", type=int, default=0, help="dilate pairs at the start of a sweep")
    common.add_argument("--lam", type=float, default=0.5, help="combination parameter for asymptotic-bm")

    p = argparse.ArgumentParser(prog="pclab", description="Weighted functionals of C-pseudo-cones.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name, parents=[common])
        if name == "check":
            sp.add_argument("name", choices=CHECKS)
        elif name == "reproduce":
            sp.add_argument("case")
    return p


class _Ctx:
    def __init__(self, args):
        self.args = args
        threads = args.threads
        if threads is None and os.environ.get("PCLAB_THREADS"):
            try:
                threads = int(os.environ["PCLAB_THREADS"])
            except ValueError:
                raise ValidationError("PCLAB_THREADS must be an integer") from None
        if threads is not None and threads < 1:
            raise ValidationError("--threads must be positive")
        self.threads = threads or 1
        if args.tol is not None and not args.tol > 0:
            raise ValidationError("--tol must be positive")
        if args.max_depth is not None and args.max_depth < 1:
            raise ValidationError("--max-depth must be positive")
        if args.seed is not None and args.seed < 0:
            raise ValidationError("--seed must be nonnegative")
        self.scene = Scene.load(args.scene) if args.scene else None

    def need_scene(self):
        if self.scene is None:
            raise ValidationError("this command needs --scene")
        return self.scene

    @property
    def cone(self):
        return self.need_scene().cone

    def body(self, which="body"):
        name = getattr(self.args, which)
        if not name:
            raise ValidationError("this command needs --%s" % which)
        return self.need_scene().body(name)

    def weight(self):
        return self.need_scene().weight(self.args.weight)

    def quad(self):
        q = dict(self.scene.quadrature) if self.scene else {}
        if self.args.tol is not None:
            q["tol"] = self.args.tol
        if self.args.max_depth is not None:
            q["max_depth"] = self.args.max_depth
        return q

    @property
    def seed(self):
        if self.args.seed is not None:
            return self.args.seed
        return self.scene.seed if self.scene else 0

    def z(self, required=True):
        text = self.args.z
        if text is None:
            if self.scene is not None and "z" in self.scene.points:
                return self.scene.points["z"]
            if required:
                raise ValidationError("this command needs --z")
            return None
        if self.scene is not None and text in self.scene.points:
            return self.scene.points[text]
        z = np.array(_floats(text, "--z"))
        if z.size != self.cone.dim:
            raise ValidationError("--z has the wrong dimension")
        if not self.cone.contains(z[None], tol=1e-12)[0]:
            raise NotInCone("--z must lie in the cone")
        return z


# ---------------------------------------------------------------------------
# commands; each returns (payload, csv_rows or None, figure specs)


def _exponent(cond, msg):
    if not cond:
        raise ExponentOutOfRange(msg)


def cmd_covolume(ctx, dry):
    from .weighted_functionals import covolume
    E, th = ctx.body(), ctx.weight()
    _exponent(th.q < ctx.cone.dim, "covolume needs q < n")
    if dry:
        return None
    est = covolume(E, th, **ctx.quad())
    return {"value": est.value, "error": est.error}, [["value", "error"], [est.value, est.error]], []


def cmd_volume(ctx, dry):
    from .weighted_functionals import volume
    E, th = ctx.body(), ctx.weight()
    _exponent(th.q > ctx.cone.dim, "volume needs q > n")
    if dry:
        return None
    est = volume(E, th, **ctx.quad())
    return {"value": est.value, "error": est.error}, [["value", "error"], [est.value, est.error]], []


def cmd_asym_covolume(ctx, dry):
    from .weighted_functionals import asymptotic_covolume
    A, th, z = ctx.body(), ctx.weight(), ctx.z()
    if np.linalg.norm(z) == 0:
        _exponent(th.q < ctx.cone.dim, "T(A, o) needs q < n")
    if dry:
        return None
    est = asymptotic_covolume(A, z, th, **ctx.quad())
    return {"value": est.value, "error": est.error}, [["value", "error"], [est.value, est.error]], []


def cmd_sam(ctx, dry):
    from .pseudocone import WulffShape
    from .weighted_functionals import surface_area_measure, surface_area_total
    E, th = ctx.body(), ctx.weight()
    if dry:
        return None
    if isinstance(E, WulffShape):
        mu = surface_area_measure(E, th)
        rows = [["direction", "mass", "error"]] + [
            [" ".join(repr(float(x)) for x in v), m, e] for v, m, e in zip(mu.directions, mu.masses, mu.errors)]
        out = mu.to_json()
        out["errors"] = mu.errors.tolist()
        return out, rows, []
    est = surface_area_total(E, th, **ctx.quad())
    return {"total": est.value, "error": est.error}, [["total", "error"], [est.value, est.error]], []


def cmd_dual_volume(ctx, dry):
    from .weighted_functionals import dual_volume
    E = ctx.body()
    r = ctx.args.r
    if r is None:
        raise ValidationError("dual-volume needs --r")
    _exponent(r < 0 or 0 < r < 1, "dual volume needs r < 0 or 0 < r < 1")
    if dry:
        return None
    est = dual_volume(E, r, **ctx.quad())
    return {"value": est.value, "error": est.error}, [["value", "error"], [est.value, est.error]], []


def cmd_starting_point(ctx, dry):
    from .pseudocone import starting_point
    E = ctx.body()
    if dry:
        return None
    d = starting_point(E)
    return d.to_json(), [["z", "residual", "degenerate"],
                         [" ".join(repr(float(x)) for x in d.z), d.residual, d.degenerate]], []


def cmd_finiteness(ctx, dry):
    from .weighted_functionals import finiteness_probe, _TAGS
    E, th = ctx.body(), ctx.weight()
    tag = ctx.args.tag
    if tag not in _TAGS:
        raise ValidationError("--tag must be one of %s" % ", ".join(_TAGS))
    z = ctx.z(required=(tag == "T"))
    sched = _floats(ctx.args.truncation, "--truncation") if ctx.args.truncation else None
    if dry:
        return None
    kw = {}
    if ctx.args.tol is not None:
        kw["tol"] = ctx.args.tol
    if ctx.args.max_depth is not None:
        kw["depth"] = ctx.args.max_depth
    v = finiteness_probe(tag, E, th, schedule=sched, z=z if tag == "T" else None, **kw)
    rows = [["cutoff", "partial"]] + [[a, b] for a, b in v.trace]
    figs = [("finiteness_%s" % tag, "trace", v.trace, "cutoff", "partial integral")]
    return v.to_json(), rows, figs


def cmd_solve(ctx, dry):
    from .minkowski_solver import SolverConfig, solve
    from .weighted_functionals import DiscreteMeasure
    scene = ctx.need_scene()
    th = ctx.weight()
    n = ctx.cone.dim
    _exponent(0 <= th.q < n - 1, "the solver needs 0 <= q < n-1")
    if not ctx.args.measure:
        raise ValidationError("solve needs --measure")
    try:
        with open(ctx.args.measure) as fh:
            mu = DiscreteMeasure.from_json(json.load(fh))
    except OSError as exc:
        raise ValidationError("cannot read measure: %s" % exc.strerror) from None
    except json.JSONDecodeError as exc:
        raise ValidationError("measure is not valid JSON: %s" % exc) from None
    mu.validate(ctx.cone)
    cfg = dict(scene.solver)
    if ctx.args.tol is not None:
        cfg["grad_tol"] = ctx.args.tol
    cfg["seed"] = ctx.seed
    config = SolverConfig.from_json(cfg)
    if dry:
        return None
    report = solve(mu, th, ctx.cone, config)
    rows = [["iteration", "objective"]] + [[i, f] for i, f in enumerate(report.objective_trace)]
    figs = [("solve_objective", "line", list(enumerate(report.objective_trace)), "iteration", "objective")]
    return report.to_json(), rows, figs


def cmd_check(ctx, dry):
    from . import inequality_lab as lab
    name = ctx.args.name
    if name == "asymptotic-bm":
        th = ctx.weight()
        cfg = {"n": ctx.cone.dim, "q": th.q, "count": ctx.args.count or 100, "seed": ctx.seed,
               "lam": ctx.args.lam, "dilates": ctx.args.dilates}
        _exponent(th.q >= 0 and th.q != ctx.cone.dim, "the explorer needs q != n")
        if dry:
            return None
        results = lab.explore_asymptotic_bm(cfg)
    elif name == "bm-sweep":
        th = ctx.weight()
        _exponent(0 <= th.q <= ctx.cone.dim - 1, "the Brunn-Minkowski sweep needs 0 <= q <= n-1")
        if dry:
            return None
        results = lab.bm_sweep(ctx.cone, th, ctx.args.count or 200, ctx.seed, ctx.args.dilates)
    elif name in ("bm", "radial-containment"):
        E1, E2 = ctx.body(), ctx.body("other")
        if name == "bm":
            th = ctx.weight()
            _exponent(0 <= th.q <= ctx.cone.dim - 1, "the Brunn-Minkowski check needs 0 <= q <= n-1")
            if dry:
                return None
            results = [lab.check_bm(E1, E2, th)]
        else:
            if dry:
                return None
            results = [lab.check_radial_containment(E1, E2)]
    elif name == "gradient":
        th, z = ctx.weight(), ctx.z()
        _exponent(th.q > ctx.cone.dim, "the gradient identity needs q > n")
        if dry:
            return None
        results = [lab.check_gradient_identity(z, th, ctx.cone)]
    else:
        A, th, z = ctx.body(), ctx.weight(), ctx.z()
        _exponent(th.q > ctx.cone.dim, "this identity needs q > n")
        if name == "convolution":
            if dry:
                return None
            results = [lab.check_convolution_identity(A, z, th)]
        else:
            t = _floats(ctx.args.t, "--t") if ctx.args.t else (10.0, 1e2, 1e3, 1e4)
            if dry:
                return None
            results = [lab.check_decay(A, z, th, t)]
    rows = [["name", "lhs", "rhs", "margin", "verdict"]] + [r.csv_row() for r in results]
    figs = []
    if len(results) > 1:
        figs.append(("check_%s_margins" % name, "hist", [r.margin for r in results], "margin", "count"))
    return [r.to_json() for r in results], rows, figs


def cmd_reproduce(ctx, dry):
    from .inequality_lab import COUNTEREXAMPLES, reproduce_counterexample
    from .errors import UnknownCase
    case = ctx.args.case
    if case != "finiteness_table" and case not in COUNTEREXAMPLES:
        raise UnknownCase("unknown case %r; choose one of %s"
                          % (case, ", ".join(COUNTEREXAMPLES + ("finiteness_table",))))
    if dry:
        return None
    if case == "finiteness_table":
        return _finiteness_table()
    r = reproduce_counterexample(case)
    if case == "sam_critical":
        rows = [r.details["columns"]] + r.details["trace"]
        figs = [("reproduce_sam_critical", "compare", r.details["trace"], "X", "weighted boundary length")]
    else:
        rows = [["q", "status", "cutoff", "partial"]]
        for c in r.details["cells"]:
            for a, b in c["verdict"]["trace"]:
                rows.append([c["q"], c["status"], a, b])
        figs = [("reproduce_%s_q%s" % (case, c["q"]), "trace", c["verdict"]["trace"], "cutoff", "partial integral")
                for c in r.details["cells"]]
    return r.to_json(), rows, figs


TABLE_ROWS = ((2, (0.5, 1.0, 1.5, 2.0, 3.0)), (3, (1.0, 2.0, 2.5, 3.0, 4.0)))


def _finiteness_table():
    from .inequality_lab import finiteness_table
    results, rows = [], [["n", "q", "functional", "expected", "hyperbola", "finite_witness",
                          "divergent_witness", "agrees"]]
    for n, qs in TABLE_ROWS:
        for q in qs:
            r = finiteness_table(n, q)
            results.append(r.to_json())
            for c in r.details["cells"]:
                fw = c.get("finite_witness", {}).get("status", "")
                dw = c.get("divergent_witness", {}).get("status", "")
                rows.append([n, q, c["functional"], c["expected"], c["hyperbola"]["status"], fw, dw, c["agrees"]])
    return results, rows, []


_DISPATCH = {
    "covolume": cmd_covolume, "volume": cmd_volume, "asym-covolume": cmd_asym_covolume, "sam": cmd_sam,
    "dual-volume": cmd_dual_volume, "starting-point": cmd_starting_point, "finiteness": cmd_finiteness,
    "solve": cmd_solve, "check": cmd_check, "reproduce": cmd_reproduce,
}

# reproduce emits its growth trace as CSV unless JSON is asked for via --out *.json
_CSV_DEFAULT = {"reproduce"}


def _render_figures(directory, figs):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    os.makedirs(directory, exist_ok=True)
    paths = []
    for name, kind, data, xlabel, ylabel in figs:
        fig, ax = plt.subplots(figsize=(5, 3.5))
        if kind == "hist":
            vals = [v for v in data if v is not None]
            ax.hist(vals, bins=min(30, max(5, len(vals) // 5)))
        elif kind == "compare":
            X = [row[0] for row in data]
            ax.semilogx(X, [row[1] for row in data], "o-", label="computed")
            ax.semilogx(X, [row[2] for row in data], "s--", label="closed form")
            ax.legend()
        else:
            x = np.array([a for a, _ in data], dtype=float)
            y = np.array([b for _, b in data], dtype=float)
            if kind == "trace" and len(x) and np.all(x > 0):
                ax.set_xscale("log")
            ax.plot(x, y, ".-")
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        ax.set_title(name)
        fig.tight_layout()
        path = os.path.join(directory, name + ".png")
        fig.savefig(path, dpi=100, metadata={"Software": None})
        plt.close(fig)
        paths.append(path)
    return paths


def _csv_text(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for row in rows:
        w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])
    return buf.getvalue()


def _emit(text, out):
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def run(argv=None):
    args = _parser().parse_args(argv)
    cmd = args.command
    ctx = _Ctx(args)
    result = _DISPATCH[cmd](ctx, args.dry_run)
    if args.dry_run:
        _emit(dumps({"command": cmd, "dry_run": True, "ok": True}) + "\n", args.out)
        return 0
    payload, rows, figs = result
    use_csv = args.emit_csv or (cmd in _CSV_DEFAULT and not (args.out or "").endswith(".json"))
    if use_csv:
        text = _csv_text(rows)
    elif cmd == "check":
        text = "".join(dumps(r) + "\n" for r in payload)  # JSON lines
    else:
        text = dumps(payload) + "\n"
    _emit(text, args.out)
    if args.figures and figs:
        _render_figures(args.figures, figs)
    return 0


def main(argv=None):
    try:
        return run(argv)
    except PclabError as exc:
        report = getattr(exc, "report", None)
        err = {"error": exc.code, "message": str(exc)}
        if report is not None:
            err["report"] = report.to_json()
        sys.stdout.write(dumps(err) + "\n")
        return exc.exit_status
    except (ValueError, FloatingPointError) as exc:
        sys.stdout.write(dumps({"error": "validation_error", "message": str(exc)}) + "\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
