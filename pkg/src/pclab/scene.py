"""Scene files: a cone, weights, named bodies, quadrature settings and a seed."""

from dataclasses import dataclass, field
import json

import numpy as np

from .cone_geometry import Cone
from .errors import ValidationError
from .pseudocone import body_from_json
from .weights import WeightSpec

_KEYS = {"cone", "weight", "weights", "bodies", "quadrature", "seed", "points", "solver"}


@dataclass
class Scene:
    cone: Cone
    weights: dict
    bodies: dict
    quadrature: dict = field(default_factory=dict)
    seed: int = 0
    points: dict = field(default_factory=dict)
    solver: dict = field(default_factory=dict)

    @classmethod
    def from_json(cls, spec):
        if not isinstance(spec, dict):
            raise ValidationError("scene must be a JSON object")
        unknown = set(spec) - _KEYS
        if unknown:
            raise ValidationError("unknown scene keys: %s" % ", ".join(sorted(unknown)))
        if "cone" not in spec:
            raise ValidationError("scene needs a cone")
        cone = Cone.from_json(spec["cone"])
        weights = {}
        if "weight" in spec:
            weights["default"] = WeightSpec.from_json(spec["weight"])
        for name, w in (spec.get("weights") or {}).items():
            weights[name] = WeightSpec.from_json(w)
        bodies = spec.get("bodies") or {}
        if not isinstance(bodies, dict):
            raise ValidationError("scene bodies must be an object of named specs")
        quad = dict(spec.get("quadrature") or {})
        for k in quad:
            if k not in ("tol", "max_depth"):
                raise ValidationError("unknown quadrature setting %r" % k)
        seed = spec.get("seed", 0)
        if not isinstance(seed, int) or seed < 0:
            raise ValidationError("seed must be a nonnegative integer")
        points = {k: np.asarray(v, dtype=float) for k, v in (spec.get("points") or {}).items()}
        scene = cls(cone, weights, bodies, quad, seed, points, dict(spec.get("solver") or {}))
        for name in bodies:  # resolve every reference up front
            scene.body(name)
        return scene

    @classmethod
    def load(cls, path):
        try:
            with open(path) as fh:
                spec = json.load(fh)
        except OSError as exc:
            raise ValidationError("cannot read scene %s: %s" % (path, exc.strerror)) from None
        except json.JSONDecodeError as exc:
            raise ValidationError("scene %s is not valid JSON: %s" % (path, exc)) from None
        return cls.from_json(spec)

    def body(self, name):
        if name not in self.bodies:
            raise ValidationError("scene has no body %r" % name)
        return body_from_json(self.bodies[name], self.cone, self.bodies)

    def weight(self, name=None):
        if name is None:
            if "default" in self.weights:
                return self.weights["default"]
            if len(self.weights) == 1:
                return next(iter(self.weights.values()))
            raise ValidationError("scene has no default weight; pass --weight")
        if name not in self.weights:
            raise ValidationError("scene has no weight %r" % name)
        return self.weights[name]

    def point(self, name):
        if name not in self.points:
            raise ValidationError("scene has no point %r" % name)
        return self.points[name]
