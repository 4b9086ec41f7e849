"""Positive (-q)-homogeneous weights Theta on C \\ {o}."""

from dataclasses import dataclass
import math

import numpy as np

from .errors import ValidationError, GradientUnavailable


@dataclass(frozen=True, eq=False)
class WeightSpec:
    q: float
    kind: str = "radial_power"
    direction: np.ndarray = None
    evaluator: object = None
    gradient_fn: object = None

    def __post_init__(self):
        if not (np.isfinite(self.q) and self.q >= 0):
            raise ValidationError("weight exponent q must be a finite nonnegative number")
        if self.kind not in ("radial_power", "directional_power", "custom"):
            raise ValidationError("unknown weight kind %r" % self.kind)
        if self.kind == "directional_power":
            a = np.asarray(self.direction, dtype=float)
            a = a / np.linalg.norm(a)
            object.__setattr__(self, "direction", a)
        if self.kind == "custom" and self.evaluator is None:
            raise ValidationError("custom weight needs an evaluator")

    @classmethod
    def radial_power(cls, q):
        return cls(q=float(q))

    @classmethod
    def directional_power(cls, q, direction):
        return cls(q=float(q), kind="directional_power", direction=direction)

    @classmethod
    def custom(cls, q, evaluator, gradient=None):
        return cls(q=float(q), kind="custom", evaluator=evaluator, gradient_fn=gradient)

    @classmethod
    def from_json(cls, spec):
        if not isinstance(spec, dict):
            raise ValidationError("weight spec must be an object")
        kind = spec.get("kind", "radial_power")
        if "q" not in spec:
            raise ValidationError("weight spec needs 'q'")
        if kind == "radial_power":
            return cls.radial_power(spec["q"])
        if kind == "directional_power":
            if "direction" not in spec:
                raise ValidationError("directional_power weight needs 'direction'")
            return cls.directional_power(spec["q"], spec["direction"])
        raise ValidationError("weight kind %r cannot be given in JSON" % kind)

    def to_json(self):
        d = {"kind": self.kind, "q": self.q}
        if self.direction is not None:
            d["direction"] = self.direction.tolist()
        return d

    @property
    def smooth(self):
        return self.kind != "custom" or self.gradient_fn is not None

    def __call__(self, X):
        """Theta at the rows of X."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.kind == "radial_power":
            if self.q == 0:
                return np.ones(len(X))
            return np.linalg.norm(X, axis=1) ** (-self.q)
        if self.kind == "directional_power":
            if self.q == 0:
                return np.ones(len(X))
            return (X @ self.direction) ** (-self.q)
        return np.asarray(self.evaluator(X), dtype=float)

    def on_sphere(self, U):
        """Theta at unit vectors; Theta(r u) = r**(-q) * on_sphere(u)."""
        if self.kind == "radial_power":
            return np.ones(len(np.atleast_2d(U)))
        return self(U)

    def gradient(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        q = self.q
        if self.kind == "radial_power":
            r = np.linalg.norm(X, axis=1)
            return -q * r[:, None] ** (-q - 2) * X
        if self.kind == "directional_power":
            t = X @ self.direction
            return -q * t[:, None] ** (-q - 1) * self.direction[None, :]
        if self.gradient_fn is None:
            raise GradientUnavailable("weight has no gradient")
        return np.asarray(self.gradient_fn(X), dtype=float)

    def validate(self, cone, samples=100, seed=0):
        """Check positivity and homogeneity on cone samples; returns (m_theta, M_theta)."""
        from .cone_geometry import cap_quadrature
        quad = cap_quadrature(cone, 1e-6, 20)
        U = quad.nodes
        rng = np.random.default_rng(seed)
        pick = U[rng.choice(len(U), size=min(samples, len(U)), replace=False)]
        if self.kind == "directional_power" and np.any(U @ self.direction <= 0):
            raise ValidationError("weight direction is not positive on the cone")
        vals = self(pick)
        if not np.all(np.isfinite(vals)) or np.any(vals <= 0):
            raise ValidationError("weight must be positive and finite on the cone")
        for t in (0.5, 2.0, 10.0):
            scaled = self(t * pick)
            if not np.allclose(scaled, t ** (-self.q) * vals, rtol=1e-12, atol=0):
                raise ValidationError("weight is not (-q)-homogeneous")
        if self.smooth:
            g = self.gradient(pick)
            euler = np.einsum("ij,ij->i", g, pick)
            if not np.allclose(euler, -self.q * vals, rtol=1e-10, atol=1e-12):
                raise ValidationError("gradient fails the Euler identity")
        ratio = self(U) * (U @ cone.u_ref) ** self.q
        return float(ratio.min()), float(ratio.max())
