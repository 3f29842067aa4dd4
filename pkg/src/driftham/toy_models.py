"""Small control systems exercising closure regimes beyond the
central-field model: a commuting pure-gauge frame, an integrable
single-generator system with nonzero drift coupling, and a
rotation+dilation frame whose momenta canonicalize nontrivially.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

from .geometry import VectorField
from .hamiltonize import ControlSystem


def planar_free(potential: Callable | None = None) -> ControlSystem:
    """n = m = 2, Z the identity frame, V = 0, L = (u₁² + u₂²)/2 - U(x).

    The closure is the whole tangent plane (pure gauge), the brackets are
    already canonical, and the conditional-extremum equations reduce to
    the ordinary Euler-Lagrange equations.
    """
    Z1 = VectorField.constant_field((1.0, 0.0), provenance="e1")
    Z2 = VectorField.constant_field((0.0, 1.0), provenance="e2")
    V = VectorField.constant_field((0.0, 0.0), provenance="zero-drift")

    def lagrangian(x, u):
        val = (u[0] * u[0] + u[1] * u[1]) / 2.0
        if potential is not None:
            val = val - potential(x)
        return val

    return ControlSystem(n=2, m=2, Z=(Z1, Z2), V=V, lagrangian=lagrangian)


def rotation_drift() -> ControlSystem:
    """n = 3, m = 1, Z the rotation generator about the x₃-axis.

    The drift V = (-x₁x₂, x₁², 1) satisfies [Z, V] = -x₂·Z, so the
    distribution is already bracket-stable with a nonzero drift
    coefficient — the integrable regime with nontrivial V^β_α.
    """
    Z = VectorField.from_components(
        (lambda x: -x[1], lambda x: x[0], lambda x: 0.0),
        provenance="rotation-generator")
    V = VectorField.from_components(
        (lambda x: -x[0] * x[1], lambda x: x[0] * x[0], lambda x: 1.0),
        provenance="shear-drift")

    def lagrangian(x, u):
        return u[0] * u[0] / 2.0

    return ControlSystem(n=3, m=1, Z=(Z,), V=V, lagrangian=lagrangian)


def rotation_dilation() -> ControlSystem:
    """n = m = 2 with the commuting rotation/dilation frame
    Z₁ = (-x₂, x₁), Z₂ = (x₁, x₂) on the punctured plane.

    det Z = -(x₁² + x₂²) ≠ 0 away from the origin, so the system is pure
    gauge but the momentum change p = Zᵀπ is position-dependent — a
    nontrivial canonicalization test.
    """
    Z1 = VectorField.from_components(
        (lambda x: -x[1], lambda x: x[0]), provenance="rotation")
    Z2 = VectorField.from_components(
        (lambda x: x[0], lambda x: x[1]), provenance="dilation")
    V = VectorField.constant_field((0.0, 0.0), provenance="zero-drift")

    def lagrangian(x, u):
        return (u[0] * u[0] + u[1] * u[1]) / 2.0

    return ControlSystem(n=2, m=2, Z=(Z1, Z2), V=V, lagrangian=lagrangian)


@dataclass(frozen=True)
class ToySpec:
    factory: Callable[[], ControlSystem]
    regime: str  # integrable | pure-gauge | one-step-nonintegrable
    box: tuple  # default sample box avoiding singular loci


REGISTRY = {
    "planar-free": ToySpec(planar_free, "pure-gauge",
                           ((-2.0, 2.0), (-2.0, 2.0))),
    "rotation-drift": ToySpec(rotation_drift, "integrable",
                              ((0.5, 2.0), (0.5, 2.0), (-1.0, 1.0))),
    "rotation-dilation": ToySpec(rotation_dilation, "pure-gauge",
                                 ((0.5, 2.0), (0.5, 2.0))),
}
