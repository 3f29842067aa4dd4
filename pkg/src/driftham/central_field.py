"""Planar central-field motion constrained by angular-momentum conservation.

The built-in model: states x = (r, φ, M), one control u = ṙ, constraint
fields Z = (1, 0, 0) and V = (0, M/(m r²), 0), Lagrangian

    L = m u²/2 + M²/(2 m r²) - U(r).

The closure adds Z₁ = [Z, V] = (0, -2M/(m r³), 0) and stabilises (a
one-step pattern).  The resulting flow carries three integrals in
involution — M, the energy E = H - (r/2)p₁, and a precession parameter
K = M²/(4m) + (r³/8)p₁ — and, for the Coulomb potential U = -α/r, a
closed-form trajectory r(φ) used as an oracle: precessing conics when
K < M²/8m and spiral branches when K ≥ M²/8m.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from . import autodiff as ad
from . import expr as ex
from .geometry import VectorField, close_distribution, halton_points
from .hamiltonize import ControlSystem, build_hamiltonian_system


class CentralFieldError(ValueError):
    pass


class OracleDomainError(CentralFieldError):
    """φ outside the angular domain of the closed-form branch."""


COULOMB_SOURCE = "-alpha/x1"

DEFAULT_BOX = ((0.5, 3.0), (0.0, 2.0 * math.pi), (0.5, 2.0))


@dataclass(frozen=True)
class CentralFieldParams:
    m: float = 1.0
    alpha: float = 1.0
    M: float = 1.0
    E: float | None = None
    K: float | None = None
    potential_source: str = COULOMB_SOURCE

    def __post_init__(self):
        if self.m <= 0:
            raise CentralFieldError(f"mass must be positive, got {self.m}")
        object.__setattr__(self, "_potential_tree", ex.parse(self.potential_source))

    @property
    def coulomb(self) -> bool:
        return self.potential_source == COULOMB_SOURCE

    def potential(self, r):
        """U(r); generic over duals."""
        return ex.evaluate(self._potential_tree,
                           {"x1": r, "alpha": self.alpha, "m": self.m, "M": self.M})

    def potential_prime(self, r):
        if self.coulomb:
            return self.alpha / (r * r)
        (rd,) = ad.seed([float(r)], {0})
        val = self.potential(rd)
        return val.partials[0] if isinstance(val, ad.Dual) else 0.0


def model(params: CentralFieldParams) -> ControlSystem:
    m = params.m
    Z = VectorField.constant_field((1.0, 0.0, 0.0), provenance="radial-generator")

    def vfunc(x):
        return (0.0, x[2] / (m * x[0] * x[0]), 0.0)

    V = VectorField(3, vfunc, provenance="angular-drift")

    def lagrangian(x, u):
        r, Mv = x[0], x[2]
        return (m * u[0] * u[0] / 2.0 + Mv * Mv / (2.0 * m * r * r)
                - params.potential(r))

    return ControlSystem(n=3, m=1, Z=(Z,), V=V, lagrangian=lagrangian,
                         parameters={"m": m, "alpha": params.alpha})


def _fast_rhs(params: CentralFieldParams):
    """Closed-form equations of motion; the generic path is the oracle
    this is tested against."""
    m = params.m
    alpha = params.alpha
    coulomb = params.coulomb
    pot_prime = params.potential_prime

    def rhs(t, z):
        r, _, Mv, p, p1 = z
        uprime = alpha / (r * r) if coulomb else float(ad.real(pot_prime(r)))
        return (p / m,
                Mv / (m * r * r),
                0.0,
                -Mv * Mv / (m * r ** 3) - uprime - p1,
                -3.0 * p * p1 / (m * r))

    return rhs


def build(params: CentralFieldParams, samples=None):
    """ControlSystem → closure → HamiltonianSystem for the model."""
    cs = model(params)
    if samples is None:
        samples = halton_points(DEFAULT_BOX, 32)
    cl = close_distribution(cs, samples)
    return build_hamiltonian_system(cs, cl, fast_rhs=_fast_rhs(params))


# -- integrals of motion -----------------------------------------------

def invariants(z, params: CentralFieldParams):
    """(M, E, K) at a phase point (r, φ, M, p, p₁)."""
    r, _, Mv, p, p1 = (ad.real(c) for c in z)
    if r == 0.0:
        raise CentralFieldError("invariants undefined at r=0")
    E = (p * p / (2.0 * params.m) - Mv * Mv / (2.0 * params.m * r * r)
         - (r / 2.0) * p1 + float(ad.real(params.potential(r))))
    K = Mv * Mv / (4.0 * params.m) + r ** 3 * p1 / 8.0
    return Mv, E, K


def drift_absorber(z):
    """F = -(r/2) p₁; the bracket with F reproduces the drift, so
    H' = H + F generates the full flow."""
    return -(z[0] / 2.0) * z[4]


def hamiltonian_prime(params: CentralFieldParams):
    """H' = p²/2m - M²/(2mr²) - (r/2)p₁ + U(r) as a dual-evaluable callable."""

    def hprime(z):
        r, _, Mv, p, p1 = z
        return (p * p / (2.0 * params.m) - Mv * Mv / (2.0 * params.m * r * r)
                - (r / 2.0) * p1 + params.potential(r))

    return hprime


def precession_parameter(params: CentralFieldParams):
    def kfun(z):
        r, _, Mv, _, p1 = z
        return Mv * Mv / (4.0 * params.m) + r * r * r * p1 / 8.0

    return kfun


def invariant_functions(params: CentralFieldParams):
    hp = hamiltonian_prime(params)
    kf = precession_parameter(params)
    return {"M": lambda z: z[2], "E": hp, "K": kf}


def momentum_p1(params: CentralFieldParams, r: float, K: float, M: float) -> float:
    """p₁ value placing the state on the level set of K at radius r."""
    return 8.0 * (K - M * M / (4.0 * params.m)) / r ** 3


# -- orbit classification and the closed-form oracle -------------------

class OrbitTag(Enum):
    PRECESSING_CONIC = "PrecessingConic"
    CRITICAL_K = "CriticalK"
    BOUNDED_FALL_SPIRAL = "BoundedFallSpiral"
    UNBOUND_SPIRAL_LOW = "UnboundSpiralLow"
    UNBOUND_SPIRAL_CRITICAL = "UnboundSpiralCritical"
    UNBOUND_SPIRAL_HIGH = "UnboundSpiralHigh"


@dataclass(frozen=True)
class OrbitClass:
    tag: OrbitTag
    params: CentralFieldParams
    gamma: float
    e: float
    p_latus: float
    phi0: float = 0.0


def classify(params: CentralFieldParams, *, critical_band: float = 1e-9) -> OrbitClass:
    """Select the closed-form branch from (m, α, M, E, K).

    The band |1 - 8Km/M²| ≤ critical_band is treated as the critical
    case, where γ diverges and the parabolic-like formula applies.
    Interval endpoints in E follow the branch table: the low-energy
    spiral interval is closed at E = 0.
    """
    if not params.coulomb:
        raise CentralFieldError("classification requires the Coulomb potential")
    if params.M == 0:
        raise CentralFieldError("M=0 (radial motion) is not classified")
    if params.E is None or params.K is None:
        raise CentralFieldError("classification requires E and K")
    m, alpha, M, E, K = params.m, params.alpha, params.M, params.E, params.K
    disc = 1.0 - 8.0 * K * m / (M * M)
    if abs(disc) <= critical_band:
        return OrbitClass(OrbitTag.CRITICAL_K, params,
                          gamma=math.inf, e=math.nan, p_latus=math.nan)
    gamma = 1.0 / math.sqrt(abs(disc))
    q = 2.0 * M * M / (gamma ** 2 * m * alpha ** 2)
    e = math.sqrt(abs(1.0 + math.copysign(1.0, disc) * q * E))
    p_latus = M * M / (gamma ** 2 * m * alpha)
    if disc > 0.0:
        tag = OrbitTag.PRECESSING_CONIC
    else:
        threshold = 1.0 / q  # m α² γ² / (2 M²)
        band = 1e-12 * max(1.0, abs(threshold))
        if E < 0.0:
            tag = OrbitTag.BOUNDED_FALL_SPIRAL
        elif E < threshold - band:
            tag = OrbitTag.UNBOUND_SPIRAL_LOW
        elif E <= threshold + band:
            tag = OrbitTag.UNBOUND_SPIRAL_CRITICAL
        else:
            tag = OrbitTag.UNBOUND_SPIRAL_HIGH
    return OrbitClass(tag, params, gamma=gamma, e=e, p_latus=p_latus)


def orbit_params(gamma: float, e: float, kind: str, *, m: float = 1.0,
                 alpha: float = 1.0, M: float = 1.0) -> CentralFieldParams:
    """Invert (γ, e) to (E, K) for a conic (K < M²/8m) or fall (K > M²/8m)
    orbit, e.g. to reproduce the reference trajectory figures."""
    if kind not in ("conic", "fall"):
        raise CentralFieldError(f"unknown orbit kind {kind!r}")
    sign = 1.0 if kind == "conic" else -1.0
    disc = sign / gamma ** 2
    K = M * M * (1.0 - disc) / (8.0 * m)
    q = 2.0 * M * M / (gamma ** 2 * m * alpha ** 2)
    E = sign * (e * e - 1.0) / q
    return CentralFieldParams(m=m, alpha=alpha, M=M, E=E, K=K)


def oracle_r_of_phi(cls: OrbitClass, phi):
    """Closed-form radius of the classified branch; raises outside the
    branch's angular domain (denominator ≤ 0)."""
    pm = cls.params
    phi = np.asarray(phi, dtype=float)
    if cls.tag is OrbitTag.CRITICAL_K:
        theta = phi - cls.phi0
        den = pm.m * pm.alpha ** 2 * theta ** 2 - 2.0 * pm.M ** 2 * pm.E
        num = 2.0 * pm.M ** 2 * pm.alpha
    else:
        theta = (phi - cls.phi0) / cls.gamma
        p, e = cls.p_latus, cls.e
        num = p
        if cls.tag is OrbitTag.PRECESSING_CONIC:
            den = 1.0 + e * np.cos(theta)
        elif cls.tag is OrbitTag.BOUNDED_FALL_SPIRAL:
            den = e * e * np.cosh(theta) - e * math.sqrt(e * e - 1.0) * np.sinh(theta) - 1.0
        elif cls.tag is OrbitTag.UNBOUND_SPIRAL_LOW:
            den = e * np.cosh(theta) - 1.0
        elif cls.tag is OrbitTag.UNBOUND_SPIRAL_CRITICAL:
            den = np.exp(-theta) - 1.0  # p e^θ/(1-e^θ) = p/(e^{-θ}-1)
        else:
            den = e * np.sinh(-theta) - 1.0
    if np.any(den <= 0.0):
        raise OracleDomainError(f"angle outside branch domain for {cls.tag.value}")
    out = num / den
    return float(out) if out.ndim == 0 else out


def fit_phi0(cls: OrbitClass, z0) -> OrbitClass:
    """Phase the oracle so it passes through the initial state.

    The branch formulas determine φ₀ up to a reflection; the sign is
    fixed by the radial velocity (sign of p) and the rotation sense
    (sign of M), with apsis ties broken toward the nearer apsis.
    """
    pm = cls.params
    r0, phi_init = float(z0[0]), float(z0[1])
    sgn = math.copysign(1.0, float(z0[3])) * math.copysign(1.0, pm.M)
    if z0[3] == 0.0:
        sgn = 0.0

    if cls.tag is OrbitTag.CRITICAL_K:
        t2 = (2.0 * pm.M ** 2 * pm.alpha / r0 + 2.0 * pm.M ** 2 * pm.E) \
            / (pm.m * pm.alpha ** 2)
        if t2 < 0.0:
            raise OracleDomainError("initial radius incompatible with critical branch")
        theta = math.sqrt(t2)
        # dr/dθ has the sign of -θ
        if sgn > 0.0:
            theta = -theta
        return replace(cls, phi0=phi_init - theta)

    p, e, gamma = cls.p_latus, cls.e, cls.gamma
    if cls.tag is OrbitTag.PRECESSING_CONIC:
        c = (p / r0 - 1.0) / e
        c = min(1.0, max(-1.0, c))
        theta = math.acos(c)  # sin θ ≥ 0 → outbound
        if sgn < 0.0:
            theta = -theta
        elif sgn == 0.0:
            theta = 0.0 if abs(c - 1.0) < abs(c + 1.0) else math.pi
    elif cls.tag is OrbitTag.BOUNDED_FALL_SPIRAL:
        psi = -math.asinh(math.sqrt(e * e - 1.0))
        u = (1.0 + p / r0) / e  # cosh(θ+ψ); r_max at θ+ψ=0
        a = math.acosh(max(1.0, u))
        # sign(ṙ) = -sign(sinh(θ+ψ))·sign(M)
        theta = (-a if sgn > 0.0 else a) - psi
    elif cls.tag is OrbitTag.UNBOUND_SPIRAL_LOW:
        a = math.acosh(max(1.0, (1.0 + p / r0) / e))
        theta = -a if sgn > 0.0 else a
    elif cls.tag is OrbitTag.UNBOUND_SPIRAL_CRITICAL:
        theta = math.log(r0 / (r0 + p))
    else:
        theta = -math.asinh((1.0 + p / r0) / e)
    return replace(cls, phi0=phi_init - gamma * theta)


def turning_points(params: CentralFieldParams):
    """Radii where ṙ = 0: roots of E = (M²-8Km)/(2mr²) + U(r) (Coulomb)."""
    if not params.coulomb:
        raise CentralFieldError("turning points implemented for the Coulomb potential")
    m, alpha, M, E, K = params.m, params.alpha, params.M, params.E, params.K
    A = (M * M - 8.0 * K * m) / (2.0 * m)
    if A == 0.0:
        return (-alpha / E,) if E < 0.0 else ()
    disc = alpha * alpha + 4.0 * A * E
    if disc < 0.0:
        return ()
    roots = [(alpha + s * math.sqrt(disc)) / (2.0 * A) for s in (1.0, -1.0)]
    return tuple(sorted(1.0 / u for u in roots if u > 0.0))


def initial_state(cls: OrbitClass):
    """Apsis phase point (r, φ, M, p, p₁) lying on the classified orbit."""
    pm = cls.params
    if cls.tag is OrbitTag.PRECESSING_CONIC:
        r = cls.p_latus / (1.0 + cls.e)
        phi = cls.phi0
    elif cls.tag is OrbitTag.BOUNDED_FALL_SPIRAL:
        r = cls.p_latus / (cls.e - 1.0)
        phi = cls.phi0 + cls.gamma * math.asinh(math.sqrt(cls.e ** 2 - 1.0))
    else:
        raise CentralFieldError(f"no apsis state for branch {cls.tag.value}")
    return (r, phi, pm.M, 0.0, momentum_p1(pm, r, pm.K, pm.M))


# -- Lagrange-multiplier formulation -----------------------------------

@dataclass(frozen=True)
class MultiplierSystem:
    """Second-order system of the action with the multiplier term
    -λ̇ m r² φ̇, as a first-order flow in y = (r, ṙ, φ, φ̇, λ, λ̇).

    The multiplier contributes a negative kinetic term, so the canonical
    energy is unbounded from below although the (r, φ) motion can be
    perfectly regular.
    """

    params: CentralFieldParams

    def rhs(self, t, y):
        r, rdot, _, phidot, _, lamdot = y
        if r == 0.0:
            raise CentralFieldError("multiplier system singular at r=0")
        pm = self.params
        uprime = float(ad.real(pm.potential_prime(r)))
        rddot = r * phidot ** 2 - uprime / pm.m - 2.0 * r * lamdot * phidot
        return (rdot, rddot, phidot, -2.0 * rdot * phidot / r,
                lamdot, -2.0 * rdot * lamdot / r)

    def energy(self, y):
        r, rdot, _, phidot, _, lamdot = y
        pm = self.params
        return (pm.m * rdot ** 2 / 2.0
                + pm.m * r ** 2 * (phidot - lamdot) ** 2 / 2.0
                - pm.m * r ** 2 * lamdot ** 2 / 2.0
                + float(ad.real(pm.potential(r))))

    def multiplier_charge(self, y):
        """c = m r² λ̇, conserved along the flow."""
        r, _, _, _, _, lamdot = y
        return self.params.m * r * r * lamdot

    def angular_momentum(self, y):
        r, _, _, phidot, _, _ = y
        return self.params.m * r * r * phidot

    def precession_projection(self, y):
        """K of the projected (r, φ) motion equals c·M/(4m)."""
        return self.multiplier_charge(y) * self.angular_momentum(y) / (4.0 * self.params.m)


def multiplier_system(params: CentralFieldParams) -> MultiplierSystem:
    return MultiplierSystem(params)
