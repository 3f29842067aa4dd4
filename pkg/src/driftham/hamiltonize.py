"""Legendre transform and non-canonical Hamiltonian structure.

Given a control system ẋ = Z·u + V with Lagrangian L(x, u) and the
bracket closure of span{Z}, this module builds the phase space
(x, p_1..p_m̄), the Poisson bivector

    {x^i, x^j} = 0,   {x^i, p_a} = Z^i_a(x),   {p_a, p_b} = -U^c_ab(x) p_c,

the Hamiltonian H = p·ū - L(x, ū) (a function of x and the first m
momenta only), and the drift vector field

    𝐕 = V^i ∂/∂x^i - V^b_a p_b ∂/∂p_a,

which is added to the Hamiltonian flow and differentiates the bracket.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product
from typing import Callable, Mapping, Sequence

import numpy as np

from . import autodiff as ad
from .geometry import ClosureResult, VectorField, _solve_spd, structure_functions_at


class HamiltonizeError(ValueError):
    pass


class SingularHessianError(HamiltonizeError):
    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


class LegendreError(HamiltonizeError):
    pass


class NotPureGaugeError(HamiltonizeError):
    pass


@dataclass(frozen=True)
class ControlSystem:
    """Normal-form data: ẋ^i = Z^i_α u^α + V^i with Lagrangian L(x, u)."""

    n: int
    m: int
    Z: tuple[VectorField, ...]
    V: VectorField
    lagrangian: Callable
    parameters: Mapping[str, float] = field(default_factory=dict)
    u_box: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        if len(self.Z) != self.m:
            raise HamiltonizeError(f"{len(self.Z)} generators for m={self.m}")
        for f in (*self.Z, self.V):
            if f.dim != self.n:
                raise HamiltonizeError(
                    f"field {f.provenance!r} has dimension {f.dim}, expected {self.n}")
        if not self.u_box:
            object.__setattr__(self, "u_box", tuple((-10.0, 10.0) for _ in range(self.m)))


def _seed_controls(u):
    m = len(u)
    return [ad.Dual(u[j], [1.0 if k == j else 0.0 for k in range(m)]) for j in range(m)]


def lagrangian_control_gradient(cs: ControlSystem, x, u):
    """∂L/∂u at (x, u); entries match the component type of ``u``."""
    val = cs.lagrangian(list(x), _seed_controls(list(u)))
    if not isinstance(val, ad.Dual):
        return [0.0] * cs.m
    return list(val.partials)


def lagrangian_hessian(cs: ControlSystem, x, u):
    """∂²L/∂u∂u via a nested dual evaluation; exact."""
    grad = lagrangian_control_gradient(cs, x, _seed_controls([float(v) for v in u]))
    rows = []
    for g in grad:
        if isinstance(g, ad.Dual):
            rows.append([ad.real(p) for p in g.partials])
        else:
            rows.append([0.0] * cs.m)
    return np.array(rows, dtype=float)


def check_hessian(cs: ControlSystem, samples, *, hessian_tol: float = 1e-10, u=None):
    """Fail if |det ∂²L/∂u∂u| drops below ``hessian_tol`` at a sample."""
    if u is None:
        u = [0.0] * cs.m
    for x in samples:
        det = float(np.linalg.det(lagrangian_hessian(cs, x, u)))
        if abs(det) <= hessian_tol:
            raise SingularHessianError(
                f"control Hessian det {det:.3e} at sample {tuple(x)}", point=tuple(x))


def _grid_seeds(u_box, per_axis=5):
    axes = [np.linspace(lo, hi, per_axis) for lo, hi in u_box]
    return [list(pt) for pt in product(*axes)]


def legendre(cs: ControlSystem, x, p, u0=None, *, tol=1e-12, max_iter=50,
             hessian_tol=1e-10):
    """Invert p = ∂L/∂u at ``x`` and return (ū, H = p·ū - L(x, ū)).

    Damped Newton with exact gradient and Hessian; seeds tried in order:
    ``u0`` (warm start), zero, then a coarse grid over the control box.
    """
    x = [float(v) for v in x]
    p = [float(v) for v in p]
    scale = max(1.0, max(abs(v) for v in p))
    seeds = []
    if u0 is not None:
        seeds.append([float(v) for v in u0])
    seeds.append([0.0] * cs.m)

    def try_newton(u):
        u = list(u)
        res = np.array(lagrangian_control_gradient(cs, x, u), dtype=float) - p
        rnorm = float(np.max(np.abs(res)))
        for _ in range(max_iter):
            if rnorm < tol * scale:
                return u
            hess = lagrangian_hessian(cs, x, u)
            det = float(np.linalg.det(hess))
            if abs(det) <= hessian_tol:
                raise SingularHessianError(
                    f"control Hessian det {det:.3e} during Newton at x={tuple(x)}",
                    point=tuple(x))
            step = np.linalg.solve(hess, -res)
            lam = 1.0
            for _ in range(40):
                trial = [u[j] + lam * step[j] for j in range(cs.m)]
                tres = np.array(lagrangian_control_gradient(cs, x, trial), dtype=float) - p
                tnorm = float(np.max(np.abs(tres)))
                if tnorm < rnorm:
                    u, res, rnorm = trial, tres, tnorm
                    break
                lam *= 0.5
            else:
                return None
        return u if rnorm < tol * scale else None

    singular_err = None
    for s in seeds:
        try:
            u = try_newton(s)
        except SingularHessianError as err:
            singular_err = err
            u = None
        if u is not None:
            H = sum(p[a] * u[a] for a in range(cs.m)) - ad.real(cs.lagrangian(x, u))
            return u, H
    if singular_err is not None:
        raise singular_err
    for s in _grid_seeds(cs.u_box):
        u = try_newton(s)
        if u is not None:
            H = sum(p[a] * u[a] for a in range(cs.m)) - ad.real(cs.lagrangian(x, u))
            return u, H
    raise LegendreError(
        f"momentum inversion did not converge at x={tuple(x)}, p={tuple(p)}")


@dataclass
class HamiltonianSystem:
    """Phase-space package: bivector, Hamiltonian, drift, equations of motion.

    ``fast_rhs``, when set by a model that knows its structure functions in
    closed form, replaces the generic right-hand side; tests assert the two
    paths agree at sample points.
    """

    system: ControlSystem
    closure: ClosureResult
    fast_rhs: Callable | None = None
    _last_u: list | None = field(default=None, repr=False, compare=False)

    @property
    def n(self):
        return self.system.n

    @property
    def m(self):
        return self.system.m

    @property
    def m_bar(self):
        return self.closure.m_bar

    @property
    def dim(self):
        return self.n + self.m_bar

    @property
    def coordinate_names(self):
        return tuple(f"x{i + 1}" for i in range(self.n)) + tuple(
            f"p{a + 1}" for a in range(self.m_bar))

    # -- Legendre map --------------------------------------------------

    def u_bar(self, x, p_orig, u0=None):
        u, _ = legendre(self.system, x, p_orig, u0=u0)
        return u

    def hamiltonian(self, z):
        x = [float(v) for v in z[:self.n]]
        p = [float(v) for v in z[self.n:self.n + self.m]]
        _, H = legendre(self.system, x, p, u0=self._last_u)
        return H

    def hamiltonian_gradient(self, z):
        """∇H over all phase coordinates.

        By the envelope property of the Legendre transform,
        ∂H/∂x = -∂L/∂x at (x, ū), ∂H/∂p_α = ū^α for the original momenta,
        and H does not depend on the higher momenta.
        """
        n, m = self.n, self.m
        x = [float(v) for v in z[:n]]
        p = [float(v) for v in z[n:n + m]]
        u, _ = legendre(self.system, x, p, u0=self._last_u)
        self._last_u = u
        xd = ad.seed(x, range(n))
        val = self.system.lagrangian(xd, u)
        dLdx = list(val.partials) if isinstance(val, ad.Dual) else [0.0] * n
        return [-ad.real(g) for g in dLdx] + list(u) + [0.0] * (self.m_bar - m)

    # -- Poisson structure ---------------------------------------------

    def poisson_matrix(self, z):
        """Bivector Π at ``z``; numpy array for real input, nested lists
        (carrying exact derivatives) when ``z`` contains duals."""
        n, mbar = self.n, self.m_bar
        x = list(z[:n])
        p = list(z[n:])
        dual_input = any(isinstance(c, ad.Dual) for c in z)
        U, _, _ = structure_functions_at(self.closure, x)
        basis_vals = [f(x) for f in self.closure.basis]
        N = n + mbar
        Pi = [[0.0] * N for _ in range(N)]
        for a in range(mbar):
            for i in range(n):
                Pi[i][n + a] = basis_vals[a][i]
                Pi[n + a][i] = -basis_vals[a][i]
        for a in range(mbar):
            for b in range(mbar):
                if a != b:
                    Pi[n + a][n + b] = -sum(U[a][b][c] * p[c] for c in range(mbar))
        if not dual_input:
            return np.array([[ad.real(v) for v in row] for row in Pi], dtype=float)
        return Pi

    def drift_vector(self, z):
        """Phase drift 𝐕 = (V^i(x), -V^b_a(x) p_b)."""
        n, mbar = self.n, self.m_bar
        x = list(z[:n])
        p = list(z[n:])
        _, Vmat, _ = structure_functions_at(self.closure, x)
        head = list(self.system.V(x))
        tail = [-sum(Vmat[a][b] * p[b] for b in range(mbar)) for a in range(mbar)]
        return head + tail

    def rhs(self, t, z):
        """ż^A = Π^{AB} ∂_B H + 𝐕^A."""
        if self.fast_rhs is not None:
            return self.fast_rhs(t, z)
        n, m, mbar = self.n, self.m, self.m_bar
        x = [float(v) for v in z[:n]]
        p = [float(v) for v in z[n:]]
        u, _ = legendre(self.system, x, p[:m], u0=self._last_u)
        self._last_u = u
        xd = ad.seed(x, range(n))
        val = self.system.lagrangian(xd, u)
        dLdx = [ad.real(g) for g in val.partials] if isinstance(val, ad.Dual) else [0.0] * n
        U, Vmat, _ = structure_functions_at(self.closure, x)
        basis_vals = np.array([[ad.real(c) for c in f(x)] for f in self.closure.basis])
        vvals = [ad.real(c) for c in self.system.V(x)]
        p_arr = np.array(p)
        out = np.empty(n + mbar)
        for i in range(n):
            out[i] = sum(basis_vals[b][i] * u[b] for b in range(m)) + vvals[i]
        for a in range(mbar):
            acc = float(basis_vals[a] @ dLdx)
            for b in range(m):
                acc -= float(U[a][b] @ p_arr) * u[b]
            acc -= float(Vmat[a] @ p_arr)
            out[n + a] = acc
        return out

    # -- scalar phase functions ----------------------------------------

    def gradient(self, F, z):
        """∇F of a dual-evaluable scalar phase function at a real point."""
        zd = ad.seed([float(v) for v in z], range(self.dim))
        val = F(zd)
        if isinstance(val, ad.Dual):
            return [ad.real(g) for g in val.partials]
        return [0.0] * self.dim

    def poisson_bracket(self, F, G, z):
        """{F, G}(z) for dual-evaluable scalars F, G."""
        Pi = self.poisson_matrix(z)
        gF = np.array(self.gradient(F, z))
        gG = np.array(self.gradient(G, z))
        return float(gF @ Pi @ gG)

    def bracket_with_hamiltonian(self, F, z):
        Pi = self.poisson_matrix(z)
        gF = np.array(self.gradient(F, z))
        gH = np.array(self.hamiltonian_gradient(z))
        return float(gF @ Pi @ gH)


def _matrix_with_derivatives(rows):
    """Split dual-valued entries into (value, partial-vector) float arrays."""
    N = len(rows)
    vals = np.zeros((N, len(rows[0])))
    ders = None
    for a, row in enumerate(rows):
        for b, entry in enumerate(row):
            vals[a, b] = ad.real(entry)
            if isinstance(entry, ad.Dual):
                parts = [ad.real(q) for q in entry.partials]
                if ders is None:
                    ders = np.zeros((N, len(row), len(parts)))
                ders[a, b, :] = parts
    if ders is None:
        ders = np.zeros((N, len(rows[0]), N))
    return vals, ders


def jacobi_residual(hs: HamiltonianSystem, z):
    """Max over index triples of the Schouten bracket [Π, Π]^{abc}/2 at z.

    Derivatives of Π are exact (dual-seeded evaluation), so the residual
    measures the bivector itself, not differentiation error.
    """
    N = hs.dim
    zd = ad.seed([float(v) for v in z], range(N))
    Pi, dPi = _matrix_with_derivatives(hs.poisson_matrix(zd))
    worst = 0.0
    for a in range(N):
        for b in range(a + 1, N):
            for c in range(b + 1, N):
                s = float(Pi[a] @ dPi[b, c] + Pi[b] @ dPi[c, a] + Pi[c] @ dPi[a, b])
                worst = max(worst, abs(s))
    return worst


def drift_compatibility(hs: HamiltonianSystem, z, drift=None):
    """Max |(L_𝐕 Π)^{ab}| at z — the Leibniz property of the drift.

    𝐕{F,G} = {𝐕F, G} + {F, 𝐕G} holds iff the Lie derivative of Π along
    the drift vanishes.  ``drift`` overrides the system drift (used as a
    negative control with a corrupted field).
    """
    N = hs.dim
    zd = ad.seed([float(v) for v in z], range(N))
    Pi, dPi = _matrix_with_derivatives(hs.poisson_matrix(zd))
    W = drift(zd) if drift is not None else hs.drift_vector(zd)
    Wv = np.array([ad.real(w) for w in W])
    dW = np.zeros((N, N))
    for a, w in enumerate(W):
        if isinstance(w, ad.Dual):
            dW[a, :] = [ad.real(q) for q in w.partials]
    worst = 0.0
    for a in range(N):
        for b in range(a + 1, N):
            s = float(Wv @ dPi[a, b] - Pi[:, b] @ dW[a] - Pi[a, :] @ dW[b])
            worst = max(worst, abs(s))
    return worst


def check_hamiltonian_drift(hs: HamiltonianSystem, F, samples, *, tol=1e-8):
    """True iff Π∇F reproduces the drift at every sample.

    A passing F absorbs the drift into the bracket: the full flow is then
    generated by H' = H + F alone.
    """
    for z in samples:
        Pi = hs.poisson_matrix(z)
        gF = np.array(hs.gradient(F, z))
        W = np.array([ad.real(w) for w in hs.drift_vector(z)])
        if float(np.max(np.abs(Pi @ gF - W))) > tol:
            return False
    return True


def absorbed_hamiltonian(hs: HamiltonianSystem, F):
    """H' = H + F as a plain callable on real phase points."""

    def hprime(z):
        return hs.hamiltonian(z) + ad.real(F(list(z)))

    return hprime


def build_hamiltonian_system(cs: ControlSystem, cl: ClosureResult, *,
                             hessian_tol: float = 1e-10,
                             fast_rhs=None) -> HamiltonianSystem:
    """Assemble the phase-space system, checking Hessian regularity first."""
    check_hessian(cs, cl.samples, hessian_tol=hessian_tol)
    return HamiltonianSystem(system=cs, closure=cl, fast_rhs=fast_rhs)


@dataclass
class CanonicalSystem:
    """Pure-gauge system rewritten in canonical variables (x, π).

    The momenta of the closed basis relate to the canonical ones by
    p_a = Z^i_a(x) π_i; when the basis spans the whole tangent space this
    map is invertible and the brackets become {x^i, π_j} = δ^i_j.
    """

    parent: HamiltonianSystem

    @property
    def n(self):
        return self.parent.n

    @property
    def dim(self):
        return 2 * self.parent.n

    def _basis_matrix(self, x):
        """B with B[a][i] = Z^i_a(x), so p = B π."""
        return [list(f(x)) for f in self.parent.closure.basis]

    def to_canonical(self, z):
        """(x, p) → (x, π); generic over duals."""
        n = self.n
        x = list(z[:n])
        p = list(z[n:])
        (pi,) = _solve_spd(self._basis_matrix(x), [p])
        return x + pi

    def from_canonical(self, zt):
        n = self.n
        x = list(zt[:n])
        pi = list(zt[n:])
        B = self._basis_matrix(x)
        p = [sum(B[a][i] * pi[i] for i in range(n)) for a in range(n)]
        return x + p

    def hamiltonian(self, zt):
        return self.parent.hamiltonian(self.from_canonical(zt))

    def poisson_matrix(self, zt):
        """Pushforward T Π Tᵀ of the parent bivector; canonical up to
        the parent's own structure residuals."""
        z = [ad.real(v) for v in self.from_canonical(zt)]
        zd = ad.seed(z, range(self.dim))
        w = self.to_canonical(zd)
        T = np.array([[ad.real(q) for q in wi.partials] if isinstance(wi, ad.Dual)
                      else [0.0] * self.dim for wi in w])
        Pi = self.parent.poisson_matrix(z)
        return T @ Pi @ T.T

    def rhs(self, t, zt):
        """Parent equations pushed through the coordinate change."""
        z = [float(ad.real(v)) for v in self.from_canonical(zt)]
        zd = ad.seed(z, range(self.dim))
        w = self.to_canonical(zd)
        T = np.array([[ad.real(q) for q in wi.partials] if isinstance(wi, ad.Dual)
                      else [0.0] * self.dim for wi in w])
        return T @ np.asarray(self.parent.rhs(t, z))


def canonicalize_pure_gauge(hs: HamiltonianSystem) -> CanonicalSystem:
    if not hs.closure.pure_gauge:
        raise NotPureGaugeError(
            f"closure has m̄={hs.closure.m_bar} < n={hs.n}: not pure gauge")
    return CanonicalSystem(parent=hs)
