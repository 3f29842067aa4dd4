"""Trajectory integration and variational residual checks.

Integration uses an adaptive embedded Runge-Kutta 5(4) scheme with dense
output.  The bracket is non-canonical and the drift non-symplectic, so
instead of a structure-preserving scheme we integrate at tight tolerance
and ledger the conserved quantities so any drift is visible.

The residual evaluators reconstruct time derivatives from the dense
output with 4th-order central differences and test the trajectory
against the conditional-extremum equations in their original
(x, u)-space form.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from . import autodiff as ad
from .geometry import ClosureResult, structure_functions_at
from .hamiltonize import ControlSystem, HamiltonianSystem, legendre


class DynamicsError(ValueError):
    pass


class IntegrationError(DynamicsError):
    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


@dataclass(frozen=True)
class Event:
    """Scalar crossing detector g(t, z) = 0 stopping (or marking) the flow."""

    name: str
    func: Callable
    terminal: bool = True
    direction: float = 0.0


@dataclass(frozen=True)
class EventRecord:
    name: str
    t: float
    z: tuple


@dataclass
class Trajectory:
    t: np.ndarray
    z: np.ndarray  # shape (len(t), dim)
    dense: Callable  # t -> phase point (vectorised over t)
    ledger: Mapping[str, np.ndarray] = field(default_factory=dict)
    termination: str = "t_end"
    events: tuple = ()

    @property
    def dim(self):
        return self.z.shape[1]

    @property
    def step_sizes(self):
        return np.diff(self.t)

    @property
    def t_span(self):
        return float(self.t[0]), float(self.t[-1])


def integrate(hs, z0, t_span, *, rtol=1e-10, atol=1e-12,
              invariants: Mapping[str, Callable] | None = None,
              events: Sequence[Event] = (), max_step=np.inf) -> Trajectory:
    """Integrate ż = Π∇H + 𝐕 from ``z0`` over ``t_span``.

    ``invariants`` maps names to scalar phase functions evaluated at every
    accepted step.  A terminal event stops integration with its root
    localised by the solver's root finder on the dense output.
    """
    z0 = np.asarray(z0, dtype=float)
    if not np.all(np.isfinite(z0)):
        raise IntegrationError(f"non-finite initial state {z0!r}")

    wrapped = []
    for ev in events:
        def g(t, z, _f=ev.func):
            return _f(t, z)
        g.terminal = ev.terminal
        g.direction = ev.direction
        wrapped.append(g)

    sol = solve_ivp(hs.rhs, t_span, z0, method="RK45", rtol=rtol, atol=atol,
                    dense_output=True, events=wrapped or None, max_step=max_step)

    records = []
    for ev, t_hits, z_hits in zip(events, sol.t_events or [], sol.y_events or []):
        for th, zh in zip(t_hits, z_hits):
            records.append(EventRecord(ev.name, float(th), tuple(zh)))

    dense = sol.sol

    def dense_eval(t):
        return dense(t)

    traj = Trajectory(
        t=sol.t, z=sol.y.T, dense=dense_eval,
        termination=("event" if sol.status == 1 else
                     "t_end" if sol.status == 0 else "integrator failure"),
        events=tuple(records),
    )
    if sol.status < 0:
        raise IntegrationError(f"integration failed: {sol.message}", trajectory=traj)
    if not np.all(np.isfinite(sol.y)):
        raise IntegrationError("non-finite state encountered", trajectory=traj)

    ledger = {}
    for name, func in (invariants or {}).items():
        ledger[name] = np.array([float(ad.real(func(z))) for z in traj.z])
    traj.ledger = ledger
    return traj


# -- finite differences on the dense output ----------------------------

_D1_WEIGHTS = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
_D2_WEIGHTS = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0
_STENCIL = np.array([-2, -1, 0, 1, 2])


def residual_times(traj: Trajectory, h: float, count: int = 200):
    """Evaluation grid keeping the 5-point stencil inside the trajectory."""
    t0, t1 = traj.t_span
    lo, hi = t0 + 2.0 * h, t1 - 2.0 * h
    if hi <= lo:
        raise DynamicsError("trajectory too short for the difference stencil")
    return np.linspace(lo, hi, count)


@dataclass
class ResidualSeries:
    times: np.ndarray
    labels: tuple[str, ...]
    values: np.ndarray  # shape (len(times), len(labels))

    @property
    def max_abs(self):
        return float(np.max(np.abs(self.values)))

    def component_max(self, label):
        return float(np.max(np.abs(self.values[:, self.labels.index(label)])))


def _lagrangian_x_gradient(cs: ControlSystem, x, u):
    xd = ad.seed([float(v) for v in x], range(cs.n))
    val = cs.lagrangian(xd, list(u))
    if isinstance(val, ad.Dual):
        return [ad.real(g) for g in val.partials]
    return [0.0] * cs.n


def _structure_with_derivatives(cl: ClosureResult, x):
    """(U, Vmat) values plus their spatial derivatives dU[a][b][c][j]."""
    n = len(x)
    xd = ad.seed([float(v) for v in x], range(n))
    Ud, Vd, _ = structure_functions_at(cl, xd)
    mbar = cl.m_bar
    U = np.zeros((mbar, mbar, mbar))
    dU = np.zeros((mbar, mbar, mbar, n))
    Vmat = np.zeros((mbar, mbar))
    dV = np.zeros((mbar, mbar, n))
    for a in range(mbar):
        for b in range(mbar):
            Vval = Vd[a][b]
            Vmat[a, b] = ad.real(Vval)
            if isinstance(Vval, ad.Dual):
                dV[a, b] = [ad.real(q) for q in Vval.partials]
            for c in range(mbar):
                val = Ud[a][b][c]
                U[a, b, c] = ad.real(val)
                if isinstance(val, ad.Dual):
                    dU[a, b, c] = [ad.real(q) for q in val.partials]
    return U, dU, Vmat, dV


def _stencil_data(cs: ControlSystem, traj: Trajectory, t: float, h: float,
                  warm=None):
    """Per-stencil-point values needed by the residual formulas."""
    m = cs.m
    xs, ps, us, gs, avals = [], [], [], [], []
    for k in _STENCIL:
        z = traj.dense(t + k * h)
        x = [float(v) for v in z[:cs.n]]
        p = [float(v) for v in z[cs.n:]]
        u, _ = legendre(cs, x, p[:m], u0=warm)
        warm = u
        dLdx = _lagrangian_x_gradient(cs, x, u)
        zvals = [[ad.real(c) for c in cs.Z[a](x)] for a in range(m)]
        xs.append(x)
        ps.append(p)
        us.append(np.array(u))
        gs.append(np.array(p[:m]))
        avals.append(np.array([float(np.dot(zvals[a], dLdx)) for a in range(m)]))
    return xs, ps, us, gs, avals, warm


def conditional_residual(cs: ControlSystem, cl: ClosureResult, traj: Trajectory,
                         *, times=None, h: float = 0.01) -> ResidualSeries:
    """Residuals of the conditional-extremum equations along a trajectory.

    For an integrable (bracket-stable) generator set the residual is the
    first-order variational expression

        R_α = ∂L/∂x·Z_α - d/dt(∂L/∂u^α) - ∂L/∂u^β (V^β_α + U^β_αγ u^γ).

    For a one-step closure (added fields are exactly [Z_α, V]) it is the
    second-order expression obtained from the two-derivative gauge
    symmetry, together with a momentum-consistency block

        D_α = d/dt p^(0)_α - ({p^(0)_α, H} - p^(1)_α),

    which ties the trajectory's higher momenta to the definition that
    brings the variational equations to first order.
    """
    if times is None:
        times = residual_times(traj, h)
    m = cs.m
    mbar = cl.m_bar
    one_step = cl.one_step
    if not one_step and mbar != m:
        raise DynamicsError(
            f"residual formulas cover bracket-stable (m̄=m) and one-step "
            f"(m̄=2m, drift brackets) closures; got m={m}, m̄={mbar}")

    labels = tuple(f"R{a + 1}" for a in range(m))
    if one_step:
        labels += tuple(f"D{a + 1}" for a in range(m))
    out = np.zeros((len(times), len(labels)))
    warm = None

    for row, t in enumerate(np.asarray(times, dtype=float)):
        xs, ps, us, gs, avals, warm = _stencil_data(cs, traj, t, h, warm)
        x = xs[2]
        p = np.array(ps[2])
        u = us[2]
        g = gs[2]
        dLdx = _lagrangian_x_gradient(cs, x, u)
        dg = np.array([float(_D1_WEIGHTS @ [gk[b] for gk in gs]) for b in range(m)]) / h
        U, dU, Vmat, dV = _structure_with_derivatives(cl, x)
        zvals = np.array([[ad.real(c) for c in cl.basis[a](x)] for a in range(mbar)])
        vval = np.array([ad.real(c) for c in cs.V(x)])

        if not one_step:
            for a in range(m):
                coupling = sum(
                    g[b] * (Vmat[a, b] + sum(U[a, c, b] * u[c] for c in range(m)))
                    for b in range(m))
                out[row, a] = avals[2][a] - dg[a] - coupling
            continue

        ddg = np.array([float(_D2_WEIGHTS @ [gk[b] for gk in gs]) for b in range(m)]) / h**2
        da = np.array([float(_D1_WEIGHTS @ [ak[a] for ak in avals]) for a in range(m)]) / h
        du = np.array([float(_D1_WEIGHTS @ [uk[r] for uk in us]) for r in range(m)]) / h

        # index map into the closed basis: level-0 fields first, then the
        # drift brackets Z1_a = basis[m + a]
        for a in range(m):
            ra = 0.0
            # d²/dt²(∂L/∂u^a)
            ra += ddg[a]
            # - d/dt(∂L/∂u^b) · (u^r [U01_1[r,a]^b + U00[r,a]^b] - V1_1[a]^b)
            for b in range(m):
                coeff = sum(us[2][r] * (U[r, m + a, m + b] + U[r, a, b])
                            for r in range(m)) - Vmat[m + a, m + b]
                ra -= dg[b] * coeff
            # + ∂L/∂u^b · (...)
            for b in range(m):
                coeff = 0.0
                for w in range(m):
                    for r in range(m):
                        zdU = float(np.dot(zvals[w], dU[r, a, b]))
                        uu = sum(U[r, c, b] * U[w, m + a, m + c] for c in range(m))
                        coeff += us[2][w] * us[2][r] * (uu - zdU)
                for r in range(m):
                    coeff -= du[r] * U[r, a, b]
                    coeff += us[2][r] * (
                        U[r, m + a, b]
                        - sum(U[r, c, b] * Vmat[m + a, m + c] for c in range(m))
                        - float(np.dot(vval, dU[r, a, b])))
                coeff -= Vmat[m + a, b]
                ra += g[b] * coeff
            # - d/dt(∂L/∂x·Z0_a) + ∂L/∂x·(u^r Z0_w U01_1[r,a]^w + Z1_a - Z0_w V1_1[a]^w)
            ra -= da[a]
            tangent = np.array(zvals[m + a], dtype=float)
            for w in range(m):
                coeff = sum(us[2][r] * U[r, m + a, m + w] for r in range(m))
                coeff -= Vmat[m + a, m + w]
                tangent = tangent + coeff * zvals[w]
            ra += float(np.dot(dLdx, tangent))
            out[row, a] = ra

        # momentum-consistency block
        dp0 = np.array([float(_D1_WEIGHTS @ [pk[a] for pk in ps]) for a in range(m)]) / h
        for a in range(m):
            bracket = float(np.dot(zvals[a], dLdx))
            for b in range(m):
                bracket -= float(U[a, b] @ p) * u[b]
            expected = bracket - p[m + a]
            out[row, m + a] = dp0[a] - expected

    return ResidualSeries(np.asarray(times, dtype=float), labels, out)


def third_order_residual_central(traj: Trajectory, params, *, times=None,
                                 h: float = 0.01, r_index: int = 0) -> ResidualSeries:
    """Deviation of the combination m r̈ r/2 + m ṙ²/2 + U(r) + (r/2) U'(r)
    from its value at the first evaluation time.

    Constancy of this combination is the integrated form of the
    third-order radial equation of the central-field model; it holds both
    for the phase-space trajectories and for multiplier-system
    trajectories projected to (r, φ).
    """
    if times is None:
        times = residual_times(traj, h)
    times = np.asarray(times, dtype=float)
    vals = np.zeros(len(times))
    for row, t in enumerate(times):
        rs = np.array([float(traj.dense(t + k * h)[r_index]) for k in _STENCIL])
        r = rs[2]
        rdot = float(_D1_WEIGHTS @ rs) / h
        rddot = float(_D2_WEIGHTS @ rs) / h**2
        vals[row] = (params.m * rddot * r / 2.0 + params.m * rdot**2 / 2.0
                     + params.potential(r) + (r / 2.0) * params.potential_prime(r))
    dev = vals - vals[0]
    return ResidualSeries(times, ("E_combination",), dev.reshape(-1, 1))
