"""Vector fields, Lie brackets, and distribution closure.

Vector fields evaluate on real points and on (nested) dual points, so
Jacobians are exact at any bracket depth.  The closure routine extends a
set of generators by iterated brackets among themselves and with the
drift until the span is bracket-stable, and reports the pointwise
structure functions expressing each bracket in the final basis.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import autodiff as ad
from . import expr as ex


class GeometryError(ValueError):
    pass


class DimensionMismatchError(GeometryError):
    pass


class DegenerateDistributionError(GeometryError):
    """Generator matrix lost full column rank at a sample point."""

    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


class ClosureError(GeometryError):
    def __init__(self, message, basis=None):
        super().__init__(message)
        self.basis = basis


@dataclass(frozen=True)
class VectorField:
    """Smooth map from state points to tangent vectors.

    ``func`` maps a length-``dim`` point (floats or duals) to a length-``dim``
    tuple of components.  ``constant`` marks fields with vanishing Jacobian.
    """

    dim: int
    func: Callable
    provenance: str = "user-defined"
    constant: bool = False

    def __call__(self, x):
        out = self.func(x)
        if len(out) != self.dim:
            raise DimensionMismatchError(
                f"field {self.provenance!r} returned {len(out)} components, expected {self.dim}")
        return out

    @staticmethod
    def from_components(components: Sequence[Callable], provenance="user-defined"):
        components = tuple(components)

        def func(x):
            return tuple(c(x) for c in components)

        return VectorField(len(components), func, provenance)

    @staticmethod
    def from_exprs(sources: Sequence[str], dim: int, parameters=None, provenance="user-defined"):
        """Field whose components are expressions in x1..xn plus parameters."""
        parameters = dict(parameters or {})
        trees = tuple(ex.parse(s) for s in sources)
        if len(trees) != dim:
            raise DimensionMismatchError(f"{len(trees)} components for dimension {dim}")
        names = tuple(f"x{i + 1}" for i in range(dim))
        is_const = all(not (ex.free_names(t) - set(parameters)) for t in trees)

        def func(x):
            bindings = dict(parameters)
            bindings.update(zip(names, x))
            return tuple(ex.evaluate(t, bindings) for t in trees)

        return VectorField(dim, func, provenance, constant=is_const)

    @staticmethod
    def constant_field(values, provenance="user-defined"):
        values = tuple(float(v) for v in values)
        return VectorField(len(values), lambda x: values, provenance, constant=True)

    def with_provenance(self, provenance: str) -> "VectorField":
        return dataclasses.replace(self, provenance=provenance)


def jacobian(f: VectorField, x):
    """J[i][j] = d f_i / d x_j, exact via dual seeding (nested-safe)."""
    n = f.dim
    if f.constant:
        return [[0.0] * n for _ in range(n)]
    xd = [ad.Dual(v, [1.0 if j == i else 0.0 for j in range(n)]) for i, v in enumerate(x)]
    y = f(xd)
    rows = []
    for yi in y:
        if isinstance(yi, ad.Dual):
            rows.append(list(yi.partials))
        else:
            rows.append([0.0] * n)
    return rows


def lie_bracket(X: VectorField, Y: VectorField, provenance=None) -> VectorField:
    """[X, Y]^i = X^j d_j Y^i - Y^j d_j X^i."""
    if X.dim != Y.dim:
        raise DimensionMismatchError(f"bracket of fields of dimension {X.dim} and {Y.dim}")
    n = X.dim
    if provenance is None:
        provenance = f"[{X.provenance}, {Y.provenance}]"

    def func(x):
        jx = jacobian(X, x)
        jy = jacobian(Y, x)
        vx = X(x)
        vy = Y(x)
        return tuple(
            sum(jy[i][j] * vx[j] - jx[i][j] * vy[j] for j in range(n))
            for i in range(n))

    return VectorField(n, func, provenance, constant=X.constant and Y.constant)


def halton_points(box: Sequence[tuple[float, float]], count: int, skip: int = 20):
    """Deterministic quasi-random points in an axis-aligned box."""
    primes = (2, 3, 5, 7, 11, 13, 17, 19)
    dim = len(box)
    if dim > len(primes):
        raise GeometryError(f"sample box dimension {dim} too large")

    def radical_inverse(base, i):
        inv, f = 0.0, 1.0 / base
        while i > 0:
            inv += f * (i % base)
            i //= base
            f /= base
        return inv

    pts = []
    for i in range(skip, skip + count):
        pts.append(tuple(lo + (hi - lo) * radical_inverse(primes[d], i)
                         for d, (lo, hi) in enumerate(box)))
    return pts


def _basis_matrix(basis, x):
    return np.array([[ad.real(c) for c in f(x)] for f in basis], dtype=float).T


def check_rank(generators: Sequence[VectorField], samples, rank_tol: float):
    """Fail loudly if the generator matrix drops column rank at any sample."""
    for x in samples:
        mat = _basis_matrix(generators, x)
        sv = np.linalg.svd(mat, compute_uv=False)
        if sv[-1] <= rank_tol * sv[0]:
            raise DegenerateDistributionError(
                f"generators rank-deficient at sample {tuple(x)}: "
                f"singular values {sv.tolist()}", point=tuple(x))


@dataclass(frozen=True)
class Distribution:
    """Ordered generators with the sample set used for rank decisions."""

    generators: tuple[VectorField, ...]
    samples: tuple
    rank_tol: float = 1e-7

    def __post_init__(self):
        check_rank(self.generators, self.samples, self.rank_tol)

    @property
    def dim(self):
        return self.generators[0].dim


def _solve_spd(A, b):
    """Gaussian elimination with partial pivoting, generic over duals.

    A is a list-of-lists square matrix, b a list of right-hand sides
    (each a list).  Pivoting compares the underlying floats.
    """
    k = len(A)
    A = [row[:] for row in A]
    b = [rhs[:] for rhs in b]
    for col in range(k):
        piv = max(range(col, k), key=lambda r: abs(ad.real(A[r][col])))
        if abs(ad.real(A[piv][col])) == 0.0:
            raise DegenerateDistributionError("singular normal equations")
        if piv != col:
            A[col], A[piv] = A[piv], A[col]
            for rhs in b:
                rhs[col], rhs[piv] = rhs[piv], rhs[col]
        inv = 1.0 / A[col][col]
        for r in range(col + 1, k):
            factor = A[r][col] * inv
            for c in range(col, k):
                A[r][c] = A[r][c] - factor * A[col][c]
            for rhs in b:
                rhs[r] = rhs[r] - factor * rhs[col]
    for rhs in b:
        for r in range(k - 1, -1, -1):
            acc = rhs[r]
            for c in range(r + 1, k):
                acc = acc - A[r][c] * rhs[c]
            rhs[r] = acc / A[r][r]
    return b


def _project_coefficients(basis_vals, w):
    """Least-squares coefficients of w on the basis columns (normal equations).

    ``basis_vals`` is a list of m vectors (columns), ``w`` the target vector;
    all entries may be duals.  Returns (coeffs, residual_norm_real).
    """
    m = len(basis_vals)
    n = len(w)
    gram = [[sum(basis_vals[a][i] * basis_vals[b][i] for i in range(n)) for b in range(m)]
            for a in range(m)]
    rhs = [sum(basis_vals[a][i] * w[i] for i in range(n)) for a in range(m)]
    (coeffs,) = _solve_spd(gram, [rhs])
    resid = [ad.real(w[i]) - sum(ad.real(coeffs[a]) * ad.real(basis_vals[a][i]) for a in range(m))
             for i in range(n)]
    return coeffs, float(np.linalg.norm(resid))


@dataclass
class ClosureResult:
    """Bracket-stable extended basis of a characteristic distribution."""

    basis: tuple[VectorField, ...]
    n_original: int
    drift: VectorField
    pure_gauge: bool
    generation_log: tuple[str, ...]
    samples: tuple
    rank_tol: float
    closure_tol: float
    _pair_cache: dict = field(default_factory=dict, repr=False)
    _drift_cache: dict = field(default_factory=dict, repr=False)

    @property
    def m_bar(self):
        return len(self.basis)

    @property
    def dim(self):
        return self.basis[0].dim

    def pair_bracket(self, i: int, j: int) -> VectorField:
        """Cached [Z_i, Z_j] for i < j."""
        if i >= j:
            raise GeometryError("pair_bracket expects i < j")
        key = (i, j)
        if key not in self._pair_cache:
            self._pair_cache[key] = lie_bracket(
                self.basis[i], self.basis[j], provenance=f"bracket({i},{j})")
        return self._pair_cache[key]

    def drift_bracket(self, i: int) -> VectorField:
        """Cached [Z_i, V]."""
        if i not in self._drift_cache:
            self._drift_cache[i] = lie_bracket(
                self.basis[i], self.drift, provenance=f"bracket-with-drift({i})")
        return self._drift_cache[i]

    @property
    def one_step(self) -> bool:
        """True when the added fields are exactly [Z_alpha, V] of the originals."""
        m = self.n_original
        if self.m_bar != 2 * m:
            return False
        return all(self.generation_log[m + a] == f"bracket-with-drift({a})" for a in range(m))


def close_distribution(system, samples, *, rank_tol: float = 1e-7,
                       closure_tol: float = 1e-6, max_sweeps: int | None = None) -> ClosureResult:
    """Close span{Z} under mutual brackets and brackets with the drift.

    ``system`` needs attributes ``Z`` (sequence of generators) and ``V``
    (drift field).  A candidate bracket joins the basis iff its residual
    after least-squares projection onto the current basis exceeds
    ``rank_tol`` (relative to the basis scale) at any sample point.
    Candidate order per sweep is deterministic: self-brackets in
    lexicographic index order, then drift brackets.
    """
    generators = tuple(system.Z)
    drift = system.V
    n = generators[0].dim
    samples = tuple(tuple(p) for p in samples)
    if len(generators) > n:
        raise DegenerateDistributionError(
            f"{len(generators)} generators exceed state dimension {n}: "
            "over-complete (reducible) generating sets are not supported")
    check_rank(generators, samples, rank_tol)

    basis = list(generators)
    log = [f.provenance for f in generators]
    if max_sweeps is None:
        max_sweeps = n + 2

    def in_span(candidate):
        for x in samples:
            mat = _basis_matrix(basis, x)
            w = np.array([ad.real(c) for c in candidate(x)], dtype=float)
            scale = max(np.linalg.svd(mat, compute_uv=False)[0], np.linalg.norm(w), 1e-300)
            coeffs, *_ = np.linalg.lstsq(mat, w, rcond=None)
            resid = np.linalg.norm(mat @ coeffs - w)
            if resid > rank_tol * scale:
                return False
        return True

    for _ in range(max_sweeps):
        if len(basis) == n:
            break
        added = False
        size = len(basis)
        candidates = [(lie_bracket(basis[i], basis[j], provenance=f"bracket({i},{j})"))
                      for i in range(size) for j in range(i + 1, size)]
        candidates += [lie_bracket(basis[i], drift, provenance=f"bracket-with-drift({i})")
                       for i in range(size)]
        for cand in candidates:
            if len(basis) == n:
                break
            if not in_span(cand):
                basis.append(cand)
                log.append(cand.provenance)
                try:
                    check_rank(basis, samples, rank_tol)
                except DegenerateDistributionError as err:
                    raise ClosureError(
                        f"basis degenerated after adding {cand.provenance}: {err}",
                        basis=tuple(basis)) from err
                added = True
        if not added:
            break
    else:
        raise ClosureError(
            f"closure did not stabilise within {max_sweeps} sweeps", basis=tuple(basis))

    return ClosureResult(
        basis=tuple(basis),
        n_original=len(generators),
        drift=drift,
        pure_gauge=(len(basis) == n),
        generation_log=tuple(log),
        samples=samples,
        rank_tol=rank_tol,
        closure_tol=closure_tol,
    )


def structure_functions_at(cl: ClosureResult, x):
    """Pointwise structure functions of the closed basis at ``x``.

    Returns ``(U, Vmat, residual)`` with ``U[a][b][c]`` the coefficient of
    basis field ``c`` in [Z_a, Z_b] (antisymmetric in a, b) and
    ``Vmat[a][b]`` the coefficient of ``c=b`` in [Z_a, V].  ``residual`` is
    the largest unexplained commutator norm; callers must treat
    ``residual > closure_tol`` as "distribution not closed here".

    ``x`` may contain duals, in which case the returned nested lists carry
    exact derivatives of the structure functions.
    """
    mbar = cl.m_bar
    dual_input = any(isinstance(c, ad.Dual) for c in x)
    basis_vals = [list(f(x)) for f in cl.basis]

    if not dual_input:
        mat = np.array([[ad.real(c) for c in col] for col in basis_vals], dtype=float).T
        sv = np.linalg.svd(mat, compute_uv=False)
        if sv[-1] <= cl.rank_tol * sv[0]:
            raise DegenerateDistributionError(
                f"basis rank-deficient at {tuple(x)}", point=tuple(x))

    residual = 0.0
    U = [[[0.0] * mbar for _ in range(mbar)] for _ in range(mbar)]
    for i in range(mbar):
        for j in range(i + 1, mbar):
            w = list(cl.pair_bracket(i, j)(x))
            coeffs, res = _project_coefficients(basis_vals, w)
            residual = max(residual, res)
            for c in range(mbar):
                U[i][j][c] = coeffs[c]
                U[j][i][c] = -coeffs[c]
    Vmat = []
    for i in range(mbar):
        w = list(cl.drift_bracket(i)(x))
        coeffs, res = _project_coefficients(basis_vals, w)
        residual = max(residual, res)
        Vmat.append(coeffs)

    if not dual_input:
        U = np.array(U, dtype=float)
        Vmat = np.array(Vmat, dtype=float)
    return U, Vmat, residual
