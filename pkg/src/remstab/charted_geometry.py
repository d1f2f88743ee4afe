"""Single-chart differential geometry of a symmetric simple mechanical system.

A ChartedSystem packages the configuration manifold in one chart around the
point of interest: the kinetic-energy metric, the potential, the infinitesimal
generators of the group action, and the group flows.  All derivatives are taken
by central finite differences; first derivatives use ``fd_step`` and nested or
second derivatives use ``fd_step2``, both scaled by (1 + |q|).

The environment variable REMSTAB_FD_STEP overrides fd_step globally (fd_step2
is then set to 10 * fd_step).
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ContractViolation, GeometryError
from .lie_algebra import LieAlgebraSpec

METRIC_SYM_TOL = 1e-12
SLICE_TOL = 1e-8


@dataclass(frozen=True)
class TangentVector:
    """A tangent vector at a chart point: base point and chart components."""

    base: np.ndarray
    coords: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "base", np.asarray(self.base, dtype=float).reshape(-1))
        object.__setattr__(self, "coords", np.asarray(self.coords, dtype=float).reshape(-1))
        if not (np.all(np.isfinite(self.base)) and np.all(np.isfinite(self.coords))):
            raise ContractViolation("non-finite tangent vector data")


@dataclass(frozen=True)
class CotangentVector:
    """A cotangent vector at a chart point, components in the dual chart basis."""

    base: np.ndarray
    coords: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "base", np.asarray(self.base, dtype=float).reshape(-1))
        object.__setattr__(self, "coords", np.asarray(self.coords, dtype=float).reshape(-1))
        if not (np.all(np.isfinite(self.base)) and np.all(np.isfinite(self.coords))):
            raise ContractViolation("non-finite cotangent vector data")


def _coords(v) -> np.ndarray:
    return np.asarray(getattr(v, "coords", v), dtype=float).reshape(-1)


@dataclass
class ChartedSystem:
    """A simple mechanical system in one chart.

    metric(q) -> symmetric positive-definite (n, n) array,
    potential(q) -> float,
    generators(q) -> (n, d) array whose column i is the generator of e_i at q,
    action_flow(lam, t, q) -> chart image of exp(t*lam) . q.

    When ``action_flow`` is None, flows are synthesized by integrating
    dq/ds = generators(q) lam with a fixed-step 4th-order integrator
    (step 1e-3 * t).
    """

    n: int
    lie: LieAlgebraSpec
    metric: Callable
    potential: Callable
    generators: Callable
    action_flow: Callable | None = None
    fd_step: float = 1e-5
    fd_step2: float = 1e-4
    name: str = ""
    parameters: dict = field(default_factory=dict)

    def __post_init__(self):
        env = os.environ.get("REMSTAB_FD_STEP")
        if env:
            self.fd_step = float(env)
            self.fd_step2 = 10.0 * self.fd_step
        if self.fd_step <= 0 or self.fd_step2 <= 0:
            raise ContractViolation("finite-difference steps must be positive")
        if self.action_flow is None:
            self.action_flow = self._integrated_flow

    # -- validated evaluation -------------------------------------------------

    def metric_at(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=float).reshape(-1)
        m = np.asarray(self.metric(q), dtype=float)
        if m.shape != (self.n, self.n):
            raise GeometryError(f"metric must be {(self.n, self.n)}, got {m.shape}")
        scale = 1.0 + abs(m).max()
        if abs(m - m.T).max() > METRIC_SYM_TOL * scale:
            raise GeometryError("metric not symmetric")
        m = 0.5 * (m + m.T)
        try:
            np.linalg.cholesky(m)
        except np.linalg.LinAlgError:
            raise GeometryError(f"metric not positive definite at q={q.tolist()}")
        return m

    def potential_at(self, q) -> float:
        return float(self.potential(np.asarray(q, dtype=float).reshape(-1)))

    def generators_at(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=float).reshape(-1)
        a = np.asarray(self.generators(q), dtype=float)
        a = a.reshape(self.n, self.lie.dim)
        return a

    def flow(self, lam, t: float, q) -> np.ndarray:
        lam = np.asarray(lam, dtype=float).reshape(-1)
        q = np.asarray(q, dtype=float).reshape(-1)
        if lam.shape != (self.lie.dim,):
            raise ContractViolation("flow generator has wrong dimension")
        return np.asarray(self.action_flow(lam, float(t), q), dtype=float).reshape(-1)

    def step1(self, q) -> float:
        return self.fd_step * (1.0 + float(np.linalg.norm(q)))

    def step2(self, q) -> float:
        return self.fd_step2 * (1.0 + float(np.linalg.norm(q)))

    # -- fallback flow ---------------------------------------------------------

    def _integrated_flow(self, lam, t, q):
        lam = np.asarray(lam, dtype=float)
        q = np.asarray(q, dtype=float).copy()
        if t == 0.0 or self.lie.dim == 0:
            return q
        n_steps = 1000
        h = t / n_steps
        rhs = lambda y: self.generators_at(y) @ lam
        for _ in range(n_steps):
            k1 = rhs(q)
            k2 = rhs(q + 0.5 * h * k1)
            k3 = rhs(q + 0.5 * h * k2)
            k4 = rhs(q + h * k3)
            q = q + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        return q


# ---------------------------------------------------------------------------
# Finite-difference kernels
# ---------------------------------------------------------------------------


def central_gradient(f: Callable, x: np.ndarray, h: float) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    g = np.zeros(x.size)
    for i in range(x.size):
        e = np.zeros(x.size)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2.0 * h)
    return g


def central_jacobian(f: Callable, x: np.ndarray, h: float) -> np.ndarray:
    """Jacobian of a vector-valued function, columns by central differences."""
    x = np.asarray(x, dtype=float)
    cols = []
    for i in range(x.size):
        e = np.zeros(x.size)
        e[i] = h
        cols.append((np.asarray(f(x + e)) - np.asarray(f(x - e))) / (2.0 * h))
    return np.column_stack(cols) if cols else np.zeros((0, 0))


def _hessian_single_step(f, x, h):
    x = np.asarray(x, dtype=float)
    m = x.size
    hess = np.zeros((m, m))
    f0 = f(x)
    for i in range(m):
        ei = np.zeros(m)
        ei[i] = h
        hess[i, i] = (f(x + ei) - 2.0 * f0 + f(x - ei)) / (h * h)
        for j in range(i + 1, m):
            ej = np.zeros(m)
            ej[j] = h
            val = (f(x + ei + ej) - f(x + ei - ej) - f(x - ei + ej) + f(x - ei - ej)) / (
                4.0 * h * h
            )
            hess[i, j] = hess[j, i] = val
    return hess


def central_hessian(f: Callable, x: np.ndarray, h: float, richardson: bool = True) -> np.ndarray:
    """Hessian by nested central differences, Richardson-extrapolated (ratio 2)."""
    if not richardson:
        return _hessian_single_step(f, x, h)
    big = _hessian_single_step(f, x, 2.0 * h)
    small = _hessian_single_step(f, x, h)
    return (4.0 * small - big) / 3.0


def directional_derivative(f: Callable, x: np.ndarray, v: np.ndarray, h: float):
    """Derivative of f along the chart line x + t v, scaled for unit direction."""
    v = np.asarray(v, dtype=float)
    nv = float(np.linalg.norm(v))
    if nv == 0.0:
        probe = np.asarray(f(x))
        return np.zeros_like(probe, dtype=float)
    u = v / nv
    hi = h
    fp = np.asarray(f(x + hi * u), dtype=float)
    fm = np.asarray(f(x - hi * u), dtype=float)
    return nv * (fp - fm) / (2.0 * hi)


# ---------------------------------------------------------------------------
# Geometry operations
# ---------------------------------------------------------------------------


def christoffel(sys: ChartedSystem, q) -> np.ndarray:
    """Christoffel symbols Gamma[i, j, k] = Gamma^k_ij of the Levi-Civita connection.

    Built from central differences of the metric; exactly symmetric in (i, j).
    """
    q = np.asarray(q, dtype=float).reshape(-1)
    h = sys.step1(q)
    n = sys.n
    dm = np.zeros((n, n, n))  # dm[l] = d/dq_l M
    for l in range(n):
        e = np.zeros(n)
        e[l] = h
        dm[l] = (sys.metric_at(q + e) - sys.metric_at(q - e)) / (2.0 * h)
    m = sys.metric_at(q)
    try:
        minv = np.linalg.inv(m)
    except np.linalg.LinAlgError:
        raise GeometryError("singular metric")
    # Gamma^k_ij = 1/2 minv[k,l] (d_i M[l,j] + d_j M[l,i] - d_l M[i,j])
    term = np.einsum("ilj->ijl", dm) + np.einsum("jli->ijl", dm) - np.einsum("lij->ijl", dm)
    return 0.5 * np.einsum("kl,ijl->ijk", minv, term)


def covariant_derivative_along(sys: ChartedSystem, curve, fld, t0: float) -> np.ndarray:
    """D/Dt at t0 of a vector field given along a curve.

    ``curve(t)`` is a chart point, ``fld(t)`` a TangentVector (or plain array)
    at curve(t).  Returns w'(t0) + Gamma(c(t0))(c'(t0), w(t0)).
    """
    q0 = np.asarray(curve(t0), dtype=float).reshape(-1)
    h = sys.step1(q0)
    wdot = (_coords(fld(t0 + h)) - _coords(fld(t0 - h))) / (2.0 * h)
    cdot = (np.asarray(curve(t0 + h), dtype=float) - np.asarray(curve(t0 - h))) / (2.0 * h)
    gamma = christoffel(sys, q0)
    w0 = _coords(fld(t0))
    return wdot + np.einsum("ijk,i,j->k", gamma, cdot, w0)


def tangent_action_map(sys: ChartedSystem, lam, t: float, x) -> np.ndarray:
    """Tangent map at x of the action of exp(t lam), by central differences."""
    x = np.asarray(x, dtype=float).reshape(-1)
    h = sys.step1(x)
    cols = []
    for j in range(sys.n):
        e = np.zeros(sys.n)
        e[j] = h
        cols.append((sys.flow(lam, t, x + e) - sys.flow(lam, t, x - e)) / (2.0 * h))
    return np.column_stack(cols)


def linearized_action_generator(sys: ChartedSystem, x, lam) -> np.ndarray:
    """d/dt at 0 of the tangent action map of exp(t lam); lam must fix x."""
    x = np.asarray(x, dtype=float).reshape(-1)
    t = sys.step2(x)
    tp = tangent_action_map(sys, lam, t, x)
    tm = tangent_action_map(sys, lam, -t, x)
    return (tp - tm) / (2.0 * t)


def tube_extension_derivative(sys: ChartedSystem, x, v, xi_r) -> np.ndarray:
    """Covariant derivative along xi_Q of the tube-adapted extension of v at x.

    ``v`` must lie in the linear slice at x (metric-orthogonal to the group
    orbit, checked); ``xi_r`` must have zero component in the configuration
    isotropy algebra (caller's responsibility).  The extension is never
    materialized: along the orbit curve c(t) = exp(t xi_r).x it pushes v
    forward by the group action, so its covariant derivative is computed from
    w(t) = T_x(exp(t xi_r) . ) v.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    v = _coords(v)
    xi_r = np.asarray(xi_r, dtype=float).reshape(-1)
    m = sys.metric_at(x)
    a = sys.generators_at(x)
    if a.size:
        resid = abs(a.T @ m @ v).max()
        scale = 1.0 + abs(m).max() * float(np.linalg.norm(v)) * max(
            1.0, abs(a).max()
        )
        if resid > SLICE_TOL * scale:
            raise ContractViolation(f"v is not in the linear slice (residual {resid:g})")
    if not np.any(xi_r) or not np.any(v):
        return np.zeros(sys.n)

    hq = sys.step1(x)
    vn = float(np.linalg.norm(v))
    u = v / vn

    def pushed(t):
        return vn * (sys.flow(xi_r, t, x + hq * u) - sys.flow(xi_r, t, x - hq * u)) / (2.0 * hq)

    ht = sys.step2(x)
    wdot = (pushed(ht) - pushed(-ht)) / (2.0 * ht)
    gamma = christoffel(sys, x)
    cdot = a @ xi_r
    return wdot + np.einsum("ijk,i,j->k", gamma, cdot, v)
