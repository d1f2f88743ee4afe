"""Mechanical objects at a point: locked inertia tensor, momentum map,
augmented potential, and the relative-equilibrium residual."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .charted_geometry import ChartedSystem, central_gradient, central_hessian
from .errors import ResidualError

# A candidate (x, xi) counts as a relative equilibrium when the M^(-1)-norm of
# the chart gradient of V_xi is below RESIDUAL_RTOL * (1 + |V(x)|).
RESIDUAL_RTOL = 1e-7


@dataclass(frozen=True)
class LockedInertia:
    """Locked inertia tensor II(x): II[i, j] = <<(e_i)_Q(x), (e_j)_Q(x)>>."""

    at: np.ndarray
    matrix: np.ndarray


@dataclass(frozen=True)
class LockedInertiaDerivative:
    """Directional derivative (DII . v) of the locked inertia tensor at x."""

    at: np.ndarray
    direction: np.ndarray
    matrix: np.ndarray


def locked_inertia(sys: ChartedSystem, x) -> LockedInertia:
    x = np.asarray(x, dtype=float).reshape(-1)
    a = sys.generators_at(x)
    m = sys.metric_at(x)
    ii = a.T @ m @ a
    return LockedInertia(at=x, matrix=0.5 * (ii + ii.T))


def locked_inertia_matrix(sys: ChartedSystem, x) -> np.ndarray:
    return locked_inertia(sys, x).matrix


def d_locked_inertia(sys: ChartedSystem, x, v) -> LockedInertiaDerivative:
    """Central difference of II along the chart line through x in direction v.

    The locked inertia is a function of the point, so the derivative is
    curve-independent; the step is scaled for a unit direction, keeping the
    result exactly linear in v.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    v = np.asarray(getattr(v, "coords", v), dtype=float).reshape(-1)
    d = sys.lie.dim
    nv = float(np.linalg.norm(v))
    if nv == 0.0:
        return LockedInertiaDerivative(x, v, np.zeros((d, d)))
    u = v / nv
    h = sys.step1(x)
    mat = nv * (locked_inertia_matrix(sys, x + h * u) - locked_inertia_matrix(sys, x - h * u)) / (
        2.0 * h
    )
    return LockedInertiaDerivative(x, v, 0.5 * (mat + mat.T))


def momentum_of_generator(sys: ChartedSystem, x, xi) -> np.ndarray:
    """Momentum mu = II(x) xi of the phase point FL(xi_Q(x))."""
    xi = np.asarray(xi, dtype=float).reshape(-1)
    return locked_inertia_matrix(sys, x) @ xi


def augmented_potential(sys: ChartedSystem, x, xi) -> float:
    """V_xi(x) = V(x) - 1/2 II(x)(xi, xi)."""
    xi = np.asarray(xi, dtype=float).reshape(-1)
    return sys.potential_at(x) - 0.5 * float(xi @ locked_inertia_matrix(sys, x) @ xi)


def chi_one_form(sys: ChartedSystem, x, xi) -> np.ndarray:
    """Chart components of the one-form chi^xi(x) = FL(xi_Q(x))."""
    x = np.asarray(x, dtype=float).reshape(-1)
    xi = np.asarray(xi, dtype=float).reshape(-1)
    return sys.metric_at(x) @ sys.generators_at(x) @ xi


def re_residual(sys: ChartedSystem, x, xi) -> tuple[np.ndarray, float]:
    """Chart gradient of V_xi at x and its M(x)^(-1)-norm.

    Callers threshold the norm; see ``residual_threshold``.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    xi = np.asarray(xi, dtype=float).reshape(-1)
    grad = central_gradient(lambda q: augmented_potential(sys, q, xi), x, sys.step1(x))
    m = sys.metric_at(x)
    norm = float(np.sqrt(max(0.0, grad @ np.linalg.solve(m, grad))))
    return grad, norm


def residual_threshold(sys: ChartedSystem, x) -> float:
    return RESIDUAL_RTOL * (1.0 + abs(sys.potential_at(x)))


def require_relative_equilibrium(sys: ChartedSystem, x, xi) -> float:
    """Return the residual norm, raising ResidualError above the threshold."""
    _, norm = re_residual(sys, x, xi)
    thr = residual_threshold(sys, x)
    if norm > thr:
        raise ResidualError(
            f"(x, xi) is not a relative equilibrium: residual {norm:g} > threshold {thr:g}"
        )
    return norm


def augmented_hessian(sys: ChartedSystem, x, xi) -> np.ndarray:
    """Chart Hessian of V_xi at x (Richardson-extrapolated central differences).

    Only chart-invariant at a critical point of V_xi; callers gate on the
    residual first.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    xi = np.asarray(xi, dtype=float).reshape(-1)
    hess = central_hessian(lambda q: augmented_potential(sys, q, xi), x, sys.step2(x))
    return 0.5 * (hess + hess.T)


def refine_relative_equilibrium(
    sys: ChartedSystem, x0, xi, max_iter: int = 50
) -> tuple[np.ndarray, float]:
    """Damped Newton iteration on the V_xi gradient from a nearby start.

    Convenience only; the analysis assumes the relative equilibrium is given.
    Returns the refined point and its residual norm.
    """
    x = np.asarray(x0, dtype=float).reshape(-1).copy()
    _, norm = re_residual(sys, x, xi)
    for _ in range(max_iter):
        if norm <= residual_threshold(sys, x):
            break
        grad, _ = re_residual(sys, x, xi)
        hess = augmented_hessian(sys, x, xi)
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            step = grad
        alpha = 1.0
        for _ in range(30):
            x_try = x - alpha * step
            try:
                _, norm_try = re_residual(sys, x_try, xi)
            except Exception:
                norm_try = np.inf
            if norm_try < norm:
                x, norm = x_try, norm_try
                break
            alpha *= 0.5
        else:
            break
    return x, norm
