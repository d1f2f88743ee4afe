"""Ready-made charted systems with known relative equilibria and analytic answers.

Catalog ids double as the CLI model vocabulary.  Every entry records whether
its residual symmetry group is abelian and whether G_mu compactness holds;
both are declarations, not computations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .charted_geometry import ChartedSystem
from .errors import ChartDomainError, ContractViolation
from .lie_algebra import LieAlgebraSpec

LOG_ANGLE_GUARD = 0.5 * math.pi


# ---------------------------------------------------------------------------
# Rotation-vector chart utilities (exact, no finite differences)
# ---------------------------------------------------------------------------


def hat(u: np.ndarray) -> np.ndarray:
    u = np.asarray(u, dtype=float).reshape(3)
    return np.array([[0.0, -u[2], u[1]], [u[2], 0.0, -u[0]], [-u[1], u[0], 0.0]])


def rotation_exp(v: np.ndarray) -> np.ndarray:
    """Rodrigues formula: the rotation with rotation vector v."""
    v = np.asarray(v, dtype=float).reshape(3)
    th = float(np.linalg.norm(v))
    k = hat(v)
    if th < 1e-8:
        a = 1.0 - th * th / 6.0
        b = 0.5 - th * th / 24.0
    else:
        a = math.sin(th) / th
        b = (1.0 - math.cos(th)) / (th * th)
    return np.eye(3) + a * k + b * (k @ k)


def rotation_log(r: np.ndarray) -> np.ndarray:
    """Rotation vector of a rotation matrix, guarded to angle < pi/2."""
    r = np.asarray(r, dtype=float)
    w = np.array([r[2, 1] - r[1, 2], r[0, 2] - r[2, 0], r[1, 0] - r[0, 1]]) * 0.5
    s = float(np.linalg.norm(w))
    c = 0.5 * (np.trace(r) - 1.0)
    th = math.atan2(s, c)
    if th >= LOG_ANGLE_GUARD:
        raise ChartDomainError(f"rotation angle {th:g} outside chart guard {LOG_ANGLE_GUARD:g}")
    if th < 1e-8:
        return w * (1.0 + th * th / 6.0)
    return w * (th / s)


def left_jacobian(v: np.ndarray) -> np.ndarray:
    """d(exp)/dv in right trivialization: spatial velocity = J_l(v) vdot."""
    v = np.asarray(v, dtype=float).reshape(3)
    th = float(np.linalg.norm(v))
    k = hat(v)
    if th < 1e-8:
        return np.eye(3) + 0.5 * k + (k @ k) / 6.0
    a = (1.0 - math.cos(th)) / (th * th)
    b = (th - math.sin(th)) / (th**3)
    return np.eye(3) + a * k + b * (k @ k)


def left_jacobian_inv(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=float).reshape(3)
    th = float(np.linalg.norm(v))
    k = hat(v)
    if th < 1e-8:
        return np.eye(3) - 0.5 * k + (k @ k) / 12.0
    coef = 1.0 / (th * th) - (1.0 + math.cos(th)) / (2.0 * th * math.sin(th))
    return np.eye(3) - 0.5 * k + coef * (k @ k)


# ---------------------------------------------------------------------------
# Catalog data types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class KnownRelativeEquilibrium:
    x: np.ndarray
    xi: np.ndarray
    description: str = ""


@dataclass(frozen=True)
class CatalogEntry:
    id: str
    system: ChartedSystem
    known_re: tuple
    residual_group_abelian: bool
    gmu_compact: bool
    analytic: dict | None = None
    velocity_presets: dict = field(default_factory=dict)
    builder: Callable | None = None
    exact: dict | None = None  # optional closed-form II / DII for cross-checks


# ---------------------------------------------------------------------------
# Sleeping Lagrange top
# ---------------------------------------------------------------------------


def lagrange_top(i: float, i3: float, m: float, g: float, l: float) -> CatalogEntry:
    """Axisymmetric heavy top near the upright (sleeping) configuration.

    Configuration space is the rotation group in a rotation-vector chart around
    the identity; the symmetry group is the 2-torus acting by rotations about
    the vertical on the left and the right.  The sleeping relative equilibrium
    sits at the identity with velocity (l, r); only zeta = l - r matters.
    """
    if min(i, i3, m, g, l) <= 0:
        raise ContractViolation("all Lagrange-top parameters must be positive")
    if i3 > 2.0 * i:
        import warnings

        warnings.warn("i3 > 2i violates the rigid-body triangle inequality", stacklevel=2)
    e_body = np.diag([i, i, i3])
    e3 = np.array([0.0, 0.0, 1.0])
    mgl = m * g * l

    def metric(q):
        lam = rotation_exp(q)
        jl = left_jacobian(q)
        return jl.T @ (lam @ e_body @ lam.T) @ jl

    def potential(q):
        return mgl * float(e3 @ rotation_exp(q) @ e3)

    def generators(q):
        lam = rotation_exp(q)
        jinv = left_jacobian_inv(q)
        return np.column_stack([jinv @ e3, -jinv @ (lam @ e3)])

    def action_flow(gen, t, q):
        lam = rotation_exp(q)
        new = rotation_exp(t * gen[0] * e3) @ lam @ rotation_exp(-t * gen[1] * e3)
        return rotation_log(new)

    system = ChartedSystem(
        n=3,
        lie=LieAlgebraSpec.abelian(2, "t^2"),
        metric=metric,
        potential=potential,
        generators=generators,
        action_flow=action_flow,
        name="lagrange_top",
        parameters={"i": i, "i3": i3, "m": m, "g": g, "l": l},
    )

    def threshold_zeta_sq(k: float) -> float | None:
        den = k * i3 + i3 - i
        if den <= 0:
            return None
        return (1.0 + k) ** 2 * mgl / den

    analytic = {
        "threshold_zeta_sq": threshold_zeta_sq,
        "optimal_k": (2.0 * i - i3) / i3,
        "optimal_bound_zeta_sq": 4.0 * mgl * i / (i3 * i3),
    }

    def zeta_preset(zeta: float) -> np.ndarray:
        return np.array([float(zeta), 0.0])

    known = (
        KnownRelativeEquilibrium(np.zeros(3), np.array([2.0, 0.0]), "sleeping top, zeta=2"),
        KnownRelativeEquilibrium(np.zeros(3), np.array([1.5, 0.5]), "sleeping top, zeta=1"),
    )
    return CatalogEntry(
        id="lagrange_top",
        system=system,
        known_re=known,
        residual_group_abelian=True,
        gmu_compact=True,
        analytic=analytic,
        velocity_presets={"zeta": zeta_preset},
        builder=lagrange_top,
    )


# ---------------------------------------------------------------------------
# Spherical pendulum
# ---------------------------------------------------------------------------


def spherical_pendulum(m: float, g: float, l: float, chart: str = "polar") -> CatalogEntry:
    """Spherical pendulum under gravity with the circle of vertical rotations.

    chart="polar": spherical angles (theta, phi) away from the poles; known
    relative equilibria are the conical configurations.  chart="hanging":
    normal coordinates centered at the hanging point, where the action has a
    fixed point; the known relative equilibrium is the hanging position.
    """
    if min(m, g, l) <= 0:
        raise ContractViolation("all spherical-pendulum parameters must be positive")
    ml2 = m * l * l
    mgl = m * g * l
    lie = LieAlgebraSpec.abelian(1, "s^1")

    if chart == "polar":

        def domain(q):
            th = q[0]
            if not (1e-6 < th < math.pi - 1e-6):
                raise ChartDomainError(f"polar angle {th:g} outside the chart (pole excluded)")
            return th

        def metric(q):
            th = domain(q)
            return np.diag([ml2, ml2 * math.sin(th) ** 2])

        def potential(q):
            return -mgl * math.cos(domain(q))

        def generators(q):
            domain(q)
            return np.array([[0.0], [1.0]])

        def action_flow(gen, t, q):
            domain(q)
            return np.array([q[0], q[1] + gen[0] * t])

        system = ChartedSystem(
            n=2,
            lie=lie,
            metric=metric,
            potential=potential,
            generators=generators,
            action_flow=action_flow,
            name="spherical_pendulum",
            parameters={"m": m, "g": g, "l": l, "chart": chart},
        )
        known = tuple(
            KnownRelativeEquilibrium(
                np.array([th0, 0.0]),
                np.array([math.sqrt(g / (l * math.cos(th0)))]),
                f"conical at theta0={th0:.6f}",
            )
            for th0 in (math.pi / 6, math.pi / 4, math.pi / 3)
        )

        def conical(theta0: float) -> KnownRelativeEquilibrium:
            return KnownRelativeEquilibrium(
                np.array([float(theta0), 0.0]),
                np.array([math.sqrt(g / (l * math.cos(theta0)))]),
                f"conical at theta0={theta0:.6f}",
            )

        analytic = {"conical_re": conical}
        presets = {"omega": lambda w: np.array([float(w)])}
    elif chart == "hanging":

        def metric(q):
            rho = float(np.linalg.norm(q))
            if rho > math.pi - 1e-6:
                raise ChartDomainError("point outside the hanging chart")
            if rho < 1e-8:
                tang = 1.0 - rho * rho / 3.0
            else:
                tang = (math.sin(rho) / rho) ** 2
            if rho == 0.0:
                return ml2 * np.eye(2)
            uhat = np.asarray(q, dtype=float) / rho
            prad = np.outer(uhat, uhat)
            return ml2 * (prad + tang * (np.eye(2) - prad))

        def potential(q):
            return -mgl * math.cos(float(np.linalg.norm(q)))

        def generators(q):
            return np.array([[-q[1]], [q[0]]])

        def action_flow(gen, t, q):
            ang = gen[0] * t
            c, s = math.cos(ang), math.sin(ang)
            return np.array([c * q[0] - s * q[1], s * q[0] + c * q[1]])

        system = ChartedSystem(
            n=2,
            lie=lie,
            metric=metric,
            potential=potential,
            generators=generators,
            action_flow=action_flow,
            name="spherical_pendulum_hanging",
            parameters={"m": m, "g": g, "l": l, "chart": chart},
        )
        known = (
            KnownRelativeEquilibrium(np.zeros(2), np.zeros(1), "hanging point, no spin"),
            KnownRelativeEquilibrium(np.zeros(2), np.array([0.7]), "hanging point, spun fiber"),
        )
        analytic = None
        presets = {"omega": lambda w: np.array([float(w)])}
    else:
        raise ContractViolation(f"unknown chart {chart!r} (use 'polar' or 'hanging')")

    return CatalogEntry(
        id="spherical_pendulum",
        system=system,
        known_re=known,
        residual_group_abelian=True,
        gmu_compact=True,
        analytic=analytic,
        velocity_presets=presets,
        builder=spherical_pendulum,
    )


# ---------------------------------------------------------------------------
# Synthetic product models
# ---------------------------------------------------------------------------


def synthetic_product(
    n_planes: int = 2,
    n_generators: int | None = None,
    weights=None,
    masses=None,
    quad_coeffs=None,
    quart_coeffs=None,
    n_inert: int = 0,
    inert_quad=None,
    seed: int = 0,
) -> CatalogEntry:
    """Flat space with torus rotations in coordinate planes and polynomial potential.

    Generator i rotates plane j at integer rate weights[i][j].  The locked
    inertia tensor and its derivative have closed forms, attached under
    ``entry.exact`` for cross-checking the finite-difference engine.  Inert
    coordinates carry a quadratic potential and no group action.
    """
    rng = np.random.default_rng(seed)
    if n_generators is None:
        n_generators = n_planes
    if weights is None:
        w = np.zeros((n_generators, n_planes))
        for i in range(min(n_generators, n_planes)):
            w[i, i] = 1.0
    else:
        w = np.asarray(weights, dtype=float).reshape(n_generators, n_planes)
    masses = (
        np.ones(n_planes)
        if masses is None
        else np.asarray(masses, dtype=float).reshape(n_planes)
    )
    quad = (
        rng.uniform(0.5, 1.5, n_planes)
        if quad_coeffs is None
        else np.asarray(quad_coeffs, dtype=float).reshape(n_planes)
    )
    quart = (
        rng.uniform(0.1, 0.5, n_planes)
        if quart_coeffs is None
        else np.asarray(quart_coeffs, dtype=float).reshape(n_planes)
    )
    iq = (
        np.ones(n_inert)
        if inert_quad is None
        else np.asarray(inert_quad, dtype=float).reshape(n_inert)
    )
    n = 2 * n_planes + n_inert
    diag = np.concatenate([np.repeat(masses, 2), np.ones(n_inert)])
    metric_mat = np.diag(diag) if n else np.zeros((0, 0))

    def plane_radii_sq(q):
        return np.array([q[2 * j] ** 2 + q[2 * j + 1] ** 2 for j in range(n_planes)])

    def metric(q):
        return metric_mat

    def potential(q):
        r2 = plane_radii_sq(q)
        val = float(0.5 * quad @ r2 + 0.25 * quart @ (r2 * r2))
        if n_inert:
            u = np.asarray(q[2 * n_planes :])
            val += float(0.5 * iq @ (u * u))
        return val

    def generators(q):
        a = np.zeros((n, n_generators))
        for i in range(n_generators):
            for j in range(n_planes):
                a[2 * j, i] += -w[i, j] * q[2 * j + 1]
                a[2 * j + 1, i] += w[i, j] * q[2 * j]
        return a

    def action_flow(gen, t, q):
        out = np.asarray(q, dtype=float).copy()
        for j in range(n_planes):
            ang = t * float(gen @ w[:, j])
            c, s = math.cos(ang), math.sin(ang)
            xj, yj = out[2 * j], out[2 * j + 1]
            out[2 * j] = c * xj - s * yj
            out[2 * j + 1] = s * xj + c * yj
        return out

    def exact_ii(q):
        r2 = plane_radii_sq(q)
        return (w * (masses * r2)) @ w.T

    def exact_dii(q, v):
        q = np.asarray(q, dtype=float)
        v = np.asarray(v, dtype=float)
        dr2 = np.array(
            [2.0 * (q[2 * j] * v[2 * j] + q[2 * j + 1] * v[2 * j + 1]) for j in range(n_planes)]
        )
        return (w * (masses * dr2)) @ w.T

    system = ChartedSystem(
        n=n,
        lie=LieAlgebraSpec.abelian(n_generators, f"t^{n_generators}"),
        metric=metric,
        potential=potential,
        generators=generators,
        action_flow=action_flow,
        name="synthetic_product",
        parameters={
            "n_planes": n_planes,
            "n_generators": n_generators,
            "n_inert": n_inert,
            "seed": seed,
        },
    )

    known = [
        KnownRelativeEquilibrium(np.zeros(n), np.zeros(n_generators), "origin, zero velocity")
    ]
    if n_planes >= 1 and n_generators >= 1 and w[0, 0] != 0.0:
        # circular relative equilibrium in plane 1: omega^2 m = a + b R^2
        radius = 0.7
        omega = math.sqrt((quad[0] + quart[0] * radius * radius) / masses[0]) / w[0, 0]
        x = np.zeros(n)
        x[0] = radius
        xi = np.zeros(n_generators)
        xi[0] = omega
        known.append(KnownRelativeEquilibrium(x, xi, f"circular orbit, R={radius}"))

    return CatalogEntry(
        id="synthetic_product",
        system=system,
        known_re=tuple(known),
        residual_group_abelian=True,
        gmu_compact=True,
        analytic=None,
        velocity_presets={"omega": lambda v: np.concatenate([[float(v)], np.zeros(n_generators - 1)]) if n_generators else np.zeros(0)},
        builder=synthetic_product,
        exact={"ii": exact_ii, "dii": exact_dii},
    )


CATALOG: dict[str, Callable[..., CatalogEntry]] = {
    "lagrange_top": lagrange_top,
    "spherical_pendulum": spherical_pendulum,
    "synthetic_product": synthetic_product,
}
