"""Subspace splittings at a relative equilibrium.

Constructs every subspace the stability test needs: the configuration isotropy
algebra h, the momentum isotropy g_mu, g_px = h ∩ g_mu, the complements p and
t (with p ⊥ t for the restricted locked inertia tensor), the orthogonal
velocity xi_perp, the linear slice S, the rigid directions q^mu, and the test
space Sigma with its rigid and internal parts.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .charted_geometry import ChartedSystem
from .errors import ContractViolation, InconsistencyError
from .lie_algebra import (
    RANK_RTOL,
    SubspaceBasis,
    coadjoint,
    momentum_isotropy_algebra,
    null_space,
    orthonormal_columns,
    principal_angles,
    subspace_intersection,
)
from .mechanics_core import d_locked_inertia, locked_inertia_matrix, require_relative_equilibrium

XI_IN_GMU_RTOL = 1e-8
IP_INVARIANCE_TOL = 1e-9


@dataclass(frozen=True)
class SplittingData:
    """All computed splittings at a relative equilibrium.

    Algebra-space bases live in g, ``slice_basis`` and the sigma bases in the
    chart tangent space.  ``wint_pairs`` and ``sigma_int_basis`` stay None
    until ``build_wint`` fills them.  The matrices of the metric, generators
    and locked inertia at x are cached for downstream use.
    """

    x: np.ndarray
    xi: np.ndarray
    mu: np.ndarray
    h_basis: SubspaceBasis
    gmu_basis: SubspaceBasis
    gpx_basis: SubspaceBasis
    p_basis: SubspaceBasis
    t_basis: SubspaceBasis
    r_basis: SubspaceBasis
    xi_perp: np.ndarray
    slice_basis: SubspaceBasis
    qmu_basis: SubspaceBasis
    sigma_basis: SubspaceBasis
    sigma_rig_basis: SubspaceBasis
    inner_product: np.ndarray
    metric: np.ndarray
    gens: np.ndarray
    locked: np.ndarray
    residual: float
    warnings: tuple = ()
    sigma_int_basis: SubspaceBasis | None = None
    wint_pairs: tuple | None = None

    @property
    def dim_check(self) -> int:
        """dim Q - dim G + dim G_x."""
        return self.gens.shape[0] - self.gens.shape[1] + self.h_basis.n_vectors

    def locked_r(self) -> np.ndarray:
        """Restricted locked inertia matrix on the r basis (positive definite)."""
        rb = self.r_basis.cols
        return rb.T @ self.locked @ rb

    def r_restrict(self, cov: np.ndarray) -> np.ndarray:
        """Dual projection of a g* covector onto r*: pairings with the r basis."""
        return self.r_basis.cols.T @ cov

    def locked_r_solve(self, cov: np.ndarray) -> np.ndarray:
        """II_r^(-1) applied to a g* covector, returned as an element of g."""
        rb = self.r_basis.cols
        if rb.shape[1] == 0:
            return np.zeros(rb.shape[0])
        return rb @ np.linalg.solve(self.locked_r(), rb.T @ cov)

    def to_dict(self) -> dict:
        def rows(b: SubspaceBasis):
            return [list(map(float, v)) for v in b.vectors]

        return {
            "x": list(map(float, self.x)),
            "xi": list(map(float, self.xi)),
            "mu": list(map(float, self.mu)),
            "xi_perp": list(map(float, self.xi_perp)),
            "residual": float(self.residual),
            "dims": {
                "h": self.h_basis.n_vectors,
                "g_mu": self.gmu_basis.n_vectors,
                "g_px": self.gpx_basis.n_vectors,
                "p": self.p_basis.n_vectors,
                "t": self.t_basis.n_vectors,
                "slice": self.slice_basis.n_vectors,
                "q_mu": self.qmu_basis.n_vectors,
                "sigma": self.sigma_basis.n_vectors,
            },
            "bases": {
                "h": rows(self.h_basis),
                "g_mu": rows(self.gmu_basis),
                "p": rows(self.p_basis),
                "t": rows(self.t_basis),
                "q_mu": rows(self.qmu_basis),
                "slice": rows(self.slice_basis),
                "sigma": rows(self.sigma_basis),
            },
            "warnings": list(self.warnings),
        }


def _ip_invariance_warnings(sys: ChartedSystem, ip: np.ndarray, gpx_cols: np.ndarray) -> tuple:
    """Infinitesimal Ad-invariance residual of ip under the g_px generators."""
    alg = sys.lie
    if alg.dim == 0 or gpx_cols.shape[1] == 0 or not alg.structure.any():
        return ()
    worst = 0.0
    for lam in gpx_cols.T:
        ad = np.einsum("i,ijk->kj", lam, alg.structure)
        worst = max(worst, abs(ip @ ad + ad.T @ ip).max())
    if worst > IP_INVARIANCE_TOL * (1.0 + abs(ip).max()):
        return (f"inner product not verifiably invariant (residual {worst:g}); asserted",)
    return ()


def build_splitting(
    sys: ChartedSystem,
    x,
    xi,
    ip: np.ndarray | None = None,
    tol: float = RANK_RTOL,
    complement_seed: int | None = None,
) -> SplittingData:
    """Construct all splittings at the relative equilibrium (x, xi).

    ``ip`` is the symmetric positive-definite inner product on g used to pick
    the complements p (of g_px in g_mu) and the initial complement of h + p;
    t is then made orthogonal to p for the restricted locked inertia tensor.
    ``complement_seed`` perturbs the initial complement choice; verdicts must
    not depend on it.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    xi = np.asarray(xi, dtype=float).reshape(-1)
    d = sys.lie.dim
    if xi.shape != (d,):
        raise ContractViolation(f"velocity must have length {d}")
    if ip is None:
        ip = np.eye(d)
    ip = np.asarray(ip, dtype=float).reshape(d, d)
    if d and (abs(ip - ip.T).max() > 1e-12 * (1 + abs(ip).max()) or np.any(np.linalg.eigvalsh(ip) <= 0)):
        raise ContractViolation("inner product must be symmetric positive definite")

    residual = require_relative_equilibrium(sys, x, xi)
    metric = sys.metric_at(x)
    gens = sys.generators_at(x)
    locked = locked_inertia_matrix(sys, x)
    mu = locked @ xi

    h_cols = null_space(gens, tol) if d else np.zeros((0, 0))
    gmu = momentum_isotropy_algebra(sys.lie, mu, tol)
    gmu_cols = gmu.cols

    # The paper guarantees xi in g_mu at a relative equilibrium; a violation
    # signals an input error, not a branch to handle.
    coad = coadjoint(sys.lie, xi, mu)
    scale = (1.0 + float(np.linalg.norm(mu))) * (1.0 + float(np.linalg.norm(xi)))
    if float(np.linalg.norm(coad)) > XI_IN_GMU_RTOL * scale:
        raise ContractViolation(
            f"velocity is not in the momentum isotropy algebra (|ad*_xi mu| = {np.linalg.norm(coad):g})"
        )

    gpx_cols = subspace_intersection(h_cols, gmu_cols, tol)

    # p: ip-orthogonal complement of g_px inside g_mu.
    if gmu_cols.shape[1]:
        coeff = null_space(gpx_cols.T @ ip @ gmu_cols, tol)
        p_cols = orthonormal_columns(gmu_cols @ coeff, tol)
    else:
        p_cols = np.zeros((d, 0))

    # initial complement of h + p, optionally sheared by the seed.
    hp = np.hstack([h_cols, p_cols])
    t0 = null_space(hp.T @ ip, tol) if d else np.zeros((0, 0))
    if complement_seed is not None and t0.shape[1] and hp.shape[1]:
        rng = np.random.default_rng(complement_seed)
        t0 = t0 + hp @ rng.uniform(-0.5, 0.5, (hp.shape[1], t0.shape[1]))

    # make t orthogonal to p for the restricted locked inertia tensor.
    if p_cols.shape[1] and t0.shape[1]:
        iipp = p_cols.T @ locked @ p_cols
        t_cols = t0 - p_cols @ np.linalg.solve(iipp, p_cols.T @ locked @ t0)
    else:
        t_cols = t0
    t_cols = orthonormal_columns(t_cols, tol)
    r_cols = np.hstack([p_cols, t_cols])

    if h_cols.shape[1] + r_cols.shape[1] != d:
        raise InconsistencyError("h + p + t do not fill the algebra")

    # xi_perp: ip-orthogonal projection of xi onto p.
    if p_cols.shape[1]:
        xi_perp = p_cols @ np.linalg.solve(p_cols.T @ ip @ p_cols, p_cols.T @ ip @ xi)
    else:
        xi_perp = np.zeros(d)

    slice_cols = null_space(gens.T @ metric, tol) if d else np.eye(sys.n)

    # q^mu: elements of t whose coadjoint push of mu annihilates h.
    if t_cols.shape[1] and h_cols.shape[1]:
        pair = np.array(
            [[h_cols[:, j] @ coadjoint(sys.lie, t_cols[:, i], mu) for i in range(t_cols.shape[1])]
             for j in range(h_cols.shape[1])]
        )
        qmu_cols = t_cols @ null_space(pair, tol)
    else:
        qmu_cols = t_cols.copy()

    sigma_rig_cols = gens @ qmu_cols if qmu_cols.shape[1] else np.zeros((sys.n, 0))
    sigma_cols = np.hstack([sigma_rig_cols, slice_cols])
    if sigma_cols.shape[1]:
        s = np.linalg.svd(sigma_cols, compute_uv=False)
        if s.size and s[-1] <= tol * s[0]:
            raise InconsistencyError("sigma = q^mu generators + slice is not a direct sum")

    warnings = _ip_invariance_warnings(sys, ip, gpx_cols)

    basis = lambda ambient, cols: SubspaceBasis.from_cols(ambient, cols, tol)
    return SplittingData(
        x=x,
        xi=xi,
        mu=mu,
        h_basis=basis("algebra", h_cols),
        gmu_basis=basis("algebra", gmu_cols),
        gpx_basis=basis("algebra", gpx_cols),
        p_basis=basis("algebra", p_cols),
        t_basis=basis("algebra", t_cols),
        r_basis=basis("algebra", r_cols),
        xi_perp=xi_perp,
        slice_basis=basis("tangent", slice_cols),
        qmu_basis=basis("algebra", qmu_cols),
        sigma_basis=basis("tangent", sigma_cols),
        sigma_rig_basis=basis("tangent", sigma_rig_cols),
        inner_product=ip,
        metric=metric,
        gens=gens,
        locked=locked,
        residual=residual,
        warnings=warnings,
    )


def build_wint(
    sys: ChartedSystem,
    split: SplittingData,
    tol: float = RANK_RTOL,
    arnold_nondegenerate: bool | None = None,
) -> tuple[tuple, SubspaceBasis]:
    """Solve the internal-variation condition on q^mu + S.

    A pair (lam, b) belongs to w_int when (DII.(lam_Q(x) + b))(xi_perp) pairs
    to zero against every basis vector of t; the h-pairings vanish on their
    own and are asserted by tests, not imposed here.  Returns the pairs and
    the basis of Sigma_int = {lam_Q(x) + b}.

    When the Arnold form is known non-degenerate, a solution space whose
    dimension differs from dim S is a numerical inconsistency.
    """
    qcols = split.qmu_basis.cols
    scols = split.slice_basis.cols
    tcols = split.t_basis.cols
    n_q, n_s, n_t = qcols.shape[1], scols.shape[1], tcols.shape[1]

    dirs = [split.gens @ qcols[:, i] for i in range(n_q)] + [scols[:, j] for j in range(n_s)]
    if n_t and dirs:
        rows = np.zeros((n_t, n_q + n_s))
        noise = 0.0
        for col, v in enumerate(dirs):
            dii = d_locked_inertia(sys, split.x, v).matrix
            rows[:, col] = tcols.T @ (dii @ split.xi_perp)
            noise = max(noise, abs(dii).max() * float(np.linalg.norm(split.xi_perp)))
        # entries carry O(h^2) finite-difference noise; discount it absolutely
        coeff = null_space(rows, tol, atol=1e-7 * noise)
    else:
        coeff = np.eye(n_q + n_s)

    if arnold_nondegenerate and coeff.shape[1] != n_s:
        raise InconsistencyError(
            f"w_int dimension {coeff.shape[1]} != dim S = {n_s} with non-degenerate Arnold form"
        )

    pairs = []
    int_cols = []
    for k in range(coeff.shape[1]):
        lam = qcols @ coeff[:n_q, k]
        b = scols @ coeff[n_q:, k]
        pairs.append((lam, b))
        int_cols.append(split.gens @ lam + b)
    int_mat = np.column_stack(int_cols) if int_cols else np.zeros((sys.n, 0))
    return tuple(pairs), SubspaceBasis.from_cols("tangent", int_mat, tol)


def attach_wint(split: SplittingData, pairs, basis: SubspaceBasis) -> SplittingData:
    return replace(split, wint_pairs=tuple(pairs), sigma_int_basis=basis)


@dataclass(frozen=True)
class SigmaDecompositionReport:
    applicable: bool
    direct_sum: bool
    principal_angles_rig_int: np.ndarray
    dim_sigma: int
    dim_rig: int
    dim_int: int


def check_sigma_decomposition(
    split: SplittingData, arnold_nondegenerate: bool = True, tol: float = RANK_RTOL
) -> SigmaDecompositionReport:
    """Verify Sigma = Sigma_rig + Sigma_int (direct) when the Arnold form allows it."""
    if split.sigma_int_basis is None:
        raise ContractViolation("build_wint must run before check_sigma_decomposition")
    rig = split.sigma_rig_basis.cols
    intc = split.sigma_int_basis.cols
    angles = principal_angles(rig, intc)
    if not arnold_nondegenerate:
        return SigmaDecompositionReport(
            False, False, angles, split.sigma_basis.n_vectors, rig.shape[1], intc.shape[1]
        )
    stacked = np.hstack([rig, intc])
    if stacked.shape[1]:
        s = np.linalg.svd(stacked, compute_uv=False)
        full_rank = bool(s[-1] > tol * s[0])
    else:
        full_rank = True
    ok = full_rank and (rig.shape[1] + intc.shape[1] == split.sigma_basis.n_vectors)
    if not ok:
        raise InconsistencyError(
            "Sigma_rig + Sigma_int is not a direct sum despite a non-degenerate Arnold form"
        )
    return SigmaDecompositionReport(
        True, True, angles, split.sigma_basis.n_vectors, rig.shape[1], intc.shape[1]
    )
