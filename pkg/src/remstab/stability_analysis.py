"""Stability verdict engine.

Implements the reduced test on configuration space (correction term plus the
restricted Hessian of the augmented potential), the Arnold form and the
block-diagonal forms of the symplectic matrix and Hessian, the abelian
isotypic sub-blocking, and an independent brute-force oracle that tests
definiteness of the augmented Hamiltonian on a symplectic normal space in
chart phase-space coordinates.

All tests are sufficient conditions: the only verdicts are GMU_STABLE,
INCONCLUSIVE and NOT_APPLICABLE, never "unstable".
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .charted_geometry import (
    ChartedSystem,
    central_gradient,
    central_hessian,
    central_jacobian,
    christoffel,
    linearized_action_generator,
    tube_extension_derivative,
)
from .errors import (
    ContractViolation,
    InconsistencyError,
    NotApplicableError,
    ResidualError,
)
from .lie_algebra import RANK_RTOL, SubspaceBasis, bracket, coadjoint, null_space
from .mechanics_core import (
    augmented_hessian,
    d_locked_inertia,
    residual_threshold,
)
from .splittings import SplittingData, attach_wint, build_splitting, build_wint

# Eigenvalues within DEFINITENESS_RTOL * max|eig| (floored) count as zero and
# force INCONCLUSIVE: a sufficient condition must not over-claim near degeneracy.
DEFINITENESS_RTOL = 1e-8
DEFINITENESS_FLOOR = 1e-12
ARNOLD_ASYMMETRY_TOL = 1e-8
OFFBLOCK_RTOL = 1e-6


class Verdict(str, Enum):
    GMU_STABLE = "GMU_STABLE"
    INCONCLUSIVE = "INCONCLUSIVE"
    NOT_APPLICABLE = "NOT_APPLICABLE"


class Route(str, Enum):
    REM_POSITIVE_BRANCH = "REM_POSITIVE_BRANCH"
    REM_DEFINITE_BRANCH = "REM_DEFINITE_BRANCH"
    BLOCK_COROLLARY = "BLOCK_COROLLARY"
    ORACLE_ONLY = "ORACLE_ONLY"


@dataclass(frozen=True)
class QuadraticFormOnBasis:
    """A symmetric bilinear form given by its matrix on an explicit basis."""

    basis: SubspaceBasis
    matrix: np.ndarray
    label: str = ""
    asymmetry: float = 0.0
    eigenvalues: np.ndarray = field(default=None)

    def __post_init__(self):
        m = np.atleast_2d(np.asarray(self.matrix, dtype=float))
        if m.size == 0:
            m = m.reshape(0, 0)
        k = self.basis.n_vectors
        if m.shape != (k, k):
            raise ContractViolation(f"form matrix {m.shape} does not match basis of {k} vectors")
        scale = abs(m).max() if m.size else 0.0
        asym = abs(m - m.T).max() if m.size else 0.0
        object.__setattr__(self, "asymmetry", float(asym / scale) if scale > 0 else 0.0)
        m = 0.5 * (m + m.T)
        object.__setattr__(self, "matrix", m)
        eig = np.linalg.eigvalsh(m) if m.size else np.zeros(0)
        object.__setattr__(self, "eigenvalues", eig)

    @property
    def dim(self) -> int:
        return self.basis.n_vectors


def definiteness_band(eigenvalues: np.ndarray, definiteness_tol: float | None = None) -> float:
    if definiteness_tol is not None:
        return float(definiteness_tol)
    maxabs = float(abs(eigenvalues).max()) if eigenvalues.size else 0.0
    return DEFINITENESS_RTOL * max(maxabs, DEFINITENESS_FLOOR)


def classify_definiteness(eigenvalues: np.ndarray, definiteness_tol: float | None = None) -> str:
    """One of 'empty', 'positive', 'negative', 'degenerate', 'indefinite'."""
    eigenvalues = np.asarray(eigenvalues, dtype=float)
    if eigenvalues.size == 0:
        return "empty"
    band = definiteness_band(eigenvalues, definiteness_tol)
    if np.any(np.abs(eigenvalues) <= band):
        return "degenerate"
    if np.all(eigenvalues > band):
        return "positive"
    if np.all(eigenvalues < -band):
        return "negative"
    return "indefinite"


def signature_of(eigenvalues: np.ndarray, definiteness_tol: float | None = None) -> tuple:
    eigenvalues = np.asarray(eigenvalues, dtype=float)
    band = definiteness_band(eigenvalues, definiteness_tol)
    pos = int((eigenvalues > band).sum())
    neg = int((eigenvalues < -band).sum())
    return pos, neg, eigenvalues.size - pos - neg


@dataclass(frozen=True)
class StabilityReport:
    """Verdict plus everything needed to audit it."""

    verdict: Verdict
    route: Route
    dim_check: int
    block_spectra: dict
    residuals: dict
    assumptions: list
    parameters: dict

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict.value,
            "route": self.route.value,
            "dim_check": int(self.dim_check),
            "block_spectra": {k: [float(x) for x in v] for k, v in self.block_spectra.items()},
            "residuals": {k: float(v) for k, v in self.residuals.items()},
            "assumptions": list(self.assumptions),
            "parameters": dict(self.parameters),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "StabilityReport":
        return cls(
            verdict=Verdict(d["verdict"]),
            route=Route(d["route"]),
            dim_check=int(d["dim_check"]),
            block_spectra={k: [float(x) for x in v] for k, v in d["block_spectra"].items()},
            residuals={k: float(v) for k, v in d["residuals"].items()},
            assumptions=list(d["assumptions"]),
            parameters=dict(d["parameters"]),
        )


def _standard_assumptions(split: SplittingData, gmu_compact: bool | None) -> list:
    out = ["splittings constructed at the Lie algebra level (connected components only)"]
    if gmu_compact is True:
        out.append("G_mu compactness asserted by model")
    elif gmu_compact is False:
        out.append("G_mu not declared compact: verdict certifies leafwise stability unless mu is split")
    else:
        out.append("G_mu compactness not declared; assumed (or mu split)")
    out.extend(split.warnings)
    return out


# ---------------------------------------------------------------------------
# Configuration-space forms
# ---------------------------------------------------------------------------


def correction_term(
    sys: ChartedSystem, split: SplittingData, basis: SubspaceBasis | None = None
) -> QuadraticFormOnBasis:
    """Positive semi-definite correction to the augmented-potential Hessian.

    corr(v1, v2) pairs the r*-projection of (DII.v1)(xi_perp) with the inverse
    restricted locked inertia applied to the same object for v2.
    """
    basis = basis if basis is not None else split.sigma_basis
    cols = basis.cols
    k = cols.shape[1]
    rb = split.r_basis.cols
    if k == 0 or rb.shape[1] == 0 or not np.any(split.xi_perp):
        return QuadraticFormOnBasis(basis, np.zeros((k, k)), "correction")
    proj = np.zeros((rb.shape[1], k))
    for a in range(k):
        dii = d_locked_inertia(sys, split.x, cols[:, a]).matrix
        proj[:, a] = rb.T @ (dii @ split.xi_perp)
    mat = proj.T @ np.linalg.solve(split.locked_r(), proj)
    return QuadraticFormOnBasis(basis, mat, "correction")


def restricted_augmented_hessian(
    sys: ChartedSystem, split: SplittingData, basis: SubspaceBasis | None = None
) -> QuadraticFormOnBasis:
    """(d^2 V_{xi_perp} + corr) restricted to Sigma (or to the given basis)."""
    if split.residual > residual_threshold(sys, split.x):
        raise ResidualError("refusing to take a Hessian away from a critical point")
    basis = basis if basis is not None else split.sigma_basis
    cols = basis.cols
    hess = augmented_hessian(sys, split.x, split.xi_perp)
    mat = cols.T @ hess @ cols + correction_term(sys, split, basis).matrix
    return QuadraticFormOnBasis(basis, mat, "sigma_hessian")


def rem_test(
    sys: ChartedSystem,
    split: SplittingData,
    definiteness_tol: float | None = None,
    gmu_compact: bool | None = None,
    parameters: dict | None = None,
) -> StabilityReport:
    """Main sufficient test on configuration space.

    With dim Q - dim G + dim G_x > 0 the restricted form must be positive
    definite; when the group orbit fills the configuration space (= 0) either
    sign of definiteness suffices.
    """
    form = restricted_augmented_hessian(sys, split)
    dim_check = split.dim_check
    if dim_check < 0:
        raise InconsistencyError("dim Q - dim G + dim G_x < 0 should be impossible")
    cls = classify_definiteness(form.eigenvalues, definiteness_tol)
    if dim_check > 0:
        route = Route.REM_POSITIVE_BRANCH
        stable = cls == "positive"
    else:
        route = Route.REM_DEFINITE_BRANCH
        stable = cls in ("positive", "negative", "empty")
    return StabilityReport(
        verdict=Verdict.GMU_STABLE if stable else Verdict.INCONCLUSIVE,
        route=route,
        dim_check=dim_check,
        block_spectra={"sigma_hessian": form.eigenvalues.tolist()},
        residuals={"re_residual": split.residual},
        assumptions=_standard_assumptions(split, gmu_compact),
        parameters=parameters or {},
    )


# ---------------------------------------------------------------------------
# Arnold form and block forms
# ---------------------------------------------------------------------------


def _component_in_r(split: SplittingData, w: np.ndarray) -> np.ndarray:
    """Component of w in r for the direct sum g = h + r."""
    hb, rb = split.h_basis.cols, split.r_basis.cols
    if rb.shape[1] == 0:
        return np.zeros_like(w)
    full = np.hstack([hb, rb])
    coeff = np.linalg.solve(full, w)
    return rb @ coeff[hb.shape[1] :]


def arnold_form(sys: ChartedSystem, split: SplittingData) -> QuadraticFormOnBasis:
    """Singular Arnold form on q^mu.

    Ar(l1, l2) = <ad*_{l1} mu, II_r^{-1}(ad*_{l2} mu) + P_r[ad_{l2}(II_r^{-1} mu)]>.
    Symmetry is checked, not imposed; the stored matrix is the symmetrization
    and ``asymmetry`` records the relative residual.
    """
    q = split.qmu_basis.cols
    m1 = q.shape[1]
    if m1 == 0:
        return QuadraticFormOnBasis(split.qmu_basis, np.zeros((0, 0)), "arnold")
    mu = split.mu
    xi_r = split.locked_r_solve(mu)  # equals xi_perp at a relative equilibrium
    coads = [coadjoint(sys.lie, q[:, j], mu) for j in range(m1)]
    lam_vecs = [
        split.locked_r_solve(coads[j]) + _component_in_r(split, bracket(sys.lie, q[:, j], xi_r))
        for j in range(m1)
    ]
    mat = np.array([[coads[i] @ lam_vecs[j] for j in range(m1)] for i in range(m1)])
    return QuadraticFormOnBasis(split.qmu_basis, mat, "arnold")


def arnold_nondegenerate(form: QuadraticFormOnBasis, definiteness_tol: float | None = None) -> bool:
    if form.dim == 0:
        return True
    band = definiteness_band(form.eigenvalues, definiteness_tol)
    return bool(np.all(np.abs(form.eigenvalues) > band))


def c_operator(sys: ChartedSystem, split: SplittingData, v) -> np.ndarray:
    """Matrix of C(v): r -> S*; entry [j, i] = <<grad along r_i of v's extension, s_j>>."""
    v = np.asarray(getattr(v, "coords", v), dtype=float).reshape(-1)
    rb = split.r_basis.cols
    sc = split.slice_basis.cols
    out = np.zeros((sc.shape[1], rb.shape[1]))
    if not np.any(v):
        return out
    for i in range(rb.shape[1]):
        u = tube_extension_derivative(sys, split.x, v, rb[:, i])
        out[:, i] = sc.T @ split.metric @ u
    return out


@dataclass(frozen=True)
class BlockOmega:
    """Symplectic matrix on q^mu + Sigma_int + S* in block form."""

    xi_block: np.ndarray       # q^mu x q^mu, antisymmetric
    psi_block: np.ndarray      # q^mu x Sigma_int
    s_mu_block: np.ndarray     # Sigma_int x Sigma_int, antisymmetric
    coupling: np.ndarray       # identity pairing Sigma_int x S*
    matrix: np.ndarray         # assembled antisymmetric matrix
    antisymmetry: float
    degeneracy: float          # sigma_min / sigma_max of the assembled matrix

    @property
    def dims(self) -> tuple:
        m1 = self.xi_block.shape[0]
        m2 = self.s_mu_block.shape[0]
        return m1, m2, m2


@dataclass(frozen=True)
class BlockHessian:
    """Block-diagonal Hessian on q^mu + Sigma_int + S* plus its verification.

    ``kappa_matrix`` is the same form computed independently: the full
    finite-difference phase-space Hessian of the augmented Hamiltonian pulled
    back through the explicit parameterization of the symplectic normal space.
    Off-diagonal blocks of it must vanish; ``offblock_residual`` is their
    magnitude relative to the diagonal and ``diagnostics`` lists violations.
    """

    arnold: QuadraticFormOnBasis
    sigma_int: QuadraticFormOnBasis
    slice_star: np.ndarray
    matrix: np.ndarray
    kappa_matrix: np.ndarray
    offblock_residual: float
    diag_residual: float
    omega_vs_canonical: float
    kernel_residual: float
    diagnostics: tuple


def _phase_point(sys: ChartedSystem, split: SplittingData) -> np.ndarray:
    p0 = split.metric @ split.gens @ split.xi
    return np.concatenate([split.x, p0])


def _phase_hamiltonian(sys: ChartedSystem, xi_perp: np.ndarray):
    n = sys.n

    def ham(z):
        q, p = z[:n], z[n:]
        m = sys.metric_at(q)
        val = 0.5 * float(p @ np.linalg.solve(m, p)) + sys.potential_at(q)
        if xi_perp.size:
            val -= float(xi_perp @ (sys.generators_at(q).T @ p))
        return val

    return ham


def _momentum_map(sys: ChartedSystem):
    n = sys.n

    def jmap(z):
        q, p = z[:n], z[n:]
        return sys.generators_at(q).T @ p

    return jmap


class _KappaContext:
    """Cached data for mapping (lam, a, gamma) to chart phase-space vectors."""

    def __init__(self, sys: ChartedSystem, split: SplittingData):
        self.sys = sys
        self.split = split
        self.x = split.x
        self.m = split.metric
        self.a_mat = split.gens
        self.p0 = self.m @ self.a_mat @ split.xi
        self.gamma_symbols = christoffel(sys, split.x)
        self.dii_xi_q = d_locked_inertia(sys, split.x, self.a_mat @ split.xi_perp).matrix
        sc = split.slice_basis.cols
        self.scols = sc
        self.dii_slice = [
            d_locked_inertia(sys, split.x, sc[:, j]).matrix for j in range(sc.shape[1])
        ]
        rb = split.r_basis.cols
        orbit = (self.a_mat @ rb).T if rb.shape[1] else np.zeros((0, sys.n))
        self.alpha_system = np.vstack([orbit, (self.m @ sc).T])
        # rows: orbit annihilation then metric pairings with the slice basis

    def dii_of_slice_vector(self, a: np.ndarray) -> np.ndarray:
        coeff = np.linalg.lstsq(self.scols, a, rcond=None)[0] if self.scols.size else np.zeros(0)
        out = np.zeros_like(self.dii_xi_q)
        for c, mat in zip(coeff, self.dii_slice):
            out = out + c * mat
        return out

    def alpha_chart(self, slice_values: np.ndarray) -> np.ndarray:
        rhs = np.concatenate([np.zeros(self.alpha_system.shape[0] - slice_values.size), slice_values])
        return np.linalg.solve(self.alpha_system, rhs)

    def phase_vector(self, lam: np.ndarray, a: np.ndarray, gamma_values: np.ndarray) -> np.ndarray:
        """Phase-space tangent at the equilibrium for the (lam, a, gamma) slot.

        ``gamma_values`` are the pairings of the S* component with the slice
        basis.  The vertical part combines the connection map value with the
        Christoffel correction to coordinate momentum increments.
        """
        split, sys = self.split, self.sys
        dq = self.a_mat @ lam + a
        nu_raw = 0.5 * (
            self.dii_xi_q @ lam
            + coadjoint(sys.lie, lam, split.mu)
            - self.dii_of_slice_vector(a) @ split.xi_perp
        )
        w = split.locked_r_solve(nu_raw)
        k_from_nu = self.m @ (self.a_mat @ w)
        # slice-covector values: gamma - (1/2)(DII.s_j)(xi_perp, lam) + <<C(a)(xi_perp), s_j>>
        vals = gamma_values.astype(float).copy()
        for j in range(self.scols.shape[1]):
            vals[j] -= 0.5 * float((self.dii_slice[j] @ split.xi_perp) @ lam)
        if np.any(a):
            u = tube_extension_derivative(sys, self.x, a, split.xi_perp)
            vals += self.scols.T @ (self.m @ u)
        alpha = self.alpha_chart(vals) if vals.size or self.alpha_system.size else np.zeros(sys.n)
        k_total = alpha + k_from_nu
        dp = k_total + np.einsum("ijk,j,k->i", self.gamma_symbols, dq, self.p0)
        return np.concatenate([dq, dp])


def _wint_ready(sys: ChartedSystem, split: SplittingData, nondeg: bool) -> SplittingData:
    if split.wint_pairs is None:
        pairs, ib = build_wint(sys, split, arnold_nondegenerate=nondeg)
        split = attach_wint(split, pairs, ib)
    return split


def _assemble_block_omega(sys: ChartedSystem, split: SplittingData) -> BlockOmega:
    """Blocks of the symplectic matrix on q^mu + Sigma_int + S* from their formulas."""
    pairs = split.wint_pairs
    m1 = split.qmu_basis.n_vectors
    m2 = len(pairs)
    qcols = split.qmu_basis.cols
    mu = split.mu
    lam_parts = [p[0] for p in pairs]
    b_parts = [p[1] for p in pairs]

    xi_block = np.array(
        [[-(mu @ bracket(sys.lie, qcols[:, i], qcols[:, j])) for j in range(m1)] for i in range(m1)]
    ).reshape(m1, m1)
    psi_block = np.array(
        [[mu @ bracket(sys.lie, qcols[:, i], lam_parts[j]) for j in range(m2)] for i in range(m1)]
    ).reshape(m1, m2)

    tube = [
        tube_extension_derivative(sys, split.x, b, split.xi_perp) if np.any(b) else np.zeros(sys.n)
        for b in b_parts
    ]
    c_pair = np.array(
        [[float(b_parts[i] @ split.metric @ tube[j]) for j in range(m2)] for i in range(m2)]
    ).reshape(m2, m2)
    s_mu = (
        np.array(
            [[-(mu @ bracket(sys.lie, lam_parts[i], lam_parts[j])) for j in range(m2)] for i in range(m2)]
        ).reshape(m2, m2)
        + c_pair
        - c_pair.T
    )

    eye = np.eye(m2)
    omega_mat = np.block(
        [
            [xi_block, -psi_block, np.zeros((m1, m2))],
            [psi_block.T, s_mu, eye],
            [np.zeros((m2, m1)), -eye, np.zeros((m2, m2))],
        ]
    )
    scale = abs(omega_mat).max() if omega_mat.size else 0.0
    antisym = abs(omega_mat + omega_mat.T).max() / scale if scale > 0 else 0.0
    if omega_mat.size:
        sv = np.linalg.svd(omega_mat, compute_uv=False)
        degeneracy = float(sv[-1] / sv[0]) if sv[0] > 0 else 0.0
    else:
        degeneracy = 1.0
    return BlockOmega(xi_block, psi_block, s_mu, eye, omega_mat, float(antisym), degeneracy)


def block_forms(
    sys: ChartedSystem,
    split: SplittingData,
    definiteness_tol: float | None = None,
) -> tuple[BlockOmega, BlockHessian]:
    """Assemble the block symplectic matrix and the block-diagonal Hessian.

    The diagonal Hessian blocks come from their configuration-space formulas;
    the same form is recomputed independently through the phase-space
    parameterization of the symplectic normal space, and the off-diagonal
    blocks of that matrix are verified to vanish rather than assumed to.
    """
    ar = arnold_form(sys, split)
    if not arnold_nondegenerate(ar, definiteness_tol):
        raise NotApplicableError("Arnold form is degenerate; block forms unavailable")
    split = _wint_ready(sys, split, True)
    pairs = split.wint_pairs
    m1 = split.qmu_basis.n_vectors
    m2 = len(pairs)
    qcols = split.qmu_basis.cols
    b_parts = [p[1] for p in pairs]
    omega = _assemble_block_omega(sys, split)
    omega_mat = omega.matrix

    # Diagonal Hessian blocks from their configuration-space formulas.
    sigma_int_form = restricted_augmented_hessian(sys, split, split.sigma_int_basis)
    b_mat = np.column_stack(b_parts) if m2 else np.zeros((sys.n, 0))
    gram_s = b_mat.T @ split.metric @ b_mat
    slice_star = np.linalg.inv(gram_s) if m2 else np.zeros((0, 0))
    hess_mat = np.zeros((m1 + 2 * m2, m1 + 2 * m2))
    hess_mat[:m1, :m1] = ar.matrix
    hess_mat[m1 : m1 + m2, m1 : m1 + m2] = sigma_int_form.matrix
    hess_mat[m1 + m2 :, m1 + m2 :] = slice_star

    # Independent recomputation through the phase-space parameterization.
    ctx = _KappaContext(sys, split)
    cols = []
    for i in range(m1):
        cols.append(ctx.phase_vector(qcols[:, i], np.zeros(sys.n), np.zeros(ctx.scols.shape[1])))
    for lam, b in pairs:
        cols.append(ctx.phase_vector(lam, b, np.zeros(ctx.scols.shape[1])))
    t_mat = ctx.scols.T @ split.metric @ b_mat if m2 else np.zeros((0, 0))
    for j in range(m2):
        gv = np.linalg.solve(t_mat.T, eye[:, j]) if m2 else np.zeros(0)
        cols.append(ctx.phase_vector(np.zeros(sys.lie.dim), np.zeros(sys.n), gv))
    big = np.column_stack(cols) if cols else np.zeros((2 * sys.n, 0))

    z = _phase_point(sys, split)
    ham = _phase_hamiltonian(sys, split.xi_perp)
    step = sys.fd_step2 * (1.0 + float(np.linalg.norm(z)))
    hfull = central_hessian(ham, z, step)
    kappa_h = big.T @ hfull @ big
    kappa_h = 0.5 * (kappa_h + kappa_h.T)

    jac = central_jacobian(_momentum_map(sys), z, sys.fd_step * (1.0 + float(np.linalg.norm(z))))
    kernel_residual = abs(jac @ big).max() if big.size and jac.size else 0.0

    dq_part, dp_part = big[: sys.n], big[sys.n :]
    omega_num = dq_part.T @ dp_part - dp_part.T @ dq_part
    omega_vs_canonical = abs(omega_num - omega_mat).max() if omega_mat.size else 0.0

    diag_scale = max(
        abs(ar.matrix).max() if ar.matrix.size else 0.0,
        abs(sigma_int_form.matrix).max() if sigma_int_form.matrix.size else 0.0,
        abs(slice_star).max() if slice_star.size else 0.0,
        DEFINITENESS_FLOOR,
    )
    off = kappa_h.copy()
    off[:m1, :m1] = 0.0
    off[m1 : m1 + m2, m1 : m1 + m2] = 0.0
    off[m1 + m2 :, m1 + m2 :] = 0.0
    offblock_residual = (abs(off).max() / diag_scale) if off.size else 0.0
    diag_residual = (abs(kappa_h - off - hess_mat).max() / diag_scale) if kappa_h.size else 0.0

    diagnostics = []
    if offblock_residual > OFFBLOCK_RTOL:
        diagnostics.append(
            f"off-diagonal blocks of the parameterized Hessian are {offblock_residual:.2e} of the diagonal"
        )
    hess = BlockHessian(
        arnold=ar,
        sigma_int=sigma_int_form,
        slice_star=slice_star,
        matrix=hess_mat,
        kappa_matrix=kappa_h,
        offblock_residual=float(offblock_residual),
        diag_residual=float(diag_residual),
        omega_vs_canonical=float(omega_vs_canonical),
        kernel_residual=float(kernel_residual),
        diagnostics=tuple(diagnostics),
    )
    return omega, hess


def omega_crosscheck(sys: ChartedSystem, split: SplittingData) -> float:
    """Re-derive the symplectic matrix from the exterior derivative of chi.

    The one-form chi^{xi_perp}(q) = M(q) A(q) xi_perp is differentiated by
    central differences along chart lines; its exterior derivative at x is
    extension-independent.  Returns the max absolute deviation from the
    assembled block matrix.
    """
    ar = arnold_form(sys, split)
    if not arnold_nondegenerate(ar):
        raise NotApplicableError("Arnold form is degenerate; block forms unavailable")
    split = _wint_ready(sys, split, True)
    omega = _assemble_block_omega(sys, split)
    pairs = split.wint_pairs
    m1 = split.qmu_basis.n_vectors
    m2 = len(pairs)
    qcols = split.qmu_basis.cols
    mu = split.mu

    def chi(q):
        return sys.metric_at(q) @ sys.generators_at(q) @ split.xi_perp

    h = sys.step1(split.x)

    def dchi(u, v):
        du = central_gradient(lambda q: float(chi(q) @ v), split.x, h) @ u
        dv = central_gradient(lambda q: float(chi(q) @ u), split.x, h) @ v
        return du - dv

    # slot data: (eta in q^mu, delta q in Sigma_int, alpha(delta q), S* index)
    slots = []
    for i in range(m1):
        slots.append((qcols[:, i], np.zeros(sys.n), np.zeros(sys.lie.dim), None))
    for lam, b in pairs:
        slots.append((np.zeros(sys.lie.dim), split.gens @ lam + b, lam, None))
    for j in range(m2):
        slots.append((np.zeros(sys.lie.dim), np.zeros(sys.n), np.zeros(sys.lie.dim), j))

    def int_index(slot_pos: int) -> int | None:
        return slot_pos - m1 if m1 <= slot_pos < m1 + m2 else None

    k = len(slots)
    prime = np.zeros((k, k))
    for a in range(k):
        eta1, dq1, al1, beta1 = slots[a]
        for b in range(k):
            eta2, dq2, al2, beta2 = slots[b]
            val = -(mu @ bracket(sys.lie, eta1, eta2))
            val -= mu @ bracket(sys.lie, eta1, al2)
            val += mu @ bracket(sys.lie, eta2, al1)
            # beta slots pair as the dual basis of the Sigma_int slice parts
            if beta2 is not None and int_index(a) == beta2:
                val += 1.0
            if beta1 is not None and int_index(b) == beta1:
                val -= 1.0
            if np.any(dq1) and np.any(dq2):
                val -= dchi(dq1, dq2)
            prime[a, b] = val
    return float(abs(prime - omega.matrix).max())


def block_corollary_test(
    sys: ChartedSystem,
    split: SplittingData,
    definiteness_tol: float | None = None,
    gmu_compact: bool | None = None,
    parameters: dict | None = None,
) -> StabilityReport:
    """Sharper block test: Arnold form on q^mu plus the internal Hessian.

    Requires a non-degenerate Arnold form; otherwise NOT_APPLICABLE and the
    caller falls back to the main test.
    """
    ar = arnold_form(sys, split)
    assumptions = _standard_assumptions(split, gmu_compact)
    if not arnold_nondegenerate(ar, definiteness_tol):
        return StabilityReport(
            verdict=Verdict.NOT_APPLICABLE,
            route=Route.BLOCK_COROLLARY,
            dim_check=split.dim_check,
            block_spectra={"arnold": ar.eigenvalues.tolist()},
            residuals={"re_residual": split.residual, "arnold_asymmetry": ar.asymmetry},
            assumptions=assumptions,
            parameters=parameters or {},
        )
    split = _wint_ready(sys, split, True)
    int_form = restricted_augmented_hessian(sys, split, split.sigma_int_basis)
    ar_cls = classify_definiteness(ar.eigenvalues, definiteness_tol)
    int_cls = classify_definiteness(int_form.eigenvalues, definiteness_tol)
    if split.dim_check > 0:
        stable = ar_cls in ("positive", "empty") and int_cls in ("positive", "empty")
    else:
        stable = ar_cls in ("positive", "negative", "empty") and int_cls == "empty"
    if ar.asymmetry > ARNOLD_ASYMMETRY_TOL:
        assumptions = assumptions + [f"Arnold form asymmetry {ar.asymmetry:.2e} above tolerance"]
    return StabilityReport(
        verdict=Verdict.GMU_STABLE if stable else Verdict.INCONCLUSIVE,
        route=Route.BLOCK_COROLLARY,
        dim_check=split.dim_check,
        block_spectra={
            "arnold": ar.eigenvalues.tolist(),
            "sigma_int_hessian": int_form.eigenvalues.tolist(),
        },
        residuals={"re_residual": split.residual, "arnold_asymmetry": ar.asymmetry},
        assumptions=assumptions,
        parameters=parameters or {},
    )


# ---------------------------------------------------------------------------
# Brute-force phase-space oracle
# ---------------------------------------------------------------------------


def full_em_test(
    sys: ChartedSystem,
    x,
    xi,
    ip: np.ndarray | None = None,
    definiteness_tol: float | None = None,
    complement_seed: int | None = None,
    gmu_compact: bool | None = None,
    parameters: dict | None = None,
) -> StabilityReport:
    """Independent oracle on chart phase space.

    Tests definiteness of the Hessian of the augmented Hamiltonian restricted
    to a complement of the g_mu-orbit directions inside ker TJ at the
    equilibrium, all built by finite differences in the (q, p) chart.  Any
    complement is admissible; ``complement_seed`` shears the default one.
    """
    split = build_splitting(sys, x, xi, ip)
    n, d = sys.n, sys.lie.dim
    z = _phase_point(sys, split)
    scale = 1.0 + float(np.linalg.norm(z))
    jac = central_jacobian(_momentum_map(sys), z, sys.fd_step * scale)
    ker = null_space(jac) if d else np.eye(2 * n)

    gmu_cols = split.gmu_basis.cols
    gvecs = []
    q0, p0 = z[:n], z[n:]
    for i in range(gmu_cols.shape[1]):
        lam = gmu_cols[:, i]
        base = split.gens @ lam
        fiber = -central_gradient(
            lambda q: float(p0 @ (sys.generators_at(q) @ lam)), q0, sys.step1(q0)
        )
        gvecs.append(np.concatenate([base, fiber]))
    gmat = np.column_stack(gvecs) if gvecs else np.zeros((2 * n, 0))

    in_ker = abs(gmat - ker @ (ker.T @ gmat)).max() if gmat.size else 0.0
    coords = ker.T @ gmat
    comp = null_space(coords.T) if coords.size else np.eye(ker.shape[1])
    vs = ker @ comp
    if complement_seed is not None and gmat.size and vs.size:
        rng = np.random.default_rng(complement_seed)
        vs = vs + gmat @ rng.uniform(-0.5, 0.5, (gmat.shape[1], vs.shape[1]))

    expected = split.qmu_basis.n_vectors + 2 * split.slice_basis.n_vectors
    if vs.shape[1] != expected:
        raise InconsistencyError(
            f"dim V_s = {vs.shape[1]} but q^mu and slice dimensions demand {expected}"
        )

    ham = _phase_hamiltonian(sys, split.xi_perp)
    hfull = central_hessian(ham, z, sys.fd_step2 * scale)
    hv = vs.T @ hfull @ vs
    hv = 0.5 * (hv + hv.T)
    eig = np.linalg.eigvalsh(hv) if hv.size else np.zeros(0)
    cls = classify_definiteness(eig, definiteness_tol)
    stable = cls in ("positive", "negative", "empty")
    return StabilityReport(
        verdict=Verdict.GMU_STABLE if stable else Verdict.INCONCLUSIVE,
        route=Route.ORACLE_ONLY,
        dim_check=split.dim_check,
        block_spectra={"vs_hessian": eig.tolist()},
        residuals={"re_residual": split.residual, "gmu_orbit_in_kernel": float(in_ker)},
        assumptions=_standard_assumptions(split, gmu_compact),
        parameters=parameters or {},
    )


# ---------------------------------------------------------------------------
# Isotypic sub-blocking and the regular-case identity
# ---------------------------------------------------------------------------


def isotypic_subblocks(
    sys: ChartedSystem,
    split: SplittingData,
    residual_generators,
    cross_tol: float = 1e-8,
) -> list[QuadraticFormOnBasis]:
    """Decompose Sigma under commuting residual-symmetry generators.

    Generators must fix the base point; their linearized actions on Sigma are
    skew for the metric and must commute (abelian residual groups only).  The
    restricted form is returned per joint component and cross-blocks are
    asserted to vanish.
    """
    gens = [np.asarray(g, dtype=float).reshape(-1) for g in residual_generators]
    x = split.x
    for lam in gens:
        if np.linalg.norm(split.gens @ lam) > 1e-8 * (1.0 + np.linalg.norm(lam)):
            raise ContractViolation("residual generator does not fix the base point")
    sigma = split.sigma_basis.cols
    k = sigma.shape[1]
    if k == 0:
        return []
    gram = sigma.T @ split.metric @ sigma
    chol = np.linalg.cholesky(gram)
    sigma_on = sigma @ np.linalg.inv(chol).T  # M-orthonormal columns

    actions = []
    for lam in gens:
        if not np.any(lam):
            continue
        l_full = linearized_action_generator(sys, x, lam)
        p_l = sigma_on.T @ split.metric @ (l_full @ sigma_on)
        actions.append(0.5 * (p_l - p_l.T))
    actions = [a for a in actions if abs(a).max() > 1e-12]
    form_full = restricted_augmented_hessian(
        sys, split, SubspaceBasis.from_cols("tangent", sigma_on)
    )
    if not actions:
        return [
            QuadraticFormOnBasis(
                SubspaceBasis.from_cols("tangent", sigma_on), form_full.matrix, "isotypic_0"
            )
        ]

    scale = max(abs(a).max() for a in actions)
    for i in range(len(actions)):
        for j in range(i + 1, len(actions)):
            comm = actions[i] @ actions[j] - actions[j] @ actions[i]
            if abs(comm).max() > 1e-6 * scale * scale:
                raise NotApplicableError("residual generator actions do not commute")

    rng = np.random.default_rng(12345)
    t = sum(w * a for w, a in zip(rng.uniform(0.5, 1.5, len(actions)), actions))
    c = -(t @ t)
    eig, vec = np.linalg.eigh(c)
    order = np.argsort(eig)
    eig, vec = eig[order], vec[:, order]
    clusters = []
    start = 0
    gap_tol = 1e-6 * max(1.0, float(eig[-1]))
    for idx in range(1, k + 1):
        if idx == k or eig[idx] - eig[idx - 1] > gap_tol:
            clusters.append(list(range(start, idx)))
            start = idx

    bmat = form_full.matrix
    out = []
    for ci, idxs in enumerate(clusters):
        vi = vec[:, idxs]
        cols = sigma_on @ vi
        mat = vi.T @ bmat @ vi
        out.append(
            QuadraticFormOnBasis(
                SubspaceBasis.from_cols("tangent", cols), mat, f"isotypic_{ci}"
            )
        )
        for jdxs in clusters[ci + 1 :]:
            vj = vec[:, jdxs]
            cross = abs(vi.T @ bmat @ vj).max()
            if cross > cross_tol * max(1.0, abs(bmat).max()):
                raise InconsistencyError(
                    f"isotypic cross-block {cross:g} above tolerance {cross_tol:g}"
                )
    return out


def regular_case_amended_check(sys: ChartedSystem, x, xi) -> float:
    """Compare the amended-potential Hessian with the augmented one plus correction.

    Only defined where the action is locally free (h = 0), so the locked
    inertia tensor is invertible near x and the amended potential exists.
    Returns the max absolute deviation between the two forms on Sigma.
    """
    split = build_splitting(sys, x, xi)
    if split.h_basis.n_vectors != 0:
        raise NotApplicableError("configuration isotropy is not discrete; amended potential undefined")
    mu = split.mu

    def amended(q):
        ii = sys.generators_at(q).T @ sys.metric_at(q) @ sys.generators_at(q)
        return sys.potential_at(q) + 0.5 * float(mu @ np.linalg.solve(ii, mu))

    hess_mu = central_hessian(amended, split.x, sys.step2(split.x))
    cols = split.sigma_basis.cols
    lhs = cols.T @ hess_mu @ cols
    rhs = restricted_augmented_hessian(sys, split).matrix
    return float(abs(lhs - rhs).max()) if lhs.size else 0.0
