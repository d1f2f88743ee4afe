"""Finite-dimensional Lie algebra arithmetic from structure constants.

A Lie algebra is given by its structure constants c[i, j, k], meaning
[e_i, e_j] = sum_k c[i, j, k] e_k in a fixed basis.  Elements of the algebra
and its dual are plain coordinate arrays in that basis and its dual basis.
The coadjoint action uses the convention <ad*_lam mu, eta> = <mu, [lam, eta]>.

The module also hosts SubspaceBasis and the SVD-based subspace utilities
(null spaces, intersections, principal angles) used throughout the package.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolation

# Tolerance ladder: singular values below RANK_RTOL * sigma_max count as zero;
# subspaces are considered equal when all principal angles are below ANGLE_TOL.
RANK_RTOL = 1e-9
ANGLE_TOL = 1e-6
JACOBI_TOL = 1e-12


@dataclass(frozen=True)
class LieAlgebraSpec:
    """A Lie algebra of dimension ``dim`` defined by structure constants.

    ``structure`` has shape (dim, dim, dim) with [e_i, e_j] = sum_k c[i,j,k] e_k.
    Antisymmetry in (i, j) and the Jacobi identity are validated on construction.
    """

    dim: int
    structure: np.ndarray
    name: str = ""

    def __post_init__(self):
        c = np.asarray(self.structure, dtype=float)
        if c.shape != (self.dim, self.dim, self.dim):
            raise ContractViolation(
                f"structure constants must have shape {(self.dim,) * 3}, got {c.shape}"
            )
        object.__setattr__(self, "structure", c)
        scale = 1.0 + (abs(c).max() ** 2 if c.size else 0.0)
        asym = abs(c + c.transpose(1, 0, 2)).max() if c.size else 0.0
        if asym > JACOBI_TOL * scale:
            raise ContractViolation(f"structure constants not antisymmetric: residual {asym:g}")
        # Jacobi: cyclic sum of [e_i, [e_j, e_k]] vanishes componentwise.
        if c.size:
            double = np.einsum("jkl,ilm->ijkm", c, c)
            jac = double + double.transpose(1, 2, 0, 3) + double.transpose(2, 0, 1, 3)
            if abs(jac).max() > JACOBI_TOL * scale:
                raise ContractViolation(f"Jacobi identity violated: residual {abs(jac).max():g}")

    @classmethod
    def abelian(cls, dim: int, name: str = "") -> "LieAlgebraSpec":
        return cls(dim, np.zeros((dim, dim, dim)), name or f"abelian R^{dim}")

    @classmethod
    def so3(cls) -> "LieAlgebraSpec":
        c = np.zeros((3, 3, 3))
        for i, j, k in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
            c[i, j, k] = 1.0
            c[j, i, k] = -1.0
        return cls(3, c, "so(3)")

    @classmethod
    def from_entries(cls, dim: int, entries, name: str = "") -> "LieAlgebraSpec":
        """Build from a flat list of (i, j, k, value) entries, zero-based.

        Each entry sets c[i,j,k] = value and c[j,i,k] = -value, so only one
        orientation of each bracket needs to be listed.
        """
        c = np.zeros((dim, dim, dim))
        for i, j, k, val in entries:
            c[i, j, k] = val
            c[j, i, k] = -val
        return cls(dim, c, name)


def _check_dim(alg: LieAlgebraSpec, *vecs: np.ndarray) -> list[np.ndarray]:
    out = []
    for v in vecs:
        v = np.asarray(v, dtype=float).reshape(-1)
        if v.shape != (alg.dim,):
            raise ContractViolation(f"expected vector of length {alg.dim}, got shape {v.shape}")
        out.append(v)
    return out


def bracket(alg: LieAlgebraSpec, x, y) -> np.ndarray:
    """Lie bracket [x, y] from the structure constants."""
    x, y = _check_dim(alg, x, y)
    if alg.dim == 0:
        return np.zeros(0)
    return np.einsum("i,j,ijk->k", x, y, alg.structure)


def coadjoint(alg: LieAlgebraSpec, lam, mu) -> np.ndarray:
    """Coadjoint action ad*_lam mu, with <ad*_lam mu, eta> = <mu, [lam, eta]>."""
    lam, mu = _check_dim(alg, lam, mu)
    if alg.dim == 0:
        return np.zeros(0)
    return np.einsum("i,ijk,k->j", lam, alg.structure, mu)


def adjoint_matrix(alg: LieAlgebraSpec, lam) -> np.ndarray:
    """Matrix of ad_lam: eta -> [lam, eta] in the algebra basis."""
    (lam,) = _check_dim(alg, lam)
    if alg.dim == 0:
        return np.zeros((0, 0))
    return np.einsum("i,ijk->kj", lam, alg.structure)


def matrix_exp(a: np.ndarray) -> np.ndarray:
    """Dense matrix exponential by scaling-and-squaring with a Taylor core.

    Adequate for the small (dim <= 6) matrices this package works with.
    """
    a = np.asarray(a, dtype=float)
    if a.size == 0:
        return np.eye(a.shape[0])
    nrm = np.linalg.norm(a, ord=np.inf)
    squarings = max(0, int(np.ceil(np.log2(nrm))) + 1) if nrm > 0.5 else 0
    b = a / (2.0**squarings)
    out = np.eye(a.shape[0])
    term = np.eye(a.shape[0])
    for k in range(1, 19):
        term = term @ b / k
        out = out + term
    for _ in range(squarings):
        out = out @ out
    return out


# ---------------------------------------------------------------------------
# Subspace utilities
# ---------------------------------------------------------------------------


def null_space(a: np.ndarray, rtol: float = RANK_RTOL, atol: float = 0.0) -> np.ndarray:
    """Orthonormal basis (columns) of the null space of ``a`` (shape (m, k)).

    Singular values below max(rtol * sigma_max, atol) count as zero; ``atol``
    lets callers discount rows that are pure finite-difference noise.
    """
    a = np.atleast_2d(np.asarray(a, dtype=float))
    m, k = a.shape
    if k == 0:
        return np.zeros((0, 0))
    if m == 0:
        return np.eye(k)
    _, s, vh = np.linalg.svd(a)
    smax = s[0] if s.size else 0.0
    cut = max(rtol * smax, atol)
    nnz = int((s > cut).sum()) if smax > 0 else 0
    return vh[nnz:].T.copy()


def orthonormal_columns(a: np.ndarray, rtol: float = RANK_RTOL) -> np.ndarray:
    """Orthonormal basis (columns) of the column span of ``a``."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    if a.shape[1] == 0:
        return a.copy()
    u, s, _ = np.linalg.svd(a, full_matrices=False)
    smax = s[0] if s.size else 0.0
    rank = int((s > rtol * smax).sum()) if smax > 0 else 0
    return u[:, :rank].copy()


def principal_angles(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Principal angles (radians, ascending) between two column spans."""
    uo = orthonormal_columns(u)
    vo = orthonormal_columns(v)
    if uo.shape[1] == 0 or vo.shape[1] == 0:
        return np.zeros(0)
    sigma = np.linalg.svd(uo.T @ vo, compute_uv=False)
    return np.arccos(np.clip(np.sort(sigma)[::-1], -1.0, 1.0))


def subspaces_equal(u: np.ndarray, v: np.ndarray, angle_tol: float = ANGLE_TOL) -> bool:
    uo = orthonormal_columns(u)
    vo = orthonormal_columns(v)
    if uo.shape[1] != vo.shape[1]:
        return False
    if uo.shape[1] == 0:
        return True
    ang = principal_angles(uo, vo)
    return bool(ang.size == uo.shape[1] and ang.max(initial=0.0) < angle_tol)


def subspace_intersection(u: np.ndarray, v: np.ndarray, rtol: float = RANK_RTOL) -> np.ndarray:
    """Orthonormal basis (columns) of span(u) ∩ span(v)."""
    uo = orthonormal_columns(u, rtol)
    vo = orthonormal_columns(v, rtol)
    if uo.shape[1] == 0 or vo.shape[1] == 0:
        return np.zeros((uo.shape[0], 0))
    pairs = null_space(np.hstack([uo, -vo]), rtol)
    if pairs.shape[1] == 0:
        return np.zeros((uo.shape[0], 0))
    return orthonormal_columns(uo @ pairs[: uo.shape[1]], rtol)


@dataclass(frozen=True)
class SubspaceBasis:
    """An ordered basis spanning a linear subspace of one of the ambient spaces.

    ``ambient`` is one of "algebra", "coalgebra", "tangent", "phase";
    ``vectors`` is a (count, ambient_dim) array whose rows are the basis vectors.
    Rows must be numerically independent: the smallest singular value of the
    stacked matrix must exceed ``gram_tol`` times the largest.
    """

    ambient: str
    vectors: np.ndarray
    gram_tol: float = RANK_RTOL

    _AMBIENTS = ("algebra", "coalgebra", "tangent", "phase")

    def __post_init__(self):
        if self.ambient not in self._AMBIENTS:
            raise ContractViolation(f"unknown ambient {self.ambient!r}")
        v = np.atleast_2d(np.asarray(self.vectors, dtype=float))
        object.__setattr__(self, "vectors", v)
        if v.shape[0] == 0:
            return
        if v.shape[1] == 0 or v.shape[0] > v.shape[1]:
            raise ContractViolation("more vectors than ambient dimensions")
        s = np.linalg.svd(v, compute_uv=False)
        if s[0] == 0.0 or s[-1] <= self.gram_tol * s[0]:
            raise ContractViolation("basis rows are not numerically independent")

    @classmethod
    def from_cols(cls, ambient: str, cols: np.ndarray, gram_tol: float = RANK_RTOL):
        cols = np.atleast_2d(np.asarray(cols, dtype=float))
        return cls(ambient, cols.T.copy(), gram_tol)

    @property
    def n_vectors(self) -> int:
        return self.vectors.shape[0]

    @property
    def ambient_dim(self) -> int:
        return self.vectors.shape[1]

    @property
    def cols(self) -> np.ndarray:
        """Basis as a (ambient_dim, count) column matrix."""
        return self.vectors.T

    def orthonormalized(self) -> "SubspaceBasis":
        return SubspaceBasis.from_cols(self.ambient, orthonormal_columns(self.cols), self.gram_tol)


def momentum_isotropy_algebra(alg: LieAlgebraSpec, mu, tol: float = RANK_RTOL) -> SubspaceBasis:
    """Isotropy algebra g_mu = ker(lam -> ad*_lam mu) as an orthonormal basis.

    For abelian algebras this is the whole algebra; for mu = 0 likewise.
    """
    (mu,) = _check_dim(alg, mu)
    if tol <= 0:
        raise ContractViolation("tol must be positive")
    if alg.dim == 0:
        return SubspaceBasis("algebra", np.zeros((0, 0)))
    cols = np.column_stack([coadjoint(alg, e, mu) for e in np.eye(alg.dim)])
    return SubspaceBasis.from_cols("algebra", null_space(cols, tol))


def invariant_inner_product_family(alg: LieAlgebraSpec, params) -> np.ndarray:
    """Diagonal inner-product family on the algebra: diag(params), padded with 1.

    The result must be symmetric positive definite; non-positive parameters are
    rejected.  For abelian algebras any SPD matrix is invariant; for non-abelian
    algebras invariance under the residual group is asserted by the caller.
    """
    params = np.atleast_1d(np.asarray(params, dtype=float)).reshape(-1)
    if params.size > alg.dim:
        raise ContractViolation(f"at most {alg.dim} parameters allowed, got {params.size}")
    diag = np.ones(alg.dim)
    diag[: params.size] = params
    if np.any(diag <= 0.0):
        raise ContractViolation(f"inner product not positive definite: diag = {diag.tolist()}")
    return np.diag(diag)
