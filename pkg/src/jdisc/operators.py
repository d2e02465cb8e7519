"""The nonlinear operator F, its linearization, adjoint, and the finite-rank
correction that makes the linearization invertible.

F(f) = f + T(A(f) conj(f_zeta)) sends discs holomorphic for the structure
behind A to ordinary holomorphic maps.  Its derivative

    dF(V) = V + T(A(f) conj(V_zeta) + B1 V + B2 conj(V))

is Fredholm and only real-linear (because of the conjugations), so all
matrix work happens on the real 2*dim*n_nodes coordinates, interleaving
real and imaginary parts per complex component.  A numerical kernel is
detected by SVD; holomorphic maps from a monomial dictionary spanning a
complement of the range give the rank-N correction

    Fc(f) = F(f) + sum_j Re<f, V_j> h_j

which is invertible and still maps pseudoholomorphic discs to holomorphic
ones.  The adjoint is taken with respect to the quadrature inner product
Re sum_j integral f_j conj(g_j): apply_adjoint_dF uses the transpose of the
assembled matrix, which makes the duality identity exact on the grid, and
apply_adjoint_formula exposes the closed-form adjoint
V - conj(B1^T T(conj V)) - B2^T T(conj V) valid when A vanishes along f.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import CorrectionError, LinearSolveFailure
from .cauchy import cauchy_core, cauchy_green
from .grid import DiscGrid, DiscMap, differentiate, inner_product, sup_abs, wirtinger
from .structure import BeltramiField, eval_beltrami_nodal, linearization_coefficients

__all__ = [
    "CorrectedOperator",
    "apply_F",
    "residual",
    "apply_dF",
    "apply_adjoint_dF",
    "apply_adjoint_formula",
    "build_corrected",
    "solve_dF",
    "assemble_linearization",
    "complement_from_dictionary",
    "monomial_dictionary",
    "apply_F_corrected",
    "SolveInfo",
]

KERNEL_THRESHOLD = 1e-8  # singular values below this times sigma_max count as kernel


# real flattening --------------------------------------------------------------

def flatten_map(values: np.ndarray) -> np.ndarray:
    """(M, n) complex -> (2 M n,) real, node-major with interleaved re/im."""
    m, n = values.shape
    out = np.empty(2 * m * n)
    out[0::2] = values.real.reshape(-1)
    out[1::2] = values.imag.reshape(-1)
    return out


def unflatten_map(grid: DiscGrid, dim: int, x: np.ndarray) -> np.ndarray:
    vals = x[0::2] + 1j * x[1::2]
    return vals.reshape(grid.n_nodes, dim)


def weight_vector(grid: DiscGrid, dim: int) -> np.ndarray:
    """Diagonal of the quadrature inner product in flattened coordinates."""
    return np.repeat(grid.weights, 2 * dim)


# nonlinear operator -----------------------------------------------------------

def _beltrami_rhs(a_nodes: np.ndarray, fz_values: np.ndarray) -> np.ndarray:
    return np.einsum("pij,pj->pi", a_nodes, np.conj(fz_values))


def apply_F(a: BeltramiField, f: DiscMap, normalized: bool = False) -> DiscMap:
    """F(f) = f + T(A(f) conj(f_zeta)); T0 instead of T when normalized."""
    if a.is_zero:
        return f.copy()
    fz, _ = differentiate(f)
    a_nodes = eval_beltrami_nodal(a, f.values)
    rhs = DiscMap(f.grid, f.dim, _beltrami_rhs(a_nodes, fz.values))
    t_rhs = cauchy_core(f.grid, rhs.as_polar(), normalized=normalized)
    return f + DiscMap.from_polar(f.grid, t_rhs)


def residual(a: BeltramiField, f: DiscMap) -> float:
    """Sup norm of f_zetabar + A(f) conj(f_zeta); zero iff pseudoholomorphic."""
    fz, fzb = differentiate(f)
    if a.is_zero:
        return sup_abs(fzb)
    a_nodes = eval_beltrami_nodal(a, f.values)
    res = fzb.values + _beltrami_rhs(a_nodes, fz.values)
    return float(np.max(np.linalg.norm(res, axis=1)))


# linearization assembly ---------------------------------------------------------

def _linearization_nodal(a: BeltramiField, f: DiscMap):
    a_nodes = eval_beltrami_nodal(a, f.values)
    b1, b2 = linearization_coefficients(a, f)
    return a_nodes, b1, b2


def _apply_linearization_batch(
    grid: DiscGrid,
    dim: int,
    a_nodes: np.ndarray,
    b1: np.ndarray,
    b2: np.ndarray,
    v_batch: np.ndarray,
    normalized: bool,
) -> np.ndarray:
    """V + T(A conj(V_zeta) + B1 V + B2 conj(V)) for a batch (B, M, dim)."""
    b = v_batch.shape[0]
    polar = v_batch.reshape(b, grid.n_radial, grid.n_angular, dim).transpose(0, 3, 1, 2)
    vz, _ = wirtinger(grid, polar)
    vz_nodes = vz.transpose(0, 2, 3, 1).reshape(b, grid.n_nodes, dim)
    rhs = (
        np.einsum("pij,bpj->bpi", a_nodes, np.conj(vz_nodes))
        + np.einsum("pij,bpj->bpi", b1, v_batch)
        + np.einsum("pij,bpj->bpi", b2, np.conj(v_batch))
    )
    rhs_polar = rhs.reshape(b, grid.n_radial, grid.n_angular, dim).transpose(0, 3, 1, 2)
    t_rhs = cauchy_core(grid, rhs_polar, normalized=normalized)
    return v_batch + t_rhs.transpose(0, 2, 3, 1).reshape(b, grid.n_nodes, dim)


def assemble_linearization(
    grid: DiscGrid,
    dim: int,
    a_nodes: np.ndarray,
    b1: np.ndarray,
    b2: np.ndarray,
    normalized: bool = False,
) -> np.ndarray:
    """Real matrix of V -> V + T(A conj(V_zeta) + B1 V + B2 conj(V)).

    ``a_nodes``, ``b1``, ``b2`` are nodal (M, n, n) arrays; the result acts
    on flattened real coordinates (dimension 2 * M * n).
    """
    m = grid.n_nodes
    d = 2 * m * dim
    # complex batch holding all real basis vectors at once
    cols = np.eye(d)
    v_complex = (cols[0::2, :] + 1j * cols[1::2, :]).T.reshape(d, m, dim)
    out = _apply_linearization_batch(grid, dim, a_nodes, b1, b2, v_complex, normalized)
    mat = np.empty((d, d))
    flat = out.reshape(d, m * dim)
    mat[0::2, :] = flat.real.T
    mat[1::2, :] = flat.imag.T
    return mat


def monomial_dictionary(
    grid: DiscGrid, dim: int, min_degree: int, max_degree: int
) -> list[DiscMap]:
    """Holomorphic candidates zeta^k e_c and i zeta^k e_c, ordered by degree."""
    z = grid.points()
    out = []
    for k in range(min_degree, max_degree + 1):
        zk = z**k
        for c in range(dim):
            for phase in (1.0, 1.0j):
                vals = np.zeros((grid.n_nodes, dim), dtype=complex)
                vals[:, c] = phase * zk
                out.append(DiscMap(grid, dim, vals))
    return out


def complement_from_dictionary(
    mat: np.ndarray,
    grid: DiscGrid,
    dim: int,
    dictionary: list[DiscMap],
    threshold: float = KERNEL_THRESHOLD,
):
    """Kernel/cokernel data of a real operator matrix plus a holomorphic
    complement of its range chosen from ``dictionary``.

    Returns (kernel_maps, cokernel_maps, complement_maps, sigma, u, vt).
    Kernel maps are normalized in the quadrature norm; complement maps are
    selected greedily by pivoted QR of their projections onto the left null
    space and raise CorrectionError if the dictionary cannot span it.
    """
    u, sigma, vt = np.linalg.svd(mat)
    smax = sigma[0] if len(sigma) else 1.0
    null = sigma < threshold * smax
    n_kernel = int(np.sum(null))
    w = weight_vector(grid, dim)

    kernel_maps, cokernel_maps = [], []
    for i in np.where(null)[0]:
        vec = vt[i]
        vals = unflatten_map(grid, dim, vec)
        km = DiscMap(grid, dim, vals)
        nrm = np.sqrt(np.real(inner_product(km, km)))
        kernel_maps.append(km * (1.0 / nrm))
        cok = unflatten_map(grid, dim, u[:, i] / w)
        cokernel_maps.append(DiscMap(grid, dim, cok))

    complement_maps: list[DiscMap] = []
    if n_kernel > 0:
        u_null = u[:, null]  # (D, N), orthonormal
        cand = np.stack([flatten_map(h.values) for h in dictionary], axis=1)
        cand = cand / np.linalg.norm(cand, axis=0, keepdims=True)
        proj = u_null.T @ cand  # (N, n_cand)
        q, r, piv = scipy.linalg.qr(proj, pivoting=True)
        diag = np.abs(np.diag(r[: min(r.shape), : min(r.shape)]))
        ok = diag > 1e-2
        if len(diag) < n_kernel or not np.all(ok[:n_kernel]):
            raise CorrectionError(
                f"holomorphic dictionary cannot span the cokernel "
                f"(need {n_kernel}, pivots {diag[:n_kernel]})"
            )
        complement_maps = [dictionary[piv[j]] for j in range(n_kernel)]
    return kernel_maps, cokernel_maps, complement_maps, sigma, u, vt


@dataclass(eq=False)
class CorrectedOperator:
    """F with its finite-rank correction, frozen at a base disc.

    kernel_basis and complement_basis have equal length N; when
    ``normalized`` every complement map h satisfies h(0) = 0 and h'(0) = 0.
    ``inv_norm_estimate`` is 1/sigma_min of the corrected matrix in the
    discrete euclidean norm, the computable stand-in for the operator norm
    of the inverse linearization (used for step sizing, not as a certified
    bound).
    """

    a: BeltramiField
    base_disc: DiscMap
    normalized: bool
    kernel_basis: list[DiscMap]
    complement_basis: list[DiscMap]
    cokernel_basis: list[DiscMap]
    inv_norm_estimate: float
    sigma_min: float
    sigma_max: float
    _matrix: np.ndarray | None = field(default=None, repr=False)
    _lu: tuple | None = field(default=None, repr=False)
    _b1: np.ndarray | None = field(default=None, repr=False)
    _b2: np.ndarray | None = field(default=None, repr=False)
    _a_nodes: np.ndarray | None = field(default=None, repr=False)

    @property
    def grid(self) -> DiscGrid:
        return self.base_disc.grid

    @property
    def dim(self) -> int:
        return self.base_disc.dim

    @property
    def n_kernel(self) -> int:
        return len(self.kernel_basis)

    def is_identity(self) -> bool:
        return self._matrix is None and self.n_kernel == 0

    def correction_values(self, f: DiscMap) -> np.ndarray:
        """sum_j Re<f, V_j> h_j as nodal values."""
        out = np.zeros_like(f.values)
        for vj, hj in zip(self.kernel_basis, self.complement_basis):
            out += np.real(inner_product(f, vj)) * hj.values
        return out


def _correction_matrix(op_grid, dim, kernel_basis, complement_basis) -> np.ndarray | None:
    if not kernel_basis:
        return None
    w = weight_vector(op_grid, dim)
    rows = np.stack([w * flatten_map(v.values) for v in kernel_basis], axis=0)
    cols = np.stack([flatten_map(h.values) for h in complement_basis], axis=1)
    return cols @ rows


def build_corrected(
    a: BeltramiField,
    f: DiscMap,
    normalized: bool = False,
    kernel_threshold: float = KERNEL_THRESHOLD,
    max_extra_degree: int = 6,
) -> CorrectedOperator:
    """Assemble dF at f, detect its numerical kernel, and correct it.

    With a structurally zero A the operator is the identity and no matrix is
    assembled.  Otherwise the real matrix is built column by column (in one
    batched sweep), its SVD supplies kernel and cokernel, and holomorphic
    monomials spanning the complement (degree >= 2 in the normalized case,
    so value and derivative at 0 stay pinned) give the rank-N correction.
    """
    grid, dim = f.grid, f.dim
    if a.is_zero:
        return CorrectedOperator(
            a=a,
            base_disc=f,
            normalized=normalized,
            kernel_basis=[],
            complement_basis=[],
            cokernel_basis=[],
            inv_norm_estimate=1.0,
            sigma_min=1.0,
            sigma_max=1.0,
        )

    a_nodes, b1, b2 = _linearization_nodal(a, f)
    mat = assemble_linearization(grid, dim, a_nodes, b1, b2, normalized)

    min_degree = 2 if normalized else 0
    max_degree = min(min_degree + max_extra_degree, grid.n_angular // 2 - 1)
    dictionary = monomial_dictionary(grid, dim, min_degree, max_degree)
    kernel, cokernel, complement, sigma, _, _ = complement_from_dictionary(
        mat, grid, dim, dictionary, kernel_threshold
    )

    corr = _correction_matrix(grid, dim, kernel, complement)
    mat_corr = mat if corr is None else mat + corr
    if corr is None:
        sigma_min = float(sigma[-1])
        sigma_max = float(sigma[0])
    else:
        sigma_c = np.linalg.svd(mat_corr, compute_uv=False)
        sigma_min = float(sigma_c[-1])
        sigma_max = float(sigma_c[0])
        if sigma_min < kernel_threshold * sigma_max * 10.0:
            raise CorrectionError(
                f"correction failed to lift sigma_min (= {sigma_min:.3e})"
            )
    lu = scipy.linalg.lu_factor(mat_corr)
    return CorrectedOperator(
        a=a,
        base_disc=f,
        normalized=normalized,
        kernel_basis=kernel,
        complement_basis=complement,
        cokernel_basis=cokernel,
        inv_norm_estimate=1.0 / sigma_min,
        sigma_min=sigma_min,
        sigma_max=sigma_max,
        _matrix=mat_corr,
        _lu=lu,
        _b1=b1,
        _b2=b2,
        _a_nodes=a_nodes,
    )


def apply_F_corrected(op: CorrectedOperator, f: DiscMap) -> DiscMap:
    """Fc(f) = F(f) + sum_j Re<f, V_j> h_j."""
    out = apply_F(op.a, f, normalized=op.normalized)
    if op.n_kernel:
        out = DiscMap(f.grid, f.dim, out.values + op.correction_values(f))
    return out


def apply_dF(op: CorrectedOperator, v: DiscMap) -> DiscMap:
    """Derivative of Fc at the base disc applied to V (real-linear in V)."""
    if op.is_identity():
        return v.copy()
    x = flatten_map(v.values)
    y = op._matrix @ x
    return DiscMap(op.grid, op.dim, unflatten_map(op.grid, op.dim, y))


def apply_adjoint_dF(op: CorrectedOperator, v: DiscMap) -> DiscMap:
    """Adjoint of dFc in the quadrature inner product, via the discrete
    transpose, so the duality identity holds to rounding on the grid."""
    if op.is_identity():
        return v.copy()
    w = weight_vector(op.grid, op.dim)
    x = flatten_map(v.values)
    y = (op._matrix.T @ (w * x)) / w
    return DiscMap(op.grid, op.dim, unflatten_map(op.grid, op.dim, y))


def apply_adjoint_formula(op: CorrectedOperator, v: DiscMap) -> DiscMap:
    """Closed-form adjoint V - conj(B1^T T(conj V)) - B2^T T(conj V), plus the
    correction adjoint sum_j Re<V, h_j> V_j.

    Valid in the regime where A vanishes along the base disc (the general
    position adds an A conj(V_zeta) term whose adjoint this omits).
    """
    if op.is_identity():
        return v.copy()
    t_vb = cauchy_green(DiscMap(op.grid, op.dim, np.conj(v.values)))
    b1t = np.einsum("pji,pj->pi", op._b1, t_vb.values)
    b2t = np.einsum("pji,pj->pi", op._b2, t_vb.values)
    vals = v.values - np.conj(b1t) - b2t
    for vj, hj in zip(op.kernel_basis, op.complement_basis):
        vals += np.real(inner_product(v, hj)) * vj.values
    return DiscMap(op.grid, op.dim, vals)


@dataclass(frozen=True)
class SolveInfo:
    residual: float
    holder_slack: float


def solve_dF(op: CorrectedOperator, w: DiscMap, info: bool = False):
    """Solve dFc(V) = W at the base disc.

    Checks the residual of the solve and, when ``info`` is set, reports the
    slack in the bound |V| <= inv_norm_estimate * |W| measured in the
    discrete Holder norm.
    """
    from .grid import holder_norm  # local import to avoid cycle at module load

    if op.is_identity():
        v = w.copy()
        return (v, SolveInfo(0.0, 0.0)) if info else v
    x = scipy.linalg.lu_solve(op._lu, flatten_map(w.values))
    v = DiscMap(op.grid, op.dim, unflatten_map(op.grid, op.dim, x))
    res = sup_abs(apply_dF(op, v) - w)
    scale = max(sup_abs(w), 1e-300)
    if res > 1e-8 * scale:
        raise LinearSolveFailure("linear solve residual too large", res)
    if info:
        hw = holder_norm(w)
        hv = holder_norm(v)
        slack = hv / (op.inv_norm_estimate * hw) - 1.0 if hw > 0 else 0.0
        return v, SolveInfo(res, slack)
    return v
