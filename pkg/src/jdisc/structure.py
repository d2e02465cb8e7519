"""Almost complex structures J and their Beltrami-type matrix fields A.

The identification of C^n with R^{2n} is interleaved: the real vector of
(z_1, ..., z_n) is (x_1, y_1, ..., x_n, y_n), so the standard structure
J_st is block-diagonal with 2x2 blocks [[0, -1], [1, 0]].

A structure J with det(J + J_st) != 0 is equivalent to the complex matrix
field A(z) acting as v -> (J + J_st)^{-1} (J - J_st) (conj v); this map is
complex linear in v, so A is an ordinary complex n x n matrix.  The package
works internally with A; J is the front end.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import StructureError
from .grid import DiscMap, differentiate

__all__ = [
    "StructureField",
    "BeltramiField",
    "to_beltrami",
    "linearization_coefficients",
    "structure_zoo",
    "c2r_vec",
    "r2c_vec",
    "c2r_mat",
    "jst_mat",
    "conj_mat",
]

_FD_STEP = 1e-5  # relative finite-difference step for structure derivatives


# real/complex interchange ---------------------------------------------------

def c2r_vec(v: np.ndarray) -> np.ndarray:
    """(..., n) complex -> (..., 2n) real, interleaved (x1, y1, x2, y2, ...)."""
    v = np.asarray(v, dtype=complex)
    out = np.empty(v.shape[:-1] + (2 * v.shape[-1],))
    out[..., 0::2] = v.real
    out[..., 1::2] = v.imag
    return out


def r2c_vec(x: np.ndarray) -> np.ndarray:
    """(..., 2n) real -> (..., n) complex."""
    x = np.asarray(x, dtype=float)
    return x[..., 0::2] + 1j * x[..., 1::2]


def c2r_mat(a: np.ndarray) -> np.ndarray:
    """Real 2n x 2n matrix of the complex-linear map v -> a @ v."""
    rot = np.array([[0.0, -1.0], [1.0, 0.0]])
    eye = np.eye(2)
    return np.kron(np.asarray(a).real, eye) + np.kron(np.asarray(a).imag, rot)


def jst_mat(n: int) -> np.ndarray:
    return c2r_mat(1j * np.eye(n))


def conj_mat(n: int) -> np.ndarray:
    return np.kron(np.eye(n), np.diag([1.0, -1.0]))


def _r2c_linmat(m: np.ndarray, n: int) -> np.ndarray:
    """Extract the complex matrix of a complex-linear real 2n x 2n map."""
    a = np.empty((n, n), dtype=complex)
    for j in range(n):
        a[:, j] = m[0::2, 2 * j] + 1j * m[1::2, 2 * j]
    return a


# field types ----------------------------------------------------------------

@dataclass(eq=False)
class StructureField:
    """An almost complex structure on R^{2n}.

    ``eval`` maps a real 2n-point to the 2n x 2n matrix J(p) with
    J(p)^2 = -id; ``directional_derivative(p, u)`` is d/dt J(p + t u) at 0,
    analytic when available and central finite differences otherwise.
    ``domain_radius`` bounds |p|; evaluation outside raises StructureError.
    """

    dim: int
    eval: Callable[[np.ndarray], np.ndarray]
    directional_derivative: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None
    name: str = ""
    params: tuple = ()
    domain_radius: float | None = None
    beltrami: "BeltramiField | None" = None
    diffeo: Callable | None = None
    diffeo_inverse: Callable | None = None

    def __post_init__(self):
        if self.directional_derivative is None:
            self.directional_derivative = self._fd_derivative

    def _check_point(self, p: np.ndarray):
        if self.domain_radius is not None and np.linalg.norm(p) > self.domain_radius:
            raise StructureError(
                f"structure '{self.name}' evaluated outside its configured box "
                f"(|p| = {np.linalg.norm(p):.3g} > {self.domain_radius:.3g})"
            )

    def matrix(self, p: np.ndarray) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        self._check_point(p)
        return self.eval(p)

    def matrix_at(self, z: np.ndarray) -> np.ndarray:
        """J at a complex n-point."""
        return self.matrix(c2r_vec(np.atleast_1d(z)))

    def derivative(self, p: np.ndarray, u: np.ndarray) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        self._check_point(p)
        return self.directional_derivative(p, np.asarray(u, dtype=float))

    def _fd_derivative(self, p: np.ndarray, u: np.ndarray) -> np.ndarray:
        scale = np.linalg.norm(u)
        if scale == 0.0:
            return np.zeros((2 * self.dim, 2 * self.dim))
        h = _FD_STEP * (1.0 + np.linalg.norm(p)) / scale
        return (self.eval(p + h * u) - self.eval(p - h * u)) / (2.0 * h)


@dataclass(eq=False)
class BeltramiField:
    """Complex n x n matrix field A(z) with Wirtinger partials.

    ``eval`` maps complex points of shape (..., n) to matrices (..., n, n);
    ``dz``/``dzbar`` return the stacked coordinate partials with shape
    (..., n, n, n) where the first matrix axis after the point axes indexes
    the coordinate.  Missing partials are filled by central finite
    differences of ``eval``.
    """

    dim: int
    eval: Callable[[np.ndarray], np.ndarray]
    dz: Callable[[np.ndarray], np.ndarray] | None = None
    dzbar: Callable[[np.ndarray], np.ndarray] | None = None
    is_zero: bool = False

    def __post_init__(self):
        if self.dz is None or self.dzbar is None:
            self.dz, self.dzbar = self._fd_partials()

    def _fd_partials(self):
        def both(z):
            z = np.asarray(z, dtype=complex)
            n = self.dim
            dz = np.empty(z.shape[:-1] + (n, n, n), dtype=complex)
            dzb = np.empty_like(dz)
            h = _FD_STEP * (1.0 + np.linalg.norm(z) / max(1, z.size // n))
            for j in range(n):
                e = np.zeros(n)
                e[j] = 1.0
                d_dx = (self.eval(z + h * e) - self.eval(z - h * e)) / (2 * h)
                d_dy = (self.eval(z + 1j * h * e) - self.eval(z - 1j * h * e)) / (2 * h)
                dz[..., j, :, :] = 0.5 * (d_dx - 1j * d_dy)
                dzb[..., j, :, :] = 0.5 * (d_dx + 1j * d_dy)
            return dz, dzb

        return (lambda z: both(z)[0]), (lambda z: both(z)[1])

    def at(self, z: np.ndarray) -> np.ndarray:
        return self.eval(np.asarray(z, dtype=complex))


def zero_beltrami(dim: int) -> BeltramiField:
    zeros = lambda z: np.zeros(np.shape(z)[:-1] + (dim, dim), dtype=complex)
    zeros3 = lambda z: np.zeros(np.shape(z)[:-1] + (dim, dim, dim), dtype=complex)
    return BeltramiField(dim=dim, eval=zeros, dz=zeros3, dzbar=zeros3, is_zero=True)


# conversions ------------------------------------------------------------------

def to_beltrami(j: StructureField, use_analytic: bool = True) -> BeltramiField:
    """Beltrami matrix field of a structure: A(z) v = (J+J_st)^{-1}(J-J_st)(conj v).

    When the structure carries an analytic Beltrami field (the zoo families
    do) it is returned directly unless ``use_analytic`` is False, which
    forces the generic real-matrix construction with finite-difference
    partials.
    """
    if use_analytic and j.beltrami is not None:
        return j.beltrami

    n = j.dim
    jst = jst_mat(n)

    def eval_a(z):
        z = np.asarray(z, dtype=complex)
        if z.ndim == 1:
            jz = j.matrix_at(z)
            m = jz + jst
            if abs(np.linalg.det(m)) < 1e-12:
                raise StructureError(f"det(J + J_st) vanishes at z = {z}")
            g = np.linalg.solve(m, jz - jst)
            return _r2c_linmat(g, n)
        return np.stack([eval_a(p) for p in z.reshape(-1, n)]).reshape(
            z.shape[:-1] + (n, n)
        )

    return BeltramiField(dim=n, eval=eval_a)


def eval_beltrami_nodal(a: BeltramiField, zs: np.ndarray) -> np.ndarray:
    """A at an array of complex points (M, n) -> (M, n, n); tries one
    vectorized call, falls back to a point loop for scalar-only fields."""
    try:
        out = np.asarray(a.eval(zs), dtype=complex)
        if out.shape == zs.shape[:-1] + (a.dim, a.dim):
            return out
    except Exception:
        pass
    return np.stack([np.asarray(a.eval(z), dtype=complex) for z in zs])


def linearization_coefficients(a: BeltramiField, f: DiscMap) -> tuple[np.ndarray, np.ndarray]:
    """Nodewise matrices (B1, B2) with
    B1 V + B2 conj(V) = (sum_j dA/dz_j(f) V_j + dA/dzbar_j(f) conj(V_j)) conj(f_zeta).

    Returns arrays of shape (n_nodes, n, n).
    """
    n = a.dim
    fz, _ = differentiate(f)
    w = np.conj(fz.values)  # (M, n)
    zs = f.values
    try:
        da_z = np.asarray(a.dz(zs), dtype=complex)
        da_zb = np.asarray(a.dzbar(zs), dtype=complex)
        if da_z.shape != zs.shape[:-1] + (n, n, n):
            raise ValueError
    except Exception:
        da_z = np.stack([np.asarray(a.dz(z), dtype=complex) for z in zs])
        da_zb = np.stack([np.asarray(a.dzbar(z), dtype=complex) for z in zs])
    # column j of B1 at node p is dA/dz_j(f_p) @ conj(f_zeta)(p)
    b1 = np.einsum("pjab,pb->paj", da_z, w)
    b2 = np.einsum("pjab,pb->paj", da_zb, w)
    return b1, b2


# the zoo ---------------------------------------------------------------------

def _pullback_structure(eps: float, dim: int) -> StructureField:
    """J = dPhi^{-1} o J_st o dPhi for Phi(z) = z + (eps conj(z_1)^2, 0, ...).

    Integrable by construction: the J-holomorphic discs are exactly
    Phi^{-1} o h with h holomorphic.
    """
    n = dim
    jst = jst_mat(n)
    c2 = np.diag([1.0, -1.0])

    def mult2(w: complex) -> np.ndarray:
        return np.array([[w.real, -w.imag], [w.imag, w.real]])

    def dphi(p: np.ndarray) -> np.ndarray:
        z1 = p[0] + 1j * p[1]
        d = np.eye(2 * n)
        d[0:2, 0:2] += mult2(2.0 * eps * np.conj(z1)) @ c2
        return d

    def d2phi(u: np.ndarray) -> np.ndarray:
        u1 = u[0] + 1j * u[1]
        d = np.zeros((2 * n, 2 * n))
        d[0:2, 0:2] = mult2(2.0 * eps * np.conj(u1)) @ c2
        return d

    def eval_j(p: np.ndarray) -> np.ndarray:
        d = dphi(p)
        return np.linalg.solve(d, jst @ d)

    def deriv_j(p: np.ndarray, u: np.ndarray) -> np.ndarray:
        d = dphi(p)
        dd = d2phi(u)
        jz = np.linalg.solve(d, jst @ d)
        return np.linalg.solve(d, jst @ dd - dd @ jz)

    def phi_map(z):
        z = np.asarray(z, dtype=complex)
        out = z.copy()
        out[..., 0] = z[..., 0] + eps * np.conj(z[..., 0]) ** 2
        return out

    def phi_inv(w, tol=1e-14, max_iter=60):
        w = np.asarray(w, dtype=complex)
        out = w.copy()
        z1 = w[..., 0].copy()
        for _ in range(max_iter):
            res = z1 + eps * np.conj(z1) ** 2 - w[..., 0]
            if np.max(np.abs(res)) < tol:
                break
            # real 2x2 Newton per point: d(res) = dz + 2 eps conj(z1) d(conj z1)
            a = np.ones_like(z1)
            b = 2.0 * eps * np.conj(z1)
            # solve a u + b conj(u) = -res for u
            denom = np.abs(a) ** 2 - np.abs(b) ** 2
            u = (-res * np.conj(a) + np.conj(-res) * b) / denom
            z1 = z1 + u
        else:
            raise StructureError("pullback inverse did not converge")
        out[..., 0] = z1
        return out

    # Beltrami field of the pullback: A = Phi_z^{-1} Phi_zbar, here
    # A_{11} = 2 eps conj(z_1) and zero elsewhere.
    def eval_a(z):
        z = np.asarray(z, dtype=complex)
        a = np.zeros(z.shape[:-1] + (n, n), dtype=complex)
        a[..., 0, 0] = 2.0 * eps * np.conj(z[..., 0])
        return a

    def eval_dz(z):
        z = np.asarray(z, dtype=complex)
        return np.zeros(z.shape[:-1] + (n, n, n), dtype=complex)

    def eval_dzbar(z):
        z = np.asarray(z, dtype=complex)
        d = np.zeros(z.shape[:-1] + (n, n, n), dtype=complex)
        d[..., 0, 0, 0] = 2.0 * eps
        return d

    belt = BeltramiField(dim=n, eval=eval_a, dz=eval_dz, dzbar=eval_dzbar,
                         is_zero=(eps == 0.0))

    # injectivity check on a sampled box: dPhi is singular where |2 eps z1| = 1
    box = 1.5
    rng = np.random.default_rng(0)
    sample = rng.uniform(-box, box, size=(200, 2 * n))
    for p in sample:
        z1 = p[0] + 1j * p[1]
        if abs(2.0 * eps * z1) >= 1.0:
            raise StructureError(
                f"pullback Jacobian singular on the sample box (eps = {eps}): "
                f"det dPhi changes sign near z_1 = {z1:.3g}"
            )

    radius = 0.45 / abs(eps) if eps != 0.0 else None
    return StructureField(
        dim=n,
        eval=eval_j,
        directional_derivative=deriv_j,
        name="pullback_poly",
        params=(eps,),
        domain_radius=radius,
        beltrami=belt,
        diffeo=phi_map,
        diffeo_inverse=phi_inv,
    )


def _beltrami_direct_structure(mu: complex, kappa: float, dim: int) -> StructureField:
    """Structure reconstructed from A(z) = mu / (1 + kappa |z_1|^2) * id.

    Requires |mu| < 1.  J = J_st (A + C)(C - A)^{-1} where A and C = conj are
    taken as real 2n x 2n maps; J^2 = -id holds identically for any
    contraction A, which is spot checked at construction.
    """
    n = dim
    if abs(mu) >= 1.0:
        raise StructureError(f"beltrami_direct requires |A| < 1, got |mu| = {abs(mu)}")
    if kappa < 0.0:
        raise StructureError("beltrami_direct requires kappa >= 0")
    jst = jst_mat(n)
    cmat = conj_mat(n)

    def g_of(z1):
        return 1.0 / (1.0 + kappa * np.abs(z1) ** 2)

    def eval_a(z):
        z = np.asarray(z, dtype=complex)
        g = g_of(z[..., 0])
        return mu * g[..., None, None] * np.eye(n)

    def eval_dz(z):
        z = np.asarray(z, dtype=complex)
        d = np.zeros(z.shape[:-1] + (n, n, n), dtype=complex)
        g = g_of(z[..., 0])
        d[..., 0, :, :] = (-mu * kappa * np.conj(z[..., 0]) * g**2)[..., None, None] * np.eye(n)
        return d

    def eval_dzbar(z):
        z = np.asarray(z, dtype=complex)
        d = np.zeros(z.shape[:-1] + (n, n, n), dtype=complex)
        g = g_of(z[..., 0])
        d[..., 0, :, :] = (-mu * kappa * z[..., 0] * g**2)[..., None, None] * np.eye(n)
        return d

    belt = BeltramiField(dim=n, eval=eval_a, dz=eval_dz, dzbar=eval_dzbar,
                         is_zero=(mu == 0.0))

    def eval_j(p: np.ndarray) -> np.ndarray:
        z = r2c_vec(p)
        a_real = c2r_mat(np.asarray(belt.eval(z)))
        return jst @ (a_real + cmat) @ np.linalg.inv(cmat - a_real)

    rng = np.random.default_rng(0)
    for _ in range(8):
        p = rng.uniform(-1.0, 1.0, size=2 * n)
        jj = eval_j(p)
        if np.max(np.abs(jj @ jj + np.eye(2 * n))) > 1e-10:
            raise StructureError("beltrami_direct reconstruction violates J^2 = -id")

    return StructureField(
        dim=n,
        eval=eval_j,
        name="beltrami_direct",
        params=(mu.real, mu.imag, kappa),
        beltrami=belt,
    )


def structure_zoo(name: str, params, dim: int = 1) -> StructureField:
    """Built-in structure families.

    standard          -- J_st; params ignored.
    pullback_poly     -- params [eps]; pullback of J_st by z + (eps conj(z1)^2, 0, ...).
    beltrami_direct   -- params [mu_re, mu_im, kappa]; A = mu/(1 + kappa |z1|^2) id.
    """
    params = list(params)
    if name == "standard":
        jst = jst_mat(dim)
        zero = lambda p, u: np.zeros((2 * dim, 2 * dim))
        return StructureField(
            dim=dim,
            eval=lambda p: jst.copy(),
            directional_derivative=zero,
            name="standard",
            beltrami=zero_beltrami(dim),
        )
    if name == "pullback_poly":
        if len(params) != 1:
            raise StructureError("pullback_poly expects params [eps]")
        return _pullback_structure(float(params[0]), dim)
    if name == "beltrami_direct":
        if len(params) not in (2, 3):
            raise StructureError("beltrami_direct expects params [mu_re, mu_im, kappa]")
        kappa = float(params[2]) if len(params) == 3 else 0.0
        return _beltrami_direct_structure(complex(params[0], params[1]), kappa, dim)
    raise StructureError(f"unknown structure '{name}'")
