"""Variational vector fields along pseudoholomorphic discs.

A field V is variational along f when it solves the linearized equation,
in real form V_x + J(f) V_y + dJ|_f(V) f_y = 0 or in complex form
V_zetabar + A(f) conj(V_zeta) + dA|_f(V) conj(f_zeta) = 0.  Both residuals
are exposed; they vanish together but differ by an invertible frame factor,
so no pointwise equality between the two numbers is claimed.

The product construction: for a holomorphic scalar phi = a + i b,
V = a f' + b J(f) f' is variational along f (f' is the velocity field f_x;
f_y = J(f) f_x).  This is the field the boundary probe uses with
phi(zeta) = zeta exp(phi_bump(zeta)).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import PreconditionError
from .grid import DiscMap, dbar_residual, differentiate, sup_abs
from .structure import (
    BeltramiField,
    StructureField,
    c2r_vec,
    eval_beltrami_nodal,
    r2c_vec,
)

__all__ = [
    "variational_residual_real",
    "variational_residual_complex",
    "phi_times_fprime",
    "velocity_field",
    "check_derivative_realization",
    "DerivativeReport",
]


def _xy_derivatives(f: DiscMap) -> tuple[np.ndarray, np.ndarray]:
    fz, fzb = differentiate(f)
    fx = fz.values + fzb.values
    fy = 1j * (fz.values - fzb.values)
    return fx, fy


def velocity_field(f: DiscMap) -> DiscMap:
    """f' = f_x, the velocity field of the disc."""
    fx, _ = _xy_derivatives(f)
    return DiscMap(f.grid, f.dim, fx)


def variational_residual_real(j: StructureField, f: DiscMap, v: DiscMap) -> float:
    """Sup norm of V_x + J(f) V_y + dJ|_f(V) f_y."""
    fx, fy = _xy_derivatives(f)
    vx, vy = _xy_derivatives(v)
    worst = 0.0
    for p in range(f.grid.n_nodes):
        fp = c2r_vec(f.values[p])
        jm = j.matrix(fp)
        dj = j.derivative(fp, c2r_vec(v.values[p]))
        res = c2r_vec(vx[p]) + jm @ c2r_vec(vy[p]) + dj @ c2r_vec(fy[p])
        worst = max(worst, float(np.linalg.norm(res)))
    return worst


def variational_residual_complex(a: BeltramiField, f: DiscMap, v: DiscMap) -> float:
    """Sup norm of V_zetabar + A(f) conj(V_zeta) + dA|_f(V) conj(f_zeta)."""
    fz, _ = differentiate(f)
    vz, vzb = differentiate(v)
    if a.is_zero:
        return sup_abs(vzb)
    a_nodes = eval_beltrami_nodal(a, f.values)
    zs = f.values
    try:
        da_z = np.asarray(a.dz(zs), dtype=complex)
        da_zb = np.asarray(a.dzbar(zs), dtype=complex)
        if da_z.shape != zs.shape[:-1] + (a.dim, a.dim, a.dim):
            raise ValueError
    except Exception:
        da_z = np.stack([np.asarray(a.dz(z), dtype=complex) for z in zs])
        da_zb = np.stack([np.asarray(a.dzbar(z), dtype=complex) for z in zs])
    # dA|_f(V) = sum_j dA/dz_j V_j + dA/dzbar_j conj(V_j)
    da_v = np.einsum("pjab,pj->pab", da_z, v.values) + np.einsum(
        "pjab,pj->pab", da_zb, np.conj(v.values)
    )
    res = (
        vzb.values
        + np.einsum("pab,pb->pa", a_nodes, np.conj(vz.values))
        + np.einsum("pab,pb->pa", da_v, np.conj(fz.values))
    )
    return float(np.max(np.linalg.norm(res, axis=1)))


def phi_times_fprime(
    j: StructureField,
    f: DiscMap,
    phi: DiscMap,
    holomorphy_tol: float = 1e-6,
) -> DiscMap:
    """V = Re(phi) f' + Im(phi) J(f) f' for a holomorphic scalar phi.

    phi must be scalar (dim 1) and holomorphic on the grid; the output is a
    variational field along f with residual proportional to the input
    residuals of f and phi.
    """
    if phi.dim != 1:
        raise PreconditionError("phi must be a scalar DiscMap")
    dres = dbar_residual(phi)
    scale = max(sup_abs(phi), 1.0)
    if dres > holomorphy_tol * scale:
        raise PreconditionError(
            f"phi is not holomorphic on the grid: dbar residual {dres:.3e}"
        )
    fx, _ = _xy_derivatives(f)
    a = phi.values[:, 0].real
    b = phi.values[:, 0].imag
    out = np.empty_like(f.values)
    for p in range(f.grid.n_nodes):
        jm = j.matrix(c2r_vec(f.values[p]))
        fxp = c2r_vec(fx[p])
        out[p] = r2c_vec(a[p] * fxp + b[p] * (jm @ fxp))
    return DiscMap(f.grid, f.dim, out)


@dataclass(frozen=True)
class DerivativeReport:
    """Central-difference check that the family differentiates to its field.

    ``defects`` holds (t, |(f_t - f_{-t})/(2t) - V|_sup) sorted by
    decreasing t; ``orders`` are the observed convergence orders between
    consecutive halvings; ``converged`` is True when the defect shrinks at
    first order or better.
    """

    defects: list
    orders: list
    converged: bool


def check_derivative_realization(family) -> DerivativeReport:
    """Richardson analysis of d/dt f_t at t = 0 against the stored field.

    Needs symmetric samples: at least two +/-t pairs related by halving.
    """
    ts = sorted({t for t, _ in family.samples if t > 0.0}, reverse=True)
    pairs = []
    for t in ts:
        try:
            fp = family.disc_at(t)
            fm = family.disc_at(-t)
        except KeyError:
            continue
        diff = (fp.values - fm.values) / (2.0 * t) - family.field.values
        pairs.append((t, float(np.max(np.linalg.norm(diff, axis=1)))))
    if len(pairs) < 2:
        raise PreconditionError("need at least two symmetric +/-t sample pairs")
    orders = []
    for (t1, d1), (t2, d2) in zip(pairs, pairs[1:]):
        if d2 == 0.0 or d1 == 0.0:
            orders.append(float("inf"))
        else:
            orders.append(float(np.log(d1 / d2) / np.log(t1 / t2)))
    noise_floor = 1e-12 * max(1.0, sup_abs(family.field))
    converged = pairs[-1][1] <= noise_floor or min(orders) >= 0.9
    return DerivativeReport(defects=pairs, orders=orders, converged=converged)
