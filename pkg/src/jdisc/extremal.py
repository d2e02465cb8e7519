"""Boundary-bump probe for extremality of a disc inside a bounded domain.

Given a domain {rho < 0}, a pseudoholomorphic disc f whose boundary arc P
stays strictly inside the domain, and a plateau height R, the probe:

  * shrinks the disc, f_r(zeta) = f(r zeta), r in [1/2, 1];
  * builds a smooth bump chi on the boundary circle, equal to R on the
    subarc P1 and supported in P, extends it to a holomorphic phi_R with
    Re(phi_R) = chi and Im(phi_R)(0) = 0, so that
    exp(phi_R(0)) >= exp(l R / (2 pi)) with l the length of P1;
  * forms the variational field V = zeta exp(phi_R) f_r' and the pinned
    family h_{r,t} through f_r;
  * records, per (r, t) cell, the derivative magnification lambda from
    h'(0) = r (1 + t exp(phi_R(0))) f'(0), whether the perturbed disc stays
    inside the domain, and the empirical constants of the containment
    argument (d(K, rho), C1(R), C2, C3 and the t thresholds).

A cell with lambda > 1 and containment is a numerical certificate that f is
not extremal; every verdict ships with the tolerances used.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import GridError, NewtonError, PreconditionError
from .grid import DiscGrid, DiscMap, differentiate, interpolate, make_grid, wirtinger
from .cauchy import schwarz_extend
from .operators import build_corrected, residual
from .solver import DiscFamily, NewtonConfig, make_family_normalized
from .structure import BeltramiField, StructureField
from .variation import phi_times_fprime, velocity_field

__all__ = [
    "DomainSpec",
    "ProbeConfig",
    "ProbeDiagnostics",
    "rescale_disc",
    "build_bump",
    "run_probe",
    "subharmonicity_certificate",
    "SubharmonicityReport",
]

TWO_PI = 2.0 * np.pi


@dataclass(eq=False)
class DomainSpec:
    """Bounded domain {rho < 0} with a plurisubharmonicity spot-check budget.

    ``rho`` maps complex points of shape (..., n) to reals, vectorized.
    ``gradient`` is optional analytic gradient data (unused by the probe
    itself, kept for callers).  Spot checks sample this many points/discs
    when certifying subharmonicity of rho along discs.
    """

    rho: Callable[[np.ndarray], np.ndarray]
    gradient: Callable | None = None
    psh_check_budget: int = 64

    def rho_along(self, f: DiscMap) -> np.ndarray:
        return np.asarray(self.rho(f.values), dtype=float)


def unit_ball_domain() -> DomainSpec:
    rho = lambda z: np.sum(np.abs(np.asarray(z)) ** 2, axis=-1) - 1.0
    grad = lambda z: np.conj(np.asarray(z))
    return DomainSpec(rho=rho, gradient=grad)


def ellipsoid_domain(semiaxes) -> DomainSpec:
    s = np.asarray(semiaxes, dtype=float)
    rho = lambda z: np.sum(np.abs(np.asarray(z) / s) ** 2, axis=-1) - 1.0
    return DomainSpec(rho=rho)


@dataclass(frozen=True)
class ProbeConfig:
    """Arcs, plateau height, and sweep grids for the probe.

    Arcs are (start, end) angle pairs in radians with end > start after
    unwrapping; P1 must be strictly inside P.  ``compact_margin`` defines
    the compact set K = {rho <= -compact_margin} used for d(K, rho).
    """

    arc_P: tuple
    arc_P1: tuple
    plateau_R: float
    r_values: tuple
    t_grid: tuple
    compact_margin: float = 0.05

    def __post_init__(self):
        p0, p1 = self.arc_P
        q0, q1 = self.arc_P1
        if not (p1 > p0 and q1 > q0):
            raise PreconditionError("arcs must have end > start")
        if p1 - p0 >= TWO_PI:
            raise PreconditionError("P must be a proper subarc of the circle")
        if not (p0 < q0 and q1 < p1):
            raise PreconditionError("P1 must be strictly inside P")
        if self.plateau_R < 0.0:
            raise PreconditionError("plateau_R must be nonnegative")
        for r in self.r_values:
            if not 0.5 <= r <= 1.0:
                raise PreconditionError(f"r values must lie in [1/2, 1], got {r}")

    @property
    def arc_length_P1(self) -> float:
        return self.arc_P1[1] - self.arc_P1[0]

    def t1_threshold(self, r: float) -> float:
        """((1 - r)/r) exp(-l R / (2 pi)), the magnification threshold."""
        l = self.arc_length_P1
        return (1.0 - r) / r * np.exp(-l * self.plateau_R / TWO_PI)


@dataclass(eq=False)
class ProbeDiagnostics:
    """Per-cell records and the empirical constants of the probe."""

    d_K_rho: float
    C1_R: float
    C2: float
    C3: float
    t_bounds: dict
    lam: np.ndarray  # (n_r, n_t) magnification factors (nan on failed cells)
    containment: np.ndarray  # (n_r, n_t) booleans
    worst_rho: np.ndarray  # (n_r, n_t) max of rho over the perturbed disc
    cells: list
    exp_phi0: float
    verdict: bool
    tolerances: dict

    def contradiction_cells(self):
        return [c for c in self.cells if c["lambda"] is not None
                and c["lambda"] > 1.0 and c["contained"]]


def rescale_disc(f: DiscMap, r: float) -> DiscMap:
    """f_r(zeta) = f(r zeta) by spectral interpolation; preserves the
    Cauchy-Riemann residual up to interpolation error."""
    if not 0.0 < r <= 1.0:
        raise PreconditionError(f"rescale radius must lie in (0, 1], got {r}")
    if r == 1.0:
        return f.copy()
    pts = r * f.grid.points()
    return DiscMap(f.grid, f.dim, interpolate(f, pts))


def _wrap_angles(angles: np.ndarray, start: float) -> np.ndarray:
    return np.mod(angles - start, TWO_PI) + start


def _raised_cosine(theta: np.ndarray, cfg: ProbeConfig) -> np.ndarray:
    p0, p1 = cfg.arc_P
    q0, q1 = cfg.arc_P1
    th = _wrap_angles(theta, p0 - (TWO_PI - (p1 - p0)) / 2.0)
    chi = np.zeros_like(th)
    ramp_up = (th > p0) & (th < q0)
    chi[ramp_up] = 0.5 * (1.0 - np.cos(np.pi * (th[ramp_up] - p0) / (q0 - p0)))
    chi[(th >= q0) & (th <= q1)] = 1.0
    ramp_dn = (th > q1) & (th < p1)
    chi[ramp_dn] = 0.5 * (1.0 + np.cos(np.pi * (th[ramp_dn] - q1) / (p1 - q1)))
    return cfg.plateau_R * chi


def build_bump(cfg: ProbeConfig, grid: DiscGrid) -> tuple[np.ndarray, DiscMap]:
    """Plateau bump chi on the boundary circle and its Schwarz extension.

    chi is a raised-cosine mollified plateau: R on P1, supported in P.
    The mean-value property gives Re(phi)(0) = average of chi, which exceeds
    l R / (2 pi) because the ramps are nonnegative; the discrete average
    must reproduce that margin, otherwise the arcs are unresolved on this
    grid and a GridError is raised.
    """
    chi = _raised_cosine(grid.angles, cfg)
    phi = schwarz_extend(grid, chi)
    re0 = float(interpolate(phi, [0.0])[0, 0].real)
    bound = cfg.arc_length_P1 * cfg.plateau_R / TWO_PI
    if cfg.plateau_R > 0.0 and re0 < bound:
        raise GridError(
            f"bump unresolved: Re(phi)(0) = {re0:.6g} < l R / 2 pi = {bound:.6g}; "
            "refine the angular grid or widen the arcs"
        )
    return chi, phi


def _deriv_at_zero(f: DiscMap) -> np.ndarray:
    fz, _ = differentiate(f)
    return interpolate(fz, [0.0])[0]


def run_probe(
    a: BeltramiField,
    j: StructureField,
    dom: DomainSpec,
    f: DiscMap,
    cfg: ProbeConfig,
    newton: NewtonConfig,
    disc_tol: float = 1e-6,
) -> ProbeDiagnostics:
    """Sweep (r, t), building pinned families along the rescaled discs and
    recording magnification, containment, and the empirical constants.

    Preconditions: f is pseudoholomorphic within ``disc_tol`` and its
    boundary arc P stays strictly inside the domain (otherwise the probe
    refuses: a proper disc cannot be probed this way).
    """
    grid = f.grid
    res_f = residual(a, f)
    if res_f > disc_tol:
        raise PreconditionError(
            f"input disc is not pseudoholomorphic: residual {res_f:.3e}"
        )
    # non-properness on P
    p0, p1 = cfg.arc_P
    th = _wrap_angles(grid.angles, p0 - (TWO_PI - (p1 - p0)) / 2.0)
    on_p = (th >= p0) & (th <= p1)
    bvals = f.values[grid.boundary_nodes]
    rho_p = np.asarray(dom.rho(bvals[on_p]), dtype=float)
    if rho_p.size == 0 or np.max(rho_p) >= 0.0:
        raise PreconditionError(
            "disc touches the domain boundary on P; the probe needs a "
            "non-proper arc (sup rho over P must be negative)"
        )

    chi, phi_r = build_bump(cfg, grid)
    phi0 = complex(interpolate(phi_r, [0.0])[0, 0])
    exp_phi0 = float(np.exp(phi0.real))

    # empirical C2 from the disc itself: rho(f) <= -C2 (1 - |zeta|)
    sub = subharmonicity_certificate(dom, f, tol=1e-8)
    c2 = sub.fitted_C2

    fp0 = _deriv_at_zero(f)
    n_r, n_t = len(cfg.r_values), len(cfg.t_grid)
    lam = np.full((n_r, n_t), np.nan)
    contained = np.zeros((n_r, n_t), dtype=bool)
    worst_rho = np.full((n_r, n_t), np.nan)
    cells = []
    d_vals, c1_samples, c3_samples, t0_values = [], [], [], []

    z_pts = grid.points()
    for ir, r in enumerate(cfg.r_values):
        f_r = rescale_disc(f, r)
        rho_fr = dom.rho_along(f_r)
        d_vals.append(-np.max(rho_fr[grid.boundary_nodes][on_p]))

        # variational field V = zeta exp(phi_R) f_r'
        phi_scalar = DiscMap(grid, 1, (z_pts * np.exp(phi_r.values[:, 0]))[:, None])
        v_r = phi_times_fprime(j, f_r, phi_scalar)
        op_r = build_corrected(a, f_r, normalized=True)
        family = make_family_normalized(op_r, f_r, v_r, cfg.t_grid, newton,
                                        field_residual_tol=None)
        t0_values.append(family.t_max)
        fam_by_t = dict((t, d) for t, d in family.samples)
        skipped_by_t = dict(family.skipped)

        for it, t in enumerate(cfg.t_grid):
            cell = {"r": float(r), "t": float(t), "lambda": None,
                    "contained": False, "max_rho": None, "family_residual": None,
                    "deriv_defect": None, "note": ""}
            h = fam_by_t.get(float(t))
            if h is None:
                cell["note"] = skipped_by_t.get(float(t), "no sample")
                cells.append(cell)
                continue
            hp0 = _deriv_at_zero(h)
            denom = float(np.real(np.vdot(fp0, fp0)))
            lam_rt = float(np.real(np.vdot(fp0, hp0)) / denom)
            lam[ir, it] = lam_rt
            cell["lambda"] = lam_rt
            cell["deriv_defect"] = float(
                abs(lam_rt - r * (1.0 + t * exp_phi0))
            )
            rho_h = dom.rho_along(h)
            worst = float(np.max(rho_h))
            worst_rho[ir, it] = worst
            contained[ir, it] = worst < 0.0
            cell["contained"] = bool(worst < 0.0)
            cell["max_rho"] = worst
            cell["family_residual"] = float(residual(a, h))
            cells.append(cell)
            if t != 0.0:
                dr = np.abs(rho_h - rho_fr) / abs(t)
                c1_samples.append(np.max(dr[grid.boundary_nodes][on_p]))
                off_p = ~on_p
                if np.any(off_p):
                    c3_samples.append(np.max(dr[grid.boundary_nodes][off_p]))

    d_k_rho = float(min(d_vals))
    c1 = float(max(c1_samples)) if c1_samples else 0.0
    c3 = float(max(c3_samples)) if c3_samples else 0.0
    t_sampled = max((abs(t) for t in cfg.t_grid), default=0.0)
    t_bounds = {
        "t0_R": float(min(t0_values)) if t0_values else 0.0,
        "t1_rR": {float(r): float(cfg.t1_threshold(r)) for r in cfg.r_values},
        "t1_R": float(t_sampled),
        "t2_R": float(t_sampled),
        "t3_r": {
            float(r): (float(c2 * (1.0 - r) / c3) if c3 > 0 else float("inf"))
            for r in cfg.r_values
        },
    }
    verdict = bool(
        any(c["lambda"] is not None and c["lambda"] > 1.0 and c["contained"]
            for c in cells)
    )
    return ProbeDiagnostics(
        d_K_rho=d_k_rho,
        C1_R=c1,
        C2=float(c2),
        C3=c3,
        t_bounds=t_bounds,
        lam=lam,
        containment=contained,
        worst_rho=worst_rho,
        cells=cells,
        exp_phi0=exp_phi0,
        verdict=verdict,
        tolerances={
            "disc_tol": disc_tol,
            "newton_tol": newton.tol,
            "compact_margin": cfg.compact_margin,
            "f_P_in_K": bool(d_k_rho >= cfg.compact_margin),
        },
    )


@dataclass(frozen=True)
class SubharmonicityReport:
    min_laplacian: float
    fitted_C2: float
    subharmonic: bool


def subharmonicity_certificate(
    dom: DomainSpec, f: DiscMap, tol: float = 1e-8
) -> SubharmonicityReport:
    """Check Laplacian(rho o f) >= -tol at interior nodes and fit the largest
    C2 with rho(f(zeta)) <= -C2 (1 - |zeta|) on the grid.

    Negative findings are reported, not raised.
    """
    grid = f.grid
    rho_f = dom.rho_along(f)
    arr = rho_f.reshape(1, grid.n_radial, grid.n_angular).astype(complex)
    gz, _ = wirtinger(grid, arr)
    _, gzb = wirtinger(grid, gz)
    lap = 4.0 * gzb[0].real  # Laplacian = 4 d2/dz dzbar
    interior = slice(0, grid.n_radial - 1)
    min_lap = float(np.min(lap[interior, :]))

    radii = np.repeat(grid.radii, grid.n_angular)
    gap = 1.0 - radii
    mask = gap > 1e-12
    with np.errstate(divide="ignore"):
        ratios = -rho_f[mask] / gap[mask]
    fitted = float(np.min(ratios))
    return SubharmonicityReport(
        min_laplacian=min_lap,
        fitted_C2=max(fitted, 0.0),
        subharmonic=bool(min_lap >= -tol),
    )
