"""Newton inversion of the corrected operator and one-parameter disc families.

Inverting Fc realizes the quantitative implicit-function step: a damped
Newton iteration with the linearization reassembled at every iterate and a
trust ball (in the discrete Holder norm) around the start disc.  Families
come from solving

    Fc(f_t) = Fc(f) + t * dFc(V)

for each requested t; with the standard structure the whole stack is the
identity and f_t = f + t V exactly.  The t range is sized from the
epsilon/(2C) radius heuristic with C = inv_norm_estimate and shrunk by
halving when a solve fails; the family is the Newton-selected right
inverse, no canonical choice is claimed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    LinearSolveFailure,
    MaxIterationsExceeded,
    NewtonError,
    PreconditionError,
    TrustBallExit,
)
from .grid import DiscMap, HolderConfig, holder_norm, interpolate, sup_abs
from .operators import (
    CorrectedOperator,
    apply_F_corrected,
    apply_dF,
    assemble_linearization,
    flatten_map,
    residual,
    unflatten_map,
    _correction_matrix,
    _linearization_nodal,
)
from .structure import BeltramiField
from .variation import variational_residual_complex

import scipy.linalg

__all__ = [
    "NewtonConfig",
    "DiscFamily",
    "invert_F",
    "solve_disc",
    "make_family",
    "make_family_normalized",
]

_HOLDER = HolderConfig(alpha=0.5, pair_budget=1024)


@dataclass(frozen=True)
class NewtonConfig:
    """Newton iteration controls.

    ``epsilon_ball`` is the trust radius in the discrete Holder norm around
    the start disc; iterates leaving it abort the solve.
    """

    max_iter: int = 40
    tol: float = 1e-9
    damping: float = 1.0
    epsilon_ball: float = 1.0

    def __post_init__(self):
        if self.tol <= 0.0:
            raise PreconditionError("tol must be positive")
        if not 0.0 < self.damping <= 1.0:
            raise PreconditionError("damping must lie in (0, 1]")


def _solve_at(op: CorrectedOperator, g: DiscMap, rhs: DiscMap) -> DiscMap:
    """Solve d_g Fc (delta) = rhs with the linearization rebuilt at g (the
    correction data stays frozen at the base disc)."""
    if op.a.is_zero:
        return rhs.copy()
    grid, dim = op.grid, op.dim
    a_nodes, b1, b2 = _linearization_nodal(op.a, g)
    mat = assemble_linearization(grid, dim, a_nodes, b1, b2, op.normalized)
    corr = _correction_matrix(grid, dim, op.kernel_basis, op.complement_basis)
    if corr is not None:
        mat = mat + corr
    try:
        lu = scipy.linalg.lu_factor(mat)
        x = scipy.linalg.lu_solve(lu, flatten_map(rhs.values))
    except (scipy.linalg.LinAlgError, ValueError) as exc:
        raise LinearSolveFailure(f"linearization solve failed: {exc}", sup_abs(rhs))
    if not np.all(np.isfinite(x)):
        raise LinearSolveFailure("linearization solve produced non-finite step",
                                 sup_abs(rhs))
    return DiscMap(grid, dim, unflatten_map(grid, dim, x))


def invert_F(
    op: CorrectedOperator,
    target: DiscMap,
    start: DiscMap,
    cfg: NewtonConfig,
    center: DiscMap | None = None,
    trace: list | None = None,
) -> DiscMap:
    """Solve Fc(g) = target by damped Newton from ``start``.

    The trust ball is centered at ``center`` (default: start).  Raises
    MaxIterationsExceeded, TrustBallExit, or LinearSolveFailure, each
    carrying the last residual.
    """
    if center is None:
        center = start
    g = start
    res_norm = sup_abs(apply_F_corrected(op, g) - target)
    for _ in range(cfg.max_iter):
        if trace is not None:
            trace.append(res_norm)
        if res_norm <= cfg.tol:
            return g
        if holder_norm(g - center, _HOLDER) > cfg.epsilon_ball:
            raise TrustBallExit("iterate left the trust ball", res_norm)
        rhs = apply_F_corrected(op, g) - target
        delta = _solve_at(op, g, rhs)
        lam = cfg.damping
        while True:
            g_new = g - lam * delta
            new_norm = sup_abs(apply_F_corrected(op, g_new) - target)
            if new_norm < res_norm:
                g, res_norm = g_new, new_norm
                break
            lam *= 0.5
            if lam < 2.0**-20:
                raise MaxIterationsExceeded(
                    "line search stalled before reaching tolerance", res_norm
                )
    if res_norm <= cfg.tol:
        return g
    raise MaxIterationsExceeded("Newton iteration budget exhausted", res_norm)


def solve_disc(
    a: BeltramiField,
    h: DiscMap,
    start: DiscMap,
    cfg: NewtonConfig,
    normalized: bool = False,
) -> DiscMap:
    """Find the pseudoholomorphic disc whose holomorphic data is h.

    Solves Fc(f) = h (+ the rank-N correction consistency) by Newton from
    ``start`` and checks the nonlinear Cauchy-Riemann residual afterwards.
    """
    from .operators import build_corrected

    op = build_corrected(a, start, normalized=normalized)
    f = invert_F(op, h, start, cfg)
    res = residual(a, f)
    if res > cfg.tol:
        # one tightened pass; quadratic convergence normally lands far below
        tighter = NewtonConfig(cfg.max_iter, cfg.tol / 50.0, cfg.damping, cfg.epsilon_ball)
        f = invert_F(op, h, f, tighter, center=start)
        res = residual(a, f)
        if res > cfg.tol:
            raise MaxIterationsExceeded(
                "Cauchy-Riemann residual above tolerance after solve", res
            )
    return f


@dataclass(eq=False)
class DiscFamily:
    """One-parameter family of pseudoholomorphic discs through ``base``.

    ``samples`` holds (t, disc) pairs; the sample at t = 0 is ``base``
    itself.  ``residuals`` aligns with samples; ``skipped`` records (t,
    reason) for parameters beyond the adaptive bound or failed solves.
    """

    base: DiscMap
    field: DiscMap
    t_max: float
    samples: list = field(default_factory=list)
    residuals: list = field(default_factory=list)
    skipped: list = field(default_factory=list)

    def disc_at(self, t: float) -> DiscMap:
        for s, d in self.samples:
            if s == t:
                return d
        raise KeyError(f"no sample at t = {t}")


def _initial_t_max(op: CorrectedOperator, v: DiscMap, cfg: NewtonConfig) -> float:
    dfv = apply_dF(op, v)
    denom = 2.0 * op.inv_norm_estimate * holder_norm(dfv, _HOLDER)
    if denom == 0.0:
        return float("inf")
    return cfg.epsilon_ball / denom


def make_family(
    op: CorrectedOperator,
    f: DiscMap,
    v: DiscMap,
    t_values,
    cfg: NewtonConfig,
    field_residual_tol: float | None = 1e-3,
) -> DiscFamily:
    """Generate f_t with Fc(f_t) = Fc(f) + t dFc(V) for requested t values.

    V must be a variational field along f (checked against
    ``field_residual_tol`` unless None).  Parameters beyond the adaptive
    t_max are skipped with a notice; a failed solve halves t_max.  Solves
    continue from the previous t (warm start) with the trust ball centered
    at f.
    """
    if field_residual_tol is not None:
        vres = variational_residual_complex(op.a, f, v)
        if vres > field_residual_tol:
            raise PreconditionError(
                f"V is not variational along f: residual {vres:.3e} "
                f"> {field_residual_tol:.3e}"
            )
    base_target = apply_F_corrected(op, f)
    dfv = apply_dF(op, v)
    t_max = _initial_t_max(op, v, cfg)

    family = DiscFamily(base=f, field=v, t_max=t_max)
    t_sorted = sorted(set(float(t) for t in t_values), key=abs)
    warm_pos, warm_neg = f, f
    for t in t_sorted:
        if t == 0.0:
            family.samples.append((0.0, f))
            family.residuals.append(residual(op.a, f))
            continue
        if abs(t) > family.t_max:
            family.skipped.append((t, f"beyond adaptive t_max {family.t_max:.3e}"))
            continue
        target = DiscMap(f.grid, f.dim, base_target.values + t * dfv.values)
        warm = warm_pos if t > 0 else warm_neg
        try:
            g = invert_F(op, target, warm, cfg, center=f)
        except NewtonError as exc:
            family.t_max = min(family.t_max, abs(t) / 2.0)
            family.skipped.append((t, f"solve failed ({exc}); t_max now {family.t_max:.3e}"))
            continue
        family.samples.append((t, g))
        family.residuals.append(residual(op.a, g))
        if t > 0:
            warm_pos = g
        else:
            warm_neg = g
    family.samples.sort(key=lambda s: s[0])
    return family


def make_family_normalized(
    op: CorrectedOperator,
    f: DiscMap,
    v: DiscMap,
    t_values,
    cfg: NewtonConfig,
    field_residual_tol: float | None = 1e-3,
) -> DiscFamily:
    """Family with center pinning: requires the normalized operator and
    V(0) = 0; then f_t(0) = f(0) and f_t'(0) = f'(0) + t V'(0) hold because
    the normalized transform and the degree >= 2 complement leave value and
    first derivative at 0 untouched."""
    if not op.normalized:
        raise PreconditionError("make_family_normalized needs an operator built "
                                "with normalized=True")
    v0 = np.linalg.norm(interpolate(v, [0.0])[0])
    scale = max(sup_abs(v), 1.0)
    if v0 > 1e-8 * scale:
        raise PreconditionError(f"V(0) must vanish, got |V(0)| = {v0:.3e}")
    return make_family(op, f, v, t_values, cfg, field_residual_tol)
