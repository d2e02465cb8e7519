"""Numerical toolkit for pseudoholomorphic discs on the unit disc.

Solves the nonlinear Cauchy-Riemann system f_zetabar + A(f) conj(f_zeta) = 0
defining discs holomorphic with respect to an almost complex structure J,
realizes variational vector fields as derivatives of one-parameter disc
families, and runs a boundary-bump probe that certifies non-extremality of a
disc inside a bounded domain.
"""

from .errors import (
    JDiscError,
    GridError,
    StructureError,
    PreconditionError,
    CorrectionError,
    NewtonError,
    MaxIterationsExceeded,
    TrustBallExit,
    LinearSolveFailure,
    ConfigError,
)
from .grid import (
    DiscGrid,
    DiscMap,
    HolderConfig,
    make_grid,
    make_disc_map,
    differentiate,
    holder_norm,
    interpolate,
    integrate,
    inner_product,
    sup_abs,
    dbar_residual,
)
from .cauchy import cauchy_green, cauchy_green_normalized, schwarz_extend
from .structure import (
    StructureField,
    BeltramiField,
    to_beltrami,
    linearization_coefficients,
    structure_zoo,
)
from .operators import (
    CorrectedOperator,
    apply_F,
    residual,
    apply_dF,
    apply_adjoint_dF,
    apply_adjoint_formula,
    build_corrected,
    solve_dF,
)
from .solver import (
    NewtonConfig,
    DiscFamily,
    invert_F,
    solve_disc,
    make_family,
    make_family_normalized,
)
from .variation import (
    variational_residual_real,
    variational_residual_complex,
    phi_times_fprime,
    velocity_field,
    check_derivative_realization,
)
from .extremal import (
    DomainSpec,
    ProbeConfig,
    ProbeDiagnostics,
    rescale_disc,
    build_bump,
    run_probe,
    subharmonicity_certificate,
)

__version__ = "0.1.0"
