"""Tensor polar discretization of the closed unit disc.

Nodes are tensor products of radial and angular points: the angles are
uniform on [0, 2pi), the radii are the positive half of a Chebyshev-Lobatto
grid on [-1, 1] with an odd polynomial degree, so r = 0 is never a node and
r = 1 always is.  A smooth function on the disc restricted to a diameter is
smooth in the Chebyshev variable once the two rays theta and theta + pi are
glued; radial differentiation and interpolation exploit that gluing, which
is why the angular count must be even.

Quadrature weights are interpolatory in the variable s = r^2: for a smooth
integrand the angular average is an even function of r, so the area integral
reduces to an integral of a smooth function of s against ds.  This makes the
rule exact for polynomials in (x, y) up to the radial resolution and gives
sum(weights) = pi to solver precision.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import csv
import io
import json

import numpy as np
from numpy.polynomial import legendre

from .errors import GridError

TWO_PI = 2.0 * np.pi

__all__ = [
    "DiscGrid",
    "DiscMap",
    "HolderConfig",
    "make_grid",
    "make_disc_map",
    "differentiate",
    "holder_norm",
    "interpolate",
    "integrate",
    "inner_product",
    "sup_abs",
    "dbar_residual",
]


@dataclass(eq=False)
class DiscGrid:
    """Polar tensor grid on the closed unit disc.

    Node p = i_radial * n_angular + i_angular; radii are strictly increasing
    in (0, 1], angles[j] = 2*pi*j / n_angular.  ``weights`` are per-node area
    weights (they sum to pi), ``boundary_nodes`` are the indices at r = 1.
    """

    n_radial: int
    n_angular: int
    radii: np.ndarray
    angles: np.ndarray
    weights: np.ndarray
    boundary_nodes: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def n_nodes(self) -> int:
        return self.n_radial * self.n_angular

    def points(self) -> np.ndarray:
        """Complex coordinates of all nodes, node-major order."""
        if "points" not in self._cache:
            z = self.radii[:, None] * np.exp(1j * self.angles[None, :])
            self._cache["points"] = z.reshape(-1)
        return self._cache["points"]

    def angular_modes(self) -> np.ndarray:
        """Integer Fourier mode numbers in FFT layout."""
        if "modes" not in self._cache:
            n = self.n_angular
            self._cache["modes"] = np.rint(np.fft.fftfreq(n, 1.0 / n)).astype(int)
        return self._cache["modes"]


def _cheb_lobatto(n_poly: int) -> tuple[np.ndarray, np.ndarray]:
    """Chebyshev-Lobatto nodes x_q = cos(pi q / n_poly) and the first-order
    spectral differentiation matrix on them."""
    q = np.arange(n_poly + 1)
    x = np.cos(np.pi * q / n_poly)
    c = np.ones(n_poly + 1)
    c[0] = c[-1] = 2.0
    c *= (-1.0) ** q
    dx = x[:, None] - x[None, :]
    np.fill_diagonal(dx, 1.0)
    d = np.outer(c, 1.0 / c) / dx
    np.fill_diagonal(d, 0.0)
    np.fill_diagonal(d, -d.sum(axis=1))
    return x, d


def _radial_weights(radii: np.ndarray) -> np.ndarray:
    """Interpolatory weights w_j with sum_j w_j G(r_j^2) = int_0^1 G(s) ds."""
    s = radii**2
    n = len(radii)
    v = legendre.legvander(2.0 * s - 1.0, n - 1)  # (n, n): P_a(2 s_j - 1)
    rhs = np.zeros(n)
    rhs[0] = 1.0
    return np.linalg.solve(v.T, rhs)


def make_grid(n_radial: int, n_angular: int) -> DiscGrid:
    """Build the polar grid.  Requires n_radial >= 4 and even n_angular >= 8."""
    if n_radial < 4:
        raise GridError(f"n_radial must be >= 4, got {n_radial}")
    if n_angular < 8:
        raise GridError(f"n_angular must be >= 8, got {n_angular}")
    if n_angular % 2 != 0:
        raise GridError(f"n_angular must be even, got {n_angular}")

    n_poly = 2 * n_radial - 1
    x, d = _cheb_lobatto(n_poly)
    # positive nodes are q = 0 .. n_radial-1 in decreasing order
    radii = x[n_radial - 1 :: -1].copy()
    angles = TWO_PI * np.arange(n_angular) / n_angular

    w_rad = _radial_weights(radii)  # integrates G(s) over [0,1]
    weights = np.repeat(np.pi * w_rad / n_angular, n_angular)

    boundary = np.arange((n_radial - 1) * n_angular, n_radial * n_angular)
    grid = DiscGrid(
        n_radial=n_radial,
        n_angular=n_angular,
        radii=radii,
        angles=angles,
        weights=weights,
        boundary_nodes=boundary,
    )
    grid._cache["lobatto_x"] = x
    grid._cache["lobatto_d"] = d
    return grid


def _diff_blocks(grid: DiscGrid) -> tuple[np.ndarray, np.ndarray]:
    """Radial differentiation blocks D_pp, D_pm in ascending-radius order.

    d/dr u(r_i, theta) = (D_pp @ u(., theta))_i + (D_pm @ u(., theta+pi))_i
    where the second block reaches across the origin to the mirrored ray.
    """
    if "diff_blocks" not in grid._cache:
        n_r = grid.n_radial
        n_poly = 2 * n_r - 1
        d = grid._cache["lobatto_d"]
        pos = np.array([n_r - 1 - i for i in range(n_r)])  # Lobatto index of r_i
        mir = n_poly - pos  # Lobatto index of -r_i
        d_pp = d[np.ix_(pos, pos)]
        d_pm = d[np.ix_(pos, mir)]
        grid._cache["diff_blocks"] = (d_pp, d_pm)
    return grid._cache["diff_blocks"]


def _angular_multiplier(grid: DiscGrid) -> np.ndarray:
    """i*m multipliers for the angular derivative, Nyquist mode zeroed."""
    if "ang_mult" not in grid._cache:
        m = grid.angular_modes().astype(float)
        mult = 1j * m
        mult[grid.angular_modes() == -grid.n_angular // 2] = 0.0
        grid._cache["ang_mult"] = mult
    return grid._cache["ang_mult"]


def polar_derivatives(grid: DiscGrid, arr: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(d/dr, d/dtheta) of nodal data with trailing axes (n_radial, n_angular)."""
    n2 = grid.n_angular // 2
    d_pp, d_pm = _diff_blocks(grid)
    shifted = np.roll(arr, -n2, axis=-1)  # value at theta + pi
    u_r = np.einsum("ij,...ja->...ia", d_pp, arr) + np.einsum(
        "ij,...ja->...ia", d_pm, shifted
    )
    u_hat = np.fft.fft(arr, axis=-1)
    u_th = np.fft.ifft(u_hat * _angular_multiplier(grid), axis=-1)
    return u_r, u_th


def wirtinger(grid: DiscGrid, arr: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Wirtinger derivatives (d/dzeta, d/dzetabar) of nodal data.

    ``arr`` has trailing axes (n_radial, n_angular); leading axes are batch.
    """
    u_r, u_th = polar_derivatives(grid, arr)
    r = grid.radii[:, None]
    phase = np.exp(1j * grid.angles)[None, :]
    fz = 0.5 * (u_r - 1j * u_th / r) / phase
    fzb = 0.5 * (u_r + 1j * u_th / r) * phase
    return fz, fzb


@dataclass(eq=False)
class DiscMap:
    """A sampled map from the closed disc into C^dim.

    ``values`` has shape (n_nodes, dim), node-major, all entries finite.
    """

    grid: DiscGrid
    dim: int
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=complex)
        if vals.ndim == 1:
            vals = vals[:, None]
        if vals.shape != (self.grid.n_nodes, self.dim):
            raise GridError(
                f"values shape {vals.shape} != ({self.grid.n_nodes}, {self.dim})"
            )
        if not np.all(np.isfinite(vals)):
            raise GridError("DiscMap values must be finite")
        self.values = vals

    # nodal layout helpers -------------------------------------------------
    def as_polar(self) -> np.ndarray:
        """Values with axes (dim, n_radial, n_angular)."""
        g = self.grid
        return self.values.reshape(g.n_radial, g.n_angular, self.dim).transpose(2, 0, 1)

    @classmethod
    def from_polar(cls, grid: DiscGrid, arr: np.ndarray) -> "DiscMap":
        dim = arr.shape[0]
        vals = arr.transpose(1, 2, 0).reshape(grid.n_nodes, dim)
        return cls(grid, dim, vals)

    # arithmetic -----------------------------------------------------------
    def _check_compatible(self, other: "DiscMap"):
        if self.grid is not other.grid or self.dim != other.dim:
            raise GridError("DiscMap operands live on different grids or dims")

    def __add__(self, other: "DiscMap") -> "DiscMap":
        self._check_compatible(other)
        return DiscMap(self.grid, self.dim, self.values + other.values)

    def __sub__(self, other: "DiscMap") -> "DiscMap":
        self._check_compatible(other)
        return DiscMap(self.grid, self.dim, self.values - other.values)

    def __mul__(self, c) -> "DiscMap":
        return DiscMap(self.grid, self.dim, self.values * c)

    __rmul__ = __mul__

    def __neg__(self) -> "DiscMap":
        return DiscMap(self.grid, self.dim, -self.values)

    def copy(self) -> "DiscMap":
        return DiscMap(self.grid, self.dim, self.values.copy())

    def at(self, points) -> np.ndarray:
        return interpolate(self, points)

    # serialization ----------------------------------------------------------
    def to_json(self) -> str:
        flat = self.values.reshape(-1)
        pairs = [[float(v.real), float(v.imag)] for v in flat]
        doc = {
            "n_radial": self.grid.n_radial,
            "n_angular": self.grid.n_angular,
            "dim": self.dim,
            "values": pairs,
        }
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str, grid: DiscGrid | None = None) -> "DiscMap":
        doc = json.loads(text)
        if grid is None:
            grid = make_grid(int(doc["n_radial"]), int(doc["n_angular"]))
        elif (grid.n_radial, grid.n_angular) != (doc["n_radial"], doc["n_angular"]):
            raise GridError("grid sizes do not match serialized DiscMap")
        dim = int(doc["dim"])
        pairs = np.asarray(doc["values"], dtype=float)
        vals = (pairs[:, 0] + 1j * pairs[:, 1]).reshape(grid.n_nodes, dim)
        return cls(grid, dim, vals)

    def to_csv(self) -> str:
        g = self.grid
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["radius", "angle", "component_index", "re", "im"])
        for p in range(g.n_nodes):
            i_r, i_a = divmod(p, g.n_angular)
            for c in range(self.dim):
                v = self.values[p, c]
                writer.writerow(
                    [
                        repr(float(g.radii[i_r])),
                        repr(float(g.angles[i_a])),
                        c,
                        repr(float(v.real)),
                        repr(float(v.imag)),
                    ]
                )
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, grid: DiscGrid, dim: int) -> "DiscMap":
        rows = list(csv.reader(io.StringIO(text)))
        if rows and rows[0][:1] == ["radius"]:
            rows = rows[1:]
        if len(rows) != grid.n_nodes * dim:
            raise GridError("CSV row count does not match grid size")
        vals = np.zeros((grid.n_nodes, dim), dtype=complex)
        for k, row in enumerate(rows):
            p, c = divmod(k, dim)
            vals[p, int(row[2])] = float(row[3]) + 1j * float(row[4])
        return cls(grid, dim, vals)


def make_disc_map(grid: DiscGrid, fn, dim: int | None = None) -> DiscMap:
    """Sample fn(zeta) -> scalar or length-dim vector on the grid nodes."""
    z = grid.points()
    vals = np.asarray(fn(z), dtype=complex)
    if vals.ndim == 1:
        vals = vals[:, None]
    elif vals.shape[0] != grid.n_nodes:
        vals = vals.T
    if dim is not None and vals.shape[1] != dim:
        raise GridError(f"sampled dim {vals.shape[1]} != requested {dim}")
    return DiscMap(grid, vals.shape[1], vals)


def differentiate(f: DiscMap) -> tuple[DiscMap, DiscMap]:
    """Spectral Wirtinger derivatives (f_zeta, f_zetabar) of a DiscMap."""
    fz, fzb = wirtinger(f.grid, f.as_polar())
    return DiscMap.from_polar(f.grid, fz), DiscMap.from_polar(f.grid, fzb)


def integrate(f: DiscMap) -> np.ndarray:
    """Componentwise area integral over the disc."""
    return f.grid.weights @ f.values


def inner_product(f: DiscMap, g: DiscMap) -> complex:
    """sum_j integral of f_j * conj(g_j) over the disc."""
    f._check_compatible(g)
    return complex(np.sum(f.grid.weights[:, None] * f.values * np.conj(g.values)))


def sup_abs(f: DiscMap) -> float:
    """Max over nodes of the euclidean norm of the value vector."""
    return float(np.max(np.linalg.norm(f.values, axis=1)))


def dbar_residual(f: DiscMap) -> float:
    """Sup norm of f_zetabar; small iff f is holomorphic on the grid."""
    _, fzb = differentiate(f)
    return sup_abs(fzb)


@dataclass(frozen=True)
class HolderConfig:
    """Exponent and sampling budget for the discrete Holder seminorm.

    The pairwise quotient is subsampled at stratified dyadic distances; the
    estimate is a lower bound for the true seminorm and is reported as such.
    """

    alpha: float = 0.5
    pair_budget: int = 2048

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise GridError(f"alpha must lie in (0,1), got {self.alpha}")


def _nearest_node_index(grid: DiscGrid, z: np.ndarray) -> np.ndarray:
    rho = np.clip(np.abs(z), grid.radii[0], 1.0)
    phi = np.mod(np.angle(z), TWO_PI)
    mids = 0.5 * (grid.radii[1:] + grid.radii[:-1])
    i_r = np.searchsorted(mids, rho)
    i_a = np.mod(np.rint(phi * grid.n_angular / TWO_PI).astype(int), grid.n_angular)
    return i_r * grid.n_angular + i_a


def holder_norm(f: DiscMap, cfg: HolderConfig | None = None, seed: int = 0) -> float:
    """Discrete C^{1,alpha} norm estimate: sup|f| + sup|df| + sampled quotient.

    Homogeneous of degree one in f.  The quotient term samples pair_budget
    node pairs at stratified dyadic distances plus all neighbor pairs on the
    boundary ring, so the very smallest separations are always represented.
    """
    if cfg is None:
        cfg = HolderConfig()
    fz, fzb = differentiate(f)
    df = np.concatenate([fz.values, fzb.values], axis=1)  # (M, 2 dim)
    v0 = sup_abs(f)
    v1 = float(np.max(np.linalg.norm(df, axis=1)))

    pts = f.grid.points()
    m = f.grid.n_nodes
    rng = np.random.default_rng(seed)
    levels = 6
    per = max(1, cfg.pair_budget // levels)
    p_list, q_list = [], []
    for lev in range(levels):
        p = rng.integers(0, m, size=per)
        delta = 2.0 ** (-lev) * rng.uniform(0.5, 1.0, size=per)
        beta = rng.uniform(0.0, TWO_PI, size=per)
        target = pts[p] + delta * np.exp(1j * beta)
        inside = np.abs(target) <= 1.0
        q = _nearest_node_index(f.grid, target[inside])
        p_list.append(p[inside])
        q_list.append(q)
    # deterministic short-range pairs along the boundary ring
    b = f.grid.boundary_nodes
    p_list.append(b)
    q_list.append(np.roll(b, 1))
    p_idx = np.concatenate(p_list)
    q_idx = np.concatenate(q_list)
    keep = p_idx != q_idx
    p_idx, q_idx = p_idx[keep], q_idx[keep]
    if len(p_idx) == 0:
        return v0 + v1
    dist = np.abs(pts[p_idx] - pts[q_idx])
    quot = np.linalg.norm(df[p_idx] - df[q_idx], axis=1) / dist**cfg.alpha
    return v0 + v1 + float(np.max(quot))


def _bary_weights(n_poly: int) -> np.ndarray:
    w = (-1.0) ** np.arange(n_poly + 1)
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


def barycentric_matrix(grid: DiscGrid, rho: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Evaluation matrices for the glued radial interpolant at radii rho.

    Returns (E_pos, E_neg) of shape (len(rho), n_radial): the interpolant of
    mode data c with parity sigma is (E_pos + sigma * E_neg) @ c.
    """
    n_r = grid.n_radial
    n_poly = 2 * n_r - 1
    x = grid._cache["lobatto_x"]
    w = _bary_weights(n_poly)
    diff = rho[:, None] - x[None, :]
    exact = np.abs(diff) < 1e-14
    diff = np.where(exact, 1.0, diff)
    terms = w[None, :] / diff
    denom = terms.sum(axis=1)
    basis = terms / denom[:, None]
    # rows hitting a node exactly: delta row
    hit = exact.any(axis=1)
    if np.any(hit):
        basis[hit] = 0.0
        basis[hit, np.argmax(exact[hit], axis=1)] = 1.0
    pos = np.array([n_r - 1 - i for i in range(n_r)])
    mir = n_poly - pos
    return basis[:, pos], basis[:, mir]


def interpolate(f: DiscMap, points) -> np.ndarray:
    """Evaluate the spectral interpolant of f at complex points |z| <= 1.

    Fourier in angle, glued Chebyshev polynomial in radius (the two rays
    theta and theta+pi form one smooth diameter function).  Returns an array
    of shape (len(points), dim).
    """
    z = np.atleast_1d(np.asarray(points, dtype=complex))
    rho = np.abs(z)
    if np.any(rho > 1.0 + 1e-12):
        raise GridError("interpolation point outside the closed disc")
    rho = np.clip(rho, 0.0, 1.0)
    phi = np.angle(z)

    g = f.grid
    arr = f.as_polar()  # (dim, n_r, n_ang)
    coeff = np.fft.fft(arr, axis=-1) / g.n_angular  # (dim, n_r, modes)
    modes = g.angular_modes()
    e_pos, e_neg = barycentric_matrix(g, rho)  # (P, n_r)
    sigma = np.where(modes % 2 == 0, 1.0, -1.0)  # parity of each mode
    # radial value of each mode at each rho
    rad_pos = np.einsum("pj,djm->pdm", e_pos, coeff)
    rad_neg = np.einsum("pj,djm->pdm", e_neg, coeff)
    rad = rad_pos + sigma[None, None, :] * rad_neg
    phase = np.exp(1j * np.outer(phi, modes))  # (P, modes)
    out = np.einsum("pdm,pm->pd", rad, phase)
    return out
