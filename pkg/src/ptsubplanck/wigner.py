"""Wigner distributions of well states on a rectangular phase-space grid.

    W(x, p) = (1/pi) int chi*(x - z) chi(x + z) exp(-2 i p z) dz

The wavefunction vanishes outside the well, so at each ``x`` the integral runs
over ``|z| <= min(x, pi/(2 alpha) - x)``.

Two evaluation paths are provided.  :func:`wigner_direct` is the reference:
composite Simpson in ``z`` with the integrand evaluated from the eigenfunction
sum at every node.  :func:`wigner_fast` samples ``chi`` once on a fine grid
commensurate with the ``x`` grid and evaluates every row with a chirp-z
transform, which lands exactly on an arbitrary momentum grid.
"""

from __future__ import annotations

import io
import math
import struct
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import simpson, trapezoid
from scipy.signal import czt

from .ptcore import CoefficientState, DomainError, PTParams, position_wavefunction

DEFAULT_NX = 512
DEFAULT_NP = 512
#: complex samples allowed in one row of the direct quadrature (np * nz)
DIRECT_MEMORY_CAP = 2**26
_MAGIC = b"PTWF"


class ResolutionError(RuntimeError):
    """The requested sampling criterion cannot be met within the memory cap."""


def occupied_level(state: CoefficientState, threshold: float = 1e-8) -> int:
    """Largest level with ``|c_n|^2`` above ``threshold``."""
    idx = np.nonzero(np.abs(state.coeffs) ** 2 > threshold)[0]
    return int(idx[-1]) if idx.size else 0


def momentum_scale(params: PTParams, n: int) -> float:
    """Classical momentum ``sqrt(2 E_n)`` at level ``n``."""
    return params.alpha * (2.0 * n + params.eta)


def default_p_max(state: CoefficientState) -> float:
    return 1.2 * momentum_scale(state.params, occupied_level(state))


@dataclass(frozen=True)
class PhaseSpaceGrid:
    """Closed-well ``x`` samples times a uniform momentum range."""

    params: PTParams
    nx: int = DEFAULT_NX
    np_: int = DEFAULT_NP
    p_min: float = -1.0
    p_max: float = 1.0

    def __post_init__(self):
        if self.nx < 16 or self.np_ < 16:
            raise ValueError("grids need at least 16 samples per axis")
        if not self.p_max > self.p_min:
            raise ValueError("p_max must exceed p_min")

    @classmethod
    def for_state(cls, state: CoefficientState, nx: int = DEFAULT_NX, np_: int = DEFAULT_NP,
                  p_max: float | None = None) -> "PhaseSpaceGrid":
        pm = default_p_max(state) if p_max is None else float(p_max)
        return cls(state.params, nx, np_, -pm, pm)

    @property
    def x_min(self) -> float:
        return 0.0

    @property
    def x_max(self) -> float:
        return self.params.width

    @property
    def x(self) -> np.ndarray:
        return np.linspace(0.0, self.params.width, self.nx)

    @property
    def p(self) -> np.ndarray:
        return np.linspace(self.p_min, self.p_max, self.np_)

    @property
    def dx(self) -> float:
        return self.params.width / (self.nx - 1)

    @property
    def dp(self) -> float:
        return (self.p_max - self.p_min) / (self.np_ - 1)

    def same_as(self, other: "PhaseSpaceGrid") -> bool:
        return (
            self.nx == other.nx
            and self.np_ == other.np_
            and np.isclose(self.x_max, other.x_max, rtol=0, atol=1e-14)
            and self.p_min == other.p_min
            and self.p_max == other.p_max
        )


@dataclass(frozen=True, eq=False)
class WignerField:
    """Samples ``values[i, j] = W(x_i, p_j)``, x-outer."""

    grid: PhaseSpaceGrid
    values: np.ndarray = field(repr=False)
    imag_residue: float = 0.0

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.nx, self.grid.np_):
            raise ValueError(f"values shape {v.shape} does not match grid")
        if not np.all(np.isfinite(v)):
            raise ValueError("Wigner samples must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def total(self) -> float:
        return float(trapezoid(trapezoid(self.values, self.grid.p, axis=1), self.grid.x))

    def section(self, p0: float = 0.0) -> np.ndarray:
        """``W(x, p0)`` by linear interpolation between momentum columns."""
        p = self.grid.p
        j = int(np.clip(np.searchsorted(p, p0) - 1, 0, p.size - 2))
        t = (p0 - p[j]) / (p[j + 1] - p[j])
        return (1.0 - t) * self.values[:, j] + t * self.values[:, j + 1]

    def to_bytes(self) -> bytes:
        """Header ``nx, np`` (uint64) and bounds (float64), then row-major float64 payload."""
        g = self.grid
        head = _MAGIC + struct.pack("<QQdddd", g.nx, g.np_, g.x_min, g.x_max, g.p_min, g.p_max)
        return head + self.values.astype("<f8").tobytes(order="C")

    @classmethod
    def from_bytes(cls, blob: bytes, params: PTParams) -> "WignerField":
        if blob[:4] != _MAGIC:
            raise ValueError("not a Wigner field blob")
        nx, np_, x_min, x_max, p_min, p_max = struct.unpack_from("<QQdddd", blob, 4)
        if not math.isclose(x_max, params.width, rel_tol=0, abs_tol=1e-14) or x_min != 0.0:
            raise ValueError("field bounds do not match the supplied potential")
        offset = 4 + struct.calcsize("<QQdddd")
        values = np.frombuffer(blob, dtype="<f8", count=nx * np_, offset=offset).reshape(nx, np_)
        return cls(PhaseSpaceGrid(params, nx, np_, p_min, p_max), values.copy())

    def to_csv(self, fh: io.TextIOBase) -> None:
        fh.write("x,p,w\n")
        p = self.grid.p
        for xi, row in zip(self.grid.x, self.values):
            for pj, w in zip(p, row):
                fh.write(f"{xi:.17g},{pj:.17g},{w:.17g}\n")


def _z_wavenumber(state: CoefficientState, grid: PhaseSpaceGrid) -> float:
    """Largest angular frequency of the integrand in ``z``."""
    p_state = 1.2 * momentum_scale(state.params, state.n_max)
    p_grid = max(abs(grid.p_min), abs(grid.p_max))
    return 2.0 * (p_state + p_grid)


def _check_grid(state: CoefficientState, grid: PhaseSpaceGrid) -> None:
    if grid.params != state.params:
        raise DomainError("grid and state belong to different potentials")


def wigner_direct(state: CoefficientState, grid: PhaseSpaceGrid, *, points_per_wavelength: int = 8,
                  memory_cap: int = DIRECT_MEMORY_CAP) -> WignerField:
    """Reference Wigner field by composite Simpson quadrature in ``z``."""
    _check_grid(state, grid)
    L = grid.params.width
    xs = grid.x
    ps = grid.p
    wavelength = 2.0 * math.pi / _z_wavenumber(state, grid)
    half = np.minimum(xs, L - xs)
    nz = np.maximum(np.ceil(2.0 * half / wavelength * points_per_wavelength).astype(int), 2)
    nz += 1 - nz % 2  # Simpson wants an odd node count
    if nz.max() * grid.np_ > memory_cap:
        raise ResolutionError(
            f"direct quadrature needs {nz.max()} z-nodes x {grid.np_} momenta, above cap {memory_cap}"
        )
    out = np.zeros((grid.nx, grid.np_))
    resid = 0.0
    for i, x in enumerate(xs):
        if half[i] <= 0.0:
            continue
        z = np.linspace(-half[i], half[i], nz[i])
        # clip rounding excursions past the walls
        left = np.clip(x - z, 0.0, L)
        right = np.clip(x + z, 0.0, L)
        f = np.conj(position_wavefunction(state, left)) * position_wavefunction(state, right)
        kernel = np.exp(-2j * np.outer(ps, z))
        row = simpson(kernel * f, x=z, axis=1) / math.pi
        resid = max(resid, float(np.max(np.abs(row.imag))))
        out[i] = row.real
    return WignerField(grid, out, resid)


def _fine_factor(state: CoefficientState, grid: PhaseSpaceGrid, points_per_wavelength: float) -> int:
    h_target = 2.0 * math.pi / _z_wavenumber(state, grid) / points_per_wavelength
    return max(1, math.ceil(grid.dx / h_target))


def wigner_fast(state: CoefficientState, grid: PhaseSpaceGrid, *, points_per_wavelength: float = 4.0) -> WignerField:
    """Wigner field with one chirp-z transform per ``x`` row (batched)."""
    _check_grid(state, grid)
    m = _fine_factor(state, grid, points_per_wavelength)
    M = (grid.nx - 1) * m
    h = grid.params.width / M
    fine = np.linspace(0.0, grid.params.width, M + 1)
    chi = position_wavefunction(state, fine)

    J = M // 2
    j = np.arange(-J, J + 1)
    centers = np.arange(grid.nx) * m
    lo = centers[:, None] - j[None, :]
    hi = centers[:, None] + j[None, :]
    valid = (lo >= 0) & (hi <= M)
    lo = np.clip(lo, 0, M)
    hi = np.clip(hi, 0, M)
    corr = np.where(valid, np.conj(chi[lo]) * chi[hi], 0.0)

    # sum_n f_n exp(-2 i p_k (n - J) h), p_k = p_min + k dp
    a = np.exp(2j * grid.p_min * h)
    w = np.exp(-2j * grid.dp * h)
    rows = czt(corr, m=grid.np_, w=w, a=a, axis=1)
    rows *= np.exp(2j * grid.p * J * h)[None, :]
    rows *= h / math.pi
    return WignerField(grid, rows.real, float(np.max(np.abs(rows.imag))))


def wigner(state: CoefficientState, grid: PhaseSpaceGrid | None = None, *, direct: bool = False) -> WignerField:
    grid = PhaseSpaceGrid.for_state(state) if grid is None else grid
    return wigner_direct(state, grid) if direct else wigner_fast(state, grid)


def marginals(field: WignerField) -> tuple[np.ndarray, np.ndarray]:
    """Position density ``int W dp`` and momentum density ``int W dx``."""
    g = field.grid
    return trapezoid(field.values, g.p, axis=1), trapezoid(field.values, g.x, axis=0)


def moments(field: WignerField) -> dict:
    """Means and variances of ``x`` and ``p`` from the field."""
    g = field.grid
    x, p = g.x, g.p
    rho_x, rho_p = marginals(field)
    norm = trapezoid(rho_x, x)
    mx = trapezoid(x * rho_x, x) / norm
    mp = trapezoid(p * rho_p, p) / norm
    vx = trapezoid((x - mx) ** 2 * rho_x, x) / norm
    vp = trapezoid((p - mp) ** 2 * rho_p, p) / norm
    return {"mean_x": float(mx), "mean_p": float(mp), "var_x": float(max(vx, 0.0)),
            "var_p": float(max(vp, 0.0))}
