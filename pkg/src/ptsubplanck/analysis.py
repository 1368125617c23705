"""Phase-space metrology: classical action, sub-Planck tiles, scaling fits, overlaps."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy.integrate import trapezoid

from .ptcore import (
    CoefficientState,
    PTParams,
    basis_matrix,
    coherent_coefficients,
    evolve_fraction,
    position_wavefunction,
)
from .wigner import PhaseSpaceGrid, WignerField, default_p_max, moments, wigner_fast

#: fraction of each grid span searched around the seed
TILE_WINDOW = 0.10
TILE_FLOOR = 1e-6


class TileError(RuntimeError):
    """No usable interference extremum, or a zero-crossing walk left the grid."""


class FitError(ValueError):
    """Too few usable points for a regression."""


class GridMismatchError(ValueError):
    pass


class ParamsMismatchError(ValueError):
    pass


# -- operator matrices --------------------------------------------------------------

@dataclass(frozen=True)
class PhaseOperators:
    """Matrices of ``x``, ``x^2``, ``p``, ``p^2`` over levels ``0..n_max``."""

    x: np.ndarray
    x2: np.ndarray
    p: np.ndarray
    p2: np.ndarray

    @property
    def n_max(self) -> int:
        return self.x.shape[0] - 1


@lru_cache(maxsize=32)
def phase_operators(params: PTParams, n_max: int) -> PhaseOperators:
    """Assemble the matrices once per ``(params, n_max)`` by Gauss-Legendre quadrature.

    ``p`` uses the analytic derivative of the eigenfunctions; ``p^2`` is
    ``<psi_m'|psi_n'>``, valid because every eigenfunction vanishes at both walls.
    """
    L = params.width
    # node count well beyond the highest polynomial degree present
    nodes = max(256, 4 * n_max + 2 * int(params.eta) + 64)
    t, wq = np.polynomial.legendre.leggauss(nodes)
    xs = 0.5 * L * (t + 1.0)
    wq = 0.5 * L * wq
    psi, dpsi = basis_matrix(params, n_max, xs, derivative=True)
    pw = psi * wq
    X = pw @ (psi * xs).T
    X2 = pw @ (psi * xs**2).T
    D = pw @ dpsi.T
    P = -1j * D
    P = 0.5 * (P + P.conj().T)
    P2 = (dpsi * wq) @ dpsi.T
    return PhaseOperators(X, X2, P, P2)


def coefficient_moments(state: CoefficientState) -> dict:
    ops = phase_operators(state.params, state.n_max)
    c = state.coeffs
    ex = float(np.real(np.vdot(c, ops.x @ c)))
    ex2 = float(np.real(np.vdot(c, ops.x2 @ c)))
    ep = float(np.real(np.vdot(c, ops.p @ c)))
    ep2 = float(np.real(np.vdot(c, ops.p2 @ c)))
    return {"mean_x": ex, "mean_p": ep, "var_x": max(ex2 - ex * ex, 0.0), "var_p": max(ep2 - ep * ep, 0.0)}


def classical_action(state: CoefficientState) -> float:
    """Uncertainty product ``dx * dp`` in units of hbar."""
    m = coefficient_moments(state)
    return math.sqrt(m["var_x"] * m["var_p"])


# -- tiles --------------------------------------------------------------------------

@dataclass(frozen=True)
class TileMeasurement:
    center: tuple[float, float]
    dx_span: float
    dp_span: float
    extremum: float

    @property
    def area(self) -> float:
        return self.dx_span * self.dp_span


def _boundary(values: np.ndarray, coords: np.ndarray, start: int, step: int, stop: int,
              touch: float = 0.1) -> float:
    """Nearest tile edge walking from ``start`` towards ``stop``.

    An edge is a sign change of ``values`` (linear interpolation), or a local
    minimum of ``|values|`` below ``touch`` times the starting magnitude, where
    neighbouring fringes meet without crossing zero (parabolic vertex).
    """
    s0 = np.sign(values[start])
    ref = abs(values[start])
    k = start
    while k != stop:
        nxt = k + step
        if np.sign(values[nxt]) != s0:
            v0, v1 = values[k], values[nxt]
            frac = v0 / (v0 - v1)
            return float(coords[k] + frac * (coords[nxt] - coords[k]))
        if 0 < nxt < values.size - 1 and np.sign(values[nxt + step]) == s0:
            y0, y1, y2 = abs(values[nxt - 1]), abs(values[nxt]), abs(values[nxt + 1])
            if y1 <= y0 and y1 <= y2 and y1 < touch * ref:
                den = y0 - 2.0 * y1 + y2
                off = 0.5 * (y0 - y2) / den if den > 0 else 0.0
                return float(coords[nxt] + off * (coords[1] - coords[0]))
        k = nxt
    raise TileError("zero-crossing walk reached the grid edge")


def measure_tile(field: WignerField, seed: tuple[float, float] | None = None) -> TileMeasurement:
    """Zero-crossing spans of the interference extremum nearest ``seed``.

    The extremum is the local maximum of ``|W|`` closest to the seed (default:
    the phase-space centroid) inside a window of 10% of each grid span; spans
    are measured along the grid row and column through it.
    """
    g = field.grid
    x, p = g.x, g.p
    W = field.values
    if seed is None:
        m = moments(field)
        seed = (m["mean_x"], m["mean_p"])
    hx = 0.5 * TILE_WINDOW * (x[-1] - x[0])
    hp = 0.5 * TILE_WINDOW * (p[-1] - p[0])
    i_lo, i_hi = np.searchsorted(x, seed[0] - hx), np.searchsorted(x, seed[0] + hx, side="right") - 1
    j_lo, j_hi = np.searchsorted(p, seed[1] - hp), np.searchsorted(p, seed[1] + hp, side="right") - 1
    i_lo, j_lo = max(i_lo, 1), max(j_lo, 1)
    i_hi, j_hi = min(i_hi, g.nx - 2), min(j_hi, g.np_ - 2)
    if i_hi <= i_lo or j_hi <= j_lo:
        raise TileError("search window is empty")
    A = np.abs(W)
    sub = A[i_lo:i_hi + 1, j_lo:j_hi + 1]
    if sub.max() < TILE_FLOOR:
        raise TileError("|W| below floor throughout the window")
    core = sub[1:-1, 1:-1]
    is_peak = (
        (core >= sub[:-2, 1:-1]) & (core >= sub[2:, 1:-1])
        & (core >= sub[1:-1, :-2]) & (core >= sub[1:-1, 2:])
        & (core >= TILE_FLOOR)
    )
    ii, jj = np.nonzero(is_peak)
    if ii.size == 0:
        raise TileError("no local extremum of |W| inside the window")
    ii = ii + i_lo + 1
    jj = jj + j_lo + 1
    # nearest in grid-normalized distance; ties broken by larger |W| then index order
    d = ((x[ii] - seed[0]) / (x[-1] - x[0])) ** 2 + ((p[jj] - seed[1]) / (p[-1] - p[0])) ** 2
    order = np.lexsort((-A[ii, jj], d))
    i, j = int(ii[order[0]]), int(jj[order[0]])

    row = W[:, j]
    col = W[i, :]
    # the window bounds the extremum search only; low-action tiles can be wider
    x_right = _boundary(row, x, i, +1, g.nx - 1)
    x_left = _boundary(row, x, i, -1, 0)
    p_up = _boundary(col, p, j, +1, g.np_ - 1)
    p_down = _boundary(col, p, j, -1, 0)
    return TileMeasurement((float(x[i]), float(p[j])), x_right - x_left, p_up - p_down, float(W[i, j]))


def tile_grid(state: CoefficientState, nx: int = 1025, np_: int = 2049) -> PhaseSpaceGrid:
    """Default-extent grid, sampled densely enough to resolve the central tiles."""
    return PhaseSpaceGrid.for_state(state, nx, np_)


# -- scaling ------------------------------------------------------------------------

@dataclass(frozen=True)
class ScalingFit:
    points: tuple[tuple[float, float], ...]
    betas: tuple[float, ...]
    slope: float
    intercept: float
    r_squared: float


def fit_power_law(A, a) -> tuple[float, float, float]:
    """Least squares of ``ln a`` on ``ln A``: ``(slope, intercept, r^2)``."""
    A = np.asarray(A, dtype=float)
    a = np.asarray(a, dtype=float)
    if A.size < 3:
        raise FitError(f"need at least 3 points, got {A.size}")
    if np.any(A <= 0) or np.any(a <= 0):
        raise FitError("power-law fit needs positive values")
    lx, ly = np.log(A), np.log(a)
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), r2


def sweep_point(params: PTParams, beta: float, frac, *, grid_kw: dict | None = None) -> dict:
    state = evolve_fraction(coherent_coefficients(params, beta), Fraction(frac))
    A = classical_action(state)
    field = wigner_fast(state, tile_grid(state, **(grid_kw or {})))
    tile = measure_tile(field)
    return {"beta": float(beta), "A": A, "a": tile.area, "product": A * tile.area, "tile": tile}


def scaling_sweep(params: PTParams, betas, frac=Fraction(1, 8), *, grid_kw: dict | None = None,
                  workers: int | None = None):
    """Per-beta action and tile area plus the log-log fit; rows sorted by beta."""
    betas = sorted(float(b) for b in betas)
    for b in betas:
        if not 0.0 < b < 1.0:
            raise ValueError(f"beta must lie in (0, 1), got {b}")
    if len(betas) < 3:
        raise FitError(f"need at least 3 points, got {len(betas)}")
    if workers and workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(workers) as pool:
            rows = list(pool.map(sweep_point, [params] * len(betas), betas, [frac] * len(betas),
                                 [grid_kw] * len(betas)))
    else:
        rows = [sweep_point(params, b, frac, grid_kw=grid_kw) for b in betas]
    slope, intercept, r2 = fit_power_law([r["A"] for r in rows], [r["a"] for r in rows])
    fit = ScalingFit(tuple((r["A"], r["a"]) for r in rows), tuple(betas), slope, intercept, r2)
    return fit, rows


# -- overlaps -----------------------------------------------------------------------

def overlap_coeff(a: CoefficientState, b: CoefficientState) -> complex:
    """``<a|b>`` in the eigenbasis; the shorter vector is zero-padded."""
    if a.params != b.params:
        raise ParamsMismatchError("overlap needs states of the same potential")
    n = min(a.n_max, b.n_max) + 1
    return complex(np.vdot(a.coeffs[:n], b.coeffs[:n]))


def overlap_wigner(a: WignerField, b: WignerField) -> float:
    """``2 pi hbar * int int W_a W_b dx dp``, equal to ``|<a|b>|^2`` for pure states."""
    if not a.grid.same_as(b.grid):
        raise GridMismatchError("overlap needs identical grids")
    g = a.grid
    prod = a.values * b.values
    return float(2.0 * math.pi * trapezoid(trapezoid(prod, g.p, axis=1), g.x))


def beta_for_peak(params: PTParams, level: int, lo: float = 1e-3, hi: float = 0.999) -> float:
    """Smallest ``beta`` whose weights ``|d_n|^2`` peak at ``level``, nudged to the middle of its band."""
    def peak(b):
        return coherent_coefficients(params, b).peak_level()

    def edge(target):
        a, b = lo, hi
        for _ in range(60):
            mid = 0.5 * (a + b)
            if peak(mid) >= target:
                b = mid
            else:
                a = mid
        return b

    b0, b1 = edge(level), edge(level + 1)
    return 0.5 * (b0 + b1)


def overlap_position(a: CoefficientState, b: CoefficientState, nodes: int | None = None) -> complex:
    """``<a|b>`` by Gauss-Legendre quadrature in ``x``; the states may belong to different wells of equal width."""
    L = a.params.width
    if not math.isclose(L, b.params.width, rel_tol=1e-14):
        raise ParamsMismatchError("position overlap needs wells of equal width")
    nodes = nodes or max(512, 4 * max(a.n_max, b.n_max) + 2 * int(max(a.params.eta, b.params.eta)) + 64)
    t, w = np.polynomial.legendre.leggauss(nodes)
    xs = 0.5 * L * (t + 1.0)
    return complex(0.5 * L * np.sum(w * np.conj(position_wavefunction(a, xs)) * position_wavefunction(b, xs)))


# -- asymmetry experiment -----------------------------------------------------------

def section_extrema(xs: np.ndarray, v: np.ndarray, lo: float, hi: float, floor: float = 0.1):
    """Local extrema of ``v`` in ``[lo, hi]`` as ``(x, value, polarity)``, parabola-refined.

    Polarity is the sign of the value, except for extrema weaker than ``floor``
    times the largest ``|v|`` in the window (fringes that only touch zero),
    which take +1 for a maximum and -1 for a minimum.
    """
    idx = np.nonzero((xs >= lo) & (xs <= hi))[0]
    idx = idx[(idx > 0) & (idx < xs.size - 1)]
    if idx.size == 0:
        return []
    top = np.max(np.abs(v[idx]))
    out = []
    h = xs[1] - xs[0]
    for i in idx:
        y0, y1, y2 = v[i - 1], v[i], v[i + 1]
        is_max = y1 > y0 and y1 >= y2
        if is_max or (y1 < y0 and y1 <= y2):
            den = y0 - 2.0 * y1 + y2
            off = 0.5 * (y0 - y2) / den if den != 0 else 0.0
            val = float(y1 - 0.25 * (y0 - y2) * off)
            pol = (1 if is_max else -1) if abs(val) < floor * top else int(np.sign(val))
            out.append((float(xs[i] + off * h), val, pol))
    return out


@dataclass(frozen=True)
class AsymmetryReport:
    sym: PTParams
    asym: PTParams
    beta_sym: float
    beta_asym: float
    overlap_wigner: float
    overlap_position: float
    x: np.ndarray = field(repr=False)
    section_sym: np.ndarray = field(repr=False)
    section_asym: np.ndarray = field(repr=False)
    central: tuple[float, float]
    shift: float
    drift: float
    tile_dx_span: float

    def to_dict(self) -> dict:
        return {
            "params": {"sym": self.sym.as_dict(), "asym": self.asym.as_dict()},
            "beta": {"sym": self.beta_sym, "asym": self.beta_asym},
            "overlap_wigner": self.overlap_wigner,
            "overlap_position": self.overlap_position,
            "central_extremum": list(self.central),
            "shift": self.shift,
            "drift": self.drift,
            "tile_dx_span": self.tile_dx_span,
            "sections": {"x": self.x.tolist(), "sym": self.section_sym.tolist(), "asym": self.section_asym.tolist()},
        }


def asymmetry_experiment(sym: PTParams, asym: PTParams, beta_sym: float, beta_asym: float, *,
                         frac=Fraction(1, 8), nx: int = 1025, np_: int = 1025) -> AsymmetryReport:
    """Compare the states at ``frac`` of each well's revival time.

    ``shift`` is the distance from the central extremum of the ``sym`` section
    ``W(x, 0)`` to the nearest opposite-polarity extremum of the ``asym``
    section (see :func:`section_extrema`); ``drift`` is the distance to the
    nearest same-polarity one, which is zero for identical wells.
    """
    if not math.isclose(sym.alpha, asym.alpha):
        raise ParamsMismatchError("the two wells must share alpha")
    ss = evolve_fraction(coherent_coefficients(sym, beta_sym), Fraction(frac))
    sa = evolve_fraction(coherent_coefficients(asym, beta_asym), Fraction(frac))
    pm = max(default_p_max(ss), default_p_max(sa))
    gs = PhaseSpaceGrid(sym, nx, np_, -pm, pm)
    ga = PhaseSpaceGrid(asym, nx, np_, -pm, pm)
    ws, wa = wigner_fast(ss, gs), wigner_fast(sa, ga)
    ow = overlap_wigner(ws, wa)
    op = abs(overlap_position(ss, sa)) ** 2

    xs = gs.x
    half = 0.5 * TILE_WINDOW * sym.width
    c = coefficient_moments(ss)["mean_x"]
    lo, hi = c - half, c + half
    v_s, v_a = ws.section(0.0), wa.section(0.0)
    ext_s = section_extrema(xs, v_s, lo, hi)
    ext_a = section_extrema(xs, v_a, lo, hi)
    if not ext_s or not ext_a:
        raise TileError("no section extremum in the central window")
    # strongest extremum nearest the centroid; ties go to smaller x
    strong = [e for e in ext_s if abs(e[1]) >= 0.5 * max(abs(f[1]) for f in ext_s)]
    central = min(strong, key=lambda e: (round(abs(e[0] - c) / gs.dx, 3), e[0]))
    opposite = [e for e in ext_a if e[2] != central[2]]
    same = [e for e in ext_a if e[2] == central[2]]
    if not opposite or not same:
        raise TileError("asymmetric section lacks extrema of both signs in the window")
    shift = min(abs(e[0] - central[0]) for e in opposite)
    drift = min(abs(e[0] - central[0]) for e in same)
    tile = measure_tile(ws)
    keep = (xs >= lo) & (xs <= hi)
    return AsymmetryReport(sym, asym, float(beta_sym), float(beta_asym), ow, op, xs[keep], v_s[keep], v_a[keep],
                           central[:2], float(shift), float(drift), tile.dx_span)


# -- emitters -----------------------------------------------------------------------

def write_scaling_csv(rows, fh) -> None:
    fh.write("beta,A,a,product\n")
    for r in rows:
        fh.write(f"{r['beta']:.17g},{r['A']:.17g},{r['a']:.17g},{r['product']:.17g}\n")


def fit_dict(fit: ScalingFit) -> dict:
    return {"slope": fit.slope, "intercept": fit.intercept, "r_squared": fit.r_squared,
            "betas": list(fit.betas), "points": [list(p) for p in fit.points]}
