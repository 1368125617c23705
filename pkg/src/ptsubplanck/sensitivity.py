"""SU(1,1) phase-space displacements of well states and overlap-vs-displacement curves.

Generators act on the eigenbasis with Bargmann index ``k = (rho + kappa)/2``:

    K+ |n> = sqrt((n+1)(n+2k)) |n+1>
    K- |n> = sqrt(n(n+2k-1))   |n-1>
    K0 |n> = (n+k) |n>

The displacement ``exp(lam K+ - conj(lam) K-)`` is applied on a truncated basis
(the oracle).  :func:`displacement_matrix_disentangled` gives the same matrix
elements in closed form from the normal-ordered product, and
:func:`overlap_analytic` evaluates the closed-form triple sum for the
time-evolved coherent state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import mpmath
import numpy as np
from scipy.linalg import expm
from scipy.special import gammaln

from .ptcore import CoefficientState, ConvergenceError, PTParams, coherent_coefficients, evolve

LEAKAGE_TOL = 1e-8
BASIS_CAP = 4096


class LeakageError(RuntimeError):
    """Truncation leakage above tolerance at the basis cap."""


class PeriodExtractionError(ValueError):
    """Fewer than two minima in the sampled range."""


@dataclass(frozen=True)
class DisplacementParam:
    """``lam = magnitude * exp(i theta)``."""

    magnitude: float
    theta: float = math.pi / 4

    def __post_init__(self):
        if self.magnitude < 0 or not math.isfinite(self.magnitude):
            raise ValueError("displacement magnitude must be finite and >= 0")

    @classmethod
    def from_real_part(cls, re_lam: float, theta: float = math.pi / 4) -> "DisplacementParam":
        return cls(re_lam / math.cos(theta), theta)

    @property
    def lam(self) -> complex:
        return self.magnitude * complex(math.cos(self.theta), math.sin(self.theta))

    @property
    def beta_prime(self) -> complex:
        return math.tanh(self.magnitude) * complex(math.cos(self.theta), math.sin(self.theta))

    @property
    def eta_d(self) -> float:
        return -2.0 * math.log(math.cosh(self.magnitude))


def bargmann_index(params: PTParams) -> float:
    return 0.5 * params.eta


def su11_generators(params: PTParams, n_max: int):
    """Dense ``K+, K-, K0`` on levels ``0..n_max``."""
    if n_max < 1:
        raise ValueError("need n_max >= 1")
    k = bargmann_index(params)
    n = np.arange(n_max + 1, dtype=float)
    up = np.sqrt((n[:-1] + 1.0) * (n[:-1] + 2.0 * k))
    Kp = np.diag(up, -1)
    Km = Kp.T.copy()
    K0 = np.diag(n + k)
    return Kp, Km, K0


def commutation_residuals(Kp, Km, K0, guard: int = 2) -> dict:
    """Norms of ``[K0,K+] - K+``, ``[K0,K-] + K-``, ``[K+,K-] + 2K0`` away from the top ``guard`` rows."""
    s = slice(0, Kp.shape[0] - guard)

    def block(M):
        return np.linalg.norm(M[s, s])

    return {
        "K0_Kp": block(K0 @ Kp - Kp @ K0 - Kp),
        "K0_Km": block(K0 @ Km - Km @ K0 + Km),
        "Kp_Km": block(Kp @ Km - Km @ Kp + 2.0 * K0),
    }


def truncation_error(small: np.ndarray, large: np.ndarray) -> float:
    """Squared distance between results in a basis and in a larger one (zero-padded).

    A truncated generator reflects probability back from the top level instead
    of losing it, so the mass near the top is not a reliable diagnostic; the
    change under basis enlargement is.
    """
    n = small.size
    return float(np.sum(np.abs(large[:n] - small) ** 2) + np.sum(np.abs(large[n:]) ** 2))


def _initial_basis(state: CoefficientState, d: DisplacementParam) -> int:
    # displaced ground state peaks near 2k sinh^2|lam|; leave room for its spread too
    k = bargmann_index(state.params)
    sh = math.sinh(d.magnitude)
    spread = 2.0 * k * sh**2 + 6.0 * math.sqrt(2.0 * k) * sh * math.cosh(d.magnitude)
    return int(state.n_max + 2 * spread + 32)


@dataclass(frozen=True)
class DisplacedState:
    state: CoefficientState
    leakage: float
    basis: int


def _expm_apply(state: CoefficientState, d: DisplacementParam, n: int) -> np.ndarray:
    Kp, Km, _ = su11_generators(state.params, n)
    return expm(d.lam * Kp - np.conj(d.lam) * Km) @ state.padded(n).coeffs


def displace_oracle(state: CoefficientState, d: DisplacementParam, *, n_basis: int | None = None,
                    tol: float = LEAKAGE_TOL, cap: int = BASIS_CAP) -> DisplacedState:
    """Apply ``exp(lam K+ - conj(lam) K-)`` by a dense matrix exponential.

    The basis is doubled until the result changes by less than ``tol`` (see
    :func:`truncation_error`); the larger-basis result is returned, renormalized.
    """
    n = min(max(n_basis or _initial_basis(state, d), state.n_max + 1), cap)
    small = _expm_apply(state, d, n)
    while True:
        m = min(2 * n, cap)
        if m == n:
            raise LeakageError(f"truncation error not below {tol} within basis cap {cap}")
        large = _expm_apply(state, d, m)
        leak = truncation_error(small, large)
        if leak < tol:
            return DisplacedState(CoefficientState(state.params, large / np.linalg.norm(large)), leak, m)
        n, small = m, large


@lru_cache(maxsize=8)
def _generator_eigensystem(params: PTParams, n: int, theta: float):
    Kp, Km, _ = su11_generators(params, n)
    e = complex(math.cos(theta), math.sin(theta))
    herm = -1j * (e * Kp - np.conj(e) * Km)
    return np.linalg.eigh(herm)


class Displacer:
    """Displacements at fixed ``theta`` for many magnitudes, via one eigendecomposition.

    ``exp(lam K+ - conj(lam) K-) = exp(i |lam| H)`` with ``H`` Hermitian.
    """

    def __init__(self, params: PTParams, n_basis: int, theta: float = math.pi / 4):
        self.params = params
        self.n = n_basis
        self.theta = theta
        self.evals, self.evecs = _generator_eigensystem(params, n_basis, theta)

    def apply(self, state: CoefficientState, magnitude: float) -> np.ndarray:
        c = state.padded(self.n).coeffs
        return self.evecs @ (np.exp(1j * magnitude * self.evals) * (self.evecs.conj().T @ c))


def _log_raise(k: float, lo: int, hi: int) -> float:
    """``log`` of ``prod_{i=lo}^{hi-1} sqrt((i+1)(i+2k))``."""
    return 0.5 * (gammaln(hi + 1.0) - gammaln(lo + 1.0) + gammaln(hi + 2.0 * k) - gammaln(lo + 2.0 * k))


def displacement_matrix_disentangled(params: PTParams, n_max: int, d: DisplacementParam) -> np.ndarray:
    """Exact ``<n'|D|n>`` for ``n, n' <= n_max`` from ``exp(z K+) (1-|z|^2)^K0 exp(-conj(z) K-)``, ``z = tanh|lam| e^{i theta}``."""
    k = bargmann_index(params)
    z = d.beta_prime
    if abs(z) == 0:
        return np.eye(n_max + 1, dtype=complex)
    lz = math.log(abs(z))
    ph = z / abs(z)
    log_damp = math.log1p(-abs(z) ** 2)
    D = np.zeros((n_max + 1, n_max + 1), dtype=complex)
    for n in range(n_max + 1):
        for m in range(n_max + 1):
            j = np.arange(min(n, m) + 1)
            logmag = np.array([
                (m - jj) * lz - gammaln(m - jj + 1.0) + _log_raise(k, jj, m)
                + (jj + k) * log_damp
                + (n - jj) * lz - gammaln(n - jj + 1.0) + _log_raise(k, jj, n)
                for jj in j
            ])
            phase = ph ** (m - j) * (-np.conj(ph)) ** (n - j)
            D[m, n] = np.sum(np.exp(logmag) * phase)
    return D


def overlap_oracle(state_t: CoefficientState, d: DisplacementParam) -> complex:
    """``<psi|D(lam)|psi>`` for an already time-evolved state."""
    disp = displace_oracle(state_t, d)
    n = state_t.n_max + 1
    return complex(np.vdot(state_t.coeffs, disp.state.coeffs[:n]))


def overlap_analytic(params: PTParams, beta: float, d: DisplacementParam, t: float, *,
                     shell_tol: float = 1e-14, shell_cap: int = 600, dps: int = 60) -> complex:
    """Closed-form triple sum over ``(n, m, p)`` for the symmetric well, normalized to 1 at ``lam = 0``.

    Gamma ratios are taken in log space and summed in arbitrary precision: the
    alternating ``(-beta')^m`` series cancels far below double precision.
    Index ranges: ``0 <= m <= n``, ``p >= 0``; ``n`` runs over the retained
    coherent-state levels.  The ``p``-series for each ``(n, m)`` is stopped when
    a term falls below ``shell_tol`` relative to the running ``lam = 0`` sum.
    """
    if not params.is_symmetric:
        raise ValueError("the closed-form overlap covers symmetric wells only")
    beta = float(beta)
    rho = mpmath.mpf(params.rho)
    half = mpmath.mpf(1) / 2
    n_top = coherent_coefficients(params, beta).n_max
    with mpmath.workdps(dps):
        b = mpmath.mpf(beta)
        bp = mpmath.mpc(d.beta_prime.real, d.beta_prime.imag)
        eta = mpmath.mpf(d.eta_d)
        lg = mpmath.loggamma

        def log_term(n, m, p):
            return (
                lg(2 * rho + 2 * n - m + p) + lg(rho + n + half) + lg(2 * rho - m + p + 1)
                + 2 * lg(rho + n - m + p + half)
                - lg(n - m + 1) - lg(rho + n - m + half) - lg(2 * rho + p + 1)
                - lg(2 * rho + 2 * n - 2 * m + p) - lg(2 * rho + n - m + p)
                - mpmath.log(n - m + p + rho)
                - lg(m + 1) - lg(p + 1)
            )

        def level_energy(n):
            return 2 * params.alpha**2 * (n + float(params.rho)) ** 2

        norm = mpmath.mpf(0)
        for n in range(n_top + 1):
            norm += b ** (2 * n) * mpmath.exp(log_term(n, 0, 0))
        total = mpmath.mpc(0)
        for n in range(n_top + 1):
            for m in range(n + 1):
                base = b ** (2 * n - m) * (-bp) ** m * mpmath.exp(eta * (n - m + rho / 2 + mpmath.mpf(1) / 4))
                for p in range(shell_cap + 1):
                    if p and bp == 0:
                        break
                    term = base * (b * bp) ** p * mpmath.exp(log_term(n, m, p))
                    phase = -(level_energy(n) - level_energy(n - m + p)) * t
                    total += term * mpmath.expjpi(phase / math.pi)
                    if p > 4 and abs(term) < shell_tol * norm:
                        break
                else:
                    raise ConvergenceError(f"p-series for n={n}, m={m} not converged by {shell_cap}")
        val = total / norm
        return complex(val.real, val.imag)


# -- sweep --------------------------------------------------------------------------

@dataclass(frozen=True)
class OverlapCurve:
    lambda_samples: np.ndarray = field(repr=False)
    overlaps: np.ndarray = field(repr=False)
    theta: float
    minima: tuple[float, ...]
    maxima: tuple[tuple[float, float], ...]
    extracted_period: float | None
    max_leakage: float
    tile_dx_span: float | None = None

    def to_dict(self) -> dict:
        return {
            "theta": self.theta,
            "extracted_period": self.extracted_period,
            "tile_dx_span": self.tile_dx_span,
            "period_over_span": (self.extracted_period / self.tile_dx_span
                                 if self.extracted_period and self.tile_dx_span else None),
            "minima": list(self.minima),
            "maxima": [list(m) for m in self.maxima],
            "max_leakage": self.max_leakage,
            "envelope_decays": envelope_decays(self),
        }


def _refine(xs: np.ndarray, ys: np.ndarray, i: int) -> tuple[float, float]:
    """Parabolic vertex through samples ``i-1, i, i+1``."""
    y0, y1, y2 = ys[i - 1], ys[i], ys[i + 1]
    den = y0 - 2.0 * y1 + y2
    if den == 0:
        return float(xs[i]), float(y1)
    off = 0.5 * (y0 - y2) / den
    h = xs[1] - xs[0]
    return float(xs[i] + off * h), float(y1 - 0.25 * (y0 - y2) * off)


def local_extrema(xs: np.ndarray, ys: np.ndarray):
    """Interior local minima and maxima, parabola-refined, in order of ``x``."""
    mins, maxs = [], []
    for i in range(1, len(ys) - 1):
        if ys[i] < ys[i - 1] and ys[i] <= ys[i + 1]:
            mins.append(_refine(xs, ys, i))
        elif ys[i] > ys[i - 1] and ys[i] >= ys[i + 1]:
            maxs.append(_refine(xs, ys, i))
    return mins, maxs


def extract_period(xs: np.ndarray, ys: np.ndarray) -> float:
    """Spacing of the first two local minima of the curve."""
    mins, _ = local_extrema(xs, ys)
    if len(mins) < 2:
        raise PeriodExtractionError(f"found {len(mins)} minima, need 2")
    return mins[1][0] - mins[0][0]


def overlap_sweep(params: PTParams, beta: float, theta: float, lambda_max: float, n_samples: int,
                  t: float | CoefficientState, *, with_tile: bool = True) -> OverlapCurve:
    """``|<psi(t)|D(lam)|psi(t)>|`` for ``Re lam`` uniformly in ``[0, lambda_max]`` at fixed ``theta``.

    ``t`` may be a time, or the evolved state itself (to use exact revival
    phases).  The period is the spacing of the first two minima, ``None`` when
    fewer exist.  With ``with_tile`` the x-span of the central Wigner tile of
    the evolved state is measured too.
    """
    if n_samples < 50:
        raise ValueError("need at least 50 samples")
    state_t = t if isinstance(t, CoefficientState) else evolve(coherent_coefficients(params, beta), t)
    re = np.linspace(0.0, lambda_max, n_samples)
    d_max = DisplacementParam.from_real_part(lambda_max, theta)
    mags = [DisplacementParam.from_real_part(r, theta).magnitude for r in re]
    n = min(_initial_basis(state_t, d_max), BASIS_CAP)
    small = [Displacer(params, n, theta).apply(state_t, m) for m in mags]
    while True:
        big = min(2 * n, BASIS_CAP)
        if big == n:
            raise LeakageError(f"truncation error not below {LEAKAGE_TOL} within basis cap {BASIS_CAP}")
        disp = Displacer(params, big, theta)
        outs = [disp.apply(state_t, m) for m in mags]
        leak = max(truncation_error(a, b) for a, b in zip(small, outs))
        if leak < LEAKAGE_TOL:
            break
        n, small = big, outs
    c = state_t.coeffs
    ov = np.array([abs(np.vdot(c, o[: c.size])) / np.linalg.norm(o) for o in outs])
    mins, maxs = local_extrema(re, ov)
    period = mins[1][0] - mins[0][0] if len(mins) >= 2 else None
    span = None
    if with_tile:
        from .analysis import measure_tile, tile_grid
        from .wigner import wigner_fast

        span = measure_tile(wigner_fast(state_t, tile_grid(state_t))).dx_span
    return OverlapCurve(re, ov, theta, tuple(m[0] for m in mins), tuple(maxs), period, leak, span)


def envelope_decays(curve: OverlapCurve) -> bool:
    """Each interior maximum after the first lower than the one before it."""
    heights = [h for _, h in curve.maxima]
    return all(b < a for a, b in zip(heights, heights[1:]))


def analytic_discrepancy(params: PTParams, beta: float, theta: float, re_lambdas, t: float, *,
                         tol: float = 5e-3) -> dict:
    """Compare ``|overlap_analytic|`` with the oracle ``|<psi(t)|D|psi(t)>|`` at each ``Re lam``.

    Returns a JSON-ready report; ``agree`` is true when every difference is within ``tol``.
    """
    state_t = evolve(coherent_coefficients(params, beta), t)
    rows = []
    for r in re_lambdas:
        d = DisplacementParam.from_real_part(float(r), theta)
        try:
            a = abs(overlap_analytic(params, beta, d, t))
        except ConvergenceError:
            a = float("nan")
        o = abs(overlap_oracle(state_t, d))
        rows.append({"re_lambda": float(r), "analytic": a, "oracle": o, "difference": abs(a - o)})
    diffs = [row["difference"] for row in rows]
    worst = max(diffs) if all(math.isfinite(x) for x in diffs) else float("inf")
    return {"beta": float(beta), "theta": theta, "t": t, "tolerance": tol, "max_difference": worst,
            "agree": bool(worst <= tol), "samples": rows}
