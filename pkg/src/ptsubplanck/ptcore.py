"""Exact spectral data of a single Poschl-Teller well.

Atomic units (hbar = m = 1) throughout.  The well is the interval
``[0, pi/(2 alpha)]``; the potential

    V(x) = (alpha^2/2) [rho(rho-1)/cos^2(alpha x) + kappa(kappa-1)/sin^2(alpha x)]

has levels ``E_n = (alpha^2/2)(2n + rho + kappa)^2`` and eigenfunctions

    psi_n(x) = N_n cos^rho(alpha x) sin^kappa(alpha x) P_n(cos 2 alpha x)

with ``P_n`` a Jacobi polynomial.  Eigenfunctions are evaluated with the
three-term recurrence of the *orthonormal* Jacobi polynomials, so no
gamma function is ever exponentiated before the weight factor is folded in.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.special import gammaln, logsumexp

#: ``log`` magnitude above which an intermediate is reported as out of range.
LOG_MAGNITUDE_BOUND = 700.0
#: Hard cap on the number of retained levels in a coherent state.
N_MAX_CAP = 4096
DEFAULT_TAIL_TOL = 1e-12


class DomainError(ValueError):
    """Argument outside the well or outside an operation's domain."""


class NumericRangeError(ArithmeticError):
    """An intermediate left the representable floating-point range."""


class ConvergenceError(RuntimeError):
    """A truncated series did not converge under the configured cap."""


@dataclass(frozen=True)
class PTParams:
    """Potential parameters ``(rho, kappa, alpha)``."""

    rho: float
    kappa: float
    alpha: float

    def __post_init__(self):
        for name in ("rho", "kappa", "alpha"):
            v = getattr(self, name)
            if not np.isfinite(v):
                raise DomainError(f"{name} must be finite, got {v!r}")
        if self.rho <= 1 or self.kappa <= 1:
            raise DomainError(f"need rho, kappa > 1 (got {self.rho}, {self.kappa})")
        if self.alpha <= 0:
            raise DomainError(f"need alpha > 0 (got {self.alpha})")

    @property
    def eta(self) -> float:
        return self.rho + self.kappa

    @property
    def width(self) -> float:
        """Right edge of the well, ``pi/(2 alpha)``."""
        return math.pi / (2.0 * self.alpha)

    @property
    def center(self) -> float:
        return math.pi / (4.0 * self.alpha)

    @property
    def t_rev(self) -> float:
        return math.pi / self.alpha**2

    @property
    def t_cl(self) -> float:
        return math.pi / (self.eta * self.alpha**2)

    @property
    def is_symmetric(self) -> bool:
        return self.rho == self.kappa

    @property
    def eta_is_integer(self) -> bool:
        return float(self.eta).is_integer()

    def as_dict(self) -> dict:
        return {"rho": self.rho, "kappa": self.kappa, "alpha": self.alpha}


def _as_array(x):
    return np.asarray(x, dtype=float)


def _check_inside(params: PTParams, x, *, closed: bool) -> None:
    x = _as_array(x)
    if not np.all(np.isfinite(x)):
        raise DomainError("sample positions must be finite")
    L = params.width
    if closed:
        bad = (x < 0.0) | (x > L)
    else:
        bad = (x <= 0.0) | (x >= L)
    if np.any(bad):
        kind = "[0, pi/(2 alpha)]" if closed else "(0, pi/(2 alpha))"
        raise DomainError(f"positions must lie in {kind} = {kind[0]}0, {L}{kind[-1]}")


def potential_value(params: PTParams, x):
    """Potential energy at ``x``, strictly inside the well."""
    _check_inside(params, x, closed=False)
    ax = params.alpha * _as_array(x)
    v = 0.5 * params.alpha**2 * (
        params.rho * (params.rho - 1.0) / np.cos(ax) ** 2
        + params.kappa * (params.kappa - 1.0) / np.sin(ax) ** 2
    )
    return v if np.ndim(x) else float(v)


def energy(params: PTParams, n):
    """Level energies ``(alpha^2/2)(2n + rho + kappa)^2``."""
    n_arr = np.asarray(n)
    if np.any(n_arr < 0) or not np.all(np.equal(np.mod(n_arr, 1), 0)):
        raise DomainError("level index must be a nonnegative integer")
    e = 0.5 * params.alpha**2 * (2.0 * n_arr + params.eta) ** 2
    return e if np.ndim(n) else float(e)


def log_normalization(params: PTParams, n):
    """``log N_n`` of the unnormalized Jacobi form, via log-gamma."""
    n = np.asarray(n, dtype=float)
    rho, kappa, eta = params.rho, params.kappa, params.eta
    return 0.5 * (
        math.log(2.0 * params.alpha)
        + gammaln(n + 1.0)
        + np.log(2.0 * n + eta)
        + gammaln(n + eta)
        - gammaln(n + rho + 0.5)
        - gammaln(n + kappa + 0.5)
    )


def _jacobi_ab(params: PTParams) -> tuple[float, float]:
    # weight (1-y)^a (1+y)^b with y = cos(2 alpha x): sin^(2 kappa) <-> (1-y), cos^(2 rho) <-> (1+y)
    return params.kappa - 0.5, params.rho - 0.5


def _recurrence(params: PTParams, n_max: int):
    """Coefficients of ``y q_n = b_{n+1} q_{n+1} + a_n q_n + b_n q_{n-1}``."""
    a, b = _jacobi_ab(params)
    n = np.arange(n_max + 2, dtype=float)
    s = 2.0 * n + a + b
    diag = (b * b - a * a) / (s * (s + 2.0))
    off = np.zeros(n_max + 2)
    k = n[1:]
    sk = s[1:]
    off[1:] = np.sqrt(4.0 * k * (k + a) * (k + b) * (k + a + b) / (sk * sk * (sk + 1.0) * (sk - 1.0)))
    return diag, off


def _log_weight(params: PTParams, x: np.ndarray) -> np.ndarray:
    """``log`` of ``sqrt(2 alpha) (1+y)^(rho/2) (1-y)^(kappa/2) / sqrt(h_0)``; ``-inf`` at the edges."""
    a, b = _jacobi_ab(params)
    eta = params.eta
    log_h0 = eta * math.log(2.0) + gammaln(a + 1.0) + gammaln(b + 1.0) - gammaln(a + b + 2.0)
    ax = params.alpha * x
    with np.errstate(divide="ignore"):
        lc = np.log(np.cos(ax))
        ls = np.log(np.sin(ax))
    lw = 0.5 * math.log(2.0 * params.alpha) + 0.5 * eta * math.log(2.0) - 0.5 * log_h0
    lw = lw + params.rho * lc + params.kappa * ls
    # edges and the exact right end, where cos rounds to a tiny positive value
    lw = np.where((x <= 0.0) | (x >= params.width), -np.inf, lw)
    return lw


def _weight(params: PTParams, x: np.ndarray) -> np.ndarray:
    lw = _log_weight(params, x)
    if np.any(lw > LOG_MAGNITUDE_BOUND):
        raise NumericRangeError("eigenfunction weight factor exceeds the log-magnitude bound")
    return np.exp(lw)


def _iterate_basis(params: PTParams, n_max: int, x: np.ndarray, derivative: bool = False):
    """Yield ``(n, psi_n(x))`` or ``(n, psi_n(x), psi_n'(x))`` for ``n = 0..n_max``."""
    w = _weight(params, x)
    y = np.cos(2.0 * params.alpha * x)
    diag, off = _recurrence(params, n_max)
    q_prev = np.zeros_like(x)
    q = np.ones_like(x)
    if derivative:
        al = params.alpha
        inside = w > 0.0
        ax = al * np.where(inside, x, params.center)
        dlogw = np.where(inside, al * (params.kappa / np.tan(ax) - params.rho * np.tan(ax)), 0.0)
        dydx = -2.0 * al * np.sin(2.0 * al * x)
        dq_prev = np.zeros_like(x)
        dq = np.zeros_like(x)
    for n in range(n_max + 1):
        psi = w * q
        if not np.all(np.isfinite(psi)):
            raise NumericRangeError(f"non-finite eigenfunction value at level {n}")
        if derivative:
            yield n, psi, w * (dlogw * q + dq * dydx)
        else:
            yield n, psi
        if n == n_max:
            break
        q_next = ((y - diag[n]) * q - off[n] * q_prev) / off[n + 1]
        if derivative:
            dq_next = (q + (y - diag[n]) * dq - off[n] * dq_prev) / off[n + 1]
            dq_prev, dq = dq, dq_next
        q_prev, q = q, q_next


def eigenfunction(params: PTParams, n: int, x):
    """Normalized eigenfunction ``psi_n`` at positions ``x`` in the closed well."""
    if n < 0 or int(n) != n:
        raise DomainError("level index must be a nonnegative integer")
    _check_inside(params, x, closed=True)
    xa = np.atleast_1d(_as_array(x))
    for k, psi in _iterate_basis(params, int(n), xa):
        if k == n:
            return psi if np.ndim(x) else float(psi[0])


def basis_matrix(params: PTParams, n_max: int, x, derivative: bool = False):
    """Rows ``psi_0..psi_nmax`` sampled at ``x`` (and their derivatives if asked)."""
    _check_inside(params, x, closed=True)
    xa = np.atleast_1d(_as_array(x))
    out = np.empty((n_max + 1, xa.size))
    dout = np.empty((n_max + 1, xa.size)) if derivative else None
    for item in _iterate_basis(params, n_max, xa, derivative):
        out[item[0]] = item[1]
        if derivative:
            dout[item[0]] = item[2]
    return (out, dout) if derivative else out


@dataclass(frozen=True, eq=False)
class CoefficientState:
    """A state as amplitudes over the eigenbasis, levels ``0..n_max``."""

    params: PTParams
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=complex).ravel()
        if c.size == 0:
            raise ValueError("empty coefficient vector")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def n_max(self) -> int:
        return self.coeffs.size - 1

    @property
    def levels(self) -> np.ndarray:
        return np.arange(self.coeffs.size)

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.coeffs) ** 2)))

    def normalized(self) -> "CoefficientState":
        return CoefficientState(self.params, self.coeffs / self.norm())

    def padded(self, n_max: int) -> "CoefficientState":
        if n_max < self.n_max:
            raise ValueError("cannot pad to a smaller basis")
        c = np.zeros(n_max + 1, dtype=complex)
        c[: self.coeffs.size] = self.coeffs
        return CoefficientState(self.params, c)

    def reflected(self) -> "CoefficientState":
        """The state ``chi(pi/(2 alpha) - x)``; symmetric wells only."""
        if not self.params.is_symmetric:
            raise DomainError("reflection in the eigenbasis needs rho == kappa")
        sign = 1.0 - 2.0 * (self.levels % 2)
        return CoefficientState(self.params, sign * self.coeffs)

    def mean_energy(self) -> float:
        p = np.abs(self.coeffs) ** 2
        return float(np.dot(p, energy(self.params, self.levels)))

    def peak_level(self) -> int:
        return int(np.argmax(np.abs(self.coeffs) ** 2))

    def __add__(self, other: "CoefficientState") -> "CoefficientState":
        if other.params != self.params:
            raise ValueError("states belong to different potentials")
        n = max(self.n_max, other.n_max)
        return CoefficientState(self.params, self.padded(n).coeffs + other.padded(n).coeffs)

    def __mul__(self, z) -> "CoefficientState":
        return CoefficientState(self.params, complex(z) * self.coeffs)

    __rmul__ = __mul__


def eigenstate(params: PTParams, n: int, n_max: int | None = None) -> CoefficientState:
    c = np.zeros((n if n_max is None else n_max) + 1, dtype=complex)
    c[n] = 1.0
    return CoefficientState(params, c)


def log_cs_weights(params: PTParams, beta_abs: float, n_stop: int) -> np.ndarray:
    """``log |d_n|^2`` for ``n = 0..n_stop`` at ``|beta| = beta_abs > 0``."""
    n = np.arange(n_stop + 1, dtype=float)
    rho, kappa, eta = params.rho, params.kappa, params.eta
    return (
        2.0 * n * math.log(beta_abs)
        + gammaln(rho + n + 0.5)
        + gammaln(kappa + n + 0.5)
        - math.log(2.0 * params.alpha)
        - gammaln(eta + n)
        - gammaln(n + 1.0)
        - np.log(2.0 * n + eta)
    )


def coherent_coefficients(
    params: PTParams,
    beta: complex,
    tail_tol: float = DEFAULT_TAIL_TOL,
    *,
    n_max: int | None = None,
    n_cap: int = N_MAX_CAP,
) -> CoefficientState:
    """Coherent-state amplitudes ``d_n`` truncated where the relative tail mass drops below ``tail_tol``.

    The retained vector is renormalized.  Passing ``n_max`` larger than the
    automatic truncation keeps extra levels (useful for stability checks).
    """
    beta = complex(beta)
    if not abs(beta) < 1.0:
        raise DomainError(f"|beta| must be < 1 (got {abs(beta)})")
    if not tail_tol > 0:
        raise DomainError("tail_tol must be positive")
    if beta == 0:
        size = 1 if n_max is None else n_max + 1
        c = np.zeros(size, dtype=complex)
        c[0] = 1.0
        return CoefficientState(params, c)

    logw = log_cs_weights(params, abs(beta), n_cap)
    # remainder beyond the cap, bounded by a geometric series at the last ratio
    r = math.exp(logw[-1] - logw[-2])
    if r >= 1.0:
        raise ConvergenceError("coherent-state series not decaying at the level cap")
    log_beyond = logw[-1] + math.log(r / (1.0 - r))
    log_total = logsumexp(np.append(logw, log_beyond))
    # log of the mass strictly above each n
    suffix = np.logaddexp.accumulate(logw[::-1])[::-1]
    tail_above = np.logaddexp(np.append(suffix[1:], -np.inf), log_beyond)
    ok = np.nonzero(tail_above - log_total < math.log(tail_tol))[0]
    if ok.size == 0 or ok[0] >= n_cap:
        raise ConvergenceError(f"tail mass above {tail_tol} even at n_max = {n_cap}")
    n_auto = int(ok[0])
    if n_max is None:
        n_max = n_auto
    elif n_max < n_auto:
        raise ValueError(f"n_max={n_max} violates the tail criterion (needs >= {n_auto})")
    if n_max > n_cap:
        raise ConvergenceError(f"n_max={n_max} above the hard cap {n_cap}")

    lw = logw[: n_max + 1]
    mags = np.exp(0.5 * (lw - logsumexp(lw)))
    n = np.arange(n_max + 1)
    phase = np.exp(1j * n * np.angle(-beta))
    return CoefficientState(params, mags * phase)


def _phases_float(params: PTParams, n: np.ndarray, t: float) -> np.ndarray:
    return np.exp(-1j * energy(params, n) * t)


def evolve(state: CoefficientState, t: float) -> CoefficientState:
    """Free evolution ``c_n -> c_n exp(-i E_n t)``."""
    t = float(t)
    if not math.isfinite(t):
        raise DomainError("time must be finite")
    return CoefficientState(state.params, state.coeffs * _phases_float(state.params, state.levels, t))


def evolve_fraction(state: CoefficientState, fraction) -> CoefficientState:
    """Evolve to ``fraction * T_rev`` with phases reduced exactly when ``rho + kappa`` is an integer.

    ``E_n (r/s) T_rev = (pi/2)(r/s)(2n + eta)^2``, so the phase in turns is
    ``r (2n+eta)^2 / (4 s)`` and can be reduced modulo one in integers.
    """
    fr = Fraction(fraction)
    params = state.params
    if not params.eta_is_integer:
        return evolve(state, float(fr) * params.t_rev)
    eta = int(params.eta)
    q = (2 * state.levels.astype(object) + eta) ** 2 * fr.numerator
    denom = 4 * fr.denominator
    turns = np.array([int(v % denom) for v in q], dtype=float) / denom
    return CoefficientState(params, state.coeffs * np.exp(-2j * math.pi * turns))


def position_wavefunction(state: CoefficientState, xs) -> np.ndarray:
    """``sum_n c_n psi_n(x)`` at each sample; O(n_max * len(xs)) time, O(len(xs)) memory."""
    _check_inside(state.params, xs, closed=True)
    xa = np.atleast_1d(_as_array(xs))
    out = np.zeros(xa.size, dtype=complex)
    c = state.coeffs
    for n, psi in _iterate_basis(state.params, state.n_max, xa):
        if c[n] != 0:
            out += c[n] * psi
    return out


def position_derivative(state: CoefficientState, xs) -> np.ndarray:
    """``d/dx`` of :func:`position_wavefunction`, from the differentiated recurrence."""
    _check_inside(state.params, xs, closed=True)
    xa = np.atleast_1d(_as_array(xs))
    out = np.zeros(xa.size, dtype=complex)
    c = state.coeffs
    for n, _, dpsi in _iterate_basis(state.params, state.n_max, xa, derivative=True):
        if c[n] != 0:
            out += c[n] * dpsi
    return out
