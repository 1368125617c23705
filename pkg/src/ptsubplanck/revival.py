"""Fractional revivals: cat, even/odd, compass and general clone decompositions.

At ``t = (r/s) T_rev`` the level phases split into a linear part, which is the
classical packet advanced to the same time, and a part quadratic in ``n`` that
is periodic in ``n``.  The periodic part is a finite Fourier sum, so the state
is an exact superposition of ``l`` shifted classical packets.  Every identity
here is checked in the coefficient basis and modulo a global phase.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .ptcore import CoefficientState, DomainError, PTParams, evolve_fraction


class RankDeficiencyError(np.linalg.LinAlgError):
    """The clone packets are numerically collinear."""


@dataclass(frozen=True)
class FractionalTime:
    """``t = (r/s) T_rev`` with ``gcd(r, s) = 1`` and ``0 < r/s <= 1``."""

    r: int
    s: int

    def __post_init__(self):
        if self.r < 1 or self.s < 2:
            raise ValueError("need r >= 1 and s >= 2")
        if math.gcd(self.r, self.s) != 1:
            raise ValueError(f"{self.r}/{self.s} is not in lowest terms")
        if self.r > self.s:
            raise ValueError("r/s must lie in (0, 1]")

    @classmethod
    def parse(cls, text: str) -> "FractionalTime":
        r, _, s = text.partition("/")
        return cls(int(r), int(s))

    @property
    def fraction(self) -> Fraction:
        return Fraction(self.r, self.s)

    @property
    def clones(self) -> int:
        return self.s // 2 if self.s % 2 == 0 else self.s

    def time(self, params: PTParams) -> float:
        return self.r / self.s * params.t_rev

    def __str__(self) -> str:
        return f"{self.r}/{self.s}"


@dataclass(frozen=True)
class CloneDecomposition:
    amplitudes: np.ndarray
    phase_offsets: tuple[Fraction, ...]
    residual: float

    @property
    def weights(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def count(self, threshold: float = 1e-3) -> int:
        """Clones carrying more than ``threshold`` of the probability."""
        return int(np.sum(self.weights > threshold))


def phase_residual(a: np.ndarray, b: np.ndarray) -> float:
    """``min_phi || a - exp(i phi) b ||``."""
    n = max(a.size, b.size)
    a = np.pad(a, (0, n - a.size))
    b = np.pad(b, (0, n - b.size))
    ov = np.vdot(b, a)
    ph = ov / abs(ov) if abs(ov) > 0 else 1.0
    return float(np.linalg.norm(a - ph * b))


def _classical_phases(state: CoefficientState, cycles) -> np.ndarray:
    """``exp(-2 pi i n * cycles)`` with ``cycles = t / T_cl``; exact for rational input."""
    n = state.levels
    if isinstance(cycles, Fraction):
        num = (n.astype(object) * cycles.numerator) % cycles.denominator
        turns = np.array([int(v) for v in num], dtype=float) / cycles.denominator
    else:
        turns = np.mod(n * float(cycles), 1.0)
    return np.exp(-2j * math.pi * turns)


def classical_packet(state0: CoefficientState, t) -> CoefficientState:
    """Evolve with the linear-in-``n`` phases only.

    ``t`` is a time in atomic units, or a :class:`~fractions.Fraction` giving
    the time in units of ``T_cl`` (exact phases).
    """
    cycles = t if isinstance(t, Fraction) else float(t) / state0.params.t_cl
    return CoefficientState(state0.params, state0.coeffs * _classical_phases(state0, cycles))


def _cycles_at(params: PTParams, frac: Fraction) -> Fraction | float:
    """Elapsed classical periods at ``frac * T_rev``; ``T_rev / T_cl = rho + kappa``."""
    if params.eta_is_integer:
        return frac * int(params.eta)
    return float(frac) * params.eta


def _require_even_eta(params: PTParams) -> int:
    if not params.eta_is_integer or int(params.eta) % 2:
        raise DomainError("rho + kappa must be an even integer")
    return int(params.eta)


def cat_identity_residual(state0: CoefficientState) -> float:
    """Distance between the state at ``T_rev/4`` and the two-mirror-image superposition."""
    p = state0.params
    if not p.is_symmetric or not float(p.rho).is_integer() or int(p.rho) % 2:
        raise DomainError("cat identity needs rho == kappa, both even integers")
    lhs = evolve_fraction(state0, Fraction(1, 4)).coeffs
    mirrored = state0.reflected().coeffs
    rhs = (np.exp(-1j * math.pi / 4) * state0.coeffs + np.exp(1j * math.pi / 4) * mirrored) / math.sqrt(2)
    return phase_residual(lhs, rhs)


def even_odd_parts(state: CoefficientState) -> tuple[np.ndarray, np.ndarray]:
    even = np.where(state.levels % 2 == 0, state.coeffs, 0)
    return even, state.coeffs - even


def even_odd_split(state0: CoefficientState, at=Fraction(1, 4)) -> float:
    """Residual of the even/odd form of the state at ``T_rev/4``.

    ``chi_e - i chi_o`` when ``rho + kappa = 0 (mod 4)``, otherwise ``-i chi_e + chi_o``.
    """
    eta = _require_even_eta(state0.params)
    if Fraction(at) != Fraction(1, 4):
        raise DomainError("the even/odd identity holds at T_rev/4")
    e, o = even_odd_parts(state0)
    rhs = e - 1j * o if eta % 4 == 0 else -1j * e + o
    lhs = evolve_fraction(state0, Fraction(1, 4)).coeffs
    return phase_residual(lhs, rhs)


def compass_identity_residual(state0: CoefficientState) -> float:
    """Residual of the four-clone form at ``T_rev/8``.

    The clones are classical packets at the elapsed time ``T_rev/8``, offset by
    quarter classical periods.
    """
    p = state0.params
    if not p.eta_is_integer:
        raise DomainError("rho + kappa must be an integer")
    t = _cycles_at(p, Fraction(1, 8))
    q = Fraction(1, 4)
    w = np.exp(-1j * math.pi / 4)
    rhs = 0.5 * (
        w * classical_packet(state0, t).coeffs
        + classical_packet(state0, t + q).coeffs
        - w * classical_packet(state0, t + 2 * q).coeffs
        + classical_packet(state0, t + 3 * q).coeffs
    )
    lhs = evolve_fraction(state0, Fraction(1, 8)).coeffs
    return phase_residual(lhs, rhs)


def clone_decomposition(state0: CoefficientState, frac: FractionalTime, *, rcond: float = 1e-10) -> CloneDecomposition:
    """Least-squares amplitudes of the state at ``frac`` on ``l`` shifted classical packets.

    The basis is ``chi_cl(t - p T_cl / l)``, ``p = 0..l-1``; amplitudes come from
    the ``l x l`` normal equations.
    """
    params = state0.params
    if not params.eta_is_integer:
        raise DomainError("rho + kappa must be an integer")
    l = frac.clones
    t = _cycles_at(params, frac.fraction)
    offsets = tuple(Fraction(k, l) for k in range(l))
    basis = np.stack([classical_packet(state0, t - off).coeffs for off in offsets], axis=1)
    target = evolve_fraction(state0, frac.fraction).coeffs
    gram = basis.conj().T @ basis
    ev = np.linalg.eigvalsh(gram)
    if ev[0] < rcond * ev[-1]:
        raise RankDeficiencyError(f"clone packets nearly collinear (cond {ev[-1] / max(ev[0], 1e-300):.3g})")
    amps = np.linalg.solve(gram, basis.conj().T @ target)
    resid = float(np.linalg.norm(basis @ amps - target))
    return CloneDecomposition(amps, offsets, resid)


def density_lobes(density: np.ndarray, level: float = 0.1) -> int:
    """Connected runs of ``density`` above ``level * max``."""
    above = density > level * density.max()
    return int(np.sum(above[1:] & ~above[:-1]) + above[0])
