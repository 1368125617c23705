"""Acceptance suite: one PASS/FAIL line per criterion.

Run under pytest (lines are printed even with output capture on) or directly:
``python3 tests/test_acceptance.py``.
"""

from __future__ import annotations

import json
import math
import sys
from fractions import Fraction
from functools import lru_cache
from pathlib import Path

import numpy as np
import pytest

from ptsubplanck.analysis import (
    asymmetry_experiment,
    beta_for_peak,
    classical_action,
    measure_tile,
    overlap_coeff,
    overlap_wigner,
    scaling_sweep,
    tile_grid,
)
from ptsubplanck.ptcore import (
    PTParams,
    basis_matrix,
    coherent_coefficients,
    evolve_fraction,
    position_wavefunction,
)
from ptsubplanck.revival import (
    FractionalTime,
    cat_identity_residual,
    classical_packet,
    clone_decomposition,
    compass_identity_residual,
    even_odd_split,
)
from ptsubplanck.sensitivity import (
    DisplacementParam,
    analytic_discrepancy,
    commutation_residuals,
    displace_oracle,
    envelope_decays,
    overlap_sweep,
    su11_generators,
)
from ptsubplanck.wigner import PhaseSpaceGrid, marginals, wigner_direct, wigner_fast

REPORT_DIR = Path(__file__).resolve().parent.parent / "reports"
SYM = PTParams(50.0, 50.0, 2.0)
BETAS = [round(0.30 + 0.05 * i, 2) for i in range(11)]


def within(value, target, rel):
    return abs(value - target) <= rel * abs(target)


def line(n, ok, detail):
    return f"[criterion {n}] {'PASS' if ok else 'FAIL'}  {detail}"


def report(n, ok, detail, capsys=None):
    text = line(n, ok, detail)
    if capsys is not None:
        with capsys.disabled():
            print("\n" + text)
    else:
        print(text)
    return ok


# -- criterion 1: scaling law ---------------------------------------------------------

@lru_cache(maxsize=None)
def scaling():
    fit, rows = scaling_sweep(SYM, BETAS, Fraction(1, 8))
    return fit, rows


def criterion_1():
    fit, rows = scaling()
    lo, hi = rows[0], rows[-1]
    slope_ok = -1.10 <= fit.slope <= -0.94
    lo_ok = within(lo["A"], 0.748, 0.15) and within(lo["a"], 1.41, 0.15)
    hi_ok = within(hi["A"], 30.03, 0.15) and within(hi["a"], 0.035, 0.15)
    detail = (f"slope={fit.slope:.4f} (need [-1.10,-0.94]) r2={fit.r_squared:.4f}; "
              f"beta=0.30: A={lo['A']:.4g} a={lo['a']:.4g} (want 0.748, 1.41); "
              f"beta=0.80: A={hi['A']:.4g} a={hi['a']:.4g} (want 30.03, 0.035)")
    return slope_ok and lo_ok and hi_ok, detail


# -- criterion 2: tile areas ----------------------------------------------------------

TILE_CASES = [
    (50, 50, Fraction(1, 8), 0.110, 0.15),
    (50, 50, Fraction(1, 12), 0.144, 0.15),
    (50, 34, Fraction(1, 8), 0.132, 0.20),
    (50, 34, Fraction(1, 12), 0.250, 0.20),
    (50, 22, Fraction(1, 8), 0.225, 0.20),
    (50, 22, Fraction(1, 12), 0.290, 0.20),
]


@lru_cache(maxsize=None)
def tile_row(rho, kappa, frac):
    p = PTParams(rho, kappa, 2.0)
    beta = 0.6 if p.is_symmetric else beta_for_peak(p, 12)
    s = evolve_fraction(coherent_coefficients(p, beta), frac)
    t = measure_tile(wigner_fast(s, tile_grid(s)))
    return beta, classical_action(s), t


def criterion_2():
    ok = True
    parts = []
    for rho, kappa, frac, area, tol in TILE_CASES:
        beta, A, t = tile_row(rho, kappa, frac)
        good = within(t.area, area, tol) and 0.75 <= t.area * A <= 1.25
        ok &= good
        parts.append(f"({rho},{kappa},{frac}) a={t.area:.4f}/{area} aA={t.area * A:.3f}{'' if good else '!'}")
    return ok, "; ".join(parts)


# -- criterion 3: revival identities --------------------------------------------------

def criterion_3():
    res = {
        "cat(50,50,0.6)": cat_identity_residual(coherent_coefficients(SYM, 0.6)),
        "cat(50,50,0.3)": cat_identity_residual(coherent_coefficients(SYM, 0.3)),
        "evenodd(50,6,0.88)": even_odd_split(coherent_coefficients(PTParams(50, 6, 2), 0.88)),
        "evenodd(50,4,0.88)": even_odd_split(coherent_coefficients(PTParams(50, 4, 2), 0.88)),
        "compass(50,50,0.6)": compass_identity_residual(coherent_coefficients(SYM, 0.6)),
        "compass(50,50,0.4)": compass_identity_residual(coherent_coefficients(SYM, 0.4)),
    }
    count = clone_decomposition(coherent_coefficients(SYM, 0.6), FractionalTime(1, 12)).count()
    ok = all(v < 1e-8 for v in res.values()) and count == 6
    detail = ", ".join(f"{k}={v:.1e}" for k, v in res.items()) + f"; benzene clones={count}"
    return ok, detail


# -- criterion 4: asymmetry sensitivity -----------------------------------------------

@lru_cache(maxsize=None)
def asymmetry():
    return asymmetry_experiment(SYM, PTParams(50, 46, 2.0), 0.6, 0.6)


def criterion_4():
    r = asymmetry()
    ov_ok = 0.05 <= r.overlap_wigner <= 0.2
    shift_ok = within(r.shift, 0.01247, 0.20)
    detail = (f"overlap_wigner={r.overlap_wigner:.4f} (position route {r.overlap_position:.4f}, need [0.05,0.2]); "
              f"shift={r.shift:.5f} (want 0.01247 +-20%); same-polarity drift={r.drift:.5f}")
    return ov_ok and shift_ok, detail


# -- criterion 5: displacement sensitivity --------------------------------------------

@lru_cache(maxsize=None)
def displacement_curve():
    s = evolve_fraction(coherent_coefficients(SYM, 0.4), Fraction(1, 8))
    return overlap_sweep(SYM, 0.4, math.pi / 4, 0.5, 201, s)


def criterion_5():
    c = displacement_curve()
    period_ok = c.extracted_period is not None and within(c.extracted_period, 0.079, 0.10)
    span_ok = within(c.tile_dx_span, 0.075, 0.10)
    heights = [h for _, h in c.maxima]
    decay_ok = envelope_decays(c)
    detail = (f"period={c.extracted_period if c.extracted_period is None else round(c.extracted_period, 5)} (want 0.079 +-10%); tile dx_span={c.tile_dx_span:.4f} "
              f"(want 0.075 +-10%); maxima={[round(h, 3) for h in heights]} decaying={decay_ok}")
    return period_ok and span_ok and decay_ok, detail


# -- criterion 6: property suites -----------------------------------------------------

def criterion_6():
    checks = {}
    compass = evolve_fraction(coherent_coefficients(SYM, 0.6), Fraction(1, 8))
    f = wigner_fast(compass, PhaseSpaceGrid.for_state(compass))
    rx, _ = marginals(f)
    dens = np.abs(position_wavefunction(compass, f.grid.x)) ** 2
    checks["normalization"] = max(abs(f.total() - 1), np.abs(rx - dens).max()) < 1e-4

    g = PhaseSpaceGrid.for_state(compass, 128, 128)
    checks["fast_vs_direct"] = np.abs(wigner_fast(compass, g).values - wigner_direct(compass, g).values).max() < 1e-6

    t, w = np.polynomial.legendre.leggauss(4096)
    x, w = 0.5 * SYM.width * (t + 1), 0.5 * SYM.width * w
    B = basis_matrix(SYM, 20, x)
    checks["orthonormality"] = np.abs((B * w) @ B.T - np.eye(21)).max() < 1e-9

    shifted = classical_packet(compass, SYM.t_cl / 40)
    gw = PhaseSpaceGrid.for_state(compass, 512, 1024)
    ow = overlap_wigner(wigner_fast(compass, gw), wigner_fast(shifted, gw))
    checks["overlap_routes"] = abs(ow - abs(overlap_coeff(compass, shifted)) ** 2) < 1e-3

    Kp, Km, K0 = su11_generators(SYM, 200)
    checks["commutators"] = max(commutation_residuals(Kp, Km, K0).values()) < 1e-10

    cs = coherent_coefficients(SYM, 0.4)
    fwd = displace_oracle(cs, DisplacementParam(0.3)).state
    back = displace_oracle(fwd, DisplacementParam(0.3, math.pi / 4 + math.pi)).state
    checks["invertibility"] = np.abs(back.coeffs[: cs.n_max + 1] - cs.coeffs).max() < 1e-8
    return all(checks.values()), ", ".join(f"{k}={'ok' if v else 'BAD'}" for k, v in checks.items())


# -- criterion 7: analytic vs oracle --------------------------------------------------

@lru_cache(maxsize=None)
def discrepancy():
    lams = [round(0.025 * i, 3) for i in range(13)]
    rep = analytic_discrepancy(SYM, 0.4, math.pi / 4, lams, SYM.t_rev / 8)
    REPORT_DIR.mkdir(exist_ok=True)
    (REPORT_DIR / "overlap_discrepancy.json").write_text(json.dumps(rep, indent=2, sort_keys=True) + "\n")
    return rep


def criterion_7():
    rep = discrepancy()
    if rep["agree"]:
        return True, f"closed form agrees with oracle: max |diff|={rep['max_difference']:.2e}"
    c5, _ = criterion_5()
    detail = (f"closed form disagrees (max |diff|={rep['max_difference']:.3g}); discrepancy report "
              f"reports/overlap_discrepancy.json written; fallback needs criterion 5, which is "
              f"{'PASS' if c5 else 'FAIL'}")
    return c5, detail


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6, criterion_7]


@pytest.mark.parametrize("n", range(1, 8))
def test_criterion(n, capsys):
    ok, detail = CRITERIA[n - 1]()
    report(n, ok, detail, capsys)
    assert ok, detail


def test_uncertainty_product_reference_value(capsys):
    # tabulated action for the compass state at beta = 0.6
    s = evolve_fraction(coherent_coefficients(SYM, 0.6), Fraction(1, 8))
    A = classical_action(s)
    ok = within(A, 9.225, 0.10)
    with capsys.disabled():
        print(f"\n[reference] {'PASS' if ok else 'FAIL'}  dx*dp at beta=0.6, T_rev/8: {A:.4f} (want 9.225 +-10%)")
    assert ok


def test_discrepancy_report_is_machine_readable():
    rep = json.loads((REPORT_DIR / "overlap_discrepancy.json").read_text()) if (
        REPORT_DIR / "overlap_discrepancy.json").exists() else discrepancy()
    assert {"agree", "max_difference", "samples", "tolerance"} <= set(rep)
    assert rep["samples"][0]["re_lambda"] == 0 and rep["samples"][0]["oracle"] == pytest.approx(1.0, abs=1e-10)


if __name__ == "__main__":
    results = [report(i + 1, *fn()) for i, fn in enumerate(CRITERIA)]
    sys.exit(0 if all(results) else 1)
