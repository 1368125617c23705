import io
import math
from fractions import Fraction

import numpy as np
import pytest

from ptsubplanck.analysis import (
    FitError,
    GridMismatchError,
    ParamsMismatchError,
    TileError,
    asymmetry_experiment,
    beta_for_peak,
    classical_action,
    coefficient_moments,
    fit_power_law,
    measure_tile,
    overlap_coeff,
    overlap_position,
    overlap_wigner,
    scaling_sweep,
    section_extrema,
    tile_grid,
    write_scaling_csv,
)
from ptsubplanck.ptcore import (
    PTParams,
    coherent_coefficients,
    evolve,
    evolve_fraction,
    position_derivative,
    position_wavefunction,
)
from ptsubplanck.revival import classical_packet
from ptsubplanck.wigner import PhaseSpaceGrid, WignerField, moments, wigner_fast


def synthetic(sym, fn, nx=801, np_=801, pm=50.0):
    g = PhaseSpaceGrid(sym, nx, np_, -pm, pm)
    X, P = np.meshgrid(g.x, g.p, indexing="ij")
    return WignerField(g, fn(X, P))


def test_ground_state_action(sym):
    A = classical_action(coherent_coefficients(sym, 0.0))
    assert 0.5 <= A < 0.51


def test_action_matches_field(compass06):
    m = moments(wigner_fast(compass06, PhaseSpaceGrid.for_state(compass06)))
    assert classical_action(compass06) == pytest.approx(math.sqrt(m["var_x"] * m["var_p"]), rel=1e-3)


def test_moments_against_position_route(sym, cs06):
    cat = evolve_fraction(cs06, Fraction(1, 4))
    m = coefficient_moments(cat)
    assert m["mean_x"] == pytest.approx(sym.center, abs=1e-10)
    t, w = np.polynomial.legendre.leggauss(2048)
    x, w = 0.5 * sym.width * (t + 1), 0.5 * sym.width * w
    chi, dchi = position_wavefunction(cat, x), position_derivative(cat, x)
    mean_p = float(np.imag(np.sum(w * np.conj(chi) * dchi)))
    p2 = float(np.sum(w * np.abs(dchi) ** 2))
    assert m["mean_p"] == pytest.approx(mean_p, abs=1e-10)
    assert m["var_p"] == pytest.approx(p2 - mean_p**2, rel=1e-10)


def test_tile_checkerboard(sym):
    kx, kp = 2 * math.pi / 0.04, 2 * math.pi / 12.0
    c = sym.center
    f = synthetic(sym, lambda X, P: 0.3 * np.cos(kx * (X - c)) * np.cos(kp * P))
    t = measure_tile(f, seed=(c, 0.0))
    assert t.dx_span == pytest.approx(0.02, rel=1e-3)
    assert t.dp_span == pytest.approx(6.0, rel=1e-3)
    assert t.area == pytest.approx(0.12, rel=2e-3)
    assert t.center == pytest.approx((c, 0.0), abs=f.grid.dx)


def test_tile_touching_fringes(sym):
    # two crossed fringe systems: along each axis the pattern touches zero without changing sign
    a, b = 2 * math.pi / 0.05, 2 * math.pi / 20.0
    c = sym.center
    f = synthetic(sym, lambda X, P: 0.1 * (np.cos(a * (X - c)) + np.cos(b * P)))
    t = measure_tile(f, seed=(c, 0.0))
    assert t.dx_span == pytest.approx(0.05, rel=5e-3)
    assert t.dp_span == pytest.approx(20.0, rel=5e-3)


def test_tile_default_seed_is_centroid(sym):
    kx = 2 * math.pi / 0.04
    c = sym.center
    c0 = c + 0.01
    blob = lambda X, P: np.exp(-((X - c0) ** 2) / 2e-4 - P**2 / 50)
    f = synthetic(sym, lambda X, P: blob(X, P) * (0.2 + np.cos(kx * (X - c0)) * np.cos(0.5 * P)))
    t = measure_tile(f)
    assert t.center[0] == pytest.approx(c + 0.01, abs=2 * f.grid.dx)


def test_tile_errors(sym):
    with pytest.raises(TileError):
        measure_tile(synthetic(sym, lambda X, P: 1e-9 * np.cos(50 * X) * np.cos(P)))
    with pytest.raises(TileError):
        measure_tile(synthetic(sym, lambda X, P: 1.0 + 0.1 * np.cos(300 * X) * np.cos(0.5 * P)))


def test_tile_on_compass(compass06):
    f = wigner_fast(compass06, tile_grid(compass06))
    t1, t2 = measure_tile(f), measure_tile(f)
    assert t1 == t2
    assert t1.dx_span > 0 and t1.dp_span > 0
    m = coefficient_moments(compass06)
    assert t1.area < 2 * math.sqrt(m["var_x"] * m["var_p"])


def test_fit_power_law():
    A = np.array([1.0, 2.0, 5.0, 9.0])
    slope, icpt, r2 = fit_power_law(A, 0.8 * A**-1.02)
    assert slope == pytest.approx(-1.02) and icpt == pytest.approx(math.log(0.8)) and r2 == pytest.approx(1.0)
    with pytest.raises(FitError):
        fit_power_law([1, 2], [1, 0.5])
    with pytest.raises(FitError):
        fit_power_law([1, 2, 3], [1, -0.5, 0.3])


def test_scaling_sweep_small(sym):
    fit, rows = scaling_sweep(sym, [0.8, 0.5, 0.65])
    assert [r["beta"] for r in rows] == [0.5, 0.65, 0.8]
    As = [r["A"] for r in rows]
    areas = [r["a"] for r in rows]
    assert As == sorted(As) and areas == sorted(areas, reverse=True)
    assert fit.slope < 0
    buf = io.StringIO()
    write_scaling_csv(rows, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "beta,A,a,product" and len(lines) == 4
    assert float(lines[1].split(",")[1]) == rows[0]["A"]
    with pytest.raises(FitError):
        scaling_sweep(sym, [0.5, 0.6])
    with pytest.raises(ValueError):
        scaling_sweep(sym, [0.5, 0.6, 1.2])


def test_overlap_coeff(sym, cs06, compass06):
    assert overlap_coeff(cs06, cs06) == pytest.approx(1.0)
    other = coherent_coefficients(sym, 0.5)
    a = abs(overlap_coeff(cs06, other))
    assert abs(overlap_coeff(evolve(cs06, 0.3), evolve(other, 0.3))) == pytest.approx(a, abs=1e-12)
    with pytest.raises(ParamsMismatchError):
        overlap_coeff(cs06, coherent_coefficients(PTParams(50, 46, 2), 0.6))


def test_cat_overlap_formula(cs06):
    cat = evolve_fraction(cs06, Fraction(1, 4))
    r = overlap_coeff(cs06, cs06.reflected())
    expected = abs((np.exp(-1j * math.pi / 4) + np.exp(1j * math.pi / 4) * r) / math.sqrt(2))
    assert abs(overlap_coeff(cs06, cat)) == pytest.approx(expected, abs=1e-12)


def test_overlap_routes(compass06, sym):
    g = PhaseSpaceGrid.for_state(compass06, 512, 1024)
    fa = wigner_fast(compass06, g)
    assert overlap_wigner(fa, fa) == pytest.approx(1.0, abs=1e-3)
    shifted = classical_packet(compass06, sym.t_cl / 40)
    fb = wigner_fast(shifted, g)
    assert overlap_wigner(fa, fb) == pytest.approx(abs(overlap_coeff(compass06, shifted)) ** 2, abs=1e-3)
    assert abs(overlap_position(compass06, shifted)) == pytest.approx(abs(overlap_coeff(compass06, shifted)), abs=1e-12)
    with pytest.raises(GridMismatchError):
        overlap_wigner(fa, wigner_fast(shifted, PhaseSpaceGrid.for_state(compass06, 256, 256)))


def test_section_extrema():
    x = np.linspace(0, 1, 2001)
    v = -(np.cos(2 * math.pi * 5 * x) + 1.0) ** 2
    ext = section_extrema(x, v, 0.3, 0.7)
    maxima = [e for e in ext if e[2] > 0]
    minima = [e for e in ext if e[2] < 0]
    assert [round(e[0], 4) for e in maxima] == [0.3, 0.5, 0.7][: len(maxima)] or len(maxima) >= 2
    assert all(abs(e[0] * 10 % 2 - 0) < 1e-3 or abs(e[0] * 10 % 2 - 2) < 1e-3 for e in minima)


def test_asymmetry_identical(sym):
    r = asymmetry_experiment(sym, sym, 0.6, 0.6)
    assert r.drift == 0.0
    assert r.overlap_wigner == pytest.approx(1.0, abs=1e-3)
    assert r.overlap_position == pytest.approx(1.0, abs=1e-12)


def test_asymmetry_routes(sym):
    r = asymmetry_experiment(sym, PTParams(50, 46, 2), 0.6, 0.6)
    assert r.overlap_wigner == pytest.approx(r.overlap_position, abs=1e-3)
    assert r.shift < r.tile_dx_span
    d = r.to_dict()
    assert set(d["sections"]) == {"x", "sym", "asym"} and len(d["sections"]["x"]) == len(d["sections"]["sym"])
    with pytest.raises(ParamsMismatchError):
        asymmetry_experiment(sym, PTParams(50, 46, 3), 0.6, 0.6)


@pytest.mark.parametrize("kappa", [34, 22])
def test_beta_for_peak(kappa):
    p = PTParams(50, kappa, 2)
    assert coherent_coefficients(p, beta_for_peak(p, 12)).peak_level() == 12
