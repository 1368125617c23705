"""Command-line front end: ``ptsubplanck {spectrum,wigner,scaling,revival-check,sensitivity}``.

Every run writes its resolved configuration to ``config.json`` in the output
directory next to the data files.  Numbers are written with 17 significant
digits and all computations are deterministic.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .ptcore import (
    N_MAX_CAP,
    DomainError,
    PTParams,
    basis_matrix,
    coherent_coefficients,
    energy,
    evolve_fraction,
)

log = logging.getLogger("ptsubplanck")

DEFAULT_BETAS = tuple(round(0.30 + 0.05 * i, 2) for i in range(11))
#: coherent-state parameter of both wells in the asymmetry comparison
ASYMMETRY_BETA = 0.6


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    params: PTParams
    beta: float = 0.6
    theta: float = math.pi / 4
    frac: Fraction = Fraction(1, 8)
    nx: int | None = None
    np_: int | None = None
    output_dir: Path = Path(".")
    direct: bool = False
    extra: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "rho": self.params.rho,
            "kappa": self.params.kappa,
            "alpha": self.params.alpha,
            "beta": self.beta,
            "theta": self.theta,
            "frac": f"{self.frac.numerator}/{self.frac.denominator}",
            "grid": f"{self.nx}x{self.np_}" if self.nx else None,
            "direct": self.direct,
            **{k: v for k, v in sorted(self.extra.items())},
        }


def _g(x: float) -> str:
    return f"{x:.17g}"


def parse_frac(text: str) -> Fraction:
    from .revival import FractionalTime

    try:
        return FractionalTime.parse(text).fraction
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"bad fraction {text!r}: {exc}") from None


def parse_grid(text: str) -> tuple[int, int]:
    try:
        a, b = text.lower().split("x")
        nx, np_ = int(a), int(b)
    except ValueError:
        raise ConfigError(f"grid must look like NXxNP, got {text!r}") from None
    if nx < 16 or np_ < 16:
        raise ConfigError("grids need at least 16 samples per axis")
    return nx, np_


def read_config_file(path: str) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from None
    for lineno, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        out[key.strip().replace("-", "_")] = value.strip()
    return out


_DEFAULTS = {"rho": "50", "kappa": "50", "alpha": "2", "beta": None, "theta": str(math.pi / 4),
             "frac": "1/8", "grid": None, "out": "."}


def resolve(args: argparse.Namespace) -> RunConfig:
    merged = dict(_DEFAULTS)
    if args.config:
        file_vals = read_config_file(args.config)
        unknown = set(file_vals) - set(_DEFAULTS) - {"direct", "betas", "lambda_max", "samples", "kappa_asym", "n_levels", "analytic_samples"}
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        merged.update(file_vals)
    for key in _DEFAULTS:
        val = getattr(args, key, None)
        if val is not None:
            merged[key] = val
    try:
        params = PTParams(float(merged["rho"]), float(merged["kappa"]), float(merged["alpha"]))
    except (DomainError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    default_beta = 0.4 if args.command == "sensitivity" else 0.6
    try:
        beta = float(merged["beta"]) if merged["beta"] is not None else default_beta
        theta = float(merged["theta"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if not 0.0 <= beta < 1.0:
        raise ConfigError(f"beta must lie in [0, 1), got {beta}")
    # without --grid, Wigner output uses 512x512 and tile sweeps their own denser default
    nx, np_ = parse_grid(str(merged["grid"])) if merged["grid"] is not None else (None, None)
    direct = bool(getattr(args, "direct", False)) or str(merged.get("direct", "")).lower() in {"1", "true", "yes"}
    extra = {}
    for key in ("betas", "lambda_max", "samples", "kappa_asym", "n_levels", "analytic_samples"):
        val = getattr(args, key, None)
        if val is None and key in merged:
            val = merged[key]
        if val is not None:
            extra[key] = val
    return RunConfig(params, beta, theta, parse_frac(str(merged["frac"])), nx, np_, Path(merged["out"]),
                     direct, extra)


def _write_config(cfg: RunConfig, files: list[str]) -> None:
    meta = {"config": cfg.as_dict(), "files": sorted(files)}
    (cfg.output_dir / "config.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def _dump_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n")


# -- subcommands --------------------------------------------------------------------

def cmd_spectrum(cfg: RunConfig) -> list[str]:
    n_levels = int(cfg.extra.get("n_levels", 50))
    if not 1 <= n_levels <= N_MAX_CAP + 1:
        raise ConfigError(f"n_levels must lie in [1, {N_MAX_CAP + 1}]")
    with open(cfg.output_dir / "spectrum.csv", "w") as fh:
        fh.write("n,E\n")
        for n in range(n_levels):
            fh.write(f"{n},{_g(energy(cfg.params, n))}\n")
    files = ["spectrum.csv"]
    if cfg.extra.get("samples"):
        xs = np.linspace(0.0, cfg.params.width, int(cfg.extra["samples"]))
        psi = basis_matrix(cfg.params, n_levels - 1, xs)
        with open(cfg.output_dir / "eigenfunctions.csv", "w") as fh:
            fh.write("x," + ",".join(f"psi{n}" for n in range(n_levels)) + "\n")
            for i, x in enumerate(xs):
                fh.write(_g(x) + "," + ",".join(_g(v) for v in psi[:, i]) + "\n")
        files.append("eigenfunctions.csv")
    return files


def cmd_wigner(cfg: RunConfig) -> list[str]:
    from .wigner import DEFAULT_NP, DEFAULT_NX, PhaseSpaceGrid, wigner

    state = evolve_fraction(coherent_coefficients(cfg.params, cfg.beta), cfg.frac)
    grid = PhaseSpaceGrid.for_state(state, cfg.nx or DEFAULT_NX, cfg.np_ or DEFAULT_NP)
    field_ = wigner(state, grid, direct=cfg.direct)
    (cfg.output_dir / "wigner.bin").write_bytes(field_.to_bytes())
    with open(cfg.output_dir / "wigner.csv", "w") as fh:
        field_.to_csv(fh)
    return ["wigner.bin", "wigner.csv"]


def cmd_scaling(cfg: RunConfig) -> list[str]:
    from .analysis import fit_dict, scaling_sweep, write_scaling_csv

    betas = cfg.extra.get("betas", DEFAULT_BETAS)
    if isinstance(betas, str):
        try:
            betas = [float(b) for b in betas.split(",") if b.strip()]
        except ValueError as exc:
            raise ConfigError(f"bad beta list: {exc}") from None
    if len(betas) < 3:
        raise ConfigError(f"a scaling fit needs at least 3 beta values, got {len(betas)}")
    grid_kw = {"nx": cfg.nx, "np_": cfg.np_} if cfg.nx else None
    fit, rows = scaling_sweep(cfg.params, betas, cfg.frac, grid_kw=grid_kw)
    with open(cfg.output_dir / "scaling.csv", "w") as fh:
        write_scaling_csv(rows, fh)
    _dump_json(cfg.output_dir / "fit.json", fit_dict(fit))
    return ["scaling.csv", "fit.json"]


def cmd_revival_check(cfg: RunConfig) -> list[str]:
    from . import revival

    state0 = coherent_coefficients(cfg.params, cfg.beta)
    report: dict = {}

    def attempt(name, fn):
        try:
            report[name] = fn()
        except DomainError as exc:
            report[name] = None
            report.setdefault("skipped", {})[name] = str(exc)

    attempt("cat_residual", lambda: revival.cat_identity_residual(state0))
    attempt("even_odd_residual", lambda: revival.even_odd_split(state0))
    attempt("compass_residual", lambda: revival.compass_identity_residual(state0))
    ft = revival.FractionalTime(cfg.frac.numerator, cfg.frac.denominator)

    def decomp():
        dec = revival.clone_decomposition(state0, ft)
        return {"frac": str(ft), "clones": ft.clones, "count": dec.count(),
                "weights": dec.weights.tolist(), "residual": dec.residual}

    attempt("clone_decomposition", decomp)
    _dump_json(cfg.output_dir / "revival.json", report)
    return ["revival.json"]


def cmd_sensitivity(cfg: RunConfig) -> list[str]:
    from .analysis import asymmetry_experiment
    from .sensitivity import analytic_discrepancy, overlap_sweep

    p = cfg.params
    lam_max = float(cfg.extra.get("lambda_max", 0.5))
    n = int(cfg.extra.get("samples", 201))
    if n < 50:
        raise ConfigError("sensitivity sweeps need at least 50 samples")
    state_t = evolve_fraction(coherent_coefficients(p, cfg.beta), cfg.frac)
    curve = overlap_sweep(p, cfg.beta, cfg.theta, lam_max, n, state_t)
    if curve.extracted_period is None:
        log.warning("fewer than two overlap minima in [0, %g]; period is null", lam_max)

    analytic = [float("nan")] * n
    report = None
    n_analytic = int(cfg.extra.get("analytic_samples", 13))
    if p.is_symmetric and n_analytic > 0:
        inside = [r for r in curve.lambda_samples if r <= 0.3 + 1e-12]
        grid = inside[:: max(1, len(inside) // max(n_analytic - 1, 1))]
        report = analytic_discrepancy(p, cfg.beta, cfg.theta, grid, float(cfg.frac) * p.t_rev)
        lookup = {s["re_lambda"]: s["analytic"] for s in report["samples"]}
        analytic = [lookup.get(float(r), float("nan")) for r in curve.lambda_samples]
    with open(cfg.output_dir / "overlap.csv", "w") as fh:
        fh.write("lambda,overlap_oracle,overlap_analytic\n")
        for r, o, a in zip(curve.lambda_samples, curve.overlaps, analytic):
            fh.write(f"{_g(r)},{_g(o)},{_g(a) if math.isfinite(a) else ''}\n")

    try:
        asym = PTParams(p.rho, float(cfg.extra.get("kappa_asym", p.kappa - 4)), p.alpha)
    except (DomainError, ValueError) as exc:
        raise ConfigError(f"kappa_asym: {exc}") from None
    rep = asymmetry_experiment(p, asym, ASYMMETRY_BETA, ASYMMETRY_BETA, frac=cfg.frac)
    summary = {
        "overlap_curve": curve.to_dict(),
        "analytic_vs_oracle": report,
        "asymmetry": {k: v for k, v in rep.to_dict().items() if k != "sections"},
    }
    _dump_json(cfg.output_dir / "sensitivity.json", summary)
    _dump_json(cfg.output_dir / "asymmetry_sections.json", rep.to_dict()["sections"])
    return ["overlap.csv", "sensitivity.json", "asymmetry_sections.json"]


COMMANDS = {
    "spectrum": cmd_spectrum,
    "wigner": cmd_wigner,
    "scaling": cmd_scaling,
    "revival-check": cmd_revival_check,
    "sensitivity": cmd_sensitivity,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--rho", type=str)
    common.add_argument("--kappa", type=str)
    common.add_argument("--alpha", type=str)
    common.add_argument("--beta", type=str)
    common.add_argument("--theta", type=str)
    common.add_argument("--frac", type=str, help="fraction r/s of the revival time")
    common.add_argument("--grid", type=str, help="NXxNP")
    common.add_argument("--out", type=str, help="output directory")
    common.add_argument("--config", type=str, help="key = value file; flags override it")
    common.add_argument("-v", "--verbose", action="store_true")

    ap = argparse.ArgumentParser(prog="ptsubplanck", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    sp = sub.add_parser("spectrum", parents=[common])
    sp.add_argument("--n-levels", dest="n_levels", type=int)
    sp.add_argument("--samples", type=int, help="also write eigenfunctions at this many x points")
    sp = sub.add_parser("wigner", parents=[common])
    sp.add_argument("--direct", action="store_true", help="reference quadrature instead of the fast transform")
    sp = sub.add_parser("scaling", parents=[common])
    sp.add_argument("--betas", type=str, help="comma-separated list")
    sub.add_parser("revival-check", parents=[common])
    sp = sub.add_parser("sensitivity", parents=[common])
    sp.add_argument("--lambda-max", dest="lambda_max", type=float)
    sp.add_argument("--samples", type=int)
    sp.add_argument("--kappa-asym", dest="kappa_asym", type=float)
    sp.add_argument("--analytic-samples", dest="analytic_samples", type=int,
                    help="points in [0, 0.3] for the closed-form comparison; 0 skips it")
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        cfg = resolve(args)
        cfg.output_dir.mkdir(parents=True, exist_ok=True)
        files = COMMANDS[args.command](cfg)
        _write_config(cfg, files)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # numeric or runtime failure
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
