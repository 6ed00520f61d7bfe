"""Command-line entry point: ``lmwave {noise,fit,table1,basis-check}``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, DataError, EstimationError
from .estimator import DEFAULT_SCALE, Dataset, DesignDensity, ThresholdRegime, fit_additive, predict
from .longmem import (
    LongMemorySpec,
    exact_partial_sum_variance,
    generate_noise,
    partial_sum_variance_slope,
)
from .simulate import (
    SimulationConfig,
    export_surface,
    load_config_mapping,
    sigma_field,
    simulate_replicate,
    write_surface_csv,
)
from .wavelet import build_basis, gram_matrix

log = logging.getLogger("lmwave")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4
THREADS_ENV = "LMWAVE_THREADS"
DEFAULT_SEED = 20240601

# cells plotted in the two surface figures: sigma5 and sigma3, both SNRs, all alphas
FIGURE_FIELDS = ("sigma5", "sigma3")


def _provenance(config_blob: str, seed) -> dict:
    return {
        "config_hash": hashlib.sha256(config_blob.encode()).hexdigest()[:16],
        "seed": seed,
        "version": __version__,
    }


def _threads(args) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got {env!r}")
    return 1


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def cmd_noise(args) -> int:
    spec = LongMemorySpec(args.alpha, method=args.method)
    seed = DEFAULT_SEED if args.seed is None else args.seed
    eps, info = generate_noise(spec, args.n, seed, return_info=True)
    out = Path(args.out or "noise.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["eps"])
        w.writerows([repr(float(v))] for v in eps)
    sizes = [2**k for k in range(6, int(np.log2(args.n)) + 1)] if args.n >= 128 else []
    slope = partial_sum_variance_slope(spec, sizes, reps=200, seed=seed) if len(sizes) >= 2 else None
    sidecar = {
        "spec": spec.to_dict(),
        "n": args.n,
        "generation": info,
        "realized_sum": float(eps.sum()),
        "realized_variance": float(np.var(eps)),
        "exact_partial_sum_variance": exact_partial_sum_variance(spec, args.n),
        "partial_sum_variance_slope": slope,
        "slope_sizes": sizes,
        "expected_slope": 2.0 - spec.alpha,
        "provenance": _provenance(json.dumps(spec.to_dict(), sort_keys=True), seed),
    }
    _write_json(out.with_suffix(out.suffix + ".json"), sidecar)
    log.info("wrote %d values to %s", args.n, out)
    return EXIT_OK


def read_data_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """Read ``t1,...,tr,y`` with mandatory header; errors name the row and column."""
    path = Path(path)
    try:
        fh = path.open(newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot open {path}: {exc}")
    with fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file, expected header t1,...,tr,y")
        if "y" not in header:
            raise DataError(f"{path}: schema error, no 'y' column in header {header}")
        pred_cols = [h for h in header if h != "y"]
        expected = [f"t{i + 1}" for i in range(len(pred_cols))]
        if pred_cols != expected or header[-1] != "y":
            raise DataError(f"{path}: schema error, header must be {','.join(expected + ['y'])}, got {header}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(f"{path}: row {lineno} has {len(row)} fields, expected {len(header)}")
            vals = []
            for col, cell in zip(header, row):
                try:
                    vals.append(float(cell))
                except ValueError:
                    raise DataError(f"{path}: row {lineno}, column '{col}': cannot parse {cell!r}")
            for col, v in zip(pred_cols, vals):
                if not 0.0 <= v < 1.0:
                    raise DataError(f"{path}: row {lineno}, column '{col}': {v} outside [0, 1)")
            rows.append(vals)
    if not rows:
        raise DataError(f"{path}: no data rows")
    arr = np.array(rows)
    return arr[:, :-1], arr[:, -1]


def parse_density(text: str) -> DesignDensity:
    """``uniform`` or ``histogram:h1,h2,...`` (equal bins, renormalized)."""
    text = text.strip()
    if text == "uniform":
        return DesignDensity.uniform()
    if text.startswith("histogram:"):
        try:
            heights = [float(v) for v in text.split(":", 1)[1].split(",")]
        except ValueError:
            raise ConfigError(f"cannot parse density {text!r}")
        return DesignDensity.histogram(heights)
    raise ConfigError(f"unknown density {text!r}; use 'uniform' or 'histogram:h1,h2,...'")


def cmd_fit(args) -> int:
    X, y = read_data_csv(args.data)
    opts = {}
    if args.config:
        opts = dict(load_config_mapping(args.config).get("fit", {}))
    densities = args.density or opts.get("densities") or ["uniform"] * X.shape[1]
    if len(densities) == 1 and X.shape[1] > 1:
        densities = densities * X.shape[1]
    dens = tuple(parse_density(d) for d in densities)
    kind = args.regime or opts.get("regime", "homoskedastic")
    gamma = args.gamma if args.gamma is not None else opts.get("gamma")
    gamma1 = args.gamma1 if args.gamma1 is not None else opts.get("gamma1")
    alpha = args.alpha if args.alpha is not None else opts.get("alpha")
    scale = args.threshold_scale if args.threshold_scale is not None else opts.get("threshold_scale", DEFAULT_SCALE)
    sid = args.sigma_field or opts.get("sigma_field")
    regime = ThresholdRegime(
        kind, gamma=gamma, gamma1=gamma1, alpha=alpha, scale=scale,
        sigma_field=sigma_field(sid) if sid else None,
    )
    levels = args.levels if args.levels is not None else opts.get("levels")
    basis = build_basis(args.vanishing_moments, args.depth)
    data = Dataset(X, y, dens)
    fit = fit_additive(data, basis, regime, levels)
    out = Path(args.out or "fit_out")
    doc = fit.to_dict()
    doc["provenance"] = _provenance(json.dumps(doc["metadata"], sort_keys=True, default=str), args.seed)
    _write_json(out / "fit.json", doc)
    pred = predict(fit, X)
    with (out / "predictions.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"t{i + 1}" for i in range(X.shape[1])] + ["y", "y_hat"])
        for row, yy, p in zip(X, y, pred):
            w.writerow([repr(float(v)) for v in row] + [repr(float(yy)), repr(float(p))])
    log.info("fit %d observations; kept %s coefficients", data.n, [c.n_kept() for c in fit.components])
    return EXIT_OK


def _table1_config(args) -> SimulationConfig:
    mapping = {}
    if args.config:
        data = load_config_mapping(args.config)
        mapping = dict(data.get("simulation", data))
    if args.seed is not None:
        mapping["seed"] = args.seed
    if args.reps is not None:
        mapping["reps"] = args.reps
    if args.levels is not None:
        mapping["levels"] = args.levels
    return SimulationConfig.from_mapping(mapping)


def cmd_table1(args) -> int:
    from .simulate import run_grid

    config = _table1_config(args)
    out = Path(args.out or "table1_out")
    workers = _threads(args)

    def flush(report):
        report.write(out)
        log.info("cells done: %d/%d", len(report.cells), len(config.cells()))

    report = run_grid(config, workers=workers, on_cell=flush)
    report.write(out)
    for sid in FIGURE_FIELDS:
        if sid not in config.sigma_fields or len(config.components) != 2:
            continue
        for snr in config.snrs_db:
            for alpha in config.alphas:
                rep = simulate_replicate(config, (sid, snr, alpha), 0)
                rows = export_surface(rep.fit, config.suite(), rep.beta0, grid=args.surface_grid)
                write_surface_csv(out / "surfaces" / f"surface_{sid}_snr{snr:g}_alpha{alpha:g}.csv", rows)
    return EXIT_OK


def basis_diagnostics(vanishing_moments: int, depth: int, max_level: int = 4, grid: int = 2**16) -> list:
    """``(name, residual, tolerance)`` for each invariant of the basis."""
    b = build_basis(vanishing_moments, depth)
    haar = vanishing_moments == 1
    x = b.table_grid()
    h = x[1] - x[0]
    phi, psi = b.eval_table_phi, b.eval_table_psi
    checks = []
    G = gram_matrix(b, max_level, grid)
    checks.append(("gram", float(np.abs(G - np.eye(len(G))).max()), 1e-10 if haar else 1e-4))
    for p in range(vanishing_moments):
        checks.append((f"moment_{p}", abs(float(np.sum(psi * x**p) * h)), 1e-10 if haar else 1e-6))
    checks.append(("phi_integral", abs(float(np.sum(phi) * h) - 1.0), 1e-10 if haar else 1e-6))
    per = 2**depth
    S = b.support_length
    pou = phi[:-1].reshape(S, per).sum(axis=0)
    checks.append(("partition_of_unity", float(np.abs(pou - 1.0).max()), 1e-10 if haar else 1e-6))
    # two-scale residual at every table node
    m = np.arange(phi.size)
    rhs = np.zeros(phi.size)
    for n, c in enumerate(b.filter):
        idx = 2 * m - n * per
        ok = (idx >= 0) & (idx < phi.size)
        rhs[ok] += np.sqrt(2.0) * c * phi[idx[ok]]
    checks.append(("two_scale", float(np.abs(phi - rhs).max()), 1e-10 if haar else 1e-6))
    return checks


def cmd_basis_check(args) -> int:
    checks = basis_diagnostics(args.vanishing_moments, args.depth)
    ok = True
    for name, resid, tol in checks:
        status = "PASS" if resid < tol else "FAIL"
        ok &= resid < tol
        print(f"{status} {name:<20s} residual={resid:.3e} tol={tol:.0e}")
    return EXIT_OK if ok else EXIT_NUMERIC


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML or JSON configuration file")
    common.add_argument("--seed", type=int, help=f"master seed (default {DEFAULT_SEED})")
    common.add_argument("--threads", type=int, help=f"worker processes (env {THREADS_ENV}; default 1)")
    common.add_argument("--out", help="output file or directory")
    common.add_argument("--reps", type=int, help="Monte Carlo replicates per cell")
    common.add_argument("--levels", type=int, help="number of resolution levels J")
    common.add_argument("-v", "--verbose", action="count", default=0)

    p = argparse.ArgumentParser(prog="lmwave", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    q = sub.add_parser("noise", parents=[common], help="generate long-memory noise as CSV")
    q.add_argument("--n", type=int, required=True)
    q.add_argument("--alpha", type=float, required=True)
    q.add_argument("--method", default="circulant_embedding",
                   choices=["circulant_embedding", "ma_truncation"])
    q.set_defaults(func=cmd_noise)

    q = sub.add_parser("fit", parents=[common], help="fit an additive model to a CSV file")
    q.add_argument("data", help="CSV with header t1,...,tr,y")
    q.add_argument("--density", action="append",
                   help="per-predictor density: uniform | histogram:h1,h2,... (repeat per column)")
    q.add_argument("--regime", choices=["homoskedastic", "heteroskedastic"])
    q.add_argument("--gamma", type=float)
    q.add_argument("--gamma1", type=float)
    q.add_argument("--alpha", type=float)
    q.add_argument("--threshold-scale", type=float)
    q.add_argument("--sigma-field", help="sigma1..sigma5 (heteroskedastic regime)")
    q.add_argument("--vanishing-moments", type=int, default=3)
    q.add_argument("--depth", type=int, default=14)
    q.set_defaults(func=cmd_fit)

    q = sub.add_parser("table1", parents=[common], help="run the MISE grid")
    q.add_argument("--surface-grid", type=int, default=64)
    q.set_defaults(func=cmd_table1)

    q = sub.add_parser("basis-check", parents=[common], help="verify wavelet basis invariants")
    q.add_argument("--vanishing-moments", type=int, default=3)
    q.add_argument("--depth", type=int, default=14)
    q.set_defaults(func=cmd_basis_check)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (EstimationError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except KeyboardInterrupt:
        print("interrupted; partial results were flushed", file=sys.stderr)
        return 130


if __name__ == "__main__":
    sys.exit(main())
