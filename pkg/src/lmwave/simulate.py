"""Monte Carlo MISE study over (sigma field x SNR x alpha) cells.

One replicate: uniform random design, additive truth
``U = beta_o + f(t) + g(x)`` with ``beta_o = 0.25 * median(f + g)`` over the
realized design, ARFIMA errors scaled so the realized SNR hits its target,
a hard-thresholding fit, and the integrated squared error against ``U`` on a
regular grid.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__
from .errors import ConfigError
from .estimator import DEFAULT_SCALE, AdditiveFit, Dataset, ThresholdRegime, fit_additive, predict
from .longmem import LongMemorySpec, generate_noise
from .wavelet import build_basis

__all__ = [
    "COMPONENTS",
    "SIGMA_FIELDS",
    "TestFunctionSuite",
    "SimulationConfig",
    "CellResult",
    "MiseReport",
    "generate_design",
    "calibrate_sigma_scale",
    "replicate_seeds",
    "simulate_replicate",
    "run_replicate",
    "run_grid",
    "export_surface",
    "write_surface_csv",
    "mise_on_grid",
    "coefficient_sampling",
]


def _quadratic(t):
    return 8.0 * (np.asarray(t) - 0.5) ** 2 - 2.0 / 3.0


def _cosine(x):
    return -np.cos(4.0 * np.pi * np.asarray(x) + 1.0)


def _zero(t):
    return np.zeros_like(np.asarray(t, dtype=float))


def _sine(t):
    return np.sin(2.0 * np.pi * np.asarray(t))


def _bump(t):
    # zero-mean smooth bump: exp(-50(t-1/2)^2) minus its integral
    t = np.asarray(t)
    return np.exp(-50.0 * (t - 0.5) ** 2) - math.sqrt(math.pi / 50.0) * math.erf(0.5 * math.sqrt(50.0))


COMPONENTS: dict[str, Callable] = {
    "quadratic": _quadratic,
    "cosine": _cosine,
    "sine": _sine,
    "bump": _bump,
    "zero": _zero,
}

SIGMA_FIELDS: dict[str, Callable] = {
    "sigma1": lambda t, x: np.ones(np.broadcast(t, x).shape),
    "sigma2": lambda t, x: (t + 0.4) * (x + 0.6),
    "sigma3": lambda t, x: (x + 0.6) ** 2 * (t + 0.4),
    "sigma4": lambda t, x: (x + 0.6) * np.sqrt(t + 0.4),
    "sigma5": lambda t, x: (t + 0.4) * (2.0 + np.cos(2.0 * np.pi * x)),
}


def sigma_field(sigma_id: str) -> Callable:
    """Named heteroskedasticity field; extra coordinates beyond two are ignored."""
    try:
        fn = SIGMA_FIELDS[sigma_id]
    except KeyError:
        raise ConfigError(f"unknown sigma field {sigma_id!r}; choose from {sorted(SIGMA_FIELDS)}")

    def field_fn(*coords):
        return fn(coords[0], coords[1])

    field_fn.__name__ = sigma_id
    return field_fn


@dataclass(frozen=True)
class TestFunctionSuite:
    """Named zero-mean components and the median rule for the intercept."""

    __test__ = False  # not a pytest class

    components: tuple = ("quadratic", "cosine")
    beta0_factor: float = 0.25

    def __post_init__(self):
        for name in self.components:
            if name not in COMPONENTS:
                raise ConfigError(f"unknown component {name!r}; choose from {sorted(COMPONENTS)}")
        if len(self.components) < 2:
            raise ConfigError("an additive model needs at least two components")

    @property
    def r(self) -> int:
        return len(self.components)

    def functions(self) -> list:
        return [COMPONENTS[name] for name in self.components]

    def additive(self, points) -> np.ndarray:
        P = np.atleast_2d(points)
        return sum(fn(P[:, m]) for m, fn in enumerate(self.functions()))

    def beta0(self, points) -> float:
        return float(self.beta0_factor * np.median(self.additive(points)))

    def truth(self, points, beta0: float) -> np.ndarray:
        return beta0 + self.additive(points)


@dataclass(frozen=True)
class SimulationConfig:
    n: int = 2**12
    alphas: tuple = (0.8, 0.6, 0.4, 0.2)
    snrs_db: tuple = (10.0, 15.0)
    sigma_fields: tuple = ("sigma1", "sigma2", "sigma3", "sigma4", "sigma5")
    reps: int = 1000
    vanishing_moments: int = 3
    table_depth: int = 14
    levels: int | None = 6
    regime: str = "homoskedastic"
    gamma: float | None = None
    gamma1: float | None = None
    threshold_scale: float = DEFAULT_SCALE
    seed: int = 20240601
    grid: int = 256
    snr_convention: str = "literal"
    noise_method: str = "circulant_embedding"
    common_random_numbers: bool = True
    components: tuple = ("quadratic", "cosine")

    def __post_init__(self):
        for name in ("alphas", "snrs_db", "sigma_fields", "components"):
            val = getattr(self, name)
            if isinstance(val, (str, bytes)) or not hasattr(val, "__iter__"):
                raise ConfigError(f"{name} must be a list")
            object.__setattr__(self, name, tuple(val))
            if not getattr(self, name):
                raise ConfigError(f"{name} must be nonempty")
        object.__setattr__(self, "alphas", tuple(float(a) for a in self.alphas))
        object.__setattr__(self, "snrs_db", tuple(float(s) for s in self.snrs_db))
        if self.n < 8 or self.n & (self.n - 1):
            raise ConfigError(f"n must be a power of two >= 8, got {self.n}")
        if self.reps < 1:
            raise ConfigError("reps must be >= 1")
        for a in self.alphas:
            if not 0.0 < a <= 1.0:
                raise ConfigError(f"alpha must lie in (0, 1], got {a}")
        for s in self.sigma_fields:
            sigma_field(s)
        if self.snr_convention not in ("literal", "power"):
            raise ConfigError("snr_convention must be 'literal' or 'power'")
        if self.regime not in ("homoskedastic", "heteroskedastic"):
            raise ConfigError(f"unknown regime {self.regime!r}")
        if self.levels is not None and self.levels < 1:
            raise ConfigError("levels must be positive")
        if self.grid < 2:
            raise ConfigError("grid must be >= 2")
        TestFunctionSuite(self.components)
        LongMemorySpec(1.0, method=self.noise_method)

    @classmethod
    def from_mapping(cls, mapping: dict) -> "SimulationConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(mapping) - names
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**mapping)

    @classmethod
    def from_file(cls, path) -> "SimulationConfig":
        """Read a TOML or JSON file; a ``[simulation]`` table is used if present."""
        data = load_config_mapping(path)
        return cls.from_mapping(data.get("simulation", data))

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def cells(self) -> list:
        return [(s, snr, a) for s in self.sigma_fields for snr in self.snrs_db for a in self.alphas]

    def suite(self) -> TestFunctionSuite:
        return TestFunctionSuite(self.components)


def load_config_mapping(path) -> dict:
    """Parse a TOML (default) or JSON (``.json`` suffix) file into a dict."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}")
    try:
        data = json.loads(text) if path.suffix.lower() == ".json" else tomllib.loads(text)
    except ValueError as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}")
    if not isinstance(data, dict):
        raise ConfigError("config root must be a table")
    return data


def generate_design(n: int, r: int, seed=None) -> np.ndarray:
    """``n x r`` i.i.d. Uniform[0, 1) predictors."""
    if n < 1 or r < 1:
        raise ValueError("n and r must be positive")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return rng.random((n, r))


def calibrate_sigma_scale(U_values, raw_noise, sigma_field_values, target_snr_db: float,
                          convention: str = "literal") -> float:
    """Scale ``c`` with ``SNR(U, c * sigma * eps) = target`` on the realized sample.

    ``literal``: ``SNR = 20 log10(||U||^2 / ||c sigma eps||^2)``.
    ``power``:   ``SNR = 10 log10(||U||^2 / ||c sigma eps||^2)``.
    An infinite target gives ``c = 0``.
    """
    if math.isinf(target_snr_db) and target_snr_db > 0:
        return 0.0
    U = np.asarray(U_values, dtype=float)
    e = np.asarray(sigma_field_values, dtype=float) * np.asarray(raw_noise, dtype=float)
    if U.shape != e.shape:
        raise ValueError("U, noise and sigma values must have the same length")
    noise_energy = float(np.dot(e, e))
    if not noise_energy > 0:
        raise ValueError("noise has zero norm; cannot calibrate")
    factor = {"literal": 20.0, "power": 10.0}[convention]
    return math.sqrt(float(np.dot(U, U)) / noise_energy * 10.0 ** (-target_snr_db / factor))


def realized_snr(U_values, noise_values, convention: str = "literal") -> float:
    factor = {"literal": 20.0, "power": 10.0}[convention]
    U = np.asarray(U_values, dtype=float)
    e = np.asarray(noise_values, dtype=float)
    return factor * math.log10(np.dot(U, U) / np.dot(e, e))


def _cell_key(config: SimulationConfig, cell) -> tuple:
    sid, snr, alpha = cell
    snr_key = 2**31 - 1 if math.isinf(snr) else int(round(snr * 1000)) % 2**31
    return (int(sid.removeprefix("sigma")) if sid.startswith("sigma") else 0,
            snr_key, int(round(alpha * 10**6)))


def replicate_seeds(config: SimulationConfig, cell, rep_index: int):
    """``(design, noise)`` seed sequences for one replicate.

    With common random numbers every cell reuses the same design and
    innovations for a given ``rep_index``; otherwise the cell is part of the
    key.
    """
    key = (int(rep_index),) if config.common_random_numbers else (int(rep_index),) + _cell_key(config, cell)
    return (
        np.random.SeedSequence(config.seed, spawn_key=key + (0,)),
        np.random.SeedSequence(config.seed, spawn_key=key + (1,)),
    )


@dataclass
class Replicate:
    fit: AdditiveFit
    design: np.ndarray
    responses: np.ndarray
    truth: np.ndarray
    beta0: float
    noise_scale: float


def _regime(config: SimulationConfig, alpha: float, sid: str) -> ThresholdRegime:
    if config.regime == "homoskedastic":
        return ThresholdRegime("homoskedastic", gamma=config.gamma, scale=config.threshold_scale)
    return ThresholdRegime("heteroskedastic", gamma=config.gamma, gamma1=config.gamma1, alpha=alpha,
                           scale=config.threshold_scale, sigma_field=sigma_field(sid))


def simulate_replicate(config: SimulationConfig, cell, rep_index: int) -> Replicate:
    """Generate one data set for ``cell = (sigma_id, snr_db, alpha)`` and fit it."""
    sid, snr, alpha = cell
    suite = config.suite()
    design_seed, noise_seed = replicate_seeds(config, cell, rep_index)
    X = generate_design(config.n, suite.r, design_seed)
    beta0 = suite.beta0(X)
    U = suite.truth(X, beta0)
    eps = generate_noise(LongMemorySpec(alpha, method=config.noise_method), config.n, noise_seed)
    sig = sigma_field(sid)(*X.T)
    c = calibrate_sigma_scale(U, eps, sig, snr, config.snr_convention)
    y = U + c * sig * eps
    basis = build_basis(config.vanishing_moments, config.table_depth)
    fit = fit_additive(Dataset(X, y), basis, _regime(config, alpha, sid), config.levels)
    return Replicate(fit, X, y, U, beta0, c)


def mise_on_grid(fit: AdditiveFit, suite: TestFunctionSuite, beta0: float, grid: int) -> float:
    """Mean of ``(U_hat - U)^2`` over the tensor grid ``{i / grid}^r``.

    The error is additive, so the r-dimensional mean reduces exactly to
    one-dimensional means: ``(a + sum mu_m)^2 - sum mu_m^2 + sum E F_m^2``.
    """
    t = np.arange(grid) / grid
    a = fit.intercept - beta0
    means = []
    squares = []
    for m, fn in enumerate(suite.functions()):
        F = fit.component_curve(m, t) - fn(t)
        means.append(F.mean())
        squares.append(np.mean(F * F))
    mu = np.array(means)
    return float((a + mu.sum()) ** 2 - np.dot(mu, mu) + sum(squares))


def run_replicate(config: SimulationConfig, cell, rep_index: int, detail: bool = False):
    """MISE of one replicate; with ``detail`` also the observation-level error.

    The observation-level statistic is ``mean_i (U_hat(t_i) - y_i)^2``.
    """
    rep = simulate_replicate(config, cell, rep_index)
    mise = mise_on_grid(rep.fit, config.suite(), rep.beta0, config.grid)
    if not detail:
        return mise
    resid = predict(rep.fit, rep.design) - rep.responses
    return {"mise": mise, "mise_obs": float(np.mean(resid * resid)), "beta0": rep.beta0,
            "noise_scale": rep.noise_scale}


@dataclass
class CellResult:
    sigma_id: str
    snr_db: float
    alpha: float
    mean_mise: float
    se: float
    n_reps: int
    mean_mise_obs: float
    se_obs: float

    @property
    def se_defined(self) -> bool:
        return self.n_reps > 1


CSV_COLUMNS = ["sigma_id", "snr_db", "alpha", "mean_mise", "se", "n_reps", "mean_mise_obs", "se_obs"]


@dataclass
class MiseReport:
    cells: list
    config: SimulationConfig
    provenance: dict = field(default_factory=dict)

    def lookup(self, sigma_id: str, snr_db: float, alpha: float) -> CellResult:
        for c in self.cells:
            if c.sigma_id == sigma_id and c.snr_db == snr_db and c.alpha == alpha:
                return c
        raise KeyError((sigma_id, snr_db, alpha))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for c in self.cells:
            w.writerow([c.sigma_id, repr(c.snr_db), repr(c.alpha), repr(c.mean_mise), repr(c.se),
                        c.n_reps, repr(c.mean_mise_obs), repr(c.se_obs)])
        return buf.getvalue()

    def to_dict(self) -> dict:
        cells = []
        for c in self.cells:
            d = dataclasses.asdict(c)
            d["se_defined"] = c.se_defined
            for k in ("se", "se_obs"):
                if not c.se_defined:
                    d[k] = None
            cells.append(d)
        return {"cells": cells, "config": self.config.to_dict(), "provenance": self.provenance}

    def write(self, out_dir, stem: str = "mise_report") -> tuple[Path, Path]:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        csv_path = out_dir / f"{stem}.csv"
        json_path = out_dir / f"{stem}.json"
        csv_path.write_text(self.to_csv(), encoding="utf-8")
        json_path.write_text(json.dumps(self.to_dict(), indent=2, allow_nan=False) + "\n", encoding="utf-8")
        return csv_path, json_path


def _replicate_pair(args):
    config, cell, rep_index = args
    d = run_replicate(config, cell, rep_index, detail=True)
    return d["mise"], d["mise_obs"]


def _summarize(values: np.ndarray) -> tuple[float, float]:
    mean = float(np.mean(values))
    se = float(np.std(values, ddof=1) / math.sqrt(values.size)) if values.size > 1 else math.nan
    return mean, se


def run_cell(config: SimulationConfig, cell, executor=None) -> CellResult:
    jobs = [(config, cell, i) for i in range(config.reps)]
    if executor is None:
        pairs = [_replicate_pair(j) for j in jobs]
    else:
        pairs = list(executor.map(_replicate_pair, jobs, chunksize=max(1, config.reps // 32)))
    vals = np.array(pairs)
    mean, se = _summarize(vals[:, 0])
    mean_obs, se_obs = _summarize(vals[:, 1])
    sid, snr, alpha = cell
    return CellResult(sid, snr, alpha, mean, se, config.reps, mean_obs, se_obs)


def run_grid(config: SimulationConfig, workers: int = 1, on_cell: Callable | None = None) -> MiseReport:
    """Fill every cell with mean and standard error over ``config.reps`` replicates.

    Results depend only on ``config`` (including its seed), never on
    ``workers``.  ``on_cell(report)`` is called after each finished cell so
    callers can flush partial results.
    """
    start = time.perf_counter()
    report = MiseReport([], config, {
        "config_hash": config.config_hash(),
        "seed": config.seed,
        "version": __version__,
        "seeding": "SeedSequence(seed, spawn_key=(rep[, cell], stream))",
    })
    executor = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for cell in config.cells():
            report.cells.append(run_cell(config, cell, executor))
            report.provenance["wall_time_s"] = time.perf_counter() - start
            report.provenance["complete"] = len(report.cells) == len(config.cells())
            if on_cell is not None:
                on_cell(report)
    finally:
        if executor is not None:
            executor.shutdown()
    return report


def export_surface(fit: AdditiveFit, suite: TestFunctionSuite, beta0: float, grid: int = 64) -> np.ndarray:
    """Rows ``(t, x, U, U_hat)`` on the grid ``{i / grid}^2`` (t varies slowest)."""
    if fit.r != 2 or suite.r != 2:
        raise ValueError("surface export needs a bivariate fit")
    g = np.arange(grid) / grid
    T, Xg = np.meshgrid(g, g, indexing="ij")
    P = np.column_stack([T.ravel(), Xg.ravel()])
    return np.column_stack([P, suite.truth(P, beta0), predict(fit, P)])


def write_surface_csv(path, rows: np.ndarray) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "x", "U", "U_hat"])
        for row in rows:
            w.writerow([repr(float(v)) for v in row])
    return path


def coefficient_sampling(n: int, reps: int, alpha: float, sigma_id: str = "sigma1", seed=None,
                         j: int = 2, k: int = 1, component: int = 0, signal: bool = True,
                         noise_scale: float = 1.0, vanishing_moments: int = 3,
                         table_depth: int = 14) -> dict:
    """Sampling distribution of ``beta_hat_jk`` and ``beta_hat_o`` over ``reps`` data sets.

    Responses are ``U + noise_scale * sigma(t, x) * eps`` (``U`` omitted when
    ``signal`` is false) with a fresh uniform design and ARFIMA draw per
    replicate.  Returns arrays ``beta`` and ``intercept`` and the truth values.
    """
    from .estimator import estimate_intercept, estimate_wavelet_coeff

    suite = TestFunctionSuite()
    basis = build_basis(vanishing_moments, table_depth)
    spec = LongMemorySpec(alpha)
    sig_fn = sigma_field(sigma_id)
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    beta = np.empty(reps)
    icpt = np.empty(reps)
    for i in range(reps):
        ds = np.random.SeedSequence(root.entropy, spawn_key=root.spawn_key + (i, 0))
        ns = np.random.SeedSequence(root.entropy, spawn_key=root.spawn_key + (i, 1))
        X = generate_design(n, suite.r, ds)
        y = noise_scale * sig_fn(*X.T) * generate_noise(spec, n, ns)
        if signal:
            y = y + suite.truth(X, 0.0)
        data = Dataset(X, y)
        beta[i] = estimate_wavelet_coeff(data, basis, component, j, k)
        icpt[i] = estimate_intercept(data)
    fn = suite.functions()[component]
    from .wavelet import quadrature_coefficient

    return {
        "beta": beta,
        "intercept": icpt,
        "beta_true": float(quadrature_coefficient(basis, fn, j, k)) if signal else 0.0,
        "intercept_true": 0.0,
    }
