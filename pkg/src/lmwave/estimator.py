"""Hard-thresholding wavelet estimation of additive regression under random design.

Model: ``y_i = beta_o + sum_m f_m(t_mi) + sigma(t_i) eps_i`` with predictors
drawn independently from known densities ``h_m`` on [0, 1).  Every
coefficient is estimated by an inverse-density weighted empirical mean,

    beta_hat_jk^(m)  = 1/N sum_i y_i / prod_q h_q(t_qi) * psi_jk(t_mi)
    theta_hat_jk^(m) = 1/N sum_i y_i / prod_q h_q(t_qi) * (phi_jk(t_mi) - 2**(-j/2))
    beta_hat_o       = 1/N sum_i y_i / prod_q h_q(t_qi)

and wavelet coefficients are kept only when they exceed a level threshold.
The bivariate model is the case ``r = 2`` of the same code path.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError, DataError, EstimationError
from .wavelet import WaveletBasis, build_basis, eval_phi, level_analysis, level_synthesis

__all__ = [
    "DesignDensity",
    "Dataset",
    "ThresholdRegime",
    "CoefficientSet",
    "AdditiveFit",
    "select_max_level",
    "estimate_wavelet_coeff",
    "estimate_wavelet_level",
    "estimate_scaling_coeff",
    "estimate_intercept",
    "compute_threshold",
    "sigma_psi_integrals",
    "sigma_psi_integral_is_zero",
    "fit_additive",
    "fit_bivariate",
    "predict",
]

FIT_FORMAT = "lmwave.additive-fit"
FIT_VERSION = 1
MAD_TO_SD = 1.4826
# multiplier on the pilot noise scale; 0.5 * ln(N) is close to sqrt(2 ln N) at N = 2**12
DEFAULT_SCALE = 0.5


@dataclass(frozen=True, eq=False)
class DesignDensity:
    """Known marginal density of one predictor, bounded away from 0 and infinity.

    Evaluation checks the bounds on every call; a value outside
    ``[lower_bound, upper_bound]`` raises :class:`EstimationError`.
    """

    kind: str
    evaluator: Callable[[np.ndarray], np.ndarray]
    lower_bound: float
    upper_bound: float
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 < self.lower_bound <= self.upper_bound < math.inf:
            raise ConfigError("density bounds must satisfy 0 < lower <= upper < inf")

    @classmethod
    def uniform(cls) -> "DesignDensity":
        return cls("uniform", lambda t: np.ones_like(np.asarray(t, dtype=float)), 1.0, 1.0)

    @classmethod
    def histogram(cls, heights: Sequence[float]) -> "DesignDensity":
        """Piecewise-constant density on equal bins; heights are renormalized."""
        h = np.asarray(heights, dtype=float)
        if h.ndim != 1 or h.size == 0 or np.any(~np.isfinite(h)) or np.any(h <= 0):
            raise ConfigError("histogram heights must be a nonempty list of positive numbers")
        h = h * h.size / h.sum()
        nb = h.size

        def evaluate(t):
            idx = np.minimum((np.asarray(t, dtype=float) * nb).astype(np.int64), nb - 1)
            return h[idx]

        return cls("histogram", evaluate, float(h.min()), float(h.max()), {"heights": h.tolist()})

    @classmethod
    def user_supplied(cls, fn, lower_bound: float, upper_bound: float) -> "DesignDensity":
        return cls("user_supplied", fn, float(lower_bound), float(upper_bound))

    def __call__(self, t) -> np.ndarray:
        vals = np.asarray(self.evaluator(t), dtype=float)
        # relative slack absorbs rounding in user-supplied evaluators
        lo = self.lower_bound * (1.0 - 1e-12)
        hi = self.upper_bound * (1.0 + 1e-12)
        if vals.size and (not np.all(np.isfinite(vals)) or vals.min() < lo or vals.max() > hi):
            raise EstimationError(
                f"{self.kind} density outside its bounds [{self.lower_bound}, {self.upper_bound}]"
            )
        return vals

    def to_dict(self) -> dict:
        return {"kind": self.kind, "lower_bound": self.lower_bound,
                "upper_bound": self.upper_bound, **self.params}


@dataclass(frozen=True, eq=False)
class Dataset:
    """Observations ``(t_1i, ..., t_ri, y_i)`` with the predictors' known densities.

    Estimates are accumulated in a canonical (sorted) observation order, so
    permuting the rows leaves every estimate bit-identical.
    """

    predictors: np.ndarray
    responses: np.ndarray
    densities: tuple = ()

    def __post_init__(self):
        X = np.array(self.predictors, dtype=float)
        y = np.array(self.responses, dtype=float).ravel()
        if X.ndim == 1:
            raise DataError("predictors must be an N x r array")
        if X.shape[0] != y.size:
            raise DataError(f"{X.shape[0]} predictor rows but {y.size} responses")
        if X.shape[0] < 2:
            raise DataError("need at least two observations")
        if X.shape[1] < 2:
            raise DataError("an additive model needs r >= 2 predictors")
        if not np.all(np.isfinite(X)) or not np.all(np.isfinite(y)):
            raise DataError("predictors and responses must be finite")
        if X.min() < 0.0 or X.max() >= 1.0:
            raise DataError("predictors must lie in [0, 1)")
        dens = tuple(self.densities) or tuple(DesignDensity.uniform() for _ in range(X.shape[1]))
        if len(dens) != X.shape[1]:
            raise DataError(f"{len(dens)} densities for {X.shape[1]} predictors")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "predictors", X)
        object.__setattr__(self, "responses", y)
        object.__setattr__(self, "densities", dens)

    @property
    def n(self) -> int:
        return self.predictors.shape[0]

    def shifted(self, offset: float) -> "Dataset":
        """Same design with ``offset`` subtracted from every response."""
        return Dataset(self.predictors, self.responses - offset, self.densities)

    @property
    def r(self) -> int:
        return self.predictors.shape[1]

    @cached_property
    def order(self) -> np.ndarray:
        keys = [self.responses] + [self.predictors[:, q] for q in range(self.r - 1, -1, -1)]
        return np.lexsort(keys)

    @cached_property
    def sorted_predictors(self) -> np.ndarray:
        return self.predictors[self.order]

    @cached_property
    def weights(self) -> np.ndarray:
        """``y_i / prod_q h_q(t_qi)`` in canonical order."""
        X = self.sorted_predictors
        denom = np.ones(self.n)
        for q, dens in enumerate(self.densities):
            denom = denom * dens(X[:, q])
        return self.responses[self.order] / denom


@dataclass(frozen=True)
class ThresholdRegime:
    """Threshold rule.

    ``homoskedastic``: ``lambda = gamma ln(N) / sqrt(N)`` everywhere.
    ``heteroskedastic``: the same where ``int psi_jk(t_m) sigma(t) dt = 0``
    and ``gamma1 sqrt(ln(N) / N**alpha)`` elsewhere.

    ``gamma`` / ``gamma1`` left as ``None`` are set during the fit to
    ``scale * sigma_hat`` with ``sigma_hat = 1.4826 * MAD * sqrt(N)`` of the
    finest-level raw coefficients of that component.

    For the heteroskedastic kind the zero-integral condition comes from
    ``zero_integral(m, j, k)`` if given, otherwise it is computed by
    quadrature from ``sigma_field``.
    """

    kind: str = "homoskedastic"
    gamma: float | None = None
    gamma1: float | None = None
    alpha: float | None = None
    scale: float = DEFAULT_SCALE
    sigma_field: Callable | None = None
    zero_integral: Callable[[int, int, int], bool] | None = None

    def __post_init__(self):
        if self.kind not in ("homoskedastic", "heteroskedastic"):
            raise ConfigError(f"unknown threshold regime {self.kind!r}")
        if self.kind == "heteroskedastic":
            if self.alpha is None:
                raise ConfigError("heteroskedastic thresholds require alpha")
            if not 0.0 < self.alpha <= 1.0:
                raise ConfigError(f"alpha must lie in (0, 1], got {self.alpha}")
            if self.sigma_field is None and self.zero_integral is None:
                raise ConfigError("heteroskedastic thresholds require sigma_field or zero_integral")
        for name in ("gamma", "gamma1"):
            v = getattr(self, name)
            if v is not None and not v >= 0:
                raise ConfigError(f"{name} must be nonnegative")
        if not self.scale > 0:
            raise ConfigError("scale must be positive")


def select_max_level(n: int) -> int:
    """Finest level ``J = floor(log2(n / ln n))`` (at least 1)."""
    if n < 8:
        raise ValueError(f"need n >= 8 to select a resolution level, got {n}")
    return max(1, int(math.floor(math.log2(n / math.log(n)))))


def _check_component(data: Dataset, m: int) -> int:
    if not 0 <= m < data.r:
        raise ValueError(f"component index {m} out of range for r={data.r}")
    return m


def estimate_wavelet_level(data: Dataset, basis: WaveletBasis, m: int, j: int) -> np.ndarray:
    """``beta_hat_jk`` of component ``m`` for all ``k`` at level ``j``."""
    _check_component(data, m)
    t = data.sorted_predictors[:, m]
    return level_analysis(basis, j, t, data.weights, "psi") / data.n


def estimate_wavelet_coeff(data: Dataset, basis: WaveletBasis, m: int, j: int, k: int) -> float:
    if not 0 <= k < 2**j:
        raise ValueError(f"shift k={k} out of range for level j={j}")
    return float(estimate_wavelet_level(data, basis, m, j)[k])


def estimate_scaling_level(data: Dataset, basis: WaveletBasis, m: int, j: int) -> np.ndarray:
    """``theta_hat_jk`` for all ``k``; the ``2**(-j/2)`` term removes the mean."""
    _check_component(data, m)
    t = data.sorted_predictors[:, m]
    w = data.weights
    sums = level_analysis(basis, j, t, w, "phi")
    return (sums - 2.0 ** (-j / 2.0) * w.sum()) / data.n


def estimate_scaling_coeff(data: Dataset, basis: WaveletBasis, m: int, j: int, k: int) -> float:
    if not 0 <= k < 2**j:
        raise ValueError(f"shift k={k} out of range for level j={j}")
    return float(estimate_scaling_level(data, basis, m, j)[k])


def estimate_intercept(data: Dataset) -> float:
    return float(data.weights.sum() / data.n)


def compute_threshold(regime: ThresholdRegime, n: int, m: int, j: int, k: int) -> float:
    """Threshold for coefficient ``(j, k)`` of component ``m``.

    ``regime.gamma`` (and ``gamma1`` for the heteroskedastic branch) must be
    numbers here; :func:`fit_additive` fills them in when left as ``None``.
    """
    if regime.gamma is None:
        raise ConfigError("gamma is unresolved; set it or let fit_additive choose it")
    rate = math.log(n) / math.sqrt(n)
    if regime.kind == "homoskedastic":
        return regime.gamma * rate
    if regime.alpha is None:
        raise ConfigError("heteroskedastic thresholds require alpha")
    if regime.zero_integral is None:
        raise ConfigError("heteroskedastic regime has no zero-integral predicate")
    if regime.zero_integral(m, j, k):
        return regime.gamma * rate
    if regime.gamma1 is None:
        raise ConfigError("gamma1 is unresolved")
    return regime.gamma1 * math.sqrt(math.log(n) / n**regime.alpha)


def _marginal_sigma(sigma_field: Callable, m: int, r: int, t: np.ndarray, nodes: int):
    """``int sigma(t) dt_{-m}`` at the points ``t`` by tensor Gauss-Legendre."""
    x, w = np.polynomial.legendre.leggauss(nodes)
    x = (x + 1.0) / 2.0
    w = w / 2.0
    others = r - 1
    grids = np.meshgrid(*([x] * others), indexing="ij")
    wts = np.ones_like(grids[0]) if others else np.ones(())
    for g in np.meshgrid(*([w] * others), indexing="ij"):
        wts = wts * g
    flat_o = [g.ravel() for g in grids]
    flat_w = wts.ravel()
    out = np.empty(t.size)
    sup = 0.0
    chunk = max(1, 2**20 // max(flat_w.size, 1))
    for start in range(0, t.size, chunk):
        tt = t[start:start + chunk, None]
        coords = []
        it = iter(flat_o)
        for q in range(r):
            coords.append(np.broadcast_to(tt, (tt.shape[0], flat_w.size)) if q == m
                          else np.broadcast_to(next(it)[None, :], (tt.shape[0], flat_w.size)))
        vals = np.asarray(sigma_field(*coords), dtype=float)
        sup = max(sup, float(np.abs(vals).max()))
        out[start:start + chunk] = vals @ flat_w
    return out, sup


def sigma_psi_integrals(
    sigma_field: Callable,
    basis: WaveletBasis,
    m: int,
    j: int,
    r: int = 2,
    grid: int = 2**16,
    nodes: int | None = None,
) -> tuple[np.ndarray, float]:
    """``int_{[0,1]^r} psi_jk(t_m) sigma(t) dt`` for every ``k`` at level ``j``.

    The other coordinates are integrated out by Gauss-Legendre and the
    remaining one-dimensional integral uses the periodic trapezoid rule on
    ``i / grid``.  Returns the integrals and the sup of ``|sigma|`` seen.
    """
    if nodes is None:
        nodes = max(6, int(round(64 ** (1.0 / max(r - 1, 1)))))
    t = np.arange(grid) / grid
    marg, sup = _marginal_sigma(sigma_field, m, r, t, nodes)
    return level_analysis(basis, j, t, marg / grid, "psi"), sup


def sigma_psi_integral_is_zero(
    sigma_field: Callable,
    basis: WaveletBasis,
    m: int,
    j: int,
    k: int,
    grid: int = 2**16,
    r: int = 2,
    zero_tol: float = 1e-8,
) -> bool:
    """True when ``|int psi_jk(t_m) sigma(t) dt| < zero_tol * sup|sigma|``."""
    vals, sup = sigma_psi_integrals(sigma_field, basis, m, j, r=r, grid=grid)
    return bool(abs(vals[k]) < zero_tol * sup)


def _quadrature_predicate(sigma_field, basis, r, grid=2**16, zero_tol=1e-8):
    cache: dict = {}

    def predicate(m: int, j: int, k: int) -> bool:
        key = (m, j)
        if key not in cache:
            vals, sup = sigma_psi_integrals(sigma_field, basis, m, j, r=r, grid=max(grid, 2 ** (j + 8)))
            cache[key] = np.abs(vals) < zero_tol * sup
        return bool(cache[key][k])

    return predicate


@dataclass
class CoefficientSet:
    """Raw estimates, thresholds and keep decisions for one component.

    ``raw[j]``, ``thresholds[j]`` and ``kept[j]`` have length ``2**j``.
    """

    component: int
    raw: list
    thresholds: list
    theta00: float
    centering_offset: float = 0.0

    @property
    def levels(self) -> int:
        return len(self.raw)

    @property
    def kept(self) -> list:
        return [np.abs(b) > lam for b, lam in zip(self.raw, self.thresholds)]

    def kept_coefficients(self) -> list:
        out = []
        for j, (b, keep) in enumerate(zip(self.raw, self.kept)):
            for k in np.flatnonzero(keep):
                out.append((j, int(k), float(b[k])))
        return out

    def n_kept(self) -> int:
        return int(sum(int(k.sum()) for k in self.kept))

    def reconstruct(self, basis: WaveletBasis, t, centered: bool = True) -> np.ndarray:
        """Hard-thresholded component estimate at ``t``."""
        t = np.asarray(t, dtype=float)
        out = self.theta00 * np.asarray(eval_phi(basis, 0, 0, t), dtype=float)
        for j, (b, keep) in enumerate(zip(self.raw, self.kept)):
            if keep.any():
                out = out + level_synthesis(basis, j, t, np.where(keep, b, 0.0))
        if centered:
            out = out - self.centering_offset
        return out

    def to_dict(self) -> dict:
        return {
            "component": self.component,
            "levels": self.levels,
            "theta00": self.theta00,
            "centering_offset": self.centering_offset,
            "raw": [b.tolist() for b in self.raw],
            "thresholds": [lam.tolist() for lam in self.thresholds],
            "kept": [{"j": j, "k": k, "value": v} for j, k, v in self.kept_coefficients()],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CoefficientSet":
        return cls(
            component=int(d["component"]),
            raw=[np.asarray(b, dtype=float) for b in d["raw"]],
            thresholds=[np.asarray(lam, dtype=float) for lam in d["thresholds"]],
            theta00=float(d["theta00"]),
            centering_offset=float(d["centering_offset"]),
        )


@dataclass
class AdditiveFit:
    """``U_hat(t) = beta_hat_o + sum_m (f_hat_m(t_m) - offset_m)``."""

    intercept: float
    components: list
    basis: WaveletBasis
    metadata: dict = field(default_factory=dict)

    @property
    def r(self) -> int:
        return len(self.components)

    def component_curve(self, m: int, t) -> np.ndarray:
        return self.components[m].reconstruct(self.basis, t)

    def predict(self, points) -> np.ndarray:
        return predict(self, points)

    def to_dict(self) -> dict:
        return {
            "format": FIT_FORMAT,
            "version": FIT_VERSION,
            "intercept": self.intercept,
            "basis": {
                "family": self.basis.family,
                "vanishing_moments": self.basis.vanishing_moments,
                "table_depth": self.basis.table_depth,
            },
            "components": [c.to_dict() for c in self.components],
            "metadata": self.metadata,
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, d: dict) -> "AdditiveFit":
        if d.get("format") != FIT_FORMAT:
            raise DataError("not a serialized additive fit")
        if d.get("version") != FIT_VERSION:
            raise DataError(f"unsupported fit version {d.get('version')}")
        b = d["basis"]
        return cls(
            intercept=float(d["intercept"]),
            components=[CoefficientSet.from_dict(c) for c in d["components"]],
            basis=build_basis(int(b["vanishing_moments"]), int(b["table_depth"])),
            metadata=dict(d.get("metadata", {})),
        )


def _pilot_sigma(finest: np.ndarray, n: int, floor: float = 0.0) -> float:
    mad = np.median(np.abs(finest - np.median(finest)))
    return max(float(MAD_TO_SD * mad * math.sqrt(n)), floor)


def fit_additive(
    data: Dataset,
    basis: WaveletBasis | None = None,
    regime: ThresholdRegime | None = None,
    levels: int | Sequence[int] | None = None,
    centering_grid: int = 4096,
    center_responses: bool = True,
) -> AdditiveFit:
    """Hard-thresholding fit of every additive component plus the intercept.

    Parameters
    ----------
    data : Dataset
    basis : WaveletBasis, optional
        Defaults to db3 with table depth 14.
    regime : ThresholdRegime, optional
        Defaults to homoskedastic with data-driven ``gamma``.
    levels : int or sequence of int, optional
        Number of resolution levels ``J_m`` (levels ``0..J_m-1`` are
        estimated).  Defaults to :func:`select_max_level` of ``N``.
    centering_grid : int
        Grid size for the quadrature mean removed from each component.
    center_responses : bool
        Subtract ``beta_hat_o`` from the responses before estimating the
        component coefficients.  The wavelet estimators stay unbiased up to
        ``O(1/N)`` and no longer pick up ``beta_o * mean_i psi_jk(t_i)``
        design noise; a constant response then yields no kept coefficient
        under uniform densities.  ``False`` applies the estimators to ``y``
        as given.
    """
    if data.n < 8:
        raise DataError(f"need N >= 8 observations, got {data.n}")
    basis = basis or build_basis(3, 14)
    regime = regime or ThresholdRegime()
    if levels is None:
        J = [select_max_level(data.n)] * data.r
    elif np.ndim(levels) == 0:
        J = [int(levels)] * data.r
    else:
        J = [int(v) for v in levels]
    if len(J) != data.r or min(J) < 1:
        raise ConfigError(f"levels must give one positive J per component, got {levels}")

    if regime.kind == "heteroskedastic" and regime.zero_integral is None:
        regime = replace(regime, zero_integral=_quadrature_predicate(regime.sigma_field, basis, data.r))

    intercept = estimate_intercept(data)
    work = data.shifted(intercept) if center_responses else data
    # keeps rounding residue of an exactly centered response below threshold
    floor = 1e-10 * float(np.sqrt(np.mean(work.weights**2)) + abs(intercept))
    grid = np.arange(centering_grid) / centering_grid
    components = []
    gammas = []
    for m in range(data.r):
        raw = [estimate_wavelet_level(work, basis, m, j) for j in range(J[m])]
        sigma_hat = _pilot_sigma(raw[-1], data.n, floor)
        reg_m = replace(
            regime,
            gamma=regime.scale * sigma_hat if regime.gamma is None else regime.gamma,
            gamma1=regime.scale * sigma_hat if regime.gamma1 is None else regime.gamma1,
        )
        thresholds = [
            np.array([compute_threshold(reg_m, data.n, m, j, k) for k in range(2**j)])
            for j in range(J[m])
        ]
        theta00 = float(estimate_scaling_level(work, basis, m, 0)[0])
        cs = CoefficientSet(m, raw, thresholds, theta00)
        cs.centering_offset = float(np.mean(cs.reconstruct(basis, grid, centered=False)))
        components.append(cs)
        gammas.append({"gamma": reg_m.gamma, "gamma1": reg_m.gamma1, "sigma_hat": sigma_hat})

    metadata = {
        "n": data.n,
        "r": data.r,
        "levels": J,
        "regime": regime.kind,
        "alpha": regime.alpha,
        "threshold_scale": regime.scale,
        "constants": gammas,
        "center_responses": center_responses,
        "densities": [d.to_dict() for d in data.densities],
    }
    return AdditiveFit(intercept, components, basis, metadata)


def fit_bivariate(t, x, y, basis=None, regime=None, densities=(), levels=None) -> AdditiveFit:
    """Fit ``y = beta_o + f(t) + g(x) + noise``; same path as :func:`fit_additive`."""
    data = Dataset(np.column_stack([t, x]), y, tuple(densities))
    return fit_additive(data, basis, regime, levels)


def predict(fit: AdditiveFit, points) -> np.ndarray:
    """Evaluate the fitted additive function at one point or an ``(n, r)`` array."""
    P = np.asarray(points, dtype=float)
    single = P.ndim == 1
    P = np.atleast_2d(P)
    if P.shape[1] != fit.r:
        raise ValueError(f"points must have {fit.r} coordinates")
    if not np.all(np.isfinite(P)) or P.min() < 0.0 or P.max() >= 1.0:
        raise ValueError("prediction points must lie in [0, 1)^r")
    out = np.full(P.shape[0], fit.intercept)
    for m, comp in enumerate(fit.components):
        out = out + comp.reconstruct(fit.basis, P[:, m])
    return float(out[0]) if single else out
