"""Monte Carlo moment estimation, Lyapunov-exponent fitting, intermittency
diagnostics, the path-pair exponential-functional estimator for second
moments under fractional-Riesz noise, and empirical regularity exponents.

Lyapunov exponents lambda_p are asymptotic slopes of log E|X(t)|^p against
t^kappa; kappa = 1 for Brownian-driven models and kappa = 2H for the
geometric fractional model, whose moments grow like exp(p(p-1) t^(2H) / 2).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .conditions import check_fractional
from .errors import (
    CapabilityError,
    ConditionNotSatisfiedError,
    DomainError,
    InputError,
    NumericalError,
)
from .grids import SpaceTimeGrid
from .kernels import HEAT, WAVE
from .noise import NoiseSpec
from .rng import RngStream, map_replica_blocks

# ---------------------------------------------------------------------------
# moment reports
# ---------------------------------------------------------------------------

CSV_COLUMNS = ("model", "t", "p", "estimate", "stderr", "replicas")


@dataclass(frozen=True)
class MomentRow:
    model: str
    t: float
    p: float
    estimate: float
    stderr: float
    replicas: int

    def to_csv_row(self) -> str:
        return ",".join(
            [
                self.model,
                f"{self.t:.17g}",
                f"{self.p:.17g}",
                f"{self.estimate:.17g}",
                f"{self.stderr:.17g}",
                str(self.replicas),
            ]
        )


@dataclass
class MomentReport:
    """Moment rows plus an optional Lyapunov fit against t^kappa."""

    rows: list[MomentRow] = field(default_factory=list)
    kappa: float | None = None
    fitted_lambda: float | None = None
    closed_form_lambda: float | None = None

    def csv_text(self) -> str:
        lines = [",".join(CSV_COLUMNS)]
        lines += [r.to_csv_row() for r in self.rows]
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        return {
            "rows": [r.__dict__ for r in self.rows],
            "kappa": self.kappa,
            "fitted_lambda": self.fitted_lambda,
            "closed_form_lambda": self.closed_form_lambda,
        }

    def json_text(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def jackknife_stderr(samples: np.ndarray) -> float:
    """Jackknife standard error of the sample mean.

    For the mean the leave-one-out estimator collapses to the classical
    sqrt(sum (x - xbar)^2 / (n (n-1))); kept as the named method because the
    reports quote it.
    """
    x = np.asarray(samples, dtype=float)
    n = x.size
    if n < 2:
        return 0.0
    return float(np.sqrt(np.sum((x - x.mean()) ** 2) / (n * (n - 1))))


def estimate_moments(
    samples: np.ndarray, p_list, model: str = "", t: float = float("nan")
) -> list[MomentRow]:
    """Sample means of |X|^p with jackknife standard errors, one row per p."""
    x = np.abs(np.asarray(samples, dtype=float))
    if x.size == 0:
        raise InputError("cannot estimate moments from an empty sample")
    rows = []
    for p in np.atleast_1d(p_list):
        if p < 1:
            raise DomainError(f"moment order must be >= 1, got {p}")
        vals = x**p
        rows.append(
            MomentRow(model, t, float(p), float(vals.mean()), jackknife_stderr(vals), x.size)
        )
    return rows


# ---------------------------------------------------------------------------
# Lyapunov exponents and intermittency
# ---------------------------------------------------------------------------


def fit_log_slope(ts: np.ndarray, values: np.ndarray, kappa: float) -> float:
    """Least-squares slope of log(values) against t^kappa."""
    t = np.asarray(ts, dtype=float)
    v = np.asarray(values, dtype=float)
    if np.unique(t).size < 4:
        raise InputError("Lyapunov fit needs at least 4 distinct t values")
    if np.any(v <= 0):
        raise InputError("Lyapunov fit needs positive moment estimates")
    x = t**kappa
    design = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(design, np.log(v), rcond=None)
    return float(coef[0])


def lyapunov_fit(rows, p: float, kappa: float = 1.0) -> float:
    """Fitted Lyapunov exponent of order p from MomentReport rows."""
    sel = [r for r in rows if r.p == p]
    if not sel:
        raise InputError(f"no rows with p={p}")
    return fit_log_slope([r.t for r in sel], [r.estimate for r in sel], kappa)


def lyapunov_closed_form(model: str, p: float, hurst: float | None = None):
    """(lambda_p, kappa) for the models with known exponents.

    gbm: p(p-1)/2 at kappa = 1; pam_white: p(p^2-1)/4! at kappa = 1;
    gfbm: p(p-1)/2 at kappa = 2H.
    """
    if p <= 0:
        raise DomainError(f"moment order must be positive, got {p}")
    if model == "gbm":
        return p * (p - 1.0) / 2.0, 1.0
    if model == "pam_white":
        return p * (p * p - 1.0) / 24.0, 1.0
    if model == "gfbm":
        if hurst is None or not 0.0 < hurst < 1.0:
            raise DomainError(f"gfbm needs a Hurst index in (0,1), got {hurst}")
        return p * (p - 1.0) / 2.0, 2.0 * hurst
    raise CapabilityError(f"no closed-form Lyapunov exponents for model {model!r}")


def intermittency_check(p_values, lambdas) -> bool:
    """True iff p -> lambda_p / p is strictly increasing over the given orders."""
    p = np.asarray(p_values, dtype=float)
    lam = np.asarray(lambdas, dtype=float)
    if p.size != lam.size or p.size < 2:
        raise InputError("need matching arrays with at least 2 orders")
    order = np.argsort(p)
    ratios = lam[order] / p[order]
    return bool(np.all(np.diff(ratios) > 0))


def intermittency_exponent_predicted(op_kind: str, alpha: float, hurst: float) -> float:
    """Predicted moment growth exponent rho in exp(c p^a t^rho).

    heat: (4H - alpha) / (2 - alpha); wave: (2H + 2 - alpha) / (3 - alpha).
    """
    if op_kind not in (HEAT, WAVE):
        raise DomainError(f"operator kind must be 'heat' or 'wave', got {op_kind!r}")
    if not 0.5 < hurst < 1.0:
        raise DomainError(f"Hurst index must lie in (1/2,1), got {hurst}")
    if not 0.0 < alpha < 2.0:
        raise DomainError(f"alpha must lie in (0, d wedge 2) subset (0,2), got {alpha}")
    if op_kind == HEAT:
        return (4.0 * hurst - alpha) / (2.0 - alpha)
    return (2.0 * hurst + 2.0 - alpha) / (3.0 - alpha)


# ---------------------------------------------------------------------------
# path-pair second-moment estimator (fractional time x Riesz space)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PathPairEstimate:
    """Second-moment estimate from the two-path exponential functional.

    ``estimate_half_floor`` repeats the evaluation with the spatial
    singularity floor halved, as a sensitivity report on the floor policy.
    """

    estimate: float
    stderr: float
    estimate_half_floor: float
    stderr_half_floor: float
    replicas: int
    n_quad: int
    delta_floor: float
    parameters: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "estimate": self.estimate,
            "stderr": self.stderr,
            "estimate_half_floor": self.estimate_half_floor,
            "stderr_half_floor": self.stderr_half_floor,
            "replicas": self.replicas,
            "n_quad": self.n_quad,
            "delta_floor": self.delta_floor,
            "parameters": dict(self.parameters),
        }


def fk_second_moment(
    t: float,
    spec: NoiseSpec,
    d: int,
    replicas: int,
    n_quad: int,
    rng: RngStream,
    delta_floor: float | None = None,
    block_size: int = 128,
    threads: int = 1,
    zero_interaction: bool = False,
) -> PathPairEstimate:
    """E[u(t,x)^2] for the multiplicative heat model via the two-path
    exponential functional

        E[ exp( double integral of gamma_H(r-s) |B^1_r - B^2_s|^(-alpha) ) ]

    over independent d-dimensional Brownian pairs. The time integral is
    evaluated per quadrature-cell pair with the exact alpha_H-weighted cell
    integral (no time-singularity error); the spatial factor uses path
    values at cell centers with |B^1 - B^2| floored at ``delta_floor``
    (default: half a quadrature cell). ``zero_interaction`` is a test hook
    that zeroes the interaction weights, making every replica exactly 1.
    """
    if not t > 0:
        raise DomainError(f"t must be positive, got {t}")
    if spec.time_kernel.kind != "fractional" or spec.space_kernel.kind != "riesz":
        raise CapabilityError(
            "path-pair second moments support fractional(H) x riesz(alpha) noise"
        )
    hurst = spec.time_kernel.hurst
    alpha = spec.space_kernel.alpha
    verdict = check_fractional(HEAT, alpha, hurst, d)
    if not verdict.satisfied:
        raise ConditionNotSatisfiedError(
            f"existence condition alpha < 4H fails (alpha={alpha}, H={hurst})",
            verdict=verdict,
        )
    if n_quad < 2:
        raise InputError(f"n_quad must be >= 2, got {n_quad}")
    delta = t / n_quad
    floor = delta / 2.0 if delta_floor is None else float(delta_floor)
    if not floor > 0.0:
        raise InputError(f"delta_floor must be positive, got {floor}")

    # exact alpha_H-weighted time integrals over cell pairs (Toeplitz in the lag)
    h2 = 2.0 * hurst
    m = np.abs(np.arange(n_quad)[:, None] - np.arange(n_quad)[None, :]).astype(float)
    wt = 0.5 * delta**h2 * ((m + 1.0) ** h2 + np.abs(m - 1.0) ** h2 - 2.0 * m**h2)
    if zero_interaction:
        wt = np.zeros_like(wt)
    centers = (np.arange(n_quad) + 0.5) * delta
    gaps = np.diff(centers, prepend=0.0)
    sq_gaps = np.sqrt(gaps)

    def block(gen, count):
        b1 = np.cumsum(gen.standard_normal((count, n_quad, d)) * sq_gaps[:, None], axis=1)
        b2 = np.cumsum(gen.standard_normal((count, n_quad, d)) * sq_gaps[:, None], axis=1)
        diff = b1[:, :, None, :] - b2[:, None, :, :]
        dist = np.sqrt(np.sum(diff * diff, axis=-1))
        np.maximum(dist, floor, out=dist)
        a_full = np.einsum("ij,rij->r", wt, dist**-alpha)
        # sensitivity variant: same paths, floor halved
        dist = np.sqrt(np.sum(diff * diff, axis=-1))
        np.maximum(dist, floor / 2.0, out=dist)
        a_half = np.einsum("ij,rij->r", wt, dist**-alpha)
        return np.column_stack([np.exp(a_full), np.exp(a_half)])

    vals = map_replica_blocks(replicas, block, rng, block_size, threads)
    if not np.all(vals >= 1.0):
        raise NumericalError(
            "exponential-functional samples fell below 1 (or went non-finite); "
            "nonnegative kernels make that impossible"
        )
    est, est_half = vals.mean(axis=0)
    se, se_half = (jackknife_stderr(vals[:, 0]), jackknife_stderr(vals[:, 1]))
    return PathPairEstimate(
        estimate=float(est),
        stderr=float(se),
        estimate_half_floor=float(est_half),
        stderr_half_floor=float(se_half),
        replicas=replicas,
        n_quad=n_quad,
        delta_floor=floor,
        parameters={"t": t, "hurst": hurst, "alpha": alpha, "d": d},
    )


# ---------------------------------------------------------------------------
# empirical Holder exponents
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HolderFit:
    exponent: float
    lags: tuple[int, ...]
    lag_spacings: np.ndarray
    norms: np.ndarray
    p: float
    axis: str

    def to_dict(self) -> dict:
        return {
            "exponent": self.exponent,
            "lags": list(self.lags),
            "lag_spacings": self.lag_spacings.tolist(),
            "norms": self.norms.tolist(),
            "p": self.p,
            "axis": self.axis,
        }


DEFAULT_HOLDER_LAGS = (2, 4, 8, 16, 32)


def holder_estimate(
    fields: np.ndarray,
    spacing: float,
    axis: str = "time",
    p: float = 2.0,
    lags: tuple[int, ...] = DEFAULT_HOLDER_LAGS,
    periodic_space: bool = False,
) -> HolderFit:
    """Fitted regularity exponent from dyadic-lag increment moments.

    ``fields`` has shape (replicas, n_time, n_space); increments are taken
    along the chosen axis at each listed lag, averaged over replicas and
    over all admissible base points, and the exponent is the least-squares
    slope of log ||increment||_p against log(lag * spacing). Lag 1 is
    excluded by default (dominated by discretization noise).
    """
    u = np.asarray(fields, dtype=float)
    if u.ndim != 3:
        raise InputError(f"fields must be (replicas, n_time, n_space), got {u.shape}")
    if axis not in ("time", "space"):
        raise InputError(f"axis must be 'time' or 'space', got {axis!r}")
    ax = 1 if axis == "time" else 2
    n_axis = u.shape[ax]
    usable = [m for m in lags if (m < n_axis if not periodic_space else m <= n_axis // 2)]
    if len(usable) < 3:
        raise InputError(
            f"need at least 3 usable lag scales on an axis of length {n_axis}, "
            f"got {usable}"
        )
    norms = []
    for m in usable:
        if axis == "space" and periodic_space:
            inc = np.roll(u, -m, axis=2) - u
        else:
            take_hi = np.take(u, np.arange(m, n_axis), axis=ax)
            take_lo = np.take(u, np.arange(0, n_axis - m), axis=ax)
            inc = take_hi - take_lo
        moment = np.mean(np.abs(inc) ** p)
        if moment <= 0.0:
            raise InputError("increments vanish; the exponent is undefined")
        norms.append(moment ** (1.0 / p))
    norms = np.asarray(norms)
    xs = np.log(np.asarray(usable, dtype=float) * spacing)
    design = np.column_stack([xs, np.ones_like(xs)])
    coef, *_ = np.linalg.lstsq(design, np.log(norms), rcond=None)
    return HolderFit(
        exponent=float(coef[0]),
        lags=tuple(usable),
        lag_spacings=np.asarray(usable, dtype=float) * spacing,
        norms=norms,
        p=p,
        axis=axis,
    )


def linear_heat_holder_study(
    grid: SpaceTimeGrid,
    replicas: int,
    rng: RngStream,
    time_lags: tuple[int, ...] = DEFAULT_HOLDER_LAGS,
    space_lags: tuple[int, ...] = DEFAULT_HOLDER_LAGS,
    base_node: int | None = None,
    p: float = 2.0,
    block_size: int = 32,
    threads: int = 1,
) -> dict:
    """Fitted time/space regularity exponents of the linear heat solution.

    Simulates the solution over a window of time nodes ending well inside
    the horizon (default base: 3/4 of the way), wide enough that every time
    lag sees many base points, and fits both exponents on the ensemble.
    Returns the two fits plus the window metadata.
    """
    from .solvers import linear_heat_node_samples  # local import, avoids a cycle

    nt = grid.time.n_steps
    max_lag = max(time_lags)
    k0 = (3 * nt) // 4 if base_node is None else base_node
    if k0 + 2 * max_lag > nt:
        raise InputError(
            f"window [{k0}, {k0 + 2 * max_lag}] exceeds the grid ({nt} steps); "
            "lower the base node or the largest time lag"
        )
    window = np.arange(k0, k0 + 2 * max_lag + 1)
    fields = linear_heat_node_samples(
        grid, window, replicas, rng, block_size=block_size, threads=threads
    )
    time_fit = holder_estimate(fields, grid.time.dt, "time", p, time_lags)
    space_fit = holder_estimate(
        fields, grid.dx, "space", p, space_lags, periodic_space=True
    )
    return {
        "time_fit": time_fit,
        "space_fit": space_fit,
        "window_nodes": (int(window[0]), int(window[-1])),
        "replicas": replicas,
    }
