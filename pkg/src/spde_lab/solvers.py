"""Solution schemes: grid Ito sums, Picard iteration for SDEs and the 1-d
stochastic heat equation, stochastic convolution for the linear equation,
mild Euler marching and chaos series for the multiplicative (Anderson) model.

Discretization conventions, shared by every scheme here:

* integrands are evaluated at the *left* time endpoint of each cell (the
  adapted choice that makes discrete sums Ito/Walsh integrals),
* kernels are evaluated at cell centers (midpoint rule), so every cell with
  center before the evaluation time contributes and the kernel time lag is
  at least dt/2: the integrable singularity of G at vanishing lag is never
  sampled, only the trailing half-slab of the time integral is left out,
* space is truncated to [-L, L] with periodic wrap; for the heat kernel the
  wrap error is below 1e-14 once L >= 8 sqrt(T).

Chaos-series closed forms. The multiplicative-noise chaos term of order n
for the 1-d heat model has variance (t/4)^(n/2) / Gamma(n/2 + 1); summing
gives the second moment 2 e^(t/4) Phi(sqrt(t/2)). (Deriving the term from
the simplex integral (4 pi)^(-n/2) * int [(t-t_n)...(t_2-t_1)]^(-1/2) via a
Dirichlet integral yields (t/4)^(n/2), the only normalization consistent
with that closed form; a commonly printed (t/2)^(n/2) variant does not sum
to it. The order-2 quadrature oracle in the tests pins this down.)
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import CapabilityError, DomainError, InputError
from .field import Field
from .grids import SpaceTimeGrid
from .kernels import heat_kernel
from .noise import HomogeneousNoiseSampler, NoiseSpec
from .rng import DEFAULT_BLOCK_SIZE, RngStream, as_generator, map_replica_blocks
from .special import HermiteTable, std_normal_cdf

# ---------------------------------------------------------------------------
# Lipschitz coefficients and traces
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LipschitzFn:
    """Globally Lipschitz coefficient sigma with a known constant."""

    fn: object
    lipschitz_constant: float
    tag: str

    def __call__(self, x):
        return self.fn(x)

    @staticmethod
    def identity() -> "LipschitzFn":
        return LipschitzFn(lambda x: x, 1.0, "identity")

    @staticmethod
    def affine(a: float, b: float) -> "LipschitzFn":
        return LipschitzFn(lambda x: a * x + b, abs(a), f"affine({a},{b})")

    @staticmethod
    def bounded_smooth(name: str) -> "LipschitzFn":
        table = {"sin": (np.sin, 1.0), "tanh": (np.tanh, 1.0), "cos": (np.cos, 1.0)}
        if name not in table:
            raise CapabilityError(f"unknown bounded_smooth coefficient {name!r}")
        fn, c = table[name]
        return LipschitzFn(fn, c, f"bounded_smooth({name})")

    def check_constant(self, rng, trials: int = 256, scale: float = 10.0) -> bool:
        """Spot-check |sigma(x)-sigma(y)| <= C |x-y| on random pairs."""
        gen = as_generator(rng)
        x, y = gen.uniform(-scale, scale, (2, trials))
        lhs = np.abs(np.asarray(self.fn(x)) - np.asarray(self.fn(y)))
        return bool(np.all(lhs <= self.lipschitz_constant * np.abs(x - y) + 1e-12))


@dataclass
class PicardTrace:
    """Successive-difference record of a Picard iteration.

    sup_sq_diffs[m-1] estimates sup over grid points of
    E |X_m - X_(m-1)|^2 from the replica ensemble.
    """

    sup_sq_diffs: np.ndarray
    n_iter: int
    replicas: int
    final_sample: np.ndarray | None = None

    def __post_init__(self):
        d = np.asarray(self.sup_sq_diffs, dtype=float)
        if d.size and (not np.all(np.isfinite(d)) or np.any(d < 0)):
            raise InputError("successive differences must be finite and nonnegative")

    def to_dict(self) -> dict:
        return {
            "sup_sq_diffs": np.asarray(self.sup_sq_diffs).tolist(),
            "n_iter": self.n_iter,
            "replicas": self.replicas,
        }


@dataclass
class ChaosSeries:
    """Term variances and partial sums of a chaos expansion."""

    orders: np.ndarray
    term_variances: np.ndarray
    partial_sums: np.ndarray
    truncation_order: int
    closed_form: float | None = None

    def __post_init__(self):
        if np.any(np.asarray(self.term_variances) < 0):
            raise InputError("chaos term variances must be nonnegative")
        if np.any(np.diff(self.partial_sums) < 0):
            raise InputError("chaos partial sums must be nondecreasing")

    def to_dict(self) -> dict:
        return {
            "orders": np.asarray(self.orders).tolist(),
            "term_variances": np.asarray(self.term_variances).tolist(),
            "partial_sums": np.asarray(self.partial_sums).tolist(),
            "truncation_order": self.truncation_order,
            "closed_form": self.closed_form,
        }


# ---------------------------------------------------------------------------
# Ito sums and the SDE Picard scheme
# ---------------------------------------------------------------------------


def ito_sum(integrand_left: np.ndarray, increments: np.ndarray):
    """sum_k X(t_k) (B_(t_(k+1)) - B_(t_k)) along the last axis.

    ``integrand_left`` holds the adapted left-endpoint values, one per cell.
    """
    x = np.asarray(integrand_left, dtype=float)
    db = np.asarray(increments, dtype=float)
    if x.shape[-1] != db.shape[-1]:
        raise InputError(
            f"integrand has {x.shape[-1]} cells but increments have {db.shape[-1]}"
        )
    return np.sum(x * db, axis=-1)


def solve_sde_picard(
    sigma: LipschitzFn,
    grid,
    rng: RngStream,
    n_iter: int,
    replicas: int,
    initial: float = 0.0,
    block_size: int = DEFAULT_BLOCK_SIZE,
    threads: int = 1,
) -> PicardTrace:
    """Picard scheme X_(n+1)(t) = initial + int_0^t sigma(X_n) dB, X_0 = 0.

    All iterates of one replica share a single Brownian path; the trace
    records, for each iterate, the maximum over grid nodes of the replica
    average of the squared successive difference. The multiplicative model
    (sigma(x) = x) needs ``initial=1``: with zero initial value its unique
    solution is identically zero and every iterate vanishes.
    """
    if n_iter < 1:
        raise InputError(f"n_iter must be >= 1, got {n_iter}")

    def block(gen, count):
        db = gen.standard_normal((count, grid.n_steps)) * math.sqrt(grid.dt)
        x_prev = np.zeros((count, grid.n_steps + 1))
        sq_sums = np.empty((count, n_iter, grid.n_steps + 1))
        for m in range(n_iter):
            x_next = np.full_like(x_prev, initial)
            x_next[:, 1:] += np.cumsum(np.asarray(sigma(x_prev[:, :-1])) * db, axis=1)
            sq_sums[:, m] = (x_next - x_prev) ** 2
            x_prev = x_next
        # keep per-replica squares plus the final path for the caller
        return np.concatenate([sq_sums, x_prev[:, None, :]], axis=1)

    out = map_replica_blocks(replicas, block, rng, block_size, threads)
    sq = out[:, :n_iter, :]
    diffs = sq.mean(axis=0).max(axis=1)
    return PicardTrace(diffs, n_iter, replicas, final_sample=out[0, n_iter, :])


def geometric_bm(times: np.ndarray, path: np.ndarray) -> np.ndarray:
    """exp(B_t - t/2), the multiplicative-noise SDE solution with X(0)=1."""
    return np.exp(np.asarray(path) - np.asarray(times) / 2.0)


def geometric_fbm(times: np.ndarray, path: np.ndarray, hurst: float) -> np.ndarray:
    """exp(B^H_t - t^(2H)/2), its fractional counterpart (H > 1/2)."""
    if not 0.0 < hurst < 1.0:
        raise DomainError(f"Hurst index must lie in (0,1), got {hurst}")
    t = np.asarray(times, dtype=float)
    return np.exp(np.asarray(path) - t ** (2.0 * hurst) / 2.0)


_CHAOS_TABLE = HermiteTable(200)


def chaos_geometric_partials(
    t: float, endpoint: float, n_terms: int, kind: str = "bm", hurst: float | None = None
) -> np.ndarray:
    """Partial sums of the geometric chaos series, orders 0..n_terms."""
    if not t > 0:
        raise DomainError(f"t must be positive, got {t}")
    if n_terms < 0 or n_terms > 200:
        raise InputError(f"n_terms must lie in [0, 200], got {n_terms}")
    if kind == "bm":
        s = math.sqrt(t)
    elif kind == "fbm":
        if hurst is None or not 0.5 < hurst < 1.0:
            raise DomainError(f"fbm chaos needs H in (1/2,1), got {hurst}")
        s = t**hurst
    else:
        raise CapabilityError(f"chaos_geometric kinds are 'bm' and 'fbm', got {kind!r}")
    mant, exp2 = _CHAOS_TABLE.values_scaled(n_terms, endpoint / s)
    partials = np.empty(n_terms + 1)
    partials[0] = total = 1.0
    ratio = 1.0  # s^n / n!
    for n in range(1, n_terms + 1):
        ratio *= s / n
        total += math.ldexp(ratio * mant[n], int(exp2[n]))
        partials[n] = total
    return partials


def chaos_geometric(
    t: float, endpoint: float, n_terms: int, kind: str = "bm", hurst: float | None = None
) -> float:
    """Truncated Hermite chaos series of the geometric BM / geometric fBm.

    1 + sum_(n<=N) s^n / n! H_n(endpoint / s) with s = sqrt(t) for Brownian
    motion and s = t^H for fBm; the full series sums to
    exp(endpoint - s^2 / 2).
    """
    return float(chaos_geometric_partials(t, endpoint, n_terms, kind, hurst)[-1])


# ---------------------------------------------------------------------------
# periodic heat-kernel machinery
# ---------------------------------------------------------------------------


def _periodic_displacements(grid: SpaceTimeGrid) -> np.ndarray:
    n = grid.n_cells
    m = np.arange(n)
    return (((m + n // 2) % n) - n // 2) * grid.dx


def _heat_kernel_vector(grid: SpaceTimeGrid, s: float) -> np.ndarray:
    """Heat kernel sampled at nearest-image periodic displacements."""
    return heat_kernel(s, _periodic_displacements(grid), 1)


class _LinearHeatKernels:
    """rfft of G((m - 1/2) dt, .) for node-to-cell-center lags m = 1..n_steps."""

    def __init__(self, grid: SpaceTimeGrid):
        if grid.dim != 1:
            raise CapabilityError("linear heat solver supports d = 1 only")
        self.grid = grid
        nt, dt = grid.time.n_steps, grid.time.dt
        lags = np.arange(1, nt + 1)
        kerns = np.stack([_heat_kernel_vector(grid, (m - 0.5) * dt) for m in lags])
        self.khat = np.fft.rfft(kerns, axis=1)  # row m-1 holds lag m

    def lag_hat(self, m: int) -> np.ndarray:
        return self.khat[m - 1]


def solve_linear_heat_1d(grid: SpaceTimeGrid, noise: Field, method: str = "auto") -> Field:
    """Stochastic convolution with zero initial data,

        u(t_k, x) = sum over cells with center before t_k of
                    G((k-j-1/2) dt, x - y_c) W(cell_(j,y)).

    ``method`` selects the direct double sum or its FFT evaluation over the
    periodic displacement; both produce the same sums.
    """
    if noise.grid != grid:
        raise InputError("noise field was sampled on a different grid")
    if noise.on_nodes:
        raise InputError("noise must be cell-indexed")
    w = noise.values
    nt, nx = grid.time.n_steps, grid.n_cells
    if method == "auto":
        method = "fft" if nx >= 32 else "direct"
    u = np.zeros((nt + 1, nx))
    if method == "direct":
        disp = _periodic_displacements(grid)
        idx = (np.arange(nx)[:, None] - np.arange(nx)[None, :]) % nx
        for k in range(1, nt + 1):
            acc = np.zeros(nx)
            for j in range(0, k):
                kern = heat_kernel((k - j - 0.5) * grid.time.dt, disp, 1)
                acc += kern[idx] @ w[j]
            u[k] = acc
    elif method == "fft":
        kernels = _LinearHeatKernels(grid)
        what = np.fft.rfft(w, axis=1)
        for k in range(1, nt + 1):
            acc = np.zeros(nx // 2 + 1, dtype=complex)
            for j in range(0, k):
                acc += kernels.lag_hat(k - j) * what[j]
            u[k] = np.fft.irfft(acc, n=nx)
    else:
        raise InputError(f"unknown method {method!r}")
    return Field(grid, u, label="linear_heat")


def linear_heat_point_weights(grid: SpaceTimeGrid, k: int, ix: int) -> np.ndarray:
    """Weights A with u(t_k, x_ix) = sum over cells A[j, i] W[j, i]."""
    if grid.dim != 1:
        raise CapabilityError("linear heat solver supports d = 1 only")
    nt, nx, dt = grid.time.n_steps, grid.n_cells, grid.time.dt
    if not 0 <= k <= nt:
        raise InputError(f"time index {k} outside 0..{nt}")
    a = np.zeros((nt, nx))
    disp = _periodic_displacements(grid)
    for j in range(0, k):
        a[j] = heat_kernel((k - j - 0.5) * dt, np.roll(disp, ix), 1)
    return a


def linear_heat_point_variance(grid: SpaceTimeGrid, k: int, ix: int) -> float:
    """Exact variance of the discrete stochastic convolution at one node."""
    a = linear_heat_point_weights(grid, k, ix)
    return float(np.sum(a * a) * grid.cell_volume)


def linear_heat_point_samples(
    grid: SpaceTimeGrid,
    k: int,
    ix: int,
    replicas: int,
    rng: RngStream,
    block_size: int = DEFAULT_BLOCK_SIZE,
    threads: int = 1,
) -> np.ndarray:
    """Monte Carlo samples of u(t_k, x_ix) under fresh white noise per replica.

    Equivalent to running solve_linear_heat_1d on each replica's sheet and
    reading off the node, without materializing the fields.
    """
    a = linear_heat_point_weights(grid, k, ix)
    scale = math.sqrt(grid.cell_volume)

    def block(gen, count):
        z = gen.standard_normal((count,) + a.shape)
        return scale * np.tensordot(z, a, axes=((1, 2), (0, 1)))

    return map_replica_blocks(replicas, block, rng, block_size, threads)


def linear_heat_node_samples(
    grid: SpaceTimeGrid,
    node_indices: np.ndarray,
    replicas: int,
    rng: RngStream,
    block_size: int = 64,
    threads: int = 1,
) -> np.ndarray:
    """Samples of u at several time nodes, all x: shape (R, len(nodes), nx).

    Used by regularity studies that need a window of output times without
    the full field history.
    """
    nodes = np.asarray(node_indices, dtype=int)
    nt, nx = grid.time.n_steps, grid.n_cells
    if np.any(nodes < 0) or np.any(nodes > nt):
        raise InputError("node indices outside the grid")
    kernels = _LinearHeatKernels(grid)
    scale = math.sqrt(grid.cell_volume)

    def block(gen, count):
        w = gen.standard_normal((count, nt, nx)) * scale
        what = np.fft.rfft(w, axis=2)
        out = np.zeros((count, nodes.size, nx))
        for pos, k in enumerate(nodes):
            if k < 1:
                continue
            lags = np.arange(k, 0, -1)  # k - j for j = 0..k-1
            acc = np.einsum("lf,rlf->rf", kernels.khat[lags - 1], what[:, :k])
            out[:, pos] = np.fft.irfft(acc, n=nx, axis=1)
        return out

    return map_replica_blocks(replicas, block, rng, block_size, threads)


def solve_nonlinear_heat_picard(
    sigma: LipschitzFn,
    grid: SpaceTimeGrid,
    rng: RngStream,
    n_iter: int,
    replicas: int,
    initial: float = 0.0,
    block_size: int = DEFAULT_BLOCK_SIZE,
    threads: int = 1,
) -> PicardTrace:
    """Picard scheme for the 1-d nonlinear stochastic heat equation.

    u_(n+1)(t_k, x) = initial + sum over lagged cells of
    G((k-j-1/2) dt, x - y) sigma(u_n(t_j, y)) W(cell_(j,y)), with sigma
    evaluated at left time endpoints and one shared sheet per replica.
    As for the SDE scheme, the multiplicative coefficient sigma(x) = x is
    only non-degenerate with ``initial=1`` (the Anderson-model setup).
    """
    if n_iter < 1:
        raise InputError(f"n_iter must be >= 1, got {n_iter}")
    if grid.dim != 1:
        raise CapabilityError("nonlinear heat Picard supports d = 1 only")
    kernels = _LinearHeatKernels(grid)
    nt, nx = grid.time.n_steps, grid.n_cells
    scale = math.sqrt(grid.cell_volume)

    def block(gen, count):
        w = gen.standard_normal((count, nt, nx)) * scale
        u_prev = np.zeros((count, nt + 1, nx))
        sq_sums = np.empty((count, n_iter, nt + 1, nx))
        for m in range(n_iter):
            integrand = np.asarray(sigma(u_prev[:, :-1, :])) * w
            phihat = np.fft.rfft(integrand, axis=2)
            u_next = np.full_like(u_prev, initial)
            for k in range(1, nt + 1):
                lags = np.arange(k, 0, -1)  # k - j for j = 0..k-1
                acc = np.einsum("lf,rlf->rf", kernels.khat[lags - 1], phihat[:, :k])
                u_next[:, k] += np.fft.irfft(acc, n=nx, axis=1)
            sq_sums[:, m] = (u_next - u_prev) ** 2
            u_prev = u_next
        return np.concatenate([sq_sums, u_prev[:, None, :, :]], axis=1)

    out = map_replica_blocks(replicas, block, rng, block_size, threads)
    sq = out[:, :n_iter]
    diffs = sq.mean(axis=0).reshape(n_iter, -1).max(axis=1)
    return PicardTrace(diffs, n_iter, replicas, final_sample=out[0, n_iter])


# ---------------------------------------------------------------------------
# multiplicative heat model: chaos series and Euler marching
# ---------------------------------------------------------------------------


def pam_chaos_term_variance(n: int, t: float) -> float:
    """Variance (t/4)^(n/2) / Gamma(n/2 + 1) of the order-n chaos term."""
    if n < 1:
        raise DomainError(f"chaos order must be >= 1, got {n}")
    if not t > 0:
        raise DomainError(f"t must be positive, got {t}")
    return math.exp(0.5 * n * math.log(t / 4.0) - math.lgamma(0.5 * n + 1.0))


def pam_second_moment_closed_form(t: float) -> float:
    """2 e^(t/4) Phi(sqrt(t/2))."""
    if not t > 0:
        raise DomainError(f"t must be positive, got {t}")
    return 2.0 * math.exp(t / 4.0) * std_normal_cdf(math.sqrt(t / 2.0))


def pam_log_second_moment(t: float) -> float:
    """log of the closed form, stable for large t (no exponential overflow)."""
    if not t > 0:
        raise DomainError(f"t must be positive, got {t}")
    return t / 4.0 + math.log(2.0 * std_normal_cdf(math.sqrt(t / 2.0)))


def pam_truncation_order(t: float, tol: float = 1e-12) -> int:
    """Smallest N with chaos tail below tol, from the Gamma denominator."""
    n = 1
    term = pam_chaos_term_variance(n, t)
    while True:
        # once terms decay geometrically by at least 1/2, tail <= 2 * next term
        nxt = pam_chaos_term_variance(n + 1, t)
        if nxt < term and nxt / (1.0 - nxt / term) < tol / 2.0:
            return n + 1
        term = nxt
        n += 1
        if n > 10_000:
            raise InputError(f"no truncation below tol={tol} within 10000 terms")


def pam_second_moment(t: float, n_terms: int) -> tuple[float, float]:
    """(partial sum 1 + sum of term variances, closed form)."""
    partial = 1.0 + sum(pam_chaos_term_variance(n, t) for n in range(1, n_terms + 1))
    return partial, pam_second_moment_closed_form(t)


def pam_chaos_series(t: float, n_terms: int) -> ChaosSeries:
    orders = np.arange(0, n_terms + 1)
    variances = np.array(
        [0.0] + [pam_chaos_term_variance(n, t) for n in range(1, n_terms + 1)]
    )
    variances[0] = 1.0  # order-0 term is the constant 1
    return ChaosSeries(
        orders=orders,
        term_variances=variances,
        partial_sums=np.cumsum(variances),
        truncation_order=n_terms,
        closed_form=pam_second_moment_closed_form(t),
    )


def _one_step_matrices(grid: SpaceTimeGrid) -> tuple[np.ndarray, np.ndarray]:
    """(P, M): P[x,y] = G(dt, x-y) dx is the deterministic step, M = P / dx."""
    kern = _heat_kernel_vector(grid, grid.time.dt)
    idx = (np.arange(grid.n_cells)[:, None] - np.arange(grid.n_cells)[None, :]) % grid.n_cells
    m = kern[idx]
    return m * grid.dx, m


def solve_pam_euler(grid: SpaceTimeGrid, noise: Field, initial: float = 1.0) -> Field:
    """Mild Euler marching for the multiplicative heat model, u(0, .) = 1:

    u(t_(k+1), x) = sum_y G(dt, x-y) [ u(t_k, y) dx + u(t_k, y) W(cell_(k,y)) ]

    with periodic wrap at +-L. For white-in-time noise the adapted product
    makes this an Ito scheme. For time-correlated noise the same product
    picks up the noise's interaction with the past (a Stratonovich-type
    trace), so moments drift above the Wick-product solution's; use
    WickPamSampler for moment comparisons against Wick-calculus formulas.
    """
    if noise.grid != grid:
        raise InputError("noise field was sampled on a different grid")
    if noise.on_nodes:
        raise InputError("noise must be cell-indexed")
    if grid.dim != 1:
        raise CapabilityError("mild Euler marching supports d = 1 only")
    nt, nx = grid.time.n_steps, grid.n_cells
    kern_hat = np.fft.rfft(_heat_kernel_vector(grid, grid.time.dt))
    u = np.empty((nt + 1, nx))
    u[0] = initial
    w = noise.values
    for k in range(nt):
        combined = u[k] * (grid.dx + w[k])
        u[k + 1] = np.fft.irfft(kern_hat * np.fft.rfft(combined), n=nx)
    return Field(grid, u, label="pam_euler")


def pam_euler_final_batch(grid: SpaceTimeGrid, w_batch: np.ndarray, initial: float = 1.0):
    """Final-time values of the Euler marching for a batch of noise sheets."""
    nt, nx = grid.time.n_steps, grid.n_cells
    kern_hat = np.fft.rfft(_heat_kernel_vector(grid, grid.time.dt))
    u = np.full((w_batch.shape[0], nx), float(initial))
    for k in range(nt):
        combined = u * (grid.dx + w_batch[:, k])
        u = np.fft.irfft(kern_hat * np.fft.rfft(combined, axis=1), n=nx, axis=1)
    return u


class WickPamSampler:
    """Truncated Wick-chaos marching for the multiplicative heat model with
    time-correlated homogeneous noise.

    Carries the chaos levels U1 (linear) and U2 separately; the U2 update
    subtracts the deterministic trace tau(k, y) = sum over past cells of
    (influence kernel of U1) * Cov(past cell, current cell), which is
    exactly what keeps E[U2] = 0 and the levels orthogonal. The resulting
    1 + U1 + U2 is the chaos-order-2 part of the Wick (Skorohod-type)
    solution, whose second moment matches Wick-calculus moment formulas up
    to the chaos tail; the plain adapted product in solve_pam_euler does
    not converge to that solution when the noise is correlated in time.
    """

    def __init__(self, grid: SpaceTimeGrid, spec: NoiseSpec, cholesky_cap: int = 2048):
        if grid.dim != 1:
            raise CapabilityError("Wick chaos marching supports d = 1 only")
        self.grid = grid
        self.sampler = HomogeneousNoiseSampler(grid, spec, cholesky_cap)
        self.p_step, self.m_step = _one_step_matrices(grid)
        nt, nx = grid.time.n_steps, grid.n_cells
        t_cov, s_cov = self.sampler.time_cov, self.sampler.space_cov
        # q[j, y] = (P^j M S)[y, y]; tau[k] = sum_(m<k) T[m, k] q[k-1-m]
        q = np.empty((nt, nx))
        b = self.m_step.copy()
        for j in range(nt):
            q[j] = np.einsum("yz,zy->y", b, s_cov)
            if j + 1 < nt:
                b = self.p_step @ b
        self.tau = np.zeros((nt, nx))
        for k in range(1, nt):
            # tau[k, y] = sum_(m<k) T[m, k] q[k-1-m, y]
            self.tau[k] = t_cov[:k, k] @ q[k - 1 :: -1]

    def sample_chaos(self, rng, n: int) -> tuple[np.ndarray, np.ndarray]:
        """(U1, U2) at the final time node, each of shape (n, n_cells)."""
        w = self.sampler.sample_batch(rng, n)
        nt, nx = self.grid.time.n_steps, self.grid.n_cells
        u1 = np.zeros((n, nx))
        u2 = np.zeros((n, nx))
        pt, mt = self.p_step.T, self.m_step.T
        for k in range(nt):
            u2 = u2 @ pt + (u1 * w[:, k] - self.tau[k]) @ mt
            u1 = u1 @ pt + w[:, k] @ mt
        return u1, u2

    def second_moment_samples(self, rng, n: int, center_fraction: float = 0.5):
        """Per-replica spatial averages of (1 + U1 + U2)^2 over the center cells."""
        u1, u2 = self.sample_chaos(rng, n)
        nx = self.grid.n_cells
        lo = int(nx * (0.5 - center_fraction / 2))
        hi = int(nx * (0.5 + center_fraction / 2))
        vals = (1.0 + u1[:, lo:hi] + u2[:, lo:hi]) ** 2
        return vals.mean(axis=1)
