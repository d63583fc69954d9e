"""Mild-solution simulation by eigenbasis truncation and exponential Euler.

The state is advanced in modal coordinates: each step applies the exact
modal semigroup to the Euler-frozen drift and noise increments,

    a(t+dt) = exp(lambda dt) * (a(t) + F(t,a) dt + G(t,a) dW),

with the cylindrical noise on X truncated to the leading ``m_noise``
eigenmodes.  The combined interior/boundary Wiener process is taken with
identity covariance on X (the standard cylindrical choice), so expanding
it in the eigenbasis is exact in law.  Noise is counter-based: each path
owns a disjoint Philox counter block derived from (seed, path index), so
ensembles are reproducible and order-independent.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ShapeError
from .spectral import EigenBasis


@dataclass(frozen=True)
class Coefficients:
    """Problem coefficients: drift/diffusion densities and boundary gains.

    ``f`` and ``g`` map (t, x, u) -> value, vectorized over node arrays
    (a scalar return is broadcast); ``h`` maps t to the pair of boundary
    noise gains.  ``K`` bounds |f|, |g| and |h|; ``L`` is the Lipschitz
    constant of f, g in u.  The bounds are declared, spot-checked by
    ``spot_check_coefficients``, not proven.
    """

    f: callable
    g: callable
    h: callable
    K: float
    L: float


@dataclass(frozen=True)
class SimConfig:
    """Galerkin/noise truncation sizes, time grid and seed for one run."""

    n_modes: int
    m_noise: int
    dt: float
    T: float
    t0: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")
        if not 0.0 <= self.t0 < self.T:
            raise ValueError("need 0 <= t0 < T")
        if self.n_modes < 1 or self.m_noise < 1:
            raise ValueError("n_modes and m_noise must be >= 1")
        if self.m_noise > self.n_modes:
            raise ValueError("m_noise must not exceed n_modes")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 bits")


@dataclass(frozen=True)
class PathRecord:
    """One simulated trajectory: modal states per time, optional extras."""

    times: np.ndarray
    states: np.ndarray
    controls: np.ndarray = None
    grid_u: np.ndarray = None
    grid_v: np.ndarray = None


@dataclass(frozen=True)
class EnsembleStats:
    """Fixed-order reduction of terminal statistics over a path ensemble."""

    n_paths: int
    mean_terminal: np.ndarray
    var_terminal: np.ndarray
    se_terminal: np.ndarray
    mean_norm: float
    var_norm: float
    se_norm: float


def time_grid(config: SimConfig) -> np.ndarray:
    """Strictly increasing times from t0 to T; last step possibly short."""
    span = config.T - config.t0
    n_full = int(np.floor(span / config.dt + 1e-9))
    times = config.t0 + config.dt * np.arange(n_full + 1)
    if times[-1] < config.T - 1e-12 * (1.0 + abs(config.T)):
        times = np.append(times, config.T)
    else:
        times[-1] = config.T
    return times


def path_increments(
    seed: int, path_index: int, dts: np.ndarray, m_noise: int
) -> np.ndarray:
    """Gaussian increments N(0, dt_i) for one path, shape (steps, m_noise).

    Draws from a Philox stream whose counter block is disjoint per path
    (counter = path_index << 128), so paths are independent and any subset
    can be regenerated without simulating the others.
    """
    bitgen = np.random.Philox(key=seed, counter=int(path_index) << 128)
    rng = np.random.Generator(bitgen)
    z = rng.standard_normal((len(dts), m_noise))
    return z * np.sqrt(np.asarray(dts))[:, None]


def galerkin_drift(
    t: float, state: np.ndarray, coeffs: Coefficients, basis: EigenBasis
) -> np.ndarray:
    """Modal drift F_k = int f(t, x, u(x)) e_k(x) dx with u = sum a_k e_k.

    The boundary block of the drift is zero: the nonlinearity acts on the
    interior only.
    """
    u = basis.values @ state
    fv = coeffs.f(t, basis.quad.nodes, u)
    w = basis.quad.weights
    if np.ndim(fv) == 0:
        return float(fv) * (basis.values.T @ w)
    return basis.values.T @ (w * fv)


def galerkin_diffusion(
    t: float,
    state: np.ndarray,
    coeffs: Coefficients,
    basis: EigenBasis,
    m_noise: int = None,
) -> np.ndarray:
    """Noise matrix G_km = <G(t,u) phi_m, phi_k> on the eigenbasis.

    Interior part int g(t,x,u) e_m e_k dx plus the diagonal boundary gains
    h0 e_m(0) e_k(0) + h1 e_m(1) e_k(1); shape (n_modes, m_noise).
    """
    n = basis.n_modes
    m = n if m_noise is None else m_noise
    if m > n:
        raise ShapeError("m_noise must not exceed the basis size")
    u = basis.values @ state
    gv = coeffs.g(t, basis.quad.nodes, u)
    w = basis.quad.weights
    if np.ndim(gv) == 0:
        interior = float(gv) * basis.interior_gram[:, :m]
    else:
        interior = basis.values.T @ ((w * gv)[:, None] * basis.values[:, :m])
    h0, h1 = coeffs.h(t)
    return (
        interior
        + h0 * np.outer(basis.trace0, basis.trace0[:m])
        + h1 * np.outer(basis.trace1, basis.trace1[:m])
    )


def step_exp_euler(
    t: float,
    state: np.ndarray,
    dW: np.ndarray,
    coeffs: Coefficients,
    basis: EigenBasis,
    dt: float,
    extra_drift: np.ndarray = None,
) -> np.ndarray:
    """One exponential-Euler step with coefficients frozen at time t.

    ``dW`` entries must be N(0, dt) samples; ``extra_drift`` (used by the
    control layer) is added to the modal drift before the semigroup is
    applied.
    """
    drift = galerkin_drift(t, state, coeffs, basis)
    if extra_drift is not None:
        drift = drift + extra_drift
    G = galerkin_diffusion(t, state, coeffs, basis, m_noise=len(dW))
    return np.exp(basis.lam * dt) * (state + drift * dt + G @ dW)


def simulate_path(
    config: SimConfig,
    coeffs: Coefficients,
    basis: EigenBasis,
    initial: np.ndarray,
    path_index: int = 0,
    record_grid: bool = False,
) -> PathRecord:
    """Simulate one trajectory; deterministic given (seed, path_index)."""
    if basis.n_modes != config.n_modes:
        raise ShapeError(
            f"basis has {basis.n_modes} modes, config expects {config.n_modes}"
        )
    times = time_grid(config)
    dts = np.diff(times)
    dW = path_increments(config.seed, path_index, dts, config.m_noise)
    states = np.empty((len(times), config.n_modes))
    states[0] = np.asarray(initial, dtype=float)
    for i, dt in enumerate(dts):
        states[i + 1] = step_exp_euler(
            times[i], states[i], dW[i], coeffs, basis, dt
        )
    grid_u = grid_v = None
    if record_grid:
        grid_u = states @ basis.values.T
        grid_v = np.column_stack(
            (states @ basis.trace0, states @ basis.trace1)
        )
    return PathRecord(times=times, states=states, grid_u=grid_u, grid_v=grid_v)


def terminal_states(config, coeffs, basis, initial, n_paths, threads=1):
    """Terminal modal states of an ensemble, one row per path index."""
    out = np.empty((n_paths, config.n_modes))

    def fill(indices):
        for p in indices:
            out[p] = simulate_path(config, coeffs, basis, initial, p).states[-1]

    if threads <= 1:
        fill(range(n_paths))
    else:
        chunks = np.array_split(np.arange(n_paths), threads)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(fill, chunks))
    return out


def ensemble_stats(
    config: SimConfig,
    coeffs: Coefficients,
    basis: EigenBasis,
    initial: np.ndarray,
    n_paths: int,
    threads: int = 1,
) -> EnsembleStats:
    """Terminal mean/variance over an ensemble, with standard errors.

    Paths are independent work units; statistics are reduced in fixed
    path-index order, so the result does not depend on thread count.
    """
    if n_paths < 2:
        raise ValueError("need at least 2 paths")
    terminal = terminal_states(config, coeffs, basis, initial, n_paths, threads)
    var = terminal.var(axis=0, ddof=1)
    norms = np.linalg.norm(terminal, axis=1)
    var_norm = norms.var(ddof=1)
    return EnsembleStats(
        n_paths=n_paths,
        mean_terminal=terminal.mean(axis=0),
        var_terminal=var,
        se_terminal=np.sqrt(var / n_paths),
        mean_norm=float(norms.mean()),
        var_norm=float(var_norm),
        se_norm=float(np.sqrt(var_norm / n_paths)),
    )


def spot_check_coefficients(
    coeffs: Coefficients, seed: int = 0, samples: int = 200, t_max: float = 1.0
):
    """Sample-test the declared bound K and Lipschitz constant L.

    Raises ValueError on a violated bound; a passing check is evidence,
    not proof.
    """
    rng = np.random.Generator(np.random.Philox(key=seed))
    slack = 1e-9
    for _ in range(samples):
        t = float(rng.uniform(0.0, t_max))
        x = rng.uniform(0.0, 1.0, size=4)
        u1 = rng.normal(scale=2.0, size=4)
        u2 = rng.normal(scale=2.0, size=4)
        fv1, fv2 = coeffs.f(t, x, u1), coeffs.f(t, x, u2)
        gv1, gv2 = coeffs.g(t, x, u1), coeffs.g(t, x, u2)
        if np.max(np.abs(fv1)) > coeffs.K + slack:
            raise ValueError("|f| exceeds the declared bound K")
        if np.max(np.abs(gv1)) > coeffs.K + slack:
            raise ValueError("|g| exceeds the declared bound K")
        if np.max(np.abs(np.asarray(coeffs.h(t)))) > coeffs.K + slack:
            raise ValueError("|h| exceeds the declared bound K")
        du = np.abs(u1 - u2)
        if np.any(np.abs(fv1 - fv2) > coeffs.L * du + slack) or np.any(
            np.abs(gv1 - gv2) > coeffs.L * du + slack
        ):
            raise ValueError("Lipschitz constant L violated on samples")


def named_coefficients(
    name: str,
    g_scale: float = 0.2,
    h0: float = 1.0,
    h1: float = 1.0,
    f_scale: float = 1.0,
) -> Coefficients:
    """Built-in coefficient families selectable from run configurations.

    zero            f = g = 0, h = (0, 0)
    additive        f = 0, g = g_scale (constant), h = (h0, h1)
    multiplicative  f = 0, g = g_scale * sin(u), h = (h0, h1)
    forced          f = f_scale * cos(pi x), g = g_scale, h = (h0, h1)
    """
    hpair = (float(h0), float(h1))
    if name == "zero":
        return Coefficients(
            f=lambda t, x, u: 0.0,
            g=lambda t, x, u: 0.0,
            h=lambda t: (0.0, 0.0),
            K=0.0,
            L=0.0,
        )
    if name == "additive":
        return Coefficients(
            f=lambda t, x, u: 0.0,
            g=lambda t, x, u: g_scale,
            h=lambda t: hpair,
            K=max(abs(g_scale), abs(h0), abs(h1)),
            L=0.0,
        )
    if name == "multiplicative":
        return Coefficients(
            f=lambda t, x, u: 0.0,
            g=lambda t, x, u: g_scale * np.sin(u),
            h=lambda t: hpair,
            K=max(abs(g_scale), abs(h0), abs(h1)),
            L=abs(g_scale),
        )
    if name == "forced":
        return Coefficients(
            f=lambda t, x, u: f_scale * np.cos(np.pi * x),
            g=lambda t, x, u: g_scale,
            h=lambda t: hpair,
            K=max(abs(f_scale), abs(g_scale), abs(h0), abs(h1)),
            L=0.0,
        )
    raise ValueError(f"unknown coefficient family: {name!r}")
