"""Eigenproblem of the coupled heat operator with dynamical boundary conditions.

The operator acts on X = L2(0,1) x R^2: heat conduction in the interior,
with each endpoint value evolving by its own damped ODE fed by the inward
normal derivative.  Its spectrum is real and negative; eigenvalues are the
roots of a scalar transcendental characteristic function, located between
consecutive Dirichlet eigenvalues -pi^2 k^2.  Each Dirichlet gap carries at
least one root, and the two boundary degrees of freedom contribute two
extra low-lying modes, so one gap (the first one, for moderate damping)
contains two roots.  Eigenfunctions are explicit trigonometric profiles,
normalized here in the full X inner product by closed-form integrals.
"""

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    BracketError,
    DegenerateModeError,
    DirichletPointError,
    DomainError,
    PoleError,
    ResonanceError,
)
from .quadrature import (
    DEFAULT_NODES_PER_PANEL,
    DEFAULT_PANELS,
    QuadratureRule,
    gauss_legendre_rule,
)

_POLE_RTOL = 1e-13
_DIRICHLET_RTOL = 1e-9
_BISECT_RTOL = 1e-6
_REFINE_RTOL = 1e-12


@dataclass(frozen=True)
class BoundaryParams:
    """Positive damping rates of the two boundary reservoirs."""

    b0: float
    b1: float

    def __post_init__(self):
        if not self.b0 > 0.0:
            raise ValueError("b0 must be positive")
        if not self.b1 > 0.0:
            raise ValueError("b1 must be positive")


def characteristic_determinant(lam: float, params: BoundaryParams) -> float:
    """Scalar characteristic function whose negative roots are eigenvalues.

    Continuous on each pole-free interval; poles sit at -b0, -b1 and (for
    lam < 0) at the Dirichlet points -pi^2 k^2.  Strictly positive for
    lam > 0, so the spectrum is negative.
    """
    b0, b1 = params.b0, params.b1
    ptol = _POLE_RTOL * (1.0 + abs(lam))
    if abs(lam + b0) <= ptol or abs(lam + b1) <= ptol:
        raise PoleError(f"lambda={lam} is a pole (-b0 or -b1)")
    if lam == 0.0:
        # analytic limit: sqrt(-lam)*cot(sqrt(-lam)) -> 1
        return 1.0 + 1.0 / b0 + 1.0 / b1
    if lam < 0.0:
        s = math.sqrt(-lam)
        k = round(s / math.pi)
        if k >= 1 and abs(s - k * math.pi) <= _DIRICHLET_RTOL * (1.0 + s):
            raise DirichletPointError(f"lambda={lam} is a Dirichlet point")
        cot = math.cos(s) / math.sin(s)
        return (
            1.0
            + s * cot * (1.0 / (lam + b0) + 1.0 / (lam + b1))
            + lam / ((lam + b0) * (lam + b1))
        )
    # lam > 0: exponential form, arranged with exp(-2 sqrt(lam)) so that it
    # stays finite for large lam (the raw (1+e^{2r})/(e^{2r}-1) overflows)
    r = math.sqrt(lam)
    em = math.exp(-2.0 * r)
    ratio = (1.0 + em) / (1.0 - em)
    return (
        1.0
        + r * ratio * (1.0 / (b0 + lam) + 1.0 / (b1 + lam))
        + lam / ((b0 + lam) * (b1 + lam))
    )


def characteristic_regularized(lam, params: BoundaryParams):
    """Pole-free rescaling of the characteristic function for lam < 0.

    Equals (lam+b0)(lam+b1) sin(sqrt(-lam)) times the determinant, expanded
    so that it is continuous across the determinant's poles.  Shares the
    determinant's roots away from those poles; accepts scalars or arrays.
    """
    arr = np.asarray(lam, dtype=float)
    if np.any(arr >= 0.0):
        raise DomainError("characteristic_regularized requires lambda < 0")
    s = np.sqrt(-arr)
    b0, b1 = params.b0, params.b1
    val = ((arr + b0) * (arr + b1) + arr) * np.sin(s) + s * np.cos(s) * (
        (arr + b0) + (arr + b1)
    )
    return float(val) if np.isscalar(lam) else val


def _refine_root(f, lo: float, hi: float) -> float:
    """Bisection to a coarse width, then bracket-safeguarded secant."""
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    scale = 1.0 + max(abs(lo), abs(hi))
    while hi - lo > _BISECT_RTOL * scale:
        mid = 0.5 * (lo + hi)
        fmid = f(mid)
        if fmid == 0.0:
            return mid
        if flo * fmid < 0.0:
            hi, fhi = mid, fmid
        else:
            lo, flo = mid, fmid
    while hi - lo > _REFINE_RTOL * scale:
        width = hi - lo
        denom = fhi - flo
        x = 0.5 * (lo + hi) if denom == 0.0 else hi - fhi * (hi - lo) / denom
        if not lo < x < hi:
            x = 0.5 * (lo + hi)
        fx = f(x)
        if fx == 0.0:
            return x
        if flo * fx < 0.0:
            hi, fhi = x, fx
        else:
            lo, flo = x, fx
        if hi - lo > 0.5 * width:
            # secant stalled against one endpoint; force a bisection step
            mid = 0.5 * (lo + hi)
            fmid = f(mid)
            if fmid == 0.0:
                return mid
            if flo * fmid < 0.0:
                hi, fhi = mid, fmid
            else:
                lo, flo = mid, fmid
    return 0.5 * (lo + hi)


def _gap_roots(params: BoundaryParams, k: int, samples: int) -> list[float]:
    """All characteristic roots inside the Dirichlet gap number k."""
    hi = -math.pi**2 * k**2
    lo = -math.pi**2 * (k + 1) ** 2
    eps = 1e-9 * (1.0 + abs(hi))
    grid = list(np.linspace(lo + eps, hi - eps, samples))
    # subdivide at the characteristic-function poles falling inside the gap,
    # where the determinant flips sign without a root
    for b in (-params.b0, -params.b1):
        if lo + eps < b < hi - eps:
            delta = 1e-7 * (1.0 + abs(b))
            grid.extend((b - delta, b, b + delta))
    xs = np.array(sorted(set(grid)))
    ys = characteristic_regularized(xs, params)
    roots = []
    sign = np.sign(ys)
    for i in np.nonzero(np.diff(sign) != 0)[0]:
        root = _refine_root(
            lambda x: characteristic_regularized(float(x), params),
            float(xs[i]),
            float(xs[i + 1]),
        )
        roots.append(root)
    exclude_tol = 1e-8
    kept = []
    for r in sorted(roots, reverse=True):
        rel = exclude_tol * (1.0 + abs(r))
        near_pole = min(abs(r + params.b0), abs(r + params.b1)) <= rel
        near_dirichlet = min(abs(r - lo), abs(r - hi)) <= rel or abs(r) <= 1e-10
        if not (near_pole or near_dirichlet):
            kept.append(r)
    return kept


def find_eigenvalues(
    params: BoundaryParams, n_modes: int, samples_per_gap: int = 256
) -> np.ndarray:
    """First ``n_modes`` eigenvalues, in decreasing order (all negative).

    Scans the Dirichlet gaps (-pi^2 (k+1)^2, -pi^2 k^2) in order, locating
    sign changes of the regularized characteristic function on a fine grid
    subdivided at -b0 and -b1, and refines each to relative width 1e-12.
    A gap may hold one root or, for the two boundary-induced modes, two.
    """
    if n_modes < 1:
        raise ValueError("n_modes must be >= 1")
    roots: list[float] = []
    for k in range(n_modes + 5):
        roots.extend(_gap_roots(params, k, samples_per_gap))
        if len(roots) >= n_modes:
            break
    if len(roots) < n_modes:
        raise BracketError(
            f"found only {len(roots)} roots of {n_modes} requested for "
            f"b0={params.b0}, b1={params.b1}; parameter degeneracy or "
            f"insufficient samples_per_gap"
        )
    return np.array(roots[:n_modes])


@dataclass(frozen=True)
class EigenMode:
    """One normalized eigenmode: profile e(x) plus its boundary traces.

    The triple (e, e(0), e(1)) has unit norm in X = L2(0,1) x R^2.  The
    profile is B*(alpha*cos(s x) + sin(s x)) with s = sqrt(-lambda) and
    alpha = s/(b0+lambda); this shape satisfies the x=0 boundary relation
    (lambda+b0) e(0) = e'(0) identically.
    """

    j: int
    lam: float
    B: float
    trace0: float
    trace1: float
    s: float
    alpha: float

    def __call__(self, x):
        return self.B * (self.alpha * np.cos(self.s * x) + np.sin(self.s * x))

    def derivative(self, x):
        return self.B * self.s * (np.cos(self.s * x) - self.alpha * np.sin(self.s * x))


def build_mode(lam: float, j: int, params: BoundaryParams) -> EigenMode:
    """Normalize the eigenmode at a verified root ``lam`` (< 0).

    The normalization constant is fixed by the closed-form antiderivatives
    of cos^2, sin^2 and sin*cos, so no quadrature enters the norm.
    """
    if lam >= 0.0:
        raise DomainError("eigenvalues are negative")
    b0 = params.b0
    if abs(lam + b0) <= 1e-12 * (1.0 + b0 + abs(lam)):
        raise DegenerateModeError(f"lambda={lam} too close to -b0")
    s = math.sqrt(-lam)
    alpha = s / (b0 + lam)
    i_cc = 0.5 + math.sin(2.0 * s) / (4.0 * s)
    i_ss = 0.5 - math.sin(2.0 * s) / (4.0 * s)
    i_sc = math.sin(s) ** 2 / (2.0 * s)
    e0 = alpha
    e1 = alpha * math.cos(s) + math.sin(s)
    norm_sq = alpha**2 * i_cc + 2.0 * alpha * i_sc + i_ss + e0**2 + e1**2
    if norm_sq < 1e-14:
        raise DegenerateModeError(f"degenerate mode at lambda={lam}")
    B = 1.0 / math.sqrt(norm_sq)
    return EigenMode(
        j=j, lam=lam, B=B, trace0=B * e0, trace1=B * e1, s=s, alpha=alpha
    )


def normalization_bound(mode: EigenMode):
    """Whether B < (1+s)/(s-1); None when s <= 1 and the bound is vacuous.

    Reported for diagnostics only, never enforced.
    """
    if mode.s <= 1.0:
        return None
    return bool(mode.B < (1.0 + mode.s) / (mode.s - 1.0))


def dirichlet_gap(lam: float) -> tuple[int, float, float]:
    """Index k and endpoints of the Dirichlet gap containing ``lam``."""
    if lam >= 0.0:
        raise DomainError("eigenvalues are negative")
    k = int(math.floor(math.sqrt(-lam) / math.pi))
    return k, -math.pi**2 * (k + 1) ** 2, -math.pi**2 * k**2


@dataclass(frozen=True)
class EigenBasis:
    """Orthonormal eigenbasis of X with a shared quadrature grid.

    ``values`` and ``derivs`` hold the mode profiles and their derivatives
    sampled at the quadrature nodes, one column per mode; ``trace0`` and
    ``trace1`` collect the endpoint traces.  Immutable after construction
    and safe to share across threads.
    """

    params: BoundaryParams
    modes: tuple[EigenMode, ...]
    quad: QuadratureRule
    lam: np.ndarray
    values: np.ndarray
    derivs: np.ndarray
    trace0: np.ndarray
    trace1: np.ndarray
    interior_gram: np.ndarray

    @property
    def n_modes(self) -> int:
        return len(self.modes)

    def gram_matrix(self) -> np.ndarray:
        """Full X inner products <phi_j, phi_k> on the quadrature grid."""
        return (
            self.interior_gram
            + np.outer(self.trace0, self.trace0)
            + np.outer(self.trace1, self.trace1)
        )


def _assemble_basis(
    params: BoundaryParams, modes: list[EigenMode], quad: QuadratureRule
) -> EigenBasis:
    values = np.column_stack([m(quad.nodes) for m in modes])
    derivs = np.column_stack([m.derivative(quad.nodes) for m in modes])
    interior = values.T @ (quad.weights[:, None] * values)
    return EigenBasis(
        params=params,
        modes=tuple(modes),
        quad=quad,
        lam=np.array([m.lam for m in modes]),
        values=values,
        derivs=derivs,
        trace0=np.array([m.trace0 for m in modes]),
        trace1=np.array([m.trace1 for m in modes]),
        interior_gram=interior,
    )


def build_basis(
    params: BoundaryParams,
    n_modes: int = 16,
    panels: int = DEFAULT_PANELS,
    nodes_per_panel: int = DEFAULT_NODES_PER_PANEL,
    quad: QuadratureRule = None,
) -> EigenBasis:
    """Solve the eigenproblem and assemble the first ``n_modes`` modes."""
    if quad is None:
        quad = gauss_legendre_rule(panels, nodes_per_panel)
    lams = find_eigenvalues(params, n_modes)
    modes = [build_mode(lam, j, params) for j, lam in enumerate(lams)]
    return _assemble_basis(params, modes, quad)


def dirichlet_map(lam: float, phi: tuple[float, float]):
    """Solution operator of (lam - d^2/dx^2) u = 0 with traces u(0), u(1).

    Returns a vectorized evaluator on [0, 1].  Undefined at the Dirichlet
    eigenvalues lam = -pi^2 k^2 (resonance).
    """
    phi0, phi1 = float(phi[0]), float(phi[1])
    if lam == 0.0:
        return lambda x: phi0 * (1.0 - np.asarray(x, dtype=float)) + phi1 * np.asarray(
            x, dtype=float
        )
    if lam > 0.0:
        m = math.sqrt(lam)

        def evaluate(x):
            x = np.asarray(x, dtype=float)
            den = -np.expm1(-2.0 * m)
            left = np.exp(-m * x) * (-np.expm1(-2.0 * m * (1.0 - x))) / den
            right = np.exp(-m * (1.0 - x)) * (-np.expm1(-2.0 * m * x)) / den
            return phi0 * left + phi1 * right

        return evaluate
    s = math.sqrt(-lam)
    k = round(s / math.pi)
    if k >= 1 and abs(s - k * math.pi) <= _DIRICHLET_RTOL * (1.0 + s):
        raise ResonanceError(f"lambda={lam} is a Dirichlet eigenvalue")

    def evaluate(x):
        x = np.asarray(x, dtype=float)
        return (phi0 * np.sin(s * (1.0 - x)) + phi1 * np.sin(s * x)) / math.sin(s)

    return evaluate


def basis_to_json(basis: EigenBasis) -> str:
    """Serialize (b0, b1, N, per-mode j/lambda/B) losslessly."""
    payload = {
        "b0": _fmt(basis.params.b0),
        "b1": _fmt(basis.params.b1),
        "N": basis.n_modes,
        "modes": [
            {"j": m.j, "lambda": _fmt(m.lam), "B": _fmt(m.B)} for m in basis.modes
        ],
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def basis_from_json(
    text: str,
    panels: int = DEFAULT_PANELS,
    nodes_per_panel: int = DEFAULT_NODES_PER_PANEL,
) -> EigenBasis:
    """Rebuild a basis from its serialized form without re-solving roots."""
    payload = json.loads(text)
    params = BoundaryParams(float(payload["b0"]), float(payload["b1"]))
    quad = gauss_legendre_rule(panels, nodes_per_panel)
    modes = []
    for entry in sorted(payload["modes"], key=lambda e: e["j"]):
        mode = build_mode(float(entry["lambda"]), int(entry["j"]), params)
        stored_B = float(entry["B"])
        scale = stored_B / mode.B
        modes.append(
            EigenMode(
                j=mode.j,
                lam=mode.lam,
                B=stored_B,
                trace0=mode.trace0 * scale,
                trace1=mode.trace1 * scale,
                s=mode.s,
                alpha=mode.alpha,
            )
        )
    return _assemble_basis(params, modes, quad)


def _fmt(x: float) -> float:
    # round-trip via 17 significant digits keeps the decimal form bit-exact
    return float(f"{x:.17g}")
