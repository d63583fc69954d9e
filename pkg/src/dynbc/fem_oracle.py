"""Independent P1 finite-element discretization used as a cross-check oracle.

The coupled state (u, v0, v1) is discretized on a uniform grid with the
endpoint nodal values doubling as the boundary components, which builds the
trace constraint into the degrees of freedom.  The energy form becomes the
standard tridiagonal stiffness matrix with b0, b1 added at the corners; the
X inner product becomes the P1 mass matrix with a unit point mass at each
endpoint.  Everything downstream (eigenpairs, semigroup action) follows
from the dense symmetric generalized eigenproblem, kept deliberately
low-tech so it stays independent of the spectral machinery it checks.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import ConvergenceError, DomainError, ShapeError
from .spectral import BoundaryParams

MAX_SIZE = 4002


@dataclass
class DiscreteOperator:
    """Stiffness/mass pair of the P1 discretization on n elements."""

    n: int
    params: BoundaryParams
    nodes: np.ndarray
    stiffness: np.ndarray
    mass: np.ndarray
    _decomposition: tuple = field(default=None, repr=False, compare=False)

    def mass_norm(self, vec: np.ndarray) -> float:
        return float(np.sqrt(vec @ (self.mass @ vec)))


def build(n: int, params: BoundaryParams) -> DiscreteOperator:
    """Assemble exact P1 element integrals on a uniform grid of n elements."""
    if n < 8:
        raise ValueError("need at least 8 elements")
    if n + 1 > MAX_SIZE:
        raise ValueError(f"resolution capped at {MAX_SIZE - 1} elements")
    h = 1.0 / n
    m = n + 1
    main_k = np.full(m, 2.0 / h)
    main_k[0] = main_k[-1] = 1.0 / h
    stiffness = (
        np.diag(main_k)
        + np.diag(np.full(n, -1.0 / h), 1)
        + np.diag(np.full(n, -1.0 / h), -1)
    )
    stiffness[0, 0] += params.b0
    stiffness[-1, -1] += params.b1
    main_m = np.full(m, 4.0 * h / 6.0)
    main_m[0] = main_m[-1] = 2.0 * h / 6.0
    mass = (
        np.diag(main_m)
        + np.diag(np.full(n, h / 6.0), 1)
        + np.diag(np.full(n, h / 6.0), -1)
    )
    # unit point masses represent the R^2 boundary components
    mass[0, 0] += 1.0
    mass[-1, -1] += 1.0
    return DiscreteOperator(
        n=n,
        params=params,
        nodes=np.linspace(0.0, 1.0, m),
        stiffness=stiffness,
        mass=mass,
    )


def _decompose(op: DiscreteOperator):
    if op._decomposition is None:
        try:
            mu, vecs = scipy.linalg.eigh(op.stiffness, op.mass)
        except scipy.linalg.LinAlgError as exc:  # pragma: no cover
            raise ConvergenceError(f"generalized eigensolve failed: {exc}") from exc
        op._decomposition = (mu, vecs)
    return op._decomposition


def eigensolve(op: DiscreteOperator, n_modes: int):
    """Smallest-magnitude generalized eigenpairs, mass-orthonormal.

    Eigenvalues are returned negated to the dissipative sign convention
    (all <= 0, decreasing), one column of eigenvectors per eigenvalue.
    """
    if n_modes > op.n + 1:
        raise ValueError("more modes requested than degrees of freedom")
    mu, vecs = _decompose(op)
    return -mu[:n_modes], vecs[:, :n_modes]


def expm_apply(op: DiscreteOperator, t: float, state: np.ndarray) -> np.ndarray:
    """Apply the matrix exponential of the discrete generator to a state."""
    if t < 0.0:
        raise DomainError("semigroup defined for t >= 0")
    if len(state) != op.n + 1:
        raise ShapeError(f"state length {len(state)} != {op.n + 1} dofs")
    mu, vecs = _decompose(op)
    coeffs = vecs.T @ (op.mass @ state)
    return vecs @ (np.exp(-mu * t) * coeffs)


def source_response(
    op: DiscreteOperator,
    t: float,
    interior_density: np.ndarray,
    boundary=(0.0, 0.0),
) -> np.ndarray:
    """Exact response int_0^t e^{(t-s)A} q ds of the discrete generator.

    The constant-in-time source q is given as an interior density (nodal
    samples) plus an optional boundary pair; the interior part loads the
    finite elements without the endpoint point masses, matching a source
    that acts on the function component only.
    """
    if t < 0.0:
        raise DomainError("defined for t >= 0")
    mu, vecs = _decompose(op)
    load = op.mass @ interior_density
    load[0] += boundary[0] - interior_density[0]
    load[-1] += boundary[1] - interior_density[-1]
    cq = vecs.T @ load
    with np.errstate(invalid="ignore", divide="ignore"):
        weight = np.where(mu > 0.0, -np.expm1(-mu * t) / mu, t)
    return vecs @ (weight * cq)
