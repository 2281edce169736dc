"""Node and vessel states with the derived quantities of a realized potential.

A node is the tuple ``(A, A_zeta, X, B, C)`` subject to the Lyapunov equation
``A X + X A_zeta + B sigma1 C = 0``.  All arrays may carry leading batch axes
(one entry per grid point); ``A`` and ``A_zeta`` are usually unbatched.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import settings
from .errors import DimensionError, OrderCapError, ParameterError, SingularityError, SpectrumError
from .matrix import ID2, det, inf_norm, inverse, is_singular, solve
from .params import VesselParameters

MAX_MOMENT_ORDER = 8


@dataclass(frozen=True, eq=False)
class NodeState:
    A: np.ndarray
    A_zeta: np.ndarray
    X: np.ndarray
    B: np.ndarray
    C: np.ndarray
    params: VesselParameters
    # eigenvalues of A and A_zeta when known (diagonal constructions)
    lambdas: np.ndarray | None = None
    mus: np.ndarray | None = None

    def __post_init__(self):
        for name in ("A", "A_zeta", "X", "B", "C"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=complex))
        n = self.A.shape[-1]
        ok = (
            self.A.shape[-2:] == (n, n)
            and self.A_zeta.shape[-2:] == (n, n)
            and self.X.shape[-2:] == (n, n)
            and self.B.shape[-2:] == (n, 2)
            and self.C.shape[-2:] == (2, n)
        )
        if not ok:
            raise DimensionError(
                f"inconsistent node shapes A{self.A.shape} Az{self.A_zeta.shape} "
                f"X{self.X.shape} B{self.B.shape} C{self.C.shape}"
            )

    @property
    def dim(self) -> int:
        return self.A.shape[-1]

    def spectrum_A(self) -> np.ndarray:
        if self.lambdas is not None:
            return np.asarray(self.lambdas, dtype=complex)
        return np.linalg.eigvals(self.A) if self.dim else np.zeros(0, dtype=complex)

    def spectrum_A_zeta(self) -> np.ndarray:
        if self.mus is not None:
            return np.asarray(self.mus, dtype=complex)
        return np.linalg.eigvals(self.A_zeta) if self.dim else np.zeros(0, dtype=complex)


@dataclass(frozen=True, eq=False)
class VesselState:
    """A node at a point ``(x, t)`` together with its realized potential."""

    node: NodeState
    x: np.ndarray | float = 0.0
    t: np.ndarray | float | None = None
    anchor_det: complex = 1.0
    gamma_star: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.gamma_star is None:
            object.__setattr__(self, "gamma_star", linkage_gamma_star(self.node))

    @classmethod
    def trivial(cls, params: VesselParameters, x=0.0, t=None) -> "VesselState":
        e = np.zeros((0, 0), dtype=complex)
        node = NodeState(e, e, e, np.zeros((0, 2)), np.zeros((2, 0)), params)
        return cls(node, x, t)

    @property
    def params(self) -> VesselParameters:
        return self.node.params


def lyapunov_residual(node: NodeState) -> np.ndarray | float:
    """``||A X + X A_zeta + B sigma1 C||_inf`` (batched)."""
    r = node.A @ node.X + node.X @ node.A_zeta + node.B @ node.params.sigma1 @ node.C
    out = inf_norm(r)
    return float(out) if np.ndim(out) == 0 else out


def lyapunov_inverse_residual(node: NodeState) -> np.ndarray | float:
    """``||A_zeta X^-1 + X^-1 A + X^-1 B sigma1 C X^-1||_inf``; raises on singular X."""
    Xi = inverse(node.X)
    r = node.A_zeta @ Xi + Xi @ node.A + Xi @ node.B @ node.params.sigma1 @ node.C @ Xi
    out = inf_norm(r)
    return float(out) if np.ndim(out) == 0 else out


def _xinv_b(node: NodeState, check: bool = True) -> np.ndarray:
    return solve(node.X, node.B, check=check)


def _check_spectrum(eigs: np.ndarray, lam: complex, eps: float | None, label: str):
    eps = settings.eps_spec if eps is None else eps
    if eigs.size == 0:
        return
    dist = float(np.min(np.abs(eigs - lam)))
    if dist <= eps:
        raise SpectrumError(f"lambda={lam} is within {dist:.3e} of spec({label})", distance=dist)


def _node_of(state) -> NodeState:
    return state.node if isinstance(state, VesselState) else state


def transfer(state: VesselState | NodeState, lam: complex, eps: float | None = None, check: bool = True) -> np.ndarray:
    """``S(lam) = I - C X^-1 (lam - A)^-1 B sigma1``."""
    node = _node_of(state)
    _check_spectrum(node.spectrum_A(), lam, eps, "A")
    n = node.dim
    R = solve(lam * np.eye(n) - node.A, node.B, check=check)
    return ID2 - node.C @ solve(node.X, R, check=check) @ node.params.sigma1


def transfer_inverse(
    state: VesselState | NodeState, lam: complex, eps: float | None = None, check: bool = True
) -> np.ndarray:
    """``S^-1(lam) = I + C (lam + A_zeta)^-1 X^-1 B sigma1``.

    This is the product identity ``S(lam) S^-1(lam) = I`` that follows from the
    Lyapunov equation; ``sigma1`` sits on the right, as in ``S`` itself.
    """
    node = _node_of(state)
    _check_spectrum(-node.spectrum_A_zeta(), lam, eps, "-A_zeta")
    n = node.dim
    R = solve(lam * np.eye(n) + node.A_zeta, _xinv_b(node, check), check=check)
    return ID2 + node.C @ R @ node.params.sigma1


def moment(state: VesselState | NodeState, n: int, max_order: int = MAX_MOMENT_ORDER, check: bool = True) -> np.ndarray:
    """``H_n = C X^-1 A^n B``."""
    if n < 0:
        raise ValueError("moment order must be nonnegative")
    if n > max_order:
        raise OrderCapError(f"moment order {n} exceeds cap {max_order}")
    node = _node_of(state)
    An = np.linalg.matrix_power(node.A, n) if node.dim else node.A
    return node.C @ solve(node.X, An @ node.B, check=check)


def linkage_from_h0(params: VesselParameters, H0: np.ndarray) -> np.ndarray:
    return params.gamma + params.sigma2 @ H0 @ params.sigma1 - params.sigma1 @ H0 @ params.sigma2


def linkage_gamma_star(node: NodeState, check: bool = True) -> np.ndarray:
    """``gamma_* = gamma + sigma2 H0 sigma1 - sigma1 H0 sigma2``."""
    return linkage_from_h0(node.params, moment(node, 0, check=check))


def pq_from_h0(H0: np.ndarray):
    H0 = np.asarray(H0)
    p = -(H0[..., 0, 1] + H0[..., 1, 0])
    q = H0[..., 0, 0] - H0[..., 1, 1]
    return p, q


def potential_pq(state: VesselState):
    """Potential entries ``p = -(b0 + c0)``, ``q = a0 - d0`` of ``H0``."""
    if not state.params.is_canonical:
        raise ParameterError("p, q are defined only for the canonical parameters")
    return pq_from_h0(moment(state, 0))


def beta_trace(state: VesselState | NodeState, check: bool = True):
    """``tau_x / tau`` via Jacobi's formula: ``tr(X^-1 X') = tr(H0 sigma2)``."""
    node = _node_of(state)
    H0 = moment(node, 0, check=check)
    return np.trace(H0 @ node.params.sigma2, axis1=-2, axis2=-1)


def tau(state: VesselState, eps: float | None = None):
    """``det(X_anchor^-1 X)``; raises when the value is numerically zero."""
    eps = settings.eps_sing if eps is None else eps
    X = state.node.X
    value = det(X) / state.anchor_det
    if state.node.dim and np.any(is_singular(X, eps)):
        worst = float(np.min(np.abs(value)))
        raise SingularityError(f"tau vanishes to working precision (|tau|={worst:.3e})", det=worst)
    return value


def sigma1_symmetry_defect(state: VesselState, lams) -> float:
    """``max ||S(-conj(lam))^* sigma1 S(lam) - sigma1||`` over the probes."""
    s1 = state.params.sigma1
    worst = 0.0
    for lam in np.atleast_1d(lams):
        S = transfer(state, complex(lam))
        Sm = transfer(state, -np.conj(complex(lam)))
        worst = max(worst, float(inf_norm(Sm.conj().T @ s1 @ S - s1)))
    return worst


def is_symmetric_node(node: NodeState, J=None, tol: float = 1e-10) -> bool:
    """``A_zeta = A^*``, ``C = B^* J`` and ``X = X^*`` up to ``tol``."""
    J = np.eye(node.dim) if J is None else np.asarray(J)
    adj = lambda m: np.swapaxes(m.conj(), -1, -2)  # noqa: E731
    diffs = [node.A_zeta - adj(node.A), node.C - adj(node.B) @ J, node.X - adj(node.X)]
    return all(np.max(np.abs(d), initial=0.0) <= tol for d in diffs)
