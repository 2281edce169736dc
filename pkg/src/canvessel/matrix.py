"""Small dense complex linear algebra.

Matrices are plain ``numpy`` complex arrays.  Every routine accepts stacks
(leading batch axes) so a whole grid of inner-space operators can be handled in
one call; dimensions 1 and 2 use exact cofactor formulas.
"""

from __future__ import annotations

import numpy as np

from .config import settings
from .errors import DimensionError, ResonanceError, SingularityError

SIGMA_CANONICAL = np.array([[0, 1j], [-1j, 0]])
ID2 = np.eye(2, dtype=complex)


def as_matrix(m) -> np.ndarray:
    m = np.asarray(m, dtype=complex)
    if m.ndim < 2:
        raise DimensionError(f"expected a matrix, got shape {m.shape}")
    return m


def _require_square(m: np.ndarray) -> int:
    if m.shape[-1] != m.shape[-2]:
        raise DimensionError(f"square matrix required, got {m.shape[-2]}x{m.shape[-1]}")
    return m.shape[-1]


def inf_norm(m) -> np.ndarray:
    """Induced infinity norm (max absolute row sum), batched."""
    m = np.asarray(m)
    if m.shape[-1] == 0 or m.shape[-2] == 0:
        return np.zeros(m.shape[:-2])
    return np.abs(m).sum(axis=-1).max(axis=-1)


def max_abs(m) -> float:
    m = np.asarray(m)
    return float(np.max(np.abs(m))) if m.size else 0.0


def allclose(a, b, atol=None, rtol=None) -> bool:
    """Mixed absolute/relative comparison in the entrywise max norm."""
    atol = settings.atol if atol is None else atol
    rtol = settings.rtol if rtol is None else rtol
    a, b = np.asarray(a), np.asarray(b)
    return max_abs(a - b) <= atol + rtol * max(max_abs(a), max_abs(b))


def det(m) -> np.ndarray | complex:
    m = as_matrix(m)
    n = _require_square(m)
    if n == 0:
        out = np.ones(m.shape[:-2], dtype=complex)
    elif n == 1:
        out = m[..., 0, 0].copy()
    elif n == 2:
        out = m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] * m[..., 1, 0]
    else:
        out = np.linalg.det(m)
    return out[()] if out.ndim == 0 else out


def _singular_floor(m: np.ndarray, eps: float) -> np.ndarray:
    n = m.shape[-1]
    scale = inf_norm(m)
    return eps * np.maximum(scale, 1e-300) ** n


def is_singular(m, eps=None) -> np.ndarray:
    """Boolean (batched) flag: |det m| below ``eps * ||m||^n``."""
    eps = settings.eps_sing if eps is None else eps
    m = as_matrix(m)
    _require_square(m)
    if m.shape[-1] == 0:
        return np.zeros(m.shape[:-2], dtype=bool)
    return np.abs(det(m)) <= _singular_floor(m, eps)


def inverse(m, eps=None) -> np.ndarray:
    eps = settings.eps_sing if eps is None else eps
    m = as_matrix(m)
    n = _require_square(m)
    if n == 0:
        return m.copy()
    d = np.asarray(det(m))
    bad = np.abs(d) <= _singular_floor(m, eps)
    if np.any(bad):
        worst = float(np.min(np.abs(d)))
        raise SingularityError(f"matrix is singular to working precision (|det|={worst:.3e})", det=worst)
    if n == 1:
        return 1.0 / m
    if n == 2:
        out = np.empty_like(m)
        out[..., 0, 0] = m[..., 1, 1]
        out[..., 1, 1] = m[..., 0, 0]
        out[..., 0, 1] = -m[..., 0, 1]
        out[..., 1, 0] = -m[..., 1, 0]
        return out / d[..., None, None]
    return np.linalg.inv(m)


def solve(m, rhs, eps=None, check=True) -> np.ndarray:
    """``m^{-1} rhs`` for (stacks of) square ``m``.

    With ``check=False`` singular entries of a stack produce inf/nan instead of
    raising; callers mask those points themselves.
    """
    m = as_matrix(m)
    rhs = np.asarray(rhs, dtype=complex)
    n = _require_square(m)
    if n == 0:
        return np.zeros(np.broadcast_shapes(m.shape[:-2], rhs.shape[:-2]) + rhs.shape[-2:], dtype=complex)
    if check:
        return inverse(m, eps) @ rhs
    with np.errstate(all="ignore"):
        if n <= 2:
            d = np.asarray(det(m))
            if n == 1:
                return rhs / m
            adj = np.empty_like(m)
            adj[..., 0, 0] = m[..., 1, 1]
            adj[..., 1, 1] = m[..., 0, 0]
            adj[..., 0, 1] = -m[..., 0, 1]
            adj[..., 1, 0] = -m[..., 1, 0]
            return (adj @ rhs) / d[..., None, None]
        try:
            return np.linalg.solve(m, rhs)
        except np.linalg.LinAlgError:
            out = np.empty(np.broadcast_shapes(m.shape[:-2], rhs.shape[:-2]) + rhs.shape[-2:], dtype=complex)
            mm = np.broadcast_to(m, out.shape[:-2] + m.shape[-2:])
            rr = np.broadcast_to(rhs, out.shape)
            for idx in np.ndindex(out.shape[:-2]):
                try:
                    out[idx] = np.linalg.solve(mm[idx], rr[idx])
                except np.linalg.LinAlgError:
                    out[idx] = np.nan
            return out


def solve_sylvester_diag(lambdas, mus, rhs, tol=1e-13) -> np.ndarray:
    """Solve ``diag(lambdas) X + X diag(mus) = -rhs`` entrywise.

    Raises :class:`ResonanceError` listing every ``(i, j)`` with
    ``lambda_i + mu_j`` numerically zero.
    """
    lam = np.asarray(lambdas, dtype=complex).ravel()
    mu = np.asarray(mus, dtype=complex).ravel()
    rhs = np.asarray(rhs, dtype=complex)
    if rhs.shape[-2:] != (lam.size, mu.size):
        raise DimensionError(f"rhs shape {rhs.shape} does not match ({lam.size}, {mu.size})")
    denom = lam[:, None] + mu[None, :]
    scale = np.maximum(np.abs(lam)[:, None] + np.abs(mu)[None, :], 1.0)
    hits = np.argwhere(np.abs(denom) <= tol * scale)
    if hits.size:
        pairs = [(int(i), int(j)) for i, j in hits]
        raise ResonanceError(f"lambda_i + mu_j = 0 for (i, j) in {pairs}", pairs=pairs)
    return -rhs / denom
