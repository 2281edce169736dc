"""Finite differences on rectangular grids and residuals of the canonical PDE chain.

Derivatives use second-order central stencils followed by one Richardson step
(``(4 D_h - D_2h) / 3``), so smooth data are differentiated to fourth order.
Points whose stencil touches the boundary or a masked point are masked.

Every residual is reported relative to the largest magnitude among its
constituent terms at that point.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .config import settings
from .errors import DegenerateInputError, DomainError, StencilError

CSV_COLUMNS = ("x", "t", "value_re", "value_im", "masked")

STENCILS = {
    1: np.array([-0.5, 0.0, 0.5]),
    2: np.array([1.0, -2.0, 1.0]),
    3: np.array([-0.5, 1.0, 0.0, -1.0, 0.5]),
    4: np.array([1.0, -4.0, 6.0, -4.0, 1.0]),
}


def _raw_stencil(f: np.ndarray, h: float, order: int, step: int) -> np.ndarray:
    w = STENCILS[order]
    r = len(w) // 2
    n = f.shape[-1]
    out = np.full(f.shape, np.nan, dtype=np.result_type(f, float))
    if n < 2 * r * step + 1:
        return out
    acc = 0
    for j, wj in enumerate(w):
        off = (j - r) * step
        acc = acc + wj * f[..., r * step + off : n - r * step + off]
    out[..., r * step : n - r * step] = acc / (step * h) ** order
    return out


def stencil_radius(order: int, richardson: bool = True) -> int:
    return (len(STENCILS[order]) // 2) * (2 if richardson else 1)


def fd_derivative_array(f, h: float, order: int, axis: int = 0, richardson: bool | None = None) -> np.ndarray:
    """Derivative of sampled data along ``axis``; invalid points are nan.

    ``richardson=None`` extrapolates whenever the axis is long enough.
    """
    if order not in STENCILS:
        raise StencilError(f"derivative order {order} not supported (1..4)")
    if h <= 0:
        raise StencilError("grid spacing must be positive")
    f = np.moveaxis(np.asarray(f), axis, -1)
    n = f.shape[-1]
    r = len(STENCILS[order]) // 2
    if n < 2 * r + 1:
        raise StencilError(f"{n} points along axis {axis} are too few for order {order}")
    if richardson is None:
        richardson = n >= 4 * r + 1
    elif richardson and n < 4 * r + 1:
        raise StencilError(f"{n} points along axis {axis} are too few for Richardson at order {order}")
    with np.errstate(invalid="ignore", over="ignore"):
        d = _raw_stencil(f, h, order, 1)
        if richardson:
            d = (4 * d - _raw_stencil(f, h, order, 2)) / 3
    return np.moveaxis(d, -1, axis)


@dataclass
class GridFunction:
    """Samples on a uniform ``x`` (and optionally ``t``) grid.

    ``values`` has shape ``(nx,)`` or ``(nx, nt)`` followed by optional matrix
    axes; ``mask`` flags invalid points and has the grid shape.
    """

    x0: float
    dx: float
    values: np.ndarray
    t0: float | None = None
    dt: float | None = None
    mask: np.ndarray | None = field(default=None)

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if self.dx <= 0 or (self.dt is not None and self.dt <= 0):
            raise DomainError("grid spacings must be positive")
        gshape = self.grid_shape
        if self.values.shape[: len(gshape)] != gshape:
            raise DomainError("values do not match grid shape")
        bad = ~np.isfinite(self.values)
        bad = bad.reshape(gshape + (-1,)).any(axis=-1) if bad.ndim > len(gshape) else bad
        self.mask = bad if self.mask is None else (np.asarray(self.mask, dtype=bool) | bad)

    @property
    def is_2d(self) -> bool:
        return self.dt is not None

    @property
    def nx(self) -> int:
        return self.values.shape[0]

    @property
    def nt(self) -> int:
        return self.values.shape[1] if self.is_2d else 1

    @property
    def grid_shape(self) -> tuple:
        return (self.values.shape[0], self.values.shape[1]) if self.dt is not None else (self.values.shape[0],)

    @property
    def xs(self) -> np.ndarray:
        return self.x0 + self.dx * np.arange(self.nx)

    @property
    def ts(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.nt) if self.is_2d else np.zeros(1)

    def mesh(self):
        if not self.is_2d:
            return self.xs, None
        return np.meshgrid(self.xs, self.ts, indexing="ij")

    @classmethod
    def sample(cls, f, xs, ts=None, mask=None) -> "GridFunction":
        """Evaluate ``f(x)`` or ``f(x, t)`` on uniform coordinate vectors."""
        xs = np.asarray(xs, dtype=float)
        if ts is None:
            return cls(float(xs[0]), _spacing(xs), f(xs), mask=mask)
        ts = np.asarray(ts, dtype=float)
        X, T = np.meshgrid(xs, ts, indexing="ij")
        return cls(float(xs[0]), _spacing(xs), f(X, T), float(ts[0]), _spacing(ts), mask=mask)

    def like(self, values, mask=None) -> "GridFunction":
        return GridFunction(self.x0, self.dx, values, self.t0, self.dt, self.mask if mask is None else mask)

    def masked_values(self) -> np.ndarray:
        v = np.array(self.values, dtype=np.result_type(self.values, float))
        m = self.mask.reshape(self.mask.shape + (1,) * (v.ndim - self.mask.ndim))
        return np.where(m, np.nan, v)

    def pointwise_norm(self) -> np.ndarray:
        """Entrywise max-abs over matrix axes (identity for scalar samples)."""
        a = np.abs(self.values)
        extra = tuple(range(len(self.grid_shape), a.ndim))
        return a.max(axis=extra) if extra else a

    def sup(self) -> float:
        if np.all(self.mask):
            raise DegenerateInputError("every grid point is masked")
        return float(np.max(self.pointwise_norm()[~self.mask]))

    def rows(self):
        """``(x, t, re, im, masked)`` per point (scalar samples only)."""
        if self.values.ndim != len(self.grid_shape):
            raise DomainError("row export needs scalar samples")
        X, T = self.mesh()
        T = np.zeros_like(X) if T is None else T
        for x, t, v, m in zip(X.ravel(), T.ravel(), self.values.ravel(), self.mask.ravel()):
            v = complex(v)
            yield float(x), float(t), v.real, v.imag, bool(m)

    def to_csv(self, path, columns=CSV_COLUMNS):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(list(columns))
            for x, t, re, im, m in self.rows():
                w.writerow([f"{x:.17g}", f"{t:.17g}", f"{re:.17g}", f"{im:.17g}", int(m)])

    def to_dict(self) -> dict:
        v = np.asarray(self.values, dtype=complex)
        return {
            "x0": self.x0,
            "dx": self.dx,
            "nx": self.nx,
            "t0": self.t0,
            "dt": self.dt,
            "nt": self.nt if self.is_2d else None,
            "values": np.stack([v.real, v.imag], axis=-1).tolist(),
            "mask": self.mask.astype(int).tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def _spacing(v: np.ndarray) -> float:
    if v.size < 2:
        return 1.0
    d = np.diff(v)
    if not np.allclose(d, d[0], rtol=1e-9, atol=0):
        raise DomainError("grid must be uniform")
    return float(d[0])


def fd_derivative(f: GridFunction, axis: str | int = "x", order: int = 1, richardson: bool | None = None) -> GridFunction:
    """Derivative of a :class:`GridFunction`; the mask grows by the stencil radius."""
    ax = {"x": 0, "t": 1}.get(axis, axis)
    if ax == 1 and not f.is_2d:
        raise DomainError("no t axis on a one-dimensional grid")
    h = f.dx if ax == 0 else f.dt
    d = fd_derivative_array(f.masked_values(), h, order, axis=ax, richardson=richardson)
    return f.like(np.nan_to_num(d, nan=0.0), mask=f.mask | _invalid(d, len(f.grid_shape)))


def _invalid(a: np.ndarray, gdim: int) -> np.ndarray:
    bad = ~np.isfinite(a)
    return bad.reshape(bad.shape[:gdim] + (-1,)).any(axis=-1) if bad.ndim > gdim else bad


def _relative(terms, gdim: int, mask: np.ndarray):
    """Sum of terms divided by the pointwise max of their magnitudes."""

    def mag(a):
        a = np.abs(a)
        return a.reshape(a.shape[:gdim] + (-1,)).max(axis=-1) if a.ndim > gdim else a

    total = sum(terms)
    scale = np.max(np.stack([mag(t) for t in terms]), axis=0)
    res = mag(total)
    with np.errstate(invalid="ignore", divide="ignore"):
        rel = np.where(scale > 0, res / np.where(scale > 0, scale, 1.0), 0.0)
    bad = mask | ~np.isfinite(rel)
    return np.where(bad, 0.0, rel), bad


# ---------------------------------------------------------------------------
# derivatives of a 2D field bundled for the residuals


class _Derivs:
    def __init__(self, g: GridFunction):
        if not g.is_2d:
            raise DomainError("an (x, t) grid is required")
        self.g = g
        v = g.masked_values()
        self.v = v
        self._cache = {}

    def __call__(self, nx: int = 0, nt: int = 0) -> np.ndarray:
        key = (nx, nt)
        if key not in self._cache:
            a = self.v
            if nt:
                a = fd_derivative_array(a, self.g.dt, nt, axis=1)
            if nx:
                a = fd_derivative_array(a, self.g.dx, nx, axis=0)
            self._cache[key] = a
        return self._cache[key]


def _same_grid(*gs: GridFunction):
    g0 = gs[0]
    for g in gs[1:]:
        if g.grid_shape != g0.grid_shape or not np.isclose(g.dx, g0.dx) or g.dt != g0.dt:
            raise DomainError("grid functions live on different grids")


def _result(g: GridFunction, rel, bad) -> GridFunction:
    if np.all(bad):
        raise DegenerateInputError("every grid point is masked")
    return GridFunction(g.x0, g.dx, rel, g.t0, g.dt, mask=bad)


def canonical_pde_residual(beta: GridFunction, eps_beta: float | None = None) -> GridFunction:
    """Relative residual of ``beta_tt = d/dx[-(beta')^2/2 - beta'''/4 + (beta_t^2 + beta''^2/4)/beta']``.

    The right side is expanded analytically, so the residual is the sum of
    ``beta_tt``, ``beta' beta''``, ``beta''''/4``,
    ``-(2 beta_t beta_tx + beta'' beta'''/2)/beta'`` and
    ``(beta_t^2 + beta''^2/4) beta''/beta'^2``.  Points with
    ``|beta'| < eps_beta`` are masked.
    """
    eps_beta = settings.eps_beta if eps_beta is None else eps_beta
    D = _Derivs(beta)
    b1, b2, b3, b4 = D(1), D(2), D(3), D(4)
    bt, btt, btx = D(0, 1), D(0, 2), D(1, 1)
    flat = ~(np.abs(b1) >= eps_beta)
    with np.errstate(all="ignore"):
        b1s = np.where(flat, 1.0, b1)
        terms = [
            btt,
            b1 * b2,
            b4 / 4,
            -(2 * bt * btx + 0.5 * b2 * b3) / b1s,
            (bt**2 + 0.25 * b2**2) * b2 / b1s**2,
        ]
    rel, bad = _relative(terms, 2, beta.mask | flat | _invalid(b4, 2) | _invalid(btt, 2) | _invalid(btx, 2))
    return _result(beta, rel, bad)


def pq_evolution_residual(p: GridFunction, q: GridFunction):
    """Residuals of ``p_t = q(p^2+q^2) - q_xx/2`` and ``q_t = -p(p^2+q^2) + p_xx/2``."""
    _same_grid(p, q)
    P, Q = _Derivs(p), _Derivs(q)
    pv, qv = P(), Q()
    r2 = pv * pv + qv * qv
    mask = p.mask | q.mask
    rel_p, bad_p = _relative([P(0, 1), -qv * r2, Q(2) / 2], 2, mask)
    rel_q, bad_q = _relative([Q(0, 1), pv * r2, -P(2) / 2], 2, mask)
    return _result(p, rel_p, bad_p), _result(q, rel_q, bad_q)


def beta_t_identity_residual(beta: GridFunction, p: GridFunction, q: GridFunction, mean_offset: bool = False) -> GridFunction:
    """Residual of ``-beta_t = q p_x - p q_x``.

    With ``mean_offset`` the grid mean of the absolute residual ``beta_t + q
    p_x - p q_x`` is removed first, allowing for an integration constant.
    """
    _same_grid(beta, p, q)
    Bd, P, Q = _Derivs(beta), _Derivs(p), _Derivs(q)
    terms = [Bd(0, 1), Q() * P(1), -P() * Q(1)]
    mask = beta.mask | p.mask | q.mask
    if mean_offset:
        total = sum(terms)
        ok = ~mask & np.isfinite(total)
        if np.any(ok):
            terms.append(-np.mean(total[ok]) * np.ones_like(total))
    rel, bad = _relative(terms, 2, mask)
    return _result(beta, rel, bad)


def px2qx2_identity_residual(beta: GridFunction, p: GridFunction, q: GridFunction) -> GridFunction:
    """Residual of ``beta_t^2 + beta''^2/4 = -beta' (p_x^2 + q_x^2)``."""
    _same_grid(beta, p, q)
    Bd, P, Q = _Derivs(beta), _Derivs(p), _Derivs(q)
    terms = [Bd(0, 1) ** 2, Bd(2) ** 2 / 4, Bd(1) * (P(1) ** 2 + Q(1) ** 2)]
    rel, bad = _relative(terms, 2, beta.mask | p.mask | q.mask)
    return _result(beta, rel, bad)


def dbetapre_residual(beta: GridFunction, p: GridFunction, q: GridFunction) -> GridFunction:
    """Residual of ``beta_tt + beta' beta'' + beta''''/4 + d/dx[p_x^2 + q_x^2] = 0``."""
    _same_grid(beta, p, q)
    Bd, P, Q = _Derivs(beta), _Derivs(p), _Derivs(q)
    # d/dx (p_x^2 + q_x^2) = 2 (p_x p_xx + q_x q_xx)
    terms = [Bd(0, 2), Bd(1) * Bd(2), Bd(4) / 4, 2 * (P(1) * P(2) + Q(1) * Q(2))]
    rel, bad = _relative(terms, 2, beta.mask | p.mask | q.mask)
    return _result(beta, rel, bad)


def gamma_star_evolution_residual(family, xs, ts) -> GridFunction:
    """Residual of ``(gamma_*)_t = -i gamma_* H0_x s1 + i s1 H0_xx s1 + i s1 H0_x gamma_*``."""
    xs, ts = np.asarray(xs, dtype=float), np.asarray(ts, dtype=float)
    X, T = np.meshgrid(xs, ts, indexing="ij")
    dx, dt = _spacing(xs), _spacing(ts)
    s1 = family.params.sigma1
    H0 = family.H(0, X, T)
    gs = family.gamma_star(X, T)
    mask = ~np.isfinite(H0).reshape(X.shape + (-1,)).all(axis=-1)
    H0x = fd_derivative_array(H0, dx, 1, axis=0)
    H0xx = fd_derivative_array(H0, dx, 2, axis=0)
    gst = fd_derivative_array(gs, dt, 1, axis=1)
    terms = [gst, 1j * gs @ H0x @ s1, -1j * s1 @ H0xx @ s1, -1j * s1 @ H0x @ gs]
    rel, bad = _relative(terms, 2, mask)
    return _result(GridFunction(float(xs[0]), dx, np.zeros(X.shape), float(ts[0]), dt), rel, bad)


def beta_grid(family, xs, ts, mask_tau: bool = True) -> GridFunction:
    """``beta = tau_x/tau`` of a family sampled on an (x, t) grid, zero set of tau masked."""
    from .construction import singular_mask

    xs, ts = np.asarray(xs, dtype=float), np.asarray(ts, dtype=float)
    X, T = np.meshgrid(xs, ts, indexing="ij")
    b = family.beta(X, T)
    mask = singular_mask(family.tau(X, T), axis=0) if mask_tau else None
    return GridFunction(float(xs[0]), _spacing(xs), b, float(ts[0]), _spacing(ts), mask=mask)


def pq_grids(family, xs, ts):
    xs, ts = np.asarray(xs, dtype=float), np.asarray(ts, dtype=float)
    X, T = np.meshgrid(xs, ts, indexing="ij")
    p, q = family.pq(X, T)
    from .construction import singular_mask

    mask = singular_mask(family.tau(X, T), axis=0)
    mk = lambda v: GridFunction(float(xs[0]), _spacing(xs), v, float(ts[0]), _spacing(ts), mask=mask)  # noqa: E731
    return mk(p), mk(q)
