"""Moments ``H_n`` of a canonical-system potential, forward and backward.

Forward: given ``p, q`` the moments follow from the two algebraic and two
differential relations between ``H_n`` and ``H_{n+1}``.  They are carried out
exactly on truncated Taylor series, so "integration" is series integration;
the series are continued from center to center to cover a grid.

Backward: the Taylor coefficients of ``H0`` at 0 are obtained from
``H_0(0), ..., H_M(0)`` by differentiating the moment recursion with Leibniz'
rule, and a finite node realizing given moments is produced by a
block-Hankel (Ho-Kalman) factorization.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from math import comb

import numpy as np
from numpy.polynomial import Polynomial

from .errors import ConditioningError, ConsistencyError, DomainError, OrderCapError
from .matrix import max_abs
from .params import VesselParameters, preset_canonical
from .pde import GridFunction, _spacing, fd_derivative_array
from .vessel import MAX_MOMENT_ORDER, linkage_from_h0

CAUCHY_RADIUS = 0.5
CAUCHY_POINTS = 128
CONTINUATION_STEP = 0.1


@dataclass(frozen=True)
class MomentPolicy:
    """Integration constants of the forward recursion.

    ``beta0 = tau'/tau`` at 0 and ``delta0 = b0(0) - c0(0)`` fix ``H0``;
    ``w0[n]`` and ``v0[n]`` are ``a_n(0) + d_n(0)`` and ``b_n(0) - c_n(0)`` for
    ``n >= 1`` (missing entries are 0).
    """

    beta0: complex = 0.0
    delta0: complex = 0.0
    w0: tuple = ()
    v0: tuple = ()

    def w(self, n: int) -> complex:
        return self.w0[n - 1] if n - 1 < len(self.w0) else 0.0

    def v(self, n: int) -> complex:
        return self.v0[n - 1] if n - 1 < len(self.v0) else 0.0

    @classmethod
    def from_moments(cls, H_at_zero) -> "MomentPolicy":
        """Constants that reproduce given ``H_n(0)`` (e.g. harvested from a vessel)."""
        H = [np.asarray(h, dtype=complex) for h in H_at_zero]
        h0 = H[0]
        return cls(
            beta0=complex(h0[0, 0] + h0[1, 1]),
            delta0=complex(h0[0, 1] - h0[1, 0]),
            w0=tuple(complex(h[0, 0] + h[1, 1]) for h in H[1:]),
            v0=tuple(complex(h[0, 1] - h[1, 0]) for h in H[1:]),
        )

    def to_dict(self) -> dict:
        d = asdict(self)
        return {k: _enc(v) for k, v in d.items()}


def _enc(v):
    if isinstance(v, (tuple, list)):
        return [_enc(z) for z in v]
    z = complex(v)
    return [z.real, z.imag]


# ---------------------------------------------------------------------------
# series helpers


def taylor_coefficients(f, degree: int, radius: float = CAUCHY_RADIUS, points: int = CAUCHY_POINTS) -> np.ndarray:
    """Taylor coefficients at 0 of an analytic ``f`` by the trapezoid rule on a circle."""
    points = max(points, 2 * degree + 2)
    z = radius * np.exp(2j * np.pi * np.arange(points) / points)
    c = np.fft.fft(np.asarray(f(z), dtype=complex) * np.ones(points)) / points
    return c[: degree + 1] / radius ** np.arange(degree + 1)


def _local_series(f, center: float, degree: int, radius: float) -> Polynomial:
    """Monomial series of ``f`` in ``z = x - center``."""
    if not callable(f) or isinstance(f, Polynomial):
        base = f if isinstance(f, Polynomial) else Polynomial(np.atleast_1d(np.asarray(f, dtype=complex)))
        shifted = base(Polynomial([center, 1.0])) if center else base
        return _trunc(Polynomial(np.asarray(shifted.coef, dtype=complex)), degree)
    return Polynomial(taylor_coefficients(lambda z: f(center + z), degree, radius))


def _trunc(s, degree):
    return s.cutdeg(degree) if s.degree() > degree else s


class _Ops:
    """Truncated arithmetic on monomial series in the local variable."""

    def __init__(self, degree):
        self.degree = degree

    def mul(self, a, b):
        return _trunc(a * b, self.degree)

    def deriv(self, a):
        return a.deriv()

    def integ(self, a, c0=0.0):
        # integral from the local center, plus the value there
        return _trunc(a.integ(lbnd=0) + c0, self.degree)


@dataclass
class MomentSequence:
    """``H_0, ..., H_N`` sampled on a grid, optionally with their local series.

    ``series[k][n]`` is a 2x2 nested list of series of ``H_n`` in
    ``x - centers[k]``.
    """

    N: int
    grid: np.ndarray
    H: np.ndarray  # (N+1, nx, 2, 2)
    policy: MomentPolicy = field(default_factory=MomentPolicy)
    series: list | None = None
    centers: np.ndarray | None = None

    def at_zero(self, count: int | None = None) -> list:
        """``H_n(0)`` from the series centered at the origin."""
        if self.series is None:
            raise DomainError("sequence carries no series; cannot evaluate at 0")
        centers = np.zeros(1) if self.centers is None else np.asarray(self.centers)
        k = int(np.argmin(np.abs(centers)))
        if centers[k] != 0.0:
            raise DomainError("no series is centered at the origin")
        count = self.N + 1 if count is None else count
        return [np.array([[complex(s(0.0)) for s in row] for row in entry]) for entry in self.series[k][:count]]

    def to_dict(self) -> dict:
        H = np.asarray(self.H, dtype=complex)
        return {
            "N": int(self.N),
            "grid": [float(x) for x in self.grid],
            "H": np.stack([H.real, H.imag], axis=-1).tolist(),
            "policy": self.policy.to_dict(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_family(cls, family, N: int, xs, t: float = 0.0, max_order: int = MAX_MOMENT_ORDER) -> "MomentSequence":
        """Moments ``C X^-1 A^n B`` of a vessel family along the grid."""
        if N > max_order:
            raise OrderCapError(f"order {N} exceeds cap {max_order}")
        xs = np.asarray(xs, dtype=float)
        H = np.array([family.H(n, xs, t) for n in range(N + 1)])
        return cls(N, xs, H)


def moments_from_potential(
    p,
    q,
    N: int,
    grid,
    policy: MomentPolicy | None = None,
    route: str = "auto",
    degree: int | None = None,
    max_order: int = MAX_MOMENT_ORDER,
    require_origin: bool = False,
    step: float = CONTINUATION_STEP,
    radius: float | None = None,
) -> MomentSequence:
    """Forward moment generation from ``p`` and ``q``.

    The recursion is run on truncated Taylor series.  The ``taylor`` route uses
    one expansion at 0.  The ``continuation`` route (``auto``) chains
    expansions at the centers ``0, +-step, +-2 step, ...`` covering the grid:
    the integration constants at each new center are the values of the
    previous center's series, so accuracy does not degrade with distance
    from 0 the way repeated differentiation of an interval interpolant does.

    Parameters
    ----------
    p, q : callable, coefficient array, or ``numpy.polynomial.Polynomial``
        Callables must be analytic and accept complex arguments; they are
        sampled on circles of ``radius`` around each center.  Coefficient
        arrays are monomial coefficients at 0.
    N : int
        Highest moment order; capped at ``max_order``.
    grid : array_like
        Sample points.
    route : {"auto", "continuation", "taylor"}
    require_origin : bool
        If set, a grid whose range does not contain 0 is rejected.
    step, radius : float
        Center spacing and Cauchy radius.  ``radius`` must stay below the
        distance from the grid to the nearest singularity of ``p``, ``q``.
    """
    if N > max_order:
        raise OrderCapError(f"order {N} exceeds cap {max_order}")
    if N < 0:
        raise ValueError("N must be nonnegative")
    policy = MomentPolicy() if policy is None else policy
    xs = np.asarray(grid, dtype=float).ravel()
    if require_origin and not (xs.min() <= 0.0 <= xs.max()):
        raise DomainError("grid does not contain the origin")
    if route == "auto":
        route = "continuation"
    if route not in ("taylor", "continuation"):
        raise ValueError(f"unknown route {route!r}")
    if not step > 0:
        raise ValueError("step must be positive")
    degree = 30 + 2 * N if degree is None else degree
    if radius is None:
        radius = CAUCHY_RADIUS if route == "taylor" else 2.5 * step
    ops = _Ops(degree)

    def local(center, consts):
        ps = _local_series(p, center, degree, radius)
        qs = _local_series(q, center, degree, radius)
        return _recursion(ps, qs, N, consts, ops)

    origin = (complex(policy.beta0), complex(policy.delta0),
              [complex(policy.w(n)) for n in range(1, N + 1)], [complex(policy.v(n)) for n in range(1, N + 1)])
    if route == "taylor":
        centers = np.zeros(1)
        series = [local(0.0, origin)]
        index = np.zeros(xs.size, dtype=int)
    else:
        k_lo = int(np.floor(min(xs.min(), 0.0) / step + 0.5))
        k_hi = int(np.ceil(max(xs.max(), 0.0) / step - 0.5))
        by_k = {0: local(0.0, origin)}
        for direction, last in ((1, k_hi), (-1, k_lo)):
            for k in range(direction, last + direction, direction):
                prev = by_k[k - direction]
                by_k[k] = local(k * step, _constants_at(prev, direction * step))
        ks = sorted(by_k)
        centers = np.array([k * step for k in ks])
        series = [by_k[k] for k in ks]
        index = np.rint(xs / step).astype(int) - ks[0]
    H = np.empty((N + 1, xs.size, 2, 2), dtype=complex)
    for j, entries in enumerate(series):
        sel = index == j
        if not np.any(sel):
            continue
        z = xs[sel] - centers[j]
        for n, e in enumerate(entries):
            for r in range(2):
                for c in range(2):
                    H[n, sel, r, c] = e[r][c](z)
    return MomentSequence(N, xs, H, policy, series, centers)


def _constants_at(entries, z):
    """Integration constants ``(beta, delta0, w_n, v_n)`` read off local series at ``z``."""
    val = [[[complex(s(z)) for s in row] for row in e] for e in entries]
    h0 = val[0]
    return (
        h0[0][0] + h0[1][1],
        h0[0][1] - h0[1][0],
        [h[0][0] + h[1][1] for h in val[1:]],
        [h[0][1] - h[1][0] for h in val[1:]],
    )


def _recursion(p, q, N, consts, ops):
    beta0, delta0, w0, v0 = consts
    one = p * 0 + 1
    beta = one * beta0 - ops.integ(ops.mul(p, p) + ops.mul(q, q))
    a = (beta + q) / 2
    d = (beta - q) / 2
    b = (-p + one * delta0) / 2
    c = (-p - one * delta0) / 2
    out = [[[a, b], [c, d]]]
    for n in range(1, N + 1):
        s = 1j * (-ops.mul(d, p) + ops.mul(b, q) + ops.deriv(b))
        u = -1j * (-ops.mul(c, p) + ops.mul(a, q) + ops.deriv(a))
        w = ops.integ(ops.mul(p, u) - ops.mul(q, s), w0[n - 1])
        v = ops.integ(-ops.mul(p, s) - ops.mul(q, u), v0[n - 1])
        a, d = (w + s) / 2, (w - s) / 2
        b, c = (u + v) / 2, (u - v) / 2
        out.append([[a, b], [c, d]])
    return out


def recursion_residual(seq: MomentSequence, n: int, gamma_star=None, params: VesselParameters | None = None) -> float:
    """``sup ||[s1^-1 s2, H_{n+1} s1] - H_n' s1 + s1^-1 gamma_* H_n s1 - H_n gamma||``.

    ``H_n'`` by Richardson central differences on the (uniform) grid; the two
    boundary layers are excluded.  ``gamma_star`` defaults to the linkage of
    the sequence's own ``H_0``.
    """
    if n + 1 > seq.N:
        raise OrderCapError(f"need H_{n + 1} but the sequence stops at N={seq.N}")
    params = preset_canonical() if params is None else params
    s1, s1i, s2, g = params.sigma1, params.sigma1_inv, params.sigma2, params.gamma
    H0, Hn, Hn1 = seq.H[0], seq.H[n], seq.H[n + 1]
    G = linkage_from_h0(params, H0) if gamma_star is None else np.asarray(gamma_star)
    dx = _spacing(seq.grid)
    dHn = fd_derivative_array(Hn, dx, 1, axis=0)
    L = s1i @ s2
    r = L @ Hn1 @ s1 - Hn1 @ s1 @ L - dHn @ s1 + s1i @ G @ Hn @ s1 - Hn @ g
    ok = np.isfinite(r).all(axis=(-2, -1))
    return float(np.max(np.abs(r[ok]))) if np.any(ok) else 0.0


# ---------------------------------------------------------------------------
# Taylor reconstruction


@dataclass
class TaylorReconstruction:
    order: int
    H0: list  # Taylor coefficients (2x2) of H0 at 0
    p: np.ndarray
    q: np.ndarray

    def p_at(self, x):
        return np.polynomial.polynomial.polyval(np.asarray(x), self.p)

    def q_at(self, x):
        return np.polynomial.polynomial.polyval(np.asarray(x), self.q)


def reconstruct_potential_taylor(
    H_at_zero, M: int, params: VesselParameters | None = None, max_order: int = MAX_MOMENT_ORDER, tol: float = 1e-10
) -> TaylorReconstruction:
    """Taylor polynomial of ``H0`` (and ``p``, ``q``) at 0 from ``H_0(0), ..., H_M(0)``.

    ``D_j[n]`` denotes the j-th derivative of ``H_n`` at 0.  Differentiating
    ``H_n' = L(H_{n+1}) + s1^-1 gamma_* H_n - H_n gamma s1^-1`` with
    Leibniz' rule, and ``gamma_*`` through the linkage, gives
    ``D_{j+1}[n]`` in terms of ``D_{j}[n+1]`` and lower derivatives.
    """
    if M > max_order:
        raise OrderCapError(f"order {M} exceeds cap {max_order}")
    params = preset_canonical() if params is None else params
    H = [np.asarray(h, dtype=complex).reshape(2, 2) for h in H_at_zero]
    if len(H) < M + 1:
        raise DomainError(f"order {M} needs H_0..H_{M}, got {len(H)} moments")
    scale = max(1.0, max_abs(H[0]))
    if abs(H[0][0, 1] - H[0][1, 0]) > tol * scale:
        raise ConsistencyError(
            f"b0(0) = {H[0][0, 1]} differs from c0(0) = {H[0][1, 0]}", relation="b0(0) = c0(0)"
        )
    s1, s1i, s2, g = params.sigma1, params.sigma1_inv, params.sigma2, params.gamma
    L = lambda m: s1i @ s2 @ m - m @ s2 @ s1i  # noqa: E731
    D = [H[: M + 1]]  # D[j][n]
    Gam = []

    def gamma_derivative(i):
        base = g if i == 0 else 0 * g
        return base + s2 @ D[i][0] @ s1 - s1 @ D[i][0] @ s2

    for j in range(M):
        Gam.append(gamma_derivative(j))
        nxt = []
        for n in range(M - j):
            acc = L(D[j][n + 1]) - D[j][n] @ g @ s1i
            for i in range(j + 1):
                acc = acc + comb(j, i) * s1i @ Gam[i] @ D[j - i][n]
            nxt.append(acc)
        D.append(nxt)
    fact = np.cumprod([1.0] + list(range(1, M + 1)))
    coeffs = [D[j][0] / fact[j] for j in range(M + 1)]
    C = np.array(coeffs)
    p = -(C[:, 0, 1] + C[:, 1, 0])
    q = C[:, 0, 0] - C[:, 1, 1]
    return TaylorReconstruction(M, coeffs, p, q)


# ---------------------------------------------------------------------------
# KdV time evolution of the moments


def kdv_moment_evolution_residual(family, n: int, xs, ts) -> GridFunction:
    """Relative residual of ``(H_n)_t = i (H_{n+1})_x + i (H0)_x s1 H_n`` on an (x, t) grid."""
    xs, ts = np.asarray(xs, dtype=float), np.asarray(ts, dtype=float)
    X, T = np.meshgrid(xs, ts, indexing="ij")
    dx, dt = _spacing(xs), _spacing(ts)
    s1 = family.params.sigma1
    Hn, Hn1, H0 = family.H(n, X, T), family.H(n + 1, X, T), family.H(0, X, T)
    terms = [
        fd_derivative_array(Hn, dt, 1, axis=1),
        -1j * fd_derivative_array(Hn1, dx, 1, axis=0),
        -1j * fd_derivative_array(H0, dx, 1, axis=0) @ s1 @ Hn,
    ]
    from .pde import _relative, _result

    mask = ~np.isfinite(H0).all(axis=(-2, -1))
    rel, bad = _relative(terms, 2, mask)
    return _result(GridFunction(float(xs[0]), dx, np.zeros(X.shape), float(ts[0]), dt), rel, bad)


# ---------------------------------------------------------------------------
# finite node realizing given moments


@dataclass
class QuadratureNode:
    spectral: object  # SpectralData
    rank: int
    residual: float
    singular_values: np.ndarray


def moment_match_residual(spectral, moments, params: VesselParameters | None = None) -> float:
    """``max_n ||C0 X0^-1 A^n B0 - H_n||`` over the supplied moments."""
    lam, B0, C0, X0 = spectral.lambdas, spectral.B0, spectral.C0, spectral.X0
    if lam.size == 0:
        return max((max_abs(h) for h in moments), default=0.0)
    Xi_B = np.linalg.solve(X0, B0)
    worst = 0.0
    for n, h in enumerate(moments):
        Hn = C0 @ np.linalg.solve(X0, (lam**n)[:, None] * B0) if n else C0 @ Xi_B
        worst = max(worst, max_abs(Hn - np.asarray(h)))
    return worst


def quadrature_node_from_moments(
    H_at_zero, n_q: int, params: VesselParameters | None = None, rtol: float = 1e-7, cond_limit: float = 1e10
) -> QuadratureNode:
    """Finite node whose moments at 0 reproduce ``H_0, ..., H_{2 n_q - 1}``.

    The block Hankel matrix ``[H_{i+j}]`` (``n_q x n_q`` blocks) is factored by a
    rank-revealing SVD into observability and controllability factors,
    giving ``A``, ``B0``, ``C0`` with ``X0 = I``; ``A_zeta = -A - B0 s1 C0``
    then makes the anchor a node.  Both generators are diagonalized to
    produce :class:`SpectralData`.
    """
    from .construction import SpectralData

    params = preset_canonical() if params is None else params
    if n_q < 1:
        raise ValueError("n_q must be at least 1")
    H = [np.asarray(h, dtype=complex).reshape(2, 2) for h in H_at_zero]
    if len(H) < 2 * n_q:
        raise DomainError(f"n_q={n_q} needs {2 * n_q} moments, got {len(H)}")
    Hk = np.block([[H[i + j] for j in range(n_q)] for i in range(n_q)])
    Hs = np.block([[H[i + j + 1] for j in range(n_q)] for i in range(n_q)])
    U, s, Vh = np.linalg.svd(Hk)
    if s.size == 0 or s[0] == 0:
        return QuadratureNode(SpectralData.empty(), 0, moment_match_residual(SpectralData.empty(), H), s)
    # Truncations with tiny singular values produce spurious large poles whose
    # powers wreck the higher moments, so every rank up to the rtol cut is
    # tried and the one matching the moments best is kept.
    k_max = int(np.sum(s > rtol * s[0]))
    best, failure = None, None
    for k in range(1, k_max + 1):
        try:
            spectral = _ho_kalman(U[:, :k], s[:k], Vh[:k], Hs, params, cond_limit)
        except ConditioningError as exc:
            failure = exc
            continue
        res = moment_match_residual(spectral, H[: 2 * n_q])
        if np.isfinite(res) and (best is None or res < best[2]):
            best = (spectral, k, res)
    if best is None:
        raise failure or ConditioningError("moment system is ill-conditioned")
    spectral, k, res = best
    return QuadratureNode(spectral, k, res, s)


def _ho_kalman(U, sk, Vh, Hs, params, cond_limit):
    from .construction import SpectralData

    root = np.sqrt(sk)
    A = (U.conj().T @ Hs @ Vh.conj().T) / np.outer(root, root)
    B0 = root[:, None] * Vh[:, :2]
    C0 = U[:2, :] * root
    Az = -A - B0 @ params.sigma1 @ C0
    lam, V = np.linalg.eig(A)
    mu, W = np.linalg.eig(Az)
    cond = max(np.linalg.cond(V), np.linalg.cond(W))
    if not cond <= cond_limit:
        raise ConditioningError("realized generators are too close to defective", residual=float(cond))
    Vi = np.linalg.inv(V)
    return SpectralData(lam, mu, Vi @ B0, C0 @ W, Vi @ W)
