"""Standard construction of prevessels from diagonal spectral data.

For ``A = diag(lambdas)`` and ``A_zeta = diag(mus)`` the operators are

* ``row_i B(x,t) = B0_i sigma1 Phi^-1(lam_i, xi + i lam_i t) sigma1^-1``
* ``col_j C(x,t) = Phi(-mu_j, xi - i mu_j t) C0_j``
* ``X(x,t) = X0 + integral of dX`` along ``(x0,0) -> (x0,t) -> (x,t)``

with ``xi = x - x0``.  The pre-multiplication of ``B0`` by ``sigma1`` makes
``B(x0, 0) = B0``.  Each entry of ``B sigma2 C`` is a finite exponential sum,
so ``X`` is integrated exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .config import settings
from .errors import DomainError, MultiplicityError, ParameterError
from .matrix import ID2, det, max_abs, solve, solve_sylvester_diag
from .params import VesselParameters, preset_canonical
from .vessel import NodeState, VesselState, linkage_from_h0, pq_from_h0, transfer, transfer_inverse

COND_LIMIT = 1e8


def _enc_complex(z):
    z = complex(z)
    return [z.real, z.imag]


def _enc_matrix(m):
    return [[_enc_complex(z) for z in row] for row in np.asarray(m)]


def _dec_matrix(rows, shape):
    if len(rows) == 0:
        return np.zeros(shape, dtype=complex)
    arr = np.array(rows, dtype=float)
    return (arr[..., 0] + 1j * arr[..., 1]).reshape(shape)


@dataclass(frozen=True, eq=False)
class SpectralData:
    lambdas: np.ndarray
    mus: np.ndarray
    B0: np.ndarray
    C0: np.ndarray
    X0: np.ndarray
    x0: float = 0.0

    def __post_init__(self):
        lam = np.asarray(self.lambdas, dtype=complex).ravel()
        mu = np.asarray(self.mus, dtype=complex).ravel()
        n = lam.size
        if mu.size != n:
            raise ParameterError(f"{n} lambdas but {mu.size} mus")
        B0 = np.asarray(self.B0, dtype=complex).reshape(n, 2)
        C0 = np.asarray(self.C0, dtype=complex).reshape(2, n)
        X0 = np.asarray(self.X0, dtype=complex).reshape(n, n)
        for name, val in (("lambdas", lam), ("mus", mu), ("B0", B0), ("C0", C0), ("X0", X0)):
            object.__setattr__(self, name, val)
        object.__setattr__(self, "x0", float(self.x0))

    @property
    def dim(self) -> int:
        return self.lambdas.size

    @classmethod
    def empty(cls) -> "SpectralData":
        return cls(np.zeros(0), np.zeros(0), np.zeros((0, 2)), np.zeros((2, 0)), np.zeros((0, 0)))

    @classmethod
    def from_lyapunov(cls, lambdas, mus, B0, C0, params: VesselParameters, x0=0.0) -> "SpectralData":
        """Fill in ``X0`` by solving the anchor Lyapunov equation."""
        lam = np.asarray(lambdas, dtype=complex).ravel()
        mu = np.asarray(mus, dtype=complex).ravel()
        B0 = np.asarray(B0, dtype=complex).reshape(lam.size, 2)
        C0 = np.asarray(C0, dtype=complex).reshape(2, mu.size)
        X0 = solve_sylvester_diag(lam, mu, B0 @ params.sigma1 @ C0)
        return cls(lam, mu, B0, C0, X0, x0)

    @classmethod
    def symmetric(cls, lambdas, B0, params: VesselParameters, X0=None, x0=0.0) -> "SpectralData":
        """``mus = conj(lambdas)``, ``C0 = B0^*``; ``X0`` solved when omitted."""
        lam = np.asarray(lambdas, dtype=complex).ravel()
        B0 = np.asarray(B0, dtype=complex).reshape(lam.size, 2)
        if X0 is None:
            return cls.from_lyapunov(lam, lam.conj(), B0, B0.conj().T, params, x0)
        return cls(lam, lam.conj(), B0, B0.conj().T, X0, x0)

    def lyapunov_residual(self, params: VesselParameters) -> float:
        r = (
            self.lambdas[:, None] * self.X0
            + self.X0 * self.mus[None, :]
            + self.B0 @ params.sigma1 @ self.C0
        )
        return max_abs(r)

    def to_dict(self) -> dict:
        return {
            "lambdas": [_enc_complex(z) for z in self.lambdas],
            "mus": [_enc_complex(z) for z in self.mus],
            "B0": _enc_matrix(self.B0),
            "C0": _enc_matrix(self.C0),
            "X0": _enc_matrix(self.X0),
            "x0": self.x0,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SpectralData":
        try:
            lam = np.array([complex(*z) for z in d["lambdas"]], dtype=complex)
            mu = np.array([complex(*z) for z in d["mus"]], dtype=complex)
            n = lam.size
            return cls(
                lam,
                mu,
                _dec_matrix(d["B0"], (n, 2)),
                _dec_matrix(d["C0"], (2, n)),
                _dec_matrix(d["X0"], (n, n)),
                float(d.get("x0", 0.0)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ParameterError(f"malformed spectral data: {exc}") from exc

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "SpectralData":
        return cls.from_dict(json.loads(text))


def _eig2(m: np.ndarray):
    """Eigen-decomposition of a 2x2 generator; defective ones are rejected."""
    w, V = np.linalg.eig(m)
    if np.linalg.cond(V) > COND_LIMIT:
        raise MultiplicityError(f"generator {m.tolist()} is not diagonalizable")
    return w, V, np.linalg.inv(V)


def _phi(kappa, s):
    """``integral_0^s exp(kappa y) dy`` without cancellation for small ``kappa s``."""
    z = kappa * s
    small = np.abs(z) < 1e-8
    zz = np.where(small, 1.0, z)
    with np.errstate(all="ignore"):
        regular = s * np.expm1(zz) / zz
    return np.where(small, s * (1 + z / 2 + z * z / 6), regular)


@dataclass
class _Expansion:
    """Exponential-sum form of one row of B or one column of C."""

    rates: np.ndarray  # (2,)
    coeffs: np.ndarray  # (2, 2): coeffs[a] is the vector multiplying exp(rate_a * s)


class VesselFamily:
    """The prevessel generated by :class:`SpectralData`, evaluable on grids."""

    def __init__(self, spectral: SpectralData, params: VesselParameters | None = None, check: bool = True):
        self.spectral = spectral
        self.params = preset_canonical() if params is None else params
        if check and spectral.dim:
            res = spectral.lyapunov_residual(self.params)
            scale = max(1.0, max_abs(spectral.B0) * max_abs(spectral.C0))
            if res > settings.eps_lyap * scale:
                raise ParameterError(f"anchor data violate the Lyapunov equation (residual {res:.3e})")
        s1, s1i = self.params.sigma1, self.params.sigma1_inv
        self._rows = []
        for lam, b0 in zip(spectral.lambdas, spectral.B0):
            w, V, Vi = _eig2(self.params.generator(lam))
            left = b0 @ s1 @ V
            coeffs = np.array([left[a] * (Vi[a] @ s1i) for a in range(2)])
            self._rows.append(_Expansion(-w, coeffs))
        self._cols = []
        for mu, c0 in zip(spectral.mus, spectral.C0.T):
            w, V, Vi = _eig2(self.params.generator(-mu))
            right = Vi @ c0
            coeffs = np.array([V[:, b] * right[b] for b in range(2)])
            self._cols.append(_Expansion(w, coeffs))
        self.anchor_det = complex(det(spectral.X0))

    @property
    def dim(self) -> int:
        return self.spectral.dim

    @property
    def A(self) -> np.ndarray:
        return np.diag(self.spectral.lambdas)

    @property
    def A_zeta(self) -> np.ndarray:
        return np.diag(self.spectral.mus)

    def _grid(self, x, t):
        x = np.asarray(x, dtype=complex)
        t = np.zeros_like(x) if t is None else np.asarray(t, dtype=complex)
        x, t = np.broadcast_arrays(x, t)
        return x - self.spectral.x0, t

    def B(self, x, t=None) -> np.ndarray:
        xi, t = self._grid(x, t)
        out = np.zeros(xi.shape + (self.dim, 2), dtype=complex)
        for i, (lam, row) in enumerate(zip(self.spectral.lambdas, self._rows)):
            s = xi + 1j * lam * t
            for a in range(2):
                out[..., i, :] += np.exp(row.rates[a] * s)[..., None] * row.coeffs[a]
        return out

    def C(self, x, t=None) -> np.ndarray:
        xi, t = self._grid(x, t)
        out = np.zeros(xi.shape + (2, self.dim), dtype=complex)
        for j, (mu, col) in enumerate(zip(self.spectral.mus, self._cols)):
            s = xi - 1j * mu * t
            for b in range(2):
                out[..., :, j] += np.exp(col.rates[b] * s)[..., None] * col.coeffs[b]
        return out

    def X(self, x, t=None) -> np.ndarray:
        xi, t = self._grid(x, t)
        n = self.dim
        s2, g = self.params.sigma2, self.params.gamma
        out = np.broadcast_to(self.spectral.X0, xi.shape + (n, n)).copy()
        for i, (lam, row) in enumerate(zip(self.spectral.lambdas, self._rows)):
            for j, (mu, col) in enumerate(zip(self.spectral.mus, self._cols)):
                acc = np.zeros(xi.shape, dtype=complex)
                for a in range(2):
                    for b in range(2):
                        al, ka = -row.rates[a], col.rates[b]
                        r, c = row.coeffs[a], col.coeffs[b]
                        gx = r @ s2 @ c
                        gt = 1j * (lam - mu) * gx + 1j * (r @ g @ c)
                        ex = ka - al
                        et = -1j * (al * lam + ka * mu)
                        acc += gt * _phi(et, t) + gx * np.exp(et * t) * _phi(ex, xi)
                out[..., i, j] += acc
        return out

    def node(self, x, t=None) -> NodeState:
        return NodeState(
            self.A, self.A_zeta, self.X(x, t), self.B(x, t), self.C(x, t), self.params,
            lambdas=self.spectral.lambdas, mus=self.spectral.mus,
        )

    def state(self, x, t=None) -> VesselState:
        """Vessel state at a single point; raises if ``X`` is singular there."""
        return VesselState(self.node(x, t), x, t, self.anchor_det)

    def tau(self, x, t=None) -> np.ndarray:
        return det(self.X(x, t)) / self.anchor_det

    def H(self, n: int, x, t=None) -> np.ndarray:
        """Moment ``H_n`` on a grid; singular points come out as nan/inf."""
        nd = self.node(x, t)
        An = np.linalg.matrix_power(self.A, n) if self.dim else self.A
        return nd.C @ solve(nd.X, An @ nd.B, check=False)

    def beta(self, x, t=None) -> np.ndarray:
        """``tau_x / tau = tr(H0 sigma2)``."""
        return np.trace(self.H(0, x, t) @ self.params.sigma2, axis1=-2, axis2=-1)

    def gamma_star(self, x, t=None) -> np.ndarray:
        return linkage_from_h0(self.params, self.H(0, x, t))

    def pq(self, x, t=None):
        if not self.params.is_canonical:
            raise ParameterError("p, q are defined only for the canonical parameters")
        return pq_from_h0(self.H(0, x, t))

    def transfer(self, lam, x, t=None) -> np.ndarray:
        return transfer(self.node(x, t), lam, check=False)

    def transfer_inverse(self, lam, x, t=None) -> np.ndarray:
        return transfer_inverse(self.node(x, t), lam, check=False)

    def spectral_radius(self) -> float:
        eigs = np.concatenate([self.spectral.lambdas, -self.spectral.mus])
        return float(np.max(np.abs(eigs))) if eigs.size else 0.0


def evolve_t(family: VesselFamily, x, t):
    """``(B, C, X)`` of the KdV-evolved prevessel at ``(x, t)``."""
    return family.B(x, t), family.C(x, t), family.X(x, t)


def standard_B(spec: SpectralData, params: VesselParameters, x) -> np.ndarray:
    return VesselFamily(spec, params).B(x)


def standard_C(spec: SpectralData, params: VesselParameters, x) -> np.ndarray:
    return VesselFamily(spec, params).C(x)


def standard_X(spec: SpectralData, params: VesselParameters, x) -> np.ndarray:
    return VesselFamily(spec, params).X(x)


class NumericalFamily:
    """The same prevessel obtained by RK4 integration of the x-translation ODEs.

    Only ``t = 0`` is supported; used as an independent path for consistency
    checks against the closed-form :class:`VesselFamily`.
    """

    def __init__(self, spectral: SpectralData, params: VesselParameters | None = None, step: float = 1e-3):
        self.spectral = spectral
        self.params = preset_canonical() if params is None else params
        self.step = step
        self.A, self.A_zeta = np.diag(spectral.lambdas), np.diag(spectral.mus)

    def _rhs(self, B, C):
        p = self.params
        dB = -(self.A @ B @ p.sigma2 + B @ p.gamma) @ p.sigma1_inv
        dC = p.sigma1_inv @ (-p.sigma2 @ C @ self.A_zeta + p.gamma @ C)
        dX = B @ p.sigma2 @ C
        return dB, dC, dX

    def node(self, x) -> NodeState:
        sp = self.spectral
        span = float(x) - sp.x0
        nsteps = max(1, int(math.ceil(abs(span) / self.step)))
        h = span / nsteps
        B, C, X = sp.B0.copy(), sp.C0.copy(), sp.X0.copy()
        for _ in range(nsteps if span else 0):
            k1 = self._rhs(B, C)
            k2 = self._rhs(B + h / 2 * k1[0], C + h / 2 * k1[1])
            k3 = self._rhs(B + h / 2 * k2[0], C + h / 2 * k2[1])
            k4 = self._rhs(B + h * k3[0], C + h * k3[1])
            B = B + h / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
            C = C + h / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
            X = X + h / 6 * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])
        return NodeState(self.A, self.A_zeta, X, B, C, self.params, lambdas=sp.lambdas, mus=sp.mus)

    def state(self, x, t=None) -> VesselState:
        if t not in (None, 0, 0.0):
            raise DomainError("NumericalFamily integrates in x only")
        return VesselState(self.node(x), x, None, complex(det(self.spectral.X0)))

    def transfer(self, lam, x, t=None) -> np.ndarray:
        xs = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.array([transfer(self.node(xx), lam) for xx in xs.ravel()])
        return out.reshape(np.shape(x) + (2, 2))

    def spectral_radius(self) -> float:
        eigs = np.concatenate([self.spectral.lambdas, -self.spectral.mus])
        return float(np.max(np.abs(eigs))) if eigs.size else 0.0

    def gamma_star(self, x, t=None) -> np.ndarray:
        xs = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.array([self.state(xx).gamma_star for xx in xs.ravel()])
        return out.reshape(np.shape(x) + (2, 2))


def singular_mask(tau_values, axis: int = 0, eps: float | None = None) -> np.ndarray:
    """Flag grid points on or next to the zero set of ``tau``.

    A point is flagged when ``|tau| < eps`` or when ``Re tau`` changes sign
    between it and its neighbour along ``axis`` and it has the smaller ``|tau|``
    of the pair.
    """
    eps = settings.eps_sing if eps is None else eps
    tv = np.moveaxis(np.asarray(tau_values, dtype=complex), axis, 0)
    mask = np.abs(tv) < eps
    re = tv.real
    flip = np.sign(re[1:]) * np.sign(re[:-1]) < 0
    left_smaller = np.abs(tv[:-1]) <= np.abs(tv[1:])
    mask[:-1] |= flip & left_smaller
    mask[1:] |= flip & ~left_smaller
    return np.moveaxis(mask, 0, axis)


# ---------------------------------------------------------------------------
# built-in solitons


@dataclass(frozen=True)
class SolitonSpec:
    variant: str
    k: float = 1.0
    m: float = 0.0
    b: complex = 1.0
    k1: float = 1.0
    k2: float = 2.0
    b1: complex = 1.0
    b2: complex = 0.5

    def __post_init__(self):
        if self.variant not in ("exponential", "rational", "two_dim"):
            raise ParameterError(f"unknown soliton variant {self.variant!r}")
        if self.variant == "exponential" and self.k == 0:
            raise ParameterError("exponential soliton needs k != 0")


@dataclass
class Soliton:
    spec: SolitonSpec
    family: VesselFamily
    beta_ref: object
    tau_ref: object
    singular_line: object = field(default=None)  # t -> x, when the zero set is a line


def _exp_soliton(s: SolitonSpec, params):
    k, m = float(s.k), float(s.m)
    lam = k * k + 1j * m
    b1, b2 = math.sqrt(2) * k, k
    B0 = np.array([[b1 + b2, -1j * b1 + 1j * b2]])
    spec = SpectralData([lam], [np.conj(lam)], B0, B0.conj().T, [[1.0]])
    k2 = k * k

    def tau_ref(x, t):
        xi = np.asarray(x) - 2 * m * np.asarray(t)
        return 2 * np.exp(2 * k2 * xi) - np.exp(-2 * k2 * xi)

    def beta_ref(x, t):
        e1 = np.exp(8 * k2 * m * np.asarray(t))
        e2 = 2 * np.exp(4 * k2 * np.asarray(x))
        return -2 * k2 * (e1 + e2) / (e1 - e2)

    return spec, beta_ref, tau_ref, (lambda t: 2 * m * np.asarray(t) - math.log(2) / (4 * k2))


def _rational_soliton(s: SolitonSpec, params):
    k, b = float(s.k), complex(s.b)
    B0 = np.array([[b, 0]])
    spec = SpectralData([1j * k], [-1j * k], B0, B0.conj().T, [[1.0]])
    bb = abs(b) ** 2

    def tau_ref(x, t):
        return 1 + bb * (np.asarray(x) - 2 * k * np.asarray(t))

    def beta_ref(x, t):
        return bb / (1 + bb * (np.asarray(x) - 2 * k * np.asarray(t)))

    line = None if bb == 0 else (lambda t: 2 * k * np.asarray(t) - 1 / bb)
    return spec, beta_ref, tau_ref, line


def _sinc_ratio(d, z):
    """``sin(d z) / d`` with the ``d -> 0`` limit ``z``."""
    return z if d == 0 else np.sin(d * z) / d


def _two_dim_soliton(s: SolitonSpec, params):
    k1, k2 = float(s.k1), float(s.k2)
    b1, b2 = complex(s.b1), complex(s.b2)
    B0 = np.array([[b1, 0], [b2, 0]])
    lam = np.array([1j * k1, 1j * k2])
    spec = SpectralData(lam, lam.conj(), B0, B0.conj().T, np.eye(2))
    B1, B2 = abs(b1) ** 2, abs(b2) ** 2
    d = k1 - k2

    def tau_ref(x, t):
        x, t = np.asarray(x), np.asarray(t)
        z = (k1 + k2) * t - x
        return (1 - B1 * (2 * k1 * t - x)) * (1 - B2 * (2 * k2 * t - x)) - B1 * B2 * _sinc_ratio(d, z) ** 2

    def beta_ref(x, t):
        # closed form; the degenerate limit uses tau_x / tau directly
        x, t = np.asarray(x), np.asarray(t)
        z = (k1 + k2) * t - x
        if d == 0:
            taux = B1 * (1 - B2 * (2 * k2 * t - x)) + B2 * (1 - B1 * (2 * k1 * t - x)) + 2 * B1 * B2 * z
            return taux / tau_ref(x, t)
        num = d * (d * (-B2 + B1 * (-1 + 2 * B2 * z)) - B1 * B2 * np.sin(2 * d * z))
        den = d**2 * (-1 + B1 * (2 * k1 * t - x)) * (-1 + B2 * (2 * k2 * t - x)) - B1 * B2 * np.sin(d * z) ** 2
        return -num / den

    return spec, beta_ref, tau_ref, None


_BUILDERS = {"exponential": _exp_soliton, "rational": _rational_soliton, "two_dim": _two_dim_soliton}


def build_soliton(spec: SolitonSpec, params: VesselParameters | None = None) -> Soliton:
    """Vessel family of a built-in soliton plus its reference closed forms."""
    params = preset_canonical() if params is None else params
    if not params.is_canonical:
        raise ParameterError("built-in solitons use the canonical parameters")
    data, beta_ref, tau_ref, line = _BUILDERS[spec.variant](spec, params)
    return Soliton(spec, VesselFamily(data, params), beta_ref, tau_ref, line)


def trivial_family(params: VesselParameters | None = None) -> VesselFamily:
    return VesselFamily(SpectralData.empty(), params)


def tau_log_derivative_identity(family: VesselFamily, xs, t: float = 0.0):
    """Residuals of the two expressions for ``tau'/tau`` on an x-grid.

    Returns ``(r_fd, r_int)``: the sup difference between ``tr(sigma2 H0)`` and
    the Richardson-extrapolated finite-difference ``tau'/tau``, and the sup
    difference between ``tr(sigma2 H0)`` and
    ``beta(x_a) - integral_{x_a}^x (p^2 + q^2)`` with ``x_a = xs[0]``.
    """
    from scipy.integrate import cumulative_simpson

    from .pde import fd_derivative_array

    xs = np.asarray(xs, dtype=float)
    if xs.size < 9:
        raise DomainError("need at least 9 grid points")
    dx = xs[1] - xs[0]
    tr = family.beta(xs, t)
    tv = family.tau(xs, t)
    dtau = fd_derivative_array(tv, dx, 1, axis=0)
    ok = np.isfinite(dtau)
    r_fd = float(np.max(np.abs(tr[ok] - dtau[ok] / tv[ok]), initial=0.0))
    p, q = family.pq(xs, t)
    f = p * p + q * q
    # scipy's Simpson rule is real-only
    integral = cumulative_simpson(f.real, x=xs, initial=0) + 1j * cumulative_simpson(f.imag, x=xs, initial=0)
    r_int = float(np.max(np.abs(tr - (tr[0] - integral))))
    return r_fd, r_int
