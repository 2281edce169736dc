"""Bäcklund transformation, transfer-function factorization and gauge freedom.

Anything with ``params``, ``transfer(lam, x, t)`` and ``gamma_star(x, t)``
(a :class:`~canvessel.construction.VesselFamily`, a
:class:`~canvessel.construction.NumericalFamily` or a :class:`GaugedTransfer`)
can be fed to the checks below.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .config import settings
from .errors import SingularityError, SpectrumError
from .matrix import ID2, SIGMA_CANONICAL, inf_norm, inverse
from .params import SampledPotential, VesselParameters, fundamental_input, fundamental_output

DEFAULT_H = 5e-3


def d_dx(f, x, h: float = DEFAULT_H):
    """Richardson-extrapolated central difference ``(4 D_h - D_2h) / 3`` of ``f`` at ``x``."""
    x = np.asarray(x, dtype=float)
    d1 = (f(x + h) - f(x - h)) / (2 * h)
    d2 = (f(x + 2 * h) - f(x - 2 * h)) / (4 * h)
    return (4 * d1 - d2) / 3


def _norm(m) -> np.ndarray:
    """Entrywise max-abs over the two trailing (matrix or column) axes."""
    return np.abs(np.asarray(m)).max(axis=(-2, -1))


def _relative(terms, reduce=np.max, floor=None) -> float:
    """``sup |sum terms| / max |term|`` taken pointwise over a grid.

    ``floor`` (same trailing shape as a term) joins the scale without entering
    the sum, for equations whose terms may all vanish together.
    """
    total = _norm(sum(terms))
    scale = np.max(np.stack([_norm(t) for t in terms] + ([] if floor is None else [_norm(floor)])), axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        rel = np.where(scale > 0, total / np.where(scale > 0, scale, 1.0), 0.0)
    return float(reduce(rel))


def input_solution(params: VesselParameters, lam, x, u0) -> np.ndarray:
    """``u(lam, x) = Phi(lam, x) u0``."""
    return fundamental_input(params, lam, x) @ np.asarray(u0, dtype=complex)


def input_residual(params: VesselParameters, lam, x, u0, h: float = 1e-3) -> float:
    """Relative finite-difference residual of ``lam s2 u - s1 u' + gamma u = 0``."""
    f = lambda y: input_solution(params, lam, y, u0)[..., None]  # noqa: E731
    u = f(x)
    du = d_dx(f, x, h)
    # near lam = 0 every term is tiny; measure against |u| as well
    return _relative([lam * params.sigma2 @ u, -params.sigma1 @ du, params.gamma @ u], floor=u)


def backlund_map(vessel, lam, x, u0, t=None) -> np.ndarray:
    """``y(lam, x) = S(lam, x) Phi(lam, x) u0``, shape ``x.shape + (2,)``."""
    u = input_solution(vessel.params, lam, x, u0)
    S = vessel.transfer(lam, x, t)
    return (S @ u[..., None])[..., 0]


def backlund_residual(vessel, lam, xs, u0, h: float = DEFAULT_H, t=None) -> float:
    """Relative residual of the output LDE for ``y = S u`` on the points ``xs``.

    ``y' = S' u + S u'`` with ``S'`` by Richardson differences of step ``h`` and
    ``u' = s1^-1 (lam s2 + gamma) u`` exactly; for the trivial vessel ``S = I``
    and the residual vanishes identically.
    """
    p = vessel.params
    xs = np.asarray(xs, dtype=float)
    u = input_solution(p, lam, xs, u0)[..., None]
    S = vessel.transfer(lam, xs, t)
    dS = d_dx(lambda y: vessel.transfer(lam, y, t), xs, h)
    G = vessel.gamma_star(xs, t)
    y = S @ u
    dy = dS @ u + S @ (p.sigma1_inv @ ((lam * p.sigma2 + p.gamma) @ u))
    return _relative([lam * p.sigma2 @ y, -p.sigma1 @ dy, G @ y])


def backlund_fd_residual(vessel, lam, xs, u0, t=None) -> float:
    """Output-LDE residual with ``y'`` from plain grid differences of ``y`` (cross-check)."""
    from .pde import fd_derivative_array

    p = vessel.params
    xs = np.asarray(xs, dtype=float)
    y = backlund_map(vessel, lam, xs, u0, t)[..., None]
    dy = fd_derivative_array(y, xs[1] - xs[0], 1, axis=0)
    G = vessel.gamma_star(xs, t)
    ok = np.isfinite(dy).all(axis=(-2, -1))
    return _relative([lam * p.sigma2 @ y[ok], -p.sigma1 @ dy[ok], G[ok] @ y[ok]])


def factorization_residual(vessel, lam, x, anchor: float = 0.0, step: float = 1e-3, t=None) -> float:
    """``||S(lam,x) - Phi_*(lam,x) S(lam,a) Phi(lam, x-a)^-1||_inf``, ``Phi_*`` normalized at ``a``.

    ``Phi_*`` is integrated by RK4 from the vessel's own ``gamma_*``.
    """
    p = vessel.params
    if x == anchor:
        return 0.0
    gs = vessel.gamma_star if t is None else (lambda y: vessel.gamma_star(y, t))
    phi_star = fundamental_output(gs, p, lam, x, anchor=anchor, step=step)
    S_a = vessel.transfer(lam, anchor, t)
    S_x = vessel.transfer(lam, x, t)
    phi_inv = fundamental_input(p, lam, -(x - anchor))
    return float(inf_norm(S_x - phi_star @ S_a @ phi_inv))


def factorization_residual_sampled(vessel, lam, xs, x, anchor: float, t=None) -> float:
    """As :func:`factorization_residual` but with ``gamma_*`` only known on the grid ``xs``."""
    p = vessel.params
    samples = SampledPotential(xs, vessel.gamma_star(np.asarray(xs, dtype=float), t))
    phi_star = fundamental_output(samples, p, lam, x, anchor=anchor)
    S_a = vessel.transfer(lam, anchor, t)
    S_x = vessel.transfer(lam, x, t)
    return float(inf_norm(S_x - phi_star @ S_a @ fundamental_input(p, lam, -(x - anchor))))


def transfer_pde_residual(vessel, lam, xs, h: float = DEFAULT_H, t=None) -> float:
    """Relative residual of ``S' = s1^-1 (s2 lam + gamma_*) S - S s1^-1 (s2 lam + gamma)``."""
    p = vessel.params
    xs = np.asarray(xs, dtype=float)
    S = vessel.transfer(lam, xs, t)
    dS = d_dx(lambda y: vessel.transfer(lam, y, t), xs, h)
    G = vessel.gamma_star(xs, t)
    s1i = p.sigma1_inv
    return _relative([dS, -s1i @ (lam * p.sigma2 + G) @ S, S @ p.generator(lam)])


def transfer_t_residual(family, lam, xs, ts, h: float = DEFAULT_H) -> float:
    """Relative residual of ``S_t = i lam S_x + i (H0)_x s1 S`` on an (x, t) grid."""
    X, T = np.meshgrid(np.asarray(xs, float), np.asarray(ts, float), indexing="ij")
    s1 = family.params.sigma1
    S = family.transfer(lam, X, T)
    Sx = d_dx(lambda y: family.transfer(lam, y, T), X, h)
    St = d_dx(lambda s: family.transfer(lam, X, s), T, h)
    H0x = d_dx(lambda y: family.H(0, y, T), X, h)
    return _relative([St, -1j * lam * Sx, -1j * H0x @ s1 @ S])


def potential_from_transfer(transfer_fn, params: VesselParameters, lam, xs, h: float = DEFAULT_H) -> np.ndarray:
    """Recover ``gamma_*`` from any transfer function through its x-equation.

    ``gamma_* = s1 S' S^-1 + s1 S s1^-1 (s2 lam + gamma) S^-1 - s2 lam``.
    """
    xs = np.asarray(xs, dtype=float)
    S = transfer_fn(lam, xs)
    dS = d_dx(lambda y: transfer_fn(lam, y), xs, h)
    Si = inverse(S)
    s1 = params.sigma1
    return s1 @ dS @ Si + s1 @ S @ params.generator(lam) @ Si - lam * params.sigma2


# ---------------------------------------------------------------------------
# gauge freedom


def gauge_matrix(a, b, lam) -> np.ndarray:
    """``Y(lam) = a(lam) I + b(lam) s1``; ``a``, ``b`` are callables or constants."""
    av = a(lam) if callable(a) else a
    bv = b(lam) if callable(b) else b
    return complex(av) * ID2 + complex(bv) * SIGMA_CANONICAL


def commutant_decomposition(M):
    """Least-squares fit ``M ~ a I + b s1``; returns ``(a, b, residual)``.

    ``I`` and ``s1`` are orthogonal in the Frobenius inner product, so the
    fit is two projections; the residual is the inf-norm of the remainder.
    """
    M = np.asarray(M, dtype=complex)
    a = (M[..., 0, 0] + M[..., 1, 1]) / 2
    b = (-1j * M[..., 0, 1] + 1j * M[..., 1, 0]) / 2
    rest = M - a[..., None, None] * ID2 - b[..., None, None] * SIGMA_CANONICAL
    return a, b, inf_norm(rest)


class GaugedTransfer:
    """``S(lam, x) Y(lam)`` for a base vessel and a gauge of the commutant form."""

    def __init__(self, base, a, b):
        self.base, self.a, self.b = base, a, b
        self.params = base.params

    def Y(self, lam) -> np.ndarray:
        return gauge_matrix(self.a, self.b, lam)

    def transfer(self, lam, x, t=None) -> np.ndarray:
        return self.base.transfer(lam, x, t) @ self.Y(lam)

    def gamma_star(self, x, t=None) -> np.ndarray:
        return self.base.gamma_star(x, t)

    def spectral_radius(self) -> float:
        return self.base.spectral_radius()


def probe_lambdas(vessel, count: int = 12, radius: float | None = None, eps: float | None = None) -> np.ndarray:
    """``count`` points on a circle of radius ``2 (rho + 1)``, off the spectrum."""
    eps = settings.eps_spec if eps is None else eps
    rho = vessel.spectral_radius() if hasattr(vessel, "spectral_radius") else 0.0
    radius = 2 * (rho + 1) if radius is None else radius
    # half-step offset keeps the probes off both axes
    lams = radius * np.exp(2j * np.pi * (np.arange(count) + 0.5) / count)
    eigs = _spectrum(vessel)
    if eigs.size:
        far = np.min(np.abs(lams[:, None] - eigs[None, :]), axis=1) > eps
        lams = lams[far]
    return lams


def _spectrum(vessel) -> np.ndarray:
    sp = getattr(getattr(vessel, "base", vessel), "spectral", None)
    if sp is None:
        return np.zeros(0, dtype=complex)
    return np.concatenate([sp.lambdas, -sp.mus])


@dataclass
class GaugeFit:
    is_equivalent: bool
    lambdas: np.ndarray
    a: np.ndarray
    b: np.ndarray
    residuals: np.ndarray
    skipped: list = field(default_factory=list)

    def Y(self) -> np.ndarray:
        return self.a[:, None, None] * ID2 + self.b[:, None, None] * SIGMA_CANONICAL


def gauge_equivalence_check(vessel1, vessel2, lams, x: float = 0.0, tol: float = 1e-8) -> GaugeFit:
    """Fit ``S1^-1 S2 = a I + b s1`` at each probe; equivalent iff every fit residual < ``tol``.

    Probes where ``S1`` is singular (or sits on a spectrum) are skipped with a
    warning.
    """
    kept, a_s, b_s, res, skipped = [], [], [], [], []
    for lam in np.atleast_1d(lams):
        lam = complex(lam)
        try:
            S1 = vessel1.transfer(lam, x)
            S2 = vessel2.transfer(lam, x)
            M = inverse(S1) @ S2
        except (SingularityError, SpectrumError) as exc:
            warnings.warn(f"probe {lam} skipped: {exc}", RuntimeWarning, stacklevel=2)
            skipped.append(lam)
            continue
        a, b, r = commutant_decomposition(M)
        scale = max(1.0, float(np.max(np.abs(M))))
        kept.append(lam)
        a_s.append(complex(a))
        b_s.append(complex(b))
        res.append(float(r) / scale)
    res = np.array(res)
    ok = bool(res.size) and bool(np.all(res < tol))
    return GaugeFit(ok, np.array(kept), np.array(a_s), np.array(b_s), res, skipped)


def gauge_invariance_residual(vessel, a, b, xs, lams=None, h: float = 2e-3) -> float:
    """Potential recovered from ``S Y`` versus the linkage ``gamma_*`` (sup over probes and grid)."""
    g = GaugedTransfer(vessel, a, b)
    lams = probe_lambdas(vessel, 4) if lams is None else lams
    ref = vessel.gamma_star(np.asarray(xs, float))
    worst = 0.0
    for lam in lams:
        rec = potential_from_transfer(lambda l_, y: g.transfer(l_, y), vessel.params, complex(lam), xs, h)
        worst = max(worst, float(np.max(np.abs(rec - ref))))
    return worst


def limit_at_infinity(vessel, x: float = 0.0, modulus: float = 1e6, rays: int = 4) -> float:
    """``max ||S(lam, x) - I||`` at ``|lam| = modulus`` along ``rays`` directions."""
    angles = 2 * np.pi * (np.arange(rays) + 0.125) / rays
    return max(float(inf_norm(vessel.transfer(modulus * np.exp(1j * a), x) - ID2)) for a in angles)


@dataclass
class InitialValueReport:
    status: str  # "ok" or "precondition_failed"
    initial_gap: float
    residual: float | None
    passed: bool | None


def same_initial_value_check(vessel1, vessel2, xs, lams=None, x0: float | None = None, tol: float = 1e-8,
                             infinity_tol: float = 1e-4) -> InitialValueReport:
    """Equal transfer functions at ``x0`` should force equal potentials on ``xs``.

    The precondition is checked at the probes ``lams`` (default: 12 circle
    probes) together with the limit ``S -> I`` at infinity; when it fails the
    comparison is skipped and reported as such.
    """
    xs = np.asarray(xs, dtype=float)
    x0 = float(xs[0]) if x0 is None else x0
    lams = probe_lambdas(vessel1) if lams is None else lams
    gap = 0.0
    for lam in lams:
        gap = max(gap, float(inf_norm(vessel1.transfer(complex(lam), x0) - vessel2.transfer(complex(lam), x0))))
    lim = max(limit_at_infinity(vessel1, x0), limit_at_infinity(vessel2, x0))
    if gap >= tol or lim >= infinity_tol:
        return InitialValueReport("precondition_failed", gap, None, None)
    diff = vessel1.gamma_star(xs) - vessel2.gamma_star(xs)
    resid = float(np.max(np.abs(diff)))
    return InitialValueReport("ok", gap, resid, resid < tol)


def rescaled(spectral, row_scale, col_scale):
    """Similarity ``B0 -> T B0``, ``C0 -> C0 R``, ``X0 -> T X0 R`` with diagonal ``T``, ``R``.

    Leaves the transfer function (hence the potential) unchanged.
    """
    from .construction import SpectralData

    T = np.asarray(row_scale, dtype=complex)
    R = np.asarray(col_scale, dtype=complex)
    return SpectralData(
        spectral.lambdas,
        spectral.mus,
        T[:, None] * spectral.B0,
        spectral.C0 * R[None, :],
        T[:, None] * spectral.X0 * R[None, :],
        spectral.x0,
    )
