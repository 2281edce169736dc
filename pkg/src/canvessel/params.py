"""Vessel parameter triples and fundamental solutions of the input/output LDEs.

The input LDE is ``lam*sigma2*u - sigma1*u' + gamma*u = 0``; its fundamental
matrix is the exponential ``exp(x * sigma1^{-1} (lam*sigma2 + gamma))``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DomainError, ParameterError
from .matrix import ID2, SIGMA_CANONICAL, allclose, inverse


@dataclass(frozen=True, eq=False)
class VesselParameters:
    sigma1: np.ndarray
    sigma2: np.ndarray
    gamma: np.ndarray
    name: str = "custom"

    def __post_init__(self):
        for field in ("sigma1", "sigma2", "gamma"):
            value = np.array(getattr(self, field), dtype=complex)
            if value.shape != (2, 2):
                raise ParameterError(f"{field} must be 2x2, got {value.shape}")
            value.setflags(write=False)
            object.__setattr__(self, field, value)
        s1, s2, g = self.sigma1, self.sigma2, self.gamma
        if not allclose(s1, s1.conj().T, atol=1e-14, rtol=0):
            raise ParameterError("sigma1 must be selfadjoint")
        if abs(s1[0, 0] * s1[1, 1] - s1[0, 1] * s1[1, 0]) < 1e-14:
            raise ParameterError("sigma1 must be invertible")
        if not allclose(s2, s2.conj().T, atol=1e-14, rtol=0):
            raise ParameterError("sigma2 must be selfadjoint")
        if not allclose(g, -g.conj().T, atol=1e-14, rtol=0):
            raise ParameterError("gamma must be skew-adjoint")
        inv = inverse(s1)
        inv.setflags(write=False)
        object.__setattr__(self, "sigma1_inv", inv)

    @property
    def is_canonical(self) -> bool:
        return (
            allclose(self.sigma1, SIGMA_CANONICAL, atol=1e-14, rtol=0)
            and allclose(self.sigma2, ID2, atol=1e-14, rtol=0)
            and allclose(self.gamma, 0 * ID2, atol=1e-14, rtol=0)
        )

    def generator(self, lam) -> np.ndarray:
        """``sigma1^{-1} (lam*sigma2 + gamma)``, batched over ``lam``."""
        lam = np.asarray(lam, dtype=complex)
        return self.sigma1_inv @ (lam[..., None, None] * self.sigma2 + self.gamma)

    def to_dict(self) -> dict:
        def enc(m):
            return [[[float(z.real), float(z.imag)] for z in row] for row in m]

        return {"name": self.name, "sigma1": enc(self.sigma1), "sigma2": enc(self.sigma2), "gamma": enc(self.gamma)}


def preset_canonical() -> VesselParameters:
    return VesselParameters(SIGMA_CANONICAL, np.eye(2), np.zeros((2, 2)), name="canonical")


def preset_kdv() -> VesselParameters:
    return VesselParameters([[0, 1], [1, 0]], [[1, 0], [0, 0]], [[0, 0], [0, 1j]], name="kdv")


def preset_nls() -> VesselParameters:
    return VesselParameters(np.eye(2), 0.5 * np.diag([1.0, -1.0]), np.zeros((2, 2)), name="nls")


PRESETS = {"canonical": preset_canonical, "kdv": preset_kdv, "nls": preset_nls}


def _sinhc(z):
    """sinh(z)/z with the removable singularity filled in."""
    z = np.asarray(z, dtype=complex)
    small = np.abs(z) < 1e-4
    zz = np.where(small, 1.0, z)
    out = np.sinh(zz) / zz
    z2 = z * z
    series = 1 + z2 / 6 + z2 * z2 / 120
    return np.where(small, series, out)


def expm2(m) -> np.ndarray:
    """Exact exponential of (stacks of) 2x2 matrices.

    Uses ``exp(M) = e^{tr/2} (cosh(s) I + sinh(s)/s (M - tr/2 I))`` with
    ``s^2 = -det(M - tr/2 I)``; no scaling or squaring is needed.
    """
    m = np.asarray(m, dtype=complex)
    half = 0.5 * (m[..., 0, 0] + m[..., 1, 1])
    n = m - half[..., None, None] * ID2
    s2 = -(n[..., 0, 0] * n[..., 1, 1] - n[..., 0, 1] * n[..., 1, 0])
    s = np.sqrt(s2)
    e = np.exp(half)
    return e[..., None, None] * (np.cosh(s)[..., None, None] * ID2 + _sinhc(s)[..., None, None] * n)


def fundamental_input(params: VesselParameters, lam, x) -> np.ndarray:
    """Fundamental matrix ``Phi(lam, x)`` of the input LDE with ``Phi(lam, 0) = I``.

    ``lam`` and ``x`` broadcast against each other; the result has shape
    ``broadcast(lam, x).shape + (2, 2)``.
    """
    lam, x = np.broadcast_arrays(np.asarray(lam, dtype=complex), np.asarray(x, dtype=complex))
    return expm2(x[..., None, None] * params.generator(lam))


def phi_canonical(lam, x) -> np.ndarray:
    """Closed form of ``Phi`` for the canonical parameters (cosh/sinh matrix)."""
    lam, x = np.broadcast_arrays(np.asarray(lam, dtype=complex), np.asarray(x, dtype=complex))
    c, s = np.cosh(lam * x), np.sinh(lam * x)
    out = np.empty(lam.shape + (2, 2), dtype=complex)
    out[..., 0, 0] = c
    out[..., 1, 1] = c
    out[..., 0, 1] = 1j * s
    out[..., 1, 0] = -1j * s
    return out


class SampledPotential:
    """Grid samples of ``gamma_*`` with cubic Lagrange interpolation between nodes."""

    def __init__(self, xs, values):
        xs = np.asarray(xs, dtype=float)
        values = np.asarray(values, dtype=complex)
        if xs.ndim != 1 or values.shape != xs.shape + (2, 2):
            raise DomainError("samples must be (nx,) positions with (nx, 2, 2) values")
        if xs.size < 4 or np.any(np.diff(xs) <= 0):
            raise DomainError("need at least 4 strictly increasing sample positions")
        self.xs, self.values = xs, values

    def __call__(self, x):
        if np.ndim(x):
            return np.array([self(v) for v in np.ravel(x)]).reshape(np.shape(x) + (2, 2))
        x = float(np.real(x))
        xs = self.xs
        if x < xs[0] - 1e-12 or x > xs[-1] + 1e-12:
            raise DomainError(f"x={x} outside sampled range [{xs[0]}, {xs[-1]}]")
        k = int(np.clip(np.searchsorted(xs, x) - 2, 0, xs.size - 4))
        nodes = xs[k : k + 4]
        out = np.zeros((2, 2), dtype=complex)
        for i in range(4):
            w = np.prod([(x - nodes[j]) / (nodes[i] - nodes[j]) for j in range(4) if j != i])
            out += w * self.values[k + i]
        return out


def fundamental_output(
    gamma_star: Callable | SampledPotential,
    params: VesselParameters,
    lam: complex,
    x: float,
    anchor: float = 0.0,
    step: float | None = None,
) -> np.ndarray:
    """``Phi_*(lam, x)`` for the output LDE, normalized to ``I`` at ``anchor``.

    Classical RK4.  For sampled potentials the step defaults to the grid
    spacing and the range is checked; for callables it defaults to 1e-3.
    """
    if isinstance(gamma_star, SampledPotential):
        lo, hi = gamma_star.xs[0], gamma_star.xs[-1]
        if not (lo - 1e-12 <= anchor <= hi + 1e-12 and lo - 1e-12 <= x <= hi + 1e-12):
            raise DomainError(f"[{anchor}, {x}] not inside sampled range [{lo}, {hi}]")
        if step is None:
            step = float(np.min(np.diff(gamma_star.xs)))
    elif step is None:
        step = 1e-3
    span = x - anchor
    if span == 0:
        return ID2.copy()
    nsteps = max(1, int(np.ceil(abs(span) / step)))
    h = span / nsteps
    # potential at every node and midpoint, in one batched call when possible
    ys = anchor + (h / 2) * np.arange(2 * nsteps + 1)
    try:
        G = np.asarray(gamma_star(ys), dtype=complex)
        if G.shape != ys.shape + (2, 2):
            raise ValueError
    except (TypeError, ValueError, IndexError):
        G = np.array([gamma_star(y) for y in ys], dtype=complex)
    gens = params.sigma1_inv @ (lam * params.sigma2 + G)
    phi = ID2.copy()
    for k in range(nsteps):
        g0, gm, g1 = gens[2 * k], gens[2 * k + 1], gens[2 * k + 2]
        k1 = g0 @ phi
        k2 = gm @ (phi + h / 2 * k1)
        k3 = gm @ (phi + h / 2 * k2)
        k4 = g1 @ (phi + h * k3)
        phi = phi + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return phi
