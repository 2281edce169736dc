"""Global numerical thresholds.

All modules read their defaults from :data:`settings`; pass explicit values to
individual functions to override locally, or use :func:`override` for a block.
"""

from __future__ import annotations

import contextlib
import dataclasses
from dataclasses import dataclass


@dataclass
class Tolerances:
    eps_sing: float = 1e-12  # relative |det| floor, scaled by norm**n
    eps_spec: float = 1e-8  # minimal distance of lambda to a generator eigenvalue
    eps_beta: float = 1e-8  # |beta_x| below this masks a PDE point
    eps_lyap: float = 1e-10
    atol: float = 1e-12
    rtol: float = 1e-10


settings = Tolerances()


@contextlib.contextmanager
def override(**changes):
    """Temporarily change fields of :data:`settings`."""
    old = dataclasses.asdict(settings)
    for key, value in changes.items():
        if not hasattr(settings, key):
            raise AttributeError(f"unknown tolerance {key!r}")
        setattr(settings, key, value)
    try:
        yield settings
    finally:
        for key, value in old.items():
            setattr(settings, key, value)
