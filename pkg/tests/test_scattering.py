import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from canvessel import NumericalFamily, SolitonSpec, VesselFamily, build_soliton, preset_canonical
from canvessel.construction import trivial_family
from canvessel.errors import SpectrumError
from canvessel.matrix import ID2, SIGMA_CANONICAL
from canvessel.params import fundamental_input
from canvessel.scattering import (
    GaugedTransfer,
    backlund_fd_residual,
    backlund_map,
    backlund_residual,
    commutant_decomposition,
    factorization_residual,
    factorization_residual_sampled,
    gauge_equivalence_check,
    gauge_invariance_residual,
    gauge_matrix,
    input_residual,
    input_solution,
    limit_at_infinity,
    probe_lambdas,
    rescaled,
    same_initial_value_check,
    transfer_pde_residual,
    transfer_t_residual,
)

P = preset_canonical()
NAMES = ["exponential", "rational", "two_dim"]


def test_input_solution_examples():
    u0 = np.array([0.3, -1.2j])
    assert np.allclose(input_solution(P, 1.7, 0.0, u0), u0)
    lam, xs = 1.3 + 0.2j, np.linspace(-1, 1, 9)
    u1 = input_solution(P, lam, xs, [1, 0])[:, 0]
    assert np.allclose(u1, np.cosh(lam * xs))
    h = 1e-3
    second = (input_solution(P, lam, xs + h, [1, 0])[:, 0] - 2 * u1 + input_solution(P, lam, xs - h, [1, 0])[:, 0]) / h**2
    assert np.max(np.abs(second - lam**2 * u1)) < 1e-5


@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2))
def test_input_residual_property(re, im, x):
    assert input_residual(P, complex(re, im), np.array([x]), [1, 0.5j]) < 1e-8


def test_backlund_trivial_is_identity():
    fam = trivial_family()
    xs = np.linspace(0, 1, 11)
    for lam in (2.0, 1 + 1j):
        assert np.array_equal(backlund_map(fam, lam, xs, [1, 0]), input_solution(P, lam, xs, [1, 0]))
        assert backlund_residual(fam, lam, xs, [1, 0]) == 0.0
        assert backlund_residual(fam, lam, xs, [0, 1]) == 0.0


def test_backlund_examples(solitons):
    exp = solitons["exponential"].family
    assert backlund_residual(exp, 2.0, np.linspace(-1, -0.5, 41), [1, 0]) < 1e-6
    rat = solitons["rational"].family
    assert backlund_residual(rat, 1 + 1j, np.linspace(0, 1, 41), [1, 0]) < 1e-6
    assert backlund_fd_residual(rat, 1 + 1j, np.linspace(0, 1, 401), [1, 0]) < 1e-6


def test_backlund_rejects_spectrum(solitons):
    with pytest.raises(SpectrumError):
        backlund_map(solitons["rational"].family, 1j, np.linspace(0, 1, 3), [1, 0])


@pytest.mark.parametrize("name", NAMES)
def test_backlund_property(solitons, boxes, name):
    fam = solitons[name].family
    xs = np.linspace(*boxes[name], 41)
    lams = probe_lambdas(fam)
    assert len(lams) == 12
    for lam in lams:
        for u0 in ([1, 0], [0, 1]):
            assert backlund_residual(fam, lam, xs, u0) < 1e-6


def test_factorization_examples(solitons):
    exp = solitons["exponential"].family
    assert factorization_residual(exp, 3.0, 0.0, anchor=0.0) == 0.0
    assert factorization_residual(exp, 3.0, -1.0, anchor=-0.5) < 1e-6
    two = solitons["two_dim"].family
    assert factorization_residual(two, 2 + 0.5j, 1.0, anchor=0.0) < 1e-6
    xs = np.linspace(-1, -0.5, 501)
    assert factorization_residual_sampled(exp, 3.0, xs, -1.0, anchor=-0.5) < 1e-6


def test_transfer_pde_examples(solitons):
    assert transfer_pde_residual(trivial_family(), 1.5, np.linspace(0, 1, 5)) == 0.0
    rat = solitons["rational"].family
    assert transfer_pde_residual(rat, 1.5, np.array([0.7])) < 1e-6


@pytest.mark.parametrize("name", NAMES)
def test_transfer_t_equation(solitons, boxes, name):
    fam = solitons[name].family
    xs, ts = np.linspace(*boxes[name], 11), np.linspace(-0.1, 0.1, 6)
    for lam in probe_lambdas(fam, 4):
        assert transfer_t_residual(fam, lam, xs, ts) < 1e-5


def test_gauge_matrix_examples():
    assert np.array_equal(gauge_matrix(1, 0, 0.4), ID2)
    assert np.array_equal(gauge_matrix(0, 1, 0.4), SIGMA_CANONICAL)
    assert np.allclose(gauge_matrix(lambda l: l, lambda l: 1 / l, 2.0), [[2, 0.5j], [-0.5j, 2]])


@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2))
def test_gauge_commutes_with_phi(a, b, re, im, x):
    Y = gauge_matrix(complex(a, b), complex(b, -a), 0.0)
    phi = fundamental_input(P, complex(re, im), x)
    assert np.max(np.abs(Y @ phi - phi @ Y)) < 1e-12 * max(1.0, np.max(np.abs(phi)))


@given(st.integers(0, 10**6), st.booleans())
def test_commutant_characterization(seed, in_commutant):
    r = np.random.default_rng(seed)
    if in_commutant:
        a, b = r.normal(size=2) + 1j * r.normal(size=2)
        M = a * ID2 + b * SIGMA_CANONICAL
    else:
        M = r.normal(size=(2, 2)) + 1j * r.normal(size=(2, 2))
    points = [(complex(*r.normal(size=2)), float(r.normal())) for _ in range(5)]
    comm = max(np.max(np.abs(M @ fundamental_input(P, l, x) - fundamental_input(P, l, x) @ M)) for l, x in points)
    res = commutant_decomposition(M)[2]
    assert (comm < 1e-10) == (res < 1e-10) == in_commutant


def test_gauge_equivalence(solitons):
    fam = solitons["rational"].family
    lams = probe_lambdas(fam)
    self_fit = gauge_equivalence_check(fam, fam, lams)
    assert self_fit.is_equivalent
    assert np.allclose(self_fit.Y(), ID2, atol=1e-12)
    fit = gauge_equivalence_check(fam, GaugedTransfer(fam, 1.0, 0.3), lams)
    assert fit.is_equivalent and np.max(np.abs(fit.b - 0.3)) < 1e-8 and np.max(np.abs(fit.a - 1)) < 1e-8
    other = gauge_equivalence_check(fam, solitons["two_dim"].family, lams, x=0.5)
    assert not other.is_equivalent


def test_gauge_equivalence_skips_singular_probe(solitons):
    fam = solitons["rational"].family
    with pytest.warns(RuntimeWarning):
        fit = gauge_equivalence_check(fam, fam, [1j, 2.0])
    assert fit.skipped == [1j] and fit.is_equivalent


@pytest.mark.parametrize("name", NAMES)
def test_gauge_invariance(solitons, boxes, name):
    fam = solitons[name].family
    xs = np.linspace(*boxes[name], 11)
    assert gauge_invariance_residual(fam, lambda l: 1 + 0.1 * l, lambda l: 0.3 / (l + 10), xs) < 1e-7


@pytest.mark.parametrize("name", NAMES)
def test_limit_at_infinity(solitons, boxes, name):
    assert limit_at_infinity(solitons[name].family, boxes[name][0]) < 1e-4


def test_same_initial_value(solitons):
    two = solitons["two_dim"].family
    sp = two.spectral
    xs = np.linspace(0, 0.5, 11)
    twin = VesselFamily(rescaled(sp, [2, 3j], [0.5, 1]))
    rep = same_initial_value_check(two, twin, xs)
    assert rep.status == "ok" and rep.residual < 1e-8 and rep.passed
    rep = same_initial_value_check(two, NumericalFamily(sp), xs, tol=1e-6)
    assert rep.status == "ok" and rep.residual < 1e-6
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        neg = same_initial_value_check(two, solitons["rational"].family, xs)
    assert neg.status == "precondition_failed" and neg.passed is None
