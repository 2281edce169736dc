import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from canvessel import NodeState, SolitonSpec, SpectralData, VesselFamily, VesselState, build_soliton
from canvessel.construction import tau_log_derivative_identity, trivial_family
from canvessel.errors import OrderCapError, ParameterError, SingularityError, SpectrumError
from canvessel.matrix import ID2, solve_sylvester_diag
from canvessel.moments import MomentSequence, recursion_residual
from canvessel.params import preset_canonical, preset_kdv
from canvessel.vessel import (
    beta_trace,
    is_symmetric_node,
    linkage_from_h0,
    linkage_gamma_star,
    lyapunov_inverse_residual,
    lyapunov_residual,
    moment,
    potential_pq,
    pq_from_h0,
    sigma1_symmetry_defect,
    tau,
    transfer,
    transfer_inverse,
)

P = preset_canonical()


def sylvester_node(seed=0, n=3):
    r = np.random.default_rng(seed)
    lam = r.normal(size=n) + 1j * r.normal(size=n) + 3
    mu = r.normal(size=n) + 1j * r.normal(size=n) + 3
    B = r.normal(size=(n, 2)) + 1j * r.normal(size=(n, 2))
    C = r.normal(size=(2, n)) + 1j * r.normal(size=(2, n))
    X = solve_sylvester_diag(lam, mu, B @ P.sigma1 @ C)
    return NodeState(np.diag(lam), np.diag(mu), X, B, C, P)


def zero_node(n=2):
    A = np.diag([1.0, 2.0j])[:n, :n]
    z = np.zeros((n, 2))
    return NodeState(A, A, np.zeros((n, n)), z, z.T, P)


def unit_node():
    # B = 0 keeps X = I a node whenever A + A_zeta has no constraint from B sigma1 C
    A = np.diag([1.0 + 1j, -2.0])
    return NodeState(A, -A, np.eye(2), np.zeros((2, 2)), np.zeros((2, 2)), P)


def test_lyapunov_residual_examples(solitons):
    assert lyapunov_residual(sylvester_node()) < 1e-12
    assert lyapunov_residual(zero_node()) == 0
    fam = build_soliton(SolitonSpec("exponential", k=1, m=0.3)).family
    assert lyapunov_residual(fam.node(0.3, 0.1)) < 1e-10


def test_lyapunov_inverse_residual():
    fam = build_soliton(SolitonSpec("rational", k=0, b=1)).family
    assert lyapunov_inverse_residual(fam.node(1.0)) < 1e-10
    node = sylvester_node(4)
    kappa = np.linalg.cond(node.X)
    assert lyapunov_inverse_residual(node) <= max(lyapunov_residual(node), 1e-15) * kappa**2 * 10
    with pytest.raises(SingularityError):
        lyapunov_inverse_residual(zero_node())


def test_lyapunov_inverse_identity_x_equals_adjoint_form():
    node = unit_node()
    direct = node.A_zeta + node.A + node.B @ P.sigma1 @ node.C
    assert lyapunov_inverse_residual(node) == pytest.approx(np.abs(direct).sum(axis=1).max())


def test_node_shape_check():
    from canvessel.errors import DimensionError

    with pytest.raises(DimensionError):
        NodeState(np.eye(2), np.eye(2), np.eye(2), np.zeros((3, 2)), np.zeros((2, 2)), P)


def test_transfer_trivial_and_limits(solitons):
    node = unit_node()
    for lam in (0.3, 2.0j, -1 + 1j):
        assert np.allclose(transfer(node, lam), ID2)
        assert np.allclose(transfer_inverse(node, lam), ID2)
    st_ = solitons["two_dim"].family.state(0.5)
    assert np.max(np.abs(transfer(st_, 1e8) - ID2)) < 1e-6
    assert np.max(np.abs(transfer(st_, 1e6j) - ID2)) < 1e-4


def test_transfer_spectrum_error(solitons):
    st_ = solitons["rational"].family.state(0.5)
    with pytest.raises(SpectrumError):
        transfer(st_, 1j)
    with pytest.raises(SpectrumError):
        transfer_inverse(st_, 1j)  # -mu = i as well


def test_transfer_inverse_product(solitons):
    st_ = solitons["two_dim"].family.state(0.5)
    assert np.max(np.abs(transfer(st_, 3 + 1j) @ transfer_inverse(st_, 3 + 1j) - ID2)) < 1e-9


@given(st.floats(-4, 4), st.floats(-4, 4), st.sampled_from(["exponential", "rational", "two_dim"]))
def test_transfer_inverse_property(re, im, name):
    lam = complex(re, im)
    fam = {"exponential": build_soliton(SolitonSpec("exponential", k=1, m=0.3)),
           "rational": build_soliton(SolitonSpec("rational")),
           "two_dim": build_soliton(SolitonSpec("two_dim"))}[name].family
    eigs = np.concatenate([fam.spectral.lambdas, -fam.spectral.mus])
    if np.min(np.abs(eigs - lam)) < 0.1:
        return
    st_ = fam.state(0.6 if name != "exponential" else -0.8)
    assert np.max(np.abs(transfer(st_, lam) @ transfer_inverse(st_, lam) - ID2)) < 1e-9


def test_moment_examples(solitons):
    node = unit_node()
    for n in range(4):
        assert np.array_equal(moment(node, n), np.zeros((2, 2)))
    triv = VesselState.trivial(P)
    assert np.array_equal(moment(triv, 0), np.zeros((2, 2)))
    with pytest.raises(OrderCapError):
        moment(triv, 9)


@pytest.mark.parametrize("name", ["exponential", "rational", "two_dim"])
def test_moments_are_expansion_coefficients(solitons, name):
    st_ = solitons[name].family.state(-0.9 if name == "exponential" else 0.7)
    lam, N = 100.0, 4
    series = sum(moment(st_, n) @ P.sigma1 / lam ** (n + 1) for n in range(N + 1))
    tail = np.max(np.abs(transfer(st_, lam) + series - ID2))
    top = np.max(np.abs(moment(st_, N + 1)))
    assert tail < 2 * top / lam ** (N + 2) + 1e-15


def test_linkage(solitons):
    assert np.array_equal(linkage_gamma_star(unit_node()), P.gamma)
    for name in ("rational", "two_dim"):
        st_ = solitons[name].family.state(0.7)
        g = st_.gamma_star
        assert np.array_equal(g, linkage_from_h0(P, moment(st_, 0)))
        p, q = potential_pq(st_)
        assert abs(p.imag) < 1e-10 and abs(q.imag) < 1e-10
        assert np.allclose(g, [[1j * p, 1j * q], [1j * q, -1j * p]], atol=1e-12)
        assert np.allclose(g.conj().T, -g, atol=1e-12)


def test_potential_pq_examples():
    assert pq_from_h0(np.zeros((2, 2))) == (0, 0)
    p, q = pq_from_h0(np.array([[1, -2], [-2, -1]]))
    assert (p, q) == (4, 2)
    node = NodeState(np.zeros((0, 0)), np.zeros((0, 0)), np.zeros((0, 0)), np.zeros((0, 2)), np.zeros((2, 0)),
                     preset_kdv())
    with pytest.raises(ParameterError):
        potential_pq(VesselState(node))


def test_tau_and_beta_rational():
    fam = build_soliton(SolitonSpec("rational", k=0, b=1)).family
    xs = np.linspace(-0.5, 2, 11)
    assert np.allclose(fam.tau(xs), 1 + xs, atol=1e-13)
    assert fam.beta(1.0) == pytest.approx(0.5, abs=1e-14)
    assert tau(fam.state(0.0)) == pytest.approx(1.0)
    assert beta_trace(fam.state(1.0)) == pytest.approx(0.5)
    with pytest.raises(SingularityError):
        tau(fam.state(-1.0))


@pytest.mark.parametrize("name", ["exponential", "rational", "two_dim"])
def test_beta_matches_closed_form(solitons, boxes, name):
    sol = solitons[name]
    X, T = np.meshgrid(np.linspace(*boxes[name], 21), np.linspace(-0.1, 0.1, 21), indexing="ij")
    ref = sol.beta_ref(X, T)
    assert np.max(np.abs(sol.family.beta(X, T) - ref) / np.abs(ref)) < 1e-8
    tref = sol.tau_ref(X, T)
    assert np.max(np.abs(sol.family.tau(X, T) - tref) / np.abs(tref)) < 1e-8


def test_tau_log_derivative_identity(solitons):
    assert tau_log_derivative_identity(trivial_family(), np.linspace(0, 1, 21)) == (0.0, 0.0)
    fam = build_soliton(SolitonSpec("exponential", k=1, m=0.3)).family
    r_fd, r_int = tau_log_derivative_identity(fam, np.linspace(-1, -0.5, 201))
    assert r_fd < 1e-6 and r_int < 1e-6
    fam = build_soliton(SolitonSpec("rational", k=0, b=1)).family
    xs = np.linspace(0, 1, 11)
    assert np.allclose(fam.beta(xs), 1 / (1 + xs), atol=1e-13)
    p, q = fam.pq(xs)
    assert np.allclose(p**2 + q**2, 1 / (1 + xs) ** 2, atol=1e-13)


@pytest.mark.parametrize("name", ["exponential", "rational", "two_dim"])
def test_lyapunov_permanence(solitons, boxes, name):
    fam = solitons[name].family
    X, T = np.meshgrid(np.linspace(*boxes[name], 41), np.linspace(-0.1, 0.1, 41), indexing="ij")
    anchor = lyapunov_residual(fam.node(fam.spectral.x0))
    scale = np.max(np.abs(fam.X(X, T)))
    # constant in exact arithmetic; allow the roundoff floor of the sampled X
    assert np.max(lyapunov_residual(fam.node(X, T))) <= 10 * anchor + 1e-14 * scale


@pytest.mark.parametrize("name", ["exponential", "rational", "two_dim"])
def test_moment_recursion_fine_step(solitons, boxes, name):
    fam = solitons[name].family
    x0 = sum(boxes[name]) / 2
    xs = x0 + 1e-4 * np.arange(-6, 7)
    seq = MomentSequence.from_family(fam, 4, xs)
    for n in range(4):
        assert recursion_residual(seq, n) < 1e-6


@pytest.mark.parametrize("name", ["exponential", "rational", "two_dim"])
def test_sigma1_symmetry(solitons, boxes, name, rng):
    fam = solitons[name].family
    st_ = fam.state(boxes[name][0])
    lams = rng.normal(size=20) * 3 + 1j * rng.normal(size=20) * 3
    eigs = np.concatenate([fam.spectral.lambdas, -fam.spectral.mus, -fam.spectral.lambdas.conj()])
    lams = [lam for lam in lams if np.min(np.abs(eigs - lam)) > 1e-3]
    assert sigma1_symmetry_defect(st_, lams) < 1e-10
    assert is_symmetric_node(st_.node)


def test_nonsymmetric_node_detected():
    assert not is_symmetric_node(sylvester_node(7))
