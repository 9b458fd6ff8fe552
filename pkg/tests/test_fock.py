import math
import warnings

import numpy as np
import pytest

from rfoptics import fock as fk
from rfoptics.pairing import LightConeQuadrature, gram_matrix
from rfoptics.testfns import packet

REAL = (1.0, 0.0, 0.0, 0.0, 1.0, 0.0)
QUAD = LightConeQuadrature()


def unit(f):
    n = gram_matrix([f], "positive", QUAD).entries[0, 0].real
    return (f * (1 / math.sqrt(n))).named(f.name)


F = unit(packet(REAL, name="f"))
G = unit(packet((0.2, 1.0, 0.0, 0.0, 0.3, 1.0), center=(0.3, 0.5, -0.2, 0.1), name="g"))
H1 = unit(packet((0, 1, 0, 1, 0, 0), center=(0, 0.5, 0, 0), carrier=(6, 0, 0, 6), name="h1"))
H2 = unit(packet((0, 1, 0, 1, 0, 0), center=(0.3, 0, 0.4, 0.2), carrier=(6, 0, 0, -6), name="h2"))


@pytest.fixture(scope="module")
def two():
    ba = fk.build_mode_basis([F, G], "a", QUAD)
    bb = fk.build_mode_basis([F, G], "b", QUAD)
    return ba, bb, fk.FockSpace(ba.modes, bb.modes, 6)


@pytest.fixture(scope="module")
def one():
    ba = fk.build_mode_basis([F], "a", QUAD)
    bb = fk.build_mode_basis([F], "b", QUAD)
    return ba, bb


@pytest.fixture(scope="module")
def positive():
    ba = fk.build_mode_basis([H1, H2], "a", QUAD)
    return ba, fk.FockSpace(ba.modes, 0, 4)


def ops(two):
    ba, bb, space = two
    return {
        "a_f": fk.ladder_operator(ba, F, "annihilate", "a", space),
        "a_g": fk.ladder_operator(ba, G, "annihilate", "a", space),
        "ad_f": fk.ladder_operator(ba, F, "create", "a", space),
        "ad_g": fk.ladder_operator(ba, G, "create", "a", space),
        "b_f": fk.ladder_operator(bb, F, "annihilate", "b", space),
        "bd_g": fk.ladder_operator(bb, G, "create", "b", space),
        "Xi_a": fk.number_operator("a", space),
        "Xi_b": fk.number_operator("b", space),
    }


# -- mode bases ---------------------------------------------------------------


def test_single_normalized_function_gives_unit_coefficient(one):
    ba, _ = one
    assert ba.modes == 1
    assert abs(ba.coefficients[0, 0]) == pytest.approx(1.0, abs=1e-10)


def test_duplicate_bank_keeps_one_mode():
    assert fk.build_mode_basis([F, F], "a", QUAD).modes == 1


def test_reconstruction_three_packets():
    k = fk.build_mode_basis([F, G, H1], "a", QUAD)
    assert k.modes == 3
    assert k.reconstruction_error() <= 1e-8


def test_degenerate_bank():
    with pytest.raises(fk.DegenerateBankError):
        fk.build_mode_basis([F * 0.0], "a", QUAD)


def test_fock_dimension():
    for a, b, n in [(1, 0, 5), (2, 2, 6), (3, 1, 4)]:
        s = fk.FockSpace(a, b, n)
        assert s.dimension == s.expected_dimension() == math.comb(n + a + b, a + b)


# -- ladder operators ---------------------------------------------------------


def test_annihilator_kills_vacuum(two):
    o = ops(two)
    vac = two[2].vacuum()
    assert np.all(o["a_f"].apply(vac) == 0)
    assert np.all(o["b_f"].apply(vac) == 0)


def test_creation_is_exact_adjoint(two):
    ba, _, space = two
    for f in (F, G):
        a = fk.ladder_operator(ba, f, "annihilate", "a", space).matrix
        ad = fk.ladder_operator(ba, f, "create", "a", space).matrix
        assert (ad != a.conj().T).nnz == 0


def test_annihilators_commute_exactly(two):
    o = ops(two)
    assert fk.commutator(o["a_f"], o["a_g"]).is_exactly_zero()
    assert fk.commutator(o["a_f"], o["b_f"]).is_exactly_zero()
    assert fk.commutator(o["ad_f"], o["bd_g"]).is_exactly_zero()
    # plain matrix products only vanish to rounding
    raw = fk.commutator(o["a_f"], o["a_g"], expand_linear=False)
    assert raw.norm() <= 1e-14


def test_ccr_on_safe_subspace(two):
    ba, _, space = two
    o = ops(two)
    ident = fk._identity(space)
    for a, ad, gf in [("a_f", "ad_g", ba.pair(G, F)), ("a_g", "ad_f", ba.pair(F, G)), ("a_f", "ad_f", 1.0)]:
        c = fk.commutator(o[a], o[ad])
        assert c.safe_level == space.cutoff - 1
        assert (c - ident * gf).restricted_norm() <= 1e-8 * abs(gf)
        raw = fk.commutator(o[a], o[ad], expand_linear=False)
        assert (raw - ident * gf).restricted_norm(space.cutoff - 1) <= 1e-8 * abs(gf)


def test_span_error(two):
    ba, _, space = two
    with pytest.raises(fk.SpanError):
        fk.ladder_operator(ba, packet(REAL, center=(0, 3, 0, 0)), "annihilate", "a", space)


def test_triplet_export(two):
    o = ops(two)
    text = o["a_f"].to_triplets()
    lines = text.strip().splitlines()
    assert lines[0] == "row,col,re,im"
    assert len(lines) - 1 == o["a_f"].matrix.nnz


# -- observables -------------------------------------------------------------


def test_phi_ignores_b_sector(two):
    ba, bb, space = two
    phi = fk.observable(fk.ObservableSpec("phi", F), ba, bb, space)
    assert fk.commutator(phi, ops(two)["b_f"]).is_exactly_zero()
    assert "pairing_b" not in phi.meta


def test_chi_equals_xi_one_one(two):
    ba, bb, space = two
    chi = fk.observable(fk.ObservableSpec("chi", F), ba, bb, space)
    xi = fk.observable(fk.ObservableSpec("xi", F, 1.0, 1.0), ba, bb, space)
    assert (chi.matrix != xi.matrix).nnz == 0
    assert chi.hermiticity_defect() <= 1e-12


def test_chi_commutator_vanishes(two):
    ba, bb, space = two
    cf = fk.observable(fk.ObservableSpec("chi", F), ba, bb, space)
    cg = fk.observable(fk.ObservableSpec("chi", G), ba, bb, space)
    c = fk.commutator(cf, cg)
    assert c.restricted_norm() <= 1e-10 * cf.norm() * cg.norm()


@pytest.mark.parametrize("alpha,beta", [(1.0, 0.0), (0.8, 0.6), (0.3, 1.2), (1.0, 1.0), (2.0, 0.5)])
def test_xi_commutator_scaling(two, alpha, beta):
    ba, bb, space = two
    pf = fk.observable(fk.ObservableSpec("phi", F), ba, bb, space)
    pg = fk.observable(fk.ObservableSpec("phi", G), ba, bb, space)
    xf = fk.observable(fk.ObservableSpec("xi", F, alpha, beta), ba, bb, space)
    xg = fk.observable(fk.ObservableSpec("xi", G, alpha, beta), ba, bb, space)
    cx, cp = fk.commutator(xf, xg), fk.commutator(pf, pg)
    scale = max(1.0, alpha**2 + beta**2) * xf.norm() * xg.norm()
    assert (cx - cp * (alpha**2 - beta**2)).restricted_norm() <= 1e-8 * scale
    if alpha == beta:
        assert cx.restricted_norm() <= 1e-10 * scale


def test_non_real_function_is_rejected(positive):
    ba, space = positive
    with pytest.raises(fk.ObservabilityError):
        fk.observable(fk.ObservableSpec("phi", H1), ba, None, space)


def test_self_commutator_is_exactly_zero(two):
    ba, bb, space = two
    xf = fk.observable(fk.ObservableSpec("xi", F, 0.8, 0.6), ba, bb, space)
    assert fk.commutator(xf, xf).is_exactly_zero()
    n = fk.number_operator("a", space)
    assert fk.commutator(n, n).is_exactly_zero()


# -- number operators --------------------------------------------------------


def test_number_operator(two):
    ba, bb, space = two
    o = ops(two)
    vac = space.vacuum()
    assert vac.expectation(o["Xi_a"]) == 0
    psi = o["ad_f"].apply(vac)
    np.testing.assert_allclose(o["Xi_a"].apply(psi), psi, atol=1e-15)
    assert fk.commutator(o["Xi_a"], o["bd_g"], expand_linear=False).is_exactly_zero()
    c = fk.commutator(o["Xi_a"], o["ad_f"])
    assert (c - o["ad_f"]).restricted_norm() <= 1e-12


# -- states ------------------------------------------------------------------


def test_single_quantum_states(positive):
    ba, space = positive
    vac = space.vacuum()
    assert vac.norm == 1.0
    psi = fk.state_prepare("single_quantum", ba, space, H1)
    assert psi.norm**2 == pytest.approx(1.0, abs=1e-8)
    a_g = fk.ladder_operator(ba, H2, "annihilate", "a", space)
    amp = np.vdot(vac.coefficients, a_g.apply(psi))
    assert abs(amp - ba.pair(H2, H1)) <= 1e-8
    rho = fk.state_prepare("projector_density", ba, space, H1)
    assert rho.trace() == pytest.approx(1.0, abs=1e-8)


def test_preparation_errors(positive):
    ba, space = positive
    with pytest.raises(fk.PreparationError):
        fk.state_prepare("single_quantum", ba, space, H1 * 2.0)
    real_basis = fk.build_mode_basis([F], "a", QUAD)
    with pytest.raises(fk.PreparationError):
        fk.state_prepare("single_quantum", real_basis, fk.FockSpace(1, 0, 3), F)


def test_gibbs_trace_and_cold_limit(one):
    space = fk.FockSpace(1, 1, 20)
    rho = fk.gibbs_weight(fk.GibbsSpec(1.0, 2.0), space)
    assert rho.trace() == pytest.approx(1.0, abs=1e-12)
    cold = fk.gibbs_weight(fk.GibbsSpec(60.0, 60.0), space)
    np.testing.assert_allclose(cold.diagonal, np.abs(space.vacuum().coefficients) ** 2, atol=1e-25)


def test_gibbs_tail_warning():
    with pytest.warns(fk.TailWeightWarning):
        fk.gibbs_weight(fk.GibbsSpec(0.5, 0.5), fk.FockSpace(1, 1, 4))


def test_gibbs_cutoff_bound():
    n = fk.gibbs_cutoff(0.5, 0.7, 2)
    assert math.exp(-0.5 * n) * (n + 1) < 1e-8 <= math.exp(-0.5 * (n - 1)) * n


def test_thermal_variance_law(one):
    # exp(-mu N) on one mode gives <(a + a^+)^2> = coth(mu / 2), not coth(mu)
    ba, bb = one
    mu = 1.0
    space = fk.FockSpace(1, 1, fk.gibbs_cutoff(mu, mu, 2))
    phi = fk.observable(fk.ObservableSpec("phi", F), ba, bb, space)
    rho = fk.gibbs_weight(fk.GibbsSpec(mu, mu), space)
    lam = 0.5
    val = fk.characteristic_function(rho, phi, [lam], warn=False)[0].real
    fitted = -2 * math.log(val) / lam**2
    assert fitted == pytest.approx(fk.thermal_multiplier(mu), rel=1e-6)
    assert fitted == pytest.approx(1 / math.tanh(0.5), rel=1e-6)
    assert abs(fitted - 1 / math.tanh(1.0)) > 0.5


def test_gibbs_monotone_in_mu(one):
    ba, bb = one
    space = fk.FockSpace(1, 1, fk.gibbs_cutoff(0.5, 0.5, 2))
    xi = fk.observable(fk.ObservableSpec("xi", F, 0.8, 0.6), ba, bb, space)
    vals = []
    for mu in (0.5, 1.0, 2.0, 4.0):
        rho = fk.gibbs_weight(fk.GibbsSpec(mu, 1.0), space)
        vals.append(-2 * math.log(fk.characteristic_function(rho, xi, [0.5], warn=False)[0].real) / 0.25)
    assert all(a > b for a, b in zip(vals, vals[1:]))


# -- characteristic functions ------------------------------------------------


def test_vacuum_phi_at_one(one):
    ba, bb = one
    space = fk.FockSpace(1, 1, 24)
    phi = fk.observable(fk.ObservableSpec("phi", F), ba, bb, space)
    val = fk.characteristic_function(space.vacuum(), phi, [1.0])[0]
    assert val == pytest.approx(math.exp(-0.5), abs=1e-10)


def test_vacuum_xi_matches_gaussian(one):
    ba, bb = one
    space = fk.FockSpace(1, 1, 24)
    xi = fk.observable(fk.ObservableSpec("xi", F, 0.8, 0.6), ba, bb, space)
    lam = np.linspace(0, 3, 13)
    num = fk.characteristic_function(space.vacuum(), xi, lam)
    ana = fk.characteristic_function(space.vacuum(), xi, lam, method="analytic-gaussian")
    np.testing.assert_allclose(num, ana, atol=1e-8)
    np.testing.assert_allclose(ana.real, np.exp(-lam**2 * (0.64 + 0.36) / 2), rtol=1e-9)


@pytest.mark.filterwarnings("ignore::rfoptics.fock.TailWeightWarning")
def test_lambda_zero_is_exactly_one(two):
    ba, bb, space = two
    xi = fk.observable(fk.ObservableSpec("xi", F, 0.3, 1.7), ba, bb, space)
    rho = fk.gibbs_weight(fk.GibbsSpec(1.0, 1.0), space)
    for state in (space.vacuum(), rho):
        for engine in ("expm", "eigh", "krylov"):
            assert fk.characteristic_function(state, xi, [0.0], engine=engine, warn=False)[0] == 1.0


@pytest.mark.parametrize("gibbs", [False, True])
def test_engines_agree(one, gibbs):
    ba, bb = one
    space = fk.FockSpace(1, 1, 14)
    xi = fk.observable(fk.ObservableSpec("xi", F, 0.8, 0.6), ba, bb, space)
    state = fk.gibbs_weight(fk.GibbsSpec(2.0, 3.0), space) if gibbs else space.vacuum()
    lam = [0.3, 1.0, 2.2]
    ref = fk.characteristic_function(state, xi, lam, engine="expm", warn=False)
    for engine in ("eigh", "krylov"):
        np.testing.assert_allclose(fk.characteristic_function(state, xi, lam, engine=engine, warn=False), ref,
                                   atol=1e-11)


def test_moment_consistency(two):
    ba, bb, space = two
    xi = fk.observable(fk.ObservableSpec("xi", G, 0.8, 0.6), ba, bb, space)
    psi = fk.state_prepare("vacuum", ba, space)
    h = 1e-3
    vals = fk.characteristic_function(psi, xi, [-h, 0.0, h], warn=False)
    second = -(vals[0] - 2 * vals[1] + vals[2]).real / h**2
    direct = psi.expectation(xi @ xi).real
    assert second == pytest.approx(direct, rel=1e-5)


def test_equal_norms_give_equal_characteristic_functions():
    lam = np.linspace(0, 2.5, 6)
    curves = []
    for f in (F, G):
        ba = fk.build_mode_basis([f], "a", QUAD)
        bb = fk.build_mode_basis([f], "b", QUAD)
        space = fk.FockSpace(1, 1, 24)
        xi = fk.observable(fk.ObservableSpec("xi", f, 0.8, 0.6), ba, bb, space)
        rho = fk.gibbs_weight(fk.GibbsSpec(2.0, 2.0), space)
        curves.append(np.concatenate([fk.characteristic_function(space.vacuum(), xi, lam, warn=False),
                                      fk.characteristic_function(rho, xi, lam, warn=False)]))
    np.testing.assert_allclose(curves[0], curves[1], atol=1e-8)


def test_non_hermitian_input_rejected(two):
    o = ops(two)
    with pytest.raises(ValueError):
        fk.characteristic_function(two[2].vacuum(), o["a_f"], [1.0])


def test_truncation_warning(one):
    ba, bb = one
    space = fk.FockSpace(1, 1, 24)
    phi = fk.observable(fk.ObservableSpec("phi", F), ba, bb, space)
    rho = fk.gibbs_weight(fk.GibbsSpec(2.0, 2.0), space)
    # a state whose recorded temperature disagrees with its weights
    wrong = fk.DensityOperator(space, diagonal=rho.diagonal, meta=dict(rho.meta, mu=4.0))
    with pytest.warns(fk.TruncationWarning):
        fk.characteristic_function(wrong, phi, [1.0])
    with warnings.catch_warnings():
        warnings.simplefilter("error", fk.TruncationWarning)
        fk.characteristic_function(rho, phi, [1.0])


# -- Jacobi ------------------------------------------------------------------


def test_jacobi_triples(two):
    ba, bb, space = two
    o = ops(two)
    o["xi_g"] = fk.observable(fk.ObservableSpec("xi", G, 0.8, 0.6), ba, bb, space)
    o["chi_f"] = fk.observable(fk.ObservableSpec("chi", F), ba, bb, space)
    rep = fk.jacobi_check(o, [("Xi_a", "ad_f", "a_g"), ("a_f", "a_f", "ad_g"), ("xi_g", "bd_g", "Xi_b"),
                              ("chi_f", "a_g", "b_f")])
    assert rep["passed"], rep
    assert rep["triples"][1]["residual"] == 0.0
