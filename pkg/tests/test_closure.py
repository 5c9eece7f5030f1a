import numpy as np
import pytest

from helpers import gaussian_moment

from nambu_dyn.closure import (
    ClosureMode,
    PotentialSpec,
    UnsupportedMomentError,
    UnsupportedMultipletError,
    UnsupportedPotentialError,
    build_F,
    effective_potential,
    parse_potential,
    reduce_moment,
)
from nambu_dyn.multiplets import QUARTET_QP_Q2P2, TRIPLET_QQPP_QP, multiplet_from_strings
from nambu_dyn.poly import Poly, parse_poly, p, q, xvar

ZC = ClosureMode.ZERO_CUMULANT
IF = ClosureMode.IGNORE_FLUCTUATION


def test_fourth_moment_closures_exact_term_maps():
    assert reduce_moment(4, ZC) == parse_poly("3*x3^2 - 2*x1^4")
    assert reduce_moment(4, IF) == parse_poly("6*x3*x1^2 - 5*x1^4")


def test_low_moments_are_multiplet_slots():
    for mode in (ZC, IF):
        assert reduce_moment(0, mode) == Poly.const(1.0)
        assert reduce_moment(1, mode) == Poly.var(xvar(1))
        assert reduce_moment(2, mode) == Poly.var(xvar(3))


def test_third_moment():
    expected = parse_poly("3*x3*x1 - 2*x1^3")
    assert reduce_moment(3, ZC) == expected
    # both modes coincide through n = 3
    assert reduce_moment(3, IF) == expected


def test_zero_cumulant_reproduces_gaussian_moments():
    rng = np.random.default_rng(31)
    for _ in range(10):
        qc = float(rng.uniform(-2, 2))
        var = float(rng.uniform(0.1, 2.0))
        point = {xvar(1): qc, xvar(3): qc * qc + var}
        for n in range(9):
            closed = reduce_moment(n, ZC).eval(point)
            exact = gaussian_moment(n, qc, var)
            assert closed == pytest.approx(exact, rel=1e-10, abs=1e-10)


def test_reduce_moment_rejects_bad_order():
    with pytest.raises(ValueError):
        reduce_moment(-1, ZC)


def test_build_F_cubic():
    V = PotentialSpec({2: 0.5, 3: 0.1})
    F = build_F(V, QUARTET_QP_Q2P2, ZC)
    x1, x3, x4 = (xvar(i) for i in (1, 3, 4))
    assert F.coefficient({x4: 1}) == pytest.approx(0.5)
    assert F.coefficient({x3: 1}) == pytest.approx(0.5)
    assert F.coefficient({x3: 1, x1: 1}) == pytest.approx(0.3)
    assert F.coefficient({x1: 3}) == pytest.approx(-0.2)
    assert len(F.terms) == 4


def test_build_F_harmonic_triplet():
    F = build_F(PotentialSpec({2: 0.5}), TRIPLET_QQPP_QP, ZC)
    assert F == parse_poly("0.5*x2 + 0.5*x1")


def test_build_F_henon_heiles_coupling():
    lam, w2 = -0.11, 1.1
    V = (
        0.5 * Poly.var(q(0)) ** 2
        + 0.5 * w2**2 * Poly.var(q(1)) ** 2
        + lam * Poly.var(q(0)) * Poly.var(q(1)) ** 2
    )
    F = build_F(V, QUARTET_QP_Q2P2.with_n_dof(2), ZC, masses=[1.0, 1.0])
    assert F.coefficient({xvar(1, 0): 1, xvar(3, 1): 1}) == pytest.approx(lam)
    assert F.coefficient({xvar(4, 0): 1}) == pytest.approx(0.5)
    assert F.coefficient({xvar(4, 1): 1}) == pytest.approx(0.5)
    assert F.coefficient({xvar(3, 1): 1}) == pytest.approx(0.5 * w2**2)


def test_build_F_reduces_to_classical_hamiltonian():
    # collapsing the fluctuations (x3 = x1^2, x4 = x2^2) recovers H(x1, x2)
    V = PotentialSpec({2: 0.5, 3: 0.1})
    F = build_F(V, QUARTET_QP_Q2P2, ZC)
    x1, x2 = Poly.var(xvar(1)), Poly.var(xvar(2))
    collapsed = F.subs({xvar(3): x1 * x1, xvar(4): x2 * x2})
    H = 0.5 * x2 * x2 + 0.5 * x1 * x1 + 0.1 * x1**3
    assert set(collapsed.terms) == set(H.terms)
    for mono, c in H.terms.items():
        assert collapsed.terms[mono] == pytest.approx(c, rel=1e-13)


def test_build_F_rejects_momentum_potentials():
    V = Poly.var(q(0)) ** 2 + Poly.var(p(0)) ** 2
    with pytest.raises(UnsupportedMomentError):
        build_F(V, QUARTET_QP_Q2P2, ZC)


def test_build_F_rejects_unknown_multiplets():
    weird = multiplet_from_strings(
        "weird", ["q", "p", "q^2", "q^3"], ["x3 - x1^2", "x4 - x1^3"]
    )
    with pytest.raises(UnsupportedMultipletError):
        build_F(PotentialSpec({2: 0.5}), weird, ZC)


def test_build_F_triplet_rejects_anharmonic():
    with pytest.raises(UnsupportedMultipletError):
        build_F(PotentialSpec({2: 0.5, 3: 0.1}), TRIPLET_QQPP_QP, ZC)


def test_effective_potential_cubic():
    V = PotentialSpec({2: 0.5, 3: 0.1})
    vc = effective_potential(V, np.sqrt(0.5))
    qv = q(0)
    assert vc.coefficient({qv: 2}) == pytest.approx(0.5, rel=1e-13)
    assert vc.coefficient({qv: 3}) == pytest.approx(0.1, rel=1e-13)
    assert vc.coefficient({qv: 1}) == pytest.approx(0.15, rel=1e-13)
    assert vc.constant_term() == pytest.approx(0.5, rel=1e-13)


def test_effective_potential_harmonic_limit():
    vc = effective_potential(PotentialSpec({2: 0.5}), np.sqrt(0.5))
    assert vc.coefficient({q(0): 2}) == pytest.approx(0.5)
    assert vc.constant_term() == pytest.approx(0.5)
    assert vc.coefficient({q(0): 1}) == 0.0


def test_effective_potential_stationary_points():
    vc = effective_potential(PotentialSpec({2: 0.5, 3: 0.1}), np.sqrt(0.5))
    qv = q(0)
    # root-find V_c'(qc) = 0 via the derivative's coefficients
    dv = vc.partial(qv)
    coeffs = [dv.coefficient({qv: 2}), dv.coefficient({qv: 1}), dv.constant_term()]
    roots = sorted(np.roots(coeffs))
    assert roots[0] == pytest.approx(-3.176, abs=1e-3)
    assert roots[1] == pytest.approx(-0.157, abs=1e-3)


def test_effective_potential_rejects_high_degree_and_bad_sigma():
    with pytest.raises(UnsupportedPotentialError):
        effective_potential(PotentialSpec({4: 1.0}), 0.5)
    with pytest.raises(ValueError):
        effective_potential(PotentialSpec({2: 0.5}), 0.0)


def test_potential_spec_validation_and_parse():
    with pytest.raises(ValueError):
        PotentialSpec({2: 1.0}, mass=0.0)
    spec = parse_potential("0.5*q^2 + 0.1*q^3")
    assert spec.coefficients == {2: 0.5, 3: 0.1}
    assert spec.degree == 3
    assert spec.to_poly() == parse_poly("0.5*q^2 + 0.1*q^3")
    with pytest.raises(ValueError):
        parse_potential("0.5*p^2")


def test_closure_mode_from_string():
    assert ClosureMode.from_string("zero-cumulant") is ZC
    assert ClosureMode.from_string("ignore_fluctuation") is IF
    with pytest.raises(ValueError):
        ClosureMode.from_string("other")
