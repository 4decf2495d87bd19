import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from pucci_lane_emden.core import (ProblemParams, Side, hyperbola_q,
                                   hyperbola_side, pucci_scalar, rd_threshold,
                                   region_flags, rescale, scaled_center)

exps = st.floats(0.2, 40.0)
ratio = st.floats(1.0, 6.0)
dims = st.integers(3, 9)
ops = st.sampled_from(["+", "-"])


def make(lam, Lam, N, p, q, op="+"):
    return ProblemParams(lam, Lam, N, p, q, op)


# ---------------------------------------------------------------- validation

@pytest.mark.parametrize("kw", [
    dict(lam=2.0, Lam=1.0), dict(lam=0.0), dict(N=2), dict(N=3.5),
    dict(p=-1.0), dict(p=0.5, q=1.0), dict(p=1.0, q=1.0), dict(op="*"),
    dict(q=float("nan")),
])
def test_invalid_parameters_rejected(kw):
    base = dict(lam=1.0, Lam=1.0, N=3, p=2.0, q=2.0, op="+")
    base.update(kw)
    with pytest.raises(ValueError):
        ProblemParams(**base)


def test_superlinear_message():
    with pytest.raises(ValueError, match="p\\*q > 1"):
        ProblemParams(1, 1, 3, 0.5, 1.0)


def test_operator_aliases():
    assert make(1, 2, 3, 2, 2, "minus").op == "-"
    assert make(1, 2, 3, 2, 2, "M+").op == "+"


def test_params_are_hashable_values():
    a, b = make(1, 2, 3, 2, 2), make(1.0, 2.0, 3, 2.0, 2.0)
    assert a == b and hash(a) == hash(b)
    assert a.replace(p=3.0).p == 3.0 and a.p == 2.0


# ---------------------------------------------------------------- constants

def test_constants_laplacian_cubic():
    c = make(1, 1, 3, 3, 3).constants
    assert (c.alpha, c.beta, c.n_plus, c.n_minus) == (1.0, 1.0, 3.0, 3.0)


def test_dimension_like_numbers():
    c = make(1, 2, 5, 2, 3).constants
    assert c.n_plus == 3.0 and c.n_minus == 9.0
    assert c.n_tilde == 3.0
    assert make(1, 2, 5, 2, 3, "-").constants.n_tilde == 9.0


def test_serrin_and_sobolev_exponents():
    c = make(1, 2, 5, 2, 3).constants
    assert c.p_serrin_plus == 3.0 and c.p_serrin_minus == 9.0 / 7.0
    assert c.p_laplace == 7.0 / 3.0
    # no finite Serrin exponent when the effective dimension is at most two
    assert math.isinf(make(1, 2, 3, 2, 3).constants.p_serrin_plus)


@given(st.floats(0.1, 5), ratio, dims, exps, exps)
def test_constant_invariants(lam, r, N, p, q):
    assume(p * q > 1.01)
    c = make(lam, lam * r, N, p, q).constants
    assert c.alpha > 0 and c.beta > 0
    assert math.isclose(c.alpha, 2 * (p + 1) / (p * q - 1))
    assert c.n_plus <= N + 1e-12 <= c.n_minus + 2e-12


@given(st.floats(0.1, 5), dims, exps, exps)
def test_equal_constants_collapse_dimensions(lam, N, p, q):
    assume(p * q > 1.01)
    c = make(lam, lam, N, p, q).constants
    assert c.n_plus == c.n_minus == N


# ---------------------------------------------------------------- pucci scalars

def test_pucci_scalar_examples():
    assert pucci_scalar(-2.0, 1.0, 2.0, "+") == (-2.0, -2.0)
    assert pucci_scalar(3.0, 1.0, 2.0, "+") == (6.0, 1.5)
    assert pucci_scalar(0.0, 1.0, 2.0, "-") == (0.0, 0.0)


def test_pucci_scalar_vectorised():
    m, M = pucci_scalar(np.array([-1.0, 2.0]), 1.0, 3.0, "-")
    np.testing.assert_array_equal(m, [-3.0, 2.0])
    np.testing.assert_array_equal(M, [-1.0 / 3.0, 2.0])


@given(st.floats(-1e6, 1e6), st.floats(0.1, 10), ratio, ops)
def test_pucci_inverse_pairs(s, lam, r, op):
    Lam = lam * r
    m, M = pucci_scalar(s, lam, Lam, op)
    assert math.isclose(pucci_scalar(m, lam, Lam, op)[1], s, rel_tol=1e-14,
                        abs_tol=1e-300)
    assert math.isclose(pucci_scalar(M, lam, Lam, op)[0], s, rel_tol=1e-14,
                        abs_tol=1e-300)


@given(st.floats(-1e6, 1e6), st.floats(0.1, 10), ratio)
def test_maximal_dominates_minimal(s, lam, r):
    Lam = lam * r
    mp = pucci_scalar(s, lam, Lam, "+")[0]
    mm = pucci_scalar(s, lam, Lam, "-")[0]
    assert mp >= mm
    if mp == mm:
        assert s == 0 or lam == Lam


# ---------------------------------------------------------------- regions

def test_region_examples():
    f = region_flags(make(1, 1, 3, 5, 5))
    assert f.H is Side.ON
    f = region_flags(make(1, 1, 3, 2, 2))
    assert f.H is Side.BELOW and f.in_Rd and not f.in_Ru
    f = region_flags(make(1, 1, 3, 7, 7))
    assert f.H is Side.ABOVE and f.in_Ru and not f.in_Rd


def test_hyperbola_band():
    rhs = 1.0 / 3.0
    q = hyperbola_q(3.0, rhs)
    assert q == pytest.approx(11.0)
    assert hyperbola_side(3.0, q, rhs) is Side.ON
    assert hyperbola_side(3.0, q * (1 + 1e-9), rhs) is Side.ABOVE
    assert hyperbola_side(3.0, q * (1 - 1e-9), rhs) is Side.BELOW
    assert math.isinf(hyperbola_q(0.4, 0.5))


def test_flags_as_dict_is_plain():
    d = region_flags(make(1, 2, 5, 3, 3)).as_dict()
    assert d["H"] in ("below", "on", "above") and isinstance(d["in_Rd"], bool)


@given(st.floats(0.2, 3), ratio, dims, exps, exps, ops)
def test_rd_and_ru_exclusive(lam, r, N, p, q, op):
    assume(p * q > 1.01)
    f = region_flags(make(lam, lam * r, N, p, q, op))
    assert not (f.in_Rd and f.in_Ru)


@given(st.floats(0.2, 3), ratio, dims, exps, exps, ops)
def test_neumann_region_inside_rd(lam, r, N, p, q, op):
    assume(p * q > 1.01)
    f = region_flags(make(lam, lam * r, N, p, q, op))
    if f.in_RD:
        assert f.in_Rd


@given(dims, exps, exps)
def test_equal_constants_regions_follow_h(N, p, q):
    assume(p * q > 1.01)
    f = region_flags(make(1, 1, N, p, q))
    assume(f.H is not Side.ON)
    assert f.in_Rd == (f.H is Side.BELOW)
    assert f.in_Ru == (f.H is Side.ABOVE)
    assert f.H_tilde is f.H is f.H_upper is f.H_lower


@given(dims, exps, exps, ops, ratio)
def test_alpha_beta_reproduces_hyperbola(N, p, q, op, r):
    assume(p * q > 1.01)
    par = make(1, r, N, p, q, op)
    c = par.constants
    for n, side in ((N, region_flags(par).H),
                    (c.n_tilde, region_flags(par).H_tilde)):
        gap = c.alpha + c.beta - (n - 2)
        assume(abs(gap) > 1e-8 * max(1.0, n))
        assert (side is Side.ABOVE) == (gap < 0)


@pytest.mark.parametrize("lam,Lam,N,op", [(1, 1, 3, "+"), (1, 2, 5, "+"),
                                          (1, 2, 3, "-"), (1, 3, 6, "-")])
@pytest.mark.parametrize("q", [5.0, 8.0, 20.0])
def test_increasing_p_leaves_rd_and_enters_ru(lam, Lam, N, op, q):
    ps = np.geomspace(1.01 / q * 1.05, 1e4, 400)
    flags = [region_flags(make(lam, Lam, N, p, q, op)) for p in ps]
    rd = np.array([f.in_Rd for f in flags])
    ru = np.array([f.in_Ru for f in flags])
    assert ru[-1]
    # R_d is an initial run and R_u a final run of the p sweep
    k_rd, k_ru = np.argmin(rd), np.argmax(ru)
    assert not rd[k_rd:].any() and ru[k_ru:].all() and k_rd <= k_ru


def test_rd_threshold_forms():
    par = make(1, 2, 5, 3, 3)
    c = par.constants
    assert rd_threshold(par) == pytest.approx(2 * (10 - c.n_plus - 2) / c.n_plus)
    par = make(1, 2, 5, 3, 3, "-")
    c = par.constants
    assert rd_threshold(par) == pytest.approx(2 * (2 * c.n_minus - 7) / c.n_minus)
    # with equal constants the threshold is the hyperbola H itself
    assert rd_threshold(make(1, 1, 4, 3, 3)) == pytest.approx(0.5)


# ---------------------------------------------------------------- scaling

def test_rescale_identity():
    out = rescale(0.3, 0.7, 2.5, 1.0, make(1, 1, 3, 2, 3).constants)
    assert tuple(map(float, out)) == (0.3, 0.7, 2.5)


def test_rescale_ground_state_closed_form():
    c = make(1, 1, 3, 5, 5).constants
    r = np.linspace(0.0, 20.0, 11)
    u = (1 + r ** 2 / 3) ** -0.5
    ug, _, rg = rescale(u, u, r, 2.0, c)
    np.testing.assert_allclose(ug, math.sqrt(2) * (1 + 4 * rg ** 2 / 3) ** -0.5,
                               rtol=1e-14)


@given(st.floats(0.1, 10), st.floats(0.1, 10), st.floats(0.01, 100))
def test_rescale_composes(g1, g2, r):
    c = make(1, 2, 4, 2.0, 3.5).constants
    a = rescale(*rescale(1.3, 0.4, r, g1, c)[:2], rescale(1.3, 0.4, r, g1, c)[2],
                g2, c)
    b = rescale(1.3, 0.4, r, g1 * g2, c)
    np.testing.assert_allclose(np.array(a, float), np.array(b, float), rtol=1e-12)


def test_rescale_rejects_nonpositive_gamma():
    with pytest.raises(ValueError):
        rescale(1.0, 1.0, 1.0, 0.0, make(1, 1, 3, 2, 2).constants)


def test_scaled_center():
    c = make(1, 1, 3, 2, 3).constants
    xi, eta = scaled_center(1.0, 2.0, 2.0, c)
    assert xi == 2.0 ** c.alpha and eta == 2.0 * 2.0 ** c.beta
