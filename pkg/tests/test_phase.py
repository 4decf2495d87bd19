import json
import math

import numpy as np
import pytest
from hypothesis import HealthCheck, assume, given, settings
from hypothesis import strategies as st

from pucci_lane_emden.core import ProblemParams, hyperbola_q, region_flags
from pucci_lane_emden.phase import (PHASE_CSV_HEADER, POINT_NAMES, PhaseOptions,
                                    PhaseState, catalog_point, chart_radius,
                                    from_phase, integrate_phase, jacobian,
                                    jacobian_eigen, label_runs, manifold_seed,
                                    m0_spiral_real_part, partition_scan,
                                    radial_to_phase_path, rhs_phase,
                                    stationary_catalog, stationary_coordinates,
                                    to_phase, write_catalog_json,
                                    write_phase_csv)
from pucci_lane_emden.radial import RadialState, ShootOptions, shoot


def gs_state(r):
    u = (1 + r ** 2 / 3) ** -0.5
    up = -(r / 3) * (1 + r ** 2 / 3) ** -1.5
    return RadialState(r, u, up, u, up)


# ---------------------------------------------------------------- states

@pytest.mark.parametrize("cone,vals", [("K", (-1, 1, 1, 1)), ("K0", (1, -1, -1, -1)),
                                       ("K1", (1, 1, 1, -1)), ("K2", (1, -1, 1, 1))])
def test_cone_sign_checks(cone, vals):
    with pytest.raises(ValueError):
        PhaseState(0.0, *vals, cone=cone)


def test_cone_closure_allows_zeros():
    PhaseState(0.0, 0.0, 1.0, 0.0, 2.0)
    PhaseState(0.0, 1.0, -1.0, 1.0, 0.0, cone="K1")


def test_to_phase_on_ground_state(lap3):
    ps = to_phase(gs_state(math.sqrt(3)), lap3)
    np.testing.assert_allclose(ps.array, [0.5, 0.5, 1.5, 1.5], rtol=1e-14)
    assert ps.t == pytest.approx(0.5 * math.log(3)) and ps.cone == "K"


def test_to_phase_unit_x_and_products():
    par = ProblemParams(1, 2, 4, 2.0, 3.0)
    s = RadialState(1.7, 0.8, -0.8 / 1.7, 0.5, -0.3)
    ps = to_phase(s, par)
    assert ps.X == pytest.approx(1.0)
    assert ps.X * ps.Z == pytest.approx(s.r ** 2 * s.v ** 2 / s.u)
    assert ps.Y * ps.W == pytest.approx(s.r ** 2 * s.u ** 3 / s.v)


def test_to_phase_rejects_poles():
    with pytest.raises(ValueError):
        to_phase(RadialState(1.0, 1.0, 0.0, 1.0, -1.0), ProblemParams(1, 1, 3, 2, 2))


@given(st.floats(0.01, 50), st.floats(0.01, 5), st.floats(-5, -0.01),
       st.floats(0.01, 5), st.floats(-5, -0.01), st.floats(0.3, 8), st.floats(0.3, 8))
def test_phase_roundtrip(r, u, up, v, vp, p, q):
    assume(p * q > 1.05)
    par = ProblemParams(1, 2, 3, p, q)
    back = from_phase(to_phase(RadialState(r, u, up, v, vp), par), par)
    np.testing.assert_allclose([back.u, back.up, back.v, back.vp], [u, up, v, vp],
                               rtol=1e-9)


def test_m0_reconstructs_pure_power():
    par = ProblemParams(1, 1, 3, 3.0, 4.0)
    c = par.constants
    X, Y, Z, W = stationary_coordinates(par)["M0"]
    d = par.p * par.q - 1
    c3 = (X * Z) ** (1 / d) * (Y * W) ** (par.p / d)
    for t in (-3.0, 0.0, 2.5):
        s = from_phase(PhaseState(t, X, Y, Z, W), par)
        assert s.u == pytest.approx(c3 * math.exp(-c.alpha * t), rel=1e-13)


def test_from_phase_rejects_degenerate():
    with pytest.raises(ValueError):
        from_phase(PhaseState(0.0, 0.0, 1.0, 1.0, 1.0), ProblemParams(1, 1, 3, 2, 2))


# ---------------------------------------------------------------- vector field

def test_rhs_vanishes_at_n0_and_m0():
    par = ProblemParams(1, 2, 5, 3.0, 3.0)
    pts = stationary_coordinates(par)
    lam, Lam = par.lam, par.Lam
    nt = par.constants.n_plus
    a, b = par.constants.alpha, par.constants.beta
    np.testing.assert_allclose(pts["N0"], [0, 0, lam * 5, lam * 5])
    np.testing.assert_allclose(pts["M0"], [a, b, Lam * (nt - 2 - a), Lam * (nt - 2 - b)])
    assert np.abs(rhs_phase(pts["N0"], par)).max() == 0.0
    assert np.abs(rhs_phase(pts["M0"], par)).max() < 1e-14


def test_rhs_on_concavity_plane():
    par = ProblemParams(1, 2, 4, 2.0, 3.0)
    Z = par.lam * (par.N - 1)
    for X, Y, W in ((0.3, 0.2, 1.0), (1.5, 0.9, 4.0)):
        f = rhs_phase(np.array([X, Y, Z, W]), par)
        assert f[2] == pytest.approx(Z * (1 - par.p * Y), rel=1e-14)


@given(st.floats(0.01, 5), st.floats(0.01, 5), st.floats(0.01, 8), st.floats(0.01, 8))
def test_coordinate_hyperplanes_invariant(X, Y, Z, W):
    par = ProblemParams(1, 2, 3, 2.0, 2.5, "-")
    for k in range(4):
        y = np.array([X, Y, Z, W])
        y[k] = 0.0
        assert rhs_phase(y, par)[k] == 0.0


def test_zero_plane_stays_zero_along_flow():
    par = ProblemParams(1, 1, 3, 2.0, 2.0)
    o = integrate_phase(PhaseState(0.0, 0.0, 0.2, 2.5, 2.0), par, (0.0, 5.0))
    assert np.all(o.trajectory.y[:, 0] == 0.0)


# ---------------------------------------------------------------- catalog

def test_catalog_critical_laplacian(lap3):
    pts = stationary_coordinates(lap3)
    np.testing.assert_allclose(pts["M0"], [0.5] * 4, rtol=1e-15)
    np.testing.assert_array_equal(pts["A0"], [1, 1, 0, 0])
    assert [sp.name for sp in stationary_catalog(lap3)] == list(POINT_NAMES)


def test_a0_coordinates():
    par = ProblemParams(1, 2, 6, 3.0, 3.0)
    L = par.constants.n_plus - 2
    np.testing.assert_allclose(stationary_coordinates(par)["A0"], [L, L, 0, 0])


def test_p0_collides_with_a0():
    par = ProblemParams(1, 1, 3, 2.0, 3.0)  # q (N - 2) = N
    pts = stationary_coordinates(par)
    np.testing.assert_allclose(pts["P0"], pts["A0"], atol=1e-15)
    par = ProblemParams(1, 1, 3, 3.0, 2.0)
    pts = stationary_coordinates(par)
    np.testing.assert_allclose(pts["Q0"], pts["A0"], atol=1e-15)


def test_catalog_flags_points_outside_closure():
    par = ProblemParams(1, 1, 3, 1.5, 1.5)  # alpha = 4 > N - 2
    m0 = catalog_point(par, "M0")
    assert not m0.in_closure
    assert np.abs(rhs_phase(m0.coords, par)).max() < 1e-13


def test_n0_eigenvalues_exact():
    for N in (3, 4, 7):
        par = ProblemParams(1, 2, N, 2.0, 3.0)
        vals, vecs, dims = jacobian_eigen(stationary_coordinates(par)["N0"], par)
        assert sorted(vals.real) == [-N, -N, 2.0, 2.0]
        assert np.all(vals.imag == 0)
        assert dims == {"stable": 2, "unstable": 2, "center": 0}


def test_n0_unstable_plane():
    par = ProblemParams(1, 2, 4, 2.0, 3.0)
    y = stationary_coordinates(par)["N0"]
    vals, vecs, _ = jacobian_eigen(y, par)
    J = jacobian(y, par)
    iN = par.lam * par.N
    for x, yy in ((1.0, 0.0), (0.0, 1.0)):
        v = np.array([x, yy, -par.p * iN * yy / (par.N + 2), -par.q * iN * x / (par.N + 2)])
        np.testing.assert_allclose(J @ v, 2 * v, atol=1e-13)


def test_m0_imaginary_on_tilde_hyperbola():
    par = ProblemParams(1, 2, 5, 3.0, 3.0)
    nt = par.constants.n_plus
    q = hyperbola_q(3.0, (nt - 2) / nt)
    par = par.replace(q=q)
    vals, _, _ = jacobian_eigen(stationary_coordinates(par)["M0"], par)
    cplx = vals[np.abs(vals.imag) > 1e-9]
    assert cplx.size == 2
    assert np.abs(cplx.real).max() < 1e-10


def test_p0_stable_dimension_and_eigenvalues():
    par = ProblemParams(1, 1, 3, 8.0, 2.5)
    c = par.constants
    nt = c.n_plus
    sp = catalog_point(par, "P0")
    assert sp.dims["stable"] == 2
    neg = sorted(v.real for v in sp.eigenvalues if v.real < 0)
    expect = sorted([(par.p * par.q - 1) * (c.alpha - nt + 2), par.q * (nt - 2) - nt])
    np.testing.assert_allclose(neg, expect, rtol=1e-12)


def test_eigen_dims_partition():
    par = ProblemParams(1, 2, 4, 2.5, 3.5, "-")
    for sp in stationary_catalog(par):
        d = sp.dims
        assert d["stable"] + d["unstable"] + d["center"] == 4
        J = jacobian(sp.coords, par)
        for k in range(4):
            resid = J @ sp.eigenvectors[:, k] - sp.eigenvalues[k] * sp.eigenvectors[:, k]
            assert np.abs(resid).max() < 1e-9


# ---------------------------------------------------------------- seeds

def test_n0_seed_example():
    par = ProblemParams(1, 1, 3, 5.0, 5.0)
    s = manifold_seed("N0", par, np.pi / 4, radius=math.sqrt(2) * 1e-4)
    np.testing.assert_allclose(s.array, [1e-4, 1e-4, 3 - 3e-4, 3 - 3e-4], rtol=1e-12)


def test_a0_seed_example():
    par = ProblemParams(1, 2, 5, 3.0, 3.0)
    L = par.constants.n_plus - 2
    eps = 1e-5
    s = manifold_seed("A0", par, 0.0, radius=eps)
    assert s.X == pytest.approx(L - L * eps / (par.Lam * (par.p * L - 2)), rel=1e-14)
    assert s.Y == L and s.W == 0.0


@pytest.mark.parametrize("name", ["N0", "A0", "P0"])
def test_zero_offset_seed_is_the_point(name):
    par = ProblemParams(1, 1, 3, 8.0, 2.5)
    s = manifold_seed(name, par, 0.3, radius=0.0)
    np.testing.assert_allclose(s.array, stationary_coordinates(par)[name], atol=1e-15)


def test_chart_radius_rule(lap3):
    coords = stationary_coordinates(lap3)
    d = min(np.linalg.norm(v - coords["N0"]) for k, v in coords.items() if k != "N0")
    assert chart_radius(lap3, "N0") == pytest.approx(1e-3 * min(1.0, d))


# ---------------------------------------------------------------- integration

def test_diagonal_seed_stays_diagonal():
    par = ProblemParams(1, 2, 3, 3.0, 3.0, "-")
    o = integrate_phase(manifold_seed("N0", par, (1.0, 1.0)), par, (0.0, 50.0))
    y = o.trajectory.y
    np.testing.assert_array_equal(y[:, 0], y[:, 1])
    np.testing.assert_array_equal(y[:, 2], y[:, 3])


def test_critical_diagonal_converges_to_a0(lap3):
    o = integrate_phase(manifold_seed("N0", lap3, np.pi / 4), lap3, (0.0, 200.0))
    assert o.status == "converged" and o.converged_to == "A0"
    np.testing.assert_allclose(o.trajectory.y[-1], [1, 1, 0, 0], atol=1e-7)


def test_blowup_reports_component():
    par = ProblemParams(1, 1, 3, 2.0, 2.0)
    o = integrate_phase(manifold_seed("N0", par, 0.05), par, (0.0, 200.0))
    assert o.status == "blowup" and o.component == "X"
    assert o.trajectory.y[-1, 0] >= PhaseOptions().blowup


def test_phase_matches_radial_ground_state(lap3):
    o = shoot(1.0, 1.0, lap3, ShootOptions(r_max=1e3))
    t, Y = radial_to_phase_path(o.trajectory, lap3)
    r = np.exp(t)
    np.testing.assert_allclose(Y[:, 0], (r ** 2 / 3) / (1 + r ** 2 / 3), rtol=1e-7)


def test_z_decreases_on_level_lambda_n():
    par = ProblemParams(1, 2, 3, 2.0, 3.0, "-")
    iN = par.lo * par.N
    for X, Y, W in ((0.1, 0.3, 5.0), (2.0, 1.0, 1.0)):
        assert rhs_phase(np.array([X, Y, iN, W]), par)[2] < 0


def test_m0_real_part_changes_sign_across_tilde_hyperbola():
    base = ProblemParams(1, 2, 5, 3.0, 3.0)
    nt = base.constants.n_plus
    q = hyperbola_q(3.0, (nt - 2) / nt)
    below = m0_spiral_real_part(base.replace(q=0.9 * q))
    above = m0_spiral_real_part(base.replace(q=1.1 * q))
    assert below * above < 0


# ---------------------------------------------------------------- partitions

@pytest.fixture(scope="module")
def scan22():
    par = ProblemParams(1, 1, 3, 2.0, 2.0)
    return partition_scan("N0", par, n_directions=16)


def test_axis_neighbourhoods(scan22):
    assert scan22[0].label == "N1"
    assert scan22[-1].label == "N2"


def test_diagonal_symmetric_label():
    par = ProblemParams(1, 1, 3, 2.0, 2.0)
    o = integrate_phase(manifold_seed("N0", par, np.pi / 4), par, (0.0, 200.0))
    from pucci_lane_emden.phase import _label
    assert _label("N0", o, par) in ("D", "G_N0")


def test_label_runs(scan22):
    runs = label_runs(scan22)
    assert sum(b - a + 1 for _, a, b in runs) == len(scan22)
    assert all(r1[0] != r2[0] for r1, r2 in zip(runs, runs[1:]))


# ---------------------------------------------------------------- export

def test_phase_csv(tmp_path, lap3):
    o = integrate_phase(manifold_seed("N0", lap3, 0.4), lap3, (0.0, 20.0))
    write_phase_csv(tmp_path / "p.csv", o)
    lines = (tmp_path / "p.csv").read_text().splitlines()
    assert lines[0].split(",") == PHASE_CSV_HEADER
    assert len(lines) == len(o.trajectory.x) + 1
    assert lines[1].endswith(",K")


def test_catalog_json(tmp_path):
    par = ProblemParams(1, 2, 4, 3.0, 3.0)
    write_catalog_json(tmp_path / "c.json", par)
    data = json.loads((tmp_path / "c.json").read_text())
    assert [d["name"] for d in data] == list(POINT_NAMES)
    assert all(set(d) == {"name", "coords", "eigenvalues", "dims"} for d in data)
    assert all(len(d["eigenvalues"]) == 4 and len(d["eigenvalues"][0]) == 2 for d in data)


# ---------------------------------------------------------------- properties

params_A = st.tuples(st.floats(1.0, 3.0), st.integers(3, 7), st.floats(0.5, 15),
                     st.floats(0.5, 15), st.sampled_from(["+", "-"]))


@settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(params_A)
def test_catalog_is_stationary(args):
    Lam, N, p, q, op = args
    assume(p * q > 1.05)
    par = ProblemParams(1, Lam, N, p, q, op)
    assume(region_flags(par).satisfies_A)
    for sp in stationary_catalog(par):
        f = rhs_phase(sp.coords, par)
        assert np.abs(f).max() <= 1e-12 * max(1.0, np.abs(sp.coords).max() ** 2)
