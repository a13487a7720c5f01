import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from tdglobal import gcp, presets


@st.composite
def ternary(draw, margin=0.0):
    s1 = draw(st.floats(margin, 1.0 - margin))
    s3 = draw(st.floats(0.0, 1.0 - s1))
    return s1, s3


def test_lin_frozen_value(lin_ctx):
    assert gcp.pcg(lin_ctx, 0.5, 0.25, 1e7) == pytest.approx(oracles.LIN_AT_HALF_QUARTER, rel=1e-9)


def test_corners(lin_ctx):
    assert gcp.pcg(lin_ctx, 1.0, 0.0, 1e7) == 0.0
    assert gcp.pcg(lin_ctx, 0.0, 0.0, 1e7) == pytest.approx(-oracles.A / 2, rel=1e-9)
    assert gcp.pcg(lin_ctx, 0.0, 1.0, 1e7) == pytest.approx((oracles.B - oracles.A) / 2, rel=1e-9)


@settings(max_examples=30, deadline=None)
@given(ternary())
def test_lin_matches_closed_form(lin_ctx, s):
    val = gcp.pcg(lin_ctx, *s, 1e7)
    assert val == pytest.approx(oracles.lin_closed_form(*s), abs=1e-6)


def test_vectorised_lin(lin_ctx):
    rng = np.random.default_rng(4)
    s1 = rng.random(300)
    s3 = rng.random(300) * (1 - s1)
    got = gcp.pcg(lin_ctx, s1, s3, np.full(300, 1e7))
    assert np.max(np.abs(got - oracles.lin_closed_form(s1, s3))) < 1e-6


@pytest.mark.parametrize("s", [(0.3, 0.4), (0.1, 0.8), (0.6, 0.2), (0.0, 0.5)])
def test_gas_against_rk4_oracle(gas_ctx, s):
    ref = oracles.beta_oracle(*s, 1e7, a=0.0, gas_compressible=True)
    assert gcp.pcg(gas_ctx, *s, 1e7) == pytest.approx(ref, rel=1e-8)


@pytest.mark.parametrize("s", [(0.3, 0.4), (0.1, 0.8)])
def test_gas_slope_against_differenced_oracle(gas_ctx, s):
    ref = oracles.dbeta_dp_oracle(*s, 1e7, a=0.0, gas_compressible=True)
    assert gcp.dpcg_dp(gas_ctx, *s, 1e7) == pytest.approx(ref, rel=1e-6)


def test_gamma_against_quadrature(gas_ctx):
    s1 = np.array([0.2, 0.5, 0.05])
    s3 = np.array([0.3, 0.4, 0.9])
    p = np.array([9.2e6, 1e7, 1.08e7])
    a = gcp.dpcg_dp(gas_ctx, s1, s3, p)
    b = gcp.dpcg_dp_quadrature(gas_ctx, s1, s3, p)
    assert np.allclose(a, b, rtol=1e-6)


def test_incompressible_slope_is_zero(lin_ctx):
    assert gcp.dpcg_dp(lin_ctx, 0.3, 0.3, 1e7) == pytest.approx(0.0, abs=1e-12)


def test_path_independence_for_td_data(lin_ctx, gas_ctx):
    s1, s3 = np.array([0.3, 0.1]), np.array([0.4, 0.6])
    for ctx in (lin_ctx, gas_ctx):
        spread = gcp.td_residual_paths(ctx, s1, s3, np.full(2, 1e7), n_paths=5)
        assert np.all(spread < 1e-6 * 3e4)


def test_path_dependence_detected_for_corey():
    ctx = gcp.GcpContext(presets.get_preset("COREY").flow, window=presets.WINDOW)
    lower, upper = gcp.extreme_paths(0.4, 0.3)
    diff = abs(gcp.integrate_beta(ctx, lower, 1e7) - gcp.integrate_beta(ctx, upper, 1e7))
    assert diff > 1e-3 * 3e4
    assert not gcp.td_probe(ctx)["td"]


def test_cross_residual_small_for_lin(lin_ctx):
    r = gcp.td_residual_cross(lin_ctx, 0.3, 0.3, 1e7)
    assert abs(r) < 1e-4


def test_path_refinement_keeps_geometry():
    path = gcp.SaturationPath([[0.5, 0.0], [0.2, 0.3]])
    pts = path.refined(8)
    assert len(pts) == 9
    assert np.allclose(pts[0], (1, 0)) and np.allclose(pts[-1], (0.2, 0.3))


def test_random_paths_are_monotone():
    rng = np.random.default_rng(1)
    for _ in range(20):
        w = gcp.random_monotone_path(rng, 0.2, 0.5).waypoints
        assert np.all(np.diff(w[:, 0]) <= 1e-15) and np.all(np.diff(w[:, 1]) >= -1e-15)


@pytest.mark.parametrize("name", ["LIN", "GAS", "WOG"])
def test_round_trip(name):
    ctx = gcp.GcpContext(presets.get_preset(name).flow, window=presets.WINDOW)
    rng = np.random.default_rng(2)
    s1 = rng.random(40)
    s3 = rng.random(40) * (1 - s1)
    p = rng.uniform(9.2e6, 1.08e7, 40)
    p2 = gcp.oil_from_global(ctx, s1, s3, p)
    res = gcp.global_from_oil(ctx, s1, s3, p2)
    assert res.converged
    assert np.max(np.abs(res.p - p)) < 1e-6


def test_phase_pressure_ordering(gas_ctx):
    rep = gcp.phase_pressure_bounds_check(gas_ctx, 0.3, 0.3, 1e7)
    assert rep["ok"]


def test_wog_stability_flags():
    ctx = gcp.GcpContext(presets.get_preset("WOG").flow, window=presets.WINDOW)
    rep = gcp.stability_report(ctx, n_side=12)
    assert rep.slope_bounded and rep.mobility_slopes_ordered and rep.slope_in_unit_interval
    on_edge = rep.s3 == 0.0
    assert np.max(np.abs(rep.dpdp[:, on_edge])) < 1e-12


def test_waterc_breaks_slope_ordering():
    ctx = gcp.GcpContext(presets.get_preset("WATERC").flow, window=presets.WINDOW)
    assert not gcp.stability_report(ctx, n_side=8).mobility_slopes_ordered


def test_field_interpolates_gas(gas_ctx):
    fld = gcp.build_field(gas_ctx, n_s=17)
    rng = np.random.default_rng(3)
    s1 = rng.random(50)
    s3 = rng.random(50) * (1 - s1)
    p = rng.uniform(9e6, 1.1e7, 50)
    err = np.abs(fld(s1, s3, p) - gcp.pcg(gas_ctx, s1, s3, p))
    assert np.max(err) < 10.0
    assert fld.stable


def test_field_refuses_non_td_data():
    ctx = gcp.GcpContext(presets.get_preset("COREY").flow, window=presets.WINDOW)
    with pytest.raises(gcp.TDViolation):
        gcp.build_field(ctx, n_s=5)


def test_field_csv(tmp_path, lin_ctx):
    fld = gcp.build_field(lin_ctx, n_s=5)
    fld.to_csv(tmp_path / "f.csv")
    head = (tmp_path / "f.csv").read_text().splitlines()
    assert head[0] == "s1,s3,p,pcg,dpcg_dp"
    assert len(head) == 1 + 15 * 5
