import numpy as np
import pytest

import oracles
from tdglobal import boundary as bd, presets
from tdglobal.mesh import edge_point

P_NODES = presets.WINDOW.nodes()


@pytest.fixture(scope="module")
def lin_profiles(lin):
    return bd.edge_beta(lin.dataset, lin.flow.phases, P_NODES)


def test_lin_corner_values(lin_profiles):
    ends = lin_profiles.end_values()
    assert np.allclose(ends["12"], -oracles.A / 2, rtol=1e-10)
    assert np.allclose(ends["23"], (oracles.B - oracles.A) / 2, rtol=1e-10)
    assert np.allclose(ends["13"], (oracles.B - oracles.A) / 2, rtol=1e-10)


@pytest.mark.parametrize("edge", ["12", "13", "23"])
def test_lin_traces_match_closed_form(lin_profiles, edge):
    t = np.linspace(0, 1, 41)
    s1, s3 = edge_point(edge, t)
    assert np.allclose(lin_profiles.beta(edge, t, P_NODES[2]), oracles.lin_closed_form(s1, s3), atol=1e-6)


@pytest.mark.parametrize("edge", ["12", "13", "23"])
def test_neumann_matches_closed_form(lin, lin_profiles, edge):
    t = np.linspace(0.05, 0.95, 9)
    g = bd.neumann_pcg(lin.dataset, lin_profiles, edge, t, P_NODES[0])
    assert np.allclose(g, oracles.lin_normal(edge, t), rtol=1e-8, atol=1e-6)


def test_lin_is_compatible(lin, lin_profiles):
    rep = bd.compatibility_residual(lin.dataset, lin.flow.phases, P_NODES, profiles=lin_profiles)
    assert rep.passed
    assert rep.max_abs < 1e-8 * 3e4
    form = rep.integral[0]
    assert abs(form["residual"]) < 1e-8 * 3e4


def test_integral_form_agrees_with_ode(lin):
    ds = lin.dataset.scaled("13", 1, 1.1)
    ode = bd.edge_beta(ds, lin.flow.phases, [1e7]).residual[0]
    quad = bd.integral_form(ds, lin.flow.phases, 1e7)["residual"]
    assert ode == pytest.approx(quad, rel=1e-8)
    assert abs(ode) > 1e-3 * 3e4


def test_perturbed_data_rejected(lin):
    ds = lin.dataset.scaled("13", 1, 1.1)
    prof = bd.edge_beta(ds, lin.flow.phases, P_NODES)
    assert not bd.compatibility_residual(ds, lin.flow.phases, P_NODES, profiles=prof).passed
    with pytest.raises(bd.CompatibilityError):
        bd.dirichlet_pcg(prof, "12", 0.5, P_NODES[0])


def test_gas_edges_match_interior_solver(gas, gas_ctx):
    from tdglobal import gcp

    prof = bd.edge_beta(gas.dataset, gas.flow.phases, [1e7])
    t = np.linspace(0, 1, 11)
    for edge in ("12", "13", "23"):
        s1, s3 = edge_point(edge, t)
        assert np.allclose(prof.beta(edge, t, 1e7), gcp.pcg(gas_ctx, s1, s3, np.full_like(t, 1e7)), atol=1e-5)


def test_wog_traces_incompatible():
    wog = presets.get_preset("WOG")
    rep = bd.compatibility_residual(wog.dataset, wog.flow.phases, P_NODES)
    assert not rep.passed
    assert rep.to_dict()["nodes"][0]["p"] == P_NODES[0]


def test_boundary_mobility_of_lin(lin, lin_profiles):
    d = bd.dirichlet_mobility(lin.dataset, lin_profiles, "13", np.linspace(0, 1, 5), P_NODES[1])
    assert np.allclose(d, 1.0)


def test_export(tmp_path, lin, lin_profiles):
    bd.export_profiles(lin.dataset, lin_profiles, tmp_path / "b.csv", n_t=5)
    lines = (tmp_path / "b.csv").read_text().splitlines()
    assert lines[0] == "edge,t,p,beta,neumann,d_data"
    assert len(lines) == 1 + 5 * 3 * len(P_NODES)
