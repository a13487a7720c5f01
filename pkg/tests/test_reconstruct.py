import numpy as np
import pytest

from tdglobal import gcp, presets, reconstruct as rc

P_NODES = presets.WINDOW.nodes()[::2]


@pytest.fixture(scope="module")
def lin_recon():
    lin = presets.get_preset("LIN")
    return rc.reconstruct(lin.dataset, lin.flow.phases, P_NODES, n=8)


def test_nu_from_gradient_basic():
    curves = presets.linear_curves()
    nu = rc.nu_from_gradient(np.array([3e3]), np.array([8e3]), curves, np.array([0.3]), np.array([0.4]))
    assert nu.nu1[0] == pytest.approx(0.3) and nu.nu3[0] == pytest.approx(0.4)
    assert nu.nu2[0] == pytest.approx(0.3)
    assert nu.ok


def test_nu_out_of_range_is_reported():
    curves = presets.linear_curves()
    nu = rc.nu_from_gradient(np.array([1.2e4]), np.array([0.0]), curves, np.array([0.3]), np.array([0.4]))
    assert nu.out_of_range == 1 and not nu.ok


def test_nu_slightly_above_one_is_clamped():
    curves = presets.linear_curves()
    nu = rc.nu_from_gradient(np.array([1.00005e4]), np.array([0.0]), curves, np.array([0.3]), np.array([0.0]))
    assert nu.clamped == 1 and nu.nu1[0] == 1.0


def test_flat_capillary_curve_flags_undefined():
    curves = presets.linear_curves(0.0, 2e4)
    nu = rc.nu_from_gradient(np.array([0.0]), np.array([2e3]), curves, np.array([0.3]), np.array([0.1]))
    assert nu.undefined[0] and not nu.singular[0]
    nu = rc.nu_from_gradient(np.array([50.0]), np.array([2e3]), curves, np.array([0.3]), np.array([0.1]))
    assert nu.singular[0]


def test_lin_interior_kr_is_linear(lin_recon):
    rng = np.random.default_rng(0)
    s1 = rng.random(50)
    s3 = rng.random(50) * (1 - s1)
    k1, k2, k3 = lin_recon.kr_at(s1, s3, 1e7)
    assert np.allclose(k1, s1, atol=1e-8)
    assert np.allclose(k3, s3, atol=1e-8)
    assert np.allclose(k2, 1 - s1 - s3, atol=1e-8)


def test_boundary_match(lin_recon):
    rep = rc.verify_boundary_match(lin_recon)
    assert rep["passed"]
    assert all(e["absent_phase_max"] < 1e-6 for e in rep["edges"].values())


def test_reconstructed_model_is_td(lin_recon):
    assert rc.verify_td(lin_recon, n_probes=4, n_paths=4)["passed"]


def test_export(tmp_path, lin_recon):
    lin_recon.export_csv(tmp_path / "k.csv", n_side=4)
    lines = (tmp_path / "k.csv").read_text().splitlines()
    assert lines[0] == "s1,s3,p,kr1,kr2,kr3,nu1,nu3"
    assert len(lines) == 1 + 10 * len(P_NODES)


def test_incompatible_traces_refused():
    lin = presets.get_preset("LIN")
    with pytest.raises(Exception) as info:
        rc.reconstruct(lin.dataset.scaled("13", 1, 1.1), lin.flow.phases, P_NODES, n=4)
    assert "mismatch" in str(info.value)


def _fields():
    S1 = lambda x: 0.35 + 0.2 * np.sin(2 * np.pi * x)  # noqa: E731
    S3 = lambda x: 0.25 + 0.15 * np.cos(3 * x)  # noqa: E731
    P = lambda x: 1e7 + 4e5 * (0.5 - x) + 2e4 * np.sin(5 * x)  # noqa: E731
    return S1, S3, P, (np.arange(64) + 0.5) / 64


@pytest.mark.parametrize("name", ["LIN", "GAS"])
@pytest.mark.parametrize("gravity", [0.0, 9.81])
def test_flux_identity(name, gravity):
    ctx = gcp.GcpContext(presets.get_preset(name).flow, window=presets.WINDOW)
    S1, S3, P, x = _fields()
    rep = rc.flux_identity_check(ctx, S1, S3, P, x, gravity=gravity, dzdx=1.0)
    assert rep["max_rel_diff"] < 1e-8


def test_flux_identity_sees_wrong_potential():
    ctx = gcp.GcpContext(presets.get_preset("LIN").flow, window=presets.WINDOW)
    S1, S3, P, x = _fields()

    def wrong(a, b, c):
        v, s = gcp.pcg_and_slope(ctx, a, b, c)
        return 1.05 * v, s

    assert rc.flux_identity_check(ctx, S1, S3, P, x, evaluator=wrong)["max_rel_diff"] > 1e-4

