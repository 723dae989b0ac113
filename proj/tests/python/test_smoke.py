import json
import math

import pytest

import conelab as cl


def circle_setup(k=1.0, r=1.0, res=96):
    cone = cl.SolidCone.full_sphere(2)
    density = cl.HomogeneousDensity(k, cl.DensityProfile.radial())
    surface = cl.make_cap(cone, r, res)
    return cone, density, surface


def test_version():
    assert cl.__version__ == "0.1.0"


def test_circle_weighted_area():
    cone, density, surface = circle_setup(k=0.0)
    assert cl.weighted_area(surface, density, cone) == pytest.approx(2 * math.pi, rel=1e-12)


def test_circle_minkowski_stationary():
    cone, density, surface = circle_setup(k=1.0)
    rep = cl.minkowski(surface, density, cone)
    assert rep.stationary
    assert rep.Hf_mean == pytest.approx(2.0, abs=1e-10)
    assert abs(rep.residual_integral) <= 1e-10 * rep.area
    assert abs(rep.identity_gap) <= 1e-10 * rep.area


def test_circle_spectrum_matches_fourier():
    cone, density, surface = circle_setup(k=2.0)
    rep = cl.stability_report(surface, density, cone)
    assert rep.stationary
    assert rep.lambda_min_meanzero == pytest.approx(-2.0, abs=1e-6)
    assert rep.lambda_min_all == pytest.approx(-3.0, abs=1e-6)


def test_dilation_variation():
    cone, density, surface = circle_setup(k=1.0)
    d = cl.run_variation(surface, density, cone, kind="dilation")
    assert d.richardson_ok
    assert d.area_first == pytest.approx(d.area_first_expected, rel=1e-8)
    assert d.volume_first == pytest.approx(d.volume_first_expected, rel=1e-8)


def test_critical_degree_raises():
    cone, density, surface = circle_setup(k=-2.0)
    with pytest.raises(cl.ConelabError):
        cl.oriented_volume(surface, density, cone)


def test_run_config_roundtrip():
    config = {
        "ambient_dim": 2,
        "cone": {"type": "full_sphere"},
        "density": {"family": "radial", "k": 1.0},
        "surface": {"type": "cap", "radius": 1.0, "resolution": 64},
        "analyses": [{"type": "geometry"}, {"type": "minkowski"}],
    }
    text = json.dumps(config)
    canonical = cl.canonical_config(text)
    assert cl.canonical_config(canonical) == canonical

    ok, report_json, artifacts = cl.run_config(text, "verify")
    assert ok
    report = json.loads(report_json)
    assert report["verdict"] is True
    assert [a["type"] for a in report["analyses"]] == ["geometry", "minkowski"]
    assert artifacts == []


def test_unknown_key_rejected():
    config = {"ambient_dim": 2, "unknown_field": 1}
    with pytest.raises(cl.ConelabError):
        cl.canonical_config(json.dumps(config))
