import numpy as np
import pytest

from mfmls.geometry import presets
from mfmls.geometry.cloud import BallRestriction, density_stats, restrict, save_csv
from mfmls.geometry.sampling import sample_quasi_uniform


def test_sphere_card_and_residuals():
    s = presets.sphere()
    cloud = sample_quasi_uniform(s, 100, seed=7)
    assert abs(len(cloud) - 100) <= 10
    assert np.abs(s.eval(cloud.points)).max() <= 1e-10 * s.coeff_scale


def test_single_point_request():
    s = presets.sphere()
    cloud = sample_quasi_uniform(s, 1, seed=0)
    assert len(cloud) == 1
    assert cloud.separation == np.inf
    assert abs(s.eval(cloud.points)[0]) < 1e-10


def test_deterministic_per_seed():
    s = presets.torus()
    a = sample_quasi_uniform(s, 300, seed=11)
    b = sample_quasi_uniform(s, 300, seed=11)
    c = sample_quasi_uniform(s, 300, seed=12)
    np.testing.assert_array_equal(a.points, b.points)
    assert a.points.shape != c.points.shape or not np.array_equal(a.points, c.points)


def test_deterministic_csv_bytes(tmp_path):
    s = presets.sphere()
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    save_csv(sample_quasi_uniform(s, 150, seed=3), p1)
    save_csv(sample_quasi_uniform(s, 150, seed=3), p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_mesh_ratio_bound():
    s = presets.cyclide()
    cloud = sample_quasi_uniform(s, 1500, seed=5)
    assert abs(len(cloud) - 1500) <= 150
    # stats attached by the sampler
    assert cloud.fill_distance is not None and cloud.separation is not None
    assert cloud.fill_distance / cloud.separation <= 4.0
    # independent probe-based check
    rng = np.random.default_rng(99)
    lo, hi = s.bbox
    raw = rng.uniform(lo, hi, size=(60000, 3))
    raw = raw[np.abs(s.eval(raw)) < 0.05 * s.coeff_scale]
    from mfmls.geometry.surface import project_points
    probes, ok = project_points(s, raw, on_fail="mask")
    h, q = density_stats(cloud, probes[ok])
    assert h / q <= 4.0


def test_cyclide_residuals_near_floor():
    s = presets.cyclide()
    cloud = sample_quasi_uniform(s, 2000, seed=1)
    res = np.abs(s.eval_longdouble(cloud.points)).astype(float)
    assert res.max() < 1e-12 * s.coeff_scale
    assert np.median(res) < 5e-14


def test_patch_direct_sampling():
    s = presets.cyclide()
    ball = BallRestriction(presets.cyclide_patch_center(), 1.0)
    cloud = sample_quasi_uniform(s, 800, seed=21, within=ball)
    assert abs(len(cloud) - 800) <= 80
    assert ball.contains(cloud.points).all()
    assert np.abs(s.eval(cloud.points)).max() <= 1e-10 * s.coeff_scale


@pytest.mark.slow
def test_restrict_global_cloud_to_patch_cardinality():
    # A 2^14-point cyclide cloud cut by the unit ball at the patch anchor
    # keeps roughly 706 points (+-15%).
    s = presets.cyclide()
    cloud = sample_quasi_uniform(s, 2**14, seed=4)
    ball = BallRestriction(presets.cyclide_patch_center(), 1.0)
    sub = restrict(cloud, ball)
    assert abs(len(sub) - 706) <= 0.15 * 706


def test_invalid_requests():
    s = presets.sphere()
    with pytest.raises(ValueError):
        sample_quasi_uniform(s, 0, seed=1)
    with pytest.raises(ValueError):
        sample_quasi_uniform(s, 100, seed=1, oversample=2)
