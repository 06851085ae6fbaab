import numpy as np
import pytest

from mfmls import polybasis
from mfmls.errors import GradientTooSmall, ProjectionDiverged
from mfmls.geometry import presets
from mfmls.geometry.surface import AlgebraicSurface, project_to_surface


# ---------------------------------------------------------------------------
# construction / evaluation
# ---------------------------------------------------------------------------

def test_sphere_vanishes_on_unit_vectors():
    s = presets.sphere()
    pts = np.array([[1.0, 0, 0], [0, -1.0, 0], [0, 0, 1.0]])
    np.testing.assert_allclose(s.eval(pts), 0.0, atol=1e-15)


def test_torus_contains_outer_equator_point():
    s = presets.torus()  # R=1, r=1/3
    assert abs(s.eval(np.array([[1 + 1 / 3, 0.0, 0.0]]))[0]) < 1e-12


def test_cyclide_patch_center_is_on_surface():
    s = presets.cyclide()  # a=2, b=1.9, d=1
    center = presets.cyclide_patch_center()
    np.testing.assert_allclose(center, [0.0, np.sqrt(0.61), 0.0])
    assert abs(s.eval(center[None, :])[0]) < 1e-12


def test_cyclide_coefficient_scale():
    # Expanded quartic: the largest coefficient magnitude comes from the x^2
    # term, 2*(b^2 - d^2) - 4a^2 + ... worked out below by brute evaluation.
    s = presets.cyclide()
    assert s.degree == 4
    assert 10.0 < s.coeff_scale < 12.0


def test_surface_rejects_zero_polynomial():
    with pytest.raises(ValueError):
        AlgebraicSurface.from_coefficients(3, {(0, 0, 0): 0.0}, bbox=[[-1, 1]] * 3)


def test_eval_matches_direct_expansion():
    # quartic torus identity: (|x|^2 + R^2 - r^2)^2 - 4 R^2 (x^2 + y^2) == 0
    # off-surface as well, so compare against the unexpanded form at random pts.
    R, r = 1.0, 1 / 3
    s = presets.torus(R, r)
    rng = np.random.default_rng(3)
    pts = rng.uniform(-1.5, 1.5, size=(50, 3))
    direct = (np.sum(pts**2, axis=1) + R**2 - r**2) ** 2 - 4 * R**2 * (
        pts[:, 0] ** 2 + pts[:, 1] ** 2
    )
    np.testing.assert_allclose(s.eval(pts), direct, rtol=1e-12, atol=1e-12)


def test_gradient_matches_finite_differences():
    s = presets.cyclide()
    rng = np.random.default_rng(11)
    pts = rng.uniform(-2, 2, size=(20, 3))
    grad = s.grad(pts)
    h = 1e-6
    for j in range(3):
        e = np.zeros(3)
        e[j] = h
        fd = (s.eval(pts + e) - s.eval(pts - e)) / (2 * h)
        np.testing.assert_allclose(grad[:, j], fd, rtol=1e-5, atol=1e-5)


def test_bbox_contains_parametric_samples():
    # The cyclide bbox must cover the whole surface or the sampler would
    # silently miss regions. Check against a dense parametric sweep.
    a, b, d = 2.0, 1.9, 1.0
    c = np.sqrt(a * a - b * b)
    s = presets.cyclide(a, b, d)
    u, v = np.meshgrid(np.linspace(0, 2 * np.pi, 400), np.linspace(0, 2 * np.pi, 400))
    den = a - c * np.cos(u) * np.cos(v)
    x = -(d * (c - a * np.cos(u) * np.cos(v)) + b * b * np.cos(u)) / den
    y = b * np.sin(u) * (a - d * np.cos(v)) / den
    z = b * np.sin(v) * (c * np.cos(u) - d) / den
    pts = np.stack([x.ravel(), y.ravel(), z.ravel()], axis=1)
    assert np.abs(s.eval(pts)).max() < 1e-9  # parametrization sanity
    lo, hi = s.bbox
    assert np.all(pts >= lo - 1e-9) and np.all(pts <= hi + 1e-9)


# ---------------------------------------------------------------------------
# Newton projection
# ---------------------------------------------------------------------------

def test_projection_on_sphere_is_radial():
    s = presets.sphere()
    rng = np.random.default_rng(5)
    x0 = rng.normal(size=(40, 3))
    x0 = x0[np.linalg.norm(x0, axis=1) > 0.3]
    for p in x0:
        q = project_to_surface(s, p)
        np.testing.assert_allclose(np.linalg.norm(q), 1.0, atol=1e-12)
        np.testing.assert_allclose(q / np.linalg.norm(q), p / np.linalg.norm(p), atol=1e-7)


def test_projection_residuals_near_machine_floor():
    # The downstream rank-detection contract needs residuals at the evaluation
    # noise floor, far below the documented 1e-12*scale acceptance threshold.
    s = presets.cyclide()
    rng = np.random.default_rng(17)
    lo, hi = s.bbox
    raw = rng.uniform(lo, hi, size=(4000, 3))
    band = np.abs(s.eval(raw)) < 0.1 * s.coeff_scale
    pts = np.vstack([project_to_surface(s, p) for p in raw[band][:300]])
    res = np.abs(s.eval_longdouble(pts))
    assert res.max() < 1e-12          # spec acceptance threshold with margin
    assert np.median(res) < 5e-14     # typical landing point


def test_projection_raises_on_zero_gradient():
    s = presets.sphere()
    with pytest.raises(GradientTooSmall):
        project_to_surface(s, np.zeros(3))


def test_projection_raises_when_out_of_iterations():
    s = presets.sphere()
    with pytest.raises(ProjectionDiverged):
        project_to_surface(s, np.array([5.0, 0.0, 0.0]), max_iter=1)


def test_projection_respects_custom_tolerance():
    s = presets.torus()
    q = project_to_surface(s, np.array([1.2, 0.1, 0.05]), tol=1e-6)
    assert abs(s.eval(q[None, :])[0]) < 1e-6


# ---------------------------------------------------------------------------
# restricted-polynomial rank, numerically (early warning for rank detection)
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("m", [3, 4, 5])
def test_vandermonde_rank_on_projected_points(m):
    # On exactly-sampled surface points the degree-m Vandermonde must have
    # numerical rank equal to the restricted dimension: multiples of the
    # defining quartic vanish on the surface and on nothing else.
    s = presets.cyclide()
    rng = np.random.default_rng(23)
    lo, hi = s.bbox
    raw = rng.uniform(lo, hi, size=(8000, 3))
    band = np.abs(s.eval(raw)) < 0.1 * s.coeff_scale
    pts = np.vstack([project_to_surface(s, p) for p in raw[band][:250]])

    basis = polybasis.MonomialBasis(3, m)
    center = 0.5 * (lo + hi)
    scale = 0.5 * float(np.max(hi - lo))
    V = polybasis.eval_scaled_basis(basis, center, scale, pts)
    sv = np.linalg.svd(V, compute_uv=False)
    rank = int(np.sum(sv > len(pts) * sv[0] * np.finfo(float).eps))
    assert rank == polybasis.hilbert_dim_hypersurface(3, m, 4)
