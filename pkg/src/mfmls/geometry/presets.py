"""Ready-made algebraic surfaces used across the experiments."""

from __future__ import annotations

import numpy as np

from .surface import AlgebraicSurface


def sphere(radius: float = 1.0) -> AlgebraicSurface:
    """Sphere |x|^2 = radius^2 in R^3."""
    if not radius > 0:
        raise ValueError("radius must be positive")
    coeffs = {(2, 0, 0): 1.0, (0, 2, 0): 1.0, (0, 0, 2): 1.0,
              (0, 0, 0): -radius * radius}
    pad = 1.05 * radius
    return AlgebraicSurface.from_coefficients(3, coeffs, [[-pad] * 3, [pad] * 3])


def torus(ring_radius: float = 1.0, tube_radius: float = 1 / 3) -> AlgebraicSurface:
    """Torus of revolution about the z axis, as the quartic
    (|x|^2 + R^2 - r^2)^2 = 4 R^2 (x^2 + y^2).

    Default radii R=1, r=1/3 are this package's standard model; any
    0 < r < R is accepted.
    """
    R, r = float(ring_radius), float(tube_radius)
    if not 0 < r < R:
        raise ValueError(f"need 0 < tube_radius < ring_radius, got r={r}, R={R}")
    s = R * R - r * r
    coeffs = {
        (4, 0, 0): 1.0, (0, 4, 0): 1.0, (0, 0, 4): 1.0,
        (2, 2, 0): 2.0, (2, 0, 2): 2.0, (0, 2, 2): 2.0,
        (2, 0, 0): 2 * s - 4 * R * R,
        (0, 2, 0): 2 * s - 4 * R * R,
        (0, 0, 2): 2 * s,
        (0, 0, 0): s * s,
    }
    out = 1.05 * (R + r)
    up = 1.05 * r
    return AlgebraicSurface.from_coefficients(
        3, coeffs, [[-out, -out, -up], [out, out, up]])


def cyclide(a: float = 2.0, b: float = 1.9, d: float = 1.0) -> AlgebraicSurface:
    """Ring cyclide (|x|^2 - d^2 + b^2)^2 = 4 (a x1 + c d)^2 + 4 b^2 x2^2,
    with c^2 = a^2 - b^2.

    The defaults give the mildly eccentric ring used throughout the
    experiment suite. Requires a > b > 0 (real focal parameter c) and
    d < a so the surface stays a ring.
    """
    a, b, d = float(a), float(b), float(d)
    if not (a > b > 0):
        raise ValueError(f"need a > b > 0, got a={a}, b={b}")
    if not 0 < d < a:
        raise ValueError(f"need 0 < d < a, got d={d}")
    c = np.sqrt(a * a - b * b)
    t = b * b - d * d
    coeffs = {
        (4, 0, 0): 1.0, (0, 4, 0): 1.0, (0, 0, 4): 1.0,
        (2, 2, 0): 2.0, (2, 0, 2): 2.0, (0, 2, 2): 2.0,
        (2, 0, 0): 2 * t - 4 * a * a,
        (0, 2, 0): 2 * t - 4 * b * b,
        (0, 0, 2): 2 * t,
        (1, 0, 0): -8 * a * c * d,
        (0, 0, 0): t * t - 4 * c * c * d * d,
    }
    return AlgebraicSurface.from_coefficients(3, coeffs, _cyclide_bbox(a, b, c, d))


def _cyclide_bbox(a, b, c, d, grid=256, pad=0.03):
    # The ring cyclide admits the rational parametrization below; a dense
    # parameter sweep bounds the surface tightly and a 3% pad covers the
    # sweep's discretization error (the surface is smooth and bounded).
    u = np.linspace(0.0, 2 * np.pi, grid)
    uu, vv = np.meshgrid(u, u)
    den = a - c * np.cos(uu) * np.cos(vv)
    # Minus sign: the classical parametrization covers the (a x - c d) sign
    # convention, our polynomial uses (a x + c d).
    x = -(d * (c - a * np.cos(uu) * np.cos(vv)) + b * b * np.cos(uu)) / den
    y = b * np.sin(uu) * (a - d * np.cos(vv)) / den
    z = b * np.sin(vv) * (c * np.cos(uu) - d) / den
    pts = np.stack([x, y, z], axis=-1).reshape(-1, 3)
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    margin = pad * (hi - lo)
    return [lo - margin, hi + margin]


def cyclide_patch_center(a: float = 2.0, b: float = 1.9, d: float = 1.0) -> np.ndarray:
    """On-surface anchor point (0, sqrt(9 - 6a + b^2), 0) for ball patches.

    Only lies on the cyclide for parameter combinations satisfying
    (a-1)(a-2) = 0 with d = 1 (the default does); validated at call time.
    """
    y2 = 9.0 - 6.0 * a + b * b
    if y2 <= 0:
        raise ValueError("patch center is not real for these parameters")
    center = np.array([0.0, np.sqrt(y2), 0.0])
    if abs(cyclide(a, b, d).eval(center[None, :])[0]) > 1e-9:
        raise ValueError("patch center does not lie on this cyclide")
    return center
