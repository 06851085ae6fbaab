"""Quasi-uniform sampling of algebraic surfaces.

Points are produced in three stages: rejection sampling of a thin shell
``|P| < band`` around the zero set (with an acceptance correction
proportional to ``|grad P|`` so that the projected candidates are close to
uniform with respect to surface area), damped-Newton projection onto the
surface, and greedy thinning to a maximal packing at a separation radius
calibrated against the requested cardinality.
"""

from __future__ import annotations

import itertools
import math

import numpy as np
from scipy.spatial import cKDTree

from ..errors import SamplingFailed
from .cloud import BallRestriction, PointCloud
from .surface import AlgebraicSurface, project_points

# Relative half-width of the rejection shell |P| < band * coeff_scale.
_BAND_REL = 0.15
# Candidates drawn per chunk during rejection sampling.
_CHUNK = 1 << 21
# Hard cap on raw draws, as a multiple of the candidate target, to guarantee
# termination when a surface barely intersects its bounding box.
_MAX_DRAW_FACTOR = 20_000


def _shell_candidates(
    surface: AlgebraicSurface,
    n_cand: int,
    rng: np.random.Generator,
    within: BallRestriction | None,
) -> np.ndarray:
    """Draw ``n_cand`` on-surface candidate points, roughly area-uniform."""
    lo, hi = surface.bbox.copy()
    if within is not None:
        # Tangential drift during projection is tiny, so a modest margin
        # around the ball suffices for the raw draws.
        margin = 0.15 * within.radius
        lo = np.maximum(lo, within.center - within.radius - margin)
        hi = np.minimum(hi, within.center + within.radius + margin)
        if (lo >= hi).any():
            raise SamplingFailed("restriction ball does not meet the surface bounding box")

    band = _BAND_REL * surface.coeff_scale
    dim = surface.ambient_dim
    max_draws = _MAX_DRAW_FACTOR * max(n_cand, 1)
    grad_cap = 0.0
    drawn = 0
    kept: list[np.ndarray] = []
    n_kept = 0
    while n_kept < n_cand:
        if drawn >= max_draws:
            raise SamplingFailed(
                f"rejection sampling exhausted {drawn} draws with only "
                f"{n_kept}/{n_cand} candidates; surface may not intersect the region"
            )
        raw = rng.uniform(lo, hi, size=(_CHUNK, dim))
        u = rng.random(_CHUNK)  # drawn unconditionally to keep the stream aligned
        drawn += _CHUNK
        raw = raw[np.abs(surface.eval(raw)) < band]
        if len(raw) == 0:
            continue
        u = u[: len(raw)]
        gnorm = np.linalg.norm(surface.grad(raw), axis=1)
        grad_cap = max(grad_cap, 1.05 * gnorm.max())
        # Shell thickness scales like 1/|grad P|; thin the thick (flat) parts
        # so the surface density of accepted draws is approximately constant.
        raw = raw[u * grad_cap < gnorm]
        if len(raw) == 0:
            continue
        pts, ok = project_points(surface, raw, on_fail="mask")
        pts = pts[ok]
        if within is not None:
            pts = pts[within.contains(pts)]
        if len(pts):
            kept.append(pts)
            n_kept += len(pts)
    out = np.concatenate(kept)[:n_cand]
    return np.ascontiguousarray(out)


def _greedy_thin(points: np.ndarray, radius: float, limit: int | None = None) -> np.ndarray:
    """Indices of a greedy maximal packing of ``points`` at separation ``radius``.

    Points are visited in order; a point is accepted when no previously
    accepted point lies within ``radius``. Accepted points are kept in a
    uniform grid of cell size ``radius`` so each query touches only the
    3**dim neighbouring cells. The scan loop is deliberately plain Python
    over flat coordinate lists; it handles a few million points in seconds
    and keeps the ordering semantics exact.
    """
    n, dim = points.shape
    if n == 0:
        return np.empty(0, dtype=np.intp)
    r2 = radius * radius
    inv = 1.0 / radius
    origin = points.min(axis=0) - 2.0 * radius
    cell = np.floor((points - origin) * inv).astype(np.int64)
    # Pack the per-axis cell indices into one integer key; 21 bits per axis
    # is ample for any extent/radius ratio the calibration can produce.
    if dim > 3 or (cell >= (1 << 20)).any():
        return _greedy_thin_tuple_keys(points, cell, r2, limit)
    shifts = [42, 21, 0][3 - dim :]
    key_arr = np.zeros(n, dtype=np.int64)
    for axis, shift in enumerate(shifts):
        key_arr |= cell[:, axis] << shift
    keys = key_arr.tolist()
    offsets = [
        sum(d << s for d, s in zip(delta, shifts))
        for delta in itertools.product((-1, 0, 1), repeat=dim)
    ]
    cols = [points[:, j].tolist() for j in range(dim)]
    accepted: list[int] = []
    cells: dict[int, list[float]] = {}
    get = cells.get
    if dim == 3:
        xs, ys, zs = cols
        for i in range(n):
            x, y, z = xs[i], ys[i], zs[i]
            base = keys[i]
            ok = True
            for off in offsets:
                lst = get(base + off)
                if lst is not None:
                    for j in range(0, len(lst), 3):
                        dx = lst[j] - x
                        dy = lst[j + 1] - y
                        dz = lst[j + 2] - z
                        if dx * dx + dy * dy + dz * dz < r2:
                            ok = False
                            break
                    if not ok:
                        break
            if ok:
                accepted.append(i)
                lst = get(base)
                if lst is None:
                    cells[base] = [x, y, z]
                else:
                    lst.extend((x, y, z))
                if limit is not None and len(accepted) >= limit:
                    break
    else:
        for i in range(n):
            p = [c[i] for c in cols]
            base = keys[i]
            ok = True
            for off in offsets:
                lst = get(base + off)
                if lst is not None:
                    for j in range(0, len(lst), dim):
                        s = 0.0
                        for a in range(dim):
                            d = lst[j + a] - p[a]
                            s += d * d
                        if s < r2:
                            ok = False
                            break
                    if not ok:
                        break
            if ok:
                accepted.append(i)
                lst = get(base)
                if lst is None:
                    cells[base] = list(p)
                else:
                    lst.extend(p)
                if limit is not None and len(accepted) >= limit:
                    break
    return np.asarray(accepted, dtype=np.intp)


def _greedy_thin_tuple_keys(
    points: np.ndarray, cell: np.ndarray, r2: float, limit: int | None
) -> np.ndarray:
    """Fallback thinning for high dimensions or extreme grid extents."""
    n, dim = points.shape
    offsets = list(itertools.product((-1, 0, 1), repeat=dim))
    accepted: list[int] = []
    cells: dict[tuple, list[np.ndarray]] = {}
    keys = [tuple(row) for row in cell.tolist()]
    for i in range(n):
        p = points[i]
        base = keys[i]
        ok = True
        for off in offsets:
            lst = cells.get(tuple(b + o for b, o in zip(base, off)))
            if lst is not None:
                for q in lst:
                    d = p - q
                    if float(d @ d) < r2:
                        ok = False
                        break
                if not ok:
                    break
        if ok:
            accepted.append(i)
            cells.setdefault(base, []).append(p)
            if limit is not None and len(accepted) >= limit:
                break
    return np.asarray(accepted, dtype=np.intp)


def _initial_radius(cands: np.ndarray, n_target: int) -> float:
    """Separation radius guess from the candidate nearest-neighbour scale.

    For points of intensity ``lam`` on a 2-manifold the mean nearest-neighbour
    distance is ``1/(2 sqrt(lam))``, giving an area estimate; greedy packings
    of dense candidate sets jam near 54% disk coverage, so the packing count
    at radius q is about ``0.69 * area / q**2``.
    """
    sub = cands[: min(len(cands), 50_000)]
    tree = cKDTree(sub)
    d, _ = tree.query(sub, k=2)
    dbar = float(d[:, 1].mean())
    area = 4.0 * len(sub) * dbar * dbar
    return math.sqrt(0.69 * area / n_target)


def sample_quasi_uniform(
    surface: AlgebraicSurface,
    n_target: int,
    seed: int,
    *,
    within: BallRestriction | None = None,
    oversample: float = 20.0,
) -> PointCloud:
    """Sample a quasi-uniform point cloud on an algebraic surface.

    Parameters
    ----------
    surface : AlgebraicSurface
        Surface to sample; its bounding box must enclose the zero set (or
        the requested patch of it).
    n_target : int
        Requested cardinality. The returned cloud has within 10% of this
        many points (exactly one when ``n_target == 1``).
    seed : int
        Seed for the draw stream. Identical ``(surface, n_target, seed,
        within, oversample)`` inputs reproduce the identical cloud.
    within : BallRestriction, optional
        Restrict sampling to the open ball; all returned points satisfy
        the strict inclusion test.
    oversample : float, optional
        Candidate pool size as a multiple of ``n_target`` (at least 4).

    Returns
    -------
    PointCloud
        Cloud with ``fill_distance`` (against the candidate pool) and
        ``separation`` attributes populated.

    Raises
    ------
    SamplingFailed
        If rejection sampling cannot populate the candidate pool, the
        separation calibration does not converge, or the fill/separation
        ratio exceeds 4 even after densifying the candidate pool.
    """
    if n_target < 1:
        raise ValueError(f"n_target must be positive, got {n_target}")
    if oversample < 4:
        raise ValueError(f"oversample must be at least 4, got {oversample}")

    # A floor on the pool size keeps the area estimate and the fill probes
    # meaningful for small requests.
    n_cand = max(int(math.ceil(oversample * n_target)), 4000)
    for attempt in range(3):
        rng = np.random.default_rng(seed)
        cands = _shell_candidates(surface, n_cand, rng, within)
        if n_target == 1:
            pt = cands[:1]
            cloud = PointCloud(pt)
            d, _ = cKDTree(pt).query(cands, k=1)
            cloud.fill_distance = float(d.max())
            cloud.separation = np.inf
            return cloud

        radius = _initial_radius(cands, n_target)
        idx = None
        for _ in range(6):
            idx = _greedy_thin(cands, radius)
            if abs(len(idx) - n_target) <= 0.08 * n_target:
                break
            if len(idx) == len(cands):
                raise SamplingFailed(
                    "candidate pool too small for the requested cardinality; "
                    "increase oversample"
                )
            radius *= math.sqrt(len(idx) / n_target)
        else:
            raise SamplingFailed(
                f"separation calibration did not settle near {n_target} points"
            )

        pts = cands[idx]
        cloud = PointCloud(pts)
        d, _ = cloud.tree.query(cands, k=1)
        cloud.fill_distance = float(d.max())
        dd, _ = cloud.tree.query(pts, k=2)
        cloud.separation = float(dd[:, 1].min())
        if cloud.fill_distance / cloud.separation <= 4.0:
            return cloud
        # Densify the pool and retry; a sparse pocket of candidates is the
        # only way a greedy packing can leave a hole this large.
        n_cand *= 2
    raise SamplingFailed("fill/separation ratio above 4 despite candidate densification")
