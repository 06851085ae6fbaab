"""Restricted Matern kernels, interpolation systems, and the power function.

The ambient kernel is the Matern family of integer order ``s``,

    phi(r) = r^(s-3/2) K_{s-3/2}(r),

whose half-integer Bessel index makes it available in closed form as an
exponential times a polynomial — no special-function dependency is needed.
Restricting phi to a surface gives a positive-definite kernel there, and the
power function of a site set measures the worst-case interpolation error
pointwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from scipy.spatial.distance import cdist

from .errors import (
    DuplicateSites,
    FactorizationFailed,
    KernelOrderError,
    TooFewLevels,
)
from .geometry.cloud import PointCloud
from .geometry.sampling import sample_quasi_uniform
from .geometry.surface import AlgebraicSurface

_SQRT_HALF_PI = math.sqrt(math.pi / 2.0)

#: Relative diagonal jitter ladder tried when the Gram factorization fails.
_JITTER_LADDER = (0.0, 1e-12, 1e-10)


@dataclass(frozen=True)
class KernelSpec:
    """Matern kernel of integer order ``s >= 2``.

    The Bessel index is the half-integer ``s - 3/2``; the associated
    polynomial degree ``n = s - 2`` is exposed as :attr:`n`.
    """

    order: int

    def __post_init__(self):
        if not isinstance(self.order, (int, np.integer)) or isinstance(
            self.order, bool
        ):
            raise KernelOrderError(f"kernel order must be an integer, got {self.order!r}")
        if self.order < 2:
            raise KernelOrderError(f"kernel order must be >= 2, got {self.order}")

    @property
    def n(self) -> int:
        return self.order - 2


@lru_cache(maxsize=32)
def _poly_coefficients(n: int) -> tuple[float, ...]:
    # Highest power first: coefficient of r^(n-k) is c_k / 2^k with
    # c_k = (n+k)! / (k! (n-k)!), from the half-integer Bessel expansion.
    coeffs = []
    for k in range(n + 1):
        c_k = math.factorial(n + k) // (math.factorial(k) * math.factorial(n - k))
        coeffs.append(c_k / 2.0**k)
    return tuple(coeffs)


def matern_eval(spec: KernelSpec, r):
    """Evaluate the Matern kernel at radii ``r >= 0``.

    Parameters
    ----------
    spec : KernelSpec
        Kernel order.
    r : array_like
        Radii; must be nonnegative. Scalars broadcast.

    Returns
    -------
    ndarray or scalar
        sqrt(pi/2) * exp(-r) * sum_k c_k 2^-k r^(n-k). At ``r = 0`` this is
        the finite limit (the ``k = n`` term). Strictly decreasing in ``r``.
    """
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("matern_eval requires r >= 0")
    coeffs = _poly_coefficients(spec.n)
    return _SQRT_HALF_PI * np.exp(-r) * np.polyval(coeffs, r)


def _phi_zero(spec: KernelSpec) -> float:
    return float(matern_eval(spec, 0.0))


def _as_site_array(sites) -> np.ndarray:
    pts = sites.points if isinstance(sites, PointCloud) else np.asarray(sites, float)
    if pts.ndim != 2:
        raise ValueError(f"sites must be (n, dim), got shape {pts.shape}")
    return pts


class InterpSystem:
    """Factorized kernel interpolation system on a fixed site set.

    Builds the symmetric Gram matrix ``K[i, j] = phi(|xi_i - xi_j|)`` and a
    Cholesky factorization of ``K + jitter * I``, escalating the diagonal
    jitter through ``0 -> 1e-12 phi(0) -> 1e-10 phi(0)`` if factorization
    fails. The applied jitter is recorded on :attr:`jitter`. Instances are
    immutable after construction; evaluation methods are pure and safe to
    call concurrently.

    Raises
    ------
    DuplicateSites
        If two sites coincide exactly.
    FactorizationFailed
        If no ladder step produces a usable factorization.
    """

    def __init__(self, spec: KernelSpec, sites):
        pts = _as_site_array(sites)
        if len(pts) == 0:
            raise ValueError("InterpSystem needs at least one site")
        dists = cdist(pts, pts)
        if len(pts) > 1:
            off_diag = dists[~np.eye(len(pts), dtype=bool)]
            if off_diag.min() == 0.0:
                raise DuplicateSites("two interpolation sites coincide")
        # Fill the upper triangle and mirror so K is exactly symmetric.
        upper = np.triu(matern_eval(spec, dists))
        gram = upper + np.triu(upper, 1).T
        phi0 = _phi_zero(spec)
        factor = None
        jitter = 0.0
        for rel in _JITTER_LADDER:
            jitter = rel * phi0
            try:
                factor = cho_factor(gram + jitter * np.eye(len(pts)), lower=True)
                break
            except LinAlgError:
                continue
        if factor is None:
            raise FactorizationFailed(
                f"Gram matrix of {len(pts)} sites could not be factorized "
                f"even with jitter {_JITTER_LADDER[-1]:g} * phi(0)"
            )
        self.spec = spec
        self.sites = pts
        self.gram = gram
        self.jitter = jitter
        self._factor = factor
        self.gram.setflags(write=False)

    def __len__(self):
        return len(self.sites)

    @property
    def factor(self) -> np.ndarray:
        """Lower-triangular Cholesky factor of ``gram + jitter * I``."""
        return self._factor[0]

    def solve(self, values) -> np.ndarray:
        """Interpolation coefficients alpha with ``K alpha = values``."""
        values = np.asarray(values, dtype=float)
        if values.shape[0] != len(self.sites):
            raise ValueError(
                f"expected {len(self.sites)} values, got {values.shape[0]}"
            )
        return cho_solve(self._factor, values)

    def power_values(self, eval_points) -> np.ndarray:
        """Power function at each row of ``eval_points``.

        P(x) = sqrt(max(0, phi(0) - k_x^T K^{-1} k_x)) with k_x the kernel
        vector of x against the sites; the max() clamps round-off just below
        zero at (and near) the sites.
        """
        evals = np.asarray(eval_points, dtype=float)
        if evals.ndim == 1:
            evals = evals[None, :]
        kx = matern_eval(self.spec, cdist(evals, self.sites))
        sol = cho_solve(self._factor, kx.T)
        quad = np.einsum("ij,ji->i", kx, sol)
        return np.sqrt(np.maximum(0.0, _phi_zero(self.spec) - quad))


def power_function(spec: KernelSpec, sites, x) -> float:
    """Power function of ``sites`` at a single point ``x``.

    An empty site set (or ``None``) carries no information, so the value is
    sqrt(phi(0)).
    """
    if sites is None or len(_as_site_array(sites)) == 0:
        return math.sqrt(_phi_zero(spec))
    return float(InterpSystem(spec, sites).power_values(x)[0])


def power_field(spec: KernelSpec, sites, eval_points) -> np.ndarray:
    """Power function mapped over ``eval_points`` (one factorization)."""
    evals = np.asarray(eval_points, dtype=float)
    if sites is None or len(_as_site_array(sites)) == 0:
        return np.full(len(evals), math.sqrt(_phi_zero(spec)))
    return InterpSystem(spec, sites).power_values(evals)


@dataclass(frozen=True)
class PowerRateStudy:
    """Least-squares fit of log sup-P against log fill distance."""

    site_counts: tuple[int, ...]
    fill_distances: np.ndarray
    sup_power: np.ndarray
    slope: float
    residual: float


def power_rate_study(
    spec: KernelSpec,
    surface: AlgebraicSurface,
    density_ladder,
    seed: int,
    *,
    probe_factor: int = 8,
) -> PowerRateStudy:
    """Measure the decay rate of the power function under site refinement.

    For each site count in ``density_ladder`` a quasi-uniform site cloud is
    sampled on ``surface`` and sup P is estimated over a probe cloud
    ``probe_factor`` times denser. The reported slope is the least-squares
    fit of log(sup P) against log(h) over the ladder, with h the fill
    distance of the site cloud; ``residual`` is the RMS of the log-log fit
    residuals.

    Parameters
    ----------
    spec : KernelSpec
        Kernel to study.
    surface : AlgebraicSurface
        Surface carrying the sites and probes.
    density_ladder : sequence of int
        Site counts; at least three levels are required.
    seed : int
        Base seed; per-level site and probe clouds use fixed offsets so the
        whole study is reproducible.

    Raises
    ------
    TooFewLevels
        If fewer than three densities are given.
    """
    counts = [int(n) for n in density_ladder]
    if len(counts) < 3:
        raise TooFewLevels(
            f"rate study needs at least 3 density levels, got {len(counts)}"
        )
    fills = np.empty(len(counts))
    sups = np.empty(len(counts))
    for i, n in enumerate(counts):
        sites = sample_quasi_uniform(surface, n, seed=seed + 1000 * i)
        probes = sample_quasi_uniform(
            surface, probe_factor * n, seed=seed + 1000 * i + 500
        )
        system = InterpSystem(spec, sites)
        fills[i] = sites.fill_distance
        sups[i] = system.power_values(probes.points).max()
    coeffs, ssr, *_ = np.polyfit(np.log(fills), np.log(sups), 1, full=True)
    residual = math.sqrt(float(ssr[0]) / len(counts)) if len(ssr) else 0.0
    return PowerRateStudy(
        site_counts=tuple(counts),
        fill_distances=fills,
        sup_power=sups,
        slope=float(coeffs[0]),
        residual=residual,
    )
