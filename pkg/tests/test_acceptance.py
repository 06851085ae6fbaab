"""Acceptance gate: one test per headline guarantee, at pinned seeds.

Every test prints a one-line summary of the measured quantity against its
threshold, and asserts both the quantity and the wall-time budget for the
work it (plus its shared fixtures) performed. Clouds are shared across tests
through session fixtures so the suite stays desk-scale.
"""

from __future__ import annotations

import math
import time

import numpy as np
import pytest
from scipy.spatial.distance import cdist
from scipy.special import kv

from mfmls.geometry.cloud import BallRestriction
from mfmls.geometry.presets import cyclide, cyclide_patch_center, torus
from mfmls.geometry.sampling import sample_quasi_uniform
from mfmls.mls import (
    MlsConfig,
    local_fit,
    mls_evaluate,
    noise_study,
    shape_function_matrix,
    wendland_weight,
)
from mfmls.polybasis import MonomialBasis, hilbert_dim_hypersurface, monomial_exponents
from mfmls.rbf import KernelSpec, matern_eval, power_rate_study

LADDER = (706, 1399, 2838, 5655)
LADDER_SEEDS = {706: 50, 1399: 41, 2838: 42, 5655: 63}
EVAL_SEED = 44
NOISE_EVAL_SEED = 43
NOISE_SEED = 7


def target(p: np.ndarray) -> np.ndarray:
    return (
        np.cos(np.pi * (p[:, 0] - 0.3))
        * np.sin(2 * np.pi * (p[:, 1] - 0.2))
        * np.cos(3 * np.pi * (p[:, 2] - 0.1))
    )


@pytest.fixture(scope="session")
def surface():
    return cyclide()


@pytest.fixture(scope="session")
def global_runs(surface):
    """N=4096 cyclide cloud, ~2000 eval points, one matrix per m in 0..5."""
    started = time.perf_counter()
    cloud = sample_quasi_uniform(surface, 4096, seed=1)
    evals = sample_quasi_uniform(surface, 2000, seed=2)
    runs = {}
    for m in range(6):
        runs[m] = shape_function_matrix(cloud, evals.points, MlsConfig(degree=m))
    wall = time.perf_counter() - started
    return {"cloud": cloud, "evals": evals, "runs": runs, "wall": wall}


@pytest.fixture(scope="session")
def patch_ball():
    return BallRestriction(cyclide_patch_center(), 1.0)


@pytest.fixture(scope="session")
def patch_cells(surface, patch_ball):
    """Geodesic-patch ladder runs for m in 0..4: (delta, max_error, lebesgue)."""
    started = time.perf_counter()
    clouds = {
        n: sample_quasi_uniform(surface, n, seed=LADDER_SEEDS[n], within=patch_ball)
        for n in LADDER
    }
    evals = sample_quasi_uniform(surface, 4000, seed=EVAL_SEED, within=patch_ball)
    exact = target(evals.points)
    cells = {}
    for m in range(5):
        for n in LADDER:
            approx, diag = mls_evaluate(
                clouds[n], target(clouds[n].points), evals.points, MlsConfig(degree=m)
            )
            ok = ~diag.failed
            assert ok.all(), f"m={m}, N={n}: {int((~ok).sum())} failed eval points"
            cells[(m, n)] = {
                "delta": float(diag.base_delta),
                "max_error": float(np.abs(approx - exact).max()),
                "lebesgue": float(diag.lebesgue.max()),
            }
    wall = time.perf_counter() - started
    return {"clouds": clouds, "evals": evals, "cells": cells, "wall": wall}


def test_exact_polynomial_reproduction(global_runs):
    """Random polynomials up to degree 5 are reproduced to 1e-8 globally."""
    started = time.perf_counter()
    cloud, evals = global_runs["cloud"], global_runs["evals"]
    rng = np.random.default_rng(7)
    worst = 0.0
    for m in range(6):
        matrix, diag = global_runs["runs"][m]
        assert not diag.failed.any()
        exps = monomial_exponents(3, m)
        coef = rng.uniform(-1, 1, len(exps))

        def poly(p):
            return sum(c * np.prod(p**e, axis=1) for c, e in zip(coef, exps))

        err = float(np.abs(matrix @ poly(cloud.points) - poly(evals.points)).max())
        worst = max(worst, err)
        assert err <= 1e-8, f"m={m}: reproduction error {err:.3e} > 1e-8"
    wall = global_runs["wall"] + time.perf_counter() - started
    assert wall < 30.0
    print(
        f"\nexact reproduction m=0..5 on N=4096 cyclide: worst {worst:.2e}"
        f" <= 1e-8, {wall:.1f}s < 30s: PASS"
    )


def test_partition_of_unity_and_locality(global_runs):
    """Shape functions sum to 1 and vanish outside the support radius."""
    started = time.perf_counter()
    cloud, evals = global_runs["cloud"], global_runs["evals"]
    dists = cdist(evals.points, cloud.points)
    worst_pu = 0.0
    for m in range(6):
        matrix, diag = global_runs["runs"][m]
        pu = float(np.abs(np.asarray(matrix.sum(axis=1)).ravel() - 1.0).max())
        worst_pu = max(worst_pu, pu)
        assert pu <= 1e-10, f"m={m}: partition-of-unity defect {pu:.3e} > 1e-10"
        dense = matrix.toarray()
        outside = dists >= diag.delta[:, None]
        assert np.all(dense[outside] == 0.0), f"m={m}: support leaks past delta"
    wall = time.perf_counter() - started
    print(
        f"\npartition of unity (worst defect {worst_pu:.2e} <= 1e-10) and dense"
        f" locality scan on {dense.shape}: PASS ({wall:.1f}s)"
    )


def test_restricted_rank_detection(surface, global_runs):
    """Observed stencil rank detects the restricted polynomial dimension."""
    started = time.perf_counter()
    evals = global_runs["evals"]
    lines = []
    for n_target, seed in ((8192, 3), (16384, 4)):
        cloud = sample_quasi_uniform(surface, n_target, seed=seed)
        for m in (4, 5):
            want = hilbert_dim_hypersurface(3, m, 4)
            _, diag = shape_function_matrix(cloud, evals.points, MlsConfig(degree=m))
            ok = ~diag.failed
            med = int(np.median(diag.rank[ok]))
            peak = int(diag.rank[ok].max())
            assert med == want, f"N={n_target}, m={m}: median rank {med} != {want}"
            assert peak <= want, f"N={n_target}, m={m}: rank {peak} exceeds {want}"
            lines.append(f"N~{n_target} m={m}: median {med} == {want}, max {peak}")
    wall = time.perf_counter() - started
    assert wall < 120.0
    print("\nrank detection: " + "; ".join(lines) + f": PASS ({wall:.1f}s < 2min)")


def test_patch_convergence_rates(patch_cells):
    """log max-error vs log delta slopes beat m + 0.7 on the patch ladder."""
    started = time.perf_counter()
    slopes = {}
    for m in range(4):
        logd = np.log([patch_cells["cells"][(m, n)]["delta"] for n in LADDER])
        loge = np.log([patch_cells["cells"][(m, n)]["max_error"] for n in LADDER])
        slope = float(np.polyfit(logd, loge, 1)[0])
        slopes[m] = slope
        assert slope >= m + 0.7, f"m={m}: slope {slope:.3f} < {m + 0.7}"
    wall = patch_cells["wall"] + time.perf_counter() - started
    assert wall < 300.0
    print(
        "\nconvergence slopes "
        + " ".join(f"m={m}:{s:.2f}(>={m + 0.7})" for m, s in slopes.items())
        + f": PASS ({wall:.1f}s < 5min)"
    )


def test_lebesgue_constant_boundedness(patch_cells):
    """Lebesgue constants stay within a factor 2 along the ladder."""
    ratios = {}
    for m in (2, 3, 4):
        values = [patch_cells["cells"][(m, n)]["lebesgue"] for n in LADDER]
        ratios[m] = max(values) / min(values)
        assert ratios[m] <= 2.0, f"m={m}: Lebesgue max/min {ratios[m]:.3f} > 2"
    print(
        "\nlebesgue boundedness "
        + " ".join(f"m={m}:{r:.2f}(<=2)" for m, r in ratios.items())
        + ": PASS"
    )


def test_noise_amplitude_scaling(surface, patch_ball, patch_cells):
    """Noise response is linear in sigma and sized by the Lebesgue constant."""
    started = time.perf_counter()
    cloud = patch_cells["clouds"][2838]
    evals = sample_quasi_uniform(surface, 300, seed=NOISE_EVAL_SEED, within=patch_ball)
    lines = []
    for m in range(4):
        config = MlsConfig(degree=m)
        _, diag = shape_function_matrix(cloud, evals.points, config)
        assert not diag.failed.any()
        constant = float(diag.lebesgue.max())
        means = {}
        for sigma in (1e-2, 1e-1):
            mean, _ = noise_study(
                cloud,
                target(cloud.points),
                evals.points,
                config,
                sigma=sigma,
                trials=100,
                seed=NOISE_SEED,
            )
            means[sigma] = mean
            assert sigma * constant / 3 <= mean <= 3 * sigma * constant, (
                f"m={m}, sigma={sigma}: mean {mean:.3e} outside factor 3 of"
                f" sigma*Lebesgue = {sigma * constant:.3e}"
            )
        ratio = means[1e-1] / means[1e-2]
        assert 8.0 <= ratio <= 12.0, f"m={m}: sigma-ratio {ratio:.3f} not in [8, 12]"
        lines.append(f"m={m}: ratio {ratio:.2f}, mean/(sigma*L) "
                     f"{means[1e-2] / (1e-2 * constant):.2f}")
    wall = time.perf_counter() - started
    assert wall < 600.0
    print("\nnoise scaling " + "; ".join(lines) + f": PASS ({wall:.1f}s < 10min)")


def test_power_function_decay_rate():
    """Kernel power function decays at least like h^2 on the torus ladder."""
    started = time.perf_counter()
    study = power_rate_study(KernelSpec(4), torus(1.0, 1 / 3), [400, 800, 1600], seed=21)
    assert np.all(np.diff(study.sup_power) < 0), "sup P not monotone along ladder"
    assert study.slope >= 2.0, f"power rate slope {study.slope:.3f} < 2.0"
    wall = time.perf_counter() - started
    assert wall < 120.0
    print(
        f"\npower rate: slope {study.slope:.2f} >= 2.0, sup P"
        f" {[f'{p:.1e}' for p in study.sup_power]} monotone: PASS ({wall:.1f}s < 2min)"
    )


def test_independent_oracle_suites():
    """Four independently-derived routes agree with the implementations."""
    # (a) truncated-SVD shape functions vs the direct normal-equation formula
    # on small (<= 8 point) well-conditioned planar stencils.
    rng = np.random.default_rng(3)
    basis = MonomialBasis(2, 2)
    checked = 0
    worst_ne = 0.0
    while checked < 60:
        n_pts = int(rng.integers(6, 9))
        pts = rng.uniform(-0.8, 0.8, size=(n_pts, 2))
        center = np.zeros(2)
        delta = 1.0
        w = wendland_weight(np.linalg.norm(pts - center, axis=1), delta)
        if w.min() <= 1e-6:
            continue
        P = np.column_stack([np.prod(pts**e, axis=1) for e in basis.exponents])
        gram = P.T @ (w[:, None] * P)
        if np.linalg.cond(gram) > 1e7:
            continue
        e1 = np.zeros(len(basis.exponents))
        e1[0] = 1.0
        b_direct = w * (P @ np.linalg.solve(gram, e1))
        fit = local_fit(pts, center, delta, basis)
        worst_ne = max(worst_ne, float(np.abs(fit.weights - b_direct).max()))
        checked += 1
    assert worst_ne <= 1e-8, f"normal-equation oracle deviates {worst_ne:.3e}"

    # (b) closed-form kernel vs direct numerical modified-Bessel evaluation.
    worst_kv = 0.0
    r = np.logspace(-3, math.log10(20.0), 40)
    for s in range(2, 7):
        nu = s - 1.5
        want = r**nu * kv(nu, r)
        got = matern_eval(KernelSpec(s), r)
        worst_kv = max(worst_kv, float(np.max(np.abs(got - want) / np.abs(want))))
    assert worst_kv <= 1e-10, f"Bessel oracle deviates {worst_kv:.3e} relative"

    # (c) degree-0 fits are exactly normalized weights (Shepard form).
    pts = np.random.default_rng(11).uniform(-0.7, 0.7, size=(25, 2))
    w = wendland_weight(np.linalg.norm(pts, axis=1), 1.0)
    fit = local_fit(pts, np.zeros(2), 1.0, MonomialBasis(2, 0))
    worst_shep = float(np.abs(fit.weights - w / w.sum()).max())
    assert worst_shep <= 1e-14, f"Shepard oracle deviates {worst_shep:.3e}"

    # (d) shape functions are invariant under global rescaling of the
    # geometry (points, center, and support radius together).
    rng = np.random.default_rng(4)
    pts = rng.uniform(-0.9, 0.9, size=(30, 3))
    center = np.array([0.05, -0.1, 0.02])
    base = local_fit(pts, center, 1.1, MonomialBasis(3, 2)).weights
    worst_scale = 0.0
    for lam in (1e-3, 1.0, 1e3):
        scaled = local_fit(lam * pts, lam * center, lam * 1.1, MonomialBasis(3, 2))
        worst_scale = max(worst_scale, float(np.abs(scaled.weights - base).max()))
    assert worst_scale <= 1e-12, f"scale equivariance deviates {worst_scale:.3e}"

    print(
        f"\noracles: normal-eq {worst_ne:.1e}<=1e-8, Bessel {worst_kv:.1e}<=1e-10,"
        f" Shepard {worst_shep:.1e}<=1e-14, scaling {worst_scale:.1e}<=1e-12: PASS"
    )
