import math

import numpy as np
import pytest
from scipy.linalg import expm

from gl_rolls import semigroup, symbol
from gl_rolls.symbol import RollParams
from gl_rolls.utils import QuadratureError, ResolutionError


@pytest.fixture(scope="module")
def filters() -> semigroup.ModeFilterTable:
    return semigroup.default_filters(RollParams(0.3, 1.0, 0.5))


def test_cutoff_profile():
    k = np.linspace(-3, 3, 601)
    chi = semigroup.cutoff(k, 2.0)
    np.testing.assert_array_equal(chi[np.abs(k) <= 1.0], 1.0)
    np.testing.assert_array_equal(chi[np.abs(k) >= 2.0], 0.0)
    right = chi[k >= 0]
    assert np.all(np.diff(right) <= 0)


def test_filters_partition_cutoff(filters):
    chi, Pc, Ps = filters.evaluate(np.linspace(-1.5, 1.5, 31))
    np.testing.assert_allclose(Pc + Ps, chi[:, None, None] * np.eye(3), atol=1e-12)
    assert 0 < filters.k0 <= 2


@pytest.mark.parametrize("fraction", [0.0, 0.2, 0.4, 0.6, 0.8, 0.99])
def test_projection_invariants_below_k0(filters, fraction):
    k = fraction * filters.k0
    P = symbol.spectral_projection(filters.params, k)[0]
    L = symbol.assemble_symbol(filters.params, k).entries
    np.testing.assert_allclose(P @ P, P, atol=1e-8)
    np.testing.assert_allclose(P @ L, L @ P, atol=1e-8)
    assert np.trace(P).real == pytest.approx(1.0, abs=1e-8)
    assert np.linalg.matrix_rank(P, tol=1e-6) == 1


def test_mode_filters_are_complementary(filters):
    chi, Pc, Ps = filters.evaluate(np.linspace(-filters.k0, filters.k0, 41))
    np.testing.assert_allclose(Pc @ Ps, 0, atol=1e-8)
    np.testing.assert_allclose(Ps @ Pc, 0, atol=1e-8)
    np.testing.assert_allclose(Ps @ Ps, chi[:, None, None] * Ps, atol=1e-8)


def test_parts_sum_to_full(filters):
    k = np.linspace(-4, 4, 81)
    for t in (0.5, 5.0):
        c = semigroup.mode_multiplier(filters, k, t, "c")
        e = semigroup.mode_multiplier(filters, k, t, "e")
        full = semigroup.mode_multiplier(filters, k, t, "full")
        np.testing.assert_allclose(c + e, full, atol=1e-12)


def test_mode_multiplier_derivative_factor(filters):
    k = np.array([0.3, 1.2])
    plain = semigroup.mode_multiplier(filters, k, 1.0, "full")
    differentiated = semigroup.mode_multiplier(filters, k, 1.0, "full", n=2)
    np.testing.assert_allclose(differentiated, -(k**2)[:, None, None] * plain)


def test_mode_multiplier_unknown_part(filters):
    with pytest.raises(ValueError, match="unknown semigroup part"):
        semigroup.mode_multiplier(filters, [0.0], 1.0, "x")  # type: ignore[arg-type]


def test_apply_semigroup_identity_at_zero_time(filters):
    x = np.linspace(0, 20 * np.pi, 128, endpoint=False)
    f = np.stack([np.cos(x / 10), np.sin(x / 5), np.cos(3 * x / 10)])
    np.testing.assert_allclose(semigroup.apply_semigroup(filters, 0.0, f, 20 * np.pi), f, atol=1e-12)


def test_apply_semigroup_constant_mode(filters):
    # at k = 0 the semigroup keeps psi and B and damps r at rate 2(1 - q^2)
    s = filters.params.s
    f = np.ones((3, 64))
    out = semigroup.apply_semigroup(filters, 1.0, f, 10.0)
    E = expm(symbol.assemble_symbol(filters.params, 0.0).entries)
    np.testing.assert_allclose(out[:, 0], E @ np.ones(3), atol=1e-12)
    assert E[0, 0] == pytest.approx(math.exp(-2 * s))


def test_reconstruction(filters):
    assert semigroup.reconstruction_error(filters, samples=5) < 1e-8


def test_semigroup_law(filters):
    assert semigroup.semigroup_law_error(filters) < 1e-6


def test_heat_reference():
    result = semigroup.heat_reference(np.geomspace(0.1, 100.0, 7), n=1)
    assert result["pass"]
    assert result["max_rel_error"] < 0.01
    assert semigroup.heat_reference([1.0, 10.0], n=0)["pass"]


def test_heat_reference_rejects_high_order():
    with pytest.raises(ValueError):
        semigroup.heat_reference([1.0], n=2)


def test_kernel_grid_limits():
    grid = semigroup.kernel_grid([1.0, 10.0], 1.0)
    assert grid.points & (grid.points - 1) == 0
    assert grid.length >= 2 * 150
    with pytest.raises(ResolutionError):
        semigroup.kernel_grid([1e-4, 1e4], 10.0, max_points=2**10)


def test_gaussian_kernel_norms():
    grid = semigroup.kernel_grid([1.0], 1.0)
    heat = semigroup.kernel_from_multiplier(np.exp(-(grid.k**2)), grid)
    # (4 pi)^{-1/2} e^{-z^2/4}: unit mass and peak (4 pi)^{-1/2}
    assert semigroup.operator_norm(heat, grid.dz) == pytest.approx(1.0, rel=1e-8)
    assert semigroup.operator_norm(heat, grid.dz, p=1) == pytest.approx((4 * np.pi) ** -0.5, rel=1e-8)
    assert semigroup.operator_norm(heat, grid.dz, p=2) == pytest.approx((8 * np.pi) ** -0.25, rel=1e-6)
    assert semigroup.kernel_tail(heat, grid.dz) < 1e-12
    assert semigroup.centered(heat).argmax() == grid.points // 2


def test_greens_kernel_table(filters):
    table = semigroup.greens_kernel(filters, [1.0, 4.0])
    assert table.Gc.shape[0] == 2
    assert table.Gc.shape[2:] == (3, 3)
    assert table.Ge.shape == table.Gc.shape
    assert table.z_grid.size == table.Gc.shape[1]
    # the critical part keeps the k = 0 mass of I - P(0)
    p0, _ = symbol.projection_P0_P2(filters.params)
    np.testing.assert_allclose(table.mass_c[0], np.eye(3) - p0, atol=1e-8)
    assert np.all(table.opnorm_Linf["e"][1] < table.opnorm_Linf["e"][0])


def test_damped_scalar(filters):
    cert = semigroup.certify_damped_scalar(filters.params)
    assert cert.passed
    assert cert.exponent == pytest.approx(-2 * filters.params.s, rel=0.02)
    assert cert.as_dict()["id"] == "damped scalar"


def test_exponential_certificate(filters):
    cert = semigroup.certify_exponential(filters, 0, 0)
    assert cert.passed
    assert cert.details["mu0"] > 0
    with pytest.raises(ValueError):
        semigroup.certify_exponential(filters, 1, 1)


@pytest.mark.timeout(300)
def test_diffusive_certificate(filters):
    cert = semigroup.certify_diffusive(filters, 0, 0)
    assert cert.passed, cert.as_dict()
    assert cert.exponent == pytest.approx(0.0, abs=0.1)
    assert cert.details["column1_exponent"] <= -1 + 0.15


@pytest.mark.slow
@pytest.mark.timeout(600)
@pytest.mark.parametrize(("n", "m", "p"), [(1, 0, math.inf), (0, 1, math.inf), (1, 1, math.inf), (0, 0, 1.0)])
def test_diffusive_certificates(filters, n, m, p):
    assert semigroup.certify_diffusive(filters, n, m, p).passed


@pytest.mark.slow
@pytest.mark.timeout(600)
@pytest.mark.parametrize(("q", "target"), [(0.0, -2.0), (0.3, -1.0)])
def test_refined_estimate(q, target):
    cert = semigroup.certify_refined(semigroup.default_filters(RollParams(q, 1.0, 0.5)), 2)
    assert cert.target == target
    assert cert.passed, cert.as_dict()


@pytest.mark.slow
@pytest.mark.timeout(600)
def test_lemma_certificates(filters):
    certs = [
        semigroup.certify_refined(filters, 1),
        semigroup.certify_lowfreq_lemma(filters, 1, "central", 1.0),
        semigroup.certify_lowfreq_lemma(filters, 0, "stable"),
        semigroup.certify_highfreq_lemma(filters, 1),
    ]
    assert all(c.passed for c in certs), [c.as_dict() for c in certs if not c.passed]


def _assert_frechet_matches_differences(params: RollParams, k: float, t: float) -> None:
    h = 1e-4
    lam = symbol.assemble_symbol(params, k).entries
    dlam, ddlam = symbol.symbol_derivatives(params, k)
    first, second = semigroup.frechet_dk_exp(lam, dlam, ddlam, t)

    def E(kk: float) -> np.ndarray:
        return expm(t * symbol.assemble_symbol(params, kk).entries)

    np.testing.assert_allclose(first, (E(k + h) - E(k - h)) / (2 * h), atol=1e-6)
    np.testing.assert_allclose(second, (E(k + h) - 2 * E(k) + E(k - h)) / h**2, atol=1e-4)


def test_frechet_derivatives(stable_params: RollParams):
    _assert_frechet_matches_differences(stable_params, 0.5, 1.0)


@pytest.mark.parametrize("seed", range(10))
def test_frechet_derivatives_random_symbols(seed):
    rng = np.random.default_rng(seed)
    params = RollParams(0.0, 1.0, 0.0)
    for _ in range(100):
        candidate = RollParams(rng.uniform(0.0, 0.5), rng.uniform(0.5, 2.0), rng.uniform(0.0, 1.5))
        if candidate.spectrally_stable:
            params = candidate
            break
    _assert_frechet_matches_differences(params, rng.uniform(0.1, 1.5), rng.uniform(0.5, 2.0))


def test_frechet_quadrature_check(stable_params: RollParams):
    lam = symbol.assemble_symbol(stable_params, 2.0).entries
    dlam, ddlam = symbol.symbol_derivatives(stable_params, 2.0)
    with pytest.raises(QuadratureError):
        semigroup.frechet_dk_exp(lam, dlam, ddlam, 1.0, order=1)
