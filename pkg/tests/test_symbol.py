import numpy as np
import pytest

from gl_rolls import symbol
from gl_rolls.symbol import RollParams
from gl_rolls.utils import BranchContinuationError, ConfigurationError, IllConditionedError


@pytest.mark.parametrize(
    "kwargs",
    [
        {"q": 1.0, "D": 1.0},
        {"q": 0.2, "D": 0.0},
        {"q": 0.2, "D": -1.0},
        {"q": float("nan"), "D": 1.0},
    ],
)
def test_invalid_params(kwargs):
    with pytest.raises(ConfigurationError):
        RollParams(**kwargs)


def test_symbol_entries(stable_params: RollParams):
    q, D, g, s = 0.3, 1.0, 0.5, 0.91
    L = symbol.assemble_symbol(stable_params, 2.0).entries
    expected = np.array(
        [
            [-4 - 2 * s, -2 * q, 1.0],
            [-8 * q, -4.0, 0.0],
            [-8 * g * s, 0.0, -4 * D],
        ]
    )
    np.testing.assert_allclose(L, expected, atol=1e-14)


def test_char_poly_matches_matrix(stable_params: RollParams):
    for k in (0.0, 0.3, 1.7, 8.0):
        a2, a1, a0 = symbol.char_poly_coeffs(stable_params, k)
        expected = np.poly(symbol.assemble_symbol(stable_params, k).entries)
        np.testing.assert_allclose([a2, a1, a0], expected[1:], rtol=1e-12, atol=1e-10)


def test_hurwitz_quartic_identity():
    for params in (RollParams(0.3, 1.0, 0.5), RollParams(0.1, 4.0, 2.0), RollParams(0.5, 0.5, 0.0)):
        b4, b2, b0 = symbol.hurwitz_quartic(params)
        k = np.linspace(-5, 5, 41)
        a2, a1, a0 = symbol.char_poly_stack(params, k)
        np.testing.assert_allclose(a2 * a1 - a0, 2 * k**2 * (b4 * k**4 + b2 * k**2 + b0), rtol=1e-12, atol=1e-9)


def test_high_frequency_limit(stable_params: RollParams):
    l_small = 1e-4
    scaled = l_small**2 * symbol.assemble_symbol(stable_params, 1 / l_small).entries
    np.testing.assert_allclose(scaled, symbol.high_frequency_limit(stable_params), atol=1e-6)


def test_symbol_derivatives_finite_difference(stable_params: RollParams):
    k, h = 0.7, 1e-4
    first, second = symbol.symbol_derivatives(stable_params, k)
    plus = symbol.assemble_symbol(stable_params, k + h).entries
    minus = symbol.assemble_symbol(stable_params, k - h).entries
    np.testing.assert_allclose(first, (plus - minus) / (2 * h), atol=1e-7)
    centre = symbol.assemble_symbol(stable_params, k).entries
    np.testing.assert_allclose(second, (plus - 2 * centre + minus) / h**2, atol=1e-4)


def test_eig3_sorted_and_checked(stable_params: RollParams):
    eigs = symbol.eig3(symbol.assemble_symbol(stable_params, 0.0).entries)
    np.testing.assert_allclose(eigs, [-2 * stable_params.s, 0.0, 0.0], atol=1e-12)
    with pytest.raises(IllConditionedError):
        symbol.eig3(np.ones((2, 2)))
    with pytest.raises(IllConditionedError):
        symbol.eig3(np.full((3, 3), np.nan))


@pytest.mark.parametrize(
    ("params", "verdict"),
    [
        (RollParams(0.3, 1.0, 0.5), "stable"),
        (RollParams(0.6, 1.0, 0.0), "unstable"),
        (RollParams(0.0, 1.0, 0.0), "stable"),
        (RollParams(3**-0.5, 1.0, 0.0), "boundary"),
    ],
)
def test_routh_hurwitz_verdict(params, verdict):
    report = symbol.routh_hurwitz_check(params, np.linspace(-10, 10, 201))
    assert report.verdict == verdict


def test_routh_hurwitz_margin_sign(stable_params, eckhaus_params):
    k = np.linspace(-3, 3, 61)
    assert symbol.routh_hurwitz_check(stable_params, k).margin > 0
    assert symbol.routh_hurwitz_check(eckhaus_params, k).margin < 0


def test_coupling_instability_without_eckhaus():
    # q^2 < 1/3 but D + gamma = 0.1 < 2 D q^2 / (1 - q^2) = 2/3
    params = RollParams(0.5, 1.0, -0.9)
    assert params.eckhaus_margin > 0
    report = symbol.routh_hurwitz_check(params, np.linspace(-2, 2, 81))
    assert report.verdict == "unstable"
    assert "D+γ" in report.reason


def test_lambda1_pm_closed_form():
    split = symbol.lambda1_pm(RollParams(0.0, 1.0, 0.0))
    assert split.plus == pytest.approx(-1.0)
    assert split.minus == pytest.approx(-1.0)
    assert not split.complex_pair


def test_lambda1_pm_complex_pair():
    # q^2/(1-q^2) = 1/3 and D < 1 put the discriminant at 2 (1/3) (D - 1) < 0
    params = RollParams(0.5, 0.5, 7 / 6)
    assert params.spectrally_stable
    split = symbol.lambda1_pm(params)
    assert split.complex_pair
    assert split.plus == split.minus == pytest.approx(-1.0)


def test_curvatures_match_branches(stable_params: RollParams):
    split = symbol.lambda1_pm(stable_params)
    plus, minus = symbol.curvatures_from_branches(stable_params)
    assert plus == pytest.approx(split.plus, abs=1e-6)
    assert minus == pytest.approx(split.minus, abs=1e-6)


def test_spectral_curves(stable_params: RollParams):
    k = np.round(np.arange(-300, 301) * 0.01, 10)
    data = symbol.spectral_curves(stable_params, k)
    assert data.curves.shape == (k.size, 3)
    assert data.max_real_nonzero < 0
    assert data.curves[k == 0, 2][0].real == pytest.approx(-2 * stable_params.s)
    assert 0 < data.k0 <= 2
    assert data.mu > 0
    assert set(data.as_dict()) >= {"lambda1_plus", "lambda1_minus", "k0", "mu"}


def test_spectral_curves_rejects_unstable(eckhaus_params: RollParams):
    with pytest.raises(ConfigurationError):
        symbol.spectral_curves(eckhaus_params, np.linspace(-1, 1, 21))


def test_spectral_curves_tight_continuity(stable_params: RollParams):
    with pytest.raises(BranchContinuationError):
        symbol.spectral_curves(stable_params, np.linspace(-10, 10, 11), continuity_bound=1e-3)


def test_select_k0():
    k = np.linspace(-2, 2, 401)
    gap = 1.0 - 0.9 * k**2
    curves = np.column_stack([np.zeros_like(k), np.zeros_like(k), -gap]).astype(complex)
    # the gap falls below a quarter of 1.0 where k^2 > 0.75/0.9
    assert symbol.select_k0(k, curves) == pytest.approx(0.5 * np.sqrt(0.75 / 0.9), abs=0.01)
    flat = np.column_stack([np.zeros_like(k), np.zeros_like(k), -np.ones_like(k)]).astype(complex)
    assert symbol.select_k0(k, flat, k0_max=0.5) == 0.5


def test_projection_at_zero(stable_params: RollParams):
    p0, _ = symbol.projection_P0_P2(stable_params)
    numeric = symbol.spectral_projection(stable_params, 0.0)[0]
    np.testing.assert_allclose(numeric.real, p0, atol=1e-10)
    np.testing.assert_allclose(numeric @ numeric, numeric, atol=1e-10)


@pytest.mark.parametrize("params", [RollParams(0.3, 1.0, 0.5), RollParams(0.0, 2.0, 1.0), RollParams(0.2, 1.0, 0.0)])
def test_projection_second_derivative(params):
    _, p2 = symbol.projection_P0_P2(params)
    np.testing.assert_allclose(symbol.projection_second_derivative(params), p2, atol=1e-6)


def test_projection_identity(stable_params: RollParams):
    assert symbol.verify_specid(stable_params, [0.0, 0.1, 0.5]) < 1e-10


def test_reduced_criteria_agree_with_stability():
    for params in (RollParams(0.3, 1.0, 0.5), RollParams(0.6, 1.0, 0.0), RollParams(0.2, 1.0, 0.0)):
        criteria = symbol.reduced_phase_diffusion_check(params)
        assert criteria.consistent


def test_reduced_criteria_at_no_coupling():
    # gamma = 0: both criteria reduce to q^2 < 1/3
    criteria = symbol.reduced_phase_diffusion_check(RollParams(0.5, 1.0, 0.0))
    assert criteria.c2 > 0
    criteria = symbol.reduced_phase_diffusion_check(RollParams(0.6, 1.0, 0.0))
    assert criteria.c2 < 0


def test_stability_scan():
    k = np.round(np.arange(-200, 201) * 0.05, 10)
    records = symbol.stability_scan([0.0, 0.3, 0.6], [1.0], [0.0, 0.5], k)
    assert len(records) == 6
    for record in records:
        assert record.k0_error < 1e-10
        if record.stable:
            assert record.max_real_nonzero < 0
    eckhaus = next(r for r in records if r.params == RollParams(0.6, 1.0, 0.0))
    assert not eckhaus.stable
    assert eckhaus.max_real_nonzero > 0


def test_projection_at_zero_closed_form():
    p0, _ = symbol.projection_P0_P2(RollParams(0.0, 1.0, 0.0))
    np.testing.assert_allclose(p0[0], [1.0, 0.0, -0.5])
    p0, _ = symbol.projection_P0_P2(RollParams(0.5, 1.0, 0.0))
    np.testing.assert_allclose(p0[0], [1.0, 2 / 3, -2 / 3])


def test_high_frequency_spectrum_at_zero_wavenumber():
    report = symbol.routh_hurwitz_check(RollParams(0.0, 1.0, 0.0), [0.0, 1.0])
    np.testing.assert_allclose(np.sort(np.linalg.eigvals(report.l_inf).real), [-1.0, -1.0, -1.0])
    assert report.l_inf_bound == pytest.approx(-1.0)
