import math

import numpy as np
import pytest

from sievelab import logging_config as logging_config
from sievelab.correlated_noise import (
    GaussianKernel,
    QuadratureSpec,
    TabulatedSpectrum,
    char_function,
    correlation_regime,
    decoherence_g,
    entropy_production_correlated,
    kernel_samples_to_spectrum,
    kernel_to_spectrum,
    kernel_value,
    load_spectrum,
    long_correlation_map,
    max_decoherence_rate,
    position_entropy_production,
    save_spectrum,
    short_correlation_limit,
    spectral_view,
    spectral_width,
    spectrum_to_kernel,
    width_condition,
)
from sievelab.errors import (
    InvalidParameterError,
    ReportIOError,
    TruncatedSpectrumError,
    UnderResolvedError,
)
from sievelab.oscillator_core import (
    OscillatorParams,
    SqueezedCoherentParams,
    fock_state,
    gaussian_moments,
    make_state,
)
from sievelab.quadratic_channels import entropy_production_general

UNIT = OscillatorParams()
# Position spread of a coherent state for m = omega = hbar = 1
COHERENT_WIDTH = math.sqrt(0.5)


def coherent_rate(delta_k):
    """int e^{-k^2 / 2 delta_k^2} (1 - e^{-k^2 / 2}) dk for a unit-peak spectrum."""
    return math.sqrt(2 * math.pi) * delta_k * (1 - 1 / math.sqrt(1 + delta_k**2))


def test_gaussian_kernel_pairing():
    kern = GaussianKernel.from_spectrum(1.0, 0.1)
    assert kern.delta_k == pytest.approx(0.1)
    assert kern.peak_density() == pytest.approx(1.0)
    assert kern.density(0.1) == pytest.approx(math.exp(-0.5))

    assert GaussianKernel(1.0, 2.0).delta_k == pytest.approx(GaussianKernel(1.0, 1.0).delta_k / 2)

    with pytest.raises(InvalidParameterError):
        GaussianKernel(0.0, 1.0)
    with pytest.raises(InvalidParameterError):
        GaussianKernel(1.0, -1.0)


def test_kernel_spectrum_round_trip():
    kern = GaussianKernel(1.0, 1.0)
    spec = kernel_to_spectrum(kern)
    assert spec.k_grid.size == 1025
    assert spec.k_grid[512] == 0.0
    assert not spec.truncated

    assert spectrum_to_kernel(spec, 0.0) == pytest.approx(1.0, rel=1e-8)
    assert spectrum_to_kernel(spec, 1.0) == pytest.approx(math.exp(-1), rel=1e-8)
    r = np.linspace(0.0, 3.0, 13)
    assert np.allclose(spectrum_to_kernel(spec, r), kernel_value(kern, r), rtol=1e-8, atol=1e-12)
    assert spectrum_to_kernel(spec, math.inf) == 0.0

    # And back from kernel samples
    r_grid = np.linspace(-12.0, 12.0, 2401)
    rebuilt = kernel_samples_to_spectrum(r_grid, kernel_value(kern, r_grid), spec.k_grid)
    assert np.allclose(rebuilt.weights, spec.weights, rtol=1e-8, atol=1e-12 * spec.peak)


def test_kernel_to_spectrum_validation():
    kern = GaussianKernel(1.0, 1.0)
    with pytest.raises(TruncatedSpectrumError):
        kernel_to_spectrum(kern, k_max=5.0)
    with pytest.raises(InvalidParameterError):
        kernel_to_spectrum(kern, n_k=1024)


def test_tabulated_spectrum_validation():
    with pytest.raises(InvalidParameterError):
        TabulatedSpectrum([0.0, 1.0, 2.0], [1.0, 1.0, 1.0])
    with pytest.raises(InvalidParameterError):
        TabulatedSpectrum([-1.0, 0.0, 1.0], [0.5, 1.0, 0.2])
    with pytest.raises(InvalidParameterError):
        TabulatedSpectrum([-1.0, 0.0, 1.0], [-0.1, 1.0, -0.1])

    truncated = TabulatedSpectrum([-1.0, 0.0, 1.0], [0.5, 1.0, 0.5])
    assert truncated.truncated
    with pytest.raises(TruncatedSpectrumError):
        spectral_view(truncated, 1.0)


def test_spectral_width_and_long_map():
    kern = GaussianKernel(0.7, 3.0)
    spec = kernel_to_spectrum(kern, hbar=0.5)
    assert spectral_width(kern).delta_k == pytest.approx(math.sqrt(2) / 3.0)
    assert spectral_width(spec).delta_k == pytest.approx(math.sqrt(2) / 3.0, rel=1e-8)

    mapped = long_correlation_map(kern, 0.5)
    assert mapped.D_pp == pytest.approx(0.7 / 9.0)
    assert (mapped.D_qq, mapped.D_pq, mapped.lam) == (0.0, 0.0, 0.0)
    assert long_correlation_map(spec, 0.5).D_pp == pytest.approx(mapped.D_pp, rel=1e-8)

    doubled = TabulatedSpectrum(spec.k_grid, 2 * spec.weights)
    assert long_correlation_map(doubled, 0.5).D_pp == pytest.approx(2 * mapped.D_pp, rel=1e-12)

    # Twice the width at the same total weight 2 c0 / hbar
    wider = GaussianKernel(0.7, 3.0 / 2)
    assert long_correlation_map(wider).D_pp == pytest.approx(4 * long_correlation_map(kern).D_pp)


def test_decoherence_function():
    kern = GaussianKernel(1.0, 1.0)
    assert decoherence_g(kern, 0.0) == 0.0
    assert decoherence_g(kern, 1.0) == pytest.approx(2 * (1 - math.exp(-1)))
    assert decoherence_g(kern, math.inf) == pytest.approx(2.0)
    assert decoherence_g(kern, -1.5) == decoherence_g(kern, 1.5)
    assert max_decoherence_rate(kern) == 2.0

    assert short_correlation_limit(GaussianKernel(0.5, 1.0), 1.0) == pytest.approx(1.0)
    assert short_correlation_limit(kern, 0.0) == 0.0


def test_char_function():
    coherent = SqueezedCoherentParams()
    assert char_function(coherent, 0.0, 0.4, UNIT) == 1.0
    assert abs(char_function(coherent, 1.0, 0.4, UNIT)) == pytest.approx(math.exp(-0.25))
    displaced = SqueezedCoherentParams(alpha=2.0)
    assert abs(char_function(displaced, 1.0, 1.3, UNIT)) == pytest.approx(
        abs(char_function(coherent, 1.0, 1.3, UNIT))
    )

    k = np.array([-1.0, 0.0, 0.5, 1.0])
    assert np.all(np.abs(char_function(SqueezedCoherentParams(0j, 0.5, 1.0), k, 0.9, UNIT)) <= 1.0)


def test_char_function_fock_matches_gaussian():
    params = SqueezedCoherentParams(0.3, 0.2, 0.5)
    state = make_state(params, 40)
    k = np.array([0.0, 0.5, 1.0])
    fock = char_function(state, k, 0.7, UNIT)
    gaussian = char_function(params, k, 0.7, UNIT)
    assert np.allclose(fock, gaussian, atol=1e-6)
    assert fock[0] == 1.0

    with pytest.raises(UnderResolvedError):
        char_function(fock_state(0, 10), 20.0, 0.0, UNIT)


def test_coherent_state_example():
    kern = GaussianKernel.from_spectrum(1.0, 0.1)
    result = entropy_production_correlated(SqueezedCoherentParams(), kern, UNIT, 1.0)
    assert result.converged
    assert result.value == pytest.approx(coherent_rate(0.1), rel=1e-7)
    assert result.value == pytest.approx(1.244e-3, rel=1e-3)

    # Displacement only adds a phase
    displaced = entropy_production_correlated(SqueezedCoherentParams(alpha=3.0), kern, UNIT, 1.0)
    assert displaced.value == pytest.approx(result.value, abs=1e-8)


def test_correlated_production_is_monotone_and_bounded():
    kern = GaussianKernel(0.2, 1.5)
    state = SqueezedCoherentParams(0j, 0.7, 2.0)
    values = [
        entropy_production_correlated(state, kern, UNIT, t).value for t in (0.0, 0.5, 1.0, 3.0, 7.0)
    ]
    assert values[0] == 0.0
    assert all(later >= earlier for earlier, later in zip(values, values[1:]))
    assert values[-1] <= short_correlation_limit(kern, 7.0)


def test_tabulated_spectrum_matches_gaussian_kernel():
    kern = GaussianKernel.from_spectrum(2.0, 0.6)
    state = SqueezedCoherentParams(0j, 0.5, 1.0)
    closed = entropy_production_correlated(state, kern, UNIT, 2.5).value
    tabulated = entropy_production_correlated(state, kernel_to_spectrum(kern), UNIT, 2.5).value
    assert tabulated == pytest.approx(closed, rel=1e-6)


def test_fock_path_matches_gaussian_path():
    kern = GaussianKernel.from_spectrum(1.0, 0.5)
    fock = entropy_production_correlated(fock_state(0, 40), kern, UNIT, 1.0, QuadratureSpec(rel_tol=1e-9))
    gaussian = entropy_production_correlated(SqueezedCoherentParams(), kern, UNIT, 1.0)
    assert fock.value == pytest.approx(gaussian.value, rel=1e-5)

    with pytest.raises(UnderResolvedError):
        entropy_production_correlated(fock_state(0, 10), GaussianKernel.from_spectrum(1.0, 2.0), UNIT, 1.0)


def test_fock_state_produces_more_than_vacuum():
    kern = GaussianKernel.from_spectrum(1.0, 0.5)
    vacuum = entropy_production_correlated(fock_state(0, 60), kern, UNIT, 1.0).value
    excited = entropy_production_correlated(fock_state(2, 60), kern, UNIT, 1.0).value
    assert excited > vacuum


def test_position_representation_matches_spectral_integral():
    kern = GaussianKernel(0.3, 0.8)
    state = SqueezedCoherentParams(0j, 0.6, 2.2)
    spectral = entropy_production_correlated(state, kern, UNIT, 3.0).value
    assert position_entropy_production(state, kern, UNIT, 3.0).value == pytest.approx(spectral, rel=1e-7)

    spec = kernel_to_spectrum(kern)
    assert position_entropy_production(state, spec, UNIT, 3.0).value == pytest.approx(spectral, rel=1e-5)


def test_short_correlation_limit_is_state_independent():
    kern = GaussianKernel(1.0, 0.02 * COHERENT_WIDTH)
    limit = short_correlation_limit(kern, 1.0)
    coherent = entropy_production_correlated(SqueezedCoherentParams(), kern, UNIT, 1.0).value
    squeezed = entropy_production_correlated(SqueezedCoherentParams(0j, 2.0, 0.0), kern, UNIT, 1.0).value
    assert coherent == pytest.approx(limit, rel=0.02)
    assert squeezed == pytest.approx(limit, rel=0.02)
    assert abs(squeezed - coherent) < 0.01 * coherent
    assert coherent <= limit and squeezed <= limit


def test_long_correlation_limit_matches_quadratic_map():
    kern = GaussianKernel.from_spectrum(1.0, 0.02 * COHERENT_WIDTH)
    coherent = SqueezedCoherentParams()
    correlated = entropy_production_correlated(coherent, kern, UNIT, 1.0).value
    mapped = entropy_production_general(
        gaussian_moments(coherent, UNIT), long_correlation_map(kern), UNIT, 1.0
    )
    assert correlated == pytest.approx(mapped, rel=5e-3)


def test_regime_moves_from_long_map_to_short_limit():
    c0 = 1.0
    coherent = SqueezedCoherentParams()
    values = []
    for ratio in (50.0, 5.0, 1.0, 0.2, 0.02):
        kern = GaussianKernel(c0, ratio * COHERENT_WIDTH)
        values.append(entropy_production_correlated(coherent, kern, UNIT, 1.0).value)
    assert all(later > earlier for earlier, later in zip(values, values[1:]))
    assert values[-1] < short_correlation_limit(GaussianKernel(c0, 1.0), 1.0)


def test_width_condition():
    scale = COHERENT_WIDTH
    coherent = gaussian_moments(SqueezedCoherentParams(), UNIT)
    assert width_condition(coherent, 0.01 * scale, UNIT).satisfied
    saturated = width_condition(coherent, scale, UNIT)
    assert not saturated.satisfied
    assert saturated.margin == pytest.approx(1.0)
    assert width_condition(SqueezedCoherentParams(), 0.05 * scale, UNIT).margin == pytest.approx(0.05)
    assert width_condition(coherent, 100.0, UNIT).regime == "short"

    # A squeezed state narrows one of the bounds
    squeezed = width_condition(SqueezedCoherentParams(0j, 1.0, 0.0), 0.05 * scale, UNIT)
    assert squeezed.margin == pytest.approx(0.05 * math.e)


def test_correlation_regime():
    assert correlation_regime(0.05) == "long"
    assert correlation_regime(0.1) == "intermediate"
    assert correlation_regime(50.0) == "intermediate"
    assert correlation_regime(50.1) == "short"


def test_spectrum_file(tmp_path):
    spec = kernel_to_spectrum(GaussianKernel(1.0, 2.0), n_k=101)
    path = tmp_path / "spectrum.txt"
    save_spectrum(spec, path)
    loaded = load_spectrum(path)
    assert np.array_equal(loaded.k_grid, spec.k_grid)
    assert np.array_equal(loaded.weights, spec.weights)

    with pytest.raises(ReportIOError):
        load_spectrum(tmp_path / "missing.txt")

    three_columns = tmp_path / "bad.txt"
    three_columns.write_text("0 1 2\n1 2 3\n")
    with pytest.raises(ReportIOError):
        load_spectrum(three_columns)
