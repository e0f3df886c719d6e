import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hdoms.preprocess import (PreprocessConfig, bin_index, dimension, preprocess,
                              refine_peaks, vectorize)
from hdoms.spectrum import RawSpectrum


def spectrum(mz, intensity, sid="s"):
    return RawSpectrum(sid, 500.0, 2, np.asarray(mz, float), np.asarray(intensity, float))


@pytest.mark.parametrize("lo, hi, size, expected", [
    (0, 2000, 0.04, 50000),
    (101, 1500, 0.05, 27980),
    (0, 10, 10, 1),
    (0, 10, 3, 4),
])
def test_dimension(lo, hi, size, expected):
    assert dimension(PreprocessConfig(lo, hi, size)) == expected


@pytest.mark.parametrize("kwargs", [
    dict(min_mz=10, max_mz=10), dict(bin_size=0), dict(max_peaks=5, min_peaks=6),
    dict(min_peaks=0), dict(intensity_floor=1.0), dict(scaling="log"),
])
def test_config_invariants(kwargs):
    with pytest.raises(ValueError):
        PreprocessConfig(**kwargs)


def test_noise_floor_removes_weak_peak():
    config = PreprocessConfig(min_peaks=1)
    s = spectrum([200, 300, 400], [1000, 9, 10])
    out = refine_peaks(s, config)
    np.testing.assert_array_equal(out.mz, [200, 400])


def test_mz_range_filter():
    config = PreprocessConfig(min_mz=101, max_mz=1500, min_peaks=1)
    s = spectrum([100.99, 101.0, 1499.99, 1500.0], [5, 5, 5, 5])
    np.testing.assert_array_equal(refine_peaks(s, config).mz, [101.0, 1499.99])


def test_exactly_max_peaks_unchanged():
    config = PreprocessConfig(max_peaks=10, min_peaks=1)
    mz = np.arange(200, 210, dtype=float)
    s = spectrum(mz, np.linspace(10, 100, 10))
    assert refine_peaks(s, config) == s


def top_n_oracle(mz, intensity, n):
    """Sort-and-truncate: intensity descending, lower m/z first on ties."""
    pairs = sorted(zip(mz, intensity), key=lambda p: (-p[1], p[0]))[:n]
    return sorted(pairs)


def test_top_n_with_ties():
    rng = np.random.default_rng(3)
    mz = np.sort(rng.choice(np.arange(200.0, 1400.0), size=60, replace=False))
    intensity = rng.integers(50, 60, size=60).astype(float)  # many ties
    config = PreprocessConfig(max_peaks=50, min_peaks=1, intensity_floor=0)
    out = refine_peaks(spectrum(mz, intensity), config)
    expected = top_n_oracle(mz, intensity, 50)
    assert list(zip(out.mz, out.intensity)) == expected


def test_too_few_peaks_is_unprocessable():
    config = PreprocessConfig(min_peaks=3)
    assert refine_peaks(spectrum([200, 300], [1, 1]), config) is None
    assert refine_peaks(spectrum([50, 60, 70], [1, 1, 1]), config) is None
    assert refine_peaks(spectrum([200, 300, 400], [0, 0, 0]), config) is None


def test_bin_boundaries():
    config = PreprocessConfig(min_mz=100, max_mz=200, bin_size=0.05)
    np.testing.assert_array_equal(bin_index([100.0, 100.049, 100.05, 199.9999], config),
                                  [0, 0, 1, 1999])


def test_colliding_peaks_summed_then_normalized():
    config = PreprocessConfig(min_mz=100, max_mz=200, bin_size=0.05, min_peaks=1)
    sv = vectorize(spectrum([150.0, 150.01], [0.4, 0.6]), config)
    np.testing.assert_array_equal(sv.bins, [1000])
    np.testing.assert_array_equal(sv.intensities, [1.0])


def test_sqrt_scaling():
    config = PreprocessConfig(min_mz=100, max_mz=200, bin_size=1, min_peaks=1, scaling="sqrt")
    sv = vectorize(spectrum([110, 120], [25, 100]), config)
    np.testing.assert_allclose(sv.intensities, [0.5, 1.0])


def test_vectorize_rejects_empty():
    with pytest.raises(ValueError):
        vectorize(spectrum([], []), PreprocessConfig())


raw_spectra = st.lists(
    st.tuples(st.floats(50, 1600), st.floats(0, 1e5)), min_size=1, max_size=120,
    unique_by=lambda p: p[0],
).map(lambda peaks: spectrum(*zip(*sorted(peaks))))


@settings(max_examples=100, deadline=None)
@given(raw_spectra, st.integers(1, 60), st.sampled_from(["none", "sqrt"]))
def test_refine_and_vectorize_properties(s, max_peaks, scaling):
    config = PreprocessConfig(max_peaks=max_peaks, min_peaks=1, scaling=scaling)
    refined = refine_peaks(s, config)
    if refined is None:
        return
    assert refine_peaks(refined, config) == refined
    assert len(refined) <= max_peaks
    sv = vectorize(refined, config)
    assert np.all(np.diff(sv.bins) > 0)
    assert sv.bins.min() >= 0 and sv.bins.max() < dimension(config)
    assert sv.intensities.max() == 1.0
    assert np.all(sv.intensities > 0)
    assert len(sv) <= len(refined)
    if len(np.unique(bin_index(refined.mz, config))) == len(refined):
        assert len(sv) == len(refined)


def test_sparsity_under_one_percent():
    from hdoms.synth import SynthParams, generate
    config = PreprocessConfig()
    data = generate(SynthParams(n_library=200, n_query=0), seed=5)
    for s in data.library:
        sv = preprocess(s, config)
        assert len(sv) / sv.dims < 0.01
