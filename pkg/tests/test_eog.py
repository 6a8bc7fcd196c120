import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ocular import eog, synth

RATE = 256.0
T = np.arange(0, 20, 1 / RATE)
MID = slice(len(T) // 4, 3 * len(T) // 4)
finite = st.floats(-1e3, 1e3, allow_nan=False)


def gain_db(f):
    x = np.sin(2 * np.pi * f * T)
    return 20 * np.log10(eog.bandpass(x)[MID].std() / x[MID].std())


def test_bandpass_response():
    assert abs(10 ** (gain_db(10) / 20) - 1) <= 0.05
    for f in (0.8, 2, 5, 10, 15):
        assert abs(gain_db(f)) <= 1.0
    assert gain_db(70) <= -20 and gain_db(85) <= -20
    assert abs(eog.bandpass(np.full(len(T), 40.0)).mean()) < 0.4
    with pytest.raises(ValueError):
        eog.bandpass(T, RATE, 30, 10)
    with pytest.raises(ValueError):
        eog.bandpass(T, RATE, 1, 200)


def test_normalize():
    assert np.array_equal(eog.normalize([5, 5, 5]), [0, 0, 0])
    assert np.array_equal(eog.normalize([1, 3]), [-1, 1])
    r = np.random.default_rng(0).normal(10, 3, 1000)
    assert abs(eog.normalize(r).mean()) < 1e-12
    with pytest.raises(ValueError):
        eog.normalize([])


@settings(max_examples=50)
@given(arrays(np.float64, st.integers(1, 60), elements=finite))
def test_normalize_properties(x):
    d = eog.normalize(x)
    assert abs(d.mean()) <= 1e-12 * max(1.0, np.abs(x).max())
    assert np.allclose(eog.normalize(d), d, atol=1e-9)


def test_truncate_examples():
    d = np.array([100.0, 15.0, -15.0, 15.01, -40.0, 0.0, -100.0])
    assert np.array_equal(eog.truncate(d), [100.0, 0, 0, 15.01, -40.0, 0, -100.0])
    assert np.array_equal(eog.truncate(d, 1e-9), d)
    assert np.array_equal(eog.truncate(d, 0.99), [100.0, 0, 0, 0, 0, 0, -100.0])
    assert np.array_equal(eog.truncate(np.zeros(4)), np.zeros(4))


@settings(max_examples=50)
@given(arrays(np.float64, st.integers(1, 60), elements=finite), st.floats(0.01, 0.99))
def test_truncate_properties(d, frac):
    m = eog.truncate(d, frac)
    assert (np.abs(m) <= np.abs(d)).all()
    assert (m[d == 0] == 0).all()
    kept = m != 0
    assert np.array_equal(m[kept], d[kept])
    assert (np.abs(d[~kept]) <= frac * np.abs(d).max()).all()


def test_per_unit():
    s = eog.per_unit([1.0, 4.0, -2.0, 0.0])
    assert np.array_equal(s, [0.25, 1.0, -0.5, 0.0])
    assert np.array_equal(eog.per_unit(s), s)
    with pytest.raises(ZeroDivisionError):
        eog.per_unit(np.zeros(3))
    p = eog.per_unit_polar([2.0, -8.0, 1.0, -4.0])
    assert np.array_equal(p, [1.0, -1.0, 0.5, -0.5])


@settings(max_examples=50)
@given(arrays(np.float64, st.integers(1, 40), elements=st.floats(0.01, 1e3)))
def test_per_unit_idempotent(x):
    s = eog.per_unit(x)
    assert s.max() == 1.0
    assert np.allclose(eog.per_unit(s), s, rtol=1e-15)


def test_isolate_peaks_pulses():
    s = np.r_[np.zeros(5), np.full(4, 0.6), np.zeros(3), -np.full(6, 1.0), np.zeros(2)]
    peaks = eog.isolate_peaks(s)
    assert [(p.start, p.end, p.amplitude, p.sign) for p in peaks] == [(5, 8, 0.6, 1), (12, 17, 1.0, -1)]
    assert peaks[0].peak_velocity == 0.0
    assert eog.isolate_peaks(np.zeros(10)) == []


def test_sigmoid_peak_velocity():
    tau = 0.02
    s = synth.sigmoid_saccade(T[:512], 1.0, 1.0, tau)
    peaks = eog.isolate_peaks(eog.per_unit(eog.truncate(s)))
    assert len(peaks) == 1
    expected = 1.0 / (4 * tau) / RATE
    assert abs(peaks[0].peak_velocity - expected) <= 0.02 * expected
    assert peaks[0].velocity_per_second(RATE) == pytest.approx(peaks[0].peak_velocity * RATE)


def test_condition_pipeline():
    t = T[:1024]
    raw = 80 * (synth.sigmoid_saccade(t, 1.0, 1.0, 0.02) - synth.sigmoid_saccade(t, 2.5, 1.0, 0.02)) + 5
    s = eog.condition(raw, RATE)
    peaks = eog.isolate_peaks(s)
    assert max(p.amplitude for p in peaks) == 1.0
    assert all(p.amplitude <= 1.0 for p in peaks)


def test_pearson():
    a = np.random.default_rng(1).normal(size=1000)
    b = np.random.default_rng(2).normal(size=1000)
    assert eog.pearson(a, a) == 1.0
    assert eog.pearson(a, -a) == -1.0
    assert abs(eog.pearson(a, b)) < 0.1
    with pytest.raises(ZeroDivisionError):
        eog.pearson(a[:5], np.ones(5))
    with pytest.raises(ValueError):
        eog.pearson(a[:5], a[:4])


@settings(max_examples=50)
@given(arrays(np.float64, 30, elements=st.floats(-100, 100)), st.integers(0, 10**6),
       st.floats(0.1, 10), st.floats(-50, 50))
def test_pearson_affine_invariant(a, seed, k, c):
    b = np.random.default_rng(seed).normal(size=30)
    if a.std() < 1e-3:
        return
    assert eog.pearson(k * a + c, b) == pytest.approx(eog.pearson(a, b), abs=1e-9)


def test_csv_round_trip(tmp_path):
    x = np.round(np.random.default_rng(3).normal(size=50), 6)
    eog.write_csv(tmp_path / "e.csv", x, 256)
    y, rate = eog.read_csv(tmp_path / "e.csv")
    assert rate == 256.0 and np.array_equal(x, y)
