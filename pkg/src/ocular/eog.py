"""EOG conditioning (band-pass, mean removal, truncation, per-unit), saccadic peaks, correlation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import butter, sosfiltfilt

EOG_RATE = 256.0


def bandpass(x, rate: float = EOG_RATE, f_lo: float = 0.4, f_hi: float = 30.0, order: int = 2) -> np.ndarray:
    """Zero-phase Butterworth band-pass (``order`` poles per band edge, run forward and back)."""
    if rate <= 0:
        raise ValueError("rate must be positive")
    if not 0 < f_lo < f_hi < rate / 2:
        raise ValueError(f"need 0 < f_lo < f_hi < {rate / 2}")
    x = np.asarray(x, dtype=np.float64)
    sos = butter(order, [f_lo, f_hi], btype="bandpass", fs=rate, output="sos")
    return sosfiltfilt(sos, x)


def normalize(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.size == 0:
        raise ValueError("empty series")
    d = x - x.mean()
    return d - d.mean()  # second pass takes out the rounding left by the first


def truncate(x, frac: float = 0.15) -> np.ndarray:
    """Zero every sample with ``|d| <= frac * max|d|``."""
    if not 0 < frac < 1:
        raise ValueError("frac must lie in (0, 1)")
    d = np.asarray(x, dtype=np.float64)
    peak = np.abs(d).max() if d.size else 0.0
    if peak == 0:
        return d.copy()
    return np.where(np.abs(d) > frac * peak, d, 0.0)


def per_unit(x) -> np.ndarray:
    """Divide by the absolute value of the (signed) maximum."""
    m = np.asarray(x, dtype=np.float64)
    top = abs(m.max()) if m.size else 0.0
    if top == 0:
        raise ZeroDivisionError("per-unit scaling needs a nonzero maximum")
    return m / top


def per_unit_polar(x) -> np.ndarray:
    """Positive samples over the maximum, negative samples over |minimum|."""
    m = np.asarray(x, dtype=np.float64)
    if not np.any(m):
        raise ZeroDivisionError("per-unit scaling of an all-zero series")
    out = np.zeros_like(m)
    pos, neg = m > 0, m < 0
    if pos.any():
        out[pos] = m[pos] / m.max()
    if neg.any():
        out[neg] = m[neg] / abs(m.min())
    return out


@dataclass(frozen=True)
class SaccadePeak:
    start: int
    end: int  # inclusive
    amplitude: float
    peak_velocity: float  # per unit per sample
    sign: int

    def velocity_per_second(self, rate: float) -> float:
        return self.peak_velocity * rate


def isolate_peaks(s) -> list[SaccadePeak]:
    """Maximal nonzero runs of a truncated per-unit series."""
    s = np.asarray(s, dtype=np.float64)
    nz = np.r_[False, s != 0, False]
    edges = np.diff(nz.astype(np.int8))
    starts = np.nonzero(edges == 1)[0]
    ends = np.nonzero(edges == -1)[0] - 1
    peaks = []
    for a, b in zip(starts, ends):
        run = s[a:b + 1]
        k = int(np.argmax(np.abs(run)))
        v = np.abs(np.diff(run))
        peaks.append(SaccadePeak(int(a), int(b), float(abs(run[k])), float(v.max()) if v.size else 0.0,
                                 1 if run[k] > 0 else -1))
    return peaks


def condition(raw, rate: float = EOG_RATE, frac: float = 0.15, f_lo: float = 0.4, f_hi: float = 30.0) -> np.ndarray:
    """Filter, remove the mean, truncate and scale each polarity to per unit."""
    d = normalize(bandpass(raw, rate, f_lo, f_hi))
    m = truncate(d, frac)
    return per_unit_polar(m)


def pearson(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1 or a.size < 2:
        raise ValueError("need two 1-D sequences of equal length >= 2")
    da, db = a - a.mean(), b - b.mean()
    saa, sbb = float(da @ da), float(db @ db)
    if saa == 0 or sbb == 0:
        raise ZeroDivisionError("correlation undefined for a constant sequence")
    r = float(da @ db) / np.sqrt(saa * sbb)
    return float(np.clip(r, -1.0, 1.0))


# ---------------------------------------------------------------------------
# text I/O

def read_csv(path) -> tuple[np.ndarray, float]:
    """One sample per line after a ``# rate_hz=<value>`` header."""
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines:
        raise ValueError(f"{path}: empty EOG file")
    head = lines[0].lstrip("#").strip()
    if not head.startswith("rate_hz="):
        raise ValueError(f"{path}: first line must be 'rate_hz=<value>'")
    rate = float(head.split("=", 1)[1])
    if rate <= 0:
        raise ValueError(f"{path}: rate must be positive")
    samples = np.array([float(v) for v in lines[1:]])
    if not np.isfinite(samples).all():
        raise ValueError(f"{path}: non-finite sample")
    return samples, rate


def write_csv(path, samples, rate: float) -> None:
    with open(path, "w") as fh:
        fh.write(f"# rate_hz={rate:.6f}\n")
        for v in samples:
            fh.write(f"{float(v):.6f}\n")
