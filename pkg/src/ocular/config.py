"""Run configuration: defaults, a flat ``key = value`` file, and command-line overrides."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

from .iris import IrisConfig
from .spectacles import SpectacleConfig
from .track import TrackConfig


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    fps: float = 0.0  # 0: take the rate from the dataset manifest
    # face detection
    sf: float = 5.0
    step: float = 1.0
    min_neighbors: int = 2
    # eye state
    features: str = "pixels"
    kernel: str = "poly"
    degree: int = 3
    window_s: float = 180.0
    stride_s: float = 60.0
    # iris
    alpha: float = 0.6
    gamma: float = 0.5
    canny_low: float = 40.0
    canny_high: float = 100.0
    cht_rmin: float = 1 / 6  # fractions of the eye-crop height
    cht_rmax: float = 1 / 2
    subpixel: bool = True
    # tracking
    kf_q: tuple = (1.0, 1.0, 4.0, 4.0)
    kf_r: tuple = (0.04, 0.04, 0.1, 0.1)
    verify_every: int = 6
    max_misses: int = 12
    gate: float = 8.0
    saccade_frac: float = 0.15
    saccade_min_velocity: float = 0.5  # eye widths per second
    saccade_min_amplitude: float = 0.02  # eye widths
    constrain: bool = True  # keep the iris estimate between the eye corners
    eye_side: str = "left"
    # spectacles
    spectacle_edge: str = "dog"
    # EOG
    eog_f_lo: float = 0.4
    eog_f_hi: float = 30.0

    def __post_init__(self):
        checks = [
            (self.seed >= 0, "seed must be >= 0"),
            (self.fps >= 0, "fps must be >= 0"),
            (1 <= self.sf <= 10, "sf must lie in [1, 10]"),
            (0 < self.step <= 8, "step must lie in (0, 8]"),
            (self.min_neighbors >= 1, "min_neighbors must be >= 1"),
            (self.features in ("pixels", "lbp"), "features must be pixels or lbp"),
            (self.kernel in ("poly", "linear"), "kernel must be poly or linear"),
            (1 <= self.degree <= 5, "degree must lie in [1, 5]"),
            (0 < self.stride_s <= self.window_s, "need 0 < stride_s <= window_s"),
            (0 <= self.alpha <= 1, "alpha must lie in [0, 1]"),
            (0 < self.gamma <= 4, "gamma must lie in (0, 4]"),
            (0 <= self.canny_low < self.canny_high, "need 0 <= canny_low < canny_high"),
            (0 < self.cht_rmin <= self.cht_rmax <= 1, "need 0 < cht_rmin <= cht_rmax <= 1"),
            (len(self.kf_q) == 4 and min(self.kf_q) >= 0, "kf_q needs 4 non-negative values"),
            (len(self.kf_r) == 4 and min(self.kf_r) > 0, "kf_r needs 4 positive values"),
            (self.verify_every >= 1 and self.max_misses >= 1, "verify_every and max_misses must be >= 1"),
            (self.gate > 0, "gate must be positive"),
            (0 < self.saccade_frac < 1, "saccade_frac must lie in (0, 1)"),
            (self.saccade_min_velocity >= 0 and self.saccade_min_amplitude >= 0,
             "saccade floors must be >= 0"),
            (self.eye_side in ("left", "right"), "eye_side must be left or right"),
            (self.spectacle_edge in ("dog", "laplacian"), "spectacle_edge must be dog or laplacian"),
            (0 < self.eog_f_lo < self.eog_f_hi, "need 0 < eog_f_lo < eog_f_hi"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)

    # views for the modules that take their own config objects
    def iris(self) -> IrisConfig:
        return IrisConfig(gamma=self.gamma, t_low=self.canny_low, t_high=self.canny_high,
                          rmin_frac=self.cht_rmin, rmax_frac=self.cht_rmax, subpixel=self.subpixel)

    def track(self, fps: float) -> TrackConfig:
        return TrackConfig(fps=fps, verify_every=self.verify_every, max_misses=self.max_misses,
                           gate=self.gate, q=tuple(self.kf_q), r=tuple(self.kf_r))

    def spectacles(self) -> SpectacleConfig:
        return SpectacleConfig(edge=self.spectacle_edge)

    def dumps(self) -> str:
        out = []
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            out.append(f"{f.name} = {','.join(repr(float(x)) for x in v) if isinstance(v, tuple) else v}")
        return "\n".join(out) + "\n"


_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}


def _convert(key: str, text: str):
    default = _FIELDS[key].default
    text = text.strip()
    try:
        if isinstance(default, bool):
            low = text.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(text)
            return low in ("true", "1", "yes")
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
        if isinstance(default, tuple):
            return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise ConfigError(f"bad value for {key}: {text!r}") from None
    return text


def parse(text: str) -> dict:
    """``key = value`` lines; ``#`` starts a comment. Unknown keys are errors."""
    out = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _FIELDS:
            raise ConfigError(f"line {n}: unknown key {key!r}")
        out[key] = _convert(key, value)
    return out


def load(path=None, overrides: dict | None = None) -> RunConfig:
    """Defaults, then the file, then ``overrides`` (string or typed values)."""
    values = parse(Path(path).read_text()) if path else {}
    for key, v in (overrides or {}).items():
        if v is None:
            continue
        if key not in _FIELDS:
            raise ConfigError(f"unknown key {key!r}")
        values[key] = _convert(key, v) if isinstance(v, str) else v
    return RunConfig(**values)
