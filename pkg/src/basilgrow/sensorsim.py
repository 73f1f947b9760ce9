"""Seeded synthetic telemetry for a small hydroponic basil farm.

The generator emits one frame per minute across a configurable run of
daytime windows (default 20 days of 10:00-18:00), six sensor channels
tracing smooth diurnal arcs inside fixed physical bands, and a ground
truth growth series produced by a documented latent model.  Everything
is driven by the package RNG, so a seed pins the dataset byte for byte.

Channel model
-------------
For channel ``i`` with band ``[low, high]``, midpoint ``mid`` and
half-width ``half``::

    x_i(d, m) = mid + 0.7 * half * sin(pi * frac + phase_i)
                + day_offset_i(d) + eps_i(d, m)

where ``frac`` is the fraction of the daytime window elapsed,
``day_offset`` is a per-day draw clipped to ``0.25 * half`` and ``eps``
is per-minute noise clipped to three standard deviations, so every
value stays inside ``[low - 3 sigma, high + 3 sigma]`` (and never below
zero).  With ``noise_scale`` zero the curves are exactly the closed-form
arcs.

Growth model
------------
:func:`growth_truth` defines average plant height as::

    g_k = clamp(base + trend * D * p_k
                + sum_bump  w_c * (-tanh(gain * z_c)^2)
                + sum_lin   w_c * z_c
                + ar_k,  3.0, 4.5)

with ``z_c`` the channel value rescaled to its band (``(x - mid)/half``),
``p_k = k/(N-1)`` the run progress, ``D`` the number of distinct
calendar days, and ``ar`` a seeded AR(1) series.  The bell-shaped bump
response means growth peaks when a channel sits at its band midpoint,
which makes the mapping deliberately non-linear in TDS and HUM.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from datetime import datetime, timedelta

import numpy as np

from .dataset import SENSOR_CHANNELS, SensorFrame
from .errors import ConfigError
from .numerics import Rng

CHANNEL_RANGES: dict[str, tuple[float, float]] = {
    "Light": (200.0, 2000.0),  # lux
    "CO2": (400.0, 1000.0),  # ppm
    "TDS": (800.0, 1500.0),  # ppm
    "TEMP": (15.0, 25.0),  # deg C
    "HUM": (40.0, 60.0),  # %RH
    "WaterTemp": (10.0, 20.0),  # deg C
}

# per-minute noise std in channel units, about 2.5% of each band width
NOISE_SCALES: dict[str, float] = {
    "Light": 45.0,
    "CO2": 15.0,
    "TDS": 17.5,
    "TEMP": 0.25,
    "HUM": 0.5,
    "WaterTemp": 0.25,
}

# phase offsets (radians) desynchronize the channel arcs
_PHASES: dict[str, float] = {
    "Light": 0.0,
    "CO2": 0.35,
    "TDS": 0.7,
    "TEMP": 0.2,
    "HUM": 0.5,
    "WaterTemp": 0.9,
}

GROWTH_CLAMP = (3.0, 4.5)


@dataclass
class SimConfig:
    """Knobs for one synthetic run."""

    days: int = 20
    start: datetime = datetime(2024, 4, 1, 10, 0)
    day_start_hour: int = 10
    day_end_hour: int = 18
    cadence_minutes: int = 1
    seed: int = 0
    rows: int | None = None  # exact frame count; extends past `days` if needed
    n_positions: int = 21
    channel_ranges: dict[str, tuple[float, float]] = field(
        default_factory=lambda: dict(CHANNEL_RANGES)
    )
    noise_scales: dict[str, float] = field(default_factory=lambda: dict(NOISE_SCALES))

    def validate(self) -> None:
        if self.days < 1:
            raise ConfigError(f"days must be >= 1, got {self.days}")
        if self.cadence_minutes < 1:
            raise ConfigError(f"cadence must be >= 1 minute, got {self.cadence_minutes}")
        if not 0 <= self.day_start_hour < self.day_end_hour <= 24:
            raise ConfigError(
                f"daytime window {self.day_start_hour}..{self.day_end_hour} is not a valid range"
            )
        if self.rows is not None and self.rows < 1:
            raise ConfigError(f"rows must be >= 1, got {self.rows}")
        if self.n_positions < 1:
            raise ConfigError(f"n_positions must be >= 1, got {self.n_positions}")
        for name in SENSOR_CHANNELS:
            low, high = self.channel_ranges[name]
            if not low < high:
                raise ConfigError(f"degenerate range for {name}: ({low}, {high})")
            if self.noise_scales[name] < 0:
                raise ConfigError(f"negative noise scale for {name}")


@dataclass
class LatentGrowthModel:
    """Ground truth mapping from channel readings to average height.

    Serializes to a plain dict so generated datasets can ship their own
    oracle alongside the CSV.
    """

    base_height: float = 4.05
    trend: float = 0.012  # cm per day
    bump_weights: dict[str, float] = field(
        default_factory=lambda: {"TDS": 0.55, "HUM": 0.45}
    )
    linear_weights: dict[str, float] = field(
        default_factory=lambda: {"Light": 0.03, "CO2": 0.015, "TEMP": 0.02, "WaterTemp": 0.015}
    )
    response_gain: float = 1.8
    ar_coeff: float = 0.95
    noise_std: float = 0.0094  # AR(1) innovation std, cm
    seed: int = 0
    channel_ranges: dict[str, tuple[float, float]] = field(
        default_factory=lambda: dict(CHANNEL_RANGES)
    )

    def to_dict(self) -> dict:
        return {
            "base_height": self.base_height,
            "trend": self.trend,
            "bump_weights": dict(self.bump_weights),
            "linear_weights": dict(self.linear_weights),
            "response_gain": self.response_gain,
            "ar_coeff": self.ar_coeff,
            "noise_std": self.noise_std,
            "seed": self.seed,
            "channel_ranges": {k: list(v) for k, v in self.channel_ranges.items()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LatentGrowthModel":
        return cls(
            base_height=d["base_height"],
            trend=d["trend"],
            bump_weights=dict(d["bump_weights"]),
            linear_weights=dict(d["linear_weights"]),
            response_gain=d["response_gain"],
            ar_coeff=d["ar_coeff"],
            noise_std=d["noise_std"],
            seed=d["seed"],
            channel_ranges={k: (v[0], v[1]) for k, v in d["channel_ranges"].items()},
        )


def position_names(n: int) -> list[str]:
    """Rack/slot labels P<rack>.<slot>: three racks of seven slots each."""
    return [f"P{1 + i // 7}.{2 + i % 7}" for i in range(n)]


def frame_times(config: SimConfig) -> list[datetime]:
    """Timestamps for the run: minute cadence inside each daytime window.

    With ``rows`` set, windows keep accumulating day by day until the
    requested count is reached, then the list is truncated exactly.
    """
    config.validate()
    per_day = (config.day_end_hour - config.day_start_hour) * 60 // config.cadence_minutes
    if per_day < 1:
        raise ConfigError("daytime window shorter than one cadence step")
    total = config.rows if config.rows is not None else config.days * per_day
    times: list[datetime] = []
    day = 0
    base = config.start.replace(
        hour=config.day_start_hour, minute=0, second=0, microsecond=0
    )
    while len(times) < total:
        day_base = base + timedelta(days=day)
        for m in range(per_day):
            times.append(day_base + timedelta(minutes=m * config.cadence_minutes))
            if len(times) == total:
                break
        day += 1
    return times


def _band(model_ranges: dict[str, tuple[float, float]], name: str) -> tuple[float, float]:
    low, high = model_ranges[name]
    return (low + high) / 2.0, (high - low) / 2.0


def growth_truth(model: LatentGrowthModel, frames: list[SensorFrame]) -> np.ndarray:
    """Evaluate the documented growth closed form on existing frames.

    Deterministic given the model (whose seed drives the AR series) and
    the frames; independent implementations can reproduce it term by
    term from the module docstring.
    """
    n = len(frames)
    if n == 0:
        raise ConfigError("growth_truth needs at least one frame")
    progress = np.arange(n, dtype=np.float64) / (n - 1) if n > 1 else np.zeros(1)
    day_span = len({f.timestamp.date() for f in frames})
    g = np.full(n, model.base_height) + model.trend * day_span * progress
    for name, w in model.bump_weights.items():
        mid, half = _band(model.channel_ranges, name)
        z = (np.array([f.channels[name] for f in frames]) - mid) / half
        g += w * -(np.tanh(model.response_gain * z) ** 2)
    for name, w in model.linear_weights.items():
        mid, half = _band(model.channel_ranges, name)
        z = (np.array([f.channels[name] for f in frames]) - mid) / half
        g += w * z
    if model.noise_std > 0:
        innovations = Rng(model.seed).normal(n, 0.0, model.noise_std)
        ar = np.empty(n)
        acc = 0.0
        for k in range(n):
            acc = model.ar_coeff * acc + innovations[k]
            ar[k] = acc
        g += ar
    return np.clip(g, GROWTH_CLAMP[0], GROWTH_CLAMP[1])


def generate(
    config: SimConfig, model: LatentGrowthModel | None = None
) -> tuple[list[SensorFrame], LatentGrowthModel, list[str]]:
    """Produce frames, the ground-truth model, and position column names.

    The growth column is exactly ``growth_truth(model, frames)``, and
    per-plant heights are spread around it with their mean pinned to the
    growth value, so the emitted CSV carries its own oracle.
    """
    config.validate()
    if model is None:
        model = LatentGrowthModel(seed=config.seed, channel_ranges=dict(config.channel_ranges))
    times = frame_times(config)
    n = len(times)
    per_day = (config.day_end_hour - config.day_start_hour) * 60 // config.cadence_minutes
    minute_index = np.array(
        [
            ((t.hour - config.day_start_hour) * 60 + t.minute) // config.cadence_minutes
            for t in times
        ],
        dtype=np.float64,
    )
    frac = minute_index / per_day
    day_index = np.array([(t.date() - times[0].date()).days for t in times])
    n_days = int(day_index.max()) + 1

    root = Rng(config.seed)
    channel_values: dict[str, np.ndarray] = {}
    for ci, name in enumerate(SENSOR_CHANNELS):
        mid, half = _band(config.channel_ranges, name)
        sigma = config.noise_scales[name]
        stream = root.spawn(101 + ci)
        offsets = np.clip(
            stream.normal(n_days, 0.0, 2.0 * sigma), -0.25 * half, 0.25 * half
        )
        eps = np.clip(stream.normal(n, 0.0, sigma), -3.0 * sigma, 3.0 * sigma)
        curve = mid + 0.7 * half * np.sin(np.pi * frac + _PHASES[name])
        channel_values[name] = np.maximum(curve + offsets[day_index] + eps, 0.0)

    frames = [
        SensorFrame(
            timestamp=t,
            channels={name: float(channel_values[name][k]) for name in SENSOR_CHANNELS},
            growth_avg=math.nan,  # filled below from the latent model
        )
        for k, t in enumerate(times)
    ]
    growth = growth_truth(model, frames)

    positions = position_names(config.n_positions)
    height_stream = root.spawn(200)
    spread = height_stream.normal(config.n_positions, 0.0, 0.15)
    jitter = height_stream.normal(n * config.n_positions, 0.0, 0.05).reshape(
        n, config.n_positions
    )
    raw = growth[:, None] + spread[None, :] + jitter
    heights = raw - raw.mean(axis=1, keepdims=True) + growth[:, None]

    for k, f in enumerate(frames):
        f.growth_avg = float(growth[k])
        f.heights = tuple(float(h) for h in heights[k])
    return frames, model, positions


def closed_form_channel(
    config: SimConfig, name: str, frac: np.ndarray
) -> np.ndarray:
    """Noise-free channel arc, exposed for verification against generated data."""
    mid, half = _band(config.channel_ranges, name)
    return mid + 0.7 * half * np.sin(np.pi * np.asarray(frac) + _PHASES[name])


def zero_noise(config: SimConfig) -> SimConfig:
    """Copy of ``config`` with every noise scale zeroed."""
    return replace(config, noise_scales={k: 0.0 for k in config.noise_scales})
