"""Synthetic constant-speed motor recordings for desk-scale experiments.

Each fault class maps to a fixed, documented signature family so accuracy
numbers are reproducible: a set of rotation-order tones (harmonic order,
relative amplitude), optionally an amplitude-modulated high-order carrier
(sideband cue) or repetitive decaying-ring bursts (bearing-style impacts),
plus white Gaussian noise at a configurable SNR. Orders scale with the
rotation frequency; the highest order used (48) stays below Nyquist for all
speed settings. Loaded recordings slip the rotation frequency by 2% and gain
15% component amplitude.

Signatures (order: amplitude):

    H   1: 1.00, 2: 0.05                       clean rotation tone
    RU  0.5: 0.50, 1: 1.00, 2: 0.08, 20: 0.40  subharmonic whirl + line at 20x
    RM  1: 0.60, 2: 1.00, 3: 0.35, 26: 0.40    dominant 2x
    SW  1: 1.00, 40: 0.45, 42: 0.35            high-order electrical whine pair
    VU  1: 1.00, 2: 0.40, 48: 0.45             2x plus single high line
    BR  1: 1.00, 2: 0.30, 3: 0.80, 36: 0.40    strong 3x
    KA  1: 1.00, 2: 0.10 + AM carrier at 30x (depth 0.9, modulated at 1x)
    FB  1: 0.60, 2: 0.10 + bursts (rate 3.6x, 4.5 kHz ring, 3 ms decay)
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .numerics import RngStream
from .pipeline import (
    CHANNELS,
    SAMPLE_RATE,
    SPEED_SETTINGS,
    FaultClass,
    SplitData,
    _SplitBuilder,
    file_stem,
)


@dataclass(frozen=True)
class Signature:
    tones: tuple[tuple[float, float], ...]            # (order, amplitude)
    am_carrier: tuple[float, float, float] | None = None  # (order, amplitude, depth)
    bursts: tuple[float, float, float, float] | None = None  # (rate order, ring Hz, decay s, amp)


SIGNATURES: dict[FaultClass, Signature] = {
    FaultClass.H: Signature(((1, 1.00), (2, 0.05))),
    FaultClass.RU: Signature(((0.5, 0.50), (1, 1.00), (2, 0.08), (20, 0.40))),
    FaultClass.RM: Signature(((1, 0.60), (2, 1.00), (3, 0.35), (26, 0.40))),
    FaultClass.SW: Signature(((1, 1.00), (40, 0.45), (42, 0.35))),
    FaultClass.VU: Signature(((1, 1.00), (2, 0.40), (48, 0.45))),
    FaultClass.BR: Signature(((1, 1.00), (2, 0.30), (3, 0.80), (36, 0.40))),
    FaultClass.KA: Signature(((1, 1.00), (2, 0.10)), am_carrier=(30, 0.60, 0.90)),
    FaultClass.FB: Signature(((1, 0.60), (2, 0.10)), bursts=(3.6, 4500.0, 0.003, 1.5)),
}

# Per-channel (gain, SNR offset in dB): the microphone and far-side
# accelerometers see the same signature, quieter and noisier.
CHANNEL_PROFILES = {
    "accel1": (1.0, 0.0),
    "audio": (0.8, -3.0),
    "accel2": (0.9, -1.0),
    "accel3": (0.7, -2.0),
}

LOAD_SLIP = 0.98
LOAD_GAIN = 1.15


@dataclass
class Recording:
    channels: dict[str, np.ndarray]
    sample_rate: int
    fault: FaultClass
    speed_hz: int
    load: int

    def name(self) -> str:
        setting = {v: k for k, v in SPEED_SETTINGS.items()}[self.speed_hz]
        return file_stem(self.fault, setting, self.load)


def _clean_signal(
    fault: FaultClass, f0: float, t: np.ndarray, phase_rng: RngStream
) -> np.ndarray:
    sig = SIGNATURES[fault]
    out = np.zeros_like(t)
    for order, amp in sig.tones:
        phase = phase_rng.uniform(0.0, 2.0 * np.pi, ())
        out += amp * np.sin(2.0 * np.pi * order * f0 * t + phase)
    if sig.am_carrier is not None:
        order, amp, depth = sig.am_carrier
        pc = phase_rng.uniform(0.0, 2.0 * np.pi, ())
        pm = phase_rng.uniform(0.0, 2.0 * np.pi, ())
        envelope = 1.0 + depth * np.sin(2.0 * np.pi * f0 * t + pm)
        out += amp * envelope * np.sin(2.0 * np.pi * order * f0 * t + pc)
    if sig.bursts is not None:
        rate_order, ring_hz, decay, amp = sig.bursts
        period = 1.0 / (rate_order * f0)
        # time since the most recent impact, with a random initial offset
        offset = float(phase_rng.uniform(0.0, period, ()))
        since = np.mod(t + offset, period)
        out += amp * np.exp(-since / decay) * np.sin(2.0 * np.pi * ring_hz * since)
    return out


def synth_generate(
    fault: FaultClass,
    speed_hz: int,
    load: int,
    seed: int,
    duration: float = 10.0,
    sample_rate: int = SAMPLE_RATE,
    snr_db: float = 20.0,
) -> Recording:
    """Deterministic multi-channel recording; identical arguments reproduce
    identical samples."""
    if fault not in SIGNATURES:
        raise ConfigError(f"unknown fault class {fault!r}")
    if speed_hz not in SPEED_SETTINGS.values():
        raise ConfigError(f"speed {speed_hz} Hz not one of {sorted(SPEED_SETTINGS.values())}")
    if load not in (0, 1):
        raise ConfigError(f"load flag must be 0 or 1, got {load}")
    setting = {v: k for k, v in SPEED_SETTINGS.items()}[speed_hz]
    # stable stream id per (class, speed, load) so files are mutually independent
    base_stream = (int(fault) * 100 + setting * 10 + load) * 16

    f0 = speed_hz * (LOAD_SLIP if load else 1.0)
    gain0 = LOAD_GAIN if load else 1.0
    n = int(round(duration * sample_rate))
    t = np.arange(n, dtype=np.float64) / sample_rate
    clean = _clean_signal(fault, f0, t, RngStream(seed, base_stream)) * gain0
    power = float(np.mean(clean**2))

    channels = {}
    for idx, channel in enumerate(CHANNELS):
        gain, snr_off = CHANNEL_PROFILES[channel]
        noise_std = np.sqrt(gain * gain * power / 10.0 ** ((snr_db + snr_off) / 10.0))
        noise = RngStream(seed, base_stream + 1 + idx).normal(0.0, noise_std, n)
        channels[channel] = gain * clean + noise
    return Recording(channels, sample_rate, fault, speed_hz, load)


def table_files(speeds=(1, 2, 3, 4), loads=(0, 1)):
    """The (fault, speed setting, load) grid of a full constant-speed corpus."""
    out = []
    for fault in FaultClass:
        for setting in speeds:
            for load in loads:
                out.append((fault, setting, load))
    return out


def build_synthetic_corpus(
    channel: str = "accel1",
    duration: float = 10.0,
    snr_db: float = 20.0,
    seed: int = 0,
    speeds=(1, 2, 3, 4),
    loads=(0, 1),
    window: int = 1000,
    ratios=(0.8, 0.1, 0.1),
) -> SplitData:
    """Full labeled corpus (one file per class/speed/load cell) segmented,
    normalised, and split chronologically per file."""
    if channel not in CHANNELS:
        raise ConfigError(f"unknown channel {channel!r}, expected one of {CHANNELS}")
    builder = _SplitBuilder(window, ratios)
    for fault, setting, load in table_files(speeds, loads):
        rec = synth_generate(
            fault, SPEED_SETTINGS[setting], load, seed, duration=duration, snr_db=snr_db
        )
        builder.add_file(rec.name(), rec.channels[channel], int(fault))
    return builder.build()


def write_corpus_csv(
    directory,
    duration: float = 2.0,
    snr_db: float = 20.0,
    seed: int = 0,
    speeds=(1, 2, 3, 4),
    loads=(0, 1),
) -> list[str]:
    """Writes one CSV per corpus cell in the canonical column order, plus
    trailing temperature / speed columns (ignored by ingestion)."""
    from pathlib import Path

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for fault, setting, load in table_files(speeds, loads):
        rec = synth_generate(
            fault, SPEED_SETTINGS[setting], load, seed, duration=duration, snr_db=snr_db
        )
        n = len(rec.channels["accel1"])
        t = np.arange(n) / rec.sample_rate
        temperature = 40.0 + 0.05 * t
        rpm = np.full(n, rec.speed_hz * 60.0)
        cols = [rec.channels[c] for c in CHANNELS] + [temperature, rpm]
        path = directory / f"{rec.name()}.csv"
        header = ",".join(list(CHANNELS) + ["temperature_c", "speed_rpm"])
        data = np.column_stack(cols)
        np.savetxt(path, data, delimiter=",", header=header, comments="", fmt="%.8g")
        written.append(str(path))
    return written
