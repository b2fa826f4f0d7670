"""Raw audio loading, resampling, framing and windowing.

Everything here is a pure function over immutable inputs. WAV support is
deliberately narrow: RIFF/WAVE containers holding 16-bit PCM or 32-bit
IEEE float samples, mono or multichannel (averaged to mono on load).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.signal import firwin, resample_poly

from .errors import ConfigError, UnsupportedWavError, WavFormatError

# Kaiser windowed-sinc resampler design constants.
KAISER_BETA = 8.6
SINC_ZERO_CROSSINGS = 64


@dataclass(frozen=True)
class AudioClip:
    """Mono sample sequence with its sampling rate."""

    samples: np.ndarray  # float64, nominal range [-1, 1]
    sample_rate: int

    def __post_init__(self):
        object.__setattr__(
            self, "samples", np.asarray(self.samples, dtype=np.float64)
        )
        if self.sample_rate <= 0:
            raise ConfigError(f"sample_rate must be positive, got {self.sample_rate}")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("AudioClip samples must be finite")

    @property
    def duration(self):
        return len(self.samples) / self.sample_rate


@dataclass(frozen=True)
class FrameMatrix:
    """Windowed raw-audio frames, one frame per column (N x T)."""

    data: np.ndarray
    frame_len: int
    hop: int
    sample_rate: int


def frame_params(sample_rate):
    """Frame length and hop for 40 ms frames with 50% overlap."""
    n = int(round(0.040 * sample_rate))
    if n % 2 != 0:
        raise ConfigError(
            f"40 ms at {sample_rate} Hz gives odd frame length {n}; "
            "choose a rate with an even frame length"
        )
    return n, n // 2


def hamming_window(n):
    """Symmetric Hamming window, 0.54 - 0.46*cos(2*pi*k/(n-1))."""
    return np.hamming(n)


def load_wav(path):
    """Read a RIFF/WAVE file into a mono AudioClip.

    16-bit PCM is scaled by 1/32768; multichannel input is averaged.
    Raises FileNotFoundError, WavFormatError or UnsupportedWavError.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    raw = path.read_bytes()
    if len(raw) < 12:
        raise WavFormatError("riff_header", "file shorter than a RIFF header")
    if raw[0:4] != b"RIFF":
        raise WavFormatError("riff_magic", f"expected b'RIFF', got {raw[0:4]!r}")
    if raw[8:12] != b"WAVE":
        raise WavFormatError("wave_magic", f"expected b'WAVE', got {raw[8:12]!r}")

    fmt = None
    data = None
    pos = 12
    while pos + 8 <= len(raw):
        cid = raw[pos : pos + 4]
        (size,) = struct.unpack_from("<I", raw, pos + 4)
        body = raw[pos + 8 : pos + 8 + size]
        if len(body) < size:
            raise WavFormatError(
                "chunk_size", f"chunk {cid!r} claims {size} bytes, file truncated"
            )
        if cid == b"fmt ":
            if size < 16:
                raise WavFormatError("fmt_chunk", f"fmt chunk too short ({size} bytes)")
            fmt = struct.unpack_from("<HHIIHH", body, 0)
        elif cid == b"data":
            data = body
        pos += 8 + size + (size & 1)  # chunks are word-aligned

    if fmt is None:
        raise WavFormatError("fmt_chunk", "missing fmt chunk")
    if data is None:
        raise WavFormatError("data_chunk", "missing data chunk")

    audio_format, channels, rate, _, _, bits = fmt
    if channels < 1:
        raise WavFormatError("channels", "channel count must be >= 1")
    if audio_format == 1 and bits == 16:
        samples = np.frombuffer(data, dtype="<i2").astype(np.float64) / 32768.0
    elif audio_format == 3 and bits == 32:
        samples = np.frombuffer(data, dtype="<f4").astype(np.float64)
    else:
        raise UnsupportedWavError(
            "audio_format",
            f"format code {audio_format} with {bits} bits per sample is not supported "
            "(PCM16 and IEEE float32 only)",
        )
    if channels > 1:
        usable = (len(samples) // channels) * channels
        samples = samples[:usable].reshape(-1, channels).mean(axis=1)
    return AudioClip(samples=samples, sample_rate=int(rate))


def write_wav(path, clip, encoding="float32"):
    """Write a mono AudioClip as PCM16 or IEEE float32 WAV."""
    if encoding == "float32":
        payload = clip.samples.astype("<f4").tobytes()
        audio_format, bits = 3, 32
    elif encoding == "pcm16":
        scaled = np.clip(np.round(clip.samples * 32768.0), -32768, 32767)
        payload = scaled.astype("<i2").tobytes()
        audio_format, bits = 1, 16
    else:
        raise ConfigError(f"unknown wav encoding '{encoding}'")
    block = bits // 8
    fmt = struct.pack(
        "<HHIIHH", audio_format, 1, clip.sample_rate, clip.sample_rate * block, block, bits
    )
    body = b"WAVE" + b"fmt " + struct.pack("<I", len(fmt)) + fmt
    body += b"data" + struct.pack("<I", len(payload)) + payload
    Path(path).write_bytes(b"RIFF" + struct.pack("<I", len(body)) + body)


def resample(clip, target_rate):
    """Polyphase resampling with a Kaiser windowed-sinc lowpass.

    The anti-aliasing filter uses beta=8.6 and 64 zero crossings; output
    length is round(len * target/source). Same-rate input is returned
    unchanged.
    """
    if target_rate <= 0:
        raise ConfigError(f"target_rate must be positive, got {target_rate}")
    if target_rate == clip.sample_rate:
        return clip
    g = np.gcd(int(target_rate), clip.sample_rate)
    up, down = int(target_rate) // g, clip.sample_rate // g
    max_rate = max(up, down)
    taps = 2 * SINC_ZERO_CROSSINGS * max_rate + 1
    kernel = firwin(taps, 1.0 / max_rate, window=("kaiser", KAISER_BETA))
    out = resample_poly(clip.samples, up, down, window=kernel)
    n_out = int(np.floor(len(clip.samples) * target_rate / clip.sample_rate + 0.5))
    if len(out) < n_out:
        out = np.pad(out, (0, n_out - len(out)))
    return AudioClip(samples=out[:n_out], sample_rate=int(target_rate))


def frame_and_window(clip, frame_len, hop):
    """Slice the clip into Hamming-windowed frames (columns of N x T).

    T = floor((len - frame_len) / hop) + 1; the trailing partial frame is
    discarded.
    """
    if frame_len < 2:
        raise ConfigError(f"frame_len must be >= 2, got {frame_len}")
    if hop < 1:
        raise ConfigError(f"hop must be >= 1, got {hop}")
    n_samples = len(clip.samples)
    if n_samples < frame_len:
        raise ValueError(
            f"clip with {n_samples} samples is shorter than one frame ({frame_len})"
        )
    n_frames = (n_samples - frame_len) // hop + 1
    window = hamming_window(frame_len)
    data = np.empty((frame_len, n_frames))
    for t in range(n_frames):
        data[:, t] = clip.samples[t * hop : t * hop + frame_len] * window
    return FrameMatrix(
        data=data, frame_len=frame_len, hop=hop, sample_rate=clip.sample_rate
    )


def frame_clip(clip):
    """Frame a clip on the standard 40 ms / 50% overlap grid."""
    n, hop = frame_params(clip.sample_rate)
    return frame_and_window(clip, n, hop)


def n_frames_for(n_samples, sample_rate):
    """Frame count the standard grid yields for a clip of this length."""
    n, hop = frame_params(sample_rate)
    if n_samples < n:
        return 0
    return (n_samples - n) // hop + 1
