import struct

import numpy as np
import pytest

from sedlearn import audio_io
from sedlearn.errors import ConfigError, UnsupportedWavError, WavFormatError


def _pcm16_wav_bytes(values, rate=8000, channels=1):
    payload = np.asarray(values, dtype="<i2").tobytes()
    fmt = struct.pack("<HHIIHH", 1, channels, rate, rate * 2 * channels, 2 * channels, 16)
    body = b"WAVE" + b"fmt " + struct.pack("<I", len(fmt)) + fmt
    body += b"data" + struct.pack("<I", len(payload)) + payload
    return b"RIFF" + struct.pack("<I", len(body)) + body


def test_load_pcm16_scaling(tmp_path):
    p = tmp_path / "a.wav"
    p.write_bytes(_pcm16_wav_bytes([0, 16384, -32768]))
    clip = audio_io.load_wav(p)
    assert np.allclose(clip.samples, [0.0, 0.5, -1.0])
    assert clip.sample_rate == 8000


def test_load_stereo_averages_to_mono(tmp_path):
    p = tmp_path / "st.wav"
    # frames: (L=32768-ish, R=0) -> use 16384 & 0 => 0.25 per frame
    interleaved = [16384, 0, 16384, 0]
    p.write_bytes(_pcm16_wav_bytes(interleaved, channels=2))
    clip = audio_io.load_wav(p)
    assert np.allclose(clip.samples, [0.25, 0.25])


def test_float32_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    samples = rng.uniform(-1, 1, 257).astype(np.float32).astype(np.float64)
    clip = audio_io.AudioClip(samples=samples, sample_rate=16000)
    p = tmp_path / "f.wav"
    audio_io.write_wav(p, clip, encoding="float32")
    loaded = audio_io.load_wav(p)
    assert loaded.sample_rate == 16000
    assert np.array_equal(loaded.samples, samples)


def test_missing_file_raises_file_not_found(tmp_path):
    with pytest.raises(FileNotFoundError):
        audio_io.load_wav(tmp_path / "nope.wav")


def test_truncated_header_is_malformed(tmp_path):
    p = tmp_path / "bad.wav"
    p.write_bytes(b"RIFF\x04\x00")
    with pytest.raises(WavFormatError) as err:
        audio_io.load_wav(p)
    assert err.value.field == "riff_header"


def test_wrong_magic_names_field(tmp_path):
    p = tmp_path / "bad2.wav"
    p.write_bytes(b"RIFX" + b"\x00" * 20)
    with pytest.raises(WavFormatError) as err:
        audio_io.load_wav(p)
    assert err.value.field == "riff_magic"


def test_unsupported_encoding_names_field(tmp_path):
    payload = b"\x00" * 8
    fmt = struct.pack("<HHIIHH", 7, 1, 8000, 8000, 1, 8)  # mu-law
    body = b"WAVE" + b"fmt " + struct.pack("<I", len(fmt)) + fmt
    body += b"data" + struct.pack("<I", len(payload)) + payload
    p = tmp_path / "mu.wav"
    p.write_bytes(b"RIFF" + struct.pack("<I", len(body)) + body)
    with pytest.raises(UnsupportedWavError) as err:
        audio_io.load_wav(p)
    assert err.value.field == "audio_format"


def test_resample_identity_is_bit_exact():
    clip = audio_io.AudioClip(
        samples=np.random.default_rng(1).uniform(-1, 1, 800), sample_rate=8000
    )
    out = audio_io.resample(clip, 8000)
    assert out is clip


def test_resample_dc_level_preserved():
    clip = audio_io.AudioClip(samples=np.full(16000, 0.5), sample_rate=16000)
    out = audio_io.resample(clip, 8000)
    assert len(out.samples) == 8000
    interior = out.samples[400:-400]
    assert np.all(np.abs(interior - 0.5) < 1e-3)


def test_resample_sine_against_analytic_oracle():
    src_rate, dst_rate, freq = 44100, 8000, 100.0
    t_src = np.arange(src_rate) / src_rate
    clip = audio_io.AudioClip(samples=np.sin(2 * np.pi * freq * t_src), sample_rate=src_rate)
    out = audio_io.resample(clip, dst_rate)
    assert len(out.samples) == 8000
    t_dst = np.arange(dst_rate) / dst_rate
    oracle = np.sin(2 * np.pi * freq * t_dst)
    # trim filter edges, then normalized zero-lag correlation
    a, b = out.samples[200:-200], oracle[200:-200]
    corr = np.dot(a, b) / (np.linalg.norm(a) * np.linalg.norm(b))
    assert corr >= 0.999


def test_resample_idempotent_at_fixed_rate():
    clip = audio_io.AudioClip(
        samples=np.sin(2 * np.pi * 50 * np.arange(4410) / 44100), sample_rate=44100
    )
    once = audio_io.resample(clip, 16000)
    twice = audio_io.resample(once, 16000)
    assert np.array_equal(once.samples, twice.samples)


def test_resample_rejects_zero_rate():
    clip = audio_io.AudioClip(samples=np.zeros(100), sample_rate=8000)
    with pytest.raises(ConfigError):
        audio_io.resample(clip, 0)


def test_frame_window_n4_constant_ones():
    clip = audio_io.AudioClip(samples=np.ones(6), sample_rate=100)
    fm = audio_io.frame_and_window(clip, 4, 2)
    assert fm.data.shape == (4, 2)
    expected = np.array([0.08, 0.77, 0.77, 0.08])
    assert np.allclose(fm.data[:, 0], expected)
    assert np.allclose(fm.data[:, 1], expected)


def test_frame_single_frame_boundary():
    clip = audio_io.AudioClip(samples=np.arange(10.0) / 10, sample_rate=100)
    fm = audio_io.frame_and_window(clip, 10, 3)
    assert fm.data.shape == (10, 1)


def test_frame_slicing_matches_independent_oracle():
    rng = np.random.default_rng(2)
    clip = audio_io.AudioClip(samples=rng.uniform(-1, 1, 8000), sample_rate=8000)
    fm = audio_io.frame_and_window(clip, 160, 80)
    assert fm.data.shape[1] == 99
    w = audio_io.hamming_window(160)
    assert np.allclose(fm.data[:, 5], w * clip.samples[400:560])
    for t in range(fm.data.shape[1]):
        assert np.array_equal(fm.data[:, t], w * clip.samples[t * 80 : t * 80 + 160])


def test_frame_energy_never_exceeds_raw_slice():
    rng = np.random.default_rng(3)
    clip = audio_io.AudioClip(samples=rng.uniform(-1, 1, 2000), sample_rate=8000)
    fm = audio_io.frame_and_window(clip, 320, 160)
    for t in range(fm.data.shape[1]):
        raw = clip.samples[t * 160 : t * 160 + 320]
        assert np.sum(fm.data[:, t] ** 2) <= np.sum(raw**2) + 1e-12


def test_frame_rejects_short_clip():
    clip = audio_io.AudioClip(samples=np.ones(5), sample_rate=100)
    with pytest.raises(ValueError):
        audio_io.frame_and_window(clip, 6, 2)


def test_frame_params_forty_ms():
    assert audio_io.frame_params(8000) == (320, 160)
    assert audio_io.frame_params(16000) == (640, 320)
    assert audio_io.frame_params(24000) == (960, 480)
    assert audio_io.frame_params(44100) == (1764, 882)
