"""16-bit PCM WAV input/output."""

import wave

import numpy as np

CANONICAL_RATE = 16000


class WavFormatError(ValueError):
    pass


def read_wav(path, expected_rate=CANONICAL_RATE):
    """Read a mono or stereo 16-bit PCM WAV file.

    Returns ``(samples, sample_rate)`` where ``samples`` has shape
    ``(channels, n)`` scaled to [-1, 1). Files at a rate other than
    ``expected_rate`` are rejected; resampling is not supported.
    """
    try:
        with wave.open(str(path), "rb") as wf:
            n_channels = wf.getnchannels()
            width = wf.getsampwidth()
            rate = wf.getframerate()
            raw = wf.readframes(wf.getnframes())
    except (wave.Error, EOFError) as exc:
        raise WavFormatError(f"{path}: not a PCM WAV file ({exc})") from None
    if width != 2:
        raise WavFormatError(f"{path}: only 16-bit PCM is supported (got {8 * width}-bit)")
    if n_channels not in (1, 2):
        raise WavFormatError(f"{path}: expected mono or stereo, got {n_channels} channels")
    if expected_rate is not None and rate != expected_rate:
        raise WavFormatError(
            f"{path}: sample rate {rate} Hz, expected {expected_rate} Hz (resampling is not supported)"
        )
    data = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    return data.reshape(-1, n_channels).T.copy(), rate


def write_wav(path, samples, sample_rate=CANONICAL_RATE):
    """Write ``samples`` (shape ``(n,)`` or ``(channels, n)``) as 16-bit PCM.

    Values outside [-1, 1] are clipped.
    """
    samples = np.atleast_2d(np.asarray(samples, dtype=np.float64))
    if samples.shape[0] not in (1, 2):
        raise WavFormatError("expected mono or stereo samples")
    pcm = np.clip(np.round(samples * 32768.0), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(samples.shape[0])
        wf.setsampwidth(2)
        wf.setframerate(int(sample_rate))
        wf.writeframes(pcm.T.tobytes())
