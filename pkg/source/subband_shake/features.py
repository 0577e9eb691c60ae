##############################################################################
# (c) Crown copyright Met Office. All rights reserved.
# For further details please refer to the file COPYRIGHT
# which you should have received as part of this distribution
##############################################################################
"""
The feature chain: log-magnitude STFT spectrogram, per-utterance CMVN,
context splicing and frame-rate downsampling.

Each utterance ends up as a stack of [T, 16, 257] spliced frames, written to
a 32-bit tensor container file named ``<utterance_id>.feat``.

"""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np
import scipy.fft
import scipy.signal
from scipy.io import wavfile

from subband_shake import DegenerateError, MissingFeatureError, ParameterError, ShapeError
from subband_shake.autodiff.container import FLOAT32, load_tensor, save_tensor
from subband_shake.constants import (CONTEXT, DOWNSAMPLE, FEATURE_SUFFIX, FFT_SIZE, HOP_MS, LEFT_CONTEXT,
                                     LOG_FLOOR, RIGHT_CONTEXT, SAMPLE_RATE, SPECTRAL_BINS, WINDOW_MS)

logger = logging.getLogger(__name__)

PCM_SCALE = 32768.0
CMVN_FLOOR = 1e-10


@dataclass
class Waveform:
    '''Mono samples in [-1, 1] and their rate in Hz.'''
    samples: np.ndarray
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise ShapeError(f"a waveform must be mono, got dims {self.samples.shape}")
        if self.sample_rate <= 0:
            raise ParameterError(f"sample rate must be positive, got {self.sample_rate}")

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


@dataclass
class FeatureSequence:
    '''Spliced, downsampled frames [T, context, bins] of one utterance.'''
    frames: np.ndarray
    frame_period: float = HOP_MS / 1000 * DOWNSAMPLE

    @property
    def count(self) -> int:
        return self.frames.shape[0]

    def shape_line(self) -> str:
        return "×".join(str(d) for d in self.frames.shape)


# ----------------------------------------------------------------------------
# wav i/o
# ----------------------------------------------------------------------------

def read_wav(fpath: Union[str, Path]) -> Waveform:
    """
    Read a 16-bit PCM mono WAV file.

    :raises OSError: naming the path, for unreadable or non-conforming files.

    """
    fpath = Path(fpath)
    try:
        rate, data = wavfile.read(fpath)
    except (ValueError, EOFError) as err:
        raise OSError(f"could not read wav {fpath}: {err}") from err
    if data.dtype != np.int16 or data.ndim != 1:
        raise OSError(f"{fpath} is not 16-bit PCM mono (dtype {data.dtype}, dims {data.shape})")
    return Waveform(data / PCM_SCALE, rate)


def write_wav(fpath: Union[str, Path], waveform: Waveform):
    '''Write as 16-bit PCM mono, clipping to [-1, 1).'''
    pcm = np.clip(np.round(waveform.samples * PCM_SCALE), -PCM_SCALE, PCM_SCALE - 1).astype('<i2')
    wavfile.write(Path(fpath), waveform.sample_rate, pcm)


# ----------------------------------------------------------------------------
# the chain
# ----------------------------------------------------------------------------

def spectrogram(waveform: Waveform, window_ms: float = WINDOW_MS, hop_ms: float = HOP_MS,
                fft_size: int = FFT_SIZE) -> np.ndarray:
    """
    Log-magnitude short-time spectrum.

    Each frame is Hamming windowed, zero padded to *fft_size*, and the
    magnitudes of the non-negative frequency bins are floored at 1e-10
    before the log.

    :returns: array [T0, fft_size // 2 + 1].
    :raises DegenerateError: if the waveform is shorter than one window.

    """
    window = int(round(waveform.sample_rate * window_ms / 1000))
    hop = int(round(waveform.sample_rate * hop_ms / 1000))
    if window > fft_size:
        raise ParameterError(f"a {window}-sample window does not fit a {fft_size}-point FFT")
    if len(waveform.samples) < window:
        raise DegenerateError(f"waveform of {len(waveform.samples)} samples is shorter than "
                              f"one window, the minimum is {window} samples")
    frames = np.lib.stride_tricks.sliding_window_view(waveform.samples, window)[::hop]
    frames = frames * scipy.signal.get_window("hamming", window)
    magnitude = np.abs(scipy.fft.rfft(frames, n=fft_size, axis=1))
    return np.log(magnitude + LOG_FLOOR)


def cmvn(spec: np.ndarray) -> np.ndarray:
    """
    Per-bin mean and variance normalisation over one utterance.

    :raises DegenerateError: for fewer than two frames.

    """
    spec = np.asarray(spec, dtype=np.float64)
    if spec.ndim != 2:
        raise ShapeError(f"cmvn expects [T, bins], got dims {spec.shape}")
    if spec.shape[0] < 2:
        raise DegenerateError(f"cmvn needs at least 2 frames, got {spec.shape[0]}")
    centred = spec - spec.mean(axis=0)
    normalised = centred / (centred.std(axis=0) + CMVN_FLOOR)
    # constant bins are exactly zero, whatever rounding the mean picked up
    normalised[:, np.ptp(spec, axis=0) == 0] = 0.0
    return normalised


def splice(spec: np.ndarray, left: int = LEFT_CONTEXT, right: int = RIGHT_CONTEXT) -> np.ndarray:
    """
    Stack each frame with its context, replicating the edge frames.

    :returns: array [T0, left + 1 + right, bins]; row *left* is the frame itself.

    """
    spec = np.asarray(spec)
    if spec.ndim != 2 or spec.shape[0] < 1:
        raise ShapeError(f"splice expects [T >= 1, bins], got dims {spec.shape}")
    if left < 0 or right < 0:
        raise ParameterError(f"context sizes must not be negative, got {left} and {right}")
    padded = np.pad(spec, ((left, right), (0, 0)), mode="edge")
    index = np.arange(spec.shape[0])[:, None] + np.arange(left + 1 + right)[None, :]
    return padded[index]


def downsample(seq: np.ndarray, factor: int = DOWNSAMPLE) -> np.ndarray:
    """
    Keep the frames at indices 0, factor, 2 * factor, ...

    :raises ParameterError: if factor < 1.

    """
    if factor < 1:
        raise ParameterError(f"downsample factor must be at least 1, got {factor}")
    return seq[::factor]


def extract_features(waveform: Waveform, downsample_factor: int = DOWNSAMPLE) -> FeatureSequence:
    """The whole chain, from samples to spliced downsampled frames."""
    spliced = splice(cmvn(spectrogram(waveform)))
    frames = downsample(spliced, downsample_factor)
    hop = HOP_MS / 1000
    return FeatureSequence(frames, frame_period=hop * downsample_factor)


# ----------------------------------------------------------------------------
# feature files
# ----------------------------------------------------------------------------

def feature_path(feature_dir: Union[str, Path], utterance_id: str) -> Path:
    return Path(feature_dir) / f"{utterance_id}{FEATURE_SUFFIX}"


def save_features(fpath: Union[str, Path], features: FeatureSequence):
    save_tensor(fpath, features.frames, dtype_code=FLOAT32)


def load_features(fpath: Union[str, Path], utterance_id: str = "") -> np.ndarray:
    """
    Read one utterance's frames [T, 16, 257].

    :raises MissingFeatureError: naming the utterance if the file does not exist.

    """
    fpath = Path(fpath)
    if not fpath.exists():
        raise MissingFeatureError(utterance_id or fpath.stem, fpath)
    frames = load_tensor(fpath)
    if frames.ndim != 3 or frames.shape[0] < 1:
        raise ShapeError(f"{fpath} holds dims {frames.shape}, expected [T, {CONTEXT}, {SPECTRAL_BINS}]")
    return frames
