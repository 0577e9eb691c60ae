##############################################################################
# (c) Crown copyright Met Office. All rights reserved.
# For further details please refer to the file COPYRIGHT
# which you should have received as part of this distribution
##############################################################################
"""
A synthetic four-class emotion corpus.

Every class is a cluster of tones whose energy sits in its own frequency
band: two classes in the lower half of the spectrum and two in the upper
half. Actors differ by a small timbre shift of the band, and every
utterance gets its own random tones, syllable-rate envelope and noise.

Each utterance is seeded from (root seed, actor index, utterance index), so
the corpus is identical whatever order or job count generates it.

"""
import logging
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path
from typing import Dict, List, Tuple, Union

import numpy as np

from subband_shake import ParameterError
from subband_shake.constants import EMOTIONS, FEATURE_FOLDER, FEATURE_SUFFIX, MANIFEST_NAME, SAMPLE_RATE, WAV_FOLDER
from subband_shake.data.manifest import UtteranceRecord, write_manifest
from subband_shake.features import Waveform, write_wav
from subband_shake.util import check_for_errors, make_rng, run_mp

logger = logging.getLogger(__name__)

# class -> (low Hz, high Hz), at 16 kHz the half-band border is 4 kHz
DEFAULT_BANDS = {
    'joy': (4800.0, 6200.0),
    'anger': (6400.0, 7600.0),
    'sadness': (300.0, 1500.0),
    'fear': (1800.0, 3400.0),
}


@dataclass(frozen=True)
class SynthSpec:
    """
    What to generate.

    :param actor_count: actors, alternately female and male.
    :param per_class: utterances per actor per class.
    :param corpora: corpus tags, dealt to actors in turn.
    :param class_bands: class -> frequency band of its tone cluster.
    :param noise_level: standard deviation of the additive white noise.
    :param seed: root seed.

    """
    actor_count: int = 8
    per_class: int = 20
    corpora: Tuple[str, ...] = ("synth", )
    class_bands: Dict[str, Tuple[float, float]] = field(default_factory=lambda: dict(DEFAULT_BANDS))
    noise_level: float = 0.05
    seed: int = 0
    sample_rate: int = SAMPLE_RATE
    min_duration: float = 1.0
    max_duration: float = 3.0
    tones: int = 6
    jitter: float = 0.08

    def __post_init__(self):
        if self.actor_count < 1 or self.per_class < 0:
            raise ParameterError(f"need at least one actor and a non-negative count, "
                                 f"got {self.actor_count} actors and {self.per_class} per class")
        if not self.corpora:
            raise ParameterError("need at least one corpus tag")
        if set(self.class_bands) != set(EMOTIONS):
            raise ParameterError(f"class bands must cover {EMOTIONS}, got {sorted(self.class_bands)}")
        nyquist = self.sample_rate / 2
        for label, (low, high) in self.class_bands.items():
            if not 0 < low < high < nyquist / (1 + self.jitter):
                raise ParameterError(f"band {low}-{high} Hz of '{label}' does not fit below {nyquist} Hz")
        if not 0 < self.min_duration <= self.max_duration:
            raise ParameterError(f"bad duration range {self.min_duration}-{self.max_duration} s")
        if self.noise_level < 0:
            raise ParameterError(f"noise level must not be negative, got {self.noise_level}")


@dataclass(frozen=True)
class Actor:
    index: int
    actor_id: str
    gender: str
    corpus: str


def make_actors(spec: SynthSpec) -> List[Actor]:
    actors = []
    for i in range(spec.actor_count):
        corpus = spec.corpora[i % len(spec.corpora)]
        actors.append(Actor(i, f"{corpus}-a{i + 1:02d}", "F" if i % 2 == 0 else "M", corpus))
    return actors


def synth_utterance(spec: SynthSpec, actor: Actor, label: str, utterance_index: int) -> Waveform:
    """
    One utterance of class *label* spoken by *actor*.

    """
    timbre = 1.0 + make_rng(spec.seed, actor.index).uniform(-spec.jitter, spec.jitter)
    rng = make_rng(spec.seed, actor.index, utterance_index)

    duration = rng.uniform(spec.min_duration, spec.max_duration)
    t = np.arange(int(duration * spec.sample_rate)) / spec.sample_rate
    low, high = spec.class_bands[label]
    freqs = rng.uniform(low, high, spec.tones) * timbre
    amps = rng.uniform(0.3, 1.0, spec.tones)
    phases = rng.uniform(0, 2 * np.pi, spec.tones)
    signal = (amps[:, None] * np.sin(2 * np.pi * freqs[:, None] * t[None, :] + phases[:, None])).sum(axis=0)

    # syllable-rate amplitude envelope
    rate = rng.uniform(3.0, 6.0)
    envelope = 0.6 + 0.4 * np.sin(2 * np.pi * rate * t + rng.uniform(0, 2 * np.pi))
    signal = signal * envelope
    signal = 0.5 * signal / np.max(np.abs(signal))

    ramp = min(len(t) // 2, int(0.02 * spec.sample_rate))
    if ramp:
        fade = np.linspace(0.0, 1.0, ramp)
        signal[:ramp] *= fade
        signal[-ramp:] *= fade[::-1]

    signal = signal + rng.normal(0.0, spec.noise_level, len(t))
    return Waveform(np.clip(signal, -1.0, 1.0), spec.sample_rate)


def _plan(spec: SynthSpec) -> List[Tuple[Actor, str, int, str]]:
    jobs = []
    for actor in make_actors(spec):
        for c, label in enumerate(EMOTIONS):
            for k in range(spec.per_class):
                utterance_id = f"{actor.actor_id}-{label}-{k + 1:03d}"
                jobs.append((actor, label, c * spec.per_class + k, utterance_id))
    return jobs


def _write_one(job, spec: SynthSpec, wav_dir: Path) -> Union[UtteranceRecord, Exception]:
    actor, label, utterance_index, utterance_id = job
    fpath = wav_dir / f"{utterance_id}.wav"
    try:
        write_wav(fpath, synth_utterance(spec, actor, label, utterance_index))
    except OSError as err:
        return OSError(f"could not write {fpath}: {err}")
    return UtteranceRecord(utterance_id=utterance_id, actor_id=actor.actor_id, gender=actor.gender,
                           corpus=actor.corpus, label=label,
                           feature_path=f"{FEATURE_FOLDER}/{utterance_id}{FEATURE_SUFFIX}")


def generate_synthetic_corpus(spec: SynthSpec, out_dir: Union[str, Path], jobs: int = 1) -> List[UtteranceRecord]:
    """
    Write ``wav/<utterance_id>.wav`` files and ``manifest.csv`` under *out_dir*.

    :returns: the manifest rows, in generation order.
    :raises RuntimeError: listing every file which could not be written.

    """
    out_dir = Path(out_dir)
    wav_dir = out_dir / WAV_FOLDER
    wav_dir.mkdir(parents=True, exist_ok=True)

    results = run_mp(_plan(spec), partial(_write_one, spec=spec, wav_dir=wav_dir), jobs)
    check_for_errors(results, caller_label="synthetic corpus generation")

    write_manifest(out_dir / MANIFEST_NAME, results)
    logger.info(f"generated {len(results)} utterances from {spec.actor_count} actors in {out_dir}")
    return results
