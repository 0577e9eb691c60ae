##############################################################################
# (c) Crown copyright Met Office. All rights reserved.
# For further details please refer to the file COPYRIGHT
# which you should have received as part of this distribution
##############################################################################
from collections import Counter

import numpy as np
import pytest

from subband_shake import ParameterError
from subband_shake.data.manifest import read_manifest, wav_path
from subband_shake.data.synth import (DEFAULT_BANDS, SynthSpec, generate_synthetic_corpus, make_actors,
                                      synth_utterance)
from subband_shake.features import read_wav, spectrogram
from subband_shake.util import file_checksum


class TestSynthSpec():

    @pytest.mark.parametrize("kwargs", [
        dict(actor_count=0),
        dict(per_class=-1),
        dict(corpora=()),
        dict(class_bands={'joy': (100.0, 200.0)}),
        dict(class_bands={**DEFAULT_BANDS, 'joy': (7900.0, 8100.0)}),
        dict(min_duration=2.0, max_duration=1.0),
        dict(noise_level=-0.1),
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(ParameterError):
            SynthSpec(**kwargs)

    def test_actors(self):
        actors = make_actors(SynthSpec(actor_count=5, corpora=("x", "y")))
        assert [a.gender for a in actors] == ['F', 'M', 'F', 'M', 'F']
        assert [a.corpus for a in actors] == ['x', 'y', 'x', 'y', 'x']
        assert actors[0].actor_id == 'x-a01'


class TestUtterance():

    def test_deterministic(self, small_synth_spec):
        actor = make_actors(small_synth_spec)[1]
        one = synth_utterance(small_synth_spec, actor, 'anger', 3)
        two = synth_utterance(small_synth_spec, actor, 'anger', 3)
        assert np.array_equal(one.samples, two.samples)

    def test_duration_range(self, small_synth_spec):
        actor = make_actors(small_synth_spec)[0]
        for i in range(5):
            wave = synth_utterance(small_synth_spec, actor, 'joy', i)
            assert 0.3 <= wave.duration <= 0.6
            assert np.max(np.abs(wave.samples)) <= 1.0

    @pytest.mark.parametrize("label", ['joy', 'anger', 'sadness', 'fear'])
    def test_energy_in_class_band(self, label):
        spec = SynthSpec(noise_level=0.0, min_duration=1.0, max_duration=1.0)
        wave = synth_utterance(spec, make_actors(spec)[0], label, 0)
        power = np.exp(spectrogram(wave)).mean(axis=0)
        peak_hz = np.argmax(power) * 16000 / 512
        low, high = DEFAULT_BANDS[label]
        assert low * 0.9 <= peak_hz <= high * 1.1

    def test_high_classes_above_half_band(self):
        assert DEFAULT_BANDS['joy'][0] > 4000 and DEFAULT_BANDS['anger'][0] > 4000
        assert DEFAULT_BANDS['sadness'][1] < 4000 and DEFAULT_BANDS['fear'][1] < 4000


class TestCorpus():

    def test_layout(self, tmp_path, small_synth_spec):
        records = generate_synthetic_corpus(small_synth_spec, tmp_path)
        assert len(records) == 4 * 4 * 2
        assert read_manifest(tmp_path / 'manifest.csv') == records
        assert Counter(r.label for r in records) == {'joy': 8, 'anger': 8, 'sadness': 8, 'fear': 8}
        assert Counter(r.gender for r in records) == {'F': 16, 'M': 16}
        for r in records:
            assert wav_path(tmp_path / 'manifest.csv', r).exists()
            assert r.feature_path == f"features/{r.utterance_id}.feat"
        assert read_wav(tmp_path / 'wav' / f"{records[0].utterance_id}.wav").sample_rate == 16000

    def test_reproducible(self, tmp_path, small_synth_spec):
        generate_synthetic_corpus(small_synth_spec, tmp_path / 'one')
        generate_synthetic_corpus(small_synth_spec, tmp_path / 'two', jobs=2)
        for name in ('manifest.csv', 'wav/synth-a02-fear-002.wav'):
            assert file_checksum(tmp_path / 'one' / name).file_hash == \
                file_checksum(tmp_path / 'two' / name).file_hash

    def test_write_failure(self, tmp_path, small_synth_spec, mocker):
        mocker.patch('subband_shake.data.synth.write_wav', side_effect=OSError("disk full"))
        with pytest.raises(RuntimeError, match="32 error\\(s\\) found during synthetic corpus generation"):
            generate_synthetic_corpus(small_synth_spec, tmp_path)


class TestSeparability():

    @staticmethod
    def band_energies(spec: SynthSpec, wave) -> np.ndarray:
        hz = np.arange(257) * spec.sample_rate / 512
        energy = np.exp(spectrogram(wave)).mean(axis=0) ** 2
        return np.log([energy[(hz >= low) & (hz <= high)].mean() for low, high in DEFAULT_BANDS.values()])

    def test_linear_floor(self):
        # fit on two actors, score on the other two
        spec = SynthSpec(actor_count=4, per_class=10, min_duration=0.5, max_duration=1.0, seed=11)
        labels = list(DEFAULT_BANDS)
        rows = {True: ([], []), False: ([], [])}
        for actor in make_actors(spec):
            for c, label in enumerate(labels):
                for k in range(spec.per_class):
                    wave = synth_utterance(spec, actor, label, c * spec.per_class + k)
                    features, targets = rows[actor.index < 2]
                    features.append(np.append(self.band_energies(spec, wave), 1.0))
                    targets.append(c)

        train_x, train_y = (np.array(a) for a in rows[True])
        test_x, test_y = (np.array(a) for a in rows[False])
        weights, *_ = np.linalg.lstsq(train_x, np.eye(len(labels))[train_y], rcond=None)
        accuracy = np.mean(np.argmax(test_x @ weights, axis=1) == test_y)
        assert accuracy > 0.8
