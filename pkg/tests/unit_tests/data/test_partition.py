##############################################################################
# (c) Crown copyright Met Office. All rights reserved.
# For further details please refer to the file COPYRIGHT
# which you should have received as part of this distribution
##############################################################################
import pytest

from subband_shake import ConsistencyError, ParameterError
from subband_shake.data.manifest import UtteranceRecord
from subband_shake.data.partition import (ActorPartition, actor_cells, make_folds, partition_actors,
                                          partition_summary, read_partition, write_partition)


def make_manifest(females=11, males=12, per_actor=2, corpus='c'):
    records = []
    for i in range(females + males):
        gender = 'F' if i < females else 'M'
        for k in range(per_actor):
            records.append(UtteranceRecord(f"{corpus}{i}-{k}", f"{corpus}-a{i:02d}", gender, corpus,
                                           'joy', f"features/{corpus}{i}-{k}.feat"))
    return records


@pytest.fixture
def manifest():
    return make_manifest()


class TestPartition():

    def test_balanced(self, manifest):
        partition = partition_actors(manifest, k=4, seed=0)
        assert sorted(len(s) for s in partition.sets) == [5, 6, 6, 6]
        assert partition.actors == {r.actor_id for r in manifest}

        cells = actor_cells(manifest)
        for gender, total in (('F', 11), ('M', 12)):
            counts = [len(s & set(cells[('c', gender)])) for s in partition.sets]
            assert sum(counts) == total
            assert max(counts) - min(counts) <= 1

    def test_seeded(self, manifest):
        assert partition_actors(manifest, 4, seed=1) == partition_actors(manifest, 4, seed=1)
        assert partition_actors(manifest, 4, seed=1) != partition_actors(manifest, 4, seed=2)

    def test_two_corpora(self):
        manifest = make_manifest(3, 3, corpus='x') + make_manifest(2, 4, corpus='y')
        partition = partition_actors(manifest, k=3)
        for cell, actors in actor_cells(manifest).items():
            counts = [len(s & set(actors)) for s in partition.sets]
            assert max(counts) - min(counts) <= 1, cell
        assert sorted(len(s) for s in partition.sets) == [4, 4, 4]

    def test_too_few_actors(self):
        with pytest.raises(ParameterError, match="cannot deal 3 actors into 4"):
            partition_actors(make_manifest(1, 2), k=4)

    def test_k(self, manifest):
        with pytest.raises(ParameterError):
            partition_actors(manifest, k=1)

    def test_actor_in_two_cells(self, manifest):
        bad = manifest + [UtteranceRecord('x', manifest[0].actor_id, 'M', 'c', 'joy', 'x.feat')]
        with pytest.raises(ConsistencyError, match="appears as both"):
            partition_actors(bad)

    def test_overlap(self):
        with pytest.raises(ConsistencyError, match="more than one partition"):
            ActorPartition((frozenset({'a', 'b'}), frozenset({'b'})))


class TestFolds():

    def test_speaker_independent(self, manifest):
        partition = partition_actors(manifest, k=4)
        folds = make_folds(partition, manifest)
        assert [f.index for f in folds] == [0, 1, 2, 3]
        for fold in folds:
            assert not fold.train_actors & fold.validation_actors
            assert fold.validation_actors == set(partition.sets[fold.index])
            assert len(fold.train) + len(fold.validation) == len(manifest)

    def test_every_utterance_validated_once(self, manifest):
        folds = make_folds(partition_actors(manifest, k=4), manifest)
        validated = [r.utterance_id for f in folds for r in f.validation]
        assert sorted(validated) == sorted(r.utterance_id for r in manifest)

    def test_unknown_actor(self, manifest):
        partition = partition_actors(manifest[:-2], k=4)
        with pytest.raises(ConsistencyError, match="in no partition"):
            make_folds(partition, manifest)


class TestText():

    def test_round_trip(self, tmp_path, manifest):
        partition = partition_actors(manifest, k=4)
        write_partition(tmp_path / 'partition.txt', partition)
        assert (tmp_path / 'partition.txt').read_text().startswith("[partition 1]\n")
        assert read_partition(tmp_path / 'partition.txt') == partition

    def test_actor_before_header(self, tmp_path):
        (tmp_path / 'partition.txt').write_text("a1\n[partition 1]\n")
        with pytest.raises(ConsistencyError, match="before the first partition header"):
            read_partition(tmp_path / 'partition.txt')

    def test_summary(self, manifest):
        partition = partition_actors(manifest, k=4)
        lines = partition_summary(partition, manifest).splitlines()
        assert lines[0].split() == ["corpus", "set", "1", "set", "2", "set", "3", "set", "4"]
        assert lines[1].startswith("c ")
        assert lines[2].startswith("total")
        cells = [cell.strip() for cell in lines[2][len("total"):].split("  ") if cell.strip()]
        assert sorted(cells) == ["2F, 3M", "3F, 3M", "3F, 3M", "3F, 3M"]
