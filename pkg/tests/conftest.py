import pytest

from gazekit.datasets import dataset_from_blocks
from gazekit.geometry import build_scene
from gazekit.models import ModelConfig, build_training_examples, train
from gazekit.synthlab import EYES_VISIBLE, LookerProfile, generate_blocks


@pytest.fixture(scope="session")
def scene():
    return build_scene()


@pytest.fixture(scope="session")
def noiseless_blocks(scene):
    """Four noiseless blocks of a kappa=0.6 looker; train on 3, hold out 1."""
    profile = LookerProfile(looker_id="L1", kappa=0.6, seed=7)
    return profile, generate_blocks(profile, scene, 4, EYES_VISIBLE, seed=11)


@pytest.fixture(scope="session")
def train_test_datasets(scene, noiseless_blocks):
    _, blocks = noiseless_blocks
    return dataset_from_blocks(scene, blocks[:3]), dataset_from_blocks(scene, blocks[3:])


@pytest.fixture(scope="session")
def face_eyes_model(train_test_datasets):
    train_ds, _ = train_test_datasets
    examples = build_training_examples(train_ds.records)
    return train(examples, ModelConfig())
