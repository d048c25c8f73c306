import pytest

from boostsr import corpus, pipeline


@pytest.fixture(scope="session")
def small_config():
    return pipeline.Config(
        dict_size=64, ksvd_iterations=8, rounds=3, boost_train_count=4
    ).validate()


@pytest.fixture(scope="session")
def small_model(small_config):
    """A small trained dictionary + anchors, shared across test modules."""
    faces = corpus.generate_corpus(12, seed=7)
    pair, anchors = pipeline.train_dict_stage(faces, small_config)
    return pair, anchors


@pytest.fixture(scope="session")
def small_boost(small_config, small_model):
    pair, _ = small_model
    heldout = corpus.generate_corpus(4, seed=77)
    return pipeline.train_boost_stage(heldout, pair, small_config)
