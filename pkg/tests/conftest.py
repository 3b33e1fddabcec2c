import numpy as np
import pytest

from biaseval.core import Text
from biaseval.metaeval import MetaEvalDataset, Record
from biaseval.metrics.embedding import EmbeddingStore


@pytest.fixture
def tiny_store():
    return EmbeddingStore(2, {
        "a": np.array([1.0, 0.0]),
        "b": np.array([0.0, 1.0]),
        "c": np.array([1.0, 1.0]),
        "d": np.array([-1.0, 0.0]),
        "e": np.array([2.0, -1.0]),
        "f": np.array([-3.0, 0.5]),
    })


def make_dataset(records, name="synthetic", dimensions=("overall",)):
    return MetaEvalDataset(name=name, dimensions=list(dimensions),
                           records=records)


def make_record(example_id, hypothesis, references, human, system_id="sys1"):
    return Record(example_id=str(example_id), system_id=system_id,
                  hypothesis=Text(hypothesis),
                  references=[Text(r) for r in references],
                  human=dict(human))


NEUTRAL_FILLERS = [
    "walking down the street", "sitting by the window",
    "reading a long book", "standing near the door",
    "holding a red umbrella", "looking at the sky",
    "waiting for the train", "cooking a warm meal",
]

MALE_SUBJECTS = ["man", "boy", "father", "brother", "king", "waiter",
                 "uncle", "grandfather"]


def gendered_sentence(i):
    """Deterministic sentence with exactly one male lexicon word."""
    subject = MALE_SUBJECTS[i % len(MALE_SUBJECTS)]
    filler = NEUTRAL_FILLERS[(i * 3 + 1) % len(NEUTRAL_FILLERS)]
    return f"A {subject} is {filler}."


def neutral_sentence(i):
    filler = NEUTRAL_FILLERS[i % len(NEUTRAL_FILLERS)]
    return f"A person is {filler} today."
