import numpy as np
import pytest

from graphmrc import load_lexicon

# the worked multiple-choice context used across the parser tests
GOLFING_CONTEXT = (
    "Paula will visit the dentist tomorrow morning if Bill goes golfing in the morning. "
    "Bill will not go golfing unless Damien agrees to go golfing too. "
    "Damien has decided not to go golfing."
)

GOLFING_UNITS = (
    "Paula will visit the dentist tomorrow morning",
    "Bill goes golfing in the morning",
    "Bill will not go golfing",
    "Damien agrees to go golfing too",
    "Damien has decided not to go golfing",
)


@pytest.fixture(scope="session")
def lexicon():
    return load_lexicon()


@pytest.fixture(scope="session")
def golfing_context():
    return GOLFING_CONTEXT


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_words(rng, n, vocabulary=None):
    if vocabulary is None:
        vocabulary = [f"w{i}" for i in range(30)]
    return [vocabulary[i] for i in rng.integers(0, len(vocabulary), size=n)]


def random_parser_text(rng) -> str:
    """Text mixing plain words, connectives, negations and punctuation."""
    words = [f"w{i}" for i in range(20)]
    connectives = ["if", "because", "therefore", "unless", "so", "when", "provided", "that"]
    negations = ["not", "never", "won't"]
    punctuation = [".", ",", ";", "!", "?", ":"]
    parts = []
    for _ in range(int(rng.integers(1, 40))):
        roll = rng.random()
        if roll < 0.55:
            parts.append(words[rng.integers(len(words))])
        elif roll < 0.7:
            parts.append(connectives[rng.integers(len(connectives))])
        elif roll < 0.8:
            parts.append(negations[rng.integers(len(negations))])
        else:
            parts.append(punctuation[rng.integers(len(punctuation))])
    return " ".join(parts)
