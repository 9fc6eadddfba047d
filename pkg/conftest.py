import json

import pytest

from auto_distractor.services.mock_backend_service import DEFAULT_MASK_TOKEN

MASK = DEFAULT_MASK_TOKEN

GOLDEN_CONTEXT = "The cat sat on the mat."
GOLDEN_SPAN = (4, 7)


def golden_sentence(word: str) -> str:
    return f"The {word} sat on the mat."


@pytest.fixture
def golden_config() -> dict:
    """Mock tables for "The cat sat on the mat." with answer "cat".

    Decoding proposes dog, cat, fox and rat; "dog" two-way entails the
    answer sentence and "fox" entails it one way only.
    """
    return {
        "mask_token": MASK,
        "predictions": [
            {
                "fingerprint": f"The {MASK} sat on the mat.",
                "position": 1,
                "top": [["dog", 0.5], ["cat", 0.2], ["fox", 0.15], ["rat", 0.1], ["cow", 0.05]],
            }
        ],
        "nli": [
            [golden_sentence("dog"), GOLDEN_CONTEXT, "entailment"],
            [GOLDEN_CONTEXT, golden_sentence("dog"), "entailment"],
            [golden_sentence("fox"), GOLDEN_CONTEXT, "entailment"],
        ],
        "nli_default": "neutral",
    }


@pytest.fixture
def golden_config_path(tmp_path, golden_config):
    path = tmp_path / "golden_mock.json"
    path.write_text(json.dumps(golden_config), encoding="utf-8")
    return path


@pytest.fixture
def vocabulary_config_path(tmp_path):
    """Mock tables answering every mask with a uniform three-word vocabulary."""
    path = tmp_path / "vocabulary_mock.json"
    path.write_text(json.dumps({
        "mask_token": MASK,
        "vocabulary": ["ant", "bee", "owl"],
        "nli_default": "neutral",
    }), encoding="utf-8")
    return path
