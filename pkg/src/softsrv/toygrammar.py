"""Toy grammars that stand in for real question distributions.

Two target grammars ship built in: arithmetic word problems with derivable
numeric answers, and short passage + true/false questions. A third pool of
generic filler sentences exists only for pretraining (notably the student,
which must never see the target grammar before fine-tuning). Every slot
draws uniformly from its declared pool, so slot-value frequencies are flat
by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ValidationError

_NAMES = [
    "Ava", "Ben", "Carla", "Dev", "Elena", "Farid", "Grace", "Hugo",
    "Iris", "Jonas", "Kira", "Liam", "Mona", "Noor", "Omar", "Priya",
]
_ITEMS = [
    "apples", "pears", "books", "coins", "pencils", "marbles",
    "stickers", "shells", "cards", "buttons", "stamps", "cherries",
]
_ANIMALS = ["fox", "owl", "otter", "heron", "badger", "tortoise", "lynx", "crane"]
_HABITATS = ["forest", "marsh", "meadow", "river", "cliff", "garden", "cave", "orchard"]
_COLORS = ["red", "grey", "brown", "golden", "silver", "spotted", "striped", "pale"]
_FOODS = ["berries", "fish", "seeds", "insects", "roots", "leaves", "snails", "grass"]


@dataclass
class Production:
    """One question/answer pattern; slots fill from uniform pools."""

    question: str
    answer: str
    slots: dict[str, list]
    derive: Callable[[dict], dict] = field(default=lambda s: {})

    def realize(self, rng: np.random.Generator) -> tuple[dict, str, str]:
        values = {name: pool[int(rng.integers(len(pool)))] for name, pool in self.slots.items()}
        values.update(self.derive(values))
        return values, self.question.format(**values), self.answer.format(**values)


@dataclass
class ToyGrammar:
    grammar_id: str
    productions: list[Production]

    def sample_example(self, rng: np.random.Generator) -> tuple[int, dict, str, str]:
        pi = int(rng.integers(len(self.productions)))
        values, q, a = self.productions[pi].realize(rng)
        return pi, values, q, a


@dataclass
class CorpusExample:
    question: str
    answer: str


def _arithmetic() -> ToyGrammar:
    small = list(range(2, 13))
    large = list(range(14, 25))
    factors = list(range(2, 7))
    return ToyGrammar(
        grammar_id="arithmetic",
        productions=[
            Production(
                question="{name} has {a} {item} and buys {b} more. How many {item} does {name} have now?",
                answer="{name} now has {c} {item}.",
                slots={"name": _NAMES, "item": _ITEMS, "a": small, "b": small},
                derive=lambda s: {"c": s["a"] + s["b"]},
            ),
            Production(
                question="{name} had {a} {item} and gave away {b}. How many {item} are left?",
                answer="There are {c} {item} left.",
                slots={"name": _NAMES, "item": _ITEMS, "a": large, "b": small},
                derive=lambda s: {"c": s["a"] - s["b"]},
            ),
            Production(
                question="There are {k} boxes with {a} {item} in each box. How many {item} are there in total?",
                answer="In total there are {c} {item}.",
                slots={"item": _ITEMS, "k": factors, "a": small},
                derive=lambda s: {"c": s["k"] * s["a"]},
            ),
            Production(
                question="{name} picked {a} {item} and {name2} picked {b}. How many {item} did they pick together?",
                answer="Together they picked {c} {item}.",
                slots={"name": _NAMES, "name2": _NAMES, "item": _ITEMS, "a": small, "b": small},
                derive=lambda s: {"c": s["a"] + s["b"]},
            ),
        ],
    )


def _truefalse() -> ToyGrammar:
    def same(s):
        return {"verdict": "true" if s["habitat2"] == s["habitat"] else "false"}

    return ToyGrammar(
        grammar_id="truefalse",
        productions=[
            Production(
                question=(
                    "Passage: The {color} {animal} lives in the {habitat} and eats {food}. "
                    "Question: does the {animal} live in the {habitat2}?"
                ),
                answer="{verdict}",
                slots={
                    "color": _COLORS, "animal": _ANIMALS, "habitat": _HABITATS,
                    "food": _FOODS, "habitat2": _HABITATS,
                },
                derive=same,
            ),
            Production(
                question=(
                    "Passage: A {color} {animal} was seen near the {habitat} looking for {food}. "
                    "Question: was the {animal} looking for {food2}?"
                ),
                answer="{verdict2}",
                slots={
                    "color": _COLORS, "animal": _ANIMALS, "habitat": _HABITATS,
                    "food": _FOODS, "food2": _FOODS,
                },
                derive=lambda s: {"verdict2": "true" if s["food2"] == s["food"] else "false"},
            ),
        ],
    )


_BUILTIN = {"arithmetic": _arithmetic, "truefalse": _truefalse}


def builtin_grammar(grammar_id: str) -> ToyGrammar:
    if grammar_id not in _BUILTIN:
        raise ValidationError(f"unknown grammar {grammar_id!r}")
    return _BUILTIN[grammar_id]()


def make_toy_corpus(grammar: ToyGrammar, n: int, seed: int) -> tuple[list[CorpusExample], list[CorpusExample]]:
    """n distinct examples split 90/10 by a seeded shuffle.

    Sampling repeats until n distinct question strings exist, so the folds
    are disjoint as strings by construction.
    """
    if n < 2:
        raise ValidationError("need n >= 2 for a train/test split")
    rng = np.random.default_rng(seed)
    seen: dict[str, str] = {}
    attempts = 0
    while len(seen) < n:
        attempts += 1
        if attempts > 200 * n:
            raise ValidationError(f"grammar too small for {n} distinct questions")
        _, _, q, a = grammar.sample_example(rng)
        if q not in seen:
            seen[q] = a
    examples = [CorpusExample(question=q, answer=a) for q, a in seen.items()]
    order = rng.permutation(len(examples))
    shuffled = [examples[int(i)] for i in order]
    n_test = max(1, n // 10)
    return shuffled[n_test:], shuffled[:n_test]


_GENERIC_PEOPLE = ["teacher", "baker", "farmer", "sailor", "painter", "doctor", "rider", "singer"]
_GENERIC_PLACES = ["market", "harbor", "school", "valley", "village", "station", "bridge", "field"]
_GENERIC_VERBS = ["walks", "runs", "rides", "drives", "hurries", "wanders", "returns", "travels"]
_GENERIC_TIMES = ["morning", "noon", "evening", "night", "spring", "summer", "autumn", "winter"]


def generic_corpus(n: int, seed: int) -> list[str]:
    """Filler sentences sharing no production shape with the target grammars."""
    if n < 1:
        raise ValidationError("n must be >= 1")
    rng = np.random.default_rng(seed)
    forms = [
        "The {p} {v} to the {pl} every {t}.",
        "In the {t} the {p} {v} past the {pl}.",
        "A {p} from the {pl} {v} home at {t}.",
        "Every {t} one {p} {v} near the {pl}.",
    ]
    out = []
    for _ in range(n):
        form = forms[int(rng.integers(len(forms)))]
        out.append(
            form.format(
                p=_GENERIC_PEOPLE[int(rng.integers(8))],
                v=_GENERIC_VERBS[int(rng.integers(8))],
                pl=_GENERIC_PLACES[int(rng.integers(8))],
                t=_GENERIC_TIMES[int(rng.integers(8))],
            )
        )
    return out
