import re
from abc import ABC, abstractmethod
from dataclasses import dataclass
from enum import Enum

from factcurve.utils import prompts


class JudgmentStrategy(Enum):
    DIRECT_ASKING = "direct"
    QUESTION_ANSWERING = "qa"
    QA_WITH_NOA = "qa_noa"


class Verdict(Enum):
    JUDGED_TRUE = "true"
    JUDGED_FALSE = "false"
    JUDGED_NOA = "noa"
    UNPARSEABLE = "unparseable"


@dataclass(frozen=True)
class JudgmentRecord:
    claim_id: str
    strategy: JudgmentStrategy
    raw_response: str
    verdict: Verdict

    def to_dict(self):
        return {
            "claim_id": self.claim_id,
            "strategy": self.strategy.value,
            "raw_response": self.raw_response,
            "verdict": self.verdict.value,
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            claim_id=data["claim_id"],
            strategy=JudgmentStrategy(data["strategy"]),
            raw_response=data["raw_response"],
            verdict=Verdict(data["verdict"]),
        )


_LETTERS = {"a": Verdict.JUDGED_TRUE, "b": Verdict.JUDGED_FALSE, "c": Verdict.JUDGED_NOA}
_WORDS = {"true": Verdict.JUDGED_TRUE, "false": Verdict.JUDGED_FALSE, "none of the above": Verdict.JUDGED_NOA}

# Patterns in priority order; the leftmost match wins and priority breaks ties at equal offsets
_PARENTHESIZED_LETTER = re.compile(r"\(([abc])\)", re.IGNORECASE)
_LEADING_LETTER = re.compile(r"^\s*([abc])[).:\]]", re.IGNORECASE)
_VERDICT_WORD = re.compile(r"\b(true|false|none\s+of\s+the\s+above)\b", re.IGNORECASE)


def parse_verdict(raw, strategy):
    """
    Reads the verdict out of a judging response.

    Candidates are option letters in parentheses "(A)"/"(B)"/"(C)", a bare leading
    letter followed by punctuation ("B) False"), and the whole words "true", "false",
    "none of the above". The leftmost candidate wins. Option letters only count for the
    multiple-choice strategies and NOA only for QaWithNoa.

    :return: Verdict; Unparseable when nothing matches.
    """
    allow_letters = strategy != JudgmentStrategy.DIRECT_ASKING
    allow_noa = strategy == JudgmentStrategy.QA_WITH_NOA

    candidates = []
    if allow_letters:
        for priority, pattern in enumerate((_PARENTHESIZED_LETTER, _LEADING_LETTER)):
            for match in pattern.finditer(raw):
                candidates.append((match.start(), priority, _LETTERS[match.group(1).lower()]))
    for match in _VERDICT_WORD.finditer(raw):
        word = " ".join(match.group(1).lower().split())
        candidates.append((match.start(), 2, _WORDS[word]))

    candidates = [c for c in candidates if allow_noa or c[2] != Verdict.JUDGED_NOA]
    if not candidates:
        return Verdict.UNPARSEABLE
    return min(candidates, key=lambda c: (c[0], c[1]))[2]


class JudgeStrategy(ABC):
    """Renders the judging prompt of one protocol."""

    kind = None
    needs_qa = True
    template = None

    @abstractmethod
    def render(self, claim, qa, entity):
        pass

    def parse(self, raw):
        return parse_verdict(raw, self.kind)


class DirectAskingStrategy(JudgeStrategy):
    # The claim itself, with the person it is about, asked as true or false.
    kind = JudgmentStrategy.DIRECT_ASKING
    needs_qa = False
    template = prompts.DIRECT_ASKING

    def render(self, claim, qa, entity):
        return prompts.render(self.template, person=entity, claim=claim.text)


class QuestionAnsweringStrategy(JudgeStrategy):
    # A question derived from the claim and the claim's answer, judged (A) True / (B) False.
    kind = JudgmentStrategy.QUESTION_ANSWERING
    template = prompts.QUESTION_ANSWERING

    def render(self, claim, qa, entity):
        return prompts.render(self.template, question=qa.question, answer=qa.answer)


class QaWithNoaStrategy(QuestionAnsweringStrategy):
    # Same question and answer plus (C) None of the above, so the model can say it does not know.
    kind = JudgmentStrategy.QA_WITH_NOA
    template = prompts.QA_WITH_NOA


STRATEGY_CLASSES = {
    JudgmentStrategy.DIRECT_ASKING: DirectAskingStrategy,
    JudgmentStrategy.QUESTION_ANSWERING: QuestionAnsweringStrategy,
    JudgmentStrategy.QA_WITH_NOA: QaWithNoaStrategy,
}
