"""Cognitive intake: the ten-item questionnaire, scoring into LCS/HCS groups,
and the derived priority configuration that sets machine intervention level."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Callable

from .heuristics import TrendLabel

SCORE_ITEMS = 10
LCS_MAX_SCORE = 4  # 0..4 low, 5..10 high


class QuestionKind(Enum):
    YES_NO = "YES_NO"
    FACT = "FACT"


class Group(Enum):
    LCS = "LCS"
    HCS = "HCS"


class WrongAnswerCount(ValueError):
    pass


class AbortedByUser(RuntimeError):
    pass


@dataclass(frozen=True)
class QuestionnaireItem:
    item_id: int
    prompt: str
    kind: QuestionKind
    fact_key: str | None = None  # which ground-truth entry a FACT item checks


@dataclass(frozen=True)
class Questionnaire:
    items: tuple[QuestionnaireItem, ...]

    def __post_init__(self) -> None:
        if len(self.items) != SCORE_ITEMS:
            raise ValueError(f"questionnaire must have exactly {SCORE_ITEMS} items")
        if len({i.item_id for i in self.items}) != SCORE_ITEMS:
            raise ValueError("item ids must be unique")


DEFAULT_QUESTIONNAIRE = Questionnaire(
    items=(
        QuestionnaireItem(1, "Have you played any game before?", QuestionKind.YES_NO),
        QuestionnaireItem(2, "Do you know about mazes?", QuestionKind.YES_NO),
        QuestionnaireItem(3, "Can you solve a maze on paper?", QuestionKind.YES_NO),
        QuestionnaireItem(
            4, "Can you utilize essential features of your mobile phone?", QuestionKind.YES_NO
        ),
        QuestionnaireItem(
            5, "Can you prepare adequate meals if supplied with ingredients?", QuestionKind.YES_NO
        ),
        QuestionnaireItem(6, "What is today's date?", QuestionKind.FACT, "date"),
        QuestionnaireItem(7, "What city are we in?", QuestionKind.FACT, "city"),
        QuestionnaireItem(8, "Can you also tell me, what season it is?", QuestionKind.FACT, "season"),
        QuestionnaireItem(9, "What floor are we in?", QuestionKind.FACT, "floor"),
        QuestionnaireItem(
            10, "How many vowels in the word aeroplane?", QuestionKind.FACT, "vowel_count"
        ),
    )
)


@dataclass(frozen=True)
class FactGroundTruth:
    """Run-supplied answers for the fact items, so scoring is deterministic."""

    date: str
    city: str
    season: str
    floor: str
    vowel_count: int = 5  # a-e-o-a-e


@dataclass(frozen=True)
class CognitiveProfile:
    subject_id: str
    answers: tuple[bool, ...]  # True = positive / correct
    score: int
    group: Group


@dataclass(frozen=True)
class PriorityConfig:
    group: Group
    pause_timeout: float          # s of human silence before a takeover may fire
    trend_window: float           # s of distance history compared
    worsen_epsilon: float         # m deadband on the distance change
    takeover_trends: frozenset[TrendLabel]


def score_answers(answers: tuple[bool, ...] | list[bool]) -> tuple[int, Group]:
    if len(answers) != SCORE_ITEMS:
        raise WrongAnswerCount(f"expected {SCORE_ITEMS} answers, got {len(answers)}")
    score = sum(1 for a in answers if a)
    return score, (Group.LCS if score <= LCS_MAX_SCORE else Group.HCS)


def build_profile(subject_id: str, answers: tuple[bool, ...] | list[bool]) -> CognitiveProfile:
    score, group = score_answers(answers)
    return CognitiveProfile(subject_id, tuple(answers), score, group)


def make_priority_config(profile: CognitiveProfile) -> PriorityConfig:
    """Low scorers get eager intervention (NEUTRAL also triggers, short pause);
    high scorers only see a takeover while actively worsening."""
    if profile.group == Group.LCS:
        return PriorityConfig(
            group=Group.LCS,
            pause_timeout=0.4,
            trend_window=3.0,
            worsen_epsilon=0.05,
            takeover_trends=frozenset({TrendLabel.WORSENING, TrendLabel.NEUTRAL}),
        )
    return PriorityConfig(
        group=Group.HCS,
        pause_timeout=0.8,
        trend_window=3.0,
        worsen_epsilon=0.05,
        takeover_trends=frozenset({TrendLabel.WORSENING}),
    )


def _is_positive(raw: str) -> bool:
    return raw.strip().casefold() in {"y", "yes", "true", "1"}


def _fact_correct(item: QuestionnaireItem, raw: str, truth: FactGroundTruth) -> bool:
    expected = getattr(truth, item.fact_key or "")
    if item.fact_key == "vowel_count":
        try:
            return int(raw.strip()) == int(expected)
        except ValueError:
            return False
    return raw.strip().casefold() == str(expected).strip().casefold()


def administer(
    questionnaire: Questionnaire,
    answer_source: Callable[[QuestionnaireItem], str],
    ground_truth: FactGroundTruth,
    subject_id: str = "subject",
    store=None,
) -> CognitiveProfile:
    """Run the questionnaire against an answer source (interactive prompt or a
    scripted list), evaluate fact items against the supplied ground truth, and
    record the resulting profile in procedural memory when a store is given."""
    answers: list[bool] = []
    for item in questionnaire.items:
        try:
            raw = answer_source(item)
        except (EOFError, KeyboardInterrupt) as exc:
            raise AbortedByUser("questionnaire aborted") from exc
        if raw is None:
            raise AbortedByUser("questionnaire aborted")
        if item.kind == QuestionKind.YES_NO:
            answers.append(_is_positive(raw))
        else:
            answers.append(_fact_correct(item, raw, ground_truth))
    profile = build_profile(subject_id, answers)
    if store is not None:
        from .memory import ProceduralKey, ProceduralRecord  # local import avoids a cycle

        store.put(ProceduralRecord(ProceduralKey.COGNITIVE_SCORE, 0.0, profile))
    return profile


# --- key=value text files ----------------------------------------------------


def parse_kv_text(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key=value, got {line!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def priority_config_to_text(cfg: PriorityConfig) -> str:
    trends = ",".join(sorted(t.value for t in cfg.takeover_trends))
    return (
        f"group={cfg.group.value}\n"
        f"pause_timeout={cfg.pause_timeout}\n"
        f"trend_window={cfg.trend_window}\n"
        f"worsen_epsilon={cfg.worsen_epsilon}\n"
        f"takeover_trends={trends}\n"
    )


def priority_config_from_text(text: str) -> PriorityConfig:
    kv = parse_kv_text(text)
    trends = frozenset(
        TrendLabel(t) for t in kv["takeover_trends"].split(",") if t
    )
    return PriorityConfig(
        group=Group(kv["group"]),
        pause_timeout=float(kv["pause_timeout"]),
        trend_window=float(kv["trend_window"]),
        worsen_epsilon=float(kv["worsen_epsilon"]),
        takeover_trends=trends,
    )


def profile_to_text(profile: CognitiveProfile) -> str:
    answers = ",".join("1" if a else "0" for a in profile.answers)
    return (
        f"subject_id={profile.subject_id}\n"
        f"answers={answers}\n"
        f"score={profile.score}\n"
        f"group={profile.group.value}\n"
    )


def profile_from_text(text: str) -> CognitiveProfile:
    kv = parse_kv_text(text)
    answers = tuple(bit == "1" for bit in kv["answers"].split(","))
    profile = build_profile(kv["subject_id"], answers)
    if profile.score != int(kv["score"]) or profile.group != Group(kv["group"]):
        raise ValueError("stored score/group disagree with the stored answers")
    return profile
