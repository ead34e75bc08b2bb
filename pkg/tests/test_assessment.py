import pytest

from c3a.assessment import (
    DEFAULT_QUESTIONNAIRE,
    AbortedByUser,
    CognitiveProfile,
    FactGroundTruth,
    Group,
    PriorityConfig,
    QuestionKind,
    WrongAnswerCount,
    administer,
    build_profile,
    make_priority_config,
    priority_config_from_text,
    priority_config_to_text,
    profile_from_text,
    profile_to_text,
    score_answers,
)
from c3a.heuristics import TrendLabel

TRUTH = FactGroundTruth(date="2026-08-10", city="Springfield", season="summer", floor="2")


def answers_with_score(score):
    return tuple(i < score for i in range(10))


class TestScoring:
    @pytest.mark.parametrize(
        "score,group",
        [(10, Group.HCS), (3, Group.LCS), (9, Group.HCS), (2, Group.LCS)],
    )
    def test_named_subject_scores(self, score, group):
        got_score, got_group = score_answers(answers_with_score(score))
        assert got_score == score
        assert got_group == group

    def test_all_six_subject_pairs(self):
        expected = [
            ("subject_1", 10, Group.HCS),
            ("subject_2", 3, Group.LCS),
            ("subject_3", 9, Group.HCS),
            ("subject_4", 10, Group.HCS),
            ("subject_5", 2, Group.LCS),
            ("subject_6", 10, Group.HCS),
        ]
        for sid, score, group in expected:
            profile = build_profile(sid, answers_with_score(score))
            assert (profile.score, profile.group) == (score, group)

    def test_threshold_boundary(self):
        assert score_answers(answers_with_score(4))[1] == Group.LCS
        assert score_answers(answers_with_score(5))[1] == Group.HCS

    def test_group_monotone_in_score(self):
        for score in range(10):
            low = score_answers(answers_with_score(score))[1]
            high = score_answers(answers_with_score(score + 1))[1]
            assert not (low == Group.HCS and high == Group.LCS)

    def test_wrong_answer_count(self):
        with pytest.raises(WrongAnswerCount):
            score_answers((True,) * 9)
        with pytest.raises(WrongAnswerCount):
            score_answers((True,) * 11)


class TestPriorityConfig:
    def test_lcs_is_lenient(self):
        cfg = make_priority_config(build_profile("s", answers_with_score(2)))
        assert cfg.takeover_trends == frozenset({TrendLabel.WORSENING, TrendLabel.NEUTRAL})
        assert cfg.pause_timeout == 0.4

    def test_hcs_is_strict(self):
        cfg = make_priority_config(build_profile("s", answers_with_score(9)))
        assert cfg.takeover_trends == frozenset({TrendLabel.WORSENING})
        assert cfg.pause_timeout == 0.8

    def test_invariants_for_every_score(self):
        for score in range(11):
            profile = build_profile("s", answers_with_score(score))
            cfg = make_priority_config(profile)
            assert cfg.pause_timeout > 0
            if profile.group == Group.LCS:
                assert cfg.takeover_trends == frozenset(
                    {TrendLabel.WORSENING, TrendLabel.NEUTRAL}
                )
            else:
                assert cfg.takeover_trends == frozenset({TrendLabel.WORSENING})

    def test_text_round_trip(self):
        for score in (2, 9):
            cfg = make_priority_config(build_profile("s", answers_with_score(score)))
            assert priority_config_from_text(priority_config_to_text(cfg)) == cfg

    def test_profile_text_round_trip(self):
        profile = build_profile("subject_3", answers_with_score(9))
        assert profile_from_text(profile_to_text(profile)) == profile


class TestAdminister:
    def _source(self, responses):
        it = iter(responses)

        def answer(item):
            return next(it)

        return answer

    def test_vowel_item_correct(self):
        # yes to all five habits, four facts wrong, vowel count right
        responses = ["yes"] * 5 + ["wrong", "wrong", "wrong", "wrong", "5"]
        profile = administer(DEFAULT_QUESTIONNAIRE, self._source(responses), TRUTH)
        assert profile.answers[9] is True
        assert profile.score == 6

    def test_negative_response_scores_zero(self):
        responses = ["no"] * 5 + ["x"] * 5
        profile = administer(DEFAULT_QUESTIONNAIRE, self._source(responses), TRUTH)
        assert profile.score == 0
        assert profile.group == Group.LCS

    def test_seven_correct_is_hcs(self):
        responses = ["yes"] * 5 + [TRUTH.date, TRUTH.city, "wrong", "wrong", "7"]
        profile = administer(DEFAULT_QUESTIONNAIRE, self._source(responses), TRUTH)
        assert profile.score == 7
        assert profile.group == Group.HCS

    def test_fact_matching_ignores_case(self):
        responses = ["y"] * 5 + ["2026-08-10", "SPRINGFIELD", "Summer", "2", "5"]
        profile = administer(DEFAULT_QUESTIONNAIRE, self._source(responses), TRUTH)
        assert profile.score == 10

    def test_aborted(self):
        def answer(item):
            raise EOFError

        with pytest.raises(AbortedByUser):
            administer(DEFAULT_QUESTIONNAIRE, answer, TRUTH)

    def test_writes_profile_to_store(self):
        from c3a.memory import MemoryStore, ProceduralKey

        store = MemoryStore()
        responses = ["yes"] * 5 + [TRUTH.date, TRUTH.city, TRUTH.season, TRUTH.floor, "5"]
        profile = administer(
            DEFAULT_QUESTIONNAIRE, self._source(responses), TRUTH, subject_id="s9", store=store
        )
        stored = store.get(ProceduralKey.COGNITIVE_SCORE)
        assert stored == profile
        assert stored.score == 10

    def test_questionnaire_shape(self):
        items = DEFAULT_QUESTIONNAIRE.items
        assert len(items) == 10
        assert [i.kind for i in items[:5]] == [QuestionKind.YES_NO] * 5
        assert [i.kind for i in items[5:]] == [QuestionKind.FACT] * 5
