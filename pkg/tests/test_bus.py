import json
import math
import pathlib

import numpy as np
import pytest

from c3a.arbitration import ModeAnnouncement, TransitionCause
from c3a.bus import (
    CLIENT_WRITABLE,
    FLOW_TOPICS,
    TOPICS,
    Bus,
    Envelope,
    MalformedFrame,
    PayloadTypeMismatch,
    UnknownTopic,
    bridge_decode,
    bridge_encode,
)
from c3a.heuristics import DistanceBasis, DistanceSample, GoalPose, TrendLabel
from c3a.localization import PoseEstimate
from c3a.mapping import TernaryGrid
from c3a.memory import EpisodicEvent, EpisodeKind, ProceduralKey, ProceduralRecord, StateAction
from c3a.world import CommandSource, LaserScan, Pose2D, VelocityCommand

FIXTURES = pathlib.Path(__file__).parent / "fixtures"


def sample_payloads():
    """One representative payload per roster topic, deterministic values."""
    grid = TernaryGrid(3, 2, 0.25, Pose2D(0, 0, 0), np.array([[0, 1, 2], [2, 0, 1]], dtype=np.int8))
    cmd = VelocityCommand(0.5, -0.25, CommandSource.HUMAN, 1.5)
    scan = LaserScan(-math.pi / 2, math.pi / 2, math.pi / 2, 8.0, (1.0, 2.5, 8.0), 2.0)
    est = PoseEstimate(Pose2D(1.0, 2.0, 0.5), np.eye(3) * 0.01, 2.5)
    sa = StateAction(CommandSource.MACHINE, VelocityCommand(0.3, 0.0, CommandSource.MACHINE, 3.0), Pose2D(1, 1, 0))
    episode = EpisodicEvent(
        1, EpisodeKind.TAKEOVER, 1.0, 2.0,
        (ProceduralRecord(ProceduralKey.STATE_ACTION, 1.5, sa),),
    )
    return {
        "/cmd_vel_human": cmd,
        "/cmd_vel_machine": VelocityCommand(0.7, 0.2, CommandSource.MACHINE, 1.5),
        "/cmd_vel": VelocityCommand(0.7, 0.2, CommandSource.MACHINE, 1.6),
        "/scan": scan,
        "/pose_truth": PoseEstimate(Pose2D(0.6, 0.6, 0.0), np.zeros((3, 3)), 2.5),
        "/pose_estimate": est,
        "/map": grid,
        "/goal": GoalPose(Pose2D(7.1, 7.1, 0.0), (28, 28), 0.5),
        "/mode": ModeAnnouncement(CommandSource.MACHINE, TransitionCause.TAKEOVER, 4.0),
        "/metric/distance": DistanceSample(4.5, 3.25, DistanceBasis.PATH),
        "/metric/trend": TrendLabel.WORSENING,
        "/state_action": sa,
        "/episode": episode,
    }


def payload_equal(a, b):
    if isinstance(a, TernaryGrid):
        return (
            np.array_equal(a.cells, b.cells)
            and a.resolution == b.resolution
            and a.origin == b.origin
        )
    if isinstance(a, PoseEstimate):
        return a.mean == b.mean and np.array_equal(a.covariance, b.covariance) and a.stamp == b.stamp
    return a == b


class TestPubSub:
    def test_single_subscriber_receives_once(self):
        bus = Bus()
        sub = bus.subscribe("/metric/trend")
        env = bus.publish("/metric/trend", TrendLabel.NEUTRAL, stamp=1.0)
        got = sub.drain()
        assert got == [env]
        assert sub.drain() == []

    def test_two_subscribers_identical_envelope(self):
        bus = Bus()
        s1 = bus.subscribe("/metric/trend")
        s2 = bus.subscribe("/metric/trend")
        env = bus.publish("/metric/trend", TrendLabel.IMPROVING, stamp=2.0)
        assert s1.drain() == [env]
        assert s2.drain() == [env]

    def test_type_mismatch_rejected(self):
        bus = Bus()
        with pytest.raises(PayloadTypeMismatch):
            bus.publish("/goal", TrendLabel.NEUTRAL, stamp=0.0)

    def test_unknown_topic_rejected(self):
        bus = Bus()
        with pytest.raises(UnknownTopic):
            bus.publish("/nonsense", TrendLabel.NEUTRAL, stamp=0.0)
        with pytest.raises(UnknownTopic):
            bus.subscribe("/nonsense")

    def test_latched_topic_replays_to_new_subscriber(self):
        bus = Bus()
        goal = GoalPose(Pose2D(1, 1, 0), (4, 4), 1.0)
        env = bus.publish("/goal", goal, stamp=1.0)
        sub = bus.subscribe("/goal")
        assert sub.drain() == [env]

    def test_non_latched_topic_no_replay(self):
        bus = Bus()
        bus.publish("/metric/trend", TrendLabel.NEUTRAL, stamp=1.0)
        sub = bus.subscribe("/metric/trend")
        assert sub.drain() == []

    def test_fifo_order_and_gapless_seq(self):
        bus = Bus()
        sub = bus.subscribe("/metric/distance")
        for k in range(1, 6):
            bus.publish("/metric/distance", DistanceSample(float(k), float(k), DistanceBasis.PATH), stamp=float(k))
        seqs = [env.seq for env in sub.drain()]
        assert seqs == [1, 2, 3, 4, 5]

    def test_seq_keeps_increasing_for_late_subscriber(self):
        bus = Bus()
        for k in range(3):
            bus.publish("/metric/trend", TrendLabel.NEUTRAL, stamp=float(k))
        sub = bus.subscribe("/metric/trend")
        bus.publish("/metric/trend", TrendLabel.WORSENING, stamp=3.0)
        bus.publish("/metric/trend", TrendLabel.IMPROVING, stamp=4.0)
        seqs = [env.seq for env in sub.drain()]
        assert seqs == [4, 5]

    def test_deterministic_sequence(self):
        def run():
            bus = Bus()
            sub = bus.subscribe("/metric/distance")
            rng = np.random.default_rng(42)
            for _ in range(50):
                bus.publish(
                    "/metric/distance",
                    DistanceSample(float(rng.uniform(0, 10)), float(rng.uniform(0, 10)), DistanceBasis.PATH),
                    stamp=float(rng.uniform(0, 10)),
                )
            return sub.drain()

        assert run() == run()


class TestBridgeCodec:
    def test_round_trip_every_roster_payload(self):
        for topic, payload in sample_payloads().items():
            env = Envelope(topic, 9.25, 3, payload)
            decoded = bridge_decode(bridge_encode(env))
            assert decoded.topic == env.topic
            assert decoded.stamp == env.stamp
            assert decoded.seq == env.seq
            assert payload_equal(decoded.payload, env.payload)

    def test_frame_missing_topic_rejected(self):
        frame = json.dumps({"stamp": 1.0, "seq": 1, "data": {}})
        with pytest.raises(MalformedFrame):
            bridge_decode(frame)

    def test_frame_bad_json_rejected(self):
        with pytest.raises(MalformedFrame):
            bridge_decode("{not json")

    def test_unknown_topic_frame_rejected(self):
        frame = json.dumps({"topic": "/nope", "stamp": 1.0, "seq": 1, "data": {}})
        with pytest.raises(UnknownTopic):
            bridge_decode(frame)

    def test_command_frame_fields_verbatim(self):
        cmd = VelocityCommand(0.5, -0.25, CommandSource.HUMAN, 1.5)
        frame = bridge_encode(Envelope("/cmd_vel_human", 1.5, 7, cmd))
        data = json.loads(frame)["data"]
        assert data["linear"] == 0.5
        assert data["angular"] == -0.25
        assert data["source"] == "HUMAN"

    def test_golden_frames(self):
        golden = (FIXTURES / "bridge_frames.jsonl").read_text().splitlines()
        produced = [
            bridge_encode(Envelope(topic, 9.25, 3, payload))
            for topic, payload in sorted(sample_payloads().items())
        ]
        assert produced == golden


class TestRosterAudit:
    def test_every_flow_has_roster_topics(self):
        for flow, topics in FLOW_TOPICS.items():
            assert topics, flow
            for t in topics:
                assert t in TOPICS, (flow, t)

    def test_client_writable_subset(self):
        assert set(CLIENT_WRITABLE) <= set(TOPICS)
        assert set(CLIENT_WRITABLE) == {"/cmd_vel_human", "/goal"}

    def test_latched_set(self):
        latched = {name for name, spec in TOPICS.items() if spec.latched}
        assert latched == {"/map", "/goal", "/mode"}
