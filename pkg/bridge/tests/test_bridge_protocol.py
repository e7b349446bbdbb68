import pytest

from vlmbridge.errors import ProtocolViolation
from vlmbridge.protocol import BridgeMessage, StreamValidator, decode, encode


class TestMessage:
    def test_round_trip(self):
        msg = BridgeMessage("answers", 3, {"answers": [{"question": "q", "answer": "a"}]})
        assert decode(encode(msg)) == msg

    def test_encode_is_one_deterministic_line(self):
        msg = BridgeMessage("hello", 0, {"b": 1, "a": 2})
        line = encode(msg)
        assert "\n" not in line
        assert line == '{"payload":{"a":2,"b":1},"step":0,"type":"hello"}'

    def test_unknown_type_rejected(self):
        with pytest.raises(ProtocolViolation):
            BridgeMessage("greetings", 0, {})

    def test_negative_step_rejected(self):
        with pytest.raises(ProtocolViolation):
            BridgeMessage("hello", -1, {})

    @pytest.mark.parametrize(
        "line",
        [
            "not json at all",
            "[1,2,3]",
            '{"step":0,"payload":{}}',
            '{"type":"hello","payload":{}}',
            '{"type":"hello","step":0,"payload":{},"extra":1}',
            '{"type":"hello","step":"0","payload":{}}',
            '{"type":"hello","step":0,"payload":[]}',
        ],
    )
    def test_malformed_lines_rejected(self, line):
        with pytest.raises(ProtocolViolation):
            decode(line)


class TestStreamValidator:
    def test_hello_must_come_first(self):
        v = StreamValidator("test")
        with pytest.raises(ProtocolViolation):
            v.check(BridgeMessage("step_begin", 1, {}))

    def test_duplicate_hello_rejected(self):
        v = StreamValidator("test")
        v.check(BridgeMessage("hello", 0, {}))
        with pytest.raises(ProtocolViolation):
            v.check(BridgeMessage("hello", 0, {}))

    def test_steps_must_not_go_backwards(self):
        v = StreamValidator("test")
        v.check(BridgeMessage("hello", 0, {}))
        v.check(BridgeMessage("negatives", 2, {"negative_prompt": ""}))
        with pytest.raises(ProtocolViolation):
            v.check(BridgeMessage("negatives", 1, {"negative_prompt": ""}))

    def test_equal_steps_allowed(self):
        v = StreamValidator("test")
        v.check(BridgeMessage("hello", 0, {}))
        v.check(BridgeMessage("step_begin", 1, {}))
        v.check(BridgeMessage("preview_ready", 1, {}))

    def test_nothing_after_done(self):
        v = StreamValidator("test")
        v.check(BridgeMessage("hello", 0, {}))
        v.check(BridgeMessage("done", 0, {}))
        assert v.finished
        with pytest.raises(ProtocolViolation):
            v.check(BridgeMessage("negatives", 1, {"negative_prompt": ""}))

    def test_error_also_terminates(self):
        v = StreamValidator("test")
        v.check(BridgeMessage("hello", 0, {}))
        v.check(BridgeMessage("error", 0, {"message": "boom"}))
        assert v.finished
