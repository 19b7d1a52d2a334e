from __future__ import annotations

import io
import struct

import pytest

from snippet_runner.frames import read_frame, write_frame
from snippet_runner.server import serve_frames


def run_server(items) -> list[dict]:
    """Feed frames (dicts) or raw byte chunks to serve_frames; collect responses."""
    stdin = io.BytesIO()
    for item in items:
        if isinstance(item, (bytes, bytearray)):
            stdin.write(item)
        else:
            write_frame(stdin, item)
    stdin.seek(0)
    stdout = io.BytesIO()
    serve_frames(stdin, stdout)
    stdout.seek(0)
    responses = []
    while (frame := read_frame(stdout)) is not None:
        responses.append(frame)
    return responses


def exec_frame(source: str, timeout_ms=5000, **extra) -> dict:
    return {"op": "exec", "session": "s", "source": source, "timeout_ms": timeout_ms, **extra}


class TestExec:
    def test_namespace_persists_across_frames(self):
        first, second = run_server([exec_frame("a = 1"), exec_frame("b = a + 1")])
        assert first["ok"] is True
        assert second["ok"] is True
        assert second["bindings"] == {"a": 1, "b": 2}

    def test_stdout_field_carries_prints(self):
        (resp,) = run_server([exec_frame("print('hi')")])
        assert resp["stdout"] == "hi\n"

    def test_missing_source_rejected(self):
        (resp,) = run_server([{"op": "exec", "timeout_ms": 100}])
        assert resp["ok"] is False
        assert resp["error"] == "exec frame needs a string 'source'"

    @pytest.mark.parametrize("bad", ["soon", True, 0, -5, 1.5, None])
    def test_bad_timeout_rejected(self, bad):
        (resp,) = run_server([{"op": "exec", "source": "x = 1", "timeout_ms": bad}])
        assert resp["ok"] is False
        assert "timeout_ms" in resp["error"]

    def test_timeout_defaults_when_absent(self):
        (resp,) = run_server([{"op": "exec", "source": "x = 1"}])
        assert resp["ok"] is True
        assert resp["bindings"] == {"x": 1}

    def test_session_field_not_required(self):
        (resp,) = run_server([{"op": "exec", "source": "x = 1", "timeout_ms": 1000}])
        assert resp["ok"] is True


class TestProtocolResilience:
    def test_malformed_frame_then_good_frame(self):
        garbage = struct.pack(">I", 9) + b"not json!"
        first, second = run_server([garbage, exec_frame("x = 1")])
        assert first["ok"] is False
        assert "malformed frame" in first["error"]
        assert second["ok"] is True
        assert second["bindings"] == {"x": 1}

    def test_non_object_frame_rejected_then_served(self):
        import json

        raw = json.dumps([1, 2]).encode("utf-8")
        garbage = struct.pack(">I", len(raw)) + raw
        first, second = run_server([garbage, exec_frame("x = 1")])
        assert first["ok"] is False
        assert "must be an object" in first["error"]
        assert second["ok"] is True

    def test_unknown_op_rejected_then_served(self):
        first, second = run_server([{"op": "fly"}, exec_frame("x = 1")])
        assert first["ok"] is False
        assert first["error"] == "unknown op 'fly'"
        assert second["ok"] is True

    def test_eof_without_shutdown_is_clean(self):
        responses = run_server([exec_frame("x = 1")])
        assert len(responses) == 1


class TestControlOps:
    def test_reset_drops_namespace(self):
        first, reset, second = run_server(
            [exec_frame("a = 1"), {"op": "reset", "session": "s"}, exec_frame("b = a")]
        )
        assert first["ok"] is True
        assert reset == {"ok": True, "stdout": "", "bindings": {}, "error": None}
        assert second["ok"] is False
        assert second["error"].startswith("NameError")

    def test_shutdown_stops_the_loop(self):
        responses = run_server(
            [exec_frame("x = 1"), {"op": "shutdown"}, exec_frame("y = 2")]
        )
        assert len(responses) == 2
        assert responses[1]["ok"] is True
