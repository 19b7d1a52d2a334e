"""The frame-serving loop on the runner side of the protocol.

Strictly serial: read one request, act, write one response. A malformed
frame gets an error response and the loop keeps going; a closed stdin ends
the process. The namespace persists across exec frames and is dropped only
on an explicit reset frame.
"""

from __future__ import annotations

from .frames import FrameError, read_frame, write_frame
from .sandbox import DEFAULT_TIMEOUT_MS, RunnerState, execute_block


def serve_frames(stdin, stdout) -> None:
    """Serve requests until stdin closes or a shutdown frame arrives."""
    state = RunnerState()
    while True:
        try:
            request = read_frame(stdin)
        except FrameError as e:
            write_frame(stdout, _error_response(f"malformed frame: {e}"))
            continue
        if request is None:
            return
        op = request.get("op")
        if op == "exec":
            write_frame(stdout, _handle_exec(state, request))
        elif op == "reset":
            state.reset()
            write_frame(stdout, _ok_response())
        elif op == "shutdown":
            write_frame(stdout, _ok_response())
            return
        else:
            write_frame(stdout, _error_response(f"unknown op {op!r}"))


def _handle_exec(state: RunnerState, request: dict) -> dict:
    source = request.get("source")
    if not isinstance(source, str):
        return _error_response("exec frame needs a string 'source'")
    timeout_ms = request.get("timeout_ms", DEFAULT_TIMEOUT_MS)
    if isinstance(timeout_ms, bool) or not isinstance(timeout_ms, int) or timeout_ms < 1:
        return _error_response(
            f"exec frame needs a positive integer 'timeout_ms', got {timeout_ms!r}"
        )
    return execute_block(state, source, timeout_ms)


def _ok_response() -> dict:
    return {"ok": True, "stdout": "", "bindings": {}, "error": None}


def _error_response(message: str) -> dict:
    return {"ok": False, "stdout": "", "bindings": {}, "error": message}
