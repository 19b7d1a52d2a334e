"""Stdio sandbox runner: executes code blocks in a persistent namespace.

The process speaks length-prefixed JSON frames over stdin/stdout — a 4-byte
big-endian payload length, then UTF-8 JSON. Requests are
{"op": "exec", "session": str, "source": str, "timeout_ms": int} plus
"reset" and "shutdown" ops; every response is
{"ok": bool, "stdout": str, "bindings": {...}, "error": str | null}.

Variables defined by one exec frame are visible to the next; the namespace
is dropped only on an explicit reset. Launch with `python3 -m snippet_runner`
(or the `snippet-runner` console script) — one process per session.
"""

from .frames import FrameError, read_frame, write_frame
from .sandbox import RunnerState, execute_block, restricted_builtins
from .serialize import serialize_bindings, serialize_value
from .server import serve_frames

__all__ = [
    "FrameError",
    "RunnerState",
    "execute_block",
    "read_frame",
    "restricted_builtins",
    "serialize_bindings",
    "serialize_value",
    "serve_frames",
    "write_frame",
]
