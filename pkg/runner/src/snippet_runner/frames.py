"""Length-prefixed JSON frames over binary streams.

A frame is a 4-byte big-endian payload length followed by that many bytes of
UTF-8 JSON holding a single object. Payloads are written in construction
order, never key-sorted: binding names must reach the peer in assignment
order, and identical executions already produce byte-identical frames.
"""

from __future__ import annotations

import json
import struct

# A real request is a few kilobytes of source text; a length beyond this is a
# desynchronized or hostile stream, not a frame.
MAX_FRAME_BYTES = 16 * 1024 * 1024


class FrameError(Exception):
    """The bytes on the stream do not decode to a frame."""


def read_frame(stream) -> dict | None:
    """Read one frame from a blocking binary stream; None on clean EOF."""
    header = stream.read(4)
    if not header:
        return None
    if len(header) < 4:
        raise FrameError("stream closed inside a frame header")
    (length,) = struct.unpack(">I", header)
    if length > MAX_FRAME_BYTES:
        raise FrameError(f"frame length {length} exceeds the {MAX_FRAME_BYTES}-byte cap")
    raw = _read_exact(stream, length)
    try:
        payload = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise FrameError(f"frame payload is not valid JSON: {e}") from e
    if not isinstance(payload, dict):
        raise FrameError(f"frame payload must be an object, got {type(payload).__name__}")
    return payload


def write_frame(stream, payload: dict) -> None:
    raw = json.dumps(payload).encode("utf-8")
    stream.write(struct.pack(">I", len(raw)) + raw)
    stream.flush()


def _read_exact(stream, n: int) -> bytes:
    buf = b""
    while len(buf) < n:
        chunk = stream.read(n - len(buf))
        if not chunk:
            raise FrameError("stream closed mid-frame")
        buf += chunk
    return buf
