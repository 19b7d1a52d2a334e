"""Bridge from code actions to an external sandbox runner.

The runner is a child process speaking length-prefixed JSON frames over its
stdin/stdout: a 4-byte big-endian payload length, then UTF-8 JSON. Requests
are {"op": "exec", "session": str, "source": str, "timeout_ms": int} (plus
"reset" and "shutdown" ops); responses are {"ok": bool, "stdout": str,
"bindings": {...}, "error": str | null}. One runner process per session,
spawned lazily; the engine kills it on timeout and respawns on the next call.

The mock executor serves canned results keyed by sha256 of the source, so
the whole primary suite runs without any live interpreter.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import selectors
import struct
import subprocess
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

from .errors import ConfigError, ProtocolError, SandboxError, ValidationError

log = logging.getLogger(__name__)

EXEC_FEEDBACK_PREFIX = "The running status of existing variables:"

DEFAULT_TIMEOUT = 10.0
TIMEOUT_GRACE = 0.5
# Internal read deadline: below TIMEOUT_GRACE so kill/teardown overhead still
# lands the total wall clock within timeout + TIMEOUT_GRACE.
_READ_GRACE = 0.35

_FENCE_RE = re.compile(r"```[^\n]*\n(.*?)```", re.DOTALL)


@dataclass(frozen=True)
class CodeBlock:
    source: str
    block_index: int

    def __post_init__(self):
        if not self.source:
            raise ValidationError("empty code block")


@dataclass
class ExecutionResult:
    ok: bool
    stdout: str = ""
    bindings: dict = field(default_factory=dict)
    error_message: str | None = None
    duration: float = 0.0

    def __post_init__(self):
        if self.ok == (self.error_message is not None):
            raise ValidationError("exactly one of ok/error_message must hold")


class SandboxSession(Protocol):
    session_id: str

    def run(self, block: CodeBlock, timeout: float) -> ExecutionResult: ...

    def close(self) -> None: ...


class Executor(Protocol):
    def open_session(self, session_id: str) -> SandboxSession: ...


def extract_code(text: str) -> list[CodeBlock]:
    """All triple-backtick fenced blocks, any info string, in order."""
    blocks = []
    for m in _FENCE_RE.finditer(text):
        source = m.group(1)
        if source.strip():
            blocks.append(CodeBlock(source=source, block_index=len(blocks)))
    return blocks


def execute(session: SandboxSession, block: CodeBlock, timeout: float) -> ExecutionResult:
    """Run one block in the session's persistent namespace."""
    return session.run(block, timeout)


def source_hash(source: str) -> str:
    return hashlib.sha256(source.encode("utf-8")).hexdigest()


def _render_value(value) -> str:
    return repr(value) if isinstance(value, str) else str(value)


def format_feedback(result: ExecutionResult) -> str:
    """The text injected back into the reasoning state after a code step."""
    if not result.ok:
        return f"Code execution failed: {result.error_message}"
    if not result.bindings:
        base = "The code ran successfully but no variables were defined."
    else:
        rendered = "; ".join(
            f"{name} = {_render_value(value)}" for name, value in result.bindings.items()
        )
        base = f"{EXEC_FEEDBACK_PREFIX} {rendered}"
    if result.stdout.strip():
        base = f"{base}\nProgram output:\n{result.stdout.rstrip()}"
    return base


# ------------------------------------------------------------- mock executor


@dataclass
class MockSession:
    session_id: str
    results: dict

    def run(self, block: CodeBlock, timeout: float) -> ExecutionResult:
        digest = source_hash(block.source)
        entry = self.results.get(digest, self.results.get("default"))
        if entry is None:
            raise SandboxError(
                f"mock executor has no canned result for source hash {digest[:12]}..."
            )
        return ExecutionResult(
            ok=bool(entry.get("ok", True)),
            stdout=entry.get("stdout", ""),
            bindings=dict(entry.get("bindings", {})),
            error_message=entry.get("error"),
        )

    def close(self) -> None:
        pass


@dataclass
class MockExecutor:
    """Canned execution results keyed by sha256(source) hex digest."""

    results: dict

    @classmethod
    def from_file(cls, path: str | Path) -> "MockExecutor":
        try:
            data = json.loads(Path(path).read_text())
        except OSError as e:
            raise ConfigError(f"cannot read executor script {path}: {e}") from e
        except json.JSONDecodeError as e:
            raise ConfigError(f"executor script {path} is not valid JSON: {e}") from e
        if not isinstance(data, dict):
            raise ConfigError(f"executor script {path} must hold an object")
        return cls(results=data)

    def open_session(self, session_id: str) -> MockSession:
        return MockSession(session_id=session_id, results=self.results)


# ------------------------------------------------------------ frame protocol


def write_frame(stream, payload: dict) -> None:
    raw = json.dumps(payload, sort_keys=True).encode("utf-8")
    stream.write(struct.pack(">I", len(raw)) + raw)
    stream.flush()


def read_frame_blocking(stream) -> dict:
    """Read one frame from a blocking stream (used by tests and the runner)."""
    header = stream.read(4)
    if len(header) < 4:
        raise SandboxError("stream closed while reading frame header")
    (length,) = struct.unpack(">I", header)
    raw = stream.read(length)
    if len(raw) < length:
        raise SandboxError("stream closed mid-frame")
    try:
        return json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise ProtocolError(f"undecodable frame: {e}") from e


class _DeadlineReader:
    """Reads exact byte counts from a pipe with a wall-clock deadline."""

    def __init__(self, pipe):
        self._pipe = pipe
        self._sel = selectors.DefaultSelector()
        self._sel.register(pipe, selectors.EVENT_READ)
        self._buf = b""

    def read_exact(self, n: int, deadline: float) -> bytes:
        while len(self._buf) < n:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise TimeoutError
            if not self._sel.select(timeout=remaining):
                continue
            chunk = os.read(self._pipe.fileno(), 65536)
            if not chunk:
                raise SandboxError("runner closed its stdout")
            self._buf += chunk
        out, self._buf = self._buf[:n], self._buf[n:]
        return out

    def close(self):
        self._sel.close()


@dataclass
class ProcessSession:
    """One runner child process; respawned with a fresh namespace on crash."""

    session_id: str
    cmd: list[str]
    _proc: subprocess.Popen | None = field(default=None, repr=False)
    _reader: _DeadlineReader | None = field(default=None, repr=False)
    epoch: int = 0

    def _ensure_process(self) -> None:
        if self._proc is not None and self._proc.poll() is None:
            return
        if self._proc is not None:
            log.warning(
                "runner for session %s died; respawning with a fresh namespace",
                self.session_id,
            )
            self._teardown()
            self.epoch += 1
        self._proc = subprocess.Popen(
            self.cmd,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            stderr=subprocess.DEVNULL,
        )
        self._reader = _DeadlineReader(self._proc.stdout)

    def _teardown(self) -> None:
        if self._proc is None:
            return
        try:
            self._proc.kill()
            self._proc.wait(timeout=5)
        except Exception:
            pass
        if self._reader is not None:
            self._reader.close()
        self._proc = None
        self._reader = None

    def _request(self, payload: dict, deadline: float) -> dict:
        try:
            write_frame(self._proc.stdin, payload)
            header = self._reader.read_exact(4, deadline)
            (length,) = struct.unpack(">I", header)
            raw = self._reader.read_exact(length, deadline)
        except TimeoutError:
            raise
        except (OSError, ValueError, SandboxError) as e:
            self._teardown()
            raise SandboxError(
                f"runner for session {self.session_id} failed mid-request: {e}"
            ) from e
        try:
            return json.loads(raw.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            self._teardown()
            raise ProtocolError(f"undecodable runner response: {e}") from e

    def run(self, block: CodeBlock, timeout: float) -> ExecutionResult:
        self._ensure_process()
        started = time.monotonic()
        deadline = started + timeout + _READ_GRACE
        payload = {
            "op": "exec",
            "session": self.session_id,
            "source": block.source,
            "timeout_ms": int(timeout * 1000),
        }
        try:
            resp = self._request(payload, deadline)
        except TimeoutError:
            self._teardown()
            return ExecutionResult(
                ok=False,
                error_message=f"execution timed out after {timeout}s",
                duration=time.monotonic() - started,
            )
        try:
            return ExecutionResult(
                ok=bool(resp["ok"]),
                stdout=resp.get("stdout", ""),
                bindings=dict(resp.get("bindings") or {}),
                error_message=resp.get("error"),
                duration=time.monotonic() - started,
            )
        except (KeyError, TypeError, ValidationError) as e:
            self._teardown()
            raise ProtocolError(f"malformed runner response: {e}") from e

    def reset(self, timeout: float = 5.0) -> None:
        self._ensure_process()
        self._request({"op": "reset", "session": self.session_id},
                      time.monotonic() + timeout)

    def close(self) -> None:
        if self._proc is not None and self._proc.poll() is None:
            try:
                write_frame(self._proc.stdin, {"op": "shutdown"})
                self._proc.wait(timeout=1)
            except Exception:
                pass
        self._teardown()


@dataclass
class ProcessExecutor:
    """Spawns one runner subprocess per session, lazily."""

    cmd: list[str]

    def open_session(self, session_id: str) -> ProcessSession:
        return ProcessSession(session_id=session_id, cmd=list(self.cmd))
