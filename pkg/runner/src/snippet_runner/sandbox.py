"""Execute snippets in a persistent namespace with a wall-clock budget.

The namespace follows a notebook-cell model: each block sees everything
earlier blocks defined, a failed block keeps the assignments it made before
raising, and only an explicit reset drops state. The code arriving here is
model-emitted and untrusted, so its builtins are a trimmed copy — no file or
terminal access, no interpreter escape hatches — and imports go through a
denylist that keeps network, process, and filesystem modules out. That is
deliberately shallow isolation: the engine on the other side of the pipe
owns the hard guarantees (kill on deadline, one process per session).
"""

from __future__ import annotations

import builtins
import contextlib
import io
import signal
from dataclasses import dataclass, field

from .serialize import serialize_bindings

DEFAULT_TIMEOUT_MS = 10_000

# Stripped from the snippet's builtins: file and terminal access plus the
# hatches that would let code rebuild them from scratch.
REMOVED_BUILTINS = frozenset(
    {
        "open",
        "input",
        "breakpoint",
        "help",
        "exit",
        "quit",
        "compile",
        "eval",
        "exec",
        "memoryview",
    }
)

# Import roots a snippet may not touch: network, processes, the filesystem,
# and this process's own plumbing.
BLOCKED_MODULES = frozenset(
    {
        "asyncio",
        "builtins",
        "concurrent",
        "ctypes",
        "fcntl",
        "ftplib",
        "gc",
        "http",
        "imaplib",
        "importlib",
        "io",
        "multiprocessing",
        "os",
        "pathlib",
        "poplib",
        "pty",
        "resource",
        "shutil",
        "signal",
        "smtplib",
        "socket",
        "socketserver",
        "ssl",
        "subprocess",
        "sys",
        "telnetlib",
        "tempfile",
        "threading",
        "urllib",
        "webbrowser",
        "xmlrpc",
    }
)


class SnippetTimeout(BaseException):
    """Raised inside a snippet when its wall-clock budget expires.

    Deliberately not an Exception subclass, so a snippet's blanket
    `except Exception` cannot swallow it.
    """


def _guarded_import(name, globals=None, locals=None, fromlist=(), level=0):
    root = name.partition(".")[0]
    if root in BLOCKED_MODULES:
        raise ImportError(f"import of {root!r} is blocked in the sandbox")
    return builtins.__import__(name, globals, locals, fromlist, level)


def restricted_builtins() -> dict:
    safe = {k: v for k, v in vars(builtins).items() if k not in REMOVED_BUILTINS}
    safe["__import__"] = _guarded_import
    return safe


@dataclass
class RunnerState:
    """The live namespace plus a count of blocks executed so far."""

    namespace: dict = field(default_factory=dict)
    executed_block_count: int = 0

    def __post_init__(self):
        self.namespace.setdefault("__builtins__", restricted_builtins())

    def reset(self) -> None:
        self.namespace = {"__builtins__": restricted_builtins()}
        self.executed_block_count = 0


def execute_block(
    state: RunnerState, source: str, timeout_ms: int = DEFAULT_TIMEOUT_MS
) -> dict:
    """Run one block; returns the response payload for an exec frame.

    The reported bindings are the whole visible namespace — the running
    status of everything defined so far, not just this block's names.
    """
    captured = io.StringIO()
    ok: bool = True
    error: str | None = None

    def _on_alarm(signum, frame):
        raise SnippetTimeout

    old_handler = signal.signal(signal.SIGALRM, _on_alarm)
    signal.setitimer(signal.ITIMER_REAL, max(timeout_ms, 1) / 1000.0)
    try:
        with contextlib.redirect_stdout(captured):
            exec(compile(source, "<snippet>", "exec"), state.namespace)
    except SnippetTimeout:
        ok, error = False, f"execution timed out after {timeout_ms} ms"
    except SyntaxError as e:
        ok, error = False, f"SyntaxError: {e.msg} (line {e.lineno})"
    except KeyboardInterrupt:
        raise
    except BaseException as e:  # includes SystemExit: snippets must not kill the server
        ok, error = False, f"{type(e).__name__}: {e}"
    finally:
        signal.setitimer(signal.ITIMER_REAL, 0.0)
        signal.signal(signal.SIGALRM, old_handler)
    state.executed_block_count += 1
    return {
        "ok": ok,
        "stdout": captured.getvalue(),
        "bindings": serialize_bindings(state.namespace),
        "error": error,
    }
