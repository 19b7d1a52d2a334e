"""Entry point: `python3 -m snippet_runner` serves frames on stdio."""

from __future__ import annotations

import sys

from .server import serve_frames


def main() -> int:
    stdin = sys.stdin.buffer
    stdout = sys.stdout.buffer
    # Anything printed outside an exec capture must not corrupt the frame
    # stream, so the text-level stdout is repointed at stderr for good.
    sys.stdout = sys.stderr
    serve_frames(stdin, stdout)
    return 0


if __name__ == "__main__":
    sys.exit(main())
