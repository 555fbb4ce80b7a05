"""Run the objective in a child process, one process per evaluation.

The child receives exactly one request line on stdin and must print exactly
one response line on stdout. Anything on stderr is kept (truncated) in the
response meta and never parsed.
"""

from __future__ import annotations

import shlex
import subprocess
from typing import Sequence

from .base import EvalRequest, EvalResponse

STDERR_EXCERPT = 2000
DEFAULT_TIMEOUT = 3600.0


def _excerpt(data: bytes, limit: int = STDERR_EXCERPT) -> str:
    return data[-limit:].decode("utf-8", errors="replace")


def eval_external(cmd: str | Sequence[str], request: EvalRequest,
                  timeout: float = DEFAULT_TIMEOUT) -> EvalResponse:
    argv = shlex.split(cmd) if isinstance(cmd, str) else list(cmd)
    try:
        proc = subprocess.Popen(argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                                stderr=subprocess.PIPE)
    except (OSError, ValueError) as exc:
        return EvalResponse.failed("spawn", detail=str(exc))

    payload = (request.to_json() + "\n").encode("utf-8")
    try:
        # communicate() drains stdout/stderr while waiting, so a chatty child
        # cannot fill a pipe and deadlock us
        out, err = proc.communicate(payload, timeout=timeout)
    except subprocess.TimeoutExpired:
        proc.kill()
        _, err = proc.communicate()
        return EvalResponse.failed("timeout", timeout=timeout, stderr=_excerpt(err or b""))

    stderr = _excerpt(err)
    if proc.returncode != 0:
        return EvalResponse.failed("exit", returncode=proc.returncode, stderr=stderr)
    line = out.split(b"\n", 1)[0]
    try:
        resp = EvalResponse.from_json(line.decode("utf-8"))
    except (ValueError, UnicodeDecodeError) as exc:
        return EvalResponse.failed("protocol", detail=str(exc),
                                   output=line[:STDERR_EXCERPT].decode("utf-8", "replace"),
                                   stderr=stderr)
    if stderr:
        resp.meta.setdefault("stderr", stderr)
    return resp


class ExternalEvaluator:
    def __init__(self, cmd: str | Sequence[str], timeout: float = DEFAULT_TIMEOUT):
        self.cmd = cmd
        self.timeout = timeout

    def __call__(self, request: EvalRequest) -> EvalResponse:
        return eval_external(self.cmd, request, self.timeout)
