"""External SMT solver backend over a long-lived subprocess.

Talks SMT-LIB2 text on stdin/stdout, one (reset) between queries, so a
single z3/cvc5 process serves a whole analysis.  A query that exceeds
its deadline kills the process (it is respawned lazily); any protocol
hiccup degrades to an unknown verdict rather than an exception.
"""

from __future__ import annotations

import os
import select
import shlex
import shutil
import subprocess
import time
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from ..sym import expr as E
from .linear import Unsupported
from .query import Verdict, validate_model
from .smtlib import encode, parse_model

_MARKER = "<<query-done>>"


def resolve_command(explicit: Optional[str]) -> Optional[List[str]]:
    """Pick the external solver command: explicit flag, then the
    MINIKERNEL_SOLVER environment variable, then z3/cvc5 on PATH."""
    spec = explicit or os.environ.get("MINIKERNEL_SOLVER")
    if spec:
        return shlex.split(spec)
    z3 = shutil.which("z3")
    if z3:
        return [z3, "-in"]
    cvc5 = shutil.which("cvc5")
    if cvc5:
        return [cvc5, "--incremental", "--produce-models", "--lang", "smt2"]
    return None


class ExternalSolver:
    def __init__(self, cmd: Sequence[str], timeout_s: float = 30.0) -> None:
        self.cmd = list(cmd)
        self.timeout_s = timeout_s
        self._proc: Optional[subprocess.Popen] = None
        self._buf = ""

    def _spawn(self) -> subprocess.Popen:
        if self._proc is None or self._proc.poll() is not None:
            self._proc = subprocess.Popen(
                self.cmd,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL,
                text=True,
                bufsize=1,
            )
            self._buf = ""
        return self._proc

    def close(self) -> None:
        if self._proc is not None and self._proc.poll() is None:
            try:
                self._proc.kill()
            except OSError:
                pass
        self._proc = None

    def _kill(self) -> None:
        self.close()

    def _read_until_marker(self, deadline: float) -> Optional[str]:
        proc = self._proc
        assert proc is not None and proc.stdout is not None
        fd = proc.stdout.fileno()
        while _MARKER not in self._buf:
            remain = deadline - time.monotonic()
            if remain <= 0:
                return None
            ready, _, _ = select.select([fd], [], [], min(remain, 0.25))
            if not ready:
                if proc.poll() is not None:
                    return None
                continue
            chunk = os.read(fd, 65536).decode("utf-8", "replace")
            if not chunk:
                return None
            self._buf += chunk
        head, _, rest = self._buf.partition(_MARKER)
        self._buf = rest
        return head

    def check(
        self,
        assertions: Sequence[E.Expr],
        bounds: Mapping[str, Tuple[Optional[int], Optional[int]]] | None = None,
        deadline: Optional[float] = None,
    ) -> Verdict:
        try:
            script, _names = encode(assertions, bounds)
        except Unsupported as u:
            return Verdict.unknown(f"unsupported: {u}")
        if deadline is None:
            deadline = time.monotonic() + self.timeout_s
        try:
            proc = self._spawn()
        except OSError as err:
            return Verdict.unknown(f"external solver failed to start: {err}")
        assert proc.stdin is not None
        try:
            proc.stdin.write("(reset)\n")
            proc.stdin.write(script)
            proc.stdin.write(f'(echo "{_MARKER}")\n')
            proc.stdin.flush()
        except (BrokenPipeError, OSError) as err:
            self._kill()
            return Verdict.unknown(f"external solver pipe error: {err}")
        text = self._read_until_marker(deadline)
        if text is None:
            self._kill()
            return Verdict.unknown("external solver timeout")
        status = None
        for line in text.splitlines():
            line = line.strip()
            if line in ("sat", "unsat", "unknown"):
                status = line
                break
        if status == "unsat":
            return Verdict.unsat()
        if status == "sat":
            try:
                model = parse_model(text)
            except ValueError as err:
                return Verdict.unknown(f"external solver model parse error: {err}")
            full = dict(model)
            for a in assertions:
                for name, sym in E.symbols_of(a).items():
                    if name not in full and not sym.width.is_float:
                        full[name] = 0
            if validate_model(assertions, full):
                return Verdict.sat(full)
            return Verdict.unknown("external solver model failed validation")
        if status == "unknown":
            return Verdict.unknown("external solver returned unknown")
        return Verdict.unknown("external solver protocol error")
