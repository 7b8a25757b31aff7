"""A shell session: one world driven by script text or typed commands.

The script language is the agent language's statement/expression subset;
the command set rides in as the environment, so one parser serves both.
Class constructors declared in a script become values that compile() and
create() accept by name or reference.
"""

from __future__ import annotations

import threading
import time
from typing import Optional

from ..abl.errors import AblRuntimeError, AblSyntaxError, ValidationError
from ..abl.interp import Fuel, Interp, Frame
from ..abl.parser import ClassDecl, parse_program
from ..world import World, WorldConfig, WorldError
from .commands import build_shell_env


class ShellError(Exception):
    pass


class Session:
    def __init__(self, world: Optional[World] = None,
                 config: Optional[WorldConfig] = None,
                 script_args: Optional[list] = None,
                 interactive: bool = False):
        self.world = world or World(config)
        self.interactive = interactive
        self.script_args = list(script_args or [])
        self.state: dict = {}  # `this` of the shell script
        self.classes: dict = {}  # name -> ClassDecl defined by scripts
        self._frame = Frame()
        self._pending_events: list = []
        self._event_handlers: dict = {}
        self._later_timers: list = []
        self.env = build_shell_env(self)
        self.world.subscribe(self._on_world_event)

    # -- event hooks (handlers run between passes via the world queue) --

    def on_event(self, name: str, handler):
        self._event_handlers.setdefault(name, []).append(handler)

    def _on_world_event(self, event: str, payload):
        handlers = self._event_handlers.get(event)
        if not handlers:
            return
        for handler in list(handlers):
            task = self._handler_task(handler, payload)
            if self.world._running:
                self.world._queue.put(task)
                self.world.wake()
            else:
                self._pending_events.append(task)

    def _handler_task(self, handler, payload):
        def run():
            self.call_function(handler, [payload])
        return run

    def pump(self):
        """Run queued event handlers (step-mode path)."""
        pending, self._pending_events = self._pending_events, []
        for task in pending:
            task()

    # -- evaluation --

    def _interp(self) -> Interp:
        return Interp(self.env, self.state, Fuel(steps=50_000_000))

    def call_function(self, fn, args: list):
        try:
            return self._interp().call_function(fn, list(args))
        except AblRuntimeError as e:
            self.world.emit("warn", {"msg": f"shell handler failed: {e}"})
            return None

    def eval_items(self, items: list):
        """Execute parsed program items; returns the last statement value."""
        result = None
        for item in items:
            if isinstance(item, ClassDecl):
                self.classes[item.name] = item
                self._frame.vars[item.name] = item
                continue
            interp = self._interp()
            from ..abl.nodes import ExprStmt
            if isinstance(item, ExprStmt):
                result = interp.eval_expr(item.expr, self._frame)
            else:
                interp.exec_stmt(item, self._frame)
                result = None
            self.pump()
        return result

    def run_text(self, text: str):
        return self.eval_items(parse_program(text))

    def run_script(self, path: str) -> int:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
        try:
            self.run_text(text)
        except (AblSyntaxError, ValidationError, AblRuntimeError,
                WorldError, ShellError) as e:
            print(f"error: {e}")
            return 1
        return 0

    def wait_done(self, timeout_s: float = 120.0) -> bool:
        """Script mode: wait for the world to go quiet."""
        deadline = time.monotonic() + timeout_s
        while time.monotonic() < deadline:
            if not self._later_timers_alive() and self.world.quiescent():
                return True
            time.sleep(0.02)
        return False

    def _later_timers_alive(self) -> bool:
        self._later_timers = [t for t in self._later_timers if t.is_alive()]
        return bool(self._later_timers)

    def add_later(self, timer: threading.Timer):
        self._later_timers.append(timer)

    # -- REPL --

    def repl(self, stdin=None, stdout=None):
        import sys
        stdin = stdin or sys.stdin
        stdout = stdout or sys.stdout
        buffer = ""
        prompt = "amr> "
        while True:
            stdout.write(prompt if not buffer else "...> ")
            stdout.flush()
            line = stdin.readline()
            if not line:
                break
            buffer += line
            if _open_brackets(buffer) > 0:
                continue
            text, buffer = buffer, ""
            if text.strip() in ("exit", "quit"):
                break
            if not text.strip():
                continue
            try:
                result = self.run_text(text)
                if result is not None:
                    from ..values import value_text
                    stdout.write(value_text(result) + "\n")
            except (AblSyntaxError, ValidationError, AblRuntimeError,
                    WorldError, ShellError) as e:
                stdout.write(f"error: {e}\n")
        self.world.emit("exit", {})


def _open_brackets(text: str) -> int:
    depth = 0
    in_string: Optional[str] = None
    escape = False
    for c in text:
        if in_string:
            if escape:
                escape = False
            elif c == "\\":
                escape = True
            elif c == in_string:
                in_string = None
            continue
        if c in "'\"":
            in_string = c
        elif c in "([{":
            depth += 1
        elif c in ")]}":
            depth -= 1
    return depth
