"""Cooperative agent scheduler: process containers and the pass loop.

Every pass visits each live process exactly once and performs at most one
selection, chosen by a fixed guard cascade: (0) internal block step,
(1) resource violation, (2) one signal if below HIGH priority, (3) pending
transition, (4) one agent scheduling-block element, (5) one activity run
with its follow-on transition.  Signal handling raises priority so a
flooded agent still advances; finishing an activity lowers it again.

All selections across all virtual nodes of a world are serialized in one
execution context; that is what makes test-then-take on tuple spaces safe.
"""

from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

from .abl.interp import BlockReason, EvalOutcome, Fuel, evaluate_function
from .abl.nodes import Dynamic, Static
from .aios.blocks import BlockEntry, DONE
from .values import value_text

LOW, NORM, HIGH = 0, 1, 2

DEFAULT_SLICE_MS = 200.0
DEFAULT_CPU_LIMIT_MS = 5000.0
DEFAULT_FUEL_STEPS = 2_000_000


@dataclass
class Timer:
    tmo_ms: float
    sig: str
    arg: object
    repeat: bool
    deadline: float


@dataclass
class Resources:
    slice_ms: float = DEFAULT_SLICE_MS
    cpu_used_ms: float = 0.0
    cpu_limit_ms: float = DEFAULT_CPU_LIMIT_MS
    lifetime_deadline: Optional[float] = None
    ts_ops_used: int = 0
    ts_ops_limit: Optional[int] = None
    agents_created: int = 0
    agents_limit: Optional[int] = None
    code_limit: int = 50 * 1024

    def violation(self, now: float) -> Optional[str]:
        if self.cpu_used_ms >= self.cpu_limit_ms:
            return "cpu"
        if self.lifetime_deadline is not None and now >= self.lifetime_deadline:
            return "lifetime"
        if self.ts_ops_limit is not None and self.ts_ops_used > self.ts_ops_limit:
            return "ts"
        return None


class CallbackBlock(BlockEntry):
    """Transient internal step: run a stored wait callback with its result."""

    kind = "cb"

    def __init__(self, fn, args):
        self.fn = fn
        self.args = args

    def step(self, run) -> str:
        run(self.fn, self.args)
        return DONE


class AgentProcess:
    def __init__(self, pid: str, class_name: str, level: int, node,
                 activities: dict, transitions: dict, handlers: dict,
                 body: dict, next_activity: Optional[str],
                 parent: Optional[str] = None):
        self.id = pid
        self.class_name = class_name
        self.level = level
        self.node = node
        self.activities = dict(activities)
        self.transitions = dict(transitions)
        self.handlers = dict(handlers)
        self.body = body
        self.next: Optional[str] = next_activity
        self.parent = parent

        self.priority = NORM
        self.blocked = False
        self.suspended = False
        self.dead = False
        self.kill = False
        self.transition_pending = False
        self.move_request = None
        self.eol_raised = False

        self.signals: deque = deque()
        self.schedule: deque = deque()  # agent-level blocks (B/L/I)
        self.block: deque = deque()     # internal micro steps
        self.timers: dict = {}
        self.resources = Resources()
        self.env: dict = {}
        self.waiter = None              # active tuple-space waiter
        self.wait_callback = None
        self.wake_deadline: Optional[float] = None
        self.last_move_dir: Optional[str] = None
        self.trace: list = []           # activity names, for inspection
        self.created_ms: float = 0.0

    # -- state helpers used by builtins and the world --

    def flags(self) -> dict:
        return {"blocked": self.blocked, "suspended": self.suspended,
                "dead": self.dead, "kill": self.kill}

    def suspend_sleep(self, deadline: Optional[float]):
        self.suspended = True
        self.wake_deadline = deadline

    def suspend_tuple_wait(self, waiter, callback):
        self.suspended = True
        self.waiter = waiter
        self.wait_callback = callback
        self.wake_deadline = None  # waiter deadlines live in the store

    def deliver_wait_result(self, callback, result):
        """Called by the store when a waited-for tuple arrives or times out."""
        self.waiter = None
        self.suspended = False
        if callback is not None:
            self.block.append(CallbackBlock(callback, [result]))

    def do_wakeup(self):
        if self.waiter is not None:
            w = self.waiter
            if self.node.store.cancel_waiter(w):
                self.deliver_wait_result(self.wait_callback, None)
            self.waiter = None
        self.suspended = False
        self.wake_deadline = None

    def mark_kill(self):
        self.kill = True

    def enqueue_signal(self, sig: str, arg, sender: str):
        self.signals.append((sig, arg, sender))


@dataclass
class PassAction:
    node: str
    process: str
    action: str
    detail: str = ""
    elapsed_ms: float = 0.0

    def to_value(self) -> dict:
        return {"node": self.node, "agent": self.process,
                "action": self.action, "detail": self.detail,
                "ms": round(self.elapsed_ms, 3)}


@dataclass
class PassReport:
    seq: int
    time: float
    actions: list = field(default_factory=list)

    def to_value(self) -> dict:
        return {"seq": float(self.seq), "time": self.time,
                "actions": [a.to_value() for a in self.actions]}


class Scheduler:
    """Drives one world; owns pass numbering and selection bookkeeping."""

    def __init__(self, world):
        self.world = world
        self.seq = 0

    # -- fueled evaluation helpers --

    def _fuel(self, proc: AgentProcess) -> Fuel:
        return Fuel(steps=DEFAULT_FUEL_STEPS, slice_ms=proc.resources.slice_ms)

    def _charge(self, proc: AgentProcess, t0: float) -> float:
        elapsed = (time.perf_counter() - t0) * 1000.0
        proc.resources.cpu_used_ms += elapsed
        return elapsed

    def evaluate(self, proc: AgentProcess, fn, args) -> EvalOutcome:
        return evaluate_function(fn, proc.body, args, proc.env, self._fuel(proc))

    # -- the pass --

    def pass_once(self, now: Optional[float] = None) -> PassReport:
        world = self.world
        now = world.now() if now is None else now
        world.service_deadlines(now)
        report = PassReport(self.seq, now)
        self.seq += 1
        for node in world.nodes():
            for proc in list(node.processes.values()):
                action = self.select_one(node, proc, now)
                if action is not None:
                    report.actions.append(action)
                if proc.dead:
                    world.reap(proc)
        world.emit("pass", report.to_value())
        return report

    def select_one(self, node, proc: AgentProcess, now: float) -> Optional[PassAction]:
        if proc.dead or proc.blocked:
            return None
        if proc.suspended and not proc.block and not proc.signals:
            return None
        if (proc.next is None and not proc.signals and not proc.schedule
                and not proc.block and not proc.transition_pending):
            return None

        t0 = time.perf_counter()
        # 0: internal block micro-step
        if not proc.blocked and proc.block:
            detail = self._run_block_entry(proc, proc.block)
            return PassAction(node.id, proc.id, "block", detail,
                              self._charge(proc, t0))
        # 1: resource violation -> EOL
        violation = proc.resources.violation(now)
        if violation is not None:
            detail = self._raise_eol(proc, violation, now)
            return PassAction(node.id, proc.id, "eol", detail,
                              self._charge(proc, t0))
        # 2: one signal, below HIGH priority
        if proc.priority < HIGH and proc.signals:
            sig, arg, sender = proc.signals.popleft()
            detail = self.dispatch_signal(proc, sig, arg, sender)
            return PassAction(node.id, proc.id, "signal", detail,
                              self._charge(proc, t0))
        # 3: pending transition
        if not proc.suspended and proc.transition_pending:
            proc.transition_pending = False
            target = self.compute_transition(proc)
            return PassAction(node.id, proc.id, "transition",
                              value_text(target), self._charge(proc, t0))
        # 4: one agent scheduling-block element
        if not proc.suspended and proc.schedule:
            detail = self._run_block_entry(proc, proc.schedule)
            return PassAction(node.id, proc.id, "schedule", detail,
                              self._charge(proc, t0))
        # 5: one activity, then its transition
        if not proc.suspended and proc.next is not None:
            name = proc.next
            self.run_activity(proc, name)
            proc.priority = max(LOW, proc.priority - 1)
            return PassAction(node.id, proc.id, "activity", name,
                              self._charge(proc, t0))
        # nothing to prioritize: the temporary signal boost decays so a
        # suspended agent can keep receiving signals
        if proc.priority > LOW:
            proc.priority -= 1
        return None

    # -- selection bodies --

    def _run_block_entry(self, proc: AgentProcess, queue: deque) -> str:
        entry = queue[0]
        state = {"outcome": None}

        def run(fn, args):
            outcome = self.evaluate(proc, fn, args)
            state["outcome"] = outcome
            if outcome.kind == "returned":
                return outcome.value
            return None

        try:
            status = entry.step(run)
        except Exception as e:  # malformed block content
            self._fault(proc, f"scheduling block failed: {e}")
            return "fault"
        outcome = state["outcome"]
        if outcome is not None and outcome.kind == "error":
            self._fault(proc, str(outcome.error))
            return "fault"
        if status == DONE:
            queue.popleft()
        if outcome is not None and outcome.kind == "blocked":
            self._apply_block_reason(proc, outcome.reason)
        if proc.kill:
            self._bury(proc)
        return f"{entry.kind}"

    def _raise_eol(self, proc: AgentProcess, violation: str, now: float) -> str:
        handler = proc.handlers.get("EOL")
        if handler is not None and not proc.eol_raised:
            proc.eol_raised = True
            self.evaluate(proc, handler, [violation, proc.id])
            if proc.kill:
                self._bury(proc)
                return f"{violation}: killed by handler"
            return f"{violation}: handler ran"
        self._bury(proc)
        return f"{violation}: killed"

    def dispatch_signal(self, proc: AgentProcess, sig: str, arg, sender: str) -> str:
        handler = proc.handlers.get(sig)
        if handler is None:
            self.world.count("signals_discarded")
            return f"{sig}: no handler"
        proc.priority = HIGH
        outcome = self.evaluate(proc, handler, [arg, sender])
        if outcome.kind == "error":
            self._fault(proc, f"handler '{sig}': {outcome.error}")
            return f"{sig}: fault"
        if outcome.kind == "schedule":
            self.world.emit("warn", {"agent": proc.id,
                                     "msg": f"handler '{sig}' exceeded slice"})
        if proc.kill:
            self._bury(proc)
            return f"{sig}: killed"
        if proc.next is None and not proc.transition_pending:
            # a null-transition-blocked agent gets a re-evaluation chance
            if proc.trace and proc.trace[-1] in proc.transitions:
                proc.transition_pending = True
        return sig

    def run_activity(self, proc: AgentProcess, name: str):
        fn = proc.activities.get(name)
        proc.trace.append(name)
        if len(proc.trace) > 512:
            del proc.trace[:256]
        if fn is None:
            self._fault(proc, f"activity '{name}' does not exist")
            return
        outcome = self.evaluate(proc, fn, [])
        if proc.kill:
            self._bury(proc)
            return
        if proc.move_request is not None:
            self.compute_transition(proc, from_activity=name)
            request, proc.move_request = proc.move_request, None
            self.world.migrate(proc, request)
            return
        if outcome.kind == "blocked":
            self._apply_block_reason(proc, outcome.reason)
            # static targets resolve now (they cannot depend on state);
            # dynamic rules wait for the wake-up so they see fresh state
            rule = proc.transitions.get(name)
            if isinstance(rule, Static) and rule.target in proc.activities:
                proc.next = rule.target
                proc.transition_pending = False
            else:
                proc.transition_pending = True
            return
        if outcome.kind == "schedule":
            proc.transition_pending = True
            if "SCHEDULE" in proc.handlers:
                proc.enqueue_signal("SCHEDULE", name, proc.id)
            self.world.emit("schedule-exceeded", {"agent": proc.id, "activity": name})
            return
        if outcome.kind == "error":
            self._fault(proc, f"activity '{name}': {outcome.error}")
            return
        self.compute_transition(proc, from_activity=name)

    def compute_transition(self, proc: AgentProcess,
                           from_activity: Optional[str] = None) -> Optional[str]:
        name = from_activity
        if name is None:
            name = proc.trace[-1] if proc.trace else proc.next
        rule = proc.transitions.get(name)
        if rule is None:
            proc.next = None
            return None
        if isinstance(rule, Static):
            target = rule.target
        elif isinstance(rule, Dynamic):
            args = []
            if rule.fn.params:
                args = [rule.bound_arg if rule.has_bound_arg else None]
            outcome = self.evaluate(proc, rule.fn, args)
            if outcome.kind == "error":
                self._fault(proc, f"transition '{name}': {outcome.error}")
                return None
            if outcome.kind != "returned":
                self._fault(proc, f"transition '{name}' did not return")
                return None
            target = outcome.value
        else:
            target = None
        if target is None:
            proc.next = None
            return None
        if not isinstance(target, str) or target not in proc.activities:
            self.world.emit("warn", {"agent": proc.id,
                                     "msg": f"transition '{name}' -> unknown "
                                            f"activity {value_text(target)}"})
            proc.next = None
            return None
        proc.next = target
        return target

    # -- faults, suspension, burial --

    def _apply_block_reason(self, proc: AgentProcess, reason: BlockReason):
        if reason.kind == "sleep":
            deadline = None
            if reason.timeout_ms is not None:
                deadline = self.world.now() + reason.timeout_ms
            proc.suspend_sleep(deadline)
        elif reason.kind == "tuple":
            pass  # the builtin registered the waiter already
        else:
            self._fault(proc, f"unknown block reason {reason.kind}")

    def _fault(self, proc: AgentProcess, msg: str):
        self.world.emit("agent-fault", {"agent": proc.id, "msg": msg})
        self._bury(proc)

    def _bury(self, proc: AgentProcess):
        proc.dead = True
        proc.kill = True
        proc.suspended = False
        if proc.waiter is not None:
            proc.node.store.cancel_waiter(proc.waiter)
            proc.waiter = None


def negotiate_enforce(world, proc: AgentProcess, param: str, value,
                      cap_text) -> bool:
    """Capability-gated resource/level changes; system level is barred."""
    from . import capability as cap_mod

    required = {
        "SCHEDULE": cap_mod.RIGHTS["NEG_SCHED"],
        "CPU": cap_mod.RIGHTS["NEG_CPU"],
        "TS": cap_mod.RIGHTS["NEG_RES"],
        "AGENT": cap_mod.RIGHTS["NEG_RES"],
        "LIFETIME": cap_mod.RIGHTS["NEG_LIFE"],
        "LIFE": cap_mod.RIGHTS["NEG_LIFE"],
        "LEVEL": cap_mod.RIGHTS["NEG_LEVEL"],
    }.get(param)
    if required is None:
        return False
    try:
        cap = cap_mod.cap_of_string(cap_text) if isinstance(cap_text, str) else None
    except cap_mod.FormatError:
        return False
    if cap is None or not world.capability_registry.check(cap, required):
        return False

    res = proc.resources
    if param == "SCHEDULE":
        res.slice_ms = float(value)
    elif param == "CPU":
        res.cpu_limit_ms = float(value)
        proc.eol_raised = False
    elif param == "TS":
        res.ts_ops_limit = int(value)
    elif param == "AGENT":
        res.agents_limit = int(value)
    elif param in ("LIFETIME", "LIFE"):
        res.lifetime_deadline = world.now() + float(value)
        proc.eol_raised = False
    elif param == "LEVEL":
        new_level = int(value)
        if not 0 <= new_level <= 2:
            return False
        proc.level = new_level
        world.rebind(proc)
    return True
