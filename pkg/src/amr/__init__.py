"""Agent-machine runtime.

A portable runtime for reactive, state-based, mobile multi-agent programs
written in the Agent Behavior Language (ABL).  Agents are activity-transition
graphs scheduled cooperatively under strict resource control; they talk
through tuple spaces and signals, migrate between nodes over the AMP wire
protocol, and negotiate rights with capabilities.
"""

__version__ = "0.1.0"
