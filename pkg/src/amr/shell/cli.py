"""Command line entry point.

    amr [script.abls] [--bind host:port] [--seed N] [--config file]

With a script the session executes it and exits once the world goes quiet
(unless --stay).  Without one it drops into a REPL.  --bind serves the
management API (and the console bundle when built).  AMR_SEED seeds the
world when --seed is absent.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from ..world import World, WorldConfig
from .mgmt import ManagementServer
from .session import Session


def build_config(args) -> WorldConfig:
    data = {}
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    cfg = WorldConfig.from_dict(data)
    seed = args.seed if args.seed is not None else os.environ.get("AMR_SEED")
    if seed is not None:
        cfg.seed = int(seed)
    if args.verbose:
        cfg.print_log = True
    return cfg


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="amr", description="agent-machine runtime shell")
    parser.add_argument("script", nargs="?", help="script file (.abls)")
    parser.add_argument("script_args", nargs="*", help="script arguments")
    parser.add_argument("--bind", metavar="HOST:PORT",
                        help="serve the management API/console")
    parser.add_argument("--seed", type=int, default=None,
                        help="world PRNG seed (reproducible runs)")
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--stay", action="store_true",
                        help="keep running after the script finishes")
    parser.add_argument("--timeout", type=float, default=120.0,
                        help="script-mode quiescence timeout seconds")
    parser.add_argument("--verbose", "-v", action="store_true",
                        help="print agent log lines")
    parser.add_argument("--worker", help=argparse.SUPPRESS)  # cluster internal
    args = parser.parse_args(argv)

    if args.worker:
        from ..cluster import run_worker
        return run_worker(args.worker)

    world = World(build_config(args))
    session = Session(world, script_args=args.script_args,
                      interactive=bool(args.script))
    server = None
    if args.bind:
        host, _, port = args.bind.rpartition(":")
        server = ManagementServer(world, host or "127.0.0.1",
                                  int(port)).start()
        print(f"management API on http://{host or '127.0.0.1'}:{server.port}",
              flush=True)

    try:
        if args.script:
            code = session.run_script(args.script)
            if code != 0:
                return code
            if args.stay:
                _wait_forever()
            else:
                session.wait_done(args.timeout)
            return 0
        if args.bind and not sys.stdin.isatty():
            _wait_forever()  # headless service mode
        session.repl()
        return 0
    except KeyboardInterrupt:
        return 130
    finally:
        if server is not None:
            server.stop()
        world.shutdown()


def _wait_forever():
    import time
    while True:
        time.sleep(0.5)


if __name__ == "__main__":
    sys.exit(main())
