from __future__ import annotations

import socket
import threading

import pytest

from amr.world import World, WorldConfig

_port_lock = threading.Lock()
_next_port = [21500]


def free_port() -> int:
    """Sequential probe-allocated ports keep parallel tests apart."""
    with _port_lock:
        while True:
            port = _next_port[0]
            _next_port[0] += 1
            with socket.socket(socket.AF_INET, socket.SOCK_DGRAM) as s:
                try:
                    s.bind(("127.0.0.1", port))
                except OSError:
                    continue
            with socket.socket(socket.AF_INET, socket.SOCK_STREAM) as s:
                try:
                    s.bind(("127.0.0.1", port))
                except OSError:
                    continue
            return port


@pytest.fixture
def port():
    return free_port()


@pytest.fixture
def make_world():
    worlds = []

    def factory(seed=1, name=None, **cfg):
        w = World(WorldConfig(seed=seed, **cfg), name=name)
        worlds.append(w)
        return w

    yield factory
    for w in worlds:
        w.shutdown()


@pytest.fixture
def world(make_world):
    return make_world()


def run_until_quiet(w: World, max_steps: int = 200) -> int:
    """Step until no live agents remain; returns steps taken."""
    import time
    for i in range(max_steps):
        w.step(1)
        if w.quiescent():
            return i + 1
        time.sleep(0.001)
    return max_steps


HELLO_SRC = """
function hello(config) {
  this.message = config.message;
  this.time = 0;
  this.delay = config.delay;
  this.data = null;
  this.act = {
    start : () => {
      log('Hello world!');
      this.time = time();
      sleep(this.delay);
    },
    talk : () => {
      log(this.message);
      log('I sleep ' + (time() - this.time) + ' ms');
      this.time = time();
      sleep(random(10, 100));
    },
    end : () => {
      log('I am terminating...');
      kill();
    }
  };
  this.trans = {
    start : talk,
    talk : () => {
      return random(0, 100) < 50 ? 'end' : 'talk';
    },
  };
  this.next = 'start';
}
"""


@pytest.fixture
def hello_source():
    return HELLO_SRC
