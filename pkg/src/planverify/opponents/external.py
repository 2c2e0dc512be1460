"""Adapter that delegates opponent decisions to an external process.

Two transports share one JSON payload.  Over HTTP each tick is a
``POST /decide`` answered with status 200; over stdio each tick is one
request line answered by one response line.

Request:  ``{"tick": int, "history": [state, ...], "scenario_digest": str}``
Response: ``{"actions": [action, ...]}`` using the plan-file action schema.

Envelope failures (timeout, non-200 status, unparsable body, missing
``actions``) raise an :class:`OpponentFault` subclass.  Individual actions
that fail validation are dropped and recorded in ``faults``.
"""

from __future__ import annotations

import json
import logging
import selectors
import shlex
import socket
import subprocess
import urllib.error
import urllib.request
from typing import Any, Sequence

from planverify.errors import AdapterSchemaError, AdapterTimeout, LoadError, ProtocolError
from planverify.model import AtomicAction, GlobalState, Scenario, Side
from planverify.rng import SeedInfo
from planverify.schema import action_from_dict, entity_to_dict, scenario_digest

log = logging.getLogger(__name__)

DEFAULT_TIMEOUT = 2.0
DEFAULT_HISTORY_TAIL = 20


def state_to_dict(state: GlobalState) -> dict[str, Any]:
    return {
        "tick": state.tick,
        "time": state.time,
        "entities": [entity_to_dict(e, runtime=True) for e in state.entities],
    }


def build_request(history: Sequence[GlobalState], digest: str, tail: int) -> dict[str, Any]:
    return {
        "tick": history[-1].tick,
        "history": [state_to_dict(s) for s in history[-tail:]],
        "scenario_digest": digest,
    }


def parse_response(body: Any, state: GlobalState) -> tuple[list[AtomicAction], list[str]]:
    """Validate a decoded response; returns accepted actions and per-action faults."""
    if not isinstance(body, dict) or not isinstance(body.get("actions"), list):
        raise AdapterSchemaError("response must be an object with an 'actions' list")
    accepted, faults = [], []
    for i, raw in enumerate(body["actions"]):
        try:
            action = action_from_dict(raw, f"$.actions[{i}]")
        except LoadError as exc:
            faults.append(f"schema: {exc}")
            continue
        idx = state.index.get(action.actor_id)
        if idx is None:
            faults.append(f"unknown actor {action.actor_id!r}")
            continue
        actor = state.entities[idx]
        if actor.side is not Side.OPPONENT:
            faults.append(f"{action.actor_id} is not an opponent entity")
        elif actor.health <= 0:
            faults.append(f"{action.actor_id} is dead")
        else:
            accepted.append(action)
    return accepted, faults


class ExternalOpponent:
    """Opponent served over HTTP (``http://host:port``) or stdio (``stdio:<command>``)."""

    name = "external"

    def __init__(self, endpoint: str, timeout: float = DEFAULT_TIMEOUT,
                 history_tail: int = DEFAULT_HISTORY_TAIL) -> None:
        if not endpoint:
            raise ValueError("external opponent needs an endpoint")
        self.endpoint = endpoint
        self.timeout = timeout
        self.history_tail = history_tail
        self.faults: list[str] = []
        self._digest: str | None = None
        self._proc: subprocess.Popen | None = None

    # -- lifecycle -------------------------------------------------------

    def reset(self, seed: SeedInfo) -> None:
        self.faults = []
        self._digest = None

    def close(self) -> None:
        if self._proc is not None:
            self._proc.kill()
            self._proc.wait()
            self._proc = None

    def __del__(self) -> None:
        try:
            self.close()
        except Exception:
            pass

    # -- transports ------------------------------------------------------

    def _post(self, payload: bytes) -> Any:
        url = self.endpoint.rstrip("/") + "/decide"
        req = urllib.request.Request(url, data=payload, method="POST",
                                     headers={"Content-Type": "application/json"})
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                status, body = resp.status, resp.read()
        except urllib.error.HTTPError as exc:
            raise ProtocolError(f"adapter answered HTTP {exc.code}") from exc
        except (socket.timeout, TimeoutError) as exc:
            raise AdapterTimeout(f"adapter exceeded {self.timeout} s") from exc
        except urllib.error.URLError as exc:
            if isinstance(exc.reason, (socket.timeout, TimeoutError)):
                raise AdapterTimeout(f"adapter exceeded {self.timeout} s") from exc
            raise ProtocolError(f"adapter unreachable: {exc.reason}") from exc
        if status != 200:
            raise ProtocolError(f"adapter answered HTTP {status}")
        try:
            return json.loads(body)
        except ValueError as exc:
            raise AdapterSchemaError(f"response is not JSON: {exc}") from exc

    def _stdio(self, payload: bytes) -> Any:
        if self._proc is None or self._proc.poll() is not None:
            cmd = shlex.split(self.endpoint[len("stdio:"):])
            self._proc = subprocess.Popen(cmd, stdin=subprocess.PIPE, stdout=subprocess.PIPE)
        proc = self._proc
        assert proc.stdin is not None and proc.stdout is not None
        try:
            proc.stdin.write(payload + b"\n")
            proc.stdin.flush()
        except BrokenPipeError as exc:
            raise ProtocolError("adapter process closed its input") from exc
        with selectors.DefaultSelector() as sel:
            sel.register(proc.stdout, selectors.EVENT_READ)
            if not sel.select(self.timeout):
                self.close()
                raise AdapterTimeout(f"adapter exceeded {self.timeout} s")
        line = proc.stdout.readline()
        if not line:
            raise ProtocolError("adapter process exited without a response")
        try:
            return json.loads(line)
        except ValueError as exc:
            raise AdapterSchemaError(f"response is not JSON: {exc}") from exc

    # -- policy ----------------------------------------------------------

    def decide(self, history: Sequence[GlobalState], scenario: Scenario) -> list[AtomicAction]:
        if self._digest is None:
            self._digest = scenario_digest(scenario)
        request = build_request(history, self._digest, self.history_tail)
        payload = json.dumps(request, sort_keys=True, separators=(",", ":")).encode()
        if self.endpoint.startswith("stdio:"):
            body = self._stdio(payload)
        else:
            body = self._post(payload)
        actions, faults = parse_response(body, history[-1])
        for f in faults:
            log.warning("tick %d: dropped adapter action: %s", history[-1].tick, f)
        self.faults.extend(f"tick {history[-1].tick}: {f}" for f in faults)
        return actions
