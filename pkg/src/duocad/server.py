"""Turn-based game service: sessions, role views, live events, persistence.

Each session owns one game; commands serialize through the session's lock
and every state change appends an event with a strictly increasing sequence
number.  Replaying a session's events reconstructs all player-visible state,
and the persisted rollout is derived from the same game the events describe.

The target never appears in any event or in a maker-directed payload; only
the designer's join/view payloads carry its render.
"""
from __future__ import annotations

import random
import secrets
import threading
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Iterator

from fastapi import Body, FastAPI, HTTPException, Query, Request
from fastapi.responses import StreamingResponse

from .core import CadError, Design, design_to_obj, parse_action, parse_design, to_canonical_json
from .engine import (
    Game,
    GameConfig,
    UnknownPreset,
    condition_preset,
    dynamic_threshold,
    rollout_to_json,
    rollout_to_obj,
)
from .fixtures import fixture
from .message import Message, message_to_obj, parse_message
from .metric import MetricConfig
from .render import Scene, render_history, scene_to_svg


@dataclass
class ServerSettings:
    data_dir: Path | None = None
    heartbeat: float = 5.0
    clock: Callable[[], float] = time.monotonic
    poll_interval: float = 0.05


@dataclass(frozen=True)
class Event:
    seq: int
    kind: str  # joined | message_posted | actions_applied | submit_result | timer | finished
    payload: dict

    def to_obj(self) -> dict:
        return {"seq": self.seq, "kind": self.kind, "payload": self.payload}


@dataclass
class Series:
    """Lives bookkeeping shared by the sessions of one dyad."""

    series_id: str
    lives: int = 3

    @property
    def ejected(self) -> bool:
        return self.lives <= 0


class Session:
    """Single-owner actor for one game; all commands go through ``lock``."""

    def __init__(
        self,
        session_id: str,
        target: Design,
        cfg: GameConfig,
        settings: ServerSettings,
        series: Series,
        pinned_roles: dict[str, str] | None = None,
        seed: int | None = None,
    ):
        self.id = session_id
        self.cfg = cfg
        self.target = target
        self.settings = settings
        self.series = series
        self.game = Game(target, cfg)
        self.lock = threading.Lock()
        self.changed = threading.Condition(self.lock)
        self.events: list[Event] = []
        self.phase = "waiting"
        self.tokens = [secrets.token_urlsafe(12), secrets.token_urlsafe(12)]
        self.pinned_roles = dict(pinned_roles or {})
        self.roles: dict[str, str] = {}  # token -> role
        self.rollout = None
        self.last_result = None
        self._pending_message: Message | None = None
        # Shared countdown; designer time burns at the configured multiplier.
        self._elapsed = 0.0
        self._phase_since = settings.clock()
        self._rng = random.Random(seed)

    # -- clock ---------------------------------------------------------------

    def _rate(self) -> float:
        if self.phase == "designer_turn":
            return self.cfg.designer_time_multiplier
        return 1.0

    def _consume_clock(self) -> None:
        now = self.settings.clock()
        self._elapsed += (now - self._phase_since) * self._rate()
        self._phase_since = now

    def _set_phase(self, phase: str) -> None:
        self._consume_clock()
        self.phase = phase

    def time_left(self) -> float | None:
        if self.cfg.total_time is None:
            return None
        self._consume_clock()
        return max(0.0, self.cfg.total_time - self._elapsed)

    def _check_clock(self) -> None:
        if self.phase in ("waiting", "finished") or self.cfg.total_time is None:
            return
        self._consume_clock()
        if self._elapsed > self.cfg.total_time:
            self._emit("timer", {"expired": True})
            self._finish(submitted=False)

    # -- events ---------------------------------------------------------------

    def _emit(self, kind: str, payload: dict) -> Event:
        event = Event(len(self.events), kind, payload)
        self.events.append(event)
        self.changed.notify_all()
        return event

    # -- commands -------------------------------------------------------------

    def join(self, token: str) -> dict:
        with self.lock:
            if token not in self.tokens:
                raise HTTPException(403, "bad join token")
            if token in self.roles:
                return self._view(self.roles[token])  # idempotent reconnect
            taken = set(self.roles.values())
            if token in self.pinned_roles:
                role = self.pinned_roles[token]
                if role in taken:
                    raise HTTPException(409, "role already taken")
            else:
                open_roles = [r for r in ("designer", "maker") if r not in taken]
                if not open_roles:
                    raise HTTPException(409, "session is full")
                role = self._rng.choice(open_roles)
            self.roles[token] = role
            self._emit("joined", {"role": role, "players": len(self.roles)})
            if len(self.roles) == 2 and self.phase == "waiting":
                self._set_phase("designer_turn")
                self._phase_since = self.settings.clock()
                self._elapsed = 0.0
            return self._view(role)

    def _role_for(self, token: str) -> str:
        role = self.roles.get(token)
        if role is None:
            raise HTTPException(403, "unknown token; join first")
        return role

    def view(self, token: str) -> dict:
        with self.lock:
            return self._view(self._role_for(token))

    def _view(self, role: str) -> dict:
        """Role-specific state.  Maker payloads never mention the target."""
        common = {
            "session_id": self.id,
            "role": role,
            "phase": self.phase,
            "round": self.game.round_count,
            "max_rounds": self.cfg.max_rounds,
            "modality": self.cfg.modality,
            "char_limit": self.cfg.char_limit,
            "time_left": self.time_left(),
            "lives": self.series.lives,
            "current_svg": scene_to_svg(Scene(self.game.current)),
            "history": [
                {"text": p.text, "before_svg": p.before_svg, "after_svg": p.after_svg}
                for p in render_history(self.game.rounds)
            ],
            "outcome": self.game.outcome,
        }
        if role == "designer":
            common["target_svg"] = scene_to_svg(Scene(self.target))
        else:
            common["current"] = design_to_obj(self.game.current)
            common["messages"] = [message_to_obj(r.message) for r in self.game.rounds]
            if self.game.rounds and self.phase == "maker_turn":
                common["pending_message"] = message_to_obj(self._pending_message)
        return common

    def post_message(self, token: str, message: Message) -> dict:
        with self.lock:
            role = self._role_for(token)
            self._check_clock()
            if self.phase == "finished":
                raise HTTPException(409, "game already finished")
            if self.phase != "designer_turn" or role != "designer":
                raise HTTPException(409, "not your turn")
            try:
                self.game.validate_message(message)
            except CadError as exc:
                raise HTTPException(422, str(exc)) from exc
            self._pending_message = message
            self._set_phase("maker_turn")
            self._emit("message_posted", {"message": message_to_obj(message)})
            return {"ok": True}

    def post_actions(self, token: str, actions: list) -> dict:
        with self.lock:
            role = self._role_for(token)
            self._check_clock()
            if self.phase == "finished":
                raise HTTPException(409, "game already finished")
            if self.phase != "maker_turn" or role != "maker":
                raise HTTPException(409, "not your turn")
            if self._pending_message is None:
                raise HTTPException(409, "no message posted this round")
            try:
                result = self.game.step(self._pending_message, actions)
            except CadError as exc:
                raise HTTPException(422, str(exc)) from exc
            self.last_result = result
            payload = {
                "round": self.game.round_count,
                "actions": len(actions),
                "skipped": list(result.skipped),
                "design_after": design_to_obj(result.round.design_after),
                "submittable": result.submittable,
            }
            if self.cfg.reveal_distance:
                payload["distance"] = result.distance
            if self.game.round_count >= self.cfg.max_rounds:
                self._emit("actions_applied", payload)
                if not result.submittable:
                    self._finish(submitted=False)
                # else: stay in maker_turn so the final round can be submitted
            else:
                self._set_phase("designer_turn")
                self._emit("actions_applied", payload)
            return payload

    def request_submit(self, token: str) -> dict:
        with self.lock:
            role = self._role_for(token)
            self._check_clock()
            if self.phase == "finished":
                raise HTTPException(409, "game already finished")
            if role != "maker":
                raise HTTPException(409, "only the maker submits")
            if self.last_result is None:
                raise HTTPException(409, "nothing to submit yet")
            threshold = dynamic_threshold(self.cfg, self.game.round_count)
            accepted = bool(self.last_result.submittable)
            payload = {"accepted": accepted, "threshold": threshold}
            if self.cfg.reveal_distance:
                payload["distance"] = self.last_result.distance
            self._emit("submit_result", payload)
            if accepted:
                self._finish(submitted=True)
            return payload

    def _finish(self, submitted: bool) -> None:
        rollout = self.game.finalize(submitted)
        if rollout.outcome != "won":
            self.series.lives -= 1
        meta = dict(rollout.meta)
        meta.update({"session_id": self.id, "series_id": self.series.series_id})
        self.rollout = replace(rollout, meta=meta)
        self._set_phase("finished")
        self._emit(
            "finished",
            {
                "outcome": rollout.outcome,
                "rounds": len(rollout.rounds),
                "lives": self.series.lives,
            },
        )
        if self.settings.data_dir is not None:
            self.settings.data_dir.mkdir(parents=True, exist_ok=True)
            path = self.settings.data_dir / f"{self.series.series_id}.ndjson"
            with open(path, "a", encoding="utf-8") as fh:
                fh.write(rollout_to_json(self.rollout))
                fh.write("\n")

    # -- event streaming -------------------------------------------------------

    def events_after(self, seq: int) -> list[Event]:
        with self.lock:
            return [e for e in self.events if e.seq > seq]

    def stream(self, token: str, after: int) -> Iterator[str]:
        with self.lock:
            self._role_for(token)
        cursor = after
        heartbeat_at = self.settings.clock() + self.settings.heartbeat
        while True:
            batch = self.events_after(cursor)
            for event in batch:
                cursor = event.seq
                yield f"id: {event.seq}\ndata: {to_canonical_json(event.to_obj())}\n\n"
                if event.kind == "finished":
                    return
            with self.lock:
                if self.phase == "finished" and not self.events_after(cursor):
                    return
            now = self.settings.clock()
            if now >= heartbeat_at:
                heartbeat_at = now + self.settings.heartbeat
                yield ": ping\n\n"
            time.sleep(self.settings.poll_interval)


class SessionStore:
    def __init__(self, settings: ServerSettings):
        self.settings = settings
        self.sessions: dict[str, Session] = {}
        self.series: dict[str, Series] = {}
        self.lock = threading.Lock()

    def create(self, body: dict) -> Session:
        cfg = _parse_config(body.get("config", {}))
        target = _parse_target(body)
        series_id = str(body.get("series", "default"))
        with self.lock:
            series = self.series.setdefault(series_id, Series(series_id, cfg.lives))
            if series.ejected:
                raise HTTPException(409, f"series {series_id!r} is out of lives")
            session_id = secrets.token_urlsafe(8)
            session = Session(
                session_id, target, cfg, self.settings, series, seed=body.get("seed")
            )
            if body.get("pin_roles"):
                # Scripted clients want fixed roles: first token designs.
                session.pinned_roles = {
                    session.tokens[0]: "designer",
                    session.tokens[1]: "maker",
                }
            self.sessions[session_id] = session
            return session

    def get(self, session_id: str) -> Session:
        session = self.sessions.get(session_id)
        if session is None:
            raise HTTPException(404, "no such session")
        return session


def _parse_config(obj: dict) -> GameConfig:
    if not isinstance(obj, dict):
        raise HTTPException(422, "config must be an object")
    try:
        cfg = condition_preset(obj["preset"]) if "preset" in obj else GameConfig()
        fields = {
            k: obj[k]
            for k in (
                "max_rounds",
                "total_time",
                "win_threshold",
                "lives",
                "modality",
                "char_limit",
                "designer_time_multiplier",
                "reveal_distance",
            )
            if k in obj
        }
        if "submission_schedule" in obj:
            fields["submission_schedule"] = tuple(obj["submission_schedule"])
        if "metric" in obj:
            fields["metric"] = MetricConfig(**obj["metric"])
        if fields:
            cfg = GameConfig(**{**_config_fields(cfg), **fields})
        return cfg
    except (UnknownPreset, TypeError, ValueError) as exc:
        raise HTTPException(422, f"invalid config: {exc}") from exc


def _config_fields(cfg: GameConfig) -> dict:
    return {
        "max_rounds": cfg.max_rounds,
        "total_time": cfg.total_time,
        "win_threshold": cfg.win_threshold,
        "submission_schedule": cfg.submission_schedule,
        "lives": cfg.lives,
        "modality": cfg.modality,
        "char_limit": cfg.char_limit,
        "designer_time": cfg.designer_time,
        "maker_time": cfg.maker_time,
        "designer_time_multiplier": cfg.designer_time_multiplier,
        "reveal_distance": cfg.reveal_distance,
        "metric": cfg.metric,
    }


def _parse_target(body: dict) -> Design:
    if "target" in body:
        try:
            return parse_design(body["target"])
        except (ValueError, CadError) as exc:
            raise HTTPException(422, f"invalid target: {exc}") from exc
    name = body.get("fixture", "smiley_face")
    try:
        return fixture(name)
    except ValueError as exc:
        raise HTTPException(422, str(exc)) from exc


def create_app(settings: ServerSettings | None = None) -> FastAPI:
    settings = settings or ServerSettings()
    store = SessionStore(settings)
    app = FastAPI(title="duocad turn server")
    app.state.store = store

    @app.get("/healthz")
    def healthz() -> dict:
        return {"ok": True}

    @app.post("/sessions")
    def create_session(body: dict = Body(...)) -> dict:
        session = store.create(body)
        return {
            "session_id": session.id,
            "tokens": list(session.tokens),
            "max_rounds": session.cfg.max_rounds,
        }

    @app.post("/sessions/{session_id}/join")
    def join(session_id: str, body: dict = Body(...)) -> dict:
        return store.get(session_id).join(str(body.get("token", "")))

    @app.get("/sessions/{session_id}/view")
    def view(session_id: str, token: str = Query(...)) -> dict:
        return store.get(session_id).view(token)

    @app.post("/sessions/{session_id}/message")
    def post_message(session_id: str, body: dict = Body(...)) -> dict:
        try:
            message = parse_message(body.get("message", {}))
        except ValueError as exc:
            raise HTTPException(422, f"invalid message: {exc}") from exc
        return store.get(session_id).post_message(str(body.get("token", "")), message)

    @app.post("/sessions/{session_id}/actions")
    def post_actions(session_id: str, body: dict = Body(...)) -> dict:
        raw = body.get("actions", [])
        if not isinstance(raw, list):
            raise HTTPException(422, "actions must be a list")
        try:
            actions = [parse_action(a) for a in raw]
        except ValueError as exc:
            raise HTTPException(422, f"invalid action: {exc}") from exc
        return store.get(session_id).post_actions(str(body.get("token", "")), actions)

    @app.post("/sessions/{session_id}/submit")
    def submit(session_id: str, body: dict = Body(...)) -> dict:
        return store.get(session_id).request_submit(str(body.get("token", "")))

    @app.get("/sessions/{session_id}/events")
    def events(
        session_id: str,
        request: Request,
        token: str = Query(...),
        after: int = Query(-1),
    ) -> StreamingResponse:
        session = store.get(session_id)
        last_event_id = request.headers.get("last-event-id")
        if last_event_id is not None:
            after = int(last_event_id)
        return StreamingResponse(
            session.stream(token, after), media_type="text/event-stream"
        )

    @app.get("/sessions/{session_id}/rollout")
    def rollout(session_id: str) -> dict:
        session = store.get(session_id)
        if session.rollout is None:
            raise HTTPException(409, "game not finished")
        return rollout_to_obj(session.rollout)

    return app


def run_server(
    host: str = "127.0.0.1",
    port: int = 8000,
    settings: ServerSettings | None = None,
) -> None:
    import uvicorn

    uvicorn.run(create_app(settings), host=host, port=port, log_level="warning")
