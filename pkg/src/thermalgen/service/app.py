"""HTTP + WebSocket front end for a synthesis session.

Control is plain HTTP (list codes, switch code, read stats); video rides a
WebSocket as binary messages in the documented 16-byte-header format.  The
split keeps the control surface curl-friendly while giving browsers a
low-overhead frame path.
"""

from __future__ import annotations

import threading
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import JSONResponse, Response
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel
from starlette.concurrency import run_in_threadpool

from ..config import ServiceConfig
from ..errors import ServiceError
from ..models.bundle import load_bundle
from ..training.latents import LatentCodeSet
from .session import ReplaySource, Subscriber, SynthesisSession

_SUBSCRIBER_POLL_S = 30.0


class SelectCodeRequest(BaseModel):
    code_id: str


def build_app(session: SynthesisSession, ui_dir: Optional[Path] = None) -> FastAPI:
    """Wire a running (or startable) session into a web application."""
    app = FastAPI(title="thermalgen conference service")
    app.state.session = session

    @app.get("/codes")
    def list_codes() -> dict:
        return session.codes_listing()

    @app.get("/codes/{code_id}/thumbnail")
    def code_thumbnail(code_id: str) -> Response:
        try:
            payload = session.thumbnail_png(code_id)
        except KeyError:
            return JSONResponse({"error": f"unknown code_id: {code_id!r}"}, status_code=404)
        return Response(content=payload, media_type="image/png")

    @app.post("/session/code")
    def select_code(request: SelectCodeRequest) -> Response:
        try:
            ack = session.select_code(request.code_id)
        except ServiceError as exc:
            return JSONResponse({"error": str(exc)}, status_code=404)
        return JSONResponse(ack)

    @app.get("/stats")
    def stats() -> dict:
        return session.stats()

    @app.websocket("/stream")
    async def stream(websocket: WebSocket) -> None:
        await websocket.accept()
        subscriber: Subscriber = session.subscribe()
        try:
            while True:
                try:
                    frame = await run_in_threadpool(
                        subscriber.next, _SUBSCRIBER_POLL_S
                    )
                except TimeoutError:
                    if session.stats()["finished"]:
                        break
                    continue
                if frame is None:
                    break
                await websocket.send_bytes(frame.message())
        except WebSocketDisconnect:
            pass
        finally:
            session.unsubscribe(subscriber)
            try:
                await websocket.close()
            except RuntimeError:
                pass  # already closed by the peer

    if ui_dir is not None:
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app


def build_replay_session(
    bundle_path: Path,
    latents_path: Path,
    replay_root: Path,
    config: ServiceConfig,
) -> SynthesisSession:
    """Assemble a session that replays a recorded dataset's thermal stream."""
    bundle = load_bundle(bundle_path)
    latent_set = LatentCodeSet.load(latents_path)
    source = ReplaySource(replay_root, loop=config.loop)
    return SynthesisSession(bundle, latent_set, source, config)


def run_service(
    bundle_path: Path,
    latents_path: Path,
    replay_root: Path,
    config: ServiceConfig,
) -> None:
    """Start the session plus web server and block until shutdown.

    With ``exit_when_done`` the server stops itself once a non-looping replay
    has emitted its last frame (useful for smoke tests and demos).
    """
    import uvicorn

    session = build_replay_session(bundle_path, latents_path, replay_root, config)
    ui_dir = Path(config.ui_dir) if config.ui_dir else None
    if ui_dir is not None and not ui_dir.is_dir():
        raise ServiceError(f"ui_dir does not exist: {ui_dir}")
    app = build_app(session, ui_dir=ui_dir)
    server = uvicorn.Server(
        uvicorn.Config(app, host=config.host, port=config.port, log_level="warning")
    )
    session.start()

    if config.exit_when_done and not config.loop:

        def watch() -> None:
            session.join()
            server.should_exit = True

        threading.Thread(target=watch, name="session-watch", daemon=True).start()

    try:
        server.run()
    finally:
        session.stop()
