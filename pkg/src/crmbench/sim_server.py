"""HTTP façade over the CRM simulator.

A thin FastAPI app delegating every request to CrmStore.dispatch, so the
wire behavior and the in-process behavior are the same code path. Extra
control endpoints handle fixture reset and state inspection for tests.
"""

from __future__ import annotations

from typing import Optional

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, Response

from .sim import CrmStore, seeded_store


def create_app(store: Optional[CrmStore] = None) -> FastAPI:
    store = store if store is not None else seeded_store()
    app = FastAPI(title="crm-sim", docs_url=None, redoc_url=None)
    app.state.store = store

    @app.post("/__admin/reset")
    def reset():
        store.reset()
        return {"status": "ok"}

    @app.get("/__admin/state_hash")
    def state_hash():
        return {"hash": store.state_hash()}

    @app.api_route(
        "/{rest:path}",
        methods=["GET", "POST", "PATCH", "DELETE", "PUT"],
    )
    async def crm(rest: str, request: Request):
        body = {}
        raw = await request.body()
        if raw:
            try:
                import json

                body = json.loads(raw)
            except ValueError:
                return JSONResponse(
                    status_code=400,
                    content={"status": "error", "message": "request body is not valid JSON"},
                )
        result = store.dispatch(request.method, "/" + rest, body)
        if result.status == 204:
            return Response(status_code=204)
        return JSONResponse(status_code=result.status, content=result.document)

    return app


def serve(host: str = "127.0.0.1", port: int = 8040, store: Optional[CrmStore] = None):
    import uvicorn

    uvicorn.run(create_app(store), host=host, port=port, log_level="warning")
