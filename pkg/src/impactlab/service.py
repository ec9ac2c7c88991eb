"""Local HTTP service backing the authoring UI.

One scene composition, revision-based optimistic concurrency: every response
carries the current integer revision; writes must quote the revision they
were based on and get 409 when it is stale. Scene mutations are serialized
under a lock; prediction is pinned to the revision it ran against.
"""
from __future__ import annotations

import threading

import numpy as np
from fastapi import FastAPI, HTTPException, Request

from . import composer, schemas
from .errors import InvalidTransformError


def create_app(initial: composer.SceneComposition) -> FastAPI:
    app = FastAPI(title="impactlab authoring service")
    # the authoring UI is served from a separate local static server
    from fastapi.middleware.cors import CORSMiddleware

    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    state = {
        "comp": initial,
        "revision": 1,
        "prediction": None,  # {"base_revision", "events", "keyframes"}
    }
    lock = threading.Lock()

    def scene_payload() -> dict:
        doc = schemas.scene_to_dict(state["comp"])
        doc["revision"] = state["revision"]
        return doc

    def check_revision(data: dict) -> None:
        if "revision" not in data:
            raise HTTPException(status_code=400, detail="request must quote the scene revision")
        if int(data["revision"]) != state["revision"]:
            raise HTTPException(
                status_code=409,
                detail=f"stale revision {data['revision']}; current is {state['revision']}",
            )

    @app.get("/scene")
    def get_scene():
        with lock:
            return scene_payload()

    @app.patch("/pairs/{index}")
    async def patch_pair(index: int, request: Request):
        data = await request.json()
        with lock:
            check_revision(data)
            comp = state["comp"]
            if not 0 <= index < len(comp.pairs):
                raise HTTPException(status_code=404, detail=f"no pair {index}")
            pair = comp.pairs[index]
            if "rotation_axis" in data and data["rotation_axis"] is not None:
                axis = np.asarray(data["rotation_axis"], dtype=float)
                norm = np.linalg.norm(axis)
                if norm == 0 or np.linalg.norm(np.cross(axis / norm, composer.GRAVITY_AXIS)) > 1e-9:
                    raise HTTPException(
                        status_code=400, detail="rotations must be about the gravity axis"
                    )
            if "translation" in data:
                t = np.asarray(data["translation"], dtype=float)
                if t.shape != (3,):
                    raise HTTPException(status_code=400, detail="translation must be 3 numbers")
                pair.translation = t
            if "rotation_about_gravity" in data:
                pair.rotation_about_gravity = float(data["rotation_about_gravity"])
            if "time_offset" in data:
                pair.time_offset = float(data["time_offset"])
            if "reference_mass" in data:
                mass = float(data["reference_mass"])
                if mass <= 0:
                    raise HTTPException(status_code=400, detail="reference_mass must be positive")
                pair.reference_mass = mass
            state["revision"] += 1
            return scene_payload()

    @app.post("/auto-time")
    async def auto_time(request: Request):
        data = await request.json()
        with lock:
            check_revision(data)
            comp = state["comp"]
            try:
                early = comp.pairs[int(data["pair_early"])]
                late = comp.pairs[int(data["pair_late"])]
            except (KeyError, IndexError) as exc:
                raise HTTPException(status_code=400, detail=f"bad pair selection: {exc}")
            try:
                result = composer.auto_time(
                    early,
                    late,
                    body_early=int(data.get("body_early", 0)),
                    body_late=int(data.get("body_late", 0)),
                )
            except (ValueError, InvalidTransformError) as exc:
                raise HTTPException(status_code=400, detail=str(exc))
            late.time_offset += result.offset
            state["revision"] += 1
            return {
                "offset": result.offset,
                "time_offset": late.time_offset,
                "distance": result.distance,
                "within_contact": result.within_contact,
                "revision": state["revision"],
            }

    @app.post("/predict")
    async def predict(request: Request):
        data = await request.json()
        with lock:
            check_revision(data)
            predicted = composer.predict_secondary(state["comp"])
            state["comp"] = predicted
            keyframes = composer.export_keyframes(predicted)
            state["prediction"] = {
                "base_revision": state["revision"],
                "keyframes": keyframes,
            }
            return {
                "revision": state["revision"],
                "events": schemas.scene_to_dict(predicted)["predicted_events"],
                "warnings": predicted.warnings,
                "keyframes": keyframes,
            }

    @app.get("/keyframes")
    def get_keyframes():
        with lock:
            if state["prediction"] is None:
                raise HTTPException(status_code=404, detail="no prediction has run yet")
            return {
                "revision": state["revision"],
                "base_revision": state["prediction"]["base_revision"],
                "keyframes": state["prediction"]["keyframes"],
            }

    return app
