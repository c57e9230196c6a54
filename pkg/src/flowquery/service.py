"""HTTP face of the engine: sessions, queries, and diagram documents.

Each session owns one diagram and one focus tracker.  Mutating requests
are serialized per session with queue depth one: a second writer arriving
while the first still runs is rejected with a Busy error rather than
queued.  Read requests take the same lock briefly, so they always see a
settled diagram.
"""

import threading
import time
import uuid
from dataclasses import dataclass, field

from fastapi import Body, FastAPI
from fastapi.responses import JSONResponse

from .diagram import Diagram
from .engine import LanguageResources, Session
from .errors import BusyError, ErrorReport, FlowQueryError, NodeNotFound

DEFAULT_SESSION_TTL = 3600.0

BACKGROUND = "background"


@dataclass
class _Entry:
    session: Session
    lock: threading.Lock = field(default_factory=threading.Lock)
    created_at: float = field(default_factory=time.monotonic)
    last_active: float = field(default_factory=time.monotonic)


class SessionStore:
    """Live sessions keyed by opaque token, expired after an idle TTL."""

    def __init__(self, resources: LanguageResources, ttl: float = DEFAULT_SESSION_TTL):
        self.resources = resources
        self.ttl = ttl
        self.entries: dict[str, _Entry] = {}
        self._registry_lock = threading.Lock()

    def create(self) -> str:
        token = uuid.uuid4().hex
        with self._registry_lock:
            self._expire_idle()
            self.entries[token] = _Entry(Session(self.resources))
        return token

    def get(self, token: str) -> _Entry:
        with self._registry_lock:
            self._expire_idle()
            entry = self.entries.get(token)
        if entry is None:
            raise KeyError(token)
        entry.last_active = time.monotonic()
        return entry

    def _expire_idle(self) -> None:
        deadline = time.monotonic() - self.ttl
        for token in [t for t, e in self.entries.items() if e.last_active < deadline]:
            del self.entries[token]


def _error_response(report: ErrorReport, status: int = 400) -> JSONResponse:
    return JSONResponse({"error": report.to_dict()}, status_code=status)


def _parse_overrides(raw) -> list[tuple[int, object]]:
    """Decode tag-override instructions from a request body."""
    overrides: list[tuple[int, object]] = []
    for item in raw or ():
        if item.get("choice") == "none":
            overrides.append((item["span"], "none"))
        else:
            overrides.append((item["span"], (item["category"], item["value"])))
    return overrides


def _diagram_payload(session: Session) -> dict:
    """Document plus computed per-port outputs, for client rendering."""
    doc = session.diagram.to_document()
    outputs = {}
    try:
        for (node_id, port), payload in session.diagram.propagate().items():
            summary = {"port": port}
            if hasattr(payload, "row_indices"):
                summary["table"] = payload.table
                summary["rows"] = list(payload.row_indices)
                summary["visuals"] = {str(r): v for r, v in payload.visuals.items()}
            else:
                summary["column"] = payload.column
                summary["values"] = list(payload.values)
            outputs.setdefault(str(node_id), []).append(summary)
    except FlowQueryError:
        pass  # an unpropagatable document still renders structurally
    return {
        "diagram": doc,
        "outputs": outputs,
        "hash": session.diagram.structure_hash(),
        "canUndo": session.diagram.can_undo,
        "canRedo": session.diagram.can_redo,
    }


def create_app(
    resources: LanguageResources | None = None,
    session_ttl: float = DEFAULT_SESSION_TTL,
) -> FastAPI:
    app = FastAPI(title="flowquery", docs_url=None, redoc_url=None)
    store = SessionStore(resources or LanguageResources.load(), session_ttl)
    app.state.store = store

    def with_session(token: str, action, write: bool = False):
        """Run ``action(entry)`` under the session lock, mapping failures."""
        try:
            entry = store.get(token)
        except KeyError:
            return _error_response(
                ErrorReport("Internal", f"unknown session '{token}'"), status=404
            )
        if write:
            if not entry.lock.acquire(blocking=False):
                report = ErrorReport.from_exception(BusyError("session is busy"))
                return _error_response(report, status=409)
        else:
            entry.lock.acquire()
        try:
            return action(entry.session)
        except FlowQueryError as exc:
            return _error_response(ErrorReport.from_exception(exc))
        finally:
            entry.lock.release()

    @app.get("/health")
    def health():
        return {"status": "ok", "sessions": len(store.entries)}

    @app.post("/session")
    def create_session():
        return {"sessionId": store.create()}

    @app.get("/session/{token}/diagram")
    def get_diagram(token: str):
        return with_session(token, _diagram_payload)

    @app.post("/session/{token}/diagram/save")
    def save_diagram(token: str):
        return with_session(token, lambda s: {"text": s.diagram.save()})

    @app.post("/session/{token}/diagram/load")
    def load_diagram(token: str, payload: dict = Body()):
        def action(session: Session):
            replacement = Diagram.load(payload["text"])
            replacement.propagate()
            session.diagram = replacement
            return _diagram_payload(session)

        return with_session(token, action, write=True)

    @app.post("/session/{token}/dataset")
    def upload_dataset(token: str, payload: dict = Body()):
        def action(session: Session):
            table = session.add_dataset(
                payload["text"], payload["name"], payload.get("delimiter", ",")
            )
            return {"name": table.name, "columns": table.column_names, "rows": table.row_count}

        return with_session(token, action, write=True)

    @app.post("/session/{token}/tag")
    def tag(token: str, payload: dict = Body()):
        def action(session: Session):
            tagged = session.tag(
                payload["query"], _parse_overrides(payload.get("overrides"))
            )
            return {
                "tokens": [t.text for t in tagged.tokens],
                "tagSpans": [span.to_dict() for span in tagged.spans],
                "posTags": tagged.pos_tags,
            }

        return with_session(token, action)

    @app.post("/session/{token}/query")
    def query(token: str, payload: dict = Body()):
        def action(session: Session):
            result = session.query(
                payload["text"], _parse_overrides(payload.get("overrides"))
            )
            return {
                "kind": result.outcome.kind,
                "signature": result.signature,
                "frames": [f.signature() for f in result.command.frames],
                "frameNodes": result.outcome.frame_nodes,
                "delta": {
                    "createdNodes": list(result.outcome.delta.created_nodes),
                    "createdEdges": list(result.outcome.delta.created_edges),
                    "removedNodes": list(result.outcome.delta.removed_nodes),
                    "removedEdges": list(result.outcome.delta.removed_edges),
                },
                "moved": list(result.moved),
                "derivations": result.derivation_count,
                **_diagram_payload(session),
            }

        return with_session(token, action, write=True)

    @app.post("/session/{token}/autocomplete")
    def autocomplete(token: str, payload: dict = Body()):
        def action(session: Session):
            suggestions = session.suggest(payload["partial"])
            return {
                "suggestions": [
                    {"text": s.text, "score": s.score} for s in suggestions
                ]
            }

        return with_session(token, action)

    @app.post("/session/{token}/token-complete")
    def token_complete(token: str, payload: dict = Body()):
        def action(session: Session):
            return {
                "candidates": [
                    {"text": text, "category": category}
                    for text, category in session.complete_word(payload["partial"])
                ]
            }

        return with_session(token, action)

    @app.post("/session/{token}/focus")
    def focus_event(token: str, payload: dict = Body()):
        def action(session: Session):
            target = payload.get("target", BACKGROUND)
            position = None
            if "x" in payload and "y" in payload:
                position = (payload["x"], payload["y"])
            session.click(None if target == BACKGROUND else int(target), position)
            return {"focused": session.tracker.last_clicked}

        return with_session(token, action, write=True)

    @app.post("/session/{token}/selection")
    def set_selection(token: str, payload: dict = Body()):
        def action(session: Session):
            session.set_selection(int(payload["node"]), payload["rows"])
            return {"hash": session.diagram.structure_hash()}

        return with_session(token, action, write=True)

    @app.post("/session/{token}/node/{node_id}/position")
    def move_node(token: str, node_id: int, payload: dict = Body()):
        def action(session: Session):
            if node_id not in session.diagram.nodes:
                raise NodeNotFound(f"no node {node_id} in the diagram")
            session.diagram.move_node(
                node_id, payload["x"], payload["y"], pin=payload.get("pin", True)
            )
            node = session.diagram.node(node_id)
            return {"position": list(node.position), "pinned": node.pinned}

        return with_session(token, action, write=True)

    @app.post("/session/{token}/undo")
    def undo(token: str):
        def action(session: Session):
            session.diagram.undo()
            return _diagram_payload(session)

        return with_session(token, action, write=True)

    @app.post("/session/{token}/redo")
    def redo(token: str):
        def action(session: Session):
            session.diagram.redo()
            return _diagram_payload(session)

        return with_session(token, action, write=True)

    return app
