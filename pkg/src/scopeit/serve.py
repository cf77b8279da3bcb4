"""Raw-text scoring pipeline and a minimal HTTP scoring endpoint.

POST /score with ``{"id": str?, "text": str}`` returns per-sentence scores,
the scoped text and the actionability flag. Requests over 1 MiB get a 413,
malformed JSON a 400. The model is frozen, so concurrent requests are safe.
"""

from __future__ import annotations

import json
import logging
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .embed_store import EmbeddingStore
from .model import Model, score_document
from .scoper import SCOPE_THRESHOLD, scope
from .textprep import (
    Vocabulary,
    repair_mojibake,
    replace_urls_emails,
    split_sentences,
    tokenize_document,
)

MAX_BODY_BYTES = 1 << 20

log = logging.getLogger("scopeit.serve")


def score_raw_text(model: Model, vocab: Vocabulary, text: str,
                   store: EmbeddingStore | None = None,
                   scope_threshold: float = SCOPE_THRESHOLD,
                   doc_id: str = "request") -> dict:
    """Full pipeline over raw text: repair, substitute, split, score, scope."""
    cleaned, rmap = replace_urls_emails(repair_mojibake(text))
    doc = split_sentences(cleaned)
    if not doc.sentences:
        return {"sentences": [], "scoped_text": "", "actionable": False}
    tok = tokenize_document(doc_id, doc.sentences, vocab)
    scores = score_document(tok, model, store=store)
    message = scope(doc, scores, rmap, scope_threshold)
    return {
        "sentences": [
            {"text": s, "score": p} for s, p in zip(doc.sentences, scores.scores)
        ],
        "scoped_text": message.text,
        "actionable": message.actionable,
    }


def _make_handler(model: Model, vocab: Vocabulary, store, threshold: float):
    class ScoringHandler(BaseHTTPRequestHandler):
        def _reply(self, status: int, payload: dict) -> None:
            body = json.dumps(payload).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def do_POST(self):  # noqa: N802 (http.server API)
            if self.path != "/score":
                self._reply(404, {"error": "unknown endpoint"})
                return
            raw_length = self.headers.get("Content-Length")
            try:
                length = int(raw_length)
            except (TypeError, ValueError):
                self._reply(400, {"error": "missing or invalid Content-Length"})
                return
            if length > MAX_BODY_BYTES:
                # Drain (bounded) so the client can finish sending and read
                # the error instead of hitting a broken pipe.
                remaining = min(length, 64 * MAX_BODY_BYTES)
                while remaining > 0:
                    chunk = self.rfile.read(min(65536, remaining))
                    if not chunk:
                        break
                    remaining -= len(chunk)
                self.close_connection = True
                self._reply(413, {"error": f"body exceeds {MAX_BODY_BYTES} bytes"})
                return
            body = self.rfile.read(length)
            try:
                payload = json.loads(body.decode("utf-8"))
            except (UnicodeDecodeError, json.JSONDecodeError):
                self._reply(400, {"error": "body is not valid JSON"})
                return
            if not isinstance(payload, dict) or not isinstance(payload.get("text"), str):
                self._reply(400, {"error": 'expected {"text": str, "id": str?}'})
                return
            doc_id = payload.get("id") or "request"
            result = score_raw_text(model, vocab, payload["text"], store=store,
                                    scope_threshold=threshold, doc_id=str(doc_id))
            self._reply(200, result)

        def log_message(self, fmt, *args):
            log.debug("%s - %s", self.address_string(), fmt % args)

    return ScoringHandler


def make_server(model: Model, vocab: Vocabulary, port: int = 8080,
                host: str = "127.0.0.1", store: EmbeddingStore | None = None,
                threshold: float = SCOPE_THRESHOLD) -> ThreadingHTTPServer:
    """Create (but do not start) the scoring server; port 0 picks a free port."""
    handler = _make_handler(model, vocab, store, threshold)
    return ThreadingHTTPServer((host, port), handler)
