"""In-memory knowledge base speaking just enough SPARQL for this toolkit.

Live KB endpoints drift, rate-limit, and are too big for desk-scale runs,
so tests and demos run against this double. It answers exactly the query
shapes built by :mod:`kbcomplete.ingest` (missing-subject enumeration and
statement counts), either in-process via :meth:`MockKnowledgeBase.fetch`
or over HTTP via :meth:`MockKnowledgeBase.serve`.
"""

from __future__ import annotations

import json
import re
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs

INSTANCE_OF = "P31"

_MISSING_RE = re.compile(
    r"\?s wdt:P31 wd:(?P<subject_type>\S+) \.\s*"
    r"FILTER NOT EXISTS \{ \?s wdt:(?P<property_id>\S+) \?o \. \}",
)
_COUNT_RE = re.compile(
    r"SELECT \(COUNT\(\*\) AS \?n\) WHERE \{ \?s wdt:(?P<property_id>\S+) \?o \. \}"
)
_LIMIT_RE = re.compile(r"LIMIT (\d+)")
_OFFSET_RE = re.compile(r"OFFSET (\d+)")


def _literal(value: str) -> dict:
    return {"type": "literal", "value": value}


def _uri(entity_id: str) -> dict:
    return {"type": "uri", "value": f"http://example.org/entity/{entity_id}"}


class MockKnowledgeBase:
    def __init__(self):
        self.triples: set[tuple[str, str, str]] = set()
        self.labels: dict[str, str] = {}
        self.query_log: list[str] = []

    def add(self, subject: str, predicate: str, obj: str) -> None:
        self.triples.add((subject, predicate, obj))

    def add_typed_subject(self, subject: str, subject_type: str, label: str | None = None):
        self.add(subject, INSTANCE_OF, subject_type)
        if label is not None:
            self.labels[subject] = label

    def set_label(self, entity_id: str, label: str) -> None:
        self.labels[entity_id] = label

    def subjects_with(self, property_id: str) -> set[str]:
        return {s for (s, p, _) in self.triples if p == property_id}

    def subjects_of_type(self, subject_type: str) -> set[str]:
        return {s for (s, p, o) in self.triples if p == INSTANCE_OF and o == subject_type}

    # -- query evaluation ---------------------------------------------------

    def fetch(self, endpoint: str, query: str) -> dict:
        """SparqlClient-compatible fetch hook."""
        self.query_log.append(query)
        count = _COUNT_RE.search(query)
        if count:
            n = sum(1 for (_, p, _) in self.triples if p == count.group("property_id"))
            return {
                "head": {"vars": ["n"]},
                "results": {"bindings": [{"n": _literal(str(n))}]},
            }
        missing = _MISSING_RE.search(query)
        if missing:
            return self._missing_subjects(query, missing)
        raise ValueError(f"mock KB does not understand this query: {query!r}")

    def _missing_subjects(self, query: str, match: re.Match) -> dict:
        subject_type = match.group("subject_type")
        property_id = match.group("property_id")
        holders = self.subjects_with(property_id)
        rows = sorted(s for s in self.subjects_of_type(subject_type) if s not in holders)
        offset_match = _OFFSET_RE.search(query)
        limit_match = _LIMIT_RE.search(query)
        start = int(offset_match.group(1)) if offset_match else 0
        end = start + int(limit_match.group(1)) if limit_match else len(rows)
        bindings = []
        for subject in rows[start:end]:
            row = {"s": _uri(subject)}
            if subject in self.labels:
                row["sLabel"] = _literal(self.labels[subject])
            bindings.append(row)
        return {"head": {"vars": ["s", "sLabel"]}, "results": {"bindings": bindings}}

    # -- HTTP wrapper ---------------------------------------------------------

    def serve(self, host: str = "127.0.0.1", port: int = 0):
        """Start a background HTTP endpoint; returns (url, shutdown callable)."""
        kb = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                length = int(self.headers.get("Content-Length", 0))
                body = self.rfile.read(length).decode("utf-8")
                query = parse_qs(body).get("query", [""])[0]
                try:
                    payload = kb.fetch("", query)
                except ValueError as exc:
                    self.send_response(400)
                    self.end_headers()
                    self.wfile.write(str(exc).encode("utf-8"))
                    return
                blob = json.dumps(payload).encode("utf-8")
                self.send_response(200)
                self.send_header("Content-Type", "application/sparql-results+json")
                self.send_header("Content-Length", str(len(blob)))
                self.end_headers()
                self.wfile.write(blob)

            def log_message(self, *args):
                pass

        server = ThreadingHTTPServer((host, port), Handler)
        thread = threading.Thread(target=server.serve_forever, daemon=True)
        thread.start()
        url = f"http://{server.server_address[0]}:{server.server_address[1]}/sparql"

        def shutdown():
            server.shutdown()
            server.server_close()
            thread.join(timeout=5)

        return url, shutdown
