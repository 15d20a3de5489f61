import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from plugblend.evaluation import KeywordClassifier
from plugblend.toys import make_topic_toys


@pytest.fixture(scope="session")
def bundle():
    return make_topic_toys()


@pytest.fixture(scope="session")
def keyword_classifier(bundle):
    return KeywordClassifier(bundle.lexicons)


def start_provider_server(base, guide=None, classifier=None):
    """Tiny HTTP server speaking the provider and classifier protocols."""

    class Handler(BaseHTTPRequestHandler):
        def log_message(self, *args):
            pass

        def _send(self, status, payload):
            body = json.dumps(payload).encode()
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def do_GET(self):
            if self.path == "/v1/meta":
                self._send(
                    200,
                    {
                        "vocab_size": base.vocab_size,
                        "codes": list(guide.codes) if guide else [],
                    },
                )
            else:
                self._send(404, {"error": f"no such route {self.path}"})

        def do_POST(self):
            length = int(self.headers.get("Content-Length", 0))
            body = json.loads(self.rfile.read(length) or b"{}")
            try:
                if self.path == "/v1/logits":
                    code = body.get("code")
                    if code is None:
                        logits = base.next_logits(body["context"])
                    else:
                        logits = guide.cc_next_logits(body["context"], code)
                    self._send(200, {"logits": [float(x) for x in logits]})
                elif self.path == "/v1/tokenize":
                    self._send(200, {"tokens": base.tokenize(body["text"])})
                elif self.path == "/v1/detokenize":
                    self._send(200, {"text": base.detokenize(body["tokens"])})
                elif self.path == "/v1/classify" and classifier is not None:
                    scores = classifier.classify(body["text"], body["labels"])
                    self._send(200, {"scores": scores})
                else:
                    self._send(404, {"error": f"no such route {self.path}"})
            except Exception as exc:  # surface provider errors as protocol errors
                self._send(400, {"error": str(exc)})

    server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    return server, f"http://127.0.0.1:{server.server_port}"


@pytest.fixture()
def provider_server(bundle, keyword_classifier):
    server, url = start_provider_server(bundle.base, bundle.guide, keyword_classifier)
    yield url
    server.shutdown()
