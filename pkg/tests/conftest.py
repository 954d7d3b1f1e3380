import base64
import io
import json
import sys
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np
import pytest
from PIL import Image

from photoloop.core import PixelImage

# 8-bit buffer served by the /gray8 route: values 0, 64, 128, 255 in a 2x2 image
GRAY8 = np.array([[0, 64], [128, 255]], dtype=np.uint8)


def _png_b64(arr: np.ndarray) -> str:
    buf = io.BytesIO()
    Image.fromarray(arr).save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode()


class _Handler(BaseHTTPRequestHandler):
    def log_message(self, *args):
        pass

    def _send(self, status, body):
        data = body.encode() if isinstance(body, str) else json.dumps(body).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def do_POST(self):
        body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
        self.server.requests.append((self.path, body))
        if self.path == "/echo":
            self._send(200, {"image": body["image"]})
        elif self.path == "/fail500":
            self._send(500, {"error": "boom"})
        elif self.path == "/gray8":
            self._send(200, {"image": _png_b64(GRAY8)})
        elif self.path == "/notjson":
            self._send(200, "<html>")
        elif self.path == "/scorer":
            self._send(200, {"score": 7.0, "range": [0, 10]})
        elif self.path == "/perceiver":
            self._send(200, {"scene": "Landscape", "actions": [
                {"id": "ext_bright", "category": "GlobalTone", "instruction": "brighten",
                 "params": {"operator": "brightness", "delta": 0.1}},
                {"id": "ext_sky", "category": "SemanticEdit", "instruction": "bluer sky", "params": None},
            ]})
        else:
            self._send(404, {"error": "no route"})


@pytest.fixture(scope="session")
def mock_server():
    srv = ThreadingHTTPServer(("127.0.0.1", 0), _Handler)
    srv.requests = []
    t = threading.Thread(target=srv.serve_forever, daemon=True)
    t.start()
    srv.base = f"http://127.0.0.1:{srv.server_address[1]}"
    yield srv
    srv.shutdown()


DEAD_URL = "http://127.0.0.1:9/never"


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def photo():
    from photoloop.analysis.images import synthetic_photo

    return synthetic_photo(3, 64, 80)


def random_image(rng, h=8, w=8) -> PixelImage:
    return PixelImage(rng.random((h, w, 3)))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(results):
        status, title, detail = results[num]
        terminalreporter.write_line(f"[{status}] {num:>2}. {title}: {detail}")
