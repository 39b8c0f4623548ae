"""Feature encoders: deterministic mocks, fixture tables, external processes.

All encoders expose embed_image / embed_text returning vectors of a fixed
dimension, plus a running call counter. Vectors are not trusted to be
unit; the pipeline normalizes on receipt.

The mock encoder is fully specified so tests can recompute it: the
payload is hashed (sha256 over a kind tag plus the raw bytes), the first
16 digest bytes seed a Philox counter RNG as two little-endian uint64
words, and the embedding is the normalized standard-normal draw of the
requested dimension.

External encoders speak line-delimited JSON over the child's stdin and
stdout. The child first writes {"dim": N}; each request
{"id", "kind": "image"|"text", "dim", "payload"} (payload is a base64 PNG
or a UTF-8 string) gets a response {"id", "embedding": [...]} or
{"id", "error": "..."}, possibly out of order.
"""

from __future__ import annotations

import base64
import hashlib
import io
import json
import logging
import shlex
import subprocess
import threading
import time
from collections import deque

import numpy as np
from PIL import Image as PILImage

from .model import Image

logger = logging.getLogger(__name__)

DEFAULT_MOCK_DIM = 32
EXTERNAL_TIMEOUT_S = 60.0


class EncoderError(RuntimeError):
    """Encoder produced no usable embedding."""


class EncoderSpecError(ValueError):
    """Unparseable --encoder specification (a usage error, not a data error)."""


def image_to_png_bytes(image: Image) -> bytes:
    buf = io.BytesIO()
    PILImage.fromarray(np.asarray(image.pixels), "RGB").save(buf, format="PNG")
    return buf.getvalue()


class EncoderBase:
    kind = "base"
    dimension: int
    max_concurrent_requests = 1

    def __init__(self):
        self.calls = 0

    def embed_image(self, image: Image) -> np.ndarray:
        raise NotImplementedError

    def embed_text(self, text: str) -> np.ndarray:
        raise NotImplementedError

    def embed_images(self, images: list[Image]) -> list[np.ndarray]:
        return [self.embed_image(im) for im in images]

    def close(self) -> None:
        pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def _hash_embedding(tag: bytes, payload: bytes, dim: int) -> np.ndarray:
    digest = hashlib.sha256(tag + b"\x00" + payload).digest()
    lo = int.from_bytes(digest[0:8], "little")
    hi = int.from_bytes(digest[8:16], "little")
    rng = np.random.Generator(np.random.Philox(key=np.array([lo, hi], dtype=np.uint64)))
    vec = rng.standard_normal(dim)
    norm = np.linalg.norm(vec)
    if norm < 1e-12:  # astronomically unlikely
        vec = np.zeros(dim)
        vec[0] = 1.0
        return vec
    return vec / norm


def _image_payload(image: Image) -> bytes:
    w = int(image.width).to_bytes(4, "little")
    h = int(image.height).to_bytes(4, "little")
    return w + h + image.tobytes()


class MockHashEncoder(EncoderBase):
    """Deterministic hash-derived embeddings; optional fixed latency per call."""

    kind = "mock-hash"

    def __init__(self, dimension: int = DEFAULT_MOCK_DIM, latency_s: float = 0.0):
        super().__init__()
        if dimension < 2:
            raise ValueError("encoder dimension must be >= 2")
        self.dimension = dimension
        self.latency_s = latency_s

    def _pay(self):
        if self.latency_s > 0:
            time.sleep(self.latency_s)

    def embed_image(self, image: Image) -> np.ndarray:
        self.calls += 1
        self._pay()
        return _hash_embedding(b"image", _image_payload(image), self.dimension)

    def embed_text(self, text: str) -> np.ndarray:
        self.calls += 1
        self._pay()
        return _hash_embedding(b"text", text.encode("utf-8"), self.dimension)


class FixtureEncoder(EncoderBase):
    """Table-driven encoder for controlled experiments.

    Texts look up their vector by exact label. Images map to the label
    whose declared color is nearest to the image's dominant non-background
    pixel color. Unknown texts (and images with no usable pixels) fall
    back to the hash construction and are recorded in text_fallbacks /
    image_fallbacks.
    """

    kind = "fixture-table"

    def __init__(self, dimension: int, vectors: dict[str, np.ndarray],
                 colors: dict[str, tuple[int, int, int]] | None = None,
                 background: tuple[int, int, int] = (128, 128, 128)):
        super().__init__()
        if dimension < 2:
            raise ValueError("encoder dimension must be >= 2")
        self.dimension = dimension
        self.vectors = {k: np.asarray(v, np.float64) for k, v in vectors.items()}
        for label, vec in self.vectors.items():
            if vec.shape != (dimension,):
                raise ValueError(f"fixture vector {label!r} has shape {vec.shape}, expected ({dimension},)")
        self.colors = {k: tuple(int(c) for c in v) for k, v in (colors or {}).items()}
        self.background = tuple(int(c) for c in background)
        self.text_fallbacks: set[str] = set()
        self.image_fallbacks = 0

    @classmethod
    def from_file(cls, path) -> "FixtureEncoder":
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
        return cls(int(data["dim"]), data["vectors"], data.get("colors"))

    def embed_text(self, text: str) -> np.ndarray:
        self.calls += 1
        vec = self.vectors.get(text)
        if vec is not None:
            return vec.copy()
        if text not in self.text_fallbacks:
            logger.warning("fixture encoder has no entry for text %r; using hash fallback", text)
        self.text_fallbacks.add(text)
        return _hash_embedding(b"text", text.encode("utf-8"), self.dimension)

    def dominant_color(self, image: Image) -> tuple[int, int, int] | None:
        flat = np.asarray(image.pixels).reshape(-1, 3)
        fg = flat[~np.all(flat == np.asarray(self.background, np.uint8), axis=1)]
        if len(fg) == 0:
            return None
        values, counts = np.unique(fg, axis=0, return_counts=True)
        return tuple(int(c) for c in values[int(np.argmax(counts))])

    def embed_image(self, image: Image) -> np.ndarray:
        self.calls += 1
        dom = self.dominant_color(image)
        if dom is not None and self.colors:
            best = min(
                self.colors.items(),
                key=lambda kv: (sum((a - b) ** 2 for a, b in zip(kv[1], dom)), kv[0]),
            )[0]
            return self.vectors[best].copy()
        self.image_fallbacks += 1
        return _hash_embedding(b"image", _image_payload(image), self.dimension)


class ExternalEncoder(EncoderBase):
    """Encoder running as a child process, addressed over stdio JSON lines.

    Requests are pipelined up to max_concurrent_requests; responses may
    arrive out of order and are matched by id. A per-request timeout turns
    a silent child into an EncoderError naming the request.
    """

    kind = "external"

    def __init__(self, command: str, timeout_s: float = EXTERNAL_TIMEOUT_S,
                 max_concurrent_requests: int = 8):
        super().__init__()
        self.command = command
        self.timeout_s = timeout_s
        self.max_concurrent_requests = max_concurrent_requests
        self._proc = subprocess.Popen(
            shlex.split(command), stdin=subprocess.PIPE, stdout=subprocess.PIPE,
            text=True, encoding="utf-8", bufsize=1,
        )
        self._cond = threading.Condition()
        self._responses: dict[int, dict] = {}
        self._handshake: dict | None = None
        self._eof = False
        self._next_id = 0
        self._write_lock = threading.Lock()
        self._reader = threading.Thread(target=self._read_loop, daemon=True)
        self._reader.start()
        deadline = time.monotonic() + timeout_s
        with self._cond:
            while self._handshake is None:
                if self._eof:
                    raise EncoderError(f"encoder {command!r} exited before the handshake")
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    self.close()
                    raise EncoderError(f"encoder {command!r}: no handshake within {timeout_s}s")
                self._cond.wait(min(remaining, 0.2))
            try:
                self.dimension = int(self._handshake["dim"])
            except (KeyError, TypeError, ValueError):
                raise EncoderError(f"encoder {command!r}: bad handshake {self._handshake!r}") from None
        if self.dimension < 2:
            raise EncoderError(f"encoder {command!r}: dimension {self.dimension} is too small")

    def _read_loop(self):
        assert self._proc.stdout is not None
        for line in self._proc.stdout:
            line = line.strip()
            if not line:
                continue
            try:
                msg = json.loads(line)
            except json.JSONDecodeError:
                logger.warning("external encoder: discarding unparseable line %.80r", line)
                continue
            with self._cond:
                if self._handshake is None and "id" not in msg:
                    self._handshake = msg
                elif "id" in msg:
                    self._responses[int(msg["id"])] = msg
                else:
                    logger.warning("external encoder: response without id: %.80r", line)
                self._cond.notify_all()
        with self._cond:
            self._eof = True
            self._cond.notify_all()

    def _send(self, kind: str, payload: str) -> int:
        with self._cond:
            rid = self._next_id
            self._next_id += 1
            self.calls += 1
        line = json.dumps({"id": rid, "kind": kind, "dim": self.dimension, "payload": payload})
        try:
            with self._write_lock:
                assert self._proc.stdin is not None
                self._proc.stdin.write(line + "\n")
                self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise EncoderError(f"request {rid}: encoder process is gone ({exc})") from None
        return rid

    def _wait(self, rid: int) -> np.ndarray:
        deadline = time.monotonic() + self.timeout_s
        with self._cond:
            while rid not in self._responses:
                if self._eof:
                    raise EncoderError(f"request {rid}: encoder closed its stream before answering")
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    raise EncoderError(f"request {rid}: no response within {self.timeout_s}s")
                self._cond.wait(min(remaining, 0.2))
            msg = self._responses.pop(rid)
        if "error" in msg:
            raise EncoderError(f"request {rid}: {msg['error']}")
        emb = np.asarray(msg.get("embedding"), np.float64)
        if emb.shape != (self.dimension,):
            raise EncoderError(f"request {rid}: embedding has shape {emb.shape}, expected ({self.dimension},)")
        return emb

    def embed_image(self, image: Image) -> np.ndarray:
        payload = base64.b64encode(image_to_png_bytes(image)).decode("ascii")
        return self._wait(self._send("image", payload))

    def embed_text(self, text: str) -> np.ndarray:
        return self._wait(self._send("text", text))

    def embed_images(self, images: list[Image]) -> list[np.ndarray]:
        results: list[np.ndarray | None] = [None] * len(images)
        window = max(1, self.max_concurrent_requests)
        inflight: deque[tuple[int, int]] = deque()
        for i, im in enumerate(images):
            payload = base64.b64encode(image_to_png_bytes(im)).decode("ascii")
            inflight.append((i, self._send("image", payload)))
            if len(inflight) >= window:
                j, rid = inflight.popleft()
                results[j] = self._wait(rid)
        while inflight:
            j, rid = inflight.popleft()
            results[j] = self._wait(rid)
        return results  # type: ignore[return-value]

    def close(self) -> None:
        if self._proc.stdin is not None:
            try:
                self._proc.stdin.close()
            except OSError:
                pass
        try:
            self._proc.wait(timeout=5)
        except subprocess.TimeoutExpired:
            self._proc.kill()
            self._proc.wait()


def parse_encoder_spec(spec: str) -> EncoderBase:
    """Build an encoder from a CLI spec: mock[:DIM] | fixture:PATH | external:CMD."""
    if spec == "mock":
        return MockHashEncoder()
    if spec.startswith("mock:"):
        try:
            return MockHashEncoder(dimension=int(spec.split(":", 1)[1]))
        except ValueError:
            raise EncoderSpecError(f"bad mock dimension in {spec!r}") from None
    if spec.startswith("fixture:"):
        return FixtureEncoder.from_file(spec.split(":", 1)[1])
    if spec.startswith("external:"):
        return ExternalEncoder(spec.split(":", 1)[1])
    raise EncoderSpecError(f"unknown encoder spec {spec!r} (expected mock, fixture:PATH or external:CMD)")
