"""Framed-stream enhancement service.

Protocol, per request on a TCP connection:
  request  = 4-byte big-endian payload length + binary PPM bytes
  response = 4-byte big-endian payload length + enhanced PPM bytes
A malformed request gets an error frame (4-byte length 0 followed by one
UTF-8 error line) and the connection is closed. Payloads above the size cap
are rejected without reading the body. Connections may pipeline multiple
valid requests.
"""

from __future__ import annotations

import socket
import struct
import threading
from concurrent.futures import ThreadPoolExecutor

from .image import load_ppm, save_ppm
from .nn import WeightStore, enhance

DEFAULT_MAX_BYTES = 32 * 1024 * 1024
_LEN = struct.Struct(">I")


def _recv_exact(conn: socket.socket, n: int) -> bytes | None:
    """Read exactly n bytes; None on EOF before completion."""
    buf = bytearray()
    while len(buf) < n:
        chunk = conn.recv(min(65536, n - len(buf)))
        if not chunk:
            return None
        buf.extend(chunk)
    return bytes(buf)


def send_frame(conn: socket.socket, payload: bytes) -> None:
    conn.sendall(_LEN.pack(len(payload)) + payload)


def recv_frame(conn: socket.socket) -> tuple[int, bytes] | None:
    """Read one response frame; returns (declared_length, payload_or_error_line).

    For an error frame the declared length is 0 and the payload is the error
    line (read until EOF). Returns None on clean EOF before a header.
    """
    header = _recv_exact(conn, 4)
    if header is None:
        return None
    (length,) = _LEN.unpack(header)
    if length == 0:
        chunks = []
        while True:
            chunk = conn.recv(65536)
            if not chunk:
                break
            chunks.append(chunk)
            if chunk.endswith(b"\n"):
                break
        return 0, b"".join(chunks)
    payload = _recv_exact(conn, length)
    if payload is None:
        return None
    return length, payload


class EnhanceServer:
    """Bounded-worker TCP server wrapping the stateless enhancement pipeline."""

    def __init__(
        self,
        host: str,
        port: int,
        encoder_ws: WeightStore,
        detail_ws: WeightStore,
        max_bytes: int = DEFAULT_MAX_BYTES,
        workers: int = 4,
        detail_input: str = "original",
    ):
        self._encoder_ws = encoder_ws
        self._detail_ws = detail_ws
        self._max_bytes = max_bytes
        self._detail_input = detail_input
        self._listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._listener.bind((host, port))
        self._listener.listen(64)
        self._pool = ThreadPoolExecutor(max_workers=workers)
        self._accept_thread: threading.Thread | None = None
        self._closing = threading.Event()

    @property
    def address(self) -> tuple[str, int]:
        return self._listener.getsockname()[:2]

    def _error_frame(self, conn: socket.socket, message: str) -> None:
        try:
            conn.sendall(_LEN.pack(0) + f"error: {message}\n".encode("utf-8"))
        except OSError:
            pass

    def _handle(self, conn: socket.socket) -> None:
        with conn:
            while True:
                header = _recv_exact(conn, 4)
                if header is None:
                    return
                (length,) = _LEN.unpack(header)
                if length == 0:
                    self._error_frame(conn, "zero-length payload")
                    return
                if length > self._max_bytes:
                    # reject before reading the body
                    self._error_frame(conn, f"payload {length} exceeds cap {self._max_bytes}")
                    return
                body = _recv_exact(conn, length)
                if body is None:
                    return
                try:
                    img = load_ppm(body)
                    out = enhance(img, self._encoder_ws, self._detail_ws, self._detail_input)
                    payload = save_ppm(out)
                except Exception as exc:
                    self._error_frame(conn, str(exc))
                    return
                try:
                    send_frame(conn, payload)
                except OSError:
                    return

    def _accept_loop(self) -> None:
        while not self._closing.is_set():
            try:
                conn, _ = self._listener.accept()
            except OSError:
                return
            self._pool.submit(self._handle, conn)

    def start(self) -> None:
        self._accept_thread = threading.Thread(target=self._accept_loop, daemon=True)
        self._accept_thread.start()

    def stop(self) -> None:
        self._closing.set()
        try:
            self._listener.close()
        except OSError:
            pass
        if self._accept_thread is not None:
            self._accept_thread.join(timeout=5)
        self._pool.shutdown(wait=True)

    def serve_forever(self) -> None:
        self.start()
        try:
            while True:
                self._accept_thread.join(timeout=1)
                if not self._accept_thread.is_alive():
                    return
        except KeyboardInterrupt:
            self.stop()


def request_enhance(host: str, port: int, ppm_bytes: bytes, timeout: float = 30.0) -> tuple[int, bytes]:
    """One-shot client: send a PPM, return (declared_length, payload).

    Length 0 marks an error frame whose payload is the UTF-8 error line.
    """
    with socket.create_connection((host, port), timeout=timeout) as conn:
        send_frame(conn, ppm_bytes)
        frame = recv_frame(conn)
        if frame is None:
            raise ConnectionError("server closed the connection without a response")
        return frame
