"""Live operator bridge: a small WebSocket server speaking JSON messages.

The server accepts upgrade requests on the /authority path and exchanges
one JSON object per text frame. Outbound messages are transfer_request,
outcome, and a periodic tick; the only inbound message is resolution
{"type": "resolution", "request_id": int, "chosen": str}. Anything else
inbound is dropped (and counted) rather than trusted.

The WebSocket layer is implemented here directly on sockets: framing per
RFC 6455 (FIN + opcode, 7/16/64-bit lengths, client masking), the
Sec-WebSocket-Accept handshake, ping/pong, and close. Only what the
console needs, nothing more. BridgeChannel adapts the server to the
authority channel interface, blocking in poll for a wall-clock slice per
simulation tick so a human can answer while the world keeps moving.
"""

from __future__ import annotations

import base64
import hashlib
import json
import os
import queue
import socket
import struct
import threading
from typing import Optional

from .transfer import Resolution, TransferRequest

_GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"

OP_TEXT = 0x1
OP_CLOSE = 0x8
OP_PING = 0x9
OP_PONG = 0xA


def _recv_exact(conn: socket.socket, n: int) -> bytes:
    buf = b""
    while len(buf) < n:
        chunk = conn.recv(n - len(buf))
        if not chunk:
            raise ConnectionError("peer closed mid-frame")
        buf += chunk
    return buf


def encode_frame(payload: bytes, opcode: int = OP_TEXT, mask: bool = False) -> bytes:
    head = bytes([0x80 | opcode])
    n = len(payload)
    mask_bit = 0x80 if mask else 0
    if n < 126:
        head += bytes([mask_bit | n])
    elif n < 1 << 16:
        head += bytes([mask_bit | 126]) + struct.pack("!H", n)
    else:
        head += bytes([mask_bit | 127]) + struct.pack("!Q", n)
    if mask:
        key = os.urandom(4)
        masked = bytes(b ^ key[i % 4] for i, b in enumerate(payload))
        return head + key + masked
    return head + payload


def read_frame(conn: socket.socket) -> tuple[int, bytes]:
    """One complete message: (opcode, payload), joining continuations."""
    opcode = None
    payload = b""
    while True:
        b1, b2 = _recv_exact(conn, 2)
        fin = b1 & 0x80
        op = b1 & 0x0F
        masked = b2 & 0x80
        n = b2 & 0x7F
        if n == 126:
            (n,) = struct.unpack("!H", _recv_exact(conn, 2))
        elif n == 127:
            (n,) = struct.unpack("!Q", _recv_exact(conn, 8))
        key = _recv_exact(conn, 4) if masked else None
        data = _recv_exact(conn, n) if n else b""
        if key:
            data = bytes(b ^ key[i % 4] for i, b in enumerate(data))
        if op != 0:
            opcode = op
        payload += data
        if fin:
            return opcode if opcode is not None else 0, payload


def _handshake(conn: socket.socket, path: str) -> bool:
    data = b""
    while b"\r\n\r\n" not in data:
        chunk = conn.recv(4096)
        if not chunk:
            return False
        data += chunk
        if len(data) > 65536:
            return False
    head = data.split(b"\r\n\r\n", 1)[0].decode("latin-1")
    lines = head.split("\r\n")
    parts = lines[0].split(" ")
    if len(parts) < 3 or parts[0] != "GET" or parts[1] != path:
        conn.sendall(
            b"HTTP/1.1 404 Not Found\r\nContent-Length: 0\r\n"
            b"Connection: close\r\n\r\n"
        )
        return False
    headers = {}
    for line in lines[1:]:
        if ":" in line:
            k, v = line.split(":", 1)
            headers[k.strip().lower()] = v.strip()
    key = headers.get("sec-websocket-key")
    if not key:
        conn.sendall(
            b"HTTP/1.1 400 Bad Request\r\nContent-Length: 0\r\n"
            b"Connection: close\r\n\r\n"
        )
        return False
    accept = base64.b64encode(
        hashlib.sha1((key + _GUID).encode("latin-1")).digest()
    ).decode("latin-1")
    conn.sendall(
        (
            "HTTP/1.1 101 Switching Protocols\r\n"
            "Upgrade: websocket\r\n"
            "Connection: Upgrade\r\n"
            f"Sec-WebSocket-Accept: {accept}\r\n\r\n"
        ).encode("latin-1")
    )
    return True


class BridgeServer:
    """Accepts operator consoles and fans messages in and out."""

    def __init__(self, host: str = "127.0.0.1", port: int = 0, path: str = "/authority"):
        self.path = path
        self._listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._listener.bind((host, port))
        self._listener.listen(8)
        self.host, self.port = self._listener.getsockname()
        self.inbox: "queue.Queue[Resolution]" = queue.Queue()
        self.dropped = 0
        self._clients: list[socket.socket] = []
        self._lock = threading.Lock()
        self._closing = False
        self._connected = threading.Event()
        self._accept_thread = threading.Thread(target=self._accept_loop, daemon=True)
        self._accept_thread.start()

    # -- wire handling ---------------------------------------------------

    def _accept_loop(self) -> None:
        while not self._closing:
            try:
                conn, _ = self._listener.accept()
            except OSError:
                return
            threading.Thread(
                target=self._serve_client, args=(conn,), daemon=True
            ).start()

    def _serve_client(self, conn: socket.socket) -> None:
        try:
            if not _handshake(conn, self.path):
                conn.close()
                return
        except OSError:
            conn.close()
            return
        with self._lock:
            self._clients.append(conn)
        self._connected.set()
        try:
            while not self._closing:
                opcode, payload = read_frame(conn)
                if opcode == OP_CLOSE:
                    try:
                        conn.sendall(encode_frame(b"", OP_CLOSE))
                    except OSError:
                        pass
                    break
                if opcode == OP_PING:
                    conn.sendall(encode_frame(payload, OP_PONG))
                    continue
                if opcode != OP_TEXT:
                    continue
                self._handle_text(payload)
        except (ConnectionError, OSError):
            pass
        finally:
            with self._lock:
                if conn in self._clients:
                    self._clients.remove(conn)
            conn.close()

    def _handle_text(self, payload: bytes) -> None:
        for line in payload.decode("utf-8", errors="replace").splitlines():
            line = line.strip()
            if not line:
                continue
            try:
                message = json.loads(line)
            except json.JSONDecodeError:
                self.dropped += 1
                continue
            if (
                isinstance(message, dict)
                and message.get("type") == "resolution"
                and isinstance(message.get("request_id"), int)
                and isinstance(message.get("chosen"), str)
            ):
                self.inbox.put(
                    Resolution(message["request_id"], message["chosen"])
                )
            else:
                self.dropped += 1

    # -- outbound ---------------------------------------------------------

    def broadcast(self, message: dict) -> None:
        data = encode_frame(
            json.dumps(message, sort_keys=True).encode("utf-8")
        )
        with self._lock:
            clients = list(self._clients)
        for conn in clients:
            try:
                conn.sendall(data)
            except OSError:
                with self._lock:
                    if conn in self._clients:
                        self._clients.remove(conn)

    def wait_for_client(self, timeout: Optional[float] = None) -> bool:
        return self._connected.wait(timeout)

    def client_count(self) -> int:
        with self._lock:
            return len(self._clients)

    def close(self) -> None:
        self._closing = True
        try:
            self._listener.close()
        except OSError:
            pass
        with self._lock:
            clients = list(self._clients)
            self._clients.clear()
        for conn in clients:
            try:
                conn.sendall(encode_frame(b"", OP_CLOSE))
            except OSError:
                pass
            conn.close()


class BridgeChannel:
    """Authority channel backed by a BridgeServer.

    poll blocks for up to poll_timeout wall-clock seconds, which is the
    real-time width of one simulation tick while a transfer is pending.
    """

    def __init__(self, server: BridgeServer, poll_timeout: float = 0.25):
        self.server = server
        self.poll_timeout = poll_timeout

    def submit(self, request: TransferRequest) -> None:
        message = {"type": "transfer_request"}
        message.update(request.to_json())
        self.server.broadcast(message)

    def poll(self) -> Optional[Resolution]:
        try:
            return self.server.inbox.get(timeout=self.poll_timeout)
        except queue.Empty:
            return None

    def notify(self, event: dict) -> None:
        self.server.broadcast(event)


class BridgeClient:
    """Plain-socket client for tests and terminals; masks frames as a
    client must."""

    def __init__(
        self,
        host: str,
        port: int,
        path: str = "/authority",
        timeout: float = 5.0,
    ):
        self.sock = socket.create_connection((host, port), timeout=timeout)
        key = base64.b64encode(os.urandom(16)).decode("latin-1")
        self.sock.sendall(
            (
                f"GET {path} HTTP/1.1\r\n"
                f"Host: {host}:{port}\r\n"
                "Upgrade: websocket\r\n"
                "Connection: Upgrade\r\n"
                f"Sec-WebSocket-Key: {key}\r\n"
                "Sec-WebSocket-Version: 13\r\n\r\n"
            ).encode("latin-1")
        )
        data = b""
        while b"\r\n\r\n" not in data:
            chunk = self.sock.recv(4096)
            if not chunk:
                raise ConnectionError("handshake failed: connection closed")
            data += chunk
        status = data.split(b"\r\n", 1)[0].decode("latin-1")
        if " 101 " not in status:
            raise ConnectionError(f"handshake refused: {status}")

    def send_json(self, message: dict) -> None:
        self.sock.sendall(
            encode_frame(json.dumps(message).encode("utf-8"), mask=True)
        )

    def recv_json(self, timeout: Optional[float] = None) -> Optional[dict]:
        self.sock.settimeout(timeout)
        try:
            opcode, payload = read_frame(self.sock)
        except socket.timeout:
            return None
        if opcode == OP_CLOSE:
            return None
        if opcode != OP_TEXT:
            return self.recv_json(timeout)
        return json.loads(payload.decode("utf-8"))

    def close(self) -> None:
        try:
            self.sock.sendall(encode_frame(b"", OP_CLOSE, mask=True))
        except OSError:
            pass
        self.sock.close()
