"""Reliable, in-order message delivery between participants.

Participants are addressed by integer id: the server is ``-1`` and clients
are ``0..N-1``.  Both transports move serialized bytes, never Python objects,
so everything that crosses a participant boundary goes through the wire
format.
"""
from __future__ import annotations

import abc
import queue
import socket
import struct
import threading

from ..exceptions import ProtocolError, TransportTimeout
from .messages import Message, deserialize, serialize

DEFAULT_TIMEOUT = 30.0


class Transport(abc.ABC):
    @abc.abstractmethod
    def send(self, to: int, msg: Message) -> None: ...

    @abc.abstractmethod
    def receive(self, for_id: int, timeout: float | None = DEFAULT_TIMEOUT) -> Message:
        """Next message addressed to ``for_id``; raises :class:`TransportTimeout`."""

    def close(self) -> None:
        pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class LoopbackTransport(Transport):
    """In-process queues, one per participant.

    Every frame sent is kept in :attr:`log` as ``(sender, recipient, bytes)``
    so tests can inspect exactly what went over the wire.
    """

    def __init__(self, participants, keep_log=True):
        self._queues = {int(p): queue.Queue() for p in participants}
        self._log_lock = threading.Lock()
        self.keep_log = keep_log
        self.log: list[tuple[int, int, bytes]] = []

    def send(self, to, msg):
        if to not in self._queues:
            raise ProtocolError(f"unknown participant {to}")
        frame = serialize(msg)
        if self.keep_log:
            with self._log_lock:
                self.log.append((msg.sender_id, to, frame))
        self._queues[to].put(frame)

    def receive(self, for_id, timeout=DEFAULT_TIMEOUT):
        try:
            frame = self._queues[for_id].get(timeout=timeout)
        except queue.Empty:
            raise TransportTimeout(f"participant {for_id} received nothing within {timeout}s") from None
        return deserialize(frame)


_HEADER = struct.Struct("!I")


def _recv_exact(sock, n):
    buf = bytearray()
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            return None
        buf.extend(chunk)
    return bytes(buf)


class SocketTransport(Transport):
    """Length-prefixed frames over localhost TCP.

    Each participant listens on its own port.  A sender keeps one connection
    per recipient, which gives per-pair FIFO ordering.  Frames are a 4-byte
    big-endian length followed by the serialized message.
    """

    def __init__(self, participants, host="127.0.0.1"):
        self.host = host
        self._inbox = {}
        self._listeners = {}
        self.ports = {}
        self._conns = {}
        self._conn_lock = threading.Lock()
        self._closed = threading.Event()
        self._threads = []
        for p in participants:
            p = int(p)
            srv = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
            srv.bind((host, 0))
            srv.listen()
            self._listeners[p] = srv
            self.ports[p] = srv.getsockname()[1]
            self._inbox[p] = queue.Queue()
            self._spawn(self._accept_loop, p, srv)

    def _spawn(self, fn, *args):
        t = threading.Thread(target=fn, args=args, daemon=True)
        t.start()
        self._threads.append(t)

    def _accept_loop(self, p, srv):
        while not self._closed.is_set():
            try:
                conn, _ = srv.accept()
            except OSError:
                return
            self._spawn(self._read_loop, p, conn)

    def _read_loop(self, p, conn):
        with conn:
            while True:
                header = _recv_exact(conn, _HEADER.size)
                if header is None:
                    return
                frame = _recv_exact(conn, _HEADER.unpack(header)[0])
                if frame is None:
                    return
                self._inbox[p].put(frame)

    def _connection(self, sender, to):
        key = (sender, to)
        with self._conn_lock:
            if key not in self._conns:
                sock = socket.create_connection((self.host, self.ports[to]))
                self._conns[key] = (sock, threading.Lock())
            return self._conns[key]

    def send(self, to, msg):
        if to not in self.ports:
            raise ProtocolError(f"unknown participant {to}")
        frame = serialize(msg)
        sock, lock = self._connection(msg.sender_id, to)
        with lock:
            sock.sendall(_HEADER.pack(len(frame)) + frame)

    def receive(self, for_id, timeout=DEFAULT_TIMEOUT):
        try:
            frame = self._inbox[for_id].get(timeout=timeout)
        except queue.Empty:
            raise TransportTimeout(f"participant {for_id} received nothing within {timeout}s") from None
        return deserialize(frame)

    def close(self):
        self._closed.set()
        with self._conn_lock:
            for sock, _ in self._conns.values():
                sock.close()
            self._conns.clear()
        for srv in self._listeners.values():
            srv.close()
