"""TCP wire protocol for delegated NAND rounds across two processes.

Frame layout (integers big endian):

    +-----------+----------+------------------+-----------------+
    | magic (4) | type (1) | payload_len (4)  | payload (var)   |
    |  "CBD1"   |          | <= 2**20 bytes   |                 |
    +-----------+----------+------------------+-----------------+

Message types and payloads:

    HELLO        0x01  version (1 byte); starts a round
    PREPARE      0x02  n_copies (2 bytes) + n * 4 float64: re0 im0 re1 im1
    TRANSFORMED  0x03  same layout as PREPARE
    RESULT       0x04  s (1 byte): 0, 1, or 0xFF for inconclusive
    CLOSE        0x05  empty
    ERRORMSG     0x06  code (1 byte) + utf-8 text

Amplitudes are serialized in the canonical phase gauge (dominant amplitude
real positive): a single photon carries no global phase reference, so the
gauge is representation, not physics, and serializing raw signs would hand
an eavesdropper information no detector could see.

Session flow, client initiated: HELLO -> PREPARE -> TRANSFORMED -> RESULT,
repeated per round on one connection, ended by CLOSE from either side.  A
message in the wrong phase gets an ERRORMSG reply and a session reset to
idle; undecodable bytes get an ERRORMSG and the connection is dropped,
since a corrupt length prefix leaves no way to resynchronize.  The pad bit
r is not a field of any message and never crosses the socket.
"""

from __future__ import annotations

import socket
import struct
import threading
import time
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from .noise import NoiseModel
from .protocol import (
    ClientCapability,
    RoundResult,
    RoundTranscript,
    client_decode,
    client_transform_abstract,
    client_transform_plates,
    server_measure,
    server_prepare,
)
from .states import CobitState, TRANSPORT_ATOL, apply, rotation

MAGIC = b"CBD1"
HEADER_LEN = 9
MAX_PAYLOAD = 1 << 20
PROTOCOL_VERSION = 1
RESULT_INCONCLUSIVE = 0xFF

_HEADER = struct.Struct(">4sBI")
_STATE = struct.Struct(">4d")
_COUNT = struct.Struct(">H")


class MsgType(IntEnum):
    HELLO = 0x01
    PREPARE = 0x02
    TRANSFORMED = 0x03
    RESULT = 0x04
    CLOSE = 0x05
    ERRORMSG = 0x06


class ErrorCode(IntEnum):
    BAD_MAGIC = 1
    UNKNOWN_TYPE = 2
    TRUNCATED = 3
    LENGTH_MISMATCH = 4
    PAYLOAD_TOO_LARGE = 5
    BAD_PAYLOAD = 6
    PROTOCOL_VIOLATION = 7
    VERSION_MISMATCH = 8
    INTERNAL = 9


class WireError(Exception):
    """Typed decode or protocol failure; never lets raw exceptions escape."""

    def __init__(self, code: ErrorCode, message: str) -> None:
        self.code = code
        super().__init__(message)


@dataclass(frozen=True)
class Hello:
    version: int = PROTOCOL_VERSION


@dataclass(frozen=True)
class Prepare:
    states: tuple[CobitState, ...]


@dataclass(frozen=True)
class Transformed:
    states: tuple[CobitState, ...]


@dataclass(frozen=True)
class Result:
    s: int | None  # None encodes as RESULT_INCONCLUSIVE


@dataclass(frozen=True)
class ErrorMsg:
    code: ErrorCode
    text: str = ""


@dataclass(frozen=True)
class Close:
    pass


Message = Hello | Prepare | Transformed | Result | ErrorMsg | Close


# ---------------------------------------------------------------------------
# codec


def _pack_states(states: tuple[CobitState, ...]) -> bytes:
    if len(states) > 0xFFFF:
        raise WireError(ErrorCode.PAYLOAD_TOO_LARGE, f"{len(states)} states")
    parts = [_COUNT.pack(len(states))]
    for s in states:
        s = s.canonical_phase()
        # +0.0 flushes IEEE negative zeros; -0.0 and 0.0 are the same
        # amplitude but different bytes, and bytes are what an observer sees
        parts.append(
            _STATE.pack(
                s.amp0.real + 0.0, s.amp0.imag + 0.0, s.amp1.real + 0.0, s.amp1.imag + 0.0
            )
        )
    return b"".join(parts)


def _unpack_states(payload: bytes) -> tuple[CobitState, ...]:
    if len(payload) < _COUNT.size:
        raise WireError(ErrorCode.BAD_PAYLOAD, "missing state count")
    (n,) = _COUNT.unpack_from(payload)
    want = _COUNT.size + n * _STATE.size
    if len(payload) != want:
        raise WireError(
            ErrorCode.BAD_PAYLOAD, f"expected {want} payload bytes, got {len(payload)}"
        )
    states = []
    for i in range(n):
        re0, im0, re1, im1 = _STATE.unpack_from(payload, _COUNT.size + i * _STATE.size)
        norm_sq = re0 * re0 + im0 * im0 + re1 * re1 + im1 * im1
        if abs(norm_sq - 1.0) > 2.0 * TRANSPORT_ATOL:
            raise WireError(ErrorCode.BAD_PAYLOAD, f"state {i} not normalized")
        states.append(CobitState(complex(re0, im0), complex(re1, im1)))
    return tuple(states)


def encode_message(msg: Message) -> bytes:
    """Serialize one message as a complete frame."""
    if isinstance(msg, Hello):
        if not 0 <= msg.version <= 0xFF:
            raise WireError(ErrorCode.BAD_PAYLOAD, f"bad version {msg.version!r}")
        mtype, payload = MsgType.HELLO, bytes([msg.version])
    elif isinstance(msg, Prepare):
        mtype, payload = MsgType.PREPARE, _pack_states(msg.states)
    elif isinstance(msg, Transformed):
        mtype, payload = MsgType.TRANSFORMED, _pack_states(msg.states)
    elif isinstance(msg, Result):
        s = RESULT_INCONCLUSIVE if msg.s is None else msg.s
        if s not in (0, 1, RESULT_INCONCLUSIVE):
            raise WireError(ErrorCode.BAD_PAYLOAD, f"bad outcome {msg.s!r}")
        mtype, payload = MsgType.RESULT, bytes([s])
    elif isinstance(msg, ErrorMsg):
        mtype = MsgType.ERRORMSG
        payload = bytes([int(msg.code)]) + msg.text.encode("utf-8")
    elif isinstance(msg, Close):
        mtype, payload = MsgType.CLOSE, b""
    else:
        raise TypeError(f"not a wire message: {msg!r}")
    if len(payload) > MAX_PAYLOAD:
        raise WireError(ErrorCode.PAYLOAD_TOO_LARGE, f"{len(payload)} bytes")
    return _HEADER.pack(MAGIC, int(mtype), len(payload)) + payload


def decode_message(frame: bytes) -> Message:
    """Parse one complete frame; raises WireError with a specific code."""
    if len(frame) < HEADER_LEN:
        raise WireError(ErrorCode.TRUNCATED, f"frame of {len(frame)} bytes")
    magic, mtype, length = _HEADER.unpack_from(frame)
    if magic != MAGIC:
        raise WireError(ErrorCode.BAD_MAGIC, f"bad magic {magic!r}")
    if length > MAX_PAYLOAD:
        raise WireError(ErrorCode.PAYLOAD_TOO_LARGE, f"declared {length} bytes")
    if len(frame) < HEADER_LEN + length:
        raise WireError(
            ErrorCode.TRUNCATED,
            f"payload needs {length} bytes, {len(frame) - HEADER_LEN} present",
        )
    if len(frame) > HEADER_LEN + length:
        raise WireError(ErrorCode.LENGTH_MISMATCH, "trailing bytes after payload")
    try:
        kind = MsgType(mtype)
    except ValueError:
        raise WireError(ErrorCode.UNKNOWN_TYPE, f"msg_type 0x{mtype:02x}") from None
    payload = frame[HEADER_LEN:]

    if kind is MsgType.HELLO:
        if len(payload) != 1:
            raise WireError(ErrorCode.BAD_PAYLOAD, "HELLO payload must be 1 byte")
        return Hello(payload[0])
    if kind is MsgType.PREPARE:
        return Prepare(_unpack_states(payload))
    if kind is MsgType.TRANSFORMED:
        return Transformed(_unpack_states(payload))
    if kind is MsgType.RESULT:
        if len(payload) != 1:
            raise WireError(ErrorCode.BAD_PAYLOAD, "RESULT payload must be 1 byte")
        if payload[0] == RESULT_INCONCLUSIVE:
            return Result(None)
        if payload[0] in (0, 1):
            return Result(payload[0])
        raise WireError(ErrorCode.BAD_PAYLOAD, f"bad outcome byte {payload[0]}")
    if kind is MsgType.ERRORMSG:
        if len(payload) < 1:
            raise WireError(ErrorCode.BAD_PAYLOAD, "ERRORMSG payload missing code")
        try:
            code = ErrorCode(payload[0])
        except ValueError:
            raise WireError(ErrorCode.BAD_PAYLOAD, f"bad error code {payload[0]}") from None
        try:
            text = payload[1:].decode("utf-8")
        except UnicodeDecodeError:
            raise WireError(ErrorCode.BAD_PAYLOAD, "ERRORMSG text not utf-8") from None
        return ErrorMsg(code, text)
    if len(payload) != 0:
        raise WireError(ErrorCode.BAD_PAYLOAD, "CLOSE payload must be empty")
    return Close()


# ---------------------------------------------------------------------------
# socket helpers


def _recv_exact(sock: socket.socket, n: int) -> bytes:
    buf = bytearray()
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            raise WireError(
                ErrorCode.TRUNCATED, f"connection closed after {len(buf)}/{n} bytes"
            )
        buf.extend(chunk)
    return bytes(buf)


def read_message(sock: socket.socket) -> Message:
    """Read exactly one frame off a socket."""
    header = _recv_exact(sock, HEADER_LEN)
    magic, mtype, length = _HEADER.unpack(header)
    if magic != MAGIC:
        raise WireError(ErrorCode.BAD_MAGIC, f"bad magic {magic!r}")
    if length > MAX_PAYLOAD:
        raise WireError(ErrorCode.PAYLOAD_TOO_LARGE, f"declared {length} bytes")
    return decode_message(header + _recv_exact(sock, length))


def write_message(sock: socket.socket, msg: Message) -> None:
    sock.sendall(encode_message(msg))


def parse_endpoint(endpoint: str) -> tuple[str, int]:
    """'host:port' -> (host, port); port 0 asks the OS for a free port."""
    host, sep, port = endpoint.rpartition(":")
    if not sep or not host or not port.isdigit() or int(port) > 0xFFFF:
        raise ValueError(f"endpoint must look like host:port, got {endpoint!r}")
    return host, int(port)


# ---------------------------------------------------------------------------
# server


@dataclass(frozen=True)
class ServerWireConfig:
    n_copies: int = 1
    noise: NoiseModel = field(default_factory=NoiseModel)
    seed: int = 0
    time_min: float = 0.0


@dataclass(frozen=True)
class ServerRoundRecord:
    """Server-side log entry: what it sent, received and measured.

    Deliberately has no field for the client inputs or the pad; the server
    never learns them.
    """

    session_id: int
    round_index: int
    n_prepared: int
    n_received: int
    s: int | None


class WireServer:
    """Threaded TCP server; one session per connection, sessions isolated."""

    def __init__(self, host: str, port: int, config: ServerWireConfig | None = None):
        self.config = config or ServerWireConfig()
        self._listener = socket.create_server((host, port))
        self._threads: list[threading.Thread] = []
        self._conns: set[socket.socket] = set()
        self._lock = threading.Lock()
        self._session_counter = 0
        self._closing = False
        self.transcripts: list[ServerRoundRecord] = []

    @property
    def port(self) -> int:
        return self._listener.getsockname()[1]

    @property
    def host(self) -> str:
        return self._listener.getsockname()[0]

    def start(self) -> "WireServer":
        t = threading.Thread(target=self._accept_loop, daemon=True)
        t.start()
        self._threads.append(t)
        return self

    def _accept_loop(self) -> None:
        while True:
            try:
                conn, _ = self._listener.accept()
            except OSError:
                return  # listener closed
            with self._lock:
                self._session_counter += 1
                session_id = self._session_counter
                self._conns.add(conn)
            t = threading.Thread(
                target=self._serve_session, args=(conn, session_id), daemon=True
            )
            t.start()
            self._threads.append(t)

    def _serve_session(self, conn: socket.socket, session_id: int) -> None:
        rng = np.random.default_rng((self.config.seed, session_id))
        noise = self.config.noise
        state = "idle"
        pending_rot: np.ndarray | None = None
        n_prepared = 0
        round_index = 0
        try:
            while True:
                try:
                    msg = read_message(conn)
                except WireError as err:
                    if err.code is not ErrorCode.TRUNCATED:
                        self._try_send(conn, ErrorMsg(err.code, str(err)))
                    return
                if isinstance(msg, Close):
                    return
                if isinstance(msg, ErrorMsg):
                    return
                if isinstance(msg, Hello):
                    if state != "idle":
                        self._try_send(
                            conn,
                            ErrorMsg(ErrorCode.PROTOCOL_VIOLATION, "HELLO mid-round"),
                        )
                        state = "idle"
                        continue
                    if msg.version != PROTOCOL_VERSION:
                        self._try_send(
                            conn,
                            ErrorMsg(
                                ErrorCode.VERSION_MISMATCH,
                                f"server speaks version {PROTOCOL_VERSION}",
                            ),
                        )
                        return
                    batch = server_prepare(self.config.n_copies)
                    eps = noise.drift.sample(self.config.time_min, rng)
                    pending_rot = rotation(eps) if eps != 0.0 else None
                    if pending_rot is not None:
                        batch = [apply(pending_rot, s) for s in batch]
                    n_prepared = len(batch)
                    write_message(conn, Prepare(tuple(batch)))
                    state = "awaiting_transform"
                    continue
                if isinstance(msg, Transformed):
                    if state != "awaiting_transform":
                        self._try_send(
                            conn,
                            ErrorMsg(
                                ErrorCode.PROTOCOL_VIOLATION,
                                "TRANSFORMED without a pending round",
                            ),
                        )
                        state = "idle"
                        continue
                    batch = list(msg.states)
                    if pending_rot is not None:
                        batch = [apply(pending_rot, s) for s in batch]
                    if noise.loss_prob > 0.0:
                        batch = [s for s in batch if rng.random() >= noise.loss_prob]
                    s = server_measure(
                        batch, rng, noise.detector_efficiency, noise.dark_count_prob
                    )
                    write_message(conn, Result(s))
                    with self._lock:
                        self.transcripts.append(
                            ServerRoundRecord(
                                session_id=session_id,
                                round_index=round_index,
                                n_prepared=n_prepared,
                                n_received=len(msg.states),
                                s=s,
                            )
                        )
                    round_index += 1
                    state = "idle"
                    pending_rot = None
                    continue
                # PREPARE/RESULT arriving at the server is a role reversal.
                self._try_send(
                    conn,
                    ErrorMsg(ErrorCode.PROTOCOL_VIOLATION, "unexpected message role"),
                )
                state = "idle"
        except OSError:
            return
        finally:
            conn.close()
            with self._lock:
                self._conns.discard(conn)

    @staticmethod
    def _try_send(conn: socket.socket, msg: Message) -> None:
        try:
            write_message(conn, msg)
        except OSError:
            pass

    def close(self) -> None:
        """Stop listening and drop every active session."""
        self._closing = True
        self._listener.close()
        with self._lock:
            conns = list(self._conns)
        for conn in conns:
            try:
                conn.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
            conn.close()

    def __enter__(self) -> "WireServer":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.close()


def run_server(endpoint: str, config: ServerWireConfig | None = None) -> None:
    """Blocking server loop for the CLI; returns only on interrupt."""
    host, port = parse_endpoint(endpoint)
    server = WireServer(host, port, config).start()
    try:
        while True:
            time.sleep(0.2)
    finally:
        server.close()


# ---------------------------------------------------------------------------
# client


@dataclass(frozen=True)
class ClientWireConfig:
    mode: str = "plates"
    timeout_s: float = 5.0
    seed: int = 0
    plate_jitter_sigma: float = 0.0

    def __post_init__(self) -> None:
        if self.mode not in ("plates", "abstract"):
            raise ValueError(f"mode must be 'plates' or 'abstract', got {self.mode!r}")
        if self.timeout_s <= 0.0:
            raise ValueError("timeout_s must be > 0")


class WireClient:
    """Client side of the wire protocol; the pad bit stays inside this object."""

    def __init__(self, host: str, port: int, config: ClientWireConfig | None = None):
        self.config = config or ClientWireConfig()
        self._rng = np.random.default_rng(self.config.seed)
        self._cap = ClientCapability(self._rng)
        self._sock = socket.create_connection((host, port), timeout=self.config.timeout_s)

    def run_round(self, a: int, b: int, force_r: int | None = None) -> RoundResult:
        """One delegated NAND over the socket; network failures -> inconclusive."""
        t0 = time.monotonic_ns()
        try:
            write_message(self._sock, Hello())
            msg = read_message(self._sock)
            if isinstance(msg, ErrorMsg):
                raise WireError(msg.code, msg.text)
            if not isinstance(msg, Prepare):
                raise WireError(
                    ErrorCode.PROTOCOL_VIOLATION, f"expected PREPARE, got {msg!r}"
                )
            batch = list(msg.states)
            if self.config.mode == "plates":
                batch, r = client_transform_plates(
                    batch,
                    a,
                    b,
                    self._cap,
                    self.config.plate_jitter_sigma,
                    self._rng,
                    force_r,
                )
            else:
                batch, r = client_transform_abstract(batch, a, b, self._cap, force_r)
            t1 = time.monotonic_ns()
            write_message(self._sock, Transformed(tuple(batch)))
            msg = read_message(self._sock)
            if isinstance(msg, ErrorMsg):
                raise WireError(msg.code, msg.text)
            if not isinstance(msg, Result):
                raise WireError(
                    ErrorCode.PROTOCOL_VIOLATION, f"expected RESULT, got {msg!r}"
                )
            s = msg.s
            cause = "no_detection" if s is None else None
        except socket.timeout:
            return self._abandoned(a, b, t0, "timeout")
        except (WireError, OSError) as err:
            if isinstance(err, WireError) and err.code is ErrorCode.TRUNCATED:
                return self._abandoned(a, b, t0, "connection_lost")
            if isinstance(err, OSError):
                return self._abandoned(a, b, t0, "connection_lost")
            raise
        t2 = time.monotonic_ns()
        decoded = client_decode(s, r)
        transcript = RoundTranscript(
            a=a,
            b=b,
            r=r,
            n_copies=len(batch),
            s=s,
            decoded=decoded,
            mode=self.config.mode,
            ticks=(t0, t1, t2),
        )
        return RoundResult(decoded, transcript, None, cause)

    def _abandoned(self, a: int, b: int, t0: int, cause: str) -> RoundResult:
        now = time.monotonic_ns()
        transcript = RoundTranscript(
            a=a,
            b=b,
            r=-1,  # pad burned with the round; never reported out
            n_copies=0,
            s=None,
            decoded=None,
            mode=self.config.mode,
            ticks=(t0, now, now),
        )
        return RoundResult(None, transcript, None, cause)

    def close(self) -> None:
        try:
            write_message(self._sock, Close())
        except OSError:
            pass
        self._sock.close()

    def __enter__(self) -> "WireClient":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def run_client(
    endpoint: str, a: int, b: int, config: ClientWireConfig | None = None
) -> RoundResult:
    """Connect, run one round, close."""
    host, port = parse_endpoint(endpoint)
    with WireClient(host, port, config) as client:
        return client.run_round(a, b)


# ---------------------------------------------------------------------------
# passive transcript tap


class TranscriptTap:
    """TCP relay that records both directions of the byte stream.

    Used by the wire-level blindness checks: whatever a passive network
    observer could see of a session goes through here and is handed to the
    guessing strategies as reassembled frames.
    """

    def __init__(self, upstream_host: str, upstream_port: int):
        self._upstream = (upstream_host, upstream_port)
        self._listener = socket.create_server(("127.0.0.1", 0))
        self._lock = threading.Lock()
        self._to_server = bytearray()
        self._to_client = bytearray()

    @property
    def port(self) -> int:
        return self._listener.getsockname()[1]

    def start(self) -> "TranscriptTap":
        threading.Thread(target=self._accept_loop, daemon=True).start()
        return self

    def _accept_loop(self) -> None:
        while True:
            try:
                conn, _ = self._listener.accept()
            except OSError:
                return
            up = socket.create_connection(self._upstream)
            threading.Thread(
                target=self._pump, args=(conn, up, self._to_server), daemon=True
            ).start()
            threading.Thread(
                target=self._pump, args=(up, conn, self._to_client), daemon=True
            ).start()

    def _pump(self, src: socket.socket, dst: socket.socket, log: bytearray) -> None:
        try:
            while True:
                chunk = src.recv(65536)
                if not chunk:
                    break
                with self._lock:
                    log.extend(chunk)
                dst.sendall(chunk)
        except OSError:
            pass
        finally:
            try:
                dst.shutdown(socket.SHUT_WR)
            except OSError:
                pass

    @staticmethod
    def _split_frames(buf: bytes) -> list[tuple[Message, bytes]]:
        frames = []
        off = 0
        while off + HEADER_LEN <= len(buf):
            _, _, length = _HEADER.unpack_from(buf, off)
            end = off + HEADER_LEN + length
            if end > len(buf):
                break
            raw = buf[off:end]
            frames.append((decode_message(raw), raw))
            off = end
        return frames

    def rounds(self) -> list[dict]:
        """Per-round captures: client frames paired with server frames in order."""
        with self._lock:
            c = bytes(self._to_server)
            s = bytes(self._to_client)
        client_frames = self._split_frames(c)
        server_frames = self._split_frames(s)
        hellos = [i for i, (m, _) in enumerate(client_frames) if isinstance(m, Hello)]
        transforms = [
            (m, raw) for m, raw in client_frames if isinstance(m, Transformed)
        ]
        prepares = [(m, raw) for m, raw in server_frames if isinstance(m, Prepare)]
        results = [(m, raw) for m, raw in server_frames if isinstance(m, Result)]
        out = []
        for k in range(min(len(hellos), len(transforms), len(prepares), len(results))):
            out.append(
                {
                    "prepared": prepares[k][0].states,
                    "transformed": transforms[k][0].states,
                    "s": results[k][0].s,
                    "raw": client_frames[hellos[k]][1]
                    + prepares[k][1]
                    + transforms[k][1]
                    + results[k][1],
                }
            )
        return out

    def close(self) -> None:
        self._listener.close()

    def __enter__(self) -> "TranscriptTap":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.close()
