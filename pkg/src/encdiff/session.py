"""Session execution across a chosen local transport."""

from __future__ import annotations

import socket
import threading

from .denoise import LatentImage
from .protocol import ProtocolError, SocketChannel, queue_pair
from .roles import ClientRole, RunReport, ServerRole, SessionConfig, SessionStreams

TRANSPORTS = ("in_process", "local_socket")


def serve(server: ServerRole, channel) -> None:
    """Pump one server role until the client says goodbye or vanishes."""
    try:
        while not server.done:
            msg = channel.recv()
            for reply in server.handle(msg):
                channel.send(reply)
    except ProtocolError:
        pass  # client went away; nothing to clean up, state is per-session


def run_session(
    transport: str,
    config: SessionConfig,
    streams: SessionStreams | None = None,
) -> tuple[LatentImage, RunReport]:
    """Run a full private sampling session over the given transport.

    Both transports move identical framed bytes, so for a fixed config and
    seed the final latent is the same regardless of the choice.
    """
    if transport not in TRANSPORTS:
        raise ValueError(f"unknown transport {transport!r}; expected one of {TRANSPORTS}")
    client = ClientRole(config, streams=streams)
    server = ServerRole()

    if transport == "in_process":
        client_end, server_end = queue_pair()
        worker = threading.Thread(target=serve, args=(server, server_end), daemon=True)
        worker.start()
        try:
            latent, report = client.drive(client_end)
        finally:
            client_end.close()
            worker.join(timeout=10)
        return latent, report

    listener = socket.create_server(("127.0.0.1", 0))
    port = listener.getsockname()[1]

    def accept_and_serve():
        conn, _ = listener.accept()
        serve(server, SocketChannel(conn))

    worker = threading.Thread(target=accept_and_serve, daemon=True)
    worker.start()
    client_channel = SocketChannel(socket.create_connection(("127.0.0.1", port), timeout=10))
    try:
        latent, report = client.drive(client_channel)
    finally:
        client_channel.close()
        worker.join(timeout=10)
        listener.close()
    return latent, report
