import logging
import threading

from webtest.http import StopableWSGIServer

from src.errors import BindError
from src.stub.app import StubApp
from src.stub.config import StubConfig

logger = logging.getLogger(__name__)


class StubServer:
    """Handle of a running stub: bound port, base URL, shutdown."""

    def __init__(self, server: StopableWSGIServer, app: StubApp):
        self._server = server
        self.app = app
        self._stopped = threading.Event()

    @property
    def port(self) -> int:
        return int(self._server.effective_port)

    @property
    def host(self) -> str:
        return self.app.config.host

    @property
    def url(self) -> str:
        return f"http://{self.host}:{self.port}"

    def base_url(self) -> str:
        """URL including the spec's base path, ready for a TargetConfig."""
        return self.url + self.app.config.spec.base_path.rstrip("/")

    def wait(self):
        """Block until shutdown() or Ctrl-C."""
        try:
            while not self._stopped.wait(0.5):
                pass
        except KeyboardInterrupt:
            logger.info("Interrupted; shutting down stub server")
            self.shutdown()

    def shutdown(self):
        if self._stopped.is_set():
            return
        self._stopped.set()
        self._server.shutdown()
        logger.info("Stub server on port %d stopped", self.port)

    def __enter__(self) -> "StubServer":
        return self

    def __exit__(self, *exc):
        self.shutdown()


def serve(config: StubConfig, clock=None) -> StubServer:
    app = StubApp(config, clock)
    try:
        server = StopableWSGIServer.create(app, host=config.host, port=config.port)
    except OSError as e:
        raise BindError(f"Cannot bind stub server to {config.host}:{config.port}: {e}") from e
    handle = StubServer(server, app)
    logger.info(
        "Stub server for %r listening on %s (%d operations)", config.spec.title, handle.url, len(config.spec.operations)
    )
    return handle
