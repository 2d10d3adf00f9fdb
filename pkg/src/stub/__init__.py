from .app import StubApp, default_response, handle_request, minimal_body
from .config import StubConfig, StubOverride, documents_status
from .server import StubServer, serve
