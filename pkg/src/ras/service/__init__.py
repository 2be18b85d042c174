"""HTTP service wrapping the engine: search, expansion, analysis, status."""

from .app import EngineState, MAX_K, ServiceConfig, create_app, execute_search
from .sessions import SessionContext, SessionStore

__all__ = [
    "EngineState",
    "MAX_K",
    "ServiceConfig",
    "SessionContext",
    "SessionStore",
    "create_app",
    "execute_search",
]
