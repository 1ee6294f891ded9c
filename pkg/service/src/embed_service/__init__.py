"""HTTP sidecar serving sentence embeddings over the erhybrid wire protocol.

The resolver's remote embedding client speaks a tiny JSON protocol: POST
/embed with ``{"texts": [...], "normalize": bool}`` returns ``{"embeddings":
[[...]], "dim": int, "model": str}``, and GET /healthz advertises the
dimension. This package is the serving side of that contract. Model ids of
the form ``hash:<dim>`` select a built-in deterministic character n-gram
encoder that needs no downloads; any other id is loaded lazily through
sentence-transformers.
"""

from .app import ServiceConfig, create_app
from .encoders import HashEncoder, make_encoder

__all__ = ["HashEncoder", "ServiceConfig", "create_app", "make_encoder"]
