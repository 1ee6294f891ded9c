"""Entry point: run the sidecar with uvicorn, configured from env vars.

``ER_MODEL`` picks the encoder (default ``hash:768``) and ``ER_PORT`` the
port; flags override both for one-off runs.
"""

from __future__ import annotations

import argparse
import os
import sys

import uvicorn

from .app import DEFAULT_MAX_BATCH, ServiceConfig, create_app


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--model", default=os.environ.get("ER_MODEL", "hash:768"))
    parser.add_argument(
        "--port", type=int, default=int(os.environ.get("ER_PORT", "8901"))
    )
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--max-batch", type=int, default=DEFAULT_MAX_BATCH)
    args = parser.parse_args(argv)
    try:
        config = ServiceConfig(model=args.model, port=args.port, max_batch=args.max_batch)
    except ValueError as exc:
        print(f"embed-service: {exc}", file=sys.stderr)
        return 1
    uvicorn.run(create_app(config), host=args.host, port=config.port, log_level="info")
    return 0


if __name__ == "__main__":
    sys.exit(main())
