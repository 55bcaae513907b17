"""Command-line entry point: `python -m refserver` or `refserver`.

Flags take precedence over the CHECKPOINT / DEVICE / PORT / HOST /
MAX_BATCH environment variables.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .config import ServerConfig
from .errors import ModelError


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="refserver",
        description="Reference HTTP server for the promptable-segmentation "
                    "wire protocol",
    )
    parser.add_argument("--checkpoint", default=None,
                        help="model checkpoint file; omit for the "
                             "deterministic stub model")
    parser.add_argument("--model-type", default=None,
                        help="override the checkpoint's inferred size tag")
    parser.add_argument("--device", default=None, help="e.g. cpu, cuda, cuda:1")
    parser.add_argument("--host", default=None)
    parser.add_argument("--port", type=int, default=None)
    parser.add_argument("--max-batch", type=int, default=None,
                        help="largest prompt batch accepted per request")
    parser.add_argument("--log-level", default="info")
    args = parser.parse_args(argv)

    logging.basicConfig(level=args.log_level.upper(),
                        format="%(asctime)s %(levelname)s %(name)s %(message)s")
    try:
        config = ServerConfig.from_env(
            checkpoint=args.checkpoint,
            device=args.device,
            host=args.host,
            port=args.port,
            max_batch=args.max_batch,
        )
        from .app import create_app
        from .model import build_model

        model = build_model(config, model_type=args.model_type)
        app = create_app(config, model=model)
    except ModelError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2

    import uvicorn

    logging.getLogger("refserver").info(
        "serving model %s on %s:%d", model.name, config.host, config.port
    )
    uvicorn.run(app, host=config.host, port=config.port,
                log_level=args.log_level)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
