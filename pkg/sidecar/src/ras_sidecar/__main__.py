"""Run the sidecar: ``python -m ras_sidecar [--model-id ...] [--device gpu]``."""

import argparse
import logging

import uvicorn

from .backend import DEFAULT_MODEL_ID, ColQwenBackend
from .service import DEFAULT_QUEUE_DEPTH, create_sidecar_app


def main(argv=None) -> None:
    parser = argparse.ArgumentParser(
        prog="ras-sidecar",
        description="Embedding-model sidecar speaking the ras embed protocol.",
    )
    parser.add_argument("--model-id", default=DEFAULT_MODEL_ID)
    parser.add_argument("--device", default="cpu", choices=["cpu", "gpu"])
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=9100)
    parser.add_argument("--queue-depth", type=int, default=DEFAULT_QUEUE_DEPTH)
    args = parser.parse_args(argv)

    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(name)s %(levelname)s %(message)s")
    backend = ColQwenBackend(args.model_id, args.device)
    app = create_sidecar_app(backend, queue_depth=args.queue_depth)
    uvicorn.run(app, host=args.host, port=args.port)


if __name__ == "__main__":
    main()
