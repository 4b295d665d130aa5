"""Run the stitchfuzz service under uvicorn: python -m stitchfuzz.service"""

import argparse

import uvicorn

from .app import create_app


def main() -> int:
    parser = argparse.ArgumentParser(prog="python -m stitchfuzz.service")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8713)
    args = parser.parse_args()
    uvicorn.run(create_app(), host=args.host, port=args.port)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
