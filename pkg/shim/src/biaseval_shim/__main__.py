import argparse
import sys

from .registry import build_registry
from .server import ModelConfig, serve


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="biaseval-shim",
        description="Serve one metric over line-delimited JSON on stdio.")
    parser.add_argument("--metric", required=True,
                        choices=sorted(build_registry()),
                        help="Metric to serve.")
    parser.add_argument("--model", default=None,
                        help="Checkpoint override for model-based metrics.")
    parser.add_argument("--batch-size", type=int, default=8,
                        help="Internal inference batch size.")
    args = parser.parse_args(argv)
    serve(args.metric, ModelConfig(model=args.model,
                                   batch_size=args.batch_size))
    return 0


if __name__ == "__main__":
    sys.exit(main())
