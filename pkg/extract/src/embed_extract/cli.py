"""Command line for the extraction tool.

    embed-extract --input train.tsv --lang kin --output records.jsonl

Flags: --input TSV, --model ID, --output PATH, --pooling mean|cls,
--batch-size N, --lang TAG (for TSVs without a language column).
"""

from __future__ import annotations

import argparse
import logging
import sys

from .extract import DEFAULT_MODEL, ExtractionError, TransformerEncoder, extract


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="embed-extract", description=__doc__)
    parser.add_argument("--input", required=True, help="tweet TSV (id, text, label[, lang])")
    parser.add_argument("--output", required=True, help="record file to write (.jsonl)")
    parser.add_argument("--model", default=DEFAULT_MODEL, help="transformers checkpoint id")
    parser.add_argument("--pooling", choices=["mean", "cls"], default="mean")
    parser.add_argument("--batch-size", type=int, default=32)
    parser.add_argument("--lang", default=None, help="language tag when the TSV has no lang column")
    parser.add_argument("--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        encoder = TransformerEncoder(model_id=args.model, pooling=args.pooling)
        counts = extract(
            args.input,
            args.output,
            encoder,
            lang=args.lang,
            batch_size=args.batch_size,
            meta={"model": args.model, "pooling": args.pooling},
        )
    except (ExtractionError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(
        f"wrote {counts['kept']} records (dimension {counts['dimension']}, "
        f"{counts['dropped']} dropped) to {args.output}"
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
