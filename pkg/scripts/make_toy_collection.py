#!/usr/bin/env python3
"""Write the bundled toy collection (20 docs, 6 tables, 3 topics) to disk.

Usage: python scripts/make_toy_collection.py [target_dir]

Produces target_dir/parsed/*.json, topics.jsonl, and qrels.txt, ready for
`tckit ingest`.
"""

import json
import sys

from tckit.toydata import write_toy_inputs


def main() -> None:
    target = sys.argv[1] if len(sys.argv) > 1 else "toy_inputs"
    summary = write_toy_inputs(target)
    print(json.dumps(summary, indent=2))


if __name__ == "__main__":
    main()
