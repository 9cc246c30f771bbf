#!/usr/bin/env python3
"""Download the four MNIST IDX files into data/mnist/.

Usage: python scripts/fetch_mnist.py [--base-url URL] [--dest DIR]

The default source is a plain HTTPS mirror of the canonical files; point
--base-url at any mirror that serves the same *-ubyte.gz names (for
example an internal artifact proxy).  Files already present are kept.
"""

import argparse
import hashlib
import sys
import urllib.request
from pathlib import Path

FILES = {
    "train-images-idx3-ubyte.gz": "f68b3c2dcbeaaa9fbdd348bbdeb94873",
    "train-labels-idx1-ubyte.gz": "d53e105ee54ea40749a09fcbcd1e9432",
    "t10k-images-idx3-ubyte.gz": "9fb629c4189551a2d022fa330f9573f3",
    "t10k-labels-idx1-ubyte.gz": "ec29112dd5afa0611ce80d1b7f02629c",
}

DEFAULT_BASE = "https://raw.githubusercontent.com/fgnt/mnist/master"


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--base-url", default=DEFAULT_BASE)
    parser.add_argument("--dest", default="data/mnist")
    args = parser.parse_args()

    dest = Path(args.dest)
    dest.mkdir(parents=True, exist_ok=True)
    for name, md5 in FILES.items():
        target = dest / name
        if not target.exists():
            url = f"{args.base_url.rstrip('/')}/{name}"
            print(f"fetching {url}")
            with urllib.request.urlopen(url) as resp:
                target.write_bytes(resp.read())
        digest = hashlib.md5(target.read_bytes()).hexdigest()
        if digest != md5:
            print(f"checksum mismatch for {target}: {digest} != {md5}", file=sys.stderr)
            return 1
        print(f"ok {target}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
