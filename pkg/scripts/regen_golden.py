#!/usr/bin/env python3
"""Regenerate the checked-in golden files under tests/golden/.

Run only when an intentional rendering or simulator change invalidates
them, then re-inspect the output before committing.
"""

import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "tests"))

from golden_scene import build_annotated_seed42  # noqa: E402

from proximity_sentinel.ppm import write_ppm  # noqa: E402


def main() -> None:
    out_dir = os.path.join(os.path.dirname(__file__), "..", "tests", "golden")
    os.makedirs(out_dir, exist_ok=True)
    frame = build_annotated_seed42()
    path = os.path.join(out_dir, "annotated_seed42.ppm")
    write_ppm(path, frame.pixels)
    print(f"wrote {path} ({frame.width}x{frame.height})")


if __name__ == "__main__":
    main()
