#!/usr/bin/env python3
"""Regenerate the committed OpenAPI description (openapi.json at repo root).

Run after changing the API surface; the contract test suite asserts the
committed file matches the live application schema.
"""

import json
import sys
import tempfile
from pathlib import Path

from phonewatch.pipeline import PipelineMode
from phonewatch.server import create_app
from phonewatch.viostore import ViolationStore


def main() -> int:
    repo_root = Path(__file__).resolve().parent.parent
    with tempfile.TemporaryDirectory() as tmp:
        store = ViolationStore(Path(tmp) / "store", "export", PipelineMode.TWO_STEP)
        app = create_app(store)
        schema = app.openapi()
        store.close()
    out = repo_root / "openapi.json"
    out.write_text(json.dumps(schema, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
