#!/usr/bin/env python3
"""Protocol demo adapter: every pair scores 0.5."""
import json
import sys

for line in sys.stdin:
    req = json.loads(line)
    scores = [{"id": p["id"], "score": 0.5} for p in req["pairs"]]
    print(json.dumps({"scores": scores}), flush=True)
