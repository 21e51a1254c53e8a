#!/usr/bin/env python3
"""Faulty adapter: answers correctly, then exits non-zero at shutdown."""
import json
import sys

for line in sys.stdin:
    req = json.loads(line)
    scores = [{"id": p["id"], "score": 0.5} for p in req["pairs"]]
    print(json.dumps({"scores": scores}), flush=True)
sys.exit(3)
