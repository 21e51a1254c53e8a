#!/usr/bin/env python3
"""Faulty adapter: returns a score outside [-1, 1]."""
import json
import sys

for line in sys.stdin:
    req = json.loads(line)
    scores = [{"id": p["id"], "score": 1.7} for p in req["pairs"]]
    print(json.dumps({"scores": scores}), flush=True)
