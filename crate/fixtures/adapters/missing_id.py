#!/usr/bin/env python3
"""Faulty adapter: scores arrive under the wrong pair ids."""
import json
import sys

for line in sys.stdin:
    req = json.loads(line)
    scores = [{"id": p["id"] + "-oops", "score": 0.0} for p in req["pairs"]]
    print(json.dumps({"scores": scores}), flush=True)
