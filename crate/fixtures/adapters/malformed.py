#!/usr/bin/env python3
"""Faulty adapter: answers with something that is not JSON."""
import sys

for _ in sys.stdin:
    print("not json", flush=True)
