#!/usr/bin/env python3
"""Faulty adapter: dies before answering anything."""
import sys

sys.stderr.write("adapter exploded on startup\n")
sys.exit(1)
