#!/usr/bin/env python3
"""Runnable shim: works from a checkout without installing the package."""

import os
import sys

try:
    from embexport.cli import main
except ImportError:
    sys.path.insert(0, os.path.join(os.path.dirname(os.path.abspath(__file__)), "src"))
    from embexport.cli import main

if __name__ == "__main__":
    sys.exit(main())
