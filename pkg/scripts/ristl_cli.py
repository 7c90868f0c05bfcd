#!/usr/bin/env python3
"""
RiSTL CLI wrapper

Runs the toolkit's command-line interface from a source checkout.
"""

import os
import sys

# Add the project root to the Python path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from ristl.cli import main

if __name__ == "__main__":
    sys.exit(main())
