#!/usr/bin/env python3
"""
orbit-splat launcher
Runs the pipeline CLI from a source checkout without installing the package
"""

import sys
import os

# Add parent directory to path to import orbit_splat
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from orbit_splat.pipeline_cli.cli import main

if __name__ == "__main__":
    sys.exit(main())
