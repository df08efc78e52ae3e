#!/usr/bin/env python
"""Main entry point for the likelihood embedding experiments"""

import sys
from pathlib import Path

# Add project root to path
sys.path.insert(0, str(Path(__file__).parent))

from likelihood_embeddings.cli.app import launch_app

if __name__ == "__main__":
    try:
        sys.exit(launch_app())
    except KeyboardInterrupt:
        print("\n\nRun stopped by user")
        sys.exit(1)
