#!/usr/bin/env python3
"""
Run the adaptive ATE simulation CLI from a source checkout
"""
import sys
from pathlib import Path

# Add the project root to the path
sys.path.append(str(Path(__file__).parent.parent))

from src.cli.main import main  # noqa: E402

if __name__ == "__main__":
    sys.exit(main())
